//! The trainable classifier: learnable layer fusion feeding a stacked
//! bidirectional LSTM with projection and a binary head.

mod checkpoint;
mod fusion;
mod loss;
mod network;
mod real;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use fusion::{fuse, prior_init, select_layer, FusionConfig, InitMode, LayerWeights, Sequence};
pub use loss::{cross_entropy, cross_entropy_with_grad};
pub use network::{
    BiLstmLayer, ForwardCache, Gradients, InputMode, Linear, LstmDirection, ModelConfig, ModelParams, ParamKind,
    CLASSES,
};
pub use real::{softmax, Real};
