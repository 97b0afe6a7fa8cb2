use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Scalar type the model can run in. Training uses `f32`; `f64` exists for
/// gradient checking.
pub trait Real: Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static {
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable")
    }

    fn of_f32(v: f32) -> Self {
        Self::from_f32(v).expect("f32 is representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion")
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub(crate) fn sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// Numerically stable softmax.
pub fn softmax<F: Real>(logits: &[F]) -> Vec<F> {
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = logits.iter().map(|&v| (v - max).exp()).collect();
    let total: F = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `out[r] += sum_c m[r, c] * v[c]` for a row-major `rows x v.len()` matrix.
pub(crate) fn matvec_acc<F: Real>(m: &[F], v: &[F], out: &mut [F]) {
    let cols = v.len();
    debug_assert_eq!(m.len(), out.len() * cols);
    for (o, row) in out.iter_mut().zip(m.chunks_exact(cols)) {
        let mut s = F::zero();
        for (&a, &b) in row.iter().zip(v) {
            s = s + a * b;
        }
        *o = *o + s;
    }
}

/// `out[c] += sum_r m[r, c] * v[r]`, i.e. transpose product.
pub(crate) fn matvec_t_acc<F: Real>(m: &[F], v: &[F], out: &mut [F]) {
    let cols = out.len();
    debug_assert_eq!(m.len(), v.len() * cols);
    for (row, &s) in m.chunks_exact(cols).zip(v) {
        if s == F::zero() {
            continue;
        }
        for (o, &a) in out.iter_mut().zip(row) {
            *o = *o + a * s;
        }
    }
}

/// `m[r, c] += u[r] * v[c]`.
pub(crate) fn outer_acc<F: Real>(m: &mut [F], u: &[F], v: &[F]) {
    let cols = v.len();
    for (row, &s) in m.chunks_exact_mut(cols).zip(u) {
        if s == F::zero() {
            continue;
        }
        for (a, &b) in row.iter_mut().zip(v) {
            *a = *a + s * b;
        }
    }
}
