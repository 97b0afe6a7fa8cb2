use super::real::Real;
use crate::feature_store::Label;

/// Cross-entropy `-ln softmax(logits)[label]`, computed via log-sum-exp.
pub fn cross_entropy<F: Real>(logits: &[F], label: Label) -> F {
    cross_entropy_with_grad(logits, label).0
}

/// Loss together with its gradient `softmax(logits) - onehot(label)`.
pub fn cross_entropy_with_grad<F: Real>(logits: &[F], label: Label) -> (F, Vec<F>) {
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let sum: F = logits.iter().map(|&v| (v - max).exp()).sum();
    let lse = max + sum.ln();
    let target = label.index();
    let grad = logits
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let p = (v - lse).exp();
            if i == target {
                p - F::one()
            } else {
                p
            }
        })
        .collect();
    (lse - logits[target], grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln2() {
        for label in [Label::Nc, Label::Mci] {
            let l = cross_entropy(&[0.0f64, 0.0], label);
            assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        }
    }

    #[test]
    fn saturated_correct_is_near_zero() {
        assert!(cross_entropy(&[20.0f64, -20.0], Label::Nc) < 1e-8);
        assert!((cross_entropy(&[20.0f64, -20.0], Label::Mci) - 40.0).abs() < 1e-9);
    }

    #[test]
    fn matches_high_precision_oracle() {
        // -ln(e^{l_y} / sum e^{l_j}) for a few logit pairs, evaluated with
        // mpmath at 40 digits.
        let cases: [([f64; 2], Label, f64); 4] = [
            ([0.3, -1.7], Label::Nc, 0.126_928_011_042_972_5),
            ([0.3, -1.7], Label::Mci, 2.126_928_011_042_972_4),
            ([-4.25, 3.5], Label::Mci, 0.000_430_649_797_638_819_8),
            ([12.0, 11.999], Label::Mci, 0.693_647_305_559_939_8),
        ];
        for (logits, label, expected) in cases {
            let got = cross_entropy(&logits, label);
            assert!(
                (got - expected).abs() < 1e-10,
                "{logits:?} {label:?}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn gradient_sums_to_zero() {
        let (_, g) = cross_entropy_with_grad(&[1.5f64, -0.5], Label::Mci);
        assert!((g[0] + g[1]).abs() < 1e-15);
        assert!(g[1] < 0.0);
    }
}
