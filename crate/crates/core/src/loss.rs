//! Softmax cross-entropy on logits and its gradient.

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-log softmax(logits)[label]`, computed via log-sum-exp.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

/// Gradient of [`cross_entropy`] w.r.t. the logits: `softmax(logits) - onehot(label)`.
pub fn cross_entropy_grad(probs: &[f64], label: usize) -> Vec<f64> {
    let mut e = probs.to_vec();
    e[label] -= 1.0;
    e
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_logits() {
        let logits = [0.0; 10];
        assert!((cross_entropy(&logits, 0) - 10f64.ln()).abs() < 1e-15);
        let e = cross_entropy_grad(&softmax(&logits), 0);
        assert!((e[0] - (0.1 - 1.0)).abs() < 1e-15);
        assert!(e[1..].iter().all(|&v| (v - 0.1).abs() < 1e-15));
    }

    #[test]
    fn saturated_correct_prediction_has_vanishing_error() {
        let logits = [100.0, -100.0, -100.0];
        let e = cross_entropy_grad(&softmax(&logits), 0);
        assert!(e.iter().all(|v| v.abs() < 1e-80));
        assert!(cross_entropy(&logits, 0) < 1e-80);
    }

    #[test]
    fn argmax_prefers_first_on_ties() {
        assert_eq!(argmax(&[0.0, 0.0]), 0);
        assert_eq!(argmax(&[0.1, 0.3, 0.2]), 1);
    }

    proptest! {
        #[test]
        fn gradient_matches_central_differences(
            logits in prop::collection::vec(-5.0f64..5.0, 2..8),
            seed in 0usize..100,
        ) {
            let label = seed % logits.len();
            let e = cross_entropy_grad(&softmax(&logits), label);
            let h = 1e-5;
            for i in 0..logits.len() {
                let mut p = logits.clone();
                let mut m = logits.clone();
                p[i] += h;
                m[i] -= h;
                let fd = (cross_entropy(&p, label) - cross_entropy(&m, label)) / (2.0 * h);
                prop_assert!((fd - e[i]).abs() < 1e-6);
            }
        }

        #[test]
        fn probabilities_sum_to_one(logits in prop::collection::vec(-100.0f64..100.0, 1..12)) {
            let s: f64 = softmax(&logits).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
