use crate::error::{Error, Result};
use crate::rng::Rng;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax (max subtracted before exponentiation).
pub fn softmax(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    softmax_in_place(&mut out);
    out
}

pub fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    let inv = 1.0 / sum;
    v.iter_mut().for_each(|x| *x *= inv);
}

/// `-ln probs[target]` in nats.
pub fn cross_entropy(probs: &[f64], target: usize) -> Result<f64> {
    probs
        .get(target)
        .map(|p| -p.ln())
        .ok_or_else(|| {
            Error::InvalidArgument(format!(
                "target id {target} out of range for {} classes",
                probs.len()
            ))
        })
}

/// Inverted-dropout mask: each entry is `1/(1-p)` with probability `1-p`,
/// otherwise 0.
pub fn dropout_mask(dim: usize, p: f64, rng: &mut Rng) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "dropout probability must be in [0, 1), got {p}"
        )));
    }
    if p == 0.0 {
        return Ok(vec![1.0; dim]);
    }
    let keep = 1.0 - p;
    let scale = 1.0 / keep;
    Ok((0..dim)
        .map(|_| if rng.bernoulli(keep) { scale } else { 0.0 })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn softmax_cases() {
        let u = softmax(&[0.0, 0.0, 0.0]);
        for p in &u {
            assert_abs_diff_eq!(*p, 1.0 / 3.0, epsilon = 1e-15);
        }
        let big = softmax(&[1000.0, 0.0]);
        assert!(big.iter().all(|p| p.is_finite()));
        assert_abs_diff_eq!(big[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(big[1], 0.0, epsilon = 1e-12);
        let l = softmax(&[1f64.ln(), 2f64.ln(), 3f64.ln()]);
        for (p, e) in l.iter().zip([1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0]) {
            assert_abs_diff_eq!(*p, e, epsilon = 1e-15);
        }
    }

    #[test]
    fn cross_entropy_cases() {
        assert_eq!(cross_entropy(&[1.0, 0.0], 0).unwrap(), 0.0);
        assert_abs_diff_eq!(cross_entropy(&[0.25; 4], 3).unwrap(), 4f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(
            cross_entropy(&[0.5, 0.25, 0.25], 1).unwrap(),
            1.3862943611198906,
            epsilon = 1e-12
        );
        assert!(cross_entropy(&[0.5, 0.5], 2).is_err());
    }

    #[test]
    fn dropout_identity_and_rate() {
        let mut rng = Rng::new(3);
        assert_eq!(dropout_mask(5, 0.0, &mut rng).unwrap(), vec![1.0; 5]);
        assert!(dropout_mask(5, 1.0, &mut rng).is_err());
        let n = 100_000;
        let mask = dropout_mask(n, 0.5, &mut rng).unwrap();
        let kept = mask.iter().filter(|&&m| m > 0.0).count() as f64 / n as f64;
        assert!((kept - 0.5).abs() < 0.01, "keep rate {kept}");
        assert!(mask.iter().all(|&m| m == 0.0 || m == 2.0));
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert_abs_diff_eq!(sigmoid(0.0), 0.5);
    }
}
