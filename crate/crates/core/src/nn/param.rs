use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Freeze groups of the encoder-decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamGroup {
    SrcEmbed,
    TgtEmbed,
    EncFwd,
    EncBwd,
    Attention,
    Dec,
    Output,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 7] = [
        ParamGroup::SrcEmbed,
        ParamGroup::TgtEmbed,
        ParamGroup::EncFwd,
        ParamGroup::EncBwd,
        ParamGroup::Attention,
        ParamGroup::Dec,
        ParamGroup::Output,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ParamGroup::SrcEmbed => "src-embed",
            ParamGroup::TgtEmbed => "tgt-embed",
            ParamGroup::EncFwd => "enc-fwd",
            ParamGroup::EncBwd => "enc-bwd",
            ParamGroup::Attention => "attention",
            ParamGroup::Dec => "dec",
            ParamGroup::Output => "output",
        }
    }
}

impl fmt::Display for ParamGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParamGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ParamGroup::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| Error::Malformed(format!("unknown parameter group {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub group: ParamGroup,
    pub value: Matrix,
    pub grad: Matrix,
    pub frozen: bool,
}

impl Parameter {
    pub fn new(name: impl Into<String>, group: ParamGroup, value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Parameter {
            name: name.into(),
            group,
            value,
            grad,
            frozen: false,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// L2 norm over the gradients of all unfrozen parameters.
pub fn global_grad_norm(params: &[Parameter]) -> f64 {
    params
        .iter()
        .filter(|p| !p.frozen)
        .map(|p| p.grad.norm_sq())
        .sum::<f64>()
        .sqrt()
}

/// Rescales unfrozen gradients so their global norm is at most `threshold`.
/// Returns the applied scale (1 when no clipping happened).
pub fn clip_gradients(params: &mut [Parameter], threshold: f64) -> f64 {
    assert!(threshold > 0.0, "clip threshold must be positive");
    let norm = global_grad_norm(params);
    if norm <= threshold {
        return 1.0;
    }
    let scale = threshold / norm;
    for p in params.iter_mut().filter(|p| !p.frozen) {
        p.grad.scale(scale);
    }
    scale
}

/// `value -= lr * grad` for unfrozen parameters, then zeroes every gradient.
pub fn sgd_step(params: &mut [Parameter], learning_rate: f64) {
    for p in params.iter_mut() {
        if !p.frozen {
            p.value.add_scaled(&p.grad, -learning_rate);
        }
        p.zero_grad();
    }
}

/// Clean parameter values saved before weight noise was added.
#[derive(Debug, Default)]
pub struct NoiseSnapshot {
    saved: Vec<(usize, Matrix)>,
}

impl NoiseSnapshot {
    /// Puts the clean values back, bit for bit.
    pub fn restore(self, params: &mut [Parameter]) {
        for (i, value) in self.saved {
            params[i].value = value;
        }
    }
}

/// Adds N(0, stddev^2) noise to every unfrozen parameter value. The returned
/// snapshot restores the clean weights after the noisy forward/backward pass.
pub fn add_gaussian_noise(params: &mut [Parameter], stddev: f64, rng: &mut Rng) -> NoiseSnapshot {
    assert!(stddev >= 0.0, "noise stddev must be >= 0");
    let mut snapshot = NoiseSnapshot::default();
    if stddev == 0.0 {
        return snapshot;
    }
    for (i, p) in params.iter_mut().enumerate() {
        if p.frozen {
            continue;
        }
        snapshot.saved.push((i, p.value.clone()));
        for v in p.value.data_mut() {
            *v += rng.normal(0.0, stddev);
        }
    }
    snapshot
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64, g: f64) -> Parameter {
        let mut p = Parameter::new("p", ParamGroup::Dec, Matrix::column(vec![v]));
        p.grad = Matrix::column(vec![g]);
        p
    }

    #[test]
    fn clip_scales_down() {
        let mut ps = vec![scalar(0.0, 6.0), scalar(0.0, 8.0)];
        let s = clip_gradients(&mut ps, 5.0);
        assert!((s - 0.5).abs() < 1e-15);
        assert!((global_grad_norm(&ps) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn clip_noop_below_threshold() {
        let mut ps = vec![scalar(0.0, 3.0)];
        assert_eq!(clip_gradients(&mut ps, 5.0), 1.0);
        assert_eq!(ps[0].grad.data(), &[3.0]);
        let mut ps = vec![scalar(0.0, 0.5)];
        assert_eq!(clip_gradients(&mut ps, 1.0), 1.0);
    }

    #[test]
    fn sgd_updates_and_zeroes() {
        let mut ps = vec![scalar(1.0, 2.0)];
        sgd_step(&mut ps, 0.1);
        assert!((ps[0].value.data()[0] - 0.8).abs() < 1e-15);
        assert_eq!(ps[0].grad.data(), &[0.0]);
    }

    #[test]
    fn sgd_skips_frozen() {
        let mut ps = vec![scalar(1.0, 2.0)];
        ps[0].frozen = true;
        sgd_step(&mut ps, 0.1);
        assert_eq!(ps[0].value.data(), &[1.0]);
    }

    #[test]
    fn sgd_deterministic() {
        let mut a = vec![scalar(0.3, 0.7)];
        let mut b = a.clone();
        sgd_step(&mut a, 0.05);
        sgd_step(&mut b, 0.05);
        assert_eq!(a, b);
    }

    #[test]
    fn noise_restores_exactly() {
        let mut rng = Rng::new(5);
        let mut ps = vec![scalar(0.123456789, 0.0), scalar(-2.5, 0.0)];
        ps[1].frozen = true;
        let clean = ps.clone();
        let snap = add_gaussian_noise(&mut ps, 0.01, &mut rng);
        assert_ne!(ps[0].value, clean[0].value);
        assert_eq!(ps[1].value, clean[1].value);
        snap.restore(&mut ps);
        assert_eq!(ps, clean);
        let snap = add_gaussian_noise(&mut ps, 0.0, &mut rng);
        assert_eq!(ps, clean);
        snap.restore(&mut ps);
    }

    #[test]
    fn noise_mean_near_zero() {
        let mut rng = Rng::new(77);
        let n = 1_000_000;
        let sigma = 0.01;
        let mut p = vec![Parameter::new("n", ParamGroup::Dec, Matrix::zeros(n, 1))];
        let _ = add_gaussian_noise(&mut p, sigma, &mut rng);
        let mean = p[0].value.data().iter().sum::<f64>() / n as f64;
        // Standard error is sigma/1000; allow three of them.
        assert!(mean.abs() < 3.0 * sigma / 1000.0, "mean {mean}");
    }

    #[test]
    fn group_names_roundtrip() {
        for g in ParamGroup::ALL {
            assert_eq!(g.as_str().parse::<ParamGroup>().unwrap(), g);
        }
    }
}
