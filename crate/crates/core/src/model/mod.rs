//! Attentional encoder-decoder: bidirectional GRU encoder, feedforward
//! alignment model, GRU decoder conditioned on the context vector, and a
//! tanh output layer followed by a softmax over the target vocabulary.

mod backward;
mod forward;

use serde::{Deserialize, Serialize};

pub use backward::{loss_and_gradients, ForwardTrace};
pub use forward::{Annotations, DecoderState, Dropout};

use crate::corpus::Origin;
use crate::error::{Error, Result};
use crate::nn::{Matrix, ParamGroup, Parameter};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub embed: usize,
    pub hidden: usize,
    pub attention: usize,
    pub output: usize,
    pub src_vocab: usize,
    pub tgt_vocab: usize,
}

impl ModelDims {
    pub fn annotation(&self) -> usize {
        2 * self.hidden
    }

    fn validate(&self) -> Result<()> {
        let sizes = [
            self.embed,
            self.hidden,
            self.attention,
            self.output,
            self.src_vocab,
            self.tgt_vocab,
        ];
        if sizes.contains(&0) {
            return Err(Error::Config(format!("model dimensions must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Positions of each parameter in [`ModelParams::params`].
pub mod slot {
    pub const SRC_EMBED: usize = 0;
    pub const TGT_EMBED: usize = 1;
    /// Four consecutive slots: `w`, `u_zr`, `u_h`, `b`.
    pub const ENC_FWD: usize = 2;
    pub const ENC_BWD: usize = 6;
    pub const ATT_W: usize = 10;
    pub const ATT_U: usize = 11;
    pub const ATT_V: usize = 12;
    pub const DEC: usize = 13;
    pub const DEC_INIT: usize = 17;
    pub const OUT_W: usize = 18;
    pub const OUT_B: usize = 19;
    pub const PROJ_W: usize = 20;
    pub const PROJ_B: usize = 21;
    pub const COUNT: usize = 22;
}

/// Groups frozen for monolingual minibatches with a dummy source.
pub const MONO_FROZEN_GROUPS: [ParamGroup; 4] = [
    ParamGroup::SrcEmbed,
    ParamGroup::EncFwd,
    ParamGroup::EncBwd,
    ParamGroup::Attention,
];

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    dims: ModelDims,
    params: Vec<Parameter>,
}

impl ModelParams {
    /// Random initialization: orthogonal square blocks in the recurrent
    /// matrices, `uniform(-init_scale, init_scale)` elsewhere, zero biases.
    pub fn new(dims: ModelDims, init_scale: f64, rng: &mut Rng) -> Result<Self> {
        dims.validate()?;
        let (e, h, a, o) = (dims.embed, dims.hidden, dims.attention, dims.output);
        let ann = dims.annotation();
        let mut uniform = |rows: usize, cols: usize, rng: &mut Rng| {
            Matrix::from_fn(rows, cols, |_, _| rng.uniform_range(-init_scale, init_scale))
        };
        let mut params = Vec::with_capacity(slot::COUNT);
        params.push(Parameter::new("src_embed", ParamGroup::SrcEmbed, uniform(dims.src_vocab, e, rng)));
        params.push(Parameter::new("tgt_embed", ParamGroup::TgtEmbed, uniform(dims.tgt_vocab, e, rng)));
        for (prefix, group, input) in [
            ("enc_fwd", ParamGroup::EncFwd, e),
            ("enc_bwd", ParamGroup::EncBwd, e),
        ] {
            params.extend(gru_params(prefix, group, input, h, &mut uniform, rng));
        }
        params.push(Parameter::new("att_w", ParamGroup::Attention, uniform(a, h, rng)));
        params.push(Parameter::new("att_u", ParamGroup::Attention, uniform(a, ann, rng)));
        params.push(Parameter::new("att_v", ParamGroup::Attention, uniform(1, a, rng)));
        params.extend(gru_params("dec", ParamGroup::Dec, e + ann, h, &mut uniform, rng));
        params.push(Parameter::new("dec_init", ParamGroup::Dec, uniform(h, h, rng)));
        params.push(Parameter::new("out_w", ParamGroup::Output, uniform(o, h + e + ann, rng)));
        params.push(Parameter::new("out_b", ParamGroup::Output, Matrix::zeros(o, 1)));
        params.push(Parameter::new("proj_w", ParamGroup::Output, uniform(dims.tgt_vocab, o, rng)));
        params.push(Parameter::new("proj_b", ParamGroup::Output, Matrix::zeros(dims.tgt_vocab, 1)));
        debug_assert_eq!(params.len(), slot::COUNT);
        Ok(ModelParams { dims, params })
    }

    /// Reassembles a model from checkpointed parameters, checking shapes.
    pub fn from_parts(dims: ModelDims, params: Vec<Parameter>) -> Result<Self> {
        dims.validate()?;
        let mut rng = Rng::new(0);
        let template = ModelParams::new(dims, 0.0, &mut rng)?;
        if params.len() != slot::COUNT {
            return Err(Error::Dimension(format!(
                "expected {} parameters, got {}",
                slot::COUNT,
                params.len()
            )));
        }
        for (want, got) in template.params.iter().zip(&params) {
            if want.name != got.name || want.group != got.group || want.value.shape() != got.value.shape() {
                return Err(Error::Dimension(format!(
                    "parameter {} ({:?}) does not match expected {} ({:?})",
                    got.name,
                    got.value.shape(),
                    want.name,
                    want.value.shape()
                )));
            }
        }
        Ok(ModelParams { dims, params })
    }

    pub fn dims(&self) -> &ModelDims {
        &self.dims
    }

    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Parameter] {
        &mut self.params
    }

    pub fn into_params(self) -> Vec<Parameter> {
        self.params
    }

    pub(crate) fn value(&self, slot: usize) -> &Matrix {
        &self.params[slot].value
    }

    /// Zeroed gradient buffers, one per parameter.
    pub fn zero_grads(&self) -> Vec<Matrix> {
        self.params
            .iter()
            .map(|p| Matrix::zeros(p.value.rows(), p.value.cols()))
            .collect()
    }

    pub fn set_frozen(&mut self, groups: &[ParamGroup]) {
        for p in &mut self.params {
            p.frozen = groups.contains(&p.group);
        }
    }

    /// Monolingual dummy-source batches train only the decoder side;
    /// parallel and synthetic batches train everything.
    pub fn freeze_for_origin(&mut self, origin: Origin) {
        match origin {
            Origin::MonoDummy => self.set_frozen(&MONO_FROZEN_GROUPS),
            Origin::Parallel | Origin::Synthetic => self.set_frozen(&[]),
        }
    }

    pub fn frozen_groups(&self) -> Vec<ParamGroup> {
        let mut groups: Vec<ParamGroup> = self
            .params
            .iter()
            .filter(|p| p.frozen)
            .map(|p| p.group)
            .collect();
        groups.dedup();
        groups
    }

    /// SHA-256 over the bit patterns of one group's values.
    pub fn group_hash(&self, group: ParamGroup) -> String {
        let mut bytes = Vec::new();
        for p in self.params.iter().filter(|p| p.group == group) {
            for v in p.value.data() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        crate::io::sha256_hex(&bytes)
    }
}

fn gru_params(
    prefix: &str,
    group: ParamGroup,
    input: usize,
    hidden: usize,
    uniform: &mut impl FnMut(usize, usize, &mut Rng) -> Matrix,
    rng: &mut Rng,
) -> Vec<Parameter> {
    let w = uniform(3 * hidden, input, rng);
    let mut u_zr = Matrix::zeros(2 * hidden, hidden);
    for block in 0..2 {
        let q = orthogonal(hidden, rng);
        for r in 0..hidden {
            u_zr.row_mut(block * hidden + r).copy_from_slice(q.row(r));
        }
    }
    let u_h = orthogonal(hidden, rng);
    vec![
        Parameter::new(format!("{prefix}_w"), group, w),
        Parameter::new(format!("{prefix}_u_zr"), group, u_zr),
        Parameter::new(format!("{prefix}_u_h"), group, u_h),
        Parameter::new(format!("{prefix}_b"), group, Matrix::zeros(3 * hidden, 1)),
    ]
}

/// Random orthogonal matrix: Gram-Schmidt over Gaussian rows.
fn orthogonal(n: usize, rng: &mut Rng) -> Matrix {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    while rows.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.normal(0.0, 1.0)).collect();
        for q in &rows {
            let d = crate::nn::dot(&v, q);
            crate::nn::axpy(-d, q, &mut v);
        }
        let norm = crate::nn::dot(&v, &v).sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            rows.push(v);
        }
    }
    Matrix::from_fn(n, n, |r, c| rows[r][c])
}

#[cfg(test)]
mod tests;
