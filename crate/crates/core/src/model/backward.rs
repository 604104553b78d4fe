//! Hand-derived reverse pass through the decoder, attention and both
//! encoder directions (backpropagation through time).

use super::forward::{Annotations, Dropout, EncoderCache, StepCache};
use super::{slot, ModelParams};
use crate::corpus::SentencePair;
use crate::error::Result;
use crate::nn::{axpy, gemv_t_acc, ger_acc, gru_backward, Matrix};

/// Everything the forward pass of one sentence pair recorded.
pub struct ForwardTrace {
    source: Vec<u32>,
    target: Vec<u32>,
    ann: Annotations,
    enc: EncoderCache,
    s0: Vec<f64>,
    pub(super) steps: Vec<StepCache>,
    loss: f64,
}

impl ForwardTrace {
    /// Teacher-forced forward pass that keeps every intermediate.
    pub fn record(
        model: &ModelParams,
        pair: &SentencePair<u32>,
        mut dropout: Option<&mut Dropout<'_>>,
    ) -> Result<Self> {
        model.check_pair(pair)?;
        let (ann, enc) = model.encode_cached(&pair.source);
        let mut state = model.initial_state(&ann);
        let s0 = state.s.clone();
        let mut steps = Vec::with_capacity(pair.target.len());
        let mut loss = 0.0;
        for &y in &pair.target {
            let cache = model.step_cached(&state, &ann, dropout.as_deref_mut());
            loss -= cache.probs[y as usize].ln();
            state.s.clone_from(&cache.gru.h);
            state.y_prev = Some(y);
            state.step += 1;
            steps.push(cache);
        }
        Ok(ForwardTrace {
            source: pair.source.clone(),
            target: pair.target.clone(),
            ann,
            enc,
            s0,
            steps,
            loss,
        })
    }

    /// Sentence loss in nats.
    pub fn loss(&self) -> f64 {
        self.loss
    }

    pub fn token_count(&self) -> usize {
        self.target.len()
    }

    /// Adds `scale * d(loss)/d(theta)` for every parameter into `grads`
    /// (laid out like [`ModelParams::params`]).
    pub fn backward(&self, model: &ModelParams, scale: f64, grads: &mut [Matrix]) {
        let d = model.dims;
        let (h, e) = (d.hidden, d.embed);
        let m = self.ann.len();
        let mut d_ann = Matrix::zeros(m, 2 * h);
        let mut d_keys = Matrix::zeros(m, d.attention);
        let mut ds = vec![0.0; h];

        let proj_w = model.value(slot::PROJ_W);
        let out_w = model.value(slot::OUT_W);
        let att_w = model.value(slot::ATT_W);
        let att_v = model.value(slot::ATT_V);
        let dec = model.gru(slot::DEC);

        for (step, &y) in self.steps.iter().zip(&self.target).rev() {
            // softmax + cross-entropy
            let mut dlogits: Vec<f64> = step.probs.iter().map(|p| p * scale).collect();
            dlogits[y as usize] -= scale;
            let t_used: Vec<f64> = match &step.mask {
                Some(mask) => step.t.iter().zip(mask).map(|(a, b)| a * b).collect(),
                None => step.t.clone(),
            };
            ger_acc(&mut grads[slot::PROJ_W], &dlogits, &t_used);
            axpy(1.0, &dlogits, grads[slot::PROJ_B].data_mut());
            let mut dt = vec![0.0; d.output];
            gemv_t_acc(proj_w, &dlogits, &mut dt);
            if let Some(mask) = &step.mask {
                dt.iter_mut().zip(mask).for_each(|(g, m)| *g *= m);
            }
            // tanh output layer
            let da: Vec<f64> = dt.iter().zip(&step.t).map(|(g, t)| g * (1.0 - t * t)).collect();
            ger_acc(&mut grads[slot::OUT_W], &da, &step.out_in);
            axpy(1.0, &da, grads[slot::OUT_B].data_mut());
            let mut d_out_in = vec![0.0; step.out_in.len()];
            gemv_t_acc(out_w, &da, &mut d_out_in);
            // out_in = [s_i ; x] with x = [embed ; c]
            axpy(1.0, &d_out_in[..h], &mut ds);
            let mut dx = d_out_in[h..].to_vec();

            // decoder GRU
            let mut ds_prev = vec![0.0; h];
            gru_backward(
                dec,
                &step.gru,
                &ds,
                &mut grads[slot::DEC..slot::DEC + 4],
                &mut dx,
                &mut ds_prev,
            );
            if let Some(prev) = step.y_prev {
                axpy(1.0, &dx[..e], grads[slot::TGT_EMBED].row_mut(prev as usize));
            }
            let dc = &dx[e..];

            // attention
            let att = &step.att;
            let dalpha: Vec<f64> = (0..m).map(|j| crate::nn::dot(dc, self.ann.h.row(j))).collect();
            let weighted: f64 = att.alpha.iter().zip(&dalpha).map(|(a, g)| a * g).sum();
            let mut dws = vec![0.0; d.attention];
            for j in 0..m {
                axpy(att.alpha[j], dc, d_ann.row_mut(j));
                let de = att.alpha[j] * (dalpha[j] - weighted);
                if de == 0.0 {
                    continue;
                }
                let act = att.act.row(j);
                axpy(de, act, grads[slot::ATT_V].data_mut());
                let dk = d_keys.row_mut(j);
                for ((k, (ws, t)), v) in dk.iter_mut().zip(dws.iter_mut().zip(act)).zip(att_v.data()) {
                    let g = de * v * (1.0 - t * t);
                    *k += g;
                    *ws += g;
                }
            }
            ger_acc(&mut grads[slot::ATT_W], &dws, &step.s_prev);
            gemv_t_acc(att_w, &dws, &mut ds_prev);
            ds = ds_prev;
        }

        // s_0 = tanh(W_init bwd_1)
        let bwd_first = &self.ann.h.row(0)[h..];
        let da0: Vec<f64> = ds.iter().zip(&self.s0).map(|(g, s)| g * (1.0 - s * s)).collect();
        ger_acc(&mut grads[slot::DEC_INIT], &da0, bwd_first);
        gemv_t_acc(model.value(slot::DEC_INIT), &da0, &mut d_ann.row_mut(0)[h..]);

        // keys_j = U_a h_j
        let att_u = model.value(slot::ATT_U);
        for j in 0..m {
            ger_acc(&mut grads[slot::ATT_U], d_keys.row(j), self.ann.h.row(j));
            gemv_t_acc(att_u, d_keys.row(j), d_ann.row_mut(j));
        }

        // encoder directions
        let fwd = model.gru(slot::ENC_FWD);
        let mut carry = vec![0.0; h];
        for j in (0..m).rev() {
            let dh: Vec<f64> = d_ann.row(j)[..h].iter().zip(&carry).map(|(a, b)| a + b).collect();
            let mut dx = vec![0.0; e];
            let mut dprev = vec![0.0; h];
            gru_backward(fwd, &self.enc.fwd[j], &dh, &mut grads[slot::ENC_FWD..slot::ENC_FWD + 4], &mut dx, &mut dprev);
            axpy(1.0, &dx, grads[slot::SRC_EMBED].row_mut(self.source[j] as usize));
            carry = dprev;
        }
        let bwd = model.gru(slot::ENC_BWD);
        let mut carry = vec![0.0; h];
        for j in 0..m {
            let dh: Vec<f64> = d_ann.row(j)[h..].iter().zip(&carry).map(|(a, b)| a + b).collect();
            let mut dx = vec![0.0; e];
            let mut dprev = vec![0.0; h];
            gru_backward(bwd, &self.enc.bwd[j], &dh, &mut grads[slot::ENC_BWD..slot::ENC_BWD + 4], &mut dx, &mut dprev);
            axpy(1.0, &dx, grads[slot::SRC_EMBED].row_mut(self.source[j] as usize));
            carry = dprev;
        }
    }
}

/// Forward and backward for one pair; gradients scaled by `scale` are added
/// into `grads`. Returns `(loss_nats, target_tokens)`.
pub fn loss_and_gradients(
    model: &ModelParams,
    pair: &SentencePair<u32>,
    dropout: Option<&mut Dropout<'_>>,
    scale: f64,
    grads: &mut [Matrix],
) -> Result<(f64, usize)> {
    let trace = ForwardTrace::record(model, pair, dropout)?;
    trace.backward(model, scale, grads);
    Ok((trace.loss(), trace.token_count()))
}
