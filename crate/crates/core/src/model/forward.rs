use super::{slot, ModelParams};
use crate::corpus::{SentencePair, Vocabulary};
use crate::error::{Error, Result};
use crate::nn::{
    dot, dropout_mask, gemv_acc, gru_forward, softmax_in_place, GruCache, GruWeights, Matrix,
};
use crate::rng::Rng;

/// Encoder output for one source sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotations {
    /// Row `j` is `[fwd_j ; bwd_j]`.
    pub h: Matrix,
    /// Row `j` is `U_a h_j`, precomputed once per sentence.
    pub keys: Matrix,
}

impl Annotations {
    pub fn len(&self) -> usize {
        self.h.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.h.rows() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    pub s: Vec<f64>,
    /// `None` before the first target word (zero embedding).
    pub y_prev: Option<u32>,
    pub step: usize,
}

impl DecoderState {
    /// Records the token chosen at the step that produced this state.
    pub fn with_token(mut self, y: u32) -> Self {
        self.y_prev = Some(y);
        self
    }
}

/// Output-layer dropout used in training mode.
#[derive(Debug)]
pub struct Dropout<'a> {
    pub p: f64,
    pub rng: &'a mut Rng,
}

pub(crate) struct EncoderCache {
    pub fwd: Vec<GruCache>,
    /// Indexed by source position (computed right to left).
    pub bwd: Vec<GruCache>,
}

pub(crate) struct AttentionCache {
    pub alpha: Vec<f64>,
    /// Row `j` is `tanh(W_a s + keys_j)`.
    pub act: Matrix,
    pub c: Vec<f64>,
}

pub(crate) struct StepCache {
    pub s_prev: Vec<f64>,
    pub y_prev: Option<u32>,
    pub att: AttentionCache,
    pub gru: GruCache,
    pub out_in: Vec<f64>,
    pub t: Vec<f64>,
    pub mask: Option<Vec<f64>>,
    pub probs: Vec<f64>,
}

impl ModelParams {
    pub(crate) fn gru(&self, base: usize) -> GruWeights<'_> {
        GruWeights {
            w: self.value(base),
            u_zr: self.value(base + 1),
            u_h: self.value(base + 2),
            b: self.value(base + 3),
        }
    }

    /// Bidirectional encoding of `src_ids`.
    pub fn encode(&self, src_ids: &[u32]) -> Result<Annotations> {
        self.check_source(src_ids)?;
        Ok(self.encode_cached(src_ids).0)
    }

    pub(crate) fn check_source(&self, src_ids: &[u32]) -> Result<()> {
        if src_ids.is_empty() {
            return Err(Error::InvalidArgument("empty source sentence".into()));
        }
        if let Some(&bad) = src_ids.iter().find(|&&i| i as usize >= self.dims.src_vocab) {
            return Err(Error::InvalidArgument(format!(
                "source id {bad} outside vocabulary of {}",
                self.dims.src_vocab
            )));
        }
        Ok(())
    }

    pub(crate) fn encode_cached(&self, src_ids: &[u32]) -> (Annotations, EncoderCache) {
        let h = self.dims.hidden;
        let m = src_ids.len();
        let emb = self.value(slot::SRC_EMBED);
        let fwd_w = self.gru(slot::ENC_FWD);
        let bwd_w = self.gru(slot::ENC_BWD);

        let mut fwd = Vec::with_capacity(m);
        let mut state = vec![0.0; h];
        for &id in src_ids {
            let c = gru_forward(emb.row(id as usize), &state, fwd_w);
            state.clone_from(&c.h);
            fwd.push(c);
        }
        let mut bwd: Vec<Option<GruCache>> = (0..m).map(|_| None).collect();
        let mut state = vec![0.0; h];
        for j in (0..m).rev() {
            let c = gru_forward(emb.row(src_ids[j] as usize), &state, bwd_w);
            state.clone_from(&c.h);
            bwd[j] = Some(c);
        }
        let bwd: Vec<GruCache> = bwd.into_iter().map(|c| c.expect("filled")).collect();

        let mut ann = Matrix::zeros(m, 2 * h);
        for j in 0..m {
            let row = ann.row_mut(j);
            row[..h].copy_from_slice(&fwd[j].h);
            row[h..].copy_from_slice(&bwd[j].h);
        }
        let att_u = self.value(slot::ATT_U);
        let mut keys = Matrix::zeros(m, self.dims.attention);
        for j in 0..m {
            let row = ann.row(j).to_vec();
            gemv_acc(att_u, &row, keys.row_mut(j));
        }
        (Annotations { h: ann, keys }, EncoderCache { fwd, bwd })
    }

    /// `s_0 = tanh(W_init bwd_1)`.
    pub fn initial_state(&self, ann: &Annotations) -> DecoderState {
        let h = self.dims.hidden;
        let mut s = vec![0.0; h];
        gemv_acc(self.value(slot::DEC_INIT), &ann.h.row(0)[h..], &mut s);
        s.iter_mut().for_each(|v| *v = v.tanh());
        DecoderState {
            s,
            y_prev: None,
            step: 0,
        }
    }

    /// Alignment weights over source positions and the context vector.
    pub fn attend(&self, s_prev: &[f64], ann: &Annotations) -> (Vec<f64>, Vec<f64>) {
        let cache = self.attend_cached(s_prev, ann);
        (cache.alpha, cache.c)
    }

    pub(crate) fn attend_cached(&self, s_prev: &[f64], ann: &Annotations) -> AttentionCache {
        let a = self.dims.attention;
        let m = ann.len();
        let mut ws = vec![0.0; a];
        gemv_acc(self.value(slot::ATT_W), s_prev, &mut ws);
        let v = self.value(slot::ATT_V).data();
        let mut act = Matrix::zeros(m, a);
        let mut alpha = vec![0.0; m];
        for j in 0..m {
            let row = act.row_mut(j);
            for ((r, w), k) in row.iter_mut().zip(&ws).zip(ann.keys.row(j)) {
                *r = (w + k).tanh();
            }
            alpha[j] = dot(v, row);
        }
        softmax_in_place(&mut alpha);
        let mut c = vec![0.0; ann.h.cols()];
        for (j, &w) in alpha.iter().enumerate() {
            crate::nn::axpy(w, ann.h.row(j), &mut c);
        }
        AttentionCache { alpha, act, c }
    }

    /// One decoder step: attend with `s_{i-1}`, advance the GRU on
    /// `[embed(y_{i-1}); c_i]`, and predict from `[s_i; embed(y_{i-1}); c_i]`.
    ///
    /// The returned state still carries `y_{i-1}`; callers record the token
    /// they pick with [`DecoderState::with_token`].
    pub fn decode_step(
        &self,
        state: &DecoderState,
        ann: &Annotations,
        dropout: Option<&mut Dropout<'_>>,
    ) -> (DecoderState, Vec<f64>) {
        let cache = self.step_cached(state, ann, dropout);
        let next = DecoderState {
            s: cache.gru.h.clone(),
            y_prev: state.y_prev,
            step: state.step + 1,
        };
        (next, cache.probs)
    }

    pub(crate) fn step_cached(
        &self,
        state: &DecoderState,
        ann: &Annotations,
        dropout: Option<&mut Dropout<'_>>,
    ) -> StepCache {
        let d = &self.dims;
        let att = self.attend_cached(&state.s, ann);
        let zero_embed;
        let emb: &[f64] = match state.y_prev {
            Some(id) => self.value(slot::TGT_EMBED).row(id as usize),
            None => {
                zero_embed = vec![0.0; d.embed];
                &zero_embed
            }
        };
        let mut x = Vec::with_capacity(d.embed + att.c.len());
        x.extend_from_slice(emb);
        x.extend_from_slice(&att.c);
        let gru = gru_forward(&x, &state.s, self.gru(slot::DEC));

        let mut out_in = Vec::with_capacity(d.hidden + x.len());
        out_in.extend_from_slice(&gru.h);
        out_in.extend_from_slice(&x);
        let mut t = self.value(slot::OUT_B).data().to_vec();
        gemv_acc(self.value(slot::OUT_W), &out_in, &mut t);
        t.iter_mut().for_each(|v| *v = v.tanh());
        let mask = dropout.map(|dr| dropout_mask(d.output, dr.p, dr.rng).expect("validated dropout p"));
        let mut logits = self.value(slot::PROJ_B).data().to_vec();
        match &mask {
            Some(mask) => {
                let dropped: Vec<f64> = t.iter().zip(mask).map(|(a, b)| a * b).collect();
                gemv_acc(self.value(slot::PROJ_W), &dropped, &mut logits);
            }
            None => gemv_acc(self.value(slot::PROJ_W), &t, &mut logits),
        }
        softmax_in_place(&mut logits);
        StepCache {
            s_prev: state.s.clone(),
            y_prev: state.y_prev,
            att,
            gru,
            out_in,
            t,
            mask,
            probs: logits,
        }
    }

    /// Teacher-forced negative log-likelihood (nats) of the target,
    /// including its `<eos>`. Returns `(loss, token_count)`.
    pub fn sequence_nll(
        &self,
        pair: &SentencePair<u32>,
        mut dropout: Option<&mut Dropout<'_>>,
    ) -> Result<(f64, usize)> {
        self.check_pair(pair)?;
        let ann = self.encode(&pair.source)?;
        let mut state = self.initial_state(&ann);
        let mut loss = 0.0;
        for &y in &pair.target {
            let (next, probs) = self.decode_step(&state, &ann, dropout.as_deref_mut());
            loss -= probs[y as usize].ln();
            state = next.with_token(y);
        }
        Ok((loss, pair.target.len()))
    }

    pub(crate) fn check_pair(&self, pair: &SentencePair<u32>) -> Result<()> {
        self.check_source(&pair.source)?;
        if pair.target.last() != Some(&Vocabulary::EOS) {
            return Err(Error::InvalidArgument("target must end in <eos>".into()));
        }
        if let Some(&bad) = pair.target.iter().find(|&&i| i as usize >= self.dims.tgt_vocab) {
            return Err(Error::InvalidArgument(format!(
                "target id {bad} outside vocabulary of {}",
                self.dims.tgt_vocab
            )));
        }
        Ok(())
    }
}
