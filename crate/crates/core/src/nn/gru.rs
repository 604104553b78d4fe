//! Gated recurrent unit cell.
//!
//! ```text
//! z  = sigmoid(W_z x + U_z h + b_z)
//! r  = sigmoid(W_r x + U_r h + b_r)
//! h~ = tanh(W_h x + U_h (r * h) + b_h)
//! h' = (1 - z) * h + z * h~
//! ```
//!
//! `w` stacks `[W_z; W_r; W_h]` (3H x I), `u_zr` stacks `[U_z; U_r]`
//! (2H x H), `u_h` is H x H and `b` is a 3H column.

use super::matrix::{gemv_acc, gemv_t_acc, gemv_t_rows_acc, ger_acc, ger_rows_acc, Matrix};
use super::ops::sigmoid;
use crate::error::{Error, Result};

/// Borrowed view of one GRU's parameters.
#[derive(Debug, Clone, Copy)]
pub struct GruWeights<'a> {
    pub w: &'a Matrix,
    pub u_zr: &'a Matrix,
    pub u_h: &'a Matrix,
    pub b: &'a Matrix,
}

/// Values saved by the forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct GruCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub cand: Vec<f64>,
    pub rh: Vec<f64>,
    pub h: Vec<f64>,
}

impl<'a> GruWeights<'a> {
    /// Borrows four consecutive parameters in `[w, u_zr, u_h, b]` order.
    pub fn from_slice(m: &'a [Matrix]) -> Self {
        GruWeights {
            w: &m[0],
            u_zr: &m[1],
            u_h: &m[2],
            b: &m[3],
        }
    }

    pub fn hidden(&self) -> usize {
        self.u_h.rows()
    }

    pub fn input(&self) -> usize {
        self.w.cols()
    }

    fn check(&self, x: &[f64], h: &[f64]) -> Result<()> {
        let hd = self.hidden();
        let ok = self.w.shape() == (3 * hd, x.len())
            && self.u_zr.shape() == (2 * hd, hd)
            && self.u_h.shape() == (hd, hd)
            && self.b.shape() == (3 * hd, 1)
            && h.len() == hd;
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "gru with w {:?}, u_zr {:?}, u_h {:?}, b {:?} given x[{}], h[{}]",
                self.w.shape(),
                self.u_zr.shape(),
                self.u_h.shape(),
                self.b.shape(),
                x.len(),
                h.len()
            )))
        }
    }
}

/// One GRU step with dimension checks.
pub fn gru_step(x: &[f64], h_prev: &[f64], weights: GruWeights<'_>) -> Result<Vec<f64>> {
    weights.check(x, h_prev)?;
    Ok(gru_forward(x, h_prev, weights).h)
}

/// Unchecked forward step that keeps intermediates.
pub fn gru_forward(x: &[f64], h_prev: &[f64], p: GruWeights<'_>) -> GruCache {
    let hd = p.hidden();
    let b = p.b.data();
    let mut pre = b.to_vec();
    gemv_acc(p.w, x, &mut pre);
    gemv_acc(p.u_zr, h_prev, &mut pre[..2 * hd]);
    let z: Vec<f64> = pre[..hd].iter().map(|&v| sigmoid(v)).collect();
    let r: Vec<f64> = pre[hd..2 * hd].iter().map(|&v| sigmoid(v)).collect();
    let rh: Vec<f64> = r.iter().zip(h_prev).map(|(r, h)| r * h).collect();
    let mut cand_pre = pre[2 * hd..].to_vec();
    gemv_acc(p.u_h, &rh, &mut cand_pre);
    let cand: Vec<f64> = cand_pre.iter().map(|v| v.tanh()).collect();
    let h = (0..hd)
        .map(|i| (1.0 - z[i]) * h_prev[i] + z[i] * cand[i])
        .collect();
    GruCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        z,
        r,
        cand,
        rh,
        h,
    }
}

/// Backpropagates `dh` through one step. Parameter gradients are added to
/// `grads` (`[w, u_zr, u_h, b]`); input and previous-state gradients are
/// added to `dx` and `dh_prev`.
pub fn gru_backward(
    p: GruWeights<'_>,
    cache: &GruCache,
    dh: &[f64],
    grads: &mut [Matrix],
    dx: &mut [f64],
    dh_prev: &mut [f64],
) {
    let hd = p.hidden();
    // da = [da_z; da_r; da_h]
    let mut da = vec![0.0; 3 * hd];
    for i in 0..hd {
        let z = cache.z[i];
        let c = cache.cand[i];
        dh_prev[i] += dh[i] * (1.0 - z);
        da[i] = dh[i] * (c - cache.h_prev[i]) * z * (1.0 - z);
        da[2 * hd + i] = dh[i] * z * (1.0 - c * c);
    }
    let mut drh = vec![0.0; hd];
    gemv_t_acc(p.u_h, &da[2 * hd..], &mut drh);
    for i in 0..hd {
        let r = cache.r[i];
        dh_prev[i] += drh[i] * r;
        da[hd + i] = drh[i] * cache.h_prev[i] * r * (1.0 - r);
    }
    gemv_t_acc(p.w, &da, dx);
    gemv_t_rows_acc(p.u_zr, 0..2 * hd, &da[..2 * hd], dh_prev);

    let (gw, rest) = grads.split_at_mut(1);
    let (gu_zr, rest) = rest.split_at_mut(1);
    let (gu_h, gb) = rest.split_at_mut(1);
    ger_acc(&mut gw[0], &da, &cache.x);
    ger_rows_acc(&mut gu_zr[0], 0..2 * hd, &da[..2 * hd], &cache.h_prev);
    ger_acc(&mut gu_h[0], &da[2 * hd..], &cache.rh);
    for (g, d) in gb[0].data_mut().iter_mut().zip(&da) {
        *g += d;
    }
}
