use rand::Rng;

use super::ops::{add_assign, matvec, matvec_t_acc, outer_acc, sigmoid};
use super::{GradBuffer, ParamId, ParamStore};
use crate::error::{Error, Result};

/// Gated recurrent unit.
///
/// ```text
/// z  = sigmoid(Wz x + Uz h + bz)
/// r  = sigmoid(Wr x + Ur h + br)
/// h~ = tanh(Wh x + Uh (r * h) + bh)
/// h' = (1 - z) * h + z * h~
/// ```
///
/// The input weights of the three gates are stacked into one `3H x in`
/// matrix (rows ordered z, r, candidate), the recurrent gate weights into a
/// `2H x H` matrix, and the candidate's recurrent weights kept separate
/// because they act on `r * h`.
#[derive(Debug, Clone, Copy)]
pub struct GruCell {
    pub input_size: usize,
    pub hidden_size: usize,
    pub w_input: ParamId,
    pub u_gates: ParamId,
    pub u_cand: ParamId,
    pub bias: ParamId,
}

/// Intermediates kept for the backward pass.
#[derive(Debug, Clone)]
pub struct GruCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub cand: Vec<f64>,
    pub rh: Vec<f64>,
}

impl GruCell {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        input_size: usize,
        hidden_size: usize,
        scale: f64,
        rng: &mut R,
    ) -> Self {
        let h = hidden_size;
        let w_input = store.add_uniform(format!("{name}.w_input"), &[3 * h, input_size], scale, rng);
        let u_gates = store.add_uniform(format!("{name}.u_gates"), &[2 * h, h], scale, rng);
        let u_cand = store.add_uniform(format!("{name}.u_cand"), &[h, h], scale, rng);
        let bias = store.add_zeros(format!("{name}.bias"), &[3 * h]);
        GruCell {
            input_size,
            hidden_size,
            w_input,
            u_gates,
            u_cand,
            bias,
        }
    }

    /// One recurrent step with shape validation.
    pub fn step(&self, store: &ParamStore, input: &[f64], prev: &[f64]) -> Result<(Vec<f64>, GruCache)> {
        if input.len() != self.input_size || prev.len() != self.hidden_size {
            return Err(Error::InvalidArgument(format!(
                "gru expects input {} / hidden {}, got {} / {}",
                self.input_size,
                self.hidden_size,
                input.len(),
                prev.len()
            )));
        }
        Ok(self.forward(store, input, prev))
    }

    pub(crate) fn forward(&self, store: &ParamStore, x: &[f64], h: &[f64]) -> (Vec<f64>, GruCache) {
        let hs = self.hidden_size;
        let mut ax = vec![0.0; 3 * hs];
        matvec(store.value(self.w_input), 3 * hs, self.input_size, x, &mut ax);
        add_assign(&mut ax, store.value(self.bias));

        let mut azr = vec![0.0; 2 * hs];
        matvec(store.value(self.u_gates), 2 * hs, hs, h, &mut azr);
        let z: Vec<f64> = (0..hs).map(|k| sigmoid(ax[k] + azr[k])).collect();
        let r: Vec<f64> = (0..hs).map(|k| sigmoid(ax[hs + k] + azr[hs + k])).collect();
        let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();

        let mut ah = vec![0.0; hs];
        matvec(store.value(self.u_cand), hs, hs, &rh, &mut ah);
        let cand: Vec<f64> = (0..hs).map(|k| (ax[2 * hs + k] + ah[k]).tanh()).collect();

        let out: Vec<f64> = (0..hs)
            .map(|k| (1.0 - z[k]) * h[k] + z[k] * cand[k])
            .collect();
        let cache = GruCache {
            x: x.to_vec(),
            h_prev: h.to_vec(),
            z,
            r,
            cand,
            rh,
        };
        (out, cache)
    }

    /// Returns `(dx, dh_prev)` and accumulates parameter gradients.
    pub fn backward(
        &self,
        store: &ParamStore,
        grads: &mut GradBuffer,
        cache: &GruCache,
        dout: &[f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let hs = self.hidden_size;
        let GruCache { x, h_prev, z, r, cand, rh } = cache;

        let mut dh = vec![0.0; hs];
        let mut dax = vec![0.0; 3 * hs];
        for k in 0..hs {
            let g = dout[k];
            dh[k] = g * (1.0 - z[k]);
            let dz = g * (cand[k] - h_prev[k]);
            dax[k] = dz * z[k] * (1.0 - z[k]);
            let dcand = g * z[k];
            dax[2 * hs + k] = dcand * (1.0 - cand[k] * cand[k]);
        }
        let dah = &dax[2 * hs..].to_vec();

        outer_acc(grads.get_mut(self.u_cand), hs, dah, rh);
        let mut drh = vec![0.0; hs];
        matvec_t_acc(store.value(self.u_cand), hs, dah, &mut drh);
        for k in 0..hs {
            let dr = drh[k] * h_prev[k];
            dh[k] += drh[k] * r[k];
            dax[hs + k] = dr * r[k] * (1.0 - r[k]);
        }

        let dazr = &dax[..2 * hs];
        outer_acc(grads.get_mut(self.u_gates), hs, dazr, h_prev);
        matvec_t_acc(store.value(self.u_gates), hs, dazr, &mut dh);

        outer_acc(grads.get_mut(self.w_input), self.input_size, &dax, x);
        add_assign(grads.get_mut(self.bias), &dax);
        let mut dx = vec![0.0; self.input_size];
        matvec_t_acc(store.value(self.w_input), self.input_size, &dax, &mut dx);
        (dx, dh)
    }
}
