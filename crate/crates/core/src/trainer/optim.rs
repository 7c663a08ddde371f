use crate::numerics::{GradBuffer, ParamStore};

/// Rescales `grads` so its global L2 norm is at most `max_norm`; returns
/// the norm before clipping.
pub fn clip_global_norm(grads: &mut GradBuffer, max_norm: f64) -> f64 {
    let norm = grads.norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

#[derive(Debug, Clone)]
pub struct Adadelta {
    pub rho: f64,
    pub eps: f64,
    sq_grad: Vec<Vec<f64>>,
    sq_update: Vec<Vec<f64>>,
}

impl Adadelta {
    pub fn new(params: &ParamStore, rho: f64, eps: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.value.len()]).collect();
        Adadelta { rho, eps, sq_grad: zeros.clone(), sq_update: zeros }
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &GradBuffer) {
        let (rho, eps) = (self.rho, self.eps);
        for (k, p) in params.iter_mut().enumerate() {
            let g = &grads.grads[k];
            let eg = &mut self.sq_grad[k];
            let ex = &mut self.sq_update[k];
            for (i, x) in p.value.data_mut().iter_mut().enumerate() {
                eg[i] = rho * eg[i] + (1.0 - rho) * g[i] * g[i];
                let dx = -((ex[i] + eps).sqrt() / (eg[i] + eps).sqrt()) * g[i];
                ex[i] = rho * ex[i] + (1.0 - rho) * dx * dx;
                *x += dx;
            }
        }
    }
}
