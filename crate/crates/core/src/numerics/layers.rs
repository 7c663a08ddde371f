use rand::Rng;

use super::ops::{matvec, matvec_t_acc, outer_acc, add_assign, sigmoid};
use super::{GradBuffer, ParamId, ParamStore};
use crate::error::{Error, Result};

/// Affine map `y = W x (+ b)` with `W` stored `out x inp`.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub w: ParamId,
    pub b: Option<ParamId>,
    pub inp: usize,
    pub out: usize,
}

impl Linear {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        inp: usize,
        out: usize,
        bias: bool,
        scale: f64,
        rng: &mut R,
    ) -> Self {
        let w = store.add_uniform(format!("{name}.w"), &[out, inp], scale, rng);
        let b = bias.then(|| store.add_zeros(format!("{name}.b"), &[out]));
        Linear { w, b, inp, out }
    }

    pub fn forward(&self, store: &ParamStore, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.out];
        matvec(store.value(self.w), self.out, self.inp, x, &mut y);
        if let Some(b) = self.b {
            add_assign(&mut y, store.value(b));
        }
        y
    }

    /// Accumulates parameter gradients and, if requested, `dx += W^T dy`.
    pub fn backward(
        &self,
        store: &ParamStore,
        grads: &mut GradBuffer,
        x: &[f64],
        dy: &[f64],
        dx: Option<&mut [f64]>,
    ) {
        outer_acc(grads.get_mut(self.w), self.inp, dy, x);
        if let Some(b) = self.b {
            add_assign(grads.get_mut(b), dy);
        }
        if let Some(dx) = dx {
            matvec_t_acc(store.value(self.w), self.inp, dy, dx);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::Config(format!("unknown activation {other:?}"))),
        }
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation output `y`.
    #[inline]
    pub fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }
}

/// Stack of affine layers, each followed by an activation.
#[derive(Debug, Clone)]
pub struct FeedForward {
    pub layers: Vec<(Linear, Activation)>,
}

#[derive(Debug, Clone)]
pub struct FeedForwardCache {
    /// `acts[0]` is the input, `acts[k+1]` the output of layer `k`.
    pub acts: Vec<Vec<f64>>,
}

impl FeedForwardCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("cache holds the input at least")
    }
}

impl FeedForward {
    pub fn new(layers: Vec<(Linear, Activation)>) -> Result<Self> {
        for pair in layers.windows(2) {
            if pair[0].0.out != pair[1].0.inp {
                return Err(Error::InvalidArgument(format!(
                    "layer output {} does not feed input {}",
                    pair[0].0.out, pair[1].0.inp
                )));
            }
        }
        Ok(FeedForward { layers })
    }

    pub fn input_size(&self) -> usize {
        self.layers.first().map_or(0, |l| l.0.inp)
    }

    pub fn forward(&self, store: &ParamStore, input: &[f64]) -> Result<FeedForwardCache> {
        if input.len() != self.input_size() {
            return Err(Error::InvalidArgument(format!(
                "feed-forward expects {} inputs, got {}",
                self.input_size(),
                input.len()
            )));
        }
        Ok(self.forward_unchecked(store, input))
    }

    pub(crate) fn forward_unchecked(&self, store: &ParamStore, input: &[f64]) -> FeedForwardCache {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        for (lin, act) in &self.layers {
            let mut y = lin.forward(store, acts.last().unwrap());
            y.iter_mut().for_each(|v| *v = act.apply(*v));
            acts.push(y);
        }
        FeedForwardCache { acts }
    }

    /// Returns the gradient with respect to the input.
    pub fn backward(
        &self,
        store: &ParamStore,
        grads: &mut GradBuffer,
        cache: &FeedForwardCache,
        dout: &[f64],
    ) -> Vec<f64> {
        let mut dy = dout.to_vec();
        for (k, (lin, act)) in self.layers.iter().enumerate().rev() {
            let y = &cache.acts[k + 1];
            for (d, &yv) in dy.iter_mut().zip(y) {
                *d *= act.grad_from_output(yv);
            }
            let mut dx = vec![0.0; lin.inp];
            lin.backward(store, grads, &cache.acts[k], &dy, Some(&mut dx));
            dy = dx;
        }
        dy
    }
}
