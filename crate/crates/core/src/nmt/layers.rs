use rand::Rng;

use super::model::{DecoderStep, EncodedSource, Model, SourceInput};
use crate::numerics::ops::{add_assign, axpy, dot, log_softmax, softmax_backward, softmax_unchecked};
use crate::numerics::{FeedForwardCache, GradBuffer, GruCache, ParamId};

#[derive(Debug, Clone)]
pub(crate) struct EncoderCache {
    pub src: SourceInput,
    pub fwd: Vec<GruCache>,
    /// Indexed by source position, not by processing order.
    pub bwd: Vec<GruCache>,
}

#[derive(Debug, Clone)]
pub(crate) struct AttentionCache {
    pub s_prev: Vec<f64>,
    pub t: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct DecoderStepCache {
    pub att: AttentionCache,
    pub gru: GruCache,
}

#[derive(Debug, Clone)]
pub(crate) struct OutputCache {
    pub hidden: Vec<f64>,
    pub mask: Option<Vec<f64>>,
    pub logits: Vec<f64>,
}

impl OutputCache {
    pub fn log_probs(&self) -> Vec<f64> {
        log_softmax(&self.logits)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct ScorerCache {
    pub a1: Vec<Vec<f64>>,
    pub rest: Vec<FeedForwardCache>,
    pub scores: Vec<f64>,
}

impl ScorerCache {
    pub fn probs(&self) -> Vec<f64> {
        softmax_unchecked(&self.scores)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct PhraseEncoding {
    pub ids: Vec<usize>,
    /// In processing order, last word first.
    pub caches: Vec<GruCache>,
    pub rep: Vec<f64>,
}

fn row(values: &[f64], i: usize, dim: usize) -> &[f64] {
    &values[i * dim..(i + 1) * dim]
}

fn add_row(grads: &mut GradBuffer, id: ParamId, i: usize, dim: usize, d: &[f64]) {
    add_assign(&mut grads.get_mut(id)[i * dim..(i + 1) * dim], d);
}

impl Model {
    pub(crate) fn tgt_embedding(&self, y: usize) -> &[f64] {
        row(self.params.value(self.layout.tgt_emb), y, self.config.word_dim)
    }

    fn encoder_input(&self, src: &SourceInput, j: usize) -> Vec<f64> {
        let c = &self.config;
        let mut x = row(self.params.value(self.layout.src_emb), src.tokens[j], c.word_dim).to_vec();
        if let Some(te) = self.layout.tag_emb {
            x.extend_from_slice(row(self.params.value(te), src.tags[j], c.tag_dim));
        }
        x
    }

    pub(crate) fn encode_fwd(&self, src: &SourceInput) -> (EncodedSource, EncoderCache) {
        let l = &self.layout;
        let p = &self.params;
        let h = self.config.hidden;
        let n = src.len();
        let inputs: Vec<Vec<f64>> = (0..n).map(|j| self.encoder_input(src, j)).collect();

        let mut fwd_states = Vec::with_capacity(n);
        let mut fwd = Vec::with_capacity(n);
        let mut state = vec![0.0; h];
        for x in &inputs {
            let (s, cache) = l.enc_fwd.forward(p, x, &state);
            fwd.push(cache);
            fwd_states.push(s.clone());
            state = s;
        }
        let mut bwd_states = vec![Vec::new(); n];
        let mut bwd: Vec<Option<GruCache>> = vec![None; n];
        let mut state = vec![0.0; h];
        for j in (0..n).rev() {
            let (s, cache) = l.enc_bwd.forward(p, &inputs[j], &state);
            bwd[j] = Some(cache);
            bwd_states[j] = s.clone();
            state = s;
        }
        let annotations: Vec<Vec<f64>> = fwd_states
            .into_iter()
            .zip(&bwd_states)
            .map(|(mut f, b)| {
                f.extend_from_slice(b);
                f
            })
            .collect();
        let proj = annotations.iter().map(|a| l.att_annot.forward(p, a)).collect();
        let initial_state = l.init.forward(p, &bwd_states[0]).into_iter().map(f64::tanh).collect();
        (
            EncodedSource { annotations, proj, initial_state },
            EncoderCache {
                src: src.clone(),
                fwd,
                bwd: bwd.into_iter().map(Option::unwrap).collect(),
            },
        )
    }

    pub(crate) fn encode_bwd(
        &self,
        grads: &mut GradBuffer,
        enc: &EncodedSource,
        cache: &EncoderCache,
        mut d_annot: Vec<Vec<f64>>,
        d_proj: &[Vec<f64>],
        d_s0: &[f64],
    ) {
        let l = &self.layout;
        let p = &self.params;
        let c = &self.config;
        let h = c.hidden;
        let n = enc.len();
        for j in 0..n {
            l.att_annot.backward(p, grads, &enc.annotations[j], &d_proj[j], Some(&mut d_annot[j]));
        }
        // s0 = tanh(W b_0 + b)
        let da: Vec<f64> = d_s0
            .iter()
            .zip(&enc.initial_state)
            .map(|(d, s)| d * (1.0 - s * s))
            .collect();
        let b0 = &enc.annotations[0][h..];
        let mut d_b0 = vec![0.0; h];
        l.init.backward(p, grads, b0, &da, Some(&mut d_b0));
        add_assign(&mut d_annot[0][h..], &d_b0);

        let mut d_inputs = vec![vec![0.0; c.word_dim + c.tag_dim]; n];
        let mut carry = vec![0.0; h];
        for j in (0..n).rev() {
            let mut dh = d_annot[j][..h].to_vec();
            add_assign(&mut dh, &carry);
            let (dx, dprev) = l.enc_fwd.backward(p, grads, &cache.fwd[j], &dh);
            add_assign(&mut d_inputs[j], &dx);
            carry = dprev;
        }
        let mut carry = vec![0.0; h];
        for j in 0..n {
            let mut dh = d_annot[j][h..].to_vec();
            add_assign(&mut dh, &carry);
            let (dx, dprev) = l.enc_bwd.backward(p, grads, &cache.bwd[j], &dh);
            add_assign(&mut d_inputs[j], &dx);
            carry = dprev;
        }
        for (j, dx) in d_inputs.iter().enumerate() {
            add_row(grads, l.src_emb, cache.src.tokens[j], c.word_dim, &dx[..c.word_dim]);
            if let Some(te) = l.tag_emb {
                add_row(grads, te, cache.src.tags[j], c.tag_dim, &dx[c.word_dim..]);
            }
        }
    }

    pub(crate) fn attend_fwd(&self, s_prev: &[f64], enc: &EncodedSource) -> (Vec<f64>, AttentionCache) {
        let l = &self.layout;
        let ws = l.att_state.forward(&self.params, s_prev);
        let v = self.params.value(l.att_v);
        let mut t = Vec::with_capacity(enc.len());
        let mut e = Vec::with_capacity(enc.len());
        for pj in &enc.proj {
            let tj: Vec<f64> = ws.iter().zip(pj).map(|(a, b)| (a + b).tanh()).collect();
            e.push(dot(v, &tj));
            t.push(tj);
        }
        let alpha = softmax_unchecked(&e);
        let mut ctx = vec![0.0; 2 * self.config.hidden];
        for (a, hj) in alpha.iter().zip(&enc.annotations) {
            axpy(*a, hj, &mut ctx);
        }
        (ctx, AttentionCache { s_prev: s_prev.to_vec(), t, alpha })
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn attend_bwd(
        &self,
        grads: &mut GradBuffer,
        enc: &EncodedSource,
        cache: &AttentionCache,
        dc: &[f64],
        ds_prev: &mut [f64],
        d_annot: &mut [Vec<f64>],
        d_proj: &mut [Vec<f64>],
    ) {
        let l = &self.layout;
        let v = self.params.value(l.att_v);
        let dalpha: Vec<f64> = enc.annotations.iter().map(|h| dot(dc, h)).collect();
        for (j, a) in cache.alpha.iter().enumerate() {
            axpy(*a, dc, &mut d_annot[j]);
        }
        let de = softmax_backward(&cache.alpha, &dalpha);
        let mut d_ws = vec![0.0; self.config.att_dim];
        for (j, tj) in cache.t.iter().enumerate() {
            axpy(de[j], tj, grads.get_mut(l.att_v));
            for k in 0..tj.len() {
                let da = de[j] * v[k] * (1.0 - tj[k] * tj[k]);
                d_ws[k] += da;
                d_proj[j][k] += da;
            }
        }
        l.att_state.backward(&self.params, grads, &cache.s_prev, &d_ws, Some(ds_prev));
    }

    pub(crate) fn decoder_step_fwd(
        &self,
        s_prev: &[f64],
        y_prev: usize,
        enc: &EncodedSource,
    ) -> (DecoderStep, DecoderStepCache) {
        let (context, att) = self.attend_fwd(s_prev, enc);
        let emb = self.tgt_embedding(y_prev);
        let mut x = emb.to_vec();
        x.extend_from_slice(&context);
        let (state, gru) = self.layout.dec.forward(&self.params, &x, s_prev);
        let mut readout = state.clone();
        readout.extend_from_slice(emb);
        readout.extend_from_slice(&context);
        let attention = att.alpha.clone();
        (
            DecoderStep { state, context, attention, y_prev, readout },
            DecoderStepCache { att, gru },
        )
    }

    /// `ds` flows into the new state, `d_readout` into the readout vector.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn decoder_step_bwd(
        &self,
        grads: &mut GradBuffer,
        enc: &EncodedSource,
        step: &DecoderStep,
        cache: &DecoderStepCache,
        ds: &[f64],
        d_readout: &[f64],
        ds_prev: &mut [f64],
        d_annot: &mut [Vec<f64>],
        d_proj: &mut [Vec<f64>],
    ) {
        let c = &self.config;
        let (h, dw) = (c.hidden, c.word_dim);
        let mut d_state = ds.to_vec();
        add_assign(&mut d_state, &d_readout[..h]);
        let mut d_emb = d_readout[h..h + dw].to_vec();
        let mut d_ctx = d_readout[h + dw..].to_vec();
        let (dx, dh) = self.layout.dec.backward(&self.params, grads, &cache.gru, &d_state);
        add_assign(&mut d_emb, &dx[..dw]);
        add_assign(&mut d_ctx, &dx[dw..]);
        add_assign(ds_prev, &dh);
        add_row(grads, self.layout.tgt_emb, step.y_prev, dw, &d_emb);
        self.attend_bwd(grads, enc, &cache.att, &d_ctx, ds_prev, d_annot, d_proj);
    }

    /// Word head; `dropout_rng` enables inverted dropout on the hidden layer.
    pub(crate) fn output_fwd<R: Rng>(&self, readout: &[f64], dropout_rng: Option<&mut R>) -> OutputCache {
        let l = &self.layout;
        let hidden: Vec<f64> = l.out_hidden.forward(&self.params, readout).into_iter().map(f64::tanh).collect();
        let p = self.config.dropout;
        let mask = match dropout_rng {
            Some(rng) if p > 0.0 => {
                let keep = 1.0 / (1.0 - p);
                let m: Vec<f64> = hidden.iter().map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep }).collect();
                Some(m)
            }
            _ => None,
        };
        let dropped: Vec<f64> = match &mask {
            Some(m) => hidden.iter().zip(m).map(|(a, b)| a * b).collect(),
            None => hidden.clone(),
        };
        let logits = l.out_vocab.forward(&self.params, &dropped);
        OutputCache { hidden, mask, logits }
    }

    pub(crate) fn output_bwd(
        &self,
        grads: &mut GradBuffer,
        readout: &[f64],
        cache: &OutputCache,
        dlogits: &[f64],
        d_readout: &mut [f64],
    ) {
        let l = &self.layout;
        let dropped: Vec<f64> = match &cache.mask {
            Some(m) => cache.hidden.iter().zip(m).map(|(a, b)| a * b).collect(),
            None => cache.hidden.clone(),
        };
        let mut d_dropped = vec![0.0; self.config.out_hidden];
        l.out_vocab.backward(&self.params, grads, &dropped, dlogits, Some(&mut d_dropped));
        let da: Vec<f64> = d_dropped
            .iter()
            .enumerate()
            .map(|(k, d)| {
                let m = cache.mask.as_ref().map_or(1.0, |m| m[k]);
                d * m * (1.0 - cache.hidden[k] * cache.hidden[k])
            })
            .collect();
        l.out_hidden.backward(&self.params, grads, readout, &da, Some(d_readout));
    }

    /// Pre-sigmoid balancer output.
    pub(crate) fn balancer_fwd(&self, readout: &[f64]) -> (f64, FeedForwardCache) {
        let cache = self.layout.balancer.forward_unchecked(&self.params, readout);
        (cache.output()[0], cache)
    }

    pub(crate) fn balancer_bwd(&self, grads: &mut GradBuffer, cache: &FeedForwardCache, du: f64, d_readout: &mut [f64]) {
        let dx = self.layout.balancer.backward(&self.params, grads, cache, &[du]);
        add_assign(d_readout, &dx);
    }

    pub(crate) fn scorer_fwd(&self, readout: &[f64], reps: &[&[f64]]) -> ScorerCache {
        let l = &self.layout;
        let ctx = l.scorer_ctx.forward(&self.params, readout);
        let mut a1 = Vec::with_capacity(reps.len());
        let mut rest = Vec::with_capacity(reps.len());
        let mut scores = Vec::with_capacity(reps.len());
        for rep in reps {
            let pe = l.scorer_phrase.forward(&self.params, rep);
            let a: Vec<f64> = ctx.iter().zip(&pe).map(|(x, y)| (x + y).tanh()).collect();
            let fc = l.scorer_rest.forward_unchecked(&self.params, &a);
            scores.push(fc.output()[0]);
            a1.push(a);
            rest.push(fc);
        }
        ScorerCache { a1, rest, scores }
    }

    pub(crate) fn scorer_bwd(
        &self,
        grads: &mut GradBuffer,
        readout: &[f64],
        reps: &[&[f64]],
        cache: &ScorerCache,
        dscores: &[f64],
        d_readout: &mut [f64],
        d_reps: &mut [Vec<f64>],
    ) {
        let l = &self.layout;
        let mut d_ctx = vec![0.0; self.config.scorer_hidden[0]];
        for (k, rep) in reps.iter().enumerate() {
            let da = l.scorer_rest.backward(&self.params, grads, &cache.rest[k], &[dscores[k]]);
            let dpre: Vec<f64> = da.iter().zip(&cache.a1[k]).map(|(d, a)| d * (1.0 - a * a)).collect();
            add_assign(&mut d_ctx, &dpre);
            l.scorer_phrase.backward(&self.params, grads, rep, &dpre, Some(&mut d_reps[k]));
        }
        l.scorer_ctx.backward(&self.params, grads, readout, &d_ctx, Some(d_readout));
    }

    pub(crate) fn phrase_fwd(&self, ids: &[usize]) -> PhraseEncoding {
        let mut state = vec![0.0; self.config.hidden];
        let mut caches = Vec::with_capacity(ids.len());
        for &y in ids.iter().rev() {
            let (s, cache) = self.layout.phrase_enc.forward(&self.params, self.tgt_embedding(y), &state);
            caches.push(cache);
            state = s;
        }
        PhraseEncoding { ids: ids.to_vec(), caches, rep: state }
    }

    pub(crate) fn phrase_bwd(&self, grads: &mut GradBuffer, enc: &PhraseEncoding, drep: &[f64]) {
        let dw = self.config.word_dim;
        let mut dh = drep.to_vec();
        for (k, cache) in enc.caches.iter().enumerate().rev() {
            let (dx, dprev) = self.layout.phrase_enc.backward(&self.params, grads, cache, &dh);
            let y = enc.ids[enc.ids.len() - 1 - k];
            add_row(grads, self.layout.tgt_emb, y, dw, &dx);
            dh = dprev;
        }
    }
}
