use std::collections::HashMap;

use rand_chacha::ChaCha8Rng;

use super::segment::{segment_with_attention, Fragment, PreparedExample, SegmentedReference};
use crate::data::EOS;
use crate::error::{Error, Result};
use crate::memory::SmtModel;
use crate::nmt::{DecoderStep, DecoderStepCache, EncodedSource, EncoderCache, Model, PhraseEncoding};
use crate::numerics::ops::{log_sigmoid, sigmoid};
use crate::numerics::GradBuffer;

struct Forward {
    enc: EncodedSource,
    ecache: EncoderCache,
    steps: Vec<(DecoderStep, DecoderStepCache)>,
}

fn teacher_force(model: &Model, ex: &PreparedExample) -> Result<Forward> {
    model.check_source(&ex.source.input)?;
    let (enc, ecache) = model.encode_fwd(&ex.source.input);
    let mut s = enc.initial_state.clone();
    let mut steps = Vec::with_capacity(ex.target.len() + 1);
    for y in ex.inputs() {
        let (step, cache) = model.decoder_step_fwd(&s, y, &enc);
        s = step.state.clone();
        steps.push((step, cache));
    }
    Ok(Forward { enc, ecache, steps })
}

/// Backpropagates readout gradients through every decoder step and the encoder.
fn backprop_steps(model: &Model, fwd: &Forward, d_readouts: &[Option<Vec<f64>>], grads: &mut GradBuffer) {
    let c = &model.config;
    let n = fwd.enc.len();
    let mut d_annot = vec![vec![0.0; 2 * c.hidden]; n];
    let mut d_proj = vec![vec![0.0; c.att_dim]; n];
    let zero_readout = vec![0.0; c.readout_dim()];
    let mut ds = vec![0.0; c.hidden];
    for (i, (step, cache)) in fwd.steps.iter().enumerate().rev() {
        let dr = d_readouts[i].as_deref().unwrap_or(&zero_readout);
        let mut ds_prev = vec![0.0; c.hidden];
        model.decoder_step_bwd(grads, &fwd.enc, step, cache, &ds, dr, &mut ds_prev, &mut d_annot, &mut d_proj);
        ds = ds_prev;
    }
    model.encode_bwd(grads, &fwd.enc, &fwd.ecache, d_annot, &d_proj, &ds);
}

/// `-log P_word(w)` at one step; adds the logit gradient into `d_readout`.
fn word_term(
    model: &Model,
    grads: &mut GradBuffer,
    readout: &[f64],
    w: usize,
    rng: Option<&mut ChaCha8Rng>,
    d_readout: &mut [f64],
) -> f64 {
    let out = model.output_fwd(readout, rng);
    let lp = out.log_probs();
    let mut dlogits: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
    dlogits[w] -= 1.0;
    model.output_bwd(grads, readout, &out, &dlogits, d_readout);
    -lp[w]
}

/// Negative log-likelihood of a plain word-by-word NMT model.
pub(crate) fn word_only_loss_grad(
    model: &Model,
    ex: &PreparedExample,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<(f64, GradBuffer)> {
    let fwd = teacher_force(model, ex)?;
    let mut grads = GradBuffer::zeros_like(&model.params);
    let mut loss = 0.0;
    let mut d_readouts = Vec::with_capacity(fwd.steps.len());
    for (i, (step, _)) in fwd.steps.iter().enumerate() {
        let w = ex.target_ids.get(i).copied().unwrap_or(EOS);
        let mut dr = vec![0.0; model.config.readout_dim()];
        loss += word_term(model, &mut grads, &step.readout, w, rng.as_deref_mut(), &mut dr);
        d_readouts.push(Some(dr));
    }
    backprop_steps(model, &fwd, &d_readouts, &mut grads);
    Ok((loss, grads))
}

pub fn word_only_loss(model: &Model, ex: &PreparedExample) -> Result<f64> {
    Ok(word_only_loss_grad(model, ex, None)?.0)
}

fn mixed_loss(
    model: &Model,
    ex: &PreparedExample,
    fwd: &Forward,
    seg: &SegmentedReference,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<(f64, GradBuffer)> {
    if seg.reassemble() != ex.inputs()[1..].iter().copied().chain([EOS]).collect::<Vec<_>>() {
        return Err(Error::InvalidArgument("segmentation does not match the reference".into()));
    }
    let c = &model.config;
    let mut grads = GradBuffer::zeros_like(&model.params);
    let mut loss = 0.0;
    let mut d_readouts: Vec<Option<Vec<f64>>> = vec![None; fwd.steps.len()];
    let mut reps: HashMap<(usize, usize), PhraseEncoding> = HashMap::new();
    let mut d_reps: HashMap<(usize, usize), Vec<f64>> = HashMap::new();

    for frag in &seg.fragments {
        let readout = &fwd.steps[frag.step].0.readout;
        let mut dr = vec![0.0; c.readout_dim()];
        let mem = &frag.memory;
        let phrase_mode = matches!(frag.fragment, Fragment::Phrase { .. });
        if let Fragment::Word(w) = frag.fragment {
            loss += word_term(model, &mut grads, readout, w, rng.as_deref_mut(), &mut dr);
        }
        if !mem.is_empty() {
            match c.constant_lambda {
                Some(l) => loss -= if phrase_mode { l.ln() } else { (1.0 - l).ln() },
                None => {
                    let (u, bcache) = model.balancer_fwd(readout);
                    let (term, du) = if phrase_mode {
                        (-log_sigmoid(u), sigmoid(u) - 1.0)
                    } else {
                        (-log_sigmoid(-u), sigmoid(u))
                    };
                    loss += term;
                    model.balancer_bwd(&mut grads, &bcache, du, &mut dr);
                }
            }
        }
        if let Fragment::Phrase { entry, .. } = frag.fragment {
            for e in &mem.entries {
                reps.entry(e.key).or_insert_with(|| model.phrase_fwd(&e.ids));
            }
            let rep_refs: Vec<&[f64]> = mem.entries.iter().map(|e| reps[&e.key].rep.as_slice()).collect();
            let sc = model.scorer_fwd(readout, &rep_refs);
            let probs = sc.probs();
            loss -= probs[entry].ln();
            let mut dscores = probs;
            dscores[entry] -= 1.0;
            let mut dr_reps = vec![vec![0.0; c.hidden]; mem.len()];
            model.scorer_bwd(&mut grads, readout, &rep_refs, &sc, &dscores, &mut dr, &mut dr_reps);
            for (e, d) in mem.entries.iter().zip(dr_reps) {
                let acc = d_reps.entry(e.key).or_insert_with(|| vec![0.0; c.hidden]);
                crate::numerics::ops::add_assign(acc, &d);
            }
        }
        d_readouts[frag.step] = Some(dr);
    }
    let mut keys: Vec<_> = d_reps.keys().copied().collect();
    keys.sort_unstable();
    for k in keys {
        model.phrase_bwd(&mut grads, &reps[&k], &d_reps[&k]);
    }
    backprop_steps(model, fwd, &d_readouts, &mut grads);
    Ok((loss, grads))
}

/// Loss and gradient for a fixed segmentation.
pub(crate) fn sentence_loss_grad(
    model: &Model,
    ex: &PreparedExample,
    seg: &SegmentedReference,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<(f64, GradBuffer)> {
    let fwd = teacher_force(model, ex)?;
    mixed_loss(model, ex, &fwd, seg, rng)
}

/// Mixed word/phrase negative log-likelihood of the reference.
pub fn sentence_loss(model: &Model, ex: &PreparedExample, seg: &SegmentedReference) -> Result<f64> {
    Ok(sentence_loss_grad(model, ex, seg, None)?.0)
}

/// Loss and parameter gradient for a fixed segmentation, without dropout.
pub fn sentence_loss_and_grad(model: &Model, ex: &PreparedExample, seg: &SegmentedReference) -> Result<(f64, GradBuffer)> {
    sentence_loss_grad(model, ex, seg, None)
}

/// Segments with the current parameters, then returns loss and gradient.
pub(crate) fn hybrid_loss_grad(
    model: &Model,
    smt: &SmtModel,
    ex: &PreparedExample,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<(f64, GradBuffer, SegmentedReference)> {
    let fwd = teacher_force(model, ex)?;
    let attention: Vec<Vec<f64>> = fwd.steps.iter().map(|(s, _)| s.attention.clone()).collect();
    let seg = segment_with_attention(smt, ex, &attention);
    let (loss, grads) = mixed_loss(model, ex, &fwd, &seg, rng)?;
    Ok((loss, grads, seg))
}
