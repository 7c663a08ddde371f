use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::loss::{hybrid_loss_grad, word_only_loss_grad};
use super::optim::{clip_global_norm, Adadelta};
use super::segment::PreparedExample;
use crate::error::{Error, Result};
use crate::memory::SmtModel;
use crate::nmt::Model;
use crate::numerics::{GradBuffer, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossMode {
    /// Mixed word/phrase likelihood against the phrase memory.
    Hybrid,
    /// Plain attention NMT cross-entropy.
    WordOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub rho: f64,
    pub eps: f64,
    pub clip_norm: f64,
    pub epochs: usize,
    pub seed: u64,
    pub threads: usize,
    pub mode: LossMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            rho: 0.95,
            eps: 1e-6,
            clip_norm: 1.0,
            epochs: 10,
            seed: 1,
            threads: 1,
            mode: LossMode::Hybrid,
        }
    }
}

impl TrainConfig {
    pub fn paper_preset() -> Self {
        TrainConfig { batch_size: 80, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 || self.threads == 0 {
            return Err(Error::Config("batch_size, epochs and threads must be positive".into()));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) || !(self.eps > 0.0) || !(self.clip_norm > 0.0) {
            return Err(Error::Config("rho must lie in (0, 1); eps and clip_norm must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    /// Mean per-sentence loss over the epoch's updates.
    pub train_loss: f64,
    pub dev_loss: Option<f64>,
    pub seconds: f64,
    /// Fraction of training references containing a phrase fragment.
    pub phrase_rate: f64,
}

impl EpochReport {
    pub fn log_line(&self) -> String {
        let dev = self.dev_loss.map_or("nan".to_string(), |d| format!("{d:.6}"));
        format!("{}\t{:.6}\t{}\t{:.2}", self.epoch, self.train_loss, dev, self.seconds)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub reports: Vec<EpochReport>,
    pub best_epoch: usize,
    pub best_params: ParamStore,
}

fn example_rng(seed: u64, epoch: usize, index: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(epoch as u64).to_le_bytes());
    key[16..24].copy_from_slice(&(index as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

fn example_loss(
    model: &Model,
    smt: &SmtModel,
    ex: &PreparedExample,
    mode: LossMode,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<(f64, GradBuffer, bool)> {
    match mode {
        LossMode::Hybrid => hybrid_loss_grad(model, smt, ex, rng).map(|(l, g, s)| (l, g, s.num_phrases() > 0)),
        LossMode::WordOnly => word_only_loss_grad(model, ex, rng).map(|(l, g)| (l, g, false)),
    }
}

/// Mean loss over `data` without dropout.
pub fn evaluate_loss(model: &Model, smt: &SmtModel, data: &[PreparedExample], mode: LossMode) -> Result<f64> {
    let losses: Vec<f64> = data
        .par_iter()
        .map(|ex| example_loss(model, smt, ex, mode, None).map(|r| r.0))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / data.len().max(1) as f64)
}

/// Minibatch Adadelta training. Leaves the best-dev parameters in `model`
/// (the last ones when `dev` is empty) and calls `on_epoch` after each epoch.
pub fn train<F>(
    model: &mut Model,
    smt: &SmtModel,
    train_set: &[PreparedExample],
    dev: &[PreparedExample],
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&EpochReport, &Model) -> Result<()>,
{
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut opt = Adadelta::new(&model.params, cfg.rho, cfg.eps);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut reports = Vec::new();
    let mut best: Option<(f64, usize, ParamStore)> = None;
    let dropout = model.config.dropout > 0.0;

    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)));
        let mut total = 0.0;
        let mut with_phrases = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let results: Vec<Result<(f64, GradBuffer, bool)>> = pool.install(|| {
                batch
                    .par_iter()
                    .map(|&i| {
                        let mut rng = example_rng(cfg.seed, epoch, i);
                        example_loss(model, smt, &train_set[i], cfg.mode, dropout.then_some(&mut rng))
                    })
                    .collect()
            });
            let mut sum = GradBuffer::zeros_like(&model.params);
            for (r, &i) in results.into_iter().zip(batch) {
                let (loss, g, phrased) = r?;
                if !loss.is_finite() || !g.all_finite() {
                    return Err(Error::Divergence(format!("non-finite loss at epoch {epoch}, example {i}")));
                }
                total += loss;
                with_phrases += usize::from(phrased);
                sum.add(&g);
            }
            clip_global_norm(&mut sum, cfg.clip_norm);
            opt.step(&mut model.params, &sum);
        }
        let dev_loss = if dev.is_empty() {
            None
        } else {
            let d = pool.install(|| evaluate_loss(model, smt, dev, cfg.mode))?;
            if !d.is_finite() {
                return Err(Error::Divergence(format!("non-finite dev loss at epoch {epoch}")));
            }
            Some(d)
        };
        let report = EpochReport {
            epoch,
            train_loss: total / train_set.len() as f64,
            dev_loss,
            seconds: start.elapsed().as_secs_f64(),
            phrase_rate: with_phrases as f64 / train_set.len() as f64,
        };
        let score = dev_loss.unwrap_or(f64::NEG_INFINITY);
        if best.as_ref().map_or(true, |(b, _, _)| score < *b || dev_loss.is_none()) {
            best = Some((score, epoch, model.params.clone()));
        }
        on_epoch(&report, model)?;
        reports.push(report);
    }
    let (_, best_epoch, best_params) = best.expect("at least one epoch");
    model.params = best_params.clone();
    Ok(TrainOutcome { reports, best_epoch, best_params })
}
