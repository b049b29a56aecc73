use std::fmt;
use std::io::Write;
use std::path::Path;

use super::checkpoint::Checkpoint;
use super::config::Loss;
use super::dataset::prepare_for_task;
use super::optim::lr_at;
use crate::error::{Error, Result};
use crate::imaging::{sample_batch, ImageBuffer, PatchSampler};
use crate::tensor::{Graph, Tensor};

/// One `iter=<n> lr=<v> loss=<v> [psnr=<v>]` log record.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogLine {
    pub iteration: u64,
    pub lr: f64,
    pub loss: f64,
    pub psnr: Option<f64>,
}

impl fmt::Display for LogLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "iter={} lr={:e} loss={:.6e}", self.iteration, self.lr, self.loss)?;
        if let Some(p) = self.psnr {
            write!(f, " psnr={p:.4}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    /// Loss of every iteration run, in order.
    pub losses: Vec<f64>,
    pub logs: Vec<LogLine>,
    /// Training-batch PSNR of the final iteration.
    pub final_psnr: Option<f64>,
}

/// PSNR between two batches after clipping both to `[0, 1]`.
pub fn batch_psnr(pred: &Tensor, target: &Tensor) -> f64 {
    let sse: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| (p.clamp(0.0, 1.0) - t.clamp(0.0, 1.0)).powi(2))
        .sum();
    if sse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (pred.numel() as f64 / sse).log10()
    }
}

pub fn sampler_for(state: &Checkpoint) -> PatchSampler {
    let c = &state.config;
    PatchSampler {
        patch_size: c.patch_size,
        batch_size: c.batch_size,
        seed: c.seed,
        augment: c.augment,
        fixed_noise: c.fixed_noise,
    }
}

/// Runs training iteration `state.iteration` and advances the state.
/// Returns the loss and the prediction/target PSNR of the batch.
pub fn train_step(state: &mut Checkpoint, images: &[ImageBuffer]) -> Result<(f64, f64)> {
    let it = state.iteration;
    let lr = lr_at(it, state.config.initial_lr, state.config.halve_every);
    let (lq, hq) = sample_batch(images, &state.config.degradation, &sampler_for(state), it)?;

    let g = Graph::new();
    let pred = state.model.forward(&g, &g.constant(lq))?;
    let target = g.constant(hq);
    let loss = match state.config.loss {
        Loss::L1 => g.l1_loss(&pred, &target)?,
        Loss::L2 => g.l2_loss(&pred, &target)?,
    };
    let value = loss.value().item()?;
    if !value.is_finite() {
        return Err(Error::Diverged { iteration: it, loss: value });
    }
    let psnr = batch_psnr(pred.value(), target.value());
    state.model.params.zero_grad();
    g.backward(&loss, &mut state.model.params)?;
    state.optimizer.step(&mut state.model.params, lr)?;
    state.iteration += 1;
    Ok((value, psnr))
}

/// Trains until `state.iteration` reaches `config.max_iters`, writing log
/// lines to `log` and checkpoints to `out` (every `checkpoint_every`
/// iterations and at the end).
pub fn train(state: &mut Checkpoint, images: &[ImageBuffer], out: Option<&Path>, log: &mut dyn Write) -> Result<TrainReport> {
    let task = state.config.task();
    let images: Vec<ImageBuffer> = images
        .iter()
        .map(|im| prepare_for_task(im, task))
        .collect::<Result<_>>()?;
    if images.is_empty() {
        return Err(Error::InvalidArgument("no training images".into()));
    }
    let mut report = TrainReport::default();
    let cfg = state.config.clone();
    while state.iteration < cfg.max_iters {
        let lr = lr_at(state.iteration, cfg.initial_lr, cfg.halve_every);
        let (loss, psnr) = train_step(state, &images)?;
        report.losses.push(loss);
        report.final_psnr = Some(psnr);
        let n = state.iteration;
        if (cfg.log_every > 0 && n.is_multiple_of(cfg.log_every)) || n == cfg.max_iters {
            let line = LogLine { iteration: n, lr, loss, psnr: Some(psnr) };
            writeln!(log, "{line}").map_err(|e| Error::io("<log>", e))?;
            report.logs.push(line);
        }
        if let Some(path) = out {
            if cfg.checkpoint_every > 0 && n.is_multiple_of(cfg.checkpoint_every) && n != cfg.max_iters {
                state.save(path)?;
            }
        }
    }
    if let Some(path) = out {
        state.save(path)?;
    }
    Ok(report)
}
