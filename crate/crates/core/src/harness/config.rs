//! Flat `key = value` configuration files.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are an error.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `task` | `sr` | `sr`, `denoise` or `deblock` |
//! | `scale` | `2` | super-resolution factor (2, 3, 4) |
//! | `sigma` | `30` | denoising noise level on the 0-255 scale |
//! | `quality` | `10` | deblocking JPEG quality |
//! | `noise_seed` | `0` | seed of the degradation noise streams |
//! | `in_channels`, `out_channels` | by task | image channels |
//! | `channels` | `64` | trunk feature maps |
//! | `groups`, `units` | `4`, `4` | RDAG groups and units per group |
//! | `reduction` | `16` | ASAB bottleneck ratio |
//! | `adam` | `full` | dual attention variant: `full`, `s`, `c`, `nw`, `off` |
//! | `aham` | `true` | hierarchical attention on/off |
//! | `trunk` | `rdag` | `rdag` or `ablation` (flat units, no group convs) |
//! | `lr` | `0.0002` | initial learning rate |
//! | `halve_every` | `200000` | iterations between learning-rate halvings |
//! | `max_iters` | `20000` | training length |
//! | `batch`, `patch` | `16`, `48` | batch size and LQ patch edge |
//! | `seed` | `0` | initialization and cropping seed |
//! | `loss` | by task | `l1` or `l2` |
//! | `augment` | `true` | random dihedral augmentation |
//! | `fixed_noise` | `false` | same noise field every iteration |
//! | `log_every` | `100` | iterations between log lines |
//! | `checkpoint_every` | `0` | iterations between checkpoints (0: end only) |

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::attention::AdamVariant;
use crate::error::{Error, Result};
use crate::imaging::{Degradation, DegradationSpec};
use crate::model::{ModelConfig, Task, TrunkStyle};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Loss {
    L1,
    L2,
}

impl Loss {
    /// L1 for super-resolution, L2 for denoising and deblocking.
    pub fn for_task(task: Task) -> Loss {
        match task {
            Task::SuperResolution { .. } => Loss::L1,
            _ => Loss::L2,
        }
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Loss::L1 => "l1",
            Loss::L2 => "l2",
        })
    }
}

impl FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(Loss::L1),
            "l2" => Ok(Loss::L2),
            other => Err(Error::Config(format!("unknown loss `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub degradation: DegradationSpec,
    pub initial_lr: f64,
    pub halve_every: u64,
    pub max_iters: u64,
    pub batch_size: usize,
    pub patch_size: usize,
    pub seed: u64,
    pub loss: Loss,
    pub augment: bool,
    pub fixed_noise: bool,
    pub log_every: u64,
    pub checkpoint_every: u64,
}

/// The degradation a task trains against by default.
pub fn default_degradation(task: Task) -> Degradation {
    match task {
        Task::SuperResolution { scale } => Degradation::BicubicDown(scale),
        Task::Denoise => Degradation::Awgn(30.0),
        Task::Deblock => Degradation::Jpeg(10),
    }
}

/// Whether `kind` is the degradation `task` restores.
pub fn degradation_fits(task: Task, kind: Degradation) -> bool {
    match (task, kind) {
        (Task::SuperResolution { scale }, Degradation::BicubicDown(s)) => s == scale,
        (Task::Denoise, Degradation::Awgn(_)) | (Task::Deblock, Degradation::Jpeg(_)) => true,
        _ => false,
    }
}

impl TrainConfig {
    pub fn for_task(task: Task) -> Self {
        TrainConfig {
            model: ModelConfig::for_task(task),
            degradation: DegradationSpec {
                kind: default_degradation(task),
                seed: 0,
            },
            initial_lr: 2e-4,
            halve_every: 200_000,
            max_iters: 20_000,
            batch_size: 16,
            patch_size: 48,
            seed: 0,
            loss: Loss::for_task(task),
            augment: true,
            fixed_noise: false,
            log_every: 100,
            checkpoint_every: 0,
        }
    }

    pub fn task(&self) -> Task {
        self.model.task
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.degradation.kind.validate()?;
        if !degradation_fits(self.model.task, self.degradation.kind) {
            return Err(Error::Config(format!(
                "degradation {} does not fit task {}",
                self.degradation.kind,
                self.model.task.name()
            )));
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::Config(format!("lr must be > 0, got {}", self.initial_lr)));
        }
        if self.batch_size == 0 || self.patch_size == 0 {
            return Err(Error::Config("batch and patch must be positive".into()));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.parse()
    }

    /// Canonical text form; parsing it gives back an equal config.
    pub fn to_text(&self) -> String {
        let m = &self.model;
        let mut s = String::new();
        let mut kv = |k: &str, v: &dyn fmt::Display| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("task", &m.task.name());
        match self.degradation.kind {
            Degradation::BicubicDown(scale) => kv("scale", &scale),
            Degradation::Awgn(sigma) => kv("sigma", &sigma),
            Degradation::Jpeg(q) => kv("quality", &q),
        }
        kv("noise_seed", &self.degradation.seed);
        kv("in_channels", &m.in_channels);
        kv("out_channels", &m.out_channels);
        kv("channels", &m.trunk_channels);
        kv("groups", &m.num_groups);
        kv("units", &m.units_per_group);
        kv("reduction", &m.bottleneck_ratio);
        kv("adam", &m.adam_variant);
        kv("aham", &m.aham_enabled);
        kv("trunk", &m.trunk_style);
        kv("lr", &self.initial_lr);
        kv("halve_every", &self.halve_every);
        kv("max_iters", &self.max_iters);
        kv("batch", &self.batch_size);
        kv("patch", &self.patch_size);
        kv("seed", &self.seed);
        kv("loss", &self.loss);
        kv("augment", &self.augment);
        kv("fixed_noise", &self.fixed_noise);
        kv("log_every", &self.log_every);
        kv("checkpoint_every", &self.checkpoint_every);
        s
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

impl FromStr for TrainConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if pairs.iter().any(|(seen, _)| *seen == k) {
                return Err(Error::Config(format!("line {}: duplicate key `{k}`", n + 1)));
            }
            pairs.push((k, v));
        }
        let get = |k: &str| pairs.iter().find(|(key, _)| *key == k).map(|(_, v)| *v);

        // The task decides the defaults of everything else.
        let scale = get("scale").map(|v| parse::<usize>("scale", v)).transpose()?;
        let task = match get("task").unwrap_or("sr") {
            "sr" => Task::SuperResolution { scale: scale.unwrap_or(2) },
            "denoise" => Task::Denoise,
            "deblock" => Task::Deblock,
            other => return Err(Error::Config(format!("unknown task `{other}`"))),
        };
        let mut cfg = TrainConfig::for_task(task);
        for &(k, v) in &pairs {
            let m = &mut cfg.model;
            match k {
                "task" | "scale" => {}
                "sigma" => cfg.degradation.kind = Degradation::Awgn(parse(k, v)?),
                "quality" => cfg.degradation.kind = Degradation::Jpeg(parse(k, v)?),
                "noise_seed" => cfg.degradation.seed = parse(k, v)?,
                "in_channels" => m.in_channels = parse(k, v)?,
                "out_channels" => m.out_channels = parse(k, v)?,
                "channels" => m.trunk_channels = parse(k, v)?,
                "groups" => m.num_groups = parse(k, v)?,
                "units" => m.units_per_group = parse(k, v)?,
                "reduction" => m.bottleneck_ratio = parse(k, v)?,
                "adam" => m.adam_variant = v.parse::<AdamVariant>()?,
                "aham" => m.aham_enabled = parse(k, v)?,
                "trunk" => m.trunk_style = v.parse::<TrunkStyle>()?,
                "lr" => cfg.initial_lr = parse(k, v)?,
                "halve_every" => cfg.halve_every = parse(k, v)?,
                "max_iters" => cfg.max_iters = parse(k, v)?,
                "batch" => cfg.batch_size = parse(k, v)?,
                "patch" => cfg.patch_size = parse(k, v)?,
                "seed" => cfg.seed = parse(k, v)?,
                "loss" => cfg.loss = v.parse()?,
                "augment" => cfg.augment = parse(k, v)?,
                "fixed_noise" => cfg.fixed_noise = parse(k, v)?,
                "log_every" => cfg.log_every = parse(k, v)?,
                "checkpoint_every" => cfg.checkpoint_every = parse(k, v)?,
                other => return Err(Error::Config(format!("unknown key `{other}`"))),
            }
        }
        if scale.is_some() && !matches!(task, Task::SuperResolution { .. }) {
            return Err(Error::Config("`scale` only applies to task = sr".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
