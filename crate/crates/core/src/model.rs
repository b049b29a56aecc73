//! Full network assembly.
//!
//! ```text
//! F_0   = head(I)
//! F_g   = F_{g-1} + ssc_g(RDAU_{g,U}(... RDAU_{g,1}(F_{g-1})))     g = 1..G
//! F_DF  = F_0 + fuse(AHAM(F_1..F_G))
//! I_out = tail(upscale(F_DF))        upscale only for super-resolution
//! RDAU(x) = ADAM(x + conv2(relu(conv1(x))))
//! ```
//!
//! The ablation trunk replaces the groups by `G * U` plain units and drops the
//! per-group convs; AHAM (when enabled) then aggregates every unit output.

use std::fmt;
use std::str::FromStr;

use crate::attention::{adam_forward, aham_forward, AdamBlockParams, AdamVariant, AhamParams};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::tensor::{Conv2dLayer, Graph, ParamStore, Shape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Task {
    SuperResolution { scale: usize },
    Denoise,
    Deblock,
}

impl Task {
    pub fn scale(self) -> usize {
        match self {
            Task::SuperResolution { scale } => scale,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::SuperResolution { .. } => "sr",
            Task::Denoise => "denoise",
            Task::Deblock => "deblock",
        }
    }

    /// RGB for super-resolution, one luminance channel otherwise.
    pub fn image_channels(self) -> usize {
        match self {
            Task::SuperResolution { .. } => 3,
            _ => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TrunkStyle {
    /// Residual dual attention groups with per-group convs.
    Rdag,
    /// Flat stack of `G * U` residual units and one fuse conv.
    Ablation,
}

impl fmt::Display for TrunkStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrunkStyle::Rdag => "rdag",
            TrunkStyle::Ablation => "ablation",
        })
    }
}

impl FromStr for TrunkStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rdag" => Ok(TrunkStyle::Rdag),
            "ablation" | "ablation_16_resblocks" | "resblocks" => Ok(TrunkStyle::Ablation),
            other => Err(Error::Config(format!("unknown trunk style `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ModelConfig {
    pub task: Task,
    pub in_channels: usize,
    pub out_channels: usize,
    pub trunk_channels: usize,
    pub num_groups: usize,
    pub units_per_group: usize,
    pub bottleneck_ratio: usize,
    pub adam_variant: AdamVariant,
    pub aham_enabled: bool,
    pub trunk_style: TrunkStyle,
}

impl ModelConfig {
    /// Four groups of four units, 64 channels, bottleneck ratio 16.
    pub fn for_task(task: Task) -> Self {
        let c = task.image_channels();
        ModelConfig {
            task,
            in_channels: c,
            out_channels: c,
            trunk_channels: 64,
            num_groups: 4,
            units_per_group: 4,
            bottleneck_ratio: 16,
            adam_variant: AdamVariant::Full,
            aham_enabled: true,
            trunk_style: TrunkStyle::Rdag,
        }
    }

    /// The attention-free 16-block trunk used as the ablation reference.
    pub fn ablation_baseline(scale: usize) -> Self {
        ModelConfig {
            adam_variant: AdamVariant::Off,
            aham_enabled: false,
            trunk_style: TrunkStyle::Ablation,
            ..Self::for_task(Task::SuperResolution { scale })
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Task::SuperResolution { scale } = self.task {
            if !matches!(scale, 2..=4) {
                return Err(Error::Config(format!("super-resolution scale must be 2, 3 or 4, got {scale}")));
            }
        }
        let counts = [
            ("in_channels", self.in_channels),
            ("out_channels", self.out_channels),
            ("trunk_channels", self.trunk_channels),
            ("groups", self.num_groups),
            ("units", self.units_per_group),
            ("reduction", self.bottleneck_ratio),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// Number of feature maps the hierarchical attention aggregates.
    pub fn aham_inputs(&self) -> usize {
        match self.trunk_style {
            TrunkStyle::Rdag => self.num_groups,
            TrunkStyle::Ablation => self.num_groups * self.units_per_group,
        }
    }

    /// `(channels multiplier, shuffle factor)` per upscale stage.
    pub fn upscale_stages(&self) -> Vec<usize> {
        match self.task.scale() {
            1 => vec![],
            4 => vec![2, 2],
            s => vec![s],
        }
    }
}

#[derive(Clone, Debug)]
pub struct ResBlock {
    pub conv1: Conv2dLayer,
    pub conv2: Conv2dLayer,
}

/// Residual block followed by the dual attention module.
#[derive(Clone, Debug)]
pub struct Rdau {
    pub body: ResBlock,
    pub adam: Option<AdamBlockParams>,
}

/// `U` units plus the group-closing conv.
#[derive(Clone, Debug)]
pub struct Rdag {
    pub units: Vec<Rdau>,
    pub tail: Conv2dLayer,
}

#[derive(Clone, Debug)]
pub enum Trunk {
    Groups(Vec<Rdag>),
    Units(Vec<Rdau>),
}

#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
    pub head: Conv2dLayer,
    pub trunk: Trunk,
    pub aham: Option<AhamParams>,
    pub fuse: Conv2dLayer,
    pub upscale: Vec<(Conv2dLayer, usize)>,
    pub tail: Conv2dLayer,
}

fn build_unit<R: rand::Rng>(store: &mut ParamStore, prefix: &str, cfg: &ModelConfig, rng: &mut R) -> Result<Rdau> {
    let c = cfg.trunk_channels;
    let body = ResBlock {
        conv1: Conv2dLayer::new(store, &format!("{prefix}.body.conv1"), c, c, 3, rng)?,
        conv2: Conv2dLayer::new(store, &format!("{prefix}.body.conv2"), c, c, 3, rng)?,
    };
    let adam = match cfg.adam_variant {
        AdamVariant::Off => None,
        v => Some(AdamBlockParams::new(store, &format!("{prefix}.adam"), c, cfg.bottleneck_ratio, v, rng)?),
    };
    Ok(Rdau { body, adam })
}

impl Model {
    /// Builds a model with conv weights drawn from the `(seed, init)` stream
    /// and every attention scale at zero.
    pub fn build(config: &ModelConfig, seed: u64) -> Result<Model> {
        config.validate()?;
        let cfg = config.clone();
        let c = cfg.trunk_channels;
        let mut rng = rng::keyed(seed, Stream::Init, 0);
        let mut store = ParamStore::new();

        let head = Conv2dLayer::new(&mut store, "head", cfg.in_channels, c, 3, &mut rng)?;
        let trunk = match cfg.trunk_style {
            TrunkStyle::Rdag => Trunk::Groups(
                (0..cfg.num_groups)
                    .map(|gi| {
                        let units = (0..cfg.units_per_group)
                            .map(|u| build_unit(&mut store, &format!("groups.{gi}.units.{u}"), &cfg, &mut rng))
                            .collect::<Result<_>>()?;
                        let tail = Conv2dLayer::new(&mut store, &format!("groups.{gi}.conv"), c, c, 3, &mut rng)?;
                        Ok(Rdag { units, tail })
                    })
                    .collect::<Result<_>>()?,
            ),
            TrunkStyle::Ablation => Trunk::Units(
                (0..cfg.num_groups * cfg.units_per_group)
                    .map(|u| build_unit(&mut store, &format!("units.{u}"), &cfg, &mut rng))
                    .collect::<Result<_>>()?,
            ),
        };
        let aham = if cfg.aham_enabled {
            Some(AhamParams::new(&mut store, "aham", c, cfg.aham_inputs(), &mut rng)?)
        } else {
            None
        };
        let fuse = Conv2dLayer::new(&mut store, "fuse", c, c, 3, &mut rng)?;
        let upscale = cfg
            .upscale_stages()
            .into_iter()
            .enumerate()
            .map(|(i, r)| Ok((Conv2dLayer::new(&mut store, &format!("upscale.{i}"), c, c * r * r, 3, &mut rng)?, r)))
            .collect::<Result<_>>()?;
        let tail = Conv2dLayer::new(&mut store, "tail", c, cfg.out_channels, 3, &mut rng)?;

        Ok(Model {
            config: cfg,
            params: store,
            head,
            trunk,
            aham,
            fuse,
            upscale,
            tail,
        })
    }

    /// Number of scalar parameters; biases included, each attention scale counts 1.
    pub fn count_params(&self) -> usize {
        self.params.numel()
    }

    pub fn forward(&self, g: &Graph, img: &Var) -> Result<Var> {
        self.forward_with(g, &self.params, img)
    }

    /// Forward pass reading parameter values from `store`, which must be laid
    /// out like `self.params` (for example a clone being perturbed).
    pub fn forward_with(&self, g: &Graph, store: &ParamStore, img: &Var) -> Result<Var> {
        if store.len() != self.params.len() {
            return Err(Error::InvalidArgument(format!(
                "parameter store has {} entries, model has {}",
                store.len(),
                self.params.len()
            )));
        }
        let s = img.shape();
        if s.channels() != self.config.in_channels {
            return Err(Error::shape(
                "model_forward",
                format!("input {s} has {} channels, model expects {}", s.channels(), self.config.in_channels),
            ));
        }
        let f0 = g.conv2d(img, &self.head, store)?;

        let feats: Vec<Var> = match &self.trunk {
            Trunk::Groups(groups) => {
                let mut outs = Vec::with_capacity(groups.len());
                let mut x = f0.clone();
                for group in groups {
                    x = rdag_forward(g, store, &x, group)?;
                    outs.push(x.clone());
                }
                outs
            }
            Trunk::Units(units) => {
                let mut outs = Vec::with_capacity(units.len());
                let mut x = f0.clone();
                for unit in units {
                    x = rdau_forward(g, store, &x, unit)?;
                    outs.push(x.clone());
                }
                outs
            }
        };
        let deep = match &self.aham {
            Some(aham) => aham_forward(g, store, &feats, aham)?,
            None => feats.last().cloned().unwrap_or_else(|| f0.clone()),
        };
        let mut x = g.add(&f0, &g.conv2d(&deep, &self.fuse, store)?)?;
        for (conv, r) in &self.upscale {
            x = g.pixel_shuffle(&g.conv2d(&x, conv, store)?, *r)?;
        }
        g.conv2d(&x, &self.tail, store)
    }

    /// Full-image inference without recording a graph.
    pub fn infer(&self, img: &Tensor) -> Result<Tensor> {
        let g = Graph::inference();
        Ok(self.forward(&g, &g.constant(img.clone()))?.into_tensor())
    }

    /// Copies every parameter of `other` whose name and shape match one of
    /// ours. Returns the number copied.
    pub fn copy_matching_from(&mut self, other: &Model) -> usize {
        let mut copied = 0;
        for (_, p) in other.params.iter() {
            if let Some(id) = self.params.id(p.name()) {
                let dst = self.params.get_mut(id);
                if dst.value().shape() == p.value().shape() {
                    *dst.value_mut() = p.value().clone();
                    copied += 1;
                }
            }
        }
        copied
    }

    pub fn output_shape(&self, input: Shape) -> Shape {
        let s = self.config.task.scale();
        Shape::new(input.batch(), self.config.out_channels, input.height() * s, input.width() * s)
    }
}

/// `x + conv2(relu(conv1(x)))`.
pub fn resblock_forward(g: &Graph, store: &ParamStore, x: &Var, block: &ResBlock) -> Result<Var> {
    let h = g.relu(&g.conv2d(x, &block.conv1, store)?);
    g.add(x, &g.conv2d(&h, &block.conv2, store)?)
}

/// Residual block followed by the dual attention module (when present).
pub fn rdau_forward(g: &Graph, store: &ParamStore, x: &Var, unit: &Rdau) -> Result<Var> {
    let y = resblock_forward(g, store, x, &unit.body)?;
    match &unit.adam {
        Some(adam) => adam_forward(g, store, &y, adam),
        None => Ok(y),
    }
}

/// `x + conv(RDAU_U(... RDAU_1(x)))`.
pub fn rdag_forward(g: &Graph, store: &ParamStore, x: &Var, group: &Rdag) -> Result<Var> {
    let mut y = x.clone();
    for unit in &group.units {
        y = rdau_forward(g, store, &y, unit)?;
    }
    g.add(x, &g.conv2d(&y, &group.tail, store)?)
}

/// Mean absolute error.
pub fn l1_loss(g: &Graph, pred: &Var, target: &Var) -> Result<Var> {
    g.l1_loss(pred, target)
}

/// Mean squared error.
pub fn l2_loss(g: &Graph, pred: &Var, target: &Var) -> Result<Var> {
    g.l2_loss(pred, target)
}

/// Rounds a parameter count to the nearest thousand, e.g. `1_369_859 -> "1370K"`.
pub fn format_thousands(count: usize) -> String {
    format!("{}K", (count + 500) / 1000)
}
