//! Spatial, channel and hierarchical attention.
//!
//! * ASAB: a 1x1 conv squeezes `X` to one map, a softmax over all `H*W`
//!   positions weights the pixels, and the weighted sum of pixel features is
//!   passed through a 1x1 bottleneck and scaled by `alpha`.
//! * ACAB: spatial means of the channels go through a softmax over `C`, the
//!   weighted sum of channel maps is a single `H x W` map, transformed by two
//!   3x3 convs and scaled by `beta`.
//! * ADAM: `X + ASAB(X) + ACAB(X)`, broadcasting the `[B,C,1,1]` and
//!   `[B,1,H,W]` branch outputs.
//! * AHAM: one scalar per group feature map (mean pool + 1x1 conv), softmax
//!   over groups, and `F_G + gamma * sum_g w_g F_g`.
//!
//! All adaptive scales start at exactly zero, so freshly built blocks are
//! identity maps.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{Conv2dLayer, Graph, ParamId, ParamStore, SoftmaxAxis, Tensor, Var};

/// Which branches of the dual attention module are present.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AdamVariant {
    /// Both branches with learned `alpha` and `beta`.
    Full,
    /// Spatial branch only.
    SpatialOnly,
    /// Channel branch only.
    ChannelOnly,
    /// Both branches, `alpha = beta = 1` fixed.
    NoWeights,
    /// No attention module at all.
    Off,
}

impl AdamVariant {
    pub fn has_spatial(self) -> bool {
        matches!(self, AdamVariant::Full | AdamVariant::SpatialOnly | AdamVariant::NoWeights)
    }

    pub fn has_channel(self) -> bool {
        matches!(self, AdamVariant::Full | AdamVariant::ChannelOnly | AdamVariant::NoWeights)
    }

    pub fn adaptive_weights(self) -> bool {
        !matches!(self, AdamVariant::NoWeights)
    }
}

impl fmt::Display for AdamVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdamVariant::Full => "full",
            AdamVariant::SpatialOnly => "s",
            AdamVariant::ChannelOnly => "c",
            AdamVariant::NoWeights => "nw",
            AdamVariant::Off => "off",
        })
    }
}

impl FromStr for AdamVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "full" => AdamVariant::Full,
            "s" | "spatial" => AdamVariant::SpatialOnly,
            "c" | "channel" => AdamVariant::ChannelOnly,
            "nw" => AdamVariant::NoWeights,
            "off" | "none" => AdamVariant::Off,
            other => return Err(Error::Config(format!("unknown attention variant `{other}`"))),
        })
    }
}

/// Width of the ASAB bottleneck: `ceil(channels / ratio)`.
pub fn bottleneck_width(channels: usize, ratio: usize) -> usize {
    channels.div_ceil(ratio.max(1))
}

fn scale_param(store: &mut ParamStore, name: String, adaptive: bool) -> Result<Option<ParamId>> {
    if adaptive {
        store.add(name, Tensor::scalar(0.0)).map(Some)
    } else {
        Ok(None)
    }
}

#[derive(Clone, Debug)]
pub struct AsabParams {
    pub squeeze: Conv2dLayer,
    pub bottleneck_down: Conv2dLayer,
    pub bottleneck_up: Conv2dLayer,
    /// `None` means alpha is fixed at 1.
    pub alpha: Option<ParamId>,
}

impl AsabParams {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        channels: usize,
        ratio: usize,
        adaptive: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let mid = bottleneck_width(channels, ratio);
        Ok(AsabParams {
            squeeze: Conv2dLayer::new(store, &format!("{prefix}.squeeze"), channels, 1, 1, rng)?,
            bottleneck_down: Conv2dLayer::new(store, &format!("{prefix}.down"), channels, mid, 1, rng)?,
            bottleneck_up: Conv2dLayer::new(store, &format!("{prefix}.up"), mid, channels, 1, rng)?,
            alpha: scale_param(store, format!("{prefix}.alpha"), adaptive)?,
        })
    }

    pub fn channels(&self) -> usize {
        self.squeeze.in_channels
    }

    pub fn param_count(&self) -> usize {
        self.squeeze.param_count()
            + self.bottleneck_down.param_count()
            + self.bottleneck_up.param_count()
            + usize::from(self.alpha.is_some())
    }
}

#[derive(Clone, Debug)]
pub struct AcabParams {
    pub transform_1: Conv2dLayer,
    pub transform_2: Conv2dLayer,
    /// `None` means beta is fixed at 1.
    pub beta: Option<ParamId>,
}

impl AcabParams {
    pub fn new<R: Rng>(store: &mut ParamStore, prefix: &str, adaptive: bool, rng: &mut R) -> Result<Self> {
        Ok(AcabParams {
            transform_1: Conv2dLayer::new(store, &format!("{prefix}.conv1"), 1, 1, 3, rng)?,
            transform_2: Conv2dLayer::new(store, &format!("{prefix}.conv2"), 1, 1, 3, rng)?,
            beta: scale_param(store, format!("{prefix}.beta"), adaptive)?,
        })
    }

    pub fn param_count(&self) -> usize {
        self.transform_1.param_count() + self.transform_2.param_count() + usize::from(self.beta.is_some())
    }
}

#[derive(Clone, Debug)]
pub struct AdamBlockParams {
    pub asab: Option<AsabParams>,
    pub acab: Option<AcabParams>,
    pub variant: AdamVariant,
}

impl AdamBlockParams {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        channels: usize,
        ratio: usize,
        variant: AdamVariant,
        rng: &mut R,
    ) -> Result<Self> {
        let adaptive = variant.adaptive_weights();
        let asab = if variant.has_spatial() {
            Some(AsabParams::new(store, &format!("{prefix}.asab"), channels, ratio, adaptive, rng)?)
        } else {
            None
        };
        let acab = if variant.has_channel() {
            Some(AcabParams::new(store, &format!("{prefix}.acab"), adaptive, rng)?)
        } else {
            None
        };
        Ok(AdamBlockParams { asab, acab, variant })
    }

    pub fn param_count(&self) -> usize {
        self.asab.as_ref().map_or(0, AsabParams::param_count) + self.acab.as_ref().map_or(0, AcabParams::param_count)
    }
}

#[derive(Clone, Debug)]
pub struct AhamParams {
    pub squeezers: Vec<Conv2dLayer>,
    pub gamma: ParamId,
}

impl AhamParams {
    pub fn new<R: Rng>(store: &mut ParamStore, prefix: &str, channels: usize, groups: usize, rng: &mut R) -> Result<Self> {
        if groups == 0 {
            return Err(Error::Config("hierarchical attention needs at least one group".into()));
        }
        let squeezers = (0..groups)
            .map(|g| Conv2dLayer::new(store, &format!("{prefix}.squeeze.{g}"), channels, 1, 1, rng))
            .collect::<Result<_>>()?;
        Ok(AhamParams {
            squeezers,
            gamma: store.add(format!("{prefix}.gamma"), Tensor::scalar(0.0))?,
        })
    }

    pub fn param_count(&self) -> usize {
        self.squeezers.iter().map(Conv2dLayer::param_count).sum::<usize>() + 1
    }
}

/// Intermediate values of one attention branch.
#[derive(Clone, Debug)]
pub struct AttentionTrace {
    /// Softmax weights (`[B,1,H,W]` spatial, `[B,C,1,1]` channel, `[B,G,1,1]` hierarchical).
    pub weights: Var,
    /// Attention-weighted context before the transform.
    pub context: Var,
    pub output: Var,
}

fn check_channels(op: &'static str, x: &Var, expected: usize) -> Result<()> {
    if x.shape().channels() != expected {
        return Err(Error::shape(
            op,
            format!("input {} has {} channels, expected {expected}", x.shape(), x.shape().channels()),
        ));
    }
    Ok(())
}

fn scaled(g: &Graph, store: &ParamStore, t: Var, scale: Option<ParamId>) -> Result<Var> {
    match scale {
        Some(id) => g.mul(&t, &g.param(store, id)),
        None => Ok(t),
    }
}

pub fn asab_trace(g: &Graph, store: &ParamStore, x: &Var, p: &AsabParams) -> Result<AttentionTrace> {
    check_channels("asab_forward", x, p.channels())?;
    let logits = g.conv2d(x, &p.squeeze, store)?;
    let weights = g.softmax(&logits, SoftmaxAxis::Spatial)?;
    let context = g.sum_spatial(&g.mul(x, &weights)?)?;
    let hidden = g.relu(&g.conv2d(&context, &p.bottleneck_down, store)?);
    let transformed = g.conv2d(&hidden, &p.bottleneck_up, store)?;
    let output = scaled(g, store, transformed, p.alpha)?;
    Ok(AttentionTrace { weights, context, output })
}

/// Spatial attention branch, `[B,C,H,W] -> [B,C,1,1]`.
pub fn asab_forward(g: &Graph, store: &ParamStore, x: &Var, p: &AsabParams) -> Result<Var> {
    Ok(asab_trace(g, store, x, p)?.output)
}

pub fn acab_trace(g: &Graph, store: &ParamStore, x: &Var, p: &AcabParams) -> Result<AttentionTrace> {
    let means = g.global_avg_pool(x)?;
    let weights = g.softmax(&means, SoftmaxAxis::Channel)?;
    let context = g.sum_channels(&g.mul(x, &weights)?)?;
    let hidden = g.relu(&g.conv2d(&context, &p.transform_1, store)?);
    let transformed = g.conv2d(&hidden, &p.transform_2, store)?;
    let output = scaled(g, store, transformed, p.beta)?;
    Ok(AttentionTrace { weights, context, output })
}

/// Channel attention branch, `[B,C,H,W] -> [B,1,H,W]`.
pub fn acab_forward(g: &Graph, store: &ParamStore, x: &Var, p: &AcabParams) -> Result<Var> {
    Ok(acab_trace(g, store, x, p)?.output)
}

/// Dual attention module: `x + ASAB(x) + ACAB(x)` with broadcasting.
pub fn adam_forward(g: &Graph, store: &ParamStore, x: &Var, p: &AdamBlockParams) -> Result<Var> {
    let mut out = x.clone();
    if let Some(asab) = &p.asab {
        out = g.add(&out, &asab_forward(g, store, x, asab)?)?;
    }
    if let Some(acab) = &p.acab {
        out = g.add(&out, &acab_forward(g, store, x, acab)?)?;
    }
    Ok(out)
}

pub fn aham_trace(g: &Graph, store: &ParamStore, feats: &[Var], p: &AhamParams) -> Result<AttentionTrace> {
    let last = feats
        .last()
        .ok_or_else(|| Error::shape("aham_forward", "empty feature list"))?;
    if feats.len() != p.squeezers.len() {
        return Err(Error::shape(
            "aham_forward",
            format!("{} feature maps for {} squeezers", feats.len(), p.squeezers.len()),
        ));
    }
    if let Some(bad) = feats.iter().find(|f| f.shape() != last.shape()) {
        return Err(Error::shape("aham_forward", format!("{} vs {}", bad.shape(), last.shape())));
    }
    let logits = feats
        .iter()
        .zip(&p.squeezers)
        .map(|(f, conv)| g.conv2d(&g.global_avg_pool(f)?, conv, store))
        .collect::<Result<Vec<_>>>()?;
    let weights = g.softmax(&g.concat_channels(&logits)?, SoftmaxAxis::Channel)?;
    let mut context: Option<Var> = None;
    for (i, f) in feats.iter().enumerate() {
        let term = g.mul(f, &g.select_channel(&weights, i)?)?;
        context = Some(match context {
            Some(acc) => g.add(&acc, &term)?,
            None => term,
        });
    }
    let context = context.expect("non-empty feature list");
    let output = g.add(last, &g.mul(&context, &g.param(store, p.gamma))?)?;
    Ok(AttentionTrace { weights, context, output })
}

/// Hierarchical attention: `F_G + gamma * sum_g w_g F_g`.
pub fn aham_forward(g: &Graph, store: &ParamStore, feats: &[Var], p: &AhamParams) -> Result<Var> {
    Ok(aham_trace(g, store, feats, p)?.output)
}
