//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] either records (training, gradient checks) or not (inference).
//! Every op returns a [`Var`] holding its value; when recording, the op also
//! appends a node carrying whatever the backward pass needs. Parameters enter
//! through [`Graph::param`] and receive their gradients in
//! [`Graph::backward`].

use std::cell::{Cell, RefCell};
use std::sync::Arc;

use super::kernels;
use super::param::{Conv2dLayer, ParamId, ParamStore};
use super::{Shape, Tensor};
use crate::error::{Error, Result};

type NodeId = usize;

/// A value flowing through a [`Graph`].
#[derive(Clone, Debug)]
pub struct Var {
    value: Arc<Tensor>,
    node: Option<NodeId>,
}

impl Var {
    pub fn value(&self) -> &Tensor {
        &self.value
    }

    pub fn shape(&self) -> Shape {
        self.value.shape()
    }

    pub fn tracked(&self) -> bool {
        self.node.is_some()
    }

    pub fn into_tensor(self) -> Tensor {
        Arc::try_unwrap(self.value).unwrap_or_else(|shared| (*shared).clone())
    }
}

/// Axis groups a softmax normalizes over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SoftmaxAxis {
    /// Over the `C` channels at each `(b, h, w)`.
    Channel,
    /// Over the `H * W` positions of each `(b, c)` map.
    Spatial,
}

#[derive(Debug)]
enum Op {
    Param(ParamId),
    Conv {
        x: Option<NodeId>,
        w: Option<NodeId>,
        b: Option<NodeId>,
        x_val: Arc<Tensor>,
        w_val: Arc<Tensor>,
        out_ch: usize,
        k: usize,
    },
    Add {
        a: Option<NodeId>,
        b: Option<NodeId>,
        sa: Shape,
        sb: Shape,
        negate_b: bool,
    },
    Mul {
        a: Option<NodeId>,
        b: Option<NodeId>,
        a_val: Arc<Tensor>,
        b_val: Arc<Tensor>,
    },
    Relu {
        x: NodeId,
        y: Arc<Tensor>,
    },
    Softmax {
        x: NodeId,
        y: Arc<Tensor>,
        axis: SoftmaxAxis,
    },
    SumSpatial {
        x: NodeId,
        scale: f64,
        xs: Shape,
    },
    SumChannels {
        x: NodeId,
        xs: Shape,
    },
    SelectChannel {
        x: NodeId,
        channel: usize,
        xs: Shape,
    },
    Concat {
        parts: Vec<(Option<NodeId>, Shape)>,
    },
    PixelShuffle {
        x: NodeId,
        r: usize,
        ys: Shape,
    },
    SumAll {
        x: NodeId,
        scale: f64,
        xs: Shape,
    },
    Loss {
        pred: Option<NodeId>,
        target: Option<NodeId>,
        /// d loss / d pred, already divided by the element count.
        local: Vec<f64>,
    },
}

struct Node {
    op: Op,
}

/// Computation graph for one forward/backward pass.
pub struct Graph {
    recording: bool,
    nodes: RefCell<Vec<Node>>,
    consumed: Cell<bool>,
    /// Sign pattern of every ReLU input, when probing for kinks.
    relu_signs: Option<RefCell<Vec<bool>>>,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    /// A graph that records every op for a later [`Graph::backward`].
    pub fn new() -> Self {
        Graph {
            recording: true,
            nodes: RefCell::new(Vec::new()),
            consumed: Cell::new(false),
            relu_signs: None,
        }
    }

    /// A graph that records nothing; intermediate values are freed as soon as
    /// their `Var`s drop.
    pub fn inference() -> Self {
        Graph {
            recording: false,
            ..Self::new()
        }
    }

    /// An inference graph that remembers which side of zero every ReLU input
    /// fell on; see [`Graph::relu_signs`].
    pub fn probing() -> Self {
        Graph {
            relu_signs: Some(RefCell::new(Vec::new())),
            ..Self::inference()
        }
    }

    /// ReLU activation pattern of a [`Graph::probing`] graph, in op order.
    /// Two evaluations with equal patterns lie on the same linear piece.
    pub fn relu_signs(&self) -> Option<Vec<bool>> {
        self.relu_signs.as_ref().map(|s| s.borrow().clone())
    }

    pub fn is_recording(&self) -> bool {
        self.recording
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor, op: impl FnOnce() -> Op, parents: &[Option<NodeId>]) -> Var {
        let value = Arc::new(value);
        let node = if self.recording && parents.iter().any(Option::is_some) {
            let mut nodes = self.nodes.borrow_mut();
            nodes.push(Node { op: op() });
            Some(nodes.len() - 1)
        } else {
            None
        };
        Var { value, node }
    }

    /// Untracked input.
    pub fn constant(&self, t: Tensor) -> Var {
        Var {
            value: Arc::new(t),
            node: None,
        }
    }

    pub fn param(&self, store: &ParamStore, id: ParamId) -> Var {
        let value = store.get(id).shared_value();
        let node = if self.recording {
            let mut nodes = self.nodes.borrow_mut();
            nodes.push(Node { op: Op::Param(id) });
            Some(nodes.len() - 1)
        } else {
            None
        };
        Var { value, node }
    }

    pub fn conv2d(&self, x: &Var, layer: &Conv2dLayer, store: &ParamStore) -> Result<Var> {
        let w = self.param(store, layer.weight);
        let b = self.param(store, layer.bias);
        self.conv2d_with(x, &w, &b)
    }

    /// Convolution with explicit weight `[out, in, k, k]` and bias `[out, 1, 1, 1]`.
    pub fn conv2d_with(&self, x: &Var, w: &Var, b: &Var) -> Result<Var> {
        let xs = x.shape();
        let [out_ch, in_ch, kh, kw] = w.shape().0;
        if xs.channels() != in_ch {
            return Err(Error::shape(
                "conv2d",
                format!("input {xs} has {} channels, layer expects {in_ch}", xs.channels()),
            ));
        }
        if xs.height() == 0 || xs.width() == 0 {
            return Err(Error::shape("conv2d", format!("zero spatial extent {xs}")));
        }
        if kh != kw || kh % 2 == 0 {
            return Err(Error::shape("conv2d", format!("kernel {kh}x{kw} must be square and odd")));
        }
        if b.value().numel() != out_ch {
            return Err(Error::shape("conv2d", format!("bias has {} values for {out_ch} outputs", b.value().numel())));
        }
        let out = kernels::conv2d_forward(x.value().data(), xs, w.value().data(), b.value().data(), out_ch, kh);
        let out = Tensor::from_vec(Shape::new(xs.batch(), out_ch, xs.height(), xs.width()), out)?;
        Ok(self.push(
            out,
            || Op::Conv {
                x: x.node,
                w: w.node,
                b: b.node,
                x_val: Arc::clone(&x.value),
                w_val: Arc::clone(&w.value),
                out_ch,
                k: kh,
            },
            &[x.node, w.node, b.node],
        ))
    }

    fn broadcast_shape(op: &'static str, a: &Var, b: &Var) -> Result<Shape> {
        a.shape()
            .broadcast(&b.shape())
            .ok_or_else(|| Error::shape(op, format!("cannot broadcast {} with {}", a.shape(), b.shape())))
    }

    /// Broadcasting addition.
    pub fn add(&self, a: &Var, b: &Var) -> Result<Var> {
        self.add_impl("add", a, b, false)
    }

    /// Broadcasting subtraction.
    pub fn sub(&self, a: &Var, b: &Var) -> Result<Var> {
        self.add_impl("sub", a, b, true)
    }

    fn add_impl(&self, op: &'static str, a: &Var, b: &Var, negate_b: bool) -> Result<Var> {
        let out = Self::broadcast_shape(op, a, b)?;
        let (sa, sb) = (a.shape(), b.shape());
        let data = if negate_b {
            kernels::broadcast_zip(a.value().data(), sa, b.value().data(), sb, out, |x, y| x - y)
        } else {
            kernels::broadcast_zip(a.value().data(), sa, b.value().data(), sb, out, |x, y| x + y)
        };
        Ok(self.push(
            Tensor::from_vec(out, data)?,
            || Op::Add {
                a: a.node,
                b: b.node,
                sa,
                sb,
                negate_b,
            },
            &[a.node, b.node],
        ))
    }

    /// Broadcasting elementwise product.
    pub fn mul(&self, a: &Var, b: &Var) -> Result<Var> {
        let out = Self::broadcast_shape("mul", a, b)?;
        let data = kernels::broadcast_zip(a.value().data(), a.shape(), b.value().data(), b.shape(), out, |x, y| x * y);
        Ok(self.push(
            Tensor::from_vec(out, data)?,
            || Op::Mul {
                a: a.node,
                b: b.node,
                a_val: Arc::clone(&a.value),
                b_val: Arc::clone(&b.value),
            },
            &[a.node, b.node],
        ))
    }

    pub fn relu(&self, x: &Var) -> Var {
        if let Some(signs) = &self.relu_signs {
            signs.borrow_mut().extend(x.value().data().iter().map(|&v| v > 0.0));
        }
        let y = Arc::new(x.value().map(|v| v.max(0.0)));
        let saved = Arc::clone(&y);
        let node = match x.node {
            Some(xn) if self.recording => {
                let mut nodes = self.nodes.borrow_mut();
                nodes.push(Node {
                    op: Op::Relu { x: xn, y: saved },
                });
                Some(nodes.len() - 1)
            }
            _ => None,
        };
        Var { value: y, node }
    }

    pub fn softmax(&self, x: &Var, axis: SoftmaxAxis) -> Result<Var> {
        if !x.value().all_finite() {
            return Err(Error::NonFinite("softmax input"));
        }
        let xs = x.shape();
        let extent = match axis {
            SoftmaxAxis::Channel => xs.channels(),
            SoftmaxAxis::Spatial => xs.plane(),
        };
        if extent == 0 {
            return Err(Error::shape("softmax", format!("empty softmax axis in {xs}")));
        }
        let mut y = x.value().clone();
        for_each_softmax_group(y.data_mut(), xs, axis, kernels::softmax_in_place);
        let y = Arc::new(y);
        let node = match x.node {
            Some(xn) if self.recording => {
                let mut nodes = self.nodes.borrow_mut();
                nodes.push(Node {
                    op: Op::Softmax {
                        x: xn,
                        y: Arc::clone(&y),
                        axis,
                    },
                });
                Some(nodes.len() - 1)
            }
            _ => None,
        };
        Ok(Var { value: y, node })
    }

    /// Mean over each `H x W` map, giving `[B, C, 1, 1]`.
    pub fn global_avg_pool(&self, x: &Var) -> Result<Var> {
        let xs = x.shape();
        if xs.plane() == 0 {
            return Err(Error::shape("global_avg_pool", format!("empty spatial extent {xs}")));
        }
        self.spatial_reduce(x, 1.0 / xs.plane() as f64)
    }

    /// Sum over each `H x W` map, giving `[B, C, 1, 1]`.
    pub fn sum_spatial(&self, x: &Var) -> Result<Var> {
        self.spatial_reduce(x, 1.0)
    }

    fn spatial_reduce(&self, x: &Var, scale: f64) -> Result<Var> {
        let xs = x.shape();
        let plane = xs.plane();
        let data = x
            .value()
            .data()
            .chunks(plane.max(1))
            .map(|c| c.iter().sum::<f64>() * scale)
            .collect();
        let out = Tensor::from_vec(Shape::new(xs.batch(), xs.channels(), 1, 1), data)?;
        Ok(self.push(out, || Op::SumSpatial { x: x.node.unwrap(), scale, xs }, &[x.node]))
    }

    /// Sum over channels, giving `[B, 1, H, W]`.
    pub fn sum_channels(&self, x: &Var) -> Result<Var> {
        let xs = x.shape();
        let [b, c, _, _] = xs.0;
        let plane = xs.plane();
        let src = x.value().data();
        let mut data = vec![0.0; b * plane];
        for ib in 0..b {
            let dst = &mut data[ib * plane..(ib + 1) * plane];
            for ic in 0..c {
                for (o, v) in dst.iter_mut().zip(&src[(ib * c + ic) * plane..][..plane]) {
                    *o += v;
                }
            }
        }
        let out = Tensor::from_vec(Shape::new(b, 1, xs.height(), xs.width()), data)?;
        Ok(self.push(out, || Op::SumChannels { x: x.node.unwrap(), xs }, &[x.node]))
    }

    /// Channel `channel` as a `[B, 1, H, W]` tensor.
    pub fn select_channel(&self, x: &Var, channel: usize) -> Result<Var> {
        let xs = x.shape();
        let [b, c, h, w] = xs.0;
        if channel >= c {
            return Err(Error::shape("select_channel", format!("channel {channel} of {xs}")));
        }
        let plane = h * w;
        let src = x.value().data();
        let data = (0..b)
            .flat_map(|ib| src[(ib * c + channel) * plane..][..plane].iter().copied())
            .collect();
        let out = Tensor::from_vec(Shape::new(b, 1, h, w), data)?;
        Ok(self.push(
            out,
            || Op::SelectChannel {
                x: x.node.unwrap(),
                channel,
                xs,
            },
            &[x.node],
        ))
    }

    /// Concatenation along the channel axis.
    pub fn concat_channels(&self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::shape("concat_channels", "no inputs"))?
            .shape();
        let [b, _, h, w] = first.0;
        let plane = h * w;
        let mut total_c = 0;
        for p in parts {
            let s = p.shape();
            if s.batch() != b || s.height() != h || s.width() != w {
                return Err(Error::shape("concat_channels", format!("{s} vs {first}")));
            }
            total_c += s.channels();
        }
        let mut data = Vec::with_capacity(b * total_c * plane);
        for ib in 0..b {
            for p in parts {
                let c = p.shape().channels();
                data.extend_from_slice(&p.value().data()[ib * c * plane..(ib + 1) * c * plane]);
            }
        }
        let out = Tensor::from_vec(Shape::new(b, total_c, h, w), data)?;
        let nodes: Vec<_> = parts.iter().map(|p| p.node).collect();
        Ok(self.push(
            out,
            || Op::Concat {
                parts: parts.iter().map(|p| (p.node, p.shape())).collect(),
            },
            &nodes,
        ))
    }

    pub fn pixel_shuffle(&self, x: &Var, r: usize) -> Result<Var> {
        let xs = x.shape();
        if r == 0 || !xs.channels().is_multiple_of(r * r) {
            return Err(Error::shape(
                "pixel_shuffle",
                format!("{} channels not divisible by {r}^2", xs.channels()),
            ));
        }
        let data = kernels::pixel_shuffle(x.value().data(), xs, r);
        let ys = Shape::new(xs.batch(), xs.channels() / (r * r), xs.height() * r, xs.width() * r);
        let out = Tensor::from_vec(ys, data)?;
        Ok(self.push(out, || Op::PixelShuffle { x: x.node.unwrap(), r, ys }, &[x.node]))
    }

    pub fn sum(&self, x: &Var) -> Var {
        self.reduce_all(x, 1.0)
    }

    pub fn mean(&self, x: &Var) -> Var {
        self.reduce_all(x, 1.0 / x.value().numel().max(1) as f64)
    }

    fn reduce_all(&self, x: &Var, scale: f64) -> Var {
        let xs = x.shape();
        let out = Tensor::scalar(x.value().sum() * scale);
        self.push(out, || Op::SumAll { x: x.node.unwrap(), scale, xs }, &[x.node])
    }

    /// Mean absolute error over all elements.
    pub fn l1_loss(&self, pred: &Var, target: &Var) -> Result<Var> {
        self.loss("l1_loss", pred, target, |d| d.abs(), |d| {
            if d > 0.0 {
                1.0
            } else if d < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
    }

    /// Mean squared error over all elements.
    pub fn l2_loss(&self, pred: &Var, target: &Var) -> Result<Var> {
        self.loss("l2_loss", pred, target, |d| d * d, |d| 2.0 * d)
    }

    fn loss(
        &self,
        op: &'static str,
        pred: &Var,
        target: &Var,
        value: impl Fn(f64) -> f64,
        slope: impl Fn(f64) -> f64,
    ) -> Result<Var> {
        let shape = pred.shape();
        if shape != target.shape() {
            return Err(Error::shape(op, format!("{} vs {}", shape, target.shape())));
        }
        let n = shape.numel().max(1) as f64;
        let diffs: Vec<f64> = pred
            .value()
            .data()
            .iter()
            .zip(target.value().data())
            .map(|(p, t)| p - t)
            .collect();
        let total: f64 = diffs.iter().map(|&d| value(d)).sum();
        Ok(self.push(
            Tensor::scalar(total / n),
            || Op::Loss {
                pred: pred.node,
                target: target.node,
                local: diffs.iter().map(|&d| slope(d) / n).collect(),
            },
            &[pred.node, target.node],
        ))
    }

    /// Accumulates `d loss / d p` into the gradient of every parameter `p`
    /// reachable from `loss`, then releases the graph.
    pub fn backward(&self, loss: &Var, store: &mut ParamStore) -> Result<()> {
        if self.consumed.get() {
            return Err(Error::Graph("graph already consumed by a previous backward".into()));
        }
        if loss.shape() != Shape::SCALAR {
            return Err(Error::Graph(format!("loss must be a scalar, got {}", loss.shape())));
        }
        let root = loss
            .node
            .ok_or_else(|| Error::Graph("loss is not connected to any recorded parameter".into()))?;
        self.consumed.set(true);
        let nodes = std::mem::take(&mut *self.nodes.borrow_mut());
        let mut grads: Vec<Option<Vec<f64>>> = (0..nodes.len()).map(|_| None).collect();
        grads[root] = Some(vec![1.0]);

        for id in (0..=root).rev() {
            let Some(g) = grads[id].take() else { continue };
            match &nodes[id].op {
                Op::Param(p) => {
                    let dst = store.get_mut(*p).grad_mut().data_mut();
                    for (d, v) in dst.iter_mut().zip(&g) {
                        *d += v;
                    }
                }
                Op::Conv {
                    x,
                    w,
                    b,
                    x_val,
                    w_val,
                    out_ch,
                    k,
                } => {
                    if let Some(xn) = x {
                        let gx = kernels::conv2d_backward_input(&g, x_val.shape(), w_val.data(), *out_ch, *k);
                        accumulate(&mut grads, *xn, gx);
                    }
                    if w.is_some() || b.is_some() {
                        let (gw, gb) = kernels::conv2d_backward_params(&g, x_val.data(), x_val.shape(), *out_ch, *k);
                        if let Some(wn) = w {
                            accumulate(&mut grads, *wn, gw);
                        }
                        if let Some(bn) = b {
                            accumulate(&mut grads, *bn, gb);
                        }
                    }
                }
                Op::Add { a, b, sa, sb, negate_b } => {
                    let out = sa.broadcast(sb).expect("shapes validated in forward");
                    if let Some(an) = a {
                        accumulate(&mut grads, *an, kernels::reduce_to(&g, out, *sa));
                    }
                    if let Some(bn) = b {
                        let mut gb = kernels::reduce_to(&g, out, *sb);
                        if *negate_b {
                            gb.iter_mut().for_each(|v| *v = -*v);
                        }
                        accumulate(&mut grads, *bn, gb);
                    }
                }
                Op::Mul { a, b, a_val, b_val } => {
                    let (sa, sb) = (a_val.shape(), b_val.shape());
                    let out = sa.broadcast(&sb).expect("shapes validated in forward");
                    if let Some(an) = a {
                        let prod = kernels::broadcast_zip(&g, out, b_val.data(), sb, out, |x, y| x * y);
                        accumulate(&mut grads, *an, kernels::reduce_to(&prod, out, sa));
                    }
                    if let Some(bn) = b {
                        let prod = kernels::broadcast_zip(&g, out, a_val.data(), sa, out, |x, y| x * y);
                        accumulate(&mut grads, *bn, kernels::reduce_to(&prod, out, sb));
                    }
                }
                Op::Relu { x, y } => {
                    let gx = g
                        .iter()
                        .zip(y.data())
                        .map(|(gv, yv)| if *yv > 0.0 { *gv } else { 0.0 })
                        .collect();
                    accumulate(&mut grads, *x, gx);
                }
                Op::Softmax { x, y, axis } => {
                    let mut gx = g;
                    softmax_backward_groups(y, &mut gx, *axis);
                    accumulate(&mut grads, *x, gx);
                }
                Op::SumSpatial { x, scale, xs } => {
                    let plane = xs.plane();
                    let gx = g.iter().flat_map(|gv| std::iter::repeat_n(gv * scale, plane)).collect();
                    accumulate(&mut grads, *x, gx);
                }
                Op::SumChannels { x, xs } => {
                    let [b, c, _, _] = xs.0;
                    let plane = xs.plane();
                    let mut gx = Vec::with_capacity(xs.numel());
                    for ib in 0..b {
                        for _ in 0..c {
                            gx.extend_from_slice(&g[ib * plane..(ib + 1) * plane]);
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::SelectChannel { x, channel, xs } => {
                    let [b, c, _, _] = xs.0;
                    let plane = xs.plane();
                    let mut gx = vec![0.0; xs.numel()];
                    for ib in 0..b {
                        gx[(ib * c + channel) * plane..][..plane].copy_from_slice(&g[ib * plane..(ib + 1) * plane]);
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::Concat { parts } => {
                    let batch = parts[0].1.batch();
                    let per_sample: usize = parts.iter().map(|(_, s)| s.numel() / s.batch()).sum();
                    let mut offset = 0;
                    for (node, s) in parts {
                        let len = s.numel() / s.batch();
                        if let Some(n) = node {
                            let gp = (0..batch)
                                .flat_map(|ib| g[ib * per_sample + offset..][..len].iter().copied())
                                .collect();
                            accumulate(&mut grads, *n, gp);
                        }
                        offset += len;
                    }
                }
                Op::PixelShuffle { x, r, ys } => {
                    accumulate(&mut grads, *x, kernels::pixel_unshuffle(&g, *ys, *r));
                }
                Op::SumAll { x, scale, xs } => {
                    accumulate(&mut grads, *x, vec![g[0] * scale; xs.numel()]);
                }
                Op::Loss { pred, target, local } => {
                    if let Some(p) = pred {
                        accumulate(&mut grads, *p, local.iter().map(|v| v * g[0]).collect());
                    }
                    if let Some(t) = target {
                        accumulate(&mut grads, *t, local.iter().map(|v| -v * g[0]).collect());
                    }
                }
            }
        }
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], node: NodeId, g: Vec<f64>) {
    match &mut grads[node] {
        Some(existing) => {
            for (e, v) in existing.iter_mut().zip(&g) {
                *e += v;
            }
        }
        slot @ None => *slot = Some(g),
    }
}

fn for_each_softmax_group(data: &mut [f64], xs: Shape, axis: SoftmaxAxis, mut f: impl FnMut(&mut [f64])) {
    match axis {
        SoftmaxAxis::Spatial => data.chunks_mut(xs.plane()).for_each(f),
        SoftmaxAxis::Channel => {
            let [b, c, _, _] = xs.0;
            let plane = xs.plane();
            let mut group = vec![0.0; c];
            for ib in 0..b {
                let sample = &mut data[ib * c * plane..(ib + 1) * c * plane];
                for pos in 0..plane {
                    for (ic, g) in group.iter_mut().enumerate() {
                        *g = sample[ic * plane + pos];
                    }
                    f(&mut group);
                    for (ic, g) in group.iter().enumerate() {
                        sample[ic * plane + pos] = *g;
                    }
                }
            }
        }
    }
}

fn softmax_backward_groups(y: &Tensor, grad: &mut [f64], axis: SoftmaxAxis) {
    let xs = y.shape();
    match axis {
        SoftmaxAxis::Spatial => {
            let plane = xs.plane();
            for (yc, gc) in y.data().chunks(plane).zip(grad.chunks_mut(plane)) {
                kernels::softmax_backward_in_place(yc, gc);
            }
        }
        SoftmaxAxis::Channel => {
            let [b, c, _, _] = xs.0;
            let plane = xs.plane();
            let (mut yg, mut gg) = (vec![0.0; c], vec![0.0; c]);
            for ib in 0..b {
                let base = ib * c * plane;
                for pos in 0..plane {
                    for ic in 0..c {
                        yg[ic] = y.data()[base + ic * plane + pos];
                        gg[ic] = grad[base + ic * plane + pos];
                    }
                    kernels::softmax_backward_in_place(&yg, &mut gg);
                    for ic in 0..c {
                        grad[base + ic * plane + pos] = gg[ic];
                    }
                }
            }
        }
    }
}
