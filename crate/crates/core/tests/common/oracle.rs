//! Scalar double-loop reimplementations of the attention equations.
//!
//! Everything here works element by element on plain `Tensor`s and reads the
//! parameter values directly, sharing no code with the graph ops.

use acubenet::attention::{AcabParams, AdamBlockParams, AhamParams, AsabParams};
use acubenet::model::{Model, Rdag, Rdau, Trunk};
use acubenet::tensor::{Conv2dLayer, ParamId, ParamStore, Shape, Tensor};

pub fn conv(x: &Tensor, store: &ParamStore, layer: &Conv2dLayer) -> Tensor {
    let w = store.value(layer.weight);
    let b = store.value(layer.bias);
    let [nb, cin, h, wd] = x.shape().0;
    let k = layer.kernel;
    let pad = (k / 2) as isize;
    Tensor::from_fn(Shape::new(nb, layer.out_channels, h, wd), |[ib, oc, y, xx]| {
        let mut acc = b.data()[oc];
        for ic in 0..cin {
            for ky in 0..k {
                for kx in 0..k {
                    let iy = y as isize + ky as isize - pad;
                    let ix = xx as isize + kx as isize - pad;
                    if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < wd {
                        acc += w.get([oc, ic, ky, kx]) * x.get([ib, ic, iy as usize, ix as usize]);
                    }
                }
            }
        }
        acc
    })
}

fn relu(t: &Tensor) -> Tensor {
    t.map(|v| if v > 0.0 { v } else { 0.0 })
}

fn softmax(v: &[f64]) -> Vec<f64> {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

fn scalar(store: &ParamStore, id: Option<ParamId>) -> f64 {
    id.map_or(1.0, |id| store.value(id).data()[0])
}

/// Spatial attention weights for each sample, `[b][h*w]`.
pub fn asab_weights(x: &Tensor, store: &ParamStore, p: &AsabParams) -> Vec<Vec<f64>> {
    let a = conv(x, store, &p.squeeze);
    let [nb, _, h, w] = x.shape().0;
    (0..nb)
        .map(|b| {
            let logits: Vec<f64> = (0..h * w).map(|j| a.get([b, 0, j / w, j % w])).collect();
            softmax(&logits)
        })
        .collect()
}

pub fn asab(x: &Tensor, store: &ParamStore, p: &AsabParams) -> Tensor {
    let [nb, c, h, w] = x.shape().0;
    let weights = asab_weights(x, store, p);
    let mut context = Tensor::zeros(Shape::new(nb, c, 1, 1));
    for b in 0..nb {
        for ch in 0..c {
            let mut acc = 0.0;
            for j in 0..h * w {
                acc += weights[b][j] * x.get([b, ch, j / w, j % w]);
            }
            context.set([b, ch, 0, 0], acc);
        }
    }
    let hidden = relu(&conv(&context, store, &p.bottleneck_down));
    let alpha = scalar(store, p.alpha);
    conv(&hidden, store, &p.bottleneck_up).map(|v| alpha * v)
}

/// Channel attention weights for each sample, `[b][c]`.
pub fn acab_weights(x: &Tensor) -> Vec<Vec<f64>> {
    let [nb, c, h, w] = x.shape().0;
    (0..nb)
        .map(|b| {
            let means: Vec<f64> = (0..c)
                .map(|ch| {
                    let mut s = 0.0;
                    for y in 0..h {
                        for xx in 0..w {
                            s += x.get([b, ch, y, xx]);
                        }
                    }
                    s / (h * w) as f64
                })
                .collect();
            softmax(&means)
        })
        .collect()
}

pub fn acab(x: &Tensor, store: &ParamStore, p: &AcabParams) -> Tensor {
    let [nb, c, h, w] = x.shape().0;
    let weights = acab_weights(x);
    let mut context = Tensor::zeros(Shape::new(nb, 1, h, w));
    for b in 0..nb {
        for y in 0..h {
            for xx in 0..w {
                let mut acc = 0.0;
                for ch in 0..c {
                    acc += weights[b][ch] * x.get([b, ch, y, xx]);
                }
                context.set([b, 0, y, xx], acc);
            }
        }
    }
    let hidden = relu(&conv(&context, store, &p.transform_1));
    let beta = scalar(store, p.beta);
    conv(&hidden, store, &p.transform_2).map(|v| beta * v)
}

pub fn adam(x: &Tensor, store: &ParamStore, p: &AdamBlockParams) -> Tensor {
    let s = p.asab.as_ref().map(|a| asab(x, store, a));
    let c = p.acab.as_ref().map(|a| acab(x, store, a));
    Tensor::from_fn(x.shape(), |[b, ch, y, xx]| {
        x.get([b, ch, y, xx])
            + s.as_ref().map_or(0.0, |s| s.get([b, ch, 0, 0]))
            + c.as_ref().map_or(0.0, |c| c.get([b, 0, y, xx]))
    })
}

/// Hierarchical attention weights for each sample, `[b][g]`.
pub fn aham_weights(feats: &[Tensor], store: &ParamStore, p: &AhamParams) -> Vec<Vec<f64>> {
    let [nb, c, h, w] = feats[0].shape().0;
    (0..nb)
        .map(|b| {
            let logits: Vec<f64> = feats
                .iter()
                .zip(&p.squeezers)
                .map(|(f, sq)| {
                    let wt = store.value(sq.weight);
                    let mut acc = store.value(sq.bias).data()[0];
                    for ch in 0..c {
                        let mut mean = 0.0;
                        for y in 0..h {
                            for xx in 0..w {
                                mean += f.get([b, ch, y, xx]);
                            }
                        }
                        acc += wt.get([0, ch, 0, 0]) * mean / (h * w) as f64;
                    }
                    acc
                })
                .collect();
            softmax(&logits)
        })
        .collect()
}

pub fn aham(feats: &[Tensor], store: &ParamStore, p: &AhamParams) -> Tensor {
    let weights = aham_weights(feats, store, p);
    let gamma = store.value(p.gamma).data()[0];
    let last = feats.last().unwrap();
    Tensor::from_fn(last.shape(), |idx| {
        let mut d = 0.0;
        for (g, f) in feats.iter().enumerate() {
            d += weights[idx[0]][g] * f.get(idx);
        }
        last.get(idx) + gamma * d
    })
}

fn add(a: &Tensor, b: &Tensor) -> Tensor {
    Tensor::from_fn(a.shape(), |i| a.get(i) + b.get(i))
}

pub fn rdau(x: &Tensor, store: &ParamStore, unit: &Rdau) -> Tensor {
    let inner = conv(&relu(&conv(x, store, &unit.body.conv1)), store, &unit.body.conv2);
    let y = add(x, &inner);
    match &unit.adam {
        Some(p) => adam(&y, store, p),
        None => y,
    }
}

pub fn rdag(x: &Tensor, store: &ParamStore, group: &Rdag) -> Tensor {
    let mut y = x.clone();
    for unit in &group.units {
        y = rdau(&y, store, unit);
    }
    add(x, &conv(&y, store, &group.tail))
}

/// `out[b, c, h*r + i, w*r + j] = in[b, c*r*r + i*r + j, h, w]`.
pub fn pixel_shuffle(x: &Tensor, r: usize) -> Tensor {
    let [nb, c, h, w] = x.shape().0;
    Tensor::from_fn(Shape::new(nb, c / (r * r), h * r, w * r), |[b, oc, y, xx]| {
        x.get([b, oc * r * r + (y % r) * r + xx % r, y / r, xx / r])
    })
}

pub fn model(x: &Tensor, m: &Model) -> Tensor {
    let store = &m.params;
    let f0 = conv(x, store, &m.head);
    let mut feats = Vec::new();
    let mut y = f0.clone();
    match &m.trunk {
        Trunk::Groups(groups) => {
            for group in groups {
                y = rdag(&y, store, group);
                feats.push(y.clone());
            }
        }
        Trunk::Units(units) => {
            for unit in units {
                y = rdau(&y, store, unit);
                feats.push(y.clone());
            }
        }
    }
    let deep = match &m.aham {
        Some(p) => aham(&feats, store, p),
        None => y,
    };
    let mut z = add(&f0, &conv(&deep, store, &m.fuse));
    for (layer, r) in &m.upscale {
        z = pixel_shuffle(&conv(&z, store, layer), *r);
    }
    conv(&z, store, &m.tail)
}
