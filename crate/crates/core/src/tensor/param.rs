use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;

use super::{Shape, Tensor};
use crate::error::{Error, Result};

/// Index of a parameter inside its [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named trainable tensor with its gradient accumulator.
#[derive(Clone, Debug)]
pub struct Parameter {
    name: String,
    value: Arc<Tensor>,
    grad: Tensor,
}

impl Parameter {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self) -> &Tensor {
        &self.value
    }

    pub(crate) fn shared_value(&self) -> Arc<Tensor> {
        Arc::clone(&self.value)
    }

    /// Mutable access to the value; clones if a live graph still holds it.
    pub fn value_mut(&mut self) -> &mut Tensor {
        Arc::make_mut(&mut self.value)
    }

    pub fn grad(&self) -> &Tensor {
        &self.grad
    }

    pub fn grad_mut(&mut self) -> &mut Tensor {
        &mut self.grad
    }

    pub fn numel(&self) -> usize {
        self.grad.numel()
    }
}

/// Ordered collection of uniquely named parameters.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    params: Vec<Parameter>,
    by_name: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::InvalidArgument(format!("duplicate parameter name `{name}`")));
        }
        let id = ParamId(self.params.len());
        self.by_name.insert(name.clone(), id);
        self.params.push(Parameter {
            name,
            grad: Tensor::zeros(value.shape()),
            value: Arc::new(value),
        });
        Ok(id)
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        self.params[id.0].value()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.params.iter().map(Parameter::numel).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }
}

/// Same-padded, stride-1 2-D convolution with bias.
#[derive(Clone, Copy, Debug)]
pub struct Conv2dLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
}

impl Conv2dLayer {
    /// Registers `<prefix>.weight` and `<prefix>.bias`, both drawn from
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` with `fan_in = in * k * k`.
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 {
            return Err(Error::Config(format!("{prefix}: zero channels")));
        }
        if kernel.is_multiple_of(2) {
            return Err(Error::Config(format!("{prefix}: kernel {kernel} must be odd")));
        }
        let fan_in = (in_channels * kernel * kernel) as f64;
        let bound = 1.0 / fan_in.sqrt();
        let wshape = Shape::new(out_channels, in_channels, kernel, kernel);
        let weight = Tensor::from_fn(wshape, |_| rng.random_range(-bound..bound));
        let bias = Tensor::from_fn(Shape::new(out_channels, 1, 1, 1), |_| rng.random_range(-bound..bound));
        Ok(Conv2dLayer {
            weight: store.add(format!("{prefix}.weight"), weight)?,
            bias: store.add(format!("{prefix}.bias"), bias)?,
            in_channels,
            out_channels,
            kernel,
        })
    }

    pub fn param_count(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel * self.kernel + self.out_channels
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn names_are_unique() {
        let mut store = ParamStore::new();
        store.add("a", Tensor::scalar(0.0)).unwrap();
        assert!(store.add("a", Tensor::scalar(1.0)).is_err());
    }

    #[test]
    fn zero_grad_clears_everything() {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::ones(Shape::new(2, 3, 1, 1))).unwrap();
        store.get_mut(id).grad_mut().fill(3.5);
        store.zero_grad();
        assert!(store.get(id).grad().data().iter().all(|&g| g == 0.0));
        assert_eq!(store.get(id).grad().shape(), store.get(id).value().shape());
    }

    #[test]
    fn conv_param_count_formula() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let conv = Conv2dLayer::new(&mut store, "c", 64, 64, 3, &mut rng).unwrap();
        assert_eq!(conv.param_count(), 36_928);
        assert_eq!(store.numel(), 36_928);
        assert!(Conv2dLayer::new(&mut store, "z", 0, 4, 3, &mut rng).is_err());
    }
}
