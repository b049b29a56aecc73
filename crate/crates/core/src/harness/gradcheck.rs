use rand::Rng;

use crate::error::Result;
use crate::model::{Model, ModelConfig};
use crate::rng::{self, Stream};
use crate::tensor::{finite_diff_check, Shape, Tensor};

/// Central-difference check of every parameter of a freshly built model.
///
/// The attention scales start at zero, which would leave the attention
/// branches without gradient signal through the rest of the block, so each
/// one is first set to a value in `[0.25, 0.75)`. The loss is the mean squared
/// error against a random target for a random `[1, C, side, side]` input.
/// Returns the largest relative error over all parameter elements.
pub fn model_gradcheck(config: &ModelConfig, seed: u64, side: usize, step: f64) -> Result<f64> {
    let mut model = Model::build(config, seed)?;
    let mut rng = rng::keyed(seed, Stream::Eval, u64::MAX);
    let scales: Vec<_> = model
        .params
        .iter()
        .filter(|(_, p)| [".alpha", ".beta", ".gamma"].iter().any(|s| p.name().ends_with(s)))
        .map(|(id, _)| id)
        .collect();
    for id in scales {
        model.params.get_mut(id).value_mut().data_mut()[0] = rng.random_range(0.25..0.75);
    }
    let input_shape = Shape::new(1, config.in_channels, side, side);
    let x = Tensor::from_fn(input_shape, |_| rng.random_range(0.0..1.0));
    let target = Tensor::from_fn(model.output_shape(input_shape), |_| rng.random_range(0.0..1.0));

    let mut store = model.params.clone();
    let ids: Vec<_> = store.iter().map(|(id, _)| id).collect();
    let mut worst = 0.0_f64;
    for id in ids {
        let err = finite_diff_check(&mut store, id, step, |g, s| {
            let y = model.forward_with(g, s, &g.constant(x.clone()))?;
            g.l2_loss(&y, &g.constant(target.clone()))
        })?;
        worst = worst.max(err);
    }
    Ok(worst)
}
