use super::{Graph, ParamId, ParamStore, Var};
use crate::error::{Error, Result};

/// `|a - b| / max(|a|, |b|, 1e-6)`.
///
/// The floor keeps gradients that are zero in exact arithmetic from being
/// judged against central-difference round-off, which for O(1) losses and
/// steps near 1e-5 sits around 1e-11.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Compares the reverse-mode gradient of `f` with respect to parameter `id`
/// against central differences of step `step`, returning the largest
/// relative error over the parameter's elements.
///
/// `f` builds a scalar loss on the graph it is given. The store is restored
/// to its original values (and gradients) before returning. Elements whose
/// `±step` stencil moves any ReLU input across zero are skipped, since a
/// difference across a kink is not a derivative estimate.
pub fn finite_diff_check<F>(store: &mut ParamStore, id: ParamId, step: f64, f: F) -> Result<f64>
where
    F: Fn(&Graph, &ParamStore) -> Result<Var>,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be > 0, got {step}")));
    }
    let eval = |store: &ParamStore| -> Result<(f64, Vec<bool>)> {
        let g = Graph::probing();
        let v = f(&g, store)?.value().item()?;
        Ok((v, g.relu_signs().unwrap_or_default()))
    };

    let (base, signs) = eval(store)?;
    if eval(store)?.0.to_bits() != base.to_bits() {
        return Err(Error::InvalidArgument("function is not deterministic".into()));
    }

    let saved_grads: Vec<_> = store.iter().map(|(_, p)| p.grad().clone()).collect();
    store.zero_grad();
    let graph = Graph::new();
    let loss = f(&graph, store)?;
    graph.backward(&loss, store)?;
    let analytic = store.get(id).grad().clone();
    for (p, g) in store.iter_mut().zip(saved_grads) {
        *p.grad_mut() = g;
    }

    let mut worst = 0.0_f64;
    for i in 0..analytic.numel() {
        let original = store.get(id).value().data()[i];
        store.get_mut(id).value_mut().data_mut()[i] = original + step;
        let plus = eval(store);
        store.get_mut(id).value_mut().data_mut()[i] = original - step;
        let minus = eval(store);
        store.get_mut(id).value_mut().data_mut()[i] = original;
        let ((plus, plus_signs), (minus, minus_signs)) = (plus?, minus?);
        if plus_signs != signs || minus_signs != signs {
            continue;
        }
        let numeric = (plus - minus) / (2.0 * step);
        worst = worst.max(relative_error(analytic.data()[i], numeric));
    }
    Ok(worst)
}
