use super::HasParams;
use crate::error::Result;

/// `|a − n| / max(|a|, |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares backprop gradients against central differences for every scalar parameter.
///
/// `backward` must accumulate the gradient of the same loss that `loss` evaluates.
/// Returns the largest relative error. Parameter values are restored afterwards.
pub fn grad_check<M, L, B>(model: &mut M, mut loss: L, mut backward: B, eps: f64) -> Result<f64>
where
    M: HasParams,
    L: FnMut(&M) -> Result<f64>,
    B: FnMut(&mut M) -> Result<()>,
{
    model.params_mut().zero_grad();
    backward(model)?;
    let analytic: Vec<Vec<f64>> = model.params().iter().map(|p| p.grad.clone()).collect();

    let mut worst = 0.0f64;
    for (pi, grads) in analytic.iter().enumerate() {
        for (i, &a) in grads.iter().enumerate() {
            let orig = model.params().iter().nth(pi).expect("index in range").value[i];
            set(model, pi, i, orig + eps);
            let plus = loss(model)?;
            set(model, pi, i, orig - eps);
            let minus = loss(model)?;
            set(model, pi, i, orig);
            let numeric = (plus - minus) / (2.0 * eps);
            worst = worst.max(relative_error(a, numeric));
        }
    }
    model.params_mut().zero_grad();
    Ok(worst)
}

fn set<M: HasParams>(model: &mut M, param: usize, index: usize, value: f64) {
    model
        .params_mut()
        .iter_mut()
        .nth(param)
        .expect("index in range")
        .value[index] = value;
}
