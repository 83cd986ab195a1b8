//! Finite-difference checks of recorded gradients.

use super::{Graph, Tensor, Var};
use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Relative error `‖a − b‖₂ / max(‖a‖₂, ‖b‖₂, floor)`.
pub fn relative_error<T: Scalar>(a: &[T], b: &[T], floor: f64) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x.as_f64() - y.as_f64()).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x.as_f64().powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x.as_f64().powi(2)).sum::<f64>().sqrt();
    diff / na.max(nb).max(floor)
}

/// Gradients of the scalar built by `f` with respect to each input, by
/// reverse mode and by central differences with step `h`.
///
/// `f` receives a fresh graph and the input leaves, and must return a
/// scalar node. It is called once for the analytic pass and twice per
/// input element for the numeric one.
pub fn gradients<T, F>(f: F, inputs: &[Tensor<T>], h: f64) -> Result<Vec<(Tensor<T>, Tensor<T>)>>
where
    T: Scalar,
    F: Fn(&mut Graph<T>, &[Var]) -> Result<Var>,
{
    let eval = |xs: &[Tensor<T>]| -> Result<T> {
        let mut g = Graph::new();
        let vars: Vec<Var> = xs.iter().map(|x| g.leaf(x.clone())).collect();
        let out = f(&mut g, &vars)?;
        if !g.shape(out).iter().all(|&d| d == 1) {
            return invalid("gradient check needs a scalar output");
        }
        Ok(g.item(out))
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|x| g.leaf(x.clone())).collect();
    let out = f(&mut g, &vars)?;
    let analytic = g.grad(out, &vars, false)?;

    let mut result = Vec::with_capacity(inputs.len());
    let mut xs = inputs.to_vec();
    for (i, x) in inputs.iter().enumerate() {
        let mut num = Vec::with_capacity(x.len());
        for j in 0..x.len() {
            let orig = x.data()[j];
            xs[i].data_mut()[j] = orig + T::lit(h);
            let up = eval(&xs)?;
            xs[i].data_mut()[j] = orig - T::lit(h);
            let down = eval(&xs)?;
            xs[i].data_mut()[j] = orig;
            num.push((up - down) / T::lit(2.0 * h));
        }
        result.push((g.value(analytic[i]).clone(), Tensor::from_vec(x.shape(), num)?));
    }
    Ok(result)
}

/// Largest relative error between reverse-mode and central-difference
/// gradients over all inputs.
pub fn max_relative_error<T, F>(f: F, inputs: &[Tensor<T>], h: f64, floor: f64) -> Result<f64>
where
    T: Scalar,
    F: Fn(&mut Graph<T>, &[Var]) -> Result<Var>,
{
    Ok(gradients(f, inputs, h)?
        .iter()
        .map(|(a, n)| relative_error(a.data(), n.data(), floor))
        .fold(0.0, f64::max))
}
