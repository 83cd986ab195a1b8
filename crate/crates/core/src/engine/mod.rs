//! Reverse-mode differentiation over a closed set of tensor operations,
//! including differentiable backward passes for second-order gradients.

mod functional;
pub mod gradcheck;
mod graph;
pub(crate) mod kernels;
mod tensor;

pub use functional::LEAKY_SLOPE;
pub use graph::{Graph, Var};
pub use tensor::Tensor;

use crate::error::Result;
use crate::scalar::Scalar;

/// Gradients of the Euclidean norm of `∇_x output` with respect to `weights`.
///
/// `output` must be a scalar recorded on `graph` as a function of `x` and the
/// weights. Returns `(‖∇_x output‖₂, gradients)`.
pub fn grad_of_grad_norm<T: Scalar>(
    graph: &mut Graph<T>,
    output: Var,
    x: Var,
    weights: &[Var],
) -> Result<(T, Vec<Tensor<T>>)> {
    let gx = graph.grad(output, &[x], true)?[0];
    let norm = graph.l2_norm(gx)?;
    let grads = graph.grad(norm, weights, false)?;
    Ok((
        graph.item(norm),
        grads.into_iter().map(|g| graph.value(g).clone()).collect(),
    ))
}
