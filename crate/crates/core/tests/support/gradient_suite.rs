//! Randomized finite-difference cases for every engine operation, shared by
//! the gradient tests and the acceptance run.

use std::sync::Arc;

use lidar_core::cgan::{gradient_penalty, Architecture, DiscriminatorNet};
use lidar_core::engine::gradcheck::max_relative_error;
use lidar_core::engine::{Graph, Tensor, Var};
use lidar_core::seed;
use lidar_core::Result;
use rand::Rng;

pub const CASES: u64 = 50;
pub const FIRST_ORDER_TOL: f64 = 1e-4;
pub const SECOND_ORDER_TOL: f64 = 1e-3;
const H: f64 = 1e-6;
const FLOOR: f64 = 1e-6;

/// Uniform in ±scale, kept away from 0 so kinks are not straddled.
fn rand_tensor(rng: &mut seed::Rng, shape: &[usize], scale: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let v: f64 = rng.random_range(0.05..1.0) * scale;
            if rng.random::<bool>() {
                v
            } else {
                -v
            }
        })
        .collect();
    Tensor::from_vec(shape, data).unwrap()
}

fn positive_tensor(rng: &mut seed::Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(0.3..2.0)).collect()).unwrap()
}

/// `Σ op(x) ⊙ r` for a fixed random `r`, so every output element matters.
fn weighted(g: &mut Graph<f64>, y: Var, seed_: u64) -> Result<Var> {
    let shape = g.shape(y).to_vec();
    let r = rand_tensor(&mut seed::rng(seed_), &shape, 1.0);
    let r = g.leaf(r);
    let p = g.mul(y, r)?;
    g.sum(p)
}

type Build = fn(&mut Graph<f64>, &[Var], u64) -> Result<Var>;

struct OpCase {
    name: &'static str,
    inputs: fn(&mut seed::Rng) -> Vec<Tensor<f64>>,
    build: Build,
}

fn shape2(rng: &mut seed::Rng) -> [usize; 2] {
    [rng.random_range(1..4), rng.random_range(2..7)]
}

fn two_same(rng: &mut seed::Rng) -> Vec<Tensor<f64>> {
    let s = shape2(rng);
    vec![rand_tensor(rng, &s, 1.0), rand_tensor(rng, &s, 1.0)]
}

fn one(rng: &mut seed::Rng) -> Vec<Tensor<f64>> {
    let s = shape2(rng);
    vec![rand_tensor(rng, &s, 1.0)]
}

fn one_positive(rng: &mut seed::Rng) -> Vec<Tensor<f64>> {
    let s = shape2(rng);
    vec![positive_tensor(rng, &s)]
}

fn conv_inputs(rng: &mut seed::Rng) -> Vec<Tensor<f64>> {
    let (b, cin, cout, len) = (
        rng.random_range(1..3),
        rng.random_range(1..3),
        rng.random_range(1..3),
        rng.random_range(7..12),
    );
    let k = [1, 3, 5, 7][rng.random_range(0..4)];
    vec![
        rand_tensor(rng, &[b, cin, len], 1.0),
        rand_tensor(rng, &[cout, cin, k], 1.0),
        rand_tensor(rng, &[b, cout, len], 1.0),
    ]
}

fn lin_inputs(rng: &mut seed::Rng) -> Vec<Tensor<f64>> {
    let (b, n, m) = (rng.random_range(1..4), rng.random_range(1..6), rng.random_range(1..6));
    vec![
        rand_tensor(rng, &[b, n], 1.0),
        rand_tensor(rng, &[m, n], 1.0),
        rand_tensor(rng, &[m], 1.0),
    ]
}

fn cases() -> Vec<OpCase> {
    vec![
        OpCase { name: "add", inputs: two_same, build: |g, v, s| { let y = g.add(v[0], v[1])?; weighted(g, y, s) } },
        OpCase { name: "sub", inputs: two_same, build: |g, v, s| { let y = g.sub(v[0], v[1])?; weighted(g, y, s) } },
        OpCase { name: "mul", inputs: two_same, build: |g, v, s| { let y = g.mul(v[0], v[1])?; weighted(g, y, s) } },
        OpCase { name: "neg", inputs: one, build: |g, v, s| { let y = g.neg(v[0]); weighted(g, y, s) } },
        OpCase { name: "scale", inputs: one, build: |g, v, s| { let y = g.scale(v[0], -1.7); weighted(g, y, s) } },
        OpCase { name: "add_scalar", inputs: one, build: |g, v, s| { let y = g.add_scalar(v[0], 0.3); let y = g.mul(y, y)?; weighted(g, y, s) } },
        OpCase { name: "exp", inputs: one, build: |g, v, s| { let y = g.exp(v[0]); weighted(g, y, s) } },
        OpCase { name: "log", inputs: one_positive, build: |g, v, s| { let y = g.log(v[0]); weighted(g, y, s) } },
        OpCase { name: "recip", inputs: one_positive, build: |g, v, s| { let y = g.recip(v[0]); weighted(g, y, s) } },
        OpCase { name: "sqrt", inputs: one_positive, build: |g, v, s| { let y = g.sqrt(v[0]); weighted(g, y, s) } },
        OpCase { name: "sigmoid", inputs: one, build: |g, v, s| { let y = g.sigmoid(v[0]); weighted(g, y, s) } },
        OpCase { name: "softmax", inputs: one, build: |g, v, s| { let y = g.scale(v[0], 4.0); let y = g.softmax(y)?; weighted(g, y, s) } },
        OpCase { name: "leaky_relu", inputs: one, build: |g, v, s| { let y = g.leaky_relu(v[0], 0.2)?; weighted(g, y, s) } },
        OpCase { name: "abs", inputs: one, build: |g, v, s| { let y = g.abs(v[0])?; weighted(g, y, s) } },
        OpCase { name: "minimum", inputs: two_same, build: |g, v, s| { let y = g.minimum(v[0], v[1])?; weighted(g, y, s) } },
        OpCase { name: "sum_to", inputs: one, build: |g, v, s| { let r = g.shape(v[0])[0]; let y = g.sum_to(v[0], &[r, 1])?; weighted(g, y, s) } },
        OpCase { name: "expand_to", inputs: one, build: |g, v, s| { let sh = g.shape(v[0]).to_vec(); let y = g.reshape(v[0], &[sh[0], 1, sh[1]])?; let y = g.expand_to(y, &[sh[0], 3, sh[1]])?; weighted(g, y, s) } },
        OpCase { name: "reshape", inputs: one, build: |g, v, s| { let n = g.value(v[0]).len(); let y = g.reshape(v[0], &[n])?; weighted(g, y, s) } },
        OpCase { name: "mean_axis", inputs: one, build: |g, v, s| { let y = g.mean_axis(v[0], 0)?; weighted(g, y, s) } },
        OpCase { name: "variance_axis", inputs: one, build: |g, v, s| { let y = g.variance_axis(v[0], 0)?; weighted(g, y, s) } },
        OpCase { name: "squared_diff", inputs: two_same, build: |g, v, s| { let y = g.squared_diff(v[0], v[1])?; weighted(g, y, s) } },
        OpCase { name: "l1_norm", inputs: one, build: |g, v, _| g.l1_norm(v[0]) },
        OpCase { name: "l2_norm", inputs: one, build: |g, v, _| g.l2_norm(v[0]) },
        OpCase { name: "l2_norm_rows", inputs: one, build: |g, v, s| { let y = g.l2_norm_rows(v[0])?; weighted(g, y, s) } },
        OpCase { name: "mean", inputs: one, build: |g, v, _| { let y = g.mul(v[0], v[0])?; g.mean(y) } },
        OpCase { name: "concat", inputs: |rng| { let b = rng.random_range(1..4); vec![rand_tensor(rng, &[b, 3], 1.0), rand_tensor(rng, &[b, 5], 1.0)] }, build: |g, v, s| { let y = g.concat(v[0], v[1])?; weighted(g, y, s) } },
        OpCase { name: "slice_last", inputs: one, build: |g, v, s| { let n = g.shape(v[0])[1]; let y = g.slice_last(v[0], 1, n - 1)?; weighted(g, y, s) } },
        OpCase { name: "conv1d", inputs: conv_inputs, build: |g, v, s| { let y = g.conv1d(v[0], v[1])?; weighted(g, y, s) } },
        OpCase { name: "conv1d_transpose", inputs: conv_inputs, build: |g, v, s| { let y = g.conv1d_transpose(v[2], v[1])?; weighted(g, y, s) } },
        OpCase { name: "conv1d_kernel_grad", inputs: conv_inputs, build: |g, v, s| { let k = g.shape(v[1])[2]; let y = g.conv1d_kernel_grad(v[0], v[2], k)?; weighted(g, y, s) } },
        OpCase { name: "conv1d_circular", inputs: |rng| { let mut v = conv_inputs(rng); let c = v[1].shape()[0]; v[2] = rand_tensor(rng, &[c], 1.0); v }, build: |g, v, s| { let y = g.conv1d_circular(v[0], v[1], v[2])?; weighted(g, y, s) } },
        OpCase { name: "matmul_t", inputs: lin_inputs, build: |g, v, s| { let y = g.matmul_t(v[0], v[1])?; weighted(g, y, s) } },
        OpCase { name: "fully_connected", inputs: lin_inputs, build: |g, v, s| { let y = g.fully_connected(v[0], v[1], v[2])?; weighted(g, y, s) } },
        OpCase {
            name: "correlate_rows",
            inputs: one,
            build: |g, v, s| {
                let n = g.shape(v[0])[1];
                let a: Arc<[f64]> = rand_tensor(&mut seed::rng(s ^ 1), &[n], 1.0).into_data().into();
                let y = g.correlate_rows(v[0], a)?;
                weighted(g, y, s)
            },
        },
        OpCase {
            name: "soft_argmax",
            inputs: one,
            build: |g, v, _| {
                let sh = g.shape(v[0]).to_vec();
                let y = g.scale(v[0], 3.0);
                let w = g.softmax(y)?;
                let k = g.leaf(Tensor::from_vec(&[1, sh[1]], (1..=sh[1]).map(|i| i as f64).collect()).unwrap());
                let k = g.expand_to(k, &sh)?;
                let t = g.mul(w, k)?;
                g.sum(t)
            },
        },
    ]
}

/// Worst first-order relative error of each operation over `CASES` draws.
pub fn first_order() -> Vec<(&'static str, f64)> {
    let mut worst = Vec::new();
    for case in cases() {
        let mut max = 0.0f64;
        for i in 0..CASES {
            let mut rng = seed::rng_at(0xF1, &[i, case.name.len() as u64, case.name.as_bytes()[0] as u64]);
            let inputs = (case.inputs)(&mut rng);
            let build = case.build;
            let err = max_relative_error(|g, v| build(g, v, i), &inputs, H, FLOOR).unwrap();
            max = max.max(err);
        }
        worst.push((case.name, max));
    }
    worst
}

/// `Σ r ⊙ ∂/∂x (Σ op(x) ⊙ r')` as a function of every input: exercises the
/// derivative of every recorded backward pass.
pub fn second_order() -> Vec<(&'static str, f64)> {
    let smooth = [
        "add", "sub", "mul", "scale", "add_scalar", "exp", "log", "recip", "sqrt", "sigmoid", "softmax",
        "expand_to", "reshape", "mean_axis", "variance_axis", "squared_diff", "l2_norm", "l2_norm_rows", "concat",
        "slice_last", "conv1d", "conv1d_transpose", "conv1d_kernel_grad", "conv1d_circular", "matmul_t",
        "fully_connected", "correlate_rows", "soft_argmax", "leaky_relu", "abs",
    ];
    let mut worst = Vec::new();
    for case in cases().into_iter().filter(|c| smooth.contains(&c.name)) {
        let mut max = 0.0f64;
        for i in 0..CASES {
            let mut rng = seed::rng_at(0x52, &[i, case.name.len() as u64, case.name.as_bytes()[1] as u64]);
            let inputs = (case.inputs)(&mut rng);
            let build = case.build;
            let err = max_relative_error(
                |g, v| {
                    let y = build(g, v, i)?;
                    let gs = g.grad(y, v, true)?;
                    let mut acc = None;
                    for (j, gv) in gs.into_iter().enumerate() {
                        let sq = g.mul(gv, gv)?;
                        let t = weighted(g, sq, 1000 + j as u64)?;
                        acc = Some(match acc {
                            None => t,
                            Some(a) => g.add(a, t)?,
                        });
                    }
                    Ok(acc.expect("at least one input"))
                },
                &inputs,
                1e-5,
                FLOOR,
            )
            .unwrap();
            max = max.max(err);
        }
        worst.push((case.name, max));
    }
    worst
}

/// Penalty `E[(‖∇_x D(x)[0]‖₂ − 1)²]` differentiated in every critic weight.
pub fn penalty_second_order() -> f64 {
    let mut max = 0.0f64;
    for i in 0..CASES {
        let mut rng = seed::rng_at(0x69, &[i]);
        let len = [8, 12, 16][i as usize % 3];
        let arch = Architecture {
            code_len: len,
            z_dim: 2,
            blocks: 1 + i as usize % 2,
            channels: 2,
            kernel: [3, 5, 7][i as usize % 3],
        };
        let disc = DiscriminatorNet::<f64>::init(arch, &mut rng).unwrap();
        let b = 1 + i as usize % 3;
        let x = Tensor::from_vec(&[b, 1, len], (0..b * len).map(|_| rng.random::<f64>()).collect()).unwrap();
        let err = max_relative_error(
            |g, v| {
                let d = DiscriminatorNet::from_tensors(arch, v.iter().map(|&w| g.value(w).clone()).collect())?;
                let bound = lidar_core::cgan::BoundNet { vars: v.to_vec() };
                let x = g.leaf(x.clone());
                gradient_penalty(g, &d, &bound, x)
            },
            disc.tensors(),
            H,
            FLOOR,
        )
        .unwrap();
        max = max.max(err);
    }
    max
}
