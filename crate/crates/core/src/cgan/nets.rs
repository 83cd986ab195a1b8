use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::engine::{Graph, Tensor, Var, LEAKY_SLOPE};
use crate::error::{invalid, shape_err, Result};
use crate::oracle::{CameraParams, N_PARAMS};
use crate::scalar::Scalar;
use crate::seed::Rng;
use crate::signal::BinaryCode;

/// Shape hyper-parameters shared by both networks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub code_len: usize,
    pub z_dim: usize,
    pub blocks: usize,
    pub channels: usize,
    pub kernel: usize,
}

impl Architecture {
    pub fn new(code_len: usize, z_dim: usize) -> Self {
        Self {
            code_len,
            z_dim,
            blocks: 10,
            channels: 2,
            kernel: 7,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks == 0 || self.channels == 0 || self.z_dim == 0 {
            return invalid("architecture needs at least one block, channel and noise dimension");
        }
        if self.kernel % 2 == 0 || self.kernel > self.code_len {
            return invalid(format!(
                "kernel width {} must be odd and at most the code length {}",
                self.kernel, self.code_len
            ));
        }
        Ok(())
    }

    /// Number of input positions seen by one output bit through the conv
    /// stack.
    pub fn receptive_field(&self) -> usize {
        1 + self.blocks * (self.kernel - 1)
    }

    fn conv_channels(&self, block: usize, is_generator: bool) -> (usize, usize) {
        let c = self.channels;
        let last = block + 1 == self.blocks;
        match (is_generator, block, last) {
            (true, _, true) => (c, 1),
            (false, 0, _) => (1, c),
            _ => (c, c),
        }
    }

    /// Tensor shapes of the generator, in declaration order.
    pub fn generator_shapes(&self) -> Vec<Vec<usize>> {
        let mut s = vec![
            vec![self.channels * self.code_len, N_PARAMS + self.z_dim],
            vec![self.channels * self.code_len],
        ];
        for b in 0..self.blocks {
            let (cin, cout) = self.conv_channels(b, true);
            s.push(vec![cout, cin, self.kernel]);
            s.push(vec![cout]);
        }
        s
    }

    /// Tensor shapes of the discriminator, in declaration order.
    pub fn discriminator_shapes(&self) -> Vec<Vec<usize>> {
        let mut s = Vec::new();
        for b in 0..self.blocks {
            let (cin, cout) = self.conv_channels(b, false);
            s.push(vec![cout, cin, self.kernel]);
            s.push(vec![cout]);
        }
        s.push(vec![1 + N_PARAMS, self.channels * self.code_len]);
        s.push(vec![1 + N_PARAMS]);
        s
    }
}

/// Weights drawn so that every conv block starts close to the identity on
/// matching channels, keeping the deep two-channel stack trainable; the
/// fully-connected layers use a fan-in scaled uniform draw.
fn init_tensors<T: Scalar>(shapes: &[Vec<usize>], rng: &mut Rng) -> Vec<Tensor<T>> {
    shapes
        .iter()
        .map(|shape| match shape.len() {
            3 => {
                let (cout, cin, k) = (shape[0], shape[1], shape[2]);
                let fan_in = (cin * k) as f64;
                let std = 0.3 / fan_in.sqrt();
                let mut data = Vec::with_capacity(cout * cin * k);
                for o in 0..cout {
                    for c in 0..cin {
                        for t in 0..k {
                            let n: f64 = rng.sample(StandardNormal);
                            let id = if t == k / 2 && (o == c || cin == 1 || cout == 1) {
                                if cin == 1 && o % 2 == 1 {
                                    -1.0
                                } else if cout == 1 && c % 2 == 1 {
                                    -1.0
                                } else {
                                    1.0
                                }
                            } else {
                                0.0
                            };
                            data.push(T::lit(id + std * n));
                        }
                    }
                }
                Tensor::from_vec(shape, data).expect("shape matches")
            }
            2 => {
                let fan_in = shape[1] as f64;
                let bound = (3.0 / fan_in).sqrt();
                let data = (0..shape[0] * shape[1])
                    .map(|_| T::lit(bound * (2.0 * rng.random::<f64>() - 1.0)))
                    .collect();
                Tensor::from_vec(shape, data).expect("shape matches")
            }
            _ => Tensor::zeros(shape),
        })
        .collect()
}

fn check_shapes<T: Scalar>(tensors: &[Tensor<T>], shapes: &[Vec<usize>], what: &str) -> Result<()> {
    if tensors.len() != shapes.len() {
        return shape_err(format!("{what}: {} tensors, expected {}", tensors.len(), shapes.len()));
    }
    for (t, s) in tensors.iter().zip(shapes) {
        if t.shape() != s.as_slice() {
            return shape_err(format!("{what}: tensor {:?}, expected {:?}", t.shape(), s));
        }
    }
    Ok(())
}

/// Generator: fully-connected `(8 + z) → channels·L`, then conv blocks with
/// leaky activations; the last block maps to one channel and ends in a
/// sigmoid.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorNet<T> {
    arch: Architecture,
    tensors: Vec<Tensor<T>>,
}

/// Discriminator: conv blocks with leaky activations (first maps one channel
/// to `channels`), then a fully-connected layer to `[score, Ĉ(8)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscriminatorNet<T> {
    arch: Architecture,
    tensors: Vec<Tensor<T>>,
}

/// Network weights registered as leaves of one graph.
#[derive(Clone, Debug)]
pub struct BoundNet {
    pub vars: Vec<Var>,
}

macro_rules! net_common {
    ($ty:ident, $shapes:ident, $name:literal) => {
        impl<T: Scalar> $ty<T> {
            pub fn init(arch: Architecture, rng: &mut Rng) -> Result<Self> {
                arch.validate()?;
                Ok(Self {
                    arch,
                    tensors: init_tensors(&arch.$shapes(), rng),
                })
            }

            pub fn from_tensors(arch: Architecture, tensors: Vec<Tensor<T>>) -> Result<Self> {
                arch.validate()?;
                check_shapes(&tensors, &arch.$shapes(), $name)?;
                Ok(Self { arch, tensors })
            }

            pub fn zeros(arch: Architecture) -> Result<Self> {
                let tensors = arch.$shapes().iter().map(|s| Tensor::zeros(s)).collect();
                Self::from_tensors(arch, tensors)
            }

            pub fn arch(&self) -> &Architecture {
                &self.arch
            }

            pub fn tensors(&self) -> &[Tensor<T>] {
                &self.tensors
            }

            pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
                &mut self.tensors
            }

            pub fn bind(&self, g: &mut Graph<T>) -> BoundNet {
                BoundNet {
                    vars: self.tensors.iter().map(|t| g.leaf(t.clone())).collect(),
                }
            }
        }
    };
}

net_common!(GeneratorNet, generator_shapes, "generator");
net_common!(DiscriminatorNet, discriminator_shapes, "discriminator");

fn conv_stack<T: Scalar>(g: &mut Graph<T>, mut h: Var, vars: &[Var], sigmoid_last: bool) -> Result<Var> {
    let blocks = vars.len() / 2;
    for b in 0..blocks {
        h = g.conv1d_circular(h, vars[2 * b], vars[2 * b + 1])?;
        h = if sigmoid_last && b + 1 == blocks {
            g.sigmoid(h)
        } else {
            g.leaky_relu(h, T::lit(LEAKY_SLOPE))?
        };
    }
    Ok(h)
}

impl<T: Scalar> GeneratorNet<T> {
    /// `cond[b,8]`, `z[b,z_dim]` → codes `[b,1,L]` in `(0,1)`.
    pub fn forward(&self, g: &mut Graph<T>, bound: &BoundNet, cond: Var, z: Var) -> Result<Var> {
        let a = self.arch;
        let (cs, zs) = (g.shape(cond).to_vec(), g.shape(z).to_vec());
        if cs.len() != 2 || cs[1] != N_PARAMS || zs.len() != 2 || zs[1] != a.z_dim || zs[0] != cs[0] {
            return shape_err(format!("generator inputs {:?} and {:?}", cs, zs));
        }
        let b = cs[0];
        let x = g.concat(cond, z)?;
        let h = g.fully_connected(x, bound.vars[0], bound.vars[1])?;
        let h = g.reshape(h, &[b, a.channels, a.code_len])?;
        conv_stack(g, h, &bound.vars[2..], true)
    }

    /// One code for the given parameters and noise vector.
    pub fn generate(&self, params: &CameraParams, z: &[T]) -> Result<BinaryCode<T>> {
        let mut g = Graph::new();
        let bound = self.bind(&mut g);
        let cond = g.leaf(Tensor::from_vec(
            &[1, N_PARAMS],
            params.values().iter().map(|&v| T::lit(v)).collect(),
        )?);
        let z = g.leaf(Tensor::from_vec(&[1, z.len()], z.to_vec())?);
        let y = self.forward(&mut g, &bound, cond, z)?;
        BinaryCode::new(g.value(y).data().to_vec())
    }

    /// `n` codes for one parameter set, noise drawn from `rng`. Returns the
    /// row-major `[n, L]` values.
    pub fn sample(&self, params: &CameraParams, n: usize, rng: &mut Rng) -> Result<Vec<T>> {
        let mut g = Graph::new();
        let bound = self.bind(&mut g);
        let cond = condition_rows(&mut g, params, n)?;
        let z = g.leaf(noise(n, self.arch.z_dim, rng));
        let y = self.forward(&mut g, &bound, cond, z)?;
        Ok(g.value(y).data().to_vec())
    }
}

impl<T: Scalar> DiscriminatorNet<T> {
    /// Codes `[b,1,L]` → `[b, 1 + 8]`: raw score column, then `Ĉ`.
    pub fn forward(&self, g: &mut Graph<T>, bound: &BoundNet, x: Var) -> Result<Var> {
        let a = self.arch;
        let xs = g.shape(x).to_vec();
        if xs.len() != 3 || xs[1] != 1 || xs[2] != a.code_len {
            return shape_err(format!("discriminator input {:?}, expected [b, 1, {}]", xs, a.code_len));
        }
        let n = bound.vars.len();
        let h = conv_stack(g, x, &bound.vars[..n - 2], false)?;
        let h = g.reshape(h, &[xs[0], a.channels * a.code_len])?;
        g.fully_connected(h, bound.vars[n - 2], bound.vars[n - 1])
    }

    /// `(validity, Ĉ)` for one code. The raw first output is the negated
    /// validity score.
    pub fn discriminate(&self, code: &BinaryCode<T>) -> Result<(T, [T; N_PARAMS])> {
        let mut g = Graph::new();
        let bound = self.bind(&mut g);
        let x = g.leaf(Tensor::from_vec(&[1, 1, code.len()], code.bits().to_vec())?);
        let y = self.forward(&mut g, &bound, x)?;
        let out = g.value(y).data();
        let mut c_hat = [T::zero(); N_PARAMS];
        c_hat.copy_from_slice(&out[1..]);
        Ok((-out[0], c_hat))
    }
}

/// `[n, 8]` leaf repeating one parameter set.
pub fn condition_rows<T: Scalar>(g: &mut Graph<T>, params: &CameraParams, n: usize) -> Result<Var> {
    let row: Vec<T> = params.values().iter().map(|&v| T::lit(v)).collect();
    let data = (0..n).flat_map(|_| row.iter().copied()).collect();
    Ok(g.leaf(Tensor::from_vec(&[n, N_PARAMS], data)?))
}

/// `[n, dim]` standard normal draws.
pub fn noise<T: Scalar>(n: usize, dim: usize, rng: &mut Rng) -> Tensor<T> {
    let data = (0..n * dim)
        .map(|_| T::lit(StandardNormal.sample(rng)))
        .collect();
    Tensor::from_vec(&[n, dim], data).expect("shape matches")
}
