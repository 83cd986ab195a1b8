use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::losses::{curriculum_alpha, d_loss, g_loss, LossWeights, PenaltyPoint};
use super::nets::{noise, Architecture, DiscriminatorNet, GeneratorNet};
use crate::engine::{Graph, Tensor};
use crate::error::{invalid, Error, Result};
use crate::io::pgm::{to_gray, Raster};
use crate::oracle::{CameraParams, Dataset, N_PARAMS};
use crate::scalar::Scalar;
use crate::seed::{self, stream, Rng};
use crate::signal::{per_bit_moments, BinaryCode, CodeBatch};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lambda_gp: f64,
    pub lambda_parameters: f64,
    pub lambda_mean: f64,
    pub lambda_variance: f64,
    /// Generator iterations before the adversarial terms switch on.
    pub curriculum_threshold: u64,
    /// Iteration count at which the adversarial weight reaches 1.
    pub curriculum_constant: f64,
    /// Critic updates per generator update.
    pub critic_iters: usize,
    /// Real rows drawn from each sampled group.
    pub batch_size: usize,
    /// Parameter groups per update.
    pub groups_per_step: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub z_dim: usize,
    /// Total generator iterations.
    pub iterations: u64,
    pub seed: u64,
    /// Evaluate the gradient penalty at real/fake interpolations instead of
    /// at the real samples.
    pub gp_interpolate: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda_gp: 10.0,
            lambda_parameters: 1.0,
            lambda_mean: 10.0,
            lambda_variance: 10.0,
            curriculum_threshold: 2000,
            curriculum_constant: 10_000.0,
            critic_iters: 5,
            batch_size: 64,
            groups_per_step: 4,
            learning_rate: 1e-4,
            adam_beta1: 0.5,
            adam_beta2: 0.9,
            z_dim: 32,
            iterations: 20_000,
            seed: 7,
            gp_interpolate: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let lambdas = [self.lambda_gp, self.lambda_parameters, self.lambda_mean, self.lambda_variance];
        if lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return invalid("loss weights must be finite and non-negative");
        }
        if !(self.curriculum_constant > 0.0) {
            return invalid("curriculum constant must be positive");
        }
        if self.batch_size < 2 {
            return invalid("batch size must be at least 2");
        }
        if self.groups_per_step == 0 {
            return invalid("at least one group per step");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return invalid("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return invalid("moment decay rates must lie in [0, 1)");
        }
        if self.z_dim == 0 {
            return invalid("noise dimension must be positive");
        }
        Ok(())
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            gp: self.lambda_gp,
            parameters: self.lambda_parameters,
            mean: self.lambda_mean,
            variance: self.lambda_variance,
        }
    }
}

/// Loss values of one generator iteration and the critic updates before it.
#[derive(Clone, Debug, PartialEq)]
pub struct LossRecord {
    pub iteration: u64,
    pub alpha: f64,
    pub d_total: f64,
    pub d_adversarial: f64,
    pub d_penalty: f64,
    pub d_parameters: f64,
    pub g_total: f64,
    pub g_adversarial: f64,
    pub g_parameters: f64,
    pub g_mean: f64,
    pub g_variance: f64,
}

impl LossRecord {
    pub const CSV_HEADER: &'static str =
        "iteration,alpha,d_total,d_adversarial,d_penalty,d_parameters,g_total,g_adversarial,g_parameters,g_mean,g_variance";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.iteration,
            self.alpha,
            self.d_total,
            self.d_adversarial,
            self.d_penalty,
            self.d_parameters,
            self.g_total,
            self.g_adversarial,
            self.g_parameters,
            self.g_mean,
            self.g_variance
        )
    }
}

/// Everything needed to continue training or to use the generator.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub generator: GeneratorNet<T>,
    pub discriminator: DiscriminatorNet<T>,
    pub adam_g: Adam<T>,
    pub adam_d: Adam<T>,
    pub config: TrainConfig,
    /// Generator iterations completed.
    pub iteration: u64,
    pub dataset_digest: [u8; 32],
    pub transmitted: BinaryCode<f64>,
}

/// Hook for per-iteration side effects (logging, snapshots).
pub trait TrainObserver<T> {
    fn iteration(&mut self, _record: &LossRecord, _generator: &GeneratorNet<T>) -> Result<()> {
        Ok(())
    }
}

impl<T> TrainObserver<T> for () {}

impl<T, F: FnMut(&LossRecord)> TrainObserver<T> for F {
    fn iteration(&mut self, record: &LossRecord, _generator: &GeneratorNet<T>) -> Result<()> {
        self(record);
        Ok(())
    }
}

pub struct Trainer<'a, T> {
    dataset: &'a Dataset,
    state: Checkpoint<T>,
    // per-group (mean, variance) over every repetition, the moment targets
    moments: Vec<(Vec<f64>, Vec<f64>)>,
}

struct Batch<T> {
    cond: Tensor<T>,
    real: Vec<T>,
    picked: Vec<usize>,
    groups: usize,
    rows: usize,
}

fn dataset_moments(dataset: &Dataset) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    dataset.groups.iter().map(|g| per_bit_moments(&g.codes)).collect()
}

impl<'a, T: Scalar> Trainer<'a, T> {
    pub fn new(dataset: &'a Dataset, config: TrainConfig, dataset_digest: [u8; 32]) -> Result<Self> {
        config.validate()?;
        check_dataset(dataset)?;
        let arch = Architecture::new(dataset.code_len(), config.z_dim);
        let generator = GeneratorNet::init(arch, &mut seed::rng_at(config.seed, &[stream::INIT_G]))?;
        let discriminator = DiscriminatorNet::init(arch, &mut seed::rng_at(config.seed, &[stream::INIT_D]))?;
        let adam_g = Adam::new(generator.tensors(), config.learning_rate, config.adam_beta1, config.adam_beta2);
        let adam_d = Adam::new(discriminator.tensors(), config.learning_rate, config.adam_beta1, config.adam_beta2);
        Ok(Self {
            dataset,
            moments: dataset_moments(dataset)?,
            state: Checkpoint {
                generator,
                discriminator,
                adam_g,
                adam_d,
                config,
                iteration: 0,
                dataset_digest,
                transmitted: dataset.transmitted.clone(),
            },
        })
    }

    /// Continues from a checkpoint. `iterations` may be raised to train
    /// further; every other setting must match.
    pub fn resume(dataset: &'a Dataset, checkpoint: Checkpoint<T>, iterations: u64, dataset_digest: [u8; 32]) -> Result<Self> {
        check_dataset(dataset)?;
        if checkpoint.generator.arch().code_len != dataset.code_len() {
            return invalid(format!(
                "checkpoint was trained on codes of length {}, dataset has {}",
                checkpoint.generator.arch().code_len,
                dataset.code_len()
            ));
        }
        if checkpoint.dataset_digest != dataset_digest {
            return invalid("checkpoint was trained on a different dataset");
        }
        let mut state = checkpoint;
        state.config.iterations = iterations;
        Ok(Self {
            dataset,
            moments: dataset_moments(dataset)?,
            state,
        })
    }

    pub fn state(&self) -> &Checkpoint<T> {
        &self.state
    }

    pub fn into_checkpoint(self) -> Checkpoint<T> {
        self.state
    }

    pub fn run(&mut self, observer: &mut dyn TrainObserver<T>) -> Result<()> {
        while self.state.iteration < self.state.config.iterations {
            let rec = self.step()?;
            observer.iteration(&rec, &self.state.generator)?;
        }
        Ok(())
    }

    fn sample_batch(&self, rng: &mut Rng) -> Result<Batch<T>> {
        let cfg = &self.state.config;
        let reps = self.dataset.reps;
        let rows = cfg.batch_size.min(reps);
        let len = self.dataset.code_len();
        let mut cond = Vec::with_capacity(cfg.groups_per_step * rows * N_PARAMS);
        let mut real = Vec::with_capacity(cfg.groups_per_step * rows * len);
        let mut picked = Vec::with_capacity(cfg.groups_per_step);
        for _ in 0..cfg.groups_per_step {
            let gi = rng.random_range(0..self.dataset.groups.len());
            picked.push(gi);
            let group = &self.dataset.groups[gi];
            let picks: Vec<usize> = if rows == reps {
                (0..reps).collect()
            } else {
                let mut v = index::sample(rng, reps, rows).into_vec();
                v.sort_unstable();
                v
            };
            for r in picks {
                cond.extend(group.params.values().iter().map(|&v| T::lit(v)));
                real.extend(group.codes.row(r).iter().map(|&v| T::lit(v)));
            }
        }
        Ok(Batch {
            cond: Tensor::from_vec(&[cfg.groups_per_step * rows, N_PARAMS], cond)?,
            real,
            picked,
            groups: cfg.groups_per_step,
            rows,
        })
    }

    fn target_moments(&self, picked: &[usize]) -> Result<(Tensor<T>, Tensor<T>)> {
        let len = self.dataset.code_len();
        let (mut mean, mut var) = (Vec::with_capacity(picked.len() * len), Vec::with_capacity(picked.len() * len));
        for &gi in picked {
            let (m, v) = &self.moments[gi];
            mean.extend(m.iter().map(|&x| T::lit(x)));
            var.extend(v.iter().map(|&x| T::lit(x)));
        }
        Ok((
            Tensor::from_vec(&[picked.len(), 1, len], mean)?,
            Tensor::from_vec(&[picked.len(), 1, len], var)?,
        ))
    }

    /// One generator iteration preceded by `critic_iters` critic updates.
    pub fn step(&mut self) -> Result<LossRecord> {
        let it = self.state.iteration;
        let cfg = self.state.config.clone();
        let weights = cfg.weights();
        let len = self.dataset.code_len();
        let point = if cfg.gp_interpolate {
            PenaltyPoint::Interpolated
        } else {
            PenaltyPoint::Real
        };

        let mut d_vals = (0.0, 0.0, 0.0, 0.0);
        for k in 0..cfg.critic_iters {
            let mut rng = seed::rng_at(cfg.seed, &[stream::CRITIC, it, k as u64]);
            let batch = self.sample_batch(&mut rng)?;
            let n = batch.groups * batch.rows;
            let z = noise::<T>(n, cfg.z_dim, &mut rng);
            let eps: Vec<T> = (0..n).map(|_| T::lit(rng.random::<f64>())).collect();
            let mut g = Graph::new();
            let gb = self.state.generator.bind(&mut g);
            let db = self.state.discriminator.bind(&mut g);
            let real = g.leaf(Tensor::from_vec(&[n, 1, len], batch.real)?);
            let cond = g.leaf(batch.cond);
            let z = g.leaf(z);
            let loss = d_loss(
                &mut g,
                &self.state.generator,
                &gb,
                &self.state.discriminator,
                &db,
                real,
                cond,
                z,
                &weights,
                point,
                &eps,
            )?;
            let total = g.item(loss.total).as_f64();
            if !total.is_finite() {
                return Err(Error::NonFinite(format!("critic loss at iteration {it}")));
            }
            let grads = g.grad(loss.total, &db.vars, false)?;
            let grads: Vec<Tensor<T>> = grads.iter().map(|&v| g.value(v).clone()).collect();
            self.state.adam_d.update(self.state.discriminator.tensors_mut(), &grads)?;
            d_vals = (
                total,
                g.item(loss.adversarial).as_f64(),
                g.item(loss.penalty).as_f64(),
                g.item(loss.parameters).as_f64(),
            );
        }

        let alpha = curriculum_alpha(it, cfg.curriculum_threshold, cfg.curriculum_constant);
        let mut rng = seed::rng_at(cfg.seed, &[stream::GENERATOR, it]);
        let batch = self.sample_batch(&mut rng)?;
        let n = batch.groups * batch.rows;
        let (rm, rv) = self.target_moments(&batch.picked)?;
        let z = noise::<T>(n, cfg.z_dim, &mut rng);
        let mut g = Graph::new();
        let gb = self.state.generator.bind(&mut g);
        let db = self.state.discriminator.bind(&mut g);
        let cond = g.leaf(batch.cond);
        let z = g.leaf(z);
        let loss = g_loss(
            &mut g,
            &self.state.generator,
            &gb,
            &self.state.discriminator,
            &db,
            cond,
            z,
            batch.groups,
            &rm,
            &rv,
            alpha,
            &weights,
        )?;
        let total = g.item(loss.total).as_f64();
        if !total.is_finite() {
            return Err(Error::NonFinite(format!("generator loss at iteration {it}")));
        }
        let grads = g.grad(loss.total, &gb.vars, false)?;
        let grads: Vec<Tensor<T>> = grads.iter().map(|&v| g.value(v).clone()).collect();
        self.state.adam_g.update(self.state.generator.tensors_mut(), &grads)?;
        self.state.iteration += 1;

        Ok(LossRecord {
            iteration: it,
            alpha,
            d_total: d_vals.0,
            d_adversarial: d_vals.1,
            d_penalty: d_vals.2,
            d_parameters: d_vals.3,
            g_total: total,
            g_adversarial: loss.adversarial.map_or(0.0, |v| g.item(v).as_f64()),
            g_parameters: loss.parameters.map_or(0.0, |v| g.item(v).as_f64()),
            g_mean: g.item(loss.mean).as_f64(),
            g_variance: g.item(loss.variance).as_f64(),
        })
    }
}

fn check_dataset(dataset: &Dataset) -> Result<()> {
    if dataset.groups.is_empty() {
        return invalid("dataset has no groups");
    }
    if dataset.reps < 2 {
        return invalid("every group needs at least 2 codes for variance statistics");
    }
    if dataset.groups.iter().any(|g| g.codes.n_rows() != dataset.reps) {
        return invalid("groups differ in size");
    }
    Ok(())
}

/// Trains from scratch for `config.iterations` generator iterations.
pub fn train<T: Scalar>(
    dataset: &Dataset,
    config: TrainConfig,
    dataset_digest: [u8; 32],
    observer: &mut dyn TrainObserver<T>,
) -> Result<Checkpoint<T>> {
    let mut t = Trainer::new(dataset, config, dataset_digest)?;
    t.run(observer)?;
    Ok(t.into_checkpoint())
}

/// Mean over bits of the per-bit batch variance.
pub fn instability<T: Scalar>(batch: &CodeBatch<T>) -> Result<T> {
    let (_, var) = per_bit_moments(batch)?;
    Ok(var.iter().copied().sum::<T>() / T::lit(var.len() as f64))
}

/// Batch indices ordered from most to least stable; ties keep index order.
pub fn rank_by_stability<T: Scalar>(batches: &[CodeBatch<T>]) -> Result<Vec<usize>> {
    let scores = batches.iter().map(instability).collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..batches.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(std::cmp::Ordering::Equal));
    Ok(order)
}

/// Dataset groups ordered from most to least stable.
pub fn stability_rank(dataset: &Dataset) -> Result<Vec<usize>> {
    let batches: Vec<CodeBatch<f64>> = dataset.groups.iter().map(|g| g.codes.clone()).collect();
    rank_by_stability(&batches)
}

/// Generated codes (left) next to real ones (right) for the five most and
/// five least stable groups, `rows` codes each.
pub fn comparison_raster<T: Scalar>(
    generator: &GeneratorNet<T>,
    dataset: &Dataset,
    rows: usize,
    seed: u64,
) -> Result<Raster> {
    let order = stability_rank(dataset)?;
    let k = order.len().min(5);
    let mut picks: Vec<usize> = order[..k].to_vec();
    for &g in order[order.len() - k..].iter() {
        if !picks.contains(&g) {
            picks.push(g);
        }
    }
    let len = dataset.code_len();
    let gap = 4;
    let width = 2 * len + gap;
    let mut pixels = Vec::new();
    let mut height = 0;
    for (i, &gi) in picks.iter().enumerate() {
        let group = &dataset.groups[gi];
        let mut rng = seed::rng_at(seed, &[i as u64]);
        let fake = generator.sample(&group.params, rows, &mut rng)?;
        for r in 0..rows {
            for &v in &fake[r * len..(r + 1) * len] {
                pixels.push(to_gray(v.as_f64()));
            }
            pixels.extend(std::iter::repeat_n(128u8, gap));
            let real = group.codes.row(r % group.codes.n_rows());
            pixels.extend(real.iter().map(|&v| to_gray(v)));
            height += 1;
        }
    }
    Raster::new(width, height, pixels)
}

/// Generated per-bit moments for one parameter set from `n` draws.
pub fn generated_batch<T: Scalar>(
    generator: &GeneratorNet<T>,
    params: &CameraParams,
    n: usize,
    rng: &mut Rng,
) -> Result<CodeBatch<T>> {
    let data = generator.sample(params, n, rng)?;
    CodeBatch::new(n, generator.arch().code_len, data)
}
