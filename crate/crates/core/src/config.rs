//! Run configuration: one flat TOML table covering the camera constants, the
//! synthetic camera, dataset generation, training, parameter search and
//! evaluation. Unknown keys are rejected. Keys shared between stages carry a
//! stage prefix (`train_`, `opt_`, `eval_`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cgan::TrainConfig;
use crate::error::{invalid, Error, Result};
use crate::inverse::OptConfig;
use crate::oracle::{CameraParams, EffectCoefficients, OracleConfig, N_PARAMS};
use crate::signal::CameraConstants;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub sampling_rate_hz: f64,
    pub light_speed_mm_s: f64,
    pub system_delay_mm: f64,
    pub code_length: usize,
    pub inlier_radius_mm: f64,

    pub distance_mm: f64,
    pub reflectivity: f64,
    pub optimum: [f64; N_PARAMS],
    pub effect_flip: f64,
    pub effect_flip_floor: f64,
    pub effect_duty: f64,
    pub effect_rise: f64,
    pub effect_fall: f64,
    pub effect_skew: f64,
    pub effect_jitter: f64,
    pub effect_outlier: f64,
    pub effect_dead_zone: f64,
    pub base_seed: u64,

    pub groups: usize,
    pub reps: usize,
    /// Seed of the transmitted code.
    pub code_seed: u64,
    /// Seed of the training parameter sets.
    pub param_seed: u64,

    pub train_lambda_gp: f64,
    pub train_lambda_parameters: f64,
    pub train_lambda_mean: f64,
    pub train_lambda_variance: f64,
    pub train_curriculum_threshold: u64,
    pub train_curriculum_constant: f64,
    pub train_critic_iters: usize,
    pub train_batch_size: usize,
    pub train_groups_per_step: usize,
    pub train_learning_rate: f64,
    pub train_adam_beta1: f64,
    pub train_adam_beta2: f64,
    pub train_z_dim: usize,
    pub train_iterations: u64,
    pub train_seed: u64,
    pub train_gp_interpolate: bool,
    /// Write a comparison raster every this many iterations; 0 disables.
    pub train_snapshot_every: u64,
    /// Codes per group in comparison rasters.
    pub train_snapshot_rows: usize,

    pub opt_batch_size: usize,
    pub opt_beta: f64,
    pub opt_learning_rate: f64,
    pub opt_max_iters: usize,
    pub opt_threshold: f64,
    pub opt_seed: u64,
    pub opt_restarts: usize,
    pub opt_freeze_noise: bool,
    pub opt_circular_inliers: bool,

    /// Codes per oracle evaluation.
    pub eval_samples: usize,
    pub eval_seed: u64,
    /// Baseline parameters; drawn uniformly from `eval_baseline_seed` when
    /// absent.
    pub eval_baseline: Option<[f64; N_PARAMS]>,
    pub eval_baseline_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let k = CameraConstants::default();
        let o = OracleConfig::default();
        let t = TrainConfig::default();
        let p = OptConfig::default();
        Self {
            sampling_rate_hz: k.sampling_rate_hz,
            light_speed_mm_s: k.light_speed_mm_s,
            system_delay_mm: k.system_delay_mm,
            code_length: k.code_length,
            inlier_radius_mm: k.inlier_radius_mm,

            distance_mm: o.distance_mm,
            reflectivity: o.reflectivity,
            optimum: o.optimum,
            effect_flip: o.effects.flip,
            effect_flip_floor: o.effects.flip_floor,
            effect_duty: o.effects.duty,
            effect_rise: o.effects.rise,
            effect_fall: o.effects.fall,
            effect_skew: o.effects.skew,
            effect_jitter: o.effects.jitter,
            effect_outlier: o.effects.outlier,
            effect_dead_zone: o.effects.dead_zone,
            base_seed: o.base_seed,

            groups: 200,
            reps: 64,
            code_seed: 1,
            param_seed: 3,

            train_lambda_gp: t.lambda_gp,
            train_lambda_parameters: t.lambda_parameters,
            train_lambda_mean: t.lambda_mean,
            train_lambda_variance: t.lambda_variance,
            train_curriculum_threshold: t.curriculum_threshold,
            train_curriculum_constant: t.curriculum_constant,
            train_critic_iters: t.critic_iters,
            train_batch_size: t.batch_size,
            train_groups_per_step: t.groups_per_step,
            train_learning_rate: t.learning_rate,
            train_adam_beta1: t.adam_beta1,
            train_adam_beta2: t.adam_beta2,
            train_z_dim: t.z_dim,
            train_iterations: t.iterations,
            train_seed: t.seed,
            train_gp_interpolate: t.gp_interpolate,
            train_snapshot_every: 0,
            train_snapshot_rows: 64,

            opt_batch_size: p.batch_size,
            opt_beta: p.beta,
            opt_learning_rate: p.learning_rate,
            opt_max_iters: p.max_iters,
            opt_threshold: p.threshold,
            opt_seed: p.seed,
            opt_restarts: p.restarts,
            opt_freeze_noise: p.freeze_noise,
            opt_circular_inliers: p.circular_inliers,

            eval_samples: 512,
            eval_seed: 13,
            eval_baseline: None,
            eval_baseline_seed: 17,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidArgument(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.oracle()?;
        self.train().validate()?;
        self.opt().validate()?;
        if self.groups == 0 {
            return invalid("groups must be at least 1");
        }
        if self.reps == 0 {
            return invalid("reps must be at least 1");
        }
        if self.eval_samples < 2 {
            return invalid("eval_samples must be at least 2");
        }
        if self.train_snapshot_rows == 0 {
            return invalid("train_snapshot_rows must be at least 1");
        }
        if let Some(b) = self.eval_baseline {
            CameraParams::new(b)?;
        }
        Ok(())
    }

    pub fn constants(&self) -> CameraConstants {
        CameraConstants {
            sampling_rate_hz: self.sampling_rate_hz,
            light_speed_mm_s: self.light_speed_mm_s,
            system_delay_mm: self.system_delay_mm,
            code_length: self.code_length,
            inlier_radius_mm: self.inlier_radius_mm,
        }
    }

    /// The camera built from this configuration.
    pub fn oracle(&self) -> Result<crate::oracle::OracleCamera> {
        crate::oracle::OracleCamera::new(self.oracle_config(), self.constants())
    }

    pub fn oracle_config(&self) -> OracleConfig {
        OracleConfig {
            distance_mm: self.distance_mm,
            reflectivity: self.reflectivity,
            optimum: self.optimum,
            effects: EffectCoefficients {
                flip: self.effect_flip,
                flip_floor: self.effect_flip_floor,
                duty: self.effect_duty,
                rise: self.effect_rise,
                fall: self.effect_fall,
                skew: self.effect_skew,
                jitter: self.effect_jitter,
                outlier: self.effect_outlier,
                dead_zone: self.effect_dead_zone,
            },
            base_seed: self.base_seed,
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            lambda_gp: self.train_lambda_gp,
            lambda_parameters: self.train_lambda_parameters,
            lambda_mean: self.train_lambda_mean,
            lambda_variance: self.train_lambda_variance,
            curriculum_threshold: self.train_curriculum_threshold,
            curriculum_constant: self.train_curriculum_constant,
            critic_iters: self.train_critic_iters,
            batch_size: self.train_batch_size,
            groups_per_step: self.train_groups_per_step,
            learning_rate: self.train_learning_rate,
            adam_beta1: self.train_adam_beta1,
            adam_beta2: self.train_adam_beta2,
            z_dim: self.train_z_dim,
            iterations: self.train_iterations,
            seed: self.train_seed,
            gp_interpolate: self.train_gp_interpolate,
        }
    }

    pub fn opt(&self) -> OptConfig {
        OptConfig {
            batch_size: self.opt_batch_size,
            beta: self.opt_beta,
            learning_rate: self.opt_learning_rate,
            max_iters: self.opt_max_iters,
            threshold: self.opt_threshold,
            inlier_radius_mm: self.inlier_radius_mm,
            seed: self.opt_seed,
            restarts: self.opt_restarts,
            freeze_noise: self.opt_freeze_noise,
            circular_inliers: self.opt_circular_inliers,
        }
    }

    /// Parameters evaluated as the "before" reference.
    pub fn baseline(&self) -> Result<CameraParams> {
        match self.eval_baseline {
            Some(b) => CameraParams::new(b),
            None => Ok(crate::oracle::random_param_sets(1, self.eval_baseline_seed)[0]),
        }
    }
}
