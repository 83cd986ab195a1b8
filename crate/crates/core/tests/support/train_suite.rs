//! Curriculum and training-loop properties on small fixtures.

use lidar_core::cgan::{
    curriculum_alpha, g_loss, noise, Architecture, DiscriminatorNet, GeneratorNet, TrainConfig, Trainer,
};
use lidar_core::engine::{Graph, Tensor};
use lidar_core::oracle::{transmitted_code, CameraParams, Dataset, DatasetGroup};
use lidar_core::seed;
use lidar_core::signal::{per_bit_moments, CodeBatch};

pub type Check = std::result::Result<(), String>;

/// One group whose every repetition is the same shifted code.
pub fn constant_dataset(len: usize, reps: usize) -> Dataset {
    let alpha = transmitted_code(len, 1).unwrap();
    let row = alpha.shifted_right(9);
    let data = (0..reps).flat_map(|_| row.bits().to_vec()).collect();
    Dataset {
        transmitted: alpha,
        groups: vec![DatasetGroup {
            params: CameraParams::new([0.5, 0.4, 0.6, 0.3, 0.7, 0.2, 0.8, 0.5]).unwrap(),
            codes: CodeBatch::new(reps, len, data).unwrap(),
        }],
        reps,
        base_seed: 0,
        oracle_digest: [0; 32],
    }
}

pub fn smoke_config(iterations: u64) -> TrainConfig {
    TrainConfig {
        iterations,
        batch_size: 16,
        groups_per_step: 1,
        critic_iters: 1,
        learning_rate: 1e-3,
        ..TrainConfig::default()
    }
}

/// Below the threshold the generator objective has no path to the critic:
/// its gradient in every critic weight is zero, and its gradient in the
/// generator weights is the same for two unrelated critics.
pub fn adversarial_gradient_vanishes() -> Check {
    let cfg = TrainConfig::default();
    let alpha = curriculum_alpha(cfg.curriculum_threshold, cfg.curriculum_threshold, cfg.curriculum_constant);
    if alpha != 0.0 {
        return Err(format!("alpha at the threshold is {alpha}"));
    }
    let arch = Architecture::new(32, 4);
    let gen = GeneratorNet::<f64>::init(arch, &mut seed::rng(1)).unwrap();
    let (rows, len) = (6, arch.code_len);
    let real: Vec<f64> = (0..rows * len).map(|i| ((i * 7) % 3 == 0) as u8 as f64).collect();
    let (rm, rv) = per_bit_moments(&CodeBatch::new(rows, len, real).unwrap()).unwrap();
    let rm = Tensor::from_vec(&[1, 1, len], rm).unwrap();
    let rv = Tensor::from_vec(&[1, 1, len], rv).unwrap();

    let mut grads = Vec::new();
    for critic_seed in [2, 3] {
        let disc = DiscriminatorNet::<f64>::init(arch, &mut seed::rng(critic_seed)).unwrap();
        let mut g = Graph::new();
        let gb = gen.bind(&mut g);
        let db = disc.bind(&mut g);
        let cond = g.leaf(Tensor::full(&[rows, 8], 0.4));
        let z = g.leaf(noise(rows, arch.z_dim, &mut seed::rng(4)));
        let loss = g_loss(&mut g, &gen, &gb, &disc, &db, cond, z, 1, &rm, &rv, alpha, &cfg.weights())
            .map_err(|e| e.to_string())?;
        if loss.adversarial.is_some() || loss.parameters.is_some() {
            return Err("adversarial terms built at alpha = 0".into());
        }
        let dgrads = g.grad(loss.total, &db.vars, false).map_err(|e| e.to_string())?;
        for v in dgrads {
            if g.value(v).data().iter().any(|&x| x != 0.0) {
                return Err("non-zero critic gradient at alpha = 0".into());
            }
        }
        let ggrads = g.grad(loss.total, &gb.vars, false).map_err(|e| e.to_string())?;
        grads.push(ggrads.iter().map(|&v| g.value(v).clone()).collect::<Vec<_>>());
    }
    if grads[0] != grads[1] {
        return Err("generator gradient depends on the critic at alpha = 0".into());
    }
    Ok(())
}

/// Training with different numbers of critic updates leaves the generator
/// bit-identical while the curriculum weight is 0.
pub fn generator_ignores_critic(iterations: u64) -> Check {
    let ds = constant_dataset(32, 8);
    let run = |critic_iters| {
        let cfg = TrainConfig {
            critic_iters,
            ..smoke_config(iterations)
        };
        let mut t = Trainer::<f64>::new(&ds, cfg, [0; 32]).unwrap();
        t.run(&mut ()).unwrap();
        t.into_checkpoint()
    };
    let (a, b) = (run(0), run(3));
    if a.generator != b.generator {
        return Err("generator weights differ with the number of critic updates".into());
    }
    if a.discriminator == b.discriminator {
        return Err("critic was not trained".into());
    }
    Ok(())
}

/// Mean of `g_mean + g_variance` over consecutive windows.
pub fn moment_windows(iterations: u64, window: usize) -> Vec<f64> {
    let ds = constant_dataset(128, 16);
    let mut per_iter = Vec::new();
    let mut t = Trainer::<f64>::new(&ds, smoke_config(iterations), [0; 32]).unwrap();
    t.run(&mut |r: &lidar_core::cgan::LossRecord| per_iter.push(r.g_mean + r.g_variance)).unwrap();
    per_iter.chunks(window).map(|w| w.iter().sum::<f64>() / w.len() as f64).collect()
}

pub fn strictly_decreasing(xs: &[f64]) -> Check {
    match xs.windows(2).position(|w| !(w[1] < w[0])) {
        None => Ok(()),
        Some(i) => Err(format!("window {} rose from {} to {}", i + 1, xs[i], xs[i + 1])),
    }
}
