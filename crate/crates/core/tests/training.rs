//! Curriculum behaviour, determinism and resumption of the trainer.

#[path = "support/train_suite.rs"]
mod suite;

use lidar_core::cgan::{generated_batch, Trainer};
use lidar_core::seed;
use lidar_core::signal::per_bit_moments;

#[test]
fn adversarial_gradient_is_zero_below_threshold() {
    suite::adversarial_gradient_vanishes().unwrap();
}

#[test]
fn generator_trajectory_ignores_critic_updates() {
    suite::generator_ignores_critic(30).unwrap();
}

#[test]
fn moment_losses_fall_every_window() {
    let w = suite::moment_windows(1000, 100);
    assert_eq!(w.len(), 10);
    suite::strictly_decreasing(&w).unwrap();
}

#[test]
fn constant_codes_are_learned() {
    let ds = suite::constant_dataset(128, 16);
    let mut t = Trainer::<f64>::new(&ds, suite::smoke_config(1500), [0; 32]).unwrap();
    t.run(&mut ()).unwrap();
    let ck = t.into_checkpoint();
    let group = &ds.groups[0];
    let fake = generated_batch(&ck.generator, &group.params, 256, &mut seed::rng(5)).unwrap();
    let (fm, _) = per_bit_moments(&fake).unwrap();
    let (rm, _) = per_bit_moments(&group.codes).unwrap();
    let l1 = fm.iter().zip(&rm).map(|(a, b)| (a - b).abs()).sum::<f64>() / fm.len() as f64;
    assert!(l1 <= 0.05, "per-bit mean L1 {l1}");
}

#[test]
fn training_is_deterministic() {
    let ds = suite::constant_dataset(32, 8);
    let run = || {
        let mut t = Trainer::<f64>::new(&ds, suite::smoke_config(20), [0; 32]).unwrap();
        t.run(&mut ()).unwrap();
        t.into_checkpoint()
    };
    assert_eq!(run(), run());
}

#[test]
fn resume_matches_uninterrupted_run() {
    let ds = suite::constant_dataset(32, 8);
    // past the threshold so the critic terms are exercised as well
    let cfg = lidar_core::cgan::TrainConfig {
        curriculum_threshold: 5,
        curriculum_constant: 20.0,
        ..suite::smoke_config(16)
    };
    let mut full = Trainer::<f64>::new(&ds, cfg.clone(), [0; 32]).unwrap();
    full.run(&mut ()).unwrap();

    let mut first = Trainer::<f64>::new(&ds, lidar_core::cgan::TrainConfig { iterations: 9, ..cfg }, [0; 32]).unwrap();
    first.run(&mut ()).unwrap();
    let mut second = Trainer::resume(&ds, first.into_checkpoint(), 16, [0; 32]).unwrap();
    second.run(&mut ()).unwrap();
    assert_eq!(full.into_checkpoint(), second.into_checkpoint());
}

#[test]
fn resume_rejects_other_dataset() {
    let ds = suite::constant_dataset(32, 8);
    let mut t = Trainer::<f64>::new(&ds, suite::smoke_config(2), [0; 32]).unwrap();
    t.run(&mut ()).unwrap();
    assert!(Trainer::resume(&ds, t.into_checkpoint(), 4, [1; 32]).is_err());
}
