use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use lidar_core::cgan::{comparison_raster, LossRecord, TrainObserver, Trainer};
use lidar_core::config::RunConfig;
use lidar_core::error::{Error, Result};
use lidar_core::io::records::{trace_csv, EvalReport, ParamsRecord};
use lidar_core::io::{checkpoint_file, dataset_file, hex, pgm::Raster};
use lidar_core::oracle::{random_param_sets, transmitted_code};
use lidar_core::{inverse, GeneratorNet};

pub fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

/// `dir/stem.suffix` next to `path`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

pub fn gen_data(mut cfg: RunConfig, seed: Option<u64>, out: &Path) -> Result<()> {
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    cfg.validate()?;
    let cam = cfg.oracle()?;
    let alpha = transmitted_code(cfg.code_length, cfg.code_seed)?;
    let ds = cam.generate_dataset(&alpha, &random_param_sets(cfg.groups, cfg.param_seed), cfg.reps)?;
    let digest = dataset_file::save(&ds, out)?;
    println!(
        "wrote {} ({} groups x {} codes, L = {})",
        out.display(),
        ds.groups.len(),
        ds.reps,
        ds.code_len()
    );
    println!("digest {}", hex(&digest));
    Ok(())
}

struct CliObserver {
    log: fs::File,
    snapshot_every: u64,
    snapshot_rows: usize,
    snapshot_seed: u64,
    out: PathBuf,
    dataset: lidar_core::oracle::Dataset,
}

impl TrainObserver<f64> for CliObserver {
    fn iteration(&mut self, r: &LossRecord, generator: &GeneratorNet) -> Result<()> {
        writeln!(self.log, "{}", r.csv_row())?;
        let done = r.iteration + 1;
        if self.snapshot_every > 0 && done % self.snapshot_every == 0 {
            let raster = comparison_raster(generator, &self.dataset, self.snapshot_rows, self.snapshot_seed)?;
            fs::write(sibling(&self.out, &format!("snapshot-{done:07}.pgm")), raster.to_bytes())?;
        }
        if done % 100 == 0 {
            eprintln!(
                "iter {done}: g_mean {:.4} g_var {:.4} d {:.4}",
                r.g_mean, r.g_variance, r.d_total
            );
        }
        Ok(())
    }
}

pub fn train(mut cfg: RunConfig, seed: Option<u64>, dataset: &Path, out: &Path, resume: Option<&Path>) -> Result<()> {
    if let Some(s) = seed {
        cfg.train_seed = s;
    }
    cfg.validate()?;
    let (ds, digest) = dataset_file::load(dataset)?;
    let log_path = sibling(out, "loss.csv");
    let mut trainer = match resume {
        Some(p) => {
            let ck = checkpoint_file::load::<f64>(p)?;
            let mut expected = cfg.train();
            expected.iterations = ck.config.iterations;
            if ck.config != expected {
                return Err(Error::InvalidArgument(
                    "checkpoint was trained with different settings than the configuration".into(),
                ));
            }
            Trainer::resume(&ds, ck, cfg.train_iterations, digest)?
        }
        None => Trainer::new(&ds, cfg.train(), digest)?,
    };
    let log = if resume.is_some() && log_path.exists() {
        fs::OpenOptions::new().append(true).open(&log_path)?
    } else {
        let mut f = fs::File::create(&log_path)?;
        writeln!(f, "{}", LossRecord::CSV_HEADER)?;
        f
    };
    let mut obs = CliObserver {
        log,
        snapshot_every: cfg.train_snapshot_every,
        snapshot_rows: cfg.train_snapshot_rows,
        snapshot_seed: cfg.train_seed,
        out: out.to_path_buf(),
        dataset: ds.clone(),
    };
    trainer.run(&mut obs)?;
    let ck = trainer.into_checkpoint();
    checkpoint_file::save(&ck, out)?;
    let raster = comparison_raster(&ck.generator, &ds, cfg.train_snapshot_rows, cfg.train_seed)?;
    fs::write(sibling(out, "snapshot.pgm"), raster.to_bytes())?;
    println!("wrote {} after {} iterations", out.display(), ck.iteration);
    Ok(())
}

pub fn optimize(mut cfg: RunConfig, seed: Option<u64>, checkpoint: &Path, out: &Path) -> Result<()> {
    if let Some(s) = seed {
        cfg.opt_seed = s;
    }
    cfg.validate()?;
    let ck = checkpoint_file::load::<f64>(checkpoint)?;
    let consts = cfg.constants();
    if ck.generator.arch().code_len != consts.code_length {
        return Err(Error::InvalidArgument(format!(
            "checkpoint models codes of length {}, configuration has {}",
            ck.generator.arch().code_len,
            consts.code_length
        )));
    }
    let result = inverse::optimize(&ck.generator, &ck.transmitted, &consts, &cfg.opt())?;
    let record = ParamsRecord::from_result(&result);
    fs::write(out, record.to_toml())?;
    fs::write(sibling(out, "trace.csv"), trace_csv(&result.trace))?;
    println!(
        "{} after {} iterations, R = {:.2}%",
        if result.converged { "converged" } else { "not converged" },
        result.trace.len(),
        result.inliers_rate
    );
    println!("params {:?}", result.params.values());
    Ok(())
}

pub fn eval(mut cfg: RunConfig, seed: Option<u64>, params: &Path, out: &Path) -> Result<()> {
    if let Some(s) = seed {
        cfg.eval_seed = s;
    }
    cfg.validate()?;
    let record = ParamsRecord::from_toml(&fs::read_to_string(params)?)?;
    let after = record.camera_params()?;
    let before = cfg.baseline()?;
    let cam = cfg.oracle()?;
    let alpha = transmitted_code(cfg.code_length, cfg.code_seed)?;
    let eb = cam.eval(&alpha, &before, cfg.eval_samples, cfg.eval_seed)?;
    let ea = cam.eval(&alpha, &after, cfg.eval_samples, cfg.eval_seed)?;
    for (label, e) in [("before", &eb), ("after", &ea)] {
        println!(
            "{label}: R = {:.2}%  median = {:.2} mm  std = {:.2} mm",
            e.inliers_rate, e.median_mm, e.std_mm
        );
    }
    let report = EvalReport {
        true_distance_mm: cfg.distance_mm,
        delta_max_mm: cfg.constants().delta_max(),
        before: (before, eb),
        after: (after, ea),
    };
    fs::write(out, report.to_text())?;
    Ok(())
}

fn parse_batch(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .chars()
            .filter(|c| !c.is_whitespace() && *c != ',')
            .map(|c| match c {
                '0' => Ok(0.0),
                '1' => Ok(1.0),
                _ => Err(Error::InvalidArgument(format!("line {}: unexpected character {c:?}", i + 1))),
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn render(input: &Path, out: &Path, group: Option<usize>) -> Result<()> {
    let bytes = fs::read(input)?;
    let rows: Vec<Vec<f64>> = if bytes.starts_with(dataset_file::MAGIC) {
        let ds = dataset_file::from_bytes(&bytes)?;
        let groups: Vec<_> = match group {
            Some(g) => vec![ds.groups.get(g).ok_or_else(|| {
                Error::InvalidArgument(format!("group {g} out of range ({} groups)", ds.groups.len()))
            })?],
            None => ds.groups.iter().collect(),
        };
        groups.iter().flat_map(|g| g.codes.rows().map(|r| r.to_vec())).collect()
    } else {
        let text = std::str::from_utf8(&bytes).map_err(|_| Error::InvalidArgument("batch file is not text".into()))?;
        parse_batch(text)?
    };
    if rows.is_empty() {
        return Err(Error::InvalidArgument("nothing to render: empty batch".into()));
    }
    let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    let raster = Raster::from_rows(&refs)?;
    fs::write(out, raster.to_bytes())?;
    println!("wrote {} ({}x{})", out.display(), raster.width(), raster.height());
    Ok(())
}

pub fn inspect(file: &Path) -> Result<()> {
    print!("{}", lidar_core::io::inspect(&fs::read(file)?)?);
    Ok(())
}
