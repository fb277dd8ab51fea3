use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use ipbind::config::RunConfig;
use ipbind::head::{attribution_csv, attribution_pdb, export_attribution, predict_prepared, PreparedComplex};
use ipbind::metrics::MetricReport;
use ipbind::structio::{load_manifest, write_pdb, write_sdf, Split};
use ipbind::synthetic::{random_rigid_motion, synthetic_complex, transform_complex};
use ipbind::trainer::{fit, load_samples, predict_samples, Checkpoint};
use ipbind::{Error, Result};

/// Protein–ligand binding affinity from frame-averaged atomic potentials.
#[derive(Parser)]
#[command(name = "ipbind", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on the `train` split, validating on `val`.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Write `predictions.csv` for one split.
    Predict {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
    },
    /// Per-atom attribution CSVs (and optionally PDBs with deltas as B-factors).
    Explain {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(long)]
        pdb: bool,
    },
    /// Apply random rigid motions and report the largest prediction change.
    CheckInvariance {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// RMSE and Pearson of a predictions CSV with a label column.
    Metrics {
        #[arg(long)]
        predictions: PathBuf,
    },
    /// Write a small synthetic dataset, manifest, and default config.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 24)]
        complexes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        Error::Numerical(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Train {
            manifest,
            config,
            out_dir,
            seed,
            checkpoint,
        } => {
            let mut cfg = match &config {
                Some(p) => RunConfig::load(p)?,
                None => RunConfig::default(),
            };
            if let Some(s) = seed {
                cfg.train.seed = s;
            }
            cfg.validate()?;
            let resume = checkpoint.as_deref().map(Checkpoint::load).transpose()?;
            let m = load_manifest(&manifest)?;
            let train = load_samples(&m, Split::Train, &cfg.model)?;
            let val = load_samples(&m, Split::Val, &cfg.model)?;
            let outcome = fit(&train, &val, &cfg, &out_dir, resume)?;
            println!("best checkpoint: {}", outcome.best_checkpoint.display());
            Ok(0)
        }
        Command::Predict {
            manifest,
            checkpoint,
            out_dir,
            split,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let m = load_manifest(&manifest)?;
            let samples = load_samples(&m, split, &ck.config.model)?;
            let preds = predict_samples(&samples, &ck.state.params, &ck.config.model)?;
            let labels: Option<Vec<f64>> = samples.iter().map(|s| s.prep.label()).collect();
            let mut csv = String::from(if labels.is_some() { "id,prediction,label\n" } else { "id,prediction\n" });
            for (k, (s, p)) in samples.iter().zip(&preds).enumerate() {
                match &labels {
                    Some(l) => csv.push_str(&format!("{},{p},{}\n", s.id, l[k])),
                    None => csv.push_str(&format!("{},{p}\n", s.id)),
                }
            }
            create_dir(&out_dir)?;
            write(&out_dir.join("predictions.csv"), &csv)?;
            if let Some(l) = labels {
                print_metrics(&MetricReport::compute(&preds, &l)?);
            }
            Ok(0)
        }
        Command::Explain {
            manifest,
            checkpoint,
            out_dir,
            split,
            pdb,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let m = load_manifest(&manifest)?;
            let samples = load_samples(&m, split, &ck.config.model)?;
            create_dir(&out_dir)?;
            for s in &samples {
                let report = predict_prepared(&s.prep, &ck.state.params, &ck.config.model)?;
                let rows = export_attribution(&report, &s.prep.pc)?;
                write(&out_dir.join(format!("{}_attribution.csv", s.id)), &attribution_csv(&rows))?;
                if pdb {
                    write(&out_dir.join(format!("{}_attribution.pdb", s.id)), &attribution_pdb(&rows, &s.prep.pc)?)?;
                }
            }
            println!("wrote attributions for {} complexes to {}", samples.len(), out_dir.display());
            Ok(0)
        }
        Command::CheckInvariance {
            manifest,
            checkpoint,
            split,
            trials,
            tolerance,
            seed,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let cfg = &ck.config.model;
            let params = &ck.state.params;
            let m = load_manifest(&manifest)?;
            let samples = load_samples(&m, split, cfg)?;
            let worst = samples
                .par_iter()
                .enumerate()
                .map(|(i, s)| {
                    let base = predict_prepared(&s.prep, params, cfg)?.affinity;
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(i as u64);
                    let mut worst = 0.0f64;
                    for _ in 0..trials {
                        let (r, t) = random_rigid_motion(&mut rng, 10.0);
                        let moved = PreparedComplex::new(transform_complex(&s.prep.pc, &r, &t), cfg)?;
                        let y = predict_prepared(&moved, params, cfg)?.affinity;
                        worst = worst.max((y - base).abs());
                    }
                    Ok(worst)
                })
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            println!(
                "complexes={} trials={} frame_mode={} max_abs_change={worst:e} tolerance={tolerance:e}",
                samples.len(),
                trials,
                cfg.frame_mode
            );
            Ok(if worst < tolerance { 0 } else { 3 })
        }
        Command::Metrics { predictions } => {
            let mut reader = csv::Reader::from_path(&predictions)?;
            let headers = reader.headers()?.clone();
            let col = |name: &str| {
                headers
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::InvalidInput(format!("{} has no `{name}` column", predictions.display())))
            };
            let (pi, li) = (col("prediction")?, col("label")?);
            let (mut p, mut l) = (Vec::new(), Vec::new());
            for (row, rec) in reader.records().enumerate() {
                let rec = rec?;
                let num = |k: usize| {
                    rec.get(k)
                        .and_then(|v| v.trim().parse::<f64>().ok())
                        .ok_or_else(|| Error::Parse { line: row + 2, message: "expected a number".into() })
                };
                p.push(num(pi)?);
                l.push(num(li)?);
            }
            print_metrics(&MetricReport::compute(&p, &l)?);
            Ok(0)
        }
        Command::Synth {
            out_dir,
            complexes,
            seed,
        } => {
            synth(&out_dir, complexes, seed)?;
            println!("wrote {complexes} complexes, manifest.csv and config.txt to {}", out_dir.display());
            Ok(0)
        }
    }
}

fn print_metrics(r: &MetricReport) {
    println!("n = {}", r.n);
    println!("rmse = {:.6}", r.rmse);
    match r.pearson {
        Some(p) => println!("pearson = {p:.6}"),
        None => println!("pearson = undefined"),
    }
}

fn synth(out_dir: &Path, n: usize, seed: u64) -> Result<()> {
    if n < 3 {
        return Err(Error::Config("need at least 3 complexes to fill train, val and test".into()));
    }
    let files = out_dir.join("structures");
    create_dir(&files)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut manifest = String::from("id,protein,ligand,label,split\n");
    for i in 0..n {
        let pc = synthetic_complex(&mut rng, 20, 8);
        let id = format!("syn{i:03}");
        let split = match i % 6 {
            4 => Split::Val,
            5 => Split::Test,
            _ => Split::Train,
        };
        write(&files.join(format!("{id}.pdb")), &write_pdb(&pc.protein_pocket.atoms, None)?)?;
        write(&files.join(format!("{id}.sdf")), &write_sdf(&id, &pc.ligand.atoms)?)?;
        let label = pc.label.expect("synthetic complexes are labelled");
        manifest.push_str(&format!("{id},structures/{id}.pdb,structures/{id}.sdf,{label:.3},{split}\n"));
    }
    write(&out_dir.join("manifest.csv"), &manifest)?;
    let mut cfg = RunConfig::default();
    cfg.model.hidden_dim = 32;
    cfg.model.num_layers = 2;
    cfg.model.rbf_count = 16;
    cfg.train.epochs = 20;
    cfg.train.batch_size = 4;
    cfg.train.peak_lr = 1e-3;
    cfg.train.seed = seed;
    write(&out_dir.join("config.txt"), &cfg.render())
}
