//! `stcn` command-line front end.
//!
//! Exit codes: 0 success, 1 numerical or validation failure, 2 usage or I/O
//! error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ndarray::Array2;
use stcn::checkpoint::{load_checkpoint, save_checkpoint};
use stcn::config::RunConfig;
use stcn::eval::{compare, evaluate, EvalReport};
use stcn::gradcheck::{grad_check, GradCheckOptions, GradCheckPreset};
use stcn::seqdata::{generate_synthetic, read_container, write_container, SequenceSet, SyntheticPreset};
use stcn::train::{train_model, Precision};
use stcn::{Model, Real, StcnError};

#[derive(Parser)]
#[command(name = "stcn", version, about = "Stochastic temporal convolutional networks")]
struct Cli {
    /// Worker threads; 1 gives the strictly deterministic mode.
    #[arg(long, global = true, env = "STCN_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic sequence container.
    Synth {
        /// sines | switching | strokes
        #[arg(long)]
        preset: SyntheticPreset,
        #[arg(long)]
        n: usize,
        #[arg(long = "T")]
        steps: usize,
        #[arg(long = "D")]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model; writes the best checkpoint and history.csv to --out-dir.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Training container (overrides data.train).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Validation container (overrides data.valid).
        #[arg(long)]
        valid: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Overrides train.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Test hook: poison the initial parameters with NaN.
        #[arg(long, hide = true)]
        inject_nan: bool,
    },
    /// Evaluate a checkpoint on a container.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 1)]
        mc_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Generate sequences by ancestral sampling.
    Sample {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Container whose sequences are continued (one output per prefix).
        #[arg(long)]
        prefix: Option<PathBuf>,
        /// Emit the observation mean instead of a draw.
        #[arg(long)]
        mean_pred: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference check of the analytic gradients.
    Gradcheck {
        #[arg(long, default_value = "tiny")]
        preset: GradCheckPreset,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<StcnError> for Failure {
    fn from(e: StcnError) -> Self {
        let code = match e {
            StcnError::Divergence { .. } | StcnError::Domain(_) => 1,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be ≥ 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cmd: Command) -> CliResult {
    match cmd {
        Command::Synth {
            preset,
            n,
            steps,
            dim,
            seed,
            out,
        } => {
            let set = generate_synthetic(preset, n, steps, dim, seed)?;
            write_container(&set, &out)?;
            println!("wrote {n} sequences T={steps} D={dim} -> {}", out.display());
            Ok(())
        }
        Command::Train {
            config,
            data,
            valid,
            out_dir,
            seed,
            inject_nan,
        } => cmd_train(config, data, valid, out_dir, seed, inject_nan),
        Command::Eval {
            ckpt,
            data,
            mc_samples,
            seed,
            format,
        } => cmd_eval(&ckpt, &data, mc_samples, seed, format),
        Command::Sample {
            ckpt,
            steps,
            seed,
            prefix,
            mean_pred,
            out,
        } => cmd_sample(&ckpt, steps, seed, prefix.as_deref(), mean_pred, &out),
        Command::Gradcheck { preset, tol, seed } => {
            let r = grad_check(&preset.model_config(), tol, seed, &GradCheckOptions::default())?;
            println!("max_rel_err={:e}", r.max_rel_err);
            println!("worst_param={}", r.worst_param);
            println!("checked={} tol={:e} passed={}", r.checked, r.tol, r.passed);
            if r.passed {
                Ok(())
            } else {
                Err(Failure {
                    code: 1,
                    message: format!("gradient check failed: max_rel_err {:e} ≥ tol {:e}", r.max_rel_err, tol),
                })
            }
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn cmd_train(
    config: Option<PathBuf>,
    data: Option<PathBuf>,
    valid: Option<PathBuf>,
    out_dir: PathBuf,
    seed: Option<u64>,
    inject_nan: bool,
) -> CliResult {
    let mut cfg = match &config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(p) = data {
        eprintln!("override: data.train = {} (flag)", p.display());
        cfg.data.train = Some(p);
    }
    if let Some(p) = valid {
        eprintln!("override: data.valid = {} (flag)", p.display());
        cfg.data.valid = Some(p);
    }
    if let Some(s) = seed {
        eprintln!("override: train.seed = {s} (flag)");
        cfg.train.seed = s;
    }
    cfg.validate()?;
    let train_path = cfg.data.train.clone().ok_or_else(|| usage("no training data (--data or data.train)"))?;
    let valid_path = cfg.data.valid.clone().ok_or_else(|| usage("no validation data (--valid or data.valid)"))?;
    let train_set = read_container(&train_path)?;
    let valid_set = read_container(&valid_path)?;
    match cfg.train.precision {
        Precision::F32 => train_as::<f32>(&cfg, &train_set, &valid_set, &out_dir, inject_nan),
        Precision::F64 => train_as::<f64>(&cfg, &train_set, &valid_set, &out_dir, inject_nan),
    }
}

fn train_as<F: Real>(
    cfg: &RunConfig,
    train_set: &SequenceSet,
    valid_set: &SequenceSet,
    out_dir: &Path,
    inject_nan: bool,
) -> CliResult {
    let mut model = Model::<F>::new(cfg.model.clone(), cfg.train.seed)?;
    if inject_nan {
        for p in model.store_mut().iter_mut() {
            p.value.iter_mut().for_each(|v| *v = F::nan());
        }
    }
    let outcome = train_model(model, &cfg.train, train_set, valid_set)?;
    std::fs::create_dir_all(out_dir).map_err(StcnError::from)?;
    save_checkpoint(&outcome.model, Some(&cfg.train), out_dir)?;
    outcome.history.write_csv(out_dir.join("history.csv"))?;
    for r in &outcome.history.records {
        println!("step {} loss {:.4} valid_elbo {:.4}", r.step, r.loss, r.valid_elbo);
    }
    println!(
        "best_step={} best_valid_elbo={:.4} -> {}",
        outcome.best_step,
        outcome.best_valid_elbo,
        out_dir.display()
    );
    Ok(())
}

fn eval_precision(ckpt: &Path) -> Result<Precision, StcnError> {
    let m = stcn::checkpoint::read_manifest(ckpt)?;
    Ok(m.train.map(|t| t.precision).unwrap_or(Precision::F32))
}

fn cmd_eval(ckpt: &Path, data: &Path, mc_samples: usize, seed: u64, format: Format) -> CliResult {
    let set = read_container(data)?;
    let (name, report) = match eval_precision(ckpt)? {
        Precision::F32 => eval_as::<f32>(ckpt, &set, mc_samples, seed)?,
        Precision::F64 => eval_as::<f64>(ckpt, &set, mc_samples, seed)?,
    };
    match format {
        Format::Csv => {
            let mut rows = BTreeMap::new();
            rows.insert(name, report.clone());
            print!("{}", compare(&rows));
            println!(
                "# mc_samples={} seed={} n_sequences={} units=nats/sequence kl_1=bottom kl_L=top-most",
                report.mc_samples, report.seed, report.n_sequences
            );
        }
        Format::Json => {
            let value = serde_json::json!({
                "model": name,
                "avg_elbo": report.avg_elbo_per_sequence,
                "avg_recon": report.avg_recon,
                "kl_total": report.kl_total,
                "kl_per_layer": report.kl_per_layer,
                "mc_samples": report.mc_samples,
                "seed": report.seed,
                "n_sequences": report.n_sequences,
                "avg_steps": report.avg_steps,
                "units": "nats/sequence",
            });
            println!("{}", serde_json::to_string_pretty(&value).expect("json value"));
        }
    }
    Ok(())
}

fn eval_as<F: Real>(
    ckpt: &Path,
    set: &SequenceSet,
    mc_samples: usize,
    seed: u64,
) -> Result<(String, EvalReport), StcnError> {
    let (model, _) = load_checkpoint::<F>(ckpt)?;
    let report = evaluate(&model, set, mc_samples, seed)?;
    Ok((model.config().variant.as_str().to_string(), report))
}

fn cmd_sample(
    ckpt: &Path,
    steps: usize,
    seed: u64,
    prefix: Option<&Path>,
    mean_pred: bool,
    out: &Path,
) -> CliResult {
    let (model, _) = load_checkpoint::<f64>(ckpt)?;
    let dim = model.config().input_dim;
    let prefixes: Vec<Array2<f32>> = match prefix {
        Some(p) => read_container(p)?.sequences().to_vec(),
        None => vec![Array2::zeros((0, dim))],
    };
    if prefixes.iter().all(|p| p.nrows() == 0) && steps == 0 {
        return Err(usage("--steps must be ≥ 1 without a prefix"));
    }
    let sequences = prefixes
        .iter()
        .enumerate()
        .map(|(i, p)| model.sample_sequence(p, steps, seed.wrapping_add(i as u64), mean_pred))
        .collect::<Result<Vec<_>, _>>()?;
    if sequences.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Failure {
            code: 1,
            message: "sampling produced non-finite values".into(),
        });
    }
    let n = sequences.len();
    let len = sequences[0].nrows();
    write_container(&SequenceSet::new(sequences, dim)?, out)?;
    println!("wrote {n} sequences T={len} D={dim} -> {}", out.display());
    Ok(())
}
