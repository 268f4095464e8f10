use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pue::datagen::{calibrate_c, mean_exposure, parse_sparse_dataset, ExposureSpec};
use pue::harness::{
    emit_report, emit_traces, report_csv, run_experiment_with_traces, ExperimentConfig, Mode,
};
use pue::oracle::verification_suite;
use pue::PueError;

#[derive(Parser, Debug)]
#[command(
    author,
    version,
    about = "Benchmarks for learning from positive, unlabeled and exposure data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every trial of an experiment config and write the report.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Split ratio of the first partition.
        #[arg(long)]
        alpha: Option<f64>,
        /// Report path; the report goes to stdout when neither this nor the config sets one.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the closed-form minimizer, the recursion and the identification identity.
    Oracle {
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Calibrate the exposure constant C for a dataset.
    Calibrate {
        dataset: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        target: f64,
        #[arg(long)]
        dim: Option<usize>,
    },
    /// Compare a dataset's size, dimension and positive fraction with the reference table.
    ParseCheck {
        /// Dataset name (looked up as `<data-dir>/<name>.libsvm`) or a file path.
        dataset: String,
        #[arg(long, env = "PUE_DATA_DIR", default_value = "data")]
        data_dir: PathBuf,
    },
}

/// Reference `(name, rows, positive fraction, features)`.
const REFERENCE: [(&str, usize, f64, usize); 5] = [
    ("australian", 690, 0.445, 14),
    ("w8a", 49749, 0.589, 300),
    ("covtype", 581012, 0.438, 784),
    ("mushrooms", 8124, 0.878, 112),
    ("german", 1000, 0.300, 24),
];

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<PueError> for Failure {
    fn from(e: PueError) -> Self {
        match e {
            PueError::Config(_) | PueError::File { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            trials,
            alpha,
            out,
        } => run(&config, seed, trials, alpha, out),
        Command::Oracle { instances, seed } => oracle(instances, seed),
        Command::Calibrate {
            dataset,
            target,
            dim,
        } => calibrate(&dataset, target, dim),
        Command::ParseCheck { dataset, data_dir } => parse_check(&dataset, &data_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(
    path: &Path,
    seed: Option<u64>,
    trials: Option<usize>,
    alpha: Option<f64>,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(a) = alpha {
        cfg.split.split_ratio = a;
    }
    if out.is_some() {
        cfg.output = out;
    }
    cfg.validate()?;
    let (report, traces) = run_experiment_with_traces(&cfg)?;
    match &cfg.output {
        Some(p) => emit_report(&report, p, cfg.format)?,
        None => print!("{}", report_csv(&report)),
    }
    if let Some(p) = &cfg.trace_output {
        emit_traces(&traces, p)?;
    }
    for a in report
        .aggregates
        .iter()
        .filter(|a| a.mode == Mode::Inductive && a.metric == "accuracy")
    {
        eprintln!(
            "{:<16} inductive accuracy {:.4} ± {:.4} (n = {})",
            a.method, a.mean, a.std, a.n
        );
    }
    if !report.failures.is_empty() {
        eprintln!("{} trial(s) failed", report.failures.len());
    }
    Ok(())
}

fn oracle(instances: usize, seed: u64) -> Result<(), Failure> {
    let r = verification_suite(instances, seed)?;
    println!("instances            {}", r.instances);
    println!("lemma grid residual  {:.3e}", r.lemma);
    println!("contraction residual {:.3e}", r.contraction);
    println!("closed-form residual {:.3e}", r.closed_form);
    println!("identification       {:.3e}", r.identification);
    let ok = r.lemma <= 2e-6
        && r.contraction <= 1e-12
        && r.closed_form <= 1e-12
        && r.identification <= 1e-12;
    if ok {
        Ok(())
    } else {
        Err(Failure::Runtime("a residual exceeds its tolerance".into()))
    }
}

fn calibrate(dataset: &Path, target: f64, dim: Option<usize>) -> Result<(), Failure> {
    let data = parse_sparse_dataset(dataset, dim)?;
    let spec = ExposureSpec {
        target_marginal: target,
        ..ExposureSpec::default()
    };
    let c = calibrate_c(&data, &spec)?;
    println!("C = {c}");
    println!("mean exposure = {:.7}", mean_exposure(&data, &spec, c)?);
    Ok(())
}

fn parse_check(dataset: &str, data_dir: &Path) -> Result<(), Failure> {
    let direct = PathBuf::from(dataset);
    let path = if direct.is_file() {
        direct
    } else {
        data_dir.join(format!("{dataset}.libsvm"))
    };
    if !path.is_file() {
        return Err(Failure::Usage(format!(
            "{}: no such dataset file",
            path.display()
        )));
    }
    let data = parse_sparse_dataset(&path, None)?;
    let n = data.len();
    let d = data.dim();
    let pos = data
        .y_oracle()
        .unwrap_or_default()
        .iter()
        .filter(|&&y| y)
        .count() as f64
        / n.max(1) as f64;
    println!("n={n}, d={d}, pos={pos:.3}");
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default();
    let Some(&(name, rn, rpos, rd)) = REFERENCE.iter().find(|r| r.0 == stem) else {
        println!("no reference entry for `{stem}`");
        return Ok(());
    };
    let mut mismatches = Vec::new();
    if n != rn {
        mismatches.push(format!("n = {n}, reference {rn}"));
    }
    if d != rd {
        mismatches.push(format!("d = {d}, reference {rd}"));
    }
    if (pos - rpos).abs() > 1e-3 {
        mismatches.push(format!("positive fraction {pos:.4}, reference {rpos:.3}"));
    }
    if mismatches.is_empty() {
        println!("{name}: matches reference");
        Ok(())
    } else {
        Err(Failure::Runtime(format!(
            "{name}: {}",
            mismatches.join("; ")
        )))
    }
}
