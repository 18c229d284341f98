//! `ldl`: command-line front end for the label-distribution-learning lab.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use ldl_core::calib::{fit_temperature, nll_at_temperature, CalibReport, PredictionSet, DEFAULT_BINS};
use ldl_core::harness::report::{find_runs, load_record, read_labels, read_logits, summary_csv, MODEL_FILE};
use ldl_core::harness::{
    export_penultimate, export_report, gen_synth, load_bank, load_dataset, run_experiment, save_dataset,
    save_run, summarize, train_and_save_bank, DatasetSpec, ExperimentConfig, ReportFormat,
};
use ldl_core::nn::{load_model, verification_suite};

/// Largest relative gradient error the verification suite accepts.
const GRADCHECK_TOL: f64 = 1e-4;

#[derive(Parser)]
#[command(
    name = "ldl",
    version,
    about = "Label-distribution learning experiments on synthetic data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from a JSON dataset spec.
    GenData {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the teacher bank listed in an experiment config.
    TrainTeacher {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Dataset directory, overriding the config's `data` field.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Train students for every configured seed.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Teacher bank directory written by `train-teacher`.
        #[arg(long)]
        teachers: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Dataset directory, overriding the config's `data` field.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Fit a temperature on stored logits and report metrics before and after.
    Calibrate {
        /// JSON array of logit rows.
        #[arg(long)]
        logits: PathBuf,
        /// JSON array of class indices.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BINS)]
        bins: usize,
    },
    /// Export report files for every run below a directory.
    Report {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Also export penultimate activations of the test samples of these classes.
        #[arg(long, value_delimiter = ',')]
        classes: Option<Vec<usize>>,
        /// Dataset directory, needed with `--classes`.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Run the gradient verification suite.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        seeds: u64,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
}

/// Load a config and the dataset it names. A relative `data` path is
/// resolved against the config file's directory.
fn load_config(path: &Path, data: Option<PathBuf>) -> Result<(ExperimentConfig, ldl_core::harness::Dataset)> {
    let cfg: ExperimentConfig = read_json(path)?;
    cfg.validate()?;
    let dir = match data {
        Some(d) => d,
        None => {
            let d = cfg.data.clone().with_context(|| {
                format!("{} has no `data` field and --data was not given", path.display())
            })?;
            if d.is_relative() {
                path.parent().unwrap_or(Path::new(".")).join(d)
            } else {
                d
            }
        }
    };
    let ds = load_dataset(&dir).with_context(|| format!("loading dataset {}", dir.display()))?;
    Ok((cfg, ds))
}

fn gen_data(spec: &Path, out: &Path) -> Result<()> {
    let spec: DatasetSpec = read_json(spec)?;
    let ds = gen_synth(&spec)?;
    save_dataset(&ds, out)?;
    println!("{}", json!({ "out": out, "hash": ds.hash }));
    Ok(())
}

fn train_teacher(config: &Path, out: &Path, data: Option<PathBuf>) -> Result<()> {
    let (cfg, ds) = load_config(config, data)?;
    let manifest = train_and_save_bank(&cfg, &ds, out)?;
    for (i, m) in manifest.members.iter().enumerate() {
        log::info!("teacher {i}: test accuracy {:.4}", m.test_accuracy);
    }
    println!("{}", serde_json::to_string_pretty(&manifest)?);
    Ok(())
}

fn run(config: &Path, teachers: Option<PathBuf>, out: &Path, data: Option<PathBuf>) -> Result<()> {
    let (cfg, ds) = load_config(config, data)?;
    let bank = match &teachers {
        Some(dir) => Some(load_bank(dir, &ds.hash)?),
        None => None,
    };
    let cache = out.join("label_cache");
    let outputs = run_experiment(&cfg, &ds, bank.as_ref(), Some(&cache))?;
    for o in &outputs {
        let dir = out.join(format!("seed_{}", o.record.seed));
        save_run(o, &dir)?;
        let t = &o.record.test;
        log::info!(
            "seed {}: accuracy {:.4} ece {:.4} nll {:.4} ({:.1}s)",
            o.record.seed,
            t.accuracy,
            t.ece,
            t.nll,
            o.record.wall_clock_secs
        );
    }
    let records: Vec<_> = outputs.into_iter().map(|o| o.record).collect();
    println!("{}", serde_json::to_string_pretty(&summarize(&records))?);
    Ok(())
}

fn calibrate(logits: &Path, labels: &Path, bins: usize) -> Result<()> {
    let logits = read_logits(logits)?;
    let labels = read_labels(labels)?;
    let t = fit_temperature(&logits, &labels)?;
    let before = PredictionSet::from_logits(&logits, labels.clone(), 1.0)?;
    let after = PredictionSet::from_logits(&logits, labels.clone(), t)?;
    let n = labels.len() as f64;
    let report = json!({
        "temperature": t,
        "nll_before": nll_at_temperature(&logits, &labels, 1.0) / n,
        "nll_after": nll_at_temperature(&logits, &labels, t) / n,
        "before": CalibReport::evaluate(&before, bins, None)?,
        "after": CalibReport::evaluate(&after, bins, Some(t))?,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn report(runs: &Path, format: Format, classes: Option<Vec<usize>>, data: Option<PathBuf>) -> Result<()> {
    let dirs = find_runs(runs)?;
    let dataset = match (&classes, data) {
        (Some(_), Some(d)) => Some(load_dataset(&d)?),
        (Some(_), None) => bail!("--classes needs --data"),
        _ => None,
    };
    let mut records = Vec::with_capacity(dirs.len());
    for dir in &dirs {
        for path in export_report(dir, format.into())? {
            log::info!("wrote {}", path.display());
        }
        if let (Some(classes), Some(ds)) = (&classes, &dataset) {
            let model = load_model(&dir.join(MODEL_FILE))?;
            let csv = export_penultimate(&model, ds.test.open(), classes)?;
            std::fs::write(dir.join("report").join("penultimate.csv"), csv)?;
        }
        records.push(load_record(dir)?);
    }
    let summaries = summarize(&records);
    std::fs::write(runs.join("summary.csv"), summary_csv(&summaries))?;
    std::fs::write(runs.join("summary.json"), serde_json::to_vec_pretty(&summaries)?)?;
    println!("{}", serde_json::to_string_pretty(&summaries)?);
    Ok(())
}

fn gradcheck(seeds: u64) -> Result<bool> {
    let results = verification_suite(0..seeds)?;
    let mut worst: Vec<(&str, f64)> = Vec::new();
    for r in &results {
        match worst.iter_mut().find(|(c, _)| *c == r.case) {
            Some((_, e)) => *e = e.max(r.max_rel_error),
            None => worst.push((r.case, r.max_rel_error)),
        }
    }
    let mut ok = true;
    for (case, err) in worst {
        let pass = err < GRADCHECK_TOL;
        ok &= pass;
        println!(
            "{case:<28} max rel error {err:.3e} {}",
            if pass { "ok" } else { "FAIL" }
        );
    }
    Ok(ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData { spec, out } => gen_data(&spec, &out).map(|()| true),
        Command::TrainTeacher { config, out, data } => train_teacher(&config, &out, data).map(|()| true),
        Command::Run {
            config,
            teachers,
            out,
            data,
        } => run(&config, teachers, &out, data).map(|()| true),
        Command::Calibrate { logits, labels, bins } => calibrate(&logits, &labels, bins).map(|()| true),
        Command::Report {
            runs,
            format,
            classes,
            data,
        } => report(&runs, format, classes, data).map(|()| true),
        Command::Gradcheck { seeds } => gradcheck(seeds),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
