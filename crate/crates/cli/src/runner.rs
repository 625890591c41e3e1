//! Wire a validated configuration into datasets, an engine run, and report
//! files.

use crate::config::{DatasetConfig, ExperimentConfig, OutputFormat};
use crate::report;
use anyhow::{Context, Result};
use flsim_core::data::{idx, synth_dataset, Dataset};
use flsim_core::federation::{run_experiment, ExperimentSetup};
use flsim_core::metrics::ExperimentReport;

/// Build the train/test datasets named by the config.
pub fn build_datasets(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    match &cfg.dataset {
        DatasetConfig::Synth {
            n_classes,
            dim,
            n_per_class,
            test_per_class,
            spread,
        } => {
            // one draw of the class means covers both splits; the first
            // n_per_class samples of each class train, the rest are held out
            let total = n_per_class + test_per_class;
            let full = synth_dataset(*n_classes, *dim, total, *spread, cfg.seed)?;
            let mut train_idx = Vec::with_capacity(n_classes * n_per_class);
            let mut test_idx = Vec::with_capacity(n_classes * test_per_class);
            for c in 0..*n_classes {
                let base = c * total;
                train_idx.extend(base..base + n_per_class);
                test_idx.extend(base + n_per_class..base + total);
            }
            Ok((full.subset(&train_idx), full.subset(&test_idx)))
        }
        DatasetConfig::Idx {
            images,
            labels,
            test_images,
            test_labels,
        } => {
            let train = idx::load_idx(images, labels)
                .with_context(|| format!("loading {}", images.display()))?;
            let test = idx::load_idx(test_images, test_labels)
                .with_context(|| format!("loading {}", test_images.display()))?;
            Ok((train, test))
        }
    }
}

pub fn setup_from_config(cfg: &ExperimentConfig) -> ExperimentSetup {
    ExperimentSetup {
        fl: cfg.fl,
        hidden: cfg.hidden.clone(),
        q: cfg.q,
        attack: cfg.attack,
        defense: cfg.defense,
        record_timing: cfg.record_timing,
        config_echo: cfg.echo.clone(),
    }
}

/// Run one experiment end to end, returning the report.
pub fn run_config(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let (train, test) = build_datasets(cfg)?;
    let report = run_experiment(setup_from_config(cfg), &train, &test)?;
    Ok(report)
}

/// Run and write report files per the configured output format.
pub fn run_and_write(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let report = run_config(cfg)?;
    let (csv, json) = match cfg.output.format {
        OutputFormat::Csv => (true, false),
        OutputFormat::Json => (false, true),
        OutputFormat::Both => (true, true),
    };
    report::write_report_files(&report, &cfg.output.dir, csv, json)
        .with_context(|| format!("writing reports under {}", cfg.output.dir.display()))?;
    Ok(report)
}

/// Sweep axes. `malicious_fraction` values are fractions of N, rounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    MaliciousFraction,
    Q,
    K,
}

impl std::str::FromStr for SweepAxis {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<SweepAxis, String> {
        match s {
            "malicious_fraction" => Ok(SweepAxis::MaliciousFraction),
            "q" => Ok(SweepAxis::Q),
            "k" => Ok(SweepAxis::K),
            other => Err(format!(
                "unknown sweep axis `{other}` (malicious_fraction, q, k)"
            )),
        }
    }
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::MaliciousFraction => "malicious_fraction",
            SweepAxis::Q => "q",
            SweepAxis::K => "k",
        }
    }
}

/// Run one sub-experiment per axis value; write a combined CSV keyed by the
/// axis value.
pub fn run_sweep(
    base: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
) -> Result<Vec<(String, ExperimentReport)>> {
    anyhow::ensure!(!values.is_empty(), "sweep needs at least one value");
    let mut results = Vec::with_capacity(values.len());
    for &v in values {
        let mut cfg = base.clone();
        match axis {
            SweepAxis::MaliciousFraction => {
                anyhow::ensure!(
                    (0.0..0.5).contains(&v),
                    "malicious fraction {v} outside [0, 0.5)"
                );
                cfg.fl.n_malicious = (v * cfg.fl.n_clients as f64).round() as usize;
                if cfg.fl.n_malicious == 0 {
                    cfg.attack = None;
                }
            }
            SweepAxis::Q => {
                anyhow::ensure!(v > 0.0 && v <= 1.0, "q = {v} outside (0, 1]");
                cfg.q = v;
            }
            SweepAxis::K => {
                let k = v as u64;
                anyhow::ensure!(k >= 1 && (v - k as f64).abs() < 1e-9, "k = {v} must be a positive integer");
                cfg.fl.k = k;
            }
        }
        cfg.echo = cfg.effective_echo();
        let report = run_config(&cfg)?;
        results.push((trim_float(v), report));
    }
    std::fs::create_dir_all(&base.output.dir)?;
    let combined = report::sweep_csv_string(axis.name(), &results);
    std::fs::write(base.output.dir.join("sweep.csv"), combined)?;
    Ok(results)
}

fn trim_float(v: f64) -> String {
    if (v - v.round()).abs() < 1e-9 && v.abs() < 1e15 {
        format!("{}", v.round() as i64)
    } else {
        format!("{v}")
    }
}
