//! Report serialization: CSV rows and a JSON mirror with identical field
//! names. Output is byte-deterministic for a given report.

use flsim_core::metrics::{ExperimentReport, RoundReport};
use serde::Serialize;
use std::io::Write;
use std::path::Path;

pub const CSV_HEADER: &str = "round,acc,n_selected,tp,fp,tn,fn,f1,fallback,wall_ms";

fn csv_row(r: &RoundReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        r.round,
        r.global_accuracy,
        r.selected.len(),
        r.confusion.tp,
        r.confusion.fp,
        r.confusion.tn,
        r.confusion.fn_,
        r.f1,
        r.fallback_used,
        r.wall_ms
    )
}

/// CSV serialization: the config echo as `#` comment lines, the fixed
/// header, one row per round.
pub fn csv_string(report: &ExperimentReport) -> String {
    let mut out = String::new();
    for (k, v) in &report.config_echo {
        out.push_str(&format!("# {k} = {v}\n"));
    }
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &report.rounds {
        out.push_str(&csv_row(r));
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct JsonRound {
    round: u64,
    acc: f64,
    n_selected: usize,
    tp: usize,
    fp: usize,
    tn: usize,
    #[serde(rename = "fn")]
    fn_: usize,
    f1: f64,
    fallback: bool,
    wall_ms: u64,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    config: std::collections::BTreeMap<&'a str, &'a str>,
    rounds: Vec<JsonRound>,
    final_accuracy: f64,
    tail_mean: f64,
    tail_std: f64,
}

/// JSON mirror of the CSV with identical field names per round.
pub fn json_string(report: &ExperimentReport) -> String {
    let mirror = JsonReport {
        config: report
            .config_echo
            .iter()
            .map(|(k, v)| (k.as_str(), v.as_str()))
            .collect(),
        rounds: report
            .rounds
            .iter()
            .map(|r| JsonRound {
                round: r.round,
                acc: r.global_accuracy,
                n_selected: r.selected.len(),
                tp: r.confusion.tp,
                fp: r.confusion.fp,
                tn: r.confusion.tn,
                fn_: r.confusion.fn_,
                f1: r.f1,
                fallback: r.fallback_used,
                wall_ms: r.wall_ms,
            })
            .collect(),
        final_accuracy: report.final_accuracy,
        tail_mean: report.tail_mean,
        tail_std: report.tail_std,
    };
    let mut s = serde_json::to_string_pretty(&mirror).expect("report serializes");
    s.push('\n');
    s
}

pub fn write_report_files(
    report: &ExperimentReport,
    dir: &Path,
    write_csv: bool,
    write_json: bool,
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    if write_csv {
        let mut f = std::fs::File::create(dir.join("report.csv"))?;
        f.write_all(csv_string(report).as_bytes())?;
    }
    if write_json {
        let mut f = std::fs::File::create(dir.join("report.json"))?;
        f.write_all(json_string(report).as_bytes())?;
    }
    Ok(())
}

/// Combined CSV for a sweep: each sub-experiment's rows prefixed with the
/// axis name and value.
pub fn sweep_csv_string(axis: &str, results: &[(String, ExperimentReport)]) -> String {
    let mut out = String::new();
    out.push_str(&format!("axis,value,{CSV_HEADER}\n"));
    for (value, report) in results {
        for r in &report.rounds {
            out.push_str(&format!("{axis},{value},{}\n", csv_row(r)));
        }
    }
    out
}
