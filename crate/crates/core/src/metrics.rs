//! Evaluation and per-round reporting: global-model accuracy and
//! filtering-quality scores.

use crate::data::Dataset;
use crate::error::{Result, SimError};
use crate::nn::{self, ModelParameters};
use serde::Serialize;

/// Classification accuracy of the model on a labeled set. Prediction is the
/// argmax class; ties go to the lowest index.
pub fn evaluate_accuracy(model: &ModelParameters, test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(SimError::Input("empty evaluation set".into()));
    }
    let out = nn::forward(model, &test.features)?;
    let mut correct = 0usize;
    for i in 0..out.rows() {
        let row = out.row(i);
        let mut best = 0;
        for (j, &x) in row.iter().enumerate().skip(1) {
            if x > row[best] {
                best = j;
            }
        }
        if best == test.labels[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

/// Confusion counts for the removal decision of one round. Removing a
/// malicious client is a true positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FilterConfusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl FilterConfusion {
    /// Count the removal outcomes. `selected` must be a subset of
    /// `participants`; `malicious` is the ground-truth malicious subset of
    /// the participants.
    pub fn count(selected: &[usize], participants: &[usize], malicious: &[usize]) -> FilterConfusion {
        let mut c = FilterConfusion {
            tp: 0,
            fp: 0,
            tn: 0,
            fn_: 0,
        };
        for id in participants {
            let removed = !selected.contains(id);
            let is_malicious = malicious.contains(id);
            match (removed, is_malicious) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Precision, recall and F1 of the removal decision. When there is
    /// nothing to detect and nothing was removed (`tp + fp + fn = 0`) the F1
    /// is vacuously 1 and the flag in the returned scores is set.
    pub fn scores(&self) -> FilterScores {
        if self.tp + self.fp + self.fn_ == 0 {
            return FilterScores {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
                vacuous: true,
            };
        }
        let precision = if self.tp + self.fp == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        };
        let recall = if self.tp + self.fn_ == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        FilterScores {
            precision,
            recall,
            f1,
            vacuous: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FilterScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// No malicious participants and nothing removed.
    pub vacuous: bool,
}

/// Convenience wrapper matching the removal convention.
pub fn filtering_scores(
    selected: &[usize],
    participants: &[usize],
    malicious: &[usize],
) -> FilterScores {
    FilterConfusion::count(selected, participants, malicious).scores()
}

/// One FL round's outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundReport {
    pub round: u64,
    pub global_accuracy: f64,
    /// Participant client ids whose updates were aggregated.
    pub selected: Vec<usize>,
    /// All participant client ids this round.
    pub participants: Vec<usize>,
    pub confusion: FilterConfusion,
    pub f1: f64,
    pub f1_vacuous: bool,
    pub fallback_used: bool,
    /// Measured only when timing is enabled; zero otherwise so that report
    /// files stay byte-reproducible.
    pub wall_ms: u64,
}

/// Whole-experiment outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    /// The exact configuration the run used, echoed for replay.
    pub config_echo: Vec<(String, String)>,
    pub rounds: Vec<RoundReport>,
    pub final_accuracy: f64,
    /// Mean accuracy over the last 10% of rounds (at least one).
    pub tail_mean: f64,
    /// Population standard deviation over the same tail window.
    pub tail_std: f64,
}

impl ExperimentReport {
    pub fn summarize(
        config_echo: Vec<(String, String)>,
        rounds: Vec<RoundReport>,
        final_accuracy: f64,
    ) -> ExperimentReport {
        let tail_len = (rounds.len() + 9) / 10;
        let tail: Vec<f64> = rounds
            .iter()
            .skip(rounds.len().saturating_sub(tail_len.max(1)))
            .map(|r| r.global_accuracy)
            .collect();
        let (tail_mean, tail_std) = if tail.is_empty() {
            (final_accuracy, 0.0)
        } else {
            let m = tail.iter().sum::<f64>() / tail.len() as f64;
            let v = tail.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / tail.len() as f64;
            (m, v.sqrt())
        };
        ExperimentReport {
            config_echo,
            rounds,
            final_accuracy,
            tail_mean,
            tail_std,
        }
    }

    /// Mean filtering F1 over rounds `>= from_round` (vacuous rounds count
    /// as their reported 1.0).
    pub fn mean_f1_from(&self, from_round: u64) -> f64 {
        let vals: Vec<f64> = self
            .rounds
            .iter()
            .filter(|r| r.round >= from_round)
            .map(|r| r.f1)
            .collect();
        if vals.is_empty() {
            f64::NAN
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    }
}
