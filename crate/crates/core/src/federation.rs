//! The FL orchestrator: per-client local updates, the round loop with its
//! windowed training history, attack injection under the configured threat
//! model, defense dispatch, and the global model step.

use crate::attacks::{
    self, AgrOracle, AttackConfig, AttackKind,
};
use crate::data::{self, Dataset, PartitionConfig};
use crate::defenses::{self, Selection};
use crate::error::{Result, SimError};
use crate::flguard::{self, FLGuardAssets, FLGuardHyper};
use crate::linalg::Matrix;
use crate::metrics::{evaluate_accuracy, ExperimentReport, FilterConfusion, RoundReport};
use crate::nn::{
    adam_step, backward_cross_entropy, flatten, sgd_step, AdamState, Architecture,
    ModelParameters, UpdateVector,
};
use crate::rng::{stream_rng, Stream};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::VecDeque;
use std::time::Instant;

/// Core federated-learning loop parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FLConfig {
    /// Number of FL rounds (R).
    pub rounds: u64,
    /// Total clients (N).
    pub n_clients: usize,
    /// Malicious clients (M).
    pub n_malicious: usize,
    /// Participating clients per round (P).
    pub participants: usize,
    /// Local SGD iterations per round (I).
    pub local_iters: usize,
    /// Local mini-batch size (b).
    pub batch: usize,
    /// Global learning rate applied to the aggregated delta.
    pub eta: f64,
    /// Local learning rate.
    pub alpha: f64,
    /// Contrastive refresh interval in rounds.
    pub k: u64,
    pub seed: u64,
}

impl FLConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_clients == 0 {
            return Err(SimError::Config("N must be >= 1".into()));
        }
        if 2 * self.n_malicious >= self.n_clients {
            return Err(SimError::Config(format!(
                "M/N < 0.5 required: M = {}, N = {}",
                self.n_malicious, self.n_clients
            )));
        }
        if self.participants == 0 || self.participants > self.n_clients {
            return Err(SimError::Config(format!(
                "P = {} must satisfy 1 <= P <= N = {}",
                self.participants, self.n_clients
            )));
        }
        if self.k == 0 {
            return Err(SimError::Config("k must be >= 1".into()));
        }
        if self.eta <= 0.0 || self.alpha <= 0.0 {
            return Err(SimError::Config(format!(
                "learning rates must be positive: eta = {}, alpha = {}",
                self.eta, self.alpha
            )));
        }
        if self.batch == 0 {
            return Err(SimError::Config("batch size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Which aggregation rule defends the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum DefenseConfig {
    FedAvg,
    TrimmedMean {
        m: usize,
    },
    MultiKrum {
        m_assumed: usize,
    },
    Bulyan {
        m_assumed: usize,
    },
    Dnc {
        m_assumed: usize,
        e: f64,
        iters: usize,
        subdim: usize,
    },
    FlTrust {
        root_size: usize,
    },
    FlGuard(FLGuardHyper),
}

/// A full experiment: loop parameters, model shape, data distribution,
/// adversary, and defense.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSetup {
    pub fl: FLConfig,
    /// Hidden layer widths of the global FCN.
    pub hidden: Vec<usize>,
    /// Non-IID concentration of the partition (q = 1/n_classes is IID).
    pub q: f64,
    pub attack: Option<AttackConfig>,
    pub defense: DefenseConfig,
    /// Measure per-round wall time. Off by default so that serialized
    /// reports are byte-reproducible.
    pub record_timing: bool,
    /// Key-value echo of the originating configuration, for replay.
    pub config_echo: Vec<(String, String)>,
}

/// One client's local training: `I` SGD steps over random mini-batches,
/// returning the flat delta `w_I - w`. Batches are drawn without
/// replacement when `b <= |D|`, with replacement otherwise.
pub fn local_update(
    w: &ModelParameters,
    local_iters: usize,
    dataset: &Dataset,
    batch: usize,
    alpha: f64,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateVector> {
    if dataset.is_empty() {
        return Err(SimError::Input("empty client dataset".into()));
    }
    let start = flatten(w);
    let mut local = w.clone();
    let n = dataset.len();
    for _ in 0..local_iters {
        let indices: Vec<usize> = if batch <= n {
            rand::seq::index::sample(rng, n, batch).into_vec()
        } else {
            (0..batch).map(|_| rng.gen_range(0..n)).collect()
        };
        let feats = dataset.features.select_rows(&indices);
        let labels: Vec<usize> = indices.iter().map(|&i| dataset.labels[i]).collect();
        let (_, grad) = backward_cross_entropy(&local, &feats, &labels)?;
        sgd_step(&mut local, &grad, alpha)?;
    }
    let end = flatten(&local);
    let delta: Vec<f64> = end
        .iter()
        .zip(start.iter())
        .map(|(a, b)| a - b)
        .collect();
    Ok(UpdateVector::from_vec(delta))
}

/// Unweighted column mean of the update matrix.
pub fn fed_avg(updates: &Matrix) -> Result<UpdateVector> {
    if updates.rows() == 0 {
        return Err(SimError::Aggregation("no updates to average".into()));
    }
    Ok(UpdateVector::from_vec(updates.column_means()))
}

/// Apply the aggregated delta: `w' = w + eta * g_agr`.
pub fn apply_global_update(
    w: &mut ModelParameters,
    g_agr: &UpdateVector,
    eta: f64,
) -> Result<()> {
    // a delta step is an SGD step with negated rate
    sgd_step(w, g_agr, -eta)
}

/// Live state of one experiment, advanced one round at a time.
pub struct ExperimentEngine {
    setup: ExperimentSetup,
    arch: Architecture,
    pub model: ModelParameters,
    client_data: Vec<Dataset>,
    malicious_ids: Vec<usize>,
    test: Dataset,
    /// Update matrices of the last `k` rounds (training window).
    pub history: VecDeque<Matrix>,
    pub assets: Option<FLGuardAssets>,
    root_dataset: Option<Dataset>,
    round: u64,
    pub warnings: Vec<String>,
}

impl ExperimentEngine {
    pub fn new(setup: ExperimentSetup, train: &Dataset, test: &Dataset) -> Result<ExperimentEngine> {
        setup.fl.validate()?;
        let fl = &setup.fl;
        let arch = Architecture::fcn(train.features.cols(), &setup.hidden, train.n_classes, 0.01);
        let mut init_rng = stream_rng(fl.seed, Stream::ModelInit, 0, 0);
        let model = ModelParameters::init(&arch, &mut init_rng)?;

        let mut client_data = data::partition(
            train,
            &PartitionConfig {
                n_clients: fl.n_clients,
                q: setup.q,
                seed: fl.seed,
            },
        )?;

        // the first M clients are malicious; under the contiguous group
        // assignment they concentrate in the low label groups, which keeps
        // their crafted updates structurally coherent
        let malicious_ids: Vec<usize> = (0..fl.n_malicious).collect();

        let mut warnings = Vec::new();

        // data-poisoning transforms happen once, up front
        if let Some(attack) = &setup.attack {
            match attack.kind {
                AttackKind::StaticLabelFlip => {
                    for &c in &malicious_ids {
                        client_data[c] = data::static_label_flip(&client_data[c]);
                    }
                }
                AttackKind::DynamicLabelFlip => {
                    let surrogate =
                        train_surrogate(&arch, &client_data, &malicious_ids, fl.seed)?;
                    for &c in &malicious_ids {
                        if client_data[c].is_empty() {
                            continue;
                        }
                        client_data[c] = data::dynamic_label_flip(&client_data[c], &surrogate)?;
                    }
                }
                _ => {}
            }
            if attack.kind.is_data_poisoning() && !attack.threat.is_data_poisoning() {
                warnings.push("label-flip attack configured under a model-poisoning threat model".into());
            }
        }

        let root_dataset = if let DefenseConfig::FlTrust { root_size } = setup.defense {
            let mut rng = stream_rng(fl.seed, Stream::Defense, 0, 9);
            let size = root_size.min(train.len());
            if size == 0 {
                return Err(SimError::Config("FLTrust root dataset is empty".into()));
            }
            let idx = rand::seq::index::sample(&mut rng, train.len(), size).into_vec();
            Some(train.subset(&idx))
        } else {
            None
        };

        Ok(ExperimentEngine {
            setup,
            arch,
            model,
            client_data,
            malicious_ids,
            test: test.clone(),
            history: VecDeque::new(),
            assets: None,
            root_dataset,
            round: 0,
            warnings,
        })
    }

    pub fn malicious_ids(&self) -> &[usize] {
        &self.malicious_ids
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn current_round(&self) -> u64 {
        self.round
    }

    /// Rows currently in the training window.
    pub fn window_rows(&self) -> usize {
        self.history.iter().map(|g| g.rows()).sum()
    }

    fn sample_participants(&mut self, round: u64) -> Vec<usize> {
        let fl = &self.setup.fl;
        let mut ids: Vec<usize> = if fl.participants < fl.n_clients {
            let mut rng = stream_rng(fl.seed, Stream::Participation, round, 0);
            rand::seq::index::sample(&mut rng, fl.n_clients, fl.participants).into_vec()
        } else {
            (0..fl.n_clients).collect()
        };
        ids.sort_unstable();
        // clients without data cannot produce an update
        let before = ids.len();
        ids.retain(|&c| !self.client_data[c].is_empty());
        if ids.len() < before {
            self.warnings
                .push(format!("round {round}: skipped {} empty clients", before - ids.len()));
        }
        ids
    }

    /// Advance one FL round.
    pub fn run_round(&mut self) -> Result<RoundReport> {
        let timer = Instant::now();
        let round = self.round + 1;
        let fl = self.setup.fl;
        let participants = self.sample_participants(round);
        if participants.is_empty() {
            return Err(SimError::Aggregation(format!(
                "round {round}: no participants with data"
            )));
        }

        // honest updates for every participant, in parallel; each client
        // draws only from its own (seed, round, client) stream
        let model = &self.model;
        let client_data = &self.client_data;
        let honest: Vec<UpdateVector> = participants
            .par_iter()
            .map(|&c| {
                let mut rng = stream_rng(fl.seed, Stream::Client, round, c as u64);
                local_update(model, fl.local_iters, &client_data[c], fl.batch, fl.alpha, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;

        let mal_rows: Vec<usize> = participants
            .iter()
            .enumerate()
            .filter(|(_, c)| self.malicious_ids.contains(c))
            .map(|(i, _)| i)
            .collect();

        let mut rows: Vec<Vec<f64>> = honest.into_iter().map(|u| u.into_vec()).collect();
        if let Some(attack) = self.setup.attack.clone() {
            if !attack.kind.is_data_poisoning() && !mal_rows.is_empty() {
                self.apply_model_attack(&attack, round, &mal_rows, &mut rows)?;
            }
        }
        let g = Matrix::from_rows(&rows)?;
        if !g.is_finite() {
            return Err(SimError::Aggregation(format!(
                "round {round}: non-finite update matrix (training diverged?)"
            )));
        }

        // training window holds the last k rounds including this one
        self.history.push_back(g.clone());
        while self.history.len() > fl.k as usize {
            self.history.pop_front();
        }

        // contrastive refresh on schedule
        if matches!(self.setup.defense, DefenseConfig::FlGuard(_)) && round % fl.k == 0 {
            if let DefenseConfig::FlGuard(hyper) = self.setup.defense {
                let window_rows: Vec<Vec<f64>> = self
                    .history
                    .iter()
                    .flat_map(|m| (0..m.rows()).map(move |i| m.row(i).to_vec()))
                    .collect();
                let window = Matrix::from_rows(&window_rows)?;
                let (assets, _) = flguard::train_contrastive(&window, &hyper, fl.seed, round)?;
                self.assets = Some(assets);
            }
        }

        let (selected_rows, aggregate, mut fallback_used) =
            match self.run_defense(&g, round) {
                Ok(v) => v,
                Err(SimError::Aggregation(msg)) => {
                    self.warnings
                        .push(format!("round {round}: defense failed ({msg}); fed-avg fallback"));
                    ((0..g.rows()).collect(), fed_avg(&g)?, true)
                }
                Err(other) => return Err(other),
            };
        if selected_rows.is_empty() {
            self.warnings
                .push(format!("round {round}: empty selection; fed-avg fallback"));
            let all: Vec<usize> = (0..g.rows()).collect();
            let agg = fed_avg(&g)?;
            fallback_used = true;
            apply_global_update(&mut self.model, &agg, fl.eta)?;
            return self.finish_round(round, &participants, &all, fallback_used, timer);
        }

        apply_global_update(&mut self.model, &aggregate, fl.eta)?;
        self.finish_round(round, &participants, &selected_rows, fallback_used, timer)
    }

    fn finish_round(
        &mut self,
        round: u64,
        participants: &[usize],
        selected_rows: &[usize],
        fallback_used: bool,
        timer: Instant,
    ) -> Result<RoundReport> {
        if !flatten(&self.model).is_finite() {
            return Err(SimError::Aggregation(format!(
                "round {round}: global model diverged"
            )));
        }
        let selected_ids: Vec<usize> = selected_rows.iter().map(|&i| participants[i]).collect();
        let mal_participants: Vec<usize> = participants
            .iter()
            .copied()
            .filter(|c| self.malicious_ids.contains(c))
            .collect();
        let confusion = FilterConfusion::count(&selected_ids, participants, &mal_participants);
        let scores = confusion.scores();
        let accuracy = evaluate_accuracy(&self.model, &self.test)?;
        let wall_ms = if self.setup.record_timing {
            timer.elapsed().as_millis() as u64
        } else {
            0
        };
        self.round = round;
        Ok(RoundReport {
            round,
            global_accuracy: accuracy,
            selected: selected_ids,
            participants: participants.to_vec(),
            confusion,
            f1: scores.f1,
            f1_vacuous: scores.vacuous,
            fallback_used,
            wall_ms,
        })
    }

    /// Overwrite malicious rows according to the attack. `rows` is indexed
    /// in participant order.
    fn apply_model_attack(
        &mut self,
        attack: &AttackConfig,
        round: u64,
        mal_rows: &[usize],
        rows: &mut [Vec<f64>],
    ) -> Result<()> {
        // visibility per threat model: all benign rows, or only the
        // malicious clients' own honest rows
        let visible_rows: Vec<Vec<f64>> = if attack.threat.knows_benign_updates() {
            (0..rows.len())
                .filter(|i| !mal_rows.contains(i))
                .map(|i| rows[i].clone())
                .collect()
        } else {
            mal_rows.iter().map(|&i| rows[i].clone()).collect()
        };
        let visible = Matrix::from_rows(&visible_rows)?;

        let crafted: Option<UpdateVector> = match attack.kind {
            AttackKind::SignFlip => {
                for &i in mal_rows {
                    let flipped = attacks::sign_flip(&rows[i]);
                    rows[i] = flipped.into_vec();
                }
                None
            }
            AttackKind::Lie => match attacks::lie_attack(&visible, attack.lie_z) {
                Ok(u) => Some(u),
                Err(SimError::Degenerate(msg)) => {
                    self.warnings
                        .push(format!("round {round}: LIE degenerate ({msg}); honest upload"));
                    None
                }
                Err(e) => return Err(e),
            },
            AttackKind::MinMax | AttackKind::MinSum => {
                let p = attacks::perturbation(attack.perturbation, &visible)?;
                let out = if attack.kind == AttackKind::MinMax {
                    attacks::min_max_attack(&visible, &p, &attack.search)
                } else {
                    attacks::min_sum_attack(&visible, &p, &attack.search)
                };
                match out {
                    Ok(c) => Some(c.update),
                    Err(SimError::Input(msg)) | Err(SimError::Degenerate(msg)) => {
                        self.warnings.push(format!(
                            "round {round}: {:?} degenerate ({msg}); honest upload",
                            attack.kind
                        ));
                        None
                    }
                    Err(e) => return Err(e),
                }
            }
            AttackKind::StatOpt | AttackKind::DynOpt => {
                let p = attacks::perturbation(attack.perturbation, &visible)?;
                let mut oracle = self.build_agr_oracle(round, &visible, mal_rows.len())?;
                let out = if attack.kind == AttackKind::StatOpt {
                    attacks::stat_opt_attack(&visible, &p, &attack.search, oracle.as_mut())
                } else {
                    attacks::dyn_opt_attack(&visible, &p, &attack.search, oracle.as_mut())
                }?;
                Some(out.update)
            }
            AttackKind::AdaptiveFlGuard => {
                if let Some(assets) = &self.assets {
                    let p = attacks::perturbation(attack.perturbation, &visible)?;
                    let out = attacks::adaptive_flguard_attack(
                        &visible,
                        assets,
                        mal_rows.len(),
                        &p,
                        &attack.search,
                    )?;
                    Some(out.update)
                } else {
                    // no contrastive models published yet; nothing to adapt to
                    None
                }
            }
            AttackKind::StaticLabelFlip | AttackKind::DynamicLabelFlip => None,
        };

        if let Some(g_m) = crafted {
            for &i in mal_rows {
                rows[i] = g_m.to_vec();
            }
        }
        Ok(())
    }

    /// Black-box acceptance oracle over the configured defense, as the
    /// AGR-aware attacks see it. Vector-wise rules accept when any malicious
    /// row survives selection; rules without a selection decision accept
    /// when the crafted rows displace the aggregate at least as much as
    /// plain mean-replay would.
    fn build_agr_oracle<'a>(
        &'a self,
        round: u64,
        visible: &'a Matrix,
        n_malicious: usize,
    ) -> Result<Box<AgrOracle<'a>>> {
        let defense = self.setup.defense;
        let fl = self.setup.fl;
        let candidate = move |g_m: &[f64]| -> Result<Matrix> {
            let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n_malicious + visible.rows());
            for _ in 0..n_malicious {
                rows.push(g_m.to_vec());
            }
            for i in 0..visible.rows() {
                rows.push(visible.row(i).to_vec());
            }
            Matrix::from_rows(&rows)
        };
        let any_malicious_selected = move |sel: &Selection| -> bool {
            sel.selected.iter().any(|&i| i < n_malicious)
        };

        match defense {
            DefenseConfig::MultiKrum { m_assumed } => Ok(Box::new(move |_, g_m| {
                candidate(g_m)
                    .and_then(|c| defenses::multi_krum(&c, m_assumed))
                    .map(|s| any_malicious_selected(&s))
                    .unwrap_or(false)
            })),
            DefenseConfig::Bulyan { m_assumed } => Ok(Box::new(move |_, g_m| {
                candidate(g_m)
                    .and_then(|c| defenses::bulyan(&c, m_assumed))
                    .map(|s| any_malicious_selected(&s))
                    .unwrap_or(false)
            })),
            DefenseConfig::Dnc {
                m_assumed,
                e,
                iters,
                subdim,
            } => {
                let base_rng = stream_rng(fl.seed, Stream::Attack, round, 1);
                Ok(Box::new(move |_, g_m| {
                    let mut rng = base_rng.clone();
                    candidate(g_m)
                        .and_then(|c| defenses::dnc(&c, m_assumed, e, iters, subdim, &mut rng))
                        .map(|s| any_malicious_selected(&s))
                        .unwrap_or(false)
                }))
            }
            DefenseConfig::FlGuard(_) => {
                if let Some(assets) = &self.assets {
                    Ok(Box::new(move |_, g_m| {
                        candidate(g_m)
                            .and_then(|c| flguard::filter_clients(&c, assets))
                            .map(|o| o.selected.iter().any(|&i| i < n_malicious))
                            .unwrap_or(false)
                    }))
                } else {
                    // cold start: everything is accepted
                    Ok(Box::new(|_, _| true))
                }
            }
            DefenseConfig::FedAvg
            | DefenseConfig::TrimmedMean { .. }
            | DefenseConfig::FlTrust { .. } => {
                // displacement criterion relative to the benign-only aggregate
                let agg = move |m: &Matrix| -> Result<UpdateVector> {
                    match defense {
                        DefenseConfig::FedAvg => fed_avg(m),
                        DefenseConfig::TrimmedMean { m: trim } => {
                            defenses::trimmed_mean(m, trim.min((m.rows() - 1) / 2))
                        }
                        DefenseConfig::FlTrust { .. } => {
                            // the attacker stands in the server's shoes with
                            // the benign mean as root update
                            let root = fed_avg(&candidate(&visible.column_means())?)?;
                            defenses::fltrust(m, &root).map(|s| s.aggregate)
                        }
                        _ => unreachable!(),
                    }
                };
                let benign_only = agg(visible)?;
                let mu = visible.column_means();
                let baseline = {
                    let c = candidate(&mu)?;
                    let with_mu = agg(&c)?;
                    displacement(&with_mu, &benign_only)
                };
                Ok(Box::new(move |_, g_m| {
                    let Ok(c) = candidate(g_m) else { return false };
                    match agg(&c) {
                        Ok(a) => displacement(&a, &benign_only) >= baseline - 1e-12,
                        Err(_) => false,
                    }
                }))
            }
        }
    }

    /// Dispatch the defense on this round's matrix. Returns the selected
    /// row indices, the aggregate, and whether a fallback was taken.
    fn run_defense(&self, g: &Matrix, round: u64) -> Result<(Vec<usize>, UpdateVector, bool)> {
        let all: Vec<usize> = (0..g.rows()).collect();
        let fl = self.setup.fl;
        match &self.setup.defense {
            DefenseConfig::FedAvg => Ok((all, fed_avg(g)?, false)),
            DefenseConfig::TrimmedMean { m } => Ok((all, defenses::trimmed_mean(g, *m)?, false)),
            DefenseConfig::MultiKrum { m_assumed } => {
                let sel = defenses::multi_krum(g, *m_assumed)?;
                Ok((sel.selected, sel.aggregate, false))
            }
            DefenseConfig::Bulyan { m_assumed } => {
                let sel = defenses::bulyan(g, *m_assumed)?;
                Ok((sel.selected, sel.aggregate, false))
            }
            DefenseConfig::Dnc {
                m_assumed,
                e,
                iters,
                subdim,
            } => {
                let mut rng = stream_rng(fl.seed, Stream::Defense, round, 0);
                let sel = defenses::dnc(g, *m_assumed, *e, *iters, *subdim, &mut rng)?;
                Ok((sel.selected, sel.aggregate, false))
            }
            DefenseConfig::FlTrust { .. } => {
                let root = self
                    .root_dataset
                    .as_ref()
                    .expect("root dataset built at init");
                let mut rng = stream_rng(fl.seed, Stream::Defense, round, 1);
                let g0 = local_update(
                    &self.model,
                    fl.local_iters,
                    root,
                    fl.batch,
                    fl.alpha,
                    &mut rng,
                )?;
                let sel = defenses::fltrust(g, &g0)?;
                if sel.selected.is_empty() {
                    // all trust scores were clipped; zero aggregate stalls
                    // the round rather than failing it
                    return Ok((sel.selected, sel.aggregate, false));
                }
                Ok((sel.selected, sel.aggregate, false))
            }
            DefenseConfig::FlGuard(_) => match &self.assets {
                None => Ok((all, fed_avg(g)?, false)),
                Some(assets) => {
                    let outcome = flguard::filter_clients(g, assets)?;
                    let aggregate = flguard::flguard_aggregate(g, &outcome.selected)?;
                    Ok((outcome.selected, aggregate, outcome.fallback_used))
                }
            },
        }
    }

    /// Run all configured rounds and assemble the report.
    pub fn run(mut self) -> Result<ExperimentReport> {
        let mut rounds = Vec::with_capacity(self.setup.fl.rounds as usize);
        for _ in 0..self.setup.fl.rounds {
            rounds.push(self.run_round()?);
        }
        let final_accuracy = match rounds.last() {
            Some(r) => r.global_accuracy,
            None => evaluate_accuracy(&self.model, &self.test)?,
        };
        Ok(ExperimentReport::summarize(
            self.setup.config_echo.clone(),
            rounds,
            final_accuracy,
        ))
    }
}

fn displacement(a: &UpdateVector, b: &UpdateVector) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Surrogate classifier for the dynamic label-flip: trained on the pooled
/// (unpoisoned) data of the malicious clients with Adam.
fn train_surrogate(
    arch: &Architecture,
    client_data: &[Dataset],
    malicious_ids: &[usize],
    seed: u64,
) -> Result<ModelParameters> {
    let mut feats: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut n_classes = 0;
    for &c in malicious_ids {
        let ds = &client_data[c];
        n_classes = n_classes.max(ds.n_classes);
        for i in 0..ds.len() {
            feats.push(ds.features.row(i).to_vec());
            labels.push(ds.labels[i]);
        }
    }
    if feats.is_empty() {
        return Err(SimError::Input(
            "dynamic label flip: malicious clients hold no data".into(),
        ));
    }
    let pooled = Dataset::new(Matrix::from_rows(&feats)?, labels, n_classes)?;
    let mut rng = stream_rng(seed, Stream::Attack, 0, 0);
    let mut model = ModelParameters::init(arch, &mut rng)?;
    let mut opt = AdamState::new(model.param_count(), 0.01);
    let batch = pooled.len().min(32);
    for _ in 0..200 {
        let indices: Vec<usize> = rand::seq::index::sample(&mut rng, pooled.len(), batch).into_vec();
        let f = pooled.features.select_rows(&indices);
        let l: Vec<usize> = indices.iter().map(|&i| pooled.labels[i]).collect();
        let (_, grad) = backward_cross_entropy(&model, &f, &l)?;
        adam_step(&mut opt, &mut model, &grad)?;
    }
    Ok(model)
}

/// Build the train/test pair plus engine, run it, and return the report.
/// Convenience for callers that do not need round-by-round control.
pub fn run_experiment(
    setup: ExperimentSetup,
    train: &Dataset,
    test: &Dataset,
) -> Result<ExperimentReport> {
    ExperimentEngine::new(setup, train, test)?.run()
}
