//! Malicious-update generators: perturbation vectors, LIE, Min-Max, Min-Sum,
//! the static/dynamic AGR-aware optimization attacks, the adaptive attack on
//! the contrastive filter, and sign flipping.
//!
//! Every generator works from the matrix of benign rows *visible* to the
//! adversary under its threat model; the caller decides what is visible.
//! Crafted updates always have the benign dimension and finite entries.

use crate::error::{Result, SimError};
use crate::flguard::{self, FLGuardAssets};
use crate::linalg::{self, Matrix};
use crate::nn::UpdateVector;

/// Adversary knowledge/capability classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum ThreatModel {
    T1,
    T2,
    T3,
    T4,
    T5,
}

impl ThreatModel {
    /// Whether benign clients' updates of the current round are visible.
    pub fn knows_benign_updates(self) -> bool {
        matches!(self, ThreatModel::T1 | ThreatModel::T3)
    }

    /// Whether the server's aggregation rule can be queried while crafting.
    pub fn knows_agr(self) -> bool {
        matches!(self, ThreatModel::T1 | ThreatModel::T2)
    }

    /// Model poisoning (T1-T4) or data poisoning (T5).
    pub fn is_data_poisoning(self) -> bool {
        matches!(self, ThreatModel::T5)
    }
}

/// Direction added to the benign mean as `g_m = g_b + gamma * p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Perturbation {
    /// Inverse unit vector: `-g_b / ||g_b||`.
    InverseUnit,
    /// Inverse sign: `-sgn(mean)` per dimension.
    InverseSign,
}

/// The attack families this engine can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum AttackKind {
    SignFlip,
    Lie,
    MinMax,
    MinSum,
    StatOpt,
    DynOpt,
    AdaptiveFlGuard,
    StaticLabelFlip,
    DynamicLabelFlip,
}

impl AttackKind {
    pub fn is_data_poisoning(self) -> bool {
        matches!(
            self,
            AttackKind::StaticLabelFlip | AttackKind::DynamicLabelFlip
        )
    }

    /// Whether the attack queries the server's aggregation rule while
    /// crafting (and so requires an AGR-aware threat model).
    pub fn needs_agr_knowledge(self) -> bool {
        matches!(
            self,
            AttackKind::StatOpt | AttackKind::DynOpt | AttackKind::AdaptiveFlGuard
        )
    }
}

/// A fully specified adversary: what it runs, what it may see, and its
/// search parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct AttackConfig {
    pub kind: AttackKind,
    pub threat: ThreatModel,
    pub perturbation: Perturbation,
    pub search: GammaSearch,
    pub lie_z: f64,
}

/// Scale-factor search parameters shared by the optimizing attacks.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GammaSearch {
    pub gamma_init: f64,
    /// Relative convergence threshold on the located scale.
    pub threshold: f64,
    pub max_iters: u32,
}

impl Default for GammaSearch {
    fn default() -> GammaSearch {
        GammaSearch {
            gamma_init: 10.0,
            threshold: 1e-3,
            max_iters: 60,
        }
    }
}

const GAMMA_FLOOR: f64 = 1e-6;

/// A crafted malicious update together with the scale that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct CraftedUpdate {
    pub update: UpdateVector,
    pub gamma: f64,
    /// Set when the search fell back to a degenerate scale (nothing accepted
    /// above the floor, or the constraint was unsatisfiable).
    pub fallback: bool,
}

fn visible_mean(visible: &Matrix) -> Result<Vec<f64>> {
    if visible.rows() == 0 {
        return Err(SimError::Input("no visible benign updates".into()));
    }
    Ok(visible.column_means())
}

/// Inverse unit vector perturbation: `p = -g_b / ||g_b||_2`.
pub fn perturbation_uv(visible: &Matrix) -> Result<Vec<f64>> {
    let mut p = visible_mean(visible)?;
    let norm = linalg::l2_norm(&p);
    if norm == 0.0 {
        return Err(SimError::Degenerate(
            "benign mean has zero norm; inverse unit vector undefined".into(),
        ));
    }
    linalg::scale(-1.0 / norm, &mut p);
    Ok(p)
}

/// Inverse sign perturbation: `p_j = -sign(mean_j)` with `sign(0) = 0`.
pub fn perturbation_sgn(visible: &Matrix) -> Result<Vec<f64>> {
    let mut p = visible_mean(visible)?;
    for x in &mut p {
        *x = if *x > 0.0 {
            -1.0
        } else if *x < 0.0 {
            1.0
        } else {
            0.0
        };
    }
    Ok(p)
}

pub fn perturbation(kind: Perturbation, visible: &Matrix) -> Result<Vec<f64>> {
    match kind {
        Perturbation::InverseUnit => perturbation_uv(visible),
        Perturbation::InverseSign => perturbation_sgn(visible),
    }
}

/// Little-Is-Enough: `g_m = mu + z * sigma` per dimension, with the column
/// mean and population standard deviation of the visible rows.
pub fn lie_attack(visible: &Matrix, z: f64) -> Result<UpdateVector> {
    if visible.rows() < 2 {
        return Err(SimError::Degenerate(
            "LIE needs at least 2 visible rows for a defined variance".into(),
        ));
    }
    let mu = visible.column_means();
    let sigma = visible.column_stds(&mu);
    let g_m = mu
        .iter()
        .zip(&sigma)
        .map(|(&m, &s)| m + z * s)
        .collect();
    Ok(UpdateVector::from_vec(g_m))
}

fn craft(mu: &[f64], p: &[f64], gamma: f64) -> Vec<f64> {
    let mut g = mu.to_vec();
    linalg::axpy(gamma, p, &mut g);
    g
}

/// Largest gamma satisfying a monotone feasibility bound, by bisection on
/// `[0, gamma_init]` with doubling expansion when the initial scale is
/// already feasible. The returned value is feasible; the search either
/// converged to within `threshold` (relative) of the boundary or exhausted
/// its iteration budget.
fn largest_gamma_with_bound(
    mut feasible: impl FnMut(f64) -> bool,
    search: &GammaSearch,
) -> (f64, bool) {
    let mut budget = search.max_iters;
    macro_rules! spend {
        ($g:expr) => {{
            budget = budget.saturating_sub(1);
            feasible($g)
        }};
    }

    if !spend!(0.0) {
        return (0.0, true);
    }
    let mut lo = 0.0;
    let mut hi = search.gamma_init;
    if spend!(hi) {
        // expand until the bound breaks or the expansion budget runs out
        for _ in 0..10 {
            if budget == 0 {
                return (hi, false);
            }
            let next = hi * 2.0;
            if spend!(next) {
                hi = next;
            } else {
                lo = hi;
                hi = next;
                break;
            }
        }
        if lo == 0.0 {
            // still feasible after all doublings
            return (hi, false);
        }
    }
    while budget > 0 && (lo == 0.0 || hi - lo > search.threshold * lo) {
        let mid = 0.5 * (lo + hi);
        if spend!(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, false)
}

/// Min-Max: the largest gamma such that the crafted update is no farther
/// from any visible row than the two most distant visible rows are from
/// each other.
pub fn min_max_attack(
    visible: &Matrix,
    p: &[f64],
    search: &GammaSearch,
) -> Result<CraftedUpdate> {
    if visible.rows() < 2 {
        return Err(SimError::Input(
            "min-max needs at least 2 visible rows".into(),
        ));
    }
    let mu = visible_mean(visible)?;
    let mut bound: f64 = 0.0;
    for i in 0..visible.rows() {
        for j in (i + 1)..visible.rows() {
            bound = bound.max(linalg::squared_distance(visible.row(i), visible.row(j)));
        }
    }
    let feasible = |gamma: f64| {
        let g_m = craft(&mu, p, gamma);
        (0..visible.rows())
            .map(|i| linalg::squared_distance(&g_m, visible.row(i)))
            .fold(0.0, f64::max)
            <= bound
    };
    let (gamma, fallback) = largest_gamma_with_bound(feasible, search);
    Ok(CraftedUpdate {
        update: UpdateVector::from_vec(craft(&mu, p, gamma)),
        gamma,
        fallback,
    })
}

/// Min-Sum: the largest gamma such that the crafted update's sum of squared
/// distances to all visible rows stays below the worst such sum among the
/// visible rows themselves.
pub fn min_sum_attack(
    visible: &Matrix,
    p: &[f64],
    search: &GammaSearch,
) -> Result<CraftedUpdate> {
    if visible.rows() < 2 {
        return Err(SimError::Input(
            "min-sum needs at least 2 visible rows".into(),
        ));
    }
    let mu = visible_mean(visible)?;
    let mut bound: f64 = 0.0;
    for i in 0..visible.rows() {
        let sum: f64 = (0..visible.rows())
            .map(|j| linalg::squared_distance(visible.row(i), visible.row(j)))
            .sum();
        bound = bound.max(sum);
    }
    let feasible = |gamma: f64| {
        let g_m = craft(&mu, p, gamma);
        let sum: f64 = (0..visible.rows())
            .map(|i| linalg::squared_distance(&g_m, visible.row(i)))
            .sum();
        sum <= bound
    };
    let (gamma, fallback) = largest_gamma_with_bound(feasible, search);
    Ok(CraftedUpdate {
        update: UpdateVector::from_vec(craft(&mu, p, gamma)),
        gamma,
        fallback,
    })
}

/// Acceptance oracle for the AGR-aware attacks: given the candidate scale
/// and the crafted row, report whether the aggregation rule would let the
/// malicious clients participate.
pub type AgrOracle<'a> = dyn FnMut(f64, &[f64]) -> bool + 'a;

/// STAT-OPT: start at `gamma_init` and halve until the crafted update is
/// accepted by the aggregation rule. Falls back to the floor scale with a
/// warning flag when nothing is accepted.
pub fn stat_opt_attack(
    visible: &Matrix,
    p: &[f64],
    search: &GammaSearch,
    accepts: &mut AgrOracle,
) -> Result<CraftedUpdate> {
    let mu = visible_mean(visible)?;
    let mut gamma = search.gamma_init;
    for _ in 0..search.max_iters {
        let g_m = craft(&mu, p, gamma);
        if accepts(gamma, &g_m) {
            return Ok(CraftedUpdate {
                update: UpdateVector::from_vec(g_m),
                gamma,
                fallback: false,
            });
        }
        gamma *= 0.5;
        if gamma < GAMMA_FLOOR {
            break;
        }
    }
    Ok(CraftedUpdate {
        update: UpdateVector::from_vec(craft(&mu, p, GAMMA_FLOOR)),
        gamma: GAMMA_FLOOR,
        fallback: true,
    })
}

/// DYN-OPT: find the largest accepted gamma. Runs the STAT-OPT halving to
/// locate a feasible start (so the result never falls below STAT-OPT's),
/// expands upward if the initial scale was already accepted, then bisects
/// to within the relative threshold.
pub fn dyn_opt_attack(
    visible: &Matrix,
    p: &[f64],
    search: &GammaSearch,
    accepts: &mut AgrOracle,
) -> Result<CraftedUpdate> {
    let mu = visible_mean(visible)?;
    let mut budget = search.max_iters as i64;
    fn try_gamma(
        mu: &[f64],
        p: &[f64],
        gamma: f64,
        budget: &mut i64,
        accepts: &mut AgrOracle,
    ) -> bool {
        *budget -= 1;
        let g_m = craft(mu, p, gamma);
        accepts(gamma, &g_m)
    }

    // halving phase
    let mut lo = search.gamma_init;
    let mut found = false;
    while budget > 0 {
        if try_gamma(&mu, p, lo, &mut budget, accepts) {
            found = true;
            break;
        }
        lo *= 0.5;
        if lo < GAMMA_FLOOR {
            break;
        }
    }
    if !found {
        return Ok(CraftedUpdate {
            update: UpdateVector::from_vec(craft(&mu, p, GAMMA_FLOOR)),
            gamma: GAMMA_FLOOR,
            fallback: true,
        });
    }

    // upper bracket: the previous halving trial was rejected, unless we
    // accepted at gamma_init, in which case expand by doubling
    let mut hi = lo * 2.0;
    if lo == search.gamma_init {
        let mut bracketed = false;
        for _ in 0..10 {
            if budget <= 0 {
                break;
            }
            if try_gamma(&mu, p, hi, &mut budget, accepts) {
                lo = hi;
                hi *= 2.0;
            } else {
                bracketed = true;
                break;
            }
        }
        if !bracketed {
            return Ok(CraftedUpdate {
                update: UpdateVector::from_vec(craft(&mu, p, lo)),
                gamma: lo,
                fallback: false,
            });
        }
    }

    while budget > 0 && hi - lo > search.threshold * lo {
        let mid = 0.5 * (lo + hi);
        if try_gamma(&mu, p, mid, &mut budget, accepts) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(CraftedUpdate {
        update: UpdateVector::from_vec(craft(&mu, p, lo)),
        gamma: lo,
        fallback: false,
    })
}

/// Adaptive attack on the contrastive filter: DYN-OPT where the oracle runs
/// the real filtering pipeline on the would-be round matrix (the crafted
/// row repeated for every malicious client, followed by the visible rows)
/// and accepts when at least one malicious client survives filtering.
pub fn adaptive_flguard_attack(
    visible: &Matrix,
    assets: &FLGuardAssets,
    n_malicious: usize,
    p: &[f64],
    search: &GammaSearch,
) -> Result<CraftedUpdate> {
    if n_malicious == 0 {
        return Err(SimError::Input("no malicious clients to craft for".into()));
    }
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n_malicious + visible.rows());
    let mut oracle = |_gamma: f64, g_m: &[f64]| {
        rows.clear();
        for _ in 0..n_malicious {
            rows.push(g_m.to_vec());
        }
        for i in 0..visible.rows() {
            rows.push(visible.row(i).to_vec());
        }
        let candidate = Matrix::from_rows(&rows).expect("uniform row length");
        match flguard::filter_clients(&candidate, assets) {
            Ok(outcome) => outcome.selected.iter().any(|&i| i < n_malicious),
            Err(_) => false,
        }
    };
    dyn_opt_attack(visible, p, search, &mut oracle)
}

/// Sign flip: the exact negation of the client's own honest update.
pub fn sign_flip(own_update: &[f64]) -> UpdateVector {
    UpdateVector::from_vec(own_update.iter().map(|&x| -x).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use rand::Rng;

    fn matrix(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn uv_three_four_five() {
        let v = matrix(&[&[3.0, 4.0]]);
        let p = perturbation_uv(&v).unwrap();
        assert!((p[0] + 0.6).abs() < 1e-15);
        assert!((p[1] + 0.8).abs() < 1e-15);
    }

    #[test]
    fn uv_unit_norm_and_direction() {
        let mut rng = stream_rng(4, Stream::Attack, 0, 0);
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..7).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let v = Matrix::from_rows(&rows).unwrap();
        let p = perturbation_uv(&v).unwrap();
        assert!((linalg::l2_norm(&p) - 1.0).abs() < 1e-12);
        let mu = v.column_means();
        let d = linalg::dot(&p, &mu);
        assert!((d + linalg::l2_norm(&mu)).abs() < 1e-12);
    }

    #[test]
    fn uv_zero_mean_is_degenerate() {
        let v = matrix(&[&[1.0, -1.0], &[-1.0, 1.0]]);
        assert!(matches!(
            perturbation_uv(&v).unwrap_err(),
            SimError::Degenerate(_)
        ));
    }

    #[test]
    fn sgn_values_and_odd_symmetry() {
        let v = matrix(&[&[0.2, -0.5, 0.0]]);
        assert_eq!(perturbation_sgn(&v).unwrap(), vec![-1.0, 1.0, 0.0]);

        let v2 = matrix(&[&[0.4, 0.8], &[0.2, 0.1]]);
        let neg = matrix(&[&[-0.4, -0.8], &[-0.2, -0.1]]);
        let p = perturbation_sgn(&v2).unwrap();
        let pn = perturbation_sgn(&neg).unwrap();
        assert_eq!(p.iter().map(|x| -x).collect::<Vec<_>>(), pn);
        assert!(p.iter().all(|&x| x == -1.0));
    }

    #[test]
    fn lie_hand_oracle() {
        let v = matrix(&[&[0.0, 0.0], &[2.0, 2.0]]);
        let g = lie_attack(&v, 1.0).unwrap();
        assert_eq!(g.as_slice(), &[2.0, 2.0]); // mu=1, population sigma=1

        let g0 = lie_attack(&v, 0.0).unwrap();
        assert_eq!(g0.as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn lie_deviation_is_z_sigma() {
        let mut rng = stream_rng(5, Stream::Attack, 0, 0);
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let v = Matrix::from_rows(&rows).unwrap();
        let z = -1.7;
        let g = lie_attack(&v, z).unwrap();
        let mu = v.column_means();
        let sigma = v.column_stds(&mu);
        for j in 0..4 {
            assert!(((g[j] - mu[j]).abs() - z.abs() * sigma[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn lie_single_row_errors() {
        let v = matrix(&[&[1.0]]);
        assert!(matches!(
            lie_attack(&v, 1.0).unwrap_err(),
            SimError::Degenerate(_)
        ));
    }

    #[test]
    fn min_max_zero_perturbation_returns_mean() {
        let v = matrix(&[&[0.0, 0.0], &[2.0, 0.0]]);
        let out = min_max_attack(&v, &[0.0, 0.0], &GammaSearch::default()).unwrap();
        assert_eq!(out.update.as_slice(), &[1.0, 0.0]);
        assert!(!out.fallback);
    }

    #[test]
    fn min_max_closed_form_geometry() {
        // rows (0,0), (2,0); p = (0,-1): distance from (1,-g) to each row is
        // sqrt(1+g^2) <= 2  =>  g* = sqrt(3)
        let v = matrix(&[&[0.0, 0.0], &[2.0, 0.0]]);
        let out = min_max_attack(&v, &[0.0, -1.0], &GammaSearch::default()).unwrap();
        let expected = 3f64.sqrt();
        assert!(
            (out.gamma - expected).abs() / expected < 1e-3,
            "gamma {} vs sqrt(3)",
            out.gamma
        );
    }

    #[test]
    fn min_sum_scalar_quadratic() {
        // rows [0], [2]; p=[-1]: 2 + 2g^2 <= 4 => g* = 1
        let v = matrix(&[&[0.0], &[2.0]]);
        let out = min_sum_attack(&v, &[-1.0], &GammaSearch::default()).unwrap();
        assert!((out.gamma - 1.0).abs() < 1e-3, "gamma {}", out.gamma);
    }

    #[test]
    fn min_max_min_sum_bounds_hold_fuzzed() {
        let mut rng = stream_rng(6, Stream::Attack, 0, 0);
        for case in 0..200 {
            let n = rng.gen_range(2..7);
            let d = rng.gen_range(1..5);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect())
                .collect();
            let v = Matrix::from_rows(&rows).unwrap();
            let p: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();

            let mm = min_max_attack(&v, &p, &GammaSearch::default()).unwrap();
            let mut max_pair: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    max_pair =
                        max_pair.max(linalg::squared_distance(v.row(i), v.row(j)));
                }
            }
            let max_dist = (0..n)
                .map(|i| linalg::squared_distance(mm.update.as_slice(), v.row(i)))
                .fold(0.0, f64::max);
            assert!(
                max_dist <= max_pair * (1.0 + 1e-9),
                "case {case}: min-max bound violated"
            );

            let ms = min_sum_attack(&v, &p, &GammaSearch::default()).unwrap();
            let bound = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| linalg::squared_distance(v.row(i), v.row(j)))
                        .sum::<f64>()
                })
                .fold(0.0, f64::max);
            let sum: f64 = (0..n)
                .map(|i| linalg::squared_distance(ms.update.as_slice(), v.row(i)))
                .sum();
            assert!(
                sum <= bound * (1.0 + 1e-9),
                "case {case}: min-sum bound violated"
            );
        }
    }

    #[test]
    fn stat_opt_accept_everything_keeps_init() {
        let v = matrix(&[&[1.0], &[3.0]]);
        let p = [1.0];
        let mut oracle = |_: f64, _: &[f64]| true;
        let out = stat_opt_attack(&v, &p, &GammaSearch::default(), &mut oracle).unwrap();
        assert_eq!(out.gamma, 10.0);
    }

    #[test]
    fn stat_opt_halving_trace() {
        let v = matrix(&[&[1.0], &[3.0]]);
        let p = [1.0];
        let search = GammaSearch {
            gamma_init: 8.0,
            ..GammaSearch::default()
        };
        let mut oracle = |gamma: f64, _: &[f64]| gamma <= 1.0;
        let out = stat_opt_attack(&v, &p, &search, &mut oracle).unwrap();
        assert!(out.gamma > 0.5 && out.gamma <= 1.0, "gamma {}", out.gamma);
        assert_eq!(out.gamma, 1.0); // 8 -> 4 -> 2 -> 1
    }

    #[test]
    fn stat_opt_nothing_accepted_floors() {
        let v = matrix(&[&[1.0], &[3.0]]);
        let p = [1.0];
        let mut oracle = |_: f64, _: &[f64]| false;
        let out = stat_opt_attack(&v, &p, &GammaSearch::default(), &mut oracle).unwrap();
        assert!(out.fallback);
        assert_eq!(out.gamma, 1e-6);
    }

    #[test]
    fn dyn_opt_converges_to_boundary() {
        let v = matrix(&[&[1.0], &[3.0]]);
        let p = [1.0];
        let mut oracle = |gamma: f64, _: &[f64]| gamma <= 1.0;
        let out = dyn_opt_attack(&v, &p, &GammaSearch::default(), &mut oracle).unwrap();
        assert!(
            out.gamma <= 1.0 && out.gamma >= 1.0 - 1e-3,
            "gamma {}",
            out.gamma
        );
    }

    #[test]
    fn dyn_opt_expands_above_init() {
        let v = matrix(&[&[1.0], &[3.0]]);
        let p = [1.0];
        let mut oracle = |gamma: f64, _: &[f64]| gamma <= 25.0;
        let out = dyn_opt_attack(&v, &p, &GammaSearch::default(), &mut oracle).unwrap();
        assert!(
            out.gamma <= 25.0 && out.gamma >= 25.0 * (1.0 - 1e-3),
            "gamma {}",
            out.gamma
        );
    }

    #[test]
    fn dyn_at_least_stat() {
        let v = matrix(&[&[1.0], &[3.0]]);
        let p = [1.0];
        for boundary in [0.3, 1.0, 2.5, 7.9] {
            let mut o1 = |gamma: f64, _: &[f64]| gamma <= boundary;
            let mut o2 = |gamma: f64, _: &[f64]| gamma <= boundary;
            let stat = stat_opt_attack(&v, &p, &GammaSearch::default(), &mut o1).unwrap();
            let dynv = dyn_opt_attack(&v, &p, &GammaSearch::default(), &mut o2).unwrap();
            assert!(
                dynv.gamma >= stat.gamma,
                "boundary {boundary}: dyn {} < stat {}",
                dynv.gamma,
                stat.gamma
            );
        }
    }

    #[test]
    fn sign_flip_examples() {
        let g = sign_flip(&[1.0, -2.0, 0.0]);
        assert_eq!(g.as_slice(), &[-1.0, 2.0, 0.0]);
        // involution and norm preservation
        let back = sign_flip(g.as_slice());
        assert_eq!(back.as_slice(), &[1.0, -2.0, 0.0]);
        assert_eq!(linalg::l2_norm(g.as_slice()), linalg::l2_norm(back.as_slice()));
    }

    #[test]
    fn threat_model_flags_match_capability_table() {
        assert!(ThreatModel::T1.knows_benign_updates() && ThreatModel::T1.knows_agr());
        assert!(!ThreatModel::T2.knows_benign_updates() && ThreatModel::T2.knows_agr());
        assert!(ThreatModel::T3.knows_benign_updates() && !ThreatModel::T3.knows_agr());
        assert!(!ThreatModel::T4.knows_benign_updates() && !ThreatModel::T4.knows_agr());
        assert!(ThreatModel::T5.is_data_poisoning());
        assert!(!ThreatModel::T4.is_data_poisoning());
    }
}
