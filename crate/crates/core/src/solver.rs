//! Equilibrium computation.
//!
//! All-Cobb-Douglas economies with unit endowments are solved in closed form:
//! their clearing equations `sum_i alpha_ij pi_i = pi_j` say that the price
//! vector is the stationary distribution of the row-stochastic `alpha`.
//! Everything else goes through damped multiplicative tatonnement
//!
//! ```text
//! pi_j <- pi_j * (demand_j / supply_j)^gamma,   then rescale onto the simplex
//! ```
//!
//! Whatever the route, the answer is certified by the excess-demand residual
//! reported in [`SolverReport`].

use std::collections::VecDeque;
use web_time::{Duration, Instant};

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::economy::{aggregate_demand, excess_demand, CesEconomy, PriceVector};
use crate::error::{RankError, Result};
use crate::linalg::{max_abs, max_abs_diff};
use crate::markov::{self, StationaryMethod, TransitionMatrix};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_GAMMA: f64 = 0.5;
pub const DEFAULT_MAX_ITERS: usize = 200_000;

/// Iterations between oscillation checks.
const OSCILLATION_WINDOW: usize = 50;
const MAX_STEP_HALVINGS: u32 = 4;
const TAIL_LEN: usize = 16;

/// Prices closer than this are reported as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    ClosedForm,
    Tatonnement,
    /// Closed form when every trader is Cobb-Douglas with a unit endowment,
    /// tatonnement otherwise.
    #[default]
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: SolverMethod,
    /// Bound on `||z(pi)||_inf`.
    pub tolerance: f64,
    /// Tatonnement step exponent in `(0, 1]`.
    pub gamma: f64,
    pub max_iters: usize,
    pub initial_prices: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: SolverMethod::Auto,
            tolerance: DEFAULT_TOLERANCE,
            gamma: DEFAULT_GAMMA,
            max_iters: DEFAULT_MAX_ITERS,
            initial_prices: None,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(RankError::invalid(format!(
                "tolerance = {} must be positive",
                self.tolerance
            )));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(RankError::invalid(format!(
                "gamma = {} is outside (0, 1]",
                self.gamma
            )));
        }
        if self.max_iters == 0 {
            return Err(RankError::invalid("max_iters must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub method: String,
    pub iterations: usize,
    /// `||z(pi)||_inf` for equilibria, `||P^T pi - pi||_inf` for chains.
    pub residual: f64,
    pub converged: bool,
    /// Wall time. Skipped by serialization.
    #[serde(skip)]
    pub elapsed: Duration,
}

pub fn solve(economy: &CesEconomy, config: &SolverConfig) -> Result<(PriceVector, SolverReport)> {
    config.validate()?;
    let method = match config.method {
        SolverMethod::Auto if economy.is_cobb_douglas() && economy.has_identity_endowment() => {
            SolverMethod::ClosedForm
        }
        SolverMethod::Auto => SolverMethod::Tatonnement,
        m => m,
    };
    match method {
        SolverMethod::ClosedForm => solve_cobb_douglas_with_tolerance(economy, config.tolerance),
        _ => solve_tatonnement(economy, config),
    }
}

/// Closed-form equilibrium of an all-Cobb-Douglas economy with unit
/// endowments: the invariant distribution of `alpha`, by linear solve.
pub fn solve_cobb_douglas(economy: &CesEconomy) -> Result<(PriceVector, SolverReport)> {
    solve_cobb_douglas_with_tolerance(economy, DEFAULT_TOLERANCE)
}

fn solve_cobb_douglas_with_tolerance(
    economy: &CesEconomy,
    tolerance: f64,
) -> Result<(PriceVector, SolverReport)> {
    let start = Instant::now();
    if !economy.is_cobb_douglas() {
        return Err(RankError::invalid(
            "closed form needs rho = 0 for every trader",
        ));
    }
    if !economy.has_identity_endowment() {
        return Err(RankError::invalid(
            "closed form needs trader i to own exactly one unit of good i",
        ));
    }
    let chain = TransitionMatrix::new(economy.alpha().to_vec()).map_err(|e| {
        RankError::invalid(format!(
            "Cobb-Douglas exponents must form a stochastic matrix: {e}"
        ))
    })?;
    let components = markov::strongly_connected_components(&chain.support_graph());
    if components.len() > 1 {
        return Err(RankError::NotStronglyConnected { components });
    }
    let (pi, _) =
        markov::stationary_distribution(&chain, StationaryMethod::LinearSolve, tolerance, 1)?;
    let prices = PriceVector::normalized(pi.into_vec())?;
    let residual = max_abs(&excess_demand(economy, prices.as_slice())?);
    if residual > tolerance {
        return Err(RankError::NotConverged {
            method: "closed_form",
            iterations: 1,
            residual,
            last_iterate: prices.into_vec(),
            residual_tail: vec![residual],
            hint: "the economy is badly conditioned; try tatonnement or a looser tolerance",
        });
    }
    let report = SolverReport {
        method: "closed_form".into(),
        iterations: 1,
        residual,
        converged: true,
        elapsed: start.elapsed(),
    };
    Ok((prices, report))
}

/// Damped multiplicative tatonnement from `config.initial_prices` (uniform by
/// default). The step is halved, and the iterate reset to the best one seen,
/// when a 50-iteration window fails to improve on the best residual of the
/// previous window (growth or a price cycle) or an update leaves the positive
/// orthant numerically.
///
/// For `rho < 0` economies the equilibrium need not be unique and the result
/// may depend on the starting point.
pub fn solve_tatonnement(
    economy: &CesEconomy,
    config: &SolverConfig,
) -> Result<(PriceVector, SolverReport)> {
    config.validate()?;
    let start = Instant::now();
    let n = economy.len();
    for j in 0..n {
        if economy.alpha().iter().all(|row| row[j] == 0.0) {
            return Err(RankError::invalid(format!(
                "good {j} has no demand at any price; its equilibrium price is on the boundary"
            )));
        }
    }
    let supply = economy.supply();
    let mut prices = match &config.initial_prices {
        Some(p) => PriceVector::normalized(p.clone())?.into_vec(),
        None => PriceVector::uniform(n).into_vec(),
    };

    let mut gamma = config.gamma;
    let mut halvings = 0;
    let mut best = (f64::INFINITY, prices.clone());
    // best residual of the previous window and of the current one
    let mut previous_window = f64::INFINITY;
    let mut current_window = f64::INFINITY;
    let mut tail = VecDeque::with_capacity(TAIL_LEN);
    let mut residual = f64::INFINITY;

    for iter in 0..config.max_iters {
        let demand = aggregate_demand(economy, &prices)?;
        let bad = demand.iter().position(|d| !d.is_finite());
        if let Some(good) = bad {
            if halvings >= MAX_STEP_HALVINGS || !best.0.is_finite() {
                return Err(RankError::NonFinite {
                    good,
                    iteration: iter,
                });
            }
            halvings += 1;
            gamma /= 2.0;
            prices = best.1.clone();
            (previous_window, current_window) = (f64::INFINITY, f64::INFINITY);
            debug!("non-finite demand at iteration {iter}; gamma -> {gamma}");
            continue;
        }

        residual = demand
            .iter()
            .zip(&supply)
            .fold(0.0_f64, |m, (d, s)| m.max((d - s).abs()));
        if tail.len() == TAIL_LEN {
            tail.pop_front();
        }
        tail.push_back(residual);
        if residual < best.0 {
            best = (residual, prices.clone());
        }
        current_window = current_window.min(residual);
        if residual <= config.tolerance {
            let report = SolverReport {
                method: "tatonnement".into(),
                iterations: iter,
                residual,
                converged: true,
                elapsed: start.elapsed(),
            };
            return Ok((PriceVector(prices), report));
        }

        if iter > 0 && iter % OSCILLATION_WINDOW == 0 {
            let stalled = current_window >= previous_window;
            (previous_window, current_window) = (current_window, f64::INFINITY);
            if stalled && halvings < MAX_STEP_HALVINGS {
                halvings += 1;
                gamma /= 2.0;
                prices = best.1.clone();
                (previous_window, current_window) = (f64::INFINITY, f64::INFINITY);
                debug!("no progress over window at iteration {iter}; gamma -> {gamma}");
                continue;
            }
        }

        for ((p, d), s) in prices.iter_mut().zip(&demand).zip(&supply) {
            *p *= (d / s).powf(gamma);
        }
        let total: f64 = prices.iter().sum();
        prices.iter_mut().for_each(|p| *p /= total);
        if prices.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            let good = prices
                .iter()
                .position(|p| !(p.is_finite() && *p > 0.0))
                .unwrap_or(0);
            if halvings >= MAX_STEP_HALVINGS {
                return Err(RankError::NonFinite {
                    good,
                    iteration: iter,
                });
            }
            halvings += 1;
            gamma /= 2.0;
            prices = best.1.clone();
            (previous_window, current_window) = (f64::INFINITY, f64::INFINITY);
        }
    }

    Err(RankError::NotConverged {
        method: "tatonnement",
        iterations: config.max_iters,
        residual,
        last_iterate: prices,
        residual_tail: tail.into(),
        hint: "reduce gamma or raise max_iters",
    })
}

/// Market-clearing certificate for a price vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumCheck {
    pub excess: Vec<f64>,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// All prices are positive, so every good must clear with equality.
pub fn verify_equilibrium(
    economy: &CesEconomy,
    prices: &[f64],
    tolerance: f64,
) -> Result<EquilibriumCheck> {
    let excess = excess_demand(economy, prices)?;
    let residual = max_abs(&excess);
    Ok(EquilibriumCheck {
        excess,
        residual,
        tolerance,
        passed: residual <= tolerance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadReport {
    pub solutions: Vec<Vec<f64>>,
    /// Largest pairwise max-norm distance between solutions.
    pub max_spread: f64,
    /// `10 * tolerance`.
    pub bound: f64,
    pub within_bound: bool,
    /// True when every `rho >= 0`, where the equilibrium is unique.
    pub uniqueness_expected: bool,
}

/// Runs tatonnement from `starts` seeded random interior price vectors and
/// reports how far apart the answers are.
pub fn multistart_probe(
    economy: &CesEconomy,
    config: &SolverConfig,
    starts: usize,
) -> Result<SpreadReport> {
    if starts == 0 {
        return Err(RankError::invalid("multistart needs at least one start"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = economy.len();
    let mut solutions = Vec::with_capacity(starts);
    for _ in 0..starts {
        let initial: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let run = SolverConfig {
            method: SolverMethod::Tatonnement,
            initial_prices: Some(initial),
            ..config.clone()
        };
        let (prices, _) = solve_tatonnement(economy, &run)?;
        solutions.push(prices.into_vec());
    }
    let mut max_spread = 0.0_f64;
    for (a, first) in solutions.iter().enumerate() {
        for second in &solutions[a + 1..] {
            max_spread = max_spread.max(max_abs_diff(first, second));
        }
    }
    let bound = 10.0 * config.tolerance;
    Ok(SpreadReport {
        solutions,
        max_spread,
        bound,
        within_bound: max_spread <= bound,
        uniqueness_expected: economy.rho().iter().all(|&r| r >= 0.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedEntry {
    /// 1-based position.
    pub rank: usize,
    pub index: usize,
    /// Shares its score, within the tie tolerance, with another entry.
    pub tied: bool,
}

/// Orders scores descending. Runs of scores within `tie_tol` of the run's
/// first element are tied and listed by index.
pub fn rank_order(scores: &[f64], tie_tol: f64) -> Vec<RankedEntry> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));

    let mut out = Vec::with_capacity(order.len());
    let mut start = 0;
    while start < order.len() {
        let head = scores[order[start]];
        let end = (start..order.len())
            .find(|&k| head - scores[order[k]] > tie_tol)
            .unwrap_or(order.len());
        let mut group = order[start..end].to_vec();
        group.sort_unstable();
        let tied = group.len() > 1;
        for (offset, index) in group.into_iter().enumerate() {
            out.push(RankedEntry {
                rank: start + offset + 1,
                index,
                tied,
            });
        }
        start = end;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::economy::{identity, markov_to_economy};

    fn counterexample() -> CesEconomy {
        CesEconomy::new(
            vec![
                vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
                vec![5.0 / 12.0, 1.0 / 6.0, 5.0 / 12.0],
                vec![0.25, 0.5, 0.25],
            ],
            vec![0.5; 3],
            identity(3),
        )
        .unwrap()
    }

    #[test]
    fn closed_form_two_cycle() {
        let e = CesEconomy::new(
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![0.0; 2],
            identity(2),
        )
        .unwrap();
        let (p, report) = solve_cobb_douglas(&e).unwrap();
        assert_eq!(p.as_slice(), &[0.5, 0.5]);
        assert!(report.converged && report.residual == 0.0);
    }

    #[test]
    fn closed_form_three_state_chain() {
        let p = TransitionMatrix::new(vec![
            vec![0.0, 0.5, 0.5],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap();
        let (prices, _) = solve_cobb_douglas(&markov_to_economy(&p).unwrap()).unwrap();
        for (a, b) in prices.as_slice().iter().zip([0.4, 0.2, 0.4]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn closed_form_rejects_ces() {
        assert!(solve_cobb_douglas(&counterexample()).is_err());
    }

    #[test]
    fn tatonnement_matches_closed_form_on_cobb_douglas() {
        let e = CesEconomy::new(
            vec![
                vec![0.1, 0.6, 0.3],
                vec![0.5, 0.2, 0.3],
                vec![0.7, 0.2, 0.1],
            ],
            vec![0.0; 3],
            identity(3),
        )
        .unwrap();
        let (closed, _) = solve_cobb_douglas(&e).unwrap();
        let (iter, report) = solve_tatonnement(&e, &SolverConfig::default()).unwrap();
        assert!(report.converged && report.residual <= 1e-10);
        assert!(max_abs_diff(closed.as_slice(), iter.as_slice()) <= 1e-8);
    }

    #[test]
    fn tatonnement_on_counterexample_is_not_uniform() {
        let e = counterexample();
        let (prices, report) = solve_tatonnement(&e, &SolverConfig::default()).unwrap();
        assert!(report.residual <= 1e-10);
        assert!(max_abs_diff(prices.as_slice(), &[1.0 / 3.0; 3]) > 1e-3);
        let check = verify_equilibrium(&e, prices.as_slice(), 1e-10).unwrap();
        assert!(check.passed);
        let uniform = verify_equilibrium(&e, &[1.0 / 3.0; 3], 1e-9).unwrap();
        assert!(!uniform.passed);
        assert!((uniform.excess[0] + 1.0 / 27.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_economy_is_uniform() {
        for rho in [-0.5, 0.0, 0.5, 0.9] {
            let e = CesEconomy::new(vec![vec![0.25; 4]; 4], vec![rho; 4], identity(4)).unwrap();
            let (p, _) = solve(&e, &SolverConfig::default()).unwrap();
            assert!(max_abs_diff(p.as_slice(), &[0.25; 4]) < 1e-12, "rho {rho}");
        }
    }

    #[test]
    fn steep_exponent_converges_after_step_halving() {
        let e = CesEconomy::new(
            vec![
                vec![0.1, 0.6, 0.3],
                vec![0.5, 0.2, 0.3],
                vec![0.7, 0.2, 0.1],
            ],
            vec![0.95; 3],
            identity(3),
        )
        .unwrap();
        let (p, report) = solve(&e, &SolverConfig::default()).unwrap();
        assert!(report.residual <= 1e-10);
        assert!(verify_equilibrium(&e, p.as_slice(), 1e-10).unwrap().passed);
    }

    #[test]
    fn non_convergence_is_reported() {
        let config = SolverConfig {
            max_iters: 3,
            ..SolverConfig::default()
        };
        match solve_tatonnement(&counterexample(), &config) {
            Err(RankError::NotConverged {
                iterations,
                last_iterate,
                residual_tail,
                ..
            }) => {
                assert_eq!(iterations, 3);
                assert_eq!(last_iterate.len(), 3);
                assert!(!residual_tail.is_empty());
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let e = counterexample();
        for config in [
            SolverConfig {
                tolerance: 0.0,
                ..Default::default()
            },
            SolverConfig {
                gamma: 1.5,
                ..Default::default()
            },
            SolverConfig {
                gamma: 0.0,
                ..Default::default()
            },
            SolverConfig {
                max_iters: 0,
                ..Default::default()
            },
        ] {
            assert!(solve(&e, &config).is_err());
        }
    }

    #[test]
    fn multistart_on_symmetric_economy() {
        let e = CesEconomy::new(vec![vec![1.0 / 3.0; 3]; 3], vec![0.25; 3], identity(3)).unwrap();
        let spread = multistart_probe(&e, &SolverConfig::default(), 3).unwrap();
        for s in &spread.solutions {
            assert!(max_abs_diff(s, &[1.0 / 3.0; 3]) < 1e-9);
        }
        assert!(spread.within_bound && spread.uniqueness_expected);
    }

    #[test]
    fn ties_are_grouped_by_index() {
        let order = rank_order(&[0.2, 0.4, 0.2 + 1e-12, 0.2], TIE_TOLERANCE);
        let indices: Vec<_> = order.iter().map(|e| e.index).collect();
        assert_eq!(indices, vec![1, 0, 2, 3]);
        assert_eq!(
            order.iter().map(|e| e.rank).collect::<Vec<_>>(),
            vec![1, 2, 3, 4]
        );
        assert_eq!(
            order.iter().map(|e| e.tied).collect::<Vec<_>>(),
            vec![false, true, true, true]
        );
    }
}
