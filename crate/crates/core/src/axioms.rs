//! Executable ranking axioms.
//!
//! Each check builds the relevant problem, runs the full ranking pipeline and
//! returns an [`AxiomVerdict`]. Failures always carry the prices and indices
//! that witness them; checks whose preconditions do not hold return
//! [`Outcome::NotApplicable`] rather than failing.
//!
//! Weak additivity has no check of its own: it specializes uniformity, so a
//! failed uniformity check on a regular problem already rules it out.

use serde::{Deserialize, Serialize};

use crate::economy::{build_economy, excess_demand, CesEconomy};
use crate::error::{RankError, Result};
use crate::linalg::max_abs_diff;
use crate::problem::{is_regular, normalize_preferences, RankingProblem, REGULARITY_TOL};
use crate::solver::{solve, SolverConfig};

/// Ranking equals uniform within this bound for minimal fairness.
pub const FAIRNESS_TOL: f64 = 1e-9;
/// Two rankings of rescaled problems agree within this bound.
pub const INVARIANCE_TOL: f64 = 1e-8;
/// Ranking counts as uniform within this bound.
pub const UNIFORMITY_TOL: f64 = 1e-6;
/// Separation required for every strict inequality.
pub const STRICT_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    MinimalFairness,
    StrictMonotonicity,
    InvarianceToReferenceIntensity,
    Uniformity,
    GrossSubstitutes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prices: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub indices: Vec<usize>,
    /// The measured quantity the verdict turns on (distance, gap, increment).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measured: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomVerdict {
    pub axiom: Axiom,
    pub outcome: Outcome,
    pub tolerance: f64,
    pub witness: Witness,
}

impl AxiomVerdict {
    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Pass
    }

    fn not_applicable(axiom: Axiom, note: impl Into<String>) -> Self {
        Self {
            axiom,
            outcome: Outcome::NotApplicable,
            tolerance: 0.0,
            witness: Witness {
                note: note.into(),
                ..Witness::default()
            },
        }
    }
}

fn outcome(ok: bool) -> Outcome {
    if ok {
        Outcome::Pass
    } else {
        Outcome::Fail
    }
}

fn rank(problem: &RankingProblem, config: &SolverConfig) -> Result<(Vec<f64>, f64)> {
    let (prices, report) = crate::ces_ranking(problem, config)?;
    Ok((prices.into_vec(), report.residual))
}

/// With no expressed preferences every agent must get `1/n`.
pub fn check_minimal_fairness(
    n: usize,
    rho: f64,
    beta: f64,
    config: &SolverConfig,
) -> Result<AxiomVerdict> {
    if n < 2 {
        return Err(RankError::invalid(
            "minimal fairness needs at least two agents",
        ));
    }
    let problem = RankingProblem::with_common_rho(vec![vec![0.0; n]; n], rho, beta)?;
    let (prices, residual) = rank(&problem, config)?;
    let uniform = vec![1.0 / n as f64; n];
    let distance = max_abs_diff(&prices, &uniform);
    Ok(AxiomVerdict {
        axiom: Axiom::MinimalFairness,
        outcome: outcome(distance <= FAIRNESS_TOL),
        tolerance: FAIRNESS_TOL,
        witness: Witness {
            prices: Some(prices),
            reference: Some(uniform),
            measured: Some(distance),
            residual: Some(residual),
            note: format!("n = {n}, rho = {rho}, beta = {beta}"),
            ..Witness::default()
        },
    })
}

/// If column `i` of the normalized matrix is entrywise at most column `j`,
/// strictly somewhere, agent `i` must rank strictly below agent `j`.
/// Only defined when all agents share one exponent.
pub fn check_strict_monotonicity(
    problem: &RankingProblem,
    i: usize,
    j: usize,
    config: &SolverConfig,
) -> Result<AxiomVerdict> {
    const AXIOM: Axiom = Axiom::StrictMonotonicity;
    let n = problem.len();
    if i >= n || j >= n {
        return Err(RankError::invalid(format!(
            "agents ({i}, {j}) out of range for {n}"
        )));
    }
    if i == j {
        return Ok(AxiomVerdict::not_applicable(
            AXIOM,
            "i == j: no strict dominance possible",
        ));
    }
    if !problem.has_common_rho() {
        return Ok(AxiomVerdict::not_applicable(
            AXIOM,
            "agents have different elasticities; the axiom needs a common rho",
        ));
    }
    let normalized = normalize_preferences(problem)?;
    let alpha = normalized.alpha_hat();
    let dominated = alpha.iter().all(|row| row[i] <= row[j]);
    let strict = alpha.iter().any(|row| row[i] < row[j]);
    if !(dominated && strict) {
        return Ok(AxiomVerdict::not_applicable(
            AXIOM,
            format!("column {i} is not dominated by column {j} in the normalized matrix"),
        ));
    }
    let economy = build_economy(&normalized)?;
    let (prices, report) = solve(&economy, config)?;
    let prices = prices.into_vec();
    let gap = prices[j] - prices[i];
    Ok(AxiomVerdict {
        axiom: AXIOM,
        outcome: outcome(gap > STRICT_MARGIN),
        tolerance: STRICT_MARGIN,
        witness: Witness {
            prices: Some(prices),
            indices: vec![i, j],
            measured: Some(gap),
            residual: Some(report.residual),
            note: format!("pi[{j}] - pi[{i}]"),
            ..Witness::default()
        },
    })
}

/// Scaling one agent's whole preference row by `lambda > 0` must leave the
/// ranking unchanged.
pub fn check_invariance(
    problem: &RankingProblem,
    row: usize,
    lambda: f64,
    config: &SolverConfig,
) -> Result<AxiomVerdict> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(RankError::invalid(format!(
            "lambda = {lambda} must be positive"
        )));
    }
    let scaled = problem.with_row_scaled(row, lambda)?;
    let (original, _) = rank(problem, config)?;
    let (rescaled, residual) = rank(&scaled, config)?;
    let distance = max_abs_diff(&original, &rescaled);
    Ok(AxiomVerdict {
        axiom: Axiom::InvarianceToReferenceIntensity,
        outcome: outcome(distance <= INVARIANCE_TOL),
        tolerance: INVARIANCE_TOL,
        witness: Witness {
            prices: Some(rescaled),
            reference: Some(original),
            indices: vec![row],
            measured: Some(distance),
            residual: Some(residual),
            note: format!("row {row} scaled by {lambda}"),
        },
    })
}

/// Ranks a regular problem without damping and reports whether the result is
/// uniform. `Pass` means uniform; a CES counterexample shows up as `Fail`.
pub fn check_uniformity(problem: &RankingProblem, config: &SolverConfig) -> Result<AxiomVerdict> {
    let undamped = problem.with_beta(1.0)?;
    let normalized = normalize_preferences(&undamped)?;
    if !is_regular(&normalized, REGULARITY_TOL) {
        return Ok(AxiomVerdict::not_applicable(
            Axiom::Uniformity,
            "problem is not regular (row or column sums differ)",
        ));
    }
    let n = normalized.len();
    let economy = build_economy(&normalized)?;
    let (prices, report) = solve(&economy, config)?;
    let prices = prices.into_vec();
    let uniform = vec![1.0 / n as f64; n];
    let distance = max_abs_diff(&prices, &uniform);
    let uniform_excess = excess_demand(&economy, &uniform)?;
    let worst = (0..n)
        .max_by(|&a, &b| uniform_excess[a].abs().total_cmp(&uniform_excess[b].abs()))
        .unwrap_or(0);
    Ok(AxiomVerdict {
        axiom: Axiom::Uniformity,
        outcome: outcome(distance <= UNIFORMITY_TOL),
        tolerance: UNIFORMITY_TOL,
        witness: Witness {
            prices: Some(prices),
            reference: Some(uniform),
            indices: vec![worst],
            measured: Some(distance),
            residual: Some(report.residual),
            note: format!(
                "excess demand at uniform prices: z[{worst}] = {:.9}",
                uniform_excess[worst]
            ),
        },
    })
}

/// Raises the price of good `good` by `delta` at each probe price vector and
/// requires the excess demand of every other good to rise by more than
/// [`STRICT_MARGIN`]. Only defined for `rho >= 0` with all coefficients positive.
pub fn gs_spot_check(
    economy: &CesEconomy,
    good: usize,
    delta: f64,
    probes: &[Vec<f64>],
) -> Result<AxiomVerdict> {
    const AXIOM: Axiom = Axiom::GrossSubstitutes;
    if good >= economy.len() {
        return Err(RankError::invalid(format!("good {good} out of range")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(RankError::invalid(format!(
            "delta = {delta} must be positive"
        )));
    }
    if economy.rho().iter().any(|&r| r < 0.0) {
        return Ok(AxiomVerdict::not_applicable(
            AXIOM,
            "some rho < 0; gross substitutes is only guaranteed for rho >= 0",
        ));
    }
    if economy.alpha().iter().flatten().any(|&a| a <= 0.0) {
        return Ok(AxiomVerdict::not_applicable(
            AXIOM,
            "some coefficient is zero",
        ));
    }
    let mut smallest = f64::INFINITY;
    for (k, probe) in probes.iter().enumerate() {
        let before = excess_demand(economy, probe)?;
        let mut raised = probe.clone();
        raised[good] += delta;
        let after = excess_demand(economy, &raised)?;
        for j in (0..economy.len()).filter(|&j| j != good) {
            let increase = after[j] - before[j];
            smallest = smallest.min(increase);
            if increase <= STRICT_MARGIN {
                return Ok(AxiomVerdict {
                    axiom: AXIOM,
                    outcome: Outcome::Fail,
                    tolerance: STRICT_MARGIN,
                    witness: Witness {
                        prices: Some(probe.clone()),
                        indices: vec![good, j],
                        measured: Some(increase),
                        note: format!(
                            "probe {k}: z[{j}] rose by {increase:e} when p[{good}] += {delta}"
                        ),
                        ..Witness::default()
                    },
                });
            }
        }
    }
    Ok(AxiomVerdict {
        axiom: AXIOM,
        outcome: Outcome::Pass,
        tolerance: STRICT_MARGIN,
        witness: Witness {
            indices: vec![good],
            measured: Some(smallest),
            note: format!("{} probes, smallest increase {smallest:e}", probes.len()),
            ..Witness::default()
        },
    })
}
