//! Ranking problems and preference preprocessing.
//!
//! A problem carries a nonnegative preference matrix `alpha` (`alpha[i][j]` is
//! how much agent `i` values agent `j`), one CES exponent `rho` per agent and
//! a damping weight `beta`. [`normalize_preferences`] turns it into the
//! strictly positive, row-stochastic coefficient matrix the economy consumes.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{RankError, Result};
use crate::linalg::check_nonnegative_square;

/// Damping weight used when none is given.
pub const DEFAULT_BETA: f64 = 0.85;

/// Nonzero exponents closer to zero than this are rejected; use exactly
/// `0.0` for the Cobb-Douglas limit.
pub const RHO_ZERO_BAND: f64 = 1e-9;

/// Absolute tolerance on row/column sum differences in [`is_regular`].
pub const REGULARITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingProblem {
    agent_ids: Vec<String>,
    alpha: Vec<Vec<f64>>,
    rho: Vec<f64>,
    beta: f64,
}

/// Checks a single CES exponent: `rho` in `[-1, 1)`, and either exactly zero
/// or at least [`RHO_ZERO_BAND`] away from it.
pub fn validate_rho(index: usize, rho: f64) -> Result<()> {
    if !rho.is_finite() || !(-1.0..1.0).contains(&rho) {
        return Err(RankError::invalid(format!(
            "rho[{index}] = {rho} is outside [-1, 1)"
        )));
    }
    if rho != 0.0 && rho.abs() < RHO_ZERO_BAND {
        return Err(RankError::invalid(format!(
            "rho[{index}] = {rho:e} is too close to zero; use exactly 0 for Cobb-Douglas"
        )));
    }
    Ok(())
}

impl RankingProblem {
    pub fn new(
        agent_ids: Vec<String>,
        alpha: Vec<Vec<f64>>,
        rho: Vec<f64>,
        beta: f64,
    ) -> Result<Self> {
        let n = agent_ids.len();
        if n == 0 {
            return Err(RankError::invalid(
                "a ranking problem needs at least one agent",
            ));
        }
        let mut seen = HashSet::with_capacity(n);
        for id in &agent_ids {
            if !seen.insert(id.as_str()) {
                return Err(RankError::invalid(format!("duplicate agent id {id:?}")));
            }
        }
        check_nonnegative_square(&alpha, n, "alpha")?;
        if rho.len() != n {
            return Err(RankError::invalid(format!(
                "rho has {} entries, expected {n}",
                rho.len()
            )));
        }
        for (i, &r) in rho.iter().enumerate() {
            validate_rho(i, r)?;
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(RankError::invalid(format!(
                "beta = {beta} is outside (0, 1]"
            )));
        }
        Ok(Self {
            agent_ids,
            alpha,
            rho,
            beta,
        })
    }

    /// Problem whose agents are named `"0"`, `"1"`, ... and share one exponent.
    pub fn with_common_rho(alpha: Vec<Vec<f64>>, rho: f64, beta: f64) -> Result<Self> {
        let n = alpha.len();
        Self::new(index_ids(n), alpha, vec![rho; n], beta)
    }

    pub fn len(&self) -> usize {
        self.agent_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agent_ids.is_empty()
    }

    pub fn agent_ids(&self) -> &[String] {
        &self.agent_ids
    }

    pub fn alpha(&self) -> &[Vec<f64>] {
        &self.alpha
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(
            self.agent_ids.clone(),
            self.alpha.clone(),
            self.rho.clone(),
            beta,
        )
    }

    pub fn with_rho(&self, rho: Vec<f64>) -> Result<Self> {
        Self::new(self.agent_ids.clone(), self.alpha.clone(), rho, self.beta)
    }

    /// Multiplies every entry of row `row` by `lambda > 0`.
    pub fn with_row_scaled(&self, row: usize, lambda: f64) -> Result<Self> {
        if row >= self.len() {
            return Err(RankError::invalid(format!(
                "row {row} out of range for {} agents",
                self.len()
            )));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(RankError::invalid(format!(
                "lambda = {lambda} must be positive"
            )));
        }
        let mut alpha = self.alpha.clone();
        alpha[row].iter_mut().for_each(|a| *a *= lambda);
        Self::new(self.agent_ids.clone(), alpha, self.rho.clone(), self.beta)
    }

    /// True when every agent shares the same exponent.
    pub fn has_common_rho(&self) -> bool {
        self.rho.windows(2).all(|w| w[0] == w[1])
    }
}

pub(crate) fn index_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

/// Output of [`normalize_preferences`]: rows sum to one and, for `beta < 1`,
/// every entry is at least `(1 - beta) / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedProblem {
    agent_ids: Vec<String>,
    alpha_hat: Vec<Vec<f64>>,
    rho: Vec<f64>,
}

impl NormalizedProblem {
    pub fn len(&self) -> usize {
        self.agent_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agent_ids.is_empty()
    }

    pub fn agent_ids(&self) -> &[String] {
        &self.agent_ids
    }

    pub fn alpha_hat(&self) -> &[Vec<f64>] {
        &self.alpha_hat
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }
}

/// Fills empty rows with the uniform row, scales rows to sum to one and
/// mixes each row with the uniform distribution:
/// `alpha_hat[i][j] = alpha[i][j] * beta + (1 - beta) / n`.
pub fn normalize_preferences(problem: &RankingProblem) -> Result<NormalizedProblem> {
    let n = problem.len();
    let uniform = 1.0 / n as f64;
    let beta = problem.beta;

    let alpha_hat = problem
        .alpha
        .iter()
        .map(|row| {
            let total: f64 = row.iter().sum();
            if total == 0.0 {
                return Ok(vec![uniform; n]);
            }
            if !total.is_finite() {
                return Err(RankError::invalid("row sum overflows"));
            }
            Ok(row
                .iter()
                .map(|a| (a / total) * beta + uniform * (1.0 - beta))
                .collect())
        })
        .map(|row| row.map(renormalize))
        .collect::<Result<Vec<_>>>()?;

    Ok(NormalizedProblem {
        agent_ids: problem.agent_ids.clone(),
        alpha_hat,
        rho: problem.rho.clone(),
    })
}

// Mixing keeps the sum at one up to a few ulps; dividing once more pins it.
fn renormalize(mut row: Vec<f64>) -> Vec<f64> {
    let total: f64 = row.iter().sum();
    row.iter_mut().for_each(|v| *v /= total);
    row
}

/// True iff all row sums agree and all column sums agree within `tol`.
pub fn is_regular(problem: &NormalizedProblem, tol: f64) -> bool {
    is_regular_matrix(&problem.alpha_hat, tol)
}

pub fn is_regular_matrix(m: &[Vec<f64>], tol: f64) -> bool {
    let n = m.len();
    if n == 0 {
        return true;
    }
    let rows: Vec<f64> = m.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..n).map(|j| m.iter().map(|r| r[j]).sum()).collect();
    let spread = |v: &[f64]| {
        let (lo, hi) = v
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
        hi - lo
    };
    spread(&rows) <= tol && spread(&cols) <= tol
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_matrix_close(got: &[Vec<f64>], want: &[Vec<f64>], tol: f64) {
        for (g, w) in got.iter().zip(want) {
            for (a, b) in g.iter().zip(w) {
                assert!((a - b).abs() <= tol, "{got:?} vs {want:?}");
            }
        }
    }

    #[test]
    fn zero_rows_become_uniform() {
        let p = RankingProblem::with_common_rho(vec![vec![0.0; 2]; 2], 0.0, 0.85).unwrap();
        let n = normalize_preferences(&p).unwrap();
        assert_matrix_close(n.alpha_hat(), &[vec![0.5, 0.5], vec![0.5, 0.5]], 1e-15);
    }

    #[test]
    fn stochastic_rows_unchanged_without_damping() {
        let alpha = vec![
            vec![0.2, 0.3, 0.5],
            vec![1.0, 0.0, 0.0],
            vec![0.25, 0.25, 0.5],
        ];
        let p = RankingProblem::with_common_rho(alpha.clone(), 0.5, 1.0).unwrap();
        let n = normalize_preferences(&p).unwrap();
        assert_matrix_close(n.alpha_hat(), &alpha, 1e-15);
    }

    #[test]
    fn normalizes_then_damps() {
        let p = RankingProblem::with_common_rho(vec![vec![3.0, 1.0], vec![0.0, 2.0]], 0.0, 0.8)
            .unwrap();
        let n = normalize_preferences(&p).unwrap();
        assert_matrix_close(n.alpha_hat(), &[vec![0.70, 0.30], vec![0.10, 0.90]], 1e-15);
    }

    #[test]
    fn rejects_bad_entries_with_location() {
        let err = RankingProblem::with_common_rho(vec![vec![0.0, 1.0], vec![-1.0, 0.0]], 0.0, 0.85)
            .unwrap_err();
        assert!(matches!(
            err,
            RankError::InvalidEntry { row: 1, col: 0, .. }
        ));
        let err =
            RankingProblem::with_common_rho(vec![vec![0.0, f64::NAN], vec![1.0, 0.0]], 0.0, 0.85)
                .unwrap_err();
        assert!(matches!(
            err,
            RankError::InvalidEntry { row: 0, col: 1, .. }
        ));
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        let a = vec![vec![1.0]];
        assert!(RankingProblem::with_common_rho(a.clone(), 1.0, 0.85).is_err());
        assert!(RankingProblem::with_common_rho(a.clone(), -1.5, 0.85).is_err());
        assert!(RankingProblem::with_common_rho(a.clone(), 1e-12, 0.85).is_err());
        assert!(RankingProblem::with_common_rho(a.clone(), -1.0, 0.85).is_ok());
        assert!(RankingProblem::with_common_rho(a.clone(), 0.0, 0.0).is_err());
        assert!(RankingProblem::with_common_rho(a.clone(), 0.0, 1.01).is_err());
        assert!(RankingProblem::with_common_rho(a, 0.0, 1.0).is_ok());
        assert!(RankingProblem::new(
            vec!["a".into(), "a".into()],
            vec![vec![0.0; 2]; 2],
            vec![0.0; 2],
            0.85
        )
        .is_err());
    }

    #[test]
    fn regularity() {
        let skewed = vec![
            vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            vec![5.0 / 12.0, 1.0 / 6.0, 5.0 / 12.0],
            vec![0.25, 0.5, 0.25],
        ];
        let p = RankingProblem::with_common_rho(skewed, 0.5, 1.0).unwrap();
        assert!(is_regular(
            &normalize_preferences(&p).unwrap(),
            REGULARITY_TOL
        ));

        let p = RankingProblem::with_common_rho(vec![vec![0.25; 4]; 4], 0.0, 1.0).unwrap();
        assert!(is_regular(
            &normalize_preferences(&p).unwrap(),
            REGULARITY_TOL
        ));

        let p = RankingProblem::with_common_rho(vec![vec![0.9, 0.1], vec![0.5, 0.5]], 0.0, 1.0)
            .unwrap();
        assert!(!is_regular(
            &normalize_preferences(&p).unwrap(),
            REGULARITY_TOL
        ));
    }

    #[test]
    fn damped_entries_bounded_below() {
        let p = RankingProblem::with_common_rho(
            vec![
                vec![0.0, 5.0, 0.0],
                vec![1.0, 0.0, 0.0],
                vec![0.0, 0.0, 0.0],
            ],
            0.0,
            0.85,
        )
        .unwrap();
        let n = normalize_preferences(&p).unwrap();
        let floor = 0.15 / 3.0;
        assert!(n.alpha_hat().iter().flatten().all(|&a| a >= floor - 1e-15));
    }
}
