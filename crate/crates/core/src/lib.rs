//! Rankings as Arrow-Debreu equilibrium prices.
//!
//! A ranking problem (agents plus a nonnegative preference matrix) is turned
//! into an exchange economy in which every agent owns one unit of its own
//! good and spends its income according to a CES utility over the goods it
//! prefers. The equilibrium price vector is the ranking.
//!
//! With Cobb-Douglas utilities (`rho == 0`) the equilibrium coincides with the
//! stationary distribution of the row-stochastic preference matrix, so
//! PageRank is recovered exactly from the economy built on the PageRank chain.
//!
//! Modules, bottom-up:
//!
//! * [`problem`]: ranking problems and preference preprocessing
//! * [`markov`]: transition matrices, the PageRank chain, stationary distributions,
//!   connectivity and periodicity checks
//! * [`economy`]: CES exchange economies, demand and excess demand
//! * [`solver`]: equilibrium computation and certification
//! * [`axioms`]: executable ranking axioms
//! * [`io`]: problem documents, edge lists and ranking output

pub mod axioms;
pub mod economy;
pub mod error;
pub mod io;
mod linalg;
pub mod markov;
pub mod problem;
pub mod solver;

pub use economy::{CesEconomy, PriceVector};
pub use error::{RankError, Result};
pub use markov::{DirectedGraph, Distribution, TransitionMatrix};
pub use problem::{NormalizedProblem, RankingProblem};
pub use solver::{SolverConfig, SolverMethod, SolverReport};

/// Full ranking pipeline: normalize, build the economy, solve.
pub fn ces_ranking(
    problem: &RankingProblem,
    config: &SolverConfig,
) -> Result<(PriceVector, SolverReport)> {
    let normalized = problem::normalize_preferences(problem)?;
    let economy = economy::build_economy(&normalized)?;
    solver::solve(&economy, config)
}
