//! CES exchange economies.
//!
//! Trader `i` has utility `u_i(x) = (sum_j alpha_ij x_j^rho_i)^(1/rho_i)` and
//! endowment row `w_i`. At strictly positive prices `pi` its demand is
//!
//! ```text
//! x_ij = alpha_ij^q pi_j^(-q) * income_i / sum_k alpha_ik^q pi_k^(1-q),   q = 1 / (1 - rho_i)
//! ```
//!
//! with `income_i = pi . w_i`. `rho_i == 0` marks a Cobb-Douglas trader, who
//! spends the fixed share `alpha_ij / sum_k alpha_ik` of its income on good `j`.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{RankError, Result};
use crate::linalg::check_nonnegative_square;
use crate::markov::{self, DirectedGraph, TransitionMatrix};
use crate::problem::{validate_rho, NormalizedProblem};

/// Largest accepted exponent; keeps `1 / (1 - rho) <= 20`.
pub const RHO_MAX: f64 = 0.95;

/// Above this value of `1 / (1 - rho)` demand is evaluated in log space.
pub const LOG_SPACE_EXPONENT: f64 = 4.0;

/// Simplex tolerance for [`PriceVector`].
pub const SIMPLEX_TOL: f64 = 1e-10;

/// Strictly positive price vector on the simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceVector(pub(crate) Vec<f64>);

impl PriceVector {
    pub fn new(prices: Vec<f64>) -> Result<Self> {
        check_prices(&prices, prices.len())?;
        let total: f64 = prices.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(RankError::invalid(format!(
                "prices sum to {total}, expected 1"
            )));
        }
        Ok(Self(prices))
    }

    /// Scales positive prices onto the simplex.
    pub fn normalized(prices: Vec<f64>) -> Result<Self> {
        check_prices(&prices, prices.len())?;
        let total: f64 = prices.iter().sum();
        Ok(Self(prices.into_iter().map(|p| p / total).collect()))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn check_prices(prices: &[f64], n: usize) -> Result<()> {
    if prices.len() != n {
        return Err(RankError::invalid(format!(
            "{} prices given for {n} goods",
            prices.len()
        )));
    }
    if n == 0 {
        return Err(RankError::invalid("empty price vector"));
    }
    match prices.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
        Some(j) => Err(RankError::invalid(format!(
            "price of good {j} is {}, prices must be strictly positive",
            prices[j]
        ))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CesEconomy {
    alpha: Vec<Vec<f64>>,
    rho: Vec<f64>,
    endowment: Vec<Vec<f64>>,
}

impl CesEconomy {
    pub fn new(alpha: Vec<Vec<f64>>, rho: Vec<f64>, endowment: Vec<Vec<f64>>) -> Result<Self> {
        let n = alpha.len();
        if n == 0 {
            return Err(RankError::invalid("an economy needs at least one trader"));
        }
        check_nonnegative_square(&alpha, n, "alpha")?;
        check_nonnegative_square(&endowment, n, "endowment")?;
        if rho.len() != n {
            return Err(RankError::invalid(format!(
                "rho has {} entries, expected {n}",
                rho.len()
            )));
        }
        for (i, &r) in rho.iter().enumerate() {
            validate_rho(i, r)?;
            if r > RHO_MAX {
                return Err(RankError::invalid(format!(
                    "rho[{i}] = {r} exceeds {RHO_MAX}; near-linear utilities are not supported"
                )));
            }
        }
        for j in 0..n {
            if endowment.iter().all(|row| row[j] == 0.0) {
                return Err(RankError::invalid(format!(
                    "good {j} has zero total supply"
                )));
            }
        }
        if let Some(i) = alpha.iter().position(|row| row.iter().all(|&a| a == 0.0)) {
            return Err(RankError::invalid(format!(
                "trader {i} has no positive coefficient"
            )));
        }
        Ok(Self {
            alpha,
            rho,
            endowment,
        })
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn alpha(&self) -> &[Vec<f64>] {
        &self.alpha
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn endowment(&self) -> &[Vec<f64>] {
        &self.endowment
    }

    pub fn is_cobb_douglas(&self) -> bool {
        self.rho.iter().all(|&r| r == 0.0)
    }

    pub fn has_identity_endowment(&self) -> bool {
        self.endowment.iter().enumerate().all(|(i, row)| {
            row.iter()
                .enumerate()
                .all(|(j, &w)| w == if i == j { 1.0 } else { 0.0 })
        })
    }

    /// Economy graph: trader `i` links to trader `j` iff `alpha_ij > 0`.
    pub fn economy_graph(&self) -> DirectedGraph {
        DirectedGraph::from_support(&self.alpha)
    }

    /// Aggregate supply of each good.
    pub fn supply(&self) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|j| self.endowment.iter().map(|row| row[j]).sum())
            .collect()
    }

    pub fn income(&self, trader: usize, prices: &[f64]) -> f64 {
        self.endowment[trader]
            .iter()
            .zip(prices)
            .map(|(w, p)| w * p)
            .sum()
    }

    fn check_trader(&self, trader: usize) -> Result<()> {
        if trader >= self.len() {
            return Err(RankError::invalid(format!(
                "trader {trader} out of range for {} traders",
                self.len()
            )));
        }
        Ok(())
    }
}

/// Demand of `trader` at strictly positive (not necessarily normalized)
/// prices. Cobb-Douglas traders are routed to [`cobb_douglas_demand`].
pub fn ces_demand(economy: &CesEconomy, trader: usize, prices: &[f64]) -> Result<Vec<f64>> {
    economy.check_trader(trader)?;
    check_prices(prices, economy.len())?;
    let rho = economy.rho[trader];
    if rho == 0.0 {
        return Ok(cobb_douglas_bundle(
            &economy.alpha[trader],
            prices,
            economy.income(trader, prices),
        ));
    }
    Ok(ces_bundle(
        &economy.alpha[trader],
        rho,
        prices,
        economy.income(trader, prices),
    ))
}

pub fn cobb_douglas_demand(
    economy: &CesEconomy,
    trader: usize,
    prices: &[f64],
) -> Result<Vec<f64>> {
    economy.check_trader(trader)?;
    check_prices(prices, economy.len())?;
    if economy.rho[trader] != 0.0 {
        return Err(RankError::invalid(format!(
            "trader {trader} has rho = {}, not Cobb-Douglas",
            economy.rho[trader]
        )));
    }
    Ok(cobb_douglas_bundle(
        &economy.alpha[trader],
        prices,
        economy.income(trader, prices),
    ))
}

/// Closed-form CES demand for one coefficient row. No parameter checks and no
/// Cobb-Douglas routing, so it can be evaluated arbitrarily close to `rho = 0`.
pub fn ces_bundle(alpha: &[f64], rho: f64, prices: &[f64], income: f64) -> Vec<f64> {
    let n = alpha.len();
    if income == 0.0 {
        return vec![0.0; n];
    }
    let q = 1.0 / (1.0 - rho);
    if q > LOG_SPACE_EXPONENT {
        // log(alpha_j^q pi_j^(1-q)), None where alpha_j = 0
        let logs: Vec<Option<f64>> = alpha
            .iter()
            .zip(prices)
            .map(|(&a, &p)| (a > 0.0).then(|| q * a.ln() + (1.0 - q) * p.ln()))
            .collect();
        let peak = logs
            .iter()
            .flatten()
            .fold(f64::NEG_INFINITY, |m, &t| m.max(t));
        let log_denominator = peak
            + logs
                .iter()
                .flatten()
                .map(|t| (t - peak).exp())
                .sum::<f64>()
                .ln();
        let log_income = income.ln();
        logs.iter()
            .zip(prices)
            .map(|(t, p)| match t {
                Some(t) => (t - log_denominator - p.ln() + log_income).exp(),
                None => 0.0,
            })
            .collect()
    } else {
        let weights: Vec<f64> = alpha
            .iter()
            .zip(prices)
            .map(|(&a, &p)| {
                if a > 0.0 {
                    a.powf(q) * p.powf(1.0 - q)
                } else {
                    0.0
                }
            })
            .collect();
        let denominator: f64 = weights.iter().sum();
        weights
            .iter()
            .zip(prices)
            .map(|(w, p)| w / p * income / denominator)
            .collect()
    }
}

/// `x_j = (alpha_j / sum(alpha)) * income / pi_j`.
pub fn cobb_douglas_bundle(alpha: &[f64], prices: &[f64], income: f64) -> Vec<f64> {
    let total: f64 = alpha.iter().sum();
    alpha
        .iter()
        .zip(prices)
        .map(|(a, p)| a / total * income / p)
        .collect()
}

/// Aggregate demand minus aggregate supply, summed over traders in index order.
pub fn excess_demand(economy: &CesEconomy, prices: &[f64]) -> Result<Vec<f64>> {
    let demand = aggregate_demand(economy, prices)?;
    Ok(demand
        .into_iter()
        .zip(economy.supply())
        .map(|(d, s)| d - s)
        .collect())
}

pub fn aggregate_demand(economy: &CesEconomy, prices: &[f64]) -> Result<Vec<f64>> {
    check_prices(prices, economy.len())?;
    let mut total = vec![0.0; economy.len()];
    for trader in 0..economy.len() {
        let bundle = ces_demand(economy, trader, prices)?;
        for (t, x) in total.iter_mut().zip(bundle) {
            *t += x;
        }
    }
    Ok(total)
}

/// Cobb-Douglas economy whose trader `i` owns one unit of good `i` and uses
/// the transition probabilities `p_ij` as exponents. Its equilibrium is the
/// stationary distribution of `p`.
///
/// The chain must be irreducible. Periodic chains are accepted with a
/// warning: the clearing equations only need irreducibility.
pub fn markov_to_economy(p: &TransitionMatrix) -> Result<CesEconomy> {
    let graph = p.support_graph();
    let components = markov::strongly_connected_components(&graph);
    if components.len() > 1 {
        return Err(RankError::NotStronglyConnected { components });
    }
    if !markov::is_aperiodic(&graph)? {
        warn!("transition matrix is irreducible but periodic; the equilibrium is its invariant distribution");
    }
    let n = p.len();
    CesEconomy::new(p.rows().to_vec(), vec![0.0; n], identity(n))
}

/// Economy of the ranking construction: coefficients `alpha_hat`, the
/// problem's exponents, and trader `i` owning one unit of good `i`.
/// The economy graph must be strongly connected.
pub fn build_economy(normalized: &NormalizedProblem) -> Result<CesEconomy> {
    let n = normalized.len();
    let economy = CesEconomy::new(
        normalized.alpha_hat().to_vec(),
        normalized.rho().to_vec(),
        identity(n),
    )?;
    let components = markov::strongly_connected_components(&economy.economy_graph());
    if components.len() > 1 {
        return Err(RankError::NotStronglyConnected { components });
    }
    Ok(economy)
}

pub fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}
