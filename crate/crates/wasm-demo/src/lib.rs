//! WebAssembly bindings behind the static page in `www/`.
//!
//! Every exported function takes and returns plain strings. The pure Rust
//! versions (`*_json`) carry the logic and are what the native tests call.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use ces_rank::economy::markov_to_economy;
use ces_rank::io::{parse_edge_list, parse_problem};
use ces_rank::markov::{build_web_transition, stationary_distribution, StationaryMethod};
use ces_rank::problem::RHO_ZERO_BAND;
use ces_rank::solver::{rank_order, solve_cobb_douglas, TIE_TOLERANCE};
use ces_rank::{ces_ranking, RankingProblem, SolverConfig};

#[derive(Serialize)]
struct Row<'a> {
    rank: usize,
    agent: &'a str,
    score: f64,
    tied: bool,
}

#[derive(Serialize)]
struct Ranking<'a> {
    ranking: Vec<Row<'a>>,
    method: String,
    iterations: usize,
    residual: f64,
}

#[derive(Serialize)]
struct Sweep<'a> {
    agents: &'a [String],
    rho: Vec<f64>,
    scores: Vec<Option<Vec<f64>>>,
}

#[derive(Serialize)]
struct Comparison {
    stationary: Vec<f64>,
    equilibrium: Vec<f64>,
    max_difference: f64,
}

fn snap_rho(rho: f64) -> f64 {
    if rho.abs() < RHO_ZERO_BAND {
        0.0
    } else {
        rho
    }
}

fn with_parameters(document: &str, rho: f64, beta: f64) -> Result<RankingProblem, String> {
    let problem = parse_problem(document).map_err(|e| e.to_string())?;
    let n = problem.len();
    problem
        .with_rho(vec![snap_rho(rho); n])
        .and_then(|p| p.with_beta(beta))
        .map_err(|e| e.to_string())
}

/// Ranks the agents of a problem document under a common `rho` and damping `beta`.
pub fn rank_json(document: &str, rho: f64, beta: f64) -> Result<String, String> {
    let problem = with_parameters(document, rho, beta)?;
    let (prices, report) =
        ces_ranking(&problem, &SolverConfig::default()).map_err(|e| e.to_string())?;
    let ranking = rank_order(prices.as_slice(), TIE_TOLERANCE)
        .into_iter()
        .map(|e| Row {
            rank: e.rank,
            agent: &problem.agent_ids()[e.index],
            score: prices.as_slice()[e.index],
            tied: e.tied,
        })
        .collect();
    let out = Ranking {
        ranking,
        method: report.method,
        iterations: report.iterations,
        residual: report.residual,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

/// Equilibrium scores on an evenly spaced grid of `steps` exponents. Grid
/// points where the solver fails are reported as `null`.
pub fn sweep_json(
    document: &str,
    beta: f64,
    rho_min: f64,
    rho_max: f64,
    steps: usize,
) -> Result<String, String> {
    if !(2..=400).contains(&steps) {
        return Err(format!("steps = {steps} must lie in [2, 400]"));
    }
    if rho_min.is_nan() || rho_max.is_nan() || rho_min >= rho_max {
        return Err(format!("empty exponent range [{rho_min}, {rho_max}]"));
    }
    let base = with_parameters(document, rho_min, beta)?;
    let rho: Vec<f64> = (0..steps)
        .map(|k| snap_rho(rho_min + (rho_max - rho_min) * k as f64 / (steps - 1) as f64))
        .collect();
    let scores = rho
        .iter()
        .map(|&r| {
            let problem = base.with_rho(vec![r; base.len()]).ok()?;
            ces_ranking(&problem, &SolverConfig::default())
                .ok()
                .map(|(prices, _)| prices.into_vec())
        })
        .collect();
    let sweep = Sweep {
        agents: base.agent_ids(),
        rho,
        scores,
    };
    serde_json::to_string(&sweep).map_err(|e| e.to_string())
}

/// PageRank of an edge list next to the equilibrium of the matching
/// Cobb-Douglas market.
pub fn compare_json(edges: &str, damping: f64) -> Result<String, String> {
    let list = parse_edge_list(edges).map_err(|e| e.to_string())?;
    let chain = build_web_transition(&list.graph(), damping).map_err(|e| e.to_string())?;
    let method = StationaryMethod::for_size(chain.len());
    let (stationary, _) =
        stationary_distribution(&chain, method, 1e-13, 100_000).map_err(|e| e.to_string())?;
    let economy = markov_to_economy(&chain).map_err(|e| e.to_string())?;
    let (equilibrium, _) = solve_cobb_douglas(&economy).map_err(|e| e.to_string())?;
    let (stationary, equilibrium) = (stationary.into_vec(), equilibrium.into_vec());
    let max_difference = stationary
        .iter()
        .zip(&equilibrium)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    serde_json::to_string(&Comparison {
        stationary,
        equilibrium,
        max_difference,
    })
    .map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn rank(document: &str, rho: f64, beta: f64) -> Result<String, JsError> {
    rank_json(document, rho, beta).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn sweep(
    document: &str,
    beta: f64,
    rho_min: f64,
    rho_max: f64,
    steps: usize,
) -> Result<String, JsError> {
    sweep_json(document, beta, rho_min, rho_max, steps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn compare(edges: &str, damping: f64) -> Result<String, JsError> {
    compare_json(edges, damping).map_err(|e| JsError::new(&e))
}
