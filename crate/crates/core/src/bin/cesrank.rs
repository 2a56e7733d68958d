//! Command-line front end: `rank`, `verify`, `compare` and `convert`.
//!
//! Exit codes: 0 success, 1 a verification or comparison failed, 2 bad input,
//! 3 solver did not converge. Diagnostics go to stderr; set `RANK_LOG` for
//! more of them.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use ces_rank::axioms::{self, AxiomVerdict, Outcome};
use ces_rank::economy::{build_economy, markov_to_economy};
use ces_rank::io::{self, fixtures, InputDocument};
use ces_rank::markov::{self, DirectedGraph, StationaryMethod, DEFAULT_DAMPING};
use ces_rank::problem::{normalize_preferences, RankingProblem, DEFAULT_BETA};
use ces_rank::solver::{self, SolverConfig, DEFAULT_TOLERANCE};
use ces_rank::RankError;

/// Writes to stdout, staying quiet when the reader has gone away.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    if let Err(e) = out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        if e.kind() != std::io::ErrorKind::BrokenPipe {
            eprintln!("error: writing output: {e}");
        }
    }
}

/// Largest tolerated difference between the two PageRank routes.
const COMPARE_TOL: f64 = 1e-8;

#[derive(Parser)]
#[command(
    name = "cesrank",
    version,
    about = "Rankings as equilibrium prices of CES exchange economies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank the agents of a problem document or edge list.
    Rank(RankArgs),
    /// Check ranking axioms on bundled fixtures or a given problem.
    Verify(VerifyArgs),
    /// Compute PageRank as a stationary distribution and as a Cobb-Douglas equilibrium.
    Compare(CompareArgs),
    /// Dump the Cobb-Douglas economy of a graph's transition chain.
    Convert(ConvertArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Ces,
    Pagerank,
    Invariant,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Format {
    Tsv,
    Json,
}

#[derive(clap::Args)]
struct RankArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "ces")]
    method: Method,
    /// Common CES exponent; overrides the document (ces only).
    #[arg(long, allow_hyphen_values = true)]
    rho: Option<f64>,
    /// Preference damping (ces only).
    #[arg(long)]
    beta: Option<f64>,
    /// PageRank damping constant.
    #[arg(long, default_value_t = DEFAULT_DAMPING)]
    damping: f64,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum, default_value = "tsv")]
    format: Format,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum AxiomArg {
    Fairness,
    Monotone,
    Invariance,
    Uniformity,
    Gs,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fixture {
    Counterexample,
    Dominance,
    Heterogeneous,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Expectation {
    Uniform,
    NonUniform,
}

#[derive(clap::Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    axiom: AxiomArg,
    /// Problem document to check instead of the bundled fixtures.
    #[arg(long, conflicts_with = "fixture")]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    fixture: Option<Fixture>,
    /// Agent count for the fairness check.
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, allow_hyphen_values = true)]
    rho: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Dominated agent (monotone).
    #[arg(long, default_value_t = 0)]
    i: usize,
    /// Dominating agent (monotone).
    #[arg(long, default_value_t = 1)]
    j: usize,
    /// Row to rescale (invariance).
    #[arg(long, default_value_t = 1)]
    row: usize,
    #[arg(long, default_value_t = 10.0)]
    lambda: f64,
    /// Good whose price is raised (gs).
    #[arg(long, default_value_t = 0)]
    good: usize,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Expected uniformity verdict.
    #[arg(long, value_enum, default_value = "non-uniform")]
    expect: Expectation,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(clap::Args)]
struct CompareArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DAMPING)]
    damping: f64,
    #[arg(long, value_enum, default_value = "tsv")]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Chain {
    Pagerank,
    Invariant,
}

#[derive(clap::Args)]
struct ConvertArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "pagerank")]
    chain: Chain,
    #[arg(long, default_value_t = DEFAULT_DAMPING)]
    damping: f64,
}

fn exit_code(err: &RankError) -> u8 {
    match err {
        RankError::NotConverged { .. } | RankError::NonFinite { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RANK_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Rank(args) => rank(args),
        Command::Verify(args) => verify(args),
        Command::Compare(args) => compare(args),
        Command::Convert(args) => convert(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            if let RankError::NotStronglyConnected { components } = &err {
                for (k, c) in components.iter().enumerate() {
                    eprintln!("  component {k}: {c:?}");
                }
            }
            ExitCode::from(exit_code(&err))
        }
    }
}

type CliResult = Result<u8, RankError>;

fn input_graph(doc: &InputDocument) -> DirectedGraph {
    match doc {
        InputDocument::Graph(edges) => edges.graph(),
        InputDocument::Problem(p) => DirectedGraph::from_support(p.alpha()),
    }
}

fn agent_ids(doc: &InputDocument) -> Vec<String> {
    match doc {
        InputDocument::Graph(edges) => (0..edges.n).map(|i| i.to_string()).collect(),
        InputDocument::Problem(p) => p.agent_ids().to_vec(),
    }
}

fn rank(args: RankArgs) -> CliResult {
    let doc = io::load_input(&args.input)?;
    let ids = agent_ids(&doc);
    let (method, scores, report) = match args.method {
        Method::Ces => {
            let problem = match &doc {
                InputDocument::Graph(edges) => {
                    edges.to_problem(args.rho.unwrap_or(0.0), args.beta.unwrap_or(DEFAULT_BETA))?
                }
                InputDocument::Problem(p) => {
                    let mut p = p.clone();
                    if let Some(rho) = args.rho {
                        p = p.with_rho(vec![rho; p.len()])?;
                    }
                    if let Some(beta) = args.beta {
                        p = p.with_beta(beta)?;
                    }
                    p
                }
            };
            let config = SolverConfig {
                tolerance: args.tol.unwrap_or(DEFAULT_TOLERANCE),
                seed: args.seed,
                ..SolverConfig::default()
            };
            let (prices, report) = ces_rank::ces_ranking(&problem, &config)?;
            info!(
                "{} converged in {} iterations, residual {:e}",
                report.method, report.iterations, report.residual
            );
            ("ces", prices.into_vec(), report)
        }
        Method::Pagerank | Method::Invariant => {
            let graph = input_graph(&doc);
            let (name, chain) = match args.method {
                Method::Pagerank => (
                    "pagerank",
                    markov::build_web_transition(&graph, args.damping)?,
                ),
                _ => ("invariant", markov::build_invariant_transition(&graph)?),
            };
            let (pi, report) = markov::stationary_distribution(
                &chain,
                StationaryMethod::for_size(chain.len()),
                args.tol.unwrap_or(1e-12),
                100_000,
            )?;
            (name, pi.into_vec(), report)
        }
    };
    match args.format {
        Format::Tsv => emit(&io::ranking_tsv(&ids, &scores)),
        Format::Json => emit(&format!(
            "{}\n",
            io::ranking_json(method, &ids, &scores, &report)
        )),
    }
    Ok(0)
}

#[derive(Serialize)]
struct CheckLine {
    check: &'static str,
    ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    expected: Option<Expectation>,
    verdict: AxiomVerdict,
}

fn fixture_problem(fixture: Fixture) -> RankingProblem {
    match fixture {
        Fixture::Counterexample => fixtures::counterexample(),
        Fixture::Dominance => fixtures::dominance(),
        Fixture::Heterogeneous => fixtures::heterogeneous(),
    }
}

fn verify(args: VerifyArgs) -> CliResult {
    let config = SolverConfig {
        tolerance: args.tol,
        seed: args.seed,
        ..SolverConfig::default()
    };
    let input = args.input.as_ref().map(io::load_problem).transpose()?;
    let problem_for = |default: Fixture| -> RankingProblem {
        match (&input, args.fixture) {
            (Some(p), _) => p.clone(),
            (None, Some(f)) => fixture_problem(f),
            (None, None) => fixture_problem(default),
        }
    };
    let wants = |a: AxiomArg| args.axiom == a || args.axiom == AxiomArg::All;
    let mut lines = Vec::new();
    let plain = |check, verdict: AxiomVerdict| CheckLine {
        check,
        ok: verdict.outcome != Outcome::Fail,
        expected: None,
        verdict,
    };

    if wants(AxiomArg::Fairness) {
        let rho = args.rho.unwrap_or(0.5);
        let betas = match args.beta {
            Some(b) => vec![b],
            None => vec![1.0, DEFAULT_BETA],
        };
        for beta in betas {
            lines.push(plain(
                "fairness",
                axioms::check_minimal_fairness(args.n, rho, beta, &config)?,
            ));
        }
    }
    if wants(AxiomArg::Monotone) {
        let verdict = axioms::check_strict_monotonicity(
            &problem_for(Fixture::Dominance),
            args.i,
            args.j,
            &config,
        )?;
        if verdict.outcome == Outcome::NotApplicable {
            warn!("monotonicity not applicable: {}", verdict.witness.note);
        }
        lines.push(plain("monotone", verdict));
    }
    if wants(AxiomArg::Invariance) {
        let verdict = axioms::check_invariance(
            &problem_for(Fixture::Counterexample),
            args.row,
            args.lambda,
            &config,
        )?;
        lines.push(plain("invariance", verdict));
    }
    if wants(AxiomArg::Uniformity) {
        let verdict = axioms::check_uniformity(&problem_for(Fixture::Counterexample), &config)?;
        let ok = match verdict.outcome {
            Outcome::NotApplicable => true,
            Outcome::Pass => args.expect == Expectation::Uniform,
            Outcome::Fail => args.expect == Expectation::NonUniform,
        };
        lines.push(CheckLine {
            check: "uniformity",
            ok,
            expected: Some(args.expect),
            verdict,
        });
    }
    if wants(AxiomArg::Gs) {
        let problem = problem_for(Fixture::Counterexample);
        let economy = build_economy(&normalize_preferences(&problem)?)?;
        let n = economy.len();
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        let mut probes = vec![vec![1.0 / n as f64; n]];
        probes.extend((0..4).map(|_| {
            (0..n)
                .map(|_| rng.random_range(0.05..1.0))
                .collect::<Vec<f64>>()
        }));
        if let Ok((eq, _)) = solver::solve(&economy, &config) {
            probes.push(eq.into_vec());
        }
        lines.push(plain(
            "gs",
            axioms::gs_spot_check(&economy, args.good, args.delta, &probes)?,
        ));
    }

    emit(&format!(
        "{}\n",
        serde_json::to_string_pretty(&lines).expect("verdicts serialize")
    ));
    for line in &lines {
        eprintln!(
            "{:<11} {}",
            line.check,
            match (line.ok, line.verdict.outcome) {
                (_, Outcome::NotApplicable) => "not applicable",
                (true, _)
                    if line.check == "uniformity" && line.verdict.outcome == Outcome::Fail =>
                {
                    "pass (non-uniform, as expected)"
                }
                (true, _) => "pass",
                (false, _) => "FAIL",
            }
        );
    }
    Ok(if lines.iter().all(|l| l.ok) { 0 } else { 1 })
}

#[derive(Serialize)]
struct Comparison<'a> {
    format: u32,
    damping: f64,
    agents: &'a [String],
    stationary: &'a [f64],
    equilibrium: &'a [f64],
    max_difference: f64,
    tolerance: f64,
}

fn compare(args: CompareArgs) -> CliResult {
    let doc = io::load_input(&args.input)?;
    let ids = agent_ids(&doc);
    let chain = markov::build_web_transition(&input_graph(&doc), args.damping)?;
    let (stationary, _) =
        markov::stationary_distribution(&chain, StationaryMethod::PowerIteration, 1e-13, 100_000)?;
    let (equilibrium, _) = solver::solve_cobb_douglas(&markov_to_economy(&chain)?)?;
    let (stationary, equilibrium) = (stationary.into_vec(), equilibrium.into_vec());
    let max_difference = stationary
        .iter()
        .zip(&equilibrium)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));

    match args.format {
        Format::Json => {
            let doc = Comparison {
                format: io::FORMAT_VERSION,
                damping: args.damping,
                agents: &ids,
                stationary: &stationary,
                equilibrium: &equilibrium,
                max_difference,
                tolerance: COMPARE_TOL,
            };
            emit(&format!(
                "{}\n",
                serde_json::to_string_pretty(&doc).expect("comparison serializes")
            ));
        }
        Format::Tsv => {
            let mut text = format!(
                "# format: {}\n# agent\tstationary\tequilibrium\n",
                io::FORMAT_VERSION
            );
            for ((id, s), e) in ids.iter().zip(&stationary).zip(&equilibrium) {
                let _ = writeln!(
                    text,
                    "{id}\t{}\t{}",
                    io::format_score(*s),
                    io::format_score(*e)
                );
            }
            let _ = writeln!(text, "# max_difference\t{max_difference:e}");
            emit(&text);
        }
    }
    Ok(if max_difference <= COMPARE_TOL { 0 } else { 1 })
}

fn convert(args: ConvertArgs) -> CliResult {
    let doc = io::load_input(&args.input)?;
    let graph = input_graph(&doc);
    let chain = match args.chain {
        Chain::Pagerank => markov::build_web_transition(&graph, args.damping)?,
        Chain::Invariant => markov::build_invariant_transition(&graph)?,
    };
    emit(&format!(
        "{}\n",
        io::economy_to_document(&markov_to_economy(&chain)?)
    ));
    Ok(0)
}
