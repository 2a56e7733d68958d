//! File formats.
//!
//! *Problem documents* are JSON objects:
//!
//! ```text
//! { "format": 1,
//!   "agents": ["a", "b"],
//!   "alpha": [[0, 1], [1, 0]]            // or {"triplets": [[i, j, value], ...]}
//!   "rho": 0.5,                          // or one value per agent
//!   "beta": 0.85 }                       // optional
//! ```
//!
//! *Edge lists* are line oriented: a `format: 1` line, a `n <count>` header,
//! then `i j [weight]` lines with 0-based indices (weight defaults to 1).
//! Lines starting with `#` are comments.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::economy::CesEconomy;
use crate::error::{RankError, Result};
use crate::markov::DirectedGraph;
use crate::problem::{index_ids, RankingProblem, DEFAULT_BETA};
use crate::solver::{rank_order, SolverReport, TIE_TOLERANCE};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemDocument {
    format: u32,
    agents: Vec<String>,
    alpha: AlphaSpec,
    rho: RhoSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum AlphaSpec {
    Dense(Vec<Vec<f64>>),
    Sparse { triplets: Vec<(usize, usize, f64)> },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum RhoSpec {
    Common(f64),
    PerAgent(Vec<f64>),
}

fn check_version(found: u32, location: &str) -> Result<()> {
    if found != FORMAT_VERSION {
        return Err(RankError::parse(
            location,
            format!("unsupported format version {found}, expected {FORMAT_VERSION}"),
        ));
    }
    Ok(())
}

fn check_weight(value: f64, location: impl FnOnce() -> String) -> Result<()> {
    if !value.is_finite() || value < 0.0 {
        return Err(RankError::parse(
            location(),
            format!("weight {value} must be finite and nonnegative"),
        ));
    }
    Ok(())
}

pub fn load_problem(path: impl AsRef<Path>) -> Result<RankingProblem> {
    parse_problem(&std::fs::read_to_string(path)?)
}

pub fn parse_problem(text: &str) -> Result<RankingProblem> {
    let syntax = |e: serde_json::Error| {
        RankError::parse(
            format!("line {}, column {}", e.line(), e.column()),
            e.to_string(),
        )
    };
    let value: serde_json::Value = serde_json::from_str(text).map_err(syntax)?;
    match value.get("format").and_then(serde_json::Value::as_u64) {
        Some(v) => check_version(u32::try_from(v).unwrap_or(u32::MAX), "format")?,
        None => {
            return Err(RankError::parse(
                "format",
                "missing or non-integer format version",
            ))
        }
    }
    let doc: ProblemDocument =
        serde_json::from_value(value).map_err(|e| RankError::parse("document", e.to_string()))?;
    let n = doc.agents.len();

    let alpha = match doc.alpha {
        AlphaSpec::Dense(rows) => {
            if rows.len() != n {
                return Err(RankError::parse(
                    "alpha",
                    format!("{} rows for {n} agents", rows.len()),
                ));
            }
            for (i, row) in rows.iter().enumerate() {
                if row.len() != n {
                    return Err(RankError::parse(
                        format!("alpha row {i}"),
                        format!("{} entries, expected {n}", row.len()),
                    ));
                }
                for (j, &v) in row.iter().enumerate() {
                    check_weight(v, || format!("alpha[{i}][{j}]"))?;
                }
            }
            rows
        }
        AlphaSpec::Sparse { triplets } => {
            let mut alpha = vec![vec![0.0; n]; n];
            let mut seen = BTreeSet::new();
            for (k, &(i, j, v)) in triplets.iter().enumerate() {
                let location = || format!("alpha.triplets[{k}]");
                if i >= n || j >= n {
                    return Err(RankError::parse(
                        location(),
                        format!("index ({i}, {j}) out of range for {n} agents"),
                    ));
                }
                if !seen.insert((i, j)) {
                    return Err(RankError::parse(
                        location(),
                        format!("duplicate entry ({i}, {j})"),
                    ));
                }
                check_weight(v, location)?;
                alpha[i][j] = v;
            }
            alpha
        }
    };

    let rho = match doc.rho {
        RhoSpec::Common(r) => vec![r; n],
        RhoSpec::PerAgent(r) => {
            if r.len() != n {
                return Err(RankError::parse(
                    "rho",
                    format!("{} values for {n} agents", r.len()),
                ));
            }
            r
        }
    };
    let beta = doc.beta.unwrap_or(DEFAULT_BETA);
    RankingProblem::new(doc.agents, alpha, rho, beta)
        .map_err(|e| RankError::parse("document", e.to_string()))
}

/// Dense JSON document; `rho` is written as a scalar when it is common.
pub fn problem_to_document(problem: &RankingProblem) -> String {
    let rho = if problem.has_common_rho() {
        RhoSpec::Common(problem.rho()[0])
    } else {
        RhoSpec::PerAgent(problem.rho().to_vec())
    };
    let doc = ProblemDocument {
        format: FORMAT_VERSION,
        agents: problem.agent_ids().to_vec(),
        alpha: AlphaSpec::Dense(problem.alpha().to_vec()),
        rho,
        beta: Some(problem.beta()),
    };
    serde_json::to_string_pretty(&doc).expect("problem documents always serialize")
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeList {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl EdgeList {
    /// Edges with positive weight; weights are dropped.
    pub fn graph(&self) -> DirectedGraph {
        DirectedGraph::new(
            self.n,
            self.edges
                .iter()
                .filter(|e| e.2 > 0.0)
                .map(|&(i, j, _)| (i, j)),
        )
        .expect("edge lists are validated on parse")
    }

    /// Weighted adjacency matrix, used as a preference matrix.
    pub fn alpha(&self) -> Vec<Vec<f64>> {
        let mut alpha = vec![vec![0.0; self.n]; self.n];
        for &(i, j, w) in &self.edges {
            alpha[i][j] = w;
        }
        alpha
    }

    pub fn to_problem(&self, rho: f64, beta: f64) -> Result<RankingProblem> {
        RankingProblem::new(index_ids(self.n), self.alpha(), vec![rho; self.n], beta)
    }
}

pub fn load_edge_list(path: impl AsRef<Path>) -> Result<EdgeList> {
    parse_edge_list(&std::fs::read_to_string(path)?)
}

pub fn parse_edge_list(text: &str) -> Result<EdgeList> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (line_no, line) = lines
        .next()
        .ok_or_else(|| RankError::parse("line 1", "empty edge list"))?;
    let version = line
        .strip_prefix("format:")
        .ok_or_else(|| RankError::parse(format!("line {line_no}"), "expected `format: 1`"))?;
    let version: u32 = version
        .trim()
        .parse()
        .map_err(|_| RankError::parse(format!("line {line_no}"), "malformed format version"))?;
    check_version(version, &format!("line {line_no}"))?;

    let (line_no, line) = lines
        .next()
        .ok_or_else(|| RankError::parse("end of input", "missing `n <count>` header"))?;
    let n = match line.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["n", count] => count.parse::<usize>().map_err(|_| {
            RankError::parse(
                format!("line {line_no}"),
                format!("malformed vertex count {count:?}"),
            )
        })?,
        _ => {
            return Err(RankError::parse(
                format!("line {line_no}"),
                "expected `n <count>` header",
            ))
        }
    };
    if n == 0 {
        return Err(RankError::parse(
            format!("line {line_no}"),
            "vertex count must be positive",
        ));
    }

    let mut edges = Vec::new();
    let mut seen = BTreeSet::new();
    for (line_no, line) in lines {
        let location = || format!("line {line_no}");
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(RankError::parse(location(), "expected `i j [weight]`"));
        }
        let index = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| RankError::parse(location(), format!("malformed index {s:?}")))
        };
        let (i, j) = (index(fields[0])?, index(fields[1])?);
        if i >= n || j >= n {
            return Err(RankError::parse(
                location(),
                format!("index ({i}, {j}) out of range for n = {n}"),
            ));
        }
        let weight = match fields.get(2) {
            Some(s) => s
                .parse::<f64>()
                .map_err(|_| RankError::parse(location(), format!("malformed weight {s:?}")))?,
            None => 1.0,
        };
        check_weight(weight, location)?;
        if !seen.insert((i, j)) {
            return Err(RankError::parse(
                location(),
                format!("duplicate edge ({i}, {j})"),
            ));
        }
        edges.push((i, j, weight));
    }
    Ok(EdgeList { n, edges })
}

/// Either input format, told apart by the first non-blank character.
#[derive(Debug, Clone, PartialEq)]
pub enum InputDocument {
    Problem(RankingProblem),
    Graph(EdgeList),
}

pub fn parse_input(text: &str) -> Result<InputDocument> {
    if text.trim_start().starts_with('{') {
        parse_problem(text).map(InputDocument::Problem)
    } else {
        parse_edge_list(text).map(InputDocument::Graph)
    }
}

pub fn load_input(path: impl AsRef<Path>) -> Result<InputDocument> {
    parse_input(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Serialize)]
struct EconomyDocument<'a> {
    format: u32,
    traders: usize,
    alpha: &'a [Vec<f64>],
    rho: &'a [f64],
    endowment: &'a [Vec<f64>],
}

pub fn economy_to_document(economy: &CesEconomy) -> String {
    serde_json::to_string_pretty(&EconomyDocument {
        format: FORMAT_VERSION,
        traders: economy.len(),
        alpha: economy.alpha(),
        rho: economy.rho(),
        endowment: economy.endowment(),
    })
    .expect("economy documents always serialize")
}

/// Twelve significant digits, fixed notation.
pub fn format_score(score: f64) -> String {
    if score == 0.0 || !score.is_finite() {
        return format!("{score:.11}");
    }
    let exponent = score.abs().log10().floor() as i32;
    let decimals = (11 - exponent).max(0) as usize;
    format!("{score:.decimals$}")
}

/// `# format: 1` followed by `rank<TAB>agent<TAB>score` lines, best first.
pub fn ranking_tsv(agent_ids: &[String], scores: &[f64]) -> String {
    let mut out = format!("# format: {FORMAT_VERSION}\n");
    for entry in rank_order(scores, TIE_TOLERANCE) {
        let _ = writeln!(
            out,
            "{}\t{}\t{}",
            entry.rank,
            agent_ids[entry.index],
            format_score(scores[entry.index])
        );
    }
    out
}

#[derive(Debug, Serialize)]
struct RankingLine<'a> {
    rank: usize,
    agent: &'a str,
    score: f64,
    tied: bool,
}

#[derive(Debug, Serialize)]
struct RankingDocument<'a> {
    format: u32,
    method: &'a str,
    ranking: Vec<RankingLine<'a>>,
    report: &'a SolverReport,
}

pub fn ranking_json(
    method: &str,
    agent_ids: &[String],
    scores: &[f64],
    report: &SolverReport,
) -> String {
    let ranking = rank_order(scores, TIE_TOLERANCE)
        .into_iter()
        .map(|e| RankingLine {
            rank: e.rank,
            agent: &agent_ids[e.index],
            score: scores[e.index],
            tied: e.tied,
        })
        .collect();
    let doc = RankingDocument {
        format: FORMAT_VERSION,
        method,
        ranking,
        report,
    };
    serde_json::to_string_pretty(&doc).expect("ranking documents always serialize")
}

/// Bundled problems used by `cesrank verify`.
pub mod fixtures {
    use super::parse_problem;
    use crate::problem::RankingProblem;

    pub const COUNTEREXAMPLE: &str = include_str!("../fixtures/counterexample.json");
    pub const DOMINANCE: &str = include_str!("../fixtures/dominance.json");
    pub const HETEROGENEOUS: &str = include_str!("../fixtures/heterogeneous.json");

    /// Regular 3-agent problem with `rho = 1/2` whose CES ranking is not
    /// uniform. Rows are `(1/3,1/3,1/3)`, `(5/12,1/6,5/12)`, `(1/4,1/2,1/4)`,
    /// stored scaled by 12.
    pub fn counterexample() -> RankingProblem {
        parse_problem(COUNTEREXAMPLE).expect("bundled fixture parses")
    }

    /// Column 0 is dominated by column 1; common `rho = 0.5`.
    pub fn dominance() -> RankingProblem {
        parse_problem(DOMINANCE).expect("bundled fixture parses")
    }

    /// Mixed elasticities, so strict monotonicity does not apply.
    pub fn heterogeneous() -> RankingProblem {
        parse_problem(HETEROGENEOUS).expect("bundled fixture parses")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_problem() {
        let p = parse_problem(
            r#"{"format": 1, "agents": ["x", "y"], "alpha": [[0, 1], [1, 0]], "rho": 0.5}"#,
        )
        .unwrap();
        assert_eq!(p.alpha(), &[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(p.rho(), &[0.5, 0.5]);
        assert_eq!(p.beta(), DEFAULT_BETA);
    }

    #[test]
    fn triplet_problem() {
        let p = parse_problem(
            r#"{"format": 1, "agents": ["x", "y"], "alpha": {"triplets": [[0, 1, 3.0], [1, 0, 2.0]]}, "rho": [0, 0.5], "beta": 1}"#,
        )
        .unwrap();
        assert_eq!(p.alpha(), &[vec![0.0, 3.0], vec![2.0, 0.0]]);
        assert_eq!(p.rho(), &[0.0, 0.5]);
    }

    fn parse_err(text: &str) -> (String, String) {
        match parse_problem(text) {
            Err(RankError::Parse { location, message }) => (location, message),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn problem_errors_carry_locations() {
        let (loc, msg) =
            parse_err(r#"{"format": 1, "agents": ["x", "y"], "alpha": [[0, 1], [1]], "rho": 0.5}"#);
        assert_eq!(loc, "alpha row 1");
        assert!(msg.contains("1 entries"));

        let (loc, _) = parse_err(
            r#"{"format": 1, "agents": ["x", "y"], "alpha": [[0, -1], [1, 0]], "rho": 0.5}"#,
        );
        assert_eq!(loc, "alpha[0][1]");

        let (loc, _) = parse_err(
            r#"{"format": 1, "agents": ["x", "y"], "alpha": {"triplets": [[0, 1, 1], [0, 1, 2]]}, "rho": 0.5}"#,
        );
        assert_eq!(loc, "alpha.triplets[1]");

        let (loc, _) = parse_err(
            r#"{"format": 1, "agents": ["x", "y"], "alpha": {"triplets": [[0, 2, 1]]}, "rho": 0.5}"#,
        );
        assert_eq!(loc, "alpha.triplets[0]");

        let (loc, _) = parse_err("{\"format\": 1,\n \"agents\": [\"x\"],\n \"alpha\": [[1,]]}");
        assert!(loc.starts_with("line 3"), "{loc}");

        let (loc, _) = parse_err(r#"{"format": 2, "agents": ["x"], "alpha": [[1]], "rho": 0}"#);
        assert_eq!(loc, "format");

        let (_, msg) = parse_err(r#"{"format": 1, "agents": ["x"], "alpha": [[1]], "rho": 1.5}"#);
        assert!(msg.contains("rho"));
    }

    #[test]
    fn edge_list_parsing() {
        let g = parse_edge_list("format: 1\n# comment\nn 3\n0 1\n1 2 0.5\n\n2 0\n").unwrap();
        assert_eq!(g.n, 3);
        assert_eq!(g.edges, vec![(0, 1, 1.0), (1, 2, 0.5), (2, 0, 1.0)]);
        assert_eq!(g.graph().edge_count(), 3);
    }

    #[test]
    fn edge_list_errors() {
        let cases = [
            ("n 2\n0 1\n", "line 1"),
            ("format: 1\n0 1\n", "line 2"),
            ("format: 1\nn 2\n0 2\n", "line 3"),
            ("format: 1\nn 2\n0 1 -1\n", "line 3"),
            ("format: 1\nn 2\n0 1\n0 1\n", "line 4"),
            ("format: 1\nn 2\n0 x\n", "line 3"),
            ("format: 1\nn 2\n0 1 1,5\n", "line 3"),
        ];
        for (text, want) in cases {
            match parse_edge_list(text) {
                Err(RankError::Parse { location, .. }) => assert_eq!(location, want, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn input_detection() {
        assert!(matches!(
            parse_input(fixtures::COUNTEREXAMPLE).unwrap(),
            InputDocument::Problem(_)
        ));
        assert!(matches!(
            parse_input(include_str!("../fixtures/cycle.edges")).unwrap(),
            InputDocument::Graph(_)
        ));
    }

    #[test]
    fn fixtures_parse() {
        assert_eq!(fixtures::counterexample().len(), 3);
        assert!(fixtures::dominance().has_common_rho());
        assert!(!fixtures::heterogeneous().has_common_rho());
    }

    #[test]
    fn score_formatting() {
        assert_eq!(format_score(0.5), "0.500000000000");
        assert_eq!(format_score(0.123456789012345), "0.123456789012");
        assert_eq!(format_score(1.0), "1.00000000000");
        assert_eq!(format_score(0.000123456789012345), "0.000123456789012");
    }

    #[test]
    fn tsv_output() {
        let ids = vec!["a".to_string(), "b".to_string()];
        let out = ranking_tsv(&ids, &[0.25, 0.75]);
        assert_eq!(
            out,
            "# format: 1\n1\tb\t0.750000000000\n2\ta\t0.250000000000\n"
        );
    }
}
