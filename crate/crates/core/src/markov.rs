//! Markov chains: transition matrices, the PageRank chain, stationary
//! distributions and the graph checks that decide ergodicity.
//!
//! Distributions are column vectors: `pi` is stationary for `P` when
//! `P^T pi = pi`, i.e. `pi` is a left eigenvector of the row-stochastic `P`.

use std::collections::{BTreeSet, VecDeque};
use web_time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{RankError, Result};
use crate::linalg::{self, transpose_mul};
use crate::solver::SolverReport;

/// Default PageRank damping constant.
pub const DEFAULT_DAMPING: f64 = 0.85;

/// Row-sum tolerance for transition matrices.
pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectedGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl DirectedGraph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(RankError::invalid("a graph needs at least one vertex"));
        }
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(RankError::invalid(format!(
                    "edge ({i}, {j}) out of range for {n} vertices"
                )));
            }
            if !set.insert((i, j)) {
                return Err(RankError::invalid(format!("duplicate edge ({i}, {j})")));
            }
        }
        Ok(Self { n, edges: set })
    }

    /// Graph with an edge `i -> j` for every strictly positive `m[i][j]`,
    /// diagonal included.
    pub fn from_support(m: &[Vec<f64>]) -> Self {
        let edges = m
            .iter()
            .enumerate()
            .flat_map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &v)| v > 0.0)
                    .map(move |(j, _)| (i, j))
            })
            .collect();
        Self { n: m.len(), edges }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn self_loop(&self) -> Option<usize> {
        self.edges.iter().find(|(i, j)| i == j).map(|&(i, _)| i)
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
        }
        adj
    }

    fn reverse_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[j].push(i);
        }
        adj
    }
}

/// Row-stochastic matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    p: Vec<Vec<f64>>,
}

impl TransitionMatrix {
    pub fn new(p: Vec<Vec<f64>>) -> Result<Self> {
        let n = p.len();
        if n == 0 {
            return Err(RankError::invalid("empty transition matrix"));
        }
        linalg::check_nonnegative_square(&p, n, "transition matrix")?;
        for (i, row) in p.iter().enumerate() {
            if let Some(j) = row.iter().position(|&v| v > 1.0) {
                return Err(RankError::InvalidEntry {
                    row: i,
                    col: j,
                    value: row[j],
                });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(RankError::invalid(format!(
                    "transition matrix row {i} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(Self { p })
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.p
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i][j]
    }

    /// State transition graph: `i -> j` iff `p_ij > 0`.
    pub fn support_graph(&self) -> DirectedGraph {
        DirectedGraph::from_support(&self.p)
    }

    /// `||P^T pi - pi||_inf`.
    pub fn stationarity_residual(&self, pi: &[f64]) -> f64 {
        let next = transpose_mul(&self.p, pi);
        linalg::max_abs_diff(&next, pi)
    }
}

/// Probability vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution(Vec<f64>);

impl Distribution {
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

/// PageRank chain `P = c * T_bar + (1 - c) / N`, where `T_bar` is the
/// out-degree normalized adjacency matrix with dangling rows replaced by the
/// uniform row.
pub fn build_web_transition(graph: &DirectedGraph, c: f64) -> Result<TransitionMatrix> {
    if !(c > 0.0 && c < 1.0) {
        return Err(RankError::invalid(format!(
            "damping c = {c} is outside (0, 1)"
        )));
    }
    if let Some(v) = graph.self_loop() {
        return Err(RankError::SelfLoop(v));
    }
    let n = graph.len();
    let teleport = (1.0 - c) / n as f64;
    let p = graph
        .adjacency()
        .into_iter()
        .map(|out| {
            if out.is_empty() {
                return vec![c / n as f64 + teleport; n];
            }
            let mut row = vec![teleport; n];
            let share = c / out.len() as f64;
            for j in out {
                row[j] += share;
            }
            row
        })
        .collect();
    TransitionMatrix::new(p)
}

/// Undamped chain `T_ij = 1 / out(i)` used by the invariant method. The
/// graph must be strongly connected.
pub fn build_invariant_transition(graph: &DirectedGraph) -> Result<TransitionMatrix> {
    let components = strongly_connected_components(graph);
    if components.len() > 1 {
        return Err(RankError::NotStronglyConnected { components });
    }
    let n = graph.len();
    let p = graph
        .adjacency()
        .into_iter()
        .map(|out| {
            let mut row = vec![0.0; n];
            let share = 1.0 / out.len() as f64;
            for j in out {
                row[j] = share;
            }
            row
        })
        .collect();
    TransitionMatrix::new(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StationaryMethod {
    /// Iterates `pi <- P^T pi` from the uniform vector. Needs an aperiodic chain.
    PowerIteration,
    /// Solves `(P^T - I) pi = 0` with one equation replaced by `sum(pi) = 1`.
    /// Works for every irreducible chain, periodic ones included.
    LinearSolve,
}

impl StationaryMethod {
    /// Linear solve up to this many states, power iteration above.
    pub const LINEAR_SOLVE_LIMIT: usize = 2000;

    pub fn for_size(n: usize) -> Self {
        if n <= Self::LINEAR_SOLVE_LIMIT {
            StationaryMethod::LinearSolve
        } else {
            StationaryMethod::PowerIteration
        }
    }

    fn name(self) -> &'static str {
        match self {
            StationaryMethod::PowerIteration => "power_iteration",
            StationaryMethod::LinearSolve => "linear_solve",
        }
    }
}

/// Stationary distribution of `p`.
///
/// For power iteration `tolerance` bounds the L1 step `||pi_{t+1} - pi_t||_1`;
/// for the linear solve it bounds the returned residual `||P^T pi - pi||_inf`.
/// The report always carries the final `||P^T pi - pi||_inf`.
pub fn stationary_distribution(
    p: &TransitionMatrix,
    method: StationaryMethod,
    tolerance: f64,
    max_iters: usize,
) -> Result<(Distribution, SolverReport)> {
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(RankError::invalid(format!(
            "tolerance = {tolerance} must be positive"
        )));
    }
    let start = Instant::now();
    let (pi, iterations) = match method {
        StationaryMethod::PowerIteration => power_iteration(p, tolerance, max_iters)?,
        StationaryMethod::LinearSolve => (linear_solve(p)?, 1),
    };
    let residual = p.stationarity_residual(&pi);
    if method == StationaryMethod::LinearSolve && residual > tolerance {
        return Err(RankError::NotConverged {
            method: method.name(),
            iterations,
            residual,
            last_iterate: pi,
            residual_tail: vec![residual],
            hint: "the chain is badly conditioned; try power iteration",
        });
    }
    let report = SolverReport {
        method: method.name().to_string(),
        iterations,
        residual,
        converged: true,
        elapsed: start.elapsed(),
    };
    Ok((Distribution(pi), report))
}

fn power_iteration(
    p: &TransitionMatrix,
    tolerance: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = p.len();
    let mut pi = vec![1.0 / n as f64; n];
    let mut tail = VecDeque::with_capacity(8);
    let mut step = f64::INFINITY;
    for iter in 1..=max_iters {
        let mut next = transpose_mul(p.rows(), &pi);
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        step = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if tail.len() == 8 {
            tail.pop_front();
        }
        tail.push_back(step);
        if step <= tolerance {
            return Ok((pi, iter));
        }
    }
    Err(RankError::NotConverged {
        method: StationaryMethod::PowerIteration.name(),
        iterations: max_iters,
        residual: step,
        last_iterate: pi,
        residual_tail: tail.into(),
        hint: "periodic or slowly mixing chain; use the linear solve",
    })
}

fn linear_solve(p: &TransitionMatrix) -> Result<Vec<f64>> {
    let n = p.len();
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| p.get(j, i) - if i == j { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    a[n - 1] = vec![1.0; n];
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    let mut pi = linalg::solve_dense(a, b)?;

    if let Some(i) = pi.iter().position(|&v| v < -1e-12) {
        return Err(RankError::invalid(format!(
            "stationary solve produced negative mass {:e} at state {i}; the chain is not irreducible",
            pi[i]
        )));
    }
    pi.iter_mut().for_each(|v| *v = v.max(0.0));
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= total);
    Ok(pi)
}

/// Strongly connected components, each sorted ascending, ordered by their
/// smallest vertex.
pub fn strongly_connected_components(graph: &DirectedGraph) -> Vec<Vec<usize>> {
    let n = graph.len();
    let adj = graph.adjacency();
    let radj = graph.reverse_adjacency();

    // Kosaraju, first pass: finishing order.
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for root in 0..n {
        if visited[root] {
            continue;
        }
        visited[root] = true;
        let mut stack = vec![(root, 0usize)];
        while let Some((v, next)) = stack.pop() {
            if let Some(&w) = adj[v].get(next) {
                stack.push((v, next + 1));
                if !visited[w] {
                    visited[w] = true;
                    stack.push((w, 0));
                }
            } else {
                order.push(v);
            }
        }
    }

    let mut component = vec![usize::MAX; n];
    let mut components: Vec<Vec<usize>> = Vec::new();
    for &root in order.iter().rev() {
        if component[root] != usize::MAX {
            continue;
        }
        let id = components.len();
        component[root] = id;
        let mut members = vec![root];
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            for &w in &radj[v] {
                if component[w] == usize::MAX {
                    component[w] = id;
                    members.push(w);
                    stack.push(w);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    components.sort_by_key(|c| c[0]);
    components
}

pub fn is_strongly_connected(graph: &DirectedGraph) -> bool {
    strongly_connected_components(graph).len() == 1
}

/// Aperiodicity of a strongly connected graph: the gcd of
/// `level(u) + 1 - level(v)` over all edges, with BFS levels from vertex 0,
/// equals the gcd of cycle lengths.
pub fn is_aperiodic(graph: &DirectedGraph) -> Result<bool> {
    let components = strongly_connected_components(graph);
    if components.len() > 1 {
        return Err(RankError::NotStronglyConnected { components });
    }
    let adj = graph.adjacency();
    let mut level = vec![usize::MAX; graph.len()];
    level[0] = 0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if level[w] == usize::MAX {
                level[w] = level[v] + 1;
                queue.push_back(w);
            }
        }
    }
    let period = graph.edges().fold(0usize, |g, (u, v)| {
        gcd(g, (level[u] + 1).abs_diff(level[v]))
    });
    Ok(period == 1)
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(usize, usize)]) -> DirectedGraph {
        DirectedGraph::new(n, edges.iter().copied()).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn web_transition_two_cycle() {
        let p = build_web_transition(&graph(2, &[(0, 1), (1, 0)]), 0.85).unwrap();
        assert!(close(&p.rows()[0], &[0.075, 0.925], 1e-15));
        assert!(close(&p.rows()[1], &[0.925, 0.075], 1e-15));
    }

    #[test]
    fn web_transition_dangling_row_is_uniform() {
        let p = build_web_transition(&graph(2, &[(0, 1)]), 0.85).unwrap();
        assert!(close(&p.rows()[1], &[0.5, 0.5], 1e-15));
        assert!(close(&p.rows()[0], &[0.075, 0.925], 1e-15));
    }

    #[test]
    fn web_transition_three_nodes() {
        // Hand evaluation: teleport 0.05; vertex 0 splits 0.85 over {1, 2}.
        let p = build_web_transition(&graph(3, &[(0, 1), (0, 2), (1, 2), (2, 0)]), 0.85).unwrap();
        let want = [[0.05, 0.475, 0.475], [0.05, 0.05, 0.90], [0.90, 0.05, 0.05]];
        for (row, w) in p.rows().iter().zip(want) {
            assert!(close(row, &w, 1e-15), "{row:?}");
        }
    }

    #[test]
    fn web_transition_rejects_bad_input() {
        assert!(matches!(
            build_web_transition(&graph(2, &[(0, 0)]), 0.85),
            Err(RankError::SelfLoop(0))
        ));
        assert!(build_web_transition(&graph(2, &[(0, 1)]), 1.0).is_err());
        assert!(build_web_transition(&graph(2, &[(0, 1)]), 0.0).is_err());
    }

    #[test]
    fn graph_rejects_duplicates_and_range() {
        assert!(DirectedGraph::new(2, [(0, 1), (0, 1)]).is_err());
        assert!(DirectedGraph::new(2, [(0, 2)]).is_err());
        assert!(DirectedGraph::new(0, []).is_err());
    }

    #[test]
    fn two_cycle_linear_solve_only() {
        let p = TransitionMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let (pi, _) = stationary_distribution(&p, StationaryMethod::LinearSolve, 1e-10, 1).unwrap();
        assert!(close(pi.as_slice(), &[0.5, 0.5], 1e-15));
        // the uniform start is already stationary, so even the periodic chain stops at once
        let (pi, report) =
            stationary_distribution(&p, StationaryMethod::PowerIteration, 1e-12, 1000).unwrap();
        assert_eq!(report.iterations, 1);
        assert!(close(pi.as_slice(), &[0.5, 0.5], 0.0));
    }

    #[test]
    fn periodic_chain_power_iteration_fails() {
        let p = TransitionMatrix::new(vec![
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.5, 0.0, 0.5],
        ])
        .unwrap();
        // aperiodic (self-loop at 2) so this converges
        assert!(
            stationary_distribution(&p, StationaryMethod::PowerIteration, 1e-12, 100_000).is_ok()
        );

        let bipartite = TransitionMatrix::new(vec![
            vec![0.0, 0.5, 0.5],
            vec![1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap();
        let err = stationary_distribution(&bipartite, StationaryMethod::PowerIteration, 1e-12, 500)
            .unwrap_err();
        assert!(matches!(
            err,
            RankError::NotConverged {
                iterations: 500,
                ..
            }
        ));
        let (pi, _) =
            stationary_distribution(&bipartite, StationaryMethod::LinearSolve, 1e-10, 1).unwrap();
        assert!(close(pi.as_slice(), &[0.5, 0.25, 0.25], 1e-15));
    }

    #[test]
    fn symmetric_doubly_stochastic() {
        let p = TransitionMatrix::new(vec![vec![0.075, 0.925], vec![0.925, 0.075]]).unwrap();
        for method in [
            StationaryMethod::LinearSolve,
            StationaryMethod::PowerIteration,
        ] {
            let (pi, report) = stationary_distribution(&p, method, 1e-12, 100_000).unwrap();
            assert!(close(pi.as_slice(), &[0.5, 0.5], 1e-12));
            assert!(report.converged);
        }
    }

    #[test]
    fn three_state_chain() {
        // pi P = pi with P = [[0,.5,.5],[0,0,1],[1,0,0]]:
        // pi0 = pi2, pi1 = pi0/2, pi2 = pi0/2 + pi1 => (2,1,2)/5.
        let p = TransitionMatrix::new(vec![
            vec![0.0, 0.5, 0.5],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap();
        let (pi, report) =
            stationary_distribution(&p, StationaryMethod::LinearSolve, 1e-10, 1).unwrap();
        assert!(close(pi.as_slice(), &[0.4, 0.2, 0.4], 1e-15));
        assert!(report.residual <= 1e-15);
        let (pi, _) =
            stationary_distribution(&p, StationaryMethod::PowerIteration, 1e-13, 100_000).unwrap();
        assert!(close(pi.as_slice(), &[0.4, 0.2, 0.4], 1e-12));
    }

    #[test]
    fn rejects_non_stochastic() {
        assert!(TransitionMatrix::new(vec![vec![0.5, 0.4], vec![0.5, 0.5]]).is_err());
        assert!(TransitionMatrix::new(vec![vec![1.5, -0.5], vec![0.5, 0.5]]).is_err());
    }

    #[test]
    fn strong_connectivity() {
        assert!(is_strongly_connected(&graph(2, &[(0, 1), (1, 0)])));
        assert!(!is_strongly_connected(&graph(2, &[(0, 1)])));
        let complete: Vec<_> = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).collect();
        assert!(is_strongly_connected(&graph(3, &complete)));
        let comps =
            strongly_connected_components(&graph(4, &[(0, 1), (1, 0), (2, 3), (3, 2), (1, 2)]));
        assert_eq!(comps, vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn aperiodicity() {
        assert!(!is_aperiodic(&graph(2, &[(0, 1), (1, 0)])).unwrap());
        assert!(!is_aperiodic(&graph(3, &[(0, 1), (1, 0), (0, 2), (2, 0)])).unwrap());
        assert!(is_aperiodic(&graph(4, &[(0, 1), (1, 2), (2, 0), (0, 3), (3, 0)])).unwrap());
        assert!(is_aperiodic(&graph(2, &[(0, 1), (1, 0), (0, 0)])).unwrap());
        assert!(is_aperiodic(&graph(2, &[(0, 1)])).is_err());
    }

    #[test]
    fn invariant_transition_requires_irreducibility() {
        assert!(matches!(
            build_invariant_transition(&graph(3, &[(0, 1), (1, 0), (1, 2)])),
            Err(RankError::NotStronglyConnected { .. })
        ));
        let p = build_invariant_transition(&graph(3, &[(0, 1), (0, 2), (1, 2), (2, 0)])).unwrap();
        assert!(close(&p.rows()[0], &[0.0, 0.5, 0.5], 0.0));
    }
}
