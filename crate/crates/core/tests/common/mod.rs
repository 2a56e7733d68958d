#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;

use ces_rank::markov::DirectedGraph;

/// Random digraph without self-loops that contains a Hamiltonian cycle over a
/// shuffled vertex order, so it is strongly connected.
pub fn strongly_connected_graph(rng: &mut impl Rng, n: usize, density: f64) -> DirectedGraph {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = std::collections::BTreeSet::new();
    for k in 0..n {
        edges.insert((order[k], order[(k + 1) % n]));
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random_bool(density) {
                edges.insert((i, j));
            }
        }
    }
    DirectedGraph::new(n, edges).unwrap()
}

/// Random digraph without self-loops where at least one vertex has no
/// outgoing edges.
pub fn graph_with_dangling(rng: &mut impl Rng, n: usize, density: f64) -> DirectedGraph {
    let dangling: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.2)).collect();
    let dangling = if dangling.is_empty() {
        vec![rng.random_range(0..n)]
    } else {
        dangling
    };
    let mut edges = Vec::new();
    for i in (0..n).filter(|i| !dangling.contains(i)) {
        for j in (0..n).filter(|&j| j != i) {
            if rng.random_bool(density) {
                edges.push((i, j));
            }
        }
    }
    DirectedGraph::new(n, edges).unwrap()
}

/// Nonnegative matrix with roughly `zeros` of its entries set to zero.
pub fn sparse_matrix(rng: &mut impl Rng, n: usize, zeros: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..n)
                .map(|_| {
                    if rng.random_bool(zeros) {
                        0.0
                    } else {
                        rng.random_range(0.01..5.0)
                    }
                })
                .collect()
        })
        .collect()
}

pub fn positive_matrix(rng: &mut impl Rng, n: usize) -> Vec<Vec<f64>> {
    sparse_matrix(rng, n, 0.0)
}

/// A random exponent in `[lo, hi]`, snapped to exactly zero inside the
/// rejected band around it.
pub fn rho_in(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    let r = rng.random_range(lo..=hi);
    if r.abs() < 1e-6 {
        0.0
    } else {
        r
    }
}

/// Strictly positive prices on the simplex, each raw draw in `[lo, 1)`.
pub fn interior_prices(rng: &mut impl Rng, n: usize, lo: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(lo..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / total).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// CES utility, evaluated directly from its definition; `rho == 0` is the
/// Cobb-Douglas product with exponents normalized to sum to one.
pub fn ces_utility(alpha: &[f64], rho: f64, x: &[f64]) -> f64 {
    if rho == 0.0 {
        let total: f64 = alpha.iter().sum();
        return alpha
            .iter()
            .zip(x)
            .filter(|(a, _)| **a > 0.0)
            .map(|(a, xi)| (a / total) * xi.ln())
            .sum::<f64>()
            .exp();
    }
    let inner: f64 = alpha
        .iter()
        .zip(x)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, xi)| a * xi.powf(rho))
        .sum();
    inner.powf(1.0 / rho)
}

/// Share of income spent on good 0 by a 2-good CES consumer, found by
/// scanning the budget line on a grid of `steps` interior points.
pub fn grid_search_share(
    alpha: &[f64; 2],
    rho: f64,
    prices: &[f64; 2],
    income: f64,
    steps: usize,
) -> f64 {
    let mut best = (f64::NEG_INFINITY, 0.0);
    for k in 1..steps {
        let s = k as f64 / steps as f64;
        let x = [s * income / prices[0], (1.0 - s) * income / prices[1]];
        let u = ces_utility(alpha, rho, &x);
        if u > best.0 {
            best = (u, s);
        }
    }
    best.1
}
