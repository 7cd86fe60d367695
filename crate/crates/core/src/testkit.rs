//! Seeded random instances for property checks.
//!
//! Graphs start from a random Hamiltonian cycle and add every other ordered
//! pair (self-loops included) independently with probability 1/2. Edge
//! values are log-uniform on `[e⁻², e²]`.

use std::sync::Arc;

use crate::coordinates::{row_normalize, tbar, ExpectationPoint};
use crate::error::Result;
use crate::graph::ChainGraph;
use crate::inference::ChainRng;
use crate::spectral::EdgeFunction;

/// Log-uniform draw on `[lo, hi]`.
pub fn log_uniform(rng: &mut ChainRng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.uniform() * (hi.ln() - lo.ln())).exp()
}

/// Uniform draw on `[lo, hi)`.
pub fn uniform(rng: &mut ChainRng, lo: f64, hi: f64) -> f64 {
    lo + rng.uniform() * (hi - lo)
}

fn below(rng: &mut ChainRng, n: usize) -> usize {
    ((rng.uniform() * n as f64) as usize).min(n - 1)
}

/// Random strongly connected graph on `num_states ≥ 2` states.
pub fn random_graph(rng: &mut ChainRng, num_states: usize) -> Arc<ChainGraph> {
    let mut order: Vec<usize> = (0..num_states).collect();
    for i in (1..num_states).rev() {
        order.swap(i, below(rng, i + 1));
    }
    let mut edges: Vec<(usize, usize)> = (0..num_states)
        .map(|i| (order[i], order[(i + 1) % num_states]))
        .collect();
    for x in 0..num_states {
        for y in 0..num_states {
            if edges.contains(&(x, y)) {
                continue;
            }
            if rng.uniform() < 0.5 {
                edges.push((x, y));
            }
        }
    }
    Arc::new(ChainGraph::new(num_states, &edges).expect("cycle plus extra edges is strongly connected"))
}

pub fn random_edge_function(rng: &mut ChainRng, graph: &Arc<ChainGraph>) -> EdgeFunction {
    let values = (0..graph.num_edges())
        .map(|_| log_uniform(rng, (-2f64).exp(), 2f64.exp()))
        .collect();
    EdgeFunction::new(Arc::clone(graph), values).expect("positive draws")
}

pub fn random_transition(rng: &mut ChainRng, graph: &Arc<ChainGraph>) -> EdgeFunction {
    row_normalize(&random_edge_function(rng, graph))
}

pub fn random_expectation_point(rng: &mut ChainRng, graph: &Arc<ChainGraph>) -> ExpectationPoint {
    let values = (0..graph.num_edges())
        .map(|_| log_uniform(rng, (-2f64).exp(), 2f64.exp()))
        .collect();
    ExpectationPoint::new(Arc::clone(graph), values).expect("positive draws")
}

/// Random point of `M̃` (total mass 1).
pub fn random_mtilde_point(rng: &mut ChainRng, graph: &Arc<ChainGraph>) -> ExpectationPoint {
    let eta = random_expectation_point(rng, graph);
    let total: f64 = eta.values().iter().sum();
    eta.scale(1.0 / total).expect("positive mass")
}

/// Random point of `M`, as the image of a random transition probability.
pub fn random_m_point(rng: &mut ChainRng, graph: &Arc<ChainGraph>) -> Result<ExpectationPoint> {
    tbar(&random_transition(rng, graph))
}

/// Random direction with entries uniform on `[-1, 1)`.
pub fn random_direction(rng: &mut ChainRng, len: usize) -> Vec<f64> {
    (0..len).map(|_| uniform(rng, -1.0, 1.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::strongly_connected;

    #[test]
    fn graphs_are_strongly_connected_both_ways() {
        let mut rng = ChainRng::new(7);
        for n in 2..=8 {
            let g = random_graph(&mut rng, n);
            assert!(strongly_connected(n, g.edges()).unwrap());
            let reversed: Vec<_> = g.edges().iter().map(|&(x, y)| (y, x)).collect();
            assert!(strongly_connected(n, &reversed).unwrap());
        }
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let a = random_graph(&mut ChainRng::new(3), 5);
        let b = random_graph(&mut ChainRng::new(3), 5);
        assert_eq!(a, b);
    }

    #[test]
    fn values_in_range() {
        let mut rng = ChainRng::new(11);
        let g = random_graph(&mut rng, 4);
        let f = random_edge_function(&mut rng, &g);
        for &v in f.values() {
            assert!(((-2f64).exp()..=2f64.exp()).contains(&v));
        }
    }
}
