//! Positive edge functions and the Perron–Frobenius data of `A(f)`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::ChainGraph;

/// Stopping threshold on the max-norm change of successive iterates.
pub const POWER_TOLERANCE: f64 = 1e-14;
/// Iteration budget for each power iteration.
pub const POWER_MAX_ITERATIONS: usize = 1_000_000;

/// A strictly positive function on the edges of a graph, in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFunction {
    graph: Arc<ChainGraph>,
    values: Vec<f64>,
}

impl EdgeFunction {
    pub fn new(graph: Arc<ChainGraph>, values: Vec<f64>) -> Result<Self> {
        validate_positive(&graph, &values)?;
        Ok(Self { graph, values })
    }

    /// Builds the function by evaluating `value` on every edge.
    pub fn from_fn(graph: Arc<ChainGraph>, value: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let values = graph.edges().iter().map(|&(x, y)| value(x, y)).collect();
        Self::new(graph, values)
    }

    /// The constant function 1 on every edge.
    pub fn ones(graph: Arc<ChainGraph>) -> Self {
        let values = vec![1.0; graph.num_edges()];
        Self { graph, values }
    }

    pub fn graph(&self) -> &Arc<ChainGraph> {
        &self.graph
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value on edge `(x, y)`, or `None` when it is not an edge.
    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        self.graph.edge_index(x, y).map(|k| self.values[k])
    }

    /// Sum of the values on the edges leaving `x`.
    pub fn row_sum(&self, x: usize) -> f64 {
        self.graph.outgoing(x).iter().map(|&k| self.values[k]).sum()
    }

    /// Pointwise product `a·f`.
    pub fn scale(&self, a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::NonpositiveScale(a));
        }
        Ok(Self {
            graph: Arc::clone(&self.graph),
            values: self.values.iter().map(|v| a * v).collect(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub(crate) fn validate_positive(graph: &ChainGraph, values: &[f64]) -> Result<()> {
    if values.len() != graph.num_edges() {
        return Err(Error::LengthMismatch {
            expected: graph.num_edges(),
            got: values.len(),
        });
    }
    for (&(x, y), &value) in graph.edges().iter().zip(values) {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::NonPositiveValue { x, y, value });
        }
    }
    Ok(())
}

pub(crate) fn same_graph(a: &Arc<ChainGraph>, b: &Arc<ChainGraph>) -> Result<()> {
    if Arc::ptr_eq(a, b) || a == b {
        Ok(())
    } else {
        Err(Error::GraphMismatch)
    }
}

/// Perron–Frobenius root and the positive eigenvectors of `A(f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    /// Perron–Frobenius root `r(f)`.
    pub root: f64,
    /// Left eigenvector (the stationary distribution `μ_f`), summing to 1.
    pub left_vec: Vec<f64>,
    /// Right eigenvector, summing to 1.
    pub right_vec: Vec<f64>,
}

/// The dense matrix `A(f)`: `f(i, j)` on edges, 0 elsewhere.
pub fn matrix_of(f: &EdgeFunction) -> DMatrix<f64> {
    let n = f.graph.num_states();
    let mut a = DMatrix::zeros(n, n);
    for (&(x, y), &v) in f.graph.edges().iter().zip(&f.values) {
        a[(x, y)] = v;
    }
    a
}

/// Computes `r(f)`, `μ_f` and the right eigenvector by shifted power iteration.
///
/// The iteration runs on `B + cI` with `B = A(f) / max f` and
/// `c = 1 + max diag(B)`. The positive diagonal makes the shifted matrix
/// primitive, so the iteration converges even when `A(f)` is periodic
/// (e.g. a pure cycle). Dividing by `max f` first makes the convergence
/// rate independent of the overall scale of `f`.
pub fn perron(f: &EdgeFunction) -> Result<SpectralData> {
    let graph = &f.graph;
    let n = graph.num_states();
    let scale = f.max_abs();
    let weights: Vec<f64> = f.values.iter().map(|v| v / scale).collect();
    let shift = 1.0
        + graph
            .edges()
            .iter()
            .zip(&weights)
            .filter(|(&(x, y), _)| x == y)
            .fold(0.0_f64, |m, (_, &w)| m.max(w));

    let right_vec = power_iterate(n, shift, |x, y| {
        for (&(s, t), &w) in graph.edges().iter().zip(&weights) {
            y[s] += w * x[t];
        }
    })?;
    let left_vec = power_iterate(n, shift, |x, y| {
        for (&(s, t), &w) in graph.edges().iter().zip(&weights) {
            y[t] += x[s] * w;
        }
    })?;

    // Two-sided Rayleigh quotient μᵀBv / μᵀv.
    let numerator: f64 = graph
        .edges()
        .iter()
        .zip(&weights)
        .map(|(&(s, t), &w)| left_vec[s] * w * right_vec[t])
        .sum();
    let denominator: f64 = left_vec.iter().zip(&right_vec).map(|(a, b)| a * b).sum();
    Ok(SpectralData {
        root: scale * numerator / denominator,
        left_vec,
        right_vec,
    })
}

fn power_iterate(n: usize, shift: f64, apply: impl Fn(&[f64], &mut [f64])) -> Result<Vec<f64>> {
    let mut x = vec![1.0 / n as f64; n];
    let mut y = vec![0.0; n];
    for _ in 0..POWER_MAX_ITERATIONS {
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi = shift * xi;
        }
        apply(&x, &mut y);
        let total: f64 = y.iter().sum();
        let mut change = 0.0_f64;
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi /= total;
            change = change.max((*yi - xi).abs());
        }
        std::mem::swap(&mut x, &mut y);
        if change < POWER_TOLERANCE {
            return Ok(x);
        }
    }
    Err(Error::NoConvergence(POWER_MAX_ITERATIONS))
}

/// `∂r/∂a_st` at `f` by first-order eigenvalue perturbation: `μ_s v_t / μᵀv`.
pub fn root_derivative(f: &EdgeFunction, edge: (usize, usize)) -> Result<f64> {
    f.graph.require_edge(edge.0, edge.1)?;
    let spectral = perron(f)?;
    Ok(root_derivative_from(&spectral, edge))
}

/// Root derivative from precomputed spectral data (no edge check).
pub fn root_derivative_from(spectral: &SpectralData, (s, t): (usize, usize)) -> f64 {
    let overlap: f64 = spectral
        .left_vec
        .iter()
        .zip(&spectral.right_vec)
        .map(|(a, b)| a * b)
        .sum();
    spectral.left_vec[s] * spectral.right_vec[t] / overlap
}

/// Gradient of `r` with respect to every edge coordinate, in canonical order.
pub fn root_gradient(f: &EdgeFunction, spectral: &SpectralData) -> Vec<f64> {
    f.graph
        .edges()
        .iter()
        .map(|&e| root_derivative_from(spectral, e))
        .collect()
}

/// Pointwise scaling `a·f`; `r(af) = a·r(f)` and `μ_af = μ_f`.
pub fn scale(f: &EdgeFunction, a: f64) -> Result<EdgeFunction> {
    f.scale(a)
}
