//! Expectation coordinates on the space of positive edge functions.
//!
//! `tbar` sends `f` to `η_xy = μ_f(x)·f(x, y)` and `taubar` inverts it with
//! `f(x, y) = r(η)·η_xy / η^x`, where `r(η)` is the total mass and `η^x` the
//! incoming marginal. Membership in the transition probabilities `W`, the
//! positive transition measures `W̃ = {r(f) = 1}`, the normalized section `M̃`
//! and the genuine expectation space `M` are predicates, not types.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::ChainGraph;
use crate::spectral::{perron, validate_positive, EdgeFunction};

/// Absolute tolerance used by the membership predicates unless overridden.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// A point `η` of the extended expectation space: positive values on edges.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationPoint {
    graph: Arc<ChainGraph>,
    values: Vec<f64>,
}

impl ExpectationPoint {
    pub fn new(graph: Arc<ChainGraph>, values: Vec<f64>) -> Result<Self> {
        validate_positive(&graph, &values)?;
        Ok(Self { graph, values })
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

    /// Incoming marginals `η^x` for every state.
    pub fn in_marginals(&self) -> Vec<f64> {
        marginals(&self.graph, &self.values, |g, x| g.incoming(x))
    }

    /// Outgoing marginals `η_x` for every state.
    pub fn out_marginals(&self) -> Vec<f64> {
        marginals(&self.graph, &self.values, |g, x| g.outgoing(x))
    }
}

pub(crate) fn marginals(
    graph: &ChainGraph,
    values: &[f64],
    side: impl Fn(&ChainGraph, usize) -> &[usize],
) -> Vec<f64> {
    (0..graph.num_states())
        .map(|x| side(graph, x).iter().map(|&k| values[k]).sum())
        .collect()
}

/// Total mass `r(η) = Σ η_xy`.
pub fn mass(eta: &ExpectationPoint) -> f64 {
    eta.values.iter().sum()
}

/// Incoming marginal `η^x = Σ_k η_kx`.
pub fn in_marginal(eta: &ExpectationPoint, x: usize) -> Result<f64> {
    eta.graph.check_state(x)?;
    Ok(eta.graph.incoming(x).iter().map(|&k| eta.values[k]).sum())
}

/// Outgoing marginal `η_x = Σ_k η_xk`.
pub fn out_marginal(eta: &ExpectationPoint, x: usize) -> Result<f64> {
    eta.graph.check_state(x)?;
    Ok(eta.graph.outgoing(x).iter().map(|&k| eta.values[k]).sum())
}

/// `η_xy = μ_f(x)·f(x, y)`.
pub fn tbar(f: &EdgeFunction) -> Result<ExpectationPoint> {
    let mu = perron(f)?.left_vec;
    let values = f
        .graph()
        .edges()
        .iter()
        .zip(f.values())
        .map(|(&(x, _), &v)| mu[x] * v)
        .collect();
    Ok(ExpectationPoint {
        graph: Arc::clone(f.graph()),
        values,
    })
}

/// Inverse of [`tbar`]: `f(x, y) = r(η)·η_xy / η^x`.
pub fn taubar(eta: &ExpectationPoint) -> EdgeFunction {
    let total = mass(eta);
    let inflow = eta.in_marginals();
    let values = eta
        .graph
        .edges()
        .iter()
        .zip(&eta.values)
        .map(|(&(x, _), &v)| total * v / inflow[x])
        .collect();
    EdgeFunction::new(Arc::clone(&eta.graph), values)
        .expect("taubar of a positive point is positive")
}

/// Membership in `W`: every outgoing row sums to 1 within `tol`.
pub fn is_transition_probability(f: &EdgeFunction, tol: f64) -> bool {
    first_bad_row(f, tol).is_none()
}

pub(crate) fn first_bad_row(f: &EdgeFunction, tol: f64) -> Option<(usize, f64)> {
    (0..f.graph().num_states())
        .map(|x| (x, f.row_sum(x)))
        .find(|&(_, s)| (s - 1.0).abs() > tol)
}

/// Errors with [`Error::NotTransitionProbability`] unless `f ∈ W`.
pub fn require_transition_probability(f: &EdgeFunction, tol: f64) -> Result<()> {
    match first_bad_row(f, tol) {
        None => Ok(()),
        Some((state, sum)) => Err(Error::NotTransitionProbability { state, sum }),
    }
}

/// Membership in `W̃`: `|r(f) − 1| ≤ tol`.
pub fn is_positive_transition_measure(f: &EdgeFunction, tol: f64) -> Result<bool> {
    Ok((perron(f)?.root - 1.0).abs() <= tol)
}

/// Radial retraction `f / r(f)` onto `W̃`.
pub fn normalize_to_measure(f: &EdgeFunction) -> Result<EdgeFunction> {
    let root = perron(f)?.root;
    f.scale(1.0 / root)
}

/// Row normalization `f(x, y) / Σ_k f(x, k)`, landing in `W`.
pub fn row_normalize(f: &EdgeFunction) -> EdgeFunction {
    let graph = f.graph();
    let sums: Vec<f64> = (0..graph.num_states()).map(|x| f.row_sum(x)).collect();
    let values = graph
        .edges()
        .iter()
        .zip(f.values())
        .map(|(&(x, _), &v)| v / sums[x])
        .collect();
    EdgeFunction::new(Arc::clone(graph), values).expect("row normalization stays positive")
}

/// Membership in `M̃`: `|r(η) − 1| ≤ tol`.
pub fn is_in_mtilde(eta: &ExpectationPoint, tol: f64) -> bool {
    (mass(eta) - 1.0).abs() <= tol
}

/// Membership in `M`: normalization plus `|η_x − η^x| ≤ tol` at every state.
pub fn is_in_m(eta: &ExpectationPoint, tol: f64) -> bool {
    is_in_mtilde(eta, tol) && stationarity_gap(eta) <= tol
}

/// `max_x |η_x − η^x|`.
pub fn stationarity_gap(eta: &ExpectationPoint) -> f64 {
    eta.out_marginals()
        .iter()
        .zip(eta.in_marginals())
        .fold(0.0, |m, (o, i)| m.max((o - i).abs()))
}

pub(crate) fn require_mtilde(eta: &ExpectationPoint, tol: f64) -> Result<()> {
    if is_in_mtilde(eta, tol) {
        Ok(())
    } else {
        Err(Error::NotInMtilde(mass(eta)))
    }
}
