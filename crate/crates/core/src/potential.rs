//! The potential `φ̄(η) = Σ η_xy log η_xy − Σ_x η_x log η^x` on expectation
//! points, its derivatives, and the companion potential `φ̂`.
//!
//! `φ̄` is homogeneous of degree 1, so its Hessian always annihilates `η`.
//! On the section `M̃` (total mass 1) the restricted Hessian is positive
//! definite.

use nalgebra::DMatrix;

use crate::coordinates::{require_mtilde, ExpectationPoint, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};

/// Largest tolerated `|H − Hᵀ|` entry, relative to the largest `|H|` entry.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// `φ̄(η) = Σ η_xy log η_xy − Σ_x η_x log η^x`.
pub fn phibar(eta: &ExpectationPoint) -> f64 {
    let inflow = eta.in_marginals();
    eta.graph()
        .edges()
        .iter()
        .zip(eta.values())
        .map(|(&(x, _), &v)| v * (v / inflow[x]).ln())
        .sum()
}

/// `φ̂(η) = Σ η_xy log η_xy − Σ_x η_x log η_x`.
pub fn phihat(eta: &ExpectationPoint) -> f64 {
    let outflow = eta.out_marginals();
    eta.graph()
        .edges()
        .iter()
        .zip(eta.values())
        .map(|(&(x, _), &v)| v * (v / outflow[x]).ln())
        .sum()
}

/// `∂φ̄/∂η_xy = log η_xy − log η^x − η_y/η^y + 1`.
pub fn phibar_gradient(eta: &ExpectationPoint) -> Vec<f64> {
    let inflow = eta.in_marginals();
    let outflow = eta.out_marginals();
    eta.graph()
        .edges()
        .iter()
        .zip(eta.values())
        .map(|(&(x, y), &v)| v.ln() - inflow[x].ln() - outflow[y] / inflow[y] + 1.0)
        .collect()
}

/// Signature of a second-derivative entry: `(η, s, t, u, v, η^·, η_·) ↦ ∂²φ̄/∂η_st ∂η_uv`.
pub type HessianEntry = fn(&[f64], (usize, usize, usize), (usize, usize, usize), &[f64], &[f64]) -> f64;

/// Closed-form entry
/// `δ_su δ_tv / η_st − δ_sv / η^s − (δ_tu η^t − δ_tv η_t) / (η^t)²`.
///
/// The edge arguments are `(position, source, target)`.
pub fn hessian_entry(
    eta: &[f64],
    (k, s, t): (usize, usize, usize),
    (l, u, v): (usize, usize, usize),
    inflow: &[f64],
    outflow: &[f64],
) -> f64 {
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let diagonal = if k == l { 1.0 / eta[k] } else { 0.0 };
    diagonal - delta(s, v) / inflow[s]
        - (delta(t, u) * inflow[t] - delta(t, v) * outflow[t]) / (inflow[t] * inflow[t])
}

/// Hessian of `φ̄`, assembled entry by entry and symmetrized.
pub fn phibar_hessian(eta: &ExpectationPoint) -> Result<DMatrix<f64>> {
    phibar_hessian_with(eta, hessian_entry)
}

/// Assembles the Hessian from an arbitrary entry formula.
///
/// Fails with [`Error::AsymmetricHessian`] when the raw assembly deviates
/// from symmetry by more than [`SYMMETRY_TOLERANCE`] (relative).
pub fn phibar_hessian_with(eta: &ExpectationPoint, entry: HessianEntry) -> Result<DMatrix<f64>> {
    let edges = eta.graph().edges();
    let inflow = eta.in_marginals();
    let outflow = eta.out_marginals();
    let m = edges.len();
    let raw = DMatrix::from_fn(m, m, |k, l| {
        let (s, t) = edges[k];
        let (u, v) = edges[l];
        entry(eta.values(), (k, s, t), (l, u, v), &inflow, &outflow)
    });
    let scale = raw.amax().max(f64::MIN_POSITIVE);
    let asymmetry = (&raw - raw.transpose()).amax() / scale;
    if !(asymmetry <= SYMMETRY_TOLERANCE) {
        return Err(Error::AsymmetricHessian(asymmetry));
    }
    Ok((&raw + raw.transpose()) * 0.5)
}

/// Hessian of `φ̄` restricted to `M̃`, in the chart that drops `eliminated`
/// and recovers it from `Σ η = 1`.
///
/// With `J` the `|E| × (|E|−1)` chart Jacobian (identity on kept edges,
/// `−1` on the eliminated row) this is `Jᵀ H J`. `None` eliminates the
/// lexicographically last edge.
pub fn restricted_hessian(eta: &ExpectationPoint, eliminated: Option<(usize, usize)>) -> Result<DMatrix<f64>> {
    require_mtilde(eta, DEFAULT_TOLERANCE)?;
    let graph = eta.graph();
    let m = graph.num_edges();
    let drop = match eliminated {
        Some((x, y)) => graph.require_edge(x, y)?,
        None => m - 1,
    };
    let hessian = phibar_hessian(eta)?;
    Ok(restrict(&hessian, drop))
}

pub(crate) fn restrict(hessian: &DMatrix<f64>, drop: usize) -> DMatrix<f64> {
    let m = hessian.nrows();
    let chart = chart_jacobian(m, drop);
    let restricted = chart.transpose() * hessian * &chart;
    (&restricted + restricted.transpose()) * 0.5
}

fn chart_jacobian(m: usize, drop: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, m - 1, |row, col| {
        let kept = if col < drop { col } else { col + 1 };
        if row == drop {
            -1.0
        } else if row == kept {
            1.0
        } else {
            0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use nalgebra::DVector;

    use super::*;
    use crate::coordinates::tbar;
    use crate::graph::ChainGraph;
    use crate::spectral::EdgeFunction;

    fn point(values: [f64; 4]) -> ExpectationPoint {
        ExpectationPoint::new(Arc::new(ChainGraph::complete(2).unwrap()), values.to_vec()).unwrap()
    }

    #[test]
    fn uniform_point_values() {
        let eta = point([0.25; 4]);
        let ln2 = std::f64::consts::LN_2;
        assert!((phibar(&eta) + ln2).abs() < 1e-15);
        assert!((phihat(&eta) + ln2).abs() < 1e-15);
        for g in phibar_gradient(&eta) {
            assert!((g + ln2).abs() < 1e-15);
        }
    }

    #[test]
    fn potentials_differ_off_m() {
        let eta = point([0.3, 0.3, 0.2, 0.2]);
        // φ̄ divides by η^0 = 0.5, η^1 = 0.5; φ̂ by η_0 = 0.6, η_1 = 0.4.
        let expected_bar = 0.3 * (0.3f64 / 0.5).ln() * 2.0 + 0.2 * (0.2f64 / 0.5).ln() * 2.0;
        let expected_hat = 0.3 * (0.3f64 / 0.6).ln() * 2.0 + 0.2 * (0.2f64 / 0.4).ln() * 2.0;
        assert!((phibar(&eta) - expected_bar).abs() < 1e-15);
        assert!((phihat(&eta) - expected_hat).abs() < 1e-15);
        assert!((phibar(&eta) - phihat(&eta)).abs() > 1e-3);
    }

    #[test]
    fn conditional_entropy_on_transitions() {
        let w = EdgeFunction::new(
            Arc::new(ChainGraph::complete(2).unwrap()),
            vec![0.3, 0.7, 0.9, 0.1],
        )
        .unwrap();
        let eta = tbar(&w).unwrap();
        let mu = [0.5625, 0.4375];
        let expected: f64 = w
            .graph()
            .edges()
            .iter()
            .zip(w.values())
            .map(|(&(x, _), &v)| mu[x] * v * v.ln())
            .sum();
        assert!((phibar(&eta) - expected).abs() < 1e-13);
    }

    #[test]
    fn hessian_kernel_and_symmetry() {
        let eta = point([0.1, 0.4, 0.3, 0.6]);
        let h = phibar_hessian(&eta).unwrap();
        assert_eq!(h, h.transpose());
        let kernel = &h * DVector::from_column_slice(eta.values());
        assert!(kernel.amax() < 1e-12 * h.amax());
    }

    #[test]
    fn corrupted_entry_is_caught_as_asymmetry() {
        fn corrupted(
            eta: &[f64],
            a: (usize, usize, usize),
            b: (usize, usize, usize),
            inflow: &[f64],
            outflow: &[f64],
        ) -> f64 {
            // flips the δ_sv/η^s term
            hessian_entry(eta, a, b, inflow, outflow) + 2.0 * if a.1 == b.2 { 1.0 / inflow[a.1] } else { 0.0 }
        }
        let eta = point([0.1, 0.4, 0.3, 0.6]);
        assert!(matches!(
            phibar_hessian_with(&eta, corrupted),
            Err(Error::AsymmetricHessian(_))
        ));
    }

    #[test]
    fn restricted_requires_mtilde() {
        let eta = point([0.5; 4]);
        assert_eq!(restricted_hessian(&eta, None), Err(Error::NotInMtilde(2.0)));
        let eta = point([0.25; 4]);
        assert_eq!(restricted_hessian(&eta, Some((1, 1))).unwrap().nrows(), 3);
        let cycle = Arc::new(ChainGraph::cycle(3).unwrap());
        let on_cycle = ExpectationPoint::new(cycle, vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(
            restricted_hessian(&on_cycle, Some((0, 0))),
            Err(Error::UnknownEdge(0, 0))
        );
    }

    #[test]
    fn chart_layout() {
        let j = chart_jacobian(4, 1);
        let expected = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 0.0, 0.0, -1.0, -1.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        );
        assert_eq!(j, expected);
    }
}
