//! Reference computations that do not share code paths with the closed
//! forms they check: finite differences of scalar functions, and the
//! two-state formulas written out entry by entry.
//!
//! Two-state layout: `(x, y, z, w) = (f(0,0), f(0,1), f(1,0), f(1,1))`,
//! and likewise `η = (η00, η01, η10, η11)`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::coordinates::ExpectationPoint;
use crate::error::Result;
use crate::potential::phibar_gradient;
use crate::spectral::{perron, EdgeFunction};

/// Perron root of `[[x, y], [z, w]]` from the quadratic formula.
pub fn two_state_root(x: f64, y: f64, z: f64, w: f64) -> f64 {
    (x + w + ((x - w).powi(2) + 4.0 * y * z).sqrt()) / 2.0
}

/// Marginals `(η^0, η^1, η_0, η_1)` of a two-state point.
fn two_state_marginals(eta: [f64; 4]) -> (f64, f64, f64, f64) {
    let [e00, e01, e10, e11] = eta;
    (e00 + e10, e01 + e11, e00 + e01, e10 + e11)
}

/// The 4×4 Hessian of `φ̄` on the complete two-state graph, transcribed
/// entry by entry.
pub fn two_state_hessian(eta: [f64; 4]) -> DMatrix<f64> {
    let [e00, e01, e10, e11] = eta;
    let (in0, in1, out0, out1) = two_state_marginals(eta);
    let sq0 = in0 * in0;
    let sq1 = in1 * in1;
    DMatrix::from_row_slice(
        4,
        4,
        &[
            1.0 / e00 - 1.0 / in0 - (in0 - out0) / sq0,
            -1.0 / in0,
            -1.0 / in0 + out0 / sq0,
            0.0,
            //
            -1.0 / in0,
            1.0 / e01 + out1 / sq1,
            -1.0 / in1 - 1.0 / in0,
            -1.0 / in1 + out1 / sq1,
            //
            -1.0 / in0 + out0 / sq0,
            -1.0 / in1 - 1.0 / in0,
            1.0 / e10 + out0 / sq0,
            -1.0 / in1,
            //
            0.0,
            -1.0 / in1 + out1 / sq1,
            -1.0 / in1,
            1.0 / e11 - 1.0 / in1 - (in1 - out1) / sq1,
        ],
    )
}

/// The 3×3 Hessian on the normalized section in the chart
/// `(η00, η01, η10)`, `η11 = 1 − η00 − η01 − η10`, transcribed entry by
/// entry. Only valid when `Σ η = 1`.
pub fn two_state_restricted_hessian(eta: [f64; 4]) -> DMatrix<f64> {
    let [e00, e01, e10, e11] = eta;
    let (in0, in1, out0, out1) = two_state_marginals(eta);
    let cross = 1.0 / (in0 * in1);
    let tails = out1 / (in1 * in1) + out0 / (in0 * in0);
    let a = 1.0 / e11 + 1.0 / e00 - 2.0 * cross + tails;
    let b = 1.0 / e11 - cross;
    let c = 1.0 / e11 - cross + tails;
    let d = 1.0 / e01 + 1.0 / e11;
    let e = 1.0 / e11 + 1.0 / e10 + tails;
    DMatrix::from_row_slice(3, 3, &[a, b, c, b, d, b, c, b, e])
}

/// Minimizer of `ζ ↦ D_Bre(ζ, η)` over stationary unit-mass points, in
/// closed form.
///
/// On that set the divergence reduces to `Σ ζ_xy (log(ζ_xy/ζ_x) − g_xy)`
/// with `g = ∇φ̄(η)`, whose minimum (Donsker–Varadhan) is the pair measure
/// of the Doob transform of `e^g`: `ζ_xy = μ_x e^{g_xy} v_y / (r μᵀv)`.
pub fn doob_projection(eta: &ExpectationPoint) -> Result<ExpectationPoint> {
    let graph = Arc::clone(eta.graph());
    let tilt = EdgeFunction::new(Arc::clone(&graph), phibar_gradient(eta).iter().map(|g| g.exp()).collect())?;
    let s = perron(&tilt)?;
    let norm: f64 = s.left_vec.iter().zip(&s.right_vec).map(|(a, b)| a * b).sum();
    let values = graph
        .edges()
        .iter()
        .zip(tilt.values())
        .map(|(&(x, y), &a)| s.left_vec[x] * a * s.right_vec[y] / (s.root * norm))
        .collect();
    ExpectationPoint::new(graph, values)
}

/// Central-difference step for first derivatives at coordinate `c`.
pub fn first_step(c: f64) -> f64 {
    1e-6 * c.abs().max(1.0)
}

/// Central-difference step for second derivatives at coordinate `c`.
pub fn second_step(c: f64) -> f64 {
    1e-4 * c.abs().max(1.0)
}

/// Central-difference gradient of `phi` at `x`.
pub fn gradient(phi: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            let h = first_step(x[k]);
            probe[k] = x[k] + h;
            let up = phi(&probe);
            probe[k] = x[k] - h;
            let down = phi(&probe);
            probe[k] = x[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Jacobian of a vector function (rows = outputs).
pub fn jacobian(grad: impl Fn(&[f64]) -> Vec<f64>, x: &[f64]) -> DMatrix<f64> {
    let m = x.len();
    let mut out = DMatrix::zeros(m, m);
    let mut probe = x.to_vec();
    for k in 0..m {
        let h = first_step(x[k]);
        probe[k] = x[k] + h;
        let up = grad(&probe);
        probe[k] = x[k] - h;
        let down = grad(&probe);
        probe[k] = x[k];
        for row in 0..m {
            out[(row, k)] = (up[row] - down[row]) / (2.0 * h);
        }
    }
    out
}

/// Mixed second directional derivative `∂²/∂s∂t φ(x + s u + t v)` at 0,
/// using the four-point stencil with step `h`.
pub fn mixed_directional(phi: impl Fn(&[f64]) -> f64, x: &[f64], u: &[f64], v: &[f64], h: f64) -> f64 {
    let at = |a: f64, b: f64| {
        let p: Vec<f64> = x
            .iter()
            .zip(u.iter().zip(v))
            .map(|(xi, (ui, vi))| xi + a * ui + b * vi)
            .collect();
        phi(&p)
    };
    (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h)
}

/// First directional derivative `∂/∂s φ(x + s u)` at 0.
pub fn directional(phi: impl Fn(&[f64]) -> f64, x: &[f64], u: &[f64], h: f64) -> f64 {
    let at = |a: f64| {
        let p: Vec<f64> = x.iter().zip(u).map(|(xi, ui)| xi + a * ui).collect();
        phi(&p)
    };
    (at(h) - at(-h)) / (2.0 * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn root_of_example_matrix() {
        assert!((two_state_root(1.0, 2.0, 3.0, 4.0) - (5.0 + 33f64.sqrt()) / 2.0).abs() < 1e-15);
        assert_eq!(two_state_root(1.0, 1.0, 1.0, 1.0), 2.0);
    }

    #[test]
    fn doob_projection_fixes_stationary_points() {
        let graph = Arc::new(crate::graph::ChainGraph::complete(2).unwrap());
        let eta = ExpectationPoint::new(graph, vec![0.1, 0.2, 0.2, 0.5]).unwrap();
        let star = doob_projection(&eta).unwrap();
        for (a, b) in star.values().iter().zip(eta.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn finite_differences_of_a_quadratic() {
        let phi = |x: &[f64]| x[0] * x[0] + 3.0 * x[0] * x[1];
        let g = gradient(phi, &[1.0, 2.0]);
        assert!((g[0] - 8.0).abs() < 1e-8 && (g[1] - 3.0).abs() < 1e-8);
        let m = mixed_directional(phi, &[1.0, 2.0], &[1.0, 0.0], &[0.0, 1.0], 1e-3);
        assert!((m - 3.0).abs() < 1e-6);
    }
}
