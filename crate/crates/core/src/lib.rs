//! Information geometry of positive transition measures on a Markov chain.
//!
//! A chain lives on a strongly connected directed graph `(X, E)`. Positive
//! functions `f` on `E` carry a Perron–Frobenius root `r(f)` and a
//! stationary distribution `μ_f`. The map `f ↦ (μ_f(x) f(x, y))` is a
//! diffeomorphism onto positive expectation points `η`, on which the
//! potential `φ̄(η) = Σ η_xy log η_xy − Σ_x η_x log η^x` generates a Bregman
//! divergence equal to the KL-type F-divergence
//! `D_F(f, g) = Σ μ_f(x) f(x,y) F((g/r(g)) / (f/r(f)))`.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`graph`] | [`ChainGraph`], strong connectivity |
//! | [`spectral`] | [`EdgeFunction`], [`perron`], root derivatives |
//! | [`coordinates`] | [`ExpectationPoint`], `tbar` / `taubar`, membership predicates |
//! | [`divergence`] | generators, F-, Nagaoka and Bregman divergences, induced tensor |
//! | [`potential`] | `φ̄`, `φ̂`, gradient, Hessian, restricted Hessian |
//! | [`inference`] | sampling, estimation, projection onto `M`, test statistic |
//! | [`io`] | chain and trajectory files |
//! | [`verify`] | randomized identity suite |
//!
//! ```
//! use std::sync::Arc;
//! use ptm_core::{ChainGraph, EdgeFunction, perron};
//!
//! let graph = Arc::new(ChainGraph::complete(2).unwrap());
//! let f = EdgeFunction::new(graph, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
//! let root = perron(&f).unwrap().root;
//! assert!((root - (5.0 + 33f64.sqrt()) / 2.0).abs() < 1e-12);
//! ```

// `!(a <= b)` comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coordinates;
pub mod divergence;
mod error;
pub mod graph;
pub mod inference;
pub mod io;
pub mod oracle;
pub mod potential;
pub mod spectral;
pub mod testkit;
pub mod verify;

pub use coordinates::{
    in_marginal, is_in_m, is_in_mtilde, is_positive_transition_measure, is_transition_probability, mass,
    normalize_to_measure, out_marginal, taubar, tbar, ExpectationPoint, DEFAULT_TOLERANCE,
};
pub use divergence::{
    bregman_divergence, builtin_generators, f_divergence, induced_gram, induced_tensor, nagaoka_divergence,
    null_space, null_space_dimension, GeneratorRegistry, NullSpace, StandardConvexFunction,
};
pub use error::{Error, Result};
pub use graph::{strongly_connected, ChainGraph};
pub use inference::{
    empirical_pair_measure, goodness_of_fit_statistic, mle_transition, project_to_m, sample_trajectory,
    ChainRng, GoodnessOfFit, Initial, Projection, Trajectory, TransitionEstimate,
};
pub use potential::{phibar, phibar_gradient, phibar_hessian, phihat, restricted_hessian};
pub use spectral::{matrix_of, perron, root_derivative, scale, EdgeFunction, SpectralData};
