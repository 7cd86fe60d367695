//! Sampling, estimation and projection for transition probabilities.
//!
//! # Random number generation
//!
//! Trajectories are bit-reproducible across platforms. The generator is
//! xoshiro256** whose 256-bit state is filled from the `u64` seed by
//! SplitMix64. A uniform draw is `(next_u64 >> 11) · 2⁻⁵³`. A transition
//! from `x` draws `u` and walks the outgoing edges of `x` in canonical
//! order, taking the first edge whose cumulative weight exceeds
//! `u · row_sum(x)`. Independent replications use `seed_i = base_seed + i`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

use crate::coordinates::{
    is_in_m, is_positive_transition_measure, is_transition_probability, require_mtilde,
    require_transition_probability, row_normalize, taubar, tbar, ExpectationPoint,
    DEFAULT_TOLERANCE,
};
use crate::divergence::{bregman_raw, f_divergence, StandardConvexFunction};
use crate::error::{Error, Result};
use crate::graph::ChainGraph;
use crate::potential::phibar_hessian;
use crate::spectral::{perron, EdgeFunction};

/// Stop once the reduced gradient norm falls below this.
pub const PROJECTION_GRADIENT_TOLERANCE: f64 = 1e-9;
pub const PROJECTION_MAX_ITERATIONS: usize = 100_000;
/// Every coordinate of an iterate stays at or above this floor.
pub const PROJECTION_FLOOR: f64 = 1e-12;
const ARMIJO: f64 = 1e-4;

/// Seed of replication `index` derived from `base`.
pub fn replication_seed(base: u64, index: u64) -> u64 {
    base.wrapping_add(index)
}

/// The portable sampler described in the module docs.
#[derive(Debug, Clone)]
pub struct ChainRng(Xoshiro256StarStar);

impl ChainRng {
    pub fn new(seed: u64) -> Self {
        Self(Xoshiro256StarStar::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Index `i` with probability `weights[i] / Σ weights`.
    pub fn categorical(&mut self, weights: impl IntoIterator<Item = f64> + Clone) -> usize {
        let total: f64 = weights.clone().into_iter().sum();
        let target = self.uniform() * total;
        let mut acc = 0.0;
        let mut last = 0;
        for (i, w) in weights.into_iter().enumerate() {
            acc += w;
            last = i;
            if target < acc {
                return i;
            }
        }
        last
    }
}

/// A sample path whose consecutive states are edges of the graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    graph: Arc<ChainGraph>,
    states: Vec<usize>,
}

impl Trajectory {
    pub fn new(graph: Arc<ChainGraph>, states: Vec<usize>) -> Result<Self> {
        if states.len() < 2 {
            return Err(Error::TrajectoryTooShort(states.len()));
        }
        for &s in &states {
            graph.check_state(s)?;
        }
        if let Some(w) = states.windows(2).find(|w| graph.edge_index(w[0], w[1]).is_none()) {
            return Err(Error::InvalidTransition(w[0], w[1]));
        }
        Ok(Self { graph, states })
    }

    pub fn graph(&self) -> &Arc<ChainGraph> {
        &self.graph
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Number of times each edge is traversed, in canonical order.
    pub fn edge_counts(&self) -> Vec<u64> {
        let mut counts = vec![0; self.graph.num_edges()];
        for w in self.states.windows(2) {
            let k = self.graph.edge_index(w[0], w[1]).expect("validated transition");
            counts[k] += 1;
        }
        counts
    }
}

impl fmt::Display for Trajectory {
    /// Whitespace-separated state indices on a single line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.states.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// Where a sampled trajectory starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Initial {
    State(usize),
    /// Drawn from `μ_w`.
    Stationary,
}

/// Samples `n` states of the chain with transition probabilities `w`.
pub fn sample_trajectory(w: &EdgeFunction, n: usize, seed: u64, initial: Initial) -> Result<Trajectory> {
    require_transition_probability(w, DEFAULT_TOLERANCE)?;
    if n < 2 {
        return Err(Error::TrajectoryTooShort(n));
    }
    let graph = w.graph();
    let mut rng = ChainRng::new(seed);
    let mut state = match initial {
        Initial::State(x) => {
            graph.check_state(x)?;
            x
        }
        Initial::Stationary => {
            let mu = perron(w)?.left_vec;
            rng.categorical(mu.iter().copied())
        }
    };
    let mut states = Vec::with_capacity(n);
    states.push(state);
    while states.len() < n {
        let out = graph.outgoing(state);
        let pick = rng.categorical(out.iter().map(|&k| w.values()[k]));
        state = graph.edges()[out[pick]].1;
        states.push(state);
    }
    Ok(Trajectory {
        graph: Arc::clone(graph),
        states,
    })
}

/// `η_xy = count(x, y) / (n − 1)`; every edge must have been observed.
pub fn empirical_pair_measure(t: &Trajectory) -> Result<ExpectationPoint> {
    let counts = t.edge_counts();
    let missing: Vec<_> = t
        .graph
        .edges()
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c == 0)
        .map(|(&e, _)| e)
        .collect();
    if !missing.is_empty() {
        return Err(Error::UnobservedEdge(missing));
    }
    let transitions = (t.states.len() - 1) as f64;
    ExpectationPoint::new(
        Arc::clone(&t.graph),
        counts.iter().map(|&c| c as f64 / transitions).collect(),
    )
}

/// Row-normalized transition counts. Zero entries put the estimate on the
/// boundary of the positive functions; it is reported, not perturbed.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionEstimate {
    graph: Arc<ChainGraph>,
    values: Vec<f64>,
    boundary_edges: Vec<(usize, usize)>,
}

impl TransitionEstimate {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_boundary(&self) -> bool {
        !self.boundary_edges.is_empty()
    }

    /// Edges whose estimated probability is zero.
    pub fn boundary_edges(&self) -> &[(usize, usize)] {
        &self.boundary_edges
    }

    /// The estimate as a positive edge function; boundary estimates are rejected.
    pub fn to_edge_function(&self) -> Result<EdgeFunction> {
        if self.is_boundary() {
            return Err(Error::BoundaryEstimate(self.boundary_edges.clone()));
        }
        EdgeFunction::new(Arc::clone(&self.graph), self.values.clone())
    }
}

/// Maximum-likelihood transition probabilities `count(x,y) / Σ_k count(x,k)`.
///
/// `smoothing = Some(α)` adds `α` to every edge count first.
pub fn mle_transition(t: &Trajectory, smoothing: Option<f64>) -> Result<TransitionEstimate> {
    let alpha = smoothing.unwrap_or(0.0);
    let graph = &t.graph;
    let counts: Vec<f64> = t.edge_counts().iter().map(|&c| c as f64 + alpha).collect();
    let mut values = vec![0.0; counts.len()];
    for x in 0..graph.num_states() {
        let out = graph.outgoing(x);
        let total: f64 = out.iter().map(|&k| counts[k]).sum();
        if !(total > 0.0) {
            return Err(Error::UnvisitedState(x));
        }
        for &k in out {
            values[k] = counts[k] / total;
        }
    }
    let boundary_edges = graph
        .edges()
        .iter()
        .zip(&values)
        .filter(|(_, &v)| v <= 0.0)
        .map(|(&e, _)| e)
        .collect();
    Ok(TransitionEstimate {
        graph: Arc::clone(graph),
        values,
        boundary_edges,
    })
}

/// Result of [`project_to_m`].
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub point: ExpectationPoint,
    pub iterations: usize,
    /// `D_Bre(ζ_k, η)` at the start point and after every accepted step.
    pub objective_trace: Vec<f64>,
    /// Final norm of the gradient projected onto the tangent space of `M`.
    pub gradient_norm: f64,
}

/// Affine description of `M`: constraint rows `C`, a pseudo-inverse and an
/// orthonormal basis of `ker C`.
struct AffineM {
    constraints: DMatrix<f64>,
    rhs: DVector<f64>,
    pinv: DMatrix<f64>,
    basis: DMatrix<f64>,
}

impl AffineM {
    fn new(graph: &ChainGraph) -> Self {
        let n = graph.num_states();
        let m = graph.num_edges();
        let mut constraints = DMatrix::zeros(n + 1, m);
        for (k, &(x, y)) in graph.edges().iter().enumerate() {
            constraints[(0, k)] = 1.0;
            constraints[(1 + x, k)] += 1.0;
            constraints[(1 + y, k)] -= 1.0;
        }
        let mut rhs = DVector::zeros(n + 1);
        rhs[0] = 1.0;
        let pinv = constraints
            .clone()
            .pseudo_inverse(1e-12)
            .expect("pseudo-inverse of a finite matrix");
        let projector = DMatrix::identity(m, m) - &pinv * &constraints;
        let eigen = SymmetricEigen::new((&projector + projector.transpose()) * 0.5);
        let columns: Vec<_> = (0..m)
            .filter(|&i| eigen.eigenvalues[i] > 0.5)
            .map(|i| eigen.eigenvectors.column(i).into_owned())
            .collect();
        let basis = if columns.is_empty() {
            DMatrix::zeros(m, 0)
        } else {
            DMatrix::from_columns(&columns)
        };
        Self {
            constraints,
            rhs,
            pinv,
            basis,
        }
    }

    /// Least-norm correction of `z` onto `C z = b`.
    fn correct(&self, z: &DVector<f64>) -> DVector<f64> {
        z - &self.pinv * (&self.constraints * z - &self.rhs)
    }
}

/// Bregman projection of `η ∈ M̃` onto `M`: the minimizer of
/// `ζ ↦ D_Bre(ζ, η)` over `ζ ∈ M`.
///
/// Iterates descent steps inside the affine subspace. The search direction
/// is the Newton direction of the reduced problem (falling back to the
/// negative reduced gradient if the reduced Hessian is not numerically
/// positive definite), globalized by Armijo backtracking with factor 0.5
/// and parameter 1e-4, and clipped to keep every coordinate at or above
/// [`PROJECTION_FLOOR`].
pub fn project_to_m(eta: &ExpectationPoint) -> Result<Projection> {
    require_mtilde(eta, DEFAULT_TOLERANCE)?;
    let graph = eta.graph();
    let affine = AffineM::new(graph);
    let target_grad = DVector::from_vec(crate::potential::phibar_gradient(eta));
    let objective = |z: &DVector<f64>| bregman_raw(z.as_slice(), eta.values(), eta);
    let reduced_gradient = |z: &DVector<f64>| -> Result<(DVector<f64>, DVector<f64>)> {
        let point = ExpectationPoint::new(Arc::clone(graph), z.as_slice().to_vec())?;
        let grad = DVector::from_vec(crate::potential::phibar_gradient(&point)) - &target_grad;
        let reduced = affine.basis.transpose() * &grad;
        Ok((grad, reduced))
    };

    let start = if is_in_m(eta, 1e-12) {
        eta.clone()
    } else {
        tbar(&row_normalize(&taubar(eta)))?
    };
    let mut z = affine.correct(&DVector::from_column_slice(start.values()));
    if z.min() < PROJECTION_FLOOR {
        z = DVector::from_column_slice(start.values());
    }
    let mut value = objective(&z);
    let mut trace = vec![value];
    let (mut grad, mut reduced) = reduced_gradient(&z)?;
    let mut iterations = 0;

    while reduced.norm() >= PROJECTION_GRADIENT_TOLERANCE {
        if iterations == PROJECTION_MAX_ITERATIONS {
            return Err(Error::ProjectionNoConvergence {
                iterations,
                gradient_norm: reduced.norm(),
            });
        }
        iterations += 1;

        let point = ExpectationPoint::new(Arc::clone(graph), z.as_slice().to_vec())?;
        let hessian = phibar_hessian(&point)?;
        let reduced_hessian = affine.basis.transpose() * hessian * &affine.basis;
        let mut direction = match reduced_hessian.cholesky() {
            Some(chol) => &affine.basis * -chol.solve(&reduced),
            None => &affine.basis * -&reduced,
        };
        let mut slope = grad.dot(&direction);
        if !(slope < 0.0) {
            direction = &affine.basis * -&reduced;
            slope = grad.dot(&direction);
        }

        let mut step = 1.0;
        loop {
            let candidate = &z + &direction * step;
            if candidate.min() >= PROJECTION_FLOOR {
                let next = objective(&candidate);
                let armijo = next <= value + ARMIJO * step * slope;
                // Near the optimum the decrease drops below rounding noise;
                // then accept a step that still shrinks the reduced gradient.
                let in_noise = (next - value).abs() <= 1e-15 * (1.0 + value.abs());
                let (cand_grad, cand_reduced) = reduced_gradient(&candidate)?;
                if armijo || (in_noise && cand_reduced.norm() < reduced.norm()) {
                    z = candidate;
                    value = next.min(value);
                    grad = cand_grad;
                    reduced = cand_reduced;
                    trace.push(value);
                    break;
                }
            }
            step *= 0.5;
            if step < 1e-30 {
                return Err(Error::ProjectionNoConvergence {
                    iterations,
                    gradient_norm: reduced.norm(),
                });
            }
        }
    }

    Ok(Projection {
        point: ExpectationPoint::new(Arc::clone(graph), z.as_slice().to_vec())?,
        iterations,
        objective_trace: trace,
        gradient_norm: reduced.norm(),
    })
}

/// Norm of the gradient of `ζ ↦ D_Bre(ζ, η)` at `zeta`, projected onto the
/// tangent space of `M`.
pub fn projection_optimality_residual(zeta: &ExpectationPoint, eta: &ExpectationPoint) -> f64 {
    let affine = AffineM::new(zeta.graph());
    let grad = DVector::from_vec(crate::potential::phibar_gradient(zeta))
        - DVector::from_vec(crate::potential::phibar_gradient(eta));
    (affine.basis.transpose() * grad).norm()
}

/// F-divergence goodness-of-fit statistic and the raw divergence it scales.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoodnessOfFit {
    /// `2 (n − 1) D_F(τ̄(empirical), model)`.
    pub statistic: f64,
    pub divergence: f64,
}

/// Compares an empirical pair measure against a model in `W` or `W̃`.
pub fn goodness_of_fit_statistic(
    generator: &StandardConvexFunction,
    empirical: &ExpectationPoint,
    model: &EdgeFunction,
    n: usize,
) -> Result<GoodnessOfFit> {
    require_mtilde(empirical, DEFAULT_TOLERANCE)?;
    if n < 2 {
        return Err(Error::TrajectoryTooShort(n));
    }
    if !is_transition_probability(model, DEFAULT_TOLERANCE)
        && !is_positive_transition_measure(model, DEFAULT_TOLERANCE)?
    {
        return Err(Error::NotPositiveTransitionMeasure {
            root: perron(model)?.root,
        });
    }
    let divergence = f_divergence(generator, &taubar(empirical), model)?;
    Ok(GoodnessOfFit {
        statistic: 2.0 * (n - 1) as f64 * divergence,
        divergence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coordinates::{mass, stationarity_gap};

    fn complete2() -> Arc<ChainGraph> {
        Arc::new(ChainGraph::complete(2).unwrap())
    }

    fn two_cycle() -> Arc<ChainGraph> {
        Arc::new(ChainGraph::cycle(2).unwrap())
    }

    #[test]
    fn deterministic_cycle() {
        let w = EdgeFunction::ones(two_cycle());
        let t = sample_trajectory(&w, 5, 17, Initial::State(0)).unwrap();
        assert_eq!(t.states(), &[0, 1, 0, 1, 0]);
        assert_eq!(t.to_string(), "0 1 0 1 0");
    }

    #[test]
    fn same_seed_same_path() {
        let w = EdgeFunction::new(complete2(), vec![0.3, 0.7, 0.9, 0.1]).unwrap();
        let a = sample_trajectory(&w, 200, 42, Initial::Stationary).unwrap();
        let b = sample_trajectory(&w, 200, 42, Initial::Stationary).unwrap();
        let c = sample_trajectory(&w, 200, 43, Initial::Stationary).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rng_stream_is_pinned() {
        // Reference xoshiro256** seeded through SplitMix64, written out here
        // so an upstream change in the generator crate cannot go unnoticed.
        fn reference(seed: u64, count: usize) -> Vec<u64> {
            let mut sm = seed;
            let mut state = [0u64; 4];
            for word in &mut state {
                sm = sm.wrapping_add(0x9e37_79b9_7f4a_7c15);
                let mut z = sm;
                z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
                z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
                *word = z ^ (z >> 31);
            }
            (0..count)
                .map(|_| {
                    let out = state[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
                    let t = state[1] << 17;
                    state[2] ^= state[0];
                    state[3] ^= state[1];
                    state[1] ^= state[2];
                    state[0] ^= state[3];
                    state[2] ^= t;
                    state[3] = state[3].rotate_left(45);
                    out
                })
                .collect()
        }
        for seed in [0, 1, 42, u64::MAX] {
            let mut rng = ChainRng::new(seed);
            let ours: Vec<u64> = (0..8).map(|_| rng.next_u64()).collect();
            assert_eq!(ours, reference(seed, 8), "seed {seed}");
        }
        let expected = (reference(1, 1)[0] >> 11) as f64 * 2f64.powi(-53);
        assert_eq!(ChainRng::new(1).uniform(), expected);
    }

    #[test]
    fn sampling_requires_transition_probability() {
        let f = EdgeFunction::ones(complete2());
        assert!(matches!(
            sample_trajectory(&f, 10, 1, Initial::State(0)),
            Err(Error::NotTransitionProbability { .. })
        ));
        let w = EdgeFunction::new(complete2(), vec![0.5; 4]).unwrap();
        assert_eq!(
            sample_trajectory(&w, 1, 1, Initial::State(0)),
            Err(Error::TrajectoryTooShort(1))
        );
    }

    #[test]
    fn trajectory_validation() {
        assert_eq!(
            Trajectory::new(two_cycle(), vec![0, 0]),
            Err(Error::InvalidTransition(0, 0))
        );
        assert!(Trajectory::new(two_cycle(), vec![0, 3]).is_err());
        assert_eq!(
            Trajectory::new(two_cycle(), vec![0]),
            Err(Error::TrajectoryTooShort(1))
        );
    }

    #[test]
    fn empirical_measure_of_alternating_path() {
        let t = Trajectory::new(two_cycle(), vec![0, 1, 0, 1, 0]).unwrap();
        let eta = empirical_pair_measure(&t).unwrap();
        assert_eq!(eta.values(), &[0.5, 0.5]);
        assert_eq!(mass(&eta), 1.0);
        let w = mle_transition(&t, None).unwrap();
        assert_eq!(w.values(), &[1.0, 1.0]);
        assert!(!w.is_boundary());
    }

    #[test]
    fn boundary_estimate_is_flagged() {
        let t = Trajectory::new(complete2(), vec![0, 0, 1, 0]).unwrap();
        assert_eq!(
            empirical_pair_measure(&t),
            Err(Error::UnobservedEdge(vec![(1, 1)]))
        );
        let w = mle_transition(&t, None).unwrap();
        assert_eq!(w.values(), &[0.5, 0.5, 1.0, 0.0]);
        assert!(w.is_boundary());
        assert_eq!(
            w.to_edge_function(),
            Err(Error::BoundaryEstimate(vec![(1, 1)]))
        );
        let smoothed = mle_transition(&t, Some(0.5)).unwrap();
        assert!(!smoothed.is_boundary());
        let f = smoothed.to_edge_function().unwrap();
        assert!(is_transition_probability(&f, 1e-12));
        assert!((f.values()[3] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn unvisited_state() {
        let g = Arc::new(ChainGraph::cycle(3).unwrap());
        let t = Trajectory::new(g, vec![0, 1]).unwrap();
        assert_eq!(mle_transition(&t, None), Err(Error::UnvisitedState(1)));
    }

    #[test]
    fn projection_fixes_points_of_m() {
        let eta = ExpectationPoint::new(complete2(), vec![0.25; 4]).unwrap();
        let p = project_to_m(&eta).unwrap();
        assert_eq!(p.iterations, 0);
        assert_eq!(p.point, eta);
    }

    #[test]
    fn projection_lands_in_m() {
        let eta = ExpectationPoint::new(complete2(), vec![0.3, 0.3, 0.2, 0.2]).unwrap();
        let p = project_to_m(&eta).unwrap();
        assert!((mass(&p.point) - 1.0).abs() <= 1e-10);
        assert!(stationarity_gap(&p.point) <= 1e-8);
        assert!(projection_optimality_residual(&p.point, &eta) <= 1e-8);
        for w in p.objective_trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn projection_rejects_unnormalized() {
        let eta = ExpectationPoint::new(complete2(), vec![0.5; 4]).unwrap();
        assert_eq!(project_to_m(&eta), Err(Error::NotInMtilde(2.0)));
    }

    #[test]
    fn statistic_vanishes_on_the_model() {
        let w = EdgeFunction::new(complete2(), vec![0.3, 0.7, 0.9, 0.1]).unwrap();
        let eta = tbar(&w).unwrap();
        let kl = StandardConvexFunction::kl();
        let fit = goodness_of_fit_statistic(&kl, &eta, &w, 1000).unwrap();
        assert!(fit.statistic.abs() < 1e-10);

        let skew = ExpectationPoint::new(complete2(), vec![0.3, 0.3, 0.2, 0.2]).unwrap();
        let a = goodness_of_fit_statistic(&kl, &skew, &w, 101).unwrap();
        let b = goodness_of_fit_statistic(&kl, &skew, &w, 201).unwrap();
        assert!((b.statistic - 2.0 * a.statistic).abs() < 1e-12);
        assert_eq!(a.divergence, b.divergence);

        let off = EdgeFunction::ones(complete2());
        assert!(matches!(
            goodness_of_fit_statistic(&kl, &skew, &off, 10),
            Err(Error::NotPositiveTransitionMeasure { .. })
        ));
    }
}
