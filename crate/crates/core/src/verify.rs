//! Randomized identity suite: runs every structural identity of the
//! geometry on seeded random instances and reports the worst error seen
//! for each one against its threshold.
//!
//! Graph `i` (0-based) has `2 + i % 7` states and is drawn with seed
//! `replication_seed(seed, i)`; each identity then runs `cases` random
//! instances on it.

use std::sync::Arc;

use nalgebra::DVector;

use crate::coordinates::{in_marginal, mass, normalize_to_measure, taubar, tbar, ExpectationPoint};
use crate::divergence::{
    bregman_divergence, builtin_generators, f_divergence, induced_tensor, nagaoka_divergence, null_space,
    StandardConvexFunction,
};
use crate::error::Result;
use crate::graph::ChainGraph;
use crate::inference::{replication_seed, ChainRng};
use crate::oracle;
use crate::potential::{hessian_entry, phibar, phibar_gradient, phibar_hessian_with, restrict, HessianEntry};
use crate::spectral::{perron, root_gradient, EdgeFunction};
use crate::testkit::{
    log_uniform, random_direction, random_edge_function, random_expectation_point, random_graph,
    random_mtilde_point, random_transition,
};

/// Deliberate defects for exercising the failure path of the suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Flips the sign of the `δ_su δ_tv / η_st` term of the Hessian entry.
    HessianSign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyConfig {
    pub seed: u64,
    pub graphs: usize,
    pub cases: usize,
    pub fault: Option<Fault>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            graphs: 7,
            cases: 10,
            fault: None,
        }
    }
}

/// Worst error of one identity over all tested cases.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub id: usize,
    pub name: &'static str,
    pub cases: usize,
    pub max_error: f64,
    pub threshold: f64,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.max_error <= self.threshold
    }
}

struct Tally {
    name: &'static str,
    threshold: f64,
    cases: usize,
    max_error: f64,
}

impl Tally {
    fn record(&mut self, error: f64) {
        self.cases += 1;
        // NaN poisons the tally so the identity fails.
        if error.is_nan() || error > self.max_error {
            self.max_error = if error.is_nan() { f64::INFINITY } else { error };
        }
    }

    fn record_result(&mut self, error: Result<f64>) {
        self.record(error.unwrap_or(f64::INFINITY));
    }
}

macro_rules! identities {
    ($($field:ident: $name:literal <= $threshold:expr;)*) => {
        struct Suite { $($field: Tally,)* }

        impl Suite {
            fn new() -> Self {
                Self { $($field: Tally { name: $name, threshold: $threshold, cases: 0, max_error: 0.0 },)* }
            }

            fn into_reports(self) -> Vec<IdentityReport> {
                [$(self.$field,)*]
                    .into_iter()
                    .enumerate()
                    .map(|(id, t)| IdentityReport {
                        id: id + 1,
                        name: t.name,
                        cases: t.cases,
                        max_error: t.max_error,
                        threshold: t.threshold,
                    })
                    .collect()
            }
        }
    };
}

identities! {
    scaling_root: "scaling.root" <= 1e-9;
    scaling_stationary: "scaling.stationary" <= 1e-9;
    root_derivative_fd: "root_derivative.finite_difference" <= 1e-5;
    root_derivative_euler: "root_derivative.euler" <= 1e-10;
    eigen_residual: "perron.eigen_residual" <= 1e-10;
    roundtrip_edge: "roundtrip.taubar_tbar" <= 1e-9;
    roundtrip_point: "roundtrip.tbar_taubar" <= 1e-9;
    equivariance: "tbar.equivariance" <= 1e-10;
    relations: "tbar.relations" <= 1e-9;
    bregman_kl: "bregman.equals_kl" <= 1e-8;
    restriction: "divergence.restriction" <= 1e-10;
    nonnegative: "divergence.nonnegative" <= 1e-12;
    ray: "divergence.ray" <= 1e-10;
    scale_first_slot: "divergence.scale_first_slot" <= 1e-9;
    scale_second_slot: "divergence.scale_second_slot" <= 1e-9;
    first_order: "divergence.first_order" <= 1e-5;
    null_dimension: "tensor.null_dimension" <= 0.0;
    null_alignment: "tensor.null_alignment" <= 1e-8;
    tensor_fd: "tensor.finite_difference" <= 1e-4;
    tensor_slots: "tensor.slot_agreement" <= 1e-4;
    homogeneity: "potential.homogeneity" <= 1e-10;
    gradient_fd: "potential.gradient_fd" <= 1e-6;
    gradient_euler: "potential.gradient_euler" <= 1e-10;
    hessian_symmetry: "potential.hessian_symmetry" <= 1e-10;
    hessian_fd: "potential.hessian_fd" <= 1e-5;
    hessian_kernel: "potential.hessian_kernel" <= 1e-9;
    example_root: "example.root" <= 1e-10;
    example_hessian: "example.hessian" <= 1e-10;
    example_restricted: "example.restricted_hessian" <= 1e-10;
    example_wtilde: "example.wtilde" <= 1e-9;
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn corrupted_entry(
    eta: &[f64],
    a: (usize, usize, usize),
    b: (usize, usize, usize),
    inflow: &[f64],
    outflow: &[f64],
) -> f64 {
    let diagonal = if a.0 == b.0 { 1.0 / eta[a.0] } else { 0.0 };
    hessian_entry(eta, a, b, inflow, outflow) - 2.0 * diagonal
}

/// Runs the suite. Reports are ordered by identity id.
pub fn run(config: &VerifyConfig) -> Vec<IdentityReport> {
    let entry: HessianEntry = match config.fault {
        None => hessian_entry,
        Some(Fault::HessianSign) => corrupted_entry,
    };
    let mut suite = Suite::new();
    if config.cases > 0 {
        for i in 0..config.graphs {
            let mut rng = ChainRng::new(replication_seed(config.seed, i as u64));
            let graph = random_graph(&mut rng, 2 + i % 7);
            for _ in 0..config.cases {
                spectral_cases(&mut suite, &mut rng, &graph);
                coordinate_cases(&mut suite, &mut rng, &graph);
                divergence_cases(&mut suite, &mut rng, &graph);
                potential_cases(&mut suite, &mut rng, &graph, entry);
            }
        }
        let mut rng = ChainRng::new(replication_seed(config.seed, config.graphs as u64));
        for _ in 0..config.cases {
            example_cases(&mut suite, &mut rng, entry);
        }
    }
    suite.into_reports()
}

fn spectral_cases(suite: &mut Suite, rng: &mut ChainRng, graph: &Arc<ChainGraph>) {
    let f = random_edge_function(rng, graph);
    let a = log_uniform(rng, 0.1, 10.0);
    let outcome = (|| -> Result<()> {
        let s = perron(&f)?;
        let sa = perron(&f.scale(a)?)?;
        suite.scaling_root.record((sa.root - a * s.root).abs() / (a * s.root));
        suite
            .scaling_stationary
            .record(max_abs_diff(&sa.left_vec, &s.left_vec));

        let a_f = crate::spectral::matrix_of(&f);
        let mu = DVector::from_vec(s.left_vec.clone());
        let v = DVector::from_vec(s.right_vec.clone());
        let left = (a_f.transpose() * &mu - &mu * s.root).amax();
        let right = (&a_f * &v - &v * s.root).amax();
        suite.eigen_residual.record(left.max(right) / s.root);

        let grad = root_gradient(&f, &s);
        let euler: f64 = grad.iter().zip(f.values()).map(|(g, v)| g * v).sum();
        suite.root_derivative_euler.record((euler - s.root).abs() / s.root);

        let root_of = |x: &[f64]| {
            EdgeFunction::new(Arc::clone(graph), x.to_vec())
                .and_then(|g| perron(&g))
                .map_or(f64::NAN, |s| s.root)
        };
        let fd = oracle::gradient(root_of, f.values());
        // Norm-wise: tiny components carry the root's absolute noise / h.
        suite.root_derivative_fd.record(max_abs_diff(&grad, &fd) / max_abs(&grad));
        Ok(())
    })();
    if outcome.is_err() {
        suite.scaling_root.record(f64::INFINITY);
    }
}

fn coordinate_cases(suite: &mut Suite, rng: &mut ChainRng, graph: &Arc<ChainGraph>) {
    let f = random_edge_function(rng, graph);
    let eta = random_expectation_point(rng, graph);
    let a = log_uniform(rng, 0.1, 10.0);

    suite.roundtrip_edge.record_result(
        tbar(&f).map(|e| max_abs_diff(taubar(&e).values(), f.values()) / f.max_abs()),
    );
    suite.roundtrip_point.record_result(
        tbar(&taubar(&eta)).map(|e| max_abs_diff(e.values(), eta.values()) / eta.max_abs()),
    );
    suite.equivariance.record_result((|| {
        let lhs = tbar(&f.scale(a)?)?;
        let rhs = tbar(&f)?.scale(a)?;
        Ok(max_abs_diff(lhs.values(), rhs.values()) / rhs.max_abs())
    })());
    suite.relations.record_result((|| {
        let s = perron(&f)?;
        let e = tbar(&f)?;
        let mut err = (mass(&e) - s.root).abs() / s.root;
        for x in 0..graph.num_states() {
            err = err.max((in_marginal(&e, x)? - s.root * s.left_vec[x]).abs() / s.root);
        }
        Ok(err)
    })());
}

fn divergence_cases(suite: &mut Suite, rng: &mut ChainRng, graph: &Arc<ChainGraph>) {
    let kl = StandardConvexFunction::kl();
    let f = random_edge_function(rng, graph);
    let g = random_edge_function(rng, graph);
    let a = log_uniform(rng, 0.1, 10.0);
    let b = log_uniform(rng, 0.1, 10.0);

    suite.bregman_kl.record_result((|| {
        let d = f_divergence(&kl, &f, &g)?;
        let bre = bregman_divergence(&tbar(&f)?, &tbar(&g)?)?;
        Ok((bre - d).abs() / (1.0 + d))
    })());

    let w1 = random_transition(rng, graph);
    let w2 = random_transition(rng, graph);
    suite.restriction.record_result((|| {
        let d = f_divergence(&kl, &w1, &w2)?;
        let n = nagaoka_divergence(&w1, &w2)?;
        let bre = bregman_divergence(&tbar(&w1)?, &tbar(&w2)?)?;
        Ok((d - n).abs().max((d - bre).abs()).max((n - bre).abs()))
    })());

    for generator in builtin_generators() {
        suite.nonnegative.record_result(f_divergence(&generator, &f, &g).map(|d| (-d).max(0.0)));
        suite
            .ray
            .record_result(f.scale(a).and_then(|af| f_divergence(&generator, &f, &af)).map(f64::abs));
        suite.scale_first_slot.record_result((|| {
            let d = f_divergence(&generator, &f, &g)?;
            let da = f_divergence(&generator, &f.scale(a)?, &g)?;
            Ok((da - a * d).abs() / (a * d).max(f64::MIN_POSITIVE))
        })());
        suite.scale_second_slot.record_result((|| {
            let d = f_divergence(&generator, &f, &g)?;
            let db = f_divergence(&generator, &f, &g.scale(b)?)?;
            Ok((db - d).abs() / d.max(f64::MIN_POSITIVE))
        })());
        tensor_cases(suite, rng, graph, &generator, &f);
    }
}

fn divergence_at(generator: &StandardConvexFunction, graph: &Arc<ChainGraph>, p: &[f64], q: &[f64]) -> f64 {
    let make = |v: &[f64]| EdgeFunction::new(Arc::clone(graph), v.to_vec());
    match (make(p), make(q)) {
        (Ok(p), Ok(q)) => f_divergence(generator, &p, &q).unwrap_or(f64::NAN),
        _ => f64::NAN,
    }
}

fn tensor_cases(
    suite: &mut Suite,
    rng: &mut ChainRng,
    graph: &Arc<ChainGraph>,
    generator: &StandardConvexFunction,
    f: &EdgeFunction,
) {
    let m = graph.num_edges();
    let x = random_direction(rng, m);
    let y = random_direction(rng, m);

    match null_space(generator, f, 1e-9) {
        Ok(ns) => {
            suite
                .null_dimension
                .record((ns.dimension as f64 - 1.0).abs());
            suite
                .null_alignment
                .record(1.0 - ns.alignment_with(f.values()));
        }
        Err(_) => suite.null_dimension.record(f64::INFINITY),
    }

    let analytic = (|| -> Result<(f64, f64)> {
        let hxy = induced_tensor(generator, f, &x, &y)?;
        let scale = (induced_tensor(generator, f, &x, &x)? * induced_tensor(generator, f, &y, &y)?).sqrt();
        Ok((hxy, scale))
    })();
    let Ok((hxy, scale)) = analytic else {
        suite.tensor_fd.record(f64::INFINITY);
        return;
    };
    // Relative to the smallest entry: unit-size directions otherwise move
    // small coordinates far enough for the O(h²) term to dominate.
    let smallest = f.values().iter().copied().fold(f64::INFINITY, f64::min);
    let h = 1e-4 * smallest;
    let second_slot = oracle::mixed_directional(|q| divergence_at(generator, graph, f.values(), q), f.values(), &x, &y, h);
    let first_slot = oracle::mixed_directional(|p| divergence_at(generator, graph, p, f.values()), f.values(), &x, &y, h);
    suite.tensor_fd.record((second_slot - hxy).abs() / scale);
    suite.tensor_slots.record((first_slot - second_slot).abs() / scale);

    let h1 = oracle::first_step(f.max_abs());
    let d_second = oracle::directional(|q| divergence_at(generator, graph, f.values(), q), f.values(), &x, h1);
    let d_first = oracle::directional(|p| divergence_at(generator, graph, p, f.values()), f.values(), &x, h1);
    suite.first_order.record(d_second.abs().max(d_first.abs()));
}

fn point_from(graph: &Arc<ChainGraph>, v: &[f64]) -> Option<ExpectationPoint> {
    ExpectationPoint::new(Arc::clone(graph), v.to_vec()).ok()
}

fn potential_cases(suite: &mut Suite, rng: &mut ChainRng, graph: &Arc<ChainGraph>, entry: HessianEntry) {
    let eta = random_expectation_point(rng, graph);
    let a = log_uniform(rng, 0.1, 10.0);
    let value = phibar(&eta);

    let scaled = eta.scale(a).expect("positive scale");
    suite
        .homogeneity
        .record((phibar(&scaled) - a * value).abs() / (a * value.abs()).max(f64::MIN_POSITIVE));

    let grad = phibar_gradient(&eta);
    let fd = oracle::gradient(|v| point_from(graph, v).map_or(f64::NAN, |p| phibar(&p)), eta.values());
    suite
        .gradient_fd
        .record(max_abs_diff(&grad, &fd) / max_abs(&grad).max(f64::MIN_POSITIVE));
    let euler: f64 = grad.iter().zip(eta.values()).map(|(g, v)| g * v).sum();
    suite
        .gradient_euler
        .record((euler - value).abs() / value.abs().max(1.0));

    let raw = nalgebra::DMatrix::from_fn(graph.num_edges(), graph.num_edges(), |k, l| {
        let (s, t) = graph.edges()[k];
        let (u, v) = graph.edges()[l];
        entry(eta.values(), (k, s, t), (l, u, v), &eta.in_marginals(), &eta.out_marginals())
    });
    suite
        .hessian_symmetry
        .record((&raw - raw.transpose()).amax() / raw.amax());

    match phibar_hessian_with(&eta, entry) {
        Ok(hessian) => {
            let fd = oracle::jacobian(
                |v| point_from(graph, v).map_or_else(|| vec![f64::NAN; v.len()], |p| phibar_gradient(&p)),
                eta.values(),
            );
            suite
                .hessian_fd
                .record((&fd - &hessian).amax() / hessian.amax());
            let kernel = &hessian * DVector::from_column_slice(eta.values());
            suite.hessian_kernel.record(kernel.amax() / hessian.amax());
        }
        Err(_) => {
            suite.hessian_fd.record(f64::INFINITY);
            suite.hessian_kernel.record(f64::INFINITY);
        }
    }
}

fn example_cases(suite: &mut Suite, rng: &mut ChainRng, entry: HessianEntry) {
    let graph = Arc::new(ChainGraph::complete(2).expect("complete graph"));
    let f = random_edge_function(rng, &graph);
    let [x, y, z, w] = <[f64; 4]>::try_from(f.values()).expect("four edges");
    suite
        .example_root
        .record_result(perron(&f).map(|s| (s.root - oracle::two_state_root(x, y, z, w)).abs()));

    suite.example_wtilde.record_result(normalize_to_measure(&f).map(|n| {
        let [x, y, z, w] = <[f64; 4]>::try_from(n.values()).expect("four edges");
        if x + w < 2.0 {
            ((x - 1.0) * (w - 1.0) - y * z).abs()
        } else {
            f64::INFINITY
        }
    }));

    let eta = random_mtilde_point(rng, &graph);
    let values = <[f64; 4]>::try_from(eta.values()).expect("four edges");
    match phibar_hessian_with(&eta, entry) {
        Ok(hessian) => {
            let printed = oracle::two_state_hessian(values);
            suite
                .example_hessian
                .record((&hessian - &printed).amax() / printed.amax());
            let restricted = restrict(&hessian, 3);
            let printed = oracle::two_state_restricted_hessian(values);
            suite
                .example_restricted
                .record((&restricted - &printed).amax() / printed.amax());
        }
        Err(_) => {
            suite.example_hessian.record(f64::INFINITY);
            suite.example_restricted.record(f64::INFINITY);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_passes() {
        let reports = run(&VerifyConfig {
            seed: 5,
            graphs: 7,
            cases: 2,
            fault: None,
        });
        for r in &reports {
            assert!(r.passed(), "{} max error {:e} > {:e}", r.name, r.max_error, r.threshold);
            assert!(r.cases > 0, "{}", r.name);
        }
    }

    #[test]
    fn zero_cases_is_empty_but_ok() {
        let reports = run(&VerifyConfig {
            cases: 0,
            ..VerifyConfig::default()
        });
        assert!(reports.iter().all(|r| r.cases == 0 && r.passed()));
    }

    #[test]
    fn injected_fault_is_detected() {
        let reports = run(&VerifyConfig {
            seed: 1,
            graphs: 2,
            cases: 1,
            fault: Some(Fault::HessianSign),
        });
        let failed: Vec<_> = reports.iter().filter(|r| !r.passed()).map(|r| r.name).collect();
        assert!(failed.contains(&"potential.hessian_kernel"), "{failed:?}");
        assert!(failed.contains(&"example.hessian"), "{failed:?}");
    }
}
