//! F-divergences on positive edge functions, the Bregman divergence of the
//! potential `φ̄`, and the symmetric tensor `h_F` induced by `D_F`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::coordinates::{require_transition_probability, ExpectationPoint, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::spectral::{perron, root_gradient, same_graph, EdgeFunction};

/// Results in `[-CLAMP, 0)` are reported as exactly zero.
pub const CLAMP: f64 = 1e-12;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A strictly convex `F` on `(0, ∞)` with `F(1) = F'(1) = 0` and `F''(1) = 1`.
#[derive(Clone)]
pub struct StandardConvexFunction {
    name: String,
    eval: ScalarFn,
    deriv1: ScalarFn,
    deriv2: ScalarFn,
}

impl fmt::Debug for StandardConvexFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StandardConvexFunction")
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

impl StandardConvexFunction {
    /// Registers a generator after running the validity checks.
    ///
    /// Checks `F(1) = F'(1) = 0` and `F''(1) = 1` to 1e-12, `F'' > 0` on the
    /// grid `t = 2^k` for `-6 ≤ k ≤ 6`, and that `F'`, `F''` agree with
    /// Richardson-extrapolated central differences of `F` on the same grid
    /// to 1e-6 (relative, with a unit floor on the denominator).
    pub fn new(
        name: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        deriv1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        deriv2: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let generator = Self {
            name: name.into(),
            eval: Arc::new(eval),
            deriv1: Arc::new(deriv1),
            deriv2: Arc::new(deriv2),
        };
        generator.validate()?;
        Ok(generator)
    }

    fn validate(&self) -> Result<()> {
        let fail = |reason: String| {
            Err(Error::InvalidGenerator {
                name: self.name.clone(),
                reason,
            })
        };
        let anchors = [
            ("F(1)", self.eval(1.0), 0.0),
            ("F'(1)", self.deriv1(1.0), 0.0),
            ("F''(1)", self.deriv2(1.0), 1.0),
        ];
        for (label, got, want) in anchors {
            if !((got - want).abs() <= 1e-12) {
                return fail(format!("{label} = {got}, expected {want}"));
            }
        }
        for k in -6..=6 {
            let t = 2f64.powi(k);
            let d2 = self.deriv2(t);
            if !(d2 > 0.0) {
                return fail(format!("F''({t}) = {d2} is not positive"));
            }
            let fd1 = richardson(|h| (self.eval(t + h) - self.eval(t - h)) / (2.0 * h), 1e-3 * t);
            let d1 = self.deriv1(t);
            if (fd1 - d1).abs() > 1e-6 * d1.abs().max(1.0) {
                return fail(format!("F'({t}) = {d1} disagrees with finite difference {fd1}"));
            }
            let fd2 = richardson(
                |h| (self.eval(t + h) - 2.0 * self.eval(t) + self.eval(t - h)) / (h * h),
                1e-2 * t,
            );
            if (fd2 - d2).abs() > 1e-6 * d2.abs().max(1.0) {
                return fail(format!("F''({t}) = {d2} disagrees with finite difference {fd2}"));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.eval)(t)
    }

    pub fn deriv1(&self, t: f64) -> f64 {
        (self.deriv1)(t)
    }

    pub fn deriv2(&self, t: f64) -> f64 {
        (self.deriv2)(t)
    }

    /// `F(t) = −log t + (t − 1)`, the generator of the KL divergence.
    pub fn kl() -> Self {
        Self::new("kl", |t| -t.ln() + (t - 1.0), |t| 1.0 - 1.0 / t, |t| 1.0 / (t * t))
            .expect("builtin kl")
    }

    /// `F(t) = (t − 1)² / 2`.
    pub fn chi2() -> Self {
        Self::new("chi2", |t| 0.5 * (t - 1.0).powi(2), |t| t - 1.0, |_| 1.0).expect("builtin chi2")
    }

    /// `F(t) = 2(√t − 1)²`.
    pub fn hellinger() -> Self {
        Self::new(
            "hellinger",
            |t| 2.0 * (t.sqrt() - 1.0).powi(2),
            |t| 2.0 - 2.0 / t.sqrt(),
            |t| 1.0 / (t * t.sqrt()),
        )
        .expect("builtin hellinger")
    }
}

/// The built-in generators: `kl`, `chi2` and `hellinger`.
pub fn builtin_generators() -> Vec<StandardConvexFunction> {
    vec![
        StandardConvexFunction::kl(),
        StandardConvexFunction::chi2(),
        StandardConvexFunction::hellinger(),
    ]
}

/// One Richardson step on a second-order accurate stencil `d(h)`.
fn richardson(d: impl Fn(f64) -> f64, h: f64) -> f64 {
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

/// Name-indexed generator lookup. Populate it, then share it read-only.
#[derive(Debug, Clone)]
pub struct GeneratorRegistry {
    generators: BTreeMap<String, StandardConvexFunction>,
}

impl Default for GeneratorRegistry {
    fn default() -> Self {
        let generators = builtin_generators()
            .into_iter()
            .map(|g| (g.name().to_owned(), g))
            .collect();
        Self { generators }
    }
}

impl GeneratorRegistry {
    /// Adds a generator; names already taken are rejected.
    pub fn register(&mut self, generator: StandardConvexFunction) -> Result<()> {
        if self.generators.contains_key(generator.name()) {
            return Err(Error::InvalidGenerator {
                name: generator.name().to_owned(),
                reason: "name already registered".into(),
            });
        }
        self.generators
            .insert(generator.name().to_owned(), generator);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&StandardConvexFunction> {
        self.generators
            .get(name)
            .ok_or_else(|| Error::UnknownGenerator(name.to_owned()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.generators.keys().map(String::as_str)
    }
}

fn clamp(value: f64) -> f64 {
    if (-CLAMP..0.0).contains(&value) {
        0.0
    } else {
        value
    }
}

/// `D_F(f, g) = Σ μ_f(x) f(x,y) F( (g(x,y)/r(g)) / (f(x,y)/r(f)) )`.
pub fn f_divergence(
    generator: &StandardConvexFunction,
    f: &EdgeFunction,
    g: &EdgeFunction,
) -> Result<f64> {
    same_graph(f.graph(), g.graph())?;
    let sf = perron(f)?;
    let rg = perron(g)?.root;
    let ratio = sf.root / rg;
    let value = f
        .graph()
        .edges()
        .iter()
        .zip(f.values().iter().zip(g.values()))
        .map(|(&(x, _), (&fv, &gv))| sf.left_vec[x] * fv * generator.eval(ratio * gv / fv))
        .sum();
    Ok(clamp(value))
}

/// `D(w1, w2) = Σ μ_w1(x) w1(x,y) log(w1(x,y) / w2(x,y))` on transition probabilities.
pub fn nagaoka_divergence(w1: &EdgeFunction, w2: &EdgeFunction) -> Result<f64> {
    same_graph(w1.graph(), w2.graph())?;
    require_transition_probability(w1, DEFAULT_TOLERANCE)?;
    require_transition_probability(w2, DEFAULT_TOLERANCE)?;
    let mu = perron(w1)?.left_vec;
    let value = w1
        .graph()
        .edges()
        .iter()
        .zip(w1.values().iter().zip(w2.values()))
        .map(|(&(x, _), (&a, &b))| mu[x] * a * (a / b).ln())
        .sum();
    Ok(clamp(value))
}

/// Bregman divergence of `φ̄`, evaluated in the cancelled closed form
/// `Σ η log(η/ζ) − Σ_x η_x log(η^x/ζ^x) + Σ_x η^x ζ_x/ζ^x − r(η)`.
pub fn bregman_divergence(eta: &ExpectationPoint, zeta: &ExpectationPoint) -> Result<f64> {
    same_graph(eta.graph(), zeta.graph())?;
    Ok(clamp(bregman_raw(eta.values(), zeta.values(), eta)))
}

/// Closed form on raw value slices laid out on `layout`'s graph.
pub(crate) fn bregman_raw(eta: &[f64], zeta: &[f64], layout: &ExpectationPoint) -> f64 {
    let graph = layout.graph();
    let n = graph.num_states();
    let mut eta_in = vec![0.0; n];
    let mut eta_out = vec![0.0; n];
    let mut zeta_in = vec![0.0; n];
    let mut zeta_out = vec![0.0; n];
    let mut pair_term = 0.0;
    let mut total = 0.0;
    for (k, &(x, y)) in graph.edges().iter().enumerate() {
        eta_out[x] += eta[k];
        eta_in[y] += eta[k];
        zeta_out[x] += zeta[k];
        zeta_in[y] += zeta[k];
        pair_term += eta[k] * (eta[k] / zeta[k]).ln();
        total += eta[k];
    }
    let state_term: f64 = (0..n)
        .map(|x| -eta_out[x] * (eta_in[x] / zeta_in[x]).ln() + eta_in[x] * zeta_out[x] / zeta_in[x])
        .sum();
    pair_term + state_term - total
}

/// Jacobian `J[(x,y),(s,t)] = ∂(a_xy / r(a)) / ∂a_st` at `f`, and the
/// per-edge weights `μ_f(x) r(f)² / f(x,y)` of the induced tensor.
fn tensor_parts(f: &EdgeFunction) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let spectral = perron(f)?;
    let grad = root_gradient(f, &spectral);
    let r = spectral.root;
    let m = f.values().len();
    let mut jac = DMatrix::zeros(m, m);
    for (row, &fv) in f.values().iter().enumerate() {
        for col in 0..m {
            let delta = if row == col { r } else { 0.0 };
            jac[(row, col)] = (delta - fv * grad[col]) / (r * r);
        }
    }
    let weights = f
        .graph()
        .edges()
        .iter()
        .zip(f.values())
        .map(|(&(x, _), &fv)| spectral.left_vec[x] * r * r / fv)
        .collect();
    Ok((jac, weights))
}

/// The induced tensor `h_F(X, Y) = D_F[−|XY](f)` in closed form.
///
/// At `g = f` the argument of `F` is 1, so only `F''(1)` survives:
/// `h_F(X, Y) = F''(1) Σ μ_f(x) f(x,y) (r(f)/f(x,y))² (J X)_xy (J Y)_xy`.
pub fn induced_tensor(
    generator: &StandardConvexFunction,
    f: &EdgeFunction,
    x: &[f64],
    y: &[f64],
) -> Result<f64> {
    let m = f.values().len();
    for v in [x, y] {
        if v.len() != m {
            return Err(Error::LengthMismatch {
                expected: m,
                got: v.len(),
            });
        }
    }
    let (jac, weights) = tensor_parts(f)?;
    let jx = &jac * DVector::from_column_slice(x);
    let jy = &jac * DVector::from_column_slice(y);
    let curvature = generator.deriv2(1.0);
    Ok(curvature
        * weights
            .iter()
            .zip(jx.iter().zip(jy.iter()))
            .map(|(w, (a, b))| w * a * b)
            .sum::<f64>())
}

/// Gram matrix of `h_F` in the coordinate basis `∂/∂a_xy`.
pub fn induced_gram(generator: &StandardConvexFunction, f: &EdgeFunction) -> Result<DMatrix<f64>> {
    let (jac, weights) = tensor_parts(f)?;
    let weighted = DMatrix::from_diagonal(&DVector::from_vec(weights)) * &jac;
    let gram = jac.transpose() * weighted * generator.deriv2(1.0);
    Ok((&gram + gram.transpose()) * 0.5)
}

/// Null-space summary of the `h_F` Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct NullSpace {
    /// Number of eigenvalues with magnitude `≤ tol · λ_max`.
    pub dimension: usize,
    /// Unit eigenvector of the eigenvalue smallest in magnitude.
    pub null_vector: Vec<f64>,
    /// Eigenvalues in ascending order.
    pub eigenvalues: Vec<f64>,
}

impl NullSpace {
    /// `|cos|` of the angle between the null vector and `v`.
    pub fn alignment_with(&self, v: &[f64]) -> f64 {
        let dot: f64 = self.null_vector.iter().zip(v).map(|(a, b)| a * b).sum();
        let norm: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        dot.abs() / norm
    }
}

pub fn null_space(generator: &StandardConvexFunction, f: &EdgeFunction, tol: f64) -> Result<NullSpace> {
    let gram = induced_gram(generator, f)?;
    let eigen = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..eigen.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[a].total_cmp(&eigen.eigenvalues[b]));
    let largest = eigen.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let dimension = eigen
        .eigenvalues
        .iter()
        .filter(|v| v.abs() <= tol * largest)
        .count();
    let smallest = (0..eigen.eigenvalues.len())
        .min_by(|&a, &b| eigen.eigenvalues[a].abs().total_cmp(&eigen.eigenvalues[b].abs()))
        .expect("nonempty edge set");
    Ok(NullSpace {
        dimension,
        null_vector: eigen.eigenvectors.column(smallest).iter().copied().collect(),
        eigenvalues: order.iter().map(|&k| eigen.eigenvalues[k]).collect(),
    })
}

/// Number of Gram eigenvalues with magnitude `≤ tol · λ_max`.
pub fn null_space_dimension(
    generator: &StandardConvexFunction,
    f: &EdgeFunction,
    tol: f64,
) -> Result<usize> {
    Ok(null_space(generator, f, tol)?.dimension)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coordinates::tbar;
    use crate::graph::ChainGraph;

    fn complete2(values: [f64; 4]) -> EdgeFunction {
        EdgeFunction::new(Arc::new(ChainGraph::complete(2).unwrap()), values.to_vec()).unwrap()
    }

    fn point(values: [f64; 4]) -> ExpectationPoint {
        ExpectationPoint::new(Arc::new(ChainGraph::complete(2).unwrap()), values.to_vec()).unwrap()
    }

    fn kl_pair_oracle() -> f64 {
        // Both arguments are stochastic, so D = Σ μ f log(f/g) with μ = (1/2, 1/2).
        let f = [0.5f64; 4];
        let g = [0.3, 0.7, 0.9, 0.1];
        f.iter().zip(&g).map(|(a, b)| 0.5 * a * (a / b).ln()).sum()
    }

    #[test]
    fn builtin_values() {
        let kl = StandardConvexFunction::kl();
        assert_eq!(kl.eval(1.0), 0.0);
        assert_eq!(StandardConvexFunction::chi2().deriv2(1.0), 1.0);
        assert!((StandardConvexFunction::hellinger().eval(4.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn registration_rejects_bad_generators() {
        let shifted = StandardConvexFunction::new("shifted", |t| (t - 1.0).powi(2) + 1.0, |t| 2.0 * (t - 1.0), |_| 2.0);
        assert!(matches!(shifted, Err(Error::InvalidGenerator { .. })));
        let wrong_deriv = StandardConvexFunction::new(
            "wrong",
            |t| 0.5 * (t - 1.0).powi(2),
            |t| t - 1.0,
            |t| t,
        );
        assert!(matches!(wrong_deriv, Err(Error::InvalidGenerator { .. })));
        let concave = StandardConvexFunction::new(
            "concave",
            |t: f64| 0.5 * (t - 1.0).powi(2) - (t - 1.0).powi(4),
            |t: f64| (t - 1.0) - 4.0 * (t - 1.0).powi(3),
            |t: f64| 1.0 - 12.0 * (t - 1.0).powi(2),
        );
        assert!(matches!(concave, Err(Error::InvalidGenerator { .. })));
    }

    #[test]
    fn registry_lookup() {
        let mut registry = GeneratorRegistry::default();
        assert_eq!(registry.names().collect::<Vec<_>>(), ["chi2", "hellinger", "kl"]);
        assert!(registry.get("kl").is_ok());
        assert_eq!(registry.get("tv").unwrap_err(), Error::UnknownGenerator("tv".into()));
        let js = StandardConvexFunction::new(
            "reverse-kl",
            |t| t * t.ln() - (t - 1.0),
            |t| t.ln(),
            |t| 1.0 / t,
        )
        .unwrap();
        registry.register(js).unwrap();
        assert_eq!(registry.get("reverse-kl").unwrap().name(), "reverse-kl");
        assert!(registry.register(StandardConvexFunction::kl()).is_err());
    }

    #[test]
    fn kl_divergence_example() {
        let f = complete2([0.5; 4]);
        let g = complete2([0.3, 0.7, 0.9, 0.1]);
        let d = f_divergence(&StandardConvexFunction::kl(), &f, &g).unwrap();
        assert!((d - kl_pair_oracle()).abs() < 1e-13);
        assert!((d - 0.2990).abs() < 5e-5, "{d}");
        let n = nagaoka_divergence(&f, &g).unwrap();
        assert!((n - d).abs() < 1e-13);
        let reverse = nagaoka_divergence(&g, &f).unwrap();
        assert!((reverse - n).abs() > 1e-3);
    }

    #[test]
    fn rays_have_zero_divergence() {
        let f = complete2([0.2, 1.7, 0.4, 3.0]);
        let g = f.scale(2.0).unwrap();
        for generator in builtin_generators() {
            assert_eq!(f_divergence(&generator, &f, &f).unwrap(), 0.0);
            assert!(f_divergence(&generator, &f, &g).unwrap() < 1e-14);
        }
    }

    #[test]
    fn nagaoka_requires_transition_probabilities() {
        let w = complete2([0.5; 4]);
        let f = complete2([1.0; 4]);
        assert!(matches!(
            nagaoka_divergence(&w, &f),
            Err(Error::NotTransitionProbability { .. })
        ));
        assert_eq!(nagaoka_divergence(&w, &w).unwrap(), 0.0);
    }

    #[test]
    fn graph_mismatch() {
        let f = complete2([1.0; 4]);
        let cycle = EdgeFunction::ones(Arc::new(ChainGraph::cycle(2).unwrap()));
        assert_eq!(
            f_divergence(&StandardConvexFunction::kl(), &f, &cycle),
            Err(Error::GraphMismatch)
        );
    }

    #[test]
    fn bregman_examples() {
        let eta = point([0.25; 4]);
        assert_eq!(bregman_divergence(&eta, &eta).unwrap(), 0.0);
        let doubled = eta.scale(2.0).unwrap();
        assert!(bregman_divergence(&eta, &doubled).unwrap().abs() < 1e-15);

        let f = complete2([0.5; 4]);
        let g = complete2([0.3, 0.7, 0.9, 0.1]);
        let b = bregman_divergence(&tbar(&f).unwrap(), &tbar(&g).unwrap()).unwrap();
        assert!((b - kl_pair_oracle()).abs() < 1e-12);
    }

    #[test]
    fn radial_vector_is_null() {
        let f = complete2([0.2, 1.7, 0.4, 3.0]);
        let x = [0.3, -1.2, 0.8, 0.1];
        for generator in builtin_generators() {
            let h = induced_tensor(&generator, &f, &x, f.values()).unwrap();
            assert!(h.abs() < 1e-12, "{h}");
            let hxx = induced_tensor(&generator, &f, &x, &x).unwrap();
            assert!(hxx > 0.0);
            let doubled: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
            let h2 = induced_tensor(&generator, &f, &doubled, &x).unwrap();
            assert!((h2 - 2.0 * hxx).abs() < 1e-12 * hxx.abs().max(1.0));
        }
    }

    #[test]
    fn null_space_is_the_ray() {
        let f = complete2([0.2, 1.7, 0.4, 3.0]);
        for generator in builtin_generators() {
            let ns = null_space(&generator, &f, 1e-9).unwrap();
            assert_eq!(ns.dimension, 1);
            assert!(ns.alignment_with(f.values()) >= 1.0 - 1e-8);
            assert_eq!(null_space_dimension(&generator, &f, 1e-9).unwrap(), 1);
        }
    }
}
