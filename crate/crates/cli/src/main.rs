mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, SymmetricEigen};
use ptm_core::coordinates::{row_normalize, stationarity_gap};
use ptm_core::inference::projection_optimality_residual;
use ptm_core::io::{write_trajectories, ChainFile};
use ptm_core::verify::{self, Fault, VerifyConfig};
use ptm_core::{
    bregman_divergence, empirical_pair_measure, f_divergence, goodness_of_fit_statistic, is_in_m,
    is_transition_probability, mass, mle_transition, nagaoka_divergence, perron, phibar, phibar_gradient,
    phibar_hessian, phihat, project_to_m, restricted_hessian, sample_trajectory, taubar, tbar, EdgeFunction,
    Error, ExpectationPoint, GeneratorRegistry, Initial, DEFAULT_TOLERANCE,
};

use report::{Format, Report};

#[derive(Parser)]
#[command(name = "ptm", version, about = "Geometry of positive transition measures on a Markov chain")]
struct Cli {
    /// Report layout.
    #[arg(long, value_enum, default_value_t = Format::Kv, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Perron root, stationary distribution and right eigenvector of an edge function.
    Spectral { file: PathBuf },
    /// F-divergence between two edge functions.
    Divergence {
        f: PathBuf,
        g: PathBuf,
        #[arg(long, default_value = "kl")]
        generator: String,
    },
    /// Potential, gradient and optionally Hessians at an expectation point.
    Potential {
        eta: PathBuf,
        #[arg(long)]
        hessian: bool,
        /// Hessian restricted to the unit-mass section (needs mass 1).
        #[arg(long)]
        restricted: bool,
    },
    /// Bregman projection of a unit-mass expectation point onto the stationary points.
    Project { eta: PathBuf },
    /// Samples a trajectory from a transition probability.
    Sample {
        w: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Start state, or `stationary`.
        #[arg(long, default_value = "stationary")]
        initial: String,
    },
    /// Samples a trajectory and compares the MLE and projected estimates with the truth.
    Estimate {
        w: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Pseudo-count added to every edge before estimating.
        #[arg(long)]
        smoothing: Option<f64>,
        #[arg(long, default_value = "kl")]
        generator: String,
    },
    /// Runs the randomized identity suite.
    Verify {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 7)]
        graphs: usize,
        #[arg(long, default_value_t = 10)]
        cases: usize,
        #[arg(long, value_enum)]
        inject_fault: Option<FaultArg>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    /// Sign flip in the Hessian entry formula.
    Hessian,
}

/// A command failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::NotTransitionProbability { .. }
            | Error::NotPositiveTransitionMeasure { .. }
            | Error::NotInMtilde(_)
            | Error::GraphMismatch
            | Error::UnobservedEdge(_)
            | Error::UnvisitedState(_)
            | Error::BoundaryEstimate(_) => 3,
            Error::NoConvergence(_) | Error::ProjectionNoConvergence { .. } | Error::AsymmetricHessian(_) => 4,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type Outcome = std::result::Result<Output, Failure>;

enum Output {
    Report(Report),
    /// Raw text that is not a report (trajectories).
    Text(String),
    /// A complete report that must still exit with a failure code.
    Failed(Report, u8),
}

fn read_chain(path: &Path) -> Result<ChainFile, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    })?;
    ChainFile::parse(&text).map_err(|e| Failure {
        message: format!("{}: {e}", path.display()),
        ..Failure::from(e)
    })
}

fn read_edge_function(path: &Path) -> Result<EdgeFunction, Failure> {
    Ok(read_chain(path)?.edge_function()?)
}

fn read_expectation(path: &Path) -> Result<ExpectationPoint, Failure> {
    Ok(read_chain(path)?.expectation_point()?)
}

fn eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut values: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn edge_list(edges: &[(usize, usize)]) -> String {
    edges.iter().map(|(x, y)| format!("{x},{y}")).collect::<Vec<_>>().join(" ")
}

fn cmd_spectral(file: &Path) -> Outcome {
    let f = read_edge_function(file)?;
    let s = perron(&f)?;
    let mut r = Report::new("spectral");
    r.input("file", file.display().to_string())
        .int("states", f.graph().num_states())
        .int("edges", f.graph().num_edges())
        .float("root", s.root)
        .floats("mu", &s.left_vec)
        .floats("v", &s.right_vec);
    Ok(Output::Report(r))
}

fn cmd_divergence(f: &Path, g: &Path, generator: &str) -> Outcome {
    let registry = GeneratorRegistry::default();
    let gen = registry.get(generator)?;
    let (ff, gg) = (read_edge_function(f)?, read_edge_function(g)?);
    let d = f_divergence(gen, &ff, &gg)?;
    let mut r = Report::new("divergence");
    r.input("f", f.display().to_string())
        .input("g", g.display().to_string())
        .input("generator", generator)
        .float("divergence", d);
    if is_transition_probability(&ff, DEFAULT_TOLERANCE) && is_transition_probability(&gg, DEFAULT_TOLERANCE) {
        r.float("nagaoka", nagaoka_divergence(&ff, &gg)?);
    }
    Ok(Output::Report(r))
}

fn cmd_potential(eta_path: &Path, hessian: bool, restricted: bool) -> Outcome {
    let eta = read_expectation(eta_path)?;
    let mut r = Report::new("potential");
    r.input("eta", eta_path.display().to_string())
        .input("hessian", hessian.to_string())
        .input("restricted", restricted.to_string())
        .float("mass", mass(&eta))
        .float("phibar", phibar(&eta))
        .float("phihat", phihat(&eta))
        .floats("gradient", &phibar_gradient(&eta));
    if hessian {
        let h = phibar_hessian(&eta)?;
        let kernel = &h * nalgebra::DVector::from_column_slice(eta.values());
        r.matrix("hessian", &h)
            .floats("hessian.eigenvalues", &eigenvalues(&h))
            .float("hessian.kernel_residual", kernel.amax());
    }
    if restricted {
        let h = restricted_hessian(&eta, None)?;
        r.matrix("restricted_hessian", &h)
            .floats("restricted_hessian.eigenvalues", &eigenvalues(&h));
    }
    Ok(Output::Report(r))
}

fn cmd_project(eta_path: &Path) -> Outcome {
    let eta = read_expectation(eta_path)?;
    let p = project_to_m(&eta)?;
    let star = &p.point;
    // Pythagorean check against the image of the uniform transition probability.
    let zeta = tbar(&row_normalize(&EdgeFunction::ones(Arc::clone(eta.graph()))))?;
    let lhs = bregman_divergence(&zeta, &eta)?;
    let rhs = bregman_divergence(&zeta, star)? + bregman_divergence(star, &eta)?;
    let mut r = Report::new("project");
    r.input("eta", eta_path.display().to_string())
        .floats("point", star.values())
        .int("iterations", p.iterations)
        .float("objective", *p.objective_trace.last().expect("trace starts with the initial value"))
        .float("gradient_norm", p.gradient_norm)
        .float("optimality_residual", projection_optimality_residual(star, &eta))
        .float("mass_gap", (mass(star) - 1.0).abs())
        .float("stationarity_gap", stationarity_gap(star))
        .float("pythagorean_residual", (lhs - rhs).abs() / lhs.abs().max(f64::MIN_POSITIVE));
    Ok(Output::Report(r))
}

fn parse_initial(text: &str) -> Result<Initial, Failure> {
    if text == "stationary" {
        return Ok(Initial::Stationary);
    }
    text.parse().map(Initial::State).map_err(|_| Failure {
        code: 2,
        message: format!("--initial expects a state index or `stationary`, got `{text}`"),
    })
}

fn cmd_sample(w_path: &Path, n: usize, seed: u64, initial: &str) -> Outcome {
    let w = read_edge_function(w_path)?;
    let t = sample_trajectory(&w, n, seed, parse_initial(initial)?)?;
    Ok(Output::Text(write_trajectories(&[t])))
}

fn cmd_estimate(w_path: &Path, n: usize, seed: u64, smoothing: Option<f64>, generator: &str) -> Outcome {
    let registry = GeneratorRegistry::default();
    let gen = registry.get(generator)?;
    let w = read_edge_function(w_path)?;
    let t = sample_trajectory(&w, n, seed, Initial::Stationary)?;
    let mle = mle_transition(&t, smoothing)?;
    let mut r = Report::new("estimate");
    r.input("w", w_path.display().to_string())
        .input("n", n.to_string())
        .input("seed", seed.to_string())
        .input("smoothing", smoothing.map_or("none".into(), report::float))
        .input("generator", generator)
        .floats("mle", mle.values());
    if mle.is_boundary() {
        r.text("mle.boundary_edges", edge_list(mle.boundary_edges()));
        return Ok(Output::Failed(r, 3));
    }
    let mle_fn = mle.to_edge_function()?;

    let empirical = match smoothing {
        None => empirical_pair_measure(&t)?,
        Some(alpha) => {
            let counts: Vec<f64> = t.edge_counts().iter().map(|&c| c as f64 + alpha).collect();
            let total: f64 = counts.iter().sum();
            ExpectationPoint::new(Arc::clone(w.graph()), counts.iter().map(|c| c / total).collect())?
        }
    };
    let projection = project_to_m(&empirical)?;
    let projected = taubar(&projection.point);
    let fit = goodness_of_fit_statistic(gen, &empirical, &w, n)?;

    r.floats("projected", projected.values())
        .int("projection.iterations", projection.iterations)
        .float("mle.error", max_gap(mle.values(), w.values()))
        .float("projected.error", max_gap(projected.values(), w.values()))
        .float("estimator_gap", max_gap(mle.values(), projected.values()))
        .float("mle.divergence_to_truth", nagaoka_divergence(&w, &mle_fn)?)
        .float("projected.divergence_to_truth", f_divergence(gen, &w, &projected)?)
        .float("fit.divergence", fit.divergence)
        .float("fit.statistic", fit.statistic)
        .text("empirical.in_m", is_in_m(&empirical, DEFAULT_TOLERANCE).to_string());
    Ok(Output::Report(r))
}

fn cmd_verify(seed: u64, graphs: usize, cases: usize, fault: Option<FaultArg>) -> Outcome {
    let config = VerifyConfig {
        seed,
        graphs,
        cases,
        fault: fault.map(|FaultArg::Hessian| Fault::HessianSign),
    };
    let mut r = Report::new("verify");
    r.input("seed", seed.to_string())
        .input("graphs", graphs.to_string())
        .input("cases", cases.to_string())
        .input("fault", if fault.is_some() { "hessian" } else { "none" });
    let mut failed = 0;
    for id in verify::run(&config) {
        let key = format!("identity.{:02}.{}", id.id, id.name);
        let verdict = if id.passed() { "pass" } else { "fail" };
        failed += usize::from(!id.passed());
        r.text(
            key,
            format!("{verdict} cases={} max_error={} threshold={}", id.cases, report::float(id.max_error), report::float(id.threshold)),
        );
    }
    r.int("failed", failed);
    Ok(if failed == 0 { Output::Report(r) } else { Output::Failed(r, 5) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Spectral { file } => cmd_spectral(file),
        Command::Divergence { f, g, generator } => cmd_divergence(f, g, generator),
        Command::Potential { eta, hessian, restricted } => cmd_potential(eta, *hessian, *restricted),
        Command::Project { eta } => cmd_project(eta),
        Command::Sample { w, n, seed, initial } => cmd_sample(w, *n, *seed, initial),
        Command::Estimate {
            w,
            n,
            seed,
            smoothing,
            generator,
        } => cmd_estimate(w, *n, *seed, *smoothing, generator),
        Command::Verify {
            seed,
            graphs,
            cases,
            inject_fault,
        } => cmd_verify(*seed, *graphs, *cases, *inject_fault),
    };
    match outcome {
        Ok(Output::Report(mut r)) => {
            r.text("status", "ok");
            print!("{}", r.render(cli.format));
            ExitCode::SUCCESS
        }
        Ok(Output::Text(text)) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Ok(Output::Failed(mut r, code)) => {
            r.text("status", "error").int("code", code.into());
            print!("{}", r.render(cli.format));
            eprintln!("error: command finished with failures");
            ExitCode::from(code)
        }
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
