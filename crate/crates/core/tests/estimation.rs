//! Seeded regression baselines for sampling and estimation.

use std::sync::Arc;

use ptm_core::inference::replication_seed;
use ptm_core::{
    empirical_pair_measure, goodness_of_fit_statistic, mle_transition, sample_trajectory, ChainGraph,
    EdgeFunction, Initial, StandardConvexFunction,
};

fn skewed() -> EdgeFunction {
    EdgeFunction::new(Arc::new(ChainGraph::complete(2).unwrap()), vec![0.3, 0.7, 0.9, 0.1]).unwrap()
}

#[test]
fn uniform_chain_state_frequencies() {
    let w = EdgeFunction::new(Arc::new(ChainGraph::complete(2).unwrap()), vec![0.5; 4]).unwrap();
    let t = sample_trajectory(&w, 100_000, 7, Initial::State(0)).unwrap();
    let zeros = t.states().iter().filter(|&&s| s == 0).count() as f64 / t.len() as f64;
    assert!((zeros - 0.5).abs() < 0.02, "{zeros}");
}

#[test]
fn mle_is_consistent() {
    let w = skewed();
    let t = sample_trajectory(&w, 100_000, 11, Initial::Stationary).unwrap();
    let mle = mle_transition(&t, None).unwrap();
    let err = mle.values().iter().zip(w.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err <= 0.02, "{err}");
}

#[test]
fn same_seed_same_trajectory() {
    let w = skewed();
    let a = sample_trajectory(&w, 1000, 5, Initial::Stationary).unwrap();
    let b = sample_trajectory(&w, 1000, 5, Initial::Stationary).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, sample_trajectory(&w, 1000, 6, Initial::Stationary).unwrap());
}

/// Under the true model the statistic behaves like a χ² variable with
/// `|E| − |X| = 2` degrees of freedom.
#[test]
fn goodness_of_fit_mean_under_the_model() {
    let w = skewed();
    let kl = StandardConvexFunction::kl();
    let n = 100_000;
    let replications = 200;
    let mean = (0..replications)
        .map(|i| {
            let t = sample_trajectory(&w, n, replication_seed(2024, i), Initial::Stationary).unwrap();
            let empirical = empirical_pair_measure(&t).unwrap();
            goodness_of_fit_statistic(&kl, &empirical, &w, n).unwrap().statistic
        })
        .sum::<f64>()
        / replications as f64;
    println!("mean statistic {mean}");
    assert!((mean - 2.0).abs() <= 0.5, "mean statistic {mean}");
}
