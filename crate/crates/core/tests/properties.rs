use std::sync::Arc;

use proptest::prelude::*;
use ptm_core::testkit::{random_edge_function, random_graph, random_mtilde_point};
use ptm_core::{
    bregman_divergence, f_divergence, perron, phibar, taubar, tbar, ChainGraph, ChainRng, EdgeFunction,
    ExpectationPoint, StandardConvexFunction,
};

fn value() -> impl Strategy<Value = f64> {
    (-2.0f64..2.0).prop_map(f64::exp)
}

fn two_state() -> impl Strategy<Value = EdgeFunction> {
    prop::collection::vec(value(), 4)
        .prop_map(|v| EdgeFunction::new(Arc::new(ChainGraph::complete(2).unwrap()), v).unwrap())
}

fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().map(|x| x.abs()).fold(0.0, f64::max);
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

proptest! {
    #[test]
    fn roundtrip_on_seeded_graphs(seed in any::<u64>(), states in 2usize..8) {
        let mut rng = ChainRng::new(seed);
        let graph = random_graph(&mut rng, states);
        let f = random_edge_function(&mut rng, &graph);
        prop_assert!(max_rel_diff(taubar(&tbar(&f).unwrap()).values(), f.values()) < 1e-9);
    }

    #[test]
    fn root_is_degree_one_homogeneous(f in two_state(), a in 0.1f64..10.0) {
        let r = perron(&f).unwrap().root;
        let ra = perron(&f.scale(a).unwrap()).unwrap().root;
        prop_assert!((ra - a * r).abs() <= 1e-9 * a * r);
    }

    #[test]
    fn kl_divergence_equals_bregman(f in two_state(), g in two_state()) {
        let d = f_divergence(&StandardConvexFunction::kl(), &f, &g).unwrap();
        let b = bregman_divergence(&tbar(&f).unwrap(), &tbar(&g).unwrap()).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!((d - b).abs() <= 1e-8 * (1.0 + d));
    }

    #[test]
    fn phibar_is_convex_along_segments(seed in any::<u64>(), t in 0.0f64..1.0) {
        let mut rng = ChainRng::new(seed);
        let graph = random_graph(&mut rng, 3);
        let eta = random_mtilde_point(&mut rng, &graph);
        let zeta = random_mtilde_point(&mut rng, &graph);
        let mix: Vec<f64> = eta.values().iter().zip(zeta.values()).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let mix = ExpectationPoint::new(Arc::clone(&graph), mix).unwrap();
        prop_assert!(phibar(&mix) <= t * phibar(&eta) + (1.0 - t) * phibar(&zeta) + 1e-12);
    }
}
