use cbsep_core::electrical::{
    commute_time_check, effective_resistance, flow_energy, optimal_flow, resistance_profile, shortest_path_flow,
};
use cbsep_core::graph::{self, Family, Graph};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn pseudo_inverse_resistance(g: &Graph) -> DMatrix<f64> {
    let n = g.n();
    let pinv = g.laplacian().pseudo_inverse(1e-10).unwrap();
    DMatrix::from_fn(n, n, |x, y| pinv[(x, x)] + pinv[(y, y)] - 2.0 * pinv[(x, y)])
}

#[test]
fn family_sizes() {
    assert_eq!(graph::cycle(7).unwrap().num_edges(), 7);
    assert_eq!(graph::path(7).unwrap().num_edges(), 6);
    assert_eq!(graph::complete(5).unwrap().num_edges(), 10);
    let t = graph::torus(4, 2).unwrap();
    assert_eq!((t.n(), t.num_edges()), (16, 32));
    let h = graph::hypercube(4).unwrap();
    assert_eq!((h.n(), h.num_edges()), (16, 32));
    let tree = graph::bary_tree(2, 3).unwrap();
    assert_eq!((tree.n(), tree.num_edges()), (15, 14));
    let r = graph::random_regular(3, 10, 5).unwrap();
    assert!((0..10).all(|x| r.degree(x) == 3));
    assert_eq!(Family::Torus { side: 3, dim: 2 }.build().unwrap(), graph::torus(3, 2).unwrap());
}

#[test]
fn rejects_bad_inputs() {
    assert!(Graph::from_edges(3, &[(0, 1)]).is_err());
    assert!(Graph::from_edges(2, &[(0, 0)]).is_err());
    assert!(Graph::from_edges(2, &[(0, 1), (1, 0)]).is_err());
    assert!(graph::random_regular(3, 7, 1).is_err());
    assert!(Graph::from_edge_list("3 2\n0 1\n").is_err());
}

#[test]
fn edge_list_roundtrip() {
    let g = graph::bary_tree(3, 2).unwrap();
    assert_eq!(Graph::from_edge_list(&g.to_edge_list()).unwrap(), g);
}

#[test]
fn degree_stats_fraction() {
    let g = graph::path(4).unwrap();
    let d = g.degree_stats();
    assert_eq!((d.d_min, d.d_max), (1, 2));
    assert_eq!(d.d_avg_ratio(), (3, 2));
    assert_eq!(d.d_avg(), 1.5);
}

#[test]
fn oriented_edges_pair_up() {
    let g = graph::cycle(5).unwrap();
    for e in 0..g.num_edges() {
        let (a, b) = g.oriented_edge(2 * e);
        assert_eq!(g.oriented_edge(2 * e + 1), (b, a));
        assert_eq!(g.edges()[e], (a, b));
    }
}

// diamond: K4 without {0,3}; series-parallel reduction by hand
#[test]
fn diamond_kirchhoff() {
    let g = Graph::from_edges(4, &[(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)]).unwrap();
    assert!((effective_resistance(&g, 0, 3).unwrap() - 1.0).abs() < 1e-12);
    assert!((effective_resistance(&g, 1, 2).unwrap() - 0.5).abs() < 1e-12);
    assert!((effective_resistance(&g, 0, 1).unwrap() - 5.0 / 8.0).abs() < 1e-12);
    let k4 = graph::complete(4).unwrap();
    assert!((effective_resistance(&k4, 0, 3).unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn profile_matches_pseudo_inverse() {
    let graphs = [
        graph::cycle(9).unwrap(),
        graph::torus(3, 2).unwrap(),
        graph::bary_tree(2, 3).unwrap(),
        graph::random_regular(3, 12, 2).unwrap(),
        graph::hypercube(3).unwrap(),
    ];
    for g in &graphs {
        let oracle = pseudo_inverse_resistance(g);
        let prof = resistance_profile(g).unwrap();
        for x in 0..g.n() {
            for y in 0..g.n() {
                assert!((prof.get(x, y) - oracle[(x, y)]).abs() < 1e-10);
            }
        }
        let rbar_max = (0..g.n()).map(|y| oracle.column(y).sum() / g.n() as f64).fold(0.0, f64::max);
        assert!((prof.rbar_max - rbar_max).abs() < 1e-10);
    }
}

#[test]
fn cycle_resistance_closed_form() {
    let n = 11;
    let g = graph::cycle(n).unwrap();
    for k in 0..n {
        let want = (k * (n - k)) as f64 / n as f64;
        assert!((effective_resistance(&g, 0, k).unwrap() - want).abs() < 1e-12);
    }
}

#[test]
fn thomson_energy_is_resistance() {
    let g = graph::torus(4, 2).unwrap();
    for (x, y) in [(0, 5), (0, 10), (3, 12)] {
        let r = effective_resistance(&g, x, y).unwrap();
        let f = optimal_flow(&g, x, y).unwrap();
        assert!(f.unit_flow_defect(g.n()) < 1e-12);
        assert!((flow_energy(&f) - r).abs() < 1e-10);
        assert!(flow_energy(&shortest_path_flow(&g, x, y).unwrap()) >= r - 1e-12);
    }
}

#[test]
fn commute_identity_monte_carlo() {
    let g = graph::cycle(6).unwrap();
    let c = commute_time_check(&g, 0, 3, 20_000, 11).unwrap();
    assert!((c.exact - 18.0).abs() < 1e-10);
    assert!(c.z_score() < 3.0, "{c:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn resistance_is_a_metric(n in 4usize..10, seed in 0u64..1000) {
        let g = graph::random_regular(2 + (n % 2), n + n % 2, seed).unwrap();
        let prof = resistance_profile(&g).unwrap();
        let m = g.n();
        for x in 0..m {
            prop_assert!(prof.get(x, x).abs() < 1e-12);
            for y in 0..m {
                prop_assert!((prof.get(x, y) - prof.get(y, x)).abs() < 1e-10);
                for z in 0..m {
                    prop_assert!(prof.get(x, z) <= prof.get(x, y) + prof.get(y, z) + 1e-10);
                }
            }
        }
        // Foster: sum over edges of R = n - 1
        let foster: f64 = g.edges().iter().map(|&(a, b)| prof.get(a, b)).sum();
        prop_assert!((foster - (m - 1) as f64).abs() < 1e-9);
    }

    #[test]
    fn deleting_an_edge_never_lowers_resistance(seed in 0u64..500) {
        let g = graph::random_regular(3, 8, seed).unwrap();
        let (a, b) = g.edges()[seed as usize % g.num_edges()];
        if let Ok(h) = g.without_edge(a, b) {
            let before = resistance_profile(&g).unwrap();
            let after = resistance_profile(&h).unwrap();
            for i in 0..64 {
                prop_assert!(after.r[i] >= before.r[i] - 1e-10);
            }
        }
    }
}
