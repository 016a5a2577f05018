use cbsep_core::graph::{self, Graph};
use cbsep_core::spectral::analysis::{
    mixing_times_uniformization, rayleigh_quotient, EigenMethod, SpectralDecomposition,
};
use cbsep_core::spectral::entropy::sector_statistics;
use cbsep_core::spectral::forms::kernel_dimension;
use cbsep_core::spectral::*;
use cbsep_core::verify::checks::{single_particle_dirichlet, single_particle_mass};
use cbsep_core::linalg::{lanczos_smallest, LanczosOptions};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXACT: f64 = 1e-10;

fn random_connected(n: usize, rng: &mut ChaCha8Rng) -> Graph {
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.random_range(0..v), v)).collect();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(0.25) && !edges.contains(&(a, b)) {
                edges.push((a, b));
            }
        }
    }
    Graph::from_edges(n, &edges).unwrap()
}

fn random_instances(count: usize, max_n: usize, seed: u64) -> Vec<(Graph, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(2..=max_n);
            (random_connected(n, &mut rng), rng.random_range(0.05..0.6))
        })
        .collect()
}

/// Two-site law `pi_e(. | E_e)` indexed by `(w_a, w_b)`.
fn edge_law(p: f64) -> [[f64; 2]; 2] {
    let z = 1.0 - (1.0 - p) * (1.0 - p);
    [[0.0, (1.0 - p) * p / z], [p * (1.0 - p) / z, p * p / z]]
}

fn cbsep_rates_oracle(g: &Graph, p: f64) -> DMatrix<f64> {
    let n = g.n();
    let dim = 1usize << n;
    let law = edge_law(p);
    let mut q = DMatrix::zeros(dim, dim);
    for m in 1..dim {
        for &(a, b) in g.edges() {
            let (wa, wb) = (m >> a & 1, m >> b & 1);
            if wa + wb == 0 {
                continue;
            }
            for (xa, row) in law.iter().enumerate() {
                for (xb, &pr) in row.iter().enumerate() {
                    let t = (m & !(1 << a) & !(1 << b)) | xa << a | xb << b;
                    if t != m {
                        q[(m, t)] += pr;
                    }
                }
            }
        }
    }
    q
}

#[test]
fn generators_are_reversible_conservative_irreducible() {
    for (g, p) in random_instances(20, 8, 3) {
        for (gen, _) in [cbsep_generator(&g, p).unwrap(), fa1f_generator(&g, p).unwrap()] {
            assert!(gen.detailed_balance_residual() < EXACT);
            assert!(gen.row_sum_residual() < EXACT);
            assert!(gen.is_irreducible());
        }
    }
    for (g, p) in random_instances(20, 4, 4) {
        let site = SiteSpace::strip_example(p).unwrap();
        let (gen, _) = gcbsep_generator(&g, &site).unwrap();
        assert!(gen.detailed_balance_residual() < EXACT);
        assert!(gen.row_sum_residual() < EXACT);
        assert!(gen.is_irreducible());
    }
}

#[test]
fn cbsep_rates_match_resampling_definition() {
    for (g, p) in random_instances(10, 6, 5) {
        let (gen, space) = cbsep_generator(&g, p).unwrap();
        let oracle = cbsep_rates_oracle(&g, p);
        for i in 0..space.len() {
            for j in 0..space.len() {
                if i != j {
                    let (mi, mj) = (space.state(i) as usize, space.state(j) as usize);
                    assert!((gen.rate(i, j) - oracle[(mi, mj)]).abs() < 1e-14);
                }
            }
        }
    }
}

#[test]
fn fa1f_rates_match_constraint() {
    let g = graph::path(3).unwrap();
    let p = 0.2;
    let (gen, space) = fa1f_generator(&g, p).unwrap();
    let i = space.index_of(0b001).unwrap();
    // site 1 sees the particle at 0; site 2 does not
    assert!((gen.rate(i, space.index_of(0b011).unwrap()) - p).abs() < 1e-15);
    assert!(space.index_of(0b101).map_or(true, |j| gen.rate(i, j) == 0.0));
    assert!((gen.exit_rate(i) - p).abs() < 1e-15);
}

#[test]
fn gcbsep_lumps_onto_cbsep() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for n in 2..=4 {
        let g = random_connected(n, &mut rng);
        let raw: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let sites = [
            SiteSpace::strip_example(0.3).unwrap(),
            SiteSpace::new(raw.iter().map(|r| r / total).collect(), vec![true, false, true]).unwrap(),
        ];
        for site in sites {
            let (general, gspace) = gcbsep_generator(&g, &site).unwrap();
            let (cbsep, cspace) = cbsep_generator(&g, site.p()).unwrap();
            assert!(lumping_deviation(&general, &gspace, &cbsep, &cspace) < EXACT);
            // and directly: lumped rates from one representative per class
            let mut seen = vec![false; cspace.len()];
            for i in 0..gspace.len() {
                let eta = cspace.index_of(gspace.projection(i)).unwrap();
                if seen[eta] {
                    continue;
                }
                seen[eta] = true;
                let mut lumped = vec![0.0; cspace.len()];
                for j in 0..gspace.len() {
                    let k = cspace.index_of(gspace.projection(j)).unwrap();
                    if k != eta {
                        lumped[k] += general.rate(i, j);
                    }
                }
                for k in 0..cspace.len() {
                    if k != eta {
                        assert!((lumped[k] - cbsep.rate(eta, k)).abs() < EXACT);
                    }
                }
            }
        }
    }
}

#[test]
fn binary_site_space_reproduces_cbsep() {
    let g = graph::cycle(4).unwrap();
    let (general, gspace) = gcbsep_generator(&g, &SiteSpace::binary(0.35).unwrap()).unwrap();
    let (cbsep, cspace) = cbsep_generator(&g, 0.35).unwrap();
    assert_eq!(gspace.len(), cspace.len());
    let a = spectral_gap(&general).unwrap().gap;
    let b = spectral_gap(&cbsep).unwrap().gap;
    assert!((a - b).abs() < 1e-10);
}

#[test]
fn single_edge_gap_is_one() {
    for p in [0.05, 0.3, 0.5, 0.9] {
        let (gen, _) = cbsep_generator(&graph::path(2).unwrap(), p).unwrap();
        assert!((spectral_gap(&gen).unwrap().gap - 1.0).abs() < 1e-12);
    }
}

#[test]
fn lanczos_agrees_with_dense() {
    let g = graph::cycle(8).unwrap();
    let (gen, _) = cbsep_generator(&g, 0.2).unwrap();
    let dense = spectral_gap(&gen).unwrap();
    assert_eq!(dense.method, EigenMethod::Dense);
    let dec = SpectralDecomposition::new(&gen).unwrap();
    assert!((dense.gap - dec.values[1]).abs() < 1e-10);
    let a = gen.symmetrized();
    let sq: Vec<f64> = gen.measure().weights().iter().map(|w| w.sqrt()).collect();
    let pair = lanczos_smallest(|x, y| a.mul_vec_into(x, y), gen.dim(), &[sq], LanczosOptions::default()).unwrap();
    assert!((pair.value - dense.gap).abs() < 1e-8 * dense.gap);
}

#[test]
fn eigenfunction_attains_gap() {
    let (gen, _) = cbsep_generator(&graph::torus(3, 2).unwrap(), 0.25).unwrap();
    let gap = spectral_gap(&gen).unwrap();
    let r = rayleigh_quotient(&gen, &gap.eigenfunction).unwrap();
    assert!((r - gap.gap).abs() < 1e-8 * gap.gap);
    assert!(gen.measure().expect(&gap.eigenfunction).abs() < 1e-8);
}

#[test]
fn semigroup_matches_matrix_exponential() {
    for (g, p) in random_instances(5, 5, 12) {
        let (gen, _) = cbsep_generator(&g, p).unwrap();
        let q = gen.rates().to_dense();
        let dim = gen.dim();
        let mut init = vec![0.0; dim];
        init[dim - 1] = 1.0;
        for t in [0.0, 0.4, 2.0, 7.5] {
            let oracle = (q.clone() * t).exp();
            let law = semigroup(&gen, t, &init).unwrap();
            for j in 0..dim {
                assert!((law[j] - oracle[(dim - 1, j)]).abs() < EXACT, "t = {t}");
            }
        }
        let far = semigroup(&gen, 400.0, &init).unwrap();
        assert!(gen.measure().tv_distance(&far) < 1e-9);
    }
}

#[test]
fn mixing_routes_agree() {
    let (gen, _) = cbsep_generator(&graph::cycle(4).unwrap(), 0.3).unwrap();
    let a = mixing_times(&gen).unwrap();
    let b = mixing_times_uniformization(&gen).unwrap();
    assert!((a.t_mix - b.t_mix).abs() < 1e-6 * a.t_mix);
    assert!((a.t2 - b.t2).abs() < 1e-6 * a.t2);
    assert!(a.t_mix <= a.t2);
}

#[test]
fn entropy_decomposition_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for (g, p) in random_instances(20, 8, 22) {
        let space = StateSpace::enumerate(g.n(), Constraint::OmegaPlus).unwrap();
        let mu = space.bernoulli_measure(p);
        let f: Vec<f64> = (0..space.len()).map(|_| rng.random_range(0.0..3.0)).collect();
        let split = entropy_decomposition(&space, &mu, &f).unwrap();
        let f2: Vec<f64> = f.iter().map(|x| x * x).collect();
        let total = mu.entropy(&f2);
        assert!((split.total() - total).abs() < 1e-12 * total.max(1.0));
        assert!(split.conditional >= -1e-15 && split.projected >= -1e-15);
        let sectors = sector_statistics(&space, &mu, &f).unwrap();
        assert_eq!(sectors[0].0, 0.0);
        assert!((sectors.iter().map(|s| s.0).sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn forms_agree_with_generators() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    for (g, p) in random_instances(8, 6, 31) {
        let (cb, _) = cbsep_generator(&g, p).unwrap();
        let (fa, _) = fa1f_generator(&g, p).unwrap();
        let (cb_form, space) = dirichlet_form(FormKind::Cbsep, &g, p).unwrap();
        let (fa_form, _) = dirichlet_form(FormKind::Fa1f, &g, p).unwrap();
        for _ in 0..5 {
            let f: Vec<f64> = (0..space.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (a, b) = (cb_form.eval(&f).unwrap(), cb.dirichlet(&f));
            assert!((a - b).abs() < 1e-12 * b.max(1.0));
            // FA-1f resampling at rate one weighs each flip by p(1-p)
            let (c, d) = (fa_form.eval(&f).unwrap(), fa.dirichlet(&f));
            assert!((c - d).abs() < 1e-12 * d.max(1.0));
        }
        assert_eq!(kernel_dimension(&cb_form, 1e-10), 1);
    }
}

#[test]
fn form_comparison_is_finite_on_connected_graphs() {
    let g = graph::cycle(5).unwrap();
    let (fa, _) = dirichlet_form(FormKind::Fa1f, &g, 0.2).unwrap();
    let (cb, _) = dirichlet_form(FormKind::Cbsep, &g, 0.2).unwrap();
    let r = form_ratio_max(&fa, &cb).unwrap();
    assert!(r.is_finite() && r > 0.0);
    // ratio of a form with itself
    assert!((form_ratio_max(&cb, &cb).unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn single_particle_witness_closed_form() {
    for (g, p) in random_instances(10, 8, 40) {
        let (gen, space) = cbsep_generator(&g, p).unwrap();
        let ind: Vec<f64> = (0..space.len()).map(|i| f64::from(u8::from(space.particle_count(i) == 1))).collect();
        assert!((gen.dirichlet(&ind) - single_particle_dirichlet(&g, p)).abs() < 1e-12);
        assert!((gen.measure().expect(&ind) - single_particle_mass(g.n(), p)).abs() < 1e-12);
    }
}

#[test]
fn killed_chain_on_two_sites() {
    let p = 0.4;
    let h = restricted_gap_and_hitting(&graph::path(2).unwrap(), p).unwrap();
    let exit = 2.0 * (1.0 - p) / (2.0 - p);
    assert!((h.lambda0 - exit).abs() < 1e-12);
    assert!((h.e_tau - 1.0 / exit).abs() < 1e-12);
    assert!((h.e_tau_two - 1.0 / exit).abs() < 1e-12);
}

#[test]
fn killed_gap_dominates_mean_hitting() {
    for (g, p) in random_instances(10, 8, 50) {
        let h = restricted_gap_and_hitting(&g, p).unwrap();
        assert!(1.0 / h.lambda0 >= h.e_tau * (1.0 - 1e-10));
        assert!(h.mu_at_least_two > 0.0 && h.mu_two_given_at_least_two <= 1.0);
    }
}

#[test]
fn logsob_within_its_bracket() {
    let (gen, _) = cbsep_generator(&graph::cycle(4).unwrap(), 0.3).unwrap();
    let ls = logsob_constant(&gen).unwrap();
    assert!(ls.within_bracket(1e-9));
    assert!(ls.witness <= ls.linearized * (1.0 + 1e-12));
}

#[test]
fn state_space_sizes() {
    let s = StateSpace::enumerate(6, Constraint::OmegaPlus).unwrap();
    assert_eq!(s.len(), 63);
    let gs = GeneralSpace::enumerate(3, SiteSpace::strip_example(0.5).unwrap()).unwrap();
    assert_eq!(gs.len(), 27 - 8);
    for i in 0..gs.len() {
        assert_eq!(gs.index_of(&gs.config(i)), Some(i));
    }
    let m = gs.product_measure();
    assert!((m.weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
}
