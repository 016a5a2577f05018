use cbsep_core::birthdeath::*;
use cbsep_core::graph::{self, Graph};
use cbsep_core::rwstats::*;
use cbsep_core::spectral::{Constraint, StateSpace};
use nalgebra::DMatrix;
use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, ToPrimitive, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn naive_lazy_mixing(g: &Graph, threshold: f64) -> u64 {
    let n = g.n();
    let two_e = 2.0 * g.num_edges() as f64;
    let pi: Vec<f64> = (0..n).map(|x| g.degree(x) as f64 / two_e).collect();
    let step = DMatrix::from_fn(n, n, |x, y| {
        let d = g.degree(x) as f64;
        0.5 * f64::from(u8::from(x == y)) + if g.has_edge(x, y) { 0.5 / d } else { 0.0 }
    });
    let mut cur: DMatrix<f64> = DMatrix::identity(n, n);
    for t in 0.. {
        let worst = (0..n)
            .map(|x| 0.5 * (0..n).map(|y| (cur[(x, y)] - pi[y]).abs()).sum::<f64>())
            .fold(0.0, f64::max);
        if worst <= threshold {
            return t;
        }
        cur = &cur * &step;
    }
    unreachable!()
}

#[test]
fn lazy_mixing_matches_direct_powers() {
    for g in [graph::cycle(9).unwrap(), graph::path(7).unwrap(), graph::hypercube(3).unwrap(), graph::complete(5).unwrap()] {
        assert_eq!(lazy_mixing_time(&g, 0.25).unwrap(), naive_lazy_mixing(&g, 0.25));
    }
    assert_eq!(lazy_mixing_time(&graph::complete(2).unwrap(), 0.25).unwrap(), 1);
}

#[test]
fn cycle_meeting_closed_form() {
    // distance walk with total rate 4: E_d = d(n-d)/4, averaged over d
    for n in [3usize, 6, 11] {
        let want = (n * n - 1) as f64 / 24.0;
        assert!((meeting_time_exact(&graph::cycle(n).unwrap()).unwrap() - want).abs() < 1e-9);
    }
}

#[test]
fn meeting_monte_carlo_agrees_with_exact() {
    let g = graph::cycle(6).unwrap();
    let exact = meeting_time_exact(&g).unwrap();
    let mc = meeting_time_mc(&g, 40_000, 8).unwrap();
    assert!((mc.value - exact).abs() < 3.0 * mc.stderr, "{mc:?} vs {exact}");
    let est = expected_meeting_time(&g, 100, 1).unwrap();
    assert_eq!(est.method, Method::Exact);
}

#[test]
fn two_vertex_cover_quantiles() {
    let g = graph::complete(2).unwrap();
    let disc = cover_time_quantile(&g, WalkKind::Discrete, 1000, 2).unwrap();
    assert_eq!(disc.estimate, 1.0);
    // continuous: Exp(1), so P(tau > t) = e^{-t} crosses 1/e at t = 1
    let cont = cover_time_quantile(&g, WalkKind::Continuous, 20_000, 3).unwrap();
    assert!(cont.band.0 <= 1.0 && 1.0 <= cont.band.1, "{:?}", cont.band);
    assert!((cont.estimate - 1.0).abs() < 0.05);
}

#[test]
fn cover_quantile_on_cycle() {
    let g = graph::cycle(6).unwrap();
    let c = cover_time_quantile(&g, WalkKind::Discrete, 2000, 4).unwrap();
    // expected cover time of the discrete cycle is n(n-1)/2 = 15
    assert!(c.estimate > 10.0 && c.estimate < 30.0);
    assert!(c.band.0 <= c.estimate && c.estimate <= c.band.1);
    for curve in &c.curves {
        assert!(curve.survival(c.estimate) <= (-1.0f64).exp() + 1e-12);
    }
}

#[test]
fn rejects_tiny_samples() {
    assert!(cover_time_quantile(&graph::cycle(4).unwrap(), WalkKind::Discrete, 10, 1).is_err());
    assert!(lazy_mixing_time(&graph::cycle(4).unwrap(), 1.5).is_err());
}

fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn binom(n: usize, k: usize) -> BigInt {
    (0..k).fold(BigInt::one(), |acc, i| acc * BigInt::from(n - i) / BigInt::from(i + 1))
}

/// Exact `gamma(1..=n)` for rational `p`.
fn gamma_exact(n: usize, p: &BigRational) -> Vec<BigRational> {
    let q = BigRational::one() - p;
    let raw: Vec<BigRational> = (1..=n)
        .map(|k| BigRational::from_integer(binom(n, k)) * num::pow(p.clone(), k) * num::pow(q.clone(), n - k))
        .collect();
    let z: BigRational = raw.iter().fold(BigRational::zero(), |a, b| a + b);
    raw.into_iter().map(|r| r / &z).collect()
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap()
}

/// `T log(1/T)` with `1 - T` supplied exactly.
fn t_log_inv(t: &BigRational, complement: &BigRational) -> f64 {
    let tf = to_f64(t);
    if tf < 0.5 {
        -tf * tf.ln()
    } else {
        -tf * (-to_f64(complement)).ln_1p()
    }
}

fn miclo_oracle(n: usize, pnum: i64, pden: i64) -> (f64, f64) {
    let p = rational(pnum, pden);
    let gamma = gamma_exact(n, &p);
    let g = |k: usize| &gamma[k - 1];
    let i = ((n as i64 * pnum + pden - 1) / pden).max(2) as usize;
    let tail_ge = |j: usize| (j..=n).fold(BigRational::zero(), |a, k| a + g(k));
    let tail_le = |j: usize| (1..=j).fold(BigRational::zero(), |a, k| a + g(k));
    let mut c_plus: f64 = 0.0;
    let mut acc = BigRational::zero();
    for j in i + 1..=n {
        acc += BigRational::one() / (g(j) * BigRational::from_integer(BigInt::from(j)));
        c_plus = c_plus.max(to_f64(&acc) * t_log_inv(&tail_ge(j), &tail_le(j - 1)));
    }
    let mut c_minus: f64 = 0.0;
    let mut acc = BigRational::zero();
    let odds = &p / (BigRational::one() - &p);
    for j in (1..i.min(n + 1)).rev() {
        let birth = BigRational::from_integer(BigInt::from(n - j)) * &odds;
        acc += BigRational::one() / (g(j) * birth);
        c_minus = c_minus.max(to_f64(&acc) * t_log_inv(&tail_le(j), &tail_ge(j + 1)));
    }
    (c_plus, c_minus)
}

#[test]
fn miclo_bound_matches_rational_oracle() {
    for &(n, pn, pd) in &[(100usize, 1i64, 50i64), (40, 1, 10), (60, 3, 10), (2, 1, 2)] {
        let (cp, cm) = miclo_oracle(n, pn, pd);
        let b = miclo_bound(n, pn as f64 / pd as f64).unwrap();
        assert!((b.c_plus - cp).abs() <= 1e-10 * cp.max(1e-300), "n={n}: {} vs {cp}", b.c_plus);
        assert!((b.c_minus - cm).abs() <= 1e-10 * cm.max(1e-300), "n={n}: {} vs {cm}", b.c_minus);
        assert_eq!(b.c_star, b.c_plus.max(b.c_minus));
    }
}

#[test]
fn two_site_lower_constant() {
    let b = miclo_bound(2, 0.5).unwrap();
    assert!((b.c_minus - 1.5f64.ln()).abs() < 1e-14);
}

#[test]
fn gamma_matches_rational_weights() {
    let gamma = gamma_exact(100, &rational(1, 50));
    let gm = GammaMeasure::new(100, 0.02).unwrap();
    for k in 1..=100 {
        let want = to_f64(&gamma[k - 1]);
        assert!((gm.weight(k) - want).abs() <= 1e-12 * want.max(1e-300));
    }
}

#[test]
fn ratio_identity_on_grid() {
    for n in [2usize, 10, 50, 100, 200, 400] {
        for p in [2.0 / n as f64, 0.05, 0.1, 0.2, 0.5] {
            if p >= 1.0 {
                continue;
            }
            let gm = GammaMeasure::new(n, p).unwrap();
            assert!(gm.ratio_identity_residual() < 1e-12);
        }
    }
}

#[test]
fn a_sequence_nondecreasing() {
    for n in [50usize, 100, 200, 400] {
        for p in [2.0 / n as f64, 0.05, 0.1, 0.2] {
            let a = log_a_sequence(&GammaMeasure::new(n, p).unwrap());
            assert!(a.windows(2).all(|w| w[1] >= w[0] - 1e-12), "n={n}, p={p}");
        }
    }
}

fn ratio(gm: &GammaMeasure, g: &[f64]) -> f64 {
    bd_entropy(gm, g).unwrap() / bd_dirichlet(gm, g).unwrap()
}

#[test]
fn two_site_search_matches_scan() {
    for p in [0.1, 0.5, 0.8] {
        let gm = GammaMeasure::new(2, p).unwrap();
        // the diagonal is 0/0 in floating point; skip a neighbourhood of it
        let scan = (1..200_000)
            .map(|i| i as f64 / 200_000.0 * std::f64::consts::FRAC_PI_2)
            .filter(|th| (th - std::f64::consts::FRAC_PI_4).abs() > 1e-4)
            .map(|th| ratio(&gm, &[th.cos(), th.sin()]))
            .fold(0.0, f64::max);
        let best = bd_best_logsob(&gm, 4, 1).unwrap();
        assert!((best.witness - scan).abs() < 1e-6 * scan, "p={p}: {} vs {scan}", best.witness);
        assert!(best.witness >= best.two_point);
    }
}

#[test]
fn indicator_ratios_direct() {
    let gm = GammaMeasure::new(12, 0.15).unwrap();
    for j in 2..=12 {
        let g: Vec<f64> = (1..=12).map(|k| f64::from(u8::from(k >= j))).collect();
        assert!((gm.indicator_ratio_ge(j) - ratio(&gm, &g)).abs() < 1e-10 * ratio(&gm, &g));
    }
    for j in 1..12 {
        let g: Vec<f64> = (1..=12).map(|k| f64::from(u8::from(k <= j))).collect();
        assert!((gm.indicator_ratio_le(j) - ratio(&gm, &g)).abs() < 1e-10 * ratio(&gm, &g));
    }
}

#[test]
fn flip_gradient_display_holds() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..30 {
        let n = rng.random_range(2..=8);
        let p = rng.random_range(0.05..0.5);
        let space = StateSpace::enumerate(n, Constraint::OmegaPlus).unwrap();
        let f: Vec<f64> = (0..space.len()).map(|_| rng.random_range(0.0..2.0)).collect();
        let c = flip_gradient_check(&space, p, &f).unwrap();
        assert!(c.worst_excess <= 1e-12, "{c:?}");
        assert!(c.summation_residual < 1e-10, "{c:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ratio_is_scale_invariant(seed in 0u64..10_000, scale in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gm = GammaMeasure::new(8, 0.3).unwrap();
        let g: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..1.0)).collect();
        let scaled: Vec<f64> = g.iter().map(|x| x * scale).collect();
        let (a, b) = (ratio(&gm, &g), ratio(&gm, &scaled));
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-12));
    }

    #[test]
    fn constant_has_zero_entropy(c in 0.1f64..10.0, n in 2usize..30) {
        let gm = GammaMeasure::new(n, 0.2).unwrap();
        let g = vec![c; n];
        prop_assert!(bd_entropy(&gm, &g).unwrap().abs() < 1e-12 * c * c);
        prop_assert_eq!(bd_dirichlet(&gm, &g).unwrap(), 0.0);
    }

    #[test]
    fn c_star_nonnegative(n in 2usize..200, p in 0.01f64..0.6) {
        let b = miclo_bound(n, p).unwrap();
        prop_assert!(b.c_star >= 0.0 && b.c_star.is_finite());
    }
}
