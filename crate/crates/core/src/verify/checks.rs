//! Exact inequality checks on single instances and the fitted-constant
//! records that accompany them.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::electrical::resistance_profile;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::sorted_symmetric_eigen;
use crate::rwstats::{self, WalkKind};
use crate::spectral::analysis::{logsob_constant_with, LogSobolevOptions, MIXING_CAP};
use crate::spectral::hitting::HITTING_MAX_VERTICES;
use crate::spectral::{
    cbsep_generator, dirichlet_form, entropy_decomposition, fa1f_generator, form_ratio_max, gcbsep_generator,
    mixing_times, restricted_gap_and_hitting, semigroup, spectral_gap, FormKind, SiteSpace,
    SparseGenerator, StateSpace,
};
use crate::dynamics::{compare_coupled, evolve_cbsep, evolve_gcbsep, projection_matches, replica_seed, GraphicalTimeline};
use crate::spectral::ParticleConfig;
use crate::stats;

use super::report::CheckRow;

pub type Snapshot = BTreeMap<String, f64>;

fn snap(snapshot: Option<&Snapshot>, name: &str, instance: &str) -> Option<f64> {
    snapshot.and_then(|s| s.get(&format!("{name}@{instance}")).copied())
}

/// Relative slack for quantities obtained by bisection.
const BISECTION_TOL: f64 = 1e-8;
/// Relative slack for exact inequalities between eigen-quantities.
const EXACT_TOL: f64 = 1e-9;

/// Spectral data of one CBSEP instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub n_states: usize,
    pub gap: f64,
    pub t_rel: f64,
    pub alpha_witness: f64,
    pub alpha_bracket: (f64, f64),
    pub t_mix: Option<f64>,
    pub t2: Option<f64>,
    pub mu_star: f64,
}

pub fn instance_summary(graph: &Graph, p: f64, seed: u64) -> Result<InstanceSummary> {
    let (gen, _) = cbsep_generator(graph, p)?;
    summarize_generator(&gen, seed)
}

/// Same summary for any reversible generator.
pub fn summarize_generator(gen: &SparseGenerator, seed: u64) -> Result<InstanceSummary> {
    let gap = spectral_gap(gen)?;
    let ls = logsob_constant_with(gen, &gap, LogSobolevOptions { seed, ..Default::default() })?;
    let mix = if gen.dim() <= MIXING_CAP { Some(mixing_times(gen)?) } else { None };
    Ok(InstanceSummary {
        n_states: gen.dim(),
        gap: gap.gap,
        t_rel: gap.t_rel(),
        alpha_witness: ls.witness,
        alpha_bracket: ls.bracket,
        t_mix: mix.map(|m| m.t_mix),
        t2: mix.map(|m| m.t2),
        mu_star: ls.mu_star,
    })
}

/// Rows for the spectral sandwiches, the mixing-time chain, and the
/// logsob/L2 comparison, shared by CBSEP and FA-1f.
fn sandwich_rows(prefix: &str, label: &str, s: &InstanceSummary) -> Vec<CheckRow> {
    let mut rows = Vec::new();
    let (lo, hi) = s.alpha_bracket;
    let mut r = CheckRow::new(&format!("{prefix}poincare-logsob-sandwich"), "poincare-logsob-sandwich", label)
        .tolerance(EXACT_TOL)
        .value("gap", s.gap)
        .value("alpha_witness", s.alpha_witness)
        .value("bracket_lo", lo)
        .value("bracket_hi", hi);
    r.pass = s.alpha_witness >= lo * (1.0 - EXACT_TOL) && s.alpha_witness <= hi * (1.0 + EXACT_TOL);
    rows.push(r);
    match (s.t_mix, s.t2) {
        (Some(t_mix), Some(t2)) => {
            rows.push(
                CheckRow::new(&format!("{prefix}tv-below-l2-mixing"), "tv-below-l2-mixing", label)
                    .tolerance(BISECTION_TOL)
                    .assert_le(t_mix, t2),
            );
            rows.push(
                CheckRow::new(&format!("{prefix}l2-mixing-above-half-logsob"), "logsob-l2-mixing-sandwich", label)
                    .tolerance(BISECTION_TOL)
                    .assert_le(0.5 / s.alpha_witness, t2),
            );
            let loglog = (1.0 / s.mu_star).ln().ln();
            rows.push(
                CheckRow::new(&format!("{prefix}l2-mixing-below-logsob-loglog"), "logsob-l2-mixing-sandwich", label)
                    .tolerance(BISECTION_TOL)
                    .value("loglog_inv_mu_star", loglog)
                    .assert_le(t2, (1.0 + 0.25 * loglog) / lo),
            );
        }
        _ => rows.push(CheckRow::skipped(
            &format!("{prefix}tv-below-l2-mixing"),
            "tv-below-l2-mixing",
            label,
            format!("{} states exceed the dense mixing cap {MIXING_CAP}", s.n_states),
        )),
    }
    rows
}

/// `mu(N = 1)` under the Bernoulli law conditioned on `Omega_+`.
pub fn single_particle_mass(n: usize, p: f64) -> f64 {
    let nf = n as f64;
    nf * p * (1.0 - p).powi(n as i32 - 1) / (1.0 - (1.0 - p).powi(n as i32))
}

/// Closed form of `D(1_{N=1})`: `2|E| mu(N=1) p / (n (2-p))`.
pub fn single_particle_dirichlet(graph: &Graph, p: f64) -> f64 {
    let n = graph.n() as f64;
    2.0 * graph.num_edges() as f64 * single_particle_mass(graph.n(), p) * p / (n * (2.0 - p))
}

/// Every exact check and fitted-constant record on one `(G, p)` instance.
pub fn instance_checks(graph: &Graph, label: &str, p: f64, seed: u64, snapshot: Option<&Snapshot>) -> Result<Vec<CheckRow>> {
    let n = graph.n();
    let (gen, space) = cbsep_generator(graph, p)?;
    let summary = summarize_generator(&gen, seed)?;
    let mut rows = sandwich_rows("", label, &summary);
    let mu = gen.measure();
    let degrees = graph.degree_stats();
    let d_avg = degrees.d_avg();
    let (d_min, d_max) = (degrees.d_min as f64, degrees.d_max as f64);
    let nf = n as f64;
    let profile = resistance_profile(graph)?;

    // flip form against the CBSEP form through electrical networks
    let (cb_form, _) = dirichlet_form(FormKind::Cbsep, graph, p)?;
    let (flip_form, _) = dirichlet_form(FormKind::SingleFlip, graph, p)?;
    let ratio = form_ratio_max(&flip_form, &cb_form)?;
    rows.push(
        CheckRow::new("flip-form-electrical-comparison", "flip-form-electrical-comparison", label)
            .tolerance(EXACT_TOL)
            .value("ratio", ratio)
            .value("rbar_max", profile.rbar_max)
            .assert_le(ratio, 4.0 * nf * profile.rbar_max),
    );

    // indicator of a single particle
    let ind: Vec<f64> = (0..space.len()).map(|i| if space.particle_count(i) == 1 { 1.0 } else { 0.0 }).collect();
    let d_ind = gen.dirichlet(&ind);
    let closed = single_particle_dirichlet(graph, p);
    rows.push(
        CheckRow::new("single-particle-indicator-dirichlet", "single-particle-indicator-witness", label)
            .tolerance(1e-10)
            .value("dirichlet", d_ind)
            .value("closed_form", closed)
            .assert_close(d_ind / closed, 1.0),
    );
    let mu1 = single_particle_mass(n, p);
    let var_ratio = mu.variance(&ind) / d_ind;
    let var_closed = (1.0 - mu1) * (2.0 - p) / (p * d_avg);
    rows.push(
        CheckRow::new("single-particle-indicator-relaxation", "single-particle-indicator-witness", label)
            .tolerance(EXACT_TOL)
            .value("closed_form", var_closed)
            .value("relative_deviation", (var_ratio / var_closed - 1.0).abs())
            .assert_le(var_ratio, summary.t_rel),
    );
    let ent_ratio = mu.entropy(&ind) / d_ind;
    let ent_closed = mu1.ln().abs() * (2.0 - p) / (p * d_avg);
    rows.push(
        CheckRow::new("single-particle-indicator-logsob", "single-particle-indicator-witness", label)
            .tolerance(EXACT_TOL)
            .value("closed_form", ent_closed)
            .value("relative_deviation", (ent_ratio / ent_closed - 1.0).abs())
            .assert_le(ent_ratio, 1.0 / summary.alpha_bracket.0),
    );

    // killed chain on {N >= 2}
    if (2..=HITTING_MAX_VERTICES).contains(&n) {
        let h = restricted_gap_and_hitting(graph, p)?;
        rows.push(
            CheckRow::new("killed-gap-vs-hitting-time", "killed-gap-vs-hitting-time", label)
                .tolerance(EXACT_TOL)
                .value("lambda0", h.lambda0)
                .assert_le(h.e_tau, 1.0 / h.lambda0),
        );
    }

    // entropy split along N for a few test functions
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let f: Vec<f64> = (0..space.len()).map(|_| rng.random_range(0.0..2.0)).collect();
        let split = entropy_decomposition(&space, mu, &f)?;
        let sq: Vec<f64> = f.iter().map(|x| x * x).collect();
        let ent = mu.entropy(&sq);
        worst = worst.max((split.total() - ent).abs() / ent.abs().max(1.0));
    }
    rows.push(
        CheckRow::new("entropy-particle-number-decomposition", "entropy-particle-number-decomposition", label)
            .tolerance(1e-12)
            .assert_close(worst, 0.0),
    );

    // FA-1f against CBSEP forms
    let (fa_form, _) = dirichlet_form(FormKind::Fa1f, graph, p)?;
    let fa_over_cb = form_ratio_max(&fa_form, &cb_form)?;
    let cb_over_fa = form_ratio_max(&cb_form, &fa_form)?;
    let c13 = fa_over_cb.max(cb_over_fa * p / d_max);
    rows.push(
        CheckRow::new("fa-cbsep-form-comparison", "fa-cbsep-form-comparison", label)
            .value("fa_over_cbsep", fa_over_cb)
            .value("cbsep_over_fa", cb_over_fa)
            .fitted(c13, snap(snapshot, "fa-cbsep-form-comparison", label)),
    );

    // conditional entropy at fixed N against the Dirichlet form
    let t_mix_rw = rwstats::lazy_mixing_time(graph, rwstats::DEFAULT_TV_THRESHOLD)? as f64;
    let predicted = d_avg * d_max * d_max / (d_min * d_min) * t_mix_rw * nf.ln().max(f64::MIN_POSITIVE);
    let sector = sector_entropy_constant(graph, p, &gen, &space)?;
    let mut row = CheckRow::new("sector-entropy-vs-dirichlet", "sector-entropy-vs-dirichlet", label)
        .value("c_lower", sector.lower)
        .value("c_upper", sector.upper)
        .value("predicted_scale", predicted)
        .fitted(sector.lower / predicted, snap(snapshot, "sector-entropy-vs-dirichlet", label));
    row.pass &= sector.lower <= sector.upper * (1.0 + EXACT_TOL);
    rows.push(row);

    // absolute constants of the main upper and lower bounds
    let alpha_inv = 1.0 / summary.alpha_witness;
    let upper_scale = predicted.max(profile.rbar_max * nf * p.ln().abs());
    rows.push(
        CheckRow::new("logsob-upper-constant", "logsob-upper-bound", label)
            .value("alpha_inv_lower", alpha_inv)
            .value("scale", upper_scale)
            .fitted(alpha_inv / upper_scale, snap(snapshot, "logsob-upper-constant", label)),
    );
    rows.push(
        CheckRow::new("relaxation-upper-constant", "relaxation-upper-bound", label)
            .value("t_rel", summary.t_rel)
            .value("scale", nf * profile.rbar_max)
            .fitted(summary.t_rel / (nf * profile.rbar_max), snap(snapshot, "relaxation-upper-constant", label)),
    );
    let alpha_inv_upper = 1.0 / summary.alpha_bracket.0;
    rows.push(
        CheckRow::new("logsob-lower-constant", "logsob-lower-bound", label)
            .value("alpha_inv_upper", alpha_inv_upper)
            .value("scale", nf / d_avg)
            .fitted((nf / d_avg) / alpha_inv_upper, snap(snapshot, "logsob-lower-constant", label)),
    );
    if p * nf <= 1.0 + 1e-12 && n <= rwstats::MEETING_EXACT_CAP {
        let t_meet = rwstats::meeting_time_exact(graph)?;
        rows.push(
            CheckRow::new("relaxation-meeting-lower-constant", "relaxation-meeting-lower-bound", label)
                .value("t_rel", summary.t_rel)
                .value("t_meet", t_meet)
                .fitted(t_meet / summary.t_rel, snap(snapshot, "relaxation-meeting-lower-constant", label)),
        );
    }
    Ok(rows)
}

/// Bounds on the best `C` in `mu(Ent(f^2 | N)) <= C D(f)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SectorConstant {
    /// Largest ratio found over sector eigenfunction perturbations.
    pub lower: f64,
    /// `max_k (2 + log C(n,k)) / gap_k^SEP * (2-p)/(1-p)`.
    pub upper: f64,
}

pub fn sector_entropy_constant(graph: &Graph, p: f64, gen: &SparseGenerator, space: &StateSpace) -> Result<SectorConstant> {
    let n = graph.n();
    let (sep, _) = dirichlet_form(FormKind::SepG, graph, p)?;
    let sep = sep.matrix().to_dense();
    let mu = gen.measure();
    let w = mu.weights();
    let mut lower: f64 = 0.0;
    let mut upper: f64 = 0.0;
    for k in 1..n {
        let keep: Vec<usize> = (0..space.len()).filter(|&i| space.particle_count(i) == k).collect();
        let m = keep.len();
        if m < 2 {
            continue;
        }
        let block = DMatrix::from_fn(m, m, |a, b| sep[(keep[a], keep[b])]);
        let block = (&block + block.transpose()) * 0.5;
        let (values, vectors) = sorted_symmetric_eigen(block);
        // the sector law is uniform with per-state mass w[keep[0]]
        let gap_k = values[1] / w[keep[0]];
        if gap_k <= 0.0 {
            return Err(Error::Domain(format!("exclusion sector {k} is not connected")));
        }
        upper = upper.max((2.0 + (m as f64).ln()) / gap_k * (2.0 - p) / (1.0 - p));
        let v = vectors.column(1);
        let vmax = v.amax().max(f64::MIN_POSITIVE);
        for eps in [0.5, 0.9] {
            let mut f = vec![1.0; space.len()];
            for (a, &i) in keep.iter().enumerate() {
                f[i] = 1.0 + eps * v[a] / vmax;
            }
            let split = entropy_decomposition(space, mu, &f)?;
            lower = lower.max(split.conditional / gen.dirichlet(&f));
        }
    }
    Ok(SectorConstant { lower, upper })
}

/// FA-1f: the TV/L2 chain and its logsob comparisons.
pub fn fa_chain_check(graph: &Graph, label: &str, p: f64, seed: u64, snapshot: Option<&Snapshot>) -> Result<Vec<CheckRow>> {
    let (gen, _) = fa1f_generator(graph, p)?;
    let fa = summarize_generator(&gen, seed)?;
    let mut rows = sandwich_rows("fa-", label, &fa);
    let nf = graph.n() as f64;
    if let Some(t2) = fa.t2 {
        let c = t2 / (nf.ln().max(f64::MIN_POSITIVE) / fa.alpha_witness);
        rows.push(
            CheckRow::new("fa-l2-vs-logsob-log-n", "fa-mixing-chain", label)
                .value("t2", t2)
                .fitted(c, snap(snapshot, "fa-l2-vs-logsob-log-n", label)),
        );
    }
    let cb = instance_summary(graph, p, seed)?;
    let c = (1.0 / fa.alpha_witness) / (nf * nf.ln().max(f64::MIN_POSITIVE) / cb.alpha_witness);
    rows.push(
        CheckRow::new("fa-logsob-vs-cbsep", "fa-mixing-chain", label)
            .value("fa_alpha_witness", fa.alpha_witness)
            .value("cbsep_alpha_witness", cb.alpha_witness)
            .fitted(c, snap(snapshot, "fa-logsob-vs-cbsep", label)),
    );
    Ok(rows)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Theorem3Record {
    pub t_mix: f64,
    pub t_mix_general: f64,
    pub cover_time: f64,
    /// `t_mix^g / (t_mix + T_cov / d_min)`.
    pub ratio: f64,
}

/// g-CBSEP mixing time against CBSEP at the same `p = rho(S1)`.
pub fn generalised_mixing_check(graph: &Graph, site: &SiteSpace, cover_samples: usize, seed: u64) -> Result<Theorem3Record> {
    let p = site.p();
    let (cb, _) = cbsep_generator(graph, p)?;
    let (g, _) = gcbsep_generator(graph, site)?;
    if g.dim() > MIXING_CAP {
        return Err(Error::Size { what: "g-CBSEP states for mixing", got: g.dim() as u64, cap: MIXING_CAP as u64 });
    }
    let t_mix = mixing_times(&cb)?.t_mix;
    let t_mix_general = mixing_times(&g)?.t_mix;
    let cover = rwstats::cover_time_quantile(graph, WalkKind::Discrete, cover_samples, seed)?.estimate;
    let d_min = graph.degree_stats().d_min as f64;
    Ok(Theorem3Record { t_mix, t_mix_general, cover_time: cover, ratio: t_mix_general / (t_mix + cover / d_min) })
}

pub fn generalised_mixing_rows(
    graph: &Graph,
    label: &str,
    site: &SiteSpace,
    cover_samples: usize,
    seed: u64,
    snapshot: Option<&Snapshot>,
) -> Result<Vec<CheckRow>> {
    let rec = match generalised_mixing_check(graph, site, cover_samples, seed) {
        Ok(r) => r,
        Err(Error::Size { got, cap, .. }) => {
            return Ok(vec![CheckRow::skipped(
                "generalised-mixing-lower-bound",
                "generalised-mixing-bounds",
                label,
                format!("{got} states exceed cap {cap}"),
            )])
        }
        Err(e) => return Err(e),
    };
    Ok(vec![
        CheckRow::new("generalised-mixing-lower-bound", "generalised-mixing-bounds", label)
            .tolerance(BISECTION_TOL)
            .assert_le(rec.t_mix, rec.t_mix_general),
        CheckRow::new("generalised-mixing-upper-ratio", "generalised-mixing-bounds", label)
            .value("t_mix", rec.t_mix)
            .value("t_mix_general", rec.t_mix_general)
            .value("cover_time", rec.cover_time)
            .fitted(rec.ratio, snap(snapshot, "generalised-mixing-upper-ratio", label)),
    ])
}

/// Largest entrywise gap between the g-CBSEP semigroup applied to
/// `nu^eta` and the mixture of `nu^{eta'}` under the CBSEP law at time `t`,
/// over every `eta` and every `t` in the grid.
pub fn projected_mixture_deviation(graph: &Graph, site: &SiteSpace, t_grid: &[f64]) -> Result<f64> {
    let p = site.p();
    let (cb, cb_space) = cbsep_generator(graph, p)?;
    let (g, g_space) = gcbsep_generator(graph, site)?;
    let nus: Vec<Vec<f64>> = cb_space.states().iter().map(|&eta| g_space.conditional_product(eta)).collect();
    let mut worst: f64 = 0.0;
    for (e, nu) in nus.iter().enumerate() {
        let mut delta = vec![0.0; cb.dim()];
        delta[e] = 1.0;
        for &t in t_grid {
            let lhs = semigroup(&g, t, nu)?;
            let weights = semigroup(&cb, t, &delta)?;
            for (i, &l) in lhs.iter().enumerate() {
                let rhs: f64 = weights.iter().zip(&nus).map(|(w, nu2)| w * nu2[i]).sum();
                worst = worst.max((l - rhs).abs());
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub stderr: f64,
    /// `(n, p, t_rel)` per size.
    pub table: Vec<(usize, f64, f64)>,
}

/// Least-squares slope of `log t_rel` against `log n`.
pub fn scaling_fit(graphs: &[Graph], p_of_n: impl Fn(usize) -> f64) -> Result<ScalingFit> {
    if graphs.len() < 4 {
        return Err(Error::Parameter(format!("scaling fit needs at least 4 sizes, got {}", graphs.len())));
    }
    let mut table = Vec::with_capacity(graphs.len());
    for g in graphs {
        let p = p_of_n(g.n());
        let (gen, _) = cbsep_generator(g, p)?;
        table.push((g.n(), p, spectral_gap(&gen)?.t_rel()));
    }
    let x: Vec<f64> = table.iter().map(|r| (r.0 as f64).ln()).collect();
    let y: Vec<f64> = table.iter().map(|r| r.2.ln()).collect();
    let fit = stats::least_squares(&x, &y)?;
    Ok(ScalingFit { exponent: fit.slope, stderr: fit.slope_stderr, table })
}

/// Totals over shared-timeline runs.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct CouplingSummary {
    pub runs: u64,
    pub events: u64,
    pub order_violations: u64,
    pub inclusion_violations: u64,
    pub csep_growth: u64,
    pub projection_mismatches: u64,
}

/// Random ordered pairs `lower <= upper` driven by one timeline per run:
/// CBSEP order, CSEP inclusion, and g-CBSEP projected against CBSEP.
pub fn coupling_summary(graph: &Graph, p: f64, site: &SiteSpace, runs: usize, horizon: f64, seed: u64) -> Result<CouplingSummary> {
    let n = graph.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = CouplingSummary::default();
    let particles: Vec<usize> = (0..site.size()).filter(|&s| site.is_particle(s)).collect();
    let holes: Vec<usize> = (0..site.size()).filter(|&s| !site.is_particle(s)).collect();
    for r in 0..runs {
        let mut lower = vec![false; n];
        while !lower.iter().any(|&b| b) {
            lower.iter_mut().for_each(|b| *b = rng.random_bool(0.3));
        }
        let upper: Vec<bool> = lower.iter().map(|&b| b || rng.random_bool(0.3)).collect();
        let (lower, upper) = (ParticleConfig::new(lower), ParticleConfig::new(upper));
        let tl = GraphicalTimeline::build(graph, p, horizon, replica_seed(seed, r as u64))?;
        let c = compare_coupled(graph, &lower, &upper, tl.events.iter().copied())?;
        out.runs += 1;
        out.events += c.events;
        out.order_violations += c.order_violations;
        out.inclusion_violations += c.inclusion_violations;
        out.csep_growth += c.csep_growth;
        let general: Vec<usize> = lower
            .occupancy()
            .iter()
            .map(|&b| {
                let pool = if b { &particles } else { &holes };
                pool[rng.random_range(0..pool.len())]
            })
            .collect();
        let a = evolve_cbsep(graph, &lower, tl.events.iter().copied())?;
        let b = evolve_gcbsep(graph, &general, site, replica_seed(!seed, r as u64), tl.events.iter().copied())?;
        out.projection_mismatches += u64::from(!projection_matches(&b, &a, site));
    }
    Ok(out)
}

pub fn coupling_rows(graph: &Graph, label: &str, p: f64, runs: usize, horizon: f64, seed: u64) -> Result<Vec<CheckRow>> {
    let site = SiteSpace::strip_example(p)?;
    let s = coupling_summary(graph, p, &site, runs, horizon, seed)?;
    let base = |name: &str| CheckRow::new(name, "graphical-construction-coupling", label).value("runs", s.runs as f64).value("events", s.events as f64);
    Ok(vec![
        base("coupling-order-preserved").assert_close(s.order_violations as f64, 0.0),
        base("csep-inclusion").assert_close(s.inclusion_violations as f64, 0.0),
        base("csep-count-nonincreasing").assert_close(s.csep_growth as f64, 0.0),
        base("generalised-projection-eventwise").assert_close(s.projection_mismatches as f64, 0.0),
    ])
}
