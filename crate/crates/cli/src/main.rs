//! `cbsep-lab`: spectral quantities, simulations and verification sweeps for
//! CBSEP, g-CBSEP and FA-1f on finite graphs.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::json;

use cbsep_core::birthdeath::{bd_best_logsob, miclo_bound, GammaMeasure};
use cbsep_core::dynamics::{
    hitting_time_n1, replica_seed, sigma_cov_estimate, BinaryDynamics, EventStream, GeneralDynamics,
};
use cbsep_core::electrical::{effective_resistance, resistance_profile};
use cbsep_core::rwstats::{self, WalkKind};
use cbsep_core::spectral::{fa1f_generator, ParticleConfig, SiteSpace};
use cbsep_core::verify::{self, ExperimentConfig, VerificationReport};
use cbsep_core::{Family, Graph};

#[derive(Parser)]
#[command(name = "cbsep-lab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpectralModel {
    Cbsep,
    Fa1f,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimModel {
    Cbsep,
    Gcbsep,
    Csep,
}

#[derive(Clone, Copy, ValueEnum)]
enum What {
    Tmix,
    Tmeet,
    Tcov,
}

#[derive(Clone, Copy, ValueEnum)]
enum Walk {
    Discrete,
    Continuous,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured inequality suite; exit code 1 on any failure.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Fit the exponent of the relaxation time over the configured sizes.
    Scaling {
        #[arg(long)]
        config: PathBuf,
    },
    /// Exact gap, log-Sobolev witness and mixing times of one instance.
    Spectral {
        #[arg(long)]
        graph: Family,
        #[arg(long)]
        p: f64,
        #[arg(long, value_enum, default_value = "cbsep")]
        model: SpectralModel,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Graphical-construction runs from the full configuration; CSV rows
    /// `replica,observable,value`.
    Simulate {
        #[arg(long, value_enum)]
        model: SimModel,
        #[arg(long)]
        graph: Family,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        horizon: f64,
        #[arg(long, default_value_t = 1)]
        replicas: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Number of equally spaced checkpoints for `N(t)`.
        #[arg(long, default_value_t = 10)]
        checkpoints: usize,
        /// Also estimate the embedded walk's cover time (CBSEP only).
        #[arg(long)]
        cover: bool,
    },
    /// Effective resistances: one pair, all pairs, or the profile `Rbar_y`.
    Resistance {
        #[arg(long)]
        graph: Family,
        #[arg(long, requires = "y")]
        x: Option<usize>,
        #[arg(long, requires = "x")]
        y: Option<usize>,
        #[arg(long)]
        profile: bool,
    },
    /// Random-walk reference quantities as JSON.
    Rwstats {
        #[arg(long)]
        graph: Family,
        #[arg(long, value_enum)]
        what: What,
        #[arg(long, default_value_t = rwstats::DEFAULT_TV_THRESHOLD)]
        threshold: f64,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value = "discrete")]
        walk: Walk,
    },
    /// Birth-death log-Sobolev quantities of the conditioned binomial.
    Birthdeath {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 30)]
        restarts: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read_config(path: &PathBuf) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ExperimentConfig::from_json(&text)?)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn summarize_failures(report: &VerificationReport) {
    for row in report.rows.iter().filter(|r| !r.pass) {
        eprintln!("FAIL {} [{}] on {}: {:?}", row.name, row.anchor, row.instance, row.values);
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Verify { config, format } => {
            let cfg = read_config(&config)?;
            let report = verify::verify_suite(&cfg)?;
            let text = match format {
                Format::Json => report.to_json()? + "\n",
                Format::Csv => report.to_csv(),
            };
            emit(&cfg.out, &text)?;
            summarize_failures(&report);
            info!("{} rows, {} hard failures", report.rows.len(), report.hard_failures().len());
            Ok(report.all_pass())
        }
        Command::Scaling { config } => {
            let cfg = read_config(&config)?;
            let (fit, report) = verify::scaling_report(&cfg)?;
            let mut text = String::from("# n p t_rel\n");
            for (n, p, t) in &fit.table {
                writeln!(text, "{n} {p:e} {t:e}")?;
            }
            writeln!(text, "# exponent {:.6} stderr {:.6}", fit.exponent, fit.stderr)?;
            emit(&cfg.out, &text)?;
            summarize_failures(&report);
            Ok(report.all_pass())
        }
        Command::Spectral { graph, p, model, seed } => {
            let g = graph.build()?;
            let s = match model {
                SpectralModel::Cbsep => verify::instance_summary(&g, p, seed)?,
                SpectralModel::Fa1f => {
                    let (gen, _) = fa1f_generator(&g, p)?;
                    verify::checks::summarize_generator(&gen, seed)?
                }
            };
            let out = json!({
                "n_states": s.n_states,
                "gap": s.gap,
                "t_rel": s.t_rel,
                "alpha_witness": s.alpha_witness,
                "alpha_bracket": [s.alpha_bracket.0, s.alpha_bracket.1],
                "t_mix": s.t_mix,
                "T2": s.t2,
                "mu_star": s.mu_star,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(true)
        }
        Command::Simulate { model, graph, p, horizon, replicas, seed, checkpoints, cover } => {
            let g = graph.build()?;
            simulate(&g, model, p, horizon, replicas, seed, checkpoints, cover)?;
            Ok(true)
        }
        Command::Resistance { graph, x, y, profile } => {
            let g = graph.build()?;
            let mut text = String::new();
            if profile {
                let prof = resistance_profile(&g)?;
                text.push_str("y,Rbar\n");
                for (yy, r) in prof.rbar.iter().enumerate() {
                    writeln!(text, "{yy},{r:e}")?;
                }
            } else if let (Some(x), Some(y)) = (x, y) {
                text.push_str("x,y,R\n");
                writeln!(text, "{x},{y},{:e}", effective_resistance(&g, x, y)?)?;
            } else {
                let prof = resistance_profile(&g)?;
                text.push_str("x,y,R\n");
                for xx in 0..g.n() {
                    for yy in 0..g.n() {
                        writeln!(text, "{xx},{yy},{:e}", prof.get(xx, yy))?;
                    }
                }
            }
            print!("{text}");
            Ok(true)
        }
        Command::Rwstats { graph, what, threshold, samples, seed, walk } => {
            let g = graph.build()?;
            let out = match what {
                What::Tmix => {
                    json!({"value": rwstats::lazy_mixing_time(&g, threshold)?, "method": "exact", "stderr": 0.0})
                }
                What::Tmeet => {
                    let e = rwstats::expected_meeting_time(&g, samples, seed)?;
                    json!({"value": e.value, "method": e.method, "stderr": e.stderr})
                }
                What::Tcov => {
                    let kind = match walk {
                        Walk::Discrete => WalkKind::Discrete,
                        Walk::Continuous => WalkKind::Continuous,
                    };
                    let c = rwstats::cover_time_quantile(&g, kind, samples, seed)?;
                    json!({"value": c.estimate, "method": "mc", "band": [c.band.0, c.band.1],
                           "stderr": (c.band.1 - c.band.0) / (2.0 * 1.96)})
                }
            };
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(true)
        }
        Command::Birthdeath { n, p, restarts, seed } => {
            let bound = miclo_bound(n, p)?;
            let gm = GammaMeasure::new(n, p)?;
            let best = bd_best_logsob(&gm, restarts, seed)?;
            let out = json!({
                "C_plus": bound.c_plus,
                "C_minus": bound.c_minus,
                "C_star": bound.c_star,
                "best_witness": best.witness,
                "two_point": best.two_point,
                "stagnated": best.stagnated,
                "ratio_to_log_inv_p": best.witness / (1.0 / p).ln(),
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(true)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    g: &Graph,
    model: SimModel,
    p: f64,
    horizon: f64,
    replicas: usize,
    seed: u64,
    checkpoints: usize,
    cover: bool,
) -> Result<()> {
    if !(horizon > 0.0) {
        bail!("horizon must be positive");
    }
    let n = g.n();
    let full = ParticleConfig::full(n);
    let grid: Vec<f64> = (0..=checkpoints).map(|k| horizon * k as f64 / checkpoints.max(1) as f64).collect();
    let mut out = String::from("replica,observable,value\n");
    for r in 0..replicas {
        let s = replica_seed(seed, r as u64);
        let mut next = 0;
        let mut record = |t: f64, count: usize, out: &mut String| {
            while next < grid.len() && grid[next] < t {
                let _ = writeln!(out, "{r},N@{},{count}", grid[next]);
                next += 1;
            }
        };
        match model {
            SimModel::Cbsep | SimModel::Csep => {
                let mut d = match model {
                    SimModel::Csep => BinaryDynamics::csep(&full)?,
                    _ => BinaryDynamics::cbsep(&full)?,
                };
                for ev in EventStream::new(g, p, horizon, s)? {
                    record(ev.time, d.count(), &mut out);
                    d.apply(g, &ev);
                }
                record(f64::INFINITY, d.count(), &mut out);
            }
            SimModel::Gcbsep => {
                let site = SiteSpace::strip_example(p)?;
                let start = vec![1; n];
                let mut d = GeneralDynamics::new(g, &start, &site, replica_seed(!seed, r as u64))?;
                let count = |d: &GeneralDynamics| d.projection().iter().filter(|&&b| b).count();
                for ev in EventStream::new(g, p, horizon, s)? {
                    record(ev.time, count(&d), &mut out);
                    d.apply(g, &ev);
                }
                record(f64::INFINITY, count(&d), &mut out);
            }
        }
        if !matches!(model, SimModel::Gcbsep) {
            let h = hitting_time_n1(g, &full, horizon, EventStream::new(g, p, horizon, s)?)?;
            let name = if h.censored { "hitting_time_n1_censored" } else { "hitting_time_n1" };
            writeln!(out, "{r},{name},{}", h.time)?;
        }
    }
    if cover {
        let c = sigma_cov_estimate(g, p, replicas.max(1), horizon, seed)?;
        for curve in &c.curves {
            for (k, t) in curve.sorted_times.iter().enumerate() {
                writeln!(out, "{k},cover_time_from_{},{t}", curve.start)?;
            }
        }
    }
    print!("{out}");
    Ok(())
}
