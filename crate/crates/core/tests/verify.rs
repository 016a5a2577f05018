use std::collections::BTreeMap;

use cbsep_core::graph::{self, Family};
use cbsep_core::verify::*;

fn config(json: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(json).unwrap()
}

#[test]
fn p_rules() {
    assert_eq!(PRule::Constant { p: 0.2 }.values(5).unwrap(), vec![0.2]);
    assert_eq!(PRule::OverN { c: 1.0 }.values(4).unwrap(), vec![0.25]);
    let set = PRule::Set { values: vec![0.1, 0.5], over_n: Some(2.0) };
    assert_eq!(set.values(4).unwrap(), vec![0.1, 0.5]);
    assert_eq!(set.values(8).unwrap(), vec![0.1, 0.5, 0.25]);
    assert!(PRule::OverN { c: 1.0 }.values(1).is_err());
}

#[test]
fn config_parsing_and_defaults() {
    let c = config(r#"{"family":"torus:2","sizes":[3],"p_rule":{"kind":"constant","p":0.3},"model":"cbsep"}"#);
    assert_eq!(c.seeds, vec![1]);
    assert_eq!(c.replicas, 1000);
    assert_eq!(c.family_at(3).unwrap(), Family::Torus { side: 3, dim: 2 });
    assert_eq!(c.graph_at(3).unwrap(), graph::torus(3, 2).unwrap());
    let t = config(r#"{"family":"tree:2","sizes":[2],"p_rule":{"kind":"over_n","c":1},"model":"fa1f"}"#);
    assert_eq!(t.graph_at(2).unwrap().n(), 7);
    for bad in [
        r#"{"family":"moebius","sizes":[3],"p_rule":{"kind":"constant","p":0.3},"model":"cbsep"}"#,
        r#"{"family":"cycle","sizes":[],"p_rule":{"kind":"constant","p":0.3},"model":"cbsep"}"#,
        r#"{"family":"cycle","sizes":[4],"p_rule":{"kind":"constant","p":1.3},"model":"cbsep"}"#,
        r#"{"family":"torus:x","sizes":[4],"p_rule":{"kind":"constant","p":0.3},"model":"cbsep"}"#,
    ] {
        assert!(ExperimentConfig::from_json(bad).is_err(), "{bad}");
    }
}

#[test]
fn fitted_rows_respect_snapshot() {
    assert!(CheckRow::new("c", "a", "i").fitted(1.9, Some(1.0)).pass);
    assert!(!CheckRow::new("c", "a", "i").fitted(2.1, Some(1.0)).pass);
    assert!(CheckRow::new("c", "a", "i").fitted(50.0, None).pass);
    assert!(!CheckRow::new("c", "a", "i").fitted(f64::NAN, None).pass);
    assert!(!CheckRow::new("c", "a", "i").fitted(1.0, None).hard);
}

#[test]
fn hard_rows() {
    assert!(CheckRow::new("c", "a", "i").assert_le(1.0, 1.0).pass);
    assert!(!CheckRow::new("c", "a", "i").assert_le(1.1, 1.0).pass);
    assert!(CheckRow::new("c", "a", "i").tolerance(0.2).assert_le(1.1, 1.0).pass);
    assert!(!CheckRow::new("c", "a", "i").assert_le(f64::NAN, 1.0).pass);
    assert!(CheckRow::new("c", "a", "i").tolerance(1e-3).assert_close(1.0, 1.0005).pass);
}

#[test]
fn report_renderings() {
    let mut r = VerificationReport::default();
    r.push(CheckRow::new("x", "anchor", "cycle n=3, p=0.1").value("lhs", 1.0).assert_le(1.0, 2.0));
    r.push(CheckRow::new("y", "anchor", "i").fitted(3.0, None));
    r.push(CheckRow::new("y", "anchor", "i").fitted(4.0, None));
    let csv = r.to_csv();
    assert!(csv.starts_with("name,anchor,instance,hard,pass,fitted,tolerance,values\n"));
    assert!(csv.contains("\"cycle n=3, p=0.1\""));
    assert_eq!(csv.lines().count(), 4);
    let back: VerificationReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
    assert_eq!(back, r);
    assert_eq!(r.fitted_constants().get("y@i"), Some(&4.0));
    assert!(r.all_pass() && r.hard_failures().is_empty());
}

#[test]
fn cbsep_suite_on_small_cycles() {
    let c = config(
        r#"{"family":"cycle","sizes":[3,4,5],"p_rule":{"kind":"set","values":[0.1,0.5],"over_n":1.0},"model":"cbsep"}"#,
    );
    let report = verify_suite(&c).unwrap();
    assert!(report.hard_failures().is_empty(), "{:?}", report.hard_failures());
    assert!(report.all_pass());
    let names: std::collections::BTreeSet<&str> = report.rows.iter().map(|r| r.anchor.as_str()).collect();
    for anchor in [
        "poincare-logsob-sandwich",
        "logsob-l2-mixing-sandwich",
        "tv-below-l2-mixing",
        "flip-form-electrical-comparison",
        "single-particle-indicator-witness",
        "killed-gap-vs-hitting-time",
        "entropy-particle-number-decomposition",
    ] {
        assert!(names.contains(anchor), "missing {anchor}: {names:?}");
    }
    // rerunning against its own snapshot passes
    let mut again = c.clone();
    again.snapshot = Some(report.fitted_constants());
    assert!(verify_suite(&again).unwrap().all_pass());
    // a snapshot at a quarter of the fitted values trips the factor-two rule
    let shrunk: BTreeMap<String, f64> = report.fitted_constants().into_iter().map(|(k, v)| (k, v / 4.0)).collect();
    let mut strict = c;
    strict.snapshot = Some(shrunk);
    let r = verify_suite(&strict).unwrap();
    assert!(!r.all_pass() && r.hard_failures().is_empty());
}

#[test]
fn other_models_pass() {
    for json in [
        r#"{"family":"path","sizes":[3,4],"p_rule":{"kind":"constant","p":0.3},"model":"fa1f"}"#,
        r#"{"family":"path","sizes":[2,3],"p_rule":{"kind":"constant","p":0.3},"model":"gcbsep"}"#,
        r#"{"family":"cycle","sizes":[5],"p_rule":{"kind":"constant","p":0.3},"model":"csep","replicas":200,"seeds":[1,2]}"#,
    ] {
        let r = verify_suite(&config(json)).unwrap();
        assert!(!r.rows.is_empty());
        assert!(r.all_pass(), "{json}: {:?}", r.rows.iter().filter(|r| !r.pass).collect::<Vec<_>>());
    }
}

#[test]
fn oversized_instances_are_skipped() {
    let r = verify_suite(&config(
        r#"{"family":"cycle","sizes":[8],"p_rule":{"kind":"constant","p":0.3},"model":"gcbsep"}"#,
    ))
    .unwrap();
    assert!(r.rows.iter().any(|row| row.note.as_deref().is_some_and(|n| n.starts_with("skipped"))));
    assert!(r.hard_failures().is_empty());
}

#[test]
fn scaling_needs_four_sizes() {
    let c = config(r#"{"family":"cycle","sizes":[4,5,6],"p_rule":{"kind":"over_n","c":1.0},"model":"cbsep"}"#);
    assert!(scaling_report(&c).is_err());
    let c = config(r#"{"family":"cycle","sizes":[4,5,6,7],"p_rule":{"kind":"set","values":[0.1]},"model":"cbsep"}"#);
    assert!(scaling_report(&c).is_err());
    let c = config(r#"{"family":"cycle","sizes":[4,5,6,7],"p_rule":{"kind":"over_n","c":1.0},"model":"cbsep"}"#);
    let (fit, report) = scaling_report(&c).unwrap();
    assert_eq!(fit.table.len(), 4);
    assert!(fit.exponent > 1.0 && fit.exponent < 3.0);
    assert_eq!(report.rows.len(), 1);
}

#[test]
fn instance_summary_is_consistent() {
    let s = instance_summary(&graph::cycle(5).unwrap(), 0.2, 1).unwrap();
    assert_eq!(s.n_states, 31);
    assert!((s.t_rel * s.gap - 1.0).abs() < 1e-12);
    assert!(s.alpha_bracket.0 <= s.alpha_witness && s.alpha_witness <= s.alpha_bracket.1 * (1.0 + 1e-12));
    let (t_mix, t2) = (s.t_mix.unwrap(), s.t2.unwrap());
    assert!(t_mix <= t2);
}
