//! Rows of a verification run and their JSON/CSV renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One evaluated check. `hard` rows are exact inequalities or identities;
/// soft rows record fitted constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub name: String,
    pub anchor: String,
    pub instance: String,
    pub values: BTreeMap<String, f64>,
    pub fitted: Option<f64>,
    pub tolerance: f64,
    pub hard: bool,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckRow {
    pub fn new(name: &str, anchor: &str, instance: &str) -> Self {
        CheckRow {
            name: name.into(),
            anchor: anchor.into(),
            instance: instance.into(),
            values: BTreeMap::new(),
            fitted: None,
            tolerance: 0.0,
            hard: true,
            pass: true,
            note: None,
        }
    }

    pub fn value(mut self, key: &str, v: f64) -> Self {
        self.values.insert(key.into(), v);
        self
    }

    pub fn tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    /// Hard check of `lhs <= rhs` up to relative slack `tolerance`.
    pub fn assert_le(mut self, lhs: f64, rhs: f64) -> Self {
        self.pass = lhs.is_finite() && rhs.is_finite() && lhs <= rhs + self.tolerance * rhs.abs().max(1.0);
        self.values.insert("lhs".into(), lhs);
        self.values.insert("rhs".into(), rhs);
        self
    }

    /// Hard check of `|a - b| <= tolerance`.
    pub fn assert_close(mut self, a: f64, b: f64) -> Self {
        let dev = (a - b).abs();
        self.pass = dev <= self.tolerance;
        self.values.insert("deviation".into(), dev);
        self
    }

    /// Soft row recording a fitted constant; fails only against a snapshot
    /// exceeded by more than a factor two.
    pub fn fitted(mut self, c: f64, snapshot: Option<f64>) -> Self {
        self.hard = false;
        self.fitted = Some(c);
        self.pass = c.is_finite();
        if let Some(s) = snapshot {
            self.values.insert("snapshot".into(), s);
            self.pass &= c <= 2.0 * s;
        }
        self
    }

    pub fn note(mut self, text: impl Into<String>) -> Self {
        self.note = Some(text.into());
        self
    }

    pub fn skipped(name: &str, anchor: &str, instance: &str, reason: impl Into<String>) -> Self {
        let mut r = CheckRow::new(name, anchor, instance);
        r.hard = false;
        r.note = Some(format!("skipped: {}", reason.into()));
        r
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub rows: Vec<CheckRow>,
}

impl VerificationReport {
    pub fn push(&mut self, row: CheckRow) {
        self.rows.push(row);
    }

    pub fn extend(&mut self, rows: impl IntoIterator<Item = CheckRow>) {
        self.rows.extend(rows);
    }

    pub fn hard_failures(&self) -> Vec<&CheckRow> {
        self.rows.iter().filter(|r| r.hard && !r.pass).collect()
    }

    /// Hard checks pass and no fitted constant outgrew its snapshot.
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    /// Fitted constants keyed by `name@instance`, largest per key.
    pub fn fitted_constants(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        for r in &self.rows {
            if let Some(c) = r.fitted {
                let e = m.entry(format!("{}@{}", r.name, r.instance)).or_insert(c);
                *e = f64::max(*e, c);
            }
        }
        m
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// One line per row: `name,anchor,instance,hard,pass,fitted,tolerance,values`
    /// with values as `key=value` separated by `;`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("name,anchor,instance,hard,pass,fitted,tolerance,values\n");
        for r in &self.rows {
            let values: Vec<String> = r.values.iter().map(|(k, v)| format!("{k}={v:e}")).collect();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{:e},{}",
                csv_field(&r.name),
                csv_field(&r.anchor),
                csv_field(&r.instance),
                r.hard,
                r.pass,
                r.fitted.map_or(String::new(), |c| format!("{c:e}")),
                r.tolerance,
                csv_field(&values.join(";"))
            );
        }
        s
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
