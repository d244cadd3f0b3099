//! Artifact writers: `series.csv`, `summary.json`, `states.json`.
//!
//! Numbers are written in scientific notation with 17 significant digits so
//! repeated runs produce identical bytes and drifts survive the round trip.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use szego_core::flow::TimeSeries;

pub const SERIES_FILE: &str = "series.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const STATES_FILE: &str = "states.json";

pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// Column-oriented numeric table with a one-line description.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub description: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(description: impl Into<String>, columns: Vec<String>) -> Self {
        Self { description: description.into(), columns, rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    /// `# description | columns: a,b,c`, then the column names, then rows.
    pub fn to_csv(&self) -> String {
        let names = self.columns.join(",");
        let mut out = format!("# {} | columns: {names}\n{names}\n", self.description);
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&x| fmt_num(x)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Relation a metric must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Below,
    AtMost,
    AtLeast,
    Above,
    Equal,
}

impl Relation {
    pub fn from_key(key: &str) -> Option<Self> {
        Some(match key {
            "below" => Self::Below,
            "at_most" => Self::AtMost,
            "at_least" => Self::AtLeast,
            "above" => Self::Above,
            "equal" => Self::Equal,
            _ => return None,
        })
    }

    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Self::Below => value < threshold,
            Self::AtMost => value <= threshold,
            Self::AtLeast => value >= threshold,
            Self::Above => value > threshold,
            Self::Equal => value == threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub metric: String,
    pub relation: Relation,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub metric: String,
    pub relation: Relation,
    pub threshold: f64,
    pub value: Option<f64>,
    pub pass: bool,
}

pub fn evaluate_checks(checks: &[Check], metrics: &BTreeMap<String, f64>) -> Vec<CheckOutcome> {
    checks
        .iter()
        .map(|c| {
            let value = metrics.get(&c.metric).copied();
            CheckOutcome {
                metric: c.metric.clone(),
                relation: c.relation,
                threshold: c.threshold,
                value,
                pass: value.is_some_and(|v| c.relation.holds(v, c.threshold)),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemberStatus {
    pub name: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub name: String,
    pub kind: String,
    pub seed: u64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub metrics: BTreeMap<String, f64>,
    pub checks: Vec<CheckOutcome>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub members: Vec<MemberStatus>,
    pub artifacts: Vec<String>,
}

impl Summary {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

pub fn write_text(dir: &Path, file: &str, text: &str) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(file), text)
}

pub fn write_json<T: Serialize>(dir: &Path, file: &str, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    write_text(dir, file, &text)
}

/// Monitor table of a Galerkin run; eigenvalue columns beyond those recorded
/// are `nan`.
pub fn series_table(series: &TimeSeries, eig_count: usize) -> Table {
    let mut columns: Vec<String> = ["t", "q", "m", "e", "j6", "j8"].iter().map(|s| s.to_string()).collect();
    columns.extend(series.hs_orders.iter().map(|s| format!("hs_{s}")));
    columns.extend((1..=eig_count).map(|i| format!("lambda_{i}")));
    columns.push("spectrum_drift".into());
    let lax = series.monitors.iter().any(|m| m.lax_residual.is_some());
    if lax {
        columns.push("lax_residual".into());
    }
    let mut table = Table::new("Galerkin flow monitors", columns);
    for (t, m) in series.times.iter().zip(&series.monitors) {
        let mut row = vec![*t, m.q, m.m, m.e, m.j6, m.j8];
        row.extend(&m.hs);
        row.extend((0..eig_count).map(|i| m.eigenvalues.get(i).copied().unwrap_or(f64::NAN)));
        row.push(m.spectrum_drift);
        if lax {
            row.push(m.lax_residual.unwrap_or(f64::NAN));
        }
        table.push(row);
    }
    table
}

/// Writes the monitor table of `series` and its sampled states to `dir`.
pub fn emit_series(series: &TimeSeries, eig_count: usize, dir: &Path) -> io::Result<()> {
    write_text(dir, SERIES_FILE, &series_table(series, eig_count).to_csv())?;
    let states = serde_json::json!({ "times": series.times, "states": series.states });
    write_json(dir, STATES_FILE, &states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use szego_core::flow::{integrate, Field, FlowConfig};
    use szego_core::FourierSymbol;

    #[test]
    fn number_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_num(f64::NAN), "nan");
        assert_eq!(fmt_num(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = Table::new("nothing", vec!["t".into(), "q".into()]);
        assert_eq!(t.to_csv(), "# nothing | columns: t,q\nt,q\n");
    }

    #[test]
    fn three_sample_run_has_three_rows() {
        let cfg = FlowConfig { cutoff: 8, dt: 1e-2, t_end: 0.2, sample_every: 10, ..FlowConfig::default() };
        let u0 = FourierSymbol::from_real(&[1.0, 0.5]).unwrap();
        let series = integrate(&u0, &cfg, Field::Szego).unwrap();
        let csv = series_table(&series, 2).to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2 + 3);
        let times: Vec<f64> = lines[2..].iter().map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
        assert!(times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn relations() {
        assert!(Relation::Below.holds(1.0, 2.0) && !Relation::Below.holds(2.0, 2.0));
        assert!(Relation::AtLeast.holds(2.0, 2.0) && Relation::Equal.holds(3.0, 3.0));
        assert!(!Relation::Above.holds(f64::NAN, 0.0));
        let mut m = BTreeMap::new();
        m.insert("x".to_string(), 0.5);
        let out = evaluate_checks(
            &[Check { metric: "x".into(), relation: Relation::Below, threshold: 1.0 }, Check { metric: "y".into(), relation: Relation::Below, threshold: 1.0 }],
            &m,
        );
        assert!(out[0].pass && !out[1].pass);
    }
}
