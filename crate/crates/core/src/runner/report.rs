use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::convergence::{divergence_verdict, trend_verdict, Verdict};
use crate::error::{Error, Result};
use crate::examples::{Claim, ClaimSet, ClaimTarget, ExampleId};

pub const CSV_HEADER: &str = "example_id,j,quantity,p_or_radius,value,lo,hi,method,tolerance,verdict";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub example_id: ExampleId,
    pub j: u64,
    pub quantity: String,
    pub p_or_radius: Option<f64>,
    pub value: f64,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub method: String,
    pub tolerance: f64,
    pub verdict: Option<Verdict>,
}

impl ReportRow {
    pub fn new(example_id: ExampleId, j: u64, quantity: &str, value: f64, method: &str, tolerance: f64) -> Self {
        ReportRow {
            example_id,
            j,
            quantity: quantity.into(),
            p_or_radius: None,
            value,
            lo: None,
            hi: None,
            method: method.into(),
            tolerance,
            verdict: None,
        }
    }

    pub fn with_param(mut self, p: f64) -> Self {
        self.p_or_radius = Some(p);
        self
    }

    pub fn with_interval(mut self, lo: f64, hi: f64) -> Self {
        self.lo = Some(lo);
        self.hi = Some(hi);
        self
    }

    fn series_key(&self) -> (String, Option<u64>) {
        (self.quantity.clone(), self.p_or_radius.map(f64::to_bits))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClaimVerdict {
    pub claim: String,
    pub quantity: String,
    pub label: String,
    pub verdict: Verdict,
    /// Log-log slope of the deciding series, when a trend was fitted.
    pub slope: Option<f64>,
    pub anchor: String,
}

impl ClaimVerdict {
    /// `"<label>: <verdict>"`, e.g. `diverges: supports`.
    pub fn line(&self) -> String {
        format!("{}: {}", self.label, self.verdict)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub example_id: ExampleId,
    pub config_hash: String,
    pub rows: Vec<ReportRow>,
    pub verdicts: Vec<ClaimVerdict>,
    pub notes: Vec<String>,
}

impl ConvergenceReport {
    /// 0 when every verdict supports, 2 when any refutes, 3 when any is
    /// inconclusive (or nothing was decided).
    pub fn exit_code(&self) -> i32 {
        if self.verdicts.iter().any(|v| v.verdict == Verdict::Refutes) {
            2
        } else if self.verdicts.is_empty() || self.verdicts.iter().any(|v| v.verdict == Verdict::Inconclusive) {
            3
        } else {
            0
        }
    }

    pub fn series(&self, quantity: &str, param: Option<f64>) -> Vec<(u64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.quantity == quantity && r.p_or_radius.map(f64::to_bits) == param.map(f64::to_bits))
            .map(|r| (r.j, r.value))
            .collect()
    }

    pub fn verdict(&self, claim: &str) -> Option<&ClaimVerdict> {
        self.verdicts.iter().find(|v| v.claim == claim)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                r.example_id,
                r.j,
                r.quantity,
                opt(r.p_or_radius),
                r.value,
                opt(r.lo),
                opt(r.hi),
                r.method,
                r.tolerance,
                r.verdict.map_or("", |v| v.as_str())
            )
            .unwrap();
        }
        s
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Summary<'a> {
            example_id: ExampleId,
            config_hash: &'a str,
            exit_code: i32,
            row_count: usize,
            verdicts: &'a [ClaimVerdict],
            notes: &'a [String],
        }
        let summary = Summary {
            example_id: self.example_id,
            config_hash: &self.config_hash,
            exit_code: self.exit_code(),
            row_count: self.rows.len(),
            verdicts: &self.verdicts,
            notes: &self.notes,
        };
        let mut s = serde_json::to_string_pretty(&summary).expect("summary serializes");
        s.push('\n');
        s
    }

    /// Two-column `(j, value)` data per series, keyed by file name.
    pub fn plot_data(&self) -> BTreeMap<String, String> {
        let mut out: BTreeMap<String, String> = BTreeMap::new();
        for r in &self.rows {
            let name = match r.p_or_radius {
                None => format!("{}.dat", r.quantity),
                Some(p) => format!("{}_{}.dat", r.quantity, format!("{p}").replace('.', "p")),
            };
            let body = out
                .entry(name)
                .or_insert_with(|| format!("# {} j value\n", r.quantity));
            writeln!(body, "{} {}", r.j, r.value).unwrap();
        }
        out
    }
}

/// Applies each claim to the rows of its quantity and records verdicts on
/// the report and on the matching rows.
pub fn apply_claims(report: &mut ConvergenceReport, claims: &ClaimSet) {
    for claim in &claims.claims {
        let mut groups: BTreeMap<(String, Option<u64>), Vec<usize>> = BTreeMap::new();
        for (i, r) in report.rows.iter().enumerate() {
            if r.quantity == claim.quantity && in_range(claim, r.p_or_radius) {
                groups.entry(r.series_key()).or_default().push(i);
            }
        }
        if groups.is_empty() {
            continue;
        }
        let mut verdict = Verdict::Supports;
        let mut slope = None;
        for idx in groups.values() {
            let js: Vec<f64> = idx.iter().map(|&i| report.rows[i].j as f64).collect();
            let vals: Vec<f64> = idx.iter().map(|&i| report.rows[i].value).collect();
            let tol = idx.iter().map(|&i| report.rows[i].tolerance).fold(0.0, f64::max);
            let (v, s) = decide(&claim.target, &js, &vals, tol);
            for &i in idx {
                report.rows[i].verdict = Some(v);
            }
            slope = slope.or(s);
            verdict = combine(verdict, v);
        }
        report.verdicts.push(ClaimVerdict {
            claim: claim.id.clone(),
            quantity: claim.quantity.clone(),
            label: claim.label.clone(),
            verdict,
            slope,
            anchor: claim.anchor.clone(),
        });
    }
}

fn in_range(claim: &Claim, p: Option<f64>) -> bool {
    match (claim.p_range, p) {
        (Some([lo, hi]), Some(p)) => p > lo && p <= hi,
        (Some(_), None) => false,
        (None, _) => true,
    }
}

fn combine(a: Verdict, b: Verdict) -> Verdict {
    use Verdict::*;
    match (a, b) {
        (Refutes, _) | (_, Refutes) => Refutes,
        (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
        _ => Supports,
    }
}

fn decide(target: &ClaimTarget, js: &[f64], vals: &[f64], tol: f64) -> (Verdict, Option<f64>) {
    let last = *vals.last().expect("nonempty series");
    match *target {
        ClaimTarget::ToValue { value } => {
            if vals.len() >= 4 {
                let t = trend_verdict(js, vals, value, tol).expect("checked length");
                (t.verdict, Some(t.slope))
            } else if (last - value).abs() <= tol {
                (Verdict::Supports, None)
            } else {
                (Verdict::Inconclusive, None)
            }
        }
        ClaimTarget::Diverges => {
            if vals.len() >= 4 {
                let t = divergence_verdict(js, vals).expect("checked length");
                (t.verdict, Some(t.slope))
            } else {
                (Verdict::Inconclusive, None)
            }
        }
        ClaimTarget::Grows => {
            if vals.windows(2).any(|w| w[1] < w[0]) {
                (Verdict::Refutes, None)
            } else if vals.len() >= 2 && last > vals[0] {
                (Verdict::Supports, None)
            } else {
                (Verdict::Inconclusive, None)
            }
        }
        ClaimTarget::Constant { value } => (Verdict::from_bool(vals.iter().all(|v| (v - value).abs() <= tol)), None),
        ClaimTarget::BoundedAway { floor } => {
            if vals.iter().all(|v| *v > floor + tol) {
                (Verdict::Supports, None)
            } else if last <= floor + tol {
                (Verdict::Refutes, None)
            } else {
                (Verdict::Inconclusive, None)
            }
        }
        ClaimTarget::AtMost { value } => (Verdict::from_bool(last <= value + tol), None),
        ClaimTarget::Below { value } => (Verdict::from_bool(last < value), None),
    }
}

/// Output formats of [`emit`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Dat,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Csv, Format::Json, Format::Dat];
}

/// Writes the requested formats into `dir`; returns the written paths in a
/// fixed order.
pub fn emit(report: &ConvergenceReport, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
    if report.rows.is_empty() {
        return Err(Error::Empty("report has no rows".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: &str, text: &str| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(())
    };
    let mut formats = formats.to_vec();
    formats.sort();
    formats.dedup();
    for f in formats {
        match f {
            Format::Csv => put("report.csv", &report.to_csv())?,
            Format::Json => put("summary.json", &report.to_json())?,
            Format::Dat => {
                for (name, body) in report.plot_data() {
                    put(&name, &body)?;
                }
            }
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::claims;

    fn report(rows: Vec<ReportRow>) -> ConvergenceReport {
        ConvergenceReport {
            example_id: ExampleId::Diverging,
            config_hash: "abc".into(),
            rows,
            verdicts: Vec::new(),
            notes: Vec::new(),
        }
    }

    #[test]
    fn empty_report_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit(&report(vec![]), dir.path(), &Format::ALL).is_err());
    }

    #[test]
    fn single_row_csv() {
        let r = report(vec![ReportRow::new(ExampleId::Diverging, 4, "vol", 1.5, "radial-exact", 1e-6)]);
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "diverging_3_6,4,vol,,1.5,,,radial-exact,0.000001,");
    }

    #[test]
    fn divergence_claim_supports() {
        let rows = [10u64, 100, 1000, 10000]
            .iter()
            .map(|&j| ReportRow::new(ExampleId::Diverging, j, "vol", (j * j) as f64, "radial-exact", 1e-6))
            .collect();
        let mut r = report(rows);
        apply_claims(&mut r, &claims(ExampleId::Diverging));
        let v = r.verdict("vol").unwrap();
        assert_eq!(v.line(), "diverges: supports");
        assert_eq!(r.exit_code(), 0);
        assert!(r.rows.iter().all(|row| row.verdict == Some(Verdict::Supports)));
    }

    #[test]
    fn exit_codes() {
        let mut r = report(vec![ReportRow::new(ExampleId::Diverging, 4, "vol", 1.0, "m", 0.0)]);
        assert_eq!(r.exit_code(), 3);
        let v = |verdict| ClaimVerdict {
            claim: "x".into(),
            quantity: "vol".into(),
            label: "l".into(),
            verdict,
            slope: None,
            anchor: "a".into(),
        };
        r.verdicts = vec![v(Verdict::Supports), v(Verdict::Inconclusive)];
        assert_eq!(r.exit_code(), 3);
        r.verdicts.push(v(Verdict::Refutes));
        assert_eq!(r.exit_code(), 2);
    }

    #[test]
    fn plot_files_per_series() {
        let mut rows = Vec::new();
        for j in [4, 8] {
            rows.push(ReportRow::new(ExampleId::Diverging, j, "diam", j as f64, "m", 0.0));
            rows.push(ReportRow::new(ExampleId::Diverging, j, "lp_norm", 1.0, "m", 0.0).with_param(2.5));
        }
        let data = report(rows).plot_data();
        assert_eq!(data.keys().cloned().collect::<Vec<_>>(), vec!["diam.dat", "lp_norm_2p5.dat"]);
        assert_eq!(data["diam.dat"], "# diam j value\n4 4\n8 8\n");
    }
}
