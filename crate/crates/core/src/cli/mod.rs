//! Experiment runner: parameters, reports and the on-disk layout
//! `out/<experiment>/<timestamp>/{rows.csv, summary.json, config.resolved}`.

mod experiments;
mod params;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use experiments::{run_trilinear, Patches};
pub use params::Params;

use crate::fit::SlopeFit;
use crate::{LabError, Result, C64};

/// Version of the `rows.csv` column layout, recorded in `summary.json`.
pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_COLUMNS: [&str; 15] =
    ["experiment", "case", "d", "s", "kappa", "eta", "q", "m", "xi", "xi_d", "x", "value_re", "value_im", "bound", "ratio"];

/// Every experiment with a one-line description.
pub const EXPERIMENTS: [(&str, &str); 13] = [
    ("moments", "vanishing moments of plain and smooth Alpert wavelets; extension decay at low frequency"),
    ("frame", "single-scale Gram identity and idempotence of the pseudoprojection"),
    ("norm-scaling", "L^q norm of Q_s f against the coefficient norm over scales"),
    ("dft", "modulated basis: Parseval, reconstruction and channel synthesis of M_psi Q f"),
    ("psp-scan", "periodic stationary phase: gamma slope, small-gamma plateau, route agreement"),
    ("rapid-decay", "periodic rapid decay in the shift |a|"),
    ("gamma-oracle", "grid-averaged lattice sum: direct average against the oscillatory integral"),
    ("zero-case", "averaged extension of the zero channel on the unit cone"),
    ("nearby-case", "L^q norm of the averaged extension for channels near zero"),
    ("faraway-case", "pointwise decay of the averaged extension in the channel index"),
    ("small-large-range", "uniform bounds for small and large xi_d"),
    ("averaged-testing", "growth of the averaged testing ratio over scales"),
    ("trilinear", "disjoint trilinear extension norm on annuli"),
];

/// One CSV row. Vector columns are written joined by `;`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub case: String,
    pub d: usize,
    pub s: Option<i32>,
    pub kappa: usize,
    pub eta: f64,
    pub q: f64,
    pub m: Vec<f64>,
    pub xi: Vec<f64>,
    pub xi_d: Option<f64>,
    pub x: Option<f64>,
    pub value_re: f64,
    pub value_im: f64,
    pub bound: f64,
    /// `|value| / bound` (0 when no bound applies).
    pub ratio: f64,
}

impl Row {
    pub fn new(case: &str, p: &Params) -> Self {
        Self {
            case: case.to_string(),
            d: p.d,
            s: None,
            kappa: p.kappa,
            eta: p.eta,
            q: p.q,
            m: Vec::new(),
            xi: Vec::new(),
            xi_d: None,
            x: None,
            value_re: 0.0,
            value_im: 0.0,
            bound: 0.0,
            ratio: 0.0,
        }
    }

    pub fn d(mut self, d: usize) -> Self {
        self.d = d;
        self
    }
    pub fn s(mut self, s: i32) -> Self {
        self.s = Some(s);
        self
    }
    pub fn kappa(mut self, k: usize) -> Self {
        self.kappa = k;
        self
    }
    pub fn q(mut self, q: f64) -> Self {
        self.q = q;
        self
    }
    pub fn m(mut self, m: Vec<f64>) -> Self {
        self.m = m;
        self
    }
    pub fn xi(mut self, xi: Vec<f64>, xi_d: f64) -> Self {
        self.xi = xi;
        self.xi_d = Some(xi_d);
        self
    }
    pub fn x(mut self, x: f64) -> Self {
        self.x = Some(x);
        self
    }
    pub fn value(mut self, v: C64) -> Self {
        self.value_re = v.re;
        self.value_im = v.im;
        self.update_ratio();
        self
    }
    pub fn real(self, v: f64) -> Self {
        self.value(C64::new(v, 0.0))
    }
    pub fn bound(mut self, b: f64) -> Self {
        self.bound = b;
        self.update_ratio();
        self
    }

    pub fn magnitude(&self) -> f64 {
        C64::new(self.value_re, self.value_im).norm()
    }

    fn update_ratio(&mut self) {
        self.ratio = if self.bound > 0.0 { self.magnitude() / self.bound } else { 0.0 };
    }

    fn record(&self, experiment: &str) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(fmt).unwrap_or_default();
        let vec = |v: &[f64]| v.iter().map(|x| fmt(*x)).collect::<Vec<_>>().join(";");
        vec![
            experiment.to_string(),
            self.case.clone(),
            self.d.to_string(),
            self.s.map(|s| s.to_string()).unwrap_or_default(),
            self.kappa.to_string(),
            fmt(self.eta),
            fmt(self.q),
            vec(&self.m),
            vec(&self.xi),
            opt(self.xi_d),
            opt(self.x),
            fmt(self.value_re),
            fmt(self.value_im),
            fmt(self.bound),
            fmt(self.ratio),
        ]
    }
}

/// Shortest representation that parses back to the same `f64`.
fn fmt(v: f64) -> String {
    format!("{v:?}")
}

/// A fitted slope with its label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub name: String,
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub points: usize,
}

impl FitRecord {
    pub fn new(name: impl Into<String>, f: &SlopeFit) -> Self {
        Self { name: name.into(), slope: f.slope, intercept: f.intercept, residual: f.residual, points: f.used }
    }
}

/// One pass/fail comparison. Non-gating checks are reported but do not affect
/// the exit status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub criterion: Option<u32>,
    pub measured: f64,
    pub relation: String,
    pub threshold: f64,
    pub passed: bool,
    pub gating: bool,
    pub note: String,
}

impl Check {
    pub fn at_most(name: &str, criterion: Option<u32>, measured: f64, threshold: f64) -> Self {
        Self::make(name, criterion, measured, "<=", threshold, measured <= threshold)
    }

    pub fn at_least(name: &str, criterion: Option<u32>, measured: f64, threshold: f64) -> Self {
        Self::make(name, criterion, measured, ">=", threshold, measured >= threshold)
    }

    /// `|measured - target| <= tol`.
    pub fn near(name: &str, criterion: Option<u32>, measured: f64, target: f64, tol: f64) -> Self {
        let mut c = Self::make(name, criterion, measured, "within", tol, (measured - target).abs() <= tol);
        c.note = format!("target {target}");
        c
    }

    fn make(name: &str, criterion: Option<u32>, measured: f64, relation: &str, threshold: f64, passed: bool) -> Self {
        Self {
            name: name.to_string(),
            criterion,
            measured,
            relation: relation.to_string(),
            threshold,
            passed: passed && measured.is_finite(),
            gating: true,
            note: String::new(),
        }
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        let n = note.into();
        self.note = if self.note.is_empty() { n } else { format!("{}; {n}", self.note) };
        self
    }

    pub fn informational(mut self) -> Self {
        self.gating = false;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub experiment: String,
    pub params: Params,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
    pub fits: Vec<FitRecord>,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub wall_time_s: f64,
}

impl ExperimentReport {
    pub fn new(experiment: &str, params: &Params) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: experiment.to_string(),
            params: params.clone(),
            columns: CSV_COLUMNS.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            fits: Vec::new(),
            checks: Vec::new(),
            passed: false,
            wall_time_s: 0.0,
        }
    }

    pub fn push(&mut self, row: Row) {
        self.rows.push(row);
    }

    pub fn fit(&mut self, name: impl Into<String>, f: &SlopeFit) {
        self.fits.push(FitRecord::new(name, f));
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    /// Checks attached to a numbered acceptance criterion.
    pub fn criterion(&self, n: u32) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(move |c| c.criterion == Some(n))
    }

    fn finish(&mut self) {
        self.passed = self.checks.iter().filter(|c| c.gating).all(|c| c.passed);
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(CSV_COLUMNS)?;
        for r in &self.rows {
            wr.write_record(r.record(&self.experiment))?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub fn experiment_names() -> impl Iterator<Item = &'static str> {
    EXPERIMENTS.iter().map(|(n, _)| *n)
}

/// Run an experiment in memory.
pub fn run_report(experiment: &str, params: &Params) -> Result<ExperimentReport> {
    if !experiment_names().any(|n| n == experiment) {
        return Err(LabError::UnknownExperiment(experiment.to_string()));
    }
    let params = params.resolved();
    params.validate(Some(experiment))?;
    let start = Instant::now();
    let mut report = ExperimentReport::new(experiment, &params);
    experiments::dispatch(experiment, &params, &mut report)?;
    report.wall_time_s = start.elapsed().as_secs_f64();
    report.finish();
    Ok(report)
}

/// Run an experiment and write its three output files under
/// `out/<experiment>/<timestamp>/`. Returns the report and the directory.
pub fn run(experiment: &str, params: &Params, out: &Path) -> Result<(ExperimentReport, PathBuf)> {
    let report = run_report(experiment, params)?;
    let dir = output_dir(out, experiment)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    std::fs::write(dir.join("rows.csv"), csv)?;
    std::fs::write(dir.join("summary.json"), report.to_json()?)?;
    std::fs::write(dir.join("config.resolved"), report.params.to_toml()?)?;
    Ok((report, dir))
}

fn output_dir(out: &Path, experiment: &str) -> Result<PathBuf> {
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ").to_string();
    let base = out.join(experiment);
    let mut dir = base.join(&stamp);
    let mut k = 1;
    while dir.exists() {
        dir = base.join(format!("{stamp}-{k}"));
        k += 1;
    }
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Exit status for a finished run: 0 when every gating check passed.
pub fn exit_code(report: &ExperimentReport) -> i32 {
    if report.passed {
        0
    } else {
        1
    }
}

/// Exit status for an error: 2 for configuration problems, 1 otherwise.
pub fn error_exit_code(e: &LabError) -> i32 {
    match e {
        LabError::Config(_) | LabError::UnknownExperiment(_) => 2,
        _ => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_round_trips() {
        let p = Params::default();
        let mut r = ExperimentReport::new("dft", &p);
        r.push(Row::new("x", &p).s(3).xi(vec![0.1, 1.0 / 3.0], -2.5).value(C64::new(1e-300, -0.7)).bound(2.0));
        r.fit("f", &SlopeFit { slope: -0.5, intercept: 1.25, residual: 0.01, used: 4 });
        r.check(Check::at_most("c", Some(3), 1e-12, 1e-10));
        r.finish();
        let back = ExperimentReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        assert!(r.passed);
    }

    #[test]
    fn csv_has_schema_columns() {
        let p = Params::default();
        let mut r = ExperimentReport::new("dft", &p);
        r.push(Row::new("x", &p).m(vec![0.25]).x(1.0).real(2.0).bound(4.0));
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), CSV_COLUMNS.len());
        assert_eq!(row[14], "0.5");
    }

    #[test]
    fn unknown_experiment_is_a_config_error() {
        let e = run_report("nope", &Params::default()).unwrap_err();
        assert_eq!(error_exit_code(&e), 2);
    }
}
