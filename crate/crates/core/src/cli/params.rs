use serde::{Deserialize, Serialize};

use crate::quad::QuadratureSpec;
use crate::{LabError, Result};

/// Run parameters. Every field has a default, so an empty config is valid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Ambient dimension; the spatial dimension is `d - 1`.
    pub d: usize,
    pub s: i32,
    pub s_range: Vec<i32>,
    pub kappa: usize,
    pub eta: f64,
    pub q: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub theta: f64,
    /// Defaults to `2δ/(1-δ)`.
    pub sigma: Option<f64>,
    pub tau: usize,
    /// Defaults to `κ - 1`.
    pub tau_prime: Option<usize>,
    pub seed: u64,
    /// Number of grid shifts used for averages over `v`.
    pub shifts: usize,
    /// Independent random inputs per scale.
    pub draws: usize,
    /// Smoothness of the spatial cutoff `ψ`.
    pub cutoff_r: u32,
    pub r_range: Vec<i32>,
    pub nu: f64,
    pub quad: QuadratureSpec,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            d: 2,
            s: 4,
            s_range: vec![3, 4, 5, 6],
            kappa: 3,
            eta: 1.0 / 64.0,
            q: 4.0,
            delta: 0.1,
            epsilon: 0.1,
            theta: 0.2,
            sigma: None,
            tau: 3,
            tau_prime: None,
            seed: 1,
            shifts: 33,
            draws: 4,
            cutoff_r: 5,
            r_range: vec![3, 4, 5],
            nu: 0.15,
            quad: QuadratureSpec::default(),
        }
    }
}

const EXTENSION_EXPERIMENTS: [&str; 6] =
    ["zero-case", "nearby-case", "faraway-case", "small-large-range", "averaged-testing", "trilinear"];

/// Experiments whose frequency grids or oracles cover one spatial variable.
const PLANE_ONLY: [&str; 7] =
    ["gamma-oracle", "zero-case", "nearby-case", "faraway-case", "small-large-range", "averaged-testing", "trilinear"];

impl Params {
    pub fn dim(&self) -> usize {
        self.d - 1
    }

    pub fn sigma(&self) -> f64 {
        self.sigma.unwrap_or(2.0 * self.delta / (1.0 - self.delta))
    }

    pub fn tau_prime(&self) -> usize {
        self.tau_prime.unwrap_or(self.kappa.saturating_sub(1))
    }

    /// Copy with the derived defaults written out.
    pub fn resolved(&self) -> Self {
        let mut p = self.clone();
        p.sigma = Some(self.sigma());
        p.tau_prime = Some(self.tau_prime());
        p
    }

    /// Every violated constraint, reported together.
    pub fn validate(&self, experiment: Option<&str>) -> Result<()> {
        let mut bad = Vec::new();
        if !(2..=3).contains(&self.d) {
            bad.push(format!("d must be 2 or 3, got {}", self.d));
        }
        if self.d >= 2 {
            let qmin = 2.0 * self.d as f64 / (self.d as f64 - 1.0);
            if !(self.q >= qmin) || !self.q.is_finite() {
                bad.push(format!("q must be finite and >= 2d/(d-1) = {qmin}, got {}", self.q));
            }
        }
        if !(self.delta > 0.0 && self.delta <= 0.5) {
            bad.push(format!("delta must lie in (0, 1/2], got {}", self.delta));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 0.5) {
            bad.push(format!("epsilon must lie in (0, 1/2], got {}", self.epsilon));
        }
        if !(self.eta > 0.0 && self.eta < 0.5) {
            bad.push(format!("eta must lie in (0, 1/2), got {}", self.eta));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            bad.push(format!("theta must lie in (0, 1), got {}", self.theta));
        }
        if self.delta > 0.0 && self.delta < 1.0 && !(self.sigma() > self.delta / (1.0 - self.delta)) {
            bad.push(format!("sigma must exceed delta/(1-delta), got {}", self.sigma()));
        }
        if self.kappa == 0 {
            bad.push("kappa must be positive".into());
        }
        if experiment.is_some_and(|e| EXTENSION_EXPERIMENTS.contains(&e)) && self.kappa <= self.d {
            bad.push(format!("kappa must exceed d for extension experiments, got kappa={} d={}", self.kappa, self.d));
        }
        if let Some(e) = experiment.filter(|e| PLANE_ONLY.contains(e)) {
            if self.d != 2 {
                bad.push(format!("{e} runs with d = 2 only, got d={}", self.d));
            }
        }
        if self.tau < 1 {
            bad.push("tau must be >= 1".into());
        }
        if self.shifts == 0 {
            bad.push("shifts must be >= 1".into());
        }
        if self.draws == 0 {
            bad.push("draws must be >= 1".into());
        }
        if !(1..=12).contains(&self.s) {
            bad.push(format!("s must lie in 1..=12, got {}", self.s));
        }
        if self.s_range.is_empty() || self.s_range.iter().any(|s| !(1..=12).contains(s)) {
            bad.push(format!("s_range must be a non-empty list in 1..=12, got {:?}", self.s_range));
        }
        if self.r_range.is_empty() || self.r_range.iter().any(|r| !(1..=10).contains(r)) {
            bad.push(format!("r_range must be a non-empty list in 1..=10, got {:?}", self.r_range));
        }
        if !(self.nu > 0.0 && self.nu < 1.0) {
            bad.push(format!("nu must lie in (0, 1), got {}", self.nu));
        }
        if !(1..=12).contains(&self.cutoff_r) {
            bad.push(format!("cutoff_r must lie in 1..=12, got {}", self.cutoff_r));
        }
        if let Err(e) = self.quad.validate() {
            bad.push(format!("quad: {e}"));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(LabError::Config(bad.join("; ")))
        }
    }

    /// Parse a TOML document and apply `key=value` overrides on top of it.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| LabError::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| LabError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| LabError::Config(e.to_string()))
    }
}

/// `a.b=value`: the value is read as TOML, or taken as a bare string when it
/// does not parse.
fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item.split_once('=').ok_or_else(|| LabError::Config(format!("override '{item}' is not key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(LabError::Config(format!("override '{item}' has an empty key")));
    }
    let value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| LabError::Config(format!("'{p}' in '{key}' is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(Params::from_toml("", &[]).unwrap(), Params::default());
        Params::default().validate(Some("zero-case")).unwrap();
    }

    #[test]
    fn overrides_merge_into_nested_tables() {
        let p = Params::from_toml("s = 5\n[quad]\ntol = 1e-8\n", &["quad.mode=tensor-gauss".into(), "s_range=[3,4]".into()]).unwrap();
        assert_eq!(p.s, 5);
        assert_eq!(p.s_range, vec![3, 4]);
        assert_eq!(p.quad.tol, 1e-8);
        assert_eq!(p.quad.mode, crate::quad::QuadMode::TensorGauss);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(Params::from_toml("speed = 3", &[]), Err(LabError::Config(_))));
        assert!(matches!(Params::from_toml("", &["quad.fast=true".into()]), Err(LabError::Config(_))));
    }

    #[test]
    fn all_violations_are_listed() {
        let p = Params { d: 4, q: 1.0, theta: 2.0, shifts: 0, ..Params::default() };
        let Err(LabError::Config(msg)) = p.validate(None) else { panic!("expected config error") };
        for key in ["d must", "q must", "theta must", "shifts must"] {
            assert!(msg.contains(key), "{msg}");
        }
    }

    #[test]
    fn extension_experiments_need_large_kappa() {
        let p = Params { kappa: 2, ..Params::default() };
        assert!(p.validate(Some("moments")).is_ok());
        assert!(p.validate(Some("zero-case")).is_err());
    }

    #[test]
    fn resolved_round_trips_through_toml() {
        let p = Params::default().resolved();
        assert_eq!(p.sigma, Some(2.0 * 0.1 / 0.9));
        assert_eq!(p.tau_prime, Some(2));
        assert_eq!(Params::from_toml(&p.to_toml().unwrap(), &[]).unwrap(), p);
    }
}
