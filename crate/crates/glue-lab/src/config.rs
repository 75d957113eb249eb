use std::path::{Path, PathBuf};

use glue_core::examples::CpnExampleSpec;
use glue_core::preglue::{AdiabaticParams, FlatToySpec};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    FlatToy,
    CpnExample,
    /// Flat toy with user-supplied data in `custom`.
    Custom,
}

impl Scenario {
    pub fn id(&self) -> &'static str {
        match self {
            Scenario::FlatToy => "flat_toy",
            Scenario::CpnExample => "cpn_example",
            Scenario::Custom => "custom",
        }
    }
}

/// `l`, `p`, `δ`; `ε` comes from the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(default = "default_l")]
    pub l: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_l() -> f64 {
    1.0
}
fn default_p() -> f64 {
    4.0
}
fn default_delta() -> f64 {
    0.5
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self { l: default_l(), p: default_p(), delta: default_delta() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_t: usize,
    pub h_tau: f64,
}

/// Either an explicit list or a power range such as `"2^-4..2^-8"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepSpec {
    List(Vec<f64>),
    Range(String),
}

impl SweepSpec {
    pub fn resolve(&self) -> Result<Vec<f64>> {
        match self {
            SweepSpec::List(v) => Ok(v.clone()),
            SweepSpec::Range(s) => parse_sweep(s),
        }
    }
}

/// `2^-a..2^-b` (inclusive, step one power) or a single `2^-a`.
pub fn parse_sweep(s: &str) -> Result<Vec<f64>> {
    let pow = |t: &str| -> Result<i32> {
        let t = t.trim();
        t.strip_prefix("2^")
            .and_then(|e| e.parse::<i32>().ok())
            .ok_or_else(|| LabError::Config(format!("bad sweep term {t:?}, expected 2^k")))
    };
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (pow(a)?, pow(b)?),
        None => {
            let a = pow(s)?;
            (a, a)
        }
    };
    let step = if b >= a { 1 } else { -1 };
    let mut out = vec![2f64.powi(a)];
    let mut k = a;
    while k != b {
        k += step;
        out.push(2f64.powi(k));
    }
    Ok(out)
}

/// Knobs read by individual subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Flags {
    /// Gaussian probes for operator-norm and contraction estimates.
    pub probes: usize,
    pub zeta: f64,
    /// Random subspace pairs for `transversality`.
    pub trials: usize,
    /// Decay exponent fraction υ; the three-interval bound uses `c = 2πυ`.
    pub upsilon: f64,
    /// Contraction ratio above which `inverse-check` reports a violation.
    pub contraction_max: f64,
    /// Also write binary grid dumps.
    pub write_grids: bool,
}

impl Default for Flags {
    fn default() -> Self {
        Self { probes: 50, zeta: 0.25, trials: 500, upsilon: 0.8, contraction_max: 0.5, write_grids: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub params: ParamsConfig,
    pub sweep: SweepSpec,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub flags: Flags,
    /// Toy data for `scenario = "custom"`.
    #[serde(default)]
    pub custom: Option<FlatToySpec>,
    /// Overrides for the projective example.
    #[serde(default)]
    pub cpn: Option<CpnExampleSpec>,
}

fn default_out() -> PathBuf {
    PathBuf::from("glue-lab-out")
}

impl RunConfig {
    pub fn default_for(scenario: Scenario) -> Self {
        Self {
            scenario,
            params: ParamsConfig::default(),
            sweep: SweepSpec::Range("2^-4..2^-8".into()),
            grid: None,
            seed: 7,
            output_dir: default_out(),
            flags: Flags::default(),
            custom: None,
            cpn: None,
        }
    }

    /// TOML unless the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        let cfg: Self = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let sweep = self.sweep.resolve()?;
        if sweep.is_empty() {
            return Err(LabError::Config("empty sweep".into()));
        }
        if sweep.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(LabError::Config("sweep values must be positive".into()));
        }
        if sweep.windows(2).any(|w| w[1] >= w[0]) {
            return Err(LabError::Config("sweep must be strictly decreasing".into()));
        }
        AdiabaticParams::new(sweep[0], self.params.l, self.params.p, self.params.delta).map_err(|e| LabError::Config(e.to_string()))?;
        if let Some(g) = &self.grid {
            if g.n_t < 4 || !g.n_t.is_power_of_two() || !(g.h_tau > 0.0) {
                return Err(LabError::Config(format!("grid n_t = {} must be a power of two ≥ 4, h_tau > 0", g.n_t)));
            }
        }
        if self.scenario == Scenario::Custom && self.custom.is_none() {
            return Err(LabError::Config("scenario custom needs a [custom] table".into()));
        }
        if !(self.flags.zeta > 0.0) || !(self.flags.upsilon > 0.0 && self.flags.upsilon < 1.0) || self.flags.probes == 0 {
            return Err(LabError::Config("flags: need zeta > 0, 0 < upsilon < 1, probes > 0".into()));
        }
        Ok(())
    }

    pub fn eps_list(&self) -> Result<Vec<f64>> {
        self.sweep.resolve()
    }

    pub fn params_at(&self, eps: f64) -> AdiabaticParams {
        AdiabaticParams { eps, l: self.params.l, p: self.params.p, delta: self.params.delta }
    }

    pub fn toy_spec(&self) -> Result<FlatToySpec> {
        let mut spec = match self.scenario {
            Scenario::FlatToy => FlatToySpec::default(),
            Scenario::Custom => self.custom.clone().expect("validated"),
            Scenario::CpnExample => return Err(LabError::Config("this subcommand needs scenario flat_toy or custom".into())),
        };
        spec.l = self.params.l;
        if let Some(g) = self.grid {
            spec.n_t = g.n_t;
            spec.h_tau = g.h_tau;
        }
        Ok(spec)
    }

    pub fn cpn_spec(&self) -> Result<CpnExampleSpec> {
        if self.scenario != Scenario::CpnExample {
            return Err(LabError::Config("cpn needs scenario cpn_example".into()));
        }
        let mut spec = self.cpn.clone().unwrap_or_default();
        spec.l = self.params.l;
        if let Some(g) = self.grid {
            spec.n_t = g.n_t;
            spec.h_tau = g.h_tau;
        }
        spec.validate().map_err(|e| LabError::Config(e.to_string()))?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_range_parses_both_directions() {
        assert_eq!(parse_sweep("2^-4..2^-6").unwrap(), vec![0.0625, 0.03125, 0.015625]);
        assert_eq!(parse_sweep("2^-3").unwrap(), vec![0.125]);
        assert!(parse_sweep("0.1..0.2").is_err());
    }

    #[test]
    fn toml_and_json_agree() {
        let t = r#"
scenario = "flat_toy"
sweep = "2^-3..2^-5"
seed = 3
[grid]
n_t = 32
h_tau = 0.125
[flags]
probes = 4
"#;
        let a: RunConfig = toml::from_str(t).unwrap();
        let j = serde_json::to_string(&a).unwrap();
        let b: RunConfig = serde_json::from_str(&j).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.flags.zeta, 0.25);
        a.validate().unwrap();
    }

    #[test]
    fn rejects_increasing_sweep_and_bad_delta() {
        let mut c = RunConfig::default_for(Scenario::FlatToy);
        c.sweep = SweepSpec::List(vec![0.1, 0.2]);
        assert!(c.validate().is_err());
        c.sweep = SweepSpec::List(vec![0.2, 0.1]);
        c.params.delta = 0.9;
        assert!(c.validate().is_err());
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        assert!(toml::from_str::<RunConfig>("scenario = \"flat_toy\"\nsweep = [0.1]\nbogus = 1\n").is_err());
    }
}
