//! TOML run configuration and the shipped presets.

use serde::{Deserialize, Serialize};

use crate::diophantine::{ApproxFunction, ApproxKind, ContinuedFraction};
use crate::error::{Error, Result};
use crate::lattice::PotentialSpec;
use crate::nls_sim::{ExperimentSettings, Regime, TruncationSpec};
use crate::toy_model::CascadeConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyConfig {
    /// `golden`, `sqrt2` or `a0;a1,a2,...`.
    pub cf: String,
    pub approx: ApproxFunction,
    /// Convergent index used for the scaling; selected automatically when absent.
    #[serde(default)]
    pub convergent: Option<usize>,
    #[serde(default = "default_l_min")]
    pub l_min: f64,
    #[serde(default = "default_c_assumption")]
    pub c_assumption: f64,
}

fn default_l_min() -> f64 {
    1.0
}

fn default_c_assumption() -> f64 {
    0.125
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaSetConfig {
    pub n: usize,
    pub seed: u64,
    #[serde(default = "default_box", rename = "box")]
    pub box_size: i64,
    #[serde(default = "default_retries")]
    pub retries: usize,
}

fn default_box() -> i64 {
    50
}

fn default_retries() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyConfig {
    pub delta: f64,
    pub eps: f64,
    pub seed_amp: f64,
    pub phase_grid: usize,
    pub budget: usize,
    pub tol: f64,
    pub stage_window: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        let c = CascadeConfig::default();
        Self { delta: 0.1, eps: c.eps, seed_amp: c.seed_amp, phase_grid: c.phase_grid, budget: c.budget, tol: c.tol, stage_window: c.stage_window }
    }
}

impl ToyConfig {
    pub fn cascade(&self) -> CascadeConfig {
        CascadeConfig {
            eps: self.eps,
            seed_amp: self.seed_amp,
            phase_grid: self.phase_grid,
            budget: self.budget,
            tol: self.tol,
            stage_window: self.stage_window,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub truncation: TruncationSpec,
    pub epsilon: f64,
    pub s: f64,
    pub tol: f64,
    pub samples: usize,
    pub perturbation: f64,
    pub regime: Regime,
    pub seed: u64,
    pub classes: Option<Vec<u8>>,
    pub normal_form: bool,
    pub nf_radius: f64,
    pub lambdas: Vec<f64>,
    /// Scale of the ratio experiment and of `nls-run`.
    pub ratio_lambda: f64,
    /// η grid lo, hi, steps of the normal-form sweep.
    pub eta_sweep: (f64, f64, usize),
    pub nf_seed: u64,
    /// Box radius for the class-1 divisor enumeration; unbounded when absent.
    pub l1_box: Option<f64>,
    /// Target initial Sobolev size μ for the strong-regime planner.
    pub mu: f64,
    /// Constants of the bootstrap conditions.
    pub gamma: Option<f64>,
    pub c0: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let e = ExperimentSettings::default();
        Self {
            truncation: TruncationSpec::default(),
            epsilon: e.epsilon,
            s: e.s,
            tol: e.tol,
            samples: e.samples,
            perturbation: e.perturbation,
            regime: e.regime,
            seed: e.seed,
            classes: e.classes,
            normal_form: e.normal_form,
            nf_radius: e.nf_radius,
            lambdas: e.lambdas,
            ratio_lambda: 64.0,
            eta_sweep: (1.0 / 64.0, 1.0 / 8.0, 4),
            nf_seed: 1,
            l1_box: None,
            mu: 0.1,
            gamma: None,
            c0: 1.0,
        }
    }
}

impl ExperimentConfig {
    pub fn settings(&self) -> ExperimentSettings {
        ExperimentSettings {
            epsilon: self.epsilon,
            s: self.s,
            tol: self.tol,
            samples: self.samples,
            perturbation: self.perturbation,
            regime: self.regime,
            seed: self.seed,
            classes: self.classes.clone(),
            normal_form: self.normal_form,
            nf_radius: self.nf_radius,
            lambdas: self.lambdas.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub frequency: FrequencyConfig,
    #[serde(default)]
    pub potential: PotentialSpec,
    pub lambda_set: LambdaSetConfig,
    #[serde(default)]
    pub toy: ToyConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
}

const REQUIRED: [&str; 2] = ["frequency", "lambda_set"];

pub const PRESETS: [(&str, &str); 3] = [
    ("desk-n5", include_str!("../presets/desk-n5.toml")),
    ("desk-n6", include_str!("../presets/desk-n6.toml")),
    ("square-case", include_str!("../presets/square-case.toml")),
];

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let value: toml::Value = text.parse().map_err(|e: toml::de::Error| Error::ConfigError(e.message().to_string()))?;
        let table = value.as_table().ok_or_else(|| Error::ConfigError("top level must be a table".into()))?;
        for s in REQUIRED {
            if !table.contains_key(s) {
                return Err(Error::ConfigError(format!("missing [{s}] section")));
            }
        }
        let cfg: Config = value.try_into().map_err(|e: toml::de::Error| Error::ConfigError(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn preset(name: &str) -> Result<Self> {
        let (_, text) = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::ConfigError(format!("unknown preset `{name}`")))?;
        Self::parse(text)
    }

    /// A preset name or a path to a TOML file.
    pub fn load(spec: &str) -> Result<Self> {
        if PRESETS.iter().any(|(n, _)| *n == spec) {
            return Self::preset(spec);
        }
        let text = std::fs::read_to_string(spec)
            .map_err(|e| Error::ConfigError(format!("`{spec}` is neither a preset nor a readable file: {e}")))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        ContinuedFraction::parse(&self.frequency.cf).map_err(|e| Error::ConfigError(format!("[frequency] cf: {e}")))?;
        self.frequency.approx.validate().map_err(|e| Error::ConfigError(format!("[frequency] approx: {e}")))?;
        self.potential.validate().map_err(|e| Error::ConfigError(format!("[potential]: {e}")))?;
        if !(2..=6).contains(&self.lambda_set.n) {
            return Err(Error::ConfigError("[lambda_set] n must lie in 2..=6".into()));
        }
        if !(self.toy.delta > 0.0 && self.toy.delta < 1.0) {
            return Err(Error::ConfigError("[toy] delta must lie in (0, 1)".into()));
        }
        let (lo, hi, steps) = self.experiment.eta_sweep;
        if !(lo > 0.0 && hi >= lo && steps >= 1) {
            return Err(Error::ConfigError("[experiment] eta_sweep must be (lo > 0, hi >= lo, steps >= 1)".into()));
        }
        Ok(())
    }

    pub fn is_power_kind(&self) -> bool {
        self.frequency.approx.kind == ApproxKind::Power
    }

    /// Canonical JSON form, the input of the configuration hash.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
