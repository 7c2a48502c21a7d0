//! End-to-end run: frequency, Λ, divisor report, normal form, cascade,
//! shadowing and growth ratio, with a reproducibility manifest.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::diophantine::{certify, convergents, numerator_bracket, scaling_at, select_scaling, ContinuedFraction, Convergent, ScalingChoice, ScalingRequest};
use crate::error::{Error, Result};
use crate::lambda_set::{build_genealogy, place, scale, stats, verify_properties, GenerationStats, LambdaFile, PlacedSet, PropertyReport};
use crate::lattice::Frequency;
use crate::nls_sim::{
    build_truncation, gronwall_conditions, plan_strong_regime, shadow_sweep, sobolev_ratio_experiment, GronwallInputs, Instance, StrongRegimeInputs,
    Truncation,
};
use crate::normal_form::{eta_sweep, geometric_grid, TransformSettings};
use crate::resonance::{resonance_report, ResonanceInputs};
use crate::toy_model::find_cascade;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FrequencyReport {
    pub stage: String,
    pub digits: Vec<u64>,
    pub value: f64,
    pub convergents: Vec<Convergent>,
    pub certified: Vec<bool>,
    pub numerator_bracket: Vec<bool>,
    pub choice: ScalingChoice,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LambdaReport {
    pub stage: String,
    pub properties: PropertyReport,
    pub stats: GenerationStats,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Verdict {
    pub stage: String,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seeds: Vec<(String, u64)>,
    pub versions: Vec<(String, String)>,
    pub outputs: Vec<OutputFile>,
    pub verdicts: Vec<Verdict>,
}

impl RunManifest {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Timings {
    pub stages: Vec<(String, f64)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Frequency, scaled Λ and the scaling data of a configuration.
pub struct Prepared {
    pub omega: ContinuedFraction,
    pub freq: Frequency,
    pub frequency: FrequencyReport,
    pub unscaled: PlacedSet,
    pub ps: PlacedSet,
}

pub fn prepare_frequency(cfg: &Config, r: f64) -> Result<(ContinuedFraction, Frequency, FrequencyReport)> {
    let f = &cfg.frequency;
    let omega = ContinuedFraction::parse(&f.cf)?;
    let count = omega.digits.len().min(12);
    let convs = (1..=count).map_while(|n| convergents(&omega, n).ok()).last().unwrap_or_default();
    let req = ScalingRequest { l_min: f.l_min, n_gen: cfg.lambda_set.n, r, sup_v: cfg.potential.sup_abs(), c_assumption: f.c_assumption };
    let choice = match f.convergent {
        Some(i) => scaling_at(&omega, &f.approx, &req, i)?,
        None => select_scaling(&omega, &f.approx, &req)?,
    };
    let report = FrequencyReport {
        stage: "frequency".into(),
        digits: omega.digits.clone(),
        value: omega.value,
        certified: convs.iter().map(|c| certify(&omega, c, &f.approx)).collect(),
        numerator_bracket: convs.iter().map(|c| numerator_bracket(&omega, c)).collect(),
        convergents: convs,
        choice,
    };
    Ok((omega.clone(), Frequency::from_cf(&omega), report))
}

pub fn prepare(cfg: &Config) -> Result<Prepared> {
    let l = &cfg.lambda_set;
    let unscaled = stage("lambda_set", || place(&build_genealogy(l.n)?, l.seed, l.box_size, l.retries))?;
    let (omega, freq, frequency) = stage("frequency", || prepare_frequency(cfg, unscaled.r_empirical))?;
    let ps = stage("lambda_set", || scale(&unscaled, &frequency.choice.convergent))?;
    Ok(Prepared { omega, freq, frequency, unscaled, ps })
}

fn stage<T>(name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| match e {
        Error::Stage { .. } => e,
        other => Error::Stage { stage: name.into(), source: Box::new(other) },
    })
}

struct Writer<'a> {
    dir: &'a Path,
    outputs: Vec<OutputFile>,
}

impl Writer<'_> {
    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(self.dir.join(name), &text)?;
        self.outputs.push(OutputFile { file: name.into(), sha256: sha256_hex(text.as_bytes()) });
        Ok(())
    }
}

pub fn build_instance_truncation(cfg: &Config, prep: &Prepared) -> Result<Truncation> {
    build_truncation(&prep.ps, &cfg.experiment.truncation, &prep.freq, &cfg.potential)
}

/// Runs every stage in order, writing one JSON report per stage into `out_dir`.
pub fn run_pipeline(cfg: &Config, out_dir: &Path) -> Result<(RunManifest, Timings)> {
    std::fs::create_dir_all(out_dir)?;
    let mut w = Writer { dir: out_dir, outputs: Vec::new() };
    let mut timings = Vec::new();
    let mut verdicts = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, timings: &mut Vec<(String, f64)>| {
        timings.push((name.to_string(), clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };

    let prep = prepare(cfg)?;
    w.json("frequency.json", &prep.frequency)?;
    let properties = verify_properties(&prep.ps);
    if !properties.passed() {
        return Err(Error::Stage { stage: "lambda_set".into(), source: Box::new(Error::InvalidInput("placed set violates the Λ properties".into())) });
    }
    w.json("lambda.json", &LambdaFile::from(&prep.ps))?;
    w.json("lambda_report.json", &LambdaReport { stage: "lambda_set".into(), properties, stats: stats(&prep.ps, cfg.experiment.s) })?;
    lap("frequency+lambda_set", &mut timings);

    let exp = &cfg.experiment;
    let choice = &prep.frequency.choice;
    let psi_q = cfg.frequency.approx.psi(choice.convergent.q as f64);
    let res = stage("resonance", || {
        resonance_report(&ResonanceInputs {
            ps: &prep.ps,
            freq: &prep.freq,
            pot: &cfg.potential,
            psi_q,
            box_radius: exp.l1_box.unwrap_or(f64::INFINITY),
        })
    })?;
    verdicts.push(Verdict { stage: "resonance".into(), pass: res.l1.min_abs >= res.big_l });
    w.json("resonance.json", &res)?;
    lap("resonance", &mut timings);

    let trunc = stage("truncation", || build_instance_truncation(cfg, &prep))?;
    let (lo, hi, steps) = exp.eta_sweep;
    let nf = stage("normal_form", || {
        eta_sweep(&prep.ps, &trunc.table, choice.big_l, &geometric_grid(lo, hi, steps), exp.nf_seed, &TransformSettings { eta0: hi, ..Default::default() })
    })?;
    w.json("nf.json", &nf)?;
    lap("normal_form", &mut timings);

    let orbit = stage("cascade", || find_cascade(cfg.lambda_set.n, cfg.toy.delta, &cfg.toy.cascade()))?;
    w.json("cascade.json", &orbit)?;
    lap("cascade", &mut timings);

    let settings = exp.settings();
    let inst = Instance { ps: &prep.ps, trunc: &trunc, orbit: &orbit, big_l: choice.big_l };
    let shadow = stage("shadow", || shadow_sweep(&settings, &inst, &exp.lambdas))?;
    verdicts.push(Verdict { stage: "shadow".into(), pass: shadow.verdict });
    w.json("shadow.json", &shadow)?;
    lap("shadow", &mut timings);

    let ratio = stage("ratio", || sobolev_ratio_experiment(&settings, &inst, exp.ratio_lambda))?;
    verdicts.push(Verdict { stage: "ratio".into(), pass: ratio.verdict });
    w.json("ratio.json", &ratio)?;
    lap("ratio", &mut timings);

    let n = cfg.lambda_set.n as f64;
    let gamma = exp.gamma.unwrap_or((1.0 / cfg.toy.delta).ln());
    let gron = gronwall_conditions(&GronwallInputs {
        n_gen: cfg.lambda_set.n,
        lambda: exp.lambdas.iter().copied().fold(2.0, f64::max),
        epsilon: exp.epsilon,
        big_l: choice.big_l,
        theta: res.theta,
        k_time: orbit.t0 / (gamma * n * n),
        gamma,
        c0: exp.c0,
    });
    w.json("gronwall.json", &gron)?;

    if cfg.is_power_kind() {
        let plan = plan_strong_regime(&StrongRegimeInputs {
            s: exp.s,
            tau: cfg.frequency.approx.tau,
            s0: cfg.potential.s0,
            epsilon: exp.epsilon,
            n_gen: cfg.lambda_set.n,
            mu: exp.mu,
            r: prep.unscaled.r_empirical.max(1.0),
            omega: prep.freq.value,
            q: Some(choice.convergent.q as f64),
        });
        match plan {
            Ok(p) => w.json("plan_strong.json", &p)?,
            Err(e) => w.json("plan_strong.json", &serde_json::json!({ "stage": "plan_strong", "feasible": false, "reason": e.to_string() }))?,
        }
    }
    lap("reports", &mut timings);

    let manifest = RunManifest {
        config_hash: sha256_hex(cfg.canonical_json().as_bytes()),
        seeds: vec![
            ("lambda_set".into(), cfg.lambda_set.seed),
            ("potential".into(), cfg.potential.seed),
            ("experiment".into(), exp.seed),
            ("normal_form".into(), exp.nf_seed),
        ],
        versions: vec![("nls-cascade".into(), env!("CARGO_PKG_VERSION").into())],
        outputs: w.outputs,
        verdicts,
    };
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    std::fs::write(out_dir.join("manifest.json"), text)?;
    let timings = Timings { stages: timings };
    std::fs::write(out_dir.join("timings.json"), serde_json::to_string_pretty(&timings)? + "\n")?;
    Ok((manifest, timings))
}
