use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nls_cascade::config::Config;
use nls_cascade::diophantine::{
    big_l, certify, convergents, error_upper_bound, numerator_bracket, synthesize, ApproxFunction, ContinuedFraction,
};
use nls_cascade::lambda_set::{build_genealogy, place, scale, verify_properties, LambdaFile, PlacedSet};
use nls_cascade::lattice::{Frequency, PotentialSpec};
use nls_cascade::nls_sim::{
    nls_series, plan_strong_regime, shadow_sweep, sobolev_ratio_experiment, Instance, StrongRegimeInputs, Truncation,
    TruncationSpec,
};
use nls_cascade::normal_form::{eta_sweep, geometric_grid, MonomialTable, TransformSettings};
use nls_cascade::pipeline::{build_instance_truncation, prepare, prepare_frequency, run_pipeline, Prepared};
use nls_cascade::resonance::{resonance_report, ResonanceInputs};
use nls_cascade::toy_model::{find_cascade, integrate, slider, CascadeConfig, CascadeOrbit};
use nls_cascade::{Error, Result, C64};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "cascade", version, about = "Energy cascades for the cubic NLS on irrational tori at desk scale")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print convergents p/q of ω with error bounds and certification.
    Convergents {
        /// Continued fraction `a0;a1,a2,...` (append `...` if it continues), or `golden`, `sqrt2`.
        #[arg(long)]
        omega: String,
        /// Number of convergents.
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[command(flatten)]
        approx: ApproxArgs,
    },
    /// Build a continued fraction whose convergents are ψ-convergents.
    Synthesize {
        /// Exponent τ of ψ(q) = c/q^{1+τ}.
        #[arg(long)]
        tau: f64,
        /// Constant c of ψ(q) = c/q^{1+τ}.
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of digits.
        #[arg(long, default_value_t = 6)]
        depth: usize,
    },
    /// Choose the convergent that fixes the lattice scaling of a config.
    SelectScaling {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Place and scale a Λ set and write it as JSON.
    BuildLambda {
        /// Number of generations.
        #[arg(long = "N")]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Half-width of the placement box.
        #[arg(long = "box", default_value_t = 50)]
        box_size: i64,
        /// Placement attempts before giving up.
        #[arg(long, default_value_t = 200)]
        retries: usize,
        /// Numerator of the scaling convergent.
        #[arg(long, default_value_t = 1)]
        p: i128,
        /// Denominator of the scaling convergent.
        #[arg(long, default_value_t = 1)]
        q: i128,
        #[command(flatten)]
        out: OutArg,
    },
    /// Check the Λ properties of a Λ file by exhaustive scan.
    VerifyLambda {
        /// Λ file written by build-lambda.
        file: PathBuf,
    },
    /// Enumerate small divisors and the class-0 resonance defect of a Λ set.
    ResonanceReport {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Enumeration box for the divisor search (defaults to the exhaustive bound).
        #[arg(long = "box")]
        box_radius: Option<f64>,
        #[command(flatten)]
        approx: ApproxArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Normal-form checks: homological residual and η-sweeps of Γ and the remainder.
    NfCheck {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Completion rounds around Λ.
        #[arg(long, default_value_t = 0)]
        depth: usize,
        /// Drop completions with |n| above this.
        #[arg(long)]
        truncation_radius: Option<f64>,
        /// Drop completions whose generating divisor exceeds this.
        #[arg(long)]
        max_divisor: Option<f64>,
        /// Geometric η grid `lo:hi:steps`.
        #[arg(long, default_value = "0.015625:0.125:4")]
        eta_sweep: String,
        /// Seed of the sweep direction.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Integrate the toy model and write the trajectory as CSV.
    ToyRun {
        /// Number of generations.
        #[arg(long = "N")]
        n: usize,
        /// JSON array of [re, im] pairs, or preset `slider` / `cascade`.
        #[arg(long, default_value = "cascade")]
        initial: String,
        /// Final time (defaults to T₀ of the cascade preset, else 10).
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Number of output rows after t = 0.
        #[arg(long, default_value_t = 400)]
        samples: usize,
        #[command(flatten)]
        out: OutArg,
    },
    /// Search for a toy-model cascade orbit.
    CascadeFind {
        #[arg(long = "N")]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        /// Maximal number of trial integrations.
        #[arg(long, default_value_t = 400)]
        budget: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Integrate the truncated NLS from the embedded orbit and write a CSV time series.
    NlsRun {
        #[command(flatten)]
        config: ConfigArg,
        /// Scale λ (defaults to the config ratio λ).
        #[arg(long)]
        lambda: Option<f64>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Distance between the NLS flow and the rescaled orbit over a λ sweep.
    Shadow {
        #[command(flatten)]
        config: ConfigArg,
        /// Comma-separated scales (defaults to the config list).
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Sobolev norm growth ratio over one cascade.
    Ratio {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Parameter plan for the strong-regime construction.
    PlanStrong {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Run every stage and write reports plus a manifest into a directory.
    Pipeline {
        #[command(flatten)]
        config: ConfigArg,
        /// Output directory.
        #[arg(long, default_value = "run")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ConfigArg {
    /// Preset name (`desk-n5`, `desk-n6`, `square-case`) or path to a TOML config.
    #[arg(long)]
    config: String,
}

#[derive(Args)]
struct OutArg {
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ApproxArgs {
    /// τ of the power approximation kind; the log kind is used when omitted.
    #[arg(long)]
    tau: Option<f64>,
    /// c of the power approximation kind.
    #[arg(long = "psi-c", default_value_t = 1.0)]
    psi_c: f64,
}

#[derive(Args)]
struct InstanceArgs {
    /// Λ file written by build-lambda.
    #[arg(long)]
    lambda: PathBuf,
    /// Continued fraction of ω, or `golden`, `sqrt2`.
    #[arg(long)]
    omega: String,
    /// `zero`, `decay:AMPLITUDE:S0:SEED`, or a JSON/TOML potential file.
    #[arg(long, default_value = "zero")]
    potential: String,
}

impl ApproxArgs {
    fn function(&self) -> Result<ApproxFunction> {
        match self.tau {
            Some(tau) => ApproxFunction::power(self.psi_c, tau),
            None => Ok(ApproxFunction::log()),
        }
    }
}

impl OutArg {
    fn emit_bytes(&self, bytes: &[u8]) -> Result<()> {
        match &self.out {
            Some(p) => fs::write(p, bytes)?,
            None => std::io::stdout().write_all(bytes)?,
        }
        Ok(())
    }

    fn json<T: Serialize>(&self, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.emit_bytes(text.as_bytes())
    }

    fn csv(&self, header: Vec<String>, rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fail = |e: csv::Error| Error::InvalidInput(e.to_string());
        w.write_record(&header).map_err(fail)?;
        for r in rows {
            w.write_record(r.iter().map(|x| format!("{x:e}"))).map_err(fail)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
        self.emit_bytes(&bytes)
    }
}

impl InstanceArgs {
    fn load(&self) -> Result<(PlacedSet, Frequency, PotentialSpec)> {
        let file: LambdaFile = serde_json::from_str(&fs::read_to_string(&self.lambda)?)?;
        let ps = file.into_placed()?;
        let freq = Frequency::from_cf(&ContinuedFraction::parse(&self.omega)?);
        Ok((ps, freq, parse_potential(&self.potential)?))
    }
}

fn parse_potential(spec: &str) -> Result<PotentialSpec> {
    if spec == "zero" {
        return Ok(PotentialSpec::zero());
    }
    if let Some(rest) = spec.strip_prefix("decay:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let bad = || Error::InvalidInput(format!("potential `{spec}`: expected decay:AMPLITUDE:S0:SEED"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let amp = parts[0].parse().map_err(|_| bad())?;
        let s0 = parts[1].parse().map_err(|_| bad())?;
        let seed = parts[2].parse().map_err(|_| bad())?;
        let v = PotentialSpec::decay(amp, s0, seed);
        v.validate()?;
        return Ok(v);
    }
    let text = fs::read_to_string(spec)?;
    let v: PotentialSpec = if spec.ends_with(".toml") {
        toml::from_str(&text).map_err(|e| Error::ConfigError(e.to_string()))?
    } else {
        serde_json::from_str(&text)?
    };
    v.validate()?;
    Ok(v)
}

#[derive(Serialize)]
struct ConvergentRow {
    p: i128,
    q: i128,
    error_bound: f64,
    certified: bool,
    numerator_bracket: bool,
}

fn convergent_rows(omega: &ContinuedFraction, count: usize, psi: &ApproxFunction) -> Result<Vec<ConvergentRow>> {
    Ok(convergents(omega, count)?
        .into_iter()
        .map(|c| ConvergentRow {
            p: c.p,
            q: c.q,
            error_bound: error_upper_bound(omega, &c),
            certified: certify(omega, &c, psi),
            numerator_bracket: numerator_bracket(omega, &c),
        })
        .collect())
}

fn parse_sweep(s: &str) -> Result<(f64, f64, usize)> {
    let bad = || Error::InvalidInput(format!("eta sweep `{s}`: expected lo:hi:steps"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    Ok((parts[0].parse().map_err(|_| bad())?, parts[1].parse().map_err(|_| bad())?, parts[2].parse().map_err(|_| bad())?))
}

struct Loaded {
    cfg: Config,
    prep: Prepared,
    trunc: Truncation,
    orbit: CascadeOrbit,
}

impl Loaded {
    fn new(arg: &ConfigArg) -> Result<Self> {
        let cfg = Config::load(&arg.config)?;
        let prep = prepare(&cfg)?;
        let trunc = build_instance_truncation(&cfg, &prep)?;
        let orbit = find_cascade(cfg.lambda_set.n, cfg.toy.delta, &cfg.toy.cascade())?;
        Ok(Self { cfg, prep, trunc, orbit })
    }

    fn instance(&self) -> Instance<'_> {
        Instance { ps: &self.prep.ps, trunc: &self.trunc, orbit: &self.orbit, big_l: self.prep.frequency.choice.big_l }
    }
}

fn nf_passes(sweep_slopes: (f64, f64), table: &MonomialTable) -> bool {
    let (disp, rem) = sweep_slopes;
    if table.class_counts()[1] == 0 {
        return true;
    }
    (disp - 3.0).abs() <= 0.1 && rem >= 4.7
}

fn toy_initial(n: usize, spec: &str) -> Result<(Vec<C64>, Option<f64>)> {
    match spec {
        "cascade" => {
            let orbit = find_cascade(n, 0.1, &CascadeConfig::default())?;
            Ok((orbit.initial, Some(orbit.t0)))
        }
        "slider" => {
            let mut b = vec![C64::new(0.0, 0.0); n];
            let [b1, b2] = slider(-10.0);
            b[0] = b1;
            if n > 1 {
                b[1] = b2;
            }
            Ok((b, None))
        }
        path => {
            let b: Vec<C64> = serde_json::from_str(&fs::read_to_string(path)?)?;
            if b.len() != n {
                return Err(Error::InvalidInput(format!("initial state has {} modes, expected {n}", b.len())));
            }
            Ok((b, None))
        }
    }
}

/// Runs a subcommand; `Ok(false)` means a verdict failed.
fn run(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Convergents { omega, count, approx } => {
            let omega = ContinuedFraction::parse(&omega)?;
            let rows = convergent_rows(&omega, count, &approx.function()?)?;
            OutArg { out: None }.json(&rows)?;
            Ok(true)
        }
        Command::Synthesize { tau, c, seed, depth } => {
            let psi = ApproxFunction::power(c, tau)?;
            let omega = synthesize(&psi, seed, depth)?;
            let rows = convergent_rows(&omega, omega.digits.len(), &psi)?;
            let pass = rows.iter().all(|r| r.certified);
            OutArg { out: None }.json(&serde_json::json!({ "digits": omega.digits, "value": omega.value, "convergents": rows }))?;
            Ok(pass)
        }
        Command::SelectScaling { config } => {
            let cfg = Config::load(&config.config)?;
            let ps = place(&build_genealogy(cfg.lambda_set.n)?, cfg.lambda_set.seed, cfg.lambda_set.box_size, cfg.lambda_set.retries)?;
            let (_, _, report) = prepare_frequency(&cfg, ps.r_empirical)?;
            OutArg { out: None }.json(&report)?;
            Ok(true)
        }
        Command::BuildLambda { n, seed, box_size, retries, p, q, out } => {
            let unscaled = place(&build_genealogy(n)?, seed, box_size, retries)?;
            let ps = scale(&unscaled, &nls_cascade::diophantine::Convergent { p, q })?;
            out.json(&LambdaFile::from(&ps))?;
            Ok(true)
        }
        Command::VerifyLambda { file } => {
            let lf: LambdaFile = serde_json::from_str(&fs::read_to_string(&file)?)?;
            let report = verify_properties(&lf.into_placed()?);
            OutArg { out: None }.json(&report)?;
            Ok(report.passed())
        }
        Command::ResonanceReport { instance, box_radius, approx, out } => {
            let (ps, freq, pot) = instance.load()?;
            let psi_q = approx.function()?.psi(ps.q as f64);
            let report =
                resonance_report(&ResonanceInputs { ps: &ps, freq: &freq, pot: &pot, psi_q, box_radius: box_radius.unwrap_or(f64::INFINITY) })?;
            out.json(&report)?;
            Ok(report.l1.min_abs >= report.big_l)
        }
        Command::NfCheck { instance, depth, truncation_radius, max_divisor, eta_sweep: sweep, seed, out } => {
            let (ps, freq, pot) = instance.load()?;
            let spec = TruncationSpec { depth, radius: truncation_radius, max_divisor };
            let trunc = nls_cascade::nls_sim::build_truncation(&ps, &spec, &freq, &pot)?;
            let (lo, hi, steps) = parse_sweep(&sweep)?;
            let l = big_l(freq.value, ps.q as i128, pot.sup_abs());
            let set = TransformSettings { eta0: hi, ..Default::default() };
            let report = eta_sweep(&ps, &trunc.table, l, &geometric_grid(lo, hi, steps), seed, &set)?;
            out.json(&report)?;
            Ok(nf_passes((report.displacement_slope, report.remainder_slope), &trunc.table))
        }
        Command::ToyRun { n, initial, t_end, tol, samples, out } => {
            let (b0, t0) = toy_initial(n, &initial)?;
            let t_end = t_end.or(t0).unwrap_or(10.0);
            let traj = integrate(&b0, t_end, tol)?;
            let mut header = vec!["t".to_string()];
            for i in 1..=n {
                header.push(format!("re{i}"));
                header.push(format!("im{i}"));
            }
            let rows = (0..=samples).map(|k| {
                let t = t_end * k as f64 / samples.max(1) as f64;
                let mut row = vec![t];
                row.extend(traj.eval(t).iter().flat_map(|c| [c.re, c.im]));
                row
            });
            out.csv(header, rows)?;
            Ok(true)
        }
        Command::CascadeFind { n, delta, budget, tol, out } => {
            let cfg = CascadeConfig { budget, tol, ..Default::default() };
            let orbit = find_cascade(n, delta, &cfg)?;
            out.json(&orbit)?;
            Ok(orbit.frac_start >= 1.0 - delta && orbit.frac_end >= 1.0 - delta)
        }
        Command::NlsRun { config, lambda, out } => {
            let l = Loaded::new(&config)?;
            let lambda = lambda.unwrap_or(l.cfg.experiment.ratio_lambda);
            let (rows, _) = nls_series(&l.cfg.experiment.settings(), &l.instance(), lambda)?;
            let n = l.cfg.lambda_set.n;
            let mut header: Vec<String> = ["t", "mass", "hs_sq"].iter().map(|s| s.to_string()).collect();
            header.extend((1..=n).map(|g| format!("gen{g}")));
            header.push("outside".into());
            let rows = rows.into_iter().map(|r| {
                let mut v = vec![r.t, r.mass, r.hs_sq];
                v.extend(r.fractions);
                v.push(r.outside);
                v
            });
            out.csv(header, rows)?;
            Ok(true)
        }
        Command::Shadow { config, lambdas, out } => {
            let l = Loaded::new(&config)?;
            let lambdas = lambdas.unwrap_or_else(|| l.cfg.experiment.lambdas.clone());
            let sweep = shadow_sweep(&l.cfg.experiment.settings(), &l.instance(), &lambdas)?;
            out.json(&sweep)?;
            Ok(sweep.verdict)
        }
        Command::Ratio { config, out } => {
            let l = Loaded::new(&config)?;
            let report = sobolev_ratio_experiment(&l.cfg.experiment.settings(), &l.instance(), l.cfg.experiment.ratio_lambda)?;
            out.json(&report)?;
            Ok(report.verdict)
        }
        Command::PlanStrong { config, out } => {
            let cfg = Config::load(&config.config)?;
            if !cfg.is_power_kind() {
                return Err(Error::ConfigError("plan-strong needs a power-kind approximation function".into()));
            }
            let prep = prepare(&cfg)?;
            let exp = &cfg.experiment;
            let inputs = StrongRegimeInputs {
                s: exp.s,
                tau: cfg.frequency.approx.tau,
                s0: cfg.potential.s0,
                epsilon: exp.epsilon,
                n_gen: cfg.lambda_set.n,
                mu: exp.mu,
                r: prep.unscaled.r_empirical.max(1.0),
                omega: prep.freq.value,
                q: Some(prep.frequency.choice.convergent.q as f64),
            };
            match plan_strong_regime(&inputs) {
                Ok(plan) => {
                    out.json(&plan)?;
                    Ok(true)
                }
                Err(Error::InfeasibleRegime(reason)) => {
                    out.json(&serde_json::json!({ "stage": "plan_strong", "feasible": false, "reason": reason }))?;
                    Ok(false)
                }
                Err(e) => Err(e),
            }
        }
        Command::Pipeline { config, out } => {
            let cfg = Config::load(&config.config)?;
            let (manifest, _) = run_pipeline(&cfg, Path::new(&out))?;
            for v in &manifest.verdicts {
                println!("{:<10} {}", v.stage, if v.pass { "pass" } else { "FAIL" });
            }
            Ok(manifest.passed())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
