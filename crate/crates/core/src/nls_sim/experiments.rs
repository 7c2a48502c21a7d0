use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{RotatingSystem, Truncation, C64};
use crate::error::{invalid, Result};
use crate::lambda_set::{stats, PlacedSet};
use crate::normal_form::{build_generator, l1, l1_diff, loglog_slope, transform, TransformSettings};
use crate::ode::{as_complex, to_real, Control, Dopri5, Stats};
use crate::toy_model::{embed, integrate, CascadeOrbit};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Initial distance λ⁻² 𝙻^{−1/2}.
    #[default]
    Weak,
    /// Initial distance λ^{−(1+2ε)}.
    Strong,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSettings {
    pub epsilon: f64,
    /// Sobolev index of the growth ratio.
    pub s: f64,
    pub tol: f64,
    /// Number of uniformly spaced report times.
    pub samples: usize,
    /// Initial perturbation as a multiple of the admissible distance.
    pub perturbation: f64,
    pub regime: Regime,
    pub seed: u64,
    /// Interaction classes kept in the flow; all when absent.
    pub classes: Option<Vec<u8>>,
    /// Map the embedded toy state through Γ before integrating.
    pub normal_form: bool,
    /// Radius of the ball on which Γ is applied.
    pub nf_radius: f64,
    pub lambdas: Vec<f64>,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            s: 1.5,
            tol: 1e-10,
            samples: 200,
            perturbation: 1.0,
            regime: Regime::Weak,
            seed: 0,
            classes: None,
            normal_form: true,
            nf_radius: 0.125,
            lambdas: vec![8.0, 16.0, 32.0, 64.0],
        }
    }
}

/// Everything an experiment needs about the instance.
pub struct Instance<'a> {
    pub ps: &'a PlacedSet,
    pub trunc: &'a Truncation,
    pub orbit: &'a CascadeOrbit,
    pub big_l: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowReport {
    pub stage: String,
    pub lambda: f64,
    pub n: usize,
    pub epsilon: f64,
    pub t_end: f64,
    pub modes: usize,
    pub interactions: usize,
    pub max_divisor: f64,
    pub admissible_initial: f64,
    pub initial_distance: f64,
    pub precondition_ok: bool,
    pub sup_distance: f64,
    pub threshold: f64,
    pub bootstrap: f64,
    pub verdict: bool,
    pub steps: usize,
    pub series: Vec<(f64, f64)>,
}

fn admissible_distance(cfg: &ExperimentSettings, lambda: f64, big_l: f64) -> f64 {
    match cfg.regime {
        Regime::Weak => lambda.powi(-2) / big_l.sqrt(),
        Regime::Strong => lambda.powf(-(1.0 + 2.0 * cfg.epsilon)),
    }
}

/// Seeded complex vector on all truncation modes with the given ℓ¹ norm.
fn perturbation(dim: usize, size: f64, seed: u64, stream: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut v: Vec<C64> = (0..dim).map(|_| Complex::from_polar(rng.gen_range(0.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU))).collect();
    let n = l1(&v);
    if n > 0.0 {
        v.iter_mut().for_each(|z| *z *= size / n);
    }
    v
}

fn scaled_embedding(inst: &Instance, lambda: f64, t: f64) -> Result<Vec<C64>> {
    let b = inst.orbit.trajectory().eval(t / (lambda * lambda));
    inst.trunc.dense(&embed(&b, inst.ps, lambda)?)
}

fn controller(tol: f64, r0: &[C64]) -> Dopri5<f64> {
    let scale = (l1(r0) / r0.len().max(1) as f64).max(f64::MIN_POSITIVE);
    Dopri5::new(tol, tol * scale)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 2.0) {
        return invalid(format!("λ must be at least 2, got {lambda}"));
    }
    Ok(())
}

/// Runs the rotating-frame flow from the scaled toy orbit plus an admissible
/// perturbation and records the ℓ¹ distance to the scaled orbit on [0, λ²T₀].
pub fn shadow_experiment(cfg: &ExperimentSettings, inst: &Instance, lambda: f64) -> Result<ShadowReport> {
    check_lambda(lambda)?;
    let sys = RotatingSystem::with_classes(inst.trunc, cfg.classes.as_deref());
    let t_end = lambda * lambda * inst.orbit.t0;
    let base = scaled_embedding(inst, lambda, 0.0)?;
    let admissible = admissible_distance(cfg, lambda, inst.big_l);
    let size = cfg.perturbation * admissible;
    let pert = perturbation(base.len(), size, cfg.seed, lambda.to_bits());
    let r0: Vec<C64> = base.iter().zip(&pert).map(|(a, b)| a + b).collect();
    let grid: Vec<f64> = (0..=cfg.samples).map(|i| t_end * i as f64 / cfg.samples.max(1) as f64).collect();
    let mut series = Vec::with_capacity(grid.len());
    let mut next = 0;
    let mut sup: f64 = l1_diff(&r0, &base);
    let mut failure = None;
    let (_, _, st) = controller(cfg.tol, &r0).integrate_observed(&sys, 0.0, &to_real(&r0), t_end, |seg| {
        let mut record = |t: f64, y: &[f64]| match scaled_embedding(inst, lambda, t) {
            Ok(e) => {
                let d = l1_diff(as_complex(y), &e);
                sup = sup.max(d);
                Some(d)
            }
            Err(e) => {
                failure = Some(e);
                None
            }
        };
        while next < grid.len() && grid[next] <= seg.t1() {
            let t = grid[next];
            let y = if t <= seg.t0 { seg.eval(seg.t0) } else { seg.eval(t) };
            match record(t, &y) {
                Some(d) => series.push((t, d)),
                None => return Control::Stop,
            }
            next += 1;
        }
        if record(seg.t1(), &seg.end_state()).is_none() {
            return Control::Stop;
        }
        Control::Continue
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let threshold = lambda.powf(-(1.0 + cfg.epsilon));
    Ok(ShadowReport {
        stage: "shadow".into(),
        lambda,
        n: inst.ps.n,
        epsilon: cfg.epsilon,
        t_end,
        modes: inst.trunc.dim(),
        interactions: sys.table.len(),
        max_divisor: sys.max_divisor(),
        admissible_initial: admissible,
        initial_distance: l1(&pert),
        precondition_ok: cfg.perturbation <= 1.0,
        sup_distance: sup,
        threshold,
        bootstrap: 2.0 * threshold,
        verdict: sup <= threshold,
        steps: st.accepted,
        series,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowSweep {
    pub stage: String,
    pub reports: Vec<ShadowReport>,
    /// Log-log slope of the sup distance against λ.
    pub slope: f64,
    pub verdict: bool,
}

pub fn shadow_sweep(cfg: &ExperimentSettings, inst: &Instance, lambdas: &[f64]) -> Result<ShadowSweep> {
    let reports = lambdas.par_iter().map(|&l| shadow_experiment(cfg, inst, l)).collect::<Result<Vec<_>>>()?;
    let slope = if reports.len() >= 2 {
        loglog_slope(&reports.iter().map(|r| (r.lambda, r.sup_distance)).collect::<Vec<_>>())
    } else {
        f64::NAN
    };
    Ok(ShadowSweep { stage: "shadow".into(), verdict: slope <= -1.0, slope, reports })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub stage: String,
    pub lambda: f64,
    pub s: f64,
    pub t_end: f64,
    pub classes: Option<Vec<u8>>,
    pub normal_form: bool,
    /// ‖Γ(w) − w‖_{ℓ¹} of the normal-form correction applied to the initial state.
    pub nf_displacement: f64,
    pub norm0_sq: f64,
    pub norm_t_sq: f64,
    pub ratio: f64,
    /// Σ_i W_i |b_i(T₀)|² / Σ_i W_i |b_i(0)|² with W_i the weight of generation i.
    pub class0_prediction: f64,
    /// S_{N−2} / S₃.
    pub s_ratio_target: f64,
    /// S_{N−1} / S₃.
    pub s_ratio_last: f64,
    pub mass_drift: f64,
    pub verdict: bool,
}

fn hs_sq(trunc: &Truncation, z: &[C64], s: f64) -> f64 {
    crate::scalar::kahan_sum(trunc.modes().iter().zip(z).map(|(n, z)| z.norm_sqr() * n.bracket().powf(2.0 * s)))
}

/// Embeds the cascade orbit at scale λ, applies Γ, integrates the truncated flow up
/// to λ²T₀ and compares ‖z(T)‖_s² / ‖z(0)‖_s² with the generation weights.
pub fn sobolev_ratio_experiment(cfg: &ExperimentSettings, inst: &Instance, lambda: f64) -> Result<RatioReport> {
    check_lambda(lambda)?;
    let orbit = inst.orbit;
    let ps = inst.ps;
    if ps.n < 4 {
        return invalid("the ratio experiment needs at least 4 generations");
    }
    let sys = RotatingSystem::with_classes(inst.trunc, cfg.classes.as_deref());
    let t_end = lambda * lambda * orbit.t0;
    let w0 = inst.trunc.dense(&embed(&orbit.initial, ps, lambda)?)?;
    let z0 = if cfg.normal_form {
        let generator = build_generator(&inst.trunc.table, inst.big_l)?;
        let set = TransformSettings { eta0: cfg.nf_radius, ..Default::default() };
        transform(&w0, &generator, 1, &set)?
    } else {
        w0.clone()
    };
    let (_, y, _) = controller(cfg.tol, &z0).integrate_observed(&sys, 0.0, &to_real(&z0), t_end, |_| Control::Continue)?;
    let zt = as_complex(&y);
    let norm0_sq = hs_sq(inst.trunc, &z0, cfg.s);
    let norm_t_sq = hs_sq(inst.trunc, zt, cfg.s);
    let tight = integrate(&orbit.initial, orbit.t0, 1e-13)?;
    let weights: Vec<f64> = ps.generations.iter().map(|g| g.iter().map(|n| n.bracket().powf(2.0 * cfg.s)).sum()).collect();
    let weighted = |b: &[C64]| b.iter().zip(&weights).map(|(b, w)| w * b.norm_sqr()).sum::<f64>();
    let class0_prediction = weighted(&tight.eval(orbit.t0)) / weighted(&orbit.initial);
    let st = stats(ps, cfg.s);
    let n = ps.n;
    let s_ratio_target = st.ratio(n - 2, 3);
    let ratio = norm_t_sq / norm0_sq;
    Ok(RatioReport {
        stage: "ratio".into(),
        lambda,
        s: cfg.s,
        t_end,
        classes: cfg.classes.clone(),
        normal_form: cfg.normal_form,
        nf_displacement: l1_diff(&z0, &w0),
        norm0_sq,
        norm_t_sq,
        ratio,
        class0_prediction,
        s_ratio_target,
        s_ratio_last: st.ratio(n - 1, 3),
        mass_drift: (inst.trunc.mass(zt) - inst.trunc.mass(&z0)).abs(),
        verdict: ratio >= 0.25 * s_ratio_target,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t: f64,
    pub mass: f64,
    pub hs_sq: f64,
    /// Mass fraction per generation of Λ.
    pub fractions: Vec<f64>,
    /// Mass fraction outside Λ.
    pub outside: f64,
}

/// Time series of the rotating-frame flow started from the embedded orbit at scale λ.
pub fn nls_series(cfg: &ExperimentSettings, inst: &Instance, lambda: f64) -> Result<(Vec<SeriesRow>, Stats)> {
    check_lambda(lambda)?;
    let sys = RotatingSystem::with_classes(inst.trunc, cfg.classes.as_deref());
    let t_end = lambda * lambda * inst.orbit.t0;
    let r0 = scaled_embedding(inst, lambda, 0.0)?;
    let gen = inst.ps.generation_map();
    let slot: Vec<Option<usize>> = inst.trunc.modes().iter().map(|m| gen.get(m).copied()).collect();
    let row = |t: f64, z: &[C64]| {
        let mass = inst.trunc.mass(z);
        let mut fractions = vec![0.0; inst.ps.n];
        let mut outside = 0.0;
        for (z, g) in z.iter().zip(&slot) {
            match g {
                Some(g) => fractions[*g - 1] += z.norm_sqr() / mass,
                None => outside += z.norm_sqr() / mass,
            }
        }
        SeriesRow { t, mass, hs_sq: hs_sq(inst.trunc, z, cfg.s), fractions, outside }
    };
    let grid: Vec<f64> = (0..=cfg.samples).map(|i| t_end * i as f64 / cfg.samples.max(1) as f64).collect();
    let mut rows = Vec::new();
    let mut next = 0;
    let (_, _, st) = controller(cfg.tol, &r0).integrate_observed(&sys, 0.0, &to_real(&r0), t_end, |seg| {
        while next < grid.len() && grid[next] <= seg.t1() {
            let y = seg.eval(grid[next].max(seg.t0));
            rows.push(row(grid[next], as_complex(&y)));
            next += 1;
        }
        Control::Continue
    })?;
    Ok((rows, st))
}

