//! The nearest-neighbour toy system for generation amplitudes, its invariants,
//! the explicit two-mode slider and a shooting search for cascade orbits.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lambda_set::PlacedSet;
use crate::lattice::FourierState;
use crate::ode::{as_complex, as_complex_mut, to_real, Control, Dopri5, OdeSystem, Trajectory};
use crate::scalar::{kahan_sum, Real};

/// ḃ_i = −i b_i² b̄_i + 2i b̄_i (b_{i−1}² + b_{i+1}²) with b_0 = b_{N+1} = 0.
pub fn field<T: Real>(b: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut out = vec![Complex::new(T::zero(), T::zero()); b.len()];
    field_into(b, &mut out);
    out
}

fn field_into<T: Real>(b: &[Complex<T>], out: &mut [Complex<T>]) {
    let n = b.len();
    let i = Complex::new(T::zero(), T::one());
    let two = T::lit(2.0);
    for k in 0..n {
        let left = if k > 0 { b[k - 1] * b[k - 1] } else { Complex::new(T::zero(), T::zero()) };
        let right = if k + 1 < n { b[k + 1] * b[k + 1] } else { Complex::new(T::zero(), T::zero()) };
        let c = b[k].conj();
        out[k] = -i * b[k] * b[k] * c + i * c * (left + right) * two;
    }
}

pub fn toy_mass<T: Real>(b: &[Complex<T>]) -> T {
    kahan_sum(b.iter().map(|z| z.norm_sqr()))
}

/// h = ½Σ|b_i|⁴ − Σ_i (b̄_i² b_{i+1}² + b_i² b̄_{i+1}²); the field is ḃ = −i ∂h/∂b̄.
pub fn toy_energy<T: Real>(b: &[Complex<T>]) -> T {
    let quartic = kahan_sum(b.iter().map(|z| z.norm_sqr() * z.norm_sqr())) * T::lit(0.5);
    let coupling = kahan_sum(b.windows(2).map(|w| {
        let x = w[0].conj() * w[0].conj() * w[1] * w[1];
        x.re + x.re
    }));
    quartic - coupling
}

/// Fraction of the mass carried by mode `i` (0-based).
pub fn mass_fraction<T: Real>(b: &[Complex<T>], i: usize) -> T {
    b[i].norm_sqr() / toy_mass(b)
}

struct ToySystem {
    n: usize,
}

impl<T: Real> OdeSystem<T> for ToySystem {
    fn dim(&self) -> usize {
        2 * self.n
    }
    fn rhs(&self, _t: T, y: &[T], dy: &mut [T]) {
        field_into(as_complex(y), as_complex_mut(dy));
    }
}

/// Dense toy trajectory.
#[derive(Clone, Debug)]
pub struct ToyTrajectory<T: Real = f64> {
    pub n: usize,
    pub traj: Trajectory<T>,
}

impl<T: Real> ToyTrajectory<T> {
    pub fn eval(&self, t: T) -> Vec<Complex<T>> {
        as_complex(&self.traj.eval(t)).to_vec()
    }

    pub fn t_end(&self) -> T {
        self.traj.t_end
    }

    pub fn samples(&self) -> Vec<(T, Vec<Complex<T>>)> {
        self.traj.samples().into_iter().map(|(t, y)| (t, as_complex(&y).to_vec())).collect()
    }
}

/// Internal step-control tolerance used for a requested accuracy `tol`.
fn controller<T: Real>(tol: T) -> Dopri5<T> {
    let t = tol * T::lit(0.02);
    Dopri5::new(t, t)
}

/// Integrates the toy system on [0, t_end].
pub fn integrate<T: Real>(b0: &[Complex<T>], t_end: T, tol: T) -> Result<ToyTrajectory<T>> {
    let (lo, hi) = (T::lit(1e-13), T::lit(1e-6));
    if !(tol >= lo && tol <= hi) {
        return invalid(format!("tolerance must lie in [1e-13, 1e-6], got {tol}"));
    }
    if b0.is_empty() {
        return invalid("toy state must have at least one mode");
    }
    let sys = ToySystem { n: b0.len() };
    let traj = controller(tol).integrate(&sys, T::zero(), &to_real(b0), t_end)?;
    Ok(ToyTrajectory { n: b0.len(), traj })
}

/// ρ = e^{−2πi/3}.
pub fn slider_rho<T: Real>() -> Complex<T> {
    let a = -T::lit(2.0) * T::PI() / T::lit(3.0);
    Complex::new(a.cos(), a.sin())
}

/// Explicit heteroclinic two-mode solution transferring all mass from the
/// first to the second mode:
/// b1 = e^{−it} ρ / √(1 + e^{2√3 t}), b2 = e^{−it} ρ² / √(1 + e^{−2√3 t}).
pub fn slider<T: Real>(t: T) -> [Complex<T>; 2] {
    let r3 = T::lit(3.0).sqrt();
    let two = T::lit(2.0);
    let rho = slider_rho::<T>();
    let ph = Complex::new(t.cos(), -t.sin());
    let a = (T::one() + (two * r3 * t).exp()).sqrt().recip();
    let b = (T::one() + (-two * r3 * t).exp()).sqrt().recip();
    [ph * rho * a, ph * rho * rho * b]
}

/// Time derivative of [`slider`] by direct differentiation of the closed form.
pub fn slider_derivative<T: Real>(t: T) -> [Complex<T>; 2] {
    let r3 = T::lit(3.0).sqrt();
    let two = T::lit(2.0);
    let i = Complex::new(T::zero(), T::one());
    let [b1, b2] = slider(t);
    let e = (two * r3 * t).exp();
    let em = (-two * r3 * t).exp();
    let d1 = -r3 * e / (T::one() + e);
    let d2 = r3 * em / (T::one() + em);
    [b1 * (-i + d1), b2 * (-i + d2)]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeConfig {
    /// Initial mass fraction moved from mode 3 onto mode 4 along the slider.
    pub eps: f64,
    /// Amplitude of the seed placed on each later mode.
    pub seed_amp: f64,
    /// Number of trial phases per junction.
    pub phase_grid: usize,
    /// Total number of trial integrations allowed.
    pub budget: usize,
    pub tol: f64,
    /// Time allowed for each trial beyond the previous arrival.
    pub stage_window: f64,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self { eps: 1e-2, seed_amp: 1e-2, phase_grid: 48, budget: 400, tol: 1e-10, stage_window: 60.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CascadeOrbit {
    pub n: usize,
    pub delta: f64,
    pub initial: Vec<Complex<f64>>,
    pub t0: f64,
    /// Mass fraction on mode 3 at t = 0.
    pub frac_start: f64,
    /// Mass fraction on mode N−1 at T₀.
    pub frac_end: f64,
    pub seed_phases: Vec<f64>,
    pub stage_arrivals: Vec<f64>,
    pub integrations: usize,
    /// ln(1 − frac_end) / ln δ.
    pub sigma_toy: f64,
    #[serde(skip)]
    pub trajectory: Option<ToyTrajectory<f64>>,
}

impl CascadeOrbit {
    pub fn trajectory(&self) -> &ToyTrajectory<f64> {
        self.trajectory.as_ref().expect("orbit carries its trajectory")
    }
}

fn initial_state(n: usize, cfg: &CascadeConfig, phases: &[f64]) -> Vec<Complex<f64>> {
    let s0 = -(1.0 / (cfg.eps * cfg.eps) - 1.0).ln() / (2.0 * 3f64.sqrt());
    let mut b = vec![Complex::new(0.0, 0.0); n];
    let [b3, b4] = slider(s0);
    b[2] = b3;
    b[3] = b4;
    for (k, p) in phases.iter().enumerate() {
        b[4 + k] = Complex::from_polar(cfg.seed_amp, *p);
    }
    b
}

struct Arrival {
    time: Option<f64>,
    peak: f64,
}

/// Integrates until the mass fraction on `target` first reaches `level`
/// (crossing located on the dense output) or until `t_max`.
fn first_arrival(b0: &[Complex<f64>], target: usize, level: f64, t_max: f64, tol: f64) -> Result<(Arrival, Option<ToyTrajectory<f64>>)> {
    let sys = ToySystem { n: b0.len() };
    let frac = |y: &[f64]| mass_fraction(as_complex(y), target);
    let mut peak: f64 = frac(&to_real(b0));
    let mut hit = None;
    let mut segments = Vec::new();
    controller(tol).integrate_observed(&sys, 0.0, &to_real(b0), t_max, |seg| {
        segments.push(seg.clone());
        let f = frac(&seg.end_state());
        peak = peak.max(f);
        if f >= level {
            let (mut lo, mut hi) = (seg.t0, seg.t1());
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if frac(&seg.eval(mid)) >= level {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hit = Some(hi);
            return Control::Stop;
        }
        Control::Continue
    })?;
    let traj = hit.map(|t_hit| {
        let last = segments.last().unwrap();
        let y_end = last.eval(t_hit);
        ToyTrajectory {
            n: b0.len(),
            traj: Trajectory { segments, t_start: 0.0, y_start: to_real(b0), t_end: t_hit, y_end, stats: Default::default() },
        }
    });
    Ok((Arrival { time: hit, peak }, traj))
}

/// Stage-wise shooting for an orbit moving at least 1−δ of the mass from
/// mode 3 to mode N−1. The orbit starts on the slider between modes 3 and 4
/// with mass fraction ε² on mode 4; for each later junction the phase of a
/// small seed on the next mode is chosen from a grid so that the target mode
/// is reached earliest.
pub fn find_cascade(n: usize, delta: f64, cfg: &CascadeConfig) -> Result<CascadeOrbit> {
    if !(5..=9).contains(&n) {
        return invalid(format!("cascade search needs 5 <= N <= 9, got {n}"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return invalid(format!("delta must lie in (0, 1), got {delta}"));
    }
    if !(cfg.eps > 0.0 && cfg.eps * cfg.eps <= delta) {
        return invalid("eps must satisfy 0 < eps² <= delta");
    }
    let level = 1.0 - delta;
    let mut phases: Vec<f64> = Vec::new();
    let mut arrivals = Vec::new();
    let mut integrations = 0;
    let mut prev_arrival = 0.0;
    for target in 4..n - 1 {
        let mut best: Option<(f64, f64, f64)> = None;
        for g in 0..cfg.phase_grid {
            if integrations >= cfg.budget {
                return Err(Error::CascadeNotFound(format!("budget of {} integrations exhausted", cfg.budget)));
            }
            integrations += 1;
            let p = 2.0 * std::f64::consts::PI * g as f64 / cfg.phase_grid as f64;
            let mut trial = phases.clone();
            trial.push(p);
            let b0 = initial_state(n, cfg, &trial);
            let (a, _) = first_arrival(&b0, target, level, prev_arrival + cfg.stage_window, cfg.tol)?;
            let score = (a.peak.min(level), -a.time.unwrap_or(f64::INFINITY));
            if best.is_none_or(|(pk, t, _)| score > (pk, t)) {
                best = Some((score.0, score.1, p));
            }
        }
        let (pk, neg_t, p) = best.unwrap();
        if pk < level || !neg_t.is_finite() {
            return Err(Error::CascadeNotFound(format!("mode {} peaked at mass fraction {pk:.4}", target + 1)));
        }
        phases.push(p);
        arrivals.push(-neg_t);
        prev_arrival = -neg_t;
    }
    let b0 = initial_state(n, cfg, &phases);
    integrations += 1;
    let (a, traj) = first_arrival(&b0, n - 2, level, prev_arrival + cfg.stage_window, cfg.tol)?;
    let (Some(t0), Some(traj)) = (a.time, traj) else {
        return Err(Error::CascadeNotFound(format!("mode {} peaked at mass fraction {:.4}", n - 1, a.peak)));
    };
    if arrivals.is_empty() {
        arrivals.push(t0);
    }
    let frac_end = mass_fraction(&traj.eval(t0), n - 2);
    Ok(CascadeOrbit {
        n,
        delta,
        frac_start: mass_fraction(&b0, 2),
        initial: b0,
        t0,
        frac_end,
        seed_phases: phases,
        stage_arrivals: arrivals,
        integrations,
        sigma_toy: (1.0 - frac_end).ln() / delta.ln(),
        trajectory: Some(traj),
    })
}

/// b^λ(t) = λ⁻¹ b(λ⁻² t).
#[derive(Clone, Copy, Debug)]
pub struct ScaledOrbit<'a, T: Real = f64> {
    pub base: &'a ToyTrajectory<T>,
    pub lambda: T,
}

pub fn scale_orbit<T: Real>(base: &ToyTrajectory<T>, lambda: T) -> Result<ScaledOrbit<'_, T>> {
    if !(lambda >= T::one()) {
        return invalid("lambda must be >= 1");
    }
    Ok(ScaledOrbit { base, lambda })
}

impl<T: Real> ScaledOrbit<'_, T> {
    pub fn eval(&self, t: T) -> Vec<Complex<T>> {
        let inv = self.lambda.recip();
        self.base.eval(t * inv * inv).into_iter().map(|z| z * inv).collect()
    }

    pub fn t_end(&self) -> T {
        self.base.t_end() * self.lambda * self.lambda
    }
}

/// Places λ⁻¹ b_i on every mode of generation i.
pub fn embed<T: Real>(b: &[Complex<T>], ps: &PlacedSet, lambda: T) -> Result<FourierState<T>> {
    if b.len() != ps.n {
        return invalid(format!("toy state has {} modes but the set has {} generations", b.len(), ps.n));
    }
    let inv = lambda.recip();
    let mut st = FourierState::new();
    for (g, modes) in ps.generations.iter().enumerate() {
        for m in modes {
            st.amp.insert(*m, b[g] * inv);
        }
    }
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn field_examples() {
        let mut e3 = vec![c(0.0, 0.0); 5];
        e3[2] = c(1.0, 0.0);
        let f = field(&e3);
        assert_eq!(f[2], c(0.0, -1.0));
        assert_eq!(f[1], c(0.0, 0.0));
        assert_eq!(f[3], c(0.0, 0.0));
        assert!(field(&[c(0.0, 0.0); 4]).iter().all(|z| *z == c(0.0, 0.0)));
        let f = field(&[c(1.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(f, vec![c(0.0, 1.0), c(0.0, 1.0)]);
    }

    #[test]
    fn energy_gradient_reproduces_field() {
        let b = vec![c(0.3, -0.2), c(0.1, 0.5), c(-0.4, 0.2), c(0.25, 0.05)];
        let f = field(&b);
        let h = 1e-6;
        for k in 0..b.len() {
            let d = |dz: Complex<f64>| {
                let mut p = b.clone();
                p[k] += dz;
                let mut m = b.clone();
                m[k] -= dz;
                (toy_energy(&p) - toy_energy(&m)) / (2.0 * h)
            };
            let (dx, dy) = (d(c(h, 0.0)), d(c(0.0, h)));
            let dbar = c(0.5 * dx, 0.5 * dy);
            let expect = c(0.0, -1.0) * dbar;
            assert!((expect - f[k]).norm() < 1e-8, "mode {k}");
        }
    }

    #[test]
    fn single_mode_rotates() {
        let b0 = vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)];
        let tr = integrate(&b0, 3.0, 1e-10).unwrap();
        let b = tr.eval(3.0);
        assert!((b[1] - Complex::from_polar(1.0, -3.0)).norm() < 1e-9);
        assert!(b[0].norm() == 0.0 && b[2].norm() == 0.0);
    }

    #[test]
    fn slider_satisfies_the_field() {
        for i in -40..=40 {
            let t = i as f64 * 0.1;
            let [b1, b2] = slider(t);
            let d = slider_derivative(t);
            let f = field(&[b1, b2]);
            assert!((f[0] - d[0]).norm() < 1e-12 && (f[1] - d[1]).norm() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn tolerance_range_enforced() {
        assert!(integrate(&[c(1.0, 0.0)], 1.0, 1e-3).is_err());
        assert!(integrate(&[c(1.0, 0.0)], 1.0, 1e-15).is_err());
    }

    #[test]
    fn bad_delta_rejected() {
        assert!(find_cascade(5, 1.0, &CascadeConfig::default()).is_err());
        assert!(find_cascade(4, 0.1, &CascadeConfig::default()).is_err());
    }

    #[test]
    fn scaling_single_mode() {
        let tr = integrate(&[c(1.0, 0.0)], 2.0, 1e-11).unwrap();
        let s = scale_orbit(&tr, 2.0).unwrap();
        let t = 5.0;
        assert!((s.eval(t)[0] - Complex::from_polar(0.5, -t / 4.0)).norm() < 1e-9);
        let one = scale_orbit(&tr, 1.0).unwrap();
        assert_eq!(one.eval(1.3), tr.eval(1.3));
    }

    #[test]
    fn embedding_counts() {
        use crate::lattice::Mode;
        let ps = PlacedSet::from_generations(vec![vec![Mode::new(0, 0), Mode::new(2, 2)], vec![Mode::new(2, 0), Mode::new(0, 2)]], 1, 1).unwrap();
        let st = embed(&[c(1.0, 0.0), c(0.0, 0.0)], &ps, 2.0).unwrap();
        assert_eq!(st.len(), 4);
        assert!((st.l1() - 1.0).abs() < 1e-15);
        let mut e3 = vec![c(0.0, 0.0); 3];
        e3[2] = c(1.0, 0.0);
        assert!(embed(&e3, &ps, 1.0).is_err());
    }
}
