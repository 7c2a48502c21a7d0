//! Galerkin truncations of the gauged cubic NLS on the torus, its flow in the
//! original and in rotating coordinates, and experiments comparing the flow with
//! scaled toy orbits.

mod experiments;
mod planner;

pub use experiments::*;
pub use planner::*;

use std::collections::HashSet;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lambda_set::PlacedSet;
use crate::lattice::{linear_frequency, FourierState, Frequency, Mode, PotentialSpec};
use crate::normal_form::{build_quartic, MonomialTable, PhaseCache};
use crate::ode::{as_complex, as_complex_mut, OdeSystem};
use crate::resonance::{omega_values, Quadruple};
use crate::scalar::kahan_sum;

type C64 = Complex<f64>;

pub const MAX_TRUNCATION_MODES: usize = 400;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct TruncationSpec {
    /// Number of completion rounds, 0..=2.
    pub depth: usize,
    /// Completions with |n| above this are dropped.
    pub radius: Option<f64>,
    /// Completions whose generating quadruple has |Ω_{ω,V}| above this are dropped.
    pub max_divisor: Option<f64>,
}


#[derive(Clone, Debug)]
pub struct Truncation {
    pub spec: TruncationSpec,
    pub lambda: HashSet<Mode>,
    pub table: MonomialTable,
    /// λ_n = |n|²_ω + V_n per mode of the table index.
    pub linear: Vec<f64>,
}

/// Λ together with `depth` rounds of completions n₁ − n₂ + n₃ of triples from the
/// previous round, filtered by radius and divisor, with every momentum-closed
/// quadruple of the resulting set.
pub fn build_truncation(ps: &PlacedSet, spec: &TruncationSpec, freq: &Frequency, pot: &PotentialSpec) -> Result<Truncation> {
    if spec.depth > 2 {
        return invalid(format!("closure depth must be 0, 1 or 2, got {}", spec.depth));
    }
    let lambda = ps.mode_set();
    let mut set: Vec<Mode> = ps.modes().collect();
    set.sort();
    let mut seen: HashSet<Mode> = lambda.clone();
    let w2 = freq.value * freq.value;
    let sup_v = pot.sup_abs();
    for _ in 0..spec.depth {
        let mut added = Vec::new();
        for &a in &set {
            for &b in &set {
                if a == b {
                    continue;
                }
                for &c in &set {
                    if c == b {
                        continue;
                    }
                    let d = a - b + c;
                    if seen.contains(&d) {
                        continue;
                    }
                    if spec.radius.is_some_and(|r| d.norm() > r) {
                        continue;
                    }
                    if let Some(m) = spec.max_divisor {
                        let quad = Quadruple { n: [a, b, c, d] };
                        let (x, y) = quad.integer_parts();
                        let rough = x as f64 + w2 * y as f64;
                        if rough.abs() > 2.0 * m + 4.0 * sup_v + 1.0 {
                            continue;
                        }
                        if omega_values(&quad, freq, pot).total.abs() > m {
                            continue;
                        }
                    }
                    seen.insert(d);
                    added.push(d);
                    if seen.len() > MAX_TRUNCATION_MODES {
                        return Err(Error::CapacityExceeded(format!("truncation exceeds {MAX_TRUNCATION_MODES} modes")));
                    }
                }
            }
        }
        set.extend(added);
        set.sort();
    }
    let table = build_quartic(ps, &set, freq, pot)?;
    let linear = table.index.modes.iter().map(|n| linear_frequency(freq, pot, *n)).collect();
    Ok(Truncation { spec: *spec, lambda, table, linear })
}

impl Truncation {
    pub fn dim(&self) -> usize {
        self.table.dim()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.table.index.modes
    }

    pub fn dense(&self, z: &FourierState) -> Result<Vec<C64>> {
        self.table.index.to_dense(z)
    }

    pub fn sparse(&self, v: &[C64]) -> FourierState {
        self.table.index.to_state(v)
    }

    /// 𝓗 = Σ λ_n|z_n|² + 𝓗⁽⁴⁾.
    pub fn energy(&self, z: &[C64]) -> f64 {
        kahan_sum(z.iter().zip(&self.linear).map(|(z, l)| l * z.norm_sqr())) + self.table.energy(z)
    }

    pub fn mass(&self, z: &[C64]) -> f64 {
        kahan_sum(z.iter().map(|z| z.norm_sqr()))
    }

    /// Σ n|z_n|².
    pub fn momentum(&self, z: &[C64]) -> (f64, f64) {
        let m = self.modes();
        (
            kahan_sum(z.iter().zip(m).map(|(z, n)| n.j as f64 * z.norm_sqr())),
            kahan_sum(z.iter().zip(m).map(|(z, n)| n.k as f64 * z.norm_sqr())),
        )
    }

    /// ż = i(λ z + ∂_{z̄}𝓗⁽⁴⁾), plus 2i𝓜z when `gauged` (the flow of 𝓗 + 𝓜²).
    pub fn field_into(&self, z: &[C64], gauged: bool, out: &mut [C64]) {
        self.table.field_into(z, out);
        let extra = if gauged { 2.0 * self.mass(z) } else { 0.0 };
        for ((o, z), l) in out.iter_mut().zip(z).zip(&self.linear) {
            *o += Complex::new(0.0, l + extra) * z;
        }
    }
}

/// Time derivative of the truncated flow of 𝓗 at z.
pub fn field_h(z: &FourierState, trunc: &Truncation) -> Result<FourierState> {
    let dense = trunc.dense(z)?;
    let mut out = vec![C64::new(0.0, 0.0); dense.len()];
    trunc.field_into(&dense, false, &mut out);
    Ok(trunc.sparse(&out))
}

/// Integrates the flow of 𝓗 (or 𝓗 + 𝓜² when `gauged`) with the step controller
/// tightened so that invariants drift by at most about `tol` per unit scale.
pub fn integrate_h(trunc: &Truncation, z0: &[C64], t_end: f64, tol: f64, gauged: bool) -> Result<crate::ode::Trajectory<f64>> {
    let rtol = tol * 1e-2;
    let atol = rtol * (z0.iter().map(|z| z.norm()).sum::<f64>() / z0.len().max(1) as f64).max(f64::MIN_POSITIVE);
    crate::ode::Dopri5::new(rtol, atol).integrate(&GalerkinSystem { trunc, gauged }, 0.0, &crate::ode::to_real(z0), t_end)
}

/// Flow of 𝓗 (or 𝓗 + 𝓜²) in the original coordinates.
pub struct GalerkinSystem<'a> {
    pub trunc: &'a Truncation,
    pub gauged: bool,
}

impl OdeSystem<f64> for GalerkinSystem<'_> {
    fn dim(&self) -> usize {
        2 * self.trunc.dim()
    }
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        self.trunc.field_into(as_complex(y), self.gauged, as_complex_mut(dy));
    }
}

/// Flow in rotating coordinates r_n = e^{−iλ_n t} z_n, restricted to a sub-table.
pub struct RotatingSystem {
    pub table: MonomialTable,
    phases: PhaseCache,
}

impl RotatingSystem {
    pub fn new(table: MonomialTable) -> Self {
        let phases = PhaseCache::new(&table);
        Self { table, phases }
    }

    /// Keeps only interactions whose class is listed.
    pub fn with_classes(trunc: &Truncation, classes: Option<&[u8]>) -> Self {
        match classes {
            Some(c) => Self::new(trunc.table.with_classes(c)),
            None => Self::new(trunc.table.clone()),
        }
    }

    pub fn max_divisor(&self) -> f64 {
        self.phases.max_abs()
    }

    pub fn distinct_divisors(&self) -> usize {
        self.phases.values.len()
    }

    pub fn field(&self, r: &[C64], t: f64) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); r.len()];
        self.table.rotating_field_into(r, t, &self.phases, &mut out);
        out
    }
}

impl OdeSystem<f64> for RotatingSystem {
    fn dim(&self) -> usize {
        2 * self.table.dim()
    }
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        self.table.rotating_field_into(as_complex(y), t, &self.phases, as_complex_mut(dy));
    }
}

/// w_n = z_n e^{i·direction·(|n|²_ω + V_n)t}.
pub fn rotate(z: &FourierState, t: f64, freq: &Frequency, pot: &PotentialSpec, direction: i8) -> FourierState {
    let s = direction as f64 * t;
    FourierState { amp: z.amp.iter().map(|(n, a)| (*n, a * Complex::from_polar(1.0, linear_frequency(freq, pot, *n) * s))).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diophantine::Convergent;
    use crate::lambda_set::{build_genealogy, place, scale};
    use crate::ode::{to_real, Dopri5};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small() -> (PlacedSet, Frequency) {
        let base = place(&build_genealogy(2).unwrap(), 3, 6, 50).unwrap();
        (scale(&base, &Convergent { p: 5, q: 4 }).unwrap(), Frequency::rational(5, 4))
    }

    fn depth1(ps: &PlacedSet, freq: &Frequency) -> Truncation {
        build_truncation(ps, &TruncationSpec { depth: 1, ..Default::default() }, freq, &PotentialSpec::zero()).unwrap()
    }

    fn random_state(n: usize, size: f64, seed: u64) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Complex::new(rng.gen_range(-size..size), rng.gen_range(-size..size))).collect()
    }

    #[test]
    fn depth_and_radius() {
        let (ps, freq) = small();
        let pot = PotentialSpec::zero();
        let t0 = build_truncation(&ps, &TruncationSpec::default(), &freq, &pot).unwrap();
        assert_eq!(t0.dim(), ps.len());
        assert_eq!(t0.table.len(), ps.len() + 2 * ps.families().len());
        let r0 = build_truncation(&ps, &TruncationSpec { depth: 1, radius: Some(0.0), max_divisor: None }, &freq, &pot).unwrap();
        assert_eq!(r0.dim(), ps.len());
        let t1 = depth1(&ps, &freq);
        assert!(t1.dim() > ps.len());
        assert!(t1.table.class_counts()[1] > 0);
        assert!(build_truncation(&ps, &TruncationSpec { depth: 3, ..Default::default() }, &freq, &pot).is_err());
        let big = place(&build_genealogy(4).unwrap(), 1, 50, 100).unwrap();
        let e = build_truncation(&big, &TruncationSpec { depth: 1, ..Default::default() }, &freq, &pot).unwrap_err();
        assert!(matches!(e, Error::CapacityExceeded(_)));
    }

    #[test]
    fn quartic_energy_matches_brute_force() {
        let (ps, freq) = small();
        let tr = depth1(&ps, &freq);
        let z = random_state(tr.dim(), 0.3, 4);
        let m = tr.modes();
        let mut sum = -0.5 * z.iter().map(|a| a.norm_sqr().powi(2)).sum::<f64>();
        for a in 0..m.len() {
            for b in 0..m.len() {
                for c in 0..m.len() {
                    let Some(d) = tr.table.index.get(&(m[a] - m[b] + m[c])) else { continue };
                    if a == b || a == d {
                        continue;
                    }
                    sum += 0.5 * (z[a] * z[b].conj() * z[c] * z[d].conj()).re;
                }
            }
        }
        assert!((sum - tr.table.energy(&z)).abs() < 1e-13);
    }

    #[test]
    fn single_mode_field() {
        let ps = PlacedSet::from_generations(vec![vec![Mode::new(2, 1)]], 1, 1).unwrap();
        let freq = Frequency::rational(3, 2);
        let pot = PotentialSpec::zero();
        let tr = build_truncation(&ps, &TruncationSpec::default(), &freq, &pot).unwrap();
        let a = Complex::new(0.3, -0.4);
        let z = FourierState::from_pairs([(Mode::new(2, 1), a)]);
        let dz = field_h(&z, &tr).unwrap().get(&Mode::new(2, 1));
        let lam = 4.0 + 2.25;
        let expect = Complex::new(0.0, 1.0) * (a * lam - a * a.norm_sqr());
        assert!((dz - expect).norm() < 1e-15);
        assert_eq!(field_h(&FourierState::new(), &tr).unwrap().l1(), 0.0);
        let outside = FourierState::from_pairs([(Mode::new(0, 0), a)]);
        assert!(field_h(&outside, &tr).is_err());
    }

    #[test]
    fn unconnected_modes_decouple() {
        let ps = PlacedSet::from_generations(vec![vec![Mode::new(0, 0), Mode::new(5, 1)]], 1, 1).unwrap();
        let tr = build_truncation(&ps, &TruncationSpec::default(), &Frequency::rational(1, 1), &PotentialSpec::zero()).unwrap();
        assert_eq!(tr.table.len(), 2);
        let z = vec![Complex::new(0.2, 0.0), ZERO];
        let mut out = vec![ZERO; 2];
        tr.field_into(&z, false, &mut out);
        assert_eq!(out[1], ZERO);
    }

    const ZERO: C64 = Complex { re: 0.0, im: 0.0 };

    #[test]
    fn conservation_and_gauge_equivalence() {
        let (ps, freq) = small();
        let tr = depth1(&ps, &freq);
        let tol = 1e-10;
        let z0 = random_state(tr.dim(), 0.05, 9);
        let t_end = 0.5;
        let plain = integrate_h(&tr, &z0, t_end, tol, false).unwrap();
        let z1 = as_complex(&plain.y_end).to_vec();
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
        assert!(rel(tr.mass(&z1), tr.mass(&z0)) <= 100.0 * tol);
        assert!(rel(tr.energy(&z1), tr.energy(&z0)) <= 100.0 * tol);
        let (p0, p1) = (tr.momentum(&z0), tr.momentum(&z1));
        assert!((p0.0 - p1.0).abs() <= 100.0 * tol * p0.0.abs().max(1.0));
        assert!((p0.1 - p1.1).abs() <= 100.0 * tol * p0.1.abs().max(1.0));
        let gauged = integrate_h(&tr, &z0, t_end, tol, true).unwrap();
        let u1 = tr.sparse(as_complex(&gauged.y_end));
        let via = tr.sparse(&z1).gauge(t_end, 1);
        assert!(u1.l1_distance(&via) <= 10.0 * tol * tr.sparse(&z0).l1().max(1.0));
    }

    #[test]
    fn rotation_properties() {
        let (ps, freq) = small();
        let pot = PotentialSpec::zero();
        let tr = depth1(&ps, &freq);
        let z = tr.sparse(&random_state(tr.dim(), 0.1, 2));
        assert_eq!(rotate(&z, 0.0, &freq, &pot, 1), z);
        let r = rotate(&z, 1.3, &freq, &pot, 1);
        assert!((r.l1() - z.l1()).abs() < 1e-14 && (r.mass() - z.mass()).abs() < 1e-15);
        assert!(rotate(&r, 1.3, &freq, &pot, -1).l1_distance(&z) < 1e-14);
    }

    #[test]
    fn rotating_field_matches_conjugated_flow() {
        let (ps, freq) = small();
        let pot = PotentialSpec::zero();
        let tr = depth1(&ps, &freq);
        let z0 = random_state(tr.dim(), 0.05, 5);
        let t = 0.2;
        let zt = as_complex(&integrate_h(&tr, &z0, t, 1e-12, false).unwrap().y_end).to_vec();
        let r_at = |dt: f64| {
            let z = if dt == 0.0 { zt.clone() } else { as_complex(&shifted(&tr, &zt, t, dt)).to_vec() };
            tr.dense(&rotate(&tr.sparse(&z), t + dt, &freq, &pot, -1)).unwrap()
        };
        let h = 1e-5;
        let (p1, m1, p2, m2) = (r_at(h), r_at(-h), r_at(2.0 * h), r_at(-2.0 * h));
        let fd: Vec<C64> = (0..tr.dim()).map(|i| (8.0 * (p1[i] - m1[i]) - (p2[i] - m2[i])) / (12.0 * h)).collect();
        let rot = RotatingSystem::with_classes(&tr, None);
        let exact = rot.field(&r_at(0.0), t);
        let scale: f64 = exact.iter().map(|z| z.norm()).sum();
        let err: f64 = fd.iter().zip(&exact).map(|(a, b)| (a - b).norm()).sum();
        assert!(err <= 1e-6 * scale, "{err} vs {scale}");
    }

    fn shifted(tr: &Truncation, z: &[C64], t: f64, dt: f64) -> Vec<f64> {
        let sys = GalerkinSystem { trunc: tr, gauged: false };
        Dopri5::new(1e-14, 1e-17).integrate(&sys, t, &to_real(z), t + dt).unwrap().y_end
    }

    #[test]
    fn lambda_support_and_generation_symmetry_persist() {
        let (ps, freq) = small();
        let tr = depth1(&ps, &freq);
        let sys = RotatingSystem::with_classes(&tr, Some(&[0, 2, 3, 4]));
        let gen = ps.generation_map();
        let z0: Vec<C64> = tr
            .modes()
            .iter()
            .map(|m| match gen.get(m) {
                Some(1) => Complex::new(0.1, 0.02),
                Some(_) => Complex::new(-0.03, 0.05),
                None => ZERO,
            })
            .collect();
        let traj = Dopri5::new(1e-11, 1e-13).integrate(&sys, 0.0, &to_real(&z0), 40.0).unwrap();
        let z1 = as_complex(&traj.y_end);
        for (m, z) in tr.modes().iter().zip(z1) {
            match gen.get(m) {
                None => assert_eq!(*z, ZERO),
                Some(g) => {
                    let first = ps.generations[g - 1][0];
                    assert!((z - z1[tr.table.index.get(&first).unwrap()]).norm() < 1e-12);
                }
            }
        }
        assert!((z1[tr.table.index.get(&ps.generations[1][0]).unwrap()] - z0[tr.table.index.get(&ps.generations[1][0]).unwrap()]).norm() > 1e-4);
    }
}
