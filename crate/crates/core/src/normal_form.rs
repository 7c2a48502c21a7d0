//! Quartic monomial tables on a finite mode set, the generator removing the
//! monomials with exactly one member outside Λ, its time-one flow and the
//! remainder field of the transformed Hamiltonian.

use std::collections::{HashMap, HashSet};

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lambda_set::PlacedSet;
use crate::lattice::{Frequency, Mode, ModeIndex, PotentialSpec};
use crate::ode::{as_complex, as_complex_mut, rk4_fixed, to_real, OdeSystem};
use crate::resonance::{omega_values, Quadruple};

type C64 = Complex<f64>;

const ZERO: C64 = Complex { re: 0.0, im: 0.0 };

/// Coefficient times z_a z̄_b z_c z̄_d, with `idx = [a, b, c, d]` indices into the table's modes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub idx: [u32; 4],
    pub coeff: C64,
    /// Number of positions whose mode lies outside Λ.
    pub class: u8,
    /// λ_a − λ_b + λ_c − λ_d including the potential.
    pub divisor: f64,
}

#[derive(Clone, Debug)]
pub struct MonomialTable {
    pub index: ModeIndex,
    pub entries: Vec<Monomial>,
}

/// Σ|z|.
pub fn l1(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).sum()
}

pub fn l1_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).sum()
}

fn divisor(m: &[Mode; 4], freq: &Frequency, pot: &PotentialSpec) -> f64 {
    omega_values(&Quadruple { n: *m }, freq, pot).total
}

/// The quartic part −½Σ|z_n|⁴ + ½Σ' z₁z̄₂z₃z̄₄ restricted to `modes`, the primed sum
/// running over momentum-closed quadruples with n₁ ∉ {n₂, n₄}. Monomials are merged
/// under a ↔ c and b ↔ d.
pub fn build_quartic(ps: &PlacedSet, modes: &[Mode], freq: &Frequency, pot: &PotentialSpec) -> Result<MonomialTable> {
    let lambda = ps.mode_set();
    let index = ModeIndex::new(modes.to_vec());
    if let Some(n) = lambda.iter().find(|n| index.get(n).is_none()) {
        return invalid(format!("truncation misses the Λ-mode {n:?}"));
    }
    let m = index.len();
    let mut by_sum: HashMap<Mode, Vec<(u32, u32)>> = HashMap::new();
    for a in 0..m {
        for c in a..m {
            by_sum.entry(index.modes[a] + index.modes[c]).or_default().push((a as u32, c as u32));
        }
    }
    let mut groups: Vec<_> = by_sum.into_values().collect();
    groups.sort();
    let outside = |i: u32| !lambda.contains(&index.modes[i as usize]);
    let mult = |(a, c): (u32, u32)| if a == c { 1.0 } else { 2.0 };
    let mut entries = Vec::new();
    for g in &groups {
        for &p in g {
            for &r in g {
                let coeff = if p == r {
                    if p.0 != p.1 {
                        continue;
                    }
                    -0.5
                } else {
                    0.5 * mult(p) * mult(r)
                };
                let idx = [p.0, r.0, p.1, r.1];
                let quad = idx.map(|i| index.modes[i as usize]);
                entries.push(Monomial {
                    idx,
                    coeff: Complex::new(coeff, 0.0),
                    class: idx.iter().filter(|&&i| outside(i)).count() as u8,
                    divisor: divisor(&quad, freq, pot),
                });
            }
        }
    }
    Ok(MonomialTable { index, entries })
}

impl MonomialTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    pub fn modes_of(&self, e: &Monomial) -> [Mode; 4] {
        e.idx.map(|i| self.index.modes[i as usize])
    }

    pub fn filter(&self, keep: impl Fn(&Monomial) -> bool) -> MonomialTable {
        MonomialTable { index: self.index.clone(), entries: self.entries.iter().filter(|e| keep(e)).copied().collect() }
    }

    pub fn with_classes(&self, classes: &[u8]) -> MonomialTable {
        self.filter(|e| classes.contains(&e.class))
    }

    /// Number of entries per class 0..=4.
    pub fn class_counts(&self) -> [usize; 5] {
        let mut c = [0; 5];
        for e in &self.entries {
            c[e.class as usize] += 1;
        }
        c
    }

    /// Σ c z_a z̄_b z_c z̄_d (real for conjugation-symmetric tables).
    pub fn energy(&self, z: &[C64]) -> f64 {
        crate::scalar::kahan_sum(self.entries.iter().map(|e| {
            let [a, b, c, d] = e.idx.map(|i| z[i as usize]);
            (e.coeff * a * b.conj() * c * d.conj()).re
        }))
    }

    /// Writes i∂_{z̄}G into `out`, each monomial weighted additionally by `weight(entry index)`.
    fn accumulate(&self, z: &[C64], out: &mut [C64], weight: impl Fn(usize) -> C64) {
        let mut comp = vec![ZERO; out.len()];
        out.iter_mut().for_each(|o| *o = ZERO);
        let mut add = |k: usize, v: C64| {
            let y = v - comp[k];
            let t = out[k] + y;
            comp[k] = (t - out[k]) - y;
            out[k] = t;
        };
        for (n, e) in self.entries.iter().enumerate() {
            let [a, b, c, d] = e.idx.map(|i| i as usize);
            let w = e.coeff * weight(n);
            let ac = w * z[a] * z[c];
            add(b, ac * z[d].conj());
            add(d, ac * z[b].conj());
        }
        let i = Complex::new(0.0, 1.0);
        out.iter_mut().for_each(|o| *o *= i);
    }

    /// Hamiltonian field i∂_{z̄}G of the table.
    pub fn field_into(&self, z: &[C64], out: &mut [C64]) {
        self.accumulate(z, out, |_| Complex::new(1.0, 0.0));
    }

    pub fn field(&self, z: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; z.len()];
        self.field_into(z, &mut out);
        out
    }

    /// Field with every monomial multiplied by e^{i·divisor·t}.
    pub fn rotating_field_into(&self, z: &[C64], t: f64, phases: &PhaseCache, out: &mut [C64]) {
        let ph = phases.evaluate(t);
        self.accumulate(z, out, |n| ph[phases.slot[n] as usize]);
    }
}

/// Distinct divisors of a table, so that each e^{iΩt} is computed once per evaluation.
#[derive(Clone, Debug)]
pub struct PhaseCache {
    pub values: Vec<f64>,
    slot: Vec<u32>,
}

impl PhaseCache {
    pub fn new(table: &MonomialTable) -> Self {
        let mut values: Vec<f64> = table.entries.iter().map(|e| e.divisor).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let slot = table
            .entries
            .iter()
            .map(|e| values.binary_search_by(|v| v.total_cmp(&e.divisor)).unwrap() as u32)
            .collect();
        Self { values, slot }
    }

    pub fn evaluate(&self, t: f64) -> Vec<C64> {
        self.values.iter().map(|w| if *w == 0.0 { Complex::new(1.0, 0.0) } else { Complex::from_polar(1.0, w * t) }).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Class-1 monomials divided by i·divisor.
pub fn build_generator(table: &MonomialTable, big_l: f64) -> Result<MonomialTable> {
    if !(big_l > 0.0) {
        return invalid(format!("divisor bound must be positive, got {big_l}"));
    }
    let mut entries = Vec::new();
    for e in table.entries.iter().filter(|e| e.class == 1) {
        if e.divisor.abs() < big_l {
            return Err(Error::SmallDivisor { value: e.divisor, bound: big_l });
        }
        entries.push(Monomial { coeff: e.coeff / Complex::new(0.0, e.divisor), ..*e });
    }
    Ok(MonomialTable { index: table.index.clone(), entries })
}

/// Largest coefficient mismatch of the first-order cancellation: the bracket of the
/// quadratic part with the generator, added to the table, must remove every class-1
/// monomial and leave all others untouched.
pub fn homological_residual(table: &MonomialTable, generator: &MonomialTable) -> f64 {
    let mut gen: HashMap<[u32; 4], C64> = HashMap::new();
    for e in &generator.entries {
        *gen.entry(e.idx).or_insert(ZERO) += e.coeff * Complex::new(0.0, -e.divisor);
    }
    let mut worst: f64 = 0.0;
    let mut seen = HashSet::new();
    for e in &table.entries {
        seen.insert(e.idx);
        let corrected = e.coeff + gen.get(&e.idx).copied().unwrap_or(ZERO);
        let expect = if e.class == 1 { ZERO } else { e.coeff };
        worst = worst.max((corrected - expect).norm());
    }
    for (k, v) in &gen {
        if !seen.contains(k) {
            worst = worst.max(v.norm());
        }
    }
    worst
}

struct TableFlow<'a>(&'a MonomialTable);

impl OdeSystem<f64> for TableFlow<'_> {
    fn dim(&self) -> usize {
        2 * self.0.dim()
    }
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        self.0.field_into(as_complex(y), as_complex_mut(dy));
    }
}

/// Time-s flow of a generator by classical Runge–Kutta with a fixed number of steps.
pub fn flow_fixed(generator: &MonomialTable, w: &[C64], s: f64, steps: usize) -> Vec<C64> {
    if generator.is_empty() || s == 0.0 {
        return w.to_vec();
    }
    as_complex(&rk4_fixed(&TableFlow(generator), 0.0, &to_real(w), s, steps)).to_vec()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformSettings {
    /// Radius η₀ of the admissible ball.
    pub eta0: f64,
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for TransformSettings {
    fn default() -> Self {
        Self { eta0: 0.125, tol: 1e-14, max_steps: 1 << 14 }
    }
}

/// Step count for which halving the step changes the time-`s` flow by at most `tol` in ℓ¹.
pub fn flow_steps(generator: &MonomialTable, w: &[C64], s: f64, set: &TransformSettings) -> Result<usize> {
    let mut steps = 4;
    let mut prev = flow_fixed(generator, w, s, steps);
    while steps < set.max_steps {
        let next = flow_fixed(generator, w, s, 2 * steps);
        steps *= 2;
        if l1_diff(&prev, &next) <= set.tol {
            return Ok(steps);
        }
        prev = next;
    }
    Err(Error::InvalidInput(format!("flow did not settle within {} steps", set.max_steps)))
}

fn check_radius(w: &[C64], limit: f64) -> Result<()> {
    let n = l1(w);
    if !(n <= limit * (1.0 + 1e-12)) {
        return Err(Error::RadiusExceeded { norm: n, limit });
    }
    Ok(())
}

/// Γ (direction +1) or Γ⁻¹ (direction −1): the time-±1 flow of the generator.
pub fn transform(w: &[C64], generator: &MonomialTable, direction: i8, set: &TransformSettings) -> Result<Vec<C64>> {
    if direction != 1 && direction != -1 {
        return invalid("direction must be +1 or -1");
    }
    check_radius(w, set.eta0)?;
    if generator.is_empty() {
        return Ok(w.to_vec());
    }
    let s = direction as f64;
    let steps = flow_steps(generator, w, s, set)?;
    let sys = TableFlow(generator);
    let h = s / steps as f64;
    let mut y = to_real(w);
    for k in 0..steps {
        y = rk4_fixed(&sys, k as f64 * h, &y, (k + 1) as f64 * h, 1);
        check_radius(as_complex(&y), 2.0 * set.eta0)?;
    }
    Ok(as_complex(&y).to_vec())
}

/// Sparse-state convenience wrapper around [`transform`].
pub fn transform_state(
    w: &crate::lattice::FourierState,
    generator: &MonomialTable,
    direction: i8,
    set: &TransformSettings,
) -> Result<crate::lattice::FourierState> {
    let dense = generator.index.to_dense(w)?;
    Ok(generator.index.to_state(&transform(&dense, generator, direction, set)?))
}

/// Gauss–Legendre nodes and weights on [0, 1].
const GAUSS8: [(f64, f64); 8] = [
    (0.019_855_071_751_231_856, 0.050_614_268_145_188_13),
    (0.101_666_761_293_186_63, 0.111_190_517_226_687_24),
    (0.237_233_795_041_835_5, 0.156_853_322_938_943_64),
    (0.408_282_678_752_175_1, 0.181_341_891_689_181),
    (0.591_717_321_247_825, 0.181_341_891_689_181),
    (0.762_766_204_958_164_5, 0.156_853_322_938_943_64),
    (0.898_333_238_706_813_4, 0.111_190_517_226_687_24),
    (0.980_144_928_248_768_1, 0.050_614_268_145_188_13),
];

/// Field of G∘Φ^s at w, i.e. (DΦ^s(w))⁻¹ X_G(Φ^s(w)), with the inverse differential
/// taken as a central difference of Φ^{−s} around Φ^s(w).
fn pullback(g: &MonomialTable, generator: &MonomialTable, w: &[C64], s: f64, steps: usize) -> Vec<C64> {
    let y = flow_fixed(generator, w, s, steps);
    let v = g.field(&y);
    let nv = l1(&v);
    if nv == 0.0 {
        return v;
    }
    let h = f64::EPSILON.cbrt() * l1(&y).max(1.0);
    let shifted = |sign: f64| {
        let p: Vec<C64> = y.iter().zip(&v).map(|(a, b)| a + b * (sign * h / nv)).collect();
        flow_fixed(generator, &p, -s, steps)
    };
    let (plus, minus) = (shifted(1.0), shifted(-1.0));
    plus.iter().zip(&minus).map(|(a, b)| (a - b) * (nv / (2.0 * h))).collect()
}

/// Field of the remainder 𝓡 = 𝓗∘Γ − 𝓗⁽²⁾ − 𝓗^{(4,0)} − 𝓗^{(4,≥2)} at w.
///
/// Uses 𝓗⁽²⁾∘Γ − 𝓗⁽²⁾ = −∫₀¹ 𝓗^{(4,1)}∘Φ^s ds, so that
/// X_𝓡 = (X_{𝓗⁽⁴⁾∘Γ} − X_{𝓗⁽⁴⁾}) + X_{𝓗^{(4,1)}} − ∫₀¹ X_{𝓗^{(4,1)}∘Φ^s} ds.
pub fn remainder_field(w: &[C64], table: &MonomialTable, generator: &MonomialTable, set: &TransformSettings) -> Result<Vec<C64>> {
    check_radius(w, set.eta0)?;
    if generator.is_empty() {
        return Ok(vec![ZERO; w.len()]);
    }
    let steps = flow_steps(generator, w, 1.0, set)?;
    check_radius(&flow_fixed(generator, w, 1.0, steps), 2.0 * set.eta0)?;
    let class1 = table.with_classes(&[1]);
    let quartic_gamma = pullback(table, generator, w, 1.0, steps);
    let quartic = table.field(w);
    let mut out: Vec<C64> = quartic_gamma.iter().zip(&quartic).zip(class1.field(w)).map(|((a, b), c)| a - b + c).collect();
    for (s, wt) in GAUSS8 {
        let node_steps = ((steps as f64 * s).ceil() as usize).max(1);
        let v = pullback(&class1, generator, w, s, node_steps);
        out.iter_mut().zip(&v).for_each(|(o, x)| *o -= x * wt);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub eta: f64,
    pub displacement: f64,
    pub remainder: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NfReport {
    pub stage: String,
    pub modes: usize,
    pub entries: usize,
    pub class_counts: [usize; 5],
    pub generator_entries: usize,
    pub min_divisor: f64,
    pub big_l: f64,
    pub homological_residual: f64,
    pub max_generator_ratio: f64,
    pub sweep: Vec<SweepPoint>,
    pub displacement_slope: f64,
    pub remainder_slope: f64,
}

/// Least-squares slope of ln y against ln x.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let xy: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xy.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xy.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// A seeded state supported on Λ with ℓ¹ norm 1.
pub fn lambda_direction(table: &MonomialTable, ps: &PlacedSet, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lambda = ps.mode_set();
    let mut v: Vec<C64> = table
        .index
        .modes
        .iter()
        .map(|m| {
            let (r, ph): (f64, f64) = (rng.gen_range(0.5..1.0), rng.gen_range(0.0..std::f64::consts::TAU));
            if lambda.contains(m) {
                Complex::from_polar(r, ph)
            } else {
                ZERO
            }
        })
        .collect();
    let n = l1(&v);
    v.iter_mut().for_each(|z| *z /= n);
    v
}

/// Displacement ‖Γ(w) − w‖ and remainder ‖X_𝓡(w)‖ along w = η·(seeded Λ-direction).
pub fn eta_sweep(
    ps: &PlacedSet,
    table: &MonomialTable,
    big_l: f64,
    etas: &[f64],
    seed: u64,
    set: &TransformSettings,
) -> Result<NfReport> {
    let generator = build_generator(table, big_l)?;
    let dir = lambda_direction(table, ps, seed);
    let sweep = etas
        .par_iter()
        .map(|&eta| {
            let w: Vec<C64> = dir.iter().map(|z| z * eta).collect();
            let g = transform(&w, &generator, 1, set)?;
            let r = remainder_field(&w, table, &generator, set)?;
            Ok(SweepPoint { eta, displacement: l1_diff(&g, &w), remainder: l1(&r) })
        })
        .collect::<Result<Vec<_>>>()?;
    let slope = |f: fn(&SweepPoint) -> f64| {
        if sweep.len() < 2 {
            f64::NAN
        } else {
            loglog_slope(&sweep.iter().map(|p| (p.eta, f(p))).collect::<Vec<_>>())
        }
    };
    let class1 = table.entries.iter().filter(|e| e.class == 1);
    Ok(NfReport {
        stage: "normal_form".into(),
        modes: table.dim(),
        entries: table.len(),
        class_counts: table.class_counts(),
        generator_entries: generator.len(),
        min_divisor: class1.clone().map(|e| e.divisor.abs()).fold(f64::INFINITY, f64::min),
        big_l,
        homological_residual: homological_residual(table, &generator),
        max_generator_ratio: generator
            .entries
            .iter()
            .zip(class1)
            .map(|(g, e)| g.coeff.norm() * big_l / e.coeff.norm())
            .fold(0.0, f64::max),
        displacement_slope: slope(|p| p.displacement),
        remainder_slope: slope(|p| p.remainder),
        sweep,
    })
}

/// Geometric grid lo, …, hi with `steps` points.
pub fn geometric_grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps <= 1 {
        return vec![lo];
    }
    (0..steps).map(|i| lo * (hi / lo).powf(i as f64 / (steps - 1) as f64)).collect()
}
