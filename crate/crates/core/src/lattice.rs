//! Fourier-lattice primitives: modes, eigenvalues, potentials and sparse states.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::ops::{Add, Neg, Sub};

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::diophantine::ContinuedFraction;
use crate::error::{Error, Result};
use crate::scalar::{kahan_sum, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Mode {
    pub j: i64,
    pub k: i64,
}

impl Mode {
    pub const fn new(j: i64, k: i64) -> Self {
        Self { j, k }
    }

    pub fn norm_sq(&self) -> i128 {
        (self.j as i128).pow(2) + (self.k as i128).pow(2)
    }

    pub fn norm(&self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    /// ⟨n⟩ = max(1, |n|).
    pub fn bracket(&self) -> f64 {
        self.norm().max(1.0)
    }

    pub fn dot(&self, o: &Mode) -> i128 {
        self.j as i128 * o.j as i128 + self.k as i128 * o.k as i128
    }

    pub fn cross(&self, o: &Mode) -> i128 {
        self.j as i128 * o.k as i128 - self.k as i128 * o.j as i128
    }
}

impl Add for Mode {
    type Output = Mode;
    fn add(self, o: Mode) -> Mode {
        Mode::new(self.j + o.j, self.k + o.k)
    }
}

impl Sub for Mode {
    type Output = Mode;
    fn sub(self, o: Mode) -> Mode {
        Mode::new(self.j - o.j, self.k - o.k)
    }
}

impl Neg for Mode {
    type Output = Mode;
    fn neg(self) -> Mode {
        Mode::new(-self.j, -self.k)
    }
}

impl From<(i64, i64)> for Mode {
    fn from((j, k): (i64, i64)) -> Self {
        Mode::new(j, k)
    }
}

/// |n|²_ω = j² + ω²k² in any numeric type (f64, exact rationals, ...).
pub fn eigenvalue<S: Num + Clone + FromPrimitive>(n: Mode, omega: &S) -> S {
    let j = S::from_i128((n.j as i128).pow(2)).unwrap();
    let k = S::from_i128((n.k as i128).pow(2)).unwrap();
    j + omega.clone() * omega.clone() * k
}

/// The side ratio ω of the torus, kept exact when it is rational.
#[derive(Clone, Debug)]
pub struct Frequency {
    pub value: f64,
    exact: Option<BigRational>,
    num_sq: BigInt,
    den_sq: BigInt,
}

impl Frequency {
    pub fn from_cf(cf: &ContinuedFraction) -> Self {
        match cf.exact_value() {
            Some(r) => Self::exact(r),
            None => Self::float(cf.value),
        }
    }

    pub fn exact(r: BigRational) -> Self {
        let value = r.to_f64().unwrap();
        let num_sq = r.numer() * r.numer();
        let den_sq = r.denom() * r.denom();
        Self { value, exact: Some(r), num_sq, den_sq }
    }

    pub fn rational(p: i64, q: i64) -> Self {
        Self::exact(BigRational::new(p.into(), q.into()))
    }

    pub fn float(value: f64) -> Self {
        Self { value, exact: None, num_sq: BigInt::from(0), den_sq: BigInt::from(1) }
    }

    pub fn exact_value(&self) -> Option<&BigRational> {
        self.exact.as_ref()
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// `a + ω² b` for integers a, b; exact before the final rounding when ω is rational.
    pub fn quadratic(&self, a: i128, b: i128) -> f64 {
        if b == 0 {
            return a as f64;
        }
        match self.exact {
            Some(_) => {
                let num = BigInt::from(a) * &self.den_sq + BigInt::from(b) * &self.num_sq;
                BigRational::new(num, self.den_sq.clone()).to_f64().unwrap()
            }
            None => a as f64 + self.value * self.value * b as f64,
        }
    }

    pub fn quadratic_exact(&self, a: i128, b: i128) -> Option<BigRational> {
        self.exact.as_ref().map(|w| BigRational::from_integer(a.into()) + w * w * BigRational::from_integer(b.into()))
    }

    pub fn eigenvalue(&self, n: Mode) -> f64 {
        self.quadratic((n.j as i128).pow(2), (n.k as i128).pow(2))
    }

    pub fn eigenvalue_exact(&self, n: Mode) -> Option<BigRational> {
        self.exact.as_ref().map(|w| eigenvalue(n, w))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKind {
    Zero,
    Table,
    Decay,
}

/// Real Fourier multipliers V_n of the convolution potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    #[serde(default = "default_s0")]
    pub s0: f64,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub table: Vec<(Mode, f64)>,
}

fn default_s0() -> f64 {
    2.0
}

impl Default for PotentialSpec {
    fn default() -> Self {
        Self::zero()
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic ±1 attached to a mode: low bit of splitmix64 chained over (seed, j, k).
pub fn seeded_sign(seed: u64, n: Mode) -> f64 {
    let h = splitmix64(splitmix64(splitmix64(seed) ^ n.j as u64) ^ n.k as u64);
    if h & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl PotentialSpec {
    pub fn zero() -> Self {
        Self { kind: PotentialKind::Zero, s0: default_s0(), amplitude: 0.0, seed: 0, table: Vec::new() }
    }

    pub fn decay(amplitude: f64, s0: f64, seed: u64) -> Self {
        Self { kind: PotentialKind::Decay, s0, amplitude, seed, table: Vec::new() }
    }

    pub fn table(entries: Vec<(Mode, f64)>) -> Self {
        Self { kind: PotentialKind::Table, s0: default_s0(), amplitude: 0.0, seed: 0, table: entries }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s0 > 0.0) {
            return Err(Error::ConfigError(format!("potential s0 must be positive, got {}", self.s0)));
        }
        if !(self.amplitude >= 0.0) || self.table.iter().any(|(_, v)| !v.is_finite()) {
            return Err(Error::ConfigError("potential coefficients must be finite, amplitude >= 0".into()));
        }
        Ok(())
    }

    pub fn coeff(&self, n: Mode) -> f64 {
        match self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::Table => self.table.iter().find(|(m, _)| *m == n).map_or(0.0, |(_, v)| *v),
            PotentialKind::Decay => self.amplitude * n.bracket().powf(-self.s0) * seeded_sign(self.seed, n),
        }
    }

    /// sup_n |V_n| over the whole lattice.
    pub fn sup_abs(&self) -> f64 {
        match self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::Table => self.table.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max),
            PotentialKind::Decay => self.amplitude,
        }
    }
}

/// λ_n = |n|²_ω + V_n.
pub fn linear_frequency(freq: &Frequency, pot: &PotentialSpec, n: Mode) -> f64 {
    freq.eigenvalue(n) + pot.coeff(n)
}

/// Finitely supported complex amplitudes, ordered lexicographically by mode.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct FourierState<T: Real = f64> {
    pub amp: BTreeMap<Mode, Complex<T>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub h_s: f64,
    pub l1: f64,
    pub mass: f64,
    pub momentum: (f64, f64),
}

impl<T: Real> FourierState<T> {
    pub fn new() -> Self {
        Self { amp: BTreeMap::new() }
    }

    pub fn from_pairs<I: IntoIterator<Item = (Mode, Complex<T>)>>(it: I) -> Self {
        Self { amp: it.into_iter().collect() }
    }

    pub fn get(&self, n: &Mode) -> Complex<T> {
        self.amp.get(n).copied().unwrap_or_else(|| Complex::new(T::zero(), T::zero()))
    }

    pub fn len(&self) -> usize {
        self.amp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amp.is_empty()
    }

    pub fn mass(&self) -> T {
        kahan_sum(self.amp.values().map(|z| z.norm_sqr()))
    }

    pub fn l1(&self) -> T {
        kahan_sum(self.amp.values().map(|z| z.norm()))
    }

    pub fn h_s_sq(&self, s: T) -> T {
        kahan_sum(self.amp.iter().map(|(n, z)| z.norm_sqr() * T::lit(n.bracket()).powf(s + s)))
    }

    pub fn norms(&self, s: f64) -> Norms {
        let mj = kahan_sum(self.amp.iter().map(|(n, z)| z.norm_sqr() * T::lit(n.j as f64)));
        let mk = kahan_sum(self.amp.iter().map(|(n, z)| z.norm_sqr() * T::lit(n.k as f64)));
        Norms {
            h_s: self.h_s_sq(T::lit(s)).sqrt().to_f64().unwrap(),
            l1: self.l1().to_f64().unwrap(),
            mass: self.mass().to_f64().unwrap(),
            momentum: (mj.to_f64().unwrap(), mk.to_f64().unwrap()),
        }
    }

    /// ℓ¹ distance over the union of supports.
    pub fn l1_distance(&self, o: &Self) -> T {
        let mut keys: Vec<&Mode> = self.amp.keys().chain(o.amp.keys()).collect();
        keys.sort();
        keys.dedup();
        kahan_sum(keys.into_iter().map(|n| (self.get(n) - o.get(n)).norm()))
    }

    /// Multiplies every amplitude by e^{2i·direction·mass·t}.
    pub fn gauge(&self, t: T, direction: i8) -> Self {
        let phase = T::lit(2.0 * direction as f64) * self.mass() * t;
        let f = Complex::new(phase.cos(), phase.sin());
        Self { amp: self.amp.iter().map(|(n, z)| (*n, *z * f)).collect() }
    }

    /// Discrete convolution (z ⋆ w)_n = Σ_{a+b=n} z_a w_b.
    pub fn convolve(&self, o: &Self) -> Self {
        let mut out: BTreeMap<Mode, Complex<T>> = BTreeMap::new();
        for (a, za) in &self.amp {
            for (b, wb) in &o.amp {
                *out.entry(*a + *b).or_insert_with(|| Complex::new(T::zero(), T::zero())) += *za * *wb;
            }
        }
        Self { amp: out }
    }
}

#[derive(Serialize, Deserialize)]
struct StateLine {
    j: i64,
    k: i64,
    re: f64,
    im: f64,
}

impl FourierState<f64> {
    /// JSON lines `{"j","k","re","im"}` in lexicographic mode order.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for (n, z) in &self.amp {
            serde_json::to_writer(&mut w, &StateLine { j: n.j, k: n.k, re: z.re, im: z.im })?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut amp = BTreeMap::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let l: StateLine = serde_json::from_str(&line)?;
            amp.insert(Mode::new(l.j, l.k), Complex::new(l.re, l.im));
        }
        Ok(Self { amp })
    }
}

/// Dense index over a finite mode set.
#[derive(Clone, Debug, Default)]
pub struct ModeIndex {
    pub modes: Vec<Mode>,
    pub index: HashMap<Mode, usize>,
}

impl ModeIndex {
    pub fn new(mut modes: Vec<Mode>) -> Self {
        modes.sort();
        modes.dedup();
        let index = modes.iter().enumerate().map(|(i, m)| (*m, i)).collect();
        Self { modes, index }
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn get(&self, n: &Mode) -> Option<usize> {
        self.index.get(n).copied()
    }

    pub fn to_dense<T: Real>(&self, z: &FourierState<T>) -> Result<Vec<Complex<T>>> {
        let mut v = vec![Complex::new(T::zero(), T::zero()); self.len()];
        for (n, a) in &z.amp {
            match self.get(n) {
                Some(i) => v[i] = *a,
                None if a.norm_sqr() == T::zero() => {}
                None => return Err(Error::SupportViolation(n.j, n.k)),
            }
        }
        Ok(v)
    }

    pub fn to_state<T: Real>(&self, v: &[Complex<T>]) -> FourierState<T> {
        FourierState::from_pairs(self.modes.iter().copied().zip(v.iter().copied()))
    }
}
