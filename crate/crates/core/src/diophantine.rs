//! Continued fractions, convergents and certified ψ-approximation.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::interval::Interval;

/// Continued fraction `[a0; a1, a2, ...]` of a number ω ≥ 1.
///
/// When `terminates` is true the digit list is the complete expansion and ω
/// is the rational number it evaluates to. Otherwise the digits are a prefix
/// of an infinite expansion and ω is only known to lie between the last two
/// convergents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuedFraction {
    pub digits: Vec<u64>,
    pub terminates: bool,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Convergent {
    pub p: i128,
    pub q: i128,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApproxKind {
    Log,
    Power,
}

/// ψ(q) = 1/(q log q) for the log kind, ψ(q) = c/q^{1+τ} for the power kind.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxFunction {
    pub kind: ApproxKind,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default)]
    pub tau: f64,
}

fn one() -> f64 {
    1.0
}

impl ApproxFunction {
    pub fn log() -> Self {
        Self { kind: ApproxKind::Log, c: 1.0, tau: 0.0 }
    }

    pub fn power(c: f64, tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return invalid(format!("power kind needs tau > 0, got {tau}"));
        }
        if !(c.is_finite() && c >= 1.0) {
            return invalid(format!("power kind needs c >= 1, got {c}"));
        }
        Ok(Self { kind: ApproxKind::Power, c, tau })
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ApproxKind::Log => Ok(()),
            ApproxKind::Power => Self::power(self.c, self.tau).map(|_| ()),
        }
    }

    /// ψ(q) in double precision (infinite for the log kind at q = 1).
    pub fn psi(&self, q: f64) -> f64 {
        match self.kind {
            ApproxKind::Log => 1.0 / (q * q.ln()),
            ApproxKind::Power => self.c / q.powf(1.0 + self.tau),
        }
    }

    /// Rigorous enclosure of ψ(q)/q.
    pub fn psi_over_q(&self, q: i128) -> Interval {
        let qi = Interval::from_u128(q as u128);
        match self.kind {
            ApproxKind::Log => {
                if q <= 1 {
                    Interval::point(f64::INFINITY)
                } else {
                    Interval::point(1.0) / (qi * qi * qi.ln())
                }
            }
            ApproxKind::Power => Interval::point(self.c) / qi.powf(2.0 + self.tau),
        }
    }
}

impl ContinuedFraction {
    pub fn from_digits(digits: Vec<u64>, terminates: bool) -> Result<Self> {
        if digits.is_empty() {
            return invalid("continued fraction needs at least one digit");
        }
        if digits.contains(&0) {
            return invalid("continued fraction digits must be positive");
        }
        let value = eval_f64(&digits);
        Ok(Self { digits, terminates, value })
    }

    /// Golden ratio [1; 1, 1, ...] truncated to `depth` digits.
    pub fn golden(depth: usize) -> Self {
        Self::from_digits(vec![1; depth.max(1)], false).unwrap()
    }

    /// √2 = [1; 2, 2, ...] truncated to `depth` digits.
    pub fn sqrt2(depth: usize) -> Self {
        let mut d = vec![2; depth.max(1)];
        d[0] = 1;
        Self::from_digits(d, false).unwrap()
    }

    /// Parses a preset name (`golden`, `sqrt2`) or a digit list `a0;a1,a2,...`.
    /// A trailing `...` marks a non-terminating prefix.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "golden" => return Ok(Self::golden(60)),
            "sqrt2" => return Ok(Self::sqrt2(45)),
            _ => {}
        }
        let (body, terminates) = match s.strip_suffix("...") {
            Some(b) => (b.trim_end_matches(',').trim(), false),
            None => (s, true),
        };
        let mut digits = Vec::new();
        let (head, tail) = match body.split_once(';') {
            Some((h, t)) => (h, t),
            None => (body, ""),
        };
        let parse = |t: &str| -> Result<u64> {
            t.trim().parse::<u64>().map_err(|_| Error::InvalidInput(format!("bad digit `{t}`")))
        };
        digits.push(parse(head)?);
        for t in tail.split(',').filter(|t| !t.trim().is_empty()) {
            digits.push(parse(t)?);
        }
        Self::from_digits(digits, terminates)
    }

    /// Exact value when the expansion terminates.
    pub fn exact_value(&self) -> Option<BigRational> {
        self.terminates.then(|| eval_exact(&self.digits))
    }

    /// Rational interval guaranteed to contain ω.
    pub fn enclosure(&self) -> (BigRational, BigRational) {
        if self.terminates {
            let v = eval_exact(&self.digits);
            return (v.clone(), v);
        }
        let d = &self.digits;
        let a = if d.len() == 1 {
            BigRational::from_integer(BigInt::from(d[0]))
        } else {
            eval_exact(&d[..d.len() - 1])
        };
        let b = if d.len() == 1 {
            BigRational::from_integer(BigInt::from(d[0] + 1))
        } else {
            eval_exact(d)
        };
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }
}

fn eval_f64(digits: &[u64]) -> f64 {
    let mut v = *digits.last().unwrap() as f64;
    for &a in digits.iter().rev().skip(1) {
        v = a as f64 + 1.0 / v;
    }
    v
}

fn eval_exact(digits: &[u64]) -> BigRational {
    let mut v = BigRational::from_integer(BigInt::from(*digits.last().unwrap()));
    for &a in digits.iter().rev().skip(1) {
        v = BigRational::from_integer(BigInt::from(a)) + v.recip();
    }
    v
}

/// Continued-fraction expansion of a finite double `x ≥ 1`, using the exact
/// binary value of `x`.
pub fn expand(x: f64, depth: usize) -> Result<ContinuedFraction> {
    if !x.is_finite() {
        return invalid("expand needs a finite number");
    }
    if x < 1.0 {
        return invalid(format!("expand needs x >= 1, got {x}"));
    }
    if depth == 0 {
        return invalid("depth must be positive");
    }
    let r = BigRational::from_float(x).ok_or_else(|| Error::InvalidInput("not representable".into()))?;
    let mut num = r.numer().clone();
    let mut den = r.denom().clone();
    let mut digits = Vec::new();
    let mut terminates = false;
    while digits.len() < depth {
        let a = &num / &den;
        let rem = &num - &a * &den;
        let a = a.to_u64().ok_or_else(|| Error::CapacityExceeded("digit exceeds u64".into()))?;
        digits.push(a);
        if rem.is_zero() {
            terminates = true;
            break;
        }
        num = den;
        den = rem;
    }
    let mut cf = ContinuedFraction::from_digits(digits, terminates)?;
    cf.value = x;
    Ok(cf)
}

/// First `count` convergents p_n/q_n.
pub fn convergents(cf: &ContinuedFraction, count: usize) -> Result<Vec<Convergent>> {
    if count > cf.digits.len() {
        return invalid(format!("requested {count} convergents from {} digits", cf.digits.len()));
    }
    let overflow = || Error::CapacityExceeded("convergent exceeds 128-bit range".into());
    let (mut p0, mut q0): (i128, i128) = (1, 0);
    let (mut p1, mut q1): (i128, i128) = (cf.digits[0] as i128, 1);
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return Ok(out);
    }
    out.push(Convergent { p: p1, q: q1 });
    for &a in &cf.digits[1..count] {
        let a = a as i128;
        let p2 = a.checked_mul(p1).and_then(|v| v.checked_add(p0)).ok_or_else(overflow)?;
        let q2 = a.checked_mul(q1).and_then(|v| v.checked_add(q0)).ok_or_else(overflow)?;
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        out.push(Convergent { p: p1, q: q1 });
    }
    Ok(out)
}

fn ratio(c: &Convergent) -> BigRational {
    BigRational::new(BigInt::from(c.p), BigInt::from(c.q))
}

/// Rigorous upper bound on |ω − p/q|.
pub fn error_upper_bound(omega: &ContinuedFraction, c: &Convergent) -> f64 {
    let (lo, hi) = omega.enclosure();
    let pq = ratio(c);
    let e = std::cmp::max((&lo - &pq).abs(), (&hi - &pq).abs());
    if e.is_zero() {
        return 0.0;
    }
    e.to_f64().unwrap_or(f64::INFINITY).next_up()
}

/// Rigorous lower bound on |ω − p/q| (zero when p/q lies inside the enclosure).
pub fn error_lower_bound(omega: &ContinuedFraction, c: &Convergent) -> f64 {
    let (lo, hi) = omega.enclosure();
    let pq = ratio(c);
    if lo <= pq && pq <= hi {
        return 0.0;
    }
    let e = std::cmp::min((&lo - &pq).abs(), (&hi - &pq).abs());
    e.to_f64().unwrap_or(0.0).next_down().max(0.0)
}

/// True iff |ω − p/q| ≤ ψ(q)/q is proven.
pub fn certify(omega: &ContinuedFraction, c: &Convergent, psi: &ApproxFunction) -> bool {
    let err = error_upper_bound(omega, c);
    err == 0.0 || err <= psi.psi_over_q(c.q).lo
}

/// Checks 2⁻¹ωq ≤ p ≤ 2ωq using the enclosure of ω.
pub fn numerator_bracket(omega: &ContinuedFraction, c: &Convergent) -> bool {
    let (lo, hi) = omega.enclosure();
    let q = BigRational::from_integer(BigInt::from(c.q));
    let p = BigRational::from_integer(BigInt::from(c.p));
    let two = BigRational::from_integer(BigInt::from(2));
    &hi * &q <= &two * &p && p <= two * lo * q
}

/// Checks |ω − p/q| ≥ q^{−(1+log q)} on a single convergent.
pub fn not_too_well_approximated(omega: &ContinuedFraction, c: &Convergent) -> bool {
    if c.q < 2 {
        return true;
    }
    let q = Interval::from_u128(c.q as u128);
    let bound = (Interval::point(-1.0) * (Interval::point(1.0) + q.ln()) * q.ln()).exp();
    error_lower_bound(omega, c) >= bound.hi
}

/// Builds a terminating continued fraction whose convergents are all
/// ψ-convergents: every digit satisfies a_{n+1} ≥ 1/(q_n ψ(q_n)).
/// The seed picks a₀ ∈ {1, 2, 3}; later digits are the lowest admissible.
pub fn synthesize(psi: &ApproxFunction, seed: u64, depth: usize) -> Result<ContinuedFraction> {
    if psi.kind != ApproxKind::Power {
        return invalid("synthesize needs the power kind");
    }
    psi.validate()?;
    if depth == 0 {
        return invalid("depth must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut digits = vec![rng.gen_range(1..=3u64)];
    let (mut q0, mut q1): (i128, i128) = (0, 1);
    while digits.len() < depth {
        let need = (Interval::from_u128(q1 as u128).powf(psi.tau) / Interval::point(psi.c)).hi.ceil();
        if !(need < 1.8e19) {
            return Err(Error::CapacityExceeded(format!("digit bound {need:e} exceeds u64 at q = {q1}")));
        }
        let a = (need as u64).max(1);
        let q2 = (a as i128)
            .checked_mul(q1)
            .and_then(|v| v.checked_add(q0))
            .ok_or_else(|| Error::CapacityExceeded(format!("denominator overflow at depth {}", digits.len())))?;
        digits.push(a);
        (q0, q1) = (q1, q2);
    }
    convergents(&ContinuedFraction::from_digits(digits.clone(), true)?, depth)?;
    ContinuedFraction::from_digits(digits, true)
}

/// Growth check q_{n+1} ≤ q_n^{log q_n} per level (levels with q_n < 3 are skipped).
pub fn growth_within_log_power(convs: &[Convergent]) -> Vec<bool> {
    convs
        .windows(2)
        .map(|w| {
            let (qn, qn1) = (w[0].q as f64, w[1].q as f64);
            qn < 3.0 || qn1.ln() <= qn.ln() * qn.ln()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ScalingRequest {
    pub l_min: f64,
    pub n_gen: usize,
    pub r: f64,
    pub sup_v: f64,
    /// Constant bounding 3^{2N} R² ψ(q)/q.
    pub c_assumption: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingChoice {
    pub convergent: Convergent,
    pub index: usize,
    pub big_l: f64,
    pub l_residual: f64,
    pub assumption_lhs: f64,
    pub assumption_residual: f64,
    pub error_bound: f64,
}

/// 𝙻 = ω²q²/8 − 4 sup|V|.
pub fn big_l(omega: f64, q: i128, sup_v: f64) -> f64 {
    let q = q as f64;
    omega * omega * q * q / 8.0 - 4.0 * sup_v
}

/// Smallest certified ψ-convergent meeting the 𝙻 and small-ψ conditions.
pub fn select_scaling(omega: &ContinuedFraction, psi: &ApproxFunction, req: &ScalingRequest) -> Result<ScalingChoice> {
    psi.validate()?;
    let mut convs = Vec::new();
    for n in 1..=omega.digits.len() {
        match convergents(omega, n) {
            Ok(c) => convs = c,
            Err(Error::CapacityExceeded(_)) => break,
            Err(e) => return Err(e),
        }
    }
    let factor = 9f64.powi(req.n_gen as i32) * req.r * req.r;
    for (index, c) in convs.iter().enumerate() {
        let l = big_l(omega.value, c.q, req.sup_v);
        if l < req.l_min || !certify(omega, c, psi) {
            continue;
        }
        let lhs = factor * psi.psi_over_q(c.q).hi;
        if lhs <= req.c_assumption {
            return Ok(ScalingChoice {
                convergent: *c,
                index,
                big_l: l,
                l_residual: l - req.l_min,
                assumption_lhs: lhs,
                assumption_residual: req.c_assumption - lhs,
                error_bound: error_upper_bound(omega, c),
            });
        }
    }
    Err(Error::NoConvergentInRange(format!(
        "none of {} convergents meets L >= {} and the psi condition",
        convs.len(),
        req.l_min
    )))
}

/// Scaling data for a given convergent index, without requiring the conditions to hold.
pub fn scaling_at(omega: &ContinuedFraction, psi: &ApproxFunction, req: &ScalingRequest, index: usize) -> Result<ScalingChoice> {
    psi.validate()?;
    let convs = convergents(omega, index + 1)?;
    let c = convs[index];
    let l = big_l(omega.value, c.q, req.sup_v);
    let lhs = 9f64.powi(req.n_gen as i32) * req.r * req.r * psi.psi_over_q(c.q).hi;
    Ok(ScalingChoice {
        convergent: c,
        index,
        big_l: l,
        l_residual: l - req.l_min,
        assumption_lhs: lhs,
        assumption_residual: req.c_assumption - lhs,
        error_bound: error_upper_bound(omega, &c),
    })
}
