//! Resonance functionals on momentum quadruples and their extrema over Λ.

use std::collections::HashSet;

use num_rational::BigRational;
use num_traits::{FromPrimitive, Num};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lambda_set::PlacedSet;
use crate::lattice::{Frequency, Mode, PotentialSpec};

/// Four modes with n1 − n2 + n3 − n4 = 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Quadruple {
    pub n: [Mode; 4],
}

impl Quadruple {
    pub fn new(n1: Mode, n2: Mode, n3: Mode, n4: Mode) -> Result<Self> {
        if n1 - n2 + n3 - n4 != Mode::new(0, 0) {
            return invalid(format!("quadruple {n1:?},{n2:?},{n3:?},{n4:?} violates momentum"));
        }
        Ok(Self { n: [n1, n2, n3, n4] })
    }

    /// Completes (n1, n2, n3) with n4 = n1 − n2 + n3.
    pub fn complete(n1: Mode, n2: Mode, n3: Mode) -> Self {
        Self { n: [n1, n2, n3, n1 - n2 + n3] }
    }

    /// (Σ ± j², Σ ± k²) with signs + − + −.
    pub fn integer_parts(&self) -> (i128, i128) {
        let s = [1i128, -1, 1, -1];
        let a = self.n.iter().zip(s).map(|(m, e)| e * (m.j as i128).pow(2)).sum();
        let b = self.n.iter().zip(s).map(|(m, e)| e * (m.k as i128).pow(2)).sum();
        (a, b)
    }

    pub fn is_trivial(&self) -> bool {
        let [n1, n2, n3, _] = self.n;
        n1 == n2 || n2 == n3
    }
}

/// Ω_ω from the definition Σ ±|n_i|²_ω, in any numeric type.
pub fn omega_definition<S: Num + Clone + FromPrimitive>(quad: &Quadruple, omega: &S) -> S {
    let ev = |m: Mode| crate::lattice::eigenvalue(m, omega);
    let [n1, n2, n3, n4] = quad.n;
    ev(n1) - ev(n2) + ev(n3) - ev(n4)
}

/// Ω_ω = 2⟨n1 − n2, n2 − n3⟩_ω with the second coordinate weighted by ω².
pub fn omega_parallelogram<S: Num + Clone + FromPrimitive>(quad: &Quadruple, omega: &S) -> S {
    let [n1, n2, n3, _] = quad.n;
    let (a, b) = (n1 - n2, n2 - n3);
    let jj = S::from_i128(2 * a.j as i128 * b.j as i128).unwrap();
    let kk = S::from_i128(2 * a.k as i128 * b.k as i128).unwrap();
    jj + omega.clone() * omega.clone() * kk
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaValues {
    pub omega_w: f64,
    pub omega_v: f64,
    pub total: f64,
    /// Exact Ω_ω when ω is rational.
    #[serde(skip)]
    pub exact_w: Option<BigRational>,
}

pub fn omega_values(quad: &Quadruple, freq: &Frequency, pot: &PotentialSpec) -> OmegaValues {
    let (a, b) = quad.integer_parts();
    let omega_w = freq.quadratic(a, b);
    let [n1, n2, n3, n4] = quad.n;
    let omega_v = pot.coeff(n1) - pot.coeff(n2) + pot.coeff(n3) - pot.coeff(n4);
    OmegaValues { omega_w, omega_v, total: omega_w + omega_v, exact_w: freq.quadratic_exact(a, b) }
}

/// Number of members outside Λ.
pub fn classify(quad: &Quadruple, lambda: &HashSet<Mode>) -> usize {
    quad.n.iter().filter(|m| !lambda.contains(m)).count()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub value: f64,
    pub witness: Option<Quadruple>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct L1Estimate {
    /// min |Ω_{ω,V}| over class-1 quadruples with |n4| ≤ box.
    pub min_abs: f64,
    pub witness: Quadruple,
    pub enumerated: usize,
    pub box_radius: f64,
    /// Largest |n4| forced by a class-1 triple.
    pub max_forced_norm: f64,
    /// Class-1 quadruples whose forced mode lies outside the box.
    pub excluded: usize,
    pub excluded_min_abs: f64,
    /// The reported minimum is the minimum over the whole class.
    pub certified: bool,
}

/// Enumerates every class-1 quadruple (three members in Λ, the fourth forced
/// by momentum and outside Λ). Quadruples whose fourth mode leaves the box are
/// still evaluated so that the reported minimum carries a certificate.
pub fn estimate_l1(ps: &PlacedSet, freq: &Frequency, pot: &PotentialSpec, box_radius: f64) -> Result<L1Estimate> {
    let mut points: Vec<Mode> = ps.mode_set().into_iter().collect();
    points.sort();
    let set: HashSet<Mode> = points.iter().copied().collect();
    let box_sq = box_radius * box_radius;
    let w2 = freq.value * freq.value;
    let sup_v = pot.sup_abs();
    struct Acc {
        min: (f64, Option<Quadruple>),
        ex_min: f64,
        count: usize,
        excluded: usize,
        max_forced: f64,
    }
    let merge = |a: Acc, b: Acc| Acc {
        min: if b.min.0 < a.min.0 { b.min } else { a.min },
        ex_min: a.ex_min.min(b.ex_min),
        count: a.count + b.count,
        excluded: a.excluded + b.excluded,
        max_forced: a.max_forced.max(b.max_forced),
    };
    let empty = || Acc { min: (f64::INFINITY, None), ex_min: f64::INFINITY, count: 0, excluded: 0, max_forced: 0.0 };
    let parts: Vec<Acc> = points
        .par_iter()
        .map(|&n1| {
            let mut acc = empty();
            for &n2 in &points {
                for &n3 in &points {
                    let quad = Quadruple::complete(n1, n2, n3);
                    let n4 = quad.n[3];
                    if set.contains(&n4) {
                        continue;
                    }
                    let r2 = n4.norm_sq() as f64;
                    acc.max_forced = acc.max_forced.max(r2.sqrt());
                    let inside = r2 <= box_sq;
                    let best = if inside { acc.min.0 } else { acc.ex_min };
                    let (a, b) = quad.integer_parts();
                    let rough = (a as f64 + w2 * b as f64).abs();
                    let slack = 1e-9 * (a.unsigned_abs() as f64 + w2 * b.unsigned_abs() as f64) + 4.0 * sup_v + 1.0;
                    let v = if rough - slack > best { rough } else { omega_values(&quad, freq, pot).total.abs() };
                    if inside {
                        acc.count += 1;
                        if v < acc.min.0 {
                            acc.min = (v, Some(quad));
                        }
                    } else {
                        acc.excluded += 1;
                        acc.ex_min = acc.ex_min.min(v);
                    }
                }
            }
            acc
        })
        .collect();
    let acc = parts.into_iter().fold(empty(), merge);
    let Some(witness) = acc.min.1 else {
        return Err(Error::EmptyClass(format!("no class-1 quadruple with |n4| <= {box_radius}")));
    };
    Ok(L1Estimate {
        min_abs: acc.min.0,
        witness,
        enumerated: acc.count,
        box_radius,
        max_forced_norm: acc.max_forced,
        excluded: acc.excluded,
        excluded_min_abs: acc.ex_min,
        certified: acc.excluded == 0 || acc.ex_min >= acc.min.0,
    })
}

/// max |Ω_{ω,V}| over the nuclear families of Λ (the trivial class contributes 0).
pub fn compute_u0(ps: &PlacedSet, freq: &Frequency, pot: &PotentialSpec) -> Extremum {
    let mut best = Extremum { value: 0.0, witness: None };
    for f in ps.families() {
        let quad = Quadruple { n: [f.parents[0], f.children[0], f.parents[1], f.children[1]] };
        let v = omega_values(&quad, freq, pot).total.abs();
        if v > best.value || best.witness.is_none() {
            best = Extremum { value: v, witness: Some(quad) };
        }
    }
    best
}

/// ϑ = 3^{2N} R² ω³ q ψ(q) + 4 (qR)^{−s₀}.
pub fn theta(n_gen: usize, r: f64, omega: f64, q: f64, psi_q: f64, s0: f64) -> f64 {
    9f64.powi(n_gen as i32) * r * r * omega.powi(3) * q * psi_q + 4.0 * (q * r).powf(-s0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceReport {
    pub stage: String,
    pub l1: L1Estimate,
    pub u0: Extremum,
    pub big_l: f64,
    pub theta: f64,
    pub u0_over_theta: f64,
    pub l1_over_big_l: f64,
}

pub struct ResonanceInputs<'a> {
    pub ps: &'a PlacedSet,
    pub freq: &'a Frequency,
    pub pot: &'a PotentialSpec,
    pub psi_q: f64,
    pub box_radius: f64,
}

pub fn resonance_report(inp: &ResonanceInputs) -> Result<ResonanceReport> {
    let q = inp.ps.q as f64;
    let l1 = estimate_l1(inp.ps, inp.freq, inp.pot, inp.box_radius)?;
    let u0 = compute_u0(inp.ps, inp.freq, inp.pot);
    let big_l = crate::diophantine::big_l(inp.freq.value, inp.ps.q as i128, inp.pot.sup_abs());
    let th = theta(inp.ps.n, inp.ps.r_empirical, inp.freq.value, q, inp.psi_q, inp.pot.s0);
    Ok(ResonanceReport {
        stage: "resonance".into(),
        u0_over_theta: u0.value / th,
        l1_over_big_l: l1.min_abs / big_l,
        l1,
        u0,
        big_l,
        theta: th,
    })
}
