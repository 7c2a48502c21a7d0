use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inputs to the strong-regime parameter planner; implied constants are taken as 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrongRegimeInputs {
    pub s: f64,
    pub tau: f64,
    pub s0: f64,
    pub epsilon: f64,
    pub n_gen: usize,
    /// Target size μ of the initial Sobolev norm.
    pub mu: f64,
    pub r: f64,
    pub omega: f64,
    /// Desk-scale convergent denominator to test against the lower bound.
    pub q: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrongRegimePlan {
    pub stage: String,
    pub nu: f64,
    pub nu_star: f64,
    /// log₁₀ of the smallest q meeting both lower bounds.
    pub log10_q_min: f64,
    pub log10_lambda_lo: f64,
    pub log10_lambda_hi: f64,
    /// λ ≥ exp(5^N) at the lower end of the window.
    pub lambda_reaches_explosion_scale: bool,
    pub desk_q_admissible: Option<bool>,
}

/// Feasibility of the compatibility conditions and the admissible (q, λ) window:
/// q^ν ≥ ω^{3/(2(1+ε))} 3^{N/(1+ε)} 2^{N/2} R^{s+1/(1+ε)} μ⁻¹, (qR)^{ν*} ≥ 2^{N/2} μ⁻¹,
/// 2^{N/2} (qR)^s μ⁻¹ ≤ λ ≤ 2^{N/2} 3^{Ns} ω^s (qR)^s μ⁻¹, all in log₁₀.
pub fn plan_strong_regime(inp: &StrongRegimeInputs) -> Result<StrongRegimePlan> {
    let StrongRegimeInputs { s, tau, s0, epsilon, n_gen, mu, r, omega, q } = *inp;
    if !(s > 1.0 && epsilon > 0.0 && mu > 0.0 && r >= 1.0 && omega > 0.0) {
        return Err(Error::InvalidInput("need s > 1, ε > 0, μ > 0, R ≥ 1, ω > 0".into()));
    }
    let e1 = 1.0 + epsilon;
    let nu = tau / (2.0 * e1) - s;
    let nu_star = s0 / (2.0 * e1) - s;
    if !(nu > 0.0) {
        return Err(Error::InfeasibleRegime(format!("ν = τ/(2(1+ε)) − s = {nu} ≤ 0 (τ = {tau}, s = {s})")));
    }
    if !(nu_star > 0.0) {
        return Err(Error::InfeasibleRegime(format!("ν* = s₀/(2(1+ε)) − s = {nu_star} ≤ 0 (s₀ = {s0}, s = {s})")));
    }
    let n = n_gen as f64;
    let (l2, l3) = (2f64.log10(), 3f64.log10());
    let (lw, lr, lmu) = (omega.log10(), r.log10(), mu.log10());
    let first = (1.5 / e1 * lw + n / e1 * l3 + 0.5 * n * l2 + (s + 1.0 / e1) * lr - lmu) / nu;
    let second = (0.5 * n * l2 - lmu) / nu_star - lr;
    let log10_q_min = first.max(second);
    let lo = 0.5 * n * l2 + s * (log10_q_min + lr) - lmu;
    let hi = lo + n * s * l3 + s * lw;
    Ok(StrongRegimePlan {
        stage: "plan_strong".into(),
        nu,
        nu_star,
        log10_q_min,
        log10_lambda_lo: lo,
        log10_lambda_hi: hi,
        lambda_reaches_explosion_scale: lo >= 5f64.powf(n) * std::f64::consts::LOG10_E,
        desk_q_admissible: q.map(|q| q.log10() >= log10_q_min),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GronwallInputs {
    pub n_gen: usize,
    pub lambda: f64,
    pub epsilon: f64,
    pub big_l: f64,
    pub theta: f64,
    /// Time constant of the toy orbit, T₀ = 𝕂 γ N².
    pub k_time: f64,
    pub gamma: f64,
    pub c0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    /// Natural logarithms of both sides of `lhs < rhs`.
    pub ln_lhs: f64,
    pub ln_rhs: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GronwallReport {
    pub stage: String,
    pub inputs: GronwallInputs,
    pub conditions: Vec<Condition>,
}

/// The three smallness conditions closing the bootstrap of the approximation argument,
/// evaluated in logarithms at the given parameters:
/// miss1: (3/2) e^E < λ^{1−ε} 𝙻^{1/2};
/// miss2: ϑ < (2/3) λ^{−2−ε} N⁻⁷ 2^{−3N+1} γ⁻² 𝕂⁻² e^{−E};
/// miss3: 𝕂 γ N⁷ 2^{5N} (3/2) e^E < λ^{2−ε} 𝙻;
/// with E = 𝕂 γ N⁴ 4^N C₀.
pub fn gronwall_conditions(inp: &GronwallInputs) -> GronwallReport {
    let GronwallInputs { n_gen, lambda, epsilon, big_l, theta, k_time, gamma, c0 } = *inp;
    let n = n_gen as f64;
    let big_e = k_time * gamma * n.powi(4) * 4f64.powf(n) * c0;
    let (ll, lbl) = (lambda.ln(), big_l.ln());
    let ln2 = 2f64.ln();
    let cond = |name: &str, ln_lhs: f64, ln_rhs: f64| Condition { name: name.into(), ln_lhs, ln_rhs, holds: ln_lhs < ln_rhs };
    let conditions = vec![
        cond("miss1", 1.5f64.ln() + big_e, (1.0 - epsilon) * ll + 0.5 * lbl),
        cond(
            "miss2",
            theta.ln(),
            (2.0f64 / 3.0).ln() - (2.0 + epsilon) * ll - 7.0 * n.ln() + (1.0 - 3.0 * n) * ln2
                - 2.0 * gamma.ln()
                - 2.0 * k_time.ln()
                - big_e,
        ),
        cond("miss3", k_time.ln() + gamma.ln() + 7.0 * n.ln() + 5.0 * n * ln2 + 1.5f64.ln() + big_e, (2.0 - epsilon) * ll + lbl),
    ];
    GronwallReport { stage: "gronwall".into(), inputs: *inp, conditions }
}
