//! Explicit Runge–Kutta integrators: adaptive Dormand–Prince 5(4) with dense
//! output, and fixed-step classical RK4.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub trait OdeSystem<T: Real> {
    fn dim(&self) -> usize;
    fn rhs(&self, t: T, y: &[T], dy: &mut [T]);
}

/// Views an interleaved (re, im) real slice as complex numbers.
pub fn as_complex<T: Real>(y: &[T]) -> &[Complex<T>] {
    assert!(y.len().is_multiple_of(2));
    // SAFETY: Complex<T> is repr(C) { re: T, im: T } with the alignment of T.
    unsafe { std::slice::from_raw_parts(y.as_ptr() as *const Complex<T>, y.len() / 2) }
}

pub fn as_complex_mut<T: Real>(y: &mut [T]) -> &mut [Complex<T>] {
    assert!(y.len().is_multiple_of(2));
    // SAFETY: as in `as_complex`.
    unsafe { std::slice::from_raw_parts_mut(y.as_mut_ptr() as *mut Complex<T>, y.len() / 2) }
}

pub fn to_real<T: Real>(z: &[Complex<T>]) -> Vec<T> {
    z.iter().flat_map(|c| [c.re, c.im]).collect()
}

/// One accepted step with its continuous extension.
#[derive(Clone, Debug)]
pub struct DenseSegment<T> {
    pub t0: T,
    pub h: T,
    r: [Vec<T>; 5],
}

impl<T: Real> DenseSegment<T> {
    pub fn t1(&self) -> T {
        self.t0 + self.h
    }

    pub fn eval_into(&self, t: T, out: &mut [T]) {
        let th = (t - self.t0) / self.h;
        let th1 = T::one() - th;
        let [r1, r2, r3, r4, r5] = &self.r;
        for i in 0..out.len() {
            out[i] = r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
        }
    }

    pub fn eval(&self, t: T) -> Vec<T> {
        let mut out = vec![T::zero(); self.r[0].len()];
        self.eval_into(t, &mut out);
        out
    }

    /// State at the end of the step.
    pub fn end_state(&self) -> Vec<T> {
        self.r[0].iter().zip(&self.r[1]).map(|(a, b)| *a + *b).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub segments: Vec<DenseSegment<T>>,
    pub t_start: T,
    pub y_start: Vec<T>,
    pub t_end: T,
    pub y_end: Vec<T>,
    pub stats: Stats,
}

impl<T: Real> Trajectory<T> {
    /// Dense evaluation; times outside the covered range are clamped.
    pub fn eval(&self, t: T) -> Vec<T> {
        if self.segments.is_empty() || t <= self.t_start {
            return self.y_start.clone();
        }
        if t >= self.t_end {
            return self.y_end.clone();
        }
        let i = self.segments.partition_point(|s| s.t1() < t).min(self.segments.len() - 1);
        self.segments[i].eval(t)
    }

    /// Accepted step times including the start.
    pub fn times(&self) -> Vec<T> {
        std::iter::once(self.t_start).chain(self.segments.iter().map(|s| s.t1())).collect()
    }

    /// (time, state) at every accepted step including the start.
    pub fn samples(&self) -> Vec<(T, Vec<T>)> {
        std::iter::once((self.t_start, self.y_start.clone()))
            .chain(self.segments.iter().map(|s| (s.t1(), s.end_state())))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Clone, Copy, Debug)]
pub struct Dopri5<T> {
    pub rtol: T,
    pub atol: T,
    pub h_init: Option<T>,
    pub h_max: Option<T>,
    pub max_steps: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

impl<T: Real> Dopri5<T> {
    pub fn new(rtol: T, atol: T) -> Self {
        Self { rtol, atol, h_init: None, h_max: None, max_steps: 50_000_000 }
    }

    /// Integrates from `t0` to `t_end` and keeps the dense output.
    pub fn integrate<S: OdeSystem<T>>(&self, sys: &S, t0: T, y0: &[T], t_end: T) -> Result<Trajectory<T>> {
        let mut segments = Vec::new();
        let (t, y, stats) = self.integrate_observed(sys, t0, y0, t_end, |seg| {
            segments.push(seg.clone());
            Control::Continue
        })?;
        Ok(Trajectory { segments, t_start: t0, y_start: y0.to_vec(), t_end: t, y_end: y, stats })
    }

    /// Integrates while handing every accepted step to `observer`; stops at
    /// `t_end` or when the observer returns [`Control::Stop`]. Returns the
    /// final time, state and step statistics.
    pub fn integrate_observed<S, F>(&self, sys: &S, t0: T, y0: &[T], t_end: T, mut observer: F) -> Result<(T, Vec<T>, Stats)>
    where
        S: OdeSystem<T>,
        F: FnMut(&DenseSegment<T>) -> Control,
    {
        let n = sys.dim();
        assert_eq!(y0.len(), n, "state dimension mismatch");
        let l = T::lit;
        let dir = if t_end >= t0 { T::one() } else { -T::one() };
        let span = (t_end - t0).abs();
        let mut stats = Stats::default();
        let mut y = y0.to_vec();
        let mut t = t0;
        if span == T::zero() {
            return Ok((t, y, stats));
        }
        let h_max = self.h_max.unwrap_or(span).min(span);
        let mut k: Vec<Vec<T>> = vec![vec![T::zero(); n]; 7];
        let mut ytmp = vec![T::zero(); n];
        let mut ynew = vec![T::zero(); n];
        sys.rhs(t, &y, &mut k[0]);
        stats.evaluations += 1;
        let mut h = match self.h_init {
            Some(h) => h.abs().min(h_max),
            None => self.initial_step(sys, t, &y, &k[0], dir, h_max, &mut stats),
        };
        let mut last_rejected = false;
        let eps = T::epsilon();
        loop {
            if stats.accepted + stats.rejected >= self.max_steps {
                return Err(Error::StepSizeUnderflow { t: t.to_f64().unwrap(), h: h.to_f64().unwrap() });
            }
            let remaining = (t_end - t).abs();
            let last = h >= remaining * (T::one() - l(4.0) * eps);
            if last {
                h = remaining;
            }
            if h <= eps * l(16.0) * t.abs().max(T::one()) {
                return Err(Error::StepSizeUnderflow { t: t.to_f64().unwrap(), h: h.to_f64().unwrap() });
            }
            let hs = h * dir;
            let stage = |k: &Vec<Vec<T>>, coeffs: &[(usize, f64)], out: &mut Vec<T>| {
                for i in 0..n {
                    let mut acc = T::zero();
                    for &(j, c) in coeffs {
                        acc += l(c) * k[j][i];
                    }
                    out[i] = y[i] + hs * acc;
                }
            };
            stage(&k, &[(0, A21)], &mut ytmp);
            sys.rhs(t + l(C2) * hs, &ytmp, &mut k[1]);
            stage(&k, &[(0, A31), (1, A32)], &mut ytmp);
            sys.rhs(t + l(C3) * hs, &ytmp, &mut k[2]);
            stage(&k, &[(0, A41), (1, A42), (2, A43)], &mut ytmp);
            sys.rhs(t + l(C4) * hs, &ytmp, &mut k[3]);
            stage(&k, &[(0, A51), (1, A52), (2, A53), (3, A54)], &mut ytmp);
            sys.rhs(t + l(C5) * hs, &ytmp, &mut k[4]);
            stage(&k, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)], &mut ytmp);
            sys.rhs(t + hs, &ytmp, &mut k[5]);
            stage(&k, &[(0, A71), (2, A73), (3, A74), (4, A75), (5, A76)], &mut ynew);
            let t_new = if last { t_end } else { t + hs };
            sys.rhs(t_new, &ynew, &mut k[6]);
            stats.evaluations += 6;

            let mut err = T::zero();
            for i in 0..n {
                let e = hs
                    * (l(E1) * k[0][i] + l(E3) * k[2][i] + l(E4) * k[3][i] + l(E5) * k[4][i] + l(E6) * k[5][i] + l(E7) * k[6][i]);
                let sc = self.atol + self.rtol * y[i].abs().max(ynew[i].abs());
                err += (e / sc) * (e / sc);
            }
            let err = (err / l(n as f64)).sqrt();
            if err <= T::one() {
                stats.accepted += 1;
                let mut r: [Vec<T>; 5] = std::array::from_fn(|_| vec![T::zero(); n]);
                for i in 0..n {
                    let r2 = ynew[i] - y[i];
                    let r3 = hs * k[0][i] - r2;
                    r[0][i] = y[i];
                    r[1][i] = r2;
                    r[2][i] = r3;
                    r[3][i] = r2 - hs * k[6][i] - r3;
                    r[4][i] = hs
                        * (l(D1) * k[0][i] + l(D3) * k[2][i] + l(D4) * k[3][i] + l(D5) * k[4][i] + l(D6) * k[5][i]
                            + l(D7) * k[6][i]);
                }
                let seg = DenseSegment { t0: t, h: hs, r };
                t = t_new;
                std::mem::swap(&mut y, &mut ynew);
                k.swap(0, 6);
                let ctl = observer(&seg);
                if last || ctl == Control::Stop {
                    return Ok((t, y, stats));
                }
                let fac = if err == T::zero() { l(5.0) } else { (l(0.9) * err.powf(l(-0.2))).min(l(5.0)).max(l(0.2)) };
                let fac = if last_rejected { fac.min(T::one()) } else { fac };
                h = (h * fac).min(h_max);
                last_rejected = false;
            } else {
                stats.rejected += 1;
                last_rejected = true;
                let fac = if err.is_finite() { (l(0.9) * err.powf(l(-0.2))).max(l(0.1)) } else { l(0.1) };
                h *= fac.min(T::one());
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn initial_step<S: OdeSystem<T>>(&self, sys: &S, t: T, y: &[T], f0: &[T], dir: T, h_max: T, stats: &mut Stats) -> T {
        let l = T::lit;
        let n = y.len();
        let sc: Vec<T> = y.iter().map(|v| self.atol + self.rtol * v.abs()).collect();
        let norm = |v: &[T]| (v.iter().zip(&sc).map(|(a, s)| (*a / *s) * (*a / *s)).sum::<T>() / l(n as f64)).sqrt();
        let d0 = norm(y);
        let d1 = norm(f0);
        let h0 = if d0 < l(1e-5) || d1 < l(1e-5) { l(1e-6) } else { l(0.01) * d0 / d1 };
        let h0 = h0.min(h_max);
        let y1: Vec<T> = y.iter().zip(f0).map(|(a, b)| *a + h0 * dir * *b).collect();
        let mut f1 = vec![T::zero(); n];
        sys.rhs(t + h0 * dir, &y1, &mut f1);
        stats.evaluations += 1;
        let diff: Vec<T> = f1.iter().zip(f0).map(|(a, b)| *a - *b).collect();
        let d2 = norm(&diff) / h0;
        let m = d1.max(d2);
        let h1 = if m <= l(1e-15) { (h0 * l(1e-3)).max(l(1e-6)) } else { (l(0.01) / m).powf(l(0.2)) };
        (l(100.0) * h0).min(h1).min(h_max)
    }
}

/// Classical RK4 with `steps` equal steps from `t0` to `t1`.
pub fn rk4_fixed<T: Real, S: OdeSystem<T>>(sys: &S, t0: T, y0: &[T], t1: T, steps: usize) -> Vec<T> {
    let n = y0.len();
    let steps = steps.max(1);
    let h = (t1 - t0) / T::lit(steps as f64);
    let half = T::lit(0.5);
    let sixth = T::lit(1.0 / 6.0);
    let mut y = y0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]);
    for s in 0..steps {
        let t = t0 + h * T::lit(s as f64);
        sys.rhs(t, &y, &mut k1);
        for i in 0..n {
            tmp[i] = y[i] + half * h * k1[i];
        }
        sys.rhs(t + half * h, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + half * h * k2[i];
        }
        sys.rhs(t + half * h, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * k3[i];
        }
        sys.rhs(t + h, &tmp, &mut k4);
        for i in 0..n {
            y[i] += sixth * h * (k1[i] + (k2[i] + k3[i]) * T::lit(2.0) + k4[i]);
        }
    }
    y
}
