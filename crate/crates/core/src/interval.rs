use serde::{Deserialize, Serialize};
use std::ops::{Add, Div, Mul, Sub};

/// Closed f64 interval with outward rounding after every operation.
///
/// Elementary transcendental functions are widened by `TRANSCENDENTAL_ULPS`
/// on each side, which covers the error bound of the platform libm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

const TRANSCENDENTAL_ULPS: usize = 4;

fn down(x: f64, k: usize) -> f64 {
    (0..k).fold(x, |v, _| v.next_down())
}

fn up(x: f64, k: usize) -> f64 {
    (0..k).fold(x, |v, _| v.next_up())
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "interval bounds out of order: [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    /// Enclosure of an integer that may not be exactly representable.
    pub fn from_u128(v: u128) -> Self {
        let x = v as f64;
        if x as u128 == v {
            Self::point(x)
        } else {
            Self { lo: x.next_down(), hi: x.next_up() }
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn ln(self) -> Self {
        assert!(self.lo > 0.0, "ln of non-positive interval");
        Self { lo: down(self.lo.ln(), TRANSCENDENTAL_ULPS), hi: up(self.hi.ln(), TRANSCENDENTAL_ULPS) }
    }

    pub fn exp(self) -> Self {
        Self {
            lo: down(self.lo.exp(), TRANSCENDENTAL_ULPS).max(0.0),
            hi: up(self.hi.exp(), TRANSCENDENTAL_ULPS),
        }
    }

    /// `self^e` for a positive base.
    pub fn powf(self, e: f64) -> Self {
        assert!(self.lo > 0.0, "powf of non-positive interval");
        let a = down(self.lo.powf(e), TRANSCENDENTAL_ULPS);
        let b = down(self.hi.powf(e), TRANSCENDENTAL_ULPS);
        let c = up(self.lo.powf(e), TRANSCENDENTAL_ULPS);
        let d = up(self.hi.powf(e), TRANSCENDENTAL_ULPS);
        Self { lo: a.min(b).max(0.0), hi: c.max(d) }
    }

    pub fn recip(self) -> Self {
        Interval::point(1.0) / self
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, o: Interval) -> Interval {
        Interval { lo: (self.lo + o.lo).next_down(), hi: (self.hi + o.hi).next_up() }
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, o: Interval) -> Interval {
        Interval { lo: (self.lo - o.hi).next_down(), hi: (self.hi - o.lo).next_up() }
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, o: Interval) -> Interval {
        let p = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        let lo = p.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Interval { lo: lo.next_down(), hi: hi.next_up() }
    }
}

impl Div for Interval {
    type Output = Interval;
    fn div(self, o: Interval) -> Interval {
        assert!(o.lo > 0.0 || o.hi < 0.0, "division by interval containing zero");
        let p = [self.lo / o.lo, self.lo / o.hi, self.hi / o.lo, self.hi / o.hi];
        let lo = p.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Interval { lo: lo.next_down(), hi: hi.next_up() }
    }
}
