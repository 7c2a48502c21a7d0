use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar used by the floating-point parts of the library.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + NumAssign + Sum + Default + Debug + Display + Send + Sync + 'static
{
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal out of range")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Compensated summation over an iterator.
pub fn kahan_sum<T: Real, I: IntoIterator<Item = T>>(it: I) -> T {
    let mut sum = T::zero();
    let mut c = T::zero();
    for x in it {
        let y = x - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_beats_naive_on_small_increments() {
        let xs = std::iter::once(1.0f64).chain(std::iter::repeat_n(1e-16, 10_000));
        let s = kahan_sum(xs);
        assert!((s - (1.0 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn lit_works_for_f32() {
        assert_eq!(f32::lit(0.5), 0.5f32);
    }
}
