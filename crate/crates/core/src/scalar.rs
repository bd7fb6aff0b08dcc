//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All spectral quantities are real-valued, so a single floating point
//! bound is enough. `f64` is the working precision for the experiments;
//! `f32` compiles and runs with tolerances scaled by its epsilon.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

pub trait Real:
    'static
    + Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    fn from_index(n: usize) -> Self {
        Self::from_usize(n).expect("index representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// A relative tolerance of `target`, never tighter than a few ulps of the type.
    fn tol(target: f64) -> Self {
        Self::lit(target).max(Self::epsilon() * Self::lit(8.0))
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Sum by a fixed binary tree so the result does not depend on how the
/// terms were produced (sequentially or in parallel).
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    match xs.len() {
        0 => T::zero(),
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Euclidean norm with scaling against overflow and underflow.
pub fn l2_norm<T: Real>(xs: &[T]) -> T {
    let scale = xs.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    if scale == T::zero() || !scale.is_finite() {
        return scale;
    }
    let s: T = xs.iter().map(|x| (*x / scale) * (*x / scale)).sum();
    scale * s.sqrt()
}

/// `1 - (1 + x) e^{-x}`, accurate for small `x` as well.
pub fn one_minus_one_plus_x_exp<T: Real>(x: T) -> T {
    if x.abs() < T::one() {
        // sum_{k>=2} (-1)^k (k-1) x^k / k!
        let mut term = x * x / T::lit(2.0);
        let mut acc = term;
        for k in 3..40usize {
            let kf = T::from_index(k);
            term = -term * x / kf * (kf - T::one()) / (kf - T::lit(2.0));
            acc += term;
            if term.abs() <= T::epsilon() * acc.abs() {
                break;
            }
        }
        acc
    } else {
        T::one() - (T::one() + x) * (-x).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_branch_matches_direct_formula_near_switch() {
        for &x in &[0.3_f64, 0.7, 0.99, 1.01] {
            let direct = 1.0 - (1.0 + x) * (-x).exp();
            assert!((one_minus_one_plus_x_exp(x) - direct).abs() <= 1e-15 * direct.abs() * 10.0);
        }
        let tiny = 1e-6_f64;
        let v = one_minus_one_plus_x_exp(tiny);
        let series = tiny * tiny / 2.0 - tiny.powi(3) / 3.0 + tiny.powi(4) / 8.0;
        assert!((v - series).abs() < 1e-15 * series);
    }

    #[test]
    fn pairwise_sum_matches_naive_for_exact_values() {
        let xs: Vec<f64> = (1..=100).map(|k| k as f64).collect();
        assert_eq!(pairwise_sum(&xs), 5050.0);
        assert_eq!(pairwise_sum::<f64>(&[]), 0.0);
    }

    #[test]
    fn l2_norm_survives_large_entries() {
        let xs = [3e200_f64, 4e200];
        assert!((l2_norm(&xs) - 5e200).abs() < 1e186);
        assert_eq!(l2_norm(&[0.0_f64; 4]), 0.0);
    }
}
