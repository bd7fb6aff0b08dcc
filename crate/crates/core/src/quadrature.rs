//! Adaptive Gauss-Kronrod (7/15) quadrature over a list of panels.
//!
//! Callers supply breakpoints at kinks and at the scale of any boundary
//! layer; the driver then bisects whichever panel carries the largest error
//! estimate until the total estimate drops below the requested tolerance.

use crate::error::{Error, Result};
use crate::scalar::Real;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult<T> {
    pub value: T,
    pub error: T,
    /// Integral of |f|, the reference scale for relative tolerances.
    pub l1: T,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_panels: usize,
}

impl<T: Real> Default for QuadratureOptions<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::tol(1e-13),
            abs_tol: T::zero(),
            max_panels: 4000,
        }
    }
}

#[derive(Clone, Copy)]
struct Panel<T> {
    a: T,
    b: T,
    value: T,
    error: T,
    l1: T,
}

fn gk15<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> Panel<T> {
    let half = T::lit(0.5);
    let centre = half * (a + b);
    let half_len = half * (b - a);
    let fc = f(centre);
    let mut kronrod = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    let mut l1 = fc.abs() * T::lit(WGK[7]);
    for j in 0..7 {
        let dx = half_len * T::lit(XGK[j]);
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        let w = T::lit(WGK[j]);
        kronrod += w * (f1 + f2);
        l1 += w * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += T::lit(WG[j / 2]) * (f1 + f2);
        }
    }
    let scale = half_len.abs();
    Panel {
        a,
        b,
        value: kronrod * half_len,
        error: ((kronrod - gauss) * half_len).abs(),
        l1: l1 * scale,
    }
}

/// Integrate `f` over consecutive panels delimited by `breakpoints`
/// (sorted ascending, at least two entries).
pub fn integrate_panels<T, F>(f: F, breakpoints: &[T], opts: QuadratureOptions<T>) -> Result<QuadratureResult<T>>
where
    T: Real,
    F: Fn(T) -> T,
{
    if breakpoints.len() < 2 {
        return Err(Error::InvalidArgument("quadrature needs at least two breakpoints".into()));
    }
    let mut panels: Vec<Panel<T>> = breakpoints
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| gk15(&f, w[0], w[1]))
        .collect();
    if panels.is_empty() {
        return Ok(QuadratureResult { value: T::zero(), error: T::zero(), l1: T::zero() });
    }

    loop {
        let total_err: T = panels.iter().map(|p| p.error).sum();
        let l1: T = panels.iter().map(|p| p.l1).sum();
        let target = opts.abs_tol.max(opts.rel_tol * l1);
        if total_err <= target {
            let mut values: Vec<T> = panels.iter().map(|p| p.value).collect();
            values.sort_by(|x, y| x.abs().partial_cmp(&y.abs()).unwrap_or(std::cmp::Ordering::Equal));
            let value = values.into_iter().fold(T::zero(), |acc, v| acc + v);
            return Ok(QuadratureResult { value, error: total_err, l1 });
        }
        if panels.len() >= opts.max_panels {
            return Err(Error::Quadrature { achieved: total_err.as_f64(), tolerance: target.as_f64() });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |(bi, be), (i, p)| if p.error > be { (i, p.error) } else { (bi, be) });
        let p = panels.swap_remove(worst);
        let mid = T::lit(0.5) * (p.a + p.b);
        if !(mid > p.a && mid < p.b) {
            // Panel cannot be split further in this precision.
            return Err(Error::Quadrature { achieved: total_err.as_f64(), tolerance: target.as_f64() });
        }
        panels.push(gk15(&f, p.a, mid));
        panels.push(gk15(&f, mid, p.b));
    }
}

pub fn integrate<T, F>(f: F, a: T, b: T, opts: QuadratureOptions<T>) -> Result<QuadratureResult<T>>
where
    T: Real,
    F: Fn(T) -> T,
{
    integrate_panels(f, &[a, b], opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let r = integrate(|x: f64| x.powi(10), 0.0, 1.0, QuadratureOptions::default()).unwrap();
        assert!((r.value - 1.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn sharp_boundary_layer_needs_adaptivity() {
        let lam = 1e5_f64;
        let exact = (1.0 - (-lam).exp()) / lam;
        let r = integrate(|x: f64| (-lam * x).exp(), 0.0, 1.0, QuadratureOptions::default()).unwrap();
        assert!((r.value - exact).abs() <= 1e-12 * exact, "{} vs {}", r.value, exact);
    }

    #[test]
    fn kink_at_breakpoint() {
        let bps = [-1.0_f64, 0.0, 1.0];
        let r = integrate_panels(|x: f64| x.abs(), &bps, QuadratureOptions::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reports_failure_when_budget_exhausted() {
        let opts = QuadratureOptions { rel_tol: 1e-15, abs_tol: 0.0, max_panels: 3 };
        let err = integrate(|x: f64| (1.0 / (x + 1e-9)).sin(), 0.0, 1.0, opts).unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }));
    }
}
