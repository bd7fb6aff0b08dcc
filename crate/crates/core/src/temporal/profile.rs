use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Uniform intervals in the dense check grid (endpoints and knots are added).
pub const CHECK_INTERVALS: usize = 10_000;

/// `cos_amp·cos(freq·t) + sin_amp·sin(freq·t)` on `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrigPiece<T> {
    pub start: T,
    pub end: T,
    pub cos_amp: T,
    pub sin_amp: T,
    pub freq: T,
}

impl<T: Real> TrigPiece<T> {
    pub fn value(&self, t: T) -> T {
        let w = self.freq * t;
        self.cos_amp * w.cos() + self.sin_amp * w.sin()
    }

    pub fn derivative(&self, t: T) -> T {
        let w = self.freq * t;
        self.freq * (self.sin_amp * w.cos() - self.cos_amp * w.sin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileShape<T> {
    Constant(T),
    /// Ascending coefficients `a_0 + a_1 t + …`.
    Polynomial(Vec<T>),
    PiecewiseTrig(Vec<TrigPiece<T>>),
    Tabulated {
        times: Vec<T>,
        values: Vec<T>,
        interpolation: Interpolation,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundProvenance {
    Analytic,
    Sampled,
}

/// A bound `|ψ'| ≤ value` on `[0, τ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeBound<T> {
    pub value: T,
    pub provenance: BoundProvenance,
}

/// The time factor `ψ ∈ C[0, τ]` of the separable source `ψ(t) f(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalProfile<T> {
    horizon: T,
    shape: ProfileShape<T>,
    derivative_bound: Option<DerivativeBound<T>>,
}

impl<T: Real> TemporalProfile<T> {
    pub fn constant(horizon: T, value: T) -> Result<Self> {
        Self::new(horizon, ProfileShape::Constant(value))
    }

    pub fn polynomial(horizon: T, coeffs: Vec<T>) -> Result<Self> {
        Self::new(horizon, ProfileShape::Polynomial(coeffs))
    }

    pub fn piecewise_trig(horizon: T, pieces: Vec<TrigPiece<T>>) -> Result<Self> {
        Self::new(horizon, ProfileShape::PiecewiseTrig(pieces))
    }

    /// Linear interpolation through `(t, ψ(t))` samples; the horizon is the last time.
    pub fn tabulated(samples: Vec<(T, T)>) -> Result<Self> {
        let horizon = samples.last().map(|s| s.0).unwrap_or_else(T::zero);
        let (times, values) = samples.into_iter().unzip();
        Self::new(horizon, ProfileShape::Tabulated { times, values, interpolation: Interpolation::Linear })
    }

    pub fn new(horizon: T, shape: ProfileShape<T>) -> Result<Self> {
        if !(horizon > T::zero() && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon {} must be positive", horizon)));
        }
        validate_shape(horizon, &shape)?;
        Ok(Self { horizon, shape, derivative_bound: None })
    }

    /// Attach a derivative bound. Bounds claimed analytic are checked on the
    /// dense grid and rejected if `|ψ'|` exceeds them anywhere.
    pub fn with_derivative_bound(mut self, value: T, provenance: BoundProvenance) -> Result<Self> {
        if !(value >= T::zero() && value.is_finite()) {
            return Err(Error::InvalidArgument(format!("derivative bound {} must be nonnegative", value)));
        }
        if provenance == BoundProvenance::Analytic {
            let slack = T::one() + T::tol(1e-12);
            for t in self.check_grid() {
                let d = self.derivative(t).abs();
                if d > value * slack + T::tol(1e-12) {
                    return Err(Error::InvalidArgument(format!(
                        "claimed analytic bound |psi'| <= {} violated at t = {} (|psi'| = {})",
                        value, t, d
                    )));
                }
            }
        }
        self.derivative_bound = Some(DerivativeBound { value, provenance });
        Ok(self)
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn shape(&self) -> &ProfileShape<T> {
        &self.shape
    }

    pub fn value(&self, t: T) -> T {
        match &self.shape {
            ProfileShape::Constant(c) => *c,
            ProfileShape::Polynomial(a) => a.iter().rev().fold(T::zero(), |acc, c| acc * t + *c),
            ProfileShape::PiecewiseTrig(pieces) => piece_at(pieces, t).value(t),
            ProfileShape::Tabulated { times, values, .. } => {
                let i = segment_at(times, t);
                let w = (t - times[i]) / (times[i + 1] - times[i]);
                values[i] + w * (values[i + 1] - values[i])
            }
        }
    }

    /// `ψ'(t)`; one-sided (from the right) at knots of piecewise shapes.
    pub fn derivative(&self, t: T) -> T {
        match &self.shape {
            ProfileShape::Constant(_) => T::zero(),
            ProfileShape::Polynomial(a) => a
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(T::zero(), |acc, (k, c)| acc * t + T::from_index(k) * *c),
            ProfileShape::PiecewiseTrig(pieces) => piece_at(pieces, t).derivative(t),
            ProfileShape::Tabulated { times, values, .. } => {
                let i = segment_at(times, t);
                (values[i + 1] - values[i]) / (times[i + 1] - times[i])
            }
        }
    }

    /// Interior points where the shape changes formula.
    pub fn knots(&self) -> Vec<T> {
        match &self.shape {
            ProfileShape::PiecewiseTrig(pieces) => pieces.iter().skip(1).map(|p| p.start).collect(),
            ProfileShape::Tabulated { times, .. } => times[1..times.len() - 1].to_vec(),
            _ => Vec::new(),
        }
    }

    /// The supplied derivative bound, or one derived from the shape.
    pub fn derivative_bound(&self) -> DerivativeBound<T> {
        if let Some(b) = self.derivative_bound {
            return b;
        }
        match &self.shape {
            ProfileShape::Constant(_) => DerivativeBound { value: T::zero(), provenance: BoundProvenance::Analytic },
            ProfileShape::Polynomial(a) => {
                let value = a
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, c)| T::from_index(k) * c.abs() * self.horizon.powi(k as i32 - 1))
                    .sum();
                DerivativeBound { value, provenance: BoundProvenance::Analytic }
            }
            ProfileShape::PiecewiseTrig(pieces) => {
                let value = pieces.iter().fold(T::zero(), |m, p| {
                    m.max(p.freq.abs() * (p.cos_amp * p.cos_amp + p.sin_amp * p.sin_amp).sqrt())
                });
                DerivativeBound { value, provenance: BoundProvenance::Analytic }
            }
            ProfileShape::Tabulated { times, values, .. } => {
                let value = times
                    .windows(2)
                    .zip(values.windows(2))
                    .fold(T::zero(), |m, (t, v)| m.max(((v[1] - v[0]) / (t[1] - t[0])).abs()));
                DerivativeBound { value, provenance: BoundProvenance::Sampled }
            }
        }
    }

    /// Uniform grid of `CHECK_INTERVALS` cells on `[0, τ]` merged with the knots.
    pub fn check_grid(&self) -> Vec<T> {
        let n = T::from_index(CHECK_INTERVALS);
        let mut grid: Vec<T> = (0..=CHECK_INTERVALS).map(|j| self.horizon * T::from_index(j) / n).collect();
        grid[CHECK_INTERVALS] = self.horizon;
        grid.extend(self.knots());
        grid.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
        grid.dedup();
        grid
    }

    /// `||ψ||_∞` from the check grid with local refinement of interior maxima.
    pub fn sup_norm(&self) -> T {
        if let ProfileShape::Constant(c) = self.shape {
            return c.abs();
        }
        let grid = self.check_grid();
        let abs: Vec<T> = grid.iter().map(|t| self.value(*t).abs()).collect();
        let mut best = abs.iter().fold(T::zero(), |m, v| m.max(*v));
        if !matches!(self.shape, ProfileShape::Tabulated { .. }) {
            for j in 1..grid.len() - 1 {
                if abs[j] >= abs[j - 1] && abs[j] >= abs[j + 1] {
                    let (_, v) = golden_extremum(|t| -self.value(t).abs(), grid[j - 1], grid[j + 1]);
                    best = best.max(-v);
                }
            }
        }
        best
    }
}

fn piece_at<T: Real>(pieces: &[TrigPiece<T>], t: T) -> &TrigPiece<T> {
    pieces.iter().find(|p| t <= p.end).unwrap_or_else(|| pieces.last().expect("validated nonempty"))
}

fn segment_at<T: Real>(times: &[T], t: T) -> usize {
    // index i with times[i] <= t <= times[i+1], clamped to the table
    let last = times.len() - 2;
    match times.binary_search_by(|x| x.partial_cmp(&t).unwrap_or(std::cmp::Ordering::Less)) {
        Ok(i) => i.min(last),
        Err(0) => 0,
        Err(i) => (i - 1).min(last),
    }
}

fn validate_shape<T: Real>(horizon: T, shape: &ProfileShape<T>) -> Result<()> {
    let knot_tol = T::tol(1e-12);
    match shape {
        ProfileShape::Constant(c) if !c.is_finite() => Err(Error::InvalidArgument("constant profile value must be finite".into())),
        ProfileShape::Polynomial(a) if a.is_empty() || a.iter().any(|c| !c.is_finite()) => {
            Err(Error::InvalidArgument("polynomial needs at least one finite coefficient".into()))
        }
        ProfileShape::PiecewiseTrig(pieces) => {
            let (first, last) = match (pieces.first(), pieces.last()) {
                (Some(f), Some(l)) => (f, l),
                _ => return Err(Error::InvalidArgument("piecewise profile needs at least one piece".into())),
            };
            if first.start != T::zero() || (last.end - horizon).abs() > knot_tol * horizon {
                return Err(Error::InvalidArgument(format!(
                    "pieces must cover [0, {}] (got [{}, {}])",
                    horizon, first.start, last.end
                )));
            }
            for p in pieces {
                if !(p.end > p.start) || !(p.cos_amp.is_finite() && p.sin_amp.is_finite() && p.freq.is_finite()) {
                    return Err(Error::InvalidArgument(format!("invalid piece on [{}, {}]", p.start, p.end)));
                }
            }
            for w in pieces.windows(2) {
                if w[0].end != w[1].start {
                    return Err(Error::InvalidArgument(format!("gap between pieces at {} and {}", w[0].end, w[1].start)));
                }
                let knot = w[1].start;
                let jump = (w[0].value(knot) - w[1].value(knot)).abs();
                if jump > knot_tol {
                    return Err(Error::InvalidArgument(format!("profile discontinuous at t = {} (jump {:e})", knot, jump)));
                }
            }
            Ok(())
        }
        ProfileShape::Tabulated { times, values, .. } => {
            if times.len() < 2 || times.len() != values.len() {
                return Err(Error::InvalidArgument("tabulated profile needs at least two (t, psi) samples".into()));
            }
            if times[0] != T::zero() {
                return Err(Error::InvalidArgument("tabulated profile must start at t = 0".into()));
            }
            if times.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidArgument("sample times must be strictly increasing".into()));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("sample values must be finite".into()));
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

/// Golden-section search for a minimum of `f` on `[a, b]`.
pub(crate) fn golden_extremum<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T) -> (T, T) {
    let inv_phi = T::lit(0.618_033_988_749_894_9);
    let (mut a, mut b) = (a, b);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        if b - a <= T::epsilon() * (a.abs() + b.abs()) {
            break;
        }
    }
    let (fa, fb) = (f(a), f(b));
    [(c, fc), (d, fd), (a, fa), (b, fb)]
        .into_iter()
        .fold((c, fc), |best, cand| if cand.1 < best.1 { cand } else { best })
}
