//! Four-parameter sine model `y(t) = A·sin(ω·t + φ) + D`, its search box,
//! fit costs and conversions to clinical units.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Sample;
use crate::scalar::Scalar;

/// Parameter vector layout used by the optimizer: `[A, ω, φ, D]`.
pub const PARAM_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineParams<T> {
    /// Amplitude in meters.
    pub amplitude: T,
    /// Angular frequency in rad/s.
    pub omega: T,
    /// Phase in radians.
    pub phase: T,
    /// Vertical offset in meters.
    pub offset: T,
}

impl<T: Scalar> SineParams<T> {
    pub fn from_vector(x: &[T]) -> Self {
        debug_assert_eq!(x.len(), PARAM_DIM);
        Self {
            amplitude: x[0],
            omega: x[1],
            phase: x[2],
            offset: x[3],
        }
    }

    pub fn to_vector(self) -> [T; PARAM_DIM] {
        [self.amplitude, self.omega, self.phase, self.offset]
    }

    #[inline]
    pub fn eval(&self, t: T) -> T {
        eval_sine(self, t)
    }

    pub fn cpm(&self) -> T {
        omega_to_cpm(self.omega)
    }

    pub fn depth(&self) -> DepthReading<T> {
        amplitude_to_depth(self.amplitude)
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> Interval<T> {
    pub fn new(lo: T, hi: T) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: T) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// Search box for the sine parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds<T> {
    pub amplitude: Interval<T>,
    pub omega: Interval<T>,
    pub phase: Interval<T>,
    pub offset: Interval<T>,
}

impl<T: Scalar> Default for ParamBounds<T> {
    /// ±2 m for amplitude and offset, a full turn of phase, and 60–160 cpm.
    fn default() -> Self {
        let pi = T::PI();
        Self {
            amplitude: Interval::new(T::lit(-2.0), T::lit(2.0)),
            omega: Interval::new(T::lit(2.0) * pi, T::lit(16.0) * pi / T::lit(3.0)),
            phase: Interval::new(T::zero(), T::lit(2.0) * pi),
            offset: Interval::new(T::lit(-2.0), T::lit(2.0)),
        }
    }
}

impl<T: Scalar> ParamBounds<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, iv) in self.named() {
            if !(iv.lo.is_finite() && iv.hi.is_finite() && iv.lo < iv.hi) {
                return Err(Error::Config(format!(
                    "{name} bounds must satisfy lo < hi, got [{}, {}]",
                    iv.lo, iv.hi
                )));
            }
        }
        if self.omega.lo <= T::zero() {
            return Err(Error::Config("omega lower bound must be positive".into()));
        }
        Ok(())
    }

    fn named(&self) -> [(&'static str, Interval<T>); PARAM_DIM] {
        [
            ("amplitude", self.amplitude),
            ("omega", self.omega),
            ("phase", self.phase),
            ("offset", self.offset),
        ]
    }

    pub fn lower(&self) -> [T; PARAM_DIM] {
        self.named().map(|(_, iv)| iv.lo)
    }

    pub fn upper(&self) -> [T; PARAM_DIM] {
        self.named().map(|(_, iv)| iv.hi)
    }

    pub fn contains(&self, p: &SineParams<T>) -> bool {
        self.named()
            .iter()
            .zip(p.to_vector())
            .all(|((_, iv), x)| iv.contains(x))
    }
}

/// Peak depth readings derived from an amplitude, in centimeters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthReading<T> {
    pub half: T,
    pub peak_to_peak: T,
}

/// Outcome of fitting one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult<T> {
    pub params: SineParams<T>,
    pub sse: T,
    pub rmse: T,
    pub window_start: T,
    pub window_end: T,
    /// Time the model's `t = 0` corresponds to.
    pub t_origin: T,
    pub t_update: T,
    pub n_samples: usize,
    pub generations_run: usize,
    pub converged_by_vtr: bool,
    /// Per-generation best cost; empty unless trace recording was requested.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cost_trace: Vec<T>,
}

impl<T: Scalar> FitResult<T> {
    pub fn cpm(&self) -> T {
        self.params.cpm()
    }

    pub fn depth_p2p_cm(&self) -> T {
        self.params.depth().peak_to_peak
    }

    /// Model value at absolute time `t`.
    pub fn eval_at(&self, t: T) -> T {
        eval_sine(&self.params, t - self.t_origin)
    }
}

#[inline]
pub fn eval_sine<T: Scalar>(p: &SineParams<T>, t: T) -> T {
    p.amplitude * (p.omega * t + p.phase).sin() + p.offset
}

/// Sum of squared residuals at each sample's own timestamp.
pub fn cost_sse<T: Scalar>(p: &SineParams<T>, samples: &[Sample<T>]) -> Result<T> {
    if samples.is_empty() {
        return Err(Error::Window(
            "cannot evaluate cost on an empty window".into(),
        ));
    }
    Ok(sse_unchecked(p, samples))
}

#[inline]
pub(crate) fn sse_unchecked<T: Scalar>(p: &SineParams<T>, samples: &[Sample<T>]) -> T {
    samples
        .iter()
        .map(|s| {
            let r = s.d - eval_sine(p, s.t);
            r * r
        })
        .sum()
}

/// Root mean squared residual, `sqrt(sse / T)`.
pub fn cost_rmse<T: Scalar>(p: &SineParams<T>, samples: &[Sample<T>]) -> Result<T> {
    let sse = cost_sse(p, samples)?;
    Ok(rmse_from_sse(sse, samples.len()))
}

pub fn rmse_from_sse<T: Scalar>(sse: T, count: usize) -> T {
    (sse / T::lit(count as f64)).sqrt()
}

/// Compressions per minute for an angular frequency in rad/s.
pub fn omega_to_cpm<T: Scalar>(omega: T) -> T {
    T::lit(60.0) * omega / (T::lit(2.0) * T::PI())
}

pub fn cpm_to_omega<T: Scalar>(cpm: T) -> T {
    cpm * T::lit(2.0) * T::PI() / T::lit(60.0)
}

pub fn amplitude_to_depth<T: Scalar>(amplitude: T) -> DepthReading<T> {
    let half = amplitude.abs() * T::lit(100.0);
    DepthReading {
        half,
        peak_to_peak: T::lit(2.0) * half,
    }
}
