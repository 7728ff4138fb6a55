//! Sliding-window fitting driven by the frame clock.
//!
//! Update instants are `t₀ + S_len + k/f_U` where `t₀` is the first frame's
//! timestamp. The fit at `t_U` uses every sample in `(t_U − S_len, t_U]`. A
//! stream is considered to last until one nominal frame period (the median
//! inter-frame interval) after its last frame, so a stream of `N` frames at
//! rate `r` covers `N/r` seconds.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::de::{self, Bounds, DeConfig, DeOutcome};
use crate::error::{Error, Result};
use crate::geometry::{
    frame_to_sample, validate_stream, JointFrame, JointType, Sample, Window, MIN_FIT_SAMPLES,
};
use crate::scalar::Scalar;
use crate::sinusoid::{rmse_from_sse, sse_unchecked, FitResult, ParamBounds, SineParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig<T> {
    /// Model update frequency `f_U` in updates per second.
    pub update_hz: T,
    /// Window length `S_len` in seconds.
    pub window_s: T,
    pub joint: JointType,
    pub de: DeConfig<T>,
    pub bounds: ParamBounds<T>,
    /// Keep each window's per-generation best cost in its [`FitResult`].
    #[serde(default)]
    pub record_cost_trace: bool,
}

impl<T: Scalar> Default for StreamConfig<T> {
    fn default() -> Self {
        Self {
            update_hz: T::one(),
            window_s: T::lit(3.0),
            joint: JointType::Shoulders,
            de: DeConfig {
                max_generations: 80,
                ..DeConfig::default()
            },
            bounds: ParamBounds::default(),
            record_cost_trace: false,
        }
    }
}

impl<T: Scalar> StreamConfig<T> {
    /// Validates the configuration and returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        if !(self.update_hz > T::zero() && self.update_hz.is_finite()) {
            return Err(Error::Config(format!(
                "update frequency must be positive, got {}",
                self.update_hz
            )));
        }
        if !(self.window_s > T::zero() && self.window_s.is_finite()) {
            return Err(Error::Config(format!(
                "window length must be positive, got {}",
                self.window_s
            )));
        }
        self.de.validate()?;
        self.bounds.validate()?;

        let mut warnings = Vec::new();
        let half_period = T::PI() / self.bounds.omega.lo;
        if self.window_s < half_period {
            warnings.push(format!(
                "window of {} s is shorter than half a period ({} s) of the slowest admissible \
                 frequency; the fit is underdetermined",
                self.window_s, half_period
            ));
        }
        Ok(warnings)
    }
}

/// Frames dropped while reducing the stream to samples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub frames: usize,
    pub samples: usize,
    pub missing_joint: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StreamItem<T> {
    Fit(FitResult<T>),
    /// Too few samples in the window to fit.
    Gap {
        t_update: T,
        window_start: T,
        window_end: T,
        n_samples: usize,
    },
}

impl<T: Scalar> StreamItem<T> {
    pub fn t_update(&self) -> T {
        match self {
            StreamItem::Fit(fit) => fit.t_update,
            StreamItem::Gap { t_update, .. } => *t_update,
        }
    }

    pub fn as_fit(&self) -> Option<&FitResult<T>> {
        match self {
            StreamItem::Fit(fit) => Some(fit),
            StreamItem::Gap { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamReport<T> {
    pub items: Vec<StreamItem<T>>,
    pub stats: IngestStats,
    pub warnings: Vec<String>,
}

impl<T: Scalar> StreamReport<T> {
    pub fn fits(&self) -> impl Iterator<Item = &FitResult<T>> {
        self.items.iter().filter_map(StreamItem::as_fit)
    }

    pub fn gap_count(&self) -> usize {
        self.items.iter().filter(|i| i.as_fit().is_none()).count()
    }
}

/// Time-ordered sample ring that keeps what the next windows still need.
#[derive(Debug, Clone)]
pub struct SampleBuffer<T> {
    samples: VecDeque<Sample<T>>,
}

impl<T: Scalar> Default for SampleBuffer<T> {
    fn default() -> Self {
        Self {
            samples: VecDeque::new(),
        }
    }
}

impl<T: Scalar> SampleBuffer<T> {
    pub fn push(&mut self, sample: Sample<T>) -> Result<()> {
        if let Some(last) = self.samples.back() {
            if sample.t <= last.t {
                return Err(Error::Stream(format!(
                    "sample at t={} does not follow t={}",
                    sample.t, last.t
                )));
            }
        }
        self.samples.push_back(sample);
        Ok(())
    }

    /// Samples in `(end − len, end]`.
    pub fn window(&self, end: T, len: T) -> Vec<Sample<T>> {
        let start = end - len;
        self.samples
            .iter()
            .skip_while(|s| s.t <= start)
            .take_while(|s| s.t <= end)
            .copied()
            .collect()
    }

    /// Drops samples at or before `t`.
    pub fn evict_through(&mut self, t: T) {
        while self.samples.front().is_some_and(|s| s.t <= t) {
            self.samples.pop_front();
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Mixes a base seed and a window index into an independent run seed.
///
/// Injective in `window_index` for a fixed base: both the odd-multiplier step
/// and the SplitMix64 finalizer are bijections on `u64`.
pub fn derive_seed(base: u64, window_index: u64) -> u64 {
    let mut z = base.wrapping_add(
        window_index
            .wrapping_add(1)
            .wrapping_mul(0x9E37_79B9_7F4A_7C15),
    );
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Configuration for the fit of window `window_index`: a fresh run whose seed
/// is derived from the base seed. No population is carried over between windows.
pub fn independent_restart_policy<T: Scalar>(window_index: u64, de: &DeConfig<T>) -> DeConfig<T> {
    DeConfig {
        seed: derive_seed(de.seed, window_index),
        ..*de
    }
}

/// Time origin of a window's model: its midpoint.
///
/// Measuring time from the middle of the window keeps the frequency and phase
/// nearly uncorrelated in the cost surface, whatever the absolute timestamps.
pub fn window_origin<T: Scalar>(window: &Window<T>) -> T {
    (window.start() + window.end()) / T::lit(2.0)
}

/// Fits one window. The returned parameters take time relative to
/// [`window_origin`].
///
/// The optimizer selects on the sum of squared residuals, while `de.vtr` is
/// read as an RMSE threshold in meters: a window of `T` samples stops once
/// its SSE reaches `T·vtr²`.
pub fn fit_window<T: Scalar>(
    window: &Window<T>,
    bounds: &ParamBounds<T>,
    de: &DeConfig<T>,
) -> Result<(SineParams<T>, DeOutcome<T>)> {
    let origin = window_origin(window);
    let samples: Vec<Sample<T>> = window
        .samples()
        .iter()
        .map(|s| Sample {
            t: s.t - origin,
            d: s.d,
        })
        .collect();
    let de_bounds = Bounds::new(bounds.lower().to_vec(), bounds.upper().to_vec())?;
    let de = DeConfig {
        vtr: sse_threshold(de.vtr, samples.len()),
        ..*de
    };
    let outcome = de::optimize(
        |x: &[T]| sse_unchecked(&SineParams::from_vector(x), &samples),
        &de_bounds,
        &de,
    )?;
    Ok((SineParams::from_vector(&outcome.best.x), outcome))
}

/// SSE of a `count`-sample window whose RMSE equals `rmse`; negative thresholds stay unreachable.
pub fn sse_threshold<T: Scalar>(rmse: T, count: usize) -> T {
    if rmse < T::zero() {
        rmse
    } else {
        rmse * rmse * T::lit(count as f64)
    }
}

fn fit_result<T: Scalar>(
    window: &Window<T>,
    t_update: T,
    cfg: &StreamConfig<T>,
    de: &DeConfig<T>,
) -> Result<FitResult<T>> {
    let (params, outcome) = fit_window(window, &cfg.bounds, de)?;
    Ok(FitResult {
        params,
        sse: outcome.best.cost,
        rmse: rmse_from_sse(outcome.best.cost, window.len()),
        window_start: window.start(),
        window_end: window.end(),
        t_origin: window_origin(window),
        t_update,
        n_samples: window.len(),
        generations_run: outcome.generations_run,
        converged_by_vtr: outcome.converged_by_vtr,
        cost_trace: if cfg.record_cost_trace {
            outcome.cost_trace
        } else {
            Vec::new()
        },
    })
}

/// Median inter-frame interval; zero for fewer than two frames.
pub fn nominal_frame_period<T: Scalar>(times: &[T]) -> T {
    let mut dts: Vec<T> = times.windows(2).map(|w| w[1] - w[0]).collect();
    if dts.is_empty() {
        return T::zero();
    }
    dts.sort_by(|a, b| a.partial_cmp(b).expect("finite timestamps"));
    let mid = dts.len() / 2;
    if dts.len() % 2 == 1 {
        dts[mid]
    } else {
        (dts[mid - 1] + dts[mid]) / T::lit(2.0)
    }
}

fn update_time<T: Scalar>(t0: T, cfg: &StreamConfig<T>, k: usize) -> T {
    t0 + cfg.window_s + T::lit(k as f64) / cfg.update_hz
}

fn end_tolerance<T: Scalar>(end: T) -> T {
    T::epsilon() * T::lit(64.0) * end.abs().max(T::one())
}

/// Update instants for a stream starting at `t0` and covering up to `end`.
pub fn update_schedule<T: Scalar>(t0: T, end: T, cfg: &StreamConfig<T>) -> Vec<T> {
    let tol = end_tolerance(end);
    (0..)
        .map(|k| update_time(t0, cfg, k))
        .take_while(|&t| t <= end + tol)
        .collect()
}

struct PendingWindow<T> {
    t_update: T,
    samples: Vec<Sample<T>>,
}

/// Runs the full frame → sample → windowed fit pipeline.
///
/// Windows are snapshotted in stream order; their fits are independent and
/// run in parallel, with results returned in update order.
pub fn run_stream<T: Scalar>(
    frames: &[JointFrame<T>],
    cfg: &StreamConfig<T>,
) -> Result<StreamReport<T>> {
    let warnings = cfg.validate()?;
    validate_stream(frames)?;
    for f in frames {
        f.validate()?;
    }

    let mut stats = IngestStats {
        frames: frames.len(),
        ..IngestStats::default()
    };
    let Some(first) = frames.first() else {
        return Ok(StreamReport {
            items: Vec::new(),
            stats,
            warnings,
        });
    };
    let t0 = first.t;

    let mut buffer = SampleBuffer::default();
    let mut pending = Vec::new();
    let mut k = 0;
    let mut next_update = update_time(t0, cfg, k);

    let mut snapshot = |buffer: &mut SampleBuffer<T>, t_update: T, k: &mut usize| {
        pending.push(PendingWindow {
            t_update,
            samples: buffer.window(t_update, cfg.window_s),
        });
        *k += 1;
        let next = update_time(t0, cfg, *k);
        buffer.evict_through(next - cfg.window_s);
        next
    };

    for frame in frames {
        while frame.t > next_update {
            next_update = snapshot(&mut buffer, next_update, &mut k);
        }
        match frame_to_sample(frame, cfg.joint) {
            Ok(sample) => {
                stats.samples += 1;
                buffer.push(sample)?;
            }
            Err(Error::MissingJoint { .. }) => stats.missing_joint += 1,
            Err(e) => return Err(e),
        }
    }

    let times: Vec<T> = frames.iter().map(|f| f.t).collect();
    let end = frames[frames.len() - 1].t + nominal_frame_period(&times);
    let tol = end_tolerance(end);
    while next_update <= end + tol {
        next_update = snapshot(&mut buffer, next_update, &mut k);
    }

    let items = pending
        .into_par_iter()
        .enumerate()
        .map(|(index, w)| -> Result<StreamItem<T>> {
            let window_start = w.t_update - cfg.window_s;
            if w.samples.len() < MIN_FIT_SAMPLES {
                return Ok(StreamItem::Gap {
                    t_update: w.t_update,
                    window_start,
                    window_end: w.t_update,
                    n_samples: w.samples.len(),
                });
            }
            let window = Window::new(w.samples, window_start, w.t_update, cfg.window_s)?;
            let de = independent_restart_policy(index as u64, &cfg.de);
            fit_result(&window, w.t_update, cfg, &de).map(StreamItem::Fit)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(StreamReport {
        items,
        stats,
        warnings,
    })
}
