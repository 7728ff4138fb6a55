//! Comparison of windowed model predictions with reference compression events.
//!
//! Each event collects every prediction window that overlaps it and combines
//! their frequencies (and depths) as a mean weighted by the fraction of the
//! window lying inside the event. Errors are summarized by their median.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sinusoid::FitResult;

/// One reference compression cycle as logged by the mannequin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompressionEvent<T> {
    #[serde(rename = "start_s")]
    pub start: T,
    #[serde(rename = "end_s")]
    pub end: T,
    /// Maximum compression depth in cm.
    pub depth_cm: T,
    /// Current compression frequency in cpm.
    pub freq_cpm: T,
}

impl<T: Scalar> CompressionEvent<T> {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.start, self.end, self.depth_cm, self.freq_cpm]
            .iter()
            .all(|v| v.is_finite());
        if !finite
            || !(self.start < self.end)
            || self.depth_cm < T::zero()
            || !(self.freq_cpm > T::zero())
        {
            return Err(Error::Config(format!(
                "invalid event [{}, {}] depth {} freq {}",
                self.start, self.end, self.depth_cm, self.freq_cpm
            )));
        }
        Ok(())
    }
}

/// The part of a fit needed for alignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction<T> {
    pub t_update: T,
    pub window_start: T,
    pub window_end: T,
    pub cpm: T,
    pub depth_cm: T,
}

impl<T: Scalar> From<&FitResult<T>> for Prediction<T> {
    fn from(fit: &FitResult<T>) -> Self {
        Self {
            t_update: fit.t_update,
            window_start: fit.window_start,
            window_end: fit.window_end,
            cpm: fit.cpm(),
            depth_cm: fit.depth_p2p_cm(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPrediction<T> {
    pub event: CompressionEvent<T>,
    pub p_freq: T,
    pub p_depth: T,
    /// Index into the prediction list and the overlap weight of each contributor.
    pub contributing: Vec<(usize, T)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventOutcome<T> {
    Aligned(AlignedPrediction<T>),
    /// No prediction window overlaps the event.
    Unaligned(CompressionEvent<T>),
    /// The event ended before the first model update.
    WarmUp(CompressionEvent<T>),
}

/// Fraction of the window `[w0, w1]` covered by the event `[e0, e1]`.
pub fn overlap_ratio<T: Scalar>(window: (T, T), event: (T, T)) -> T {
    let (w0, w1) = window;
    let (e0, e1) = event;
    let len = w1 - w0;
    if !(len > T::zero()) {
        return T::zero();
    }
    let inter = (w1.min(e1) - w0.max(e0)).max(T::zero());
    (inter / len).min(T::one())
}

/// `Σ wᵢ·vᵢ / Σ wᵢ`; `None` when the weights sum to zero.
///
/// The result is clamped to the range of the positively weighted values so
/// rounding never moves it outside them.
pub fn weighted_mean<T: Scalar>(pairs: impl IntoIterator<Item = (T, T)>) -> Option<T> {
    let (num, den, lo, hi) = pairs.into_iter().fold(
        (T::zero(), T::zero(), T::infinity(), T::neg_infinity()),
        |(n, d, lo, hi), (w, v)| {
            let (lo, hi) = if w > T::zero() {
                (lo.min(v), hi.max(v))
            } else {
                (lo, hi)
            };
            (n + w * v, d + w, lo, hi)
        },
    );
    (den > T::zero()).then(|| (num / den).max(lo).min(hi))
}

/// Overlap-weighted combination of every prediction touching the event.
pub fn combine_predictions<T: Scalar>(
    event: &CompressionEvent<T>,
    predictions: &[Prediction<T>],
) -> Option<AlignedPrediction<T>> {
    let contributing: Vec<(usize, T)> = predictions
        .iter()
        .enumerate()
        .map(|(i, p)| {
            (
                i,
                overlap_ratio((p.window_start, p.window_end), (event.start, event.end)),
            )
        })
        .filter(|&(_, sigma)| sigma > T::zero())
        .collect();
    let p_freq = weighted_mean(contributing.iter().map(|&(i, s)| (s, predictions[i].cpm)))?;
    let p_depth = weighted_mean(
        contributing
            .iter()
            .map(|&(i, s)| (s, predictions[i].depth_cm)),
    )?;
    Some(AlignedPrediction {
        event: *event,
        p_freq,
        p_depth,
        contributing,
    })
}

/// Aligns every event; events ending at or before the first update are warm-up.
pub fn align_events<T: Scalar>(
    events: &[CompressionEvent<T>],
    predictions: &[Prediction<T>],
) -> Vec<EventOutcome<T>> {
    let first_update = predictions
        .iter()
        .map(|p| p.t_update)
        .fold(None, |acc: Option<T>, t| Some(acc.map_or(t, |a| a.min(t))));
    events
        .iter()
        .map(|e| {
            if first_update.is_none_or(|t| e.end <= t) {
                return EventOutcome::WarmUp(*e);
            }
            match combine_predictions(e, predictions) {
                Some(a) => EventOutcome::Aligned(a),
                None => EventOutcome::Unaligned(*e),
            }
        })
        .collect()
}

/// Median with the mean-of-middle-pair convention; `None` for no values.
pub fn median<T: Scalar>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("median of NaN"));
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / T::lit(2.0)
    })
}

/// Median of `|predicted − reference|`.
pub fn median_abs_error<T: Scalar>(pairs: &[(T, T)]) -> Option<T> {
    let errors: Vec<T> = pairs.iter().map(|&(p, r)| (p - r).abs()).collect();
    median(&errors)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub n_events: usize,
    pub n_aligned: usize,
    pub n_unaligned: usize,
    pub n_warmup: usize,
    pub mae_cpm: Option<f64>,
    pub mae_cm: Option<f64>,
}

pub fn summarize<T: Scalar>(outcomes: &[EventOutcome<T>]) -> ErrorSummary {
    let aligned: Vec<&AlignedPrediction<T>> = outcomes
        .iter()
        .filter_map(|o| match o {
            EventOutcome::Aligned(a) => Some(a),
            _ => None,
        })
        .collect();
    let freq: Vec<(T, T)> = aligned
        .iter()
        .map(|a| (a.p_freq, a.event.freq_cpm))
        .collect();
    let depth: Vec<(T, T)> = aligned
        .iter()
        .map(|a| (a.p_depth, a.event.depth_cm))
        .collect();
    ErrorSummary {
        n_events: outcomes.len(),
        n_aligned: aligned.len(),
        n_unaligned: outcomes
            .iter()
            .filter(|o| matches!(o, EventOutcome::Unaligned(_)))
            .count(),
        n_warmup: outcomes
            .iter()
            .filter(|o| matches!(o, EventOutcome::WarmUp(_)))
            .count(),
        mae_cpm: median_abs_error(&freq).map(Scalar::as_f64),
        mae_cm: median_abs_error(&depth).map(Scalar::as_f64),
    }
}

/// `Var[E(Y|X)] / Var(Y)` over observed `(x level, y)` pairs.
///
/// Conditional means are arithmetic means per level; both variances are
/// population variances over the observations, so the between-level term
/// weighs each level by its share of observations.
pub fn correlation_ratio<T: Scalar>(results: &[(f64, T)]) -> Result<T> {
    let mut sorted: Vec<(f64, T)> = results.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let groups: Vec<&[(f64, T)]> = sorted.chunk_by(|a, b| a.0 == b.0).collect();
    if groups.len() < 2 {
        return Err(Error::UndefinedSensitivity(format!(
            "need at least 2 distinct levels, got {}",
            groups.len()
        )));
    }
    let n = T::lit(sorted.len() as f64);
    let mean = sorted.iter().map(|&(_, y)| y).sum::<T>() / n;
    let total = sorted
        .iter()
        .map(|&(_, y)| (y - mean) * (y - mean))
        .sum::<T>()
        / n;
    if !(total > T::zero()) {
        return Err(Error::UndefinedSensitivity(
            "output variance is zero".into(),
        ));
    }
    let between = groups
        .iter()
        .map(|g| {
            let size = T::lit(g.len() as f64);
            let m = g.iter().map(|&(_, y)| y).sum::<T>() / size;
            size * (m - mean) * (m - mean)
        })
        .sum::<T>()
        / n;
    Ok((between / total).min(T::one()))
}
