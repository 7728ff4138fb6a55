//! Synthetic compression sessions with known ground truth.
//!
//! Every joint moves along the plane normal by `(depth/2)·sin(θ(t))` around
//! its baseline height, where `θ` integrates the scheduled rate so rate
//! changes never break phase. One reference event is emitted per completed
//! cycle of `θ`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::CompressionEvent;
use crate::geometry::{FloorPlane, JointFrame, JointPair, JointType, Joints, Vec3};

/// Linear ramp of rate and depth over `duration_s`; constant when the end values are omitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub duration_s: f64,
    pub cpm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpm_end: Option<f64>,
    pub depth_cm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_end_cm: Option<f64>,
}

impl Segment {
    pub fn constant(duration_s: f64, cpm: f64, depth_cm: f64) -> Self {
        Self {
            duration_s,
            cpm,
            cpm_end: None,
            depth_cm,
            depth_end_cm: None,
        }
    }

    fn cpm_end(&self) -> f64 {
        self.cpm_end.unwrap_or(self.cpm)
    }

    fn depth_end(&self) -> f64 {
        self.depth_end_cm.unwrap_or(self.depth_cm)
    }

    fn cpm_at(&self, tau: f64) -> f64 {
        self.cpm + (self.cpm_end() - self.cpm) * tau / self.duration_s
    }

    fn depth_at(&self, tau: f64) -> f64 {
        self.depth_cm + (self.depth_end() - self.depth_cm) * tau / self.duration_s
    }

    /// Completed cycles `tau` seconds into the segment.
    fn cycles_at(&self, tau: f64) -> f64 {
        let slope = (self.cpm_end() - self.cpm) / self.duration_s;
        (self.cpm * tau + 0.5 * slope * tau * tau) / 60.0
    }
}

/// Piecewise schedule; the last segment's end values hold past its end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schedule {
    pub segments: Vec<Segment>,
}

impl Schedule {
    pub fn constant(cpm: f64, depth_cm: f64) -> Self {
        Self {
            segments: vec![Segment::constant(f64::INFINITY, cpm, depth_cm)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::Config("schedule has no segments".into()));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.duration_s > 0.0) {
                return Err(Error::Config(format!(
                    "segment {i}: duration must be positive"
                )));
            }
            for cpm in [s.cpm, s.cpm_end()] {
                if !(30.0..=200.0).contains(&cpm) {
                    return Err(Error::Config(format!(
                        "segment {i}: rate {cpm} cpm outside [30, 200]"
                    )));
                }
            }
            for depth in [s.depth_cm, s.depth_end()] {
                if !(depth >= 0.0 && depth.is_finite()) {
                    return Err(Error::Config(format!("segment {i}: depth must be ≥ 0")));
                }
            }
        }
        Ok(())
    }

    /// Segment containing `t` with the local offset into it and the cycles completed before it.
    fn locate(&self, t: f64) -> (&Segment, f64, f64) {
        let mut start = 0.0;
        let mut cycles = 0.0;
        let last = self.segments.len() - 1;
        for (i, seg) in self.segments.iter().enumerate() {
            if i == last || t < start + seg.duration_s {
                return (seg, t - start, cycles);
            }
            cycles += seg.cycles_at(seg.duration_s);
            start += seg.duration_s;
        }
        unreachable!("schedule has at least one segment")
    }

    pub fn cpm_at(&self, t: f64) -> f64 {
        let (seg, tau, _) = self.locate(t);
        if tau > seg.duration_s {
            seg.cpm_end()
        } else {
            seg.cpm_at(tau)
        }
    }

    pub fn depth_at(&self, t: f64) -> f64 {
        let (seg, tau, _) = self.locate(t);
        if tau > seg.duration_s {
            seg.depth_end()
        } else {
            seg.depth_at(tau)
        }
    }

    /// Cycles completed since `t = 0`.
    pub fn cycles_at(&self, t: f64) -> f64 {
        let (seg, tau, before) = self.locate(t);
        if tau > seg.duration_s {
            before + seg.cycles_at(seg.duration_s) + seg.cpm_end() * (tau - seg.duration_s) / 60.0
        } else {
            before + seg.cycles_at(tau)
        }
    }

    /// Time at which `cycles` cycles are complete, by bisection on `[0, hi]`.
    fn time_of_cycle(&self, cycles: f64, hi: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cycles_at(mid) < cycles {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi.max(1.0) {
                break;
            }
        }
        hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub duration_s: f64,
    pub frame_rate: f64,
    pub schedule: Schedule,
    /// Standard deviation of the additive noise on each joint's distance, in cm.
    pub noise_sigma_cm: f64,
    pub plane: FloorPlane<f64>,
    /// Baseline distance of each joint pair from the floor, in meters, in
    /// shoulders, elbows, wrists, hands order.
    pub joint_heights: [f64; 4],
    /// Half-amplitude of the antisymmetric left/right jitter, in meters.
    pub lateral_jitter_m: f64,
    /// Probability that a joint pair is missing from a frame.
    pub dropout_prob: f64,
    /// Phase at `t = 0`, in radians.
    pub phase0: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            duration_s: 120.0,
            frame_rate: 30.0,
            schedule: Schedule::constant(110.0, 5.0),
            noise_sigma_cm: 0.0,
            plane: FloorPlane {
                n: [0.0, 1.0, 0.0],
                a: 0.0,
            },
            joint_heights: [0.95, 0.70, 0.32, 0.27],
            lateral_jitter_m: 0.005,
            dropout_prob: 0.0,
            phase0: 0.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::Config("duration must be positive".into()));
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return Err(Error::Config("frame rate must be positive".into()));
        }
        if !(self.noise_sigma_cm >= 0.0 && self.noise_sigma_cm.is_finite()) {
            return Err(Error::Config("noise sigma must be ≥ 0".into()));
        }
        if !(0.0..=1.0).contains(&self.dropout_prob) {
            return Err(Error::Config(
                "dropout probability must lie in [0, 1]".into(),
            ));
        }
        if !(self.lateral_jitter_m >= 0.0) {
            return Err(Error::Config("lateral jitter must be ≥ 0".into()));
        }
        self.plane.validate()?;
        self.schedule.validate()
    }

    pub fn frame_count(&self) -> usize {
        (self.duration_s * self.frame_rate).round() as usize
    }

    /// Noise-free distance of a joint from the floor at `t`, in meters.
    pub fn true_distance(&self, joint: JointType, t: f64) -> f64 {
        let height = self.joint_heights[joint_slot(joint)];
        let theta = self.phase0 + 2.0 * std::f64::consts::PI * self.schedule.cycles_at(t);
        height + 0.5 * self.schedule.depth_at(t) / 100.0 * theta.sin()
    }
}

fn joint_slot(joint: JointType) -> usize {
    JointType::ALL
        .iter()
        .position(|&j| j == joint)
        .expect("known joint")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub frames: Vec<JointFrame<f64>>,
    pub events: Vec<CompressionEvent<f64>>,
}

fn cross(a: Vec3<f64>, b: Vec3<f64>) -> Vec3<f64> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalized(v: Vec3<f64>) -> Vec3<f64> {
    let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / len, v[1] / len, v[2] / len]
}

fn axpy(base: Vec3<f64>, k: f64, dir: Vec3<f64>) -> Vec3<f64> {
    [
        base[0] + k * dir[0],
        base[1] + k * dir[1],
        base[2] + k * dir[2],
    ]
}

/// Generates frames and reference events.
///
/// Per frame and per joint (shoulders, elbows, wrists, hands) the generator
/// draws, in order, one noise value, one jitter value and one dropout value,
/// whatever the settings, so configurations that differ only in plane or noise
/// level share their random stream.
pub fn generate(spec: &SynthSpec) -> Result<SynthDataset> {
    spec.validate()?;
    let normal = spec.plane.unit_normal();
    let helper = if normal[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let across = normalized(cross(normal, helper));
    let along = cross(normal, across);
    let origin = axpy([0.0; 3], spec.plane.a / spec.plane.normal_len(), normal);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sigma_cm / 100.0)
        .map_err(|e| Error::Config(format!("noise: {e}")))?;

    let frames = (0..spec.frame_count())
        .map(|k| {
            let t = k as f64 / spec.frame_rate;
            let mut joints = Joints::default();
            for (slot, joint) in JointType::ALL.into_iter().enumerate() {
                let eps = noise.sample(&mut rng);
                let jitter = spec.lateral_jitter_m * (2.0 * rng.random::<f64>() - 1.0);
                let dropped = rng.random::<f64>() < spec.dropout_prob;
                if dropped {
                    continue;
                }
                let d = spec.true_distance(joint, t) + eps;
                let mid = axpy(axpy(origin, 1.5, along), d, normal);
                let half_width = 0.2 - 0.02 * slot as f64 + jitter;
                joints.set(
                    joint,
                    Some(JointPair {
                        l: axpy(mid, half_width, across),
                        r: axpy(mid, -half_width, across),
                    }),
                );
            }
            JointFrame {
                t,
                plane: spec.plane,
                joints,
            }
        })
        .collect();

    Ok(SynthDataset {
        frames,
        events: cycle_events(spec),
    })
}

fn cycle_events(spec: &SynthSpec) -> Vec<CompressionEvent<f64>> {
    let schedule = &spec.schedule;
    let total = schedule.cycles_at(spec.duration_s);
    let complete = (total + 1e-9).floor() as usize;
    let mut boundaries = Vec::with_capacity(complete + 1);
    boundaries.push(0.0);
    for k in 1..=complete {
        boundaries.push(
            schedule
                .time_of_cycle(k as f64, spec.duration_s + 1.0)
                .min(spec.duration_s),
        );
    }
    boundaries
        .windows(2)
        .map(|w| {
            let (start, end) = (w[0], w[1]);
            CompressionEvent {
                start,
                end,
                depth_cm: schedule.depth_at(0.5 * (start + end)),
                freq_cpm: 60.0 / (end - start),
            }
        })
        .collect()
}
