//! Joint positions to floor-plane distances.
//!
//! Each frame carries left/right positions for the tracked upper-limb joints
//! and the tracker's estimate of the floor plane `n·x − a = 0`. A joint pair
//! is collapsed to its midpoint and reduced to the signed distance from the
//! plane, giving one scalar sample per frame.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type Vec3<T> = [T; 3];

/// Fewest samples a window may hold and still be fitted.
pub const MIN_FIT_SAMPLES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointType {
    Shoulders,
    Elbows,
    Wrists,
    Hands,
}

impl JointType {
    pub const ALL: [JointType; 4] = [
        JointType::Shoulders,
        JointType::Elbows,
        JointType::Wrists,
        JointType::Hands,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            JointType::Shoulders => "shoulders",
            JointType::Elbows => "elbows",
            JointType::Wrists => "wrists",
            JointType::Hands => "hands",
        }
    }
}

impl fmt::Display for JointType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for JointType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        JointType::ALL
            .into_iter()
            .find(|j| j.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown joint '{s}', expected one of shoulders, elbows, wrists, hands"
                ))
            })
    }
}

/// Floor plane `n·x − a = 0`. The normal need not be unit length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloorPlane<T> {
    pub n: Vec3<T>,
    pub a: T,
}

impl<T: Scalar> FloorPlane<T> {
    pub fn new(n: Vec3<T>, a: T) -> Result<Self> {
        let plane = Self { n, a };
        plane.validate()?;
        Ok(plane)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.n.iter().all(|c| c.is_finite()) || !self.a.is_finite() {
            return Err(Error::Geometry("plane has non-finite coefficients".into()));
        }
        if self.normal_len() <= T::zero() {
            return Err(Error::Geometry("plane normal has zero length".into()));
        }
        Ok(())
    }

    pub fn normal_len(&self) -> T {
        norm(self.n)
    }

    pub fn unit_normal(&self) -> Vec3<T> {
        let len = self.normal_len();
        [self.n[0] / len, self.n[1] / len, self.n[2] / len]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointPair<T> {
    pub l: Vec3<T>,
    pub r: Vec3<T>,
}

/// Tracked joint pairs of one frame; `None` means the tracker dropped the joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct Joints<T> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shoulders: Option<JointPair<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elbows: Option<JointPair<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wrists: Option<JointPair<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hands: Option<JointPair<T>>,
}

impl<T> Default for Joints<T> {
    fn default() -> Self {
        Self {
            shoulders: None,
            elbows: None,
            wrists: None,
            hands: None,
        }
    }
}

impl<T> Joints<T> {
    pub fn get(&self, joint: JointType) -> Option<&JointPair<T>> {
        match joint {
            JointType::Shoulders => self.shoulders.as_ref(),
            JointType::Elbows => self.elbows.as_ref(),
            JointType::Wrists => self.wrists.as_ref(),
            JointType::Hands => self.hands.as_ref(),
        }
    }

    pub fn set(&mut self, joint: JointType, pair: Option<JointPair<T>>) {
        let slot = match joint {
            JointType::Shoulders => &mut self.shoulders,
            JointType::Elbows => &mut self.elbows,
            JointType::Wrists => &mut self.wrists,
            JointType::Hands => &mut self.hands,
        };
        *slot = pair;
    }

    pub fn iter(&self) -> impl Iterator<Item = (JointType, &JointPair<T>)> {
        JointType::ALL
            .into_iter()
            .filter_map(move |j| self.get(j).map(|p| (j, p)))
    }
}

/// One timestamped skeleton observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct JointFrame<T> {
    pub t: T,
    pub plane: FloorPlane<T>,
    #[serde(default)]
    pub joints: Joints<T>,
}

impl<T: Scalar> JointFrame<T> {
    /// Checks plane and coordinate sanity. Stream ordering is checked by [`validate_stream`].
    pub fn validate(&self) -> Result<()> {
        if !self.t.is_finite() {
            return Err(Error::InvalidFrame("non-finite timestamp".into()));
        }
        self.plane.validate()?;
        for (joint, pair) in self.joints.iter() {
            if !pair.l.iter().chain(pair.r.iter()).all(|c| c.is_finite()) {
                return Err(Error::InvalidFrame(format!(
                    "non-finite {joint} coordinates at t={}",
                    self.t
                )));
            }
        }
        Ok(())
    }
}

/// Rejects streams whose timestamps do not strictly increase.
pub fn validate_stream<T: Scalar>(frames: &[JointFrame<T>]) -> Result<()> {
    for (i, pair) in frames.windows(2).enumerate() {
        if pair[1].t <= pair[0].t {
            return Err(Error::Stream(format!(
                "timestamps must strictly increase: frame {} has t={} after t={}",
                i + 1,
                pair[1].t,
                pair[0].t
            )));
        }
    }
    Ok(())
}

/// One scalar observation of the fitted signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample<T> {
    pub t: T,
    pub d: T,
}

/// Time-ordered samples of one fitting window `(start, end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window<T> {
    samples: Vec<Sample<T>>,
    start: T,
    end: T,
    len_s: T,
}

impl<T: Scalar> Window<T> {
    /// Builds a window, checking ordering, containment and the minimum sample count.
    pub fn new(samples: Vec<Sample<T>>, start: T, end: T, len_s: T) -> Result<Self> {
        if !(end > start) {
            return Err(Error::Window(format!(
                "end {end} must exceed start {start}"
            )));
        }
        if samples.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(Error::Window(
                "samples are not strictly time-ordered".into(),
            ));
        }
        if samples.iter().any(|s| s.t < start || s.t > end) {
            return Err(Error::Window(format!(
                "sample outside window [{start}, {end}]"
            )));
        }
        if samples.iter().any(|s| !s.d.is_finite()) {
            return Err(Error::Window("non-finite sample distance".into()));
        }
        if samples.len() < MIN_FIT_SAMPLES {
            return Err(Error::WindowTooSmall {
                got: samples.len(),
                min: MIN_FIT_SAMPLES,
            });
        }
        Ok(Self {
            samples,
            start,
            end,
            len_s,
        })
    }

    pub fn samples(&self) -> &[Sample<T>] {
        &self.samples
    }

    pub fn start(&self) -> T {
        self.start
    }

    pub fn end(&self) -> T {
        self.end
    }

    pub fn len_s(&self) -> T {
        self.len_s
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn dot<T: Scalar>(a: Vec3<T>, b: Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm<T: Scalar>(v: Vec3<T>) -> T {
    dot(v, v).sqrt()
}

/// Midpoint of the left and right positions of a joint pair.
pub fn combine_pair<T: Scalar>(l: Vec3<T>, r: Vec3<T>) -> Result<Vec3<T>> {
    if !l.iter().chain(r.iter()).all(|c| c.is_finite()) {
        return Err(Error::InvalidFrame("non-finite joint coordinate".into()));
    }
    let two = T::lit(2.0);
    Ok([
        (l[0] + r[0]) / two,
        (l[1] + r[1]) / two,
        (l[2] + r[2]) / two,
    ])
}

/// Signed distance of `v` from the plane, `(n·v − a) / |n|`.
pub fn plane_distance<T: Scalar>(plane: &FloorPlane<T>, v: Vec3<T>) -> Result<T> {
    let len = plane.normal_len();
    if !(len > T::zero()) {
        return Err(Error::Geometry("plane normal has zero length".into()));
    }
    Ok((dot(plane.n, v) - plane.a) / len)
}

/// Reduces one frame to the distance sample of the requested joint pair.
///
/// Returns [`Error::MissingJoint`] when the tracker dropped the joint; callers
/// skip such frames.
pub fn frame_to_sample<T: Scalar>(frame: &JointFrame<T>, joint: JointType) -> Result<Sample<T>> {
    let pair = frame.joints.get(joint).ok_or(Error::MissingJoint {
        t: frame.t.as_f64(),
        joint,
    })?;
    let v = combine_pair(pair.l, pair.r)?;
    Ok(Sample {
        t: frame.t,
        d: plane_distance(&frame.plane, v)?,
    })
}
