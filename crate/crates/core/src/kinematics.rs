//! Minkowski 1+1D event algebra in natural units (c = 1).
//!
//! Everything the simulator means by "before" and "after" is decided here:
//! an event pair is compared in the rest frame of a particular device, and
//! for spacelike pairs that comparison depends on the device's velocity.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default absolute tolerance on frame-time differences below which two
/// events count as simultaneous.
pub const SIMULTANEITY_TOL: f64 = 1e-12;

/// Fraction of the way from the simultaneity boundary toward the light-speed
/// limit used by [`order_flip_boost`].
pub const FLIP_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("event coordinates must be finite (t = {t}, x = {x})")]
    NonFiniteEvent { t: f64, x: f64 },
    #[error("frame speed violation: |beta| = {0} must be < 1")]
    InvalidFrame(f64),
    #[error("tolerance must be finite and non-negative, got {0}")]
    InvalidTolerance(f64),
}

/// A spacetime point in the lab frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    t: f64,
    x: f64,
}

impl Event {
    pub fn new(t: f64, x: f64) -> Result<Self, KinematicsError> {
        if !t.is_finite() || !x.is_finite() {
            return Err(KinematicsError::NonFiniteEvent { t, x });
        }
        Ok(Self { t, x })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn x(&self) -> f64 {
        self.x
    }
}

/// An inertial frame moving with velocity `beta` along the optical axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Frame {
    beta: f64,
}

impl Frame {
    pub const LAB: Frame = Frame { beta: 0.0 };

    pub fn new(beta: f64) -> Result<Self, KinematicsError> {
        if !beta.is_finite() || beta.abs() >= 1.0 {
            return Err(KinematicsError::InvalidFrame(beta.abs()));
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Lorentz factor 1/√(1−β²).
    pub fn gamma(&self) -> f64 {
        1.0 / (1.0 - self.beta * self.beta).sqrt()
    }
}

impl Default for Frame {
    fn default() -> Self {
        Self::LAB
    }
}

/// Time coordinate of `e` in frame `f`: t′ = γ(t − βx).
pub fn boost_time(e: &Event, f: &Frame) -> f64 {
    f.gamma() * (e.t - f.beta * e.x)
}

/// Position coordinate of `e` in frame `f`: x′ = γ(x − βt).
pub fn boost_position(e: &Event, f: &Frame) -> f64 {
    f.gamma() * (e.x - f.beta * e.t)
}

/// Full boost. The result is expressed as lab-style coordinates of the
/// frame `f`, so boosting by `Frame(-β)` afterwards undoes it.
pub fn boost(e: &Event, f: &Frame) -> Event {
    Event {
        t: boost_time(e, f),
        x: boost_position(e, f),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntervalKind {
    Timelike,
    Spacelike,
    Lightlike,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub kind: IntervalKind,
    /// Δt² − Δx².
    pub squared: f64,
}

pub fn classify_interval(a: &Event, b: &Event, tol: f64) -> Result<Interval, KinematicsError> {
    if !tol.is_finite() || tol < 0.0 {
        return Err(KinematicsError::InvalidTolerance(tol));
    }
    let dt = b.t - a.t;
    let dx = b.x - a.x;
    let squared = dt * dt - dx * dx;
    let kind = if squared.abs() <= tol {
        IntervalKind::Lightlike
    } else if squared > 0.0 {
        IntervalKind::Timelike
    } else {
        IntervalKind::Spacelike
    };
    Ok(Interval { kind, squared })
}

/// Where `other` sits relative to `subject` on the time axis of some frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ordering {
    /// `other` had already happened when `subject` occurred.
    Before,
    /// `other` happens later than `subject`.
    After,
    Simultaneous,
}

/// Order of `other` relative to `subject`, judged on the time axis of `f`.
pub fn order_in_frame(subject: &Event, other: &Event, f: &Frame, tol: f64) -> Ordering {
    let diff = boost_time(other, f) - boost_time(subject, f);
    if diff.abs() <= tol {
        Ordering::Simultaneous
    } else if diff < 0.0 {
        Ordering::Before
    } else {
        Ordering::After
    }
}

/// Velocity β* = Δt/Δx at which a spacelike pair is simultaneous. `None`
/// unless the pair is strictly spacelike.
pub fn simultaneity_boost(a: &Event, b: &Event) -> Option<f64> {
    let dt = b.t - a.t;
    let dx = b.x - a.x;
    if dx == 0.0 || dt.abs() >= dx.abs() {
        return None;
    }
    Some(dt / dx)
}

/// A frame velocity in which the lab-frame time order of a spacelike pair is
/// reversed.
///
/// Starts from the simultaneity boundary β* = Δt/Δx and moves
/// [`FLIP_MARGIN`] of the way toward the light-speed limit on the side that
/// inverts the order. For a lab-simultaneous pair (β* = 0) the returned frame
/// puts `b` first. Timelike and lightlike pairs have no such frame.
pub fn order_flip_boost(a: &Event, b: &Event) -> Option<f64> {
    let boundary = simultaneity_boost(a, b)?;
    let dt = b.t - a.t;
    let dx = b.x - a.x;
    // Δt′ ∝ Δt − βΔx, so moving β past β* in the direction sign(Δt·Δx)
    // flips the sign of Δt′.
    let toward_plus = if dt == 0.0 { dx > 0.0 } else { (dt > 0.0) == (dx > 0.0) };
    let beta = if toward_plus {
        boundary + FLIP_MARGIN * (1.0 - boundary)
    } else {
        boundary - FLIP_MARGIN * (1.0 + boundary)
    };
    Some(beta)
}
