//! Declarative optical setups and their timing regimes.
//!
//! A setup is a list of devices, each hosting one lab-frame impact event and
//! moving with its own velocity. Which devices act as choice devices depends
//! on [`ChoicePlacement`]; the two choice events, each judged in its own
//! device's rest frame, determine the [`TimingClass`].
//!
//! Device roles are positional. In a single-particle setup the first listed
//! detector is D(+) and the second D(−). In a two-particle setup the first
//! listed beam-splitter and the first two listed detectors form side A; the
//! rest form side B.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use thiserror::Error;

use crate::kinematics::{order_in_frame, Event, Frame, Ordering};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeviceKind {
    Source,
    BeamSplitter,
    Detector,
    DelayLine,
}

/// One element of the setup. Coordinates and velocity are kept raw so that an
/// invalid setup can still be represented and reported by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Device {
    pub id: String,
    pub kind: DeviceKind,
    /// Lab-frame time of the impact or arrival hosted by this device.
    pub t: f64,
    /// Lab-frame position of the device.
    pub x: f64,
    /// Velocity of the device rest frame relative to the lab.
    pub beta: f64,
    /// Local phase setting in radians; used as the default setting of a
    /// beam-splitter arm.
    pub phase: f64,
    pub reflectivity: f64,
}

impl Device {
    pub fn new(id: impl Into<String>, kind: DeviceKind, t: f64, x: f64) -> Self {
        Self {
            id: id.into(),
            kind,
            t,
            x,
            beta: 0.0,
            phase: 0.0,
            reflectivity: 0.5,
        }
    }

    pub fn moving(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn event(&self) -> Result<Event, ExperimentError> {
        Event::new(self.t, self.x).map_err(|e| ExperimentError::Invalid(vec![Violation::new(&self.id, e.to_string())]))
    }

    pub fn frame(&self) -> Result<Frame, ExperimentError> {
        Frame::new(self.beta).map_err(|e| ExperimentError::Invalid(vec![Violation::new(&self.id, e.to_string())]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChoicePlacement {
    AtBeamSplitter,
    AtDetector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SingleParticle,
    TwoParticle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub devices: Vec<Device>,
    pub placement: ChoicePlacement,
    pub paths_indistinguishable: bool,
    /// Two-particle fringe visibility in [0, 1].
    pub visibility: f64,
    /// Velocity of the frame in which the QM collapse ordering is narrated.
    /// Never changes a prediction.
    pub preferred_frame_beta: f64,
}

impl ExperimentConfig {
    pub fn new(mode: Mode, placement: ChoicePlacement, devices: Vec<Device>) -> Self {
        Self {
            mode,
            devices,
            placement,
            paths_indistinguishable: true,
            visibility: 1.0,
            preferred_frame_beta: 0.0,
        }
    }

    fn of_kind(&self, kind: DeviceKind) -> impl Iterator<Item = &Device> {
        self.devices.iter().filter(move |d| d.kind == kind)
    }

    /// Detectors in listing order.
    pub fn detectors(&self) -> Vec<&Device> {
        self.of_kind(DeviceKind::Detector).collect()
    }

    /// Beam-splitters in listing order.
    pub fn beam_splitters(&self) -> Vec<&Device> {
        self.of_kind(DeviceKind::BeamSplitter).collect()
    }

    pub fn device(&self, id: &str) -> Option<&Device> {
        self.devices.iter().find(|d| d.id == id)
    }

    /// Default phase settings (α, β) taken from the two sides' beam-splitters.
    /// Zero for single-particle setups.
    pub fn default_settings(&self) -> (f64, f64) {
        match (self.mode, self.beam_splitters().as_slice()) {
            (Mode::TwoParticle, [a, b, ..]) => (a.phase, b.phase),
            _ => (0.0, 0.0),
        }
    }

    /// Reflectivity of the single beam-splitter (probability of the D(+) port).
    pub fn split_ratio(&self) -> f64 {
        self.beam_splitters().first().map_or(0.5, |d| d.reflectivity)
    }
}

/// A single broken rule, addressed by field path (e.g. `devices[2].beta`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {}", join(.0))]
    Invalid(Vec<Violation>),
    #[error("single-particle setup has only one choice site when placement is at-beam-splitter")]
    SingleChoiceSite,
}

fn join(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Lists every invariant the configuration breaks; empty when valid.
pub fn validate(cfg: &ExperimentConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, d) in cfg.devices.iter().enumerate() {
        let at = |key: &str| format!("devices[{i}].{key}");
        if d.id.trim().is_empty() {
            out.push(Violation::new(at("id"), "device id must be non-empty"));
        } else if !seen.insert(d.id.as_str()) {
            out.push(Violation::new(at("id"), format!("duplicate device id '{}'", d.id)));
        }
        if !d.t.is_finite() {
            out.push(Violation::new(at("t"), "event time must be finite"));
        }
        if !d.x.is_finite() {
            out.push(Violation::new(at("x"), "event position must be finite"));
        }
        if !d.beta.is_finite() || d.beta.abs() >= 1.0 {
            out.push(Violation::new(at("beta"), format!("frame speed violation: |beta| = {} must be < 1", d.beta.abs())));
        }
        if !d.phase.is_finite() {
            out.push(Violation::new(at("phase"), "phase must be finite"));
        }
        if !(0.0..=1.0).contains(&d.reflectivity) {
            out.push(Violation::new(at("reflectivity"), "reflectivity must lie in [0, 1]"));
        }
    }
    if !(0.0..=1.0).contains(&cfg.visibility) {
        out.push(Violation::new("visibility", "visibility must lie in [0, 1]"));
    }
    if !cfg.preferred_frame_beta.is_finite() || cfg.preferred_frame_beta.abs() >= 1.0 {
        out.push(Violation::new(
            "preferred_frame_beta",
            format!("frame speed violation: |beta| = {} must be < 1", cfg.preferred_frame_beta.abs()),
        ));
    }

    let count = |k| cfg.of_kind(k).count();
    let (sources, splitters, detectors) = (
        count(DeviceKind::Source),
        count(DeviceKind::BeamSplitter),
        count(DeviceKind::Detector),
    );
    let expected = match cfg.mode {
        Mode::SingleParticle => (1, 1, 2),
        Mode::TwoParticle => (1, 2, 4),
    };
    for (kind, have, want) in [
        ("source", sources, expected.0),
        ("beam-splitter", splitters, expected.1),
        ("detector", detectors, expected.2),
    ] {
        if have != want {
            out.push(Violation::new(
                "devices",
                format!("device count violation: {:?} mode needs {want} {kind}(s), found {have}", cfg.mode),
            ));
        }
    }
    out
}

fn ensure_valid(cfg: &ExperimentConfig) -> Result<(), ExperimentError> {
    let v = validate(cfg);
    if v.is_empty() {
        Ok(())
    } else {
        Err(ExperimentError::Invalid(v))
    }
}

/// A choice event together with the rest frame of the device hosting it.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceEvent {
    pub device_id: String,
    pub event: Event,
    pub frame: Frame,
}

impl ChoiceEvent {
    fn of(d: &Device) -> Result<Self, ExperimentError> {
        Ok(Self {
            device_id: d.id.clone(),
            event: d.event()?,
            frame: d.frame()?,
        })
    }
}

/// The two events at which outcomes become determined.
///
/// At-beam-splitter placement picks the two sides' beam-splitter impacts. At
/// detector placement, a single-particle setup picks the arrivals at D(+) and
/// D(−); a two-particle setup picks the first listed detector of each side.
pub fn choice_events(cfg: &ExperimentConfig) -> Result<(ChoiceEvent, ChoiceEvent), ExperimentError> {
    ensure_valid(cfg)?;
    let (a, b) = match (cfg.mode, cfg.placement) {
        (Mode::SingleParticle, ChoicePlacement::AtBeamSplitter) => return Err(ExperimentError::SingleChoiceSite),
        (Mode::SingleParticle, ChoicePlacement::AtDetector) => {
            let d = cfg.detectors();
            (d[0], d[1])
        }
        (Mode::TwoParticle, ChoicePlacement::AtBeamSplitter) => {
            let s = cfg.beam_splitters();
            (s[0], s[1])
        }
        (Mode::TwoParticle, ChoicePlacement::AtDetector) => {
            let d = cfg.detectors();
            (d[0], d[2])
        }
    };
    Ok((ChoiceEvent::of(a)?, ChoiceEvent::of(b)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TimingClass {
    /// One side sees the other's choice as already made; the other does not.
    StandardBeforeAfter,
    /// Each side sees its own choice first, in its own rest frame.
    BeforeBefore,
    /// Each side sees the other's choice first, in its own rest frame.
    AfterAfter,
    /// Simultaneous within tolerance in at least one device frame.
    Boundary,
}

impl fmt::Display for TimingClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Timing class from two choice events, each judged in its own frame.
pub fn timing_of(a: &ChoiceEvent, b: &ChoiceEvent, tol: f64) -> TimingClass {
    let seen_by_a = order_in_frame(&a.event, &b.event, &a.frame, tol);
    let seen_by_b = order_in_frame(&b.event, &a.event, &b.frame, tol);
    match (seen_by_a, seen_by_b) {
        (Ordering::Simultaneous, _) | (_, Ordering::Simultaneous) => TimingClass::Boundary,
        (Ordering::After, Ordering::After) => TimingClass::BeforeBefore,
        (Ordering::Before, Ordering::Before) => TimingClass::AfterAfter,
        _ => TimingClass::StandardBeforeAfter,
    }
}

pub fn classify_timing(cfg: &ExperimentConfig, tol: f64) -> Result<TimingClass, ExperimentError> {
    let (a, b) = choice_events(cfg)?;
    Ok(timing_of(&a, &b, tol))
}

/// Canonical setups used by tests, the bundled scenarios and the suite.
pub mod presets {
    use super::*;

    /// The single-photon gedankenexperiment: source, 50-50 splitter, delay
    /// line, and two far-apart detectors. The wave reaches D(−) at t = 9.9,
    /// x = −1 and D(+) at t = 10, x = 1 in the lab; `plus_beta` sets the
    /// velocity of D(+).
    pub fn fig1(plus_beta: f64) -> ExperimentConfig {
        ExperimentConfig::new(
            Mode::SingleParticle,
            ChoicePlacement::AtDetector,
            vec![
                Device::new("S", DeviceKind::Source, 0.0, 0.0),
                Device::new("BS", DeviceKind::BeamSplitter, 1.0, 0.0),
                Device::new("DL", DeviceKind::DelayLine, 5.0, 0.5),
                Device::new("D+", DeviceKind::Detector, 10.0, 1.0).moving(plus_beta),
                Device::new("D-", DeviceKind::Detector, 9.9, -1.0),
            ],
        )
    }

    /// Two-particle setup with beam-splitter impacts at (9.9, −1) for side A
    /// and (10, 1) for side B. Detectors sit one unit behind each splitter.
    pub fn two_particle(beta_a: f64, beta_b: f64) -> ExperimentConfig {
        ExperimentConfig::new(
            Mode::TwoParticle,
            ChoicePlacement::AtBeamSplitter,
            vec![
                Device::new("S", DeviceKind::Source, 0.0, 0.0),
                Device::new("BS-A", DeviceKind::BeamSplitter, 9.9, -1.0).moving(beta_a),
                Device::new("BS-B", DeviceKind::BeamSplitter, 10.0, 1.0).moving(beta_b),
                Device::new("DA+", DeviceKind::Detector, 10.9, -2.0),
                Device::new("DA-", DeviceKind::Detector, 10.9, -2.0),
                Device::new("DB+", DeviceKind::Detector, 11.0, 2.0),
                Device::new("DB-", DeviceKind::Detector, 11.0, 2.0),
            ],
        )
    }
}
