//! Analytic prediction engines.
//!
//! Both engines map a setup plus the two local phase settings to an exact
//! distribution over detector outcomes. Preferred-frame QM never looks at
//! device motion. Multisimultaneity lets a choice device take the remote
//! side into account only if, in its own rest frame, the remote choice has
//! already happened and the path pairs are indistinguishable.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::experiment::{classify_timing, validate, ChoicePlacement, ExperimentConfig, ExperimentError, Mode, TimingClass};
use crate::kinematics::SIMULTANEITY_TOL;

/// Tolerance on the total probability of a distribution.
pub const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// One trial's detector result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    /// Two-particle: which output port fired on side A and on side B.
    Pair(Sign, Sign),
    /// Single-particle: fire flags of D(+) and D(−).
    Fire { plus: bool, minus: bool },
}

impl Outcome {
    pub const PAIRS: [Outcome; 4] = [
        Outcome::Pair(Sign::Plus, Sign::Plus),
        Outcome::Pair(Sign::Plus, Sign::Minus),
        Outcome::Pair(Sign::Minus, Sign::Plus),
        Outcome::Pair(Sign::Minus, Sign::Minus),
    ];
    pub const FIRES: [Outcome; 4] = [
        Outcome::Fire { plus: true, minus: false },
        Outcome::Fire { plus: false, minus: true },
        Outcome::Fire { plus: true, minus: true },
        Outcome::Fire { plus: false, minus: false },
    ];

    /// Canonical outcome ordering for a mode.
    pub fn all(mode: Mode) -> &'static [Outcome; 4] {
        match mode {
            Mode::TwoParticle => &Self::PAIRS,
            Mode::SingleParticle => &Self::FIRES,
        }
    }

    pub fn mode(&self) -> Mode {
        match self {
            Outcome::Pair(..) => Mode::TwoParticle,
            Outcome::Fire { .. } => Mode::SingleParticle,
        }
    }

    /// Position in the canonical ordering.
    pub fn index(&self) -> usize {
        Self::all(self.mode()).iter().position(|o| o == self).expect("canonical")
    }

    /// Stable text code: `++ +- -+ --` for pairs, `10 01 11 00` for
    /// (D(+), D(−)) fire flags.
    pub fn code(&self) -> &'static str {
        match self {
            Outcome::Pair(Sign::Plus, Sign::Plus) => "++",
            Outcome::Pair(Sign::Plus, Sign::Minus) => "+-",
            Outcome::Pair(Sign::Minus, Sign::Plus) => "-+",
            Outcome::Pair(Sign::Minus, Sign::Minus) => "--",
            Outcome::Fire { plus: true, minus: false } => "10",
            Outcome::Fire { plus: false, minus: true } => "01",
            Outcome::Fire { plus: true, minus: true } => "11",
            Outcome::Fire { plus: false, minus: false } => "00",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::PAIRS.iter().chain(Self::FIRES.iter()).find(|o| o.code() == code).copied()
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl Serialize for Outcome {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for Outcome {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let code = String::deserialize(d)?;
        Outcome::from_code(&code).ok_or_else(|| serde::de::Error::custom(format!("unknown outcome code '{code}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TheoryModel {
    #[serde(rename = "qm")]
    PreferredFrameQM,
    #[serde(rename = "ms")]
    Multisimultaneity,
}

impl TheoryModel {
    pub fn short_name(self) -> &'static str {
        match self {
            TheoryModel::PreferredFrameQM => "qm",
            TheoryModel::Multisimultaneity => "ms",
        }
    }
}

impl fmt::Display for TheoryModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for TheoryModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "qm" | "preferred-frame-qm" => Ok(TheoryModel::PreferredFrameQM),
            "ms" | "multisimultaneity" => Ok(TheoryModel::Multisimultaneity),
            other => Err(format!("unknown model '{other}' (expected qm or ms)")),
        }
    }
}

/// Local phase settings: α on side A, β on side B (radians).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub alpha: f64,
    pub beta: f64,
}

impl Settings {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TheoryError {
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("undefined regime: choice events are simultaneous in a device frame")]
    UndefinedRegime,
    #[error("distribution is not normalized: {0}")]
    Unnormalized(String),
}

/// Exact probabilities over the four outcomes of a mode, in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    pub mode: Mode,
    pub probs: [f64; 4],
    pub settings: Settings,
    /// Generating engine; `None` for hand-built distributions.
    pub theory: Option<TheoryModel>,
    /// Timing class the engine acted on, when one applies.
    pub timing: Option<TimingClass>,
}

impl JointDistribution {
    /// Builds a distribution after checking it is finite, non-negative and
    /// sums to one within [`NORMALIZATION_TOL`].
    pub fn new(mode: Mode, probs: [f64; 4], settings: Settings) -> Result<Self, TheoryError> {
        let d = Self {
            mode,
            probs,
            settings,
            theory: None,
            timing: None,
        };
        d.check()?;
        Ok(d)
    }

    pub fn check(&self) -> Result<(), TheoryError> {
        if let Some(p) = self.probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(TheoryError::Unnormalized(format!("invalid probability {p}")));
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(TheoryError::Unnormalized(format!("probabilities sum to {total}")));
        }
        Ok(())
    }

    pub fn outcomes(&self) -> &'static [Outcome; 4] {
        Outcome::all(self.mode)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Outcome, f64)> + '_ {
        self.outcomes().iter().copied().zip(self.probs.iter().copied())
    }

    pub fn prob(&self, o: Outcome) -> f64 {
        if o.mode() == self.mode {
            self.probs[o.index()]
        } else {
            0.0
        }
    }

    /// E = P(++) + P(−−) − P(+−) − P(−+). Zero for single-particle modes.
    pub fn correlation(&self) -> f64 {
        match self.mode {
            Mode::TwoParticle => self.probs[0] + self.probs[3] - self.probs[1] - self.probs[2],
            Mode::SingleParticle => 0.0,
        }
    }

    /// P(σ = +1) on side A (two-particle) or P(D(+) fires) (single-particle).
    pub fn marginal_a_plus(&self) -> f64 {
        match self.mode {
            Mode::TwoParticle => self.probs[0] + self.probs[1],
            Mode::SingleParticle => self.probs[0] + self.probs[2],
        }
    }

    /// P(σ = +1) on side B (two-particle) or P(D(−) fires) (single-particle).
    pub fn marginal_b_plus(&self) -> f64 {
        match self.mode {
            Mode::TwoParticle => self.probs[0] + self.probs[2],
            Mode::SingleParticle => self.probs[1] + self.probs[2],
        }
    }

    pub fn joint_fire(&self) -> f64 {
        self.prob(Outcome::FIRES[2])
    }

    pub fn no_fire(&self) -> f64 {
        self.prob(Outcome::FIRES[3])
    }

    pub fn exclusive(&self) -> f64 {
        self.prob(Outcome::FIRES[0]) + self.prob(Outcome::FIRES[1])
    }

    fn stamped(mut self, theory: TheoryModel, timing: Option<TimingClass>) -> Self {
        self.theory = Some(theory);
        self.timing = timing;
        self
    }
}

/// ¼(1 + σ_a σ_b V cos(α + β)) in canonical pair order.
fn interfering_pairs(visibility: f64, s: Settings) -> [f64; 4] {
    let e = visibility * (s.alpha + s.beta).cos();
    let same = 0.25 * (1.0 + e);
    let diff = 0.25 * (1.0 - e);
    [same, diff, diff, same]
}

const UNCORRELATED_PAIRS: [f64; 4] = [0.25; 4];

/// Exactly one detector fires: D(+) with probability `r`.
fn exclusive_fire(r: f64) -> [f64; 4] {
    [r, 1.0 - r, 0.0, 0.0]
}

/// D(+) fires with probability `r` and D(−) with `1 − r`, independently.
fn independent_fire(r: f64) -> [f64; 4] {
    let q = 1.0 - r;
    [r * r, q * q, r * q, q * r]
}

fn ensure_valid(cfg: &ExperimentConfig) -> Result<(), TheoryError> {
    let v = validate(cfg);
    if v.is_empty() {
        Ok(())
    } else {
        Err(ExperimentError::Invalid(v).into())
    }
}

/// Preferred-frame quantum mechanics. The result does not depend on any
/// device velocity nor on the preferred frame itself.
pub fn qm_predict(cfg: &ExperimentConfig, alpha: f64, beta_phase: f64) -> Result<JointDistribution, TheoryError> {
    ensure_valid(cfg)?;
    let settings = Settings::new(alpha, beta_phase);
    let probs = match cfg.mode {
        Mode::TwoParticle => interfering_pairs(cfg.visibility, settings),
        Mode::SingleParticle => exclusive_fire(cfg.split_ratio()),
    };
    Ok(JointDistribution {
        mode: cfg.mode,
        probs,
        settings,
        theory: Some(TheoryModel::PreferredFrameQM),
        timing: None,
    })
}

/// Multisimultaneity, given the timing class of the setup's choice events.
///
/// * Two particles: correlated as in QM when at least one side sees the
///   other's choice as already made and paths are indistinguishable;
///   otherwise each side decides from local parameters alone and the outcome
///   is the flat product distribution.
/// * One particle, choice at the detectors: the frame-later detector fires
///   exactly when the frame-first one did not; under before-before timing
///   each detector decides on its own, giving 25% double-fire and 25%
///   no-fire.
/// * One particle, choice at the beam-splitter: one choice site, so the
///   result is the QM one and `timing` is ignored.
///
/// After-after timing is handled like standard timing: both sides take
/// account of each other, which reproduces QM.
pub fn ms_predict(
    cfg: &ExperimentConfig,
    alpha: f64,
    beta_phase: f64,
    timing: TimingClass,
) -> Result<JointDistribution, TheoryError> {
    ensure_valid(cfg)?;
    let settings = Settings::new(alpha, beta_phase);
    if cfg.mode == Mode::SingleParticle && cfg.placement == ChoicePlacement::AtBeamSplitter {
        let probs = exclusive_fire(cfg.split_ratio());
        return Ok(JointDistribution {
            mode: cfg.mode,
            probs,
            settings,
            theory: Some(TheoryModel::Multisimultaneity),
            timing: None,
        });
    }
    let takes_account = match timing {
        TimingClass::Boundary => return Err(TheoryError::UndefinedRegime),
        TimingClass::BeforeBefore => false,
        TimingClass::StandardBeforeAfter | TimingClass::AfterAfter => true,
    };
    let probs = match cfg.mode {
        Mode::TwoParticle if takes_account && cfg.paths_indistinguishable => interfering_pairs(cfg.visibility, settings),
        Mode::TwoParticle => UNCORRELATED_PAIRS,
        Mode::SingleParticle if takes_account => exclusive_fire(cfg.split_ratio()),
        Mode::SingleParticle => independent_fire(cfg.split_ratio()),
    };
    Ok(JointDistribution {
        mode: cfg.mode,
        probs,
        settings,
        theory: Some(TheoryModel::Multisimultaneity),
        timing: Some(timing),
    })
}

/// Dispatches to the chosen engine, classifying timing as needed.
pub fn predict(model: TheoryModel, cfg: &ExperimentConfig, alpha: f64, beta_phase: f64) -> Result<JointDistribution, TheoryError> {
    predict_with_tolerance(model, cfg, alpha, beta_phase, SIMULTANEITY_TOL)
}

pub fn predict_with_tolerance(
    model: TheoryModel,
    cfg: &ExperimentConfig,
    alpha: f64,
    beta_phase: f64,
    tol: f64,
) -> Result<JointDistribution, TheoryError> {
    ensure_valid(cfg)?;
    let timing = match classify_timing(cfg, tol) {
        Ok(t) => Some(t),
        Err(ExperimentError::SingleChoiceSite) => None,
        Err(e) => return Err(e.into()),
    };
    match (model, timing) {
        (TheoryModel::PreferredFrameQM, _) => Ok(qm_predict(cfg, alpha, beta_phase)?.stamped(model, timing)),
        (TheoryModel::Multisimultaneity, Some(t)) => ms_predict(cfg, alpha, beta_phase, t),
        // Single choice site; the class is irrelevant to the rule.
        (TheoryModel::Multisimultaneity, None) => ms_predict(cfg, alpha, beta_phase, TimingClass::StandardBeforeAfter),
    }
}
