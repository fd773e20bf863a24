//! TOML config documents: one flat file describing the setup and the run.
//!
//! ```toml
//! mode = "single-particle"
//! placement = "at-detector"
//! model = "ms"
//! trials = 100000
//! seed = 7
//!
//! [[devices]]
//! id = "D+"
//! kind = "detector"
//! t = 10.0
//! x = 1.0
//! beta = 0.1
//! ```

use serde::{Deserialize, Serialize};

use crate::experiment::{ChoicePlacement, Device, DeviceKind, ExperimentConfig, Mode, Violation};
use crate::montecarlo::RunPlan;
use crate::theories::{Settings, TheoryModel};

pub const DEFAULT_TRIALS: u64 = 10_000;

fn yes() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

fn default_trials() -> u64 {
    DEFAULT_TRIALS
}

fn default_model() -> TheoryModel {
    TheoryModel::PreferredFrameQM
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceDoc {
    pub id: String,
    pub kind: DeviceKind,
    pub t: f64,
    pub x: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub phase: f64,
    #[serde(default = "half")]
    pub reflectivity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub mode: Mode,
    pub placement: ChoicePlacement,
    #[serde(default = "yes")]
    pub paths_indistinguishable: bool,
    #[serde(default = "one")]
    pub visibility: f64,
    #[serde(default)]
    pub preferred_frame_beta: f64,
    #[serde(default = "default_model")]
    pub model: TheoryModel,
    /// (alpha, beta) pairs in radians. Empty means "use the beam-splitter
    /// phases".
    #[serde(default)]
    pub settings: Vec<[f64; 2]>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    pub devices: Vec<DeviceDoc>,
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config documents always serialize")
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            mode: self.mode,
            placement: self.placement,
            paths_indistinguishable: self.paths_indistinguishable,
            visibility: self.visibility,
            preferred_frame_beta: self.preferred_frame_beta,
            devices: self
                .devices
                .iter()
                .map(|d| Device {
                    id: d.id.clone(),
                    kind: d.kind,
                    t: d.t,
                    x: d.x,
                    beta: d.beta,
                    phase: d.phase,
                    reflectivity: d.reflectivity,
                })
                .collect(),
        }
    }

    /// Settings to run: the explicit list, or the beam-splitter phases.
    pub fn run_settings(&self) -> Vec<Settings> {
        if self.settings.is_empty() {
            let (a, b) = self.experiment().default_settings();
            vec![Settings::new(a, b)]
        } else {
            self.settings.iter().map(|[a, b]| Settings::new(*a, *b)).collect()
        }
    }

    pub fn plan(&self) -> RunPlan {
        RunPlan {
            config: self.experiment(),
            model: self.model,
            settings: self.run_settings(),
            trials_per_setting: self.trials,
            seed: self.seed,
        }
    }

    pub fn from_plan(plan: &RunPlan) -> Self {
        let c = &plan.config;
        Self {
            mode: c.mode,
            placement: c.placement,
            paths_indistinguishable: c.paths_indistinguishable,
            visibility: c.visibility,
            preferred_frame_beta: c.preferred_frame_beta,
            model: plan.model,
            settings: plan.settings.iter().map(|s| [s.alpha, s.beta]).collect(),
            trials: plan.trials_per_setting,
            seed: plan.seed,
            devices: c
                .devices
                .iter()
                .map(|d| DeviceDoc {
                    id: d.id.clone(),
                    kind: d.kind,
                    t: d.t,
                    x: d.x,
                    beta: d.beta,
                    phase: d.phase,
                    reflectivity: d.reflectivity,
                })
                .collect(),
        }
    }
}

fn key_of(line: &str) -> Option<&str> {
    let (k, _) = line.split_once('=')?;
    Some(k.trim().trim_matches('"'))
}

/// 1-based line in `text` where a violation's field is written; falls back to
/// the enclosing `[[devices]]` header, then to `None`.
pub fn locate(text: &str, field: &str) -> Option<usize> {
    let lines: Vec<&str> = text.lines().collect();
    let is_header = |l: &str| l.trim_start().starts_with('[');
    let device_headers: Vec<usize> = lines
        .iter()
        .enumerate()
        .filter(|(_, l)| l.trim() == "[[devices]]")
        .map(|(i, _)| i)
        .collect();

    if let Some(rest) = field.strip_prefix("devices[") {
        let (idx, key) = rest.split_once("].")?;
        let header = *device_headers.get(idx.parse::<usize>().ok()?)?;
        let body = lines[header + 1..].iter().take_while(|l| !is_header(l));
        let hit = body.enumerate().find(|(_, l)| key_of(l) == Some(key)).map(|(i, _)| header + 2 + i);
        return hit.or(Some(header + 1));
    }
    if field == "devices" {
        return device_headers.first().map(|h| h + 1);
    }
    lines
        .iter()
        .take_while(|l| !is_header(l))
        .position(|l| key_of(l) == Some(field))
        .map(|i| i + 1)
}

/// `path:line: field: rule` lines for a set of violations.
pub fn describe(path: &str, text: &str, violations: &[Violation]) -> Vec<String> {
    violations
        .iter()
        .map(|v| match locate(text, &v.field) {
            Some(line) => format!("{path}:{line}: {v}"),
            None => format!("{path}: {v}"),
        })
        .collect()
}
