//! Seed-deterministic trial sampling.
//!
//! Each setting of a run gets its own ChaCha8 stream seeded with
//! `sub_seed(master, setting_index)`, so the records do not depend on how
//! settings are scheduled across threads. Outcomes are drawn by inverse CDF
//! over the canonical outcome order of the distribution's mode.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiment::{validate, ExperimentConfig, ExperimentError, TimingClass};
use crate::theories::{predict, JointDistribution, Outcome, Settings, TheoryError, TheoryModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error("invalid run plan: {0}")]
    Plan(String),
}

impl From<ExperimentError> for SampleError {
    fn from(e: ExperimentError) -> Self {
        SampleError::Theory(e.into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub setting_index: usize,
    pub trial: u64,
    pub settings: Settings,
    pub outcome: Outcome,
    pub theory: Option<TheoryModel>,
    pub timing: Option<TimingClass>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    pub config: ExperimentConfig,
    pub model: TheoryModel,
    pub settings: Vec<Settings>,
    pub trials_per_setting: u64,
    pub seed: u64,
}

impl RunPlan {
    pub fn check(&self) -> Result<(), SampleError> {
        if self.settings.is_empty() {
            return Err(SampleError::Plan("settings list is empty".into()));
        }
        if self.trials_per_setting == 0 {
            return Err(SampleError::Plan("trials per setting must be at least 1".into()));
        }
        if let Some(s) = self.settings.iter().find(|s| !s.alpha.is_finite() || !s.beta.is_finite()) {
            return Err(SampleError::Plan(format!("non-finite setting ({}, {})", s.alpha, s.beta)));
        }
        let v = validate(&self.config);
        if !v.is_empty() {
            return Err(ExperimentError::Invalid(v).into());
        }
        Ok(())
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-setting seed: `splitmix64(master + 0x9E3779B97F4A7C15 · (index + 1))`,
/// all arithmetic wrapping mod 2⁶⁴. Part of the output format contract; do
/// not change.
pub fn sub_seed(master: u64, setting_index: u64) -> u64 {
    splitmix64(master.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(setting_index.wrapping_add(1))))
}

fn draw(dist: &JointDistribution, u: f64) -> Outcome {
    let mut acc = 0.0;
    let mut last_supported = None;
    for (o, p) in dist.iter() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last_supported = Some(o);
        if u < acc {
            return o;
        }
    }
    // u landed in the rounding gap above the final cumulative sum.
    last_supported.expect("normalized distribution has support")
}

/// Like [`sample`] but tags records with `setting_index` and skips checks.
pub fn sample_at(dist: &JointDistribution, n: u64, seed: u64, setting_index: usize) -> Vec<TrialRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|trial| TrialRecord {
            setting_index,
            trial,
            settings: dist.settings,
            outcome: draw(dist, rng.gen::<f64>()),
            theory: dist.theory,
            timing: dist.timing,
        })
        .collect()
}

/// Draws `n` independent trials from `dist`, reproducibly for a given seed.
pub fn sample(dist: &JointDistribution, n: u64, seed: u64) -> Result<Vec<TrialRecord>, SampleError> {
    dist.check()?;
    if n == 0 {
        return Err(SampleError::Plan("trial count must be at least 1".into()));
    }
    Ok(sample_at(dist, n, seed, 0))
}

/// Analytic distribution for every setting of the plan, in plan order.
pub fn distributions(plan: &RunPlan) -> Result<Vec<JointDistribution>, SampleError> {
    plan.check()?;
    plan.settings
        .iter()
        .map(|s| predict(plan.model, &plan.config, s.alpha, s.beta).map_err(Into::into))
        .collect()
}

/// Runs every setting of the plan, sorted by (setting index, trial index).
pub fn run(plan: &RunPlan) -> Result<Vec<TrialRecord>, SampleError> {
    let dists = distributions(plan)?;
    let chunks: Vec<Vec<TrialRecord>> = dists
        .par_iter()
        .enumerate()
        .map(|(i, d)| sample_at(d, plan.trials_per_setting, sub_seed(plan.seed, i as u64), i))
        .collect();
    Ok(chunks.into_iter().flatten().collect())
}
