//! Estimators over trial records, with binomial standard errors.
//!
//! Every estimator also has an exact counterpart that reads an analytic
//! [`JointDistribution`] directly; those report zero standard error.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::ops::Add;
use thiserror::Error;

use crate::experiment::Mode;
use crate::montecarlo::TrialRecord;
use crate::theories::{JointDistribution, Outcome, Settings, Sign};

/// Default significance multiplier for verdicts.
pub const DEFAULT_K: f64 = 4.0;

/// Local realistic bound on |S|.
pub const LOCAL_BOUND: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("no records")]
    Empty,
    #[error("records mix several setting pairs")]
    MixedSettings,
    #[error("records are from the wrong experiment mode (expected {0:?})")]
    WrongMode(Mode),
    #[error("no records for setting pair (alpha = {}, beta = {})", .0.alpha, .0.beta)]
    MissingSetting(Settings),
    #[error("side {0} has no local setting observed under two or more remote settings")]
    InsufficientCoverage(char),
}

/// Coincidence counts (N++, N+−, N−+, N−−).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    pub pp: u64,
    pub pm: u64,
    pub mp: u64,
    pub mm: u64,
}

impl PairCounts {
    pub fn total(&self) -> u64 {
        self.pp + self.pm + self.mp + self.mm
    }

    pub fn record(&mut self, o: Outcome) -> Result<(), StatsError> {
        match o {
            Outcome::Pair(Sign::Plus, Sign::Plus) => self.pp += 1,
            Outcome::Pair(Sign::Plus, Sign::Minus) => self.pm += 1,
            Outcome::Pair(Sign::Minus, Sign::Plus) => self.mp += 1,
            Outcome::Pair(Sign::Minus, Sign::Minus) => self.mm += 1,
            Outcome::Fire { .. } => return Err(StatsError::WrongMode(Mode::TwoParticle)),
        }
        Ok(())
    }

    pub fn correlation(&self) -> f64 {
        let n = self.total() as f64;
        ((self.pp + self.mm) as f64 - (self.pm + self.mp) as f64) / n
    }
}

impl Add for PairCounts {
    type Output = PairCounts;

    fn add(self, o: PairCounts) -> PairCounts {
        PairCounts {
            pp: self.pp + o.pp,
            pm: self.pm + o.pm,
            mp: self.mp + o.mp,
            mm: self.mm + o.mm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlator {
    pub settings: Settings,
    pub e: f64,
    pub stderr: f64,
    /// Absent for exact (analytic) correlators.
    pub counts: Option<PairCounts>,
}

impl Correlator {
    pub fn from_counts(settings: Settings, counts: PairCounts) -> Result<Self, StatsError> {
        let n = counts.total();
        if n == 0 {
            return Err(StatsError::Empty);
        }
        let e = counts.correlation();
        Ok(Self {
            settings,
            e,
            stderr: ((1.0 - e * e) / n as f64).sqrt(),
            counts: Some(counts),
        })
    }

    pub fn exact(dist: &JointDistribution) -> Result<Self, StatsError> {
        if dist.mode != Mode::TwoParticle {
            return Err(StatsError::WrongMode(Mode::TwoParticle));
        }
        Ok(Self {
            settings: dist.settings,
            e: dist.correlation(),
            stderr: 0.0,
            counts: None,
        })
    }
}

/// E = (N++ + N−− − N+− − N−+)/N over records sharing one setting pair.
pub fn correlator(records: &[TrialRecord]) -> Result<Correlator, StatsError> {
    let first = records.first().ok_or(StatsError::Empty)?;
    let mut counts = PairCounts::default();
    for r in records {
        if r.settings != first.settings {
            return Err(StatsError::MixedSettings);
        }
        counts.record(r.outcome)?;
    }
    Correlator::from_counts(first.settings, counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshSettings {
    pub a: f64,
    pub a_prime: f64,
    pub b: f64,
    pub b_prime: f64,
}

impl Default for ChshSettings {
    /// Maximizers of the cos(α + β) correlation.
    fn default() -> Self {
        Self {
            a: 0.0,
            a_prime: FRAC_PI_2,
            b: -FRAC_PI_4,
            b_prime: FRAC_PI_4,
        }
    }
}

impl ChshSettings {
    /// (a,b), (a,b′), (a′,b), (a′,b′), the order the combination uses.
    pub fn pairs(&self) -> [Settings; 4] {
        [
            Settings::new(self.a, self.b),
            Settings::new(self.a, self.b_prime),
            Settings::new(self.a_prime, self.b),
            Settings::new(self.a_prime, self.b_prime),
        ]
    }

    /// Recovers the CHSH angles from four settings listed in [`pairs`] order.
    ///
    /// [`pairs`]: ChshSettings::pairs
    pub fn from_pairs(s: &[Settings]) -> Option<Self> {
        let [ab, abp, apb, apbp] = s else { return None };
        let c = Self {
            a: ab.alpha,
            a_prime: apb.alpha,
            b: ab.beta,
            b_prime: abp.beta,
        };
        (c.pairs() == [*ab, *abp, *apb, *apbp]).then_some(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshResult {
    pub s: f64,
    pub stderr: f64,
    pub correlators: [Correlator; 4],
    pub k: f64,
    pub violates_local_bound: bool,
}

/// S = E(a,b) + E(a,b′) + E(a′,b) − E(a′,b′), errors added in quadrature.
pub fn chsh_from_correlators(correlators: [Correlator; 4], k: f64) -> ChshResult {
    let [ab, abp, apb, apbp] = &correlators;
    let s = ab.e + abp.e + apb.e - apbp.e;
    let stderr = correlators.iter().map(|c| c.stderr * c.stderr).sum::<f64>().sqrt();
    ChshResult {
        s,
        stderr,
        violates_local_bound: s - LOCAL_BOUND > k * stderr,
        correlators,
        k,
    }
}

pub fn chsh(records: &[TrialRecord], angles: &ChshSettings, k: f64) -> Result<ChshResult, StatsError> {
    let mut tallies = [PairCounts::default(); 4];
    let pairs = angles.pairs();
    for r in records {
        if let Some(i) = pairs.iter().position(|s| *s == r.settings) {
            tallies[i].record(r.outcome)?;
        }
    }
    let mut cs = Vec::with_capacity(4);
    for (s, c) in pairs.iter().zip(tallies) {
        if c.total() == 0 {
            return Err(StatsError::MissingSetting(*s));
        }
        cs.push(Correlator::from_counts(*s, c)?);
    }
    let cs: [Correlator; 4] = cs.try_into().expect("four correlators");
    Ok(chsh_from_correlators(cs, k))
}

/// CHSH from analytic distributions given in [`ChshSettings::pairs`] order.
pub fn chsh_exact(dists: &[JointDistribution; 4], k: f64) -> Result<ChshResult, StatsError> {
    let mut cs = Vec::with_capacity(4);
    for d in dists {
        cs.push(Correlator::exact(d)?);
    }
    Ok(chsh_from_correlators(cs.try_into().expect("four correlators"), k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalingVerdict {
    ConsistentWithNoSignaling,
    SignalingDetected,
}

/// Worst marginal shift observed on one side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideSignaling {
    /// Largest |P(+ | remote = r₁) − P(+ | remote = r₂)| at a fixed local setting.
    pub max_delta: f64,
    /// Standard error of that difference.
    pub stderr: f64,
    /// k · stderr for that difference.
    pub threshold: f64,
    /// Whether any compared pair exceeded its threshold.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalingReport {
    pub side_a: SideSignaling,
    pub side_b: SideSignaling,
    pub k: f64,
    pub verdict: SignalingVerdict,
}

impl SignalingReport {
    fn new(side_a: SideSignaling, side_b: SideSignaling, k: f64) -> Self {
        let verdict = if side_a.flagged || side_b.flagged {
            SignalingVerdict::SignalingDetected
        } else {
            SignalingVerdict::ConsistentWithNoSignaling
        };
        Self { side_a, side_b, k, verdict }
    }
}

/// Marginal tallies of one side, grouped by (local, remote) setting.
struct MarginalTable {
    // (local, remote, n, n_plus) in first-seen order.
    cells: Vec<(f64, f64, u64, u64)>,
}

impl MarginalTable {
    fn new() -> Self {
        Self { cells: Vec::new() }
    }

    fn add(&mut self, local: f64, remote: f64, plus: bool) {
        let cell = match self.cells.iter_mut().find(|c| c.0 == local && c.1 == remote) {
            Some(c) => c,
            None => {
                self.cells.push((local, remote, 0, 0));
                self.cells.last_mut().expect("just pushed")
            }
        };
        cell.2 += 1;
        cell.3 += plus as u64;
    }

    fn assess(&self, k: f64, side: char) -> Result<SideSignaling, StatsError> {
        let mut worst = SideSignaling {
            max_delta: 0.0,
            stderr: 0.0,
            threshold: 0.0,
            flagged: false,
        };
        let mut covered = false;
        for (i, c1) in self.cells.iter().enumerate() {
            for c2 in &self.cells[i + 1..] {
                if c1.0 != c2.0 {
                    continue;
                }
                covered = true;
                let (p1, p2) = (c1.3 as f64 / c1.2 as f64, c2.3 as f64 / c2.2 as f64);
                let delta = (p1 - p2).abs();
                let se = (p1 * (1.0 - p1) / c1.2 as f64 + p2 * (1.0 - p2) / c2.2 as f64).sqrt();
                worst.flagged |= delta > k * se;
                if delta > worst.max_delta || (delta == worst.max_delta && se > worst.stderr) {
                    worst.max_delta = delta;
                    worst.stderr = se;
                    worst.threshold = k * se;
                }
            }
        }
        if covered {
            Ok(worst)
        } else {
            Err(StatsError::InsufficientCoverage(side))
        }
    }
}

/// Tests whether either side's P(σ = +1) moves with the remote setting.
pub fn no_signaling_test(records: &[TrialRecord], k: f64) -> Result<SignalingReport, StatsError> {
    if records.is_empty() {
        return Err(StatsError::Empty);
    }
    let (mut a, mut b) = (MarginalTable::new(), MarginalTable::new());
    for r in records {
        let Outcome::Pair(sa, sb) = r.outcome else {
            return Err(StatsError::WrongMode(Mode::TwoParticle));
        };
        a.add(r.settings.alpha, r.settings.beta, sa == Sign::Plus);
        b.add(r.settings.beta, r.settings.alpha, sb == Sign::Plus);
    }
    Ok(SignalingReport::new(a.assess(k, 'A')?, b.assess(k, 'B')?, k))
}

/// Exact marginal check over analytic distributions: any shift larger than
/// `tol` counts as signaling.
pub fn no_signaling_exact(dists: &[JointDistribution], tol: f64) -> Result<SignalingReport, StatsError> {
    let side = |local: fn(&Settings) -> f64, marginal: fn(&JointDistribution) -> f64, name: char| {
        let mut worst = SideSignaling {
            max_delta: 0.0,
            stderr: 0.0,
            threshold: tol,
            flagged: false,
        };
        let mut covered = false;
        for (i, d1) in dists.iter().enumerate() {
            for d2 in &dists[i + 1..] {
                if local(&d1.settings) != local(&d2.settings) || d1.settings == d2.settings {
                    continue;
                }
                covered = true;
                let delta = (marginal(d1) - marginal(d2)).abs();
                worst.max_delta = worst.max_delta.max(delta);
                worst.flagged |= delta > tol;
            }
        }
        if covered {
            Ok(worst)
        } else {
            Err(StatsError::InsufficientCoverage(name))
        }
    };
    if dists.iter().any(|d| d.mode != Mode::TwoParticle) {
        return Err(StatsError::WrongMode(Mode::TwoParticle));
    }
    let a = side(|s| s.alpha, JointDistribution::marginal_a_plus, 'A')?;
    let b = side(|s| s.beta, JointDistribution::marginal_b_plus, 'B')?;
    Ok(SignalingReport::new(a, b, 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleParticleReport {
    /// Number of trials; 0 for an exact report.
    pub n: u64,
    pub joint: f64,
    pub joint_stderr: f64,
    pub none: f64,
    pub none_stderr: f64,
    pub exclusive: f64,
    pub exclusive_stderr: f64,
    pub exclusive_plus: f64,
    pub exclusive_minus: f64,
}

fn binomial_se(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Double-fire, no-fire and exclusive-fire rates of single-particle records.
pub fn single_particle_rates(records: &[TrialRecord]) -> Result<SingleParticleReport, StatsError> {
    if records.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut tally = [0u64; 4];
    for r in records {
        if r.outcome.mode() != Mode::SingleParticle {
            return Err(StatsError::WrongMode(Mode::SingleParticle));
        }
        tally[r.outcome.index()] += 1;
    }
    let n = records.len() as u64;
    let rate = |c: u64| c as f64 / n as f64;
    let (plus, minus, joint, none) = (rate(tally[0]), rate(tally[1]), rate(tally[2]), rate(tally[3]));
    let exclusive = rate(tally[0] + tally[1]);
    Ok(SingleParticleReport {
        n,
        joint,
        joint_stderr: binomial_se(joint, n),
        none,
        none_stderr: binomial_se(none, n),
        exclusive,
        exclusive_stderr: binomial_se(exclusive, n),
        exclusive_plus: plus,
        exclusive_minus: minus,
    })
}

pub fn single_particle_exact(dist: &JointDistribution) -> Result<SingleParticleReport, StatsError> {
    if dist.mode != Mode::SingleParticle {
        return Err(StatsError::WrongMode(Mode::SingleParticle));
    }
    Ok(SingleParticleReport {
        n: 0,
        joint: dist.joint_fire(),
        joint_stderr: 0.0,
        none: dist.no_fire(),
        none_stderr: 0.0,
        exclusive: dist.exclusive(),
        exclusive_stderr: 0.0,
        exclusive_plus: dist.probs[0],
        exclusive_minus: dist.probs[1],
    })
}
