//! Preferred-frame quantum mechanics versus Multisimultaneity.
//!
//! Simulates single- and two-particle interferometer experiments whose
//! choice devices (beam-splitters or detectors) move relativistically, and
//! compares the two theories' predictions analytically and by seeded Monte
//! Carlo sampling.

pub mod cli;
pub mod experiment;
pub mod kinematics;
pub mod montecarlo;
pub mod stats;
pub mod theories;

pub use experiment::{ChoicePlacement, Device, DeviceKind, ExperimentConfig, Mode, TimingClass};
pub use kinematics::{Event, Frame};
pub use montecarlo::{RunPlan, TrialRecord};
pub use theories::{JointDistribution, Outcome, Settings, TheoryModel};
