//! Perceptual belief-state engine.
//!
//! Replays time-stamped perception scene logs, resolves object identities
//! with a weighted feature similarity, answers nested key-value queries and
//! amortizes symbolic annotation work over logged scenes while the robot is
//! idle.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amortizer;
pub mod annotators;
pub mod evalkit;
pub mod filters;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod qlang;
pub mod resolution;
pub mod simkit;

pub use model::{
    Activity, AssociationTarget, BeliefObject, Episode, FrameMeta, GrayGrid, HypId, Hypothesis,
    ObjectId, Percept, PerceptValue, Pose, RegionOfInterest, Scene,
};
