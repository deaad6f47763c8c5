//! Simulation and verification lab for a mean-field system of two-type
//! sites at infinite branching rate, its finite-rate counterpart and their
//! scaling limits.
//!
//! The crate reproduces every closed-form quantity of the underlying model
//! at desk scale (jump-measure masses and moments, harmonic-measure laws,
//! transform identities) and gathers statistical evidence for the three
//! convergence statements through trend- and bound-based suites. The `mcb`
//! binary drives everything from experiment configs; `verify` runs the
//! acceptance battery.

pub mod analysis;
pub mod config;
pub mod duality;
pub mod dynamics;
pub mod measures;
pub mod oracle;
pub mod quad;
pub mod record;
pub mod reference;
pub mod report;
pub mod rng;
pub mod suites;
pub mod svg;
pub mod verify;

pub use analysis::{TestReport, Verdict};
pub use measures::{Axis, BoundaryPoint, JumpMark, QuadrantPoint, SiteKind, TruncationWindow};
pub use record::{PathRecord, RecordMode};
