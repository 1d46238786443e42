//! Evidence-backed goal-obstacle analysis for migrating legacy systems to
//! cloud platforms.
//!
//! The crate bundles a literature-derived catalogue of cloud migration
//! goals, obstacles and resolution tactics ([`repository`]), a typed
//! goal-obstacle graph ([`model`]), a qualitative risk matrix with coverage
//! checking ([`risk`]), a session engine that drives the identify, assess and
//! resolve loop with an audit journal ([`procedure`]), and textual formats
//! for authoring, persisting and rendering models ([`formats`]).

pub mod formats;
pub mod model;
pub mod procedure;
pub mod repository;
pub mod risk;
#[cfg(feature = "testkit")]
pub mod testkit;

pub use model::{GoalModel, GoalPattern, ModelError, ObstacleOrigin, ObstacleSpec, Violation, ViolationRule};
pub use procedure::{Command, Session, SessionError, Step};
pub use repository::{DatasetSource, MigrationType, Repository, RepositoryError, TacticCategory};
pub use risk::{coverage_check, risk_of, CheckReport, Consequence, Likelihood, RiskLevel};
