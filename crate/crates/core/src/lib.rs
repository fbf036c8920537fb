//! Singular geometry, local asymptotics, simulation and classification of
//! three-timescale mixed-mode oscillators: a cubic normal form, the Koper
//! model and a reduced Hodgkin–Huxley model.

// `!(a < b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod drift;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod integrate;
pub mod local;
pub mod model;
pub mod quad;
pub mod roots;
pub mod verify;

pub use classify::{analyse, Analysis, FareySegment, Frame, Position, RegimeLabel, Thresholds};
pub use drift::{g_drift, lambda_r, lao_count, mu_r, LaoCount};
pub use error::{Error, Result};
pub use geometry::{classify_relative_config, geometry_report, ConfigKind, GeometryReport, Side};
pub use harness::{sweep_hh, sweep_koper, Config, GridSpec, SweepResult};
pub use integrate::{integrate, IntegratorConfig, Trajectory};
pub use local::{entry_exit, lambda_sh, landmarks, LandmarkMode, LocalLandmarks};
pub use model::{koper_to_normal_form, HHParams, KoperParams, NormalFormParams, PhiSpec, State3, System};
pub use verify::{run_all, run_criterion, CriterionReport};
