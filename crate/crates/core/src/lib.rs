//! Monte Carlo simulator and move planner for reservoir-fed single-atom
//! tweezer arrays.
//!
//! Atoms are extracted from a large reservoir trap into a section of buffer
//! traps, then moved one at a time into a target structure. Every cycle images
//! the array, fills target vacancies from the buffers and refills the emptied
//! buffers from the reservoir. The simulator tracks ground truth and the
//! controller's belief separately, so moves are planned exactly as a real
//! controller would plan them between images.
//!
//! # Modules
//!
//! - [`geometry`]: trap positions, hexagonal lattices and the preset layout
//! - [`stochastic`]: survival, transport, extraction and reservoir decay draws
//! - [`planner`]: shortest-move heuristic and the exact matching oracle
//! - [`engine`]: the per-cycle state machine
//! - [`harness`]: config files, ensembles, statistics, calibration, CSV output
//!
//! Geometry and planning are generic over the scalar type ([`Real`]); the
//! simulation itself runs in `f64` and the aliases below fix that choice.

pub mod engine;
pub mod geometry;
pub mod harness;
pub mod planner;
pub mod scalar;
pub mod stochastic;

pub use scalar::Real;

pub use engine::{CycleRecord, Engine, EngineError, LossCounters, SimConfig, SystemState, TimingModel, TransportFailure};
pub use geometry::{LayoutError, Role, SiteId};
pub use harness::{ExperimentConfig, ExperimentStats, HarnessError, SuccessDefinition};
pub use planner::{MoveSource, Occupancy, PlannerStrategy, SiteState};
pub use stochastic::{ExtractionModel, LossModel, ReservoirState, RngStream, StochasticError, TransportModel};

/// Trap position in µm.
pub type Position = geometry::Position<f64>;
/// A single trap site.
pub type TrapSite = geometry::TrapSite<f64>;
/// Array layout in `f64` coordinates.
pub type ArrayLayout = geometry::ArrayLayout<f64>;
/// A single transport move.
pub type Move = planner::Move<f64>;
/// An ordered rearrangement plan.
pub type MovePlan = planner::MovePlan<f64>;
/// Result of the exact matching oracle.
pub type Assignment = planner::Assignment<f64>;
/// Move timing used by the planner.
pub type MoveTiming = planner::MoveTiming<f64>;
