//! Config ingestion, ensemble execution, statistics, calibration of the
//! reservoir depletion parameter and CSV output.

mod calibrate;
mod config;
mod output;
mod stats;

use std::path::PathBuf;

use rayon::prelude::*;
use thiserror::Error;

pub use calibrate::{calibrate_depletion, Calibration, CALIBRATION_BRACKET};
pub use config::{
    ExperimentConfig, ExperimentSection, LayoutSection, PlannerSection, PointEntry, ResolvedExperiment, SiteEntry,
    StochasticSection, TimingSection,
};
pub use output::{events_csv, cycle_stats_csv, run_meta_toml, write_outputs, EVENTS_HEADER, CYCLE_STATS_HEADER};
pub use stats::{
    aggregate, binomial_half_width, cumulative_success_rate, CiMethod, CycleStats, ExperimentStats, MeanCounters,
    RateEstimate, ReplicaSummary, SuccessDefinition,
};

use crate::engine::{run_realization, EngineError, Event};
use crate::geometry::Role;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid {key}: {reason}")]
    Config { key: String, reason: String },
    #[error("cannot parse config{}: {message}", path.as_ref().map(|p| format!(" {}", p.display())).unwrap_or_default())]
    Parse { path: Option<PathBuf>, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("replica {replica} has {got} cycle records, expected {expected}")]
    MismatchedRecords { expected: usize, replica: usize, got: usize },
    #[error(
        "no mean_ensemble_at_full in [{lo}, {hi}] reaches {target} delivered atoms: \
         {lo} gives {at_lo:.3}, {hi} gives {at_hi:.3}"
    )]
    NoRoot { target: f64, lo: f64, hi: f64, at_lo: f64, at_hi: f64 },
}

impl HarnessError {
    pub(crate) fn config(key: &str, reason: impl Into<String>) -> Self {
        Self::Config { key: key.to_string(), reason: reason.into() }
    }
}

/// Statistics plus the concatenated event log of every replica.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub stats: ExperimentStats,
    pub replicas: Vec<ReplicaSummary>,
    pub events: Vec<Event>,
}

/// Runs every replica (in parallel) and aggregates in replica order.
///
/// Replica `i` draws from stream `i` of the generator keyed by the master
/// seed, so results do not depend on thread scheduling or on how many
/// replicas follow it.
pub fn run_experiment(exp: &ResolvedExperiment, log_events: bool) -> Result<ExperimentOutput, HarnessError> {
    let runs = (0..exp.n_replicas)
        .into_par_iter()
        .map(|i| run_realization(&exp.sim, exp.master_seed, i, exp.n_cycles, log_events))
        .collect::<Result<Vec<_>, _>>()?;

    let mut events = Vec::new();
    let mut replicas = Vec::with_capacity(runs.len());
    for r in runs {
        events.extend(r.events);
        replicas.push(ReplicaSummary {
            records: r.records,
            initial_reservoir: r.final_state.initial_reservoir,
            counters: r.final_state.counters,
        });
    }
    let layout = &exp.sim.layout;
    let stats = aggregate(
        &replicas,
        layout.count_role(Role::Buffer),
        layout.count_role(Role::Target),
        exp.success_definition,
        exp.ci_method,
    )?;
    Ok(ExperimentOutput { stats, replicas, events })
}
