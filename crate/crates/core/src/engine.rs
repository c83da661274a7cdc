//! The rearrangement cycle as a state machine over stochastic draws.
//!
//! A realization starts with a loaded reservoir and an empty array. Each
//! cycle then runs
//!
//! 1. **image**: belief is reset to ground truth and the observables of the
//!    cycle are recorded,
//! 2. **fill**: target vacancies are filled from buffer traps, planned on the
//!    belief,
//! 3. **refill**: believed-empty buffer traps are reloaded from the reservoir.
//!
//! Between images the controller only knows what it planned. Transport moves
//! are assumed to succeed, and refilled buffers stay believed-empty until the
//! next image confirms them, so the planner never sources from an unverified
//! refill.
//!
//! Every window of the timing model applies one-body loss to trapped atoms
//! and to the reservoir. The clock follows the measured aggregate windows;
//! per-move durations are only logged.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{hex_six_layout, Role, SiteId};
use crate::planner::{MoveSource, Occupancy, PlanError, Planner, PlannerStrategy, SiteState};
use crate::stochastic::{
    reservoir_decay, sample_extraction, sample_survival, sample_transport, ExtractionModel, LossModel, ReservoirState,
    RngStream, StochasticError, TransportModel,
};
use crate::{ArrayLayout, MovePlan, MoveTiming};

use rand_distr::{Distribution, Poisson};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Stochastic(#[from] StochasticError),
    #[error("target-fill plan contains a move from the reservoir")]
    ReservoirSourceInFillPlan,
    #[error("move source {0} is not believed occupied")]
    SourceNotBelievedOccupied(SiteId),
    #[error("move destination {0} is not believed empty")]
    DestinationNotBelievedEmpty(SiteId),
    #[error("site {0} is not in the layout")]
    UnknownSite(SiteId),
    #[error("atom placed on already occupied site {0}")]
    DoubleOccupancy(SiteId),
    #[error("invalid {key}: {reason}")]
    Config { key: &'static str, reason: String },
}

/// Durations of every phase of the sequence, s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingModel {
    pub t_mot: f64,
    pub t_molasses: f64,
    pub t_reservoir_transfer: f64,
    pub t_image: f64,
    /// Window over which imaging losses accrue. Defaults to the full image
    /// and readout time; the fluorescence exposure alone is 0.100 s.
    pub t_image_loss: f64,
    pub t_analysis_fill: f64,
    pub t_buffer_refill: f64,
    pub t_ramp: f64,
    pub t_move: f64,
}

impl Default for TimingModel {
    fn default() -> Self {
        Self {
            t_mot: 1.8,
            t_molasses: 0.040,
            t_reservoir_transfer: 0.020,
            t_image: 0.130,
            t_image_loss: 0.130,
            t_analysis_fill: 0.065,
            t_buffer_refill: 0.035,
            t_ramp: 130e-6,
            t_move: 310e-6,
        }
    }
}

impl TimingModel {
    /// Preparation time before the first image.
    pub fn preparation(&self) -> f64 {
        self.t_mot + self.t_molasses + self.t_reservoir_transfer
    }

    /// Image, fill and refill.
    pub fn cycle(&self) -> f64 {
        self.t_image + self.t_analysis_fill + self.t_buffer_refill
    }

    fn validate(&self) -> Result<(), EngineError> {
        let fields = [
            ("timing.t_mot_s", self.t_mot),
            ("timing.t_molasses_s", self.t_molasses),
            ("timing.t_reservoir_transfer_s", self.t_reservoir_transfer),
            ("timing.t_image_s", self.t_image),
            ("timing.t_image_loss_s", self.t_image_loss),
            ("timing.t_analysis_fill_s", self.t_analysis_fill),
            ("timing.t_buffer_refill_s", self.t_buffer_refill),
            ("timing.t_ramp_s", self.t_ramp),
            ("timing.t_move_s", self.t_move),
        ];
        for (key, v) in fields {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(EngineError::Config { key, reason: format!("must be a finite nonnegative duration, got {v}") });
            }
        }
        Ok(())
    }
}

/// What happens to an atom whose transport fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportFailure {
    #[default]
    Lose,
    Stay,
}

/// Fully resolved simulation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub layout: ArrayLayout,
    pub loss: LossModel,
    pub transport: TransportModel,
    pub extraction: ExtractionModel,
    pub timing: TimingModel,
    /// Mean of the Poisson-distributed initial reservoir population.
    pub reservoir_mean: f64,
    /// Continuous reservoir reloading, atoms/s.
    pub refill_rate: f64,
    pub transport_failure: TransportFailure,
    pub planner_strategy: PlannerStrategy,
    /// Translation speed for distance-proportional move durations, µm/s.
    pub transport_speed: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            layout: hex_six_layout(),
            loss: LossModel::default(),
            transport: TransportModel::default(),
            extraction: ExtractionModel::default(),
            timing: TimingModel::default(),
            reservoir_mean: 80.0,
            refill_rate: 0.0,
            transport_failure: TransportFailure::Lose,
            planner_strategy: PlannerStrategy::GlobalGreedy,
            transport_speed: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        self.timing.validate()?;
        LossModel::new(self.loss.lifetime_array, self.loss.lifetime_reservoir)?;
        TransportModel::new(self.transport.p_success, self.transport.t_ramp, self.transport.t_move)?;
        ExtractionModel::new(self.extraction.p_blockade, self.extraction.mean_ensemble_at_full, self.extraction.n_reference)?;
        if !(self.reservoir_mean >= 0.0 && self.reservoir_mean.is_finite()) {
            return Err(EngineError::Config {
                key: "stochastic.reservoir_mean",
                reason: format!("must be finite and nonnegative, got {}", self.reservoir_mean),
            });
        }
        if !(self.refill_rate >= 0.0 && self.refill_rate.is_finite()) {
            return Err(EngineError::Config {
                key: "stochastic.refill_rate",
                reason: format!("must be finite and nonnegative, got {}", self.refill_rate),
            });
        }
        if let Some(v) = self.transport_speed {
            if !(v > 0.0 && v.is_finite()) {
                return Err(EngineError::Config { key: "planner.transport_speed_um_per_s", reason: format!("must be positive, got {v}") });
            }
        }
        if self.layout.count_role(Role::Target) == 0 {
            return Err(EngineError::Config { key: "layout", reason: "no target sites".into() });
        }
        Ok(())
    }

    pub fn planner(&self) -> Planner<f64> {
        Planner::new(
            self.planner_strategy,
            MoveTiming { t_ramp: self.transport.t_ramp, t_move: self.transport.t_move, speed: self.transport_speed },
        )
    }
}

/// Cumulative atom bookkeeping, by cause.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LossCounters {
    /// Atoms removed from the reservoir by extraction attempts.
    pub extracted: u64,
    /// Single atoms placed in buffer traps.
    pub delivered: u64,
    /// Extracted atoms not delivered (blockade, or collision with a resident atom).
    pub blockade: u64,
    pub transport: u64,
    pub array_decay: u64,
    pub reservoir_decay: u64,
    /// Atoms added by continuous reservoir reloading.
    pub reservoir_added: u64,
}

impl LossCounters {
    pub fn total_lost(&self) -> u64 {
        self.blockade + self.transport + self.array_decay + self.reservoir_decay
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub truth: Occupancy,
    pub belief: Occupancy,
    pub reservoir: ReservoirState,
    /// Seconds since the start of the sequence.
    pub clock: f64,
    /// Number of completed cycles.
    pub cycle_index: u32,
    pub counters: LossCounters,
    pub initial_reservoir: u64,
}

impl SystemState {
    pub fn trapped(&self) -> u64 {
        self.truth.count_occupied() as u64
    }

    /// reservoir + trapped + lost equals the initial load plus reloads.
    pub fn is_conserved(&self) -> bool {
        self.reservoir.n_atoms + self.trapped() + self.counters.total_lost()
            == self.initial_reservoir + self.counters.reservoir_added
    }
}

/// Snapshot taken by an imaging step.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub occupancy: Occupancy,
    pub n_reservoir: u64,
    /// Clock when the image was started.
    pub clock: f64,
}

/// Observables of one cycle, taken from the image that opens it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    /// 1-based.
    pub cycle_index: u32,
    pub target_complete: bool,
    pub n_buffer_filled: u32,
    pub n_target_filled: u32,
    pub n_reservoir: u64,
    pub clock_at_image: f64,
    /// Buffer traps holding an atom right after this cycle's refill window.
    pub n_buffer_loaded: u32,
    /// Atoms delivered into buffers during this cycle's refill window.
    pub n_delivered: u32,
    pub n_fill_moves: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Init,
    Image,
    FillMove,
    Fill,
    RefillMove,
    Refill,
}

impl Step {
    pub fn as_str(self) -> &'static str {
        match self {
            Step::Init => "init",
            Step::Image => "image",
            Step::FillMove => "fill_move",
            Step::Fill => "fill",
            Step::RefillMove => "refill_move",
            Step::Refill => "refill",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveOutcome {
    /// Atom arrived at the destination.
    Delivered,
    /// Transport failed and the atom was lost.
    Lost,
    /// Transport failed and the atom stayed at its source.
    Stayed,
    /// Source was believed occupied but held no atom.
    Null,
    /// Extraction produced no single atom.
    Empty,
    /// Extracted atom met an atom already in the buffer trap; both were
    /// reduced to the resident one.
    Collided,
}

impl MoveOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            MoveOutcome::Delivered => "delivered",
            MoveOutcome::Lost => "lost",
            MoveOutcome::Stayed => "stayed",
            MoveOutcome::Null => "null",
            MoveOutcome::Empty => "empty",
            MoveOutcome::Collided => "collided",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoveEvent {
    pub src: MoveSource,
    pub dst: SiteId,
    pub dist_um: f64,
    pub duration_s: f64,
    pub outcome: MoveOutcome,
    /// Atoms taken from the reservoir (refill moves only).
    pub removed: u64,
}

/// One row of the event log.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub replica: u64,
    /// Cycle being executed; 0 for initialization.
    pub cycle: u32,
    pub step: Step,
    /// Position of the row within its step.
    pub seq: u32,
    pub clock: f64,
    pub reservoir: u64,
    pub truth: String,
    pub belief: String,
    pub mv: Option<MoveEvent>,
}

/// One replica of the sequence: its RNG stream and optional event log.
pub struct Engine<'a> {
    config: &'a SimConfig,
    planner: Planner<f64>,
    rng: RngStream,
    replica: u64,
    events: Option<Vec<Event>>,
}

impl<'a> Engine<'a> {
    pub fn new(config: &'a SimConfig, master_seed: u64, replica: u64) -> Self {
        Self { config, planner: config.planner(), rng: RngStream::new(master_seed, replica), replica, events: None }
    }

    pub fn with_events(mut self) -> Self {
        self.events = Some(Vec::new());
        self
    }

    pub fn take_events(&mut self) -> Vec<Event> {
        self.events.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Reservoir loaded with a Poisson-distributed population, empty array,
    /// clock at the end of MOT, molasses and reservoir transfer.
    pub fn init_sequence(&mut self) -> SystemState {
        let n0 = if self.config.reservoir_mean > 0.0 {
            Poisson::new(self.config.reservoir_mean).expect("validated mean").sample(&mut self.rng) as u64
        } else {
            0
        };
        let state = SystemState {
            truth: Occupancy::empty_for(&self.config.layout),
            belief: Occupancy::empty_for(&self.config.layout),
            reservoir: ReservoirState::with_refill(n0, self.config.refill_rate),
            clock: self.config.timing.preparation(),
            cycle_index: 0,
            counters: LossCounters::default(),
            initial_reservoir: n0,
        };
        self.log(&state, Step::Init, 0, None);
        state
    }

    /// Fluorescence image: losses over the imaging window, then belief := truth.
    pub fn step_image(&mut self, state: &mut SystemState) -> Result<Observation, EngineError> {
        let started = state.clock;
        let t = &self.config.timing;
        self.decay(state, t.t_image_loss)?;
        state.clock += t.t_image;
        state.belief = state.truth.clone();
        self.log(state, Step::Image, 0, None);
        Ok(Observation { occupancy: state.truth.clone(), n_reservoir: state.reservoir.n_atoms, clock: started })
    }

    /// Executes a target-fill plan made against `state.belief`.
    pub fn step_fill_targets(&mut self, state: &mut SystemState, plan: &MovePlan) -> Result<(), EngineError> {
        let layout = &self.config.layout;
        for (seq, m) in plan.moves.iter().enumerate() {
            let MoveSource::Site(src_id) = m.src else {
                return Err(EngineError::ReservoirSourceInFillPlan);
            };
            let src = layout.index_of(src_id).ok_or(EngineError::UnknownSite(src_id))?;
            let dst = layout.index_of(m.dst).ok_or(EngineError::UnknownSite(m.dst))?;
            if !state.belief.is_occupied(src) {
                return Err(EngineError::SourceNotBelievedOccupied(src_id));
            }
            if state.belief.is_occupied(dst) {
                return Err(EngineError::DestinationNotBelievedEmpty(m.dst));
            }

            let outcome = if state.truth.is_occupied(src) {
                state.truth.set(src, SiteState::Empty);
                if sample_transport(&mut self.rng, &self.config.transport) {
                    if state.truth.is_occupied(dst) {
                        return Err(EngineError::DoubleOccupancy(m.dst));
                    }
                    state.truth.set(dst, SiteState::Occupied);
                    MoveOutcome::Delivered
                } else {
                    match self.config.transport_failure {
                        TransportFailure::Lose => {
                            state.counters.transport += 1;
                            MoveOutcome::Lost
                        }
                        TransportFailure::Stay => {
                            state.truth.set(src, SiteState::Occupied);
                            MoveOutcome::Stayed
                        }
                    }
                }
            } else {
                MoveOutcome::Null
            };
            state.belief.set(src, SiteState::Empty);
            state.belief.set(dst, SiteState::Occupied);

            let ev = MoveEvent { src: m.src, dst: m.dst, dist_um: m.dist, duration_s: m.duration, outcome, removed: 0 };
            self.log(state, Step::FillMove, seq as u32, Some(ev));
        }
        let window = self.config.timing.t_analysis_fill;
        self.decay(state, window)?;
        state.clock += window;
        self.log(state, Step::Fill, plan.len() as u32, None);
        Ok(())
    }

    /// One extraction per listed buffer. Delivered atoms are real but stay
    /// believed-empty until the next image. Returns the number delivered.
    pub fn step_refill_buffers(&mut self, state: &mut SystemState, refill: &[SiteId]) -> Result<u32, EngineError> {
        let layout = &self.config.layout;
        let mut delivered = 0;
        for (seq, &id) in refill.iter().enumerate() {
            let idx = layout.index_of(id).ok_or(EngineError::UnknownSite(id))?;
            if state.belief.is_occupied(idx) {
                return Err(EngineError::DestinationNotBelievedEmpty(id));
            }
            let resident = state.truth.is_occupied(idx);
            if resident && self.config.transport_failure == TransportFailure::Lose {
                // Believed-empty buffers are truly empty unless failed
                // transports leave atoms behind.
                return Err(EngineError::DoubleOccupancy(id));
            }
            let ex = sample_extraction(&mut self.rng, &mut state.reservoir, &self.config.extraction);
            state.counters.extracted += ex.removed;
            let outcome = match (ex.delivered, resident) {
                (true, false) => {
                    state.truth.set(idx, SiteState::Occupied);
                    state.counters.delivered += 1;
                    state.counters.blockade += ex.removed - 1;
                    delivered += 1;
                    MoveOutcome::Delivered
                }
                (true, true) => {
                    state.counters.blockade += ex.removed;
                    MoveOutcome::Collided
                }
                (false, _) => {
                    state.counters.blockade += ex.removed;
                    MoveOutcome::Empty
                }
            };
            if self.events.is_some() {
                let dist = crate::geometry::distance(layout.reservoir_pos(), layout.sites()[idx].pos);
                let ev = MoveEvent {
                    src: MoveSource::Reservoir,
                    dst: id,
                    dist_um: dist,
                    duration_s: self.planner.timing.duration(dist),
                    outcome,
                    removed: ex.removed,
                };
                self.log(state, Step::RefillMove, seq as u32, Some(ev));
            }
        }
        let window = self.config.timing.t_buffer_refill;
        self.decay(state, window)?;
        state.clock += window;
        self.log(state, Step::Refill, refill.len() as u32, None);
        Ok(delivered)
    }

    /// Image, fill targets, refill buffers. The record holds the observables
    /// of the opening image.
    pub fn run_cycle(&mut self, state: &mut SystemState) -> Result<CycleRecord, EngineError> {
        let layout = &self.config.layout;
        let obs = self.step_image(state)?;
        let n_target = obs.occupancy.count_role(layout, Role::Target);

        let plan = self.planner.plan_target_fill(&state.belief, layout)?;
        self.step_fill_targets(state, &plan)?;
        let refill = self.planner.plan_buffer_refill(&state.belief, layout)?;
        let n_delivered = self.step_refill_buffers(state, &refill)?;

        state.cycle_index += 1;
        Ok(CycleRecord {
            cycle_index: state.cycle_index,
            target_complete: n_target == layout.count_role(Role::Target),
            n_buffer_filled: obs.occupancy.count_role(layout, Role::Buffer) as u32,
            n_target_filled: n_target as u32,
            n_reservoir: obs.n_reservoir,
            clock_at_image: obs.clock,
            n_buffer_loaded: state.truth.count_role(layout, Role::Buffer) as u32,
            n_delivered,
            n_fill_moves: plan.len() as u32,
        })
    }

    /// One-body loss over `dt` for every trapped atom and the reservoir.
    fn decay(&mut self, state: &mut SystemState, dt: f64) -> Result<(), EngineError> {
        let loss = &self.config.loss;
        if loss.lifetime_array.is_finite() {
            for i in 0..state.truth.len() {
                if state.truth.is_occupied(i) && !sample_survival(&mut self.rng, dt, loss.lifetime_array)? {
                    state.truth.set(i, SiteState::Empty);
                    state.counters.array_decay += 1;
                }
            }
        }
        let out = reservoir_decay(&mut self.rng, &mut state.reservoir, dt, loss)?;
        state.counters.reservoir_decay += out.lost;
        state.counters.reservoir_added += out.added;
        Ok(())
    }

    fn log(&mut self, state: &SystemState, step: Step, seq: u32, mv: Option<MoveEvent>) {
        if let Some(events) = self.events.as_mut() {
            events.push(Event {
                replica: self.replica,
                cycle: state.cycle_index + u32::from(step != Step::Init),
                step,
                seq,
                clock: state.clock,
                reservoir: state.reservoir.n_atoms,
                truth: state.truth.to_string(),
                belief: state.belief.to_string(),
                mv,
            });
        }
    }
}

/// Records and (optionally) events of one replica.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub records: Vec<CycleRecord>,
    pub events: Vec<Event>,
    pub final_state: SystemState,
}

/// Initializes and runs `n_cycles` cycles of replica `replica`.
pub fn run_realization(
    config: &SimConfig,
    master_seed: u64,
    replica: u64,
    n_cycles: u32,
    log_events: bool,
) -> Result<Realization, EngineError> {
    if n_cycles == 0 {
        return Err(EngineError::Config { key: "experiment.n_cycles", reason: "must be at least 1".into() });
    }
    let mut engine = Engine::new(config, master_seed, replica);
    if log_events {
        engine = engine.with_events();
    }
    let mut state = engine.init_sequence();
    let records = (0..n_cycles).map(|_| engine.run_cycle(&mut state)).collect::<Result<Vec<_>, _>>()?;
    Ok(Realization { records, events: engine.take_events(), final_state: state })
}
