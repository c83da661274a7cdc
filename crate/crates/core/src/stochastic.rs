//! Random processes: one-body survival, transport success, extraction of
//! single atoms from the reservoir under collisional blockade, and reservoir
//! decay.
//!
//! Every draw goes through an [`RngStream`], a ChaCha8 generator keyed by the
//! master seed and switched to the replica's own stream. Streams for
//! different replicas never overlap and adding replicas does not change the
//! draws of existing ones.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, PartialEq)]
pub enum StochasticError {
    #[error("elapsed time must be nonnegative, got {0}")]
    NegativeDuration(f64),
    #[error("lifetime must be positive, got {0}")]
    BadLifetime(f64),
    #[error("{name} must be a probability in [0, 1], got {value}")]
    BadProbability { name: &'static str, value: f64 },
    #[error("{name} is out of range: {value}")]
    BadParameter { name: &'static str, value: f64 },
}

/// Deterministic random stream for one replica.
#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

impl RngStream {
    /// Stream `replica` of the generator keyed by `master_seed`.
    ///
    /// The key is `seed_from_u64(master_seed)`; the replica index selects the
    /// ChaCha stream, so every replica reads a disjoint keystream.
    pub fn new(master_seed: u64, replica: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
        inner.set_stream(replica);
        Self { inner }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// One-body lifetimes, s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossModel {
    pub lifetime_array: f64,
    pub lifetime_reservoir: f64,
}

impl LossModel {
    pub fn new(lifetime_array: f64, lifetime_reservoir: f64) -> Result<Self, StochasticError> {
        check_lifetime(lifetime_array)?;
        check_lifetime(lifetime_reservoir)?;
        Ok(Self { lifetime_array, lifetime_reservoir })
    }
}

impl Default for LossModel {
    fn default() -> Self {
        Self { lifetime_array: 10.0, lifetime_reservoir: 5.0 }
    }
}

/// Transport tweezer success probability and timings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportModel {
    pub p_success: f64,
    /// One intensity ramp, s.
    pub t_ramp: f64,
    /// Translation, s.
    pub t_move: f64,
}

impl TransportModel {
    pub fn new(p_success: f64, t_ramp: f64, t_move: f64) -> Result<Self, StochasticError> {
        check_probability("p_transport", p_success)?;
        check_nonneg("t_ramp", t_ramp)?;
        check_nonneg("t_move", t_move)?;
        Ok(Self { p_success, t_ramp, t_move })
    }

    /// Ramp up, translate, ramp down.
    pub fn move_duration(&self) -> f64 {
        2.0 * self.t_ramp + self.t_move
    }
}

impl Default for TransportModel {
    fn default() -> Self {
        Self { p_success: 0.753, t_ramp: 130e-6, t_move: 310e-6 }
    }
}

/// Extraction of a small ensemble from the reservoir followed by collisional
/// blockade in the transport tweezer.
///
/// The ensemble size is Poisson with mean
/// `mean_ensemble_at_full · min(1, n / n_reference)`, capped at the reservoir
/// population. A nonempty ensemble yields one atom with probability
/// `p_blockade`; all other extracted atoms are lost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionModel {
    pub p_blockade: f64,
    pub mean_ensemble_at_full: f64,
    pub n_reference: f64,
}

impl ExtractionModel {
    pub fn new(p_blockade: f64, mean_ensemble_at_full: f64, n_reference: f64) -> Result<Self, StochasticError> {
        check_probability("p_blockade", p_blockade)?;
        check_positive("mean_ensemble_at_full", mean_ensemble_at_full)?;
        check_positive("n_reference", n_reference)?;
        Ok(Self { p_blockade, mean_ensemble_at_full, n_reference })
    }

    /// Chooses `p_blockade` so that a full reservoir delivers a single atom
    /// with probability exactly `plateau`.
    pub fn from_plateau(plateau: f64, mean_ensemble_at_full: f64, n_reference: f64) -> Result<Self, StochasticError> {
        check_probability("p_blockade_plateau", plateau)?;
        check_positive("mean_ensemble_at_full", mean_ensemble_at_full)?;
        let p_nonempty = -(-mean_ensemble_at_full).exp_m1();
        let p_blockade = plateau / p_nonempty;
        if p_blockade > 1.0 {
            return Err(StochasticError::BadParameter {
                name: "p_blockade_plateau / (1 - exp(-mean_ensemble_at_full))",
                value: p_blockade,
            });
        }
        Self::new(p_blockade, mean_ensemble_at_full, n_reference)
    }

    /// Mean ensemble size drawn from a reservoir holding `n_atoms`.
    pub fn ensemble_mean(&self, n_atoms: u64) -> f64 {
        self.mean_ensemble_at_full * (n_atoms as f64 / self.n_reference).min(1.0)
    }

    /// Closed-form probability that one extraction delivers an atom.
    pub fn delivery_probability(&self, n_atoms: u64) -> f64 {
        if n_atoms == 0 {
            return 0.0;
        }
        self.p_blockade * -(-self.ensemble_mean(n_atoms)).exp_m1()
    }
}

impl Default for ExtractionModel {
    fn default() -> Self {
        Self::from_plateau(0.596, 8.0, 80.0).expect("default extraction model is valid")
    }
}

/// Reservoir population and optional continuous reloading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReservoirState {
    pub n_atoms: u64,
    /// Atoms per second; zero disables reloading.
    pub refill_rate: f64,
}

impl ReservoirState {
    pub fn new(n_atoms: u64) -> Self {
        Self { n_atoms, refill_rate: 0.0 }
    }

    pub fn with_refill(n_atoms: u64, refill_rate: f64) -> Self {
        Self { n_atoms, refill_rate }
    }
}

/// Outcome of one extraction attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Extraction {
    pub removed: u64,
    pub delivered: bool,
}

/// Atoms lost to decay and added by reloading over one interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DecayOutcome {
    pub lost: u64,
    pub added: u64,
}

/// `exp(-dt / lifetime)`. An infinite lifetime never loses atoms.
pub fn survival_probability<T: Real>(dt: T, lifetime: T) -> Result<T, StochasticError> {
    if dt.is_nan() || dt < T::zero() {
        return Err(StochasticError::NegativeDuration(dt.to_f64().unwrap_or(f64::NAN)));
    }
    if lifetime.is_nan() || lifetime <= T::zero() {
        return Err(StochasticError::BadLifetime(lifetime.to_f64().unwrap_or(f64::NAN)));
    }
    if lifetime.is_infinite() {
        return Ok(T::one());
    }
    Ok((-dt / lifetime).exp())
}

pub fn sample_survival(rng: &mut RngStream, dt: f64, lifetime: f64) -> Result<bool, StochasticError> {
    let p = survival_probability(dt, lifetime)?;
    Ok(rng.random_bool(p))
}

pub fn sample_transport(rng: &mut RngStream, model: &TransportModel) -> bool {
    rng.random_bool(model.p_success)
}

/// Extracts an ensemble from `reservoir` and applies collisional blockade.
/// The reservoir loses every extracted atom, whether or not one is delivered.
pub fn sample_extraction(rng: &mut RngStream, reservoir: &mut ReservoirState, model: &ExtractionModel) -> Extraction {
    let n = reservoir.n_atoms;
    let lambda = model.ensemble_mean(n);
    if n == 0 || lambda <= 0.0 {
        return Extraction { removed: 0, delivered: false };
    }
    let k = Poisson::new(lambda).expect("positive finite ensemble mean").sample(rng);
    let k = (k as u64).min(n);
    reservoir.n_atoms -= k;
    let delivered = k >= 1 && rng.random_bool(model.p_blockade);
    Extraction { removed: k, delivered }
}

/// Binomial thinning of the reservoir over `dt`, followed by reloading at the
/// configured rate (the fractional part is rounded stochastically).
pub fn reservoir_decay(
    rng: &mut RngStream,
    reservoir: &mut ReservoirState,
    dt: f64,
    loss: &LossModel,
) -> Result<DecayOutcome, StochasticError> {
    let p = survival_probability(dt, loss.lifetime_reservoir)?;
    let mut out = DecayOutcome::default();
    if reservoir.n_atoms > 0 && p < 1.0 {
        let survivors = Binomial::new(reservoir.n_atoms, p).expect("valid binomial").sample(rng);
        out.lost = reservoir.n_atoms - survivors;
        reservoir.n_atoms = survivors;
    }
    let rate = reservoir.refill_rate;
    if rate > 0.0 && dt > 0.0 {
        let expected = rate * dt;
        let whole = expected.floor();
        let extra = rng.random_bool(expected - whole);
        out.added = whole as u64 + u64::from(extra);
        reservoir.n_atoms += out.added;
    }
    Ok(out)
}

fn check_lifetime(v: f64) -> Result<(), StochasticError> {
    if v.is_nan() || v <= 0.0 {
        Err(StochasticError::BadLifetime(v))
    } else {
        Ok(())
    }
}

fn check_probability(name: &'static str, v: f64) -> Result<(), StochasticError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(StochasticError::BadProbability { name, value: v })
    }
}

fn check_nonneg(name: &'static str, v: f64) -> Result<(), StochasticError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(StochasticError::BadParameter { name, value: v })
    }
}

fn check_positive(name: &'static str, v: f64) -> Result<(), StochasticError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(StochasticError::BadParameter { name, value: v })
    }
}
