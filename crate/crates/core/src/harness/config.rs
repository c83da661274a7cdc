//! Experiment config file.
//!
//! TOML with five sections, every key optional:
//!
//! ```toml
//! [experiment]
//! n_replicas = 2500
//! n_cycles = 15
//! master_seed = 1
//! success_definition = "first-achievement"   # or "maintained"
//! ci_method = "normal"                       # or "wilson"
//! transport_failure = "lose"                 # or "stay"
//!
//! [layout]
//! preset = "hex-six"                       # or give `sites` inline
//!
//! [stochastic]
//! lifetime_array_s = 10.0
//! # ...
//!
//! [timing]
//! t_image_s = 0.130
//! # ...
//!
//! [planner]
//! strategy = "global-greedy"                 # or "per-vacancy"
//! ```
//!
//! Unknown keys are rejected. An inline layout replaces the preset:
//!
//! ```toml
//! [layout]
//! base_pitch_um = 7.9
//! pitch_doubling = true
//! reservoir = { x = -56.8, y = 0.0 }
//! scan_range_um = 250.0
//! sites = [
//!   { id = 0, x = 0.0, y = 0.0, role = "buffer" },
//!   { id = 1, x = 31.6, y = 0.0, role = "target" },
//! ]
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stats::{CiMethod, SuccessDefinition};
use super::HarnessError;
use crate::engine::{SimConfig, TimingModel, TransportFailure};
use crate::geometry::{self, Position, Role, SiteId, TrapSite, HEX_SIX_PRESET};
use crate::planner::PlannerStrategy;
use crate::stochastic::{ExtractionModel, LossModel, TransportModel};
use crate::ArrayLayout;

/// Config file contents, with every omitted key filled by its default.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub layout: LayoutSection,
    pub stochastic: StochasticSection,
    pub timing: TimingSection,
    pub planner: PlannerSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    /// More than 2500 repetitions back the measured curves.
    pub n_replicas: u64,
    pub n_cycles: u32,
    pub master_seed: u64,
    pub success_definition: SuccessDefinition,
    pub ci_method: CiMethod,
    pub transport_failure: TransportFailure,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            n_replicas: 2500,
            n_cycles: 15,
            master_seed: 1,
            success_definition: SuccessDefinition::FirstAchievement,
            ci_method: CiMethod::Normal,
            transport_failure: TransportFailure::Lose,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteEntry {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub role: Role,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointEntry {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutSection {
    pub preset: Option<String>,
    pub sites: Option<Vec<SiteEntry>>,
    pub reservoir: Option<PointEntry>,
    pub base_pitch_um: f64,
    pub pitch_doubling: bool,
    pub scan_range_um: f64,
    /// Inert, copied into the run metadata.
    pub metadata: BTreeMap<String, String>,
}

impl Default for LayoutSection {
    fn default() -> Self {
        Self {
            preset: None,
            sites: None,
            reservoir: None,
            base_pitch_um: geometry::MLA_PITCH_UM,
            pitch_doubling: true,
            scan_range_um: geometry::SCAN_RANGE_UM,
            metadata: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StochasticSection {
    /// Tweezer-array lifetime, 10.0(5) s.
    pub lifetime_array_s: f64,
    /// Unperturbed reservoir lifetime, 5(1) s. Reservoir two-body loss is
    /// not modeled separately.
    pub lifetime_reservoir_s: f64,
    /// Buffer-to-target transport efficiency, 75.3(9) %.
    pub p_transport: f64,
    /// Single-atom buffer loading from a well-filled reservoir, 59.6(4) %.
    pub p_blockade_plateau: f64,
    /// Overrides the value derived from `p_blockade_plateau` when set.
    pub p_blockade: Option<f64>,
    /// Mean ensemble size per extraction from a full reservoir. Fit it to a
    /// delivered-atom budget with `calibrate`.
    pub mean_ensemble_at_full: f64,
    pub n_reference: f64,
    /// Initial reservoir population mean, ~80 atoms.
    pub reservoir_mean: f64,
    /// Continuous reservoir reloading, atoms/s; off by default.
    pub refill_rate: f64,
}

impl Default for StochasticSection {
    fn default() -> Self {
        Self {
            lifetime_array_s: 10.0,
            lifetime_reservoir_s: 5.0,
            p_transport: 0.753,
            p_blockade_plateau: 0.596,
            p_blockade: None,
            mean_ensemble_at_full: 8.0,
            n_reference: 80.0,
            reservoir_mean: 80.0,
            refill_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingSection {
    /// MOT loading, 1.8 s.
    pub t_mot_s: f64,
    /// Molasses, 40 ms.
    pub t_molasses_s: f64,
    /// Molasses-to-reservoir overlap, 20 ms.
    pub t_reservoir_transfer_s: f64,
    /// Image acquisition and readout, 130 ms.
    pub t_image_s: f64,
    /// Loss window during imaging; defaults to `t_image_s`.
    pub t_image_loss_s: Option<f64>,
    /// Occupation analysis and target filling, 65 ms.
    pub t_analysis_fill_s: f64,
    /// Buffer refilling, 35 ms.
    pub t_buffer_refill_s: f64,
    /// One transport intensity ramp, 130 µs.
    pub t_ramp_s: f64,
    /// Transport translation, 310 µs.
    pub t_move_s: f64,
}

impl Default for TimingSection {
    fn default() -> Self {
        let t = TimingModel::default();
        Self {
            t_mot_s: t.t_mot,
            t_molasses_s: t.t_molasses,
            t_reservoir_transfer_s: t.t_reservoir_transfer,
            t_image_s: t.t_image,
            t_image_loss_s: None,
            t_analysis_fill_s: t.t_analysis_fill,
            t_buffer_refill_s: t.t_buffer_refill,
            t_ramp_s: t.t_ramp,
            t_move_s: t.t_move,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerSection {
    pub strategy: PlannerStrategy,
    /// When set, move durations scale with distance at this speed (µm/s).
    pub transport_speed_um_per_s: Option<f64>,
}

/// Validated experiment ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedExperiment {
    pub sim: SimConfig,
    pub n_replicas: u64,
    pub n_cycles: u32,
    pub master_seed: u64,
    pub success_definition: SuccessDefinition,
    pub ci_method: CiMethod,
    /// Plateau used to derive `p_blockade`; `None` when it was fixed directly.
    pub blockade_plateau: Option<f64>,
}

impl ResolvedExperiment {
    /// Same experiment with a different mean ensemble size.
    pub fn with_mean_ensemble(&self, mean_ensemble_at_full: f64) -> Result<Self, HarnessError> {
        let mut out = self.clone();
        let n_ref = self.sim.extraction.n_reference;
        out.sim.extraction = match self.blockade_plateau {
            Some(plateau) => ExtractionModel::from_plateau(plateau, mean_ensemble_at_full, n_ref),
            None => ExtractionModel::new(self.sim.extraction.p_blockade, mean_ensemble_at_full, n_ref),
        }
        .map_err(|e| HarnessError::config("stochastic.mean_ensemble_at_full", e.to_string()))?;
        Ok(out)
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Parse { path: None, message: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
        toml::from_str(&text).map_err(|e| HarnessError::Parse { path: Some(path.to_path_buf()), message: e.to_string() })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every value and builds the simulation config. Errors name the
    /// offending key.
    pub fn resolve(&self) -> Result<ResolvedExperiment, HarnessError> {
        let e = &self.experiment;
        if e.n_replicas == 0 {
            return Err(HarnessError::config("experiment.n_replicas", "must be at least 1"));
        }
        if e.n_cycles == 0 {
            return Err(HarnessError::config("experiment.n_cycles", "must be at least 1"));
        }

        let s = &self.stochastic;
        let positive = |key: &'static str, v: f64| {
            if v > 0.0 && !v.is_nan() {
                Ok(v)
            } else {
                Err(HarnessError::config(key, format!("must be positive, got {v}")))
            }
        };
        let probability = |key: &'static str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(v)
            } else {
                Err(HarnessError::config(key, format!("must be a probability in [0, 1], got {v}")))
            }
        };
        let finite_nonneg = |key: &'static str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(HarnessError::config(key, format!("must be finite and nonnegative, got {v}")))
            }
        };

        let loss = LossModel {
            lifetime_array: positive("stochastic.lifetime_array_s", s.lifetime_array_s)?,
            lifetime_reservoir: positive("stochastic.lifetime_reservoir_s", s.lifetime_reservoir_s)?,
        };

        let t = &self.timing;
        let timing = TimingModel {
            t_mot: finite_nonneg("timing.t_mot_s", t.t_mot_s)?,
            t_molasses: finite_nonneg("timing.t_molasses_s", t.t_molasses_s)?,
            t_reservoir_transfer: finite_nonneg("timing.t_reservoir_transfer_s", t.t_reservoir_transfer_s)?,
            t_image: finite_nonneg("timing.t_image_s", t.t_image_s)?,
            t_image_loss: finite_nonneg("timing.t_image_loss_s", t.t_image_loss_s.unwrap_or(t.t_image_s))?,
            t_analysis_fill: finite_nonneg("timing.t_analysis_fill_s", t.t_analysis_fill_s)?,
            t_buffer_refill: finite_nonneg("timing.t_buffer_refill_s", t.t_buffer_refill_s)?,
            t_ramp: finite_nonneg("timing.t_ramp_s", t.t_ramp_s)?,
            t_move: finite_nonneg("timing.t_move_s", t.t_move_s)?,
        };

        let transport = TransportModel {
            p_success: probability("stochastic.p_transport", s.p_transport)?,
            t_ramp: timing.t_ramp,
            t_move: timing.t_move,
        };

        let mean_full = s.mean_ensemble_at_full;
        if !(mean_full > 0.0 && mean_full.is_finite()) {
            return Err(HarnessError::config("stochastic.mean_ensemble_at_full", format!("must be positive and finite, got {mean_full}")));
        }
        let n_ref = s.n_reference;
        if !(n_ref > 0.0 && n_ref.is_finite()) {
            return Err(HarnessError::config("stochastic.n_reference", format!("must be positive and finite, got {n_ref}")));
        }
        let (extraction, blockade_plateau) = match s.p_blockade {
            Some(p) => {
                let p = probability("stochastic.p_blockade", p)?;
                (ExtractionModel { p_blockade: p, mean_ensemble_at_full: mean_full, n_reference: n_ref }, None)
            }
            None => {
                let plateau = probability("stochastic.p_blockade_plateau", s.p_blockade_plateau)?;
                let model = ExtractionModel::from_plateau(plateau, mean_full, n_ref)
                    .map_err(|err| HarnessError::config("stochastic.p_blockade_plateau", err.to_string()))?;
                (model, Some(plateau))
            }
        };

        if let Some(v) = self.planner.transport_speed_um_per_s {
            positive("planner.transport_speed_um_per_s", v)?;
        }

        let sim = SimConfig {
            layout: self.build_layout()?,
            loss,
            transport,
            extraction,
            timing,
            reservoir_mean: finite_nonneg("stochastic.reservoir_mean", s.reservoir_mean)?,
            refill_rate: finite_nonneg("stochastic.refill_rate", s.refill_rate)?,
            transport_failure: e.transport_failure,
            planner_strategy: self.planner.strategy,
            transport_speed: self.planner.transport_speed_um_per_s,
        };
        sim.validate()?;

        Ok(ResolvedExperiment {
            sim,
            n_replicas: e.n_replicas,
            n_cycles: e.n_cycles,
            master_seed: e.master_seed,
            success_definition: e.success_definition,
            ci_method: e.ci_method,
            blockade_plateau,
        })
    }

    fn build_layout(&self) -> Result<ArrayLayout, HarnessError> {
        let l = &self.layout;
        match (&l.preset, &l.sites) {
            (Some(_), Some(_)) => Err(HarnessError::config("layout", "give either `preset` or inline `sites`, not both")),
            (Some(name), None) => ArrayLayout::preset(name)
                .ok_or_else(|| HarnessError::config("layout.preset", format!("unknown preset {name:?}; known: {HEX_SIX_PRESET}"))),
            (None, None) => Ok(geometry::hex_six_layout()),
            (None, Some(sites)) => {
                let reservoir = l.reservoir.ok_or_else(|| HarnessError::config("layout.reservoir", "required with inline sites"))?;
                let sites = sites
                    .iter()
                    .map(|s| TrapSite { id: SiteId(s.id), pos: Position::new(s.x, s.y), role: s.role })
                    .collect();
                ArrayLayout::new(
                    sites,
                    l.base_pitch_um,
                    l.pitch_doubling,
                    Position::new(reservoir.x, reservoir.y),
                    l.scan_range_um,
                    l.metadata.clone(),
                )
                .map_err(|e| HarnessError::config("layout", e.to_string()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        let r = cfg.resolve().unwrap();
        assert_eq!(r.n_replicas, 2500);
        assert_eq!(r.n_cycles, 15);
        assert_eq!(r.sim.layout.len(), 13);
        assert!((r.sim.extraction.delivery_probability(80) - 0.596).abs() < 1e-12);
        assert_eq!(r.blockade_plateau, Some(0.596));
        assert!((r.sim.timing.cycle() - 0.230).abs() < 1e-12);
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = ExperimentConfig::default();
        cfg.stochastic.lifetime_array_s = f64::INFINITY;
        cfg.layout.preset = Some(HEX_SIX_PRESET.into());
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml_str("[stochastic]\np_transprot = 0.5\n").unwrap_err();
        assert!(err.to_string().contains("p_transprot"), "{err}");
    }

    #[test]
    fn errors_name_the_key() {
        let cases = [
            ("[stochastic]\np_transport = 1.5", "stochastic.p_transport"),
            ("[stochastic]\nlifetime_array_s = 0.0", "stochastic.lifetime_array_s"),
            ("[experiment]\nn_replicas = 0", "experiment.n_replicas"),
            ("[experiment]\nn_cycles = 0", "experiment.n_cycles"),
            ("[timing]\nt_image_s = -1.0", "timing.t_image_s"),
            ("[layout]\npreset = \"square\"", "layout.preset"),
            ("[stochastic]\nreservoir_mean = -3.0", "stochastic.reservoir_mean"),
            ("[stochastic]\nmean_ensemble_at_full = 0.0", "stochastic.mean_ensemble_at_full"),
            ("[stochastic]\np_blockade_plateau = 0.99\nmean_ensemble_at_full = 1.0", "stochastic.p_blockade_plateau"),
        ];
        for (text, key) in cases {
            let err = ExperimentConfig::from_toml_str(text).unwrap().resolve().unwrap_err().to_string();
            assert!(err.contains(key), "{text}: {err}");
        }
    }

    #[test]
    fn inline_layout() {
        let text = r#"
[layout]
base_pitch_um = 10.0
pitch_doubling = false
reservoir = { x = -30.0, y = 0.0 }
sites = [
  { id = 0, x = 0.0, y = 0.0, role = "buffer" },
  { id = 1, x = 10.0, y = 0.0, role = "buffer" },
  { id = 5, x = 30.0, y = 0.0, role = "target" },
]
[layout.metadata]
note = "square test"
"#;
        let r = ExperimentConfig::from_toml_str(text).unwrap().resolve().unwrap();
        assert_eq!(r.sim.layout.len(), 3);
        assert_eq!(r.sim.layout.count_role(Role::Target), 1);
        assert_eq!(r.sim.layout.metadata()["note"], "square test");

        let missing = "[layout]\nsites = [{ id = 0, x = 0.0, y = 0.0, role = \"target\" }]\n";
        let err = ExperimentConfig::from_toml_str(missing).unwrap().resolve().unwrap_err().to_string();
        assert!(err.contains("layout.reservoir"), "{err}");
    }

    #[test]
    fn fixed_blockade_probability() {
        let r = ExperimentConfig::from_toml_str("[stochastic]\np_blockade = 1.0\nmean_ensemble_at_full = 40.0")
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(r.sim.extraction.p_blockade, 1.0);
        assert_eq!(r.blockade_plateau, None);
        let r2 = r.with_mean_ensemble(10.0).unwrap();
        assert_eq!(r2.sim.extraction.p_blockade, 1.0);
        assert_eq!(r2.sim.extraction.mean_ensemble_at_full, 10.0);
    }

    #[test]
    fn image_loss_window_defaults_to_image_time() {
        let r = ExperimentConfig::from_toml_str("[timing]\nt_image_s = 0.2").unwrap().resolve().unwrap();
        assert_eq!(r.sim.timing.t_image_loss, 0.2);
        let r = ExperimentConfig::from_toml_str("[timing]\nt_image_loss_s = 0.1").unwrap().resolve().unwrap();
        assert_eq!(r.sim.timing.t_image_loss, 0.1);
        assert_eq!(r.sim.timing.t_image, 0.130);
    }
}
