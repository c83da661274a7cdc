//! Ensemble statistics for the per-cycle observables.

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::engine::{CycleRecord, LossCounters};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuccessDefinition {
    /// Complete target observed at any cycle up to n.
    #[default]
    FirstAchievement,
    /// Complete target observed at cycle n itself.
    Maintained,
}

/// Binomial confidence interval used for rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CiMethod {
    /// `sqrt(p(1-p)/N)`.
    #[default]
    Normal,
    /// Half the width of the 1σ Wilson score interval.
    Wilson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub rate: f64,
    /// 1σ half-width.
    pub half_width: f64,
}

/// 1σ half-width of a binomial proportion.
pub fn binomial_half_width(successes: u64, trials: u64, method: CiMethod) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    match method {
        CiMethod::Normal => (p * (1.0 - p) / n).sqrt(),
        CiMethod::Wilson => {
            // z = 1
            let denom = 1.0 + 1.0 / n;
            (p * (1.0 - p) / n + 1.0 / (4.0 * n * n)).sqrt() / denom
        }
    }
}

/// Per-cycle success rate over replicas.
///
/// All replicas must have the same number of cycles.
pub fn cumulative_success_rate<R: AsRef<[CycleRecord]>>(
    replicas: &[R],
    definition: SuccessDefinition,
    ci: CiMethod,
) -> Result<Vec<RateEstimate>, HarnessError> {
    let n_cycles = cycle_count(replicas)?;
    let mut successes = vec![0u64; n_cycles];
    for r in replicas {
        let mut achieved = false;
        for (c, rec) in r.as_ref().iter().enumerate() {
            achieved |= rec.target_complete;
            let hit = match definition {
                SuccessDefinition::FirstAchievement => achieved,
                SuccessDefinition::Maintained => rec.target_complete,
            };
            successes[c] += u64::from(hit);
        }
    }
    let n = replicas.len() as u64;
    Ok(successes
        .into_iter()
        .map(|s| RateEstimate { rate: s as f64 / n as f64, half_width: binomial_half_width(s, n, ci) })
        .collect())
}

fn cycle_count<R: AsRef<[CycleRecord]>>(replicas: &[R]) -> Result<usize, HarnessError> {
    let Some(first) = replicas.first() else {
        return Err(HarnessError::MismatchedRecords { expected: 0, replica: 0, got: 0 });
    };
    let n = first.as_ref().len();
    for (i, r) in replicas.iter().enumerate() {
        if r.as_ref().len() != n {
            return Err(HarnessError::MismatchedRecords { expected: n, replica: i, got: r.as_ref().len() });
        }
    }
    Ok(n)
}

/// Aggregated observables of one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleStats {
    /// 1-based.
    pub cycle: u32,
    pub success_rate: f64,
    pub success_ci: f64,
    /// Mean fraction of buffer traps holding an atom after the cycle's refill.
    pub buffer_fill_mean: f64,
    /// Standard error of `buffer_fill_mean`.
    pub buffer_fill_ci: f64,
    /// Mean reservoir population at the cycle's image over its value at cycle 1.
    pub reservoir_norm: f64,
    /// Standard deviation across replicas of the normalized population.
    pub reservoir_std: f64,
    /// Mean fraction of target traps occupied at the image.
    pub target_fill_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentStats {
    pub n_replicas: u64,
    pub cycles: Vec<CycleStats>,
    /// Mean initial reservoir population.
    pub initial_reservoir_mean: f64,
    /// Mean number of single atoms delivered to buffers per realization.
    pub delivered_mean: f64,
    pub delivered_std: f64,
    /// Per-cause counters averaged over replicas.
    pub mean_counters: MeanCounters,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanCounters {
    pub extracted: f64,
    pub delivered: f64,
    pub blockade: f64,
    pub transport: f64,
    pub array_decay: f64,
    pub reservoir_decay: f64,
}

/// What the aggregator needs from one replica.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaSummary {
    pub records: Vec<CycleRecord>,
    pub initial_reservoir: u64,
    pub counters: LossCounters,
}

fn mean_and_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Aggregates replicas in index order, so the result is independent of how
/// the replicas were scheduled.
pub fn aggregate(
    replicas: &[ReplicaSummary],
    n_buffers: usize,
    n_targets: usize,
    definition: SuccessDefinition,
    ci: CiMethod,
) -> Result<ExperimentStats, HarnessError> {
    let records: Vec<&[CycleRecord]> = replicas.iter().map(|r| r.records.as_slice()).collect();
    let success = cumulative_success_rate(&records, definition, ci)?;
    let n = replicas.len();
    let sqrt_n = (n as f64).sqrt();

    let first_reservoir = replicas.iter().map(|r| r.records[0].n_reservoir as f64).sum::<f64>() / n as f64;
    let norm = |v: u64| if first_reservoir > 0.0 { v as f64 / first_reservoir } else { 0.0 };

    let cycles = success
        .iter()
        .enumerate()
        .map(|(c, s)| {
            let (buffer_mean, buffer_std) =
                mean_and_std(replicas.iter().map(|r| r.records[c].n_buffer_loaded as f64 / n_buffers.max(1) as f64));
            let (reservoir_norm, reservoir_std) = mean_and_std(replicas.iter().map(|r| norm(r.records[c].n_reservoir)));
            let (target_mean, _) =
                mean_and_std(replicas.iter().map(|r| r.records[c].n_target_filled as f64 / n_targets.max(1) as f64));
            CycleStats {
                cycle: c as u32 + 1,
                success_rate: s.rate,
                success_ci: s.half_width,
                buffer_fill_mean: buffer_mean,
                buffer_fill_ci: buffer_std / sqrt_n,
                reservoir_norm,
                reservoir_std,
                target_fill_mean: target_mean,
            }
        })
        .collect();

    let (delivered_mean, delivered_std) = mean_and_std(replicas.iter().map(|r| r.counters.delivered as f64));
    let avg = |f: fn(&LossCounters) -> u64| replicas.iter().map(|r| f(&r.counters) as f64).sum::<f64>() / n as f64;
    Ok(ExperimentStats {
        n_replicas: n as u64,
        cycles,
        initial_reservoir_mean: replicas.iter().map(|r| r.initial_reservoir as f64).sum::<f64>() / n as f64,
        delivered_mean,
        delivered_std,
        mean_counters: MeanCounters {
            extracted: avg(|c| c.extracted),
            delivered: avg(|c| c.delivered),
            blockade: avg(|c| c.blockade),
            transport: avg(|c| c.transport),
            array_decay: avg(|c| c.array_decay),
            reservoir_decay: avg(|c| c.reservoir_decay),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(cycle: u32, complete: bool) -> CycleRecord {
        CycleRecord {
            cycle_index: cycle,
            target_complete: complete,
            n_buffer_filled: 0,
            n_target_filled: if complete { 6 } else { 0 },
            n_reservoir: 80,
            clock_at_image: 0.0,
            n_buffer_loaded: 0,
            n_delivered: 0,
            n_fill_moves: 0,
        }
    }

    /// Replica that first shows a complete target at `at` (1-based) and keeps it.
    fn completes_at(at: Option<u32>, n: u32) -> Vec<CycleRecord> {
        (1..=n).map(|c| rec(c, at.is_some_and(|a| c >= a))).collect()
    }

    #[test]
    fn all_complete_at_first_cycle() {
        let reps: Vec<_> = (0..5).map(|_| completes_at(Some(1), 4)).collect();
        let s = cumulative_success_rate(&reps, SuccessDefinition::FirstAchievement, CiMethod::Normal).unwrap();
        assert!(s.iter().all(|r| r.rate == 1.0 && r.half_width == 0.0));
    }

    #[test]
    fn none_complete() {
        let reps: Vec<_> = (0..5).map(|_| completes_at(None, 4)).collect();
        let s = cumulative_success_rate(&reps, SuccessDefinition::FirstAchievement, CiMethod::Normal).unwrap();
        assert!(s.iter().all(|r| r.rate == 0.0));
    }

    #[test]
    fn four_replica_fixture() {
        let reps = vec![completes_at(Some(1), 4), completes_at(Some(2), 4), completes_at(Some(2), 4), completes_at(None, 4)];
        let s = cumulative_success_rate(&reps, SuccessDefinition::FirstAchievement, CiMethod::Normal).unwrap();
        let rates: Vec<f64> = s.iter().map(|r| r.rate).collect();
        assert_eq!(rates, vec![0.25, 0.75, 0.75, 0.75]);
        assert!((s[0].half_width - (0.25f64 * 0.75 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn maintained_counts_current_state_only() {
        let mut flicker = completes_at(Some(1), 3);
        flicker[1].target_complete = false;
        let reps = vec![flicker, completes_at(None, 3)];
        let first = cumulative_success_rate(&reps, SuccessDefinition::FirstAchievement, CiMethod::Normal).unwrap();
        let kept = cumulative_success_rate(&reps, SuccessDefinition::Maintained, CiMethod::Normal).unwrap();
        assert_eq!(first.iter().map(|r| r.rate).collect::<Vec<_>>(), vec![0.5, 0.5, 0.5]);
        assert_eq!(kept.iter().map(|r| r.rate).collect::<Vec<_>>(), vec![0.5, 0.0, 0.5]);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let reps = vec![completes_at(None, 3), completes_at(None, 4)];
        assert!(matches!(
            cumulative_success_rate(&reps, SuccessDefinition::FirstAchievement, CiMethod::Normal),
            Err(HarnessError::MismatchedRecords { expected: 3, replica: 1, got: 4 })
        ));
        let empty: Vec<Vec<CycleRecord>> = vec![];
        assert!(cumulative_success_rate(&empty, SuccessDefinition::FirstAchievement, CiMethod::Normal).is_err());
    }

    #[test]
    fn wilson_half_width() {
        // Wilson with z = 1 at p = 0 is 1 / (2 (n + 1)).
        assert!((binomial_half_width(0, 10, CiMethod::Wilson) - 1.0 / 22.0).abs() < 1e-15);
        assert_eq!(binomial_half_width(0, 10, CiMethod::Normal), 0.0);
        let w = binomial_half_width(50, 100, CiMethod::Wilson);
        let n = binomial_half_width(50, 100, CiMethod::Normal);
        assert!(w < n && (w - n).abs() < 1e-3);
    }

    #[test]
    fn single_replica_stats_are_degenerate() {
        let mut records = completes_at(Some(3), 4);
        for (i, r) in records.iter_mut().enumerate() {
            r.n_buffer_loaded = 4;
            r.n_reservoir = 80 - 10 * i as u64;
        }
        let rep = ReplicaSummary { records, initial_reservoir: 82, counters: LossCounters { delivered: 9, ..Default::default() } };
        let s = aggregate(&[rep], 7, 6, SuccessDefinition::FirstAchievement, CiMethod::Normal).unwrap();
        assert_eq!(s.cycles.len(), 4);
        assert_eq!(s.cycles.iter().map(|c| c.success_rate).collect::<Vec<_>>(), vec![0.0, 0.0, 1.0, 1.0]);
        assert!(s.cycles.iter().all(|c| c.success_ci == 0.0 && c.buffer_fill_ci == 0.0 && c.reservoir_std == 0.0));
        assert!((s.cycles[0].buffer_fill_mean - 4.0 / 7.0).abs() < 1e-15);
        assert_eq!(s.cycles[0].reservoir_norm, 1.0);
        assert!((s.cycles[3].reservoir_norm - 50.0 / 80.0).abs() < 1e-15);
        assert_eq!(s.delivered_mean, 9.0);
        assert_eq!(s.initial_reservoir_mean, 82.0);
    }
}
