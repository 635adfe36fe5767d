//! Closed-form event-count, log-size and memory predictions for one task,
//! and their comparison with what the reducer actually produced.
//!
//! Every quantity is generic over [`Scalar`], so the same formulas run in
//! `f64` for reporting and over exact rationals when identities have to hold
//! with no rounding at all.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::reducer::{Mode, ReduceCounters};
use crate::scalar::Scalar;
use crate::template::MemoryCosts;

/// Mean raw record size measured on the ArduPilot case study.
pub const DEFAULT_RAW_RECORD_BYTES: f64 = 527.0;
/// Template-match record size measured on the ArduPilot case study.
pub const DEFAULT_TEMPLATE_RECORD_BYTES: f64 = 343.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamsError {
    #[error("{lengths} sequence lengths but {probabilities} probabilities")]
    ShapeMismatch {
        lengths: usize,
        probabilities: usize,
    },
    #[error("probabilities sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("n = {n} exceeds N = {total}")]
    TooManySelected { n: usize, total: usize },
    #[error("declared N = {declared} but {actual} sequences listed")]
    CountMismatch { declared: usize, actual: usize },
}

/// Parameters of one periodic task.
///
/// Sequences are ordered so that the first `n` are the ones reduced by
/// templates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskParams<T> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Loop iterations `I`.
    #[serde(rename = "I")]
    pub iterations: u64,
    /// `len(s_i)` for each distinct sequence.
    #[serde(rename = "len")]
    pub lengths: Vec<u64>,
    /// `p_i` for each distinct sequence.
    #[serde(rename = "p")]
    pub probabilities: Vec<T>,
    /// Init-phase event count `f`.
    #[serde(rename = "f")]
    pub init_events: u64,
    /// Number of sequences reduced by templates, `n`.
    #[serde(rename = "n")]
    pub selected: usize,
    /// Mean raw record size `B_A`.
    #[serde(rename = "B_A")]
    pub raw_record_bytes: T,
    /// Template record size `B_E`.
    #[serde(rename = "B_E")]
    pub template_record_bytes: T,
}

/// JSON shape accepted on input; `N`, `B_A` and `B_E` are optional.
#[derive(Debug, Clone, Deserialize)]
struct TaskParamsInput {
    #[serde(default)]
    name: Option<String>,
    #[serde(rename = "N", default)]
    n_sequences: Option<usize>,
    #[serde(rename = "I")]
    iterations: u64,
    #[serde(rename = "len")]
    lengths: Vec<u64>,
    #[serde(rename = "p")]
    probabilities: Vec<f64>,
    #[serde(rename = "f", default)]
    init_events: u64,
    #[serde(rename = "n")]
    selected: usize,
    #[serde(rename = "B_A", default = "default_ba")]
    raw_record_bytes: f64,
    #[serde(rename = "B_E", default = "default_be")]
    template_record_bytes: f64,
}

fn default_ba() -> f64 {
    DEFAULT_RAW_RECORD_BYTES
}

fn default_be() -> f64 {
    DEFAULT_TEMPLATE_RECORD_BYTES
}

impl TaskParams<f64> {
    /// Parse and validate one parameter object.
    pub fn from_json_value(v: serde_json::Value) -> Result<Self, String> {
        let input: TaskParamsInput = serde_json::from_value(v).map_err(|e| e.to_string())?;
        if let Some(declared) = input.n_sequences {
            if declared != input.lengths.len() {
                return Err(ParamsError::CountMismatch {
                    declared,
                    actual: input.lengths.len(),
                }
                .to_string());
            }
        }
        let tp = TaskParams {
            name: input.name,
            iterations: input.iterations,
            lengths: input.lengths,
            probabilities: input.probabilities,
            init_events: input.init_events,
            selected: input.selected,
            raw_record_bytes: input.raw_record_bytes,
            template_record_bytes: input.template_record_bytes,
        };
        tp.validate().map_err(|e| e.to_string())?;
        Ok(tp)
    }
}

impl<T: Scalar> TaskParams<T> {
    /// Parameters with the case-study record sizes.
    pub fn new(
        iterations: u64,
        lengths: Vec<u64>,
        probabilities: Vec<T>,
        init_events: u64,
        selected: usize,
    ) -> Self {
        TaskParams {
            name: None,
            iterations,
            lengths,
            probabilities,
            init_events,
            selected,
            raw_record_bytes: T::from_decimal(DEFAULT_RAW_RECORD_BYTES),
            template_record_bytes: T::from_decimal(DEFAULT_TEMPLATE_RECORD_BYTES),
        }
    }

    /// Same parameters over another scalar type.
    pub fn convert<U: Scalar>(&self) -> TaskParams<U> {
        let conv = |x: &T| U::from_decimal(x.to_f64());
        TaskParams {
            name: self.name.clone(),
            iterations: self.iterations,
            lengths: self.lengths.clone(),
            probabilities: self.probabilities.iter().map(conv).collect(),
            init_events: self.init_events,
            selected: self.selected,
            raw_record_bytes: conv(&self.raw_record_bytes),
            template_record_bytes: conv(&self.template_record_bytes),
        }
    }

    /// Number of distinct sequences `N`.
    pub fn sequence_count(&self) -> usize {
        self.lengths.len()
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        if self.lengths.len() != self.probabilities.len() {
            return Err(ParamsError::ShapeMismatch {
                lengths: self.lengths.len(),
                probabilities: self.probabilities.len(),
            });
        }
        for p in &self.probabilities {
            let v = p.to_f64();
            if !(0.0..=1.0).contains(&v) {
                return Err(ParamsError::BadProbability(v));
            }
        }
        let total: f64 = self.probabilities.iter().map(Scalar::to_f64).sum();
        if !self.probabilities.is_empty() && (total - 1.0).abs() > 1e-9 {
            return Err(ParamsError::NotNormalized(total));
        }
        if self.selected > self.lengths.len() {
            return Err(ParamsError::TooManySelected {
                n: self.selected,
                total: self.lengths.len(),
            });
        }
        Ok(())
    }

    fn int(n: u64) -> T {
        T::from_u64(n)
    }

    /// `sum p_i * len(s_i)` over `range` of sequence indices.
    fn weighted_len(&self, range: std::ops::Range<usize>) -> T {
        range.fold(T::zero(), |acc, i| {
            acc + self.probabilities[i].clone() * Self::int(self.lengths[i])
        })
    }

    fn prob_mass(&self, range: std::ops::Range<usize>) -> T {
        range.fold(T::zero(), |acc, i| acc + self.probabilities[i].clone())
    }

    fn selected_range(&self) -> std::ops::Range<usize> {
        0..self.selected
    }

    fn residual_range(&self) -> std::ops::Range<usize> {
        self.selected..self.lengths.len()
    }

    /// Events logged without reduction: `I * sum_i p_i len(s_i) + f`.
    pub fn events_audit(&self) -> T {
        Self::int(self.iterations) * self.weighted_len(0..self.lengths.len())
            + Self::int(self.init_events)
    }

    /// Events logged when the first `n` sequences are reduced.
    pub fn events_ellipsis(&self) -> T {
        Self::int(self.iterations)
            * (self.prob_mass(self.selected_range()) + self.weighted_len(self.residual_range()))
            + Self::int(self.init_events)
    }

    /// `I * (sum_{i<=n} p_i len(s_i) - sum_{i<=n} p_i)`.
    pub fn event_reduction(&self) -> T {
        Self::int(self.iterations)
            * (self.weighted_len(self.selected_range()) - self.prob_mass(self.selected_range()))
    }

    /// Bytes logged without reduction.
    pub fn log_size_audit(&self) -> T {
        let ba = self.raw_record_bytes.clone();
        Self::int(self.iterations) * (ba.clone() * self.weighted_len(0..self.lengths.len()))
            + Self::int(self.init_events) * ba
    }

    /// Bytes logged with the first `n` sequences reduced.
    pub fn log_size_ellipsis(&self) -> T {
        let ba = self.raw_record_bytes.clone();
        let be = self.template_record_bytes.clone();
        Self::int(self.iterations)
            * (be * self.prob_mass(self.selected_range())
                + ba.clone() * self.weighted_len(self.residual_range()))
            + Self::int(self.init_events) * ba
    }

    /// `I * (B_A sum_{i<=n} p_i len(s_i) - B_E sum_{i<=n} p_i)`.
    pub fn size_reduction(&self) -> T {
        Self::int(self.iterations)
            * (self.raw_record_bytes.clone() * self.weighted_len(self.selected_range())
                - self.template_record_bytes.clone() * self.prob_mass(self.selected_range()))
    }

    /// Best-case event count when consecutive matches are aggregated:
    /// `n + I * sum_{i>n} p_i len(s_i) + f`.
    pub fn events_hp_best(&self) -> T {
        Self::int(self.selected as u64)
            + Self::int(self.iterations) * self.weighted_len(self.residual_range())
            + Self::int(self.init_events)
    }

    /// `I * sum_{i<=n} p_i len(s_i) - n`.
    pub fn hp_event_reduction(&self) -> T {
        Self::int(self.iterations) * self.weighted_len(self.selected_range())
            - Self::int(self.selected as u64)
    }

    /// Best-case bytes when consecutive matches are aggregated.
    pub fn log_size_hp_best(&self) -> T {
        Self::int(self.selected as u64) * self.template_record_bytes.clone()
            + (Self::int(self.iterations) * self.weighted_len(self.residual_range())
                + Self::int(self.init_events))
                * self.raw_record_bytes.clone()
    }

    /// Template memory for the selected sequences.
    pub fn template_memory(&self, costs: MemoryCosts) -> u64 {
        let entries: u64 = self.lengths[..self.selected].iter().sum();
        costs.per_template * self.selected as u64 + costs.per_syscall * entries
    }
}

/// Which closed form a measurement is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    /// No reduction at all (`E_A`, `L_A`).
    LinuxAudit,
    /// Per-instance reduction (`E_E`, `L_E`).
    Ellipsis,
    /// Aggregated reduction, best case.
    EllipsisHpBest,
}

impl From<Mode> for Prediction {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Ellipsis => Prediction::Ellipsis,
            Mode::EllipsisHp => Prediction::EllipsisHpBest,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub prediction: Prediction,
    pub predicted_events: f64,
    pub measured_events: u64,
    pub events_rel_error: f64,
    pub predicted_bytes: f64,
    pub measured_bytes: u64,
    pub bytes_rel_error: f64,
    pub tolerance: f64,
    /// Whether the event counts agree within `tolerance`. Byte predictions
    /// depend on the assumed record sizes and are reported only.
    pub within_tolerance: bool,
}

fn rel_error(predicted: f64, measured: f64) -> f64 {
    if predicted == measured {
        0.0
    } else {
        (measured - predicted).abs() / predicted.abs().max(f64::MIN_POSITIVE)
    }
}

/// Predicted vs measured event and byte counts.
pub fn compare<T: Scalar>(
    tp: &TaskParams<T>,
    counters: &ReduceCounters,
    prediction: Prediction,
    tolerance: f64,
) -> ComparisonReport {
    let (events, bytes) = match prediction {
        Prediction::LinuxAudit => (tp.events_audit(), tp.log_size_audit()),
        Prediction::Ellipsis => (tp.events_ellipsis(), tp.log_size_ellipsis()),
        Prediction::EllipsisHpBest => (tp.events_hp_best(), tp.log_size_hp_best()),
    };
    let predicted_events = events.to_f64();
    let predicted_bytes = bytes.to_f64();
    let events_rel_error = rel_error(predicted_events, counters.events_out as f64);
    ComparisonReport {
        prediction,
        predicted_events,
        measured_events: counters.events_out,
        events_rel_error,
        predicted_bytes,
        measured_bytes: counters.bytes_out,
        bytes_rel_error: rel_error(predicted_bytes, counters.bytes_out as f64),
        tolerance,
        within_tolerance: events_rel_error <= tolerance,
    }
}
