use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Learning-rate rule applied by the parameter server at each update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "RawSchedule")]
pub enum LrSchedule {
    Fixed { eta: f64 },
    /// `eta_j = min(c / ||w_j - w_read||², eta_max)`.
    StalenessCompensated { c: f64, eta_max: f64 },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawSchedule {
    Fixed { eta: f64 },
    StalenessCompensated { c: f64, eta_max: f64 },
}

impl TryFrom<RawSchedule> for LrSchedule {
    type Error = Error;

    fn try_from(raw: RawSchedule) -> Result<Self> {
        match raw {
            RawSchedule::Fixed { eta } => LrSchedule::fixed(eta),
            RawSchedule::StalenessCompensated { c, eta_max } => LrSchedule::staleness_compensated(c, eta_max),
        }
    }
}

impl LrSchedule {
    pub fn fixed(eta: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::InvalidSchedule(format!("eta must be > 0, got {eta}")));
        }
        Ok(LrSchedule::Fixed { eta })
    }

    pub fn staleness_compensated(c: f64, eta_max: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidSchedule(format!("C must be > 0, got {c}")));
        }
        if !(eta_max.is_finite() && eta_max > 0.0) {
            return Err(Error::InvalidSchedule(format!("eta_max must be > 0, got {eta_max}")));
        }
        Ok(LrSchedule::StalenessCompensated { c, eta_max })
    }

    /// Rate for an update whose parameter drift since the read is
    /// `staleness_norm = ||w_j - w_read||²`. Zero drift yields `eta_max`.
    pub fn rate(&self, staleness_norm: f64) -> f64 {
        match *self {
            LrSchedule::Fixed { eta } => eta,
            LrSchedule::StalenessCompensated { c, eta_max } => {
                if staleness_norm <= 0.0 {
                    eta_max
                } else {
                    (c / staleness_norm).min(eta_max)
                }
            }
        }
    }

    /// Largest rate the schedule can emit.
    pub fn ceiling(&self) -> f64 {
        match *self {
            LrSchedule::Fixed { eta } => eta,
            LrSchedule::StalenessCompensated { eta_max, .. } => eta_max,
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, LrSchedule::Fixed { .. })
    }
}
