//! Piecewise-constant bifurcation-parameter schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `mu` takes `value` from `t` until the next switch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuStep {
    pub t: f64,
    pub mu: f64,
}

/// Right-continuous step function `mu(t)`, starting at `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<MuStep>", into = "Vec<MuStep>")]
pub struct MuSchedule {
    steps: Vec<MuStep>,
}

impl MuSchedule {
    pub fn new(steps: Vec<MuStep>) -> Result<Self> {
        let first = steps
            .first()
            .ok_or_else(|| Error::InvalidInput("a schedule needs at least one step".into()))?;
        if first.t != 0.0 {
            return Err(Error::InvalidInput(format!(
                "the first schedule step must start at t = 0, not {}",
                first.t
            )));
        }
        if steps.iter().any(|s| !s.t.is_finite() || !s.mu.is_finite()) {
            return Err(Error::InvalidInput("schedule entries must be finite".into()));
        }
        if steps.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::InvalidInput("switch times must be strictly increasing".into()));
        }
        Ok(Self { steps })
    }

    /// Schedule from `(time, value)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(t, mu)| MuStep { t, mu }).collect())
    }

    /// Constant schedule.
    pub fn constant(mu: f64) -> Self {
        Self {
            steps: vec![MuStep { t: 0.0, mu }],
        }
    }

    pub fn steps(&self) -> &[MuStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Value of the last step whose switch time is at most `t`.
    pub fn evaluate(&self, t: f64) -> f64 {
        let idx = self.steps.partition_point(|s| s.t <= t);
        self.steps[idx.saturating_sub(1)].mu
    }

    /// Consecutive switches as `(time, mu_before, mu_after)`.
    pub fn switches(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.steps.windows(2).map(|w| (w[1].t, w[0].mu, w[1].mu))
    }

    /// Switch times snapped to a grid of spacing `dt`, as sample indices.
    pub fn snapped(&self, dt: f64) -> Vec<(usize, f64)> {
        self.steps
            .iter()
            .map(|s| ((s.t / dt).round() as usize, s.mu))
            .collect()
    }
}

impl TryFrom<Vec<MuStep>> for MuSchedule {
    type Error = Error;

    fn try_from(steps: Vec<MuStep>) -> Result<Self> {
        Self::new(steps)
    }
}

impl From<MuSchedule> for Vec<MuStep> {
    fn from(s: MuSchedule) -> Self {
        s.steps
    }
}

/// Walks a snapped schedule along increasing sample indices.
pub(crate) struct GridSchedule {
    steps: Vec<(usize, f64)>,
    cursor: usize,
}

impl GridSchedule {
    pub(crate) fn new(schedule: &MuSchedule, dt: f64) -> Self {
        Self {
            steps: schedule.snapped(dt),
            cursor: 0,
        }
    }

    /// Value in force on the step starting at sample `k`; `k` must not decrease.
    pub(crate) fn at(&mut self, k: usize) -> f64 {
        while self.cursor + 1 < self.steps.len() && self.steps[self.cursor + 1].0 <= k {
            self.cursor += 1;
        }
        self.steps[self.cursor].1
    }
}
