//! Rolling-window acceptance filter.
//!
//! Readings are only accepted once the last `window` measurements agree:
//! the window mean is emitted when the window's sample standard deviation
//! drops below the threshold. After an emission the filter stays quiet
//! until the deviation has risen above `rearm_factor` times the threshold,
//! so one settled plateau yields one reading.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vision::Timestamp;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilizeError {
    #[error("non-finite input value {0}")]
    NonFiniteInput(f64),
    #[error("invalid stabilizer config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilizerConfig {
    pub window: usize,
    /// Absolute (input units) or, with `relative`, a fraction of the window mean.
    pub sigma_threshold: f64,
    pub relative: bool,
    pub rearm_factor: f64,
}

impl Default for StabilizerConfig {
    fn default() -> Self {
        Self {
            window: 10,
            sigma_threshold: 0.005,
            relative: true,
            rearm_factor: 3.0,
        }
    }
}

impl StabilizerConfig {
    pub fn absolute(window: usize, sigma_threshold: f64) -> Self {
        Self {
            window,
            sigma_threshold,
            relative: false,
            rearm_factor: 3.0,
        }
    }

    pub fn validate(&self) -> Result<(), StabilizeError> {
        if self.window < 2 {
            return Err(StabilizeError::InvalidConfig("window must be >= 2".into()));
        }
        if !(self.sigma_threshold > 0.0 && self.sigma_threshold.is_finite()) {
            return Err(StabilizeError::InvalidConfig(
                "sigma_threshold must be > 0".into(),
            ));
        }
        if !(self.rearm_factor > 1.0 && self.rearm_factor.is_finite()) {
            return Err(StabilizeError::InvalidConfig(
                "rearm_factor must be > 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableReading {
    pub value: f64,
    pub sigma: f64,
    pub window_start: Option<Timestamp>,
    pub window_end: Option<Timestamp>,
}

/// Mean and sample (n - 1) standard deviation.
pub fn mean_and_sample_sd(values: impl ExactSizeIterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let ss: f64 = values.map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

#[derive(Debug, Clone)]
pub struct Stabilizer {
    config: StabilizerConfig,
    buf: VecDeque<(f64, Option<Timestamp>)>,
    armed: bool,
    last_sigma: Option<f64>,
}

impl Stabilizer {
    pub fn new(config: StabilizerConfig) -> Result<Self, StabilizeError> {
        config.validate()?;
        Ok(Self {
            buf: VecDeque::with_capacity(config.window),
            config,
            armed: true,
            last_sigma: None,
        })
    }

    pub fn config(&self) -> &StabilizerConfig {
        &self.config
    }

    /// Window deviation after the most recent push, once the window is full.
    pub fn last_sigma(&self) -> Option<f64> {
        self.last_sigma
    }

    pub fn is_armed(&self) -> bool {
        self.armed
    }

    pub fn reset(&mut self) {
        self.buf.clear();
        self.armed = true;
        self.last_sigma = None;
    }

    pub fn push(
        &mut self,
        value: f64,
        timestamp: Option<Timestamp>,
    ) -> Result<Option<StableReading>, StabilizeError> {
        if !value.is_finite() {
            return Err(StabilizeError::NonFiniteInput(value));
        }
        if self.buf.len() == self.config.window {
            self.buf.pop_front();
        }
        self.buf.push_back((value, timestamp));
        if self.buf.len() < self.config.window {
            return Ok(None);
        }

        let (mean, sigma) = mean_and_sample_sd(self.buf.iter().map(|&(v, _)| v));
        self.last_sigma = Some(sigma);
        let threshold = if self.config.relative {
            self.config.sigma_threshold * mean.abs()
        } else {
            self.config.sigma_threshold
        };

        if self.armed && sigma < threshold {
            self.armed = false;
            return Ok(Some(StableReading {
                value: mean,
                sigma,
                window_start: self.buf.front().and_then(|&(_, t)| t),
                window_end: self.buf.back().and_then(|&(_, t)| t),
            }));
        }
        if !self.armed && sigma > self.config.rearm_factor * threshold {
            self.armed = true;
        }
        Ok(None)
    }
}
