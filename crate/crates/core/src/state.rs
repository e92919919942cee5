use serde::Serialize;

use crate::error::{FcmsError, Result};

/// Environmental memory and two-agent disagreement, the coordinates of the
/// reduced closed loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReducedState {
    pub s: f64,
    pub d: f64,
}

impl ReducedState {
    pub const ORIGIN: Self = Self { s: 0.0, d: 0.0 };

    pub fn new(s: f64, d: f64) -> Self {
        Self { s, d }
    }

    pub fn check_finite(&self) -> Result<()> {
        if !self.s.is_finite() {
            return Err(divergence("S"));
        }
        if !self.d.is_finite() {
            return Err(divergence("d"));
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.s.abs().max(self.d.abs())
    }
}

/// Two scalar agents sharing one environment scalar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairState {
    pub x1: f64,
    pub x2: f64,
    pub s: f64,
}

impl PairState {
    pub fn new(x1: f64, x2: f64, s: f64) -> Self {
        Self { x1, x2, s }
    }

    pub fn disagreement(&self) -> f64 {
        self.x1 - self.x2
    }

    pub fn project(&self) -> ReducedState {
        ReducedState::new(self.s, self.disagreement())
    }

    pub fn check_finite(&self) -> Result<()> {
        for (name, v) in [("x1", self.x1), ("x2", self.x2), ("S", self.s)] {
            if !v.is_finite() {
                return Err(divergence(name));
            }
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.x1.abs().max(self.x2.abs()).max(self.s.abs())
    }
}

/// N agents, each carrying its own environment trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopulationState {
    x: Vec<f64>,
    s: Vec<f64>,
}

impl PopulationState {
    pub fn new(x: Vec<f64>, s: Vec<f64>) -> Result<Self> {
        if x.len() != s.len() {
            return Err(FcmsError::DimensionMismatch(format!(
                "{} agent values but {} environment traces",
                x.len(),
                s.len()
            )));
        }
        if x.len() < 2 {
            return Err(FcmsError::PopulationTooSmall(x.len()));
        }
        Ok(Self { x, s })
    }

    /// Population with the given agent values and zero environment traces.
    pub fn at_rest(x: Vec<f64>) -> Result<Self> {
        let s = vec![0.0; x.len()];
        Self::new(x, s)
    }

    /// The N = 2 embedding of a pair: `S = (S, -S)`.
    pub fn from_pair(pair: &PairState) -> Self {
        Self {
            x: vec![pair.x1, pair.x2],
            s: vec![pair.s, -pair.s],
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.x, &mut self.s)
    }

    pub fn check_finite(&self) -> Result<()> {
        if let Some(i) = self.x.iter().position(|v| !v.is_finite()) {
            return Err(divergence(&format!("x[{i}]")));
        }
        if let Some(i) = self.s.iter().position(|v| !v.is_finite()) {
            return Err(divergence(&format!("S[{i}]")));
        }
        Ok(())
    }

    pub fn mean_x(&self) -> f64 {
        mean(&self.x)
    }

    /// Cross-sectional (population) variance of the agent values.
    pub fn variance_x(&self) -> f64 {
        let m = self.mean_x();
        self.x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.x.len() as f64
    }
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn divergence(field: &str) -> FcmsError {
    FcmsError::Divergence {
        field: field.to_string(),
    }
}
