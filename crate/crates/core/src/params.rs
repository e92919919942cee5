use serde::Serialize;

use crate::error::{FcmsError, Result};

/// Scalar parameters of the closed loop.
///
/// Construction validates `beta > 0`, `eta > 0`, `0 < gamma < 1` and the
/// non-negativity of the damping, noise and perturbation terms. Ablation
/// experiments that deliberately leave this region go through
/// [`ModelParams::ablated`], which is crate-private.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelParams {
    beta: f64,
    gamma: f64,
    eta: f64,
    alpha: Vec<f64>,
    noise_sigma: f64,
    noise_bound: f64,
    epsilon: f64,
}

pub const BASELINE_BETA: f64 = 0.5;
pub const BASELINE_GAMMA: f64 = 0.1;
pub const BASELINE_ETA: f64 = 0.01;
pub const DEFAULT_NOISE_BOUND: f64 = 3.0;

impl ModelParams {
    pub fn new(beta: f64, gamma: f64, eta: f64) -> Result<Self> {
        check(beta.is_finite() && beta > 0.0, "beta", beta, "beta > 0")?;
        check(
            gamma.is_finite() && gamma > 0.0 && gamma < 1.0,
            "gamma",
            gamma,
            "0 < gamma < 1",
        )?;
        check(eta.is_finite() && eta > 0.0, "eta", eta, "eta > 0")?;
        Ok(Self {
            beta,
            gamma,
            eta,
            alpha: Vec::new(),
            noise_sigma: 0.0,
            noise_bound: DEFAULT_NOISE_BOUND,
            epsilon: 0.0,
        })
    }

    /// gamma = 0.1, eta = 0.01, beta = 0.5, no damping, no noise.
    pub fn baseline() -> Self {
        Self::new(BASELINE_BETA, BASELINE_GAMMA, BASELINE_ETA).expect("baseline is valid")
    }

    /// Parameters outside the validated region, for ablations that zero
    /// out beta, gamma or eta on purpose.
    pub(crate) fn ablated(&self, beta: f64, gamma: f64, eta: f64) -> Self {
        Self {
            beta,
            gamma,
            eta,
            ..self.clone()
        }
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        let mut p = Self::new(beta, self.gamma, self.eta)?;
        p.alpha.clone_from(&self.alpha);
        p.noise_sigma = self.noise_sigma;
        p.noise_bound = self.noise_bound;
        p.epsilon = self.epsilon;
        Ok(p)
    }

    /// Per-agent damping. An empty list means no damping; a single entry
    /// is broadcast to every agent.
    pub fn with_alpha(mut self, alpha: Vec<f64>) -> Result<Self> {
        for &a in &alpha {
            check(a.is_finite() && a >= 0.0, "alpha", a, "alpha >= 0")?;
        }
        self.alpha = alpha;
        Ok(self)
    }

    pub fn with_noise(mut self, sigma: f64, bound: f64) -> Result<Self> {
        check(
            sigma.is_finite() && sigma >= 0.0,
            "noise_sigma",
            sigma,
            "noise_sigma >= 0",
        )?;
        check(
            bound.is_finite() && bound > 0.0,
            "noise_bound",
            bound,
            "noise_bound > 0",
        )?;
        self.noise_sigma = sigma;
        self.noise_bound = bound;
        Ok(self)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        check(
            epsilon.is_finite() && epsilon >= 0.0,
            "epsilon",
            epsilon,
            "epsilon >= 0",
        )?;
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn noise_bound(&self) -> f64 {
        self.noise_bound
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Damping coefficient of agent `i` under the broadcast rule.
    pub fn damping(&self, i: usize) -> f64 {
        match self.alpha.len() {
            0 => 0.0,
            1 => self.alpha[0],
            _ => self.alpha.get(i).copied().unwrap_or(0.0),
        }
    }

    /// The single damping value shared by all agents, or an error when
    /// the entries differ.
    pub fn homogeneous_damping(&self) -> Result<f64> {
        match self.alpha.split_first() {
            None => Ok(0.0),
            Some((&first, rest)) if rest.iter().all(|&a| a == first) => Ok(first),
            Some(_) => Err(FcmsError::HeterogeneousDamping(self.alpha.clone())),
        }
    }
}

fn check(ok: bool, name: &'static str, value: f64, bound: &'static str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(FcmsError::InvalidParameter { name, value, bound })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range() {
        assert!(matches!(
            ModelParams::new(0.5, 1.5, 0.01),
            Err(FcmsError::InvalidParameter { name: "gamma", .. })
        ));
        assert!(ModelParams::new(0.0, 0.1, 0.01).is_err());
        assert!(ModelParams::new(0.5, 0.0, 0.01).is_err());
        assert!(ModelParams::new(0.5, 0.1, -1.0).is_err());
        assert!(ModelParams::new(f64::NAN, 0.1, 0.01).is_err());
        let p = ModelParams::baseline();
        assert!(p.clone().with_alpha(vec![1.0, -0.1]).is_err());
        assert!(p.clone().with_noise(-0.1, 3.0).is_err());
        assert!(p.clone().with_noise(0.1, 0.0).is_err());
        assert!(p.with_epsilon(-1e-3).is_err());
    }

    #[test]
    fn damping_broadcast() {
        let p = ModelParams::baseline();
        assert_eq!(p.damping(5), 0.0);
        assert_eq!(p.homogeneous_damping().unwrap(), 0.0);
        let p = p.with_alpha(vec![0.7]).unwrap();
        assert_eq!(p.damping(3), 0.7);
        let p = p.with_alpha(vec![1.0, 1.3]).unwrap();
        assert_eq!(p.damping(1), 1.3);
        assert!(p.homogeneous_damping().is_err());
    }

    #[test]
    fn with_beta_keeps_the_rest() {
        let p = ModelParams::baseline()
            .with_noise(0.01, 3.0)
            .unwrap()
            .with_beta(1.55)
            .unwrap();
        assert_eq!(p.beta(), 1.55);
        assert_eq!(p.noise_sigma(), 0.01);
        assert!(ModelParams::baseline().with_beta(-1.0).is_err());
    }
}
