//! One-step maps of the two-agent closed loop and its reduced forms.
//!
//! All steppers are simultaneous updates: the environment is advanced with
//! the pre-update agent values and the agents respond to the pre-update
//! environment.

use serde::Serialize;

use crate::error::{FcmsError, Result};
use crate::params::ModelParams;
use crate::state::{PairState, ReducedState};

/// Incentive pair `(G1, G2) = (-2 beta S, +2 beta S)`.
pub fn incentive_field(s: f64, p: &ModelParams) -> Result<(f64, f64)> {
    if !s.is_finite() {
        return Err(FcmsError::Divergence { field: "S".into() });
    }
    let g = 2.0 * p.beta() * s;
    Ok((-g, g))
}

/// Global coordination signal `S^2`.
pub fn global_signal(s: f64) -> f64 {
    s * s
}

/// Linear reduced map on (S, d) with homogeneous damping:
/// `S' = (1 - gamma) S + beta d`, `d' = (1 - eta alpha) d - 4 eta beta S`.
pub fn reduced_step(state: ReducedState, p: &ModelParams) -> Result<ReducedState> {
    state.check_finite()?;
    let alpha = p.homogeneous_damping()?;
    Ok(ReducedState {
        s: (1.0 - p.gamma()) * state.s + p.beta() * state.d,
        d: disagreement_update(state, p, alpha),
    })
}

/// Reduced map with a bounded environment: `S' = (1 - gamma) tanh(S) + beta d`.
pub fn saturated_step(state: ReducedState, p: &ModelParams) -> Result<ReducedState> {
    state.check_finite()?;
    let alpha = p.homogeneous_damping()?;
    Ok(ReducedState {
        s: (1.0 - p.gamma()) * state.s.tanh() + p.beta() * state.d,
        d: disagreement_update(state, p, alpha),
    })
}

/// Reduced map with a perturbation of the environment update:
/// `S' = (1 - gamma) S + beta d + epsilon sigma(S, d)`.
///
/// With `epsilon == 0` the perturbation is not evaluated and the result is
/// identical to [`reduced_step`].
pub fn perturbed_step<F>(state: ReducedState, p: &ModelParams, sigma: F) -> Result<ReducedState>
where
    F: Fn(f64, f64) -> f64,
{
    state.check_finite()?;
    let alpha = p.homogeneous_damping()?;
    let mut s = (1.0 - p.gamma()) * state.s + p.beta() * state.d;
    if p.epsilon() != 0.0 {
        let kick = sigma(state.s, state.d);
        if !kick.is_finite() {
            return Err(FcmsError::Divergence {
                field: "perturbation sigma(S, d)".into(),
            });
        }
        s += p.epsilon() * kick;
    }
    Ok(ReducedState {
        s,
        d: disagreement_update(state, p, alpha),
    })
}

/// Memoryless environment `S' = beta d`; the agents are unchanged.
pub fn memoryless_step(state: ReducedState, p: &ModelParams) -> Result<ReducedState> {
    state.check_finite()?;
    let alpha = p.homogeneous_damping()?;
    Ok(ReducedState {
        s: p.beta() * state.d,
        d: disagreement_update(state, p, alpha),
    })
}

fn disagreement_update(state: ReducedState, p: &ModelParams, alpha: f64) -> f64 {
    (1.0 - p.eta() * alpha) * state.d - 4.0 * p.eta() * p.beta() * state.s
}

/// Full two-agent map: `S' = (1 - gamma) S + beta (x1 - x2)`,
/// `x_i' = (1 - eta alpha_i) x_i + eta G_i`.
pub fn pair_step(state: PairState, p: &ModelParams) -> Result<PairState> {
    state.check_finite()?;
    let (g1, g2) = incentive_field(state.s, p)?;
    pair_update(state, p, g1, g2)
}

/// Pair map whose incentives ignore the environment: `G = (c, -c)` always.
pub fn memory_blind_pair_step(state: PairState, p: &ModelParams, c: f64) -> Result<PairState> {
    state.check_finite()?;
    pair_update(state, p, c, -c)
}

fn pair_update(state: PairState, p: &ModelParams, g1: f64, g2: f64) -> Result<PairState> {
    if p.alpha().len() > 2 {
        return Err(FcmsError::DimensionMismatch(format!(
            "pair model takes at most 2 damping entries, got {}",
            p.alpha().len()
        )));
    }
    let eta = p.eta();
    Ok(PairState {
        x1: (1.0 - eta * p.damping(0)) * state.x1 + eta * g1,
        x2: (1.0 - eta * p.damping(1)) * state.x2 + eta * g2,
        s: (1.0 - p.gamma()) * state.s + p.beta() * (state.x1 - state.x2),
    })
}

/// Built-in perturbation terms for [`perturbed_step`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    /// `sigma(S, d) = -S^3`
    CubicDamping,
    /// `sigma(S, d) = sin(d)`
    SineCoupling,
}

impl Perturbation {
    pub fn eval(self, s: f64, d: f64) -> f64 {
        match self {
            Self::CubicDamping => -(s * s * s),
            Self::SineCoupling => d.sin(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::CubicDamping => "cubic",
            Self::SineCoupling => "sine",
        }
    }
}

impl std::str::FromStr for Perturbation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "cubic" => Ok(Self::CubicDamping),
            "sine" => Ok(Self::SineCoupling),
            other => Err(format!("unknown perturbation `{other}` (cubic|sine)")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn baseline() -> ModelParams {
        ModelParams::baseline()
    }

    #[test]
    fn reduced_step_examples() {
        let p = baseline();
        assert_eq!(
            reduced_step(ReducedState::ORIGIN, &p).unwrap(),
            ReducedState::ORIGIN
        );
        // Hand iteration: S' = 0.9 + 0.5 * 2, d' = 2 - 4 * 0.01 * 0.5 * 1.
        let next = reduced_step(ReducedState::new(1.0, 2.0), &p).unwrap();
        assert!((next.s - 1.9).abs() < 1e-15);
        assert!((next.d - 1.98).abs() < 1e-15);
    }

    #[test]
    fn zero_coupling_decays_environment_only() {
        let p = baseline().ablated(0.0, 0.1, 0.01);
        let next = reduced_step(ReducedState::new(1.0, 0.0), &p).unwrap();
        assert_eq!(next, ReducedState::new(0.9, 0.0));
    }

    #[test]
    fn damping_enters_disagreement() {
        let p = baseline().with_alpha(vec![2.0]).unwrap();
        let next = reduced_step(ReducedState::new(0.0, 1.0), &p).unwrap();
        assert!((next.d - 0.98).abs() < 1e-15);
        let het = baseline().with_alpha(vec![1.0, 1.3]).unwrap();
        assert!(matches!(
            reduced_step(ReducedState::new(0.0, 1.0), &het),
            Err(FcmsError::HeterogeneousDamping(_))
        ));
    }

    #[test]
    fn non_finite_input_is_divergence() {
        let p = baseline();
        let err = reduced_step(ReducedState::new(f64::NAN, 0.0), &p).unwrap_err();
        assert_eq!(err, FcmsError::Divergence { field: "S".into() });
        assert!(pair_step(PairState::new(0.0, f64::INFINITY, 0.0), &p).is_err());
        assert!(saturated_step(ReducedState::new(0.0, f64::NAN), &p).is_err());
        assert!(incentive_field(f64::NAN, &p).is_err());
    }

    #[test]
    fn incentive_examples() {
        let p = baseline();
        assert_eq!(incentive_field(0.0, &p).unwrap(), (-0.0, 0.0));
        assert_eq!(incentive_field(1.0, &p).unwrap(), (-1.0, 1.0));
        assert_eq!(incentive_field(-2.0, &p).unwrap(), (2.0, -2.0));
    }

    #[test]
    fn global_signal_examples() {
        assert_eq!(global_signal(0.0), 0.0);
        assert_eq!(global_signal(3.0), 9.0);
        assert_eq!(global_signal(-3.0), 9.0);
    }

    #[test]
    fn pair_step_examples() {
        let p = baseline();
        let still = PairState::new(1.0, 1.0, 0.0);
        assert_eq!(pair_step(still, &p).unwrap(), still);
        let next = pair_step(PairState::new(1.0, -1.0, 0.0), &p).unwrap();
        assert_eq!(next, PairState::new(1.0, -1.0, 1.0));
    }

    #[test]
    fn pair_uses_pre_update_disagreement() {
        let p = baseline();
        let st = PairState::new(0.3, -0.1, 2.0);
        let next = pair_step(st, &p).unwrap();
        assert_eq!(next.s, 0.9 * 2.0 + 0.5 * (0.3 - (-0.1)));
    }

    #[test]
    fn saturated_examples() {
        let p = baseline();
        assert_eq!(
            saturated_step(ReducedState::ORIGIN, &p).unwrap(),
            ReducedState::ORIGIN
        );
        let next = saturated_step(ReducedState::new(10.0, 0.0), &p).unwrap();
        assert!((next.s - 0.9).abs() < 1e-8);
        assert!((next.d - (-0.2)).abs() < 1e-15);
    }

    #[test]
    fn saturated_matches_linear_for_small_states() {
        let p = baseline();
        for &(s, d) in &[(1e-6, 1e-6), (-1e-6, 5e-7), (1e-6, -1e-6), (3e-7, 0.0)] {
            let a = saturated_step(ReducedState::new(s, d), &p).unwrap();
            let b = reduced_step(ReducedState::new(s, d), &p).unwrap();
            assert!((a.s - b.s).abs() <= 1e-18, "{s} {d}");
            assert_eq!(a.d, b.d);
        }
    }

    #[test]
    fn perturbed_examples() {
        let p = baseline();
        let st = ReducedState::new(0.3, -1.2);
        let cubic = |s: f64, d: f64| Perturbation::CubicDamping.eval(s, d);
        assert_eq!(
            perturbed_step(st, &p, cubic).unwrap(),
            reduced_step(st, &p).unwrap()
        );

        let p = p.with_epsilon(0.1).unwrap();
        let next = perturbed_step(ReducedState::new(1.0, 0.0), &p, cubic).unwrap();
        assert!((next.s - 0.8).abs() < 1e-15);
        assert_eq!(
            perturbed_step(ReducedState::ORIGIN, &p, cubic).unwrap(),
            ReducedState::ORIGIN
        );
        let sine = |s: f64, d: f64| Perturbation::SineCoupling.eval(s, d);
        assert_eq!(
            perturbed_step(ReducedState::ORIGIN, &p, sine).unwrap(),
            ReducedState::ORIGIN
        );
        let err = perturbed_step(st, &p, |_, _| f64::NAN).unwrap_err();
        assert!(matches!(err, FcmsError::Divergence { field } if field.contains("perturbation")));
    }

    #[test]
    fn memory_blind_drift() {
        let p = baseline();
        let next = memory_blind_pair_step(PairState::new(0.0, 0.0, 1.0), &p, 0.1).unwrap();
        assert!((next.disagreement() - 2.0 * 0.01 * 0.1).abs() < 1e-18);
        assert_eq!(next.s, 0.9);
    }
}
