//! Scripted numerical demonstrations built on the steppers and the
//! spectral tools.

mod ablation;
mod bifurcation;
mod invariance;
mod phase;
mod scalability;

use serde::Serialize;

pub use ablation::{
    ablate_coupling, ablate_dissipation, ablate_persistence, history_sensitivity,
    initial_environment_replay, necessity_check, AblationRun, HistoryProfile, HistoryRecord,
    NecessityOutcome, NecessityVariant, ReplayRun,
};
pub use bifurcation::{bifurcation_sweep, SweepRecord, SweepResult, CONVERGENCE_TOL};
pub use invariance::{
    forward_invariance_from, forward_invariance_probe, halton, ProbeReport, ProbeSample,
};
pub use phase::{
    d_extrema, nonlinear_convergence, phase_portrait, PhaseField, PhaseKind, PhaseVector,
};
pub use scalability::{
    loglog_slope, random_population, scalability_sweep, ScalabilityReport, ScaleMode, ScaleRecord,
    ScaleSettings,
};

/// Lower edge of the critical band on the spectral radius.
pub const CRITICAL_BAND_LOW: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeLabel {
    Subcritical,
    CriticalBand,
    Supercritical,
}

impl RegimeLabel {
    pub fn from_rho(rho: f64) -> Self {
        if rho >= 1.0 {
            Self::Supercritical
        } else if rho >= CRITICAL_BAND_LOW {
            Self::CriticalBand
        } else {
            Self::Subcritical
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Subcritical => "subcritical",
            Self::CriticalBand => "critical_band",
            Self::Supercritical => "supercritical",
        }
    }
}

/// Steps per rotation of the dominant eigenvalue, at least 1.
pub(crate) fn rotation_period(theta: f64) -> usize {
    if theta > 0.0 {
        (2.0 * std::f64::consts::PI / theta).ceil() as usize
    } else {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regime_thresholds() {
        assert_eq!(RegimeLabel::from_rho(0.5), RegimeLabel::Subcritical);
        assert_eq!(RegimeLabel::from_rho(0.989_999), RegimeLabel::Subcritical);
        assert_eq!(RegimeLabel::from_rho(0.99), RegimeLabel::CriticalBand);
        assert_eq!(RegimeLabel::from_rho(0.999_999), RegimeLabel::CriticalBand);
        assert_eq!(RegimeLabel::from_rho(1.0), RegimeLabel::Supercritical);
    }
}
