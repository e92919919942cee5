use rayon::prelude::*;
use serde::Serialize;

use super::{rotation_period, RegimeLabel};
use crate::error::{FcmsError, Result};
use crate::params::ModelParams;
use crate::simulate::{simulate_with, ModelKind, SimOptions, SystemState};
use crate::spectral::{eig2, reduced_jacobian, spectral_radius, tau_from_rho};
use crate::state::ReducedState;

/// `|d|` must stay below this over the last rotation period to count as
/// converged.
pub const CONVERGENCE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub beta: f64,
    pub regime: RegimeLabel,
    pub rho: f64,
    pub final_abs_d: Option<f64>,
    pub diverged_at: Option<usize>,
    pub converged: bool,
    pub tau_theory: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub records: Vec<SweepRecord>,
    pub t_max: usize,
    pub d0: f64,
}

/// Deterministic reduced runs from `(0, d0)` across couplings, labelled by
/// the spectral radius. Records come back sorted by coupling.
pub fn bifurcation_sweep(
    p: &ModelParams,
    betas: &[f64],
    t_max: usize,
    d0: f64,
) -> Result<SweepResult> {
    if betas.is_empty() {
        return Err(FcmsError::Precondition("empty coupling grid".into()));
    }
    let mut grid = betas.to_vec();
    grid.sort_by(f64::total_cmp);
    let records = grid
        .par_iter()
        .map(|&beta| {
            let pb = p.with_beta(beta)?;
            let eigs = eig2(&reduced_jacobian(&pb)?);
            let rho = spectral_radius(&eigs);
            let tr = simulate_with(
                ModelKind::Reduced,
                SystemState::Reduced(ReducedState::new(0.0, d0)),
                &pb,
                t_max,
                SimOptions::default(),
            )?;
            let window = rotation_period(eigs[0].arg().abs());
            Ok(SweepRecord {
                beta,
                regime: RegimeLabel::from_rho(rho),
                rho,
                final_abs_d: tr.diverged_at.is_none().then(|| tr.final_record().d.abs()),
                diverged_at: tr.diverged_at,
                converged: tr.converged(CONVERGENCE_TOL, window),
                tau_theory: tau_from_rho(rho),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { records, t_max, d0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regimes_across_the_boundary() {
        let res =
            bifurcation_sweep(&ModelParams::baseline(), &[1.65, 0.5, 1.55], 20_000, 2.0).unwrap();
        let betas: Vec<f64> = res.records.iter().map(|r| r.beta).collect();
        assert_eq!(betas, vec![0.5, 1.55, 1.65]);

        let [sub, crit, sup] = &res.records[..] else {
            unreachable!()
        };
        assert_eq!(sub.regime, RegimeLabel::Subcritical);
        assert!(sub.converged);
        assert_eq!(crit.regime, RegimeLabel::CriticalBand);
        assert!(crit.converged);
        assert_eq!(sup.regime, RegimeLabel::Supercritical);
        assert!(sup.diverged_at.is_some() && !sup.converged);
        assert!(sup.final_abs_d.is_none() && sup.tau_theory.is_none());
    }

    #[test]
    fn critical_band_needs_long_runs() {
        // tau ~ 512 at beta = 1.55; 1000 steps is only ~2 tau.
        let res = bifurcation_sweep(&ModelParams::baseline(), &[1.55], 1000, 2.0).unwrap();
        assert!(!res.records[0].converged);
    }

    #[test]
    fn labels_follow_the_spectrum() {
        let p = ModelParams::baseline();
        let betas: Vec<f64> = (1..=40).map(|k| 0.05 * k as f64).collect();
        let res = bifurcation_sweep(&p, &betas, 200, 1.0).unwrap();
        for r in &res.records {
            let rho = spectral_radius(&eig2(
                &reduced_jacobian(&p.with_beta(r.beta).unwrap()).unwrap(),
            ));
            assert_eq!(r.rho, rho);
            assert_eq!(r.regime, RegimeLabel::from_rho(rho));
        }
    }
}
