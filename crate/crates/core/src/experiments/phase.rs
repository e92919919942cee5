//! One-step displacement fields and nonlinear convergence checks.

use serde::Serialize;

use crate::dynamics::{reduced_step, saturated_step};
use crate::error::{FcmsError, Result};
use crate::params::ModelParams;
use crate::simulate::{simulate, ModelKind, SystemState, Trajectory};
use crate::spectral::{eig2, reduced_jacobian, spectral_radius, stability_criterion};
use crate::state::ReducedState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseKind {
    Reduced,
    Saturated,
}

impl PhaseKind {
    fn model(self) -> ModelKind {
        match self {
            Self::Reduced => ModelKind::Reduced,
            Self::Saturated => ModelKind::Saturated,
        }
    }

    fn step(self, st: ReducedState, p: &ModelParams) -> Result<ReducedState> {
        match self {
            Self::Reduced => reduced_step(st, p),
            Self::Saturated => saturated_step(st, p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseVector {
    pub s: f64,
    pub d: f64,
    pub ds: f64,
    pub dd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseField {
    pub kind: PhaseKind,
    pub extent: f64,
    pub grid_n: usize,
    /// Row-major over `S`, then `d`.
    pub grid: Vec<PhaseVector>,
    pub overlay: Trajectory,
}

/// Displacements on a `grid_n x grid_n` grid over `[-extent, extent]^2`
/// plus a trajectory of `overlay_steps` from `overlay_start`.
pub fn phase_portrait(
    kind: PhaseKind,
    p: &ModelParams,
    extent: f64,
    grid_n: usize,
    overlay_start: ReducedState,
    overlay_steps: usize,
) -> Result<PhaseField> {
    if grid_n < 2 {
        return Err(FcmsError::Precondition(format!(
            "phase grid needs at least 2 points per side, got {grid_n}"
        )));
    }
    if !(extent > 0.0 && extent.is_finite()) {
        return Err(FcmsError::InvalidParameter {
            name: "grid_extent",
            value: extent,
            bound: "finite and > 0",
        });
    }
    // Integer offsets keep the centre exactly at 0 for odd grids.
    let coord = |i: usize| {
        let k = 2 * i as i64 - (grid_n as i64 - 1);
        extent * k as f64 / (grid_n - 1) as f64
    };
    let mut grid = Vec::with_capacity(grid_n * grid_n);
    for i in 0..grid_n {
        for j in 0..grid_n {
            let here = ReducedState::new(coord(i), coord(j));
            let next = kind.step(here, p)?;
            grid.push(PhaseVector {
                s: here.s,
                d: here.d,
                ds: next.s - here.s,
                dd: next.d - here.d,
            });
        }
    }
    let overlay = simulate(
        kind.model(),
        SystemState::Reduced(overlay_start),
        &p.clone().with_noise(0.0, p.noise_bound())?,
        overlay_steps.max(1),
        None,
    )?;
    Ok(PhaseField {
        kind,
        extent,
        grid_n,
        grid,
        overlay,
    })
}

/// Values of the local extrema of `series`, in order. Flat runs count once.
pub fn d_extrema(series: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    let mut prev_sign = 0.0;
    for w in series.windows(2) {
        let delta = w[1] - w[0];
        if delta == 0.0 {
            continue;
        }
        if prev_sign != 0.0 && delta.signum() != prev_sign {
            out.push(w[0]);
        }
        prev_sign = delta.signum();
    }
    out
}

/// Final `|d|` of a saturated run; infinite when the run diverged.
pub fn nonlinear_convergence(p: &ModelParams, init: ReducedState, t_max: usize) -> Result<f64> {
    if !stability_criterion(p) {
        return Err(FcmsError::NotStable {
            rho: spectral_radius(&eig2(&reduced_jacobian(p)?)),
            context: "nonlinear convergence is checked in the stable region",
        });
    }
    let tr = simulate(
        ModelKind::Saturated,
        SystemState::Reduced(init),
        &p.clone().with_noise(0.0, p.noise_bound())?,
        t_max,
        None,
    )?;
    Ok(if tr.diverged_at.is_some() {
        f64::INFINITY
    } else {
        tr.final_record().d.abs()
    })
}
