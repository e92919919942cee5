//! Boundedness and absorption of reduced trajectories started across a box.

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::reduced_step;
use crate::error::{FcmsError, Result};
use crate::params::ModelParams;
use crate::spectral::{eig2, reduced_jacobian, spectral_radius, stability_criterion};
use crate::state::ReducedState;

/// Trajectories must stay within this multiple of the box half-width.
pub const BOUND_FACTOR: f64 = 10.0;

/// Radical inverse of `i` in `base`.
pub fn halton(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let b = base as f64;
    while i > 0 {
        f /= b;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeSample {
    pub init: ReducedState,
    /// `max_t |(S_t, d_t)|_inf / radius`
    pub peak_ratio: f64,
    /// First step from which the state stays inside the inner box.
    pub entry_step: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub radius: f64,
    pub t_max: usize,
    pub max_ratio: f64,
    pub bound_factor: f64,
    pub bounded: bool,
    pub absorbed_count: usize,
    pub absorbed_fraction: f64,
    pub all_absorbed: bool,
    pub worst_entry_step: Option<usize>,
    pub samples: Vec<ProbeSample>,
}

/// Probes `samples` Halton points (bases 2 and 3, indices `1..=samples`)
/// mapped onto `[-radius, radius]^2`.
pub fn forward_invariance_probe(
    p: &ModelParams,
    radius: f64,
    samples: usize,
    t_max: usize,
) -> Result<ProbeReport> {
    let points: Vec<ReducedState> = (1..=samples as u64)
        .map(|i| {
            ReducedState::new(
                radius * (2.0 * halton(i, 2) - 1.0),
                radius * (2.0 * halton(i, 3) - 1.0),
            )
        })
        .collect();
    forward_invariance_from(p, radius, &points, t_max)
}

/// Runs each initial condition for `t_max` steps and checks it stays within
/// `BOUND_FACTOR * radius` and ends inside `[-radius/10, radius/10]^2`.
pub fn forward_invariance_from(
    p: &ModelParams,
    radius: f64,
    points: &[ReducedState],
    t_max: usize,
) -> Result<ProbeReport> {
    if !stability_criterion(p) {
        return Err(FcmsError::NotStable {
            rho: spectral_radius(&eig2(&reduced_jacobian(p)?)),
            context: "forward invariance needs a stable linearization",
        });
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(FcmsError::InvalidParameter {
            name: "radius",
            value: radius,
            bound: "finite and > 0",
        });
    }
    if points.is_empty() {
        return Err(FcmsError::Precondition(
            "no initial conditions to probe".into(),
        ));
    }
    let inner = radius / 10.0;
    let samples = points
        .par_iter()
        .map(|&init| {
            init.check_finite()?;
            let mut state = init;
            let mut peak = state.max_abs();
            let mut entry = (peak <= inner).then_some(0);
            for t in 1..=t_max {
                state = reduced_step(state, p)?;
                let m = state.max_abs();
                peak = peak.max(m);
                if m <= inner {
                    entry.get_or_insert(t);
                } else {
                    entry = None;
                }
            }
            Ok(ProbeSample {
                init,
                peak_ratio: peak / radius,
                entry_step: entry,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let max_ratio = samples.iter().map(|s| s.peak_ratio).fold(0.0, f64::max);
    let absorbed_count = samples.iter().filter(|s| s.entry_step.is_some()).count();
    let all_absorbed = absorbed_count == samples.len();
    Ok(ProbeReport {
        radius,
        t_max,
        max_ratio,
        bound_factor: BOUND_FACTOR,
        bounded: max_ratio.is_finite() && max_ratio <= BOUND_FACTOR,
        absorbed_count,
        absorbed_fraction: absorbed_count as f64 / samples.len() as f64,
        all_absorbed,
        worst_entry_step: if all_absorbed {
            samples.iter().filter_map(|s| s.entry_step).max()
        } else {
            None
        },
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_digits() {
        assert_eq!(halton(1, 2), 0.5);
        assert_eq!(halton(2, 2), 0.25);
        assert_eq!(halton(3, 2), 0.75);
        assert!((halton(1, 3) - 1.0 / 3.0).abs() < 1e-16);
        assert!((halton(5, 3) - 7.0 / 9.0).abs() < 1e-15);
        assert_eq!(halton(0, 7), 0.0);
    }

    #[test]
    fn baseline_probe() {
        let rep = forward_invariance_probe(&ModelParams::baseline(), 1.0, 256, 5000).unwrap();
        assert_eq!(rep.samples.len(), 256);
        assert!(rep.bounded, "max ratio {}", rep.max_ratio);
        assert!(rep.max_ratio > 1.0);
        assert!(rep.all_absorbed);
        assert_eq!(rep.absorbed_fraction, 1.0);
    }

    #[test]
    fn origin_stays_put() {
        let rep =
            forward_invariance_from(&ModelParams::baseline(), 1.0, &[ReducedState::ORIGIN], 100)
                .unwrap();
        assert_eq!(rep.max_ratio, 0.0);
        assert_eq!(rep.samples[0].entry_step, Some(0));
    }

    #[test]
    fn rejects_unstable() {
        let p = ModelParams::baseline().with_beta(1.65).unwrap();
        assert!(matches!(
            forward_invariance_probe(&p, 1.0, 16, 100),
            Err(FcmsError::NotStable { .. })
        ));
    }
}
