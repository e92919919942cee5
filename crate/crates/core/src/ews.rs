//! Stationary statistics of the noisy reduced loop and the early-warning
//! indicators computed from disagreement series.

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::reduced_step;
use crate::error::{FcmsError, Result};
use crate::noise::{point_seed, NoiseSpec, PRNG_NAME};
use crate::params::ModelParams;
use crate::simulate::{simulate_with, ModelKind, SimOptions, SystemState, Trajectory};
use crate::spectral::{
    eig2, recovery_time_theory, reduced_jacobian, spectral_radius, stability_criterion, Matrix2,
};
use crate::state::ReducedState;

pub type Cov2 = [[f64; 2]; 2];

const LYAPUNOV_BUDGET: usize = 10_000_000;
pub const RECOVERY_BUDGET: u64 = 10_000_000;

/// Default relative threshold for [`measure_recovery_time`]: `e^-1`.
pub fn default_recovery_threshold() -> f64 {
    (-1.0f64).exp()
}

/// Stationary covariance `P = J P J^T + Q` of `z' = J z + w`, `Cov(w) = Q`,
/// by fixed-point iteration.
pub fn stationary_cov_oracle(j: &Matrix2, q: &Cov2) -> Result<Cov2> {
    let rho = spectral_radius(&eig2(j));
    if rho.is_nan() || rho >= 1.0 {
        return Err(FcmsError::NotStable {
            rho,
            context: "no stationary covariance",
        });
    }
    let q_max = max_abs(q);
    if q_max == 0.0 {
        return Ok([[0.0; 2]; 2]);
    }
    let mut p = *q;
    for _ in 0..LYAPUNOV_BUDGET {
        let next = add(&congruence(j, &p), q);
        let change = max_abs(&sub(&next, &p));
        p = next;
        if change <= 1e-14 * q_max {
            return Ok(p);
        }
    }
    Err(FcmsError::IterationBudget {
        what: "stationary covariance iteration",
        iterations: LYAPUNOV_BUDGET,
    })
}

/// `J P J^T`.
pub fn congruence(j: &Matrix2, p: &Cov2) -> Cov2 {
    let j = &j.0;
    let mut jp = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            jp[r][c] = j[r][0] * p[0][c] + j[r][1] * p[1][c];
        }
    }
    let mut out = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            out[r][c] = jp[r][0] * j[c][0] + jp[r][1] * j[c][1];
        }
    }
    out
}

fn add(a: &Cov2, b: &Cov2) -> Cov2 {
    [
        [a[0][0] + b[0][0], a[0][1] + b[0][1]],
        [a[1][0] + b[1][0], a[1][1] + b[1][1]],
    ]
}

fn sub(a: &Cov2, b: &Cov2) -> Cov2 {
    [
        [a[0][0] - b[0][0], a[0][1] - b[0][1]],
        [a[1][0] - b[1][0], a[1][1] - b[1][1]],
    ]
}

fn max_abs(a: &Cov2) -> f64 {
    a.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

fn post_burn_in(series: &[f64], burn_in: usize) -> Result<&[f64]> {
    if series.len() <= burn_in + 2 {
        return Err(FcmsError::InsufficientSamples {
            got: series.len(),
            needed: burn_in + 2,
        });
    }
    Ok(&series[burn_in..])
}

/// Unbiased sample variance of `series[burn_in..]`.
pub fn variance_estimator(series: &[f64], burn_in: usize) -> Result<f64> {
    let z = post_burn_in(series, burn_in)?;
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    Ok(z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0))
}

/// Pearson correlation of consecutive pairs `(z_t, z_{t+1})` after burn-in.
pub fn lag1_autocorr(series: &[f64], burn_in: usize) -> Result<f64> {
    let z = post_burn_in(series, burn_in)?;
    let (a, b) = (&z[..z.len() - 1], &z[1..]);
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(FcmsError::ConstantSeries);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Reduced model with additive truncated Gaussian noise per `spec`.
pub fn noisy_simulate(
    p: &ModelParams,
    spec: &NoiseSpec,
    init: ReducedState,
    t_max: usize,
) -> Result<Trajectory> {
    let noise = (spec.sigma > 0.0).then_some(*spec);
    simulate_with(
        ModelKind::Reduced,
        SystemState::Reduced(init),
        p,
        t_max,
        SimOptions {
            noise,
            ..SimOptions::default()
        },
    )
}

/// First step at which `|d_t| < eps_rec |d0|` holds and keeps holding for a
/// full rotation period `ceil(2 pi / theta)` of the dominant eigenvalue.
pub fn measure_recovery_time(p: &ModelParams, d0: f64, eps_rec: f64) -> Result<usize> {
    if !stability_criterion(p) {
        let rho = spectral_radius(&eig2(&reduced_jacobian(p)?));
        return Err(FcmsError::NotStable {
            rho,
            context: "no recovery outside the stable region",
        });
    }
    if d0 == 0.0 || !d0.is_finite() {
        return Err(FcmsError::Precondition(format!(
            "initial disagreement must be finite and nonzero, got {d0}"
        )));
    }
    if !(eps_rec > 0.0 && eps_rec < 1.0) {
        return Err(FcmsError::Precondition(format!(
            "recovery threshold must lie in (0, 1), got {eps_rec}"
        )));
    }
    let theta = eig2(&reduced_jacobian(p)?)[0].arg().abs();
    let period = if theta > 0.0 {
        (2.0 * std::f64::consts::PI / theta).ceil() as u64
    } else {
        1
    };
    let threshold = eps_rec * d0.abs();

    let mut state = ReducedState::new(0.0, d0);
    let mut start: Option<u64> = None;
    for t in 0..RECOVERY_BUDGET {
        if state.d.abs() < threshold {
            let s = *start.get_or_insert(t);
            if t - s >= period {
                return Ok(s as usize);
            }
        } else {
            start = None;
        }
        state = reduced_step(state, p)?;
    }
    Err(FcmsError::NoRecovery(RECOVERY_BUDGET))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EwsRecord {
    pub beta: f64,
    pub variance: f64,
    pub lag1_ac: f64,
    pub tau_theory: Option<f64>,
    pub tau_measured: Option<f64>,
    pub sample_count: usize,
    pub burn_in: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EwsReport {
    pub records: Vec<EwsRecord>,
    pub noise: NoiseSpec,
    pub prng: &'static str,
}

/// Noisy reduced runs from the origin at each subcritical coupling, with
/// variance and lag-1 autocorrelation of `d` per point. Point `i` uses the
/// seed `spec.seed ^ mix(i)`.
pub fn ews_sweep(
    p: &ModelParams,
    betas: &[f64],
    spec: &NoiseSpec,
    t_max: usize,
    burn_in: usize,
) -> Result<EwsReport> {
    if betas.is_empty() {
        return Err(FcmsError::Precondition("empty coupling grid".into()));
    }
    if betas.windows(2).any(|w| w[1] < w[0]) {
        return Err(FcmsError::Precondition(
            "coupling grid must be ascending".into(),
        ));
    }
    let grid = betas
        .iter()
        .map(|&b| p.with_beta(b))
        .collect::<Result<Vec<_>>>()?;
    let offenders: Vec<f64> = grid
        .iter()
        .filter(|pb| !stability_criterion(pb))
        .map(|pb| pb.beta())
        .collect();
    if !offenders.is_empty() {
        return Err(FcmsError::SupercriticalGrid {
            beta_c: crate::spectral::critical_beta(p),
            offenders,
        });
    }

    let records = grid
        .par_iter()
        .enumerate()
        .map(|(i, pb)| {
            let seed = point_seed(spec.seed, i);
            let tr = noisy_simulate(pb, &spec.with_seed(seed), ReducedState::ORIGIN, t_max)?;
            if let Some(t) = tr.diverged_at {
                return Err(FcmsError::Divergence {
                    field: format!("d at step {t} (beta = {})", pb.beta()),
                });
            }
            let d = tr.disagreement();
            Ok(EwsRecord {
                beta: pb.beta(),
                variance: variance_estimator(&d, burn_in)?,
                lag1_ac: lag1_autocorr(&d, burn_in)?,
                tau_theory: recovery_time_theory(pb).ok(),
                tau_measured: measure_recovery_time(pb, 1.0, default_recovery_threshold())
                    .ok()
                    .map(|t| t as f64),
                sample_count: d.len(),
                burn_in,
                seed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EwsReport {
        records,
        noise: *spec,
        prng: PRNG_NAME,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseTarget;
    use crate::simulate::simulate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn residual(j: &Matrix2, p: &Cov2, q: &Cov2) -> f64 {
        max_abs(&sub(&sub(p, &congruence(j, p)), q))
    }

    #[test]
    fn oracle_closed_forms() {
        let eye = [[1.0, 0.0], [0.0, 1.0]];
        let p = stationary_cov_oracle(&Matrix2([[0.0; 2]; 2]), &eye).unwrap();
        assert_eq!(p, eye);

        let a = 0.8;
        let j = Matrix2([[a, 0.0], [0.0, 0.0]]);
        let p = stationary_cov_oracle(&j, &eye).unwrap();
        assert!((p[0][0] - 1.0 / (1.0 - a * a)).abs() < 1e-12);
        assert!((p[1][1] - 1.0).abs() < 1e-15);
        assert!(p[0][1].abs() < 1e-15);
    }

    #[test]
    fn oracle_residual_near_threshold() {
        let q = [[0.0, 0.0], [0.0, 1e-4]];
        for b in [0.5, 1.0, 1.41, 1.55] {
            let j = reduced_jacobian(&ModelParams::baseline().with_beta(b).unwrap()).unwrap();
            let p = stationary_cov_oracle(&j, &q).unwrap();
            assert!(residual(&j, &p, &q) <= 1e-12 * 1e-4, "beta {b}");
        }
    }

    #[test]
    fn oracle_rejects_unstable() {
        let j = reduced_jacobian(&ModelParams::baseline().with_beta(1.65).unwrap()).unwrap();
        assert!(matches!(
            stationary_cov_oracle(&j, &[[1.0, 0.0], [0.0, 1.0]]),
            Err(FcmsError::NotStable { .. })
        ));
    }

    #[test]
    fn variance_examples() {
        assert_eq!(variance_estimator(&[3.0; 100], 10).unwrap(), 0.0);
        let alt: Vec<f64> = (0..10_000)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let v = variance_estimator(&alt, 0).unwrap();
        assert!((0.99..=1.0002).contains(&v));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let iid: Vec<f64> = (0..100_000)
            .map(|_| 0.01 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let v = variance_estimator(&iid, 0).unwrap();
        assert!((v / 1e-4 - 1.0).abs() < 0.05, "{v}");
        assert!(matches!(
            variance_estimator(&[1.0, 2.0, 3.0], 1),
            Err(FcmsError::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn autocorrelation_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let iid: Vec<f64> = (0..100_000).map(|_| rng.sample(StandardNormal)).collect();
        assert!(lag1_autocorr(&iid, 0).unwrap().abs() <= 0.02);

        assert_eq!(lag1_autocorr(&[4.0; 50], 0), Err(FcmsError::ConstantSeries));

        let mut z = 0.0;
        let ar: Vec<f64> = (0..100_000)
            .map(|_| {
                z = 0.9 * z + rng.sample::<f64, _>(StandardNormal);
                z
            })
            .collect();
        assert!((lag1_autocorr(&ar, 100).unwrap() - 0.9).abs() < 0.02);
    }

    #[test]
    fn zero_noise_matches_deterministic() {
        let p = ModelParams::baseline();
        let spec = NoiseSpec::new(0.0, NoiseTarget::Disagreement, 5).unwrap();
        let init = ReducedState::new(0.3, 1.0);
        let a = noisy_simulate(&p, &spec, init, 300).unwrap();
        let b = simulate(
            ModelKind::Reduced,
            SystemState::Reduced(init),
            &p,
            300,
            None,
        )
        .unwrap();
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn recovery_examples() {
        let p = ModelParams::baseline();
        let eps = default_recovery_threshold();
        let fast = measure_recovery_time(&p, 1.0, eps).unwrap() as f64;
        let slow = measure_recovery_time(&p.with_beta(1.55).unwrap(), 1.0, eps).unwrap() as f64;
        let tau_fast = recovery_time_theory(&p).unwrap();
        let tau_slow = recovery_time_theory(&p.with_beta(1.55).unwrap()).unwrap();
        assert!(fast / tau_fast > 0.5 && fast / tau_fast < 2.0, "{fast}");
        assert!(slow / tau_slow > 0.5 && slow / tau_slow < 2.0, "{slow}");
        assert!(slow / fast >= 10.0);
        // Scale invariance in d0.
        assert_eq!(
            measure_recovery_time(&p, 1.0, eps).unwrap(),
            measure_recovery_time(&p, -4.0, eps).unwrap()
        );
    }

    #[test]
    fn recovery_is_monotone_on_the_stable_grid() {
        let p = ModelParams::baseline();
        let eps = default_recovery_threshold();
        let times: Vec<usize> = [0.5, 1.0, 1.41, 1.55]
            .iter()
            .map(|&b| measure_recovery_time(&p.with_beta(b).unwrap(), 2.0, eps).unwrap())
            .collect();
        assert!(times.windows(2).all(|w| w[1] >= w[0]), "{times:?}");
    }

    #[test]
    fn recovery_preconditions() {
        let p = ModelParams::baseline();
        assert!(measure_recovery_time(&p.with_beta(1.65).unwrap(), 1.0, 0.3).is_err());
        assert!(measure_recovery_time(&p, 0.0, 0.3).is_err());
        assert!(measure_recovery_time(&p, 1.0, 1.0).is_err());
    }

    #[test]
    fn sweep_rejects_supercritical_points() {
        let spec = NoiseSpec::new(0.01, NoiseTarget::Disagreement, 1).unwrap();
        let err =
            ews_sweep(&ModelParams::baseline(), &[0.5, 1.6, 1.7], &spec, 1000, 10).unwrap_err();
        match err {
            FcmsError::SupercriticalGrid { offenders, .. } => assert_eq!(offenders, vec![1.6, 1.7]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_point_sweep_matches_noisy_simulate() {
        let p = ModelParams::baseline();
        let spec = NoiseSpec::new(0.01, NoiseTarget::Disagreement, 42).unwrap();
        let report = ews_sweep(&p, &[0.5], &spec, 20_000, 1000).unwrap();
        assert_eq!(report.records.len(), 1);
        let rec = &report.records[0];
        let tr =
            noisy_simulate(&p, &spec.with_seed(rec.seed), ReducedState::ORIGIN, 20_000).unwrap();
        let d = tr.disagreement();
        assert_eq!(rec.variance, variance_estimator(&d, 1000).unwrap());
        assert_eq!(rec.lag1_ac, lag1_autocorr(&d, 1000).unwrap());
        assert_eq!(rec.sample_count, 20_001);
        let again = ews_sweep(&p, &[0.5], &spec, 20_000, 1000).unwrap();
        assert_eq!(report, again);
    }
}
