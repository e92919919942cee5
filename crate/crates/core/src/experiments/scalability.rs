//! Population-size scaling of synchronization variance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{FcmsError, Result};
use crate::meanfield::{meanfield_step_in_place, MeanFieldWorkspace};
use crate::noise::{point_seed, NoiseSpec, NoiseTarget, PRNG_NAME};
use crate::params::ModelParams;
use crate::state::{mean, PopulationState};

/// Accepted deviation of the fitted log-log slope from -1.
pub const SLOPE_TOLERANCE: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum ScaleMode {
    /// Final cross-sectional variance of `x` after a noiseless run.
    Deterministic,
    /// Variance of the per-step change of the population mean under
    /// per-agent noise of width `sigma`.
    Noisy { sigma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleSettings {
    pub n_values: Vec<usize>,
    pub mode: ScaleMode,
    pub t_max: usize,
    pub burn_in: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl ScaleSettings {
    pub fn new(n_values: Vec<usize>, mode: ScaleMode) -> Self {
        Self {
            n_values,
            mode,
            t_max: 2000,
            burn_in: 200,
            replicates: 1,
            seed: crate::simulate::DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaleRecord {
    pub n: usize,
    /// Mean over replicates.
    pub variance: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalabilityReport {
    pub mode: ScaleMode,
    pub records: Vec<ScaleRecord>,
    /// Least-squares slope of `log variance` against `log N`; needs at
    /// least two population sizes.
    pub slope: Option<f64>,
    pub slope_ok: Option<bool>,
    pub seed: u64,
    pub prng: &'static str,
}

/// Mean-field runs from `x_i ~ U[-1, 1]`, `S_i = 0` at each population size.
pub fn scalability_sweep(p: &ModelParams, settings: &ScaleSettings) -> Result<ScalabilityReport> {
    let ns = &settings.n_values;
    if ns.is_empty() {
        return Err(FcmsError::Precondition("no population sizes given".into()));
    }
    if let Some(&n) = ns.iter().find(|&&n| n < 2) {
        return Err(FcmsError::PopulationTooSmall(n));
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FcmsError::Precondition(
            "population sizes must be strictly ascending".into(),
        ));
    }
    if settings.replicates == 0 {
        return Err(FcmsError::Precondition("replicates must be >= 1".into()));
    }
    if settings.t_max == 0 {
        return Err(FcmsError::Precondition("t_max must be >= 1".into()));
    }
    if let ScaleMode::Noisy { .. } = settings.mode {
        if settings.burn_in + 2 > settings.t_max {
            return Err(FcmsError::InsufficientSamples {
                got: settings.t_max.saturating_sub(settings.burn_in),
                needed: 2,
            });
        }
    }
    let noise = match settings.mode {
        ScaleMode::Noisy { sigma } => Some(NoiseSpec::with_bound(
            sigma,
            p.noise_bound(),
            NoiseTarget::PerAgent,
            settings.seed,
        )?),
        ScaleMode::Deterministic => None,
    };

    let mut records = Vec::with_capacity(ns.len());
    for (k, &n) in ns.iter().enumerate() {
        let vars = (0..settings.replicates)
            .into_par_iter()
            .map(|r| {
                let seed = point_seed(settings.seed, k * settings.replicates + r);
                run_one(
                    p,
                    n,
                    settings,
                    seed,
                    noise.map(|s| s.with_seed(mix_noise(seed))),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        records.push(ScaleRecord {
            n,
            variance: mean(&vars),
            replicates: settings.replicates,
        });
    }

    let slope = (records.len() >= 2)
        .then(|| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = records
                .iter()
                .map(|r| ((r.n as f64).ln(), r.variance.ln()))
                .unzip();
            loglog_slope(&xs, &ys)
        })
        .transpose()?;
    Ok(ScalabilityReport {
        mode: settings.mode,
        records,
        slope_ok: slope.map(|s| (s + 1.0).abs() <= SLOPE_TOLERANCE),
        slope,
        seed: settings.seed,
        prng: PRNG_NAME,
    })
}

/// `x_i ~ U[-1, 1]` from a seeded generator, `S_i = 0`.
pub fn random_population(n: usize, seed: u64) -> Result<PopulationState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    PopulationState::at_rest(x)
}

// Keeps the noise stream separate from the stream that drew the initial state.
fn mix_noise(seed: u64) -> u64 {
    point_seed(seed, usize::MAX)
}

fn run_one(
    p: &ModelParams,
    n: usize,
    settings: &ScaleSettings,
    seed: u64,
    noise: Option<NoiseSpec>,
) -> Result<f64> {
    let mut pop = random_population(n, seed)?;
    let mut ws = MeanFieldWorkspace::default();

    let Some(spec) = noise else {
        for _ in 0..settings.t_max {
            meanfield_step_in_place(&mut pop, p, &mut ws)?;
        }
        pop.check_finite()?;
        return Ok(pop.variance_x());
    };

    let mut stream = spec.stream();
    let mut kicks = vec![0.0; n];
    let mut increments = Vec::with_capacity(settings.t_max - settings.burn_in);
    let mut prev = pop.mean_x();
    for t in 1..=settings.t_max {
        meanfield_step_in_place(&mut pop, p, &mut ws)?;
        stream.fill(&mut kicks);
        let (x, _) = pop.parts_mut();
        for (v, k) in x.iter_mut().zip(&kicks) {
            *v += k;
        }
        let m = pop.mean_x();
        if t > settings.burn_in {
            increments.push(m - prev);
        }
        prev = m;
    }
    pop.check_finite()?;
    crate::ews::variance_estimator(&increments, 0)
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(FcmsError::DimensionMismatch(format!(
            "{} abscissae vs {} ordinates",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(FcmsError::InsufficientSamples {
            got: xs.len(),
            needed: 2,
        });
    }
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx == 0.0 {
        return Err(FcmsError::ConstantSeries);
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::pair_step;
    use crate::meanfield::meanfield_step;
    use crate::state::PairState;

    #[test]
    fn slope_of_exact_power_law() {
        let xs: Vec<f64> = [1.0f64, 10.0, 100.0].iter().map(|v| v.ln()).collect();
        let ys: Vec<f64> = [2.0f64, 0.2, 0.02].iter().map(|v| v.ln()).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() + 1.0).abs() < 1e-12);
        assert!(loglog_slope(&[1.0], &[1.0]).is_err());
        assert!(loglog_slope(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn deterministic_variance_collapses() {
        let s = ScaleSettings::new(vec![100, 1000], ScaleMode::Deterministic);
        let rep = scalability_sweep(&ModelParams::baseline(), &s).unwrap();
        assert!(rep.records.iter().all(|r| r.variance <= 1e-12));
    }

    #[test]
    fn doubling_population_halves_noise() {
        let mut s = ScaleSettings::new(vec![100, 200], ScaleMode::Noisy { sigma: 0.01 });
        s.replicates = 8;
        s.t_max = 1200;
        let rep = scalability_sweep(&ModelParams::baseline(), &s).unwrap();
        let ratio = rep.records[1].variance / rep.records[0].variance;
        assert!((0.4..=0.6).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn two_agents_follow_the_pair_model() {
        let p = ModelParams::baseline();
        let mut pair = PairState::new(0.4, -0.9, 0.0);
        let mut pop = PopulationState::at_rest(vec![0.4, -0.9]).unwrap();
        for _ in 0..500 {
            pair = pair_step(pair, &p).unwrap();
            pop = meanfield_step(&pop, &p).unwrap();
            assert_eq!(pop.x(), &[pair.x1, pair.x2]);
            assert_eq!(pop.s(), &[pair.s, -pair.s]);
        }
    }

    #[test]
    fn rejects_bad_grids() {
        let p = ModelParams::baseline();
        let bad = |ns: Vec<usize>| {
            scalability_sweep(&p, &ScaleSettings::new(ns, ScaleMode::Deterministic))
        };
        assert!(matches!(
            bad(vec![1, 10]),
            Err(FcmsError::PopulationTooSmall(1))
        ));
        assert!(bad(vec![10, 10]).is_err());
        assert!(bad(vec![]).is_err());
    }

    #[test]
    fn reproducible_with_seed() {
        let s = ScaleSettings::new(vec![50, 100], ScaleMode::Noisy { sigma: 0.1 });
        let p = ModelParams::baseline();
        assert_eq!(
            scalability_sweep(&p, &s).unwrap(),
            scalability_sweep(&p, &s).unwrap()
        );
    }
}
