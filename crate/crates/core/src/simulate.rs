//! Repeated application of a stepper, with optional noise and
//! truncate-and-flag divergence handling.

use serde::Serialize;

use crate::dynamics::{
    global_signal, incentive_field, pair_step, perturbed_step, reduced_step, saturated_step,
    Perturbation,
};
use crate::error::{FcmsError, Result};
use crate::meanfield::{meanfield_step_in_place, MeanFieldWorkspace};
use crate::noise::{NoiseSpec, NoiseStream, NoiseTarget};
use crate::params::ModelParams;
use crate::state::{PairState, PopulationState, ReducedState};

/// Seed used when noise is active and the caller gave none.
pub const DEFAULT_SEED: u64 = 42;

/// A run is flagged divergent once `max |state|` exceeds this multiple of
/// `max(1, max |initial state|)`, or on any non-finite value.
pub const DEFAULT_DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Reduced,
    Pair,
    Saturated,
    Perturbed(Perturbation),
    MeanField,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Reduced => "reduced",
            Self::Pair => "pair",
            Self::Saturated => "saturated",
            Self::Perturbed(_) => "perturbed",
            Self::MeanField => "meanfield",
        }
    }

    pub fn default_noise_target(&self) -> NoiseTarget {
        match self {
            Self::Pair | Self::MeanField => NoiseTarget::PerAgent,
            _ => NoiseTarget::Disagreement,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemState {
    Reduced(ReducedState),
    Pair(PairState),
    Population(PopulationState),
}

impl SystemState {
    fn max_abs(&self) -> f64 {
        match self {
            Self::Reduced(r) => r.max_abs(),
            Self::Pair(p) => p.max_abs(),
            Self::Population(pop) => pop
                .x()
                .iter()
                .chain(pop.s())
                .fold(0.0_f64, |m, v| m.max(v.abs())),
        }
    }

    pub fn as_reduced(&self) -> Option<ReducedState> {
        match self {
            Self::Reduced(r) => Some(*r),
            Self::Pair(p) => Some(p.project()),
            Self::Population(_) => None,
        }
    }
}

/// One row of a trajectory.
///
/// For reduced kinds `s`/`d` are the state itself; for the pair model `d`
/// is `x1 - x2` and `x1`/`x2` are filled in. Mean-field rows carry
/// population summaries: `s` is the RMS environment trace, `d` the
/// cross-sectional standard deviation of `x`, `g1`/`g2` the smallest and
/// largest incentive and `l_global` the mean of `S_i^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: usize,
    pub s: f64,
    pub d: f64,
    pub g1: f64,
    pub g2: f64,
    pub l_global: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub kind: ModelKind,
    pub records: Vec<StepRecord>,
    pub params: ModelParams,
    pub seed: Option<u64>,
    pub diverged_at: Option<usize>,
    pub final_state: SystemState,
}

impl Trajectory {
    pub fn disagreement(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.d).collect()
    }

    pub fn final_record(&self) -> &StepRecord {
        self.records
            .last()
            .expect("trajectory has the initial record")
    }

    /// `true` when the run did not diverge and `|d|` stayed below `tol` over
    /// the last `window` records.
    pub fn converged(&self, tol: f64, window: usize) -> bool {
        if self.diverged_at.is_some() {
            return false;
        }
        let n = self.records.len();
        self.records[n.saturating_sub(window.max(1))..]
            .iter()
            .all(|r| r.d.abs() < tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub noise: Option<NoiseSpec>,
    pub divergence_factor: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            noise: None,
            divergence_factor: DEFAULT_DIVERGENCE_FACTOR,
        }
    }
}

/// Runs `kind` for `t_max` steps from `init`.
///
/// When `p.noise_sigma() > 0`, truncated Gaussian noise is added after each
/// deterministic update (on `d` for reduced kinds, on each agent for the
/// pair and mean-field models), drawn from `seed` or [`DEFAULT_SEED`].
pub fn simulate(
    kind: ModelKind,
    init: SystemState,
    p: &ModelParams,
    t_max: usize,
    seed: Option<u64>,
) -> Result<Trajectory> {
    let noise = if p.noise_sigma() > 0.0 {
        Some(NoiseSpec::with_bound(
            p.noise_sigma(),
            p.noise_bound(),
            kind.default_noise_target(),
            seed.unwrap_or(DEFAULT_SEED),
        )?)
    } else {
        None
    };
    simulate_with(
        kind,
        init,
        p,
        t_max,
        SimOptions {
            noise,
            ..SimOptions::default()
        },
    )
}

pub fn simulate_with(
    kind: ModelKind,
    init: SystemState,
    p: &ModelParams,
    t_max: usize,
    opts: SimOptions,
) -> Result<Trajectory> {
    if t_max == 0 {
        return Err(FcmsError::Precondition("t_max must be >= 1".into()));
    }
    match (&kind, &init) {
        (ModelKind::Pair, SystemState::Pair(_))
        | (ModelKind::MeanField, SystemState::Population(_)) => {}
        (
            ModelKind::Reduced | ModelKind::Saturated | ModelKind::Perturbed(_),
            SystemState::Reduced(_),
        ) => {}
        _ => {
            return Err(FcmsError::DimensionMismatch(format!(
                "initial state does not fit the {} model",
                kind.name()
            )))
        }
    }
    match &init {
        SystemState::Reduced(r) => r.check_finite()?,
        SystemState::Pair(pr) => pr.check_finite()?,
        SystemState::Population(pop) => pop.check_finite()?,
    }

    let mut noise = opts.noise.map(|spec| (spec.target, spec.stream()));
    let mut ws = MeanFieldWorkspace::default();
    let mut tr = iterate(kind, init, p, t_max, opts.divergence_factor, |state| {
        advance(kind, state, p, &mut ws, noise.as_mut())
    })?;
    tr.seed = opts.noise.map(|spec| spec.seed);
    Ok(tr)
}

/// Drives an arbitrary one-step map with the trajectory bookkeeping of
/// [`simulate`]. A [`FcmsError::Divergence`] from the map, a non-finite
/// state or one beyond the divergence limit truncates the run.
pub(crate) fn iterate<F>(
    kind: ModelKind,
    init: SystemState,
    p: &ModelParams,
    t_max: usize,
    divergence_factor: f64,
    mut step: F,
) -> Result<Trajectory>
where
    F: FnMut(&SystemState) -> Result<SystemState>,
{
    let limit = divergence_factor * init.max_abs().max(1.0);
    let mut records = Vec::with_capacity(t_max + 1);
    records.push(record(0, &init, p));
    let mut state = init;
    let mut diverged_at = None;

    for t in 1..=t_max {
        let next = match step(&state) {
            Ok(next) => next,
            Err(FcmsError::Divergence { .. }) => {
                diverged_at = Some(t);
                break;
            }
            Err(e) => return Err(e),
        };
        let size = next.max_abs();
        if !size.is_finite() || size > limit {
            diverged_at = Some(t);
            break;
        }
        records.push(record(t, &next, p));
        state = next;
    }

    Ok(Trajectory {
        kind,
        records,
        params: p.clone(),
        seed: None,
        diverged_at,
        final_state: state,
    })
}

fn advance(
    kind: ModelKind,
    state: &SystemState,
    p: &ModelParams,
    ws: &mut MeanFieldWorkspace,
    noise: Option<&mut (NoiseTarget, NoiseStream)>,
) -> Result<SystemState> {
    Ok(match (kind, state) {
        (ModelKind::Pair, SystemState::Pair(pr)) => {
            let mut next = pair_step(*pr, p)?;
            if let Some((target, stream)) = noise {
                match target {
                    NoiseTarget::Disagreement => {
                        let xi = stream.draw();
                        next.x1 += 0.5 * xi;
                        next.x2 -= 0.5 * xi;
                    }
                    NoiseTarget::PerAgent => {
                        next.x1 += stream.draw();
                        next.x2 += stream.draw();
                    }
                }
            }
            SystemState::Pair(next)
        }
        (ModelKind::MeanField, SystemState::Population(pop)) => {
            let mut next = pop.clone();
            meanfield_step_in_place(&mut next, p, ws)?;
            if let Some((_, stream)) = noise {
                let (x, _) = next.parts_mut();
                for v in x.iter_mut() {
                    *v += stream.draw();
                }
            }
            SystemState::Population(next)
        }
        (kind, SystemState::Reduced(r)) => {
            let mut next = match kind {
                ModelKind::Saturated => saturated_step(*r, p)?,
                ModelKind::Perturbed(pert) => perturbed_step(*r, p, |s, d| pert.eval(s, d))?,
                _ => reduced_step(*r, p)?,
            };
            if let Some((target, stream)) = noise {
                next.d += match target {
                    NoiseTarget::Disagreement => stream.draw(),
                    NoiseTarget::PerAgent => stream.draw() - stream.draw(),
                };
            }
            SystemState::Reduced(next)
        }
        _ => unreachable!("kind/state agreement is checked before the loop"),
    })
}

fn record(t: usize, state: &SystemState, p: &ModelParams) -> StepRecord {
    match state {
        SystemState::Reduced(r) => reduced_record(t, *r, p),
        SystemState::Pair(pr) => StepRecord {
            x1: Some(pr.x1),
            x2: Some(pr.x2),
            ..reduced_record(t, pr.project(), p)
        },
        SystemState::Population(pop) => {
            let n = pop.len() as f64;
            let ms = pop.s().iter().map(|v| v * v).sum::<f64>() / n;
            let (lo, hi) = pop
                .s()
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            let two_beta = 2.0 * p.beta();
            StepRecord {
                t,
                s: ms.sqrt(),
                d: pop.variance_x().sqrt(),
                g1: -(two_beta * hi),
                g2: -(two_beta * lo),
                l_global: ms,
                x1: None,
                x2: None,
            }
        }
    }
}

fn reduced_record(t: usize, r: ReducedState, p: &ModelParams) -> StepRecord {
    let (g1, g2) = incentive_field(r.s, p).unwrap_or((f64::NAN, f64::NAN));
    StepRecord {
        t,
        s: r.s,
        d: r.d,
        g1,
        g2,
        l_global: global_signal(r.s),
        x1: None,
        x2: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reduced(s: f64, d: f64) -> SystemState {
        SystemState::Reduced(ReducedState::new(s, d))
    }

    #[test]
    fn origin_stays_put() {
        let tr = simulate(
            ModelKind::Reduced,
            reduced(0.0, 0.0),
            &ModelParams::baseline(),
            100,
            None,
        )
        .unwrap();
        assert_eq!(tr.records.len(), 101);
        assert!(tr.records.iter().all(|r| r.s == 0.0 && r.d == 0.0));
        assert!(tr.records.iter().enumerate().all(|(i, r)| r.t == i));
        assert_eq!(tr.seed, None);
    }

    #[test]
    fn baseline_decay() {
        let tr = simulate(
            ModelKind::Reduced,
            reduced(0.0, 2.0),
            &ModelParams::baseline(),
            2000,
            None,
        )
        .unwrap();
        assert!(tr.final_record().d.abs() <= 1e-12);
        assert!(tr.diverged_at.is_none());
    }

    #[test]
    fn supercritical_run_is_truncated() {
        let p = ModelParams::baseline().with_beta(1.65).unwrap();
        let tr = simulate(ModelKind::Reduced, reduced(0.0, 2.0), &p, 5000, None).unwrap();
        let at = tr.diverged_at.expect("diverges");
        assert!(at < 5000);
        assert_eq!(tr.records.len(), at);
        assert_eq!(tr.records.last().unwrap().t, at - 1);
    }

    #[test]
    fn kind_and_state_must_agree() {
        let p = ModelParams::baseline();
        assert!(matches!(
            simulate(ModelKind::Pair, reduced(0.0, 1.0), &p, 10, None),
            Err(FcmsError::DimensionMismatch(_))
        ));
        assert!(simulate(ModelKind::Reduced, reduced(0.0, 1.0), &p, 0, None).is_err());
    }

    #[test]
    fn pair_records_carry_agents() {
        let p = ModelParams::baseline();
        let tr = simulate(
            ModelKind::Pair,
            SystemState::Pair(PairState::new(1.0, -1.0, 0.0)),
            &p,
            3,
            None,
        )
        .unwrap();
        let r1 = tr.records[1];
        assert_eq!(
            (r1.x1, r1.x2, r1.s, r1.d),
            (Some(1.0), Some(-1.0), 1.0, 2.0)
        );
        assert_eq!((r1.g1, r1.g2), (-1.0, 1.0));
    }

    #[test]
    fn noise_is_seeded() {
        let p = ModelParams::baseline().with_noise(0.01, 3.0).unwrap();
        let a = simulate(ModelKind::Reduced, reduced(0.0, 0.0), &p, 500, Some(9)).unwrap();
        let b = simulate(ModelKind::Reduced, reduced(0.0, 0.0), &p, 500, Some(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.seed, Some(9));
        assert!(a.records.iter().any(|r| r.d != 0.0));
    }

    #[test]
    fn meanfield_summary_rows() {
        let p = ModelParams::baseline();
        let pop = PopulationState::at_rest(vec![1.0, -1.0, 0.5, -0.5]).unwrap();
        let tr = simulate(
            ModelKind::MeanField,
            SystemState::Population(pop),
            &p,
            50,
            None,
        )
        .unwrap();
        let r0 = tr.records[0];
        assert_eq!(r0.s, 0.0);
        assert!((r0.d - (0.625f64).sqrt()).abs() < 1e-15);
        assert!(tr.records.iter().all(|r| r.g1 <= r.g2));
    }
}
