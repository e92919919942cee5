//! Removal of coupling, persistence, dissipation and of either half of the
//! incentive pathway, plus history sensitivity of the persistent model.

use serde::Serialize;

use crate::dynamics::{memory_blind_pair_step, memoryless_step, pair_step, reduced_step};
use crate::error::{FcmsError, Result};
use crate::params::ModelParams;
use crate::simulate::{
    iterate, simulate, ModelKind, SystemState, Trajectory, DEFAULT_DIVERGENCE_FACTOR,
};
use crate::spectral::{eig2, reduced_jacobian, spectral_radius, Matrix2};
use crate::state::{PairState, ReducedState};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRun {
    pub trajectory: Trajectory,
    pub jacobian: Matrix2,
    pub rho: f64,
}

fn run_reduced<F>(
    p: &ModelParams,
    init: ReducedState,
    t_max: usize,
    jacobian: Matrix2,
    step: F,
) -> Result<AblationRun>
where
    F: Fn(ReducedState, &ModelParams) -> Result<ReducedState>,
{
    let trajectory = iterate(
        ModelKind::Reduced,
        SystemState::Reduced(init),
        p,
        t_max,
        DEFAULT_DIVERGENCE_FACTOR,
        |s| match s {
            SystemState::Reduced(r) => Ok(SystemState::Reduced(step(*r, p)?)),
            _ => unreachable!("reduced ablations carry reduced states"),
        },
    )?;
    Ok(AblationRun {
        trajectory,
        rho: spectral_radius(&eig2(&jacobian)),
        jacobian,
    })
}

/// `beta = 0`: `S' = (1 - gamma) S`, `d' = d`.
pub fn ablate_coupling(p: &ModelParams, init: ReducedState, t_max: usize) -> Result<AblationRun> {
    let pa = p.ablated(0.0, p.gamma(), p.eta());
    run_reduced(&pa, init, t_max, reduced_jacobian(&pa)?, reduced_step)
}

/// Memoryless environment `S' = beta d`.
pub fn ablate_persistence(
    p: &ModelParams,
    init: ReducedState,
    t_max: usize,
) -> Result<AblationRun> {
    let mut j = reduced_jacobian(p)?;
    j.0[0][0] = 0.0;
    run_reduced(p, init, t_max, j, memoryless_step)
}

/// `gamma = 0`: `S' = S + beta d`.
pub fn ablate_dissipation(
    p: &ModelParams,
    init: ReducedState,
    t_max: usize,
) -> Result<AblationRun> {
    let pa = p.ablated(p.beta(), 0.0, p.eta());
    run_reduced(&pa, init, t_max, reduced_jacobian(&pa)?, reduced_step)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayRun {
    pub memoryless: bool,
    pub a: Vec<ReducedState>,
    pub b: Vec<ReducedState>,
    /// First step from which the two runs agree bitwise for the rest of the
    /// horizon.
    pub identical_from: Option<usize>,
}

/// Two runs that see the same agent input on their first step and differ
/// only in the initial environment; afterwards both are closed-loop. With
/// `memoryless` the environment forgets `S_0` after one step, so the runs
/// coincide from `t = 2`. The persistent environment never forgets.
pub fn initial_environment_replay(
    p: &ModelParams,
    d0: f64,
    s0_a: f64,
    s0_b: f64,
    t_max: usize,
    memoryless: bool,
) -> Result<ReplayRun> {
    if t_max == 0 {
        return Err(FcmsError::Precondition("t_max must be >= 1".into()));
    }
    let step = |st: ReducedState| {
        if memoryless {
            memoryless_step(st, p)
        } else {
            reduced_step(st, p)
        }
    };
    let (a0, b0) = (ReducedState::new(s0_a, d0), ReducedState::new(s0_b, d0));
    let a1 = step(a0)?;
    let b1 = ReducedState::new(step(b0)?.s, a1.d);
    let (mut a, mut b) = (vec![a0, a1], vec![b0, b1]);
    for _ in 1..t_max {
        a.push(step(*a.last().unwrap())?);
        b.push(step(*b.last().unwrap())?);
    }
    let same = |x: &ReducedState, y: &ReducedState| {
        x.s.to_bits() == y.s.to_bits() && x.d.to_bits() == y.d.to_bits()
    };
    let identical_from = match a.iter().zip(&b).rposition(|(x, y)| !same(x, y)) {
        None => Some(0),
        Some(i) if i + 1 < a.len() => Some(i + 1),
        Some(_) => None,
    };
    Ok(ReplayRun {
        memoryless,
        a,
        b,
        identical_from,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NecessityVariant {
    /// `eta = 0`: agents ignore incentives.
    UnresponsiveAgents,
    /// Incentives fixed at `(c, -c)` regardless of the environment.
    MemoryBlindIncentives { c: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NecessityOutcome {
    pub variant: NecessityVariant,
    pub trajectory: Trajectory,
    /// Largest gap between `d_t` and the environment-free prediction
    /// `d_0 + 2 eta c t`.
    pub max_deviation_from_free: f64,
    /// `true` when `d` never responded to the environment.
    pub no_incentive_mediated_coordination: bool,
}

/// Runs the pair model with one half of the incentive pathway removed and
/// checks that the disagreement follows the environment-free prediction.
pub fn necessity_check(
    variant: NecessityVariant,
    p: &ModelParams,
    init: PairState,
    t_max: usize,
) -> Result<NecessityOutcome> {
    let (pa, drift) = match variant {
        NecessityVariant::UnresponsiveAgents => (p.ablated(p.beta(), p.gamma(), 0.0), 0.0),
        NecessityVariant::MemoryBlindIncentives { c } => (p.clone(), 2.0 * p.eta() * c),
    };
    let step = |st: PairState| match variant {
        NecessityVariant::UnresponsiveAgents => pair_step(st, &pa),
        NecessityVariant::MemoryBlindIncentives { c } => memory_blind_pair_step(st, &pa, c),
    };
    let trajectory = iterate(
        ModelKind::Pair,
        SystemState::Pair(init),
        &pa,
        t_max,
        DEFAULT_DIVERGENCE_FACTOR,
        |s| match s {
            SystemState::Pair(pr) => Ok(SystemState::Pair(step(*pr)?)),
            _ => unreachable!("necessity checks carry pair states"),
        },
    )?;
    let d0 = init.disagreement();
    let max_deviation_from_free = trajectory
        .records
        .iter()
        .map(|r| (r.d - (d0 + drift * r.t as f64)).abs())
        .fold(0.0, f64::max);
    let scale = trajectory
        .records
        .iter()
        .map(|r| r.d.abs())
        .fold(1.0, f64::max);
    Ok(NecessityOutcome {
        variant,
        max_deviation_from_free,
        no_incentive_mediated_coordination: max_deviation_from_free <= 1e-9 * scale,
        trajectory,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistoryRecord {
    pub t: usize,
    /// `max |.|` over `(x1, x2, S)` between the two runs.
    pub distance: f64,
    /// `|G1_a - G1_b|`
    pub incentive_gap: f64,
    pub d_a: f64,
    pub d_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistoryProfile {
    pub s0_a: f64,
    pub s0_b: f64,
    pub records: Vec<HistoryRecord>,
}

/// Two pair-model runs from the same agent state but different initial
/// environments.
pub fn history_sensitivity(
    p: &ModelParams,
    x0: (f64, f64),
    s0_a: f64,
    s0_b: f64,
    t_max: usize,
) -> Result<HistoryProfile> {
    if s0_a == s0_b {
        return Err(FcmsError::Precondition(
            "history sensitivity needs two different initial environments".into(),
        ));
    }
    let run = |s0: f64| {
        simulate(
            ModelKind::Pair,
            SystemState::Pair(PairState::new(x0.0, x0.1, s0)),
            &p.clone().with_noise(0.0, p.noise_bound())?,
            t_max,
            None,
        )
    };
    let (a, b) = (run(s0_a)?, run(s0_b)?);
    let records = a
        .records
        .iter()
        .zip(&b.records)
        .map(|(ra, rb)| {
            let gap = |u: Option<f64>, v: Option<f64>| (u.unwrap_or(0.0) - v.unwrap_or(0.0)).abs();
            HistoryRecord {
                t: ra.t,
                distance: gap(ra.x1, rb.x1)
                    .max(gap(ra.x2, rb.x2))
                    .max((ra.s - rb.s).abs()),
                incentive_gap: (ra.g1 - rb.g1).abs(),
                d_a: ra.d,
                d_b: rb.d,
            }
        })
        .collect();
    Ok(HistoryProfile {
        s0_a,
        s0_b,
        records,
    })
}
