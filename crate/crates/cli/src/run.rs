//! Subcommand dispatch, file layout and exit codes.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use fcms_core::ews::ews_sweep;
use fcms_core::experiments::{
    ablate_coupling, ablate_dissipation, ablate_persistence, bifurcation_sweep, d_extrema,
    forward_invariance_probe, history_sensitivity, initial_environment_replay, necessity_check,
    phase_portrait, random_population, scalability_sweep, AblationRun, PhaseKind, ScaleSettings,
};
use fcms_core::{
    simulate_with, spectral_report, FcmsError, ModelKind, NoiseSpec, NoiseTarget, PairState,
    ReducedState, SimOptions, SystemState, PRNG_NAME,
};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{Ablation, ConfigError, Format, RunConfig, AUTO};
use crate::output::{emit_sidecar, render_csv, render_json, Cell, CsvRow, RunMetadata};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

/// Noise level for `ews` and noisy `scale` when none is configured.
pub const DEFAULT_EXPERIMENT_SIGMA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Simulate,
    Eigen,
    Sweep,
    Ews,
    Ablate,
    Invariance,
    Phase,
    Scale,
}

impl Subcommand {
    pub const ALL: [Subcommand; 8] = [
        Self::Simulate,
        Self::Eigen,
        Self::Sweep,
        Self::Ews,
        Self::Ablate,
        Self::Invariance,
        Self::Phase,
        Self::Scale,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Eigen => "eigen",
            Self::Sweep => "sweep",
            Self::Ews => "ews",
            Self::Ablate => "ablate",
            Self::Invariance => "invariance",
            Self::Phase => "phase",
            Self::Scale => "scale",
        }
    }

    pub fn about(self) -> &'static str {
        match self {
            Self::Simulate => "Run one trajectory of the chosen model",
            Self::Eigen => "Report the spectrum and stability boundary",
            Self::Sweep => "Deterministic runs across a coupling grid",
            Self::Ews => "Variance and autocorrelation of noisy runs across couplings",
            Self::Ablate => "Remove one structural ingredient and run",
            Self::Invariance => "Probe boundedness and absorption from a box of starts",
            Self::Phase => "One-step displacement field with a trajectory overlay",
            Self::Scale => "Synchronization variance against population size",
        }
    }

    fn default_format(self) -> Format {
        match self {
            Self::Eigen | Self::Invariance => Format::Json,
            _ => Format::Csv,
        }
    }
}

impl FromStr for Subcommand {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown subcommand `{s}`"))
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Model(#[from] FcmsError),
    #[error("output: {0}")]
    Io(#[from] io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::Io(_) => EXIT_IO,
            Self::Model(e) => match e {
                FcmsError::InvalidParameter { .. }
                | FcmsError::Precondition(_)
                | FcmsError::PopulationTooSmall(_)
                | FcmsError::SupercriticalGrid { .. }
                | FcmsError::DimensionMismatch(_)
                | FcmsError::HeterogeneousDamping(_) => EXIT_CONFIG,
                FcmsError::Divergence { .. } => EXIT_DIVERGED,
                _ => EXIT_NUMERICAL,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub metadata: RunMetadata,
    /// Divergence in a mode where it is a failure rather than data.
    pub unexpected_divergence: bool,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.unexpected_divergence {
            EXIT_DIVERGED
        } else {
            EXIT_OK
        }
    }
}

/// What a subcommand produced, before it is written out.
struct Product {
    tables: Vec<(String, Vec<u8>)>,
    report: Value,
    summary: Value,
    diverged_at: Option<usize>,
    diverged: bool,
}

impl Product {
    fn new(report: &impl Serialize) -> Result<Self, RunError> {
        Ok(Self {
            tables: Vec::new(),
            report: serde_json::to_value(report).map_err(io::Error::other)?,
            summary: Value::Null,
            diverged_at: None,
            diverged: false,
        })
    }

    fn table<R: CsvRow>(mut self, name: impl Into<String>, rows: &[R]) -> Result<Self, RunError> {
        self.tables.push((name.into(), render_csv(rows)?));
        Ok(self)
    }

    fn summary(mut self, summary: Value) -> Self {
        self.summary = summary;
        self
    }
}

pub fn run(sub: Subcommand, cfg: &RunConfig) -> Result<RunOutcome, RunError> {
    let started = Instant::now();
    let product = match sub {
        Subcommand::Simulate => simulate_cmd(cfg)?,
        Subcommand::Eigen => eigen_cmd(cfg)?,
        Subcommand::Sweep => sweep_cmd(cfg)?,
        Subcommand::Ews => ews_cmd(cfg)?,
        Subcommand::Ablate => ablate_cmd(cfg)?,
        Subcommand::Invariance => invariance_cmd(cfg)?,
        Subcommand::Phase => phase_cmd(cfg)?,
        Subcommand::Scale => scale_cmd(cfg)?,
    };

    fs::create_dir_all(&cfg.out_dir)?;
    let format = cfg.format.unwrap_or(sub.default_format());
    let names: Vec<String> = match format {
        Format::Csv if !product.tables.is_empty() => product
            .tables
            .iter()
            .map(|(n, _)| format!("{n}.csv"))
            .collect(),
        _ => vec![format!("{sub}.json")],
    };
    let metadata = RunMetadata {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        subcommand: sub.name().to_string(),
        config: effective_echo(sub, cfg, format),
        seed: cfg.seed,
        prng: PRNG_NAME,
        diverged: product.diverged,
        diverged_at: product.diverged_at,
        files: names.clone(),
        summary: product.summary,
    };

    let mut files = Vec::new();
    if names[0].ends_with(".csv") {
        for ((_, bytes), name) in product.tables.iter().zip(&names) {
            let path = cfg.out_dir.join(name);
            fs::write(&path, bytes)?;
            files.push(path);
        }
    } else {
        let path = cfg.out_dir.join(&names[0]);
        fs::write(&path, render_json(&product.report, &metadata)?)?;
        files.push(path);
    }
    let sidecar = cfg.out_dir.join(format!("{sub}.meta.json"));
    emit_sidecar(&metadata, started.elapsed().as_secs_f64(), &sidecar)?;
    files.push(sidecar);

    Ok(RunOutcome {
        files,
        unexpected_divergence: sub == Subcommand::Simulate && product.diverged,
        metadata,
    })
}

impl Subcommand {
    fn default_t_max(self) -> usize {
        match self {
            Self::Sweep => 20_000,
            Self::Ews => 100_000,
            Self::Invariance => 5000,
            _ => 2000,
        }
    }

    fn default_betas(self) -> Vec<f64> {
        match self {
            Self::Ews => vec![0.5, 1.0, 1.41, 1.55],
            _ => vec![0.5, 1.41, 1.55, 1.65],
        }
    }

    fn default_burn_in(self) -> usize {
        match self {
            Self::Ews => 1000,
            _ => 200,
        }
    }

    fn default_sigma(self) -> f64 {
        match self {
            Self::Ews | Self::Scale => DEFAULT_EXPERIMENT_SIGMA,
            _ => 0.0,
        }
    }
}

fn t_max(cfg: &RunConfig, sub: Subcommand) -> usize {
    cfg.t_max.unwrap_or(sub.default_t_max())
}

fn betas(cfg: &RunConfig, sub: Subcommand) -> Vec<f64> {
    cfg.betas.clone().unwrap_or_else(|| sub.default_betas())
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

/// The configuration echo with every `auto` entry replaced by the value
/// the subcommand actually used.
fn effective_echo(sub: Subcommand, cfg: &RunConfig, format: Format) -> BTreeMap<String, String> {
    let mut echo = cfg.echo.clone();
    let mut set = |k: &str, v: String| {
        if echo.get(k).map(String::as_str) == Some(AUTO) {
            echo.insert(k.to_string(), v);
        }
    };
    set("t_max", t_max(cfg, sub).to_string());
    set("betas", join(&betas(cfg, sub)));
    set(
        "burn_in",
        cfg.burn_in.unwrap_or(sub.default_burn_in()).to_string(),
    );
    set(
        "noise_sigma",
        cfg.noise_sigma.unwrap_or(sub.default_sigma()).to_string(),
    );
    let target = match sub {
        Subcommand::Scale => NoiseTarget::PerAgent,
        Subcommand::Ews => NoiseTarget::Disagreement,
        _ => cfg.kind.default_noise_target(),
    };
    set(
        "noise_target",
        cfg.noise_target.unwrap_or(target).as_str().to_string(),
    );
    set(
        "format",
        match format {
            Format::Csv => "csv",
            Format::Json => "json",
        }
        .to_string(),
    );
    echo
}

fn simulate_cmd(cfg: &RunConfig) -> Result<Product, RunError> {
    let init = match cfg.kind {
        ModelKind::Pair => SystemState::Pair(PairState::new(cfg.x1, cfg.x2, cfg.s0)),
        ModelKind::MeanField => {
            SystemState::Population(random_population(cfg.population, cfg.seed)?)
        }
        _ => SystemState::Reduced(ReducedState::new(cfg.s0, cfg.d0)),
    };
    let sigma = cfg.noise_sigma.unwrap_or(0.0);
    let noise = (sigma > 0.0)
        .then(|| {
            NoiseSpec::with_bound(
                sigma,
                cfg.params.noise_bound(),
                cfg.noise_target.unwrap_or(cfg.kind.default_noise_target()),
                cfg.seed,
            )
        })
        .transpose()?;
    let tr = simulate_with(
        cfg.kind,
        init,
        &cfg.params,
        t_max(cfg, Subcommand::Simulate),
        SimOptions {
            noise,
            ..SimOptions::default()
        },
    )?;
    let last = tr.final_record();
    let summary = json!({
        "kind": cfg.kind.name(),
        "steps": last.t,
        "final_abs_d": last.d.abs(),
    });
    let mut p = Product::new(&tr)?
        .table("trajectory", &tr.records)?
        .summary(summary);
    p.diverged_at = tr.diverged_at;
    p.diverged = tr.diverged_at.is_some();
    Ok(p)
}

fn eigen_cmd(cfg: &RunConfig) -> Result<Product, RunError> {
    let rep = spectral_report(&cfg.params)?;
    let summary = json!({ "rho": rep.rho, "beta_c": rep.beta_c, "stable": rep.stable });
    Ok(Product::new(&rep)?
        .table("eigen", &rep.eigenvalues)?
        .summary(summary))
}

fn sweep_cmd(cfg: &RunConfig) -> Result<Product, RunError> {
    let betas = betas(cfg, Subcommand::Sweep);
    let res = bifurcation_sweep(&cfg.params, &betas, t_max(cfg, Subcommand::Sweep), cfg.d0)?;
    let diverged: Vec<f64> = res
        .records
        .iter()
        .filter(|r| r.diverged_at.is_some())
        .map(|r| r.beta)
        .collect();
    let mut p = Product::new(&res)?
        .table("sweep", &res.records)?
        .summary(json!({ "diverged_betas": diverged }));
    p.diverged = !diverged.is_empty();
    Ok(p)
}

fn ews_cmd(cfg: &RunConfig) -> Result<Product, RunError> {
    let betas = betas(cfg, Subcommand::Ews);
    let spec = NoiseSpec::with_bound(
        cfg.noise_sigma.unwrap_or(Subcommand::Ews.default_sigma()),
        cfg.params.noise_bound(),
        cfg.noise_target.unwrap_or(NoiseTarget::Disagreement),
        cfg.seed,
    )?;
    let rep = ews_sweep(
        &cfg.params,
        &betas,
        &spec,
        t_max(cfg, Subcommand::Ews),
        cfg.burn_in.unwrap_or(Subcommand::Ews.default_burn_in()),
    )?;
    let seeds: Vec<u64> = rep.records.iter().map(|r| r.seed).collect();
    Ok(Product::new(&rep)?
        .table("ews", &rep.records)?
        .summary(json!({ "sigma": spec.sigma, "point_seeds": seeds })))
}

struct ReplayRow {
    t: usize,
    a: ReducedState,
    b: ReducedState,
}

impl CsvRow for ReplayRow {
    const HEADER: &'static [&'static str] = &["t", "S_a", "d_a", "S_b", "d_b"];
    fn cells(&self) -> Vec<Cell> {
        vec![
            Cell::Int(self.t as u64),
            Cell::Float(self.a.s),
            Cell::Float(self.a.d),
            Cell::Float(self.b.s),
            Cell::Float(self.b.d),
        ]
    }
}

fn ablate_cmd(cfg: &RunConfig) -> Result<Product, RunError> {
    let t = t_max(cfg, Subcommand::Ablate);
    let init = ReducedState::new(cfg.s0, cfg.d0);
    let structural = |run: AblationRun, name: &str| -> Result<Product, RunError> {
        let summary = json!({
            "ablation": name,
            "rho": run.rho,
            "jacobian": run.jacobian,
        });
        let mut p = Product::new(&run)?
            .table("ablate", &run.trajectory.records)?
            .summary(summary);
        p.diverged_at = run.trajectory.diverged_at;
        p.diverged = p.diverged_at.is_some();
        Ok(p)
    };
    match cfg.ablation {
        Ablation::Coupling => structural(ablate_coupling(&cfg.params, init, t)?, "coupling"),
        Ablation::Persistence => {
            structural(ablate_persistence(&cfg.params, init, t)?, "persistence")
        }
        Ablation::Dissipation => {
            structural(ablate_dissipation(&cfg.params, init, t)?, "dissipation")
        }
        Ablation::Necessity(variant) => {
            let out = necessity_check(
                variant,
                &cfg.params,
                PairState::new(cfg.x1, cfg.x2, cfg.s0),
                t,
            )?;
            let summary = json!({
                "variant": variant,
                "max_deviation_from_free": out.max_deviation_from_free,
                "no_incentive_mediated_coordination": out.no_incentive_mediated_coordination,
            });
            Ok(Product::new(&out)?
                .table("ablate", &out.trajectory.records)?
                .summary(summary))
        }
        Ablation::History => {
            let prof = history_sensitivity(&cfg.params, (cfg.x1, cfg.x2), cfg.s0, cfg.s0_b, t)?;
            Ok(Product::new(&prof)?.table("ablate", &prof.records)?)
        }
        Ablation::Replay => {
            let forget =
                initial_environment_replay(&cfg.params, cfg.d0, cfg.s0, cfg.s0_b, t, true)?;
            let keep = initial_environment_replay(&cfg.params, cfg.d0, cfg.s0, cfg.s0_b, t, false)?;
            let rows: Vec<ReplayRow> = forget
                .a
                .iter()
                .zip(&forget.b)
                .enumerate()
                .map(|(t, (&a, &b))| ReplayRow { t, a, b })
                .collect();
            let summary = json!({
                "memoryless_identical_from": forget.identical_from,
                "persistent_identical_from": keep.identical_from,
            });
            Ok(
                Product::new(&json!({ "memoryless": forget, "persistent": keep }))?
                    .table("ablate", &rows)?
                    .summary(summary),
            )
        }
    }
}

fn invariance_cmd(cfg: &RunConfig) -> Result<Product, RunError> {
    let rep = forward_invariance_probe(
        &cfg.params,
        cfg.radius,
        cfg.samples,
        t_max(cfg, Subcommand::Invariance),
    )?;
    let summary = json!({
        "max_ratio": rep.max_ratio,
        "bounded": rep.bounded,
        "absorbed_fraction": rep.absorbed_fraction,
    });
    Ok(Product::new(&rep)?
        .table("invariance", &rep.samples)?
        .summary(summary))
}

fn phase_cmd(cfg: &RunConfig) -> Result<Product, RunError> {
    let kind = if cfg.phase_saturated {
        PhaseKind::Saturated
    } else {
        PhaseKind::Reduced
    };
    let field = phase_portrait(
        kind,
        &cfg.params,
        cfg.grid_extent,
        cfg.grid_n,
        ReducedState::new(cfg.s0, cfg.d0),
        t_max(cfg, Subcommand::Phase),
    )?;
    let ext = d_extrema(&field.overlay.disagreement());
    let summary = json!({
        "extrema": ext.len(),
        "extrema_shrink": ext.windows(2).all(|w| w[1].abs() < w[0].abs()),
    });
    let mut p = Product::new(&field)?
        .table("phase_grid", &field.grid)?
        .table("phase_overlay", &field.overlay.records)?
        .summary(summary);
    p.diverged_at = field.overlay.diverged_at;
    p.diverged = p.diverged_at.is_some();
    Ok(p)
}

fn scale_cmd(cfg: &RunConfig) -> Result<Product, RunError> {
    let sub = Subcommand::Scale;
    let mut settings =
        ScaleSettings::new(cfg.n_values.clone(), cfg.scale_mode(sub.default_sigma()));
    settings.seed = cfg.seed;
    settings.replicates = cfg.replicates;
    settings.t_max = t_max(cfg, sub);
    settings.burn_in = cfg.burn_in.unwrap_or(sub.default_burn_in());
    let rep = scalability_sweep(&cfg.params, &settings)?;
    let summary = json!({
        "mode": rep.mode,
        "slope": rep.slope,
        "slope_ok": rep.slope_ok,
    });
    Ok(Product::new(&rep)?
        .table("scale", &rep.records)?
        .summary(summary))
}
