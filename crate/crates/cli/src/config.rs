//! Layered run configuration: baseline defaults, then a `key = value`
//! file, then command-line overrides.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fcms_core::experiments::{NecessityVariant, ScaleMode};
use fcms_core::{FcmsError, ModelKind, ModelParams, NoiseTarget, Perturbation};
use thiserror::Error;

/// Marks a value chosen by the subcommand that runs.
pub const AUTO: &str = "auto";

/// Every accepted key with its default and help text. Flags use the same
/// names with `-` in place of `_`.
pub const KEYS: &[(&str, &str, &str)] = &[
    (
        "kind",
        "reduced",
        "model: reduced | pair | saturated | perturbed | meanfield",
    ),
    ("beta", "0.5", "coupling strength"),
    ("gamma", "0.1", "environmental decay, 0 < gamma < 1"),
    ("eta", "0.01", "agent learning rate"),
    ("alpha", "0", "agent damping, one value or a comma list"),
    ("noise_sigma", AUTO, "noise standard deviation"),
    ("noise_bound", "3", "noise truncation in units of sigma"),
    ("noise_target", AUTO, "disagreement | per_agent"),
    (
        "epsilon",
        "0",
        "perturbation strength for the perturbed model",
    ),
    ("perturbation", "cubic", "cubic | sine"),
    ("seed", "42", "PRNG seed"),
    ("t_max", AUTO, "number of steps"),
    ("s0", "0", "initial environment"),
    ("d0", "2", "initial disagreement (reduced kinds)"),
    ("x1", "1", "initial state of agent 1 (pair)"),
    ("x2", "-1", "initial state of agent 2 (pair)"),
    ("population", "100", "agent count for meanfield runs"),
    ("betas", AUTO, "comma list of couplings for sweeps"),
    ("burn_in", AUTO, "steps discarded before statistics"),
    (
        "ablation",
        "coupling",
        "coupling | persistence | dissipation | unresponsive | memory_blind | history | replay",
    ),
    (
        "blind_c",
        "0",
        "constant incentive for the memory_blind ablation",
    ),
    (
        "s0_b",
        "1",
        "second initial environment for history and replay",
    ),
    ("radius", "1", "half-width of the invariance probe box"),
    ("samples", "256", "number of invariance probe points"),
    ("grid_extent", "2", "half-width of the phase grid"),
    ("grid_n", "21", "phase grid points per side"),
    ("phase_kind", "saturated", "reduced | saturated"),
    (
        "n",
        "100,1000,10000,100000",
        "comma list of population sizes",
    ),
    ("mode", "noisy", "noisy | deterministic"),
    ("replicates", "1", "seeds averaged per population size"),
    ("out_dir", "out", "output directory"),
    ("format", AUTO, "csv | json"),
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: expected `key = value`, got `{text}`")]
    Malformed {
        path: PathBuf,
        line: usize,
        text: String,
    },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },
}

impl From<FcmsError> for ConfigError {
    fn from(e: FcmsError) -> Self {
        match e {
            FcmsError::InvalidParameter { name, value, bound } => Self::Invalid {
                key: name.to_string(),
                message: format!("{value} violates {bound}"),
            },
            other => Self::Invalid {
                key: "config".into(),
                message: other.to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ablation {
    Coupling,
    Persistence,
    Dissipation,
    Necessity(NecessityVariant),
    History,
    Replay,
}

/// Fully resolved configuration. Options left `None` take the default of
/// the subcommand that runs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub kind: ModelKind,
    pub noise_sigma: Option<f64>,
    pub noise_target: Option<NoiseTarget>,
    pub seed: u64,
    pub t_max: Option<usize>,
    pub s0: f64,
    pub d0: f64,
    pub x1: f64,
    pub x2: f64,
    pub population: usize,
    pub betas: Option<Vec<f64>>,
    pub burn_in: Option<usize>,
    pub ablation: Ablation,
    pub s0_b: f64,
    pub radius: f64,
    pub samples: usize,
    pub grid_extent: f64,
    pub grid_n: usize,
    pub phase_saturated: bool,
    pub n_values: Vec<usize>,
    pub scale_deterministic: bool,
    pub replicates: usize,
    pub out_dir: PathBuf,
    pub format: Option<Format>,
    /// Resolved `key -> value` text after layering, echoed into metadata.
    pub echo: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn baseline() -> Self {
        Self::resolve(&[]).expect("defaults are valid")
    }

    /// Reads an optional file, then applies `overrides` on top.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut layers = Vec::new();
        if let Some(path) = file {
            let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            layers.push(parse_file(&text, path)?);
        }
        layers.push(
            overrides
                .iter()
                .map(|(k, v)| (k.replace('-', "_"), v.trim().to_string()))
                .collect(),
        );
        Self::resolve(&layers)
    }

    /// Later layers win.
    pub fn resolve(layers: &[BTreeMap<String, String>]) -> Result<Self, ConfigError> {
        let mut map: BTreeMap<String, String> = KEYS
            .iter()
            .map(|(k, v, _)| (k.to_string(), v.to_string()))
            .collect();
        for layer in layers {
            for (k, v) in layer {
                if !KEYS.iter().any(|(key, _, _)| key == k) {
                    return Err(ConfigError::UnknownKey(k.clone()));
                }
                map.insert(k.clone(), v.clone());
            }
        }
        let r = Reader(&map);

        let sigma: Option<f64> = r.opt("noise_sigma")?;
        let params = ModelParams::new(r.get("beta")?, r.get("gamma")?, r.get("eta")?)?
            .with_alpha(r.list("alpha")?.unwrap_or_default())?
            .with_noise(sigma.unwrap_or(0.0), r.get("noise_bound")?)?
            .with_epsilon(r.get("epsilon")?)?;

        let perturbation: Perturbation = r.get("perturbation")?;
        let kind = match r.text("kind") {
            "reduced" => ModelKind::Reduced,
            "pair" => ModelKind::Pair,
            "saturated" => ModelKind::Saturated,
            "perturbed" => ModelKind::Perturbed(perturbation),
            "meanfield" | "mean_field" => ModelKind::MeanField,
            other => return Err(r.bad("kind", format!("unknown model `{other}`"))),
        };
        let blind_c = r.get("blind_c")?;
        let ablation = match r.text("ablation") {
            "coupling" => Ablation::Coupling,
            "persistence" => Ablation::Persistence,
            "dissipation" => Ablation::Dissipation,
            "unresponsive" => Ablation::Necessity(NecessityVariant::UnresponsiveAgents),
            "memory_blind" => {
                Ablation::Necessity(NecessityVariant::MemoryBlindIncentives { c: blind_c })
            }
            "history" => Ablation::History,
            "replay" => Ablation::Replay,
            other => return Err(r.bad("ablation", format!("unknown ablation `{other}`"))),
        };
        let format = match r.text("format") {
            AUTO => None,
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            other => return Err(r.bad("format", format!("expected csv or json, got `{other}`"))),
        };
        let phase_saturated = match r.text("phase_kind") {
            "saturated" => true,
            "reduced" => false,
            other => return Err(r.bad("phase_kind", format!("unknown phase model `{other}`"))),
        };
        let scale_deterministic = match r.text("mode") {
            "noisy" => false,
            "deterministic" => true,
            other => {
                return Err(r.bad(
                    "mode",
                    format!("expected noisy or deterministic, got `{other}`"),
                ))
            }
        };

        let cfg = Self {
            params,
            kind,
            noise_sigma: sigma,
            noise_target: r.opt("noise_target")?,
            seed: r.get("seed")?,
            t_max: r.opt("t_max")?,
            s0: r.get("s0")?,
            d0: r.get("d0")?,
            x1: r.get("x1")?,
            x2: r.get("x2")?,
            population: r.get("population")?,
            betas: r.list("betas")?,
            burn_in: r.opt("burn_in")?,
            ablation,
            s0_b: r.get("s0_b")?,
            radius: r.get("radius")?,
            samples: r.get("samples")?,
            grid_extent: r.get("grid_extent")?,
            grid_n: r.get("grid_n")?,
            phase_saturated,
            n_values: r.list("n")?.unwrap_or_default(),
            scale_deterministic,
            replicates: r.get("replicates")?,
            out_dir: PathBuf::from(r.text("out_dir")),
            format,
            echo: map.clone(),
        };
        cfg.check_ranges()?;
        Ok(cfg)
    }

    fn check_ranges(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, message: &str| {
            Err(ConfigError::Invalid {
                key: key.into(),
                message: message.into(),
            })
        };
        if self.t_max == Some(0) {
            return bad("t_max", "must be >= 1");
        }
        if self.population < 2 {
            return bad("population", "needs at least 2 agents");
        }
        if self.grid_n < 2 {
            return bad("grid_n", "needs at least 2 points per side");
        }
        if self.samples == 0 {
            return bad("samples", "must be >= 1");
        }
        if self.replicates == 0 {
            return bad("replicates", "must be >= 1");
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return bad("radius", "must be finite and > 0");
        }
        if !(self.grid_extent > 0.0 && self.grid_extent.is_finite()) {
            return bad("grid_extent", "must be finite and > 0");
        }
        Ok(())
    }

    pub fn scale_mode(&self, default_sigma: f64) -> ScaleMode {
        if self.scale_deterministic {
            ScaleMode::Deterministic
        } else {
            ScaleMode::Noisy {
                sigma: self.noise_sigma.unwrap_or(default_sigma),
            }
        }
    }
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_file(text: &str, path: &Path) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Malformed {
                path: path.to_path_buf(),
                line: i + 1,
                text: raw.to_string(),
            });
        };
        let key = k.trim().replace('-', "_");
        if key.is_empty() {
            return Err(ConfigError::Malformed {
                path: path.to_path_buf(),
                line: i + 1,
                text: raw.to_string(),
            });
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

struct Reader<'a>(&'a BTreeMap<String, String>);

impl Reader<'_> {
    fn bad(&self, key: &str, message: String) -> ConfigError {
        ConfigError::Invalid {
            key: key.into(),
            message,
        }
    }

    fn text(&self, key: &str) -> &str {
        self.0.get(key).map_or(AUTO, String::as_str)
    }

    fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.text(key) {
            AUTO | "" => Ok(None),
            v => v
                .parse()
                .map(Some)
                .map_err(|e| self.bad(key, format!("cannot parse `{v}`: {e}"))),
        }
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.opt(key)?
            .ok_or_else(|| self.bad(key, "a value is required".into()))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.text(key) {
            AUTO | "" => Ok(None),
            v => v
                .split(',')
                .map(|item| {
                    let item = item.trim();
                    item.parse()
                        .map_err(|e| self.bad(key, format!("cannot parse `{item}`: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
        }
    }
}
