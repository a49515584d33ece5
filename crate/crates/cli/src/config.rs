//! Flat TOML experiment configuration with `key=value` overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use genpgd::Activation;
use serde::Deserialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Linear,
    Sinusoid,
    Sigmoid,
    Phase,
    Mismatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Pgd,
    EpsPgd,
    PhasePgd,
    Myopic,
    Csgm,
    Dpr,
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::Pgd => "pgd",
            SolverKind::EpsPgd => "eps_pgd",
            SolverKind::PhasePgd => "phase_pgd",
            SolverKind::Myopic => "myopic",
            SolverKind::Csgm => "csgm",
            SolverKind::Dpr => "dpr",
        })
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Problem::Linear => "linear",
            Problem::Sinusoid => "sinusoid",
            Problem::Sigmoid => "sigmoid",
            Problem::Phase => "phase",
            Problem::Mismatch => "mismatch",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorSource {
    Random,
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    /// Entries `N(0, 1/m)`.
    Gaussian,
    /// The first `m` rows of a random orthogonal `n×n` matrix.
    Orthonormal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    Fixed,
    /// `η = 1/β̂` from sampled restricted smoothness.
    Auto,
    /// Inside the S-REC window `(1/(2γ̂), 1/γ̂)`.
    Window,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseInitKind {
    OraclePerturb,
    BestOfSamples,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub problem: Problem,
    /// Defaults to the natural solver for `problem`.
    pub solver: Option<SolverKind>,
    /// Solvers compared by `sweep`; empty means `[solver]`.
    pub solvers: Vec<SolverKind>,

    pub latent_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub activation: String,
    pub output_activation: String,
    pub weight_scale: f64,
    pub bias_scale: f64,
    pub generator: GeneratorSource,
    /// Overrides `generator` and the dimensions above.
    pub weights_file: Option<PathBuf>,
    /// Fixes the network across seeds; otherwise each seed draws its own.
    pub generator_seed: Option<u64>,

    pub matrix: MatrixKind,
    pub m: usize,
    /// Measurement counts for `sweep`; empty means `[m]`.
    pub m_list: Vec<usize>,
    pub seed: u64,
    /// Seeds for `sweep`; empty means `[seed]`.
    pub seeds: Vec<u64>,
    pub noise_std: f64,

    pub outer_steps: usize,
    pub step_size: f64,
    pub step_rule: StepRule,
    pub inner_steps: usize,
    pub inner_rate: f64,
    pub restarts: usize,
    /// Latent-descent baselines.
    pub latent_steps: usize,
    pub latent_rate: f64,

    /// Innovation sparsity `l`.
    pub sparsity: usize,
    /// Spike height in units of the per-pixel RMS of `G(z*)`.
    pub spike_scale: f64,

    pub phase_init: PhaseInitKind,
    pub init_delta: f64,
    pub init_samples: usize,

    pub srec_pairs: usize,
    pub incoherence_samples: usize,
    /// Objective values at or below this are excluded from rate fits.
    pub rate_floor: f64,

    pub image: bool,
    pub out_dir: Option<PathBuf>,
    /// Sweep worker threads; 0 uses every core.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: Problem::Linear,
            solver: None,
            solvers: Vec::new(),
            latent_dim: 20,
            hidden: vec![200],
            output_dim: 784,
            activation: "relu".into(),
            output_activation: "identity".into(),
            weight_scale: 1.0,
            bias_scale: 0.0,
            generator: GeneratorSource::Random,
            weights_file: None,
            generator_seed: None,
            matrix: MatrixKind::Gaussian,
            m: 200,
            m_list: Vec::new(),
            seed: 0,
            seeds: Vec::new(),
            noise_std: 0.0,
            outer_steps: 15,
            step_size: 0.5,
            step_rule: StepRule::Fixed,
            inner_steps: 200,
            inner_rate: 0.01,
            restarts: 1,
            latent_steps: 3000,
            latent_rate: 0.01,
            sparsity: 5,
            spike_scale: 5.0,
            phase_init: PhaseInitKind::BestOfSamples,
            init_delta: 0.1,
            init_samples: 200,
            srec_pairs: 500,
            incoherence_samples: 500,
            rate_floor: 1e-8,
            image: true,
            out_dir: None,
            workers: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn default_solver(problem: Problem) -> SolverKind {
        match problem {
            Problem::Linear => SolverKind::Pgd,
            Problem::Sinusoid | Problem::Sigmoid => SolverKind::EpsPgd,
            Problem::Phase => SolverKind::PhasePgd,
            Problem::Mismatch => SolverKind::Myopic,
        }
    }

    pub fn solver(&self) -> SolverKind {
        self.solver.unwrap_or_else(|| Self::default_solver(self.problem))
    }

    pub fn sweep_solvers(&self) -> Vec<SolverKind> {
        if self.solvers.is_empty() {
            vec![self.solver()]
        } else {
            self.solvers.clone()
        }
    }

    pub fn sweep_ms(&self) -> Vec<usize> {
        if self.m_list.is_empty() {
            vec![self.m]
        } else {
            self.m_list.clone()
        }
    }

    pub fn sweep_seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.seed]
        } else {
            self.seeds.clone()
        }
    }

    pub fn hidden_activation(&self) -> Activation {
        self.activation.parse().expect("validated")
    }

    pub fn final_activation(&self) -> Activation {
        self.output_activation.parse().expect("validated")
    }

    /// Output directory: the config value, then `$GENPGD_OUT`, then `genpgd-out`.
    pub fn resolved_out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os("GENPGD_OUT").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("genpgd-out"))
    }

    /// Checks every field, reporting the first problem against `origin`.
    pub fn validate(&self, origin: &Origin) -> Result<()> {
        let fail = |key: &str, msg: String| Err(anyhow!("{}: `{key}` {msg}", origin.locate(key)));
        let positive = |key: &str, v: f64| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                fail(key, format!("must be positive and finite, got {v}"))
            }
        };
        let at_least_one = |key: &str, v: usize| -> Result<()> {
            if v >= 1 {
                Ok(())
            } else {
                fail(key, "must be at least 1".into())
            }
        };
        for key in ["activation", "output_activation"] {
            let v = if key == "activation" { &self.activation } else { &self.output_activation };
            if v.parse::<Activation>().is_err() {
                return fail(key, format!("must be one of identity, relu, tanh; got {v:?}"));
            }
        }
        if self.weights_file.is_none() {
            at_least_one("latent_dim", self.latent_dim)?;
            at_least_one("output_dim", self.output_dim)?;
            if self.hidden.contains(&0) {
                return fail("hidden", "widths must be at least 1".into());
            }
            if self.generator == GeneratorSource::Identity && self.latent_dim != self.output_dim {
                return fail("latent_dim", "must equal output_dim for the identity generator".into());
            }
        }
        if !(self.weight_scale >= 0.0 && self.weight_scale.is_finite()) {
            return fail("weight_scale", "must be nonnegative".into());
        }
        if !(self.bias_scale >= 0.0 && self.bias_scale.is_finite()) {
            return fail("bias_scale", "must be nonnegative".into());
        }
        at_least_one("m", self.m)?;
        if self.m_list.contains(&0) {
            return fail("m_list", "entries must be at least 1".into());
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return fail("noise_std", "must be nonnegative".into());
        }
        at_least_one("outer_steps", self.outer_steps)?;
        positive("step_size", self.step_size)?;
        at_least_one("inner_steps", self.inner_steps)?;
        positive("inner_rate", self.inner_rate)?;
        at_least_one("restarts", self.restarts)?;
        at_least_one("latent_steps", self.latent_steps)?;
        positive("latent_rate", self.latent_rate)?;
        if !(self.spike_scale >= 0.0 && self.spike_scale.is_finite()) {
            return fail("spike_scale", "must be nonnegative".into());
        }
        if !(self.init_delta >= 0.0 && self.init_delta.is_finite()) {
            return fail("init_delta", "must be nonnegative".into());
        }
        at_least_one("init_samples", self.init_samples)?;
        at_least_one("srec_pairs", self.srec_pairs)?;
        at_least_one("incoherence_samples", self.incoherence_samples)?;
        if !(self.rate_floor >= 0.0) {
            return fail("rate_floor", "must be nonnegative".into());
        }

        let solvers = if self.solvers.is_empty() { vec![self.solver()] } else { self.solvers.clone() };
        let key = if self.solvers.is_empty() { "solver" } else { "solvers" };
        for s in solvers {
            let phase = self.problem == Problem::Phase;
            let ok = match s {
                SolverKind::Pgd => matches!(self.problem, Problem::Linear | Problem::Mismatch),
                SolverKind::PhasePgd | SolverKind::Dpr => phase,
                SolverKind::EpsPgd | SolverKind::Myopic | SolverKind::Csgm => !phase,
            };
            if !ok {
                return fail(key, format!("{s} cannot solve the {} problem", self.problem));
            }
            if s == SolverKind::PhasePgd && self.step_rule == StepRule::Auto {
                return fail("step_rule", "auto is not available for phase_pgd".into());
            }
        }
        Ok(())
    }
}

/// Where configuration values came from, for error messages.
#[derive(Clone, Debug, Default)]
pub struct Origin {
    path: Option<PathBuf>,
    text: String,
    overrides: Vec<String>,
}

impl Origin {
    /// `path:line` for keys set in the file, `--set key` for overrides,
    /// `default` otherwise.
    pub fn locate(&self, key: &str) -> String {
        if self.overrides.iter().any(|k| k == key) {
            return format!("--set {key}");
        }
        let file = self
            .path
            .as_ref()
            .map_or_else(|| "config".to_string(), |p| p.display().to_string());
        for (i, line) in self.text.lines().enumerate() {
            if let Some(rest) = line.trim_start().strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return format!("{file}:{}", i + 1);
                }
            }
        }
        format!("default value of `{key}`")
    }
}

fn parse_override(item: &str) -> Result<(String, toml::Value)> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| anyhow!("override {item:?} is not of the form key=value"))?;
    let key = key.trim().to_string();
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    Ok((key, value))
}

/// Reads the config file (if any), applies `key=value` overrides in order,
/// and validates the result.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<(ExperimentConfig, Origin)> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => String::new(),
    };
    let label = path.map_or_else(|| "config".to_string(), |p| p.display().to_string());
    let mut cfg: ExperimentConfig = toml::from_str(&text).map_err(|e| anyhow!("{label}: {e}"))?;
    let mut origin = Origin {
        path: path.map(Path::to_path_buf),
        text: text.clone(),
        overrides: Vec::new(),
    };
    if !overrides.is_empty() {
        let mut table: toml::Table = toml::from_str(&text).map_err(|e| anyhow!("{label}: {e}"))?;
        for item in overrides {
            let (key, value) = parse_override(item)?;
            table.insert(key.clone(), value);
            cfg = toml::Value::Table(table.clone())
                .try_into()
                .map_err(|e| anyhow!("--set {key}: {e}"))?;
            origin.overrides.push(key);
        }
    }
    cfg.validate(&origin)?;
    Ok((cfg, origin))
}

/// Parses a config string directly; used by tests and embedding code.
pub fn from_str(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| anyhow!("config: {e}"))?;
    let origin = Origin {
        text: text.to_string(),
        ..Origin::default()
    };
    cfg.validate(&origin)?;
    Ok(cfg)
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    if !dir.is_dir() {
        bail!("{} is not a directory", dir.display());
    }
    Ok(())
}
