//! Planted instances and solver dispatch.

use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use genpgd::diagnostics::{convergence_rate, empirical_srec, recon_error, sign_invariant_dist, window_step_size};
use genpgd::measurement::MeasurementModel;
use genpgd::numerics::{gaussian_matrix, orthonormal_matrix, DenseMatrix, RngStream};
use genpgd::objectives::Objective;
use genpgd::solvers::{
    csgm_baseline, dpr_baseline, eps_pgd, myopic_eps_pgd, phase_init, phase_pgd, pgd_linear, LatentDescentConfig,
    PhaseInit, SparseInnovation,
};
use genpgd::{
    Generator, GeneratorSpec, LatentInit, Link, LossKind, Matrix, ProjectionConfig, SolveTrace, SolverConfig, StepSize,
    Vector,
};

use crate::config::{ExperimentConfig, GeneratorSource, MatrixKind, PhaseInitKind, Problem, SolverKind, StepRule};

/// Stream indices under the instance seed. Streams 0 and 1 belong to the
/// solver (projection and step-size estimation).
pub mod streams {
    pub const GENERATOR: u64 = 10;
    pub const TRUTH: u64 = 11;
    pub const MATRIX: u64 = 12;
    pub const NOISE: u64 = 13;
    pub const INIT: u64 = 14;
    pub const SREC: u64 = 15;
    pub const DIAGNOSTICS: u64 = 16;
}

pub struct Instance {
    pub seed: u64,
    pub m: usize,
    pub g: Generator,
    pub model: Arc<MeasurementModel<f64>>,
    pub y: Vector,
    pub x_true: Vector,
    pub z_true: Vector,
    pub innovation: Option<SparseInnovation<f64>>,
}

impl Instance {
    pub fn a(&self) -> &Matrix {
        self.model.matrix()
    }

    pub fn n(&self) -> usize {
        self.x_true.len()
    }
}

pub fn generator_spec(cfg: &ExperimentConfig) -> GeneratorSpec {
    GeneratorSpec {
        latent_dim: cfg.latent_dim,
        hidden: cfg.hidden.clone(),
        output_dim: cfg.output_dim,
        activation: cfg.hidden_activation(),
        output_activation: cfg.final_activation(),
        weight_scale: cfg.weight_scale,
        bias_scale: cfg.bias_scale,
    }
}

pub fn build_generator(cfg: &ExperimentConfig, seed: u64) -> Result<Generator> {
    if let Some(path) = &cfg.weights_file {
        return Generator::load_weights(path).with_context(|| format!("loading {}", path.display()));
    }
    Ok(match cfg.generator {
        GeneratorSource::Identity => Generator::identity(cfg.output_dim),
        GeneratorSource::Random => {
            let gseed = cfg.generator_seed.unwrap_or(seed);
            Generator::random(&generator_spec(cfg), &mut RngStream::with_stream(gseed, streams::GENERATOR))?
        }
    })
}

pub fn build_matrix(kind: MatrixKind, m: usize, n: usize, seed: u64) -> Result<Matrix> {
    let mut rng = RngStream::with_stream(seed, streams::MATRIX);
    match kind {
        MatrixKind::Gaussian => Ok(gaussian_matrix(m, n, 1.0 / m as f64, &mut rng)?),
        MatrixKind::Orthonormal => {
            anyhow::ensure!(m <= n, "an orthonormal matrix needs m <= n, got m = {m}, n = {n}");
            let q = orthonormal_matrix::<f64>(n, &mut rng)?;
            Ok(DenseMatrix::from_row_major(m, n, q.as_slice()[..m * n].to_vec())?)
        }
    }
}

pub fn link_for(problem: Problem) -> Link {
    match problem {
        Problem::Linear | Problem::Mismatch => Link::Linear,
        Problem::Sinusoid => Link::Sinusoid,
        Problem::Sigmoid => Link::Sigmoid,
        Problem::Phase => Link::Magnitude,
    }
}

/// A planted instance. The generator, truth and matrix come from separate
/// streams of `seed`, so `x*` does not depend on `m`.
pub fn build_instance(cfg: &ExperimentConfig, m: usize, seed: u64) -> Result<Instance> {
    let g = build_generator(cfg, seed)?;
    let n = g.output_dim();
    let mut truth_rng = RngStream::with_stream(seed, streams::TRUTH);
    let sample = g.sample_range(&mut truth_rng, false);
    let (x_true, innovation) = if cfg.problem == Problem::Mismatch {
        let rms = sample.x.norm() / (n as f64).sqrt();
        let inn = SparseInnovation::planted_spikes(n, cfg.sparsity, cfg.spike_scale * rms, &mut truth_rng)?;
        (sample.x.add(&inn.v), Some(inn))
    } else {
        (sample.x, None)
    };
    let a = build_matrix(cfg.matrix, m, n, seed)?;
    let model = Arc::new(MeasurementModel::new(a, link_for(cfg.problem)));
    let mut y = if cfg.noise_std > 0.0 {
        model.observe_noisy(&x_true, cfg.noise_std, &mut RngStream::with_stream(seed, streams::NOISE))?
    } else {
        model.observe(&x_true)?
    };
    if cfg.problem == Problem::Phase {
        y = y.map(|v| v.max(0.0));
    }
    Ok(Instance {
        seed,
        m,
        g,
        model,
        y,
        x_true,
        z_true: sample.z,
        innovation,
    })
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub solver: SolverKind,
    pub trace: SolveTrace,
    pub x_hat: Vector,
    /// `‖x̂ − x*‖²/n`; sign-invariant for phase retrieval.
    pub per_pixel_error: f64,
    pub objective: f64,
    pub alpha_fit: Option<f64>,
    pub inner_updates: usize,
    pub step_size: f64,
    /// Whether the recovered innovation support matches the planted one.
    pub support_recovered: Option<bool>,
    pub innovation_norm: Option<f64>,
    pub wall_time: Duration,
}

pub fn solver_config(cfg: &ExperimentConfig, inst: &Instance) -> Result<SolverConfig> {
    let proj = ProjectionConfig::new(cfg.inner_steps, cfg.inner_rate).with_restarts(cfg.restarts);
    let mut sc = SolverConfig::new(cfg.outer_steps, cfg.step_size, proj)
        .with_seed(inst.seed)
        .with_truth(inst.x_true.clone());
    sc.step_size = match cfg.step_rule {
        StepRule::Fixed => StepSize::Fixed(cfg.step_size),
        StepRule::Auto => StepSize::Auto { pairs: cfg.srec_pairs },
        StepRule::Window => {
            let mut rng = RngStream::with_stream(inst.seed, streams::SREC);
            let srec = empirical_srec(inst.a(), &inst.g, cfg.srec_pairs, &mut rng)?;
            StepSize::Fixed(window_step_size(&srec)?)
        }
    };
    Ok(sc)
}

pub fn objective(inst: &Instance) -> Result<Objective<f64>> {
    Ok(Objective::new(
        inst.model.clone(),
        inst.y.clone(),
        LossKind::for_link(inst.model.link()),
    )?)
}

pub fn phase_start(cfg: &ExperimentConfig, inst: &Instance) -> Result<Vector> {
    let strategy = match cfg.phase_init {
        PhaseInitKind::OraclePerturb => PhaseInit::OraclePerturb {
            delta: cfg.init_delta,
            truth: Some(inst.x_true.clone()),
        },
        PhaseInitKind::BestOfSamples => PhaseInit::BestOfSamples {
            count: cfg.init_samples,
            unit_norm: false,
        },
    };
    let mut rng = RngStream::with_stream(inst.seed, streams::INIT);
    Ok(phase_init(&inst.y, inst.a(), &inst.g, &strategy, &mut rng)?)
}

fn support(v: &Vector) -> Vec<usize> {
    v.iter().enumerate().filter(|(_, x)| **x != 0.0).map(|(i, _)| i).collect()
}

pub fn run_solver(cfg: &ExperimentConfig, inst: &Instance, solver: SolverKind) -> Result<RunOutcome> {
    let start = Instant::now();
    let mut support_recovered = None;
    let mut innovation_norm = None;
    let trace = match solver {
        SolverKind::Pgd => pgd_linear(&inst.y, inst.a(), &inst.g, &solver_config(cfg, inst)?)?,
        SolverKind::EpsPgd => eps_pgd(&objective(inst)?, &inst.g, &solver_config(cfg, inst)?)?,
        SolverKind::PhasePgd => {
            let x0 = phase_start(cfg, inst)?;
            phase_pgd(&inst.y, inst.a(), &inst.g, &solver_config(cfg, inst)?, &x0)?
        }
        SolverKind::Myopic => {
            let basis = DenseMatrix::identity(inst.n());
            let sol = myopic_eps_pgd(&objective(inst)?, &inst.g, &basis, cfg.sparsity, &solver_config(cfg, inst)?)?;
            if let Some(inn) = &inst.innovation {
                support_recovered = Some(support(&sol.v_hat) == support(&inn.v));
            }
            innovation_norm = Some(sol.v_hat.norm());
            sol.trace
        }
        SolverKind::Csgm | SolverKind::Dpr => {
            let lc = LatentDescentConfig::new(cfg.latent_steps, cfg.latent_rate)
                .with_seed(inst.seed)
                .with_init(LatentInit::Random)
                .with_truth(inst.x_true.clone());
            if solver == SolverKind::Csgm {
                csgm_baseline(&objective(inst)?, &inst.g, &lc)?
            } else {
                dpr_baseline(&inst.y, inst.a(), &inst.g, &lc)?
            }
        }
    };
    let wall_time = start.elapsed();
    let x_hat = trace.x_hat.clone();
    let per_pixel_error = if cfg.problem == Problem::Phase {
        sign_invariant_dist(&x_hat, &inst.x_true)?.powi(2) / inst.n() as f64
    } else {
        recon_error(&x_hat, &inst.x_true)?
    };
    Ok(RunOutcome {
        solver,
        objective: trace.last().objective,
        alpha_fit: convergence_rate(&trace.objective_values(), cfg.rate_floor).ok().map(|f| f.alpha),
        inner_updates: trace.inner_updates,
        step_size: trace.step_size,
        per_pixel_error,
        x_hat,
        trace,
        support_recovered,
        innovation_norm,
        wall_time,
    })
}
