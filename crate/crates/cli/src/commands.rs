//! The `gen`, `solve`, `sweep` and `diagnose` subcommands.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use genpgd::diagnostics::{
    eps_pgd_factors, empirical_srec, incoherence_estimate, myopic_factor, rsc_rss_estimate, theorem1_window_check,
};
use genpgd::numerics::{DenseMatrix, RngStream};
use genpgd::objectives::Objective;
use genpgd::scalar::sign_pos;
use genpgd::StepSize;
use rayon::prelude::*;

use crate::config::{ensure_dir, ExperimentConfig, Problem, SolverKind};
use crate::experiment::{build_generator, build_instance, objective, run_solver, solver_config, streams, RunOutcome};
use crate::output::{fmt_float, image_side, write_pgm_file, write_trace_file};

pub struct GenOutput {
    pub path: PathBuf,
    pub latent_dim: usize,
    pub output_dim: usize,
    pub depth: usize,
    pub diameter: f64,
}

/// Writes the generator's weights to `<out>/generator.bin`.
pub fn cmd_gen(cfg: &ExperimentConfig, out: &mut impl Write) -> Result<GenOutput> {
    let dir = cfg.resolved_out_dir();
    ensure_dir(&dir)?;
    let g = build_generator(cfg, cfg.seed)?;
    let path = dir.join("generator.bin");
    g.save_weights(&path).with_context(|| format!("writing {}", path.display()))?;
    let diameter = g.estimate_diameter(200, false, &mut RngStream::with_stream(cfg.seed, streams::DIAGNOSTICS))?;
    writeln!(
        out,
        "k={} n={} d={} diameter_estimate={} path={}",
        g.latent_dim(),
        g.output_dim(),
        g.depth(),
        fmt_float(diameter),
        path.display()
    )?;
    Ok(GenOutput {
        path,
        latent_dim: g.latent_dim(),
        output_dim: g.output_dim(),
        depth: g.depth(),
        diameter,
    })
}

/// One sweep cell; wall time is kept out of the deterministic table.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub seed: u64,
    pub m: usize,
    pub solver: SolverKind,
    pub per_pixel_error: f64,
    pub objective: f64,
    pub alpha_fit: Option<f64>,
    pub inner_updates: usize,
    pub wall_time_s: f64,
}

impl ResultRow {
    fn from_outcome(seed: u64, m: usize, o: &RunOutcome) -> Self {
        Self {
            seed,
            m,
            solver: o.solver,
            per_pixel_error: o.per_pixel_error,
            objective: o.objective,
            alpha_fit: o.alpha_fit,
            inner_updates: o.inner_updates,
            wall_time_s: o.wall_time.as_secs_f64(),
        }
    }

    pub fn summary_line(&self) -> String {
        format!(
            "seed={} m={} solver={} per_pixel_error={} objective={} alpha_fit={} inner_updates={}",
            self.seed,
            self.m,
            self.solver,
            fmt_float(self.per_pixel_error),
            fmt_float(self.objective),
            self.alpha_fit.map_or_else(|| "NaN".into(), fmt_float),
            self.inner_updates
        )
    }
}

pub struct SolveOutput {
    pub row: ResultRow,
    pub outcome: RunOutcome,
    pub trace_path: PathBuf,
}

/// Runs the configured solver on one planted instance and writes
/// `trace.csv`, `summary.txt`, and PGM images when `n` is a square.
pub fn cmd_solve(cfg: &ExperimentConfig, out: &mut impl Write) -> Result<SolveOutput> {
    let dir = cfg.resolved_out_dir();
    ensure_dir(&dir)?;
    let inst = build_instance(cfg, cfg.m, cfg.seed)?;
    let outcome = run_solver(cfg, &inst, cfg.solver())?;
    let row = ResultRow::from_outcome(cfg.seed, cfg.m, &outcome);
    let trace_path = dir.join("trace.csv");
    write_trace_file(&trace_path, &outcome.trace)?;

    let mut summary = format!(
        "{} problem={} step_size={}",
        row.summary_line(),
        cfg.problem,
        fmt_float(outcome.step_size)
    );
    if let Some(ok) = outcome.support_recovered {
        summary.push_str(&format!(" support_recovered={ok}"));
    }
    if let (true, Some(side)) = (cfg.image, image_side(inst.n())) {
        for (name, x) in [("x_hat.pgm", &outcome.x_hat), ("x_true.pgm", &inst.x_true)] {
            let s = write_pgm_file(&dir.join(name), x, side)?;
            summary.push_str(&format!(" {name}:min={} {name}:max={}", fmt_float(s.lo), fmt_float(s.hi)));
        }
    }
    std::fs::write(dir.join("summary.txt"), format!("{summary}\n"))?;
    writeln!(out, "{summary}")?;
    Ok(SolveOutput {
        row,
        outcome,
        trace_path,
    })
}

pub struct SweepOutput {
    pub rows: Vec<ResultRow>,
    /// Per `(m, solver)` medians of per-pixel error, in sweep order.
    pub medians: Vec<(usize, SolverKind, f64)>,
    pub results_path: PathBuf,
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Full factorial over `m_list × seeds × solvers`, run in parallel and
/// written in `(m, seed, solver)` order to `results.csv`, with per-`(m,
/// solver)` median rows appended. Wall times go to `timings.csv`.
pub fn cmd_sweep(cfg: &ExperimentConfig, out: &mut impl Write) -> Result<SweepOutput> {
    let dir = cfg.resolved_out_dir();
    ensure_dir(&dir)?;
    let solvers = cfg.sweep_solvers();
    let cells: Vec<(usize, u64)> = cfg
        .sweep_ms()
        .into_iter()
        .flat_map(|m| cfg.sweep_seeds().into_iter().map(move |s| (m, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?;
    let rows: Vec<ResultRow> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(m, seed)| -> Result<Vec<ResultRow>> {
                let inst = build_instance(cfg, m, seed)?;
                solvers
                    .iter()
                    .map(|&s| Ok(ResultRow::from_outcome(seed, m, &run_solver(cfg, &inst, s)?)))
                    .collect()
            })
            .collect::<Result<Vec<_>>>()
    })?
    .into_iter()
    .flatten()
    .collect();

    let mut groups: BTreeMap<(usize, usize), Vec<&ResultRow>> = BTreeMap::new();
    for r in &rows {
        let si = solvers.iter().position(|s| *s == r.solver).expect("known solver");
        groups.entry((r.m, si)).or_default().push(r);
    }
    let ms = cfg.sweep_ms();
    let mut ordered: Vec<((usize, usize), Vec<&ResultRow>)> = groups.into_iter().collect();
    ordered.sort_by_key(|((m, si), _)| (ms.iter().position(|x| x == m).expect("known m"), *si));

    let results_path = dir.join("results.csv");
    let mut w = csv::Writer::from_path(&results_path).with_context(|| format!("creating {}", results_path.display()))?;
    w.write_record(["seed", "m", "solver", "per_pixel_error", "objective", "alpha_fit", "inner_updates"])?;
    for r in &rows {
        w.write_record([
            r.seed.to_string(),
            r.m.to_string(),
            r.solver.to_string(),
            fmt_float(r.per_pixel_error),
            fmt_float(r.objective),
            r.alpha_fit.map(fmt_float).unwrap_or_default(),
            r.inner_updates.to_string(),
        ])?;
    }
    let mut medians = Vec::new();
    for ((m, si), group) in &ordered {
        let col = |f: &dyn Fn(&ResultRow) -> Option<f64>| {
            let mut v: Vec<f64> = group.iter().filter_map(|r| f(r)).collect();
            median(&mut v)
        };
        let err = col(&|r| Some(r.per_pixel_error));
        let alpha = col(&|r| r.alpha_fit);
        w.write_record([
            "median".to_string(),
            m.to_string(),
            solvers[*si].to_string(),
            fmt_float(err),
            fmt_float(col(&|r| Some(r.objective))),
            if alpha.is_nan() { String::new() } else { fmt_float(alpha) },
            fmt_float(col(&|r| Some(r.inner_updates as f64))),
        ])?;
        medians.push((*m, solvers[*si], err));
        writeln!(out, "m={m} solver={} median_per_pixel_error={}", solvers[*si], fmt_float(err))?;
    }
    w.flush()?;

    let timings = dir.join("timings.csv");
    let mut t = csv::Writer::from_path(&timings).with_context(|| format!("creating {}", timings.display()))?;
    t.write_record(["seed", "m", "solver", "wall_time_s"])?;
    for r in &rows {
        t.write_record([r.seed.to_string(), r.m.to_string(), r.solver.to_string(), format!("{:.6}", r.wall_time_s)])?;
    }
    t.flush()?;
    Ok(SweepOutput {
        rows,
        medians,
        results_path,
    })
}

pub struct DiagnoseOutput {
    /// `(quantity, value)` pairs in report order.
    pub values: Vec<(String, f64)>,
    pub window_holds: bool,
}

/// Estimates the restricted constants of the configured instance, checks the
/// linear-PGD step-size window, runs the configured solver and compares its
/// fitted rate with the predicted factors. Writes `report.txt` and
/// `diagnostics.csv`.
pub fn cmd_diagnose(cfg: &ExperimentConfig, out: &mut impl Write) -> Result<DiagnoseOutput> {
    let dir = cfg.resolved_out_dir();
    ensure_dir(&dir)?;
    let inst = build_instance(cfg, cfg.m, cfg.seed)?;
    let mut rng = RngStream::with_stream(cfg.seed, streams::DIAGNOSTICS);
    let mut values: Vec<(String, f64)> = Vec::new();
    let mut lines: Vec<String> = Vec::new();

    let srec = empirical_srec(inst.a(), &inst.g, cfg.srec_pairs, &mut rng)?;
    values.push(("gamma_hat".into(), srec.gamma));
    values.push(("rho_hat".into(), srec.rho));
    values.push(("srec_pairs_used".into(), srec.pairs_used as f64));

    let sc = solver_config(cfg, &inst)?;
    let eta = match sc.step_size {
        StepSize::Fixed(e) => e,
        StepSize::Auto { .. } => run_solver(cfg, &inst, cfg.solver())?.step_size,
    };
    values.push(("eta".into(), eta));
    let mut window_holds = false;
    match theorem1_window_check(&srec, eta) {
        Ok(w) => {
            window_holds = w.holds();
            values.push(("window_lower".into(), w.lower));
            values.push(("window_upper".into(), w.upper));
            values.push(("eta_in_window".into(), f64::from(u8::from(w.in_window))));
            values.push(("rho_sq_below_inv_eta".into(), f64::from(u8::from(w.rho_condition))));
            values.push(("predicted_factor".into(), w.predicted_factor));
            lines.push(format!(
                "window: eta={} in ({}, {}) = {}; rho^2 < 1/eta = {}; predicted factor {}",
                fmt_float(eta),
                fmt_float(w.lower),
                fmt_float(w.upper),
                w.in_window,
                w.rho_condition,
                fmt_float(w.predicted_factor)
            ));
        }
        Err(e) => lines.push(format!("window: not available ({e})")),
    }

    let obj = if cfg.problem == Problem::Phase {
        let p = inst.a().matvec(&inst.x_true)?.map(sign_pos);
        Objective::phase_corrected(inst.model.clone(), inst.y.clone(), p)?
    } else {
        objective(&inst)?
    };
    let rsc = rsc_rss_estimate(&obj, &inst.g, cfg.srec_pairs, &mut rng)?;
    values.push(("alpha_hat".into(), rsc.alpha));
    values.push(("beta_hat".into(), rsc.beta));
    let n = inst.n();
    let l = cfg.sparsity.clamp(1, n);
    let mu = incoherence_estimate(&inst.g, &DenseMatrix::identity(n), l, cfg.incoherence_samples, &mut rng)?;
    values.push(("mu_hat".into(), mu));
    if let Ok(f) = eps_pgd_factors(&rsc) {
        values.push(("beta_over_alpha".into(), f.ratio));
        values.push(("eps_pgd_bound".into(), f.bound));
        lines.push(format!(
            "eps-pgd: beta/alpha={} in [1, 2) = {}; bound {} ({:?})",
            fmt_float(f.ratio),
            f.in_regime,
            fmt_float(f.bound),
            f.active
        ));
    }
    if let Ok(f) = myopic_factor(&rsc, mu) {
        values.push(("myopic_factor".into(), f));
    }

    let run = run_solver(cfg, &inst, cfg.solver())?;
    values.push(("alpha_fit".into(), run.alpha_fit.unwrap_or(f64::NAN)));
    values.push(("final_per_pixel_error".into(), run.per_pixel_error));

    let csv_path = dir.join("diagnostics.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["quantity", "value"])?;
    for (k, v) in &values {
        w.write_record([k.clone(), fmt_float(*v)])?;
    }
    w.flush()?;

    let mut report = String::new();
    for (k, v) in &values {
        report.push_str(&format!("{k} = {}\n", fmt_float(*v)));
    }
    for line in &lines {
        report.push_str(line);
        report.push('\n');
    }
    std::fs::write(dir.join("report.txt"), &report)?;
    out.write_all(report.as_bytes())?;
    Ok(DiagnoseOutput { values, window_holds })
}

/// Loads a config for one of the subcommands.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig> {
    Ok(crate::config::load(path, overrides)?.0)
}
