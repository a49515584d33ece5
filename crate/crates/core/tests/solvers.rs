mod common;

use std::sync::Arc;

use common::{median, planted};
use genpgd::diagnostics::{empirical_srec, rsc_rss_estimate, trace_rate, window_step_size};
use genpgd::measurement::MeasurementModel;
use genpgd::numerics::{orthonormal_matrix, DenseMatrix, DenseVector, RngStream};
use genpgd::objectives::Objective;
use genpgd::projection::ProjectionConfig;
use genpgd::scalar::sign_pos;
use genpgd::solvers::{
    csgm_baseline, dpr_baseline, eps_pgd, myopic_eps_pgd, pgd_linear, phase_init, phase_pgd, phase_pgd_with,
    LatentDescentConfig, PhaseInit, PhaseSource, SolverConfig, StepSize,
};
use genpgd::{Generator, LatentInit, Link};

fn squared(a: &DenseMatrix<f64>, y: DenseVector<f64>) -> Objective<f64> {
    Objective::squared(MeasurementModel::new(a.clone(), Link::Linear), y).unwrap()
}

#[test]
fn pgd_recovers_planted_signal() {
    let p = planted(8, 64, 128, 64, 1);
    let y = p.a.matvec(&p.x).unwrap();
    let srec = empirical_srec(&p.a, &p.g, 500, &mut RngStream::new(2)).unwrap();
    let mut cfg = SolverConfig::linear_protocol().with_truth(p.x.clone());
    cfg.step_size = StepSize::Fixed(window_step_size(&srec).unwrap());
    cfg.projection.inner_rate = 0.05;
    let tr = pgd_linear(&y, &p.a, &p.g, &cfg).unwrap();
    assert_eq!(tr.records.len(), 16);
    assert_eq!(tr.inner_updates, 3000);
    assert!(tr.records.iter().all(|r| r.objective.is_finite()));
    let err = tr.last().per_pixel_error.unwrap();
    assert!(err < 1e-4, "per-pixel error {err:e}");
    assert!(trace_rate(&tr, 1e-8).unwrap().alpha < 1.0);
}

#[test]
fn eps_pgd_with_squared_loss_is_pgd() {
    let p = planted(4, 24, 32, 20, 2);
    let y = p.a.matvec(&p.x).unwrap();
    let cfg = SolverConfig::new(6, 0.5, ProjectionConfig::new(40, 0.05))
        .with_seed(3)
        .with_truth(p.x.clone())
        .recording_iterates();
    let a = pgd_linear(&y, &p.a, &p.g, &cfg).unwrap();
    let b = eps_pgd(&squared(&p.a, y), &p.g, &cfg).unwrap();
    for (xa, xb) in a.iterates.iter().zip(&b.iterates) {
        assert!(xa.sub(xb).max_abs() <= 1e-12);
    }
    assert_eq!(a.iterates.len(), 7);
}

#[test]
fn sigmoid_and_sinusoid_recovery() {
    let p = planted(4, 32, 24, 96, 4);
    let mut cfg = SolverConfig::new(30, 1.0, ProjectionConfig::new(100, 0.05)).with_truth(p.x.clone());
    cfg.step_size = StepSize::Auto { pairs: 200 };

    let model = Arc::new(MeasurementModel::new(p.a.clone(), Link::Sigmoid));
    let obj = Objective::new(model.clone(), model.observe(&p.x).unwrap(), genpgd::LossKind::SimSigmoid).unwrap();
    let tr = eps_pgd(&obj, &p.g, &cfg).unwrap();
    assert!(tr.last().per_pixel_error.unwrap() < 1e-2);

    let model = Arc::new(MeasurementModel::new(p.a.clone(), Link::Sinusoid));
    let obj = Objective::new(model.clone(), model.observe(&p.x).unwrap(), genpgd::LossKind::SinusoidL2).unwrap();
    let tr = eps_pgd(&obj, &p.g, &cfg).unwrap();
    let f = tr.objective_values();
    for t in 0..5 {
        assert!(f[t + 1] < f[t], "objective rose at t = {t}: {f:?}");
    }
}

#[test]
fn oracle_phase_reduces_to_linear_pgd() {
    let p = planted(4, 24, 32, 48, 5);
    let ax = p.a.matvec(&p.x).unwrap();
    let phase = ax.map(sign_pos);
    let y = ax.map(f64::abs);
    let cfg = SolverConfig::new(5, 0.9, ProjectionConfig::new(30, 0.05)).with_seed(1).recording_iterates();
    let zero = DenseVector::zeros(32);
    let a = phase_pgd_with(&y, &p.a, &p.g, &cfg, &zero, &PhaseSource::Oracle(phase.clone())).unwrap();
    let b = pgd_linear(&y.hadamard(&phase), &p.a, &p.g, &cfg).unwrap();
    for (xa, xb) in a.iterates.iter().zip(&b.iterates) {
        assert!(xa.sub(xb).max_abs() <= 1e-12);
    }
}

#[test]
fn phase_pgd_contracts_from_nearby_start() {
    let p = planted(8, 64, 128, 128, 6);
    let y = p.a.matvec(&p.x).unwrap().map(f64::abs);
    let init = PhaseInit::OraclePerturb { delta: 0.1, truth: Some(p.x.clone()) };
    let x0 = phase_init(&y, &p.a, &p.g, &init, &mut RngStream::new(7)).unwrap();
    let mut cfg = SolverConfig::phase_protocol().with_truth(p.x.clone());
    cfg.projection.inner_steps = 100;
    cfg.projection.inner_rate = 0.05;
    let tr = phase_pgd(&y, &p.a, &p.g, &cfg, &x0).unwrap();
    assert_eq!(tr.records.len(), 51);
    assert!(tr.last().sign_invariant_error.unwrap() < 1e-3);
}

#[test]
fn phase_pgd_is_sign_symmetric() {
    let p = planted(4, 24, 32, 64, 8);
    let y = p.a.matvec(&p.x).unwrap().map(f64::abs);
    let x0 = phase_init(&y, &p.a, &p.g, &PhaseInit::BestOfSamples { count: 20, unit_norm: false }, &mut RngStream::new(2)).unwrap();
    let base = SolverConfig::new(10, 0.9, ProjectionConfig::new(30, 0.05));
    let plus = phase_pgd(&y, &p.a, &p.g, &base.clone().with_truth(p.x.clone()), &x0).unwrap();
    let minus = phase_pgd(&y, &p.a, &p.g, &base.with_truth(p.x.scaled(-1.0)), &x0).unwrap();
    assert_eq!(plus.sign_invariant_errors(), minus.sign_invariant_errors());
}

#[test]
fn best_of_samples_beats_single_draws() {
    let mut wins = 0;
    for seed in 0..10 {
        let p = planted(4, 24, 32, 64, 100 + seed);
        let y = p.a.matvec(&p.x).unwrap().map(f64::abs);
        let loss = |x: &DenseVector<f64>| {
            let ax = p.a.matvec(x).unwrap();
            y.iter().zip(ax.iter()).map(|(a, b)| (a - b.abs()).powi(2)).sum::<f64>()
        };
        let mut rng = RngStream::new(seed);
        let best = phase_init(&y, &p.a, &p.g, &PhaseInit::BestOfSamples { count: 200, unit_norm: false }, &mut rng).unwrap();
        let singles: Vec<f64> = (0..21).map(|_| loss(&p.g.sample_range(&mut rng, false).x)).collect();
        if loss(&best) < median(singles) {
            wins += 1;
        }
    }
    assert_eq!(wins, 10);
}

#[test]
fn myopic_without_innovation_is_eps_pgd() {
    let p = planted(4, 24, 32, 40, 9);
    let obj = squared(&p.a, p.a.matvec(&p.x).unwrap());
    let cfg = SolverConfig::new(8, 0.5, ProjectionConfig::new(30, 0.05)).with_seed(4).recording_iterates();
    let basis = DenseMatrix::identity(32);
    let my = myopic_eps_pgd(&obj, &p.g, &basis, 0, &cfg).unwrap();
    let plain = eps_pgd(&obj, &p.g, &cfg).unwrap();
    assert!(my.v_iterates.iter().all(|v| v.max_abs() == 0.0));
    for (u, x) in my.u_iterates.iter().zip(&plain.iterates) {
        assert!(u.sub(x).max_abs() <= 1e-12);
    }
}

#[test]
fn myopic_decomposition_and_sparsity() {
    let p = planted(4, 24, 32, 40, 10);
    let obj = squared(&p.a, p.a.matvec(&p.x).unwrap());
    let cfg = SolverConfig::new(8, 0.5, ProjectionConfig::new(30, 0.05)).recording_iterates();
    let basis = orthonormal_matrix(32, &mut RngStream::new(1)).unwrap();
    let sol = myopic_eps_pgd(&obj, &p.g, &basis, 3, &cfg).unwrap();
    for ((x, u), v) in sol.trace.iterates.iter().zip(&sol.u_iterates).zip(&sol.v_iterates) {
        assert_eq!(*x, u.add(v));
        let c = basis.matvec_adjoint(v).unwrap();
        assert!(c.iter().filter(|c| c.abs() > 1e-10).count() <= 3);
    }
    assert_eq!(sol.x_hat, sol.u_hat.add(&sol.v_hat));
}

#[test]
fn myopic_innovation_stays_small_in_range() {
    let mut ratios = Vec::new();
    for seed in 0..5 {
        let p = planted(8, 32, 64, 52, 200 + seed);
        let obj = squared(&p.a, p.a.matvec(&p.x).unwrap());
        let cfg = SolverConfig::new(30, 0.5, ProjectionConfig::new(100, 0.05)).with_seed(seed);
        let sol = myopic_eps_pgd(&obj, &p.g, &DenseMatrix::identity(64), 5, &cfg).unwrap();
        ratios.push(sol.v_hat.norm() / sol.x_hat.norm());
    }
    assert!(median(ratios.clone()) <= 0.1, "{ratios:?}");
}

#[test]
fn csgm_identity_problem() {
    let y = RngStream::new(3).normal_vector::<f64>(6, 1.0);
    let obj = squared(&DenseMatrix::identity(6), y.clone());
    let tr = csgm_baseline(&obj, &Generator::identity(6), &LatentDescentConfig::new(500, 0.1)).unwrap();
    assert!(tr.x_hat.sub(&y).max_abs() < 1e-12);
}

#[test]
fn dpr_stationary_at_truth() {
    let p = planted(4, 24, 32, 48, 11);
    let y = p.a.matvec(&p.x).unwrap().map(f64::abs);
    let cfg = LatentDescentConfig::dpr_protocol().with_init(LatentInit::Warm(p.z.clone()));
    assert_eq!(cfg.steps, 2500);
    let tr = dpr_baseline(&y, &p.a, &p.g, &cfg).unwrap();
    assert_eq!(tr.records.len(), 2501);
    assert_eq!(tr.last().objective, 0.0);
}

#[test]
fn rsc_rss_of_quadratics() {
    let g = Generator::identity(10);
    let q = orthonormal_matrix::<f64>(10, &mut RngStream::new(2)).unwrap();
    let est = rsc_rss_estimate(&squared(&q, DenseVector::zeros(10)), &g, 40, &mut RngStream::new(3)).unwrap();
    assert!((est.alpha - 2.0).abs() < 1e-10 && (est.beta - 2.0).abs() < 1e-10);
    let c = DenseMatrix::identity(10).scaled(3.0);
    let est = rsc_rss_estimate(&squared(&c, DenseVector::zeros(10)), &g, 40, &mut RngStream::new(3)).unwrap();
    assert!((est.alpha - 18.0).abs() < 1e-9 && (est.beta - 18.0).abs() < 1e-9);
}

#[test]
fn solvers_are_bitwise_reproducible() {
    let p = planted(4, 24, 32, 40, 12);
    let y = p.a.matvec(&p.x).unwrap();
    let cfg = SolverConfig::new(5, 0.5, ProjectionConfig::new(20, 0.05).with_restarts(3))
        .with_seed(9)
        .with_truth(p.x.clone());
    assert_eq!(pgd_linear(&y, &p.a, &p.g, &cfg).unwrap(), pgd_linear(&y, &p.a, &p.g, &cfg).unwrap());
    let mag = y.map(f64::abs);
    let x0 = DenseVector::zeros(32);
    assert_eq!(
        phase_pgd(&mag, &p.a, &p.g, &cfg, &x0).unwrap(),
        phase_pgd(&mag, &p.a, &p.g, &cfg, &x0).unwrap()
    );
}
