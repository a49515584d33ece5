use genpgd::diagnostics::{empirical_srec, sign_invariant_dist};
use genpgd::generator::{GeneratorNet, GeneratorSpec};
use genpgd::numerics::{gaussian_matrix, orthonormal_matrix, DenseMatrix, DenseVector, RngStream};
use genpgd::solvers::thresh_in_basis;
use proptest::prelude::*;

fn vec_strategy(len: usize) -> impl Strategy<Value = DenseVector<f64>> {
    prop::collection::vec(-10.0f64..10.0, len).prop_map(DenseVector::from_vec)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjoint_identity(seed in any::<u64>(), m in 1usize..12, n in 1usize..12) {
        let mut rng = RngStream::new(seed);
        let a = gaussian_matrix::<f64>(m, n, 1.0, &mut rng).unwrap();
        let x = rng.normal_vector(n, 1.0);
        let r = rng.normal_vector(m, 1.0);
        let lhs = a.matvec(&x).unwrap().dot(&r);
        let rhs = x.dot(&a.matvec_adjoint(&r).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn bias_free_relu_is_positively_homogeneous(seed in any::<u64>(), c in 0.01f64..20.0) {
        let mut rng = RngStream::new(seed);
        let g = GeneratorNet::<f64>::random(&GeneratorSpec::relu(4, vec![10, 8], 6), &mut rng).unwrap();
        let z = rng.normal_vector(4, 1.0);
        let lhs = g.forward(&z.scaled(c)).unwrap();
        let rhs = g.forward(&z).unwrap().scaled(c);
        prop_assert!(lhs.sub(&rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
    }

    #[test]
    fn thresh_output_is_l_sparse_and_idempotent(w in vec_strategy(9), l in 0usize..12, seed in any::<u64>()) {
        let b = orthonormal_matrix::<f64>(9, &mut RngStream::new(seed)).unwrap();
        let out = thresh_in_basis(&w, &b, l).unwrap();
        let c = b.matvec_adjoint(&out).unwrap();
        prop_assert!(c.iter().filter(|v| v.abs() > 1e-9).count() <= l.min(9));
        let again = thresh_in_basis(&out, &b, l).unwrap();
        prop_assert!(again.sub(&out).norm() <= 1e-9 * (1.0 + out.norm()));
        prop_assert!(out.norm() <= w.norm() * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn identity_thresh_keeps_entries_exactly(w in vec_strategy(7), l in 0usize..8) {
        let out = thresh_in_basis(&w, &DenseMatrix::identity(7), l).unwrap();
        for (o, x) in out.iter().zip(w.iter()) {
            prop_assert!(*o == 0.0 || o == x);
        }
    }

    #[test]
    fn sign_invariant_distance_symmetries(x in vec_strategy(6), y in vec_strategy(6)) {
        let d = sign_invariant_dist(&x, &y).unwrap();
        prop_assert_eq!(d, sign_invariant_dist(&y, &x).unwrap());
        prop_assert!((d - sign_invariant_dist(&x, &y.scaled(-1.0)).unwrap()).abs() <= 1e-12 * (1.0 + d));
        prop_assert!(d <= x.sub(&y).norm());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn srec_extremes_are_monotone_in_pairs(seed in any::<u64>(), base in 1usize..30, extra in 1usize..30) {
        let mut rng = RngStream::new(seed);
        let g = GeneratorNet::<f64>::random(&GeneratorSpec::relu(3, vec![12], 16), &mut rng).unwrap();
        let a = gaussian_matrix(10, 16, 0.1, &mut rng).unwrap();
        let small = empirical_srec(&a, &g, base, &mut RngStream::new(seed ^ 1)).unwrap();
        let large = empirical_srec(&a, &g, base + extra, &mut RngStream::new(seed ^ 1)).unwrap();
        prop_assert!(large.gamma <= small.gamma);
        prop_assert!(large.rho >= small.rho);
        prop_assert!(small.gamma <= small.rho * small.rho * (1.0 + 1e-12));
    }
}
