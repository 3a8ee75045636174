use anytime_mc::linalg::{
    box_project, dilation, matrix_norm, singular_value_soft_threshold, singular_values, svd,
};
use anytime_mc::{Matrix, NormKind};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn matrix_strategy(max_dim: usize, range: f64) -> impl Strategy<Value = Matrix> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(move |(r, c)| {
        prop::collection::vec(-range..range, r * c)
            .prop_map(move |data| Matrix::from_row_major(r, c, data).unwrap())
    })
}

fn pair_strategy(max_dim: usize, range: f64) -> impl Strategy<Value = (Matrix, Matrix)> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(move |(r, c)| {
        (
            prop::collection::vec(-range..range, r * c),
            prop::collection::vec(-range..range, r * c),
        )
            .prop_map(move |(a, b)| {
                (
                    Matrix::from_row_major(r, c, a).unwrap(),
                    Matrix::from_row_major(r, c, b).unwrap(),
                )
            })
    })
}

fn to_nalgebra(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn nuclear(m: &Matrix) -> f64 {
    matrix_norm(m, NormKind::Nuclear).unwrap()
}

fn operator(m: &Matrix) -> f64 {
    matrix_norm(m, NormKind::Operator).unwrap()
}

fn svt_objective(x: &Matrix, m: &Matrix, tau: f64) -> f64 {
    0.5 * x.sub(m).frobenius_norm().powi(2) + tau * nuclear(x)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn squared_singular_values_match_gram_eigenvalues(m in matrix_strategy(7, 5.0)) {
        let ours = singular_values(&m).unwrap();
        let a = to_nalgebra(&m);
        let gram = if m.rows() >= m.cols() { a.transpose() * &a } else { &a * a.transpose() };
        let mut eig: Vec<f64> = gram.symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(|x, y| y.total_cmp(x));
        prop_assert_eq!(ours.len(), eig.len());
        let scale = m.frobenius_norm().powi(2).max(1.0);
        for (s, e) in ours.iter().zip(&eig) {
            prop_assert!((s * s - e.max(0.0)).abs() <= 1e-10 * scale, "{} vs {}", s * s, e);
        }
    }

    #[test]
    fn svd_factors_are_orthonormal_and_reconstruct(m in matrix_strategy(7, 5.0)) {
        let d = svd(&m).unwrap();
        let k = d.singular_values.len();
        let utu = d.u.transpose().matmul(&d.u);
        let vtv = d.v.transpose().matmul(&d.v);
        prop_assert!(utu.sub(&Matrix::identity(k)).max_norm() < 1e-10);
        prop_assert!(vtv.sub(&Matrix::identity(k)).max_norm() < 1e-10);
        prop_assert!(d.reconstruct().sub(&m).max_norm() < 1e-10 * m.frobenius_norm().max(1.0));
        prop_assert!(d.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn norm_inequalities(m in matrix_strategy(6, 5.0)) {
        let fro = m.frobenius_norm();
        let op = operator(&m);
        let nuc = nuclear(&m);
        let k = m.rows().min(m.cols()) as f64;
        let eps = 1e-10 * fro.max(1.0);
        prop_assert!(m.max_norm() <= op + eps);
        prop_assert!(op <= fro + eps);
        prop_assert!(fro <= nuc + eps);
        prop_assert!(nuc <= k.sqrt() * fro + eps);
    }

    #[test]
    fn trace_duality((a, b) in pair_strategy(5, 3.0)) {
        prop_assert!(a.inner(&b).abs() <= operator(&a) * nuclear(&b) + 1e-10);
    }

    #[test]
    fn soft_threshold_is_nonexpansive((a, b) in pair_strategy(5, 3.0), tau in 0.0..2.0f64) {
        let sa = singular_value_soft_threshold(&a, tau).unwrap();
        let sb = singular_value_soft_threshold(&b, tau).unwrap();
        prop_assert!(sa.sub(&sb).frobenius_norm() <= a.sub(&b).frobenius_norm() + 1e-10);
    }

    #[test]
    fn soft_threshold_beats_perturbations(
        (m, dir) in pair_strategy(4, 2.0),
        tau in 0.05..1.5f64,
        size in 1e-4..0.1f64,
    ) {
        let x = singular_value_soft_threshold(&m, tau).unwrap();
        let norm = dir.frobenius_norm();
        prop_assume!(norm > 1e-6);
        let perturbed = x.add_scaled(size / norm, &dir);
        prop_assert!(svt_objective(&perturbed, &m, tau) >= svt_objective(&x, &m, tau));
    }

    #[test]
    fn soft_threshold_shrinks_singular_values(m in matrix_strategy(5, 3.0), tau in 0.0..2.0f64) {
        let before = singular_values(&m).unwrap();
        let after = singular_values(&singular_value_soft_threshold(&m, tau).unwrap()).unwrap();
        for (b, a) in before.iter().zip(&after) {
            prop_assert!((a - (b - tau).max(0.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn dilation_preserves_operator_norm(m in matrix_strategy(6, 5.0)) {
        let d = dilation(&m);
        prop_assert_eq!(d.shape(), (m.rows() + m.cols(), m.rows() + m.cols()));
        prop_assert_eq!(d.transpose(), d.clone());
        prop_assert!((operator(&d) - operator(&m)).abs() < 1e-10);
    }

    #[test]
    fn box_projection_clamps_each_entry(m in matrix_strategy(5, 5.0), gamma in 0.1..3.0f64) {
        let p = box_project(&m, gamma).unwrap();
        prop_assert!(p.max_norm() <= gamma);
        for (&x, &y) in m.as_slice().iter().zip(p.as_slice()) {
            prop_assert_eq!(y, x.clamp(-gamma, gamma));
        }
    }
}
