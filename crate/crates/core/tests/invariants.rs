use nalgebra::DMatrix;
use proptest::prelude::*;

use twin_core::forecast::{ci_band, pca_project, predictive_moments, TrajectoryBundle};
use twin_core::omics::inverse_normal_transform;
use twin_core::stats::{pearson, spearman};
use twin_core::tensor::{finite_difference_check, Tape, Tensor};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, rows * cols)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matmul_matches_nalgebra((n, k, m, a, b) in (1usize..6, 1usize..6, 1usize..6)
        .prop_flat_map(|(n, k, m)| (Just(n), Just(k), Just(m), matrix(n, k), matrix(k, m))))
    {
        let mut tape = Tape::new();
        let va = tape.leaf(Tensor::matrix(n, k, a.clone()).unwrap(), false);
        let vb = tape.leaf(Tensor::matrix(k, m, b.clone()).unwrap(), false);
        let c = tape.matmul(va, vb).unwrap();
        let oracle = DMatrix::from_row_slice(n, k, &a) * DMatrix::from_row_slice(k, m, &b);
        for r in 0..n {
            for j in 0..m {
                prop_assert!((tape.value(c).at(r, j) - oracle[(r, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn composite_gradient_matches_differences(x in matrix(3, 2)) {
        let x = Tensor::matrix(3, 2, x).unwrap();
        let report = finite_difference_check(
            |t, v| {
                let h = t.tanh(v)?;
                let s = t.square(h)?;
                let p = t.matmul_tn(v, s)?;
                t.mean(p)
            },
            &x,
            1e-5,
            1e-5,
        )
        .unwrap();
        prop_assert!(report.pass, "max rel err {}", report.max_rel_error);
    }

    #[test]
    fn int_preserves_order_and_centres(values in prop::collection::vec(-1e3f64..1e3, 2..60)) {
        let z = inverse_normal_transform(&values).unwrap();
        prop_assert_eq!(z.len(), values.len());
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        prop_assert!(mean.abs() < 1e-9);
        for i in 0..values.len() {
            for j in 0..values.len() {
                if values[i] < values[j] {
                    prop_assert!(z[i] < z[j]);
                }
            }
        }
    }

    #[test]
    fn correlations_are_bounded(xy in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..40)) {
        let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
        for r in [pearson(&x, &y).unwrap(), spearman(&x, &y).unwrap()].into_iter().flatten() {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r));
        }
    }

    #[test]
    fn band_lies_within_pass_range_and_variance_is_floored(
        (passes, steps, vars, values, tau_inv) in (2usize..12, 1usize..5, 1usize..4)
            .prop_flat_map(|(p, s, v)| (Just(p), Just(s), Just(v), matrix(p, s * v), 0.0f64..1.0)))
    {
        let bundle = TrajectoryBundle::new(passes, steps, vars, 0, values).unwrap();
        let band = ci_band(&bundle, 0.9).unwrap();
        let moments = predictive_moments(&bundle, tau_inv).unwrap();
        for i in 0..steps * vars {
            let (s, v) = (i / vars, i % vars);
            let cell = bundle.cell(s, v);
            let lo = cell.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = cell.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo - 1e-12 <= band.lower[i] && band.lower[i] <= band.upper[i] && band.upper[i] <= hi + 1e-12);
            prop_assert!(moments.variance[i] >= tau_inv - 1e-12);
        }
    }

    #[test]
    fn pca_loadings_are_orthonormal((n, pts) in (6usize..30).prop_flat_map(|n| (Just(n), matrix(n, 4)))) {
        let Ok(proj) = pca_project(&pts, 4, 2) else { return Ok(()) };
        for a in 0..2 {
            for b in 0..2 {
                let dot: f64 = (0..4).map(|v| proj.loading(v, a) * proj.loading(v, b)).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                prop_assert!((dot - want).abs() < 1e-8, "dot {} for ({}, {})", dot, a, b);
            }
        }
        prop_assert_eq!(proj.scores.len(), n * 2);
        prop_assert!(proj.explained_ratio.iter().sum::<f64>() <= 1.0 + 1e-9);
    }
}
