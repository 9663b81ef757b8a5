use faer::Mat;
use fmap_core::descriptors::{normalize_l2, DescriptorSet, Provenance};
use fmap_core::eval::{pck_curve, ErrorReport};
use fmap_core::fmap::FunctionalMap;
use fmap_core::matrix::RowMatrix;
use fmap_core::mesh::AreaVector;
use fmap_core::nn::{brute_force, nearest_neighbors_hinted, NnStrategy};
use fmap_core::softmap::{ScalableSoftMap, TileConfig, VertexMap};
use fmap_core::zoomout::{consistency_loss, orthogonality_loss};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = RowMatrix> {
    prop::collection::vec(-2.0f64..2.0, rows * cols).prop_map(move |v| RowMatrix::from_vec(rows, cols, v).unwrap())
}

fn two_feature_sets() -> impl Strategy<Value = (RowMatrix, RowMatrix)> {
    (1usize..60, 1usize..60, 1usize..6).prop_flat_map(|(n1, n2, p)| (matrix(n1, p), matrix(n2, p)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn soft_map_is_row_stochastic((f1, f2) in two_feature_sets(), log_sigma in -2.0f64..2.0, tr in 1usize..40, sr in 1usize..40) {
        let sigma = 10f64.powf(log_sigma);
        let n1 = f1.rows();
        let n2 = f2.rows();
        let soft = ScalableSoftMap::new(f1, f2, sigma).unwrap().with_tiles(TileConfig { target_rows: tr, source_rows: sr });
        let ones = RowMatrix::from_fn(n1, 2, |_, j| if j == 0 { 1.0 } else { 3.0 });
        let out = soft.apply(&ones).unwrap();
        for i in 0..n2 {
            prop_assert!((out.get(i, 0) - 1.0).abs() < 1e-12);
            prop_assert!((out.get(i, 1) - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn soft_map_result_does_not_depend_on_tiling((f1, f2) in two_feature_sets(), tr in 1usize..40, sr in 1usize..40) {
        let b = RowMatrix::from_fn(f1.rows(), 3, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
        let base = ScalableSoftMap::new(f1.clone(), f2.clone(), 0.5).unwrap();
        let tiled = base.clone().with_tiles(TileConfig { target_rows: tr, source_rows: sr });
        let (x, y) = (base.apply(&b).unwrap(), tiled.apply(&b).unwrap());
        let mut d = x.clone();
        d.add_scaled(-1.0, &y);
        prop_assert!(d.frobenius_norm() <= 1e-12 * (1.0 + x.frobenius_norm()));
    }

    #[test]
    fn ball_tree_matches_brute_force((db, q) in two_feature_sets(), hint_seed in 0usize..1000) {
        let hints: Vec<usize> = (0..q.rows()).map(|i| (i * 31 + hint_seed) % db.rows()).collect();
        let want = brute_force(&q, &db);
        prop_assert_eq!(&nearest_neighbors_hinted(&q, &db, NnStrategy::BallTree, None).unwrap(), &want);
        prop_assert_eq!(&nearest_neighbors_hinted(&q, &db, NnStrategy::BallTree, Some(&hints)).unwrap(), &want);
    }

    #[test]
    fn pck_is_monotone_and_bounded(errors in prop::collection::vec(0.0f64..1.0, 1..50), mut t in prop::collection::vec(0.0f64..1.2, 1..10)) {
        t.sort_by(f64::total_cmp);
        let r = ErrorReport::from_errors(errors.clone());
        let c = pck_curve(&r, &t);
        prop_assert!(c.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(c.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let max = errors.iter().copied().fold(0.0, f64::max);
        prop_assert_eq!(pck_curve(&r, &[max])[0], 1.0);
        let mean = errors.iter().sum::<f64>() / errors.len() as f64;
        prop_assert!((r.mean_x100 - 100.0 * mean).abs() < 1e-12);
    }

    #[test]
    fn normalisation_is_idempotent(values in matrix(20, 3), areas in prop::collection::vec(0.01f64..1.0, 20)) {
        prop_assume!((0..3).all(|j| (0..20).any(|i| values.get(i, j).abs() > 1e-3)));
        let a = AreaVector::new(areas).unwrap();
        let d = DescriptorSet::new(values, Provenance::External).unwrap();
        let once = normalize_l2(&d, &a).unwrap();
        let twice = normalize_l2(&once, &a).unwrap();
        for j in 0..3 {
            let norm: f64 = (0..20).map(|i| a.values()[i] * once.values.get(i, j).powi(2)).sum();
            prop_assert!((norm - 1.0).abs() < 1e-12);
        }
        let mut diff = twice.values.clone();
        diff.add_scaled(-1.0, &once.values);
        prop_assert!(diff.frobenius_norm() < 1e-12);
    }

    #[test]
    fn file_formats_round_trip(m in matrix(7, 4), idx in prop::collection::vec(0usize..50, 1..40)) {
        let mut buf = Vec::new();
        m.write_fmat(&mut buf).unwrap();
        prop_assert_eq!(RowMatrix::read_fmat(&buf[..]).unwrap(), m.clone());

        let c = FunctionalMap::from_matrix(m.to_faer()).unwrap();
        let mut buf = Vec::new();
        c.write_text(&mut buf).unwrap();
        let back = FunctionalMap::read_text(&buf[..]).unwrap();
        prop_assert_eq!(back.matrix(), c.matrix());

        let v = VertexMap::new(idx, 50).unwrap();
        let mut buf = Vec::new();
        v.write_text(&mut buf).unwrap();
        prop_assert_eq!(VertexMap::read_text(&buf[..]).unwrap(), v);
    }

    #[test]
    fn consistency_ignores_entries_outside_the_block(init in matrix(3, 3), extra in matrix(5, 6)) {
        let c0 = FunctionalMap::from_matrix(init.to_faer()).unwrap();
        let e = extra.to_faer();
        let refined = FunctionalMap::from_matrix(e.clone()).unwrap();
        let base = consistency_loss(&c0, &refined).unwrap();
        let mut changed = e;
        changed[(4, 5)] += 3.0;
        changed[(0, 4)] -= 1.0;
        let other = FunctionalMap::from_matrix(changed).unwrap();
        prop_assert_eq!(consistency_loss(&c0, &other).unwrap(), base);
    }

    #[test]
    fn orthogonality_vanishes_on_rotations(theta in -3.2f64..3.2, phi in -3.2f64..3.2) {
        let (a, b) = ((theta.cos(), theta.sin()), (phi.cos(), phi.sin()));
        // product of rotations in two coordinate planes of R³
        let r1 = Mat::from_fn(3, 3, |i, j| match (i, j) {
            (0, 0) | (1, 1) => a.0,
            (0, 1) => -a.1,
            (1, 0) => a.1,
            (2, 2) => 1.0,
            _ => 0.0,
        });
        let r2 = Mat::from_fn(3, 3, |i, j| match (i, j) {
            (1, 1) | (2, 2) => b.0,
            (1, 2) => -b.1,
            (2, 1) => b.1,
            (0, 0) => 1.0,
            _ => 0.0,
        });
        let c = FunctionalMap::from_matrix(&r1 * &r2).unwrap();
        prop_assert!(orthogonality_loss(&c) < 1e-12);
    }
}
