use h2kit::basisops::compress;
use h2kit::construct::{construct_h2, KernelSpec};
use h2kit::dist::{dist_apply, DistributedH2, ExchangePlan};
use h2kit::geometry::{coverage_counts, dual_tree_traversal, ClusterTree, PointCloud};
use h2kit::matvec::{apply, from_tree_order, random_vectors, to_tree_order};
use proptest::prelude::*;

fn cloud(pts: &[(f64, f64)]) -> PointCloud {
    PointCloud::new(2, pts.iter().flat_map(|&(x, y)| [x, y]).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn plan_segments_are_sorted_and_owned(cols in prop::collection::vec(0usize..64, 0..40), shift in 1u32..4) {
        let owner = |s: usize| s >> shift;
        let plan = ExchangePlan::from_columns(cols.iter().copied(), owner);
        plan.validate(owner).unwrap();
        prop_assert!(plan.nodes.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(plan.pid.windows(2).all(|w| w[0] < w[1]));
        for (i, &p) in plan.pid.iter().enumerate() {
            prop_assert!(plan.segment(i).iter().all(|&s| owner(s) == p));
        }
        let mut want = cols.clone();
        want.sort_unstable();
        want.dedup();
        prop_assert_eq!(plan.nodes, want);
    }

    #[test]
    fn every_entry_covered_once(pts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 40..300), m in 4usize..20, eta in 0.3f64..1.5) {
        let t = ClusterTree::build(cloud(&pts), m).unwrap();
        let st = dual_tree_traversal(&t, &t, eta).unwrap();
        prop_assert!(coverage_counts(&t, &t, &st).iter().all(|&c| c == 1));
    }

    #[test]
    fn tree_order_round_trip(pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 10..200), nv in 1usize..4) {
        let n = pts.len();
        let t = ClusterTree::build(cloud(&pts), 8).unwrap();
        let x = random_vectors(n, nv, 1);
        prop_assert_eq!(from_tree_order(&t, &to_tree_order(&t, &x, nv), nv), x);
    }

    #[test]
    fn product_is_linear(seed in 0u64..1000, a in -2.0f64..2.0) {
        let pts = PointCloud::grid(&[16, 16], 1.0).unwrap();
        let m = construct_h2(pts, &KernelSpec::Exp { length: 0.2 }, 16, 0.9, 3).unwrap();
        let x = random_vectors(256, 1, seed);
        let y = random_vectors(256, 1, seed + 1);
        let z: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + v).collect();
        let (ax, ay, az) = (apply(&m, &x, 1).unwrap(), apply(&m, &y, 1).unwrap(), apply(&m, &z, 1).unwrap());
        let scale = az.iter().fold(1.0f64, |s, v| s.max(v.abs()));
        for i in 0..256 {
            prop_assert!((az[i] - (a * ax[i] + ay[i])).abs() <= 1e-12 * scale);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn distributed_product_is_bitwise_equal(seed in 0u64..1000, log_p in 0u32..5, nv in 1usize..4) {
        let pts = PointCloud::grid(&[32, 32], 1.0).unwrap();
        let mut m = construct_h2(pts, &KernelSpec::Exp { length: 0.1 }, 16, 0.9, 2).unwrap();
        m.randomize(seed);
        let x = random_vectors(1024, nv, seed);
        let d = DistributedH2::distribute(&m, 1 << log_p).unwrap();
        prop_assert_eq!(dist_apply(&d, &x, nv).unwrap().0, apply(&m, &x, nv).unwrap());
    }

    #[test]
    fn compression_never_raises_ranks(tau in 1e-8f64..1e-1) {
        let pts = PointCloud::grid(&[16, 16], 1.0).unwrap();
        let m = construct_h2(pts, &KernelSpec::Exp { length: 0.1 }, 16, 0.9, 3).unwrap();
        let c = compress(&m, tau).unwrap();
        prop_assert!(c.row_ranks().iter().zip(m.row_ranks()).all(|(a, b)| a <= b));
        prop_assert!(c.col_ranks().iter().zip(m.col_ranks()).all(|(a, b)| a <= b));
    }
}
