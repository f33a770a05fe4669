mod common;

use common::*;
use ks_core::space::{
    density_theta, doubling_constant, maximal_function, partition_of_unity, DoublingOptions, PointCloudSpace,
};
use proptest::prelude::*;

fn cloud(seed_pts: &[(f64, f64)]) -> PointCloudSpace {
    let mut pts: Vec<Vec<f64>> = Vec::new();
    for &(x, y) in seed_pts {
        // keep points distinct
        if pts.iter().all(|p| (p[0] - x).abs() + (p[1] - y).abs() > 1e-6) {
            pts.push(vec![x, y]);
        }
    }
    PointCloudSpace::euclidean(pts, None).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ball_membership_is_monotone(pts in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 2..60),
                                   r1 in 0.01..0.5f64, dr in 0.0..0.5f64, c in 0usize..60) {
        let s = cloud(&pts);
        let c = c % s.len();
        let small = s.ball(c, r1);
        let big = s.ball(c, r1 + dr);
        prop_assert!(small.indices.iter().all(|i| big.indices.contains(i)));
        prop_assert!(small.mass <= big.mass);
    }

    #[test]
    fn doubling_is_monotone_in_radius(pts in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 10..60),
                                      r in 0.05..0.4f64, dr in 0.0..0.4f64) {
        let s = cloud(&pts);
        let opts = DoublingOptions { r_min: Some(0.02), centers: None };
        let a = doubling_constant(&s, r, &opts).unwrap();
        let b = doubling_constant(&s, r + dr, &opts).unwrap();
        prop_assert!(a.value <= b.value);
    }

    #[test]
    fn maximal_function_is_sublinear_and_homogeneous(
        f in prop::collection::vec(-3.0..3.0f64, 64),
        g in prop::collection::vec(-3.0..3.0f64, 64),
        lambda in 0.0..5.0f64,
    ) {
        let s = grid(8);
        let big_r = 0.6;
        let mf = maximal_function(&s, &f, big_r).unwrap().values;
        let mg = maximal_function(&s, &g, big_r).unwrap().values;
        let sum: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a + b).collect();
        let msum = maximal_function(&s, &sum, big_r).unwrap().values;
        let scaled: Vec<f64> = f.iter().map(|a| lambda * a).collect();
        let mscaled = maximal_function(&s, &scaled, big_r).unwrap().values;
        for i in 0..s.len() {
            prop_assert!(msum[i] <= mf[i] + mg[i] + 1e-12);
            prop_assert!((mscaled[i] - lambda * mf[i]).abs() <= 1e-12 * (1.0 + lambda * mf[i]));
        }
    }

    #[test]
    fn maximal_l2_bound_holds(f in prop::collection::vec(-3.0..3.0f64, 100)) {
        let s = grid(10);
        let rep = maximal_function(&s, &f, 0.5).unwrap();
        let norm = |v: &[f64]| v.iter().zip(s.weights()).map(|(x, w)| w * x * x).sum::<f64>().sqrt();
        prop_assert!(norm(&rep.values) <= rep.l2_bound * norm(&f) * (1.0 + 1e-12));
    }

    #[test]
    fn partition_of_unity_invariants(pts in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 5..80),
                                     r in 0.03..0.2f64) {
        let s = cloud(&pts);
        let pu = partition_of_unity(&s, r, 1.0).unwrap();
        for x in 0..s.len() {
            let total: f64 = pu.values.iter().map(|phi| phi[x]).sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
            let nonzero = pu.values.iter().filter(|phi| phi[x] > 0.0).count();
            prop_assert!(nonzero >= 1 && nonzero <= pu.overlap);
            prop_assert!(pu.values.iter().all(|phi| phi[x] >= 0.0 && phi[x] <= 1.0));
        }
        // support inside B_2r of the center and the Lipschitz bound on all pairs
        for (phi, &c) in pu.values.iter().zip(&pu.centers) {
            for x in 0..s.len() {
                if phi[x] > 0.0 {
                    prop_assert!(s.dist(x, c) < 2.0 * r);
                }
                for y in 0..s.len() {
                    let lip = pu.lipschitz_constant / r * s.dist(x, y);
                    prop_assert!((phi[x] - phi[y]).abs() <= lip + 1e-12);
                }
            }
        }
        // centers are r-separated
        for (a, &ca) in pu.centers.iter().enumerate() {
            for &cb in &pu.centers[a + 1..] {
                prop_assert!(s.dist(ca, cb) >= r);
            }
        }
    }

    #[test]
    fn distance_weighting_does_not_change_balls(pts in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 2..40),
                                                 k in 0.1..10.0f64, r in 0.05..0.5f64) {
        let s = cloud(&pts);
        let t = s.with_weights(vec![k; s.len()]).unwrap();
        for i in 0..s.len() {
            prop_assert_eq!(s.ball(i, r).indices, t.ball(i, r).indices);
        }
    }
}

#[test]
fn density_ratio_converges_on_refining_grids() {
    // mass 1/n² per cell of area h² = 1/(n−1)²
    let mut errs = Vec::new();
    for n in [41usize, 81, 161] {
        let s = grid(n);
        let s = s.with_weights(vec![1.0 / (n * n) as f64; n * n]).unwrap();
        let center = (n / 2) * n + n / 2;
        let r = 0.15;
        let theta = density_theta(&s, center, 2, &[r]).unwrap()[0];
        let density = ((n - 1) as f64 / n as f64).powi(2);
        errs.push((theta / density - 1.0).abs());
    }
    assert!(errs[2] < errs[0], "{errs:?}");
    assert!(errs[2] < 0.02, "{errs:?}");
}

#[test]
fn torus_distance_wraps() {
    let s = torus(10);
    // (0, 0) and (0.9, 0) are one spacing apart across the seam
    assert!((s.dist(0, 90) - 0.1).abs() < 1e-12);
}
