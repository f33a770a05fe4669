mod common;

use common::*;
use ks_core::energy::{
    contraction_check, energy_sweep, hajlasz_audit, ks_at_scale, locality_check, midpoint_check, total_from_density,
    DensitySource,
};
use ks_core::map::MetricMap;
use ks_core::rng::seeded;
use ks_core::space::PointCloudSpace;
use ks_core::target::{random_point, GeodesicTarget, MetricTree, TargetPoint};
use proptest::prelude::*;

fn targets() -> Vec<GeodesicTarget> {
    vec![
        GeodesicTarget::euclidean(2),
        star(&[1.0, 2.0, 0.5]),
        GeodesicTarget::Hyperbolic,
        GeodesicTarget::Product(vec![
            GeodesicTarget::Tree(MetricTree::star(&[1.0, 1.0, 1.0, 1.0]).unwrap()),
            GeodesicTarget::euclidean(1),
        ]),
    ]
}

fn random_cloud(n: usize, seed: u64) -> PointCloudSpace {
    use rand::Rng;
    let mut rng = seeded(seed);
    let pts = (0..n).map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect();
    let w = (0..n).map(|_| rng.random_range(0.2..2.0)).collect();
    PointCloudSpace::euclidean(pts, Some(w)).unwrap()
}

fn random_map<'a>(space: &'a PointCloudSpace, t: &'a GeodesicTarget, seed: u64) -> MetricMap<'a> {
    let mut rng = seeded(seed);
    let values = (0..space.len()).map(|_| random_point(t, &mut rng)).collect();
    MetricMap::new(space, t, values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ks_is_invariant_under_weight_rescaling(seed in any::<u64>(), k in 1e-3..1e3f64, r in 0.05..0.4f64, p in 1.0..4.0f64) {
        let s = random_cloud(80, seed);
        let scaled = s.with_weights(s.weights().iter().map(|w| k * w).collect()).unwrap();
        for t in targets() {
            let values = random_map(&s, &t, seed ^ 3).values().to_vec();
            let u = MetricMap::new(&s, &t, values.clone()).unwrap();
            let v = MetricMap::new(&scaled, &t, values).unwrap();
            let a = ks_at_scale(&u, p, r, None).unwrap();
            let b = ks_at_scale(&v, p, r, None).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x));
            }
        }
    }

    #[test]
    fn midpoint_inequality_at_every_scale(seed in any::<u64>(), r in 0.05..0.5f64) {
        let s = random_cloud(60, seed);
        for t in targets() {
            let u = random_map(&s, &t, seed ^ 5);
            let v = random_map(&s, &t, seed ^ 7);
            let worst = midpoint_check(&u, &v, r).unwrap();
            prop_assert!(worst <= 1e-9, "{}: {worst:e}", t.kind_name());
        }
    }

    #[test]
    fn hajlasz_bounds_hold(seed in any::<u64>(), big_r in 0.1..0.6f64, frac in 0.1..0.95f64) {
        let s = random_cloud(60, seed);
        for t in targets() {
            let u = random_map(&s, &t, seed ^ 9);
            let audit = hajlasz_audit(&u, big_r, frac * big_r).unwrap();
            prop_assert!(audit.pair_violation <= 1e-12);
            prop_assert!(audit.energy_violation <= 1e-9);
        }
    }

    #[test]
    fn projection_onto_a_line_contracts_energy(seed in any::<u64>(), angle in 0.0..std::f64::consts::PI, r in 0.05..0.4f64) {
        let s = random_cloud(60, seed);
        let t = GeodesicTarget::euclidean(2);
        let u = random_map(&s, &t, seed ^ 11);
        let (c, sn) = (angle.cos(), angle.sin());
        let project = move |p: &TargetPoint| match p {
            TargetPoint::Euclidean(v) => {
                let dot = v[0] * c + v[1] * sn;
                TargetPoint::Euclidean(vec![dot * c, dot * sn])
            }
            _ => unreachable!(),
        };
        prop_assert!(contraction_check(&u, &project, 2.0, r).unwrap() <= 1e-12);
    }

    #[test]
    fn ks_is_local(seed in any::<u64>(), cut in 0.3..0.7f64, r in 0.05..0.2f64) {
        // v differs from u only right of the cut
        let s = random_cloud(120, seed);
        for t in targets() {
            let u = random_map(&s, &t, seed ^ 13);
            let other = random_map(&s, &t, seed ^ 17);
            let values = (0..s.len())
                .map(|i| if s.coords(i).unwrap()[0] > cut { other.value(i).clone() } else { u.value(i).clone() })
                .collect();
            let v = MetricMap::new(&s, &t, values).unwrap();
            let rep = locality_check(&u, &v, DensitySource::Scale { p: 2.0, r }).unwrap();
            prop_assert_eq!(rep.max_discrepancy, 0.0);
        }
    }

    #[test]
    fn sweep_totals_are_bit_consistent(seed in any::<u64>(), p in 1.0..4.0f64) {
        let s = random_cloud(100, seed);
        let t = GeodesicTarget::Hyperbolic;
        let u = random_map(&s, &t, seed);
        let h = s.median_spacing();
        let scales = [9.5 * h, 7.5 * h, 5.5 * h, 3.5 * h, 1.5 * h];
        let rep = energy_sweep(&u, p, &scales, None).unwrap();
        for (k, &r) in rep.scales.iter().enumerate() {
            let ks = ks_at_scale(&u, p, r, None).unwrap();
            prop_assert_eq!(rep.per_scale_total[k].to_bits(), total_from_density(&s, &ks, p).to_bits());
            prop_assert!(rep.per_scale_total[k] >= 0.0);
        }
        prop_assert!(rep.extrapolated_total >= 0.0);
        prop_assert_eq!(&rep.reliable, &vec![true, true, true, true, false]);
    }
}

#[test]
fn target_dilation_doubles_ks() {
    let s = random_cloud(50, 1);
    let t = GeodesicTarget::euclidean(2);
    let u = random_map(&s, &t, 2);
    let doubled = MetricMap::new(
        &s,
        &t,
        u.values()
            .iter()
            .map(|p| match p {
                TargetPoint::Euclidean(v) => TargetPoint::Euclidean(v.iter().map(|x| 2.0 * x).collect()),
                _ => unreachable!(),
            })
            .collect(),
    )
    .unwrap();
    let a = ks_at_scale(&u, 2.0, 0.2, None).unwrap();
    let b = ks_at_scale(&doubled, 2.0, 0.2, None).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((y - 2.0 * x).abs() <= 1e-12 * (1.0 + y));
    }
}

#[test]
fn lower_semicontinuity_on_decaying_perturbations() {
    // u_n = identity plus a bump of height 1/n on [0.4, 0.6]; u_n → u in L²
    let n = 801;
    let space = line(n, None);
    let t = GeodesicTarget::euclidean(1);
    let h = 1.0 / (n - 1) as f64;
    let scales = [20.5 * h, 16.5 * h, 12.5 * h];
    let energy = |f: &dyn Fn(f64) -> f64| {
        let vals: Vec<f64> = (0..n).map(|i| f(i as f64 * h)).collect();
        let u = MetricMap::scalar(&space, &t, &vals).unwrap();
        energy_sweep(&u, 2.0, &scales, None).unwrap().extrapolated_total
    };
    let base = energy(&|x| x);
    let mut seq = Vec::new();
    for k in 1..=6 {
        let amp = 0.5f64.powi(k);
        let bump = move |x: f64| {
            if (0.4..=0.6).contains(&x) {
                amp * (std::f64::consts::PI * (x - 0.4) / 0.2).sin().powi(2)
            } else {
                0.0
            }
        };
        seq.push(energy(&move |x| x + bump(x)));
    }
    let liminf = seq.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(base <= liminf + 1e-6, "E(u) = {base}, inf E(u_n) = {liminf}");
    // and the sequence energies decrease towards the limit
    assert!(seq.windows(2).all(|w| w[1] <= w[0]), "{seq:?}");
    assert!((seq[5] - base).abs() < 0.01 * base);
}

#[test]
fn interior_density_of_the_identity_on_a_grid() {
    let n = 129;
    let space = grid(n);
    let t = GeodesicTarget::euclidean(2);
    let values = (0..space.len()).map(|i| euclid(space.coords(i).unwrap())).collect();
    let u = MetricMap::new(&space, &t, values).unwrap();
    let h = 1.0 / (n - 1) as f64;
    let scales = [12.5 * h, 10.5 * h, 8.5 * h];
    let rep = energy_sweep(&u, 2.0, &scales, None).unwrap();
    let want = 0.5f64.sqrt();
    for i in 0..space.len() {
        let c = space.coords(i).unwrap();
        if c.iter().all(|&x| x >= scales[0] && x <= 1.0 - scales[0]) {
            let e = rep.extrapolated_density[i];
            assert!((e - want).abs() <= 0.02 * want, "{e} at {c:?}");
        }
    }
}
