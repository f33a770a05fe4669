use ks_core::rng::seeded;
use ks_core::seminorm::{
    consistency_constant, random_psd, random_rank_one, size_p, sn_distance, Quadrature, Seminorm,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn quad() -> Quadrature {
    Quadrature {
        nodes: 1 << 14,
        ..Default::default()
    }
}

fn random_polyhedral(d: usize, k: usize, seed: u64) -> Seminorm {
    let mut rng = seeded(seed);
    let cov = (0..k)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    Seminorm::polyhedral(d, cov).unwrap()
}

fn any_seminorm(d: usize, seed: u64) -> Seminorm {
    let mut rng = seeded(seed);
    match seed % 3 {
        0 => random_psd(d, &mut rng),
        1 => random_rank_one(d, &mut rng),
        _ => random_polyhedral(d, 1 + (seed % 5) as usize, seed),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn size_is_homogeneous(d in 1usize..5, seed in any::<u64>(), lambda in 0.0..10.0f64, p in 1.1..6.0f64) {
        let n = any_seminorm(d, seed);
        let a = size_p(&n, p, quad()).unwrap().value;
        let b = size_p(&n.scaled(lambda), p, quad()).unwrap().value;
        prop_assert!((b - lambda * a).abs() <= 1e-10 * (1.0 + lambda * a));
    }

    #[test]
    fn size_is_monotone(d in 1usize..5, seed in any::<u64>(), p in 1.1..6.0f64) {
        // adding a covector can only raise a polyhedral seminorm
        let small = random_polyhedral(d, 2, seed);
        let Seminorm::Polyhedral { covectors, .. } = &small else { unreachable!() };
        let mut more = covectors.clone();
        more.push(vec![0.5; d]);
        let big = Seminorm::polyhedral(d, more).unwrap();
        prop_assert!(size_p(&small, p, quad()).unwrap().value <= size_p(&big, p, quad()).unwrap().value);
    }

    #[test]
    fn two_sided_comparison(d in 1usize..6, seed in any::<u64>()) {
        let n = any_seminorm(d, seed);
        let s = size_p(&n, 2.0, Quadrature::default()).unwrap().value;
        let op = n.op_norm();
        let c = consistency_constant(d).unwrap();
        let slack = 2e-3 * op;
        prop_assert!(op / c <= s + slack, "lower: {} vs {s}", op / c);
        prop_assert!(s <= op * (d as f64 / (d as f64 + 2.0)).sqrt() + slack, "upper");
    }

    #[test]
    fn hs_trace_invariance(d in 1usize..6, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let n = random_psd(d, &mut rng);
        // a random orthonormal basis from a QR factorization
        let m = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        let q = m.qr().q();
        let sum: f64 = (0..d)
            .map(|k| {
                let e: Vec<f64> = q.column(k).iter().cloned().collect();
                n.eval(&e).unwrap().powi(2)
            })
            .sum();
        let hs = n.hs_norm().unwrap();
        prop_assert!((hs * hs - sum).abs() <= 1e-9 * (1.0 + sum));
    }

    #[test]
    fn sn_distance_is_a_pseudometric(d in 1usize..4, s1 in any::<u64>(), s2 in any::<u64>(), s3 in any::<u64>()) {
        let (a, b, c) = (any_seminorm(d, s1), any_seminorm(d, s2), any_seminorm(d, s3));
        let ab = sn_distance(&a, &b, 64).unwrap();
        let ba = sn_distance(&b, &a, 64).unwrap();
        let bc = sn_distance(&b, &c, 64).unwrap();
        let ac = sn_distance(&a, &c, 64).unwrap();
        prop_assert!((ab.value - ba.value).abs() <= 1e-12 + ab.gap.max(ba.gap));
        // each value is a lower bound within `gap` of the supremum
        prop_assert!(ac.value <= ab.value + ab.gap + bc.value + bc.gap + 1e-12);
        prop_assert!(sn_distance(&a, &a, 64).unwrap().value == 0.0);
    }

    #[test]
    fn seminorm_axioms(d in 1usize..5, seed in any::<u64>()) {
        let n = any_seminorm(d, seed);
        let mut rng = seeded(seed ^ 1);
        for _ in 0..10 {
            let v: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let w: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let t: f64 = rng.random_range(-3.0..3.0);
            let sum: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a + b).collect();
            let tv: Vec<f64> = v.iter().map(|a| t * a).collect();
            let (nv, nw) = (n.eval(&v).unwrap(), n.eval(&w).unwrap());
            prop_assert!(n.eval(&sum).unwrap() <= nv + nw + 1e-12);
            prop_assert!((n.eval(&tv).unwrap() - t.abs() * nv).abs() <= 1e-12 * (1.0 + nv * t.abs()));
        }
    }
}

#[test]
fn euclidean_norm_sizes() {
    // S_2 of the Euclidean norm is sqrt(d/(d+2))
    for d in 1..=5 {
        let s = size_p(&Seminorm::euclidean(d), 2.0, Quadrature::default()).unwrap().value;
        let want = (d as f64 / (d as f64 + 2.0)).sqrt();
        assert!((s - want).abs() < 1e-3 * want, "d = {d}: {s} vs {want}");
    }
}
