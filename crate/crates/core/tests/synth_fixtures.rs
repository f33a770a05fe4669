use ks_core::chart::{alignment_defect, chart_audit};
use ks_core::energy::{density_via_mdiff, FitConfig};
use ks_core::synth::{make_aligned_family, make_fixture, Fixture, FixtureFamily, FixtureSpec};

fn spec(family: FixtureFamily, dim: usize, resolution: usize) -> FixtureSpec {
    FixtureSpec {
        family,
        dim,
        resolution,
        epsilon: 0.05,
        seed: 3,
    }
}

fn fixtures() -> Vec<Fixture> {
    [
        spec(FixtureFamily::EuclideanGrid, 1, 401),
        spec(FixtureFamily::EuclideanGrid, 2, 49),
        spec(FixtureFamily::EuclideanGrid, 3, 17),
        spec(FixtureFamily::FlatTorusGrid, 1, 256),
        spec(FixtureFamily::FlatTorusGrid, 2, 48),
        spec(FixtureFamily::TwoChartCurve, 1, 400),
    ]
    .iter()
    .map(|s| make_fixture(s).unwrap())
    .collect()
}

#[test]
fn fixtures_pass_their_audits() {
    for fx in fixtures() {
        let eps = fx.spec.epsilon;
        for c in fx.atlas.charts().iter().chain(&fx.overlapping) {
            let a = chart_audit(&fx.space, c).unwrap();
            assert!(a.passes && a.slack <= eps, "{:?}: {a:?}", fx.spec);
        }
        if let [c1, c2] = fx.overlapping.as_slice() {
            assert!(alignment_defect(&fx.space, c1, c2).unwrap() <= 2.0 * eps + 1e-12);
        }
        // member sets partition the points with the uncovered rest
        let mut seen = vec![0u8; fx.space.len()];
        for c in fx.atlas.charts() {
            for &i in c.indices() {
                seen[i] += 1;
            }
        }
        for &i in fx.atlas.uncovered() {
            seen[i] += 1;
        }
        assert!(seen.iter().all(|&k| k == 1));
    }
}

#[test]
fn aligned_families_pass_pairwise_defects() {
    let s = spec(FixtureFamily::EuclideanGrid, 2, 33);
    let eps = [0.2, 0.1, 0.05];
    let fam = make_aligned_family(&s, &eps).unwrap();
    let space = make_fixture(&s).unwrap().space;
    for a in 0..fam.len() {
        for b in (a + 1)..fam.len() {
            for (x, y) in fam[a].charts().iter().zip(fam[b].charts()) {
                assert!(alignment_defect(&space, x, y).unwrap() <= eps[a] + eps[b] + 1e-12);
            }
        }
    }
}

#[test]
fn reference_densities_match_mdiff() {
    for fx in fixtures() {
        // fit balls span about two spacings
        let inner = fx.interior(4.0 * fx.spacing);
        for m in &fx.maps {
            let u = m.on(&fx.space).unwrap();
            let est = density_via_mdiff(&u, &fx.atlas, 2.0, &FitConfig::default()).unwrap();
            let mut total = 0;
            let mut good = 0;
            for (i, e) in est.iter().enumerate() {
                if !inner[i] || fx.atlas.chart_of(i).is_none() {
                    continue;
                }
                // the fold is not differentiable
                if let (Some(fd), "tree-fold") = (&fx.fold_distance, m.name.as_str()) {
                    if fd[i] < 4.0 * fx.spacing {
                        continue;
                    }
                }
                total += 1;
                if let Some(d) = e.density {
                    if (d - m.density).abs() <= 0.05 * m.density.max(1e-9) {
                        good += 1;
                    }
                }
            }
            assert!(total > 0, "{:?} map {}", fx.spec, m.name);
            let frac = good as f64 / total as f64;
            assert!(frac >= 0.95, "{:?} map {}: {frac}", fx.spec.family, m.name);
        }
    }
}

#[test]
fn fixtures_are_deterministic() {
    let s = spec(FixtureFamily::TwoChartCurve, 1, 200);
    let a = make_fixture(&s).unwrap();
    let b = make_fixture(&s).unwrap();
    assert_eq!(a.manifest(), b.manifest());
    assert_eq!(
        serde_json::to_value(a.atlas.to_spec()).unwrap(),
        serde_json::to_value(b.atlas.to_spec()).unwrap()
    );
}

#[test]
fn written_fixtures_roundtrip() {
    let fx = make_fixture(&spec(FixtureFamily::EuclideanGrid, 2, 20)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    fx.write(dir.path()).unwrap();
    for m in &fx.maps {
        assert!(dir.path().join(format!("map-{}.json", m.name)).exists());
        assert!(dir.path().join(format!("target-{}.json", m.name)).exists());
    }
    for f in ["space.json", "atlas.json", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}
