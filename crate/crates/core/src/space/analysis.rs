//! Doubling, maximal-function, partition-of-unity and density estimates.

use rayon::prelude::*;
use serde::Serialize;

use super::PointCloudSpace;
use crate::error::{Error, Result};

/// Ratio of consecutive radii in every sup-over-radius scan.
pub const RADIUS_RATIO: f64 = 1.1;

/// Geometric radius grid `r_min, 1.1 r_min, ...` strictly below `r_max`.
pub fn radius_grid(r_min: f64, r_max: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if !(r_min > 0.0) {
        return out;
    }
    let mut k = 0i32;
    loop {
        let r = r_min * RADIUS_RATIO.powi(k);
        if r >= r_max {
            return out;
        }
        out.push(r);
        k += 1;
    }
}

#[derive(Debug, Clone, Default)]
pub struct DoublingOptions {
    /// Smallest radius scanned; defaults to ten times the minimal spacing.
    pub r_min: Option<f64>,
    /// Restrict the scan to these centers.
    pub centers: Option<Vec<usize>>,
}

/// Multiplier of the minimal interpoint distance giving the default smallest
/// radius of the doubling scan.
pub const DOUBLING_RMIN_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Serialize)]
pub struct DoublingEstimate {
    pub value: f64,
    pub r_min: f64,
    pub radii: usize,
    /// `(center, radius)` attaining the maximum, if any radius was usable.
    pub argmax: Option<(usize, f64)>,
}

/// Estimates `Doub(R)`: the largest `m(B_2r(x)) / m(B_r(x))` over all centers
/// and grid radii `r < R`, skipping radii whose ball is a single point.
pub fn doubling_constant(
    space: &PointCloudSpace,
    big_r: f64,
    opts: &DoublingOptions,
) -> Result<DoublingEstimate> {
    if !(big_r > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "R must be positive, got {big_r}"
        )));
    }
    if space.len() == 1 {
        return Ok(DoublingEstimate {
            value: 1.0,
            r_min: 0.0,
            radii: 0,
            argmax: None,
        });
    }
    let r_min = opts
        .r_min
        .unwrap_or(DOUBLING_RMIN_FACTOR * space.min_spacing());
    let radii = radius_grid(r_min, big_r);
    let centers: Vec<usize> = match &opts.centers {
        Some(c) => c.clone(),
        None => (0..space.len()).collect(),
    };
    let reach = radii.last().map_or(0.0, |r| 2.0 * r);

    let per_center: Vec<Option<(f64, f64)>> = centers
        .par_iter()
        .map(|&x| {
            let nb = space.neighbors_by_distance(x, reach);
            let mut cum = Vec::with_capacity(nb.len());
            let mut acc = 0.0;
            for &(j, _) in &nb {
                acc += space.weight(j);
                cum.push(acc);
            }
            let mass_below = |r: f64| {
                let k = nb.partition_point(|&(_, d)| d < r);
                (k, if k == 0 { 0.0 } else { cum[k - 1] })
            };
            let mut best: Option<(f64, f64)> = None;
            for &r in &radii {
                let (count, inner) = mass_below(r);
                if count <= 1 {
                    continue;
                }
                let (_, outer) = mass_below(2.0 * r);
                let ratio = outer / inner;
                if best.is_none_or(|b| ratio > b.0) {
                    best = Some((ratio, r));
                }
            }
            best
        })
        .collect();

    let mut value = 1.0;
    let mut argmax = None;
    for (k, best) in per_center.iter().enumerate() {
        if let Some((ratio, r)) = best {
            if *ratio > value || argmax.is_none() {
                value = value.max(*ratio);
                argmax = Some((centers[k], *r));
            }
        }
    }
    Ok(DoublingEstimate {
        value,
        r_min,
        radii: radii.len(),
        argmax,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MaximalReport {
    pub values: Vec<f64>,
    /// A constant `C` with `‖M_R f‖₂ ≤ C ‖f‖₂` for every `f` on this space.
    pub l2_bound: f64,
    pub r_min: f64,
    pub radii: usize,
}

/// The maximal function `M_R(f)(x) = max_r avg_{B_r(x)} |f|` over the radius
/// grid from twice the minimal spacing up to `R`.
///
/// The reported `l2_bound` is `sqrt(max_y Σ_x w_x / m(B_ρ(x,y)(x)))` where
/// `ρ(x, y)` is the smallest grid radius exceeding `d(x, y)`. Jensen's
/// inequality gives `(M f)² ≤ max_r avg_{B_r} f²`, and summing that kernel
/// against the weights bounds the L² operator norm.
pub fn maximal_function(space: &PointCloudSpace, f: &[f64], big_r: f64) -> Result<MaximalReport> {
    if !(big_r > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "R must be positive, got {big_r}"
        )));
    }
    if f.len() != space.len() {
        return Err(Error::MapLength {
            expected: space.len(),
            found: f.len(),
        });
    }
    let r_min = if space.len() > 1 {
        2.0 * space.min_spacing()
    } else {
        big_r
    };
    let radii = radius_grid(r_min, big_r);
    let reach = radii.last().copied().unwrap_or(0.0);

    let rows: Vec<(f64, Vec<(usize, f64)>)> = (0..space.len())
        .into_par_iter()
        .map(|x| {
            if radii.is_empty() {
                return (f[x].abs(), vec![(x, 1.0)]);
            }
            let nb = space.neighbors_by_distance(x, reach);
            let mut cum_w = Vec::with_capacity(nb.len());
            let mut cum_f = Vec::with_capacity(nb.len());
            let (mut aw, mut af) = (0.0, 0.0);
            for &(j, _) in &nb {
                aw += space.weight(j);
                af += space.weight(j) * f[j].abs();
                cum_w.push(aw);
                cum_f.push(af);
            }
            let mut best = 0.0f64;
            let mut ball_mass = Vec::with_capacity(radii.len());
            let mut counts = Vec::with_capacity(radii.len());
            for &r in &radii {
                let k = nb.partition_point(|&(_, d)| d < r);
                best = best.max(cum_f[k - 1] / cum_w[k - 1]);
                ball_mass.push(cum_w[k - 1]);
                counts.push(k);
            }
            // kernel column contributions: the first radius containing y wins
            let wx = space.weight(x);
            let mut kernel = Vec::with_capacity(nb.len());
            let mut level = 0;
            for (pos, &(y, _)) in nb.iter().enumerate() {
                while counts[level] <= pos {
                    level += 1;
                }
                kernel.push((y, wx / ball_mass[level]));
            }
            (best, kernel)
        })
        .collect();

    let mut column = vec![0.0; space.len()];
    let mut values = Vec::with_capacity(space.len());
    for (best, kernel) in rows {
        values.push(best);
        for (y, c) in kernel {
            column[y] += c;
        }
    }
    // with no radii M f = |f| and the kernel column is w_y / w_y = 1
    let l2_bound = column.iter().copied().fold(0.0f64, f64::max).sqrt();
    Ok(MaximalReport {
        values,
        l2_bound,
        r_min,
        radii: radii.len(),
    })
}

/// Partition of unity subordinate to balls of radius `2r` around a maximal
/// `r`-separated set of centers.
#[derive(Debug, Clone, Serialize)]
pub struct PartitionOfUnity {
    pub radius: f64,
    pub centers: Vec<usize>,
    /// `values[i][x]` is `φ_i(x)`.
    pub values: Vec<Vec<f64>>,
    /// Largest number of functions nonzero at a single point.
    pub overlap: usize,
    /// Largest number of balls `B_i = B_2r(y_i)` containing a single point.
    pub ball_overlap: usize,
    /// `C` such that every `φ_i` is `C/r`-Lipschitz on the samples.
    pub lipschitz_constant: f64,
}

/// Greedy maximal `r`-separated centers (in index order) with tent functions
/// `ψ_i = (3r/2 − d(·, y_i))⁺` normalized by their sum.
///
/// On the samples every point lies within `r` of a center so `Σψ > r/2`, and
/// `|φ_i(x) − φ_i(y)| ≤ d(x,y)·(2/r)(1 + n_xy)` where `n_xy` counts the tents
/// nonzero at `x` or `y`. Hence `C = 2 + 4·overlap`.
pub fn partition_of_unity(
    space: &PointCloudSpace,
    r: f64,
    reference_scale: f64,
) -> Result<PartitionOfUnity> {
    if space.is_empty() {
        return Err(Error::EmptySpace);
    }
    if !(r > 0.0 && r < reference_scale / 4.0) {
        return Err(Error::InvalidParameter(format!(
            "partition radius must lie in (0, {}), got {r}",
            reference_scale / 4.0
        )));
    }
    let n = space.len();
    let mut is_center = vec![false; n];
    let mut centers = Vec::new();
    for x in 0..n {
        let covered = space.neighbors(x, r).iter().any(|&(j, _)| is_center[j]);
        if !covered {
            is_center[x] = true;
            centers.push(x);
        }
    }

    let mut psi = vec![vec![0.0; n]; centers.len()];
    let mut ball_count = vec![0usize; n];
    for (i, &c) in centers.iter().enumerate() {
        for (x, d) in space.neighbors(c, 2.0 * r) {
            ball_count[x] += 1;
            psi[i][x] = (1.5 * r - d).max(0.0);
        }
    }
    let mut sum = vec![0.0; n];
    let mut support = vec![0usize; n];
    for row in &psi {
        for x in 0..n {
            sum[x] += row[x];
            if row[x] > 0.0 {
                support[x] += 1;
            }
        }
    }
    let values: Vec<Vec<f64>> = psi
        .into_iter()
        .map(|row| row.iter().zip(&sum).map(|(p, s)| p / s).collect())
        .collect();
    let overlap = support.iter().copied().max().unwrap_or(0);
    Ok(PartitionOfUnity {
        radius: r,
        centers,
        values,
        overlap,
        ball_overlap: ball_count.iter().copied().max().unwrap_or(0),
        lipschitz_constant: 2.0 + 4.0 * overlap as f64,
    })
}

/// Volume of the Euclidean unit ball in dimension `d`.
pub(crate) fn unit_ball_volume(d: usize) -> f64 {
    use std::f64::consts::PI;
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(d - 2) * 2.0 * PI / d as f64,
    }
}

/// `m(B_r(x_i)) / (ω_d r^d)` for each radius.
pub fn density_theta(
    space: &PointCloudSpace,
    i: usize,
    d: usize,
    radii: &[f64],
) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::InvalidParameter(
            "dimension must be at least 1".into(),
        ));
    }
    if i >= space.len() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: space.len(),
        });
    }
    radii
        .iter()
        .map(|&r| {
            if !(r > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "radius must be positive, got {r}"
                )));
            }
            Ok(space.ball_mass(i, r) / (unit_ball_volume(d) * r.powi(d as i32)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> PointCloudSpace {
        let pts = (0..n).map(|i| vec![i as f64 / (n - 1) as f64]).collect();
        PointCloudSpace::euclidean(pts, None).unwrap()
    }

    fn square(n: usize) -> PointCloudSpace {
        let mut pts = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                pts.push(vec![i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64]);
            }
        }
        PointCloudSpace::euclidean(pts, None).unwrap()
    }

    /// Direct scan: every center, every grid radius, counting masses from scratch.
    fn brute_doubling(s: &PointCloudSpace, big_r: f64, r_min: f64, centers: &[usize]) -> f64 {
        let mut best = 1.0f64;
        for &x in centers {
            for r in radius_grid(r_min, big_r) {
                let inner: Vec<usize> = (0..s.len()).filter(|&j| s.dist(x, j) < r).collect();
                if inner.len() <= 1 {
                    continue;
                }
                let m_in: f64 = inner.iter().map(|&j| s.weight(j)).sum();
                let m_out: f64 = (0..s.len())
                    .filter(|&j| s.dist(x, j) < 2.0 * r)
                    .map(|j| s.weight(j))
                    .sum();
                best = best.max(m_out / m_in);
            }
        }
        best
    }

    #[test]
    fn doubling_on_unit_interval_grid() {
        let s = line(1001);
        let est = doubling_constant(&s, 0.1, &DoublingOptions::default()).unwrap();
        let all: Vec<usize> = (0..s.len()).collect();
        let oracle = brute_doubling(&s, 0.1, est.r_min, &all);
        assert_eq!(est.value, oracle);
        assert!((1.9..=2.1).contains(&est.value), "{}", est.value);
    }

    #[test]
    fn doubling_single_point_is_one() {
        let s = PointCloudSpace::euclidean(vec![vec![0.3]], None).unwrap();
        assert_eq!(
            doubling_constant(&s, 1.0, &Default::default())
                .unwrap()
                .value,
            1.0
        );
    }

    #[test]
    fn doubling_on_square_interior_centers() {
        let n = 401;
        let s = square(n);
        let centers: Vec<usize> = [(200, 200), (150, 260), (240, 170), (180, 181)]
            .iter()
            .map(|&(i, j)| i * n + j)
            .collect();
        let opts = DoublingOptions {
            r_min: None,
            centers: Some(centers.clone()),
        };
        let est = doubling_constant(&s, 0.05, &opts).unwrap();
        let oracle = brute_doubling(&s, 0.05, est.r_min, &centers);
        assert!((est.value - oracle).abs() < 1e-12);
        assert!((est.value - 4.0).abs() < 0.25, "{}", est.value);
    }

    #[test]
    fn doubling_monotone_in_r() {
        let s = line(301);
        let mut last = 0.0;
        for big_r in [0.05, 0.1, 0.2, 0.4] {
            let v = doubling_constant(&s, big_r, &Default::default())
                .unwrap()
                .value;
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn maximal_of_constant() {
        let s = line(201);
        let f = vec![-2.5; 201];
        let m = maximal_function(&s, &f, 0.2).unwrap();
        assert!(m.values.iter().all(|v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn maximal_indicator_matches_radius_scan() {
        let s = line(101);
        let f: Vec<f64> = (0..101).map(|i| if i < 50 { 1.0 } else { 0.0 }).collect();
        let m = maximal_function(&s, &f, 0.5).unwrap();
        let x = 75;
        let mut oracle = 0.0f64;
        for r in radius_grid(2.0 * 0.01, 0.5) {
            let ball: Vec<usize> = (0..101).filter(|&j| s.dist(x, j) < r).collect();
            let left = ball
                .iter()
                .filter(|&&j| s.coords(j).unwrap()[0] < 0.5)
                .count();
            oracle = oracle.max(left as f64 / ball.len() as f64);
        }
        assert!((m.values[x] - oracle).abs() < 1e-12);
        assert!(oracle > 0.0);
    }

    #[test]
    fn maximal_l2_bound_on_random_functions() {
        use rand::Rng;
        let s = line(500);
        let mut rng = crate::rng::seeded(7);
        for _ in 0..100 {
            let f: Vec<f64> = (0..500).map(|_| rng.random_range(-1.0..1.0)).collect();
            let m = maximal_function(&s, &f, 0.2).unwrap();
            let l2 = |v: &[f64]| {
                v.iter()
                    .zip(s.weights())
                    .map(|(a, w)| a * a * w)
                    .sum::<f64>()
                    .sqrt()
            };
            assert!(l2(&m.values) <= m.l2_bound * l2(&f) + 1e-12);
        }
    }

    #[test]
    fn maximal_is_sublinear() {
        let s = line(151);
        let f: Vec<f64> = (0..151).map(|i| (i as f64 * 0.37).sin()).collect();
        let g: Vec<f64> = (0..151).map(|i| (i as f64 * 0.11).cos() - 0.2).collect();
        let fg: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a + b).collect();
        let mf = maximal_function(&s, &f, 0.3).unwrap().values;
        let mg = maximal_function(&s, &g, 0.3).unwrap().values;
        let mfg = maximal_function(&s, &fg, 0.3).unwrap().values;
        let f3: Vec<f64> = f.iter().map(|a| 3.0 * a).collect();
        let m3 = maximal_function(&s, &f3, 0.3).unwrap().values;
        for x in 0..151 {
            assert!(mfg[x] <= mf[x] + mg[x] + 1e-12);
            assert!((m3[x] - 3.0 * mf[x]).abs() < 1e-12);
        }
    }

    #[test]
    fn partition_single_point() {
        let s = PointCloudSpace::euclidean(vec![vec![0.0, 0.0]], None).unwrap();
        let pu = partition_of_unity(&s, 0.1, 1.0).unwrap();
        assert_eq!(pu.values, vec![vec![1.0]]);
    }

    #[test]
    fn partition_invariants_on_interval() {
        let s = line(101);
        let pu = partition_of_unity(&s, 0.1, 1.0).unwrap();
        for x in 0..s.len() {
            let total: f64 = pu.values.iter().map(|row| row[x]).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
        // direct count of tents nonzero at each point
        let direct = (0..s.len())
            .map(|x| {
                pu.centers
                    .iter()
                    .filter(|&&c| 1.5 * 0.1 - s.dist(x, c) > 0.0)
                    .count()
            })
            .max()
            .unwrap();
        assert_eq!(pu.overlap, direct);
        assert!(pu.overlap <= 3);
        for (i, &c) in pu.centers.iter().enumerate() {
            for x in 0..s.len() {
                assert!((0.0..=1.0).contains(&pu.values[i][x]));
                if s.dist(x, c) >= 0.2 {
                    assert_eq!(pu.values[i][x], 0.0);
                }
                for y in 0..x {
                    let lip = (pu.values[i][x] - pu.values[i][y]).abs() / s.dist(x, y);
                    assert!(lip <= pu.lipschitz_constant / 0.1);
                }
            }
        }
    }

    #[test]
    fn partition_rejects_large_radius() {
        let s = line(11);
        assert!(partition_of_unity(&s, 0.3, 1.0).is_err());
        assert!(partition_of_unity(&s, 0.3, 2.0).is_ok());
    }

    #[test]
    fn density_on_square_grid() {
        let n = 100;
        let mut pts = Vec::new();
        for i in 0..n {
            for j in 0..n {
                pts.push(vec![
                    (i as f64 + 0.5) / n as f64,
                    (j as f64 + 0.5) / n as f64,
                ]);
            }
        }
        let s = PointCloudSpace::euclidean(pts, None).unwrap();
        let interior = 50 * n + 50;
        let theta = density_theta(&s, interior, 2, &[0.1]).unwrap()[0];
        // counting oracle
        let count = (0..s.len()).filter(|&j| s.dist(interior, j) < 0.1).count();
        let oracle = count as f64 / (n * n) as f64 / (std::f64::consts::PI * 0.01);
        assert!((theta - oracle).abs() < 1e-12);
        assert!((theta - 1.0).abs() < 0.05, "{theta}");
        let edge = 50; // first column, middle row
        let half = density_theta(&s, edge, 2, &[0.1]).unwrap()[0];
        assert!((half - 0.5).abs() < 0.05, "{half}");
    }

    #[test]
    fn density_single_point() {
        let s = PointCloudSpace::euclidean(vec![vec![0.0, 0.0]], Some(vec![2.0])).unwrap();
        let v = density_theta(&s, 0, 2, &[0.5]).unwrap()[0];
        assert!((v - 2.0 / (std::f64::consts::PI * 0.25)).abs() < 1e-12);
    }

    #[test]
    fn unit_ball_volumes() {
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-14);
    }
}
