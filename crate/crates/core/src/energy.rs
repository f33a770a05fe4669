//! Korevaar-Schoen energies at scale, scale sweeps and density estimates.

use rayon::prelude::*;
use serde::Serialize;

use crate::chart::{fit_metric_differential, Atlas};
use crate::error::{Error, Result};
use crate::map::MetricMap;
use crate::rng::seeded;
use crate::seminorm::{consistency_constant, size_p, Family, Quadrature};
use crate::space::PointCloudSpace;
use crate::target::{random_point, TargetPoint};

/// Scales below this multiple of the median spacing are flagged unreliable.
pub const RELIABILITY_FACTOR: f64 = 3.0;
/// Number of smallest reliable scales used by the extrapolation.
pub const EXTRAPOLATION_NODES: usize = 3;
/// Multiples of the median spacing used when no scales are given.
pub const DEFAULT_SCALE_MULTIPLES: [f64; 3] = [20.5, 16.5, 12.5];

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("exponent p must lie in [1, ∞), got {p}")))
    }
}

fn check_mask(space: &PointCloudSpace, omega: Option<&[bool]>) -> Result<()> {
    match omega {
        Some(m) if m.len() != space.len() => Err(Error::InvalidParameter(format!(
            "mask has {} entries, space has {} points",
            m.len(),
            space.len()
        ))),
        _ => Ok(()),
    }
}

/// Index list to mask.
pub fn mask_from_indices(n: usize, indices: &[usize]) -> Result<Vec<bool>> {
    let mut mask = vec![false; n];
    for &i in indices {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, len: n });
        }
        mask[i] = true;
    }
    Ok(mask)
}

/// `ks` at every scale (decreasing) from one neighbor query per point at the
/// largest scale.
fn ks_multi(u: &MetricMap<'_>, p: f64, scales: &[f64], omega: Option<&[bool]>) -> Vec<Vec<f64>> {
    let m = scales.len();
    let rows: Vec<Vec<f64>> = (0..u.len())
        .into_par_iter()
        .map(|i| {
            let mut mass = vec![0.0; m];
            let mut acc = vec![0.0; m];
            let mut outside = vec![false; m];
            u.space().for_each_neighbor(i, scales[0], |j, dx| {
                let w = u.space().weight(j);
                let dy = u.dist(i, j);
                let dyp = if p == 2.0 { dy * dy } else { dy.powf(p) };
                for k in 0..m {
                    if dx < scales[k] {
                        if omega.is_some_and(|mask| !mask[j]) {
                            outside[k] = true;
                        }
                        mass[k] += w;
                        acc[k] += w * dyp;
                    }
                }
            });
            (0..m)
                .map(|k| {
                    if outside[k] {
                        0.0
                    } else {
                        (acc[k] / mass[k] / scales[k].powf(p)).powf(1.0 / p)
                    }
                })
                .collect()
        })
        .collect();
    (0..m).map(|k| rows.iter().map(|row| row[k]).collect()).collect()
}

/// `ks_{p,r}[u](x) = (avg_{B_r(x)} d_Y(u(x), u(y))^p / r^p)^{1/p}` at every
/// point. With a mask, points whose ball leaves the mask get 0.
pub fn ks_at_scale(u: &MetricMap<'_>, p: f64, r: f64, omega: Option<&[bool]>) -> Result<Vec<f64>> {
    check_p(p)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter(format!("scale must be positive, got {r}")));
    }
    check_mask(u.space(), omega)?;
    Ok(ks_multi(u, p, &[r], omega).swap_remove(0))
}

/// `Σ_x w_x ks(x)^p`, summed in index order.
pub fn total_from_density(space: &PointCloudSpace, density: &[f64], p: f64) -> f64 {
    density
        .iter()
        .zip(space.weights())
        .map(|(k, w)| w * k.powf(p))
        .sum()
}

/// Half-integer multiples of the median spacing, largest first.
pub fn default_scales(space: &PointCloudSpace) -> Vec<f64> {
    let h = space.median_spacing();
    DEFAULT_SCALE_MULTIPLES.iter().map(|k| k * h).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    pub p: f64,
    /// Scales in decreasing order.
    pub scales: Vec<f64>,
    pub reliable: Vec<bool>,
    /// Smallest reliable scale, `3 ×` the median spacing.
    pub threshold: f64,
    pub per_scale_total: Vec<f64>,
    /// Smallest reliable scale.
    pub selected_scale: f64,
    /// `ks` at the selected scale.
    pub per_point_density: Vec<f64>,
    /// Totals extrapolated linearly in `r` to `r = 0`, clamped at zero.
    pub extrapolated_total: f64,
    /// Pointwise extrapolation of `ks^p`, clamped at zero, then the `p`-th root.
    pub extrapolated_density: Vec<f64>,
}

/// Least-squares line through `(x_k, y_k)` evaluated at 0.
fn intercept(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.len() == 1 {
        return y[0];
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    my - sxy / sxx * mx
}

/// Evaluates `ks` over a list of scales and extrapolates to `r = 0`.
pub fn energy_sweep(u: &MetricMap<'_>, p: f64, scales: &[f64], omega: Option<&[bool]>) -> Result<EnergyReport> {
    check_p(p)?;
    check_mask(u.space(), omega)?;
    if scales.is_empty() || scales.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidParameter("scales must be a nonempty list of positive numbers".into()));
    }
    let mut scales = scales.to_vec();
    scales.sort_by(|a, b| b.total_cmp(a));
    scales.dedup();
    let space = u.space();
    let threshold = RELIABILITY_FACTOR * space.median_spacing();
    let reliable: Vec<bool> = scales.iter().map(|&r| r >= threshold).collect();
    if !reliable.iter().any(|&b| b) {
        return Err(Error::NoReliableScale { threshold });
    }
    let mut densities = ks_multi(u, p, &scales, omega);
    let per_scale_total: Vec<f64> = densities.iter().map(|k| total_from_density(space, k, p)).collect();

    // the smallest reliable scales, smallest first
    let nodes: Vec<usize> = (0..scales.len())
        .rev()
        .filter(|&k| reliable[k])
        .take(EXTRAPOLATION_NODES)
        .collect();
    let selected = nodes[0];
    let xs: Vec<f64> = nodes.iter().map(|&k| scales[k]).collect();
    let totals: Vec<f64> = nodes.iter().map(|&k| per_scale_total[k]).collect();
    let extrapolated_total = intercept(&xs, &totals).max(0.0);
    let extrapolated_density = (0..space.len())
        .map(|i| {
            let ys: Vec<f64> = nodes.iter().map(|&k| densities[k][i].powf(p)).collect();
            intercept(&xs, &ys).max(0.0).powf(1.0 / p)
        })
        .collect();
    Ok(EnergyReport {
        p,
        threshold,
        selected_scale: scales[selected],
        per_point_density: densities.swap_remove(selected),
        scales,
        reliable,
        per_scale_total,
        extrapolated_total,
        extrapolated_density,
    })
}

/// Settings of the local metric-differential fits.
#[derive(Debug, Clone, Copy)]
pub struct FitConfig {
    pub family: Family,
    /// Fit radius; `None` picks the smallest ball with `4(d+1)` chart members.
    pub radius: Option<f64>,
    pub quadrature: Quadrature,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            family: Family::Quadratic,
            radius: None,
            quadrature: Quadrature::default(),
        }
    }
}

/// Density estimate at one point; `error` is set when the fit failed.
#[derive(Debug, Clone, Serialize)]
pub struct PointDensity {
    pub index: usize,
    pub density: Option<f64>,
    pub residual: Option<f64>,
    pub quadrature_error: Option<f64>,
    pub error: Option<String>,
}

impl PointDensity {
    fn failed(index: usize, e: Error) -> Self {
        PointDensity {
            index,
            density: None,
            residual: None,
            quadrature_error: None,
            error: Some(e.to_string()),
        }
    }
}

/// `e_p[u](x) ≈ S_p(md_x u)` from chart fits, one entry per domain point.
/// Points outside the atlas carry an error entry.
pub fn density_via_mdiff(u: &MetricMap<'_>, atlas: &Atlas, p: f64, cfg: &FitConfig) -> Result<Vec<PointDensity>> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("p must lie in (1, ∞), got {p}")));
    }
    Ok((0..u.len())
        .into_par_iter()
        .map(|i| {
            let Some(chart) = atlas.chart_of(i) else {
                return PointDensity::failed(i, Error::NotChartMember { point: i });
            };
            let fit = match fit_metric_differential(chart, u, i, cfg.radius, cfg.family) {
                Ok(f) => f,
                Err(e) => return PointDensity::failed(i, e),
            };
            match size_p(&fit.seminorm, p, cfg.quadrature) {
                Ok(s) => PointDensity {
                    index: i,
                    density: Some(s.value),
                    residual: Some(fit.residual),
                    quadrature_error: Some(s.rel_error),
                    error: None,
                },
                Err(e) => PointDensity::failed(i, e),
            }
        })
        .collect())
}

/// `|du|_HS / sqrt(d+2)` from quadratic fits, the closed form of `S_2`.
pub fn hs_energy(u: &MetricMap<'_>, atlas: &Atlas, radius: Option<f64>) -> Result<Vec<PointDensity>> {
    let d = atlas
        .dim()
        .ok_or_else(|| Error::InvalidAtlas("atlas has no charts".into()))?;
    let c = consistency_constant(d)?;
    Ok((0..u.len())
        .into_par_iter()
        .map(|i| {
            let Some(chart) = atlas.chart_of(i) else {
                return PointDensity::failed(i, Error::NotChartMember { point: i });
            };
            match fit_metric_differential(chart, u, i, radius, Family::Quadratic)
                .and_then(|f| Ok((f.seminorm.hs_norm()?, f.residual)))
            {
                Ok((hs, residual)) => PointDensity {
                    index: i,
                    density: Some(hs / c),
                    residual: Some(residual),
                    quadrature_error: None,
                    error: None,
                },
                Err(e) => PointDensity::failed(i, e),
            }
        })
        .collect())
}

/// Random target pairs added to the map-value pairs by the Lipschitz audit.
const LIPSCHITZ_SAMPLES: usize = 2000;
const LIPSCHITZ_SEED: u64 = 0x11b5;

/// Largest `d(φa, φb) / d(a, b)` over map-value pairs and seeded random pairs.
pub fn lipschitz_audit(
    u: &MetricMap<'_>,
    post: &(dyn Fn(&TargetPoint) -> TargetPoint + Sync),
) -> Result<(f64, usize, usize)> {
    let t = u.target();
    let mut pts: Vec<TargetPoint> = u.values().to_vec();
    let mut rng = seeded(LIPSCHITZ_SEED);
    for _ in 0..64 {
        pts.push(random_point(t, &mut rng));
    }
    let images: Vec<TargetPoint> = pts.iter().map(|x| t.check_point(&post(x))).collect::<Result<_>>()?;
    let mut worst = (0.0f64, 0, 0);
    let mut visit = |a: usize, b: usize| {
        let d = t.dist(&pts[a], &pts[b]);
        if d > 0.0 {
            let ratio = t.dist(&images[a], &images[b]) / d;
            if ratio > worst.0 {
                worst = (ratio, a, b);
            }
        }
    };
    let n = pts.len();
    if n <= 400 {
        for a in 0..n {
            for b in (a + 1)..n {
                visit(a, b);
            }
        }
    } else {
        use rand::Rng;
        for a in 0..n.saturating_sub(1) {
            visit(a, a + 1);
        }
        for _ in 0..LIPSCHITZ_SAMPLES * 50 {
            visit(rng.random_range(0..n), rng.random_range(0..n));
        }
    }
    Ok(worst)
}

/// `max_x (ks[φ∘u](x) − ks[u](x))` for a 1-Lipschitz self-map `φ` of the
/// target. Rejects `φ` when the audit finds a ratio above `1 + 1e-12`.
pub fn contraction_check(
    u: &MetricMap<'_>,
    post: &(dyn Fn(&TargetPoint) -> TargetPoint + Sync),
    p: f64,
    r: f64,
) -> Result<f64> {
    let (ratio, i, j) = lipschitz_audit(u, post)?;
    if ratio > 1.0 + 1e-12 {
        return Err(Error::NotContraction { i, j, ratio });
    }
    let v = MetricMap::new(u.space(), u.target(), u.values().iter().map(post).collect())?;
    let a = ks_at_scale(u, p, r, None)?;
    let b = ks_at_scale(&v, p, r, None)?;
    Ok(a.iter().zip(&b).map(|(x, y)| y - x).fold(f64::NEG_INFINITY, f64::max))
}

/// `G_R(x) = max_{y ∈ B_R(x), y ≠ x} d_Y(u(x), u(y)) / d(x, y)`, 0 on
/// isolated points.
pub fn hajlasz_gradient(u: &MetricMap<'_>, radius: f64) -> Result<Vec<f64>> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
    }
    Ok((0..u.len())
        .into_par_iter()
        .map(|i| {
            u.space()
                .neighbors(i, radius)
                .into_iter()
                .filter(|&(j, _)| j != i)
                .map(|(j, d)| u.dist(i, j) / d)
                .fold(0.0, f64::max)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HajlaszAudit {
    /// `max (d_Y(u(x),u(y)) − d(x,y)(G(x)+G(y)))` over pairs within `R`.
    pub pair_violation: f64,
    /// `max (ks²_{2,r}(x) − 4(G(x)² + avg_{B_r(x)} G²))`.
    pub energy_violation: f64,
}

/// Checks the pair bound of `G_R` and the energy bound at a scale `r < R`.
pub fn hajlasz_audit(u: &MetricMap<'_>, radius: f64, r: f64) -> Result<HajlaszAudit> {
    if !(r > 0.0 && r < radius) {
        return Err(Error::InvalidParameter(format!("need 0 < r < R, got r = {r}, R = {radius}")));
    }
    let g = hajlasz_gradient(u, radius)?;
    let space = u.space();
    let pair_violation = (0..u.len())
        .into_par_iter()
        .map(|i| {
            space
                .neighbors(i, radius)
                .into_iter()
                .filter(|&(j, _)| j != i)
                .map(|(j, d)| u.dist(i, j) - d * (g[i] + g[j]))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let ks = ks_at_scale(u, 2.0, r, None)?;
    let energy_violation = (0..u.len())
        .into_par_iter()
        .map(|i| {
            let ball = space.ball(i, r);
            let avg: f64 = ball
                .indices
                .iter()
                .zip(&ball.weights)
                .map(|(&j, w)| w * g[j] * g[j])
                .sum::<f64>()
                / ball.mass;
            ks[i] * ks[i] - 4.0 * (g[i] * g[i] + avg)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(HajlaszAudit {
        pair_violation,
        energy_violation,
    })
}

/// Which density estimate a locality check compares.
#[derive(Debug, Clone, Copy)]
pub enum DensitySource<'a> {
    Scale { p: f64, r: f64 },
    Mdiff { p: f64, atlas: &'a Atlas, cfg: FitConfig },
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LocalityReport {
    /// Points of the agreement set whose ball stays inside it.
    pub checked: usize,
    pub max_discrepancy: f64,
}

/// `max |e[u](x) − e[v](x)|` over points whose estimation ball lies in the
/// set where `u` and `v` agree exactly.
pub fn locality_check(u: &MetricMap<'_>, v: &MetricMap<'_>, source: DensitySource<'_>) -> Result<LocalityReport> {
    let space = u.space();
    if space.len() != v.len() {
        return Err(Error::MapLength {
            expected: space.len(),
            found: v.len(),
        });
    }
    let agree: Vec<bool> = u.pointwise_distance(v).iter().map(|&d| d == 0.0).collect();
    let inside = |i: usize, r: f64| agree[i] && space.neighbors(i, r).iter().all(|&(j, _)| agree[j]);
    let mut report = LocalityReport {
        checked: 0,
        max_discrepancy: 0.0,
    };
    match source {
        DensitySource::Scale { p, r } => {
            let a = ks_at_scale(u, p, r, None)?;
            let b = ks_at_scale(v, p, r, None)?;
            for i in 0..space.len() {
                if inside(i, r) {
                    report.checked += 1;
                    report.max_discrepancy = report.max_discrepancy.max((a[i] - b[i]).abs());
                }
            }
        }
        DensitySource::Mdiff { p, atlas, cfg } => {
            let a = density_via_mdiff(u, atlas, p, &cfg)?;
            let b = density_via_mdiff(v, atlas, p, &cfg)?;
            for i in 0..space.len() {
                let Some(chart) = atlas.chart_of(i) else { continue };
                let r = match cfg.radius {
                    Some(r) => r,
                    None => match crate::chart::default_fit_radius(chart, space, i) {
                        Ok(r) => r,
                        Err(_) => continue,
                    },
                };
                if let (Some(x), Some(y)) = (a[i].density, b[i].density) {
                    if inside(i, r) {
                        report.checked += 1;
                        report.max_discrepancy = report.max_discrepancy.max((x - y).abs());
                    }
                }
            }
        }
    }
    Ok(report)
}

/// `max_x (2ks²[m] + ½ks²[s] − ks²[u] − ks²[v])` at scale `r`, with `m` the
/// pointwise midpoint and `s` the pointwise distance as a real map.
pub fn midpoint_check(u: &MetricMap<'_>, v: &MetricMap<'_>, r: f64) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::MapLength {
            expected: u.len(),
            found: v.len(),
        });
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter(format!("scale must be positive, got {r}")));
    }
    let m = u.interpolate(v, 0.5)?;
    let s = u.pointwise_distance(v);
    let space = u.space();
    // all four ball averages from one neighbor list per point
    let table = space.neighbor_table(r);
    Ok((0..u.len())
        .into_par_iter()
        .map(|i| {
            let mut mass = 0.0;
            let mut acc = [0.0; 4];
            for &(j, _) in &table[i] {
                let w = space.weight(j);
                mass += w;
                let du = u.dist(i, j);
                let dv = v.dist(i, j);
                let dm = m.dist(i, j);
                let ds = s[i] - s[j];
                acc[0] += w * du * du;
                acc[1] += w * dv * dv;
                acc[2] += w * dm * dm;
                acc[3] += w * ds * ds;
            }
            let k2 = acc.map(|a| a / mass / (r * r));
            2.0 * k2[2] + 0.5 * k2[3] - k2[0] - k2[1]
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max))
}
