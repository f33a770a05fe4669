//! Local seminorm fits of target distances in chart coordinates.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::Chart;
use crate::error::{Error, Result};
use crate::map::MetricMap;
use crate::seminorm::{fibonacci_sphere, Family, Seminorm};

/// Directions scanned by polyhedral fits in the plane.
pub const DICTIONARY_2D: usize = 64;
/// Directions scanned by polyhedral fits in space.
pub const DICTIONARY_3D: usize = 256;
/// Largest number of covectors a polyhedral fit selects.
const MAX_COVECTORS: usize = 8;
/// Smallest singular value ratio accepted in the quadratic design.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub point: usize,
    #[serde(serialize_with = "as_spec")]
    pub seminorm: Seminorm,
    /// `RMS(d_Y − n(Δφ)) / RMS(d_Y)`, zero when all distances vanish.
    pub residual: f64,
    pub neighbors: usize,
    pub radius: f64,
}

fn as_spec<S: serde::Serializer>(n: &Seminorm, s: S) -> std::result::Result<S::Ok, S::Error> {
    n.to_spec().serialize(s)
}

/// Smallest radius whose open ball around `i` holds `4(d+1)` chart members
/// besides `i`.
pub fn default_fit_radius(chart: &Chart, space: &crate::space::PointCloudSpace, i: usize) -> Result<f64> {
    Ok(default_fit_ball(chart, space, i)?.0)
}

/// The default fit radius together with the chart members (other than `i`)
/// of the ball it bounds, in index order.
fn default_fit_ball(chart: &Chart, space: &crate::space::PointCloudSpace, i: usize) -> Result<(f64, Vec<usize>)> {
    let want = 4 * (chart.dim() + 1);
    if chart.len() <= want {
        return Err(Error::InsufficientNeighbors {
            point: i,
            neighbors: chart.len().saturating_sub(1),
            required: want,
        });
    }
    // a ball of about `want` points on a uniform sample; doubling covers the rest
    let mut r = (want as f64).powf(1.0 / chart.dim().max(1) as f64) * space.median_spacing().max(space.min_spacing());
    loop {
        let nb: Vec<(usize, f64)> = space
            .neighbors(i, r)
            .into_iter()
            .filter(|&(j, _)| j != i && chart.contains(j))
            .collect();
        if nb.len() >= want {
            let mut d: Vec<f64> = nb.iter().map(|&(_, d)| d).collect();
            let (_, &mut kth, _) = d.select_nth_unstable_by(want - 1, f64::total_cmp);
            // open balls: step just past the required distance
            let radius = kth * (1.0 + 1e-9);
            let members = nb.into_iter().filter(|&(_, d)| d < radius).map(|(j, _)| j).collect();
            return Ok((radius, members));
        }
        r *= 2.0;
    }
}

/// Dictionary of unit covectors for polyhedral fits.
fn dictionary(d: usize) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0]],
        2 => (0..DICTIONARY_2D)
            .map(|k| {
                let t = std::f64::consts::PI * k as f64 / DICTIONARY_2D as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => fibonacci_sphere(DICTIONARY_3D),
        _ => {
            let quad = crate::seminorm::Quadrature {
                nodes: 64 * d * d,
                seed: 11,
            };
            crate::seminorm::ball_nodes(d, quad)
                .chunks(d)
                .map(|w| {
                    let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                    w.iter().map(|x| x / n).collect()
                })
                .collect()
        }
    }
}

fn polyhedral_loss(dist: &[f64], base: &[f64], proj: &[f64], lambda: f64) -> f64 {
    dist.iter()
        .zip(base)
        .zip(proj)
        .map(|((y, b), p)| {
            let v = b.max(lambda * p);
            (y - v) * (y - v)
        })
        .sum()
}

/// Best scale for one direction: scan the breakpoint ratios, then polish by
/// the closed-form least squares on the active set.
fn best_scale(dist: &[f64], base: &[f64], proj: &[f64]) -> (f64, f64) {
    let mut best = (polyhedral_loss(dist, base, proj, 0.0), 0.0);
    for (y, p) in dist.iter().zip(proj) {
        if *p > 0.0 {
            let lambda = y / p;
            let l = polyhedral_loss(dist, base, proj, lambda);
            if l < best.0 {
                best = (l, lambda);
            }
        }
    }
    for _ in 0..20 {
        let lambda = best.1;
        let (mut num, mut den) = (0.0, 0.0);
        for ((y, b), p) in dist.iter().zip(base).zip(proj) {
            if lambda * p > *b {
                num += y * p;
                den += p * p;
            }
        }
        if den == 0.0 {
            break;
        }
        let next = num / den;
        let l = polyhedral_loss(dist, base, proj, next);
        if l < best.0 - 1e-15 * best.0.max(1e-300) {
            best = (l, next);
        } else {
            break;
        }
    }
    (best.1, best.0)
}

fn fit_polyhedral(dim: usize, deltas: &[Vec<f64>], dist: &[f64]) -> Seminorm {
    let dict = dictionary(dim);
    let projections: Vec<Vec<f64>> = dict
        .iter()
        .map(|e| {
            deltas
                .iter()
                .map(|v| e.iter().zip(v).map(|(a, b)| a * b).sum::<f64>().abs())
                .collect()
        })
        .collect();
    let mut base = vec![0.0; dist.len()];
    let mut loss: f64 = dist.iter().map(|y| y * y).sum();
    let mut covectors: Vec<Vec<f64>> = Vec::new();
    for _ in 0..MAX_COVECTORS {
        let mut choice: Option<(usize, f64, f64)> = None;
        for (k, proj) in projections.iter().enumerate() {
            let (lambda, l) = best_scale(dist, &base, proj);
            if lambda > 0.0 && choice.is_none_or(|c| l < c.2) {
                choice = Some((k, lambda, l));
            }
        }
        let Some((k, lambda, l)) = choice else { break };
        if l >= loss * (1.0 - 1e-9) {
            break;
        }
        loss = l;
        for (b, p) in base.iter_mut().zip(&projections[k]) {
            *b = b.max(lambda * p);
        }
        covectors.push(dict[k].iter().map(|x| x * lambda).collect());
    }
    Seminorm::Polyhedral { dim, covectors }
}

fn fit_quadratic(point: usize, dim: usize, deltas: &[Vec<f64>], dist: &[f64]) -> Result<Seminorm> {
    let pairs: Vec<(usize, usize)> = (0..dim).flat_map(|a| (a..dim).map(move |b| (a, b))).collect();
    let m = deltas.len();
    let design = DMatrix::from_fn(m, pairs.len(), |r, c| {
        let (a, b) = pairs[c];
        let v = &deltas[r];
        if a == b {
            v[a] * v[a]
        } else {
            2.0 * v[a] * v[b]
        }
    });
    let rhs = DVector::from_iterator(m, dist.iter().map(|y| y * y));
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin < RANK_TOL * smax {
        return Err(Error::RankDeficient {
            point,
            detail: format!("singular value ratio {:e} in the Gram design", smin / smax.max(1e-300)),
        });
    }
    let sol = svd
        .solve(&rhs, RANK_TOL * smax)
        .map_err(|e| Error::RankDeficient {
            point,
            detail: e.to_string(),
        })?;
    let mut q = DMatrix::zeros(dim, dim);
    for (c, &(a, b)) in pairs.iter().enumerate() {
        q[(a, b)] = sol[c];
        q[(b, a)] = sol[c];
    }
    Ok(Seminorm::psd_projection(q))
}

/// Fits a seminorm `n` with `d_Y(u(y), u(x_i)) ≈ n(φ(y) − φ(x_i))` over the
/// chart members of `B_radius(x_i)`.
///
/// Quadratic fits solve least squares on squared distances for the Gram
/// entries and clamp the result to be PSD. Polyhedral fits greedily add
/// covectors from a fixed direction dictionary, each with its best scale.
pub fn fit_metric_differential(
    chart: &Chart,
    u: &MetricMap<'_>,
    i: usize,
    radius: Option<f64>,
    family: Family,
) -> Result<FitReport> {
    let space = u.space();
    let origin = chart.phi(i).ok_or(Error::NotChartMember { point: i })?;
    let (radius, members) = match radius {
        Some(r) if r > 0.0 => {
            let members: Vec<usize> = space
                .neighbors(i, r)
                .into_iter()
                .filter(|&(j, _)| j != i && chart.contains(j))
                .map(|(j, _)| j)
                .collect();
            (r, members)
        }
        Some(r) => return Err(Error::InvalidParameter(format!("fit radius must be positive, got {r}"))),
        None => default_fit_ball(chart, space, i)?,
    };
    let d = chart.dim();
    let required = match family {
        Family::Quadratic => (d + 1).max(d * (d + 1) / 2),
        Family::Polyhedral => d + 1,
    };
    if members.len() < required {
        return Err(Error::InsufficientNeighbors {
            point: i,
            neighbors: members.len(),
            required,
        });
    }
    let deltas: Vec<Vec<f64>> = members
        .iter()
        .map(|&j| {
            let p = chart.phi(j).expect("member");
            p.iter().zip(origin).map(|(a, b)| a - b).collect()
        })
        .collect();
    let dist: Vec<f64> = members.iter().map(|&j| u.dist(i, j)).collect();

    let seminorm = match family {
        Family::Quadratic => fit_quadratic(i, d, &deltas, &dist)?,
        Family::Polyhedral => fit_polyhedral(d, &deltas, &dist),
    };
    let scale: f64 = dist.iter().map(|y| y * y).sum::<f64>();
    let err: f64 = deltas
        .iter()
        .zip(&dist)
        .map(|(v, y)| (y - seminorm.eval_unchecked(v)).powi(2))
        .sum();
    let residual = if scale > 0.0 { (err / scale).sqrt() } else { 0.0 };
    Ok(FitReport {
        point: i,
        seminorm,
        residual,
        neighbors: members.len(),
        radius,
    })
}

/// `max_{y ∈ B_radius(x_i), y ≠ i} d_Y(u(y), u(x_i)) / d(y, x_i)`.
pub fn aplip_estimate(u: &MetricMap<'_>, i: usize, radius: f64) -> Result<f64> {
    let space = u.space();
    if i >= space.len() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: space.len(),
        });
    }
    let nb = space.neighbors(i, radius);
    if nb.len() < 2 {
        return Err(Error::InsufficientNeighbors {
            point: i,
            neighbors: 0,
            required: 1,
        });
    }
    Ok(nb
        .into_iter()
        .filter(|&(j, _)| j != i)
        .map(|(j, d)| u.dist(i, j) / d)
        .fold(0.0, f64::max))
}
