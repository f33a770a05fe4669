//! Charts, atlases and their audits.

mod fit;

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::space::PointCloudSpace;

pub use fit::{aplip_estimate, default_fit_radius, fit_metric_differential, FitReport, DICTIONARY_2D, DICTIONARY_3D};

/// Member sets up to this size are audited over all pairs.
pub const EXHAUSTIVE_PAIRS: usize = 2000;
/// Random pairs added to the short-range pairs on larger member sets.
pub const SAMPLED_PAIRS: usize = 200_000;
/// Short-range pairs reach this multiple of the median spacing.
pub const NEAR_FACTOR: f64 = 3.0;
const PAIR_SEED: u64 = 0xa11a5;

/// A chart `φ: U → R^d` on a subset of the sample.
#[derive(Debug, Clone)]
pub struct Chart {
    indices: Vec<usize>,
    coords: Vec<Vec<f64>>,
    epsilon: f64,
    dim: usize,
    /// `(index, row)` sorted by index.
    lookup: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub indices: Vec<usize>,
    pub coordinates: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtlasSpec {
    pub epsilon: f64,
    pub charts: Vec<ChartSpec>,
}

impl Chart {
    pub fn new(indices: Vec<usize>, coords: Vec<Vec<f64>>, epsilon: f64) -> Result<Self> {
        if indices.len() != coords.len() {
            return Err(Error::InvalidAtlas(format!(
                "{} indices but {} coordinate rows",
                indices.len(),
                coords.len()
            )));
        }
        if indices.is_empty() {
            return Err(Error::InvalidAtlas("chart has no members".into()));
        }
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::InvalidAtlas(format!("chart slack {epsilon} must be nonnegative")));
        }
        let dim = coords[0].len();
        if dim == 0 {
            return Err(Error::InvalidAtlas("chart coordinates are empty".into()));
        }
        let mut lookup = Vec::with_capacity(indices.len());
        for (k, (&i, c)) in indices.iter().zip(&coords).enumerate() {
            if c.len() != dim {
                return Err(Error::InvalidAtlas(format!(
                    "member {i} has {} coordinates, expected {dim}",
                    c.len()
                )));
            }
            if c.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("chart coordinates"));
            }
            lookup.push((i, k));
        }
        lookup.sort_unstable();
        if let Some(w) = lookup.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidAtlas(format!("index {} appears twice in a chart", w[0].0)));
        }
        Ok(Chart {
            indices,
            coords,
            epsilon,
            dim,
            lookup,
        })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn coords(&self) -> &[Vec<f64>] {
        &self.coords
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.row(i).is_some()
    }

    /// `φ(x_i)` if `i` is a member.
    pub fn phi(&self, i: usize) -> Option<&[f64]> {
        self.row(i).map(|k| self.coords[k].as_slice())
    }

    fn row(&self, i: usize) -> Option<usize> {
        self.lookup
            .binary_search_by_key(&i, |&(j, _)| j)
            .ok()
            .map(|at| self.lookup[at].1)
    }

    pub fn to_spec(&self) -> ChartSpec {
        ChartSpec {
            indices: self.indices.clone(),
            coordinates: self.coords.clone(),
        }
    }
}

/// Disjoint charts plus the uncovered remainder.
#[derive(Debug, Clone)]
pub struct Atlas {
    charts: Vec<Chart>,
    epsilon: f64,
    uncovered: Vec<usize>,
    owner: Vec<Option<usize>>,
}

impl Atlas {
    /// Checks disjointness and that every index is below `n_points`.
    pub fn new(charts: Vec<Chart>, epsilon: f64, n_points: usize) -> Result<Self> {
        let mut owner = vec![None; n_points];
        let dim = charts.first().map(Chart::dim);
        for (c, chart) in charts.iter().enumerate() {
            if Some(chart.dim()) != dim {
                return Err(Error::InvalidAtlas("charts have different dimensions".into()));
            }
            for &i in chart.indices() {
                if i >= n_points {
                    return Err(Error::IndexOutOfRange {
                        index: i,
                        len: n_points,
                    });
                }
                if let Some(prev) = owner[i] {
                    return Err(Error::InvalidAtlas(format!(
                        "index {i} belongs to charts {prev} and {c}"
                    )));
                }
                owner[i] = Some(c);
            }
        }
        let uncovered = (0..n_points).filter(|&i| owner[i].is_none()).collect();
        Ok(Atlas {
            charts,
            epsilon,
            uncovered,
            owner,
        })
    }

    pub fn from_spec(spec: &AtlasSpec, n_points: usize) -> Result<Self> {
        let charts = spec
            .charts
            .iter()
            .map(|c| Chart::new(c.indices.clone(), c.coordinates.clone(), spec.epsilon))
            .collect::<Result<Vec<_>>>()?;
        Self::new(charts, spec.epsilon, n_points)
    }

    pub fn to_spec(&self) -> AtlasSpec {
        AtlasSpec {
            epsilon: self.epsilon,
            charts: self.charts.iter().map(Chart::to_spec).collect(),
        }
    }

    pub fn charts(&self) -> &[Chart] {
        &self.charts
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn uncovered(&self) -> &[usize] {
        &self.uncovered
    }

    pub fn dim(&self) -> Option<usize> {
        self.charts.first().map(Chart::dim)
    }

    /// The chart containing `i`, if any.
    pub fn chart_of(&self, i: usize) -> Option<&Chart> {
        self.owner.get(i).copied().flatten().map(|c| &self.charts[c])
    }
}

/// Visits member pairs `(a, b)` with `a < b`: all of them on small sets,
/// otherwise the short-range pairs plus a seeded sample.
fn for_member_pairs(space: &PointCloudSpace, members: &[usize], mut f: impl FnMut(usize, usize)) -> bool {
    let m = members.len();
    if m <= EXHAUSTIVE_PAIRS {
        for a in 0..m {
            for b in (a + 1)..m {
                f(members[a], members[b]);
            }
        }
        return true;
    }
    let mut is_member = vec![false; space.len()];
    for &i in members {
        is_member[i] = true;
    }
    let reach = NEAR_FACTOR * space.median_spacing();
    for &i in members {
        for (j, _) in space.neighbors(i, reach) {
            if j > i && is_member[j] {
                f(i, j);
            }
        }
    }
    let mut rng = seeded(PAIR_SEED);
    for _ in 0..SAMPLED_PAIRS {
        let a = members[rng.random_range(0..m)];
        let b = members[rng.random_range(0..m)];
        if a != b {
            f(a.min(b), a.max(b));
        }
    }
    false
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Witness of `c·L^d ≤ φ_# m ≤ (1+ε) c·L^d` on grid cells over `φ(U)`.
#[derive(Debug, Clone, Serialize)]
pub struct MeasureAudit {
    /// Side of the grid cells.
    pub cell: f64,
    /// Cells whose neighbors are all occupied (interior cells) and were used.
    pub cells: usize,
    /// Smallest cell density, the witness for `c`.
    pub c: f64,
    /// Largest over smallest cell density.
    pub spread: f64,
    /// Allowed spread from point-count quantization, `(1+q)/(1−q)` with `q = 2d/k`.
    pub quantization: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChartAudit {
    pub members: usize,
    pub degenerate: bool,
    pub exhaustive: bool,
    /// Min and max of `|φ(y) − φ(x)| / d(x, y)` over audited pairs.
    pub lip_min: f64,
    pub lip_max: f64,
    /// `max(lip_max − 1, 1/lip_min − 1)`.
    pub slack: f64,
    pub measure: Option<MeasureAudit>,
    pub passes: bool,
}

/// Cells per side used by the measure audit.
fn cells_per_side(d: usize) -> usize {
    match d {
        1 => 64,
        2 => 16,
        _ => 6,
    }
}

fn measure_audit(space: &PointCloudSpace, chart: &Chart) -> Option<MeasureAudit> {
    let d = chart.dim();
    let cloud = PointCloudSpace::euclidean(chart.coords().to_vec(), None).ok()?;
    let h = cloud.median_spacing();
    if !h.is_finite() {
        return None;
    }
    let k = cells_per_side(d);
    let side = k as f64 * h;
    let lo: Vec<f64> = (0..d)
        .map(|a| chart.coords().iter().map(|c| c[a]).fold(f64::INFINITY, f64::min) - 0.5 * h)
        .collect();
    let mut cells: HashMap<Vec<i64>, f64> = HashMap::new();
    for (&i, c) in chart.indices().iter().zip(chart.coords()) {
        let key: Vec<i64> = (0..d).map(|a| ((c[a] - lo[a]) / side).floor() as i64).collect();
        *cells.entry(key).or_default() += space.weight(i);
    }
    let mut densities = Vec::new();
    let mut keys: Vec<&Vec<i64>> = cells.keys().collect();
    keys.sort();
    for key in keys {
        let mut interior = true;
        let mut offset = vec![-1i64; d];
        'scan: loop {
            let nb: Vec<i64> = key.iter().zip(&offset).map(|(a, b)| a + b).collect();
            if !cells.contains_key(&nb) {
                interior = false;
                break;
            }
            for o in offset.iter_mut() {
                *o += 1;
                if *o <= 1 {
                    continue 'scan;
                }
                *o = -1;
            }
            break;
        }
        if interior {
            densities.push(cells[key] / side.powi(d as i32));
        }
    }
    let q = 2.0 * d as f64 / k as f64;
    let quantization = (1.0 + q) / (1.0 - q);
    if densities.is_empty() {
        return Some(MeasureAudit {
            cell: side,
            cells: 0,
            c: f64::NAN,
            spread: 1.0,
            quantization,
        });
    }
    let c = densities.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = densities.iter().cloned().fold(0.0, f64::max);
    Some(MeasureAudit {
        cell: side,
        cells: densities.len(),
        c,
        spread: max / c,
        quantization,
    })
}

/// BiLipschitz window and measure sandwich of a chart.
pub fn chart_audit(space: &PointCloudSpace, chart: &Chart) -> Result<ChartAudit> {
    for &i in chart.indices() {
        if i >= space.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: space.len(),
            });
        }
    }
    if chart.len() < 2 {
        return Ok(ChartAudit {
            members: chart.len(),
            degenerate: true,
            exhaustive: true,
            lip_min: f64::NAN,
            lip_max: f64::NAN,
            slack: f64::NAN,
            measure: None,
            passes: false,
        });
    }
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let exhaustive = for_member_pairs(space, chart.indices(), |a, b| {
        let r = euclid(chart.phi(a).expect("member"), chart.phi(b).expect("member")) / space.dist(a, b);
        lo = lo.min(r);
        hi = hi.max(r);
    });
    let slack = (hi - 1.0).max(1.0 / lo - 1.0);
    let measure = measure_audit(space, chart);
    let eps = chart.epsilon();
    let measure_ok = measure
        .as_ref()
        .is_none_or(|m| m.cells == 0 || m.spread <= (1.0 + eps) * m.quantization);
    Ok(ChartAudit {
        members: chart.len(),
        degenerate: false,
        exhaustive,
        lip_min: lo,
        lip_max: hi,
        slack,
        measure,
        passes: slack <= eps + 1e-12 && measure_ok,
    })
}

/// Lipschitz constant of `φ_1 − φ_2` on the overlap of two charts.
pub fn alignment_defect(space: &PointCloudSpace, c1: &Chart, c2: &Chart) -> Result<f64> {
    if c1.dim() != c2.dim() {
        return Err(Error::InvalidAtlas("charts have different dimensions".into()));
    }
    let overlap: Vec<usize> = c1.indices().iter().copied().filter(|&i| c2.contains(i)).collect();
    let diff = |i: usize| -> Vec<f64> {
        let a = c1.phi(i).expect("member");
        let b = c2.phi(i).expect("member");
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    };
    let diffs: HashMap<usize, Vec<f64>> = overlap.iter().map(|&i| (i, diff(i))).collect();
    let mut defect = 0.0f64;
    for_member_pairs(space, &overlap, |a, b| {
        defect = defect.max(euclid(&diffs[&a], &diffs[&b]) / space.dist(a, b));
    });
    Ok(defect)
}
