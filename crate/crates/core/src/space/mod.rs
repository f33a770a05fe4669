//! Sampled metric measure spaces.
//!
//! A [`PointCloudSpace`] is a finite set of points with positive masses and a
//! distance oracle. Three metric kinds are supported: Euclidean coordinates,
//! a flat torus (coordinates modulo a period vector) and an explicit distance
//! table. Balls are open everywhere: `B_r(x) = { y : d(x, y) < r }`.

mod analysis;
mod index;

use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;
use index::GridIndex;

pub use analysis::{
    density_theta, doubling_constant, maximal_function, partition_of_unity, radius_grid,
    DoublingEstimate, DoublingOptions, MaximalReport, PartitionOfUnity,
};

/// Triangle audit switches from exhaustive to sampled above this many points.
pub const EXHAUSTIVE_AUDIT_LIMIT: usize = 200;
/// Number of seeded triples checked by the sampled triangle audit.
pub const AUDIT_TRIPLES: usize = 10_000;
/// Seed used by the sampled triangle audit.
pub const AUDIT_SEED: u64 = 0x5eed;
/// Allowed excess in the triangle audit.
pub const TRIANGLE_TOL: f64 = 1e-9;
/// Neighbor tables with more entries than this are rebuilt on every call.
const TABLE_CACHE_LIMIT: usize = 1 << 22;

/// All neighbor lists at one radius, as returned by [`PointCloudSpace::neighbors`].
pub type NeighborTable = Vec<Vec<(usize, f64)>>;

/// The most recent neighbor table, keyed by the bits of its radius.
#[derive(Default)]
struct TableCache(Mutex<Option<(u64, Arc<NeighborTable>)>>);

impl Clone for TableCache {
    fn clone(&self) -> Self {
        TableCache::default()
    }
}

impl std::fmt::Debug for TableCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("TableCache")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricKind {
    Euclidean,
    FlatTorus { period: Vec<f64> },
    Matrix,
}

/// Finite weighted point cloud standing in for `(X, d, m)`.
#[derive(Debug, Clone)]
pub struct PointCloudSpace {
    kind: MetricKind,
    coords: Vec<Vec<f64>>,
    matrix: Vec<f64>,
    weights: Vec<f64>,
    n: usize,
    index: Option<GridIndex>,
    nn: OnceLock<Vec<f64>>,
    median: OnceLock<f64>,
    min: OnceLock<f64>,
    table: TableCache,
}

/// Result of a ball query.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub mass: f64,
}

/// Either a flat row-major table or nested rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixData {
    Rows(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

/// JSON space description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

/// Builds and validates a space from its description.
pub fn build_space(spec: &SpaceSpec) -> Result<PointCloudSpace> {
    match spec.kind.as_str() {
        "euclidean" => {
            if spec.matrix.is_some() || spec.period.is_some() {
                return Err(Error::InvalidSpec(
                    "euclidean spaces take only points and weights".into(),
                ));
            }
            let points = spec
                .points
                .clone()
                .ok_or_else(|| Error::InvalidSpec("euclidean space needs points".into()))?;
            PointCloudSpace::euclidean(points, spec.weights.clone())
        }
        "flat-torus" => {
            if spec.matrix.is_some() {
                return Err(Error::InvalidSpec(
                    "flat-torus spaces take no matrix".into(),
                ));
            }
            let points = spec
                .points
                .clone()
                .ok_or_else(|| Error::InvalidSpec("flat-torus space needs points".into()))?;
            let period = spec
                .period
                .clone()
                .ok_or_else(|| Error::InvalidSpec("flat-torus space needs a period".into()))?;
            PointCloudSpace::flat_torus(points, period, spec.weights.clone())
        }
        "matrix" => {
            if spec.points.is_some() || spec.period.is_some() {
                return Err(Error::InvalidSpec(
                    "matrix spaces take only matrix and weights".into(),
                ));
            }
            let rows = match spec
                .matrix
                .clone()
                .ok_or_else(|| Error::InvalidSpec("matrix space needs a matrix".into()))?
            {
                MatrixData::Rows(rows) => rows,
                MatrixData::Flat(flat) => {
                    let n = (flat.len() as f64).sqrt().round() as usize;
                    if n * n != flat.len() {
                        return Err(Error::MatrixNotSquare { len: flat.len() });
                    }
                    flat.chunks(n.max(1)).map(|c| c.to_vec()).collect()
                }
            };
            PointCloudSpace::from_matrix(rows, spec.weights.clone())
        }
        other => Err(Error::InvalidSpec(format!("unknown metric kind '{other}'"))),
    }
}

fn check_weights(weights: Option<Vec<f64>>, n: usize) -> Result<Vec<f64>> {
    let weights = weights.unwrap_or_else(|| vec![1.0 / n as f64; n]);
    if weights.len() != n {
        return Err(Error::InvalidSpec(format!(
            "{} weights given for {} points",
            weights.len(),
            n
        )));
    }
    for (index, &weight) in weights.iter().enumerate() {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::BadWeight { index, weight });
        }
    }
    Ok(weights)
}

fn check_coords(points: &[Vec<f64>]) -> Result<usize> {
    if points.is_empty() {
        return Err(Error::EmptySpace);
    }
    let dim = points[0].len();
    if dim == 0 {
        return Err(Error::InvalidSpec(
            "points must have at least one coordinate".into(),
        ));
    }
    for (index, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                index,
                expected: dim,
                found: p.len(),
            });
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("point coordinates"));
        }
    }
    Ok(dim)
}

impl PointCloudSpace {
    pub fn euclidean(points: Vec<Vec<f64>>, weights: Option<Vec<f64>>) -> Result<Self> {
        check_coords(&points)?;
        let n = points.len();
        let weights = check_weights(weights, n)?;
        let index = GridIndex::build(&points, None);
        let space = PointCloudSpace {
            kind: MetricKind::Euclidean,
            coords: points,
            matrix: Vec::new(),
            weights,
            n,
            index: Some(index),
            nn: OnceLock::new(),
            median: OnceLock::new(),
            min: OnceLock::new(),
            table: TableCache::default(),
        };
        space.reject_duplicates()?;
        Ok(space)
    }

    pub fn flat_torus(
        points: Vec<Vec<f64>>,
        period: Vec<f64>,
        weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        let dim = check_coords(&points)?;
        if period.len() != dim {
            return Err(Error::InvalidSpec(format!(
                "period has {} entries, points have dimension {dim}",
                period.len()
            )));
        }
        if period.iter().any(|&p| !(p.is_finite() && p > 0.0)) {
            return Err(Error::InvalidSpec("torus periods must be positive".into()));
        }
        let n = points.len();
        let weights = check_weights(weights, n)?;
        let index = GridIndex::build(&points, Some(&period));
        let space = PointCloudSpace {
            kind: MetricKind::FlatTorus { period },
            coords: points,
            matrix: Vec::new(),
            weights,
            n,
            index: Some(index),
            nn: OnceLock::new(),
            median: OnceLock::new(),
            min: OnceLock::new(),
            table: TableCache::default(),
        };
        space.reject_duplicates()?;
        Ok(space)
    }

    /// Builds a space from a full distance table and audits the metric axioms.
    pub fn from_matrix(rows: Vec<Vec<f64>>, weights: Option<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptySpace);
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::MatrixNotSquare {
                len: rows.iter().map(Vec::len).sum(),
            });
        }
        let matrix: Vec<f64> = rows.into_iter().flatten().collect();
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("distance matrix"));
        }
        for i in 0..n {
            if matrix[i * n + i] != 0.0 {
                return Err(Error::DegenerateDistance {
                    i,
                    j: i,
                    value: matrix[i * n + i],
                });
            }
            for j in (i + 1)..n {
                let (dij, dji) = (matrix[i * n + j], matrix[j * n + i]);
                if dij != dji {
                    return Err(Error::MatrixNotSymmetric { i, j, dij, dji });
                }
                if dij <= 0.0 {
                    return Err(Error::DegenerateDistance { i, j, value: dij });
                }
            }
        }
        let weights = check_weights(weights, n)?;
        let space = PointCloudSpace {
            kind: MetricKind::Matrix,
            coords: Vec::new(),
            matrix,
            weights,
            n,
            index: None,
            nn: OnceLock::new(),
            median: OnceLock::new(),
            min: OnceLock::new(),
            table: TableCache::default(),
        };
        space.audit_triangles()?;
        Ok(space)
    }

    fn reject_duplicates(&self) -> Result<()> {
        let nn = self.nearest_neighbor_distances();
        for (i, &d) in nn.iter().enumerate() {
            if d == 0.0 {
                let j = (0..self.n)
                    .find(|&j| j != i && self.dist(i, j) == 0.0)
                    .unwrap_or(i);
                return Err(Error::DegenerateDistance { i, j, value: 0.0 });
            }
        }
        Ok(())
    }

    /// Exhaustive below [`EXHAUSTIVE_AUDIT_LIMIT`] points, otherwise
    /// [`AUDIT_TRIPLES`] seeded triples. Reports the worst offending triple.
    fn audit_triangles(&self) -> Result<()> {
        let n = self.n;
        let mut worst: Option<(usize, usize, usize, f64)> = None;
        let mut check = |a: usize, b: usize, c: usize| {
            let excess = self.dist(a, c) - self.dist(a, b) - self.dist(b, c);
            if excess > TRIANGLE_TOL && worst.is_none_or(|w| excess > w.3) {
                worst = Some((a, b, c, excess));
            }
        };
        if n <= EXHAUSTIVE_AUDIT_LIMIT {
            for a in 0..n {
                for c in (a + 1)..n {
                    for b in 0..n {
                        if b != a && b != c {
                            check(a, b, c);
                        }
                    }
                }
            }
        } else {
            let mut rng = seeded(AUDIT_SEED);
            for _ in 0..AUDIT_TRIPLES {
                let a = rng.random_range(0..n);
                let b = rng.random_range(0..n);
                let c = rng.random_range(0..n);
                if a != b && b != c && a != c {
                    check(a.min(c), b, a.max(c));
                }
            }
        }
        match worst {
            Some((a, b, c, excess)) => Err(Error::TriangleViolation { a, b, c, excess }),
            None => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn kind(&self) -> &MetricKind {
        &self.kind
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Coordinates of point `i`, when the space has them.
    pub fn coords(&self, i: usize) -> Option<&[f64]> {
        self.coords.get(i).map(Vec::as_slice)
    }

    pub fn ambient_dim(&self) -> Option<usize> {
        self.coords.first().map(Vec::len)
    }

    /// Returns a copy of the space with different weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        let weights = check_weights(Some(weights), self.n)?;
        Ok(PointCloudSpace {
            weights,
            nn: self.nn.clone(),
            median: self.median.clone(),
            min: self.min.clone(),
            ..self.clone()
        })
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        match &self.kind {
            MetricKind::Matrix => self.matrix[i * self.n + j],
            _ => self.dist_to(&self.coords[j], i),
        }
    }

    fn dist_to(&self, p: &[f64], i: usize) -> f64 {
        let q = &self.coords[i];
        match &self.kind {
            MetricKind::Euclidean => p
                .iter()
                .zip(q)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
            MetricKind::FlatTorus { period } => p
                .iter()
                .zip(q)
                .zip(period)
                .map(|((a, b), &l)| {
                    let mut t = (a - b).abs();
                    if t >= l {
                        t %= l;
                    }
                    let t = t.min(l - t);
                    t * t
                })
                .sum::<f64>()
                .sqrt(),
            MetricKind::Matrix => unreachable!("matrix spaces have no coordinates"),
        }
    }

    /// All `(j, d(i, j))` with `d(i, j) < r`, including `i` itself, in index order.
    pub fn neighbors(&self, i: usize, r: f64) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        self.for_each_neighbor(i, r, |j, d| out.push((j, d)));
        if self.index.is_some() {
            out.sort_unstable_by_key(|&(j, _)| j);
        }
        out
    }

    /// Calls `f(j, d(i, j))` for every `j` with `d(i, j) < r`. The order is
    /// fixed by the space but is not index order.
    pub(crate) fn for_each_neighbor(&self, i: usize, r: f64, mut f: impl FnMut(usize, f64)) {
        match &self.index {
            Some(index) => {
                let p = &self.coords[i];
                index.candidates(p, r, |j| {
                    let d = self.dist_to(p, j);
                    if d < r {
                        f(j, d);
                    }
                });
            }
            None => {
                let row = &self.matrix[i * self.n..(i + 1) * self.n];
                for (j, &d) in row.iter().enumerate() {
                    if d < r {
                        f(j, d);
                    }
                }
            }
        }
    }

    /// `neighbors(i, r)` for every point. Small tables are kept for reuse by
    /// repeated passes at the same radius.
    pub fn neighbor_table(&self, r: f64) -> Arc<NeighborTable> {
        use rayon::prelude::*;
        let key = r.to_bits();
        if let Some((k, t)) = &*self.table.0.lock().expect("table cache") {
            if *k == key {
                return Arc::clone(t);
            }
        }
        let table: Arc<NeighborTable> = Arc::new((0..self.n).into_par_iter().map(|i| self.neighbors(i, r)).collect());
        if table.iter().map(Vec::len).sum::<usize>() <= TABLE_CACHE_LIMIT {
            *self.table.0.lock().expect("table cache") = Some((key, Arc::clone(&table)));
        }
        table
    }

    /// Neighbors within `r` sorted by distance (ties by index).
    pub fn neighbors_by_distance(&self, i: usize, r: f64) -> Vec<(usize, f64)> {
        let mut out = self.neighbors(i, r);
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }

    /// The open ball `B_r(x_center)` with its weights and mass.
    pub fn ball(&self, center: usize, r: f64) -> Ball {
        let nb = self.neighbors(center, r);
        let indices: Vec<usize> = nb.iter().map(|&(j, _)| j).collect();
        let weights: Vec<f64> = indices.iter().map(|&j| self.weights[j]).collect();
        let mass = weights.iter().sum();
        Ball {
            indices,
            weights,
            mass,
        }
    }

    pub fn ball_mass(&self, center: usize, r: f64) -> f64 {
        self.neighbors(center, r)
            .iter()
            .map(|&(j, _)| self.weights[j])
            .sum()
    }

    /// Distance from each point to its nearest other point (infinite for a
    /// single-point space).
    pub fn nearest_neighbor_distances(&self) -> &[f64] {
        self.nn.get_or_init(|| {
            use rayon::prelude::*;
            (0..self.n)
                .into_par_iter()
                .map(|i| self.nearest_neighbor(i))
                .collect()
        })
    }

    fn nearest_neighbor(&self, i: usize) -> f64 {
        if self.n == 1 {
            return f64::INFINITY;
        }
        match &self.index {
            None => (0..self.n)
                .filter(|&j| j != i)
                .map(|j| self.dist(i, j))
                .fold(f64::INFINITY, f64::min),
            Some(index) => {
                let mut r = index.cell_side();
                loop {
                    let best = self
                        .neighbors(i, r)
                        .into_iter()
                        .filter(|&(j, _)| j != i)
                        .map(|(_, d)| d)
                        .fold(f64::INFINITY, f64::min);
                    if best.is_finite() {
                        return best;
                    }
                    r *= 2.0;
                }
            }
        }
    }

    /// Smallest positive interpoint distance.
    pub fn min_spacing(&self) -> f64 {
        *self.min.get_or_init(|| {
            self.nearest_neighbor_distances()
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min)
        })
    }

    /// Median nearest-neighbor distance.
    pub fn median_spacing(&self) -> f64 {
        *self.median.get_or_init(|| {
            let mut nn: Vec<f64> = self.nearest_neighbor_distances().to_vec();
            nn.sort_by(f64::total_cmp);
            let m = nn.len();
            if m % 2 == 1 {
                nn[m / 2]
            } else {
                0.5 * (nn[m / 2 - 1] + nn[m / 2])
            }
        })
    }

    pub fn to_spec(&self) -> SpaceSpec {
        let weights = Some(self.weights.clone());
        match &self.kind {
            MetricKind::Euclidean => SpaceSpec {
                kind: "euclidean".into(),
                points: Some(self.coords.clone()),
                matrix: None,
                period: None,
                weights,
            },
            MetricKind::FlatTorus { period } => SpaceSpec {
                kind: "flat-torus".into(),
                points: Some(self.coords.clone()),
                matrix: None,
                period: Some(period.clone()),
                weights,
            },
            MetricKind::Matrix => SpaceSpec {
                kind: "matrix".into(),
                points: None,
                matrix: Some(MatrixData::Flat(self.matrix.clone())),
                period: None,
                weights,
            },
        }
    }
}
