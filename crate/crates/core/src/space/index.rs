//! Uniform grid buckets for radius queries on coordinate spaces.

use std::collections::HashMap;

/// Dense bucket tables are used while they stay within this many cells per point.
const DENSE_CELLS_PER_POINT: f64 = 16.0;

#[derive(Debug, Clone)]
enum Buckets {
    /// Row-major cell table in CSR form: cell `c` holds `items[start[c]..start[c + 1]]`.
    Dense {
        counts: Vec<i64>,
        start: Vec<usize>,
        items: Vec<usize>,
    },
    /// Occupied cells only, for clouds whose bounding box is mostly empty.
    Sparse {
        map: HashMap<Vec<i64>, Vec<usize>>,
        keys: Vec<Vec<i64>>,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct GridIndex {
    origin: Vec<f64>,
    cell: Vec<f64>,
    /// Number of cells per axis on a torus; `None` for open Euclidean axes.
    wrap: Option<Vec<i64>>,
    buckets: Buckets,
}

impl GridIndex {
    /// Buckets `coords` into cubes holding about four points on average.
    pub(crate) fn build(coords: &[Vec<f64>], period: Option<&[f64]>) -> Self {
        let dim = coords[0].len();
        let n = coords.len() as f64;
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for p in coords {
            for k in 0..dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let extent: Vec<f64> = match period {
            Some(per) => per.to_vec(),
            None => {
                let raw: Vec<f64> = (0..dim).map(|k| hi[k] - lo[k]).collect();
                let widest = raw.iter().cloned().fold(0.0, f64::max);
                let floor = if widest > 0.0 { widest * 1e-6 } else { 1.0 };
                raw.into_iter().map(|e| e.max(floor)).collect()
            }
        };
        let volume: f64 = extent.iter().product();
        let widest = extent.iter().cloned().fold(0.0, f64::max);
        // the second term keeps curves embedded in the plane from getting tiny cells
        let side = (volume * 4.0 / n).powf(1.0 / dim as f64).max(widest * 4.0 / n);

        let (origin, cell, wrap) = match period {
            Some(per) => {
                let counts: Vec<i64> = per
                    .iter()
                    .map(|&p| ((p / side).floor() as i64).clamp(1, 1 << 20))
                    .collect();
                let cell = per
                    .iter()
                    .zip(&counts)
                    .map(|(&p, &c)| p / c as f64)
                    .collect();
                (vec![0.0; dim], cell, Some(counts))
            }
            None => (lo.clone(), vec![side; dim], None),
        };

        let mut index = GridIndex {
            origin,
            cell,
            wrap,
            buckets: Buckets::Sparse {
                map: HashMap::new(),
                keys: Vec::new(),
            },
        };
        let keys: Vec<Vec<i64>> = coords.iter().map(|p| index.key(p)).collect();
        let counts: Vec<i64> = match &index.wrap {
            Some(c) => c.clone(),
            None => (0..dim)
                .map(|k| keys.iter().map(|key| key[k]).max().unwrap_or(0) + 1)
                .collect(),
        };
        let total: f64 = counts.iter().map(|&c| c as f64).product();
        index.buckets = if total <= DENSE_CELLS_PER_POINT * n + 1024.0 {
            let cells = total as usize;
            let flat: Vec<usize> = keys.iter().map(|key| flatten(&counts, key)).collect();
            let mut start = vec![0usize; cells + 1];
            for &c in &flat {
                start[c + 1] += 1;
            }
            for c in 0..cells {
                start[c + 1] += start[c];
            }
            let mut fill = start.clone();
            let mut items = vec![0usize; flat.len()];
            for (i, &c) in flat.iter().enumerate() {
                items[fill[c]] = i;
                fill[c] += 1;
            }
            Buckets::Dense { counts, start, items }
        } else {
            let mut map: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
            for (i, key) in keys.into_iter().enumerate() {
                map.entry(key).or_default().push(i);
            }
            let mut keys: Vec<Vec<i64>> = map.keys().cloned().collect();
            keys.sort();
            Buckets::Sparse { map, keys }
        };
        index
    }

    fn key(&self, p: &[f64]) -> Vec<i64> {
        p.iter()
            .enumerate()
            .map(|(k, &x)| {
                let c = ((x - self.origin[k]) / self.cell[k]).floor() as i64;
                match &self.wrap {
                    Some(counts) => c.rem_euclid(counts[k]),
                    None => c,
                }
            })
            .collect()
    }

    /// Calls `f` on every candidate index whose bucket may intersect the
    /// ball of radius `r` around `p`. Candidates still need a distance test.
    pub(crate) fn candidates(&self, p: &[f64], r: f64, mut f: impl FnMut(usize)) {
        let dim = p.len();
        let center = self.key(p);
        let reach: Vec<i64> = (0..dim)
            .map(|k| ((r / self.cell[k]).ceil() + 1.0).min(1e15) as i64)
            .collect();

        if let Buckets::Sparse { map, keys } = &self.buckets {
            let combos: f64 = (0..dim)
                .map(|k| {
                    let span = 2.0 * reach[k] as f64 + 1.0;
                    match &self.wrap {
                        Some(counts) => span.min(counts[k] as f64),
                        None => span,
                    }
                })
                .product();
            if combos > keys.len() as f64 {
                // scanning occupied buckets is cheaper than enumerating offsets
                for key in keys {
                    let near = match &self.wrap {
                        Some(counts) => (0..dim).all(|k| {
                            let d = (key[k] - center[k]).rem_euclid(counts[k]);
                            d.min(counts[k] - d) <= reach[k]
                        }),
                        None => (0..dim).all(|k| (key[k] - center[k]).abs() <= reach[k]),
                    };
                    if near {
                        map[key].iter().for_each(|&i| f(i));
                    }
                }
                return;
            }
        }

        // Per axis: cell coordinates to visit with the squared gap between
        // `p` and the cell slab along that axis.
        // slack so rounding in the gaps never drops a point inside the ball
        let r2 = r * r * (1.0 + 1e-9);
        let mut axes: Vec<Vec<(i64, f64)>> = Vec::with_capacity(dim);
        for k in 0..dim {
            let local = (p[k] - self.origin[k]) / self.cell[k];
            let span = r / self.cell[k] * (1.0 + 1e-9);
            let first = ((local - span).floor().max(-1e15)) as i64;
            let last = ((local + span).floor().min(1e15)) as i64;
            let gap = |c: i64| -> f64 {
                let lo = c as f64;
                let g = if local < lo {
                    lo - local
                } else if local > lo + 1.0 {
                    local - lo - 1.0
                } else {
                    0.0
                };
                (g * self.cell[k]).powi(2)
            };
            let axis: Vec<(i64, f64)> = match &self.wrap {
                Some(counts) if last - first + 1 >= counts[k] => (0..counts[k]).map(|c| (c, 0.0)).collect(),
                Some(counts) => {
                    // unwrapped cells, so gaps are measured in the right translate
                    (first..=last)
                        .map(|c| (c.rem_euclid(counts[k]), gap(c)))
                        .collect()
                }
                None => {
                    let (lower, upper) = match &self.buckets {
                        Buckets::Dense { counts, .. } => (0, counts[k] - 1),
                        Buckets::Sparse { .. } => (i64::MIN, i64::MAX),
                    };
                    (first.max(center[k] - reach[k])..=last.min(center[k] + reach[k]))
                        .filter(|c| (lower..=upper).contains(c))
                        .map(|c| (c, gap(c)))
                        .collect()
                }
            };
            axes.push(axis.into_iter().filter(|&(_, g)| g < r2).collect());
            if axes[k].is_empty() {
                return;
            }
        }

        let mut cursor = vec![0usize; dim];
        let mut key = vec![0i64; dim];
        loop {
            let mut g = 0.0;
            for k in 0..dim {
                let (c, gk) = axes[k][cursor[k]];
                key[k] = c;
                g += gk;
            }
            if g < r2 {
                match &self.buckets {
                    Buckets::Dense { counts, start, items } => {
                        let c = flatten(counts, &key);
                        items[start[c]..start[c + 1]].iter().for_each(|&i| f(i));
                    }
                    Buckets::Sparse { map, .. } => {
                        if let Some(bucket) = map.get(&key) {
                            bucket.iter().for_each(|&i| f(i));
                        }
                    }
                }
            }
            let mut k = 0;
            loop {
                if k == dim {
                    return;
                }
                cursor[k] += 1;
                if cursor[k] < axes[k].len() {
                    break;
                }
                cursor[k] = 0;
                k += 1;
            }
        }
    }

    pub(crate) fn cell_side(&self) -> f64 {
        self.cell.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

fn flatten(counts: &[i64], key: &[i64]) -> usize {
    let mut c = 0i64;
    for (k, &x) in key.iter().enumerate() {
        c = c * counts[k] + x;
    }
    c as usize
}
