//! Seminorms on `R^d`: quadratic forms and maxima of linear functionals.

mod quadrature;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use quadrature::{ball_nodes, node_moments, Quadrature, DEFAULT_NODES, DEFAULT_SEED};

/// Eigenvalues of quadratic forms down to this (relative) level are clamped
/// to zero; anything more negative is rejected.
pub const PSD_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Seminorm {
    /// `n(v) = sqrt(vᵀ Q v)` with `Q` symmetric positive semidefinite.
    Quadratic(DMatrix<f64>),
    /// `n(v) = max_k |a_k · v|`. An empty list is the zero seminorm.
    Polyhedral { dim: usize, covectors: Vec<Vec<f64>> },
}

/// JSON layout of a seminorm.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SeminormSpec {
    Quadratic { matrix: Vec<Vec<f64>> },
    Polyhedral { dim: usize, covectors: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Quadratic,
    Polyhedral,
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" => Ok(Family::Quadratic),
            "polyhedral" => Ok(Family::Polyhedral),
            _ => Err(Error::InvalidParameter(format!("unknown seminorm family '{s}'"))),
        }
    }
}

/// Result of a `size_p` evaluation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SizeReport {
    pub value: f64,
    /// `|S_N − S_{N/2}| / S_N`, a proxy for the quadrature error.
    pub rel_error: f64,
}

/// Result of a seminorm distance evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct SnDistance {
    /// Best value found; a lower bound on the true supremum.
    pub value: f64,
    pub argmax: Vec<f64>,
    /// `(op_norm(n1) + op_norm(n2))` times the mesh covering radius.
    pub gap: f64,
}

fn symmetric_eigenvalues(q: &DMatrix<f64>) -> DVector<f64> {
    SymmetricEigen::new(q.clone()).eigenvalues
}

impl Seminorm {
    /// Validates a symmetric PSD matrix, clamping eigenvalues in
    /// `[-PSD_SLACK·scale, 0)` to zero.
    pub fn quadratic(q: DMatrix<f64>) -> Result<Self> {
        if q.nrows() != q.ncols() || q.nrows() == 0 {
            return Err(Error::InvalidParameter(format!(
                "quadratic form must be square and nonempty, got {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        if q.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("quadratic form"));
        }
        let scale = q.amax().max(1.0);
        for i in 0..q.nrows() {
            for j in 0..i {
                if (q[(i, j)] - q[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidParameter(format!(
                        "quadratic form is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let sym = (&q + q.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());
        let min = eig.eigenvalues.min();
        if min < -PSD_SLACK * scale {
            return Err(Error::InvalidParameter(format!(
                "quadratic form has negative eigenvalue {min:e}"
            )));
        }
        if min < 0.0 {
            return Ok(Self::psd_projection(sym));
        }
        Ok(Seminorm::Quadratic(sym))
    }

    /// Symmetrizes and clamps negative eigenvalues to zero.
    pub fn psd_projection(q: DMatrix<f64>) -> Self {
        let sym = (&q + q.transpose()) * 0.5;
        let mut eig = SymmetricEigen::new(sym);
        eig.eigenvalues.apply(|x| *x = x.max(0.0));
        let q = eig.recompose();
        Seminorm::Quadratic((&q + q.transpose()) * 0.5)
    }

    /// `v ↦ |A v|` for a linear map `A: R^d → R^m`.
    pub fn from_linear_map(a: &DMatrix<f64>) -> Self {
        Seminorm::Quadratic(a.transpose() * a)
    }

    pub fn euclidean(d: usize) -> Self {
        Seminorm::Quadratic(DMatrix::identity(d, d))
    }

    pub fn zero(d: usize) -> Self {
        Seminorm::Quadratic(DMatrix::zeros(d, d))
    }

    pub fn polyhedral(dim: usize, covectors: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("seminorm dimension must be positive".into()));
        }
        for a in &covectors {
            if a.len() != dim {
                return Err(Error::SeminormDim {
                    expected: dim,
                    found: a.len(),
                });
            }
            if a.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("covector"));
            }
        }
        Ok(Seminorm::Polyhedral { dim, covectors })
    }

    pub fn from_spec(spec: &SeminormSpec) -> Result<Self> {
        match spec {
            SeminormSpec::Quadratic { matrix } => {
                let n = matrix.len();
                if matrix.iter().any(|r| r.len() != n) {
                    return Err(Error::InvalidParameter("quadratic matrix must be square".into()));
                }
                Self::quadratic(DMatrix::from_fn(n, n, |i, j| matrix[i][j]))
            }
            SeminormSpec::Polyhedral { dim, covectors } => Self::polyhedral(*dim, covectors.clone()),
        }
    }

    pub fn to_spec(&self) -> SeminormSpec {
        match self {
            Seminorm::Quadratic(q) => SeminormSpec::Quadratic {
                matrix: (0..q.nrows())
                    .map(|i| (0..q.ncols()).map(|j| q[(i, j)]).collect())
                    .collect(),
            },
            Seminorm::Polyhedral { dim, covectors } => SeminormSpec::Polyhedral {
                dim: *dim,
                covectors: covectors.clone(),
            },
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Seminorm::Quadratic(q) => q.nrows(),
            Seminorm::Polyhedral { dim, .. } => *dim,
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Seminorm::Quadratic(_) => Family::Quadratic,
            Seminorm::Polyhedral { .. } => Family::Polyhedral,
        }
    }

    pub fn eval(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.dim() {
            return Err(Error::SeminormDim {
                expected: self.dim(),
                found: v.len(),
            });
        }
        Ok(self.eval_unchecked(v))
    }

    /// Evaluation without the dimension check.
    pub fn eval_unchecked(&self, v: &[f64]) -> f64 {
        match self {
            Seminorm::Quadratic(q) => {
                let d = v.len();
                let mut acc = 0.0;
                for i in 0..d {
                    let mut row = 0.0;
                    for j in 0..d {
                        row += q[(i, j)] * v[j];
                    }
                    acc += v[i] * row;
                }
                acc.max(0.0).sqrt()
            }
            Seminorm::Polyhedral { covectors, .. } => covectors
                .iter()
                .map(|a| a.iter().zip(v).map(|(x, y)| x * y).sum::<f64>().abs())
                .fold(0.0, f64::max),
        }
    }

    /// `sup_{|z| ≤ 1} n(z)`.
    pub fn op_norm(&self) -> f64 {
        match self {
            Seminorm::Quadratic(q) => symmetric_eigenvalues(q).max().max(0.0).sqrt(),
            Seminorm::Polyhedral { covectors, .. } => covectors
                .iter()
                .map(|a| a.iter().map(|x| x * x).sum::<f64>().sqrt())
                .fold(0.0, f64::max),
        }
    }

    /// `sqrt(trace Q)`; undefined for polyhedral seminorms.
    pub fn hs_norm(&self) -> Result<f64> {
        match self {
            Seminorm::Quadratic(q) => Ok(q.trace().max(0.0).sqrt()),
            Seminorm::Polyhedral { .. } => Err(Error::NotQuadratic),
        }
    }

    /// Returns the same seminorm scaled by `lambda ≥ 0`.
    pub fn scaled(&self, lambda: f64) -> Self {
        match self {
            Seminorm::Quadratic(q) => Seminorm::Quadratic(q * (lambda * lambda)),
            Seminorm::Polyhedral { dim, covectors } => Seminorm::Polyhedral {
                dim: *dim,
                covectors: covectors
                    .iter()
                    .map(|a| a.iter().map(|x| x * lambda).collect())
                    .collect(),
            },
        }
    }
}

/// `S_p(n) = (avg_{B_1} n(w)^p dw)^{1/p}` by the shifted Halton rule.
pub fn size_p(n: &Seminorm, p: f64, quad: Quadrature) -> Result<SizeReport> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("p must lie in (1, ∞), got {p}")));
    }
    if quad.nodes < 2 {
        return Err(Error::InvalidParameter("quadrature needs at least two nodes".into()));
    }
    let d = n.dim();
    let half = quad.nodes / 2;
    if let (Seminorm::Quadratic(q), true) = (n, p == 2.0) {
        // the rule applied to a quadratic form is linear in the form
        let m = node_moments(d, quad);
        let pair = |m: &[f64]| q.as_slice().iter().zip(m).map(|(a, b)| a * b).sum::<f64>().max(0.0);
        let value = (pair(&m[1]) / quad.nodes as f64).sqrt();
        let coarse = (pair(&m[0]) / half as f64).sqrt();
        let rel_error = if value > 0.0 { (value - coarse).abs() / value } else { 0.0 };
        return Ok(SizeReport { value, rel_error });
    }
    let nodes = ball_nodes(d, quad);
    let (mut first, mut total) = (0.0, 0.0);
    // n(w)^p from the squared form, skipping the root for quadratics
    let gram: Option<Vec<f64>> = match n {
        Seminorm::Quadratic(q) => Some(q.as_slice().to_vec()),
        Seminorm::Polyhedral { .. } => None,
    };
    let term = |w: &[f64]| -> f64 {
        let sq = match &gram {
            Some(g) => {
                let mut acc = 0.0;
                for (j, col) in g.chunks_exact(d).enumerate() {
                    let row: f64 = col.iter().zip(w).map(|(a, b)| a * b).sum();
                    acc += w[j] * row;
                }
                acc.max(0.0)
            }
            None => n.eval_unchecked(w).powi(2),
        };
        if p == 2.0 {
            sq
        } else {
            sq.powf(0.5 * p)
        }
    };
    for (k, w) in nodes.chunks(d).enumerate() {
        let v = term(w);
        total += v;
        if k < half {
            first += v;
        }
    }
    let value = (total / quad.nodes as f64).powf(1.0 / p);
    let coarse = (first / half as f64).powf(1.0 / p);
    let rel_error = if value > 0.0 { (value - coarse).abs() / value } else { 0.0 };
    Ok(SizeReport { value, rel_error })
}

/// `c(d) = sqrt(d + 2)`, the ratio of the operator norm to `S_2` on
/// rank-one forms and of the Hilbert-Schmidt norm to `S_2` on all forms.
pub fn consistency_constant(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    Ok((d as f64 + 2.0).sqrt())
}

/// Deterministic points of the unit sphere used by distance scans.
fn sphere_mesh(d: usize, resolution: usize) -> (Vec<Vec<f64>>, f64) {
    use std::f64::consts::PI;
    let res = resolution.max(1);
    match d {
        1 => (vec![vec![1.0]], 0.0),
        2 => {
            // seminorms are even, so half a circle suffices
            let pts = (0..res)
                .map(|k| {
                    let t = PI * k as f64 / res as f64;
                    vec![t.cos(), t.sin()]
                })
                .collect();
            (pts, PI / (2.0 * res as f64))
        }
        _ => {
            let pts: Vec<Vec<f64>> = if d == 3 {
                fibonacci_sphere(res)
            } else {
                let quad = Quadrature {
                    nodes: res,
                    seed: DEFAULT_SEED,
                };
                ball_nodes(d, quad)
                    .chunks(d)
                    .map(|w| {
                        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                        w.iter().map(|x| x / norm).collect()
                    })
                    .collect()
            };
            let area = sphere_area(d);
            let cover = (area / res as f64).powf(1.0 / (d - 1) as f64);
            (pts, cover)
        }
    }
}

fn sphere_area(d: usize) -> f64 {
    use std::f64::consts::PI;
    // |S^{d-1}| = 2 π^{d/2} / Γ(d/2), via the ball volume recursion
    let mut omega = if d.is_multiple_of(2) { 1.0 } else { 2.0 };
    let mut k = if d.is_multiple_of(2) { 0 } else { 1 };
    while k < d {
        k += 2;
        omega *= 2.0 * PI / k as f64;
    }
    d as f64 * omega
}

/// `n` points of the unit 2-sphere on a golden-angle spiral.
pub fn fibonacci_sphere(n: usize) -> Vec<Vec<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let t = golden * k as f64;
            vec![r * t.cos(), r * t.sin(), z]
        })
        .collect()
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

/// Golden-section maximization of `f(cos t · a + sin t · b)` over `t ∈ [-h, h]`.
fn golden_along(f: &dyn Fn(&[f64]) -> f64, a: &[f64], b: &[f64], h: f64) -> (f64, Vec<f64>) {
    let point = |t: f64| -> Vec<f64> {
        let mut v: Vec<f64> = a.iter().zip(b).map(|(x, y)| t.cos() * x + t.sin() * y).collect();
        normalize(&mut v);
        v
    };
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (-h, h);
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(&point(c)), f(&point(d)));
    for _ in 0..60 {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(&point(c));
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(&point(d));
        }
    }
    let t = 0.5 * (lo + hi);
    let v = point(t);
    (f(&v), v)
}

/// `sup_{|z| ≤ 1} |n1(z) − n2(z)|` by a sphere scan plus golden-section
/// refinement around the best mesh point.
pub fn sn_distance(n1: &Seminorm, n2: &Seminorm, resolution: usize) -> Result<SnDistance> {
    let d = n1.dim();
    if n2.dim() != d {
        return Err(Error::SeminormDim {
            expected: d,
            found: n2.dim(),
        });
    }
    let f = |z: &[f64]| (n1.eval_unchecked(z) - n2.eval_unchecked(z)).abs();
    let (mesh, cover) = sphere_mesh(d, resolution);
    let mut best = (f64::NEG_INFINITY, mesh[0].clone());
    for z in &mesh {
        let v = f(z);
        if v > best.0 {
            best = (v, z.clone());
        }
    }
    if d >= 2 && cover > 0.0 {
        // sweep great circles through the incumbent along a tangent basis
        for _round in 0..3 {
            for k in 0..d {
                let z = best.1.clone();
                let mut e = vec![0.0; d];
                e[k] = 1.0;
                let dot: f64 = e.iter().zip(&z).map(|(a, b)| a * b).sum();
                let mut tangent: Vec<f64> = e.iter().zip(&z).map(|(a, b)| a - dot * b).collect();
                let tn = tangent.iter().map(|x| x * x).sum::<f64>().sqrt();
                if tn < 1e-8 {
                    continue;
                }
                tangent.iter_mut().for_each(|x| *x /= tn);
                let (v, p) = golden_along(&f, &z, &tangent, 2.0 * cover);
                if v > best.0 {
                    best = (v, p);
                }
            }
        }
    }
    Ok(SnDistance {
        value: best.0.max(0.0),
        argmax: best.1,
        gap: (n1.op_norm() + n2.op_norm()) * cover,
    })
}

/// Worst relative gaps of the two consistency identities in one dimension.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityRow {
    pub dim: usize,
    pub forms: usize,
    /// Max over random PSD forms of `|hs − c(d)·S_2| / hs`.
    pub hs_rel_error: f64,
    /// Max over random rank-one forms of `|op − c(d)·S_2| / op`.
    pub op_rel_error: f64,
    /// Largest quadrature error proxy seen.
    pub quadrature_error: f64,
}

/// Seeded PSD form `AᵀA`, entries of `A` uniform in `[-1, 1]`.
pub fn random_psd<R: rand::Rng>(d: usize, rng: &mut R) -> Seminorm {
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    Seminorm::psd_projection(a.transpose() * a)
}

/// Seeded rank-one form `a aᵀ`, entries of `a` uniform in `[-1, 1]`.
pub fn random_rank_one<R: rand::Rng>(d: usize, rng: &mut R) -> Seminorm {
    let a = DMatrix::from_fn(1, d, |_, _| rng.random_range(-1.0..1.0));
    Seminorm::psd_projection(a.transpose() * a)
}

/// Checks `hs = c(d)·S_2` on `forms` random PSD forms and `op = c(d)·S_2` on
/// `forms` random rank-one forms for each dimension.
pub fn identity_audit(dims: &[usize], forms: usize, seed: u64, quad: Quadrature) -> Result<Vec<IdentityRow>> {
    dims.iter()
        .map(|&d| {
            let c = consistency_constant(d)?;
            let mut rng = crate::rng::seeded(seed.wrapping_add(d as u64));
            let mut row = IdentityRow {
                dim: d,
                forms,
                hs_rel_error: 0.0,
                op_rel_error: 0.0,
                quadrature_error: 0.0,
            };
            for _ in 0..forms {
                let n = random_psd(d, &mut rng);
                let s = size_p(&n, 2.0, quad)?;
                let hs = n.hs_norm()?;
                row.hs_rel_error = row.hs_rel_error.max((hs - c * s.value).abs() / hs);
                row.quadrature_error = row.quadrature_error.max(s.rel_error);

                let n = random_rank_one(d, &mut rng);
                let s = size_p(&n, 2.0, quad)?;
                let op = n.op_norm();
                row.op_rel_error = row.op_rel_error.max((op - c * s.value).abs() / op);
                row.quadrature_error = row.quadrature_error.max(s.rel_error);
            }
            Ok(row)
        })
        .collect()
}
