//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use ks_core::dirichlet::PartialMap;
use ks_core::space::PointCloudSpace;
use ks_core::target::{GeodesicTarget, MetricTree, TargetPoint, TreePoint};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// `n` equispaced points on `[0, 1]`.
pub fn line(n: usize, weights: Option<Vec<f64>>) -> PointCloudSpace {
    let pts = (0..n).map(|k| vec![k as f64 / (n - 1) as f64]).collect();
    PointCloudSpace::euclidean(pts, weights).unwrap()
}

/// `n × n` grid on the unit square, row-major in the first coordinate.
pub fn grid(n: usize) -> PointCloudSpace {
    let h = 1.0 / (n - 1) as f64;
    let mut pts = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            pts.push(vec![i as f64 * h, j as f64 * h]);
        }
    }
    PointCloudSpace::euclidean(pts, None).unwrap()
}

/// `n × n` grid on the unit flat torus.
pub fn torus(n: usize) -> PointCloudSpace {
    let h = 1.0 / n as f64;
    let mut pts = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            pts.push(vec![i as f64 * h, j as f64 * h]);
        }
    }
    PointCloudSpace::flat_torus(pts, vec![1.0, 1.0], None).unwrap()
}

pub fn euclid(v: &[f64]) -> TargetPoint {
    TargetPoint::Euclidean(v.to_vec())
}

/// Interior neighbors and the harmonic condition
/// `Σ_{y ∈ B_r(x)∖x} w_y (u(x) − u(y)) = 0` at every interior `x`, solved
/// densely. Returns the values at the interior indices, in the given order.
pub fn harmonic_linear_solve(
    space: &PointCloudSpace,
    interior: &[usize],
    boundary: &dyn Fn(usize) -> Vec<f64>,
    r: f64,
) -> Vec<Vec<f64>> {
    let m = interior.len();
    let mut pos = vec![usize::MAX; space.len()];
    for (k, &x) in interior.iter().enumerate() {
        pos[x] = k;
    }
    let dim = boundary(
        (0..space.len())
            .find(|&i| pos[i] == usize::MAX)
            .expect("boundary point"),
    )
    .len();
    let mut a = DMatrix::<f64>::zeros(m, m);
    let mut b = DMatrix::<f64>::zeros(m, dim);
    for (k, &x) in interior.iter().enumerate() {
        for y in 0..space.len() {
            if y == x || space.dist(x, y) >= r {
                continue;
            }
            let w = space.weight(y);
            a[(k, k)] += w;
            if pos[y] != usize::MAX {
                a[(k, pos[y])] -= w;
            } else {
                let g = boundary(y);
                for c in 0..dim {
                    b[(k, c)] += w * g[c];
                }
            }
        }
    }
    let sol = a.lu().solve(&b).expect("nonsingular harmonic system");
    (0..m).map(|k| (0..dim).map(|c| sol[(k, c)]).collect()).collect()
}

/// One Jacobi step `u(x) ← Σ w_y u(y) / Σ w_y` of the harmonic system.
pub fn jacobi_step(space: &PointCloudSpace, interior: &[usize], u: &[Vec<f64>], r: f64) -> Vec<Vec<f64>> {
    let mut next = u.to_vec();
    for &x in interior {
        let dim = u[x].len();
        let mut acc = vec![0.0; dim];
        let mut mass = 0.0;
        for y in 0..space.len() {
            if y == x || space.dist(x, y) >= r {
                continue;
            }
            let w = space.weight(y);
            mass += w;
            for c in 0..dim {
                acc[c] += w * u[y][c];
            }
        }
        next[x] = acc.iter().map(|a| a / mass).collect();
    }
    next
}

/// Where an interior value sits in the brute-force search over a star.
#[derive(Debug, Clone, Copy)]
enum Slot {
    Hub,
    Leg(usize),
}

/// Minimizes `Σ w_x w_y d²(u(x), u(y))` over unordered pairs `d(x,y) < r`
/// meeting the interior, for maps into a star with the given legs.
///
/// Every interior point is placed at the hub or on one of the legs; for
/// each of the `(legs+1)^m` placements the energy is a quadratic in the leg
/// offsets (`(t−s)²` on a shared leg, `(t+s)²` across legs), minimized by a
/// linear solve. Placements whose minimizer leaves `[0, length]` are
/// skipped: the constrained optimum then sits at the hub, which another
/// placement covers. Returns `(leg, offset)` per interior point (leg
/// `usize::MAX` for the hub) and the minimal energy.
pub fn star_bruteforce(
    space: &PointCloudSpace,
    legs: &[f64],
    interior: &[usize],
    boundary: &dyn Fn(usize) -> (usize, f64),
    r: f64,
) -> (Vec<(usize, f64)>, f64) {
    let n = space.len();
    let m = interior.len();
    let mut pos = vec![usize::MAX; n];
    for (k, &x) in interior.iter().enumerate() {
        pos[x] = k;
    }
    let mut pairs = Vec::new();
    for x in 0..n {
        for y in (x + 1)..n {
            if space.dist(x, y) < r && (pos[x] != usize::MAX || pos[y] != usize::MAX) {
                pairs.push((x, y, space.weight(x) * space.weight(y)));
            }
        }
    }
    let slots = legs.len() + 1;
    let total = slots.pow(m as u32);
    let mut best = (Vec::new(), f64::INFINITY);
    let mut placement = vec![Slot::Hub; m];
    for code in 0..total {
        let mut c = code;
        for s in placement.iter_mut() {
            *s = match c % slots {
                0 => Slot::Hub,
                k => Slot::Leg(k - 1),
            };
            c /= slots;
        }
        // energy = tᵀ A t − 2 bᵀ t + const over the free offsets
        let mut a = DMatrix::<f64>::zeros(m, m);
        let mut b = DVector::<f64>::zeros(m);
        let leg_of = |z: usize| -> Option<usize> {
            if pos[z] != usize::MAX {
                match placement[pos[z]] {
                    Slot::Hub => None,
                    Slot::Leg(l) => Some(l),
                }
            } else {
                Some(boundary(z).0)
            }
        };
        for &(x, y, w) in &pairs {
            let (lx, ly) = (leg_of(x), leg_of(y));
            // d = σx tx + σy ty with σ = ±1, or a single offset against the hub
            let sign = match (lx, ly) {
                (Some(p), Some(q)) if p == q => -1.0,
                _ => 1.0,
            };
            let mut lin = [(x, 1.0), (y, sign)];
            if lx.is_none() {
                lin[0].1 = 0.0;
            }
            if ly.is_none() {
                lin[1].1 = 0.0;
            }
            let mut constant = 0.0;
            let mut free: Vec<(usize, f64)> = Vec::new();
            for &(z, s) in &lin {
                if s == 0.0 {
                    continue;
                }
                if pos[z] != usize::MAX {
                    free.push((pos[z], s));
                } else {
                    constant += s * boundary(z).1;
                }
            }
            for &(i, si) in &free {
                for &(j, sj) in &free {
                    a[(i, j)] += w * si * sj;
                }
                b[i] -= w * si * constant;
            }
        }
        let hub: Vec<usize> = (0..m).filter(|&k| matches!(placement[k], Slot::Hub)).collect();
        for &k in &hub {
            a.row_mut(k).fill(0.0);
            a.column_mut(k).fill(0.0);
            a[(k, k)] = 1.0;
            b[k] = 0.0;
        }
        let Some(t) = a.clone().lu().solve(&b) else { continue };
        let ok = (0..m).all(|k| match placement[k] {
            Slot::Hub => true,
            Slot::Leg(l) => t[k] >= 0.0 && t[k] <= legs[l],
        });
        if !ok {
            continue;
        }
        let values: Vec<(usize, f64)> = (0..m)
            .map(|k| match placement[k] {
                Slot::Hub => (usize::MAX, 0.0),
                Slot::Leg(l) => (l, t[k]),
            })
            .collect();
        let e = star_energy(&pairs, &pos, &values, boundary);
        if e < best.1 {
            best = (values, e);
        }
    }
    best
}

fn star_energy(
    pairs: &[(usize, usize, f64)],
    pos: &[usize],
    values: &[(usize, f64)],
    boundary: &dyn Fn(usize) -> (usize, f64),
) -> f64 {
    let at = |z: usize| if pos[z] != usize::MAX { values[pos[z]] } else { boundary(z) };
    pairs
        .iter()
        .map(|&(x, y, w)| {
            let (p, s) = at(x);
            let (q, t) = at(y);
            let d = if p == q || s == 0.0 || t == 0.0 { (s - t).abs() } else { s + t };
            w * d * d
        })
        .sum()
}

/// Star target with hub vertex 0 and leaf `k + 1` per leg.
pub fn star(legs: &[f64]) -> GeodesicTarget {
    GeodesicTarget::Tree(MetricTree::star(legs).unwrap())
}

/// `(leg, distance from hub)` of a star point; the hub is `(usize::MAX, 0)`.
pub fn star_coords(tree: &GeodesicTarget, p: &TargetPoint) -> (usize, f64) {
    let GeodesicTarget::Tree(t) = tree else { panic!("not a tree") };
    match p {
        TargetPoint::Tree(TreePoint::Vertex(0)) => (usize::MAX, 0.0),
        TargetPoint::Tree(TreePoint::Vertex(v)) => (v - 1, t.edges()[v - 1].2),
        TargetPoint::Tree(TreePoint::Edge { edge, offset }) => (*edge, *offset),
        _ => panic!("not a tree point"),
    }
}

/// Smallest generalized eigenvalue of `A f = λ W f` for the pair form
/// `Σ k_xy (f(x) − f(y))²` with `f = 0` off the interior and
/// `k_xy = 2 w_x w_y / (m̄ r²)`, `m̄` the mean interior ball mass.
pub fn poincare_lambda(space: &PointCloudSpace, interior: &[usize], r: f64) -> f64 {
    let m = interior.len();
    let mut pos = vec![usize::MAX; space.len()];
    for (k, &x) in interior.iter().enumerate() {
        pos[x] = k;
    }
    let mass: f64 = interior
        .iter()
        .map(|&x| (0..space.len()).filter(|&y| space.dist(x, y) < r).map(|y| space.weight(y)).sum::<f64>())
        .sum::<f64>()
        / m as f64;
    let mut a = DMatrix::<f64>::zeros(m, m);
    for x in 0..space.len() {
        for y in (x + 1)..space.len() {
            if space.dist(x, y) >= r || (pos[x] == usize::MAX && pos[y] == usize::MAX) {
                continue;
            }
            let k = 2.0 * space.weight(x) * space.weight(y) / (mass * r * r);
            for (z, s) in [(x, 1.0), (y, -1.0)] {
                for (v, t) in [(x, 1.0), (y, -1.0)] {
                    if pos[z] != usize::MAX && pos[v] != usize::MAX {
                        a[(pos[z], pos[v])] += k * s * t;
                    }
                }
            }
        }
    }
    let scale: Vec<f64> = interior.iter().map(|&x| 1.0 / space.weight(x).sqrt()).collect();
    let b = DMatrix::from_fn(m, m, |i, j| scale[i] * a[(i, j)] * scale[j]);
    SymmetricEigen::new(b).eigenvalues.min()
}

/// Sup-norm distance between euclidean interior values and expected vectors.
pub fn sup_error(u: &PartialMap, interior: &[usize], want: &[Vec<f64>]) -> f64 {
    interior
        .iter()
        .zip(want)
        .map(|(&x, w)| match u[x].as_ref().unwrap() {
            TargetPoint::Euclidean(v) => v.iter().zip(w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
            _ => panic!("euclidean expected"),
        })
        .fold(0.0, f64::max)
}

/// Dirichlet fixture: a path, a grid with a two-spacing layer, or a disc
/// patch of the flat torus.
pub struct Case {
    pub space: PointCloudSpace,
    pub interior: Vec<usize>,
    pub boundary: Vec<usize>,
    pub r: f64,
}

pub fn path_case() -> Case {
    Case {
        space: line(11, None),
        interior: (1..10).collect(),
        boundary: vec![0, 10],
        r: 0.15,
    }
}

pub fn grid_case() -> Case {
    let n = 15;
    let space = grid(n);
    let h = 1.0 / (n - 1) as f64;
    let r = 2.5 * h;
    // interior: at least two spacings from the edge; layer: the rest
    let (interior, boundary): (Vec<usize>, Vec<usize>) = (0..space.len()).partition(|&i| {
        let c = space.coords(i).unwrap();
        c.iter().all(|&x| x > 1.5 * h && x < 1.0 - 1.5 * h)
    });
    Case { space, interior, boundary, r }
}

pub fn torus_patch_case() -> Case {
    let space = torus(16);
    let r = 1.6 / 16.0;
    let dist_to_center = |i: usize| {
        let c = space.coords(i).unwrap();
        c.iter().map(|&x| (x - 0.5).powi(2)).sum::<f64>().sqrt()
    };
    let interior: Vec<usize> = (0..space.len()).filter(|&i| dist_to_center(i) < 0.3).collect();
    let boundary: Vec<usize> = (0..space.len()).filter(|&i| dist_to_center(i) >= 0.3).collect();
    Case { space, interior, boundary, r }
}

pub fn boundary_values(c: &Case) -> impl Fn(usize) -> Vec<f64> + '_ {
    move |i| {
        let p = c.space.coords(i).unwrap();
        let x = p[0];
        let y = p.get(1).copied().unwrap_or(0.0);
        if c.space.ambient_dim() == Some(1) {
            vec![x]
        } else {
            vec![x * x - y, (3.0 * x).sin() + y]
        }
    }
}
