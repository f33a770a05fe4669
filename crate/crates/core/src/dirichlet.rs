//! Discrete Dirichlet problem at a fixed scale, solved by barycenter relaxation.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::space::PointCloudSpace;
use crate::target::{BarycenterOptions, GeodesicTarget, TargetPoint};

/// Values on the interior and boundary layer; `None` elsewhere.
pub type PartialMap = Vec<Option<TargetPoint>>;

/// Halvings tried by the Jacobi safeguard before the sweep is rejected.
const MAX_DAMPING: usize = 40;
/// Relative rounding allowance in energy comparisons.
const ROUNDOFF: f64 = 1e-14;
/// Cap on the contraction estimate used in the stopping test.
const RHO_CAP: f64 = 0.999;
/// Inverse iteration limits for the Poincaré estimate.
const POWER_ITERATIONS: usize = 10_000;
const POWER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelaxMode {
    #[default]
    Jacobi,
    GaussSeidel,
}

impl std::str::FromStr for RelaxMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jacobi" => Ok(RelaxMode::Jacobi),
            "gauss-seidel" => Ok(RelaxMode::GaussSeidel),
            _ => Err(Error::InvalidParameter(format!("unknown relaxation mode '{s}'"))),
        }
    }
}

/// Default stopping tolerance: tighter on flat targets.
pub fn default_tol(target: &GeodesicTarget) -> f64 {
    fn flat(t: &GeodesicTarget) -> bool {
        match t {
            GeodesicTarget::Euclidean { .. } => true,
            GeodesicTarget::Product(c) => c.iter().all(flat),
            _ => false,
        }
    }
    if flat(target) {
        1e-8
    } else {
        1e-6
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub mode: RelaxMode,
    pub tol: f64,
    pub max_sweeps: usize,
    /// Seed of the second initialization used by the uniqueness audit.
    pub seed: u64,
    pub audit_uniqueness: bool,
    pub barycenter: BarycenterOptions,
}

impl SolverOptions {
    pub fn for_target(target: &GeodesicTarget) -> Self {
        SolverOptions {
            mode: RelaxMode::Jacobi,
            tol: default_tol(target),
            max_sweeps: 100_000,
            seed: 0,
            audit_uniqueness: true,
            barycenter: BarycenterOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Energy of the initial map followed by one entry per sweep.
    pub energy_trajectory: Vec<f64>,
    pub final_energy: f64,
    pub max_displacement_last_sweep: f64,
    /// Displacement divided by `1 − ρ`, with `ρ` the observed contraction.
    pub error_estimate: f64,
    pub converged: bool,
    /// Sup target distance to the solution from the seeded second start.
    pub uniqueness_gap: Option<f64>,
    pub unique: Option<bool>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepInfo {
    pub energy: f64,
    pub displacement: f64,
    /// Step fraction kept by the Jacobi safeguard (1 when undamped).
    pub step: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MidpointReport {
    /// `2E(m) + ½E(s)`.
    pub lhs: f64,
    /// `E(u) + E(v)`.
    pub rhs: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PoincareReport {
    pub constant: f64,
    pub lambda_min: f64,
    pub iterations: usize,
}

/// Serialized problem: boundary values keyed by index.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryValue {
    pub index: usize,
    pub value: serde_json::Value,
}

/// Per interior point: energy coefficients and relaxation weights over
/// `B_r(x) ∖ {x}`.
#[derive(Debug, Clone)]
struct Stencil {
    /// `(y, k_xy)`, halved when `y` is interior since that pair is met twice.
    pairs: Vec<(usize, f64)>,
    /// `(y, w_y)`.
    relax: Vec<(usize, f64)>,
}

/// Minimize the scale-`r` energy over the interior with values fixed on the
/// boundary layer.
///
/// The energy is the pair form
/// `E(u) = Σ k_xy d_Y²(u(x), u(y))` over unordered pairs `d(x, y) < r`
/// meeting the interior, with `k_xy = 2 w_x w_y / (m̄ r²)` and `m̄` the mean
/// interior ball mass. It equals `Σ_{x ∈ Ω} w_x ks²_{2,r}[u](x)` when all
/// interior balls have mass `m̄` and no ball meets the layer, and its
/// minimizer in one value is the `w_y`-weighted barycenter of the ball.
#[derive(Debug, Clone)]
pub struct DirichletProblem<'a> {
    space: &'a PointCloudSpace,
    target: &'a GeodesicTarget,
    interior: Vec<usize>,
    is_interior: Vec<bool>,
    layer: Vec<usize>,
    boundary: BTreeMap<usize, TargetPoint>,
    scale: f64,
    stencils: Vec<Stencil>,
}

impl<'a> DirichletProblem<'a> {
    /// Validates the problem: CAT(0) target, nonempty interior with a
    /// nonempty complement, every interior ball holding another point, and
    /// a boundary value on every layer index.
    pub fn new(
        space: &'a PointCloudSpace,
        target: &'a GeodesicTarget,
        interior: &[usize],
        boundary_data: Vec<(usize, TargetPoint)>,
        scale: f64,
    ) -> Result<Self> {
        let n = space.len();
        if !target.is_cat0() {
            return Err(Error::Infeasible(format!("{} target is not CAT(0)", target.kind_name())));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale must be positive, got {scale}")));
        }
        if interior.is_empty() {
            return Err(Error::Infeasible("interior is empty".into()));
        }
        let mut is_interior = vec![false; n];
        for &i in interior {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
            if std::mem::replace(&mut is_interior[i], true) {
                return Err(Error::Infeasible(format!("interior index {i} listed twice")));
            }
        }
        let mut interior = interior.to_vec();
        interior.sort_unstable();
        if interior.len() == n {
            return Err(Error::Infeasible("interior has an empty complement".into()));
        }
        let mut boundary = BTreeMap::new();
        for (i, v) in boundary_data {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
            if is_interior[i] {
                return Err(Error::Infeasible(format!("boundary value given at interior index {i}")));
            }
            if boundary.insert(i, target.check_point(&v)?).is_some() {
                return Err(Error::Infeasible(format!("boundary index {i} listed twice")));
            }
        }
        let balls: Vec<Vec<(usize, f64)>> = interior.par_iter().map(|&x| space.neighbors(x, scale)).collect();
        let mut in_layer = vec![false; n];
        let mut mass_sum = 0.0;
        for (&x, ball) in interior.iter().zip(&balls) {
            if ball.len() < 2 {
                return Err(Error::Infeasible(format!("interior point {x} has no other point in its ball")));
            }
            mass_sum += ball.iter().map(|&(j, _)| space.weight(j)).sum::<f64>();
            for &(j, _) in ball {
                if !is_interior[j] {
                    in_layer[j] = true;
                }
            }
        }
        let layer: Vec<usize> = (0..n).filter(|&j| in_layer[j]).collect();
        if let Some(&j) = layer.iter().find(|j| !boundary.contains_key(j)) {
            return Err(Error::Infeasible(format!("boundary layer index {j} has no boundary value")));
        }
        let mean_mass = mass_sum / interior.len() as f64;
        let unit = 2.0 / (mean_mass * scale * scale);
        let stencils = interior
            .iter()
            .zip(&balls)
            .map(|(&x, ball)| {
                let others = ball.iter().filter(|&&(j, _)| j != x);
                let wx = space.weight(x);
                Stencil {
                    pairs: others
                        .clone()
                        .map(|&(j, _)| {
                            let half = if is_interior[j] { 0.5 } else { 1.0 };
                            (j, half * unit * wx * space.weight(j))
                        })
                        .collect(),
                    relax: others.map(|&(j, _)| (j, space.weight(j))).collect(),
                }
            })
            .collect();
        Ok(DirichletProblem {
            space,
            target,
            interior,
            is_interior,
            layer,
            boundary,
            scale,
            stencils,
        })
    }

    /// Builds a problem from JSON boundary entries.
    pub fn from_json(
        space: &'a PointCloudSpace,
        target: &'a GeodesicTarget,
        interior: &[usize],
        boundary: &[BoundaryValue],
        scale: f64,
    ) -> Result<Self> {
        let data = boundary
            .iter()
            .map(|b| Ok((b.index, target.point_from_json(&b.value)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(space, target, interior, data, scale)
    }

    pub fn space(&self) -> &'a PointCloudSpace {
        self.space
    }

    pub fn target(&self) -> &'a GeodesicTarget {
        self.target
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// Non-interior indices within the scale of the interior.
    pub fn boundary_layer(&self) -> &[usize] {
        &self.layer
    }

    pub fn boundary_value(&self, i: usize) -> Option<&TargetPoint> {
        self.boundary.get(&i)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn empty_map(&self) -> PartialMap {
        let mut u = vec![None; self.space.len()];
        for (&i, v) in &self.boundary {
            u[i] = Some(v.clone());
        }
        u
    }

    /// Interior values copied from the nearest boundary index (smallest
    /// index on ties).
    pub fn default_init(&self) -> PartialMap {
        let mut u = self.empty_map();
        let sources: Vec<usize> = self.boundary.keys().copied().collect();
        let picks: Vec<usize> = self
            .interior
            .par_iter()
            .map(|&x| {
                let mut best = (f64::INFINITY, usize::MAX);
                for &b in &sources {
                    let d = self.space.dist(x, b);
                    if d < best.0 {
                        best = (d, b);
                    }
                }
                best.1
            })
            .collect();
        for (&x, b) in self.interior.iter().zip(picks) {
            u[x] = Some(self.boundary[&b].clone());
        }
        u
    }

    /// Interior values at random points on geodesics between random
    /// boundary-layer values.
    pub fn seeded_init(&self, seed: u64) -> PartialMap {
        let mut u = self.empty_map();
        let mut rng = seeded(seed);
        for &x in &self.interior {
            let a = &self.boundary[&self.layer[rng.random_range(0..self.layer.len())]];
            let b = &self.boundary[&self.layer[rng.random_range(0..self.layer.len())]];
            u[x] = Some(self.target.geodesic_point(a, b, rng.random::<f64>()));
        }
        u
    }

    fn value<'m>(&self, u: &'m PartialMap, i: usize) -> Result<&'m TargetPoint> {
        u.get(i).and_then(Option::as_ref).ok_or(Error::MissingValue(i))
    }

    /// Errors unless the map has the problem's length, interior values, and
    /// exactly the boundary data on the layer.
    pub fn check_feasible(&self, u: &PartialMap) -> Result<()> {
        if u.len() != self.space.len() {
            return Err(Error::MapLength {
                expected: self.space.len(),
                found: u.len(),
            });
        }
        for &x in &self.interior {
            self.target.check_point(self.value(u, x)?)?;
        }
        for &j in &self.layer {
            if self.value(u, j)? != &self.boundary[&j] {
                return Err(Error::BoundaryMismatch(j));
            }
        }
        Ok(())
    }

    fn energy_terms(&self, target: &GeodesicTarget, u: &PartialMap) -> Result<Vec<f64>> {
        self.interior
            .par_iter()
            .zip(&self.stencils)
            .map(|(&x, st)| {
                let ux = self.value(u, x)?;
                let mut acc = 0.0;
                for &(j, k) in &st.pairs {
                    let d = target.try_dist(ux, self.value(u, j)?)?;
                    acc += k * d * d;
                }
                Ok(acc)
            })
            .collect()
    }

    /// The pair energy, accumulated per interior point in index order.
    pub fn discrete_energy(&self, u: &PartialMap) -> Result<f64> {
        Ok(self.energy_terms(self.target, u)?.iter().sum())
    }

    /// The same functional for a real-valued map on the same index sets.
    pub fn scalar_energy(&self, f: &[f64]) -> Result<f64> {
        let line = GeodesicTarget::euclidean(1);
        let u: PartialMap = f.iter().map(|&x| Some(TargetPoint::Euclidean(vec![x]))).collect();
        Ok(self.energy_terms(&line, &u)?.iter().sum())
    }

    fn local_objective(&self, k: usize, z: &TargetPoint, u: &PartialMap) -> f64 {
        self.stencils[k]
            .relax
            .iter()
            .map(|&(j, c)| {
                let d = self.target.dist(z, u[j].as_ref().expect("checked"));
                c * d * d
            })
            .sum()
    }

    fn relax_point(&self, k: usize, u: &PartialMap, opts: &BarycenterOptions) -> Result<TargetPoint> {
        let x = self.interior[k];
        let st = &self.stencils[k];
        let pts: Vec<&TargetPoint> = st.relax.iter().map(|&(j, _)| u[j].as_ref().expect("checked")).collect();
        let w: Vec<f64> = st.relax.iter().map(|&(_, c)| c).collect();
        let z = self
            .target
            .barycenter_with(&pts, &w, opts)
            .map_err(|e| Error::RelaxFailed {
                point: x,
                source: Box::new(e),
            })?;
        let old = u[x].as_ref().expect("checked");
        // an inexact barycenter must not raise the local objective
        let before = self.local_objective(k, old, u);
        if self.local_objective(k, &z, u) > before + ROUNDOFF * before {
            Ok(old.clone())
        } else {
            Ok(z)
        }
    }

    /// One relaxation sweep. Each interior value moves to the minimizer of
    /// the energy in that value alone, a weighted barycenter of its ball.
    /// Jacobi reads the previous map everywhere and is damped along
    /// geodesics if the simultaneous update would raise the energy.
    pub fn relax_sweep(&self, u: &PartialMap, mode: RelaxMode, opts: &BarycenterOptions) -> Result<(PartialMap, SweepInfo)> {
        self.check_feasible(u)?;
        let before = self.discrete_energy(u)?;
        self.relax_from(u, before, mode, opts)
    }

    fn relax_from(
        &self,
        u: &PartialMap,
        before: f64,
        mode: RelaxMode,
        opts: &BarycenterOptions,
    ) -> Result<(PartialMap, SweepInfo)> {
        let mut next = u.clone();
        let mut step = 1.0;
        match mode {
            RelaxMode::GaussSeidel => {
                for k in 0..self.interior.len() {
                    let z = self.relax_point(k, &next, opts)?;
                    next[self.interior[k]] = Some(z);
                }
            }
            RelaxMode::Jacobi => {
                let proposals = (0..self.interior.len())
                    .into_par_iter()
                    .map(|k| self.relax_point(k, u, opts))
                    .collect::<Result<Vec<_>>>()?;
                for (&x, z) in self.interior.iter().zip(&proposals) {
                    next[x] = Some(z.clone());
                }
                // energies cannot resolve changes below rounding of the total
                let ceiling = before + (ROUNDOFF * before).min(1e-13);
                let mut energy = self.discrete_energy(&next)?;
                let mut halvings = 0;
                while energy > ceiling && halvings < MAX_DAMPING {
                    step *= 0.5;
                    halvings += 1;
                    for (&x, z) in self.interior.iter().zip(&proposals) {
                        let old = u[x].as_ref().expect("checked");
                        next[x] = Some(self.target.geodesic_point(old, z, step));
                    }
                    energy = self.discrete_energy(&next)?;
                }
                if energy > ceiling {
                    next = u.clone();
                    step = 0.0;
                }
            }
        }
        let energy = self.discrete_energy(&next)?;
        let displacement = self
            .interior
            .iter()
            .map(|&x| self.target.dist(u[x].as_ref().expect("checked"), next[x].as_ref().expect("checked")))
            .fold(0.0, f64::max);
        Ok((
            next,
            SweepInfo {
                energy,
                displacement,
                step,
            },
        ))
    }

    /// Relaxes until the estimated distance to the fixed point,
    /// `displacement / (1 − ρ)`, drops below `tol`. `ρ` is the larger of
    /// the last two displacement ratios, capped below 1.
    pub fn solve(&self, init: Option<PartialMap>, opts: &SolverOptions) -> Result<(PartialMap, SolveReport)> {
        let (u, mut report) = self.solve_once(init.unwrap_or_else(|| self.default_init()), opts)?;
        if opts.audit_uniqueness {
            let (v, _) = self.solve_once(self.seeded_init(opts.seed), opts)?;
            let gap = self
                .interior
                .iter()
                .map(|&x| self.target.dist(u[x].as_ref().expect("solved"), v[x].as_ref().expect("solved")))
                .fold(0.0, f64::max);
            report.uniqueness_gap = Some(gap);
            report.unique = Some(gap <= 10.0 * opts.tol);
        }
        Ok((u, report))
    }

    fn solve_once(&self, mut u: PartialMap, opts: &SolverOptions) -> Result<(PartialMap, SolveReport)> {
        if !(opts.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", opts.tol)));
        }
        self.check_feasible(&u)?;
        let mut energy = self.discrete_energy(&u)?;
        let mut trajectory = vec![energy];
        let mut ratios = [0.0f64; 2];
        let mut last = f64::NAN;
        let mut displacement = f64::INFINITY;
        let mut estimate = f64::INFINITY;
        let mut converged = false;
        let mut iterations = 0;
        while iterations < opts.max_sweeps {
            let (next, info) = self.relax_from(&u, energy, opts.mode, &opts.barycenter)?;
            iterations += 1;
            u = next;
            energy = info.energy;
            trajectory.push(energy);
            if last > 0.0 {
                ratios = [ratios[1], info.displacement / last];
            }
            last = info.displacement;
            displacement = info.displacement;
            let rho = ratios[0].max(ratios[1]).min(RHO_CAP);
            estimate = displacement / (1.0 - rho);
            if estimate < opts.tol || info.step == 0.0 {
                converged = estimate < opts.tol || displacement == 0.0;
                break;
            }
        }
        Ok((
            u,
            SolveReport {
                iterations,
                final_energy: energy,
                energy_trajectory: trajectory,
                max_displacement_last_sweep: displacement,
                error_estimate: estimate,
                converged,
                uniqueness_gap: None,
                unique: None,
            },
        ))
    }

    /// Pointwise midpoint `m` and distance `s` of two feasible maps, with
    /// the slack of `2E(m) + ½E(s) ≤ E(u) + E(v)`.
    pub fn midpoint_test(&self, u: &PartialMap, v: &PartialMap) -> Result<MidpointReport> {
        self.check_feasible(u)?;
        for &j in &self.layer {
            if u[j] != v[j] {
                return Err(Error::BoundaryMismatch(j));
            }
        }
        self.check_feasible(v)?;
        let mut m = self.empty_map();
        let mut s = vec![0.0; self.space.len()];
        for &x in &self.interior {
            let (a, b) = (u[x].as_ref().expect("checked"), v[x].as_ref().expect("checked"));
            m[x] = Some(self.target.midpoint(a, b));
            s[x] = self.target.dist(a, b);
        }
        let lhs = 2.0 * self.discrete_energy(&m)? + 0.5 * self.scalar_energy(&s)?;
        let rhs = self.discrete_energy(u)? + self.discrete_energy(v)?;
        Ok(MidpointReport {
            lhs,
            rhs,
            slack: rhs - lhs,
        })
    }

    /// Sparse rows of the real quadratic form `f ↦ E(f)` on functions that
    /// vanish off the interior, indexed by interior position.
    fn quadratic_form(&self) -> Vec<Vec<(usize, f64)>> {
        let mut pos = vec![usize::MAX; self.space.len()];
        for (k, &x) in self.interior.iter().enumerate() {
            pos[x] = k;
        }
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); self.interior.len()];
        for (k, st) in self.stencils.iter().enumerate() {
            for &(j, c) in &st.pairs {
                *rows[k].entry(k).or_default() += c;
                if self.is_interior[j] {
                    let l = pos[j];
                    *rows[l].entry(l).or_default() += c;
                    *rows[k].entry(l).or_default() -= c;
                    *rows[l].entry(k).or_default() -= c;
                }
            }
        }
        rows.into_iter().map(|r| r.into_iter().collect()).collect()
    }

    /// Components of the interior graph that never reach the layer.
    fn check_components(&self) -> Result<()> {
        let mut pos = vec![usize::MAX; self.space.len()];
        for (k, &x) in self.interior.iter().enumerate() {
            pos[x] = k;
        }
        let m = self.interior.len();
        let mut seen = vec![false; m];
        for start in 0..m {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut stack = vec![start];
            let mut members = Vec::new();
            let mut touches = false;
            while let Some(k) = stack.pop() {
                members.push(self.interior[k]);
                for &(j, _) in &self.stencils[k].pairs {
                    if self.is_interior[j] {
                        if !seen[pos[j]] {
                            seen[pos[j]] = true;
                            stack.push(pos[j]);
                        }
                    } else {
                        touches = true;
                    }
                }
            }
            if !touches {
                return Err(Error::SingularForm {
                    representative: *members.iter().min().expect("nonempty"),
                    size: members.len(),
                });
            }
        }
        Ok(())
    }

    /// `C = 1/λ_min` for `Σ_Ω w f² ≤ C E(f)` over real `f` vanishing off the
    /// interior, by inverse power iteration with conjugate-gradient solves.
    pub fn poincare_estimate(&self) -> Result<PoincareReport> {
        self.check_components()?;
        let a = self.quadratic_form();
        let w: Vec<f64> = self.interior.iter().map(|&x| self.space.weight(x)).collect();
        let m = w.len();
        let apply = |v: &[f64]| -> Vec<f64> {
            a.iter()
                .map(|row| row.iter().map(|&(l, c)| c * v[l]).sum())
                .collect()
        };
        let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        let mut f = vec![1.0; m];
        let mut lambda = f64::INFINITY;
        let mut iterations = 0;
        while iterations < POWER_ITERATIONS {
            iterations += 1;
            let rhs: Vec<f64> = f.iter().zip(&w).map(|(x, w)| x * w).collect();
            let mut g = conjugate_gradient(&apply, &rhs, m);
            let norm = dot(&g, &g.iter().zip(&w).map(|(x, w)| x * w).collect::<Vec<_>>()).sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::Infeasible("Dirichlet form could not be inverted".into()));
            }
            g.iter_mut().for_each(|x| *x /= norm);
            let next = dot(&g, &apply(&g));
            let done = (next - lambda).abs() <= POWER_TOL * next;
            lambda = next;
            f = g;
            if done {
                break;
            }
        }
        Ok(PoincareReport {
            constant: 1.0 / lambda,
            lambda_min: lambda,
            iterations,
        })
    }
}

fn conjugate_gradient(apply: &impl Fn(&[f64]) -> Vec<f64>, b: &[f64], m: usize) -> Vec<f64> {
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let mut x = vec![0.0; m];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let stop = 1e-28 * rr;
    for _ in 0..(10 * m).max(100) {
        if rr <= stop {
            break;
        }
        let ap = apply(&p);
        let alpha = rr / dot(&p, &ap);
        for k in 0..m {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let next = dot(&r, &r);
        let beta = next / rr;
        rr = next;
        for k in 0..m {
            p[k] = r[k] + beta * p[k];
        }
    }
    x
}
