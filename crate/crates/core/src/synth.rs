//! Synthetic fixtures: sampled spaces with audited atlases and maps whose
//! energy densities are known in closed form.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::chart::{alignment_defect, chart_audit, Atlas, Chart};
use crate::error::{Error, Result};
use crate::map::MetricMap;
use crate::rng::seeded;
use crate::space::PointCloudSpace;
use crate::target::{GeodesicTarget, MetricTree, TargetPoint};

/// Half angle of the arc sampled by the curve fixture (unit radius).
pub const ARC_HALF_ANGLE: f64 = 0.3;
/// Fraction of the arc covered by each overlapping chart of the curve.
const CURVE_CHART_SPAN: f64 = 0.6;
/// Leg length of the tripod used by tree-valued reference maps.
const TRIPOD_LEG: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixtureFamily {
    EuclideanGrid,
    FlatTorusGrid,
    TwoChartCurve,
}

impl std::str::FromStr for FixtureFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean-grid" => Ok(FixtureFamily::EuclideanGrid),
            "flat-torus-grid" => Ok(FixtureFamily::FlatTorusGrid),
            "two-chart-curve" => Ok(FixtureFamily::TwoChartCurve),
            _ => Err(Error::InvalidParameter(format!("unknown fixture family '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureSpec {
    pub family: FixtureFamily,
    /// Ignored by the curve, which is one-dimensional.
    #[serde(default = "one")]
    pub dim: usize,
    /// Points per dimension.
    pub resolution: usize,
    pub epsilon: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

/// A map with a closed-form energy density, constant over the domain.
#[derive(Debug, Clone)]
pub struct ReferenceMap {
    pub name: String,
    pub target: GeodesicTarget,
    pub values: Vec<TargetPoint>,
    /// `e_2` away from the domain boundary (and from the fold, for folds).
    pub density: f64,
}

impl ReferenceMap {
    pub fn on<'a>(&'a self, space: &'a PointCloudSpace) -> Result<MetricMap<'a>> {
        MetricMap::new(space, &self.target, self.values.clone())
    }
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub spec: FixtureSpec,
    pub space: PointCloudSpace,
    pub atlas: Atlas,
    /// Charts that overlap each other (the curve's two charts); empty otherwise.
    pub overlapping: Vec<Chart>,
    pub maps: Vec<ReferenceMap>,
    /// Sample spacing.
    pub spacing: f64,
    /// Suggested energy scales, half-integer multiples of the spacing.
    pub scales: Vec<f64>,
    /// Intrinsic distance to the edge of the domain (infinite on the torus).
    pub edge_distance: Vec<f64>,
    /// Distance from the fold of the folded reference map, where it exists.
    pub fold_distance: Option<Vec<f64>>,
}

impl Fixture {
    /// Points at least `margin` away from the domain edge.
    pub fn interior(&self, margin: f64) -> Vec<bool> {
        self.edge_distance.iter().map(|&d| d >= margin).collect()
    }

    pub fn map(&self, name: &str) -> Option<&ReferenceMap> {
        self.maps.iter().find(|m| m.name == name)
    }

    /// Map names with their reference densities.
    pub fn manifest(&self) -> Value {
        json!({
            "family": self.spec.family,
            "dim": self.atlas.dim(),
            "resolution": self.spec.resolution,
            "epsilon": self.spec.epsilon,
            "seed": self.spec.seed,
            "spacing": self.spacing,
            "scales": self.scales,
            "maps": self.maps.iter().map(|m| json!({
                "name": m.name,
                "file": format!("map-{}.json", m.name),
                "target": format!("target-{}.json", m.name),
                "density": m.density,
            })).collect::<Vec<_>>(),
        })
    }

    /// Writes `space.json`, `atlas.json`, `manifest.json`, and one target and
    /// one map file per reference map into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        let dump = |name: &str, v: &Value| -> std::io::Result<()> {
            let text = serde_json::to_string_pretty(v).map_err(std::io::Error::other)?;
            fs::write(dir.join(name), text + "\n")
        };
        dump("space.json", &serde_json::to_value(self.space.to_spec()).map_err(std::io::Error::other)?)?;
        dump("atlas.json", &serde_json::to_value(self.atlas.to_spec()).map_err(std::io::Error::other)?)?;
        for m in &self.maps {
            let target = format!("target-{}.json", m.name);
            dump(&target, &serde_json::to_value(m.target.to_spec()).map_err(std::io::Error::other)?)?;
            let values: Vec<Value> = m.values.iter().map(|v| m.target.point_to_json(v)).collect();
            dump(
                &format!("map-{}.json", m.name),
                &json!({"space": "space.json", "target": target, "values": values}),
            )?;
        }
        dump("manifest.json", &self.manifest())
    }
}

/// Smooth perturbation of chart coordinates with a prescribed Lipschitz size.
#[derive(Debug, Clone, Copy)]
struct Wave {
    amplitude: f64,
    frequency: f64,
    phase: f64,
}

impl Wave {
    fn new(lipschitz: f64, rng: &mut ChaCha8Rng) -> Self {
        let frequency = TAU * rng.random_range(1..=3) as f64;
        Wave {
            amplitude: lipschitz / frequency,
            frequency,
            phase: TAU * rng.random::<f64>(),
        }
    }

    /// `x + a sin(ω x + θ)` in 1-d; a shear of the first coordinate along the
    /// last one otherwise.
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        let s = x[x.len() - 1];
        out[0] += self.amplitude * (self.frequency * s + self.phase).sin();
        out
    }
}

/// Lipschitz size of the perturbation for slack `eps`. In 1-d the
/// pushforward density varies by `(1+δ)/(1−δ)`, which must stay within
/// `1+ε`; a shear preserves volume and only needs `σ_max ≤ 1+ε`.
fn wave_size(dim: usize, eps: f64) -> f64 {
    if dim == 1 {
        0.9 * eps / (2.0 + eps)
    } else {
        0.9 * eps
    }
}

fn check_spec(spec: &FixtureSpec) -> Result<()> {
    if spec.resolution < 16 {
        return Err(Error::InvalidParameter(format!(
            "resolution must be at least 16, got {}",
            spec.resolution
        )));
    }
    if !(spec.epsilon >= 0.0 && spec.epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in [0, 1), got {}", spec.epsilon)));
    }
    let dim_ok = spec.family == FixtureFamily::TwoChartCurve || (1..=3).contains(&spec.dim);
    if !dim_ok {
        return Err(Error::InvalidParameter(format!("grid dimension must be 1..=3, got {}", spec.dim)));
    }
    Ok(())
}

/// Lattice points `k/(n−1)` (closed) or `k/n` (periodic), first axis slowest.
fn lattice(n: usize, dim: usize, periodic: bool) -> Vec<Vec<f64>> {
    let step = if periodic { 1.0 / n as f64 } else { 1.0 / (n - 1) as f64 };
    let total = n.pow(dim as u32);
    (0..total)
        .map(|mut k| {
            let mut p = vec![0.0; dim];
            for a in (0..dim).rev() {
                p[a] = (k % n) as f64 * step;
                k /= n;
            }
            p
        })
        .collect()
}

struct Base {
    space: PointCloudSpace,
    /// Members and unperturbed coordinates of each chart.
    charts: Vec<(Vec<usize>, Vec<Vec<f64>>)>,
    overlapping: Vec<(Vec<usize>, Vec<Vec<f64>>)>,
    /// Slack already used by the unperturbed charts.
    curvature: f64,
    spacing: f64,
    edge_distance: Vec<f64>,
    /// Intrinsic coordinates of every point, used by the reference maps.
    param: Vec<Vec<f64>>,
}

fn base(spec: &FixtureSpec) -> Result<Base> {
    let n = spec.resolution;
    match spec.family {
        FixtureFamily::EuclideanGrid => {
            let pts = lattice(n, spec.dim, false);
            let edge = pts
                .iter()
                .map(|p| p.iter().map(|&x| x.min(1.0 - x)).fold(f64::INFINITY, f64::min))
                .collect();
            let space = PointCloudSpace::euclidean(pts.clone(), None)?;
            Ok(Base {
                charts: vec![((0..pts.len()).collect(), pts.clone())],
                overlapping: Vec::new(),
                curvature: 1.0,
                spacing: 1.0 / (n - 1) as f64,
                edge_distance: edge,
                param: pts,
                space,
            })
        }
        FixtureFamily::FlatTorusGrid => {
            let pts = lattice(n, spec.dim, true);
            let space = PointCloudSpace::flat_torus(pts.clone(), vec![1.0; spec.dim], None)?;
            // one chart per block of the 2×…×2 subdivision
            let mut charts: Vec<(Vec<usize>, Vec<Vec<f64>>)> = vec![(Vec::new(), Vec::new()); 1 << spec.dim];
            for (i, p) in pts.iter().enumerate() {
                let block = p
                    .iter()
                    .enumerate()
                    .map(|(a, &x)| usize::from(x >= 0.5) << a)
                    .sum::<usize>();
                charts[block].0.push(i);
                charts[block].1.push(p.clone());
            }
            Ok(Base {
                charts,
                overlapping: Vec::new(),
                curvature: 1.0,
                spacing: 1.0 / n as f64,
                edge_distance: vec![f64::INFINITY; pts.len()],
                param: pts,
                space,
            })
        }
        FixtureFamily::TwoChartCurve => {
            let length = 2.0 * ARC_HALF_ANGLE;
            let s: Vec<f64> = (0..n).map(|k| length * k as f64 / (n - 1) as f64).collect();
            let pts: Vec<Vec<f64>> = s
                .iter()
                .map(|&t| {
                    let a = t - ARC_HALF_ANGLE;
                    vec![a.cos(), a.sin()]
                })
                .collect();
            let space = PointCloudSpace::euclidean(pts, None)?;
            let half = n / 2;
            let part = |range: std::ops::Range<usize>| (range.clone().collect(), range.map(|k| vec![s[k]]).collect());
            let cut = ((1.0 - CURVE_CHART_SPAN) * (n - 1) as f64).round() as usize;
            let reach = (CURVE_CHART_SPAN * (n - 1) as f64).round() as usize;
            // secant over chord on the widest overlapping chart
            let span = CURVE_CHART_SPAN * length;
            Ok(Base {
                charts: vec![part(0..half), part(half..n)],
                overlapping: vec![part(0..reach + 1), part(cut..n)],
                curvature: (0.5 * span) / (0.5 * span).sin(),
                spacing: length / (n - 1) as f64,
                edge_distance: s.iter().map(|&t| t.min(length - t)).collect(),
                param: s.iter().map(|&t| vec![t]).collect(),
                space,
            })
        }
    }
}

fn wave_budget(spec: &FixtureSpec, dim: usize, curvature: f64) -> Result<f64> {
    let eps = spec.epsilon;
    let mut delta = wave_size(dim, eps);
    if curvature > 1.0 {
        let room = (1.0 + eps) / curvature - 1.0;
        if room < 0.0 {
            return Err(Error::FixtureAudit(format!(
                "epsilon {eps} is below the chart slack {:.4} forced by the arc",
                curvature - 1.0
            )));
        }
        delta = delta.min(0.9 * room);
    }
    Ok(delta)
}

fn perturbed(members: &[usize], coords: &[Vec<f64>], delta: f64, eps: f64, rng: &mut ChaCha8Rng) -> Result<Chart> {
    let wave = Wave::new(delta, rng);
    let moved = coords.iter().map(|c| wave.apply(c)).collect();
    Chart::new(members.to_vec(), moved, eps)
}

fn audited_atlas(space: &PointCloudSpace, charts: Vec<Chart>, eps: f64) -> Result<Atlas> {
    for (k, c) in charts.iter().enumerate() {
        let a = chart_audit(space, c)?;
        if !a.passes {
            return Err(Error::FixtureAudit(format!(
                "chart {k} fails its audit at epsilon {eps}: slack {:.3e}, measure {:?}",
                a.slack, a.measure
            )));
        }
    }
    Atlas::new(charts, eps, space.len())
}

fn euclid_point(v: Vec<f64>) -> TargetPoint {
    TargetPoint::Euclidean(v)
}

fn reference_maps(spec: &FixtureSpec, b: &Base) -> Result<(Vec<ReferenceMap>, Option<Vec<f64>>)> {
    let n = b.space.len();
    let d = b.param[0].len();
    let sd = (d as f64 + 2.0).sqrt();
    let mut maps = Vec::new();
    let constant = |target: GeodesicTarget, p: TargetPoint| ReferenceMap {
        name: "constant".into(),
        values: vec![p; n],
        target,
        density: 0.0,
    };
    match spec.family {
        FixtureFamily::FlatTorusGrid => {
            // Clifford embedding: each circle coordinate goes to a circle of
            // circumference 1 in its own plane, so the differential is isometric
            let clifford = |scale: &[f64]| -> Vec<TargetPoint> {
                b.param
                    .iter()
                    .map(|p| {
                        euclid_point(
                            p.iter()
                                .zip(scale)
                                .flat_map(|(&x, &a)| {
                                    let t = TAU * x;
                                    [a * t.cos() / TAU, a * t.sin() / TAU]
                                })
                                .collect(),
                        )
                    })
                    .collect()
            };
            let target = GeodesicTarget::euclidean(2 * d);
            let ones = vec![1.0; d];
            maps.push(ReferenceMap {
                name: "identity".into(),
                values: clifford(&ones),
                target: target.clone(),
                density: (d as f64 / (d as f64 + 2.0)).sqrt(),
            });
            let slopes: Vec<f64> = (0..d).map(|k| 1.5 + 0.5 * k as f64).collect();
            maps.push(ReferenceMap {
                name: "linear".into(),
                values: clifford(&slopes),
                target: target.clone(),
                density: slopes.iter().map(|a| a * a).sum::<f64>().sqrt() / sd,
            });
            maps.push(constant(target, euclid_point(vec![0.0; 2 * d])));
            return Ok((maps, None));
        }
        FixtureFamily::EuclideanGrid | FixtureFamily::TwoChartCurve => {}
    }
    let line = GeodesicTarget::euclidean(1);
    let slope: Vec<f64> = (0..d).map(|k| if k == 0 { 2.0 } else { -1.0 / k as f64 }).collect();
    let norm = slope.iter().map(|a| a * a).sum::<f64>().sqrt();
    maps.push(ReferenceMap {
        name: "linear".into(),
        values: b
            .param
            .iter()
            .map(|p| euclid_point(vec![p.iter().zip(&slope).map(|(x, a)| x * a).sum()]))
            .collect(),
        target: line.clone(),
        density: norm / sd,
    });
    let ambient = b.space.ambient_dim().unwrap_or(d);
    let identity: Vec<TargetPoint> = (0..n)
        .map(|i| euclid_point(b.space.coords(i).expect("coordinates").to_vec()))
        .collect();
    maps.push(ReferenceMap {
        name: "identity".into(),
        values: identity,
        target: GeodesicTarget::euclidean(ambient),
        density: (d as f64 / (d as f64 + 2.0)).sqrt(),
    });
    // a fixed matrix with three output rows
    let rows: Vec<Vec<f64>> = (0..3)
        .map(|r| (0..d).map(|c| ((r * d + c) as f64 * 0.7).sin() + if r == c { 1.0 } else { 0.0 }).collect())
        .collect();
    let hs = rows.iter().flatten().map(|a| a * a).sum::<f64>().sqrt();
    maps.push(ReferenceMap {
        name: "matrix".into(),
        values: b
            .param
            .iter()
            .map(|p| euclid_point(rows.iter().map(|r| r.iter().zip(p).map(|(a, x)| a * x).sum()).collect()))
            .collect(),
        target: GeodesicTarget::euclidean(3),
        density: hs / sd,
    });
    maps.push(constant(line, euclid_point(vec![0.0])));

    // unit-speed maps into a tripod along the first intrinsic coordinate
    let tree = MetricTree::star(&[TRIPOD_LEG, TRIPOD_LEG, TRIPOD_LEG])?;
    let extent = b.param.iter().map(|p| p[0]).fold(0.0, f64::max);
    let mid = 0.5 * extent;
    let geodesic = b
        .param
        .iter()
        .map(|p| {
            let t = p[0] - mid;
            TargetPoint::Tree(if t < 0.0 { tree.point_on_edge(0, -t) } else { tree.point_on_edge(1, t) })
        })
        .collect();
    let fold = b
        .param
        .iter()
        .map(|p| TargetPoint::Tree(tree.point_on_edge(2, (p[0] - mid).abs())))
        .collect();
    let fold_distance = b.param.iter().map(|p| (p[0] - mid).abs()).collect();
    let tripod = GeodesicTarget::Tree(tree);
    maps.push(ReferenceMap {
        name: "tree-geodesic".into(),
        values: geodesic,
        target: tripod.clone(),
        density: 1.0 / sd,
    });
    maps.push(ReferenceMap {
        name: "tree-fold".into(),
        values: fold,
        target: tripod,
        density: 1.0 / sd,
    });
    Ok((maps, Some(fold_distance)))
}

fn scales(spec: &FixtureSpec, spacing: f64) -> Vec<f64> {
    let k: [f64; 3] = match (spec.family, spec.dim) {
        (FixtureFamily::TwoChartCurve, _) | (_, 1) => [20.5, 16.5, 12.5],
        (_, 2) => [12.5, 10.5, 8.5],
        _ => [6.5, 5.5, 4.5],
    };
    k.iter().map(|m| m * spacing).collect()
}

/// Builds and audits a fixture. Every chart passes its audit at the
/// declared epsilon; generation fails otherwise.
pub fn make_fixture(spec: &FixtureSpec) -> Result<Fixture> {
    check_spec(spec)?;
    let b = base(spec)?;
    let dim = b.charts[0].1[0].len();
    let delta = wave_budget(spec, dim, b.curvature)?;
    let mut rng = seeded(spec.seed);
    let charts = b
        .charts
        .iter()
        .map(|(m, c)| perturbed(m, c, delta, spec.epsilon, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let atlas = audited_atlas(&b.space, charts, spec.epsilon)?;
    let overlapping = b
        .overlapping
        .iter()
        .map(|(m, c)| perturbed(m, c, delta, spec.epsilon, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    for c in &overlapping {
        if !chart_audit(&b.space, c)?.passes {
            return Err(Error::FixtureAudit("overlapping chart fails its audit".into()));
        }
    }
    if overlapping.len() == 2 {
        let defect = alignment_defect(&b.space, &overlapping[0], &overlapping[1])?;
        if defect > 2.0 * spec.epsilon + 1e-12 {
            return Err(Error::FixtureAudit(format!(
                "overlapping charts have alignment defect {defect:.3e} > 2ε"
            )));
        }
    }
    let (maps, fold_distance) = reference_maps(spec, &b)?;
    Ok(Fixture {
        spec: spec.clone(),
        scales: scales(spec, b.spacing),
        spacing: b.spacing,
        space: b.space,
        atlas,
        overlapping,
        maps,
        edge_distance: b.edge_distance,
        fold_distance,
    })
}

/// Atlases on the fixture's space, the `n`-th perturbed with Lipschitz
/// size set by `eps_list[n]`. Every chart is audited at its epsilon and
/// every pair of atlases at `ε_n + ε_m`.
pub fn make_aligned_family(spec: &FixtureSpec, eps_list: &[f64]) -> Result<Vec<Atlas>> {
    check_spec(spec)?;
    if eps_list.is_empty() {
        return Err(Error::InvalidParameter("epsilon list is empty".into()));
    }
    if eps_list.iter().any(|&e| !(e > 0.0 && e < 1.0)) || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter(
            "epsilon list must be positive and strictly decreasing".into(),
        ));
    }
    let b = base(spec)?;
    let dim = b.charts[0].1[0].len();
    let mut atlases = Vec::with_capacity(eps_list.len());
    for (k, &eps) in eps_list.iter().enumerate() {
        let local = FixtureSpec {
            epsilon: eps,
            ..spec.clone()
        };
        let delta = wave_budget(&local, dim, b.curvature)?;
        let mut rng = seeded(spec.seed ^ (k as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let charts = b
            .charts
            .iter()
            .map(|(m, c)| perturbed(m, c, delta, eps, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        atlases.push(audited_atlas(&b.space, charts, eps)?);
    }
    for a in 0..atlases.len() {
        for c in (a + 1)..atlases.len() {
            let bound = eps_list[a] + eps_list[c];
            for (x, y) in atlases[a].charts().iter().zip(atlases[c].charts()) {
                let defect = alignment_defect(&b.space, x, y)?;
                if defect > bound + 1e-12 {
                    return Err(Error::FixtureAudit(format!(
                        "atlases {a} and {c} have alignment defect {defect:.3e} > {bound}"
                    )));
                }
            }
        }
    }
    Ok(atlases)
}
