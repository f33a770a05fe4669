//! Subcommand implementations. Each loads and validates its inputs, computes,
//! writes its files and returns the report printed on stdout.

use std::path::{Path, PathBuf};

use ks_core::chart::fit_metric_differential;
use ks_core::dirichlet::{BoundaryValue, DirichletProblem, RelaxMode, SolverOptions};
use ks_core::energy::{default_scales, energy_sweep, mask_from_indices};
use ks_core::map::MetricMap;
use ks_core::seminorm::{identity_audit, size_p, Family, Quadrature};
use ks_core::space::{density_theta, doubling_constant, radius_grid, DoublingOptions, MetricKind, SpaceSpec};
use ks_core::synth::{make_fixture, FixtureFamily, FixtureSpec};
use ks_core::target::{cat0_audit, GeodesicTarget, TargetSpec};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::io::*;
use crate::Format;

/// Largest allowed CAT(0) violation.
pub const CAT0_TOL: f64 = 1e-9;
/// Largest allowed relative gap in the seminorm identities.
pub const IDENTITY_TOL: f64 = 1e-3;
/// Default doubling scan radius, in median spacings.
pub const DOUBLING_RADIUS_SPACINGS: f64 = 40.0;
/// Relative tolerance deciding that a ball at the largest scale is full.
const FULL_BALL_TOL: f64 = 1e-9;

/// What a command prints: a JSON report, or a CSV table under `--format csv`.
pub struct Report {
    pub json: Value,
    pub csv: Option<String>,
}

impl Report {
    pub fn render(&self, format: Format) -> CliResult<String> {
        match (format, &self.csv) {
            (Format::Csv, Some(t)) => Ok(t.clone()),
            _ => to_pretty(&self.json),
        }
    }
}

/// The report plus the exit status decided by the audits.
pub type Outcome = (Report, Option<Failure>);

fn num(x: f64) -> String {
    format!("{x}")
}

pub fn space_check(
    space_path: &Path,
    radius: Option<f64>,
    point: usize,
    dim: Option<usize>,
    out: &Output,
) -> CliResult<Outcome> {
    require_files(&[space_path])?;
    let spec: SpaceSpec = read_json(space_path)?;
    // building runs the triangle audit
    let space = ks_core::space::build_space(&spec)?;
    if point >= space.len() {
        return Err(Failure::Invalid(format!(
            "--point {point} out of range for {} points",
            space.len()
        )));
    }
    let big_r = radius.unwrap_or(DOUBLING_RADIUS_SPACINGS * space.median_spacing());
    let doubling = doubling_constant(&space, big_r, &DoublingOptions::default())?;
    let dim = dim.or(space.ambient_dim());
    let theta = match dim {
        Some(d) => {
            let radii = radius_grid(doubling.r_min, big_r);
            let theta = density_theta(&space, point, d, &radii)?;
            json!({"point": point, "dim": d, "radii": radii, "theta": theta})
        }
        None => Value::Null,
    };
    let kind = match space.kind() {
        MetricKind::Euclidean => "euclidean",
        MetricKind::FlatTorus { .. } => "flat-torus",
        MetricKind::Matrix => "matrix",
    };
    let report = json!({
        "points": space.len(),
        "kind": kind,
        "ambient_dim": space.ambient_dim(),
        "total_mass": space.total_mass(),
        "min_spacing": space.min_spacing(),
        "median_spacing": space.median_spacing(),
        "triangle_audit": "passed",
        "doubling": {"radius": big_r, "estimate": doubling},
        "density_theta": theta,
    });
    out.file("space-check.json", &to_pretty(&report)?)?;
    Ok((Report { json: report, csv: None }, None))
}

pub struct EnergyArgs<'a> {
    pub space: Option<&'a PathBuf>,
    pub map: &'a Path,
    pub target: Option<&'a PathBuf>,
    pub p: f64,
    pub scales: Option<Vec<f64>>,
    pub omega: Option<&'a PathBuf>,
}

pub fn energy(a: EnergyArgs<'_>, out: &Output) -> CliResult<Outcome> {
    require_files(&[a.map])?;
    let file = load_map(a.map)?;
    let space_path = pick(a.space, file.space, "space")?;
    let target_path = pick(a.target, file.target, "target")?;
    let mut inputs = vec![space_path.as_path(), target_path.as_path()];
    if let Some(o) = a.omega {
        inputs.push(o);
    }
    require_files(&inputs)?;
    let space = load_space(&space_path)?;
    let target = load_target(&target_path)?;
    let u = MetricMap::from_json(&space, &target, &file.values)?;
    let omega = match a.omega {
        Some(p) => Some(mask_from_indices(space.len(), &load_indices(p)?)?),
        None => None,
    };
    let scales = a.scales.unwrap_or_else(|| default_scales(&space));
    let rep = energy_sweep(&u, a.p, &scales, omega.as_deref())?;
    for (r, ok) in rep.scales.iter().zip(&rep.reliable) {
        if !ok {
            eprintln!(
                "warning: scale {r} is below the reliability threshold {} and is excluded from extrapolation",
                rep.threshold
            );
        }
    }

    // Points whose largest ball is full (and inside omega) summarize the interior.
    let r_max = rep.scales[0];
    let masses: Vec<f64> = (0..space.len()).map(|i| space.ball_mass(i, r_max)).collect();
    let full = masses.iter().cloned().fold(0.0, f64::max);
    let mut interior: Vec<f64> = (0..space.len())
        .filter(|&i| masses[i] >= full * (1.0 - FULL_BALL_TOL))
        .filter(|&i| match &omega {
            Some(m) => space.neighbors(i, r_max).iter().all(|&(j, _)| m[j]),
            None => true,
        })
        .map(|i| rep.extrapolated_density[i])
        .collect();
    interior.sort_by(f64::total_cmp);
    let summary = if interior.is_empty() {
        Value::Null
    } else {
        let k = interior.len();
        let median = if k % 2 == 1 {
            interior[k / 2]
        } else {
            0.5 * (interior[k / 2 - 1] + interior[k / 2])
        };
        json!({
            "points": k,
            "median_density": median,
            "mean_density": interior.iter().sum::<f64>() / k as f64,
            "min_density": interior[0],
            "max_density": interior[k - 1],
        })
    };
    let report = json!({
        "p": rep.p,
        "scales": rep.scales,
        "reliable": rep.reliable,
        "threshold": rep.threshold,
        "per_scale_total": rep.per_scale_total,
        "selected_scale": rep.selected_scale,
        "extrapolated_total": rep.extrapolated_total,
        "interior": summary,
    });
    let sweep = csv_table(
        &["scale", "total", "reliable"],
        rep.scales
            .iter()
            .zip(&rep.per_scale_total)
            .zip(&rep.reliable)
            .map(|((r, t), ok)| vec![num(*r), num(*t), ok.to_string()]),
    )?;
    let density = csv_table(
        &["index", "density"],
        rep.extrapolated_density
            .iter()
            .enumerate()
            .map(|(i, d)| vec![i.to_string(), num(*d)]),
    )?;
    out.file("summary.json", &to_pretty(&report)?)?;
    out.file("sweep.csv", &sweep)?;
    out.file("density.csv", &density)?;
    Ok((Report { json: report, csv: Some(sweep) }, None))
}

pub struct MdiffArgs<'a> {
    pub space: Option<&'a PathBuf>,
    pub map: &'a Path,
    pub target: Option<&'a PathBuf>,
    pub atlas: &'a Path,
    pub points: Option<Vec<usize>>,
    pub family: Family,
    pub radii: Option<Vec<f64>>,
    pub p: f64,
    pub quadrature: Quadrature,
}

pub fn mdiff(a: MdiffArgs<'_>, out: &Output) -> CliResult<Outcome> {
    require_files(&[a.map, a.atlas])?;
    let file = load_map(a.map)?;
    let space_path = pick(a.space, file.space, "space")?;
    let target_path = pick(a.target, file.target, "target")?;
    require_files(&[space_path.as_path(), target_path.as_path()])?;
    let space = load_space(&space_path)?;
    let target = load_target(&target_path)?;
    let atlas = load_atlas(a.atlas, space.len())?;
    let u = MetricMap::from_json(&space, &target, &file.values)?;
    if !(a.p > 1.0 && a.p.is_finite()) {
        return Err(Failure::Invalid(format!("p must lie in (1, ∞), got {}", a.p)));
    }
    let points = a.points.unwrap_or_else(|| (0..space.len()).collect());
    if let Some(&bad) = points.iter().find(|&&i| i >= space.len()) {
        return Err(Failure::Invalid(format!("point {bad} out of range for {} points", space.len())));
    }
    let radii: Vec<Option<f64>> = match a.radii {
        Some(r) => r.into_iter().map(Some).collect(),
        None => vec![None],
    };

    use rayon::prelude::*;
    let jobs: Vec<(usize, Option<f64>)> = points
        .iter()
        .flat_map(|&i| radii.iter().map(move |&r| (i, r)))
        .collect();
    let records: Vec<Value> = jobs
        .par_iter()
        .map(|&(i, r)| {
            let Some(chart) = atlas.chart_of(i) else {
                return json!({"index": i, "radius": r, "error": format!("point {i} is in no chart")});
            };
            let fit = match fit_metric_differential(chart, &u, i, r, a.family) {
                Ok(f) => f,
                Err(e) => return json!({"index": i, "radius": r, "error": e.to_string()}),
            };
            match size_p(&fit.seminorm, a.p, a.quadrature) {
                Ok(s) => json!({
                    "index": i,
                    "radius": fit.radius,
                    "neighbors": fit.neighbors,
                    "residual": fit.residual,
                    "seminorm": fit.seminorm.to_spec(),
                    "density": s.value,
                    "quadrature_error": s.rel_error,
                }),
                Err(e) => json!({"index": i, "radius": fit.radius, "error": e.to_string()}),
            }
        })
        .collect();
    let failed = records.iter().filter(|r| r.get("error").is_some()).count();
    for r in records.iter().filter(|r| r.get("error").is_some()) {
        eprintln!("warning: point {}: {}", r["index"], r["error"].as_str().unwrap_or(""));
    }

    // residual decay table for radius sweeps
    let sweep: Vec<Value> = match &radii[..] {
        [None] => Vec::new(),
        _ => radii
            .iter()
            .map(|r| {
                let mut res: Vec<f64> = records
                    .iter()
                    .filter(|x| x.get("error").is_none() && x["radius"].as_f64() == *r)
                    .filter_map(|x| x["residual"].as_f64())
                    .collect();
                res.sort_by(f64::total_cmp);
                let median = res.get(res.len() / 2).copied();
                json!({"radius": r, "fits": res.len(), "median_residual": median, "max_residual": res.last()})
            })
            .collect(),
    };
    let report = json!({
        "family": a.family,
        "p": a.p,
        "points": points.len(),
        "failed": failed,
        "radius_sweep": sweep,
        "fits": records,
    });
    let table = csv_table(
        &["index", "radius", "density", "residual"],
        records.iter().map(|r| {
            let field = |k: &str| r.get(k).and_then(Value::as_f64).map(num).unwrap_or_default();
            vec![r["index"].to_string(), field("radius"), field("density"), field("residual")]
        }),
    )?;
    out.file("fits.json", &to_pretty(&report)?)?;
    out.file("fits.csv", &table)?;
    Ok((Report { json: report, csv: Some(table) }, None))
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    mode: Option<RelaxMode>,
    tol: Option<f64>,
    max_sweeps: Option<usize>,
    seed: Option<u64>,
    audit_uniqueness: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    space: Value,
    target: Value,
    interior: Vec<usize>,
    boundary: Vec<BoundaryValue>,
    scale: f64,
    #[serde(default)]
    solver: SolverSection,
}

pub struct DirichletArgs<'a> {
    pub problem: &'a Path,
    pub mode: Option<RelaxMode>,
    pub tol: Option<f64>,
    pub max_sweeps: Option<usize>,
    pub seed: Option<u64>,
}

pub fn dirichlet(a: DirichletArgs<'_>, out: &Output) -> CliResult<Outcome> {
    require_files(&[a.problem])?;
    let file: ProblemFile = read_json(a.problem)?;
    let base = a.problem.parent().unwrap_or(Path::new("."));
    let space_spec: SpaceSpec = resolve(&file.space, base, "space")?;
    let target_spec: TargetSpec = resolve(&file.target, base, "target")?;
    let space = ks_core::space::build_space(&space_spec)?;
    let target = GeodesicTarget::from_spec(&target_spec)?;
    let problem = DirichletProblem::from_json(&space, &target, &file.interior, &file.boundary, file.scale)?;

    let mut opts = SolverOptions::for_target(&target);
    let s = &file.solver;
    opts.mode = a.mode.or(s.mode).unwrap_or(opts.mode);
    opts.tol = a.tol.or(s.tol).unwrap_or(opts.tol);
    opts.max_sweeps = a.max_sweeps.or(s.max_sweeps).unwrap_or(opts.max_sweeps);
    opts.seed = a.seed.or(s.seed).unwrap_or(opts.seed);
    opts.audit_uniqueness = s.audit_uniqueness.unwrap_or(opts.audit_uniqueness);
    if !(opts.tol > 0.0 && opts.tol.is_finite()) {
        return Err(Failure::Invalid(format!("tol must be positive, got {}", opts.tol)));
    }

    let (solution, rep) = problem.solve(None, &opts)?;
    let values: Vec<Value> = solution
        .iter()
        .map(|v| v.as_ref().map_or(Value::Null, |p| target.point_to_json(p)))
        .collect();
    let report = json!({
        "points": space.len(),
        "interior": problem.interior().len(),
        "boundary_layer": problem.boundary_layer().len(),
        "scale": problem.scale(),
        "mode": opts.mode,
        "tol": opts.tol,
        "max_sweeps": opts.max_sweeps,
        "seed": opts.seed,
        "solve": rep,
    });
    let trajectory = csv_table(
        &["sweep", "energy"],
        rep.energy_trajectory
            .iter()
            .enumerate()
            .map(|(k, e)| vec![k.to_string(), num(*e)]),
    )?;
    out.file("solution.json", &to_pretty(&json!({ "values": values }))?)?;
    out.file("report.json", &to_pretty(&report)?)?;
    out.file("trajectory.csv", &trajectory)?;

    let status = if !rep.converged {
        Some(Failure::NotConverged(format!(
            "{} sweeps, error estimate {:e} above tol {:e}",
            rep.iterations, rep.error_estimate, opts.tol
        )))
    } else if rep.unique == Some(false) {
        Some(Failure::Invalid(format!(
            "uniqueness audit failed: second start differs by {:e}",
            rep.uniqueness_gap.unwrap_or(f64::NAN)
        )))
    } else {
        None
    };
    Ok((Report { json: report, csv: Some(trajectory) }, status))
}

pub fn verify_cat0(target_path: &Path, samples: usize, seed: u64, out: &Output) -> CliResult<Outcome> {
    require_files(&[target_path])?;
    let target = load_target(target_path)?;
    let rep = cat0_audit(&target, samples, seed)?;
    let worst = rep.max_violation();
    let pass = worst <= CAT0_TOL;
    let report = json!({
        "check": "cat0",
        "target": target.kind_name(),
        "seed": seed,
        "tolerance": CAT0_TOL,
        "audit": rep,
        "max_violation": worst,
        "pass": pass,
    });
    out.file("verify.json", &to_pretty(&report)?)?;
    let status = (!pass).then(|| Failure::Invalid(format!("CAT(0) violation {worst:e} exceeds {CAT0_TOL:e}")));
    Ok((Report { json: report, csv: None }, status))
}

pub fn verify_identities(dims: &[usize], forms: usize, seed: u64, out: &Output) -> CliResult<Outcome> {
    let rows = identity_audit(dims, forms, seed, Quadrature::default())?;
    let worst = rows
        .iter()
        .map(|r| r.hs_rel_error.max(r.op_rel_error))
        .fold(0.0, f64::max);
    let pass = worst <= IDENTITY_TOL;
    let report = json!({
        "check": "seminorm-identities",
        "seed": seed,
        "tolerance": IDENTITY_TOL,
        "rows": rows,
        "max_rel_error": worst,
        "pass": pass,
    });
    let table = csv_table(
        &["dim", "hs_rel_error", "op_rel_error"],
        rows.iter()
            .map(|r| vec![r.dim.to_string(), num(r.hs_rel_error), num(r.op_rel_error)]),
    )?;
    out.file("verify.json", &to_pretty(&report)?)?;
    let status = (!pass).then(|| Failure::Invalid(format!("identity gap {worst:e} exceeds {IDENTITY_TOL:e}")));
    Ok((Report { json: report, csv: Some(table) }, status))
}

pub fn synth(spec: FixtureSpec, out: &Output) -> CliResult<Outcome> {
    let dir = out
        .dir()
        .ok_or_else(|| Failure::Invalid("synth needs --out".into()))?
        .to_path_buf();
    let fx = make_fixture(&spec)?;
    fx.write(&dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    Ok((Report { json: fx.manifest(), csv: None }, None))
}

pub fn parse_family(s: &str) -> CliResult<FixtureFamily> {
    Ok(s.parse()?)
}
