//! File loading, output writing and the exit-code contract.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use ks_core::chart::{Atlas, AtlasSpec};
use ks_core::space::{build_space, PointCloudSpace, SpaceSpec};
use ks_core::target::{GeodesicTarget, TargetSpec};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

/// A command failure mapped onto the exit codes 1 (I/O), 2 (validation or
/// audit) and 3 (non-convergence).
#[derive(Debug)]
pub enum Failure {
    Io(String),
    Invalid(String),
    NotConverged(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Io(_) => 1,
            Failure::Invalid(_) => 2,
            Failure::NotConverged(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Io(m) => write!(f, "i/o error: {m}"),
            Failure::Invalid(m) => write!(f, "{m}"),
            Failure::NotConverged(m) => write!(f, "not converged: {m}"),
        }
    }
}

impl From<ks_core::Error> for Failure {
    fn from(e: ks_core::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

pub type CliResult<T> = Result<T, Failure>;

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

/// Checks that every input exists before any work is done.
pub fn require_files(paths: &[&Path]) -> CliResult<()> {
    for p in paths {
        if !p.is_file() {
            return Err(Failure::Io(format!("{}: no such file", p.display())));
        }
    }
    Ok(())
}

/// Either an inline JSON object or a path relative to `base`.
pub fn resolve<T: DeserializeOwned>(v: &Value, base: &Path, what: &str) -> CliResult<T> {
    match v {
        Value::String(p) => read_json(&base.join(p)),
        Value::Object(_) => {
            serde_json::from_value(v.clone()).map_err(|e| Failure::Invalid(format!("{what}: {e}")))
        }
        _ => Err(Failure::Invalid(format!("{what}: expected a path or an object"))),
    }
}

pub fn load_space(path: &Path) -> CliResult<PointCloudSpace> {
    let spec: SpaceSpec = read_json(path)?;
    Ok(build_space(&spec)?)
}

pub fn load_target(path: &Path) -> CliResult<GeodesicTarget> {
    let spec: TargetSpec = read_json(path)?;
    Ok(GeodesicTarget::from_spec(&spec)?)
}

pub fn load_atlas(path: &Path, n_points: usize) -> CliResult<Atlas> {
    let spec: AtlasSpec = read_json(path)?;
    Ok(Atlas::from_spec(&spec, n_points)?)
}

/// Map file contents: the values plus the space and target files it names,
/// resolved against the map's directory.
pub struct MapFile {
    pub values: Vec<Value>,
    pub space: Option<PathBuf>,
    pub target: Option<PathBuf>,
}

/// Accepts `{"space", "target", "values"}` or a bare array of values.
pub fn load_map(path: &Path) -> CliResult<MapFile> {
    let v: Value = read_json(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    match v {
        Value::Array(values) => Ok(MapFile {
            values,
            space: None,
            target: None,
        }),
        Value::Object(mut obj) => {
            if let Some(k) = obj.keys().find(|k| !["space", "target", "values"].contains(&k.as_str())) {
                return Err(Failure::Invalid(format!("{}: unknown key '{k}'", path.display())));
            }
            let named = |key: &str, obj: &serde_json::Map<String, Value>| -> CliResult<Option<PathBuf>> {
                match obj.get(key) {
                    None => Ok(None),
                    Some(Value::String(s)) => Ok(Some(base.join(s))),
                    Some(_) => Err(Failure::Invalid(format!(
                        "{}: '{key}' must be a file name",
                        path.display()
                    ))),
                }
            };
            let space = named("space", &obj)?;
            let target = named("target", &obj)?;
            let Some(Value::Array(values)) = obj.remove("values") else {
                return Err(Failure::Invalid(format!("{}: missing 'values' array", path.display())));
            };
            Ok(MapFile { values, space, target })
        }
        _ => Err(Failure::Invalid(format!("{}: expected an object or an array", path.display()))),
    }
}

/// A flag value, or else the file named by the map, or else an error.
pub fn pick(flag: Option<&PathBuf>, named: Option<PathBuf>, what: &str) -> CliResult<PathBuf> {
    flag.cloned()
        .or(named)
        .ok_or_else(|| Failure::Invalid(format!("no {what} file: pass --{what} or name it in the map file")))
}

/// Index list from a JSON array or `{"indices": [...]}`.
pub fn load_indices(path: &Path) -> CliResult<Vec<usize>> {
    let v: Value = read_json(path)?;
    let list = match &v {
        Value::Array(a) => a,
        Value::Object(o) if o.len() == 1 && o.contains_key("indices") => match &o["indices"] {
            Value::Array(a) => a,
            _ => return Err(Failure::Invalid(format!("{}: 'indices' must be an array", path.display()))),
        },
        _ => return Err(Failure::Invalid(format!("{}: expected an index array", path.display()))),
    };
    list.iter()
        .map(|x| {
            x.as_u64()
                .map(|i| i as usize)
                .ok_or_else(|| Failure::Invalid(format!("{}: bad index {x}", path.display())))
        })
        .collect()
}

pub fn to_pretty<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Failure::Invalid(e.to_string()))
}

/// Output sink: files go to `--out` when given; the primary report always
/// goes to stdout.
pub struct Output {
    dir: Option<PathBuf>,
}

impl Output {
    /// Creates the output directory up front so path errors surface before compute.
    pub fn new(dir: Option<&PathBuf>) -> CliResult<Self> {
        if let Some(d) = dir {
            fs::create_dir_all(d).map_err(|e| Failure::Io(format!("{}: {e}", d.display())))?;
        }
        Ok(Output { dir: dir.cloned() })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn file(&self, name: &str, contents: &str) -> CliResult<()> {
        if let Some(d) = &self.dir {
            let p = d.join(name);
            fs::write(&p, contents).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?;
        }
        Ok(())
    }
}

/// Renders rows as CSV with the given header.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Failure::Invalid(e.to_string());
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(&r).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Failure::Invalid(e.to_string()))
}
