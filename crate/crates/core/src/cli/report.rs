use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{Failure, RunConfig};

pub const SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

/// One invariant: measured value against its tolerance.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub status: Status,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    /// Passes when value ≤ tolerance.
    pub fn at_most(value: f64, tolerance: f64) -> Self {
        Check {
            status: if value <= tolerance { Status::Pass } else { Status::Fail },
            value,
            tolerance,
        }
    }

    /// Boolean property; value 1 when it holds.
    pub fn holds(ok: bool) -> Self {
        Check {
            status: if ok { Status::Pass } else { Status::Fail },
            value: if ok { 1.0 } else { 0.0 },
            tolerance: 0.0,
        }
    }
}

pub type Checks = BTreeMap<String, Check>;

pub fn all_pass(c: &Checks) -> bool {
    c.values().all(|c| c.status == Status::Pass)
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: u32,
    command: &'a str,
    config: BTreeMap<&'a str, &'a str>,
    #[serde(flatten)]
    body: &'a T,
}

pub fn out_path(cfg: &RunConfig, name: &str) -> Result<PathBuf, Failure> {
    fs::create_dir_all(&cfg.out).map_err(|e| Failure::Io(format!("{}: {e}", cfg.out.display())))?;
    Ok(cfg.out.join(name))
}

pub fn write_json<T: Serialize>(cfg: &RunConfig, name: &str, body: &T) -> Result<PathBuf, Failure> {
    let path = out_path(cfg, name)?;
    let env = Envelope {
        schema: SCHEMA,
        command: cfg.command.name(),
        config: cfg
            .resolved
            .iter()
            .filter(|(k, _)| k != "out" && k != "cache")
            .map(|(k, v)| (k.as_str(), v.as_str()))
            .collect(),
        body,
    };
    let mut text = serde_json::to_string_pretty(&env).expect("report serializes");
    text.push('\n');
    write_file(&path, text.as_bytes())?;
    Ok(path)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let mut f = fs::File::create(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    f.write_all(bytes).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

/// Render with a writer closure into memory, then write the file.
pub fn write_with(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<(), Failure> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    write_file(path, &buf)
}
