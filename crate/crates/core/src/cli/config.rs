//! Run configuration: the defaults table, the key=value file format and the
//! merge with command-line flags (flags win).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use speclab::cache::{PhiCache, CACHE_ENV};

use super::UsageError;

pub struct Setting {
    pub key: &'static str,
    pub default: &'static str,
    pub doc: &'static str,
}

/// Every default lives here. Keys double as config-file keys and as long
/// flags (`--key`). An empty default means "unset".
pub const SETTINGS: &[Setting] = &[
    Setting { key: "a0", default: "", doc: "boundary point a0 > 0 (u0 = ln a0); `structure` takes a comma list" },
    Setting { key: "n", default: "128", doc: "base Nystrom node count" },
    Setting { key: "emax", default: "20", doc: "upper end of energy ranges" },
    Setting { key: "esteps", default: "200", doc: "intervals of the energy grid on [0, emax]" },
    Setting { key: "umin", default: "-3", doc: "lower end of the u range" },
    Setting { key: "umax", default: "0.7", doc: "upper end of the u range" },
    Setting { key: "usteps", default: "370", doc: "intervals of the u grid" },
    Setting { key: "energy", default: "1", doc: "energy of the emitted scattering trajectory" },
    Setting { key: "out", default: "out", doc: "output directory" },
    Setting { key: "cache", default: "", doc: "phi cache root (empty: no cache; SPECLAB_CACHE overrides the config file)" },
    Setting { key: "tol-chi", default: "1e-10", doc: "|chi(s)chi(1-s) - 1|" },
    Setting { key: "tol-free", default: "1e-8", doc: "free system: rotation solutions and m = i" },
    Setting { key: "tol-logdet", default: "1e-7", doc: "log det(1+C) + log det(1-C) vs Dirichlet route" },
    Setting { key: "tol-mu", default: "1e-6", doc: "mu: resolvent vs finite difference, relative" },
    Setting { key: "tol-propagation", default: "1e-5", doc: "[A;B] propagated vs direct, relative" },
    Setting { key: "tol-wronskian", default: "1e-6", doc: "AK - BJ = i gamma(1-s), relative" },
    Setting { key: "tol-w1", default: "1e-6", doc: "Im(-J conj K) = 1 and density = Im m/pi" },
    Setting { key: "tol-inner", default: "1e-9", doc: "evaluator inner product symmetry" },
    Setting { key: "tol-norm", default: "1e-5", doc: "bound-state norm: formula vs evaluator and trajectory" },
    Setting { key: "tol-orthogonality", default: "1e-3", doc: "bound-state eigenvector overlaps" },
    Setting { key: "tol-parseval", default: "1e-2", doc: "expansion round trips" },
    Setting { key: "tol-plancherel", default: "1e-2", doc: "scattering Plancherel" },
    Setting { key: "tol-density", default: "0.2", doc: "half-width of the N(T)/rvm_count(T) band around 1" },
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Potential,
    Structure,
    BoundStates,
    Scattering,
    Expansion,
    Verify,
}

impl Command {
    pub const ALL: [(&'static str, Command); 6] = [
        ("potential", Command::Potential),
        ("structure", Command::Structure),
        ("bound-states", Command::BoundStates),
        ("scattering", Command::Scattering),
        ("expansion", Command::Expansion),
        ("verify", Command::Verify),
    ];

    pub fn name(self) -> &'static str {
        Self::ALL.iter().find(|(_, c)| *c == self).unwrap().0
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub a0: Vec<f64>,
    pub n: usize,
    pub emax: f64,
    pub esteps: usize,
    pub umin: f64,
    pub umax: f64,
    pub usteps: usize,
    pub energy: f64,
    pub out: PathBuf,
    pub cache: Option<PathBuf>,
    pub tol: BTreeMap<String, f64>,
    /// resolved key → value, in table order, for report headers
    pub resolved: Vec<(String, String)>,
}

impl RunConfig {
    pub fn tol(&self, name: &str) -> f64 {
        self.tol[name]
    }

    /// The single a0 of commands other than `structure`.
    pub fn a0(&self) -> Result<f64, UsageError> {
        match self.a0.as_slice() {
            [] => Err(UsageError::new("a0", "missing required field")),
            [a] => Ok(*a),
            _ => Err(UsageError::new("a0", "expected a single value")),
        }
    }

    pub fn phi_cache(&self) -> Option<PhiCache> {
        self.cache.clone().map(PhiCache::new)
    }
}

/// Parse a flat key=value file: `#` comments, blank lines ignored.
pub fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>, UsageError> {
    let text = std::fs::read_to_string(path).map_err(|e| UsageError::new("config", format!("{}: {e}", path.display())))?;
    parse_config_text(&text)
}

pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, UsageError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(UsageError::new("config", format!("line {}: expected key=value", i + 1)));
        };
        let k = k.trim();
        if !SETTINGS.iter().any(|s| s.key == k) {
            return Err(UsageError::new("config", format!("line {}: unknown key `{k}`", i + 1)));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn field(key: &str) -> &'static str {
    SETTINGS.iter().find(|s| s.key == key).unwrap().key
}

fn real(key: &str, v: &str) -> Result<f64, UsageError> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| UsageError::new(field(key), format!("expected a finite number, got `{v}`")))
}

fn count(key: &str, v: &str) -> Result<usize, UsageError> {
    v.parse::<usize>()
        .ok()
        .filter(|&x| x > 0)
        .ok_or_else(|| UsageError::new(field(key), format!("expected a positive integer, got `{v}`")))
}

/// Precedence: flag, then (for `cache`) the environment, then the config
/// file, then the defaults table.
pub fn resolve(
    command: Command,
    flags: &BTreeMap<String, String>,
    file: &BTreeMap<String, String>,
    env_cache: Option<String>,
) -> Result<RunConfig, UsageError> {
    let mut resolved = Vec::new();
    for s in SETTINGS {
        let v = if let Some(v) = flags.get(s.key) {
            v.clone()
        } else if let (Some(e), "cache") = (&env_cache, s.key) {
            e.clone()
        } else if let Some(v) = file.get(s.key) {
            v.clone()
        } else {
            s.default.to_string()
        };
        resolved.push((s.key.to_string(), v));
    }
    let get = |k: &str| resolved.iter().find(|(key, _)| key == k).unwrap().1.as_str();

    let a0 = if get("a0").is_empty() {
        vec![]
    } else {
        get("a0")
            .split(',')
            .map(|t| {
                let a = real("a0", t.trim())?;
                if a > 0.0 && a <= 6.0 {
                    Ok(a)
                } else {
                    Err(UsageError::new("a0", format!("must lie in (0, 6], got {a}")))
                }
            })
            .collect::<Result<Vec<_>, _>>()?
    };
    let n = count("n", get("n"))?;
    if n < 8 {
        return Err(UsageError::new("n", format!("must be at least 8, got {n}")));
    }
    let emax = real("emax", get("emax"))?;
    if emax <= 0.0 {
        return Err(UsageError::new("emax", "range [0, emax] is empty"));
    }
    let umin = real("umin", get("umin"))?;
    let umax = real("umax", get("umax"))?;
    if umin >= umax {
        return Err(UsageError::new("umin", format!("range [{umin}, {umax}] is empty")));
    }
    if umax > 6f64.ln() {
        return Err(UsageError::new("umax", format!("must not exceed ln 6, got {umax}")));
    }
    let mut tol = BTreeMap::new();
    for s in SETTINGS.iter().filter(|s| s.key.starts_with("tol-")) {
        let t = real(s.key, get(s.key))?;
        if t <= 0.0 {
            return Err(UsageError::new(s.key, format!("tolerance must be positive, got {t}")));
        }
        tol.insert(s.key.trim_start_matches("tol-").to_string(), t);
    }
    let out = get("out");
    if out.is_empty() {
        return Err(UsageError::new("out", "empty output directory"));
    }
    let cache = Some(get("cache")).filter(|c| !c.is_empty()).map(PathBuf::from);
    Ok(RunConfig {
        command,
        a0,
        n,
        emax,
        esteps: count("esteps", get("esteps"))?,
        umin,
        umax,
        usteps: count("usteps", get("usteps"))?,
        energy: real("energy", get("energy"))?,
        out: PathBuf::from(out),
        cache,
        tol,
        resolved,
    })
}

pub fn env_cache() -> Option<String> {
    std::env::var(CACHE_ENV).ok().filter(|v| !v.is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(kv: &[(&str, &str)]) -> BTreeMap<String, String> {
        kv.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file = parse_config_text("# c\nn = 64\nemax=30\n\n").unwrap();
        let c = resolve(Command::Verify, &flags(&[("emax", "25")]), &file, None).unwrap();
        assert_eq!(c.n, 64);
        assert_eq!(c.emax, 25.0);
        assert_eq!(c.umin, -3.0);
        assert_eq!(c.tol("mu"), 1e-6);
    }

    #[test]
    fn env_overrides_file_but_not_flag() {
        let file = parse_config_text("cache=/from/file").unwrap();
        let c = resolve(Command::Verify, &flags(&[]), &file, Some("/from/env".into())).unwrap();
        assert_eq!(c.cache.unwrap(), PathBuf::from("/from/env"));
        let c = resolve(Command::Verify, &flags(&[("cache", "/flag")]), &file, Some("/from/env".into())).unwrap();
        assert_eq!(c.cache.unwrap(), PathBuf::from("/flag"));
    }

    #[test]
    fn errors_name_the_field() {
        let e = resolve(Command::Verify, &flags(&[("tol-mu", "-1")]), &BTreeMap::new(), None).unwrap_err();
        assert_eq!(e.field, "tol-mu");
        let e = resolve(Command::Verify, &flags(&[("umin", "1"), ("umax", "0")]), &BTreeMap::new(), None).unwrap_err();
        assert_eq!(e.field, "umin");
        let e = parse_config_text("bogus=1").unwrap_err();
        assert!(e.message.contains("bogus"));
        let c = resolve(Command::Verify, &flags(&[]), &BTreeMap::new(), None).unwrap();
        assert_eq!(c.a0().unwrap_err().field, "a0");
    }
}
