//! On-disk cache of Fredholm solutions.
//!
//! Layout under the cache root:
//!
//! ```text
//! phi/{a}_{sign}_{n}.bin   node-major little-endian f64, `limbs` words per node
//! phi/{a}_{sign}_{n}.json  metadata: a, sign, n, precision, limbs, log_det
//! potential/{umin}_{umax}_{steps}_{n}.json  a PotentialTable (f64, exact)
//! ```
//!
//! `a` is rounded to 1e-12 and written in shortest round-trip decimal form;
//! `sign` is `plus` or `minus`. A value at working precision p is stored as the unevaluated sum of
//! `limbs = ⌈p/53⌉ + 1` doubles (each the rounded remainder of the previous),
//! so multiprecision values come back bit-for-bit. Files are written to a
//! temporary name and renamed into place while holding an exclusive lock on
//! `phi/.lock`; readers take the shared lock.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cosine_kernel::{build_potential_table, PotentialTable, Sign};
use crate::error::{io_err, Error, Result};
use crate::real::Real;

/// Environment variable overriding the default cache root.
pub const CACHE_ENV: &str = "SPECLAB_CACHE";

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PhiMeta {
    pub a: f64,
    pub sign: String,
    pub n: usize,
    pub precision: u32,
    pub limbs: usize,
    pub log_det: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct PhiCache {
    root: PathBuf,
}

pub fn sign_token(sign: Sign) -> &'static str {
    match sign {
        Sign::Plus => "plus",
        Sign::Minus => "minus",
    }
}

pub fn limb_count(precision: u32) -> usize {
    if precision <= 53 {
        1
    } else {
        (precision as usize).div_ceil(53) + 1
    }
}

pub(crate) fn split<T: Real>(x: &T, limbs: usize) -> Vec<f64> {
    let mut r = x.clone();
    let mut out = Vec::with_capacity(limbs);
    for _ in 0..limbs {
        let v = r.to_f64();
        out.push(v);
        r -= &r.lit(v);
    }
    out
}

pub(crate) fn join<T: Real>(limbs: &[f64], proto: &T) -> T {
    let mut s = proto.zero();
    for &v in limbs.iter().rev() {
        s += &proto.lit(v);
    }
    s
}

impl PhiCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        PhiCache { root: root.into() }
    }

    /// Root from the environment variable, if set and non-empty.
    pub fn from_env() -> Option<Self> {
        std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(Self::new)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn paths(&self, a: f64, sign: Sign, n: usize) -> (PathBuf, PathBuf) {
        let stem = format!("{}_{}_{}", key_a(a), sign_token(sign), n);
        let dir = self.root.join("phi");
        (dir.join(format!("{stem}.bin")), dir.join(format!("{stem}.json")))
    }

    /// Node values and log det at precision of `proto`, if a matching entry exists.
    pub fn load<T: Real>(&self, a: f64, sign: Sign, n: usize, proto: &T) -> Result<Option<(Vec<T>, T)>> {
        let (bin, json) = self.paths(a, sign, n);
        if !bin.exists() || !json.exists() {
            return Ok(None);
        }
        let _guard = self.lock(false)?;
        let text = fs::read_to_string(&json).map_err(io_err(&json))?;
        let meta: PhiMeta = serde_json::from_str(&text).map_err(|e| Error::Cache {
            path: json.clone(),
            reason: e.to_string(),
        })?;
        let expect = PhiMeta {
            a: key_a(a),
            sign: sign_token(sign).into(),
            n,
            precision: proto.prec(),
            limbs: limb_count(proto.prec()),
            log_det: meta.log_det.clone(),
        };
        if meta != expect {
            // stale or produced under a different precision policy
            log::info!("ignoring cache entry {} (metadata mismatch)", json.display());
            return Ok(None);
        }
        let bytes = fs::read(&bin).map_err(io_err(&bin))?;
        if bytes.len() != n * meta.limbs * 8 || meta.log_det.len() != meta.limbs {
            return Err(Error::Cache {
                path: bin,
                reason: format!("expected {} bytes, found {}", n * meta.limbs * 8, bytes.len()),
            });
        }
        let words: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let phi = words.chunks_exact(meta.limbs).map(|l| join(l, proto)).collect();
        Ok(Some((phi, join(&meta.log_det, proto))))
    }

    pub fn store<T: Real>(&self, a: f64, sign: Sign, phi: &[T], log_det: &T) -> Result<()> {
        let n = phi.len();
        let (bin, json) = self.paths(a, sign, n);
        let dir = bin.parent().unwrap().to_path_buf();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let _guard = self.lock(true)?;
        let prec = log_det.prec();
        let limbs = limb_count(prec);
        let mut bytes = Vec::with_capacity(n * limbs * 8);
        for v in phi {
            for w in split(v, limbs) {
                bytes.extend_from_slice(&w.to_le_bytes());
            }
        }
        let meta = PhiMeta {
            a: key_a(a),
            sign: sign_token(sign).into(),
            n,
            precision: prec,
            limbs,
            log_det: split(log_det, limbs),
        };
        atomic_write(&bin, &bytes)?;
        let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
        atomic_write(&json, text.as_bytes())
    }
}

impl PhiCache {
    fn table_path(&self, u_min: f64, u_max: f64, steps: usize, n: usize) -> PathBuf {
        self.root.join("potential").join(format!("{u_min}_{u_max}_{steps}_{n}.json"))
    }

    pub fn load_table(&self, u_min: f64, u_max: f64, steps: usize, n: usize) -> Result<Option<PotentialTable>> {
        let path = self.table_path(u_min, u_max, steps, n);
        if !path.exists() {
            return Ok(None);
        }
        let _guard = self.lock(false)?;
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let t: PotentialTable = serde_json::from_str(&text).map_err(|e| Error::Cache {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        Ok(Some(t))
    }

    pub fn store_table(&self, u_min: f64, u_max: f64, steps: usize, t: &PotentialTable) -> Result<()> {
        let path = self.table_path(u_min, u_max, steps, t.n);
        let dir = path.parent().unwrap().to_path_buf();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let _guard = self.lock(true)?;
        atomic_write(&path, serde_json::to_string(t).expect("table serializes").as_bytes())
    }
}

/// [`build_potential_table`] through an optional cache.
pub fn potential_table(u_min: f64, u_max: f64, steps: usize, n: usize, cache: Option<&PhiCache>) -> Result<PotentialTable> {
    if let Some(c) = cache {
        if let Some(t) = c.load_table(u_min, u_max, steps, n)? {
            return Ok(t);
        }
    }
    let t = build_potential_table(u_min, u_max, steps, n)?;
    if let Some(c) = cache {
        c.store_table(u_min, u_max, steps, &t)?;
    }
    Ok(t)
}

/// Cache key for a: rounded to 1e-12.
pub fn key_a(a: f64) -> f64 {
    (a * 1e12).round() / 1e12
}

impl PhiCache {
    /// Advisory lock on `phi/.lock`, released on drop. Also serializes
    /// threads of this process (each call opens its own descriptor).
    fn lock(&self, exclusive: bool) -> Result<fs::File> {
        let dir = self.root.join("phi");
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let path = dir.join(".lock");
        let f = fs::OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)
            .map_err(io_err(&path))?;
        if exclusive { f.lock() } else { f.lock_shared() }.map_err(io_err(&path))?;
        Ok(f)
    }
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    // the lock excludes other writers; the rename keeps lock-free readers of
    // a single file consistent
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    drop(f);
    fs::rename(&tmp, path).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::mp;

    #[test]
    fn limbs_round_trip_multiprecision_exactly() {
        let x = Real::ln(&mp(364, 3.0));
        let l = split(&x, limb_count(364));
        let y = join(&l, &mp(364, 0.0));
        assert_eq!(x, y);
        assert_eq!(split(&0.1f64, 1), vec![0.1]);
    }

    #[test]
    fn store_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let c = PhiCache::new(dir.path());
        let phi: Vec<_> = (1..5).map(|i| Real::sqrt(&mp(200, i as f64))).collect();
        let ld = Real::ln(&mp(200, 7.0));
        c.store(0.5, Sign::Minus, &phi, &ld).unwrap();
        let (bin, _) = c.paths(0.5, Sign::Minus, 4);
        assert!(bin.ends_with("phi/0.5_minus_4.bin"));
        let (p2, l2) = c.load(0.5, Sign::Minus, 4, &mp(200, 0.0)).unwrap().unwrap();
        assert_eq!(p2, phi);
        assert_eq!(l2, ld);
        // keys agree after rounding to 1e-12
        assert!(c.load(0.5 + 1e-14, Sign::Minus, 4, &mp(200, 0.0)).unwrap().is_some());
        // a different precision is a miss, not an error
        assert!(c.load(0.5, Sign::Minus, 4, &mp(300, 0.0)).unwrap().is_none());
    }

    #[test]
    fn table_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let c = PhiCache::new(dir.path());
        let t = potential_table(-2.0, -1.0, 8, 32, Some(&c)).unwrap();
        let u = potential_table(-2.0, -1.0, 8, 32, Some(&c)).unwrap();
        assert_eq!(t.mu_values, u.mu_values);
        assert_eq!(t.logdet_minus, u.logdet_minus);
        assert!(dir.path().join("potential").read_dir().unwrap().count() == 1);
    }
}
