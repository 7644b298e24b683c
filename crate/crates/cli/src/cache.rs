//! Append-only store of point-count records. Each curve's block opens
//! with a guard line `# curve <label> a2=<..> a4=<..> a6=<..>` so a
//! cache can never silently mix records from two different curves that
//! happen to share a label; data lines are `label p N`, one record per
//! line, and existing bytes are never rewritten.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use isogeny_radical::curves::CurveOverQ;

#[derive(Debug)]
pub enum CacheError {
    Io(io::Error),
    Corrupt { line: usize, msg: String },
    Collision { label: String },
}

impl fmt::Display for CacheError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CacheError::Io(e) => write!(f, "cache i/o: {e}"),
            CacheError::Corrupt { line, msg } => write!(f, "cache line {line}: {msg}"),
            CacheError::Collision { label } => {
                write!(
                    f,
                    "cache already holds a different curve under label {label}"
                )
            }
        }
    }
}

impl std::error::Error for CacheError {}

impl From<io::Error> for CacheError {
    fn from(e: io::Error) -> Self {
        CacheError::Io(e)
    }
}

/// Parsed view of a cache file: which labels are guarded with which
/// coefficients, and which (label, p) pairs already have records.
#[derive(Debug, Default)]
pub struct CountCache {
    guards: HashMap<String, (i64, i64, i64)>,
    records: HashMap<String, HashSet<u64>>,
}

impl CountCache {
    /// A missing file is an empty cache; anything unreadable or
    /// malformed is an error.
    pub fn load(path: &Path) -> Result<CountCache, CacheError> {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(CountCache::default()),
            Err(e) => return Err(CacheError::Io(e)),
        };
        let mut cache = CountCache::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix("# curve ") {
                let (label, coeffs) = parse_guard(rest).ok_or_else(|| CacheError::Corrupt {
                    line,
                    msg: format!("bad guard {trimmed:?}"),
                })?;
                match cache.guards.get(&label) {
                    Some(&old) if old != coeffs => {
                        return Err(CacheError::Collision { label });
                    }
                    _ => {
                        cache.guards.insert(label, coeffs);
                    }
                }
                continue;
            }
            if trimmed.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = trimmed.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(CacheError::Corrupt {
                    line,
                    msg: format!("expected `label p N`, got {trimmed:?}"),
                });
            }
            let p: u64 = parts[1].parse().map_err(|_| CacheError::Corrupt {
                line,
                msg: format!("bad prime {:?}", parts[1]),
            })?;
            let _n: u64 = parts[2].parse().map_err(|_| CacheError::Corrupt {
                line,
                msg: format!("bad count {:?}", parts[2]),
            })?;
            if !cache.guards.contains_key(parts[0]) {
                return Err(CacheError::Corrupt {
                    line,
                    msg: format!("record for unguarded label {}", parts[0]),
                });
            }
            cache
                .records
                .entry(parts[0].to_string())
                .or_default()
                .insert(p);
        }
        Ok(cache)
    }

    /// Ok(true) if the curve's guard is present and matches, Ok(false)
    /// if the label is new; a mismatch is a collision.
    pub fn check_guard(&self, curve: &CurveOverQ) -> Result<bool, CacheError> {
        match self.guards.get(curve.label()) {
            None => Ok(false),
            Some(&coeffs) if coeffs == (curve.a2(), curve.a4(), curve.a6()) => Ok(true),
            Some(_) => Err(CacheError::Collision {
                label: curve.label().to_string(),
            }),
        }
    }

    pub fn has(&self, label: &str, p: u64) -> bool {
        self.records.get(label).is_some_and(|s| s.contains(&p))
    }
}

fn parse_guard(rest: &str) -> Option<(String, (i64, i64, i64))> {
    let parts: Vec<&str> = rest.split_whitespace().collect();
    if parts.len() != 4 {
        return None;
    }
    let mut vals = [0i64; 3];
    for ((slot, part), key) in vals.iter_mut().zip(&parts[1..]).zip(["a2", "a4", "a6"]) {
        let (k, v) = part.split_once('=')?;
        if k != key {
            return None;
        }
        *slot = v.parse().ok()?;
    }
    Some((parts[0].to_string(), (vals[0], vals[1], vals[2])))
}

pub fn guard_line(curve: &CurveOverQ) -> String {
    format!(
        "# curve {} a2={} a4={} a6={}",
        curve.label(),
        curve.a2(),
        curve.a4(),
        curve.a6()
    )
}

pub fn record_line(label: &str, p: u64, n: u64) -> String {
    format!("{label} {p} {n}")
}

/// Append without touching existing bytes; creates the file (even for
/// empty content) so an empty scan still leaves a cache behind.
pub fn append(path: &Path, content: &str) -> Result<(), CacheError> {
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    f.write_all(content.as_bytes())?;
    Ok(())
}
