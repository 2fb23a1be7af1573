//! Text checkpoint format.
//!
//! ```text
//! dmca-params 1
//! # any number of comment lines
//! param <name> <ndims> <dim_1> ... <dim_n>
//! <value_1> <value_2> ... <value_k>
//! ```
//!
//! Values use Rust's shortest round-trip float formatting, so save/load is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use super::ParamSet;
use crate::error::{Error, Result};

pub const MAGIC: &str = "dmca-params";
pub const VERSION: u32 = 1;

pub fn to_string(params: &ParamSet, comments: &[String]) -> String {
    let mut out = format!("{MAGIC} {VERSION}\n");
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    for p in params.iter() {
        let _ = write!(out, "param {} {}", p.name, p.shape.len());
        for d in &p.shape {
            let _ = write!(out, " {d}");
        }
        out.push('\n');
        let vals: Vec<String> = p.value.iter().map(f64::to_string).collect();
        out.push_str(&vals.join(" "));
        out.push('\n');
    }
    out
}

pub fn save(path: &Path, params: &ParamSet, comments: &[String]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, to_string(params, comments)).map_err(|e| Error::io(path, e))
}

/// Parses a checkpoint into a fresh [`ParamSet`].
pub fn from_str(text: &str, origin: &Path) -> Result<ParamSet> {
    let bad = |reason: String| Error::parse(origin, reason);
    let mut lines = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let mut h = header.split_whitespace();
    if h.next() != Some(MAGIC) {
        return Err(bad(format!("missing `{MAGIC}` header")));
    }
    match h.next().and_then(|v| v.parse::<u32>().ok()) {
        Some(VERSION) => {}
        other => return Err(bad(format!("unsupported version {other:?}"))),
    }

    let mut params = ParamSet::new();
    while let Some(decl) = lines.next() {
        let mut f = decl.split_whitespace();
        if f.next() != Some("param") {
            return Err(bad(format!("expected `param`, found `{decl}`")));
        }
        let name = f
            .next()
            .ok_or_else(|| bad("parameter without name".into()))?;
        let ndims: usize = f
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(format!("bad rank for `{name}`")))?;
        let shape: Vec<usize> = f
            .map(|v| {
                v.parse()
                    .map_err(|_| bad(format!("bad dimension `{v}` for `{name}`")))
            })
            .collect::<Result<_>>()?;
        if shape.len() != ndims {
            return Err(bad(format!(
                "`{name}` declares {ndims} dims, lists {}",
                shape.len()
            )));
        }
        let values_line = lines
            .next()
            .ok_or_else(|| bad(format!("missing values for `{name}`")))?;
        let values: Vec<f64> = values_line
            .split_whitespace()
            .map(|v| {
                v.parse()
                    .map_err(|_| bad(format!("bad value `{v}` in `{name}`")))
            })
            .collect::<Result<_>>()?;
        params
            .add(name, &shape, values)
            .map_err(|e| bad(format!("`{name}`: {e}")))?;
    }
    Ok(params)
}

pub fn load(path: &Path) -> Result<ParamSet> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::MissingCheckpoint(path.to_path_buf()))
        }
        Err(e) => return Err(Error::io(path, e)),
    };
    from_str(&text, path)
}

/// Loads a checkpoint into an existing set, requiring identical names and shapes.
pub fn load_into(path: &Path, target: &mut ParamSet) -> Result<()> {
    let loaded = load(path)?;
    for (a, b) in target.iter().zip(loaded.iter()) {
        if a.name != b.name {
            return Err(Error::parse(
                path,
                format!("expected parameter `{}`, found `{}`", a.name, b.name),
            ));
        }
    }
    target
        .copy_values_from(&loaded)
        .map_err(|e| Error::parse(path, e.to_string()))
}
