//! Protocol registry: TOML descriptions of ensembles, generators and decoding rules.
//!
//! The six protocols ship inside the binary. Setting `QKD_REGISTRY_DIR` to a directory
//! makes [`load`] read `<dir>/<name>.toml` instead, so new protocols can be described
//! without recompiling.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr;
use crate::linops::{CMat, CVec, C64};

pub const REGISTRY_ENV: &str = "QKD_REGISTRY_DIR";

const BUNDLED: &[(&str, &str)] = &[
    ("bb84", include_str!("../registry/bb84.toml")),
    ("4-2-2-1", include_str!("../registry/4-2-2-1.toml")),
    ("4-3-2-2", include_str!("../registry/4-3-2-2.toml")),
    ("6-3-2-2", include_str!("../registry/6-3-2-2.toml")),
    ("7-3-2-2", include_str!("../registry/7-3-2-2.toml")),
    ("9-3-2-2", include_str!("../registry/9-3-2-2.toml")),
];

/// The protocols of the threshold table, in row order.
pub const TABLE_PROTOCOLS: [&str; 5] = ["4-2-2-1", "4-3-2-2", "6-3-2-2", "7-3-2-2", "9-3-2-2"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    Hashing,
    Css,
}

impl std::str::FromStr for Bound {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hashing" => Ok(Bound::Hashing),
            "css" => Ok(Bound::Css),
            _ => Err(Error::Invalid(format!("unknown bound `{s}` (expected hashing or css)"))),
        }
    }
}

impl std::fmt::Display for Bound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Bound::Hashing => "hashing",
            Bound::Css => "css",
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Rows of expression strings.
    pub matrix: Vec<Vec<String>>,
    /// Optional overall factor, e.g. `1/sqrt(3)`.
    #[serde(default)]
    pub scale: Option<String>,
    /// Compose with complex conjugation in the standard basis.
    #[serde(default)]
    pub antiunitary: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum SignalRule {
    /// Breadth-first orbit of the fiducial under the first `generators` generators.
    Orbit { fiducial: Vec<String>, generators: usize },
    /// The fiducial followed by its image under each generator, in order.
    Images { fiducial: Vec<String> },
    /// Explicit state vectors.
    Listed { states: Vec<Vec<String>> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasurementKind {
    /// The signal states themselves, rescaled into a POVM (two orthonormal bases).
    Bases,
    /// One element orthogonal to each qubit signal.
    Antipodal,
    /// One element per unordered signal pair, orthogonal to both.
    Repudiating,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AliceRule {
    /// `"ordered_pairs"`: every ordered pair of distinct signals.
    Named(String),
    Explicit(Vec<Vec<usize>>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub m: usize,
    pub signals: SignalRule,
    pub generators: Vec<GeneratorConfig>,
    pub measurement: MeasurementKind,
    pub alice_functions: AliceRule,
    pub default_bound: Bound,
    /// Exact e_phase / e_bit coefficient used by the CSS bound.
    #[serde(default)]
    pub css_coefficient: Option<String>,
}

/// Accepts `4-2-2-1`, `4221`, `[4,2,2,1]` and `BB84` style spellings.
pub fn normalize_name(name: &str) -> String {
    let t: String = name.trim().to_ascii_lowercase().chars().filter(|c| !"[] ".contains(*c)).collect();
    if t.chars().all(|c| c.is_ascii_digit()) && t.len() == 4 {
        return t.chars().map(String::from).collect::<Vec<_>>().join("-");
    }
    t.replace(',', "-")
}

pub fn bundled_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

pub fn parse(text: &str) -> Result<ProtocolConfig> {
    toml::from_str(text).map_err(|e| Error::Registry(e.to_string()))
}

pub fn registry_dir() -> Option<PathBuf> {
    std::env::var_os(REGISTRY_ENV).map(PathBuf::from)
}

/// Loads a protocol description, from `QKD_REGISTRY_DIR` when set, else the bundled copy.
pub fn load(name: &str) -> Result<ProtocolConfig> {
    let key = normalize_name(name);
    let cfg = match registry_dir() {
        Some(dir) => {
            let path = dir.join(format!("{key}.toml"));
            if !path.is_file() {
                return Err(Error::UnknownProtocol(name.to_string()));
            }
            parse(&std::fs::read_to_string(&path)?)?
        }
        None => {
            let text = BUNDLED
                .iter()
                .find(|(n, _)| *n == key)
                .map(|(_, t)| *t)
                .ok_or_else(|| Error::UnknownProtocol(name.to_string()))?;
            parse(text)?
        }
    };
    if normalize_name(&cfg.name) != key {
        return Err(Error::Registry(format!("file for `{key}` declares name `{}`", cfg.name)));
    }
    Ok(cfg)
}

pub fn eval_vector(items: &[String]) -> Result<CVec> {
    let v: Result<Vec<C64>> = items.iter().map(|s| expr::eval(s)).collect();
    Ok(CVec::from_vec(v?))
}

pub fn eval_matrix(g: &GeneratorConfig) -> Result<CMat> {
    let rows = g.matrix.len();
    if rows == 0 || g.matrix.iter().any(|r| r.len() != rows) {
        return Err(Error::Registry("generator matrix must be square and nonempty".into()));
    }
    let scale = match &g.scale {
        Some(s) => expr::eval(s)?,
        None => C64::new(1.0, 0.0),
    };
    let mut m = CMat::zeros(rows, rows);
    for (i, row) in g.matrix.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            m[(i, j)] = expr::eval(e)? * scale;
        }
    }
    Ok(m)
}

pub fn css_coefficient(cfg: &ProtocolConfig) -> Result<Option<f64>> {
    cfg.css_coefficient.as_deref().map(expr::eval_real).transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn name_spellings() {
        assert_eq!(normalize_name("[4,2,2,1]"), "4-2-2-1");
        assert_eq!(normalize_name("9322"), "9-3-2-2");
        assert_eq!(normalize_name("BB84"), "bb84");
        assert_eq!(normalize_name("7-3-2-2"), "7-3-2-2");
    }

    #[test]
    fn bundled_files_parse() {
        for (name, text) in BUNDLED {
            let cfg = parse(text).unwrap();
            assert_eq!(normalize_name(&cfg.name), *name);
            for g in &cfg.generators {
                let m = eval_matrix(g).unwrap();
                assert_eq!(m.nrows(), cfg.d);
            }
        }
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(load("5-3-2-2"), Err(Error::UnknownProtocol(_))));
    }
}
