//! Network and matrix file formats.
//!
//! Network files are a JSON document:
//!
//! ```json
//! { "version": 1,
//!   "vertices": ["a", "b"],
//!   "edges": [{"u": "a", "v": "b", "c": 1.0}],
//!   "weight": {"a": 0.6, "b": 0.8},
//!   "lambda": 0.0,
//!   "normalize": false }
//! ```
//!
//! `weight`, `lambda` and `normalize` are optional. A plain edge list with one
//! `u v c` triple per line is also accepted (uniform weight, `lambda = 0`).
//! Matrices are written as `{"order": [...], "rows": [[...], ...]}` with every
//! entry printed to 17 significant digits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funspace::KernelOnV;
use crate::network::{validate_network, NetworkSpec, RawNetwork};

pub const NETWORK_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub u: String,
    pub v: String,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub version: u32,
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalize: Option<bool>,
}

impl NetworkFile {
    pub fn from_spec(spec: &NetworkSpec) -> Self {
        let labels = spec.vertices().labels();
        Self {
            version: NETWORK_FILE_VERSION,
            vertices: labels.to_vec(),
            edges: spec
                .edges()
                .iter()
                .map(|e| EdgeRecord {
                    u: labels[e.u].clone(),
                    v: labels[e.v].clone(),
                    c: e.c,
                })
                .collect(),
            weight: Some(
                labels
                    .iter()
                    .cloned()
                    .zip(spec.weight().values().iter().copied())
                    .collect(),
            ),
            lambda: Some(spec.lambda()),
            normalize: None,
        }
    }

    pub fn into_raw(self) -> Result<RawNetwork> {
        if self.version != NETWORK_FILE_VERSION {
            return Err(Error::Parse(format!(
                "unsupported network file version {}",
                self.version
            )));
        }
        let weight = match self.weight {
            None => None,
            Some(mut map) => {
                let mut values = Vec::with_capacity(self.vertices.len());
                for label in &self.vertices {
                    let w = map.remove(label).ok_or_else(|| {
                        Error::Parse(format!("weight missing for vertex `{label}`"))
                    })?;
                    values.push(w);
                }
                if let Some(extra) = map.into_keys().next() {
                    return Err(Error::UnknownVertex(extra));
                }
                Some(values)
            }
        };
        Ok(RawNetwork {
            vertices: self.vertices,
            edges: self.edges.into_iter().map(|e| (e.u, e.v, e.c)).collect(),
            weight,
            lambda: self.lambda.unwrap_or(0.0),
            normalize: self.normalize.unwrap_or(false),
        })
    }
}

/// Input format of a network file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NetworkFormat {
    #[default]
    Json,
    EdgeList,
}

impl std::str::FromStr for NetworkFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "txt" => Ok(Self::EdgeList),
            other => Err(Error::Parse(format!(
                "unknown format `{other}` (expected json or txt)"
            ))),
        }
    }
}

pub fn parse_network_json(text: &str) -> Result<RawNetwork> {
    let file: NetworkFile = serde_json::from_str(text)?;
    file.into_raw()
}

/// Reads `u v c` lines; blank lines and `#` comments are skipped. Vertices are
/// ordered by first appearance.
pub fn parse_edge_list(text: &str) -> Result<RawNetwork> {
    let mut vertices: Vec<String> = Vec::new();
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [u, v, c] = fields[..] else {
            return Err(Error::Parse(format!(
                "line {}: expected `u v c`",
                lineno + 1
            )));
        };
        let c: f64 = c
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: bad conductance `{c}`", lineno + 1)))?;
        for label in [u, v] {
            if !vertices.iter().any(|x| x == label) {
                vertices.push(label.to_owned());
            }
        }
        edges.push((u.to_owned(), v.to_owned(), c));
    }
    Ok(RawNetwork {
        vertices,
        edges,
        weight: None,
        lambda: 0.0,
        normalize: false,
    })
}

/// Overrides applied on top of the file contents.
#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    pub format: NetworkFormat,
    pub lambda: Option<f64>,
    pub normalize: bool,
}

pub fn parse_network(text: &str, opts: &LoadOptions) -> Result<NetworkSpec> {
    let mut raw = match opts.format {
        NetworkFormat::Json => parse_network_json(text)?,
        NetworkFormat::EdgeList => parse_edge_list(text)?,
    };
    if let Some(lambda) = opts.lambda {
        raw.lambda = lambda;
    }
    raw.normalize |= opts.normalize;
    validate_network(raw)
}

pub fn load_network(path: &Path, opts: &LoadOptions) -> Result<NetworkSpec> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_network(&text, opts)
}

/// A square matrix with the vertex labels of its rows and columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub order: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl MatrixFile {
    pub fn new(order: Vec<String>, kernel: &KernelOnV) -> Result<Self> {
        if order.len() != kernel.order() {
            return Err(Error::Dimension {
                expected: kernel.order(),
                found: order.len(),
            });
        }
        Ok(Self {
            order,
            rows: kernel.rows(),
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: MatrixFile = serde_json::from_str(text)?;
        file.validate()?;
        Ok(file)
    }

    fn validate(&self) -> Result<()> {
        let n = self.order.len();
        if self.rows.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: self.rows.len(),
            });
        }
        if let Some(bad) = self.rows.iter().find(|r| r.len() != n) {
            return Err(Error::Dimension {
                expected: n,
                found: bad.len(),
            });
        }
        Ok(())
    }

    pub fn to_kernel(&self) -> Result<KernelOnV> {
        self.validate()?;
        KernelOnV::from_rows(&self.rows)
    }

    /// JSON text with 17 significant digits per entry.
    pub fn to_json(&self) -> String {
        let mut out = String::from("{\n  \"order\": ");
        out.push_str(&serde_json::to_string(&self.order).expect("strings serialize"));
        out.push_str(",\n  \"rows\": [\n");
        for (i, row) in self.rows.iter().enumerate() {
            out.push_str("    [");
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push_str(", ");
                }
                write!(out, "{v:.16e}").expect("write to string");
            }
            out.push(']');
            if i + 1 < self.rows.len() {
                out.push(',');
            }
            out.push('\n');
        }
        out.push_str("  ]\n}\n");
        out
    }
}
