use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use super::graph::{complete_edges, cycle_edges};
use super::{build_graph_model, build_torus, build_zonal_sphere3, parse_graph_text, GraphDescription, SpectralModel};
use crate::error::{Error, Result};
use crate::harness::seeds::fnv1a64;

/// Shell-friendly model descriptor, `kind:params`.
///
/// * `torus:n:m:L`: flat torus of side `L`, `m` grid points per axis
/// * `sphere3:m_theta`: zonal unit 3-sphere
/// * `graph:<path>`: graph description file
/// * `complete:N:n` / `cycle:N:n`: unit-weight complete graph / cycle
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Torus { n: usize, m: usize, side: f64 },
    Sphere3 { m_theta: usize },
    GraphFile { path: PathBuf },
    Complete { nodes: usize, n: usize },
    Cycle { nodes: usize, n: usize },
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Usage(format!("cannot parse model spec {s:?} (expected torus:n:m:L, sphere3:m, graph:<path>, complete:N:n or cycle:N:n)"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        if kind == "graph" {
            if rest.is_empty() {
                return Err(bad());
            }
            return Ok(ModelSpec::GraphFile { path: rest.into() });
        }
        let parts: Vec<&str> = rest.split(':').collect();
        let int = |t: &str| t.parse::<usize>().map_err(|_| bad());
        match (kind, parts.as_slice()) {
            ("torus", [n, m, l]) => Ok(ModelSpec::Torus {
                n: int(n)?,
                m: int(m)?,
                side: l.parse().map_err(|_| bad())?,
            }),
            ("sphere3", [m]) => Ok(ModelSpec::Sphere3 { m_theta: int(m)? }),
            ("complete", [nodes, n]) => Ok(ModelSpec::Complete { nodes: int(nodes)?, n: int(n)? }),
            ("cycle", [nodes, n]) => Ok(ModelSpec::Cycle { nodes: int(nodes)?, n: int(n)? }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Torus { n, m, side } => write!(f, "torus:{n}:{m}:{side}"),
            ModelSpec::Sphere3 { m_theta } => write!(f, "sphere3:{m_theta}"),
            ModelSpec::GraphFile { path } => write!(f, "graph:{}", path.display()),
            ModelSpec::Complete { nodes, n } => write!(f, "complete:{nodes}:{n}"),
            ModelSpec::Cycle { nodes, n } => write!(f, "cycle:{nodes}:{n}"),
        }
    }
}

impl ModelSpec {
    /// Graph structure for graph-backed specs.
    pub fn graph_description(&self) -> Result<Option<GraphDescription>> {
        Ok(match self {
            ModelSpec::GraphFile { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                Some(parse_graph_text(&text)?)
            }
            ModelSpec::Complete { nodes, n } => Some(GraphDescription {
                masses: vec![1.0; *nodes],
                edges: complete_edges(*nodes),
                n_intrinsic: *n,
            }),
            ModelSpec::Cycle { nodes, n } => Some(GraphDescription {
                masses: vec![1.0; *nodes],
                edges: cycle_edges(*nodes),
                n_intrinsic: *n,
            }),
            _ => None,
        })
    }

    pub fn build(&self) -> Result<SpectralModel> {
        let mut model = match self {
            ModelSpec::Torus { n, m, side } => build_torus(*n, *m, *side)?,
            ModelSpec::Sphere3 { m_theta } => build_zonal_sphere3(*m_theta)?,
            _ => {
                let g = self.graph_description()?.expect("graph spec");
                build_graph_model(&g.masses, &g.edges, g.n_intrinsic)?
            }
        };
        model.label = self.to_string();
        Ok(model)
    }

    /// File-name-safe key identifying the build parameters.
    pub fn cache_key(&self) -> Result<String> {
        Ok(match self {
            ModelSpec::GraphFile { path } => {
                let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
                format!("graph-{:016x}", fnv1a64(&bytes))
            }
            other => other
                .to_string()
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '-' })
                .collect(),
        })
    }
}
