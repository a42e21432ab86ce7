//! `NMPM1` model cache files.
//!
//! Layout: the five ASCII bytes `NMPM1`, then little-endian `f64` values:
//! node count, intrinsic dimension, volume, diameter flag (0/1), diameter
//! value, the `N` weights, the `K` eigenvalues and the `N×K` eigenbasis in
//! row-major order. `K` follows from the payload length.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use super::sphere::zonal_gradient_op;
use super::torus::torus_gradient_op;
use super::{GradientOp, ModelKind, ModelSpec, SpectralModel};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 5] = b"NMPM1";

pub fn write_model_cache(model: &SpectralModel, path: &Path) -> Result<()> {
    let n = model.node_count();
    let k = model.mode_count();
    let mut buf = Vec::with_capacity(5 + 8 * (5 + n + k + n * k));
    buf.extend_from_slice(MODEL_MAGIC);
    let mut put = |v: f64| buf.extend_from_slice(&v.to_le_bytes());
    put(n as f64);
    put(model.n_intrinsic as f64);
    put(model.volume);
    put(if model.diameter.is_some() { 1.0 } else { 0.0 });
    put(model.diameter.unwrap_or(0.0));
    model.weights.iter().for_each(|&w| put(w));
    model.eigenvalues.iter().for_each(|&l| put(l));
    for i in 0..n {
        for j in 0..k {
            put(model.eigenbasis[(i, j)]);
        }
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Reads a cached model; `spec` supplies the kind-specific structure
/// (grid shape, graph edges) that the file does not store.
pub fn read_model_cache(path: &Path, spec: &ModelSpec) -> Result<SpectralModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 5 || &bytes[..5] != MODEL_MAGIC {
        return Err(Error::Parse(format!("{} is not an NMPM1 file", path.display())));
    }
    let body = &bytes[5..];
    if body.len() % 8 != 0 {
        return Err(Error::Parse("NMPM1 payload is not a whole number of f64 values".into()));
    }
    let vals: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    if vals.len() < 5 {
        return Err(Error::Parse("truncated NMPM1 header".into()));
    }
    let n = vals[0] as usize;
    let n_intrinsic = vals[1] as usize;
    let volume = vals[2];
    let diameter = (vals[3] != 0.0).then_some(vals[4]);
    let rest = &vals[5..];
    if rest.len() < n || !(rest.len() - n).is_multiple_of(n + 1) {
        return Err(Error::Parse("inconsistent NMPM1 payload length".into()));
    }
    let k = (rest.len() - n) / (n + 1);
    let weights = DVector::from_column_slice(&rest[..n]);
    let eigenvalues = DVector::from_column_slice(&rest[n..n + k]);
    let eigenbasis = DMatrix::from_row_slice(n, k, &rest[n + k..]);

    let (kind, nodes, grad) = match spec {
        ModelSpec::Torus { n: dim, m, side } => {
            if m.pow(*dim as u32) != n {
                return Err(Error::Parse("cache node count does not match torus spec".into()));
            }
            let h = side / *m as f64;
            let nodes = (0..n)
                .map(|idx| {
                    let mut d = vec![0.0; *dim];
                    let mut r = idx;
                    for a in (0..*dim).rev() {
                        d[a] = (r % m) as f64 * h;
                        r /= m;
                    }
                    d
                })
                .collect();
            (ModelKind::Torus { m: *m, side: *side }, nodes, torus_gradient_op(*m, *side))
        }
        ModelSpec::Sphere3 { m_theta } => {
            if *m_theta != n {
                return Err(Error::Parse("cache node count does not match sphere spec".into()));
            }
            let dt = std::f64::consts::PI / n as f64;
            let nodes = (0..n).map(|j| vec![(j as f64 + 0.5) * dt]).collect();
            let grad = zonal_gradient_op(&eigenbasis, &weights);
            (ModelKind::ZonalSphere3 { m_theta: n }, nodes, grad)
        }
        _ => {
            let g = spec.graph_description()?.expect("graph spec");
            if g.masses.len() != n {
                return Err(Error::Parse("cache node count does not match graph spec".into()));
            }
            let nodes = (0..n).map(|i| vec![i as f64]).collect();
            (ModelKind::Graph { edges: g.edges }, nodes, GradientOp::None)
        }
    };

    let model = SpectralModel {
        label: spec.to_string(),
        n_intrinsic,
        nodes,
        weights,
        eigenvalues,
        eigenbasis,
        volume,
        diameter,
        kind,
        grad,
    };
    model.check_invariants()?;
    Ok(model)
}

/// Directory of `NMPM1` files keyed by build parameters.
#[derive(Debug, Clone)]
pub struct ModelCache {
    dir: PathBuf,
}

impl ModelCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ModelCache { dir: dir.into() }
    }

    pub fn path_for(&self, spec: &ModelSpec) -> Result<PathBuf> {
        Ok(self.dir.join(format!("{}.nmpm", spec.cache_key()?)))
    }

    pub fn get_or_build(&self, spec: &ModelSpec) -> Result<SpectralModel> {
        let path = self.path_for(spec)?;
        if path.exists() {
            return read_model_cache(&path, spec);
        }
        let model = spec.build()?;
        std::fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        write_model_cache(&model, &path)?;
        Ok(model)
    }
}
