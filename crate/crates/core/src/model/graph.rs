use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{GradientOp, ModelKind, SpectralModel, GRAPH_NODE_CAP};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub conductance: f64,
}

impl Edge {
    pub fn new(i: usize, j: usize, conductance: f64) -> Self {
        Edge { i, j, conductance }
    }
}

/// Parsed contents of a graph description file.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphDescription {
    pub masses: Vec<f64>,
    pub edges: Vec<Edge>,
    pub n_intrinsic: usize,
}

/// Parses the plain-text graph format:
///
/// ```text
/// # comment
/// dim 3
/// node 1.0        # one line per node, value = mass
/// edge 0 1 2.5    # endpoints and conductance
/// ```
pub fn parse_graph_text(text: &str) -> Result<GraphDescription> {
    let mut masses = Vec::new();
    let mut edges = Vec::new();
    let mut dim = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::Parse(format!("graph line {}: {raw:?}", lineno + 1));
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        let idx = |s: &str| s.parse::<usize>().map_err(|_| bad());
        match parts.as_slice() {
            ["dim", d] => dim = Some(idx(d)?),
            ["node", m] => masses.push(num(m)?),
            ["edge", a, b, c] => edges.push(Edge::new(idx(a)?, idx(b)?, num(c)?)),
            ["edge", a, b] => edges.push(Edge::new(idx(a)?, idx(b)?, 1.0)),
            _ => return Err(bad()),
        }
    }
    Ok(GraphDescription {
        masses,
        edges,
        n_intrinsic: dim.ok_or_else(|| Error::Parse("graph file lacks a `dim` line".into()))?,
    })
}

fn components(n: usize, edges: &[Edge]) -> usize {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut count = n;
    for e in edges {
        let (a, b) = (find(&mut parent, e.i), find(&mut parent, e.j));
        if a != b {
            parent[a] = b;
            count -= 1;
        }
    }
    count
}

/// Mass-weighted graph Laplacian `(−Δu)_i = (1/m_i) Σ_j c_ij (u_i − u_j)`.
pub fn build_graph_model(masses: &[f64], edges: &[Edge], n_intrinsic: usize) -> Result<SpectralModel> {
    let n = masses.len();
    if n < 2 {
        return Err(Error::Usage("graph needs at least two nodes".into()));
    }
    if n > GRAPH_NODE_CAP {
        return Err(Error::Size {
            nodes: n,
            cap: GRAPH_NODE_CAP,
        });
    }
    if n_intrinsic < 3 {
        return Err(Error::Usage(format!("n_intrinsic must be at least 3, got {n_intrinsic}")));
    }
    if let Some(m) = masses.iter().find(|&&m| !(m > 0.0 && m.is_finite())) {
        return Err(Error::Usage(format!("node masses must be positive, got {m}")));
    }
    for e in edges {
        if e.i >= n || e.j >= n || e.i == e.j {
            return Err(Error::Usage(format!("invalid edge ({}, {})", e.i, e.j)));
        }
        if !(e.conductance > 0.0 && e.conductance.is_finite()) {
            return Err(Error::Usage(format!("edge conductance must be positive, got {}", e.conductance)));
        }
    }
    let parts = components(n, edges);
    if parts != 1 {
        return Err(Error::Model(format!("graph is disconnected ({parts} components)")));
    }

    let inv_sqrt: Vec<f64> = masses.iter().map(|m| m.sqrt().recip()).collect();
    let mut sym = DMatrix::<f64>::zeros(n, n);
    for e in edges {
        let c = e.conductance;
        sym[(e.i, e.i)] += c;
        sym[(e.j, e.j)] += c;
        sym[(e.i, e.j)] -= c;
        sym[(e.j, e.i)] -= c;
    }
    for i in 0..n {
        for j in 0..n {
            sym[(i, j)] *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let volume: f64 = masses.iter().sum();
    let mut eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut basis = DMatrix::from_fn(n, n, |i, k| eig.eigenvectors[(i, order[k])] * inv_sqrt[i]);

    let scale = eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if eigenvalues[1] <= 1e-10 * scale {
        return Err(Error::Model(format!(
            "λ_1 = {:e} is not positive; graph is numerically disconnected",
            eigenvalues[1]
        )));
    }
    eigenvalues[0] = 0.0;
    basis.column_mut(0).fill(volume.powf(-0.5));

    Ok(SpectralModel {
        label: format!("graph:{n}"),
        n_intrinsic,
        nodes: (0..n).map(|i| vec![i as f64]).collect(),
        weights: DVector::from_column_slice(masses),
        eigenvalues,
        eigenbasis: basis,
        volume,
        diameter: None,
        kind: ModelKind::Graph {
            edges: edges.to_vec(),
        },
        grad: GradientOp::None,
    })
}

/// Complete graph `K_n` with unit masses and conductances.
pub fn complete_edges(n: usize) -> Vec<Edge> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            edges.push(Edge::new(i, j, 1.0));
        }
    }
    edges
}

/// Cycle `C_n` with unit conductances.
pub fn cycle_edges(n: usize) -> Vec<Edge> {
    (0..n).map(|i| Edge::new(i, (i + 1) % n, 1.0)).collect()
}
