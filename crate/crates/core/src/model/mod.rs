//! Exact finite spectral models of closed manifolds.
//!
//! A [`SpectralModel`] carries quadrature nodes with positive weights (the
//! volume measure), a weighted-orthonormal eigenbasis `Φ` (columns `φ_k`) and
//! the ascending eigenvalues `λ_k ≥ 0` of `−Δ`. The Laplacian is applied
//! spectrally; gradients and weak divergences are model specific but satisfy
//! `div ∇ = Δ` and `∫(div Φ)φ = −∫Φ·∇φ` to machine precision.

mod cache;
mod graph;
mod spec;
mod sphere;
mod torus;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub use cache::{read_model_cache, write_model_cache, ModelCache, MODEL_MAGIC};
pub use graph::{build_graph_model, complete_edges, cycle_edges, parse_graph_text, Edge, GraphDescription};
pub use spec::ModelSpec;
pub use sphere::{build_zonal_sphere3, zonal_quadrature_volume};
pub use torus::{build_torus, build_torus_with_cap};

/// Default node caps. Dense node×node kernels stay around 130 MB at most.
pub const TORUS_NODE_CAP: usize = 4096;
pub const GRAPH_NODE_CAP: usize = 2000;

/// Which family a model belongs to, with the parameters it was built from.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    Torus { m: usize, side: f64 },
    ZonalSphere3 { m_theta: usize },
    Graph { edges: Vec<Edge> },
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Torus { .. } => "torus",
            ModelKind::ZonalSphere3 { .. } => "sphere3",
            ModelKind::Graph { .. } => "graph",
        }
    }
}

/// Model-specific gradient machinery.
#[derive(Debug, Clone)]
pub(crate) enum GradientOp {
    /// 1-D spectral derivative on the uniform grid (m×m), applied per axis.
    Torus { d1: DMatrix<f64> },
    /// θ-derivative of every basis column sampled at the nodes (N×K).
    Zonal { dbasis: DMatrix<f64> },
    /// Graphs pair gradients through the edge Dirichlet form only.
    None,
}

/// Function values at the model nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Self {
        ScalarField { values }
    }

    pub fn constant(len: usize, c: f64) -> Self {
        ScalarField { values: vec![c; len] }
    }

    pub fn zeros(len: usize) -> Self {
        Self::constant(len, 0.0)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField::new(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        assert_eq!(self.len(), other.len(), "field length mismatch");
        ScalarField::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> ScalarField {
        self.map(|v| c * v)
    }

    pub fn shift(&self, c: f64) -> ScalarField {
        self.map(|v| v + c)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn as_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.values)
    }
}

impl From<DVector<f64>> for ScalarField {
    fn from(v: DVector<f64>) -> Self {
        ScalarField::new(v.as_slice().to_vec())
    }
}

/// A vector field sampled at the nodes.
///
/// Torus models carry `n` Cartesian components, zonal sphere models a single
/// `∂_θ` component (the metric is unit in θ), graph models no components at
/// all, which represents the zero field.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub components: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(components: Vec<Vec<f64>>) -> Self {
        VectorField { components }
    }

    /// Zero field shaped for `model`.
    pub fn zeros(model: &SpectralModel) -> Self {
        VectorField::new(vec![vec![0.0; model.node_count()]; model.vector_dim()])
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.iter().all(|&v| v == 0.0))
    }

    /// Pointwise Euclidean length `|Φ|(i)`.
    pub fn pointwise_norm(&self, len: usize) -> ScalarField {
        let mut out = vec![0.0; len];
        for comp in &self.components {
            for (o, v) in out.iter_mut().zip(comp) {
                *o += v * v;
            }
        }
        ScalarField::new(out.into_iter().map(f64::sqrt).collect())
    }

    pub fn scale(&self, c: f64) -> VectorField {
        VectorField::new(
            self.components
                .iter()
                .map(|comp| comp.iter().map(|v| c * v).collect())
                .collect(),
        )
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        assert_eq!(self.dim(), other.dim(), "vector field dimension mismatch");
        VectorField::new(
            self.components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
                .collect(),
        )
    }

    /// Pointwise dot product `Φ·Ψ`.
    pub fn dot(&self, other: &VectorField, len: usize) -> ScalarField {
        assert_eq!(self.dim(), other.dim(), "vector field dimension mismatch");
        let mut out = vec![0.0; len];
        for (a, b) in self.components.iter().zip(&other.components) {
            for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
                *o += x * y;
            }
        }
        ScalarField::new(out)
    }
}

/// An exact discrete spectral surrogate of a closed manifold.
///
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct SpectralModel {
    pub label: String,
    pub n_intrinsic: usize,
    pub nodes: Vec<Vec<f64>>,
    pub weights: DVector<f64>,
    pub eigenvalues: DVector<f64>,
    /// N×K, columns are weighted-orthonormal eigenfunctions.
    pub eigenbasis: DMatrix<f64>,
    pub volume: f64,
    pub diameter: Option<f64>,
    pub kind: ModelKind,
    pub(crate) grad: GradientOp,
}

impl SpectralModel {
    pub fn node_count(&self) -> usize {
        self.weights.len()
    }

    pub fn mode_count(&self) -> usize {
        self.eigenvalues.len()
    }

    /// True when the eigenbasis spans every node function.
    pub fn is_complete(&self) -> bool {
        self.mode_count() == self.node_count()
    }

    /// Number of components of a [`VectorField`] on this model.
    pub fn vector_dim(&self) -> usize {
        match &self.kind {
            ModelKind::Torus { .. } => self.n_intrinsic,
            ModelKind::ZonalSphere3 { .. } => 1,
            ModelKind::Graph { .. } => 0,
        }
    }

    pub fn supports_gradient(&self) -> bool {
        !matches!(self.grad, GradientOp::None)
    }

    pub fn lambda1(&self) -> f64 {
        if self.mode_count() > 1 {
            self.eigenvalues[1]
        } else {
            0.0
        }
    }

    pub fn check_field(&self, u: &ScalarField) -> Result<()> {
        if u.len() != self.node_count() {
            return Err(Error::Mismatch {
                expected: self.node_count(),
                got: u.len(),
            });
        }
        Ok(())
    }

    pub fn check_vector(&self, phi: &VectorField) -> Result<()> {
        if phi.dim() != self.vector_dim() {
            return Err(Error::Usage(format!(
                "vector field has {} components, model {} expects {}",
                phi.dim(),
                self.label,
                self.vector_dim()
            )));
        }
        for comp in &phi.components {
            if comp.len() != self.node_count() {
                return Err(Error::Mismatch {
                    expected: self.node_count(),
                    got: comp.len(),
                });
            }
        }
        Ok(())
    }

    /// Weighted inner product `Σ w_i u_i v_i`.
    pub fn inner(&self, u: &ScalarField, v: &ScalarField) -> f64 {
        self.weights
            .iter()
            .zip(&u.values)
            .zip(&v.values)
            .map(|((w, a), b)| w * a * b)
            .sum()
    }

    /// `Σ w_i u_i`.
    pub fn integrate(&self, u: &ScalarField) -> f64 {
        self.weights.iter().zip(&u.values).map(|(w, a)| w * a).sum()
    }

    /// Spectral coefficients `û_k = Σ_i w_i φ_k(i) u_i`.
    pub fn analyze(&self, u: &ScalarField) -> DVector<f64> {
        let wu = DVector::from_iterator(
            self.node_count(),
            self.weights.iter().zip(&u.values).map(|(w, a)| w * a),
        );
        self.eigenbasis.tr_mul(&wu)
    }

    pub fn synthesize(&self, coeffs: &DVector<f64>) -> ScalarField {
        (&self.eigenbasis * coeffs).into()
    }

    /// Basis column `φ_k` as a field.
    pub fn mode(&self, k: usize) -> ScalarField {
        ScalarField::new(self.eigenbasis.column(k).iter().copied().collect())
    }

    /// `Δu`: coefficients `û_k ↦ −λ_k û_k`, resynthesized.
    pub fn apply_laplacian(&self, u: &ScalarField) -> Result<ScalarField> {
        self.check_field(u)?;
        let mut c = self.analyze(u);
        for (ck, lk) in c.iter_mut().zip(self.eigenvalues.iter()) {
            *ck *= -lk;
        }
        Ok(self.synthesize(&c))
    }

    pub fn gradient(&self, u: &ScalarField) -> Result<VectorField> {
        self.check_field(u)?;
        match &self.grad {
            GradientOp::Torus { d1 } => {
                let (m, n) = self.torus_shape();
                Ok(VectorField::new(
                    (0..n)
                        .map(|axis| torus::apply_axis(d1, &u.values, m, n, axis, false))
                        .collect(),
                ))
            }
            GradientOp::Zonal { dbasis } => {
                let c = self.analyze(u);
                let d = dbasis * c;
                Ok(VectorField::new(vec![d.as_slice().to_vec()]))
            }
            GradientOp::None => Err(Error::Unsupported(format!(
                "gradient on {} model (use the Dirichlet form)",
                self.kind.name()
            ))),
        }
    }

    /// The field `d` with `Σ w d φ = −Σ w Φ·∇φ` for every node function `φ`.
    pub fn divergence_weak(&self, phi: &VectorField) -> Result<ScalarField> {
        self.check_vector(phi)?;
        match &self.grad {
            GradientOp::Torus { d1 } => {
                let (m, n) = self.torus_shape();
                let mut out = vec![0.0; self.node_count()];
                for (axis, comp) in phi.components.iter().enumerate() {
                    let t = torus::apply_axis(d1, comp, m, n, axis, true);
                    for (o, v) in out.iter_mut().zip(t) {
                        *o -= v;
                    }
                }
                Ok(ScalarField::new(out))
            }
            GradientOp::Zonal { dbasis } => {
                let wphi = DVector::from_iterator(
                    self.node_count(),
                    self.weights.iter().zip(&phi.components[0]).map(|(w, p)| w * p),
                );
                let coeffs = -dbasis.tr_mul(&wphi);
                Ok(self.synthesize(&coeffs))
            }
            GradientOp::None => Err(Error::Unsupported(format!(
                "weak divergence on {} model",
                self.kind.name()
            ))),
        }
    }

    /// Divergence that accepts the zero field on every model (including graphs).
    pub fn divergence_or_zero(&self, phi: &VectorField) -> Result<ScalarField> {
        if phi.dim() == 0 && self.vector_dim() == 0 {
            return Ok(ScalarField::zeros(self.node_count()));
        }
        self.divergence_weak(phi)
    }

    /// Dirichlet form `∫∇u·∇v`; on graphs the edge form `Σ c_ij (u_i−u_j)(v_i−v_j)`.
    pub fn dirichlet_form(&self, u: &ScalarField, v: &ScalarField) -> Result<f64> {
        self.check_field(u)?;
        self.check_field(v)?;
        match &self.kind {
            ModelKind::Graph { edges } => Ok(edges
                .iter()
                .map(|e| e.conductance * (u.values[e.i] - u.values[e.j]) * (v.values[e.i] - v.values[e.j]))
                .sum()),
            _ => {
                let gu = self.gradient(u)?;
                let gv = self.gradient(v)?;
                Ok(self.integrate(&gu.dot(&gv, self.node_count())))
            }
        }
    }

    /// `Φ·∇φ` integrated: `Σ w Φ·∇φ`. Zero for the zero field.
    pub fn flux_pairing(&self, phi: &VectorField, test: &ScalarField) -> Result<f64> {
        if phi.dim() == 0 {
            return Ok(0.0);
        }
        let g = self.gradient(test)?;
        Ok(self.integrate(&phi.dot(&g, self.node_count())))
    }

    /// Laplacian assembled from the local operators (per-axis derivatives,
    /// sampled basis derivatives, or graph edges) rather than the eigenbasis
    /// diagonal. Agrees with [`Self::apply_laplacian`] on every model.
    pub fn div_grad(&self, u: &ScalarField) -> Result<ScalarField> {
        self.check_field(u)?;
        match &self.kind {
            ModelKind::Graph { edges } => {
                let mut out = vec![0.0; self.node_count()];
                for e in edges {
                    let flow = e.conductance * (u.values[e.j] - u.values[e.i]);
                    out[e.i] += flow;
                    out[e.j] -= flow;
                }
                for (o, w) in out.iter_mut().zip(self.weights.iter()) {
                    *o /= w;
                }
                Ok(ScalarField::new(out))
            }
            _ => {
                let g = self.gradient(u)?;
                self.divergence_weak(&g)
            }
        }
    }

    /// Max-abs deviation of the weighted Gram matrix `ΦᵀWΦ` from the identity.
    pub fn gram_residual(&self) -> f64 {
        let mut wphi = self.eigenbasis.clone();
        for (i, w) in self.weights.iter().enumerate() {
            wphi.row_mut(i).scale_mut(*w);
        }
        let gram = self.eigenbasis.tr_mul(&wphi);
        let k = gram.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..k {
            for j in 0..k {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// Verifies the structural invariants every model must satisfy.
    pub fn check_invariants(&self) -> Result<()> {
        if self.weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::Model("non-positive quadrature weight".into()));
        }
        if self.eigenvalues[0].abs() > 1e-12 {
            return Err(Error::Model(format!(
                "λ_0 = {} is not zero",
                self.eigenvalues[0]
            )));
        }
        if self
            .eigenvalues
            .as_slice()
            .windows(2)
            .any(|w| w[1] < w[0])
        {
            return Err(Error::Model("eigenvalues not ascending".into()));
        }
        let c0 = self.volume.powf(-0.5);
        if self.eigenbasis.column(0).iter().any(|&v| (v - c0).abs() > 1e-10) {
            return Err(Error::Model("φ_0 is not the normalized constant".into()));
        }
        let g = self.gram_residual();
        if g > 1e-10 {
            return Err(Error::Model(format!("weighted Gram residual {g:e}")));
        }
        Ok(())
    }

    fn torus_shape(&self) -> (usize, usize) {
        match self.kind {
            ModelKind::Torus { m, .. } => (m, self.n_intrinsic),
            _ => unreachable!("torus_shape on non-torus model"),
        }
    }
}
