//! Heat kernel, centered heat kernel and Green function of a spectral model.
//!
//! Kernels are node×node matrices acting through the weighted product,
//! `(Ku)_i = Σ_j w_j K(i,j) u_j`, and are assembled as exact spectral sums:
//!
//! ```text
//! H(t)  = Σ_k e^{−λ_k t} φ_k φ_kᵀ
//! G(t)  = H(t) − 1/vol = Σ_{k≥1} e^{−λ_k t} φ_k φ_kᵀ
//! G₀    = Σ_{k≥1} φ_k φ_kᵀ / λ_k
//! ```

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::constants::c0;
use crate::error::{Error, Result};
use crate::model::{ScalarField, SpectralModel};
use crate::record::VerificationRecord;

pub const KERNEL_MAGIC: &[u8; 5] = b"NMPK1";

/// Relative size below which `λ_1` is treated as zero.
const LAMBDA1_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum KernelKind {
    Heat(f64),
    Centered(f64),
    Green,
}

impl KernelKind {
    fn code(self) -> (f64, f64) {
        match self {
            KernelKind::Heat(t) => (0.0, t),
            KernelKind::Centered(t) => (1.0, t),
            KernelKind::Green => (2.0, 0.0),
        }
    }

    pub fn time(self) -> Option<f64> {
        match self {
            KernelKind::Heat(t) | KernelKind::Centered(t) => Some(t),
            KernelKind::Green => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub model: String,
    pub kind: KernelKind,
    pub matrix: DMatrix<f64>,
}

impl KernelMatrix {
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    /// `max |K − Kᵀ|`.
    pub fn symmetry_residual(&self) -> f64 {
        let n = self.size();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)]).abs());
            }
        }
        worst
    }

    /// `Σ_j w_j K(i,j)` for every row.
    pub fn weighted_row_sums(&self, model: &SpectralModel) -> DVector<f64> {
        &self.matrix * &model.weights
    }

    /// Maximum deviation of the weighted row sums from 1 (heat) or 0.
    pub fn row_sum_residual(&self, model: &SpectralModel) -> f64 {
        let target = if matches!(self.kind, KernelKind::Heat(_)) { 1.0 } else { 0.0 };
        self.weighted_row_sums(model)
            .iter()
            .fold(0.0f64, |m, s| m.max((s - target).abs()))
    }

    pub fn check_invariants(&self, model: &SpectralModel) -> Result<()> {
        let sym = self.symmetry_residual();
        if sym > 1e-10 {
            return Err(Error::Numerical(format!("kernel asymmetry {sym:e}")));
        }
        let rows = self.row_sum_residual(model);
        if rows > 1e-9 {
            return Err(Error::Numerical(format!("kernel row-sum residual {rows:e}")));
        }
        Ok(())
    }

    /// `(Ku)_i = Σ_j w_j K(i,j) u_j`.
    pub fn apply(&self, model: &SpectralModel, u: &ScalarField) -> ScalarField {
        let wu = model.weights.component_mul(&u.as_dvector());
        ScalarField::from(&self.matrix * wu)
    }

    /// Smallest entry with `i ≠ j`, with its position.
    pub fn min_off_diagonal(&self) -> (f64, usize, usize) {
        let n = self.size();
        let mut best = (f64::INFINITY, 0, 0);
        for i in 0..n {
            for j in 0..n {
                if i != j && self.matrix[(i, j)] < best.0 {
                    best = (self.matrix[(i, j)], i, j);
                }
            }
        }
        best
    }

    pub fn min_entry(&self) -> f64 {
        self.matrix.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn diagonal(&self) -> DVector<f64> {
        self.matrix.diagonal()
    }

    /// Writes the `NMPK1` block: magic, then little-endian `f64` values for
    /// the node count, a kind code (0 heat, 1 centered, 2 Green), the time
    /// (0 for Green) and the matrix in row-major order.
    pub fn write_nmpk1(&self, path: &Path) -> Result<()> {
        let n = self.size();
        let mut buf = Vec::with_capacity(5 + 8 * (3 + n * n));
        buf.extend_from_slice(KERNEL_MAGIC);
        let (code, t) = self.kind.code();
        let mut put = |v: f64| buf.extend_from_slice(&v.to_le_bytes());
        put(n as f64);
        put(code);
        put(t);
        for i in 0..n {
            for j in 0..n {
                put(self.matrix[(i, j)]);
            }
        }
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn read_nmpk1(path: &Path, model_label: &str) -> Result<KernelMatrix> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() < 5 || &bytes[..5] != KERNEL_MAGIC || (bytes.len() - 5) % 8 != 0 {
            return Err(Error::Parse(format!("{} is not an NMPK1 file", path.display())));
        }
        let vals: Vec<f64> = bytes[5..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        if vals.len() < 3 {
            return Err(Error::Parse("truncated NMPK1 header".into()));
        }
        let n = vals[0] as usize;
        if vals.len() != 3 + n * n {
            return Err(Error::Parse(format!("NMPK1 payload does not hold a {n}×{n} matrix")));
        }
        let kind = match vals[1] as i64 {
            0 => KernelKind::Heat(vals[2]),
            1 => KernelKind::Centered(vals[2]),
            2 => KernelKind::Green,
            c => return Err(Error::Parse(format!("unknown NMPK1 kind code {c}"))),
        };
        Ok(KernelMatrix {
            model: model_label.to_string(),
            kind,
            matrix: DMatrix::from_row_slice(n, n, &vals[3..]),
        })
    }
}

/// `Φ diag(d) Φᵀ`, symmetrized to remove rounding asymmetry.
fn spectral_sum(model: &SpectralModel, d: impl Fn(usize, f64) -> f64) -> DMatrix<f64> {
    let phi = &model.eigenbasis;
    let mut scaled = phi.clone();
    for (k, &lam) in model.eigenvalues.iter().enumerate() {
        scaled.column_mut(k).scale_mut(d(k, lam));
    }
    let m = scaled * phi.transpose();
    (&m + m.transpose()) * 0.5
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Usage(format!("kernel time must be positive and finite, got {t}")));
    }
    Ok(())
}

fn check_lambda1(model: &SpectralModel) -> Result<()> {
    let scale = model.eigenvalues.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if model.mode_count() < 2 || !(model.lambda1() > LAMBDA1_FLOOR * scale) {
        return Err(Error::Model(format!(
            "Green function needs λ_1 > 0, model {} has λ_1 = {:e}",
            model.label,
            model.lambda1()
        )));
    }
    Ok(())
}

pub fn heat_kernel(model: &SpectralModel, t: f64) -> Result<KernelMatrix> {
    check_time(t)?;
    Ok(KernelMatrix {
        model: model.label.clone(),
        kind: KernelKind::Heat(t),
        matrix: spectral_sum(model, |_, lam| (-lam * t).exp()),
    })
}

/// `G(t) = H(t) − 1/vol`, built from the modes `k ≥ 1` so that it does not
/// suffer cancellation at large `t`.
pub fn centered_kernel(model: &SpectralModel, t: f64) -> Result<KernelMatrix> {
    check_time(t)?;
    Ok(KernelMatrix {
        model: model.label.clone(),
        kind: KernelKind::Centered(t),
        matrix: spectral_sum(model, |k, lam| if k == 0 { 0.0 } else { (-lam * t).exp() }),
    })
}

pub fn green_function(model: &SpectralModel) -> Result<KernelMatrix> {
    check_lambda1(model)?;
    Ok(KernelMatrix {
        model: model.label.clone(),
        kind: KernelKind::Green,
        matrix: spectral_sum(model, |k, lam| if k == 0 { 0.0 } else { 1.0 / lam }),
    })
}

/// Composite Gauss–Legendre rule for `∫₀^{t_max} G(t) dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureRule {
    pub t_max: f64,
    pub panels: usize,
    /// Points per panel; 1 is the midpoint rule.
    pub order: usize,
    /// Add the exact remainder `Σ e^{−λ_k t_max}/λ_k φ_kφ_kᵀ`.
    pub include_tail: bool,
    /// Fail when the a-priori error bound exceeds this.
    pub tolerance: Option<f64>,
}

impl QuadratureRule {
    pub fn new(t_max: f64, panels: usize) -> Self {
        QuadratureRule {
            t_max,
            panels,
            order: 4,
            include_tail: true,
            tolerance: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TimeIntegralGreen {
    pub kernel: KernelMatrix,
    /// Bound on the max-abs entrywise deviation from the exact `G₀`.
    pub error_bound: f64,
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; q];
    let mut w = vec![0.0; q];
    for i in 0..q {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // three-term recurrence for P_q(z) and P_{q−1}(z)
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=q {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = q as f64 * (z * p1 - p0) / (z * z - 1.0);
            let step = p1 / dp;
            z -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// `(q!)⁴ / ((2q+1) ((2q)!)³)`, the Gauss–Legendre error constant.
fn gl_error_constant(q: usize) -> f64 {
    let fact = |m: usize| (1..=m).fold(1.0f64, |a, b| a * b as f64);
    fact(q).powi(4) / ((2 * q + 1) as f64 * fact(2 * q).powi(3))
}

/// `G₀ ≈ ∫₀^{t_max} G(t) dt (+ exact tail)`, integrated mode by mode.
///
/// Per mode the composite rule on panels of width `h` misses at most
/// `c_q (λh)^{2q} (h + 1/λ)`, which is turned into an entrywise bound with
/// `max_i φ_k(i)²`.
pub fn green_by_time_integral(model: &SpectralModel, rule: &QuadratureRule) -> Result<TimeIntegralGreen> {
    check_lambda1(model)?;
    if !(rule.t_max > 0.0) || rule.panels == 0 || rule.order == 0 || rule.order > 32 {
        return Err(Error::Usage(format!(
            "quadrature needs t_max > 0, panels ≥ 1 and 1 ≤ order ≤ 32, got {rule:?}"
        )));
    }
    let (gx, gw) = gauss_legendre(rule.order);
    let h = rule.t_max / rule.panels as f64;
    let cq = gl_error_constant(rule.order);
    let k_modes = model.mode_count();
    let mut coeff = vec![0.0; k_modes];
    let mut bound = 0.0;
    for (k, c) in coeff.iter_mut().enumerate().skip(1) {
        let lam = model.eigenvalues[k];
        let mut s = 0.0;
        for p in 0..rule.panels {
            let a = p as f64 * h;
            for (x, w) in gx.iter().zip(&gw) {
                s += 0.5 * h * w * (-lam * (a + 0.5 * h * (x + 1.0))).exp();
            }
        }
        let tail = (-lam * rule.t_max).exp() / lam;
        let mut err = cq * (lam * h).powi(2 * rule.order as i32) * (h + 1.0 / lam);
        if rule.include_tail {
            s += tail;
        } else {
            err += tail;
        }
        *c = s;
        let peak = model.eigenbasis.column(k).iter().fold(0.0f64, |m, v| m.max(v * v));
        bound += err * peak;
    }
    if let Some(tol) = rule.tolerance {
        if bound > tol {
            return Err(Error::Numerical(format!(
                "quadrature error bound {bound:e} exceeds tolerance {tol:e}; use more panels"
            )));
        }
    }
    Ok(TimeIntegralGreen {
        kernel: KernelMatrix {
            model: model.label.clone(),
            kind: KernelKind::Green,
            matrix: spectral_sum(model, |k, _| coeff[k]),
        },
        error_bound: bound,
    })
}

/// Max-abs residuals of the kernel identities at times `t, s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelIdentityReport {
    pub t: f64,
    pub s: f64,
    /// `max |G(s) W G(t) − G(t+s)|`.
    pub semigroup: f64,
    /// `max_x |G(x,x,t) − Σ_y w_y G(x,y,t/2)²|`.
    pub square_formula: f64,
    pub symmetry: f64,
    /// `max_x |Σ_y w_y G(x,y,t)|`.
    pub centering: f64,
    /// Largest increase of `G(x,x,·)` between consecutive times of the grid.
    pub diagonal_increase: f64,
    pub diagonal_grid: Vec<f64>,
}

impl KernelIdentityReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.semigroup <= tol
            && self.square_formula <= tol
            && self.symmetry <= tol
            && self.centering <= tol
            && self.diagonal_increase <= 1e-12
    }
}

/// Geometric time grid used for the monotonicity of the diagonal.
pub fn diagonal_time_grid(t: f64) -> Vec<f64> {
    (0..=16).map(|i| t * 0.05 * 20f64.powf(2.0 * i as f64 / 16.0)).collect()
}

pub fn kernel_identities(model: &SpectralModel, t: f64, s: f64) -> Result<KernelIdentityReport> {
    check_time(t)?;
    check_time(s)?;
    let gt = centered_kernel(model, t)?;
    let gs = centered_kernel(model, s)?;
    let gts = centered_kernel(model, t + s)?;
    let mut ws = gs.matrix.clone();
    for (j, w) in model.weights.iter().enumerate() {
        ws.column_mut(j).scale_mut(*w);
    }
    let semigroup = (ws * &gt.matrix - &gts.matrix).amax();

    let half = centered_kernel(model, t / 2.0)?;
    let n = model.node_count();
    let square_formula = (0..n)
        .map(|x| {
            let sq: f64 = (0..n).map(|y| model.weights[y] * half.matrix[(x, y)].powi(2)).sum();
            (gt.matrix[(x, x)] - sq).abs()
        })
        .fold(0.0f64, f64::max);

    let grid = diagonal_time_grid(t);
    let diag_at = |tau: f64| -> Vec<f64> {
        (0..n)
            .map(|x| {
                (1..model.mode_count())
                    .map(|k| (-model.eigenvalues[k] * tau).exp() * model.eigenbasis[(x, k)].powi(2))
                    .sum()
            })
            .collect()
    };
    let diags: Vec<Vec<f64>> = grid.iter().map(|&tau| diag_at(tau)).collect();
    let mut diagonal_increase = f64::NEG_INFINITY;
    for pair in diags.windows(2) {
        for (a, b) in pair[0].iter().zip(&pair[1]) {
            diagonal_increase = diagonal_increase.max(b - a);
        }
    }

    Ok(KernelIdentityReport {
        t,
        s,
        semigroup,
        square_formula,
        symmetry: gt.symmetry_residual(),
        centering: gt.row_sum_residual(model),
        diagonal_increase,
        diagonal_grid: grid,
    })
}

/// `min_{i≠j} G₀(i,j) ≥ −C₀(n) C*² / vol`, recorded as
/// `−min G₀ ≤ C₀(n) C*²/vol`.
pub fn green_lower_bound_check(model: &SpectralModel, cstar: f64, provenance: &str) -> Result<VerificationRecord> {
    let g0 = green_function(model)?;
    green_lower_bound_record(model, &g0, cstar, provenance)
}

pub fn green_lower_bound_record(
    model: &SpectralModel,
    g0: &KernelMatrix,
    cstar: f64,
    provenance: &str,
) -> Result<VerificationRecord> {
    if !(cstar > 0.0) || !cstar.is_finite() {
        return Err(Error::Usage(format!("C* must be positive, got {cstar}")));
    }
    let c0n = c0(model.n_intrinsic)?;
    let (min_g, i, j) = g0.min_off_diagonal();
    let rhs = c0n * cstar * cstar / model.volume;
    Ok(VerificationRecord::inequality("green_lower_bound", &model.label, -min_g, rhs, 0.0)
        .with_cstar(cstar, provenance)
        .with_detail("min_g0", min_g)
        .with_detail("argmin_i", i as f64)
        .with_detail("argmin_j", j as f64)
        .with_detail("c0n", c0n)
        .with_detail("volume", model.volume))
}
