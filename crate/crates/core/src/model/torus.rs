use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::{GradientOp, ModelKind, SpectralModel, TORUS_NODE_CAP};
use crate::error::{Error, Result};

/// Real Fourier basis on `m` uniform points of `[0, side)`, columns
/// normalized under the weight `side/m`.
///
/// Column order: constant, then `cos_k, sin_k` for `k = 1..m/2`, then the
/// Nyquist mode `cos(π m x / side)` (its sine vanishes on the grid).
fn basis_1d(m: usize, side: f64) -> (DMatrix<f64>, Vec<f64>) {
    let mut b = DMatrix::zeros(m, m);
    let mut freq = vec![0.0; m];
    let h = side / m as f64;
    for j in 0..m {
        let x = j as f64 * h;
        b[(j, 0)] = 1.0 / side.sqrt();
        for k in 1..m / 2 {
            let arg = 2.0 * PI * k as f64 * x / side;
            b[(j, 2 * k - 1)] = (2.0 / side).sqrt() * arg.cos();
            b[(j, 2 * k)] = (2.0 / side).sqrt() * arg.sin();
        }
        b[(j, m - 1)] = if j % 2 == 0 { 1.0 } else { -1.0 } / side.sqrt();
    }
    for k in 1..m / 2 {
        let w = 2.0 * PI * k as f64 / side;
        freq[2 * k - 1] = w;
        freq[2 * k] = w;
    }
    freq[m - 1] = PI * m as f64 / side;
    (b, freq)
}

/// Node-space 1-D derivative on the grid.
///
/// `cos_k ↦ −ω sin_k`, `sin_k ↦ ω cos_k`; the Nyquist mode is mapped to
/// `ω_nyq` times itself so that `Σ_a ∂_aᵀ ∂_a` reproduces every eigenvalue,
/// including the Nyquist one, exactly.
fn derivative_1d(b: &DMatrix<f64>, freq: &[f64], side: f64) -> DMatrix<f64> {
    let m = b.nrows();
    let mut s = DMatrix::zeros(m, m);
    for k in 1..m / 2 {
        let (c, sn) = (2 * k - 1, 2 * k);
        s[(sn, c)] = -freq[c];
        s[(c, sn)] = freq[sn];
    }
    s[(m - 1, m - 1)] = freq[m - 1];
    let h = side / m as f64;
    b * s * b.transpose() * h
}

/// Applies an m×m operator (or its transpose) along one axis of an
/// `m^n` row-major grid whose axis 0 varies slowest.
pub(crate) fn apply_axis(
    op: &DMatrix<f64>,
    values: &[f64],
    m: usize,
    n: usize,
    axis: usize,
    transpose: bool,
) -> Vec<f64> {
    let stride = m.pow((n - 1 - axis) as u32);
    let total = m.pow(n as u32);
    let mut out = vec![0.0; total];
    let mut line = vec![0.0; m];
    for base in 0..total {
        // visit each line once, from its first node
        if !(base / stride).is_multiple_of(m) {
            continue;
        }
        for (j, slot) in line.iter_mut().enumerate() {
            *slot = values[base + j * stride];
        }
        for j in 0..m {
            let mut acc = 0.0;
            for (l, v) in line.iter().enumerate() {
                let a = if transpose { op[(l, j)] } else { op[(j, l)] };
                acc += a * v;
            }
            out[base + j * stride] = acc;
        }
    }
    out
}

pub fn build_torus(n: usize, m: usize, side: f64) -> Result<SpectralModel> {
    build_torus_with_cap(n, m, side, TORUS_NODE_CAP)
}

/// Flat torus `[0, side)^n` on an `m^n` grid with the full real Fourier basis.
pub fn build_torus_with_cap(n: usize, m: usize, side: f64, cap: usize) -> Result<SpectralModel> {
    if !(3..=4).contains(&n) {
        return Err(Error::Usage(format!("torus dimension must be 3 or 4, got {n}")));
    }
    if m < 4 || !m.is_multiple_of(2) {
        return Err(Error::Usage(format!(
            "grid points per axis must be even and at least 4, got {m}"
        )));
    }
    if !(side > 0.0 && side.is_finite()) {
        return Err(Error::Usage(format!("side length must be positive, got {side}")));
    }
    let total = m
        .checked_pow(n as u32)
        .filter(|&t| t <= cap)
        .ok_or(Error::Size {
            nodes: m.saturating_pow(n as u32),
            cap,
        })?;

    let (b1, freq) = basis_1d(m, side);
    let d1 = derivative_1d(&b1, &freq, side);

    let multi = |idx: usize| -> Vec<usize> {
        let mut digits = vec![0; n];
        let mut r = idx;
        for a in (0..n).rev() {
            digits[a] = r % m;
            r /= m;
        }
        digits
    };

    let mut modes: Vec<(f64, usize)> = (0..total)
        .map(|idx| {
            let lam = multi(idx).iter().map(|&b| freq[b] * freq[b]).sum::<f64>();
            (lam, idx)
        })
        .collect();
    modes.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    // exact zero for the constant mode
    modes[0].0 = 0.0;

    let node_digits: Vec<Vec<usize>> = (0..total).map(multi).collect();
    let mode_digits: Vec<Vec<usize>> = modes.iter().map(|&(_, idx)| multi(idx)).collect();
    let eigenbasis = DMatrix::from_fn(total, total, |i, k| {
        node_digits[i]
            .iter()
            .zip(&mode_digits[k])
            .map(|(&j, &b)| b1[(j, b)])
            .product()
    });

    let h = side / m as f64;
    let cell = h.powi(n as i32);
    let volume = side.powi(n as i32);
    let nodes = node_digits
        .iter()
        .map(|d| d.iter().map(|&j| j as f64 * h).collect())
        .collect();

    let mut eigenbasis = eigenbasis;
    let c0 = volume.powf(-0.5);
    eigenbasis.column_mut(0).fill(c0);

    Ok(SpectralModel {
        label: format!("torus:{n}:{m}:{side}"),
        n_intrinsic: n,
        nodes,
        weights: DVector::from_element(total, cell),
        eigenvalues: DVector::from_iterator(total, modes.iter().map(|m| m.0)),
        eigenbasis,
        volume,
        diameter: Some(side * (n as f64).sqrt() / 2.0),
        kind: ModelKind::Torus { m, side },
        grad: GradientOp::Torus { d1 },
    })
}

pub(crate) fn torus_gradient_op(m: usize, side: f64) -> GradientOp {
    let (b1, freq) = basis_1d(m, side);
    GradientOp::Torus {
        d1: derivative_1d(&b1, &freq, side),
    }
}
