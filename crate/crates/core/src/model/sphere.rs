use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::{GradientOp, ModelKind, SpectralModel};
use crate::error::{Error, Result};

pub const MIN_M_THETA: usize = 16;

fn midpoints(m_theta: usize) -> (Vec<f64>, f64) {
    let dt = PI / m_theta as f64;
    ((0..m_theta).map(|j| (j as f64 + 0.5) * dt).collect(), dt)
}

/// Midpoint-rule volume `Σ 4π sin²θ_j Δθ` before renormalization.
pub fn zonal_quadrature_volume(m_theta: usize) -> f64 {
    let (theta, dt) = midpoints(m_theta);
    theta.iter().map(|t| 4.0 * PI * t.sin().powi(2) * dt).sum()
}

/// Zonal (rotationally symmetric about a pole) functions on the unit S³.
///
/// Nodes are θ-cell midpoints with weights `4π sin²θ Δθ`; the basis is
/// `sin((k+1)θ)/(sinθ √(2π²))`, `k = 0..m_theta−2`, with eigenvalues
/// `k(k+2)`. The top sampled mode is left out because the midpoint rule
/// cannot integrate its gradient pairing exactly; the remaining sampled
/// functions are re-orthonormalized under the discrete weights, carrying
/// their θ-derivatives along.
pub fn build_zonal_sphere3(m_theta: usize) -> Result<SpectralModel> {
    if m_theta < MIN_M_THETA {
        return Err(Error::Usage(format!(
            "m_theta must be at least {MIN_M_THETA}, got {m_theta}"
        )));
    }
    let (theta, dt) = midpoints(m_theta);
    let target = 2.0 * PI * PI;
    let raw: Vec<f64> = theta.iter().map(|t| 4.0 * PI * t.sin().powi(2) * dt).collect();
    let scale = target / raw.iter().sum::<f64>();
    let weights = DVector::from_iterator(m_theta, raw.iter().map(|w| w * scale));

    let k_modes = m_theta - 1;
    let norm = target.sqrt();
    let mut basis = DMatrix::zeros(m_theta, k_modes);
    let mut dbasis = DMatrix::zeros(m_theta, k_modes);
    for (j, &t) in theta.iter().enumerate() {
        let (s, c) = t.sin_cos();
        for k in 0..k_modes {
            let a = (k + 1) as f64;
            let (sa, ca) = (a * t).sin_cos();
            basis[(j, k)] = sa / (s * norm);
            dbasis[(j, k)] = (a * ca * s - sa * c) / (s * s * norm);
        }
    }

    // modified Gram–Schmidt under the weighted inner product
    let winner = |a: &DMatrix<f64>, p: usize, q: usize| -> f64 {
        (0..m_theta).map(|j| weights[j] * a[(j, p)] * a[(j, q)]).sum()
    };
    for k in 0..k_modes {
        for l in 0..k {
            let r = winner(&basis, k, l);
            for j in 0..m_theta {
                basis[(j, k)] -= r * basis[(j, l)];
                dbasis[(j, k)] -= r * dbasis[(j, l)];
            }
        }
        let nrm = winner(&basis, k, k).sqrt();
        if !(nrm > 1e-8) {
            return Err(Error::Numerical(format!("zonal mode {k} collapsed under re-orthonormalization")));
        }
        for j in 0..m_theta {
            basis[(j, k)] /= nrm;
            dbasis[(j, k)] /= nrm;
        }
    }
    basis.column_mut(0).fill(target.powf(-0.5));
    dbasis.column_mut(0).fill(0.0);

    Ok(SpectralModel {
        label: format!("sphere3:{m_theta}"),
        n_intrinsic: 3,
        nodes: theta.iter().map(|&t| vec![t]).collect(),
        weights,
        eigenvalues: DVector::from_iterator(k_modes, (0..k_modes).map(|k| (k * (k + 2)) as f64)),
        eigenbasis: basis,
        volume: target,
        diameter: Some(PI),
        kind: ModelKind::ZonalSphere3 { m_theta },
        grad: GradientOp::Zonal { dbasis },
    })
}

/// Rebuilds the derivative operator for a cached zonal eigenbasis.
pub(crate) fn zonal_gradient_op(model_basis: &DMatrix<f64>, weights: &DVector<f64>) -> GradientOp {
    let m_theta = model_basis.nrows();
    let k_modes = model_basis.ncols();
    let (theta, _) = midpoints(m_theta);
    let norm = (2.0 * PI * PI).sqrt();
    let mut raw = DMatrix::zeros(m_theta, k_modes);
    let mut draw = DMatrix::zeros(m_theta, k_modes);
    for (j, &t) in theta.iter().enumerate() {
        let (s, c) = t.sin_cos();
        for k in 0..k_modes {
            let a = (k + 1) as f64;
            let (sa, ca) = (a * t).sin_cos();
            raw[(j, k)] = sa / (s * norm);
            draw[(j, k)] = (a * ca * s - sa * c) / (s * s * norm);
        }
    }
    // the sampled functions are weighted-orthonormal, so rawᵀWΦ is the
    // change of basis from the analytic to the stored columns
    let mut wbasis = model_basis.clone();
    for (i, w) in weights.iter().enumerate() {
        wbasis.row_mut(i).scale_mut(*w);
    }
    let t = raw.tr_mul(&wbasis);
    GradientOp::Zonal { dbasis: draw * t }
}
