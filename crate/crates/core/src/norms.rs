//! Volume-normalized norms and the pointwise vocabulary used by the
//! maximum-principle estimates.
//!
//! `‖u‖*_p = ((1/vol) Σ w_i |u_i|^p)^{1/p}` so that constants have norm equal
//! to their absolute value. The essential supremum of a node function is its
//! node maximum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ScalarField, SpectralModel, VectorField};

/// Exponent of a norm evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub p: Exponent,
    pub starred: bool,
    pub value: f64,
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Usage(format!("norm exponent must be finite and ≥ 1, got {p}")));
    }
    Ok(())
}

/// `u_M = (Σ w u)/vol`.
pub fn average(model: &SpectralModel, u: &ScalarField) -> f64 {
    model.integrate(u) / model.volume
}

fn star_of_abs(model: &SpectralModel, abs_vals: impl Iterator<Item = f64>, p: f64) -> f64 {
    // factor out the max to keep |u|^p finite for large p
    let vals: Vec<f64> = abs_vals.collect();
    let top = vals.iter().fold(0.0f64, |m, &v| m.max(v));
    if top == 0.0 {
        return 0.0;
    }
    let s: f64 = model
        .weights
        .iter()
        .zip(&vals)
        .map(|(w, v)| w * (v / top).powf(p))
        .sum();
    top * (s / model.volume).powf(1.0 / p)
}

pub fn norm_star(model: &SpectralModel, u: &ScalarField, p: f64) -> Result<f64> {
    check_exponent(p)?;
    model.check_field(u)?;
    Ok(star_of_abs(model, u.values.iter().map(|v| v.abs()), p))
}

/// Starred norm of the pointwise Euclidean length `|Φ|`.
pub fn norm_star_vec(model: &SpectralModel, phi: &VectorField, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if phi.dim() == 0 {
        return Ok(0.0);
    }
    model.check_vector(phi)?;
    let len = phi.pointwise_norm(model.node_count());
    Ok(star_of_abs(model, len.values.into_iter(), p))
}

pub fn norm_report(model: &SpectralModel, u: &ScalarField, p: Exponent) -> Result<NormReport> {
    let value = match p {
        Exponent::Finite(p) => norm_star(model, u, p)?,
        Exponent::Infinity => u.max_abs(),
    };
    Ok(NormReport { p, starred: true, value })
}

/// `(u⁺, u⁻)` with `u⁺ = max{u, 0}` and `u⁻ = min{u, 0}`.
pub fn pos_neg_parts(u: &ScalarField) -> (ScalarField, ScalarField) {
    (u.map(|v| v.max(0.0)), u.map(|v| v.min(0.0)))
}

/// Node maximum.
pub fn ess_sup(u: &ScalarField) -> f64 {
    u.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn ess_inf(u: &ScalarField) -> f64 {
    u.values.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Both sides of the starred Hölder inequality `‖f₁f₂‖*₁ ≤ ‖f₁‖*_p ‖f₂‖*_q`.
pub fn holder_star(
    model: &SpectralModel,
    f1: &ScalarField,
    f2: &ScalarField,
    p: f64,
    q: f64,
) -> Result<(f64, f64)> {
    check_exponent(p)?;
    check_exponent(q)?;
    if (1.0 / p + 1.0 / q - 1.0).abs() > 1e-12 {
        return Err(Error::Usage(format!("exponents {p} and {q} are not conjugate")));
    }
    let prod = f1.zip_map(f2, |a, b| a * b);
    let lhs = norm_star(model, &prod, 1.0)?;
    let rhs = norm_star(model, f1, p)? * norm_star(model, f2, q)?;
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use proptest::prelude::*;

    use super::*;
    use crate::model::build_torus;

    fn t3() -> SpectralModel {
        build_torus(3, 8, 1.0).unwrap()
    }

    fn sin_x1(model: &SpectralModel) -> ScalarField {
        ScalarField::new(model.nodes.iter().map(|x| (2.0 * PI * x[0]).sin()).collect())
    }

    #[test]
    fn average_examples() {
        let m = t3();
        let n = m.node_count();
        assert_eq!(average(&m, &ScalarField::constant(n, 2.5)), 2.5);
        assert!(average(&m, &m.mode(1)).abs() < 1e-10);
        let u = sin_x1(&m).shift(2.0);
        assert!((average(&m, &u) - 2.0).abs() < 1e-10);
    }

    #[test]
    fn norm_star_examples() {
        let m = t3();
        let n = m.node_count();
        for p in [1.0, 2.0, 3.7, 10.0] {
            assert!((norm_star(&m, &ScalarField::constant(n, -1.5), p).unwrap() - 1.5).abs() < 1e-14);
        }
        let one = m.mode(0).scale(m.volume.sqrt());
        assert!((norm_star(&m, &one, 2.0).unwrap() - 1.0).abs() < 1e-14);
        let s = norm_star(&m, &sin_x1(&m), 2.0).unwrap();
        assert!((s - 0.5f64.sqrt()).abs() < 1e-10);
        assert!(matches!(norm_star(&m, &one, 0.5), Err(Error::Usage(_))));
    }

    #[test]
    fn norm_star_vec_examples() {
        let m = t3();
        assert_eq!(norm_star_vec(&m, &VectorField::zeros(&m), 2.0).unwrap(), 0.0);
        let g = m.gradient(&sin_x1(&m)).unwrap();
        let v = norm_star_vec(&m, &g, 2.0).unwrap();
        assert!((v - 2.0 * PI / 2f64.sqrt()).abs() < 1e-8);
        // |Φ| ≡ 5 via components (3, 4, 0)
        let n = m.node_count();
        let phi = VectorField::new(vec![vec![3.0; n], vec![4.0; n], vec![0.0; n]]);
        for p in [1.0, 2.0, 7.5] {
            assert!((norm_star_vec(&m, &phi, p).unwrap() - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pos_neg_examples() {
        let m = t3();
        let n = m.node_count();
        let (p, q) = pos_neg_parts(&ScalarField::constant(n, -3.0));
        assert_eq!(p.max_abs(), 0.0);
        assert!(q.values.iter().all(|&v| v == -3.0));
        let (p, q) = pos_neg_parts(&ScalarField::constant(n, 5.0));
        assert!(p.values.iter().all(|&v| v == 5.0));
        assert_eq!(q.max_abs(), 0.0);
    }

    #[test]
    fn sine_parts_have_l1_norm_one_over_pi() {
        let m = build_torus(3, 16, 1.0).unwrap();
        let (p, q) = pos_neg_parts(&sin_x1(&m));
        let a = norm_star(&m, &p, 1.0).unwrap();
        let b = norm_star(&m, &q, 1.0).unwrap();
        assert!((a - b).abs() < 1e-12);
        // the node average is the periodic trapezoid rule along x₁; the kink
        // makes it converge like h², so 1/π is reached on a refined 1-D grid
        let grid = |mm: usize| -> f64 {
            (0..mm).map(|j| (2.0 * PI * j as f64 / mm as f64).sin().max(0.0)).sum::<f64>() / mm as f64
        };
        assert!((grid(16) - a).abs() < 1e-12);
        assert!((grid(1 << 14) - 1.0 / PI).abs() < 1e-6);
    }

    #[test]
    fn ess_sup_examples() {
        let m = t3();
        let n = m.node_count();
        assert_eq!(ess_sup(&ScalarField::constant(n, 4.0)), 4.0);
        let phi1 = m.mode(1);
        assert!((ess_sup(&phi1) + ess_inf(&phi1)).abs() < 1e-9);
        let (pos, _) = pos_neg_parts(&ScalarField::constant(n, -2.0));
        assert_eq!(ess_sup(&pos), 0.0);
    }

    #[test]
    fn holder_examples() {
        let m = t3();
        let n = m.node_count();
        let one = ScalarField::constant(n, 1.0);
        let (l, r) = holder_star(&m, &one, &one, 2.0, 2.0).unwrap();
        assert!((l - 1.0).abs() < 1e-14 && (r - 1.0).abs() < 1e-14);
        let a = m.mode(1).map(f64::abs);
        let (l, r) = holder_star(&m, &a, &a, 2.0, 2.0).unwrap();
        assert!((l - r).abs() < 1e-10);
        assert!(matches!(holder_star(&m, &a, &a, 2.0, 3.0), Err(Error::Usage(_))));
    }

    fn random_field(seed: u64, n: usize) -> ScalarField {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        ScalarField::new((0..n).map(|_| rng.random_range(-3.0..3.0)).collect())
    }

    #[test]
    fn holder_random_fields() {
        let m = t3();
        for seed in 0..100 {
            let f1 = random_field(seed, m.node_count());
            let f2 = random_field(seed + 1000, m.node_count());
            let (l, r) = holder_star(&m, &f1, &f2, 3.0, 1.5).unwrap();
            assert!(l <= r + 1e-12, "seed {seed}: {l} > {r}");
        }
    }

    #[test]
    fn high_exponent_approaches_sup() {
        let m = t3();
        let u = m.mode(1).add(&m.mode(2).scale(0.5));
        let s = u.max_abs();
        let n64 = norm_star(&m, &u, 64.0).unwrap();
        assert!(n64 <= s && n64 > 0.95 * s);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn starred_norm_is_monotone_in_exponent(seed in 0u64..10_000, q in 1.0f64..8.0, dp in 0.0f64..4.0) {
            let m = build_torus(3, 4, 1.0).unwrap();
            let u = random_field(seed, m.node_count());
            let p = (q + dp).min(8.0);
            prop_assert!(norm_star(&m, &u, q).unwrap() <= norm_star(&m, &u, p).unwrap() + 1e-12);
        }

        #[test]
        fn starred_norm_is_homogeneous(seed in 0u64..10_000, c in -5.0f64..5.0, p in 1.0f64..6.0) {
            let m = build_torus(3, 4, 1.0).unwrap();
            let u = random_field(seed, m.node_count());
            let lhs = norm_star(&m, &u.scale(c), p).unwrap();
            let rhs = c.abs() * norm_star(&m, &u, p).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
        }
    }
}
