//! Explicit constants of the Moser-iteration maximum principle and the
//! Green-function lower bound.
//!
//! Everything depends only on the dimension `n ≥ 3`, the exponent `p > n/2`
//! and the volume-normalized isoperimetric constant `C*`:
//!
//! ```text
//! C₁   = 2(n−1)/(n−2) · C*
//! γ₀   = 1 + (n(p−2) + 2p)/((n−2)p),   r = n(p−1)/((n−2)p),   γ_k = γ₀ r^k
//! A_γ  = C* (n−1)(γ+1)/(n−2) · √((γ+2)/γ)
//! A    = Π_{i≥1} (A_{γ_i−1} + √2)^{2/γ_i}
//! C₂   = A C₁ [1 + 2 max{C₁, 1}(C₁ + √2)]
//! C₀(n)= 8n²(n−1)²/(n−2)³ · ((n−2)/2)^{4/n}
//! ```
//!
//! The infinite product is truncated once a closed-form bound on the
//! remaining part of `log A` drops below the requested tolerance.

use std::f64::consts::SQRT_2;

use serde::Serialize;

use crate::error::{Error, Result};

/// Hard stop for the product truncation search.
const MAX_PRODUCT_TERMS: usize = 1_000_000;

fn check_n(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::Usage(format!("dimension must be at least 3, got {n}")));
    }
    Ok(())
}

fn check_np(n: usize, p: f64) -> Result<()> {
    check_n(n)?;
    if !(p > n as f64 / 2.0) || !p.is_finite() {
        return Err(Error::Usage(format!("exponent p must exceed n/2 = {}, got {p}", n as f64 / 2.0)));
    }
    Ok(())
}

fn check_cstar(cstar: f64) -> Result<()> {
    if !(cstar >= 0.0) || !cstar.is_finite() {
        return Err(Error::Usage(format!("C* must be finite and nonnegative, got {cstar}")));
    }
    Ok(())
}

/// Green-function lower-bound constant `C₀(n)`.
pub fn c0(n: usize) -> Result<f64> {
    check_n(n)?;
    let nf = n as f64;
    let lead = 8.0 * nf * nf * (nf - 1.0).powi(2) / (nf - 2.0).powi(3);
    Ok(lead * ((nf - 2.0) / 2.0).powf(4.0 / nf))
}

/// `C₁ = 2(n−1)/(n−2) · C*`.
pub fn c1(n: usize, cstar: f64) -> Result<f64> {
    check_n(n)?;
    check_cstar(cstar)?;
    let nf = n as f64;
    Ok(2.0 * (nf - 1.0) / (nf - 2.0) * cstar)
}

/// The exponent ladder `γ_k = γ₀ r^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaSchedule {
    pub n: usize,
    pub p: f64,
    pub gamma0: f64,
    pub ratio: f64,
}

impl GammaSchedule {
    pub fn gamma(&self, k: usize) -> f64 {
        self.gamma0 * self.ratio.powi(k as i32)
    }

    /// `|γ₀ p/(p−1) − 2n/(n−2)|`; zero up to rounding.
    pub fn identity_residual(&self) -> f64 {
        let nf = self.n as f64;
        (self.gamma0 * self.p / (self.p - 1.0) - 2.0 * nf / (nf - 2.0)).abs()
    }
}

pub fn gamma_schedule(n: usize, p: f64) -> Result<GammaSchedule> {
    check_np(n, p)?;
    let nf = n as f64;
    let gamma0 = 1.0 + (nf * (p - 2.0) + 2.0 * p) / ((nf - 2.0) * p);
    let ratio = nf * (p - 1.0) / ((nf - 2.0) * p);
    Ok(GammaSchedule { n, p, gamma0, ratio })
}

/// `A_γ = C* (n−1)(γ+1)/(n−2) · √((γ+2)/γ)`, defined for `γ ≥ 1`.
pub fn a_gamma(n: usize, cstar: f64, gamma: f64) -> Result<f64> {
    check_n(n)?;
    check_cstar(cstar)?;
    if !(gamma >= 1.0) {
        return Err(Error::Usage(format!("A_γ needs γ ≥ 1, got {gamma}")));
    }
    let nf = n as f64;
    Ok(cstar * (nf - 1.0) * (gamma + 1.0) / (nf - 2.0) * ((gamma + 2.0) / gamma).sqrt())
}

/// Truncated value of the infinite product `A` with a certified remainder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProductA {
    /// `exp` of the partial sum of `log A`; a lower bound for `A`.
    pub value: f64,
    pub log_partial: f64,
    /// Upper bound on `log A − log_partial`.
    pub tail_bound: f64,
    /// Number of factors `i = 1..=terms` included.
    pub terms: usize,
}

impl ProductA {
    /// `A` is certified to lie in `[lower, upper]`.
    pub fn upper(&self) -> f64 {
        (self.log_partial + self.tail_bound).exp()
    }
}

/// Closed-form bound on `Σ_{i>k} (2/γ_i) log(A_{γ_i−1} + √2)`.
///
/// For `γ ≥ 2`, `(γ+1)/(γ−1) ≤ 3`, so `A_{γ−1} ≤ c γ` with
/// `c = C*(n−1)√3/(n−2)`, and `log(cγ + √2) ≤ log(c + √2) + log γ`. With
/// `x = 1/r` the remaining geometric and arithmetic-geometric series are
/// summed exactly.
pub fn product_tail_bound(sched: &GammaSchedule, cstar: f64, k: usize) -> f64 {
    let nf = sched.n as f64;
    let c = (cstar * (nf - 1.0) * 3f64.sqrt() / (nf - 2.0) + SQRT_2).ln();
    let x = 1.0 / sched.ratio;
    let xk1 = x.powi(k as i32 + 1);
    let kf = k as f64;
    let geo = xk1 / (1.0 - x);
    let arith = xk1 * ((kf + 1.0) - kf * x) / (1.0 - x).powi(2);
    2.0 / sched.gamma0 * ((c + sched.gamma0.ln()) * geo + sched.ratio.ln() * arith)
}

pub fn product_a(n: usize, p: f64, cstar: f64, tol: f64) -> Result<ProductA> {
    check_cstar(cstar)?;
    if !(tol > 0.0) {
        return Err(Error::Usage(format!("tolerance must be positive, got {tol}")));
    }
    let sched = gamma_schedule(n, p)?;
    let mut log_partial = 0.0f64;
    let mut k = 0;
    loop {
        let tail = product_tail_bound(&sched, cstar, k);
        if !tail.is_finite() {
            return Err(Error::Numerical(format!("tail bound not finite after {k} terms")));
        }
        if tail <= tol {
            return Ok(ProductA {
                value: log_partial.exp(),
                log_partial,
                tail_bound: tail,
                terms: k,
            });
        }
        if k >= MAX_PRODUCT_TERMS {
            return Err(Error::Numerical(format!(
                "product tail {tail:e} still above {tol:e} after {k} terms"
            )));
        }
        k += 1;
        let g = sched.gamma(k);
        if !g.is_finite() || g.recip() == 0.0 {
            return Err(Error::Numerical(format!("γ_{k} overflowed before reaching tolerance {tol:e}")));
        }
        log_partial += 2.0 / g * (a_gamma(n, cstar, g - 1.0)? + SQRT_2).ln();
    }
}

/// All constants for one `(n, p, C*)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantSet {
    pub n: usize,
    pub p: f64,
    pub cstar: f64,
    pub c1: f64,
    pub gamma0: f64,
    pub ratio: f64,
    pub a: f64,
    pub a_tail_bound: f64,
    pub a_terms: usize,
    pub c2: f64,
    pub c0n: f64,
    /// Coefficient of `‖f⁻‖*_p`: `C₀(n) C*² + 2C₂`.
    pub coef_f: f64,
    /// Coefficient of `‖Φ‖*_{2p}`: `C₂`.
    pub coef_phi: f64,
    /// `C₀(n) C* + 2C₂`, the form without the square on `C*`; reported only.
    pub coef_f_unsquared: f64,
    /// `C* = 0` makes every constant vanish; impossible on a connected model.
    pub degenerate: bool,
}

pub fn c2_from(a: f64, c1: f64) -> f64 {
    a * c1 * (1.0 + 2.0 * c1.max(1.0) * (c1 + SQRT_2))
}

pub fn constant_set(n: usize, p: f64, cstar: f64, tol: f64) -> Result<ConstantSet> {
    let sched = gamma_schedule(n, p)?;
    let prod = product_a(n, p, cstar, tol)?;
    let c1 = c1(n, cstar)?;
    let c0n = c0(n)?;
    let c2 = c2_from(prod.value, c1);
    Ok(ConstantSet {
        n,
        p,
        cstar,
        c1,
        gamma0: sched.gamma0,
        ratio: sched.ratio,
        a: prod.value,
        a_tail_bound: prod.tail_bound,
        a_terms: prod.terms,
        c2,
        c0n,
        coef_f: c0n * cstar * cstar + 2.0 * c2,
        coef_phi: c2,
        coef_f_unsquared: c0n * cstar + 2.0 * c2,
        degenerate: cstar == 0.0,
    })
}

impl ConstantSet {
    /// Ordered key/value view used by reports and the CLI table.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("n", self.n as f64),
            ("p", self.p),
            ("cstar", self.cstar),
            ("C1", self.c1),
            ("gamma0", self.gamma0),
            ("ratio", self.ratio),
            ("A", self.a),
            ("A_tail_bound", self.a_tail_bound),
            ("A_terms", self.a_terms as f64),
            ("C2", self.c2),
            ("C0n", self.c0n),
            ("coef_f", self.coef_f),
            ("coef_phi", self.coef_phi),
            ("coef_f_unsquared", self.coef_f_unsquared),
        ]
    }
}

/// `(k, log of the partial product)` for `k = 0..=max_terms`, for plots of
/// the truncation behaviour.
pub fn product_partial_series(n: usize, p: f64, cstar: f64, max_terms: usize) -> Result<Vec<(usize, f64)>> {
    let sched = gamma_schedule(n, p)?;
    let mut out = vec![(0, 1.0)];
    let mut log_partial = 0.0;
    for k in 1..=max_terms {
        let g = sched.gamma(k);
        log_partial += 2.0 / g * (a_gamma(n, cstar, g - 1.0)? + SQRT_2).ln();
        out.push((k, log_partial.exp()));
    }
    Ok(out)
}
