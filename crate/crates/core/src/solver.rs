//! Poisson solves, subsolution instances and the three maximum-principle
//! checks.
//!
//! An instance is `(u, f, Φ, s)` with `Δu = f + div Φ + s` and `s ≥ 0`, i.e.
//! `u` is a weak subsolution of `Δu ≥ f + div Φ`. The checks evaluate both
//! sides of
//!
//! ```text
//! moser:     sup(u−λ) ≤ A C₁(‖f⁻‖*_p + ‖Φ‖*_{2p}) + A(C₁+√2)‖(u−λ)⁺‖*₂
//! solution:  sup|u−u_M| ≤ C₂(‖f‖*_p + ‖Φ‖*_{2p})        (Δu = f + div Φ)
//! theorem A: sup u ≤ u_M + (C₀(n)C*² + 2C₂)‖f⁻‖*_p + C₂‖Φ‖*_{2p}
//! ```

use std::f64::consts::SQRT_2;

use serde::Serialize;

use crate::constants::{constant_set, ConstantSet};
use crate::error::{Error, Result};
use crate::harness::random::{random_field, random_nonnegative, random_vector_field};
use crate::harness::seeds::{fnv1a64, trial_seed};
use crate::kernels::{green_function, KernelMatrix};
use crate::model::{ScalarField, SpectralModel, VectorField};
use crate::norms::{average, ess_sup, norm_star, norm_star_vec, pos_neg_parts};
use crate::record::VerificationRecord;

/// Truncation tolerance on `log A` used by every check.
pub const PRODUCT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub model: String,
    pub u: ScalarField,
    pub f: ScalarField,
    pub phi: VectorField,
    pub slack: ScalarField,
    pub p: f64,
    /// Shift of the Moser bound.
    pub lambda: f64,
}

fn check_p(model: &SpectralModel, p: f64) -> Result<()> {
    let half = model.n_intrinsic as f64 / 2.0;
    if !(p > half) || !p.is_finite() {
        return Err(Error::Usage(format!("exponent p must exceed n/2 = {half}, got {p}")));
    }
    Ok(())
}

impl ProblemInstance {
    /// `‖Δu − f − div Φ − s‖*₂`.
    pub fn residual(&self, model: &SpectralModel) -> Result<f64> {
        let lap = model.apply_laplacian(&self.u)?;
        let div = model.divergence_or_zero(&self.phi)?;
        let r = lap.sub(&self.f).sub(&div).sub(&self.slack);
        norm_star(model, &r, 2.0)
    }

    pub fn validate(&self, model: &SpectralModel) -> Result<()> {
        check_p(model, self.p)?;
        if self.slack.values.iter().any(|&s| s < 0.0) {
            return Err(Error::Usage("slack must be nonnegative".into()));
        }
        let scale = norm_star(model, &self.f, 2.0)? + norm_star(model, &self.slack, 2.0)? + 1.0;
        let r = self.residual(model)?;
        if r > 1e-8 * scale {
            return Err(Error::Numerical(format!("instance residual {r:e} exceeds 1e-8·{scale:e}")));
        }
        Ok(())
    }

    /// Hex FNV-1a digest of the node values of `u`, `f`, `Φ` and `s`.
    pub fn digest(&self) -> String {
        let mut bytes = Vec::new();
        let comps = self.phi.components.iter();
        for vals in [&self.u.values, &self.f.values, &self.slack.values].into_iter().chain(comps) {
            for v in vals {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        bytes.extend_from_slice(&self.p.to_le_bytes());
        format!("{:016x}", fnv1a64(&bytes))
    }
}

/// `f := Δu − div Φ − s`, so that `Δu ≥ f + div Φ` with slack `s`.
/// The shift `λ` defaults to `u_M`.
pub fn generate_subsolution(
    model: &SpectralModel,
    u: &ScalarField,
    phi: &VectorField,
    slack: &ScalarField,
    p: f64,
) -> Result<ProblemInstance> {
    check_p(model, p)?;
    model.check_field(u)?;
    model.check_field(slack)?;
    if let Some(s) = slack.values.iter().find(|&&s| !(s >= 0.0)) {
        return Err(Error::Usage(format!("slack must be nonnegative, found {s}")));
    }
    let lap = model.apply_laplacian(u)?;
    let div = model.divergence_or_zero(phi)?;
    Ok(ProblemInstance {
        model: model.label.clone(),
        u: u.clone(),
        f: lap.sub(&div).sub(slack),
        phi: phi.clone(),
        slack: slack.clone(),
        p,
        lambda: average(model, u),
    })
}

/// Random instance: band-limited `u` and `Φ`; the slack is zero for even
/// seeds and `|g|/2` with `g` band-limited for odd seeds.
pub fn random_instance(model: &SpectralModel, p: f64, band_limit: usize, seed: u64) -> Result<ProblemInstance> {
    let band = band_limit.min(model.mode_count() - 1);
    let u = random_field(model, band, trial_seed(seed, "u", 0), false)?;
    let phi = random_vector_field(model, band, trial_seed(seed, "phi", 0))?;
    let slack = if seed.is_multiple_of(2) {
        ScalarField::zeros(model.node_count())
    } else {
        random_field(model, band, trial_seed(seed, "slack", 0), false)?.map(|v| 0.5 * v.abs())
    };
    generate_subsolution(model, &u, &phi, &slack, p)
}

/// Pairings `P(φ) = ∫∇u·∇φ + ∫fφ − ∫Φ·∇φ` over nonnegative test functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeakFormReport {
    pub tests: usize,
    /// `max P(φ)`; the weak inequality requires `≤ 0`.
    pub max_pairing: f64,
    /// `max |P(φ) + ∫sφ|`; zero up to rounding.
    pub identity_residual: f64,
    /// Magnitude of the terms, for relative tolerances.
    pub scale: f64,
}

impl WeakFormReport {
    pub fn holds(&self, rel_tol: f64) -> bool {
        self.max_pairing <= rel_tol * self.scale && self.identity_residual <= rel_tol * self.scale
    }
}

pub fn weak_form_panel(model: &SpectralModel, inst: &ProblemInstance, tests: usize, seed: u64) -> Result<WeakFormReport> {
    let band = 20.min(model.mode_count() - 1);
    let mut max_pairing = f64::NEG_INFINITY;
    let mut identity_residual = 0.0f64;
    let mut scale = 1.0f64;
    for t in 0..tests {
        let test = random_nonnegative(model, band, trial_seed(seed, "weak_form", t as u64))?;
        let grad_term = model.dirichlet_form(&inst.u, &test)?;
        let f_term = model.inner(&inst.f, &test);
        let flux = model.flux_pairing(&inst.phi, &test)?;
        let s_term = model.inner(&inst.slack, &test);
        let pairing = grad_term + f_term - flux;
        max_pairing = max_pairing.max(pairing);
        identity_residual = identity_residual.max((pairing + s_term).abs());
        scale = scale.max(grad_term.abs()).max(f_term.abs()).max(flux.abs()).max(s_term.abs());
    }
    Ok(WeakFormReport {
        tests,
        max_pairing,
        identity_residual,
        scale,
    })
}

fn check_connected(model: &SpectralModel) -> Result<()> {
    if model.mode_count() < 2 || !(model.lambda1() > 0.0) {
        return Err(Error::Model(format!("model {} is not connected (λ_1 = 0)", model.label)));
    }
    Ok(())
}

/// Spectral solution of `Δv = f − f_M + div Φ` with `v_M = 0`.
pub fn solve_poisson(model: &SpectralModel, f: &ScalarField, phi: &VectorField) -> Result<ScalarField> {
    check_connected(model)?;
    model.check_field(f)?;
    let div = model.divergence_or_zero(phi)?;
    let rhs = f.add(&div);
    let mut c = model.analyze(&rhs);
    c[0] = 0.0;
    for k in 1..c.len() {
        c[k] = -c[k] / model.eigenvalues[k];
    }
    Ok(model.synthesize(&c))
}

/// `‖Δv − (f − f_M) − div Φ‖*₂`.
pub fn poisson_residual(model: &SpectralModel, v: &ScalarField, f: &ScalarField, phi: &VectorField) -> Result<f64> {
    let fm = average(model, f);
    let r = model
        .apply_laplacian(v)?
        .sub(&f.shift(-fm))
        .sub(&model.divergence_or_zero(phi)?);
    norm_star(model, &r, 2.0)
}

/// `F(v) = ∫(½|∇v|² + (f − f_M)v − Φ·∇v)`, whose mean-zero minimizer
/// solves `Δv = f − f_M + div Φ`.
pub fn energy(model: &SpectralModel, f: &ScalarField, phi: &VectorField, v: &ScalarField) -> Result<f64> {
    let fm = average(model, f);
    Ok(0.5 * model.dirichlet_form(v, v)? + model.inner(&f.shift(-fm), v) - model.flux_pairing(phi, v)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyMinimum {
    pub v: ScalarField,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final `‖r‖_W / ‖b‖_W` of the normal equations.
    pub relative_residual: f64,
}

/// Conjugate-gradient descent on `F` over mean-zero fields, in the weighted
/// inner product, using the local operator [`SpectralModel::div_grad`].
/// Stops at relative residual `1e-13` or after `iters` steps, returning the
/// best iterate either way.
pub fn minimize_energy(model: &SpectralModel, f: &ScalarField, phi: &VectorField, iters: usize) -> Result<EnergyMinimum> {
    check_connected(model)?;
    model.check_field(f)?;
    let n = model.node_count();
    let center = |x: ScalarField| {
        let m = average(model, &x);
        x.shift(-m)
    };
    // the span projection only matters on sampled-basis models
    let in_span = |x: ScalarField| {
        if model.is_complete() {
            x
        } else {
            model.synthesize(&model.analyze(&x))
        }
    };
    let op = |x: &ScalarField| -> Result<ScalarField> { Ok(center(model.div_grad(x)?.scale(-1.0))) };

    let fm = average(model, f);
    let b = center(in_span(f.shift(-fm).add(&model.divergence_or_zero(phi)?).scale(-1.0)));
    let b_norm = model.inner(&b, &b).sqrt();
    let mut x = ScalarField::zeros(n);
    if b_norm == 0.0 {
        return Ok(EnergyMinimum {
            energy: energy(model, f, phi, &x)?,
            v: x,
            iterations: 0,
            converged: true,
            relative_residual: 0.0,
        });
    }
    let mut r = b.clone();
    let mut d = r.clone();
    let mut rs = model.inner(&r, &r);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < iters {
        iterations += 1;
        let ad = op(&d)?;
        let curv = model.inner(&d, &ad);
        if !(curv > 0.0) {
            break;
        }
        let alpha = rs / curv;
        x = x.add(&d.scale(alpha));
        r = r.sub(&ad.scale(alpha));
        let rs_new = model.inner(&r, &r);
        if rs_new.sqrt() <= 1e-13 * b_norm {
            rs = rs_new;
            converged = true;
            break;
        }
        d = r.add(&d.scale(rs_new / rs));
        rs = rs_new;
    }
    let x = center(x);
    Ok(EnergyMinimum {
        energy: energy(model, f, phi, &x)?,
        v: x,
        iterations,
        converged,
        relative_residual: rs.sqrt() / b_norm,
    })
}

fn constants_for(model: &SpectralModel, p: f64, cstar: f64) -> Result<ConstantSet> {
    if !(cstar > 0.0) || !cstar.is_finite() {
        return Err(Error::Usage(format!("C* must be positive and finite, got {cstar}")));
    }
    constant_set(model.n_intrinsic, p, cstar, PRODUCT_TOL)
}

fn additive_tol(values: &[f64]) -> f64 {
    1e-12 * values.iter().fold(1.0f64, |m, v| m.max(v.abs()))
}

/// Local bound on `sup(u − λ)` by the positive part and the data.
pub fn check_moser_bound(
    model: &SpectralModel,
    inst: &ProblemInstance,
    cstar: f64,
    lambda: f64,
) -> Result<VerificationRecord> {
    check_p(model, inst.p)?;
    let cs = constants_for(model, inst.p, cstar)?;
    let shifted = inst.u.shift(-lambda);
    let (_, f_neg) = pos_neg_parts(&inst.f);
    let (pos, _) = pos_neg_parts(&shifted);
    let f_norm = norm_star(model, &f_neg, inst.p)?;
    let phi_norm = norm_star_vec(model, &inst.phi, 2.0 * inst.p)?;
    let pos_norm = norm_star(model, &pos, 2.0)?;
    let lhs = ess_sup(&shifted);
    let rhs = cs.a * cs.c1 * (f_norm + phi_norm) + cs.a * (cs.c1 + SQRT_2) * pos_norm;
    let tol = additive_tol(&[lhs, rhs, inst.u.max_abs()]);
    Ok(VerificationRecord::inequality("moser", &model.label, lhs, rhs, tol)
        .with_p(inst.p)
        .with_detail("lambda", lambda)
        .with_detail("f_neg_norm", f_norm)
        .with_detail("phi_norm", phi_norm)
        .with_detail("pos_part_norm", pos_norm)
        .with_detail("A", cs.a)
        .with_detail("C1", cs.c1))
}

/// `sup|u − u_M| ≤ C₂(‖f − f_M‖*_p + ‖Φ‖*_{2p})` for the solution of
/// `Δu = f − f_M + div Φ`; the norm of the raw `f` is reported alongside.
pub fn check_solution_bound(
    model: &SpectralModel,
    f: &ScalarField,
    phi: &VectorField,
    cstar: f64,
    p: f64,
) -> Result<VerificationRecord> {
    check_p(model, p)?;
    let cs = constants_for(model, p, cstar)?;
    let u = solve_poisson(model, f, phi)?;
    let um = average(model, &u);
    let lhs = u.shift(-um).max_abs();
    let fm = average(model, f);
    let f_norm = norm_star(model, &f.shift(-fm), p)?;
    let phi_norm = norm_star_vec(model, phi, 2.0 * p)?;
    let rhs = cs.c2 * (f_norm + phi_norm);
    let tol = additive_tol(&[lhs, rhs]);
    Ok(VerificationRecord::inequality("solution", &model.label, lhs, rhs, tol)
        .with_p(p)
        .with_detail("f_centered_norm", f_norm)
        .with_detail("f_raw_norm", norm_star(model, f, p)?)
        .with_detail("f_mean", fm)
        .with_detail("phi_norm", phi_norm)
        .with_detail("C2", cs.c2)
        .with_detail("poisson_residual", poisson_residual(model, &u, f, phi)?))
}

/// Intermediate quantities of the proof of the global bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalBoundReplay {
    /// `min_{x≠y} G₀(x,y)`.
    pub sigma: f64,
    pub f_neg_mean: f64,
    /// `sup (w − w_M)` for `w = u − v`.
    pub w_excess: f64,
    /// `C₀(n) C*² ‖f⁻‖*_p`.
    pub w_bound: f64,
    /// `−σ vol |(f⁻)_M|`, the sharper intermediate form.
    pub w_bound_sigma: f64,
    pub sup_v: f64,
    /// `C₂(‖f⁻ − (f⁻)_M‖*_p + ‖Φ‖*_{2p})`.
    pub v_bound: f64,
}

impl GlobalBoundReplay {
    pub fn w_holds(&self, tol: f64) -> bool {
        self.w_excess <= self.w_bound + tol
    }

    pub fn v_holds(&self, tol: f64) -> bool {
        self.sup_v <= self.v_bound + tol
    }
}

fn theorem_a_sides(model: &SpectralModel, inst: &ProblemInstance, cs: &ConstantSet) -> Result<(f64, f64, f64, f64)> {
    let (_, f_neg) = pos_neg_parts(&inst.f);
    let f_norm = norm_star(model, &f_neg, inst.p)?;
    let phi_norm = norm_star_vec(model, &inst.phi, 2.0 * inst.p)?;
    let lhs = ess_sup(&inst.u) - average(model, &inst.u);
    let rhs = cs.coef_f * f_norm + cs.coef_phi * phi_norm;
    Ok((lhs, rhs, f_norm, phi_norm))
}

/// Global bound `sup u ≤ u_M + coef_f ‖f⁻‖*_p + coef_phi ‖Φ‖*_{2p}`, checked as
/// `sup u − u_M ≤ …`, together with the replay of its proof.
pub fn check_theorem_a(model: &SpectralModel, inst: &ProblemInstance, cstar: f64) -> Result<VerificationRecord> {
    let g0 = green_function(model)?;
    check_theorem_a_with(model, &g0, inst, cstar).map(|(rec, _)| rec)
}

/// As [`check_theorem_a`] with a precomputed Green function.
pub fn check_theorem_a_with(
    model: &SpectralModel,
    g0: &KernelMatrix,
    inst: &ProblemInstance,
    cstar: f64,
) -> Result<(VerificationRecord, GlobalBoundReplay)> {
    check_p(model, inst.p)?;
    let cs = constants_for(model, inst.p, cstar)?;
    let (lhs, rhs, f_norm, phi_norm) = theorem_a_sides(model, inst, &cs)?;

    let (_, f_neg) = pos_neg_parts(&inst.f);
    let f_neg_mean = average(model, &f_neg);
    let f_neg_centered = f_neg.shift(-f_neg_mean);
    let v = solve_poisson(model, &f_neg_centered, &inst.phi)?;
    let w = inst.u.sub(&v);
    let replay = GlobalBoundReplay {
        sigma: g0.min_off_diagonal().0,
        f_neg_mean,
        w_excess: ess_sup(&w) - average(model, &w),
        w_bound: cs.c0n * cstar * cstar * f_norm,
        w_bound_sigma: -g0.min_off_diagonal().0 * model.volume * f_neg_mean.abs(),
        sup_v: ess_sup(&v),
        v_bound: cs.c2 * (norm_star(model, &f_neg_centered, inst.p)? + phi_norm),
    };
    let tol = additive_tol(&[lhs, rhs, inst.u.max_abs()]);
    let rec = VerificationRecord::inequality("theorem_a", &model.label, lhs, rhs, tol)
        .with_p(inst.p)
        .with_detail("f_neg_norm", f_norm)
        .with_detail("phi_norm", phi_norm)
        .with_detail("coef_f", cs.coef_f)
        .with_detail("coef_phi", cs.coef_phi)
        .with_detail("sigma", replay.sigma)
        .with_detail("w_excess", replay.w_excess)
        .with_detail("w_bound", replay.w_bound)
        .with_detail("w_bound_sigma", replay.w_bound_sigma)
        .with_detail("sup_v", replay.sup_v)
        .with_detail("v_bound", replay.v_bound)
        .with_detail("replay_w_pass", replay.w_holds(tol) as u8 as f64)
        .with_detail("replay_v_pass", replay.v_holds(tol) as u8 as f64);
    Ok((rec, replay))
}

/// Both sides of the global bound after the metric change `g → αg`:
/// `C*` becomes `√α C*` and the norms of `f` and `Φ` scale by `1/α`, while
/// `sup u − u_M` is unchanged.
pub fn theorem_a_rescaled(
    model: &SpectralModel,
    inst: &ProblemInstance,
    cstar: f64,
    alpha: f64,
) -> Result<VerificationRecord> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Usage(format!("rescale factor must be positive, got {alpha}")));
    }
    let base = constants_for(model, inst.p, cstar)?;
    let (lhs, rhs, f_norm, phi_norm) = theorem_a_sides(model, inst, &base)?;
    let scaled_cstar = alpha.sqrt() * cstar;
    let cs = constants_for(model, inst.p, scaled_cstar)?;
    let rhs_scaled = (cs.coef_f * f_norm + cs.coef_phi * phi_norm) / alpha;
    let tol = additive_tol(&[lhs, rhs_scaled]);
    Ok(VerificationRecord::inequality("theorem_a_rescaled", &model.label, lhs, rhs_scaled, tol)
        .with_p(inst.p)
        .with_cstar(scaled_cstar, "rescaled")
        .with_detail("alpha", alpha)
        .with_detail("rhs_unscaled", rhs)
        .with_detail("cstar_unscaled", cstar))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_graph_model, build_torus, build_zonal_sphere3, complete_edges};

    fn t3() -> SpectralModel {
        build_torus(3, 8, 1.0).unwrap()
    }

    #[test]
    fn poisson_single_mode() {
        let m = t3();
        let f = m.mode(1).scale(m.lambda1());
        let v = solve_poisson(&m, &f, &VectorField::zeros(&m)).unwrap();
        assert!(v.add(&m.mode(1)).max_abs() < 1e-10);
    }

    #[test]
    fn poisson_with_gradient_flux() {
        let m = t3();
        let h = random_field(&m, 30, 5, false).unwrap();
        let phi = m.gradient(&h).unwrap();
        let v = solve_poisson(&m, &ScalarField::zeros(m.node_count()), &phi).unwrap();
        // Δv = div ∇h = Δh, so v = h − h_M
        let hm = average(&m, &h);
        assert!(v.sub(&h.shift(-hm)).max_abs() < 1e-9);
    }

    #[test]
    fn poisson_constant_source() {
        let m = t3();
        let v = solve_poisson(&m, &ScalarField::constant(m.node_count(), 3.0), &VectorField::zeros(&m)).unwrap();
        assert!(v.max_abs() < 1e-12);
    }

    #[test]
    fn poisson_residual_and_uniqueness() {
        for m in [t3(), build_zonal_sphere3(24).unwrap()] {
            let f = random_field(&m, 15, 1, false).unwrap();
            let phi = random_vector_field(&m, 15, 2).unwrap();
            let v = solve_poisson(&m, &f, &phi).unwrap();
            let scale = norm_star(&m, &f, 2.0).unwrap() + norm_star_vec(&m, &phi, 2.0).unwrap() + 1.0;
            assert!(poisson_residual(&m, &v, &f, &phi).unwrap() <= 1e-9 * scale);
            let again = solve_poisson(&m, &f, &phi).unwrap();
            assert!(v.sub(&again).max_abs() <= 1e-12);
        }
    }

    #[test]
    fn solve_inverts_laplacian_both_ways() {
        let m = build_torus(3, 4, 1.0).unwrap();
        let zero = VectorField::zeros(&m);
        for seed in 0..5 {
            let u = random_field(&m, 40, seed, false).unwrap();
            let um = average(&m, &u);
            let back = solve_poisson(&m, &m.apply_laplacian(&u).unwrap(), &zero).unwrap();
            assert!(back.sub(&u.shift(-um)).max_abs() < 1e-9);
            let lap = m.apply_laplacian(&solve_poisson(&m, &u, &zero).unwrap()).unwrap();
            assert!(lap.sub(&u.shift(-um)).max_abs() < 1e-9);
        }
    }

    #[test]
    fn disconnected_spectrum_is_a_model_error() {
        let mut m = build_torus(3, 4, 1.0).unwrap();
        m.eigenvalues[1] = 0.0;
        let f = ScalarField::zeros(m.node_count());
        assert!(matches!(solve_poisson(&m, &f, &VectorField::zeros(&m)), Err(Error::Model(_))));
    }

    #[test]
    fn energy_descent_matches_spectral_solve() {
        let m = t3();
        for seed in 0..4 {
            let f = random_field(&m, 25, 10 + seed, false).unwrap();
            let phi = random_vector_field(&m, 25, 20 + seed).unwrap();
            let spectral = solve_poisson(&m, &f, &phi).unwrap();
            let descent = minimize_energy(&m, &f, &phi, 500).unwrap();
            assert!(descent.converged);
            assert!(norm_star(&m, &spectral.sub(&descent.v), 2.0).unwrap() <= 1e-6);
            assert!(energy(&m, &f, &phi, &spectral).unwrap() <= descent.energy + 1e-9);
            assert!(descent.energy <= 0.0);
        }
    }

    #[test]
    fn energy_descent_on_sphere_and_graph() {
        let s = build_zonal_sphere3(32).unwrap();
        let k6 = build_graph_model(&[1.0, 2.0, 1.0, 0.5, 1.0, 1.5], &complete_edges(6), 3).unwrap();
        for m in [s, k6] {
            let f = random_field(&m, 4, 3, false).unwrap();
            let phi = random_vector_field(&m, 4, 4).unwrap();
            let spectral = solve_poisson(&m, &f, &phi).unwrap();
            let descent = minimize_energy(&m, &f, &phi, 500).unwrap();
            assert!(norm_star(&m, &spectral.sub(&descent.v), 2.0).unwrap() <= 1e-6, "{}", m.label);
        }
    }

    #[test]
    fn energy_of_zero_problem() {
        let m = build_torus(3, 4, 1.0).unwrap();
        let r = minimize_energy(&m, &ScalarField::zeros(m.node_count()), &VectorField::zeros(&m), 10).unwrap();
        assert_eq!(r.v.max_abs(), 0.0);
        assert_eq!(r.energy, 0.0);
    }

    #[test]
    fn subsolution_examples() {
        let m = build_torus(3, 4, 1.0).unwrap();
        let n = m.node_count();
        let zero_u = ScalarField::zeros(n);
        let inst = generate_subsolution(&m, &zero_u, &VectorField::zeros(&m), &ScalarField::constant(n, 1.0), 2.0).unwrap();
        assert!(inst.f.values.iter().all(|&v| (v + 1.0).abs() < 1e-14));

        let u = random_field(&m, 20, 9, false).unwrap();
        let phi = random_vector_field(&m, 20, 10).unwrap();
        let eq = generate_subsolution(&m, &u, &phi, &ScalarField::zeros(n), 2.0).unwrap();
        eq.validate(&m).unwrap();
        let r = m.apply_laplacian(&u).unwrap().sub(&eq.f).sub(&m.divergence_weak(&phi).unwrap());
        assert!(r.max_abs() < 1e-10);

        let s = m.mode(1).map(f64::abs);
        let inst = generate_subsolution(&m, &u, &phi, &s, 2.0).unwrap();
        inst.validate(&m).unwrap();
        let report = weak_form_panel(&m, &inst, 50, 3).unwrap();
        assert!(report.holds(1e-9), "{report:?}");

        let bad = ScalarField::constant(n, -0.1);
        assert!(matches!(generate_subsolution(&m, &u, &phi, &bad, 2.0), Err(Error::Usage(_))));
        assert!(matches!(generate_subsolution(&m, &u, &phi, &s, 1.0), Err(Error::Usage(_))));
    }

    #[test]
    fn weak_form_on_every_model() {
        let models = [
            build_torus(3, 4, 1.0).unwrap(),
            build_zonal_sphere3(24).unwrap(),
            build_graph_model(&[1.0; 5], &complete_edges(5), 3).unwrap(),
        ];
        for m in models {
            for seed in 0..4 {
                let inst = random_instance(&m, 2.0, 12, seed).unwrap();
                inst.validate(&m).unwrap();
                assert!(weak_form_panel(&m, &inst, 50, seed).unwrap().holds(1e-9), "{}", m.label);
            }
        }
    }

    #[test]
    fn moser_trivial_case() {
        let m = build_torus(3, 4, 1.0).unwrap();
        let n = m.node_count();
        let u = ScalarField::constant(n, 2.0);
        let inst = generate_subsolution(&m, &u, &VectorField::zeros(&m), &ScalarField::zeros(n), 2.0).unwrap();
        let rec = check_moser_bound(&m, &inst, 0.3, 2.0).unwrap();
        assert!(rec.pass);
        assert!(rec.lhs.abs() < 1e-12);
        assert!(rec.rhs.abs() < 1e-9);
    }

    #[test]
    fn moser_batch_and_homogeneity() {
        let m = build_torus(3, 4, 1.0).unwrap();
        for seed in 0..20 {
            let inst = random_instance(&m, 2.0, 20, seed).unwrap();
            let rec = check_moser_bound(&m, &inst, 0.315, inst.lambda).unwrap();
            assert!(rec.pass && rec.slack_ratio >= 1.0, "seed {seed}: {rec:?}");
            let c = 3.7;
            let scaled = generate_subsolution(&m, &inst.u.scale(c), &inst.phi.scale(c), &inst.slack.scale(c), 2.0).unwrap();
            let r2 = check_moser_bound(&m, &scaled, 0.315, inst.lambda * c).unwrap();
            assert!((r2.lhs - c * rec.lhs).abs() <= 1e-9 * rec.lhs.abs().max(1.0));
            assert!((r2.rhs - c * rec.rhs).abs() <= 1e-9 * rec.rhs);
            assert!((r2.slack_ratio - rec.slack_ratio).abs() <= 1e-9 * rec.slack_ratio);
        }
    }

    #[test]
    fn solution_bound_examples() {
        let m = t3();
        let zero = VectorField::zeros(&m);
        let rec = check_solution_bound(&m, &ScalarField::zeros(m.node_count()), &zero, 0.315, 2.0).unwrap();
        assert!(rec.pass && rec.lhs == 0.0);

        let phi1 = m.mode(1);
        let rec = check_solution_bound(&m, &phi1, &zero, 0.315, 2.0).unwrap();
        let want = phi1.max_abs() / m.lambda1();
        assert!((rec.lhs - want).abs() < 1e-12);
        let cs = constant_set(3, 2.0, 0.315, PRODUCT_TOL).unwrap();
        assert!((rec.rhs - cs.c2 * norm_star(&m, &phi1, 2.0).unwrap()).abs() < 1e-9 * rec.rhs);
        assert!(rec.pass);
    }

    #[test]
    fn theorem_a_constant_equality_case() {
        let m = build_torus(3, 4, 1.0).unwrap();
        let n = m.node_count();
        let u = ScalarField::constant(n, 1.25);
        let inst = generate_subsolution(&m, &u, &VectorField::zeros(&m), &ScalarField::zeros(n), 2.0).unwrap();
        let rec = check_theorem_a(&m, &inst, 0.315).unwrap();
        assert!(rec.pass);
        assert!(rec.lhs.abs() < 1e-12 && rec.rhs.abs() < 1e-9);
    }

    #[test]
    fn theorem_a_with_replay() {
        let m = build_torus(3, 4, 1.0).unwrap();
        let g0 = green_function(&m).unwrap();
        for seed in 0..10 {
            let inst = random_instance(&m, 2.0, 20, seed).unwrap();
            let (rec, replay) = check_theorem_a_with(&m, &g0, &inst, 0.315).unwrap();
            assert!(rec.pass, "seed {seed}");
            assert!(replay.w_holds(1e-9) && replay.v_holds(1e-9), "seed {seed}: {replay:?}");
            assert!(replay.w_excess <= replay.w_bound_sigma + 1e-9, "seed {seed}: {replay:?}");
        }
    }

    #[test]
    fn rescale_diagnostic_reports_both_sides() {
        let m = build_torus(3, 4, 1.0).unwrap();
        let inst = random_instance(&m, 2.0, 20, 1).unwrap();
        let base = check_theorem_a(&m, &inst, 0.315).unwrap();
        let same = theorem_a_rescaled(&m, &inst, 0.315, 1.0).unwrap();
        assert!((same.rhs - base.rhs).abs() <= 1e-12 * base.rhs);
        let r = theorem_a_rescaled(&m, &inst, 0.315, 4.0).unwrap();
        assert_eq!(r.lhs, base.lhs);
        assert!((r.cstar - 0.63).abs() < 1e-12);
        assert!(matches!(theorem_a_rescaled(&m, &inst, 0.315, 0.0), Err(Error::Usage(_))));
    }

    #[test]
    fn digest_tracks_inputs() {
        let m = build_torus(3, 4, 1.0).unwrap();
        let a = random_instance(&m, 2.0, 10, 1).unwrap();
        let b = random_instance(&m, 2.0, 10, 2).unwrap();
        assert_eq!(a.digest(), random_instance(&m, 2.0, 10, 1).unwrap().digest());
        assert_ne!(a.digest(), b.digest());
    }
}
