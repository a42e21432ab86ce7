//! Property tests over the model fleet.

use std::sync::OnceLock;

use proptest::prelude::*;

use nmp_core::constants::{constant_set, product_a};
use nmp_core::harness::{random_field, random_vector_field, run_suite, CstarPolicy, SuiteConfig};
use nmp_core::isoperimetric::{
    cheeger_sweep, cstar_from_sobolev, slab_candidate, sobolev_ratio, sobolev_ratio_ascent, AscentConfig,
};
use nmp_core::kernels::heat_kernel;
use nmp_core::norms::{average, norm_star};
use nmp_core::solver::{check_moser_bound, generate_subsolution, solve_poisson, weak_form_panel, random_instance};
use nmp_core::{ModelSpec, ScalarField, SpectralModel, VectorField};

fn fleet() -> &'static [SpectralModel] {
    static FLEET: OnceLock<Vec<SpectralModel>> = OnceLock::new();
    FLEET.get_or_init(|| {
        ["torus:3:4:1", "torus:4:4:2", "sphere3:24", "complete:6:3", "cycle:9:4"]
            .iter()
            .map(|s| s.parse::<ModelSpec>().unwrap().build().unwrap())
            .collect()
    })
}

fn band(m: &SpectralModel) -> usize {
    (m.mode_count() - 1).min(20)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn laplacian_has_zero_average(which in 0usize..5, seed in 0u64..1_000_000) {
        let m = &fleet()[which];
        let u = random_field(m, band(m), seed, false).unwrap();
        let lap = m.apply_laplacian(&u).unwrap();
        let scale = m.eigenvalues.max() * u.max_abs() * m.volume;
        prop_assert!(m.integrate(&lap).abs() <= 1e-9 * scale.max(1.0));
    }

    #[test]
    fn spectral_round_trip(which in 0usize..5, seed in 0u64..1_000_000) {
        let m = &fleet()[which];
        prop_assume!(m.is_complete());
        let n = m.node_count();
        let mut rng = seed;
        let u = ScalarField::new((0..n).map(|_| {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (rng >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        }).collect());
        let back = m.synthesize(&m.analyze(&u));
        prop_assert!(back.sub(&u).max_abs() <= 1e-10);
    }

    #[test]
    fn norm_is_homogeneous(which in 0usize..5, seed in 0u64..1_000_000, c in -50.0f64..50.0, p in 1.0f64..9.0) {
        let m = &fleet()[which];
        let u = random_field(m, band(m), seed, false).unwrap();
        let a = norm_star(m, &u.scale(c), p).unwrap();
        let b = c.abs() * norm_star(m, &u, p).unwrap();
        prop_assert!((a - b).abs() <= 1e-13 * b.max(1e-300));
    }

    #[test]
    fn heat_semigroup(which in 0usize..5, t in 0.01f64..0.5, s in 0.01f64..0.5) {
        let m = &fleet()[which];
        prop_assume!(m.is_complete());
        let mut hs = heat_kernel(m, s).unwrap().matrix;
        for (j, w) in m.weights.iter().enumerate() {
            hs.column_mut(j).scale_mut(*w);
        }
        let lhs = hs * heat_kernel(m, t).unwrap().matrix;
        prop_assert!((lhs - heat_kernel(m, t + s).unwrap().matrix).amax() <= 1e-10);
    }

    #[test]
    fn constants_nondecreasing(n in 3usize..7, dp in 0.05f64..6.0, c in 0.01f64..3.0, dc in 0.0f64..2.0) {
        let p = n as f64 / 2.0 + dp;
        let lo = constant_set(n, p, c, 1e-11).unwrap();
        let hi = constant_set(n, p, c + dc, 1e-11).unwrap();
        prop_assert!(lo.c1 <= hi.c1);
        prop_assert!(lo.a <= hi.a * (1.0 + 1e-11));
        prop_assert!(lo.c2 <= hi.c2 * (1.0 + 1e-11));
        prop_assert!(lo.coef_f <= hi.coef_f * (1.0 + 1e-11));
    }

    #[test]
    fn product_a_recomputation_agrees(n in 3usize..7, dp in 0.05f64..6.0, c in 0.0f64..3.0) {
        let p = n as f64 / 2.0 + dp;
        let a = product_a(n, p, c, 1e-9).unwrap();
        let finer = product_a(n, p, c, 1e-10).unwrap();
        prop_assert!(a.tail_bound <= 1e-9);
        prop_assert!((finer.value.ln() - a.value.ln()).abs() <= 1e-9);
    }

    #[test]
    fn poisson_inverts_laplacian(which in 0usize..5, seed in 0u64..1_000_000) {
        let m = &fleet()[which];
        let u = random_field(m, band(m), seed, false).unwrap();
        let lap = m.div_grad(&u).unwrap();
        let v = solve_poisson(m, &lap, &VectorField::zeros(m)).unwrap();
        let centered = u.shift(-average(m, &u));
        prop_assert!(v.sub(&centered).max_abs() <= 1e-9 * u.max_abs().max(1.0));
        // identical inputs give identical solutions
        let again = solve_poisson(m, &lap, &VectorField::zeros(m)).unwrap();
        prop_assert!(again.sub(&v).max_abs() <= 1e-12);
    }

    #[test]
    fn moser_slack_is_scale_invariant(which in 0usize..3, seed in 0u64..1_000_000, c in 0.01f64..100.0) {
        let m = &fleet()[which];
        prop_assume!(m.n_intrinsic == 3);
        let inst = random_instance(m, 2.0, band(m), seed).unwrap();
        let scaled = generate_subsolution(m, &inst.u.scale(c), &inst.phi.scale(c), &inst.slack.scale(c), 2.0).unwrap();
        let a = check_moser_bound(m, &inst, 0.3, inst.lambda).unwrap();
        let b = check_moser_bound(m, &scaled, 0.3, scaled.lambda).unwrap();
        prop_assert!((a.slack_ratio - b.slack_ratio).abs() <= 1e-9 * a.slack_ratio.abs().max(1.0));
    }

    #[test]
    fn weak_form_holds_for_generated_instances(which in 0usize..5, seed in 0u64..1_000_000) {
        let m = &fleet()[which];
        let p = m.n_intrinsic as f64 / 2.0 + 0.5;
        let inst = random_instance(m, p, band(m), seed).unwrap();
        let rep = weak_form_panel(m, &inst, 50, seed).unwrap();
        prop_assert!(rep.holds(1e-9), "{rep:?}");
    }

    #[test]
    fn torus_sweep_subsumes_slab(n in 3usize..5, half in 2usize..4, side in 0.5f64..3.0) {
        let m = 2 * half;
        prop_assume!(m.pow(n as u32) <= 1500);
        let t = nmp_core::model::build_torus(n, m, side).unwrap();
        let sweep = cheeger_sweep(&t).unwrap().value;
        let slab = slab_candidate(&t).unwrap().value;
        prop_assert!(sweep >= 0.99 * slab, "{sweep} < {slab}");
    }
}

#[test]
fn ascent_dominates_first_mode_and_random_fields() {
    for m in &fleet()[..3] {
        let est = sobolev_ratio_ascent(m, &AscentConfig { restarts: 4, ..AscentConfig::default() }).unwrap();
        let n = m.n_intrinsic;
        let seed_value = cstar_from_sobolev(n, sobolev_ratio(m, &m.mode(1)).unwrap());
        assert!(est.value >= seed_value * (1.0 - 1e-12), "{}: {} < {seed_value}", m.label, est.value);
        // the returned maximizer attains the estimate
        let w = est.witness.as_ref().unwrap();
        assert!((cstar_from_sobolev(n, sobolev_ratio(m, w).unwrap()) - est.value).abs() <= 1e-8 * est.value);
        for seed in 0..200 {
            let u = random_field(m, band(m), seed, false).unwrap();
            assert!(cstar_from_sobolev(n, sobolev_ratio(m, &u).unwrap()) <= est.value, "{} seed {seed}", m.label);
        }
    }
}

#[test]
fn more_restarts_never_lower_the_ascent() {
    let m = &fleet()[0];
    let few = sobolev_ratio_ascent(m, &AscentConfig { restarts: 3, iters: 60, ..AscentConfig::default() }).unwrap();
    let more = sobolev_ratio_ascent(m, &AscentConfig { restarts: 6, iters: 60, ..AscentConfig::default() }).unwrap();
    assert!(more.value >= few.value);
}

#[test]
fn inflated_estimate_never_violates_poincare() {
    // 2(n−1)/(n−2)·C* bounds ‖u − u_M‖*₂/‖∇u‖*₂ once C* is inflated by 1.5
    for m in &fleet()[..3] {
        let c = nmp_core::isoperimetric::auto_estimate(m, &AscentConfig::default()).unwrap().value * 1.5;
        let n = m.n_intrinsic as f64;
        for seed in 0..1000 {
            let u = random_field(m, band(m), seed, false).unwrap();
            let lhs = norm_star(m, &u.shift(-average(m, &u)), 2.0).unwrap();
            let grad = (m.dirichlet_form(&u, &u).unwrap() / m.volume).sqrt();
            assert!(lhs <= 2.0 * (n - 1.0) / (n - 2.0) * c * grad, "{} seed {seed}", m.label);
        }
    }
}

#[test]
fn slack_grows_along_the_cstar_sweep() {
    let cfg = SuiteConfig {
        models: vec!["torus:3:4:1".parse().unwrap(), "sphere3:24".parse().unwrap()],
        checks: vec!["cstar_sweep".into()],
        cstar: CstarPolicy::Fixed(0.3),
        ..SuiteConfig::default()
    };
    let recs = run_suite(&cfg).unwrap();
    for model in ["torus:3:4:1", "sphere3:24"] {
        let mut pts: Vec<(f64, f64)> = recs.iter().filter(|r| r.model == model).map(|r| (r.cstar, r.slack_ratio)).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert_eq!(pts.len(), 10);
        assert!(pts.windows(2).all(|w| w[0].1 <= w[1].1), "{model}: {pts:?}");
    }
}

#[test]
fn random_vector_fields_match_model_dimension() {
    for m in fleet() {
        assert_eq!(random_vector_field(m, band(m), 1).unwrap().dim(), m.vector_dim());
    }
}
