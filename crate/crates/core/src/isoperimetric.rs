//! Lower-bound estimators for the volume-normalized isoperimetric constant
//! `C* = C_{N,I} · vol^{1/n}`.
//!
//! `C_{N,I} = sup vol(Ω)^{(n−1)/n} / A(∂Ω)` over regions with at most half
//! the volume. Every estimator here evaluates the ratio (or the equivalent
//! Sobolev quotient) on explicit candidates, so every returned value is a
//! lower bound of the model's true constant.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::seeds::trial_seed;
use crate::model::{ModelKind, ScalarField, SpectralModel};
use crate::norms::{average, norm_star};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CstarMethod {
    Variational,
    Sweep,
    AnalyticSlab,
    User,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct CstarDiagnostics {
    pub restarts: usize,
    pub iterations: usize,
    /// Sobolev quotient (ascent) or isoperimetric ratio (sweep, slab).
    pub best_ratio: f64,
    pub stagnated: bool,
    pub sets_examined: usize,
    /// Values of the individual estimators when several were combined.
    pub candidates: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CstarEstimate {
    pub value: f64,
    pub method: CstarMethod,
    pub is_lower_bound: bool,
    pub diagnostics: CstarDiagnostics,
    /// Best field found by the ascent.
    #[serde(skip)]
    pub witness: Option<ScalarField>,
}

impl CstarEstimate {
    pub fn user(value: f64) -> Result<Self> {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::Usage(format!("C* must be positive and finite, got {value}")));
        }
        Ok(CstarEstimate {
            value,
            method: CstarMethod::User,
            is_lower_bound: false,
            diagnostics: CstarDiagnostics::default(),
            witness: None,
        })
    }

    pub fn provenance(&self) -> &'static str {
        match self.method {
            CstarMethod::Variational => "ascent",
            CstarMethod::Sweep => "sweep",
            CstarMethod::AnalyticSlab => "slab",
            CstarMethod::User => "user",
        }
    }
}

/// Critical Sobolev exponent `2n/(n−2)`.
pub fn sobolev_exponent(n: usize) -> f64 {
    2.0 * n as f64 / (n as f64 - 2.0)
}

/// `Ĉ* = S* (n−2)/(4(n−1))`.
pub fn cstar_from_sobolev(n: usize, s: f64) -> f64 {
    s * (n as f64 - 2.0) / (4.0 * (n as f64 - 1.0))
}

/// `‖u − u_M‖*_{2n/(n−2)} / ‖∇u‖*₂`, with the Dirichlet form as `‖∇u‖²`.
pub fn sobolev_ratio(model: &SpectralModel, u: &ScalarField) -> Result<f64> {
    let q = sobolev_exponent(model.n_intrinsic);
    let centered = u.shift(-average(model, u));
    let energy = model.dirichlet_form(u, u)? / model.volume;
    let lam_max = model.eigenvalues.iter().fold(0.0f64, |m, v| m.max(*v));
    if !(energy > 1e-24 * lam_max * u.max_abs().powi(2)) {
        return Err(Error::Usage("Sobolev ratio of a constant field is undefined".into()));
    }
    Ok(norm_star(model, &centered, q)? / energy.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AscentConfig {
    pub restarts: usize,
    pub iters: usize,
    /// Initial step, as a fraction of the sphere radius.
    pub step: f64,
    pub seed: u64,
}

impl Default for AscentConfig {
    fn default() -> Self {
        AscentConfig {
            restarts: 20,
            iters: 200,
            step: 0.5,
            seed: 0,
        }
    }
}

/// Works on `d_k = √λ_k c_k`, `k ≥ 1`, so that `‖∇u‖*₂ = 1` is the sphere
/// `|d|² = vol` and the objective is `‖u‖*_q^q` with `u = Σ c_k φ_k`.
struct Quotient<'a> {
    model: &'a SpectralModel,
    q: f64,
    inv_sqrt_lambda: DVector<f64>,
}

impl<'a> Quotient<'a> {
    fn new(model: &'a SpectralModel) -> Self {
        let k = model.mode_count();
        let inv_sqrt_lambda = DVector::from_fn(k, |i, _| if i == 0 { 0.0 } else { model.eigenvalues[i].sqrt().recip() });
        Quotient {
            model,
            q: sobolev_exponent(model.n_intrinsic),
            inv_sqrt_lambda,
        }
    }

    fn field(&self, d: &DVector<f64>) -> DVector<f64> {
        &self.model.eigenbasis * d.component_mul(&self.inv_sqrt_lambda)
    }

    fn value(&self, d: &DVector<f64>) -> f64 {
        let u = self.field(d);
        let s: f64 = u.iter().zip(self.model.weights.iter()).map(|(v, w)| w * v.abs().powf(self.q)).sum();
        s / self.model.volume
    }

    fn gradient(&self, d: &DVector<f64>) -> DVector<f64> {
        let u = self.field(d);
        let g = DVector::from_fn(u.len(), |i, _| {
            self.model.weights[i] * u[i].abs().powf(self.q - 2.0) * u[i] * self.q / self.model.volume
        });
        (self.model.eigenbasis.transpose() * g).component_mul(&self.inv_sqrt_lambda)
    }

    fn ratio(&self, d: &DVector<f64>) -> f64 {
        self.value(d).powf(1.0 / self.q)
    }
}

struct RestartResult {
    ratio: f64,
    d: DVector<f64>,
    iterations: usize,
    stagnated: bool,
}

fn ascend(quot: &Quotient, mut d: DVector<f64>, cfg: &AscentConfig) -> RestartResult {
    let radius = quot.model.volume.sqrt();
    let normalize = |v: DVector<f64>| {
        let nv = v.norm();
        v * (radius / nv)
    };
    d = normalize(d);
    let mut val = quot.value(&d);
    let mut eta = cfg.step;
    let mut iterations = 0;
    let mut stagnated = true;
    for _ in 0..cfg.iters {
        iterations += 1;
        let g = quot.gradient(&d);
        let tangent = &g - &d * (g.dot(&d) / (radius * radius));
        let tn = tangent.norm();
        if !(tn > 1e-14 * g.norm().max(1e-300)) {
            stagnated = false;
            break;
        }
        let dir = tangent / tn;
        let mut accepted = false;
        while eta > 1e-10 {
            let cand = normalize(&d + &dir * (eta * radius));
            let cv = quot.value(&cand);
            if cv > val {
                d = cand;
                val = cv;
                accepted = true;
                eta = (eta * 2.0).min(1.0);
                break;
            }
            eta *= 0.5;
        }
        if !accepted {
            stagnated = false;
            break;
        }
    }
    RestartResult {
        ratio: quot.ratio(&d),
        d,
        iterations,
        stagnated,
    }
}

/// Multi-start projected ascent of the starred Sobolev quotient.
///
/// Restart 0 starts from `φ_1`; restart `r > 0` from Gaussian coefficients
/// seeded by `(seed, r)`. The best restart wins, first by restart order on
/// ties. `stagnated` is set when some restart used its full budget without
/// its line search collapsing.
pub fn sobolev_ratio_ascent(model: &SpectralModel, cfg: &AscentConfig) -> Result<CstarEstimate> {
    if cfg.restarts == 0 || cfg.iters == 0 || !(cfg.step > 0.0) {
        return Err(Error::Usage("ascent needs restarts ≥ 1, iters ≥ 1 and step > 0".into()));
    }
    if model.mode_count() < 2 || !(model.lambda1() > 0.0) {
        return Err(Error::Model(format!("model {} has no positive λ_1", model.label)));
    }
    if model.n_intrinsic < 3 {
        return Err(Error::Usage("Sobolev exponent needs n ≥ 3".into()));
    }
    let quot = Quotient::new(model);
    let k = model.mode_count();
    let results: Vec<RestartResult> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let start = if r == 0 {
                DVector::from_fn(k, |i, _| if i == 1 { 1.0 } else { 0.0 })
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(cfg.seed, "sobolev_ascent", r as u64));
                DVector::from_fn(k, |i, _| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    if i == 0 {
                        0.0
                    } else {
                        z
                    }
                })
            };
            ascend(&quot, start, cfg)
        })
        .collect();

    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.ratio > results[best].ratio {
            best = i;
        }
    }
    let winner = &results[best];
    let witness = ScalarField::from(quot.field(&winner.d));
    Ok(CstarEstimate {
        value: cstar_from_sobolev(model.n_intrinsic, winner.ratio),
        method: CstarMethod::Variational,
        is_lower_bound: true,
        diagnostics: CstarDiagnostics {
            restarts: cfg.restarts,
            iterations: results.iter().map(|r| r.iterations).sum(),
            best_ratio: winner.ratio,
            stagnated: results.iter().any(|r| r.stagnated),
            sets_examined: 0,
            candidates: BTreeMap::new(),
        },
        witness: Some(witness),
    })
}

/// Symmetric node adjacency with the boundary area carried by each link.
#[derive(Debug, Clone)]
pub struct BoundaryGraph {
    pub links: Vec<Vec<(usize, f64)>>,
}

impl BoundaryGraph {
    fn with_nodes(n: usize) -> Self {
        BoundaryGraph { links: vec![Vec::new(); n] }
    }

    fn link(&mut self, i: usize, j: usize, area: f64) {
        self.links[i].push((j, area));
        self.links[j].push((i, area));
    }

    /// Boundary area of the node set marked in `inside`.
    pub fn boundary(&self, inside: &[bool]) -> f64 {
        let mut a = 0.0;
        for (i, nb) in self.links.iter().enumerate() {
            if inside[i] {
                a += nb.iter().filter(|(j, _)| !inside[*j]).map(|(_, w)| w).sum::<f64>();
            }
        }
        a
    }
}

/// Graph: cut conductance. Torus: axis-aligned cell faces of area
/// `(L/m)^{n−1}`. Zonal sphere: the 2-sphere between neighbouring θ-cells,
/// of area `4π sin²θ`.
pub fn boundary_graph(model: &SpectralModel) -> BoundaryGraph {
    let n = model.node_count();
    let mut g = BoundaryGraph::with_nodes(n);
    match &model.kind {
        ModelKind::Graph { edges } => {
            for e in edges {
                g.link(e.i, e.j, e.conductance);
            }
        }
        ModelKind::Torus { m, side } => {
            let dim = model.n_intrinsic;
            let face = (side / *m as f64).powi(dim as i32 - 1);
            for i in 0..n {
                for axis in 0..dim {
                    let stride = m.pow((dim - 1 - axis) as u32);
                    let digit = (i / stride) % m;
                    let j = i - digit * stride + ((digit + 1) % m) * stride;
                    g.link(i, j, face);
                }
            }
        }
        ModelKind::ZonalSphere3 { m_theta } => {
            let dt = PI / *m_theta as f64;
            for j in 1..*m_theta {
                g.link(j - 1, j, 4.0 * PI * (j as f64 * dt).sin().powi(2));
            }
        }
    }
    g
}

fn ratio_starred(model: &SpectralModel, vol_set: f64, area: f64) -> f64 {
    let n = model.n_intrinsic as f64;
    if area <= 0.0 {
        return 0.0;
    }
    vol_set.powf((n - 1.0) / n) / area * model.volume.powf(1.0 / n)
}

/// Number of low modes whose level sets are swept.
const SWEEP_MIN_MODES: usize = 8;

/// Level-set sweep over the first eigenvectors.
///
/// Sweeps every mode of the first eigenspace and at least the first
/// [`SWEEP_MIN_MODES`] nonconstant modes, in both directions, keeping
/// prefix sets of at most half the volume.
pub fn cheeger_sweep(model: &SpectralModel) -> Result<CstarEstimate> {
    if model.mode_count() < 2 {
        return Err(Error::Model("sweep needs a nonconstant mode".into()));
    }
    let bg = boundary_graph(model);
    let n = model.node_count();
    let lam1 = model.lambda1();
    let first_space = (1..model.mode_count())
        .take_while(|&k| (model.eigenvalues[k] - lam1).abs() <= 1e-9 * lam1.max(1.0))
        .count();
    let sweep_modes = first_space.max(SWEEP_MIN_MODES).min(model.mode_count() - 1);
    let half = model.volume / 2.0 * (1.0 + 1e-12);

    let mut best = 0.0f64;
    let mut sets = 0;
    for k in 1..=sweep_modes {
        let col = model.eigenbasis.column(k);
        for sign in [1.0, -1.0] {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| (sign * col[a]).total_cmp(&(sign * col[b])).then(a.cmp(&b)));
            let mut inside = vec![false; n];
            let (mut vol, mut area) = (0.0, 0.0);
            for &v in &order {
                vol += model.weights[v];
                if vol > half {
                    break;
                }
                for &(j, a) in &bg.links[v] {
                    if inside[j] {
                        area -= a;
                    } else {
                        area += a;
                    }
                }
                inside[v] = true;
                sets += 1;
                best = best.max(ratio_starred(model, vol, area));
            }
        }
    }
    Ok(CstarEstimate {
        value: best,
        method: CstarMethod::Sweep,
        is_lower_bound: true,
        diagnostics: CstarDiagnostics {
            best_ratio: best / model.volume.powf(1.0 / model.n_intrinsic as f64),
            sets_examined: sets,
            ..CstarDiagnostics::default()
        },
        witness: None,
    })
}

/// Half-volume slab `[0, L/2) × T^{n−1}` of the flat torus:
/// `2^{−(n−1)/n}/2 · vol^{1/n}`.
pub fn slab_candidate(model: &SpectralModel) -> Result<CstarEstimate> {
    let ModelKind::Torus { .. } = model.kind else {
        return Err(Error::Unsupported(format!(
            "slab candidate needs a torus model, got {}",
            model.kind.name()
        )));
    };
    let n = model.n_intrinsic as f64;
    let ratio = 2f64.powf(-(n - 1.0) / n) / 2.0;
    Ok(CstarEstimate {
        value: ratio * model.volume.powf(1.0 / n),
        method: CstarMethod::AnalyticSlab,
        is_lower_bound: true,
        diagnostics: CstarDiagnostics {
            best_ratio: ratio,
            ..CstarDiagnostics::default()
        },
        witness: None,
    })
}

/// Maximum of all applicable estimators; the method of the winner is kept
/// and every candidate value is listed in the diagnostics.
pub fn auto_estimate(model: &SpectralModel, cfg: &AscentConfig) -> Result<CstarEstimate> {
    let mut found = vec![sobolev_ratio_ascent(model, cfg)?, cheeger_sweep(model)?];
    if matches!(model.kind, ModelKind::Torus { .. }) {
        found.push(slab_candidate(model)?);
    }
    let candidates: BTreeMap<String, f64> = found.iter().map(|e| (e.provenance().to_string(), e.value)).collect();
    let mut best = found
        .into_iter()
        .reduce(|a, b| if b.value > a.value { b } else { a })
        .expect("at least two estimators");
    best.diagnostics.candidates = candidates;
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_graph_model, build_torus, build_zonal_sphere3, complete_edges, cycle_edges, Edge};

    /// Brute force over all node subsets with at most half the volume.
    fn exhaustive(model: &SpectralModel) -> f64 {
        let n = model.node_count();
        assert!(n <= 16);
        let ModelKind::Graph { edges } = &model.kind else { panic!("graph only") };
        let n_dim = model.n_intrinsic as f64;
        let mut best = 0.0f64;
        for mask in 1u32..(1 << n) - 1 {
            let vol: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| model.weights[i]).sum();
            if vol > model.volume / 2.0 + 1e-12 {
                continue;
            }
            let cut: f64 = edges
                .iter()
                .filter(|e| (mask >> e.i & 1) != (mask >> e.j & 1))
                .map(|e| e.conductance)
                .sum();
            best = best.max(vol.powf((n_dim - 1.0) / n_dim) / cut);
        }
        best * model.volume.powf(1.0 / n_dim)
    }

    fn dumbbell() -> SpectralModel {
        let mut edges = Vec::new();
        for side in [0, 8] {
            for i in 0..8 {
                for j in i + 1..8 {
                    edges.push(Edge::new(side + i, side + j, 1.0));
                }
            }
        }
        edges.push(Edge::new(7, 8, 1.0));
        build_graph_model(&[1.0; 16], &edges, 3).unwrap()
    }

    #[test]
    fn slab_examples() {
        let t = |n, l| slab_candidate(&build_torus(n, 4, l).unwrap()).unwrap().value;
        assert!((t(3, 1.0) - 2f64.powf(-2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert!((t(3, 1.0) - 0.31498).abs() < 1e-5);
        assert!((t(4, 1.0) - 0.29730).abs() < 1e-5);
        assert!((t(3, 2.0) - 2.0 * t(3, 1.0)).abs() < 1e-14);
        let k4 = build_graph_model(&[1.0; 4], &complete_edges(4), 3).unwrap();
        assert!(matches!(slab_candidate(&k4), Err(Error::Unsupported(_))));
    }

    #[test]
    fn torus_sweep_recovers_slab() {
        for (n, m) in [(3, 8), (4, 4)] {
            let model = build_torus(n, m, 1.0).unwrap();
            let sweep = cheeger_sweep(&model).unwrap().value;
            let slab = slab_candidate(&model).unwrap().value;
            assert!(sweep >= 0.99 * slab, "n={n}: {sweep} < {slab}");
        }
    }

    #[test]
    fn graph_sweeps_match_exhaustive_oracle() {
        let k4 = build_graph_model(&[1.0; 4], &complete_edges(4), 3).unwrap();
        let c8 = build_graph_model(&[1.0; 8], &cycle_edges(8), 3).unwrap();
        for model in [k4, c8, dumbbell()] {
            let sweep = cheeger_sweep(&model).unwrap().value;
            let oracle = exhaustive(&model);
            assert!((sweep - oracle).abs() <= 1e-12 * oracle, "{}: {sweep} vs {oracle}", model.label);
        }
        // the dumbbell optimum is one clique: vol 8, cut 1
        let d = cheeger_sweep(&dumbbell()).unwrap().value;
        assert!((d - 8f64.powf(2.0 / 3.0) * 16f64.powf(1.0 / 3.0)).abs() < 1e-10);
    }

    #[test]
    fn sweep_is_bracketed_by_oracle_on_random_graphs() {
        use rand::Rng;
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(5..=12);
            let mut edges = cycle_edges(n);
            for _ in 0..n {
                let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
                if i != j {
                    edges.push(Edge::new(i, j, rng.random_range(0.2..2.0)));
                }
            }
            let masses: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
            let model = build_graph_model(&masses, &edges, 3).unwrap();
            let sweep = cheeger_sweep(&model).unwrap().value;
            assert!(sweep > 0.0 && sweep <= exhaustive(&model) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn zonal_sweep_finds_hemisphere() {
        let model = build_zonal_sphere3(64).unwrap();
        let sweep = cheeger_sweep(&model).unwrap().value;
        let hemisphere = 2f64.powf(1.0 / 3.0) * PI / 4.0;
        assert!((sweep - hemisphere).abs() < 0.01 * hemisphere, "{sweep}");
    }

    #[test]
    fn boundary_graph_torus_faces() {
        let model = build_torus(3, 4, 2.0).unwrap();
        let bg = boundary_graph(&model);
        assert!(bg.links.iter().all(|l| l.len() == 6));
        let mut inside = vec![false; model.node_count()];
        inside[0] = true;
        assert!((bg.boundary(&inside) - 6.0 * 0.25).abs() < 1e-15);
    }

    #[test]
    fn ascent_beats_first_mode_seed() {
        let model = build_torus(3, 4, 1.0).unwrap();
        let cfg = AscentConfig {
            restarts: 3,
            iters: 60,
            ..AscentConfig::default()
        };
        let est = sobolev_ratio_ascent(&model, &cfg).unwrap();
        let seed_ratio = sobolev_ratio(&model, &model.mode(1)).unwrap();
        assert!(est.diagnostics.best_ratio >= seed_ratio);
        assert!((est.value - cstar_from_sobolev(3, est.diagnostics.best_ratio)).abs() < 1e-15);
        // the witness attains the reported quotient
        let w = est.witness.as_ref().unwrap();
        assert!((sobolev_ratio(&model, w).unwrap() - est.diagnostics.best_ratio).abs() < 1e-8);
    }

    #[test]
    fn more_restarts_never_lower_the_estimate() {
        let model = build_zonal_sphere3(24).unwrap();
        let run = |r| {
            sobolev_ratio_ascent(
                &model,
                &AscentConfig {
                    restarts: r,
                    iters: 40,
                    ..AscentConfig::default()
                },
            )
            .unwrap()
            .value
        };
        let (a, b, c) = (run(2), run(4), run(8));
        assert!(a <= b && b <= c);
    }

    #[test]
    fn ascent_works_on_graphs() {
        let model = dumbbell();
        let est = sobolev_ratio_ascent(
            &model,
            &AscentConfig {
                restarts: 4,
                iters: 50,
                ..AscentConfig::default()
            },
        )
        .unwrap();
        assert!(est.value > 0.0);
        let w = est.witness.unwrap();
        assert!((sobolev_ratio(&model, &w).unwrap() - est.diagnostics.best_ratio).abs() < 1e-8);
    }

    #[test]
    fn auto_takes_the_maximum() {
        let model = build_torus(3, 4, 1.0).unwrap();
        let cfg = AscentConfig {
            restarts: 2,
            iters: 30,
            ..AscentConfig::default()
        };
        let est = auto_estimate(&model, &cfg).unwrap();
        let c = &est.diagnostics.candidates;
        assert_eq!(c.len(), 3);
        assert!(c.values().all(|&v| v <= est.value));
    }

    #[test]
    fn bad_inputs() {
        let model = build_torus(3, 4, 1.0).unwrap();
        let cfg = AscentConfig {
            restarts: 0,
            ..AscentConfig::default()
        };
        assert!(matches!(sobolev_ratio_ascent(&model, &cfg), Err(Error::Usage(_))));
        assert!(matches!(CstarEstimate::user(-1.0), Err(Error::Usage(_))));
        let n = model.node_count();
        assert!(sobolev_ratio(&model, &ScalarField::constant(n, 2.0)).is_err());
    }
}
