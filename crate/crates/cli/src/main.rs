use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use nmp_core::constants::constant_set;
use nmp_core::harness::{
    load_records, render_report, run_suite, trial_seed, CstarPolicy, Outcome, ReportFormat,
    SuiteConfig,
};
use nmp_core::isoperimetric::{auto_estimate, cheeger_sweep, slab_candidate, sobolev_ratio_ascent, AscentConfig};
use nmp_core::kernels::{centered_kernel, green_function, green_lower_bound_record, heat_kernel};
use nmp_core::model::{write_model_cache, ModelCache};
use nmp_core::solver::{random_instance, theorem_a_rescaled, PRODUCT_TOL};
use nmp_core::{Error, ModelSpec, Result, SpectralModel, VerificationRecord};

#[derive(Parser)]
#[command(name = "nmp", version, about = "Numerical checks of Neumann maximum principles on spectral models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a model and print its summary
    Model(ModelArgs),
    /// Print the constants for (n, p, C*)
    Constants(ConstantsArgs),
    /// Build a kernel matrix and report its extremes
    Green(GreenArgs),
    /// Estimate the isoperimetric constant C*
    Isoperimetric(IsoArgs),
    /// Run one inequality check over random instances
    Verify(VerifyArgs),
    /// Run a configured suite
    Suite(SuiteArgs),
    /// Render tables and plot data from a records file
    Report(ReportArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Model spec: torus:n:m:L, sphere3:m, graph:<path>, complete:N:n, cycle:N:n
    #[arg(long)]
    model: String,
    /// Write the model as an NMPM1 file
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cache directory for built models
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ConstantsArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    cstar: f64,
    /// Tolerance on log A
    #[arg(long, default_value_t = PRODUCT_TOL)]
    tol: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelChoice {
    Green,
    Heat,
    Centered,
}

#[derive(Args)]
struct GreenArgs {
    #[arg(long)]
    model: String,
    #[arg(long, value_enum, default_value = "green")]
    kind: KernelChoice,
    /// Time for heat and centered kernels
    #[arg(long, default_value_t = 0.1)]
    t: f64,
    /// Check the lower bound of G₀ with this C* (`auto` estimates it)
    #[arg(long)]
    cstar: Option<String>,
    /// Write the matrix as an NMPK1 file
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum IsoMethod {
    Ascent,
    Sweep,
    Slab,
    All,
}

#[derive(Args)]
struct IsoArgs {
    #[arg(long)]
    model: String,
    #[arg(long, value_enum, default_value = "all")]
    method: IsoMethod,
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    #[arg(long, default_value_t = 200)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Theorem {
    Moser,
    Solution,
    #[value(name = "A", alias = "a")]
    A,
    Green,
}

impl Theorem {
    fn check_id(self) -> &'static str {
        match self {
            Theorem::Moser => "moser",
            Theorem::Solution => "solution",
            Theorem::A => "theorem_a",
            Theorem::Green => "green_lower_bound",
        }
    }
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    theorem: Theorem,
    #[arg(long)]
    model: String,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Exponent p > n/2
    #[arg(long, default_value_t = 2.0)]
    pexp: f64,
    /// `auto` or a positive value
    #[arg(long, default_value = "auto")]
    cstar: String,
    /// Number of nonconstant modes in random fields
    #[arg(long, default_value_t = 20)]
    band: usize,
    /// Also report the global bound under the metric change g → αg
    #[arg(long)]
    rescale: Option<f64>,
    /// Directory for records.jsonl
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SuiteArgs {
    /// key = value configuration file
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out` in the config)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// records.jsonl written by `suite` or `verify`
    #[arg(long)]
    records: PathBuf,
    #[arg(long, default_value = "all")]
    format: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    json: bool,
}

/// Result of a subcommand: the JSON document, its text rendering and the exit code.
struct Output {
    json: Value,
    text: String,
    code: u8,
}

impl Output {
    fn ok(json: Value, text: String) -> Self {
        Output { json, text, code: 0 }
    }
}

fn build(spec: &str, cache: Option<&PathBuf>) -> Result<(ModelSpec, SpectralModel)> {
    let spec: ModelSpec = spec.parse()?;
    let model = match cache {
        Some(dir) => ModelCache::new(dir).get_or_build(&spec)?,
        None => spec.build()?,
    };
    Ok((spec, model))
}

fn table(rows: &[(&str, String)]) -> String {
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    rows.iter().map(|(k, v)| format!("{k:<width$}  {v}\n")).collect()
}

fn model_cmd(a: &ModelArgs) -> Result<Output> {
    let (spec, m) = build(&a.model, a.cache.as_ref())?;
    if let Some(path) = &a.out {
        write_model_cache(&m, path)?;
    }
    let json = json!({
        "spec": spec.to_string(),
        "label": m.label,
        "kind": m.kind.name(),
        "n": m.n_intrinsic,
        "nodes": m.node_count(),
        "modes": m.mode_count(),
        "complete": m.is_complete(),
        "volume": m.volume,
        "diameter": m.diameter,
        "lambda1": m.lambda1(),
        "lambda_max": m.eigenvalues.max(),
        "gram_residual": m.gram_residual(),
    });
    let text = table(&[
        ("spec", spec.to_string()),
        ("kind", m.kind.name().into()),
        ("n", m.n_intrinsic.to_string()),
        ("nodes", m.node_count().to_string()),
        ("modes", m.mode_count().to_string()),
        ("complete", m.is_complete().to_string()),
        ("volume", m.volume.to_string()),
        ("diameter", m.diameter.map_or("-".into(), |d| d.to_string())),
        ("lambda1", m.lambda1().to_string()),
        ("gram_residual", format!("{:e}", m.gram_residual())),
    ]);
    Ok(Output::ok(json, text))
}

fn constants_cmd(a: &ConstantsArgs) -> Result<Output> {
    let cs = constant_set(a.n, a.p, a.cstar, a.tol)?;
    let json = serde_json::to_value(&cs).map_err(|e| Error::Parse(e.to_string()))?;
    let mut rows: Vec<(&str, String)> = cs.entries().into_iter().map(|(k, v)| (k, v.to_string())).collect();
    rows.push(("degenerate", cs.degenerate.to_string()));
    Ok(Output::ok(json, table(&rows)))
}

fn cstar_for(model: &SpectralModel, policy: &str, seed: u64) -> Result<(f64, &'static str)> {
    match policy.parse::<CstarPolicy>()? {
        CstarPolicy::Fixed(v) => Ok((v, "user")),
        CstarPolicy::Auto => {
            let est = auto_estimate(model, &AscentConfig { seed, ..AscentConfig::default() })?;
            Ok((est.value, est.provenance()))
        }
    }
}

fn green_cmd(a: &GreenArgs) -> Result<Output> {
    let (spec, m) = build(&a.model, None)?;
    let k = match a.kind {
        KernelChoice::Green => green_function(&m)?,
        KernelChoice::Heat => heat_kernel(&m, a.t)?,
        KernelChoice::Centered => centered_kernel(&m, a.t)?,
    };
    if let Some(path) = &a.out {
        k.write_nmpk1(path)?;
    }
    let (min_off, i, j) = k.min_off_diagonal();
    let mut json = json!({
        "spec": spec.to_string(),
        "kind": format!("{:?}", k.kind),
        "size": k.size(),
        "min_off_diagonal": min_off,
        "argmin": [i, j],
        "max_diagonal": k.diagonal().max(),
        "symmetry_residual": k.symmetry_residual(),
        "row_sum_residual": k.row_sum_residual(&m),
    });
    let mut rows = vec![
        ("spec", spec.to_string()),
        ("kind", format!("{:?}", k.kind)),
        ("size", k.size().to_string()),
        ("min_off_diagonal", format!("{min_off} at ({i}, {j})")),
        ("symmetry_residual", format!("{:e}", k.symmetry_residual())),
        ("row_sum_residual", format!("{:e}", k.row_sum_residual(&m))),
    ];
    let mut code = 0;
    if let Some(policy) = &a.cstar {
        if !matches!(a.kind, KernelChoice::Green) {
            return Err(Error::Usage("--cstar applies only to --kind green".into()));
        }
        let (c, prov) = cstar_for(&m, policy, 0)?;
        let rec = green_lower_bound_record(&m, &k, c, prov)?;
        code = exit_for(std::slice::from_ref(&rec));
        rows.push(("lower_bound", format!("{} <= {} ({:?})", rec.lhs, rec.rhs, rec.status)));
        json["lower_bound"] = serde_json::to_value(&rec).map_err(|e| Error::Parse(e.to_string()))?;
    }
    Ok(Output {
        json,
        text: table(&rows),
        code,
    })
}

fn iso_cmd(a: &IsoArgs) -> Result<Output> {
    let (spec, m) = build(&a.model, None)?;
    let cfg = AscentConfig {
        restarts: a.restarts,
        iters: a.iters,
        seed: a.seed,
        ..AscentConfig::default()
    };
    let est = match a.method {
        IsoMethod::Ascent => sobolev_ratio_ascent(&m, &cfg)?,
        IsoMethod::Sweep => cheeger_sweep(&m)?,
        IsoMethod::Slab => slab_candidate(&m)?,
        IsoMethod::All => auto_estimate(&m, &cfg)?,
    };
    let mut json = serde_json::to_value(&est).map_err(|e| Error::Parse(e.to_string()))?;
    json["spec"] = Value::from(spec.to_string());
    let mut rows = vec![
        ("spec", spec.to_string()),
        ("cstar", est.value.to_string()),
        ("method", est.provenance().into()),
        ("lower_bound", est.is_lower_bound.to_string()),
    ];
    let cands: Vec<String> = est.diagnostics.candidates.iter().map(|(k, v)| format!("{k}={v}")).collect();
    if !cands.is_empty() {
        rows.push(("candidates", cands.join(", ")));
    }
    Ok(Output::ok(json, table(&rows)))
}

fn exit_for(records: &[VerificationRecord]) -> u8 {
    Outcome::of(records).exit_code() as u8
}

fn outcome_json(o: &Outcome) -> Value {
    json!({
        "total": o.total,
        "passed": o.passed,
        "shortfalls": o.shortfalls,
        "violations": o.violations,
        "numerical": o.numerical,
    })
}

fn outcome_text(records: &[VerificationRecord]) -> String {
    let o = Outcome::of(records);
    let min_slack = records.iter().map(|r| r.slack_ratio).fold(f64::INFINITY, f64::min);
    format!(
        "{} records: {} pass, {} estimator shortfall, {} violation, {} numerical; min slack ratio {min_slack:.6e}\n",
        o.total, o.passed, o.shortfalls, o.violations, o.numerical
    )
}

fn verify_cmd(a: &VerifyArgs) -> Result<Output> {
    let spec: ModelSpec = a.model.parse()?;
    let cfg = SuiteConfig {
        models: vec![spec.clone()],
        checks: vec![a.theorem.check_id().into()],
        trials: a.trials,
        seed: a.seed,
        exponents: vec![a.pexp],
        cstar: a.cstar.parse()?,
        band: a.band,
        out: a.out.clone(),
        ..SuiteConfig::default()
    };
    let records = run_suite(&cfg)?;
    let outcome = Outcome::of(&records);
    let mut text = outcome_text(&records);
    let mut json = json!({
        "theorem": a.theorem.check_id(),
        "model": spec.to_string(),
        "cstar": records.first().map(|r| r.cstar),
        "cstar_provenance": records.first().map(|r| r.cstar_provenance.clone()),
        "outcome": outcome_json(&outcome),
        "records": serde_json::to_value(&records).map_err(|e| Error::Parse(e.to_string()))?,
    });
    if let Some(alpha) = a.rescale {
        if !matches!(a.theorem, Theorem::A) {
            return Err(Error::Usage("--rescale applies only to --theorem A".into()));
        }
        let m = spec.build()?;
        let cstar = records.first().map_or(f64::NAN, |r| r.cstar);
        let rescaled = (0..a.trials as u64)
            .map(|t| {
                let inst = random_instance(&m, a.pexp, a.band, trial_seed(a.seed, "theorem_a", t))?;
                theorem_a_rescaled(&m, &inst, cstar, alpha)
            })
            .collect::<Result<Vec<_>>>()?;
        text.push_str(&format!("rescaled by {alpha}: {}", outcome_text(&rescaled)));
        json["rescaled"] = serde_json::to_value(&rescaled).map_err(|e| Error::Parse(e.to_string()))?;
    }
    Ok(Output {
        json,
        text,
        code: outcome.exit_code() as u8,
    })
}

fn suite_cmd(a: &SuiteArgs) -> Result<Output> {
    let text = std::fs::read_to_string(&a.config).map_err(|e| Error::io(&a.config, e))?;
    let mut cfg = SuiteConfig::parse(&text)?;
    if a.out.is_some() {
        cfg.out = a.out.clone();
    }
    let records = run_suite(&cfg)?;
    let mut files = Vec::new();
    if let Some(dir) = &cfg.out {
        files.push(dir.join("records.jsonl"));
        files.extend(render_report(&records, ReportFormat::All, dir)?);
    }
    let outcome = Outcome::of(&records);
    let json = json!({
        "outcome": outcome_json(&outcome),
        "files": files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    let mut text = outcome_text(&records);
    for f in &files {
        text.push_str(&format!("wrote {}\n", f.display()));
    }
    Ok(Output {
        json,
        text,
        code: outcome.exit_code() as u8,
    })
}

fn report_cmd(a: &ReportArgs) -> Result<Output> {
    let format: ReportFormat = a.format.parse()?;
    let records = load_records(&a.records)?;
    let files = render_report(&records, format, &a.out)?;
    let names: Vec<String> = files.iter().map(|p| p.display().to_string()).collect();
    let json = json!({ "records": records.len(), "files": names });
    let text = names.iter().map(|n| format!("wrote {n}\n")).collect();
    Ok(Output::ok(json, text))
}

fn error_code(e: &Error) -> u8 {
    match e {
        Error::Numerical(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let (json_out, result) = match &cli.command {
        Command::Model(a) => (a.json, model_cmd(a)),
        Command::Constants(a) => (a.json, constants_cmd(a)),
        Command::Green(a) => (a.json, green_cmd(a)),
        Command::Isoperimetric(a) => (a.json, iso_cmd(a)),
        Command::Verify(a) => (a.json, verify_cmd(a)),
        Command::Suite(a) => (a.json, suite_cmd(a)),
        Command::Report(a) => (a.json, report_cmd(a)),
    };
    match result {
        Ok(out) => {
            if json_out {
                println!("{}", out.json);
            } else {
                print!("{}", out.text);
            }
            ExitCode::from(out.code)
        }
        Err(e) => {
            if json_out {
                println!("{}", json!({ "error": e.to_string(), "exit_code": error_code(&e) }));
            }
            eprintln!("error: {e}");
            ExitCode::from(error_code(&e))
        }
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_exit_codes() {
        assert_eq!(error_code(&Error::Numerical("nan".into())), 3);
        assert_eq!(error_code(&Error::Usage("bad".into())), 2);
        assert_eq!(error_code(&Error::Parse("bad".into())), 2);
        assert_eq!(error_code(&Error::Model("disconnected".into())), 2);
    }

    #[test]
    fn theorem_names_map_to_checks() {
        assert_eq!(Theorem::A.check_id(), "theorem_a");
        assert_eq!(Theorem::Green.check_id(), "green_lower_bound");
    }
}
