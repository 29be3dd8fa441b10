//! Batch front-end: configuration parsing, test-family generation, identity
//! suites and report emission.
//!
//! Exit codes: 0 when every check passes, 1 when a residual or margin check
//! fails (the report is still written), 2 on configuration errors.

mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use dunkl_core::harmonics::harmonic_dim;
use dunkl_core::poly::{parse_poly, MPoly};
use dunkl_core::quadrature::{QuadBackend, SphereQuad};
use dunkl_core::report::{CheckLine, CheckSet};
use dunkl_core::samples;
use dunkl_core::tolerances as tol;
use dunkl_core::transfer::{base_context, sphere_split_residual, BallDomain, SimplexDomain, SimplexWeight};
use dunkl_core::uncertainty::WeightedSphere;
use dunkl_core::Family;

use config::{GroupSpec, KeyValueFile, RunSpec};

#[derive(Parser)]
#[command(
    name = "dunkl",
    about = "Weighted-sphere harmonic analysis: operators, expansions and uncertainty functionals",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Group family: trivial | z2 | a | b | i2
    #[arg(long)]
    group: Option<String>,
    /// Ambient dimension d
    #[arg(long)]
    dim: Option<usize>,
    /// Dihedral order (i2 only)
    #[arg(long)]
    m: Option<usize>,
    /// Multiplicity values, one per root orbit, comma separated
    #[arg(long)]
    kappa: Option<String>,
    /// Degree budget for generated test functions
    #[arg(long)]
    degree: Option<usize>,
    /// Seed for all pseudo-random generation
    #[arg(long)]
    seed: Option<u64>,
    /// Number of random samples per suite
    #[arg(long)]
    samples: Option<usize>,
    /// Residual tolerance override
    #[arg(long)]
    tol: Option<f64>,
    /// Flat key-value config file with [group] and [run] sections
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report output path
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format: json | csv
    #[arg(long, default_value = "json")]
    format: String,
}

#[derive(Subcommand)]
enum Command {
    /// Run the identity verification suites on a generated test family.
    Verify(CommonArgs),
    /// Print the harmonic-space dimensions and Laplacian eigenvalues.
    Spectrum(CommonArgs),
    /// Localization-times-Dirichlet products with full residual reports.
    Uncertainty {
        #[command(flatten)]
        common: CommonArgs,
        /// Evaluate a single function read from a polynomial text file.
        #[arg(long)]
        function: Option<PathBuf>,
    },
    /// Minimize the uncertainty product over a harmonic coefficient sphere.
    EstimateConstant {
        #[command(flatten)]
        common: CommonArgs,
        /// Harmonic degree budget of the search space
        #[arg(long, default_value_t = 2)]
        budget: usize,
        /// Random restarts of the projected-gradient descent
        #[arg(long, default_value_t = 32)]
        restarts: usize,
    },
    /// Check the two integral bounds behind the uncertainty proof.
    ProofBounds {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated split parameters in (0, 1)
        #[arg(long, default_value = "0.1,0.3,0.5,0.7,0.9")]
        epsilon: String,
    },
    /// Run the ball/simplex transfer identity suites.
    TransferCheck {
        #[command(flatten)]
        common: CommonArgs,
        /// Domain variant: ball | t1 | t2
        #[arg(long, default_value = "t1")]
        variant: String,
        /// Ball exponent mu (ball variant)
        #[arg(long)]
        mu: Option<String>,
    },
    /// Cross-check the integration backends on a monomial/polynomial probe set.
    Moments(CommonArgs),
}

#[derive(Serialize)]
struct Summary {
    passed: usize,
    failed: usize,
}

#[derive(Serialize)]
struct RunReport<'a, T: Serialize> {
    command: &'a str,
    group: &'a GroupSpec,
    run: &'a RunSpec,
    backend: String,
    checks: &'a [CheckLine],
    summary: Summary,
    details: T,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_workers();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn init_workers() {
    if let Ok(n) = std::env::var("DUNKL_WORKERS") {
        if let Ok(n) = n.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
}

fn load_specs(common: &CommonArgs) -> Result<(GroupSpec, RunSpec, Option<KeyValueFile>)> {
    let file = common
        .config
        .as_deref()
        .map(KeyValueFile::load)
        .transpose()?;
    let group = GroupSpec::resolve(
        common.group.clone(),
        common.dim,
        common.m,
        common.kappa.clone(),
        file.as_ref(),
    )?;
    let run = RunSpec::resolve(
        common.degree,
        common.seed,
        common.samples,
        common.tol,
        file.as_ref(),
    )?;
    Ok((group, run, file))
}

fn emit<T: Serialize>(
    common: &CommonArgs,
    command: &str,
    group: &GroupSpec,
    run: &RunSpec,
    backend: String,
    checks: &CheckSet,
    details: T,
) -> Result<bool> {
    print!("{}", checks.render_lines());
    println!(
        "summary: {} passed, {} failed",
        checks.passed(),
        checks.failed()
    );
    let report = RunReport {
        command,
        group,
        run,
        backend,
        checks: &checks.checks,
        summary: Summary {
            passed: checks.passed(),
            failed: checks.failed(),
        },
        details,
    };
    if let Some(path) = &common.out {
        let body = match common.format.as_str() {
            "json" => serde_json::to_string_pretty(&report)? + "\n",
            "csv" => checks.to_csv(),
            other => bail!("unknown format `{other}` (expected json|csv)"),
        };
        std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
        println!("report written to {}", path.display());
    }
    Ok(checks.all_passed())
}

fn weighted_sphere(group: &GroupSpec, max_degree: usize) -> Result<Arc<WeightedSphere>> {
    let ctx = group.build()?;
    Ok(WeightedSphere::new(ctx, max_degree)?)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Verify(common) => {
            let (group, run, _) = load_specs(&common)?;
            let ws = weighted_sphere(&group, run.degree.max(5).min(8))?;
            let (checks, details) = cmd_verify(&ws, &run)?;
            emit(&common, "verify", &group, &run, ws.meta().backend, &checks, details)
        }
        Command::Spectrum(common) => {
            let (group, run, _) = load_specs(&common)?;
            let ws = weighted_sphere(&group, run.degree.min(8))?;
            let (checks, details) = cmd_spectrum(&ws, &run)?;
            emit(&common, "spectrum", &group, &run, ws.meta().backend, &checks, details)
        }
        Command::Uncertainty { common, function } => {
            let (group, run, _) = load_specs(&common)?;
            let ws = weighted_sphere(&group, run.degree.max(4).min(8))?;
            let (checks, details) = cmd_uncertainty(&ws, &run, function.as_deref())?;
            emit(&common, "uncertainty", &group, &run, ws.meta().backend, &checks, details)
        }
        Command::EstimateConstant {
            common,
            budget,
            restarts,
        } => {
            let (group, run, _) = load_specs(&common)?;
            let ws = weighted_sphere(&group, budget.max(2).min(8))?;
            let (checks, details) = cmd_estimate(&ws, &run, budget, restarts)?;
            emit(
                &common,
                "estimate-constant",
                &group,
                &run,
                ws.meta().backend,
                &checks,
                details,
            )
        }
        Command::ProofBounds { common, epsilon } => {
            let (group, run, _) = load_specs(&common)?;
            let ws = weighted_sphere(&group, run.degree.max(4).min(8))?;
            let eps: Vec<f64> = epsilon
                .split(',')
                .map(|s| s.trim().parse::<f64>().context("epsilon list"))
                .collect::<Result<_>>()?;
            if eps.iter().any(|&e| !(0.0 < e && e < 1.0)) {
                bail!("epsilon values must lie strictly between 0 and 1");
            }
            let (checks, details) = cmd_proof_bounds(&ws, &run, &eps)?;
            emit(&common, "proof-bounds", &group, &run, ws.meta().backend, &checks, details)
        }
        Command::TransferCheck {
            common,
            variant,
            mu,
        } => {
            let (group, run, _) = load_specs(&common)?;
            let (checks, details, backend) = cmd_transfer(&group, &run, &variant, mu.as_deref())?;
            emit(&common, "transfer-check", &group, &run, backend, &checks, details)
        }
        Command::Moments(common) => {
            let (group, run, _) = load_specs(&common)?;
            let (checks, details) = cmd_moments(&group, &run)?;
            emit(&common, "moments", &group, &run, "multi".into(), &checks, details)
        }
    }
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct VerifyDetails {
    samples: usize,
    decomposition_worst: f64,
    lemma_worst: f64,
    gradient_worst: f64,
    parseval_worst: f64,
}

fn cmd_verify(ws: &Arc<WeightedSphere>, run: &RunSpec) -> Result<(CheckSet, VerifyDetails)> {
    use rand::prelude::*;
    use rand_chacha::ChaCha20Rng;

    let mut checks = CheckSet::new();
    let d = ws.dim();

    // Basis health: dimensions, orthonormality, eigenvalue law.
    let n_max = run.degree.min(5);
    let mut ortho_worst = 0.0f64;
    let mut eig_worst = 0.0f64;
    for n in 0..=n_max {
        let basis = ws.store().basis(n)?;
        if basis.dim() != harmonic_dim(d, n) {
            checks.push(CheckLine::flag(
                "harmonic-dimension",
                format!("degree {n} basis dimension"),
                false,
            ));
        }
        for (i, yi) in basis.elements.iter().enumerate() {
            for (j, yj) in basis.elements.iter().enumerate() {
                let v = ws.quad().inner(yi, yj)?;
                let target = if i == j { 1.0 } else { 0.0 };
                ortho_worst = ortho_worst.max((v - target).abs());
            }
            let lap = ws
                .ctx()
                .sphere_laplacian_poly(&dunkl_core::Poly::Float(yi.clone()))?;
            let shifted = lap.as_float().add(&yi.scale(&ws.store().eigenvalue(n)));
            eig_worst = eig_worst.max(ws.quad().norm_sq(&shifted)?.abs().sqrt());
        }
    }
    checks.push(CheckLine::residual(
        "basis-orthonormality",
        format!("pairwise inner products, degrees 0..={n_max}"),
        ortho_worst,
        1e-9,
    ));
    checks.push(CheckLine::residual(
        "eigenvalue-law",
        format!("sphere Laplacian on basis elements, degrees 0..={n_max}"),
        eig_worst,
        tol::EIGENVALUE_LAW,
    ));

    // Identity suites over the generated family.
    let family: Vec<MPoly<f64>> = samples::test_family(ws.ctx(), run.degree, run.samples, run.seed)
        .iter()
        .map(|p| p.as_float())
        .filter(|p| !p.is_zero())
        .collect();
    let results: Vec<(f64, f64, f64, bool, f64)> = family
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let dec = ws.verify_decomposition(f)?;
            let grad = ws.verify_gradient_identity(f)?;
            let mut rng = ChaCha20Rng::seed_from_u64(run.seed ^ (i as u64).wrapping_mul(0x9e37));
            let mut y: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n: f64 = y.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
            y.iter_mut().for_each(|x| *x /= n);
            let lemma = ws.verify_lemma(f, &y)?;
            // Parseval
            let sf = ws.store().decompose(f)?;
            let parseval = (ws.quad().norm_sq(f)? - sf.norm_sq()).abs();
            Ok((
                dec.residual,
                lemma.residual,
                grad.residual,
                grad.norm_inequality_ok && grad.sign_ok,
                parseval,
            ))
        })
        .collect::<Result<_>>()?;

    let worst = |sel: fn(&(f64, f64, f64, bool, f64)) -> f64| {
        results.iter().map(sel).fold(0.0f64, f64::max)
    };
    let details = VerifyDetails {
        samples: results.len(),
        decomposition_worst: worst(|r| r.0),
        lemma_worst: worst(|r| r.1),
        gradient_worst: worst(|r| r.2),
        parseval_worst: worst(|r| r.4),
    };
    checks.push(CheckLine::residual(
        "laplacian-decomposition",
        format!("{} samples, degree <= {}", results.len(), run.degree),
        details.decomposition_worst,
        run.tolerance,
    ));
    checks.push(CheckLine::residual(
        "moment-identity",
        "first-moment identity at seeded directions",
        details.lemma_worst,
        run.tolerance,
    ));
    checks.push(CheckLine::residual(
        "gradient-identity",
        "Dirichlet vs tangential gradient with radial correction",
        details.gradient_worst,
        run.tolerance,
    ));
    checks.push(CheckLine::flag(
        "gradient-inequality",
        "norm inequality and sign condition on all samples",
        results.iter().all(|r| r.3),
    ));
    checks.push(CheckLine::residual(
        "parseval",
        "norm equals the sum of squared components",
        details.parseval_worst,
        1e-9 * (1.0 + results.len() as f64 / 100.0),
    ));
    if ws.ctx().kappa().total() == 0.0 {
        // Classical reduction: gradient norm equals the angular sum.
        let mut worst = 0.0f64;
        for f in family.iter().take(20) {
            let dec = ws.verify_decomposition(f)?;
            let grad = ws.verify_gradient_identity(f)?;
            worst = worst.max((grad.gradient_norm_sq - dec.rotation_sum).abs());
        }
        checks.push(CheckLine::residual(
            "classical-gradient-reduction",
            "zero-multiplicity gradient norm equals angular-derivative sum",
            worst,
            tol::CLASSICAL,
        ));
    }
    Ok((checks, details))
}

// ---------------------------------------------------------------------------
// spectrum
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct SpectrumRow {
    degree: usize,
    dim_formula: usize,
    dim_built: usize,
    eigenvalue: f64,
}

fn cmd_spectrum(ws: &Arc<WeightedSphere>, run: &RunSpec) -> Result<(CheckSet, Vec<SpectrumRow>)> {
    let mut checks = CheckSet::new();
    let mut rows = vec![];
    println!("degree  dim H_n  eigenvalue n(n+2*lambda)   [lambda = {}]", ws.ctx().lambda());
    for n in 0..=run.degree.min(8) {
        let basis = ws.store().basis(n)?;
        let row = SpectrumRow {
            degree: n,
            dim_formula: harmonic_dim(ws.dim(), n),
            dim_built: basis.dim(),
            eigenvalue: ws.store().eigenvalue(n),
        };
        println!("{:>6}  {:>7}  {:>24.12}", row.degree, row.dim_built, row.eigenvalue);
        checks.push(CheckLine::flag(
            "spectrum",
            format!("degree {n}: built dimension matches the formula"),
            row.dim_built == row.dim_formula,
        ));
        rows.push(row);
    }
    Ok((checks, rows))
}

// ---------------------------------------------------------------------------
// uncertainty
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct UncertaintyDetails {
    count: usize,
    min_product: f64,
    max_product: f64,
    reports: Vec<dunkl_core::uncertainty::UncertaintyReport>,
}

fn cmd_uncertainty(
    ws: &Arc<WeightedSphere>,
    run: &RunSpec,
    function: Option<&std::path::Path>,
) -> Result<(CheckSet, UncertaintyDetails)> {
    let mut checks = CheckSet::new();
    let inputs: Vec<MPoly<f64>> = match function {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            vec![parse_poly(&text, ws.dim())
                .map_err(|e| anyhow!("parsing {}: {e}", path.display()))?
                .as_float()]
        }
        None => samples::test_family(ws.ctx(), run.degree, run.samples, run.seed)
            .iter()
            .map(|p| p.as_float())
            .filter(|p| !p.is_zero())
            .collect(),
    };
    let reports: Vec<dunkl_core::uncertainty::UncertaintyReport> = inputs
        .par_iter()
        .filter_map(|f| ws.uncertainty_product(f).ok())
        .collect();
    if reports.is_empty() {
        bail!("no admissible inputs (all were constant after mean removal)");
    }
    let min_product = reports.iter().map(|r| r.product).fold(f64::INFINITY, f64::min);
    let max_product = reports.iter().map(|r| r.product).fold(0.0f64, f64::max);
    checks.push(CheckLine::flag(
        "localization-product",
        format!("{} admissible samples, all products positive", reports.len()),
        reports.iter().all(|r| r.product > 0.0),
    ));
    let arith_worst = reports
        .iter()
        .map(|r| (r.localization * r.dirichlet - r.product).abs())
        .fold(0.0f64, f64::max);
    checks.push(CheckLine::residual(
        "report-arithmetic",
        "product equals localization times Dirichlet",
        arith_worst,
        tol::REPORT_ARITHMETIC,
    ));
    for (name, sel) in [
        ("laplacian-decomposition", 0usize),
        ("gradient-identity", 1),
        ("moment-identity", 2),
    ] {
        let worst = reports
            .iter()
            .map(|r| match sel {
                0 => r.decomposition_residual,
                1 => r.gradient_residual,
                _ => r.lemma_residual,
            })
            .fold(0.0f64, f64::max);
        checks.push(CheckLine::residual(
            name,
            "per-sample residual inside the product reports",
            worst,
            run.tolerance,
        ));
    }
    checks.push(CheckLine::flag(
        "gradient-inequality",
        "norm inequality and sign condition",
        reports.iter().all(|r| r.norm_inequality_ok && r.sign_ok),
    ));
    // Closed form vs grid search on a few samples.
    let mut grid_worst = 0.0f64;
    for (i, f) in inputs.iter().take(5).enumerate() {
        if let Ok((fnorm, _)) = ws.normalize_admissible(f) {
            let (closed, _) = ws.localization_min(&fnorm)?;
            let (grid, _) = ws.grid_search_localization(&fnorm, 10_000, run.seed ^ i as u64)?;
            grid_worst = grid_worst.max((closed - grid).abs());
        }
    }
    checks.push(CheckLine::residual(
        "localization-grid",
        "closed-form minimum matches seeded grid search",
        grid_worst,
        tol::LOCALIZATION_GRID,
    ));
    let keep = if function.is_some() { reports.len() } else { 3 };
    let details = UncertaintyDetails {
        count: reports.len(),
        min_product,
        max_product,
        reports: reports.into_iter().take(keep).collect(),
    };
    Ok((checks, details))
}

// ---------------------------------------------------------------------------
// estimate-constant
// ---------------------------------------------------------------------------

fn cmd_estimate(
    ws: &Arc<WeightedSphere>,
    run: &RunSpec,
    budget: usize,
    restarts: usize,
) -> Result<(CheckSet, dunkl_core::uncertainty::ConstantEstimate)> {
    let est = ws.estimate_constant(budget, restarts, run.seed, &[])?;
    let mut checks = CheckSet::new();
    checks.push(CheckLine::flag(
        "constant-positive",
        format!("estimated constant {:.9} is positive", est.c_hat),
        est.c_hat > 0.0,
    ));
    checks.push(CheckLine::flag(
        "bound-order",
        format!(
            "proof-side bound {:.9} does not exceed the optimization-side estimate",
            est.proof_lower_bound
        ),
        est.proof_lower_bound <= est.c_hat,
    ));
    checks.push(CheckLine::flag(
        "optimizer-converged",
        "best restart reached stationarity",
        est.converged,
    ));
    println!(
        "estimate: {:.9}  (proof-side lower bound {:.9}, budget {}, {} restarts, seed {})",
        est.c_hat, est.proof_lower_bound, budget, restarts, run.seed
    );
    Ok((checks, est))
}

// ---------------------------------------------------------------------------
// proof-bounds
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ProofBoundsRow {
    epsilon: f64,
    samples: usize,
    min_j1_margin: f64,
    min_j2_margin: f64,
    min_pointwise_margin: f64,
}

fn cmd_proof_bounds(
    ws: &Arc<WeightedSphere>,
    run: &RunSpec,
    eps: &[f64],
) -> Result<(CheckSet, Vec<ProofBoundsRow>)> {
    use rand::prelude::*;
    use rand_chacha::ChaCha20Rng;
    let d = ws.dim();
    let family: Vec<MPoly<f64>> = samples::test_family(ws.ctx(), run.degree, run.samples, run.seed)
        .iter()
        .map(|p| p.as_float())
        .filter_map(|f| ws.normalize_admissible(&f).ok().map(|(fnorm, _)| fnorm))
        .collect();
    let mut rng = ChaCha20Rng::seed_from_u64(run.seed ^ 0xbead);
    let directions: Vec<Vec<f64>> = (0..family.len())
        .map(|_| {
            let mut y: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n: f64 = y.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
            y.iter_mut().for_each(|x| *x /= n);
            y
        })
        .collect();
    let mut checks = CheckSet::new();
    let mut rows = vec![];
    for &e in eps {
        let margins: Vec<(f64, f64, f64)> = family
            .par_iter()
            .zip(&directions)
            .map(|(f, y)| {
                let r = ws.proof_bounds(f, y, e)?;
                let j2_min = r
                    .j2
                    .iter()
                    .map(|c| c.margin)
                    .fold(f64::INFINITY, f64::min);
                Ok((r.j1_margin, j2_min, r.pointwise_margin_min))
            })
            .collect::<Result<_>>()?;
        let row = ProofBoundsRow {
            epsilon: e,
            samples: margins.len(),
            min_j1_margin: margins.iter().map(|m| m.0).fold(f64::INFINITY, f64::min),
            min_j2_margin: margins.iter().map(|m| m.1).fold(f64::INFINITY, f64::min),
            min_pointwise_margin: margins.iter().map(|m| m.2).fold(f64::INFINITY, f64::min),
        };
        checks.push(CheckLine::margin(
            "proof-bound-j1",
            format!("epsilon {e}: rotation-term bound margin"),
            row.min_j1_margin.min(row.min_pointwise_margin),
            tol::MARGIN_FLOOR,
        ));
        if row.min_j2_margin.is_finite() {
            checks.push(CheckLine::margin(
                "proof-bound-j2",
                format!("epsilon {e}: reflection-term bound margin"),
                row.min_j2_margin,
                tol::MARGIN_FLOOR,
            ));
        }
        rows.push(row);
    }
    // Exact tangential contraction on rational samples.
    let rational = samples::random_family(d, run.degree, 10, run.seed ^ 0xfeed);
    let all_zero = rational
        .iter()
        .all(|f| {
            dunkl_core::operators::tangential_euler_contraction(f)
                .map(|z| z.is_zero())
                .unwrap_or(false)
        });
    checks.push(CheckLine::flag(
        "tangential-contraction",
        "x_i x_j D_ij contraction vanishes exactly in rational arithmetic",
        all_zero,
    ));
    Ok((checks, rows))
}

// ---------------------------------------------------------------------------
// transfer-check
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct TransferDetails {
    variant: String,
    split_residual: f64,
    ball_dual_residual: f64,
    laplacian_dual_residual: f64,
    semigroup_residual: f64,
    simplex_dual_residual: Option<f64>,
    factor_errors: Vec<(f64, f64)>,
    products_checked: usize,
    min_product: f64,
    localization_gap: Option<f64>,
}

fn cmd_transfer(
    group: &GroupSpec,
    run: &RunSpec,
    variant: &str,
    mu: Option<&str>,
) -> Result<(CheckSet, TransferDetails, String)> {
    use rand::prelude::*;
    use rand_chacha::ChaCha20Rng;
    let mut rng = ChaCha20Rng::seed_from_u64(run.seed ^ 0x7453);
    let d = group.dim;
    let max_degree = 8;
    let kappa = group.kappa_values()?;

    let (ball, simplex): (Arc<BallDomain>, Option<Arc<SimplexDomain>>) = match variant {
        "ball" => {
            let family = match group.family.as_str() {
                "trivial" => Family::Trivial,
                "z2" => Family::Z2,
                "a" => Family::A,
                "b" => Family::B,
                other => bail!("ball variant supports trivial|z2|a|b bases, got `{other}`"),
            };
            let base = base_context(family, d, None, &kappa)?;
            let mu = dunkl_core::poly::parse_rational(mu.unwrap_or("0"))
                .map_err(|e| anyhow!("mu: {e}"))?;
            (BallDomain::new(base, mu, max_degree)?, None)
        }
        "t1" => {
            if kappa.len() != d + 1 {
                bail!(
                    "t1 needs {} kappa values (one per coordinate plus the remainder), got {}",
                    d + 1,
                    kappa.len()
                );
            }
            let sx = SimplexDomain::new(d, SimplexWeight::SignType { kappa }, max_degree)?;
            (sx.ball().clone(), Some(sx))
        }
        "t2" => {
            if kappa.len() != 3 {
                bail!("t2 needs 3 kappa values (axis, cross, remainder), got {}", kappa.len());
            }
            let sx = SimplexDomain::new(
                d,
                SimplexWeight::HyperoctType {
                    axis: kappa[0].clone(),
                    diff: kappa[1].clone(),
                    mu: kappa[2].clone(),
                },
                max_degree,
            )?;
            (sx.ball().clone(), Some(sx))
        }
        other => bail!("unknown transfer variant `{other}` (expected ball|t1|t2)"),
    };
    let backend = ball.sphere().meta().backend;

    let mut random_poly = |d: usize, deg: u32| -> MPoly<f64> {
        let mut f = MPoly::zero(d);
        for _ in 0..12 {
            let e: Vec<u32> = (0..d).map(|_| rng.gen_range(0..=deg)).collect();
            if e.iter().sum::<u32>() > deg {
                continue;
            }
            f = f.add(&MPoly::monomial(d, e, rng.gen_range(-1.0..1.0)));
        }
        f
    };

    let mut checks = CheckSet::new();

    let mut split_worst = 0.0f64;
    for _ in 0..5 {
        let big = random_poly(d + 1, 6);
        split_worst = split_worst.max(sphere_split_residual(&big)?);
    }
    checks.push(CheckLine::residual(
        "transfer-ball-integral",
        "hemisphere splitting of the plain surface integral",
        split_worst,
        tol::TRANSFER_INTEGRAL,
    ));

    let mut ball_dual = 0.0f64;
    for _ in 0..run.samples.max(5) {
        let f = random_poly(d, 6);
        let a = ball.integral(&f)?;
        let b = ball.integral_radial(&f)?;
        ball_dual = ball_dual.max((a - b).abs());
    }
    checks.push(CheckLine::residual(
        "transfer-ball-integral",
        "sphere-lift route equals the radial Beta route",
        ball_dual,
        tol::TRANSFER_INTEGRAL,
    ));

    let mut lap_dual = 0.0f64;
    for _ in 0..3 {
        let f = random_poly(d, 4);
        lap_dual = lap_dual.max(ball.laplacian_dual_residual(&f)?);
    }
    checks.push(CheckLine::residual(
        "transfer-ball-laplacian",
        "spectral route equals the polynomial route at power one",
        lap_dual,
        tol::TRANSFER_OPERATOR,
    ));

    let mut semigroup = 0.0f64;
    for _ in 0..2 {
        let f = random_poly(d, 3);
        if let Ok(fnorm) = ball.normalize(&f) {
            let halves = ball.fractional(&ball.fractional(&fnorm, 0.5)?, 0.5)?;
            let whole = ball.fractional(&fnorm, 1.0)?;
            let diff = halves.sub(&whole);
            semigroup = semigroup.max(ball.integral(&diff.mul(&diff))?.abs().sqrt());
        }
    }
    checks.push(CheckLine::residual(
        "transfer-semigroup",
        "half powers compose to the full power",
        semigroup,
        tol::TRANSFER_OPERATOR,
    ));

    let mut simplex_dual = None;
    let mut factor_errors = vec![];
    let mut localization_gap = None;
    let mut min_product = f64::INFINITY;
    let mut products_checked = 0usize;
    if let Some(sx) = &simplex {
        let mut worst = 0.0f64;
        let mut direct_supported = true;
        for _ in 0..run.samples.max(5) {
            let g = random_poly(d, 4);
            let a = sx.integral(&g)?;
            match sx.integral_direct(&g) {
                Ok(b) => worst = worst.max((a - b).abs() / (1.0 + a.abs())),
                Err(_) => {
                    direct_supported = false;
                    break;
                }
            }
        }
        if direct_supported {
            simplex_dual = Some(worst);
            checks.push(CheckLine::residual(
                "transfer-simplex-integral",
                "sphere route equals the collapsed product rule",
                worst,
                tol::TRANSFER_INTEGRAL,
            ));
        }
        for alpha in [0.5, 1.0] {
            let g = random_poly(d, 3);
            if let Ok(gn) = sx.normalize(&g) {
                let factor = sx.transfer_factor_estimate(&gn, alpha)?;
                let err = (factor - 4f64.powf(-alpha)).abs();
                factor_errors.push((alpha, err));
                checks.push(CheckLine::residual(
                    "transfer-simplex-factor",
                    format!("quarter-power factor at alpha = {alpha}"),
                    err,
                    tol::TRANSFER_OPERATOR,
                ));
            }
        }
        let mut gap = 0.0f64;
        for _ in 0..run.samples {
            let g = random_poly(d, 3);
            if sx.normalize(&g).is_err() {
                continue;
            }
            let (report, searched) = sx.uncertainty_product(&g)?;
            min_product = min_product.min(report.product);
            products_checked += 1;
            gap = gap.max((report.localization - searched).abs());
        }
        if products_checked > 0 {
            localization_gap = Some(gap);
            checks.push(CheckLine::flag(
                "simplex-product",
                format!("{products_checked} samples, all products positive"),
                min_product > 0.0,
            ));
            checks.push(CheckLine::residual(
                "simplex-localization",
                "closed-form minimum matches the seeded simplex search",
                gap,
                tol::LOCALIZATION_GRID,
            ));
        }
    } else {
        for _ in 0..run.samples {
            let f = random_poly(d, 3);
            if let Ok(report) = ball.uncertainty_product(&f) {
                min_product = min_product.min(report.product);
                products_checked += 1;
            }
        }
        checks.push(CheckLine::flag(
            "ball-product",
            format!("{products_checked} samples, all products positive"),
            products_checked > 0 && min_product > 0.0,
        ));
    }

    let details = TransferDetails {
        variant: variant.to_string(),
        split_residual: split_worst,
        ball_dual_residual: ball_dual,
        laplacian_dual_residual: lap_dual,
        semigroup_residual: semigroup,
        simplex_dual_residual: simplex_dual,
        factor_errors,
        products_checked,
        min_product: if products_checked > 0 { min_product } else { 0.0 },
        localization_gap,
    };
    Ok((checks, details, backend))
}

// ---------------------------------------------------------------------------
// moments
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct MomentRow {
    probe: usize,
    closed: Option<f64>,
    gauss: Option<f64>,
    adaptive: Option<f64>,
    monte_carlo: Option<(f64, f64)>,
}

#[derive(Serialize)]
struct MomentsDetails {
    omega: f64,
    rows: Vec<MomentRow>,
    worst_spread: f64,
}

fn cmd_moments(group: &GroupSpec, run: &RunSpec) -> Result<(CheckSet, MomentsDetails)> {
    let ctx = group.build()?;
    let integer_kappa = (0..ctx.root_system().num_roots())
        .all(|v| ctx.kappa().value_rat(v).is_integer());
    let closed = SphereQuad::with_backend(ctx.clone(), QuadBackend::ClosedForm).ok();
    let gauss = SphereQuad::with_backend(ctx.clone(), QuadBackend::GaussProduct).ok();
    let adaptive = SphereQuad::with_backend(ctx.clone(), QuadBackend::Adaptive).ok();
    let reference = closed
        .clone()
        .or_else(|| gauss.clone())
        .or_else(|| adaptive.clone())
        .ok_or_else(|| anyhow!("no integration backend available for this configuration"))?;

    let probes: Vec<MPoly<f64>> = samples::random_family(group.dim, run.degree, run.samples.max(10), run.seed)
        .iter()
        .map(|p| p.as_float())
        .collect();
    let mut rows = vec![];
    let mut worst_spread = 0.0f64;
    for (i, p) in probes.iter().enumerate() {
        let c = closed.as_ref().and_then(|q| q.integrate_poly(p).ok());
        let g = gauss.as_ref().and_then(|q| q.integrate_poly(p).ok());
        let a = adaptive.as_ref().and_then(|q| q.integrate_poly(p).ok());
        let values: Vec<f64> = [c, g, a].iter().flatten().copied().collect();
        if values.len() >= 2 {
            let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            worst_spread = worst_spread.max(hi - lo);
        }
        let mc = if i < 2 {
            Some(reference.monte_carlo(&|x| p.eval_f64(x), 200_000, run.seed ^ (i as u64 + 77)))
        } else {
            None
        };
        rows.push(MomentRow {
            probe: i,
            closed: c,
            gauss: g,
            adaptive: a,
            monte_carlo: mc,
        });
    }
    let mut checks = CheckSet::new();
    let spread_tol = if integer_kappa {
        tol::BACKEND_AGREEMENT
    } else {
        tol::BACKEND_AGREEMENT_ROUGH
    };
    checks.push(CheckLine::residual(
        "integration-coherence",
        format!("{} probes across available backends", rows.len()),
        worst_spread,
        spread_tol,
    ));
    for row in rows.iter().take(2) {
        if let (Some((mc, se)), Some(reference)) = (row.monte_carlo, row.closed.or(row.gauss).or(row.adaptive)) {
            checks.push(CheckLine::flag(
                "integration-monte-carlo",
                format!(
                    "probe {}: Monte-Carlo {mc:.6} within 3 sigma ({se:.2e}) of {reference:.6}",
                    row.probe
                ),
                (mc - reference).abs() <= tol::MC_SIGMA * se,
            ));
        }
    }
    let omega = reference.omega()?;
    checks.push(CheckLine::flag(
        "weighted-measure",
        format!("total weighted measure {omega:.9} is positive"),
        omega > 0.0,
    ));
    let details = MomentsDetails {
        omega,
        rows,
        worst_spread,
    };
    Ok((checks, details))
}
