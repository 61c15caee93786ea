//! One function per subcommand. Each returns the report text and whether
//! every asserted inequality held.

use std::path::Path;

use affapprox_core::affinefit::{best_affine_fit, empirical_r_with, FitOptions, RSearchOptions};
use affapprox_core::bounds::{calibrate_c, discretization_bound, lower_bound_r, net_radius, upper_bound_r, LowerVariant, UpperVariant};
use affapprox_core::counterexample::{
    ball_certificate, grid_windows, interval_certificate, localized_cells, localized_certificate, CertificateReport,
    CoordinateProduct, CounterexampleSpec, LocalizedSawtooth, SawtoothCurve,
};
use affapprox_core::hfunc::{h_recursion_residual, h_value, HQuery};
use affapprox_core::net::{delta_net_with, NetOptions};
use affapprox_core::space::{lipschitz_estimate, DomainMetric, PairMode};
use affapprox_core::walsh::{affine_from_walsh, walsh_bounds_check, walsh_coefficients, CubeLimits};
use affapprox_core::{corpus, GridFunction1D, GridFunctionCube, NormedSpace, UcParams};
use serde::Serialize;

use crate::cli::{Cli, Command, Generated, Global, Variant};
use crate::formats::{self, AffineJson, CubeJson, FitJson, GridJson, NetJson, ReportJson, SamplesJson, WalshJson, SCHEMA};
use crate::parallel::{resolve_threads, Workers};
use crate::CliError;

/// A finished command: report text plus the verdict.
pub struct Outcome {
    pub report: String,
    pub pass: bool,
}

impl Outcome {
    fn json<T: Serialize>(value: &T, pass: bool) -> Self {
        Outcome { report: formats::to_json(value), pass }
    }
}

/// Runs the command and writes its report; `Ok(pass)`.
pub fn execute(cli: &Cli) -> Result<bool, CliError> {
    let workers = Workers::new(resolve_threads(cli.global.parallelism)?)?;
    let outcome = compute(&cli.command, &cli.global, &workers)?;
    emit(cli.global.output.as_deref(), &outcome.report)?;
    Ok(outcome.pass)
}

pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| CliError::Io { path: p.to_path_buf(), source }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn compute(command: &Command, global: &Global, workers: &Workers) -> Result<Outcome, CliError> {
    let tol = global.tolerance;
    match command {
        Command::Energy { input, p, k } => energy(input, *p, *k, tol),
        Command::Walsh { input, eps, strict } => walsh(input, *eps, *strict, tol),
        Command::Hfunc { input, theta, m, k, x, p, recursion } => {
            hfunc(input, *theta, *m, *k, x.as_deref(), *p, recursion.as_deref(), tol)
        }
        Command::Fit { input, max_iter } => fit(input, *max_iter, tol),
        Command::RSearch { input, source_q, eps, levels, exhaustive, sweep_csv } => {
            r_search(input, *source_q, *eps, *levels, *exhaustive, sweep_csv.as_deref(), tol, workers)
        }
        Command::Counterexample { lemma, m, p, n, sweep, a, b, y, r, steps } => {
            let case = Case { a: *a, b: *b, y: y.as_deref(), r: *r };
            counterexample(lemma, CounterexampleSpec::new(*m, *p, *n)?, *sweep, case, *steps, workers)
        }
        Command::Bounds { n, p, k, eps, variant } => bounds(n, p, k, eps, variant),
        Command::Net { q, n, delta, samples } => net(*q, *n, *delta, *samples, global.seed),
        Command::Calibrate { n, p, k, eps, d, extension } => calibrate(*n, *p, *k, *eps, *d, *extension, tol),
        Command::Generate { kind, level, m, p, n, q, dim } => generate(*kind, *level, *m, *p, *n, *q, *dim, global.seed),
    }
}

fn euclidean_lip<G: affapprox_core::space::GridSamples + ?Sized>(g: &G) -> Result<f64, CliError> {
    Ok(lipschitz_estimate(g, DomainMetric::Euclidean, PairMode::Adjacent)?)
}

#[derive(Serialize)]
struct EnergyJson {
    schema: &'static str,
    p: f64,
    #[serde(rename = "K")]
    k: f64,
    energies: Vec<f64>,
    gain_bound: f64,
    max_deviation: f64,
    monotone: bool,
    lip: f64,
    pass: bool,
}

fn energy(input: &Path, p: Option<f64>, k: Option<f64>, tol: f64) -> Result<Outcome, CliError> {
    let grid = formats::read_json::<GridJson>(input)?.build()?;
    let default = grid.space().uc_params().ok();
    let p = p.or(default.map(|u| u.p)).ok_or_else(|| CliError::input("no default p for this space; pass --p"))?;
    let k = k.or(default.map(|u| u.k)).ok_or_else(|| CliError::input("no default K for this space; pass --K"))?;
    let report = grid.gain_check(UcParams::new(p, k)?, tol);
    let pass = report.pass && report.monotone;
    let json = EnergyJson {
        schema: SCHEMA,
        p,
        k,
        energies: report.energies,
        gain_bound: report.gain_bound,
        max_deviation: report.max_deviation,
        monotone: report.monotone,
        lip: euclidean_lip(&grid)?,
        pass,
    };
    Ok(Outcome::json(&json, pass))
}

#[derive(Serialize)]
struct WalshAffineJson {
    map: AffineJson,
    err_on_subcube: f64,
    bound: f64,
    /// Whether the hypotheses of the bound hold, so that it is asserted.
    checked: bool,
    ok: bool,
}

#[derive(Serialize)]
struct WalshReportJson {
    schema: &'static str,
    eps: f64,
    lip: f64,
    deviation: f64,
    walsh: WalshJson,
    max_coeff_ratio: f64,
    coeff_checked: bool,
    coeff_ok: bool,
    approx_max: f64,
    approx_checked: bool,
    approx_ok: bool,
    affine: WalshAffineJson,
    pass: bool,
}

fn walsh(input: &Path, eps: f64, strict: bool, tol: f64) -> Result<Outcome, CliError> {
    let f = formats::read_json::<CubeJson>(input)?.build()?;
    let lip = euclidean_lip(&f)?;
    let check = walsh_bounds_check(&f, eps, tol);
    let affine = affine_from_walsh(&f, eps, strict)?;
    let lipschitz = lip <= 1.0 + tol;
    let flat = lipschitz && check.deviation <= eps + tol;
    let resolved = affine_from_walsh(&f, eps, true).is_ok();
    let affine_ok = affine.err_on_subcube <= affine.bound + tol;
    let affine_checked = flat && resolved;
    let pass = (!lipschitz || check.coeff_ok) && (!flat || check.approx_ok) && (!affine_checked || affine_ok);
    let json = WalshReportJson {
        schema: SCHEMA,
        eps,
        lip,
        deviation: check.deviation,
        walsh: WalshJson::new(&walsh_coefficients(&f)),
        max_coeff_ratio: check.max_coeff_ratio,
        coeff_checked: lipschitz,
        coeff_ok: check.coeff_ok,
        approx_max: check.approx_max,
        approx_checked: flat,
        approx_ok: check.approx_ok,
        affine: WalshAffineJson {
            map: AffineJson::from_map(&affine.map),
            err_on_subcube: affine.err_on_subcube,
            bound: affine.bound,
            checked: affine_checked,
            ok: affine_ok,
        },
        pass,
    };
    Ok(Outcome::json(&json, pass))
}

#[derive(Serialize)]
struct QueryJson {
    theta: f64,
    m: u32,
    k: u32,
    x: Vec<f64>,
    p: f64,
}

#[derive(Serialize)]
struct RecursionJson {
    alpha: u32,
    beta: u32,
    gamma: u32,
    lhs: f64,
    rhs: f64,
    residual: f64,
    ok: bool,
}

#[derive(Serialize)]
struct HJson {
    schema: &'static str,
    #[serde(rename = "H")]
    h: f64,
    query: QueryJson,
    bound_n: usize,
    /// Largest axis-neighbour slope; the bound `H ≤ n` is asserted when it is at most 1.
    axis_lip: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    recursion: Option<RecursionJson>,
    pass: bool,
}

#[allow(clippy::too_many_arguments)]
fn hfunc(
    input: &Path,
    theta: Option<f64>,
    m: u32,
    k: u32,
    x: Option<&[f64]>,
    p: f64,
    recursion: Option<&[u32]>,
    tol: f64,
) -> Result<Outcome, CliError> {
    let f = formats::read_json::<CubeJson>(input)?.build()?;
    let query = HQuery {
        theta: theta.unwrap_or(f.theta()),
        m,
        k,
        x: x.map_or_else(|| f.origin().to_vec(), <[f64]>::to_vec),
        p,
    };
    let h = h_value(&f, &query)?;
    let axis_lip = euclidean_lip(&f)?;
    let n = f.n();
    let mut pass = axis_lip > 1.0 + tol || h <= n as f64 + tol;
    let recursion = match recursion {
        None => None,
        Some(&[alpha, beta, gamma]) => {
            let c = h_recursion_residual(&f, &query.x, query.theta, p, alpha, beta, gamma)?;
            let ok = c.residual <= tol;
            pass &= ok;
            Some(RecursionJson { alpha, beta, gamma, lhs: c.lhs, rhs: c.rhs, residual: c.residual, ok })
        }
        Some(other) => return Err(CliError::input(format!("--recursion takes α,β,γ, got {} values", other.len()))),
    };
    let json = HJson {
        schema: SCHEMA,
        h,
        query: QueryJson { theta: query.theta, m, k, x: query.x, p },
        bound_n: n,
        axis_lip,
        recursion,
        pass,
    };
    Ok(Outcome::json(&json, pass))
}

fn fit(input: &Path, max_iter: usize, tol: f64) -> Result<Outcome, CliError> {
    let (samples, space) = formats::read_json::<SamplesJson>(input)?.build()?;
    let options = FitOptions { tol, max_iter, ..FitOptions::default() };
    let result = best_affine_fit(&samples, &space, &options)?;
    let json = FitJson::new(&result, tol);
    let pass = json.pass;
    Ok(Outcome::json(&json, pass))
}

#[allow(clippy::too_many_arguments)]
fn r_search(
    input: &Path,
    source_q: f64,
    eps: f64,
    levels: u32,
    exhaustive: bool,
    sweep_csv: Option<&Path>,
    tol: f64,
    workers: &Workers,
) -> Result<Outcome, CliError> {
    let f = formats::read_json::<CubeJson>(input)?.build()?;
    let source = NormedSpace::lq(source_q, f.n())?;
    let radius = 0.5 * f.theta();
    let mut options = RSearchOptions::dyadic(levels, radius);
    options.exhaustive = exhaustive;
    options.fit.tol = tol.min(options.fit.tol);
    let report = empirical_r_with(&f, source, eps, options, |search, rho, centers| {
        workers.try_map(centers, |&c| search.evaluate(rho, c))
    })?;
    let mid: Vec<f64> = f.origin().iter().map(|o| o + radius).collect();
    let inside = source.distance(&report.center, &mid)? <= radius - report.best_rho + 1e-12 * radius;
    let pass = report.best_rho == 0.0 || (inside && report.relative_error <= eps * report.lip + tol);
    if let Some(path) = sweep_csv {
        emit(Some(path), &formats::sweep_csv(&report.sweep, f.n()))?;
    }
    Ok(Outcome::json(&ReportJson::new(&report, pass), pass))
}

pub struct Case<'a> {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub y: Option<&'a [f64]>,
    pub r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateRow {
    pub m: u32,
    pub p: f64,
    /// Interval of the restricted line on which the certificate is taken.
    pub window: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    pub certificate: f64,
    pub threshold: f64,
    pub triple: [f64; 3],
    pub level: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis: Option<usize>,
    pub pass: bool,
}

#[derive(Serialize)]
struct CounterexampleJson<'a> {
    schema: &'static str,
    lemma: &'a str,
    m: u32,
    p: f64,
    n: usize,
    rows: Vec<CertificateRow>,
    failures: usize,
    pass: bool,
}

fn row(spec: CounterexampleSpec, window: [f64; 2], center: Option<Vec<f64>>, radius: Option<f64>, c: CertificateReport) -> CertificateRow {
    CertificateRow {
        m: spec.m,
        p: spec.p,
        window,
        center,
        radius,
        certificate: c.certificate,
        threshold: c.threshold,
        triple: c.triple,
        level: c.level,
        axis: c.axis,
        pass: c.pass,
    }
}

/// Ball cells for the coordinate product: centers `t·u` for a few `t` along
/// `e_1` and the diagonal, with radii doubling from the smallest admissible.
pub fn ball_cells(spec: CounterexampleSpec) -> Vec<(Vec<f64>, f64)> {
    let n = spec.n;
    let diagonal = vec![1.0 / (n as f64).sqrt(); n];
    let mut axis = vec![0.0; n];
    axis[0] = 1.0;
    let mut out = Vec::new();
    for (d, dir) in [axis, diagonal].iter().enumerate() {
        for t in [0.0, 0.25, 0.5, 0.75, 0.9] {
            if d == 1 && t == 0.0 {
                continue;
            }
            let y: Vec<f64> = dir.iter().map(|v| t * v).collect();
            let mut r = spec.min_radius();
            while r <= 1.0 - t + 1e-12 {
                out.push((y.clone(), r));
                r *= 2.0;
            }
        }
    }
    out
}

pub fn counterexample_rows(
    lemma: &str,
    spec: CounterexampleSpec,
    sweep: bool,
    case: Case<'_>,
    steps: u32,
    workers: &Workers,
) -> Result<Vec<CertificateRow>, CliError> {
    let missing = |what: &str| CliError::input(format!("--lemma {lemma} needs {what} (or --sweep)"));
    match lemma {
        "41" => {
            let windows = if sweep {
                grid_windows(spec.m)
            } else {
                vec![(case.a.ok_or_else(|| missing("--a"))?, case.b.ok_or_else(|| missing("--b"))?)]
            };
            workers.try_map(&windows, |&(a, b)| Ok(row(spec, [a, b], None, None, interval_certificate(spec, a, b)?)))
        }
        "42" => {
            let cells = if sweep {
                localized_cells(spec, steps)
            } else {
                let y = match case.y {
                    Some([y]) => *y,
                    Some(_) => return Err(CliError::input("--lemma 42 takes a single --y")),
                    None => return Err(missing("--y")),
                };
                vec![(y, case.r.ok_or_else(|| missing("--r"))?)]
            };
            workers.try_map(&cells, |&(y, r)| {
                Ok(row(spec, [y - r, y + r], Some(vec![y]), Some(r), localized_certificate(spec, y, r)?))
            })
        }
        "43" => {
            let cells = if sweep {
                ball_cells(spec)
            } else {
                vec![(case.y.ok_or_else(|| missing("--y"))?.to_vec(), case.r.ok_or_else(|| missing("--r"))?)]
            };
            workers.try_map(&cells, |(y, r)| {
                let c = ball_certificate(spec, y, *r)?;
                let i = c.axis.unwrap_or(0);
                Ok(row(spec, [y[i] - r, y[i] + r], Some(y.clone()), Some(*r), c))
            })
        }
        other => Err(CliError::input(format!("unknown lemma {other}"))),
    }
}

fn counterexample(
    lemma: &str,
    spec: CounterexampleSpec,
    sweep: bool,
    case: Case<'_>,
    steps: u32,
    workers: &Workers,
) -> Result<Outcome, CliError> {
    let rows = counterexample_rows(lemma, spec, sweep, case, steps, workers)?;
    let failures = rows.iter().filter(|r| !r.pass).count();
    let json = CounterexampleJson { schema: SCHEMA, lemma, m: spec.m, p: spec.p, n: spec.n, rows, failures, pass: failures == 0 };
    Ok(Outcome::json(&json, failures == 0))
}

/// CSV of every `(n, p, K, ε, variant)` combination, in flag order.
pub fn bounds_csv(ns: &[usize], ps: &[f64], ks: &[f64], epss: &[f64], variants: &[Variant]) -> Result<String, CliError> {
    let mut out = String::from(formats::BOUNDS_HEADER);
    for &n in ns {
        for &p in ps {
            for &k in ks {
                for &eps in epss {
                    for &v in variants {
                        let value = match v {
                            Variant::Theorem => lower_bound_r(n, p, k, eps, LowerVariant::Theorem)?,
                            Variant::Sharp1d => lower_bound_r(n, p, k, eps, LowerVariant::Sharp1d)?,
                            Variant::Interval => upper_bound_r(n, p, eps, UpperVariant::Interval)?,
                            Variant::Ball => upper_bound_r(n, p, eps, UpperVariant::Ball)?,
                        };
                        out.push_str(&formats::bounds_row(n, p, k, eps, v.name(), value.log2()));
                    }
                }
            }
        }
    }
    Ok(out)
}

fn bounds(ns: &[usize], ps: &[f64], ks: &[f64], epss: &[f64], variants: &[Variant]) -> Result<Outcome, CliError> {
    Ok(Outcome { report: bounds_csv(ns, ps, ks, epss, variants)?, pass: true })
}

fn net(q: f64, n: usize, delta: f64, samples: usize, seed: u64) -> Result<Outcome, CliError> {
    let options = NetOptions { covering_samples: samples, ..NetOptions::default() };
    let result = delta_net_with(NormedSpace::lq(q, n)?, delta, seed, options)?;
    let pass = result.separation_ok && result.covering_ok;
    Ok(Outcome::json(&NetJson::new(&result), pass))
}

#[derive(Serialize)]
struct CalibrationJson {
    schema: &'static str,
    n: usize,
    p: f64,
    #[serde(rename = "K")]
    k: f64,
    eps: f64,
    #[serde(rename = "D")]
    d: f64,
    extension: f64,
    #[serde(rename = "C")]
    c: f64,
    log2_delta: f64,
    log2_rho: f64,
    margin: f64,
    /// `log₂ ρ − log₂(64nδ/ε)` recomputed from the returned `C`.
    recheck_margin: f64,
    pass: bool,
}

fn calibrate(n: usize, p: f64, k: f64, eps: f64, d: f64, extension: f64, tol: f64) -> Result<Outcome, CliError> {
    let cal = calibrate_c(n, p, k, eps, d, extension)?;
    let log2_delta = discretization_bound(n, p, k, eps, cal.c)?.log2();
    let log2_rho = net_radius(n, p, k, eps, d, extension)?.log2();
    let rhs = (64.0 * n as f64 / eps).log2() + log2_delta;
    let recheck_margin = if log2_rho == rhs { 0.0 } else { log2_rho - rhs };
    let pass = recheck_margin >= -tol * log2_rho.abs().max(1.0);
    let json = CalibrationJson {
        schema: SCHEMA,
        n,
        p,
        k,
        eps,
        d,
        extension,
        c: cal.c,
        log2_delta: cal.log2_delta,
        log2_rho: cal.log2_rho,
        margin: cal.margin,
        recheck_margin,
        pass,
    };
    Ok(Outcome::json(&json, pass))
}

#[allow(clippy::too_many_arguments)]
fn generate(kind: Generated, level: u32, m: u32, p: f64, n: usize, q: f64, dim: usize, seed: u64) -> Result<Outcome, CliError> {
    let report = match kind {
        Generated::Sawtooth => {
            let curve = SawtoothCurve::new(m, p)?;
            formats::to_json(&GridJson::from_grid(&GridFunction1D::from_sampler(&curve, 0.0, 1.0, level)?))
        }
        Generated::Localized => {
            let g = LocalizedSawtooth::new(CounterexampleSpec::new(m, p, n)?)?;
            formats::to_json(&GridJson::from_grid(&GridFunction1D::from_sampler(&g, -2.0, 2.0, level)?))
        }
        Generated::Product => {
            let f = CoordinateProduct::new(CounterexampleSpec::new(m, p, n)?)?;
            let cube = GridFunctionCube::from_sampler_with_limits(&f, vec![-1.0; n], 2.0, level, CubeLimits::default())?;
            formats::to_json(&CubeJson::from_cube(&cube))
        }
        Generated::RandomPath => {
            let g = corpus::random_lipschitz_path(NormedSpace::lq(q, dim)?, 0.0, 1.0, level, seed);
            formats::to_json(&GridJson::from_grid(&g))
        }
        Generated::RandomCube => {
            let space = NormedSpace::lq(q, dim)?;
            if n == 0 || n > CubeLimits::default().max_dim || level > CubeLimits::default().max_level {
                return Err(CliError::input("cube too large: need 1 ≤ n ≤ 4 and level ≤ 8"));
            }
            formats::to_json(&CubeJson::from_cube(&corpus::random_lipschitz_cube(space, vec![0.0; n], 1.0, level, seed)))
        }
    };
    Ok(Outcome { report, pass: true })
}
