//! One function per subcommand.

use qcdeform_core::approx::{error_curve_fits, koebe_schwarzian, FitOptions};
use qcdeform_core::beltrami::{build_map_with, default_probes, verify_map, DEFAULT_MAX_TERMS, VERIFY_STEP};
use qcdeform_core::config::OutputFormat;
use qcdeform_core::deform::{solve_deformation, DeformOptions};
use qcdeform_core::extremal::{check_coefficient_bounds, hsz_search, sweep_disk_families, BoundKind, Violation};
use qcdeform_core::integral_ops::run_selftest;
use qcdeform_core::schwarzian::{a_from_b_recursion, covering_radius, invert_expansion, schwarzian_of, solve_schwarz};
use qcdeform_core::{Complex64, DeformationProblem, Density, Disk, HoloSeries, RunConfig, Term};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::io::{csv_report, emit, json_report, load, num, parse, require, CliResult, Failure};
use crate::{Cli, Command};

fn c(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let loaded = load(&cli.global)?;
    let cfg = &loaded.config;
    let explicit = loaded.explicit_format.then_some(cfg.format);
    // curves and search tables default to CSV
    let csv_default = !loaded.explicit_format || cfg.format == OutputFormat::Csv;
    let input = loaded.input;
    let text = match &cli.command {
        Command::Deform => deform(cfg, require(input, "deform")?)?,
        Command::Verify => verify(cfg, require(input, "verify")?)?,
        Command::Schwarzian => schwarzian(cfg, require(input, "schwarzian")?)?,
        Command::Ode => ode(cfg, require(input, "ode")?)?,
        Command::Invert => invert(cfg, require(input, "invert")?)?,
        Command::Approx { n_max, p } => approx(cfg, input, *n_max, *p, csv_default)?,
        Command::HszSearch { n, budget } => hsz(cfg, *n, *budget, csv_default)?,
        Command::Thm2Check { families, members, n, b2_bound } => {
            bounds(cfg, input, *families, *members, *n, *b2_bound, cli.global.tol, csv_default)?
        }
        Command::Covering { koebe, samples } => covering(cfg, input, *koebe, *samples)?,
        Command::OpsSelftest => {
            let (text, failed) = selftest(cfg, explicit)?;
            emit(&cli.global, &text)?;
            if failed > 0 {
                return Err(Failure::numerical(format!("{failed} self-test case(s) failed")));
            }
            return Ok(());
        }
    };
    emit(&cli.global, &text)
}

fn deform(cfg: &RunConfig, mut input: Value) -> CliResult<String> {
    let obj = input.as_object_mut().ok_or_else(|| Failure::usage("the deformation problem must be a JSON object"))?;
    if !obj.contains_key("space") {
        obj.insert("space".into(), serde_json::to_value(&cfg.space).map_err(|e| Failure::usage(e.to_string()))?);
    }
    let problem: DeformationProblem = parse(input, "deformation problem")?;
    let result = solve_deformation(&problem, &DeformOptions::from_config(cfg))?;
    #[derive(Serialize)]
    struct Out<'a> {
        problem: &'a DeformationProblem,
        #[serde(flatten)]
        summary: qcdeform_core::deform::DeformationSummary,
    }
    json_report("deform", cfg, Out { problem: &problem, summary: result.summary() })
}

#[derive(Debug, Deserialize)]
#[serde(tag = "term", rename_all = "kebab-case", deny_unknown_fields)]
enum TermSpec {
    Indicator { coeff: [f64; 2] },
    ConjPhi { coeff: [f64; 2], order: u32, pole: [f64; 2] },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MuSpec {
    disk: Disk,
    terms: Vec<TermSpec>,
}

fn verify(cfg: &RunConfig, input: Value) -> CliResult<String> {
    let spec: MuSpec = parse(input, "Beltrami coefficient")?;
    let combo = spec
        .terms
        .iter()
        .map(|t| match *t {
            TermSpec::Indicator { coeff } => (c(coeff), Term::Indicator),
            TermSpec::ConjPhi { coeff, order, pole } => (c(coeff), Term::ConjPhi { order, pole: c(pole) }),
        })
        .collect();
    let mu = Density::new(spec.disk, combo, cfg.quadrature)?;
    let map = build_map_with(&mu, cfg.tolerances.neumann, DEFAULT_MAX_TERMS)?;
    let (inner, outer) = default_probes(spec.disk);
    let verification = verify_map(&map, &inner, &outer, VERIFY_STEP);
    let samples: Vec<[[f64; 2]; 2]> =
        inner.iter().chain(&outer).map(|&w| [pair(w), pair(map.evaluate(w))]).collect();
    #[derive(Serialize)]
    struct Out {
        mu_sup: f64,
        neumann_terms: usize,
        series_residual: f64,
        homeomorphic: bool,
        verification: qcdeform_core::MapVerification,
        /// `[w, h(w)]` at the probes.
        samples: Vec<[[f64; 2]; 2]>,
    }
    json_report(
        "verify",
        cfg,
        Out {
            mu_sup: mu.sup_bound(),
            neumann_terms: map.neumann_terms,
            series_residual: map.series_residual,
            homeomorphic: verification.homeomorphic(),
            verification,
            samples,
        },
    )
}

/// A series given directly or under `key`.
fn series_input(input: Value, key: &str) -> CliResult<HoloSeries> {
    match input {
        Value::Object(mut m) if m.contains_key(key) => parse(m.remove(key).expect("checked"), key),
        v => parse(v, key),
    }
}

fn schwarzian(cfg: &RunConfig, input: Value) -> CliResult<String> {
    let w = series_input(input, "w")?.with_radius(f64::INFINITY);
    let s = schwarzian_of(&w)?;
    let max_abs = s.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
    #[derive(Serialize)]
    struct Out {
        schwarzian: HoloSeries,
        max_abs_coeff: f64,
    }
    json_report("schwarzian", cfg, Out { schwarzian: s, max_abs_coeff: max_abs })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OdeInput {
    f: HoloSeries,
    #[serde(default = "default_init")]
    init: [[f64; 2]; 3],
}

fn default_init() -> [[f64; 2]; 3] {
    [[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]]
}

fn ode(cfg: &RunConfig, input: Value) -> CliResult<String> {
    let inp: OdeInput = parse(input, "ode input")?;
    let f = inp.f.with_radius(f64::INFINITY);
    let [a0, a1, a2] = inp.init;
    let sol = solve_schwarz(&f, (c(a0), c(a1), c(a2)))?;
    #[derive(Serialize)]
    struct Out {
        warning: Option<String>,
        #[serde(flatten)]
        solution: qcdeform_core::schwarzian::SchwarzSolution,
    }
    json_report("ode", cfg, Out { warning: sol.warning(), solution: sol })
}

fn invert(cfg: &RunConfig, input: Value) -> CliResult<String> {
    let w = series_input(input, "w")?.with_radius(f64::INFINITY);
    let b = invert_expansion(&w)?;
    let theta = w.coeff(1).arg();
    let degree = w.degree();
    let rec = a_from_b_recursion(b.coeffs(), theta, degree)?;
    let round_trip = (1..=degree).map(|k| (rec.a.coeff(k) - w.coeff(k)).norm()).fold(0.0, f64::max);
    let a2 = if degree >= 2 { w.coeff(2) } else { Complex64::new(0.0, 0.0) };
    // b0 = -e^{-2iθ} a2
    let b0_residual = (b.coeff(0) + Complex64::from_polar(1.0, -2.0 * theta) * a2).norm();
    #[derive(Serialize)]
    struct Out {
        theta: f64,
        inverted: HoloSeries,
        b0_residual: f64,
        round_trip_error: f64,
        leading_terms: Vec<qcdeform_core::schwarzian::LeadingTerms>,
    }
    json_report("invert", cfg, Out { theta, inverted: b, b0_residual, round_trip_error: round_trip, leading_terms: rec.leading })
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
enum Target {
    KoebeSchwarzian,
    DoublePoles(Vec<PoleSpec>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoleSpec {
    angle: f64,
    weight: [f64; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ApproxInput {
    target: Target,
}

fn approx(cfg: &RunConfig, input: Option<Value>, n_max: usize, p: f64, csv: bool) -> CliResult<String> {
    if n_max == 0 {
        return Err(Failure::usage("--n-max must be at least 1"));
    }
    let target = match input {
        Some(v) => parse::<ApproxInput>(v, "approx input")?.target,
        None => Target::KoebeSchwarzian,
    };
    let opts = FitOptions::default();
    let fits = match &target {
        Target::KoebeSchwarzian => error_curve_fits(koebe_schwarzian, n_max, p, &opts)?,
        Target::DoublePoles(poles) => {
            let poles: Vec<(Complex64, Complex64)> = poles.iter().map(|s| (Complex64::from_polar(1.0, s.angle), c(s.weight))).collect();
            let f = move |z: Complex64| poles.iter().map(|&(a, d)| d / ((z - a) * (z - a))).sum::<Complex64>();
            error_curve_fits(f, n_max, p, &opts)?
        }
    };
    if csv {
        let rows: Vec<Vec<String>> = fits.iter().map(|(n, f)| vec![n.to_string(), num(f.error)]).collect();
        let notes = vec![format!("error = sup (1-|z|^2)^{} |r_n - f| on a {}x{} grid", p + 1.0, opts.error_grid.n_rad, opts.error_grid.n_ang)];
        csv_report("approx", cfg, &notes, &["n", "error"], &rows)
    } else {
        #[derive(Serialize)]
        struct Row {
            n: usize,
            fit: qcdeform_core::approx::Fit,
        }
        json_report("approx", cfg, fits.into_iter().map(|(n, fit)| Row { n, fit }).collect::<Vec<_>>())
    }
}

fn hsz(cfg: &RunConfig, n: usize, budget: usize, csv: bool) -> CliResult<String> {
    let rec = hsz_search(&cfg.space, n, budget, cfg.seed)?;
    if csv {
        let notes = vec![
            format!("space {} n {n} budget {budget} seed {}", cfg.space.label(), cfg.seed),
            format!("best_value {} (a lower bound for the extremal value)", num(rec.best_value)),
            format!("samples {} unresolved {}", rec.samples, rec.unresolved),
        ];
        let rows: Vec<Vec<String>> = rec
            .improvements
            .iter()
            .map(|i| {
                let src = serde_json::to_value(i.source).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
                vec![i.sample.to_string(), num(i.value), num(i.norm), num(i.min_modulus), src]
            })
            .collect();
        csv_report("hsz-search", cfg, &notes, &["sample", "value", "norm", "min_modulus", "source"], &rows)
    } else {
        json_report("hsz-search", cfg, rec)
    }
}

fn violation_row(family: usize, v: &Violation) -> Vec<String> {
    let kind = match v.kind {
        BoundKind::Coefficient => "coefficient",
        BoundKind::Univalent => "univalent",
    };
    vec![family.to_string(), v.member.to_string(), kind.into(), v.index.to_string(), num(v.value), num(v.bound), num(v.excess)]
}

const VIOLATION_HEADER: [&str; 7] = ["family", "member", "kind", "index", "value", "bound", "excess"];

#[allow(clippy::too_many_arguments)]
fn bounds(
    cfg: &RunConfig,
    input: Option<Value>,
    families: usize,
    members: usize,
    n: usize,
    b2_bound: f64,
    tol: Option<f64>,
    csv: bool,
) -> CliResult<String> {
    let tol = tol.unwrap_or(1e-9);
    if let Some(v) = input {
        let family: Vec<HoloSeries> = parse(v, "family (a list of series)")?;
        let family: Vec<HoloSeries> = family.into_iter().map(|f| f.with_radius(f64::INFINITY)).collect();
        let report = check_coefficient_bounds(&family, n, tol)?;
        if csv {
            let notes = vec![
                report.header.clone(),
                format!("family {}", report.hypothesis),
                format!("members {} f0 {:?} |c1^0| {}", report.members, report.f0_member, num(report.c1_0)),
                format!("violations {}", report.violations.len()),
            ];
            let rows: Vec<Vec<String>> = report.violations.iter().map(|v| violation_row(0, v)).collect();
            return csv_report("thm2-check", cfg, &notes, &VIOLATION_HEADER, &rows);
        }
        return json_report("thm2-check", cfg, report);
    }
    if b2_bound <= 0.0 || members == 0 {
        return Err(Failure::usage("--b2-bound must be positive and --members at least 1"));
    }
    let sweep = sweep_disk_families(families, members, b2_bound, n, tol, cfg.seed)?;
    if csv {
        let notes = vec![
            sweep.header.clone(),
            format!("families {} ({}), complex disks t f1 with |t| <= 1", sweep.families, sweep.hypothesis),
            format!("members {} b2_bound {} n {} seed {} tol {}", members, b2_bound, n, cfg.seed, num(tol)),
            format!(
                "coefficient_violations {} univalent_violations {} not_univalent_members {}",
                sweep.coefficient_violations, sweep.univalent_violations, sweep.not_univalent_members
            ),
        ];
        let rows: Vec<Vec<String>> = sweep.violations.iter().map(|(k, v)| violation_row(*k, v)).collect();
        csv_report("thm2-check", cfg, &notes, &VIOLATION_HEADER, &rows)
    } else {
        json_report("thm2-check", cfg, sweep)
    }
}

fn covering(cfg: &RunConfig, input: Option<Value>, koebe: Option<usize>, samples: usize) -> CliResult<String> {
    let w = match (koebe, input) {
        (Some(d), _) => HoloSeries::koebe(d),
        (None, Some(v)) => series_input(v, "w")?.with_radius(f64::INFINITY),
        (None, None) => return Err(Failure::usage("`covering` needs --koebe DEGREE or an input series")),
    };
    let est = covering_radius(&w, samples)?;
    json_report("covering", cfg, est)
}

/// The identity table; a plain aligned table unless a format is chosen.
fn selftest(cfg: &RunConfig, format: Option<OutputFormat>) -> CliResult<(String, usize)> {
    let cases = run_selftest(cfg.quadrature)?;
    let failed = cases.iter().filter(|c| !c.pass).count();
    let text = match format {
        Some(OutputFormat::Json) => json_report("ops-selftest", cfg, &cases)?,
        Some(OutputFormat::Csv) => {
            let rows: Vec<Vec<String>> = cases
                .iter()
                .map(|c| vec![format!("\"{}\"", c.name), c.probes.to_string(), num(c.max_error), num(c.tol), c.pass.to_string()])
                .collect();
            csv_report("ops-selftest", cfg, &[], &["case", "probes", "max_error", "tol", "pass"], &rows)?
        }
        None => {
            let width = cases.iter().map(|c| c.name.len()).max().unwrap_or(4);
            let cfg_line = serde_json::to_string(cfg).map_err(|e| Failure::numerical(e.to_string()))?;
            let mut t = format!("# qcdeform ops-selftest\n# config: {cfg_line}\n");
            t.push_str(&format!("{:<width$}  {:>6}  {:>12}  {:>8}  result\n", "case", "probes", "max_error", "tol"));
            for c in &cases {
                let verdict = if c.pass { "PASS" } else { "FAIL" };
                t.push_str(&format!("{:<width$}  {:>6}  {:>12.3e}  {:>8.0e}  {verdict}\n", c.name, c.probes, c.max_error, c.tol));
            }
            t.push_str(&format!("{} of {} cases passed\n", cases.len() - failed, cases.len()));
            t
        }
    };
    Ok((text, failed))
}
