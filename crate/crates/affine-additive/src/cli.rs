//! Command line front end.
//!
//! Every subcommand resolves a scenario (by name or JSON config file, with
//! flag overrides), computes a report, writes it as JSON or CSV and turns
//! the report's pass flag into the exit code: 0 when every check passes,
//! 1 when a check fails (the report is still written), 2 for usage errors.
//! Reports are byte-identical across runs with the same inputs and seed.

use crate::maps::PointDiagnostics;
use crate::modulus::{
    discrete_modulus, extremal_density_modulus, image_family_modulus, mean_distortion,
    quasi_invariance_check, ModulusProblem, ModulusResult, QuasiInvariance,
};
use crate::report::{csv_f64, to_json_string, SCHEMA_VERSION};
use crate::stretch::{Scenario, ScenarioConfig, ScenarioKind};
use crate::verify::{
    open_question_report, verify_linear, verify_radial, CheckRecord, OpenQuestionReport,
    TheoremReport, Tolerances,
};
use crate::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::PathBuf;

/// Quadrature value vs closed form, relative.
const QUAD_VS_CLOSED_TOL: f64 = 1e-10;
/// Feasibility certificate ceiling for the discrete solve.
const FEASIBILITY_TOL: f64 = 1e-9;
/// Discrete value vs closed form, relative.
const DISCRETE_REL_TOL: f64 = 0.05;
/// Curve count when the scenario config leaves it at zero.
const DEFAULT_CURVES: usize = 500;
/// Fiber count for the msp subcommand when unset.
const DEFAULT_MSP_FIBERS: usize = 9;
/// Perturbation strength for the extra discrete constraints.
const CURVE_PERTURBATION: f64 = 0.3;
/// Sample points per fiber for the msp subcommand.
const MSP_S_SAMPLES: usize = 9;

#[derive(Parser)]
#[command(
    name = "aastretch",
    version,
    about = "Stretch maps and 4-moduli on the affine-additive group"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form, quadrature and discrete 4-modulus of a scenario family.
    Modulus(CommonArgs),
    /// Pointwise distortion table over a transverse grid, plus the mean
    /// distortion of the extremal density and the image-family modulus.
    Distortion(CommonArgs),
    /// Minimal-stretching diagnostics along the scenario fibers.
    Msp(CommonArgs),
    /// Full extremality verification report for a scenario.
    Verify(CommonArgs),
    /// Modulus-ratio data for the contracting radial stretch.
    OpenQuestion(CommonArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Scenario name (linear_lt1 | linear_gt1 | radial) or path to a JSON
    /// scenario config.
    #[arg(long, default_value = "radial")]
    scenario: String,
    /// Stretch parameter override.
    #[arg(long)]
    k: Option<f64>,
    /// Outer shell radius override (radial scenarios).
    #[arg(long)]
    r0: Option<f64>,
    /// Angular aperture override (radial scenarios).
    #[arg(long)]
    psi0: Option<f64>,
    /// Cells per axis for the discrete solver.
    #[arg(long)]
    grid: Option<usize>,
    /// Number of curves to sample (fibers for msp).
    #[arg(long)]
    curves: Option<usize>,
    /// Seed for randomized curve perturbations.
    #[arg(long)]
    seed: Option<u64>,
    /// Report format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Tolerance profile: strict or fast.
    #[arg(long)]
    tol_profile: Option<String>,
}

#[derive(ValueEnum, Clone, Copy, PartialEq)]
enum Format {
    /// Canonical report with every computed quantity.
    Json,
    /// Flat table view (checks, fibers or profile data).
    Csv,
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = err.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Modulus(a) => run_modulus(&a),
        Command::Distortion(a) => run_distortion(&a),
        Command::Msp(a) => run_msp(&a),
        Command::Verify(a) => run_verify(&a),
        Command::OpenQuestion(a) => run_open_question(&a),
    };
    match outcome {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(Error::InvalidParameters(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(err) => {
            eprintln!("error: {err}");
            1
        }
    }
}

fn default_k(kind: ScenarioKind) -> f64 {
    match kind {
        ScenarioKind::LinearLt1 => 0.5,
        ScenarioKind::LinearGt1 => 3.0,
        ScenarioKind::Radial => 0.5,
    }
}

/// Scenario name or config path, then flag overrides on top.
fn resolve_config(args: &CommonArgs) -> Result<ScenarioConfig> {
    let mut cfg = match args.scenario.parse::<ScenarioKind>() {
        Ok(kind) => ScenarioConfig::new(kind, default_k(kind)),
        Err(_) => {
            let text = std::fs::read_to_string(&args.scenario).map_err(|_| {
                Error::InvalidParameters(format!(
                    "{:?} is neither a scenario name (linear_lt1 | linear_gt1 | radial) \
                     nor a readable config file",
                    args.scenario
                ))
            })?;
            serde_json::from_str(&text).map_err(|e| {
                Error::InvalidParameters(format!("scenario config {:?}: {e}", args.scenario))
            })?
        }
    };
    if let Some(k) = args.k {
        cfg.k = k;
    }
    if let Some(r0) = args.r0 {
        cfg.r0 = r0;
    }
    if let Some(psi0) = args.psi0 {
        cfg.psi0 = psi0;
    }
    if let Some(grid) = args.grid {
        cfg.grid = grid;
    }
    if let Some(curves) = args.curves {
        cfg.curves = curves;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(profile) = &args.tol_profile {
        cfg.tol_profile = profile.clone();
    }
    Ok(cfg)
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn radial_stamp(sc: &Scenario) -> (Option<f64>, Option<f64>) {
    if sc.kind() == ScenarioKind::Radial {
        (Some(sc.r0()), Some(sc.psi0()))
    } else {
        (None, None)
    }
}

#[derive(Serialize)]
struct ModulusOutput {
    schema: u32,
    scenario: &'static str,
    k: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    r0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    psi0: Option<f64>,
    closed_form: f64,
    quadrature: f64,
    discrete: ModulusResult,
    checks: Vec<CheckRecord>,
    pass: bool,
}

fn run_modulus(args: &CommonArgs) -> Result<bool> {
    let cfg = resolve_config(args)?;
    let sc = cfg.make()?;
    let (_, quadrature) = extremal_density_modulus(sc.foliation())?;
    let closed_form = sc.modulus_closed_form();
    let curves = if cfg.curves == 0 { DEFAULT_CURVES } else { cfg.curves };
    let problem =
        ModulusProblem::from_scenario(&sc, cfg.grid, curves, CURVE_PERTURBATION, cfg.seed)?;
    let discrete = discrete_modulus(&problem);
    let checks = vec![
        CheckRecord::le(
            "quadrature_vs_closed_form",
            (quadrature - closed_form).abs() / closed_form.abs().max(1.0),
            QUAD_VS_CLOSED_TOL,
        ),
        CheckRecord::le("discrete_feasibility", discrete.max_violation, FEASIBILITY_TOL),
        CheckRecord::le(
            "discrete_vs_closed_form",
            (discrete.value - closed_form).abs() / closed_form.abs(),
            DISCRETE_REL_TOL,
        ),
    ];
    let pass = checks.iter().all(|c| c.pass);
    let (r0, psi0) = radial_stamp(&sc);
    let output = ModulusOutput {
        schema: SCHEMA_VERSION,
        scenario: sc.kind().name(),
        k: sc.k(),
        r0,
        psi0,
        closed_form,
        quadrature,
        discrete,
        checks,
        pass,
    };
    let text = match args.format {
        Format::Json => to_json_string(&output),
        Format::Csv => modulus_csv(&output),
    };
    emit(&text, &args.out)?;
    Ok(pass)
}

fn modulus_csv(o: &ModulusOutput) -> String {
    let mut s = String::from("field,value\n");
    let mut kv = |k: &str, v: String| {
        s.push_str(k);
        s.push(',');
        s.push_str(&v);
        s.push('\n');
    };
    kv("scenario", o.scenario.to_owned());
    kv("k", csv_f64(o.k));
    if let Some(r0) = o.r0 {
        kv("r0", csv_f64(r0));
    }
    if let Some(psi0) = o.psi0 {
        kv("psi0", csv_f64(psi0));
    }
    kv("closed_form", csv_f64(o.closed_form));
    kv("quadrature", csv_f64(o.quadrature));
    kv("discrete_value", csv_f64(o.discrete.value));
    kv("discrete_converged", o.discrete.converged.to_string());
    kv("discrete_iterations", o.discrete.iterations.to_string());
    kv("discrete_max_violation", csv_f64(o.discrete.max_violation));
    kv("grid_s", o.discrete.grid[0].to_string());
    kv("grid_d1", o.discrete.grid[1].to_string());
    kv("grid_d2", o.discrete.grid[2].to_string());
    kv("n_curves", o.discrete.n_curves.to_string());
    kv("pass", o.pass.to_string());
    s
}

/// One row of the pointwise distortion table: transverse coordinates of
/// the fiber followed by the full diagnostic record at its midpoint.
#[derive(Serialize)]
struct DistortionRow {
    d1: f64,
    d2: f64,
    #[serde(flatten)]
    diagnostics: PointDiagnostics,
}

#[derive(Serialize)]
struct DistortionOutput {
    schema: u32,
    scenario: &'static str,
    k: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    r0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    psi0: Option<f64>,
    grid: [usize; 2],
    mod_gamma0: f64,
    mean_distortion: f64,
    mod_image: f64,
    image_closed_form: f64,
    quasi_invariance: QuasiInvariance,
    points: Vec<DistortionRow>,
    checks: Vec<CheckRecord>,
    pass: bool,
}

/// Pointwise diagnostics on an `n x n` lattice of fibers, each sampled at
/// the mid parameter of the foliation. Rows march through `d2` fastest so
/// the CSV plots distortion against the second transverse coordinate.
fn distortion_table(sc: &Scenario, n: usize) -> Result<Vec<DistortionRow>> {
    let fol = sc.foliation();
    let (s_lo, s_hi) = fol.s_range();
    let s_mid = 0.5 * (s_lo + s_hi);
    let [d1_rng, d2_rng] = fol.delta_range();
    let map = sc.map();
    let mut rows = Vec::with_capacity(n * n);
    for i in 0..n {
        let d1 = d1_rng.0 + (i as f64 + 0.5) / n as f64 * (d1_rng.1 - d1_rng.0);
        for j in 0..n {
            let d2 = d2_rng.0 + (j as f64 + 0.5) / n as f64 * (d2_rng.1 - d2_rng.0);
            let p = fol.point_at(s_mid, d1, d2);
            rows.push(DistortionRow {
                d1,
                d2,
                diagnostics: map.diagnostics(&p)?,
            });
        }
    }
    Ok(rows)
}

fn run_distortion(args: &CommonArgs) -> Result<bool> {
    let cfg = resolve_config(args)?;
    let tols = Tolerances::from_profile(&cfg.tol_profile)?;
    let sc = cfg.make()?;
    let points = distortion_table(&sc, cfg.grid)?;
    let fol = sc.foliation();
    let (rho0, mod_gamma0) = extremal_density_modulus(fol)?;
    let md = mean_distortion(sc.map(), &rho0, fol)?;
    let imf = image_family_modulus(sc.map(), fol)?;
    let closed = sc.image_modulus_closed_form();
    let qi = quasi_invariance_check(sc.distortion_bound(), mod_gamma0, imf);
    let table_vs_fiber = points
        .iter()
        .map(|r| {
            let want = sc.fiber_distortion(r.d1, r.d2);
            (r.diagnostics.distortion - want).abs() / want
        })
        .fold(0.0_f64, f64::max);
    let qc_vs_ksq = points
        .iter()
        .map(|r| {
            let ksq = r.diagnostics.distortion * r.diagnostics.distortion;
            (r.diagnostics.qc_ratio - ksq).abs() / ksq
        })
        .fold(0.0_f64, f64::max);
    let contact_max = points
        .iter()
        .map(|r| r.diagnostics.contact_residual)
        .fold(0.0_f64, f64::max);
    let checks = vec![
        CheckRecord::le("distortion_vs_closed_form", table_vs_fiber, tols.distortion),
        CheckRecord::le("qc_ratio_vs_distortion_sq", qc_vs_ksq, tols.distortion),
        CheckRecord::le("contact_residual_max", contact_max, tols.contact),
        CheckRecord::le(
            "mean_distortion_vs_image_modulus",
            (md - imf).abs() / imf.abs().max(1.0),
            tols.equality,
        ),
        CheckRecord::le(
            "image_modulus_vs_closed_form",
            (imf - closed).abs() / closed.abs().max(1.0),
            tols.equality,
        ),
        CheckRecord::ge(
            "quasi_invariance_min_slack",
            qi.lower_slack.min(qi.upper_slack) / qi.upper.abs().max(1.0),
            -tols.quasi_slack,
        ),
    ];
    let pass = checks.iter().all(|c| c.pass);
    let (r0, psi0) = radial_stamp(&sc);
    let output = DistortionOutput {
        schema: SCHEMA_VERSION,
        scenario: sc.kind().name(),
        k: sc.k(),
        r0,
        psi0,
        grid: [cfg.grid, cfg.grid],
        mod_gamma0,
        mean_distortion: md,
        mod_image: imf,
        image_closed_form: closed,
        quasi_invariance: qi,
        points,
        checks,
        pass,
    };
    let text = match args.format {
        Format::Json => to_json_string(&output),
        Format::Csv => distortion_csv(&output),
    };
    emit(&text, &args.out)?;
    Ok(pass)
}

fn distortion_csv(o: &DistortionOutput) -> String {
    let mut s = String::from(
        "d1,d2,a,lambda,t,mu_re,mu_im,mu_abs,distortion,jacobian,dh_norm,qc_ratio,sigma,contact_residual\n",
    );
    for r in &o.points {
        let d = &r.diagnostics;
        let cols = [
            r.d1,
            r.d2,
            d.a,
            d.lambda,
            d.t,
            d.mu_re,
            d.mu_im,
            d.mu_abs,
            d.distortion,
            d.jacobian,
            d.dh_norm,
            d.qc_ratio,
            d.sigma,
            d.contact_residual,
        ];
        let row: Vec<String> = cols.iter().map(|v| csv_f64(*v)).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

#[derive(Serialize)]
struct FiberMsp {
    d1: f64,
    d2: f64,
    indicator_re_max: f64,
    indicator_im_max: f64,
    pushforward_gap_max: f64,
}

#[derive(Serialize)]
struct MspOutput {
    schema: u32,
    scenario: &'static str,
    k: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    r0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    psi0: Option<f64>,
    fibers: Vec<FiberMsp>,
    checks: Vec<CheckRecord>,
    pass: bool,
}

fn run_msp(args: &CommonArgs) -> Result<bool> {
    let cfg = resolve_config(args)?;
    let tols = Tolerances::from_profile(&cfg.tol_profile)?;
    let sc = cfg.make()?;
    let fol = sc.foliation();
    let map = sc.map();
    let (c, d) = fol.s_range();
    let n_fibers = if cfg.curves == 0 { DEFAULT_MSP_FIBERS } else { cfg.curves };
    let mut fibers = Vec::new();
    let mut worst_re: f64 = f64::NEG_INFINITY;
    let mut worst_im: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    for (d1, d2) in sc.stratified_deltas(n_fibers) {
        let fiber = fol.fiber(d1, d2);
        let mut re_max: f64 = f64::NEG_INFINITY;
        let mut im_max: f64 = 0.0;
        let mut gap_max: f64 = 0.0;
        for i in 0..MSP_S_SAMPLES {
            let s = c + (d - c) * (i as f64 + 0.5) / MSP_S_SAMPLES as f64;
            let ind = map.msp_indicator(&fiber, s)?;
            re_max = re_max.max(ind.re);
            im_max = im_max.max(ind.im.abs());
            let push = map.pushforward_speed(&fiber, s)?;
            gap_max = gap_max.max((push.value - push.lower).abs() / push.lower.max(1e-300));
        }
        worst_re = worst_re.max(re_max);
        worst_im = worst_im.max(im_max);
        worst_gap = worst_gap.max(gap_max);
        fibers.push(FiberMsp {
            d1,
            d2,
            indicator_re_max: re_max,
            indicator_im_max: im_max,
            pushforward_gap_max: gap_max,
        });
    }
    let checks = vec![
        CheckRecord::le("msp_imag_max", worst_im, tols.msp_imag),
        CheckRecord::le("msp_real_max", worst_re, tols.msp_real),
        CheckRecord::le("pushforward_gap_max", worst_gap, tols.quasi_slack),
    ];
    let pass = checks.iter().all(|c| c.pass);
    let (r0, psi0) = radial_stamp(&sc);
    let output = MspOutput {
        schema: SCHEMA_VERSION,
        scenario: sc.kind().name(),
        k: sc.k(),
        r0,
        psi0,
        fibers,
        checks,
        pass,
    };
    let text = match args.format {
        Format::Json => to_json_string(&output),
        Format::Csv => msp_csv(&output),
    };
    emit(&text, &args.out)?;
    Ok(pass)
}

fn msp_csv(o: &MspOutput) -> String {
    let mut s =
        String::from("d1,d2,indicator_re_max,indicator_im_max,pushforward_gap_max\n");
    for f in &o.fibers {
        s.push_str(&csv_f64(f.d1));
        s.push(',');
        s.push_str(&csv_f64(f.d2));
        s.push(',');
        s.push_str(&csv_f64(f.indicator_re_max));
        s.push(',');
        s.push_str(&csv_f64(f.indicator_im_max));
        s.push(',');
        s.push_str(&csv_f64(f.pushforward_gap_max));
        s.push('\n');
    }
    s
}

fn run_verify(args: &CommonArgs) -> Result<bool> {
    let cfg = resolve_config(args)?;
    let tols = Tolerances::from_profile(&cfg.tol_profile)?;
    let report = match cfg.kind {
        ScenarioKind::Radial => verify_radial(cfg.k, cfg.r0, cfg.psi0, &tols)?,
        kind => verify_linear(cfg.k, kind, &tols)?,
    };
    let text = match args.format {
        Format::Json => to_json_string(&report),
        Format::Csv => verify_csv(&report),
    };
    emit(&text, &args.out)?;
    Ok(report.pass)
}

fn verify_csv(report: &TheoremReport) -> String {
    let mut s = String::from("name,measured,threshold,sense,pass\n");
    for c in &report.checks {
        s.push_str(c.name);
        s.push(',');
        s.push_str(&csv_f64(c.measured));
        s.push(',');
        s.push_str(&csv_f64(c.threshold));
        s.push(',');
        s.push_str(c.sense);
        s.push(',');
        s.push_str(&c.pass.to_string());
        s.push('\n');
    }
    s
}

fn run_open_question(args: &CommonArgs) -> Result<bool> {
    let cfg = resolve_config(args)?;
    if cfg.kind != ScenarioKind::Radial {
        return Err(Error::InvalidParameters(
            "the open question concerns the radial scenario".into(),
        ));
    }
    let report = open_question_report(cfg.k, cfg.r0, cfg.psi0)?;
    let text = match args.format {
        Format::Json => to_json_string(&report),
        Format::Csv => open_question_csv(&report),
    };
    emit(&text, &args.out)?;
    Ok(report.pass)
}

fn open_question_csv(report: &OpenQuestionReport) -> String {
    let mut s = String::from("k,ratio,conjectured_bound,profile_value\n");
    for (((k, r), b), m) in report
        .profile_grid
        .iter()
        .zip(&report.ratio_grid)
        .zip(&report.bound_grid)
        .zip(&report.profile_values)
    {
        s.push_str(&csv_f64(*k));
        s.push(',');
        s.push_str(&csv_f64(*r));
        s.push(',');
        s.push_str(&csv_f64(*b));
        s.push(',');
        s.push_str(&csv_f64(*m));
        s.push('\n');
    }
    s
}
