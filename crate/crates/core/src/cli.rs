//! The `tzlab` command line.
//!
//! Every subcommand builds its output on the requested grid, prints one
//! line per check, optionally writes a mesh (`--out`) and a JSON report
//! (`--report`), and exits 0 iff the report passes. Invalid input exits 2,
//! failed checks and runtime errors exit 1.

use std::ffi::OsString;
use std::f64::consts::PI;
use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::exact::{cubic_residual_c, fit_linear, one_soliton_h, one_soliton_surface, vacuum_frame, OneSoliton, SolitonParams, Vacuum};
use crate::grid::{max_finite, max_gap, max_rel_gap_c, Domain, Grid, GridSpec, ImmersionGrid};
use crate::io::{export_mesh, import_csv, write_report, MeshFormat};
use crate::lax_frame::{integrate_frame_with, SolutionField};
use crate::loopalgebra::{re, ProjLine, C64, ONE};
use crate::rational::{make_breather, Kind, SimpleElement};
use crate::report::{Check, VerificationReport};
use crate::suite::{convergence_checks, one_soliton_transform, real_h, run_criterion};
use crate::transforms::{
    classical_transform, dress, dress_breather, dressed_surface_closed_form, dual_surface, family_scalar,
    family_surface, permutability_check, residue_checks, DressOptions, FrameFamily, IntegratedFamily,
    VacuumFamily,
};

#[derive(Parser, Debug)]
#[command(name = "tzlab", version, about = "Affine spheres, Tzitzeica transformations and dressing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Vacuum family member at --lambda.
    Vacuum(VacuumArgs),
    /// One-soliton surface by the classical transformation of the vacuum.
    Soliton(SolitonCmd),
    /// Dressing by a rank-1 or rank-2 simple element.
    Dress(DressArgs),
    /// Classical transformation by the scalar solution at (--alpha, --line).
    Transform(TransformArgs),
    /// Dual surface.
    Dual(DualArgs),
    /// Permutability of two rank-1 dressings.
    Permute(PermuteArgs),
    /// Breather dressing by a conjugate pair.
    Breather(BreatherArgs),
    /// The acceptance suite.
    Verify(VerifyArgs),
    /// Converts an exported CSV mesh.
    Export(ExportArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Node counts "NxM".
    #[arg(long, default_value = "41x41")]
    pub grid: String,
    /// "u0:u1,v0:v1".
    #[arg(long, default_value = "-1:1,-1:1", allow_hyphen_values = true)]
    pub domain: String,
    /// Spectral parameter of the output surface.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub lambda: f64,
    /// Mesh output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// obj or csv (default from the --out extension).
    #[arg(long)]
    pub format: Option<String>,
    /// JSON report path.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// JSON file of flag values (kebab-case keys); flags on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for randomized checks.
    #[arg(long, default_value_t = 42)]
    pub rng_seed: u64,
    /// RK4 steps per grid interval (default: enough for an effective step <= 1/64).
    #[arg(long)]
    pub substeps: Option<usize>,
    /// Largest tolerated masked fraction when dressing.
    #[arg(long, default_value_t = 0.2)]
    pub max_masked: f64,
    /// Fail on any open-condition violation instead of masking.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SeedKind {
    Vacuum,
    Soliton,
}

#[derive(Args, Debug, Clone)]
pub struct SolitonArgs {
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub lambda1: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub theta0: f64,
    /// c0 / (2 rho0); the `soliton` command defaults to 0, a soliton seed to 1000.
    #[arg(long, allow_negative_numbers = true)]
    pub beta0: Option<f64>,
    /// Raw coefficient c0 (overrides --beta0 together with --rho0).
    #[arg(long, allow_negative_numbers = true)]
    pub c0: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub rho0: f64,
}

impl SolitonArgs {
    fn params(&self, default_beta0: f64) -> Result<SolitonParams> {
        match self.c0 {
            Some(c0) => SolitonParams::from_coefficients(self.lambda1, c0, self.rho0, self.theta0),
            None => SolitonParams::new(self.lambda1, self.theta0, self.beta0.unwrap_or(default_beta0)),
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct SeedArgs {
    #[arg(long, value_enum, default_value = "vacuum")]
    pub seed: SeedKind,
    #[command(flatten)]
    pub soliton: SolitonArgs,
}

#[derive(Args, Debug, Clone)]
pub struct VacuumArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct SolitonCmd {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub soliton: SolitonArgs,
}

#[derive(Args, Debug, Clone)]
pub struct DressArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub seed: SeedArgs,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub rank: u8,
    #[arg(long, default_value_t = 1.2, allow_negative_numbers = true)]
    pub alpha: f64,
    /// "a,b,c".
    #[arg(long, default_value = "1,1,1", allow_hyphen_values = true)]
    pub line: String,
}

#[derive(Args, Debug, Clone)]
pub struct TransformArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub seed: SeedArgs,
    /// The scalar solution has gamma1 = alpha^3.
    #[arg(long, default_value_t = 1.2, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, default_value = "1,1,1", allow_hyphen_values = true)]
    pub line: String,
}

#[derive(Args, Debug, Clone)]
pub struct DualArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub seed: SeedArgs,
}

#[derive(Args, Debug, Clone)]
pub struct PermuteArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub seed: SeedArgs,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub alpha1: f64,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    pub alpha2: f64,
    #[arg(long, default_value = "0,1,1", allow_hyphen_values = true)]
    pub line1: String,
    #[arg(long, default_value = "0,1,1", allow_hyphen_values = true)]
    pub line2: String,
}

#[derive(Args, Debug, Clone)]
pub struct BreatherArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub seed: SeedArgs,
    /// |alpha|.
    #[arg(long, default_value_t = 1.0)]
    pub modulus: f64,
    /// arg(alpha), in (0, pi/6) or (pi/6, pi/3).
    #[arg(long, default_value_t = PI / 8.0)]
    pub arg: f64,
    #[arg(long, default_value = "1,1,1", allow_hyphen_values = true)]
    pub line: String,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    pub rng_seed: u64,
    /// Run only these criteria (1-10); repeatable.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=10))]
    pub criterion: Vec<u8>,
}

#[derive(Args, Debug, Clone)]
pub struct ExportArgs {
    /// CSV mesh written by --format csv.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// argv handling
// ---------------------------------------------------------------------------

fn config_path(args: &[String]) -> Option<String> {
    args.iter().enumerate().find_map(|(k, a)| {
        if a == "--config" {
            args.get(k + 1).cloned()
        } else {
            a.strip_prefix("--config=").map(str::to_string)
        }
    })
}

fn config_args(path: &str) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{path}: {e}")))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{path}: {e}")))?;
    let Value::Object(map) = v else {
        return Err(Error::Config(format!("{path}: expected a JSON object")));
    };
    let mut out = Vec::new();
    for (k, v) in map {
        if k == "config" {
            continue;
        }
        let flag = format!("--{k}");
        let scalar = |v: &Value| -> Result<String> {
            match v {
                Value::String(s) => Ok(s.clone()),
                Value::Number(n) => Ok(n.to_string()),
                other => Err(Error::Config(format!("{path}: unsupported value {other} for {k}"))),
            }
        };
        match &v {
            Value::Bool(true) => out.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) if k == "criterion" => {
                for it in items {
                    out.push(flag.clone());
                    out.push(scalar(it)?);
                }
            }
            Value::Array(items) => {
                let parts: Result<Vec<String>> = items.iter().map(scalar).collect();
                out.push(flag);
                out.push(parts?.join(","));
            }
            other => {
                out.push(flag);
                out.push(scalar(other)?);
            }
        }
    }
    Ok(out)
}

/// Inserts config-file flags right after the subcommand so that flags given
/// on the command line override them.
fn expand_config(args: Vec<String>) -> Result<Vec<String>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    if args.len() < 2 {
        return Ok(args);
    }
    let mut out = args[..2].to_vec();
    out.extend(config_args(&path)?);
    out.extend_from_slice(&args[2..]);
    Ok(out)
}

fn set_threads() {
    if let Some(n) = std::env::var("TZLAB_THREADS").ok().and_then(|s| s.trim().parse::<usize>().ok()) {
        if n > 0 {
            // a second call in the same process keeps the first pool
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::BadArgument(_)
        | Error::Config(_)
        | Error::ConeLine { .. }
        | Error::ZeroPole
        | Error::ZeroLambda
        | Error::PoleCollision(_)
        | Error::GammaCollision
        | Error::NonPositiveH { .. } => 2,
        _ => 1,
    }
}

/// Runs the command line; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<String> = argv.into_iter().map(|a| a.into().to_string_lossy().into_owned()).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let cmd = Cli::command().mut_subcommands(|s| s.args_override_self(true));
    let cli = match cmd.try_get_matches_from(args).and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    set_threads();
    match execute(&cli.command) {
        Ok(report) => {
            for c in &report.checks {
                println!("{}", c.summary());
            }
            println!("overall: {}", if report.pass { "PASS" } else { "FAIL" });
            if report.pass {
                0
            } else {
                for c in report.checks.iter().filter(|c| c.required && !c.pass) {
                    eprintln!("failed check: {}", c.name);
                }
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

// ---------------------------------------------------------------------------
// pipelines
// ---------------------------------------------------------------------------

fn parse_line(s: &str) -> Result<ProjLine> {
    let parts: Vec<&str> = s.split(',').collect();
    let bad = || Error::BadArgument(format!("line `{s}` is not of the form a,b,c"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut v = [0.0; 3];
    for (k, p) in parts.iter().enumerate() {
        v[k] = p.trim().parse().map_err(|_| bad())?;
    }
    ProjLine::real(v[0], v[1], v[2])
}

fn grid_spec(c: &Common) -> Result<GridSpec> {
    let (nu, nv) = GridSpec::parse_counts(&c.grid)?;
    if nu < 3 || nv < 3 {
        return Err(Error::BadArgument(format!("grid {nu}x{nv} needs at least 3 nodes per side")));
    }
    GridSpec::new(Domain::parse(&c.domain)?, nu, nv)
}

fn substeps(c: &Common, sp: GridSpec) -> usize {
    c.substeps
        .unwrap_or_else(|| (sp.du().max(sp.dv()) * 64.0).ceil() as usize)
        .max(1)
}

fn dress_options(c: &Common) -> Result<DressOptions> {
    if !(c.max_masked >= 0.0 && c.max_masked <= 1.0) {
        return Err(Error::BadArgument(format!("--max-masked {} not in [0, 1]", c.max_masked)));
    }
    let mut o = if c.strict { DressOptions::strict() } else { DressOptions::default() };
    if !c.strict {
        o.max_masked_fraction = c.max_masked;
    }
    Ok(o)
}

fn seed_family(c: &Common, s: &SeedArgs, sp: GridSpec) -> Result<Arc<dyn FrameFamily>> {
    Ok(match s.seed {
        SeedKind::Vacuum => Arc::new(VacuumFamily::new(sp)),
        SeedKind::Soliton => {
            let p = s.soliton.params(1000.0)?;
            let field = SolutionField::analytic(sp, Arc::new(OneSoliton(p)));
            Arc::new(IntegratedFamily::new(field, substeps(c, sp))?)
        }
    })
}

fn finish(c: &Common, x: &ImmersionGrid, report: &VerificationReport) -> Result<()> {
    if let Some(out) = &c.out {
        let fmt = match &c.format {
            Some(f) => f.parse()?,
            None => MeshFormat::from_path(out),
        };
        export_mesh(x, out, fmt)?;
    }
    if let Some(r) = &c.report {
        write_report(report, r)?;
    }
    Ok(())
}

fn execute(cmd: &Command) -> Result<VerificationReport> {
    match cmd {
        Command::Vacuum(a) => vacuum_cmd(&a.common),
        Command::Soliton(a) => soliton_cmd(a),
        Command::Dress(a) => dress_cmd(a),
        Command::Transform(a) => transform_cmd(a),
        Command::Dual(a) => dual_cmd(a),
        Command::Permute(a) => permute_cmd(a),
        Command::Breather(a) => breather_cmd(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Export(a) => export_cmd(a),
    }
}

fn vacuum_cmd(c: &Common) -> Result<VerificationReport> {
    let sp = grid_spec(c)?;
    let lambda = re(c.lambda);
    let x = family_surface(&VacuumFamily::new(sp), lambda)?;
    let mut rep = VerificationReport::new();
    rep.extend(convergence_checks("", sp, &|s| {
        let x = family_surface(&VacuumFamily::new(s), lambda)?;
        Ok((real_h(&x), x))
    }));
    let cubic = Grid::from_fn(sp, |_, _, u, v| match vacuum_frame(u, v, lambda) {
        Ok(f) => cubic_residual_c(f.column(2)).norm(),
        Err(_) => f64::NAN,
    });
    rep.push(Check::new("cubic", max_finite(&cubic).0, 1e-10, 0.0));
    let fg = integrate_frame_with(&SolutionField::analytic(sp, Arc::new(Vacuum)), lambda, substeps(c, sp))?;
    let err = Grid::from_fn(sp, |i, j, u, v| match vacuum_frame(u, v, lambda) {
        Ok(f) => (*fg.f.get(i, j) - f).max_abs(),
        Err(_) => f64::NAN,
    });
    rep.push(Check::new("frame-integration", max_finite(&err).0, 1e-8, 0.0));
    rep.push(Check::new("det-frame", fg.det_residual(), 1e-8, 0.0));
    finish(c, &x, &rep)?;
    Ok(rep)
}

fn soliton_cmd(a: &SolitonCmd) -> Result<VerificationReport> {
    let c = &a.common;
    let sp = grid_spec(c)?;
    let p = a.soliton.params(0.0)?;
    let x = one_soliton_transform(sp, &p, c.lambda)?;
    let mut rep = VerificationReport::new();
    let (mut worst, mut masked, mut total) = (0.0f64, 0usize, 0usize);
    for i in 0..sp.nu {
        for j in 0..sp.nv {
            let Some(h) = one_soliton_h(sp.u(i), sp.v(j), &p) else { continue };
            total += 1;
            let z = *x.h.get(i, j);
            if z.re.is_finite() {
                worst = worst.max((z - re(h)).norm() / h.abs().max(1.0));
            } else {
                masked += 1;
            }
        }
    }
    rep.push(Check::new("h1-vs-closed-form", worst, 1e-10, masked as f64 / total.max(1) as f64));
    rep.extend(convergence_checks("", sp, &|s| {
        let x = one_soliton_transform(s, &p, c.lambda)?;
        Ok((real_h(&x), x))
    }));
    if p.beta0 == 0.0 {
        let (mut src, mut dst) = (Vec::new(), Vec::new());
        for i in 0..sp.nu {
            for j in 0..sp.nv {
                let y = *x.x.get(i, j);
                if let (Some(k), true) = (one_soliton_surface(sp.u(i), sp.v(j), c.lambda, &p)?, y.is_finite()) {
                    src.push(k);
                    dst.push(y.re_parts());
                }
            }
        }
        if src.len() >= 3 {
            let (_, misfit) = fit_linear(&src, &dst)?;
            // gated by `verify`; reported here
            rep.push(Check::new("displayed-surface-fit", misfit, 1e-8, 0.0).informational());
        }
    }
    finish(c, &x, &rep)?;
    Ok(rep)
}

fn dress_cmd(a: &DressArgs) -> Result<VerificationReport> {
    let c = &a.common;
    let sp = grid_spec(c)?;
    let opts = dress_options(c)?;
    let kind = if a.rank == 1 { Kind::Rank1 } else { Kind::Rank2 };
    let l = parse_line(&a.line)?;
    let e = SimpleElement::new(kind, re(a.alpha), l)?;
    let lambda = re(c.lambda);
    let base = seed_family(c, &a.seed, sp)?;
    let d = dress(base.clone(), e, lambda, &opts)?;

    let mut rep = VerificationReport::new();
    let x = family_surface(base.as_ref(), lambda)?;
    let (cf, scale) = match kind {
        Kind::Rank1 => {
            let phi = family_scalar(base.as_ref(), &l, re(a.alpha))?;
            (dressed_surface_closed_form(&x, base.h(), &phi, re(a.alpha), lambda, kind)?, ONE)
        }
        Kind::Rank2 => {
            let phi = family_scalar(base.as_ref(), &l, re(-a.alpha))?;
            let (l3, a3) = (lambda.powi(3), re(a.alpha).powi(3));
            (dressed_surface_closed_form(&x, base.h(), &phi, re(a.alpha), lambda, kind)?, (l3 - a3) / (l3 + a3))
        }
    };
    let masked = d.family.masked_fraction;
    let (g, m) = max_gap(&d.surface.x, &cf.scaled(scale).x);
    rep.push(Check::new("dressing-vs-closed-form", g, 1e-8, m.max(masked)));
    let (g, m) = max_rel_gap_c(d.family.h(), &cf.h);
    rep.push(Check::new("h-vs-closed-form", g, 1e-8, m.max(masked)));
    let [r0, r1] = residue_checks(&d.family)?;
    rep.push(Check::new("residue+alpha", r0, 1e-8, 0.0));
    rep.push(Check::new("residue-alpha", r1, 1e-8, 0.0));
    let det = d.frame.map(|f| if f.is_finite() { (f.det() - ONE).norm() } else { f64::NAN });
    rep.push(Check::new("det-frame", max_finite(&det).0, 1e-8, masked));
    rep.extend(convergence_checks("", sp, &|s| {
        let x = dress(seed_family(c, &a.seed, s)?, e, lambda, &opts)?.surface;
        Ok((real_h(&x), x))
    }));
    finish(c, &d.surface, &rep)?;
    Ok(rep)
}

fn transform_cmd(a: &TransformArgs) -> Result<VerificationReport> {
    let c = &a.common;
    let sp = grid_spec(c)?;
    let l = parse_line(&a.line)?;
    let lambda = re(c.lambda);
    let build = |s: GridSpec| -> Result<ImmersionGrid> {
        let base = seed_family(c, &a.seed, s)?;
        let x = family_surface(base.as_ref(), lambda)?;
        let phi = family_scalar(base.as_ref(), &l, re(a.alpha))?;
        classical_transform(base.h(), &x, &phi)
    };
    let x = build(sp)?;
    let mut rep = VerificationReport::new();
    rep.extend(convergence_checks("", sp, &|s| {
        let x = build(s)?;
        Ok((real_h(&x), x))
    }));
    finish(c, &x, &rep)?;
    Ok(rep)
}

fn strip_partials(x: &ImmersionGrid) -> ImmersionGrid {
    ImmersionGrid::new(x.x.clone(), x.h.clone(), x.lambda)
}

fn dual_cmd(a: &DualArgs) -> Result<VerificationReport> {
    let c = &a.common;
    let sp = grid_spec(c)?;
    let lambda = re(c.lambda);
    let surface = |s: GridSpec| family_surface(seed_family(c, &a.seed, s)?.as_ref(), lambda);
    let xs = dual_surface(&surface(sp)?)?;
    let mut rep = VerificationReport::new();
    rep.extend(convergence_checks("", sp, &|s| {
        let x = dual_surface(&surface(s)?)?;
        Ok((real_h(&x), x))
    }));
    // (X*)* from differences only, against X and against -X
    let involution = |s: GridSpec, sign: f64| -> Result<Grid<f64>> {
        let x = surface(s)?;
        let xss = dual_surface(&dual_surface(&strip_partials(&x))?)?;
        Ok(xss.x.zip_map(&x.x, |p, q| (*p - q.scale_re(sign)).max_abs()))
    };
    rep.push(crate::geometry::ratio_check(
        "dual-involution",
        &involution(sp, 1.0)?,
        &involution(sp.refined(), 1.0)?,
    ));
    let (m, f) = crate::grid::max_interior(&involution(sp, -1.0)?);
    let d2 = sp.du().max(sp.dv()).powi(2);
    rep.push(Check::new("dual-involution-up-to-sign", m, d2, f).informational());
    finish(c, &xs, &rep)?;
    Ok(rep)
}

fn permute_cmd(a: &PermuteArgs) -> Result<VerificationReport> {
    let c = &a.common;
    let sp = grid_spec(c)?;
    let g1 = SimpleElement::new(Kind::Rank1, re(a.alpha1), parse_line(&a.line1)?)?;
    let g2 = SimpleElement::new(Kind::Rank1, re(a.alpha2), parse_line(&a.line2)?)?;
    let base = seed_family(c, &a.seed, sp)?;
    let out = permutability_check(base, &g1, &g2, re(c.lambda), &dress_options(c)?, c.rng_seed)?;
    let (t1, t2) = out.tilde;
    for (name, t) in [("l1~", t1), ("l2~", t2)] {
        match t.line.ab() {
            Some((a, b)) if a.im == 0.0 && b.im == 0.0 => println!("{name} = ({:.15}, {:.15}, 1)", a.re, b.re),
            _ => println!("{name} = {}", t.line),
        }
    }
    if let Some(ch) = out.report.get("h12-vs-h21") {
        println!("h12 = h21 residual: {:.3e}", ch.residual);
    }
    let x = out.x12;
    finish(c, &x, &out.report)?;
    Ok(out.report)
}

fn breather_cmd(a: &BreatherArgs) -> Result<VerificationReport> {
    let c = &a.common;
    let sp = grid_spec(c)?;
    let alpha = C64::from_polar(a.modulus, a.arg);
    let l = parse_line(&a.line)?;
    let f = make_breather(alpha, l)?;
    let opts = dress_options(c)?;
    let lambda = re(c.lambda);
    let build = |s: GridSpec| dress_breather(&f, seed_family(c, &a.seed, s)?, lambda, &opts);
    let b = build(sp)?;
    let mut rep = VerificationReport::new();
    let him = b.family.h().data.iter().filter(|z| z.re.is_finite()).map(|z| z.im.abs()).fold(0.0, f64::max);
    rep.push(Check::new("max-imag-h", him, 1e-9, 0.0));
    rep.push(Check::new("max-imag-X", b.max_imag, 1e-9, 0.0));
    rep.extend(convergence_checks("", sp, &|s| {
        let b = build(s)?;
        Ok((b.h, b.surface))
    }));
    finish(c, &b.surface, &rep)?;
    Ok(rep)
}

fn verify_cmd(a: &VerifyArgs) -> Result<VerificationReport> {
    let ids: Vec<usize> = if a.criterion.is_empty() {
        (1..=10).collect()
    } else {
        a.criterion.iter().map(|&k| k as usize).collect()
    };
    let mut rep = VerificationReport::new();
    for id in ids {
        let cr = run_criterion(id, a.rng_seed);
        println!("criterion {id:>2} {}: {}", if cr.report.pass { "PASS" } else { "FAIL" }, cr.title);
        for mut ch in cr.report.checks {
            ch.name = format!("c{id}/{}", ch.name);
            rep.push(ch);
        }
    }
    if let Some(r) = &a.report {
        write_report(&rep, r)?;
    }
    Ok(rep)
}

fn export_cmd(a: &ExportArgs) -> Result<VerificationReport> {
    let (x, h) = import_csv(&a.input)?;
    let fmt = match &a.format {
        Some(f) => f.parse()?,
        None => MeshFormat::from_path(&a.out),
    };
    let surface = ImmersionGrid::new(x, h.map(|v| re(*v)), ONE);
    export_mesh(&surface, &a.out, fmt)?;
    let mut rep = VerificationReport::new();
    rep.push(Check::new("masked-fraction", surface.masked_fraction(), 1.0, 0.0).informational());
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        std::iter::once("tzlab".to_string()).chain(s.split_whitespace().map(str::to_string)).collect()
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(argv("frobnicate")), 2);
        assert_eq!(run(argv("vacuum --grid 2x41")), 2);
        assert_eq!(run(argv("dress --line 1,1")), 2);
        assert_eq!(run(argv("dress --alpha 0")), 2);
        assert_eq!(run(argv("vacuum --lambda 0 --grid 5x5")), 2);
    }

    #[test]
    fn help_exits_0() {
        assert_eq!(run(argv("--help")), 0);
    }

    #[test]
    fn config_flags_precede_command_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, r#"{"grid": "9x9", "lambda": 0.8, "strict": true, "domain": "-1:1,-1:1"}"#).unwrap();
        let args = expand_config(argv(&format!("dress --config {} --lambda 0.7", p.display()))).unwrap();
        let cmd = Cli::command().mut_subcommands(|s| s.args_override_self(true));
        let cli = Cli::from_arg_matches(&cmd.try_get_matches_from(args).unwrap()).unwrap();
        let Command::Dress(d) = cli.command else { panic!() };
        assert_eq!(d.common.grid, "9x9");
        assert_eq!(d.common.lambda, 0.7);
        assert!(d.common.strict);
    }

    #[test]
    fn bad_config_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, "[1, 2]").unwrap();
        assert_eq!(run(argv(&format!("vacuum --config {}", p.display()))), 2);
    }

    #[test]
    fn default_substeps_reach_one_over_64() {
        let c = Common::parse_from_common(&argv("vacuum")[1..]);
        let sp = grid_spec(&c).unwrap();
        assert_eq!(substeps(&c, sp), 4);
    }

    #[test]
    fn line_parsing() {
        assert!(parse_line("0, 1, 1").is_ok());
        assert!(matches!(parse_line("a,b,c"), Err(Error::BadArgument(_))));
    }

    impl Common {
        fn parse_from_common(args: &[String]) -> Common {
            let cmd = Cli::command();
            let m = cmd.try_get_matches_from(std::iter::once("tzlab".to_string()).chain(args.iter().cloned())).unwrap();
            match Cli::from_arg_matches(&m).unwrap().command {
                Command::Vacuum(v) => v.common,
                _ => unreachable!(),
            }
        }
    }
}
