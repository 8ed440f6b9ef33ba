//! The acceptance suite: one report per criterion, shared by `tzlab verify`
//! and the `acceptance` test target.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::exact::{
    fit_linear, one_soliton_h, one_soliton_surface, vacuum_frame, vacuum_scalar_jet,
    SolitonParams, Vacuum,
};
use crate::geometry::{conformal_factor, curvatures, fubini_pick, ratio_check, shape_residual_grid};
use crate::grid::{max_finite, max_gap, max_gap_c, max_interior, Domain, Grid, GridSpec, ImmersionGrid};
use crate::lax_frame::{
    integrate_frame_with, tzitzeica_residual_grid, zero_curvature_residual, FnSeed, ScalarSolution,
    SolutionField,
};
use crate::loopalgebra::{re, ProjLine, Vec3, C64, ONE};
use crate::rational::{make_breather, make_rank1, make_rank2, verify_reality, Kind, SimpleElement};
use crate::report::{Check, VerificationReport};
use crate::transforms::{
    classical_transform, dress, dress_breather, dressed_surface_closed_form, dual_surface, family_scalar,
    family_surface, permutability_check, residue_checks, DressOptions, FrameFamily,
    VacuumFamily,
};

pub struct Criterion {
    pub id: usize,
    pub title: &'static str,
    pub report: VerificationReport,
}

pub const TITLES: [&str; 10] = [
    "loop-group identities",
    "frame integration",
    "dressing equals classical transformation",
    "rank-2 dressing equals dual",
    "one-soliton oracle",
    "permutability",
    "breather reality",
    "PDE and geometry convergence",
    "cubic identity",
    "negative controls",
];

fn square(a: f64, b: f64, n: usize) -> GridSpec {
    GridSpec::new(Domain::square(a, b), n, n).expect("valid grid")
}

fn vacuum(sp: GridSpec) -> Arc<dyn FrameFamily> {
    Arc::new(VacuumFamily::new(sp))
}

fn line(a: f64, b: f64, c: f64) -> ProjLine {
    ProjLine::real(a, b, c).expect("valid line")
}

/// A failed computation becomes a failing check named after the step.
fn guard(rep: &mut VerificationReport, name: &str, r: Result<VerificationReport>) {
    match r {
        Ok(sub) => rep.extend(sub),
        Err(e) => rep.push(Check::new(format!("{name}: {e}"), f64::INFINITY, 0.0, 0.0)),
    }
}

fn merge_max(rep: &mut VerificationReport, name: &str, values: &[f64], tol: f64) {
    let m = values.iter().fold(0.0f64, |a, &b| if b.is_nan() { f64::NAN } else { a.max(b) });
    rep.push(Check::new(name, m, tol, 0.0));
}

/// Scalar solution of the vacuum with constant coefficients.
pub fn vacuum_scalar_grid(sp: GridSpec, lambda1: f64, c: (C64, C64, C64)) -> Result<ScalarSolution> {
    let l1 = re(lambda1);
    vacuum_scalar_jet(0.0, 0.0, l1, c.0, c.1, c.2)?;
    let jets = Grid::from_fn(sp, |_, _, u, v| {
        vacuum_scalar_jet(u, v, l1, c.0, c.1, c.2).expect("lambda1 checked")
    });
    Ok(ScalarSolution {
        phi: jets.map(|j| j.0),
        phi_u: jets.map(|j| j.1),
        phi_v: jets.map(|j| j.2),
        gamma: l1.powi(3),
    })
}

/// One-soliton surface at `lambda` by the classical transformation of the
/// vacuum.
pub fn one_soliton_transform(sp: GridSpec, p: &SolitonParams, lambda: f64) -> Result<ImmersionGrid> {
    let base = VacuumFamily::new(sp);
    let x = family_surface(&base, re(lambda))?;
    let phi = vacuum_scalar_grid(sp, p.lambda1, p.coefficients())?;
    classical_transform(base.h(), &x, &phi)
}

// ---------------------------------------------------------------------------

pub fn criterion_1(seed: u64) -> Result<VerificationReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = VerificationReport::new();
    for kind in [Kind::Rank1, Kind::Rank2] {
        let (mut nu, mut mu, mut tau, mut det) = (vec![], vec![], vec![], vec![]);
        let mut made = 0;
        while made < 20 {
            let r = rng.gen_range(0.5..2.0);
            // every other element has a complex pole (no tau claim)
            let t = if made % 2 == 0 {
                if rng.gen_bool(0.5) { 0.0 } else { PI }
            } else {
                rng.gen_range(0.1..1.0)
            };
            let l = ProjLine::real(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), 1.0)?;
            let Ok(e) = SimpleElement::new(kind, C64::from_polar(r, t), l) else {
                continue;
            };
            made += 1;
            let samples: Vec<C64> = crate::transforms::sample_lambdas(12, rng.gen(), &[e.pole]);
            let sub = verify_reality(&e, &samples)?;
            nu.push(sub.get("nu-reality").map_or(f64::NAN, |c| c.residual));
            mu.push(sub.get("mu-reality").map_or(f64::NAN, |c| c.residual));
            if e.is_real() {
                tau.push(sub.get("tau-reality").map_or(f64::NAN, |c| c.residual));
            }
            for &l in &samples {
                let d = e.evaluate(l)?.det();
                let want = e.det_at(l)?;
                det.push((d - want).norm() / want.norm().max(1.0));
            }
        }
        let k = if kind == Kind::Rank1 { "rank1" } else { "rank2" };
        merge_max(&mut rep, &format!("{k}/nu-reality"), &nu, 1e-10);
        merge_max(&mut rep, &format!("{k}/mu-reality"), &mu, 1e-10);
        merge_max(&mut rep, &format!("{k}/tau-reality"), &tau, 1e-10);
        merge_max(&mut rep, &format!("{k}/det-closed-form"), &det, 1e-10);
    }
    Ok(rep)
}

fn frame_error(sp: GridSpec, lambda: C64) -> Result<(f64, f64)> {
    let field = SolutionField::analytic(sp, Arc::new(Vacuum));
    let fg = integrate_frame_with(&field, lambda, 1)?;
    let err = Grid::from_fn(sp, |i, j, u, v| {
        (*fg.f.get(i, j) - vacuum_frame(u, v, lambda).expect("lambda != 0")).max_abs()
    });
    Ok((max_finite(&err).0, fg.det_residual()))
}

pub fn criterion_2() -> Result<VerificationReport> {
    let mut rep = VerificationReport::new();
    for lambda in [1.0, 0.7] {
        let (e64, d64) = frame_error(square(0.0, 1.0, 65), re(lambda))?;
        let (e32, _) = frame_error(square(0.0, 1.0, 33), re(lambda))?;
        rep.push(Check::new(format!("frame-error@{lambda}"), e64, 1e-8, 0.0));
        rep.push(Check::at_least(format!("frame-order@{lambda}"), e32 / e64, 12.0));
        rep.push(Check::new(format!("det-frame@{lambda}"), d64, 1e-8, 0.0));
    }
    Ok(rep)
}

fn dressing_vs_closed_form(
    base: &Arc<dyn FrameFamily>,
    alpha: f64,
    l: ProjLine,
    lambda: f64,
) -> Result<VerificationReport> {
    let mut rep = VerificationReport::new();
    let tag = format!("a={alpha},l={l},lambda={lambda}");
    let e = make_rank1(re(alpha), l)?;
    let d = dress(base.clone(), e, re(lambda), &DressOptions::default())?;
    let x = family_surface(base.as_ref(), re(lambda))?;
    let phi = family_scalar(base.as_ref(), &l, re(alpha))?;
    let cf = dressed_surface_closed_form(&x, base.h(), &phi, re(alpha), re(lambda), Kind::Rank1)?;
    let (gx, mx) = max_gap(&d.surface.x, &cf.x);
    rep.push(Check::new(format!("surface-gap[{tag}]"), gx, 1e-8, mx));
    let (gh, mh) = max_gap_c(d.family.h(), &cf.h);
    rep.push(Check::new(format!("h-gap[{tag}]"), gh, 1e-8, mh));
    let [r0, r1] = residue_checks(&d.family)?;
    rep.push(Check::new(format!("residue+alpha[{tag}]"), r0, 1e-8, 0.0));
    rep.push(Check::new(format!("residue-alpha[{tag}]"), r1, 1e-8, 0.0));
    Ok(rep)
}

pub fn criterion_3() -> Result<VerificationReport> {
    let base = vacuum(square(-1.0, 1.0, 41));
    let mut rep = VerificationReport::new();
    for alpha in [0.8, 1.2] {
        for lambda in [0.7, 1.0, 1.5] {
            guard(&mut rep, "dressing", dressing_vs_closed_form(&base, alpha, line(1.0, 1.0, 1.0), lambda));
        }
    }
    // nontrivial lines on the same seed
    for l in [line(0.5, 0.5, 1.0), line(1.0, 1.25, 1.0)] {
        guard(&mut rep, "dressing", dressing_vs_closed_form(&base, 1.2, l, 0.7));
    }
    Ok(rep)
}

fn dual_relation(base: &Arc<dyn FrameFamily>, alpha: f64, l: ProjLine, lambda: f64) -> Result<VerificationReport> {
    let mut rep = VerificationReport::new();
    let tag = format!("a={alpha},l={l},lambda={lambda}");
    let opts = DressOptions::default();
    let d1 = dress(base.clone(), make_rank1(re(alpha), l)?, re(lambda), &opts)?;
    let d2 = dress(base.clone(), make_rank2(re(alpha), l)?, re(-lambda), &opts)?;
    let neg = d2.surface.x.map(|p| -*p);
    let (g, m) = max_gap(&d1.surface.x, &neg);
    rep.push(Check::new(format!("rank1(lambda)+rank2(-lambda)[{tag}]"), g, 1e-8, m));
    // diagnostic: the rank-2 dressing is the closed form times a constant
    let xm = family_surface(base.as_ref(), re(-lambda))?;
    let phim = family_scalar(base.as_ref(), &l, re(-alpha))?;
    let cf2 = dressed_surface_closed_form(&xm, base.h(), &phim, re(alpha), re(-lambda), Kind::Rank2)?;
    let (l3, a3) = ((-lambda).powi(3), alpha.powi(3));
    let (g, m) = max_gap(&d2.surface.x, &cf2.scaled(re((l3 - a3) / (l3 + a3))).x);
    rep.push(Check::new(format!("rank2-vs-scaled-closed-form[{tag}]"), g, 1e-8, m).informational());
    Ok(rep)
}

pub fn criterion_4() -> Result<VerificationReport> {
    let base = vacuum(square(-1.0, 1.0, 41));
    let mut rep = VerificationReport::new();
    for alpha in [0.8, 1.2] {
        for lambda in [0.7, 1.0, 1.5] {
            guard(&mut rep, "dual-relation", dual_relation(&base, alpha, line(1.0, 1.0, 1.0), lambda));
        }
    }
    Ok(rep)
}

pub fn criterion_5() -> Result<VerificationReport> {
    let sp = square(-1.0, 1.0, 41);
    let mut rep = VerificationReport::new();
    let lambda = 1.0;
    let p = SolitonParams::new(0.9, 0.4, 0.0)?;
    let out = one_soliton_transform(sp, &p, lambda)?;
    let (mut worst, mut masked, mut total) = (0.0f64, 0usize, 0usize);
    for i in 0..sp.nu {
        for j in 0..sp.nv {
            let Some(h) = one_soliton_h(sp.u(i), sp.v(j), &p) else { continue };
            total += 1;
            let z = *out.h.get(i, j);
            if !z.re.is_finite() {
                masked += 1;
                continue;
            }
            worst = worst.max((z - re(h)).norm() / h.abs().max(1.0));
        }
    }
    rep.push(Check::new("h1-vs-closed-form", worst, 1e-10, masked as f64 / total.max(1) as f64));

    // spot values: phase 0 gives -1/2, phase pi/4 gives -2
    let (i0, j0) = (10, 30);
    for (phase, want) in [(0.0, -0.5), (PI / 4.0, -2.0)] {
        let q = SolitonParams::new(0.9, 0.0, 0.0)?;
        let theta0 = phase - q.phase(sp.u(i0), sp.v(j0));
        let q = SolitonParams::new(0.9, theta0, 0.0)?;
        let o = one_soliton_transform(sp, &q, lambda)?;
        let got = *o.h.get(i0, j0);
        rep.push(Check::new(format!("spot-value@phase={phase:.4}"), (got - re(want)).norm(), 1e-10, 0.0));
    }

    let (mut src, mut dst) = (Vec::new(), Vec::new());
    for i in 0..sp.nu {
        for j in 0..sp.nv {
            let y = *out.x.get(i, j);
            if let (Some(k), true) = (one_soliton_surface(sp.u(i), sp.v(j), lambda, &p)?, y.is_finite()) {
                src.push(k);
                dst.push(y.re_parts());
            }
        }
    }
    let (_, misfit) = fit_linear(&src, &dst)?;
    rep.push(Check::new("surface-vs-displayed-up-to-linear-map", misfit, 1e-8, 0.0));
    Ok(rep)
}

pub fn criterion_6(seed: u64) -> Result<VerificationReport> {
    let base = vacuum(square(-1.0, 1.0, 41));
    let g1 = make_rank1(re(1.0), line(0.0, 1.0, 1.0))?;
    let g2 = make_rank1(re(2.0), line(0.0, 1.0, 1.0))?;
    let out = permutability_check(base, &g1, &g2, re(1.0), &DressOptions::default(), seed)?;
    let mut rep = out.report;
    let (t1, t2) = out.tilde;
    for (name, got, want) in [
        ("tilde-line-1", t1.line.rep(), Vec3::real(0.0, -1.0 / 7.0, 1.0)),
        ("tilde-line-2", t2.line.rep(), Vec3::real(0.0, 5.0 / 7.0, 1.0)),
    ] {
        rep.push(Check::new(name, (got - want).max_abs(), 1e-14, 0.0));
    }
    Ok(rep)
}

/// Breather surface and `h` on `sp` at `lambda`.
fn breather_output(sp: GridSpec, alpha: C64, l: ProjLine, lambda: f64) -> Result<(Grid<f64>, ImmersionGrid, f64)> {
    let f = make_breather(alpha, l)?;
    let b = dress_breather(&f, vacuum(sp), re(lambda), &DressOptions::default())?;
    Ok((b.h, b.surface, b.max_imag))
}

pub fn criterion_7() -> Result<VerificationReport> {
    let sp = square(-1.0, 1.0, 41);
    let mut rep = VerificationReport::new();
    let alpha = C64::from_polar(1.0, PI / 8.0);
    let f = make_breather(alpha, line(1.0, 1.0, 1.0))?;
    let b = dress_breather(&f, vacuum(sp), re(1.0), &DressOptions::default())?;
    let him = b.family.h().data.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    rep.push(Check::new("max-imag-h", him, 1e-9, 0.0));
    rep.push(Check::new("max-imag-X", b.max_imag, 1e-9, 0.0));
    let (hf, _, _) = breather_output(sp.refined(), alpha, line(1.0, 1.0, 1.0), 1.0)?;
    rep.push(ratio_check("pde-convergence", &tzitzeica_residual_grid(&b.h), &tzitzeica_residual_grid(&hf)));
    Ok(rep)
}

pub type Producer<'a> = dyn Fn(GridSpec) -> Result<(Grid<f64>, ImmersionGrid)> + 'a;

/// Tzitzeica and affine-sphere residuals of an output rebuilt on `sp` and on
/// its refinement. Check names are `{prefix}pde` and `{prefix}affine-sphere`.
pub fn convergence_checks(prefix: &str, sp: GridSpec, make: &Producer) -> VerificationReport {
    let mut rep = VerificationReport::new();
    let run = || -> Result<(Check, Check)> {
        let (hc, xc) = make(sp)?;
        let (hf, xf) = make(sp.refined())?;
        Ok((
            ratio_check(&format!("{prefix}pde"), &tzitzeica_residual_grid(&hc), &tzitzeica_residual_grid(&hf)),
            ratio_check(&format!("{prefix}affine-sphere"), &shape_residual_grid(&xc), &shape_residual_grid(&xf)),
        ))
    };
    match run() {
        Ok((a, b)) => {
            rep.push(a);
            rep.push(b);
        }
        Err(e) => rep.push(Check::new(format!("{prefix}convergence: {e}"), f64::INFINITY, 0.0, 0.0)),
    }
    rep
}

fn convergence(rep: &mut VerificationReport, name: &str, sp: GridSpec, make: &Producer) {
    rep.extend(convergence_checks(&format!("{name}/"), sp, make));
}

/// Real part of the attached `h`; NaN where it is not real.
pub fn real_h(x: &ImmersionGrid) -> Grid<f64> {
    x.h.map(|z| if z.im.abs() <= 1e-9 * z.norm().max(1.0) { z.re } else { f64::NAN })
}

fn dressed_nontrivial(sp: GridSpec) -> Result<ImmersionGrid> {
    let e = make_rank1(re(1.2), line(1.0, 1.25, 1.0))?;
    Ok(dress(vacuum(sp), e, re(0.7), &DressOptions::default())?.surface)
}

pub fn criterion_8() -> Result<VerificationReport> {
    let mut rep = VerificationReport::new();
    let half = square(-0.5, 0.5, 41);
    let full = square(-1.0, 1.0, 41);

    convergence(&mut rep, "vacuum", full, &|sp| {
        let x = family_surface(&VacuumFamily::new(sp), re(1.3))?;
        Ok((real_h(&x), x))
    });
    convergence(&mut rep, "one-soliton", half, &|sp| {
        let x = one_soliton_transform(sp, &SolitonParams::new(1.0, 0.0, 0.0)?, 0.8)?;
        Ok((real_h(&x), x))
    });
    convergence(&mut rep, "dressed", half, &|sp| {
        let x = dressed_nontrivial(sp)?;
        Ok((real_h(&x), x))
    });
    convergence(&mut rep, "dual", half, &|sp| {
        let x = dual_surface(&dressed_nontrivial(sp)?)?;
        Ok((real_h(&x), x))
    });
    convergence(&mut rep, "breather", half, &|sp| {
        let (h, x, _) = breather_output(sp, C64::from_polar(1.0, PI / 8.0), line(0.5, 0.5, 1.0), 0.8)?;
        Ok((h, x))
    });

    // vacuum invariants at lambda = 1.3, bounded by the squared step
    let lambda: f64 = 1.3;
    let x = family_surface(&VacuumFamily::new(full), re(lambda))?;
    let d2 = full.du().max(full.dv()).powi(2);
    let fp = fubini_pick(&x)?;
    let cv = curvatures(&x)?;
    let dev = |g: &Grid<f64>, want: f64| max_interior(&g.map(|a| (a - want).abs()));
    for (name, g, want) in [
        ("vacuum/H", &cv.mean, 1.0),
        ("vacuum/K", &cv.gauss, 1.0),
        ("vacuum/aJ", &fp.a_j, lambda.powi(3)),
        ("vacuum/bJ", &fp.b_j, lambda.powi(-3)),
        ("vacuum/h", &conformal_factor(&x), 1.0),
    ] {
        let (m, f) = dev(g, want);
        rep.push(Check::new(name, m, d2, f));
    }
    Ok(rep)
}

pub fn criterion_9(seed: u64) -> Result<VerificationReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (u, v) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let mut lambda: f64 = rng.gen_range(0.5..2.0);
        if rng.gen_bool(0.5) {
            lambda = -lambda;
        }
        let col = vacuum_frame(u, v, re(lambda))?.column(2);
        worst = worst.max(crate::exact::cubic_residual_c(col).norm());
    }
    let mut rep = VerificationReport::new();
    rep.push(Check::new("cubic", worst, 1e-10, 0.0));
    Ok(rep)
}

pub fn criterion_10() -> Result<VerificationReport> {
    let mut rep = VerificationReport::new();
    let levels = [21, 41, 81];
    let bound = 0.1;

    let mut pde = f64::INFINITY;
    let mut flat = f64::INFINITY;
    for n in levels {
        let sp = square(-0.5, 0.5, n);
        let h = Grid::from_fn(sp, |_, _, u, v| 1.0 + u * v);
        pde = pde.min(max_interior(&tzitzeica_residual_grid(&h)).0);
        let seed = Arc::new(FnSeed {
            f: |u: f64, v: f64| [1.0 + u * v, v, u],
            label: "1+uv".into(),
        });
        let field = SolutionField::analytic(sp, seed);
        flat = flat.min(zero_curvature_residual(&field, re(1.0))?);
    }
    rep.push(Check::at_least("non-solution/pde", pde, bound));
    rep.push(Check::at_least("non-solution/zero-curvature", flat, bound));

    let surfaces: [(&str, fn(f64, f64) -> Vec3); 2] = [
        ("graph-z=uv", |u, v| Vec3::real(u, v, u * v)),
        ("sphere-patch", |u, v| Vec3::real(u.cos() * v.cos(), u.sin() * v.cos(), v.sin())),
    ];
    for (name, f) in surfaces {
        let mut worst = f64::INFINITY;
        for n in levels {
            let sp = square(-0.5, 0.5, n);
            let x = ImmersionGrid::new(Grid::from_fn(sp, |_, _, u, v| f(u, v)), Grid::filled(sp, ONE), ONE);
            let h = conformal_factor(&x).map(|a| re(*a));
            let x = ImmersionGrid { h, ..x };
            worst = worst.min(max_interior(&shape_residual_grid(&x)).0);
        }
        rep.push(Check::at_least(format!("{name}/affine-sphere"), worst, bound));
    }
    Ok(rep)
}

/// Runs criterion `id` (1-based); errors become failing checks.
pub fn run_criterion(id: usize, seed: u64) -> Criterion {
    let r = match id {
        1 => criterion_1(seed),
        2 => criterion_2(),
        3 => criterion_3(),
        4 => criterion_4(),
        5 => criterion_5(),
        6 => criterion_6(seed),
        7 => criterion_7(),
        8 => criterion_8(),
        9 => criterion_9(seed),
        10 => criterion_10(),
        _ => panic!("no criterion {id}"),
    };
    let mut report = VerificationReport::new();
    guard(&mut report, "error", r);
    Criterion {
        id,
        title: TITLES[id - 1],
        report,
    }
}

pub fn run_all(seed: u64) -> Vec<Criterion> {
    (1..=10).map(|k| run_criterion(k, seed)).collect()
}
