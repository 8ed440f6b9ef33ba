//! Affine invariants of an immersion in asymptotic coordinates, all by
//! finite differences of `X` (exact partials are deliberately ignored).

use crate::error::{Error, Result};
use crate::grid::{convergence_ratio, d_u, d_uu, d_uv, d_v, d_vv, max_interior, Grid, ImmersionGrid};
use crate::loopalgebra::{det3, Vec3, C64};
use crate::report::Check;

/// Nodes with `|det(X_u, X_v, X)| < DEGENERATE_TOL |X_u| |X_v| |X|` are masked.
pub const DEGENERATE_TOL: f64 = 1e-10;

fn fd_partials(x: &ImmersionGrid) -> (Grid<Vec3>, Grid<Vec3>) {
    (d_u(&x.x), d_v(&x.x))
}

/// `h = det(X_u, X_v, X)` with central differences (real part).
pub fn conformal_factor(x: &ImmersionGrid) -> Grid<f64> {
    let (xu, xv) = fd_partials(x);
    Grid::from_fn(x.spec(), |i, j, _, _| det3(*xu.get(i, j), *xv.get(i, j), *x.x.get(i, j)).re)
}

/// `xi = X_uv / h` with `h` from [`conformal_factor`]; NaN where `h = 0`.
pub fn affine_normal(x: &ImmersionGrid) -> Result<Grid<Vec3>> {
    let h = conformal_factor(x);
    let xuv = d_uv(&x.x);
    let xi = xuv.zip_map(&h, |v, &h| if h != 0.0 && h.is_finite() { v.scale_re(1.0 / h) } else { Vec3::nan() });
    if h.data.iter().all(|h| *h == 0.0) {
        return Err(Error::ZeroH);
    }
    Ok(xi)
}

/// Nodewise `|X_uv - h X|` with the attached `h`; edges NaN.
pub fn shape_residual_grid(x: &ImmersionGrid) -> Grid<f64> {
    let xuv = d_uv(&x.x);
    Grid::from_fn(x.spec(), |i, j, _, _| {
        let r = *xuv.get(i, j) - x.x.get(i, j).scale(*x.h.get(i, j));
        if r.is_finite() {
            r.norm()
        } else {
            f64::NAN
        }
    })
}

/// `(max interior |X_uv - h X|, masked fraction)`.
pub fn shape_residual(x: &ImmersionGrid) -> (f64, f64) {
    max_interior(&shape_residual_grid(x))
}

/// Fine-grid residuals below this count as exact (no ratio is measurable).
pub const ROUNDOFF_FLOOR: f64 = 1e-9;

/// Convergence-ratio check of a nodewise residual under step halving; a
/// residual already on the round-off floor passes as such.
pub fn ratio_check(name: &str, coarse: &Grid<f64>, fine: &Grid<f64>) -> Check {
    let (fmax, masked) = max_interior(fine);
    if fmax < ROUNDOFF_FLOOR {
        return Check::new(name, fmax, ROUNDOFF_FLOOR, masked);
    }
    Check::ratio(name, convergence_ratio(coarse, fine, 1), masked)
}

/// Coefficients of `y` in the basis `(X_u, X_v, X)`, or `None` when the
/// basis is degenerate.
fn decompose(xu: Vec3, xv: Vec3, x: Vec3, y: Vec3) -> Option<[C64; 3]> {
    let d = det3(xu, xv, x);
    let scale = xu.norm() * xv.norm() * x.norm();
    if !(d.norm() >= DEGENERATE_TOL * scale) || !y.is_finite() {
        return None;
    }
    Some([det3(y, xv, x) / d, det3(xu, y, x) / d, det3(xu, xv, y) / d])
}

#[derive(Clone, Debug)]
pub struct FubiniPick {
    pub a_j: Grid<f64>,
    pub b_j: Grid<f64>,
    /// `|X_uu - (h_u/h) X_u - (aJ/h) X_v|` plus the `X_vv` analogue.
    pub residual: Grid<f64>,
    pub masked_fraction: f64,
}

/// `aJ`, `bJ` from `X_uu = (h_u/h) X_u + (aJ/h) X_v` and
/// `X_vv = (bJ/h) X_u + (h_v/h) X_v`.
pub fn fubini_pick(x: &ImmersionGrid) -> Result<FubiniPick> {
    let sp = x.spec();
    let (xu, xv) = fd_partials(x);
    let (xuu, xvv) = (d_uu(&x.x), d_vv(&x.x));
    let h = conformal_factor(x);
    let (hu, hv) = (d_u(&h), d_v(&h));
    let mut a_j = Grid::filled(sp, f64::NAN);
    let mut b_j = Grid::filled(sp, f64::NAN);
    let mut residual = Grid::filled(sp, f64::NAN);
    let (mut degenerate, mut zero_h, mut interior) = (0usize, 0usize, 0usize);
    for i in 1..sp.nu - 1 {
        for j in 1..sp.nv - 1 {
            interior += 1;
            let hh = *h.get(i, j);
            if hh == 0.0 || !hh.is_finite() {
                zero_h += 1;
                continue;
            }
            let (a, b, p) = (*xu.get(i, j), *xv.get(i, j), *x.x.get(i, j));
            let (Some(cu), Some(cv)) = (decompose(a, b, p, *xuu.get(i, j)), decompose(a, b, p, *xvv.get(i, j)))
            else {
                degenerate += 1;
                continue;
            };
            a_j.set(i, j, hh * cu[1].re);
            b_j.set(i, j, hh * cv[0].re);
            let ru = a.scale(cu[0] - hu.get(i, j) / hh) + p.scale(cu[2]);
            let rv = b.scale(cv[1] - hv.get(i, j) / hh) + p.scale(cv[2]);
            residual.set(i, j, ru.norm() + rv.norm());
        }
    }
    if interior > 0 && zero_h == interior {
        return Err(Error::ZeroH);
    }
    if interior > 0 && degenerate + zero_h == interior {
        return Err(Error::FrameDegenerate);
    }
    Ok(FubiniPick {
        a_j,
        b_j,
        residual,
        masked_fraction: (degenerate + zero_h) as f64 / interior.max(1) as f64,
    })
}

#[derive(Clone, Debug)]
pub struct Curvatures {
    pub mean: Grid<f64>,
    pub gauss: Grid<f64>,
    /// Component of `xi_u`, `xi_v` along `X` (zero for a true shape operator).
    pub residual: Grid<f64>,
}

/// `H = tr S / 2`, `K = det S` with `xi_u = s11 X_u + s21 X_v`,
/// `xi_v = s12 X_u + s22 X_v`.
pub fn curvatures(x: &ImmersionGrid) -> Result<Curvatures> {
    let sp = x.spec();
    let xi = affine_normal(x)?;
    let (xiu, xiv) = (d_u(&xi), d_v(&xi));
    let (xu, xv) = fd_partials(x);
    let mut mean = Grid::filled(sp, f64::NAN);
    let mut gauss = Grid::filled(sp, f64::NAN);
    let mut residual = Grid::filled(sp, f64::NAN);
    let mut degenerate = 0usize;
    let mut interior = 0usize;
    // xi is NaN on the edges, so its differences are usable two nodes in
    for i in 2..sp.nu.saturating_sub(2) {
        for j in 2..sp.nv.saturating_sub(2) {
            interior += 1;
            let (a, b, p) = (*xu.get(i, j), *xv.get(i, j), *x.x.get(i, j));
            let (Some(su), Some(sv)) = (decompose(a, b, p, *xiu.get(i, j)), decompose(a, b, p, *xiv.get(i, j)))
            else {
                degenerate += 1;
                continue;
            };
            let tr = su[0] + sv[1];
            let det = su[0] * sv[1] - sv[0] * su[1];
            mean.set(i, j, tr.re / 2.0);
            gauss.set(i, j, det.re);
            residual.set(i, j, su[2].norm() + sv[2].norm());
        }
    }
    if interior > 0 && degenerate == interior {
        return Err(Error::FrameDegenerate);
    }
    Ok(Curvatures { mean, gauss, residual })
}

/// Everything above in one record.
#[derive(Clone, Debug)]
pub struct BlaschkeData {
    pub h: Grid<f64>,
    pub a_j: Grid<f64>,
    pub b_j: Grid<f64>,
    pub mean: Grid<f64>,
    pub gauss: Grid<f64>,
    pub xi: Grid<Vec3>,
}

pub fn blaschke(x: &ImmersionGrid) -> Result<BlaschkeData> {
    let fp = fubini_pick(x)?;
    let c = curvatures(x)?;
    Ok(BlaschkeData {
        h: conformal_factor(x),
        a_j: fp.a_j,
        b_j: fp.b_j,
        mean: c.mean,
        gauss: c.gauss,
        xi: affine_normal(x)?,
    })
}
