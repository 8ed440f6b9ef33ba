//! Solution fields, the flat connection family and the extended frame.
//!
//! Conventions (a = b = 1): with `h = e^w`,
//!
//! ```text
//! F^{-1} F_u = U = [[w_u, 0, l], [l, -w_u, 0], [0, l, 0]]
//! F^{-1} F_v = V = (1/l) [[0, e^{-2w}, 0], [0, 0, e^w], [e^w, 0, 0]]
//! ```
//!
//! and the frame columns are `(X_u / l, l X_v / h, X)`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Node, Result};
use crate::grid::{d_u, d_uu, d_uv, d_v, d_vv, max_interior, Grid, GridSpec, ImmersionGrid};
use crate::loopalgebra::{re, Matrix3, ProjLine, C64};

/// A closed-form solution: returns `[h, h_u, h_v]`.
pub trait AnalyticSeed: Send + Sync {
    fn jet(&self, u: f64, v: f64) -> [f64; 3];
    fn name(&self) -> String;
}

/// Wraps a closure as an analytic seed (useful for test fields).
pub struct FnSeed<F> {
    pub f: F,
    pub label: String,
}

impl<F: Fn(f64, f64) -> [f64; 3] + Send + Sync> AnalyticSeed for FnSeed<F> {
    fn jet(&self, u: f64, v: f64) -> [f64; 3] {
        (self.f)(u, v)
    }
    fn name(&self) -> String {
        self.label.clone()
    }
}

#[derive(Clone)]
pub enum FieldSource {
    Analytic(Arc<dyn AnalyticSeed>),
    /// Values only; first derivatives by differences.
    Grid { h_u: Grid<f64>, h_v: Grid<f64> },
}

/// A Tzitzéica solution sampled on a grid.
#[derive(Clone)]
pub struct SolutionField {
    pub h: Grid<f64>,
    pub source: FieldSource,
}

impl fmt::Debug for SolutionField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let src = match &self.source {
            FieldSource::Analytic(s) => s.name(),
            FieldSource::Grid { .. } => "grid".to_string(),
        };
        write!(f, "SolutionField({src}, {}x{})", self.h.spec.nu, self.h.spec.nv)
    }
}

/// 4-point Lagrange weights on an equispaced stencil starting at node `k0`.
fn lagrange4(t: f64, k0: usize) -> [f64; 4] {
    let x = t - k0 as f64;
    let nodes = [0.0, 1.0, 2.0, 3.0];
    let mut w = [0.0; 4];
    for a in 0..4 {
        let mut p = 1.0;
        for b in 0..4 {
            if a != b {
                p *= (x - nodes[b]) / (nodes[a] - nodes[b]);
            }
        }
        w[a] = p;
    }
    w
}

fn stencil(t: f64, n: usize) -> usize {
    let k = t.floor() as isize - 1;
    k.clamp(0, n as isize - 4) as usize
}

/// Tensor cubic interpolation of a grid at an arbitrary point. Exact at nodes.
pub fn interpolate(g: &Grid<f64>, u: f64, v: f64) -> f64 {
    let sp = g.spec;
    let tu = (u - sp.domain.u0) / sp.du();
    let tv = (v - sp.domain.v0) / sp.dv();
    // snap to nodes so lines through nodes reproduce values exactly
    let snap = |t: f64| if (t - t.round()).abs() < 1e-9 { t.round() } else { t };
    let (tu, tv) = (snap(tu), snap(tv));
    if sp.nu < 4 || sp.nv < 4 {
        let (i, j) = sp.nearest(u, v);
        return *g.get(i, j);
    }
    let (i0, j0) = (stencil(tu, sp.nu), stencil(tv, sp.nv));
    let (wu, wv) = (lagrange4(tu, i0), lagrange4(tv, j0));
    let mut s = 0.0;
    for a in 0..4 {
        if wu[a] == 0.0 {
            continue;
        }
        for b in 0..4 {
            if wv[b] != 0.0 {
                s += wu[a] * wv[b] * g.get(i0 + a, j0 + b);
            }
        }
    }
    s
}

impl SolutionField {
    pub fn analytic(spec: GridSpec, seed: Arc<dyn AnalyticSeed>) -> Self {
        let h = Grid::from_fn(spec, |_, _, u, v| seed.jet(u, v)[0]);
        SolutionField {
            h,
            source: FieldSource::Analytic(seed),
        }
    }

    pub fn from_grid(h: Grid<f64>) -> Self {
        let h_u = d_u(&h);
        let h_v = d_v(&h);
        SolutionField {
            h,
            source: FieldSource::Grid { h_u, h_v },
        }
    }

    pub fn spec(&self) -> GridSpec {
        self.h.spec
    }

    /// `[h, h_u, h_v]` at an arbitrary point.
    pub fn jet(&self, u: f64, v: f64) -> [f64; 3] {
        match &self.source {
            FieldSource::Analytic(s) => s.jet(u, v),
            FieldSource::Grid { h_u, h_v } => [
                interpolate(&self.h, u, v),
                interpolate(h_u, u, v),
                interpolate(h_v, u, v),
            ],
        }
    }

    pub fn jet_at(&self, i: usize, j: usize) -> [f64; 3] {
        match &self.source {
            FieldSource::Analytic(s) => s.jet(self.spec().u(i), self.spec().v(j)),
            FieldSource::Grid { h_u, h_v } => [*self.h.get(i, j), *h_u.get(i, j), *h_v.get(i, j)],
        }
    }

    /// Same field on another grid; only analytic fields can be resampled.
    pub fn resampled(&self, spec: GridSpec) -> Option<SolutionField> {
        match &self.source {
            FieldSource::Analytic(s) => Some(SolutionField::analytic(spec, s.clone())),
            FieldSource::Grid { .. } => None,
        }
    }

    /// First node with `h <= 0`, if any.
    pub fn first_nonpositive(&self) -> Option<(Node, f64)> {
        let sp = self.spec();
        (0..sp.len()).find_map(|k| {
            let h = self.h.data[k];
            if h > 0.0 {
                None
            } else {
                Some((sp.node(k), h))
            }
        })
    }
}

/// Connection matrices from `h`, `h_u`.
pub fn connection_from_jet(h: f64, h_u: f64, lambda: C64) -> (Matrix3, Matrix3) {
    let wu = re(h_u / h);
    let mut u = Matrix3::zeros();
    u[(0, 0)] = wu;
    u[(1, 1)] = -wu;
    u[(0, 2)] = lambda;
    u[(1, 0)] = lambda;
    u[(2, 1)] = lambda;
    let inv = lambda.inv();
    let mut v = Matrix3::zeros();
    v[(0, 1)] = inv * (1.0 / (h * h));
    v[(1, 2)] = inv * h;
    v[(2, 0)] = inv * h;
    (u, v)
}

pub fn connection_matrices(
    field: &SolutionField,
    u: f64,
    v: f64,
    lambda: C64,
) -> Result<(Matrix3, Matrix3)> {
    if lambda.norm() == 0.0 {
        return Err(Error::ZeroLambda);
    }
    let [h, h_u, _] = field.jet(u, v);
    if !(h > 0.0) {
        return Err(Error::NonPositiveH {
            node: field.spec().nearest(u, v),
            h,
        });
    }
    Ok(connection_from_jet(h, h_u, lambda))
}

/// The extended frame on a grid at one spectral value.
#[derive(Clone, Debug)]
pub struct FrameGrid {
    pub lambda: C64,
    pub f: Grid<Matrix3>,
    pub h: Grid<f64>,
    pub basepoint: Node,
    /// Max difference between the row-first and column-first integrations.
    pub path_residual: f64,
}

impl FrameGrid {
    pub fn spec(&self) -> GridSpec {
        self.f.spec
    }

    pub fn det_residual(&self) -> f64 {
        self.f
            .data
            .iter()
            .map(|m| (m.det() - re(1.0)).norm())
            .fold(0.0, f64::max)
    }
}

fn rk4_step(f: Matrix3, t: f64, step: f64, a: &dyn Fn(f64) -> Matrix3) -> Matrix3 {
    let half = re(step / 2.0);
    let a0 = a(t);
    let am = a(t + step / 2.0);
    let a1 = a(t + step);
    let k1 = f * a0;
    let k2 = (f + k1.scale(half)) * am;
    let k3 = (f + k2.scale(half)) * am;
    let k4 = (f + k3.scale(re(step))) * a1;
    f + (k1 + k2.scale(re(2.0)) + k3.scale(re(2.0)) + k4).scale(re(step / 6.0))
}

/// Integrates `F' = F A(t)` along grid coordinates `ts`, starting from `f0`
/// at index `start`, in both directions. `substeps` RK4 steps per interval.
fn integrate_line(
    ts: &[f64],
    start: usize,
    f0: Matrix3,
    substeps: usize,
    a: &dyn Fn(f64) -> Matrix3,
) -> Vec<Matrix3> {
    let mut out = vec![f0; ts.len()];
    let go = |from: usize, to: usize, f: Matrix3| -> Matrix3 {
        let step = (ts[to] - ts[from]) / substeps as f64;
        let mut g = f;
        for s in 0..substeps {
            g = rk4_step(g, ts[from] + s as f64 * step, step, a);
        }
        g
    };
    for k in start + 1..ts.len() {
        out[k] = go(k - 1, k, out[k - 1]);
    }
    for k in (0..start).rev() {
        out[k] = go(k + 1, k, out[k + 1]);
    }
    out
}

/// Frame with `F = I` at the node nearest the origin, one RK4 step per
/// grid interval.
pub fn integrate_frame(field: &SolutionField, lambda: C64) -> Result<FrameGrid> {
    integrate_frame_with(field, lambda, 1)
}

/// As [`integrate_frame`] with `substeps` RK4 steps per grid interval.
pub fn integrate_frame_with(
    field: &SolutionField,
    lambda: C64,
    substeps: usize,
) -> Result<FrameGrid> {
    if lambda.norm() == 0.0 {
        return Err(Error::ZeroLambda);
    }
    if let Some((node, h)) = field.first_nonpositive() {
        return Err(Error::NonPositiveH { node, h });
    }
    let substeps = substeps.max(1);
    let sp = field.spec();
    let us: Vec<f64> = (0..sp.nu).map(|i| sp.u(i)).collect();
    let vs: Vec<f64> = (0..sp.nv).map(|j| sp.v(j)).collect();
    let (ib, jb) = sp.nearest(0.0, 0.0);
    let a_u = |v: f64| {
        move |u: f64| {
            let [h, h_u, _] = field.jet(u, v);
            connection_from_jet(h, h_u, lambda).0
        }
    };
    let a_v = |u: f64| {
        move |v: f64| {
            let [h, h_u, _] = field.jet(u, v);
            connection_from_jet(h, h_u, lambda).1
        }
    };

    // rows first: along v = v_b in u, then each u-column in v
    let row = integrate_line(&us, ib, Matrix3::identity(), substeps, &a_u(vs[jb]));
    let cols: Vec<Vec<Matrix3>> = (0..sp.nu)
        .into_par_iter()
        .map(|i| integrate_line(&vs, jb, row[i], substeps, &a_v(us[i])))
        .collect();
    let f = Grid::from_fn(sp, |i, j, _, _| cols[i][j]);

    // columns first, for the path-independence residual
    let col = integrate_line(&vs, jb, Matrix3::identity(), substeps, &a_v(us[ib]));
    let rows: Vec<Vec<Matrix3>> = (0..sp.nv)
        .into_par_iter()
        .map(|j| integrate_line(&us, ib, col[j], substeps, &a_u(vs[j])))
        .collect();
    let path_residual = (0..sp.len())
        .map(|k| {
            let (i, j) = sp.node(k);
            (f.data[k] - rows[j][i]).max_abs()
        })
        .fold(0.0, f64::max);

    Ok(FrameGrid {
        lambda,
        f,
        h: field.h.clone(),
        basepoint: (ib, jb),
        path_residual,
    })
}

/// Third column of the frame; the attached conformal factor is
/// `det(X_u, X_v, X)` by differences. Exact partials come from the frame
/// columns: `X_u = l f_1`, `X_v = h f_2 / l`.
pub fn surface_from_frame(fg: &FrameGrid) -> ImmersionGrid {
    let x = fg.f.map(|m| m.column(2));
    let xu_fd = d_u(&x);
    let xv_fd = d_v(&x);
    let h = crate::grid::det_gauge(&x, &xu_fd, &xv_fd);
    let l = fg.lambda;
    let xu = fg.f.map(|m| m.column(0).scale(l));
    let xv = fg.f.zip_map(&fg.h, |m, &h| m.column(1).scale(re(h) / l));
    ImmersionGrid::new(x, h, l).with_partials(xu, xv)
}

/// A scalar solution of the linear system with parameter `gamma`.
#[derive(Clone, Debug)]
pub struct ScalarSolution {
    pub phi: Grid<C64>,
    pub phi_u: Grid<C64>,
    pub phi_v: Grid<C64>,
    pub gamma: C64,
}

impl ScalarSolution {
    /// `phi_u / phi` and `phi_v / phi`, NaN where `|phi| < rel_tol max|phi|`.
    pub fn log_derivatives(&self, rel_tol: f64) -> (Grid<C64>, Grid<C64>) {
        let m = self
            .phi
            .data
            .iter()
            .filter(|z| z.re.is_finite())
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        let nan = C64::new(f64::NAN, f64::NAN);
        let mask = |z: &C64| !(z.norm() >= rel_tol * m) || m == 0.0;
        let p = self
            .phi
            .zip_map(&self.phi_u, |f, fu| if mask(f) { nan } else { fu / f });
        let q = self
            .phi
            .zip_map(&self.phi_v, |f, fv| if mask(f) { nan } else { fv / f });
        (p, q)
    }
}

/// `phi = (l F)_3`, `phi_u = alpha (l F)_1`, `phi_v = (h / alpha) (l F)_2`.
pub fn scalar_solution(l: &ProjLine, fg: &FrameGrid) -> ScalarSolution {
    let al = fg.lambda;
    let rows = fg.f.map(|m| m.left_mul_vec(l.rep()));
    ScalarSolution {
        phi: rows.map(|r| r[2]),
        phi_u: rows.map(|r| r[0] * al),
        phi_v: rows.zip_map(&fg.h, |r, &h| r[1] * h / al),
        gamma: al.powi(3),
    }
}

/// Residual grids of the three equations of the linear system, second
/// derivatives by differences of `phi`, first derivatives as stored.
pub fn eqmap_residuals(sol: &ScalarSolution, field: &SolutionField) -> [Grid<f64>; 3] {
    let sp = sol.phi.spec;
    let puu = d_uu(&sol.phi);
    let puv = d_uv(&sol.phi);
    let pvv = d_vv(&sol.phi);
    let g = sol.gamma;
    let mut out = [
        Grid::filled(sp, f64::NAN),
        Grid::filled(sp, f64::NAN),
        Grid::filled(sp, f64::NAN),
    ];
    for i in 0..sp.nu {
        for j in 0..sp.nv {
            let [h, hu, hv] = field.jet_at(i, j);
            let (f, fu, fv) = (*sol.phi.get(i, j), *sol.phi_u.get(i, j), *sol.phi_v.get(i, j));
            out[0].set(i, j, (puu.get(i, j) - fu * (hu / h) - fv * g / h).norm());
            out[1].set(i, j, (puv.get(i, j) - f * h).norm());
            out[2].set(i, j, (pvv.get(i, j) - fu / (g * h) - fv * (hv / h)).norm());
        }
    }
    out
}

/// `h_uv h - h_u h_v - h^3 + 1` by central differences; edges NaN.
pub fn tzitzeica_residual_grid(h: &Grid<f64>) -> Grid<f64> {
    let hu = d_u(h);
    let hv = d_v(h);
    let huv = d_uv(h);
    Grid::from_fn(h.spec, |i, j, _, _| {
        let (x, xu, xv, xuv) = (*h.get(i, j), *hu.get(i, j), *hv.get(i, j), *huv.get(i, j));
        xuv * x - xu * xv - x * x * x + 1.0
    })
}

pub fn tzitzeica_residual(field: &SolutionField) -> Grid<f64> {
    tzitzeica_residual_grid(&field.h)
}

/// Nodewise `|| U_v - V_u - [U, V] ||` by central differences; edges NaN.
pub fn zero_curvature_residual_grid(field: &SolutionField, lambda: C64) -> Result<Grid<f64>> {
    if lambda.norm() == 0.0 {
        return Err(Error::ZeroLambda);
    }
    if let Some((node, h)) = field.first_nonpositive() {
        return Err(Error::NonPositiveH { node, h });
    }
    let sp = field.spec();
    let uv = Grid::from_fn(sp, |i, j, _, _| {
        let [h, hu, _] = field.jet_at(i, j);
        connection_from_jet(h, hu, lambda)
    });
    let um = uv.map(|p| p.0);
    let vm = uv.map(|p| p.1);
    let u_v = d_v(&um);
    let v_u = d_u(&vm);
    Ok(Grid::from_fn(sp, |i, j, _, _| {
        if !sp.is_interior(i, j) {
            return f64::NAN;
        }
        let (a, b) = (*um.get(i, j), *vm.get(i, j));
        (*u_v.get(i, j) - *v_u.get(i, j) - a.commutator(&b)).max_abs()
    }))
}

pub fn zero_curvature_residual(field: &SolutionField, lambda: C64) -> Result<f64> {
    Ok(max_interior(&zero_curvature_residual_grid(field, lambda)?).0)
}

/// Frame-column identities: `X_u = l f_1` and `X_v = h f_2 / l`, with
/// `X_u`, `X_v` from differences of the third column. Max nodewise gap.
pub fn column_identity_residual(fg: &FrameGrid) -> Grid<f64> {
    let x = fg.f.map(|m| m.column(2));
    let xu = d_u(&x);
    let xv = d_v(&x);
    let l = fg.lambda;
    Grid::from_fn(fg.spec(), |i, j, _, _| {
        let m = fg.f.get(i, j);
        let h = *fg.h.get(i, j);
        let a = (*xu.get(i, j) - m.column(0).scale(l)).max_abs();
        let b = (*xv.get(i, j) - m.column(1).scale(re(h) / l)).max_abs();
        a.max(b)
    })
}
