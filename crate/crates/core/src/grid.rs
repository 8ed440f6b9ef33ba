//! Rectangular grids over asymptotic coordinates and finite differences.
//!
//! Node `(i, j)` sits at `(u0 + i du, v0 + j dv)` and is stored at
//! `i * nv + j`. Masked or undefined values are NaN and propagate through
//! every difference operator, so residual grids come out masked wherever
//! their stencil touches a masked node.

use std::ops::{Add, Sub};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Node, Result};
use crate::loopalgebra::{det3, Matrix3, Vec3, C64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub u0: f64,
    pub u1: f64,
    pub v0: f64,
    pub v1: f64,
}

impl Domain {
    pub fn new(u0: f64, u1: f64, v0: f64, v1: f64) -> Result<Self> {
        let ok = [u0, u1, v0, v1].iter().all(|x| x.is_finite()) && u1 > u0 && v1 > v0;
        if !ok {
            return Err(Error::BadArgument(format!(
                "degenerate domain [{u0}, {u1}] x [{v0}, {v1}]"
            )));
        }
        Ok(Domain { u0, u1, v0, v1 })
    }

    pub fn square(a: f64, b: f64) -> Self {
        Domain::new(a, b, a, b).expect("valid square")
    }

    /// Parses `u0:u1,v0:v1`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::BadArgument(format!("domain `{s}` is not of the form u0:u1,v0:v1"));
        let (us, vs) = s.split_once(',').ok_or_else(bad)?;
        let pair = |p: &str| -> Result<(f64, f64)> {
            let (a, b) = p.split_once(':').ok_or_else(bad)?;
            Ok((
                a.trim().parse().map_err(|_| bad())?,
                b.trim().parse().map_err(|_| bad())?,
            ))
        };
        let (u0, u1) = pair(us)?;
        let (v0, v1) = pair(vs)?;
        Domain::new(u0, u1, v0, v1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub domain: Domain,
    pub nu: usize,
    pub nv: usize,
}

impl GridSpec {
    pub fn new(domain: Domain, nu: usize, nv: usize) -> Result<Self> {
        if nu < 2 || nv < 2 {
            return Err(Error::BadArgument(format!("grid {nu}x{nv} is too small")));
        }
        Ok(GridSpec { domain, nu, nv })
    }

    /// Parses `NxM`.
    pub fn parse_counts(s: &str) -> Result<(usize, usize)> {
        let bad = || Error::BadArgument(format!("grid `{s}` is not of the form NxM"));
        let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        Ok((
            a.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
        ))
    }

    pub fn du(&self) -> f64 {
        (self.domain.u1 - self.domain.u0) / (self.nu - 1) as f64
    }

    pub fn dv(&self) -> f64 {
        (self.domain.v1 - self.domain.v0) / (self.nv - 1) as f64
    }

    pub fn u(&self, i: usize) -> f64 {
        if i + 1 == self.nu {
            self.domain.u1
        } else {
            self.domain.u0 + i as f64 * self.du()
        }
    }

    pub fn v(&self, j: usize) -> f64 {
        if j + 1 == self.nv {
            self.domain.v1
        } else {
            self.domain.v0 + j as f64 * self.dv()
        }
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.nv + j
    }

    pub fn node(&self, k: usize) -> Node {
        (k / self.nv, k % self.nv)
    }

    pub fn len(&self) -> usize {
        self.nu * self.nv
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        i > 0 && j > 0 && i + 1 < self.nu && j + 1 < self.nv
    }

    /// Node closest to `(u, v)`, clamped to the grid.
    pub fn nearest(&self, u: f64, v: f64) -> Node {
        let fi = ((u - self.domain.u0) / self.du()).round();
        let fj = ((v - self.domain.v0) / self.dv()).round();
        let i = fi.clamp(0.0, (self.nu - 1) as f64) as usize;
        let j = fj.clamp(0.0, (self.nv - 1) as f64) as usize;
        (i, j)
    }

    /// Same domain with every step halved.
    pub fn refined(&self) -> GridSpec {
        GridSpec {
            domain: self.domain,
            nu: 2 * self.nu - 1,
            nv: 2 * self.nv - 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    pub spec: GridSpec,
    pub data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(spec: GridSpec, value: T) -> Self {
        Grid {
            spec,
            data: vec![value; spec.len()],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_fn(spec: GridSpec, f: impl Fn(usize, usize, f64, f64) -> T) -> Self {
        let mut data = Vec::with_capacity(spec.len());
        for i in 0..spec.nu {
            for j in 0..spec.nv {
                data.push(f(i, j, spec.u(i), spec.v(j)));
            }
        }
        Grid { spec, data }
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[self.spec.index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: T) {
        let k = self.spec.index(i, j);
        self.data[k] = value;
    }

    pub fn map<S>(&self, f: impl Fn(&T) -> S) -> Grid<S> {
        Grid {
            spec: self.spec,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn zip_map<S, R>(&self, other: &Grid<S>, f: impl Fn(&T, &S) -> R) -> Grid<R> {
        assert_eq!(self.spec, other.spec, "grid shapes differ");
        Grid {
            spec: self.spec,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(a, b)).collect(),
        }
    }
}

impl<T: Send> Grid<T> {
    /// Parallel construction; the result does not depend on scheduling.
    pub fn par_from_fn(spec: GridSpec, f: impl Fn(usize, usize, f64, f64) -> T + Sync) -> Self {
        let data = (0..spec.len())
            .into_par_iter()
            .map(|k| {
                let (i, j) = spec.node(k);
                f(i, j, spec.u(i), spec.v(j))
            })
            .collect();
        Grid { spec, data }
    }
}

impl<T: Sync> Grid<T> {
    pub fn par_map<S: Send>(&self, f: impl Fn(&T) -> S + Sync) -> Grid<S> {
        Grid {
            spec: self.spec,
            data: self.data.par_iter().map(|x| f(x)).collect(),
        }
    }
}

/// Values the difference operators act on.
pub trait FdValue: Copy + Add<Output = Self> + Sub<Output = Self> {
    fn scaled(self, s: f64) -> Self;
    fn nan() -> Self;
    fn is_valid(&self) -> bool;
}

impl FdValue for f64 {
    fn scaled(self, s: f64) -> Self {
        self * s
    }
    fn nan() -> Self {
        f64::NAN
    }
    fn is_valid(&self) -> bool {
        self.is_finite()
    }
}

impl FdValue for C64 {
    fn scaled(self, s: f64) -> Self {
        self * s
    }
    fn nan() -> Self {
        C64::new(f64::NAN, f64::NAN)
    }
    fn is_valid(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl FdValue for Vec3 {
    fn scaled(self, s: f64) -> Self {
        self.scale_re(s)
    }
    fn nan() -> Self {
        Vec3::nan()
    }
    fn is_valid(&self) -> bool {
        self.is_finite()
    }
}

impl FdValue for Matrix3 {
    fn scaled(self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }
    fn nan() -> Self {
        Matrix3::nan()
    }
    fn is_valid(&self) -> bool {
        self.is_finite()
    }
}

fn first_diff<T: FdValue>(f: impl Fn(usize) -> T, k: usize, n: usize, step: f64) -> T {
    if n < 3 {
        return T::nan();
    }
    let s = 1.0 / (2.0 * step);
    if k == 0 {
        (f(1).scaled(4.0) - f(0).scaled(3.0) - f(2)).scaled(s)
    } else if k + 1 == n {
        (f(n - 1).scaled(3.0) - f(n - 2).scaled(4.0) + f(n - 3)).scaled(s)
    } else {
        (f(k + 1) - f(k - 1)).scaled(s)
    }
}

/// `d/du`: central in the interior, second-order one-sided on the edges.
pub fn d_u<T: FdValue>(g: &Grid<T>) -> Grid<T> {
    let sp = g.spec;
    Grid::from_fn(sp, |i, j, _, _| {
        first_diff(|k| *g.get(k, j), i, sp.nu, sp.du())
    })
}

pub fn d_v<T: FdValue>(g: &Grid<T>) -> Grid<T> {
    let sp = g.spec;
    Grid::from_fn(sp, |i, j, _, _| {
        first_diff(|k| *g.get(i, k), j, sp.nv, sp.dv())
    })
}

/// Interior-only second derivatives; edges are NaN.
pub fn d_uu<T: FdValue>(g: &Grid<T>) -> Grid<T> {
    let sp = g.spec;
    let s = 1.0 / (sp.du() * sp.du());
    Grid::from_fn(sp, |i, j, _, _| {
        if i == 0 || i + 1 == sp.nu {
            T::nan()
        } else {
            (*g.get(i + 1, j) + *g.get(i - 1, j) - g.get(i, j).scaled(2.0)).scaled(s)
        }
    })
}

pub fn d_vv<T: FdValue>(g: &Grid<T>) -> Grid<T> {
    let sp = g.spec;
    let s = 1.0 / (sp.dv() * sp.dv());
    Grid::from_fn(sp, |i, j, _, _| {
        if j == 0 || j + 1 == sp.nv {
            T::nan()
        } else {
            (*g.get(i, j + 1) + *g.get(i, j - 1) - g.get(i, j).scaled(2.0)).scaled(s)
        }
    })
}

pub fn d_uv<T: FdValue>(g: &Grid<T>) -> Grid<T> {
    let sp = g.spec;
    let s = 1.0 / (4.0 * sp.du() * sp.dv());
    Grid::from_fn(sp, |i, j, _, _| {
        if !sp.is_interior(i, j) {
            T::nan()
        } else {
            (*g.get(i + 1, j + 1) - *g.get(i + 1, j - 1) - *g.get(i - 1, j + 1)
                + *g.get(i - 1, j - 1))
            .scaled(s)
        }
    })
}

/// Largest finite value and the fraction of non-finite entries.
pub fn max_finite(g: &Grid<f64>) -> (f64, f64) {
    let mut m = 0.0f64;
    let mut bad = 0usize;
    for x in &g.data {
        if x.is_finite() {
            m = m.max(x.abs());
        } else {
            bad += 1;
        }
    }
    (m, bad as f64 / g.data.len().max(1) as f64)
}

/// Largest finite value over interior nodes and the masked fraction among
/// interior nodes.
pub fn max_interior(g: &Grid<f64>) -> (f64, f64) {
    let sp = g.spec;
    let mut m = 0.0f64;
    let (mut bad, mut total) = (0usize, 0usize);
    for i in 1..sp.nu.saturating_sub(1) {
        for j in 1..sp.nv.saturating_sub(1) {
            total += 1;
            let x = *g.get(i, j);
            if x.is_finite() {
                m = m.max(x.abs());
            } else {
                bad += 1;
            }
        }
    }
    (m, bad as f64 / total.max(1) as f64)
}

/// Ratio of the coarse residual to the fine residual, both taken at the
/// coarse nodes lying at least `margin` coarse steps inside the boundary
/// and finite on both grids. The fine grid must be `coarse.spec.refined()`.
pub fn convergence_ratio(coarse: &Grid<f64>, fine: &Grid<f64>, margin: usize) -> f64 {
    assert_eq!(fine.spec, coarse.spec.refined(), "fine grid is not the refinement");
    let sp = coarse.spec;
    let (mut mc, mut mf) = (0.0f64, 0.0f64);
    for i in margin..sp.nu.saturating_sub(margin) {
        for j in margin..sp.nv.saturating_sub(margin) {
            let c = *coarse.get(i, j);
            let f = *fine.get(2 * i, 2 * j);
            if c.is_finite() && f.is_finite() {
                mc = mc.max(c.abs());
                mf = mf.max(f.abs());
            }
        }
    }
    mc / mf
}

/// A surface sampled on a grid together with its attached conformal factor.
///
/// `xu`/`xv` carry exact partials when the producer knows them (frame
/// columns, closed forms); consumers fall back to differences otherwise.
#[derive(Clone, Debug)]
pub struct ImmersionGrid {
    pub x: Grid<Vec3>,
    pub h: Grid<C64>,
    pub lambda: C64,
    pub xu: Option<Grid<Vec3>>,
    pub xv: Option<Grid<Vec3>>,
}

impl ImmersionGrid {
    pub fn new(x: Grid<Vec3>, h: Grid<C64>, lambda: C64) -> Self {
        ImmersionGrid {
            x,
            h,
            lambda,
            xu: None,
            xv: None,
        }
    }

    pub fn with_partials(mut self, xu: Grid<Vec3>, xv: Grid<Vec3>) -> Self {
        self.xu = Some(xu);
        self.xv = Some(xv);
        self
    }

    pub fn spec(&self) -> GridSpec {
        self.x.spec
    }

    pub fn partials(&self) -> (Grid<Vec3>, Grid<Vec3>) {
        match (&self.xu, &self.xv) {
            (Some(a), Some(b)) => (a.clone(), b.clone()),
            _ => (d_u(&self.x), d_v(&self.x)),
        }
    }

    /// Largest imaginary part over valid nodes of `X` and `h`.
    pub fn max_imag(&self) -> f64 {
        let x = self
            .x
            .data
            .iter()
            .filter(|p| p.is_finite())
            .map(|p| p.max_imag())
            .fold(0.0, f64::max);
        let h = self
            .h
            .data
            .iter()
            .filter(|z| z.is_valid())
            .map(|z| z.im.abs())
            .fold(0.0, f64::max);
        x.max(h)
    }

    /// Real coordinates, refusing imaginary parts above `tol`.
    pub fn real_points(&self, tol: f64) -> Result<Grid<[f64; 3]>> {
        let mi = self.max_imag();
        if mi > tol {
            return Err(Error::NonRealOutput { max_imag: mi });
        }
        Ok(self.x.map(|p| p.re_parts()))
    }

    pub fn real_h(&self, tol: f64) -> Result<Grid<f64>> {
        let mi = self.max_imag();
        if mi > tol {
            return Err(Error::NonRealOutput { max_imag: mi });
        }
        Ok(self.h.map(|z| z.re))
    }

    pub fn masked_fraction(&self) -> f64 {
        let bad = self.x.data.iter().filter(|p| !p.is_finite()).count();
        bad as f64 / self.x.data.len().max(1) as f64
    }

    /// Multiplies the surface (and any partials) by a constant.
    pub fn scaled(&self, s: C64) -> ImmersionGrid {
        ImmersionGrid {
            x: self.x.map(|p| p.scale(s)),
            h: self.h.clone(),
            lambda: self.lambda,
            xu: self.xu.as_ref().map(|g| g.map(|p| p.scale(s))),
            xv: self.xv.as_ref().map(|g| g.map(|p| p.scale(s))),
        }
    }
}

/// `det(X_u, X_v, X)` nodewise from the given partials.
pub fn det_gauge(x: &Grid<Vec3>, xu: &Grid<Vec3>, xv: &Grid<Vec3>) -> Grid<C64> {
    Grid::from_fn(x.spec, |i, j, _, _| det3(*xu.get(i, j), *xv.get(i, j), *x.get(i, j)))
}

/// Max nodewise distance between two vector grids over nodes valid in both,
/// with the fraction of nodes excluded.
pub fn max_gap(a: &Grid<Vec3>, b: &Grid<Vec3>) -> (f64, f64) {
    let g = a.zip_map(b, |p, q| {
        if p.is_finite() && q.is_finite() {
            (*p - *q).max_abs()
        } else {
            f64::NAN
        }
    });
    max_finite(&g)
}

pub fn max_gap_c(a: &Grid<C64>, b: &Grid<C64>) -> (f64, f64) {
    let g = a.zip_map(b, |p, q| {
        if p.is_valid() && q.is_valid() {
            (*p - *q).norm()
        } else {
            f64::NAN
        }
    });
    max_finite(&g)
}

/// As [`max_gap_c`] with each difference divided by `max(1, |a|)`.
pub fn max_rel_gap_c(a: &Grid<C64>, b: &Grid<C64>) -> (f64, f64) {
    let g = a.zip_map(b, |p, q| {
        if p.is_valid() && q.is_valid() {
            (*p - *q).norm() / p.norm().max(1.0)
        } else {
            f64::NAN
        }
    });
    max_finite(&g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize) -> GridSpec {
        GridSpec::new(Domain::square(-1.0, 1.0), n, n).unwrap()
    }

    #[test]
    fn parse_domain_and_counts() {
        let d = Domain::parse("-1:1,0:2.5").unwrap();
        assert_eq!(d, Domain::new(-1.0, 1.0, 0.0, 2.5).unwrap());
        assert!(Domain::parse("1:1,0:1").is_err());
        assert!(Domain::parse("nonsense").is_err());
        assert_eq!(GridSpec::parse_counts("41x33").unwrap(), (41, 33));
        assert!(GridSpec::parse_counts("41").is_err());
    }

    #[test]
    fn coordinates_hit_the_corners() {
        let s = spec(41);
        assert_eq!(s.u(0), -1.0);
        assert_eq!(s.u(40), 1.0);
        assert!((s.u(20)).abs() < 1e-15);
        assert_eq!(s.nearest(0.0, 0.0), (20, 20));
        assert_eq!(s.nearest(5.0, -5.0), (40, 0));
        assert_eq!(s.refined().nu, 81);
    }

    #[test]
    fn differences_are_exact_on_quadratics() {
        let s = spec(11);
        let g = Grid::from_fn(s, |_, _, u, v| 1.0 + 2.0 * u - v + u * u + 3.0 * u * v - 0.5 * v * v);
        let gu = d_u(&g);
        let gv = d_v(&g);
        let guv = d_uv(&g);
        let guu = d_uu(&g);
        let gvv = d_vv(&g);
        for i in 0..11 {
            for j in 0..11 {
                let (u, v) = (s.u(i), s.v(j));
                assert!((gu.get(i, j) - (2.0 + 2.0 * u + 3.0 * v)).abs() < 1e-12);
                assert!((gv.get(i, j) - (-1.0 + 3.0 * u - v)).abs() < 1e-12);
                if s.is_interior(i, j) {
                    assert!((guv.get(i, j) - 3.0).abs() < 1e-11);
                    assert!((guu.get(i, j) - 2.0).abs() < 1e-11);
                    assert!((gvv.get(i, j) + 1.0).abs() < 1e-11);
                } else {
                    assert!(guv.get(i, j).is_nan());
                }
            }
        }
    }

    #[test]
    fn second_order_convergence_of_central_differences() {
        let f = |u: f64, v: f64| (1.3 * u).sin() * (0.7 * v).exp();
        let err = |n: usize| {
            let s = spec(n);
            let g = Grid::from_fn(s, |_, _, u, v| f(u, v));
            let exact = Grid::from_fn(s, |_, _, u, v| 1.3 * 0.7 * (1.3 * u).cos() * (0.7 * v).exp());
            let e = d_uv(&g).zip_map(&exact, |a, b| a - b);
            e
        };
        let r = convergence_ratio(&err(21), &err(41), 1);
        assert!((3.5..4.5).contains(&r), "ratio {r}");
    }

    #[test]
    fn nan_masks_propagate() {
        let s = spec(7);
        let mut g = Grid::from_fn(s, |_, _, u, v| u * v);
        g.set(3, 3, f64::NAN);
        let guv = d_uv(&g);
        assert!(guv.get(2, 2).is_nan());
        assert!(guv.get(4, 4).is_nan());
        assert!(guv.get(1, 1).is_finite());
        let (m, frac) = max_interior(&guv);
        assert!((m - 1.0).abs() < 1e-12);
        assert!(frac > 0.0 && frac < 0.5);
    }

    #[test]
    fn parallel_and_serial_construction_agree() {
        let s = spec(9);
        let a = Grid::from_fn(s, |i, j, u, v| (i * 100 + j) as f64 + u - v);
        let b = Grid::par_from_fn(s, |i, j, u, v| (i * 100 + j) as f64 + u - v);
        assert_eq!(a, b);
    }
}
