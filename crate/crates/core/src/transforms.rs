//! The classical transformation, duality, dressing by simple elements and
//! the permutability pipeline.
//!
//! Dressing works on a [`FrameFamily`]: anything that can produce the frame
//! grid `F(lambda)` at an arbitrary spectral value together with the attached
//! conformal factor and the product of elements already applied. Seeds are
//! the closed-form vacuum and numerically integrated fields; a
//! [`DressedFamily`] wraps another family, so chains compose.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Node, Result};
use crate::exact::vacuum_frame;
use crate::grid::{max_finite, max_gap, max_rel_gap_c, Grid, GridSpec, ImmersionGrid};
use crate::lax_frame::{integrate_frame_with, ScalarSolution, SolutionField};
use crate::loopalgebra::{consts, re, vec_in_cone, Matrix3, ProjLine, Vec3, C64, IMAG_TOL, ONE};
use crate::rational::{evaluate_inverse_raw, near_pole, permute_factorize, Kind, LoopProduct, SimpleElement};
use crate::report::{Check, VerificationReport};

/// Nodes with `|phi| < PHI_MASK_TOL * max|phi|` are masked.
pub const PHI_MASK_TOL: f64 = 1e-8;

fn nan_c() -> C64 {
    C64::new(f64::NAN, f64::NAN)
}

fn valid(z: C64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

fn pole_err(e: Error) -> Error {
    match e {
        Error::AtPole { lambda } => Error::PoleCollision(format!("lambda = {lambda} hits a pole")),
        other => other,
    }
}

/// `[(g - g1) h X - 2 g p X_v + 2 g1 q X_u] / [(g + g1) h]`.
#[allow(clippy::too_many_arguments)]
fn transform_point(g: C64, g1: C64, h: C64, p: C64, q: C64, x: Vec3, xu: Vec3, xv: Vec3) -> Vec3 {
    let num = x.scale((g - g1) * h) - xv.scale(re(2.0) * g * p) + xu.scale(re(2.0) * g1 * q);
    num.scale(((g + g1) * h).inv())
}

fn apply_transform(
    x: &ImmersionGrid,
    h: &Grid<C64>,
    phi: &ScalarSolution,
    gamma: C64,
    lambda: C64,
) -> Result<ImmersionGrid> {
    let sp = x.spec();
    let (p, q) = phi.log_derivatives(PHI_MASK_TOL);
    let (xu, xv) = x.partials();
    let g1 = phi.gamma;
    let ok = |k: usize| {
        let hk = h.data[k];
        valid(hk) && hk.norm() > 0.0 && valid(p.data[k]) && valid(q.data[k])
    };
    let x1 = Grid::par_from_fn(sp, |i, j, _, _| {
        let k = sp.index(i, j);
        if !ok(k) || !x.x.data[k].is_finite() {
            return Vec3::nan();
        }
        transform_point(gamma, g1, h.data[k], p.data[k], q.data[k], x.x.data[k], xu.data[k], xv.data[k])
    });
    let h1 = Grid::from_fn(sp, |i, j, _, _| {
        let k = sp.index(i, j);
        if ok(k) {
            re(2.0) * p.data[k] * q.data[k] - h.data[k]
        } else {
            nan_c()
        }
    });
    if x1.data.iter().all(|v| !v.is_finite()) {
        return Err(Error::AllMasked);
    }
    Ok(ImmersionGrid::new(x1, h1, lambda))
}

/// The classical transformation of `x` (a family member at `gamma = lambda^3`)
/// by the scalar solution `phi` at `gamma1`. The result carries
/// `h1 = h - 2 (ln phi)_uv = 2 p q - h`.
pub fn classical_transform(h: &Grid<C64>, x: &ImmersionGrid, phi: &ScalarSolution) -> Result<ImmersionGrid> {
    let g = x.lambda.powi(3);
    let g1 = phi.gamma;
    if (g + g1).norm() <= 1e-12 * (g.norm() + g1.norm()) {
        return Err(Error::GammaCollision);
    }
    apply_transform(x, h, phi, g, x.lambda)
}

/// Closed-form dressed surfaces. `phi` must be the scalar solution at
/// `gamma1 = alpha^3` (rank 1) or `gamma1 = -alpha^3` (rank 2); the rank-2
/// surface is the classical formula with `gamma1 = -alpha^3`.
pub fn dressed_surface_closed_form(
    x: &ImmersionGrid,
    h: &Grid<C64>,
    phi: &ScalarSolution,
    alpha: C64,
    lambda: C64,
    kind: Kind,
) -> Result<ImmersionGrid> {
    let a3 = alpha.powi(3);
    let (expected, sign) = match kind {
        Kind::Rank1 => (a3, -1.0),
        Kind::Rank2 => (-a3, 1.0),
    };
    if (phi.gamma - expected).norm() > 1e-9 * a3.norm() {
        return Err(Error::BadArgument(format!(
            "scalar solution has gamma {} but {expected} is required",
            phi.gamma
        )));
    }
    if near_pole(lambda, alpha, sign) {
        return Err(Error::PoleCollision(format!(
            "lambda = {lambda} against alpha = {alpha}"
        )));
    }
    apply_transform(x, h, phi, lambda.powi(3), lambda)
}

/// `X* = X_u x X_v / h`, tagged with `-lambda` and the same `h`. With exact
/// partials of an eqmap solution the result carries `X*_u = X_u x X`,
/// `X*_v = X x X_v`.
pub fn dual_surface(x: &ImmersionGrid) -> Result<ImmersionGrid> {
    let sp = x.spec();
    let (xu, xv) = x.partials();
    let hmax = x.h.data.iter().filter(|z| valid(**z)).map(|z| z.norm()).fold(0.0, f64::max);
    let ok = |k: usize| {
        let h = x.h.data[k];
        valid(h) && h.norm() > 1e-12 * hmax && h.norm() > 0.0
    };
    if !(0..sp.len()).any(ok) {
        return Err(Error::ZeroH);
    }
    let xs = Grid::from_fn(sp, |i, j, _, _| {
        let k = sp.index(i, j);
        if ok(k) {
            xu.data[k].cross(xv.data[k]).scale(x.h.data[k].inv())
        } else {
            Vec3::nan()
        }
    });
    let mut out = ImmersionGrid::new(xs, x.h.clone(), -x.lambda);
    if x.xu.is_some() && x.xv.is_some() {
        let su = xu.zip_map(&x.x, |a, b| a.cross(*b));
        let sv = x.x.zip_map(&xv, |a, b| a.cross(*b));
        out = out.with_partials(su, sv);
    }
    Ok(out)
}

/// A family of extended frames over a fixed grid.
pub trait FrameFamily: Send + Sync {
    fn spec(&self) -> GridSpec;
    /// Frame grid at `lambda`; masked nodes carry NaN.
    fn frame(&self, lambda: C64) -> Result<Grid<Matrix3>>;
    fn h(&self) -> &Grid<C64>;
    /// Product of the elements applied so far (empty for seeds).
    fn left(&self) -> &LoopProduct;
    /// `[h, h_u, h_v]` when known exactly.
    fn h_jets(&self) -> Option<Grid<[C64; 3]>> {
        None
    }
    /// `left(lambda)^{-1} F(lambda)`, regular at the poles of `left`.
    fn surface_frame(&self, lambda: C64) -> Result<Grid<Matrix3>> {
        let f = self.frame(lambda)?;
        let linv = self.left().evaluate_inverse(lambda).map_err(pole_err)?;
        Ok(f.map(|m| linv * *m))
    }
}

/// The closed-form vacuum frames.
pub struct VacuumFamily {
    spec: GridSpec,
    h: Grid<C64>,
    left: LoopProduct,
}

impl VacuumFamily {
    pub fn new(spec: GridSpec) -> Self {
        VacuumFamily {
            spec,
            h: Grid::filled(spec, ONE),
            left: LoopProduct::default(),
        }
    }
}

impl FrameFamily for VacuumFamily {
    fn spec(&self) -> GridSpec {
        self.spec
    }
    fn frame(&self, lambda: C64) -> Result<Grid<Matrix3>> {
        if lambda.norm() == 0.0 {
            return Err(Error::ZeroLambda);
        }
        Ok(Grid::par_from_fn(self.spec, |_, _, u, v| {
            vacuum_frame(u, v, lambda).expect("lambda is nonzero")
        }))
    }
    fn h(&self) -> &Grid<C64> {
        &self.h
    }
    fn left(&self) -> &LoopProduct {
        &self.left
    }
    fn h_jets(&self) -> Option<Grid<[C64; 3]>> {
        Some(Grid::filled(self.spec, [ONE, re(0.0), re(0.0)]))
    }
}

/// Frames of a solution field, integrated on demand.
pub struct IntegratedFamily {
    pub field: SolutionField,
    pub substeps: usize,
    h: Grid<C64>,
    left: LoopProduct,
}

impl IntegratedFamily {
    pub fn new(field: SolutionField, substeps: usize) -> Result<Self> {
        if let Some((node, h)) = field.first_nonpositive() {
            return Err(Error::NonPositiveH { node, h });
        }
        let h = field.h.map(|&x| re(x));
        Ok(IntegratedFamily {
            field,
            substeps,
            h,
            left: LoopProduct::default(),
        })
    }
}

impl FrameFamily for IntegratedFamily {
    fn spec(&self) -> GridSpec {
        self.field.spec()
    }
    fn frame(&self, lambda: C64) -> Result<Grid<Matrix3>> {
        Ok(integrate_frame_with(&self.field, lambda, self.substeps)?.f)
    }
    fn h(&self) -> &Grid<C64> {
        &self.h
    }
    fn left(&self) -> &LoopProduct {
        &self.left
    }
    fn h_jets(&self) -> Option<Grid<[C64; 3]>> {
        let sp = self.spec();
        Some(Grid::from_fn(sp, |i, j, _, _| {
            let [h, hu, hv] = self.field.jet_at(i, j);
            [re(h), re(hu), re(hv)]
        }))
    }
}

/// `left(lambda)^{-1} F(lambda) e_3` with exact partials
/// `left^{-1} lambda F e_1` and `left^{-1} h F e_2 / lambda`. Defined
/// wherever `lambda^3` avoids `-alpha^3` for every applied pole.
pub fn family_surface(fam: &dyn FrameFamily, lambda: C64) -> Result<ImmersionGrid> {
    if lambda.norm() == 0.0 {
        return Err(Error::ZeroLambda);
    }
    let f = fam.surface_frame(lambda)?;
    let x = f.map(|m| m.column(2));
    let xu = f.map(|m| m.column(0).scale(lambda));
    let xv = f.zip_map(fam.h(), |m, &h| m.column(1).scale(h / lambda));
    Ok(ImmersionGrid::new(x, fam.h().clone(), lambda).with_partials(xu, xv))
}

/// `det(left(lambda))^{1/3}`: multiplying a family surface by it restores
/// `det(X_u, X_v, X) = h`.
pub fn normalizing_scale(fam: &dyn FrameFamily, lambda: C64) -> Result<C64> {
    let d = fam.left().det_at(lambda).map_err(pole_err)?;
    Ok(if d.im == 0.0 { re(d.re.cbrt()) } else { d.powf(1.0 / 3.0) })
}

/// The scalar solution `phi = (l F(alpha))_3` of a family.
pub fn family_scalar(fam: &dyn FrameFamily, l: &ProjLine, alpha: C64) -> Result<ScalarSolution> {
    let f = fam.frame(alpha)?;
    let rows = f.map(|m| m.left_mul_vec(l.rep()));
    Ok(ScalarSolution {
        phi: rows.map(|r| r[2]),
        phi_u: rows.map(|r| r[0] * alpha),
        phi_v: rows.zip_map(fam.h(), |r, &h| r[1] * h / alpha),
        gamma: alpha.powi(3),
    })
}

#[derive(Clone, Copy, Debug)]
pub struct DressOptions {
    /// Largest tolerated masked fraction; `0` makes any violation an error.
    pub max_masked_fraction: f64,
    pub allow_complex_pole: bool,
    pub open_tol: f64,
    pub kernel_tol: f64,
}

impl Default for DressOptions {
    fn default() -> Self {
        DressOptions {
            max_masked_fraction: 0.2,
            allow_complex_pole: false,
            open_tol: 1e-8,
            kernel_tol: 1e-8,
        }
    }
}

impl DressOptions {
    pub fn strict() -> Self {
        DressOptions {
            max_masked_fraction: 0.0,
            ..Default::default()
        }
    }
}

/// Nodewise tilde lines, stored as `(a, b, 1)`; NaN where masked.
#[derive(Clone, Debug)]
pub struct TildeLineField {
    pub lines: Grid<Vec3>,
    /// True where the open condition holds.
    pub open: Grid<bool>,
}

impl TildeLineField {
    pub fn line_at(&self, i: usize, j: usize) -> Option<ProjLine> {
        let v = *self.lines.get(i, j);
        if v.is_finite() {
            ProjLine::new(v).ok()
        } else {
            None
        }
    }
}

/// Column kernel of a rank-2 matrix from cross products of its rows.
fn kernel_vector(m: &Matrix3, node: Node, tol: f64) -> Result<Vec3> {
    let (r0, r1, r2) = (m.row(0), m.row(1), m.row(2));
    let best = [r0.cross(r1), r1.cross(r2), r2.cross(r0)]
        .into_iter()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .expect("three candidates");
    let n = m.norm();
    if !(best.norm() > tol * n * n) {
        return Err(Error::DegenerateKernel { node });
    }
    Ok(best)
}

/// `F~ = g(lambda) F(lambda) g_{alpha, l~}(lambda)^{-1}` over a base family.
pub struct DressedFamily {
    base: Arc<dyn FrameFamily>,
    pub element: SimpleElement,
    pub tilde: TildeLineField,
    h: Grid<C64>,
    left: LoopProduct,
    pub masked_fraction: f64,
    /// Nodes where the open condition fails (masked).
    pub violations: Vec<Node>,
}

impl DressedFamily {
    pub fn new(base: Arc<dyn FrameFamily>, element: SimpleElement, opts: &DressOptions) -> Result<Self> {
        let alpha = element.pole;
        if alpha.im != 0.0 && !opts.allow_complex_pole {
            return Err(Error::BadArgument(format!(
                "complex pole {alpha} needs the complex-pole option"
            )));
        }
        let sp = base.spec();
        let fa = base.frame(alpha)?;
        let hb = base.h();
        let p = consts().p;
        let a = element.residue_a();
        let mut vecs: Vec<Option<Vec3>> = Vec::with_capacity(sp.len());
        for k in 0..sp.len() {
            let m = fa.data[k];
            if !m.is_finite() || !valid(hb.data[k]) {
                vecs.push(None);
                continue;
            }
            let r = match element.kind {
                Kind::Rank1 => m.left_mul_vec(element.line.rep()),
                Kind::Rank2 => kernel_vector(&(a * m * p), sp.node(k), opts.kernel_tol)?,
            };
            vecs.push(Some(r));
        }
        let phimax = vecs.iter().flatten().map(|r| r[2].norm()).fold(0.0, f64::max);
        let mut lines = Grid::filled(sp, Vec3::nan());
        let mut open = Grid::filled(sp, false);
        let mut h = Grid::filled(sp, nan_c());
        let mut violations = Vec::new();
        let mut masked = 0usize;
        for (k, r) in vecs.iter().enumerate() {
            let (i, j) = sp.node(k);
            let Some(r) = r else {
                masked += 1;
                continue;
            };
            if vec_in_cone(*r, opts.open_tol) {
                violations.push((i, j));
                masked += 1;
                continue;
            }
            if !(r[2].norm() >= PHI_MASK_TOL * phimax) {
                masked += 1;
                continue;
            }
            let (la, lb) = (r[0] / r[2], r[1] / r[2]);
            lines.set(i, j, Vec3::new(la, lb, ONE));
            open.set(i, j, true);
            h.set(i, j, hb.data[k] * (re(2.0) * la * lb - ONE));
        }
        let masked_fraction = masked as f64 / sp.len() as f64;
        if !violations.is_empty() && masked_fraction > opts.max_masked_fraction {
            return Err(Error::OpenConditionViolated { nodes: violations });
        }
        if masked == sp.len() {
            return Err(Error::AllMasked);
        }
        let left = base.left().then_left(element);
        Ok(DressedFamily {
            base,
            element,
            tilde: TildeLineField { lines, open },
            h,
            left,
            masked_fraction,
            violations,
        })
    }

    pub fn base(&self) -> &Arc<dyn FrameFamily> {
        &self.base
    }
}

impl FrameFamily for DressedFamily {
    fn spec(&self) -> GridSpec {
        self.base.spec()
    }

    fn frame(&self, lambda: C64) -> Result<Grid<Matrix3>> {
        let g = self.element.evaluate(lambda).map_err(pole_err)?;
        let f = self.base.frame(lambda)?.map(|m| g * *m);
        self.tilde_product(f, lambda)
    }

    fn h(&self) -> &Grid<C64> {
        &self.h
    }

    fn left(&self) -> &LoopProduct {
        &self.left
    }

    /// `left^{-1} F~ = (base surface frame) g_{alpha, l~}^{-1}`.
    fn surface_frame(&self, lambda: C64) -> Result<Grid<Matrix3>> {
        self.tilde_product(self.base.surface_frame(lambda)?, lambda)
    }
}

impl DressedFamily {
    /// Right-multiplies nodewise by `g_{alpha, l~}(lambda)^{-1}`.
    fn tilde_product(&self, f: Grid<Matrix3>, lambda: C64) -> Result<Grid<Matrix3>> {
        let alpha = self.element.pole;
        if near_pole(lambda, alpha, -1.0) {
            return Err(Error::PoleCollision(format!(
                "lambda^3 = -alpha^3 for lambda = {lambda}, alpha = {alpha}"
            )));
        }
        let kind = self.element.kind;
        Ok(Grid::par_from_fn(self.spec(), |i, j, _, _| {
            let l = *self.tilde.lines.get(i, j);
            let m = *f.get(i, j);
            if !l.is_finite() || !m.is_finite() {
                return Matrix3::nan();
            }
            match evaluate_inverse_raw(kind, alpha, l[0], l[1], lambda) {
                Ok(inv) => m * inv,
                Err(_) => Matrix3::nan(),
            }
        }))
    }
}

/// Result of one dressing step.
pub struct Dressing {
    pub family: Arc<DressedFamily>,
    /// `F~` at the output spectral value.
    pub frame: Grid<Matrix3>,
    pub surface: ImmersionGrid,
}

pub fn dress(base: Arc<dyn FrameFamily>, e: SimpleElement, lambda: C64, opts: &DressOptions) -> Result<Dressing> {
    let family = Arc::new(DressedFamily::new(base, e, opts)?);
    let frame = family.frame(lambda)?;
    let surface = family_surface(family.as_ref(), lambda)?;
    Ok(Dressing { family, frame, surface })
}

pub fn dress_rank1(base: Arc<dyn FrameFamily>, e: SimpleElement, lambda: C64, opts: &DressOptions) -> Result<Dressing> {
    if e.kind != Kind::Rank1 {
        return Err(Error::BadArgument("expected a rank-1 element".into()));
    }
    dress(base, e, lambda, opts)
}

pub fn dress_rank2(base: Arc<dyn FrameFamily>, e: SimpleElement, lambda: C64, opts: &DressOptions) -> Result<Dressing> {
    if e.kind != Kind::Rank2 {
        return Err(Error::BadArgument("expected a rank-2 element".into()));
    }
    dress(base, e, lambda, opts)
}

/// Max entry of the discrete contour integral `(r/8) sum F(c + r e^{it}) e^{it}`
/// over 8 points, i.e. the residue of the family's frame at `center`.
pub fn residue_at(fam: &dyn FrameFamily, center: C64, radius: f64) -> Result<f64> {
    let sp = fam.spec();
    let mut acc = Grid::filled(sp, Matrix3::zeros());
    for k in 0..8 {
        let w = C64::from_polar(1.0, 2.0 * PI * k as f64 / 8.0);
        let f = fam.frame(center + w * radius)?;
        let s = w * (radius / 8.0);
        acc = acc.zip_map(&f, |a, m| *a + m.scale(s));
    }
    let g = acc.map(|m| if m.is_finite() { m.max_abs() } else { f64::NAN });
    Ok(max_finite(&g).0)
}

/// Residues of a dressed family at `alpha` and `-alpha` (radius `1e-3`).
pub fn residue_checks(fam: &DressedFamily) -> Result<[f64; 2]> {
    let a = fam.element.pole;
    Ok([residue_at(fam, a, 1e-3)?, residue_at(fam, -a, 1e-3)?])
}

/// A vector with its two first partials.
#[derive(Clone, Copy, Debug)]
struct Jet {
    v: Vec3,
    u: Vec3,
    w: Vec3,
}

/// First derivatives of `p = phi_u / phi`, `q = phi_v / phi` for a scalar
/// solution with parameter `g1`: `(p_u, p_v = q_u, q_v)`.
fn pq_derivatives(hj: [C64; 3], p: C64, q: C64, g1: C64) -> (C64, C64, C64) {
    let [h, hu, hv] = hj;
    let pu = hu / h * p + g1 / h * q - p * p;
    let pv = h - p * q;
    let qv = p / (g1 * h) + hv / h * q - q * q;
    (pu, pv, qv)
}

/// Transforms a target solving eqmap with parameter `g` (second derivatives
/// taken from eqmap) and returns the transformed jet.
fn transform_jet(hj: [C64; 3], p: C64, q: C64, g1: C64, t: Jet, g: C64) -> Jet {
    let [h, hu, hv] = hj;
    let (pu, pv, qv) = pq_derivatives(hj, p, q, g1);
    let qu = pv;
    let tuu = t.u.scale(hu / h) + t.w.scale(g / h);
    let tuv = t.v.scale(h);
    let tvv = t.u.scale((g * h).inv()) + t.w.scale(hv / h);
    let two = re(2.0);
    let nm = t.v.scale((g - g1) * h) - t.w.scale(two * g * p) + t.u.scale(two * g1 * q);
    let nm_u = (t.v.scale(hu) + t.u.scale(h)).scale(g - g1) - (t.w.scale(pu) + tuv.scale(p)).scale(two * g)
        + (t.u.scale(qu) + tuu.scale(q)).scale(two * g1);
    let nm_v = (t.v.scale(hv) + t.w.scale(h)).scale(g - g1) - (t.w.scale(pv) + tvv.scale(p)).scale(two * g)
        + (t.u.scale(qv) + tuv.scale(q)).scale(two * g1);
    let d = ((g + g1) * h).inv();
    Jet {
        v: nm.scale(d),
        u: (nm_u - nm.scale(hu / h)).scale(d),
        w: (nm_v - nm.scale(hv / h)).scale(d),
    }
}

/// `[h1, h1_u, h1_v]` for `h1 = 2 p q - h`.
fn h1_jet(hj: [C64; 3], p: C64, q: C64, g1: C64) -> [C64; 3] {
    let (pu, pv, qv) = pq_derivatives(hj, p, q, g1);
    let two = re(2.0);
    [
        two * p * q - hj[0],
        two * (pu * q + p * pv) - hj[1],
        two * (pv * q + p * qv) - hj[2],
    ]
}

fn scalar_jet(s: &ScalarSolution, k: usize) -> Jet {
    Jet {
        v: Vec3::new(s.phi.data[k], re(0.0), re(0.0)),
        u: Vec3::new(s.phi_u.data[k], re(0.0), re(0.0)),
        w: Vec3::new(s.phi_v.data[k], re(0.0), re(0.0)),
    }
}

/// Two successive classical transformations: first by `phi1`, then by
/// `phi12 = T_{phi1}(phi2)` over the new solution `h1`. `x` must carry exact
/// partials. Returns `(h12, X12)`.
pub fn classical_two_step(
    h_jets: &Grid<[C64; 3]>,
    x: &ImmersionGrid,
    phi1: &ScalarSolution,
    phi2: &ScalarSolution,
) -> Result<(Grid<C64>, Grid<Vec3>)> {
    let (Some(xu), Some(xv)) = (&x.xu, &x.xv) else {
        return Err(Error::BadArgument("two-step transform needs exact partials".into()));
    };
    let sp = x.spec();
    let (g, g1, g2) = (x.lambda.powi(3), phi1.gamma, phi2.gamma);
    let m1 = phi1.phi.data.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let out: Vec<(C64, Vec3)> = (0..sp.len())
        .map(|k| {
            let hj = h_jets.data[k];
            let f1 = phi1.phi.data[k];
            if !(f1.norm() >= PHI_MASK_TOL * m1) || !hj.iter().all(|z| valid(*z)) {
                return (nan_c(), Vec3::nan());
            }
            let (p1, q1) = (phi1.phi_u.data[k] / f1, phi1.phi_v.data[k] / f1);
            let f12 = transform_jet(hj, p1, q1, g1, scalar_jet(phi2, k), g2);
            let xj = Jet {
                v: x.x.data[k],
                u: xu.data[k],
                w: xv.data[k],
            };
            let x1 = transform_jet(hj, p1, q1, g1, xj, g);
            let h1 = h1_jet(hj, p1, q1, g1);
            let (p12, q12) = (f12.u[0] / f12.v[0], f12.w[0] / f12.v[0]);
            let x12 = transform_jet(h1, p12, q12, g2, x1, g);
            (re(2.0) * p12 * q12 - h1[0], x12.v)
        })
        .collect();
    let h12 = Grid {
        spec: sp,
        data: out.iter().map(|o| o.0).collect(),
    };
    let x12 = Grid {
        spec: sp,
        data: out.iter().map(|o| o.1).collect(),
    };
    Ok((h12, x12))
}

/// `n` spectral sample points, deterministic in `seed`, away from the poles
/// of the given elements.
pub fn sample_lambdas(n: usize, seed: u64, avoid: &[C64]) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let r = rng.gen_range(0.4..2.5);
        let t = rng.gen_range(0.0..2.0 * PI);
        let l = C64::from_polar(r, t);
        let clear = avoid.iter().all(|&a| {
            let (l3, a3) = (l.powi(3), a.powi(3));
            (l3 - a3).norm() > 0.05 * a3.norm() && (l3 + a3).norm() > 0.05 * a3.norm()
        });
        if clear {
            out.push(l);
        }
    }
    out
}

pub struct Permutability {
    pub report: VerificationReport,
    /// `(g_{a1, l1~}, g_{a2, l2~})`.
    pub tilde: (SimpleElement, SimpleElement),
    pub h12: Grid<C64>,
    pub x12: ImmersionGrid,
}

/// Dresses by `g1` then `g2~` and by `g2` then `g1~`, and compares both with
/// each other and with the two-step classical route.
pub fn permutability_check(
    base: Arc<dyn FrameFamily>,
    g1: &SimpleElement,
    g2: &SimpleElement,
    lambda: C64,
    opts: &DressOptions,
    seed: u64,
) -> Result<Permutability> {
    let (t1, t2) = permute_factorize(g1, g2)?;
    let mut report = VerificationReport::new();

    let mut perm = 0.0f64;
    for l in sample_lambdas(12, seed, &[g1.pole, g2.pole]) {
        let a = t2.evaluate(l)? * g1.evaluate(l)?;
        let b = t1.evaluate(l)? * g2.evaluate(l)?;
        perm = perm.max((a - b).max_abs() / a.max_abs().max(1.0));
    }
    report.push(Check::new("perm-identity", perm, 1e-10, 0.0));

    let f1: Arc<dyn FrameFamily> = Arc::new(DressedFamily::new(base.clone(), *g1, opts)?);
    let f12 = DressedFamily::new(f1, t2, opts)?;
    let f2: Arc<dyn FrameFamily> = Arc::new(DressedFamily::new(base.clone(), *g2, opts)?);
    let f21 = DressedFamily::new(f2, t1, opts)?;
    let x12 = family_surface(&f12, lambda)?;
    let x21 = family_surface(&f21, lambda)?;
    // h blows up near the zero set of phi; compare relative to |h|
    let (dh, mh) = max_rel_gap_c(f12.h(), f21.h());
    report.push(Check::new("h12-vs-h21", dh, 1e-7, mh));
    let (dx, mx) = max_gap(&x12.x, &x21.x);
    report.push(Check::new("x12-vs-x21", dx, 1e-7, mx));

    if let Some(hj) = base.h_jets() {
        let xb = family_surface(base.as_ref(), lambda)?;
        let p1 = family_scalar(base.as_ref(), &g1.line, g1.pole)?;
        let p2 = family_scalar(base.as_ref(), &g2.line, g2.pole)?;
        let (hc, xc) = classical_two_step(&hj, &xb, &p1, &p2)?;
        let (dh, mh) = max_rel_gap_c(f12.h(), &hc);
        report.push(Check::new("h12-vs-classical", dh, 1e-7, mh));
        let (dx, mx) = max_gap(&x12.x, &xc);
        report.push(Check::new("x12-vs-classical", dx, 1e-7, mx));
    }

    Ok(Permutability {
        report,
        tilde: (t1, t2),
        h12: f12.h().clone(),
        x12,
    })
}

/// Output of a breather dressing, with imaginary parts removed.
pub struct Breather {
    pub h: Grid<f64>,
    pub surface: ImmersionGrid,
    /// Largest imaginary part found before removal.
    pub max_imag: f64,
    pub family: Arc<DressedFamily>,
}

/// Dresses by the two conjugate factors of a breather in turn; the result
/// must be real to `1e-9`.
pub fn dress_breather(
    f: &LoopProduct,
    base: Arc<dyn FrameFamily>,
    lambda: C64,
    opts: &DressOptions,
) -> Result<Breather> {
    if !f.breather || f.factors.len() != 2 {
        return Err(Error::BadArgument("expected a two-factor breather".into()));
    }
    let o = DressOptions {
        allow_complex_pole: true,
        ..*opts
    };
    let first: Arc<dyn FrameFamily> = Arc::new(DressedFamily::new(base, f.factors[1], &o)?);
    let family = Arc::new(DressedFamily::new(first, f.factors[0], &o)?);
    let s = family_surface(family.as_ref(), lambda)?;
    let max_imag = s.max_imag();
    if max_imag > IMAG_TOL {
        return Err(Error::NonRealOutput { max_imag });
    }
    let realv = |g: &Grid<Vec3>| {
        g.map(|p| {
            if p.is_finite() {
                let r = p.re_parts();
                Vec3::real(r[0], r[1], r[2])
            } else {
                Vec3::nan()
            }
        })
    };
    let h = s.h.map(|z| z.re);
    let mut surface = ImmersionGrid::new(realv(&s.x), s.h.map(|z| re(z.re)), lambda);
    if let (Some(xu), Some(xv)) = (&s.xu, &s.xv) {
        surface = surface.with_partials(realv(xu), realv(xv));
    }
    Ok(Breather {
        h,
        surface,
        max_imag,
        family,
    })
}
