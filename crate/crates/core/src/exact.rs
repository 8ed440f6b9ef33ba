//! Closed-form oracles: the vacuum and the one-soliton family.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lax_frame::AnalyticSeed;
use crate::loopalgebra::{consts, epsilon_pow, re, Matrix3, Vec3, C64, ONE};
use crate::rational::near_pole;

const SQRT3: f64 = 1.732_050_807_568_877_2;
/// Nodes with `|cos(...)| <= SINGULAR_LINE_TOL` (or the general bracket) are masked.
pub const SINGULAR_LINE_TOL: f64 = 1e-6;

/// `h = 1`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Vacuum;

impl AnalyticSeed for Vacuum {
    fn jet(&self, _u: f64, _v: f64) -> [f64; 3] {
        [1.0, 0.0, 0.0]
    }
    fn name(&self) -> String {
        "vacuum".into()
    }
}

fn nonzero(lambda: C64) -> Result<()> {
    if lambda.norm() == 0.0 {
        Err(Error::ZeroLambda)
    } else {
        Ok(())
    }
}

/// The displayed vacuum parametrisation `X_0(u, v, lambda)`.
pub fn vacuum_surface(u: f64, v: f64, lambda: f64) -> Result<[f64; 3]> {
    nonzero(re(lambda))?;
    let s = lambda * u + v / lambda;
    let t = lambda * u - v / lambda;
    let e = (-s / 2.0).exp();
    let ph = SQRT3 * t / 2.0;
    Ok([e * ph.cos(), e * ph.sin(), 2.0 / (3.0 * SQRT3) * s.exp()])
}

/// Coefficients `(c0, c1, c2)` of `exp(lambda u N + v N^2 / lambda) = c0 I + c1 N + c2 N^2`.
pub fn vacuum_coefficients(u: f64, v: f64, lambda: C64) -> Result<[C64; 3]> {
    nonzero(lambda)?;
    let a = lambda * u;
    let b = lambda.inv() * v;
    let w = epsilon_pow(2);
    let e: Vec<C64> = (0..3)
        .map(|k| (a * w.powi(k) + b * w.powi(2 * k)).exp())
        .collect();
    let mut out = [C64::new(0.0, 0.0); 3];
    for (j, o) in out.iter_mut().enumerate() {
        for (k, ek) in e.iter().enumerate() {
            *o += ek * w.powi(-((j * k) as i32));
        }
        *o /= 3.0;
    }
    Ok(out)
}

/// Closed-form vacuum frame via the circulant eigendecomposition.
pub fn vacuum_frame(u: f64, v: f64, lambda: C64) -> Result<Matrix3> {
    let [c0, c1, c2] = vacuum_coefficients(u, v, lambda)?;
    let n = consts().n;
    Ok(Matrix3::identity().scale(c0) + n.scale(c1) + (n * n).scale(c2))
}

/// `R(lambda) = exp(lambda u + v / lambda)`.
pub fn r_fn(u: f64, v: f64, lambda: C64) -> C64 {
    (lambda * u + lambda.inv() * v).exp()
}

/// `c0 R(l1) + c1 R(eps^2 l1) + c2 R(eps^4 l1)`.
pub fn vacuum_scalar(u: f64, v: f64, lambda1: C64, c0: C64, c1: C64, c2: C64) -> Result<C64> {
    Ok(vacuum_scalar_jet(u, v, lambda1, c0, c1, c2)?.0)
}

/// `(phi, phi_u, phi_v)` of [`vacuum_scalar`].
pub fn vacuum_scalar_jet(
    u: f64,
    v: f64,
    lambda1: C64,
    c0: C64,
    c1: C64,
    c2: C64,
) -> Result<(C64, C64, C64)> {
    nonzero(lambda1)?;
    let mut out = (C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    for (k, ck) in [c0, c1, c2].into_iter().enumerate() {
        let l = epsilon_pow(2 * k as i64) * lambda1;
        let r = ck * r_fn(u, v, l);
        out.0 += r;
        out.1 += r * l;
        out.2 += r / l;
    }
    Ok(out)
}

/// One-soliton data: `c1 = rho0 e^{i theta0}`, `beta0 = c0 / (2 rho0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolitonParams {
    pub lambda1: f64,
    pub theta0: f64,
    pub beta0: f64,
}

impl SolitonParams {
    pub fn new(lambda1: f64, theta0: f64, beta0: f64) -> Result<Self> {
        if lambda1 == 0.0 || !lambda1.is_finite() {
            return Err(Error::ZeroLambda);
        }
        Ok(SolitonParams {
            lambda1,
            theta0,
            beta0,
        })
    }

    pub fn from_coefficients(lambda1: f64, c0: f64, rho0: f64, theta0: f64) -> Result<Self> {
        if !(rho0 > 0.0) {
            return Err(Error::BadArgument("rho0 must be positive".into()));
        }
        Self::new(lambda1, theta0, c0 / (2.0 * rho0))
    }

    /// Coefficients with `rho0 = 1`: `(2 beta0, e^{i theta0}, e^{-i theta0})`.
    pub fn coefficients(&self) -> (C64, C64, C64) {
        (
            re(2.0 * self.beta0),
            C64::from_polar(1.0, self.theta0),
            C64::from_polar(1.0, -self.theta0),
        )
    }

    pub fn s1(&self, u: f64, v: f64) -> f64 {
        self.lambda1 * u + v / self.lambda1
    }

    pub fn t1(&self, u: f64, v: f64) -> f64 {
        self.lambda1 * u - v / self.lambda1
    }

    pub fn phase(&self, u: f64, v: f64) -> f64 {
        SQRT3 * self.t1(u, v) / 2.0 + self.theta0
    }
}

/// The displayed general one-soliton `h_1`; `None` on the singular set.
pub fn one_soliton_h(u: f64, v: f64, p: &SolitonParams) -> Option<f64> {
    let e = (1.5 * p.s1(u, v)).exp();
    let cs = p.phase(u, v).cos();
    let bracket = p.beta0 * e + cs;
    if bracket.abs() <= SINGULAR_LINE_TOL {
        return None;
    }
    Some(1.0 - (6.0 * p.beta0 * e * cs + 1.5) / (bracket * bracket))
}

/// The special solution `1 - 1.5 sec^2(phase)` with complex `lambda1`,
/// `theta0` (pure imaginary data give the hyperbolic variant).
pub fn one_soliton_h_complex(u: f64, v: f64, lambda1: C64, theta0: C64) -> Result<C64> {
    nonzero(lambda1)?;
    let ph = (lambda1 * u - lambda1.inv() * v) * (SQRT3 / 2.0) + theta0;
    let cs = ph.cos();
    Ok(ONE - re(1.5) / (cs * cs))
}

/// One-soliton `h_1` as a seed, with exact partials from the scalar-solution
/// representation `h_1 = 2 p q - 1`, `p = phi_u / phi`, `q = phi_v / phi`.
#[derive(Clone, Copy, Debug)]
pub struct OneSoliton(pub SolitonParams);

impl OneSoliton {
    pub fn log_derivatives(&self, u: f64, v: f64) -> (C64, C64) {
        let (c0, c1, c2) = self.0.coefficients();
        let (f, fu, fv) =
            vacuum_scalar_jet(u, v, re(self.0.lambda1), c0, c1, c2).expect("lambda1 != 0");
        (fu / f, fv / f)
    }
}

impl AnalyticSeed for OneSoliton {
    fn jet(&self, u: f64, v: f64) -> [f64; 3] {
        let g1 = self.0.lambda1.powi(3);
        let (p, q) = self.log_derivatives(u, v);
        let pu = q * g1 - p * p;
        let pv = ONE - p * q;
        let qv = p / g1 - q * q;
        let h = re(2.0) * p * q - ONE;
        let hu = re(2.0) * (pu * q + p * pv);
        let hv = re(2.0) * (pv * q + p * qv);
        [h.re, hu.re, hv.re]
    }
    fn name(&self) -> String {
        format!(
            "one-soliton(lambda1={}, theta0={}, beta0={})",
            self.0.lambda1, self.0.theta0, self.0.beta0
        )
    }
}

/// The displayed one-soliton surface family (beta0 = 0); `None` where the
/// tangent is undefined.
pub fn one_soliton_surface(u: f64, v: f64, lambda: f64, p: &SolitonParams) -> Result<Option<[f64; 3]>> {
    nonzero(re(lambda))?;
    let l1 = p.lambda1;
    if near_pole(re(lambda), re(l1), -1.0) {
        return Err(Error::PoleCollision(format!(
            "lambda^3 = -lambda1^3 for lambda = {lambda}, lambda1 = {l1}"
        )));
    }
    let ph = p.phase(u, v);
    if ph.cos().abs() <= SINGULAR_LINE_TOL {
        return Ok(None);
    }
    let x0 = vacuum_surface(u, v, lambda)?;
    let (l3, m3) = (lambda.powi(3), l1.powi(3));
    let s = lambda * u + v / lambda;
    let t = lambda * u - v / lambda;
    let e = (-s / 2.0).exp();
    let a = SQRT3 * t / 2.0;
    let corr = [
        e * (lambda * (a + 4.0 * PI / 3.0).cos() + l1 * (a + 2.0 * PI / 3.0).cos()),
        e * (lambda * (a + 4.0 * PI / 3.0).sin() + l1 * (a + 2.0 * PI / 3.0).sin()),
        2.0 * s.exp() * (lambda + l1) / (3.0 * SQRT3),
    ];
    let k0 = (l3 - m3) / (l3 + m3);
    let k1 = SQRT3 * lambda * l1 * ph.tan() / (l3 + m3);
    Ok(Some([
        k0 * x0[0] + k1 * corr[0],
        k0 * x0[1] + k1 * corr[1],
        k0 * x0[2] + k1 * corr[2],
    ]))
}

pub fn cubic_residual(p: [f64; 3]) -> f64 {
    let [x, y, z] = p;
    x * x * x + y * y * y + z * z * z - 3.0 * x * y * z - 1.0
}

pub fn cubic_residual_c(p: Vec3) -> C64 {
    let [x, y, z] = p.0;
    x * x * x + y * y * y + z * z * z - x * y * z * 3.0 - ONE
}

/// Least-squares linear map `A` with `A src_k ~ dst_k`; returns `A` and the
/// largest pointwise misfit.
pub fn fit_linear(src: &[[f64; 3]], dst: &[[f64; 3]]) -> Result<([[f64; 3]; 3], f64)> {
    assert_eq!(src.len(), dst.len());
    let mut sst = Matrix3::zeros();
    let mut dst_s = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        for i in 0..3 {
            for j in 0..3 {
                sst[(i, j)] += re(s[i] * s[j]);
                dst_s[(i, j)] += re(d[i] * s[j]);
            }
        }
    }
    let a = dst_s * sst.inverse()?;
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[(i, j)].re;
        }
    }
    let mut worst = 0.0f64;
    for (s, d) in src.iter().zip(dst) {
        for i in 0..3 {
            let y: f64 = (0..3).map(|j| out[i][j] * s[j]).sum();
            worst = worst.max((y - d[i]).abs());
        }
    }
    Ok((out, worst))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loopalgebra::c;
    use crate::grid::{convergence_ratio, d_uv, Domain, Grid, GridSpec};
    use crate::lax_frame::{tzitzeica_residual_grid, SolutionField};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    #[test]
    fn vacuum_surface_examples() {
        let p = vacuum_surface(0.0, 0.0, 1.0).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1].abs() < 1e-15);
        assert!((p[2] - 2.0 / (3.0 * SQRT3)).abs() < 1e-15);
        assert!(matches!(vacuum_surface(0.0, 0.0, 0.0), Err(Error::ZeroLambda)));
        // equal s, different phase: same radius and height
        let l = 1.3;
        let a = vacuum_surface(0.2, 0.1, l).unwrap();
        let (u2, v2) = (0.2 + 0.3 / l, 0.1 - 0.3 * l);
        let b = vacuum_surface(u2, v2, l).unwrap();
        assert!((a[0].hypot(a[1]) - b[0].hypot(b[1])).abs() < 1e-14);
        assert!((a[2] - b[2]).abs() < 1e-14);
    }

    #[test]
    fn vacuum_surface_is_affine_sphere() {
        let res = |n: usize| {
            let sp = GridSpec::new(Domain::square(-1.0, 1.0), n, n).unwrap();
            let x = Grid::from_fn(sp, |_, _, u, v| {
                let p = vacuum_surface(u, v, 0.8).unwrap();
                Vec3::real(p[0], p[1], p[2])
            });
            let xuv = d_uv(&x);
            xuv.zip_map(&x, |a, b| (*a - *b).max_abs())
        };
        let r = convergence_ratio(&res(21), &res(41), 1);
        assert!((3.5..4.5).contains(&r), "{r}");
    }

    #[test]
    fn vacuum_frame_properties() {
        assert!((vacuum_frame(0.0, 0.0, c(0.3, 0.4)).unwrap() - Matrix3::identity()).max_abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let (u, v) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let l = rng.gen_range(0.3..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let f = vacuum_frame(u, v, re(l)).unwrap();
            assert!((f.det() - ONE).norm() < 1e-12);
            assert!(cubic_residual_c(f.column(2)).norm() < 1e-10);
            assert!(f.max_imag() < 1e-12);
        }
    }

    #[test]
    fn vacuum_frame_reality_conditions() {
        use crate::loopalgebra::{mu, nu, sigma_group};
        let (u, v) = (0.3, -0.4);
        let l = c(0.9, 0.35);
        let f = vacuum_frame(u, v, l).unwrap();
        let tau = vacuum_frame(u, v, l.conj()).unwrap().conj();
        assert!((tau - f).max_abs() < 1e-13);
        let s = sigma_group(&f).unwrap();
        assert!((s - vacuum_frame(u, v, epsilon_pow(1) * l).unwrap()).max_abs() < 1e-12);
        assert!((nu(&f) - vacuum_frame(u, v, epsilon_pow(4) * l).unwrap()).max_abs() < 1e-12);
        assert!((mu(&f).unwrap() - vacuum_frame(u, v, -l).unwrap()).max_abs() < 1e-12);
    }

    #[test]
    fn scalar_examples() {
        let l1 = re(1.1);
        let (f, fu, fv) = vacuum_scalar_jet(0.3, 0.2, l1, ONE, re(0.0), re(0.0)).unwrap();
        // phi_uu = l1^2 phi = gamma phi_v, phi_uv = phi
        assert!((fu * l1 - l1.powi(3) * fv).norm() < 1e-12);
        assert!((fu / l1 - f).norm() < 1e-12);
        let cc = C64::from_polar(0.7, 0.4);
        let z = vacuum_scalar(0.3, -0.2, re(0.9), re(0.5), cc, cc.conj()).unwrap();
        assert!(z.im.abs() < 1e-12);
        let z0 = vacuum_scalar(0.0, 0.0, re(0.9), re(0.5), cc, c(0.1, 0.2)).unwrap();
        assert!((z0 - (re(0.5) + cc + c(0.1, 0.2))).norm() < 1e-15);
    }

    #[test]
    fn special_soliton_spot_values() {
        let p = SolitonParams::new(1.2, 0.3, 0.0).unwrap();
        // phase = 0 along t1 = -2 theta0 / sqrt3
        let t1 = -2.0 * 0.3 / SQRT3;
        let (u, v) = (t1 / (2.0 * 1.2), -t1 * 1.2 / 2.0);
        assert!((p.phase(u, v)).abs() < 1e-15);
        assert!((one_soliton_h(u, v, &p).unwrap() + 0.5).abs() < 1e-14);
        let t1 = 2.0 * (PI / 4.0 - 0.3) / SQRT3;
        let (u, v) = (t1 / (2.0 * 1.2), -t1 * 1.2 / 2.0);
        assert!((one_soliton_h(u, v, &p).unwrap() + 2.0).abs() < 1e-13);
        // singular line masked
        let t1 = 2.0 * (PI / 2.0 - 0.3) / SQRT3;
        let (u, v) = (t1 / (2.0 * 1.2), -t1 * 1.2 / 2.0);
        assert!(one_soliton_h(u, v, &p).is_none());
    }

    #[test]
    fn general_display_matches_log_derivative_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let p = SolitonParams::new(rng.gen_range(0.5..1.5), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                .unwrap();
            let (u, v) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let Some(h) = one_soliton_h(u, v, &p) else { continue };
            let j = OneSoliton(p).jet(u, v);
            assert!((h - j[0]).abs() < 1e-9 * h.abs().max(1.0), "{h} vs {}", j[0]);
        }
    }

    #[test]
    fn soliton_symmetry_under_swap() {
        let p = SolitonParams::new(1.3, 0.4, 0.2).unwrap();
        let q = SolitonParams::new(1.0 / 1.3, -0.4, 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let (u, v) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if let (Some(a), Some(b)) = (one_soliton_h(u, v, &p), one_soliton_h(v, u, &q)) {
                assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn singular_lines_have_slope_lambda1_squared() {
        // cos(phase) = 0 <=> l1 u - v / l1 = const, i.e. v = l1^2 u + const
        let p = SolitonParams::new(0.8, 0.2, 0.0).unwrap();
        let t1 = 2.0 * (PI / 2.0 - 0.2) / SQRT3;
        for &u in &[-0.5, 0.0, 0.7] {
            let v = p.lambda1 * p.lambda1 * u - t1 * p.lambda1;
            assert!(one_soliton_h(u, v, &p).is_none());
            assert!(one_soliton_h(u, v + 1e-3, &p).is_some());
        }
    }

    #[test]
    fn soliton_pde_residual_converges() {
        // region between singular lines
        let p = SolitonParams::new(1.0, 0.0, 0.0).unwrap();
        let seed = Arc::new(OneSoliton(p));
        let res = |n: usize| {
            let sp = GridSpec::new(Domain::new(-0.3, 0.3, -0.3, 0.3).unwrap(), n, n).unwrap();
            tzitzeica_residual_grid(&SolutionField::analytic(sp, seed.clone()).h)
        };
        let r = convergence_ratio(&res(21), &res(41), 1);
        assert!((3.5..4.5).contains(&r), "{r}");
    }

    #[test]
    fn hyperbolic_variant_is_real() {
        let l1 = c(0.0, 0.9);
        let th = c(0.0, 0.3);
        for &(u, v) in &[(0.1, 0.2), (-0.5, 0.4), (0.9, -0.9)] {
            let h = one_soliton_h_complex(u, v, l1, th).unwrap();
            assert!(h.im.abs() < 1e-12);
            assert!(h.re > -0.5 - 1e-12 && h.re < 1.0);
        }
    }

    #[test]
    fn kelch_reduces_on_zero_tangent() {
        let p = SolitonParams::new(1.1, 0.25, 0.0).unwrap();
        let t1 = -2.0 * 0.25 / SQRT3;
        let (u, v) = (t1 / (2.0 * 1.1), -t1 * 1.1 / 2.0);
        let lam = 0.7;
        let x = one_soliton_surface(u, v, lam, &p).unwrap().unwrap();
        let x0 = vacuum_surface(u, v, lam).unwrap();
        let k = (lam.powi(3) - 1.1f64.powi(3)) / (lam.powi(3) + 1.1f64.powi(3));
        for i in 0..3 {
            assert!((x[i] - k * x0[i]).abs() < 1e-14);
        }
        assert!(matches!(
            one_soliton_surface(u, v, -1.1, &p),
            Err(Error::PoleCollision(_))
        ));
    }

    #[test]
    fn cubic_examples_and_fit() {
        assert_eq!(cubic_residual([1.0, 0.0, 0.0]), 0.0);
        assert_eq!(cubic_residual([0.0, 0.0, 1.0]), 0.0);
        let a = [[1.0, 2.0, 0.0], [0.0, 1.0, -1.0], [0.5, 0.0, 1.0]];
        let src: Vec<[f64; 3]> = (0..10)
            .map(|k| [k as f64, (k * k) as f64 * 0.1, 1.0 - k as f64 * 0.3])
            .collect();
        let dst: Vec<[f64; 3]> = src
            .iter()
            .map(|s| {
                let mut y = [0.0; 3];
                for i in 0..3 {
                    y[i] = (0..3).map(|j| a[i][j] * s[j]).sum();
                }
                y
            })
            .collect();
        let (fit, err) = fit_linear(&src, &dst).unwrap();
        assert!(err < 1e-10);
        for i in 0..3 {
            for j in 0..3 {
                assert!((fit[i][j] - a[i][j]).abs() < 1e-10);
            }
        }
    }
}
