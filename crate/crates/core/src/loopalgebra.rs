//! Complex 3x3 arithmetic and the automorphisms of the twisted loop group.
//!
//! Everything is carried in complex double precision. The group
//! automorphisms are
//!
//! * `tau(g) = conj(g)`,
//! * `sigma(g) = T (g^t)^{-1} T^{-1}` (order 6), with Lie algebra form
//!   `sigma(A) = -T A^t T^{-1}`,
//! * `nu(g) = Q g Q^{-1}` (order 3) and `mu(g) = P (g^t)^{-1} P` (order 2),
//!   which commute and compose to `sigma`.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Relative singularity threshold: `|det M| > SINGULAR_TOL * ||M||^3`.
pub const SINGULAR_TOL: f64 = 1e-12;
/// Tolerance for comparing normalized line representatives.
pub const LINE_EQ_TOL: f64 = 1e-10;
/// Default imaginary-part tolerance when extracting real results.
pub const IMAG_TOL: f64 = 1e-9;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// `e^{i pi / 3}`.
pub fn epsilon() -> C64 {
    C64::from_polar(1.0, std::f64::consts::PI / 3.0)
}

/// `epsilon^k` for any integer `k` (reduced mod 6 so powers stay exact-ish).
pub fn epsilon_pow(k: i64) -> C64 {
    C64::from_polar(1.0, std::f64::consts::PI * (k.rem_euclid(6) as f64) / 3.0)
}

// ---------------------------------------------------------------------------
// Vec3
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vec3(pub [C64; 3]);

impl Vec3 {
    pub const fn new(a: C64, b: C64, c: C64) -> Self {
        Vec3([a, b, c])
    }

    pub fn real(a: f64, b: f64, c: f64) -> Self {
        Vec3([re(a), re(b), re(c)])
    }

    pub fn zero() -> Self {
        Vec3([ZERO; 3])
    }

    pub fn nan() -> Self {
        Vec3([C64::new(f64::NAN, f64::NAN); 3])
    }

    pub fn scale(self, s: C64) -> Self {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }

    pub fn scale_re(self, s: f64) -> Self {
        self.scale(re(s))
    }

    /// Bilinear dot product (no conjugation).
    pub fn dot(self, o: Vec3) -> C64 {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    /// Bilinear cross product.
    pub fn cross(self, o: Vec3) -> Vec3 {
        let [a1, a2, a3] = self.0;
        let [b1, b2, b3] = o.0;
        Vec3([a2 * b3 - a3 * b2, a3 * b1 - a1 * b3, a1 * b2 - a2 * b1])
    }

    pub fn norm(self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_imag(self) -> f64 {
        self.0.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    pub fn conj(self) -> Vec3 {
        Vec3([self.0[0].conj(), self.0[1].conj(), self.0[2].conj()])
    }

    pub fn is_finite(self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn re_parts(self) -> [f64; 3] {
        [self.0[0].re, self.0[1].re, self.0[2].re]
    }
}

impl Index<usize> for Vec3 {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.0[i]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        self.scale_re(-1.0)
    }
}

/// `det(a, b, c)` with the vectors as columns.
pub fn det3(a: Vec3, b: Vec3, c: Vec3) -> C64 {
    a.cross(b).dot(c)
}

// ---------------------------------------------------------------------------
// Matrix3
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Matrix3(pub [[C64; 3]; 3]);

impl fmt::Debug for Matrix3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix3[")?;
        for row in &self.0 {
            writeln!(f, "  {:.6} {:.6} {:.6}", row[0], row[1], row[2])?;
        }
        write!(f, "]")
    }
}

impl Matrix3 {
    pub fn zeros() -> Self {
        Matrix3([[ZERO; 3]; 3])
    }

    pub fn identity() -> Self {
        Self::diag(ONE, ONE, ONE)
    }

    pub fn diag(a: C64, b: C64, c: C64) -> Self {
        let mut m = Self::zeros();
        m.0[0][0] = a;
        m.0[1][1] = b;
        m.0[2][2] = c;
        m
    }

    pub fn from_real(rows: [[f64; 3]; 3]) -> Self {
        let mut m = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = re(rows[i][j]);
            }
        }
        m
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = f(i, j);
            }
        }
        m
    }

    pub fn nan() -> Self {
        Matrix3([[C64::new(f64::NAN, f64::NAN); 3]; 3])
    }

    pub fn from_columns(a: Vec3, b: Vec3, c: Vec3) -> Self {
        Self::from_fn(|i, j| [a, b, c][j].0[i])
    }

    pub fn column(&self, j: usize) -> Vec3 {
        Vec3([self.0[0][j], self.0[1][j], self.0[2][j]])
    }

    pub fn row(&self, i: usize) -> Vec3 {
        Vec3(self.0[i])
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(|i, j| self.0[j][i])
    }

    pub fn conj(&self) -> Self {
        Self::from_fn(|i, j| self.0[i][j].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_fn(|i, j| self.0[i][j] * s)
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn det(&self) -> C64 {
        det3(self.column(0), self.column(1), self.column(2))
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_imag(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|z| z.im.abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0
            .iter()
            .flatten()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Inverse via the adjugate, refusing matrices with
    /// `|det| <= SINGULAR_TOL * ||M||^3`.
    pub fn inverse(&self) -> Result<Self> {
        let d = self.det();
        let scale = self.norm().powi(3);
        if !(d.norm() > SINGULAR_TOL * scale) {
            return Err(Error::SingularMatrix { det: d.norm() });
        }
        // rows of the inverse are cross products of columns
        let (c0, c1, c2) = (self.column(0), self.column(1), self.column(2));
        let r0 = c1.cross(c2);
        let r1 = c2.cross(c0);
        let r2 = c0.cross(c1);
        let inv_d = d.inv();
        Ok(Self::from_fn(|i, j| [r0, r1, r2][i].0[j] * inv_d))
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        Vec3([
            self.row(0).dot(v),
            self.row(1).dot(v),
            self.row(2).dot(v),
        ])
    }

    /// Row vector times matrix: `v M`.
    pub fn left_mul_vec(&self, v: Vec3) -> Vec3 {
        Vec3([
            v.dot(self.column(0)),
            v.dot(self.column(1)),
            v.dot(self.column(2)),
        ])
    }

    pub fn commutator(&self, o: &Matrix3) -> Matrix3 {
        *self * *o - *o * *self
    }

    /// Number of singular values above `tol * sigma_max`, from the
    /// characteristic polynomial of `M^H M`.
    /// Rank from scaled minors: `|det| > tol |M|^3`, a 2x2 minor above
    /// `tol |M|^2`, an entry above `tol |M|`.
    pub fn numerical_rank(&self, tol: f64) -> usize {
        let n = self.norm();
        if n == 0.0 {
            return 0;
        }
        if self.det().norm() > tol * n.powi(3) {
            return 3;
        }
        let a = &self.0;
        let mut minor = 0.0f64;
        for (r0, r1) in [(0, 1), (0, 2), (1, 2)] {
            for (c0, c1) in [(0, 1), (0, 2), (1, 2)] {
                let m = a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0];
                minor = minor.max(m.norm());
            }
        }
        if minor > tol * n * n {
            2
        } else {
            1
        }
    }
}

impl Index<(usize, usize)> for Matrix3 {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for Matrix3 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.0[i][j]
    }
}

impl Mul for Matrix3 {
    type Output = Matrix3;
    fn mul(self, o: Matrix3) -> Matrix3 {
        Matrix3::from_fn(|i, j| {
            self.0[i][0] * o.0[0][j] + self.0[i][1] * o.0[1][j] + self.0[i][2] * o.0[2][j]
        })
    }
}

impl Add for Matrix3 {
    type Output = Matrix3;
    fn add(self, o: Matrix3) -> Matrix3 {
        Matrix3::from_fn(|i, j| self.0[i][j] + o.0[i][j])
    }
}

impl AddAssign for Matrix3 {
    fn add_assign(&mut self, o: Matrix3) {
        *self = *self + o;
    }
}

impl Sub for Matrix3 {
    type Output = Matrix3;
    fn sub(self, o: Matrix3) -> Matrix3 {
        Matrix3::from_fn(|i, j| self.0[i][j] - o.0[i][j])
    }
}

impl Neg for Matrix3 {
    type Output = Matrix3;
    fn neg(self) -> Matrix3 {
        self.scale(re(-1.0))
    }
}

// ---------------------------------------------------------------------------
// Structure constants and automorphisms
// ---------------------------------------------------------------------------

/// The fixed matrices of the twisted loop group.
#[derive(Clone, Copy, Debug)]
pub struct StructureConstants {
    pub epsilon: C64,
    pub t: Matrix3,
    pub t_inv: Matrix3,
    pub p: Matrix3,
    pub q: Matrix3,
    pub q_inv: Matrix3,
    /// Cyclic permutation with `N e_1 = e_2`, `N e_2 = e_3`, `N e_3 = e_1`.
    pub n: Matrix3,
}

impl StructureConstants {
    pub fn new() -> Self {
        let e = epsilon();
        let mut t = Matrix3::zeros();
        t[(0, 1)] = ONE;
        t[(1, 0)] = -e;
        t[(2, 2)] = e * e;
        let q = Matrix3::diag(epsilon_pow(4), epsilon_pow(2), ONE);
        let q_inv = Matrix3::diag(epsilon_pow(2), epsilon_pow(4), ONE);
        StructureConstants {
            epsilon: e,
            t,
            t_inv: t.inverse().expect("T is invertible"),
            p: Matrix3::from_real([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]),
            q,
            q_inv,
            n: Matrix3::from_real([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
        }
    }
}

impl Default for StructureConstants {
    fn default() -> Self {
        Self::new()
    }
}

thread_local! {
    static CONSTS: StructureConstants = StructureConstants::new();
}

/// Shared structure constants.
pub fn consts() -> StructureConstants {
    CONSTS.with(|c| *c)
}

pub fn tau(m: &Matrix3) -> Matrix3 {
    m.conj()
}

pub fn sigma_group(m: &Matrix3) -> Result<Matrix3> {
    let k = consts();
    Ok(k.t * m.transpose().inverse()? * k.t_inv)
}

pub fn sigma_algebra(m: &Matrix3) -> Matrix3 {
    let k = consts();
    -(k.t * m.transpose() * k.t_inv)
}

pub fn nu(m: &Matrix3) -> Matrix3 {
    let k = consts();
    k.q * *m * k.q_inv
}

pub fn mu(m: &Matrix3) -> Result<Matrix3> {
    let k = consts();
    Ok(k.p * m.transpose().inverse()? * k.p)
}

/// Trace tolerance for the eigenspace decomposition, relative to `||M||`.
pub const TRACE_TOL: f64 = 1e-10;

/// Component of a trace-free `M` in the `epsilon^j` eigenspace of the
/// algebra automorphism `sigma`:
/// `M_j = (1/6) sum_k epsilon^{-jk} sigma^k(M)`.
pub fn eigenspace_project(m: &Matrix3, j: u32) -> Result<Matrix3> {
    let tr = m.trace().norm();
    if tr > TRACE_TOL * m.norm().max(1.0) {
        return Err(Error::NonTraceFree { trace: tr });
    }
    let j = (j % 6) as i64;
    let mut acc = Matrix3::zeros();
    let mut power = *m;
    for k in 0..6 {
        acc += power.scale(epsilon_pow(-j * k));
        power = sigma_algebra(&power);
    }
    Ok(acc.scale(re(1.0 / 6.0)))
}

// ---------------------------------------------------------------------------
// Projective lines and the cone
// ---------------------------------------------------------------------------

/// A line `C * (a, b, c)` in `C^3`, stored with `c = 1` whenever `c != 0`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ProjLine {
    rep: Vec3,
}

impl ProjLine {
    pub fn new(rep: Vec3) -> Result<Self> {
        let n = rep.max_abs();
        if !(n > 0.0) || !rep.is_finite() {
            return Err(Error::BadArgument("line representative is zero".into()));
        }
        Ok(ProjLine {
            rep: normalize_rep(rep),
        })
    }

    pub fn real(a: f64, b: f64, c: f64) -> Result<Self> {
        Self::new(Vec3::real(a, b, c))
    }

    /// Normalized representative.
    pub fn rep(&self) -> Vec3 {
        self.rep
    }

    /// `(a, b)` of the `(a, b, 1)` form; `None` if the third component is 0.
    pub fn ab(&self) -> Option<(C64, C64)> {
        if self.has_unit_third() {
            Some((self.rep[0], self.rep[1]))
        } else {
            None
        }
    }

    fn has_unit_third(&self) -> bool {
        (self.rep[2] - ONE).norm() < 1e-15
    }

    pub fn same_line(&self, other: &ProjLine, tol: f64) -> bool {
        (self.rep - other.rep).max_abs() <= tol * self.rep.max_abs().max(1.0)
    }

    pub fn conj(&self) -> ProjLine {
        ProjLine {
            rep: normalize_rep(self.rep.conj()),
        }
    }

    pub fn max_imag(&self) -> f64 {
        self.rep.max_imag()
    }
}

impl PartialEq for ProjLine {
    fn eq(&self, other: &Self) -> bool {
        self.same_line(other, LINE_EQ_TOL)
    }
}

impl fmt::Display for ProjLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.rep;
        if r.max_imag() == 0.0 {
            write!(f, "({}, {}, {})", r[0].re, r[1].re, r[2].re)
        } else {
            write!(f, "({}, {}, {})", r[0], r[1], r[2])
        }
    }
}

fn normalize_rep(rep: Vec3) -> Vec3 {
    let n = rep.max_abs();
    if rep[2].norm() > 1e-14 * n {
        rep.scale(rep[2].inv())
    } else {
        // third component vanishes: scale by the largest entry instead
        let k = (0..3)
            .max_by(|&a, &b| rep[a].norm().partial_cmp(&rep[b].norm()).unwrap())
            .unwrap();
        let mut out = rep.scale(rep[k].inv());
        out.0[2] = ZERO;
        out
    }
}

/// Membership of `l` in `{2 z1 z2 = z3^2} u {z3 = 0}`, scale-invariant.
pub fn cone_contains(l: &ProjLine, tol: f64) -> bool {
    vec_in_cone(l.rep, tol)
}

pub fn vec_in_cone(z: Vec3, tol: f64) -> bool {
    let n = z.norm();
    let quad = (re(2.0) * z[0] * z[1] - z[2] * z[2]).norm();
    quad <= tol * n * n || z[2].norm() <= tol * n
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng) -> Matrix3 {
        Matrix3::from_fn(|_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    fn trace_free(m: Matrix3) -> Matrix3 {
        m - Matrix3::identity().scale(m.trace() / 3.0)
    }

    #[test]
    fn epsilon_relations() {
        let e = epsilon();
        assert!((e.powi(6) - ONE).norm() < 1e-15);
        assert!((e.powi(3) + ONE).norm() < 1e-15);
    }

    #[test]
    fn structure_matrix_identities() {
        let k = consts();
        assert!((k.p * k.p - Matrix3::identity()).max_abs() < 1e-15);
        assert!((k.n * k.n * k.n - Matrix3::identity()).max_abs() < 1e-15);
        assert!((k.q * k.q * k.q - Matrix3::identity()).max_abs() < 1e-14);
        assert!((k.q * k.q_inv - Matrix3::identity()).max_abs() < 1e-15);
        // T = epsilon^2 Q P
        assert!((k.t - (k.q * k.p).scale(epsilon_pow(2))).max_abs() < 1e-15);
    }

    #[test]
    fn tau_examples() {
        let i = Matrix3::identity();
        assert_eq!(tau(&i), i);
        let ii = i.scale(c(0.0, 1.0));
        assert_eq!(tau(&ii), i.scale(c(0.0, -1.0)));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_matrix(&mut rng);
        assert_eq!(tau(&tau(&m)), m);
    }

    #[test]
    fn sigma_fixes_g0_and_negates_g3() {
        let d = Matrix3::diag(re(1.0), re(-1.0), ZERO);
        assert!((sigma_algebra(&d) - d).max_abs() < 1e-15);
        let x = 0.7;
        let g3 = Matrix3::diag(re(x), re(x), re(-2.0 * x));
        assert!((sigma_algebra(&g3) + g3).max_abs() < 1e-15);
    }

    #[test]
    fn sigma_group_has_order_six() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_matrix(&mut rng);
        let mut p = m;
        for k in 1..=6 {
            p = sigma_group(&p).unwrap();
            let d = (p - m).max_abs();
            if k < 6 {
                assert!(d > 1e-3, "sigma^{k} returned to M");
            } else {
                assert!(d < 1e-12, "sigma^6 != id: {d}");
            }
        }
    }

    #[test]
    fn nu_mu_orders_and_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let m = random_matrix(&mut rng);
            let n3 = nu(&nu(&nu(&m)));
            assert!((n3 - m).max_abs() < 1e-12);
            let m2 = mu(&mu(&m).unwrap()).unwrap();
            assert!((m2 - m).max_abs() < 1e-12);
            let s = sigma_group(&m).unwrap();
            assert!((nu(&mu(&m).unwrap()) - s).max_abs() < 1e-12);
            assert!((mu(&nu(&m)).unwrap() - s).max_abs() < 1e-12);
        }
    }

    #[test]
    fn nu_mu_examples() {
        let d = Matrix3::diag(c(1.0, 2.0), re(-3.0), c(0.5, 0.0));
        assert!((nu(&d) - d).max_abs() < 1e-14);
        let p = consts().p;
        assert!((mu(&p).unwrap() - p).max_abs() < 1e-14);
    }

    #[test]
    fn singular_inputs_are_rejected() {
        let s = Matrix3::from_real([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 1.0, 1.0]]);
        assert!(matches!(sigma_group(&s), Err(Error::SingularMatrix { .. })));
        assert!(matches!(mu(&s), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn eigenspace_shapes() {
        // every projection of a generic trace-free matrix must have the
        // printed zero pattern and the printed entry equalities
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = trace_free(random_matrix(&mut rng));
        let tiny = 1e-13;
        let zero_pattern: [&[(usize, usize)]; 6] = [
            &[(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1), (2, 2)],
            &[(0, 0), (0, 1), (1, 1), (1, 2), (2, 0), (2, 2)],
            &[(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (2, 1), (2, 2)],
            &[(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)],
            &[(0, 0), (0, 1), (1, 0), (1, 1), (1, 2), (2, 0), (2, 2)],
            &[(0, 0), (0, 2), (1, 0), (1, 1), (2, 1), (2, 2)],
        ];
        for j in 0..6 {
            let mj = eigenspace_project(&m, j as u32).unwrap();
            for &ij in zero_pattern[j] {
                assert!(mj[ij].norm() < tiny, "G_{j} entry {ij:?} = {}", mj[ij]);
            }
            let s = sigma_algebra(&mj);
            assert!((s - mj.scale(epsilon_pow(j as i64))).max_abs() < 1e-13);
        }
        let g0 = eigenspace_project(&m, 0).unwrap();
        assert!((g0[(0, 0)] + g0[(1, 1)]).norm() < tiny);
        let g1 = eigenspace_project(&m, 1).unwrap();
        assert!((g1[(0, 2)] - g1[(2, 1)]).norm() < tiny);
        let g2 = eigenspace_project(&m, 2).unwrap();
        assert!((g2[(1, 2)] + g2[(2, 0)]).norm() < tiny);
        let g3 = eigenspace_project(&m, 3).unwrap();
        assert!((g3[(0, 0)] - g3[(1, 1)]).norm() < tiny);
        let g4 = eigenspace_project(&m, 4).unwrap();
        assert!((g4[(0, 2)] + g4[(2, 1)]).norm() < tiny);
        // the X_5 pattern: x23 really appears twice, x12 is free
        let g5 = eigenspace_project(&m, 5).unwrap();
        assert!((g5[(1, 2)] - g5[(2, 0)]).norm() < tiny);
        assert!(g5[(0, 1)].norm() > 1e-3);
    }

    #[test]
    fn eigenspace_examples() {
        let mut x1 = Matrix3::zeros();
        x1[(0, 2)] = ONE;
        x1[(2, 1)] = ONE;
        x1[(1, 0)] = ONE;
        assert!((eigenspace_project(&x1, 1).unwrap() - x1).max_abs() < 1e-14);
        assert!(eigenspace_project(&x1, 2).unwrap().max_abs() < 1e-14);
        assert!(matches!(
            eigenspace_project(&Matrix3::identity(), 0),
            Err(Error::NonTraceFree { .. })
        ));
    }

    #[test]
    fn cone_examples() {
        assert!(cone_contains(&ProjLine::real(1.0, 0.5, 1.0).unwrap(), 1e-12));
        assert!(cone_contains(&ProjLine::real(1.0, 1.0, 0.0).unwrap(), 1e-12));
        assert!(!cone_contains(&ProjLine::real(1.0, 1.0, 1.0).unwrap(), 1e-12));
    }

    #[test]
    fn line_normalization_and_equality() {
        let a = ProjLine::real(2.0, 4.0, 2.0).unwrap();
        assert_eq!(a.ab(), Some((re(1.0), re(2.0))));
        let b = ProjLine::new(Vec3::real(1.0, 2.0, 1.0).scale(c(0.3, -2.0))).unwrap();
        assert_eq!(a, b);
        let z = ProjLine::real(3.0, 1.0, 0.0).unwrap();
        assert_eq!(z.ab(), None);
        assert!(ProjLine::real(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn numerical_rank_counts() {
        assert_eq!(Matrix3::identity().numerical_rank(1e-10), 3);
        let r1 = Matrix3::from_real([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [-1.0, -2.0, -3.0]]);
        assert_eq!(r1.numerical_rank(1e-10), 1);
        assert_eq!(Matrix3::zeros().numerical_rank(1e-10), 0);
    }

    #[test]
    fn inverse_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_matrix(&mut rng);
        let inv = m.inverse().unwrap();
        assert!((m * inv - Matrix3::identity()).max_abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn vec3() -> impl Strategy<Value = Vec3> {
            prop::array::uniform6(-2.0f64..2.0).prop_map(|a| {
                Vec3([c(a[0], a[1]), c(a[2], a[3]), c(a[4], a[5])])
            })
        }

        proptest! {
            #[test]
            fn cone_is_scale_invariant(z in vec3(), sr in 0.1f64..5.0, si in -5.0f64..5.0) {
                prop_assume!(z.max_abs() > 1e-3);
                let l1 = ProjLine::new(z).unwrap();
                let l2 = ProjLine::new(z.scale(c(sr, si))).unwrap();
                prop_assert_eq!(cone_contains(&l1, 1e-9), cone_contains(&l2, 1e-9));
                prop_assert_eq!(vec_in_cone(z, 1e-9), vec_in_cone(z.scale(c(sr, si)), 1e-9));
            }

            #[test]
            fn projections_are_complete_idempotent_and_orthogonal(
                a in prop::array::uniform9(-1.0f64..1.0),
                b in prop::array::uniform9(-1.0f64..1.0),
            ) {
                let m = trace_free(Matrix3::from_fn(|i, j| c(a[3 * i + j], b[3 * i + j])));
                let parts: Vec<Matrix3> =
                    (0..6).map(|j| eigenspace_project(&m, j).unwrap()).collect();
                let sum = parts.iter().fold(Matrix3::zeros(), |acc, p| acc + *p);
                prop_assert!((sum - m).max_abs() < 1e-12);
                for j in 0..6 {
                    let again = eigenspace_project(&parts[j], j as u32).unwrap();
                    prop_assert!((again - parts[j]).max_abs() < 1e-12);
                    let other = eigenspace_project(&parts[j], ((j + 1) % 6) as u32).unwrap();
                    prop_assert!(other.max_abs() < 1e-12);
                }
            }
        }
    }
}
