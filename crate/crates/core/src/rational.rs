//! Simple rational elements of the twisted loop group and their products.
//!
//! An element is stored as `(kind, alpha, line)`; residues and values are
//! recomputed on demand. The determinant-normalising scalar is not applied,
//! so `det g(lambda) = ((lambda^3 + alpha^3) / (lambda^3 - alpha^3))^rank`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loopalgebra::{
    c, consts, epsilon_pow, re, vec_in_cone, Matrix3, ProjLine, Vec3, C64, ONE,
};
use crate::report::{Check, VerificationReport};

/// Relative pole proximity: `|lambda^3 - alpha^3| > POLE_TOL (|lambda|^3 + |alpha|^3)`.
pub const POLE_TOL: f64 = 1e-9;
/// Tolerance of the cone test applied to element lines.
pub const CONE_TOL: f64 = 1e-10;
/// Tolerance of the reality checks.
pub const REALITY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Rank1,
    Rank2,
}

impl Kind {
    pub fn rank(self) -> i32 {
        match self {
            Kind::Rank1 => 1,
            Kind::Rank2 => 2,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SimpleElement {
    pub kind: Kind,
    pub pole: C64,
    pub line: ProjLine,
}

pub fn near_pole(lambda: C64, alpha: C64, sign: f64) -> bool {
    let l3 = lambda.powi(3);
    let a3 = alpha.powi(3);
    (l3 - a3 * sign).norm() <= POLE_TOL * (l3.norm() + a3.norm())
}

fn check_line(line: &ProjLine) -> Result<(C64, C64)> {
    if vec_in_cone(line.rep(), CONE_TOL) {
        return Err(Error::ConeLine {
            line: line.to_string(),
        });
    }
    line.ab().ok_or_else(|| Error::ConeLine {
        line: line.to_string(),
    })
}

/// The rational part `M(lambda)` with `g = I + 2 M / (lambda^3 - alpha^3)`.
fn numerator(kind: Kind, al: C64, a: C64, b: C64, l: C64) -> Matrix3 {
    let d = re(2.0) * a * b - ONE;
    let (a2, a3) = (al * al, al * al * al);
    let l2 = l * l;
    let mut m = Matrix3::zeros();
    match kind {
        Kind::Rank1 => {
            m.0 = [
                [a3 * a * b / d, al * l2 * b * b / d, a2 * l * b / d],
                [a2 * l * a * a, a3 * a * b, al * l2 * a],
                [al * l2 * a, a2 * l * b, a3],
            ];
        }
        Kind::Rank2 => {
            m.0 = [
                [a3 * (a * b - ONE) / d, -al * l2 * b * b / d, a2 * l * b / d],
                [a2 * l * a * a, a3 * (ONE - a * b), -al * l2 * a],
                [-al * l2 * a, a2 * l * b, C64::new(0.0, 0.0)],
            ];
        }
    }
    m
}

/// Value of the element with data `(kind, alpha, a, b)` without any checks
/// besides pole proximity. Used nodewise by the dressing code.
pub fn evaluate_raw(kind: Kind, alpha: C64, a: C64, b: C64, lambda: C64) -> Result<Matrix3> {
    if near_pole(lambda, alpha, 1.0) {
        return Err(Error::AtPole {
            lambda: lambda.to_string(),
        });
    }
    let k = re(2.0) / (lambda.powi(3) - alpha.powi(3));
    Ok(Matrix3::identity() + numerator(kind, alpha, a, b, lambda).scale(k))
}

/// `g(lambda)^{-1} = P g(-lambda)^t P`.
pub fn evaluate_inverse_raw(
    kind: Kind,
    alpha: C64,
    a: C64,
    b: C64,
    lambda: C64,
) -> Result<Matrix3> {
    if near_pole(lambda, alpha, -1.0) {
        return Err(Error::AtPole {
            lambda: lambda.to_string(),
        });
    }
    let p = consts().p;
    Ok(p * evaluate_raw(kind, alpha, a, b, -lambda)?.transpose() * p)
}

impl SimpleElement {
    pub fn new(kind: Kind, pole: C64, line: ProjLine) -> Result<Self> {
        if !(pole.norm() > 0.0) || !(pole.re.is_finite() && pole.im.is_finite()) {
            return Err(Error::ZeroPole);
        }
        check_line(&line)?;
        Ok(SimpleElement { kind, pole, line })
    }

    fn ab(&self) -> (C64, C64) {
        self.line.ab().expect("validated at construction")
    }

    /// Residue at `alpha` divided by `2 alpha`.
    pub fn residue_a(&self) -> Matrix3 {
        let (a, b) = self.ab();
        let d = re(2.0) * a * b - ONE;
        let z = C64::new(0.0, 0.0);
        let rows = match self.kind {
            Kind::Rank1 => [
                [a * b / d, b * b / d, b / d],
                [a * a, a * b, a],
                [a, b, ONE],
            ],
            Kind::Rank2 => [
                [(a * b - ONE) / d, -b * b / d, b / d],
                [a * a, ONE - a * b, -a],
                [-a, b, z],
            ],
        };
        Matrix3(rows).scale(re(1.0 / 3.0))
    }

    /// `(A, B, C)` with `B = Q^{-1} A Q`, `C = Q A Q^{-1}`.
    pub fn residues(&self) -> [Matrix3; 3] {
        let k = consts();
        let a = self.residue_a();
        [a, k.q_inv * a * k.q, k.q * a * k.q_inv]
    }

    pub fn evaluate(&self, lambda: C64) -> Result<Matrix3> {
        let (a, b) = self.ab();
        evaluate_raw(self.kind, self.pole, a, b, lambda)
    }

    pub fn evaluate_inverse(&self, lambda: C64) -> Result<Matrix3> {
        let (a, b) = self.ab();
        evaluate_inverse_raw(self.kind, self.pole, a, b, lambda)
    }

    pub fn det_at(&self, lambda: C64) -> Result<C64> {
        if near_pole(lambda, self.pole, 1.0) {
            return Err(Error::AtPole {
                lambda: lambda.to_string(),
            });
        }
        let (l3, a3) = (lambda.powi(3), self.pole.powi(3));
        Ok(((l3 + a3) / (l3 - a3)).powi(self.kind.rank()))
    }

    /// Real pole and real line.
    pub fn is_real(&self) -> bool {
        self.pole.im == 0.0 && self.line.max_imag() == 0.0
    }

    pub fn conj(&self) -> SimpleElement {
        SimpleElement {
            kind: self.kind,
            pole: self.pole.conj(),
            line: self.line.conj(),
        }
    }
}

pub fn make_rank1(alpha: C64, l: ProjLine) -> Result<SimpleElement> {
    SimpleElement::new(Kind::Rank1, alpha, l)
}

pub fn make_rank2(alpha: C64, l: ProjLine) -> Result<SimpleElement> {
    SimpleElement::new(Kind::Rank2, alpha, l)
}

/// Ordered product `factors[0] * factors[1] * ...`; the last factor is the
/// first one applied.
#[derive(Clone, Debug, Default)]
pub struct LoopProduct {
    pub factors: Vec<SimpleElement>,
    pub breather: bool,
}

impl LoopProduct {
    pub fn new(factors: Vec<SimpleElement>) -> Self {
        LoopProduct {
            factors,
            breather: false,
        }
    }

    pub fn evaluate(&self, lambda: C64) -> Result<Matrix3> {
        let mut m = Matrix3::identity();
        for f in &self.factors {
            m = m * f.evaluate(lambda)?;
        }
        Ok(m)
    }

    pub fn evaluate_inverse(&self, lambda: C64) -> Result<Matrix3> {
        let mut m = Matrix3::identity();
        for f in self.factors.iter().rev() {
            m = m * f.evaluate_inverse(lambda)?;
        }
        Ok(m)
    }

    pub fn det_at(&self, lambda: C64) -> Result<C64> {
        let mut d = ONE;
        for f in &self.factors {
            d *= f.det_at(lambda)?;
        }
        Ok(d)
    }

    /// `self * other`.
    pub fn then_left(&self, e: SimpleElement) -> LoopProduct {
        let mut factors = vec![e];
        factors.extend(self.factors.iter().copied());
        LoopProduct {
            factors,
            breather: false,
        }
    }
}

/// Anything evaluable as a loop-group element.
pub trait LoopElement {
    fn value(&self, lambda: C64) -> Result<Matrix3>;
    /// Whether the element is supposed to satisfy the tau condition.
    fn claims_tau(&self) -> bool;
}

impl LoopElement for SimpleElement {
    fn value(&self, lambda: C64) -> Result<Matrix3> {
        self.evaluate(lambda)
    }
    fn claims_tau(&self) -> bool {
        self.is_real()
    }
}

impl LoopElement for LoopProduct {
    fn value(&self, lambda: C64) -> Result<Matrix3> {
        self.evaluate(lambda)
    }
    fn claims_tau(&self) -> bool {
        self.breather || self.factors.iter().all(|f| f.is_real())
    }
}

/// Given rank-1 `g1 = g_{a1,l1}` and `g2 = g_{a2,l2}`, returns
/// `(g_{a1,l1~}, g_{a2,l2~})` with `l1~ = l1 g2(a1)^{-1}`,
/// `l2~ = l2 g1(a2)^{-1}`, so that `g_{a2,l2~} g1 = g_{a1,l1~} g2`.
pub fn permute_factorize(
    g1: &SimpleElement,
    g2: &SimpleElement,
) -> Result<(SimpleElement, SimpleElement)> {
    if g1.kind != Kind::Rank1 || g2.kind != Kind::Rank1 {
        return Err(Error::BadArgument(
            "permutability needs two rank-1 elements".into(),
        ));
    }
    let (a1, a2) = (g1.pole, g2.pole);
    if near_pole(a1, a2, 1.0) || near_pole(a1, a2, -1.0) {
        return Err(Error::PoleCollision(format!(
            "alpha1^3 = +-alpha2^3 for alpha1 = {a1}, alpha2 = {a2}"
        )));
    }
    let l1 = g2.evaluate_inverse(a1)?.left_mul_vec(g1.line.rep());
    let l2 = g1.evaluate_inverse(a2)?.left_mul_vec(g2.line.rep());
    let l1 = ProjLine::new(l1)?;
    let l2 = ProjLine::new(l2)?;
    Ok((make_rank1(a1, l1)?, make_rank1(a2, l2)?))
}

/// `g_{conj(alpha), l*} g_{alpha, l}` with `l* = conj(l) g_{alpha,l}(conj(alpha))^{-1}`.
pub fn make_breather(alpha: C64, l: ProjLine) -> Result<LoopProduct> {
    use std::f64::consts::PI;
    if alpha.norm() == 0.0 {
        return Err(Error::ZeroPole);
    }
    let arg = alpha.arg();
    let tol = 1e-12;
    let ok = (arg > tol && arg < PI / 6.0 - tol) || (arg > PI / 6.0 + tol && arg < PI / 3.0 - tol);
    if !ok {
        return Err(Error::BadArgument(format!(
            "breather pole argument {arg} must lie in (0, pi/6) or (pi/6, pi/3)"
        )));
    }
    let g = make_rank1(alpha, l)?;
    let gbar = g.conj();
    let (star, _) = permute_factorize(&gbar, &g)?;
    Ok(LoopProduct {
        factors: vec![star, g],
        breather: true,
    })
}

/// Residuals of the nu, mu and (when claimed) tau conditions at `samples`.
/// The tau residual is always computed; it is only required to pass when
/// the element claims tau-reality.
pub fn verify_reality(e: &dyn LoopElement, samples: &[C64]) -> Result<VerificationReport> {
    let k = consts();
    let e4 = epsilon_pow(4);
    let (mut rnu, mut rmu, mut rtau) = (0.0f64, 0.0f64, 0.0f64);
    for &l in samples {
        let g = e.value(l)?;
        let scale = g.max_abs().max(1.0);
        rnu = rnu.max((k.q * g * k.q_inv - e.value(e4 * l)?).max_abs() / scale);
        let gm = e.value(-l)?;
        let scale_mu = scale * gm.max_abs().max(1.0);
        rmu = rmu.max((k.p - g * k.p * gm.transpose()).max_abs() / scale_mu);
        rtau = rtau.max((e.value(l.conj())?.conj() - g).max_abs() / scale);
    }
    let mut rep = VerificationReport::new();
    rep.push(Check::new("nu-reality", rnu, REALITY_TOL, 0.0));
    rep.push(Check::new("mu-reality", rmu, REALITY_TOL, 0.0));
    let tau = Check::new("tau-reality", rtau, REALITY_TOL, 0.0);
    if e.claims_tau() {
        rep.push(tau);
    } else {
        rep.push(tau.informational());
    }
    Ok(rep)
}

// ---------------------------------------------------------------------------
// JSON form
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementJson {
    pub kind: Kind,
    pub pole: [f64; 2],
    pub line: [[f64; 2]; 3],
}

impl From<&SimpleElement> for ElementJson {
    fn from(e: &SimpleElement) -> Self {
        let r = e.line.rep();
        ElementJson {
            kind: e.kind,
            pole: [e.pole.re, e.pole.im],
            line: [[r[0].re, r[0].im], [r[1].re, r[1].im], [r[2].re, r[2].im]],
        }
    }
}

impl TryFrom<&ElementJson> for SimpleElement {
    type Error = Error;
    fn try_from(j: &ElementJson) -> Result<Self> {
        let l = ProjLine::new(Vec3::new(
            c(j.line[0][0], j.line[0][1]),
            c(j.line[1][0], j.line[1][1]),
            c(j.line[2][0], j.line[2][1]),
        ))?;
        SimpleElement::new(j.kind, c(j.pole[0], j.pole[1]), l)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductJson {
    pub breather: bool,
    pub factors: Vec<ElementJson>,
}

impl From<&LoopProduct> for ProductJson {
    fn from(p: &LoopProduct) -> Self {
        ProductJson {
            breather: p.breather,
            factors: p.factors.iter().map(ElementJson::from).collect(),
        }
    }
}

impl TryFrom<&ProductJson> for LoopProduct {
    type Error = Error;
    fn try_from(j: &ProductJson) -> Result<Self> {
        Ok(LoopProduct {
            breather: j.breather,
            factors: j
                .factors
                .iter()
                .map(SimpleElement::try_from)
                .collect::<Result<_>>()?,
        })
    }
}

impl fmt::Display for SimpleElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            Kind::Rank1 => "g",
            Kind::Rank2 => "h",
        };
        write!(f, "{k}[alpha={}, line={}]", self.pole, self.line)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(a: f64, b: f64, c: f64) -> ProjLine {
        ProjLine::real(a, b, c).unwrap()
    }

    fn random_line(rng: &mut ChaCha8Rng) -> ProjLine {
        loop {
            let l = line(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), 1.0);
            if let Some((a, b)) = l.ab() {
                if (re(2.0) * a * b - ONE).norm() > 0.1 {
                    return l;
                }
            }
        }
    }

    fn random_lambda(rng: &mut ChaCha8Rng) -> C64 {
        c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))
    }

    #[test]
    fn rank1_value_at_two() {
        let g = make_rank1(re(1.0), line(1.0, 1.0, 1.0)).unwrap();
        let v = g.evaluate(re(2.0)).unwrap();
        let expect = Matrix3::from_real([[9.0, 8.0, 4.0], [4.0, 9.0, 8.0], [8.0, 4.0, 9.0]])
            .scale(re(1.0 / 7.0));
        assert!((v - expect).max_abs() < 1e-14);
        assert!((v.det() - re(9.0 / 7.0)).norm() < 1e-13);
        assert!((g.det_at(re(2.0)).unwrap() - re(9.0 / 7.0)).norm() < 1e-15);
    }

    #[test]
    fn values_tend_to_identity_at_infinity() {
        for kind in [Kind::Rank1, Kind::Rank2] {
            let g = SimpleElement::new(kind, c(0.7, 0.2), line(0.3, -1.2, 1.0)).unwrap();
            let big = re(1e9);
            assert!((g.evaluate(big).unwrap() - Matrix3::identity()).max_abs() < 1e-8);
            assert!((g.evaluate_inverse(big).unwrap() - Matrix3::identity()).max_abs() < 1e-8);
        }
    }

    #[test]
    fn cone_lines_are_rejected() {
        assert!(matches!(
            make_rank1(re(1.0), line(1.0, 0.5, 1.0)),
            Err(Error::ConeLine { .. })
        ));
        assert!(matches!(
            make_rank2(re(1.0), line(1.0, 2.0, 0.0)),
            Err(Error::ConeLine { .. })
        ));
        assert!(matches!(
            make_rank1(re(0.0), line(1.0, 1.0, 1.0)),
            Err(Error::ZeroPole)
        ));
    }

    #[test]
    fn rank2_residue_example() {
        let h = make_rank2(re(1.0), line(1.0, 1.0, 1.0)).unwrap();
        let a = h.residue_a().scale(re(2.0));
        let expect = Matrix3::from_real([[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]])
            .scale(re(2.0 / 3.0));
        assert!((a - expect).max_abs() < 1e-15);
    }

    #[test]
    fn residue_from_contour_matches_formula() {
        // numerical residue of g at alpha equals 2 alpha A
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for kind in [Kind::Rank1, Kind::Rank2] {
            let al = c(rng.gen_range(0.5..1.5), rng.gen_range(-0.5..0.5));
            let g = SimpleElement::new(kind, al, random_line(&mut rng)).unwrap();
            let r = 1e-3;
            let mut acc = Matrix3::zeros();
            let n = 64;
            for k in 0..n {
                let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                let z = C64::from_polar(1.0, th);
                acc += g.evaluate(al + z * r).unwrap().scale(z * r / n as f64);
            }
            let expect = g.residue_a().scale(re(2.0) * al);
            assert!((acc - expect).max_abs() < 1e-8, "{kind:?}");
            let [_, b, cc] = g.residues();
            let e2 = epsilon_pow(2) * al;
            let mut acc2 = Matrix3::zeros();
            let mut acc4 = Matrix3::zeros();
            for k in 0..n {
                let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                let z = C64::from_polar(1.0, th);
                acc2 += g.evaluate(e2 + z * r).unwrap().scale(z * r / n as f64);
                acc4 += g
                    .evaluate(epsilon_pow(4) * al + z * r)
                    .unwrap()
                    .scale(z * r / n as f64);
            }
            assert!((acc2 - b.scale(re(2.0) * e2)).max_abs() < 1e-8);
            assert!((acc4 - cc.scale(re(2.0) * epsilon_pow(4) * al)).max_abs() < 1e-8);
        }
    }

    #[test]
    fn residue_ranks_and_lines() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let l = random_line(&mut rng);
            let al = c(rng.gen_range(0.2..2.0), 0.0);
            let g = make_rank1(al, l).unwrap();
            let a = g.residue_a();
            assert_eq!(a.numerical_rank(1e-10), 1);
            // image of A^t is the line
            let img = a.transpose().mul_vec(Vec3::real(1.0, -0.3, 0.7));
            assert!(ProjLine::new(img).unwrap().same_line(&l, 1e-9));
            let h = make_rank2(al, l).unwrap();
            let b = h.residue_a();
            assert_eq!(b.numerical_rank(1e-10), 2);
            // l^t spans the kernel of A P
            let k = b * consts().p;
            assert!(k.mul_vec(l.rep()).max_abs() < 1e-12);
        }
    }

    #[test]
    fn determinant_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for kind in [Kind::Rank1, Kind::Rank2] {
            let g = SimpleElement::new(kind, c(1.1, 0.3), random_line(&mut rng)).unwrap();
            for _ in 0..20 {
                let l = random_lambda(&mut rng);
                let d = g.evaluate(l).unwrap().det();
                let f = g.det_at(l).unwrap();
                assert!((d - f).norm() < 1e-10 * f.norm().max(1.0));
            }
        }
        let g = make_rank1(re(0.8), line(0.1, 0.2, 1.0)).unwrap();
        assert!((g.det_at(re(0.0)).unwrap() + ONE).norm() < 1e-15);
        let h = make_rank2(re(1.0), line(1.0, 1.0, 1.0)).unwrap();
        assert!((h.det_at(re(2.0)).unwrap() - re(81.0 / 49.0)).norm() < 1e-14);
    }

    #[test]
    fn inverse_and_poles() {
        let g = make_rank1(re(1.0), line(1.0, 1.0, 1.0)).unwrap();
        let p = g.evaluate(re(2.0)).unwrap() * g.evaluate_inverse(re(2.0)).unwrap();
        assert!((p - Matrix3::identity()).max_abs() < 1e-12);
        assert!(matches!(g.evaluate(re(1.0)), Err(Error::AtPole { .. })));
        assert!(matches!(g.evaluate_inverse(re(-1.0)), Err(Error::AtPole { .. })));
        assert!(g.evaluate(epsilon_pow(2)).is_err());
    }

    #[test]
    fn twisted_values() {
        // nu condition: Q g(lambda) Q^{-1} = g(eps^4 lambda)
        let k = consts();
        let g = make_rank1(re(1.0), line(1.0, 1.0, 1.0)).unwrap();
        let l = re(2.0);
        let lhs = k.q * g.evaluate(l).unwrap() * k.q_inv;
        assert!((lhs - g.evaluate(epsilon_pow(4) * l).unwrap()).max_abs() < 1e-13);
        let lhs2 = k.q_inv * g.evaluate(l).unwrap() * k.q;
        assert!((lhs2 - g.evaluate(epsilon_pow(2) * l).unwrap()).max_abs() < 1e-13);
    }

    #[test]
    fn reality_reports() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<C64> = (0..12).map(|_| random_lambda(&mut rng)).collect();
        let g = make_rank1(re(1.2), line(1.0, 1.0, 1.0)).unwrap();
        let r = verify_reality(&g, &samples).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.checks.len(), 3);
        let gc = make_rank1(C64::from_polar(1.0, std::f64::consts::PI / 8.0), line(1.0, 1.0, 1.0))
            .unwrap();
        let r = verify_reality(&gc, &samples).unwrap();
        assert!(r.pass);
        assert!(r.checks[0].pass && r.checks[1].pass);
        assert!(r.checks[2].residual > 1e-3);
        let b = make_breather(C64::from_polar(1.0, std::f64::consts::PI / 8.0), line(1.0, 1.0, 1.0))
            .unwrap();
        let r = verify_reality(&b, &samples).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.checks[2].required);
    }

    #[test]
    fn permutability_example_lines() {
        let g1 = make_rank1(re(1.0), line(0.0, 1.0, 1.0)).unwrap();
        let g2 = make_rank1(re(2.0), line(0.0, 1.0, 1.0)).unwrap();
        let (t1, t2) = permute_factorize(&g1, &g2).unwrap();
        assert!(t1.line.same_line(&line(0.0, -1.0 / 7.0, 1.0), 1e-14));
        assert!(t2.line.same_line(&line(0.0, 5.0 / 7.0, 1.0), 1e-14));
        // the printed closed form for b~
        let (a1, a2, b1, b2) = (1.0f64, 2.0f64, 1.0, 1.0);
        let bt1 = ((a1.powi(3) + a2.powi(3)) * b1 - 2.0 * a1 * a2 * a2 * b2) / (a1.powi(3) - a2.powi(3));
        let bt2 = (2.0 * a1 * a1 * a2 * b1 - (a1.powi(3) + a2.powi(3)) * b2) / (a1.powi(3) - a2.powi(3));
        assert!((t1.line.rep()[1].re - bt1).abs() < 1e-14);
        assert!((t2.line.rep()[1].re - bt2).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..12 {
            let l = random_lambda(&mut rng);
            let lhs = t2.evaluate(l).unwrap() * g1.evaluate(l).unwrap();
            let rhs = t1.evaluate(l).unwrap() * g2.evaluate(l).unwrap();
            assert!((lhs - rhs).max_abs() < 1e-10 * lhs.max_abs().max(1.0));
        }
        let g3 = make_rank1(re(-1.0), line(0.0, 1.0, 1.0)).unwrap();
        assert!(matches!(permute_factorize(&g1, &g3), Err(Error::PoleCollision(_))));
    }

    #[test]
    fn breather_argument_checks() {
        let l = line(1.0, 1.0, 1.0);
        assert!(matches!(make_breather(re(1.0), l), Err(Error::BadArgument(_))));
        assert!(matches!(
            make_breather(C64::from_polar(1.0, std::f64::consts::PI / 6.0), l),
            Err(Error::BadArgument(_))
        ));
        let b = make_breather(C64::from_polar(1.0, std::f64::consts::PI / 8.0), l).unwrap();
        assert_eq!(b.factors.len(), 2);
        assert!((b.factors[0].pole - b.factors[1].pole.conj()).norm() < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let g = make_rank2(c(1.2, 0.1), line(0.3, -0.4, 1.0)).unwrap();
        let j = ElementJson::from(&g);
        let s = serde_json::to_string(&j).unwrap();
        assert!(s.starts_with("{\"kind\":\"rank2\",\"pole\":[1.2,0.1],\"line\":"));
        let back = SimpleElement::try_from(&serde_json::from_str::<ElementJson>(&s).unwrap()).unwrap();
        assert_eq!(back.kind, g.kind);
        assert_eq!(back.pole, g.pole);
        assert!(back.line == g.line);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn inverse_is_inverse(a in -2.0f64..2.0, b in -2.0f64..2.0, al in 0.3f64..2.0,
                                  lr in -2.0f64..2.0, li in -2.0f64..2.0, rank2 in any::<bool>()) {
                prop_assume!((2.0 * a * b - 1.0).abs() > 1e-3);
                let kind = if rank2 { Kind::Rank2 } else { Kind::Rank1 };
                let g = SimpleElement::new(kind, re(al), line(a, b, 1.0)).unwrap();
                let l = c(lr, li);
                prop_assume!(!near_pole(l, re(al), 1.0) && !near_pole(l, re(al), -1.0));
                let (Ok(v), Ok(w)) = (g.evaluate(l), g.evaluate_inverse(l)) else { return Ok(()) };
                let scale = v.max_abs() * w.max_abs();
                prop_assume!(scale < 1e6);
                prop_assert!((w * v - Matrix3::identity()).max_abs() < 1e-10 * scale.max(1.0));
            }

            #[test]
            fn permuted_lines_ignore_representative_scale(
                b1 in -2.0f64..2.0, b2 in -2.0f64..2.0, s in 0.1f64..10.0, t in -3.0f64..3.0
            ) {
                let g1 = make_rank1(re(1.0), line(0.2, b1, 1.0)).unwrap();
                let g2 = make_rank1(re(2.0), line(0.0, b2, 1.0)).unwrap();
                let h1 = make_rank1(re(1.0), ProjLine::new(Vec3::real(0.2, b1, 1.0).scale(c(s, t))).unwrap()).unwrap();
                let h2 = make_rank1(re(2.0), ProjLine::new(Vec3::real(0.0, b2, 1.0).scale(c(t, s))).unwrap()).unwrap();
                let r1 = permute_factorize(&g1, &g2);
                let r2 = permute_factorize(&h1, &h2);
                match (r1, r2) {
                    (Ok((a1, a2)), Ok((c1, c2))) => {
                        prop_assert!(a1.line.same_line(&c1.line, 1e-9));
                        prop_assert!(a2.line.same_line(&c2.line, 1e-9));
                    }
                    (Err(_), Err(_)) => {}
                    _ => prop_assert!(false, "scale changed the outcome"),
                }
            }
        }
    }
}
