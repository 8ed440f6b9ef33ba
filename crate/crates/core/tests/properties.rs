//! Randomized invariants across modules.

use std::sync::Arc;

use proptest::prelude::*;
use tzlab::geometry::conformal_factor;
use tzlab::grid::{det_gauge, max_gap, max_gap_c, max_finite};
use tzlab::io::{csv_string, parse_csv};
use tzlab::loopalgebra::{re, ProjLine, Vec3, C64};
use tzlab::rational::{make_breather, make_rank1, permute_factorize, verify_reality};
use tzlab::transforms::{
    dress, dual_surface, family_surface, normalizing_scale, DressOptions, FrameFamily, VacuumFamily,
};
use tzlab::{Domain, Grid, GridSpec, ImmersionGrid, Kind, SimpleElement};

fn spec(n: usize) -> GridSpec {
    GridSpec::new(Domain::square(-0.5, 0.5), n, n).unwrap()
}

fn vacuum(n: usize) -> Arc<dyn FrameFamily> {
    Arc::new(VacuumFamily::new(spec(n)))
}

fn signed(x: f64, neg: bool) -> f64 {
    if neg {
        -x
    } else {
        x
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn permutability_identity(a1 in 0.5f64..1.0, a2 in 1.3f64..2.0,
                              p in -1.5f64..1.5, q in -1.5f64..1.5, r in -1.5f64..1.5, s in -1.5f64..1.5,
                              lr in 0.4f64..2.5, lt in 0.0f64..6.28) {
        let (Ok(g1), Ok(g2)) = (
            make_rank1(re(a1), ProjLine::real(p, q, 1.0).unwrap()),
            make_rank1(re(a2), ProjLine::real(r, s, 1.0).unwrap()),
        ) else { return Ok(()) };
        let Ok((t1, t2)) = permute_factorize(&g1, &g2) else { return Ok(()) };
        let l = C64::from_polar(lr, lt);
        let (Ok(a), Ok(b)) = (t2.evaluate(l), g1.evaluate(l)) else { return Ok(()) };
        let lhs = a * b;
        let rhs = t1.evaluate(l).unwrap() * g2.evaluate(l).unwrap();
        prop_assert!((lhs - rhs).max_abs() <= 1e-8 * lhs.max_abs().max(1.0));
    }

    #[test]
    fn breathers_are_tau_real(r in 0.6f64..1.6, t in 0.05f64..0.5, p in -1.0f64..1.0, q in -1.0f64..1.0) {
        prop_assume!((t - std::f64::consts::PI / 6.0).abs() > 0.02);
        let Ok(f) = make_breather(C64::from_polar(r, t), ProjLine::real(p, q, 1.0).unwrap()) else {
            return Ok(());
        };
        let samples: Vec<C64> = (0..6).map(|k| C64::from_polar(0.7 + 0.2 * k as f64, 0.3 + k as f64)).collect();
        let rep = verify_reality(&f, &samples).unwrap();
        for c in rep.checks.iter().filter(|c| c.required) {
            prop_assert!(c.residual < 1e-8, "{}", c.summary());
        }
    }

    #[test]
    fn double_dual_is_minus_identity(lam in 0.5f64..2.0, neg in any::<bool>()) {
        let x = family_surface(vacuum(9).as_ref(), re(signed(lam, neg))).unwrap();
        let xss = dual_surface(&dual_surface(&x).unwrap()).unwrap();
        let minus = x.x.map(|p| -*p);
        let (g, _) = max_gap(&xss.x, &minus);
        prop_assert!(g < 1e-10 * x.x.data.iter().map(|p| p.max_abs()).fold(1.0, f64::max).powi(3));
        prop_assert_eq!(xss.lambda, x.lambda);
    }

    #[test]
    fn normalized_dressing_restores_det_gauge(al in 0.9f64..1.5, lam in 0.5f64..0.8, b in 1.1f64..1.4) {
        let e = make_rank1(re(al), ProjLine::real(1.0, b, 1.0).unwrap()).unwrap();
        let d = dress(vacuum(9), e, re(lam), &DressOptions::default()).unwrap();
        let k = normalizing_scale(d.family.as_ref(), re(lam)).unwrap();
        let x = d.surface.scaled(k);
        let det = det_gauge(&x.x, x.xu.as_ref().unwrap(), x.xv.as_ref().unwrap());
        let (gap, _) = max_gap_c(&det, &x.h);
        prop_assert!(gap < 1e-8, "{gap}");
    }

    #[test]
    fn conformal_factor_is_cubic_in_scale(c in 0.2f64..3.0, lam in 0.6f64..1.6) {
        let x = family_surface(vacuum(9).as_ref(), re(lam)).unwrap();
        let y = ImmersionGrid::new(x.x.map(|p| p.scale_re(c)), x.h.clone(), x.lambda);
        let (h0, h1) = (conformal_factor(&x), conformal_factor(&y));
        let gap = h0.zip_map(&h1, |a, b| (a * c.powi(3) - b).abs());
        prop_assert!(max_finite(&gap).0 < 1e-10 * c.powi(3));
    }

    #[test]
    fn csv_round_trip(vals in prop::collection::vec(-1e6f64..1e6, 3 * 12), hs in prop::collection::vec(0.1f64..10.0, 12)) {
        let sp = GridSpec::new(Domain::new(0.0, 1.0, -2.0, 3.0).unwrap(), 3, 4).unwrap();
        let x = Grid::from_fn(sp, |i, j, _, _| {
            let k = 3 * sp.index(i, j);
            Vec3::real(vals[k], vals[k + 1], vals[k + 2])
        });
        let h = Grid::from_fn(sp, |i, j, _, _| re(hs[sp.index(i, j)]));
        let s = ImmersionGrid::new(x, h, re(1.0));
        let (y, hh) = parse_csv(&csv_string(&s).unwrap()).unwrap();
        prop_assert_eq!(y.spec, sp);
        for k in 0..sp.len() {
            prop_assert!((y.data[k] - s.x.data[k]).max_abs() <= 1e-15 * s.x.data[k].max_abs().max(1.0));
            prop_assert!((hh.data[k] - hs[k]).abs() <= 1e-15 * hs[k]);
        }
    }

    #[test]
    fn det_matches_closed_form(al in 0.5f64..2.0, p in -2.0f64..2.0, q in -2.0f64..2.0,
                               rank2 in any::<bool>(), lr in 0.4f64..2.5, lt in 0.0f64..6.28) {
        let kind = if rank2 { Kind::Rank2 } else { Kind::Rank1 };
        let Ok(e) = SimpleElement::new(kind, re(al), ProjLine::real(p, q, 1.0).unwrap()) else { return Ok(()) };
        let l = C64::from_polar(lr, lt);
        let (Ok(g), Ok(d)) = (e.evaluate(l), e.det_at(l)) else { return Ok(()) };
        prop_assert!((g.det() - d).norm() <= 1e-9 * d.norm().max(1.0));
    }
}
