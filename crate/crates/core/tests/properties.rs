use nalgebra::DMatrix;
use proptest::prelude::*;

use fgeom::caputo::{caputo_left, CaputoConfig, FractionalOrder};
use fgeom::expr::{parse, parse_with_dims, Expression};
use fgeom::field::{ArrayField, DiffContext};
use fgeom::geometry::{
    curvature_coefficients, einstein_tensor, scalar_curvature, torsion_coefficients, DConnection, DConnectionBlocks,
    DMetric, NConnection, RicciData,
};
use fgeom::gravity::{inverse_transform_n_connection, transform_n_connection, FrameTransform};
use fgeom::lagrange::LagrangeModel;
use fgeom::point::Point;

fn linear_entries(coeffs: &[f64], len: usize, n: usize, m: usize) -> ArrayField {
    // Entry k is c0 + c1·u_k + c2·u_j·u_k over a rotating choice of coordinates.
    let d = n + m;
    let name = |s: usize| {
        if s < n {
            format!("x{}", s + 1)
        } else {
            format!("y{}", s - n + 1)
        }
    };
    let entries = (0..len)
        .map(|k| {
            let c: Vec<f64> = (0..3).map(|t| coeffs[(3 * k + t) % coeffs.len()]).collect();
            let (a, b) = (name(k % d), name((k / d + 1) % d));
            let src = format!("{} + {}*{a} + {}*{a}*{b}", c[0], c[1], c[2]);
            parse_with_dims(&src, n, m).unwrap()
        })
        .collect();
    ArrayField::symbolic(entries, n, m)
}

fn random_geometry(coeffs: &[f64], n: usize, m: usize) -> (DConnection, NConnection) {
    let blocks = DConnectionBlocks {
        l_h: linear_entries(coeffs, n * n * n, n, m),
        l_v: linear_entries(&coeffs[1..], m * m * n, n, m),
        c_h: linear_entries(&coeffs[2..], n * n * m, n, m),
        c_v: linear_entries(&coeffs[3..], m * m * m, n, m),
    };
    let nconn = NConnection::new(n, m, linear_entries(&coeffs[4..], m * n, n, m)).unwrap();
    (DConnection::from_blocks(n, m, blocks).unwrap(), nconn)
}

fn expression() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (1u32..9).prop_map(|v| v.to_string()),
        (0.1f64..5.0).prop_map(|v| format!("{v:.3}")),
        prop_oneof![Just("x1"), Just("x2"), Just("y1"), Just("y2")].prop_map(String::from),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a} - {b}")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a}*{b}")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a}/({b} + 10)")),
            inner.clone().prop_map(|a| format!("-{a}")),
            (inner.clone(), 1u32..4).prop_map(|(a, p)| format!("({a})^{p}")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("exp(cos({a}))")),
        ]
    })
}

fn same(a: f64, b: f64) -> bool {
    (a.is_nan() && b.is_nan()) || a == b || (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn caputo_is_linear(
        alpha in 0.05f64..1.0,
        x in 0.2f64..3.0,
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        c in prop::array::uniform4(-2.0f64..2.0),
    ) {
        let order = FractionalOrder::new(alpha).unwrap();
        let cfg = CaputoConfig::new(256).unwrap();
        let f = |s: f64| Ok(c[0] * s * s + c[1] * s.sin());
        let g = |s: f64| Ok(c[2] * s.exp() + c[3] * s.powi(3));
        let lhs = caputo_left(|s| Ok(a * f(s)? + b * g(s)?), order, x, &cfg).unwrap();
        let rhs = a * caputo_left(f, order, x, &cfg).unwrap() + b * caputo_left(g, order, x, &cfg).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn torsion_and_curvature_are_antisymmetric(
        coeffs in prop::collection::vec(-1.0f64..1.0, 24),
        coords in prop::collection::vec(-1.0f64..1.0, 4),
        (n, m) in (1usize..3, 1usize..3),
    ) {
        let (dconn, nconn) = random_geometry(&coeffs, n, m);
        let p = Point::new(n, m, coords[..n + m].to_vec()).unwrap();
        let ctx = DiffContext::classical();
        let t = torsion_coefficients(&dconn, &nconn, &p, &ctx).unwrap();
        let r = curvature_coefficients(&dconn, &nconn, &p, &ctx).unwrap();
        let d = n + m;
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    prop_assert!((t.get(a, b, c) + t.get(a, c, b)).abs() < 1e-12);
                    for e in 0..d {
                        prop_assert!((r.get(a, b, c, e) + r.get(a, b, e, c)).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn einstein_trace_identity(
        seed in prop::collection::vec(-1.0f64..1.0, 64),
        (n, m) in (1usize..4, 1usize..4),
    ) {
        let d = n + m;
        let spd = |k: usize, off: usize| {
            let a = DMatrix::from_fn(k, k, |i, j| seed[(off + i * k + j) % seed.len()]);
            &a * a.transpose() + DMatrix::identity(k, k)
        };
        let (gh, gv) = (spd(n, 0), spd(m, 17));
        let field = |g: &DMatrix<f64>| ArrayField::symbolic(
            g.transpose().iter().map(|&v| Expression::constant(v, n, m)).collect(), n, m);
        let metric = DMetric::new(n, m, field(&gh), field(&gv)).unwrap();
        let ricci = RicciData {
            h_dim: n,
            v_dim: m,
            values: DMatrix::from_fn(d, d, |i, j| 2.0 * seed[(31 + i * d + j) % seed.len()]),
        };
        let p = Point::new(n, m, vec![0.3; d]).unwrap();
        let s = scalar_curvature(&metric, &ricci, &p).unwrap();
        let g = einstein_tensor(&metric, &ricci, s.total, &p).unwrap();
        let trace = g.trace(&metric.inverse(&p).unwrap());
        let expect = (1.0 - d as f64 / 2.0) * s.total;
        prop_assert!((trace - expect).abs() <= 1e-10 * (1.0 + expect.abs()));
        prop_assert!((s.horizontal + s.vertical - s.total).abs() <= 1e-12 * (1.0 + s.total.abs()));
    }

    #[test]
    fn n_transform_round_trips(
        entries in prop::collection::vec(-1.0f64..1.0, 25),
        nvals in prop::collection::vec(-2.0f64..2.0, 6),
        (n, m) in (1usize..4, 1usize..3),
    ) {
        let d = n + m;
        let mut a = DMatrix::zeros(d, d);
        for (off, k) in [(0, n), (n, m)] {
            for r in 0..k {
                for c in 0..k {
                    a[(off + r, off + c)] = entries[(off + r) * 5 + c] * 0.4 + if r == c { 1.5 } else { 0.0 };
                }
            }
        }
        let ft = FrameTransform::constant(n, m, &a).unwrap();
        let nconn = NConnection::new(
            n, m,
            ArrayField::symbolic((0..m * n).map(|k| Expression::constant(nvals[k], n, m)).collect(), n, m),
        ).unwrap();
        let p = Point::new(n, m, vec![0.4; d]).unwrap();
        let np = transform_n_connection(&nconn, &ft, &p).unwrap();
        let back = inverse_transform_n_connection(&np, &ft, &p).unwrap();
        prop_assert!((back - nconn.matrix(&p).unwrap()).amax() < 1e-10);
    }

    #[test]
    fn parse_print_round_trip(src in expression(), coords in prop::collection::vec(-2.0f64..2.0, 4)) {
        let e = parse(&src, 2).unwrap();
        let printed = e.to_string();
        let again = parse(&printed, 2).unwrap();
        prop_assert_eq!(&again.to_string(), &printed);
        let p = Point::from_xy(&coords[..2], &coords[2..]).unwrap();
        let (a, b) = (e.evaluate(&p), again.evaluate(&p));
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert!(same(a, b), "{} vs {} for {}", a, b, printed),
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
    }

    #[test]
    fn hessian_is_symmetric(
        c in prop::array::uniform5(-1.0f64..1.0),
        alpha in prop_oneof![Just(0.5f64), Just(0.75), Just(1.0)],
        coords in prop::collection::vec(0.2f64..1.5, 4),
    ) {
        let src = format!(
            "(2 + {}*x1^2)*y1^2 + (2 + {}*x2)*y2^2 + {}*y1*y2 + {}*y1^3*y2 + {}*y2^4",
            c[0].abs(), c[1].abs(), c[2], c[3], c[4]
        );
        let model = LagrangeModel::new(
            2, &src, FractionalOrder::new(alpha).unwrap(), CaputoConfig::new(64).unwrap(),
        ).unwrap();
        let p = Point::from_xy(&coords[..2], &coords[2..]).unwrap();
        if let Ok(h) = model.fractional_hessian(&p) {
            prop_assert_eq!(h.g[(0, 1)], h.g[(1, 0)]);
            prop_assert!(((&h.g * &h.g_inv) - DMatrix::identity(2, 2)).amax() < 1e-8);
        }
    }
}
