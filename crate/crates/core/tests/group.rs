use cmcf_core::group::{verify_structure, Frame, GroupSpec, Point, Preset};
use cmcf_core::poly::Poly;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn presets() -> Vec<GroupSpec> {
    vec![
        Preset::Euclidean(3).spec(),
        Preset::Heisenberg(1).spec(),
        Preset::Heisenberg(2).spec(),
        Preset::Engel.spec(),
    ]
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
}

// Faithful nilpotent matrix representations. `embed` maps algebra coordinates
// to a strictly upper triangular matrix, `extract` inverts it.
struct MatrixRep {
    size: usize,
    embed: fn(&[f64]) -> DMatrix<f64>,
    extract: fn(&DMatrix<f64>) -> Vec<f64>,
}

fn heisenberg_rep() -> MatrixRep {
    MatrixRep {
        size: 3,
        embed: |x| {
            let mut a = DMatrix::zeros(3, 3);
            a[(0, 1)] = x[0];
            a[(1, 2)] = x[1];
            a[(0, 2)] = x[2];
            a
        },
        extract: |l| vec![l[(0, 1)], l[(1, 2)], l[(0, 2)]],
    }
}

// X_1 = E12 + E23 + E34, X_2 = E34, X_3 = E24, X_4 = E14.
fn engel_rep() -> MatrixRep {
    MatrixRep {
        size: 4,
        embed: |x| {
            let mut a = DMatrix::zeros(4, 4);
            a[(0, 1)] = x[0];
            a[(1, 2)] = x[0];
            a[(2, 3)] = x[0] + x[1];
            a[(1, 3)] = x[2];
            a[(0, 3)] = x[3];
            a
        },
        extract: |l| vec![l[(0, 1)], l[(2, 3)] - l[(0, 1)], l[(1, 3)], l[(0, 3)]],
    }
}

fn nil_exp(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut out = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..n {
        term = &term * a / k as f64;
        out += &term;
    }
    out
}

fn nil_log(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let x = m - DMatrix::identity(n, n);
    let mut out = DMatrix::zeros(n, n);
    let mut pow = DMatrix::identity(n, n);
    for k in 1..n {
        pow = &pow * &x;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        out += &pow * (sign / k as f64);
    }
    out
}

fn matrix_product(rep: &MatrixRep, x: &[f64], y: &[f64]) -> Vec<f64> {
    let p = nil_exp(&(rep.embed)(x)) * nil_exp(&(rep.embed)(y));
    assert_eq!(p.nrows(), rep.size);
    (rep.extract)(&nil_log(&p))
}

#[test]
fn heisenberg_generators_multiply_to_half_bracket() {
    let g = Preset::Heisenberg(1).spec();
    let p = g.multiply(&Point::new(vec![1.0, 0.0, 0.0]), &Point::new(vec![0.0, 1.0, 0.0])).unwrap();
    assert_eq!(p.coords(), &[1.0, 1.0, 0.5]);
    let oracle = matrix_product(&heisenberg_rep(), &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]);
    assert!(close(p.coords(), &oracle, 1e-14));
}

#[test]
fn identity_and_inverse() {
    for g in presets() {
        let n = g.dim();
        let x = Point::new((0..n).map(|k| 0.3 * k as f64 - 0.7).collect());
        let e = Point::zeros(n);
        assert_eq!(g.multiply(&x, &e).unwrap(), x);
        let z = g.multiply(&x, &g.inverse(&x)).unwrap();
        assert!(z.coords().iter().all(|v| v.abs() < 1e-15));
    }
    let g = Preset::Heisenberg(1).spec();
    assert_eq!(g.inverse(&Point::new(vec![1.0, 2.0, 3.0])).coords(), &[-1.0, -2.0, -3.0]);
    assert_eq!(g.inverse(&Point::zeros(3)).coords(), &[-0.0, -0.0, -0.0]);
    assert!(g.multiply(&Point::zeros(2), &Point::zeros(3)).is_err());
}

#[test]
fn dilation_examples() {
    let h = Preset::Heisenberg(1).spec();
    assert_eq!(h.dilate(2.0, &Point::new(vec![1.0, 1.0, 1.0])).unwrap().coords(), &[2.0, 2.0, 4.0]);
    let x = Point::new(vec![0.3, -1.1, 2.5]);
    assert_eq!(h.dilate(1.0, &x).unwrap(), x);
    let e = Preset::Engel.spec();
    assert_eq!(
        e.dilate(3.0, &Point::new(vec![0.0, 0.0, 0.0, 1.0])).unwrap().coords(),
        &[0.0, 0.0, 0.0, 27.0]
    );
    assert!(h.dilate(0.0, &x).is_err());
    assert!(h.dilate(-1.0, &x).is_err());
}

#[test]
fn gauge_norm_examples() {
    let g = Preset::Heisenberg(1).spec();
    assert_eq!(g.gauge_norm(&Point::new(vec![1.0, 0.0, 0.0])), 1.0);
    assert_eq!(g.gauge_norm(&Point::new(vec![0.0, 0.0, 1.0])), 1.0);
    let v = g.gauge_norm(&Point::new(vec![1.0, 1.0, 1.0]));
    assert!((v - 3f64.powf(0.25)).abs() < 1e-15);
    let e = Preset::Engel.spec();
    assert_eq!(e.gauge_exponent(), 12);
    // exponent 12 on huge coordinates must not overflow
    let big = e.gauge_norm(&Point::new(vec![1e100, 0.0, 0.0, 0.0]));
    assert!((big / 1e100 - 1.0).abs() < 1e-12);
    let p = Point::new(vec![0.0, 0.0, 0.0, 1e-90]);
    assert!(e.gauge_norm(&p) > 0.0);
}

#[test]
fn left_distance_of_equal_points_is_zero() {
    for g in presets() {
        let x = Point::new((0..g.dim()).map(|k| 1.0 - 0.4 * k as f64).collect());
        assert_eq!(g.left_distance(&x, &x).unwrap(), 0.0);
        assert_eq!(g.right_distance(&x, &x).unwrap(), 0.0);
    }
}

#[test]
fn vector_field_examples() {
    let h = Preset::Heisenberg(1).spec();
    let x = Point::new(vec![0.7, -1.3, 2.0]);
    assert_eq!(h.left_vf_coeffs(0, &x).unwrap(), vec![1.0, 0.0, 1.3 / 2.0]);
    assert_eq!(h.right_vf_coeffs(0, &x).unwrap(), vec![1.0, 0.0, -1.3 / 2.0]);

    let e = Preset::Engel.spec();
    let x = Point::new(vec![1.5, -0.5, 0.25, 2.0]);
    let a = e.left_vf_coeffs(1, &x).unwrap();
    assert!(close(&a, &[0.0, 1.0, 1.5 / 2.0, 1.5 * 1.5 / 12.0], 1e-15), "{a:?}");

    for g in presets() {
        let n = g.dim();
        for i in 0..n {
            let mut ei = vec![0.0; n];
            ei[i] = 1.0;
            assert_eq!(g.left_vf_coeffs(i, &Point::zeros(n)).unwrap(), ei);
            assert_eq!(g.right_vf_coeffs(i, &Point::zeros(n)).unwrap(), ei);
        }
        assert!(g.left_vf_coeffs(n, &Point::zeros(n)).is_err());
    }

    let r = Preset::Euclidean(3).spec();
    let x = Point::new(vec![1.0, 2.0, 3.0]);
    for i in 0..3 {
        assert_eq!(r.left_vf_coeffs(i, &x).unwrap(), r.right_vf_coeffs(i, &x).unwrap());
    }
}

#[test]
fn coefficients_are_triangular_and_homogeneous() {
    for g in presets() {
        let frame = Frame::left(&g);
        let w = g.weights();
        for i in 0..g.dim() {
            for k in 0..g.dim() {
                let a = frame.coeff(i, k);
                if k == i {
                    assert_eq!(a.eval(&vec![0.3; g.dim()]), 1.0);
                } else if w[k] <= w[i] {
                    assert!(a.is_zero(), "a_{i}{k} should vanish in {}", g.name());
                } else if !a.is_zero() {
                    assert_eq!(a.weighted_degree(w), (w[k] - w[i]) as usize);
                }
            }
        }
    }
}

#[test]
fn preset_structure_reports() {
    let r = verify_structure(&Preset::Heisenberg(1).spec());
    assert!(r.passed(), "{r}");
    assert_eq!(r.span_rank, 3);
    let r = verify_structure(&Preset::Engel.spec());
    assert!(r.passed(), "{r}");
    assert_eq!(r.span_rank, 4);
    assert_eq!(r.span_depth, Some(3));
    assert!(verify_structure(&Preset::Heisenberg(3).spec()).passed());
    assert!(verify_structure(&Preset::Euclidean(4).spec()).passed());
}

#[test]
fn broken_antisymmetry_is_reported_first() {
    let g = GroupSpec::new("broken", vec![2, 1], &[(0, 1, 2, 1.0), (1, 0, 2, -0.5)]).unwrap();
    let r = verify_structure(&g);
    assert!(!r.passed());
    assert!(r.first_violation().unwrap().contains("anti-symmetry"), "{r}");
}

#[test]
fn presets_parse_and_print() {
    for s in ["euclidean:2", "heisenberg:1", "heisenberg:3", "engel"] {
        let p: Preset = s.parse().unwrap();
        assert_eq!(p.to_string(), s);
    }
    for s in ["heisenberg:0", "heisenberg:4", "euclidean:9", "carnot", "heisenberg:x"] {
        assert!(s.parse::<Preset>().is_err(), "{s}");
    }
    let e = Preset::Engel.spec();
    assert_eq!((e.step(), e.layer_dims()), (3, &[2usize, 1, 1][..]));
    let h = Preset::Heisenberg(2).spec();
    assert_eq!((h.step(), h.layer_dims()), (2, &[4usize, 1][..]));
    assert_eq!(Preset::Euclidean(3).spec().step(), 1);
}

// Exact polynomial identities: [X_i, X_j] = Σ c_ij^k X_k and [X_i, X̃_j] = 0.
#[test]
fn brackets_recovered_on_polynomials() {
    for g in presets() {
        let n = g.dim();
        let left = Frame::left(&g);
        let right = Frame::right(&g);
        let x = |i| Poly::var(n, i);
        let mut p = Poly::constant(n, 0.5);
        for i in 0..n {
            p = &p + &(&x(i) * &x((i + 1) % n)).scale(1.0 + i as f64);
            p = &p + &(&(&x(i) * &x(i)) * &x((i + 2) % n)).scale(0.25);
        }
        for i in 0..n {
            for j in 0..n {
                let lhs = &left.apply_poly(i, &left.apply_poly(j, &p)) - &left.apply_poly(j, &left.apply_poly(i, &p));
                let mut rhs = Poly::zero(n);
                for k in 0..n {
                    rhs = &rhs + &left.apply_poly(k, &p).scale(g.constant(i, j, k));
                }
                assert!(lhs.distance(&rhs) < 1e-12, "{} [{i},{j}]", g.name());
                let mixed = &left.apply_poly(i, &right.apply_poly(j, &p)) - &right.apply_poly(j, &left.apply_poly(i, &p));
                assert!(mixed.distance(&Poly::zero(n)) < 1e-12, "{} mixed [{i},{j}]", g.name());
            }
        }
    }
}

fn point(n: usize) -> impl Strategy<Value = Point> {
    prop::collection::vec(-2.0..2.0f64, n).prop_map(Point::new)
}

fn group_and_points(k: usize) -> impl Strategy<Value = (GroupSpec, Vec<Point>)> {
    prop_oneof![
        Just(Preset::Heisenberg(1).spec()),
        Just(Preset::Heisenberg(2).spec()),
        Just(Preset::Engel.spec()),
        Just(Preset::Euclidean(2).spec()),
    ]
    .prop_flat_map(move |g| {
        let n = g.dim();
        (Just(g), prop::collection::vec(point(n), k))
    })
}

proptest! {
    #[test]
    fn associativity((g, p) in group_and_points(3)) {
        let a = g.multiply(&g.multiply(&p[0], &p[1]).unwrap(), &p[2]).unwrap();
        let b = g.multiply(&p[0], &g.multiply(&p[1], &p[2]).unwrap()).unwrap();
        prop_assert!(close(a.coords(), b.coords(), 1e-10), "{:?} vs {:?}", a, b);
    }

    #[test]
    fn inverse_is_two_sided((g, p) in group_and_points(1)) {
        let x = &p[0];
        for z in [g.multiply(x, &g.inverse(x)).unwrap(), g.multiply(&g.inverse(x), x).unwrap()] {
            prop_assert!(z.coords().iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn gauge_is_homogeneous((g, p) in group_and_points(1), s in 0.05..20.0f64) {
        let x = &p[0];
        let lhs = g.gauge_norm(&g.dilate(s, x).unwrap());
        let rhs = s * g.gauge_norm(x);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300), "{lhs} vs {rhs}");
    }

    #[test]
    fn dilation_is_an_automorphism((g, p) in group_and_points(2), s in 0.1..5.0f64) {
        let a = g.dilate(s, &g.multiply(&p[0], &p[1]).unwrap()).unwrap();
        let b = g.multiply(&g.dilate(s, &p[0]).unwrap(), &g.dilate(s, &p[1]).unwrap()).unwrap();
        prop_assert!(close(a.coords(), b.coords(), 1e-10));
    }

    #[test]
    fn distances_are_invariant((g, p) in group_and_points(3)) {
        let (x, y, z) = (&p[0], &p[1], &p[2]);
        let d = g.left_distance(x, y).unwrap();
        let dz = g.left_distance(&g.multiply(z, x).unwrap(), &g.multiply(z, y).unwrap()).unwrap();
        prop_assert!((d - dz).abs() <= 1e-9 * (1.0 + d));
        let r = g.right_distance(x, y).unwrap();
        let rz = g.right_distance(&g.multiply(x, z).unwrap(), &g.multiply(y, z).unwrap()).unwrap();
        prop_assert!((r - rz).abs() <= 1e-9 * (1.0 + r));
        prop_assert!((g.right_distance_slice(x.coords(), y.coords()) - r).abs() <= 1e-15 * (1.0 + r));
    }

    #[test]
    fn product_matches_matrix_oracle(x in prop::collection::vec(-2.0..2.0f64, 4), y in prop::collection::vec(-2.0..2.0f64, 4)) {
        let h = Preset::Heisenberg(1).spec();
        let p = h.multiply(&Point::new(x[..3].to_vec()), &Point::new(y[..3].to_vec())).unwrap();
        prop_assert!(close(p.coords(), &matrix_product(&heisenberg_rep(), &x[..3], &y[..3]), 1e-12));
        let e = Preset::Engel.spec();
        let p = e.multiply(&Point::new(x.clone()), &Point::new(y.clone())).unwrap();
        prop_assert!(close(p.coords(), &matrix_product(&engel_rep(), &x, &y), 1e-12));
    }

    // X_i F(x) = d/ds F(x · s e_i) at s = 0, checked by a central difference in s.
    #[test]
    fn left_fields_are_left_invariant((g, p) in group_and_points(2), i in 0usize..2) {
        let n = g.dim();
        let (x, z) = (&p[0], &p[1]);
        let f = |q: &Point| -> f64 {
            let c = q.coords();
            c.iter().enumerate().map(|(k, v)| (1.0 + k as f64) * v * v).sum::<f64>() + c[0] * c[n - 1]
        };
        let fz = |q: &Point| f(&g.multiply(z, q).unwrap());
        let h = 1e-4;
        let shift = |q: &Point, s: f64| {
            let mut e = vec![0.0; n];
            e[i] = s;
            g.multiply(q, &Point::new(e)).unwrap()
        };
        let along = |func: &dyn Fn(&Point) -> f64, q: &Point| (func(&shift(q, h)) - func(&shift(q, -h))) / (2.0 * h);
        let lhs = along(&fz, x);
        let zx = g.multiply(z, x).unwrap();
        let rhs = along(&f, &zx);
        prop_assert!((lhs - rhs).abs() < 1e-6 * (1.0 + rhs.abs()), "{lhs} vs {rhs}");
        // and the coefficient table reproduces the same derivative
        let a = g.left_vf_coeffs(i, &zx).unwrap();
        let grad: Vec<f64> = (0..n).map(|k| {
            let mut up = zx.coords().to_vec();
            let mut dn = up.clone();
            up[k] += h;
            dn[k] -= h;
            (f(&Point::new(up)) - f(&Point::new(dn))) / (2.0 * h)
        }).collect();
        let via_table: f64 = a.iter().zip(&grad).map(|(a, d)| a * d).sum();
        prop_assert!((via_table - rhs).abs() < 1e-6 * (1.0 + rhs.abs()));
    }
}
