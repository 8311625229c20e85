use cmcf_core::calculus::{apply_vf, eps_gradient, horizontal_gradient, ordered_second_derivative, second_derivative};
use cmcf_core::grid::{AxisBoundary, Grid, ScalarField};
use cmcf_core::group::{Frame, Point, Preset};
use cmcf_core::poly::Poly;
use proptest::prelude::*;

fn linear_field(grid: Grid, f: impl Fn(&[f64]) -> f64 + Sync + Send) -> ScalarField {
    let n = grid.dim();
    ScalarField::from_fn(grid, 0.0, f).unwrap().with_boundary(vec![AxisBoundary::Linear; n])
}

fn interior_max_error(u: &ScalarField, shells: usize, exact: impl Fn(&[f64]) -> f64) -> f64 {
    (0..u.len())
        .filter(|&p| u.grid.shell_depth(p) >= shells)
        .map(|p| (u.values[p] - exact(&u.grid.point(p))).abs())
        .fold(0.0, f64::max)
}

// Quartic test polynomial and its exact derivatives under the Heisenberg frame:
// X_1 = ∂_1 − x_2/2 ∂_3, X_2 = ∂_2 + x_1/2 ∂_3.
fn quartic(x: &[f64]) -> f64 {
    x[0].powi(4) + x[0] * x[1].powi(3) + x[1] * x[1] * x[2] + x[2].powi(2) * x[0]
}

fn quartic_grad(x: &[f64]) -> [f64; 3] {
    [
        4.0 * x[0].powi(3) + x[1].powi(3) + x[2] * x[2],
        3.0 * x[0] * x[1] * x[1] + 2.0 * x[1] * x[2],
        x[1] * x[1] + 2.0 * x[2] * x[0],
    ]
}

fn quartic_x1(x: &[f64]) -> f64 {
    let d = quartic_grad(x);
    d[0] - 0.5 * x[1] * d[2]
}

fn heisenberg_grid(h: f64) -> Grid {
    Grid::cube(3, 1.0, h).unwrap()
}

#[test]
fn vector_field_converges_at_second_order() {
    let g = Preset::Heisenberg(1).spec();
    let frame = Frame::left(&g);
    let err = |h: f64| {
        let u = linear_field(heisenberg_grid(h), quartic);
        interior_max_error(&apply_vf(&u, &frame, 0).unwrap(), 1, quartic_x1)
    };
    let (e1, e2) = (err(0.1), err(0.05));
    let ratio = e1 / e2;
    assert!((3.5..=4.5).contains(&ratio), "errors {e1} {e2} ratio {ratio}");
}

#[test]
fn second_derivative_converges_at_second_order() {
    let g = Preset::Heisenberg(1).spec();
    let frame = Frame::left(&g);
    // (X_1 X_1 u) = ∂_11 u − x_2 ∂_13 u + x_2²/4 ∂_33 u
    let exact = |x: &[f64]| {
        let d11 = 12.0 * x[0] * x[0];
        let d13 = 2.0 * x[2];
        let d33 = 2.0 * x[0];
        d11 - x[1] * d13 + 0.25 * x[1] * x[1] * d33
    };
    let err = |h: f64| {
        let u = linear_field(heisenberg_grid(h), quartic);
        interior_max_error(&second_derivative(&u, &frame, 0, 0, 0.0).unwrap(), 1, exact)
    };
    let (e1, e2) = (err(0.1), err(0.05));
    let ratio = e1 / e2;
    assert!((3.5..=4.5).contains(&ratio), "errors {e1} {e2} ratio {ratio}");
}

#[test]
fn commutator_recovers_vertical_field() {
    let g = Preset::Heisenberg(1).spec();
    let frame = Frame::left(&g);
    let f = |x: &[f64]| (x[0] + 0.3 * x[2]).sin() * (0.7 * x[1]).cos() + 0.2 * x[2] * x[2] * x[1];
    let err = |h: f64| {
        let u = linear_field(heisenberg_grid(h), f);
        let a = ordered_second_derivative(&u, &frame, 0, 1).unwrap();
        let b = ordered_second_derivative(&u, &frame, 1, 0).unwrap();
        let x3 = apply_vf(&u, &frame, 2).unwrap();
        (0..u.len())
            .filter(|&p| u.grid.shell_depth(p) >= 2)
            .map(|p| (a.values[p] - b.values[p] - x3.values[p]).abs())
            .fold(0.0, f64::max)
    };
    // the frozen-coefficient stencil reproduces the bracket identity exactly
    for h in [0.1, 0.05] {
        let e = err(h);
        assert!(e < 1e-12, "h={h}: {e}");
    }
}

#[test]
fn far_field_shells_give_zero_derivatives() {
    let g = Preset::Heisenberg(1).spec();
    let frame = Frame::left(&g);
    let grid = Grid::cube(3, 1.5, 0.125).unwrap();
    let far = 2.0;
    let u = ScalarField::from_fn(grid, far, |x| {
        let r2 = x.iter().map(|v| v * v).sum::<f64>();
        if r2 < 1.0 {
            far - (1.0 - r2).powi(3)
        } else {
            far
        }
    })
    .unwrap();
    let outer: Vec<usize> = (0..u.len()).filter(|&p| u.grid.shell_depth(p) == 0).collect();
    assert!(outer.iter().all(|&p| u.values[p] == far));
    for i in 0..3 {
        let d = apply_vf(&u, &frame, i).unwrap();
        assert!(outer.iter().all(|&p| d.values[p] == 0.0));
        for j in 0..3 {
            let d = second_derivative(&u, &frame, i, j, 0.5).unwrap();
            assert!(outer.iter().all(|&p| d.values[p] == 0.0));
        }
    }
}

#[test]
fn plane_gradient_vanishes_on_the_axis() {
    let g = Preset::Heisenberg(1).spec();
    let frame = Frame::left(&g);
    let u = linear_field(Grid::cube(3, 1.0, 0.25).unwrap(), |x| x[2]);
    let grad = horizontal_gradient(&u, &frame).unwrap();
    for p in 0..u.len() {
        let x = u.grid.point(p);
        let v = grad.at(p);
        assert!((v[0] + x[1] / 2.0).abs() < 1e-14 && (v[1] - x[0] / 2.0).abs() < 1e-14);
        if x[0] == 0.0 && x[1] == 0.0 {
            assert_eq!(grad.norms()[p], 0.0);
        }
    }
}

#[test]
fn engel_second_derivatives_match_polynomial_algebra() {
    let g = Preset::Engel.spec();
    let frame = Frame::left(&g);
    let grid = Grid::cube(4, 1.0, 0.125).unwrap();
    // cubic with exact central second differences up to rounding
    let f = |x: &[f64]| x[3] * x[0] + x[2] * x[1] * x[1] + 0.5 * x[0] * x[0] * x[2];
    let u = linear_field(grid, f);
    let v = |i| Poly::var(4, i);
    let p = &(&(&v(3) * &v(0)) + &(&(&v(2) * &v(1)) * &v(1))) + &(&(&v(0) * &v(0)) * &v(2)).scale(0.5);
    for (i, j) in [(0, 0), (0, 1), (1, 1)] {
        let exact = frame.sym_second_poly(i, j, &p);
        let num = second_derivative(&u, &frame, i, j, 0.0).unwrap();
        let e = interior_max_error(&num, 1, |x| exact.eval(x));
        assert!(e < 1e-10, "({i},{j}) error {e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn affine_fields_are_exact(c in prop::collection::vec(-3.0..3.0f64, 4)) {
        let g = Preset::Heisenberg(1).spec();
        let left = Frame::left(&g);
        let right = Frame::right(&g);
        let f = |x: &[f64]| c[0] + c[1] * x[0] + c[2] * x[1] + c[3] * x[2];
        let u = linear_field(Grid::cube(3, 1.0, 0.25).unwrap(), f);
        for (frame, is_left) in [(&left, true), (&right, false)] {
            for i in 0..3 {
                let d = apply_vf(&u, frame, i).unwrap();
                for p in 0..u.len() {
                    let x = Point::new(u.grid.point(p));
                    let a = if is_left { g.left_vf_coeffs(i, &x) } else { g.right_vf_coeffs(i, &x) }.unwrap();
                    let exact = a[0] * c[1] + a[1] * c[2] + a[2] * c[3];
                    prop_assert!((d.values[p] - exact).abs() < 1e-12 * (1.0 + exact.abs()));
                }
            }
        }
    }

    #[test]
    fn symmetrized_second_derivative_is_bitwise_symmetric(
        a in -2.0..2.0f64, b in -2.0..2.0f64, eps in 0.0..1.0f64,
    ) {
        let g = Preset::Engel.spec();
        let frame = Frame::left(&g);
        let u = linear_field(Grid::cube(4, 1.0, 0.25).unwrap(), |x| {
            (a * x[0] + x[3]).sin() + b * x[1] * x[2] * x[2]
        });
        for i in 0..4 {
            for j in 0..i {
                let s = second_derivative(&u, &frame, i, j, eps).unwrap();
                let t = second_derivative(&u, &frame, j, i, eps).unwrap();
                prop_assert_eq!(&s.values, &t.values);
            }
        }
    }

    #[test]
    fn eps_gradient_reduces_to_horizontal(eps in 0.0..2.0f64, s in -2.0..2.0f64) {
        let g = Preset::Heisenberg(1).spec();
        let frame = Frame::left(&g);
        let u = linear_field(Grid::cube(3, 1.0, 0.25).unwrap(), |x| x[0] + s * x[2]);
        let h = horizontal_gradient(&u, &frame).unwrap();
        let e = eps_gradient(&u, &frame, eps).unwrap();
        let z = eps_gradient(&u, &frame, 0.0).unwrap();
        for p in 0..u.len() {
            prop_assert_eq!(z.at(p)[2], 0.0);
            prop_assert!((z.norms()[p] - h.norms()[p]).abs() < 1e-15);
            prop_assert!((e.at(p)[2] - eps * s).abs() < 1e-12);
        }
        let one = linear_field(Grid::cube(3, 1.0, 0.25).unwrap(), |x| x[0]);
        let n = eps_gradient(&one, &frame, eps).unwrap().norms();
        prop_assert!(n.iter().all(|v| (v - 1.0).abs() < 1e-14));
    }
}
