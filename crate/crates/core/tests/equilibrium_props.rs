use nalgebra::{DMatrix, Matrix2, Matrix4};
use pev_stability::equilibrium::{
    classify, full_guess_from_planar, max_loadability, operating_point, planar_equilibrium_voltages, pv_curve,
    solve_full_equilibrium, solve_planar_equilibria, Classification, Margin,
};
use pev_stability::model::{deriv_full, deriv_planar, jacobian_full, jacobian_planar};
use pev_stability::{CircuitParams, FullState, GridInput, PlanarState};
use proptest::prelude::*;

fn paper() -> (GridInput, CircuitParams) {
    (GridInput::paper_defaults(), CircuitParams::paper_defaults())
}

#[test]
fn planar_jacobian_matches_central_differences() {
    let (u, p) = paper();
    let x = PlanarState::new(350.0, 60.0);
    let j = jacobian_planar(&x, &u, &p).unwrap();
    let f = |s: PlanarState| deriv_planar(&s, &u, &p).unwrap().to_array();
    let h = [1e-4, 1e-4];
    let mut fd = Matrix2::zeros();
    for c in 0..2 {
        let mut a = x.to_array();
        let mut b = x.to_array();
        a[c] += h[c];
        b[c] -= h[c];
        let (fa, fb) = (f(PlanarState::from_array(a)), f(PlanarState::from_array(b)));
        for r in 0..2 {
            fd[(r, c)] = (fa[r] - fb[r]) / (2.0 * h[c]);
        }
    }
    for (a, b) in j.iter().zip(fd.iter()) {
        assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "{j} vs {fd}");
    }
}

#[test]
fn full_jacobian_matches_central_differences() {
    let (u, p) = paper();
    let x = FullState::new(40.0, 3.0, 385.0, -2.0);
    let j = jacobian_full(&x, &u, &p).unwrap();
    let f = |s: FullState| deriv_full(&s, &u, &p).unwrap().to_array();
    let mut fd = Matrix4::zeros();
    for c in 0..4 {
        let h = 1e-5 * x.to_array()[c].abs().max(1.0);
        let mut a = x.to_array();
        let mut b = x.to_array();
        a[c] += h;
        b[c] -= h;
        let (fa, fb) = (f(FullState::from_array(a)), f(FullState::from_array(b)));
        for r in 0..4 {
            fd[(r, c)] = (fa[r] - fb[r]) / (2.0 * h);
        }
    }
    for (a, b) in j.iter().zip(fd.iter()) {
        assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn operating_point_spectrum() {
    let (u, p) = paper();
    let eqs = solve_planar_equilibria(&u, &p);
    assert_eq!(eqs.len(), 2);
    assert_eq!(eqs[0].classification, Classification::StableFocus);
    assert_eq!(eqs[1].classification, Classification::Saddle);
    // closed forms of the operating-point Jacobian
    let x = eqs[0].state;
    let trace = 2.0 * u.p_pev / (3.0 * p.c_eq * x.v_d * x.v_d) - p.r / p.l;
    let det = 1.0 / (p.l * p.c_eq) - 2.0 * u.p_pev * p.r / (3.0 * p.c_eq * p.l * x.v_d * x.v_d);
    let j = jacobian_planar(&x, &u, &p).unwrap();
    assert!((j.trace() - trace).abs() <= 1e-9 * trace.abs());
    assert!((j.determinant() - det).abs() <= 1e-9 * det);
    let sum: f64 = eqs[0].eigenvalues.iter().map(|l| l.re).sum();
    assert!((sum - trace).abs() <= 1e-6 * trace.abs());
}

#[test]
fn full_equilibrium_reduces_to_planar() {
    let (u, p) = paper();
    let x = operating_point(&u, &p).unwrap();
    let (eq, _) = solve_full_equilibrium(&u, &p, &full_guess_from_planar(&x, &u, &p)).unwrap();
    let r = deriv_full(&eq.state, &u, &p).unwrap();
    assert!(r.to_array().iter().all(|v| v.abs() < 1e-3));
    // the q-axis coupling moves V_d by well under a percent at R/X ≈ 10
    assert!((eq.state.v_d - x.v_d).abs() < 1e-2 * x.v_d);
    assert!(eq.is_stable());
}

#[test]
fn pv_curve_nose_and_no_load() {
    let (u, p) = paper();
    let pm = max_loadability(u.e_d, &p);
    let pts = pv_curve(u.e_d, &p, &[0.0, 0.5 * pm, pm, 1.01 * pm]);
    assert_eq!(pts[0].v_high, Some(u.e_d));
    assert_eq!(pts[0].v_low, None);
    assert!(pts[1].v_high.unwrap() > pts[1].v_low.unwrap());
    assert!((pts[2].v_high.unwrap() - u.e_d / 2.0).abs() < 1e-6 * u.e_d);
    assert_eq!(pts[2].v_high, pts[2].v_low);
    assert_eq!((pts[3].v_high, pts[3].v_low), (None, None));
}

fn char_poly_roots_2x2(m: &Matrix2<f64>) -> (f64, f64) {
    // λ² − tr λ + det: (sum of roots, product of roots)
    (m.trace(), m.determinant())
}

proptest! {
    #[test]
    fn vieta_identities(e_d in 100.0..600.0f64, frac in 0.0..0.999f64, r in 1e-3..0.05f64) {
        let p = CircuitParams { r, ..CircuitParams::paper_defaults() };
        let pw = frac * max_loadability(e_d, &p);
        let roots = planar_equilibrium_voltages(e_d, pw, &p);
        if pw > 0.0 && roots.len() == 2 {
            let (a, b) = (roots[0], roots[1]);
            prop_assert!(((a + b) - e_d).abs() <= 1e-9 * e_d);
            let prod = 2.0 * r * pw / 3.0;
            prop_assert!((a * b - prod).abs() <= 1e-9 * prod.max(1e-300));
            for v in [a, b] {
                let q = v * v - e_d * v + prod;
                prop_assert!(q.abs() <= 1e-9 * e_d * e_d);
            }
        }
    }

    #[test]
    fn spectrum_is_similarity_invariant(
        a in prop::array::uniform4(-10.0..10.0f64),
        t in prop::array::uniform4(-3.0..3.0f64),
    ) {
        let m = Matrix2::new(a[0], a[1], a[2], a[3]);
        let s = Matrix2::new(1.0 + t[0].abs(), t[1], t[2], 1.0 + t[3].abs());
        prop_assume!(s.determinant().abs() > 0.5);
        let sim = s * m * s.try_inverse().unwrap();
        let (e1, _) = classify(&DMatrix::from_column_slice(2, 2, m.as_slice()), Margin::default());
        let (e2, _) = classify(&DMatrix::from_column_slice(2, 2, sim.as_slice()), Margin::default());
        let (tr, det) = char_poly_roots_2x2(&m);
        let sum = e1[0] + e1[1];
        let prod = e1[0] * e1[1];
        let scale = 1.0 + m.norm();
        prop_assert!((sum.re - tr).abs() <= 1e-9 * scale && sum.im.abs() <= 1e-9 * scale);
        prop_assert!((prod.re - det).abs() <= 1e-9 * scale * scale && prod.im.abs() <= 1e-9 * scale * scale);
        for (x, y) in e1.iter().zip(&e2) {
            prop_assert!((x - y).norm() <= 1e-6 * scale * s.norm() * s.try_inverse().unwrap().norm());
        }
    }

    #[test]
    fn full_spectrum_matches_characteristic_polynomial(v_d in 300.0..392.0f64, i_d in 0.0..100.0f64) {
        let (u, p) = paper();
        let x = FullState::new(i_d, 0.1 * i_d, v_d, -1.0);
        let j = jacobian_full(&x, &u, &p).unwrap();
        let (eig, _) = classify(&DMatrix::from_column_slice(4, 4, j.as_slice()), Margin::default());
        // Σλ = tr J and Πλ = det J
        let sum = eig.iter().fold(pev_stability::Complex::new(0.0, 0.0), |a, l| a + l);
        let prod = eig.iter().fold(pev_stability::Complex::new(1.0, 0.0), |a, l| a * l);
        let det = j.determinant();
        prop_assert!((sum.re - j.trace()).abs() <= 1e-7 * j.norm());
        prop_assert!((prod.re - det).abs() <= 1e-6 * det.abs());
    }
}
