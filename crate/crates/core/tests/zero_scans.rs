#[path = "../src/test_support.rs"]
mod oracle;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use torus_zeros::kernel::{invariants, tau_derivatives, ModuliPoint};
use torus_zeros::moduli::{f_cap_with_dtau, s_orbit, ExtendedScalar, Family, FamilyIndex};
use torus_zeros::region::Rectangle;
use torus_zeros::zeros::{circle_winding, family_evaluator, scan, verify_simple, winding_count_with, ZeroConfig};
use torus_zeros::{Error, Result};

fn rect(a: f64, b: f64, c: f64, d: f64) -> Rectangle<f64> {
    Rectangle::new(a, b, c, d).unwrap()
}

fn bounds(r: &Rectangle<f64>) -> [f64; 4] {
    [r.re_min(), r.re_max(), r.im_min(), r.im_max()]
}

fn idx(k: u8) -> FamilyIndex {
    FamilyIndex::new(k).unwrap()
}

fn g2_eval(z: Complex64) -> Result<(Complex64, Complex64)> {
    let t = ModuliPoint::from_complex(z)?;
    Ok((invariants(t)?.g2, tau_derivatives(t)?.dg2))
}

fn f_cap3(z: Complex64) -> Result<(Complex64, Complex64)> {
    f_cap_with_dtau(3, ModuliPoint::from_complex(z)?)
}

#[test]
fn f3_infinity_zeros_are_simple_and_counted() {
    let region = rect(-1.0, 1.0, 0.1, 2.0);
    let v = verify_simple(idx(3), ExtendedScalar::Infinity, &region, &ZeroConfig::default()).unwrap();
    assert!(v.all_simple && v.witnesses_ok);
    assert!(v.zeros.iter().all(|z| z.winding == 1));
    let fam = Family::new(idx(3), ExtendedScalar::Infinity);
    let h = family_evaluator(fam);
    let grid = oracle::grid_zero_count(|z| h(z).unwrap().0, bounds(&v.region), 600);
    assert_eq!(grid, v.zeros.len() as i64);
    for z in &v.zeros {
        assert_eq!(circle_winding(&h, z.location.tau(), 1e-4).unwrap(), 1);
        assert!(v.region.contains(z.location.tau()));
    }
}

#[test]
fn f_cap3_zeros_are_simple() {
    let s = scan(&f_cap3, &rect(-1.0, 1.0, 0.1, 2.0), &ZeroConfig::default()).unwrap();
    assert!(!s.zeros.is_empty());
    let floor = 1e-6 * s.scale;
    assert!(s.zeros.iter().all(|z| z.winding == 1 && z.derivative_magnitude > floor));
    let grid = oracle::grid_zero_count(|z| f_cap3(z).unwrap().0, bounds(&s.region), 600);
    assert_eq!(grid, s.zeros.len() as i64);
}

#[test]
fn f0_infinity_has_no_zeros_above_one_half() {
    let v = verify_simple(idx(0), ExtendedScalar::Infinity, &rect(-0.5, 0.5, 0.5, 3.0), &ZeroConfig::default()).unwrap();
    assert!(v.zeros.is_empty());
    assert_eq!(v.total_winding, 0);
}

#[test]
fn derivative_at_zeros_of_f0_infinity_is_minus_dg2() {
    let v = verify_simple(idx(0), ExtendedScalar::Infinity, &rect(-1.0, 1.0, 0.1, 3.0), &ZeroConfig::default()).unwrap();
    assert!(!v.zeros.is_empty() && v.all_simple);
    let fam = Family::new(idx(0), ExtendedScalar::Infinity);
    for z in &v.zeros {
        let inv = invariants(z.location).unwrap();
        let d = fam.eval(z.location).unwrap().dtau;
        let expect = Complex64::new(0.0, 1.0 / std::f64::consts::PI) * (inv.g3 * 3.0 - inv.eta1 * inv.g2 * 2.0);
        assert!((d - expect).norm() < 1e-8 * expect.norm());
    }
}

#[test]
fn derivative_at_zeros_of_fk_infinity_factorizes() {
    for k in 1..=3usize {
        let v = verify_simple(idx(k as u8), ExtendedScalar::Infinity, &rect(-1.0, 1.0, 0.1, 3.0), &ZeroConfig::default()).unwrap();
        assert!(v.all_simple);
        let fam = Family::new(idx(k as u8), ExtendedScalar::Infinity);
        for z in &v.zeros {
            let inv = invariants(z.location).unwrap();
            let (i, j) = [(2, 3), (1, 3), (1, 2)][k - 1];
            let a = inv.e(k) * inv.e(k);
            let b = -inv.e(i) * inv.e(j);
            let lhs = inv.e(k) * fam.eval(z.location).unwrap().dtau;
            let rhs = Complex64::new(0.0, 0.5 / std::f64::consts::PI) * (a * 2.0 - b) * (a + b * 4.0);
            assert!((lhs - rhs).norm() < 1e-8 * rhs.norm(), "k={k} at {:?}", z.location.tau());
        }
    }
}

#[test]
fn f1_with_finite_c_is_simple() {
    let v = verify_simple(idx(1), ExtendedScalar::finite(2.0, 1.0), &rect(-1.0, 1.0, 0.1, 3.0), &ZeroConfig::default()).unwrap();
    assert!(v.all_simple && v.witnesses_ok);
    assert!(!v.zeros.is_empty());
}

#[test]
fn g2_zeros_are_the_orbit() {
    let region = rect(-1.0, 1.0, 0.1, 3.0);
    let s = scan(&g2_eval, &region, &ZeroConfig::default()).unwrap();
    let orbit = s_orbit(&s.region, 8);
    assert_eq!(orbit.len(), s.zeros.len());
    for z in &s.zeros {
        // the order of vanishing is observed, not assumed
        assert_eq!(z.winding, 1);
        assert!(orbit.iter().any(|p| (p.tau() - z.location.tau()).norm() < 1e-8));
    }
}

#[test]
fn winding_is_additive_under_quadrisection() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let f01 = family_evaluator(Family::new(idx(0), ExtendedScalar::Infinity));
    let f1c = family_evaluator(Family::new(idx(1), ExtendedScalar::finite(1.0, 2.0)));
    let cfg = ZeroConfig { max_nudges: 0, ..ZeroConfig::default() };
    let mut checked = 0;
    let mut draws = 0;
    while checked < 20 {
        draws += 1;
        assert!(draws < 200, "too many rectangles grazed a zero");
        let x0 = rng.gen_range(-1.0..0.8);
        let y0 = rng.gen_range(0.1..1.0);
        let r = rect(x0, x0 + rng.gen_range(0.1..0.8), y0, y0 + rng.gen_range(0.05..1.0));
        let (u, v) = (rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8));
        let which = checked % 3;
        let w = |q: &Rectangle<f64>| -> std::result::Result<i64, Error> {
            match which {
                0 => winding_count_with(&g2_eval, q, &cfg).map(|x| x.0),
                1 => winding_count_with(&f01, q, &cfg).map(|x| x.0),
                _ => winding_count_with(&f1c, q, &cfg).map(|x| x.0),
            }
        };
        let parent = match w(&r) {
            Ok(p) => p,
            Err(Error::BoundaryTooClose { .. }) => continue,
            Err(e) => panic!("{e}"),
        };
        let kids: std::result::Result<Vec<i64>, _> = r.split_at(u, v).iter().map(w).collect();
        match kids {
            Ok(k) => assert_eq!(k.iter().sum::<i64>(), parent, "rect {r}"),
            Err(Error::BoundaryTooClose { .. }) => continue,
            Err(e) => panic!("{e}"),
        }
        checked += 1;
    }
}
