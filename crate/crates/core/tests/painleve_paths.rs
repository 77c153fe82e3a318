use rand::{Rng, SeedableRng};
use torus_zeros::kernel::{Lattice, ModuliPoint};
use torus_zeros::moduli::{ExtendedScalar, FamilyIndex};
use torus_zeros::painleve::*;

fn tau(re: f64, im: f64) -> ModuliPoint<f64> {
    ModuliPoint::new(re, im).unwrap()
}

fn idx(k: u8) -> FamilyIndex {
    FamilyIndex::new(k).unwrap()
}

fn spec_path() -> Vec<ModuliPoint<f64>> {
    straight_path(tau(0.2, 0.8), tau(0.2, 2.0), 40)
}

fn seeded_cs(seed: u64) -> Vec<ExtendedScalar<f64>> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut cs = vec![ExtendedScalar::Infinity];
    cs.extend((0..9).map(|_| ExtendedScalar::finite(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0))));
    cs
}

fn seeded_path(rng: &mut impl Rng) -> Vec<ModuliPoint<f64>> {
    let a = tau(rng.gen_range(-0.5..0.5), rng.gen_range(0.5..1.0));
    let b = tau(rng.gen_range(-0.5..0.5), rng.gen_range(1.2..2.0));
    straight_path(a, b, 40)
}

#[test]
fn level1_k2_on_reference_path() {
    let fam = RiccatiFamily::new(idx(2), ExtendedScalar::finite(1.0, 2.0), 1).unwrap();
    let r = riccati_residual(fam, &spec_path(), &PathConfig::default()).unwrap();
    assert!(r.max_residual < 1e-7, "{:e}", r.max_residual);
}

#[test]
fn level0_k0_infinity_on_reference_path() {
    let fam = RiccatiFamily::new(idx(0), ExtendedScalar::Infinity, 0).unwrap();
    let r = riccati_residual(fam, &spec_path(), &PathConfig::default()).unwrap();
    assert!(r.max_residual < 1e-8, "{:e}", r.max_residual);
    assert!(r.skipped.is_empty());
}

#[test]
fn riccati_certificates_both_levels() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
    for level in 0..=1u8 {
        let tol = if level == 0 { 1e-8 } else { 1e-7 };
        for k in 0..=3u8 {
            let mut worst = 0.0f64;
            for c in seeded_cs(100 + k as u64) {
                let path = seeded_path(&mut rng);
                let fam = RiccatiFamily::new(idx(k), c, level).unwrap();
                let r = riccati_residual(fam, &path, &PathConfig::default()).unwrap();
                worst = worst.max(r.max_residual);
            }
            println!("level {level} k {k}: worst {worst:e}");
            assert!(worst < tol, "level {level} k {k}: {worst:e}");
        }
    }
}

#[test]
fn second_order_pvi_residual() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(78);
    for k in 0..=3u8 {
        let mut worst = 0.0f64;
        for c in seeded_cs(200 + k as u64) {
            let path = seeded_path(&mut rng);
            let fam = RiccatiFamily::new(idx(k), c, 1).unwrap();
            let r = pvi_path_residual(fam, &path, &PathConfig::default()).unwrap();
            worst = worst.max(r.max_residual);
        }
        println!("pvi k {k}: worst {worst:e}");
        assert!(worst < 1e-5, "k {k}: {worst:e}");
    }
}

#[test]
fn level0_does_not_solve_level1_pvi() {
    // the level-0 family satisfies PVI(1/8, ...) but not PVI(9/8, ...)
    let fam = RiccatiFamily::new(idx(1), ExtendedScalar::finite(0.5, -1.0), 0).unwrap();
    let path = spec_path();
    let cfg = PathConfig::default();
    let own = pvi_path_residual(fam, &path, &cfg).unwrap();
    assert!(own.max_residual < 1e-5);
    let (keep, _) = excise(&fam, &path, &cfg).unwrap();
    let wrong = PviParams::level(1).unwrap();
    let worst = keep
        .iter()
        .map(|p| {
            let (l, lt, ltt, chart) = lambda_jet(&fam, *p, &cfg, true).unwrap();
            let (r, s) = pvi_residual(&wrong, l, lt, ltt.unwrap(), chart.t);
            r / s
        })
        .fold(0.0, f64::max);
    assert!(worst > 1e-3);
}

#[test]
fn okamoto_routes_agree() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(79);
    let mut worst = 0.0f64;
    for j in 0..100 {
        let k = (j % 4) as u8;
        let c = if j % 10 == 0 {
            ExtendedScalar::Infinity
        } else {
            ExtendedScalar::finite(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0))
        };
        let t = tau(rng.gen_range(-0.5..0.5), rng.gen_range(0.5..2.0));
        worst = worst.max(okamoto_route_gap(idx(k), c, t).unwrap());
    }
    assert!(worst < 1e-9, "{worst:e}");
}

#[test]
fn hamilton_first_equation_on_level1_paths() {
    for k in 0..=3u8 {
        let r = hamilton_path_residual(idx(k), ExtendedScalar::finite(-1.0, 0.5), &spec_path(), &PathConfig::default()).unwrap();
        assert!(r.max_residual < 1e-6, "k {k}: {:e}", r.max_residual);
    }
}

#[test]
fn mu_from_derivative_matches_transformation() {
    let c = ExtendedScalar::finite(3.0, -1.0);
    let t0 = tau(0.1, 1.3);
    let cfg = PathConfig::default();
    for k in 0..=3u8 {
        let lat = Lattice::new(t0).unwrap();
        let s = okamoto_forward(&level0_state(idx(k), c, lat.invariants()).unwrap()).unwrap();
        let fam = RiccatiFamily::new(idx(k), c, 1).unwrap();
        let (l, lt, _, chart) = lambda_jet(&fam, t0, &cfg, false).unwrap();
        let mu = mu_from_derivative(l, lt, chart.t);
        let m = s.mu.unwrap();
        assert!((mu - m).norm() < 1e-7 * m.norm().max(1.0), "k {k}");
    }
}

#[test]
fn poles_are_simple_in_the_t_chart() {
    use torus_zeros::region::Rectangle;
    use torus_zeros::zeros::{verify_simple, ZeroConfig};
    let region = Rectangle::new(-1.0, 1.0, 0.3, 2.0).unwrap();
    let c = ExtendedScalar::finite(2.0, 1.0);
    let mut checked = 0;
    for k in 0..=3u8 {
        let v = verify_simple(idx(k), c, &region, &ZeroConfig::default()).unwrap();
        for z in &v.zeros {
            let (wt, wl) = pole_simplicity(idx(k), c, z.location, 1e-4).unwrap();
            assert_eq!((wt, wl), (1, 1), "k {k} at {:?}", z.location.tau());
            let lat = Lattice::new(z.location).unwrap();
            let (num, den) = wp_p_parts(1, idx(k), c, lat.invariants());
            let fam = torus_zeros::moduli::Family::new(idx(k), c);
            let e = fam.eval_with(lat.invariants(), &lat.tau_derivatives());
            let w = fam.witness(lat.invariants(), e.x, e.y);
            let f_scale = torus_zeros::moduli::family_term_scale(&fam, lat.invariants(), e.x, e.y);
            let y_factor = if k == 0 { e.y.norm() } else { 1.0 };
            assert!(den.norm() < 1e-8 * f_scale * y_factor);
            assert!(num.norm() > 1e-6 * w.scale);
            checked += 1;
        }
    }
    assert!(checked > 0);
}
