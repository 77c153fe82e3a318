//! Holomorphic functions of the modulus built from the lattice invariants:
//! the families `f_{k,C}`, `F_k = η₁ + e_k`, the maps `φ_±` and `φ_k`, the
//! orbit `𝔖 = SL(2,ℤ)·ρ` and the modular transformation of `(η₂, η₁)`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{DTauInvariants, Lattice, LatticeInvariants, ModuliPoint};
use crate::region::Rectangle;
use crate::scalar::{lit, two_pi_i, Real};

/// A point of `ℂ ∪ {∞}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtendedScalar<F> {
    Finite(Complex<F>),
    Infinity,
}

impl<F: Real> ExtendedScalar<F> {
    pub fn finite(re: F, im: F) -> Self {
        ExtendedScalar::Finite(Complex::new(re, im))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtendedScalar::Infinity)
    }

    pub fn as_finite(&self) -> Option<Complex<F>> {
        match self {
            ExtendedScalar::Finite(z) => Some(*z),
            ExtendedScalar::Infinity => None,
        }
    }
}

impl<F: Real> fmt::Display for ExtendedScalar<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedScalar::Infinity => write!(f, "inf"),
            ExtendedScalar::Finite(z) if z.im.is_sign_negative() => write!(f, "{}-{}i", z.re, -z.im),
            ExtendedScalar::Finite(z) => write!(f, "{}+{}i", z.re, z.im),
        }
    }
}

/// Parses `inf`, `∞`, `a`, `a+bi`, `a-bi`, `bi`.
impl<F: Real> FromStr for ExtendedScalar<F> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || Error::InvalidArgument(format!("cannot parse complex value '{s}'"));
        if matches!(t.to_ascii_lowercase().as_str(), "inf" | "infinity" | "∞") {
            return Ok(ExtendedScalar::Infinity);
        }
        let num = |x: &str| x.parse::<f64>().map_err(|_| bad());
        let z = if let Some(body) = t.strip_suffix('i') {
            // split at the last sign that is not an exponent sign
            let bytes = body.as_bytes();
            let split = (1..bytes.len())
                .rev()
                .find(|&j| (bytes[j] == b'+' || bytes[j] == b'-') && !matches!(bytes[j - 1], b'e' | b'E'));
            let (re, im) = match split {
                Some(j) => (num(&body[..j])?, &body[j..]),
                None => (0.0, body),
            };
            let im = match im {
                "" | "+" => 1.0,
                "-" => -1.0,
                x => num(x)?,
            };
            (re, im)
        } else {
            (num(&t)?, 0.0)
        };
        Ok(ExtendedScalar::Finite(Complex::new(lit(z.0), lit(z.1))))
    }
}

/// Selects `f_{0,C}` (k = 0) or the half period `ω_k/2` (k = 1, 2, 3).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct FamilyIndex(u8);

impl FamilyIndex {
    pub fn new(k: u8) -> Result<Self> {
        if k > 3 {
            return Err(Error::InvalidArgument(format!("family index must be 0..=3, got {k}")));
        }
        Ok(FamilyIndex(k))
    }

    pub fn k(&self) -> usize {
        self.0 as usize
    }

    pub fn is_zero(&self) -> bool {
        self.0 == 0
    }

    /// `ω_k` with `ω₁ = 1, ω₂ = τ, ω₃ = 1 + τ`; `None` for k = 0.
    pub fn omega<F: Real>(&self, tau: &ModuliPoint<F>) -> Option<Complex<F>> {
        (self.0 > 0).then(|| tau.period(self.k()))
    }
}

impl TryFrom<u8> for FamilyIndex {
    type Error = Error;
    fn try_from(k: u8) -> Result<Self> {
        FamilyIndex::new(k)
    }
}

impl From<FamilyIndex> for u8 {
    fn from(k: FamilyIndex) -> u8 {
        k.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhiBranch {
    Plus,
    Minus,
    K1,
    K2,
    K3,
}

impl PhiBranch {
    pub fn from_k(k: usize) -> Option<Self> {
        match k {
            1 => Some(PhiBranch::K1),
            2 => Some(PhiBranch::K2),
            3 => Some(PhiBranch::K3),
            _ => None,
        }
    }

    pub fn k(&self) -> Option<usize> {
        match self {
            PhiBranch::K1 => Some(1),
            PhiBranch::K2 => Some(2),
            PhiBranch::K3 => Some(3),
            _ => None,
        }
    }

    /// `+1` for `φ₊`, `-1` for `φ₋`.
    fn sign(&self) -> Option<f64> {
        match self {
            PhiBranch::Plus => Some(1.0),
            PhiBranch::Minus => Some(-1.0),
            _ => None,
        }
    }
}

/// An element of SL(2,ℤ).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModularMatrix {
    a: i64,
    b: i64,
    c: i64,
    d: i64,
}

impl ModularMatrix {
    pub fn new(a: i64, b: i64, c: i64, d: i64) -> Result<Self> {
        if a * d - b * c != 1 {
            return Err(Error::InvalidArgument(format!(
                "matrix [[{a},{b}],[{c},{d}]] has determinant {}",
                a * d - b * c
            )));
        }
        Ok(ModularMatrix { a, b, c, d })
    }

    pub fn identity() -> Self {
        ModularMatrix { a: 1, b: 0, c: 0, d: 1 }
    }

    /// `τ ↦ τ + 1`.
    pub fn t() -> Self {
        ModularMatrix { a: 1, b: 1, c: 0, d: 1 }
    }

    /// `τ ↦ −1/τ`.
    pub fn s() -> Self {
        ModularMatrix { a: 0, b: -1, c: 1, d: 0 }
    }

    pub fn entries(&self) -> [i64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn height(&self) -> i64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs())
    }

    pub fn compose(&self, o: &ModularMatrix) -> ModularMatrix {
        ModularMatrix {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    pub fn apply<F: Real>(&self, tau: &ModuliPoint<F>) -> ModuliPoint<F> {
        let t = tau.tau();
        let num = t * lit::<F>(self.a as f64) + lit::<F>(self.b as f64);
        let den = t * lit::<F>(self.c as f64) + lit::<F>(self.d as f64);
        // Im(γτ) = Im τ / |cτ+d|² > 0, so this cannot fail
        ModuliPoint::from_complex(num / den).expect("SL(2,Z) preserves the upper half plane")
    }

    /// The automorphy factor `cτ + d`.
    pub fn factor<F: Real>(&self, tau: &ModuliPoint<F>) -> Complex<F> {
        tau.tau() * lit::<F>(self.c as f64) + lit::<F>(self.d as f64)
    }
}

/// Everything a caller may want from one evaluation of `f_{k,C}` at τ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyEval<F> {
    pub value: Complex<F>,
    pub dtau: Complex<F>,
    /// Homogeneous coordinates: `(Cη₁ − η₂, C − τ)`, or `(η₁, 1)` for C = ∞.
    pub x: Complex<F>,
    pub y: Complex<F>,
}

/// Companion expression that cannot vanish together with `f_{k,C}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaWitness<F> {
    pub value: Complex<F>,
    /// Sum of the moduli of the terms forming `value`.
    pub scale: F,
}

impl<F: Real> LemmaWitness<F> {
    pub fn relative(&self) -> F {
        self.value.norm() / self.scale.max(F::min_positive_value())
    }
}

/// `f_{k,C}` as a function of τ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Family<F> {
    pub k: FamilyIndex,
    pub c: ExtendedScalar<F>,
}

impl<F: Real> Family<F> {
    pub fn new(k: FamilyIndex, c: ExtendedScalar<F>) -> Self {
        Family { k, c }
    }

    fn coords(&self, inv: &LatticeInvariants<F>, d: &DTauInvariants<F>) -> [Complex<F>; 4] {
        let tau = inv.tau.tau();
        match self.c {
            ExtendedScalar::Infinity => [inv.eta1, Complex::new(F::one(), F::zero()), d.deta1, Complex::new(F::zero(), F::zero())],
            ExtendedScalar::Finite(cc) => [
                cc * inv.eta1 - inv.eta2,
                cc - tau,
                (cc - tau) * d.deta1 - inv.eta1,
                Complex::new(-F::one(), F::zero()),
            ],
        }
    }

    /// Value and τ-derivative from precomputed invariants.
    pub fn eval_with(&self, inv: &LatticeInvariants<F>, d: &DTauInvariants<F>) -> FamilyEval<F> {
        let [x, y, dx, dy] = self.coords(inv, d);
        let (g2, dg2) = (inv.g2, d.dg2);
        let (value, dtau) = if self.k.is_zero() {
            let twelve = lit::<F>(12.0);
            (
                x * x * twelve - g2 * y * y,
                x * dx * lit::<F>(24.0) - dg2 * y * y - g2 * y * dy * lit::<F>(2.0),
            )
        } else {
            let k = self.k.k();
            let (e, de) = (inv.e(k), d.de(k));
            let three = lit::<F>(3.0);
            let half = lit::<F>(0.5);
            let coef = g2 * half - e * e * three;
            let dcoef = dg2 * half - e * de * lit::<F>(6.0);
            (
                e * x * three + coef * y,
                de * x * three + e * dx * three + dcoef * y + coef * dy,
            )
        };
        FamilyEval { value, dtau, x, y }
    }

    pub fn eval(&self, tau: ModuliPoint<F>) -> Result<FamilyEval<F>> {
        let lat = Lattice::new(tau)?;
        Ok(self.eval_with(lat.invariants(), &lat.tau_derivatives()))
    }

    /// The expression that cannot vanish at a zero of this family: for k ≥ 1
    /// `(g₂/2 − 3e_k²)x + (g₂/4)e_k y`, for k = 0 `−4x³ − g₂xy² + 2g₃y³`.
    pub fn witness(&self, inv: &LatticeInvariants<F>, x: Complex<F>, y: Complex<F>) -> LemmaWitness<F> {
        let terms: Vec<Complex<F>> = if self.k.is_zero() {
            vec![
                -x * x * x * lit::<F>(4.0),
                -inv.g2 * x * y * y,
                inv.g3 * y * y * y * lit::<F>(2.0),
            ]
        } else {
            let e = inv.e(self.k.k());
            vec![
                (inv.g2 * lit::<F>(0.5) - e * e * lit::<F>(3.0)) * x,
                inv.g2 * lit::<F>(0.25) * e * y,
            ]
        };
        LemmaWitness {
            value: terms.iter().fold(Complex::new(F::zero(), F::zero()), |a, t| a + t),
            scale: terms.iter().fold(F::zero(), |a, t| a + t.norm()),
        }
    }
}

pub fn f_value<F: Real>(k: FamilyIndex, c: ExtendedScalar<F>, tau: ModuliPoint<F>) -> Result<Complex<F>> {
    let inv = Lattice::new(tau)?.invariants().clone();
    let d = zero_dtau(&inv);
    Ok(Family::new(k, c).eval_with(&inv, &d).value)
}

pub fn f_dtau<F: Real>(k: FamilyIndex, c: ExtendedScalar<F>, tau: ModuliPoint<F>) -> Result<Complex<F>> {
    Family::new(k, c).eval(tau).map(|e| e.dtau)
}

fn zero_dtau<F: Real>(inv: &LatticeInvariants<F>) -> DTauInvariants<F> {
    let z = Complex::new(F::zero(), F::zero());
    DTauInvariants {
        deta1: z,
        de1: z,
        de2: z,
        de3: z,
        dg2: z,
        dg3: z,
        tau: inv.tau,
    }
}

fn check_half_period(k: usize) -> Result<()> {
    if !(1..=3).contains(&k) {
        return Err(Error::InvalidArgument(format!("half period index must be 1..=3, got {k}")));
    }
    Ok(())
}

/// `F_k = η₁ + e_k`.
pub fn f_cap<F: Real>(k: usize, tau: ModuliPoint<F>) -> Result<Complex<F>> {
    check_half_period(k)?;
    let lat = Lattice::new(tau)?;
    let inv = lat.invariants();
    Ok(inv.eta1 + inv.e(k))
}

/// `(F_k, F_k′)`.
pub fn f_cap_with_dtau<F: Real>(k: usize, tau: ModuliPoint<F>) -> Result<(Complex<F>, Complex<F>)> {
    check_half_period(k)?;
    let lat = Lattice::new(tau)?;
    let inv = lat.invariants();
    let d = lat.tau_derivatives();
    Ok((inv.eta1 + inv.e(k), d.deta1 + d.de(k)))
}

/// `φ` on a branch together with `φ′`; `None` marks a pole.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiEval<F> {
    pub value: ExtendedScalar<F>,
    /// `None` at poles and, for `φ_±`, on 𝔖 where `√g₂` is not differentiable.
    pub dtau: Option<Complex<F>>,
    /// Denominator of the correction term: `η₁ ± √(g₂/12)` or `f_{k,∞}`.
    pub denominator: Complex<F>,
}

/// Relative size below which a denominator counts as an exact zero.
const POLE_EPS: f64 = 1e-14;
/// `|g₂/12| / |η₁|²` below which τ is treated as a point of 𝔖.
const ORBIT_EPS: f64 = 1e-12;

pub fn phi_with<F: Real>(branch: PhiBranch, inv: &LatticeInvariants<F>, d: &DTauInvariants<F>) -> PhiEval<F> {
    let tau = inv.tau.tau();
    let one = Complex::new(F::one(), F::zero());
    if let Some(sign) = branch.sign() {
        let sign = lit::<F>(sign);
        let on_orbit = (inv.g2 / lit::<F>(12.0)).norm() <= lit::<F>(ORBIT_EPS) * (inv.eta1 * inv.eta1).norm();
        if on_orbit {
            // removable singularity: both branches take the limit η₂/η₁
            return PhiEval { value: ExtendedScalar::Finite(inv.eta2 / inv.eta1), dtau: None, denominator: inv.eta1 };
        }
        let root = inv.sqrt_g2_12();
        let den = inv.eta1 + root * sign;
        if den.norm() <= lit::<F>(POLE_EPS) * (inv.eta1.norm() + root.norm()) {
            return PhiEval { value: ExtendedScalar::Infinity, dtau: None, denominator: den };
        }
        let value = tau - two_pi_i::<F>() / den;
        let droot = d.dg2 / (root * lit::<F>(24.0));
        let dtau = Some(one + two_pi_i::<F>() * (d.deta1 + droot * sign) / (den * den));
        PhiEval { value: ExtendedScalar::Finite(value), dtau, denominator: den }
    } else {
        let k = branch.k().expect("k branch");
        let fam = Family::new(FamilyIndex(k as u8), ExtendedScalar::Infinity).eval_with(inv, d);
        let e = inv.e(k);
        let den = fam.value;
        let scale = (e * inv.eta1).norm() * lit::<F>(3.0) + inv.g2.norm() * lit::<F>(0.5) + (e * e).norm() * lit::<F>(3.0);
        if den.norm() <= lit::<F>(POLE_EPS) * scale {
            return PhiEval { value: ExtendedScalar::Infinity, dtau: None, denominator: den };
        }
        let six_pi_i = two_pi_i::<F>() * lit::<F>(3.0);
        let value = tau - six_pi_i * e / den;
        let dtau = one - six_pi_i * (d.de(k) * den - e * fam.dtau) / (den * den);
        PhiEval { value: ExtendedScalar::Finite(value), dtau: Some(dtau), denominator: den }
    }
}

/// `φ_±(τ) = τ − 2πi/(η₁ ± √(g₂/12))` or `φ_k(τ) = τ − 6πi e_k/f_{k,∞}`.
///
/// On 𝔖 both `φ_±` equal `η₂/η₁` (since `τη₁ − 2πi = η₂`); that limit is
/// returned directly when `g₂` is negligible, avoiding the square root of
/// rounding noise.
pub fn phi<F: Real>(branch: PhiBranch, tau: ModuliPoint<F>) -> Result<ExtendedScalar<F>> {
    let lat = Lattice::new(tau)?;
    Ok(phi_with(branch, lat.invariants(), &lat.tau_derivatives()).value)
}

/// Points `γρ` inside `region` over all `γ ∈ SL(2,ℤ)` of height at most
/// `height_bound`, sorted by imaginary then real part.
pub fn s_orbit<F: Real>(region: &Rectangle<F>, height_bound: i64) -> Vec<ModuliPoint<F>> {
    let rho = ModuliPoint::<f64>::rho();
    let h = height_bound.max(0);
    let mut found: Vec<Complex<f64>> = Vec::new();
    let r = region.cast::<f64>();
    for c in 0..=h {
        for d in -h..=h {
            if c == 0 && d != 1 {
                continue;
            }
            if gcd(c, d) != 1 {
                continue;
            }
            let den = rho.tau() * c as f64 + d as f64;
            for a in -h..=h {
                for b in -h..=h {
                    if a * d - b * c != 1 {
                        continue;
                    }
                    let w = (rho.tau() * a as f64 + b as f64) / den;
                    if r.contains(w) && !found.iter().any(|p| (p - w).norm() < 1e-10) {
                        found.push(w);
                    }
                }
            }
        }
    }
    found.sort_by(|p, q| p.im.total_cmp(&q.im).then(p.re.total_cmp(&q.re)));
    found
        .into_iter()
        .map(|w| ModuliPoint::new(lit(w.re), lit(w.im)).expect("orbit point in upper half plane"))
        .collect()
}

/// Height bound under which [`s_orbit`] is complete for `region`.
///
/// `Im γρ = (√3/2)/|cρ+d|²` and `|cρ+d|² ≥ ¾ max(c², d²)` bound `c, d`;
/// `a, b` then follow from `|Re γρ|` and `ad − bc = 1`.
pub fn orbit_height_for<F: Real>(region: &Rectangle<F>) -> i64 {
    let r = region.cast::<f64>();
    let cd = (2.0 / (3f64.sqrt() * r.im_min())).sqrt().ceil() as i64;
    let re = r.re_min().abs().max(r.re_max().abs()).ceil() as i64 + 1;
    cd * (re + 1) + 1
}

/// All of `𝔖` inside `region`.
pub fn s_orbit_in<F: Real>(region: &Rectangle<F>) -> Vec<ModuliPoint<F>> {
    s_orbit(region, orbit_height_for(region))
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `(η₂(γτ), η₁(γτ)) = (cτ+d)·γ·(η₂(τ), η₁(τ))`.
pub fn eta_transform<F: Real>(m: &ModularMatrix, tau: ModuliPoint<F>) -> Result<(Complex<F>, Complex<F>)> {
    let inv = Lattice::new(tau)?.invariants().clone();
    Ok(eta_transform_with(m, &inv))
}

pub fn eta_transform_with<F: Real>(m: &ModularMatrix, inv: &LatticeInvariants<F>) -> (Complex<F>, Complex<F>) {
    let [a, b, c, d] = m.entries().map(|v| lit::<F>(v as f64));
    let j = m.factor(&inv.tau);
    (
        j * (inv.eta2 * a + inv.eta1 * b),
        j * (inv.eta2 * c + inv.eta1 * d),
    )
}

/// `e_k`-determinant from the nonvanishing argument for `f_{k,C}`:
/// returns `(det, (e_i − e_k)(e_j − e_k)(e_i − e_j)²)`.
pub fn companion_determinant<F: Real>(k: usize, inv: &LatticeInvariants<F>) -> (Complex<F>, Complex<F>) {
    let e = inv.e(k);
    let (i, j) = match k {
        1 => (2, 3),
        2 => (1, 3),
        _ => (1, 2),
    };
    let (ei, ej) = (inv.e(i), inv.e(j));
    let off = inv.g2 * lit::<F>(0.5) - e * e * lit::<F>(3.0);
    let det = e * lit::<F>(3.0) * (inv.g2 * e * lit::<F>(0.25)) - off * off;
    let diff = ei - ej;
    (det, (ei - e) * (ej - e) * diff * diff)
}

/// `x` for finite C through Legendre: `(C − τ)η₁ + 2πi`.
pub fn x_legendre<F: Real>(c: Complex<F>, inv: &LatticeInvariants<F>) -> Complex<F> {
    (c - inv.tau.tau()) * inv.eta1 + two_pi_i::<F>()
}

/// Magnitude scale for `f_{k,C}` at τ: the sum of the moduli of its terms.
pub fn family_term_scale<F: Real>(fam: &Family<F>, inv: &LatticeInvariants<F>, x: Complex<F>, y: Complex<F>) -> F {
    if fam.k.is_zero() {
        (x * x).norm() * lit::<F>(12.0) + (inv.g2 * y * y).norm()
    } else {
        let e = inv.e(fam.k.k());
        (e * x).norm() * lit::<F>(3.0) + ((inv.g2 * lit::<F>(0.5) - e * e * lit::<F>(3.0)) * y).norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::cauchy_derivative;
    use crate::kernel::{invariants, theta1};
    use crate::test_support::g2_lattice_sum;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn tau(re: f64, im: f64) -> ModuliPoint<f64> {
        ModuliPoint::new(re, im).unwrap()
    }

    fn k(k: u8) -> FamilyIndex {
        FamilyIndex::new(k).unwrap()
    }

    fn fin(re: f64, im: f64) -> ExtendedScalar<f64> {
        ExtendedScalar::finite(re, im)
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    fn cauchy_f(fam: Family<f64>, t: ModuliPoint<f64>) -> Complex64 {
        let f = |w: Complex64| f_value(fam.k, fam.c, ModuliPoint::from_complex(w)?);
        cauchy_derivative(f, t.tau(), 0.02, 64, 1).unwrap()
    }

    #[test]
    fn f0_collapses_at_c_equal_tau() {
        let t = tau(0.2, 0.9);
        let v = f_value(k(0), ExtendedScalar::Finite(t.tau()), t).unwrap();
        assert!((v + Complex64::new(48.0 * PI * PI, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn f3_at_i_is_half_g2() {
        let t = ModuliPoint::<f64>::i();
        let v = f_value(k(3), ExtendedScalar::Infinity, t).unwrap();
        let g2 = g2_lattice_sum(t.tau(), 400);
        assert!(rel(v, g2 * 0.5) < 1e-9);
    }

    #[test]
    fn finite_c_is_affine_in_c() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let t = tau(rng.gen_range(-1.0..1.0), rng.gen_range(0.2..2.5));
            let c = fin(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let inv = invariants(t).unwrap();
            for kk in 1..=3u8 {
                let lhs = f_value(k(kk), c, t).unwrap();
                let inf = f_value(k(kk), ExtendedScalar::Infinity, t).unwrap();
                let six_pi_i = Complex64::new(0.0, 6.0 * PI);
                let rhs = six_pi_i * inv.e(kk as usize) + (c.as_finite().unwrap() - t.tau()) * inf;
                assert!((lhs - rhs).norm() < 1e-11 * lhs.norm().max(rhs.norm()).max(1.0));
            }
        }
    }

    #[test]
    fn f0_dtau_against_cauchy_at_1_4i() {
        let t = tau(0.0, 1.4);
        let fam = Family::new(k(0), fin(1.0, 1.0));
        let closed = fam.eval(t).unwrap().dtau;
        assert!(rel(closed, cauchy_f(fam, t)) < 1e-8);
    }

    #[test]
    fn dtau_against_cauchy_all_families() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for kk in 0..=3u8 {
            for j in 0..21 {
                let t = tau(rng.gen_range(-0.8..0.8), rng.gen_range(0.3..2.0));
                let c = if j == 20 {
                    ExtendedScalar::Infinity
                } else {
                    fin(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0))
                };
                let fam = Family::new(k(kk), c);
                let closed = fam.eval(t).unwrap().dtau;
                let oracle = cauchy_f(fam, t);
                assert!(rel(closed, oracle) < 1e-8, "k={kk} C={c} tau={:?}: {closed} vs {oracle}", t.tau());
            }
        }
    }

    #[test]
    fn f_cap_values() {
        assert!((f_cap(3, ModuliPoint::<f64>::i()).unwrap() - PI).norm() < 1e-12);
        let t = tau(0.3, 0.7);
        let inv = invariants(t).unwrap();
        let sum: Complex64 = (1..=3).map(|j| f_cap(j, t).unwrap()).sum();
        assert!((sum - inv.eta1 * 3.0).norm() < 1e-11);
        assert!(f_cap(0, t).is_err());
    }

    #[test]
    fn f_cap_against_theta_route() {
        let t = tau(0.5, 0.9);
        let th = theta1(Complex64::new(0.5, 0.0), &t).unwrap();
        let l2 = (th.d2 * th.value - th.d1 * th.d1) / (th.value * th.value);
        assert!((f_cap(1, t).unwrap() + l2).norm() < 1e-10);
    }

    #[test]
    fn phi_at_rho_is_inverse_rho() {
        let rho = ModuliPoint::<f64>::rho();
        let expect = Complex64::new(0.0, -PI / 3.0).exp();
        for b in [PhiBranch::Plus, PhiBranch::Minus] {
            let v = phi(b, rho).unwrap().as_finite().unwrap();
            assert!((v - expect).norm() < 1e-10, "{b:?}: {v}");
        }
    }

    #[test]
    fn phi_k3_at_i() {
        let v = phi(PhiBranch::K3, ModuliPoint::<f64>::i()).unwrap().as_finite().unwrap();
        assert!((v - Complex64::new(0.0, 1.0)).norm() < 1e-12);
        assert!(v.im > 0.0);
    }

    #[test]
    fn phi_derivative_against_cauchy() {
        let t = tau(0.3, 1.1);
        let lat = Lattice::new(t).unwrap();
        for b in [PhiBranch::Plus, PhiBranch::Minus, PhiBranch::K1, PhiBranch::K2, PhiBranch::K3] {
            let closed = phi_with(b, lat.invariants(), &lat.tau_derivatives()).dtau.unwrap();
            let f = |w: Complex64| {
                phi(b, ModuliPoint::from_complex(w)?).map(|v| v.as_finite().unwrap())
            };
            let oracle = cauchy_derivative(f, t.tau(), 0.01, 64, 1).unwrap();
            assert!(rel(closed, oracle) < 1e-8, "{b:?}");
        }
    }

    #[test]
    fn orbit_in_unit_strip() {
        let strip = Rectangle::new(-0.5, 0.5, 0.5, 1.2).unwrap();
        let pts = s_orbit(&strip, 3);
        let rho = ModuliPoint::<f64>::rho().tau();
        assert!(pts.iter().any(|p| (p.tau() - rho).norm() < 1e-12));
        // ρ and ρ − 1 both lie on the strip's vertical sides
        assert_eq!(pts.len(), 2);
        for p in &pts {
            let inv = invariants(*p).unwrap();
            assert!(inv.g2.norm() < 1e-8 * inv.eta1.norm().powi(4));
        }
    }

    #[test]
    fn orbit_reaches_low_points() {
        let region = Rectangle::new(-1.0, 1.0, 0.1, 2.0).unwrap();
        let pts = s_orbit(&region, 8);
        assert!(pts.iter().all(|p| p.im() >= 0.1));
        // Im γρ = (√3/2)/|cρ+d|² takes the values √3/2, √3/6, √3/14 above 0.1
        for h in [3f64.sqrt() / 14.0, 3f64.sqrt() / 6.0, 3f64.sqrt() / 2.0] {
            assert!(pts.iter().any(|p| (p.im() - h).abs() < 1e-12));
        }
        for p in &pts {
            let inv = invariants(*p).unwrap();
            assert!(inv.g2.norm() < 1e-8 * inv.eta1.norm().powi(4), "{:?}", p.tau());
        }
    }

    #[test]
    fn orbit_in_region_is_complete() {
        let region = Rectangle::new(-0.9, 0.9, 0.15, 2.9).unwrap();
        let pts = s_orbit_in(&region);
        let wide = s_orbit(&region, 2 * orbit_height_for(&region) + 5);
        assert_eq!(pts.len(), wide.len());
        // g₂ has a simple zero at each orbit point
        let g2 = |t: Complex64| invariants(ModuliPoint::from_complex(t).unwrap()).unwrap().g2;
        let count = crate::test_support::grid_zero_count(g2, [-0.9, 0.9, 0.15, 2.9], 600);
        assert_eq!(count, pts.len() as i64);
    }

    #[test]
    fn eta_transform_generators() {
        let t = tau(0.2, 1.3);
        let inv = invariants(t).unwrap();
        let (a, b) = eta_transform(&ModularMatrix::identity(), t).unwrap();
        assert_eq!((a, b), (inv.eta2, inv.eta1));

        let direct = invariants(tau(1.2, 1.3)).unwrap();
        let (a, b) = eta_transform(&ModularMatrix::t(), t).unwrap();
        assert!((a - direct.eta2).norm() < 1e-10 && (b - direct.eta1).norm() < 1e-10);

        let t2 = tau(0.0, 2.0);
        let direct = invariants(tau(0.0, 0.5)).unwrap();
        let (a, b) = eta_transform(&ModularMatrix::s(), t2).unwrap();
        assert!(rel(a, direct.eta2) < 1e-10 && rel(b, direct.eta1) < 1e-10);
    }

    #[test]
    fn modular_matrix_validation() {
        assert!(ModularMatrix::new(2, 1, 1, 1).is_ok());
        assert!(ModularMatrix::new(2, 1, 1, 2).is_err());
        assert!(FamilyIndex::new(4).is_err());
    }

    #[test]
    fn parse_extended_scalar() {
        let p = |s: &str| s.parse::<ExtendedScalar<f64>>().unwrap();
        assert_eq!(p("inf"), ExtendedScalar::Infinity);
        assert_eq!(p("∞"), ExtendedScalar::Infinity);
        assert_eq!(p("2+i"), fin(2.0, 1.0));
        assert_eq!(p("1-2.5i"), fin(1.0, -2.5));
        assert_eq!(p("-i"), fin(0.0, -1.0));
        assert_eq!(p("1e-3+2e+1i"), fin(1e-3, 20.0));
        assert_eq!(p("0.5"), fin(0.5, 0.0));
        assert!("abc".parse::<ExtendedScalar<f64>>().is_err());
    }

    #[test]
    fn display_round_trips() {
        for z in [fin(3.5, -0.0), fin(-0.0, 0.0), fin(1e-300, -2.0), fin(-1.0, 1e20), ExtendedScalar::Infinity] {
            let s = z.to_string();
            assert!(!s.contains("+-"), "{s}");
            assert_eq!(s.parse::<ExtendedScalar<f64>>().unwrap(), z);
        }
        assert_eq!(crate::scalar::fmt_complex(num_complex::Complex64::new(1.0, -0.0)), "1-0i");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn legendre_collapse_and_factorization(
            a in -1.0f64..1.0, b in 0.15f64..3.0, cr in -4.0f64..4.0, ci in -4.0f64..4.0
        ) {
            let t = tau(a, b);
            let inv = invariants(t).unwrap();
            let c = Complex64::new(cr, ci);
            let v = f_value(k(0), ExtendedScalar::Finite(c), t).unwrap();
            let y = c - t.tau();
            let xl = x_legendre(c, &inv);
            let b8 = xl * xl * 12.0 - inv.g2 * y * y;
            let scale = (xl * xl * 12.0).norm() + (inv.g2 * y * y).norm();
            prop_assert!((v - b8).norm() < 1e-10 * scale);
            let x = c * inv.eta1 - inv.eta2;
            let r = inv.sqrt_g2_12();
            let fact = (x - r * y) * (x + r * y) * 12.0;
            prop_assert!((v - fact).norm() < 1e-10 * scale);
        }

        #[test]
        fn companion_determinant_identity(a in -1.0f64..1.0, b in 0.15f64..3.0, kk in 1usize..=3) {
            let inv = invariants(tau(a, b)).unwrap();
            let (det, prod) = companion_determinant(kk, &inv);
            let m = inv.e1.norm().max(inv.e2.norm()).max(inv.e3.norm());
            prop_assert!((det - prod).norm() < 1e-10 * prod.norm().max(m.powi(4) * 1e-3));
        }

        #[test]
        fn eta_transform_matches_direct(a in -0.5f64..0.5, b in 0.6f64..2.0, word in proptest::collection::vec(0u8..3, 1..5)) {
            let mut m = ModularMatrix::identity();
            for w in word {
                let g = match w {
                    0 => ModularMatrix::t(),
                    1 => ModularMatrix::s(),
                    _ => ModularMatrix::new(1, -1, 0, 1).unwrap(),
                };
                m = g.compose(&m);
            }
            let t = tau(a, b);
            let image = m.apply(&t);
            prop_assume!(image.im() > 0.15);
            let direct = invariants(image).unwrap();
            let (e2, e1) = eta_transform(&m, t).unwrap();
            let s = direct.eta1.norm().max(direct.eta2.norm());
            prop_assert!((e2 - direct.eta2).norm() < 1e-9 * s);
            prop_assert!((e1 - direct.eta1).norm() < 1e-9 * s);
        }
    }
}
