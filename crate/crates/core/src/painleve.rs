//! Riccati solutions of Painlevé VI with parameters `(½(n+½)², −⅛, ⅛, ⅜)`,
//! `n ∈ {0, 1}`, lifted to ℍ through `t = (e₃−e₁)/(e₂−e₁)` and
//! `λ = (℘ − e₁)/(e₂ − e₁)`; the Okamoto map from level 0 to level 1 and
//! the Hamiltonian `K_n`.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{cauchy_derivative, cauchy_taylor};
use crate::error::{Error, Result};
use crate::kernel::{DTauInvariants, Lattice, LatticeInvariants, ModuliPoint};
use crate::moduli::{ExtendedScalar, Family, FamilyIndex};
use crate::region::Rectangle;
use crate::scalar::{i_unit, lit, Real};
use crate::zeros::{locate_zeros, ZeroConfig};

/// PVI parameters. The elliptic form carries the prefactor `−1/4π²` in
/// front of `Σ α_k ℘′(p + ω_k/2)`; nothing here evaluates it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PviParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl PviParams {
    /// `PVI(½(n+½)², −⅛, ⅛, ⅜)` for `n ∈ {0, 1}`.
    pub fn level(n: u8) -> Result<Self> {
        if n > 1 {
            return Err(Error::InvalidArgument(format!("level must be 0 or 1, got {n}")));
        }
        let h = n as f64 + 0.5;
        Ok(PviParams { alpha: 0.5 * h * h, beta: -0.125, gamma: 0.125, delta: 0.375 })
    }

    /// `(α₀, α₁, α₂, α₃) = (α, −β, γ, ½ − δ)`.
    pub fn alphas(&self) -> [f64; 4] {
        [self.alpha, -self.beta, self.gamma, 0.5 - self.delta]
    }

    /// `n` with `α₀ = ½(n+½)²`, when it is a non-negative integer.
    pub fn n(&self) -> Option<u8> {
        let n = (2.0 * self.alpha).sqrt() - 0.5;
        (n >= 0.0 && (n - n.round()).abs() < 1e-12).then(|| n.round() as u8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiccatiFamily<F> {
    pub k: FamilyIndex,
    pub c: ExtendedScalar<F>,
    pub level: u8,
}

impl<F: Real> RiccatiFamily<F> {
    pub fn new(k: FamilyIndex, c: ExtendedScalar<F>, level: u8) -> Result<Self> {
        if level > 1 {
            return Err(Error::InvalidArgument(format!("level must be 0 or 1, got {level}")));
        }
        Ok(RiccatiFamily { k, c, level })
    }

    fn family(&self) -> Family<F> {
        Family::new(self.k, self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianState<F> {
    pub lambda: Complex<F>,
    /// `None` when μ is singular at this λ.
    pub mu: Option<Complex<F>>,
    pub t: Complex<F>,
    pub level: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiccatiReport<F> {
    pub family: RiccatiFamily<F>,
    pub path: Vec<ModuliPoint<F>>,
    /// Residual per evaluated point (same order as `path`).
    pub residuals: Vec<F>,
    pub max_residual: F,
    /// Scale used at the point attaining `max_residual`.
    pub residual_scale: F,
    /// Path points dropped near poles.
    pub skipped: Vec<ModuliPoint<F>>,
}

/// Cauchy-circle settings for τ-derivatives of λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub cauchy_radius: f64,
    pub cauchy_nodes: usize,
    /// Disks of this radius around poles are removed from paths.
    pub excise_radius: f64,
    /// Points where the pole-producing denominator is below this fraction
    /// of its term scale are skipped.
    pub skip_rel: f64,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig { cauchy_radius: 0.005, cauchy_nodes: 64, excise_radius: 0.02, skip_rel: 1e-6 }
    }
}

/// `t`, `dt/dτ` and `d²t/dτ²` at one τ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TChart<F> {
    pub t: Complex<F>,
    pub dt: Complex<F>,
    pub d2t: Complex<F>,
}

/// `e_k″` from differentiating `e_k′ = (−i/4π)(4e_k² − 4η₁e_k − ⅔g₂)`.
pub fn e_second<F: Real>(inv: &LatticeInvariants<F>, d: &DTauInvariants<F>) -> [Complex<F>; 3] {
    let c = -i_unit::<F>() / (lit::<F>(4.0) * F::PI());
    [1, 2, 3].map(|k| {
        let (e, de) = (inv.e(k), d.de(k));
        c * (e * de * lit::<F>(8.0) - d.deta1 * e * lit::<F>(4.0) - inv.eta1 * de * lit::<F>(4.0) - d.dg2 * lit::<F>(2.0 / 3.0))
    })
}

pub fn t_chart<F: Real>(inv: &LatticeInvariants<F>, d: &DTauInvariants<F>) -> TChart<F> {
    let [s1, s2, s3] = e_second(inv, d);
    let (u, v) = (inv.e3 - inv.e1, inv.e2 - inv.e1);
    let (du, dv) = (d.de3 - d.de1, d.de2 - d.de1);
    let (d2u, d2v) = (s3 - s1, s2 - s1);
    let num = du * v - u * dv;
    TChart {
        t: u / v,
        dt: num / (v * v),
        d2t: (d2u * v - u * d2v) / (v * v) - dv * num * lit::<F>(2.0) / (v * v * v),
    }
}

pub fn t_of_tau<F: Real>(tau: ModuliPoint<F>) -> Result<Complex<F>> {
    let lat = Lattice::new(tau)?;
    let inv = lat.invariants();
    Ok((inv.e3 - inv.e1) / (inv.e2 - inv.e1))
}

pub fn dt_dtau<F: Real>(tau: ModuliPoint<F>) -> Result<Complex<F>> {
    let lat = Lattice::new(tau)?;
    Ok(t_chart(lat.invariants(), &lat.tau_derivatives()).dt)
}

/// Numerator and denominator of `℘(p̃)` (level 0) or `℘(p)` (level 1).
pub fn wp_p_parts<F: Real>(level: u8, k: FamilyIndex, c: ExtendedScalar<F>, inv: &LatticeInvariants<F>) -> (Complex<F>, Complex<F>) {
    let (x, y) = match c {
        ExtendedScalar::Infinity => (inv.eta1, Complex::new(F::one(), F::zero())),
        ExtendedScalar::Finite(cc) => (cc * inv.eta1 - inv.eta2, cc - inv.tau.tau()),
    };
    let (g2, g3) = (inv.g2, inv.g3);
    let n = |v: f64| lit::<F>(v);
    match (level, k.k()) {
        (0, 0) => (-x, y),
        (0, kk) => {
            let e = inv.e(kk);
            (e * x + (g2 * n(0.25) - e * e * n(2.0)) * y, x + e * y)
        }
        (_, 0) => (
            -x * x * x * n(4.0) - g2 * x * y * y + g3 * y * y * y * n(2.0),
            y * (x * x * n(12.0) - g2 * y * y),
        ),
        (_, kk) => {
            let e = inv.e(kk);
            let off = g2 * n(0.5) - e * e * n(3.0);
            (off * x + g2 * n(0.25) * e * y, e * x * n(3.0) + off * y)
        }
    }
}

/// `℘(p̃_C^{(k)}(τ)|τ)` for level 0, `℘(p_C^{(k)}(τ)|τ)` for level 1;
/// infinity exactly where the denominator is zero.
pub fn wp_p_formula<F: Real>(level: u8, k: FamilyIndex, c: ExtendedScalar<F>, tau: ModuliPoint<F>) -> Result<ExtendedScalar<F>> {
    let lat = Lattice::new(tau)?;
    let (num, den) = wp_p_parts(level, k, c, lat.invariants());
    Ok(quotient(num, den))
}

fn quotient<F: Real>(num: Complex<F>, den: Complex<F>) -> ExtendedScalar<F> {
    if den.re == F::zero() && den.im == F::zero() {
        ExtendedScalar::Infinity
    } else {
        ExtendedScalar::Finite(num / den)
    }
}

fn lambda_from_wp<F: Real>(w: ExtendedScalar<F>, inv: &LatticeInvariants<F>) -> ExtendedScalar<F> {
    match w {
        ExtendedScalar::Infinity => ExtendedScalar::Infinity,
        ExtendedScalar::Finite(w) => ExtendedScalar::Finite((w - inv.e1) / (inv.e2 - inv.e1)),
    }
}

pub fn lambda_with<F: Real>(fam: &RiccatiFamily<F>, inv: &LatticeInvariants<F>) -> ExtendedScalar<F> {
    let (num, den) = wp_p_parts(fam.level, fam.k, fam.c, inv);
    lambda_from_wp(quotient(num, den), inv)
}

/// `λ = (℘ − e₁)/(e₂ − e₁)` on the requested level.
pub fn lambda_of<F: Real>(level: u8, k: FamilyIndex, c: ExtendedScalar<F>, tau: ModuliPoint<F>) -> Result<ExtendedScalar<F>> {
    let fam = RiccatiFamily::new(k, c, level)?;
    let lat = Lattice::new(tau)?;
    Ok(lambda_with(&fam, lat.invariants()))
}

/// λ as a finite-valued function of complex τ, failing at poles.
fn lambda_finite<F: Real>(fam: &RiccatiFamily<F>, z: Complex<F>) -> Result<Complex<F>> {
    let tau = ModuliPoint::from_complex(z)?;
    let lat = Lattice::new(tau)?;
    lambda_with(fam, lat.invariants())
        .as_finite()
        .ok_or_else(|| Error::Singular(format!("lambda has a pole at {}", z)))
}

/// Cleared residual `2t(t−1)λ′ − N(λ, t)` of the k-th first-order equation
/// and its scale `max(1, |λ|², |λ′||t(t−1)|)`.
pub fn riccati_equation_residual<F: Real>(level: u8, k: usize, lambda: Complex<F>, dlambda: Complex<F>, t: Complex<F>) -> (F, F) {
    let one = Complex::new(F::one(), F::zero());
    let n = |v: f64| lit::<F>(v);
    let l = lambda;
    let tt1 = t * (t - one);
    if level == 1 && k == 0 {
        let (value, scale) = p0_with_scale(dlambda, lambda, t);
        return (value.norm(), scale);
    }
    let rhs = match (level, k) {
        (0, 0) => -(l * l - t * l * n(2.0) + t),
        (0, 1) => l * l - l * n(2.0) + t,
        (0, 2) => l * l - t,
        (0, _) => l * l + (t - one) * l * n(2.0) - t,
        (_, 1) => l * l * n(3.0) - l * n(2.0) - t,
        (_, 2) => l * l * n(3.0) - l * n(4.0) + t,
        (_, _) => l * l * n(3.0) - (t + one) * l * n(2.0) + t,
    };
    let res = tt1 * dlambda * n(2.0) - rhs;
    let scale = F::one().max(l.norm_sqr()).max(dlambda.norm() * tt1.norm());
    (res.norm(), scale)
}

/// The cubic relation `P₀(y, x, t)` satisfied by the level-1, k = 0 family
/// with `y = dλ/dt`, `x = λ`.
pub fn p0<F: Real>(y: Complex<F>, x: Complex<F>, t: Complex<F>) -> Complex<F> {
    p0_terms(y, x, t).iter().fold(Complex::new(F::zero(), F::zero()), |a, b| a + b)
}

/// `P₀` and the largest modulus among its monomial terms.
pub fn p0_with_scale<F: Real>(y: Complex<F>, x: Complex<F>, t: Complex<F>) -> (Complex<F>, F) {
    let terms = p0_terms(y, x, t);
    let sum = terms.iter().fold(Complex::new(F::zero(), F::zero()), |a, b| a + b);
    (sum, terms.iter().fold(F::zero(), |m, v| m.max(v.norm())))
}

fn p0_terms<F: Real>(y: Complex<F>, x: Complex<F>, t: Complex<F>) -> Vec<Complex<F>> {
    let n = |v: f64| lit::<F>(v);
    let one = Complex::new(F::one(), F::zero());
    let t1 = t - one;
    let x2 = x * x;
    let x3 = x2 * x;
    let mut out = Vec::with_capacity(24);
    out.push(t * t * t * t1 * t1 * t1 * y * y * y * n(8.0));
    let a = -t * t * t1 * t1 * y * y * n(4.0);
    out.extend([a * x2 * n(3.0), a * (t - n(2.0)) * x * n(2.0), -a * t]);
    let b = -t * t1 * y * n(2.0);
    let left = [x2, -t * x * n(2.0), t];
    let right = [x2 * n(9.0), -(t + n(4.0)) * x * n(2.0), t];
    for l in left {
        for r in right {
            out.push(b * l * r);
        }
    }
    out.extend([
        x3 * x3 * n(27.0),
        -(t * n(7.0) + n(10.0)) * x3 * x2 * n(6.0),
        (t * t * n(4.0) + t * n(101.0) + n(32.0)) * x2 * x2,
        t * (t * t * n(2.0) - t * n(5.0) - n(14.0)) * x3 * n(4.0),
        -t * t * (t * n(4.0) - n(3.0)) * x2 * n(3.0),
        t * t * (t * n(3.0) + n(2.0)) * x * n(2.0),
        -t * t * t,
    ]);
    out
}

/// Level-0 Hamiltonian state of family k: `λ̃` from the closed form and
/// `μ̃ ∈ {0, 1/(2λ̃), 1/(2(λ̃−1)), 1/(2(λ̃−t))}`.
pub fn level0_state<F: Real>(k: FamilyIndex, c: ExtendedScalar<F>, inv: &LatticeInvariants<F>) -> Result<HamiltonianState<F>> {
    let fam = RiccatiFamily::new(k, c, 0)?;
    let t = (inv.e3 - inv.e1) / (inv.e2 - inv.e1);
    let lambda = lambda_with(&fam, inv)
        .as_finite()
        .ok_or_else(|| Error::Singular("level-0 lambda has a pole".into()))?;
    let half = lit::<F>(0.5);
    let one = Complex::new(F::one(), F::zero());
    let pole = match k.k() {
        0 => None,
        1 => Some(lambda),
        2 => Some(lambda - one),
        _ => Some(lambda - t),
    };
    let mu = match pole {
        None => Some(Complex::new(F::zero(), F::zero())),
        Some(p) if p.norm() == F::zero() => None,
        Some(p) => Some(Complex::new(half, F::zero()) / p),
    };
    Ok(HamiltonianState { lambda, mu, t, level: 0 })
}

/// `μ = μ̃ − ½(1/λ̃ + 1/(λ̃−1) + 1/(λ̃−t))`, `λ = λ̃ + 1/μ`.
pub fn okamoto_forward<F: Real>(s: &HamiltonianState<F>) -> Result<HamiltonianState<F>> {
    if s.level != 0 {
        return Err(Error::InvalidArgument("okamoto_forward expects a level-0 state".into()));
    }
    let one = Complex::new(F::one(), F::zero());
    let l = s.lambda;
    let mu_t = s.mu.ok_or_else(|| Error::Singular("input mu is singular".into()))?;
    let rel = lit::<F>(1e-14) * F::one().max(l.norm());
    if l.norm() < rel || (l - one).norm() < rel || (l - s.t).norm() < rel {
        return Err(Error::Singular(format!("lambda~ = {l} hits 0, 1 or t")));
    }
    let mu = mu_t - (l.inv() + (l - one).inv() + (l - s.t).inv()) * lit::<F>(0.5);
    if mu.norm() == F::zero() {
        return Err(Error::Singular("mu vanishes".into()));
    }
    Ok(HamiltonianState { lambda: l + mu.inv(), mu: Some(mu), t: s.t, level: 1 })
}

fn tt1<F: Real>(t: Complex<F>) -> Complex<F> {
    t * (t - Complex::new(F::one(), F::zero()))
}

/// `K_n(λ, μ, t)`.
pub fn hamiltonian_k<F: Real>(n: u8, s: &HamiltonianState<F>) -> Result<Complex<F>> {
    let mu = s.mu.ok_or_else(|| Error::Singular("mu is singular".into()))?;
    let (l, t) = (s.lambda, s.t);
    let one = Complex::new(F::one(), F::zero());
    let nn = lit::<F>((n as f64) * (n as f64 + 1.0) / 4.0);
    let brace = l * (l - one) * (l - t) * mu * mu - (l * l - t * l * lit::<F>(2.0) + t) * mu * lit::<F>(0.5) - (l - t) * nn;
    Ok(brace / tt1(t))
}

/// `∂K_n/∂μ`, which does not depend on n.
pub fn hamiltonian_dk_dmu<F: Real>(s: &HamiltonianState<F>) -> Result<Complex<F>> {
    let mu = s.mu.ok_or_else(|| Error::Singular("mu is singular".into()))?;
    let (l, t) = (s.lambda, s.t);
    let one = Complex::new(F::one(), F::zero());
    Ok((l * (l - one) * (l - t) * mu * lit::<F>(2.0) - (l * l - t * l * lit::<F>(2.0) + t) * lit::<F>(0.5)) / tt1(t))
}

/// μ recovered from `λ′ = ∂K₁/∂μ`.
pub fn mu_from_derivative<F: Real>(lambda: Complex<F>, dlambda: Complex<F>, t: Complex<F>) -> Complex<F> {
    let one = Complex::new(F::one(), F::zero());
    let l = lambda;
    (tt1(t) * dlambda + (l * l - t * l * lit::<F>(2.0) + t) * lit::<F>(0.5)) / (l * (l - one) * (l - t) * lit::<F>(2.0))
}

/// Residual of PVI at `(λ, λ_t, λ_tt, t)` relative to the largest term.
pub fn pvi_residual<F: Real>(p: &PviParams, l: Complex<F>, dl: Complex<F>, d2l: Complex<F>, t: Complex<F>) -> (F, F) {
    let one = Complex::new(F::one(), F::zero());
    let n = |v: f64| lit::<F>(v);
    let (l1, lt) = (l - one, l - t);
    let t1 = t - one;
    let mut terms = vec![
        dl * dl * l.inv() * n(0.5),
        dl * dl * l1.inv() * n(0.5),
        dl * dl * lt.inv() * n(0.5),
        -dl * t.inv(),
        -dl * t1.inv(),
        -dl * lt.inv(),
    ];
    let pre = l * l1 * lt / (t * t * t1 * t1);
    terms.extend([
        pre * n(p.alpha),
        pre * n(p.beta) * t / (l * l),
        pre * n(p.gamma) * t1 / (l1 * l1),
        pre * n(p.delta) * t * t1 / (lt * lt),
    ]);
    let rhs = terms.iter().fold(Complex::new(F::zero(), F::zero()), |a, b| a + b);
    let scale = terms.iter().fold(d2l.norm(), |m, v| m.max(v.norm()));
    ((d2l - rhs).norm(), scale)
}

/// `(λ, dλ/dt, d²λ/dt²)` at τ from Cauchy differentiation in the τ-chart.
pub fn lambda_jet<F: Real>(fam: &RiccatiFamily<F>, tau: ModuliPoint<F>, cfg: &PathConfig, second: bool) -> Result<(Complex<F>, Complex<F>, Option<Complex<F>>, TChart<F>)> {
    let lat = Lattice::new(tau)?;
    let chart = t_chart(lat.invariants(), &lat.tau_derivatives());
    let lambda = lambda_with(fam, lat.invariants())
        .as_finite()
        .ok_or_else(|| Error::Singular("lambda has a pole".into()))?;
    let f = |z: Complex<F>| lambda_finite(fam, z);
    let r = lit::<F>(cfg.cauchy_radius);
    if second {
        let c = cauchy_taylor(f, tau.tau(), r, cfg.cauchy_nodes, 2)?;
        let (d1, d2) = (c[1], c[2]);
        let lt = d1 / chart.dt;
        let ltt = (d2 - lt * chart.d2t) / (chart.dt * chart.dt);
        Ok((lambda, lt, Some(ltt), chart))
    } else {
        let d1 = cauchy_derivative(f, tau.tau(), r, cfg.cauchy_nodes, 1)?;
        Ok((lambda, d1 / chart.dt, None, chart))
    }
}

/// Denominator of the λ formula with its τ-derivative.
fn denominator<F: Real>(fam: &RiccatiFamily<F>, inv: &LatticeInvariants<F>, d: &DTauInvariants<F>) -> (Complex<F>, Complex<F>, F) {
    let f = fam.family().eval_with(inv, d);
    let (x, y) = (f.x, f.y);
    let (dx, dy) = match fam.c {
        ExtendedScalar::Infinity => (d.deta1, Complex::new(F::zero(), F::zero())),
        ExtendedScalar::Finite(cc) => ((cc - inv.tau.tau()) * d.deta1 - inv.eta1, Complex::new(-F::one(), F::zero())),
    };
    match (fam.level, fam.k.k()) {
        (0, 0) => (y, dy, y.norm().max(F::one())),
        (0, kk) => {
            let (e, de) = (inv.e(kk), d.de(kk));
            (x + e * y, dx + de * y + e * dy, x.norm() + (e * y).norm())
        }
        (_, 0) => (f.value, f.dtau, (x * x).norm() * lit::<F>(12.0) + (inv.g2 * y * y).norm()),
        (_, kk) => {
            let e = inv.e(kk);
            (f.value, f.dtau, (e * x).norm() * lit::<F>(3.0) + ((inv.g2 * lit::<F>(0.5) - e * e * lit::<F>(3.0)) * y).norm())
        }
    }
}

/// Poles of λ inside `rect`: zeros of the formula's denominator, plus τ = C
/// where `C − τ` divides it.
pub fn pole_locations<F: Real>(fam: &RiccatiFamily<F>, rect: &Rectangle<F>) -> Result<Vec<Complex<F>>> {
    let mut poles = Vec::new();
    if let ExtendedScalar::Finite(cc) = fam.c {
        if fam.k.is_zero() && rect.contains(cc) {
            poles.push(cc);
        }
    }
    if fam.level == 0 && fam.k.is_zero() {
        return Ok(poles);
    }
    let h = |z: Complex<F>| {
        let lat = Lattice::new(ModuliPoint::from_complex(z)?)?;
        let (v, dv, _) = denominator(fam, lat.invariants(), &lat.tau_derivatives());
        Ok((v, dv))
    };
    let zs = locate_zeros(&h, rect, &ZeroConfig::default())?;
    poles.extend(zs.iter().map(|z| z.location.tau()));
    Ok(poles)
}

/// `n` equally spaced points from `a` to `b`.
pub fn straight_path<F: Real>(a: ModuliPoint<F>, b: ModuliPoint<F>, n: usize) -> Vec<ModuliPoint<F>> {
    (0..n)
        .map(|j| {
            let s = if n > 1 { lit::<F>(j as f64 / (n - 1) as f64) } else { F::zero() };
            ModuliPoint::from_complex(a.tau() + (b.tau() - a.tau()) * s).expect("segment inside the upper half plane")
        })
        .collect()
}

fn path_box<F: Real>(path: &[ModuliPoint<F>], pad: F) -> Result<Rectangle<F>> {
    let (mut x0, mut x1, mut y0, mut y1) = (F::infinity(), F::neg_infinity(), F::infinity(), F::neg_infinity());
    for p in path {
        x0 = x0.min(p.re());
        x1 = x1.max(p.re());
        y0 = y0.min(p.im());
        y1 = y1.max(p.im());
    }
    Rectangle::new(x0 - pad, x1 + pad, (y0 - pad).max(y0 * lit(0.5)), y1 + pad)
}

/// Splits `path` into usable points and points within the excision radius
/// of a pole or with a nearly vanishing denominator.
pub fn excise<F: Real>(fam: &RiccatiFamily<F>, path: &[ModuliPoint<F>], cfg: &PathConfig) -> Result<(Vec<ModuliPoint<F>>, Vec<ModuliPoint<F>>)> {
    if path.is_empty() {
        return Err(Error::AllPointsSkipped { skipped: 0 });
    }
    let pad = lit::<F>(cfg.excise_radius * 2.5);
    let poles = pole_locations(fam, &path_box(path, pad)?)?;
    let radius = lit::<F>(cfg.excise_radius);
    let (mut keep, mut skip) = (Vec::new(), Vec::new());
    for p in path {
        let near = poles.iter().any(|q| (p.tau() - q).norm() < radius);
        let lat = Lattice::new(*p)?;
        let (v, _, s) = denominator(fam, lat.invariants(), &lat.tau_derivatives());
        if near || v.norm() < lit::<F>(cfg.skip_rel) * s {
            skip.push(*p);
        } else {
            keep.push(*p);
        }
    }
    if keep.is_empty() {
        return Err(Error::AllPointsSkipped { skipped: skip.len() });
    }
    Ok((keep, skip))
}

fn report<F: Real>(fam: RiccatiFamily<F>, path: Vec<ModuliPoint<F>>, skipped: Vec<ModuliPoint<F>>, vals: Vec<(F, F)>) -> RiccatiReport<F> {
    let mut max_residual = F::zero();
    let mut residual_scale = F::one();
    let residuals: Vec<F> = vals
        .iter()
        .map(|(r, s)| {
            let rel = *r / *s;
            if rel > max_residual || rel.is_nan() {
                max_residual = rel;
                residual_scale = *s;
            }
            rel
        })
        .collect();
    RiccatiReport { family: fam, path, residuals, max_residual, residual_scale, skipped }
}

/// First-order equation residuals of the family along `path`.
pub fn riccati_residual<F: Real>(fam: RiccatiFamily<F>, path: &[ModuliPoint<F>], cfg: &PathConfig) -> Result<RiccatiReport<F>> {
    let (keep, skip) = excise(&fam, path, cfg)?;
    let vals: Vec<(F, F)> = keep
        .par_iter()
        .map(|p| {
            let (l, lt, _, chart) = lambda_jet(&fam, *p, cfg, false)?;
            Ok(riccati_equation_residual(fam.level, fam.k.k(), l, lt, chart.t))
        })
        .collect::<Result<_>>()?;
    Ok(report(fam, keep, skip, vals))
}

/// Second-order PVI residual of a level-1 family along `path`.
pub fn pvi_path_residual<F: Real>(fam: RiccatiFamily<F>, path: &[ModuliPoint<F>], cfg: &PathConfig) -> Result<RiccatiReport<F>> {
    let params = PviParams::level(fam.level)?;
    let (keep, skip) = excise(&fam, path, cfg)?;
    let vals: Vec<(F, F)> = keep
        .par_iter()
        .map(|p| {
            let (l, lt, ltt, chart) = lambda_jet(&fam, *p, cfg, true)?;
            Ok(pvi_residual(&params, l, lt, ltt.expect("second derivative requested"), chart.t))
        })
        .collect::<Result<_>>()?;
    Ok(report(fam, keep, skip, vals))
}

/// Hamilton's first equation `dλ/dt = ∂K₁/∂μ` along a level-1 path, with μ
/// from the Okamoto transformation and `dλ/dt` from Cauchy differentiation.
pub fn hamilton_path_residual<F: Real>(k: FamilyIndex, c: ExtendedScalar<F>, path: &[ModuliPoint<F>], cfg: &PathConfig) -> Result<RiccatiReport<F>> {
    let fam = RiccatiFamily::new(k, c, 1)?;
    let (keep, skip) = excise(&fam, path, cfg)?;
    let vals: Vec<(F, F)> = keep
        .par_iter()
        .map(|p| {
            let lat = Lattice::new(*p)?;
            let s = okamoto_forward(&level0_state(k, c, lat.invariants())?)?;
            let (_, lt, _, _) = lambda_jet(&fam, *p, cfg, false)?;
            let dk = hamiltonian_dk_dmu(&s)?;
            Ok(((lt - dk).norm(), F::one().max(lt.norm())))
        })
        .collect::<Result<_>>()?;
    Ok(report(fam, keep, skip, vals))
}

/// At a zero τ₀ of `f_{k,C}`, the windings of `t(τ) − t(τ₀)` and of `1/λ`
/// around a small circle: both equal 1 when `1/λ` has a simple zero in the
/// t-chart.
pub fn pole_simplicity<F: Real>(k: FamilyIndex, c: ExtendedScalar<F>, tau0: ModuliPoint<F>, radius: F) -> Result<(i64, i64)> {
    let fam = RiccatiFamily::new(k, c, 1)?;
    let t0 = t_of_tau(tau0)?;
    let wt = crate::zeros::circle_winding(
        &|z: Complex<F>| Ok((t_of_tau(ModuliPoint::from_complex(z)?)? - t0, Complex::new(F::one(), F::zero()))),
        tau0.tau(),
        radius,
    )?;
    let wl = crate::zeros::circle_winding(
        &|z: Complex<F>| Ok((lambda_finite(&fam, z)?.inv(), Complex::new(F::one(), F::zero()))),
        tau0.tau(),
        radius,
    )?;
    Ok((wt, wl))
}

/// Relative gap between the closed-form level-1 λ and the Okamoto image of
/// the level-0 state.
pub fn okamoto_route_gap<F: Real>(k: FamilyIndex, c: ExtendedScalar<F>, tau: ModuliPoint<F>) -> Result<F> {
    let lat = Lattice::new(tau)?;
    let s = okamoto_forward(&level0_state(k, c, lat.invariants())?)?;
    let closed = lambda_with(&RiccatiFamily::new(k, c, 1)?, lat.invariants())
        .as_finite()
        .ok_or_else(|| Error::Singular("closed-form lambda has a pole".into()))?;
    Ok((s.lambda - closed).norm() / closed.norm().max(F::one()))
}
