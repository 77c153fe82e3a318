//! Gradient of the Green function on `E_τ` and the Hessian of
//! `G₂(z₁,z₂) = G(z₁−z₂) − 2G(z₁) − 2G(z₂)` at its five trivial critical points.
//!
//! `G` itself is never evaluated. The gradient comes from
//! `−4π G_z = ζ(z) − rη₁ − sη₂` and the Hessians from the closed-form
//! matrices in the lattice invariants.

use nalgebra::Matrix4;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{Lattice, LatticeInvariants, ModuliPoint, TorusPoint};
use crate::moduli::{phi_with, PhiBranch};
use crate::scalar::{lit, to_f64, Real};

/// Below this, `|g₂/12|` relative to `|η₁|²` counts as `τ ∈ 𝔖` and `q₊ = q₋`.
pub const DEGENERATE_G2: f64 = 1e-12;

/// `(G_x, G_y)` at `z`.
pub fn green_grad<F: Real>(z: &TorusPoint<F>, tau: ModuliPoint<F>) -> Result<(F, F)> {
    green_grad_with(&Lattice::new(tau)?, z.z)
}

pub fn green_grad_with<F: Real>(lat: &Lattice<F>, z: Complex<F>) -> Result<(F, F)> {
    let inv = lat.invariants();
    let p = lat.torus_point(z);
    let zeta = lat.zeta(z)?;
    let gz = -(zeta - inv.eta1 * p.r - inv.eta2 * p.s) / (lit::<F>(4.0) * F::PI());
    let two = lit::<F>(2.0);
    Ok((two * gz.re, -two * gz.im))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalKind {
    HalfPeriod(usize, usize),
    QPlus,
    QMinus,
}

impl CriticalKind {
    pub const ALL: [CriticalKind; 5] = [
        CriticalKind::HalfPeriod(1, 2),
        CriticalKind::HalfPeriod(1, 3),
        CriticalKind::HalfPeriod(2, 3),
        CriticalKind::QPlus,
        CriticalKind::QMinus,
    ];

    pub fn label(&self) -> String {
        match self {
            CriticalKind::HalfPeriod(i, j) => format!("half_period({i},{j})"),
            CriticalKind::QPlus => "q_plus".into(),
            CriticalKind::QMinus => "q_minus".into(),
        }
    }

    fn sign(&self) -> Option<f64> {
        match self {
            CriticalKind::QPlus => Some(1.0),
            CriticalKind::QMinus => Some(-1.0),
            CriticalKind::HalfPeriod(..) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPair<F> {
    pub a1: TorusPoint<F>,
    pub a2: TorusPoint<F>,
    pub kind: CriticalKind,
}

/// Whether `q₊` and `q₋` coincide, i.e. `g₂(τ) = 0`.
pub fn q_degenerate<F: Real>(inv: &LatticeInvariants<F>) -> bool {
    (inv.g2 / lit::<F>(12.0)).norm() <= lit::<F>(DEGENERATE_G2) * (inv.eta1 * inv.eta1).norm()
}

/// `q` with `℘(q) = sign·√(g₂/12)` (principal root), normalised to the
/// period cell with `Im q ≥ 0`.
pub fn q_point<F: Real>(lat: &Lattice<F>, sign: f64) -> Result<TorusPoint<F>> {
    let w = lat.invariants().sqrt_g2_12() * lit::<F>(sign);
    lat.wp_inverse(w, None)
}

fn pair_for<F: Real>(lat: &Lattice<F>, kind: CriticalKind) -> Result<CriticalPair<F>> {
    let tau = lat.tau();
    match kind {
        CriticalKind::HalfPeriod(i, j) => Ok(CriticalPair {
            a1: TorusPoint::half_period(i, &tau),
            a2: TorusPoint::half_period(j, &tau),
            kind,
        }),
        _ => {
            let q = q_point(lat, kind.sign().unwrap_or(1.0))?;
            Ok(CriticalPair { a1: q, a2: lat.torus_point(-q.z), kind })
        }
    }
}

/// The three half-period pairs and `(q_±, −q_±)`. On 𝔖 the two `q` pairs
/// coincide; they are still both returned and [`q_degenerate`] reports it.
pub fn trivial_critical_points<F: Real>(tau: ModuliPoint<F>) -> Result<Vec<CriticalPair<F>>> {
    let lat = Lattice::new(tau)?;
    CriticalKind::ALL.iter().map(|&k| pair_for(&lat, k)).collect()
}

/// Residuals of both critical point systems:
/// `2∇G(a_l) − ∇G(a_l − a_m)` and `∇G(a₁) + ∇G(a₂)`, as the largest component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalResidual<F> {
    pub pairwise: F,
    pub summed: F,
}

pub fn critical_residual<F: Real>(lat: &Lattice<F>, pair: &CriticalPair<F>) -> Result<CriticalResidual<F>> {
    let two = lit::<F>(2.0);
    let g1 = green_grad_with(lat, pair.a1.z)?;
    let g2 = green_grad_with(lat, pair.a2.z)?;
    let g12 = green_grad_with(lat, pair.a1.z - pair.a2.z)?;
    let g21 = green_grad_with(lat, pair.a2.z - pair.a1.z)?;
    let pairwise = [
        two * g1.0 - g12.0,
        two * g1.1 - g12.1,
        two * g2.0 - g21.0,
        two * g2.1 - g21.1,
    ];
    let summed = [g1.0 + g2.0, g1.1 + g2.1];
    let max = |v: &[F]| v.iter().fold(F::zero(), |m, x| m.max(x.abs()));
    Ok(CriticalResidual { pairwise: max(&pairwise), summed: max(&summed) })
}

/// `2ζ(a) − ζ(2a) + ℘″(a)/(2℘′(a))`, zero by the addition formula.
pub fn addition_witness<F: Real>(lat: &Lattice<F>, a: Complex<F>) -> Result<Complex<F>> {
    let e = lat.eval(a)?;
    let z2 = lat.zeta(a * lit::<F>(2.0))?;
    Ok(e.zeta * lit::<F>(2.0) - z2 + e.wp2 / (e.wp1 * lit::<F>(2.0)))
}

/// Real and imaginary parts entering the Hessian matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HessianEntries<F> {
    pub u1: F,
    pub v1: F,
    pub u2: F,
    pub v2: F,
    pub u3: F,
    pub v3: F,
    pub s: F,
    pub t_img: F,
    /// `℘(q) = u + vi`; zero unless built for a `q` pair.
    pub u: F,
    pub v: F,
    pub b: F,
}

impl<F: Real> HessianEntries<F> {
    pub fn new(inv: &LatticeInvariants<F>, mu: Option<Complex<F>>) -> Self {
        let uv = |k: usize| -(inv.e(k) + inv.eta1);
        let mu = mu.unwrap_or_else(|| Complex::new(F::zero(), F::zero()));
        HessianEntries {
            u1: uv(1).re,
            v1: uv(1).im,
            u2: uv(2).re,
            v2: uv(2).im,
            u3: uv(3).re,
            v3: uv(3).im,
            s: inv.eta1.re,
            t_img: inv.eta1.im,
            u: mu.re,
            v: mu.im,
            b: inv.tau.im(),
        }
    }

    pub fn uv(&self, k: usize) -> (F, F) {
        match k {
            1 => (self.u1, self.v1),
            2 => (self.u2, self.v2),
            3 => (self.u3, self.v3),
            _ => panic!("index must be 1, 2 or 3, got {k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HessianMatrix<F> {
    pub entries: [[F; 4]; 4],
    pub det: F,
}

impl<F: Real> HessianMatrix<F> {
    fn from_entries(entries: [[F; 4]; 4]) -> Self {
        let m = Matrix4::<f64>::from_fn(|r, c| to_f64(entries[r][c]));
        HessianMatrix { entries, det: lit(m.determinant()) }
    }

    /// Largest `|a_rc − a_cr|`.
    pub fn asymmetry(&self) -> F {
        let mut worst = F::zero();
        for r in 0..4 {
            for c in 0..4 {
                worst = worst.max((self.entries[r][c] - self.entries[c][r]).abs());
            }
        }
        worst
    }

    pub fn max_entry(&self) -> F {
        self.entries.iter().flatten().fold(F::zero(), |m, x| m.max(x.abs()))
    }
}

fn third(i: usize, j: usize) -> Result<usize> {
    if i == j || !(1..=3).contains(&i) || !(1..=3).contains(&j) {
        return Err(Error::InvalidArgument(format!("half period pair ({i},{j})")));
    }
    Ok(6 - i - j)
}

pub fn hessian_half_period_with<F: Real>(i: usize, j: usize, inv: &LatticeInvariants<F>) -> Result<HessianMatrix<F>> {
    let k = third(i, j)?;
    let h = HessianEntries::new(inv, None);
    let two = lit::<F>(2.0);
    let w = two * F::PI() / h.b;
    let (ui, vi) = h.uv(i);
    let (uj, vj) = h.uv(j);
    let (uk, vk) = h.uv(k);
    let rows = [
        [two * ui - uk, vk - two * vi, uk, -vk],
        [vk - two * vi, uk - two * ui - w, -vk, -uk - w],
        [uk, -vk, two * uj - uk, vk - two * vj],
        [-vk, -uk - w, vk - two * vj, uk - two * uj - w],
    ];
    Ok(HessianMatrix::from_entries(scaled(rows)))
}

pub fn hessian_half_period<F: Real>(i: usize, j: usize, tau: ModuliPoint<F>) -> Result<HessianMatrix<F>> {
    hessian_half_period_with(i, j, Lattice::new(tau)?.invariants())
}

/// Matrix at `(q, −q)` from `μ = ℘(q)`.
pub fn hessian_q_with<F: Real>(inv: &LatticeInvariants<F>, mu: Complex<F>) -> HessianMatrix<F> {
    let h = HessianEntries::new(inv, Some(mu));
    let (u, v, s, t) = (h.u, h.v, h.s, h.t_img);
    let w = lit::<F>(2.0) * F::PI() / h.b;
    let four = lit::<F>(4.0);
    let two = lit::<F>(2.0);
    let rows = [
        [-four * u - s, four * v + t, two * u - s, -two * v + t],
        [four * v + t, four * u + s - w, -two * v + t, -two * u + s - w],
        [two * u - s, -two * v + t, -four * u - s, four * v + t],
        [-two * v + t, -two * u + s - w, four * v + t, four * u + s - w],
    ];
    HessianMatrix::from_entries(scaled(rows))
}

/// `sign = +1` for `q₊`, `−1` for `q₋`.
pub fn hessian_q<F: Real>(sign: f64, tau: ModuliPoint<F>) -> Result<HessianMatrix<F>> {
    let lat = Lattice::new(tau)?;
    let q = q_point(&lat, sign)?;
    Ok(hessian_q_with(lat.invariants(), lat.wp(q.z)?))
}

fn scaled<F: Real>(mut rows: [[F; 4]; 4]) -> [[F; 4]; 4] {
    let k = F::one() / (lit::<F>(2.0) * F::PI());
    for v in rows.iter_mut().flatten() {
        *v = *v * k;
    }
    rows
}

/// `2e_ie_j + e_k² − 3e_kη₁`.
pub fn half_period_core<F: Real>(i: usize, j: usize, inv: &LatticeInvariants<F>) -> Result<Complex<F>> {
    let k = third(i, j)?;
    let ek = inv.e(k);
    Ok(inv.e(i) * inv.e(j) * lit::<F>(2.0) + ek * ek - ek * inv.eta1 * lit::<F>(3.0))
}

/// A closed-form determinant and the sum of its term magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedDet<F> {
    pub value: F,
    pub scale: F,
}

fn two_pi_4<F: Real>() -> F {
    (lit::<F>(2.0) * F::PI()).powi(4)
}

/// `(4/(2π)⁴)(|A|² + (2π/b)Re(3ē_k A))` with `A = 2e_ie_j + e_k² − 3e_kη₁`.
pub fn det_half_period_closed<F: Real>(i: usize, j: usize, inv: &LatticeInvariants<F>) -> Result<ClosedDet<F>> {
    let k = third(i, j)?;
    let a = half_period_core(i, j, inv)?;
    let b = inv.tau.im();
    let w = lit::<F>(2.0) * F::PI() / b;
    let cross = inv.e(k).conj() * a * lit::<F>(3.0);
    let pre = lit::<F>(4.0) / two_pi_4::<F>();
    Ok(ClosedDet {
        value: pre * (a.norm_sqr() + w * cross.re),
        scale: pre * (a.norm_sqr() + w * cross.norm()),
    })
}

/// `4|f_{k,∞}|² Im φ_k / ((2π)⁴ Im τ)`.
pub fn det_half_period_phi<F: Real>(i: usize, j: usize, lat: &Lattice<F>) -> Result<F> {
    let k = third(i, j)?;
    let inv = lat.invariants();
    let branch = PhiBranch::from_k(k).expect("k in 1..=3");
    let ev = phi_with(branch, inv, &lat.tau_derivatives());
    let f = ev.denominator;
    let pre = lit::<F>(4.0) * f.norm_sqr() / (two_pi_4::<F>() * inv.tau.im());
    // |f|² Im φ_k = |f|² b − 6π Re(e_k f̄) tends to zero at a pole of φ_k
    Ok(ev.value.as_finite().map_or(F::zero(), |phi| pre * phi.im))
}

/// `(9/π⁴)|μ|²(|μ+η₁|² − (2π/b)Re(μ+η₁))`.
pub fn det_q_closed<F: Real>(inv: &LatticeInvariants<F>, mu: Complex<F>) -> ClosedDet<F> {
    let b = inv.tau.im();
    let w = lit::<F>(2.0) * F::PI() / b;
    let m = mu + inv.eta1;
    let pre = lit::<F>(9.0) / F::PI().powi(4) * mu.norm_sqr();
    ClosedDet {
        value: pre * (m.norm_sqr() - w * m.re),
        scale: pre * (m.norm_sqr() + w * m.re.abs()),
    }
}

/// `3|g₂|/(4π⁴ Im τ) · |℘(q_±)+η₁|² · Im φ_±`.
pub fn det_q_phi<F: Real>(sign: f64, lat: &Lattice<F>) -> F {
    let inv = lat.invariants();
    let branch = if sign > 0.0 { PhiBranch::Plus } else { PhiBranch::Minus };
    let mu = inv.sqrt_g2_12() * lit::<F>(sign);
    let m = mu + inv.eta1;
    let pre = lit::<F>(3.0) * inv.g2.norm() / (lit::<F>(4.0) * F::PI().powi(4) * inv.tau.im());
    // as for φ_k, the product vanishes at a pole
    phi_with(branch, inv, &lat.tau_derivatives())
        .value
        .as_finite()
        .map_or(F::zero(), |phi| pre * m.norm_sqr() * phi.im)
}

/// One trivial critical point: the matrix determinant against both closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HessianCheck<F> {
    pub kind: CriticalKind,
    pub tau: Complex<F>,
    pub det_matrix: F,
    pub det_closed: F,
    pub det_phi: F,
    pub scale: F,
    pub degenerate: bool,
}

impl<F: Real> HessianCheck<F> {
    /// Largest disagreement among the three routes, relative to `scale`.
    pub fn relative_error(&self) -> F {
        let s = self.scale.max(F::min_positive_value());
        let a = (self.det_matrix - self.det_closed).abs();
        let b = (self.det_closed - self.det_phi).abs();
        let c = (self.det_matrix - self.det_phi).abs();
        a.max(b).max(c) / s
    }
}

/// Determinants at all five trivial critical points of `G₂(·,·|τ)`.
pub fn hessian_checks<F: Real>(tau: ModuliPoint<F>) -> Result<Vec<HessianCheck<F>>> {
    let lat = Lattice::new(tau)?;
    let inv = lat.invariants();
    let degenerate = q_degenerate(inv);
    let mut out = Vec::with_capacity(5);
    for kind in CriticalKind::ALL {
        let (mat, closed, phi) = match kind {
            CriticalKind::HalfPeriod(i, j) => (
                hessian_half_period_with(i, j, inv)?,
                det_half_period_closed(i, j, inv)?,
                det_half_period_phi(i, j, &lat)?,
            ),
            _ => {
                let sign = kind.sign().unwrap_or(1.0);
                let mu = inv.sqrt_g2_12() * lit::<F>(sign);
                (hessian_q_with(inv, mu), det_q_closed(inv, mu), det_q_phi(sign, &lat))
            }
        };
        let entry_scale = mat.max_entry().powi(4);
        out.push(HessianCheck {
            kind,
            tau: tau.tau(),
            det_matrix: mat.det,
            det_closed: closed.value,
            det_phi: phi,
            scale: closed.scale.max(entry_scale),
            degenerate: degenerate && kind.sign().is_some(),
        });
    }
    Ok(out)
}
