//! Degeneracy curves of the multiple Green function at its trivial critical
//! points, traced as zero sets of real fields on ℍ.
//!
//! `C_{i,j}` is the zero set of
//! `H_k = 4/(2π)⁴ (|f_{k,∞}|² − (6π/b) Re(ē_k f_{k,∞}))` and `C̃_±` that of
//! `H_± = |φ|² − (2π/b) Re φ` with `φ = η₁ ± √(g₂/12)`, `b = Im τ`.
//!
//! The two `C̃` curves are swapped across the branch cut of the square root,
//! so they are traced together as the zero set of `H₊H₋` (single valued) and
//! each point is then labelled by the factor that vanishes there.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernel::{DTauInvariants, Lattice, LatticeInvariants, ModuliPoint};
use crate::moduli::{phi_with, s_orbit_in, PhiBranch};
use crate::region::Rectangle;
use crate::scalar::{lit, to_f64, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CurveId {
    C12,
    C13,
    C23,
    #[serde(rename = "Ctilde_plus")]
    CtildePlus,
    #[serde(rename = "Ctilde_minus")]
    CtildeMinus,
}

impl CurveId {
    pub const ALL: [CurveId; 5] = [CurveId::C12, CurveId::C13, CurveId::C23, CurveId::CtildePlus, CurveId::CtildeMinus];

    pub fn as_str(&self) -> &'static str {
        match self {
            CurveId::C12 => "C12",
            CurveId::C13 => "C13",
            CurveId::C23 => "C23",
            CurveId::CtildePlus => "Ctilde_plus",
            CurveId::CtildeMinus => "Ctilde_minus",
        }
    }

    /// The `k` of `f_{k,∞}` for `C_{i,j}`, `{i,j,k} = {1,2,3}`.
    pub fn k(&self) -> Option<usize> {
        match self {
            CurveId::C12 => Some(3),
            CurveId::C13 => Some(2),
            CurveId::C23 => Some(1),
            _ => None,
        }
    }

    pub fn sign(&self) -> Option<f64> {
        match self {
            CurveId::CtildePlus => Some(1.0),
            CurveId::CtildeMinus => Some(-1.0),
            _ => None,
        }
    }

    pub fn color(&self) -> &'static str {
        match self {
            CurveId::C12 => "#d62728",
            CurveId::C13 => "#1f77b4",
            CurveId::C23 => "#2ca02c",
            CurveId::CtildePlus => "#ff7f0e",
            CurveId::CtildeMinus => "#9467bd",
        }
    }
}

impl fmt::Display for CurveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CurveId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CurveId::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown curve id {s:?}")))
    }
}

/// A field value together with the sum of the magnitudes of its terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldValue<F> {
    pub value: F,
    pub scale: F,
}

impl<F: Real> FieldValue<F> {
    pub fn relative(&self) -> F {
        self.value.abs() / self.scale.max(F::min_positive_value())
    }
}

fn k_const<F: Real>() -> F {
    lit::<F>(4.0) / (lit::<F>(2.0) * F::PI()).powi(4)
}

/// `f_{k,∞} = 3e_kη₁ + g₂/2 − 3e_k²`.
pub fn f_infinity<F: Real>(k: usize, inv: &LatticeInvariants<F>) -> Complex<F> {
    let e = inv.e(k);
    let three = lit::<F>(3.0);
    e * inv.eta1 * three + inv.g2 * lit::<F>(0.5) - e * e * three
}

/// `φ = η₁ + σ√(g₂/12)` on the principal root.
pub fn varphi<F: Real>(sign: f64, inv: &LatticeInvariants<F>) -> Complex<F> {
    inv.eta1 + inv.sqrt_g2_12() * lit::<F>(sign)
}

fn h_k<F: Real>(k: usize, inv: &LatticeInvariants<F>) -> FieldValue<F> {
    let f = f_infinity(k, inv);
    let e = inv.e(k);
    let w = lit::<F>(6.0) * F::PI() / inv.tau.im();
    let cross = e.conj() * f;
    // magnitude of the three terms of f that cancel against each other
    let three = lit::<F>(3.0);
    let t = (e * inv.eta1).norm() * three + inv.g2.norm() * lit::<F>(0.5) + e.norm_sqr() * three;
    FieldValue {
        value: k_const::<F>() * (f.norm_sqr() - w * cross.re),
        scale: k_const::<F>() * (t * t + w * e.norm() * t),
    }
}

/// `|φ|² − (2π/b) Re φ` for `φ = η₁ + s`; the scale uses `|η₁| + |s|` so it
/// stays positive where `φ` itself vanishes.
fn h_phi<F: Real>(eta1: Complex<F>, s: Complex<F>, b: F) -> FieldValue<F> {
    let phi = eta1 + s;
    let w = lit::<F>(2.0) * F::PI() / b;
    let a = eta1.norm() + s.norm();
    FieldValue {
        value: phi.norm_sqr() - w * phi.re,
        scale: a * a + w * a,
    }
}

pub fn field_with<F: Real>(id: CurveId, inv: &LatticeInvariants<F>) -> FieldValue<F> {
    match (id.k(), id.sign()) {
        (Some(k), _) => h_k(k, inv),
        (_, Some(s)) => h_phi(inv.eta1, inv.sqrt_g2_12() * lit::<F>(s), inv.tau.im()),
        _ => unreachable!("every curve id has k or a sign"),
    }
}

/// `H_k` for `C_{i,j}`, `H_±` for `C̃_±`. The `|g₂|` factor of the
/// determinant is not part of `H_±`.
pub fn scalar_field<F: Real>(id: CurveId, tau: ModuliPoint<F>) -> Result<F> {
    Ok(field_with(id, Lattice::new(tau)?.invariants()).value)
}

/// `H₊H₋`, whose zero set is `C̃₊ ∪ C̃₋`.
pub fn product_field<F: Real>(inv: &LatticeInvariants<F>) -> FieldValue<F> {
    let b = inv.tau.im();
    let s = inv.sqrt_g2_12();
    let p = h_phi(inv.eta1, s, b);
    let m = h_phi(inv.eta1, -s, b);
    FieldValue { value: p.value * m.value, scale: p.scale * m.scale }
}

/// Which branch of the smoothness argument applies at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientCase {
    /// `f_{k,∞} = 0` (or `φ = 0` for `C̃_±`): `∇H` is carried by `f′` (or `φ′`).
    Vanishing,
    /// Otherwise the curve is locally `Im φ_k = 0` (or `Im φ_± = 0`).
    ImPhi,
}

/// Relative size of `f` or `φ` below which [`GradientCase::Vanishing`] applies.
pub const VANISHING_REL: f64 = 1e-6;

fn grad_from_parts<F: Real>(da: F, db: F) -> [F; 2] {
    [da, db]
}

/// Exact `∇H = (∂_a H, ∂_b H)` from the closed-form τ-derivatives.
pub fn analytic_gradient<F: Real>(id: CurveId, inv: &LatticeInvariants<F>, d: &DTauInvariants<F>) -> [F; 2] {
    let b = inv.tau.im();
    let pi = F::PI();
    let i = Complex::new(F::zero(), F::one());
    let two = lit::<F>(2.0);
    match (id.k(), id.sign()) {
        (Some(k), _) => {
            let (f, df) = f_infinity_with_dtau(k, inv, d);
            let e = inv.e(k);
            let de = d.de(k);
            let w = lit::<F>(6.0) * pi / b;
            let kk = k_const::<F>();
            let da = two * (f.conj() * df).re - w * (de.conj() * f + e.conj() * df).re;
            let db = -two * (f.conj() * df).im + w / b * (e.conj() * f).re
                - w * (-(i * de.conj() * f) + i * e.conj() * df).re;
            grad_from_parts(kk * da, kk * db)
        }
        (_, Some(s)) => {
            let (phi, dphi) = varphi_with_dtau(s, inv, d);
            let w = two * pi / b;
            let da = two * (phi.conj() * dphi).re - w * dphi.re;
            let db = -two * (phi.conj() * dphi).im + w / b * phi.re + w * dphi.im;
            grad_from_parts(da, db)
        }
        _ => unreachable!(),
    }
}

fn f_infinity_with_dtau<F: Real>(k: usize, inv: &LatticeInvariants<F>, d: &DTauInvariants<F>) -> (Complex<F>, Complex<F>) {
    let e = inv.e(k);
    let de = d.de(k);
    let three = lit::<F>(3.0);
    let df = (de * inv.eta1 + e * d.deta1) * three + d.dg2 * lit::<F>(0.5) - e * de * lit::<F>(6.0);
    (f_infinity(k, inv), df)
}

fn varphi_with_dtau<F: Real>(sign: f64, inv: &LatticeInvariants<F>, d: &DTauInvariants<F>) -> (Complex<F>, Complex<F>) {
    let s = inv.sqrt_g2_12() * lit::<F>(sign);
    let ds = if s.norm() == F::zero() {
        Complex::new(F::zero(), F::zero())
    } else {
        d.dg2 / (s * lit::<F>(24.0))
    };
    (inv.eta1 + s, d.deta1 + ds)
}

/// The gradient as written in the smoothness proof for the applicable case.
/// Exact at points of the curve; elsewhere it drops terms proportional to
/// the field value or to the vanishing quantity.
pub fn case_gradient<F: Real>(id: CurveId, inv: &LatticeInvariants<F>, d: &DTauInvariants<F>) -> (GradientCase, [F; 2]) {
    let b = inv.tau.im();
    let pi = F::PI();
    match (id.k(), id.sign()) {
        (Some(k), _) => {
            let (f, df) = f_infinity_with_dtau(k, inv, d);
            let e = inv.e(k);
            let w = lit::<F>(6.0) * pi / b;
            if f.norm() <= lit::<F>(VANISHING_REL) * w * e.norm() {
                let pre = -lit::<F>(24.0) * pi / ((lit::<F>(2.0) * pi).powi(4) * b);
                let da = pre * (e.re * df.re + e.im * df.im);
                let db = pre * (e.im * df.re - e.re * df.im);
                (GradientCase::Vanishing, [da, db])
            } else {
                let branch = PhiBranch::from_k(k).expect("k in 1..=3");
                let dphi = phi_with(branch, inv, d).dtau.unwrap_or_else(|| Complex::new(F::zero(), F::zero()));
                let pre = k_const::<F>() * f.norm_sqr() / b;
                (GradientCase::ImPhi, [pre * dphi.im, pre * dphi.re])
            }
        }
        (_, Some(s)) => {
            let (phi, dphi) = varphi_with_dtau(s, inv, d);
            let w = lit::<F>(2.0) * pi / b;
            if phi.norm() <= lit::<F>(VANISHING_REL) * w {
                (GradientCase::Vanishing, [-w * dphi.re, w * dphi.im])
            } else {
                // φ_± = τ − 2πi/φ, so φ_±′ = 1 + 2πi φ′/φ²
                let two_pi_i = Complex::new(F::zero(), lit::<F>(2.0) * pi);
                let dphi_pm = Complex::new(F::one(), F::zero()) + two_pi_i * dphi / (phi * phi);
                let pre = phi.norm_sqr() / b;
                (GradientCase::ImPhi, [pre * dphi_pm.im, pre * dphi_pm.re])
            }
        }
        _ => unreachable!(),
    }
}

/// Finite-difference and analytic gradients at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientWitness<F> {
    /// Central differences at step `1e−6`.
    pub fd: [F; 2],
    /// Central differences at step `2e−6`.
    pub fd_coarse: [F; 2],
    pub analytic: [F; 2],
    pub case: GradientCase,
    pub case_form: [F; 2],
}

fn norm2<F: Real>(v: [F; 2]) -> F {
    v[0].hypot(v[1])
}

fn diff2<F: Real>(a: [F; 2], b: [F; 2]) -> F {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl<F: Real> GradientWitness<F> {
    pub fn norm(&self) -> F {
        norm2(self.fd)
    }

    /// `|fd − analytic| / |analytic|`.
    pub fn analytic_gap(&self) -> F {
        diff2(self.fd, self.analytic) / norm2(self.analytic).max(F::min_positive_value())
    }

    pub fn case_gap(&self) -> F {
        diff2(self.fd, self.case_form) / norm2(self.case_form).max(F::min_positive_value())
    }

    /// Step-halving discrepancy of the finite differences.
    pub fn richardson_gap(&self) -> F {
        diff2(self.fd, self.fd_coarse) / norm2(self.fd).max(F::min_positive_value())
    }
}

/// Evaluates the field for `id` at `tau`, keeping the root `±√(g₂/12)`
/// closest to `anchor` for the `C̃` fields so differences never straddle
/// the branch cut.
fn field_near<F: Real>(id: CurveId, tau: Complex<F>, anchor: Option<Complex<F>>) -> Result<F> {
    let lat = Lattice::new(ModuliPoint::from_complex(tau)?)?;
    let inv = lat.invariants();
    match (id.sign(), anchor) {
        (Some(_), Some(a)) => {
            let r = inv.sqrt_g2_12();
            let s = if (r - a).norm() <= (-r - a).norm() { r } else { -r };
            Ok(h_phi(inv.eta1, s, inv.tau.im()).value)
        }
        _ => Ok(field_with(id, inv).value),
    }
}

pub const FD_STEP: f64 = 1e-6;

pub fn gradient_witness<F: Real>(id: CurveId, tau: ModuliPoint<F>) -> Result<GradientWitness<F>> {
    let lat = Lattice::new(tau)?;
    let inv = lat.invariants();
    let d = lat.tau_derivatives();
    let anchor = id.sign().map(|s| inv.sqrt_g2_12() * lit::<F>(s));
    let t = tau.tau();
    let central = |h: F| -> Result<[F; 2]> {
        let re = Complex::new(h, F::zero());
        let im = Complex::new(F::zero(), h);
        let two_h = h + h;
        Ok([
            (field_near(id, t + re, anchor)? - field_near(id, t - re, anchor)?) / two_h,
            (field_near(id, t + im, anchor)? - field_near(id, t - im, anchor)?) / two_h,
        ])
    };
    let h = lit::<F>(FD_STEP);
    let (case, case_form) = case_gradient(id, inv, &d);
    Ok(GradientWitness {
        fd: central(h)?,
        fd_coarse: central(h + h)?,
        analytic: analytic_gradient(id, inv, &d),
        case,
        case_form,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<F> {
    pub rect: Rectangle<F>,
    /// Number of cells along each axis.
    pub nx: usize,
    pub ny: usize,
    /// Edge refinement stops when the bracket is shorter than this.
    pub refine_tol: F,
}

impl<F: Real> GridSpec<F> {
    pub fn new(rect: Rectangle<F>, nx: usize, ny: usize) -> Result<Self> {
        if nx < 16 || ny < 16 {
            return Err(Error::InvalidArgument(format!("grid {nx}x{ny}: need at least 16 cells per axis")));
        }
        Ok(GridSpec { rect, nx, ny, refine_tol: lit(1e-14) })
    }

    /// `|Re τ| ≤ 1`, `0.1 ≤ Im τ ≤ 3` at 400×400.
    pub fn default_region() -> Self {
        let rect = Rectangle::new(-F::one(), F::one(), lit(0.1), lit(3.0)).expect("valid default region");
        GridSpec::new(rect, 400, 400).expect("valid default grid")
    }

    pub fn dx(&self) -> F {
        self.rect.width() / lit::<F>(self.nx as f64)
    }

    pub fn dy(&self) -> F {
        self.rect.height() / lit::<F>(self.ny as f64)
    }

    pub fn cell_diagonal(&self) -> F {
        self.dx().hypot(self.dy())
    }

    fn node(&self, i: usize, j: usize) -> Complex<F> {
        Complex::new(
            self.rect.re_min() + self.dx() * lit::<F>(i as f64),
            self.rect.im_min() + self.dy() * lit::<F>(j as f64),
        )
    }

    /// Short stable hash of the region, used in file names.
    pub fn region_hash(&self) -> String {
        let r = self.rect.cast::<f64>();
        let key = format!("{:.17e},{:.17e},{:.17e},{:.17e}", r.re_min(), r.re_max(), r.im_min(), r.im_max());
        let digest = Sha256::digest(key.as_bytes());
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePolyline<F> {
    pub id: CurveId,
    pub points: Vec<ModuliPoint<F>>,
    /// `|H| / scale` at each point.
    pub residuals: Vec<F>,
    /// `|∇H| / scale` at each point, from central differences.
    pub grad_norms: Vec<F>,
    pub scales: Vec<F>,
    pub cases: Vec<GradientCase>,
    /// Largest relative disagreement between finite-difference and analytic
    /// gradients (general and case form) along the polyline.
    pub max_gradient_gap: F,
    /// Points within two cells of `𝔖`.
    pub near_orbit: Vec<bool>,
    pub closed: bool,
}

impl<F: Real> CurvePolyline<F> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn max_residual(&self) -> F {
        self.residuals.iter().fold(F::zero(), |m, &r| m.max(r))
    }

    pub fn min_grad_norm(&self) -> F {
        self.grad_norms.iter().fold(F::infinity(), |m, &g| m.min(g))
    }

    pub fn max_step(&self) -> F {
        self.points
            .windows(2)
            .map(|w| (w[1].tau() - w[0].tau()).norm())
            .fold(F::zero(), |m, s| m.max(s))
    }
}

/// Polylines of one curve plus diagnostics from the tracing pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceOutput<F> {
    pub id: CurveId,
    pub polylines: Vec<CurvePolyline<F>>,
    /// Crossings where the field is below numerical resolution: the two
    /// finite-difference steps or the analytic gradient disagree by more
    /// than [`RESOLVE_GAP`]. They are left out of the polylines.
    pub unresolved: Vec<ModuliPoint<F>>,
    pub warnings: Vec<String>,
    pub cell_diagonal: F,
}

impl<F: Real> TraceOutput<F> {
    pub fn point_count(&self) -> usize {
        self.polylines.iter().map(|p| p.len()).sum()
    }

    pub fn points(&self) -> impl Iterator<Item = &ModuliPoint<F>> {
        self.polylines.iter().flat_map(|p| p.points.iter())
    }
}

/// The traced scalar: either one `H_k` or the product `H₊H₋`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Traced {
    Single(CurveId),
    Product,
}

impl Traced {
    fn eval<F: Real>(&self, inv: &LatticeInvariants<F>) -> FieldValue<F> {
        match self {
            Traced::Single(id) => field_with(*id, inv),
            Traced::Product => product_field(inv),
        }
    }

    fn eval_at<F: Real>(&self, tau: Complex<F>) -> Result<FieldValue<F>> {
        Ok(self.eval(Lattice::new(ModuliPoint::from_complex(tau)?)?.invariants()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Edge {
    /// Between nodes `(i, j)` and `(i+1, j)`.
    H(usize, usize),
    /// Between nodes `(i, j)` and `(i, j+1)`.
    V(usize, usize),
}

struct NodeGrid<F> {
    nx: usize,
    values: Vec<Vec<F>>,
}

impl<F: Real> NodeGrid<F> {
    fn positive(&self, slot: usize, i: usize, j: usize) -> bool {
        self.values[j * (self.nx + 1) + i][slot] >= F::zero()
    }
}

fn evaluate_nodes<F: Real>(grid: &GridSpec<F>, fields: &[Traced]) -> Result<NodeGrid<F>> {
    let n = (grid.nx + 1) * (grid.ny + 1);
    let values = (0..n)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx % (grid.nx + 1), idx / (grid.nx + 1));
            let lat = Lattice::new(ModuliPoint::from_complex(grid.node(i, j))?)?;
            Ok(fields.iter().map(|f| f.eval(lat.invariants()).value).collect())
        })
        .collect::<Result<Vec<Vec<F>>>>()?;
    Ok(NodeGrid { nx: grid.nx, values })
}

fn edge_ends<F: Real>(grid: &GridSpec<F>, e: Edge) -> (Complex<F>, Complex<F>) {
    match e {
        Edge::H(i, j) => (grid.node(i, j), grid.node(i + 1, j)),
        Edge::V(i, j) => (grid.node(i, j), grid.node(i, j + 1)),
    }
}

/// Illinois regula falsi along the segment `a → b`.
fn refine_edge<F: Real>(field: Traced, a: Complex<F>, b: Complex<F>, fa: F, fb: F, tol: F) -> Result<Complex<F>> {
    let (mut s0, mut s1) = (F::zero(), F::one());
    let (mut f0, mut f1) = (fa, fb);
    let len = (b - a).norm();
    let at = |s: F| a + (b - a) * s;
    let half = lit::<F>(0.5);
    let mut side = 0i8;
    for _ in 0..200 {
        if (s1 - s0) * len <= tol {
            break;
        }
        let mut s = (s0 * f1 - s1 * f0) / (f1 - f0);
        if !(s > s0 && s < s1) {
            s = (s0 + s1) * half;
        }
        let v = field.eval_at(at(s))?.value;
        if v == F::zero() {
            return Ok(at(s));
        }
        if (v < F::zero()) == (f0 < F::zero()) {
            s0 = s;
            f0 = v;
            if side == -1 {
                f1 = f1 * half;
            }
            side = -1;
        } else {
            s1 = s;
            f1 = v;
            if side == 1 {
                f0 = f0 * half;
            }
            side = 1;
        }
    }
    Ok(at(if f0.abs() <= f1.abs() { s0 } else { s1 }))
}

/// Marching squares on one traced field: returns chains of refined crossings.
fn march<F: Real>(grid: &GridSpec<F>, nodes: &NodeGrid<F>, slot: usize, field: Traced) -> Result<(Vec<(Vec<Complex<F>>, bool)>, Vec<String>)> {
    let mut edges = Vec::new();
    for j in 0..=grid.ny {
        for i in 0..=grid.nx {
            let p = nodes.positive(slot, i, j);
            if i < grid.nx && p != nodes.positive(slot, i + 1, j) {
                edges.push(Edge::H(i, j));
            }
            if j < grid.ny && p != nodes.positive(slot, i, j + 1) {
                edges.push(Edge::V(i, j));
            }
        }
    }
    edges.sort();
    let index = |e: Edge| edges.binary_search(&e).ok();
    let val = |i: usize, j: usize| nodes.values[j * (grid.nx + 1) + i][slot];

    let crossings = edges
        .par_iter()
        .map(|&e| {
            let (a, b) = edge_ends(grid, e);
            let (fa, fb) = match e {
                Edge::H(i, j) => (val(i, j), val(i + 1, j)),
                Edge::V(i, j) => (val(i, j), val(i, j + 1)),
            };
            refine_edge(field, a, b, fa, fb, grid.refine_tol)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut links: Vec<Vec<usize>> = vec![Vec::new(); edges.len()];
    let mut warnings = Vec::new();
    let mut link = |a: usize, b: usize| {
        links[a].push(b);
        links[b].push(a);
    };
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            // bottom, right, top, left
            let sides = [Edge::H(i, j), Edge::V(i + 1, j), Edge::H(i, j + 1), Edge::V(i, j)];
            let hit: Vec<(usize, usize)> = sides
                .iter()
                .enumerate()
                .filter_map(|(s, &e)| index(e).map(|x| (s, x)))
                .collect();
            match hit.len() {
                0 => {}
                2 => link(hit[0].1, hit[1].1),
                4 => {
                    let center = (grid.node(i, j) + grid.node(i + 1, j + 1)) * lit::<F>(0.5);
                    let c = field.eval_at(center)?.value >= F::zero();
                    let id = |s: usize| hit[s].1;
                    if c == nodes.positive(slot, i, j) {
                        // the lower-left sign connects through the centre
                        link(id(0), id(1));
                        link(id(2), id(3));
                    } else {
                        link(id(0), id(3));
                        link(id(1), id(2));
                    }
                    warnings.push(format!(
                        "saddle cell at {:.6}+{:.6}i resolved by centre value",
                        to_f64(center.re),
                        to_f64(center.im)
                    ));
                }
                n => warnings.push(format!("cell ({i},{j}) has {n} crossings; grid too coarse")),
            }
        }
    }

    let mut used = vec![false; edges.len()];
    let mut chains = Vec::new();
    let walk = |start: usize, used: &mut Vec<bool>| -> (Vec<usize>, bool) {
        let mut chain = vec![start];
        used[start] = true;
        let mut cur = start;
        loop {
            match links[cur].iter().copied().find(|&n| !used[n]) {
                Some(n) => {
                    used[n] = true;
                    chain.push(n);
                    cur = n;
                }
                None => {
                    let closed = chain.len() > 2 && links[cur].contains(&start);
                    return (chain, closed);
                }
            }
        }
    };
    // open chains start at an end, then the remaining loops
    for start in (0..edges.len()).filter(|&s| links[s].len() < 2) {
        if !used[start] {
            chains.push(walk(start, &mut used));
        }
    }
    for start in 0..edges.len() {
        if !used[start] {
            chains.push(walk(start, &mut used));
        }
    }
    let out = chains
        .into_iter()
        .map(|(idx, closed)| (idx.into_iter().map(|x| crossings[x]).collect(), closed))
        .collect();
    Ok((out, warnings))
}

/// Relative gradient disagreement above which a crossing counts as unresolved.
pub const RESOLVE_GAP: f64 = 1e-3;

struct PointData<F> {
    tau: ModuliPoint<F>,
    label: CurveId,
    resolved: bool,
    field: FieldValue<F>,
    grad: GradientWitness<F>,
}

fn point_data<F: Real>(field: Traced, tau: Complex<F>) -> Result<PointData<F>> {
    let tau = ModuliPoint::from_complex(tau)?;
    let inv = *Lattice::new(tau)?.invariants();
    let label = match field {
        Traced::Single(id) => id,
        Traced::Product => {
            let p = field_with(CurveId::CtildePlus, &inv);
            let m = field_with(CurveId::CtildeMinus, &inv);
            if p.relative() <= m.relative() {
                CurveId::CtildePlus
            } else {
                CurveId::CtildeMinus
            }
        }
    };
    let grad = gradient_witness(label, tau)?;
    let gap = lit::<F>(RESOLVE_GAP);
    let resolved = grad.richardson_gap() < gap && grad.analytic_gap() < gap;
    Ok(PointData { tau, label, resolved, field: field_with(label, &inv), grad })
}

fn build_polyline<F: Real>(id: CurveId, pts: &[&PointData<F>], closed: bool, orbit: &[ModuliPoint<F>], near: F) -> CurvePolyline<F> {
    let scale = |p: &PointData<F>| p.field.scale.max(F::min_positive_value());
    CurvePolyline {
        id,
        points: pts.iter().map(|p| p.tau).collect(),
        residuals: pts.iter().map(|p| p.field.relative()).collect(),
        grad_norms: pts.iter().map(|p| p.grad.norm() / scale(p)).collect(),
        scales: pts.iter().map(|p| p.field.scale).collect(),
        cases: pts.iter().map(|p| p.grad.case).collect(),
        max_gradient_gap: pts
            .iter()
            .map(|p| p.grad.analytic_gap().max(p.grad.case_gap()))
            .fold(F::zero(), |m, g| m.max(g)),
        near_orbit: pts
            .iter()
            .map(|p| orbit.iter().any(|o| (o.tau() - p.tau.tau()).norm() < near))
            .collect(),
        closed,
    }
}

/// Splits a chain into maximal runs with one label and resolution status.
fn split_runs<F: Real>(data: Vec<PointData<F>>, closed: bool) -> Vec<(CurveId, bool, Vec<PointData<F>>, bool)> {
    if data.is_empty() {
        return Vec::new();
    }
    let key = |p: &PointData<F>| (p.label, p.resolved);
    if data.iter().all(|p| key(p) == key(&data[0])) {
        let (label, resolved) = key(&data[0]);
        return vec![(label, resolved, data, closed)];
    }
    let mut data = data;
    if closed {
        // start the loop at a change so no run wraps around
        let cut = (1..data.len()).find(|&i| key(&data[i]) != key(&data[i - 1])).unwrap_or(0);
        data.rotate_left(cut);
    }
    let mut runs: Vec<(CurveId, bool, Vec<PointData<F>>, bool)> = Vec::new();
    for p in data {
        match runs.last_mut() {
            Some((label, resolved, run, _)) if (*label, *resolved) == key(&p) => run.push(p),
            _ => runs.push((p.label, p.resolved, vec![p], false)),
        }
    }
    runs
}

fn trace_fields<F: Real>(fields: &[Traced], grid: &GridSpec<F>) -> Result<Vec<TraceOutput<F>>> {
    let nodes = evaluate_nodes(grid, fields)?;
    let orbit = s_orbit_in(&grid.rect);
    let near = grid.cell_diagonal() * lit::<F>(2.0);
    let mut outputs: Vec<TraceOutput<F>> = Vec::new();
    let out_for = |id: CurveId, outputs: &mut Vec<TraceOutput<F>>| -> usize {
        match outputs.iter().position(|o| o.id == id) {
            Some(p) => p,
            None => {
                outputs.push(TraceOutput {
                    id,
                    polylines: Vec::new(),
                    unresolved: Vec::new(),
                    warnings: Vec::new(),
                    cell_diagonal: grid.cell_diagonal(),
                });
                outputs.len() - 1
            }
        }
    };
    for (slot, &field) in fields.iter().enumerate() {
        let (chains, warnings) = march(grid, &nodes, slot, field)?;
        let ids: Vec<CurveId> = match field {
            Traced::Single(id) => vec![id],
            Traced::Product => vec![CurveId::CtildePlus, CurveId::CtildeMinus],
        };
        for &id in &ids {
            let o = out_for(id, &mut outputs);
            outputs[o].warnings.extend(warnings.iter().cloned());
        }
        for (chain, closed) in chains {
            let data = chain
                .par_iter()
                .map(|&t| point_data(field, t))
                .collect::<Result<Vec<_>>>()?;
            for (label, resolved, run, closed) in split_runs(data, closed) {
                let o = out_for(label, &mut outputs);
                if resolved {
                    let refs: Vec<&PointData<F>> = run.iter().collect();
                    outputs[o].polylines.push(build_polyline(label, &refs, closed, &orbit, near));
                } else {
                    outputs[o].unresolved.extend(run.iter().map(|p| p.tau));
                }
            }
        }
    }
    outputs.sort_by_key(|o| o.id);
    Ok(outputs)
}

/// Traces one curve over `grid`.
pub fn trace<F: Real>(id: CurveId, grid: &GridSpec<F>) -> Result<TraceOutput<F>> {
    let field = if id.sign().is_some() { Traced::Product } else { Traced::Single(id) };
    trace_fields(&[field], grid)?
        .into_iter()
        .find(|o| o.id == id)
        .ok_or_else(|| Error::InvalidArgument(format!("no output for {id}")))
}

/// Traces all five curves, sharing one pass of node evaluations.
pub fn trace_all<F: Real>(grid: &GridSpec<F>) -> Result<Vec<TraceOutput<F>>> {
    let fields = [
        Traced::Single(CurveId::C12),
        Traced::Single(CurveId::C13),
        Traced::Single(CurveId::C23),
        Traced::Product,
    ];
    trace_fields(&fields, grid)
}

/// `C̃_±` and the `𝔖` points of a region, with the separation between them
/// and the determinant `det D²G₂(q_±, −q_± | τ)` on both parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition<F> {
    pub sign: f64,
    pub curve: TraceOutput<F>,
    pub orbit: Vec<ModuliPoint<F>>,
    pub min_distance: F,
    /// Ten cell diagonals.
    pub required_distance: F,
    /// Largest `|det| / scale` over the traced points.
    pub det_on_curve: F,
    /// Largest `|det| / scale` over the `𝔖` points.
    pub det_on_orbit: F,
}

/// `(3|g₂|/(4π⁴)) H_±`. In the scale `|g₂|` is measured against
/// `|g₂| + 12|η₁|²` (the two terms of `f_{0,∞}`) so it can vanish relative to it.
fn det_q_field<F: Real>(sign: f64, inv: &LatticeInvariants<F>) -> FieldValue<F> {
    let h = h_phi(inv.eta1, inv.sqrt_g2_12() * lit::<F>(sign), inv.tau.im());
    let pre = lit::<F>(3.0) / (lit::<F>(4.0) * F::PI().powi(4));
    let g = inv.g2.norm();
    let natural = g + lit::<F>(12.0) * inv.eta1.norm_sqr();
    FieldValue { value: pre * g * h.value, scale: pre * natural * h.scale }
}

/// Traces `C̃_±` over `grid`, pairs it with `𝔖` and fails with
/// [`Error::Overlap`] when the two come within ten cell diagonals.
pub fn decompose_c_pm<F: Real>(sign: f64, grid: &GridSpec<F>) -> Result<Decomposition<F>> {
    let id = if sign > 0.0 { CurveId::CtildePlus } else { CurveId::CtildeMinus };
    let d = measure_decomposition(sign, trace(id, grid)?, grid)?;
    if !d.disjoint() {
        return Err(Error::Overlap { distance: to_f64(d.min_distance), margin: to_f64(d.required_distance) });
    }
    Ok(d)
}

impl<F: Real> Decomposition<F> {
    pub fn disjoint(&self) -> bool {
        self.min_distance > self.required_distance
    }

    /// Distance from each `𝔖` point to the nearest traced point.
    pub fn orbit_distances(&self) -> Vec<(ModuliPoint<F>, F)> {
        self.orbit
            .iter()
            .map(|o| (*o, self.curve.points().map(|p| (o.tau() - p.tau()).norm()).fold(F::infinity(), F::min)))
            .collect()
    }
}

/// The measurements of [`decompose_c_pm`] on an existing trace, without the
/// margin check.
pub fn measure_decomposition<F: Real>(sign: f64, curve: TraceOutput<F>, grid: &GridSpec<F>) -> Result<Decomposition<F>> {
    let orbit = s_orbit_in(&grid.rect);
    let min_distance = curve
        .points()
        .flat_map(|p| orbit.iter().map(move |o| (o.tau() - p.tau()).norm()))
        .fold(F::infinity(), |m, d| m.min(d));
    let required = grid.cell_diagonal() * lit::<F>(10.0);
    let det_rel = |t: &ModuliPoint<F>| -> Result<F> { Ok(det_q_field(sign, Lattice::new(*t)?.invariants()).relative()) };
    let max_over = |pts: Vec<&ModuliPoint<F>>| -> Result<F> {
        pts.into_iter().map(det_rel).try_fold(F::zero(), |m, r| r.map(|r| m.max(r)))
    };
    let det_on_curve = max_over(curve.points().collect())?;
    let det_on_orbit = max_over(orbit.iter().collect())?;
    Ok(Decomposition { sign, curve, orbit, min_distance, required_distance: required, det_on_curve, det_on_orbit })
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub curve_id: String,
    pub polyline: usize,
    pub re: f64,
    pub im: f64,
    pub residual: f64,
    pub grad_norm: f64,
}

fn real17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv_rows<F: Real>(polylines: &[CurvePolyline<F>]) -> Vec<CsvRow> {
    let mut rows = Vec::new();
    for (n, p) in polylines.iter().enumerate() {
        let mut push = |k: usize| {
            rows.push(CsvRow {
                curve_id: p.id.as_str().to_string(),
                polyline: n,
                re: to_f64(p.points[k].re()),
                im: to_f64(p.points[k].im()),
                residual: to_f64(p.residuals[k]),
                grad_norm: to_f64(p.grad_norms[k]),
            })
        };
        (0..p.len()).for_each(&mut push);
        if p.closed && !p.is_empty() {
            push(0);
        }
    }
    rows
}

/// Points in traced order, a closed polyline repeating its first point,
/// reals with 17 significant digits.
pub fn to_csv<F: Real>(polylines: &[CurvePolyline<F>]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["curve_id", "polyline", "re", "im", "residual", "grad_norm"])
        .map_err(|e| Error::Io(e.to_string()))?;
    for r in csv_rows(polylines) {
        w.write_record([
            r.curve_id,
            r.polyline.to_string(),
            real17(r.re),
            real17(r.im),
            real17(r.residual),
            real17(r.grad_norm),
        ])
        .map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|r| r.map_err(|e| Error::Io(e.to_string())))
        .collect()
}

const SVG_W: f64 = 800.0;
const SVG_H: f64 = 800.0;
const SVG_PAD: f64 = 60.0;

/// A static plot of the given curves over `rect`: frame, axes and one
/// `<path>` per polyline.
pub fn to_svg<F: Real>(rect: &Rectangle<F>, curves: &[(CurveId, &[CurvePolyline<F>])]) -> String {
    let r = rect.cast::<f64>();
    let sx = (SVG_W - 2.0 * SVG_PAD) / r.width();
    let sy = (SVG_H - 2.0 * SVG_PAD) / r.height();
    let px = |re: f64| SVG_PAD + (re - r.re_min()) * sx;
    let py = |im: f64| SVG_H - SVG_PAD - (im - r.im_min()) * sy;
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" viewBox=\"0 0 {SVG_W} {SVG_H}\">\n"
    ));
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    s.push_str(&format!(
        "<rect class=\"frame\" x=\"{:.3}\" y=\"{:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"none\" stroke=\"black\"/>\n",
        px(r.re_min()),
        py(r.im_max()),
        r.width() * sx,
        r.height() * sy
    ));
    if r.re_min() < 0.0 && r.re_max() > 0.0 {
        s.push_str(&format!(
            "<line class=\"axis\" x1=\"{0:.3}\" y1=\"{1:.3}\" x2=\"{0:.3}\" y2=\"{2:.3}\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n",
            px(0.0),
            py(r.im_min()),
            py(r.im_max())
        ));
    }
    let labels = [
        (px(r.re_min()), SVG_H - SVG_PAD + 20.0, format!("{}", r.re_min())),
        (px(r.re_max()), SVG_H - SVG_PAD + 20.0, format!("{}", r.re_max())),
        (SVG_PAD - 8.0, py(r.im_min()), format!("{}", r.im_min())),
        (SVG_PAD - 8.0, py(r.im_max()), format!("{}", r.im_max())),
        (SVG_W / 2.0, SVG_H - 15.0, "Re τ".to_string()),
        (20.0, SVG_H / 2.0, "Im τ".to_string()),
    ];
    for (x, y, t) in labels {
        s.push_str(&format!("<text x=\"{x:.3}\" y=\"{y:.3}\" font-size=\"12\" text-anchor=\"middle\">{t}</text>\n"));
    }
    for (n, (id, polylines)) in curves.iter().enumerate() {
        s.push_str(&format!(
            "<text x=\"{:.3}\" y=\"{:.3}\" font-size=\"12\" fill=\"{}\">{}</text>\n",
            SVG_W - SVG_PAD - 90.0,
            SVG_PAD + 16.0 * (n as f64 + 1.0),
            id.color(),
            id
        ));
        for p in polylines.iter() {
            let mut d = String::new();
            for (k, t) in p.points.iter().enumerate() {
                let cmd = if k == 0 { 'M' } else { 'L' };
                d.push_str(&format!("{cmd}{:.3},{:.3} ", px(to_f64(t.re())), py(to_f64(t.im()))));
            }
            if p.closed {
                d.push('Z');
            }
            s.push_str(&format!(
                "<path data-curve=\"{id}\" d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
                d.trim_end(),
                id.color()
            ));
        }
    }
    s.push_str("</svg>\n");
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmitFormat {
    Csv,
    Svg,
}

impl EmitFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            EmitFormat::Csv => "csv",
            EmitFormat::Svg => "svg",
        }
    }
}

/// Writes one curve to `dir` and returns the path.
pub fn emit<F: Real>(
    dir: &std::path::Path,
    id: CurveId,
    grid: &GridSpec<F>,
    polylines: &[CurvePolyline<F>],
    format: EmitFormat,
) -> Result<std::path::PathBuf> {
    let body = match format {
        EmitFormat::Csv => to_csv(polylines)?,
        EmitFormat::Svg => to_svg(&grid.rect, &[(id, polylines)]),
    };
    std::fs::create_dir_all(dir)?;
    let path = dir.join(file_name(id, grid, format.extension()));
    std::fs::write(&path, body)?;
    Ok(path)
}

/// `<curve_id>_<region-hash>.<ext>`.
pub fn file_name<F: Real>(id: CurveId, grid: &GridSpec<F>, ext: &str) -> String {
    format!("{}_{}.{}", id, grid.region_hash(), ext)
}
