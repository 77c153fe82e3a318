//! Zero location for holomorphic functions on rectangles of ℍ: argument
//! principle on the boundary, quadrisection, Newton refinement and a
//! simplicity certificate.

use std::sync::OnceLock;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{Lattice, ModuliPoint};
use crate::moduli::{ExtendedScalar, Family, FamilyIndex};
use crate::region::Rectangle;
use crate::scalar::{lit, to_f64, Real};

/// A holomorphic function returning `(f, f′)` at a point.
pub trait Holomorphic<F>: Sync {
    fn eval(&self, z: Complex<F>) -> Result<(Complex<F>, Complex<F>)>;
}

impl<F, T> Holomorphic<F> for T
where
    T: Fn(Complex<F>) -> Result<(Complex<F>, Complex<F>)> + Sync,
{
    fn eval(&self, z: Complex<F>) -> Result<(Complex<F>, Complex<F>)> {
        self(z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroConfig {
    pub max_depth: usize,
    /// Boundary values below `boundary_rel · scale` count as a boundary zero.
    pub boundary_rel: f64,
    pub max_nudges: usize,
    pub nudge_frac: f64,
    pub newton_rel: f64,
    pub newton_max_iter: usize,
    pub merge_dist: f64,
    pub simple_floor: f64,
    /// Distance to the nearest integer that counts as settled.
    pub settle: f64,
    /// Largest distance to an integer that may still be rounded.
    pub round_window: f64,
    pub scale_samples: usize,
    pub max_panel_depth: usize,
    pub shrink_radius: f64,
}

impl Default for ZeroConfig {
    fn default() -> Self {
        ZeroConfig {
            max_depth: 14,
            boundary_rel: 1e-8,
            max_nudges: 5,
            nudge_frac: 0.01,
            newton_rel: 1e-10,
            newton_max_iter: 60,
            merge_dist: 1e-8,
            simple_floor: 1e-6,
            settle: 1e-3,
            round_window: 0.25,
            scale_samples: 64,
            max_panel_depth: 40,
            shrink_radius: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroRecord<F> {
    pub location: ModuliPoint<F>,
    pub winding: i64,
    pub derivative_magnitude: F,
    pub newton_residual: F,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimpleZeroVerdict<F> {
    pub zeros: Vec<ZeroRecord<F>>,
    pub all_simple: bool,
    /// Smallest `|f′|` over the located zeros (infinity when there are none).
    pub min_derivative: F,
    /// Smallest distance from a zero to the boundary of the scanned rectangle.
    pub boundary_margin: F,
    pub scale: F,
    /// Rectangle actually scanned, after boundary nudging.
    pub region: Rectangle<F>,
    pub nudges: usize,
    pub total_winding: i64,
    /// `|witness| / witness scale` at each zero, same order as `zeros`.
    pub witnesses: Vec<F>,
    pub witnesses_ok: bool,
}

/// Outcome of a full scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroScan<F> {
    pub zeros: Vec<ZeroRecord<F>>,
    pub region: Rectangle<F>,
    pub scale: F,
    pub nudges: usize,
    pub total_winding: i64,
}

const GL_ORDER: usize = 10;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static NODES: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    NODES.get_or_init(|| {
        let n = GL_ORDER;
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        for i in 0..n {
            let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, t);
                for j in 2..=n {
                    let p2 = ((2 * j - 1) as f64 * t * p1 - (j - 1) as f64 * p0) / j as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
                let dt = p1 / dp;
                t -= dt;
                if dt.abs() < 1e-16 {
                    break;
                }
            }
            x[i] = t;
            w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
        }
        (x, w)
    })
}

struct Boundary<'a, F, H: ?Sized> {
    h: &'a H,
    floor: F,
    cfg: &'a ZeroConfig,
}

/// A boundary evaluation came too close to a zero.
struct TooClose<F> {
    at: Complex<F>,
    value: F,
}

enum EdgeError<F> {
    TooClose(TooClose<F>),
    Hard(Error),
}

impl<F> From<Error> for EdgeError<F> {
    fn from(e: Error) -> Self {
        EdgeError::Hard(e)
    }
}

impl<F: Real, H: Holomorphic<F> + ?Sized> Boundary<'_, F, H> {
    fn value(&self, z: Complex<F>) -> std::result::Result<(Complex<F>, Complex<F>), EdgeError<F>> {
        let (f, d) = self.h.eval(z)?;
        let m = f.norm();
        if !(m > self.floor) || !d.re.is_finite() || !d.im.is_finite() {
            return Err(EdgeError::TooClose(TooClose { at: z, value: m }));
        }
        Ok((f, d))
    }

    fn gl(&self, a: Complex<F>, b: Complex<F>) -> std::result::Result<Complex<F>, EdgeError<F>> {
        let (x, w) = gauss_legendre();
        let half = (b - a) * lit::<F>(0.5);
        let mid = (a + b) * lit::<F>(0.5);
        let mut acc = Complex::new(F::zero(), F::zero());
        for (xi, wi) in x.iter().zip(w) {
            let z = mid + half * lit::<F>(*xi);
            let (f, d) = self.value(z)?;
            acc = acc + d / f * lit::<F>(*wi);
        }
        Ok(acc * half)
    }

    /// Integral of `f′/f` over `[a, b]`, returned as the sum of principal
    /// logarithm increments of accepted panels.
    fn edge(
        &self,
        a: Complex<F>,
        fa: Complex<F>,
        b: Complex<F>,
        fb: Complex<F>,
        whole: Complex<F>,
        depth: usize,
    ) -> std::result::Result<Complex<F>, EdgeError<F>> {
        let m = (a + b) * lit::<F>(0.5);
        let (fm, _) = self.value(m)?;
        let left = self.gl(a, m)?;
        let right = self.gl(m, b)?;
        let tol = lit::<F>(1e-7);
        let log_inc = (fb / fa).ln();
        let split = left + right;
        let agree = (split - whole).norm() < tol && (split - log_inc).norm() < tol;
        if agree {
            return Ok(log_inc);
        }
        if depth >= self.cfg.max_panel_depth {
            let (at, value) = if fa.norm() < fb.norm() { (a, fa.norm()) } else { (b, fb.norm()) };
            return Err(EdgeError::TooClose(TooClose { at, value }));
        }
        Ok(self.edge(a, fa, m, fm, left, depth + 1)? + self.edge(m, fm, b, fb, right, depth + 1)?)
    }

    fn winding(&self, rect: &Rectangle<F>) -> std::result::Result<F, EdgeError<F>> {
        let corners = rect.corners();
        let vals: Vec<Complex<F>> = corners.iter().map(|z| self.value(*z).map(|v| v.0)).collect::<std::result::Result<_, _>>()?;
        let mut total = Complex::new(F::zero(), F::zero());
        for j in 0..4 {
            let (a, b) = (corners[j], corners[(j + 1) % 4]);
            // four starting panels per edge
            let mut prev = (a, vals[j]);
            for p in 1..=4 {
                let z = if p == 4 { b } else { a + (b - a) * lit::<F>(p as f64 / 4.0) };
                let fz = if p == 4 { vals[(j + 1) % 4] } else { self.value(z)?.0 };
                let whole = self.gl(prev.0, z)?;
                total = total + self.edge(prev.0, prev.1, z, fz, whole, 0)?;
                prev = (z, fz);
            }
        }
        Ok(total.im / F::TAU())
    }
}

fn median<F: Real>(mut v: Vec<F>) -> F {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) * lit::<F>(0.5)
    }
}

/// Median of `|f|` at equally spaced points on the boundary.
pub fn boundary_scale<F: Real, H: Holomorphic<F> + ?Sized>(h: &H, rect: &Rectangle<F>, samples: usize) -> Result<F> {
    let per = (samples / 4).max(1);
    let c = rect.corners();
    let mut mags = Vec::with_capacity(4 * per);
    for j in 0..4 {
        for p in 0..per {
            let t = lit::<F>((p as f64 + 0.5) / per as f64);
            let z = c[j] + (c[(j + 1) % 4] - c[j]) * t;
            mags.push(h.eval(z)?.0.norm());
        }
    }
    let s = median(mags);
    if !(s > F::zero()) || !s.is_finite() {
        return Err(Error::Singular(format!("boundary scale is {s}")));
    }
    Ok(s)
}

fn round_winding<F: Real>(raw: F, cfg: &ZeroConfig) -> Result<i64> {
    let r = to_f64(raw);
    let n = r.round();
    if (r - n).abs() > cfg.round_window || !r.is_finite() {
        return Err(Error::NonInteger { value: r });
    }
    Ok(n as i64)
}

/// Winding of `f` around `rect` with the boundary floor `boundary_rel · scale`.
fn cell_winding<F: Real, H: Holomorphic<F> + ?Sized>(
    h: &H,
    rect: &Rectangle<F>,
    scale: F,
    cfg: &ZeroConfig,
) -> std::result::Result<i64, EdgeError<F>> {
    let b = Boundary { h, floor: scale * lit::<F>(cfg.boundary_rel), cfg };
    let raw = b.winding(rect)?;
    Ok(round_winding(raw, cfg)?)
}

/// `(1/2πi)∮ f′/f` around `rect`, nudging the rectangle outward when the
/// boundary passes too close to a zero. Returns the winding and the
/// rectangle it was computed on.
pub fn winding_count_with<F: Real, H: Holomorphic<F> + ?Sized>(
    h: &H,
    rect: &Rectangle<F>,
    cfg: &ZeroConfig,
) -> Result<(i64, Rectangle<F>, F, usize)> {
    let mut r = *rect;
    let mut last = None;
    for nudge in 0..=cfg.max_nudges {
        let scale = boundary_scale(h, &r, cfg.scale_samples)?;
        match cell_winding(h, &r, scale, cfg) {
            Ok(w) => return Ok((w, r, scale, nudge)),
            Err(EdgeError::Hard(e)) => return Err(e),
            Err(EdgeError::TooClose(t)) => last = Some(t),
        }
        r = r.expand(lit(cfg.nudge_frac))?;
    }
    let t = last.expect("at least one attempt");
    Err(Error::BoundaryTooClose {
        re: to_f64(t.at.re),
        im: to_f64(t.at.im),
        value: to_f64(t.value),
        nudges: cfg.max_nudges,
    })
}

/// Winding number from separate evaluators for `f` and `f′`.
pub fn winding_count<F: Real>(
    f: impl Fn(Complex<F>) -> Result<Complex<F>> + Sync,
    f_prime: impl Fn(Complex<F>) -> Result<Complex<F>> + Sync,
    rect: &Rectangle<F>,
) -> Result<i64> {
    let h = |z: Complex<F>| Ok((f(z)?, f_prime(z)?));
    winding_count_with(&h, rect, &ZeroConfig::default()).map(|r| r.0)
}

/// Split fractions tried in order; none of them puts a split line on
/// `Re τ ∈ ½ℤ` for the usual symmetric regions.
const SPLITS: [(f64, f64); 4] = [(0.4873, 0.5127), (0.5311, 0.4629), (0.4419, 0.5573), (0.5683, 0.4281)];

struct Scanner<'a, F, H: ?Sized> {
    h: &'a H,
    scale: F,
    cfg: &'a ZeroConfig,
}

impl<F: Real, H: Holomorphic<F> + ?Sized> Scanner<'_, F, H> {
    fn newton(&self, start: Complex<F>, multiplicity: i64) -> Result<(Complex<F>, F, F)> {
        let mut z = start;
        let m = lit::<F>(multiplicity as f64);
        let tol = self.scale * lit::<F>(self.cfg.newton_rel);
        let mut best: Option<(Complex<F>, F, F)> = None;
        for _ in 0..self.cfg.newton_max_iter {
            if !(z.im > F::zero()) {
                break;
            }
            let (f, d) = self.h.eval(z)?;
            let res = f.norm();
            if best.map_or(true, |b| res < b.1) {
                best = Some((z, res, d.norm()));
            }
            if !(d.norm() > F::zero()) {
                break;
            }
            let step = f / d * m;
            z = z - step;
            if step.norm() <= lit::<F>(1e-15) * z.norm().max(F::one()) {
                let (f, d) = self.h.eval(z)?;
                if f.norm() < best.map_or(F::infinity(), |b| b.1) {
                    best = Some((z, f.norm(), d.norm()));
                }
                break;
            }
        }
        match best {
            Some(b) if b.1 < tol => Ok(b),
            other => {
                let (z, r) = other.map_or((start, F::infinity()), |b| (b.0, b.1));
                Err(Error::NoRoot {
                    re: to_f64(z.re),
                    im: to_f64(z.im),
                    residual: to_f64(r),
                    iterations: self.cfg.newton_max_iter,
                })
            }
        }
    }

    fn record(&self, z: Complex<F>, w: i64, res: F, d: F) -> Result<ZeroRecord<F>> {
        Ok(ZeroRecord {
            location: ModuliPoint::from_complex(z)?,
            winding: w,
            derivative_magnitude: d,
            newton_residual: res,
        })
    }

    fn split(&self, cell: &Rectangle<F>, w: i64) -> Result<Vec<(Rectangle<F>, i64)>> {
        let mut last_err = None;
        for (u, v) in SPLITS {
            let kids = cell.split_at(lit(u), lit(v));
            let ws: Vec<std::result::Result<i64, EdgeError<F>>> =
                kids.par_iter().map(|k| cell_winding(self.h, k, self.scale, self.cfg)).collect();
            let mut out = Vec::with_capacity(4);
            let mut ok = true;
            for (k, r) in kids.iter().zip(ws) {
                match r {
                    Ok(kw) => out.push((*k, kw)),
                    Err(EdgeError::Hard(e)) => return Err(e),
                    Err(EdgeError::TooClose(t)) => {
                        ok = false;
                        last_err = Some(Error::BoundaryTooClose {
                            re: to_f64(t.at.re),
                            im: to_f64(t.at.im),
                            value: to_f64(t.value),
                            nudges: 0,
                        });
                    }
                }
            }
            if ok && out.iter().map(|p| p.1).sum::<i64>() == w {
                return Ok(out);
            }
            if ok {
                last_err = Some(Error::NonInteger { value: out.iter().map(|p| p.1).sum::<i64>() as f64 });
            }
        }
        Err(last_err.expect("at least one split attempted"))
    }

    fn locate(&self, cell: Rectangle<F>, w: i64, depth: usize) -> Result<Vec<ZeroRecord<F>>> {
        if w == 0 {
            return Ok(Vec::new());
        }
        if w < 0 {
            return Err(Error::InvalidArgument(format!("negative winding {w}: the function has poles in {cell}")));
        }
        let slack = lit::<F>(1e-12);
        let inside = |z: Complex<F>| {
            z.re >= cell.re_min() - slack && z.re <= cell.re_max() + slack && z.im >= cell.im_min() - slack && z.im <= cell.im_max() + slack
        };
        if w == 1 {
            if let Ok((z, res, d)) = self.newton(cell.center(), 1) {
                if inside(z) {
                    return Ok(vec![self.record(z, 1, res, d)?]);
                }
            }
        }
        if depth >= self.cfg.max_depth {
            let (z, res, d) = self.newton(cell.center(), w)?;
            if !inside(z) {
                return Err(Error::MaxDepth { depth });
            }
            return Ok(vec![self.record(z, w, res, d)?]);
        }
        let kids = match self.split(&cell, w) {
            Ok(k) => k,
            // a zero of multiplicity w leaves |f| below the floor on every nearby split line
            Err(e @ Error::BoundaryTooClose { .. }) if w > 1 => {
                let (z, res, d) = self.newton(cell.center(), w).map_err(|_| e.clone())?;
                if !inside(z) {
                    return Err(e);
                }
                return Ok(vec![self.record(z, w, res, d)?]);
            }
            Err(e) => return Err(e),
        };
        let found: Vec<Result<Vec<ZeroRecord<F>>>> =
            kids.into_par_iter().map(|(k, kw)| self.locate(k, kw, depth + 1)).collect();
        let mut out = Vec::new();
        for r in found {
            out.extend(r?);
        }
        Ok(out)
    }
}

/// Merges records closer than `dist`, keeping the smaller residual.
fn merge<F: Real>(mut zs: Vec<ZeroRecord<F>>, dist: F) -> Vec<ZeroRecord<F>> {
    let mut out: Vec<ZeroRecord<F>> = Vec::with_capacity(zs.len());
    zs.sort_by(|a, b| {
        a.location
            .im()
            .partial_cmp(&b.location.im())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.location.re().partial_cmp(&b.location.re()).unwrap_or(std::cmp::Ordering::Equal))
    });
    for z in zs {
        match out.iter_mut().find(|o| (o.location.tau() - z.location.tau()).norm() < dist) {
            Some(o) if z.newton_residual < o.newton_residual => *o = z,
            Some(_) => {}
            None => out.push(z),
        }
    }
    out
}

/// Full scan of `rect`: total winding, quadrisection and refined zeros.
pub fn scan<F: Real, H: Holomorphic<F> + ?Sized>(h: &H, rect: &Rectangle<F>, cfg: &ZeroConfig) -> Result<ZeroScan<F>> {
    let (total, region, scale, nudges) = winding_count_with(h, rect, cfg)?;
    let s = Scanner { h, scale, cfg };
    let zeros = merge(s.locate(region, total, 0)?, lit(cfg.merge_dist));
    Ok(ZeroScan { zeros, region, scale, nudges, total_winding: total })
}

pub fn locate_zeros<F: Real, H: Holomorphic<F> + ?Sized>(
    h: &H,
    rect: &Rectangle<F>,
    cfg: &ZeroConfig,
) -> Result<Vec<ZeroRecord<F>>> {
    scan(h, rect, cfg).map(|s| s.zeros)
}

/// Winding of `f` around the circle `|z − center| = radius`, by tracking
/// the principal argument over refined samples.
pub fn circle_winding<F: Real, H: Holomorphic<F> + ?Sized>(h: &H, center: Complex<F>, radius: F) -> Result<i64> {
    let mut n = 64;
    loop {
        let vals: Vec<Complex<F>> = (0..n)
            .map(|j| {
                let t = F::TAU() * lit::<F>(j as f64 / n as f64);
                h.eval(center + Complex::from_polar(radius, t)).map(|v| v.0)
            })
            .collect::<Result<_>>()?;
        let mut total = F::zero();
        let mut max_step = F::zero();
        for j in 0..n {
            let step = (vals[(j + 1) % n] / vals[j]).arg();
            max_step = max_step.max(step.abs());
            total = total + step;
        }
        if max_step < lit(1.0) || n >= 1 << 14 {
            return round_winding(total / F::TAU(), &ZeroConfig::default());
        }
        n *= 2;
    }
}

/// `(f_{k,C}, f_{k,C}′)` as a [`Holomorphic`] function of τ.
pub fn family_evaluator<F: Real>(fam: Family<F>) -> impl Fn(Complex<F>) -> Result<(Complex<F>, Complex<F>)> + Sync {
    move |z| {
        let e = fam.eval(ModuliPoint::from_complex(z)?)?;
        Ok((e.value, e.dtau))
    }
}

/// Scans `f_{k,C}` over `rect` and certifies simplicity of every zero,
/// together with the nonvanishing of the companion expression there.
pub fn verify_simple<F: Real>(
    k: FamilyIndex,
    c: ExtendedScalar<F>,
    rect: &Rectangle<F>,
    cfg: &ZeroConfig,
) -> Result<SimpleZeroVerdict<F>> {
    let fam = Family::new(k, c);
    let h = family_evaluator(fam);
    let s = scan(&h, rect, cfg)?;
    let floor = s.scale * lit::<F>(cfg.simple_floor);
    let all_simple = s.zeros.iter().all(|z| z.winding == 1 && z.derivative_magnitude > floor);
    let min_derivative = s.zeros.iter().fold(F::infinity(), |m, z| m.min(z.derivative_magnitude));
    let boundary_margin = s.zeros.iter().fold(F::infinity(), |m, z| m.min(s.region.margin(z.location.tau())));
    let witnesses: Vec<F> = s
        .zeros
        .iter()
        .map(|z| {
            let lat = Lattice::new(z.location)?;
            let e = fam.eval_with(lat.invariants(), &lat.tau_derivatives());
            Ok(fam.witness(lat.invariants(), e.x, e.y).relative())
        })
        .collect::<Result<_>>()?;
    let witnesses_ok = witnesses.iter().all(|w| *w > lit(cfg.simple_floor));
    Ok(SimpleZeroVerdict {
        zeros: s.zeros,
        all_simple,
        min_derivative,
        boundary_margin,
        scale: s.scale,
        region: s.region,
        nudges: s.nudges,
        total_winding: s.total_winding,
        witnesses,
        witnesses_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{invariants, tau_derivatives, theta1};
    use num_complex::Complex64;

    fn rect(a: f64, b: f64, c: f64, d: f64) -> Rectangle<f64> {
        Rectangle::new(a, b, c, d).unwrap()
    }

    fn g2_eval(z: Complex64) -> Result<(Complex64, Complex64)> {
        let t = ModuliPoint::from_complex(z)?;
        Ok((invariants(t)?.g2, tau_derivatives(t)?.dg2))
    }

    fn fam(k: u8, c: ExtendedScalar<f64>) -> impl Fn(Complex64) -> Result<(Complex64, Complex64)> + Sync {
        family_evaluator(Family::new(FamilyIndex::new(k).unwrap(), c))
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre();
        let sum: f64 = w.iter().sum();
        assert!((sum - 2.0).abs() < 1e-14);
        let m18: f64 = x.iter().zip(w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((m18 - 2.0 / 19.0).abs() < 1e-14);
    }

    #[test]
    fn theta_has_one_zero_at_lattice_point() {
        let tau = ModuliPoint::new(0.0, 1.2).unwrap();
        let h = |z: Complex64| theta1(z, &tau).map(|t| (t.value, t.d1));
        let (w, ..) = winding_count_with(&h, &rect(-0.3, 0.3, 0.9, 1.5), &ZeroConfig::default()).unwrap();
        assert_eq!(w, 1);
    }

    #[test]
    fn separate_evaluators() {
        let f = |z: Complex64| g2_eval(z).map(|v| v.0);
        let fp = |z: Complex64| g2_eval(z).map(|v| v.1);
        assert_eq!(winding_count(f, fp, &rect(0.3, 0.7, 0.7, 1.0)).unwrap(), 1);
    }

    #[test]
    fn g2_in_unit_strip_nudges_onto_both_orbit_points() {
        // ρ and ρ − 1 sit on the vertical sides, so the boundary gets nudged
        let (w, r, _, nudges) = winding_count_with(&g2_eval, &rect(-0.5, 0.5, 0.55, 1.2), &ZeroConfig::default()).unwrap();
        assert!(nudges >= 1);
        assert!(r.re_min() < -0.5 && r.re_max() > 0.5);
        assert_eq!(w, 2);
    }

    #[test]
    fn g2_zero_at_rho_is_simple() {
        let zs = locate_zeros(&g2_eval, &rect(0.3, 0.7, 0.7, 1.0), &ZeroConfig::default()).unwrap();
        assert_eq!(zs.len(), 1);
        assert_eq!(zs[0].winding, 1);
        assert!((zs[0].location.tau() - ModuliPoint::<f64>::rho().tau()).norm() < 1e-10);
    }

    #[test]
    fn zero_free_cell() {
        let h = fam(0, ExtendedScalar::Infinity);
        let (w, ..) = winding_count_with(&h, &rect(0.1, 0.3, 1.0, 1.5), &ZeroConfig::default()).unwrap();
        assert_eq!(w, 0);
    }

    #[test]
    fn negative_winding_is_rejected() {
        let h = |z: Complex64| {
            let d = z - Complex64::new(0.0, 1.0);
            Ok((d.inv(), -(d * d).inv()))
        };
        let err = locate_zeros(&h, &rect(-0.5, 0.5, 0.5, 1.5), &ZeroConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn polynomial_roots_and_multiplicity() {
        // (z − a)(z − b)² with b a double root
        let a = Complex64::new(0.2, 0.6);
        let b = Complex64::new(-0.3, 1.1);
        let h = move |z: Complex64| {
            Ok(((z - a) * (z - b) * (z - b), (z - b) * (z - b) + (z - a) * (z - b) * 2.0))
        };
        let zs = locate_zeros(&h, &rect(-1.0, 1.0, 0.3, 2.0), &ZeroConfig::default()).unwrap();
        let total: i64 = zs.iter().map(|z| z.winding).sum();
        assert_eq!(total, 3);
        let double = zs.iter().find(|z| z.winding == 2).expect("double root recorded once");
        assert!((double.location.tau() - b).norm() < 1e-6);
        let simple = zs.iter().find(|z| z.winding == 1).unwrap();
        assert!((simple.location.tau() - a).norm() < 1e-12);
    }

    #[test]
    fn boundary_zero_exhausts_nudges() {
        let h = |z: Complex64| Ok((z - Complex64::new(0.0, 1.0), Complex64::new(1.0, 0.0)));
        let cfg = ZeroConfig { max_nudges: 0, ..ZeroConfig::default() };
        let err = winding_count_with(&h, &rect(-0.5, 0.0, 0.5, 1.5), &cfg).unwrap_err();
        assert!(matches!(err, Error::BoundaryTooClose { .. }));
        let (w, ..) = winding_count_with(&h, &rect(-0.5, 0.0, 0.5, 1.5), &ZeroConfig::default()).unwrap();
        assert_eq!(w, 1);
    }

    #[test]
    fn circle_winding_counts_simple_zero() {
        let h = |z: Complex64| Ok((z * z - Complex64::new(-1.0, 0.0), z * 2.0));
        assert_eq!(circle_winding(&h, Complex64::new(0.0, 1.0), 1e-4).unwrap(), 1);
        assert_eq!(circle_winding(&h, Complex64::new(0.0, 1.5), 0.1).unwrap(), 0);
    }

    #[test]
    fn merge_keeps_better_residual() {
        let z = |re: f64, res: f64| ZeroRecord {
            location: ModuliPoint::new(re, 1.0).unwrap(),
            winding: 1,
            derivative_magnitude: 1.0,
            newton_residual: res,
        };
        let m = merge(vec![z(0.0, 1e-12), z(1e-9, 1e-14), z(0.5, 1e-13)], 1e-8);
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].newton_residual, 1e-14);
    }
}
