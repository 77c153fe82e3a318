use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::theta::theta1_with;
use super::{DTauInvariants, KernelConfig, LatticeInvariants, ModuliPoint, TorusPoint};
use crate::error::{Error, Result};
use crate::scalar::{i_unit, lit, to_f64, two_pi_i, Real};

/// `ζ, ℘, ℘′, ℘″` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeierstrassEval<F> {
    pub zeta: Complex<F>,
    pub wp: Complex<F>,
    pub wp1: Complex<F>,
    pub wp2: Complex<F>,
}

/// The lattice `ℤ + ℤτ` with its invariants precomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice<F> {
    inv: LatticeInvariants<F>,
    cfg: KernelConfig,
}

impl<F: Real> Lattice<F> {
    pub fn new(tau: ModuliPoint<F>) -> Result<Self> {
        Self::with_config(tau, KernelConfig::default())
    }

    pub fn with_config(tau: ModuliPoint<F>, cfg: KernelConfig) -> Result<Self> {
        tau.check_floor(&cfg)?;
        let zero = Complex::new(F::zero(), F::zero());
        let at0 = theta1_with(zero, &tau, &cfg)?;
        let eta1 = -at0.d3 / (at0.d1 * lit::<F>(3.0));
        let eta2 = tau.tau() * eta1 - two_pi_i::<F>();

        let mut lattice = Lattice {
            inv: LatticeInvariants {
                e1: zero,
                e2: zero,
                e3: zero,
                g2: zero,
                g3: zero,
                eta1,
                eta2,
                tau,
            },
            cfg,
        };
        let mut e = [zero; 3];
        for (k, slot) in e.iter_mut().enumerate() {
            *slot = lattice.eval(tau.half_period(k + 1))?.wp;
        }
        let [e1, e2, e3] = e;
        lattice.inv.e1 = e1;
        lattice.inv.e2 = e2;
        lattice.inv.e3 = e3;
        lattice.inv.g2 = -(e1 * e2 + e1 * e3 + e2 * e3) * lit::<F>(4.0);
        lattice.inv.g3 = e1 * e2 * e3 * lit::<F>(4.0);
        Ok(lattice)
    }

    #[inline]
    pub fn invariants(&self) -> &LatticeInvariants<F> {
        &self.inv
    }

    #[inline]
    pub fn tau(&self) -> ModuliPoint<F> {
        self.inv.tau
    }

    #[inline]
    pub fn config(&self) -> &KernelConfig {
        &self.cfg
    }

    pub fn torus_point(&self, z: Complex<F>) -> TorusPoint<F> {
        TorusPoint::new(z, &self.inv.tau)
    }

    /// Splits `z = z₀ + m + nτ` with `z₀` in the period cell centred at the origin.
    pub fn reduce(&self, z: Complex<F>) -> (Complex<F>, F, F) {
        let tau = self.inv.tau;
        let n = (z.im / tau.im()).round();
        let z1 = z - tau.tau() * n;
        let r1 = z1.re - (z1.im / tau.im()) * tau.re();
        let m = r1.round();
        (z1 - Complex::new(m, F::zero()), m, n)
    }

    /// Distance from `z` to the nearest lattice point.
    pub fn distance_to_lattice(&self, z: Complex<F>) -> F {
        let (z0, _, _) = self.reduce(z);
        let tau = self.inv.tau.tau();
        let mut best = F::infinity();
        for p in -1i32..=1 {
            for q in -1i32..=1 {
                let w = Complex::new(lit::<F>(p as f64), F::zero()) + tau * lit::<F>(q as f64);
                best = best.min((z0 - w).norm());
            }
        }
        best
    }

    /// `ζ, ℘, ℘′, ℘″` at `z` via logarithmic derivatives of θ₁.
    pub fn eval(&self, z: Complex<F>) -> Result<WeierstrassEval<F>> {
        let d = self.distance_to_lattice(z);
        if d < lit::<F>(self.cfg.lattice_eps) {
            return Err(Error::LatticePoint {
                re: to_f64(z.re),
                im: to_f64(z.im),
                distance: to_f64(d),
            });
        }
        let (z0, m, n) = self.reduce(z);
        let th = theta1_with(z0, &self.inv.tau, &self.cfg)?;
        let [l1, l2, l3, l4] = th.log_derivatives();
        let eta1 = self.inv.eta1;
        Ok(WeierstrassEval {
            zeta: eta1 * z0 + l1 + eta1 * m + self.inv.eta2 * n,
            wp: -eta1 - l2,
            wp1: -l3,
            wp2: -l4,
        })
    }

    pub fn wp(&self, z: Complex<F>) -> Result<Complex<F>> {
        self.eval(z).map(|e| e.wp)
    }

    pub fn wp_prime(&self, z: Complex<F>) -> Result<Complex<F>> {
        self.eval(z).map(|e| e.wp1)
    }

    pub fn wp_pp(&self, z: Complex<F>) -> Result<Complex<F>> {
        self.eval(z).map(|e| e.wp2)
    }

    pub fn zeta(&self, z: Complex<F>) -> Result<Complex<F>> {
        self.eval(z).map(|e| e.zeta)
    }

    /// Closed-form τ-derivatives of `η₁, e_k, g₂, g₃`.
    pub fn tau_derivatives(&self) -> DTauInvariants<F> {
        let LatticeInvariants {
            e1,
            e2,
            e3,
            g2,
            g3,
            eta1,
            ..
        } = self.inv;
        let pi = F::PI();
        let i = i_unit::<F>();
        let two = lit::<F>(2.0);
        let three = lit::<F>(3.0);
        let four = lit::<F>(4.0);
        let sixth = lit::<F>(1.0 / 6.0);
        let two_thirds = lit::<F>(2.0 / 3.0);

        let deta1 = i / (four * pi) * (eta1 * eta1 * two - g2 * sixth);
        let de = |e: Complex<F>| -i / (four * pi) * ((e - eta1) * e * four - g2 * two_thirds);
        let dg2 = -i / pi * (g3 * three - eta1 * g2 * two);
        let dg3 = -i / pi * (-g3 * eta1 * three + g2 * g2 * sixth);
        DTauInvariants {
            deta1,
            de1: de(e1),
            de2: de(e2),
            de3: de(e3),
            dg2,
            dg3,
            tau: self.inv.tau,
        }
    }

    /// `∂℘(z|τ)/∂τ` at fixed complex `z`.
    pub fn wp_dtau(&self, z: Complex<F>) -> Result<Complex<F>> {
        let w = self.eval(z)?;
        let eta1 = self.inv.eta1;
        let pi = F::PI();
        let bracket = (w.zeta - z * eta1) * w.wp1 * lit::<F>(2.0)
            + (w.wp - eta1) * w.wp * lit::<F>(4.0)
            - self.inv.g2 * lit::<F>(2.0 / 3.0);
        Ok(-i_unit::<F>() / (lit::<F>(4.0) * pi) * bracket)
    }

    /// Solves `℘(z) = w` for z in the period cell centred at the origin,
    /// choosing the representative of `±z` with `s > 0` (or `s = 0, r ≥ 0`).
    pub fn wp_inverse(&self, w: Complex<F>, seed: Option<Complex<F>>) -> Result<TorusPoint<F>> {
        let tol = lit::<F>(1e-10) * F::one().max(w.norm());
        let mut z = match seed {
            Some(s) => s,
            None => self.coarse_seed(w)?,
        };
        let mut best = (z, F::infinity());
        let mut converged_at = None;
        for iter in 0..self.cfg.newton_max_iter {
            let e = match self.eval(z) {
                Ok(e) => e,
                Err(Error::LatticePoint { .. }) => {
                    // nudged off the pole; ℘ is huge there so the seed was poor
                    z = z + Complex::new(lit(0.05), lit(0.05));
                    continue;
                }
                Err(other) => return Err(other),
            };
            let res = e.wp - w;
            let rn = res.norm();
            if rn < best.1 {
                best = (z, rn);
            }
            if rn <= tol {
                // a couple of polishing steps after reaching tolerance
                match converged_at {
                    None => converged_at = Some(iter),
                    Some(start) if iter >= start + 2 => break,
                    _ => {}
                }
                if rn == F::zero() {
                    break;
                }
            }
            z = z + quadratic_step(e.wp1, e.wp2, res);
        }
        if best.1 > tol {
            return Err(Error::NoRoot {
                re: to_f64(best.0.re),
                im: to_f64(best.0.im),
                residual: to_f64(best.1),
                iterations: self.cfg.newton_max_iter,
            });
        }
        Ok(self.canonical(best.0))
    }

    fn coarse_seed(&self, w: Complex<F>) -> Result<Complex<F>> {
        let tau = self.inv.tau;
        let n = 12;
        let mut best: Option<(Complex<F>, F)> = None;
        for i in 0..n {
            for j in 0..n {
                let r = (lit::<F>(i as f64) + lit(0.5)) / lit::<F>(n as f64) - lit(0.5);
                let s = (lit::<F>(j as f64) + lit(0.5)) / lit::<F>(n as f64) - lit(0.5);
                let z = TorusPoint::from_coords(r, s, &tau).z;
                let v = self.wp(z)?;
                let d = (v - w).norm();
                if best.map_or(true, |(_, bd)| d < bd) {
                    best = Some((z, d));
                }
            }
        }
        Ok(best.expect("non-empty grid").0)
    }

    fn canonical(&self, z: Complex<F>) -> TorusPoint<F> {
        let (z0, _, _) = self.reduce(z);
        let p = TorusPoint::new(z0, &self.inv.tau);
        if p.s < F::zero() || (p.s == F::zero() && p.r < F::zero()) {
            let (z1, _, _) = self.reduce(-z0);
            TorusPoint::new(z1, &self.inv.tau)
        } else {
            p
        }
    }
}

/// Root of `½ p″ δ² + p′ δ + res = 0` nearest zero; reduces to Newton when
/// `p″` is negligible and stays quadratically convergent at double roots.
fn quadratic_step<F: Real>(p1: Complex<F>, p2: Complex<F>, res: Complex<F>) -> Complex<F> {
    let disc = (p1 * p1 - p2 * res * lit::<F>(2.0)).sqrt();
    let plus = p1 + disc;
    let minus = p1 - disc;
    let den = if plus.norm() >= minus.norm() { plus } else { minus };
    if den.norm() == F::zero() {
        return Complex::new(F::zero(), F::zero());
    }
    -res * lit::<F>(2.0) / den
}

/// Lattice invariants at τ with default configuration.
pub fn invariants<F: Real>(tau: ModuliPoint<F>) -> Result<LatticeInvariants<F>> {
    Lattice::new(tau).map(|l| *l.invariants())
}

pub fn tau_derivatives<F: Real>(tau: ModuliPoint<F>) -> Result<DTauInvariants<F>> {
    Lattice::new(tau).map(|l| l.tau_derivatives())
}

pub fn wp<F: Real>(z: &TorusPoint<F>, tau: ModuliPoint<F>) -> Result<Complex<F>> {
    Lattice::new(tau)?.wp(z.z)
}

pub fn wp_prime<F: Real>(z: &TorusPoint<F>, tau: ModuliPoint<F>) -> Result<Complex<F>> {
    Lattice::new(tau)?.wp_prime(z.z)
}

pub fn wp_pp<F: Real>(z: &TorusPoint<F>, tau: ModuliPoint<F>) -> Result<Complex<F>> {
    Lattice::new(tau)?.wp_pp(z.z)
}

pub fn zeta_w<F: Real>(z: &TorusPoint<F>, tau: ModuliPoint<F>) -> Result<Complex<F>> {
    Lattice::new(tau)?.zeta(z.z)
}

pub fn wp_dtau<F: Real>(z: &TorusPoint<F>, tau: ModuliPoint<F>) -> Result<Complex<F>> {
    Lattice::new(tau)?.wp_dtau(z.z)
}

pub fn wp_inverse<F: Real>(
    w: Complex<F>,
    tau: ModuliPoint<F>,
    seed: Option<Complex<F>>,
) -> Result<TorusPoint<F>> {
    Lattice::new(tau)?.wp_inverse(w, seed)
}
