//! Jacobi θ₁, the Weierstrass ℘/ζ family and the lattice invariants
//! `e_k, g₂, g₃, η₁, η₂` as functions of the modulus τ.
//!
//! Everything z-dependent is evaluated through logarithmic derivatives of
//! θ₁ after reducing z into the period cell centred at the origin; this
//! converges geometrically in the nome and is far cheaper than lattice sums.

mod theta;
mod weierstrass;

pub use theta::{theta1, theta1_with, ThetaEval};
pub use weierstrass::{
    invariants, tau_derivatives, wp, wp_dtau, wp_inverse, wp_pp, wp_prime, zeta_w, Lattice,
    WeierstrassEval,
};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// Evaluation knobs for the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    /// Smallest admissible `Im τ`.
    pub min_im: f64,
    /// Minimal distance to a lattice point for ℘/ζ inputs.
    pub lattice_eps: f64,
    /// Maximal number of paired theta terms.
    pub max_terms: usize,
    /// Iteration cap for [`wp_inverse`].
    pub newton_max_iter: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            min_im: 0.05,
            lattice_eps: 1e-8,
            max_terms: 64,
            newton_max_iter: 60,
        }
    }
}

/// A point τ of the upper half plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModuliPoint<F> {
    re: F,
    im: F,
}

impl<F: Real> ModuliPoint<F> {
    pub fn new(re: F, im: F) -> Result<Self> {
        if !(im > F::zero()) || !re.is_finite() || !im.is_finite() {
            return Err(Error::NotInUpperHalfPlane {
                re: to_f64(re),
                im: to_f64(im),
            });
        }
        Ok(ModuliPoint { re, im })
    }

    pub fn from_complex(tau: Complex<F>) -> Result<Self> {
        Self::new(tau.re, tau.im)
    }

    /// `e^{πi/3}`, the hexagonal point.
    pub fn rho() -> Self {
        ModuliPoint {
            re: lit(0.5),
            im: lit(0.75f64.sqrt()),
        }
    }

    pub fn i() -> Self {
        ModuliPoint {
            re: F::zero(),
            im: F::one(),
        }
    }

    #[inline]
    pub fn re(&self) -> F {
        self.re
    }

    #[inline]
    pub fn im(&self) -> F {
        self.im
    }

    #[inline]
    pub fn tau(&self) -> Complex<F> {
        Complex::new(self.re, self.im)
    }

    /// Signals a precision error below the configured floor.
    pub fn check_floor(&self, cfg: &KernelConfig) -> Result<()> {
        if to_f64(self.im) < cfg.min_im {
            return Err(Error::Precision {
                im: to_f64(self.im),
                floor: cfg.min_im,
            });
        }
        Ok(())
    }

    /// `ω_k` for `k ∈ {1,2,3}`: `1`, `τ`, `1+τ`.
    pub fn period(&self, k: usize) -> Complex<F> {
        match k {
            1 => Complex::new(F::one(), F::zero()),
            2 => self.tau(),
            3 => Complex::new(F::one(), F::zero()) + self.tau(),
            _ => panic!("half period index must be 1, 2 or 3, got {k}"),
        }
    }

    pub fn half_period(&self, k: usize) -> Complex<F> {
        self.period(k) * lit::<F>(0.5)
    }
}

/// A point on the torus `ℂ/(ℤ+ℤτ)` with its real lattice coordinates `z = r + sτ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint<F> {
    pub z: Complex<F>,
    pub r: F,
    pub s: F,
}

impl<F: Real> TorusPoint<F> {
    pub fn new(z: Complex<F>, tau: &ModuliPoint<F>) -> Self {
        let s = z.im / tau.im();
        let r = z.re - s * tau.re();
        TorusPoint { z, r, s }
    }

    pub fn from_coords(r: F, s: F, tau: &ModuliPoint<F>) -> Self {
        TorusPoint {
            z: Complex::new(r, F::zero()) + tau.tau() * s,
            r,
            s,
        }
    }

    /// Half period `ω_k/2` as a torus point.
    pub fn half_period(k: usize, tau: &ModuliPoint<F>) -> Self {
        let h = lit::<F>(0.5);
        match k {
            1 => Self::from_coords(h, F::zero(), tau),
            2 => Self::from_coords(F::zero(), h, tau),
            3 => Self::from_coords(h, h, tau),
            _ => panic!("half period index must be 1, 2 or 3, got {k}"),
        }
    }
}

/// The invariants of the lattice `ℤ + ℤτ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeInvariants<F> {
    pub e1: Complex<F>,
    pub e2: Complex<F>,
    pub e3: Complex<F>,
    pub g2: Complex<F>,
    pub g3: Complex<F>,
    pub eta1: Complex<F>,
    pub eta2: Complex<F>,
    pub tau: ModuliPoint<F>,
}

impl<F: Real> LatticeInvariants<F> {
    /// `e_k` for `k ∈ {1,2,3}`.
    pub fn e(&self, k: usize) -> Complex<F> {
        match k {
            1 => self.e1,
            2 => self.e2,
            3 => self.e3,
            _ => panic!("e_k index must be 1, 2 or 3, got {k}"),
        }
    }

    /// `g₂³ − 27 g₃²`.
    pub fn discriminant(&self) -> Complex<F> {
        self.g2 * self.g2 * self.g2 - self.g3 * self.g3 * lit::<F>(27.0)
    }

    /// `√(g₂/12)` on the principal branch.
    pub fn sqrt_g2_12(&self) -> Complex<F> {
        (self.g2 / lit::<F>(12.0)).sqrt()
    }
}

/// Analytic τ-derivatives of the lattice invariants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DTauInvariants<F> {
    pub deta1: Complex<F>,
    pub de1: Complex<F>,
    pub de2: Complex<F>,
    pub de3: Complex<F>,
    pub dg2: Complex<F>,
    pub dg3: Complex<F>,
    pub tau: ModuliPoint<F>,
}

impl<F: Real> DTauInvariants<F> {
    pub fn de(&self, k: usize) -> Complex<F> {
        match k {
            1 => self.de1,
            2 => self.de2,
            3 => self.de3,
            _ => panic!("e_k index must be 1, 2 or 3, got {k}"),
        }
    }
}
