use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::{KernelConfig, ModuliPoint};
use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// θ₁ and its first four z-derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaEval<F> {
    pub value: Complex<F>,
    pub d1: Complex<F>,
    pub d2: Complex<F>,
    pub d3: Complex<F>,
    /// Fourth derivative, needed for ℘″ without going through the ODE.
    pub d4: Complex<F>,
    pub terms_used: usize,
}

impl<F: Real> ThetaEval<F> {
    /// Logarithmic derivatives `(log θ₁)^{(k)}` for `k = 1..=4`.
    pub fn log_derivatives(&self) -> [Complex<F>; 4] {
        let u1 = self.d1 / self.value;
        let u2 = self.d2 / self.value;
        let u3 = self.d3 / self.value;
        let u4 = self.d4 / self.value;
        let l1 = u1;
        let l2 = u2 - u1 * u1;
        let l3 = u3 - u1 * u2 * lit::<F>(3.0) + u1 * u1 * u1 * lit::<F>(2.0);
        let u1sq = u1 * u1;
        let l4 = u4 - u1 * u3 * lit::<F>(4.0) - u2 * u2 * lit::<F>(3.0)
            + u1sq * u2 * lit::<F>(12.0)
            - u1sq * u1sq * lit::<F>(6.0);
        [l1, l2, l3, l4]
    }
}

/// θ₁(z|τ) with the default kernel configuration.
pub fn theta1<F: Real>(z: Complex<F>, tau: &ModuliPoint<F>) -> Result<ThetaEval<F>> {
    theta1_with(z, tau, &KernelConfig::default())
}

/// θ₁(z|τ) = −i Σₙ (−1)ⁿ exp(πiτ(n+½)² + πi(2n+1)z), summed in pairs `n, −n−1`.
///
/// Requires `|Im z| ≤ 4 Im τ`; callers reduce z by the lattice first.
pub fn theta1_with<F: Real>(
    z: Complex<F>,
    tau: &ModuliPoint<F>,
    cfg: &KernelConfig,
) -> Result<ThetaEval<F>> {
    tau.check_floor(cfg)?;
    let b = tau.im();
    let limit = b * lit::<F>(4.0);
    if z.im.abs() > limit || !z.re.is_finite() {
        return Err(Error::ConvergenceWindow {
            re: to_f64(z.re),
            im: to_f64(z.im),
            limit: to_f64(limit),
        });
    }

    let pi = F::PI();
    let i_pi_tau = Complex::new(F::zero(), pi) * tau.tau();
    let iz = Complex::new(-z.im, z.re);
    let tol = lit::<F>(1e-17);
    let half = lit::<F>(0.5);
    let peak = z.im.abs() / b;

    let mut sums = [Complex::new(F::zero(), F::zero()); 5];
    let mut ref_mag = [F::zero(); 5];
    let mut terms_used = 0;
    let mut converged = false;

    for n in 0..cfg.max_terms {
        let nh = F::from_usize(n).unwrap() + half;
        let a = pi * (nh + nh);
        let e = i_pi_tau * (nh * nh);
        let p = (e + iz * a).exp();
        let m = (e - iz * a).exp();
        let sign = if n % 2 == 0 { F::one() } else { -F::one() };
        let plus = (p + m) * sign;
        let minus = (p - m) * sign;
        let a2 = a * a;
        let terms = [
            Complex::new(minus.im, -minus.re), // −i(P−M)
            plus * a,
            Complex::new(-minus.im, minus.re) * a2, // iA²(P−M)
            plus * (-a2 * a),
            Complex::new(minus.im, -minus.re) * (a2 * a2),
        ];
        let size = p.norm() + m.norm();
        let mut small = nh > peak;
        let mut pow = F::one();
        for k in 0..5 {
            sums[k] = sums[k] + terms[k];
            ref_mag[k] = ref_mag[k].max(sums[k].norm()).max(terms[k].norm());
            if size * pow > tol * ref_mag[k] {
                small = false;
            }
            pow = pow * a;
        }
        terms_used = n + 1;
        if small {
            converged = true;
            break;
        }
    }

    if !converged {
        return Err(Error::Precision {
            im: to_f64(b),
            floor: cfg.min_im,
        });
    }

    Ok(ThetaEval {
        value: sums[0],
        d1: sums[1],
        d2: sums[2],
        d3: sums[3],
        d4: sums[4],
        terms_used,
    })
}
