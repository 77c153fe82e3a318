//! Contour-integral differentiation of holomorphic functions.
//!
//! The trapezoid rule on a circle is spectrally accurate for holomorphic
//! integrands, so 64 nodes on a radius well inside the domain of
//! holomorphy reach near machine precision.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Default radius and node count for τ-derivatives.
pub const DEFAULT_RADIUS: f64 = 0.02;
pub const DEFAULT_NODES: usize = 64;

/// `f^{(order)}(z0)` from samples on the circle `|z − z0| = radius`.
pub fn cauchy_derivative<F, G>(
    f: G,
    z0: Complex<F>,
    radius: F,
    nodes: usize,
    order: usize,
) -> Result<Complex<F>>
where
    F: Real,
    G: Fn(Complex<F>) -> Result<Complex<F>>,
{
    let all = cauchy_taylor(f, z0, radius, nodes, order)?;
    Ok(all[order])
}

/// Taylor data `[f, f′, …, f^{(max_order)}]` at `z0` from one set of circle samples.
pub fn cauchy_taylor<F, G>(
    f: G,
    z0: Complex<F>,
    radius: F,
    nodes: usize,
    max_order: usize,
) -> Result<Vec<Complex<F>>>
where
    F: Real,
    G: Fn(Complex<F>) -> Result<Complex<F>>,
{
    if nodes < 2 * (max_order + 1) || !(radius > F::zero()) {
        return Err(Error::InvalidArgument(format!(
            "cauchy differentiation needs radius > 0 and at least {} nodes",
            2 * (max_order + 1)
        )));
    }
    let n = F::from_usize(nodes).unwrap();
    let samples = (0..nodes)
        .map(|j| {
            let theta = F::TAU() * F::from_usize(j).unwrap() / n;
            let w = Complex::from_polar(F::one(), theta);
            f(z0 + w * radius).map(|v| (w, v))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = Vec::with_capacity(max_order + 1);
    let mut factorial = F::one();
    let mut rpow = F::one();
    for k in 0..=max_order {
        if k > 0 {
            factorial = factorial * F::from_usize(k).unwrap();
            rpow = rpow * radius;
        }
        let mut acc = Complex::new(F::zero(), F::zero());
        for (w, v) in &samples {
            acc = acc + *v * w.conj().powu(k as u32);
        }
        out.push(acc * (factorial / (n * rpow)));
    }
    Ok(out)
}

/// Central difference of a real function, with a Richardson-style companion
/// at twice the step. Returns `(estimate, estimate_at_2h)`.
pub fn central_difference<F: Real>(f: impl Fn(F) -> F, x: F, h: F) -> (F, F) {
    let two = lit::<F>(2.0);
    let d1 = (f(x + h) - f(x - h)) / (two * h);
    let d2 = (f(x + two * h) - f(x - two * h)) / (lit::<F>(4.0) * h);
    (d1, d2)
}
