//! Axis-aligned rectangles in the upper half plane.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::ModuliPoint;
use crate::scalar::{lit, to_f64, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rectangle<F> {
    re_min: F,
    re_max: F,
    im_min: F,
    im_max: F,
}

impl<F: Real> Rectangle<F> {
    pub fn new(re_min: F, re_max: F, im_min: F, im_max: F) -> Result<Self> {
        let finite = [re_min, re_max, im_min, im_max].iter().all(|v| v.is_finite());
        if !finite || !(im_min > F::zero()) || !(re_min < re_max) || !(im_min < im_max) {
            return Err(Error::InvalidRectangle(format!(
                "[{}, {}] x [{}, {}]",
                to_f64(re_min),
                to_f64(re_max),
                to_f64(im_min),
                to_f64(im_max)
            )));
        }
        Ok(Rectangle {
            re_min,
            re_max,
            im_min,
            im_max,
        })
    }

    pub fn re_min(&self) -> F {
        self.re_min
    }
    pub fn re_max(&self) -> F {
        self.re_max
    }
    pub fn im_min(&self) -> F {
        self.im_min
    }
    pub fn im_max(&self) -> F {
        self.im_max
    }

    pub fn width(&self) -> F {
        self.re_max - self.re_min
    }

    pub fn height(&self) -> F {
        self.im_max - self.im_min
    }

    pub fn center(&self) -> Complex<F> {
        let h = lit::<F>(0.5);
        Complex::new((self.re_min + self.re_max) * h, (self.im_min + self.im_max) * h)
    }

    /// Corners in counter-clockwise order starting at the lower left.
    pub fn corners(&self) -> [Complex<F>; 4] {
        [
            Complex::new(self.re_min, self.im_min),
            Complex::new(self.re_max, self.im_min),
            Complex::new(self.re_max, self.im_max),
            Complex::new(self.re_min, self.im_max),
        ]
    }

    pub fn contains(&self, z: Complex<F>) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    pub fn contains_point(&self, tau: &ModuliPoint<F>) -> bool {
        self.contains(tau.tau())
    }

    /// Distance from `z` to the boundary, zero outside.
    pub fn margin(&self, z: Complex<F>) -> F {
        if !self.contains(z) {
            return F::zero();
        }
        (z.re - self.re_min)
            .min(self.re_max - z.re)
            .min(z.im - self.im_min)
            .min(self.im_max - z.im)
    }

    /// Grows every side by `frac` of the corresponding extent; the lower
    /// side is clamped to stay inside ℍ.
    pub fn expand(&self, frac: F) -> Result<Self> {
        let dw = self.width() * frac;
        let dh = self.height() * frac;
        let im_min = (self.im_min - dh).max(self.im_min * lit(0.5));
        Rectangle::new(self.re_min - dw, self.re_max + dw, im_min, self.im_max + dh)
    }

    /// Splits into four children at the fractions `(u, v)` of width and height.
    pub fn split_at(&self, u: F, v: F) -> [Self; 4] {
        let xm = self.re_min + self.width() * u;
        let ym = self.im_min + self.height() * v;
        [
            Rectangle { re_min: self.re_min, re_max: xm, im_min: self.im_min, im_max: ym },
            Rectangle { re_min: xm, re_max: self.re_max, im_min: self.im_min, im_max: ym },
            Rectangle { re_min: xm, re_max: self.re_max, im_min: ym, im_max: self.im_max },
            Rectangle { re_min: self.re_min, re_max: xm, im_min: ym, im_max: self.im_max },
        ]
    }

    pub fn cast<G: Real>(&self) -> Rectangle<G> {
        Rectangle {
            re_min: lit(to_f64(self.re_min)),
            re_max: lit(to_f64(self.re_max)),
            im_min: lit(to_f64(self.im_min)),
            im_max: lit(to_f64(self.im_max)),
        }
    }
}

impl<F: Real> std::fmt::Display for Rectangle<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{},{}]x[{},{}]", self.re_min, self.re_max, self.im_min, self.im_max)
    }
}
