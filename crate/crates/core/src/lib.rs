//! Elliptic and modular functions on the moduli space of tori.

pub mod calculus;
pub mod curves;
pub mod error;
pub mod green;
pub mod kernel;
pub mod moduli;
pub mod painleve;
pub mod region;
pub mod scalar;
pub mod suites;
pub mod zeros;

pub use error::{Error, Result};

pub type Complex64 = num_complex::Complex<f64>;
pub type ModuliPoint = kernel::ModuliPoint<f64>;
pub type TorusPoint = kernel::TorusPoint<f64>;
pub type Lattice = kernel::Lattice<f64>;
pub type LatticeInvariants = kernel::LatticeInvariants<f64>;
pub type ExtendedScalar = moduli::ExtendedScalar<f64>;
pub type Rectangle = region::Rectangle<f64>;
pub type GridSpec = curves::GridSpec<f64>;
pub type CurvePolyline = curves::CurvePolyline<f64>;
pub type HessianMatrix = green::HessianMatrix<f64>;
pub type ZeroRecord = zeros::ZeroRecord<f64>;
pub type SimpleZeroVerdict = zeros::SimpleZeroVerdict<f64>;

#[cfg(test)]
pub(crate) mod test_support;
