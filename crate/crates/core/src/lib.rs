//! Spectral laboratory for Littlewood-Paley analysis on periodic boxes:
//! dyadic filter banks, Besov/Sobolev norms of dense and scale-indexed
//! sparse fields, a frequency-cuboid data construction with its bilinear
//! interaction functionals, and a 2D incompressible MHD solver used to
//! observe norm growth from those data.
//!
//! Conventions (fixed throughout the crate):
//! * fields live on [0, L_1) x ... x [0, L_d); stored amplitudes are the
//!   coefficients c_k of u(x) = sum_k c_k exp(i xi_k . x), xi_k = 2 pi k / L;
//! * a single unit-amplitude mode has L^2 norm (prod L_a)^{1/2};
//! * dyadic blocks use the radial pair (chi, phi): chi = 1 on |xi| <= 3/4,
//!   supp chi inside |xi| <= 4/3, phi(xi) = chi(xi/2) - chi(xi);
//! * wide dynamic ranges are carried as log2 of the quantity.

pub mod besov;
pub mod construct;
pub mod error;
pub mod field;
pub mod filterbank;
pub mod fit;
pub mod params;
pub mod picard;
pub mod quadrature;
pub mod sfld;
pub mod sim;
pub mod sparse;

pub use error::{Error, Result};
