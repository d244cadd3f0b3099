//! Numerical toolkit for the cubic Szegő equation `i∂ₜu = Π(|u|²u)` on the
//! Hardy space of the circle.
//!
//! The crate is organized bottom-up:
//! [`hardy`] holds truncated Fourier symbols and scalar functionals,
//! [`hankel`] the Hankel/Toeplitz/Lax operator matrices, [`flow`] the
//! Galerkin time integration and its monitors, [`rational`] the explicit
//! dynamics on rational invariant manifolds, [`waves`] traveling waves, and
//! [`kronecker`] rational recovery from Fourier coefficients.

pub mod error;
pub mod hankel;
pub mod hardy;
pub mod kronecker;
pub mod flow;
pub mod ode;
pub mod poly;
pub mod random;
pub mod rational;
pub mod waves;

pub use error::{Result, SzegoError};
pub use hardy::{FourierSymbol, TwoSidedSymbol, C64};
