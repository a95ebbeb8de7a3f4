//! Shared numerical kernels: Bessel functions, dense complex linear algebra,
//! adaptive unitary/Lindblad propagation and discrete Fourier analysis on a
//! period grid. Everything is pure and re-entrant.

pub mod bessel;
pub mod fourier;
pub mod linalg;
pub mod ode;

pub type C64 = num_complex::Complex64;

pub use bessel::bessel_j;
pub use fourier::{fourier_components, FourierTable, TimeGrid};
pub use linalg::{CMat4, CVec4};
pub use ode::{integrate, integrate_path, propagate, propagate_path, OdeError, OdeOptions};
