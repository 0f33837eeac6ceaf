//! Resonance energies from real stabilization curves by Schlessinger continued-fraction
//! continuation, with a uniform complex scaling oracle for validation.

pub mod config;
pub mod continuation;
pub mod eigen;
pub mod error;
pub mod ids;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod quadrature;
pub mod schlessinger;
pub mod session;
pub mod stabilization;
pub mod ucs;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
