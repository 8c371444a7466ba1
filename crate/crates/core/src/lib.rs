//! Simulation and verification toolkit for imaginary geometry.
//!
//! The crate samples discrete Gaussian free fields on triangulated grids,
//! traces flow lines of `e^{i(h/chi + theta)}` from interior points, simulates
//! the driving SDEs of chordal/radial/whole-plane SLE_kappa(rho) variants with
//! trace reconstruction by slit-map composition, constructs the space-filling
//! ordering induced by the pi/2 and -pi/2 flow-line trees, and packages the
//! qualitative theorems of the theory as seeded Monte Carlo hypothesis tests.

pub mod error;
pub mod flow;
pub mod gff;
pub mod io;
pub mod loewner;
pub mod params;
pub mod rng;
pub mod spacefill;
pub mod stats;

pub use error::Error;
pub type Result<T> = std::result::Result<T, Error>;

/// Plane point / complex number used throughout.
pub type Point = num_complex::Complex64;
