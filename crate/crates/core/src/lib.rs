//! Energy efficiency of Poisson-Voronoi cellular networks.
//!
//! Two independent routes to the same quantities: characteristic functions
//! inverted numerically ([`traffic`], [`power`], [`energy`]) and a snapshot
//! simulator of the generative model ([`montecarlo`]).
//!
//! Fourier convention throughout: `phi(w) = E[exp(j w X)]`.

pub mod channel;
pub mod cli;
pub mod config;
pub mod energy;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod montecarlo;
pub mod numerics;
pub mod power;
pub mod traffic;

pub use error::{Error, Result};
pub use exec::Exec;
pub use num_complex::Complex64;
