//! Quadrature, special functions and characteristic-function inversion.

pub mod cf;
pub mod incgamma;
pub mod inversion;
pub mod quadrature;
pub mod table;

pub use cf::{check_axioms, empirical_cf, CharFn};
pub use incgamma::{gamma, upper_incomplete_gamma};
pub use inversion::{invert, invert_cf_to_cdf, invert_cf_to_pdf, InversionOptions, TruncationBound};
pub use quadrature::{integrate_adaptive, Quadrature};
pub use table::DistributionTable;
