//! Mollification of measures by a fixed C∞ bump, truncated C∞ distances
//! and band extraction.

pub mod bands;
pub mod curve;
pub mod kernel;
pub mod weak_star;

pub use bands::{smoothed_support, support_bands, BandSet};
pub use curve::{cinf_dist, cinf_terms, mollified_ids, mollify, DensityCurve, EnergyGrid};
pub use kernel::{kernel_eval, DEFAULT_J};
pub use weak_star::{eps_ladder, weak_star_diag, WeakStarDiag};
