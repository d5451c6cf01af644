//! Liouville quantum field theory and gravity on the annulus.

pub mod arcs;
pub mod error;
pub mod geometry;
pub mod gff;
pub mod gmc;
pub mod greens;
pub mod lattice;
pub mod lqft;
pub mod mcstats;
pub mod moduli;
pub mod quad;
pub mod scalar;
pub mod special;

pub use error::{Error, Result};
pub use geometry::{Annulus, AnnulusGeometry, Automorphism, ConformalAutomorphism, MetricSpec, Point, PolarPoint};
pub use greens::GreenSeriesConfig;
pub use mcstats::{Estimate, RngStream, GENERATOR_ID};
pub use scalar::Real;
