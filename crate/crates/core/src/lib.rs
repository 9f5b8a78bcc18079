//! Adaptive physical-layer network coding for the two-way relay channel.
//!
//! The relay receives `h_A·x_A + h_B·x_B` and forwards one cluster symbol;
//! the clustering is a Latin square chosen from the fade state
//! `z = h_B/h_A`. This crate enumerates the singular fade states of PAM,
//! square QAM and PSK signal sets, builds a Latin square removing each of
//! them, quantizes the fade-state plane, and simulates the end-to-end bit
//! error rate.
//!
//! Geometry is generic over the float type (`f32` or `f64`); the aliases
//! below fix it to `f64`. Exact work (singular fade states of lattice
//! constellations, constraint classes) uses Gaussian integers.

pub mod constellation;
pub mod error;
pub mod gaussian;
pub mod latin;
mod point_index;
pub mod quantization;
pub mod scalar;
pub mod simulator;
pub mod singular_fades;

pub use constellation::{ConstellationDesc, ConstellationKind, DifferenceConstellation, Normalization};
pub use error::{Error, Result};
pub use gaussian::{GaussianInt, GaussianRational};
pub use latin::{parse_complex, ConstraintSet, LatinSquare};
pub use scalar::Scalar;
pub use singular_fades::FadeClass;

pub type Constellation = constellation::Constellation<f64>;
pub type SingularFade = singular_fades::SingularFade<f64>;
pub type SingularFadeSet = singular_fades::SingularFadeSet<f64>;
pub type LatinSquareBank = latin::LatinSquareBank<f64>;
pub type Quantizer = quantization::Quantizer<f64>;
pub type Simulator = simulator::Simulator<f64>;

pub type Constellation32 = constellation::Constellation<f32>;
pub type SingularFadeSet32 = singular_fades::SingularFadeSet<f32>;
pub type LatinSquareBank32 = latin::LatinSquareBank<f32>;
