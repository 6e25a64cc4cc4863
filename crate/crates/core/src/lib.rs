//! Numerical laboratory for incompatible elasticity on intrinsic
//! triangulated surfaces.
//!
//! The crate models 2-d bodies as triangle meshes carrying only edge
//! lengths, measures how far linear maps and piecewise-affine morphisms are
//! from isometries, builds families of locally flat bodies with conical
//! defects (single cones, edge dislocations, dislocation lattices), and
//! minimizes distortion-power elastic energies over planar configurations.
//!
//! Everything numeric is generic over the scalar through [`scalar::Real`];
//! the type aliases at the crate root fix `f64`, which is what the binaries
//! and experiments use.

// Validators write `!(x > zero)` on purpose: the negation also rejects NaN,
// which `x <= zero` would let through. Index loops over parallel arrays stay
// indexed so the pairing is visible at the use site.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod body;
pub mod checks;
pub mod constructions;
pub mod energy;
pub mod io;
pub mod linmap;
pub mod rng;
pub mod scalar;
pub mod solve;

pub use scalar::Real;

/// Concrete `f64` aliases for the common types.
pub type Mat2 = linmap::Mat2<f64>;
pub type InnerProduct2 = linmap::InnerProduct2<f64>;
pub type LinMap2 = linmap::LinMap2<f64>;
pub type BodyMesh = body::BodyMesh<f64>;
pub type Configuration = body::Configuration<f64>;
pub type MorphismStats = body::MorphismStats<f64>;
pub type ClassifyThresholds = body::ClassifyThresholds<f64>;
pub type EnergySettings = energy::EnergySettings<f64>;
pub type SolveOptions = solve::SolveOptions<f64>;
