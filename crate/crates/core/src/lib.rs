//! Numerical laboratory for SL(2,R) cocycles over maps of the 2-torus.
//!
//! Base maps ([`BaseMap`]) and cocycles ([`Cocycle`]) are plain values;
//! products are accumulated with explicit renormalisation
//! ([`ScaledProduct`]) so that long orbits never overflow. All randomness is
//! drawn from seeded ChaCha substreams, and parallel reductions are ordered,
//! so every function here is a deterministic function of its arguments.

// Range checks are written `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod base;
pub mod classify;
pub mod cocycle;
pub mod conjugacy;
pub mod error;
pub mod experiments;
pub mod lyapunov;
pub mod mat2;
pub mod product;
pub mod rng;
pub mod torus;

pub use base::{BaseMap, MapKind, PerturbationMode};
pub use classify::{ClassificationVerdict, EstimateConfig, HypConfig, PointType};
pub use cocycle::{AngleField, Cocycle, Potential, RotationGrid, TransportDirection};
pub use conjugacy::ConjugacyMap;
pub use error::{Error, Result};
pub use lyapunov::{IntegratedExponent, LyapunovEstimate, MeasureSpec, LAMBDA_MIN};
pub use mat2::{IntMat2, Mat2};
pub use product::ScaledProduct;
pub use torus::TorusPoint;
