//! Shared fixtures for the criterion benchmarks.

use coclab::base::PerturbationMode;
use coclab::cocycle::derivative_cocycle;
use coclab::{BaseMap, Cocycle, IntMat2, Mat2, Potential};

pub fn cat() -> BaseMap {
    BaseMap::cat_map()
}

pub fn perturbed_cat(eps: f64) -> BaseMap {
    BaseMap::perturbed_toral(IntMat2::new(2, 1, 1, 1), eps, PerturbationMode::ShearPair).expect("eps within bound")
}

pub fn cat_derivative() -> Cocycle {
    derivative_cocycle(&cat())
}

/// Schrödinger cocycle in the elliptic regime, the slowest realistic estimate.
pub fn schrodinger() -> Cocycle {
    Cocycle::schrodinger(0.5, Potential::Cosine { amp: 1.0 })
}

pub fn hyperbolic_constant() -> Cocycle {
    Cocycle::constant(Mat2::diag(2.0, 0.5)).expect("det 1")
}
