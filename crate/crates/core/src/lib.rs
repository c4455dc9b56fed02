//! Projection, membership oracles and projector sensitivity for the norm cones
//! `𝒦 = {(A, s) ∈ 𝕊^m × ℝ : N(A) ≤ s}` where `N` is a Schatten p-norm,
//! `p ∈ {1} ∪ (1, ∞) ∪ {∞}`.

pub mod cones;
pub mod error;
pub mod gauge;
pub mod oracle;
pub mod projection;
pub mod sensitivity;
pub mod spectral;

pub use cones::{ConePoint, Membership, RegionLabel};
pub use error::{ConeError, Result};
pub use gauge::{BlockCoeffs, GaugeSpec};
pub use projection::{EpiProjection, NewtonOutcome, ProjectionResult};
pub use spectral::{BlockPartition, EigenDecomp};
pub use sensitivity::{
    DerivativeCase, DerivativeMap, DirectionalDerivative, OriginSampling, ProjectorDerivative,
};
