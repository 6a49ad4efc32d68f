//! Mean curvature motion for point cloud varifolds.
//!
//! A point cloud varifold is a finite set of weighted points, each carrying a
//! tangent plane. This crate estimates masses and tangent planes from raw
//! positions, evaluates a kernel-regularized approximate mean curvature with a
//! selectable projection operator, and advances the cloud in time with a
//! semi-implicit (linear) or fully implicit (Picard) scheme.
//!
//! The crate is `no_std` and only needs `alloc`. All transcendental functions
//! come from `libm`, so trajectories are reproducible across platforms.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod estimators;
pub mod flow;
pub mod kernels;
pub mod linalg;
pub mod metrics;
pub mod neighbors;
pub mod shapes;
pub mod varifold;

pub use error::{CoreError, Result};
pub use estimators::{CurvatureField, MassProfile, TangentEstimate};
pub use flow::{FlowConfig, Scheme, StepDiagnostics, StepSystem};
pub use kernels::{ExpKernel, KernelPair};
pub use neighbors::{KdTree, Neighbor, NeighborCounts, NeighborGraph};
pub use shapes::{PinRule, ShapeKind, ShapeSpec};
pub use varifold::{PointCloudVarifold, ProjectorKind};
