//! Reduced-order model predictive control with a priori error bounds.
//!
//! The crate synthesizes a reduced-order MPC scheme for a high-dimensional
//! discrete LTI plant and computes the constraint tightening that certifies
//! robust constraint satisfaction of the full-order closed loop:
//!
//! * [`numerics`]: LP, QP, Stein/Lyapunov, Riccati and eigendecomposition kernels.
//! * [`geometry`]: H-polytopes, boxes, vertex enumeration and tightening.
//! * [`model`]: full/reduced models, projection, balanced truncation, gains.
//! * [`errorsys`]: joint error dynamics and G-weighted norms.
//! * [`bounds`]: the certificate pipeline (X̄, C_r, C_ω, decay bounds, Δ).
//! * [`rompc`]: estimator, control law, reduced OCP and terminal ingredients.
//! * [`sim`]: closed-loop simulation, disturbance sampling and auditing.
//! * [`systems`]: benchmark generators and Matrix Market I/O.
//! * [`pipeline`]: configuration and end-to-end orchestration.

pub mod bounds;
pub mod config;
pub mod error;
pub mod errorsys;
pub mod geometry;
pub mod model;
pub mod numerics;
pub mod pipeline;
pub mod rompc;
pub mod sim;
pub mod systems;

mod serde_util;

pub use error::{Error, Result};

pub use nalgebra::{DMatrix, DVector};

/// Order-preserving map, data-parallel when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub(crate) fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    items.iter().map(f).collect()
}
