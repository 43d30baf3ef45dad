//! Project-wide numerical tolerances.

use serde::{Deserialize, Serialize};

/// Every solver tolerance used by the pipeline, in one record.
///
/// Defaults are the contract values; all of them can be overridden from a
/// pipeline configuration file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Scaled primal feasibility of LP solutions.
    pub lp_feasibility: f64,
    /// Scaled dual feasibility and complementarity of LP solutions.
    pub lp_optimality: f64,
    /// KKT stationarity residual of QP solutions.
    pub qp_kkt: f64,
    /// Scaled primal feasibility of QP solutions.
    pub qp_feasibility: f64,
    /// Relative residual of Stein/Lyapunov solutions.
    pub lyapunov: f64,
    /// Relative residual of Riccati solutions.
    pub riccati: f64,
    /// Relative reconstruction error of eigendecompositions.
    pub eig_residual: f64,
    /// Largest accepted condition number of an eigenvector matrix.
    pub eig_condition_cap: f64,
    /// Symmetry tolerance for cost and weighting matrices.
    pub symmetry: f64,
    /// Relative tolerance for numerical rank decisions.
    pub rank: f64,
    /// Membership tolerance for polytope queries.
    pub membership: f64,
    /// Eigenvalues of G below this floor are rejected.
    pub eigen_floor: f64,
    /// Allowed slack in the decay-bound validation `‖A^i‖_G ≤ Mγ^i`.
    pub decay_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            lp_feasibility: 1e-8,
            lp_optimality: 1e-8,
            qp_kkt: 1e-6,
            qp_feasibility: 1e-8,
            lyapunov: 1e-8,
            riccati: 1e-8,
            eig_residual: 1e-8,
            eig_condition_cap: 1e12,
            symmetry: 1e-10,
            rank: 1e-10,
            membership: 1e-9,
            eigen_floor: 1e-14,
            decay_slack: 1e-9,
        }
    }
}
