//! Dense linear-algebra and optimization kernels.
//!
//! Everything here is a pure function of its inputs. Gain sign convention,
//! used project-wide: the control law is `u = K x`, so the closed loop is
//! `A + B K`.

mod dare;
mod eig;
pub mod linalg;
mod lp;
mod lyapunov;
mod qp;

pub use dare::{dare_residual, solve_dare, DareSolution};
pub use eig::{eig_decompose, EigenDecomposition};
pub use lp::{solve_lp, solve_lp_with, KktResiduals, LinearProgram, LpSolution, LpStatus};
pub use lyapunov::{solve_discrete_lyapunov, solve_stein, stein_residual};
pub use qp::{solve_qp, solve_qp_with, QpSolution, QpStatus, QuadraticProgram};

/// Running maxima of post-hoc residuals over a batch of solves.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverStats {
    pub lp_solves: usize,
    pub qp_solves: usize,
    pub max_lp_primal: f64,
    pub max_lp_dual: f64,
    pub max_lp_complementarity: f64,
    pub max_qp_kkt: f64,
    pub max_qp_primal: f64,
}

impl SolverStats {
    pub fn record_lp(&mut self, r: &KktResiduals) {
        self.lp_solves += 1;
        self.max_lp_primal = self.max_lp_primal.max(r.primal);
        self.max_lp_dual = self.max_lp_dual.max(r.dual);
        self.max_lp_complementarity = self.max_lp_complementarity.max(r.complementarity);
    }

    pub fn record_qp(&mut self, kkt: f64, primal: f64) {
        self.qp_solves += 1;
        self.max_qp_kkt = self.max_qp_kkt.max(kkt);
        self.max_qp_primal = self.max_qp_primal.max(primal);
    }

    pub fn merge(&mut self, other: &SolverStats) {
        self.lp_solves += other.lp_solves;
        self.qp_solves += other.qp_solves;
        self.max_lp_primal = self.max_lp_primal.max(other.max_lp_primal);
        self.max_lp_dual = self.max_lp_dual.max(other.max_lp_dual);
        self.max_lp_complementarity = self.max_lp_complementarity.max(other.max_lp_complementarity);
        self.max_qp_kkt = self.max_qp_kkt.max(other.max_qp_kkt);
        self.max_qp_primal = self.max_qp_primal.max(other.max_qp_primal);
    }
}
