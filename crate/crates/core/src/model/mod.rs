//! Plant and reduced-order models, projection, reduction and gain design.
//!
//! The plant is `x⁺ = A^f x + B^f u + B^f_w w`, `y = C^f x + v`, `z = H^f x`.

mod condense;
mod gains;
mod reduction;

pub use condense::TrajectoryMaps;

pub use gains::{check_ctrb_obsv, krylov_rank, synthesize_gains, CtrbObsvReport, GainSet, GainWeights};
pub use reduction::{
    balanced_truncation, reduce, stable_unstable_decompose, BalancedBases, ReductionResult,
    StableUnstableSplit,
};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::numerics::linalg::{condition_number, solve};
use crate::{Error, Result};

/// Largest admissible condition number of `WᵀV`.
pub const PROJECTION_COND_CAP: f64 = 1e10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullOrderModel {
    #[serde(with = "crate::serde_util::matrix")]
    pub a: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub b: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub bw: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub c: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub h: DMatrix<f64>,
}

impl FullOrderModel {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        bw: DMatrix<f64>,
        c: DMatrix<f64>,
        h: DMatrix<f64>,
    ) -> Result<Self> {
        let model = Self { a, b, bw, c, h };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        let checks = [
            ("A^f", self.a.shape(), (n, n)),
            ("B^f", self.b.shape(), (n, self.b.ncols())),
            ("B^f_w", self.bw.shape(), (n, self.bw.ncols())),
            ("C^f", self.c.shape(), (self.c.nrows(), n)),
            ("H^f", self.h.shape(), (self.h.nrows(), n)),
        ];
        for (name, got, want) in checks {
            if got != want {
                return Err(Error::dim(format!(
                    "{name} is {}x{}, expected {}x{} for n^f = {n}",
                    got.0, got.1, want.0, want.1
                )));
            }
        }
        for (name, m) in [("A^f", &self.a), ("B^f", &self.b), ("B^f_w", &self.bw), ("C^f", &self.c), ("H^f", &self.h)] {
            if !m.iter().all(|v| v.is_finite()) {
                return Err(Error::invalid(format!("{name} has non-finite entries")));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    pub fn mw(&self) -> usize {
        self.bw.ncols()
    }
    pub fn p(&self) -> usize {
        self.c.nrows()
    }
    pub fn o(&self) -> usize {
        self.h.nrows()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedOrderModel {
    #[serde(with = "crate::serde_util::matrix")]
    pub a: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub b: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub c: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub h: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub v: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub w: DMatrix<f64>,
}

impl ReducedOrderModel {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    pub fn p(&self) -> usize {
        self.c.nrows()
    }
    pub fn o(&self) -> usize {
        self.h.nrows()
    }
}

/// Petrov–Galerkin projection: `A = (WᵀV)⁻¹WᵀA^fV`, `B = (WᵀV)⁻¹WᵀB^f`,
/// `C = C^fV`, `H = H^fV`.
pub fn project(fom: &FullOrderModel, v: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<ReducedOrderModel> {
    let nf = fom.n();
    if v.nrows() != nf || w.shape() != v.shape() {
        return Err(Error::dim(format!(
            "bases V {}x{} and W {}x{} for n^f = {nf}",
            v.nrows(),
            v.ncols(),
            w.nrows(),
            w.ncols()
        )));
    }
    let n = v.ncols();
    let wtv = w.transpose() * v;
    let cond = condition_number(&wtv);
    if !(cond <= PROJECTION_COND_CAP) {
        return Err(Error::Singular(format!("WᵀV (condition number {cond:e})")));
    }
    let wta = w.transpose() * (&fom.a * v);
    let wtb = w.transpose() * &fom.b;
    let (a, b) = if wtv == DMatrix::identity(n, n) {
        (wta, wtb)
    } else {
        (solve(&wtv, &wta, "WᵀV")?, solve(&wtv, &wtb, "WᵀV")?)
    };
    Ok(ReducedOrderModel {
        a,
        b,
        c: &fom.c * v,
        h: &fom.h * v,
        v: v.clone(),
        w: w.clone(),
    })
}

/// Markov parameters `C Aᵏ B`, `k = 0..steps`.
pub fn impulse_response(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    steps: usize,
) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(steps);
    let mut x = b.clone();
    for _ in 0..steps {
        out.push(c * &x);
        x = a * x;
    }
    out
}
