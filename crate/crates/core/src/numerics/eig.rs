//! Eigendecomposition `P = T D T⁻¹` of a real square matrix over ℂ.
//!
//! Complex Schur form, then eigenvectors of the triangular factor by back
//! substitution. Near-defective matrices are refused through a cap on `cond(T)`.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use super::linalg::{ensure_square, to_complex, CMatrix};
use crate::config::Tolerances;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Columns are unit-norm eigenvectors.
    pub t: CMatrix,
    pub d: Vec<Complex64>,
    pub condition: f64,
}

impl EigenDecomposition {
    pub fn spectral_radius(&self) -> f64 {
        self.d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

fn cond_c(a: &CMatrix) -> f64 {
    let sv = a.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn eig_decompose(p: &DMatrix<f64>, tol: &Tolerances) -> Result<EigenDecomposition> {
    ensure_square(p, "eigendecomposition input")?;
    let n = p.nrows();
    if n == 0 {
        return Ok(EigenDecomposition {
            t: CMatrix::zeros(0, 0),
            d: Vec::new(),
            condition: 1.0,
        });
    }
    if p.iter().all(|&v| v == 0.0) {
        return Ok(EigenDecomposition {
            t: CMatrix::identity(n, n),
            d: vec![Complex64::new(0.0, 0.0); n],
            condition: 1.0,
        });
    }
    let pc = to_complex(p);
    let schur = Schur::try_new(pc.clone(), f64::EPSILON, 200 * n.max(10))
        .ok_or_else(|| Error::NonConvergence("complex Schur decomposition".into()))?;
    let (q, tri) = schur.unpack();
    let scale = tri.norm().max(f64::MIN_POSITIVE);
    let floor = tol.eigen_floor * scale;

    let mut x = CMatrix::zeros(n, n);
    for k in 0..n {
        let lambda = tri[(k, k)];
        x[(k, k)] = Complex64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for j in (i + 1)..=k {
                s += tri[(i, j)] * x[(j, k)];
            }
            let mut den = tri[(i, i)] - lambda;
            if den.norm() < floor {
                den = Complex64::new(floor, 0.0);
            }
            x[(i, k)] = -s / den;
        }
    }
    let mut t = q * x;
    for mut col in t.column_iter_mut() {
        let nrm = col.norm();
        if nrm > 0.0 && nrm.is_finite() {
            col /= Complex64::new(nrm, 0.0);
        }
    }
    if !t.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Defective { cond: f64::INFINITY });
    }
    let condition = cond_c(&t);
    if !(condition <= tol.eig_condition_cap) {
        return Err(Error::Defective { cond: condition });
    }
    let d: Vec<Complex64> = (0..n).map(|i| tri[(i, i)]).collect();
    let dm = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(d.clone()));
    let res = (&pc * &t - &t * dm).norm();
    if res > tol.eig_residual * p.norm() {
        return Err(Error::ResidualCheck {
            context: "eigendecomposition".into(),
            detail: format!("‖PT − TD‖ = {res:e}"),
        });
    }
    Ok(EigenDecomposition { t, d, condition })
}
