//! Balanced truncation (square-root method) and the stable/unstable split.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::FullOrderModel;
use crate::config::Tolerances;
use crate::numerics::linalg::{eigenvalues, inverse, range_basis, solve, spectral_radius, vstack};
use crate::numerics::solve_stein;
use crate::{Error, Result};

/// Distance to the unit circle below which the split is refused.
pub const UNIT_CIRCLE_GAP: f64 = 1e-8;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BalancedBases {
    #[serde(with = "crate::serde_util::matrix")]
    pub v: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub w: DMatrix<f64>,
    /// All Hankel singular values of the input system, nonincreasing.
    pub hankel: Vec<f64>,
}

/// Symmetric PSD factor `S` with `X = S Sᵀ`.
fn psd_factor(x: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = x.clone().symmetric_eigen();
    let mut s = eig.eigenvectors;
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let r = l.max(0.0).sqrt();
        s.column_mut(j).scale_mut(r);
    }
    s
}

/// Balanced truncation to order `n` of a Schur-stable model.
///
/// Inputs are the control channels `B^f`; outputs are `[C^f; H^f]`, so that
/// both measured and constrained outputs are represented in the reduced model.
pub fn balanced_truncation(fom: &FullOrderModel, n: usize, tol: &Tolerances) -> Result<BalancedBases> {
    let nf = fom.n();
    if n > nf {
        return Err(Error::invalid(format!("reduced order {n} exceeds n^f = {nf}")));
    }
    let rho = spectral_radius(&fom.a)?;
    if rho >= 1.0 {
        return Err(Error::invalid(format!(
            "balanced truncation needs a Schur-stable model (spectral radius {rho}); decompose first"
        )));
    }
    let out = vstack(&[&fom.c, &fom.h]);
    let wc = solve_stein(&fom.a, &(&fom.b * fom.b.transpose()), tol)?;
    let wo = solve_stein(&fom.a.transpose(), &(out.transpose() * &out), tol)?;
    let s = psd_factor(&wc);
    let r = psd_factor(&wo);
    let svd = (r.transpose() * &s).svd(true, true);
    let u = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].partial_cmp(&sv[i]).unwrap_or(std::cmp::Ordering::Equal));
    let hankel: Vec<f64> = order.iter().map(|&i| sv[i]).collect();

    if n == nf {
        let eye = DMatrix::identity(nf, nf);
        return Ok(BalancedBases { v: eye.clone(), w: eye, hankel });
    }
    if n == 0 {
        return Ok(BalancedBases {
            v: DMatrix::zeros(nf, 0),
            w: DMatrix::zeros(nf, 0),
            hankel,
        });
    }
    let smallest = hankel[n - 1];
    if !(smallest > 1e-14 * hankel[0].max(f64::MIN_POSITIVE)) {
        return Err(Error::invalid(format!(
            "reduced order {n} exceeds the numerical minimal order (Hankel value {smallest:e})"
        )));
    }
    let mut v = DMatrix::zeros(nf, n);
    let mut w = DMatrix::zeros(nf, n);
    for (k, &i) in order.iter().take(n).enumerate() {
        let scale = 1.0 / sv[i].sqrt();
        v.column_mut(k).copy_from(&(&s * vt.row(i).transpose() * scale));
        w.column_mut(k).copy_from(&(&r * u.column(i) * scale));
    }
    Ok(BalancedBases { v, w, hankel })
}

/// Block separation `T⁻¹ A^f T = blkdiag(A_s, A_u)` with `|λ(A_s)| < 1 < |λ(A_u)|`.
#[derive(Debug, Clone)]
pub struct StableUnstableSplit {
    pub t: DMatrix<f64>,
    pub t_inv: DMatrix<f64>,
    pub stable: FullOrderModel,
    pub unstable: FullOrderModel,
}

impl StableUnstableSplit {
    pub fn n_stable(&self) -> usize {
        self.stable.n()
    }
    pub fn n_unstable(&self) -> usize {
        self.unstable.n()
    }

    /// Reassembles the original coordinates from the two blocks.
    pub fn recombine(&self) -> FullOrderModel {
        let ns = self.n_stable();
        let nu = self.n_unstable();
        let n = ns + nu;
        let mut a = DMatrix::zeros(n, n);
        a.view_mut((0, 0), (ns, ns)).copy_from(&self.stable.a);
        a.view_mut((ns, ns), (nu, nu)).copy_from(&self.unstable.a);
        let b = vstack(&[&self.stable.b, &self.unstable.b]);
        let bw = vstack(&[&self.stable.bw, &self.unstable.bw]);
        let c = crate::numerics::linalg::hstack(&[&self.stable.c, &self.unstable.c]);
        let h = crate::numerics::linalg::hstack(&[&self.stable.h, &self.unstable.h]);
        FullOrderModel {
            a: &self.t * a * &self.t_inv,
            b: &self.t * b,
            bw: &self.t * bw,
            c: c * &self.t_inv,
            h: h * &self.t_inv,
        }
    }
}

/// Matrix sign function by scaled Newton iteration.
fn matrix_sign(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    let mut s = x.clone();
    for _ in 0..100 {
        let inv = inverse(&s, "matrix sign iterate")?;
        let det = s.clone().lu().determinant().abs();
        let mu = if det > 0.0 && det.is_finite() {
            det.powf(-1.0 / n as f64)
        } else {
            1.0
        };
        let next = (&s * mu + inv / mu) * 0.5;
        let delta = (&next - &s).norm();
        s = next;
        if delta <= 1e-13 * s.norm() {
            // One unscaled step to settle.
            let inv = inverse(&s, "matrix sign iterate")?;
            return Ok((&s + inv) * 0.5);
        }
    }
    Err(Error::NonConvergence("matrix sign iteration".into()))
}

pub fn stable_unstable_decompose(fom: &FullOrderModel) -> Result<StableUnstableSplit> {
    let nf = fom.n();
    let eigs = eigenvalues(&fom.a)?;
    if let Some(z) = eigs.iter().find(|z| (z.norm() - 1.0).abs() < UNIT_CIRCLE_GAP) {
        return Err(Error::invalid(format!(
            "eigenvalue {z} lies within {UNIT_CIRCLE_GAP:e} of the unit circle"
        )));
    }
    let nu = eigs.iter().filter(|z| z.norm() > 1.0).count();
    let (t, t_inv) = if nu == 0 || nu == nf {
        (DMatrix::identity(nf, nf), DMatrix::identity(nf, nf))
    } else {
        // Cayley map sends the open unit disk to the open left half plane.
        let eye = DMatrix::<f64>::identity(nf, nf);
        let cay = solve(&(&fom.a + &eye).transpose(), &(&fom.a - &eye).transpose(), "A + I")?.transpose();
        let sign = matrix_sign(&cay)?;
        let ps = (&eye - &sign) * 0.5;
        let pu = (&eye + &sign) * 0.5;
        let us = range_basis(&ps, 1e-8);
        let uu = range_basis(&pu, 1e-8);
        if us.ncols() != nf - nu || uu.ncols() != nu {
            return Err(Error::NonConvergence(format!(
                "spectral projector ranks {} and {} do not match {} stable / {nu} unstable eigenvalues",
                us.ncols(),
                uu.ncols(),
                nf - nu
            )));
        }
        let t = crate::numerics::linalg::hstack(&[&us, &uu]);
        let t_inv = inverse(&t, "stable/unstable transform")?;
        (t, t_inv)
    };
    let ns = nf - nu;
    let at = &t_inv * &fom.a * &t;
    let bt = &t_inv * &fom.b;
    let bwt = &t_inv * &fom.bw;
    let ct = &fom.c * &t;
    let ht = &fom.h * &t;
    let part = |lo: usize, len: usize| FullOrderModel {
        a: at.view((lo, lo), (len, len)).into_owned(),
        b: bt.rows(lo, len).into_owned(),
        bw: bwt.rows(lo, len).into_owned(),
        c: ct.columns(lo, len).into_owned(),
        h: ht.columns(lo, len).into_owned(),
    };
    Ok(StableUnstableSplit {
        stable: part(0, ns),
        unstable: part(ns, nu),
        t,
        t_inv,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReductionResult {
    #[serde(with = "crate::serde_util::matrix")]
    pub v: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub w: DMatrix<f64>,
    /// Hankel singular values of the stable part.
    pub hankel: Vec<f64>,
    pub n_unstable: usize,
}

/// Order-`n` bases: the stable part is balanced and truncated to
/// `n − n_unstable` states, the unstable part is kept whole.
pub fn reduce(fom: &FullOrderModel, n: usize, tol: &Tolerances) -> Result<ReductionResult> {
    let split = stable_unstable_decompose(fom)?;
    let nu = split.n_unstable();
    if n < nu {
        return Err(Error::invalid(format!(
            "reduced order {n} is smaller than the {nu} unstable modes"
        )));
    }
    let ns_keep = n - nu;
    let bal = if split.n_stable() > 0 {
        balanced_truncation(&split.stable, ns_keep, tol)?
    } else {
        BalancedBases {
            v: DMatrix::zeros(0, 0),
            w: DMatrix::zeros(0, 0),
            hankel: Vec::new(),
        }
    };
    let ns = split.n_stable();
    let mut vb = DMatrix::zeros(ns + nu, n);
    let mut wb = DMatrix::zeros(ns + nu, n);
    vb.view_mut((0, 0), (ns, ns_keep)).copy_from(&bal.v);
    wb.view_mut((0, 0), (ns, ns_keep)).copy_from(&bal.w);
    for i in 0..nu {
        vb[(ns + i, ns_keep + i)] = 1.0;
        wb[(ns + i, ns_keep + i)] = 1.0;
    }
    Ok(ReductionResult {
        v: &split.t * vb,
        w: split.t_inv.transpose() * wb,
        hankel: bal.hankel,
        n_unstable: nu,
    })
}
