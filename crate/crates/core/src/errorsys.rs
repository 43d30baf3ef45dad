//! Joint error dynamics `ε⁺ = A_ε ε + B_ε r + G_ε ω` and G-weighted norms.
//!
//! `ε = [e; d]` with `e = x^f − V x̄` and `d = x̂ − x̄`, driven by
//! `r = [x̄; ū]` and `ω = [w; v]`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::model::{FullOrderModel, GainSet, ReducedOrderModel};
use crate::numerics::linalg::{block_diag, hstack, solve, spectral_norm, spectral_radius, vstack};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorSystem {
    #[serde(with = "crate::serde_util::matrix")]
    pub a_eps: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub b_eps: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub g_eps: DMatrix<f64>,
    pub nf: usize,
    pub n: usize,
}

impl ErrorSystem {
    pub fn assemble(fom: &FullOrderModel, rom: &ReducedOrderModel, gains: &GainSet) -> Result<Self> {
        let (nf, n, m, p) = (fom.n(), rom.n(), fom.m(), fom.p());
        if rom.v.shape() != (nf, n)
            || rom.w.shape() != (nf, n)
            || rom.b.shape() != (n, m)
            || rom.c.shape() != (p, n)
            || gains.k.shape() != (m, n)
            || gains.l.shape() != (n, p)
        {
            return Err(Error::dim(format!(
                "error system: n^f = {nf}, n = {n}, m = {m}, p = {p}, K {}x{}, L {}x{}",
                gains.k.nrows(),
                gains.k.ncols(),
                gains.l.nrows(),
                gains.l.ncols()
            )));
        }
        let (k, l) = (&gains.k, &gains.l);
        let top = hstack(&[&fom.a, &(&fom.b * k)]);
        let bottom = hstack(&[&(l * &fom.c), &(&rom.a + &rom.b * k - l * &rom.c)]);
        let a_eps = vstack(&[&top, &bottom]);

        // P⊥X = X − V (WᵀV)⁻¹ Wᵀ X
        let wtv = rom.w.transpose() * &rom.v;
        let perp = |x: &DMatrix<f64>| -> Result<DMatrix<f64>> {
            let coeff = solve(&wtv, &(rom.w.transpose() * x), "WᵀV")?;
            Ok(x - &rom.v * coeff)
        };
        let pa = perp(&(&fom.a * &rom.v))?;
        let pb = perp(&fom.b)?;
        let b_top = hstack(&[&pa, &pb]);
        let b_eps = vstack(&[&b_top, &DMatrix::zeros(n, n + m)]);
        let g_eps = block_diag(&[&fom.bw, l]);
        Ok(Self {
            a_eps,
            b_eps,
            g_eps,
            nf,
            n,
        })
    }

    pub fn dim(&self) -> usize {
        self.a_eps.nrows()
    }

    pub fn spectral_radius(&self) -> Result<f64> {
        spectral_radius(&self.a_eps)
    }

    /// Errors unless `ρ(A_ε) < 1 − margin`.
    pub fn require_stable(&self, margin: f64) -> Result<f64> {
        let rho = self.spectral_radius()?;
        if !(rho < 1.0 - margin) {
            return Err(Error::Assumption(format!(
                "error dynamics are not Schur stable: ρ(A_ε) = {rho}"
            )));
        }
        Ok(rho)
    }

    pub fn step(&self, eps: &DVector<f64>, r: &DVector<f64>, omega: &DVector<f64>) -> DVector<f64> {
        &self.a_eps * eps + &self.b_eps * r + &self.g_eps * omega
    }

    /// `E_z = [H_z H^f, 0]` and `E_u = [0, H_u K]`.
    pub fn output_maps(
        &self,
        fom: &FullOrderModel,
        gains: &GainSet,
        hz: &DMatrix<f64>,
        hu: &DMatrix<f64>,
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        let ez = hstack(&[&(hz * &fom.h), &DMatrix::zeros(hz.nrows(), self.n)]);
        let eu = hstack(&[&DMatrix::zeros(hu.nrows(), self.nf), &(hu * &gains.k)]);
        (ez, eu)
    }
}

/// `‖x‖_G = ‖G^{1/2} x‖₂`, `‖X‖_G = ‖G^{1/2} X G^{−1/2}‖₂`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightedNorm {
    #[serde(with = "crate::serde_util::matrix")]
    pub g: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub g_half: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub g_half_inv: DMatrix<f64>,
}

impl WeightedNorm {
    pub fn new(g: DMatrix<f64>, tol: &Tolerances) -> Result<Self> {
        if !g.is_square() {
            return Err(Error::dim("weighting matrix must be square"));
        }
        let sym = (&g + g.transpose()) * 0.5;
        let eig = sym.clone().symmetric_eigen();
        let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let lmin = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if !(lmin > tol.eigen_floor * lmax.max(1.0)) {
            return Err(Error::NotPositiveDefinite(format!(
                "weighting matrix G (smallest eigenvalue {lmin:e})"
            )));
        }
        let q = &eig.eigenvectors;
        let sq = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
        let isq = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
        Ok(Self {
            g_half: q * sq * q.transpose(),
            g_half_inv: q * isq * q.transpose(),
            g: sym,
        })
    }

    pub fn identity(dim: usize) -> Self {
        let i = DMatrix::identity(dim, dim);
        Self {
            g: i.clone(),
            g_half: i.clone(),
            g_half_inv: i,
        }
    }

    /// Diagonal weighting from positive entries.
    pub fn diagonal(g: &DVector<f64>) -> Result<Self> {
        if g.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::NotPositiveDefinite("diagonal weighting".into()));
        }
        Ok(Self {
            g: DMatrix::from_diagonal(g),
            g_half: DMatrix::from_diagonal(&g.map(f64::sqrt)),
            g_half_inv: DMatrix::from_diagonal(&g.map(|v| 1.0 / v.sqrt())),
        })
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn norm(&self, x: &DVector<f64>) -> f64 {
        (&self.g_half * x).norm()
    }

    /// `‖G^{−1/2} θ‖₂`, the dual norm used for row bounds.
    pub fn dual_norm(&self, theta: &DVector<f64>) -> f64 {
        (&self.g_half_inv * theta).norm()
    }

    /// `G^{1/2} X G^{−1/2}`.
    pub fn similarity(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        &self.g_half * x * &self.g_half_inv
    }
}

pub fn weighted_matrix_norm(x: &DMatrix<f64>, wn: &WeightedNorm) -> Result<f64> {
    if x.shape() != wn.g.shape() {
        return Err(Error::dim(format!(
            "matrix {}x{} against weighting of dim {}",
            x.nrows(),
            x.ncols(),
            wn.dim()
        )));
    }
    Ok(spectral_norm(&wn.similarity(x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{project, synthesize_gains, GainWeights};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn setup(seed: u64) -> (FullOrderModel, ReducedOrderModel, GainSet) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nf = 7;
        let a = rand_mat(&mut rng, nf, nf);
        let a = &a * (0.9 / spectral_radius(&a).unwrap());
        let fom = FullOrderModel::new(
            a,
            rand_mat(&mut rng, nf, 2),
            rand_mat(&mut rng, nf, 3),
            rand_mat(&mut rng, 2, nf),
            rand_mat(&mut rng, 2, nf),
        )
        .unwrap();
        let v = rand_mat(&mut rng, nf, 3);
        let w = rand_mat(&mut rng, nf, 3);
        let rom = project(&fom, &v, &w).unwrap();
        let gains = synthesize_gains(&rom, &GainWeights::identity(&rom), &Tolerances::default()).unwrap();
        (fom, rom, gains)
    }

    #[test]
    fn one_step_identity_matches_direct_simulation() {
        let (fom, rom, gains) = setup(1);
        let es = ErrorSystem::assemble(&fom, &rom, &gains).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let rv = |rng: &mut ChaCha8Rng, n: usize| DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
            let xf = rv(&mut rng, 7);
            let xhat = rv(&mut rng, 3);
            let xbar = rv(&mut rng, 3);
            let ubar = rv(&mut rng, 2);
            let w = rv(&mut rng, 3);
            let v = rv(&mut rng, 2);
            let u = &ubar + &gains.k * (&xhat - &xbar);
            let y = &fom.c * &xf + &v;
            let xf1 = &fom.a * &xf + &fom.b * &u + &fom.bw * &w;
            let xhat1 = &rom.a * &xhat + &rom.b * &u + &gains.l * (&y - &rom.c * &xhat);
            let xbar1 = &rom.a * &xbar + &rom.b * &ubar;
            let eps = crate::numerics::linalg::vconcat(&[&(&xf - &rom.v * &xbar), &(&xhat - &xbar)]);
            let direct = crate::numerics::linalg::vconcat(&[&(&xf1 - &rom.v * &xbar1), &(&xhat1 - &xbar1)]);
            let r = crate::numerics::linalg::vconcat(&[&xbar, &ubar]);
            let om = crate::numerics::linalg::vconcat(&[&w, &v]);
            let model = es.step(&eps, &r, &om);
            assert!((model - &direct).amax() <= 1e-10 * (1.0 + direct.amax()));
        }
    }

    #[test]
    fn exact_projection_kills_reduction_input() {
        let (fom, _, _) = setup(3);
        let i = DMatrix::identity(7, 7);
        let rom = project(&fom, &i, &i).unwrap();
        let gains = synthesize_gains(&rom, &GainWeights::identity(&rom), &Tolerances::default()).unwrap();
        let es = ErrorSystem::assemble(&fom, &rom, &gains).unwrap();
        assert!(es.b_eps.amax() < 1e-12);
    }

    #[test]
    fn zero_gains_decouple() {
        let (fom, rom, _) = setup(4);
        let gains = GainSet {
            k: DMatrix::zeros(2, 3),
            l: DMatrix::zeros(3, 2),
        };
        let es = ErrorSystem::assemble(&fom, &rom, &gains).unwrap();
        assert_eq!(es.a_eps.view((0, 0), (7, 7)), fom.a);
        assert_eq!(es.a_eps.view((7, 7), (3, 3)), rom.a);
        assert!(es.a_eps.view((0, 7), (7, 3)).iter().all(|&v| v == 0.0));
        assert!(es.a_eps.view((7, 0), (3, 7)).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn weighted_norm_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tol = Tolerances::default();
        let x = rand_mat(&mut rng, 4, 4);
        let gid = WeightedNorm::identity(4);
        assert!((weighted_matrix_norm(&x, &gid).unwrap() - spectral_norm(&x)).abs() < 1e-12);
        let d = DVector::from_vec(vec![1.0, 4.0, 0.25, 9.0]);
        let wn = WeightedNorm::new(DMatrix::from_diagonal(&d), &tol).unwrap();
        assert!((weighted_matrix_norm(&DMatrix::identity(4, 4), &wn).unwrap() - 1.0).abs() < 1e-12);

        // Oracle: power iteration on SᵀS with S = G^{1/2} X G^{−1/2} built entrywise.
        let s = DMatrix::from_fn(4, 4, |i, j| d[i].sqrt() * x[(i, j)] / d[j].sqrt());
        let sts = s.transpose() * &s;
        let mut v = DVector::from_element(4, 1.0);
        for _ in 0..2000 {
            v = &sts * &v;
            v /= v.norm();
        }
        let oracle = (&s * &v).norm();
        assert!((weighted_matrix_norm(&x, &wn).unwrap() - oracle).abs() < 1e-8);
    }

    #[test]
    fn submultiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let tol = Tolerances::default();
        for _ in 0..20 {
            let r = rand_mat(&mut rng, 5, 5);
            let wn = WeightedNorm::new(&r * r.transpose() + DMatrix::identity(5, 5) * 0.1, &tol).unwrap();
            let x = rand_mat(&mut rng, 5, 5);
            let y = rand_mat(&mut rng, 5, 5);
            let lhs = weighted_matrix_norm(&(&x * &y), &wn).unwrap();
            let rhs = weighted_matrix_norm(&x, &wn).unwrap() * weighted_matrix_norm(&y, &wn).unwrap();
            assert!(lhs <= rhs + 1e-9);
        }
    }

    #[test]
    fn indefinite_weight_rejected() {
        let g = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        assert!(WeightedNorm::new(g, &Tolerances::default()).is_err());
    }
}
