//! Diagonal weighting that minimizes `Πₗ (Σᵢ a_{l,i} gᵢ)(Σⱼ b_{l,j} / gⱼ)`.
//!
//! With `X₁ = T`, `Y₁ = T⁻¹` the first factor bounds `M²` through Frobenius
//! norms. The problem is convex in `sᵢ = log gᵢ`; it is solved by cyclic
//! coordinate descent with exact one-dimensional minimization.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::numerics::linalg::CMatrix;
use crate::{Error, Result};

/// Search interval for each `log gᵢ` when the objective is monotone in it.
const LOG_RANGE: f64 = 10.0;

/// One factor `(Σ aᵢ gᵢ)(Σ bⱼ / gⱼ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GpTerm {
    pub a: DVector<f64>,
    pub b: DVector<f64>,
}

impl GpTerm {
    /// `aᵢ` = squared row norms of `X`, `bⱼ` = squared column norms of `Y`.
    pub fn from_real(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<Self> {
        Self::check(x.nrows(), y.ncols())?;
        Ok(Self {
            a: DVector::from_fn(x.nrows(), |i, _| x.row(i).norm_squared()),
            b: DVector::from_fn(y.ncols(), |j, _| y.column(j).norm_squared()),
        })
    }

    pub fn from_complex(x: &CMatrix, y: &CMatrix) -> Result<Self> {
        Self::check(x.nrows(), y.ncols())?;
        Ok(Self {
            a: DVector::from_fn(x.nrows(), |i, _| x.row(i).iter().map(|z| z.norm_sqr()).sum()),
            b: DVector::from_fn(y.ncols(), |j, _| y.column(j).iter().map(|z| z.norm_sqr()).sum()),
        })
    }

    fn check(rows: usize, cols: usize) -> Result<()> {
        if rows != cols {
            return Err(Error::dim(format!("X has {rows} rows but Y has {cols} columns")));
        }
        Ok(())
    }

    fn is_trivial(&self) -> bool {
        self.a.iter().all(|&v| v == 0.0) || self.b.iter().all(|&v| v == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpOptions {
    pub max_sweeps: usize,
    pub rel_tol: f64,
}

impl Default for GpOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 500,
            rel_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpSolution {
    /// Diagonal of `G`, normalized to geometric mean 1.
    #[serde(with = "crate::serde_util::vector")]
    pub g: DVector<f64>,
    pub objective: f64,
    pub sweeps: usize,
    /// Objective after each sweep, starting from `g = 1`.
    pub history: Vec<f64>,
    /// Coordinates that do not affect the objective and were fixed at 1.
    pub pinned: Vec<usize>,
}

/// `log Πₗ (Σ aᵢ gᵢ)(Σ bⱼ / gⱼ)` over the nontrivial terms.
pub fn gp_log_objective(terms: &[GpTerm], g: &DVector<f64>) -> f64 {
    terms
        .iter()
        .filter(|t| !t.is_trivial())
        .map(|t| t.a.dot(g).ln() + t.b.component_div(g).sum().ln())
        .sum()
}

pub fn gp_objective(terms: &[GpTerm], g: &DVector<f64>) -> f64 {
    gp_log_objective(terms, g).exp()
}

/// Terms with an all-zero `a` or `b` are identically zero and are skipped.
pub fn optimize_g_geometric(terms: &[GpTerm], p: usize, opts: &GpOptions) -> Result<GpSolution> {
    for t in terms {
        if t.a.len() != p || t.b.len() != p {
            return Err(Error::dim(format!(
                "geometric program term of sizes {}/{} for p = {p}",
                t.a.len(),
                t.b.len()
            )));
        }
        if t.a.iter().chain(t.b.iter()).any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("geometric program coefficients must be finite and nonnegative"));
        }
    }
    let terms: Vec<GpTerm> = terms.iter().filter(|t| !t.is_trivial()).cloned().collect();
    let pinned: Vec<usize> = (0..p)
        .filter(|&i| terms.iter().all(|t| t.a[i] == 0.0 && t.b[i] == 0.0))
        .collect();
    let mut s = DVector::<f64>::zeros(p);
    let mut g = DVector::from_element(p, 1.0);
    let mut f = gp_log_objective(&terms, &g);
    let mut history = vec![f.exp()];
    let mut sweeps = 0;
    let active: Vec<usize> = (0..p).filter(|i| !pinned.contains(i)).collect();
    if p > 1 && !terms.is_empty() {
        let mut asum: Vec<f64> = terms.iter().map(|t| t.a.dot(&g)).collect();
        let mut bsum: Vec<f64> = terms.iter().map(|t| t.b.component_div(&g).sum()).collect();
        while sweeps < opts.max_sweeps {
            sweeps += 1;
            let (s_prev, g_prev) = (s.clone(), g.clone());
            for &i in &active {
                let gi = g[i];
                let rest: Vec<(f64, f64, f64, f64)> = terms
                    .iter()
                    .enumerate()
                    .map(|(l, t)| {
                        let (a, b) = (t.a[i], t.b[i]);
                        ((asum[l] - a * gi).max(0.0), a, (bsum[l] - b / gi).max(0.0), b)
                    })
                    .collect();
                let si = line_minimize(&rest, s[i]);
                s[i] = si;
                g[i] = si.exp();
                for (l, &(alpha, a, beta, b)) in rest.iter().enumerate() {
                    asum[l] = alpha + a * g[i];
                    bsum[l] = beta + b / g[i];
                }
            }
            // Fresh sums each sweep keep the running totals from drifting.
            for (l, t) in terms.iter().enumerate() {
                asum[l] = t.a.dot(&g);
                bsum[l] = t.b.component_div(&g).sum();
            }
            let fnew = gp_log_objective(&terms, &g);
            // At convergence roundoff can raise the objective by an ulp; keep
            // the previous point so the history never increases.
            if fnew > f {
                s = s_prev;
                g = g_prev;
                break;
            }
            history.push(fnew.exp());
            let decrease = 1.0 - (fnew - f).exp();
            f = fnew;
            if decrease < opts.rel_tol {
                break;
            }
        }
    }
    // Uniform scaling leaves the objective unchanged.
    if !active.is_empty() {
        let mean = active.iter().map(|&i| s[i]).sum::<f64>() / active.len() as f64;
        for &i in &active {
            g[i] = (s[i] - mean).exp();
        }
    }
    Ok(GpSolution {
        objective: gp_objective(&terms, &g),
        g,
        sweeps,
        history,
        pinned,
    })
}

/// Minimizes `Σ log(α + a eˢ) + log(β + b e⁻ˢ)` over `s`. The derivative
/// `Σ a eˢ/(α + a eˢ) − b e⁻ˢ/(β + b e⁻ˢ)` is nondecreasing, so its sign
/// change is bracketed and bisected.
fn line_minimize(rest: &[(f64, f64, f64, f64)], s0: f64) -> f64 {
    let deriv = |s: f64| -> f64 {
        let (es, ems) = (s.exp(), (-s).exp());
        rest.iter()
            .map(|&(alpha, a, beta, b)| {
                let up = if a > 0.0 { a * es / (alpha + a * es) } else { 0.0 };
                let down = if b > 0.0 { b * ems / (beta + b * ems) } else { 0.0 };
                up - down
            })
            .sum()
    };
    let (mut lo, mut hi) = (-LOG_RANGE, LOG_RANGE);
    if deriv(lo) >= 0.0 {
        return lo;
    }
    if deriv(hi) <= 0.0 {
        return hi;
    }
    if s0 > lo && s0 < hi {
        if deriv(s0) > 0.0 {
            hi = s0;
        } else {
            lo = s0;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-13 * (1.0 + mid.abs()) {
            break;
        }
        if deriv(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}
