//! Assembly of the constraint tightening `Δ_z`, `Δ_u` into a certificate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::decay::{DecayBound, DECAY_CHECK_STEPS};
use super::delta::{delta1, Delta2Problem, Delta2Value, DELTA2_INDEX_RANGES};
use super::inputs::InputBounds;
use crate::config::Tolerances;
use crate::errorsys::ErrorSystem;
use crate::geometry::{BoxSet, Polytope};
use crate::model::{FullOrderModel, GainSet, ReducedOrderModel};
use crate::numerics::SolverStats;
use crate::{par_map, Error, Result};

pub const CERTIFICATE_SCHEMA_VERSION: u32 = 1;

/// Everything the certificate depends on. `z` lives in the output space
/// `z = H^f x` and `u` in the input space; their rows define `E_z`, `E_u`.
#[derive(Debug, Clone, Copy)]
pub struct CertificateInputs<'a> {
    pub fom: &'a FullOrderModel,
    pub rom: &'a ReducedOrderModel,
    pub gains: &'a GainSet,
    pub esys: &'a ErrorSystem,
    pub z: &'a Polytope,
    pub u: &'a Polytope,
    pub w: &'a Polytope,
    pub v: &'a Polytope,
    pub xbar: &'a BoxSet,
    pub input_bounds: &'a InputBounds,
    pub decay: &'a DecayBound,
    pub tau: usize,
    pub eta_start: f64,
    pub i_bar: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub tau: usize,
    pub eta_start: f64,
    pub i_bar: usize,
    pub tolerances: Tolerances,
    pub delta2_index_ranges: String,
    pub decay_check_steps: usize,
    /// Largest `‖A_εⁱ‖_G / (Mγⁱ)` over the checked powers.
    pub decay_check_ratio: f64,
    pub solver: SolverStats,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub schema_version: u32,
    pub xbar: BoxSet,
    pub c_r: f64,
    pub c_omega: f64,
    pub c_r_conservative: bool,
    pub c_omega_conservative: bool,
    pub decay: DecayBound,
    pub tau: usize,
    pub eta_start: f64,
    pub delta1: f64,
    pub delta_z: Vec<f64>,
    pub delta_u: Vec<f64>,
    pub delta2_z: Vec<Delta2Value>,
    pub delta2_u: Vec<Delta2Value>,
    #[serde(with = "crate::serde_util::matrix")]
    pub e_z: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub e_u: DMatrix<f64>,
    /// `{z | H_z z ≤ b_z − Δ_z}` and `{u | H_u u ≤ b_u − Δ_u}`.
    pub z_tightened: Polytope,
    pub u_tightened: Polytope,
    pub provenance: Provenance,
}

impl BoundCertificate {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cert: Self = serde_json::from_str(s)?;
        if cert.schema_version != CERTIFICATE_SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "certificate schema version {} (expected {CERTIFICATE_SCHEMA_VERSION})",
                cert.schema_version
            )));
        }
        Ok(cert)
    }

    /// Upper bound on `E ε` for one row: `‖G^{−1/2}θ‖ Δ⁽¹⁾ + Δ⁽²⁾(θ)`.
    pub fn delta_for(&self, theta: &DVector<f64>, delta2: f64) -> f64 {
        self.decay.g.dual_norm(theta) * self.delta1 + delta2
    }
}

/// `Δ_{z,i} = ‖G^{−1/2}e_{z,i}‖ Δ⁽¹⁾ + Δ⁽²⁾(e_{z,i})`, likewise for `u`.
/// One `Δ⁽²⁾` LP per row of `E_z` and `E_u`. Rejected when a tightened
/// set is empty.
pub fn assemble_certificate(inp: &CertificateInputs<'_>, tol: &Tolerances) -> Result<BoundCertificate> {
    let es = inp.esys;
    if inp.tau == 0 {
        return Err(Error::invalid("τ must be at least 1"));
    }
    let ratio = inp.decay.validate(&es.a_eps, DECAY_CHECK_STEPS, tol)?;
    let d1 = delta1(
        inp.decay.m,
        inp.decay.gamma,
        inp.input_bounds.c_r,
        inp.input_bounds.c_omega,
        inp.tau,
        inp.eta_start,
    )?;
    let (e_z, e_u) = es.output_maps(inp.fom, inp.gains, &inp.z.h, &inp.u.h);
    let problem = Delta2Problem::new(inp.rom, &inp.gains.k, inp.xbar, inp.u, inp.z, inp.w, inp.v, inp.tau)?;

    let rows: Vec<DVector<f64>> = (0..e_z.nrows())
        .map(|i| e_z.row(i).transpose())
        .chain((0..e_u.nrows()).map(|i| e_u.row(i).transpose()))
        .collect();
    let solved = par_map(&rows, |theta| problem.solve(es, theta, tol));
    let mut d2 = Vec::with_capacity(rows.len());
    let mut stats = SolverStats::default();
    for s in solved {
        let s = s?;
        if s.lp_solved {
            stats.record_lp(&s.residuals);
        }
        d2.push(s);
    }
    let deltas: Vec<f64> = rows
        .iter()
        .zip(&d2)
        .map(|(theta, v)| inp.decay.g.dual_norm(theta) * d1 + v.value)
        .collect();
    let nz = e_z.nrows();
    let delta_z = deltas[..nz].to_vec();
    let delta_u = deltas[nz..].to_vec();
    if deltas.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite tightening".into()));
    }

    let z_tightened = inp.z.tighten(&DVector::from_vec(delta_z.clone()))?;
    let u_tightened = inp.u.tighten(&DVector::from_vec(delta_u.clone()))?;
    for (name, set, orig, d) in [
        ("𝒵", &z_tightened, inp.z, &delta_z),
        ("𝒰", &u_tightened, inp.u, &delta_u),
    ] {
        if set.is_empty(tol)? {
            return Err(Error::Rejected(format!(
                "tightened {name} is empty; per-row slack b − Δ: {}",
                slack_report(&orig.b, d)
            )));
        }
    }

    Ok(BoundCertificate {
        schema_version: CERTIFICATE_SCHEMA_VERSION,
        xbar: inp.xbar.clone(),
        c_r: inp.input_bounds.c_r,
        c_omega: inp.input_bounds.c_omega,
        c_r_conservative: inp.input_bounds.c_r_conservative,
        c_omega_conservative: inp.input_bounds.c_omega_conservative,
        decay: inp.decay.clone(),
        tau: inp.tau,
        eta_start: inp.eta_start,
        delta1: d1,
        delta_z,
        delta_u,
        delta2_z: d2[..nz].to_vec(),
        delta2_u: d2[nz..].to_vec(),
        e_z,
        e_u,
        z_tightened,
        u_tightened,
        provenance: Provenance {
            tau: inp.tau,
            eta_start: inp.eta_start,
            i_bar: inp.i_bar,
            tolerances: *tol,
            delta2_index_ranges: DELTA2_INDEX_RANGES.to_string(),
            decay_check_steps: DECAY_CHECK_STEPS,
            decay_check_ratio: ratio,
            solver: stats,
        },
    })
}

fn slack_report(b: &DVector<f64>, d: &[f64]) -> String {
    b.iter()
        .zip(d)
        .enumerate()
        .map(|(i, (b, d))| format!("row {i}: {b:.6e} − {d:.6e} = {:.6e}", b - d))
        .collect::<Vec<_>>()
        .join("; ")
}
