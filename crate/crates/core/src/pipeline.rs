//! Configuration and end-to-end orchestration: reduction, gains, error
//! bounds, terminal ingredients and the tightened OCP.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bounds::{
    assemble_certificate, compute_cr_cw, compute_xbar, decay_eigen, decay_lyapunov, eta_from_error,
    eta_from_state_cap, BoundCertificate, CertificateInputs, DecayBound, DecayMethod, GpOptions, GpSolution,
    InputBounds, WeightChoice,
};
use crate::config::Tolerances;
use crate::errorsys::ErrorSystem;
use crate::geometry::{BoxSet, Polytope};
use crate::model::{
    check_ctrb_obsv, impulse_response, project, reduce, synthesize_gains, CtrbObsvReport, FullOrderModel, GainSet,
    GainWeights, ReducedOrderModel, ReductionResult,
};
use crate::numerics::linalg::{solve, spectral_norm, spectral_radius, vconcat, vstack};
use crate::rompc::{terminal_set_synthesis, OcpSpec, TerminalSet};
use crate::sim::{ClosedLoop, DisturbancePolicy, InitialState, SimConfig};
use crate::systems::{BoxRadii, ConstraintSets, GeneratorSpec};
use crate::{Error, Result};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;
/// Markov parameters compared in the reduction report.
pub const IMPULSE_STEPS: usize = 50;
pub const MAX_TAU: usize = 10_000;
pub const MAX_HORIZON: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SetSpec {
    /// `‖x‖∞ ≤ radius`
    Box { radius: f64 },
    Bounds { lower: Vec<f64>, upper: Vec<f64> },
    Polytope {
        #[serde(with = "crate::serde_util::matrix")]
        h: DMatrix<f64>,
        #[serde(with = "crate::serde_util::vector")]
        b: DVector<f64>,
    },
}

impl SetSpec {
    pub fn build(&self, dim: usize) -> Result<Polytope> {
        let p = match self {
            Self::Box { radius } => BoxSet::symmetric(dim, *radius)?.to_polytope(),
            Self::Bounds { lower, upper } => {
                BoxSet::new(DVector::from_column_slice(lower), DVector::from_column_slice(upper))?.to_polytope()
            }
            Self::Polytope { h, b } => Polytope::new(h.clone(), b.clone())?,
        };
        if p.dim() != dim {
            return Err(Error::dim(format!("set of dimension {} where {dim} is needed", p.dim())));
        }
        Ok(p)
    }
}

/// Replaces the generator's default boxes where given.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SetOverrides {
    pub z: Option<SetSpec>,
    pub u: Option<SetSpec>,
    pub w: Option<SetSpec>,
    pub v: Option<SetSpec>,
}

impl SetOverrides {
    pub fn apply(&self, radii: &BoxRadii, fom: &FullOrderModel) -> Result<ConstraintSets> {
        let mut sets = radii.sets(fom)?;
        for (spec, slot, dim) in [
            (&self.z, &mut sets.z, fom.o()),
            (&self.u, &mut sets.u, fom.m()),
            (&self.w, &mut sets.w, fom.mw()),
            (&self.v, &mut sets.v, fom.p()),
        ] {
            if let Some(s) = spec {
                *slot = s.build(dim)?;
            }
        }
        sets.check_dims(fom)?;
        Ok(sets)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisSettings {
    /// Reduced order `n`.
    pub order: usize,
    /// Reduce an unstable plant through a stable/unstable split.
    pub allow_unstable: bool,
    pub tau: usize,
    /// Bound on `‖ε_k̲‖_G`; derived from the simulation's initial state when
    /// absent.
    pub eta_start: Option<f64>,
    /// Horizon of the `X̄` programs; `2n` when absent.
    pub i_bar: Option<usize>,
    pub method: DecayMethod,
    /// Contraction target of the Lyapunov method; `(1 + ρ(A_ε))/2` when
    /// absent.
    pub lyapunov_eta: Option<f64>,
    /// Eigen method only: diagonal `G` from the geometric program.
    pub optimize_g: bool,
    pub gp: GpOptions,
    pub horizon: usize,
    /// `Q^f = q_weight·I`, `Q = VᵀQ^fV`, `R = r_weight·I`.
    pub q_weight: f64,
    pub r_weight: f64,
    /// Estimator design weights `q·I`, `r·I` on the dual problem.
    pub estimator_q: f64,
    pub estimator_r: f64,
}

impl Default for SynthesisSettings {
    fn default() -> Self {
        Self {
            order: 4,
            allow_unstable: false,
            tau: 50,
            eta_start: None,
            i_bar: None,
            method: DecayMethod::Lyapunov,
            lyapunov_eta: None,
            optimize_g: false,
            gp: GpOptions::default(),
            horizon: 20,
            q_weight: 1.0,
            r_weight: 1.0,
            estimator_q: 1.0,
            estimator_r: 1.0,
        }
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

impl SynthesisSettings {
    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::invalid("reduced order must be at least 1"));
        }
        if self.tau == 0 || self.tau > MAX_TAU {
            return Err(Error::invalid(format!("τ = {} outside 1..={MAX_TAU}", self.tau)));
        }
        if self.horizon == 0 || self.horizon > MAX_HORIZON {
            return Err(Error::invalid(format!("horizon {} outside 1..={MAX_HORIZON}", self.horizon)));
        }
        if let Some(ib) = self.i_bar {
            if ib + 1 < self.order {
                return Err(Error::invalid(format!("ī = {ib} is below n − 1 = {}", self.order - 1)));
            }
        }
        if let Some(e) = self.eta_start {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(Error::invalid(format!("η_k̲ must be nonnegative and finite, got {e}")));
            }
        }
        if let Some(e) = self.lyapunov_eta {
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::invalid(format!("Lyapunov η = {e} outside (0, 1)")));
            }
        }
        if self.optimize_g && self.method != DecayMethod::Eigen {
            return Err(Error::invalid("optimize_g needs the eigen decay method"));
        }
        for (n, v) in [
            ("q_weight", self.q_weight),
            ("r_weight", self.r_weight),
            ("estimator_q", self.estimator_q),
            ("estimator_r", self.estimator_r),
        ] {
            check_positive(n, v)?;
        }
        Ok(())
    }

    pub fn weights(&self, rom: &ReducedOrderModel) -> GainWeights {
        let (n, m, p) = (rom.n(), rom.m(), rom.p());
        GainWeights {
            q: crate::numerics::linalg::symmetrize(&(rom.v.transpose() * &rom.v * self.q_weight)),
            r: DMatrix::identity(m, m) * self.r_weight,
            q_est: DMatrix::identity(n, n) * self.estimator_q,
            r_est: DMatrix::identity(p, p) * self.estimator_r,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RomArtifact {
    pub reduction: ReductionResult,
    pub rom: ReducedOrderModel,
    pub ctrb_obsv: CtrbObsvReport,
    /// Largest entry of `[C; H]AᵏB` mismatch over the first
    /// `IMPULSE_STEPS` Markov parameters.
    pub impulse_error: f64,
}

pub fn reduce_stage(fom: &FullOrderModel, s: &SynthesisSettings, tol: &Tolerances) -> Result<RomArtifact> {
    if s.order > fom.n() {
        return Err(Error::invalid(format!("reduced order {} exceeds n^f = {}", s.order, fom.n())));
    }
    let rho = spectral_radius(&fom.a)?;
    if rho >= 1.0 && !s.allow_unstable {
        return Err(Error::Assumption(format!(
            "A^f has spectral radius {rho:.6} ≥ 1; set allow_unstable to reduce through a stable/unstable split"
        )));
    }
    let reduction = reduce(fom, s.order, tol)?;
    let rom = project(fom, &reduction.v, &reduction.w)?;
    let ctrb_obsv = check_ctrb_obsv(&rom.a, &rom.b, &rom.c, &rom.h, tol);
    let outs_f = vstack(&[&fom.c, &fom.h]);
    let outs_r = vstack(&[&rom.c, &rom.h]);
    let full = impulse_response(&fom.a, &fom.b, &outs_f, IMPULSE_STEPS);
    let red = impulse_response(&rom.a, &rom.b, &outs_r, IMPULSE_STEPS);
    let impulse_error = full.iter().zip(&red).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
    Ok(RomArtifact {
        reduction,
        rom,
        ctrb_obsv,
        impulse_error,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertArtifact {
    pub weights: GainWeights,
    pub gains: GainSet,
    pub esys: ErrorSystem,
    pub xbar: BoxSet,
    pub input_bounds: InputBounds,
    pub decay: DecayBound,
    pub gp: Option<GpSolution>,
    pub cert: BoundCertificate,
}

/// Where the controller starts: the initial plant state distribution and
/// whether `x̂₀ = x̄₀` is the projected state or zero.
#[derive(Debug, Clone, Copy)]
pub struct StartInfo<'a> {
    pub initial: &'a InitialState,
    pub project: bool,
}

/// `‖ε₀‖_G` for a fixed start; `‖G^{1/2}‖₂` times a bound on `‖ε₀‖₂` over
/// an initial box.
pub fn eta_for_start(
    rom: &ReducedOrderModel,
    g: &crate::errorsys::WeightedNorm,
    start: StartInfo<'_>,
) -> Result<f64> {
    let nf = rom.v.nrows();
    let wtv = rom.w.transpose() * &rom.v;
    match start.initial {
        InitialState::Fixed { x } => {
            let x = DVector::from_column_slice(x);
            if x.len() != nf {
                return Err(Error::dim(format!("initial state of length {} for n^f = {nf}", x.len())));
            }
            let e0 = if start.project {
                let rhs = DMatrix::from_column_slice(nf, 1, x.as_slice());
                let xb = solve(&wtv, &(rom.w.transpose() * rhs), "WᵀV")?;
                &x - &rom.v * xb.column(0)
            } else {
                x
            };
            Ok(eta_from_error(g, &vconcat(&[&e0, &DVector::zeros(rom.n())])))
        }
        InitialState::Uniform { lower, upper } => {
            if lower.len() != nf || upper.len() != nf {
                return Err(Error::dim("initial box does not match n^f"));
            }
            let r = DVector::from_fn(nf, |i, _| lower[i].abs().max(upper[i].abs())).norm();
            let gain = if start.project {
                let p = &rom.v * solve(&wtv, &rom.w.transpose(), "WᵀV")?;
                spectral_norm(&(DMatrix::identity(nf, nf) - p))
            } else {
                1.0
            };
            Ok(eta_from_state_cap(g, gain * r))
        }
    }
}

pub fn certify_stage(
    fom: &FullOrderModel,
    rom: &ReducedOrderModel,
    sets: &ConstraintSets,
    s: &SynthesisSettings,
    start: Option<StartInfo<'_>>,
    tol: &Tolerances,
) -> Result<CertArtifact> {
    sets.check_dims(fom)?;
    let report = check_ctrb_obsv(&rom.a, &rom.b, &rom.c, &rom.h, tol);
    if !report.all_hold() {
        return Err(Error::Assumption(format!(
            "reduced model fails the rank test: (A,B) {}, (A,C) {}, (A,H) {} of {}",
            report.rank_ab, report.rank_ac, report.rank_ah, report.n
        )));
    }
    let weights = s.weights(rom);
    let gains = synthesize_gains(rom, &weights, tol)?;
    let esys = ErrorSystem::assemble(fom, rom, &gains)?;
    let rho = esys.require_stable(0.0)?;
    let i_bar = s.i_bar.unwrap_or(2 * rom.n());
    let xbar = compute_xbar(rom, &sets.z, &sets.u, i_bar, tol)?;
    let (decay, gp) = match s.method {
        DecayMethod::Lyapunov => (decay_lyapunov(&esys, s.lyapunov_eta.unwrap_or(0.5 * (1.0 + rho)), tol)?, None),
        DecayMethod::Eigen => {
            let choice = if s.optimize_g {
                let (e_z, e_u) = esys.output_maps(fom, &gains, &sets.z.h, &sets.u.h);
                WeightChoice::Geometric {
                    e_z,
                    e_u,
                    options: s.gp,
                }
            } else {
                WeightChoice::Identity
            };
            let ed = decay_eigen(&esys, &choice, tol)?;
            (ed.bound, ed.gp)
        }
    };
    let eta_start = match (s.eta_start, start) {
        (Some(e), _) => e,
        (None, Some(st)) => eta_for_start(rom, &decay.g, st)?,
        (None, None) => {
            return Err(Error::invalid("η_k̲ is not given and there is no initial state to derive it from"));
        }
    };
    let input_bounds = compute_cr_cw(&esys, &xbar, &sets.u, &sets.w, &sets.v, &decay.g, tol)?;
    let cert = assemble_certificate(
        &CertificateInputs {
            fom,
            rom,
            gains: &gains,
            esys: &esys,
            z: &sets.z,
            u: &sets.u,
            w: &sets.w,
            v: &sets.v,
            xbar: &xbar,
            input_bounds: &input_bounds,
            decay: &decay,
            tau: s.tau,
            eta_start,
            i_bar,
        },
        tol,
    )?;
    Ok(CertArtifact {
        weights,
        gains,
        esys,
        xbar,
        input_bounds,
        decay,
        gp,
        cert,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControllerArtifact {
    pub terminal: TerminalSet,
    pub ocp: OcpSpec,
}

/// Terminal ingredients and the OCP over the tightened sets.
pub fn controller_stage(
    rom: &ReducedOrderModel,
    weights: &GainWeights,
    z_bar: &Polytope,
    u_bar: &Polytope,
    horizon: usize,
    tol: &Tolerances,
) -> Result<ControllerArtifact> {
    let terminal = terminal_set_synthesis(rom, &weights.q, &weights.r, z_bar, u_bar, tol)?;
    let ocp = OcpSpec::new(
        rom,
        weights.q.clone(),
        weights.r.clone(),
        terminal.p_term.clone(),
        horizon,
        z_bar.clone(),
        u_bar.clone(),
        terminal.set.clone(),
    )?;
    Ok(ControllerArtifact { terminal, ocp })
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub fom: FullOrderModel,
    pub sets: ConstraintSets,
    pub reduced: RomArtifact,
    pub certified: CertArtifact,
    pub controller: ControllerArtifact,
}

impl Synthesis {
    pub fn closed_loop(&self) -> ClosedLoop<'_> {
        ClosedLoop {
            fom: &self.fom,
            rom: &self.reduced.rom,
            gains: &self.certified.gains,
            ocp: &self.controller.ocp,
            cert: &self.certified.cert,
            z: &self.sets.z,
            u: &self.sets.u,
            w: &self.sets.w,
            v: &self.sets.v,
        }
    }
}

pub fn synthesize(
    fom: FullOrderModel,
    sets: ConstraintSets,
    s: &SynthesisSettings,
    start: Option<StartInfo<'_>>,
    tol: &Tolerances,
) -> Result<Synthesis> {
    s.validate()?;
    let reduced = reduce_stage(&fom, s, tol)?;
    let certified = certify_stage(&fom, &reduced.rom, &sets, s, start, tol)?;
    let controller = controller_stage(
        &reduced.rom,
        &certified.weights,
        &certified.cert.z_tightened,
        &certified.cert.u_tightened,
        s.horizon,
        tol,
    )?;
    Ok(Synthesis {
        fom,
        sets,
        reduced,
        certified,
        controller,
    })
}

fn default_runs() -> usize {
    200
}

fn default_logged_runs() -> usize {
    20
}

fn default_version() -> u32 {
    CONFIG_SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default = "default_version")]
    pub schema_version: u32,
    pub system: GeneratorSpec,
    #[serde(default)]
    pub sets: SetOverrides,
    #[serde(default)]
    pub synthesis: SynthesisSettings,
    pub sim: SimConfig,
    /// Monte-Carlo runs for the simulate step.
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// Runs whose full trajectory is written as CSV (the first ones by seed).
    #[serde(default = "default_logged_runs")]
    pub logged_runs: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        if cfg.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "config schema version {} (expected {CONFIG_SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    /// Makes relative model paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let GeneratorSpec::File(f) = &mut self.system {
            f.paths = f.paths.resolve(base);
        }
    }

    /// Range and existence checks done before any computation.
    pub fn validate(&self) -> Result<()> {
        self.synthesis.validate()?;
        if let GeneratorSpec::File(f) = &self.system {
            for p in [&f.paths.a, &f.paths.b, &f.paths.bw, &f.paths.c, &f.paths.h] {
                if !p.is_file() {
                    return Err(Error::invalid(format!("model file {} does not exist", p.display())));
                }
            }
        }
        if self.runs == 0 || self.runs > 100_000 {
            return Err(Error::invalid(format!("runs = {} outside 1..=100000", self.runs)));
        }
        if self.sim.k0 < 2 * self.synthesis.tau {
            return Err(Error::invalid(format!(
                "k₀ = {} is below 2τ = {}",
                self.sim.k0,
                2 * self.synthesis.tau
            )));
        }
        if self.sim.steps < self.sim.k0 {
            return Err(Error::invalid(format!("steps = {} is below k₀ = {}", self.sim.steps, self.sim.k0)));
        }
        if let DisturbancePolicy::Fixed { w, v } = &self.sim.policy {
            if w.len() <= self.sim.steps || v.len() <= self.sim.steps {
                return Err(Error::invalid("fixed disturbance sequences are shorter than steps + 1"));
            }
        }
        Ok(())
    }

    pub fn start(&self) -> StartInfo<'_> {
        StartInfo {
            initial: &self.sim.initial,
            project: self.sim.project_initial,
        }
    }
}

impl SimConfig {
    /// `k₀ = 2τ`, `steps = k₀ + 100`, vertex-extreme disturbances, start at
    /// the origin.
    pub fn standard(nf: usize, tau: usize) -> Self {
        Self {
            steps: 2 * tau + 100,
            policy: DisturbancePolicy::VertexExtreme,
            seed: 0,
            initial: InitialState::Fixed { x: vec![0.0; nf] },
            k0: 2 * tau,
            project_initial: false,
        }
    }
}

pub const PRESETS: [&str; 3] = ["mass-spring", "heat", "surrogate"];

/// Tuned benchmark configurations: a damped 10-mass chain (20 states, n = 4),
/// a 15×15 heat plate (225 states, n = 10) and the 6-state surrogate with
/// `N = 20`, `Q^f = 10I`, `R^f = I`. All use τ = 100, k₀ = 200, 300 steps,
/// vertex-extreme disturbances from rest.
pub fn preset(name: &str) -> Option<PipelineConfig> {
    use crate::systems::{HeatSpec, MassSpringSpec, SurrogateSpec};
    let (system, nf, synthesis) = match name {
        "mass-spring" => (
            GeneratorSpec::MassSpringChain(MassSpringSpec::default()),
            20,
            SynthesisSettings { order: 4, tau: 100, ..Default::default() },
        ),
        "heat" => (
            GeneratorSpec::Heat2dFd(HeatSpec::default()),
            225,
            SynthesisSettings { order: 10, tau: 100, ..Default::default() },
        ),
        "surrogate" => (
            GeneratorSpec::Surrogate(SurrogateSpec::default()),
            6,
            SynthesisSettings { order: 4, tau: 100, horizon: 20, q_weight: 10.0, ..Default::default() },
        ),
        _ => return None,
    };
    Some(PipelineConfig {
        schema_version: CONFIG_SCHEMA_VERSION,
        system,
        sets: SetOverrides::default(),
        sim: SimConfig::standard(nf, synthesis.tau),
        synthesis,
        runs: default_runs(),
        logged_runs: default_logged_runs(),
        tolerances: Tolerances::default(),
        output_dir: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::random_fom;
    use crate::systems::{generate, RandomStableSpec};

    #[test]
    fn set_specs_build_and_check_dimension() {
        let b = SetSpec::Box { radius: 2.0 }.build(3).unwrap();
        assert!(b.contains(&DVector::from_element(3, 2.0), 0.0).unwrap());
        assert!(!b.contains(&DVector::from_element(3, 2.1), 0.0).unwrap());
        let bounds = SetSpec::Bounds { lower: vec![-1.0, 0.0], upper: vec![1.0, 3.0] };
        assert!(bounds.build(2).is_ok());
        assert!(matches!(bounds.build(3), Err(Error::Dimension(_))));
        let js = r#"{"kind":"polytope","h":{"rows":2,"cols":1,"data":[1.0,-1.0]},"b":[1.0,2.0]}"#;
        let p: SetSpec = serde_json::from_str(js).unwrap();
        let p = p.build(1).unwrap();
        assert!(p.contains(&DVector::from_element(1, -2.0), 0.0).unwrap());
    }

    #[test]
    fn settings_ranges() {
        let ok = SynthesisSettings::default();
        assert!(ok.validate().is_ok());
        let bad = [
            SynthesisSettings { order: 0, ..ok.clone() },
            SynthesisSettings { tau: 0, ..ok.clone() },
            SynthesisSettings { horizon: 0, ..ok.clone() },
            SynthesisSettings { i_bar: Some(1), ..ok.clone() },
            SynthesisSettings { eta_start: Some(-1.0), ..ok.clone() },
            SynthesisSettings { lyapunov_eta: Some(1.0), ..ok.clone() },
            SynthesisSettings { optimize_g: true, ..ok.clone() },
            SynthesisSettings { r_weight: 0.0, ..ok.clone() },
        ];
        for s in bad {
            assert!(matches!(s.validate(), Err(Error::InvalidArgument(_))), "{s:?}");
        }
    }

    #[test]
    fn unstable_plant_needs_opt_in() {
        let mut fom = random_fom(5, 1, 1, 1, 3);
        fom.a[(0, 0)] += 2.0;
        let s = SynthesisSettings { order: 3, ..Default::default() };
        let err = reduce_stage(&fom, &s, &Tolerances::default()).unwrap_err();
        assert!(matches!(err, Error::Assumption(_)), "{err}");
        let big = SynthesisSettings { order: 6, ..Default::default() };
        assert!(reduce_stage(&random_fom(5, 1, 1, 1, 3), &big, &Tolerances::default()).is_err());
    }

    #[test]
    fn full_order_reduction_is_exact() {
        let tol = Tolerances::default();
        let g = generate(
            &GeneratorSpec::RandomStable(RandomStableSpec { n: 4, m: 1, p: 1, o: 1, mw: 1, seed: 5, radius: 0.8 }),
            &tol,
        )
        .unwrap();
        let s = SynthesisSettings { order: 4, ..Default::default() };
        let r = reduce_stage(&g.fom, &s, &tol).unwrap();
        assert!(r.impulse_error < 1e-9, "{}", r.impulse_error);
        assert!(r.ctrb_obsv.all_hold());
    }

    #[test]
    fn eta_for_a_projected_start_on_the_subspace_is_zero() {
        let tol = Tolerances::default();
        let g = generate(
            &GeneratorSpec::RandomStable(RandomStableSpec { n: 6, m: 1, p: 1, o: 1, mw: 1, seed: 2, radius: 0.8 }),
            &tol,
        )
        .unwrap();
        let r = reduce_stage(&g.fom, &SynthesisSettings { order: 3, ..Default::default() }, &tol).unwrap();
        let gn = crate::errorsys::WeightedNorm::identity(9);
        let x = &r.rom.v * DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let init = InitialState::Fixed { x: x.as_slice().to_vec() };
        let on = eta_for_start(&r.rom, &gn, StartInfo { initial: &init, project: true }).unwrap();
        assert!(on < 1e-12);
        let off = eta_for_start(&r.rom, &gn, StartInfo { initial: &init, project: false }).unwrap();
        assert!((off - x.norm()).abs() < 1e-12);
        let bx = InitialState::Uniform { lower: vec![-1.0; 6], upper: vec![1.0; 6] };
        let cap = eta_for_start(&r.rom, &gn, StartInfo { initial: &bx, project: false }).unwrap();
        assert!((cap - 6f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn config_round_trip_and_version_check() {
        let js = r#"{
            "system": {"family": "surrogate"},
            "synthesis": {"tau": 100, "horizon": 20},
            "sim": {"steps": 300, "policy": {"kind": "vertex-extreme"}, "seed": 1,
                    "initial": {"kind": "fixed", "x": [0,0,0,0,0,0]}, "k0": 200}
        }"#;
        let cfg = PipelineConfig::from_json(js).unwrap();
        assert_eq!(cfg.schema_version, CONFIG_SCHEMA_VERSION);
        assert_eq!(cfg.runs, 200);
        cfg.validate().unwrap();
        let back = PipelineConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        let v2 = js.replacen('{', r#"{"schema_version": 2,"#, 1);
        assert!(PipelineConfig::from_json(&v2).is_err());
        let early = PipelineConfig { sim: SimConfig { k0: 100, ..cfg.sim.clone() }, ..cfg };
        assert!(early.validate().is_err());
    }

    #[test]
    fn presets_are_valid_and_sized() {
        let tol = Tolerances::default();
        for name in PRESETS {
            let cfg = preset(name).unwrap();
            cfg.validate().unwrap();
            let g = crate::systems::generate(&cfg.system, &tol).unwrap();
            assert!(cfg.sim.validate(g.fom.n(), cfg.synthesis.tau).is_ok(), "{name}");
        }
        assert!(preset("nope").is_none());
    }
}
