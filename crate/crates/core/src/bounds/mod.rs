//! The certificate pipeline: `X̄`, `C_r`/`C_ω`, decay bounds, the weighting
//! program, `Δ⁽¹⁾`/`Δ⁽²⁾` and their assembly into `Δ_z`, `Δ_u`.

mod certificate;
mod decay;
mod delta;
mod gp;
mod inputs;
mod xbar;

pub use certificate::{
    assemble_certificate, BoundCertificate, CertificateInputs, Provenance, CERTIFICATE_SCHEMA_VERSION,
};
pub use decay::{
    decay_eigen, decay_lyapunov, eta_from_error, eta_from_state_cap, DecayBound, DecayMethod, EigenDecay,
    WeightChoice, DECAY_CHECK_STEPS,
};
pub use delta::{delta1, delta2, Delta2Problem, Delta2Value, DELTA2_INDEX_RANGES};
pub use gp::{gp_log_objective, gp_objective, optimize_g_geometric, GpOptions, GpSolution, GpTerm};
pub use inputs::{compute_cr_cw, max_weighted_image, InputBounds};
pub use xbar::compute_xbar;
