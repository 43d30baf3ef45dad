//! Markdown rendering of the pipeline artifacts.

use std::collections::BTreeMap;
use std::fmt::Write;

use rompc::bounds::{BoundCertificate, Delta2Value};
use rompc::geometry::Polytope;
use rompc::pipeline::{PipelineConfig, RomArtifact};

use crate::artifacts::{AuditFile, SynthesisFile};

fn e(v: f64) -> String {
    format!("{v:.6e}")
}

fn delta_rows(out: &mut String, name: &str, set: &Polytope, delta: &[f64], d2: &[Delta2Value], cert: &BoundCertificate) {
    let e_rows = if name == "z" { &cert.e_z } else { &cert.e_u };
    for (i, (&d, v)) in delta.iter().zip(d2).enumerate() {
        let scale = (cert.decay.g.g_half_inv.transpose() * e_rows.row(i).transpose()).norm();
        let b = set.b[i];
        let _ = writeln!(
            out,
            "| {name}{i} | {} | {} | {} | {} | {} | {} |",
            e(b),
            e(d),
            e(scale * cert.delta1),
            e(v.reference),
            e(v.disturbance),
            e(b - d)
        );
    }
}

/// `Δ` per constraint row with its parts, and the tightened right-hand side.
pub fn delta_table(cert: &BoundCertificate, z: &Polytope, u: &Polytope) -> String {
    let mut out = String::new();
    out.push_str("| row | b | Δ | Δ⁽¹⁾ part | Δ⁽²⁾ reference | Δ⁽²⁾ disturbance | b − Δ |\n");
    out.push_str("|---|---|---|---|---|---|---|\n");
    delta_rows(&mut out, "z", z, &cert.delta_z, &cert.delta2_z, cert);
    delta_rows(&mut out, "u", u, &cert.delta_u, &cert.delta2_u, cert);
    out
}

fn flag(b: bool) -> &'static str {
    if b {
        "CONSERVATIVE"
    } else {
        "exact"
    }
}

pub fn render(
    cfg: &PipelineConfig,
    rom: &RomArtifact,
    syn: &SynthesisFile,
    z: &Polytope,
    u: &Polytope,
    audit: Option<&AuditFile>,
    timings: &BTreeMap<String, f64>,
) -> String {
    let cert = &syn.certified.cert;
    let r = &rom.rom;
    let mut s = String::new();
    let _ = writeln!(s, "# Reduced-order MPC report\n");

    let _ = writeln!(s, "## Dimensions\n");
    let _ = writeln!(s, "| n^f | n | m | p | o | unstable modes kept |");
    let _ = writeln!(s, "|---|---|---|---|---|---|");
    let _ = writeln!(
        s,
        "| {} | {} | {} | {} | {} | {} |\n",
        r.v.nrows(),
        r.n(),
        r.m(),
        r.p(),
        r.o(),
        rom.reduction.n_unstable
    );

    let _ = writeln!(s, "## Reduction\n");
    let hsv: Vec<String> = rom.reduction.hankel.iter().take(12).map(|v| format!("{v:.4e}")).collect();
    let _ = writeln!(s, "- Hankel values (leading): {}", hsv.join(", "));
    let _ = writeln!(s, "- impulse mismatch over {} steps: {}", rompc::pipeline::IMPULSE_STEPS, e(rom.impulse_error));
    let c = &rom.ctrb_obsv;
    let _ = writeln!(
        s,
        "- rank (A,B) {}, (A,C) {}, (A,H) {} of {}\n",
        c.rank_ab, c.rank_ac, c.rank_ah, c.n
    );

    let _ = writeln!(s, "## Certificate fields\n");
    let d = &cert.decay;
    let _ = writeln!(s, "| field | value |");
    let _ = writeln!(s, "|---|---|");
    let rows: Vec<(&str, String)> = vec![
        ("schema_version", cert.schema_version.to_string()),
        ("decay.method", format!("{:?}", d.method).to_lowercase()),
        ("decay.m", e(d.m)),
        ("decay.gamma", e(d.gamma)),
        ("decay.g", format!("{}x{} weight", d.g.g.nrows(), d.g.g.ncols())),
        ("c_r", e(cert.c_r)),
        ("c_r_conservative", flag(cert.c_r_conservative).into()),
        ("c_omega", e(cert.c_omega)),
        ("c_omega_conservative", flag(cert.c_omega_conservative).into()),
        ("tau", cert.tau.to_string()),
        ("eta_start", e(cert.eta_start)),
        ("delta1", e(cert.delta1)),
        ("xbar", format!("box, max half-width {}", e(cert.xbar.upper.amax().max(cert.xbar.lower.amax())))),
        ("e_z", format!("{}x{}", cert.e_z.nrows(), cert.e_z.ncols())),
        ("e_u", format!("{}x{}", cert.e_u.nrows(), cert.e_u.ncols())),
        ("delta_z", format!("{} rows, see table", cert.delta_z.len())),
        ("delta_u", format!("{} rows, see table", cert.delta_u.len())),
        ("delta2_z", format!("{} LP values", cert.delta2_z.len())),
        ("delta2_u", format!("{} LP values", cert.delta2_u.len())),
        ("z_tightened", format!("{} rows", cert.z_tightened.n_constraints())),
        ("u_tightened", format!("{} rows", cert.u_tightened.n_constraints())),
        ("provenance.i_bar", cert.provenance.i_bar.to_string()),
        ("provenance.decay_check_steps", cert.provenance.decay_check_steps.to_string()),
        ("provenance.decay_check_ratio", e(cert.provenance.decay_check_ratio)),
        ("provenance.delta2_index_ranges", cert.provenance.delta2_index_ranges.clone()),
    ];
    for (k, v) in rows {
        let _ = writeln!(s, "| {k} | {v} |");
    }
    let st = &cert.provenance.solver;
    let _ = writeln!(
        s,
        "| provenance.solver | {} LPs (max primal {}, dual {}, compl. {}), {} QPs |\n",
        st.lp_solves,
        e(st.max_lp_primal),
        e(st.max_lp_dual),
        e(st.max_lp_complementarity),
        st.qp_solves
    );
    if cert.c_r_conservative || cert.c_omega_conservative {
        let _ = writeln!(s, "**CONSERVATIVE fallback used** for C_r or C_ω (vertex enumeration was capped).\n");
    }
    if let Some(gp) = &syn.certified.gp {
        let _ = writeln!(
            s,
            "Weight G from the geometric program: objective {} after {} sweeps, {} pinned coordinates.\n",
            e(gp.objective),
            gp.sweeps,
            gp.pinned.len()
        );
    }

    let _ = writeln!(s, "## Constraint tightening\n");
    s.push_str(&delta_table(cert, z, u));
    s.push('\n');

    let t = &syn.controller.terminal;
    let _ = writeln!(s, "## Controller\n");
    let _ = writeln!(s, "- horizon N = {}", cfg.synthesis.horizon);
    let _ = writeln!(
        s,
        "- terminal set: {} rows after {} steps, invariance residual {}\n",
        t.set.n_constraints(),
        t.iterations,
        e(t.invariance_residual)
    );

    let _ = writeln!(s, "## Closed-loop audit\n");
    match audit {
        Some(a) => {
            let m = &a.summary;
            let _ = writeln!(s, "- runs: {}, violations: {}", m.runs, m.violations);
            if !m.seeds_with_violations.is_empty() {
                let _ = writeln!(s, "- seeds with violations: {:?}", m.seeds_with_violations);
            }
            let _ = writeln!(s, "- min slack for k ≥ k₀: 𝒵 {}, 𝒰 {}, E_zε {}, E_uε {}, ‖ε‖_G {}",
                e(m.min_slack.z), e(m.min_slack.u), e(m.min_slack.ez), e(m.min_slack.eu), e(m.min_slack.norm));
            let _ = writeln!(s, "- min slack before k₀: 𝒵 {}, 𝒰 {}\n", e(m.pre_k0_min_slack_z), e(m.pre_k0_min_slack_u));
        }
        None => {
            let _ = writeln!(s, "not run\n");
        }
    }

    if !timings.is_empty() {
        let _ = writeln!(s, "## Runtimes\n");
        for (k, v) in timings {
            let _ = writeln!(s, "- {k}: {v:.2} s");
        }
    }
    s
}
