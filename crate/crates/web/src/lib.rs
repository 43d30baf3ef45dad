//! Browser bindings. Every operation takes and returns JSON text so the
//! page needs no generated types.

use rompc::pipeline::{preset, reduce_stage, synthesize, PipelineConfig};
use rompc::sim::{audit, run_closed_loop};
use rompc::systems::generate;
use rompc::Error;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Configurations that finish in a few seconds in a browser.
pub const DEMO_PRESETS: [&str; 2] = ["surrogate", "mass-spring"];

fn fail(e: Error) -> String {
    json!({ "kind": e.kind(), "message": e.to_string() }).to_string()
}

fn parse(config: &str) -> Result<PipelineConfig, String> {
    let cfg = PipelineConfig::from_json(config).map_err(fail)?;
    if matches!(cfg.system, rompc::systems::GeneratorSpec::File(_)) {
        return Err(fail(Error::InvalidArgument("file-backed systems need a filesystem".into())));
    }
    cfg.validate().map_err(fail)?;
    Ok(cfg)
}

/// A preset with its run cut to 40 steps past `k₀`.
#[wasm_bindgen(js_name = demoConfig)]
pub fn demo_config(name: &str) -> Result<String, String> {
    let mut cfg = preset(name)
        .filter(|_| DEMO_PRESETS.contains(&name))
        .ok_or_else(|| fail(Error::InvalidArgument(format!("unknown demo preset `{name}`"))))?;
    cfg.sim.steps = cfg.sim.k0 + 40;
    Ok(serde_json::to_string_pretty(&cfg).expect("config serializes"))
}

/// Reduces the plant and reports the truncation quality.
#[wasm_bindgen]
pub fn reduce(config: &str) -> Result<String, String> {
    let cfg = parse(config)?;
    let g = generate(&cfg.system, &cfg.tolerances).map_err(fail)?;
    let r = reduce_stage(&g.fom, &cfg.synthesis, &cfg.tolerances).map_err(fail)?;
    Ok(json!({
        "full_order": g.fom.n(),
        "order": r.rom.n(),
        "hankel": r.reduction.hankel,
        "unstable_modes": r.reduction.n_unstable,
        "impulse_error": r.impulse_error,
        "ranks": { "ab": r.ctrb_obsv.rank_ab, "ac": r.ctrb_obsv.rank_ac, "ah": r.ctrb_obsv.rank_ah },
    })
    .to_string())
}

fn series(rows: impl Iterator<Item = f64>) -> Value {
    Value::from(rows.collect::<Vec<f64>>())
}

/// Certifies the controller, runs one closed loop and audits it.
#[wasm_bindgen]
pub fn simulate(config: &str) -> Result<String, String> {
    let cfg = parse(config)?;
    let g = generate(&cfg.system, &cfg.tolerances).map_err(fail)?;
    let sets = cfg.sets.apply(&g.sets, &g.fom).map_err(fail)?;
    let syn = synthesize(g.fom, sets, &cfg.synthesis, Some(cfg.start()), &cfg.tolerances).map_err(fail)?;
    let cl = syn.closed_loop();
    let log = run_closed_loop(&cl, &cfg.sim, &cfg.tolerances).map_err(fail)?;
    let report = audit(&log, &syn.sets.z, &syn.sets.u, &syn.certified.cert);
    let cert = &syn.certified.cert;
    let nz = syn.sets.z.n_constraints();
    let z_rows: Vec<Value> = (0..nz)
        .map(|i| {
            let h = syn.sets.z.h.row(i);
            json!({
                "b": syn.sets.z.b[i],
                "delta": cert.delta_z[i],
                "hz": series(log.records.iter().map(|r| h.dot(&r.z.transpose()))),
            })
        })
        .collect();
    Ok(json!({
        "gamma": cert.decay.gamma,
        "m": cert.decay.m,
        "tau": cert.tau,
        "k0": log.k0,
        "delta_z": cert.delta_z,
        "delta_u": cert.delta_u,
        "z": z_rows,
        "violations": report.violations.len(),
        "min_slack_z": report.summary().z,
    })
    .to_string())
}
