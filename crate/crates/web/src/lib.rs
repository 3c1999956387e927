//! Browser demo: compile Verilog in the page, simulate it with and without
//! activity gating, and inspect the pods, partitions and merge steps.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use aoc::emit::emit_model;
use aoc::error::AocError;
use aoc::ir::FlatDesign;
use aoc::oracle::Oracle;
use aoc::partition::ExecConfig;
use aoc::pipeline::compile_text;
use aoc::plan::{build_plan, partitions_report, schedule_report};
use aoc::runtime::{SimOptions, Simulator};
use aoc::sim::{run, Trace};
use aoc::stimulus::{ResolvedStimulus, Stimulus};

fn top_arg(top: &str) -> Option<&str> {
    Some(top.trim()).filter(|t| !t.is_empty())
}

fn compile(source: &str, top: &str) -> Result<FlatDesign, AocError> {
    compile_text("design.v", source, top_arg(top))
}

fn config(threads: usize) -> ExecConfig {
    ExecConfig {
        tdmax: threads.max(1),
        phmax: 32,
        cw: 64,
    }
}

fn stimulus(d: &FlatDesign, text: &str) -> Result<ResolvedStimulus, AocError> {
    if !text.trim().is_empty() {
        return Ok(Stimulus::parse(text)?.resolve(d)?);
    }
    let pins: std::collections::BTreeSet<_> = d.clocks.values().map(|p| p.clock).collect();
    let clocks = d
        .inputs()
        .filter(|s| pins.contains(&s.id))
        .map(|s| (s.id, 2, 0))
        .collect();
    Ok(ResolvedStimulus::new(Vec::new(), clocks))
}

fn waves(t: &Trace) -> Vec<Value> {
    (0..t.names.len())
        .map(|k| {
            let mut changes = vec![json!([0, t.initial[k].to_hex_string()])];
            changes.extend(
                t.changes
                    .iter()
                    .filter(|c| c.index == k)
                    .map(|c| json!([c.cycle, c.value.to_hex_string()])),
            );
            json!({"name": t.names[k], "width": t.widths[k], "changes": changes})
        })
        .collect()
}

/// Simulate gated, ungated and with the reference evaluator. The result
/// holds the waveform and the evaluation count of each engine.
pub fn simulate_json(source: &str, top: &str, stim: &str, cycles: u64, threads: usize) -> Result<Value, AocError> {
    let d = compile(source, top)?;
    let plan = build_plan(d.clone(), config(threads))?;
    let mut counts = Vec::new();
    let mut gated = None;
    for gating in [true, false] {
        let mut sim = Simulator::new(
            plan.clone(),
            SimOptions {
                gating,
                ..SimOptions::default()
            },
        );
        let t = run(&mut sim, &mut stimulus(&d, stim)?, cycles)?;
        counts.push(sim.stats().evaluations);
        gated.get_or_insert(t);
    }
    let gated = gated.expect("ran");
    let mut oracle = Oracle::new(d.clone());
    let reference = run(&mut oracle, &mut stimulus(&d, stim)?, cycles)?;
    Ok(json!({
        "top": d.top,
        "cycles": cycles,
        "signals": waves(&gated),
        "evaluations": {"gated": counts[0], "full": counts[1], "oracle": oracle.evaluations},
        "oracle_mismatch": reference.first_mismatch(&gated).map(|m| m.to_string()),
    }))
}

/// Pods, register orders, partitions and merge steps.
pub fn plan_json(source: &str, top: &str, threads: usize) -> Result<Value, AocError> {
    let plan = build_plan(compile(source, top)?, config(threads))?;
    Ok(json!({"schedule": schedule_report(&plan), "partitions": partitions_report(&plan)}))
}

pub fn emit_c(source: &str, top: &str, threads: usize, cw: u32) -> Result<String, AocError> {
    let cfg = ExecConfig { cw, ..config(threads) };
    cfg.validate().map_err(|e| AocError::Usage(e.to_string()))?;
    Ok(emit_model(&build_plan(compile(source, top)?, cfg)?).single_file())
}

fn js(r: Result<Value, AocError>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn simulate(source: &str, top: &str, stim: &str, cycles: u32, threads: u32) -> Result<String, JsError> {
    js(simulate_json(source, top, stim, cycles as u64, threads as usize))
}

#[wasm_bindgen]
pub fn plan(source: &str, top: &str, threads: u32) -> Result<String, JsError> {
    js(plan_json(source, top, threads as usize))
}

#[wasm_bindgen]
pub fn emit(source: &str, top: &str, threads: u32, cw: u32) -> Result<String, JsError> {
    emit_c(source, top, threads as usize, cw).map_err(|e| JsError::new(&e.to_string()))
}
