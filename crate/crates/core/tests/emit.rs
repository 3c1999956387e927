mod common;

use aoc::emit::{emit_model, find_cc, run_emitted, verify_emitted, VerifyError};
use aoc::partition::ExecConfig;
use aoc::plan::build_plan;
use aoc::runtime::{SimOptions, Simulator};
use aoc::sim::run;
use common::*;

const CYCLES: u64 = 1000;

fn config(cw: u32) -> ExecConfig {
    ExecConfig { tdmax: 2, phmax: 8, cw }
}

#[test]
fn corpus_models_reproduce_interpreter_traces() {
    if find_cc().is_none() {
        eprintln!("no C compiler; skipping compiled comparison");
        return;
    }
    for (name, d) in corpus() {
        for cw in [64, 32] {
            let plan = build_plan(d.clone(), config(cw)).unwrap();
            let mut stim = stimulus(&d, 5, CYCLES);
            let mut sim = Simulator::new(plan.clone(), SimOptions::default());
            let reference = run(&mut sim, &mut stim, CYCLES).unwrap();
            let m = verify_emitted(&plan, &reference, &mut stim).unwrap();
            assert!(m.is_none(), "{name} cw {cw}: {}", m.unwrap());
        }
    }
}

#[test]
fn emission_is_deterministic() {
    for (name, d) in corpus() {
        let a = emit_model(&build_plan(d.clone(), config(64)).unwrap());
        let b = emit_model(&build_plan(d, config(64)).unwrap());
        assert_eq!(a, b, "{name}");
    }
}

fn check_golden(file: &str, text: &str) {
    let path = format!("{}/tests/golden/{file}", env!("CARGO_MANIFEST_DIR"));
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, text).unwrap();
        return;
    }
    let want = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing {path}; run with UPDATE_GOLDEN=1"));
    assert!(want == text, "{file} differs from the golden snapshot");
}

#[test]
fn golden_snapshots() {
    let counter = emit_model(&build_plan(design("counter"), config(64)).unwrap());
    check_golden("counter.c", &counter.single_file());
    let wide = emit_model(&build_plan(design("adder70"), config(32)).unwrap());
    check_golden("adder70_cw32.c", &wide.single_file());
    check_golden("adder70_cw32.h", &wide.header);
}

#[test]
fn corrupted_emission_is_caught_at_the_first_divergent_cycle() {
    let Some(cc) = find_cc() else { return };
    let d = design("counter");
    let plan = build_plan(d.clone(), config(64)).unwrap();
    let src = emit_model(&plan).single_file();
    let count = d.lookup("count").unwrap();
    // skew the increment of the counter
    let bad = src.replacen("_count + ", "_count + 2 + ", 1);
    assert_ne!(bad, src);

    let mut stim = stimulus(&d, 9, 200);
    let reference = oracle_trace(&d, 9, 200);
    let got = run_emitted(&bad, &d, 64, &mut stim, 200, &cc).unwrap();
    let m = reference.first_mismatch(&got).expect("corruption must be visible");

    // independent expectation: the first cycle at which the oracle's count changes
    let k = reference.signals.iter().position(|&s| s == count).unwrap();
    let first_change = reference.changes.iter().find(|c| c.index == k).map(|c| c.cycle);
    assert_eq!(Some(m.cycle), first_change);
}

#[test]
fn missing_toolchain_is_reported() {
    let d = design("counter");
    let plan = build_plan(d.clone(), config(64)).unwrap();
    let mut stim = stimulus(&d, 1, 4);
    let bogus = std::path::Path::new("/nonexistent/cc");
    let err = run_emitted(&emit_model(&plan).single_file(), &d, 64, &mut stim, 4, bogus).unwrap_err();
    assert!(matches!(err, VerifyError::Io(_)));
}
