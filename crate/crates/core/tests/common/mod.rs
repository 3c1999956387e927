#![allow(dead_code)]

use aoc::frontend::parse_text;
use aoc::ir::FlatDesign;
use aoc::oracle::Oracle;
use aoc::pipeline::flatten;
use aoc::sim::{run, Trace};
use aoc::stimulus::ResolvedStimulus;
use aoc::testgen::random_stimulus;

/// Designs under tests/corpus that are expected to compile.
pub const DESIGNS: &[&str] = &[
    "counter",
    "swap",
    "shift_reg",
    "gated_clock",
    "divider",
    "alu_fsm",
    "memory",
    "adder70",
    "hier",
    "two_clocks",
    "rule5",
];

pub fn source(path: &str) -> String {
    std::fs::read_to_string(format!("{}/tests/{path}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

pub fn design(name: &str) -> FlatDesign {
    let file = format!("{name}.v");
    let mods = parse_text(&file, &source(&format!("corpus/{file}"))).unwrap();
    flatten(&mods, None).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn corpus() -> Vec<(&'static str, FlatDesign)> {
    DESIGNS.iter().map(|&n| (n, design(n))).collect()
}

pub fn stimulus(d: &FlatDesign, seed: u64, cycles: u64) -> ResolvedStimulus {
    random_stimulus(d, seed, cycles)
}

pub fn oracle_trace(d: &FlatDesign, seed: u64, cycles: u64) -> Trace {
    let mut stim = stimulus(d, seed, cycles);
    run(&mut Oracle::new(d.clone()), &mut stim, cycles).unwrap()
}
