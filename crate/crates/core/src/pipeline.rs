//! Source-to-model plumbing shared by the command line, the browser demo
//! and the tests.

use crate::elaborate::{elaborate, resolve_top};
use crate::error::AocError;
use crate::frontend::{parse, ModuleAst, SourceUnit};
use crate::ir::FlatDesign;
use crate::loops::check_loops;
use crate::optimize::optimize;
use crate::oracle::Oracle;
use crate::partition::ExecConfig;
use crate::plan::build_plan;
use crate::runtime::{SimOptions, Simulator};
use crate::sim::CycleModel;

/// Simulation engine selected on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    /// Gated, ordered interpreter.
    Aoc,
    /// The same interpreter evaluating every group in every pass.
    AocFull,
    Oracle,
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "aoc" => Ok(Backend::Aoc),
            "aoc-full" => Ok(Backend::AocFull),
            "oracle" => Ok(Backend::Oracle),
            _ => Err(format!("unknown backend `{s}` (expected aoc, aoc-full or oracle)")),
        }
    }
}

/// Elaborate `top` (or the single top candidate), reject combinational
/// loops and simplify the netlist.
pub fn flatten(mods: &[ModuleAst], top: Option<&str>) -> Result<FlatDesign, AocError> {
    let top = resolve_top(mods, top)?;
    let d = elaborate(mods, &top)?;
    check_loops(&d)?;
    Ok(optimize(&d)?)
}

pub fn compile_unit(unit: &SourceUnit, top: Option<&str>) -> Result<FlatDesign, AocError> {
    flatten(&parse(unit)?, top)
}

pub fn compile_text(path: &str, text: &str, top: Option<&str>) -> Result<FlatDesign, AocError> {
    compile_unit(&SourceUnit::from_text(path, text), top)
}

/// Build a cycle model for `design`.
pub fn make_model(
    design: FlatDesign,
    backend: Backend,
    config: ExecConfig,
    threads: usize,
) -> Result<Box<dyn CycleModel + Send>, AocError> {
    Ok(match backend {
        Backend::Oracle => Box::new(Oracle::new(design)),
        Backend::Aoc | Backend::AocFull => {
            let plan = build_plan(design, config)?;
            Box::new(Simulator::new(
                plan,
                SimOptions {
                    gating: backend == Backend::Aoc,
                    threads,
                    ..SimOptions::default()
                },
            ))
        }
    })
}
