use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use aoc::clocks::{analyze, domains_report};
use aoc::emit::emit_model;
use aoc::error::{AocError, EXIT_OK, EXIT_USAGE};
use aoc::frontend::{parse, ModuleAst, SourceUnit};
use aoc::ir::{export_ir, load_ir, FlatDesign};
use aoc::oracle::Oracle;
use aoc::partition::ExecConfig;
use aoc::pipeline::{flatten, Backend};
use aoc::plan::{build_plan, partitions_report, schedule_report, Plan};
use aoc::runtime::{SimOptions, Simulator};
use aoc::sim::{run, CycleModel, Trace};
use aoc::stimulus::{ResolvedStimulus, Stimulus};
use aoc::testbench::{find_testbench, Testbench};
use aoc::vcd::write_vcd;

mod config;

use config::FileConfig;

/// Default bound on simulation time for testbench runs.
const TB_TIME_LIMIT: u64 = 1_000_000;

#[derive(Parser, Debug)]
#[command(
    name = "aoc",
    version,
    about = "Cycle-accurate RTL simulation with activity-gated, ordered models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse, elaborate and analyze a design.
    Check(Common),
    /// Simulate a design from a stimulus file or a testbench.
    Sim(SimArgs),
    /// Write the design as a C model.
    Emit(EmitArgs),
    /// Print the flattened netlist as JSON.
    Dump(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Verilog sources or one JSON netlist (`.json`).
    files: Vec<PathBuf>,
    /// Top module.
    #[arg(short = 't', long = "top")]
    top: Option<String>,
    /// Worker threads and partitions per pod (tdmax).
    #[arg(long)]
    threads: Option<usize>,
    /// Placeholder slots per partition.
    #[arg(long)]
    phmax: Option<usize>,
    /// Word width of emitted code (32 or 64).
    #[arg(long)]
    cw: Option<u32>,
    /// key=value file with tdmax, phmax, cw and timescale.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dump_domains: bool,
    #[arg(long)]
    dump_schedule: bool,
    #[arg(long)]
    dump_partitions: bool,
}

#[derive(Args, Debug)]
struct SimArgs {
    #[command(flatten)]
    common: Common,
    /// Stimulus file; without one every clock input toggles each cycle.
    #[arg(long)]
    stim: Option<PathBuf>,
    /// Cycles to run (for testbench runs: the simulation time limit).
    #[arg(long)]
    cycles: Option<u64>,
    #[arg(long)]
    vcd: Option<PathBuf>,
    #[arg(long, default_value = "aoc")]
    backend: Backend,
    /// Print run statistics as JSON.
    #[arg(long)]
    stats: bool,
    /// Testbench source driving the design named by `--top`.
    #[arg(long)]
    tb: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EmitArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    out: PathBuf,
    /// Put the header into the source file.
    #[arg(long)]
    single_file: bool,
}

fn read(path: &Path) -> Result<String, AocError> {
    fs::read_to_string(path).map_err(|source| AocError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), AocError> {
    fs::write(path, text).map_err(|source| AocError::Io {
        path: path.display().to_string(),
        source,
    })
}

struct Loaded {
    design: FlatDesign,
    config: ExecConfig,
    timescale: String,
    modules: Vec<ModuleAst>,
}

fn load(c: &Common, extra: Option<&Path>) -> Result<Loaded, AocError> {
    let file = match &c.config {
        Some(p) => FileConfig::parse(&read(p)?).map_err(|e| AocError::Usage(format!("{}: {e}", p.display())))?,
        None => FileConfig::default(),
    };
    let config = file.exec(c.threads, c.phmax, c.cw);
    config.validate().map_err(|e| AocError::Usage(e.to_string()))?;
    let timescale = file.timescale.clone().unwrap_or_else(|| "1ns".into());
    let is_json = |p: &PathBuf| p.extension().is_some_and(|e| e == "json");
    if c.files.iter().any(is_json) {
        if c.files.len() != 1 || extra.is_some() {
            return Err(AocError::Usage("a JSON netlist must be the only input".into()));
        }
        let design = load_ir(&read(&c.files[0])?)?;
        design.validate()?;
        aoc::loops::check_loops(&design)?;
        return Ok(Loaded {
            design,
            config,
            timescale,
            modules: Vec::new(),
        });
    }
    if c.files.is_empty() && extra.is_none() {
        return Err(AocError::Usage("no input files".into()));
    }
    let mut unit = SourceUnit::new();
    let tb_only = extra.filter(|t| !c.files.iter().any(|f| f == t));
    for p in c.files.iter().map(PathBuf::as_path).chain(tb_only) {
        unit.add(&p.display().to_string(), &read(p)?);
    }
    let modules = parse(&unit)?;
    let design = match (&c.top, extra) {
        (None, Some(_)) => {
            let tb = find_testbench(&modules).ok_or_else(|| AocError::Usage("no testbench module found".into()))?;
            let tb = Testbench::build(&modules, &tb)?;
            flatten(&modules, Some(&tb.dut_module))?
        }
        _ => flatten(&modules, c.top.as_deref())?,
    };
    Ok(Loaded {
        design,
        config,
        timescale,
        modules,
    })
}

fn print_json(v: &serde_json::Value) {
    let text = serde_json::to_string_pretty(v).expect("serializable");
    let _ = writeln!(io::stdout().lock(), "{text}");
}

/// Print the requested analysis reports; returns the plan when one was built.
fn dumps(c: &Common, d: &FlatDesign, config: ExecConfig) -> Result<Option<Plan>, AocError> {
    if c.dump_domains {
        print_json(&domains_report(d, &analyze(d)?));
    }
    if c.dump_schedule || c.dump_partitions {
        let plan = build_plan(d.clone(), config)?;
        if c.dump_schedule {
            print_json(&schedule_report(&plan));
        }
        if c.dump_partitions {
            print_json(&partitions_report(&plan));
        }
        return Ok(Some(plan));
    }
    Ok(None)
}

fn check(c: &Common) -> Result<(), AocError> {
    let l = load(c, None)?;
    let plan = match dumps(c, &l.design, l.config)? {
        Some(p) => p,
        None => build_plan(l.design.clone(), l.config)?,
    };
    let d = &plan.design;
    eprintln!(
        "{}: {} signals, {} elements, {} registers, {} clock domains",
        d.top,
        d.signals.len(),
        d.elements.len(),
        d.registers().count(),
        plan.analysis.domains.len()
    );
    Ok(())
}

fn dump(c: &Common) -> Result<(), AocError> {
    let l = load(c, None)?;
    if !(c.dump_domains || c.dump_schedule || c.dump_partitions) {
        let _ = writeln!(io::stdout().lock(), "{}", export_ir(&l.design));
        return Ok(());
    }
    dumps(c, &l.design, l.config)?;
    Ok(())
}

fn emit(a: &EmitArgs) -> Result<(), AocError> {
    let l = load(&a.common, None)?;
    dumps(&a.common, &l.design, l.config)?;
    let plan = build_plan(l.design, l.config)?;
    let model = emit_model(&plan);
    if a.single_file {
        write(&a.out, &model.single_file())?;
    } else {
        let header = a.out.with_extension("h");
        let name = header
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "model.h".into());
        write(&header, &model.header)?;
        write(&a.out, &model.split_source(&name))?;
    }
    Ok(())
}

/// Stimulus toggling every clock input with period 2.
fn default_stimulus(d: &FlatDesign) -> ResolvedStimulus {
    let pins: std::collections::BTreeSet<_> = d.clocks.values().map(|p| p.clock).collect();
    let clocks = d
        .inputs()
        .filter(|s| pins.contains(&s.id))
        .map(|s| (s.id, 2, 0))
        .collect();
    ResolvedStimulus::new(Vec::new(), clocks)
}

enum Model {
    Interp(Simulator),
    Oracle(Oracle),
}

impl Model {
    fn as_dyn(&mut self) -> &mut dyn CycleModel {
        match self {
            Model::Interp(s) => s,
            Model::Oracle(o) => o,
        }
    }

    fn stats(&self) -> serde_json::Value {
        match self {
            Model::Interp(s) => {
                let st = s.stats();
                json!({
                    "cycles": st.cycles,
                    "evaluations": st.evaluations,
                    "groups_evaluated": st.groups_evaluated,
                    "groups_skipped": st.groups_skipped,
                    "pod_passes": st.pod_passes,
                    "partitions": s.plan().pods().map(|p| p.partitions.len()).sum::<usize>(),
                })
            }
            Model::Oracle(o) => json!({ "evaluations": o.evaluations }),
        }
    }
}

fn sim(a: &SimArgs) -> Result<(), AocError> {
    if a.tb.is_some() && a.stim.is_some() {
        return Err(AocError::Usage("--tb and --stim are mutually exclusive".into()));
    }
    let l = load(&a.common, a.tb.as_deref())?;
    dumps(&a.common, &l.design, l.config)?;
    let design = l.design.clone();
    let mut model = match a.backend {
        Backend::Oracle => Model::Oracle(Oracle::new(design.clone())),
        b => Model::Interp(Simulator::new(
            build_plan(design.clone(), l.config)?,
            SimOptions {
                gating: b == Backend::Aoc,
                threads: l.config.tdmax,
                ..SimOptions::default()
            },
        )),
    };
    let start = Instant::now();
    let (trace, extra) = match &a.tb {
        Some(_) => {
            let name = find_testbench(&l.modules).ok_or_else(|| AocError::Usage("no testbench module found".into()))?;
            let mut tb = Testbench::build(&l.modules, &name)?;
            let out = tb.run(model.as_dyn(), Some(a.cycles.unwrap_or(TB_TIME_LIMIT)))?;
            let stdout = io::stdout();
            let mut w = stdout.lock();
            for line in &out.log {
                let _ = writeln!(w, "{line}");
            }
            let extra = json!({
                "end_time": out.end_time,
                "finished": out.finished,
                "design_steps": out.dut_steps,
            });
            (out.trace, extra)
        }
        None => {
            let mut stim = match &a.stim {
                Some(p) => Stimulus::parse(&read(p)?)?.resolve(&design)?,
                None => default_stimulus(&design),
            };
            let cycles = a.cycles.unwrap_or(100);
            (run(model.as_dyn(), &mut stim, cycles)?, json!({}))
        }
    };
    let wall = start.elapsed();
    if let Some(p) = &a.vcd {
        write_trace(p, &trace, &design, &l.timescale)?;
    }
    if a.stats {
        let mut s = model.stats();
        s["backend"] = json!(format!("{:?}", a.backend).to_lowercase());
        s["wall_ms"] = json!(wall.as_secs_f64() * 1e3);
        s["trace_changes"] = json!(trace.changes.len());
        if let (Some(obj), Some(e)) = (s.as_object_mut(), extra.as_object()) {
            obj.extend(e.clone());
        }
        print_json(&s);
    }
    Ok(())
}

fn write_trace(p: &Path, t: &Trace, d: &FlatDesign, timescale: &str) -> Result<(), AocError> {
    let io_err = |source| AocError::Io {
        path: p.display().to_string(),
        source,
    };
    let f = fs::File::create(p).map_err(io_err)?;
    let mut w = BufWriter::new(f);
    write_vcd(t, d, timescale, &mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                EXIT_USAGE as u8
            } else {
                EXIT_OK as u8
            });
        }
    };
    let result = match &cli.command {
        Command::Check(c) => check(c),
        Command::Sim(a) => sim(a),
        Command::Emit(a) => emit(a),
        Command::Dump(c) => dump(c),
    };
    match result {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
