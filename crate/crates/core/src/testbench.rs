//! Behavioural testbench execution. A testbench module instantiates one
//! synthesizable design and drives it from `initial` and `always` processes
//! with delays and event controls. Each process is compiled to a small
//! instruction list whose wait instructions split it into segments; a time
//! queue and a condition list decide which process runs next, and the design
//! itself is stepped as a cycle model whenever its inputs change.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};

use thiserror::Error;

use crate::bits::Bits;
use crate::elaborate::{binary_op, unary_op};
use crate::frontend::ast::*;
use crate::frontend::Loc;
use crate::ir::{Op, SignalId};
use crate::ops;
use crate::sim::{CycleModel, Recorder, SimError, Trace};

/// Zero-delay iterations allowed within one time step.
pub const DELTA_CAP: usize = 1000;

/// Instructions one activation may execute before it must reach a wait.
const STEP_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TbError {
    #[error("{loc}: timing control inside design module `{module}`")]
    WaitInsideDut { loc: Loc, module: String },
    #[error("{loc}: unsupported testbench construct: {construct}")]
    Unsupported { loc: Loc, construct: String },
    #[error("testbench module `{0}` not found")]
    NoModule(String),
    #[error("{loc}: testbench must instantiate exactly one design module, found {found}")]
    DutInstance { loc: Loc, found: usize },
    #[error("{loc}: unknown signal `{name}`")]
    UnknownSignal { loc: Loc, name: String },
    #[error("{loc}: design `{module}` has no port `{port}`")]
    UnknownPort { loc: Loc, module: String, port: String },
    #[error("{loc}: {message}")]
    Invalid { loc: Loc, message: String },
    #[error(transparent)]
    Sim(#[from] SimError),
}

type TResult<T> = Result<T, TbError>;

fn unsupported<T>(loc: &Loc, what: &str) -> TResult<T> {
    Err(TbError::Unsupported {
        loc: loc.clone(),
        construct: what.to_string(),
    })
}

#[derive(Clone, Debug)]
pub enum Ins {
    Assign {
        lhs: Expr,
        rhs: Expr,
        nonblocking: bool,
    },
    Delay(Expr),
    Wait(Vec<EventItem>),
    Jump(usize),
    /// Jump to the target when the condition is zero.
    Branch(Expr, usize),
    Case {
        sel: Expr,
        arms: Vec<(Vec<Expr>, usize)>,
        default: usize,
    },
    RepeatInit {
        count: Expr,
        slot: usize,
    },
    /// Leave the loop at `exit` when the counter is exhausted.
    RepeatNext {
        slot: usize,
        exit: usize,
    },
    Task {
        name: String,
        args: Vec<Expr>,
        loc: Loc,
    },
    End,
}

/// A time-consuming process.
#[derive(Clone, Debug)]
pub struct Tcp {
    pub name: String,
    pub loc: Loc,
    pub code: Vec<Ins>,
    /// Entry instruction of each segment. A segment runs without suspending
    /// from its entry to the next delay or event wait.
    pub segments: Vec<usize>,
    slots: usize,
}

struct Compiler {
    code: Vec<Ins>,
    slots: usize,
}

impl Compiler {
    fn emit(&mut self, i: Ins) -> usize {
        self.code.push(i);
        self.code.len() - 1
    }

    fn here(&self) -> usize {
        self.code.len()
    }

    fn stmt(&mut self, s: &Stmt) -> TResult<()> {
        match &s.kind {
            StmtKind::Block(v) => {
                for x in v {
                    self.stmt(x)?;
                }
            }
            StmtKind::If(c, t, e) => {
                let br = self.emit(Ins::Branch(c.clone(), 0));
                self.stmt(t)?;
                if let Some(e) = e {
                    let j = self.emit(Ins::Jump(0));
                    let else_at = self.here();
                    self.stmt(e)?;
                    let end = self.here();
                    self.code[br] = Ins::Branch(c.clone(), else_at);
                    self.code[j] = Ins::Jump(end);
                } else {
                    let end = self.here();
                    self.code[br] = Ins::Branch(c.clone(), end);
                }
            }
            StmtKind::Case { sel, arms, default } => {
                let at = self.emit(Ins::End);
                let mut targets = Vec::new();
                let mut jumps = Vec::new();
                for a in arms {
                    targets.push((a.labels.clone(), self.here()));
                    self.stmt(&a.body)?;
                    jumps.push(self.emit(Ins::Jump(0)));
                }
                let default_at = self.here();
                if let Some(d) = default {
                    self.stmt(d)?;
                }
                let end = self.here();
                for j in jumps {
                    self.code[j] = Ins::Jump(end);
                }
                self.code[at] = Ins::Case {
                    sel: sel.clone(),
                    arms: targets,
                    default: default_at,
                };
            }
            StmtKind::Blocking(l, r) | StmtKind::NonBlocking(l, r) => {
                self.emit(Ins::Assign {
                    lhs: l.clone(),
                    rhs: r.clone(),
                    nonblocking: matches!(s.kind, StmtKind::NonBlocking(..)),
                });
            }
            StmtKind::Delay(d, body) => {
                self.emit(Ins::Delay(d.clone()));
                if let Some(b) = body {
                    self.stmt(b)?;
                }
            }
            StmtKind::Wait(items, body) => {
                self.emit(Ins::Wait(items.clone()));
                if let Some(b) = body {
                    self.stmt(b)?;
                }
            }
            StmtKind::Forever(b) => {
                if !b.has_timing() {
                    return unsupported(&s.loc, "forever loop without delay or event control");
                }
                let top = self.here();
                self.stmt(b)?;
                self.emit(Ins::Jump(top));
            }
            StmtKind::Repeat(n, b) => {
                let slot = self.slots;
                self.slots += 1;
                self.emit(Ins::RepeatInit { count: n.clone(), slot });
                let top = self.emit(Ins::RepeatNext { slot, exit: 0 });
                self.stmt(b)?;
                self.emit(Ins::Jump(top));
                let exit = self.here();
                self.code[top] = Ins::RepeatNext { slot, exit };
            }
            StmtKind::SysTask(name, args) => {
                if !matches!(name.as_str(), "finish" | "stop" | "display" | "write") {
                    return unsupported(&s.loc, &format!("system task `${name}`"));
                }
                self.emit(Ins::Task {
                    name: name.clone(),
                    args: args.clone(),
                    loc: s.loc.clone(),
                });
            }
            StmtKind::Null => {}
        }
        Ok(())
    }
}

fn finish_tcp(name: String, loc: Loc, c: Compiler) -> Tcp {
    let mut segments = vec![0];
    for (k, i) in c.code.iter().enumerate() {
        if matches!(i, Ins::Delay(_) | Ins::Wait(_)) {
            segments.push(k + 1);
        }
    }
    // a loop back to the entry makes the first segment part of the last
    let cyclic = c.code.iter().any(|i| matches!(i, Ins::Jump(0)));
    if cyclic && segments.len() > 1 {
        segments.remove(0);
    }
    Tcp {
        name,
        loc,
        code: c.code,
        segments,
        slots: c.slots,
    }
}

/// Compile the processes of a testbench module.
pub fn partition_tcp(m: &ModuleAst) -> TResult<Vec<Tcp>> {
    let mut out = Vec::new();
    for item in &m.items {
        match item {
            Item::Initial(b) => {
                let mut c = Compiler {
                    code: Vec::new(),
                    slots: 0,
                };
                c.stmt(&b.body)?;
                c.emit(Ins::End);
                out.push(finish_tcp(format!("initial@{}", b.loc.line), b.loc.clone(), c));
            }
            Item::Always(a) => {
                let mut c = Compiler {
                    code: Vec::new(),
                    slots: 0,
                };
                match &a.sens {
                    Sensitivity::List(items) => {
                        c.emit(Ins::Wait(items.clone()));
                    }
                    Sensitivity::Star => return unsupported(&a.loc, "`always @*` in a testbench"),
                    Sensitivity::None => {
                        if !a.body.has_timing() {
                            return unsupported(&a.loc, "always block without delay or event control");
                        }
                    }
                }
                c.stmt(&a.body)?;
                c.emit(Ins::Jump(0));
                out.push(finish_tcp(format!("always@{}", a.loc.line), a.loc.clone(), c));
            }
            _ => {}
        }
    }
    Ok(out)
}

fn has_process_timing(m: &ModuleAst) -> Option<Loc> {
    m.items.iter().find_map(|i| match i {
        Item::Initial(b) => b.body.first_timing_loc(),
        Item::Always(a) if matches!(a.sens, Sensitivity::None) => Some(a.loc.clone()),
        Item::Always(a) => a.body.first_timing_loc(),
        _ => None,
    })
}

/// First module that instantiates another module and contains timing
/// controls.
pub fn find_testbench(mods: &[ModuleAst]) -> Option<String> {
    mods.iter()
        .find(|m| has_process_timing(m).is_some() && m.items.iter().any(|i| matches!(i, Item::Instance(_))))
        .map(|m| m.name.clone())
}

/// Reject timing controls anywhere in the design hierarchy below `top`.
fn check_dut(mods: &[ModuleAst], top: &str) -> TResult<()> {
    let by_name: HashMap<&str, &ModuleAst> = mods.iter().map(|m| (m.name.as_str(), m)).collect();
    let mut seen = HashSet::new();
    let mut stack = vec![top.to_string()];
    while let Some(n) = stack.pop() {
        if !seen.insert(n.clone()) {
            continue;
        }
        let Some(m) = by_name.get(n.as_str()) else { continue };
        if let Some(loc) = has_process_timing(m) {
            return Err(TbError::WaitInsideDut {
                loc,
                module: m.name.clone(),
            });
        }
        for i in &m.items {
            if let Item::Instance(inst) = i {
                stack.push(inst.module.clone());
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
struct PortBind {
    port: String,
    dir: Direction,
    expr: Expr,
    loc: Loc,
}

/// A slice of a variable written by an assignment.
#[derive(Clone, Copy, Debug)]
struct Target {
    var: usize,
    lsb: u64,
    width: u32,
}

#[derive(Clone, Debug)]
enum PState {
    Ready,
    Sleeping,
    Waiting { items: Vec<EventItem>, last: Vec<Bits> },
    Done,
}

#[derive(Clone, Debug)]
struct Proc {
    pc: usize,
    slots: Vec<u64>,
    state: PState,
}

/// A process resumed at `time`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Wake {
    pub time: u64,
    pub process: usize,
}

#[derive(Clone, Debug)]
pub struct TbOutcome {
    /// Time of the last executed step.
    pub end_time: u64,
    /// `$finish` was executed.
    pub finished: bool,
    /// Output of `$display` and `$write`.
    pub log: Vec<String>,
    pub wakes: Vec<Wake>,
    /// Design outputs and registers, stamped with simulation time.
    pub trace: Trace,
    pub dut_steps: u64,
}

pub struct Testbench {
    pub name: String,
    pub dut_module: String,
    pub processes: Vec<Tcp>,
    vars: Vec<Bits>,
    index: HashMap<String, usize>,
    assigns: Vec<ContAssign>,
    ports: Vec<PortBind>,
}

impl Testbench {
    /// Compile testbench module `tb` from `mods`.
    pub fn build(mods: &[ModuleAst], tb: &str) -> TResult<Testbench> {
        let m = mods
            .iter()
            .find(|m| m.name == tb)
            .ok_or_else(|| TbError::NoModule(tb.to_string()))?;
        let insts: Vec<&Instance> = m
            .items
            .iter()
            .filter_map(|i| match i {
                Item::Instance(x) => Some(x),
                _ => None,
            })
            .collect();
        if insts.len() != 1 {
            return Err(TbError::DutInstance {
                loc: m.loc.clone(),
                found: insts.len(),
            });
        }
        let inst = insts[0];
        check_dut(mods, &inst.module)?;
        let dut = mods
            .iter()
            .find(|d| d.name == inst.module)
            .ok_or_else(|| TbError::NoModule(inst.module.clone()))?;
        if !m.ports.is_empty() {
            return unsupported(&m.loc, "testbench module with ports");
        }
        let mut t = Testbench {
            name: m.name.clone(),
            dut_module: inst.module.clone(),
            processes: partition_tcp(m)?,
            vars: Vec::new(),
            index: HashMap::new(),
            assigns: Vec::new(),
            ports: Vec::new(),
        };
        for item in &m.items {
            match item {
                Item::Param(p) => {
                    let v = t.eval(&p.value, 0, 0)?;
                    let v = match &p.range {
                        Some(r) => v.resize(t.range_width(r)?),
                        None => v,
                    };
                    t.declare(&p.name, v, &p.loc)?;
                }
                Item::Net(n) => {
                    let w = match (&n.range, n.kind) {
                        (Some(r), _) => t.range_width(r)?,
                        (None, NetKind::Integer) => 32,
                        (None, _) => 1,
                    };
                    for nm in &n.names {
                        if nm.array.is_some() {
                            return unsupported(&nm.loc, "array in a testbench");
                        }
                        let v = match &nm.init {
                            Some(e) => t.eval(e, w, 0)?.resize(w),
                            None => Bits::zero(w),
                        };
                        t.declare(&nm.name, v, &nm.loc)?;
                    }
                }
                Item::Assign(a) => t.assigns.push(a.clone()),
                Item::Function(f) => return unsupported(&f.loc, "function in a testbench"),
                Item::Port(p) => return unsupported(&p.loc, "testbench module with ports"),
                _ => {}
            }
        }
        t.bind_ports(inst, dut)?;
        for p in &t.processes {
            for i in &p.code {
                if let Ins::Assign { lhs, .. } = i {
                    t.check_lvalue(lhs)?;
                }
            }
        }
        for a in &t.assigns {
            t.check_lvalue(&a.lhs)?;
        }
        Ok(t)
    }

    fn declare(&mut self, name: &str, value: Bits, loc: &Loc) -> TResult<()> {
        if self.index.contains_key(name) {
            return Err(TbError::Invalid {
                loc: loc.clone(),
                message: format!("`{name}` declared twice"),
            });
        }
        self.index.insert(name.to_string(), self.vars.len());
        self.vars.push(value);
        Ok(())
    }

    fn range_width(&self, r: &Range) -> TResult<u32> {
        let m = self.eval(&r.msb, 0, 0)?.to_u64();
        let l = self.eval(&r.lsb, 0, 0)?.to_u64();
        if l != 0 && m != 0 && l > m {
            return unsupported(&r.msb.loc, "ascending range in a testbench");
        }
        Ok((m.abs_diff(l) + 1) as u32)
    }

    fn bind_ports(&mut self, inst: &Instance, dut: &ModuleAst) -> TResult<()> {
        let dir_of = |name: &str| -> Option<Direction> {
            let p = dut.ports.iter().find(|p| p.name == name)?;
            p.dir.or_else(|| {
                dut.items.iter().find_map(|i| match i {
                    Item::Port(q) if q.name == name => q.dir,
                    _ => None,
                })
            })
        };
        for (k, c) in inst.conns.iter().enumerate() {
            let port = match &c.name {
                Some(n) => n.clone(),
                None => match dut.ports.get(k) {
                    Some(p) => p.name.clone(),
                    None => {
                        return Err(TbError::Invalid {
                            loc: c.loc.clone(),
                            message: format!("too many connections for `{}`", dut.name),
                        })
                    }
                },
            };
            let Some(dir) = dir_of(&port) else {
                return Err(TbError::UnknownPort {
                    loc: c.loc.clone(),
                    module: dut.name.clone(),
                    port,
                });
            };
            let Some(expr) = &c.expr else { continue };
            if dir == Direction::Output {
                self.check_lvalue(expr)?;
            } else {
                self.check_expr(expr)?;
            }
            self.ports.push(PortBind {
                port,
                dir,
                expr: expr.clone(),
                loc: c.loc.clone(),
            });
        }
        Ok(())
    }

    fn lookup(&self, name: &str, loc: &Loc) -> TResult<usize> {
        self.index.get(name).copied().ok_or_else(|| TbError::UnknownSignal {
            loc: loc.clone(),
            name: name.to_string(),
        })
    }

    fn check_expr(&self, e: &Expr) -> TResult<()> {
        match &e.kind {
            ExprKind::Ident(n) => self.lookup(n, &e.loc).map(|_| ()),
            ExprKind::Number { .. } | ExprKind::Str(_) => Ok(()),
            ExprKind::Call(f, _) if f == "$time" => Ok(()),
            ExprKind::Call(f, _) => unsupported(&e.loc, &format!("function call `{f}` in a testbench")),
            ExprKind::Index(b, i) => {
                self.check_expr(b)?;
                self.check_expr(i)
            }
            ExprKind::Slice(b, m, l) => {
                self.check_expr(b)?;
                self.check_expr(m)?;
                self.check_expr(l)
            }
            ExprKind::IndexedSlice { base, start, width, .. } => {
                self.check_expr(base)?;
                self.check_expr(start)?;
                self.check_expr(width)
            }
            ExprKind::Unary(_, a) => self.check_expr(a),
            ExprKind::Binary(_, a, b) => {
                self.check_expr(a)?;
                self.check_expr(b)
            }
            ExprKind::Ternary(c, a, b) => {
                self.check_expr(c)?;
                self.check_expr(a)?;
                self.check_expr(b)
            }
            ExprKind::Concat(v) => v.iter().try_for_each(|x| self.check_expr(x)),
            ExprKind::Replicate(n, v) => {
                self.check_expr(n)?;
                v.iter().try_for_each(|x| self.check_expr(x))
            }
        }
    }

    fn check_lvalue(&self, e: &Expr) -> TResult<()> {
        match &e.kind {
            ExprKind::Ident(n) => self.lookup(n, &e.loc).map(|_| ()),
            ExprKind::Index(b, _) | ExprKind::Slice(b, _, _) if b.as_ident().is_some() => self.check_expr(e),
            ExprKind::IndexedSlice { base, .. } if base.as_ident().is_some() => self.check_expr(e),
            ExprKind::Concat(v) => v.iter().try_for_each(|x| self.check_lvalue(x)),
            _ => unsupported(&e.loc, "assignment target"),
        }
    }

    /// Current value of a testbench variable.
    pub fn value(&self, name: &str) -> Option<&Bits> {
        self.index.get(name).map(|&k| &self.vars[k])
    }

    fn var_width(&self, k: usize) -> u32 {
        self.vars[k].width()
    }

    /// Evaluate `e` at `now`; the result is at least `ctx` bits wide for
    /// context-determined operators.
    fn eval(&self, e: &Expr, ctx: u32, now: u64) -> TResult<Bits> {
        let widen = |b: Bits| {
            if b.width() < ctx {
                b.resize(ctx)
            } else {
                b
            }
        };
        Ok(match &e.kind {
            ExprKind::Number { size, value } => {
                let w = size.unwrap_or_else(|| value.width().max(32));
                widen(value.resize(w))
            }
            ExprKind::Ident(n) => {
                let k = self.lookup(n, &e.loc)?;
                widen(self.vars[k].clone())
            }
            ExprKind::Call(f, _) if f == "$time" => widen(Bits::from_u64(now, 64)),
            ExprKind::Call(f, _) => return unsupported(&e.loc, &format!("function call `{f}` in a testbench")),
            ExprKind::Str(_) => return unsupported(&e.loc, "string outside `$display`"),
            ExprKind::Index(b, i) => {
                let v = self.eval(b, 0, now)?;
                let i = self.eval(i, 0, now)?;
                let bit = i.as_u64().is_some_and(|i| i < v.width() as u64 && v.bit(i as u32));
                widen(Bits::from_u64(bit as u64, 1))
            }
            ExprKind::Slice(b, m, l) => {
                let v = self.eval(b, 0, now)?;
                let m = self.eval(m, 0, now)?.to_u64();
                let l = self.eval(l, 0, now)?.to_u64();
                let (hi, lo) = (m.max(l), m.min(l));
                widen(slice(&v, lo, (hi - lo + 1) as u32))
            }
            ExprKind::IndexedSlice { base, start, width, up } => {
                let v = self.eval(base, 0, now)?;
                let s = self.eval(start, 0, now)?.to_u64();
                let w = self.eval(width, 0, now)?.to_u64().max(1) as u32;
                let lo = if *up { s } else { s.saturating_sub(w as u64 - 1) };
                widen(slice(&v, lo, w))
            }
            ExprKind::Unary(op, a) => match op {
                UnaryOp::Plus => self.eval(a, ctx, now)?,
                UnaryOp::Neg => {
                    let a = self.eval(a, ctx, now)?;
                    let z = Bits::zero(a.width());
                    ops::eval_bits(&Op::Sub, a.width(), &[&z, &a])
                }
                UnaryOp::BitNot => {
                    let a = self.eval(a, ctx, now)?;
                    ops::eval_bits(&Op::Not, a.width(), &[&a])
                }
                _ => {
                    let a = self.eval(a, 0, now)?;
                    widen(ops::eval_bits(&unary_op(*op), 1, &[&a]))
                }
            },
            ExprKind::Binary(op, l, r) => match op {
                BinaryOp::Shl | BinaryOp::Shr => {
                    let a = self.eval(l, ctx, now)?;
                    let n = self.eval(r, 0, now)?;
                    let n = Bits::from_u64(n.as_u64().unwrap_or(u64::MAX).min(a.width() as u64), 64);
                    ops::eval_bits(&binary_op(*op), a.width(), &[&a, &n])
                }
                BinaryOp::Lt
                | BinaryOp::Le
                | BinaryOp::Gt
                | BinaryOp::Ge
                | BinaryOp::Eq
                | BinaryOp::Ne
                | BinaryOp::LogicAnd
                | BinaryOp::LogicOr => {
                    let a = self.eval(l, 0, now)?;
                    let b = self.eval(r, 0, now)?;
                    let w = a.width().max(b.width());
                    let (a, b) = if matches!(op, BinaryOp::LogicAnd | BinaryOp::LogicOr) {
                        (bool_bits(&a), bool_bits(&b))
                    } else {
                        (a.resize(w), b.resize(w))
                    };
                    widen(ops::eval_bits(&binary_op(*op), 1, &[&a, &b]))
                }
                _ => {
                    let a = self.eval(l, ctx, now)?;
                    let b = self.eval(r, ctx, now)?;
                    let w = a.width().max(b.width());
                    ops::eval_bits(&binary_op(*op), w, &[&a.resize(w), &b.resize(w)])
                }
            },
            ExprKind::Ternary(c, t, f) => {
                let c = self.eval(c, 0, now)?;
                let t = self.eval(t, ctx, now)?;
                let f = self.eval(f, ctx, now)?;
                let w = t.width().max(f.width());
                if c.is_zero() {
                    f.resize(w)
                } else {
                    t.resize(w)
                }
            }
            ExprKind::Concat(v) => {
                let parts = v.iter().map(|x| self.eval(x, 0, now)).collect::<TResult<Vec<_>>>()?;
                widen(concat(&parts))
            }
            ExprKind::Replicate(n, v) => {
                let n = self.eval(n, 0, now)?.to_u64();
                let parts = v.iter().map(|x| self.eval(x, 0, now)).collect::<TResult<Vec<_>>>()?;
                let one = concat(&parts);
                if n == 0 {
                    return unsupported(&e.loc, "zero replication");
                }
                widen(concat(&vec![one; n as usize]))
            }
        })
    }

    fn targets(&self, e: &Expr, now: u64, out: &mut Vec<Target>) -> TResult<()> {
        match &e.kind {
            ExprKind::Ident(n) => {
                let var = self.lookup(n, &e.loc)?;
                out.push(Target {
                    var,
                    lsb: 0,
                    width: self.var_width(var),
                });
            }
            ExprKind::Index(b, i) => {
                let var = self.lookup(b.as_ident().unwrap_or_default(), &b.loc)?;
                let lsb = self.eval(i, 0, now)?.as_u64().unwrap_or(u64::MAX);
                out.push(Target { var, lsb, width: 1 });
            }
            ExprKind::Slice(b, m, l) => {
                let var = self.lookup(b.as_ident().unwrap_or_default(), &b.loc)?;
                let m = self.eval(m, 0, now)?.to_u64();
                let l = self.eval(l, 0, now)?.to_u64();
                out.push(Target {
                    var,
                    lsb: m.min(l),
                    width: (m.abs_diff(l) + 1) as u32,
                });
            }
            ExprKind::IndexedSlice { base, start, width, up } => {
                let var = self.lookup(base.as_ident().unwrap_or_default(), &base.loc)?;
                let s = self.eval(start, 0, now)?.to_u64();
                let w = self.eval(width, 0, now)?.to_u64().max(1) as u32;
                let lsb = if *up { s } else { s.saturating_sub(w as u64 - 1) };
                out.push(Target { var, lsb, width: w });
            }
            ExprKind::Concat(v) => {
                for x in v {
                    self.targets(x, now, out)?;
                }
            }
            _ => return unsupported(&e.loc, "assignment target"),
        }
        Ok(())
    }

    /// Write `v` across `ts` (most significant target first). Returns whether
    /// any variable changed.
    fn store(&mut self, ts: &[Target], v: &Bits) -> bool {
        let mut changed = false;
        let mut offset = 0u64;
        for t in ts.iter().rev() {
            let part = slice(v, offset, t.width);
            offset += t.width as u64;
            let cur = &mut self.vars[t.var];
            let w = cur.width();
            if t.lsb >= w as u64 {
                continue;
            }
            let fit = t.width.min(w - t.lsb as u32);
            let mut next = cur.clone();
            ops::set_bits(next.words_mut(), t.lsb, part.resize(fit).words(), fit);
            if next != *cur {
                *cur = next;
                changed = true;
            }
        }
        changed
    }

    fn assign(&mut self, lhs: &Expr, rhs: &Expr, now: u64) -> TResult<(Vec<Target>, Bits)> {
        let mut ts = Vec::new();
        self.targets(lhs, now, &mut ts)?;
        let w: u32 = ts.iter().map(|t| t.width).sum();
        let v = self.eval(rhs, w, now)?.resize(w);
        Ok((ts, v))
    }

    fn settle_assigns(&mut self, now: u64) -> TResult<()> {
        if self.assigns.is_empty() {
            return Ok(());
        }
        for _ in 0..DELTA_CAP {
            let mut changed = false;
            for k in 0..self.assigns.len() {
                let a = self.assigns[k].clone();
                let (ts, v) = self.assign(&a.lhs, &a.rhs, now)?;
                changed |= self.store(&ts, &v);
            }
            if !changed {
                return Ok(());
            }
        }
        Err(SimError::Deadlock {
            time: now,
            reason: "continuous assignments in the testbench do not settle".into(),
        }
        .into())
    }

    fn format(&self, args: &[Expr], now: u64) -> TResult<String> {
        let mut out = String::new();
        let mut rest = args.iter();
        let Some(first) = args.first() else { return Ok(out) };
        if let ExprKind::Str(fmt) = &first.kind {
            rest.next();
            let mut chars = fmt.chars().peekable();
            while let Some(c) = chars.next() {
                if c != '%' {
                    out.push(c);
                    continue;
                }
                while chars.peek().is_some_and(|d| d.is_ascii_digit()) {
                    chars.next();
                }
                let Some(spec) = chars.next() else { break };
                if spec == '%' {
                    out.push('%');
                    continue;
                }
                let Some(a) = rest.next() else {
                    return Err(TbError::Invalid {
                        loc: first.loc.clone(),
                        message: "too few arguments for format string".into(),
                    });
                };
                if let ExprKind::Str(s) = &a.kind {
                    out.push_str(s);
                    continue;
                }
                let v = self.eval(a, 0, now)?;
                match spec.to_ascii_lowercase() {
                    'h' | 'x' => out.push_str(&v.to_hex_string()),
                    'b' => out.push_str(&v.to_binary_string()),
                    _ => out.push_str(&v.to_decimal_string()),
                }
            }
        }
        for a in rest {
            if !out.is_empty() {
                out.push(' ');
            }
            match &a.kind {
                ExprKind::Str(s) => out.push_str(s),
                _ => out.push_str(&self.eval(a, 0, now)?.to_decimal_string()),
            }
        }
        Ok(out)
    }

    /// Run against `dut` until `$finish`, until no process can make progress,
    /// or until simulation time would pass `limit`.
    pub fn run(&mut self, dut: &mut dyn CycleModel, limit: Option<u64>) -> TResult<TbOutcome> {
        let d = dut.design();
        let mut pins: Vec<(SignalId, PortBind)> = Vec::new();
        for p in &self.ports {
            let s = d.lookup(&p.port).ok_or_else(|| TbError::UnknownPort {
                loc: p.loc.clone(),
                module: d.top.clone(),
                port: p.port.clone(),
            })?;
            pins.push((s, p.clone()));
        }
        let mut run = Run {
            procs: self
                .processes
                .iter()
                .map(|p| Proc {
                    pc: 0,
                    slots: vec![0; p.slots],
                    state: PState::Ready,
                })
                .collect(),
            queue: BinaryHeap::new(),
            seq: 0,
            nba: Vec::new(),
            zero_delay: Vec::new(),
            finished: false,
            log: Vec::new(),
            wakes: Vec::new(),
            steps: 0,
            driven: vec![None; pins.len()],
        };
        let mut rec = Recorder::start(dut);
        self.pull_outputs(dut, &pins)?;
        self.settle_assigns(0)?;
        let mut now = 0u64;
        let mut ready: Vec<usize> = (0..self.processes.len()).collect();
        loop {
            let mut delta = 0;
            loop {
                for pid in std::mem::take(&mut ready) {
                    if run.finished {
                        break;
                    }
                    run.wakes.push(Wake {
                        time: now,
                        process: pid,
                    });
                    self.exec(&mut run, pid, now)?;
                }
                for (ts, v) in std::mem::take(&mut run.nba) {
                    self.store(&ts, &v);
                }
                self.settle_assigns(now)?;
                self.sync(dut, &pins, &mut run, now)?;
                if run.finished {
                    break;
                }
                ready = std::mem::take(&mut run.zero_delay);
                ready.extend(self.conditions(&mut run, now)?);
                if ready.is_empty() {
                    break;
                }
                delta += 1;
                if delta > DELTA_CAP {
                    return Err(SimError::Deadlock {
                        time: now,
                        reason: format!("more than {DELTA_CAP} zero-delay iterations"),
                    }
                    .into());
                }
            }
            rec.sample(dut, now);
            if run.finished {
                break;
            }
            let Some(&Reverse((next, _, _))) = run.queue.peek() else {
                let waiting: Vec<String> = run
                    .procs
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| matches!(p.state, PState::Waiting { .. }))
                    .map(|(k, _)| self.processes[k].name.clone())
                    .collect();
                if waiting.is_empty() {
                    break;
                }
                return Err(SimError::Deadlock {
                    time: now,
                    reason: format!("no pending events; waiting forever: {}", waiting.join(", ")),
                }
                .into());
            };
            if limit.is_some_and(|l| next > l) {
                break;
            }
            now = next;
            while let Some(&Reverse((t, _, pid))) = run.queue.peek() {
                if t != now {
                    break;
                }
                run.queue.pop();
                run.procs[pid].state = PState::Ready;
                ready.push(pid);
            }
        }
        Ok(TbOutcome {
            end_time: now,
            finished: run.finished,
            log: run.log,
            wakes: run.wakes,
            trace: rec.trace,
            dut_steps: run.steps,
        })
    }

    fn pull_outputs(&mut self, dut: &dyn CycleModel, pins: &[(SignalId, PortBind)]) -> TResult<bool> {
        let mut changed = false;
        for (s, p) in pins {
            if p.dir == Direction::Output {
                let mut ts = Vec::new();
                self.targets(&p.expr, 0, &mut ts)?;
                changed |= self.store(&ts, &dut.value(*s));
            }
        }
        Ok(changed)
    }

    /// Push changed inputs to the design, step it and copy its outputs back.
    fn sync(
        &mut self,
        dut: &mut dyn CycleModel,
        pins: &[(SignalId, PortBind)],
        run: &mut Run,
        now: u64,
    ) -> TResult<()> {
        loop {
            let mut changed = false;
            for (k, (s, p)) in pins.iter().enumerate() {
                if p.dir != Direction::Input {
                    continue;
                }
                let w = dut.design().signal(*s).width;
                let v = self.eval(&p.expr, w, now)?.resize(w);
                if run.driven[k].as_ref() != Some(&v) {
                    dut.set_input(*s, &v);
                    run.driven[k] = Some(v);
                    changed = true;
                }
            }
            if !changed {
                return Ok(());
            }
            dut.step()?;
            run.steps += 1;
            if self.pull_outputs(dut, pins)? {
                self.settle_assigns(now)?;
            }
        }
    }

    fn conditions(&self, run: &mut Run, now: u64) -> TResult<Vec<usize>> {
        let mut woken = Vec::new();
        for (pid, p) in run.procs.iter_mut().enumerate() {
            let PState::Waiting { items, last } = &mut p.state else {
                continue;
            };
            let mut hit = false;
            for (it, prev) in items.iter().zip(last.iter_mut()) {
                let v = self.eval(&it.expr, 0, now)?;
                hit |= match it.edge {
                    None => v != *prev,
                    Some(Edge::Posedge) => !prev.bit(0) && v.bit(0),
                    Some(Edge::Negedge) => prev.bit(0) && !v.bit(0),
                };
                *prev = v;
            }
            if hit {
                p.state = PState::Ready;
                woken.push(pid);
            }
        }
        Ok(woken)
    }

    fn exec(&mut self, run: &mut Run, pid: usize, now: u64) -> TResult<()> {
        for _ in 0..STEP_BUDGET {
            let pc = run.procs[pid].pc;
            let ins = self.processes[pid].code[pc].clone();
            run.procs[pid].pc = pc + 1;
            match ins {
                Ins::Assign { lhs, rhs, nonblocking } => {
                    let (ts, v) = self.assign(&lhs, &rhs, now)?;
                    if nonblocking {
                        run.nba.push((ts, v));
                    } else {
                        self.store(&ts, &v);
                    }
                }
                Ins::Delay(e) => {
                    let dt = self.eval(&e, 0, now)?.as_u64().unwrap_or(u64::MAX);
                    run.procs[pid].state = PState::Sleeping;
                    if dt == 0 {
                        run.zero_delay.push(pid);
                    } else {
                        run.seq += 1;
                        run.queue.push(Reverse((now.saturating_add(dt), run.seq, pid)));
                    }
                    return Ok(());
                }
                Ins::Wait(items) => {
                    let last = items
                        .iter()
                        .map(|i| self.eval(&i.expr, 0, now))
                        .collect::<TResult<Vec<_>>>()?;
                    run.procs[pid].state = PState::Waiting { items, last };
                    return Ok(());
                }
                Ins::Jump(t) => run.procs[pid].pc = t,
                Ins::Branch(c, t) => {
                    if self.eval(&c, 0, now)?.is_zero() {
                        run.procs[pid].pc = t;
                    }
                }
                Ins::Case { sel, arms, default } => {
                    let s = self.eval(&sel, 0, now)?;
                    let mut to = default;
                    'arms: for (labels, t) in &arms {
                        for l in labels {
                            let l = self.eval(l, 0, now)?;
                            let w = l.width().max(s.width());
                            if l.resize(w) == s.resize(w) {
                                to = *t;
                                break 'arms;
                            }
                        }
                    }
                    run.procs[pid].pc = to;
                }
                Ins::RepeatInit { count, slot } => {
                    run.procs[pid].slots[slot] = self.eval(&count, 0, now)?.as_u64().unwrap_or(u64::MAX);
                }
                Ins::RepeatNext { slot, exit } => {
                    let n = &mut run.procs[pid].slots[slot];
                    if *n == 0 {
                        run.procs[pid].pc = exit;
                    } else {
                        *n -= 1;
                    }
                }
                Ins::Task { name, args, .. } => match name.as_str() {
                    "finish" | "stop" => {
                        run.finished = true;
                        run.procs[pid].state = PState::Done;
                        return Ok(());
                    }
                    _ => {
                        let line = self.format(&args, now)?;
                        run.log.push(line);
                    }
                },
                Ins::End => {
                    run.procs[pid].state = PState::Done;
                    return Ok(());
                }
            }
        }
        Err(SimError::Deadlock {
            time: now,
            reason: format!(
                "process `{}` never reaches a delay or event control",
                self.processes[pid].name
            ),
        }
        .into())
    }
}

struct Run {
    procs: Vec<Proc>,
    queue: BinaryHeap<Reverse<(u64, u64, usize)>>,
    seq: u64,
    nba: Vec<(Vec<Target>, Bits)>,
    zero_delay: Vec<usize>,
    finished: bool,
    log: Vec<String>,
    wakes: Vec<Wake>,
    steps: u64,
    driven: Vec<Option<Bits>>,
}

fn slice(v: &Bits, lsb: u64, width: u32) -> Bits {
    if lsb >= v.width() as u64 {
        return Bits::zero(width);
    }
    Bits::from_words(&ops::get_bits(v.words(), lsb, width), width)
}

fn concat(parts: &[Bits]) -> Bits {
    let refs: Vec<&Bits> = parts.iter().collect();
    let w = parts.iter().map(|p| p.width()).sum();
    ops::eval_bits(&Op::Concat, w, &refs)
}

fn bool_bits(b: &Bits) -> Bits {
    Bits::from_u64(!b.is_zero() as u64, 1)
}
