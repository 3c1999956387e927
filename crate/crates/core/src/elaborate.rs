//! Hierarchy expansion, parameter substitution, function inlining and
//! lowering of procedural blocks into a flat netlist of combinational
//! elements and clocked registers.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use thiserror::Error;

use crate::bits::Bits;
use crate::frontend::ast::*;
use crate::frontend::{Loc, ModuleAst};
use crate::ir::*;
use crate::ops;

const MAX_WIDTH: u64 = 1 << 16;
const MAX_ARRAY_BITS: u64 = 1 << 22;
const MAX_CALL_DEPTH: usize = 64;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ElabError {
    #[error("top module `{0}` not found")]
    UnknownTop(String),
    #[error("cannot infer the top module; candidates: {0:?} (use --top)")]
    AmbiguousTop(Vec<String>),
    #[error("recursive instantiation: {}", cycle.join(" -> "))]
    RecursiveInstantiation { cycle: Vec<String> },
    #[error("{loc}: unresolved parameter `{name}`")]
    UnresolvedParameter { loc: Loc, name: String },
    #[error("{loc}: expression is not constant: {what}")]
    NotConstant { loc: Loc, what: String },
    #[error("{loc}: unknown signal `{name}`")]
    UnknownSignal { loc: Loc, name: String },
    #[error("{loc}: module `{module}` has no port `{port}`")]
    UnknownPort { loc: Loc, module: String, port: String },
    #[error("{loc}: signal `{signal}` has more than one driver")]
    MultiDriver { loc: Loc, signal: String },
    #[error("{loc}: incomplete assignment to `{signal}` in combinational block would infer a latch")]
    Latch { loc: Loc, signal: String },
    #[error("{loc}: unsupported construct: {construct}")]
    Unsupported { loc: Loc, construct: String },
    #[error("{loc}: signal `{signal}` is read but never driven")]
    Undriven { loc: Loc, signal: String },
    #[error("{loc}: {message}")]
    Invalid { loc: Loc, message: String },
    #[error("division by constant zero computing `{signal}`")]
    DivisionByZero { signal: String },
}

type EResult<T> = Result<T, ElabError>;

fn unsupported<T>(loc: &Loc, what: &str) -> EResult<T> {
    Err(ElabError::Unsupported {
        loc: loc.clone(),
        construct: what.to_string(),
    })
}

fn invalid<T>(loc: &Loc, message: impl Into<String>) -> EResult<T> {
    Err(ElabError::Invalid {
        loc: loc.clone(),
        message: message.into(),
    })
}

/// Modules never instantiated by another module.
pub fn top_candidates(mods: &[ModuleAst]) -> Vec<String> {
    let used: HashSet<&str> = mods
        .iter()
        .flat_map(|m| m.items.iter())
        .filter_map(|i| match i {
            Item::Instance(inst) => Some(inst.module.as_str()),
            _ => None,
        })
        .collect();
    mods.iter()
        .filter(|m| !used.contains(m.name.as_str()))
        .map(|m| m.name.clone())
        .collect()
}

/// Pick the top module: the given name, or the only uninstantiated module.
pub fn resolve_top(mods: &[ModuleAst], top: Option<&str>) -> EResult<String> {
    match top {
        Some(t) => {
            if mods.iter().any(|m| m.name == t) {
                Ok(t.to_string())
            } else {
                Err(ElabError::UnknownTop(t.to_string()))
            }
        }
        None => {
            let c = top_candidates(mods);
            if c.len() == 1 {
                Ok(c[0].clone())
            } else {
                Err(ElabError::AmbiguousTop(c))
            }
        }
    }
}

/// Flatten the hierarchy below `top` into a [`FlatDesign`].
pub fn elaborate(mods: &[ModuleAst], top: &str) -> EResult<FlatDesign> {
    let table: HashMap<&str, &ModuleAst> = mods.iter().map(|m| (m.name.as_str(), m)).collect();
    let Some(&top_ast) = table.get(top) else {
        return Err(ElabError::UnknownTop(top.to_string()));
    };
    let mut el = Elab {
        mods: table,
        b: Builder::default(),
        stack: Vec::new(),
        call_depth: 0,
    };
    el.b.top = top.to_string();
    el.instance(top_ast, &[], vec![top.to_string()], true, &top_ast.loc)?;
    el.b.finish()
}

// ---------------------------------------------------------------------------
// Netlist builder

#[derive(Default)]
struct Builder {
    top: String,
    signals: Vec<Signal>,
    elements: Vec<CombElement>,
    clocks: BTreeMap<SignalId, ClockPin>,
    names: HashSet<String>,
    /// Signals with a full driver and where it was declared.
    driven: HashMap<SignalId, Loc>,
    /// Constant-range partial drivers: (lsb, width, source, loc).
    partial: BTreeMap<SignalId, Vec<(u32, u32, SignalId, Loc)>>,
    /// Where each signal was declared, for diagnostics.
    decl_loc: HashMap<SignalId, Loc>,
    versions: HashMap<String, u32>,
    temps: u32,
}

impl Builder {
    fn unique_name(&mut self, base: &str) -> String {
        let mut name = base.to_string();
        let mut n = 1;
        while self.names.contains(&name) {
            name = format!("{base}__{n}");
            n += 1;
        }
        self.names.insert(name.clone());
        name
    }

    #[allow(clippy::too_many_arguments)]
    fn signal(
        &mut self,
        base: &str,
        scope: &[String],
        kind: SignalKind,
        width: u32,
        dims: u8,
        depth: u32,
        loc: &Loc,
    ) -> SignalId {
        let id = SignalId(self.signals.len() as u32);
        let name = self.unique_name(base);
        self.signals.push(Signal {
            id,
            name,
            scope: scope.to_vec(),
            kind,
            width,
            dims,
            depth,
            init: None,
            port_output: false,
        });
        self.decl_loc.insert(id, loc.clone());
        id
    }

    fn width(&self, s: SignalId) -> u32 {
        self.signals[s.index()].width
    }

    fn temp(&mut self, prefix: &str, scope: &[String], width: u32) -> SignalId {
        self.temps += 1;
        let base = format!("{prefix}__e{}", self.temps);
        let loc = Loc::new("<elab>", 0, 0);
        self.signal(&base, scope, SignalKind::Wire, width, dims_for(width), 1, &loc)
    }

    fn version(&mut self, prefix: &str, var: &str, scope: &[String], width: u32) -> SignalId {
        let key = format!("{prefix}_{var}");
        let n = self.versions.entry(key.clone()).or_insert(0);
        *n += 1;
        let base = format!("{key}_v{n}");
        let loc = Loc::new("<elab>", 0, 0);
        self.signal(&base, scope, SignalKind::Wire, width, dims_for(width), 1, &loc)
    }

    fn element(&mut self, op: Op, inputs: Vec<SignalId>, output: SignalId) {
        let id = ElementId(self.elements.len() as u32);
        self.elements.push(CombElement { id, op, inputs, output });
    }

    fn mark_driven(&mut self, s: SignalId, loc: &Loc) -> EResult<()> {
        if self.driven.contains_key(&s) || self.partial.contains_key(&s) {
            return Err(ElabError::MultiDriver {
                loc: loc.clone(),
                signal: self.signals[s.index()].name.clone(),
            });
        }
        self.driven.insert(s, loc.clone());
        Ok(())
    }

    fn finish(mut self) -> EResult<FlatDesign> {
        let partial = std::mem::take(&mut self.partial);
        for (sig, mut parts) in partial {
            let s = self.signals[sig.index()].clone();
            parts.sort_by_key(|p| p.0);
            for w in parts.windows(2) {
                if w[0].0 + w[0].1 > w[1].0 {
                    return Err(ElabError::MultiDriver {
                        loc: w[1].3.clone(),
                        signal: s.name.clone(),
                    });
                }
            }
            let prefix = s.name.clone();
            let mut pieces = Vec::new();
            let mut pos = 0u32;
            for (lsb, w, src, _) in &parts {
                if *lsb > pos {
                    let gap = *lsb - pos;
                    let z = self.temp(&prefix, &s.scope, gap);
                    self.element(Op::Const(Bits::zero(gap)), vec![], z);
                    pieces.push(z);
                }
                pieces.push(*src);
                pos = lsb + w;
            }
            if pos < s.width {
                let gap = s.width - pos;
                let z = self.temp(&prefix, &s.scope, gap);
                self.element(Op::Const(Bits::zero(gap)), vec![], z);
                pieces.push(z);
            }
            pieces.reverse();
            if pieces.len() == 1 {
                self.element(Op::Buffer, pieces, sig);
            } else {
                self.element(Op::Concat, pieces, sig);
            }
        }
        let driven: HashSet<SignalId> = self.elements.iter().map(|e| e.output).collect();
        let mut read: HashSet<SignalId> = self.elements.iter().flat_map(|e| e.inputs.iter().copied()).collect();
        read.extend(self.clocks.values().map(|p| p.clock));
        for s in &self.signals {
            let needs = match s.kind {
                SignalKind::Output => true,
                SignalKind::Wire => read.contains(&s.id),
                _ => false,
            };
            if needs && !driven.contains(&s.id) {
                return Err(ElabError::Undriven {
                    loc: self.decl_loc[&s.id].clone(),
                    signal: s.name.clone(),
                });
            }
        }
        let design = FlatDesign {
            top: self.top,
            signals: self.signals,
            elements: self.elements,
            clocks: self.clocks,
        };
        design.validate().map_err(|e| ElabError::Invalid {
            loc: Loc::new("<elab>", 0, 0),
            message: e.to_string(),
        })?;
        Ok(design)
    }
}

fn dims_for(width: u32) -> u8 {
    if width == 1 {
        0
    } else {
        1
    }
}

// ---------------------------------------------------------------------------
// Per-instance context

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum DeclKind {
    Input,
    Output,
    Wire,
    Reg,
}

/// Shape of a named variable: packed width, lsb offset, optional array.
#[derive(Clone, Copy, Debug)]
struct Shape {
    width: u32,
    lsb: u64,
    /// (lowest index, depth, element width)
    array: Option<(u64, u32, u32)>,
}

#[derive(Clone, Debug)]
struct Sym {
    id: SignalId,
    shape: Shape,
}

struct ModCtx<'a> {
    ast: &'a ModuleAst,
    prefix: String,
    scope: Vec<String>,
    params: HashMap<String, Bits>,
    syms: HashMap<String, Sym>,
    funcs: HashMap<String, &'a FunctionDecl>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Mode {
    Comb,
    Clocked,
    Function,
}

#[derive(Clone, Debug)]
struct Var {
    val: SignalId,
    cov: Bits,
}

/// State of a procedural block being symbolically executed.
#[derive(Clone)]
struct Proc {
    mode: Mode,
    env: BTreeMap<String, Var>,
    /// Function arguments and locals, which shadow module signals.
    locals: HashMap<String, Shape>,
}

enum Resolved {
    Param(Bits),
    Signal(SignalId, Shape),
}

struct Elab<'a> {
    mods: HashMap<&'a str, &'a ModuleAst>,
    b: Builder,
    stack: Vec<String>,
    call_depth: usize,
}

fn range_bounds<'a>(el: &mut Elab<'a>, cx: &ModCtx<'a>, r: &Range) -> EResult<(u64, u64)> {
    let m = el.const_u64(cx, &r.msb)?;
    let l = el.const_u64(cx, &r.lsb)?;
    Ok((m, l))
}

impl<'a> Elab<'a> {
    fn instance(
        &mut self,
        ast: &'a ModuleAst,
        overrides: &[Connection],
        scope: Vec<String>,
        is_top: bool,
        loc: &Loc,
    ) -> EResult<HashMap<String, Sym>> {
        if self.stack.contains(&ast.name) {
            let mut cycle = self.stack.clone();
            cycle.push(ast.name.clone());
            return Err(ElabError::RecursiveInstantiation { cycle });
        }
        let _ = loc;
        self.stack.push(ast.name.clone());
        let prefix = scope.join("_");
        let mut cx = ModCtx {
            ast,
            prefix,
            scope,
            params: HashMap::new(),
            syms: HashMap::new(),
            funcs: HashMap::new(),
        };
        self.params(&mut cx, overrides)?;
        for item in &ast.items {
            if let Item::Function(f) = item {
                cx.funcs.insert(f.name.clone(), f);
            }
        }
        self.declare(&mut cx, is_top)?;
        for item in &ast.items {
            match item {
                Item::Assign(a) => self.cont_assign(&cx, a)?,
                Item::Always(a) => self.always(&cx, a)?,
                Item::Initial(i) => self.initial(&cx, &i.body)?,
                Item::Instance(inst) => self.child(&cx, inst)?,
                _ => {}
            }
        }
        self.stack.pop();
        Ok(cx.syms)
    }

    fn params(&mut self, cx: &mut ModCtx<'a>, overrides: &[Connection]) -> EResult<()> {
        let ast = cx.ast;
        let mut decls: Vec<&ParamDecl> = ast.params.iter().collect();
        for item in &ast.items {
            if let Item::Param(p) = item {
                decls.push(p);
            }
        }
        let overridable: Vec<&ParamDecl> = decls.iter().copied().filter(|p| !p.local).collect();
        let mut given: HashMap<String, Bits> = HashMap::new();
        for (k, c) in overrides.iter().enumerate() {
            let name = match &c.name {
                Some(n) => n.clone(),
                None => match overridable.get(k) {
                    Some(p) => p.name.clone(),
                    None => return invalid(&c.loc, format!("too many parameter overrides for `{}`", ast.name)),
                },
            };
            let Some(p) = overridable.iter().find(|p| p.name == name) else {
                return Err(ElabError::UnresolvedParameter {
                    loc: c.loc.clone(),
                    name,
                });
            };
            let _ = p;
            let Some(e) = &c.expr else {
                continue;
            };
            // overrides were evaluated by the parent and carried as literals
            let ExprKind::Number { value, .. } = &e.kind else {
                return Err(ElabError::NotConstant {
                    loc: e.loc.clone(),
                    what: "parameter override".into(),
                });
            };
            given.insert(name, value.clone());
        }
        for p in decls {
            let value = match given.remove(&p.name) {
                Some(v) => v,
                None => {
                    let w = self.const_width(cx, &p.value)?;
                    self.const_eval(cx, &p.value, w)?
                }
            };
            let value = match &p.range {
                Some(r) => {
                    let (m, l) = range_bounds(self, cx, r)?;
                    value.resize((m.abs_diff(l) + 1) as u32)
                }
                None => value,
            };
            cx.params.insert(p.name.clone(), value);
        }
        Ok(())
    }

    fn shape_of(&mut self, cx: &ModCtx<'a>, range: &Option<Range>, array: &Option<Range>, loc: &Loc) -> EResult<Shape> {
        let (width, lsb) = match range {
            Some(r) => {
                let (m, l) = range_bounds(self, cx, r)?;
                if m < l {
                    return unsupported(loc, "ascending bit range");
                }
                (m - l + 1, l)
            }
            None => (1, 0),
        };
        if width > MAX_WIDTH {
            return invalid(loc, format!("width {width} exceeds the supported maximum"));
        }
        let array = match array {
            Some(r) => {
                let (a, b) = range_bounds(self, cx, r)?;
                let depth = a.abs_diff(b) + 1;
                if depth * width > MAX_ARRAY_BITS {
                    return invalid(loc, "array too large");
                }
                Some((a.min(b), depth as u32, width as u32))
            }
            None => None,
        };
        Ok(Shape {
            width: array.map(|(_, d, w)| d * w).unwrap_or(width as u32),
            lsb: if array.is_some() { 0 } else { lsb },
            array,
        })
    }

    /// Create signals for every port and net of the module.
    fn declare(&mut self, cx: &mut ModCtx<'a>, is_top: bool) -> EResult<()> {
        let ast = cx.ast;
        // name -> (decl kind, is reg, range, array, init, loc)
        struct D<'x> {
            kind: DeclKind,
            is_reg: bool,
            range: Option<&'x Range>,
            array: Option<&'x Range>,
            init: Option<&'x Expr>,
            loc: Loc,
            integer: bool,
        }
        let mut order: Vec<String> = Vec::new();
        let mut decls: HashMap<String, D> = HashMap::new();
        let mut port_set: HashSet<&str> = HashSet::new();
        for p in &ast.ports {
            port_set.insert(&p.name);
            if let Some(dir) = p.dir {
                order.push(p.name.clone());
                decls.insert(
                    p.name.clone(),
                    D {
                        kind: if dir == Direction::Input {
                            DeclKind::Input
                        } else {
                            DeclKind::Output
                        },
                        is_reg: p.is_reg,
                        range: p.range.as_ref(),
                        array: None,
                        init: None,
                        loc: p.loc.clone(),
                        integer: false,
                    },
                );
            }
        }
        for item in &ast.items {
            match item {
                Item::Port(p) => {
                    if ast.ansi || !port_set.contains(p.name.as_str()) {
                        return invalid(&p.loc, format!("`{}` is not in the port list", p.name));
                    }
                    if decls.contains_key(&p.name) {
                        return invalid(&p.loc, format!("port `{}` declared twice", p.name));
                    }
                    order.push(p.name.clone());
                    decls.insert(
                        p.name.clone(),
                        D {
                            kind: if p.dir == Some(Direction::Input) {
                                DeclKind::Input
                            } else {
                                DeclKind::Output
                            },
                            is_reg: p.is_reg,
                            range: p.range.as_ref(),
                            array: None,
                            init: None,
                            loc: p.loc.clone(),
                            integer: false,
                        },
                    );
                }
                Item::Net(n) => {
                    for nn in &n.names {
                        if let Some(d) = decls.get_mut(&nn.name) {
                            let is_port = matches!(d.kind, DeclKind::Input | DeclKind::Output);
                            if !is_port || nn.array.is_some() {
                                return invalid(&nn.loc, format!("`{}` declared twice", nn.name));
                            }
                            if n.kind == NetKind::Reg {
                                d.is_reg = true;
                            }
                            if d.range.is_none() {
                                d.range = n.range.as_ref();
                            }
                            if nn.init.is_some() {
                                d.init = nn.init.as_ref();
                            }
                            continue;
                        }
                        order.push(nn.name.clone());
                        decls.insert(
                            nn.name.clone(),
                            D {
                                kind: if n.kind == NetKind::Wire {
                                    DeclKind::Wire
                                } else {
                                    DeclKind::Reg
                                },
                                is_reg: n.kind != NetKind::Wire,
                                range: n.range.as_ref(),
                                array: nn.array.as_ref(),
                                init: nn.init.as_ref(),
                                loc: nn.loc.clone(),
                                integer: n.kind == NetKind::Integer,
                            },
                        );
                    }
                }
                _ => {}
            }
        }
        for p in &ast.ports {
            if !decls.contains_key(&p.name) {
                return invalid(&p.loc, format!("port `{}` has no direction declaration", p.name));
            }
        }
        let clocked = assigned_names(ast, true);
        let comb = assigned_names(ast, false);
        for name in order {
            let d = &decls[&name];
            if cx.params.contains_key(&name) {
                return invalid(&d.loc, format!("`{name}` is both a parameter and a signal"));
            }
            let shape = if d.integer {
                Shape {
                    width: 32,
                    lsb: 0,
                    array: None,
                }
            } else {
                let range = d.range.cloned();
                let array = d.array.cloned();
                self.shape_of(cx, &range, &array, &d.loc)?
            };
            let is_clocked = clocked.contains(name.as_str());
            if is_clocked && comb.contains(name.as_str()) {
                return Err(ElabError::MultiDriver {
                    loc: d.loc.clone(),
                    signal: name.clone(),
                });
            }
            if (is_clocked || comb.contains(name.as_str())) && !d.is_reg {
                return invalid(&d.loc, format!("procedural assignment to non-reg `{name}`"));
            }
            if d.kind == DeclKind::Input && (is_clocked || comb.contains(name.as_str())) {
                return invalid(&d.loc, format!("assignment to input `{name}`"));
            }
            let kind = match (d.kind, is_top, is_clocked) {
                (_, _, true) => SignalKind::Register,
                (DeclKind::Input, true, _) => SignalKind::Input,
                (DeclKind::Output, true, _) => SignalKind::Output,
                _ => SignalKind::Wire,
            };
            let (dims, depth) = match shape.array {
                Some((_, depth, _)) => (2, depth),
                None => (if d.range.is_some() || d.integer { 1 } else { 0 }, 1),
            };
            let base = format!("{}_{}", cx.prefix, name);
            let id = self.b.signal(&base, &cx.scope, kind, shape.width, dims, depth, &d.loc);
            if is_top && d.kind == DeclKind::Output && kind == SignalKind::Register {
                self.b.signals[id.index()].port_output = true;
            }
            if let Some(init) = d.init {
                if kind == SignalKind::Register {
                    let v = self.const_eval(cx, init, shape.width)?;
                    self.b.signals[id.index()].init = Some(v);
                } else if shape.array.is_none() {
                    // `wire w = expr;` is a continuous assignment
                    cx.syms.insert(name.clone(), Sym { id, shape });
                    let a = ContAssign {
                        lhs: Expr {
                            kind: ExprKind::Ident(name.clone()),
                            loc: d.loc.clone(),
                        },
                        rhs: init.clone(),
                        loc: d.loc.clone(),
                    };
                    self.cont_assign(cx, &a)?;
                    continue;
                } else {
                    return unsupported(&d.loc, "array initializer");
                }
            }
            cx.syms.insert(name, Sym { id, shape });
        }
        Ok(())
    }

    // -----------------------------------------------------------------------
    // Name resolution and widths

    fn resolve(&self, cx: &ModCtx<'a>, pv: Option<&Proc>, name: &str, loc: &Loc) -> EResult<Resolved> {
        if let Some(p) = pv {
            if let Some(shape) = p.locals.get(name) {
                if let Some(v) = p.env.get(name) {
                    return Ok(Resolved::Signal(v.val, *shape));
                }
                return Ok(Resolved::Param(Bits::zero(shape.width)));
            }
        }
        if let Some(v) = cx.params.get(name) {
            return Ok(Resolved::Param(v.clone()));
        }
        if let Some(s) = cx.syms.get(name) {
            if let Some(p) = pv {
                if p.mode != Mode::Clocked {
                    if let Some(v) = p.env.get(name) {
                        return Ok(Resolved::Signal(v.val, s.shape));
                    }
                }
            }
            return Ok(Resolved::Signal(s.id, s.shape));
        }
        Err(ElabError::UnknownSignal {
            loc: loc.clone(),
            name: name.to_string(),
        })
    }

    fn shape_by_name(&self, cx: &ModCtx<'a>, pv: Option<&Proc>, name: &str) -> Option<Shape> {
        if let Some(p) = pv {
            if let Some(s) = p.locals.get(name) {
                return Some(*s);
            }
        }
        if let Some(v) = cx.params.get(name) {
            return Some(Shape {
                width: v.width(),
                lsb: 0,
                array: None,
            });
        }
        cx.syms.get(name).map(|s| s.shape)
    }

    /// Self-determined width of an expression.
    fn self_width(&mut self, cx: &ModCtx<'a>, pv: Option<&Proc>, e: &Expr) -> EResult<u32> {
        Ok(match &e.kind {
            ExprKind::Number { size, value } => size.unwrap_or(value.width()),
            ExprKind::Ident(n) => match self.shape_by_name(cx, pv, n) {
                Some(s) if s.array.is_some() => return unsupported(&e.loc, "whole-array reference"),
                Some(s) => s.width,
                None => {
                    return Err(ElabError::UnknownSignal {
                        loc: e.loc.clone(),
                        name: n.clone(),
                    })
                }
            },
            ExprKind::Index(b, _) => match (b.as_ident(), b.as_ident().and_then(|n| self.shape_by_name(cx, pv, n))) {
                (
                    Some(_),
                    Some(Shape {
                        array: Some((_, _, ew)),
                        ..
                    }),
                ) => ew,
                _ => 1,
            },
            ExprKind::Slice(_, m, l) => {
                let m = self.const_u64(cx, m)?;
                let l = self.const_u64(cx, l)?;
                if m < l {
                    return unsupported(&e.loc, "reversed part select");
                }
                (m - l + 1) as u32
            }
            ExprKind::IndexedSlice { width, .. } => self.const_u64(cx, width)? as u32,
            ExprKind::Unary(op, x) => match op {
                UnaryOp::Plus | UnaryOp::Neg | UnaryOp::BitNot => self.self_width(cx, pv, x)?,
                _ => 1,
            },
            ExprKind::Binary(op, l, r) => match op {
                BinaryOp::Add
                | BinaryOp::Sub
                | BinaryOp::Mul
                | BinaryOp::Div
                | BinaryOp::Mod
                | BinaryOp::BitAnd
                | BinaryOp::BitOr
                | BinaryOp::BitXor
                | BinaryOp::BitXnor => self.self_width(cx, pv, l)?.max(self.self_width(cx, pv, r)?),
                BinaryOp::Shl | BinaryOp::Shr => self.self_width(cx, pv, l)?,
                _ => 1,
            },
            ExprKind::Ternary(_, t, f) => self.self_width(cx, pv, t)?.max(self.self_width(cx, pv, f)?),
            ExprKind::Concat(parts) => {
                let mut w = 0;
                for p in parts {
                    w += self.self_width(cx, pv, p)?;
                }
                w
            }
            ExprKind::Replicate(n, parts) => {
                let n = self.const_u64(cx, n)?;
                let mut w = 0u64;
                for p in parts {
                    w += self.self_width(cx, pv, p)? as u64;
                }
                let total = n * w;
                if total == 0 || total > MAX_WIDTH {
                    return invalid(&e.loc, "replication width out of range");
                }
                total as u32
            }
            ExprKind::Call(f, _) => match cx.funcs.get(f.as_str()) {
                Some(fd) => {
                    let fd: &FunctionDecl = fd;
                    match &fd.range {
                        Some(r) => {
                            let (m, l) = range_bounds(self, cx, r)?;
                            (m.abs_diff(l) + 1) as u32
                        }
                        None => 1,
                    }
                }
                None => return invalid(&e.loc, format!("unknown function `{f}`")),
            },
            ExprKind::Str(_) => return unsupported(&e.loc, "string in expression"),
        })
    }

    fn const_u64(&mut self, cx: &ModCtx<'a>, e: &Expr) -> EResult<u64> {
        let w = self.const_width(cx, e)?;
        let v = self.const_eval(cx, e, w)?;
        v.as_u64().ok_or_else(|| ElabError::NotConstant {
            loc: e.loc.clone(),
            what: "value does not fit in 64 bits".into(),
        })
    }

    /// Self width of an expression expected to be constant.
    fn const_width(&mut self, cx: &ModCtx<'a>, e: &Expr) -> EResult<u32> {
        match self.self_width(cx, None, e) {
            Err(ElabError::UnknownSignal { loc, name }) => Err(ElabError::UnresolvedParameter { loc, name }),
            r => r,
        }
    }

    /// Evaluate a constant expression (literals and parameters) at width `w`.
    fn const_eval(&mut self, cx: &ModCtx<'a>, e: &Expr, w: u32) -> EResult<Bits> {
        let w = w.max(1);
        Ok(match &e.kind {
            ExprKind::Number { value, .. } => value.resize(w),
            ExprKind::Ident(n) => match cx.params.get(n) {
                Some(v) => v.resize(w),
                None => {
                    return Err(ElabError::UnresolvedParameter {
                        loc: e.loc.clone(),
                        name: n.clone(),
                    })
                }
            },
            ExprKind::Unary(op, x) => {
                let (xw, o) = match op {
                    UnaryOp::Plus => return self.const_eval(cx, x, w),
                    UnaryOp::Neg => {
                        let v = self.const_eval(cx, x, w)?;
                        return Ok(ops::eval_bits(&Op::Sub, w, &[&Bits::zero(w), &v]));
                    }
                    UnaryOp::BitNot => (w, Op::Not),
                    _ => (self.self_width(cx, None, x)?, unary_op(*op)),
                };
                let v = self.const_eval(cx, x, xw)?;
                ops::eval_bits(&o, if matches!(o, Op::Not) { w } else { 1 }, &[&v]).resize(w)
            }
            ExprKind::Binary(op, l, r) => {
                let (o, lw, rw, ow) = self.binary_widths(cx, None, *op, l, r, w)?;
                let a = self.const_eval(cx, l, lw)?;
                let b = self.const_eval(cx, r, rw)?;
                ops::eval_bits(&o, ow, &[&a, &b]).resize(w)
            }
            ExprKind::Ternary(c, t, f) => {
                let cw = self.self_width(cx, None, c)?;
                if self.const_eval(cx, c, cw)?.is_zero() {
                    self.const_eval(cx, f, w)?
                } else {
                    self.const_eval(cx, t, w)?
                }
            }
            ExprKind::Concat(parts) => {
                let mut vals = Vec::new();
                for p in parts {
                    let pw = self.self_width(cx, None, p)?;
                    vals.push(self.const_eval(cx, p, pw)?);
                }
                let refs: Vec<&Bits> = vals.iter().collect();
                let tw: u32 = vals.iter().map(|v| v.width()).sum();
                ops::eval_bits(&Op::Concat, tw, &refs).resize(w)
            }
            ExprKind::Replicate(n, parts) => {
                let n = self.const_u64(cx, n)?;
                let mut vals = Vec::new();
                for _ in 0..n {
                    for p in parts {
                        let pw = self.self_width(cx, None, p)?;
                        vals.push(self.const_eval(cx, p, pw)?);
                    }
                }
                let refs: Vec<&Bits> = vals.iter().collect();
                let tw: u32 = vals.iter().map(|v| v.width()).sum();
                ops::eval_bits(&Op::Concat, tw, &refs).resize(w)
            }
            ExprKind::Slice(b, m, l) => {
                let bw = self.self_width(cx, None, b)?;
                let v = self.const_eval(cx, b, bw)?;
                let (m, l) = (self.const_u64(cx, m)?, self.const_u64(cx, l)?);
                ops::eval_bits(&Op::Slice { lsb: l as u32 }, (m - l + 1) as u32, &[&v]).resize(w)
            }
            ExprKind::Index(b, i) => {
                let bw = self.self_width(cx, None, b)?;
                let v = self.const_eval(cx, b, bw)?;
                let i = self.const_u64(cx, i)?;
                Bits::from_u64((i < bw as u64 && v.bit(i as u32)) as u64, w)
            }
            _ => {
                return Err(ElabError::NotConstant {
                    loc: e.loc.clone(),
                    what: "only literals and parameters are allowed here".into(),
                })
            }
        })
    }

    /// Op and operand widths for a binary operator evaluated in context `w`.
    fn binary_widths(
        &mut self,
        cx: &ModCtx<'a>,
        pv: Option<&Proc>,
        op: BinaryOp,
        l: &Expr,
        r: &Expr,
        w: u32,
    ) -> EResult<(Op, u32, u32, u32)> {
        let o = binary_op(op);
        Ok(match op {
            BinaryOp::Add
            | BinaryOp::Sub
            | BinaryOp::Mul
            | BinaryOp::Div
            | BinaryOp::Mod
            | BinaryOp::BitAnd
            | BinaryOp::BitOr
            | BinaryOp::BitXor
            | BinaryOp::BitXnor => (o, w, w, w),
            BinaryOp::Shl | BinaryOp::Shr => {
                let rw = self.self_width(cx, pv, r)?;
                (o, w, rw, w)
            }
            BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => {
                let m = self.self_width(cx, pv, l)?.max(self.self_width(cx, pv, r)?);
                (o, m, m, 1)
            }
            BinaryOp::LogicAnd | BinaryOp::LogicOr => {
                let lw = self.self_width(cx, pv, l)?;
                let rw = self.self_width(cx, pv, r)?;
                (o, lw, rw, 1)
            }
        })
    }

    // -----------------------------------------------------------------------
    // Expression lowering

    /// Produce an element (or reuse a signal) computing `op(inputs)` at
    /// `width`, writing into `dest` when given.
    fn emit(&mut self, cx: &ModCtx<'a>, op: Op, inputs: Vec<SignalId>, width: u32, dest: Option<SignalId>) -> SignalId {
        match dest {
            Some(d) if self.b.width(d) == width => {
                self.b.element(op, inputs, d);
                d
            }
            Some(d) => {
                let t = self.b.temp(&cx.prefix, &cx.scope, width);
                self.b.element(op, inputs, t);
                self.b.element(Op::Buffer, vec![t], d);
                d
            }
            None => {
                let t = self.b.temp(&cx.prefix, &cx.scope, width);
                self.b.element(op, inputs, t);
                t
            }
        }
    }

    fn constant(&mut self, cx: &ModCtx<'a>, v: Bits, dest: Option<SignalId>) -> SignalId {
        let w = dest.map(|d| self.b.width(d)).unwrap_or(v.width());
        let v = v.resize(w);
        self.emit(cx, Op::Const(v), vec![], w, dest)
    }

    fn forward(&mut self, cx: &ModCtx<'a>, s: SignalId, dest: Option<SignalId>) -> SignalId {
        match dest {
            Some(d) => {
                let w = self.b.width(d);
                self.emit(cx, Op::Buffer, vec![s], w, Some(d))
            }
            None => s,
        }
    }

    /// Lower `e` evaluated in a context of width `w` (at least its own width).
    /// The result may be narrower than `w` (consumers zero-extend) unless
    /// `dest` is given, in which case the value lands in `dest`.
    fn lower(
        &mut self,
        cx: &ModCtx<'a>,
        pv: Option<&Proc>,
        e: &Expr,
        w: u32,
        dest: Option<SignalId>,
    ) -> EResult<SignalId> {
        let sw = self.self_width(cx, pv, e)?;
        let w = w.max(sw);
        match &e.kind {
            ExprKind::Number { value, .. } => {
                Ok(self.constant(cx, value.resize(w.max(value.width())).resize(sw.max(1)), dest))
            }
            ExprKind::Ident(n) => match self.resolve(cx, pv, n, &e.loc)? {
                Resolved::Param(v) => Ok(self.constant(cx, v, dest)),
                Resolved::Signal(s, shape) => {
                    if shape.array.is_some() {
                        return unsupported(&e.loc, "whole-array reference");
                    }
                    Ok(self.forward(cx, s, dest))
                }
            },
            ExprKind::Index(b, i) => {
                let (base, shape) = self.lower_base(cx, pv, b)?;
                if let Some((lo, _, ew)) = shape.array {
                    let idx = self.lower_index(cx, pv, i, lo)?;
                    return Ok(self.emit(cx, Op::Index { elem_width: ew }, vec![base, idx], ew, dest));
                }
                if let Some(c) = self.try_const(cx, i)? {
                    let bit = c.wrapping_sub(shape.lsb);
                    if c < shape.lsb || bit >= shape.width as u64 {
                        return Ok(self.constant(cx, Bits::zero(1), dest));
                    }
                    return Ok(self.emit(cx, Op::Slice { lsb: bit as u32 }, vec![base], 1, dest));
                }
                let idx = self.lower_index(cx, pv, i, shape.lsb)?;
                Ok(self.emit(cx, Op::Index { elem_width: 1 }, vec![base, idx], 1, dest))
            }
            ExprKind::Slice(b, m, l) => {
                let (base, shape) = self.lower_base(cx, pv, b)?;
                if shape.array.is_some() {
                    return unsupported(&e.loc, "part select of an array");
                }
                let (m, l) = (self.const_u64(cx, m)?, self.const_u64(cx, l)?);
                let width = (m - l + 1) as u32;
                if l < shape.lsb {
                    return invalid(&e.loc, "part select below the declared range");
                }
                Ok(self.emit(
                    cx,
                    Op::Slice {
                        lsb: (l - shape.lsb) as u32,
                    },
                    vec![base],
                    width,
                    dest,
                ))
            }
            ExprKind::IndexedSlice { base, start, width, up } => {
                let (bs, shape) = self.lower_base(cx, pv, base)?;
                if shape.array.is_some() {
                    return unsupported(&e.loc, "part select of an array");
                }
                let width = self.const_u64(cx, width)? as u32;
                if let Some(s) = self.try_const(cx, start)? {
                    let lo = if *up { s } else { s.wrapping_sub(width as u64 - 1) };
                    if lo < shape.lsb {
                        return invalid(&e.loc, "part select below the declared range");
                    }
                    return Ok(self.emit(
                        cx,
                        Op::Slice {
                            lsb: (lo - shape.lsb) as u32,
                        },
                        vec![bs],
                        width,
                        dest,
                    ));
                }
                let mut off = shape.lsb;
                let mut st = start.as_ref().clone();
                if !*up {
                    // base -: w  ==  (base - (w-1)) +: w
                    st = Expr {
                        kind: ExprKind::Binary(
                            BinaryOp::Sub,
                            Box::new(st),
                            Box::new(Expr {
                                kind: ExprKind::Number {
                                    size: None,
                                    value: Bits::from_u64(width as u64 - 1, 32),
                                },
                                loc: e.loc.clone(),
                            }),
                        ),
                        loc: e.loc.clone(),
                    };
                    off = shape.lsb;
                }
                let amt = self.lower_index(cx, pv, &st, off)?;
                let sh = self.emit(cx, Op::Shr, vec![bs, amt], shape.width, None);
                Ok(self.emit(cx, Op::Slice { lsb: 0 }, vec![sh], width, dest))
            }
            ExprKind::Unary(op, x) => match op {
                UnaryOp::Plus => self.lower(cx, pv, x, w, dest),
                UnaryOp::Neg => {
                    let z = self.constant(cx, Bits::zero(w), None);
                    let v = self.lower(cx, pv, x, w, None)?;
                    Ok(self.emit(cx, Op::Sub, vec![z, v], w, dest))
                }
                UnaryOp::BitNot => {
                    let v = self.lower(cx, pv, x, w, None)?;
                    Ok(self.emit(cx, Op::Not, vec![v], w, dest))
                }
                _ => {
                    let xw = self.self_width(cx, pv, x)?;
                    let v = self.lower_exact(cx, pv, x, xw)?;
                    Ok(self.emit(cx, unary_op(*op), vec![v], 1, dest))
                }
            },
            ExprKind::Binary(op, l, r) => {
                let (o, lw, rw, ow) = self.binary_widths(cx, pv, *op, l, r, w)?;
                let a = self.lower_operand(cx, pv, l, lw, &o)?;
                let b = self.lower_operand(cx, pv, r, rw, &o)?;
                Ok(self.emit(cx, o, vec![a, b], ow, dest))
            }
            ExprKind::Ternary(c, t, f) => {
                let cw = self.self_width(cx, pv, c)?;
                let cs = self.lower_exact(cx, pv, c, cw)?;
                let ts = self.lower(cx, pv, t, w, None)?;
                let fs = self.lower(cx, pv, f, w, None)?;
                Ok(self.emit(cx, Op::Mux, vec![cs, ts, fs], w, dest))
            }
            ExprKind::Concat(parts) => {
                let mut ins = Vec::new();
                for p in parts {
                    let pw = self.self_width(cx, pv, p)?;
                    ins.push(self.lower_exact(cx, pv, p, pw)?);
                }
                if ins.len() == 1 {
                    return Ok(self.forward(cx, ins[0], dest));
                }
                Ok(self.emit(cx, Op::Concat, ins, sw, dest))
            }
            ExprKind::Replicate(n, parts) => {
                let n = self.const_u64(cx, n)?;
                let mut one = Vec::new();
                for p in parts {
                    let pw = self.self_width(cx, pv, p)?;
                    one.push(self.lower_exact(cx, pv, p, pw)?);
                }
                let mut ins = Vec::new();
                for _ in 0..n {
                    ins.extend(one.iter().copied());
                }
                if ins.len() == 1 {
                    return Ok(self.forward(cx, ins[0], dest));
                }
                Ok(self.emit(cx, Op::Concat, ins, sw, dest))
            }
            ExprKind::Call(f, args) => {
                let s = self.call(cx, pv, f, args, &e.loc)?;
                Ok(self.forward(cx, s, dest))
            }
            ExprKind::Str(_) => unsupported(&e.loc, "string in expression"),
        }
    }

    /// Operands of context-determined operators must carry the context
    /// width when they are themselves context-determined (e.g. `~a`).
    fn lower_operand(&mut self, cx: &ModCtx<'a>, pv: Option<&Proc>, e: &Expr, w: u32, _op: &Op) -> EResult<SignalId> {
        self.lower(cx, pv, e, w, None)
    }

    /// Lower into a signal of exactly width `w`.
    fn lower_exact(&mut self, cx: &ModCtx<'a>, pv: Option<&Proc>, e: &Expr, w: u32) -> EResult<SignalId> {
        let s = self.lower(cx, pv, e, w, None)?;
        if self.b.width(s) == w {
            Ok(s)
        } else {
            Ok(self.emit(cx, Op::Buffer, vec![s], w, None))
        }
    }

    fn try_const(&mut self, cx: &ModCtx<'a>, e: &Expr) -> EResult<Option<u64>> {
        if !is_const_expr(cx, e) {
            return Ok(None);
        }
        Ok(Some(self.const_u64(cx, e)?))
    }

    /// Index expression relative to `offset`.
    fn lower_index(&mut self, cx: &ModCtx<'a>, pv: Option<&Proc>, i: &Expr, offset: u64) -> EResult<SignalId> {
        if let Some(c) = self.try_const(cx, i)? {
            let v = c.wrapping_sub(offset);
            let v = if c < offset { u64::MAX } else { v };
            return Ok(self.constant(cx, Bits::from_u64(v, 64), None));
        }
        let iw = self.self_width(cx, pv, i)?;
        let s = self.lower_exact(cx, pv, i, iw)?;
        if offset == 0 {
            return Ok(s);
        }
        // wrap-around below the range lands out of range and reads as zero
        let w = iw.max(64);
        let o = self.constant(cx, Bits::from_u64(offset, w), None);
        let ext = self.emit(cx, Op::Buffer, vec![s], w, None);
        Ok(self.emit(cx, Op::Sub, vec![ext, o], w, None))
    }

    /// Lower the base of a select: an identifier (keeping its declared shape)
    /// or an arbitrary expression (treated as `[w-1:0]`).
    fn lower_base(&mut self, cx: &ModCtx<'a>, pv: Option<&Proc>, b: &Expr) -> EResult<(SignalId, Shape)> {
        if let ExprKind::Ident(n) = &b.kind {
            return match self.resolve(cx, pv, n, &b.loc)? {
                Resolved::Param(v) => {
                    let w = v.width();
                    Ok((
                        self.constant(cx, v, None),
                        Shape {
                            width: w,
                            lsb: 0,
                            array: None,
                        },
                    ))
                }
                Resolved::Signal(s, shape) => Ok((s, shape)),
            };
        }
        let w = self.self_width(cx, pv, b)?;
        let s = self.lower_exact(cx, pv, b, w)?;
        Ok((
            s,
            Shape {
                width: w,
                lsb: 0,
                array: None,
            },
        ))
    }

    fn call(&mut self, cx: &ModCtx<'a>, pv: Option<&Proc>, f: &str, args: &[Expr], loc: &Loc) -> EResult<SignalId> {
        let Some(&fd) = cx.funcs.get(f) else {
            return invalid(loc, format!("unknown function `{f}`"));
        };
        if self.call_depth >= MAX_CALL_DEPTH {
            return unsupported(loc, "recursive function");
        }
        if fd.inputs.len() != args.len() {
            return invalid(loc, format!("function `{f}` expects {} arguments", fd.inputs.len()));
        }
        let mut fp = Proc {
            mode: Mode::Function,
            env: BTreeMap::new(),
            locals: HashMap::new(),
        };
        let ret = self.shape_of(cx, &fd.range, &None, &fd.loc)?;
        fp.locals.insert(fd.name.clone(), ret);
        for (p, a) in fd.inputs.iter().zip(args) {
            let shape = self.shape_of(cx, &p.range, &None, &p.loc)?;
            let v = self.lower_exact(cx, pv, a, shape.width)?;
            fp.locals.insert(p.name.clone(), shape);
            fp.env.insert(
                p.name.clone(),
                Var {
                    val: v,
                    cov: Bits::ones(shape.width),
                },
            );
        }
        for l in &fd.locals {
            for n in &l.names {
                let shape = if l.kind == NetKind::Integer {
                    Shape {
                        width: 32,
                        lsb: 0,
                        array: None,
                    }
                } else {
                    self.shape_of(cx, &l.range, &n.array, &n.loc)?
                };
                fp.locals.insert(n.name.clone(), shape);
            }
        }
        self.call_depth += 1;
        let fcx_prefix = format!("{}_{}", cx.prefix, fd.name);
        let sub = ModCtx {
            ast: cx.ast,
            prefix: fcx_prefix,
            scope: cx.scope.clone(),
            params: cx.params.clone(),
            syms: cx.syms.clone(),
            funcs: cx.funcs.clone(),
        };
        let r = self.exec(&sub, &fd.body, &mut fp);
        self.call_depth -= 1;
        r?;
        match fp.env.get(&fd.name) {
            Some(v) => Ok(v.val),
            None => Ok(self.constant(cx, Bits::zero(ret.width), None)),
        }
    }

    // -----------------------------------------------------------------------
    // Items

    fn cont_assign(&mut self, cx: &ModCtx<'a>, a: &ContAssign) -> EResult<()> {
        let lw = self.lvalue_width(cx, &a.lhs)?;
        let rw = self.self_width(cx, None, &a.rhs)?;
        if let ExprKind::Ident(n) = &a.lhs.kind {
            let sym = self.target_sym(cx, n, &a.lhs.loc)?;
            if sym.shape.array.is_some() {
                return unsupported(&a.lhs.loc, "whole-array assignment");
            }
            self.b.mark_driven(sym.id, &a.loc)?;
            self.lower(cx, None, &a.rhs, lw.max(rw), Some(sym.id))?;
            return Ok(());
        }
        let v = self.lower(cx, None, &a.rhs, lw.max(rw), None)?;
        let v = self.fit(cx, v, lw);
        self.drive_lvalue(cx, &a.lhs, v, &a.loc)
    }

    fn fit(&mut self, cx: &ModCtx<'a>, s: SignalId, w: u32) -> SignalId {
        if self.b.width(s) == w {
            s
        } else {
            self.emit(cx, Op::Buffer, vec![s], w, None)
        }
    }

    fn target_sym(&self, cx: &ModCtx<'a>, n: &str, loc: &Loc) -> EResult<Sym> {
        match cx.syms.get(n) {
            Some(s) => {
                if self.b.signals[s.id.index()].kind == SignalKind::Input {
                    return invalid(loc, format!("assignment to input `{n}`"));
                }
                Ok(s.clone())
            }
            None if cx.params.contains_key(n) => invalid(loc, format!("assignment to parameter `{n}`")),
            None => Err(ElabError::UnknownSignal {
                loc: loc.clone(),
                name: n.to_string(),
            }),
        }
    }

    fn lvalue_width(&mut self, cx: &ModCtx<'a>, l: &Expr) -> EResult<u32> {
        match &l.kind {
            ExprKind::Concat(parts) => {
                let mut w = 0;
                for p in parts {
                    w += self.lvalue_width(cx, p)?;
                }
                Ok(w)
            }
            ExprKind::Ident(n) => match self.shape_by_name(cx, None, n) {
                Some(s) => Ok(s.width),
                None => Err(ElabError::UnknownSignal {
                    loc: l.loc.clone(),
                    name: n.clone(),
                }),
            },
            _ => self.self_width(cx, None, l),
        }
    }

    fn lvalue_width_proc(&mut self, cx: &ModCtx<'a>, p: &Proc, l: &Expr) -> EResult<u32> {
        match &l.kind {
            ExprKind::Concat(parts) => {
                let mut w = 0;
                for x in parts {
                    w += self.lvalue_width_proc(cx, p, x)?;
                }
                Ok(w)
            }
            ExprKind::Ident(n) => match self.shape_by_name(cx, Some(p), n) {
                Some(s) => Ok(s.width),
                None => Err(ElabError::UnknownSignal {
                    loc: l.loc.clone(),
                    name: n.clone(),
                }),
            },
            _ => self.self_width(cx, Some(p), l),
        }
    }

    /// Drive a (possibly partial) continuous-assignment target with `v`.
    fn drive_lvalue(&mut self, cx: &ModCtx<'a>, l: &Expr, v: SignalId, loc: &Loc) -> EResult<()> {
        match &l.kind {
            ExprKind::Ident(n) => {
                let sym = self.target_sym(cx, n, &l.loc)?;
                self.b.mark_driven(sym.id, loc)?;
                let w = sym.shape.width;
                self.emit(cx, Op::Buffer, vec![v], w, Some(sym.id));
                Ok(())
            }
            ExprKind::Concat(parts) => {
                let mut pos = self.b.width(v);
                for p in parts {
                    let pw = self.lvalue_width(cx, p)?;
                    pos -= pw;
                    let piece = self.emit(cx, Op::Slice { lsb: pos }, vec![v], pw, None);
                    self.drive_lvalue(cx, p, piece, loc)?;
                }
                Ok(())
            }
            ExprKind::Index(b, i) | ExprKind::Slice(b, i, _) => {
                let Some(n) = b.as_ident() else {
                    return unsupported(&l.loc, "nested select on assignment target");
                };
                let sym = self.target_sym(cx, n, &b.loc)?;
                let (lsb, w) = match &l.kind {
                    ExprKind::Index(_, _) => {
                        let Some(c) = self.try_const(cx, i)? else {
                            return unsupported(&l.loc, "dynamic index on a continuous-assignment target");
                        };
                        match sym.shape.array {
                            Some((lo, depth, ew)) => {
                                if c < lo || c - lo >= depth as u64 {
                                    return invalid(&l.loc, "array index out of range");
                                }
                                (((c - lo) * ew as u64) as u32, ew)
                            }
                            None => {
                                if c < sym.shape.lsb || c - sym.shape.lsb >= sym.shape.width as u64 {
                                    return invalid(&l.loc, "bit index out of range");
                                }
                                ((c - sym.shape.lsb) as u32, 1)
                            }
                        }
                    }
                    ExprKind::Slice(_, m, lo) => {
                        let (m, lo) = (self.const_u64(cx, m)?, self.const_u64(cx, lo)?);
                        if lo < sym.shape.lsb || m < lo || m - sym.shape.lsb >= sym.shape.width as u64 {
                            return invalid(&l.loc, "part select out of range");
                        }
                        ((lo - sym.shape.lsb) as u32, (m - lo + 1) as u32)
                    }
                    _ => unreachable!(),
                };
                if self.b.driven.contains_key(&sym.id) {
                    return Err(ElabError::MultiDriver {
                        loc: loc.clone(),
                        signal: self.b.signals[sym.id.index()].name.clone(),
                    });
                }
                let v = self.fit(cx, v, w);
                self.b.partial.entry(sym.id).or_default().push((lsb, w, v, loc.clone()));
                Ok(())
            }
            ExprKind::IndexedSlice { base, start, width, up } => {
                let (Some(s), w) = (self.try_const(cx, start)?, self.const_u64(cx, width)?) else {
                    return unsupported(&l.loc, "dynamic index on a continuous-assignment target");
                };
                let lo = if *up { s } else { s + 1 - w };
                let mk = |v: u64| Expr {
                    kind: ExprKind::Number {
                        size: None,
                        value: Bits::from_u64(v, 64),
                    },
                    loc: l.loc.clone(),
                };
                let slice = Expr {
                    kind: ExprKind::Slice(base.clone(), Box::new(mk(lo + w - 1)), Box::new(mk(lo))),
                    loc: l.loc.clone(),
                };
                self.drive_lvalue(cx, &slice, v, loc)
            }
            _ => invalid(&l.loc, "invalid assignment target"),
        }
    }

    fn always(&mut self, cx: &ModCtx<'a>, a: &AlwaysBlock) -> EResult<()> {
        match &a.sens {
            Sensitivity::None => unsupported(&a.loc, "always block without event control in synthesizable module"),
            Sensitivity::Star => self.comb_block(cx, a),
            Sensitivity::List(list) => {
                let edged = list.iter().filter(|e| e.edge.is_some()).count();
                if edged == 0 {
                    return self.comb_block(cx, a);
                }
                if edged != list.len() || list.len() > 1 {
                    return unsupported(&a.loc, "asynchronous reset or multiple clock edges");
                }
                let ev = &list[0];
                let Some(cname) = ev.expr.as_ident() else {
                    return unsupported(&ev.expr.loc, "clock expression other than a signal name");
                };
                let clock = match self.resolve(cx, None, cname, &ev.expr.loc)? {
                    Resolved::Signal(s, shape) if shape.array.is_none() => s,
                    _ => return invalid(&ev.expr.loc, format!("`{cname}` cannot be used as a clock")),
                };
                let polarity = match ev.edge {
                    Some(Edge::Negedge) => Polarity::Negedge,
                    _ => Polarity::Posedge,
                };
                let mut st = Proc {
                    mode: Mode::Clocked,
                    env: BTreeMap::new(),
                    locals: HashMap::new(),
                };
                self.exec(cx, &a.body, &mut st)?;
                for (name, var) in st.env {
                    let sym = cx.syms[&name].clone();
                    self.b.mark_driven(sym.id, &a.loc)?;
                    let w = sym.shape.width;
                    self.emit(cx, Op::Buffer, vec![var.val], w, Some(sym.id));
                    self.b.clocks.insert(sym.id, ClockPin { clock, polarity });
                }
                Ok(())
            }
        }
    }

    fn comb_block(&mut self, cx: &ModCtx<'a>, a: &AlwaysBlock) -> EResult<()> {
        if let Some(l) = a.body.first_timing_loc() {
            return unsupported(&l, "delay inside synthesizable module");
        }
        let mut st = Proc {
            mode: Mode::Comb,
            env: BTreeMap::new(),
            locals: HashMap::new(),
        };
        self.exec(cx, &a.body, &mut st)?;
        for (name, var) in st.env {
            let sym = cx.syms[&name].clone();
            if !var.cov.is_ones() {
                return Err(ElabError::Latch {
                    loc: a.loc.clone(),
                    signal: name,
                });
            }
            self.b.mark_driven(sym.id, &a.loc)?;
            let w = sym.shape.width;
            self.emit(cx, Op::Buffer, vec![var.val], w, Some(sym.id));
        }
        Ok(())
    }

    fn initial(&mut self, cx: &ModCtx<'a>, s: &Stmt) -> EResult<()> {
        match &s.kind {
            StmtKind::Block(v) => {
                for x in v {
                    self.initial(cx, x)?;
                }
                Ok(())
            }
            StmtKind::Null => Ok(()),
            StmtKind::Blocking(l, r) | StmtKind::NonBlocking(l, r) => {
                let (name, sel) = match &l.kind {
                    ExprKind::Ident(n) => (n, None),
                    ExprKind::Index(b, i) if b.as_ident().is_some() => (
                        b.as_ident()
                            .map(|_| ())
                            .and(match &b.kind {
                                ExprKind::Ident(n) => Some(n),
                                _ => None,
                            })
                            .unwrap(),
                        Some(i),
                    ),
                    _ => return unsupported(&l.loc, "initial assignment target"),
                };
                let sym = self.target_sym(cx, name, &l.loc)?;
                let sig = &self.b.signals[sym.id.index()];
                if sig.kind != SignalKind::Register {
                    return unsupported(&l.loc, "initial value for a signal that is not a register");
                }
                let mut cur = sig.init_value();
                match sel {
                    None => cur = self.const_eval(cx, r, sym.shape.width)?,
                    Some(i) => {
                        let idx = self.const_u64(cx, i)?;
                        let (lsb, w) = match sym.shape.array {
                            Some((lo, depth, ew)) => {
                                if idx < lo || idx - lo >= depth as u64 {
                                    return invalid(&l.loc, "array index out of range");
                                }
                                ((idx - lo) * ew as u64, ew)
                            }
                            None => {
                                if idx < sym.shape.lsb || idx - sym.shape.lsb >= sym.shape.width as u64 {
                                    return invalid(&l.loc, "bit index out of range");
                                }
                                (idx - sym.shape.lsb, 1)
                            }
                        };
                        let v = self.const_eval(cx, r, w)?;
                        ops::set_bits(cur.words_mut(), lsb, v.words(), w);
                    }
                }
                self.b.signals[sym.id.index()].init = Some(cur);
                Ok(())
            }
            StmtKind::Delay(..) | StmtKind::Wait(..) => unsupported(&s.loc, "delay inside synthesizable module"),
            _ => unsupported(
                &s.loc,
                "initial block in a synthesizable module may only assign constants",
            ),
        }
    }

    fn child(&mut self, cx: &ModCtx<'a>, inst: &Instance) -> EResult<()> {
        let Some(&ast) = self.mods.get(inst.module.as_str()) else {
            return invalid(&inst.loc, format!("unknown module `{}`", inst.module));
        };
        // evaluate overrides in the parent scope
        let mut overrides = Vec::new();
        for c in &inst.params {
            let expr = match &c.expr {
                Some(e) => {
                    let w = self.self_width(cx, None, e)?;
                    let v = self.const_eval(cx, e, w)?;
                    Some(Expr {
                        kind: ExprKind::Number {
                            size: Some(w),
                            value: v,
                        },
                        loc: e.loc.clone(),
                    })
                }
                None => None,
            };
            overrides.push(Connection {
                name: c.name.clone(),
                expr,
                loc: c.loc.clone(),
            });
        }
        let mut scope = cx.scope.clone();
        scope.push(inst.name.clone());
        let syms = self.instance(ast, &overrides, scope, false, &inst.loc)?;
        let mut bound: HashSet<String> = HashSet::new();
        for (k, c) in inst.conns.iter().enumerate() {
            let pname = match &c.name {
                Some(n) => n.clone(),
                None => match ast.ports.get(k) {
                    Some(p) => p.name.clone(),
                    None => return invalid(&c.loc, format!("too many port connections for `{}`", ast.name)),
                },
            };
            if !ast.ports.iter().any(|p| p.name == pname) {
                return Err(ElabError::UnknownPort {
                    loc: c.loc.clone(),
                    module: ast.name.clone(),
                    port: pname,
                });
            }
            if !bound.insert(pname.clone()) {
                return invalid(&c.loc, format!("port `{pname}` connected twice"));
            }
            let psym = syms[&pname].clone();
            let is_input = self.port_dir(ast, &pname) == Direction::Input;
            match (&c.expr, is_input) {
                (Some(e), true) => {
                    self.b.mark_driven(psym.id, &c.loc)?;
                    let rw = self.self_width(cx, None, e)?;
                    self.lower(cx, None, e, psym.shape.width.max(rw), Some(psym.id))?;
                }
                (Some(e), false) => {
                    let lw = self.lvalue_width(cx, e)?;
                    let v = self.fit(cx, psym.id, lw);
                    self.drive_lvalue(cx, e, v, &c.loc)?;
                }
                (None, true) => {
                    self.b.mark_driven(psym.id, &c.loc)?;
                    self.constant(cx, Bits::zero(psym.shape.width), Some(psym.id));
                }
                (None, false) => {}
            }
        }
        for p in &ast.ports {
            if !bound.contains(&p.name) && self.port_dir(ast, &p.name) == Direction::Input {
                let psym = syms[&p.name].clone();
                self.b.mark_driven(psym.id, &inst.loc)?;
                self.constant(cx, Bits::zero(psym.shape.width), Some(psym.id));
            }
        }
        Ok(())
    }

    fn port_dir(&self, ast: &ModuleAst, name: &str) -> Direction {
        for p in &ast.ports {
            if p.name == name {
                if let Some(d) = p.dir {
                    return d;
                }
            }
        }
        for item in &ast.items {
            if let Item::Port(p) = item {
                if p.name == name {
                    return p.dir.unwrap_or(Direction::Input);
                }
            }
        }
        Direction::Input
    }

    // -----------------------------------------------------------------------
    // Procedural statements

    fn var_shape(&self, cx: &ModCtx<'a>, st: &Proc, name: &str, loc: &Loc) -> EResult<Shape> {
        if let Some(s) = st.locals.get(name) {
            return Ok(*s);
        }
        if st.mode == Mode::Function {
            // functions may not write module signals
            if cx.syms.contains_key(name) {
                return unsupported(loc, "function assigning a module signal");
            }
        }
        match cx.syms.get(name) {
            Some(s) => {
                if self.b.signals[s.id.index()].kind == SignalKind::Input {
                    return invalid(loc, format!("assignment to input `{name}`"));
                }
                Ok(s.shape)
            }
            None => Err(ElabError::UnknownSignal {
                loc: loc.clone(),
                name: name.to_string(),
            }),
        }
    }

    /// Value of a variable that has not been assigned on the current path.
    fn fallback(&mut self, cx: &ModCtx<'a>, st: &Proc, name: &str) -> Var {
        if let Some(s) = st.locals.get(name) {
            let z = self.constant(cx, Bits::zero(s.width), None);
            return Var {
                val: z,
                cov: Bits::zero(s.width),
            };
        }
        let s = &cx.syms[name];
        let cov = if st.mode == Mode::Clocked {
            Bits::ones(s.shape.width)
        } else {
            Bits::zero(s.shape.width)
        };
        Var { val: s.id, cov }
    }

    fn current(&mut self, cx: &ModCtx<'a>, st: &Proc, name: &str) -> Var {
        match st.env.get(name) {
            Some(v) => v.clone(),
            None => self.fallback(cx, st, name),
        }
    }

    fn exec(&mut self, cx: &ModCtx<'a>, s: &Stmt, st: &mut Proc) -> EResult<()> {
        match &s.kind {
            StmtKind::Null => Ok(()),
            StmtKind::Block(v) => {
                for x in v {
                    self.exec(cx, x, st)?;
                }
                Ok(())
            }
            StmtKind::Blocking(l, r) => {
                if st.mode == Mode::Clocked {
                    return unsupported(&s.loc, "blocking assignment in clocked block");
                }
                self.assign(cx, st, l, r)
            }
            StmtKind::NonBlocking(l, r) => {
                if st.mode != Mode::Clocked {
                    return unsupported(&s.loc, "nonblocking assignment outside a clocked block");
                }
                self.assign(cx, st, l, r)
            }
            StmtKind::If(c, t, e) => {
                let cw = self.self_width(cx, Some(st), c)?;
                let cond = self.lower_exact(cx, Some(st), c, cw)?;
                let mut ts = st.clone();
                self.exec(cx, t, &mut ts)?;
                let mut es = st.clone();
                if let Some(e) = e {
                    self.exec(cx, e, &mut es)?;
                }
                let keys: BTreeSet<String> = ts.env.keys().chain(es.env.keys()).cloned().collect();
                for k in keys {
                    let a = self.current(cx, &ts, &k);
                    let b = self.current(cx, &es, &k);
                    if a.val == b.val {
                        st.env.insert(
                            k,
                            Var {
                                val: a.val,
                                cov: and_bits(&a.cov, &b.cov),
                            },
                        );
                        continue;
                    }
                    let w = self.var_shape(cx, st, &k, &s.loc)?.width;
                    let v = self.b.version(&cx.prefix, &k, &cx.scope, w);
                    self.b.element(Op::Mux, vec![cond, a.val, b.val], v);
                    st.env.insert(
                        k,
                        Var {
                            val: v,
                            cov: and_bits(&a.cov, &b.cov),
                        },
                    );
                }
                Ok(())
            }
            StmtKind::Case { sel, arms, default } => {
                let mut sw = self.self_width(cx, Some(st), sel)?;
                for a in arms {
                    for l in &a.labels {
                        sw = sw.max(self.self_width(cx, Some(st), l)?);
                    }
                }
                let selv = self.lower_exact(cx, Some(st), sel, sw)?;
                let mut labels = Vec::new();
                let mut seen = HashSet::new();
                for a in arms {
                    let mut ls = Vec::new();
                    for l in &a.labels {
                        if !is_const_expr(cx, l) {
                            return unsupported(&l.loc, "non-constant case label");
                        }
                        let v = self.const_eval(cx, l, sw)?;
                        seen.insert(v.clone());
                        ls.push(v);
                    }
                    labels.push(ls);
                }
                let mut states = Vec::new();
                for a in arms {
                    let mut x = st.clone();
                    self.exec(cx, &a.body, &mut x)?;
                    states.push(x);
                }
                let full = sw <= 16 && seen.len() as u64 == 1u64 << sw;
                let dstate = match default {
                    Some(d) => {
                        let mut x = st.clone();
                        self.exec(cx, d, &mut x)?;
                        x
                    }
                    None if full && !states.is_empty() => states.last().unwrap().clone(),
                    None => st.clone(),
                };
                states.push(dstate);
                let keys: BTreeSet<String> = states.iter().flat_map(|x| x.env.keys().cloned()).collect();
                for k in keys {
                    let vals: Vec<Var> = states.iter().map(|x| self.current(cx, x, &k)).collect();
                    let mut cov = vals[0].cov.clone();
                    for v in &vals[1..] {
                        cov = and_bits(&cov, &v.cov);
                    }
                    if vals.iter().all(|v| v.val == vals[0].val) {
                        st.env.insert(k, Var { val: vals[0].val, cov });
                        continue;
                    }
                    let w = self.var_shape(cx, st, &k, &s.loc)?.width;
                    let v = self.b.version(&cx.prefix, &k, &cx.scope, w);
                    let mut ins = vec![selv];
                    ins.extend(vals.iter().map(|x| x.val));
                    self.b.element(Op::Case { arms: labels.clone() }, ins, v);
                    st.env.insert(k, Var { val: v, cov });
                }
                Ok(())
            }
            StmtKind::Delay(..) | StmtKind::Wait(..) => unsupported(&s.loc, "delay inside synthesizable module"),
            StmtKind::Forever(_) => unsupported(&s.loc, "forever loop in synthesizable module"),
            StmtKind::Repeat(..) => unsupported(&s.loc, "repeat loop in synthesizable module"),
            StmtKind::SysTask(n, _) => unsupported(&s.loc, &format!("system task `${n}` in synthesizable module")),
        }
    }

    fn assign(&mut self, cx: &ModCtx<'a>, st: &mut Proc, l: &Expr, r: &Expr) -> EResult<()> {
        let lw = self.lvalue_width_proc(cx, st, l)?;
        let rw = self.self_width(cx, Some(st), r)?;
        if let ExprKind::Ident(n) = &l.kind {
            let shape = self.var_shape(cx, st, n, &l.loc)?;
            if shape.array.is_some() {
                return unsupported(&l.loc, "whole-array assignment");
            }
            let v = self.b.version(&cx.prefix, n, &cx.scope, shape.width);
            self.lower(cx, Some(st), r, lw.max(rw), Some(v))?;
            st.env.insert(
                n.clone(),
                Var {
                    val: v,
                    cov: Bits::ones(shape.width),
                },
            );
            return Ok(());
        }
        let v = self.lower(cx, Some(st), r, lw.max(rw), None)?;
        let v = self.fit(cx, v, lw);
        self.store(cx, st, l, v)
    }

    /// Store `v` (already of the target width) into a procedural target.
    fn store(&mut self, cx: &ModCtx<'a>, st: &mut Proc, l: &Expr, v: SignalId) -> EResult<()> {
        match &l.kind {
            ExprKind::Ident(n) => {
                let shape = self.var_shape(cx, st, n, &l.loc)?;
                let nv = self.b.version(&cx.prefix, n, &cx.scope, shape.width);
                self.b.element(Op::Buffer, vec![v], nv);
                st.env.insert(
                    n.clone(),
                    Var {
                        val: nv,
                        cov: Bits::ones(shape.width),
                    },
                );
                Ok(())
            }
            ExprKind::Concat(parts) => {
                let mut pos = self.b.width(v);
                for p in parts {
                    let pw = self.lvalue_width_proc(cx, st, p)?;
                    pos -= pw;
                    let piece = self.emit(cx, Op::Slice { lsb: pos }, vec![v], pw, None);
                    self.store(cx, st, p, piece)?;
                }
                Ok(())
            }
            ExprKind::Index(b, i) => {
                let Some(n) = b.as_ident() else {
                    return unsupported(&l.loc, "nested select on assignment target");
                };
                let shape = self.var_shape(cx, st, n, &b.loc)?;
                let cur = self.current(cx, st, n);
                let (offset, ew) = match shape.array {
                    Some((lo, _, ew)) => (lo, ew),
                    None => (shape.lsb, 1),
                };
                let mut cov = cur.cov.clone();
                if let Some(c) = self.try_const(cx, i)? {
                    if c >= offset {
                        let lsb = (c - offset) * ew as u64;
                        if lsb + ew as u64 <= shape.width as u64 {
                            ops::set_bits(cov.words_mut(), lsb, Bits::ones(ew).words(), ew);
                            let parts = self.splice(cx, cur.val, shape.width, lsb as u32, ew, v);
                            return self.set_var(cx, st, n, shape.width, parts, cov);
                        }
                    }
                    // out of range writes are dropped
                    return Ok(());
                }
                let idx = self.lower_index(cx, Some(st), i, offset)?;
                let nv = self.b.version(&cx.prefix, n, &cx.scope, shape.width);
                self.b
                    .element(Op::IndexAssign { elem_width: ew }, vec![cur.val, idx, v], nv);
                st.env.insert(n.to_string(), Var { val: nv, cov });
                Ok(())
            }
            ExprKind::Slice(b, m, lo) => {
                let Some(n) = b.as_ident() else {
                    return unsupported(&l.loc, "nested select on assignment target");
                };
                let shape = self.var_shape(cx, st, n, &b.loc)?;
                if shape.array.is_some() {
                    return unsupported(&l.loc, "part select of an array");
                }
                let (m, lo) = (self.const_u64(cx, m)?, self.const_u64(cx, lo)?);
                if lo < shape.lsb || m < lo || m - shape.lsb >= shape.width as u64 {
                    return invalid(&l.loc, "part select out of range");
                }
                let cur = self.current(cx, st, n);
                let lsb = (lo - shape.lsb) as u32;
                let w = (m - lo + 1) as u32;
                let mut cov = cur.cov.clone();
                ops::set_bits(cov.words_mut(), lsb as u64, Bits::ones(w).words(), w);
                let parts = self.splice(cx, cur.val, shape.width, lsb, w, v);
                self.set_var(cx, st, n, shape.width, parts, cov)
            }
            ExprKind::IndexedSlice { base, start, width, up } => {
                let Some(n) = base.as_ident() else {
                    return unsupported(&l.loc, "nested select on assignment target");
                };
                let shape = self.var_shape(cx, st, n, &base.loc)?;
                if shape.array.is_some() {
                    return unsupported(&l.loc, "part select of an array");
                }
                let w = self.const_u64(cx, width)? as u32;
                if let Some(s) = self.try_const(cx, start)? {
                    let lo = if *up { s } else { s + 1 - w as u64 };
                    let mk = |v: u64| Expr {
                        kind: ExprKind::Number {
                            size: None,
                            value: Bits::from_u64(v, 64),
                        },
                        loc: l.loc.clone(),
                    };
                    let slice = Expr {
                        kind: ExprKind::Slice(base.clone(), Box::new(mk(lo + w as u64 - 1)), Box::new(mk(lo))),
                        loc: l.loc.clone(),
                    };
                    return self.store(cx, st, &slice, v);
                }
                // new = (cur & ~(mask << s)) | ((v & mask) << s)
                let cur = self.current(cx, st, n);
                let mut st_expr = start.as_ref().clone();
                if !*up {
                    st_expr = Expr {
                        kind: ExprKind::Binary(
                            BinaryOp::Sub,
                            Box::new(st_expr),
                            Box::new(Expr {
                                kind: ExprKind::Number {
                                    size: None,
                                    value: Bits::from_u64(w as u64 - 1, 32),
                                },
                                loc: l.loc.clone(),
                            }),
                        ),
                        loc: l.loc.clone(),
                    };
                }
                let amt = self.lower_index(cx, Some(st), &st_expr, shape.lsb)?;
                let width = shape.width;
                let mask = self.constant(cx, Bits::ones(w).resize(width), None);
                let sm = self.emit(cx, Op::Shl, vec![mask, amt], width, None);
                let inv = self.emit(cx, Op::Not, vec![sm], width, None);
                let kept = self.emit(cx, Op::And, vec![cur.val, inv], width, None);
                let vm = self.emit(cx, Op::Buffer, vec![v], width, None);
                let vs = self.emit(cx, Op::Shl, vec![vm, amt], width, None);
                let nv = self.b.version(&cx.prefix, n, &cx.scope, width);
                self.b.element(Op::Or, vec![kept, vs], nv);
                st.env.insert(n.to_string(), Var { val: nv, cov: cur.cov });
                Ok(())
            }
            _ => invalid(&l.loc, "invalid assignment target"),
        }
    }

    /// Operands (msb first) of `cur` with bits `[lsb, lsb+w)` replaced by `v`.
    fn splice(&mut self, cx: &ModCtx<'a>, cur: SignalId, width: u32, lsb: u32, w: u32, v: SignalId) -> Vec<SignalId> {
        let mut parts = Vec::new();
        if lsb + w < width {
            parts.push(self.emit(cx, Op::Slice { lsb: lsb + w }, vec![cur], width - lsb - w, None));
        }
        parts.push(v);
        if lsb > 0 {
            parts.push(self.emit(cx, Op::Slice { lsb: 0 }, vec![cur], lsb, None));
        }
        parts
    }

    fn set_var(
        &mut self,
        cx: &ModCtx<'a>,
        st: &mut Proc,
        n: &str,
        width: u32,
        parts: Vec<SignalId>,
        cov: Bits,
    ) -> EResult<()> {
        let nv = self.b.version(&cx.prefix, n, &cx.scope, width);
        if parts.len() == 1 {
            self.b.element(Op::Buffer, parts, nv);
        } else {
            self.b.element(Op::Concat, parts, nv);
        }
        st.env.insert(n.to_string(), Var { val: nv, cov });
        Ok(())
    }
}

fn and_bits(a: &Bits, b: &Bits) -> Bits {
    ops::eval_bits(&Op::And, a.width(), &[a, b])
}

fn is_const_expr(cx: &ModCtx<'_>, e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Number { .. } => true,
        ExprKind::Ident(n) => cx.params.contains_key(n) && !cx.syms.contains_key(n),
        ExprKind::Unary(_, x) => is_const_expr(cx, x),
        ExprKind::Binary(_, l, r) => is_const_expr(cx, l) && is_const_expr(cx, r),
        ExprKind::Ternary(c, t, f) => is_const_expr(cx, c) && is_const_expr(cx, t) && is_const_expr(cx, f),
        ExprKind::Concat(v) => v.iter().all(|x| is_const_expr(cx, x)),
        ExprKind::Replicate(n, v) => is_const_expr(cx, n) && v.iter().all(|x| is_const_expr(cx, x)),
        _ => false,
    }
}

pub(crate) fn unary_op(op: UnaryOp) -> Op {
    match op {
        UnaryOp::LogicNot => Op::LogicNot,
        UnaryOp::RedAnd => Op::RedAnd,
        UnaryOp::RedNand => Op::RedNand,
        UnaryOp::RedOr => Op::RedOr,
        UnaryOp::RedNor => Op::RedNor,
        UnaryOp::RedXor => Op::RedXor,
        UnaryOp::RedXnor => Op::RedXnor,
        UnaryOp::BitNot => Op::Not,
        UnaryOp::Plus => Op::Buffer,
        UnaryOp::Neg => Op::Sub,
    }
}

pub(crate) fn binary_op(op: BinaryOp) -> Op {
    match op {
        BinaryOp::Add => Op::Add,
        BinaryOp::Sub => Op::Sub,
        BinaryOp::Mul => Op::Mul,
        BinaryOp::Div => Op::Div,
        BinaryOp::Mod => Op::Mod,
        BinaryOp::Shl => Op::Shl,
        BinaryOp::Shr => Op::Shr,
        BinaryOp::Lt => Op::Lt,
        BinaryOp::Le => Op::Le,
        BinaryOp::Gt => Op::Gt,
        BinaryOp::Ge => Op::Ge,
        BinaryOp::Eq => Op::Eq,
        BinaryOp::Ne => Op::Ne,
        BinaryOp::BitAnd => Op::And,
        BinaryOp::BitXor => Op::Xor,
        BinaryOp::BitXnor => Op::Xnor,
        BinaryOp::BitOr => Op::Or,
        BinaryOp::LogicAnd => Op::LogicAnd,
        BinaryOp::LogicOr => Op::LogicOr,
    }
}

/// Names assigned in clocked (`clocked = true`) or combinational always blocks.
fn assigned_names(ast: &ModuleAst, clocked: bool) -> HashSet<String> {
    fn walk(s: &Stmt, out: &mut HashSet<String>) {
        match &s.kind {
            StmtKind::Blocking(l, _) | StmtKind::NonBlocking(l, _) => targets(l, out),
            StmtKind::Block(v) => v.iter().for_each(|x| walk(x, out)),
            StmtKind::If(_, t, e) => {
                walk(t, out);
                if let Some(e) = e {
                    walk(e, out);
                }
            }
            StmtKind::Case { arms, default, .. } => {
                arms.iter().for_each(|a| walk(&a.body, out));
                if let Some(d) = default {
                    walk(d, out);
                }
            }
            StmtKind::Delay(_, Some(b)) | StmtKind::Wait(_, Some(b)) => walk(b, out),
            StmtKind::Forever(b) | StmtKind::Repeat(_, b) => walk(b, out),
            _ => {}
        }
    }
    fn targets(l: &Expr, out: &mut HashSet<String>) {
        match &l.kind {
            ExprKind::Concat(v) => v.iter().for_each(|x| targets(x, out)),
            _ => {
                if let Some(n) = l.base_name() {
                    out.insert(n.to_string());
                }
            }
        }
    }
    let mut out = HashSet::new();
    for item in &ast.items {
        if let Item::Always(a) = item {
            let is_clocked = matches!(&a.sens, Sensitivity::List(l) if l.iter().any(|e| e.edge.is_some()));
            if is_clocked == clocked {
                walk(&a.body, &mut out);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_text;

    fn elab(src: &str, top: &str) -> EResult<FlatDesign> {
        let mods = parse_text("t.v", src).unwrap();
        elaborate(&mods, top)
    }

    #[test]
    fn parameter_override_sets_child_width() {
        let d = elab(
            "module add #(parameter WIDTH = 4) (input [WIDTH-1:0] a, b, output [WIDTH-1:0] sum);
               assign sum = a + b;
             endmodule
             module top(input [7:0] x, y, output [7:0] s);
               add #(.WIDTH(8)) u0 (.a(x), .b(y), .sum(s));
             endmodule",
            "top",
        )
        .unwrap();
        let s = d.signal(d.find_signal("top_u0_sum").unwrap());
        assert_eq!(s.width, 8);
        assert_eq!(s.scope, vec!["top".to_string(), "u0".to_string()]);
    }

    #[test]
    fn blocking_chain_uses_versioned_wire() {
        let d = elab(
            "module top(input a, b, output reg y); reg t;
               always @* begin t = a; y = t & b; end
             endmodule",
            "top",
        )
        .unwrap();
        let tv = d.find_signal("top_t_v1").expect("versioned wire");
        let and = d.elements.iter().find(|e| e.op == Op::And).unwrap();
        assert!(and.inputs.contains(&tv));
        let buf = d.elements.iter().find(|e| e.output == tv).unwrap();
        assert_eq!(buf.op, Op::Buffer);
        assert_eq!(buf.inputs, vec![d.find_signal("top_a").unwrap()]);
    }

    #[test]
    fn enable_register_recirculates() {
        let d = elab(
            "module top(input clk, en, d, output reg q); always @(posedge clk) if (en) q <= d; endmodule",
            "top",
        )
        .unwrap();
        let q = d.find_signal("top_q").unwrap();
        assert_eq!(d.signal(q).kind, SignalKind::Register);
        assert!(d.signal(q).port_output);
        assert_eq!(d.clocks[&q].clock, d.find_signal("top_clk").unwrap());
        let mux = d.elements.iter().find(|e| e.op == Op::Mux).unwrap();
        assert_eq!(mux.inputs[0], d.find_signal("top_en").unwrap());
        let through = |s: SignalId| {
            d.elements
                .iter()
                .find(|e| e.output == s && e.op == Op::Buffer)
                .map(|e| e.inputs[0])
                .unwrap_or(s)
        };
        assert_eq!(through(mux.inputs[1]), d.find_signal("top_d").unwrap());
        assert_eq!(mux.inputs[2], q);
    }

    #[test]
    fn latch_is_rejected() {
        let e = elab(
            "module top(input a, b, output reg y); always @* if (a) y = b; endmodule",
            "top",
        )
        .unwrap_err();
        assert!(matches!(e, ElabError::Latch { .. }), "{e}");
    }

    #[test]
    fn recursion_is_reported() {
        let e = elab(
            "module a(input x); b u(.x(x)); endmodule module b(input x); a u(.x(x)); endmodule",
            "a",
        )
        .unwrap_err();
        assert!(matches!(e, ElabError::RecursiveInstantiation { .. }));
    }

    #[test]
    fn double_driver_is_reported() {
        let e = elab(
            "module top(input a, output y); assign y = a; assign y = ~a; endmodule",
            "top",
        )
        .unwrap_err();
        assert!(matches!(e, ElabError::MultiDriver { .. }));
    }

    #[test]
    fn unresolved_parameter() {
        let e = elab("module top(input [N:0] a); endmodule", "top").unwrap_err();
        assert!(matches!(e, ElabError::UnresolvedParameter { .. }));
    }

    #[test]
    fn name_collision_gets_suffix() {
        let d = elab(
            "module c(input x, output y); assign y = x; endmodule
             module top(input a, output b, output u0_y); wire t; c u0(.x(a), .y(t)); assign b = t; assign u0_y = a; endmodule",
            "top",
        )
        .unwrap();
        assert!(d.find_signal("top_u0_y").is_some());
        assert!(d.find_signal("top_u0_y__1").is_some());
    }

    #[test]
    fn full_case_needs_no_default() {
        elab(
            "module top(input [1:0] s, input a, b, c, d, output reg y);
               always @* case (s) 2'd0: y = a; 2'd1: y = b; 2'd2: y = c; 2'd3: y = d; endcase
             endmodule",
            "top",
        )
        .unwrap();
    }
}
