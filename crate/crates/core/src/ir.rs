//! Flattened design graph: signals, combinational elements and register clocks.
//!
//! Every signal id equals its index in [`FlatDesign::signals`] and every
//! element id equals its index in [`FlatDesign::elements`]. An element whose
//! output is a register drives that register's data pin; it is the register's
//! next-state computation, not an assignment to the register itself.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::Bits;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SignalId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ElementId(pub u32);

impl SignalId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl ElementId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for SignalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalKind {
    Input,
    Output,
    Register,
    Wire,
}

impl SignalKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SignalKind::Input => "input",
            SignalKind::Output => "output",
            SignalKind::Register => "register",
            SignalKind::Wire => "wire",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Posedge,
    Negedge,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signal {
    pub id: SignalId,
    /// Hierarchy-prefixed unique name, e.g. `top_u0_sum`.
    pub name: String,
    /// Instance path the signal was declared in, top module first.
    pub scope: Vec<String>,
    pub kind: SignalKind,
    /// Total number of bits (for arrays: `depth * element width`).
    pub width: u32,
    /// 0 = single bit, 1 = vector, 2 = array of vectors.
    pub dims: u8,
    /// Number of array elements; 1 unless `dims == 2`.
    pub depth: u32,
    pub init: Option<Bits>,
    /// Register that is also a port of the top module.
    pub port_output: bool,
}

impl Signal {
    pub fn elem_width(&self) -> u32 {
        self.width / self.depth.max(1)
    }

    pub fn is_array(&self) -> bool {
        self.dims == 2
    }

    /// Visible to the outside of the design (trace/VCD defaults).
    pub fn is_observable(&self) -> bool {
        matches!(self.kind, SignalKind::Input | SignalKind::Output | SignalKind::Register)
    }

    pub fn init_value(&self) -> Bits {
        self.init
            .as_ref()
            .map(|b| b.resize(self.width))
            .unwrap_or_else(|| Bits::zero(self.width))
    }

    /// Name relative to the top module (`top_u0_sum` -> `u0_sum`).
    pub fn local_name(&self) -> &str {
        match self.scope.first() {
            Some(top) => self
                .name
                .strip_prefix(top.as_str())
                .and_then(|s| s.strip_prefix('_'))
                .unwrap_or(&self.name),
            None => &self.name,
        }
    }
}

/// Combinational operator kinds (the RTL-to-C mapping rows plus plumbing).
///
/// Operand conventions, for an element of output width `W`:
/// arithmetic, bitwise, shifts, `Mux`, `Case` and `Buffer` zero-extend or
/// truncate their data operands to `W`; comparisons, logical operators and
/// reductions look at operands at their own width and produce one bit.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    Buffer,
    Const(Bits),
    Not,
    And,
    Or,
    Xor,
    Xnor,
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Shl,
    Shr,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    LogicNot,
    LogicAnd,
    LogicOr,
    RedAnd,
    RedOr,
    RedXor,
    RedNand,
    RedNor,
    RedXnor,
    /// `[cond, then, else]`
    Mux,
    /// `[sel, arm_0 .. arm_n-1, default]`; `arms[k]` lists the labels of arm k.
    Case {
        arms: Vec<Vec<Bits>>,
    },
    /// Operands most significant first.
    Concat,
    /// Constant part select starting at bit `lsb`.
    Slice {
        lsb: u32,
    },
    /// `[vector, index]`: element `index` of width `elem_width`.
    Index {
        elem_width: u32,
    },
    /// `[vector, index, value]`: vector with element `index` replaced.
    IndexAssign {
        elem_width: u32,
    },
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Buffer => "buf",
            Op::Const(_) => "const",
            Op::Not => "not",
            Op::And => "and",
            Op::Or => "or",
            Op::Xor => "xor",
            Op::Xnor => "xnor",
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Div => "div",
            Op::Mod => "mod",
            Op::Shl => "shl",
            Op::Shr => "shr",
            Op::Eq => "eq",
            Op::Ne => "ne",
            Op::Lt => "lt",
            Op::Le => "le",
            Op::Gt => "gt",
            Op::Ge => "ge",
            Op::LogicNot => "lnot",
            Op::LogicAnd => "land",
            Op::LogicOr => "lor",
            Op::RedAnd => "redand",
            Op::RedOr => "redor",
            Op::RedXor => "redxor",
            Op::RedNand => "rednand",
            Op::RedNor => "rednor",
            Op::RedXnor => "redxnor",
            Op::Mux => "mux",
            Op::Case { .. } => "case",
            Op::Concat => "concat",
            Op::Slice { .. } => "slice",
            Op::Index { .. } => "index",
            Op::IndexAssign { .. } => "index_assign",
        }
    }

    /// Expected operand count, `None` for variadic operators.
    pub fn arity(&self) -> Option<usize> {
        Some(match self {
            Op::Const(_) => 0,
            Op::Buffer
            | Op::Not
            | Op::LogicNot
            | Op::RedAnd
            | Op::RedOr
            | Op::RedXor
            | Op::RedNand
            | Op::RedNor
            | Op::RedXnor
            | Op::Slice { .. } => 1,
            Op::Mux | Op::IndexAssign { .. } => 3,
            Op::Case { arms } => arms.len() + 2,
            Op::Concat => return None,
            _ => 2,
        })
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Op::Const(_))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CombElement {
    pub id: ElementId,
    pub op: Op,
    pub inputs: Vec<SignalId>,
    pub output: SignalId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClockPin {
    pub clock: SignalId,
    pub polarity: Polarity,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FlatDesign {
    pub top: String,
    pub signals: Vec<Signal>,
    pub elements: Vec<CombElement>,
    /// Register -> clock pin.
    pub clocks: BTreeMap<SignalId, ClockPin>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IrError {
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("dangling reference to id {id} at {path}")]
    DanglingReference { path: String, id: u32 },
    #[error("signal `{signal}` has more than one driver")]
    MultiDriver { signal: String },
    #[error("element {element} ({op}) has {got} operands, expected {expected}")]
    Arity {
        element: u32,
        op: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("invalid design: {0}")]
    Invalid(String),
}

impl FlatDesign {
    pub fn signal(&self, id: SignalId) -> &Signal {
        &self.signals[id.index()]
    }

    pub fn element(&self, id: ElementId) -> &CombElement {
        &self.elements[id.index()]
    }

    pub fn find_signal(&self, name: &str) -> Option<SignalId> {
        self.signals.iter().find(|s| s.name == name).map(|s| s.id)
    }

    /// Resolve either a flat name or a name relative to the top module.
    pub fn lookup(&self, name: &str) -> Option<SignalId> {
        self.find_signal(name)
            .or_else(|| self.find_signal(&format!("{}_{}", self.top, name)))
    }

    /// Driving element of each signal.
    pub fn drivers(&self) -> Vec<Option<ElementId>> {
        let mut d = vec![None; self.signals.len()];
        for e in &self.elements {
            d[e.output.index()] = Some(e.id);
        }
        d
    }

    /// Elements reading each signal (deduplicated, ascending).
    pub fn readers(&self) -> Vec<Vec<ElementId>> {
        let mut r: Vec<Vec<ElementId>> = vec![Vec::new(); self.signals.len()];
        for e in &self.elements {
            for &i in &e.inputs {
                let list = &mut r[i.index()];
                if list.last() != Some(&e.id) {
                    list.push(e.id);
                }
            }
        }
        r
    }

    pub fn registers(&self) -> impl Iterator<Item = &Signal> {
        self.signals.iter().filter(|s| s.kind == SignalKind::Register)
    }

    pub fn inputs(&self) -> impl Iterator<Item = &Signal> {
        self.signals.iter().filter(|s| s.kind == SignalKind::Input)
    }

    pub fn outputs(&self) -> impl Iterator<Item = &Signal> {
        self.signals.iter().filter(|s| s.kind == SignalKind::Output)
    }

    /// Signals whose values appear in traces: inputs, registers and outputs.
    pub fn observable(&self) -> Vec<SignalId> {
        self.signals
            .iter()
            .filter(|s| s.is_observable())
            .map(|s| s.id)
            .collect()
    }

    /// Check the structural invariants: dense ids, single drivers, operand
    /// arity, a clock for every register and a driver for every register,
    /// output and read wire.
    pub fn validate(&self) -> Result<(), IrError> {
        for (i, s) in self.signals.iter().enumerate() {
            if s.id.index() != i {
                return Err(IrError::Invalid(format!("signal `{}` has non-dense id", s.name)));
            }
            if s.width == 0 {
                return Err(IrError::Invalid(format!("signal `{}` has zero width", s.name)));
            }
            if s.depth == 0 || s.width % s.depth != 0 || (s.dims != 2 && s.depth != 1) {
                return Err(IrError::Invalid(format!(
                    "signal `{}` has inconsistent array shape",
                    s.name
                )));
            }
        }
        let n = self.signals.len() as u32;
        let mut driven = vec![false; self.signals.len()];
        for (i, e) in self.elements.iter().enumerate() {
            if e.id.index() != i {
                return Err(IrError::Invalid(format!("element {} has non-dense id", e.id.0)));
            }
            for s in e.inputs.iter().chain(std::iter::once(&e.output)) {
                if s.0 >= n {
                    return Err(IrError::DanglingReference {
                        path: format!("elements[{i}]"),
                        id: s.0,
                    });
                }
            }
            if let Some(expected) = e.op.arity() {
                if e.inputs.len() != expected {
                    return Err(IrError::Arity {
                        element: e.id.0,
                        op: e.op.name(),
                        got: e.inputs.len(),
                        expected,
                    });
                }
            } else if e.inputs.is_empty() {
                return Err(IrError::Arity {
                    element: e.id.0,
                    op: e.op.name(),
                    got: 0,
                    expected: 1,
                });
            }
            let out = self.signal(e.output);
            if out.kind == SignalKind::Input {
                return Err(IrError::Invalid(format!(
                    "input `{}` is driven by an element",
                    out.name
                )));
            }
            if std::mem::replace(&mut driven[e.output.index()], true) {
                return Err(IrError::MultiDriver {
                    signal: out.name.clone(),
                });
            }
        }
        let readers = self.readers();
        for s in &self.signals {
            match s.kind {
                SignalKind::Register => {
                    if !self.clocks.contains_key(&s.id) {
                        return Err(IrError::Invalid(format!("register `{}` has no clock", s.name)));
                    }
                    if !driven[s.id.index()] {
                        return Err(IrError::Invalid(format!("register `{}` has no data input", s.name)));
                    }
                }
                SignalKind::Output if !driven[s.id.index()] => {
                    return Err(IrError::Invalid(format!("output `{}` is undriven", s.name)));
                }
                SignalKind::Wire if !driven[s.id.index()] && !readers[s.id.index()].is_empty() => {
                    return Err(IrError::Invalid(format!("wire `{}` is read but undriven", s.name)));
                }
                _ => {}
            }
        }
        for (r, pin) in &self.clocks {
            if r.0 >= n || pin.clock.0 >= n {
                return Err(IrError::DanglingReference {
                    path: "clocks".into(),
                    id: r.0.max(pin.clock.0),
                });
            }
            if self.signal(*r).kind != SignalKind::Register {
                return Err(IrError::Invalid(format!(
                    "clock entry for non-register `{}`",
                    self.signal(*r).name
                )));
            }
        }
        Ok(())
    }

    /// Count of elements per op name, for reports.
    pub fn op_histogram(&self) -> BTreeMap<&'static str, usize> {
        let mut h = BTreeMap::new();
        for e in &self.elements {
            *h.entry(e.op.name()).or_insert(0) += 1;
        }
        h
    }
}

// ---------------------------------------------------------------------------
// JSON netlist format

pub const IR_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IrFile {
    aoc_ir: u32,
    #[serde(default)]
    top: String,
    signals: Vec<IrSignal>,
    elements: Vec<IrElement>,
    #[serde(default)]
    clocks: Vec<IrClock>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IrSignal {
    id: u32,
    name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    scope: Vec<String>,
    kind: SignalKind,
    width: u32,
    #[serde(default)]
    dims: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    depth: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    init: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    output: bool,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct IrConstants {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arms: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lsb: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    elem_width: Option<u32>,
}

impl IrConstants {
    fn is_empty(&self) -> bool {
        self.value.is_none() && self.arms.is_none() && self.lsb.is_none() && self.elem_width.is_none()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IrElement {
    id: u32,
    op: String,
    inputs: Vec<u32>,
    output: u32,
    #[serde(default, skip_serializing_if = "IrConstants::is_empty")]
    constants: IrConstants,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IrClock {
    register: u32,
    clock: u32,
    polarity: Polarity,
}

fn hex(b: &Bits) -> String {
    format!("0x{}", b.to_hex_string())
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> IrError {
    IrError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

fn parse_bits(text: &str, width: u32, path: &str) -> Result<Bits, IrError> {
    Bits::parse(text, width).ok_or_else(|| schema(path, format!("bad constant `{text}`")))
}

/// Load a design from the JSON netlist format.
///
/// Ids in the file may be arbitrary as long as they are unique; they are
/// renumbered densely in file order.
pub fn load_ir(json_text: &str) -> Result<FlatDesign, IrError> {
    let file: IrFile = serde_json::from_str(json_text)
        .map_err(|e| schema(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
    if file.aoc_ir != IR_VERSION {
        return Err(schema("aoc_ir", format!("unsupported version {}", file.aoc_ir)));
    }
    let mut sig_map = BTreeMap::new();
    let mut signals = Vec::with_capacity(file.signals.len());
    for (i, s) in file.signals.iter().enumerate() {
        let path = format!("signals[{i}]");
        if sig_map.insert(s.id, SignalId(i as u32)).is_some() {
            return Err(schema(path, format!("duplicate id {}", s.id)));
        }
        if s.width == 0 {
            return Err(schema(format!("{path}.width"), "width must be at least 1"));
        }
        let dims = s.dims.unwrap_or(if s.width == 1 { 0 } else { 1 });
        if dims > 2 {
            return Err(schema(format!("{path}.dims"), "dims must be 0, 1 or 2"));
        }
        let depth = s.depth.unwrap_or(1);
        if dims == 2 && (depth == 0 || s.width % depth != 0) {
            return Err(schema(format!("{path}.depth"), "depth must divide width"));
        }
        if dims != 2 && depth != 1 {
            return Err(schema(format!("{path}.depth"), "depth requires dims = 2"));
        }
        let init = match &s.init {
            Some(t) => Some(parse_bits(t, s.width, &format!("{path}.init"))?),
            None => None,
        };
        if s.output && s.kind != SignalKind::Register {
            return Err(schema(format!("{path}.output"), "only registers carry the output flag"));
        }
        signals.push(Signal {
            id: SignalId(i as u32),
            name: s.name.clone(),
            scope: s.scope.clone(),
            kind: s.kind,
            width: s.width,
            dims,
            depth,
            init,
            port_output: s.output,
        });
    }
    let resolve = |id: u32, path: String| sig_map.get(&id).copied().ok_or(IrError::DanglingReference { path, id });
    let mut elements = Vec::with_capacity(file.elements.len());
    let mut seen_el = BTreeMap::new();
    for (i, e) in file.elements.iter().enumerate() {
        let path = format!("elements[{i}]");
        if seen_el.insert(e.id, i).is_some() {
            return Err(schema(path, format!("duplicate element id {}", e.id)));
        }
        let output = resolve(e.output, format!("{path}.output"))?;
        let inputs = e
            .inputs
            .iter()
            .enumerate()
            .map(|(k, &id)| resolve(id, format!("{path}.inputs[{k}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let width = signals[output.index()].width;
        let op = op_from_json(&e.op, &e.constants, width, &path, |k| {
            inputs.get(k).map(|s| signals[s.index()].width)
        })?;
        elements.push(CombElement {
            id: ElementId(i as u32),
            op,
            inputs,
            output,
        });
    }
    let mut clocks = BTreeMap::new();
    for (i, c) in file.clocks.iter().enumerate() {
        let path = format!("clocks[{i}]");
        let r = resolve(c.register, format!("{path}.register"))?;
        let clk = resolve(c.clock, format!("{path}.clock"))?;
        if clocks
            .insert(
                r,
                ClockPin {
                    clock: clk,
                    polarity: c.polarity,
                },
            )
            .is_some()
        {
            return Err(schema(path, "register listed twice"));
        }
    }
    let design = FlatDesign {
        top: file.top,
        signals,
        elements,
        clocks,
    };
    design.validate()?;
    Ok(design)
}

fn op_from_json(
    name: &str,
    c: &IrConstants,
    out_width: u32,
    path: &str,
    in_width: impl Fn(usize) -> Option<u32>,
) -> Result<Op, IrError> {
    let need_u32 =
        |v: Option<u32>, field: &str| v.ok_or_else(|| schema(format!("{path}.constants.{field}"), "missing"));
    Ok(match name {
        "buf" => Op::Buffer,
        "const" => {
            let v = c
                .value
                .as_deref()
                .ok_or_else(|| schema(format!("{path}.constants.value"), "missing"))?;
            Op::Const(parse_bits(v, out_width, &format!("{path}.constants.value"))?)
        }
        "not" => Op::Not,
        "and" => Op::And,
        "or" => Op::Or,
        "xor" => Op::Xor,
        "xnor" => Op::Xnor,
        "add" => Op::Add,
        "sub" => Op::Sub,
        "mul" => Op::Mul,
        "div" => Op::Div,
        "mod" => Op::Mod,
        "shl" => Op::Shl,
        "shr" => Op::Shr,
        "eq" => Op::Eq,
        "ne" => Op::Ne,
        "lt" => Op::Lt,
        "le" => Op::Le,
        "gt" => Op::Gt,
        "ge" => Op::Ge,
        "lnot" => Op::LogicNot,
        "land" => Op::LogicAnd,
        "lor" => Op::LogicOr,
        "redand" => Op::RedAnd,
        "redor" => Op::RedOr,
        "redxor" => Op::RedXor,
        "rednand" => Op::RedNand,
        "rednor" => Op::RedNor,
        "redxnor" => Op::RedXnor,
        "mux" => Op::Mux,
        "case" => {
            let arms = c
                .arms
                .as_ref()
                .ok_or_else(|| schema(format!("{path}.constants.arms"), "missing"))?;
            let sel_width = in_width(0).unwrap_or(1);
            let arms = arms
                .iter()
                .enumerate()
                .map(|(k, labels)| {
                    labels
                        .iter()
                        .map(|t| parse_bits(t, sel_width, &format!("{path}.constants.arms[{k}]")))
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()?;
            Op::Case { arms }
        }
        "concat" => Op::Concat,
        "slice" => Op::Slice {
            lsb: need_u32(c.lsb, "lsb")?,
        },
        "index" => Op::Index {
            elem_width: need_u32(c.elem_width, "elem_width")?.max(1),
        },
        "index_assign" => Op::IndexAssign {
            elem_width: need_u32(c.elem_width, "elem_width")?.max(1),
        },
        other => return Err(schema(format!("{path}.op"), format!("unknown op `{other}`"))),
    })
}

fn op_constants(op: &Op) -> IrConstants {
    let mut c = IrConstants::default();
    match op {
        Op::Const(b) => c.value = Some(hex(b)),
        Op::Case { arms } => c.arms = Some(arms.iter().map(|a| a.iter().map(hex).collect()).collect()),
        Op::Slice { lsb } => c.lsb = Some(*lsb),
        Op::Index { elem_width } | Op::IndexAssign { elem_width } => c.elem_width = Some(*elem_width),
        _ => {}
    }
    c
}

/// Serialize a design to the JSON netlist format (pretty-printed).
pub fn export_ir(design: &FlatDesign) -> String {
    let file = IrFile {
        aoc_ir: IR_VERSION,
        top: design.top.clone(),
        signals: design
            .signals
            .iter()
            .map(|s| IrSignal {
                id: s.id.0,
                name: s.name.clone(),
                scope: s.scope.clone(),
                kind: s.kind,
                width: s.width,
                dims: Some(s.dims),
                depth: (s.dims == 2).then_some(s.depth),
                init: s.init.as_ref().map(hex),
                output: s.port_output,
            })
            .collect(),
        elements: design
            .elements
            .iter()
            .map(|e| IrElement {
                id: e.id.0,
                op: e.op.name().to_string(),
                inputs: e.inputs.iter().map(|s| s.0).collect(),
                output: e.output.0,
                constants: op_constants(&e.op),
            })
            .collect(),
        clocks: design
            .clocks
            .iter()
            .map(|(r, c)| IrClock {
                register: r.0,
                clock: c.clock.0,
                polarity: c.polarity,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("IR serialization cannot fail")
}
