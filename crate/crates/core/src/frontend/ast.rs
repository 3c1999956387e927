//! Abstract syntax tree for the supported Verilog subset.

use super::Loc;
use crate::bits::Bits;

#[derive(Clone, Debug)]
pub struct ModuleAst {
    pub name: String,
    pub loc: Loc,
    pub params: Vec<ParamDecl>,
    pub ports: Vec<PortDecl>,
    pub items: Vec<Item>,
    /// Ports were declared in the header (ANSI style).
    pub ansi: bool,
}

#[derive(Clone, Debug)]
pub struct ParamDecl {
    pub name: String,
    pub range: Option<Range>,
    pub value: Expr,
    pub local: bool,
    pub loc: Loc,
}

#[derive(Clone, Debug)]
pub struct Range {
    pub msb: Expr,
    pub lsb: Expr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Input,
    Output,
}

#[derive(Clone, Debug)]
pub struct PortDecl {
    pub name: String,
    /// `None` for a non-ANSI header entry whose direction comes later.
    pub dir: Option<Direction>,
    pub is_reg: bool,
    pub range: Option<Range>,
    pub loc: Loc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NetKind {
    Wire,
    Reg,
    Integer,
}

#[derive(Clone, Debug)]
pub struct NetName {
    pub name: String,
    /// Unpacked array range (`reg [7:0] mem [0:15]`).
    pub array: Option<Range>,
    pub init: Option<Expr>,
    pub loc: Loc,
}

#[derive(Clone, Debug)]
pub struct NetDecl {
    pub kind: NetKind,
    pub range: Option<Range>,
    pub names: Vec<NetName>,
    pub loc: Loc,
}

#[derive(Clone, Debug)]
pub enum Item {
    Net(NetDecl),
    /// Non-ANSI body port declaration.
    Port(PortDecl),
    Param(ParamDecl),
    Assign(ContAssign),
    Always(AlwaysBlock),
    Initial(InitialBlock),
    Instance(Instance),
    Function(FunctionDecl),
}

#[derive(Clone, Debug)]
pub struct ContAssign {
    pub lhs: Expr,
    pub rhs: Expr,
    pub loc: Loc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Edge {
    Posedge,
    Negedge,
}

#[derive(Clone, Debug)]
pub struct EventItem {
    pub edge: Option<Edge>,
    pub expr: Expr,
}

#[derive(Clone, Debug)]
pub enum Sensitivity {
    /// `@*` / `@(*)`
    Star,
    /// `@(a or b)`, `@(posedge clk)`, ...
    List(Vec<EventItem>),
    /// No event control: `always #5 clk = ~clk;`
    None,
}

#[derive(Clone, Debug)]
pub struct AlwaysBlock {
    pub sens: Sensitivity,
    pub body: Stmt,
    pub loc: Loc,
}

#[derive(Clone, Debug)]
pub struct InitialBlock {
    pub body: Stmt,
    pub loc: Loc,
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub module: String,
    pub name: String,
    pub params: Vec<Connection>,
    pub conns: Vec<Connection>,
    pub loc: Loc,
}

/// Named (`.a(x)`) or positional (`x`) binding; `expr` is `None` for `.a()`.
#[derive(Clone, Debug)]
pub struct Connection {
    pub name: Option<String>,
    pub expr: Option<Expr>,
    pub loc: Loc,
}

#[derive(Clone, Debug)]
pub struct FunctionDecl {
    pub name: String,
    pub range: Option<Range>,
    pub inputs: Vec<PortDecl>,
    pub locals: Vec<NetDecl>,
    pub body: Stmt,
    pub loc: Loc,
}

#[derive(Clone, Debug)]
pub struct Stmt {
    pub kind: StmtKind,
    pub loc: Loc,
}

#[derive(Clone, Debug)]
pub struct CaseArm {
    pub labels: Vec<Expr>,
    pub body: Stmt,
}

#[derive(Clone, Debug)]
pub enum StmtKind {
    Block(Vec<Stmt>),
    If(Expr, Box<Stmt>, Option<Box<Stmt>>),
    Case {
        sel: Expr,
        arms: Vec<CaseArm>,
        default: Option<Box<Stmt>>,
    },
    Blocking(Expr, Expr),
    NonBlocking(Expr, Expr),
    /// `#n;` or `#n stmt`
    Delay(Expr, Option<Box<Stmt>>),
    /// `@(...);` or `@(...) stmt`
    Wait(Vec<EventItem>, Option<Box<Stmt>>),
    Forever(Box<Stmt>),
    Repeat(Expr, Box<Stmt>),
    SysTask(String, Vec<Expr>),
    Null,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryOp {
    Plus,
    Neg,
    LogicNot,
    BitNot,
    RedAnd,
    RedNand,
    RedOr,
    RedNor,
    RedXor,
    RedXnor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Shl,
    Shr,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    BitAnd,
    BitXor,
    BitXnor,
    BitOr,
    LogicAnd,
    LogicOr,
}

impl UnaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnaryOp::Plus => "+",
            UnaryOp::Neg => "-",
            UnaryOp::LogicNot => "!",
            UnaryOp::BitNot => "~",
            UnaryOp::RedAnd => "&",
            UnaryOp::RedNand => "~&",
            UnaryOp::RedOr => "|",
            UnaryOp::RedNor => "~|",
            UnaryOp::RedXor => "^",
            UnaryOp::RedXnor => "~^",
        }
    }
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Mod => "%",
            BinaryOp::Shl => "<<",
            BinaryOp::Shr => ">>",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::BitAnd => "&",
            BinaryOp::BitXor => "^",
            BinaryOp::BitXnor => "~^",
            BinaryOp::BitOr => "|",
            BinaryOp::LogicAnd => "&&",
            BinaryOp::LogicOr => "||",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Expr {
    pub kind: ExprKind,
    pub loc: Loc,
}

#[derive(Clone, Debug)]
pub enum ExprKind {
    /// `size` is `None` for unsized literals (at least 32 bits wide).
    Number {
        size: Option<u32>,
        value: Bits,
    },
    Ident(String),
    /// `a[i]`: bit select or array element.
    Index(Box<Expr>, Box<Expr>),
    /// `a[msb:lsb]`
    Slice(Box<Expr>, Box<Expr>, Box<Expr>),
    /// `a[base +: width]` (`up`) or `a[base -: width]`
    IndexedSlice {
        base: Box<Expr>,
        start: Box<Expr>,
        width: Box<Expr>,
        up: bool,
    },
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Ternary(Box<Expr>, Box<Expr>, Box<Expr>),
    Concat(Vec<Expr>),
    Replicate(Box<Expr>, Vec<Expr>),
    Call(String, Vec<Expr>),
    Str(String),
}

impl Expr {
    pub fn as_ident(&self) -> Option<&str> {
        match &self.kind {
            ExprKind::Ident(n) => Some(n),
            _ => None,
        }
    }

    /// Root identifier of an lvalue-like expression.
    pub fn base_name(&self) -> Option<&str> {
        match &self.kind {
            ExprKind::Ident(n) => Some(n),
            ExprKind::Index(b, _) | ExprKind::Slice(b, _, _) => b.base_name(),
            ExprKind::IndexedSlice { base, .. } => base.base_name(),
            _ => None,
        }
    }
}

impl Stmt {
    /// Whether the statement (transitively) contains timing controls.
    pub fn has_timing(&self) -> bool {
        match &self.kind {
            StmtKind::Delay(..) | StmtKind::Wait(..) => true,
            StmtKind::Block(v) => v.iter().any(Stmt::has_timing),
            StmtKind::If(_, t, e) => t.has_timing() || e.as_ref().is_some_and(|e| e.has_timing()),
            StmtKind::Case { arms, default, .. } => {
                arms.iter().any(|a| a.body.has_timing()) || default.as_ref().is_some_and(|d| d.has_timing())
            }
            StmtKind::Forever(s) | StmtKind::Repeat(_, s) => s.has_timing(),
            _ => false,
        }
    }

    /// First timing control in the statement, for diagnostics.
    pub fn first_timing_loc(&self) -> Option<Loc> {
        match &self.kind {
            StmtKind::Delay(..) | StmtKind::Wait(..) => Some(self.loc.clone()),
            StmtKind::Block(v) => v.iter().find_map(Stmt::first_timing_loc),
            StmtKind::If(_, t, e) => t
                .first_timing_loc()
                .or_else(|| e.as_ref().and_then(|e| e.first_timing_loc())),
            StmtKind::Case { arms, default, .. } => arms
                .iter()
                .find_map(|a| a.body.first_timing_loc())
                .or_else(|| default.as_ref().and_then(|d| d.first_timing_loc())),
            StmtKind::Forever(s) | StmtKind::Repeat(_, s) => s.first_timing_loc(),
            _ => None,
        }
    }
}
