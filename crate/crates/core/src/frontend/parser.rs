use super::ast::*;
use super::lexer::{Tok, Token};
use super::{Loc, ParseError};

/// Keywords outside the subset; reported as located unsupported constructs.
const UNSUPPORTED_KEYWORDS: &[(&str, &str)] = &[
    ("inout", "inout port (tri-state)"),
    ("tri", "tri-state net"),
    ("tri0", "tri-state net"),
    ("tri1", "tri-state net"),
    ("wand", "wired net"),
    ("wor", "wired net"),
    ("bufif0", "tri-state driver"),
    ("bufif1", "tri-state driver"),
    ("notif0", "tri-state driver"),
    ("notif1", "tri-state driver"),
    ("casez", "casez"),
    ("casex", "casex"),
    ("generate", "generate block"),
    ("genvar", "generate block"),
    ("for", "for loop"),
    ("while", "while loop"),
    ("task", "task"),
    ("signed", "signed arithmetic"),
    ("fork", "fork/join"),
    ("wait", "level-sensitive wait"),
    ("real", "real variable"),
    ("time", "time variable"),
    ("specify", "specify block"),
    ("primitive", "user-defined primitive"),
    ("supply0", "supply net"),
    ("supply1", "supply net"),
    ("deassign", "procedural continuous assignment"),
    ("force", "force/release"),
    ("disable", "disable statement"),
];

pub struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    pub fn new(toks: Vec<Token>) -> Self {
        Parser { toks, pos: 0 }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn loc(&self) -> Loc {
        self.toks[self.pos].loc.clone()
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(w) if w == k)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.is_kw(k) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn syntax<T>(&self, message: impl Into<String>) -> PResult<T> {
        Err(ParseError::Syntax {
            loc: self.loc(),
            message: message.into(),
        })
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::System(s) => format!("`${s}`"),
            Tok::Number { value, .. } => format!("number {value}"),
            Tok::Str(_) => "string".into(),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of file".into(),
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.syntax(format!("expected `{p}`, found {}", self.describe()))
        }
    }

    fn expect_kw(&mut self, k: &str) -> PResult<()> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            self.syntax(format!("expected `{k}`, found {}", self.describe()))
        }
    }

    fn check_unsupported(&self) -> PResult<()> {
        if let Tok::Ident(w) = self.peek() {
            if let Some((_, what)) = UNSUPPORTED_KEYWORDS.iter().find(|(k, _)| k == w) {
                return Err(ParseError::Unsupported {
                    loc: self.loc(),
                    construct: what.to_string(),
                });
            }
        }
        if self.is_punct("(*") {
            return Err(ParseError::Unsupported {
                loc: self.loc(),
                construct: "attribute".into(),
            });
        }
        Ok(())
    }

    fn ident(&mut self) -> PResult<String> {
        self.check_unsupported()?;
        match self.peek().clone() {
            Tok::Ident(s) if !is_reserved(&s) => {
                self.advance();
                Ok(s)
            }
            _ => self.syntax(format!("expected identifier, found {}", self.describe())),
        }
    }

    pub fn parse_modules(&mut self) -> PResult<Vec<ModuleAst>> {
        let mut mods = Vec::new();
        while *self.peek() != Tok::Eof {
            self.check_unsupported()?;
            if self.is_kw("module") || self.is_kw("macromodule") {
                mods.push(self.module()?);
            } else {
                return self.syntax(format!("expected `module`, found {}", self.describe()));
            }
        }
        Ok(mods)
    }

    fn module(&mut self) -> PResult<ModuleAst> {
        let loc = self.loc();
        self.advance();
        let name = self.ident()?;
        let mut params = Vec::new();
        if self.eat_punct("#") {
            self.expect_punct("(")?;
            if !self.is_punct(")") {
                loop {
                    let local = if self.eat_kw("localparam") {
                        true
                    } else {
                        self.eat_kw("parameter");
                        false
                    };
                    self.eat_kw("integer");
                    let range = self.opt_range()?;
                    let ploc = self.loc();
                    let pname = self.ident()?;
                    self.expect_punct("=")?;
                    let value = self.expr()?;
                    params.push(ParamDecl {
                        name: pname,
                        range,
                        value,
                        local,
                        loc: ploc,
                    });
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
            self.expect_punct(")")?;
        }
        let mut ports = Vec::new();
        let mut ansi = false;
        if self.eat_punct("(") {
            if !self.is_punct(")") {
                if self.is_kw("input") || self.is_kw("output") || self.is_kw("inout") {
                    ansi = true;
                    let mut cur: Option<(Direction, bool, Option<Range>)> = None;
                    loop {
                        self.check_unsupported()?;
                        if self.is_kw("input") || self.is_kw("output") {
                            let dir = if self.eat_kw("input") {
                                Direction::Input
                            } else {
                                self.advance();
                                Direction::Output
                            };
                            let is_reg = if self.eat_kw("reg") {
                                true
                            } else {
                                self.eat_kw("wire");
                                false
                            };
                            self.check_unsupported()?;
                            let range = self.opt_range()?;
                            cur = Some((dir, is_reg, range));
                        }
                        let Some((dir, is_reg, range)) = cur.clone() else {
                            return self.syntax("port direction expected");
                        };
                        let ploc = self.loc();
                        let pname = self.ident()?;
                        ports.push(PortDecl {
                            name: pname,
                            dir: Some(dir),
                            is_reg,
                            range,
                            loc: ploc,
                        });
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                } else {
                    loop {
                        let ploc = self.loc();
                        let pname = self.ident()?;
                        ports.push(PortDecl {
                            name: pname,
                            dir: None,
                            is_reg: false,
                            range: None,
                            loc: ploc,
                        });
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                }
            }
            self.expect_punct(")")?;
        }
        self.expect_punct(";")?;
        let mut items = Vec::new();
        while !self.is_kw("endmodule") {
            if *self.peek() == Tok::Eof {
                return self.syntax(format!("missing `endmodule` for module `{name}`"));
            }
            self.item(&mut items)?;
        }
        self.advance();
        Ok(ModuleAst {
            name,
            loc,
            params,
            ports,
            items,
            ansi,
        })
    }

    fn opt_range(&mut self) -> PResult<Option<Range>> {
        if self.is_punct("[") {
            self.advance();
            let msb = self.expr()?;
            self.expect_punct(":")?;
            let lsb = self.expr()?;
            self.expect_punct("]")?;
            Ok(Some(Range { msb, lsb }))
        } else {
            Ok(None)
        }
    }

    fn item(&mut self, items: &mut Vec<Item>) -> PResult<()> {
        self.check_unsupported()?;
        let loc = self.loc();
        let kw = match self.peek() {
            Tok::Ident(w) => w.clone(),
            _ => return self.syntax(format!("expected module item, found {}", self.describe())),
        };
        match kw.as_str() {
            "input" | "output" => {
                let dir = if kw == "input" {
                    Direction::Input
                } else {
                    Direction::Output
                };
                self.advance();
                let is_reg = if self.eat_kw("reg") {
                    true
                } else {
                    self.eat_kw("wire");
                    false
                };
                self.check_unsupported()?;
                let range = self.opt_range()?;
                loop {
                    let ploc = self.loc();
                    let name = self.ident()?;
                    items.push(Item::Port(PortDecl {
                        name,
                        dir: Some(dir),
                        is_reg,
                        range: range.clone(),
                        loc: ploc,
                    }));
                    if !self.eat_punct(",") {
                        break;
                    }
                }
                self.expect_punct(";")?;
            }
            "wire" | "reg" | "integer" => {
                items.push(Item::Net(self.net_decl()?));
            }
            "parameter" | "localparam" => {
                self.advance();
                let local = kw == "localparam";
                self.eat_kw("integer");
                self.check_unsupported()?;
                let range = self.opt_range()?;
                loop {
                    let ploc = self.loc();
                    let name = self.ident()?;
                    self.expect_punct("=")?;
                    let value = self.expr()?;
                    items.push(Item::Param(ParamDecl {
                        name,
                        range: range.clone(),
                        value,
                        local,
                        loc: ploc,
                    }));
                    if !self.eat_punct(",") {
                        break;
                    }
                }
                self.expect_punct(";")?;
            }
            "assign" => {
                self.advance();
                if self.is_punct("#") {
                    return Err(ParseError::Unsupported {
                        loc: self.loc(),
                        construct: "delayed continuous assignment".into(),
                    });
                }
                loop {
                    let aloc = self.loc();
                    let lhs = self.lvalue()?;
                    self.expect_punct("=")?;
                    let rhs = self.expr()?;
                    items.push(Item::Assign(ContAssign { lhs, rhs, loc: aloc }));
                    if !self.eat_punct(",") {
                        break;
                    }
                }
                self.expect_punct(";")?;
            }
            "always" => {
                self.advance();
                let sens = if self.eat_punct("@") {
                    if self.eat_punct("*") {
                        Sensitivity::Star
                    } else {
                        self.expect_punct("(")?;
                        if self.eat_punct("*") {
                            self.expect_punct(")")?;
                            Sensitivity::Star
                        } else {
                            let list = self.event_list()?;
                            self.expect_punct(")")?;
                            Sensitivity::List(list)
                        }
                    }
                } else {
                    Sensitivity::None
                };
                let body = self.stmt()?;
                items.push(Item::Always(AlwaysBlock { sens, body, loc }));
            }
            "initial" => {
                self.advance();
                let body = self.stmt()?;
                items.push(Item::Initial(InitialBlock { body, loc }));
            }
            "function" => items.push(Item::Function(self.function()?)),
            _ if !is_reserved(&kw) => items.push(Item::Instance(self.instance()?)),
            _ => return self.syntax(format!("unexpected `{kw}` in module body")),
        }
        Ok(())
    }

    fn net_decl(&mut self) -> PResult<NetDecl> {
        let loc = self.loc();
        let kind = match self.advance().tok {
            Tok::Ident(w) if w == "wire" => NetKind::Wire,
            Tok::Ident(w) if w == "reg" => NetKind::Reg,
            _ => NetKind::Integer,
        };
        self.check_unsupported()?;
        let range = if kind == NetKind::Integer {
            None
        } else {
            self.opt_range()?
        };
        let mut names = Vec::new();
        loop {
            let nloc = self.loc();
            let name = self.ident()?;
            let array = self.opt_range()?;
            if self.is_punct("[") {
                return Err(ParseError::Unsupported {
                    loc: self.loc(),
                    construct: "arrays with more than two dimensions".into(),
                });
            }
            let init = if self.eat_punct("=") { Some(self.expr()?) } else { None };
            names.push(NetName {
                name,
                array,
                init,
                loc: nloc,
            });
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(";")?;
        Ok(NetDecl {
            kind,
            range,
            names,
            loc,
        })
    }

    fn function(&mut self) -> PResult<FunctionDecl> {
        let loc = self.loc();
        self.advance();
        self.eat_kw("automatic");
        self.check_unsupported()?;
        let range = self.opt_range()?;
        let name = self.ident()?;
        let mut inputs = Vec::new();
        if self.eat_punct("(") {
            let mut cur_range: Option<Range> = None;
            loop {
                if self.eat_kw("input") {
                    self.eat_kw("wire");
                    self.eat_kw("reg");
                    self.check_unsupported()?;
                    cur_range = self.opt_range()?;
                }
                let ploc = self.loc();
                let pname = self.ident()?;
                inputs.push(PortDecl {
                    name: pname,
                    dir: Some(Direction::Input),
                    is_reg: false,
                    range: cur_range.clone(),
                    loc: ploc,
                });
                if !self.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct(")")?;
        }
        self.expect_punct(";")?;
        let mut locals = Vec::new();
        loop {
            self.check_unsupported()?;
            if self.is_kw("input") {
                self.advance();
                self.eat_kw("wire");
                self.eat_kw("reg");
                self.check_unsupported()?;
                let r = self.opt_range()?;
                loop {
                    let ploc = self.loc();
                    let pname = self.ident()?;
                    inputs.push(PortDecl {
                        name: pname,
                        dir: Some(Direction::Input),
                        is_reg: false,
                        range: r.clone(),
                        loc: ploc,
                    });
                    if !self.eat_punct(",") {
                        break;
                    }
                }
                self.expect_punct(";")?;
            } else if self.is_kw("reg") || self.is_kw("integer") {
                locals.push(self.net_decl()?);
            } else if self.is_kw("output") {
                return Err(ParseError::Unsupported {
                    loc: self.loc(),
                    construct: "function output argument".into(),
                });
            } else {
                break;
            }
        }
        let body = self.stmt()?;
        self.expect_kw("endfunction")?;
        Ok(FunctionDecl {
            name,
            range,
            inputs,
            locals,
            body,
            loc,
        })
    }

    fn connection_list(&mut self) -> PResult<Vec<Connection>> {
        let mut out = Vec::new();
        self.expect_punct("(")?;
        if self.eat_punct(")") {
            return Ok(out);
        }
        loop {
            let loc = self.loc();
            if self.eat_punct(".") {
                let name = self.ident()?;
                self.expect_punct("(")?;
                let expr = if self.is_punct(")") { None } else { Some(self.expr()?) };
                self.expect_punct(")")?;
                out.push(Connection {
                    name: Some(name),
                    expr,
                    loc,
                });
            } else {
                let expr = self.expr()?;
                out.push(Connection {
                    name: None,
                    expr: Some(expr),
                    loc,
                });
            }
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(")")?;
        Ok(out)
    }

    fn instance(&mut self) -> PResult<Instance> {
        let loc = self.loc();
        let module = self.ident()?;
        let params = if self.eat_punct("#") {
            self.connection_list()?
        } else {
            Vec::new()
        };
        let name = self.ident()?;
        if self.is_punct("[") {
            return Err(ParseError::Unsupported {
                loc: self.loc(),
                construct: "instance array".into(),
            });
        }
        let conns = self.connection_list()?;
        if self.is_punct(",") {
            return Err(ParseError::Unsupported {
                loc: self.loc(),
                construct: "multiple instances in one statement".into(),
            });
        }
        self.expect_punct(";")?;
        Ok(Instance {
            module,
            name,
            params,
            conns,
            loc,
        })
    }

    fn event_list(&mut self) -> PResult<Vec<EventItem>> {
        let mut list = Vec::new();
        loop {
            let edge = if self.eat_kw("posedge") {
                Some(Edge::Posedge)
            } else if self.eat_kw("negedge") {
                Some(Edge::Negedge)
            } else {
                None
            };
            let expr = self.expr()?;
            list.push(EventItem { edge, expr });
            if !(self.eat_kw("or") || self.eat_punct(",")) {
                break;
            }
        }
        Ok(list)
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        self.check_unsupported()?;
        let loc = self.loc();
        if self.eat_punct(";") {
            return Ok(Stmt {
                kind: StmtKind::Null,
                loc,
            });
        }
        if self.eat_punct("#") {
            let delay = self.primary()?;
            let body = if self.eat_punct(";") {
                None
            } else {
                Some(Box::new(self.stmt()?))
            };
            return Ok(Stmt {
                kind: StmtKind::Delay(delay, body),
                loc,
            });
        }
        if self.eat_punct("@") {
            let events = if self.eat_punct("(") {
                let l = self.event_list()?;
                self.expect_punct(")")?;
                l
            } else {
                let e = self.primary()?;
                vec![EventItem { edge: None, expr: e }]
            };
            let body = if self.eat_punct(";") {
                None
            } else {
                Some(Box::new(self.stmt()?))
            };
            return Ok(Stmt {
                kind: StmtKind::Wait(events, body),
                loc,
            });
        }
        if let Tok::System(name) = self.peek().clone() {
            self.advance();
            let mut args = Vec::new();
            if self.eat_punct("(") {
                if !self.is_punct(")") {
                    loop {
                        args.push(self.expr()?);
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                }
                self.expect_punct(")")?;
            }
            self.expect_punct(";")?;
            return Ok(Stmt {
                kind: StmtKind::SysTask(name, args),
                loc,
            });
        }
        let kw = match self.peek() {
            Tok::Ident(w) => w.clone(),
            Tok::Punct("{") => String::new(),
            _ => return self.syntax(format!("expected statement, found {}", self.describe())),
        };
        match kw.as_str() {
            "begin" => {
                self.advance();
                if self.eat_punct(":") {
                    self.ident()?;
                }
                let mut body = Vec::new();
                while !self.is_kw("end") {
                    if *self.peek() == Tok::Eof {
                        return self.syntax("missing `end`");
                    }
                    body.push(self.stmt()?);
                }
                self.advance();
                Ok(Stmt {
                    kind: StmtKind::Block(body),
                    loc,
                })
            }
            "if" => {
                self.advance();
                self.expect_punct("(")?;
                let cond = self.expr()?;
                self.expect_punct(")")?;
                let then = Box::new(self.stmt()?);
                let els = if self.eat_kw("else") {
                    Some(Box::new(self.stmt()?))
                } else {
                    None
                };
                Ok(Stmt {
                    kind: StmtKind::If(cond, then, els),
                    loc,
                })
            }
            "case" => {
                self.advance();
                self.expect_punct("(")?;
                let sel = self.expr()?;
                self.expect_punct(")")?;
                let mut arms = Vec::new();
                let mut default = None;
                while !self.is_kw("endcase") {
                    if *self.peek() == Tok::Eof {
                        return self.syntax("missing `endcase`");
                    }
                    if self.eat_kw("default") {
                        self.eat_punct(":");
                        if default.is_some() {
                            return self.syntax("duplicate default arm");
                        }
                        default = Some(Box::new(self.stmt()?));
                        continue;
                    }
                    let mut labels = Vec::new();
                    loop {
                        labels.push(self.expr()?);
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                    self.expect_punct(":")?;
                    let body = self.stmt()?;
                    arms.push(CaseArm { labels, body });
                }
                self.advance();
                Ok(Stmt {
                    kind: StmtKind::Case { sel, arms, default },
                    loc,
                })
            }
            "forever" => {
                self.advance();
                let body = Box::new(self.stmt()?);
                Ok(Stmt {
                    kind: StmtKind::Forever(body),
                    loc,
                })
            }
            "repeat" => {
                self.advance();
                self.expect_punct("(")?;
                let n = self.expr()?;
                self.expect_punct(")")?;
                let body = Box::new(self.stmt()?);
                Ok(Stmt {
                    kind: StmtKind::Repeat(n, body),
                    loc,
                })
            }
            "assign" => Err(ParseError::Unsupported {
                loc,
                construct: "procedural continuous assignment".into(),
            }),
            _ => {
                let lhs = self.lvalue()?;
                let blocking = if self.eat_punct("=") {
                    true
                } else if self.eat_punct("<=") {
                    false
                } else {
                    return self.syntax(format!("expected `=` or `<=`, found {}", self.describe()));
                };
                if self.is_punct("#") || self.is_punct("@") {
                    return Err(ParseError::Unsupported {
                        loc: self.loc(),
                        construct: "intra-assignment timing control".into(),
                    });
                }
                let rhs = self.expr()?;
                self.expect_punct(";")?;
                Ok(Stmt {
                    kind: if blocking {
                        StmtKind::Blocking(lhs, rhs)
                    } else {
                        StmtKind::NonBlocking(lhs, rhs)
                    },
                    loc,
                })
            }
        }
    }

    /// Assignable expression: identifier with selects, or a concatenation of those.
    fn lvalue(&mut self) -> PResult<Expr> {
        let loc = self.loc();
        if self.eat_punct("{") {
            let mut parts = Vec::new();
            loop {
                parts.push(self.lvalue()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct("}")?;
            return Ok(Expr {
                kind: ExprKind::Concat(parts),
                loc,
            });
        }
        let name = self.ident()?;
        let base = Expr {
            kind: ExprKind::Ident(name),
            loc,
        };
        self.selects(base)
    }

    fn selects(&mut self, mut e: Expr) -> PResult<Expr> {
        while self.is_punct("[") {
            let loc = self.loc();
            self.advance();
            let first = self.expr()?;
            if self.eat_punct(":") {
                let lsb = self.expr()?;
                self.expect_punct("]")?;
                e = Expr {
                    kind: ExprKind::Slice(Box::new(e), Box::new(first), Box::new(lsb)),
                    loc,
                };
            } else if self.is_punct("+:") || self.is_punct("-:") {
                let up = self.is_punct("+:");
                self.advance();
                let width = self.expr()?;
                self.expect_punct("]")?;
                e = Expr {
                    kind: ExprKind::IndexedSlice {
                        base: Box::new(e),
                        start: Box::new(first),
                        width: Box::new(width),
                        up,
                    },
                    loc,
                };
            } else {
                self.expect_punct("]")?;
                e = Expr {
                    kind: ExprKind::Index(Box::new(e), Box::new(first)),
                    loc,
                };
            }
        }
        Ok(e)
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        let cond = self.binary(1)?;
        if self.is_punct("?") {
            let loc = cond.loc.clone();
            self.advance();
            let t = self.expr()?;
            self.expect_punct(":")?;
            let e = self.expr()?;
            return Ok(Expr {
                kind: ExprKind::Ternary(Box::new(cond), Box::new(t), Box::new(e)),
                loc,
            });
        }
        Ok(cond)
    }

    fn binop(&self) -> Option<(BinaryOp, u8)> {
        let Tok::Punct(p) = self.peek() else {
            return None;
        };
        Some(match *p {
            "||" => (BinaryOp::LogicOr, 1),
            "&&" => (BinaryOp::LogicAnd, 2),
            "|" => (BinaryOp::BitOr, 3),
            "^" => (BinaryOp::BitXor, 4),
            "~^" | "^~" => (BinaryOp::BitXnor, 4),
            "&" => (BinaryOp::BitAnd, 5),
            "==" | "===" => (BinaryOp::Eq, 6),
            "!=" | "!==" => (BinaryOp::Ne, 6),
            "<" => (BinaryOp::Lt, 7),
            "<=" => (BinaryOp::Le, 7),
            ">" => (BinaryOp::Gt, 7),
            ">=" => (BinaryOp::Ge, 7),
            "<<" | "<<<" => (BinaryOp::Shl, 8),
            ">>" | ">>>" => (BinaryOp::Shr, 8),
            "+" => (BinaryOp::Add, 9),
            "-" => (BinaryOp::Sub, 9),
            "*" => (BinaryOp::Mul, 10),
            "/" => (BinaryOp::Div, 10),
            "%" => (BinaryOp::Mod, 10),
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.is_punct("**") {
                return Err(ParseError::Unsupported {
                    loc: self.loc(),
                    construct: "power operator".into(),
                });
            }
            let Some((op, prec)) = self.binop() else { break };
            if prec < min_prec {
                break;
            }
            self.advance();
            let rhs = self.binary(prec + 1)?;
            let loc = lhs.loc.clone();
            lhs = Expr {
                kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
                loc,
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let loc = self.loc();
        let op = match self.peek() {
            Tok::Punct("+") => Some(UnaryOp::Plus),
            Tok::Punct("-") => Some(UnaryOp::Neg),
            Tok::Punct("!") => Some(UnaryOp::LogicNot),
            Tok::Punct("~") => Some(UnaryOp::BitNot),
            Tok::Punct("&") => Some(UnaryOp::RedAnd),
            Tok::Punct("~&") => Some(UnaryOp::RedNand),
            Tok::Punct("|") => Some(UnaryOp::RedOr),
            Tok::Punct("~|") => Some(UnaryOp::RedNor),
            Tok::Punct("^") => Some(UnaryOp::RedXor),
            Tok::Punct("~^") | Tok::Punct("^~") => Some(UnaryOp::RedXnor),
            _ => None,
        };
        if let Some(op) = op {
            self.advance();
            let inner = self.unary()?;
            return Ok(Expr {
                kind: ExprKind::Unary(op, Box::new(inner)),
                loc,
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        self.check_unsupported()?;
        let loc = self.loc();
        match self.peek().clone() {
            Tok::Number { size, value } => {
                self.advance();
                Ok(Expr {
                    kind: ExprKind::Number { size, value },
                    loc,
                })
            }
            Tok::Str(s) => {
                self.advance();
                Ok(Expr {
                    kind: ExprKind::Str(s),
                    loc,
                })
            }
            Tok::System(s) if s == "time" => {
                self.advance();
                Ok(Expr {
                    kind: ExprKind::Call("$time".into(), Vec::new()),
                    loc,
                })
            }
            Tok::System(s) => Err(ParseError::Unsupported {
                loc,
                construct: format!("system function `${s}` in expression"),
            }),
            Tok::Punct("(") => {
                self.advance();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Punct("{") => {
                self.advance();
                let first = self.expr()?;
                if self.is_punct("{") {
                    self.advance();
                    let mut parts = Vec::new();
                    loop {
                        parts.push(self.expr()?);
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                    self.expect_punct("}")?;
                    self.expect_punct("}")?;
                    return Ok(Expr {
                        kind: ExprKind::Replicate(Box::new(first), parts),
                        loc,
                    });
                }
                let mut parts = vec![first];
                while self.eat_punct(",") {
                    parts.push(self.expr()?);
                }
                self.expect_punct("}")?;
                Ok(Expr {
                    kind: ExprKind::Concat(parts),
                    loc,
                })
            }
            Tok::Ident(_) => {
                let name = self.ident()?;
                if self.is_punct("(") {
                    self.advance();
                    let mut args = Vec::new();
                    if !self.is_punct(")") {
                        loop {
                            args.push(self.expr()?);
                            if !self.eat_punct(",") {
                                break;
                            }
                        }
                    }
                    self.expect_punct(")")?;
                    return Ok(Expr {
                        kind: ExprKind::Call(name, args),
                        loc,
                    });
                }
                let base = Expr {
                    kind: ExprKind::Ident(name),
                    loc,
                };
                self.selects(base)
            }
            _ => self.syntax(format!("expected expression, found {}", self.describe())),
        }
    }
}

fn is_reserved(w: &str) -> bool {
    matches!(
        w,
        "module"
            | "endmodule"
            | "input"
            | "output"
            | "wire"
            | "reg"
            | "integer"
            | "parameter"
            | "localparam"
            | "assign"
            | "always"
            | "initial"
            | "begin"
            | "end"
            | "if"
            | "else"
            | "case"
            | "endcase"
            | "default"
            | "posedge"
            | "negedge"
            | "or"
            | "function"
            | "endfunction"
            | "forever"
            | "repeat"
    )
}
