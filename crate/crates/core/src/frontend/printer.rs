//! Canonical Verilog printer. Expressions are fully parenthesized so that
//! printing and reparsing is a fixpoint.

use std::fmt::Write;

use super::ast::*;

pub fn print_modules(mods: &[ModuleAst]) -> String {
    let mut out = String::new();
    for m in mods {
        print_module(&mut out, m);
        out.push('\n');
    }
    out
}

fn range(r: &Option<Range>) -> String {
    match r {
        Some(r) => format!("[{}:{}] ", print_expr(&r.msb), print_expr(&r.lsb)),
        None => String::new(),
    }
}

fn dir(d: Direction) -> &'static str {
    match d {
        Direction::Input => "input",
        Direction::Output => "output",
    }
}

fn port_decl(p: &PortDecl) -> String {
    let d = p.dir.map(dir).unwrap_or("input");
    let reg = if p.is_reg { "reg " } else { "" };
    format!("{d} {reg}{}{}", range(&p.range), p.name)
}

fn param(p: &ParamDecl) -> String {
    let kw = if p.local { "localparam" } else { "parameter" };
    format!("{kw} {}{} = {}", range(&p.range), p.name, print_expr(&p.value))
}

fn print_module(out: &mut String, m: &ModuleAst) {
    write!(out, "module {}", m.name).unwrap();
    if !m.params.is_empty() {
        let ps: Vec<String> = m.params.iter().map(param).collect();
        write!(out, " #({})", ps.join(", ")).unwrap();
    }
    let ports: Vec<String> = if m.ansi {
        m.ports.iter().map(port_decl).collect()
    } else {
        m.ports.iter().map(|p| p.name.clone()).collect()
    };
    writeln!(out, " ({});", ports.join(", ")).unwrap();
    for item in &m.items {
        print_item(out, item, 1);
    }
    out.push_str("endmodule\n");
}

fn indent(out: &mut String, n: usize) {
    for _ in 0..n {
        out.push_str("  ");
    }
}

fn net_decl(n: &NetDecl) -> String {
    let kw = match n.kind {
        NetKind::Wire => "wire",
        NetKind::Reg => "reg",
        NetKind::Integer => "integer",
    };
    let names: Vec<String> = n
        .names
        .iter()
        .map(|nn| {
            let mut s = nn.name.clone();
            if let Some(a) = &nn.array {
                write!(s, " [{}:{}]", print_expr(&a.msb), print_expr(&a.lsb)).unwrap();
            }
            if let Some(i) = &nn.init {
                write!(s, " = {}", print_expr(i)).unwrap();
            }
            s
        })
        .collect();
    format!("{kw} {}{};", range(&n.range), names.join(", "))
}

fn connections(c: &[Connection]) -> String {
    let v: Vec<String> = c
        .iter()
        .map(|c| match (&c.name, &c.expr) {
            (Some(n), Some(e)) => format!(".{n}({})", print_expr(e)),
            (Some(n), None) => format!(".{n}()"),
            (None, Some(e)) => print_expr(e),
            (None, None) => String::new(),
        })
        .collect();
    format!("({})", v.join(", "))
}

fn events(list: &[EventItem]) -> String {
    let v: Vec<String> = list
        .iter()
        .map(|e| {
            let edge = match e.edge {
                Some(Edge::Posedge) => "posedge ",
                Some(Edge::Negedge) => "negedge ",
                None => "",
            };
            format!("{edge}{}", print_expr(&e.expr))
        })
        .collect();
    v.join(" or ")
}

fn print_item(out: &mut String, item: &Item, lvl: usize) {
    indent(out, lvl);
    match item {
        Item::Net(n) => writeln!(out, "{}", net_decl(n)).unwrap(),
        Item::Port(p) => writeln!(out, "{};", port_decl(p)).unwrap(),
        Item::Param(p) => writeln!(out, "{};", param(p)).unwrap(),
        Item::Assign(a) => writeln!(out, "assign {} = {};", print_expr(&a.lhs), print_expr(&a.rhs)).unwrap(),
        Item::Always(a) => {
            out.push_str("always ");
            match &a.sens {
                Sensitivity::Star => out.push_str("@* "),
                Sensitivity::List(l) => write!(out, "@({}) ", events(l)).unwrap(),
                Sensitivity::None => {}
            }
            print_stmt_inline(out, &a.body, lvl);
        }
        Item::Initial(i) => {
            out.push_str("initial ");
            print_stmt_inline(out, &i.body, lvl);
        }
        Item::Instance(i) => {
            out.push_str(&i.module);
            if !i.params.is_empty() {
                write!(out, " #{}", connections(&i.params)).unwrap();
            }
            writeln!(out, " {} {};", i.name, connections(&i.conns)).unwrap();
        }
        Item::Function(f) => {
            writeln!(out, "function {}{};", range(&f.range), f.name).unwrap();
            for p in &f.inputs {
                indent(out, lvl + 1);
                writeln!(out, "input {}{};", range(&p.range), p.name).unwrap();
            }
            for l in &f.locals {
                indent(out, lvl + 1);
                writeln!(out, "{}", net_decl(l)).unwrap();
            }
            indent(out, lvl + 1);
            print_stmt_inline(out, &f.body, lvl + 1);
            indent(out, lvl);
            out.push_str("endfunction\n");
        }
    }
}

/// Print a statement whose first line continues the current line.
fn print_stmt_inline(out: &mut String, s: &Stmt, lvl: usize) {
    match &s.kind {
        StmtKind::Block(v) => {
            out.push_str("begin\n");
            for st in v {
                indent(out, lvl + 1);
                print_stmt_inline(out, st, lvl + 1);
            }
            indent(out, lvl);
            out.push_str("end\n");
        }
        StmtKind::If(c, t, e) => {
            write!(out, "if ({}) ", print_expr(c)).unwrap();
            let dangling = e.is_some() && matches!(t.kind, StmtKind::If(_, _, None));
            if dangling {
                out.push_str("begin\n");
                indent(out, lvl + 1);
                print_stmt_inline(out, t, lvl + 1);
                indent(out, lvl);
                out.push_str("end\n");
            } else {
                print_stmt_inline(out, t, lvl);
            }
            if let Some(e) = e {
                indent(out, lvl);
                out.push_str("else ");
                print_stmt_inline(out, e, lvl);
            }
        }
        StmtKind::Case { sel, arms, default } => {
            writeln!(out, "case ({})", print_expr(sel)).unwrap();
            for a in arms {
                indent(out, lvl + 1);
                let labels: Vec<String> = a.labels.iter().map(print_expr).collect();
                write!(out, "{}: ", labels.join(", ")).unwrap();
                print_stmt_inline(out, &a.body, lvl + 1);
            }
            if let Some(d) = default {
                indent(out, lvl + 1);
                out.push_str("default: ");
                print_stmt_inline(out, d, lvl + 1);
            }
            indent(out, lvl);
            out.push_str("endcase\n");
        }
        StmtKind::Blocking(l, r) => writeln!(out, "{} = {};", print_expr(l), print_expr(r)).unwrap(),
        StmtKind::NonBlocking(l, r) => writeln!(out, "{} <= {};", print_expr(l), print_expr(r)).unwrap(),
        StmtKind::Delay(d, body) => {
            write!(out, "#({})", print_expr(d)).unwrap();
            match body {
                Some(b) => {
                    out.push(' ');
                    print_stmt_inline(out, b, lvl);
                }
                None => out.push_str(";\n"),
            }
        }
        StmtKind::Wait(ev, body) => {
            write!(out, "@({})", events(ev)).unwrap();
            match body {
                Some(b) => {
                    out.push(' ');
                    print_stmt_inline(out, b, lvl);
                }
                None => out.push_str(";\n"),
            }
        }
        StmtKind::Forever(b) => {
            out.push_str("forever ");
            print_stmt_inline(out, b, lvl);
        }
        StmtKind::Repeat(n, b) => {
            write!(out, "repeat ({}) ", print_expr(n)).unwrap();
            print_stmt_inline(out, b, lvl);
        }
        StmtKind::SysTask(name, args) => {
            if args.is_empty() {
                writeln!(out, "${name};").unwrap();
            } else {
                let a: Vec<String> = args.iter().map(print_expr).collect();
                writeln!(out, "${name}({});", a.join(", ")).unwrap();
            }
        }
        StmtKind::Null => out.push_str(";\n"),
    }
}

pub fn print_expr(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Number { size: Some(s), value } => format!("{s}'h{}", value.to_hex_string()),
        ExprKind::Number { size: None, value } => value.to_decimal_string(),
        ExprKind::Ident(n) => n.clone(),
        ExprKind::Index(b, i) => format!("{}[{}]", print_expr(b), print_expr(i)),
        ExprKind::Slice(b, m, l) => format!("{}[{}:{}]", print_expr(b), print_expr(m), print_expr(l)),
        ExprKind::IndexedSlice { base, start, width, up } => format!(
            "{}[{} {} {}]",
            print_expr(base),
            print_expr(start),
            if *up { "+:" } else { "-:" },
            print_expr(width)
        ),
        ExprKind::Unary(op, x) => format!("({}{})", op.symbol(), print_expr(x)),
        ExprKind::Binary(op, l, r) => format!("({} {} {})", print_expr(l), op.symbol(), print_expr(r)),
        ExprKind::Ternary(c, t, f) => format!("({} ? {} : {})", print_expr(c), print_expr(t), print_expr(f)),
        ExprKind::Concat(v) => {
            let p: Vec<String> = v.iter().map(print_expr).collect();
            format!("{{{}}}", p.join(", "))
        }
        ExprKind::Replicate(n, v) => {
            let p: Vec<String> = v.iter().map(print_expr).collect();
            format!("{{{}{{{}}}}}", print_expr(n), p.join(", "))
        }
        ExprKind::Call(f, args) if args.is_empty() && f.starts_with('$') => f.clone(),
        ExprKind::Call(f, args) => {
            let p: Vec<String> = args.iter().map(print_expr).collect();
            format!("{f}({})", p.join(", "))
        }
        ExprKind::Str(s) => format!(
            "\"{}\"",
            s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n")
        ),
    }
}
