use std::fmt::Write;

use super::ast::*;

/// Canonical source text of a problem; parsing it yields an equal tree.
pub fn print_problem(ast: &ProblemAst) -> String {
    let mut blocks = Vec::new();
    for section in &ast.sections {
        let mut out = String::new();
        match section {
            Section::Bundle(b) => {
                out.push_str("[bundle]\n");
                let _ = writeln!(out, "base = {}", b.base.join(", "));
                let _ = writeln!(out, "fields = {}", b.fields.join(", "));
                if !b.params.is_empty() {
                    let _ = writeln!(out, "params = {}", b.params.join(", "));
                }
                let _ = writeln!(out, "order = {}", b.order);
                if let Some(cap) = b.cap {
                    let _ = writeln!(out, "cap = {cap}");
                }
            }
            Section::Symbols(symbols) => {
                out.push_str("[symbols]\n");
                for s in symbols {
                    let _ = write!(out, "{}({})", s.name, s.params.join(", "));
                    if !s.rules.is_empty() {
                        let rules: Vec<String> =
                            s.rules.iter().map(|(p, e)| format!("d/d{p} = {}", print_expr(e))).collect();
                        let _ = write!(out, " where {}", rules.join("; "));
                    }
                    out.push('\n');
                }
            }
            Section::Lagrangian(e) => {
                let _ = writeln!(out, "[lagrangian]\n{}", print_expr(e));
            }
            Section::Lift(l) => {
                let _ = writeln!(out, "[lift {}]", l.name);
                if let Some(xi) = &l.xi {
                    let _ = writeln!(out, "xi = {}", print_list(xi));
                }
                if let Some(b) = l.bracket {
                    let _ = writeln!(out, "bracket = {}", b.keyword());
                }
                print_assignments(&mut out, &l.components);
            }
            Section::Variation(v) => {
                let _ = writeln!(out, "[variation {}]", v.name);
                print_assignments(&mut out, &v.components);
            }
            Section::Background(b) => {
                out.push_str("[background]\n");
                print_assignments(&mut out, &b.components);
                if let Some((field, _)) = &b.jacobi {
                    let _ = writeln!(out, "jacobi = {field}");
                }
                if let Some(r) = &b.interval {
                    let _ = writeln!(out, "interval = {}", print_range(r));
                }
                if let Some(init) = &b.initial {
                    let _ = writeln!(out, "initial = {}", print_list(init));
                }
            }
            Section::Oracle(o) => {
                out.push_str("[oracle]\n");
                print_assignments(&mut out, &o.components);
                let ranges: Vec<String> = o.domain.iter().map(print_range).collect();
                let _ = writeln!(out, "domain = {}", ranges.join(", "));
                let _ = writeln!(out, "nodes = {}", o.nodes);
                if let Some(a) = o.accuracy {
                    let _ = writeln!(out, "accuracy = {a}");
                }
            }
        }
        blocks.push(out);
    }
    blocks.join("\n")
}

fn print_assignments(out: &mut String, list: &[Assignment]) {
    for a in list {
        let _ = writeln!(out, "{} = {}", a.key, print_list(&a.values));
    }
}

fn print_list(list: &[ExprAst]) -> String {
    list.iter().map(print_expr).collect::<Vec<_>>().join(", ")
}

fn print_range(r: &Range) -> String {
    format!("{} .. {}", print_expr(&r.lo), print_expr(&r.hi))
}

const ATOM: u8 = 5;
const UNARY: u8 = 3;

pub fn print_expr(e: &ExprAst) -> String {
    printed(e).0
}

fn wrap(s: (String, u8), min: u8) -> String {
    if s.1 >= min {
        s.0
    } else {
        format!("({})", s.0)
    }
}

fn printed(e: &ExprAst) -> (String, u8) {
    match e {
        ExprAst::Number { text, .. } => (text.clone(), ATOM),
        ExprAst::Var { name, jet, .. } => {
            let mut s = String::new();
            for part in name {
                match part {
                    NamePart::Lit(t) => s.push_str(t),
                    NamePart::Index(i) => {
                        let _ = write!(s, "{{{i}}}");
                    }
                }
            }
            match jet {
                JetSuffix::None => {}
                JetSuffix::Letters(l) if l.chars().count() == 1 => {
                    let _ = write!(s, "_{l}");
                }
                JetSuffix::Letters(l) => {
                    let _ = write!(s, "_{{{l}}}");
                }
                JetSuffix::Counts(c) => {
                    let c: Vec<String> = c.iter().map(u32::to_string).collect();
                    let _ = write!(s, "[{}]", c.join(", "));
                }
            }
            (s, ATOM)
        }
        ExprAst::Call { func, args, .. } => (format!("{func}({})", print_list(args)), ATOM),
        ExprAst::Sum { index, lo, hi, body, .. } => (format!("sum({index}, {lo}..{hi}, {})", print_expr(body)), ATOM),
        ExprAst::Neg { arg, .. } => (format!("-{}", wrap(printed(arg), UNARY)), UNARY),
        ExprAst::Binary { op: BinOp::Pow, lhs, rhs, .. } => {
            (format!("{}^{}", wrap(printed(lhs), ATOM), wrap(printed(rhs), UNARY)), BinOp::Pow.precedence())
        }
        ExprAst::Binary { op, lhs, rhs, .. } => {
            let p = op.precedence();
            let sep = if p == 1 { format!(" {} ", op.symbol()) } else { op.symbol().to_string() };
            (format!("{}{sep}{}", wrap(printed(lhs), p), wrap(printed(rhs), p + 1)), p)
        }
    }
}
