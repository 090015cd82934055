use std::fmt::Write;

use qinl_core::value::Datum;

use super::ast::*;

/// Canonical text of a source unit; declarations are separated by blank
/// lines.
pub fn print(unit: &SourceUnit) -> String {
    let mut out = String::new();
    for (i, d) in unit.decls.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        print_decl(&mut out, d);
        out.push('\n');
    }
    out
}

pub fn print_decl(out: &mut String, d: &Decl) {
    match d {
        Decl::Schema(s) => print_schema(out, s),
        Decl::Instance(i) => print_instance(out, i),
        Decl::Mapping(m) => print_mapping(out, m),
        Decl::Query(q) => {
            let _ = write!(out, "query {} : {} = {}", q.name.text, q.schema.text, q.query);
        }
        Decl::Nrc(n) => {
            let _ = write!(out, "nrc {}", n.name.text);
            if let Some(s) = &n.schema {
                let _ = write!(out, " : {}", s.text);
            }
            let _ = write!(out, " = {}", n.expr);
        }
        Decl::Migrate(m) => {
            let _ = write!(
                out,
                "migrate {} = {} {} {}",
                m.name.text, m.direction, m.mapping.text, m.instance.text
            );
        }
    }
}

fn join(names: &[Name]) -> String {
    names.iter().map(|n| n.text.as_str()).collect::<Vec<_>>().join(", ")
}

fn print_schema(out: &mut String, s: &SchemaDecl) {
    let _ = write!(out, "schema {} = {{", s.name.text);
    if s.entities.is_empty() && s.attributes.is_empty() && s.operations.is_empty() && s.equations.is_empty() {
        out.push_str(" }");
        return;
    }
    out.push('\n');
    if !s.entities.is_empty() {
        let _ = writeln!(out, "  entities {};", join(&s.entities));
    }
    if !s.attributes.is_empty() {
        let _ = writeln!(out, "  attributes {};", join(&s.attributes));
    }
    if !s.operations.is_empty() {
        out.push_str("  operations\n");
        for (i, op) in s.operations.iter().enumerate() {
            let sep = if i + 1 == s.operations.len() { ";" } else { "," };
            let _ = writeln!(out, "    {} : {} -> {}{}", op.name.text, op.dom, op.cod, sep);
        }
    }
    if !s.equations.is_empty() {
        out.push_str("  equations\n");
        for eq in &s.equations {
            out.push_str("    ");
            print_equation(out, eq);
            out.push_str(";\n");
        }
    }
    out.push('}');
}

pub fn print_equation(out: &mut String, eq: &EquationDecl) {
    if !eq.ctx.is_empty() {
        out.push_str("forall ");
        for (i, (v, t)) in eq.ctx.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "{}:{}", v.text, t);
        }
        out.push_str(". ");
    }
    let _ = write!(out, "{} = {}", eq.lhs, eq.rhs);
}

fn print_instance(out: &mut String, i: &InstanceDecl) {
    let _ = write!(out, "instance {} : {} = {{", i.name.text, i.schema.text);
    if i.entries.is_empty() {
        out.push_str(" }");
        return;
    }
    out.push('\n');
    for e in &i.entries {
        let _ = write!(out, "  {} = {{", e.name.text);
        for (k, item) in e.items.iter().enumerate() {
            out.push_str(if k == 0 { " " } else { ", " });
            out.push_str(&item.row.text);
            if let Some(v) = &item.value {
                out.push_str(" -> ");
                print_literal(out, v);
            }
        }
        out.push_str(" };\n");
    }
    out.push('}');
}

pub fn print_literal(out: &mut String, v: &Literal) {
    match v {
        Literal::Row(r) => out.push_str(r),
        Literal::Int(n) => {
            let _ = write!(out, "{}", n);
        }
        Literal::Str(s) => {
            let _ = write!(out, "{}", Datum::Str(s.clone()));
        }
        Literal::Null(n) => {
            let _ = write!(out, "?{}", n);
        }
        Literal::Unit => out.push_str("()"),
        Literal::Pair(a, b) => {
            out.push('(');
            print_literal(out, a);
            out.push_str(", ");
            print_literal(out, b);
            out.push(')');
        }
        Literal::App(op, arg) => {
            out.push_str(op);
            match &**arg {
                Literal::Unit => out.push_str("()"),
                Literal::Pair(..) => print_literal(out, arg),
                other => {
                    out.push('(');
                    print_literal(out, other);
                    out.push(')');
                }
            }
        }
    }
}

fn print_mapping(out: &mut String, m: &MappingDecl) {
    let _ = write!(
        out,
        "mapping {} : {} -> {} = {{",
        m.name.text, m.source.text, m.target.text
    );
    if m.types.is_empty() && m.ops.is_empty() {
        out.push_str(" }");
        return;
    }
    out.push('\n');
    for (from, to) in &m.types {
        let _ = writeln!(out, "  {} -> {};", from.text, to.text);
    }
    for op in &m.ops {
        let _ = writeln!(out, "  {} -> ({} => {});", op.op.text, op.var.text, op.body);
    }
    out.push('}');
}
