use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Map, Value as Json};

use qinl_core::migration::{delta, for_each_hom, pi, sigma, HomError};
use qinl_core::nrc::{nrc_eval, Env};
use qinl_core::query::eval_query;
use qinl_core::schema::{check_instance, EquationStatus, InstanceError, InstanceInterp};
use qinl_core::value::Builtins;

use super::render;
use super::{Diagnostic, Outcome, RunConfig, EXIT_ERROR, EXIT_FAILED};
use crate::surface::elaborate::{nrc_env, MigrateFailure, NamedInstance};
use crate::surface::printer::print_decl;
use crate::surface::{elaborate, instance_to_decl, parse, Decl, Direction, Namespace, SourceUnit, Span, Workspace};

fn diag(span: Span, message: String) -> Diagnostic {
    Diagnostic {
        line: span.line,
        column: span.col,
        message,
    }
}

struct Loaded {
    unit: SourceUnit,
    ws: Workspace,
    /// elaboration failures with their spans
    errors: Vec<(Span, String)>,
}

fn load(path: &Path) -> Result<Loaded, Outcome> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Outcome::fail(EXIT_ERROR, format!("cannot read {}: {}", path.display(), e)))?;
    let unit = parse(&text).map_err(|errs| {
        let mut o = Outcome::new();
        o.raise(EXIT_ERROR);
        o.diagnostics = errs
            .into_iter()
            .map(|e| diag(e.span(), strip_location(&e.to_string())))
            .collect();
        o
    })?;
    let (ws, errs) = elaborate(&unit);
    let errors = errs.into_iter().map(|e| (e.span, e.message)).collect();
    Ok(Loaded { unit, ws, errors })
}

/// Error texts carry a `line:col: ` prefix that diagnostics hold
/// separately.
fn strip_location(s: &str) -> String {
    match s.split_once(": ") {
        Some((loc, rest)) if loc.split(':').all(|p| p.parse::<u32>().is_ok()) => rest.to_string(),
        _ => s.to_string(),
    }
}

/// A workspace from a file that must elaborate completely.
fn load_strict(path: &Path) -> Result<Workspace, Outcome> {
    let loaded = load(path)?;
    if loaded.errors.is_empty() {
        return Ok(loaded.ws);
    }
    let mut o = Outcome::new();
    o.raise(EXIT_ERROR);
    o.diagnostics = loaded.errors.into_iter().map(|(s, m)| diag(s, m)).collect();
    Err(o)
}

/// Looks up an instance, running the migration that defines it if needed.
fn instance<'w>(ws: &'w mut Workspace, name: &str, cfg: &RunConfig) -> Result<&'w NamedInstance, Outcome> {
    match ws.instance(name, &cfg.migration()) {
        None => Err(Outcome::fail(EXIT_ERROR, format!("unknown instance `{}`", name))),
        Some(Ok(i)) => Ok(i),
        Some(Err(MigrateFailure::Migration(e))) => {
            let (_, code, fields) = render::migration_failure(&e);
            let mut o = Outcome::fail(code, format!("computing instance `{}`: {}", name, e));
            o.fields = fields;
            Err(o)
        }
        Some(Err(e)) => Err(Outcome::fail(
            EXIT_FAILED,
            format!("computing instance `{}`: {}", name, e),
        )),
    }
}

pub(crate) fn check(path: &Path, cfg: &RunConfig) -> Outcome {
    let Loaded { unit, mut ws, errors } = match load(path) {
        Ok(l) => l,
        Err(o) => return o,
    };
    let mut o = Outcome::new();
    let elaborated: BTreeSet<(Namespace, String)> = ws.order.iter().cloned().collect();
    let mut decls = Vec::new();
    for d in &unit.decls {
        let name = d.name().text.clone();
        let mut entry = Map::new();
        let kind = match d {
            Decl::Schema(_) => "schema",
            Decl::Instance(_) => "instance",
            Decl::Mapping(_) => "mapping",
            Decl::Query(_) => "query",
            Decl::Nrc(_) => "nrc",
            Decl::Migrate(_) => "migrate",
        };
        entry.insert("kind".into(), kind.into());
        entry.insert("name".into(), name.clone().into());
        entry.insert("line".into(), d.span().line.into());
        if !elaborated.contains(&(d.namespace(), name.clone())) {
            let span = d.span();
            let failure = errors
                .iter()
                .find(|(s, _)| s.start >= span.start && s.start <= span.end);
            match failure {
                Some((s, m)) => {
                    o.raise(EXIT_ERROR);
                    o.diagnostics.push(diag(*s, m.clone()));
                    entry.insert("status".into(), "error".into());
                    entry.insert("message".into(), m.clone().into());
                    let _ = writeln!(o.table, "{} {}: error: {}", kind, name, m);
                }
                None => {
                    entry.insert("status".into(), "skipped".into());
                    let _ = writeln!(
                        o.table,
                        "{} {}: skipped (depends on a declaration with errors)",
                        kind, name
                    );
                }
            }
            decls.push(Json::Object(entry));
            continue;
        }
        match d {
            Decl::Schema(_) => {
                let s = &ws.schemas[&name];
                let counts = (
                    s.entities.len(),
                    s.attributes.len(),
                    s.theory.sig.operations().len(),
                    s.theory.equations.len(),
                );
                entry.insert("status".into(), "ok".into());
                entry.insert("entities".into(), counts.0.into());
                entry.insert("attributes".into(), counts.1.into());
                entry.insert("operations".into(), counts.2.into());
                entry.insert("equations".into(), counts.3.into());
                let _ = writeln!(
                    o.table,
                    "schema {}: ok ({} entities, {} attributes, {} operations, {} equations)",
                    name, counts.0, counts.1, counts.2, counts.3
                );
            }
            Decl::Instance(_) => {
                let ni = &ws.instances[&name];
                let header = format!("instance {} : {}", name, ni.schema);
                check_instance_entry(&ws, ni, &header, cfg, &mut entry, &mut o);
            }
            Decl::Mapping(_) => {
                let m = &ws.mappings[&name];
                let header = format!("mapping {} : {} -> {}", name, m.source, m.target);
                match m.mapping.check_preservation(cfg.fuel) {
                    Err(e) => {
                        o.raise(EXIT_ERROR);
                        entry.insert("status".into(), "error".into());
                        entry.insert("message".into(), e.to_string().into());
                        let _ = writeln!(o.table, "{}: error: {}", header, e);
                    }
                    Ok(verdicts) => {
                        let proved = verdicts.iter().filter(|v| v.is_proved()).count();
                        let status = if proved == verdicts.len() { "proved" } else { "unknown" };
                        if status != "proved" {
                            o.raise(EXIT_FAILED);
                        }
                        entry.insert("status".into(), status.into());
                        let _ = writeln!(
                            o.table,
                            "{}: {} ({} of {} equations proved)",
                            header,
                            status,
                            proved,
                            verdicts.len()
                        );
                        let mut eqs = Vec::new();
                        for (k, v) in verdicts.iter().enumerate() {
                            let eq = &m.mapping.source.theory.equations[k];
                            let mut fields = render::verdict(v);
                            fields.insert("index".into(), (k + 1).into());
                            fields.insert("equation".into(), eq.to_string().into());
                            eqs.push(Json::Object(fields));
                            let _ = writeln!(
                                o.table,
                                "  #{} {}: {}",
                                k + 1,
                                eq,
                                v.to_string().lines().next().unwrap_or_default()
                            );
                        }
                        entry.insert("equations".into(), eqs.into());
                    }
                }
            }
            Decl::Query(_) => {
                let q = &ws.queries[&name];
                entry.insert("status".into(), "ok".into());
                entry.insert("result_type".into(), q.result.to_string().into());
                let _ = writeln!(o.table, "query {} : {}: ok, returns {}", name, q.schema, q.result);
            }
            Decl::Nrc(_) => {
                let n = &ws.nrc[&name];
                entry.insert("status".into(), "ok".into());
                entry.insert("type".into(), n.ty.to_string().into());
                let _ = writeln!(o.table, "nrc {}: ok, type {}", name, n.ty);
            }
            Decl::Migrate(m) => {
                let header = format!(
                    "migrate {} = {} {} {}",
                    name, m.direction, m.mapping.text, m.instance.text
                );
                match ws.instance(&name, &cfg.migration()) {
                    Some(Ok(ni)) => {
                        let ni = ni.clone();
                        check_instance_entry(&ws, &ni, &header, cfg, &mut entry, &mut o);
                        entry.insert("rows".into(), ni.instance.size().into());
                    }
                    Some(Err(MigrateFailure::Migration(e))) => {
                        let (word, code, fields) = render::migration_failure(&e);
                        o.raise(code);
                        entry.extend(fields);
                        let _ = writeln!(o.table, "{}: {}: {}", header, word, e);
                    }
                    Some(Err(e)) => {
                        entry.insert("status".into(), "skipped".into());
                        let _ = writeln!(o.table, "{}: skipped ({})", header, e);
                    }
                    None => unreachable!("elaborated migrations are registered"),
                }
            }
        }
        decls.push(Json::Object(entry));
    }
    o.fields.insert("declarations".into(), decls.into());
    o
}

fn check_instance_entry(
    ws: &Workspace,
    ni: &NamedInstance,
    header: &str,
    cfg: &RunConfig,
    entry: &mut Map<String, Json>,
    o: &mut Outcome,
) {
    let schema = &ws.schemas[&ni.schema];
    match check_instance(schema, &ni.instance, &cfg.sampling()) {
        Err(e) => {
            let code = if matches!(e, InstanceError::TooLarge { .. }) {
                EXIT_FAILED
            } else {
                EXIT_ERROR
            };
            o.raise(code);
            let word = if code == EXIT_FAILED { "too_large" } else { "error" };
            entry.insert("status".into(), word.into());
            entry.insert("message".into(), e.to_string().into());
            let _ = writeln!(o.table, "{}: {}: {}", header, word, e);
        }
        Ok(report) => {
            let violated = report.statuses.iter().any(EquationStatus::is_violated);
            let undetermined = report
                .statuses
                .iter()
                .any(|s| matches!(s, EquationStatus::Undetermined { .. }));
            let status = if violated {
                "violated"
            } else if undetermined {
                "undetermined"
            } else {
                "ok"
            };
            if status != "ok" {
                o.raise(EXIT_FAILED);
            }
            entry.insert("status".into(), status.into());
            let _ = writeln!(o.table, "{}: {}", header, status);
            let mut eqs = Vec::new();
            for (k, s) in report.statuses.iter().enumerate() {
                let eq = &schema.theory.equations[k];
                let (_, text, mut fields) = render::equation_status(s);
                fields.insert("index".into(), (k + 1).into());
                fields.insert("equation".into(), eq.to_string().into());
                eqs.push(Json::Object(fields));
                let _ = writeln!(o.table, "  #{} {}: {}", k + 1, eq, text);
            }
            entry.insert("equations".into(), eqs.into());
        }
    }
}

pub(crate) fn eval(path: &Path, name: &str, inst: Option<&str>, cfg: &RunConfig) -> Outcome {
    let mut ws = match load_strict(path) {
        Ok(ws) => ws,
        Err(o) => return o,
    };
    let Some(n) = ws.nrc.get(name).cloned() else {
        return Outcome::fail(EXIT_ERROR, format!("unknown nrc expression `{}`", name));
    };
    let result = match &n.schema {
        None => nrc_eval(&Env::new(), &n.expr, &Builtins::standard()),
        Some(schema_name) => {
            let Some(inst_name) = inst else {
                return Outcome::fail(
                    EXIT_ERROR,
                    format!("`{}` ranges over schema `{}`; pass --instance", name, schema_name),
                );
            };
            let ni = match instance(&mut ws, inst_name, cfg) {
                Ok(ni) => ni.clone(),
                Err(o) => return o,
            };
            if &ni.schema != schema_name {
                return Outcome::fail(
                    EXIT_ERROR,
                    format!(
                        "`{}` is an instance of `{}`, not `{}`",
                        inst_name, ni.schema, schema_name
                    ),
                );
            }
            let schema = &ws.schemas[schema_name];
            let interp = InstanceInterp {
                schema,
                instance: &ni.instance,
            };
            nrc_eval(&nrc_env(schema, &ni.instance), &n.expr, &interp)
        }
    };
    match result {
        Err(e) => Outcome::fail(EXIT_ERROR, format!("evaluating `{}`: {}", name, e)),
        Ok(v) => {
            let mut o = Outcome::new();
            let _ = writeln!(o.table, "{}", v);
            o.fields.insert("name".into(), name.into());
            o.fields.insert("instance".into(), inst.map_or(Json::Null, Json::from));
            o.fields.insert("type".into(), n.ty.to_string().into());
            o.fields.insert("value".into(), render::value(&v));
            o
        }
    }
}

pub(crate) fn query(path: &Path, query: &str, inst: &str, cfg: &RunConfig) -> Outcome {
    let mut ws = match load_strict(path) {
        Ok(ws) => ws,
        Err(o) => return o,
    };
    let Some(q) = ws.queries.get(query).cloned() else {
        return Outcome::fail(EXIT_ERROR, format!("unknown query `{}`", query));
    };
    let ni = match instance(&mut ws, inst, cfg) {
        Ok(ni) => ni.clone(),
        Err(o) => return o,
    };
    if ni.schema != q.schema {
        return Outcome::fail(
            EXIT_ERROR,
            format!(
                "query `{}` is over `{}`, but `{}` is an instance of `{}`",
                query, q.schema, inst, ni.schema
            ),
        );
    }
    let result = match eval_query(&ws.schemas[&q.schema], &ni.instance, &q.query) {
        Ok(r) => r,
        Err(e) => return Outcome::fail(EXIT_ERROR, format!("evaluating `{}`: {}", query, e)),
    };
    let mut o = Outcome::new();
    for v in result.rendered_values() {
        let _ = writeln!(o.table, "{}", v);
    }
    for w in &result.warnings {
        o.warnings.push(format!(
            "clause #{} compared {} with {} at {}; the tuple was dropped",
            w.clause + 1,
            w.lhs,
            w.rhs,
            qinl_core::query::render_env(&w.env)
        ));
    }
    o.fields.insert("query".into(), query.into());
    o.fields.insert("instance".into(), inst.into());
    o.fields.insert("result_type".into(), q.result.to_string().into());
    o.fields
        .insert("values".into(), result.values.iter().map(render::value).collect());
    o.fields.insert(
        "witnesses".into(),
        result
            .witnesses
            .iter()
            .map(|(env, v)| json!({"env": render::env(env), "value": render::value(v)}))
            .collect(),
    );
    o
}

pub(crate) fn migrate(
    path: &Path,
    direction: Direction,
    mapping: &str,
    inst: &str,
    out: Option<&Path>,
    cfg: &RunConfig,
) -> Outcome {
    let mut ws = match load_strict(path) {
        Ok(ws) => ws,
        Err(o) => return o,
    };
    let Some(f) = ws.mappings.get(mapping).cloned() else {
        return Outcome::fail(EXIT_ERROR, format!("unknown mapping `{}`", mapping));
    };
    let ni = match instance(&mut ws, inst, cfg) {
        Ok(ni) => ni.clone(),
        Err(o) => return o,
    };
    let (expected, result_schema) = match direction {
        Direction::Delta => (&f.target, &f.source),
        Direction::Sigma | Direction::Pi => (&f.source, &f.target),
    };
    if &ni.schema != expected {
        return Outcome::fail(
            EXIT_ERROR,
            format!(
                "{} along `{}` needs an instance of `{}`, but `{}` is an instance of `{}`",
                direction, mapping, expected, inst, ni.schema
            ),
        );
    }
    let opts = cfg.migration();
    let result = match direction {
        Direction::Delta => delta(&f.mapping, &ni.instance, &opts),
        Direction::Sigma => sigma(&f.mapping, &ni.instance, &opts),
        Direction::Pi => pi(&f.mapping, &ni.instance, &opts),
    };
    let mut o = Outcome::new();
    o.fields.insert("direction".into(), direction.keyword().into());
    o.fields.insert("mapping".into(), mapping.into());
    o.fields.insert("instance".into(), inst.into());
    let result = match result {
        Ok(r) => r,
        Err(e) => {
            let (_, code, fields) = render::migration_failure(&e);
            o.raise(code);
            o.error = Some(e.to_string());
            o.fields.insert("failure".into(), Json::Object(fields));
            return o;
        }
    };
    let schema = &ws.schemas[result_schema];
    let name = format!("{}_{}_{}", direction, mapping, inst);
    let mut text = String::new();
    print_decl(
        &mut text,
        &Decl::Instance(instance_to_decl(&name, result_schema, schema, &result)),
    );
    text.push('\n');
    let mut summary = render::instance(schema, &result);
    summary["name"] = name.clone().into();
    summary["schema"] = result_schema.clone().into();
    o.fields.insert("result".into(), summary);
    o.fields.insert("text".into(), text.clone().into());
    match out {
        Some(p) => {
            if let Err(e) = std::fs::write(p, &text) {
                return Outcome::fail(EXIT_ERROR, format!("cannot write {}: {}", p.display(), e));
            }
            o.fields.insert("out".into(), p.display().to_string().into());
            let _ = writeln!(
                o.table,
                "wrote instance {} : {} ({} rows) to {}",
                name,
                result_schema,
                result.size(),
                p.display()
            );
        }
        None => {
            o.fields.insert("out".into(), Json::Null);
            o.table = text;
        }
    }
    o
}

pub(crate) fn homs(path: &Path, from: &str, to: &str, list: bool, cfg: &RunConfig) -> Outcome {
    let mut ws = match load_strict(path) {
        Ok(ws) => ws,
        Err(o) => return o,
    };
    let a = match instance(&mut ws, from, cfg) {
        Ok(ni) => ni.clone(),
        Err(o) => return o,
    };
    let b = match instance(&mut ws, to, cfg) {
        Ok(ni) => ni.clone(),
        Err(o) => return o,
    };
    if a.schema != b.schema {
        return Outcome::fail(
            EXIT_ERROR,
            format!(
                "`{}` is an instance of `{}` but `{}` is an instance of `{}`",
                from, a.schema, to, b.schema
            ),
        );
    }
    let schema = &ws.schemas[&a.schema];
    let mut count = 0usize;
    let mut listed = Vec::new();
    let mut lines = String::new();
    let res = for_each_hom(schema, &a.instance, &b.instance, &mut |h| {
        count += 1;
        if list {
            let _ = writeln!(lines, "#{} {}", count, render::hom_text(h));
            listed.push(render::hom_json(h));
        }
    });
    if let Err(e) = res {
        let code = match e {
            HomError::TooLarge { .. } | HomError::UnboundNull(_) => EXIT_FAILED,
            HomError::Invalid(_) => EXIT_ERROR,
        };
        let mut o = Outcome::fail(code, e.to_string());
        if let HomError::TooLarge { size, limit } = e {
            o.fields.insert("search_space".into(), size.to_string().into());
            o.fields.insert("limit".into(), limit.to_string().into());
        }
        return o;
    }
    let mut o = Outcome::new();
    let _ = writeln!(o.table, "{}", count);
    o.table.push_str(&lines);
    o.fields.insert("from".into(), from.into());
    o.fields.insert("to".into(), to.into());
    o.fields.insert("count".into(), count.into());
    if list {
        o.fields.insert("homomorphisms".into(), listed.into());
    }
    o
}
