//! Turns a parsed unit into core objects. Each failure is reported once,
//! at the most specific span available; declarations that depend on a
//! failed one are skipped without a second report.

use std::collections::{BTreeMap, BTreeSet};

use qinl_core::equality::{Equation, Theory};
use qinl_core::kernel::{Context, Signature, TypeExpr};
use qinl_core::mapping::{MappingError, OpImage, SchemaMapping};
use qinl_core::migration::{delta, pi, sigma, MigrationError, MigrationOptions};
use qinl_core::nrc::{nrc_infer_type, Env, NrcContext, NrcExpr, NrcType};
use qinl_core::query::{typecheck_query, Comprehension};
use qinl_core::schema::{FqlSchema, Instance, InstanceError, OpKind, SchemaError};
use qinl_core::value::{Builtins, Datum, Value};

use super::ast::*;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{span}: {message}")]
pub struct ElabError {
    pub span: Span,
    pub message: String,
}

fn err<T>(span: Span, message: impl Into<String>) -> Result<T, ElabError> {
    Err(ElabError {
        span,
        message: message.into(),
    })
}

#[derive(Clone, Debug)]
pub struct NamedInstance {
    pub schema: String,
    pub instance: Instance,
}

#[derive(Clone, Debug)]
pub struct NamedMapping {
    pub source: String,
    pub target: String,
    pub mapping: SchemaMapping,
}

#[derive(Clone, Debug)]
pub struct NamedQuery {
    pub schema: String,
    pub query: Comprehension,
    pub result: TypeExpr,
}

#[derive(Clone, Debug)]
pub struct NamedNrc {
    pub schema: Option<String>,
    pub expr: NrcExpr,
    pub ty: NrcType,
}

/// A migration directive whose inputs elaborated; run on demand.
#[derive(Clone, Debug)]
pub struct PendingMigration {
    pub decl: MigrateDecl,
    /// schema of the resulting instance
    pub schema: String,
}

#[derive(Clone, Debug, thiserror::Error)]
pub enum MigrateFailure {
    #[error(transparent)]
    Migration(#[from] MigrationError),
    /// The input is itself a migration result that failed.
    #[error("input instance `{0}` could not be computed")]
    Upstream(String),
}

#[derive(Clone, Debug, Default)]
pub struct Workspace {
    pub schemas: BTreeMap<String, FqlSchema>,
    pub instances: BTreeMap<String, NamedInstance>,
    pub mappings: BTreeMap<String, NamedMapping>,
    pub queries: BTreeMap<String, NamedQuery>,
    pub nrc: BTreeMap<String, NamedNrc>,
    pub migrations: BTreeMap<String, PendingMigration>,
    /// Results of migrations run so far.
    migrated: BTreeMap<String, Result<NamedInstance, MigrateFailure>>,
    /// Names of declarations that elaborated, in source order.
    pub order: Vec<(Namespace, String)>,
}

impl Workspace {
    /// Schema of a declared or migrated instance.
    pub fn instance_schema(&self, name: &str) -> Option<&str> {
        self.instances
            .get(name)
            .map(|i| i.schema.as_str())
            .or_else(|| self.migrations.get(name).map(|m| m.schema.as_str()))
    }

    /// A declared instance, or the result of running the migration that
    /// defines it (and any migrations it depends on).
    pub fn instance(&mut self, name: &str, opts: &MigrationOptions) -> Option<Result<&NamedInstance, MigrateFailure>> {
        if self.instances.contains_key(name) {
            return self.instances.get(name).map(Ok);
        }
        let pending = self.migrations.get(name)?.clone();
        if !self.migrated.contains_key(name) {
            let result = self.run(&pending, opts);
            self.migrated.insert(name.to_string(), result);
        }
        Some(self.migrated[name].as_ref().map_err(Clone::clone))
    }

    fn run(&mut self, p: &PendingMigration, opts: &MigrationOptions) -> Result<NamedInstance, MigrateFailure> {
        let input_name = p.decl.instance.text.clone();
        let input = match self.instance(&input_name, opts) {
            Some(Ok(i)) => i.instance.clone(),
            _ => return Err(MigrateFailure::Upstream(input_name)),
        };
        let f = &self.mappings[&p.decl.mapping.text].mapping;
        let instance = match p.decl.direction {
            Direction::Delta => delta(f, &input, opts)?,
            Direction::Sigma => sigma(f, &input, opts)?,
            Direction::Pi => pi(f, &input, opts)?,
        };
        Ok(NamedInstance {
            schema: p.schema.clone(),
            instance,
        })
    }
}

/// Elaborates every declaration; returns the workspace of those that
/// succeeded together with one error per failed declaration.
pub fn elaborate(unit: &SourceUnit) -> (Workspace, Vec<ElabError>) {
    let builtins = Builtins::standard();
    let mut ws = Workspace::default();
    let mut errors = Vec::new();
    for d in &unit.decls {
        let result = match d {
            Decl::Schema(s) => elab_schema(s, &builtins).map(|schema| {
                ws.schemas.insert(s.name.text.clone(), schema);
            }),
            Decl::Instance(i) => match ws.schemas.get(&i.schema.text) {
                None => continue,
                Some(schema) => elab_instance(i, schema).map(|instance| {
                    ws.instances.insert(
                        i.name.text.clone(),
                        NamedInstance {
                            schema: i.schema.text.clone(),
                            instance,
                        },
                    );
                }),
            },
            Decl::Mapping(m) => match (ws.schemas.get(&m.source.text), ws.schemas.get(&m.target.text)) {
                (Some(s), Some(t)) => elab_mapping(m, s, t).map(|mapping| {
                    ws.mappings.insert(
                        m.name.text.clone(),
                        NamedMapping {
                            source: m.source.text.clone(),
                            target: m.target.text.clone(),
                            mapping,
                        },
                    );
                }),
                _ => continue,
            },
            Decl::Query(q) => match ws.schemas.get(&q.schema.text) {
                None => continue,
                Some(schema) => match typecheck_query(schema, &q.query) {
                    Ok(result) => {
                        ws.queries.insert(
                            q.name.text.clone(),
                            NamedQuery {
                                schema: q.schema.text.clone(),
                                query: q.query.clone(),
                                result,
                            },
                        );
                        Ok(())
                    }
                    Err(e) => err(q.span, format!("query `{}`: {}", q.name.text, e)),
                },
            },
            Decl::Nrc(n) => {
                let schema = match &n.schema {
                    Some(s) => match ws.schemas.get(&s.text) {
                        Some(schema) => Some(schema),
                        None => continue,
                    },
                    None => None,
                };
                let (sig, ctx) = nrc_scope(schema, &builtins);
                match nrc_infer_type(&sig, &ctx, &n.expr) {
                    Ok(ty) => {
                        ws.nrc.insert(
                            n.name.text.clone(),
                            NamedNrc {
                                schema: n.schema.as_ref().map(|s| s.text.clone()),
                                expr: n.expr.clone(),
                                ty,
                            },
                        );
                        Ok(())
                    }
                    Err(e) => err(n.span, format!("expression `{}`: {}", n.name.text, e)),
                }
            }
            Decl::Migrate(m) => {
                let (Some(f), Some(input_schema)) =
                    (ws.mappings.get(&m.mapping.text), ws.instance_schema(&m.instance.text))
                else {
                    continue;
                };
                let (expected, result) = match m.direction {
                    Direction::Delta => (&f.target, &f.source),
                    Direction::Sigma | Direction::Pi => (&f.source, &f.target),
                };
                if input_schema != expected {
                    err(
                        m.instance.span,
                        format!(
                            "{} along `{}` needs an instance of `{}`, but `{}` is an instance of `{}`",
                            m.direction, m.mapping.text, expected, m.instance.text, input_schema
                        ),
                    )
                } else {
                    ws.migrations.insert(
                        m.name.text.clone(),
                        PendingMigration {
                            decl: m.clone(),
                            schema: result.clone(),
                        },
                    );
                    Ok(())
                }
            }
        };
        match result {
            Ok(()) => ws.order.push((d.namespace(), d.name().text.clone())),
            Err(e) => errors.push(e),
        }
    }
    (ws, errors)
}

/// Signature and context for an NRC expression: the schema's operations
/// with each entity type bound to the set of its rows, or just the
/// builtins.
pub fn nrc_scope(schema: Option<&FqlSchema>, builtins: &Builtins) -> (Signature, NrcContext) {
    match schema {
        Some(s) => {
            let mut ctx = NrcContext::new();
            for e in &s.entities {
                ctx = ctx.extend(e.clone(), NrcType::set(NrcType::base(e.clone())));
            }
            (s.theory.sig.clone(), ctx)
        }
        None => {
            let mut sig = Signature::new();
            for (t, _) in builtins.types() {
                sig.add_base_type(t);
            }
            for (name, op) in builtins.ops() {
                sig.add_operation(name, op.sig.dom.clone(), op.sig.cod.clone())
                    .expect("builtin signatures use registered types");
            }
            (sig, NrcContext::new())
        }
    }
}

/// Binds each entity type name to the set of its rows.
pub fn nrc_env(schema: &FqlSchema, inst: &Instance) -> Env {
    schema
        .entities
        .iter()
        .map(|e| (e.clone(), Value::set(inst.carrier(e).map(|r| Value::row(e.clone(), r)))))
        .collect()
}

fn elab_schema(s: &SchemaDecl, builtins: &Builtins) -> Result<FqlSchema, ElabError> {
    let mut sig = Signature::new();
    let mut seen = BTreeSet::new();
    for n in s.entities.iter().chain(&s.attributes) {
        if !seen.insert(n.text.as_str()) {
            return err(n.span, format!("type `{}` is declared twice", n.text));
        }
        sig.add_base_type(n.text.clone());
    }
    let mut ops = BTreeSet::new();
    for op in &s.operations {
        if !ops.insert(op.name.text.as_str()) {
            return err(op.name.span, format!("operation `{}` is declared twice", op.name.text));
        }
        if let Err(e) = sig.add_operation(op.name.text.clone(), op.dom.clone(), op.cod.clone()) {
            return err(op.span, format!("operation `{}`: {}", op.name.text, e));
        }
    }
    let mut theory = Theory::new(sig);
    for (k, eq) in s.equations.iter().enumerate() {
        let ctx = Context::from_bindings(eq.ctx.iter().map(|(v, t)| (v.text.clone(), t.clone())));
        let equation = Equation::new(ctx, eq.lhs.clone(), eq.rhs.clone());
        if let Err(e) = equation.check(&theory.sig) {
            return err(eq.span, format!("equation #{}: {}", k + 1, e));
        }
        theory = theory.with_equation(equation);
    }
    let names = |ns: &[Name]| ns.iter().map(|n| n.text.clone()).collect::<BTreeSet<_>>();
    FqlSchema::new(theory, names(&s.entities), names(&s.attributes), builtins).or_else(|e| {
        let op_span = |op: &str| {
            s.operations
                .iter()
                .find(|o| o.name.text == op)
                .map_or(s.span, |o| o.span)
        };
        let type_span = |t: &str| {
            s.entities
                .iter()
                .chain(&s.attributes)
                .find(|n| n.text == t)
                .map_or(s.span, |n| n.span)
        };
        let span = match &e {
            SchemaError::OverlappingKinds(t) | SchemaError::Unclassified(t) | SchemaError::UnknownAttributeType(t) => {
                type_span(t)
            }
            SchemaError::AttributeToEntity(op)
            | SchemaError::UnregisteredBuiltin(op)
            | SchemaError::UnsupportedOperation { op, .. }
            | SchemaError::BuiltinSignature { op, .. } => op_span(op),
            SchemaError::Theory(list) => list
                .first()
                .and_then(|(i, _)| s.equations.get(*i))
                .map_or(s.span, |e| e.span),
        };
        err(span, format!("schema `{}`: {}", s.name.text, e))
    })
}

/// Reads a literal at the given type of the schema.
pub fn literal_value(schema: &FqlSchema, ty: &TypeExpr, lit: &Literal) -> Result<Value, String> {
    let mismatch = || format!("`{}` is not a value of type {}", show_literal(lit), ty);
    match (ty, lit) {
        (TypeExpr::Unit, Literal::Unit) => Ok(Value::Unit),
        (TypeExpr::Prod(a, b), Literal::Pair(x, y)) => {
            Ok(Value::pair(literal_value(schema, a, x)?, literal_value(schema, b, y)?))
        }
        (TypeExpr::Base(t), _) if schema.is_entity(t) => match lit {
            Literal::Row(r) => Ok(Value::row(t.clone(), r.clone())),
            _ => Err(mismatch()),
        },
        (TypeExpr::Base(t), _) if schema.is_attribute(t) => match lit {
            Literal::Int(n) => schema.builtins.literal(t, Datum::Int(*n)).ok_or_else(mismatch),
            Literal::Str(s) => schema.builtins.literal(t, Datum::Str(s.clone())).ok_or_else(mismatch),
            Literal::Null(n) => Ok(Value::null(t.clone(), *n)),
            Literal::App(op, arg) => {
                let b = schema
                    .builtins
                    .op(op)
                    .filter(|b| b.sig.cod == *ty)
                    .ok_or_else(|| format!("`{}` is not a builtin producing {}", op, ty))?;
                let arg = literal_value(schema, &b.sig.dom, arg)?;
                if arg.has_null() {
                    Ok(Value::Opaque {
                        op: op.clone(),
                        arg: Box::new(arg),
                    })
                } else {
                    (b.eval)(&arg).ok_or_else(|| format!("`{}` is undefined on `{}`", op, arg))
                }
            }
            _ => Err(mismatch()),
        },
        _ => Err(mismatch()),
    }
}

fn show_literal(lit: &Literal) -> String {
    let mut s = String::new();
    super::printer::print_literal(&mut s, lit);
    s
}

fn elab_instance(d: &InstanceDecl, schema: &FqlSchema) -> Result<Instance, ElabError> {
    let mut inst = Instance::empty_on(schema);
    let mut seen_entries = BTreeSet::new();
    for e in &d.entries {
        if !seen_entries.insert(e.name.text.as_str()) {
            return err(e.name.span, format!("`{}` is listed twice", e.name.text));
        }
    }
    // carriers first so that tables may come in any order
    for e in d.entries.iter().filter(|e| schema.is_entity(&e.name.text)) {
        for item in &e.items {
            if item.value.is_some() {
                return err(
                    item.span,
                    format!("`{}` is an entity type; list its rows without `->`", e.name.text),
                );
            }
            if inst.has_row(&e.name.text, &item.row.text) {
                return err(item.row.span, format!("row `{}` is listed twice", item.row.text));
            }
            inst.add_row(&e.name.text, item.row.text.clone());
        }
    }
    for e in d.entries.iter().filter(|e| !schema.is_entity(&e.name.text)) {
        let op = &e.name.text;
        let sig = match schema.op_kind(op) {
            Some(OpKind::ForeignKey | OpKind::Attribute) => schema.theory.sig.operation(op).expect("classified"),
            Some(OpKind::Builtin) => return err(e.name.span, format!("`{}` is a builtin; its table is fixed", op)),
            None => {
                return err(
                    e.name.span,
                    format!("`{}` is neither an entity type nor a column of `{}`", op, d.schema.text),
                )
            }
        };
        let mut rows = BTreeSet::new();
        for item in &e.items {
            let Some(lit) = &item.value else {
                return err(item.span, format!("`{}` is a column; write `row -> value`", op));
            };
            if !rows.insert(item.row.text.as_str()) {
                return err(
                    item.row.span,
                    format!("`{}` has two entries for `{}`", op, item.row.text),
                );
            }
            let v = literal_value(schema, &sig.cod, lit)
                .or_else(|m| err(item.span, format!("`{}({})`: {}", op, item.row.text, m)))?;
            inst.set(op, item.row.text.clone(), v);
        }
    }
    inst.validate(schema).map_err(|e| {
        let entry = |op: &str| d.entries.iter().find(|x| x.name.text == op);
        let item = |op: &str, row: &str| entry(op).and_then(|x| x.items.iter().find(|i| i.row.text == row));
        let span = match &e {
            InstanceError::PartialFunction { op, .. } => entry(op).map_or(d.span, |x| x.span),
            InstanceError::StrayRow { op, row, .. } | InstanceError::IllTypedCell { op, row, .. } => {
                item(op, row).map_or(d.span, |i| i.span)
            }
            _ => d.span,
        };
        ElabError {
            span,
            message: format!("instance `{}`: {}", d.name.text, e),
        }
    })?;
    Ok(inst)
}

fn elab_mapping(m: &MappingDecl, source: &FqlSchema, target: &FqlSchema) -> Result<SchemaMapping, ElabError> {
    let mut type_map = BTreeMap::new();
    for (from, to) in &m.types {
        if type_map.insert(from.text.clone(), to.text.clone()).is_some() {
            return err(from.span, format!("`{}` is mapped twice", from.text));
        }
    }
    let mut op_map = BTreeMap::new();
    for op in &m.ops {
        if op_map
            .insert(op.op.text.clone(), OpImage::new(op.var.text.clone(), op.body.clone()))
            .is_some()
        {
            return err(op.op.span, format!("`{}` is mapped twice", op.op.text));
        }
    }
    SchemaMapping::new(source.clone(), target.clone(), type_map, op_map).map_err(|e| {
        let op_span = |name: &str| m.ops.iter().find(|o| o.op.text == name).map_or(m.span, |o| o.span);
        let ty_span = |name: &str| {
            m.types
                .iter()
                .find(|(f, _)| f.text == name)
                .map_or(m.span, |(f, t)| f.span.to(t.span))
        };
        let span = match &e {
            MappingError::IllTypedImage { op, .. } | MappingError::ImageType { op, .. } => op_span(op),
            MappingError::UnknownSourceOperation(op) => op_span(op),
            MappingError::NotAnEntity { from, .. } => ty_span(from),
            MappingError::UnknownSourceType(t) => ty_span(t),
            _ => m.span,
        };
        ElabError {
            span,
            message: format!("mapping `{}`: {}", m.name.text, e),
        }
    })
}

/// The surface form of an instance: carriers in entity order, then one
/// table per column, rows sorted.
pub fn instance_to_decl(name: &str, schema_name: &str, schema: &FqlSchema, inst: &Instance) -> InstanceDecl {
    let mut entries = Vec::new();
    for e in &schema.entities {
        entries.push(InstanceEntry {
            name: Name::new(e.clone()),
            items: inst
                .carrier(e)
                .map(|r| EntryItem {
                    row: Name::new(r),
                    value: None,
                    span: Span::default(),
                })
                .collect(),
            span: Span::default(),
        });
    }
    for (op, dom, _) in schema.columns() {
        entries.push(InstanceEntry {
            name: Name::new(op),
            items: inst
                .carrier(dom)
                .map(|r| EntryItem {
                    row: Name::new(r),
                    value: inst.get(op, r).map(value_literal),
                    span: Span::default(),
                })
                .collect(),
            span: Span::default(),
        });
    }
    InstanceDecl {
        name: Name::new(name),
        schema: Name::new(schema_name),
        entries,
        span: Span::default(),
    }
}

pub fn value_literal(v: &Value) -> Literal {
    match v {
        Value::Unit => Literal::Unit,
        Value::Pair(a, b) => Literal::Pair(Box::new(value_literal(a)), Box::new(value_literal(b))),
        Value::Base { datum, .. } => match datum {
            Datum::Int(n) => Literal::Int(*n),
            Datum::Str(s) => Literal::Str(s.clone()),
            Datum::Row(r) => Literal::Row(r.clone()),
            Datum::Null(n) => Literal::Null(*n),
        },
        Value::Opaque { op, arg } => Literal::App(op.clone(), Box::new(value_literal(arg))),
        // not produced by instances
        Value::Bool(b) => Literal::Row(b.to_string()),
        Value::Set(_) => Literal::Row(v.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse;
    use super::*;

    const COMPANY: &str = r#"
schema Company = {
  entities Emp, Dept;
  attributes String, Int;
  operations
    length : String -> Int,
    reverse : String -> String,
    worksIn : Emp -> Dept,
    manager : Emp -> Emp,
    ename : Emp -> String;
  equations
    forall x:String. length(x) = length(reverse(x));
    forall x:String. x = reverse(reverse(x));
    forall x:Emp. worksIn(x) = worksIn(manager(x));
}
instance P : Company = {
  Emp = { e1, e2 };
  Dept = { d1 };
  manager = { e1 -> e1, e2 -> e1 };
  worksIn = { e1 -> d1, e2 -> d1 };
  ename = { e1 -> "ann", e2 -> reverse("bob") };
}
"#;

    #[test]
    fn schema_and_instance_elaborate() {
        let (ws, errs) = elaborate(&parse(COMPANY).unwrap());
        assert!(errs.is_empty(), "{:?}", errs);
        assert_eq!(ws.schemas["Company"], qinl_core::fixtures::company_schema());
        let p = &ws.instances["P"].instance;
        assert_eq!(p.get("ename", "e2"), Some(&Value::str("bob")));
    }

    #[test]
    fn ill_typed_cell_is_located() {
        let src = COMPANY.replace("e1 -> \"ann\"", "e1 -> 3");
        let (_, errs) = elaborate(&parse(&src).unwrap());
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].span.line, 21);
        assert!(errs[0].message.contains("ename(e1)"), "{}", errs[0].message);
    }

    #[test]
    fn missing_cell_points_at_table() {
        let src = COMPANY.replace("e1 -> d1, e2 -> d1", "e1 -> d1");
        let (_, errs) = elaborate(&parse(&src).unwrap());
        assert!(errs[0].message.contains("no entry for row `e2`"), "{}", errs[0].message);
        assert_eq!(errs[0].span.line, 20);
    }

    #[test]
    fn dependents_of_failed_declarations_are_skipped() {
        let src = "schema S = { entities A; operations f : A -> B; }\ninstance I : S = { }";
        let (ws, errs) = elaborate(&parse(src).unwrap());
        assert_eq!(errs.len(), 1);
        assert!(ws.instances.is_empty());
    }

    #[test]
    fn instance_text_roundtrips() {
        let (ws, _) = elaborate(&parse(COMPANY).unwrap());
        let schema = &ws.schemas["Company"];
        let decl = instance_to_decl("Q", "Company", schema, &ws.instances["P"].instance);
        let mut text = String::from(COMPANY);
        super::super::printer::print_decl(&mut text, &Decl::Instance(decl));
        let (ws2, errs) = elaborate(&parse(&text).unwrap());
        assert!(errs.is_empty(), "{:?}", errs);
        assert_eq!(ws2.instances["Q"].instance, ws.instances["P"].instance);
    }
}
