//! Random source units for roundtrip tests. References always point at
//! earlier declarations, so every generated unit resolves.
#![allow(dead_code)]

use std::path::PathBuf;

use proptest::collection::vec;
use proptest::prelude::*;

use qinl::surface::{
    Decl, Direction, EntryItem, EquationDecl, InstanceDecl, InstanceEntry, Literal, MappingDecl, MigrateDecl, Name,
    NrcDecl, OpDecl, OpImageDecl, QueryDecl, SchemaDecl, SourceUnit,
};
use qinl_core::kernel::{Term, TypeExpr};
use qinl_core::nrc::{NrcExpr, NrcType};
use qinl_core::query::Comprehension;
use qinl_core::value::Datum;

pub const KEYWORDS: &[&str] = &[
    "schema",
    "instance",
    "mapping",
    "query",
    "nrc",
    "migrate",
    "entities",
    "attributes",
    "operations",
    "equations",
    "forall",
    "for",
    "in",
    "return",
    "where",
    "and",
    "if",
    "then",
    "else",
    "true",
    "false",
    "empty",
    "union",
    "delta",
    "sigma",
    "pi",
    "Set",
    "Bool",
];

pub fn fixtures() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "qinl"))
        .collect();
    files.sort();
    files
}

pub fn ident() -> impl Strategy<Value = String> {
    "[a-zA-Z][a-zA-Z0-9_]{0,4}".prop_filter("keyword", |s| !KEYWORDS.contains(&s.as_str()))
}

fn segment() -> impl Strategy<Value = String> {
    prop_oneof![4 => ident(), 1 => proptest::sample::select(KEYWORDS).prop_map(String::from)]
}

fn row_id() -> impl Strategy<Value = String> {
    vec(segment(), 1..=3).prop_map(|s| s.join("."))
}

fn name() -> impl Strategy<Value = Name> {
    ident().prop_map(Name::new)
}

pub fn ttp_type(depth: u32) -> BoxedStrategy<TypeExpr> {
    let leaf = prop_oneof![1 => Just(TypeExpr::Unit), 3 => ident().prop_map(TypeExpr::Base)];
    leaf.prop_recursive(depth, 16, 2, |inner| {
        (inner.clone(), inner).prop_map(|(a, b)| TypeExpr::prod(a, b))
    })
    .boxed()
}

pub fn term(depth: u32) -> BoxedStrategy<Term> {
    let leaf = prop_oneof![1 => Just(Term::Unit), 4 => ident().prop_map(Term::Var)];
    leaf.prop_recursive(depth, 64, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::pair(a, b)),
            inner.clone().prop_map(Term::proj1),
            inner.clone().prop_map(Term::proj2),
            (ident(), inner).prop_map(|(f, a)| Term::app(f, a)),
        ]
    })
    .boxed()
}

pub fn nrc_type(depth: u32) -> BoxedStrategy<NrcType> {
    let leaf = prop_oneof![
        Just(NrcType::Unit),
        Just(NrcType::Bool),
        ident().prop_map(NrcType::Base),
    ];
    leaf.prop_recursive(depth, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| NrcType::prod(a, b)),
            inner.prop_map(NrcType::set),
        ]
    })
    .boxed()
}

fn datum() -> impl Strategy<Value = Datum> {
    prop_oneof![
        any::<i64>().prop_map(Datum::Int),
        "[ -~\\n\\t\u{e9}\u{2200}]{0,6}".prop_map(Datum::Str),
    ]
}

pub fn nrc_expr(depth: u32) -> BoxedStrategy<NrcExpr> {
    let leaf = prop_oneof![
        4 => ident().prop_map(NrcExpr::Var),
        1 => Just(NrcExpr::Unit),
        1 => Just(NrcExpr::True),
        1 => Just(NrcExpr::False),
        1 => nrc_type(2).prop_map(NrcExpr::Empty),
        2 => datum().prop_map(NrcExpr::Lit),
    ];
    leaf.prop_recursive(depth, 96, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| NrcExpr::pair(a, b)),
            inner.clone().prop_map(NrcExpr::proj1),
            inner.clone().prop_map(NrcExpr::proj2),
            (ident(), inner.clone()).prop_map(|(f, a)| NrcExpr::app(f, a)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| NrcExpr::union(a, b)),
            inner.clone().prop_map(NrcExpr::singleton),
            (ident(), inner.clone(), inner.clone()).prop_map(|(v, s, b)| NrcExpr::for_in(v, s, b)),
            (inner.clone(), inner.clone(), inner.clone()).prop_map(|(c, t, e)| NrcExpr::if_then_else(c, t, e)),
            (inner.clone(), inner).prop_map(|(a, b)| NrcExpr::eq(a, b)),
        ]
    })
    .boxed()
}

pub fn literal(depth: u32) -> BoxedStrategy<Literal> {
    let leaf = prop_oneof![
        3 => row_id().prop_map(Literal::Row),
        2 => any::<i64>().prop_map(Literal::Int),
        2 => "[a-z \"\\\\]{0,5}".prop_map(Literal::Str),
        1 => (1u32..100).prop_map(Literal::Null),
        1 => Just(Literal::Unit),
    ];
    leaf.prop_recursive(depth, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Literal::Pair(Box::new(a), Box::new(b))),
            (ident(), inner).prop_map(|(f, a)| Literal::App(f, Box::new(a))),
        ]
    })
    .boxed()
}

fn schema_body() -> impl Strategy<Value = SchemaDecl> {
    let op = (name(), ttp_type(2), ttp_type(2)).prop_map(|(name, dom, cod)| OpDecl {
        name,
        dom,
        cod,
        span: Default::default(),
    });
    let eq = (vec((name(), ttp_type(2)), 0..3), term(3), term(3)).prop_map(|(ctx, lhs, rhs)| EquationDecl {
        ctx,
        lhs,
        rhs,
        span: Default::default(),
    });
    (vec(name(), 0..3), vec(name(), 0..3), vec(op, 0..4), vec(eq, 0..3)).prop_map(
        |(entities, attributes, operations, equations)| SchemaDecl {
            name: Name::new(""),
            entities,
            attributes,
            operations,
            equations,
            span: Default::default(),
        },
    )
}

fn instance_entries() -> impl Strategy<Value = Vec<InstanceEntry>> {
    let carrier = (name(), vec(row_id(), 0..4)).prop_map(|(name, rows)| InstanceEntry {
        name,
        items: rows
            .into_iter()
            .map(|r| EntryItem {
                row: Name::new(r),
                value: None,
                span: Default::default(),
            })
            .collect(),
        span: Default::default(),
    });
    let table = (name(), vec((row_id(), literal(3)), 1..4)).prop_map(|(name, cells)| InstanceEntry {
        name,
        items: cells
            .into_iter()
            .map(|(r, v)| EntryItem {
                row: Name::new(r),
                value: Some(v),
                span: Default::default(),
            })
            .collect(),
        span: Default::default(),
    });
    vec(prop_oneof![carrier, table], 0..4)
}

fn mapping_body() -> impl Strategy<Value = (Vec<(Name, Name)>, Vec<OpImageDecl>)> {
    let image = (name(), name(), term(6)).prop_map(|(op, var, body)| OpImageDecl {
        op,
        var,
        body,
        span: Default::default(),
    });
    (vec((name(), name()), 0..3), vec(image, 0..3))
}

fn comprehension() -> impl Strategy<Value = Comprehension> {
    (vec((ident(), ident()), 1..3), vec((term(3), term(3)), 0..3), term(6)).prop_map(
        |(bindings, where_clauses, ret)| Comprehension {
            bindings,
            where_clauses,
            ret,
        },
    )
}

#[derive(Clone, Debug)]
enum Shape {
    Instance(usize, Vec<InstanceEntry>),
    Mapping(usize, usize, Vec<(Name, Name)>, Vec<OpImageDecl>),
    Query(usize, Comprehension),
    Nrc(Option<usize>, NrcExpr),
    Migrate(Direction, usize, usize),
}

fn shape() -> impl Strategy<Value = Shape> {
    let direction = prop_oneof![Just(Direction::Delta), Just(Direction::Sigma), Just(Direction::Pi)];
    prop_oneof![
        (any::<usize>(), instance_entries()).prop_map(|(s, e)| Shape::Instance(s, e)),
        (any::<usize>(), any::<usize>(), mapping_body()).prop_map(|(s, t, (ty, ops))| Shape::Mapping(s, t, ty, ops)),
        (any::<usize>(), comprehension()).prop_map(|(s, q)| Shape::Query(s, q)),
        (proptest::option::of(any::<usize>()), nrc_expr(6)).prop_map(|(s, e)| Shape::Nrc(s, e)),
        (direction, any::<usize>(), any::<usize>()).prop_map(|(d, m, i)| Shape::Migrate(d, m, i)),
    ]
}

/// A unit with one to three schemas followed by up to eight other
/// declarations. Declaration names are made unique with a numeric suffix.
pub fn source_unit() -> impl Strategy<Value = SourceUnit> {
    (vec((ident(), schema_body()), 1..4), vec((ident(), shape()), 0..8)).prop_map(|(schemas, shapes)| {
        let mut decls = Vec::new();
        let mut schema_names = Vec::new();
        for (k, (n, mut s)) in schemas.into_iter().enumerate() {
            s.name = Name::new(format!("{n}_{k}"));
            schema_names.push(s.name.text.clone());
            decls.push(Decl::Schema(s));
        }
        let pick = |names: &[String], i: usize| Name::new(names[i % names.len()].clone());
        let mut instances: Vec<String> = Vec::new();
        let mut mappings: Vec<String> = Vec::new();
        for (k, (n, shape)) in shapes.into_iter().enumerate() {
            let name = Name::new(format!("{n}_{k}"));
            let span = Default::default();
            match shape {
                Shape::Instance(s, entries) => {
                    instances.push(name.text.clone());
                    decls.push(Decl::Instance(InstanceDecl {
                        name,
                        schema: pick(&schema_names, s),
                        entries,
                        span,
                    }));
                }
                Shape::Mapping(s, t, types, ops) => {
                    mappings.push(name.text.clone());
                    decls.push(Decl::Mapping(MappingDecl {
                        name,
                        source: pick(&schema_names, s),
                        target: pick(&schema_names, t),
                        types,
                        ops,
                        span,
                    }));
                }
                Shape::Query(s, query) => decls.push(Decl::Query(QueryDecl {
                    name,
                    schema: pick(&schema_names, s),
                    query,
                    span,
                })),
                Shape::Nrc(s, expr) => decls.push(Decl::Nrc(NrcDecl {
                    name,
                    schema: s.map(|s| pick(&schema_names, s)),
                    expr,
                    span,
                })),
                Shape::Migrate(direction, m, i) => {
                    if mappings.is_empty() || instances.is_empty() {
                        continue;
                    }
                    let (mapping, instance) = (pick(&mappings, m), pick(&instances, i));
                    instances.push(name.text.clone());
                    decls.push(Decl::Migrate(MigrateDecl {
                        name,
                        direction,
                        mapping,
                        instance,
                        span,
                    }));
                }
            }
        }
        SourceUnit { decls }
    })
}
