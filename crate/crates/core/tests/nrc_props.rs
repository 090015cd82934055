mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use common::rng;
use qinl_core::kernel::{Signature, TypeExpr};
use qinl_core::nrc::{nrc_eval, nrc_infer_type, nrc_substitute, Env, NrcContext, NrcExpr, NrcType};
use qinl_core::value::{Datum, EvalError, Interpretation, Value};

fn signature() -> Signature {
    let mut sig = Signature::new();
    sig.add_base_type("A");
    sig.add_operation("f", TypeExpr::base("A"), TypeExpr::base("A"))
        .unwrap();
    sig
}

fn pool() -> Vec<NrcType> {
    let a = || NrcType::base("A");
    vec![
        NrcType::Unit,
        NrcType::Bool,
        a(),
        NrcType::prod(a(), a()),
        NrcType::set(a()),
        NrcType::set(NrcType::prod(a(), a())),
    ]
}

fn context() -> NrcContext {
    let a = || NrcType::base("A");
    NrcContext::new()
        .extend("a", a())
        .extend("b", a())
        .extend("s", NrcType::set(a()))
        .extend("r", NrcType::set(NrcType::prod(a(), a())))
}

struct Gen<'a> {
    rng: &'a mut ChaCha8Rng,
    fresh: usize,
}

impl Gen<'_> {
    fn leaf(&mut self, ctx: &NrcContext, ty: &NrcType) -> NrcExpr {
        let vars: Vec<&String> = ctx.bindings().iter().filter(|(_, t)| t == ty).map(|(v, _)| v).collect();
        if !vars.is_empty() && self.rng.random_bool(0.7) {
            return NrcExpr::var(vars.choose(self.rng).unwrap().as_str());
        }
        match ty {
            NrcType::Unit => NrcExpr::Unit,
            NrcType::Bool => {
                if self.rng.random_bool(0.5) {
                    NrcExpr::True
                } else {
                    NrcExpr::False
                }
            }
            NrcType::Base(_) => NrcExpr::var(*vars.choose(self.rng).expect("an A-typed variable is in scope")),
            NrcType::Prod(l, r) => NrcExpr::pair(self.leaf(ctx, l), self.leaf(ctx, r)),
            NrcType::Set(t) => NrcExpr::Empty((**t).clone()),
        }
    }

    /// An expression of type `ty`; `depth` bounds the non-leaf nesting.
    fn expr(&mut self, ctx: &NrcContext, ty: &NrcType, depth: usize) -> NrcExpr {
        if depth == 0 || self.rng.random_bool(0.2) {
            return self.leaf(ctx, ty);
        }
        let d = depth - 1;
        let choice = self.rng.random_range(0..4);
        match (ty, choice) {
            (_, 0) => NrcExpr::if_then_else(
                self.expr(ctx, &NrcType::Bool, d),
                self.expr(ctx, ty, d),
                self.expr(ctx, ty, d),
            ),
            (_, 1) => {
                let other = pool().choose(self.rng).unwrap().clone();
                if self.rng.random_bool(0.5) {
                    NrcExpr::proj1(self.expr(ctx, &NrcType::prod(ty.clone(), other), d))
                } else {
                    NrcExpr::proj2(self.expr(ctx, &NrcType::prod(other, ty.clone()), d))
                }
            }
            (NrcType::Bool, _) => {
                let t = pool().choose(self.rng).unwrap().clone();
                NrcExpr::eq(self.expr(ctx, &t, d), self.expr(ctx, &t, d))
            }
            (NrcType::Base(_), _) => NrcExpr::app("f", self.expr(ctx, ty, d)),
            (NrcType::Prod(l, r), _) => NrcExpr::pair(self.expr(ctx, l, d), self.expr(ctx, r, d)),
            (NrcType::Set(t), 2) => {
                if self.rng.random_bool(0.5) {
                    NrcExpr::singleton(self.expr(ctx, t, d))
                } else {
                    NrcExpr::union(self.expr(ctx, ty, d), self.expr(ctx, ty, d))
                }
            }
            (NrcType::Set(_), _) => {
                let elem = pool().choose(self.rng).unwrap().clone();
                self.for_loop(ctx, &elem, ty, d)
            }
            (NrcType::Unit, _) => NrcExpr::Unit,
        }
    }

    fn for_loop(&mut self, ctx: &NrcContext, elem: &NrcType, ty: &NrcType, d: usize) -> NrcExpr {
        let source = self.expr(ctx, &NrcType::set(elem.clone()), d);
        self.fresh += 1;
        let v = format!("v{}", self.fresh);
        let body = self.expr(&ctx.extend(v.clone(), elem.clone()), ty, d);
        NrcExpr::for_in(v, source, body)
    }
}

struct Table(BTreeMap<String, String>);

impl Interpretation for Table {
    fn apply(&self, op: &str, arg: &Value) -> Result<Value, EvalError> {
        match (op, arg.as_row()) {
            ("f", Some(row)) => Ok(Value::row("A", self.0[row].clone())),
            _ => Err(EvalError::UninterpretedOperation(op.to_string())),
        }
    }
}

/// Carrier rows, a random table for `f`, and values for the context.
fn world(r: &mut ChaCha8Rng) -> (Vec<String>, Table, Env) {
    let rows: Vec<String> = (1..=r.random_range(1..=3)).map(|k| format!("a{k}")).collect();
    let table = Table(
        rows.iter()
            .map(|x| (x.clone(), rows.choose(r).unwrap().clone()))
            .collect(),
    );
    let row = |r: &mut ChaCha8Rng| Value::row("A", rows.choose(r).unwrap().clone());
    let mut env = Env::new();
    env.insert("a".into(), row(r));
    env.insert("b".into(), row(r));
    env.insert("s".into(), Value::set((0..r.random_range(0..=3)).map(|_| row(r))));
    env.insert(
        "r".into(),
        Value::set((0..r.random_range(0..=4)).map(|_| Value::pair(row(r), row(r)))),
    );
    (rows, table, env)
}

fn has_type(v: &Value, ty: &NrcType, rows: &[String]) -> bool {
    match (v, ty) {
        (Value::Unit, NrcType::Unit) | (Value::Bool(_), NrcType::Bool) => true,
        (
            Value::Base {
                ty: t,
                datum: Datum::Row(r),
            },
            NrcType::Base(b),
        ) => t == b && rows.contains(r),
        (Value::Pair(a, b), NrcType::Prod(ta, tb)) => has_type(a, ta, rows) && has_type(b, tb, rows),
        (Value::Set(items), NrcType::Set(t)) => items.iter().all(|x| has_type(x, t, rows)),
        _ => false,
    }
}

fn set_of(v: Value) -> BTreeSet<Value> {
    match v {
        Value::Set(items) => items,
        other => panic!("expected a set, got {other}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn evaluation_respects_types(seed: u64) {
        let mut r = rng(seed);
        let ty = pool().choose(&mut r).unwrap().clone();
        let e = Gen { rng: &mut r, fresh: 0 }.expr(&context(), &ty, 3);
        prop_assume!(e.depth() <= 5);
        prop_assert_eq!(nrc_infer_type(&signature(), &context(), &e).unwrap(), ty.clone());
        let (rows, table, env) = world(&mut r);
        let v = nrc_eval(&env, &e, &table).unwrap();
        prop_assert!(has_type(&v, &ty, &rows), "{} evaluated to {}", e, v);
    }

    #[test]
    fn union_is_a_semilattice_with_unit(seed: u64) {
        let mut r = rng(seed);
        let elem = pool().choose(&mut r).unwrap().clone();
        let ty = NrcType::set(elem.clone());
        let mut g = Gen { rng: &mut r, fresh: 0 };
        let (x, y, z) = (g.expr(&context(), &ty, 3), g.expr(&context(), &ty, 3), g.expr(&context(), &ty, 3));
        let (_, table, env) = world(&mut r);
        let ev = |e: NrcExpr| nrc_eval(&env, &e, &table).unwrap();
        let u = NrcExpr::union;
        prop_assert_eq!(ev(u(x.clone(), y.clone())), ev(u(y.clone(), x.clone())));
        prop_assert_eq!(ev(u(u(x.clone(), y.clone()), z.clone())), ev(u(x.clone(), u(y, z))));
        prop_assert_eq!(ev(u(x.clone(), x.clone())), ev(x.clone()));
        prop_assert_eq!(ev(u(x.clone(), NrcExpr::Empty(elem))), ev(x.clone()));
        prop_assert_eq!(set_of(ev(u(x.clone(), x.clone()))).len(), set_of(ev(x)).len());
    }

    #[test]
    fn for_distributes_over_union_of_sources(seed: u64) {
        let mut r = rng(seed);
        let elem = pool().choose(&mut r).unwrap().clone();
        let out = NrcType::set(pool().choose(&mut r).unwrap().clone());
        let mut g = Gen { rng: &mut r, fresh: 0 };
        let src = NrcType::set(elem.clone());
        let (s1, s2) = (g.expr(&context(), &src, 3), g.expr(&context(), &src, 3));
        let body = g.expr(&context().extend("x", elem.clone()), &out, 3);
        let (_, table, env) = world(&mut r);
        let ev = |e: NrcExpr| nrc_eval(&env, &e, &table).unwrap();
        let over = |s: NrcExpr| NrcExpr::for_in("x", s, body.clone());
        prop_assert_eq!(
            ev(over(NrcExpr::union(s1.clone(), s2.clone()))),
            ev(NrcExpr::union(over(s1), over(s2)))
        );
        prop_assert_eq!(ev(over(NrcExpr::Empty(elem))), Value::Set(BTreeSet::new()));
    }

    #[test]
    fn for_over_a_singleton_substitutes(seed: u64) {
        let mut r = rng(seed);
        let elem = pool().choose(&mut r).unwrap().clone();
        let out = NrcType::set(pool().choose(&mut r).unwrap().clone());
        let mut g = Gen { rng: &mut r, fresh: 0 };
        let item = g.expr(&context(), &elem, 3);
        let body = g.expr(&context().extend("x", elem.clone()), &out, 3);
        let (_, table, env) = world(&mut r);
        let ev = |e: NrcExpr| nrc_eval(&env, &e, &table).unwrap();
        prop_assert_eq!(
            ev(NrcExpr::for_in("x", NrcExpr::singleton(item.clone()), body.clone())),
            ev(nrc_substitute(&body, "x", &item))
        );
    }
}

#[test]
fn generator_covers_every_construct() {
    fn tags(e: &NrcExpr, out: &mut BTreeSet<&'static str>) {
        let (tag, kids): (&'static str, Vec<&NrcExpr>) = match e {
            NrcExpr::Var(_) => ("var", vec![]),
            NrcExpr::Unit => ("unit", vec![]),
            NrcExpr::True | NrcExpr::False => ("bool", vec![]),
            NrcExpr::Empty(_) => ("empty", vec![]),
            NrcExpr::Lit(_) => ("lit", vec![]),
            NrcExpr::Pair(a, b) => ("pair", vec![a, b]),
            NrcExpr::Union(a, b) => ("union", vec![a, b]),
            NrcExpr::Eq(a, b) => ("eq", vec![a, b]),
            NrcExpr::Proj1(a) => ("proj1", vec![a]),
            NrcExpr::Proj2(a) => ("proj2", vec![a]),
            NrcExpr::App(_, a) => ("app", vec![a]),
            NrcExpr::Singleton(a) => ("singleton", vec![a]),
            NrcExpr::For { source, body, .. } => ("for", vec![source, body]),
            NrcExpr::If(c, t, f) => ("if", vec![c, t, f]),
        };
        out.insert(tag);
        for k in kids {
            tags(k, out);
        }
    }
    let mut seen = BTreeSet::new();
    for seed in 0..200 {
        let mut r = rng(seed);
        let ty = pool().choose(&mut r).unwrap().clone();
        tags(&Gen { rng: &mut r, fresh: 0 }.expr(&context(), &ty, 3), &mut seen);
    }
    assert_eq!(seen.len(), 13, "{seen:?}");
}
