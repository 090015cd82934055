//! Seeded generators shared by the property tests. Every generator takes a
//! `ChaCha8Rng`; proptest only supplies the seed.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qinl_core::equality::{Equation, Theory};
use qinl_core::kernel::{Context, Signature, Term, TypeExpr};
use qinl_core::mapping::{OpImage, SchemaMapping};
use qinl_core::schema::{initial_model, FqlSchema, Generator, Instance, Presentation};
use qinl_core::value::{Builtins, Value};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn small_types(sig: &Signature) -> Vec<TypeExpr> {
    let mut out = vec![TypeExpr::Unit];
    out.extend(sig.base_types().iter().map(|b| TypeExpr::base(b.clone())));
    out
}

/// A term of type `ty` in `ctx` with depth at most `depth`, or `None` when
/// none was found. Every subterm built along the way is logged with the
/// type it was built for.
pub fn gen_term_logged(
    rng: &mut ChaCha8Rng,
    sig: &Signature,
    ctx: &Context,
    ty: &TypeExpr,
    depth: usize,
    log: &mut Vec<(Term, TypeExpr)>,
) -> Option<Term> {
    #[derive(Clone)]
    enum Step {
        Var(String),
        Unit,
        Pair,
        App(String, TypeExpr),
        Proj(bool, TypeExpr),
    }
    let mut leaves = Vec::new();
    for (v, t) in ctx.visible() {
        if t == ty {
            leaves.push(Step::Var(v.to_string()));
        }
    }
    if *ty == TypeExpr::Unit {
        leaves.push(Step::Unit);
    }
    let mut inner = Vec::new();
    if depth > 0 {
        if matches!(ty, TypeExpr::Prod(..)) {
            inner.push(Step::Pair);
        }
        for (op, s) in sig.operations() {
            if s.cod == *ty {
                inner.push(Step::App(op.clone(), s.dom.clone()));
            }
        }
        if depth > 1 && rng.random_bool(0.3) {
            let other = small_types(sig).choose(rng).cloned().unwrap();
            inner.push(Step::Proj(rng.random_bool(0.5), other));
        }
    }
    leaves.shuffle(rng);
    inner.shuffle(rng);
    let mut order = if rng.random_bool(0.25) {
        leaves.extend(inner);
        leaves
    } else {
        inner.extend(leaves);
        inner
    };
    order.truncate(4);
    for step in order {
        let built = match step {
            Step::Var(v) => Some(Term::Var(v)),
            Step::Unit => Some(Term::Unit),
            Step::Pair => {
                let TypeExpr::Prod(a, b) = ty else { unreachable!() };
                let l = gen_term_logged(rng, sig, ctx, a, depth - 1, log);
                let r = l
                    .as_ref()
                    .and_then(|_| gen_term_logged(rng, sig, ctx, b, depth - 1, log));
                l.zip(r).map(|(l, r)| Term::pair(l, r))
            }
            Step::App(op, dom) => gen_term_logged(rng, sig, ctx, &dom, depth - 1, log).map(|a| Term::app(op, a)),
            Step::Proj(first, other) => {
                let (whole, mk): (TypeExpr, fn(Term) -> Term) = if first {
                    (TypeExpr::prod(ty.clone(), other), Term::proj1)
                } else {
                    (TypeExpr::prod(other, ty.clone()), Term::proj2)
                };
                gen_term_logged(rng, sig, ctx, &whole, depth - 1, log).map(mk)
            }
        };
        if let Some(t) = built {
            log.push((t.clone(), ty.clone()));
            return Some(t);
        }
    }
    None
}

pub fn gen_term(rng: &mut ChaCha8Rng, sig: &Signature, ctx: &Context, ty: &TypeExpr, depth: usize) -> Option<Term> {
    gen_term_logged(rng, sig, ctx, ty, depth, &mut Vec::new())
}

pub fn subterms(t: &Term) -> Vec<&Term> {
    let mut out = vec![t];
    for c in t.children() {
        out.extend(subterms(c));
    }
    out
}

/// Walks of at most `max` operations starting at `from`, with their end
/// types. The empty walk is included.
pub fn paths(sig: &Signature, from: &str, max: usize) -> Vec<(Vec<String>, String)> {
    let mut out = vec![(Vec::new(), from.to_string())];
    let mut frontier = out.clone();
    for _ in 0..max {
        let mut next = Vec::new();
        for (ops, end) in &frontier {
            for (op, s) in sig.operations() {
                if s.dom.as_base() == Some(end.as_str()) {
                    if let Some(cod) = s.cod.as_base() {
                        let mut ops = ops.clone();
                        ops.push(op.clone());
                        next.push((ops, cod.to_string()));
                    }
                }
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

pub fn path_term(var: &str, ops: &[String]) -> Term {
    Term::path(var, ops.iter().map(String::as_str))
}

/// A random equation `forall x:E. x.p = x.q` with walks of length at most
/// `max`, or `None` if the two walks picked end at different types.
fn gen_path_equation(rng: &mut ChaCha8Rng, sig: &Signature, bases: &[String], max: usize) -> Option<Equation> {
    let e = bases.choose(rng)?.clone();
    let walks = paths(sig, &e, max);
    let (p, end) = walks.choose(rng)?.clone();
    let same: Vec<_> = walks.iter().filter(|(q, t)| *t == end && *q != p).collect();
    let (q, _) = same.choose(rng)?;
    Some(Equation::new(
        Context::single("x", TypeExpr::base(e)),
        path_term("x", &p),
        path_term("x", q),
    ))
}

/// A theory over base types `bases` with unary operations between them
/// and up to `max_eqs` path equations.
pub fn gen_unary_theory(rng: &mut ChaCha8Rng, bases: &[&str], ops: usize, max_eqs: usize, prefix: &str) -> Theory {
    let mut sig = Signature::new();
    for b in bases {
        sig.add_base_type(*b);
    }
    for k in 0..ops {
        let dom = *bases.choose(rng).unwrap();
        let cod = *bases.choose(rng).unwrap();
        sig.add_operation(format!("{prefix}{k}"), TypeExpr::base(dom), TypeExpr::base(cod))
            .unwrap();
    }
    let names: Vec<String> = bases.iter().map(|b| b.to_string()).collect();
    let mut th = Theory::new(sig);
    for _ in 0..rng.random_range(0..=max_eqs) {
        for _ in 0..8 {
            if let Some(eq) = gen_path_equation(rng, &th.sig, &names, 2) {
                th = th.with_equation(eq);
                break;
            }
        }
    }
    th
}

/// An entity-only schema on one or two of `pool`, with up to three foreign
/// keys named `{prefix}0`, `{prefix}1`, ...
pub fn gen_schema(rng: &mut ChaCha8Rng, pool: [&str; 2], prefix: &str) -> FqlSchema {
    let entities: Vec<&str> = if rng.random_bool(0.5) {
        pool.to_vec()
    } else {
        vec![pool[0]]
    };
    let ops = rng.random_range(0..=3);
    let th = gen_unary_theory(rng, &entities, ops, 2, prefix);
    FqlSchema::new(
        th,
        entities.iter().map(|e| e.to_string()).collect(),
        BTreeSet::new(),
        &Builtins::empty(),
    )
    .expect("generated schema is valid")
}

/// Rows `a1..aN` per entity and uniformly random foreign-key tables. The
/// result need not satisfy the equations.
pub fn gen_raw_instance(rng: &mut ChaCha8Rng, s: &FqlSchema, max_rows: usize) -> Instance {
    let mut i = Instance::empty_on(s);
    let mut rows: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for e in &s.entities {
        let n = rng.random_range(1..=max_rows);
        let names: Vec<String> = (1..=n).map(|k| format!("{}{}", e.to_lowercase(), k)).collect();
        for r in &names {
            i.add_row(e, r.clone());
        }
        rows.insert(e, names);
    }
    for (op, dom, cod) in s.foreign_keys() {
        for r in rows[dom].clone() {
            let target = rows[cod].choose(rng).unwrap().clone();
            i.set(op, r, Value::row(cod, target));
        }
    }
    i
}

/// One to three entity generators and up to two ground path equations
/// between them.
pub fn gen_presentation(rng: &mut ChaCha8Rng, s: &FqlSchema) -> Presentation {
    let entities: Vec<&String> = s.entities.iter().collect();
    let generators: Vec<Generator> = (0..rng.random_range(1..=3))
        .map(|k| Generator::entity(format!("g{k}"), entities.choose(rng).unwrap().as_str()))
        .collect();
    let mut walks = Vec::new();
    for g in &generators {
        for (ops, end) in paths(&s.theory.sig, &g.ty, 2) {
            walks.push((path_term(&g.name, &ops), end));
        }
    }
    let mut equations = Vec::new();
    for _ in 0..rng.random_range(0..=2) {
        let (l, ty) = walks.choose(rng).unwrap().clone();
        let same: Vec<_> = walks.iter().filter(|(_, t)| *t == ty).collect();
        let (r, _) = same.choose(rng).unwrap();
        if l != *r {
            equations.push((l, r.clone()));
        }
    }
    Presentation { generators, equations }
}

/// A model of the schema: the initial model of a random presentation, when
/// the chase finishes within `fuel`.
pub fn gen_model(rng: &mut ChaCha8Rng, s: &FqlSchema, fuel: u32) -> Option<Instance> {
    initial_model(s, &gen_presentation(rng, s), fuel).ok()
}

/// A mapping sending each foreign key to a random walk of length at most
/// two between the images of its endpoints. `None` when some foreign key
/// has no such walk.
pub fn gen_mapping(rng: &mut ChaCha8Rng, s: &FqlSchema, t: &FqlSchema) -> Option<SchemaMapping> {
    let targets: Vec<&String> = t.entities.iter().collect();
    let type_map: BTreeMap<String, String> = s
        .entities
        .iter()
        .map(|e| (e.clone(), targets.choose(rng).unwrap().to_string()))
        .collect();
    let mut op_map = BTreeMap::new();
    for (op, dom, cod) in s.foreign_keys() {
        let walks: Vec<_> = paths(&t.theory.sig, &type_map[dom], 2)
            .into_iter()
            .filter(|(_, end)| *end == type_map[cod])
            .collect();
        let (ops, _) = walks.choose(rng)?;
        op_map.insert(op.to_string(), OpImage::new("x", path_term("x", ops)));
    }
    Some(SchemaMapping::new(s.clone(), t.clone(), type_map, op_map).expect("walks are well typed"))
}
