//! The three data migrations along a schema mapping `F : S -> T`.
//!
//! * [`delta`] pulls a `T`-instance back to `S` by composing with `F`.
//! * [`sigma`] pushes an `S`-instance forward freely: its rows become
//!   generators and the chase builds the initial `T`-instance.
//! * [`pi`] pushes forward by the limit formula: the rows at a target entity
//!   `t` are the homomorphisms from `delta(F, y(t))` into the input, where
//!   `y(t)` is the free instance on one generator of type `t`.

mod homs;

pub use homs::{count_homs, enumerate_homs, for_each_hom, hom_search_space, HomError, Homomorphism, HOM_SEARCH_LIMIT};

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::equality::Verdict;
use crate::kernel::{substitute, Term};
use crate::mapping::{PreservationError, SchemaMapping};
use crate::nrc::Env;
use crate::schema::{Chase, ChaseError, Generator, Instance, InstanceError, OpKind, Presentation, Saturated};
use crate::value::{Datum, EvalError, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MigrationOptions {
    pub fuel: u32,
    /// Proceed even when some equation of the mapping is not proved.
    pub allow_unverified: bool,
}

impl Default for MigrationOptions {
    fn default() -> Self {
        MigrationOptions {
            fuel: 32,
            allow_unverified: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum MigrationError {
    /// Zero-based indices of the unproved source equations.
    #[error("mapping does not provably preserve source equation(s) {}", numbered(.0))]
    UnverifiedMapping(Vec<usize>),
    #[error(transparent)]
    Preservation(#[from] PreservationError),
    #[error("invalid input instance: {0}")]
    Invalid(#[from] InstanceError),
    #[error(transparent)]
    Chase(#[from] ChaseError),
    #[error(transparent)]
    Homs(#[from] HomError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("attribute `{op}` of `{entity}` is not determined by the source data")]
    UndeterminedAttribute { entity: String, op: String },
}

fn numbered(idx: &[usize]) -> String {
    idx.iter().map(|i| format!("#{}", i + 1)).collect::<Vec<_>>().join(", ")
}

impl MigrationError {
    pub fn is_fuel_exhausted(&self) -> bool {
        matches!(self, MigrationError::Chase(ChaseError::FuelExhausted { .. }))
    }
}

/// Checks every equation of the mapping; fails listing the unproved ones.
pub fn verify(f: &SchemaMapping, fuel: u32) -> Result<Vec<Verdict>, MigrationError> {
    let verdicts = f.check_preservation(fuel)?;
    let failed: Vec<usize> = verdicts
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_proved())
        .map(|(i, _)| i)
        .collect();
    if failed.is_empty() {
        Ok(verdicts)
    } else {
        Err(MigrationError::UnverifiedMapping(failed))
    }
}

fn guard(f: &SchemaMapping, opts: &MigrationOptions) -> Result<(), MigrationError> {
    if !opts.allow_unverified {
        verify(f, opts.fuel)?;
    }
    Ok(())
}

/// Pulls `j` (on the target of `f`) back to the source of `f`.
pub fn delta(f: &SchemaMapping, j: &Instance, opts: &MigrationOptions) -> Result<Instance, MigrationError> {
    guard(f, opts)?;
    j.validate(&f.target)?;
    delta_unchecked(f, j)
}

pub(crate) fn delta_unchecked(f: &SchemaMapping, j: &Instance) -> Result<Instance, MigrationError> {
    let mut out = Instance::empty_on(&f.source);
    for (s, t) in &f.type_map {
        for r in j.carrier(t) {
            out.add_row(s, r);
        }
    }
    for (op, dom, cod) in f.source.columns() {
        let image = &f.op_map[op];
        let t = &f.type_map[dom];
        for r in j.carrier(t) {
            let env: Env = [(image.var.clone(), Value::row(t.clone(), r))].into();
            let v = j.eval_term(&f.target, &env, &image.body)?;
            let v = if f.source.is_entity(cod) {
                Value::row(cod, v.as_row().unwrap_or_default())
            } else {
                v
            };
            out.set(op, r, v);
        }
    }
    Ok(out)
}

/// Term for an attribute value, over the generators created for constants
/// and nulls.
fn value_term(v: &Value, consts: &mut BTreeMap<Value, String>, gens: &mut Vec<Generator>) -> Term {
    match v {
        Value::Unit => Term::Unit,
        Value::Pair(a, b) => Term::pair(value_term(a, consts, gens), value_term(b, consts, gens)),
        Value::Opaque { op, arg } => Term::app(op.clone(), value_term(arg, consts, gens)),
        Value::Base { ty, datum } => {
            if let Some(name) = consts.get(v) {
                return Term::var(name.clone());
            }
            let name = match datum {
                Datum::Null(n) => alloc::format!("?{}", n),
                _ => alloc::format!("#{}", consts.len()),
            };
            gens.push(Generator {
                name: name.clone(),
                ty: ty.clone(),
                value: (!matches!(datum, Datum::Null(_))).then(|| v.clone()),
            });
            consts.insert(v.clone(), name.clone());
            Term::var(name)
        }
        Value::Bool(_) | Value::Set(_) => Term::Unit,
    }
}

/// Generator names for source rows, qualified by entity when one name is
/// used by rows of several entities.
fn row_generators(f: &SchemaMapping, i: &Instance) -> BTreeMap<(String, String), String> {
    let mut count: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &f.source.entities {
        for r in i.carrier(e) {
            *count.entry(r).or_default() += 1;
        }
    }
    let mut out = BTreeMap::new();
    for e in &f.source.entities {
        for r in i.carrier(e) {
            let name = if count[r] > 1 {
                alloc::format!("{}_{}", e, r)
            } else {
                r.to_string()
            };
            out.insert((e.clone(), r.to_string()), name);
        }
    }
    out
}

/// The free target instance generated by the rows of `i`.
pub fn sigma(f: &SchemaMapping, i: &Instance, opts: &MigrationOptions) -> Result<Instance, MigrationError> {
    guard(f, opts)?;
    i.validate(&f.source)?;
    let names = row_generators(f, i);
    let mut gens: Vec<Generator> = names
        .iter()
        .map(|((e, _), g)| Generator::entity(g.clone(), f.type_map[e].clone()))
        .collect();
    let mut consts = BTreeMap::new();
    let mut equations = Vec::new();
    for (op, dom, cod) in f.source.columns() {
        let image = &f.op_map[op];
        for r in i.carrier(dom) {
            let lhs = substitute(
                &image.body,
                &image.var,
                &Term::var(names[&(dom.to_string(), r.to_string())].clone()),
            );
            let cell = i.get(op, r).expect("validated");
            let rhs = if f.source.is_entity(cod) {
                Term::var(names[&(cod.to_string(), cell.as_row().unwrap_or_default().to_string())].clone())
            } else {
                value_term(cell, &mut consts, &mut gens)
            };
            equations.push((lhs, rhs));
        }
    }
    let pres = Presentation {
        generators: gens,
        equations,
    };
    Ok(Chase::new(&f.target, &pres)?.run(opts.fuel)?.instance)
}

/// The free target instance on one generator `x` of type `entity`.
fn representable(f: &SchemaMapping, entity: &str, fuel: u32) -> Result<Saturated, MigrationError> {
    let pres = Presentation {
        generators: alloc::vec![Generator::entity("x", entity)],
        equations: Vec::new(),
    };
    Ok(Chase::new(&f.target, &pres)?.run(fuel)?)
}

struct Limit {
    rep: Saturated,
    /// rows of `delta(F, rep)` in naming order
    elements: Vec<(String, String)>,
    homs: Vec<Homomorphism>,
    names: Vec<String>,
}

/// Shortest prefix of the element images that tells the homomorphisms
/// apart, joined into row names.
fn name_rows(entity: &str, elements: &[(String, String)], homs: &[Homomorphism]) -> Vec<String> {
    let images: Vec<Vec<&str>> = homs
        .iter()
        .map(|h| {
            elements
                .iter()
                .map(|(e, r)| h.image(e, r).unwrap_or_default())
                .collect()
        })
        .collect();
    let k = (0..=elements.len())
        .find(|&k| images.iter().map(|im| &im[..k]).collect::<BTreeSet<_>>().len() == homs.len())
        .unwrap_or(elements.len());
    let names: Vec<String> = if k == 0 {
        alloc::vec![alloc::format!("{}_0", entity); homs.len()]
    } else {
        images.iter().map(|im| im[..k].join("_")).collect()
    };
    if names.iter().collect::<BTreeSet<_>>().len() == names.len() {
        names
    } else {
        (0..homs.len()).map(|n| alloc::format!("{}_{}", entity, n)).collect()
    }
}

/// The limit of `i` over the morphisms out of each target entity.
pub fn pi(f: &SchemaMapping, i: &Instance, opts: &MigrationOptions) -> Result<Instance, MigrationError> {
    guard(f, opts)?;
    i.validate(&f.source)?;
    let mut limits: BTreeMap<String, Limit> = BTreeMap::new();
    for t in &f.target.entities {
        let rep = representable(f, t, opts.fuel)?;
        let d = delta_unchecked(f, &rep.instance)?;
        let mut elements: Vec<(usize, String, String)> = Vec::new();
        for (s, rows) in d.carriers() {
            for r in rows {
                let size = rep.row_terms[&(f.type_map[s].clone(), r.clone())].size();
                elements.push((size, s.clone(), r.clone()));
            }
        }
        elements.sort();
        let elements: Vec<(String, String)> = elements.into_iter().map(|(_, s, r)| (s, r)).collect();
        let homs = enumerate_homs(&f.source, &d, i)?;
        let names = name_rows(t, &elements, &homs);
        limits.insert(
            t.clone(),
            Limit {
                rep,
                elements,
                homs,
                names,
            },
        );
    }

    let mut out = Instance::empty_on(&f.target);
    for (t, lim) in &limits {
        for name in &lim.names {
            out.add_row(t, name.clone());
        }
    }
    for (op, dom, cod) in f.target.columns() {
        let here = &limits[dom];
        match f.target.op_kind(op) {
            Some(OpKind::ForeignKey) => {
                let there = &limits[cod];
                // where each element of the codomain's representable lands
                // once its generator is sent to op(x)
                let start = here
                    .rep
                    .instance
                    .get(op, "x")
                    .cloned()
                    .expect("chase closes under columns");
                let mut moved: BTreeMap<(String, String), String> = BTreeMap::new();
                for (s, r) in &there.elements {
                    let term = &there.rep.row_terms[&(f.type_map[s].clone(), r.clone())];
                    let env: Env = [("x".to_string(), start.clone())].into();
                    let v = here.rep.instance.eval_term(&f.target, &env, term)?;
                    moved.insert((s.clone(), r.clone()), v.as_row().unwrap_or_default().to_string());
                }
                let index: BTreeMap<&BTreeMap<String, BTreeMap<String, String>>, &str> = there
                    .homs
                    .iter()
                    .zip(&there.names)
                    .map(|(h, n)| (&h.rows, n.as_str()))
                    .collect();
                for (h, name) in here.homs.iter().zip(&here.names) {
                    let mut rows: BTreeMap<String, BTreeMap<String, String>> =
                        f.source.entities.iter().map(|e| (e.clone(), BTreeMap::new())).collect();
                    for ((s, r), landed) in &moved {
                        let img = h.image(s, landed).expect("homomorphisms are total");
                        rows.get_mut(s)
                            .expect("source entity")
                            .insert(r.clone(), img.to_string());
                    }
                    let target = index.get(&rows).expect("precomposition is a homomorphism");
                    out.set(op, name.clone(), Value::row(cod, *target));
                }
            }
            _ => {
                let cell = here.rep.instance.get(op, "x").expect("chase closes under columns");
                for (h, name) in here.homs.iter().zip(&here.names) {
                    let v = h
                        .apply_value(&f.source, cell)
                        .ok_or_else(|| MigrationError::UndeterminedAttribute {
                            entity: dom.to_string(),
                            op: op.to_string(),
                        })?;
                    out.set(op, name.clone(), v);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equality::Theory;
    use crate::fixtures;
    use crate::kernel::{Signature, TypeExpr};
    use crate::mapping::OpImage;
    use crate::schema::{instance_equal_upto_iso, FqlSchema};
    use crate::value::Builtins;

    fn entities(names: &[&str], ops: &[(&str, &str, &str)]) -> FqlSchema {
        let mut sig = Signature::new();
        for n in names {
            sig.add_base_type(*n);
        }
        sig.add_base_type("String");
        for (op, d, c) in ops {
            sig.add_operation(*op, TypeExpr::base(*d), TypeExpr::base(*c)).unwrap();
        }
        FqlSchema::new(
            Theory::new(sig),
            names.iter().map(|n| n.to_string()).collect(),
            ["String".to_string()].into(),
            &Builtins::standard(),
        )
        .unwrap()
    }

    /// Employees pointing at departments, both named.
    fn emp_dept() -> FqlSchema {
        entities(
            &["E", "D"],
            &[("works", "E", "D"), ("ename", "E", "String"), ("dname", "D", "String")],
        )
    }

    fn emp_dept_instance() -> Instance {
        let mut i = Instance::new();
        for (e, d, n) in [("e1", "d1", "ann"), ("e2", "d1", "bob"), ("e3", "d2", "cy")] {
            i.add_row("E", e);
            i.set("works", e, Value::row("D", d));
            i.set("ename", e, Value::str(n));
        }
        for (d, n) in [("d1", "sales"), ("d2", "ops"), ("d3", "hr")] {
            i.add_row("D", d);
            i.set("dname", d, Value::str(n));
        }
        i
    }

    #[test]
    fn identity_migrations_are_isomorphic() {
        let s = emp_dept();
        let id = SchemaMapping::identity(&s);
        let i = emp_dept_instance();
        let opts = MigrationOptions::default();
        assert_eq!(delta(&id, &i, &opts).unwrap(), i);
        let sg = sigma(&id, &i, &opts).unwrap();
        assert!(instance_equal_upto_iso(&s, &sg, &i).is_some(), "{:?}", sg);
        let p = pi(&id, &i, &opts).unwrap();
        assert!(instance_equal_upto_iso(&s, &p, &i).is_some(), "{:?}", p);
        assert_eq!(p.carrier("E").collect::<Vec<_>>(), ["e1", "e2", "e3"]);
    }

    fn collapse() -> SchemaMapping {
        let src = entities(&["A", "B"], &[]);
        let dst = entities(&["C"], &[]);
        SchemaMapping::new(
            src,
            dst,
            [("A".into(), "C".into()), ("B".into(), "C".into())].into(),
            BTreeMap::new(),
        )
        .unwrap()
    }

    #[test]
    fn pi_of_two_unrelated_types_is_a_product() {
        let f = collapse();
        let mut i = Instance::new();
        for a in ["a1", "a2"] {
            i.add_row("A", a);
        }
        for b in ["b1", "b2", "b3"] {
            i.add_row("B", b);
        }
        let p = pi(&f, &i, &MigrationOptions::default()).unwrap();
        assert_eq!(p.carrier_len("C"), 6);
        let s = sigma(&f, &i, &MigrationOptions::default()).unwrap();
        assert_eq!(s.carrier_len("C"), 5);
        let mut partial = Instance::new();
        partial.add_row("A", "a1");
        partial.declare_entity("B");
        assert_eq!(
            pi(&f, &partial, &MigrationOptions::default()).unwrap().carrier_len("C"),
            0
        );
    }

    #[test]
    fn delta_duplicates_a_shared_carrier() {
        let f = collapse();
        let mut j = Instance::new();
        j.add_row("C", "c1");
        j.add_row("C", "c2");
        let d = delta(&f, &j, &MigrationOptions::default()).unwrap();
        assert_eq!(d.carrier("A").collect::<Vec<_>>(), ["c1", "c2"]);
        assert_eq!(d.carrier("B").collect::<Vec<_>>(), ["c1", "c2"]);
    }

    #[test]
    fn renaming_relabels_rows() {
        let src = emp_dept();
        let dst = entities(
            &["Person", "Org"],
            &[
                ("dept", "Person", "Org"),
                ("name", "Person", "String"),
                ("title", "Org", "String"),
            ],
        );
        let f = SchemaMapping::new(
            src.clone(),
            dst.clone(),
            [("E".into(), "Person".into()), ("D".into(), "Org".into())].into(),
            [
                ("works".into(), OpImage::new("y", Term::path("y", ["dept"]))),
                ("ename".into(), OpImage::new("y", Term::path("y", ["name"]))),
                ("dname".into(), OpImage::new("y", Term::path("y", ["title"]))),
            ]
            .into(),
        )
        .unwrap();
        let i = emp_dept_instance();
        let opts = MigrationOptions::default();
        let pushed = sigma(&f, &i, &opts).unwrap();
        assert_eq!(pushed.carrier_len("Person"), 3);
        let back = delta(&f, &pushed, &opts).unwrap();
        assert!(instance_equal_upto_iso(&src, &back, &i).is_some());
        let lim = pi(&f, &i, &opts).unwrap();
        assert!(instance_equal_upto_iso(&dst, &lim, &pushed).is_some());
    }

    #[test]
    fn unconstrained_cycles_exhaust_fuel() {
        let s = fixtures::company_schema();
        let id = SchemaMapping::identity(&s);
        let opts = MigrationOptions {
            fuel: 6,
            allow_unverified: false,
        };
        let err = pi(&id, &fixtures::palindrome_instance(), &opts).unwrap_err();
        assert!(err.is_fuel_exhausted(), "{}", err);
        // sigma terminates here because every manager chain in the data is closed
        let sg = sigma(&id, &fixtures::palindrome_instance(), &opts).unwrap();
        assert!(instance_equal_upto_iso(&s, &sg, &fixtures::palindrome_instance()).is_some());
    }

    #[test]
    fn unverified_mappings_are_refused() {
        let src = fixtures::company_schema();
        // same signature without the department equation
        let mut th = src.theory.clone();
        th.equations.truncate(2);
        let dst = FqlSchema::new(th, src.entities.clone(), src.attributes.clone(), &src.builtins).unwrap();
        let mut f = SchemaMapping::identity(&src);
        f.target = dst;
        let opts = MigrationOptions {
            fuel: 4,
            allow_unverified: false,
        };
        let j = fixtures::palindrome_instance();
        assert_eq!(
            delta(&f, &j, &opts),
            Err(MigrationError::UnverifiedMapping(alloc::vec![2]))
        );
        let loose = MigrationOptions {
            allow_unverified: true,
            ..opts
        };
        assert_eq!(delta(&f, &j, &loose).unwrap(), j);
    }
}
