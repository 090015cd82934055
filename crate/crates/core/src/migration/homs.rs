use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::schema::{FqlSchema, Instance, InstanceError};
use crate::value::{Datum, Interpretation, Value};

/// Largest function space `enumerate_homs` will search.
pub const HOM_SEARCH_LIMIT: u128 = 10_000_000;

/// Row maps per entity plus the images of the domain's labelled nulls.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Homomorphism {
    pub rows: BTreeMap<String, BTreeMap<String, String>>,
    pub nulls: BTreeMap<u32, Value>,
}

impl Homomorphism {
    pub fn image(&self, entity: &str, row: &str) -> Option<&str> {
        self.rows.get(entity)?.get(row).map(String::as_str)
    }

    /// Applies the null assignment to a value of the domain. `None` when a
    /// null is not covered.
    pub fn apply_value(&self, schema: &FqlSchema, v: &Value) -> Option<Value> {
        substitute_nulls(schema, v, &self.nulls)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum HomError {
    #[error("the search space has {size} candidate maps; the limit is {limit}")]
    TooLarge { size: u128, limit: u128 },
    #[error("labelled null ?{0} occurs only under builtin applications and cannot be matched")]
    UnboundNull(u32),
    #[error(transparent)]
    Invalid(#[from] InstanceError),
}

pub(crate) fn substitute_nulls(schema: &FqlSchema, v: &Value, nulls: &BTreeMap<u32, Value>) -> Option<Value> {
    Some(match v {
        Value::Base {
            datum: Datum::Null(n), ..
        } => nulls.get(n)?.clone(),
        Value::Pair(a, b) => Value::pair(substitute_nulls(schema, a, nulls)?, substitute_nulls(schema, b, nulls)?),
        Value::Opaque { op, arg } => {
            let arg = substitute_nulls(schema, arg, nulls)?;
            schema.builtins.apply(op, &arg).unwrap_or(Value::Opaque {
                op: op.clone(),
                arg: Box::new(arg),
            })
        }
        other => other.clone(),
    })
}

/// Binds bare nulls of `a` so that it matches `b`; symbolic applications
/// are left for the final check.
fn bind(a: &Value, b: &Value, nulls: &mut BTreeMap<u32, Value>) -> bool {
    match (a, b) {
        (
            Value::Base {
                datum: Datum::Null(n), ..
            },
            _,
        ) => match nulls.get(n) {
            Some(bound) => bound == b,
            None => {
                nulls.insert(*n, b.clone());
                true
            }
        },
        (Value::Pair(a1, a2), Value::Pair(b1, b2)) => bind(a1, b1, nulls) && bind(a2, b2, nulls),
        (Value::Pair(..), _) => false,
        (Value::Opaque { .. }, _) => true,
        _ => a == b,
    }
}

struct Search<'a> {
    schema: &'a FqlSchema,
    i: &'a Instance,
    j: &'a Instance,
    order: Vec<(&'a str, &'a str)>,
    rows: BTreeMap<&'a str, BTreeMap<&'a str, &'a str>>,
    /// (op, row) of every attribute cell holding a symbolic application
    deferred: Vec<(&'a str, &'a str)>,
}

impl<'a> Search<'a> {
    fn image(&self, entity: &str, row: &str) -> Option<&'a str> {
        self.rows.get(entity)?.get(row).copied()
    }

    fn fks_commute(&self, entity: &str, row: &str) -> bool {
        for (op, dom, cod) in self.schema.foreign_keys() {
            let check = |r: &str| -> bool {
                let target = self.i.get(op, r).and_then(Value::as_row).unwrap_or_default();
                match (self.image(dom, r), self.image(cod, target)) {
                    (Some(hr), Some(ht)) => self.j.get(op, hr).and_then(Value::as_row) == Some(ht),
                    _ => true,
                }
            };
            if dom == entity && !check(row) {
                return false;
            }
            if cod == entity
                && self
                    .i
                    .carrier(dom)
                    .any(|r| self.i.get(op, r).and_then(Value::as_row) == Some(row) && !check(r))
            {
                return false;
            }
        }
        true
    }

    fn go(
        &mut self,
        k: usize,
        nulls: &BTreeMap<u32, Value>,
        visit: &mut dyn FnMut(&Homomorphism),
    ) -> Result<(), HomError> {
        if k == self.order.len() {
            for &(op, r) in &self.deferred {
                let dom = self
                    .schema
                    .theory
                    .sig
                    .operation(op)
                    .and_then(|s| s.dom.as_base())
                    .unwrap_or_default();
                let cell = self.i.get(op, r).expect("validated");
                let Some(mapped) = substitute_nulls(self.schema, cell, nulls) else {
                    let missing = cell
                        .nulls()
                        .into_iter()
                        .map(|(_, n)| n)
                        .find(|n| !nulls.contains_key(n));
                    return Err(HomError::UnboundNull(missing.unwrap_or_default()));
                };
                let hr = self.image(dom, r).expect("all rows assigned");
                if Some(&mapped) != self.j.get(op, hr) {
                    return Ok(());
                }
            }
            let rows = self
                .rows
                .iter()
                .map(|(e, m)| {
                    (
                        e.to_string(),
                        m.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
                    )
                })
                .collect();
            visit(&Homomorphism {
                rows,
                nulls: nulls.clone(),
            });
            return Ok(());
        }
        let (entity, row) = self.order[k];
        let cands: Vec<&'a str> = self.j.carrier(entity).collect();
        for cand in cands {
            self.rows.entry(entity).or_default().insert(row, cand);
            if self.fks_commute(entity, row) {
                let mut local = nulls.clone();
                let ok = self
                    .schema
                    .attribute_ops()
                    .into_iter()
                    .filter(|(_, dom, _)| *dom == entity)
                    .all(|(op, _, _)| match (self.i.get(op, row), self.j.get(op, cand)) {
                        (Some(a), Some(b)) => bind(a, b, &mut local),
                        _ => false,
                    });
                if ok {
                    self.go(k + 1, &local, visit)?;
                }
            }
            self.rows.get_mut(entity).expect("inserted").remove(row);
        }
        Ok(())
    }
}

/// Size of the unconstrained space of row maps from `i` to `j`.
pub fn hom_search_space(schema: &FqlSchema, i: &Instance, j: &Instance) -> u128 {
    schema.entities.iter().fold(1u128, |acc, e| {
        let base = j.carrier_len(e) as u128;
        let mut p = 1u128;
        for _ in 0..i.carrier_len(e) {
            p = p.saturating_mul(base);
        }
        acc.saturating_mul(p)
    })
}

/// Calls `visit` on every homomorphism from `i` to `j`, in a fixed order.
pub fn for_each_hom(
    schema: &FqlSchema,
    i: &Instance,
    j: &Instance,
    visit: &mut dyn FnMut(&Homomorphism),
) -> Result<(), HomError> {
    i.validate(schema)?;
    j.validate(schema)?;
    let size = hom_search_space(schema, i, j);
    if size > HOM_SEARCH_LIMIT {
        return Err(HomError::TooLarge {
            size,
            limit: HOM_SEARCH_LIMIT,
        });
    }
    let mut order = Vec::new();
    let mut rows = BTreeMap::new();
    for e in &schema.entities {
        rows.insert(e.as_str(), BTreeMap::new());
        order.extend(i.carrier(e).map(|r| (e.as_str(), r)));
    }
    let deferred = schema
        .attribute_ops()
        .into_iter()
        .flat_map(|(op, dom, _)| i.carrier(dom).map(move |r| (op, r)))
        .filter(|(op, r)| i.get(op, r).is_some_and(contains_opaque))
        .collect();
    let mut search = Search {
        schema,
        i,
        j,
        order,
        rows,
        deferred,
    };
    search.go(0, &BTreeMap::new(), visit)
}

fn contains_opaque(v: &Value) -> bool {
    match v {
        Value::Opaque { .. } => true,
        Value::Pair(a, b) => contains_opaque(a) || contains_opaque(b),
        _ => false,
    }
}

/// Every homomorphism from `i` to `j`: row maps commuting with the foreign
/// keys, fixing concrete attribute values, and sending each labelled null of
/// `i` to one value of `j`.
pub fn enumerate_homs(schema: &FqlSchema, i: &Instance, j: &Instance) -> Result<Vec<Homomorphism>, HomError> {
    let mut out = Vec::new();
    for_each_hom(schema, i, j, &mut |h| out.push(h.clone()))?;
    Ok(out)
}

pub fn count_homs(schema: &FqlSchema, i: &Instance, j: &Instance) -> Result<usize, HomError> {
    let mut n = 0;
    for_each_hom(schema, i, j, &mut |_| n += 1)?;
    Ok(n)
}
