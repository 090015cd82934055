use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use super::{FqlSchema, Instance};
use crate::value::{Datum, Value};

/// Row bijections per entity plus a bijection on labelled nulls.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Isomorphism {
    pub rows: BTreeMap<String, BTreeMap<String, String>>,
    pub nulls: BTreeMap<u32, u32>,
}

/// Attribute cells of a row with nulls blanked out, used to prune
/// candidate images.
fn profile(schema: &FqlSchema, inst: &Instance, entity: &str, row: &str) -> Vec<Value> {
    schema
        .attribute_ops()
        .into_iter()
        .filter(|(_, dom, _)| *dom == entity)
        .map(|(op, _, _)| inst.get(op, row).map_or(Value::Unit, blank_nulls))
        .collect()
}

fn blank_nulls(v: &Value) -> Value {
    match v {
        Value::Base {
            ty,
            datum: Datum::Null(_),
        } => Value::null(ty.clone(), 0),
        Value::Pair(a, b) => Value::pair(blank_nulls(a), blank_nulls(b)),
        Value::Opaque { op, arg } => Value::Opaque {
            op: op.clone(),
            arg: alloc::boxed::Box::new(blank_nulls(arg)),
        },
        other => other.clone(),
    }
}

/// Extends a partial null bijection so that `a` maps onto `b`.
fn match_nulls(a: &Value, b: &Value, fwd: &mut BTreeMap<u32, u32>, bwd: &mut BTreeMap<u32, u32>) -> bool {
    match (a, b) {
        (
            Value::Base {
                ty: ta,
                datum: Datum::Null(x),
            },
            Value::Base {
                ty: tb,
                datum: Datum::Null(y),
            },
        ) => {
            if ta != tb {
                return false;
            }
            match (fwd.get(x), bwd.get(y)) {
                (None, None) => {
                    fwd.insert(*x, *y);
                    bwd.insert(*y, *x);
                    true
                }
                (Some(y2), Some(x2)) => y2 == y && x2 == x,
                _ => false,
            }
        }
        (Value::Pair(a1, a2), Value::Pair(b1, b2)) => match_nulls(a1, b1, fwd, bwd) && match_nulls(a2, b2, fwd, bwd),
        (Value::Opaque { op: oa, arg: aa }, Value::Opaque { op: ob, arg: ab }) => {
            oa == ob && match_nulls(aa, ab, fwd, bwd)
        }
        (
            Value::Base {
                datum: Datum::Null(_), ..
            },
            _,
        )
        | (
            _,
            Value::Base {
                datum: Datum::Null(_), ..
            },
        ) => false,
        _ => a == b,
    }
}

struct Search<'a> {
    schema: &'a FqlSchema,
    i: &'a Instance,
    j: &'a Instance,
    /// (entity, row) in assignment order
    order: Vec<(&'a str, &'a str)>,
    candidates: Vec<Vec<&'a str>>,
    rows: BTreeMap<&'a str, BTreeMap<&'a str, &'a str>>,
    used: BTreeMap<&'a str, BTreeSet<&'a str>>,
}

impl<'a> Search<'a> {
    fn image(&self, entity: &str, row: &str) -> Option<&'a str> {
        self.rows.get(entity)?.get(row).copied()
    }

    /// Foreign keys touching the newly assigned row commute where both ends
    /// are assigned.
    fn consistent(&self, entity: &str, row: &str) -> bool {
        for (op, dom, cod) in self.schema.foreign_keys() {
            let check = |r: &str| -> bool {
                let Some(target) = self.i.get(op, r).and_then(Value::as_row) else {
                    return false;
                };
                match (self.image(dom, r), self.image(cod, target)) {
                    (Some(hr), Some(ht)) => self.j.get(op, hr).and_then(Value::as_row) == Some(ht),
                    _ => true,
                }
            };
            if dom == entity && !check(row) {
                return false;
            }
            if cod == entity {
                let sources: Vec<&str> = self.i.carrier(dom).collect();
                for r in sources {
                    if self.i.get(op, r).and_then(Value::as_row) == Some(row) && !check(r) {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn nulls_match(&self) -> Option<BTreeMap<u32, u32>> {
        let mut fwd = BTreeMap::new();
        let mut bwd = BTreeMap::new();
        for (op, dom, _) in self.schema.attribute_ops() {
            for r in self.i.carrier(dom) {
                let hr = self.image(dom, r)?;
                if !match_nulls(self.i.get(op, r)?, self.j.get(op, hr)?, &mut fwd, &mut bwd) {
                    return None;
                }
            }
        }
        Some(fwd)
    }

    fn go(&mut self, k: usize) -> Option<BTreeMap<u32, u32>> {
        if k == self.order.len() {
            return self.nulls_match();
        }
        let (entity, row) = self.order[k];
        for ci in 0..self.candidates[k].len() {
            let cand = self.candidates[k][ci];
            if self.used.get(entity).is_some_and(|u| u.contains(cand)) {
                continue;
            }
            self.rows.entry(entity).or_default().insert(row, cand);
            self.used.entry(entity).or_default().insert(cand);
            if self.consistent(entity, row) {
                if let Some(n) = self.go(k + 1) {
                    return Some(n);
                }
            }
            self.rows.get_mut(entity).expect("inserted").remove(row);
            self.used.get_mut(entity).expect("inserted").remove(cand);
        }
        None
    }
}

/// Searches for row bijections commuting with every foreign key, fixing
/// concrete attribute values and matching labelled nulls bijectively.
pub fn instance_equal_upto_iso(schema: &FqlSchema, i: &Instance, j: &Instance) -> Option<Isomorphism> {
    for e in &schema.entities {
        if i.carrier_len(e) != j.carrier_len(e) {
            return None;
        }
    }
    let mut order = Vec::new();
    let mut candidates = Vec::new();
    for e in &schema.entities {
        let mut by_profile: BTreeMap<Vec<Value>, Vec<&str>> = BTreeMap::new();
        for r in j.carrier(e) {
            by_profile.entry(profile(schema, j, e, r)).or_default().push(r);
        }
        let mut counts: BTreeMap<Vec<Value>, isize> =
            by_profile.iter().map(|(p, v)| (p.clone(), v.len() as isize)).collect();
        for r in i.carrier(e) {
            let p = profile(schema, i, e, r);
            *counts.entry(p.clone()).or_default() -= 1;
            order.push((e.as_str(), r));
            candidates.push(by_profile.get(&p).cloned().unwrap_or_default());
        }
        if counts.values().any(|c| *c != 0) {
            return None;
        }
    }
    let mut search = Search {
        schema,
        i,
        j,
        order,
        candidates,
        rows: BTreeMap::new(),
        used: BTreeMap::new(),
    };
    let nulls = search.go(0)?;
    let rows = schema
        .entities
        .iter()
        .map(|e| {
            let m = search
                .rows
                .get(e.as_str())
                .map(|m| m.iter().map(|(a, b)| (String::from(*a), String::from(*b))).collect())
                .unwrap_or_default();
            (e.clone(), m)
        })
        .collect();
    Some(Isomorphism { rows, nulls })
}
