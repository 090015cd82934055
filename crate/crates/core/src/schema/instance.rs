use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{FqlSchema, OpKind};
use crate::kernel::{Term, TypeExpr};
use crate::nrc::Env;
use crate::value::{AttrCarrier, Datum, EvalError, Interpretation, Value};

/// Finite entity carriers plus one total table per foreign key and
/// attribute. Foreign-key cells hold row values of the codomain entity;
/// attribute cells hold builtin constants, labelled nulls, or symbolic
/// builtin applications over nulls.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Instance {
    carriers: BTreeMap<String, BTreeSet<String>>,
    tables: BTreeMap<String, BTreeMap<String, Value>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum InstanceError {
    #[error("`{0}` is not an entity type of the schema")]
    UnknownEntity(String),
    #[error("`{0}` is not a foreign key or attribute of the schema")]
    UnknownColumn(String),
    #[error("table `{op}` has no entry for row `{row}`")]
    PartialFunction { op: String, row: String },
    #[error("table `{op}` has an entry for `{row}`, which is not a row of `{entity}`")]
    StrayRow { op: String, row: String, entity: String },
    #[error("cell `{op}({row})` = `{value}` does not inhabit {expected}")]
    IllTypedCell {
        op: String,
        row: String,
        value: Value,
        expected: String,
    },
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("equation #{index} quantifies over {count} environments; the limit is {limit}")]
    TooLarge { index: usize, count: u128, limit: u128 },
}

impl Instance {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_row(&mut self, entity: &str, row: impl Into<String>) {
        self.carriers.entry(entity.to_string()).or_default().insert(row.into());
    }

    /// Ensures `entity` is present even when it has no rows.
    pub fn declare_entity(&mut self, entity: &str) {
        self.carriers.entry(entity.to_string()).or_default();
    }

    pub fn declare_table(&mut self, op: &str) {
        self.tables.entry(op.to_string()).or_default();
    }

    pub fn set(&mut self, op: &str, row: impl Into<String>, value: Value) {
        self.tables.entry(op.to_string()).or_default().insert(row.into(), value);
    }

    pub fn carrier(&self, entity: &str) -> impl Iterator<Item = &str> + '_ {
        self.carriers.get(entity).into_iter().flatten().map(String::as_str)
    }

    pub fn carrier_len(&self, entity: &str) -> usize {
        self.carriers.get(entity).map_or(0, BTreeSet::len)
    }

    pub fn carriers(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.carriers
    }

    pub fn tables(&self) -> &BTreeMap<String, BTreeMap<String, Value>> {
        &self.tables
    }

    pub fn get(&self, op: &str, row: &str) -> Option<&Value> {
        self.tables.get(op)?.get(row)
    }

    pub fn has_row(&self, entity: &str, row: &str) -> bool {
        self.carriers.get(entity).is_some_and(|c| c.contains(row))
    }

    /// Total number of entity rows.
    pub fn size(&self) -> usize {
        self.carriers.values().map(BTreeSet::len).sum()
    }

    /// Empty carriers and tables for every entity and column of `schema`.
    pub fn empty_on(schema: &FqlSchema) -> Self {
        let mut out = Instance::new();
        for e in &schema.entities {
            out.declare_entity(e);
        }
        for (op, _, _) in schema.columns() {
            out.declare_table(op);
        }
        out
    }

    /// Concrete attribute values of type `ty` appearing in cells.
    pub fn active_domain(&self, schema: &FqlSchema, ty: &str) -> BTreeSet<Value> {
        schema
            .attribute_ops()
            .into_iter()
            .filter(|(_, _, cod)| *cod == ty)
            .filter_map(|(op, _, _)| self.tables.get(op))
            .flat_map(|t| t.values())
            .filter(|v| !v.has_null())
            .cloned()
            .collect()
    }

    /// Checks that carriers and tables match the schema: every table is
    /// total on its domain and lands in its codomain.
    pub fn validate(&self, schema: &FqlSchema) -> Result<(), InstanceError> {
        if let Some(e) = self.carriers.keys().find(|e| !schema.is_entity(e)) {
            return Err(InstanceError::UnknownEntity(e.clone()));
        }
        if let Some(op) = self
            .tables
            .keys()
            .find(|op| !matches!(schema.op_kind(op), Some(OpKind::ForeignKey | OpKind::Attribute)))
        {
            return Err(InstanceError::UnknownColumn(op.clone()));
        }
        for (op, dom, cod) in schema.columns() {
            let table = self.tables.get(op);
            for row in self.carrier(dom) {
                let value = table
                    .and_then(|t| t.get(row))
                    .ok_or_else(|| InstanceError::PartialFunction {
                        op: op.to_string(),
                        row: row.to_string(),
                    })?;
                let ok = if schema.is_entity(cod) {
                    value.as_row().is_some_and(|r| self.has_row(cod, r))
                        && matches!(value, Value::Base { ty, .. } if ty == cod)
                } else {
                    schema.builtins.is_value_of(cod, value)
                };
                if !ok {
                    return Err(InstanceError::IllTypedCell {
                        op: op.to_string(),
                        row: row.to_string(),
                        value: value.clone(),
                        expected: cod.to_string(),
                    });
                }
            }
            if let Some(stray) = table.into_iter().flat_map(|t| t.keys()).find(|r| !self.has_row(dom, r)) {
                return Err(InstanceError::StrayRow {
                    op: op.to_string(),
                    row: stray.clone(),
                    entity: dom.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Evaluates a schema term: table lookups for columns, registered
    /// semantics for builtins.
    pub fn eval_term(&self, schema: &FqlSchema, env: &Env, term: &Term) -> Result<Value, EvalError> {
        let interp = InstanceInterp { schema, instance: self };
        eval_with(&interp, env, term)
    }
}

pub(crate) fn eval_with(interp: &dyn Interpretation, env: &Env, term: &Term) -> Result<Value, EvalError> {
    match term {
        Term::Var(v) => env.get(v).cloned().ok_or_else(|| EvalError::UnboundVariable(v.clone())),
        Term::Unit => Ok(Value::Unit),
        Term::Pair(a, b) => Ok(Value::pair(eval_with(interp, env, a)?, eval_with(interp, env, b)?)),
        Term::Proj1(a) | Term::Proj2(a) => match eval_with(interp, env, a)? {
            Value::Pair(l, r) => Ok(if matches!(term, Term::Proj1(_)) { *l } else { *r }),
            v => Err(EvalError::Stuck(alloc::format!("projection from `{}`", v))),
        },
        Term::App(op, a) => interp.apply(op, &eval_with(interp, env, a)?),
    }
}

/// Interprets columns by table lookup and everything else by the schema's
/// builtins.
#[derive(Clone, Copy)]
pub struct InstanceInterp<'a> {
    pub schema: &'a FqlSchema,
    pub instance: &'a Instance,
}

impl Interpretation for InstanceInterp<'_> {
    fn apply(&self, op: &str, arg: &Value) -> Result<Value, EvalError> {
        match self.schema.op_kind(op) {
            Some(OpKind::ForeignKey | OpKind::Attribute) => {
                let row = arg
                    .as_row()
                    .ok_or_else(|| EvalError::Stuck(alloc::format!("`{}` applied to non-row `{}`", op, arg)))?;
                self.instance
                    .get(op, row)
                    .cloned()
                    .ok_or_else(|| EvalError::PartialFunction {
                        op: op.to_string(),
                        arg: arg.clone(),
                    })
            }
            Some(OpKind::Builtin) => self.schema.builtins.apply(op, arg),
            None => Err(EvalError::UninterpretedOperation(op.to_string())),
        }
    }
}

/// Controls how attribute-typed variables are quantified.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SampleConfig {
    pub sample_size: usize,
    pub seed: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            sample_size: 256,
            seed: 0,
        }
    }
}

/// Upper bound on environments enumerated for one equation.
pub const MAX_ENVIRONMENTS: u128 = 1_000_000;

impl SampleConfig {
    fn rng_for(&self, ty: &str) -> ChaCha8Rng {
        // FNV-1a over the type name keeps per-type streams independent
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in ty.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        ChaCha8Rng::seed_from_u64(self.seed ^ h)
    }

    /// Deterministic pseudo-random values of an attribute type.
    pub fn sample(&self, ty: &str, carrier: AttrCarrier) -> Vec<Value> {
        let mut rng = self.rng_for(ty);
        let mut out = Vec::with_capacity(self.sample_size);
        let typed = |datum| Value::Base {
            ty: ty.to_string(),
            datum,
        };
        match carrier {
            AttrCarrier::Integers => {
                for seed in [0i64, 1, -1] {
                    out.push(typed(Datum::Int(seed)));
                }
                while out.len() < self.sample_size {
                    out.push(typed(Datum::Int(rng.random_range(-1000..=1000))));
                }
            }
            AttrCarrier::Strings => {
                out.push(typed(Datum::Str(String::new())));
                while out.len() < self.sample_size {
                    let len = rng.random_range(0..=6usize);
                    let s: String = (0..len).map(|_| (b'a' + rng.random_range(0..3u8)) as char).collect();
                    out.push(typed(Datum::Str(s)));
                }
            }
        }
        out.truncate(self.sample_size);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EquationStatus {
    Satisfied,
    /// Both sides evaluate to distinct concrete values under `witness`.
    Violated {
        witness: Env,
        lhs: Value,
        rhs: Value,
    },
    /// Checked only on a finite sample of attribute values.
    SampledOnly {
        sample_size: usize,
    },
    /// The sides differ only through labelled nulls, whose values are
    /// unknown.
    Undetermined {
        witness: Env,
        lhs: Value,
        rhs: Value,
    },
}

impl EquationStatus {
    pub fn is_violated(&self) -> bool {
        matches!(self, EquationStatus::Violated { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SatisfactionReport {
    pub statuses: Vec<EquationStatus>,
}

impl SatisfactionReport {
    pub fn all_satisfied(&self) -> bool {
        self.statuses.iter().all(|s| matches!(s, EquationStatus::Satisfied))
    }

    /// No equation is Violated (sampled and undetermined ones are allowed).
    pub fn no_violations(&self) -> bool {
        !self.statuses.iter().any(EquationStatus::is_violated)
    }
}

fn domain(schema: &FqlSchema, inst: &Instance, cfg: &SampleConfig, ty: &TypeExpr, sampled: &mut bool) -> Vec<Value> {
    match ty {
        TypeExpr::Unit => vec![Value::Unit],
        TypeExpr::Prod(a, b) => {
            let da = domain(schema, inst, cfg, a, sampled);
            let db = domain(schema, inst, cfg, b, sampled);
            da.iter()
                .flat_map(|x| db.iter().map(move |y| Value::pair(x.clone(), y.clone())))
                .collect()
        }
        TypeExpr::Base(name) if schema.is_entity(name) => {
            inst.carrier(name).map(|r| Value::row(name.clone(), r)).collect()
        }
        TypeExpr::Base(name) => {
            *sampled = true;
            let mut values: BTreeSet<Value> = inst.active_domain(schema, name);
            if let Some(carrier) = schema.builtins.carrier(name) {
                values.extend(cfg.sample(name, carrier));
            }
            values.into_iter().collect()
        }
    }
}

/// Checks every equation of the schema in the instance.
///
/// Entity-typed variables range over their carriers exhaustively.
/// Attribute-typed variables range over the concrete values in the
/// instance's cells plus a deterministic sample, and such equations are
/// reported as [`EquationStatus::SampledOnly`] when no counterexample turns
/// up.
pub fn check_instance(
    schema: &FqlSchema,
    inst: &Instance,
    cfg: &SampleConfig,
) -> Result<SatisfactionReport, InstanceError> {
    inst.validate(schema)?;
    let interp = InstanceInterp { schema, instance: inst };
    let mut statuses = Vec::new();
    for (index, eq) in schema.theory.equations.iter().enumerate() {
        let mut sampled = false;
        let vars: Vec<(&str, Vec<Value>)> = eq
            .ctx
            .visible()
            .into_iter()
            .map(|(name, ty)| (name, domain(schema, inst, cfg, ty, &mut sampled)))
            .collect();
        let count: u128 = vars.iter().map(|(_, d)| d.len() as u128).product();
        let mut rng = cfg.rng_for("environments");
        let indices: Vec<Vec<usize>> = if count > MAX_ENVIRONMENTS {
            if !sampled {
                return Err(InstanceError::TooLarge {
                    index,
                    count,
                    limit: MAX_ENVIRONMENTS,
                });
            }
            (0..MAX_ENVIRONMENTS)
                .map(|_| vars.iter().map(|(_, d)| rng.random_range(0..d.len())).collect())
                .collect()
        } else {
            odometer(&vars.iter().map(|(_, d)| d.len()).collect::<Vec<_>>())
        };
        let mut status = None;
        for choice in indices {
            let env: Env = vars
                .iter()
                .zip(&choice)
                .map(|((name, d), &i)| (name.to_string(), d[i].clone()))
                .collect();
            let lhs = eval_with(&interp, &env, &eq.lhs)?;
            let rhs = eval_with(&interp, &env, &eq.rhs)?;
            if lhs == rhs {
                continue;
            }
            if lhs.has_null() || rhs.has_null() {
                status.get_or_insert(EquationStatus::Undetermined { witness: env, lhs, rhs });
            } else {
                status = Some(EquationStatus::Violated { witness: env, lhs, rhs });
                break;
            }
        }
        statuses.push(status.unwrap_or(if sampled {
            EquationStatus::SampledOnly {
                sample_size: cfg.sample_size,
            }
        } else {
            EquationStatus::Satisfied
        }));
    }
    Ok(SatisfactionReport { statuses })
}

/// Every index vector below `sizes`, last position fastest.
pub(crate) fn odometer(sizes: &[usize]) -> Vec<Vec<usize>> {
    if sizes.contains(&0) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut cur = vec![0; sizes.len()];
    loop {
        out.push(cur.clone());
        let mut i = sizes.len();
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < sizes[i] {
                break;
            }
            cur[i] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn manager_instance(boss_of_e1: &str) -> Instance {
        let mut i = Instance::new();
        for e in ["e1", "e2"] {
            i.add_row("Emp", e);
            i.set("ename", e, Value::str("x"));
        }
        i.add_row("Dept", "d1");
        i.add_row("Dept", "d2");
        i.set("manager", "e1", Value::row("Emp", boss_of_e1));
        i.set("manager", "e2", Value::row("Emp", "e2"));
        i.set("worksIn", "e1", Value::row("Dept", "d1"));
        i.set("worksIn", "e2", Value::row("Dept", "d2"));
        i
    }

    #[test]
    fn satisfied_single_employee() {
        let s = fixtures::company_schema();
        let mut i = Instance::new();
        i.add_row("Emp", "e1");
        i.add_row("Dept", "d1");
        i.set("manager", "e1", Value::row("Emp", "e1"));
        i.set("worksIn", "e1", Value::row("Dept", "d1"));
        i.set("ename", "e1", Value::str("ann"));
        let r = check_instance(&s, &i, &SampleConfig::default()).unwrap();
        assert_eq!(r.statuses[2], EquationStatus::Satisfied);
        assert!(matches!(
            r.statuses[0],
            EquationStatus::SampledOnly { sample_size: 256 }
        ));
        assert!(r.no_violations());
    }

    #[test]
    fn violated_with_witness() {
        let s = fixtures::company_schema();
        let i = manager_instance("e2");
        let r = check_instance(&s, &i, &SampleConfig::default()).unwrap();
        match &r.statuses[2] {
            EquationStatus::Violated { witness, lhs, rhs } => {
                assert_eq!(witness.get("x"), Some(&Value::row("Emp", "e1")));
                assert_eq!(lhs, &Value::row("Dept", "d1"));
                assert_eq!(rhs, &Value::row("Dept", "d2"));
            }
            other => panic!("expected violation, got {:?}", other),
        }
        assert!(check_instance(&s, &manager_instance("e1"), &SampleConfig::default())
            .unwrap()
            .no_violations());
    }

    #[test]
    fn empty_carriers_satisfy_entity_equations() {
        let s = fixtures::company_schema();
        let r = check_instance(&s, &Instance::empty_on(&s), &SampleConfig::default()).unwrap();
        assert_eq!(r.statuses[2], EquationStatus::Satisfied);
    }

    #[test]
    fn partial_and_ill_typed_tables() {
        let s = fixtures::company_schema();
        let mut i = manager_instance("e1");
        i.tables.get_mut("ename").unwrap().remove("e2");
        assert!(matches!(
            check_instance(&s, &i, &SampleConfig::default()),
            Err(InstanceError::PartialFunction { .. })
        ));
        let mut i = manager_instance("e1");
        i.set("ename", "e2", Value::int(3));
        assert!(matches!(i.validate(&s), Err(InstanceError::IllTypedCell { .. })));
        let mut i = manager_instance("e1");
        i.set("worksIn", "e2", Value::row("Dept", "d9"));
        assert!(matches!(i.validate(&s), Err(InstanceError::IllTypedCell { .. })));
    }

    #[test]
    fn samples_are_deterministic() {
        let cfg = SampleConfig {
            sample_size: 16,
            seed: 7,
        };
        assert_eq!(
            cfg.sample("String", AttrCarrier::Strings),
            cfg.sample("String", AttrCarrier::Strings)
        );
        assert_eq!(cfg.sample("Int", AttrCarrier::Integers).len(), 16);
        let other = SampleConfig {
            sample_size: 16,
            seed: 8,
        };
        assert_ne!(
            cfg.sample("Int", AttrCarrier::Integers),
            other.sample("Int", AttrCarrier::Integers)
        );
    }

    #[test]
    fn odometer_counts() {
        assert_eq!(odometer(&[2, 3]).len(), 6);
        assert_eq!(odometer(&[]), vec![Vec::<usize>::new()]);
        assert!(odometer(&[2, 0]).is_empty());
    }
}
