use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use super::instance::odometer;
use super::{FqlSchema, Instance};
use crate::egraph::{ClassId, EGraph, ENode, Limits, Reason, Rule};
use crate::equality::{Equation, IllTyped, NODES_PER_FUEL};
use crate::kernel::{Context, Term, TypeExpr};
use crate::value::{Interpretation, Value};

/// A typed constant of a presentation. Attribute-typed generators may carry
/// a concrete value; without one they stand for an unknown.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generator {
    pub name: String,
    pub ty: String,
    pub value: Option<Value>,
}

impl Generator {
    pub fn entity(name: impl Into<String>, ty: impl Into<String>) -> Self {
        Generator {
            name: name.into(),
            ty: ty.into(),
            value: None,
        }
    }

    pub fn constant(name: impl Into<String>, ty: impl Into<String>, value: Value) -> Self {
        Generator {
            name: name.into(),
            ty: ty.into(),
            value: Some(value),
        }
    }
}

/// Generators plus ground equations between terms over them.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Presentation {
    pub generators: Vec<Generator>,
    pub equations: Vec<(Term, Term)>,
}

impl Presentation {
    pub fn context(&self) -> Context {
        Context::from_bindings(
            self.generators
                .iter()
                .map(|g| (g.name.clone(), TypeExpr::base(g.ty.clone()))),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ChaseError {
    #[error("generator `{name}` has type `{ty}`, which is not a base type of the schema")]
    UnknownType { name: String, ty: String },
    #[error("generator `{0}` is declared twice")]
    DuplicateGenerator(String),
    #[error("generator `{name}` carries `{value}`, which is not a constant of `{ty}`")]
    BadConstant { name: String, ty: String, value: Value },
    #[error("ground equation #{index} is ill-typed: {error}")]
    IllTypedEquation { index: usize, error: IllTyped },
    #[error("the equations identify distinct constants `{lhs}` and `{rhs}`")]
    Inconsistent { lhs: Value, rhs: Value },
    #[error("no saturation within fuel {fuel}; partial model has {partial_size} rows")]
    FuelExhausted { fuel: u32, partial_size: usize },
}

/// A completed chase: the instance plus a representative term for each row.
#[derive(Clone, Debug)]
pub(crate) struct Saturated {
    pub instance: Instance,
    pub row_terms: BTreeMap<(String, String), Term>,
}

pub(crate) struct Chase<'a> {
    schema: &'a FqlSchema,
    g: EGraph,
    generators: Vec<Generator>,
    /// equations over entity variables only, instantiated at every tuple
    ground_rules: Vec<Rule>,
    /// equations mixing entity and attribute variables, applied by matching
    matched_rules: Vec<Rule>,
}

impl<'a> Chase<'a> {
    pub fn new(schema: &'a FqlSchema, pres: &Presentation) -> Result<Self, ChaseError> {
        let sig = &schema.theory.sig;
        let mut g = EGraph::new(sig);
        let mut seen = BTreeSet::new();
        for gen in &pres.generators {
            if !seen.insert(gen.name.as_str()) {
                return Err(ChaseError::DuplicateGenerator(gen.name.clone()));
            }
            if !schema.is_entity(&gen.ty) && !schema.is_attribute(&gen.ty) {
                return Err(ChaseError::UnknownType {
                    name: gen.name.clone(),
                    ty: gen.ty.clone(),
                });
            }
            if let Some(v) = &gen.value {
                if !schema.is_attribute(&gen.ty) || v.has_null() || !schema.builtins.is_value_of(&gen.ty, v) {
                    return Err(ChaseError::BadConstant {
                        name: gen.name.clone(),
                        ty: gen.ty.clone(),
                        value: v.clone(),
                    });
                }
            }
            g.declare_var(&gen.name, &TypeExpr::base(gen.ty.clone()));
        }
        for gen in &pres.generators {
            g.add_term(&Term::var(gen.name.clone())).expect("declared above");
        }
        let ctx = pres.context();
        for (index, (l, r)) in pres.equations.iter().enumerate() {
            Equation::new(ctx.clone(), l.clone(), r.clone())
                .check(sig)
                .map_err(|error| ChaseError::IllTypedEquation { index, error })?;
            let a = g.add_term(l).expect("checked above");
            let b = g.add_term(r).expect("checked above");
            g.union(a, b, Reason::Given(index));
        }
        let mut ground_rules = Vec::new();
        let mut matched_rules = Vec::new();
        for (index, eq) in schema.theory.equations.iter().enumerate() {
            let tys: Vec<&TypeExpr> = eq.ctx.visible().into_iter().map(|(_, t)| t).collect();
            let entity_only = tys.iter().all(|t| t.as_base().is_some_and(|b| schema.is_entity(b)));
            let any_entity = tys.iter().any(|t| t.base_names().iter().any(|b| schema.is_entity(b)));
            let ty = eq.check(sig).expect("schema equations are checked on construction");
            let [fwd, bwd] = g
                .rules_for(&eq.ctx, &eq.lhs, &eq.rhs, &ty, index)
                .expect("schema equations are checked on construction");
            if entity_only {
                ground_rules.push(fwd);
            } else if any_entity {
                // equations purely over attribute types describe the builtins
                // and are not used to generate elements
                matched_rules.push(fwd);
                matched_rules.push(bwd);
            }
        }
        g.rebuild();
        Ok(Chase {
            schema,
            g,
            generators: pres.generators.clone(),
            ground_rules,
            matched_rules,
        })
    }

    fn entity_ty(&self, class: ClassId) -> Option<&str> {
        self.g.class_type(class).as_base().filter(|b| self.schema.is_entity(b))
    }

    fn entity_classes(&self) -> Vec<ClassId> {
        self.g.classes().filter(|c| self.entity_ty(*c).is_some()).collect()
    }

    /// One chase round. Returns false when the node budget ran out.
    fn step(&mut self, node_cap: usize) -> Result<bool, ChaseError> {
        for class in self.entity_classes() {
            let ty = self.entity_ty(class).expect("filtered").to_string();
            for (op, _) in self.schema.columns_from(&ty) {
                self.g.add_app(op, class);
            }
        }
        self.g.rebuild();
        let ground_rules = core::mem::take(&mut self.ground_rules);
        for rule in &ground_rules {
            let choices: Vec<Vec<ClassId>> = rule.var_tys.iter().map(|t| self.g.classes_of_type(*t)).collect();
            let count: usize = choices.iter().map(Vec::len).fold(1usize, |a, n| a.saturating_mul(n));
            if self.g.node_count().saturating_add(count) > node_cap {
                self.ground_rules = ground_rules;
                return Ok(false);
            }
            for pick in odometer(&choices.iter().map(Vec::len).collect::<Vec<_>>()) {
                let subst: Vec<ClassId> = pick.iter().zip(&choices).map(|(&i, cs)| cs[i]).collect();
                self.g.fire(rule, &subst);
            }
        }
        self.ground_rules = ground_rules;
        self.g.rebuild();
        if !self.matched_rules.is_empty() {
            let limits = Limits {
                depth_cap: u32::MAX / 2,
                node_cap,
                rounds: 1,
            };
            let rules = core::mem::take(&mut self.matched_rules);
            let out = self.g.apply_rules(&rules, &limits);
            self.matched_rules = rules;
            if out.capped {
                return Ok(false);
            }
        }
        self.g.product_closure();
        self.fold_constants()?;
        Ok(self.g.node_count() < node_cap)
    }

    /// Concrete values of classes, from constant generators and builtin
    /// evaluation, to a fixpoint.
    fn concrete_values(&self) -> Result<BTreeMap<ClassId, Value>, ChaseError> {
        let consts: BTreeMap<&str, &Value> = self
            .generators
            .iter()
            .filter_map(|g| Some((g.name.as_str(), g.value.as_ref()?)))
            .collect();
        let mut values: BTreeMap<ClassId, Value> = BTreeMap::new();
        loop {
            let mut changed = false;
            for class in self.g.classes() {
                for &n in self.g.nodes_of(class) {
                    let v = match self.g.node(n) {
                        ENode::Var(_) => self.g.var_name(n).and_then(|v| consts.get(v)).map(|v| (*v).clone()),
                        ENode::Unit => Some(Value::Unit),
                        ENode::Pair(a, b) => values
                            .get(&a)
                            .zip(values.get(&b))
                            .map(|(a, b)| Value::pair(a.clone(), b.clone())),
                        ENode::Proj1(a) => match values.get(&a) {
                            Some(Value::Pair(l, _)) => Some((**l).clone()),
                            _ => None,
                        },
                        ENode::Proj2(a) => match values.get(&a) {
                            Some(Value::Pair(_, r)) => Some((**r).clone()),
                            _ => None,
                        },
                        ENode::App(_, a) => {
                            let op = self.g.op_name(n).expect("application node");
                            match (self.schema.builtins.op(op), values.get(&a)) {
                                (Some(_), Some(arg)) => self.schema.builtins.apply(op, arg).ok(),
                                _ => None,
                            }
                        }
                    };
                    let Some(v) = v else { continue };
                    match values.get(&class) {
                        None => {
                            values.insert(class, v);
                            changed = true;
                        }
                        Some(old) if *old != v => {
                            return Err(ChaseError::Inconsistent {
                                lhs: old.clone(),
                                rhs: v,
                            });
                        }
                        Some(_) => {}
                    }
                }
            }
            if !changed {
                return Ok(values);
            }
        }
    }

    /// Merges classes with equal concrete values until stable.
    fn fold_constants(&mut self) -> Result<(), ChaseError> {
        loop {
            let values = self.concrete_values()?;
            let mut by_value: BTreeMap<&Value, ClassId> = BTreeMap::new();
            let mut merged = false;
            for (class, v) in &values {
                if matches!(v, Value::Unit | Value::Pair(..)) {
                    continue;
                }
                match by_value.get(v) {
                    Some(&other) => merged |= self.g.union(other, *class, Reason::SameValue),
                    None => {
                        by_value.insert(v, *class);
                    }
                }
            }
            if !merged {
                return Ok(());
            }
            self.g.rebuild();
        }
    }

    fn entity_rows(&self) -> usize {
        self.entity_classes().len()
    }

    pub fn run(mut self, fuel: u32) -> Result<Saturated, ChaseError> {
        let node_cap = (fuel as usize).saturating_mul(NODES_PER_FUEL);
        self.fold_constants()?;
        for _ in 0..fuel {
            let before = (self.g.node_count(), self.g.class_count());
            if !self.step(node_cap)? {
                break;
            }
            if (self.g.node_count(), self.g.class_count()) == before {
                return self.extract();
            }
        }
        Err(ChaseError::FuelExhausted {
            fuel,
            partial_size: self.entity_rows(),
        })
    }

    fn extract(&mut self) -> Result<Saturated, ChaseError> {
        self.g.rebuild();
        let reps = self.g.extract_all();
        let mut classes: Vec<(String, String, ClassId)> = Vec::new();
        for class in self.entity_classes() {
            let ty = self.entity_ty(class).expect("filtered").to_string();
            let name = path_name(&reps[&class]).unwrap_or_default();
            classes.push((ty, name, class));
        }
        classes.sort();
        // names are unique per type unless a generator name is itself a path
        let mut row_of: BTreeMap<ClassId, String> = BTreeMap::new();
        let mut taken: BTreeSet<(String, String)> = BTreeSet::new();
        for (ty, name, class) in &classes {
            let mut candidate = if name.is_empty() {
                String::from("r")
            } else {
                name.clone()
            };
            let mut k = 2;
            while taken.contains(&(ty.clone(), candidate.clone())) {
                candidate = alloc::format!("{}_{}", name, k);
                k += 1;
            }
            taken.insert((ty.clone(), candidate.clone()));
            row_of.insert(*class, candidate);
        }

        let mut values: BTreeMap<ClassId, Value> = self.concrete_values()?;
        let mut next_null: u32 = 1;
        for gen in &self.generators {
            if gen.value.is_none() && self.schema.is_attribute(&gen.ty) {
                let n = self
                    .g
                    .lookup_term(&Term::var(gen.name.clone()))
                    .expect("generators are added");
                let c = self.g.find(n);
                if let alloc::collections::btree_map::Entry::Vacant(e) = values.entry(c) {
                    e.insert(Value::null(gen.ty.clone(), next_null));
                    next_null += 1;
                }
            }
        }
        self.propagate_symbolic(&mut values);

        let mut instance = Instance::empty_on(self.schema);
        let mut row_terms = BTreeMap::new();
        for (ty, _, class) in &classes {
            let row = &row_of[class];
            instance.add_row(ty, row.clone());
            row_terms.insert((ty.clone(), row.clone()), reps[class].clone());
        }
        for (ty, _, class) in &classes {
            let row = row_of[class].clone();
            for (op, cod) in self.schema.columns_from(ty) {
                let target = self.g.add_app(op, *class).expect("column of this entity");
                let target = self.g.find(target);
                if self.schema.is_entity(cod) {
                    instance.set(op, row.clone(), Value::row(cod, row_of[&target].clone()));
                } else {
                    if let alloc::collections::btree_map::Entry::Vacant(e) = values.entry(target) {
                        e.insert(Value::null(cod, next_null));
                        next_null += 1;
                        self.propagate_symbolic(&mut values);
                    }
                    instance.set(op, row.clone(), values[&target].clone());
                }
            }
        }
        Ok(Saturated { instance, row_terms })
    }

    /// Extends `values` through builtin applications, pairs and projections
    /// of classes that already have values.
    fn propagate_symbolic(&self, values: &mut BTreeMap<ClassId, Value>) {
        loop {
            let mut changed = false;
            for class in self.g.classes() {
                if values.contains_key(&class) {
                    continue;
                }
                for &n in self.g.nodes_of(class) {
                    let v = match self.g.node(n) {
                        ENode::App(_, a) => {
                            let op = self.g.op_name(n).expect("application node");
                            match (self.schema.builtins.op(op), values.get(&a)) {
                                (Some(_), Some(arg)) => {
                                    Some(self.schema.builtins.apply(op, arg).unwrap_or_else(|_| Value::Opaque {
                                        op: op.to_string(),
                                        arg: Box::new(arg.clone()),
                                    }))
                                }
                                _ => None,
                            }
                        }
                        ENode::Pair(a, b) => values
                            .get(&a)
                            .zip(values.get(&b))
                            .map(|(a, b)| Value::pair(a.clone(), b.clone())),
                        ENode::Proj1(a) => match values.get(&a) {
                            Some(Value::Pair(l, _)) => Some((**l).clone()),
                            _ => None,
                        },
                        ENode::Proj2(a) => match values.get(&a) {
                            Some(Value::Pair(_, r)) => Some((**r).clone()),
                            _ => None,
                        },
                        _ => None,
                    };
                    if let Some(v) = v {
                        values.insert(class, v);
                        changed = true;
                        break;
                    }
                }
            }
            if !changed {
                return;
            }
        }
    }
}

/// `x`, `x.f`, `x.f.g` for a generator under a chain of operations.
pub(crate) fn path_name(t: &Term) -> Option<String> {
    match t {
        Term::Var(v) => Some(v.clone()),
        Term::App(op, inner) => {
            let mut s = path_name(inner)?;
            s.push('.');
            s.push_str(op);
            Some(s)
        }
        _ => None,
    }
}

/// The free instance on `pres` modulo the schema's equations. Entity
/// elements are generated by closing the generators under foreign keys and
/// attributes; attribute positions with no determined value receive fresh
/// labelled nulls.
pub fn initial_model(schema: &FqlSchema, pres: &Presentation, fuel: u32) -> Result<Instance, ChaseError> {
    Ok(Chase::new(schema, pres)?.run(fuel)?.instance)
}
