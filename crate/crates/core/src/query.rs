//! `for x: E, ... where l = r and ... return t` comprehensions over
//! instances, evaluated by a filtered scan of all binding tuples.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::kernel::{infer_type, Context, Term, TypeError, TypeExpr};
use crate::nrc::{Env, NrcExpr, NrcType};
use crate::schema::instance::{eval_with, odometer};
use crate::schema::{FqlSchema, Instance, InstanceError, InstanceInterp};
use crate::value::{EvalError, Value};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Comprehension {
    /// `(variable, entity type)` in scan order
    pub bindings: Vec<(String, String)>,
    pub where_clauses: Vec<(Term, Term)>,
    pub ret: Term,
}

impl Comprehension {
    pub fn context(&self) -> Context {
        Context::from_bindings(
            self.bindings
                .iter()
                .map(|(v, t)| (v.clone(), TypeExpr::base(t.clone()))),
        )
    }

    /// The same query as a nested NRC expression. Each binding ranges over
    /// a set-typed variable named after its entity type.
    pub fn to_nrc(&self, result: &TypeExpr) -> NrcExpr {
        let mut body = NrcExpr::singleton((&self.ret).into());
        for (l, r) in self.where_clauses.iter().rev() {
            body = NrcExpr::if_then_else(
                NrcExpr::eq(l.into(), r.into()),
                body,
                NrcExpr::Empty(NrcType::from(result)),
            );
        }
        for (v, t) in self.bindings.iter().rev() {
            body = NrcExpr::for_in(v.clone(), NrcExpr::var(t.clone()), body);
        }
        body
    }
}

impl fmt::Display for Comprehension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("for ")?;
        for (i, (v, t)) in self.bindings.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}: {}", v, t)?;
        }
        for (i, (l, r)) in self.where_clauses.iter().enumerate() {
            f.write_str(if i == 0 { " where " } else { " and " })?;
            write!(f, "{} = {}", l, r)?;
        }
        write!(f, " return {}", self.ret)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("binding `{var}` ranges over `{ty}`, which is not an entity type")]
    NonEntityBinding { var: String, ty: String },
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error("where clause #{index} compares {lhs} with {rhs}")]
    ClauseMismatch { index: usize, lhs: TypeExpr, rhs: TypeExpr },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Invalid(#[from] InstanceError),
}

/// Checks bindings and clauses; returns the type of the returned term.
pub fn typecheck_query(s: &FqlSchema, q: &Comprehension) -> Result<TypeExpr, QueryError> {
    for (var, ty) in &q.bindings {
        if !s.is_entity(ty) {
            return Err(QueryError::NonEntityBinding {
                var: var.clone(),
                ty: ty.clone(),
            });
        }
    }
    let ctx = q.context();
    let sig = &s.theory.sig;
    for (index, (l, r)) in q.where_clauses.iter().enumerate() {
        let lhs = infer_type(sig, &ctx, l)?;
        let rhs = infer_type(sig, &ctx, r)?;
        if lhs != rhs {
            return Err(QueryError::ClauseMismatch { index, lhs, rhs });
        }
    }
    Ok(infer_type(sig, &ctx, &q.ret)?)
}

/// A where clause compared a labelled null with a different value; the
/// tuple was dropped.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NullComparison {
    pub clause: usize,
    pub env: Env,
    pub lhs: Value,
    pub rhs: Value,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct QueryResult {
    pub values: BTreeSet<Value>,
    /// every accepted tuple with the value it returned, in scan order
    pub witnesses: Vec<(Env, Value)>,
    pub warnings: Vec<NullComparison>,
}

pub fn eval_query(s: &FqlSchema, i: &Instance, q: &Comprehension) -> Result<QueryResult, QueryError> {
    typecheck_query(s, q)?;
    i.validate(s)?;
    let interp = InstanceInterp { schema: s, instance: i };
    let carriers: Vec<Vec<&str>> = q.bindings.iter().map(|(_, t)| i.carrier(t).collect()).collect();
    let mut out = QueryResult::default();
    'tuples: for pick in odometer(&carriers.iter().map(Vec::len).collect::<Vec<_>>()) {
        let env: Env = q
            .bindings
            .iter()
            .zip(&pick)
            .zip(&carriers)
            .map(|(((v, t), &k), rows)| (v.clone(), Value::row(t.clone(), rows[k])))
            .collect();
        for (clause, (l, r)) in q.where_clauses.iter().enumerate() {
            let lhs = eval_with(&interp, &env, l)?;
            let rhs = eval_with(&interp, &env, r)?;
            if lhs != rhs {
                if lhs.has_null() || rhs.has_null() {
                    out.warnings.push(NullComparison {
                        clause,
                        env: env.clone(),
                        lhs,
                        rhs,
                    });
                }
                continue 'tuples;
            }
        }
        let v = eval_with(&interp, &env, &q.ret)?;
        out.values.insert(v.clone());
        out.witnesses.push((env, v));
    }
    Ok(out)
}

/// Renders an environment as `x = e1, y = d2`.
pub fn render_env(env: &Env) -> String {
    env.iter()
        .map(|(k, v)| alloc::format!("{} = {}", k, v))
        .collect::<Vec<_>>()
        .join(", ")
}

impl QueryResult {
    pub fn rendered_values(&self) -> Vec<String> {
        self.values.iter().map(ToString::to_string).collect()
    }
}
