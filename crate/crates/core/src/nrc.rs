//! Nested relational calculus: the product calculus extended with `Bool`,
//! finite sets, comprehension, conditionals and equality tests, with a
//! big-step set-semantics evaluator.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::kernel::{Signature, Term, TypeExpr};
use crate::value::{Datum, EvalError, Interpretation, Value};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NrcType {
    Unit,
    Prod(Box<NrcType>, Box<NrcType>),
    Base(String),
    Bool,
    Set(Box<NrcType>),
}

impl NrcType {
    pub fn base(name: impl Into<String>) -> Self {
        NrcType::Base(name.into())
    }

    pub fn prod(a: NrcType, b: NrcType) -> Self {
        NrcType::Prod(Box::new(a), Box::new(b))
    }

    pub fn set(elem: NrcType) -> Self {
        NrcType::Set(Box::new(elem))
    }

    /// The product-calculus type, when there is no `Bool` or `Set` inside.
    pub fn to_ttp(&self) -> Option<TypeExpr> {
        Some(match self {
            NrcType::Unit => TypeExpr::Unit,
            NrcType::Prod(a, b) => TypeExpr::prod(a.to_ttp()?, b.to_ttp()?),
            NrcType::Base(n) => TypeExpr::Base(n.clone()),
            NrcType::Bool | NrcType::Set(_) => return None,
        })
    }

    fn base_names<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            NrcType::Unit | NrcType::Bool => {}
            NrcType::Prod(a, b) => {
                a.base_names(out);
                b.base_names(out);
            }
            NrcType::Base(n) => out.push(n),
            NrcType::Set(t) => t.base_names(out),
        }
    }
}

impl From<&TypeExpr> for NrcType {
    fn from(t: &TypeExpr) -> Self {
        match t {
            TypeExpr::Unit => NrcType::Unit,
            TypeExpr::Prod(a, b) => NrcType::prod((&**a).into(), (&**b).into()),
            TypeExpr::Base(n) => NrcType::Base(n.clone()),
        }
    }
}

impl fmt::Display for NrcType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NrcType::Unit => f.write_str("1"),
            NrcType::Base(n) => f.write_str(n),
            NrcType::Bool => f.write_str("Bool"),
            NrcType::Set(t) => match **t {
                NrcType::Prod(..) => write!(f, "Set ({})", t),
                _ => write!(f, "Set {}", t),
            },
            NrcType::Prod(a, b) => {
                if matches!(**a, NrcType::Prod(..)) {
                    write!(f, "({}) * {}", a, b)?;
                } else {
                    write!(f, "{} * {}", a, b)?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NrcExpr {
    Var(String),
    Unit,
    Pair(Box<NrcExpr>, Box<NrcExpr>),
    Proj1(Box<NrcExpr>),
    Proj2(Box<NrcExpr>),
    App(String, Box<NrcExpr>),
    /// `empty[T]`, the empty set of element type `T`.
    Empty(NrcType),
    Union(Box<NrcExpr>, Box<NrcExpr>),
    Singleton(Box<NrcExpr>),
    For {
        var: String,
        source: Box<NrcExpr>,
        body: Box<NrcExpr>,
    },
    If(Box<NrcExpr>, Box<NrcExpr>, Box<NrcExpr>),
    True,
    False,
    Eq(Box<NrcExpr>, Box<NrcExpr>),
    /// An integer or string constant of a registered attribute type.
    Lit(Datum),
}

impl From<&Term> for NrcExpr {
    fn from(t: &Term) -> Self {
        match t {
            Term::Var(v) => NrcExpr::var(v.clone()),
            Term::Unit => NrcExpr::Unit,
            Term::Pair(a, b) => NrcExpr::pair(a.as_ref().into(), b.as_ref().into()),
            Term::Proj1(a) => NrcExpr::proj1(a.as_ref().into()),
            Term::Proj2(a) => NrcExpr::proj2(a.as_ref().into()),
            Term::App(op, a) => NrcExpr::app(op.clone(), a.as_ref().into()),
        }
    }
}

impl NrcExpr {
    pub fn var(v: impl Into<String>) -> Self {
        NrcExpr::Var(v.into())
    }
    pub fn pair(a: NrcExpr, b: NrcExpr) -> Self {
        NrcExpr::Pair(Box::new(a), Box::new(b))
    }
    pub fn proj1(a: NrcExpr) -> Self {
        NrcExpr::Proj1(Box::new(a))
    }
    pub fn proj2(a: NrcExpr) -> Self {
        NrcExpr::Proj2(Box::new(a))
    }
    pub fn app(op: impl Into<String>, a: NrcExpr) -> Self {
        NrcExpr::App(op.into(), Box::new(a))
    }
    pub fn union(a: NrcExpr, b: NrcExpr) -> Self {
        NrcExpr::Union(Box::new(a), Box::new(b))
    }
    pub fn singleton(a: NrcExpr) -> Self {
        NrcExpr::Singleton(Box::new(a))
    }
    pub fn for_in(var: impl Into<String>, source: NrcExpr, body: NrcExpr) -> Self {
        NrcExpr::For {
            var: var.into(),
            source: Box::new(source),
            body: Box::new(body),
        }
    }
    pub fn if_then_else(c: NrcExpr, t: NrcExpr, e: NrcExpr) -> Self {
        NrcExpr::If(Box::new(c), Box::new(t), Box::new(e))
    }
    pub fn eq(a: NrcExpr, b: NrcExpr) -> Self {
        NrcExpr::Eq(Box::new(a), Box::new(b))
    }
    pub fn int(n: i64) -> Self {
        NrcExpr::Lit(Datum::Int(n))
    }
    pub fn str(s: impl Into<String>) -> Self {
        NrcExpr::Lit(Datum::Str(s.into()))
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            NrcExpr::Var(v) => {
                if !bound.contains(v) {
                    out.insert(v.clone());
                }
            }
            NrcExpr::Unit | NrcExpr::Empty(_) | NrcExpr::True | NrcExpr::False | NrcExpr::Lit(_) => {}
            NrcExpr::Pair(a, b) | NrcExpr::Union(a, b) | NrcExpr::Eq(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            NrcExpr::Proj1(a) | NrcExpr::Proj2(a) | NrcExpr::App(_, a) | NrcExpr::Singleton(a) => {
                a.collect_free(bound, out)
            }
            NrcExpr::For { var, source, body } => {
                source.collect_free(bound, out);
                bound.push(var.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
            NrcExpr::If(c, t, e) => {
                c.collect_free(bound, out);
                t.collect_free(bound, out);
                e.collect_free(bound, out);
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            NrcExpr::Var(_) | NrcExpr::Unit | NrcExpr::Empty(_) | NrcExpr::True | NrcExpr::False | NrcExpr::Lit(_) => 0,
            NrcExpr::Pair(a, b) | NrcExpr::Union(a, b) | NrcExpr::Eq(a, b) => 1 + a.depth().max(b.depth()),
            NrcExpr::Proj1(a) | NrcExpr::Proj2(a) | NrcExpr::App(_, a) | NrcExpr::Singleton(a) => 1 + a.depth(),
            NrcExpr::For { source, body, .. } => 1 + source.depth().max(body.depth()),
            NrcExpr::If(c, t, e) => 1 + c.depth().max(t.depth()).max(e.depth()),
        }
    }
}

/// Capture-avoiding substitution of `replacement` for free `var`.
pub fn nrc_substitute(e: &NrcExpr, var: &str, replacement: &NrcExpr) -> NrcExpr {
    let sub = |x: &NrcExpr| Box::new(nrc_substitute(x, var, replacement));
    match e {
        NrcExpr::Var(v) if v == var => replacement.clone(),
        NrcExpr::Var(_) | NrcExpr::Unit | NrcExpr::Empty(_) | NrcExpr::True | NrcExpr::False | NrcExpr::Lit(_) => {
            e.clone()
        }
        NrcExpr::Pair(a, b) => NrcExpr::Pair(sub(a), sub(b)),
        NrcExpr::Union(a, b) => NrcExpr::Union(sub(a), sub(b)),
        NrcExpr::Eq(a, b) => NrcExpr::Eq(sub(a), sub(b)),
        NrcExpr::Proj1(a) => NrcExpr::Proj1(sub(a)),
        NrcExpr::Proj2(a) => NrcExpr::Proj2(sub(a)),
        NrcExpr::App(op, a) => NrcExpr::App(op.clone(), sub(a)),
        NrcExpr::Singleton(a) => NrcExpr::Singleton(sub(a)),
        NrcExpr::If(c, t, f) => NrcExpr::If(sub(c), sub(t), sub(f)),
        NrcExpr::For {
            var: bound,
            source,
            body,
        } => {
            if bound == var {
                return NrcExpr::For {
                    var: bound.clone(),
                    source: sub(source),
                    body: body.clone(),
                };
            }
            let fv = replacement.free_vars();
            if fv.contains(bound) {
                let mut avoid = fv;
                avoid.extend(body.free_vars());
                avoid.insert(var.to_string());
                let mut n = 0;
                let fresh = loop {
                    let cand = format!("{}{}", bound, n);
                    if !avoid.contains(&cand) {
                        break cand;
                    }
                    n += 1;
                };
                let renamed = nrc_substitute(body, bound, &NrcExpr::Var(fresh.clone()));
                NrcExpr::For {
                    var: fresh,
                    source: sub(source),
                    body: Box::new(nrc_substitute(&renamed, var, replacement)),
                }
            } else {
                NrcExpr::For {
                    var: bound.clone(),
                    source: sub(source),
                    body: sub(body),
                }
            }
        }
    }
}

// binding strength for printing: 0 = for/if, 1 = union, 2 = equality, 3 = postfix/atom
fn level(e: &NrcExpr) -> u8 {
    match e {
        NrcExpr::For { .. } | NrcExpr::If(..) => 0,
        NrcExpr::Union(..) => 1,
        NrcExpr::Eq(..) => 2,
        NrcExpr::Lit(Datum::Int(n)) if *n < 0 => 2,
        _ => 3,
    }
}

struct Prec<'a>(&'a NrcExpr, u8);

impl fmt::Display for Prec<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if level(self.0) < self.1 {
            write!(f, "({})", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl fmt::Display for NrcExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NrcExpr::Var(v) => f.write_str(v),
            NrcExpr::Unit => f.write_str("()"),
            NrcExpr::Pair(a, b) => write!(f, "({}, {})", a, b),
            NrcExpr::Proj1(a) => write!(f, "{}.1", Prec(a, 3)),
            NrcExpr::Proj2(a) => write!(f, "{}.2", Prec(a, 3)),
            NrcExpr::App(op, a) => match &**a {
                NrcExpr::Unit => write!(f, "{}()", op),
                NrcExpr::Pair(x, y) => write!(f, "{}({}, {})", op, x, y),
                other => write!(f, "{}({})", op, other),
            },
            NrcExpr::Empty(t) => write!(f, "empty[{}]", t),
            NrcExpr::Union(a, b) => write!(f, "{} union {}", Prec(a, 1), Prec(b, 2)),
            NrcExpr::Singleton(a) => write!(f, "{{{}}}", a),
            NrcExpr::For { var, source, body } => {
                write!(f, "for {} in {} return {}", var, Prec(source, 1), body)
            }
            NrcExpr::If(c, t, e) => write!(f, "if {} then {} else {}", c, t, e),
            NrcExpr::True => f.write_str("true"),
            NrcExpr::False => f.write_str("false"),
            NrcExpr::Eq(a, b) => write!(f, "{} = {}", Prec(a, 3), Prec(b, 3)),
            NrcExpr::Lit(d) => write!(f, "{}", d),
        }
    }
}

/// Variable bindings over NRC types; rightmost binding wins.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NrcContext {
    bindings: Vec<(String, NrcType)>,
}

impl NrcContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn extend(&self, var: impl Into<String>, ty: NrcType) -> Self {
        let mut out = self.clone();
        out.bindings.push((var.into(), ty));
        out
    }

    pub fn lookup(&self, var: &str) -> Option<&NrcType> {
        self.bindings.iter().rev().find(|(n, _)| n == var).map(|(_, t)| t)
    }

    pub fn bindings(&self) -> &[(String, NrcType)] {
        &self.bindings
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NrcExpected {
    Type(NrcType),
    Product,
    Set,
    Bool,
}

impl fmt::Display for NrcExpected {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NrcExpected::Type(t) => write!(f, "{}", t),
            NrcExpected::Product => f.write_str("a product type"),
            NrcExpected::Set => f.write_str("a set type"),
            NrcExpected::Bool => f.write_str("Bool"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum NrcTypeError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("unknown operation `{0}`")]
    UnknownOperation(String),
    #[error("unknown base type `{0}`")]
    UnknownBaseType(String),
    #[error("type mismatch at `{at}`: expected {expected}, found {found}")]
    TypeMismatch {
        expected: NrcExpected,
        found: NrcType,
        at: NrcExpr,
    },
    #[error("`for` iterates over `{at}` of non-set type {found}")]
    NonSetIteration { found: NrcType, at: NrcExpr },
    #[error("`if` branches disagree: {then_ty} vs {else_ty}")]
    BranchTypeMismatch { then_ty: NrcType, else_ty: NrcType },
    #[error("`=` compares {lhs} with {rhs}")]
    EqTypeMismatch { lhs: NrcType, rhs: NrcType },
}

fn check_nrc_type(sig: &Signature, t: &NrcType) -> Result<(), NrcTypeError> {
    let mut names = Vec::new();
    t.base_names(&mut names);
    match names.into_iter().find(|n| !sig.has_base_type(n)) {
        Some(n) => Err(NrcTypeError::UnknownBaseType(n.to_string())),
        None => Ok(()),
    }
}

fn literal_type(d: &Datum) -> &'static str {
    match d {
        Datum::Int(_) => "Int",
        _ => "String",
    }
}

/// Types `e` by the product rules plus the set, boolean and comprehension
/// rules.
pub fn nrc_infer_type(sig: &Signature, ctx: &NrcContext, e: &NrcExpr) -> Result<NrcType, NrcTypeError> {
    let infer = |x: &NrcExpr| nrc_infer_type(sig, ctx, x);
    match e {
        NrcExpr::Var(v) => ctx
            .lookup(v)
            .cloned()
            .ok_or_else(|| NrcTypeError::UnboundVariable(v.clone())),
        NrcExpr::Unit => Ok(NrcType::Unit),
        NrcExpr::Pair(a, b) => Ok(NrcType::prod(infer(a)?, infer(b)?)),
        NrcExpr::Proj1(a) | NrcExpr::Proj2(a) => match infer(a)? {
            NrcType::Prod(l, r) => Ok(if matches!(e, NrcExpr::Proj1(_)) { *l } else { *r }),
            found => Err(NrcTypeError::TypeMismatch {
                expected: NrcExpected::Product,
                found,
                at: (**a).clone(),
            }),
        },
        NrcExpr::App(op, a) => {
            let op_sig = sig
                .operation(op)
                .ok_or_else(|| NrcTypeError::UnknownOperation(op.clone()))?;
            let found = infer(a)?;
            let dom = NrcType::from(&op_sig.dom);
            if found != dom {
                return Err(NrcTypeError::TypeMismatch {
                    expected: NrcExpected::Type(dom),
                    found,
                    at: (**a).clone(),
                });
            }
            Ok(NrcType::from(&op_sig.cod))
        }
        NrcExpr::Empty(t) => {
            check_nrc_type(sig, t)?;
            Ok(NrcType::set(t.clone()))
        }
        NrcExpr::Union(a, b) => {
            let ta = infer(a)?;
            if !matches!(ta, NrcType::Set(_)) {
                return Err(NrcTypeError::TypeMismatch {
                    expected: NrcExpected::Set,
                    found: ta,
                    at: (**a).clone(),
                });
            }
            let tb = infer(b)?;
            if ta != tb {
                return Err(NrcTypeError::TypeMismatch {
                    expected: NrcExpected::Type(ta),
                    found: tb,
                    at: (**b).clone(),
                });
            }
            Ok(ta)
        }
        NrcExpr::Singleton(a) => Ok(NrcType::set(infer(a)?)),
        NrcExpr::For { var, source, body } => {
            let elem = match infer(source)? {
                NrcType::Set(t) => *t,
                found => {
                    return Err(NrcTypeError::NonSetIteration {
                        found,
                        at: (**source).clone(),
                    })
                }
            };
            let inner = ctx.extend(var.clone(), elem);
            match nrc_infer_type(sig, &inner, body)? {
                t @ NrcType::Set(_) => Ok(t),
                found => Err(NrcTypeError::TypeMismatch {
                    expected: NrcExpected::Set,
                    found,
                    at: (**body).clone(),
                }),
            }
        }
        NrcExpr::If(c, t, f) => {
            let tc = infer(c)?;
            if tc != NrcType::Bool {
                return Err(NrcTypeError::TypeMismatch {
                    expected: NrcExpected::Bool,
                    found: tc,
                    at: (**c).clone(),
                });
            }
            let tt = infer(t)?;
            let tf = infer(f)?;
            if tt != tf {
                return Err(NrcTypeError::BranchTypeMismatch {
                    then_ty: tt,
                    else_ty: tf,
                });
            }
            Ok(tt)
        }
        NrcExpr::True | NrcExpr::False => Ok(NrcType::Bool),
        NrcExpr::Eq(a, b) => {
            let ta = infer(a)?;
            let tb = infer(b)?;
            if ta != tb {
                return Err(NrcTypeError::EqTypeMismatch { lhs: ta, rhs: tb });
            }
            Ok(NrcType::Bool)
        }
        NrcExpr::Lit(d) => {
            let ty = literal_type(d);
            if !sig.has_base_type(ty) {
                return Err(NrcTypeError::UnknownBaseType(ty.to_string()));
            }
            Ok(NrcType::base(ty))
        }
    }
}

pub type Env = BTreeMap<String, Value>;

fn stuck(what: &str, v: &Value) -> EvalError {
    EvalError::Stuck(format!("expected {}, got `{}`", what, v))
}

/// Big-step set semantics.
pub fn nrc_eval(env: &Env, e: &NrcExpr, interp: &dyn Interpretation) -> Result<Value, EvalError> {
    let eval = |x: &NrcExpr| nrc_eval(env, x, interp);
    match e {
        NrcExpr::Var(v) => env.get(v).cloned().ok_or_else(|| EvalError::UnboundVariable(v.clone())),
        NrcExpr::Unit => Ok(Value::Unit),
        NrcExpr::Pair(a, b) => Ok(Value::pair(eval(a)?, eval(b)?)),
        NrcExpr::Proj1(a) | NrcExpr::Proj2(a) => match eval(a)? {
            Value::Pair(l, r) => Ok(if matches!(e, NrcExpr::Proj1(_)) { *l } else { *r }),
            v => Err(stuck("a pair", &v)),
        },
        NrcExpr::App(op, a) => interp.apply(op, &eval(a)?),
        NrcExpr::Empty(_) => Ok(Value::Set(BTreeSet::new())),
        NrcExpr::Union(a, b) => match (eval(a)?, eval(b)?) {
            (Value::Set(mut x), Value::Set(y)) => {
                x.extend(y);
                Ok(Value::Set(x))
            }
            (v, Value::Set(_)) | (_, v) => Err(stuck("a set", &v)),
        },
        NrcExpr::Singleton(a) => Ok(Value::set([eval(a)?])),
        NrcExpr::For { var, source, body } => {
            let items = match eval(source)? {
                Value::Set(items) => items,
                v => return Err(stuck("a set", &v)),
            };
            let mut out = BTreeSet::new();
            let mut inner = env.clone();
            for item in items {
                inner.insert(var.clone(), item);
                match nrc_eval(&inner, body, interp)? {
                    Value::Set(part) => out.extend(part),
                    v => return Err(stuck("a set", &v)),
                }
            }
            Ok(Value::Set(out))
        }
        NrcExpr::If(c, t, f) => match eval(c)? {
            Value::Bool(true) => eval(t),
            Value::Bool(false) => eval(f),
            v => Err(stuck("a boolean", &v)),
        },
        NrcExpr::True => Ok(Value::Bool(true)),
        NrcExpr::False => Ok(Value::Bool(false)),
        NrcExpr::Eq(a, b) => Ok(Value::Bool(eval(a)? == eval(b)?)),
        NrcExpr::Lit(d) => Ok(Value::Base {
            ty: literal_type(d).to_string(),
            datum: d.clone(),
        }),
    }
}

/// An open query `input : input_type ⊢ body : result_type`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LibraryQuery {
    pub name: &'static str,
    pub input: &'static str,
    pub input_type: NrcType,
    pub body: NrcExpr,
    pub result_type: NrcType,
}

pub const LIBRARY_NAMES: [&str; 3] = ["project1", "product", "select-eq"];

/// The three textbook relational queries over element types `t1`, `t2`:
/// first-column projection, cartesian product of two unary relations, and
/// selection of rows whose columns agree. The selection only typechecks
/// when `t1 == t2`.
pub fn relational_library(t1: &NrcType, t2: &NrcType) -> Vec<LibraryQuery> {
    LIBRARY_NAMES.iter().filter_map(|n| library_query(n, t1, t2)).collect()
}

pub fn library_query(name: &str, t1: &NrcType, t2: &NrcType) -> Option<LibraryQuery> {
    let row = NrcType::prod(t1.clone(), t2.clone());
    let i = || NrcExpr::var("I");
    let x = || NrcExpr::var("x");
    Some(match name {
        "project1" => LibraryQuery {
            name: "project1",
            input: "I",
            input_type: NrcType::set(row),
            body: NrcExpr::for_in("x", i(), NrcExpr::singleton(NrcExpr::proj1(x()))),
            result_type: NrcType::set(t1.clone()),
        },
        "product" => LibraryQuery {
            name: "product",
            input: "I",
            input_type: NrcType::prod(NrcType::set(t1.clone()), NrcType::set(t2.clone())),
            body: NrcExpr::for_in(
                "x1",
                NrcExpr::proj1(i()),
                NrcExpr::for_in(
                    "x2",
                    NrcExpr::proj2(i()),
                    NrcExpr::singleton(NrcExpr::pair(NrcExpr::var("x1"), NrcExpr::var("x2"))),
                ),
            ),
            result_type: NrcType::set(row),
        },
        "select-eq" => LibraryQuery {
            name: "select-eq",
            input: "I",
            input_type: NrcType::set(row.clone()),
            body: NrcExpr::for_in(
                "x",
                i(),
                NrcExpr::if_then_else(
                    NrcExpr::eq(NrcExpr::proj1(x()), NrcExpr::proj2(x())),
                    NrcExpr::singleton(x()),
                    NrcExpr::Empty(row.clone()),
                ),
            ),
            result_type: NrcType::set(row),
        },
        _ => return None,
    })
}
