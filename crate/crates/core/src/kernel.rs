//! Type theory with products: types, terms, contexts, signatures and the
//! syntax-directed typing judgment.
//!
//! Terms contain no binders. Variables are bound only by a [`Context`], so
//! substitution is plain tree replacement.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

/// A type: `1`, a binary product, or a declared base type.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TypeExpr {
    Unit,
    Prod(Box<TypeExpr>, Box<TypeExpr>),
    Base(String),
}

impl TypeExpr {
    pub fn base(name: impl Into<String>) -> Self {
        TypeExpr::Base(name.into())
    }

    pub fn prod(left: TypeExpr, right: TypeExpr) -> Self {
        TypeExpr::Prod(Box::new(left), Box::new(right))
    }

    pub fn as_base(&self) -> Option<&str> {
        match self {
            TypeExpr::Base(name) => Some(name),
            _ => None,
        }
    }

    /// Every base type name mentioned, left to right.
    pub fn base_names(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_bases(&mut out);
        out
    }

    fn collect_bases<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            TypeExpr::Unit => {}
            TypeExpr::Prod(l, r) => {
                l.collect_bases(out);
                r.collect_bases(out);
            }
            TypeExpr::Base(name) => out.push(name),
        }
    }
}

impl fmt::Display for TypeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeExpr::Unit => f.write_str("1"),
            TypeExpr::Base(name) => f.write_str(name),
            // products associate to the right
            TypeExpr::Prod(l, r) => {
                if matches!(**l, TypeExpr::Prod(..)) {
                    write!(f, "({}) * {}", l, r)
                } else {
                    write!(f, "{} * {}", l, r)
                }
            }
        }
    }
}

/// A term of the product calculus.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Unit,
    Pair(Box<Term>, Box<Term>),
    Proj1(Box<Term>),
    Proj2(Box<Term>),
    App(String, Box<Term>),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn pair(fst: Term, snd: Term) -> Self {
        Term::Pair(Box::new(fst), Box::new(snd))
    }

    pub fn proj1(of: Term) -> Self {
        Term::Proj1(Box::new(of))
    }

    pub fn proj2(of: Term) -> Self {
        Term::Proj2(Box::new(of))
    }

    pub fn app(op: impl Into<String>, arg: Term) -> Self {
        Term::App(op.into(), Box::new(arg))
    }

    /// Apply a chain of unary operations, innermost first:
    /// `Term::path("e", ["manager", "worksIn"])` is `worksIn(manager(e))`.
    pub fn path<'a>(var: &str, ops: impl IntoIterator<Item = &'a str>) -> Self {
        ops.into_iter().fold(Term::var(var), |acc, op| Term::app(op, acc))
    }

    pub fn size(&self) -> usize {
        match self {
            Term::Var(_) | Term::Unit => 1,
            Term::Pair(a, b) => 1 + a.size() + b.size(),
            Term::Proj1(a) | Term::Proj2(a) | Term::App(_, a) => 1 + a.size(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Term::Var(_) | Term::Unit => 0,
            Term::Pair(a, b) => 1 + a.depth().max(b.depth()),
            Term::Proj1(a) | Term::Proj2(a) | Term::App(_, a) => 1 + a.depth(),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Term::Var(v) => {
                out.insert(v);
            }
            Term::Unit => {}
            Term::Pair(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Term::Proj1(a) | Term::Proj2(a) | Term::App(_, a) => a.collect_vars(out),
        }
    }

    /// Operation names applied anywhere in the term.
    pub fn operations(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_ops(&mut out);
        out
    }

    fn collect_ops<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Term::Var(_) | Term::Unit => {}
            Term::Pair(a, b) => {
                a.collect_ops(out);
                b.collect_ops(out);
            }
            Term::Proj1(a) | Term::Proj2(a) => a.collect_ops(out),
            Term::App(op, a) => {
                out.insert(op);
                a.collect_ops(out);
            }
        }
    }

    /// Immediate subterms, in order.
    pub fn children(&self) -> Vec<&Term> {
        match self {
            Term::Var(_) | Term::Unit => Vec::new(),
            Term::Pair(a, b) => alloc::vec![&**a, &**b],
            Term::Proj1(a) | Term::Proj2(a) | Term::App(_, a) => alloc::vec![&**a],
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Unit => f.write_str("()"),
            Term::Pair(a, b) => write!(f, "({}, {})", a, b),
            Term::Proj1(a) => write!(f, "{}.1", a),
            Term::Proj2(a) => write!(f, "{}.2", a),
            Term::App(op, arg) => match &**arg {
                Term::Unit => write!(f, "{}()", op),
                Term::Pair(a, b) => write!(f, "{}({}, {})", op, a, b),
                other => write!(f, "{}({})", op, other),
            },
        }
    }
}

/// Replace every occurrence of `var` in `e` with `replacement`.
pub fn substitute(e: &Term, var: &str, replacement: &Term) -> Term {
    match e {
        Term::Var(v) if v == var => replacement.clone(),
        Term::Var(_) | Term::Unit => e.clone(),
        Term::Pair(a, b) => Term::pair(substitute(a, var, replacement), substitute(b, var, replacement)),
        Term::Proj1(a) => Term::proj1(substitute(a, var, replacement)),
        Term::Proj2(a) => Term::proj2(substitute(a, var, replacement)),
        Term::App(op, a) => Term::App(op.clone(), Box::new(substitute(a, var, replacement))),
    }
}

/// Simultaneous substitution. Variables missing from `assignment` are kept.
pub fn substitute_all(e: &Term, assignment: &BTreeMap<String, Term>) -> Term {
    match e {
        Term::Var(v) => assignment.get(v).cloned().unwrap_or_else(|| e.clone()),
        Term::Unit => Term::Unit,
        Term::Pair(a, b) => Term::pair(substitute_all(a, assignment), substitute_all(b, assignment)),
        Term::Proj1(a) => Term::proj1(substitute_all(a, assignment)),
        Term::Proj2(a) => Term::proj2(substitute_all(a, assignment)),
        Term::App(op, a) => Term::App(op.clone(), Box::new(substitute_all(a, assignment))),
    }
}

/// An ordered list of variable bindings. Lookup resolves to the rightmost
/// binding of a name.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Context {
    bindings: Vec<(String, TypeExpr)>,
}

impl Context {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_bindings(bindings: impl IntoIterator<Item = (String, TypeExpr)>) -> Self {
        Context {
            bindings: bindings.into_iter().collect(),
        }
    }

    pub fn single(var: impl Into<String>, ty: TypeExpr) -> Self {
        Context {
            bindings: alloc::vec![(var.into(), ty)],
        }
    }

    /// `self, var : ty`
    pub fn extend(&self, var: impl Into<String>, ty: TypeExpr) -> Self {
        let mut out = self.clone();
        out.push(var, ty);
        out
    }

    pub fn push(&mut self, var: impl Into<String>, ty: TypeExpr) {
        self.bindings.push((var.into(), ty));
    }

    pub fn lookup(&self, var: &str) -> Option<&TypeExpr> {
        self.bindings
            .iter()
            .rev()
            .find(|(name, _)| name == var)
            .map(|(_, ty)| ty)
    }

    pub fn bindings(&self) -> &[(String, TypeExpr)] {
        &self.bindings
    }

    /// The visible bindings: for shadowed names only the rightmost one, in
    /// order of their last occurrence.
    pub fn visible(&self) -> Vec<(&str, &TypeExpr)> {
        let mut seen = BTreeSet::new();
        let mut out: Vec<_> = self
            .bindings
            .iter()
            .rev()
            .filter(|(name, _)| seen.insert(name.as_str()))
            .map(|(name, ty)| (name.as_str(), ty))
            .collect();
        out.reverse();
        out
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (name, ty)) in self.bindings.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}:{}", name, ty)?;
        }
        Ok(())
    }
}

/// Domain and codomain of a unary operation.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OpSig {
    pub dom: TypeExpr,
    pub cod: TypeExpr,
}

impl OpSig {
    pub fn new(dom: TypeExpr, cod: TypeExpr) -> Self {
        OpSig { dom, cod }
    }
}

/// Base types plus typed unary operations.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    base_types: BTreeSet<String>,
    operations: BTreeMap<String, OpSig>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_base_type(&mut self, name: impl Into<String>) -> &mut Self {
        self.base_types.insert(name.into());
        self
    }

    /// Declares an operation after checking that its domain and codomain only
    /// mention declared base types. Redeclaration replaces.
    pub fn add_operation(
        &mut self,
        name: impl Into<String>,
        dom: TypeExpr,
        cod: TypeExpr,
    ) -> Result<&mut Self, TypeError> {
        self.check_type(&dom)?;
        self.check_type(&cod)?;
        self.operations.insert(name.into(), OpSig { dom, cod });
        Ok(self)
    }

    pub fn base_types(&self) -> &BTreeSet<String> {
        &self.base_types
    }

    pub fn operations(&self) -> &BTreeMap<String, OpSig> {
        &self.operations
    }

    pub fn has_base_type(&self, name: &str) -> bool {
        self.base_types.contains(name)
    }

    pub fn operation(&self, name: &str) -> Option<&OpSig> {
        self.operations.get(name)
    }

    pub fn check_type(&self, ty: &TypeExpr) -> Result<(), TypeError> {
        match ty.base_names().into_iter().find(|b| !self.has_base_type(b)) {
            Some(missing) => Err(TypeError::UnknownBaseType(missing.to_string())),
            None => Ok(()),
        }
    }
}

/// What a subterm was required to be when typing failed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expected {
    Type(TypeExpr),
    Product,
}

impl fmt::Display for Expected {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expected::Type(t) => write!(f, "{}", t),
            Expected::Product => f.write_str("a product type"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("unknown operation `{0}`")]
    UnknownOperation(String),
    #[error("unknown base type `{0}`")]
    UnknownBaseType(String),
    #[error("type mismatch at `{at}`: expected {expected}, found {found}")]
    TypeMismatch {
        expected: Expected,
        found: TypeExpr,
        at: Term,
    },
}

/// Every bound type must mention only declared base types.
pub fn check_context(sig: &Signature, ctx: &Context) -> Result<(), TypeError> {
    ctx.bindings().iter().try_for_each(|(_, ty)| sig.check_type(ty))
}

/// The unique type of `e` in `ctx`, by the syntax-directed product rules.
pub fn infer_type(sig: &Signature, ctx: &Context, e: &Term) -> Result<TypeExpr, TypeError> {
    match e {
        Term::Var(v) => ctx
            .lookup(v)
            .cloned()
            .ok_or_else(|| TypeError::UnboundVariable(v.clone())),
        Term::Unit => Ok(TypeExpr::Unit),
        Term::Pair(a, b) => Ok(TypeExpr::prod(infer_type(sig, ctx, a)?, infer_type(sig, ctx, b)?)),
        Term::Proj1(a) | Term::Proj2(a) => match infer_type(sig, ctx, a)? {
            TypeExpr::Prod(l, r) => Ok(if matches!(e, Term::Proj1(_)) { *l } else { *r }),
            found => Err(TypeError::TypeMismatch {
                expected: Expected::Product,
                found,
                at: (**a).clone(),
            }),
        },
        Term::App(op, arg) => {
            let op_sig = sig
                .operation(op)
                .ok_or_else(|| TypeError::UnknownOperation(op.clone()))?;
            let found = infer_type(sig, ctx, arg)?;
            if found != op_sig.dom {
                return Err(TypeError::TypeMismatch {
                    expected: Expected::Type(op_sig.dom.clone()),
                    found,
                    at: (**arg).clone(),
                });
            }
            Ok(op_sig.cod.clone())
        }
    }
}
