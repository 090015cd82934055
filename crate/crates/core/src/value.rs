//! Runtime values shared by the NRC evaluator, instances and migrations,
//! and the registration table of builtin attribute types and operations.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::kernel::{OpSig, TypeExpr};

/// The payload of a base-type value.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Datum {
    Int(i64),
    Str(String),
    /// A row identifier of an entity type.
    Row(String),
    /// A labelled null, equal only to itself.
    Null(u32),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Unit,
    Pair(Box<Value>, Box<Value>),
    Bool(bool),
    Base {
        ty: String,
        datum: Datum,
    },
    /// Elements are kept sorted and deduplicated.
    Set(BTreeSet<Value>),
    /// A builtin applied to an argument that contains a labelled null. It
    /// stays symbolic and compares structurally.
    Opaque {
        op: String,
        arg: Box<Value>,
    },
}

impl Value {
    pub fn int(n: i64) -> Self {
        Value::Base {
            ty: "Int".into(),
            datum: Datum::Int(n),
        }
    }

    pub fn str(s: impl Into<String>) -> Self {
        Value::Base {
            ty: "String".into(),
            datum: Datum::Str(s.into()),
        }
    }

    pub fn row(ty: impl Into<String>, id: impl Into<String>) -> Self {
        Value::Base {
            ty: ty.into(),
            datum: Datum::Row(id.into()),
        }
    }

    pub fn null(ty: impl Into<String>, n: u32) -> Self {
        Value::Base {
            ty: ty.into(),
            datum: Datum::Null(n),
        }
    }

    pub fn pair(a: Value, b: Value) -> Self {
        Value::Pair(Box::new(a), Box::new(b))
    }

    pub fn set(items: impl IntoIterator<Item = Value>) -> Self {
        Value::Set(items.into_iter().collect())
    }

    pub fn as_row(&self) -> Option<&str> {
        match self {
            Value::Base {
                datum: Datum::Row(id), ..
            } => Some(id),
            _ => None,
        }
    }

    pub fn as_set(&self) -> Option<&BTreeSet<Value>> {
        match self {
            Value::Set(s) => Some(s),
            _ => None,
        }
    }

    /// Contains a labelled null (possibly under a symbolic application).
    pub fn has_null(&self) -> bool {
        match self {
            Value::Unit | Value::Bool(_) => false,
            Value::Base { datum, .. } => matches!(datum, Datum::Null(_)),
            Value::Pair(a, b) => a.has_null() || b.has_null(),
            Value::Set(s) => s.iter().any(Value::has_null),
            Value::Opaque { .. } => true,
        }
    }

    /// Labelled nulls occurring in the value, in order.
    pub fn nulls(&self) -> Vec<(&str, u32)> {
        let mut out = Vec::new();
        self.collect_nulls(&mut out);
        out
    }

    fn collect_nulls<'a>(&'a self, out: &mut Vec<(&'a str, u32)>) {
        match self {
            Value::Base {
                ty,
                datum: Datum::Null(n),
            } => out.push((ty, *n)),
            Value::Pair(a, b) => {
                a.collect_nulls(out);
                b.collect_nulls(out);
            }
            Value::Set(s) => s.iter().for_each(|v| v.collect_nulls(out)),
            Value::Opaque { arg, .. } => arg.collect_nulls(out),
            _ => {}
        }
    }
}

fn write_escaped(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            c => write!(f, "{}", c)?,
        }
    }
    f.write_str("\"")
}

impl fmt::Display for Datum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Datum::Int(n) => write!(f, "{}", n),
            Datum::Str(s) => write_escaped(f, s),
            Datum::Row(id) => f.write_str(id),
            Datum::Null(n) => write!(f, "?{}", n),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Unit => f.write_str("()"),
            Value::Pair(a, b) => write!(f, "({}, {})", a, b),
            Value::Bool(true) => f.write_str("true"),
            Value::Bool(false) => f.write_str("false"),
            Value::Base { datum, .. } => write!(f, "{}", datum),
            Value::Set(items) => {
                if items.is_empty() {
                    return f.write_str("{}");
                }
                f.write_str("{")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}", v)?;
                }
                f.write_str("}")
            }
            Value::Opaque { op, arg } => match &**arg {
                Value::Pair(a, b) => write!(f, "{}({}, {})", op, a, b),
                other => write!(f, "{}({})", op, other),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("operation `{0}` has no registered semantics")]
    UninterpretedOperation(String),
    #[error("operation `{op}` is not defined on `{arg}`")]
    PartialFunction { op: String, arg: Value },
    #[error("ill-typed value during evaluation: {0}")]
    Stuck(String),
}

/// Semantics for operations, consulted by every evaluator.
pub trait Interpretation {
    fn apply(&self, op: &str, arg: &Value) -> Result<Value, EvalError>;
}

/// The kinds of fixed carriers an attribute type may have.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum AttrCarrier {
    Integers,
    Strings,
}

#[derive(Clone, Debug)]
pub struct BuiltinOp {
    pub sig: OpSig,
    pub eval: fn(&Value) -> Option<Value>,
}

/// Registration table for attribute types and builtin operations.
#[derive(Clone, Debug, Default)]
pub struct Builtins {
    types: BTreeMap<String, AttrCarrier>,
    ops: BTreeMap<String, BuiltinOp>,
}

fn as_str(v: &Value) -> Option<&str> {
    match v {
        Value::Base {
            datum: Datum::Str(s), ..
        } => Some(s),
        _ => None,
    }
}

fn as_int(v: &Value) -> Option<i64> {
    match v {
        Value::Base {
            datum: Datum::Int(n), ..
        } => Some(*n),
        _ => None,
    }
}

fn as_pair(v: &Value) -> Option<(&Value, &Value)> {
    match v {
        Value::Pair(a, b) => Some((a, b)),
        _ => None,
    }
}

impl Builtins {
    pub fn empty() -> Self {
        Self::default()
    }

    /// `Int` and `String`, with `length`, `reverse`, `concat`, `add`, `mul`
    /// and `neg`.
    pub fn standard() -> Self {
        let mut b = Builtins::empty();
        b.register_type("Int", AttrCarrier::Integers);
        b.register_type("String", AttrCarrier::Strings);
        let s = || TypeExpr::base("String");
        let i = || TypeExpr::base("Int");
        b.register_op("length", OpSig::new(s(), i()), |v| {
            as_str(v).map(|s| Value::int(s.chars().count() as i64))
        });
        b.register_op("reverse", OpSig::new(s(), s()), |v| {
            as_str(v).map(|s| Value::str(s.chars().rev().collect::<String>()))
        });
        b.register_op("concat", OpSig::new(TypeExpr::prod(s(), s()), s()), |v| {
            let (a, b) = as_pair(v)?;
            let mut out = as_str(a)?.to_string();
            out.push_str(as_str(b)?);
            Some(Value::str(out))
        });
        b.register_op("add", OpSig::new(TypeExpr::prod(i(), i()), i()), |v| {
            let (a, b) = as_pair(v)?;
            Some(Value::int(as_int(a)?.wrapping_add(as_int(b)?)))
        });
        b.register_op("mul", OpSig::new(TypeExpr::prod(i(), i()), i()), |v| {
            let (a, b) = as_pair(v)?;
            Some(Value::int(as_int(a)?.wrapping_mul(as_int(b)?)))
        });
        b.register_op("neg", OpSig::new(i(), i()), |v| {
            as_int(v).map(|n| Value::int(n.wrapping_neg()))
        });
        b
    }

    pub fn register_type(&mut self, name: impl Into<String>, carrier: AttrCarrier) {
        self.types.insert(name.into(), carrier);
    }

    pub fn register_op(&mut self, name: impl Into<String>, sig: OpSig, eval: fn(&Value) -> Option<Value>) {
        self.ops.insert(name.into(), BuiltinOp { sig, eval });
    }

    pub fn carrier(&self, ty: &str) -> Option<AttrCarrier> {
        self.types.get(ty).copied()
    }

    pub fn types(&self) -> impl Iterator<Item = (&str, AttrCarrier)> {
        self.types.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn op(&self, name: &str) -> Option<&BuiltinOp> {
        self.ops.get(name)
    }

    pub fn ops(&self) -> impl Iterator<Item = (&str, &BuiltinOp)> {
        self.ops.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Does `v` inhabit the attribute type `ty`? Nulls and symbolic values
    /// inhabit every attribute type they are tagged with.
    pub fn is_value_of(&self, ty: &str, v: &Value) -> bool {
        match (self.carrier(ty), v) {
            (
                Some(_),
                Value::Base {
                    ty: t,
                    datum: Datum::Null(_),
                },
            ) => t == ty,
            (Some(_), Value::Opaque { op, .. }) => self.op(op).is_some_and(|b| b.sig.cod == TypeExpr::base(ty)),
            (
                Some(AttrCarrier::Integers),
                Value::Base {
                    ty: t,
                    datum: Datum::Int(_),
                },
            ) => t == ty,
            (
                Some(AttrCarrier::Strings),
                Value::Base {
                    ty: t,
                    datum: Datum::Str(_),
                },
            ) => t == ty,
            _ => false,
        }
    }

    /// Builds a literal of the given attribute type from a parsed constant.
    pub fn literal(&self, ty: &str, datum: Datum) -> Option<Value> {
        let ok = matches!(
            (self.carrier(ty)?, &datum),
            (AttrCarrier::Integers, Datum::Int(_)) | (AttrCarrier::Strings, Datum::Str(_))
        );
        ok.then(|| Value::Base {
            ty: ty.to_string(),
            datum,
        })
    }
}

impl Interpretation for Builtins {
    fn apply(&self, op: &str, arg: &Value) -> Result<Value, EvalError> {
        let b = self
            .op(op)
            .ok_or_else(|| EvalError::UninterpretedOperation(op.to_string()))?;
        if arg.has_null() {
            return Ok(Value::Opaque {
                op: op.to_string(),
                arg: Box::new(arg.clone()),
            });
        }
        (b.eval)(arg).ok_or_else(|| EvalError::PartialFunction {
            op: op.to_string(),
            arg: arg.clone(),
        })
    }
}
