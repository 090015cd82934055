//! Schemas as equational theories whose base types are split into entity
//! types (finite carriers) and attribute types (fixed builtin carriers),
//! together with instances, satisfaction checking, free models and
//! isomorphism testing.

mod chase;
pub(crate) mod instance;
mod iso;

pub use chase::{initial_model, ChaseError, Generator, Presentation};
pub(crate) use chase::{Chase, Saturated};
pub use instance::{
    check_instance, EquationStatus, Instance, InstanceError, InstanceInterp, SampleConfig, SatisfactionReport,
};
pub use iso::{instance_equal_upto_iso, Isomorphism};

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::equality::{check_theory, IllTyped, Theory};
use crate::kernel::{OpSig, TypeExpr};
use crate::value::Builtins;

/// How an operation sits relative to the entity/attribute split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum OpKind {
    /// entity → entity
    ForeignKey,
    /// entity → attribute type
    Attribute,
    /// attribute types only; semantics come from the builtin table
    Builtin,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("base type `{0}` is declared both as entity and as attribute")]
    OverlappingKinds(String),
    #[error("base type `{0}` is neither an entity nor an attribute type")]
    Unclassified(String),
    #[error("attribute type `{0}` has no registered builtin carrier")]
    UnknownAttributeType(String),
    #[error("operation `{0}` maps an attribute type to an entity type")]
    AttributeToEntity(String),
    #[error("operation `{op}` : {dom} -> {cod} mixes entities into a product")]
    UnsupportedOperation { op: String, dom: TypeExpr, cod: TypeExpr },
    #[error("builtin operation `{0}` has no registered semantics")]
    UnregisteredBuiltin(String),
    #[error("builtin operation `{op}` is registered as {registered_dom} -> {registered_cod}")]
    BuiltinSignature {
        op: String,
        registered_dom: TypeExpr,
        registered_cod: TypeExpr,
    },
    #[error("ill-typed equations: {}", .0.iter().map(|(i, e)| alloc::format!("#{}: {}", i, e)).collect::<Vec<_>>().join("; "))]
    Theory(Vec<(usize, IllTyped)>),
}

#[derive(Clone, Debug)]
pub struct FqlSchema {
    pub theory: Theory,
    pub entities: BTreeSet<String>,
    pub attributes: BTreeSet<String>,
    /// Semantics of the attribute types and builtin operations.
    pub builtins: Builtins,
}

impl PartialEq for FqlSchema {
    fn eq(&self, other: &Self) -> bool {
        self.theory == other.theory && self.entities == other.entities && self.attributes == other.attributes
    }
}

impl Eq for FqlSchema {}

impl FqlSchema {
    /// Validates the partition, the operation shapes, builtin registration
    /// and every equation.
    pub fn new(
        theory: Theory,
        entities: BTreeSet<String>,
        attributes: BTreeSet<String>,
        builtins: &Builtins,
    ) -> Result<Self, SchemaError> {
        if let Some(t) = entities.intersection(&attributes).next() {
            return Err(SchemaError::OverlappingKinds(t.clone()));
        }
        for t in theory.sig.base_types() {
            if !entities.contains(t) && !attributes.contains(t) {
                return Err(SchemaError::Unclassified(t.clone()));
            }
        }
        for t in entities.iter().chain(&attributes) {
            if !theory.sig.has_base_type(t) {
                return Err(SchemaError::Unclassified(t.clone()));
            }
        }
        if let Some(a) = attributes.iter().find(|a| builtins.carrier(a).is_none()) {
            return Err(SchemaError::UnknownAttributeType(a.clone()));
        }
        let schema = FqlSchema {
            theory,
            entities,
            attributes,
            builtins: builtins.clone(),
        };
        for (name, sig) in schema.theory.sig.operations() {
            schema.classify(name, sig, builtins)?;
        }
        check_theory(&schema.theory).map_err(SchemaError::Theory)?;
        Ok(schema)
    }

    fn mentions_entity(&self, t: &TypeExpr) -> bool {
        t.base_names().iter().any(|b| self.entities.contains(*b))
    }

    fn classify(&self, name: &str, sig: &OpSig, builtins: &Builtins) -> Result<OpKind, SchemaError> {
        let dom_entity = self.mentions_entity(&sig.dom);
        let cod_entity = self.mentions_entity(&sig.cod);
        let unsupported = || SchemaError::UnsupportedOperation {
            op: name.to_string(),
            dom: sig.dom.clone(),
            cod: sig.cod.clone(),
        };
        match (dom_entity, cod_entity) {
            (false, true) => Err(SchemaError::AttributeToEntity(name.to_string())),
            (true, _) => {
                let dom = sig.dom.as_base().ok_or_else(unsupported)?;
                let cod = sig.cod.as_base().ok_or_else(unsupported)?;
                debug_assert!(self.entities.contains(dom));
                Ok(if self.entities.contains(cod) {
                    OpKind::ForeignKey
                } else {
                    OpKind::Attribute
                })
            }
            (false, false) => {
                let b = builtins
                    .op(name)
                    .ok_or_else(|| SchemaError::UnregisteredBuiltin(name.to_string()))?;
                if &b.sig != sig {
                    return Err(SchemaError::BuiltinSignature {
                        op: name.to_string(),
                        registered_dom: b.sig.dom.clone(),
                        registered_cod: b.sig.cod.clone(),
                    });
                }
                Ok(OpKind::Builtin)
            }
        }
    }

    pub fn op_kind(&self, op: &str) -> Option<OpKind> {
        let sig = self.theory.sig.operation(op)?;
        let dom = sig.dom.as_base().filter(|d| self.entities.contains(*d));
        let cod_entity = sig.cod.as_base().is_some_and(|c| self.entities.contains(c));
        Some(match (dom, cod_entity) {
            (Some(_), true) => OpKind::ForeignKey,
            (Some(_), false) => OpKind::Attribute,
            (None, _) => OpKind::Builtin,
        })
    }

    pub fn is_entity(&self, ty: &str) -> bool {
        self.entities.contains(ty)
    }

    pub fn is_attribute(&self, ty: &str) -> bool {
        self.attributes.contains(ty)
    }

    /// `(name, domain entity, codomain base type)` of every foreign key and
    /// attribute, in name order.
    pub fn columns(&self) -> Vec<(&str, &str, &str)> {
        self.theory
            .sig
            .operations()
            .iter()
            .filter_map(|(name, sig)| {
                let dom = sig.dom.as_base().filter(|d| self.entities.contains(*d))?;
                Some((name.as_str(), dom, sig.cod.as_base()?))
            })
            .collect()
    }

    pub fn foreign_keys(&self) -> Vec<(&str, &str, &str)> {
        self.columns()
            .into_iter()
            .filter(|(_, _, cod)| self.entities.contains(*cod))
            .collect()
    }

    pub fn attribute_ops(&self) -> Vec<(&str, &str, &str)> {
        self.columns()
            .into_iter()
            .filter(|(_, _, cod)| !self.entities.contains(*cod))
            .collect()
    }

    /// Columns whose domain is `entity`.
    pub fn columns_from(&self, entity: &str) -> Vec<(&str, &str)> {
        self.columns()
            .into_iter()
            .filter(|(_, dom, _)| *dom == entity)
            .map(|(name, _, cod)| (name, cod))
            .collect()
    }

    pub fn builtin_ops(&self) -> Vec<&str> {
        self.theory
            .sig
            .operations()
            .keys()
            .filter(|op| self.op_kind(op) == Some(OpKind::Builtin))
            .map(String::as_str)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::kernel::Signature;

    #[test]
    fn company_classification() {
        let s = fixtures::company_schema();
        assert_eq!(s.op_kind("manager"), Some(OpKind::ForeignKey));
        assert_eq!(s.op_kind("worksIn"), Some(OpKind::ForeignKey));
        assert_eq!(s.op_kind("ename"), Some(OpKind::Attribute));
        assert_eq!(s.op_kind("reverse"), Some(OpKind::Builtin));
        assert_eq!(s.op_kind("length"), Some(OpKind::Builtin));
        assert_eq!(s.builtin_ops(), ["length", "reverse"]);
        assert_eq!(s.attribute_ops(), [("ename", "Emp", "String")]);
    }

    #[test]
    fn rejects_attribute_to_entity() {
        let mut sig = Signature::new();
        sig.add_base_type("A").add_base_type("String");
        sig.add_operation("bad", TypeExpr::base("String"), TypeExpr::base("A"))
            .unwrap();
        let err = FqlSchema::new(
            Theory::new(sig),
            ["A".into()].into(),
            ["String".into()].into(),
            &Builtins::standard(),
        )
        .unwrap_err();
        assert_eq!(err, SchemaError::AttributeToEntity("bad".into()));
    }

    #[test]
    fn rejects_bad_partitions_and_builtins() {
        let b = Builtins::standard();
        let mut sig = Signature::new();
        sig.add_base_type("A").add_base_type("Float");
        assert!(matches!(
            FqlSchema::new(Theory::new(sig.clone()), ["A".into()].into(), BTreeSet::new(), &b),
            Err(SchemaError::Unclassified(_))
        ));
        assert!(matches!(
            FqlSchema::new(Theory::new(sig), ["A".into()].into(), ["Float".into()].into(), &b),
            Err(SchemaError::UnknownAttributeType(_))
        ));
        let mut sig = Signature::new();
        sig.add_base_type("String");
        sig.add_operation("shout", TypeExpr::base("String"), TypeExpr::base("String"))
            .unwrap();
        assert!(matches!(
            FqlSchema::new(Theory::new(sig), BTreeSet::new(), ["String".into()].into(), &b),
            Err(SchemaError::UnregisteredBuiltin(_))
        ));
    }

    #[test]
    fn empty_schema_is_valid() {
        assert!(FqlSchema::new(
            Theory::default(),
            BTreeSet::new(),
            BTreeSet::new(),
            &Builtins::standard()
        )
        .is_ok());
    }
}
