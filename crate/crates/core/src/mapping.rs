//! Schema mappings: base types to base types and operations to open terms,
//! with fuel-bounded checking that the source equations still hold.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::equality::{decide_equal, EqualityError, Verdict};
use crate::kernel::{infer_type, substitute, Context, Term, TypeError, TypeExpr};
use crate::schema::{FqlSchema, OpKind};

/// The image `var => body` of one operation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpImage {
    pub var: String,
    pub body: Term,
}

impl OpImage {
    pub fn new(var: impl Into<String>, body: Term) -> Self {
        OpImage { var: var.into(), body }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum MappingError {
    #[error("entity type `{0}` has no image")]
    UnmappedType(String),
    #[error("`{from}` is mapped to `{to}`, which is not an entity type of the target")]
    NotAnEntity { from: String, to: String },
    #[error("`{0}` is not an entity type of the source")]
    UnknownSourceType(String),
    #[error("attribute type `{0}` is missing from the target")]
    MissingAttributeType(String),
    #[error("operation `{0}` has no image")]
    UnmappedOperation(String),
    #[error("`{0}` is not an operation of the source")]
    UnknownSourceOperation(String),
    #[error("builtin `{0}` differs between source and target")]
    BuiltinMismatch(String),
    #[error("image of `{op}` is ill-typed: {error}")]
    IllTypedImage { op: String, error: TypeError },
    #[error("image of `{op}` has type {found}, expected {expected}")]
    ImageType {
        op: String,
        expected: TypeExpr,
        found: TypeExpr,
    },
    #[error("unknown base type `{0}`")]
    UnknownBaseType(String),
    #[error("unknown operation `{0}`")]
    UnknownOperation(String),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error("translated term has type {found}, expected {expected}")]
    Preservation { expected: TypeExpr, found: TypeExpr },
}

/// A functor between schemas: entity types go to entity types, attribute
/// types and builtins are fixed, and each foreign key or attribute goes to
/// a one-variable target term.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SchemaMapping {
    pub source: FqlSchema,
    pub target: FqlSchema,
    pub type_map: BTreeMap<String, String>,
    pub op_map: BTreeMap<String, OpImage>,
}

impl SchemaMapping {
    pub fn new(
        source: FqlSchema,
        target: FqlSchema,
        type_map: BTreeMap<String, String>,
        op_map: BTreeMap<String, OpImage>,
    ) -> Result<Self, MappingError> {
        for (from, to) in &type_map {
            if !source.is_entity(from) {
                return Err(MappingError::UnknownSourceType(from.clone()));
            }
            if !target.is_entity(to) {
                return Err(MappingError::NotAnEntity {
                    from: from.clone(),
                    to: to.clone(),
                });
            }
        }
        if let Some(e) = source.entities.iter().find(|e| !type_map.contains_key(*e)) {
            return Err(MappingError::UnmappedType(e.clone()));
        }
        if let Some(a) = source.attributes.iter().find(|a| !target.is_attribute(a)) {
            return Err(MappingError::MissingAttributeType(a.clone()));
        }
        if let Some(op) = op_map.keys().find(|op| source.theory.sig.operation(op).is_none()) {
            return Err(MappingError::UnknownSourceOperation(op.clone()));
        }
        for op in source.builtin_ops() {
            if !op_map.contains_key(op) && target.theory.sig.operation(op) != source.theory.sig.operation(op) {
                return Err(MappingError::BuiltinMismatch(op.to_string()));
            }
        }
        let m = SchemaMapping {
            source,
            target,
            type_map,
            op_map,
        };
        for (op, sig) in m.source.theory.sig.operations() {
            let Some(image) = m.op_map.get(op) else {
                if m.source.op_kind(op) == Some(OpKind::Builtin) {
                    continue;
                }
                return Err(MappingError::UnmappedOperation(op.clone()));
            };
            let dom = m.apply_to_type(&sig.dom)?;
            let expected = m.apply_to_type(&sig.cod)?;
            let ctx = Context::single(image.var.clone(), dom);
            let found = infer_type(&m.target.theory.sig, &ctx, &image.body)
                .map_err(|error| MappingError::IllTypedImage { op: op.clone(), error })?;
            if found != expected {
                return Err(MappingError::ImageType {
                    op: op.clone(),
                    expected,
                    found,
                });
            }
        }
        Ok(m)
    }

    /// The identity mapping on `schema`.
    pub fn identity(schema: &FqlSchema) -> Self {
        let type_map = schema.entities.iter().map(|e| (e.clone(), e.clone())).collect();
        let op_map = schema
            .columns()
            .into_iter()
            .map(|(op, _, _)| (op.to_string(), OpImage::new("x", Term::app(op, Term::var("x")))))
            .collect();
        SchemaMapping {
            source: schema.clone(),
            target: schema.clone(),
            type_map,
            op_map,
        }
    }

    pub fn apply_to_type(&self, t: &TypeExpr) -> Result<TypeExpr, MappingError> {
        Ok(match t {
            TypeExpr::Unit => TypeExpr::Unit,
            TypeExpr::Prod(a, b) => TypeExpr::prod(self.apply_to_type(a)?, self.apply_to_type(b)?),
            TypeExpr::Base(name) => {
                if let Some(to) = self.type_map.get(name) {
                    TypeExpr::base(to.clone())
                } else if self.source.is_attribute(name) {
                    t.clone()
                } else {
                    return Err(MappingError::UnknownBaseType(name.clone()));
                }
            }
        })
    }

    pub fn apply_to_context(&self, ctx: &Context) -> Result<Context, MappingError> {
        let bindings = ctx
            .bindings()
            .iter()
            .map(|(v, t)| Ok((v.clone(), self.apply_to_type(t)?)))
            .collect::<Result<Vec<_>, MappingError>>()?;
        Ok(Context::from_bindings(bindings))
    }

    /// Translates a term without typing it.
    pub fn translate(&self, e: &Term) -> Result<Term, MappingError> {
        Ok(match e {
            Term::Var(_) | Term::Unit => e.clone(),
            Term::Pair(a, b) => Term::pair(self.translate(a)?, self.translate(b)?),
            Term::Proj1(a) => Term::proj1(self.translate(a)?),
            Term::Proj2(a) => Term::proj2(self.translate(a)?),
            Term::App(op, a) => {
                let arg = self.translate(a)?;
                match self.op_map.get(op) {
                    Some(image) => substitute(&image.body, &image.var, &arg),
                    None if self.source.op_kind(op) == Some(OpKind::Builtin) => Term::app(op.clone(), arg),
                    None => return Err(MappingError::UnknownOperation(op.clone())),
                }
            }
        })
    }

    /// Translates `e` and checks that the result has the translated type
    /// in the translated context.
    pub fn apply_to_term(&self, ctx: &Context, e: &Term) -> Result<Term, MappingError> {
        let ty = infer_type(&self.source.theory.sig, ctx, e)?;
        let out = self.translate(e)?;
        let expected = self.apply_to_type(&ty)?;
        let found = infer_type(&self.target.theory.sig, &self.apply_to_context(ctx)?, &out)?;
        if found != expected {
            return Err(MappingError::Preservation { expected, found });
        }
        Ok(out)
    }

    /// One verdict per source equation, proving its translation in the
    /// target theory.
    pub fn check_preservation(&self, fuel: u32) -> Result<Vec<Verdict>, PreservationError> {
        self.source
            .theory
            .equations
            .iter()
            .map(|eq| {
                let ctx = self.apply_to_context(&eq.ctx)?;
                let l = self.apply_to_term(&eq.ctx, &eq.lhs)?;
                let r = self.apply_to_term(&eq.ctx, &eq.rhs)?;
                Ok(decide_equal(&self.target.theory, &ctx, &l, &r, fuel)?)
            })
            .collect()
    }

    /// `other ∘ self`: first this mapping, then `other`.
    pub fn then(&self, other: &SchemaMapping) -> Result<SchemaMapping, MappingError> {
        let type_map = self
            .type_map
            .iter()
            .map(|(from, mid)| {
                let to = other
                    .type_map
                    .get(mid)
                    .ok_or_else(|| MappingError::UnmappedType(mid.clone()))?;
                Ok((from.clone(), to.clone()))
            })
            .collect::<Result<_, MappingError>>()?;
        let op_map = self
            .op_map
            .iter()
            .map(|(op, image)| {
                Ok((
                    op.clone(),
                    OpImage::new(image.var.clone(), other.translate(&image.body)?),
                ))
            })
            .collect::<Result<_, MappingError>>()?;
        SchemaMapping::new(self.source.clone(), other.target.clone(), type_map, op_map)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum PreservationError {
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Equality(#[from] EqualityError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equality::{Equation, Theory};
    use crate::fixtures;
    use crate::kernel::Signature;
    use crate::value::Builtins;
    use alloc::collections::BTreeSet;

    fn names(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|x| x.to_string()).collect()
    }

    /// Person/Unit with `boss`, `dept` and `name`; optionally `boss` is
    /// the identity.
    fn person_schema(boss_is_identity: bool) -> FqlSchema {
        let b = TypeExpr::base;
        let mut sig = Signature::new();
        sig.add_base_type("Person")
            .add_base_type("Team")
            .add_base_type("String")
            .add_base_type("Int");
        sig.add_operation("boss", b("Person"), b("Person")).unwrap();
        sig.add_operation("dept", b("Person"), b("Team")).unwrap();
        sig.add_operation("name", b("Person"), b("String")).unwrap();
        sig.add_operation("length", b("String"), b("Int")).unwrap();
        sig.add_operation("reverse", b("String"), b("String")).unwrap();
        let mut th = Theory::new(sig);
        let s = Context::single("x", b("String"));
        th.equations.push(Equation::new(
            s.clone(),
            Term::path("x", ["length"]),
            Term::path("x", ["reverse", "length"]),
        ));
        th.equations.push(Equation::new(
            s,
            Term::var("x"),
            Term::path("x", ["reverse", "reverse"]),
        ));
        if boss_is_identity {
            th.equations.push(Equation::new(
                Context::single("y", b("Person")),
                Term::path("y", ["boss"]),
                Term::var("y"),
            ));
        }
        FqlSchema::new(
            th,
            names(&["Person", "Team"]),
            names(&["String", "Int"]),
            &Builtins::standard(),
        )
        .unwrap()
    }

    fn to_person(boss_is_identity: bool, manager: Term) -> SchemaMapping {
        SchemaMapping::new(
            fixtures::company_schema(),
            person_schema(boss_is_identity),
            [("Emp".into(), "Person".into()), ("Dept".into(), "Team".into())].into(),
            [
                ("manager".into(), OpImage::new("y", manager)),
                ("worksIn".into(), OpImage::new("y", Term::path("y", ["boss", "dept"]))),
                ("ename".into(), OpImage::new("y", Term::path("y", ["name"]))),
            ]
            .into(),
        )
        .unwrap()
    }

    #[test]
    fn types_translate_structurally() {
        let f = to_person(true, Term::var("y"));
        let t = TypeExpr::prod(TypeExpr::base("Emp"), TypeExpr::base("String"));
        assert_eq!(
            f.apply_to_type(&t).unwrap(),
            TypeExpr::prod(TypeExpr::base("Person"), TypeExpr::base("String"))
        );
        assert_eq!(f.apply_to_type(&TypeExpr::Unit).unwrap(), TypeExpr::Unit);
        let id = SchemaMapping::identity(&fixtures::company_schema());
        assert_eq!(id.apply_to_type(&t).unwrap(), t);
    }

    #[test]
    fn terms_translate_by_substitution() {
        let f = to_person(true, Term::var("y"));
        let ctx = Context::single("x", TypeExpr::base("Emp"));
        assert_eq!(
            f.apply_to_term(&ctx, &Term::path("x", ["worksIn"])).unwrap(),
            Term::path("x", ["boss", "dept"])
        );
        assert_eq!(
            f.apply_to_term(&ctx, &Term::path("x", ["manager", "manager"])).unwrap(),
            Term::var("x")
        );
        let id = SchemaMapping::identity(&fixtures::company_schema());
        let e = Term::path("x", ["manager", "ename", "reverse"]);
        assert_eq!(id.apply_to_term(&ctx, &e).unwrap(), e);
    }

    #[test]
    fn identity_preserves_every_equation() {
        let id = SchemaMapping::identity(&fixtures::company_schema());
        let verdicts = id.check_preservation(4).unwrap();
        assert_eq!(verdicts.len(), 3);
        assert!(verdicts.iter().all(Verdict::is_proved));
    }

    #[test]
    fn collapsing_manager_needs_the_target_axiom() {
        let ok = to_person(true, Term::var("y")).check_preservation(4).unwrap();
        assert!(ok.iter().all(Verdict::is_proved));
        let boss = Term::path("y", ["boss"]);
        assert!(to_person(true, boss.clone())
            .check_preservation(4)
            .unwrap()
            .iter()
            .all(Verdict::is_proved));
        // without boss = id the target has a model with two people who are
        // each other's boss and sit in different teams
        let weak = to_person(false, boss).check_preservation(8).unwrap();
        assert!(weak[0].is_proved() && weak[1].is_proved());
        assert!(matches!(weak[2], Verdict::Unknown { .. }));
    }

    #[test]
    fn ill_typed_images_are_rejected() {
        let err = SchemaMapping::new(
            fixtures::company_schema(),
            person_schema(true),
            [("Emp".into(), "Person".into()), ("Dept".into(), "Team".into())].into(),
            [
                ("manager".into(), OpImage::new("y", Term::path("y", ["dept"]))),
                ("worksIn".into(), OpImage::new("y", Term::path("y", ["dept"]))),
                ("ename".into(), OpImage::new("y", Term::path("y", ["name"]))),
            ]
            .into(),
        )
        .unwrap_err();
        assert!(matches!(err, MappingError::ImageType { .. }));
    }

    #[test]
    fn composition_substitutes_images() {
        let f = to_person(true, Term::var("y"));
        let id = SchemaMapping::identity(&f.target);
        let g = f.then(&id).unwrap();
        let ctx = Context::single("x", TypeExpr::base("Emp"));
        let e = Term::path("x", ["manager", "worksIn"]);
        assert_eq!(
            g.apply_to_term(&ctx, &e).unwrap(),
            id.apply_to_term(&f.apply_to_context(&ctx).unwrap(), &f.apply_to_term(&ctx, &e).unwrap())
                .unwrap()
        );
    }
}
