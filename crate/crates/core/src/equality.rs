//! Equations in context, equational theories, and a fuel-bounded
//! semi-decision procedure for provable equality.
//!
//! [`decide_equal`] runs congruence closure with the product axioms always
//! on and the theory's equations applied by matching against terms already
//! present. Fuel `f` runs levels `1..=f`; level `k` allows instantiations up
//! to `k` deeper than the input terms and a universe of `k * 1000` nodes.
//! Each level is independent of `f`, so a proof found at fuel `f` is found
//! at every larger fuel.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::egraph::{EGraph, Limits, Rule, TraceStep};
use crate::kernel::{
    check_context, infer_type, substitute_all, Context, Expected, Signature, Term, TypeError, TypeExpr,
};

/// Nodes allowed per unit of fuel.
pub const NODES_PER_FUEL: usize = 1000;

/// `ctx ⊢ lhs = rhs`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Equation {
    pub ctx: Context,
    pub lhs: Term,
    pub rhs: Term,
}

impl Equation {
    pub fn new(ctx: Context, lhs: Term, rhs: Term) -> Self {
        Equation { ctx, lhs, rhs }
    }

    /// The common type of both sides.
    pub fn check(&self, sig: &Signature) -> Result<TypeExpr, IllTyped> {
        check_context(sig, &self.ctx)?;
        let l = infer_type(sig, &self.ctx, &self.lhs)?;
        let r = infer_type(sig, &self.ctx, &self.rhs)?;
        if l != r {
            return Err(IllTyped::SidesDiffer { lhs: l, rhs: r });
        }
        Ok(l)
    }
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.ctx.is_empty() {
            write!(f, "forall {}. ", self.ctx)?;
        }
        write!(f, "{} = {}", self.lhs, self.rhs)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum IllTyped {
    #[error(transparent)]
    Term(#[from] TypeError),
    #[error("sides have different types: {lhs} vs {rhs}")]
    SidesDiffer { lhs: TypeExpr, rhs: TypeExpr },
}

/// A signature together with equations over it.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Theory {
    pub sig: Signature,
    pub equations: Vec<Equation>,
}

impl Theory {
    pub fn new(sig: Signature) -> Self {
        Theory {
            sig,
            equations: Vec::new(),
        }
    }

    pub fn with_equation(mut self, eq: Equation) -> Self {
        self.equations.push(eq);
        self
    }
}

/// Validates every equation; reports all failures with their index.
pub fn check_theory(th: &Theory) -> Result<(), Vec<(usize, IllTyped)>> {
    let errors: Vec<_> = th
        .equations
        .iter()
        .enumerate()
        .filter_map(|(i, eq)| eq.check(&th.sig).err().map(|e| (i, e)))
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

/// Substitutes `assignment` into both sides of `eq`. Each replacement is
/// typed in `target` and must have its variable's type.
pub fn instantiate(
    sig: &Signature,
    eq: &Equation,
    target: &Context,
    assignment: &BTreeMap<String, Term>,
) -> Result<(Term, Term), TypeError> {
    for (var, ty) in eq.ctx.visible() {
        let replacement = assignment
            .get(var)
            .ok_or_else(|| TypeError::UnboundVariable(var.into()))?;
        let found = infer_type(sig, target, replacement)?;
        if &found != ty {
            return Err(TypeError::TypeMismatch {
                expected: Expected::Type(ty.clone()),
                found,
                at: replacement.clone(),
            });
        }
    }
    Ok((substitute_all(&eq.lhs, assignment), substitute_all(&eq.rhs, assignment)))
}

/// The outcome of [`decide_equal`]. There is no refutation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Proved {
        trace: Vec<TraceStep>,
        /// The smallest fuel level that found the proof.
        fuel_used: u32,
    },
    Unknown {
        fuel_spent: u32,
        depth_cap: u32,
        universe_cap: usize,
    },
}

impl Verdict {
    pub fn is_proved(&self) -> bool {
        matches!(self, Verdict::Proved { .. })
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Proved { trace, fuel_used } => {
                write!(f, "proved at fuel {}", fuel_used)?;
                for step in trace {
                    write!(f, "\n  {} = {}  [{}]", step.from, step.to, step.reason)?;
                }
                Ok(())
            }
            Verdict::Unknown {
                fuel_spent,
                depth_cap,
                universe_cap,
            } => write!(
                f,
                "unknown after fuel {} (depth cap {}, universe cap {})",
                fuel_spent, depth_cap, universe_cap
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EqualityError {
    #[error("ill-typed equality problem: {0}")]
    IllTyped(#[from] IllTyped),
    #[error("ill-typed theory equation #{index}: {error}")]
    BadTheory { index: usize, error: IllTyped },
}

pub(crate) fn theory_rules(g: &mut EGraph, th: &Theory) -> Result<Vec<Rule>, EqualityError> {
    let mut rules = Vec::new();
    for (index, eq) in th.equations.iter().enumerate() {
        let ty = eq
            .check(&th.sig)
            .map_err(|error| EqualityError::BadTheory { index, error })?;
        let pair = g
            .rules_for(&eq.ctx, &eq.lhs, &eq.rhs, &ty, index)
            .map_err(|e| EqualityError::BadTheory { index, error: e.into() })?;
        rules.extend(pair);
    }
    Ok(rules)
}

/// Tries to prove `ctx ⊢ a = b` from the theory plus the product axioms.
pub fn decide_equal(th: &Theory, ctx: &Context, a: &Term, b: &Term, fuel: u32) -> Result<Verdict, EqualityError> {
    Equation::new(ctx.clone(), a.clone(), b.clone()).check(&th.sig)?;
    let base_depth = a.depth().max(b.depth()) as u32;
    let mut last = Verdict::Unknown {
        fuel_spent: 0,
        depth_cap: base_depth,
        universe_cap: 0,
    };
    for level in 1..=fuel {
        let limits = Limits {
            depth_cap: base_depth + level,
            node_cap: level as usize * NODES_PER_FUEL,
            rounds: 2 * level as usize + 2,
        };
        let mut g = EGraph::new(&th.sig);
        g.declare_context(ctx);
        let rules = theory_rules(&mut g, th)?;
        let na = g.add_term(a).map_err(IllTyped::from)?;
        let nb = g.add_term(b).map_err(IllTyped::from)?;
        g.rebuild();
        let outcome = g.saturate(&rules, &limits);
        if g.same_class(na, nb) {
            return Ok(Verdict::Proved {
                trace: g.explain(na, nb).unwrap_or_default(),
                fuel_used: level,
            });
        }
        last = Verdict::Unknown {
            fuel_spent: level,
            depth_cap: limits.depth_cap,
            universe_cap: limits.node_cap,
        };
        if !outcome.changed && !outcome.blocked && !outcome.capped {
            // saturated: deeper levels repeat this computation
            break;
        }
    }
    Ok(last)
}
