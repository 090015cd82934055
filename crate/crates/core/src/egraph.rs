//! Congruence closure over typed product terms.
//!
//! Nodes are hash-consed; every node starts its own class and classes are
//! merged through a union-find keyed by the creating node. Congruence is
//! restored by [`EGraph::rebuild`], which re-canonicalizes the whole node
//! table until no two distinct classes share a canonical node. Every merge
//! records an edge between the two nodes that justified it, so a chain of
//! equalities between any two merged nodes can be recovered.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::kernel::{Context, Signature, Term, TypeError, TypeExpr};

pub type NodeId = usize;
pub type ClassId = usize;
pub type TyId = u32;
type Sym = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum ENode {
    Var(Sym),
    Unit,
    Pair(ClassId, ClassId),
    Proj1(ClassId),
    Proj2(ClassId),
    App(Sym, ClassId),
}

impl ENode {
    fn map_children(self, mut f: impl FnMut(ClassId) -> ClassId) -> ENode {
        match self {
            ENode::Var(_) | ENode::Unit => self,
            ENode::Pair(a, b) => ENode::Pair(f(a), f(b)),
            ENode::Proj1(a) => ENode::Proj1(f(a)),
            ENode::Proj2(a) => ENode::Proj2(f(a)),
            ENode::App(s, a) => ENode::App(s, f(a)),
        }
    }

    fn children(self) -> impl Iterator<Item = ClassId> {
        let (a, b) = match self {
            ENode::Var(_) | ENode::Unit => (None, None),
            ENode::Pair(a, b) => (Some(a), Some(b)),
            ENode::Proj1(a) | ENode::Proj2(a) | ENode::App(_, a) => (Some(a), None),
        };
        a.into_iter().chain(b)
    }
}

/// Why two nodes were merged.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Reason {
    UnitEta,
    SurjectivePairing,
    ProjectFirst,
    ProjectSecond,
    /// Instance of theory equation `index`, used left-to-right when
    /// `forward`.
    Equation {
        index: usize,
        forward: bool,
    },
    /// A ground equation supplied with the problem.
    Given(usize),
    Congruence,
    /// Both classes evaluate to the same builtin constant.
    SameValue,
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reason::UnitEta => f.write_str("unit eta"),
            Reason::SurjectivePairing => f.write_str("surjective pairing"),
            Reason::ProjectFirst => f.write_str("first projection"),
            Reason::ProjectSecond => f.write_str("second projection"),
            Reason::Equation { index, forward: true } => write!(f, "equation #{}", index),
            Reason::Equation { index, forward: false } => write!(f, "equation #{} (reversed)", index),
            Reason::Given(i) => write!(f, "given #{}", i),
            Reason::Congruence => f.write_str("congruence"),
            Reason::SameValue => f.write_str("equal constants"),
        }
    }
}

/// One step of an equality chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep {
    pub from: Term,
    pub to: Term,
    pub reason: Reason,
}

/// A compiled equation side. Variables are indices into the owning rule's
/// variable table.
#[derive(Clone, Debug)]
pub(crate) enum Pattern {
    Var(usize),
    Unit,
    Pair(alloc::boxed::Box<Pattern>, alloc::boxed::Box<Pattern>),
    Proj1(alloc::boxed::Box<Pattern>),
    Proj2(alloc::boxed::Box<Pattern>),
    App(Sym, alloc::boxed::Box<Pattern>),
}

/// One direction of an equation: find `lhs`, add `rhs`, merge.
#[derive(Clone, Debug)]
pub(crate) struct Rule {
    pub lhs: Pattern,
    pub rhs: Pattern,
    pub lhs_ty: TyId,
    pub var_tys: Vec<TyId>,
    pub reason: Reason,
}

type Subst = Vec<Option<ClassId>>;

/// Caps on one saturation run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    /// Instantiations that would create a node deeper than this are skipped.
    pub depth_cap: u32,
    /// No rule firing starts once the node table is this large.
    pub node_cap: usize,
    /// Upper bound on rule-matching rounds.
    pub rounds: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RoundOutcome {
    pub changed: bool,
    pub blocked: bool,
    pub capped: bool,
}

#[derive(Clone, Debug)]
pub struct EGraph {
    symbols: Vec<String>,
    sym_index: BTreeMap<String, Sym>,
    types: Vec<TypeExpr>,
    ty_index: BTreeMap<TypeExpr, TyId>,
    ops: BTreeMap<Sym, (TyId, TyId)>,
    vars: BTreeMap<Sym, TyId>,

    parent: Vec<ClassId>,
    nodes: Vec<ENode>,
    node_ty: Vec<TyId>,
    memo: BTreeMap<ENode, NodeId>,
    edges: Vec<(NodeId, NodeId, Reason)>,

    // derived by rebuild()
    class_nodes: BTreeMap<ClassId, Vec<NodeId>>,
    class_depth: BTreeMap<ClassId, u32>,
    clean: bool,
}

const UNREACHED: u32 = u32::MAX;

impl EGraph {
    pub fn new(sig: &Signature) -> Self {
        let mut g = EGraph {
            symbols: Vec::new(),
            sym_index: BTreeMap::new(),
            types: Vec::new(),
            ty_index: BTreeMap::new(),
            ops: BTreeMap::new(),
            vars: BTreeMap::new(),
            parent: Vec::new(),
            nodes: Vec::new(),
            node_ty: Vec::new(),
            memo: BTreeMap::new(),
            edges: Vec::new(),
            class_nodes: BTreeMap::new(),
            class_depth: BTreeMap::new(),
            clean: true,
        };
        for (name, op) in sig.operations() {
            let s = g.sym(name);
            let d = g.ty_id(&op.dom);
            let c = g.ty_id(&op.cod);
            g.ops.insert(s, (d, c));
        }
        let unit = g.ty_id(&TypeExpr::Unit);
        g.insert(ENode::Unit, unit);
        g.rebuild();
        g
    }

    fn sym(&mut self, name: &str) -> Sym {
        if let Some(s) = self.sym_index.get(name) {
            return *s;
        }
        let s = self.symbols.len() as Sym;
        self.symbols.push(name.to_string());
        self.sym_index.insert(name.to_string(), s);
        s
    }

    pub fn ty_id(&mut self, ty: &TypeExpr) -> TyId {
        if let Some(t) = self.ty_index.get(ty) {
            return *t;
        }
        let t = self.types.len() as TyId;
        self.types.push(ty.clone());
        self.ty_index.insert(ty.clone(), t);
        t
    }

    pub fn ty(&self, t: TyId) -> &TypeExpr {
        &self.types[t as usize]
    }

    pub fn lookup_ty(&self, ty: &TypeExpr) -> Option<TyId> {
        self.ty_index.get(ty).copied()
    }

    /// Treat `name` as a constant of type `ty`.
    pub fn declare_var(&mut self, name: &str, ty: &TypeExpr) {
        let s = self.sym(name);
        let t = self.ty_id(ty);
        self.vars.insert(s, t);
    }

    pub fn declare_context(&mut self, ctx: &Context) {
        for (name, ty) in ctx.visible() {
            self.declare_var(name, ty);
        }
    }

    pub fn find(&self, mut id: ClassId) -> ClassId {
        while self.parent[id] != id {
            id = self.parent[id];
        }
        id
    }

    fn find_compress(&mut self, id: ClassId) -> ClassId {
        let root = self.find(id);
        let mut cur = id;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn class_count(&self) -> usize {
        self.class_nodes.len()
    }

    pub fn class_ty(&self, class: ClassId) -> TyId {
        self.node_ty[self.find(class)]
    }

    pub fn class_type(&self, class: ClassId) -> &TypeExpr {
        self.ty(self.class_ty(class))
    }

    pub fn classes(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.class_nodes.keys().copied()
    }

    pub fn classes_of_type(&self, t: TyId) -> Vec<ClassId> {
        self.class_nodes
            .keys()
            .copied()
            .filter(|c| self.node_ty[*c] == t)
            .collect()
    }

    pub fn depth_of(&self, class: ClassId) -> u32 {
        self.class_depth.get(&self.find(class)).copied().unwrap_or(UNREACHED)
    }

    pub(crate) fn nodes_of(&self, class: ClassId) -> &[NodeId] {
        self.class_nodes
            .get(&self.find(class))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub(crate) fn node(&self, id: NodeId) -> ENode {
        self.nodes[id].map_children(|c| self.find(c))
    }

    pub fn op_name(&self, node: NodeId) -> Option<&str> {
        match self.nodes[node] {
            ENode::App(s, _) => Some(&self.symbols[s as usize]),
            _ => None,
        }
    }

    /// The argument class of an application node.
    pub fn app_arg(&self, node: NodeId) -> Option<ClassId> {
        match self.nodes[node] {
            ENode::App(_, a) => Some(self.find(a)),
            _ => None,
        }
    }

    pub fn var_name(&self, node: NodeId) -> Option<&str> {
        match self.nodes[node] {
            ENode::Var(s) => Some(&self.symbols[s as usize]),
            _ => None,
        }
    }

    pub fn is_pair_or_proj(&self, node: NodeId) -> bool {
        matches!(self.nodes[node], ENode::Pair(..) | ENode::Proj1(_) | ENode::Proj2(_))
    }

    fn node_depth(&self, node: ENode) -> u32 {
        match node {
            ENode::Var(_) | ENode::Unit => 0,
            other => other
                .children()
                .map(|c| self.depth_of(c))
                .max()
                .map_or(0, |d| d.saturating_add(1)),
        }
    }

    fn insert(&mut self, node: ENode, ty: TyId) -> NodeId {
        let node = node.map_children(|c| self.find(c));
        if let Some(id) = self.memo.get(&node) {
            return *id;
        }
        let id = self.nodes.len();
        self.nodes.push(node);
        self.node_ty.push(ty);
        self.parent.push(id);
        self.memo.insert(node, id);
        let depth = self.node_depth(node);
        self.class_nodes.insert(id, vec![id]);
        self.class_depth.insert(id, depth);
        id
    }

    fn pair_ty(&mut self, a: TyId, b: TyId) -> TyId {
        let ty = TypeExpr::prod(self.ty(a).clone(), self.ty(b).clone());
        self.ty_id(&ty)
    }

    fn proj_ty(&mut self, of: TyId, first: bool) -> Option<TyId> {
        match self.ty(of).clone() {
            TypeExpr::Prod(l, r) => Some(self.ty_id(if first { &l } else { &r })),
            _ => None,
        }
    }

    pub fn unit_node(&self) -> NodeId {
        self.memo[&ENode::Unit]
    }

    /// Adds `term` (and its subterms) and returns the node for its root.
    pub fn add_term(&mut self, term: &Term) -> Result<NodeId, TypeError> {
        let (node, ty) = match term {
            Term::Var(v) => {
                let s = self.sym(v);
                let ty = *self.vars.get(&s).ok_or_else(|| TypeError::UnboundVariable(v.clone()))?;
                (ENode::Var(s), ty)
            }
            Term::Unit => return Ok(self.unit_node()),
            Term::Pair(a, b) => {
                let a = self.add_term(a)?;
                let b = self.add_term(b)?;
                let ty = self.pair_ty(self.node_ty[a], self.node_ty[b]);
                (ENode::Pair(a, b), ty)
            }
            Term::Proj1(a) | Term::Proj2(a) => {
                let first = matches!(term, Term::Proj1(_));
                let inner = self.add_term(a)?;
                let ty = self
                    .proj_ty(self.node_ty[inner], first)
                    .ok_or_else(|| TypeError::TypeMismatch {
                        expected: crate::kernel::Expected::Product,
                        found: self.ty(self.node_ty[inner]).clone(),
                        at: (**a).clone(),
                    })?;
                (
                    if first {
                        ENode::Proj1(inner)
                    } else {
                        ENode::Proj2(inner)
                    },
                    ty,
                )
            }
            Term::App(op, a) => {
                let inner = self.add_term(a)?;
                let s = self.sym(op);
                let (dom, cod) = *self
                    .ops
                    .get(&s)
                    .ok_or_else(|| TypeError::UnknownOperation(op.clone()))?;
                if self.node_ty[inner] != dom {
                    return Err(TypeError::TypeMismatch {
                        expected: crate::kernel::Expected::Type(self.ty(dom).clone()),
                        found: self.ty(self.node_ty[inner]).clone(),
                        at: (**a).clone(),
                    });
                }
                (ENode::App(s, inner), cod)
            }
        };
        Ok(self.insert(node, ty))
    }

    /// Adds `op(class)`; the operation must accept the class's type.
    pub fn add_app(&mut self, op: &str, class: ClassId) -> Option<NodeId> {
        let s = *self.sym_index.get(op)?;
        let (dom, cod) = *self.ops.get(&s)?;
        (self.class_ty(class) == dom).then(|| self.insert(ENode::App(s, class), cod))
    }

    /// The node of `term` if it is already represented.
    pub fn lookup_term(&self, term: &Term) -> Option<NodeId> {
        let node = match term {
            Term::Var(v) => ENode::Var(*self.sym_index.get(v.as_str())?),
            Term::Unit => ENode::Unit,
            Term::Pair(a, b) => ENode::Pair(self.find(self.lookup_term(a)?), self.find(self.lookup_term(b)?)),
            Term::Proj1(a) => ENode::Proj1(self.find(self.lookup_term(a)?)),
            Term::Proj2(a) => ENode::Proj2(self.find(self.lookup_term(a)?)),
            Term::App(op, a) => ENode::App(*self.sym_index.get(op.as_str())?, self.find(self.lookup_term(a)?)),
        };
        self.memo.get(&node).copied()
    }

    pub fn same_class(&self, a: NodeId, b: NodeId) -> bool {
        self.find(a) == self.find(b)
    }

    /// Merges the classes of two nodes of equal type. Returns whether
    /// anything changed.
    pub fn union(&mut self, a: NodeId, b: NodeId, reason: Reason) -> bool {
        let ra = self.find_compress(a);
        let rb = self.find_compress(b);
        if ra == rb {
            return false;
        }
        debug_assert_eq!(self.node_ty[ra], self.node_ty[rb]);
        let (root, child) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[child] = root;
        self.edges.push((a, b, reason));
        let moved = self.class_nodes.remove(&child).unwrap_or_default();
        self.class_nodes.entry(root).or_default().extend(moved);
        let d = self.class_depth.remove(&child).unwrap_or(UNREACHED);
        let e = self.class_depth.entry(root).or_insert(UNREACHED);
        *e = (*e).min(d);
        self.clean = false;
        true
    }

    /// Restores the congruence invariant and recomputes class membership and
    /// depths. Returns whether any congruence merge happened.
    pub fn rebuild(&mut self) -> bool {
        let mut merged = false;
        loop {
            let mut changed = false;
            let mut memo: BTreeMap<ENode, NodeId> = BTreeMap::new();
            for id in 0..self.nodes.len() {
                let canon = self.nodes[id].map_children(|c| self.find(c));
                self.nodes[id] = canon;
                match memo.get(&canon) {
                    Some(&other) => {
                        if self.find(other) != self.find(id) {
                            self.union(other, id, Reason::Congruence);
                            changed = true;
                        }
                    }
                    None => {
                        memo.insert(canon, id);
                    }
                }
            }
            if !changed {
                self.memo = memo;
                break;
            }
            merged = true;
        }
        for id in 0..self.parent.len() {
            self.find_compress(id);
        }
        let mut class_nodes: BTreeMap<ClassId, Vec<NodeId>> = BTreeMap::new();
        for &id in self.memo.values() {
            class_nodes.entry(self.find(id)).or_default().push(id);
        }
        for nodes in class_nodes.values_mut() {
            nodes.sort_unstable();
        }
        self.class_nodes = class_nodes;
        self.recompute_depths();
        self.clean = true;
        merged
    }

    fn recompute_depths(&mut self) {
        let mut depth: BTreeMap<ClassId, u32> = self.class_nodes.keys().map(|c| (*c, UNREACHED)).collect();
        loop {
            let mut changed = false;
            for (&class, nodes) in &self.class_nodes {
                let best = nodes
                    .iter()
                    .map(|&n| match self.nodes[n] {
                        ENode::Var(_) | ENode::Unit => 0,
                        node => node
                            .children()
                            .map(|c| depth[&self.find(c)])
                            .max()
                            .map_or(0, |d| d.saturating_add(1)),
                    })
                    .min()
                    .unwrap_or(UNREACHED);
                if best < depth[&class] {
                    depth.insert(class, best);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        self.class_depth = depth;
    }

    /// Closes the graph under the product axioms: unit eta, surjective
    /// pairing and both projection laws. Terminates because new projection
    /// classes have strictly smaller types.
    pub fn product_closure(&mut self) -> bool {
        let mut any = false;
        loop {
            if !self.clean {
                self.rebuild();
            }
            let before = self.nodes.len();
            let mut changed = false;
            let unit = self.unit_node();
            let unit_ty = self.node_ty[unit];
            let classes: Vec<ClassId> = self.class_nodes.keys().copied().collect();
            for class in classes {
                let class = self.find(class);
                let ty = self.node_ty[class];
                if ty == unit_ty {
                    changed |= self.union(class, unit, Reason::UnitEta);
                    continue;
                }
                let (Some(lt), Some(rt)) = (self.proj_ty(ty, true), self.proj_ty(ty, false)) else {
                    continue;
                };
                let p1 = self.insert(ENode::Proj1(class), lt);
                let p2 = self.insert(ENode::Proj2(class), rt);
                let pair = self.insert(ENode::Pair(p1, p2), ty);
                changed |= self.union(class, pair, Reason::SurjectivePairing);
                let pairs: Vec<(NodeId, ClassId, ClassId)> = self
                    .nodes_of(class)
                    .iter()
                    .filter_map(|&n| match self.nodes[n] {
                        ENode::Pair(a, b) => Some((n, a, b)),
                        _ => None,
                    })
                    .collect();
                for (_, a, b) in pairs {
                    changed |= self.union(p1, a, Reason::ProjectFirst);
                    changed |= self.union(p2, b, Reason::ProjectSecond);
                }
            }
            changed |= self.nodes.len() != before;
            if !self.clean {
                self.rebuild();
            }
            if !changed {
                break;
            }
            any = true;
        }
        any
    }

    pub(crate) fn compile(&mut self, ctx: &Context, term: &Term) -> Result<(Pattern, Vec<TyId>), TypeError> {
        let visible = ctx.visible();
        let mut var_tys = Vec::new();
        for (_, ty) in &visible {
            var_tys.push(self.ty_id(ty));
        }
        let names: Vec<&str> = visible.iter().map(|(n, _)| *n).collect();
        let pat = self.compile_term(&names, term)?;
        Ok((pat, var_tys))
    }

    fn compile_term(&mut self, names: &[&str], term: &Term) -> Result<Pattern, TypeError> {
        use alloc::boxed::Box;
        Ok(match term {
            Term::Var(v) => Pattern::Var(
                names
                    .iter()
                    .position(|n| n == v)
                    .ok_or_else(|| TypeError::UnboundVariable(v.clone()))?,
            ),
            Term::Unit => Pattern::Unit,
            Term::Pair(a, b) => Pattern::Pair(
                Box::new(self.compile_term(names, a)?),
                Box::new(self.compile_term(names, b)?),
            ),
            Term::Proj1(a) => Pattern::Proj1(Box::new(self.compile_term(names, a)?)),
            Term::Proj2(a) => Pattern::Proj2(Box::new(self.compile_term(names, a)?)),
            Term::App(op, a) => {
                let s = self.sym(op);
                Pattern::App(s, Box::new(self.compile_term(names, a)?))
            }
        })
    }

    /// Both directions of `ctx ⊢ lhs = rhs` as rules.
    pub(crate) fn rules_for(
        &mut self,
        ctx: &Context,
        lhs: &Term,
        rhs: &Term,
        ty: &TypeExpr,
        index: usize,
    ) -> Result<[Rule; 2], TypeError> {
        let (l, var_tys) = self.compile(ctx, lhs)?;
        let (r, _) = self.compile(ctx, rhs)?;
        let t = self.ty_id(ty);
        Ok([
            Rule {
                lhs: l.clone(),
                rhs: r.clone(),
                lhs_ty: t,
                var_tys: var_tys.clone(),
                reason: Reason::Equation { index, forward: true },
            },
            Rule {
                lhs: r,
                rhs: l,
                lhs_ty: t,
                var_tys,
                reason: Reason::Equation { index, forward: false },
            },
        ])
    }

    fn ematch(&self, pat: &Pattern, class: ClassId, var_tys: &[TyId], subst: Subst, out: &mut Vec<Subst>) {
        let class = self.find(class);
        match pat {
            Pattern::Var(i) => match subst[*i] {
                Some(bound) if self.find(bound) == class => out.push(subst),
                Some(_) => {}
                None if self.node_ty[class] == var_tys[*i] => {
                    let mut s = subst;
                    s[*i] = Some(class);
                    out.push(s);
                }
                None => {}
            },
            Pattern::Unit => {
                if self.find(self.unit_node()) == class {
                    out.push(subst);
                }
            }
            Pattern::Pair(pa, pb) => {
                for &n in self.nodes_of(class) {
                    if let ENode::Pair(a, b) = self.nodes[n] {
                        let mut firsts = Vec::new();
                        self.ematch(pa, a, var_tys, subst.clone(), &mut firsts);
                        for s in firsts {
                            self.ematch(pb, b, var_tys, s, out);
                        }
                    }
                }
            }
            Pattern::Proj1(p) | Pattern::Proj2(p) => {
                let first = matches!(pat, Pattern::Proj1(_));
                for &n in self.nodes_of(class) {
                    match (self.nodes[n], first) {
                        (ENode::Proj1(a), true) | (ENode::Proj2(a), false) => {
                            self.ematch(p, a, var_tys, subst.clone(), out)
                        }
                        _ => {}
                    }
                }
            }
            Pattern::App(s, p) => {
                for &n in self.nodes_of(class) {
                    if let ENode::App(t, a) = self.nodes[n] {
                        if t == *s {
                            self.ematch(p, a, var_tys, subst.clone(), out);
                        }
                    }
                }
            }
        }
    }

    /// Existing class of an instantiated pattern (if fully present) and the
    /// depth its root would have.
    fn probe(&self, pat: &Pattern, subst: &[ClassId]) -> (Option<ClassId>, u32) {
        let child = |p: &Pattern| self.probe(p, subst);
        let (node, depth) = match pat {
            Pattern::Var(i) => {
                let c = self.find(subst[*i]);
                return (Some(c), self.depth_of(c));
            }
            Pattern::Unit => {
                let u = self.find(self.unit_node());
                return (Some(u), 0);
            }
            Pattern::Pair(a, b) => {
                let (ca, da) = child(a);
                let (cb, db) = child(b);
                (ca.zip(cb).map(|(a, b)| ENode::Pair(a, b)), 1 + da.max(db))
            }
            Pattern::Proj1(a) => {
                let (ca, da) = child(a);
                (ca.map(ENode::Proj1), 1 + da)
            }
            Pattern::Proj2(a) => {
                let (ca, da) = child(a);
                (ca.map(ENode::Proj2), 1 + da)
            }
            Pattern::App(s, a) => {
                let (ca, da) = child(a);
                (ca.map(|c| ENode::App(*s, c)), 1 + da)
            }
        };
        match node.and_then(|n| self.memo.get(&n)) {
            Some(&id) => {
                let c = self.find(id);
                (Some(c), self.depth_of(c))
            }
            None => (None, depth),
        }
    }

    fn instantiate(&mut self, pat: &Pattern, subst: &[ClassId]) -> NodeId {
        match pat {
            Pattern::Var(i) => {
                // any node of the class stands for it
                let c = self.find(subst[*i]);
                self.nodes_of(c).first().copied().unwrap_or(c)
            }
            Pattern::Unit => self.unit_node(),
            Pattern::Pair(a, b) => {
                let a = self.instantiate(a, subst);
                let b = self.instantiate(b, subst);
                let ty = self.pair_ty(self.node_ty[a], self.node_ty[b]);
                self.insert(ENode::Pair(a, b), ty)
            }
            Pattern::Proj1(a) | Pattern::Proj2(a) => {
                let first = matches!(pat, Pattern::Proj1(_));
                let inner = self.instantiate(a, subst);
                let ty = self
                    .proj_ty(self.node_ty[inner], first)
                    .expect("compiled patterns are well typed");
                self.insert(
                    if first {
                        ENode::Proj1(inner)
                    } else {
                        ENode::Proj2(inner)
                    },
                    ty,
                )
            }
            Pattern::App(s, a) => {
                let inner = self.instantiate(a, subst);
                let (_, cod) = self.ops[s];
                self.insert(ENode::App(*s, inner), cod)
            }
        }
    }

    /// One round of rule application against the current (clean) graph.
    /// All matches are collected before any is applied.
    pub(crate) fn apply_rules(&mut self, rules: &[Rule], limits: &Limits) -> RoundOutcome {
        if !self.clean {
            self.rebuild();
        }
        let mut outcome = RoundOutcome::default();
        let mut firings: Vec<(usize, Vec<ClassId>)> = Vec::new();
        for (ri, rule) in rules.iter().enumerate() {
            let roots = self.classes_of_type(rule.lhs_ty);
            for root in roots {
                let mut matches = Vec::new();
                self.ematch(
                    &rule.lhs,
                    root,
                    &rule.var_tys,
                    vec![None; rule.var_tys.len()],
                    &mut matches,
                );
                for m in matches {
                    for full in self.complete(m, &rule.var_tys) {
                        firings.push((ri, full));
                    }
                }
            }
        }
        for (ri, subst) in firings {
            if self.nodes.len() >= limits.node_cap {
                outcome.capped = true;
                break;
            }
            let rule = &rules[ri];
            let (lhs_class, _) = self.probe(&rule.lhs, &subst);
            let (rhs_class, rhs_depth) = self.probe(&rule.rhs, &subst);
            if let (Some(l), Some(r)) = (lhs_class, rhs_class) {
                if self.find(l) == self.find(r) {
                    continue;
                }
            }
            if rhs_class.is_none() && rhs_depth > limits.depth_cap {
                outcome.blocked = true;
                continue;
            }
            let l = self.instantiate(&rule.lhs, &subst);
            let r = self.instantiate(&rule.rhs, &subst);
            outcome.changed |= self.union(l, r, rule.reason.clone());
            outcome.changed |= rhs_class.is_none();
        }
        outcome.changed |= self.rebuild();
        outcome
    }

    /// Instantiates both sides of `rule` at `subst` and merges them.
    pub(crate) fn fire(&mut self, rule: &Rule, subst: &[ClassId]) -> bool {
        let l = self.instantiate(&rule.lhs, subst);
        let r = self.instantiate(&rule.rhs, subst);
        self.union(l, r, rule.reason.clone())
    }

    /// Fills variables the match left unbound (they occur only on the other
    /// side) with every existing class of the right type.
    fn complete(&self, subst: Subst, var_tys: &[TyId]) -> Vec<Vec<ClassId>> {
        let mut partial: Vec<Vec<ClassId>> = vec![Vec::new()];
        for (i, slot) in subst.iter().enumerate() {
            let choices = match slot {
                Some(c) => vec![*c],
                None => self.classes_of_type(var_tys[i]),
            };
            partial = partial
                .into_iter()
                .flat_map(|p| {
                    choices.iter().map(move |c| {
                        let mut q = p.clone();
                        q.push(*c);
                        q
                    })
                })
                .collect();
        }
        partial
    }

    /// Repeatedly applies `rules` and the product axioms until nothing
    /// changes or a cap is reached. Returns the accumulated outcome, where
    /// `changed` means the last round still changed the graph.
    pub(crate) fn saturate(&mut self, rules: &[Rule], limits: &Limits) -> RoundOutcome {
        let mut total = RoundOutcome::default();
        self.product_closure();
        for _ in 0..limits.rounds {
            let round = self.apply_rules(rules, limits);
            let closed = self.product_closure();
            total.blocked |= round.blocked;
            total.capped |= round.capped;
            total.changed = round.changed || closed;
            if !total.changed || round.capped {
                break;
            }
        }
        total
    }

    /// Cheapest term of every reachable class: smallest size, then
    /// lexicographically least rendering.
    pub fn extract_all(&self) -> BTreeMap<ClassId, Term> {
        let mut best: BTreeMap<ClassId, (usize, String, Term)> = BTreeMap::new();
        loop {
            let mut changed = false;
            for (&class, nodes) in &self.class_nodes {
                for &n in nodes {
                    let Some(term) = self.build_from(n, &best) else {
                        continue;
                    };
                    let key = (term.size(), term.to_string());
                    let better = match best.get(&class) {
                        None => true,
                        Some((s, r, _)) => (key.0, &key.1) < (*s, r),
                    };
                    if better {
                        best.insert(class, (key.0, key.1, term));
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        best.into_iter().map(|(c, (_, _, t))| (c, t)).collect()
    }

    fn build_from(&self, n: NodeId, best: &BTreeMap<ClassId, (usize, String, Term)>) -> Option<Term> {
        let get = |c: ClassId| best.get(&self.find(c)).map(|(_, _, t)| t.clone());
        Some(match self.nodes[n] {
            ENode::Var(s) => Term::Var(self.symbols[s as usize].clone()),
            ENode::Unit => Term::Unit,
            ENode::Pair(a, b) => Term::pair(get(a)?, get(b)?),
            ENode::Proj1(a) => Term::proj1(get(a)?),
            ENode::Proj2(a) => Term::proj2(get(a)?),
            ENode::App(s, a) => Term::app(self.symbols[s as usize].clone(), get(a)?),
        })
    }

    /// The chain of merges connecting two nodes of one class.
    pub fn explain(&self, a: NodeId, b: NodeId) -> Option<Vec<TraceStep>> {
        if self.find(a) != self.find(b) {
            return None;
        }
        let mut adj: BTreeMap<NodeId, Vec<(NodeId, usize)>> = BTreeMap::new();
        for (i, (x, y, _)) in self.edges.iter().enumerate() {
            adj.entry(*x).or_default().push((*y, i));
            adj.entry(*y).or_default().push((*x, i));
        }
        let mut prev: BTreeMap<NodeId, (NodeId, usize)> = BTreeMap::new();
        let mut seen = BTreeSet::from([a]);
        let mut queue = VecDeque::from([a]);
        while let Some(cur) = queue.pop_front() {
            if cur == b {
                break;
            }
            for &(next, edge) in adj.get(&cur).map(Vec::as_slice).unwrap_or(&[]) {
                if seen.insert(next) {
                    prev.insert(next, (cur, edge));
                    queue.push_back(next);
                }
            }
        }
        let reps: BTreeMap<ClassId, (usize, String, Term)> = self
            .extract_all()
            .into_iter()
            .map(|(c, t)| (c, (0, String::new(), t)))
            .collect();
        let render = |n: NodeId| self.build_from(n, &reps).unwrap_or(Term::Unit);
        let mut steps = Vec::new();
        let mut cur = b;
        while cur != a {
            let (p, edge) = *prev.get(&cur)?;
            steps.push(TraceStep {
                from: render(p),
                to: render(cur),
                reason: self.edges[edge].2.clone(),
            });
            cur = p;
        }
        steps.reverse();
        Some(steps)
    }
}
