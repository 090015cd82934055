use qinl_core::kernel::{Term, TypeExpr};
use qinl_core::nrc::NrcExpr;
use qinl_core::query::Comprehension;

pub use super::lexer::Span;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Name {
    pub text: String,
    pub span: Span,
}

impl Name {
    pub fn new(text: impl Into<String>) -> Self {
        Name {
            text: text.into(),
            span: Span::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SourceUnit {
    pub decls: Vec<Decl>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Decl {
    Schema(SchemaDecl),
    Instance(InstanceDecl),
    Mapping(MappingDecl),
    Query(QueryDecl),
    Nrc(NrcDecl),
    Migrate(MigrateDecl),
}

impl Decl {
    pub fn name(&self) -> &Name {
        match self {
            Decl::Schema(d) => &d.name,
            Decl::Instance(d) => &d.name,
            Decl::Mapping(d) => &d.name,
            Decl::Query(d) => &d.name,
            Decl::Nrc(d) => &d.name,
            Decl::Migrate(d) => &d.name,
        }
    }

    pub fn span(&self) -> Span {
        match self {
            Decl::Schema(d) => d.span,
            Decl::Instance(d) => d.span,
            Decl::Mapping(d) => d.span,
            Decl::Query(d) => d.span,
            Decl::Nrc(d) => d.span,
            Decl::Migrate(d) => d.span,
        }
    }

    /// Namespace the declared name lives in. Migrations declare instances.
    pub fn namespace(&self) -> Namespace {
        match self {
            Decl::Schema(_) => Namespace::Schema,
            Decl::Instance(_) | Decl::Migrate(_) => Namespace::Instance,
            Decl::Mapping(_) => Namespace::Mapping,
            Decl::Query(_) => Namespace::Query,
            Decl::Nrc(_) => Namespace::Nrc,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Namespace {
    Schema,
    Instance,
    Mapping,
    Query,
    Nrc,
}

impl std::fmt::Display for Namespace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Namespace::Schema => "schema",
            Namespace::Instance => "instance",
            Namespace::Mapping => "mapping",
            Namespace::Query => "query",
            Namespace::Nrc => "nrc expression",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SchemaDecl {
    pub name: Name,
    pub entities: Vec<Name>,
    pub attributes: Vec<Name>,
    pub operations: Vec<OpDecl>,
    pub equations: Vec<EquationDecl>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpDecl {
    pub name: Name,
    pub dom: TypeExpr,
    pub cod: TypeExpr,
    pub span: Span,
}

/// `forall x:A, y:B. lhs = rhs`; the quantifier is omitted for closed
/// equations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquationDecl {
    pub ctx: Vec<(Name, TypeExpr)>,
    pub lhs: Term,
    pub rhs: Term,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstanceDecl {
    pub name: Name,
    pub schema: Name,
    pub entries: Vec<InstanceEntry>,
    pub span: Span,
}

/// `Emp = { e1, e2 }` lists a carrier; `manager = { e1 -> e1 }` lists a
/// table. Which one is meant is decided by the schema.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstanceEntry {
    pub name: Name,
    pub items: Vec<EntryItem>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EntryItem {
    pub row: Name,
    pub value: Option<Literal>,
    pub span: Span,
}

/// A cell value in an instance.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Literal {
    Row(String),
    Int(i64),
    Str(String),
    Null(u32),
    Unit,
    Pair(Box<Literal>, Box<Literal>),
    /// A builtin applied to an unknown, e.g. `reverse(?1)`.
    App(String, Box<Literal>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MappingDecl {
    pub name: Name,
    pub source: Name,
    pub target: Name,
    pub types: Vec<(Name, Name)>,
    pub ops: Vec<OpImageDecl>,
    pub span: Span,
}

/// `f -> (x => body)`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpImageDecl {
    pub op: Name,
    pub var: Name,
    pub body: Term,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryDecl {
    pub name: Name,
    pub schema: Name,
    pub query: Comprehension,
    pub span: Span,
}

/// `nrc n = e` or `nrc n : S = e`; with a schema, each entity type name is
/// bound to the set of its rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NrcDecl {
    pub name: Name,
    pub schema: Option<Name>,
    pub expr: NrcExpr,
    pub span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Delta,
    Sigma,
    Pi,
}

impl Direction {
    pub fn keyword(self) -> &'static str {
        match self {
            Direction::Delta => "delta",
            Direction::Sigma => "sigma",
            Direction::Pi => "pi",
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.keyword())
    }
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "delta" => Ok(Direction::Delta),
            "sigma" => Ok(Direction::Sigma),
            "pi" => Ok(Direction::Pi),
            other => Err(format!("unknown migration `{}`; expected delta, sigma or pi", other)),
        }
    }
}

/// `migrate J = sigma F I`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MigrateDecl {
    pub name: Name,
    pub direction: Direction,
    pub mapping: Name,
    pub instance: Name,
    pub span: Span,
}
