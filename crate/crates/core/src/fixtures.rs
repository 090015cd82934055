//! The employee/department schema and sample data used by tests, docs and
//! the command-line examples.

use alloc::collections::BTreeSet;
use alloc::string::String;

use crate::equality::{Equation, Theory};
use crate::kernel::{Context, Signature, Term, TypeExpr};
use crate::query::Comprehension;
use crate::schema::{FqlSchema, Instance};
use crate::value::{Builtins, Value};

/// Emp/Dept with names, managers and departments, plus the string builtins
/// `length` and `reverse`.
pub fn company_schema() -> FqlSchema {
    let b = TypeExpr::base;
    let mut sig = Signature::new();
    sig.add_base_type("String")
        .add_base_type("Int")
        .add_base_type("Emp")
        .add_base_type("Dept");
    for (op, dom, cod) in [
        ("length", "String", "Int"),
        ("reverse", "String", "String"),
        ("worksIn", "Emp", "Dept"),
        ("manager", "Emp", "Emp"),
        ("ename", "Emp", "String"),
    ] {
        sig.add_operation(op, b(dom), b(cod)).expect("declared base types");
    }
    let s = Context::single("x", b("String"));
    let e = Context::single("x", b("Emp"));
    let theory = Theory::new(sig)
        .with_equation(Equation::new(
            s.clone(),
            Term::path("x", ["length"]),
            Term::path("x", ["reverse", "length"]),
        ))
        .with_equation(Equation::new(
            s,
            Term::var("x"),
            Term::path("x", ["reverse", "reverse"]),
        ))
        .with_equation(Equation::new(
            e,
            Term::path("x", ["worksIn"]),
            Term::path("x", ["manager", "worksIn"]),
        ));
    let set = |xs: &[&str]| xs.iter().map(|x| String::from(*x)).collect::<BTreeSet<_>>();
    FqlSchema::new(
        theory,
        set(&["Emp", "Dept"]),
        set(&["String", "Int"]),
        &Builtins::standard(),
    )
    .expect("fixture schema is valid")
}

/// Three employees: e1 "abba" manages itself, e2 "bob" reports to e1, e3
/// "cat" manages itself in another department.
pub fn palindrome_instance() -> Instance {
    let mut i = Instance::new();
    for (emp, boss, name, dept) in [
        ("e1", "e1", "abba", "d1"),
        ("e2", "e1", "bob", "d1"),
        ("e3", "e3", "cat", "d2"),
    ] {
        i.add_row("Emp", emp);
        i.set("manager", emp, Value::row("Emp", boss));
        i.set("ename", emp, Value::str(name));
        i.set("worksIn", emp, Value::row("Dept", dept));
    }
    i.add_row("Dept", "d1");
    i.add_row("Dept", "d2");
    i
}

/// Departments worked in by palindromic self-managers.
pub fn palindromic_managers_query() -> Comprehension {
    Comprehension {
        bindings: alloc::vec![("e".into(), "Emp".into())],
        where_clauses: alloc::vec![
            (Term::path("e", ["manager"]), Term::var("e")),
            (Term::path("e", ["ename", "reverse"]), Term::path("e", ["ename"])),
        ],
        ret: Term::path("e", ["worksIn"]),
    }
}
