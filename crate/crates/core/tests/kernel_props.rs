mod common;

use proptest::prelude::*;
use rand::seq::IndexedRandom;

use common::{gen_term, gen_term_logged, rng, subterms};
use qinl_core::kernel::{infer_type, substitute, Context, Signature, TypeExpr};

fn signature() -> Signature {
    let b = TypeExpr::base;
    let mut sig = Signature::new();
    sig.add_base_type("A").add_base_type("B");
    sig.add_operation("f", b("A"), b("B")).unwrap();
    sig.add_operation("g", b("B"), b("A")).unwrap();
    sig.add_operation("h", TypeExpr::prod(b("A"), b("B")), b("A")).unwrap();
    sig.add_operation("k", TypeExpr::Unit, b("B")).unwrap();
    sig.add_operation("d", b("A"), TypeExpr::prod(b("A"), b("A"))).unwrap();
    sig
}

fn context() -> Context {
    let b = TypeExpr::base;
    Context::from_bindings([
        ("x".to_string(), b("A")),
        ("y".to_string(), b("B")),
        ("p".to_string(), TypeExpr::prod(b("A"), b("B"))),
    ])
}

fn types() -> Vec<TypeExpr> {
    let b = TypeExpr::base;
    vec![
        TypeExpr::Unit,
        b("A"),
        b("B"),
        TypeExpr::prod(b("A"), b("B")),
        TypeExpr::prod(b("A"), b("A")),
        TypeExpr::prod(TypeExpr::prod(b("B"), TypeExpr::Unit), b("A")),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn every_subterm_has_the_type_it_was_built_for(seed: u64) {
        let mut r = rng(seed);
        let (sig, ctx) = (signature(), context());
        let ty = types().choose(&mut r).unwrap().clone();
        let mut log = Vec::new();
        let Some(e) = gen_term_logged(&mut r, &sig, &ctx, &ty, 5, &mut log) else { return Ok(()) };
        prop_assert!(e.depth() <= 5);
        prop_assert_eq!(infer_type(&sig, &ctx, &e).unwrap(), ty);
        for sub in subterms(&e) {
            let built = log.iter().find(|(t, _)| t == sub).map(|(_, t)| t.clone()).unwrap();
            prop_assert_eq!(infer_type(&sig, &ctx, sub).unwrap(), built, "at {}", sub);
        }
    }

    #[test]
    fn substitution_preserves_types(seed: u64) {
        let mut r = rng(seed);
        let sig = signature();
        let var_ty = types().choose(&mut r).unwrap().clone();
        let ty = types().choose(&mut r).unwrap().clone();
        let inner = context().extend("v", var_ty.clone());
        let Some(e) = gen_term(&mut r, &sig, &inner, &ty, 5) else { return Ok(()) };
        let Some(s) = gen_term(&mut r, &sig, &context(), &var_ty, 3) else { return Ok(()) };
        let out = substitute(&e, "v", &s);
        prop_assert_eq!(infer_type(&sig, &context(), &out).unwrap(), ty);
        prop_assert!(!out.free_vars().contains("v"));
    }

    #[test]
    fn weakening_preserves_types(seed: u64, extra in 0usize..6) {
        let mut r = rng(seed);
        let sig = signature();
        let ty = types().choose(&mut r).unwrap().clone();
        let Some(e) = gen_term(&mut r, &sig, &context(), &ty, 5) else { return Ok(()) };
        let weaker = context().extend("w", types()[extra].clone());
        prop_assert_eq!(infer_type(&sig, &weaker, &e).unwrap(), ty);
    }
}

#[test]
fn generator_reaches_every_type_and_depth() {
    let (sig, ctx) = (signature(), context());
    let mut deepest = 0;
    for ty in types() {
        let mut hits = 0;
        for seed in 0..200 {
            if let Some(e) = gen_term(&mut rng(seed), &sig, &ctx, &ty, 5) {
                hits += 1;
                deepest = deepest.max(e.depth());
            }
        }
        assert!(hits > 100, "{ty}: {hits}");
    }
    assert_eq!(deepest, 5);
}
