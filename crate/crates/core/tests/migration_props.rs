mod common;

use proptest::prelude::*;

use common::{gen_mapping, gen_model, gen_schema, rng};
use qinl_core::mapping::SchemaMapping;
use qinl_core::migration::{count_homs, delta, pi, sigma, HomError, MigrationError, MigrationOptions};
use qinl_core::schema::{check_instance, instance_equal_upto_iso, ChaseError, FqlSchema, Instance, SampleConfig};

const FUEL: u32 = 8;

fn opts() -> MigrationOptions {
    MigrationOptions {
        fuel: FUEL,
        allow_unverified: false,
    }
}

fn unverified() -> MigrationOptions {
    MigrationOptions {
        allow_unverified: true,
        ..opts()
    }
}

/// `None` when the chase ran out of fuel; any other failure is a bug.
fn completed(r: Result<Instance, MigrationError>) -> Option<Instance> {
    match r {
        Err(MigrationError::Chase(ChaseError::FuelExhausted { .. })) => None,
        other => Some(other.unwrap()),
    }
}

/// `None` when the hom search space is over the limit.
fn homs(s: &FqlSchema, i: &Instance, j: &Instance) -> Option<usize> {
    match count_homs(s, i, j) {
        Err(HomError::TooLarge { .. }) => None,
        other => Some(other.unwrap()),
    }
}

fn proved(f: &SchemaMapping) -> bool {
    f.check_preservation(FUEL).unwrap().iter().all(|v| v.is_proved())
}

fn satisfied(s: &FqlSchema, i: &Instance) -> bool {
    check_instance(s, i, &SampleConfig::default()).unwrap().all_satisfied()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn identity_migrations_return_the_input(seed: u64) {
        let mut r = rng(seed);
        let s = gen_schema(&mut r, ["A", "B"], "f");
        let Some(i) = gen_model(&mut r, &s, FUEL) else { return Ok(()) };
        let id = SchemaMapping::identity(&s);
        let d = delta(&id, &i, &opts()).unwrap();
        prop_assert!(instance_equal_upto_iso(&s, &d, &i).is_some(), "delta");
        if let Some(out) = completed(sigma(&id, &i, &opts())) {
            prop_assert!(instance_equal_upto_iso(&s, &out, &i).is_some(), "sigma");
        }
        if let Some(out) = completed(pi(&id, &i, &opts())) {
            prop_assert!(instance_equal_upto_iso(&s, &out, &i).is_some(), "pi");
        }
    }

    #[test]
    fn delta_along_a_composite_is_two_deltas(seed: u64) {
        let mut r = rng(seed);
        let s = gen_schema(&mut r, ["A", "B"], "f");
        let t = gen_schema(&mut r, ["C", "D"], "g");
        let u = gen_schema(&mut r, ["E", "F"], "h");
        let Some(f) = gen_mapping(&mut r, &s, &t) else { return Ok(()) };
        let Some(g) = gen_mapping(&mut r, &t, &u) else { return Ok(()) };
        let Some(j) = gen_model(&mut r, &u, FUEL) else { return Ok(()) };
        let once = delta(&f.then(&g).unwrap(), &j, &unverified()).unwrap();
        let twice = delta(&f, &delta(&g, &j, &unverified()).unwrap(), &unverified()).unwrap();
        prop_assert!(instance_equal_upto_iso(&s, &once, &twice).is_some());
    }

    #[test]
    fn verified_migrations_produce_models(seed: u64) {
        let mut r = rng(seed);
        let s = gen_schema(&mut r, ["A", "B"], "f");
        let t = gen_schema(&mut r, ["C", "D"], "g");
        let Some(f) = gen_mapping(&mut r, &s, &t) else { return Ok(()) };
        prop_assume!(proved(&f));
        if let Some(j) = gen_model(&mut r, &t, FUEL) {
            prop_assert!(satisfied(&s, &delta(&f, &j, &opts()).unwrap()));
        }
        if let Some(i) = gen_model(&mut r, &s, FUEL) {
            if let Some(out) = completed(sigma(&f, &i, &opts())) {
                prop_assert!(satisfied(&t, &out));
            }
            if let Some(out) = completed(pi(&f, &i, &opts())) {
                prop_assert!(satisfied(&t, &out));
            }
        }
    }

    #[test]
    fn sigma_delta_pi_hom_counts_agree(seed: u64) {
        let mut r = rng(seed);
        let s = gen_schema(&mut r, ["A", "B"], "f");
        let t = gen_schema(&mut r, ["C", "D"], "g");
        let Some(f) = gen_mapping(&mut r, &s, &t) else { return Ok(()) };
        prop_assume!(proved(&f));
        let (Some(i), Some(j)) = (gen_model(&mut r, &s, FUEL), gen_model(&mut r, &t, FUEL)) else { return Ok(()) };
        let dj = delta(&f, &j, &opts()).unwrap();
        if let Some(si) = completed(sigma(&f, &i, &opts())) {
            if let (Some(a), Some(b)) = (homs(&t, &si, &j), homs(&s, &i, &dj)) {
                prop_assert_eq!(a, b, "sigma");
            }
        }
        if let Some(pi_i) = completed(pi(&f, &i, &opts())) {
            if let (Some(a), Some(b)) = (homs(&s, &dj, &i), homs(&t, &j, &pi_i)) {
                prop_assert_eq!(a, b, "pi");
            }
        }
    }
}

#[test]
fn generated_mappings_are_often_verified() {
    let (mut built, mut verified) = (0, 0);
    for seed in 0..200 {
        let mut r = rng(seed);
        let s = gen_schema(&mut r, ["A", "B"], "f");
        let t = gen_schema(&mut r, ["C", "D"], "g");
        if let Some(f) = gen_mapping(&mut r, &s, &t) {
            built += 1;
            verified += proved(&f) as usize;
        }
    }
    assert!(built >= 100 && verified >= 50, "{built} built, {verified} verified");
}
