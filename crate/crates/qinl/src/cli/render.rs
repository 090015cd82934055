use serde_json::{json, Map, Value as Json};

use qinl_core::equality::Verdict;
use qinl_core::migration::{HomError, Homomorphism, MigrationError};
use qinl_core::nrc::Env;
use qinl_core::query::render_env;
use qinl_core::schema::{ChaseError, EquationStatus, FqlSchema, Instance};
use qinl_core::value::Value;

use super::{EXIT_ERROR, EXIT_FAILED};

pub fn value(v: &Value) -> Json {
    Json::String(v.to_string())
}

pub fn env(e: &Env) -> Json {
    Json::Object(e.iter().map(|(k, v)| (k.clone(), value(v))).collect())
}

/// Short status word, table text, and JSON fields of one equation check.
pub fn equation_status(s: &EquationStatus) -> (&'static str, String, Map<String, Json>) {
    let mut m = Map::new();
    let (word, text) = match s {
        EquationStatus::Satisfied => ("satisfied", "satisfied".to_string()),
        EquationStatus::SampledOnly { sample_size } => {
            m.insert("sample_size".into(), (*sample_size).into());
            (
                "sampled",
                format!(
                    "no counterexample among sampled values ({} per attribute type)",
                    sample_size
                ),
            )
        }
        EquationStatus::Violated { witness, lhs, rhs } => {
            m.insert("witness".into(), env(witness));
            m.insert("lhs".into(), value(lhs));
            m.insert("rhs".into(), value(rhs));
            (
                "violated",
                format!("violated at {}: {} vs {}", render_env(witness), lhs, rhs),
            )
        }
        EquationStatus::Undetermined { witness, lhs, rhs } => {
            m.insert("witness".into(), env(witness));
            m.insert("lhs".into(), value(lhs));
            m.insert("rhs".into(), value(rhs));
            (
                "undetermined",
                format!(
                    "undetermined at {}: {} vs {} differ only through unknown values",
                    render_env(witness),
                    lhs,
                    rhs
                ),
            )
        }
    };
    m.insert("status".into(), word.into());
    (word, text, m)
}

pub fn verdict(v: &Verdict) -> Map<String, Json> {
    let mut m = Map::new();
    match v {
        Verdict::Proved { trace, fuel_used } => {
            m.insert("verdict".into(), "proved".into());
            m.insert("fuel_used".into(), (*fuel_used).into());
            m.insert(
                "trace".into(),
                trace
                    .iter()
                    .map(
                        |s| json!({"from": s.from.to_string(), "to": s.to.to_string(), "reason": s.reason.to_string()}),
                    )
                    .collect(),
            );
        }
        Verdict::Unknown {
            fuel_spent,
            depth_cap,
            universe_cap,
        } => {
            m.insert("verdict".into(), "unknown".into());
            m.insert("fuel_spent".into(), (*fuel_spent).into());
            m.insert("depth_cap".into(), (*depth_cap).into());
            m.insert("universe_cap".into(), (*universe_cap).into());
        }
    }
    m
}

/// Status word, exit code and extra JSON fields for a failed migration.
pub fn migration_failure(e: &MigrationError) -> (&'static str, i32, Map<String, Json>) {
    let mut m = Map::new();
    let (word, code) = match e {
        MigrationError::UnverifiedMapping(idx) => {
            m.insert(
                "unproved_equations".into(),
                idx.iter().map(|i| Json::from(i + 1)).collect(),
            );
            ("unverified", EXIT_FAILED)
        }
        MigrationError::Chase(ChaseError::FuelExhausted { fuel, partial_size }) => {
            m.insert("fuel".into(), (*fuel).into());
            m.insert("partial_size".into(), (*partial_size).into());
            ("fuel_exhausted", EXIT_FAILED)
        }
        MigrationError::Chase(ChaseError::Inconsistent { .. }) => ("inconsistent", EXIT_FAILED),
        MigrationError::UndeterminedAttribute { .. } => ("undetermined", EXIT_FAILED),
        MigrationError::Homs(HomError::TooLarge { .. } | HomError::UnboundNull(_)) => ("too_large", EXIT_FAILED),
        _ => ("error", EXIT_ERROR),
    };
    m.insert("status".into(), word.into());
    m.insert("message".into(), e.to_string().into());
    (word, code, m)
}

pub fn instance(schema: &FqlSchema, inst: &Instance) -> Json {
    let carriers: Map<String, Json> = schema
        .entities
        .iter()
        .map(|e| (e.clone(), inst.carrier(e).map(Json::from).collect()))
        .collect();
    let tables: Map<String, Json> = schema
        .columns()
        .into_iter()
        .map(|(op, dom, _)| {
            let rows: Map<String, Json> = inst
                .carrier(dom)
                .filter_map(|r| inst.get(op, r).map(|v| (r.to_string(), value(v))))
                .collect();
            (op.to_string(), Json::Object(rows))
        })
        .collect();
    json!({"rows": inst.size(), "carriers": carriers, "tables": tables})
}

/// `Dept: d1 -> d1; Emp: e1 -> e1, e2 -> e1 | ?1 -> "x"`
pub fn hom_text(h: &Homomorphism) -> String {
    let mut parts = Vec::new();
    for (e, m) in &h.rows {
        if m.is_empty() {
            continue;
        }
        let maps: Vec<String> = m.iter().map(|(a, b)| format!("{} -> {}", a, b)).collect();
        parts.push(format!("{}: {}", e, maps.join(", ")));
    }
    let mut s = parts.join("; ");
    if !h.nulls.is_empty() {
        let nulls: Vec<String> = h.nulls.iter().map(|(n, v)| format!("?{} -> {}", n, v)).collect();
        s.push_str(" | ");
        s.push_str(&nulls.join(", "));
    }
    s
}

pub fn hom_json(h: &Homomorphism) -> Json {
    let rows: Map<String, Json> = h
        .rows
        .iter()
        .map(|(e, m)| {
            (
                e.clone(),
                Json::Object(m.iter().map(|(a, b)| (a.clone(), Json::from(b.clone()))).collect()),
            )
        })
        .collect();
    let nulls: Map<String, Json> = h.nulls.iter().map(|(n, v)| (format!("?{}", n), value(v))).collect();
    json!({"rows": rows, "nulls": nulls})
}
