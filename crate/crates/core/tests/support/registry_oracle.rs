//! Brute-force matchmaking reference over a plain model of the registry.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde_json::{json, Value};

use a2sc_core::discovery::{AttrValue, Constraint, Operator, Query, Registry, ServiceDescription};
use a2sc_core::messaging::AgentAddress;

#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Text(String),
    Number(f64),
    Flag(bool),
}

impl Scalar {
    fn to_attr(&self) -> AttrValue {
        match self {
            Scalar::Text(s) => AttrValue::Text(s.clone()),
            Scalar::Number(n) => AttrValue::Number(*n),
            Scalar::Flag(b) => AttrValue::Bool(*b),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Scalar::Text(s) => json!(s),
            Scalar::Number(n) => json!(n),
            Scalar::Flag(b) => json!(b),
        }
    }

    fn kind(&self) -> u8 {
        match self {
            Scalar::Text(_) => 0,
            Scalar::Number(_) => 1,
            Scalar::Flag(_) => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cond {
    pub attribute: String,
    pub op: &'static str,
    pub operands: Vec<Scalar>,
}

pub type Model = BTreeMap<String, BTreeMap<String, Scalar>>;

fn compare(a: &Scalar, b: &Scalar) -> Option<std::cmp::Ordering> {
    match (a, b) {
        (Scalar::Text(x), Scalar::Text(y)) => Some(x.cmp(y)),
        (Scalar::Number(x), Scalar::Number(y)) => x.partial_cmp(y),
        (Scalar::Flag(x), Scalar::Flag(y)) => Some(x.cmp(y)),
        _ => None,
    }
}

fn holds(cond: &Cond, value: &Scalar) -> bool {
    use std::cmp::Ordering::*;
    if cond.op == "in_set" {
        return cond.operands.iter().any(|o| compare(value, o) == Some(Equal));
    }
    let c = compare(value, &cond.operands[0]);
    match cond.op {
        "eq" => c == Some(Equal),
        "ne" => c.is_some() && c != Some(Equal),
        "lt" => c == Some(Less),
        "le" => matches!(c, Some(Less | Equal)),
        "gt" => c == Some(Greater),
        "ge" => matches!(c, Some(Greater | Equal)),
        other => panic!("unknown operator {other}"),
    }
}

/// `Err` when the query is invalid for this registry: an ordering operator
/// on a boolean, or an operand whose type differs from a registered value.
pub fn brute_force(model: &Model, query: &[Cond]) -> Result<Vec<String>, ()> {
    for cond in query {
        let ordering = matches!(cond.op, "lt" | "le" | "gt" | "ge");
        if ordering && cond.operands.iter().any(|o| matches!(o, Scalar::Flag(_))) {
            return Err(());
        }
        for attrs in model.values() {
            if let Some(v) = attrs.get(&cond.attribute) {
                if cond.operands.iter().any(|o| o.kind() != v.kind()) {
                    return Err(());
                }
            }
        }
    }
    let mut hits: Vec<String> = model
        .iter()
        .filter(|(_, attrs)| query.iter().all(|c| attrs.get(&c.attribute).is_some_and(|v| holds(c, v))))
        .map(|(agent, _)| agent.clone())
        .collect();
    hits.sort();
    Ok(hits)
}

const CATEGORIES: [&str; 5] = ["meat_supply", "meat_wholesale", "meat_retail", "logistics", "three_pl"];
const SKUS: [&str; 4] = ["beef-01", "lamb-01", "pork-01", "veal-01"];
const REGIONS: [&str; 3] = ["north", "midlands", "south"];

fn value_for(attribute: &str, rng: &mut impl Rng) -> Scalar {
    match attribute {
        "category" => Scalar::Text(CATEGORIES.choose(rng).unwrap().to_string()),
        "sku" => Scalar::Text(SKUS.choose(rng).unwrap().to_string()),
        "region" => Scalar::Text(REGIONS.choose(rng).unwrap().to_string()),
        "capacity" => Scalar::Number(rng.random_range(0..20) as f64 * 0.5),
        "lat" => Scalar::Number(rng.random_range(-90.0..90.0)),
        _ => Scalar::Flag(rng.random_bool(0.5)),
    }
}

const ATTRIBUTES: [&str; 6] = ["category", "sku", "region", "capacity", "lat", "refrigerated"];

/// A registry history of up to 100 live descriptions, with re-registrations
/// and removals along the way. Returns the model and the real registry.
pub fn random_registry(rng: &mut impl Rng) -> (Model, Registry) {
    let mut model = Model::new();
    let mut registry = Registry::new();
    let target = rng.random_range(0..=100);
    let ops = target + rng.random_range(0..=20);
    for t in 0..ops {
        let agent = format!("agent-{:03}", rng.random_range(0..target.max(1)));
        if rng.random_bool(0.08) {
            model.remove(&agent);
            registry.deregister(&AgentAddress::new(&agent).unwrap());
            continue;
        }
        let mut attrs = BTreeMap::new();
        for attribute in ATTRIBUTES {
            if rng.random_bool(0.6) {
                attrs.insert(attribute.to_string(), value_for(attribute, rng));
            }
        }
        let mut desc = ServiceDescription::new(AgentAddress::new(&agent).unwrap(), t as u64);
        for (name, v) in &attrs {
            desc = desc.with(name, v.to_attr());
        }
        registry.register(desc);
        model.insert(agent, attrs);
    }
    (model, registry)
}

/// Usually a value of the attribute's own type, sometimes of another.
fn operand(attribute: &str, rng: &mut impl Rng) -> Scalar {
    if rng.random_bool(0.05) {
        let other = *ATTRIBUTES.choose(rng).unwrap();
        value_for(other, rng)
    } else {
        value_for(attribute, rng)
    }
}

/// A conjunctive query of up to four constraints, occasionally ill-typed.
pub fn random_query(rng: &mut impl Rng) -> Vec<Cond> {
    let n = rng.random_range(0..=4);
    (0..n)
        .map(|_| {
            let attribute = *ATTRIBUTES.choose(rng).unwrap();
            let op = *["eq", "ne", "lt", "le", "gt", "ge", "in_set"].choose(rng).unwrap();
            let operands = if op == "in_set" {
                let k = rng.random_range(0..=3);
                (0..k).map(|_| operand(attribute, rng)).collect()
            } else {
                vec![operand(attribute, rng)]
            };
            Cond { attribute: attribute.to_string(), op, operands }
        })
        .collect()
}

/// The same query in the library's vocabulary.
pub fn to_query(conds: &[Cond]) -> Query {
    Query {
        constraints: conds
            .iter()
            .map(|c| {
                let op = match c.op {
                    "eq" => Operator::Eq,
                    "ne" => Operator::Ne,
                    "lt" => Operator::Lt,
                    "le" => Operator::Le,
                    "gt" => Operator::Gt,
                    "ge" => Operator::Ge,
                    _ => Operator::InSet,
                };
                let value = if c.op == "in_set" {
                    Value::Array(c.operands.iter().map(Scalar::to_json).collect())
                } else {
                    c.operands[0].to_json()
                };
                Constraint::new(&c.attribute, op, value)
            })
            .collect(),
    }
}

/// Library search against the oracle for one case.
pub fn agrees(model: &Model, registry: &Registry, conds: &[Cond]) -> Result<(), String> {
    let expected = brute_force(model, conds);
    let actual = registry
        .search(&to_query(conds))
        .map(|v| v.into_iter().map(|a| a.to_string()).collect::<Vec<_>>())
        .map_err(|_| ());
    if expected == actual {
        Ok(())
    } else {
        Err(format!("query {conds:?}: expected {expected:?}, got {actual:?}"))
    }
}
