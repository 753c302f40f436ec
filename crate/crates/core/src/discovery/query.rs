use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// A registered attribute value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Bool(bool),
    Number(f64),
    Text(String),
}

impl AttrValue {
    pub fn from_json(value: &Value) -> Option<Self> {
        match value {
            Value::Bool(b) => Some(AttrValue::Bool(*b)),
            Value::Number(n) => n.as_f64().map(AttrValue::Number),
            Value::String(s) => Some(AttrValue::Text(s.clone())),
            _ => None,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            AttrValue::Bool(_) => "boolean",
            AttrValue::Number(_) => "number",
            AttrValue::Text(_) => "text",
        }
    }

    /// Ordering between values of the same kind; `None` across kinds.
    fn compare(&self, other: &AttrValue) -> Option<Ordering> {
        match (self, other) {
            (AttrValue::Number(a), AttrValue::Number(b)) => a.partial_cmp(b),
            (AttrValue::Text(a), AttrValue::Text(b)) => Some(a.cmp(b)),
            (AttrValue::Bool(a), AttrValue::Bool(b)) => Some(a.cmp(b)),
            _ => None,
        }
    }
}

impl From<&str> for AttrValue {
    fn from(value: &str) -> Self {
        AttrValue::Text(value.to_string())
    }
}

impl From<f64> for AttrValue {
    fn from(value: f64) -> Self {
        AttrValue::Number(value)
    }
}

impl From<bool> for AttrValue {
    fn from(value: bool) -> Self {
        AttrValue::Bool(value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operator {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    InSet,
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Operator::Eq => "eq",
            Operator::Ne => "ne",
            Operator::Lt => "lt",
            Operator::Le => "le",
            Operator::Gt => "gt",
            Operator::Ge => "ge",
            Operator::InSet => "in_set",
        };
        f.write_str(s)
    }
}

/// `attribute op value`. `value` is a scalar, or a list of scalars for `in_set`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub attribute: String,
    pub op: Operator,
    pub value: Value,
}

impl Constraint {
    pub fn new(attribute: &str, op: Operator, value: impl Into<Value>) -> Self {
        Self { attribute: attribute.to_string(), op, value: value.into() }
    }

    /// The operand as typed values (one for scalar operators).
    pub(crate) fn operands(&self) -> Result<Vec<AttrValue>, InvalidQuery> {
        let scalar = |v: &Value| {
            AttrValue::from_json(v).ok_or_else(|| InvalidQuery::Operand {
                attribute: self.attribute.clone(),
                reason: format!("{v} is not a text, number or boolean"),
            })
        };
        match (self.op, &self.value) {
            (Operator::InSet, Value::Array(items)) => items.iter().map(scalar).collect(),
            (Operator::InSet, other) => Err(InvalidQuery::Operand {
                attribute: self.attribute.clone(),
                reason: format!("in_set needs a list, got {other}"),
            }),
            (op, v) => {
                let operand = scalar(v)?;
                if matches!(op, Operator::Lt | Operator::Le | Operator::Gt | Operator::Ge)
                    && matches!(operand, AttrValue::Bool(_))
                {
                    return Err(InvalidQuery::Operand {
                        attribute: self.attribute.clone(),
                        reason: format!("{op} is undefined for booleans"),
                    });
                }
                Ok(vec![operand])
            }
        }
    }

    /// Checks operand kinds against a registered value of the attribute.
    pub(crate) fn check_kind(&self, operands: &[AttrValue], registered: &AttrValue) -> Result<(), InvalidQuery> {
        match operands.iter().find(|o| o.kind() != registered.kind()) {
            Some(o) => Err(InvalidQuery::TypeMismatch {
                attribute: self.attribute.clone(),
                registered: registered.kind(),
                operand: o.kind(),
            }),
            None => Ok(()),
        }
    }

    pub(crate) fn holds(&self, operands: &[AttrValue], value: &AttrValue) -> bool {
        let ord = || value.compare(&operands[0]);
        match self.op {
            Operator::Eq => ord() == Some(Ordering::Equal),
            Operator::Ne => matches!(ord(), Some(Ordering::Less | Ordering::Greater)),
            Operator::Lt => ord() == Some(Ordering::Less),
            Operator::Le => matches!(ord(), Some(Ordering::Less | Ordering::Equal)),
            Operator::Gt => ord() == Some(Ordering::Greater),
            Operator::Ge => matches!(ord(), Some(Ordering::Greater | Ordering::Equal)),
            Operator::InSet => operands.iter().any(|o| value.compare(o) == Some(Ordering::Equal)),
        }
    }
}

/// Conjunction of constraints. The empty query matches every description.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Query {
    pub constraints: Vec<Constraint>,
}

impl Query {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn and(mut self, attribute: &str, op: Operator, value: impl Into<Value>) -> Self {
        self.constraints.push(Constraint::new(attribute, op, value));
        self
    }

    pub fn from_json(value: &Value) -> Result<Self, InvalidQuery> {
        serde_json::from_value(value.clone()).map_err(|e| InvalidQuery::Syntax(e.to_string()))
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("query serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InvalidQuery {
    #[error("query syntax: {0}")]
    Syntax(String),
    #[error("constraint on {attribute}: {reason}")]
    Operand { attribute: String, reason: String },
    #[error("{attribute} is registered as {registered}, operand is {operand}")]
    TypeMismatch { attribute: String, registered: &'static str, operand: &'static str },
}
