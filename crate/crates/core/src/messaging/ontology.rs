//! Named content schemas.
//!
//! An ontology maps each performative it supports to a [`Schema`] of required
//! and optional typed fields. Extra fields are tolerated; present optional
//! fields must still have the declared type.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::LazyLock;

use serde_json::Value;
use thiserror::Error;

use super::{ontologies, AgentAddress, Content, Performative};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldType {
    Text,
    /// Any JSON number.
    Number,
    /// Non-negative JSON integer.
    Integer,
    Boolean,
    Object,
    List,
    /// A string that parses as an [`AgentAddress`].
    Address,
}

impl FieldType {
    pub fn accepts(self, value: &Value) -> bool {
        match self {
            FieldType::Text => value.is_string(),
            FieldType::Number => value.is_number(),
            FieldType::Integer => value.is_u64(),
            FieldType::Boolean => value.is_boolean(),
            FieldType::Object => value.is_object(),
            FieldType::List => value.is_array(),
            FieldType::Address => value
                .as_str()
                .is_some_and(|s| AgentAddress::new(s).is_ok()),
        }
    }
}

impl fmt::Display for FieldType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            FieldType::Text => "text",
            FieldType::Number => "number",
            FieldType::Integer => "integer",
            FieldType::Boolean => "boolean",
            FieldType::Object => "object",
            FieldType::List => "list",
            FieldType::Address => "address",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Schema {
    required: Vec<(String, FieldType)>,
    optional: Vec<(String, FieldType)>,
}

impl Schema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn required(mut self, name: &str, ty: FieldType) -> Self {
        self.required.push((name.to_string(), ty));
        self
    }

    pub fn optional(mut self, name: &str, ty: FieldType) -> Self {
        self.optional.push((name.to_string(), ty));
        self
    }

    pub fn check(&self, content: &Content) -> Vec<ContentViolation> {
        let mut violations = Vec::new();
        for (name, ty) in &self.required {
            match content.get(name) {
                None => violations.push(ContentViolation::Missing { field: name.clone() }),
                Some(v) if !ty.accepts(v) => violations.push(ContentViolation::WrongType {
                    field: name.clone(),
                    expected: *ty,
                }),
                Some(_) => {}
            }
        }
        for (name, ty) in &self.optional {
            if let Some(v) = content.get(name) {
                if !ty.accepts(v) {
                    violations.push(ContentViolation::WrongType { field: name.clone(), expected: *ty });
                }
            }
        }
        violations
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ContentViolation {
    Missing { field: String },
    WrongType { field: String, expected: FieldType },
    UndefinedPerformative { performative: Performative },
}

impl fmt::Display for ContentViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContentViolation::Missing { field } => write!(f, "missing {field}"),
            ContentViolation::WrongType { field, expected } => {
                write!(f, "{field} must be {expected}")
            }
            ContentViolation::UndefinedPerformative { performative } => {
                write!(f, "ontology has no schema for {performative}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContentError {
    #[error("unknown ontology {0:?}")]
    UnknownOntology(String),
    #[error("content violates schema: {}", join(.0))]
    Invalid(Vec<ContentViolation>),
}

fn join(violations: &[ContentViolation]) -> String {
    violations.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, Default)]
pub struct Ontology {
    schemas: BTreeMap<Performative, Schema>,
}

impl Ontology {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, performative: Performative, schema: Schema) -> Self {
        self.schemas.insert(performative, schema);
        self
    }

    pub fn schema(&self, performative: Performative) -> Option<&Schema> {
        self.schemas.get(&performative)
    }
}

#[derive(Debug, Clone, Default)]
pub struct OntologyRegistry {
    ontologies: BTreeMap<String, Ontology>,
}

static BUILTIN: LazyLock<OntologyRegistry> = LazyLock::new(OntologyRegistry::with_builtins);

impl OntologyRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The process-wide registry of built-in ontologies.
    pub fn builtin() -> &'static OntologyRegistry {
        &BUILTIN
    }

    pub fn register(&mut self, name: &str, ontology: Ontology) {
        self.ontologies.insert(name.to_string(), ontology);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.ontologies.contains_key(name)
    }

    pub fn validate_content(
        &self,
        ontology_id: &str,
        performative: Performative,
        content: &Content,
    ) -> Result<(), ContentError> {
        let ontology = self
            .ontologies
            .get(ontology_id)
            .ok_or_else(|| ContentError::UnknownOntology(ontology_id.to_string()))?;
        let violations = match ontology.schema(performative) {
            Some(schema) => schema.check(content),
            None => vec![ContentViolation::UndefinedPerformative { performative }],
        };
        if violations.is_empty() {
            Ok(())
        } else {
            Err(ContentError::Invalid(violations))
        }
    }

    fn with_builtins() -> Self {
        use FieldType::*;
        use Performative::*;

        let failure = || Schema::new().required("reason", Text);
        let response = || Schema::new().optional("error", Text).optional("status", Text);

        let meat_trade = Ontology::new()
            .with(
                Cfp,
                Schema::new()
                    .required("sku", Text)
                    .required("quantity_kg", Number)
                    .optional("order_id", Text)
                    .optional("max_unit_price", Number)
                    .optional("needed_by", Integer)
                    .optional("reply_by", Integer)
                    .optional("destination", Object)
                    .optional("preference", Text),
            )
            .with(
                Propose,
                Schema::new()
                    .required("proposal_id", Text)
                    .required("sku", Text)
                    .required("quantity_kg", Number)
                    .required("unit_price", Number)
                    .required("delivery_options", List)
                    .required("valid_until", Integer),
            )
            .with(Refuse, Schema::new().required("reason", Text))
            .with(
                AcceptProposal,
                Schema::new().required("proposal_id", Text).optional("option_id", Text),
            )
            .with(
                RejectProposal,
                Schema::new().required("proposal_id", Text).optional("reason", Text),
            )
            .with(
                Inform,
                Schema::new()
                    .required("order_id", Text)
                    .required("status", Text)
                    .optional("tracking_id", Text)
                    .optional("sku", Text)
                    .optional("quantity_kg", Number),
            )
            .with(Failure, failure());

        let delivery_service = Ontology::new()
            .with(
                RequestGet,
                Schema::new()
                    .required("sku", Text)
                    .required("quantity_kg", Number)
                    .required("origin", Object)
                    .required("destination", Object)
                    .optional("assign", Boolean)
                    .optional("preference", Text),
            )
            .with(
                RequestPost,
                Schema::new()
                    .required("action", Text)
                    .required("order_id", Text)
                    .optional("tracking_id", Text)
                    .optional("option_id", Text)
                    .optional("sku", Text)
                    .optional("quantity_kg", Number)
                    .optional("origin", Object)
                    .optional("destination", Object)
                    .optional("consignee", Address)
                    .optional("eta_ms", Integer)
                    .optional("status", Text),
            )
            .with(
                Response,
                response()
                    .optional("options", List)
                    .optional("tracking_id", Text)
                    .optional("carrier", Address),
            );

        let telemetry = Ontology::new()
            .with(
                Inform,
                Schema::new()
                    .required("tracking_id", Text)
                    .required("t_ms", Integer)
                    .required("lat", Number)
                    .required("lon", Number)
                    .required("temp_c", Number)
                    .required("humidity_pct", Number)
                    .optional("final", Boolean),
            )
            .with(Failure, failure());

        let discovery = Ontology::new()
            .with(
                RequestPost,
                Schema::new().required("action", Text).optional("attributes", Object),
            )
            .with(RequestGet, Schema::new().required("query", List))
            .with(Response, response().optional("agents", List));

        let mut registry = Self::empty();
        registry.register(ontologies::MEAT_TRADE, meat_trade);
        registry.register(ontologies::DELIVERY_SERVICE, delivery_service);
        registry.register(ontologies::TELEMETRY, telemetry);
        registry.register(ontologies::DISCOVERY, discovery);
        registry
    }
}

/// Validates against the built-in registry.
pub fn validate_content(
    ontology_id: &str,
    performative: Performative,
    content: &Content,
) -> Result<(), ContentError> {
    OntologyRegistry::builtin().validate_content(ontology_id, performative, content)
}
