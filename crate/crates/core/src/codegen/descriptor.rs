//! Machine-readable descriptors consumed by the linker and the simulator.

use serde::{Deserialize, Serialize};
use serde_json::Number;
use thiserror::Error;

use crate::format::format_expr;
use crate::model::{
    AccessKey, AggregateOp, ArgBinding, CommandDecl, Compute, Consume, EventDecl, Expr, InteractorDecl, PrimType,
    RecordTypeDecl, RequestDecl, ResourceKind, Scope, SensorKind, ServiceDecl, ServiceKind, SourceSpan,
};
use crate::parse::parse_expr;

/// Serializes with sorted keys, two-space indentation and a trailing newline.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    // `serde_json::Map` is ordered by key unless `preserve_order` is enabled.
    let v = serde_json::to_value(value).expect("descriptor serializes");
    let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
    s.push('\n');
    s
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSchema {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: PrimType,
}

/// An event (or response) name with its payload layout.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventSchema {
    pub event: String,
    pub payload: String,
    pub fields: Vec<FieldSchema>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<FieldSchema>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DriverDescriptor {
    pub name: String,
    /// One of the resource kind labels (`periodic`, `tag`, `storage`, ...).
    pub kind: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<EventSchema>,
    /// Sample period in seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Number>,
    /// Sampling duration in seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Number>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub access_key: Option<FieldSchema>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub actions: Vec<ActionSchema>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubscriptionSpec {
    pub event: String,
    /// `sameLocation` or `global`.
    pub scope: String,
    pub payload: String,
    pub fields: Vec<FieldSchema>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestSpec {
    pub target: String,
    pub response: String,
    pub payload: String,
    pub fields: Vec<FieldSchema>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgSpec {
    pub param: String,
    /// Expression source text.
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandSpec {
    pub actuator: String,
    pub action: String,
    pub args: Vec<ArgSpec>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComputeSpec {
    pub operator: String,
    pub n: u32,
    pub field: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ServiceDescriptor {
    pub service_name: String,
    /// `Common` or `Custom`.
    pub kind: String,
    pub subscriptions: Vec<SubscriptionSpec>,
    pub publications: Vec<EventSchema>,
    pub requests: Vec<RequestSpec>,
    pub commands: Vec<CommandSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compute_spec: Option<ComputeSpec>,
    /// Relative path of the rule file inside a device package.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule_ref: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinkDescriptor {
    pub name: String,
    pub kind: String,
    pub event: String,
    pub payload: String,
    pub fields: Vec<FieldSchema>,
}

/// Resolves record names to declarations.
pub type RecordLookup<'a> = dyn Fn(&str) -> Option<&'a RecordTypeDecl> + 'a;

fn fields_of(lookup: &RecordLookup<'_>, payload: &str) -> Vec<FieldSchema> {
    lookup(payload)
        .map(|r| {
            r.fields
                .iter()
                .map(|f| FieldSchema {
                    name: f.name.clone(),
                    ty: f.ty,
                })
                .collect()
        })
        .unwrap_or_default()
}

fn event_schema(lookup: &RecordLookup<'_>, e: &EventDecl) -> EventSchema {
    EventSchema {
        event: e.event.clone(),
        payload: e.payload.clone(),
        fields: fields_of(lookup, &e.payload),
    }
}

fn seconds(ms: u64) -> Number {
    if ms % 1000 == 0 {
        Number::from(ms / 1000)
    } else {
        Number::from_f64(ms as f64 / 1000.0).expect("finite")
    }
}

fn millis(n: &Number) -> u64 {
    match n.as_u64() {
        Some(s) => s * 1000,
        None => (n.as_f64().unwrap_or(0.0) * 1000.0).round() as u64,
    }
}

fn access_schema(k: &AccessKey) -> FieldSchema {
    FieldSchema {
        name: k.name.clone(),
        ty: k.ty,
    }
}

fn blank(name: &str, kind: ResourceKind) -> DriverDescriptor {
    DriverDescriptor {
        name: name.to_string(),
        kind: kind.label().to_string(),
        events: Vec::new(),
        d: None,
        k: None,
        condition: None,
        access_key: None,
        actions: Vec::new(),
    }
}

/// Driver descriptors for every tag, sensor, actuator and storage, in
/// declaration order.
pub fn driver_descriptors(domain: &crate::model::DomainSpec) -> Vec<DriverDescriptor> {
    let lookup = |n: &str| domain.record(n);
    let mut out = Vec::new();
    for t in &domain.tags {
        let mut d = blank(&t.name, ResourceKind::Tag);
        d.events = t.generates.iter().map(|e| event_schema(&lookup, e)).collect();
        out.push(d);
    }
    for s in &domain.sensors {
        let mut d = blank(&s.name, s.resource_kind());
        d.events = vec![event_schema(&lookup, &s.generates)];
        match &s.kind {
            SensorKind::Periodic {
                sample_period_ms,
                duration_ms,
            } => {
                d.d = Some(seconds(*sample_period_ms));
                d.k = Some(seconds(*duration_ms));
            }
            SensorKind::EventDriven { condition } => d.condition = Some(format_expr(condition)),
            SensorKind::RequestBased { access_key } => d.access_key = Some(access_schema(access_key)),
        }
        out.push(d);
    }
    for a in &domain.actuators {
        let mut d = blank(&a.name, ResourceKind::Actuator);
        d.actions = a
            .actions
            .iter()
            .map(|x| ActionSchema {
                name: x.name.clone(),
                params: x
                    .params
                    .iter()
                    .map(|p| FieldSchema {
                        name: p.name.clone(),
                        ty: p.ty,
                    })
                    .collect(),
            })
            .collect();
        out.push(d);
    }
    for s in &domain.storages {
        let mut d = blank(&s.name, ResourceKind::Storage);
        d.events = vec![event_schema(&lookup, &s.generates)];
        d.access_key = Some(access_schema(&s.access_key));
        out.push(d);
    }
    out
}

pub fn scope_label(scope: Scope) -> &'static str {
    match scope {
        Scope::SameLocation => "sameLocation",
        Scope::Global => "global",
    }
}

/// Payload record of an event or response, looked up among every producer.
pub type PayloadLookup<'a> = dyn Fn(&str) -> Option<String> + 'a;

pub fn service_descriptor(
    s: &ServiceDecl,
    payload_of: &PayloadLookup<'_>,
    lookup: &RecordLookup<'_>,
    has_rules: bool,
) -> ServiceDescriptor {
    let payload = |event: &str| payload_of(event).unwrap_or_default();
    ServiceDescriptor {
        service_name: s.name.clone(),
        kind: s.kind.keyword().to_string(),
        subscriptions: s
            .consumes
            .iter()
            .map(|c| {
                let p = payload(&c.event);
                SubscriptionSpec {
                    event: c.event.clone(),
                    scope: scope_label(c.scope).to_string(),
                    fields: fields_of(lookup, &p),
                    payload: p,
                }
            })
            .collect(),
        publications: s.generates.iter().map(|g| event_schema(lookup, g)).collect(),
        requests: s
            .requests
            .iter()
            .map(|r| {
                let p = payload(&r.response);
                RequestSpec {
                    target: r.target.clone(),
                    response: r.response.clone(),
                    fields: fields_of(lookup, &p),
                    payload: p,
                }
            })
            .collect(),
        commands: s
            .commands
            .iter()
            .map(|c| CommandSpec {
                actuator: c.actuator.clone(),
                action: c.action.clone(),
                args: c
                    .args
                    .iter()
                    .map(|a| ArgSpec {
                        param: a.param.clone(),
                        value: format_expr(&a.value),
                    })
                    .collect(),
            })
            .collect(),
        compute_spec: s.compute.as_ref().map(|c| ComputeSpec {
            operator: c.op.keyword().to_string(),
            n: c.window,
            field: c.field.clone(),
        }),
        rule_ref: (has_rules && s.kind == ServiceKind::Custom).then(|| format!("rules/{}.rules", s.name)),
    }
}

pub fn sink_descriptor(i: &InteractorDecl, lookup: &RecordLookup<'_>) -> SinkDescriptor {
    SinkDescriptor {
        name: i.name.clone(),
        kind: "notify".to_string(),
        event: i.payload.event.clone(),
        payload: i.payload.payload.clone(),
        fields: fields_of(lookup, &i.payload.payload),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DescriptorError {
    #[error("descriptor `{name}`: unknown {what} `{value}`")]
    Unknown {
        name: String,
        what: &'static str,
        value: String,
    },
    #[error("descriptor `{name}`: cannot parse expression `{text}`")]
    BadExpr { name: String, text: String },
    #[error("descriptor `{name}`: missing {what}")]
    Missing { name: String, what: &'static str },
}

pub fn parse_descriptor_expr(name: &str, text: &str) -> Result<Expr, DescriptorError> {
    match parse_expr(text) {
        (Some(e), _) => Ok(e),
        (None, _) => Err(DescriptorError::BadExpr {
            name: name.to_string(),
            text: text.to_string(),
        }),
    }
}

impl ServiceDescriptor {
    /// Rebuilds the architecture declaration this descriptor was made from.
    /// Spans are synthetic.
    pub fn to_service_decl(&self) -> Result<ServiceDecl, DescriptorError> {
        let name = &self.service_name;
        let unknown = |what, value: &str| DescriptorError::Unknown {
            name: name.clone(),
            what,
            value: value.to_string(),
        };
        let kind = match self.kind.as_str() {
            "Common" => ServiceKind::Common,
            "Custom" => ServiceKind::Custom,
            other => return Err(unknown("service kind", other)),
        };
        let consumes = self
            .subscriptions
            .iter()
            .map(|s| {
                let scope = match s.scope.as_str() {
                    "sameLocation" => Scope::SameLocation,
                    "global" => Scope::Global,
                    other => return Err(unknown("scope", other)),
                };
                Ok(Consume {
                    event: s.event.clone(),
                    scope,
                    span: SourceSpan::synthetic(),
                })
            })
            .collect::<Result<_, _>>()?;
        let compute = match &self.compute_spec {
            None => None,
            Some(c) => Some(Compute {
                op: AggregateOp::from_keyword(&c.operator).ok_or_else(|| unknown("operator", &c.operator))?,
                window: c.n,
                field: c.field.clone(),
                span: SourceSpan::synthetic(),
            }),
        };
        let commands = self
            .commands
            .iter()
            .map(|c| {
                let args = c
                    .args
                    .iter()
                    .map(|a| {
                        Ok(ArgBinding {
                            param: a.param.clone(),
                            value: parse_descriptor_expr(name, &a.value)?,
                        })
                    })
                    .collect::<Result<_, DescriptorError>>()?;
                Ok(CommandDecl {
                    action: c.action.clone(),
                    actuator: c.actuator.clone(),
                    args,
                    span: SourceSpan::synthetic(),
                })
            })
            .collect::<Result<_, DescriptorError>>()?;
        Ok(ServiceDecl {
            name: name.clone(),
            kind,
            consumes,
            compute,
            requests: self
                .requests
                .iter()
                .map(|r| RequestDecl {
                    response: r.response.clone(),
                    target: r.target.clone(),
                    span: SourceSpan::synthetic(),
                })
                .collect(),
            generates: self
                .publications
                .iter()
                .map(|p| EventDecl {
                    event: p.event.clone(),
                    payload: p.payload.clone(),
                    span: SourceSpan::synthetic(),
                })
                .collect(),
            commands,
            span: SourceSpan::synthetic(),
        })
    }
}

impl DriverDescriptor {
    pub fn resource_kind(&self) -> Option<ResourceKind> {
        ResourceKind::from_label(&self.kind)
    }

    pub fn sample_period_ms(&self) -> Option<u64> {
        self.d.as_ref().map(millis)
    }

    pub fn duration_ms(&self) -> Option<u64> {
        self.k.as_ref().map(millis)
    }

    /// The sensor kind, for sensor descriptors.
    pub fn sensor_kind(&self) -> Result<Option<SensorKind>, DescriptorError> {
        let missing = |what| DescriptorError::Missing {
            name: self.name.clone(),
            what,
        };
        Ok(match self.resource_kind() {
            Some(ResourceKind::PeriodicSensor) => Some(SensorKind::Periodic {
                sample_period_ms: self.sample_period_ms().ok_or_else(|| missing("d"))?,
                duration_ms: self.duration_ms().ok_or_else(|| missing("k"))?,
            }),
            Some(ResourceKind::EventDrivenSensor) => {
                let text = self.condition.as_deref().ok_or_else(|| missing("condition"))?;
                Some(SensorKind::EventDriven {
                    condition: parse_descriptor_expr(&self.name, text)?,
                })
            }
            Some(ResourceKind::RequestBasedSensor) => {
                let k = self.access_key.as_ref().ok_or_else(|| missing("accessKey"))?;
                Some(SensorKind::RequestBased {
                    access_key: AccessKey {
                        name: k.name.clone(),
                        ty: k.ty,
                    },
                })
            }
            _ => None,
        })
    }
}
