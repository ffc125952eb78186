//! Abstract syntax shared by every pipeline stage.
//!
//! All four specification languages and the logic-rule language parse into
//! the values defined here. Values are immutable after construction and carry
//! a [`SourceSpan`] back into the file they came from.
//!
//! Structural equality (`==`) ignores spans so that a spec parsed from
//! canonical text compares equal to the spec it was formatted from.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A position range inside a source file.
///
/// `line` and `column` are 1-based; `column` counts characters, not bytes.
#[derive(Clone, Debug)]
pub struct SourceSpan {
    pub file: Arc<str>,
    pub line: u32,
    pub column: u32,
    pub length: u32,
}

impl SourceSpan {
    pub fn new(file: Arc<str>, line: u32, column: u32, length: u32) -> Self {
        debug_assert!(line >= 1 && column >= 1);
        Self {
            file,
            line,
            column,
            length,
        }
    }

    /// A span for values built in code rather than parsed.
    pub fn synthetic() -> Self {
        Self::new(Arc::from("<generated>"), 1, 1, 0)
    }

    /// Exact positional comparison (the `PartialEq` impl deliberately ignores positions).
    pub fn same_position(&self, other: &SourceSpan) -> bool {
        self.file == other.file
            && self.line == other.line
            && self.column == other.column
            && self.length == other.length
    }
}

impl Default for SourceSpan {
    fn default() -> Self {
        Self::synthetic()
    }
}

// Spans are metadata: two syntax trees are structurally equal regardless of
// where they were parsed from.
impl PartialEq for SourceSpan {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

/// Field types allowed in records, action parameters and access keys.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PrimType {
    #[serde(rename = "double")]
    Double,
    #[serde(rename = "long")]
    Long,
    String,
}

impl PrimType {
    pub fn keyword(self) -> &'static str {
        match self {
            PrimType::Double => "double",
            PrimType::Long => "long",
            PrimType::String => "String",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        match word {
            "double" => Some(PrimType::Double),
            "long" => Some(PrimType::Long),
            "String" => Some(PrimType::String),
            _ => None,
        }
    }

    pub fn value_type(self) -> ValueType {
        match self {
            PrimType::Double => ValueType::Double,
            PrimType::Long => ValueType::Long,
            PrimType::String => ValueType::String,
        }
    }
}

impl fmt::Display for PrimType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Types an expression can take. `Bool` only arises from comparisons and
/// logical operators; records never hold booleans.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ValueType {
    Double,
    Long,
    String,
    Bool,
}

impl ValueType {
    pub fn is_numeric(self) -> bool {
        matches!(self, ValueType::Double | ValueType::Long)
    }

    /// Whether a value of type `self` may be stored where `target` is declared.
    /// Longs widen to doubles; nothing else converts.
    pub fn assignable_to(self, target: PrimType) -> bool {
        match (self, target) {
            (ValueType::Long, PrimType::Long | PrimType::Double) => true,
            (ValueType::Double, PrimType::Double) => true,
            (ValueType::String, PrimType::String) => true,
            _ => false,
        }
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValueType::Double => "double",
            ValueType::Long => "long",
            ValueType::String => "String",
            ValueType::Bool => "bool",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub name: String,
    pub ty: PrimType,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecordTypeDecl {
    pub name: String,
    pub fields: Vec<Field>,
    pub span: SourceSpan,
}

impl RecordTypeDecl {
    pub fn field(&self, name: &str) -> Option<&Field> {
        self.fields.iter().find(|f| f.name == name)
    }
}

/// An `(eventName, payloadType)` pair as written after `generate` or `notify`.
#[derive(Clone, Debug, PartialEq)]
pub struct EventDecl {
    pub event: String,
    pub payload: String,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AccessKey {
    pub name: String,
    pub ty: PrimType,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SensorKind {
    /// Samples every `sample_period_ms` for `duration_ms`.
    Periodic {
        sample_period_ms: u64,
        duration_ms: u64,
    },
    /// Publishes when `condition` becomes true.
    EventDriven { condition: Expr },
    /// Answers requests keyed by `access_key`.
    RequestBased { access_key: AccessKey },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensorDecl {
    pub name: String,
    pub kind: SensorKind,
    pub generates: EventDecl,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub ty: PrimType,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActionDecl {
    pub name: String,
    pub params: Vec<Param>,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActuatorDecl {
    pub name: String,
    pub actions: Vec<ActionDecl>,
    pub span: SourceSpan,
}

impl ActuatorDecl {
    pub fn action(&self, name: &str) -> Option<&ActionDecl> {
        self.actions.iter().find(|a| a.name == name)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StorageDecl {
    pub name: String,
    pub generates: EventDecl,
    pub access_key: AccessKey,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TagDecl {
    pub name: String,
    pub generates: Vec<EventDecl>,
    pub span: SourceSpan,
}

/// Which family a domain resource belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ResourceKind {
    Tag,
    PeriodicSensor,
    EventDrivenSensor,
    RequestBasedSensor,
    Actuator,
    Storage,
}

impl ResourceKind {
    pub fn label(self) -> &'static str {
        match self {
            ResourceKind::Tag => "tag",
            ResourceKind::PeriodicSensor => "periodic",
            ResourceKind::EventDrivenSensor => "eventDriven",
            ResourceKind::RequestBasedSensor => "requestBased",
            ResourceKind::Actuator => "actuator",
            ResourceKind::Storage => "storage",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        [
            ResourceKind::Tag,
            ResourceKind::PeriodicSensor,
            ResourceKind::EventDrivenSensor,
            ResourceKind::RequestBasedSensor,
            ResourceKind::Actuator,
            ResourceKind::Storage,
        ]
        .into_iter()
        .find(|k| k.label() == label)
    }
}

impl SensorDecl {
    pub fn resource_kind(&self) -> ResourceKind {
        match self.kind {
            SensorKind::Periodic { .. } => ResourceKind::PeriodicSensor,
            SensorKind::EventDriven { .. } => ResourceKind::EventDrivenSensor,
            SensorKind::RequestBased { .. } => ResourceKind::RequestBasedSensor,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DomainSpec {
    pub records: Vec<RecordTypeDecl>,
    pub tags: Vec<TagDecl>,
    pub sensors: Vec<SensorDecl>,
    pub actuators: Vec<ActuatorDecl>,
    pub storages: Vec<StorageDecl>,
}

impl DomainSpec {
    pub fn record(&self, name: &str) -> Option<&RecordTypeDecl> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn sensor(&self, name: &str) -> Option<&SensorDecl> {
        self.sensors.iter().find(|s| s.name == name)
    }

    pub fn actuator(&self, name: &str) -> Option<&ActuatorDecl> {
        self.actuators.iter().find(|a| a.name == name)
    }

    pub fn storage(&self, name: &str) -> Option<&StorageDecl> {
        self.storages.iter().find(|s| s.name == name)
    }

    pub fn tag(&self, name: &str) -> Option<&TagDecl> {
        self.tags.iter().find(|t| t.name == name)
    }

    pub fn resource_kind(&self, name: &str) -> Option<ResourceKind> {
        if self.tag(name).is_some() {
            Some(ResourceKind::Tag)
        } else if let Some(s) = self.sensor(name) {
            Some(s.resource_kind())
        } else if self.actuator(name).is_some() {
            Some(ResourceKind::Actuator)
        } else if self.storage(name).is_some() {
            Some(ResourceKind::Storage)
        } else {
            None
        }
    }

    /// Every resource name in declaration order: tags, sensors, actuators, storages.
    pub fn resource_names(&self) -> impl Iterator<Item = &str> {
        self.tags
            .iter()
            .map(|t| t.name.as_str())
            .chain(self.sensors.iter().map(|s| s.name.as_str()))
            .chain(self.actuators.iter().map(|a| a.name.as_str()))
            .chain(self.storages.iter().map(|s| s.name.as_str()))
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
            && self.tags.is_empty()
            && self.sensors.is_empty()
            && self.actuators.is_empty()
            && self.storages.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scope {
    SameLocation,
    Global,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Consume {
    pub event: String,
    pub scope: Scope,
    pub span: SourceSpan,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AggregateOp {
    AvgBySample,
    SumBySample,
    CountBySample,
}

impl AggregateOp {
    pub fn keyword(self) -> &'static str {
        match self {
            AggregateOp::AvgBySample => "AVG_BY_SAMPLE",
            AggregateOp::SumBySample => "SUM_BY_SAMPLE",
            AggregateOp::CountBySample => "COUNT_BY_SAMPLE",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        match word {
            "AVG_BY_SAMPLE" => Some(AggregateOp::AvgBySample),
            "SUM_BY_SAMPLE" => Some(AggregateOp::SumBySample),
            "COUNT_BY_SAMPLE" => Some(AggregateOp::CountBySample),
            _ => None,
        }
    }
}

impl fmt::Display for AggregateOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// `COMPUTE <op>(<window>) on <field>`.
#[derive(Clone, Debug, PartialEq)]
pub struct Compute {
    pub op: AggregateOp,
    pub window: u32,
    pub field: String,
    pub span: SourceSpan,
}

/// `request <response> to <target>`.
#[derive(Clone, Debug, PartialEq)]
pub struct RequestDecl {
    pub response: String,
    pub target: String,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArgBinding {
    pub param: String,
    pub value: Expr,
}

/// `command <action>(<bindings>) to <actuator>`.
#[derive(Clone, Debug, PartialEq)]
pub struct CommandDecl {
    pub action: String,
    pub actuator: String,
    pub args: Vec<ArgBinding>,
    pub span: SourceSpan,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ServiceKind {
    Common,
    Custom,
}

impl ServiceKind {
    pub fn keyword(self) -> &'static str {
        match self {
            ServiceKind::Common => "Common",
            ServiceKind::Custom => "Custom",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ServiceDecl {
    pub name: String,
    pub kind: ServiceKind,
    pub consumes: Vec<Consume>,
    pub compute: Option<Compute>,
    pub requests: Vec<RequestDecl>,
    pub generates: Vec<EventDecl>,
    pub commands: Vec<CommandDecl>,
    pub span: SourceSpan,
}

impl ServiceDecl {
    pub fn consumes_event(&self, event: &str) -> bool {
        self.consumes.iter().any(|c| c.event == event)
    }

    pub fn generated(&self, event: &str) -> Option<&EventDecl> {
        self.generates.iter().find(|g| g.event == event)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ArchitectureSpec {
    pub services: Vec<ServiceDecl>,
}

impl ArchitectureSpec {
    pub fn service(&self, name: &str) -> Option<&ServiceDecl> {
        self.services.iter().find(|s| s.name == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InteractorKind {
    Notify,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InteractorDecl {
    pub name: String,
    pub kind: InteractorKind,
    pub payload: EventDecl,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct UserInteractionSpec {
    pub records: Vec<RecordTypeDecl>,
    pub interactors: Vec<InteractorDecl>,
}

impl UserInteractionSpec {
    pub fn interactor(&self, name: &str) -> Option<&InteractorDecl> {
        self.interactors.iter().find(|i| i.name == name)
    }

    pub fn record(&self, name: &str) -> Option<&RecordTypeDecl> {
        self.records.iter().find(|r| r.name == name)
    }
}

/// A name with the span of the place it was written.
#[derive(Clone, Debug, PartialEq)]
pub struct NameRef {
    pub name: String,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeviceDecl {
    pub name: String,
    /// Slash-separated region path, e.g. `home/room#1`.
    pub location: String,
    pub resources: Vec<NameRef>,
    pub platform: Option<String>,
    pub protocol: String,
    pub database: Option<String>,
    pub span: SourceSpan,
}

impl DeviceDecl {
    pub fn hosts(&self, name: &str) -> bool {
        self.resources.iter().any(|r| r.name == name)
    }

    /// Devices that declare a platform can run computational services.
    pub fn is_compute_eligible(&self) -> bool {
        self.platform.is_some()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DeploymentSpec {
    pub devices: Vec<DeviceDecl>,
}

impl DeploymentSpec {
    pub fn device(&self, name: &str) -> Option<&DeviceDecl> {
        self.devices.iter().find(|d| d.name == name)
    }

    /// Devices whose `resources` list names `resource`, in declaration order.
    pub fn hosts_of<'a>(&'a self, resource: &'a str) -> impl Iterator<Item = &'a DeviceDecl> + 'a {
        self.devices.iter().filter(move |d| d.hosts(resource))
    }
}

// ---------------------------------------------------------------------------
// Expressions

#[derive(Clone, Debug, PartialEq)]
pub enum Literal {
    Long(i64),
    Double(f64),
    Str(String),
    Bool(bool),
}

impl Literal {
    pub fn value_type(&self) -> ValueType {
        match self {
            Literal::Long(_) => ValueType::Long,
            Literal::Double(_) => ValueType::Double,
            Literal::Str(_) => ValueType::String,
            Literal::Bool(_) => ValueType::Bool,
        }
    }
}

/// Where a field reference looks its name up.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FieldBase {
    /// A bare name: the reading under test in a sensor condition, or the
    /// triggering payload inside a rule.
    Bare,
    Event,
    State,
    Response,
}

impl FieldBase {
    pub fn prefix(self) -> Option<&'static str> {
        match self {
            FieldBase::Bare => None,
            FieldBase::Event => Some("event"),
            FieldBase::State => Some("state"),
            FieldBase::Response => Some("response"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Not,
    Neg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::And => "&&",
            BinaryOp::Or => "||",
        }
    }

    /// Binding power; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Lt
            | BinaryOp::Le
            | BinaryOp::Gt
            | BinaryOp::Ge
            | BinaryOp::Eq
            | BinaryOp::Ne => 3,
            BinaryOp::Add | BinaryOp::Sub => 4,
            BinaryOp::Mul | BinaryOp::Div => 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    Literal(Literal),
    Field { base: FieldBase, name: String },
    Unary { op: UnaryOp, operand: Box<Expr> },
    Binary { op: BinaryOp, lhs: Box<Expr>, rhs: Box<Expr> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: SourceSpan,
}

impl Expr {
    pub fn new(kind: ExprKind, span: SourceSpan) -> Self {
        Self { kind, span }
    }

    pub fn literal(lit: Literal) -> Self {
        Self::new(ExprKind::Literal(lit), SourceSpan::synthetic())
    }

    pub fn field(base: FieldBase, name: impl Into<String>) -> Self {
        Self::new(
            ExprKind::Field {
                base,
                name: name.into(),
            },
            SourceSpan::synthetic(),
        )
    }

    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Self {
        Self::new(
            ExprKind::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            },
            SourceSpan::synthetic(),
        )
    }

    pub fn unary(op: UnaryOp, operand: Expr) -> Self {
        Self::new(
            ExprKind::Unary {
                op,
                operand: Box::new(operand),
            },
            SourceSpan::synthetic(),
        )
    }

    /// Visits every field reference in the tree.
    pub fn field_refs(&self) -> Vec<(FieldBase, &str)> {
        let mut out = Vec::new();
        self.collect_fields(&mut out);
        out
    }

    fn collect_fields<'a>(&'a self, out: &mut Vec<(FieldBase, &'a str)>) {
        match &self.kind {
            ExprKind::Literal(_) => {}
            ExprKind::Field { base, name } => out.push((*base, name)),
            ExprKind::Unary { operand, .. } => operand.collect_fields(out),
            ExprKind::Binary { lhs, rhs, .. } => {
                lhs.collect_fields(out);
                rhs.collect_fields(out);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Logic rules

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Trigger {
    OnEvent(String),
    OnResponse(String),
}

impl Trigger {
    pub fn name(&self) -> &str {
        match self {
            Trigger::OnEvent(n) | Trigger::OnResponse(n) => n,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldAssign {
    pub field: String,
    pub value: Expr,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ActionKind {
    Emit {
        event: String,
        fields: Vec<FieldAssign>,
    },
    Command {
        actuator: String,
        action: String,
        args: Vec<FieldAssign>,
    },
    Request {
        target: String,
        key: Expr,
    },
    Notify {
        interactor: String,
        fields: Vec<FieldAssign>,
    },
    SetState {
        field: String,
        value: Expr,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RuleAction {
    pub kind: ActionKind,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub trigger: Trigger,
    pub guard: Option<Expr>,
    pub actions: Vec<RuleAction>,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ServiceRules {
    pub service: String,
    pub rules: Vec<Rule>,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LogicRuleSet {
    pub services: Vec<ServiceRules>,
}

impl LogicRuleSet {
    pub fn for_service(&self, name: &str) -> Option<&ServiceRules> {
        self.services.iter().find(|s| s.service == name)
    }
}

// ---------------------------------------------------------------------------
// Lookups

/// Every tag, sensor or service whose `generates` list contains `event`,
/// in declaration order (tags, sensors, then services).
pub fn event_producers(domain: &DomainSpec, arch: &ArchitectureSpec, event: &str) -> Vec<String> {
    let tags = domain
        .tags
        .iter()
        .filter(|t| t.generates.iter().any(|g| g.event == event))
        .map(|t| t.name.clone());
    let sensors = domain
        .sensors
        .iter()
        .filter(|s| s.generates.event == event)
        .map(|s| s.name.clone());
    let services = arch
        .services
        .iter()
        .filter(|s| s.generated(event).is_some())
        .map(|s| s.name.clone());
    tags.chain(sensors).chain(services).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SignatureError {
    #[error("unknown actuator `{0}`")]
    UnknownActuator(String),
    #[error("actuator `{actuator}` has no action `{action}`")]
    UnknownAction { actuator: String, action: String },
}

/// Declared parameter list of `actuator.action`.
pub fn action_signature<'a>(
    domain: &'a DomainSpec,
    actuator: &str,
    action: &str,
) -> Result<&'a [Param], SignatureError> {
    let decl = domain
        .actuator(actuator)
        .ok_or_else(|| SignatureError::UnknownActuator(actuator.to_string()))?;
    decl.action(action)
        .map(|a| a.params.as_slice())
        .ok_or_else(|| SignatureError::UnknownAction {
            actuator: actuator.to_string(),
            action: action.to_string(),
        })
}
