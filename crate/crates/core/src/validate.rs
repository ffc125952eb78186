//! Whole-project consistency checks across the four specs and the rule set.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::diag::{has_errors, Diagnostic};
use crate::model::{
    action_signature, ActionKind, ArchitectureSpec, BinaryOp, DeploymentSpec, DomainSpec, EventDecl, Expr, ExprKind,
    FieldAssign, FieldBase, InteractorDecl, LogicRuleSet, Param, PrimType, RecordTypeDecl, ResourceKind,
    ServiceDecl, ServiceKind, ServiceRules, SensorKind, SourceSpan, Trigger, UnaryOp, UserInteractionSpec,
    ValueType,
};
use crate::parse::check_unique;

/// Everything a pipeline run works from.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Project {
    pub domain: DomainSpec,
    pub arch: ArchitectureSpec,
    pub ui: Option<UserInteractionSpec>,
    pub deploy: DeploymentSpec,
    pub rules: LogicRuleSet,
}

impl Project {
    /// Looks a record type up in the vocabulary first, then in the UI spec.
    pub fn record(&self, name: &str) -> Option<&RecordTypeDecl> {
        self.domain
            .record(name)
            .or_else(|| self.ui.as_ref().and_then(|u| u.record(name)))
    }

    pub fn interactors(&self) -> &[InteractorDecl] {
        self.ui.as_ref().map(|u| u.interactors.as_slice()).unwrap_or(&[])
    }

    pub fn interactor(&self, name: &str) -> Option<&InteractorDecl> {
        self.interactors().iter().find(|i| i.name == name)
    }

    /// Every place an event or response name is generated.
    pub fn event_decls(&self) -> impl Iterator<Item = &EventDecl> {
        self.domain
            .tags
            .iter()
            .flat_map(|t| t.generates.iter())
            .chain(self.domain.sensors.iter().map(|s| &s.generates))
            .chain(self.domain.storages.iter().map(|s| &s.generates))
            .chain(self.arch.services.iter().flat_map(|s| s.generates.iter()))
    }

    /// Payload record name of an event or response. When producers disagree
    /// the lexicographically smallest name wins, so the answer does not depend
    /// on declaration order.
    pub fn event_payload(&self, event: &str) -> Option<&str> {
        self.event_decls()
            .filter(|e| e.event == event)
            .map(|e| e.payload.as_str())
            .min()
    }

    pub fn event_record(&self, event: &str) -> Option<&RecordTypeDecl> {
        self.event_payload(event).and_then(|p| self.record(p))
    }
}

// ---------------------------------------------------------------------------
// Expression typing

/// Field types visible to an expression.
#[derive(Default)]
pub struct TypeEnv<'a> {
    /// Record for unprefixed names.
    pub bare: Option<&'a RecordTypeDecl>,
    pub event: Option<&'a RecordTypeDecl>,
    pub response: Option<&'a RecordTypeDecl>,
    pub state: Option<&'a BTreeMap<String, ValueType>>,
}

#[derive(Clone, Debug, PartialEq, Error)]
#[error("{message}")]
pub struct TypeError {
    pub message: String,
    pub span: SourceSpan,
    /// Set when the failure is a read of a state field nobody sets.
    pub unset_state: bool,
}

impl TypeError {
    fn new(message: impl Into<String>, span: &SourceSpan) -> Self {
        Self {
            message: message.into(),
            span: span.clone(),
            unset_state: false,
        }
    }
}

impl TypeEnv<'_> {
    fn lookup(&self, base: FieldBase, name: &str, span: &SourceSpan) -> Result<ValueType, TypeError> {
        if base == FieldBase::State {
            return match self.state.and_then(|s| s.get(name)) {
                Some(t) => Ok(*t),
                None => Err(TypeError {
                    unset_state: true,
                    ..TypeError::new(format!("state field `{name}` is never set"), span)
                }),
            };
        }
        let (record, what) = match base {
            FieldBase::Bare => (self.bare, "the current payload"),
            FieldBase::Event => (self.event, "`event`"),
            FieldBase::Response => (self.response, "`response`"),
            FieldBase::State => unreachable!(),
        };
        let Some(record) = record else {
            return Err(TypeError::new(format!("{what} is not available here"), span));
        };
        record
            .field(name)
            .map(|f| f.ty.value_type())
            .ok_or_else(|| TypeError::new(format!("record `{}` has no field `{name}`", record.name), span))
    }
}

/// Static type of `e`. Numbers never mix with strings or booleans; `long`
/// widens to `double` in arithmetic and comparisons.
pub fn type_of(e: &Expr, env: &TypeEnv<'_>) -> Result<ValueType, TypeError> {
    match &e.kind {
        ExprKind::Literal(l) => Ok(l.value_type()),
        ExprKind::Field { base, name } => env.lookup(*base, name, &e.span),
        ExprKind::Unary { op, operand } => {
            let t = type_of(operand, env)?;
            match op {
                UnaryOp::Not if t == ValueType::Bool => Ok(t),
                UnaryOp::Neg if t.is_numeric() => Ok(t),
                UnaryOp::Not => Err(TypeError::new(format!("`!` needs a bool operand, found {t}"), &e.span)),
                UnaryOp::Neg => Err(TypeError::new(format!("`-` needs a numeric operand, found {t}"), &e.span)),
            }
        }
        ExprKind::Binary { op, lhs, rhs } => {
            let l = type_of(lhs, env)?;
            let r = type_of(rhs, env)?;
            let mismatch =
                || TypeError::new(format!("operator `{}` cannot combine {l} and {r}", op.symbol()), &e.span);
            match op {
                BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div => {
                    if !(l.is_numeric() && r.is_numeric()) {
                        return Err(mismatch());
                    }
                    Ok(if l == ValueType::Long && r == ValueType::Long {
                        ValueType::Long
                    } else {
                        ValueType::Double
                    })
                }
                BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => {
                    if l.is_numeric() && r.is_numeric() {
                        Ok(ValueType::Bool)
                    } else {
                        Err(mismatch())
                    }
                }
                BinaryOp::Eq | BinaryOp::Ne => {
                    if l == r || (l.is_numeric() && r.is_numeric()) {
                        Ok(ValueType::Bool)
                    } else {
                        Err(mismatch())
                    }
                }
                BinaryOp::And | BinaryOp::Or => {
                    if l == ValueType::Bool && r == ValueType::Bool {
                        Ok(ValueType::Bool)
                    } else {
                        Err(mismatch())
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Validation

/// Cross-checks a project. Never fails; problems come back as diagnostics.
pub fn validate_project(p: &Project) -> Vec<Diagnostic> {
    let mut v = Validator { p, diags: Vec::new() };
    v.names();
    v.records();
    v.events();
    v.sensors();
    v.services();
    v.rules();
    v.deployment();
    let mut diags = v.diags;
    crate::diag::sort(&mut diags);
    diags
}

struct Validator<'a> {
    p: &'a Project,
    diags: Vec<Diagnostic>,
}

impl<'a> Validator<'a> {
    fn error(&mut self, code: &'static str, message: String, span: &SourceSpan) {
        self.diags.push(Diagnostic::error(code, message, span.clone()));
    }

    fn type_error(&mut self, e: TypeError) {
        self.diags.push(Diagnostic::error("TypeError", e.message, e.span));
    }

    /// Resources, services and interactors share one namespace because
    /// deployment `resources:` lists mix them.
    fn names(&mut self) {
        let p = self.p;
        let spans = p
            .domain
            .tags
            .iter()
            .map(|t| (t.name.as_str(), &t.span))
            .chain(p.domain.sensors.iter().map(|s| (s.name.as_str(), &s.span)))
            .chain(p.domain.actuators.iter().map(|a| (a.name.as_str(), &a.span)))
            .chain(p.domain.storages.iter().map(|s| (s.name.as_str(), &s.span)))
            .chain(p.arch.services.iter().map(|s| (s.name.as_str(), &s.span)))
            .chain(p.interactors().iter().map(|i| (i.name.as_str(), &i.span)));
        check_unique(&mut self.diags, "DuplicateName", "name", spans);
        check_unique(
            &mut self.diags,
            "DuplicateName",
            "record type",
            p.domain
                .records
                .iter()
                .chain(p.ui.iter().flat_map(|u| u.records.iter()))
                .map(|r| (r.name.as_str(), &r.span)),
        );
    }

    fn records(&mut self) {
        let p = self.p;
        let payloads = p.event_decls().chain(p.interactors().iter().map(|i| &i.payload));
        for ev in payloads {
            if p.record(&ev.payload).is_none() {
                self.error(
                    "UnknownRecord",
                    format!("record type `{}` is not declared", ev.payload),
                    &ev.span,
                );
            }
        }
    }

    fn events(&mut self) {
        let p = self.p;
        let mut payloads: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        let mut first_span: BTreeMap<&str, &SourceSpan> = BTreeMap::new();
        for ev in p.event_decls() {
            payloads.entry(&ev.event).or_default().insert(&ev.payload);
            first_span.entry(&ev.event).or_insert(&ev.span);
        }
        for (event, types) in &payloads {
            if types.len() > 1 {
                let list: Vec<_> = types.iter().map(|t| format!("`{t}`")).collect();
                self.error(
                    "EventTypeConflict",
                    format!("event `{event}` is generated with different payload types: {}", list.join(", ")),
                    first_span[event],
                );
            }
        }

        // Published events nobody listens to. Storage and request-based
        // sensor outputs are responses, not publications.
        let consumed: BTreeSet<&str> = p
            .arch
            .services
            .iter()
            .flat_map(|s| s.consumes.iter().map(|c| c.event.as_str()))
            .collect();
        let published = p
            .domain
            .tags
            .iter()
            .flat_map(|t| t.generates.iter())
            .chain(
                p.domain
                    .sensors
                    .iter()
                    .filter(|s| !matches!(s.kind, SensorKind::RequestBased { .. }))
                    .map(|s| &s.generates),
            )
            .chain(p.arch.services.iter().flat_map(|s| s.generates.iter()));
        for ev in published {
            if !consumed.contains(ev.event.as_str()) {
                self.diags.push(Diagnostic::warning(
                    "UnconsumedEvent",
                    format!("event `{}` is generated but never consumed", ev.event),
                    ev.span.clone(),
                ));
            }
        }
    }

    fn sensors(&mut self) {
        let p = self.p;
        for s in &p.domain.sensors {
            if let SensorKind::EventDriven { condition } = &s.kind {
                let env = TypeEnv {
                    bare: p.record(&s.generates.payload),
                    ..Default::default()
                };
                if env.bare.is_none() {
                    continue;
                }
                match type_of(condition, &env) {
                    Ok(ValueType::Bool) => {}
                    Ok(t) => self.error(
                        "TypeError",
                        format!("condition of `{}` must be bool, found {t}", s.name),
                        &condition.span,
                    ),
                    Err(e) => self.type_error(e),
                }
            }
        }
    }

    fn services(&mut self) {
        let p = self.p;
        for s in &p.arch.services {
            for c in &s.consumes {
                if p.event_payload(&c.event).is_none() {
                    self.error(
                        "UnresolvedEvent",
                        format!("service `{}` consumes `{}`, which nothing generates", s.name, c.event),
                        &c.span,
                    );
                }
            }
            for r in &s.requests {
                self.request_target(s, &r.target, Some(&r.response), &r.span);
            }
            if let Some(c) = &s.compute {
                self.aggregate(s, c);
            }
            for cmd in &s.commands {
                // Unprefixed names bind fields of whatever the service consumes.
                let consumed: Vec<_> = s.consumes.iter().filter_map(|c| p.event_record(&c.event)).collect();
                let bindings: Vec<FieldAssign> = cmd
                    .args
                    .iter()
                    .map(|a| FieldAssign {
                        field: a.param.clone(),
                        value: a.value.clone(),
                    })
                    .collect();
                let mut bad = Vec::new();
                let types: Vec<Option<ValueType>> = bindings
                    .iter()
                    .map(|b| {
                        let found = consumed.iter().find_map(|rec| {
                            let env = TypeEnv {
                                bare: Some(rec),
                                ..Default::default()
                            };
                            type_of(&b.value, &env).ok()
                        });
                        if found.is_none() {
                            let env = TypeEnv {
                                bare: consumed.first().copied(),
                                ..Default::default()
                            };
                            if let Err(e) = type_of(&b.value, &env) {
                                bad.push(e);
                            }
                        }
                        found
                    })
                    .collect();
                for e in bad {
                    self.type_error(e);
                }
                self.command_signature(&cmd.actuator, &cmd.action, &bindings, &types, &cmd.span);
            }
        }
    }

    fn request_target(&mut self, s: &ServiceDecl, target: &str, response: Option<&str>, span: &SourceSpan) {
        let p = self.p;
        let generated = match p.domain.resource_kind(target) {
            Some(ResourceKind::Storage) => p.domain.storage(target).map(|x| &x.generates),
            Some(ResourceKind::RequestBasedSensor) => p.domain.sensor(target).map(|x| &x.generates),
            _ => {
                self.error(
                    "InvalidRequestTarget",
                    format!(
                        "service `{}` requests `{target}`, which is not a storage or request-based sensor",
                        s.name
                    ),
                    span,
                );
                return;
            }
        };
        if let (Some(resp), Some(g)) = (response, generated) {
            if g.event != resp {
                self.error(
                    "ResponseMismatch",
                    format!("`{target}` answers with `{}`, not `{resp}`", g.event),
                    span,
                );
            }
        }
    }

    fn aggregate(&mut self, s: &ServiceDecl, c: &crate::model::Compute) {
        let p = self.p;
        let records = s
            .consumes
            .iter()
            .filter_map(|x| p.event_record(&x.event).map(|r| (x.event.as_str(), r)))
            .chain(s.generates.iter().filter_map(|g| p.record(&g.payload).map(|r| (g.event.as_str(), r))));
        for (event, rec) in records {
            match rec.field(&c.field) {
                Some(f) if f.ty != PrimType::String => {}
                Some(_) => self.error(
                    "AggregateField",
                    format!("field `{}` of `{}` is not numeric", c.field, rec.name),
                    &c.span,
                ),
                None => self.error(
                    "AggregateField",
                    format!("payload `{}` of `{event}` has no field `{}`", rec.name, c.field),
                    &c.span,
                ),
            }
        }
    }

    /// Checks a command's bindings against the actuator's declared action.
    /// `types` holds the already computed type of each binding, when known.
    fn command_signature(
        &mut self,
        actuator: &str,
        action: &str,
        args: &[FieldAssign],
        types: &[Option<ValueType>],
        span: &SourceSpan,
    ) {
        let params: &[Param] = match action_signature(&self.p.domain, actuator, action) {
            Ok(params) => params,
            Err(e) => {
                self.error("CommandMismatch", e.to_string(), span);
                return;
            }
        };
        for (arg, ty) in args.iter().zip(types) {
            match params.iter().find(|p| p.name == arg.field) {
                None => self.error(
                    "CommandMismatch",
                    format!("`{actuator}.{action}` has no parameter `{}`", arg.field),
                    &arg.value.span,
                ),
                Some(param) => {
                    if let Some(t) = ty {
                        if !t.assignable_to(param.ty) {
                            self.error(
                                "CommandMismatch",
                                format!(
                                    "argument `{}` of `{actuator}.{action}` expects {}, found {t}",
                                    param.name, param.ty
                                ),
                                &arg.value.span,
                            );
                        }
                    }
                }
            }
        }
        for param in params {
            if !args.iter().any(|a| a.field == param.name) {
                self.error(
                    "CommandMismatch",
                    format!("`{actuator}.{action}` is missing argument `{}`", param.name),
                    span,
                );
            }
        }
    }

    fn rules(&mut self) {
        let p = self.p;
        for sr in &p.rules.services {
            let Some(svc) = p.arch.service(&sr.service) else {
                self.error(
                    "UnknownService",
                    format!("rules given for undeclared service `{}`", sr.service),
                    &sr.span,
                );
                continue;
            };
            if svc.kind == ServiceKind::Common {
                self.error(
                    "RulesForCommon",
                    format!("Common service `{}` is fully generated and takes no rules", svc.name),
                    &sr.span,
                );
                continue;
            }
            let state = self.infer_state(svc, sr);
            for rule in &sr.rules {
                self.rule(svc, rule, &state);
            }
        }
    }

    fn trigger_env(&self, svc: &ServiceDecl, trigger: &Trigger) -> Option<(&'a RecordTypeDecl, bool)> {
        let p = self.p;
        match trigger {
            Trigger::OnEvent(e) if svc.consumes_event(e) => p.event_record(e).map(|r| (r, false)),
            Trigger::OnResponse(r) if svc.requests.iter().any(|q| &q.response == r) => {
                p.event_record(r).map(|rec| (rec, true))
            }
            _ => None,
        }
    }

    /// State field types from every `set` in the service, iterated so that
    /// a `set` may read fields assigned by another one.
    fn infer_state(&self, svc: &ServiceDecl, sr: &ServiceRules) -> BTreeMap<String, ValueType> {
        let mut state: BTreeMap<String, ValueType> = BTreeMap::new();
        loop {
            let mut changed = false;
            for rule in &sr.rules {
                let Some((rec, is_response)) = self.trigger_env(svc, &rule.trigger) else {
                    continue;
                };
                let env = rule_env(rec, is_response, &state);
                let mut found = Vec::new();
                for a in &rule.actions {
                    if let ActionKind::SetState { field, value } = &a.kind {
                        if let Ok(t) = type_of(value, &env) {
                            found.push((field.clone(), t));
                        }
                    }
                }
                for (field, t) in found {
                    let merged = match state.get(&field) {
                        None => t,
                        Some(&old) if old == t => old,
                        Some(&old) if old.is_numeric() && t.is_numeric() => ValueType::Double,
                        // Conflict is reported when the rule itself is checked.
                        Some(&old) => old,
                    };
                    if state.get(&field) != Some(&merged) {
                        state.insert(field, merged);
                        changed = true;
                    }
                }
            }
            if !changed {
                return state;
            }
        }
    }

    fn rule(&mut self, svc: &ServiceDecl, rule: &crate::model::Rule, state: &BTreeMap<String, ValueType>) {
        let p = self.p;
        match &rule.trigger {
            Trigger::OnEvent(e) if !svc.consumes_event(e) => {
                self.error(
                    "UnhandledTrigger",
                    format!("service `{}` does not consume `{e}`", svc.name),
                    &rule.span,
                );
                return;
            }
            Trigger::OnResponse(r) if !svc.requests.iter().any(|q| &q.response == r) => {
                self.error(
                    "UnhandledTrigger",
                    format!("service `{}` never requests a `{r}` response", svc.name),
                    &rule.span,
                );
                return;
            }
            _ => {}
        }
        let Some((rec, is_response)) = self.trigger_env(svc, &rule.trigger) else {
            return; // unresolved event, already reported
        };
        let env = rule_env(rec, is_response, state);
        if let Some(g) = &rule.guard {
            match type_of(g, &env) {
                Ok(ValueType::Bool) => {}
                Ok(t) => self.error("TypeError", format!("guard must be bool, found {t}"), &g.span),
                Err(e) => self.type_error(e),
            }
        }
        for action in &rule.actions {
            match &action.kind {
                ActionKind::Emit { event, fields } => {
                    let Some(decl) = svc.generated(event) else {
                        self.error(
                            "UndeclaredEmit",
                            format!("service `{}` does not declare `generate {event}`", svc.name),
                            &action.span,
                        );
                        continue;
                    };
                    if let Some(target) = p.record(&decl.payload) {
                        self.assigns(fields, target, &env, &action.span);
                    }
                }
                ActionKind::Command {
                    actuator,
                    action: act,
                    args,
                } => {
                    if !svc.commands.iter().any(|c| &c.actuator == actuator && &c.action == act) {
                        self.error(
                            "UndeclaredCommand",
                            format!("service `{}` does not declare `command {act}() to {actuator}`", svc.name),
                            &action.span,
                        );
                    }
                    let types: Vec<_> = args
                        .iter()
                        .map(|a| match type_of(&a.value, &env) {
                            Ok(t) => Some(t),
                            Err(e) => {
                                self.type_error(e);
                                None
                            }
                        })
                        .collect();
                    self.command_signature(actuator, act, args, &types, &action.span);
                }
                ActionKind::Request { target, key } => {
                    if !svc.requests.iter().any(|r| &r.target == target) {
                        self.error(
                            "UndeclaredRequest",
                            format!("service `{}` does not declare a request to `{target}`", svc.name),
                            &action.span,
                        );
                    }
                    self.request_target(svc, target, None, &action.span);
                    let key_ty = p
                        .domain
                        .storage(target)
                        .map(|s| s.access_key.ty)
                        .or_else(|| match p.domain.sensor(target).map(|s| &s.kind) {
                            Some(SensorKind::RequestBased { access_key }) => Some(access_key.ty),
                            _ => None,
                        });
                    match (type_of(key, &env), key_ty) {
                        (Err(e), _) => self.type_error(e),
                        (Ok(t), Some(k)) if !t.assignable_to(k) => self.error(
                            "TypeError",
                            format!("`{target}` is keyed by {k}, found {t}"),
                            &key.span,
                        ),
                        _ => {}
                    }
                }
                ActionKind::Notify { interactor, fields } => {
                    let Some(i) = p.interactor(interactor) else {
                        self.error(
                            "UnknownInteractor",
                            format!("interactor `{interactor}` is not declared in the user-interaction spec"),
                            &action.span,
                        );
                        continue;
                    };
                    if let Some(target) = p.record(&i.payload.payload) {
                        self.assigns(fields, target, &env, &action.span);
                    }
                }
                ActionKind::SetState { field, value } => match type_of(value, &env) {
                    Err(e) => self.type_error(e),
                    Ok(t) => {
                        let declared = state.get(field).copied();
                        let ok = declared == Some(t)
                            || (declared == Some(ValueType::Double) && t == ValueType::Long);
                        if !ok {
                            self.error(
                                "TypeError",
                                format!(
                                    "state field `{field}` is set to {t} here but to {} elsewhere",
                                    declared.map(|d| d.to_string()).unwrap_or_else(|| "?".into())
                                ),
                                &value.span,
                            );
                        }
                    }
                },
            }
        }
    }

    /// `fields` must assign every field of `target` exactly once with a
    /// compatible type.
    fn assigns(&mut self, fields: &[FieldAssign], target: &RecordTypeDecl, env: &TypeEnv<'_>, span: &SourceSpan) {
        for a in fields {
            let ty = match type_of(&a.value, env) {
                Ok(t) => Some(t),
                Err(e) => {
                    self.type_error(e);
                    None
                }
            };
            match target.field(&a.field) {
                None => self.error(
                    "UnknownField",
                    format!("record `{}` has no field `{}`", target.name, a.field),
                    &a.value.span,
                ),
                Some(f) => {
                    if let Some(t) = ty {
                        if !t.assignable_to(f.ty) {
                            self.error(
                                "TypeError",
                                format!("field `{}` expects {}, found {t}", f.name, f.ty),
                                &a.value.span,
                            );
                        }
                    }
                }
            }
        }
        for f in &target.fields {
            if !fields.iter().any(|a| a.field == f.name) {
                self.error(
                    "MissingField",
                    format!("field `{}` of `{}` is not assigned", f.name, target.name),
                    span,
                );
            }
        }
    }

    fn deployment(&mut self) {
        let p = self.p;
        check_unique(
            &mut self.diags,
            "DuplicateDevice",
            "device",
            p.deploy.devices.iter().map(|d| (d.name.as_str(), &d.span)),
        );
        for d in &p.deploy.devices {
            for r in &d.resources {
                let known = p.domain.resource_kind(&r.name).is_some()
                    || p.arch.service(&r.name).is_some()
                    || p.interactor(&r.name).is_some();
                if !known {
                    self.error(
                        "UnknownResource",
                        format!("device `{}` lists `{}`, which is not declared anywhere", d.name, r.name),
                        &r.span,
                    );
                }
                if p.domain.storage(&r.name).is_some() && d.database.is_none() {
                    self.error(
                        "MissingDatabase",
                        format!("device `{}` hosts storage `{}` but declares no database", d.name, r.name),
                        &d.span,
                    );
                }
            }
        }
        let drivers = p
            .domain
            .tags
            .iter()
            .map(|t| (t.name.as_str(), &t.span))
            .chain(p.domain.sensors.iter().map(|s| (s.name.as_str(), &s.span)))
            .chain(p.domain.actuators.iter().map(|a| (a.name.as_str(), &a.span)))
            .chain(p.domain.storages.iter().map(|s| (s.name.as_str(), &s.span)));
        for (name, span) in drivers {
            let hosts: Vec<_> = p.deploy.hosts_of(name).map(|d| d.name.as_str()).collect();
            match hosts.len() {
                0 => self.error(
                    "UnplacedDriver",
                    format!("resource `{name}` is not placed on any device"),
                    span,
                ),
                1 => {}
                _ => {
                    let mut hosts = hosts;
                    hosts.sort_unstable();
                    self.error(
                        "DuplicatePlacement",
                        format!("resource `{name}` is placed on several devices: {}", hosts.join(", ")),
                        span,
                    )
                }
            }
        }
    }
}

fn rule_env<'a>(
    rec: &'a RecordTypeDecl,
    is_response: bool,
    state: &'a BTreeMap<String, ValueType>,
) -> TypeEnv<'a> {
    TypeEnv {
        bare: Some(rec),
        event: (!is_response).then_some(rec),
        response: is_response.then_some(rec),
        state: Some(state),
    }
}

// ---------------------------------------------------------------------------
// Dataflow graph

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Resource(ResourceKind),
    Service(ServiceKind),
    Interactor,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    Event(String),
    Request(String),
    Response(String),
    Command(String),
    Notify(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub kind: EdgeKind,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DataflowGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

impl DataflowGraph {
    /// Distinct `(from, to)` pairs.
    pub fn links(&self) -> BTreeSet<(&str, &str)> {
        self.edges.iter().map(|e| (e.from.as_str(), e.to.as_str())).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("project has {0} validation error(s)")]
    InvalidProject(usize),
}

/// Who talks to whom. Event edges come from the architecture, notify edges
/// from the rule set.
pub fn dataflow_graph(p: &Project) -> Result<DataflowGraph, GraphError> {
    let diags = validate_project(p);
    if has_errors(&diags) {
        return Err(GraphError::InvalidProject(diags.iter().filter(|d| d.is_error()).count()));
    }
    let mut g = DataflowGraph::default();
    let d = &p.domain;
    for t in &d.tags {
        g.nodes.push(node(&t.name, NodeKind::Resource(ResourceKind::Tag)));
    }
    for s in &d.sensors {
        g.nodes.push(node(&s.name, NodeKind::Resource(s.resource_kind())));
    }
    for a in &d.actuators {
        g.nodes.push(node(&a.name, NodeKind::Resource(ResourceKind::Actuator)));
    }
    for s in &d.storages {
        g.nodes.push(node(&s.name, NodeKind::Resource(ResourceKind::Storage)));
    }
    for s in &p.arch.services {
        g.nodes.push(node(&s.name, NodeKind::Service(s.kind)));
    }
    for i in p.interactors() {
        g.nodes.push(node(&i.name, NodeKind::Interactor));
    }

    let mut edges = BTreeSet::new();
    for s in &p.arch.services {
        for c in &s.consumes {
            for producer in crate::model::event_producers(d, &p.arch, &c.event) {
                edges.insert(Edge {
                    from: producer,
                    to: s.name.clone(),
                    kind: EdgeKind::Event(c.event.clone()),
                });
            }
        }
        for r in &s.requests {
            edges.insert(edge(&s.name, &r.target, EdgeKind::Request(r.response.clone())));
            edges.insert(edge(&r.target, &s.name, EdgeKind::Response(r.response.clone())));
        }
        for c in &s.commands {
            edges.insert(edge(&s.name, &c.actuator, EdgeKind::Command(c.action.clone())));
        }
        if let Some(sr) = p.rules.for_service(&s.name) {
            for a in sr.rules.iter().flat_map(|r| r.actions.iter()) {
                if let ActionKind::Notify { interactor, .. } = &a.kind {
                    let event = p.interactor(interactor).map(|i| i.payload.event.clone()).unwrap_or_default();
                    edges.insert(edge(&s.name, interactor, EdgeKind::Notify(event)));
                }
            }
        }
    }
    g.edges = edges.into_iter().collect();
    Ok(g)
}

fn node(name: &str, kind: NodeKind) -> Node {
    Node {
        name: name.to_string(),
        kind,
    }
}

fn edge(from: &str, to: &str, kind: EdgeKind) -> Edge {
    Edge {
        from: from.to_string(),
        to: to.to_string(),
        kind,
    }
}
