//! Canonical source text for every spec language.
//!
//! Output uses two-space indentation and LF line endings, keeps declaration
//! order, and always reparses to a structurally equal value.

use std::fmt::Write;

use crate::model::{
    ActionKind, ArchitectureSpec, DeploymentSpec, DomainSpec, Expr, ExprKind, FieldAssign,
    LogicRuleSet, RecordTypeDecl, Rule, Scope, SensorDecl, SensorKind, Trigger, UnaryOp,
    UserInteractionSpec,
};
use crate::parse::lexer::quote;

/// Anything that has a canonical textual form.
pub trait FormatSpec {
    fn format_spec(&self) -> String;
}

pub fn format_spec<T: FormatSpec + ?Sized>(spec: &T) -> String {
    spec.format_spec()
}

struct Out {
    buf: String,
    depth: usize,
}

impl Out {
    fn new() -> Self {
        Self {
            buf: String::new(),
            depth: 0,
        }
    }

    fn line(&mut self, text: impl AsRef<str>) {
        for _ in 0..self.depth {
            self.buf.push_str("  ");
        }
        self.buf.push_str(text.as_ref());
        self.buf.push('\n');
    }

    fn open(&mut self, head: impl AsRef<str>) {
        self.line(format!("{} {{", head.as_ref()));
        self.depth += 1;
    }

    fn close(&mut self) {
        self.depth -= 1;
        self.line("}");
    }
}

fn records(out: &mut Out, records: &[RecordTypeDecl]) {
    if records.is_empty() {
        return;
    }
    out.open("structs");
    for r in records {
        out.open(&r.name);
        for f in &r.fields {
            out.line(format!("{}: {};", f.name, f.ty));
        }
        out.close();
    }
    out.close();
}

/// Milliseconds rendered as seconds, e.g. `1000` -> `1`, `1500` -> `1.5`.
pub fn ms_as_seconds(ms: u64) -> String {
    let whole = ms / 1000;
    let frac = ms % 1000;
    if frac == 0 {
        whole.to_string()
    } else {
        let digits = format!("{frac:03}");
        format!("{whole}.{}", digits.trim_end_matches('0'))
    }
}

fn sensor_section(kind: &SensorKind) -> &'static str {
    match kind {
        SensorKind::Periodic { .. } => "periodicSensors",
        SensorKind::EventDriven { .. } => "eventDrivenSensors",
        SensorKind::RequestBased { .. } => "requestBasedSensors",
    }
}

fn sensor(out: &mut Out, s: &SensorDecl) {
    out.open(&s.name);
    let gen = format!("generate {}: {}", s.generates.event, s.generates.payload);
    match &s.kind {
        SensorKind::Periodic {
            sample_period_ms,
            duration_ms,
        } => {
            out.line(format!("{gen};"));
            out.line(format!(
                "sample period {} for {};",
                ms_as_seconds(*sample_period_ms),
                ms_as_seconds(*duration_ms)
            ));
        }
        SensorKind::EventDriven { condition } => {
            out.line(format!("{gen};"));
            out.line(format!("onCondition {};", format_expr(condition)));
        }
        SensorKind::RequestBased { access_key } => {
            out.line(format!("{gen} accessed-by {}: {};", access_key.name, access_key.ty));
        }
    }
    out.close();
}

impl FormatSpec for DomainSpec {
    fn format_spec(&self) -> String {
        if self.is_empty() {
            return "resources { }\n".to_string();
        }
        let mut out = Out::new();
        out.open("resources");
        records(&mut out, &self.records);
        if !self.tags.is_empty() {
            out.open("tags");
            for t in &self.tags {
                out.open(&t.name);
                for g in &t.generates {
                    out.line(format!("generate {}: {};", g.event, g.payload));
                }
                out.close();
            }
            out.close();
        }
        // Consecutive sensors of one kind share a section so mixed orders survive.
        let mut i = 0;
        while i < self.sensors.len() {
            let section = sensor_section(&self.sensors[i].kind);
            out.open(section);
            while i < self.sensors.len() && sensor_section(&self.sensors[i].kind) == section {
                sensor(&mut out, &self.sensors[i]);
                i += 1;
            }
            out.close();
        }
        if !self.actuators.is_empty() {
            out.open("actuators");
            for a in &self.actuators {
                out.open(&a.name);
                for action in &a.actions {
                    let params: Vec<String> =
                        action.params.iter().map(|p| format!("{}: {}", p.name, p.ty)).collect();
                    out.line(format!("action {}({});", action.name, params.join(", ")));
                }
                out.close();
            }
            out.close();
        }
        if !self.storages.is_empty() {
            out.open("storages");
            for s in &self.storages {
                out.open(&s.name);
                out.line(format!(
                    "generate {}: {} accessed-by {}: {};",
                    s.generates.event, s.generates.payload, s.access_key.name, s.access_key.ty
                ));
                out.close();
            }
            out.close();
        }
        out.close();
        out.buf
    }
}

impl FormatSpec for ArchitectureSpec {
    fn format_spec(&self) -> String {
        if self.services.is_empty() {
            return "computationalServices { }\n".to_string();
        }
        let mut out = Out::new();
        out.open("computationalServices");
        for s in &self.services {
            out.open(format!("{} {}", s.kind.keyword(), s.name));
            for c in &s.consumes {
                match c.scope {
                    Scope::SameLocation => out.line(format!("consume {};", c.event)),
                    Scope::Global => out.line(format!("consume {} from global;", c.event)),
                }
            }
            if let Some(c) = &s.compute {
                out.line(format!("COMPUTE {}({}) on {};", c.op, c.window, c.field));
            }
            for r in &s.requests {
                out.line(format!("request {} to {};", r.response, r.target));
            }
            for g in &s.generates {
                out.line(format!("generate {}: {};", g.event, g.payload));
            }
            for c in &s.commands {
                let args: Vec<String> = c
                    .args
                    .iter()
                    .map(|a| format!("{} = {}", a.param, format_expr(&a.value)))
                    .collect();
                out.line(format!("command {}({}) to {};", c.action, args.join(", "), c.actuator));
            }
            out.close();
        }
        out.close();
        out.buf
    }
}

impl FormatSpec for UserInteractionSpec {
    fn format_spec(&self) -> String {
        if self.records.is_empty() && self.interactors.is_empty() {
            return "userInteractions { }\n".to_string();
        }
        let mut out = Out::new();
        out.open("userInteractions");
        records(&mut out, &self.records);
        if !self.interactors.is_empty() {
            out.open("resources");
            for i in &self.interactors {
                out.open(&i.name);
                out.line(format!("notify {}: {};", i.payload.event, i.payload.payload));
                out.close();
            }
            out.close();
        }
        out.close();
        out.buf
    }
}

impl FormatSpec for DeploymentSpec {
    fn format_spec(&self) -> String {
        if self.devices.is_empty() {
            return "devices { }\n".to_string();
        }
        let mut out = Out::new();
        out.open("devices");
        for d in &self.devices {
            out.open(&d.name);
            out.line(format!("location: {};", quote(&d.location)));
            if !d.resources.is_empty() {
                let names: Vec<&str> = d.resources.iter().map(|r| r.name.as_str()).collect();
                out.line(format!("resources: {};", names.join(", ")));
            }
            if let Some(p) = &d.platform {
                out.line(format!("language-platform: {p};"));
            }
            out.line(format!("protocol: {};", d.protocol));
            if let Some(db) = &d.database {
                out.line(format!("database: {db};"));
            }
            out.close();
        }
        out.close();
        out.buf
    }
}

fn assigns(fields: &[FieldAssign]) -> String {
    let parts: Vec<String> = fields
        .iter()
        .map(|a| format!("{} = {}", a.field, format_expr(&a.value)))
        .collect();
    parts.join(", ")
}

pub fn format_action(kind: &ActionKind) -> String {
    match kind {
        ActionKind::Emit { event, fields } => format!("emit {event}({})", assigns(fields)),
        ActionKind::Command {
            actuator,
            action,
            args,
        } => format!("command {actuator}.{action}({})", assigns(args)),
        ActionKind::Request { target, key } => format!("request {target}({})", format_expr(key)),
        ActionKind::Notify { interactor, fields } => format!("notify {interactor}({})", assigns(fields)),
        ActionKind::SetState { field, value } => format!("set {field} = {}", format_expr(value)),
    }
}

fn rule(out: &mut Out, r: &Rule) {
    let mut head = match &r.trigger {
        Trigger::OnEvent(e) => format!("on {e}"),
        Trigger::OnResponse(e) => format!("on response {e}"),
    };
    if let Some(g) = &r.guard {
        let _ = write!(head, " when {}", format_expr(g));
    }
    if let [only] = r.actions.as_slice() {
        out.line(format!("{head} -> {};", format_action(&only.kind)));
    } else {
        out.open(format!("{head} ->"));
        for a in &r.actions {
            out.line(format!("{};", format_action(&a.kind)));
        }
        out.close();
    }
}

impl FormatSpec for LogicRuleSet {
    fn format_spec(&self) -> String {
        let mut out = Out::new();
        for (i, s) in self.services.iter().enumerate() {
            if i > 0 {
                out.buf.push('\n');
            }
            out.open(format!("service {}", s.service));
            for r in &s.rules {
                rule(&mut out, r);
            }
            out.close();
        }
        out.buf
    }
}

impl FormatSpec for crate::model::ServiceRules {
    fn format_spec(&self) -> String {
        LogicRuleSet {
            services: vec![self.clone()],
        }
        .format_spec()
    }
}

/// Renders a double so that it lexes back as a double (`30` -> `30.0`).
pub fn format_double(v: f64) -> String {
    format!("{v:?}")
}

/// Renders an expression with the minimum parentheses needed to reparse it.
pub fn format_expr(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e);
    s
}

fn write_expr(s: &mut String, e: &Expr) {
    match &e.kind {
        ExprKind::Literal(lit) => match lit {
            crate::model::Literal::Long(v) => {
                let _ = write!(s, "{v}");
            }
            crate::model::Literal::Double(v) => s.push_str(&format_double(*v)),
            crate::model::Literal::Str(v) => s.push_str(&quote(v)),
            crate::model::Literal::Bool(v) => {
                let _ = write!(s, "{v}");
            }
        },
        ExprKind::Field { base, name } => {
            if let Some(prefix) = base.prefix() {
                s.push_str(prefix);
                s.push('.');
            }
            s.push_str(name);
        }
        ExprKind::Unary { op, operand } => {
            s.push(match op {
                UnaryOp::Not => '!',
                UnaryOp::Neg => '-',
            });
            let wrap = matches!(operand.kind, ExprKind::Binary { .. });
            write_wrapped(s, operand, wrap);
        }
        ExprKind::Binary { op, lhs, rhs } => {
            let prec = op.precedence();
            let lwrap = matches!(&lhs.kind, ExprKind::Binary { op: l, .. } if l.precedence() < prec);
            let rwrap = matches!(&rhs.kind, ExprKind::Binary { op: r, .. } if r.precedence() <= prec);
            write_wrapped(s, lhs, lwrap);
            let _ = write!(s, " {} ", op.symbol());
            write_wrapped(s, rhs, rwrap);
        }
    }
}

fn write_wrapped(s: &mut String, e: &Expr, wrap: bool) {
    if wrap {
        s.push('(');
        write_expr(s, e);
        s.push(')');
    } else {
        write_expr(s, e);
    }
}
