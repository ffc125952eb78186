//! Single cross-reference mutations of a project.
//!
//! A cross-reference is any name written in one place that must resolve to
//! a declaration elsewhere: consumed events, payload records, request
//! targets, command actuators/actions/parameters, placed resources, rule
//! triggers, emitted events, notified interactors and field references.
//! Declarations themselves (including `set` targets, which declare state
//! fields) are not references.

use iotforge_core::model::{ActionKind, Expr, ExprKind};
use iotforge_core::validate::Project;

fn expr_names(e: &mut Expr, f: &mut dyn FnMut(&str, &mut String)) {
    match &mut e.kind {
        ExprKind::Literal(_) => {}
        ExprKind::Field { name, .. } => f("field reference", name),
        ExprKind::Unary { operand, .. } => expr_names(operand, f),
        ExprKind::Binary { lhs, rhs, .. } => {
            expr_names(lhs, f);
            expr_names(rhs, f);
        }
    }
}

/// Calls `f` on every cross-reference in the project, in a fixed order.
pub fn visit(p: &mut Project, f: &mut dyn FnMut(&str, &mut String)) {
    for s in &mut p.domain.sensors {
        f("sensor payload", &mut s.generates.payload);
        if let iotforge_core::model::SensorKind::EventDriven { condition } = &mut s.kind {
            expr_names(condition, f);
        }
    }
    for t in &mut p.domain.tags {
        for g in &mut t.generates {
            f("tag payload", &mut g.payload);
        }
    }
    for s in &mut p.domain.storages {
        f("storage payload", &mut s.generates.payload);
    }
    if let Some(ui) = &mut p.ui {
        for i in &mut ui.interactors {
            f("interactor payload", &mut i.payload.payload);
        }
    }
    for s in &mut p.arch.services {
        for c in &mut s.consumes {
            f("consumed event", &mut c.event);
        }
        if let Some(c) = &mut s.compute {
            f("computed field", &mut c.field);
        }
        for r in &mut s.requests {
            f("request target", &mut r.target);
            f("request response", &mut r.response);
        }
        for g in &mut s.generates {
            f("service payload", &mut g.payload);
        }
        for c in &mut s.commands {
            f("command action", &mut c.action);
            f("command actuator", &mut c.actuator);
            for a in &mut c.args {
                f("command parameter", &mut a.param);
                expr_names(&mut a.value, f);
            }
        }
    }
    for d in &mut p.deploy.devices {
        for r in &mut d.resources {
            f("placed resource", &mut r.name);
        }
    }
    for block in &mut p.rules.services {
        f("rule service", &mut block.service);
        for rule in &mut block.rules {
            match &mut rule.trigger {
                iotforge_core::model::Trigger::OnEvent(n) | iotforge_core::model::Trigger::OnResponse(n) => {
                    f("rule trigger", n)
                }
            }
            if let Some(g) = &mut rule.guard {
                expr_names(g, f);
            }
            for a in &mut rule.actions {
                match &mut a.kind {
                    ActionKind::Emit { event, fields } => {
                        f("emitted event", event);
                        for x in fields {
                            f("emitted field", &mut x.field);
                            expr_names(&mut x.value, f);
                        }
                    }
                    ActionKind::Command { actuator, action, args } => {
                        f("rule actuator", actuator);
                        f("rule action", action);
                        for x in args {
                            f("rule parameter", &mut x.field);
                            expr_names(&mut x.value, f);
                        }
                    }
                    ActionKind::Request { target, key } => {
                        f("rule request target", target);
                        expr_names(key, f);
                    }
                    ActionKind::Notify { interactor, fields } => {
                        f("notified interactor", interactor);
                        for x in fields {
                            f("notified field", &mut x.field);
                            expr_names(&mut x.value, f);
                        }
                    }
                    ActionKind::SetState { value, .. } => expr_names(value, f),
                }
            }
        }
    }
}

/// One project per cross-reference, with that reference renamed to a name
/// declared nowhere.
pub fn mutations(p: &Project) -> Vec<(String, Project)> {
    let mut probe = p.clone();
    let mut sites = Vec::new();
    visit(&mut probe, &mut |what, name| sites.push(format!("{what} `{name}`")));
    sites
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let mut m = p.clone();
            let mut k = 0;
            visit(&mut m, &mut |_, name| {
                if k == i {
                    name.push_str("Zzq");
                }
                k += 1;
            });
            (label, m)
        })
        .collect()
}
