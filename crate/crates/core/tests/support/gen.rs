//! Random, semantically valid projects.

use iotforge_core::model::*;
use iotforge_core::validate::Project;
use rand::seq::IndexedRandom;
use rand::{Rng, RngCore};

fn span() -> SourceSpan {
    SourceSpan::synthetic()
}

fn prim(rng: &mut dyn RngCore) -> PrimType {
    *[PrimType::Double, PrimType::Long, PrimType::String].choose(rng).unwrap()
}

/// Non-negative, so formatting never has to print a sign.
fn literal(rng: &mut dyn RngCore, ty: PrimType) -> Expr {
    Expr::literal(match ty {
        PrimType::Double => Literal::Double(rng.random_range(0..400) as f64 / 4.0),
        PrimType::Long => Literal::Long(rng.random_range(0..1000)),
        PrimType::String => Literal::Str(["a", "room 1", "x_y", "", "C"].choose(rng).unwrap().to_string()),
    })
}

fn record(name: String, rng: &mut dyn RngCore) -> RecordTypeDecl {
    let n = rng.random_range(1..=3);
    let fields = (0..n)
        .map(|j| Field {
            name: format!("f{j}"),
            // The first field is always a double so aggregates and guards have a target.
            ty: if j == 0 { PrimType::Double } else { prim(rng) },
            span: span(),
        })
        .collect();
    RecordTypeDecl {
        name,
        fields,
        span: span(),
    }
}

fn event(event: String, payload: &str) -> EventDecl {
    EventDecl {
        event,
        payload: payload.to_string(),
        span: span(),
    }
}

/// A boolean expression over field `f0` of `base`, sometimes compound.
fn condition(rng: &mut dyn RngCore, base: FieldBase) -> Expr {
    let cmp = |rng: &mut dyn RngCore| {
        let op = *[BinaryOp::Gt, BinaryOp::Ge, BinaryOp::Lt, BinaryOp::Le].choose(rng).unwrap();
        let mut lhs = Expr::field(base, "f0");
        if rng.random_bool(0.3) {
            lhs = Expr::binary(BinaryOp::Mul, lhs, Expr::literal(Literal::Long(rng.random_range(1..5))));
        }
        Expr::binary(op, lhs, Expr::literal(Literal::Double(rng.random_range(0..200) as f64 / 2.0)))
    };
    let first = cmp(rng);
    if rng.random_bool(0.4) {
        let op = if rng.random_bool(0.5) { BinaryOp::And } else { BinaryOp::Or };
        let second = cmp(rng);
        let e = Expr::binary(op, first, second);
        if rng.random_bool(0.3) {
            Expr::unary(UnaryOp::Not, e)
        } else {
            e
        }
    } else {
        first
    }
}

struct Source {
    name: String,
    response: String,
    payload: String,
    key: PrimType,
}

pub fn project(rng: &mut dyn RngCore) -> Project {
    let mut domain = DomainSpec::default();
    let n_rec = rng.random_range(2..=4);
    for i in 0..n_rec {
        domain.records.push(record(format!("Rec{i}"), rng));
    }
    let rec_names: Vec<String> = domain.records.iter().map(|r| r.name.clone()).collect();
    let pick_rec = |rng: &mut dyn RngCore| rec_names.choose(rng).unwrap().clone();

    // (event, payload record) pairs that can be consumed.
    let mut published: Vec<(String, String)> = Vec::new();
    let mut numbered = 0;
    let mut fresh = |prefix: &str| {
        numbered += 1;
        format!("{prefix}{numbered}")
    };

    for i in 0..rng.random_range(1..=2) {
        let payload = pick_rec(rng);
        let ev = fresh("periodicEv");
        let d = rng.random_range(1..=5000u64);
        domain.sensors.push(SensorDecl {
            name: format!("Periodic{i}"),
            kind: SensorKind::Periodic {
                sample_period_ms: d,
                duration_ms: d * rng.random_range(1..=50),
            },
            generates: event(ev.clone(), &payload),
            span: span(),
        });
        published.push((ev, payload));
    }
    for i in 0..rng.random_range(0..=1) {
        let payload = pick_rec(rng);
        let ev = fresh("alertEv");
        domain.sensors.push(SensorDecl {
            name: format!("Edge{i}"),
            kind: SensorKind::EventDriven {
                condition: condition(rng, FieldBase::Bare),
            },
            generates: event(ev.clone(), &payload),
            span: span(),
        });
        published.push((ev, payload));
    }
    for i in 0..rng.random_range(0..=1) {
        let n = rng.random_range(1..=2);
        let generates: Vec<EventDecl> = (0..n).map(|_| event(fresh("tagEv"), &pick_rec(rng))).collect();
        published.extend(generates.iter().map(|g| (g.event.clone(), g.payload.clone())));
        domain.tags.push(TagDecl {
            name: format!("Tag{i}"),
            generates,
            span: span(),
        });
    }

    let mut sources = Vec::new();
    if rng.random_bool(0.5) {
        let payload = pick_rec(rng);
        let response = fresh("stored");
        let key = prim(rng);
        domain.storages.push(StorageDecl {
            name: "Store0".into(),
            generates: event(response.clone(), &payload),
            access_key: AccessKey {
                name: "key".into(),
                ty: key,
            },
            span: span(),
        });
        sources.push(Source {
            name: "Store0".into(),
            response,
            payload,
            key,
        });
    }
    if rng.random_bool(0.5) {
        let payload = pick_rec(rng);
        let response = fresh("remote");
        let key = prim(rng);
        domain.sensors.push(SensorDecl {
            name: "Remote0".into(),
            kind: SensorKind::RequestBased {
                access_key: AccessKey {
                    name: "id".into(),
                    ty: key,
                },
            },
            generates: event(response.clone(), &payload),
            span: span(),
        });
        sources.push(Source {
            name: "Remote0".into(),
            response,
            payload,
            key,
        });
    }

    for i in 0..rng.random_range(1..=2) {
        let n = rng.random_range(1..=2);
        let actions = (0..n)
            .map(|j| ActionDecl {
                name: if j == 0 && rng.random_bool(0.3) { "On".into() } else { format!("Do{j}") },
                params: (0..rng.random_range(0..=2))
                    .map(|k| Param {
                        name: format!("p{k}"),
                        ty: prim(rng),
                    })
                    .collect(),
                span: span(),
            })
            .collect();
        domain.actuators.push(ActuatorDecl {
            name: format!("Act{i}"),
            actions,
            span: span(),
        });
    }

    // Services.
    let mut arch = ArchitectureSpec::default();
    let sensor_events: Vec<(String, String)> = published.clone();
    if rng.random_bool(0.6) {
        let (ev, payload) = sensor_events.choose(rng).unwrap().clone();
        let out = fresh("agg");
        arch.services.push(ServiceDecl {
            name: "Aggregate0".into(),
            kind: ServiceKind::Common,
            consumes: vec![Consume {
                event: ev,
                scope: Scope::SameLocation,
                span: span(),
            }],
            compute: Some(Compute {
                op: *[AggregateOp::AvgBySample, AggregateOp::SumBySample, AggregateOp::CountBySample]
                    .choose(rng)
                    .unwrap(),
                window: rng.random_range(1..=10),
                field: "f0".into(),
                span: span(),
            }),
            requests: vec![],
            generates: vec![event(out.clone(), &payload)],
            commands: vec![],
            span: span(),
        });
        published.push((out, payload));
    }

    let ui = rng.random_bool(0.6).then(|| UserInteractionSpec {
        records: vec![record("UiRec0".into(), rng)],
        interactors: vec![InteractorDecl {
            name: "Screen0".into(),
            kind: InteractorKind::Notify,
            payload: event("shown0".into(), "UiRec0"),
            span: span(),
        }],
    });

    let lookup_record = |domain: &DomainSpec, ui: &Option<UserInteractionSpec>, name: &str| -> RecordTypeDecl {
        domain
            .record(name)
            .or_else(|| ui.as_ref().and_then(|u| u.record(name)))
            .cloned()
            .expect("generated record exists")
    };
    let assign_all = |rng: &mut dyn RngCore, rec: &RecordTypeDecl, base: Option<FieldBase>| -> Vec<FieldAssign> {
        rec.fields
            .iter()
            .map(|f| FieldAssign {
                field: f.name.clone(),
                value: match base {
                    // Every payload has a double `f0`.
                    Some(b) if f.ty == PrimType::Double && rng.random_bool(0.5) => Expr::field(b, "f0"),
                    _ => literal(rng, f.ty),
                },
            })
            .collect()
    };

    let mut rules = LogicRuleSet::default();
    let n_custom = rng.random_range(1..=3);
    for i in 0..n_custom {
        let name = format!("Svc{i}");
        let mut consumes: Vec<Consume> = Vec::new();
        for _ in 0..rng.random_range(1..=2) {
            let (ev, _) = published.choose(rng).unwrap().clone();
            if consumes.iter().all(|c| c.event != ev) {
                consumes.push(Consume {
                    event: ev,
                    scope: if rng.random_bool(0.5) { Scope::Global } else { Scope::SameLocation },
                    span: span(),
                });
            }
        }
        let source = if rng.random_bool(0.5) { sources.choose(rng) } else { None };
        let requests: Vec<RequestDecl> = source
            .map(|s| RequestDecl {
                response: s.response.clone(),
                target: s.name.clone(),
                span: span(),
            })
            .into_iter()
            .collect();
        let generates: Vec<EventDecl> = if rng.random_bool(0.6) {
            vec![event(fresh("svcEv"), &pick_rec(rng))]
        } else {
            vec![]
        };
        let mut commands = Vec::new();
        for _ in 0..rng.random_range(0..=2) {
            let a = domain.actuators.choose(rng).unwrap();
            let act = a.actions.choose(rng).unwrap();
            if commands.iter().any(|c: &CommandDecl| c.actuator == a.name && c.action == act.name) {
                continue;
            }
            commands.push(CommandDecl {
                action: act.name.clone(),
                actuator: a.name.clone(),
                args: act
                    .params
                    .iter()
                    .map(|p| ArgBinding {
                        param: p.name.clone(),
                        value: literal(rng, p.ty),
                    })
                    .collect(),
                span: span(),
            });
        }

        let mut block = ServiceRules {
            service: name.clone(),
            rules: vec![],
            span: span(),
        };
        let mut state_set: Vec<String> = Vec::new();
        for c in &consumes {
            let mut actions = Vec::new();
            let mut act = |kind| actions.push(RuleAction { kind, span: span() });
            if rng.random_bool(0.6) {
                let field = format!("last{}", state_set.len());
                act(ActionKind::SetState {
                    field: field.clone(),
                    value: Expr::field(FieldBase::Event, "f0"),
                });
                state_set.push(field);
            }
            if let Some(g) = generates.first() {
                if rng.random_bool(0.7) {
                    let rec = lookup_record(&domain, &ui, &g.payload);
                    act(ActionKind::Emit {
                        event: g.event.clone(),
                        fields: assign_all(rng, &rec, Some(FieldBase::Event)),
                    });
                }
            }
            if let Some(cmd) = commands.choose(rng) {
                let params = &domain.actuator(&cmd.actuator).unwrap().action(&cmd.action).unwrap().params;
                act(ActionKind::Command {
                    actuator: cmd.actuator.clone(),
                    action: cmd.action.clone(),
                    args: params
                        .iter()
                        .map(|p| FieldAssign {
                            field: p.name.clone(),
                            value: literal(rng, p.ty),
                        })
                        .collect(),
                });
            }
            if let Some(s) = source {
                if rng.random_bool(0.7) {
                    act(ActionKind::Request {
                        target: s.name.clone(),
                        key: literal(rng, s.key),
                    });
                }
            }
            if let Some(u) = &ui {
                if rng.random_bool(0.5) {
                    let rec = u.records[0].clone();
                    act(ActionKind::Notify {
                        interactor: u.interactors[0].name.clone(),
                        fields: assign_all(rng, &rec, Some(FieldBase::Event)),
                    });
                }
            }
            if actions.is_empty() {
                let field = format!("last{}", state_set.len());
                actions.push(RuleAction {
                    kind: ActionKind::SetState {
                        field: field.clone(),
                        value: Expr::field(FieldBase::Event, "f0"),
                    },
                    span: span(),
                });
                state_set.push(field);
            }
            block.rules.push(Rule {
                trigger: Trigger::OnEvent(c.event.clone()),
                guard: rng.random_bool(0.5).then(|| condition(rng, FieldBase::Event)),
                actions,
                span: span(),
            });
        }
        if let Some(s) = source {
            let mut actions = vec![RuleAction {
                kind: ActionKind::SetState {
                    field: "answer".into(),
                    value: Expr::field(FieldBase::Response, "f0"),
                },
                span: span(),
            }];
            if let (Some(g), Some(read)) = (generates.first(), state_set.first()) {
                let rec = lookup_record(&domain, &ui, &g.payload);
                let mut fields = assign_all(rng, &rec, None);
                fields[0].value = Expr::binary(
                    BinaryOp::Add,
                    Expr::field(FieldBase::State, read.clone()),
                    Expr::field(FieldBase::Response, "f0"),
                );
                actions.push(RuleAction {
                    kind: ActionKind::Emit {
                        event: g.event.clone(),
                        fields,
                    },
                    span: span(),
                });
            }
            block.rules.push(Rule {
                trigger: Trigger::OnResponse(s.response.clone()),
                guard: None,
                actions,
                span: span(),
            });
        }
        rules.services.push(block);
        published.extend(generates.iter().map(|g| (g.event.clone(), g.payload.clone())));
        arch.services.push(ServiceDecl {
            name,
            kind: ServiceKind::Custom,
            consumes,
            compute: None,
            requests,
            generates,
            commands,
            span: span(),
        });
    }

    // Deployment: one device per driver plus a spare compute device.
    let rooms = ["home/room#1", "home/room#2", "home/hall"];
    let mut deploy = DeploymentSpec::default();
    let drivers: Vec<(String, bool)> = domain
        .tags
        .iter()
        .map(|t| (t.name.clone(), false))
        .chain(domain.sensors.iter().map(|s| (s.name.clone(), false)))
        .chain(domain.actuators.iter().map(|a| (a.name.clone(), false)))
        .chain(domain.storages.iter().map(|s| (s.name.clone(), true)))
        .collect();
    for (i, (driver, storage)) in drivers.into_iter().enumerate() {
        deploy.devices.push(DeviceDecl {
            name: format!("Device{i}"),
            location: rooms.choose(rng).unwrap().to_string(),
            resources: vec![NameRef {
                name: driver,
                span: span(),
            }],
            platform: rng.random_bool(0.7).then(|| ["NodeJS", "JavaSE", "Android"].choose(rng).unwrap().to_string()),
            protocol: "mqtt".into(),
            database: storage.then(|| "MySQL".to_string()),
            span: span(),
        });
    }
    let mut compute = DeviceDecl {
        name: "Compute".into(),
        location: rooms.choose(rng).unwrap().to_string(),
        resources: vec![],
        platform: Some("JavaSE".into()),
        protocol: "mqtt".into(),
        database: None,
        span: span(),
    };
    if let Some(u) = &ui {
        compute.resources.push(NameRef {
            name: u.interactors[0].name.clone(),
            span: span(),
        });
    }
    for s in &arch.services {
        if rng.random_bool(0.3) {
            compute.resources.push(NameRef {
                name: s.name.clone(),
                span: span(),
            });
        }
    }
    deploy.devices.push(compute);

    Project {
        domain,
        arch,
        ui,
        deploy,
        rules,
    }
}
