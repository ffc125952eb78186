//! Deterministic discrete-event execution of linked device packages.

pub mod broker;
pub mod trace;
pub mod value;

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

pub use broker::{
    conform, Broker, BrokerError, Entry, LogEntry, Message, ResponseStatus, RunLog, RunSummary, Scope, Subscription,
    Task, DELIVERY_LATENCY_MS, RESPONSE_LATENCY_MS,
};
pub use trace::{Reading, SensorTraces, StorageSeed, TraceError};
pub use value::{compute_common, eval_expr, EvalEnv, EvalError, Payload, Value};

use crate::codegen::descriptor::{DescriptorError, DriverDescriptor, EventSchema, FieldSchema, SinkDescriptor};
use crate::linker::DevicePackage;
use crate::model::{ActionKind, AggregateOp, Expr, FieldAssign, ResourceKind, SensorKind, ServiceRules, Trigger};

/// Default simulated horizon: one day.
pub const DEFAULT_UNTIL_MS: u64 = 86_400_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("no trace readings for sensor `{0}`")]
    MissingTrace(String),
    #[error("bad trace for `{source_name}`: {message}")]
    BadTrace { source_name: String, message: String },
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
    #[error(transparent)]
    Broker(#[from] BrokerError),
    #[error("service `{service}`: {message}")]
    BadService { service: String, message: String },
}

enum Sensor {
    Periodic {
        d: u64,
        count: u64,
        event: EventSchema,
        location: String,
        readings: Vec<Reading>,
    },
    EventDriven {
        condition: Expr,
        event: String,
        location: String,
        readings: Vec<Reading>,
        armed: bool,
    },
    Tag {
        location: String,
        readings: Vec<Reading>,
    },
}

struct Window {
    op: AggregateOp,
    n: u32,
    field: String,
    output: EventSchema,
    buffer: Vec<Payload>,
}

struct Host {
    name: String,
    location: String,
    publications: Vec<EventSchema>,
    rules: Option<Arc<ServiceRules>>,
    window: Option<Window>,
    state: Payload,
}

struct Engine {
    broker: Broker,
    sensors: BTreeMap<String, Sensor>,
    hosts: Vec<Host>,
    host_index: BTreeMap<String, usize>,
    sinks: BTreeMap<String, SinkDescriptor>,
}

fn conform_reading(name: &str, r: &Reading, fields: &[FieldSchema]) -> Result<Reading, SimError> {
    let fields = conform(r.fields.clone(), fields).map_err(|message| SimError::BadTrace {
        source_name: name.to_string(),
        message: format!("t={}: {message}", r.t),
    })?;
    Ok(Reading {
        fields,
        event: r.event.clone(),
        t: r.t,
    })
}

fn readings_for(d: &DriverDescriptor, traces: &SensorTraces, event: &EventSchema) -> Result<Vec<Reading>, SimError> {
    let raw = traces.readings.get(&d.name).ok_or_else(|| SimError::MissingTrace(d.name.clone()))?;
    if raw.is_empty() {
        return Err(SimError::MissingTrace(d.name.clone()));
    }
    raw.iter().map(|r| conform_reading(&d.name, r, &event.fields)).collect()
}

impl Engine {
    fn new(packages: &[DevicePackage], traces: &SensorTraces, seeds: &StorageSeed) -> Result<Self, SimError> {
        let mut e = Engine {
            broker: Broker::new(),
            sensors: BTreeMap::new(),
            hosts: Vec::new(),
            host_index: BTreeMap::new(),
            sinks: BTreeMap::new(),
        };

        for pkg in packages {
            let location = &pkg.manifest.location;
            for d in &pkg.drivers {
                let kind = d.resource_kind().ok_or_else(|| DescriptorError::Unknown {
                    name: d.name.clone(),
                    what: "kind",
                    value: d.kind.clone(),
                })?;
                let first = d.events.first().cloned();
                match kind {
                    ResourceKind::Actuator => e.broker.declare_actuator(&d.name, d.actions.clone()),
                    ResourceKind::Storage | ResourceKind::RequestBasedSensor => {
                        let ev = first.ok_or(DescriptorError::Missing {
                            name: d.name.clone(),
                            what: "events",
                        })?;
                        let tables = if kind == ResourceKind::Storage {
                            &seeds.tables
                        } else {
                            &traces.tables
                        };
                        let table = tables.get(&d.name).cloned().unwrap_or_default();
                        e.broker.declare_source(&d.name, &ev.event, ev.fields, table);
                    }
                    ResourceKind::Tag => {
                        for ev in &d.events {
                            e.broker.declare_event(&ev.event, ev.fields.clone());
                        }
                        let mut readings = Vec::new();
                        for r in traces.readings.get(&d.name).into_iter().flatten() {
                            let ev = match (&r.event, d.events.as_slice()) {
                                (Some(name), evs) => evs.iter().find(|x| &x.event == name),
                                (None, [only]) => Some(only),
                                (None, _) => None,
                            };
                            let ev = ev.ok_or_else(|| SimError::BadTrace {
                                source_name: d.name.clone(),
                                message: format!("t={}: reading does not name one of the tag's events", r.t),
                            })?;
                            let mut r = conform_reading(&d.name, r, &ev.fields)?;
                            r.event = Some(ev.event.clone());
                            readings.push(r);
                        }
                        e.sensors.insert(
                            d.name.clone(),
                            Sensor::Tag {
                                location: location.clone(),
                                readings,
                            },
                        );
                    }
                    ResourceKind::PeriodicSensor | ResourceKind::EventDrivenSensor => {
                        let ev = first.ok_or(DescriptorError::Missing {
                            name: d.name.clone(),
                            what: "events",
                        })?;
                        e.broker.declare_event(&ev.event, ev.fields.clone());
                        let readings = readings_for(d, traces, &ev)?;
                        let sensor = match d.sensor_kind()? {
                            Some(SensorKind::Periodic {
                                sample_period_ms,
                                duration_ms,
                            }) => {
                                if sample_period_ms == 0 {
                                    return Err(SimError::BadTrace {
                                        source_name: d.name.clone(),
                                        message: "sample period is zero".into(),
                                    });
                                }
                                Sensor::Periodic {
                                    d: sample_period_ms,
                                    count: duration_ms / sample_period_ms,
                                    event: ev,
                                    location: location.clone(),
                                    readings,
                                }
                            }
                            Some(SensorKind::EventDriven { condition }) => Sensor::EventDriven {
                                condition,
                                event: ev.event,
                                location: location.clone(),
                                readings,
                                armed: false,
                            },
                            _ => unreachable!("kind checked above"),
                        };
                        e.sensors.insert(d.name.clone(), sensor);
                    }
                }
            }
            for s in &pkg.sinks {
                e.sinks.insert(s.name.clone(), s.clone());
            }
        }

        for pkg in packages {
            for s in &pkg.services {
                for p in &s.publications {
                    e.broker.declare_event(&p.event, p.fields.clone());
                }
            }
        }

        for pkg in packages {
            for s in &pkg.services {
                let bad = |message: String| SimError::BadService {
                    service: s.service_name.clone(),
                    message,
                };
                let window = match &s.compute_spec {
                    Some(c) => {
                        let op = AggregateOp::from_keyword(&c.operator)
                            .ok_or_else(|| bad(format!("unknown operator `{}`", c.operator)))?;
                        let output = s
                            .publications
                            .first()
                            .cloned()
                            .ok_or_else(|| bad("a Common service needs an output event".into()))?;
                        if c.n == 0 {
                            return Err(bad("window size is zero".into()));
                        }
                        Some(Window {
                            op,
                            n: c.n,
                            field: c.field.clone(),
                            output,
                            buffer: Vec::new(),
                        })
                    }
                    None => None,
                };
                let rules = pkg.rules.for_service(&s.service_name).cloned().map(Arc::new);
                e.host_index.insert(s.service_name.clone(), e.hosts.len());
                e.hosts.push(Host {
                    name: s.service_name.clone(),
                    location: pkg.manifest.location.clone(),
                    publications: s.publications.clone(),
                    rules,
                    window,
                    state: Payload::new(),
                });
                for sub in &s.subscriptions {
                    let scope = if sub.scope == "global" {
                        Scope::Global
                    } else {
                        Scope::SameLocation(pkg.manifest.location.clone())
                    };
                    e.broker.subscribe(Subscription {
                        subscriber: s.service_name.clone(),
                        event: sub.event.clone(),
                        scope,
                    })?;
                }
            }
        }

        let mut initial = Vec::new();
        for (name, s) in &e.sensors {
            match s {
                Sensor::Periodic { d, count, .. } if *count >= 1 => initial.push((
                    *d,
                    Task::Sample {
                        sensor: name.clone(),
                        index: 1,
                    },
                )),
                Sensor::Periodic { .. } => {}
                Sensor::EventDriven { readings, .. } | Sensor::Tag { readings, .. } => {
                    for (i, r) in readings.iter().enumerate() {
                        initial.push((
                            r.t,
                            Task::Reading {
                                sensor: name.clone(),
                                index: i,
                            },
                        ));
                    }
                }
            }
        }
        for (t, task) in initial {
            e.broker.schedule(t, task);
        }
        Ok(e)
    }

    fn run(&mut self, until: u64) {
        while let Some(task) = self.broker.pop(until) {
            match task {
                Task::Sample { sensor, index } => self.sample(&sensor, index),
                Task::Reading { sensor, index } => self.reading(&sensor, index),
                Task::Deliver {
                    subscriber, message, ..
                } => self.deliver(&subscriber, &message),
                Task::Respond {
                    requester,
                    response,
                    payload: Some(payload),
                    ..
                } => {
                    if let Some(&i) = self.host_index.get(&requester) {
                        self.run_rules(i, &Trigger::OnResponse(response), &payload);
                    }
                }
                Task::Respond { payload: None, .. } => {}
            }
        }
    }

    fn publish(&mut self, owner: &str, trigger: &str, msg: Message) {
        if let Err(err) = self.broker.publish(msg) {
            self.broker.rule_error(owner, trigger, err.to_string());
        }
    }

    fn sample(&mut self, name: &str, index: u64) {
        let Some(Sensor::Periodic {
            d,
            count,
            event,
            location,
            readings,
        }) = self.sensors.get(name)
        else {
            return;
        };
        let t = index * d;
        let at = readings.partition_point(|r| r.t <= t);
        let msg = (at > 0).then(|| Message {
            event: event.event.clone(),
            payload: readings[at - 1].fields.clone(),
            publisher: name.to_string(),
            location: location.clone(),
        });
        let next = (index < *count).then(|| ((index + 1) * d, index + 1));
        if let Some(msg) = msg {
            let ev = msg.event.clone();
            self.publish(name, &ev, msg);
        }
        if let Some((t, index)) = next {
            self.broker.schedule(
                t,
                Task::Sample {
                    sensor: name.to_string(),
                    index,
                },
            );
        }
    }

    fn reading(&mut self, name: &str, index: usize) {
        let msg = match self.sensors.get_mut(name) {
            Some(Sensor::Tag { location, readings }) => {
                let r = &readings[index];
                Some(Message {
                    event: r.event.clone().unwrap_or_default(),
                    payload: r.fields.clone(),
                    publisher: name.to_string(),
                    location: location.clone(),
                })
            }
            Some(Sensor::EventDriven {
                condition,
                event,
                location,
                readings,
                armed,
            }) => {
                let r = &readings[index];
                let env = EvalEnv {
                    bare: Some(&r.fields),
                    ..Default::default()
                };
                let holds = match eval_expr(condition, &env) {
                    Ok(Value::Bool(b)) => Ok(b),
                    Ok(v) => Err(format!("condition evaluated to {} instead of bool", v.value_type())),
                    Err(e) => Err(e.to_string()),
                };
                match holds {
                    Ok(holds) => {
                        let rising = holds && !*armed;
                        *armed = holds;
                        rising.then(|| Message {
                            event: event.clone(),
                            payload: r.fields.clone(),
                            publisher: name.to_string(),
                            location: location.clone(),
                        })
                    }
                    Err(message) => {
                        let ev = event.clone();
                        self.broker.rule_error(name, &ev, message);
                        None
                    }
                }
            }
            _ => None,
        };
        if let Some(msg) = msg {
            let ev = msg.event.clone();
            self.publish(name, &ev, msg);
        }
    }

    fn deliver(&mut self, subscriber: &str, msg: &Message) {
        let Some(&i) = self.host_index.get(subscriber) else { return };
        if let Some(w) = &mut self.hosts[i].window {
            w.buffer.push(msg.payload.clone());
            if w.buffer.len() < w.n as usize {
                return;
            }
            let value = compute_common(w.op, w.n, &w.field, &w.buffer);
            let last = w.buffer.pop().unwrap_or_default();
            w.buffer.clear();
            let mut payload = Payload::new();
            for f in &w.output.fields {
                let v = if f.name == w.field {
                    value.clone()
                } else {
                    last.get(&f.name).cloned().unwrap_or(Value::zero(f.ty))
                };
                let v = v.clone().coerce(f.ty).unwrap_or_else(|| match (v, f.ty) {
                    (Value::Double(x), crate::model::PrimType::Long) => Value::Long(x.round() as i64),
                    _ => Value::zero(f.ty),
                });
                payload.insert(f.name.clone(), v);
            }
            let out = Message {
                event: w.output.event.clone(),
                payload,
                publisher: self.hosts[i].name.clone(),
                location: self.hosts[i].location.clone(),
            };
            let (owner, ev) = (self.hosts[i].name.clone(), msg.event.clone());
            self.publish(&owner, &ev, out);
        } else {
            self.run_rules(i, &Trigger::OnEvent(msg.event.clone()), &msg.payload);
        }
    }

    fn run_rules(&mut self, i: usize, trigger: &Trigger, payload: &Payload) {
        let Some(rules) = self.hosts[i].rules.clone() else { return };
        let label = match trigger {
            Trigger::OnEvent(e) => e.clone(),
            Trigger::OnResponse(r) => format!("response {r}"),
        };
        for rule in rules.rules.iter().filter(|r| &r.trigger == trigger) {
            let result = (|| -> Result<(), String> {
                if let Some(g) = &rule.guard {
                    match eval_expr(g, &self.env(i, trigger, payload)).map_err(|e| e.to_string())? {
                        Value::Bool(true) => {}
                        Value::Bool(false) => return Ok(()),
                        v => return Err(format!("guard evaluated to {} instead of bool", v.value_type())),
                    }
                }
                for a in &rule.actions {
                    self.act(i, &a.kind, trigger, payload)?;
                }
                Ok(())
            })();
            if let Err(message) = result {
                let owner = self.hosts[i].name.clone();
                self.broker.rule_error(&owner, &label, message);
            }
        }
    }

    fn env<'a>(&'a self, i: usize, trigger: &Trigger, payload: &'a Payload) -> EvalEnv<'a> {
        EvalEnv {
            bare: Some(payload),
            event: matches!(trigger, Trigger::OnEvent(_)).then_some(payload),
            response: matches!(trigger, Trigger::OnResponse(_)).then_some(payload),
            state: Some(&self.hosts[i].state),
        }
    }

    fn eval_fields(&self, i: usize, trigger: &Trigger, payload: &Payload, fields: &[FieldAssign]) -> Result<Payload, String> {
        let env = self.env(i, trigger, payload);
        fields
            .iter()
            .map(|f| Ok((f.field.clone(), eval_expr(&f.value, &env).map_err(|e| e.to_string())?)))
            .collect()
    }

    fn act(&mut self, i: usize, kind: &ActionKind, trigger: &Trigger, payload: &Payload) -> Result<(), String> {
        let me = self.hosts[i].name.clone();
        match kind {
            ActionKind::Emit { event, fields } => {
                let values = self.eval_fields(i, trigger, payload, fields)?;
                if !self.hosts[i].publications.iter().any(|p| &p.event == event) {
                    return Err(format!("`{me}` does not generate `{event}`"));
                }
                let msg = Message {
                    event: event.clone(),
                    payload: values,
                    publisher: me,
                    location: self.hosts[i].location.clone(),
                };
                self.broker.publish(msg).map(|_| ()).map_err(|e| e.to_string())
            }
            ActionKind::Command { actuator, action, args } => {
                let mut values = self.eval_fields(i, trigger, payload, args)?;
                let params = self.broker.signature(actuator, action).map_err(|e| e.to_string())?.to_vec();
                let mut ordered = Vec::new();
                for p in &params {
                    ordered.push(
                        values
                            .remove(&p.name)
                            .ok_or_else(|| format!("`{actuator}.{action}` needs argument `{}`", p.name))?,
                    );
                }
                if let Some(extra) = values.keys().next() {
                    return Err(format!("`{actuator}.{action}` has no parameter `{extra}`"));
                }
                self.broker.command(&me, actuator, action, ordered).map_err(|e| e.to_string())
            }
            ActionKind::Request { target, key } => {
                let key = eval_expr(key, &self.env(i, trigger, payload)).map_err(|e| e.to_string())?;
                self.broker.request(&me, target, key).map(|_| ()).map_err(|e| e.to_string())
            }
            ActionKind::Notify { interactor, fields } => {
                let values = self.eval_fields(i, trigger, payload, fields)?;
                let sink = self
                    .sinks
                    .get(interactor)
                    .ok_or_else(|| format!("no sink `{interactor}` in any package"))?;
                let event = sink.event.clone();
                let values = conform(values, &sink.fields).map_err(|m| format!("notify `{interactor}`: {m}"))?;
                self.broker.notify(&me, interactor, &event, values);
                Ok(())
            }
            ActionKind::SetState { field, value } => {
                let v = eval_expr(value, &self.env(i, trigger, payload)).map_err(|e| e.to_string())?;
                self.hosts[i].state.insert(field.clone(), v);
                Ok(())
            }
        }
    }
}

/// Runs every package against the traces and seeds until the queue is empty
/// or the next task lies after `until` (ms).
pub fn run_simulation(
    packages: &[DevicePackage],
    traces: &SensorTraces,
    seeds: &StorageSeed,
    until: u64,
) -> Result<RunLog, SimError> {
    let mut engine = Engine::new(packages, traces, seeds)?;
    engine.run(until);
    Ok(engine.broker.into_log())
}
