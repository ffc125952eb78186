//! Virtual-time message broker: publish/subscribe, commands and
//! request/response, with every interaction appended to a [`RunLog`].

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::value::{Payload, Value};
use crate::codegen::descriptor::{ActionSchema, FieldSchema};

/// Time from a publish to each of its deliveries.
pub const DELIVERY_LATENCY_MS: u64 = 1;
/// Time from a request to its response.
pub const RESPONSE_LATENCY_MS: u64 = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BrokerError {
    #[error("unknown event `{0}`")]
    UnknownEvent(String),
    #[error("payload of `{event}`: {message}")]
    PayloadMismatch { event: String, message: String },
    #[error("unknown actuator `{0}`")]
    UnknownActuator(String),
    #[error("actuator `{actuator}` has no action `{action}`")]
    UnknownAction { actuator: String, action: String },
    #[error("`{actuator}.{action}`: {message}")]
    ArgTypeMismatch {
        actuator: String,
        action: String,
        message: String,
    },
    #[error("`{0}` is neither a storage nor a request-based sensor")]
    UnknownTarget(String),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scope {
    /// Only publishers at exactly this region path.
    SameLocation(String),
    Global,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subscription {
    pub subscriber: String,
    pub event: String,
    pub scope: Scope,
}

impl Subscription {
    pub fn matches(&self, event: &str, location: &str) -> bool {
        self.event == event
            && match &self.scope {
                Scope::Global => true,
                Scope::SameLocation(region) => region == location,
            }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Message {
    pub event: String,
    pub payload: Payload,
    pub publisher: String,
    pub location: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ResponseStatus {
    Ok,
    NotFound,
}

/// One observable interaction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum Entry {
    Publish {
        event: String,
        publisher: String,
        location: String,
        payload: Payload,
    },
    Deliver {
        event: String,
        subscriber: String,
        publish_seq: u64,
    },
    Command {
        sender: String,
        actuator: String,
        action: String,
        args: Vec<Value>,
    },
    StateChange {
        actuator: String,
        field: String,
        value: Value,
    },
    Request {
        correlation_id: u64,
        requester: String,
        target: String,
        key: Value,
    },
    Response {
        correlation_id: u64,
        requester: String,
        target: String,
        response: String,
        status: ResponseStatus,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        payload: Option<Payload>,
    },
    Notify {
        sender: String,
        interactor: String,
        event: String,
        payload: Payload,
    },
    /// A rule or sensor condition failed; the run goes on.
    RuleError {
        owner: String,
        trigger: String,
        message: String,
    },
}

impl Entry {
    pub fn kind(&self) -> &'static str {
        match self {
            Entry::Publish { .. } => "publish",
            Entry::Deliver { .. } => "deliver",
            Entry::Command { .. } => "command",
            Entry::StateChange { .. } => "stateChange",
            Entry::Request { .. } => "request",
            Entry::Response { .. } => "response",
            Entry::Notify { .. } => "notify",
            Entry::RuleError { .. } => "ruleError",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub t: u64,
    /// Position in the log.
    pub seq: u64,
    #[serde(flatten)]
    pub entry: Entry,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunLog {
    pub entries: Vec<LogEntry>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub publishes: usize,
    pub delivers: usize,
    pub commands: usize,
    pub state_changes: usize,
    pub requests: usize,
    pub responses: usize,
    pub notifies: usize,
    pub rule_errors: usize,
}

impl RunLog {
    /// One compact JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("log entries serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let entries = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(Self { entries })
    }

    pub fn summary(&self) -> RunSummary {
        let mut s = RunSummary::default();
        for e in &self.entries {
            let slot = match e.entry {
                Entry::Publish { .. } => &mut s.publishes,
                Entry::Deliver { .. } => &mut s.delivers,
                Entry::Command { .. } => &mut s.commands,
                Entry::StateChange { .. } => &mut s.state_changes,
                Entry::Request { .. } => &mut s.requests,
                Entry::Response { .. } => &mut s.responses,
                Entry::Notify { .. } => &mut s.notifies,
                Entry::RuleError { .. } => &mut s.rule_errors,
            };
            *slot += 1;
        }
        s
    }
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows = [
            ("publishes", self.publishes),
            ("delivers", self.delivers),
            ("commands", self.commands),
            ("stateChanges", self.state_changes),
            ("requests", self.requests),
            ("responses", self.responses),
            ("notifies", self.notifies),
            ("ruleErrors", self.rule_errors),
        ];
        writeln!(f, "{:<14}{:>8}", "entry", "count")?;
        for (name, n) in rows {
            writeln!(f, "{name:<14}{n:>8}")?;
        }
        Ok(())
    }
}

/// Work items on the virtual clock.
#[derive(Clone, Debug, PartialEq)]
pub enum Task {
    Deliver {
        subscriber: String,
        message: Message,
        publish_seq: u64,
    },
    Respond {
        correlation_id: u64,
        requester: String,
        target: String,
        response: String,
        payload: Option<Payload>,
    },
    /// The `index`-th sample of a periodic sensor (1-based).
    Sample { sensor: String, index: u64 },
    /// The `index`-th trace reading of an event-driven sensor or tag.
    Reading { sensor: String, index: usize },
}

#[derive(Clone, Debug)]
struct Actuator {
    actions: Vec<ActionSchema>,
    state: Payload,
}

#[derive(Clone, Debug)]
struct Source {
    response: String,
    fields: Vec<FieldSchema>,
    table: BTreeMap<String, Payload>,
}

/// Checks that `payload` has exactly the declared fields, widening longs
/// to doubles where declared.
pub fn conform(payload: Payload, fields: &[FieldSchema]) -> Result<Payload, String> {
    let mut out = Payload::new();
    let mut payload = payload;
    for f in fields {
        let v = payload.remove(&f.name).ok_or_else(|| format!("missing field `{}`", f.name))?;
        let ty = v.value_type();
        let v = v
            .coerce(f.ty)
            .ok_or_else(|| format!("field `{}` is {ty}, expected {}", f.name, f.ty))?;
        out.insert(f.name.clone(), v);
    }
    if let Some(extra) = payload.keys().next() {
        return Err(format!("unexpected field `{extra}`"));
    }
    Ok(out)
}

/// Owns the clock, the task queue and the log.
#[derive(Clone, Debug, Default)]
pub struct Broker {
    now: u64,
    next_task: u64,
    next_correlation: u64,
    queue: BTreeMap<(u64, u64), Task>,
    events: BTreeMap<String, Vec<FieldSchema>>,
    subs: Vec<Subscription>,
    actuators: BTreeMap<String, Actuator>,
    sources: BTreeMap<String, Source>,
    log: RunLog,
}

impl Broker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn log(&self) -> &RunLog {
        &self.log
    }

    pub fn into_log(self) -> RunLog {
        self.log
    }

    /// Declares a publishable event. The first declaration wins.
    pub fn declare_event(&mut self, event: &str, fields: Vec<FieldSchema>) {
        self.events.entry(event.to_string()).or_insert(fields);
    }

    pub fn declare_actuator(&mut self, name: &str, actions: Vec<ActionSchema>) {
        self.actuators.insert(
            name.to_string(),
            Actuator {
                actions,
                state: Payload::new(),
            },
        );
    }

    /// Declares a storage or request-based sensor with its answers.
    pub fn declare_source(&mut self, name: &str, response: &str, fields: Vec<FieldSchema>, table: BTreeMap<String, Payload>) {
        self.sources.insert(
            name.to_string(),
            Source {
                response: response.to_string(),
                fields,
                table,
            },
        );
    }

    pub fn actuator_state(&self, name: &str) -> Option<&Payload> {
        self.actuators.get(name).map(|a| &a.state)
    }

    pub fn signature(&self, actuator: &str, action: &str) -> Result<&[FieldSchema], BrokerError> {
        let a = self
            .actuators
            .get(actuator)
            .ok_or_else(|| BrokerError::UnknownActuator(actuator.to_string()))?;
        a.actions
            .iter()
            .find(|x| x.name == action)
            .map(|x| x.params.as_slice())
            .ok_or_else(|| BrokerError::UnknownAction {
                actuator: actuator.to_string(),
                action: action.to_string(),
            })
    }

    pub fn schedule(&mut self, t: u64, task: Task) {
        self.queue.insert((t, self.next_task), task);
        self.next_task += 1;
    }

    fn append(&mut self, entry: Entry) -> u64 {
        let seq = self.log.entries.len() as u64;
        self.log.entries.push(LogEntry { t: self.now, seq, entry });
        seq
    }

    /// Subscribing twice to the same thing has no further effect.
    pub fn subscribe(&mut self, sub: Subscription) -> Result<(), BrokerError> {
        if !self.events.contains_key(&sub.event) {
            return Err(BrokerError::UnknownEvent(sub.event));
        }
        if !self.subs.contains(&sub) {
            self.subs.push(sub);
        }
        Ok(())
    }

    /// Logs the publish and queues one delivery per matching subscription,
    /// in subscription order. Returns the publish entry's sequence number.
    pub fn publish(&mut self, msg: Message) -> Result<u64, BrokerError> {
        let fields = self
            .events
            .get(&msg.event)
            .ok_or_else(|| BrokerError::UnknownEvent(msg.event.clone()))?;
        let payload = conform(msg.payload, fields).map_err(|message| BrokerError::PayloadMismatch {
            event: msg.event.clone(),
            message,
        })?;
        let msg = Message { payload, ..msg };
        let seq = self.append(Entry::Publish {
            event: msg.event.clone(),
            publisher: msg.publisher.clone(),
            location: msg.location.clone(),
            payload: msg.payload.clone(),
        });
        let targets: Vec<String> = self
            .subs
            .iter()
            .filter(|s| s.matches(&msg.event, &msg.location))
            .map(|s| s.subscriber.clone())
            .collect();
        for subscriber in targets {
            self.schedule(
                self.now + DELIVERY_LATENCY_MS,
                Task::Deliver {
                    subscriber,
                    message: msg.clone(),
                    publish_seq: seq,
                },
            );
        }
        Ok(seq)
    }

    /// Applies an action: each parameter becomes a state field, and
    /// `On`/`Off` switch `power`.
    pub fn command(&mut self, sender: &str, actuator: &str, action: &str, args: Vec<Value>) -> Result<(), BrokerError> {
        let params = self.signature(actuator, action)?.to_vec();
        let mismatch = |message: String| BrokerError::ArgTypeMismatch {
            actuator: actuator.to_string(),
            action: action.to_string(),
            message,
        };
        if params.len() != args.len() {
            return Err(mismatch(format!("expected {} arguments, got {}", params.len(), args.len())));
        }
        let mut typed = Vec::new();
        for (p, v) in params.iter().zip(args) {
            let ty = v.value_type();
            typed.push(
                v.coerce(p.ty)
                    .ok_or_else(|| mismatch(format!("`{}` is {}, got {ty}", p.name, p.ty)))?,
            );
        }
        self.append(Entry::Command {
            sender: sender.to_string(),
            actuator: actuator.to_string(),
            action: action.to_string(),
            args: typed.clone(),
        });
        let mut changes: Vec<(String, Value)> = params.iter().map(|p| p.name.clone()).zip(typed).collect();
        match action {
            "On" => changes.push(("power".into(), Value::Str("on".into()))),
            "Off" => changes.push(("power".into(), Value::Str("off".into()))),
            _ => {}
        }
        for (field, value) in changes {
            if let Some(a) = self.actuators.get_mut(actuator) {
                a.state.insert(field.clone(), value.clone());
            }
            self.append(Entry::StateChange {
                actuator: actuator.to_string(),
                field,
                value,
            });
        }
        Ok(())
    }

    /// Logs the request and queues its response; a missing key answers
    /// `NotFound`. Returns the correlation id.
    pub fn request(&mut self, requester: &str, target: &str, key: Value) -> Result<u64, BrokerError> {
        let source = self
            .sources
            .get(target)
            .ok_or_else(|| BrokerError::UnknownTarget(target.to_string()))?;
        let response = source.response.clone();
        let found = source.table.get(&key.key_text()).cloned();
        let payload = match found {
            Some(p) => Some(conform(p, &source.fields).map_err(|message| BrokerError::PayloadMismatch {
                event: response.clone(),
                message,
            })?),
            None => None,
        };
        self.next_correlation += 1;
        let correlation_id = self.next_correlation;
        self.append(Entry::Request {
            correlation_id,
            requester: requester.to_string(),
            target: target.to_string(),
            key,
        });
        self.schedule(
            self.now + RESPONSE_LATENCY_MS,
            Task::Respond {
                correlation_id,
                requester: requester.to_string(),
                target: target.to_string(),
                response,
                payload,
            },
        );
        Ok(correlation_id)
    }

    pub fn notify(&mut self, sender: &str, interactor: &str, event: &str, payload: Payload) {
        self.append(Entry::Notify {
            sender: sender.to_string(),
            interactor: interactor.to_string(),
            event: event.to_string(),
            payload,
        });
    }

    pub fn rule_error(&mut self, owner: &str, trigger: &str, message: String) {
        self.append(Entry::RuleError {
            owner: owner.to_string(),
            trigger: trigger.to_string(),
            message,
        });
    }

    /// Advances the clock to the next task at or before `until`. Deliveries
    /// and responses are logged here.
    pub fn pop(&mut self, until: u64) -> Option<Task> {
        let (&(t, _), _) = self.queue.first_key_value()?;
        if t > until {
            return None;
        }
        let (_, task) = self.queue.pop_first()?;
        self.now = t;
        match &task {
            Task::Deliver {
                subscriber,
                message,
                publish_seq,
            } => {
                self.append(Entry::Deliver {
                    event: message.event.clone(),
                    subscriber: subscriber.clone(),
                    publish_seq: *publish_seq,
                });
            }
            Task::Respond {
                correlation_id,
                requester,
                target,
                response,
                payload,
            } => {
                self.append(Entry::Response {
                    correlation_id: *correlation_id,
                    requester: requester.clone(),
                    target: target.clone(),
                    response: response.clone(),
                    status: if payload.is_some() {
                        ResponseStatus::Ok
                    } else {
                        ResponseStatus::NotFound
                    },
                    payload: payload.clone(),
                });
            }
            Task::Sample { .. } | Task::Reading { .. } => {}
        }
        Some(task)
    }

    /// Pops every task up to `until` without running handlers.
    pub fn drain(&mut self, until: u64) {
        while self.pop(until).is_some() {}
    }
}
