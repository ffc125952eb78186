//! Plug-in driven generation of domain, architecture and UI frameworks.
//!
//! Two plug-ins ship built in:
//!
//! * `neutral-scaffold` renders human-readable stubs from text templates.
//! * `sim-descriptor` emits the JSON descriptors the linker packs and the
//!   simulator runs.
//!
//! Scaffold plug-ins supply three templates, `driver`, `service` and `sink`.
//! Templates may only use the placeholders in [`PLACEHOLDERS`] and loop over
//! the lists in [`LISTS`]:
//!
//! | template  | scalars                 | lists (item keys)                                   |
//! |-----------|-------------------------|-----------------------------------------------------|
//! | `driver`  | name, kind              | events (event, payload), actions (action, params), properties (property) |
//! | `service` | name, kind, compute     | subscriptions (event, scope), publications (event, payload), requests (target, response), commands (actuator, action, args), handlers (handler, event, payload) |
//! | `sink`    | name, kind, event, payload | fields (field, type)                             |

pub mod descriptor;
pub mod template;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::diag::Diagnostic;
use crate::format::{format_expr, ms_as_seconds};
use crate::model::{ArchitectureSpec, DomainSpec, SensorKind, ServiceDecl, UserInteractionSpec};
use crate::validate::Project;
use descriptor::{canonical_json, driver_descriptors, scope_label, service_descriptor, sink_descriptor};
use template::{item, render_template, Bindings, Item, TemplateError};

pub const NEUTRAL_SCAFFOLD: &str = "neutral-scaffold";
pub const SIM_DESCRIPTOR: &str = "sim-descriptor";

/// Every scalar placeholder a template may use (list item keys included).
pub const PLACEHOLDERS: &[&str] = &[
    "name", "kind", "compute", "event", "payload", "scope", "target", "response", "actuator", "action", "args",
    "params", "handler", "field", "type", "property",
];

/// Every list a template may loop over.
pub const LISTS: &[&str] = &[
    "events",
    "actions",
    "properties",
    "subscriptions",
    "publications",
    "requests",
    "commands",
    "handlers",
    "fields",
];

/// Templates every scaffold plug-in provides.
pub const TEMPLATE_NAMES: &[&str] = &["driver", "service", "sink"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TargetKind {
    NeutralScaffold,
    SimDescriptor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plugin {
    pub id: String,
    pub target: TargetKind,
    pub templates: BTreeMap<String, String>,
}

impl Plugin {
    pub fn scaffold(id: &str, templates: [(&str, &str); 3]) -> Self {
        Self {
            id: id.to_string(),
            target: TargetKind::NeutralScaffold,
            templates: templates.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stage {
    DomainFramework,
    ArchitectureFramework,
    UiFramework,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratedArtifact {
    /// Relative, `/`-separated, without `.` or `..` segments.
    pub path: String,
    pub content: String,
    pub stage: Stage,
}

/// Artifacts plus any warnings raised while generating them.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Generated {
    pub artifacts: Vec<GeneratedArtifact>,
    pub warnings: Vec<Diagnostic>,
}

impl Generated {
    fn extend(&mut self, other: Generated) {
        self.artifacts.extend(other.artifacts);
        self.warnings.extend(other.warnings);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodegenError {
    #[error("unknown plug-in `{0}`")]
    UnknownPlugin(String),
    #[error("plug-in `{0}` is already registered")]
    DuplicatePlugin(String),
    #[error("plug-in `{plugin}` lacks template `{template}`")]
    MissingTemplate { plugin: String, template: String },
    #[error("plug-in `{plugin}`, template `{template}`: placeholder `{name}` is not in the documented set")]
    UnknownPlaceholder {
        plugin: String,
        template: String,
        name: String,
    },
    #[error("plug-in `{plugin}`, template `{template}`: {source}")]
    Template {
        plugin: String,
        template: String,
        source: TemplateError,
    },
}

const DRIVER_TEMPLATE: &str = "\
// Driver stub generated from the vocabulary. Fill in the device access code.
driver {name} ({kind})
{#each properties}  {property}
{/each}{#each events}  publishes {event}: {payload}
{/each}{#each actions}  action {action}({params})
{/each}";

const SERVICE_TEMPLATE: &str = "\
// Service framework generated from the architecture. Implement the abstract handlers.
abstract service {name} ({kind})
{#each subscriptions}  consume {event} [{scope}]
{/each}{#each publications}  publish {event}: {payload}
{/each}{#each requests}  request {target} -> {response}
{/each}{#each commands}  command {actuator}.{action}({args})
{/each}  compute: {compute}
{#each handlers}  abstract void {handler}({payload} {event});
{/each}";

const SINK_TEMPLATE: &str = "\
// Notification sink generated from the user-interaction spec.
interactor {name} ({kind})
  receives {event}: {payload}
{#each fields}  {field}: {type}
{/each}";

/// The plug-in repository. Built-ins come first, then registrations in
/// order.
#[derive(Clone, Debug)]
pub struct PluginRegistry {
    plugins: Vec<Plugin>,
}

impl Default for PluginRegistry {
    fn default() -> Self {
        Self {
            plugins: vec![
                Plugin::scaffold(
                    NEUTRAL_SCAFFOLD,
                    [("driver", DRIVER_TEMPLATE), ("service", SERVICE_TEMPLATE), ("sink", SINK_TEMPLATE)],
                ),
                Plugin {
                    id: SIM_DESCRIPTOR.to_string(),
                    target: TargetKind::SimDescriptor,
                    templates: BTreeMap::new(),
                },
            ],
        }
    }
}

impl PluginRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn list_plugins(&self) -> Vec<&str> {
        self.plugins.iter().map(|p| p.id.as_str()).collect()
    }

    /// Adds a plug-in after checking its templates against the closed
    /// placeholder set.
    pub fn register(&mut self, plugin: Plugin) -> Result<(), CodegenError> {
        if self.plugins.iter().any(|p| p.id == plugin.id) {
            return Err(CodegenError::DuplicatePlugin(plugin.id));
        }
        if plugin.target == TargetKind::NeutralScaffold {
            for name in TEMPLATE_NAMES {
                let Some(text) = plugin.templates.get(*name) else {
                    return Err(CodegenError::MissingTemplate {
                        plugin: plugin.id.clone(),
                        template: name.to_string(),
                    });
                };
                let segments = template::parse(text).map_err(|source| CodegenError::Template {
                    plugin: plugin.id.clone(),
                    template: name.to_string(),
                    source,
                })?;
                let (vars, lists) = template::names(&segments);
                let bad = vars
                    .iter()
                    .find(|v| !PLACEHOLDERS.contains(v))
                    .or_else(|| lists.iter().find(|l| !LISTS.contains(l)));
                if let Some(bad) = bad {
                    return Err(CodegenError::UnknownPlaceholder {
                        plugin: plugin.id.clone(),
                        template: name.to_string(),
                        name: bad.to_string(),
                    });
                }
            }
        }
        self.plugins.push(plugin);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<&Plugin, CodegenError> {
        self.plugins
            .iter()
            .find(|p| p.id == id)
            .ok_or_else(|| CodegenError::UnknownPlugin(id.to_string()))
    }

    pub fn generate_domain_framework(&self, domain: &DomainSpec, plugin: &str) -> Result<Generated, CodegenError> {
        let plugin = self.get(plugin)?;
        let mut out = Generated::default();
        match plugin.target {
            TargetKind::SimDescriptor => {
                for d in driver_descriptors(domain) {
                    out.artifacts.push(GeneratedArtifact {
                        path: format!("drivers/{}.json", d.name),
                        content: canonical_json(&d),
                        stage: Stage::DomainFramework,
                    });
                }
            }
            TargetKind::NeutralScaffold => {
                for (name, b) in driver_bindings(domain) {
                    out.artifacts.push(GeneratedArtifact {
                        path: format!("domain/{name}.driver.txt"),
                        content: render(plugin, "driver", &b)?,
                        stage: Stage::DomainFramework,
                    });
                }
            }
        }
        Ok(out)
    }

    /// Record types are resolved in the vocabulary.
    pub fn generate_architecture_framework(
        &self,
        arch: &ArchitectureSpec,
        domain: &DomainSpec,
        plugin: &str,
    ) -> Result<Generated, CodegenError> {
        let project = Project {
            domain: domain.clone(),
            arch: arch.clone(),
            ..Default::default()
        };
        self.architecture(&project, plugin)
    }

    pub fn generate_ui_framework(
        &self,
        ui: Option<&UserInteractionSpec>,
        plugin: &str,
    ) -> Result<Generated, CodegenError> {
        let plugin = self.get(plugin)?;
        let mut out = Generated::default();
        let Some(ui) = ui else { return Ok(out) };
        let lookup = |n: &str| ui.record(n);
        for i in &ui.interactors {
            let sink = sink_descriptor(i, &lookup);
            let artifact = match plugin.target {
                TargetKind::SimDescriptor => GeneratedArtifact {
                    path: format!("sinks/{}.json", i.name),
                    content: canonical_json(&sink),
                    stage: Stage::UiFramework,
                },
                TargetKind::NeutralScaffold => {
                    let mut b = Bindings::default();
                    b.set("name", &sink.name)
                        .set("kind", &sink.kind)
                        .set("event", &sink.event)
                        .set("payload", &sink.payload)
                        .list(
                            "fields",
                            sink.fields
                                .iter()
                                .map(|f| item([("field", f.name.clone()), ("type", f.ty.to_string())]))
                                .collect(),
                        );
                    GeneratedArtifact {
                        path: format!("ui/{}.sink.txt", i.name),
                        content: render(plugin, "sink", &b)?,
                        stage: Stage::UiFramework,
                    }
                }
            };
            out.artifacts.push(artifact);
        }
        Ok(out)
    }

    /// All three frameworks for a project; records resolve in the
    /// vocabulary and then in the UI spec.
    pub fn generate_project(&self, project: &Project, plugin: &str) -> Result<Generated, CodegenError> {
        let mut out = self.generate_domain_framework(&project.domain, plugin)?;
        out.extend(self.architecture(project, plugin)?);
        out.extend(self.generate_ui_framework(project.ui.as_ref(), plugin)?);
        Ok(out)
    }

    fn architecture(&self, project: &Project, plugin: &str) -> Result<Generated, CodegenError> {
        let plugin = self.get(plugin)?;
        let mut out = Generated::default();
        let lookup = |n: &str| project.record(n);
        let payload_of = |e: &str| project.event_payload(e).map(str::to_string);
        for s in &project.arch.services {
            if s.consumes.is_empty() {
                out.warnings.push(Diagnostic::warning(
                    "NoHandlers",
                    format!("service `{}` consumes nothing, so its framework has no handlers", s.name),
                    s.span.clone(),
                ));
            }
            let has_rules = project.rules.for_service(&s.name).is_some();
            let desc = service_descriptor(s, &payload_of, &lookup, has_rules);
            let artifact = match plugin.target {
                TargetKind::SimDescriptor => GeneratedArtifact {
                    path: format!("services/{}.json", s.name),
                    content: canonical_json(&desc),
                    stage: Stage::ArchitectureFramework,
                },
                TargetKind::NeutralScaffold => GeneratedArtifact {
                    path: format!("architecture/{}.service.txt", s.name),
                    content: render(plugin, "service", &service_bindings(s, &desc))?,
                    stage: Stage::ArchitectureFramework,
                },
            };
            out.artifacts.push(artifact);
        }
        Ok(out)
    }
}

fn render(plugin: &Plugin, name: &str, b: &Bindings) -> Result<String, CodegenError> {
    let text = plugin.templates.get(name).ok_or_else(|| CodegenError::MissingTemplate {
        plugin: plugin.id.clone(),
        template: name.to_string(),
    })?;
    render_template(text, b).map_err(|source| CodegenError::Template {
        plugin: plugin.id.clone(),
        template: name.to_string(),
        source,
    })
}

/// Handler names follow `onNew<event>` for events and
/// `onNew<response>Received` for responses.
pub fn handler_names(s: &ServiceDecl) -> Vec<String> {
    s.consumes
        .iter()
        .map(|c| format!("onNew{}", c.event))
        .chain(s.requests.iter().map(|r| format!("onNew{}Received", r.response)))
        .collect()
}

fn service_bindings(s: &ServiceDecl, d: &descriptor::ServiceDescriptor) -> Bindings {
    let mut handlers: Vec<Item> = d
        .subscriptions
        .iter()
        .map(|x| {
            item([
                ("handler", format!("onNew{}", x.event)),
                ("event", x.event.clone()),
                ("payload", x.payload.clone()),
            ])
        })
        .collect();
    handlers.extend(d.requests.iter().map(|r| {
        item([
            ("handler", format!("onNew{}Received", r.response)),
            ("event", r.response.clone()),
            ("payload", r.payload.clone()),
        ])
    }));
    let mut b = Bindings::default();
    b.set("name", &s.name)
        .set("kind", s.kind.keyword())
        .set(
            "compute",
            match &s.compute {
                Some(c) => format!("{}({}) on {} (generated)", c.op, c.window, c.field),
                None => "none".to_string(),
            },
        )
        .list(
            "subscriptions",
            s.consumes
                .iter()
                .map(|c| item([("event", c.event.clone()), ("scope", scope_label(c.scope).to_string())]))
                .collect(),
        )
        .list(
            "publications",
            s.generates
                .iter()
                .map(|g| item([("event", g.event.clone()), ("payload", g.payload.clone())]))
                .collect(),
        )
        .list(
            "requests",
            s.requests
                .iter()
                .map(|r| item([("target", r.target.clone()), ("response", r.response.clone())]))
                .collect(),
        )
        .list(
            "commands",
            s.commands
                .iter()
                .map(|c| {
                    let args: Vec<_> = c
                        .args
                        .iter()
                        .map(|a| format!("{} = {}", a.param, format_expr(&a.value)))
                        .collect();
                    item([
                        ("actuator", c.actuator.clone()),
                        ("action", c.action.clone()),
                        ("args", args.join(", ")),
                    ])
                })
                .collect(),
        )
        .list("handlers", handlers);
    b
}

fn event_items<'a>(events: impl Iterator<Item = &'a crate::model::EventDecl>) -> Vec<Item> {
    events
        .map(|e| item([("event", e.event.clone()), ("payload", e.payload.clone())]))
        .collect()
}

fn driver_bindings(domain: &DomainSpec) -> Vec<(String, Bindings)> {
    let base = |name: &str, kind: &str| {
        let mut b = Bindings::default();
        b.set("name", name)
            .set("kind", kind)
            .list("events", vec![])
            .list("actions", vec![])
            .list("properties", vec![]);
        b
    };
    let prop = |s: String| item([("property", s)]);
    let mut out = Vec::new();
    for t in &domain.tags {
        let mut b = base(&t.name, "tag");
        b.list("events", event_items(t.generates.iter()));
        out.push((t.name.clone(), b));
    }
    for s in &domain.sensors {
        let mut b = base(&s.name, s.resource_kind().label());
        b.list("events", event_items(std::iter::once(&s.generates)));
        let props = match &s.kind {
            SensorKind::Periodic {
                sample_period_ms,
                duration_ms,
            } => vec![
                prop(format!("sample period: {} s", ms_as_seconds(*sample_period_ms))),
                prop(format!("duration: {} s", ms_as_seconds(*duration_ms))),
            ],
            SensorKind::EventDriven { condition } => vec![prop(format!("onCondition: {}", format_expr(condition)))],
            SensorKind::RequestBased { access_key } => {
                vec![prop(format!("accessed-by: {}: {}", access_key.name, access_key.ty))]
            }
        };
        b.list("properties", props);
        out.push((s.name.clone(), b));
    }
    for a in &domain.actuators {
        let mut b = base(&a.name, "actuator");
        b.list(
            "actions",
            a.actions
                .iter()
                .map(|x| {
                    let params: Vec<_> = x.params.iter().map(|p| format!("{}: {}", p.name, p.ty)).collect();
                    item([("action", x.name.clone()), ("params", params.join(", "))])
                })
                .collect(),
        );
        out.push((a.name.clone(), b));
    }
    for s in &domain.storages {
        let mut b = base(&s.name, "storage");
        b.list("events", event_items(std::iter::once(&s.generates)));
        b.list(
            "properties",
            vec![prop(format!("accessed-by: {}: {}", s.access_key.name, s.access_key.ty))],
        );
        out.push((s.name.clone(), b));
    }
    out
}

/// True when artifact paths are unique and normalized.
pub fn paths_are_clean(artifacts: &[GeneratedArtifact]) -> bool {
    let mut seen = BTreeSet::new();
    artifacts.iter().all(|a| {
        seen.insert(a.path.as_str())
            && !a.path.starts_with('/')
            && a.path.split('/').all(|seg| !seg.is_empty() && seg != "." && seg != "..")
    })
}
