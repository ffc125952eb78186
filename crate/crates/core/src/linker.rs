//! Packs descriptors, rules and the mapping plan into one package per device.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codegen::descriptor::{canonical_json, DriverDescriptor, ServiceDescriptor, SinkDescriptor};
use crate::codegen::GeneratedArtifact;
use crate::format::format_spec;
use crate::mapper::MappingPlan;
use crate::model::{LogicRuleSet, ServiceKind};
use crate::validate::Project;

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("no generated descriptor for `{0}`")]
    MissingDescriptor(String),
    #[error("mapping plan does not match the project: {0}")]
    PlanSpecMismatch(String),
    #[error("malformed descriptor {path}: {source}")]
    BadDescriptor { path: String, source: serde_json::Error },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> LinkError + '_ {
    move |source| LinkError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub device: String,
    pub location: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub platform: Option<String>,
    /// Selects the runtime wrapper.
    pub protocol: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub database: Option<String>,
    pub services: Vec<String>,
    pub drivers: Vec<String>,
    pub sinks: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DevicePackage {
    pub device_name: String,
    pub manifest: Manifest,
    pub services: Vec<ServiceDescriptor>,
    pub drivers: Vec<DriverDescriptor>,
    pub sinks: Vec<SinkDescriptor>,
    /// Rule blocks of the hosted Custom services.
    pub rules: LogicRuleSet,
}

#[derive(Default)]
struct Descriptors {
    drivers: BTreeMap<String, DriverDescriptor>,
    services: BTreeMap<String, ServiceDescriptor>,
    sinks: BTreeMap<String, SinkDescriptor>,
}

fn decode<T: for<'de> Deserialize<'de>>(a: &GeneratedArtifact) -> Result<T, LinkError> {
    serde_json::from_str(&a.content).map_err(|source| LinkError::BadDescriptor {
        path: a.path.clone(),
        source,
    })
}

fn index(artifacts: &[GeneratedArtifact]) -> Result<Descriptors, LinkError> {
    let mut d = Descriptors::default();
    for a in artifacts {
        let Some((dir, file)) = a.path.split_once('/') else { continue };
        let Some(name) = file.strip_suffix(".json") else { continue };
        match dir {
            "drivers" => {
                d.drivers.insert(name.to_string(), decode(a)?);
            }
            "services" => {
                d.services.insert(name.to_string(), decode(a)?);
            }
            "sinks" => {
                d.sinks.insert(name.to_string(), decode(a)?);
            }
            _ => {}
        }
    }
    Ok(d)
}

/// Builds one package per deployment device, in deployment order.
///
/// Services and sinks go where the plan puts them; drivers go where the
/// deployment spec lists them.
pub fn link(p: &Project, plan: &MappingPlan, artifacts: &[GeneratedArtifact]) -> Result<Vec<DevicePackage>, LinkError> {
    let desc = index(artifacts)?;

    let mut expected: BTreeSet<&str> = p.arch.services.iter().map(|s| s.name.as_str()).collect();
    expected.extend(p.interactors().iter().map(|i| i.name.as_str()));
    let planned: BTreeSet<&str> = plan.assignments.keys().map(String::as_str).collect();
    if let Some(extra) = planned.difference(&expected).next() {
        return Err(LinkError::PlanSpecMismatch(format!("`{extra}` is not a service or interactor")));
    }
    if let Some(missing) = expected.difference(&planned).next() {
        return Err(LinkError::PlanSpecMismatch(format!("`{missing}` has no device")));
    }
    for (name, device) in &plan.assignments {
        if p.deploy.device(device).is_none() {
            return Err(LinkError::PlanSpecMismatch(format!("`{name}` is mapped to unknown device `{device}`")));
        }
        if let Some(pinned) = p.deploy.hosts_of(name).next() {
            if pinned.name != *device {
                return Err(LinkError::PlanSpecMismatch(format!(
                    "`{name}` is pinned to `{}` but mapped to `{device}`",
                    pinned.name
                )));
            }
        }
    }

    let mut packages = Vec::new();
    for dev in &p.deploy.devices {
        let mut pkg = DevicePackage {
            device_name: dev.name.clone(),
            manifest: Manifest {
                device: dev.name.clone(),
                location: dev.location.clone(),
                platform: dev.platform.clone(),
                protocol: dev.protocol.clone(),
                database: dev.database.clone(),
                services: Vec::new(),
                drivers: Vec::new(),
                sinks: Vec::new(),
            },
            services: Vec::new(),
            drivers: Vec::new(),
            sinks: Vec::new(),
            rules: LogicRuleSet::default(),
        };
        for s in &p.arch.services {
            if plan.device_of(&s.name) != Some(dev.name.as_str()) {
                continue;
            }
            let d = desc.services.get(&s.name).ok_or_else(|| LinkError::MissingDescriptor(s.name.clone()))?;
            pkg.services.push(d.clone());
            pkg.manifest.services.push(s.name.clone());
            if s.kind == ServiceKind::Custom {
                if let Some(r) = p.rules.for_service(&s.name) {
                    pkg.rules.services.push(r.clone());
                }
            }
        }
        for r in &dev.resources {
            if p.domain.resource_kind(&r.name).is_none() {
                continue;
            }
            let d = desc.drivers.get(&r.name).ok_or_else(|| LinkError::MissingDescriptor(r.name.clone()))?;
            pkg.drivers.push(d.clone());
            pkg.manifest.drivers.push(r.name.clone());
        }
        for i in p.interactors() {
            if plan.device_of(&i.name) != Some(dev.name.as_str()) {
                continue;
            }
            let d = desc.sinks.get(&i.name).ok_or_else(|| LinkError::MissingDescriptor(i.name.clone()))?;
            pkg.sinks.push(d.clone());
            pkg.manifest.sinks.push(i.name.clone());
        }
        packages.push(pkg);
    }
    Ok(packages)
}

/// Writes `<out>/<device>/...`. Each device directory is replaced as a whole.
pub fn write_packages(packages: &[DevicePackage], out: &Path) -> Result<(), LinkError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    for pkg in packages {
        let root = out.join(&pkg.device_name);
        if root.exists() {
            fs::remove_dir_all(&root).map_err(io_err(&root))?;
        }
        let mut files: Vec<(PathBuf, String)> = vec![(root.join("manifest.json"), canonical_json(&pkg.manifest))];
        for s in &pkg.services {
            files.push((root.join("services").join(format!("{}.json", s.service_name)), canonical_json(s)));
        }
        for d in &pkg.drivers {
            files.push((root.join("drivers").join(format!("{}.json", d.name)), canonical_json(d)));
        }
        for s in &pkg.sinks {
            files.push((root.join("sinks").join(format!("{}.json", s.name)), canonical_json(s)));
        }
        for r in &pkg.rules.services {
            files.push((root.join("rules").join(format!("{}.rules", r.service)), format_spec(r)));
        }
        for dir in ["services", "drivers", "sinks", "rules"] {
            let d = root.join(dir);
            fs::create_dir_all(&d).map_err(io_err(&d))?;
        }
        for (path, text) in files {
            fs::write(&path, text).map_err(io_err(&path))?;
        }
    }
    Ok(())
}

fn read_dir_sorted(dir: &Path, ext: &str) -> Result<Vec<(String, String)>, LinkError> {
    let mut out = Vec::new();
    if !dir.exists() {
        return Ok(out);
    }
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let Some(stem) = path.file_name().and_then(|n| n.to_str()).and_then(|n| n.strip_suffix(ext)) else {
            continue;
        };
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        out.push((stem.to_string(), text));
    }
    out.sort();
    Ok(out)
}

fn load_json<T: for<'de> Deserialize<'de>>(dir: &Path, sub: &str, names: &[String]) -> Result<Vec<T>, LinkError> {
    let files: BTreeMap<String, String> = read_dir_sorted(&dir.join(sub), ".json")?.into_iter().collect();
    names
        .iter()
        .map(|n| {
            let text = files.get(n).ok_or_else(|| LinkError::MissingDescriptor(n.clone()))?;
            serde_json::from_str(text).map_err(|source| LinkError::BadDescriptor {
                path: dir.join(sub).join(format!("{n}.json")).display().to_string(),
                source,
            })
        })
        .collect()
}

/// Reads back the package written for one device.
pub fn read_package(dir: &Path) -> Result<DevicePackage, LinkError> {
    let manifest_path = dir.join("manifest.json");
    let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|source| LinkError::BadDescriptor {
        path: manifest_path.display().to_string(),
        source,
    })?;
    let services = load_json(dir, "services", &manifest.services)?;
    let drivers = load_json(dir, "drivers", &manifest.drivers)?;
    let sinks = load_json(dir, "sinks", &manifest.sinks)?;

    let mut rules = LogicRuleSet::default();
    for (name, text) in read_dir_sorted(&dir.join("rules"), ".rules")? {
        let file = format!("{name}.rules");
        let (parsed, diags) = crate::parse::parse_logic_rules(&text, &file);
        match parsed {
            Some(set) if !crate::diag::has_errors(&diags) => rules.services.extend(set.services),
            _ => {
                return Err(LinkError::PlanSpecMismatch(format!(
                    "rule file {} does not parse",
                    dir.join(file).display()
                )))
            }
        }
    }
    Ok(DevicePackage {
        device_name: manifest.device.clone(),
        manifest,
        services,
        drivers,
        sinks,
        rules,
    })
}

/// Reads every package directory under `out`, sorted by device name.
pub fn read_packages(out: &Path) -> Result<Vec<DevicePackage>, LinkError> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(out).map_err(io_err(out))? {
        let path = entry.map_err(io_err(out))?.path();
        if path.join("manifest.json").is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    dirs.iter().map(|d| read_package(d)).collect()
}
