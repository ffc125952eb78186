//! Helpers shared by integration and acceptance tests.
#![allow(dead_code)]

pub mod gen;
pub mod mutate;

use std::path::PathBuf;

use iotforge_core::format::format_spec;
use iotforge_core::layout::ProjectLayout;
use iotforge_core::parse::{parse_architecture, parse_deployment, parse_domain, parse_logic_rules, parse_userinteraction};
use iotforge_core::validate::Project;

pub const CORPORA: [&str; 3] = ["hvac", "fire", "smarthome"];

pub fn corpus_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/corpus").join(name)
}

pub fn load(name: &str) -> Project {
    let loaded = ProjectLayout::new(corpus_dir(name)).load().unwrap();
    assert!(loaded.diagnostics.is_empty(), "{name}: {:?}", loaded.diagnostics);
    loaded.project.unwrap()
}

fn reparse<T>(what: &str, parsed: (Option<T>, Vec<iotforge_core::diag::Diagnostic>), text: &str) -> Result<T, String> {
    match parsed {
        (Some(v), d) if d.is_empty() => Ok(v),
        (_, d) => Err(format!("{what} did not parse back: {d:?}\n{text}")),
    }
}

/// Formats every spec of `p` and parses the text back.
pub fn roundtrip(p: &Project) -> Result<Project, String> {
    let vocab = format_spec(&p.domain);
    let arch = format_spec(&p.arch);
    let deploy = format_spec(&p.deploy);
    let rules = format_spec(&p.rules);
    let ui = match &p.ui {
        Some(u) => {
            let text = format_spec(u);
            Some(reparse("ui", parse_userinteraction(&text, "ui"), &text)?)
        }
        None => None,
    };
    Ok(Project {
        domain: reparse("vocab", parse_domain(&vocab, "vocab"), &vocab)?,
        arch: reparse("arch", parse_architecture(&arch, "arch"), &arch)?,
        ui,
        deploy: reparse("deploy", parse_deployment(&deploy, "deploy"), &deploy)?,
        rules: reparse("rules", parse_logic_rules(&rules, "rules"), &rules)?,
    })
}
