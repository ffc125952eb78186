//! Conventional on-disk project layout.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::diag::Diagnostic;
use crate::parse::{parse_architecture, parse_deployment, parse_domain, parse_logic_rules, parse_userinteraction};
use crate::validate::Project;

pub const VOCAB: &str = "app.vocab.mydsl";
pub const ARCH: &str = "app.arch.mydsl";
pub const UI: &str = "app.ui.mydsl";
pub const DEPLOY: &str = "app.deploy.mydsl";
pub const RULES: &str = "app.rules";
pub const TRACES: &str = "traces";
pub const SEEDS: &str = "seeds";

#[derive(Debug, Error)]
pub enum LayoutError {
    #[error("missing mandatory file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Clone, Debug)]
pub struct ProjectLayout {
    pub root: PathBuf,
}

/// Parsed sources of a project, with every parse diagnostic.
#[derive(Debug)]
pub struct Loaded {
    /// `None` when any file failed to parse.
    pub project: Option<Project>,
    pub diagnostics: Vec<Diagnostic>,
}

impl ProjectLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn traces_dir(&self) -> PathBuf {
        self.root.join(TRACES)
    }

    pub fn seeds_dir(&self) -> PathBuf {
        self.root.join(SEEDS)
    }

    fn read(&self, name: &str, mandatory: bool) -> Result<Option<String>, LayoutError> {
        let path = self.path(name);
        match fs::read_to_string(&path) {
            Ok(text) => Ok(Some(text)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                if mandatory {
                    Err(LayoutError::MissingFile(path))
                } else {
                    Ok(None)
                }
            }
            Err(source) => Err(LayoutError::Io { path, source }),
        }
    }

    /// Reads and parses every spec file. Missing vocab, arch or deploy files
    /// are a layout error; parse errors come back as diagnostics.
    pub fn load(&self) -> Result<Loaded, LayoutError> {
        let vocab = self.read(VOCAB, true)?.unwrap_or_default();
        let arch = self.read(ARCH, true)?.unwrap_or_default();
        let deploy = self.read(DEPLOY, true)?.unwrap_or_default();
        let ui = self.read(UI, false)?;
        let rules = self.read(RULES, false)?;

        let mut diagnostics = Vec::new();
        let mut take = |d: Vec<Diagnostic>| diagnostics.extend(d);
        let (domain, d) = parse_domain(&vocab, VOCAB);
        take(d);
        let (arch, d) = parse_architecture(&arch, ARCH);
        take(d);
        let (deploy, d) = parse_deployment(&deploy, DEPLOY);
        take(d);
        let ui = match ui {
            Some(text) => {
                let (spec, d) = parse_userinteraction(&text, UI);
                take(d);
                Some(spec)
            }
            None => None,
        };
        let rules = match rules {
            Some(text) => {
                let (spec, d) = parse_logic_rules(&text, RULES);
                take(d);
                spec
            }
            None => Some(Default::default()),
        };

        let project = match (domain, arch, deploy, ui, rules) {
            (Some(domain), Some(arch), Some(deploy), ui, Some(rules)) if ui.as_ref().is_none_or(Option::is_some) => {
                Some(Project {
                    domain,
                    arch,
                    ui: ui.flatten(),
                    deploy,
                    rules,
                })
            }
            _ => None,
        };
        crate::diag::sort(&mut diagnostics);
        Ok(Loaded { project, diagnostics })
    }
}

/// Loads and validates; the returned diagnostics include parse and
/// validation findings.
pub fn check(root: &Path) -> Result<Loaded, LayoutError> {
    let mut loaded = ProjectLayout::new(root).load()?;
    if let Some(p) = &loaded.project {
        let extra = crate::validate::validate_project(p);
        loaded.diagnostics.extend(extra);
        crate::diag::sort(&mut loaded.diagnostics);
    }
    Ok(loaded)
}
