use std::fs;
use std::io::{self, IsTerminal, Write};
use std::path::{Path, PathBuf};

use iotforge_core::codegen::{CodegenError, GeneratedArtifact, PluginRegistry, SIM_DESCRIPTOR};
use iotforge_core::diag::{self, Diagnostic, Severity};
use iotforge_core::layout::{self, LayoutError, ProjectLayout};
use iotforge_core::linker::{self, LinkError};
use iotforge_core::mapper::{MapError, Mapper, MapperConfig, MappingPlan};
use iotforge_core::pipeline::{self, PipelineError};
use iotforge_core::sim::{run_simulation, RunLog};
use iotforge_core::validate::Project;
use thiserror::Error;

use crate::Format;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{errors} error(s) found")]
    Invalid { errors: usize },
    #[error(transparent)]
    Codegen(#[from] CodegenError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("plan {}: {source}", path.display())]
    Plan { path: PathBuf, source: serde_json::Error },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Where messages go: results on stdout, diagnostics and errors on stderr.
pub struct Output {
    format: Format,
    color: bool,
}

impl Output {
    pub fn new(format: Format) -> Self {
        let color = std::env::var_os("IOTFORGE_NO_COLOR").is_none() && io::stderr().is_terminal();
        Self { format, color }
    }

    fn paint(&self, text: &str, code: &str) -> String {
        if self.color {
            format!("\x1b[{code}m{text}\x1b[0m")
        } else {
            text.to_string()
        }
    }

    pub fn diagnostics(&self, diags: &[Diagnostic]) {
        let mut err = io::stderr().lock();
        for d in diags {
            let _ = match self.format {
                Format::Json => writeln!(err, "{}", d.to_json()),
                Format::Text => {
                    let sev = match d.severity {
                        Severity::Error => self.paint("error", "1;31"),
                        Severity::Warning => self.paint("warning", "1;33"),
                    };
                    writeln!(
                        err,
                        "{}:{}:{}: {sev}[{}]: {}",
                        d.span.file, d.span.line, d.span.column, d.code, d.message
                    )
                }
            };
        }
    }

    pub fn error(&self, e: &CliError) {
        match self.format {
            Format::Json => eprintln!("{}", serde_json::json!({"severity": "error", "message": e.to_string()})),
            Format::Text => eprintln!("{}: {e}", self.paint("error", "1;31")),
        }
    }

    /// A progress line; text mode only.
    pub fn note(&self, msg: &str) {
        if self.format == Format::Text {
            eprintln!("{msg}");
        }
    }
}

/// Loads and validates; any Error diagnostic stops the command.
pub fn check(out: &Output, root: &Path) -> Result<Project, CliError> {
    let loaded = layout::check(root).map_err(|e| match e {
        LayoutError::MissingFile(p) => CliError::Usage(format!("missing mandatory file {}", p.display())),
        LayoutError::Io { path, source } => CliError::Io { path, source },
    })?;
    out.diagnostics(&loaded.diagnostics);
    let errors = loaded.diagnostics.iter().filter(|d| d.is_error()).count();
    match loaded.project {
        Some(p) if errors == 0 => {
            let warnings = loaded.diagnostics.len();
            out.note(&format!("{}: ok ({warnings} warning(s))", root.display()));
            Ok(p)
        }
        _ => Err(CliError::Invalid { errors: errors.max(1) }),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

fn write_artifacts(dir: &Path, artifacts: &[GeneratedArtifact]) -> Result<(), CliError> {
    for a in artifacts {
        write_file(&dir.join(&a.path), &a.content)?;
    }
    Ok(())
}

fn build_project(out: &Output, p: &Project, plugin: &str, dir: &Path) -> Result<usize, CliError> {
    let generated = PluginRegistry::new().generate_project(p, plugin)?;
    let mut warnings = generated.warnings.clone();
    diag::sort(&mut warnings);
    out.diagnostics(&warnings);
    write_artifacts(dir, &generated.artifacts)?;
    Ok(generated.artifacts.len())
}

pub fn build(out: &Output, root: &Path, plugin: &str, dir: &Path) -> Result<(), CliError> {
    let p = check(out, root)?;
    let n = build_project(out, &p, plugin, dir)?;
    println!("wrote {n} artifact(s) to {}", dir.display());
    Ok(())
}

fn plan_for(p: &Project, seed: u64, strategy: &str) -> Result<MappingPlan, CliError> {
    let cfg = MapperConfig {
        strategy: strategy.to_string(),
        ..config(seed)
    };
    Ok(Mapper::new().map_services(p, &cfg)?)
}

pub fn map(out: &Output, root: &Path, seed: u64, strategy: &str, file: Option<&Path>) -> Result<(), CliError> {
    let p = check(out, root)?;
    let json = plan_for(&p, seed, strategy)?.to_json();
    match file {
        Some(f) => {
            write_file(f, &json)?;
            println!("wrote plan to {}", f.display());
        }
        None => print!("{json}"),
    }
    Ok(())
}

fn read_plan(path: &Path) -> Result<MappingPlan, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    MappingPlan::from_json(&text).map_err(|source| CliError::Plan {
        path: path.to_path_buf(),
        source,
    })
}

fn link_to(p: &Project, plan: &MappingPlan, dir: &Path) -> Result<usize, CliError> {
    let generated = PluginRegistry::new().generate_project(p, SIM_DESCRIPTOR)?;
    let packages = linker::link(p, plan, &generated.artifacts)?;
    linker::write_packages(&packages, dir)?;
    Ok(packages.len())
}

pub fn link(out: &Output, root: &Path, seed: u64, plan: Option<&Path>, dir: &Path) -> Result<(), CliError> {
    let p = check(out, root)?;
    let plan = match plan {
        Some(f) => read_plan(f)?,
        None => plan_for(&p, seed, "random")?,
    };
    let n = link_to(&p, &plan, dir)?;
    println!("wrote {n} package(s) to {}", dir.display());
    Ok(())
}

fn simulate(root: &Path, packages: &[linker::DevicePackage], until: u64) -> Result<RunLog, CliError> {
    let (traces, seeds) = pipeline::load_inputs(&ProjectLayout::new(root))?;
    run_simulation(packages, &traces, &seeds, until).map_err(|e| CliError::Pipeline(e.into()))
}

fn config(seed: u64) -> MapperConfig {
    MapperConfig {
        seed,
        ..Default::default()
    }
}

pub fn run(out: &Output, root: &Path, seed: u64, until: u64, log: Option<&Path>) -> Result<(), CliError> {
    let p = check(out, root)?;
    let linked = pipeline::link_project(&p, &config(seed))?;
    let run_log = simulate(root, &linked.packages, until)?;
    if let Some(f) = log {
        write_file(f, &run_log.to_jsonl())?;
    }
    print!("{}", run_log.summary());
    Ok(())
}

/// Writes `build/`, `plan.json`, `packages/` and `run.jsonl` under `dir`.
pub fn pipeline(out: &Output, root: &Path, seed: u64, until: u64, dir: &Path) -> Result<(), CliError> {
    out.note("[1/5] check");
    let p = check(out, root)?;
    out.note("[2/5] build");
    let n = build_project(out, &p, SIM_DESCRIPTOR, &dir.join("build"))?;
    out.note(&format!("      {n} artifact(s)"));
    out.note("[3/5] map");
    let linked = pipeline::link_project(&p, &config(seed))?;
    write_file(&dir.join("plan.json"), &linked.plan.to_json())?;
    out.note("[4/5] link");
    linker::write_packages(&linked.packages, &dir.join("packages"))?;
    out.note(&format!("      {} package(s)", linked.packages.len()));
    out.note("[5/5] run");
    let run_log = simulate(root, &linked.packages, until)?;
    write_file(&dir.join("run.jsonl"), &run_log.to_jsonl())?;
    print!("{}", run_log.summary());
    Ok(())
}
