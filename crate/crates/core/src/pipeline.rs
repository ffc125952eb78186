//! The build stages after validation, chained: generate descriptors, map,
//! link, simulate.

use thiserror::Error;

use crate::codegen::{CodegenError, Generated, PluginRegistry, SIM_DESCRIPTOR};
use crate::layout::ProjectLayout;
use crate::linker::{link, DevicePackage, LinkError};
use crate::mapper::{MapError, Mapper, MapperConfig, MappingPlan};
use crate::sim::{run_simulation, RunLog, SensorTraces, SimError, StorageSeed, TraceError};
use crate::validate::Project;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Codegen(#[from] CodegenError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Clone, Debug)]
pub struct Linked {
    pub generated: Generated,
    pub plan: MappingPlan,
    pub packages: Vec<DevicePackage>,
}

/// Descriptors, plan and packages for a validated project.
pub fn link_project(p: &Project, cfg: &MapperConfig) -> Result<Linked, PipelineError> {
    let generated = PluginRegistry::new().generate_project(p, SIM_DESCRIPTOR)?;
    let plan = Mapper::new().map_services(p, cfg)?;
    let packages = link(p, &plan, &generated.artifacts)?;
    Ok(Linked {
        generated,
        plan,
        packages,
    })
}

/// Traces and seeds from the project's conventional directories.
pub fn load_inputs(layout: &ProjectLayout) -> Result<(SensorTraces, StorageSeed), PipelineError> {
    Ok((
        SensorTraces::load_dir(&layout.traces_dir())?,
        StorageSeed::load_dir(&layout.seeds_dir())?,
    ))
}

/// Links and runs a project with its bundled traces and seeds.
pub fn simulate(layout: &ProjectLayout, p: &Project, cfg: &MapperConfig, until: u64) -> Result<(Linked, RunLog), PipelineError> {
    let linked = link_project(p, cfg)?;
    let (traces, seeds) = load_inputs(layout)?;
    let log = run_simulation(&linked.packages, &traces, &seeds, until)?;
    Ok((linked, log))
}
