//! Image registry, pipeline timing, and the orchestrator that runs
//! deployment, test and teardown pipelines over the simulated cluster.

mod orchestrator;
mod reconcile;
mod registry;
mod run;
mod timing;

pub use orchestrator::{
    Deployment, DeploymentStatus, Orchestrator, OrchestratorConfig, OrchestratorError, ResilienceTimeline, TestOutcome, TimelineEntry,
    TimelineKind, SEED_UE_DATABASE,
};
pub use reconcile::{Action, DeclaredState, LoadError, ReconcileReport, Reconciler};
pub use registry::{BuildReport, ChainImage, ImageDescriptor, ImageKey, PullOutcome, Registry, RegistryError};
pub use run::{DeploymentRecord, PipelineRun, RunKind, RunState, TaskOutcome, TaskRecord};
pub use timing::{ChainSpec, TimingModel, SEED_TIMING};
