//! Manifest loading, batch planning, startup plans and their execution.

pub mod adapter;
pub mod batches;
pub mod execute;
pub mod inventory;
pub mod manifest;
pub mod plan;
pub mod stats;

pub use adapter::{CommandOutput, DockerAdapter, MockAdapter, RuntimeAdapter, SpyAdapter};
pub use batches::{plan_batches, BatchRounding, BatchSchedule, InfeasibleError};
pub use execute::{execute, ExecOptions, ExecutionReport, Mode, StepStatus};
pub use inventory::{gather_interfaces, Inventory, InventoryError};
pub use manifest::{load_manifest, ExperimentManifest, ManifestError, ValidationError};
pub use plan::{build_startup_plan, build_startup_plan_with, PhasedPlan, PlanError, StepKind};
pub use stats::{summarize_stats, MemoryReport, StatsError};
