//! Deterministic discrete-event simulator hosting the whole platform:
//! simulated hosts, workload generation, the request flow through balancer,
//! software tier, data proxy and data tier, plus trace and replay tooling.

pub mod engine;
pub mod host;
pub mod metrics;
pub mod scenario;
pub mod trace;
pub mod workload;

pub use engine::{replay_trace, run, run_scenario_text, RequestRecord, RunError, RunOutput};
pub use host::HostSim;
pub use metrics::Metrics;
pub use scenario::{Scenario, ScenarioError};
pub use trace::{parse_trace, ReplayReport, TraceError};
pub use workload::{generate_workload, Arrival, BadSpec};
