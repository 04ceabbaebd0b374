//! Scenario files: the single source of experiment truth. TOML with
//! key/value settings plus nested sections for catalog, components,
//! publications, bindings, and workload.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::ComponentProfile;
use crate::market::{EnvLabel, ResourceOffer};
use crate::model::{
    DimensionWeights, PerfInterval, ResourceTemplate, SymbolicReq, TimeInterval,
};
use crate::repository::PackageKind;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub sim: SimSettings,
    #[serde(default)]
    pub detector: DetectorSettings,
    #[serde(default)]
    pub autoscaler: AutoscalerSettings,
    #[serde(default)]
    pub offers: Vec<OfferSpec>,
    /// Optional external catalog, merged after inline offers.
    #[serde(default)]
    pub catalog_file: Option<String>,
    #[serde(default)]
    pub components: Vec<ComponentSpec>,
    #[serde(default)]
    pub publish: Vec<PublishSpec>,
    #[serde(default)]
    pub bind: Vec<BindSpec>,
    #[serde(default)]
    pub workload: WorkloadSpec,
}

fn default_name() -> String {
    "scenario".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSettings {
    pub seed: u64,
    pub duration_s: f64,
    pub network_latency_ms: u64,
    pub sample_period_s: f64,
    pub copy_bandwidth_mb_per_s: f64,
    pub proxy_count: usize,
    pub proxy_replication_factor: usize,
    pub rental_hours: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            seed: 42,
            duration_s: 600.0,
            network_latency_ms: 1,
            sample_period_s: 1.0,
            copy_bandwidth_mb_per_s: 100.0,
            proxy_count: 4,
            proxy_replication_factor: 2,
            rental_hours: 720.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSettings {
    pub overload_pct: f64,
    pub overload_sustain_s: f64,
    pub idle_pct: f64,
    pub idle_sustain_s: f64,
}

impl Default for DetectorSettings {
    fn default() -> Self {
        DetectorSettings {
            overload_pct: 85.0,
            overload_sustain_s: 180.0,
            idle_pct: 20.0,
            idle_sustain_s: 600.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AutoscalerSettings {
    pub enabled: bool,
    pub cooldown_s: f64,
}

impl Default for AutoscalerSettings {
    fn default() -> Self {
        AutoscalerSettings {
            enabled: true,
            cooldown_s: 300.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfferSpec {
    pub offer_id: String,
    #[serde(default)]
    pub label: String,
    pub cpu_ghz: f64,
    pub cpu_cores: u32,
    pub memory_gb: f64,
    pub disk_gb: f64,
    #[serde(default = "wildcard")]
    pub os: String,
    #[serde(default = "wildcard")]
    pub db: String,
    pub stock: u32,
    pub price_per_hour: f64,
    /// Environment labels installed in advance, e.g. "service-container".
    #[serde(default)]
    pub preinstalled: Vec<String>,
}

fn wildcard() -> String {
    "*".into()
}

impl OfferSpec {
    pub fn to_offer(&self) -> ResourceOffer {
        let mut capacity =
            ResourceTemplate::new(self.cpu_ghz, self.cpu_cores, self.memory_gb, self.disk_gb);
        if self.os != "*" {
            capacity.os = SymbolicReq::Exact(self.os.clone());
        }
        if self.db != "*" {
            capacity.db = SymbolicReq::Exact(self.db.clone());
        }
        ResourceOffer {
            offer_id: self.offer_id.clone(),
            label: if self.label.is_empty() {
                self.offer_id.clone()
            } else {
                self.label.clone()
            },
            capacity,
            stock: self.stock,
            price_per_hour: self.price_per_hour,
            preinstalled: self.preinstalled.iter().map(|s| EnvLabel(s.clone())).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    /// Service name the component publishes under.
    pub name: String,
    /// "software" or "data".
    pub kind: String,
    #[serde(default = "default_provider")]
    pub provider: String,
    #[serde(default = "default_data_size")]
    pub data_size_mb: f64,
    #[serde(default)]
    pub availability_start_h: f64,
    #[serde(default = "default_avail_end")]
    pub availability_end_h: f64,
    #[serde(default = "default_perf_lo")]
    pub performance_lo_ms: u64,
    #[serde(default = "default_perf_hi")]
    pub performance_hi_ms: u64,
    #[serde(default = "default_scalability")]
    pub scalability: u32,
    #[serde(default)]
    pub price: f64,
    #[serde(default)]
    pub input_schema: String,
    #[serde(default)]
    pub output_schema: String,
}

fn default_provider() -> String {
    "vendor".into()
}
fn default_data_size() -> f64 {
    10.0
}
fn default_avail_end() -> f64 {
    24.0 * 365.0
}
fn default_perf_lo() -> u64 {
    3_000
}
fn default_perf_hi() -> u64 {
    5_000
}
fn default_scalability() -> u32 {
    100
}

impl ComponentSpec {
    pub fn package_kind(&self) -> Option<PackageKind> {
        match self.kind.as_str() {
            "software" => Some(PackageKind::Software),
            "data" => Some(PackageKind::Data),
            _ => None,
        }
    }

    pub fn profile(&self) -> ComponentProfile {
        let (input, output) = match self.kind.as_str() {
            // defaults give a software+data pair a matching schema out of the box
            "data" => ("query", "record"),
            _ => ("record", "response"),
        };
        ComponentProfile {
            service_name: self.name.clone(),
            availability: TimeInterval::from_hours(self.availability_start_h, self.availability_end_h),
            performance: PerfInterval::new(self.performance_lo_ms, self.performance_hi_ms),
            scalability: self.scalability,
            price: self.price,
            input_schema: if self.input_schema.is_empty() {
                input.to_string()
            } else {
                self.input_schema.clone()
            },
            output_schema: if self.output_schema.is_empty() {
                output.to_string()
            } else {
                self.output_schema.clone()
            },
            data_size_mb: self.data_size_mb,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublishSpec {
    pub component: String,
    #[serde(default = "one")]
    pub replicas: u32,
    pub template: TemplateSpec,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateSpec {
    pub cpu_ghz: f64,
    pub cpu_cores: u32,
    pub memory_gb: f64,
    pub disk_gb: f64,
    #[serde(default = "wildcard")]
    pub os: String,
    #[serde(default = "wildcard")]
    pub db: String,
    #[serde(default)]
    pub weights: Option<[f64; 4]>,
}

impl TemplateSpec {
    pub fn to_template(&self) -> ResourceTemplate {
        let mut t = ResourceTemplate::new(self.cpu_ghz, self.cpu_cores, self.memory_gb, self.disk_gb);
        if self.os != "*" {
            t.os = SymbolicReq::Exact(self.os.clone());
        }
        if self.db != "*" {
            t.db = SymbolicReq::Exact(self.db.clone());
        }
        if let Some([c, n, m, d]) = self.weights {
            t.weights = DimensionWeights {
                cpu_ghz: c,
                cpu_cores: n,
                memory_gb: m,
                disk_gb: d,
            };
        }
        t
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BindSpec {
    pub software: String,
    pub data: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkloadSpec {
    /// "none", "deterministic", or "poisson".
    pub arrivals: String,
    /// Software service the requests target.
    pub service: String,
    pub rate_per_s: f64,
    pub start_s: f64,
    /// Defaults to the scenario duration when zero.
    pub end_s: f64,
    pub software_demand_units: f64,
    pub software_demand_rate: f64,
    pub data_demand_units: f64,
    pub data_demand_rate: f64,
    pub write_ratio: f64,
    pub key_space: u32,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            arrivals: "none".into(),
            service: String::new(),
            rate_per_s: 1.0,
            start_s: 0.0,
            end_s: 0.0,
            software_demand_units: 0.3,
            software_demand_rate: 0.1,
            data_demand_units: 0.01,
            data_demand_rate: 0.05,
            write_ratio: 0.0,
            key_space: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<FieldError>),
    #[error("catalog file {path}: {message}")]
    Catalog { path: String, message: String },
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let scenario: Scenario = toml::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut errors = Vec::new();
        let mut err = |field: &str, message: String| {
            errors.push(FieldError {
                field: field.to_string(),
                message,
            })
        };

        if self.sim.duration_s <= 0.0 {
            err("sim.duration_s", "must be > 0".into());
        }
        if self.sim.sample_period_s <= 0.0 {
            err("sim.sample_period_s", "must be > 0".into());
        }
        if self.sim.copy_bandwidth_mb_per_s <= 0.0 {
            err("sim.copy_bandwidth_mb_per_s", "must be > 0".into());
        }
        if self.sim.proxy_count == 0 {
            err("sim.proxy_count", "must be >= 1".into());
        }
        if self.offers.is_empty() && self.catalog_file.is_none() && !self.publish.is_empty() {
            err("offers", "publishing requires offers or a catalog_file".into());
        }
        for (i, offer) in self.offers.iter().enumerate() {
            if offer.cpu_ghz <= 0.0 || offer.memory_gb <= 0.0 || offer.disk_gb <= 0.0 {
                err(&format!("offers[{i}]"), "capacities must be > 0".into());
            }
        }
        for (i, component) in self.components.iter().enumerate() {
            if component.package_kind().is_none() {
                err(
                    &format!("components[{i}].kind"),
                    format!("unknown kind {:?}, expected software or data", component.kind),
                );
            }
            if component.performance_lo_ms > component.performance_hi_ms {
                err(&format!("components[{i}].performance_lo_ms"), "lo > hi".into());
            }
        }
        let component_names: Vec<&str> = self.components.iter().map(|c| c.name.as_str()).collect();
        for (i, publish) in self.publish.iter().enumerate() {
            if !component_names.contains(&publish.component.as_str()) {
                err(
                    &format!("publish[{i}].component"),
                    format!("unknown component {:?}", publish.component),
                );
            }
            if publish.replicas == 0 {
                err(&format!("publish[{i}].replicas"), "must be >= 1".into());
            }
        }
        for (i, bind) in self.bind.iter().enumerate() {
            for (role, name) in [("software", &bind.software), ("data", &bind.data)] {
                if !component_names.contains(&name.as_str()) {
                    err(
                        &format!("bind[{i}].{role}"),
                        format!("unknown component {:?}", name),
                    );
                }
            }
        }
        match self.workload.arrivals.as_str() {
            "none" => {}
            "deterministic" | "poisson" => {
                if self.workload.rate_per_s <= 0.0 {
                    err("workload.rate_per_s", "must be > 0".into());
                }
                if self.workload.service.is_empty() {
                    err("workload.service", "required when arrivals are enabled".into());
                } else if !component_names.contains(&self.workload.service.as_str()) {
                    err(
                        "workload.service",
                        format!("unknown component {:?}", self.workload.service),
                    );
                }
                if self.workload.software_demand_units <= 0.0
                    || self.workload.software_demand_rate <= 0.0
                {
                    err("workload.software_demand_units", "demands must be > 0".into());
                }
                if !(0.0..=1.0).contains(&self.workload.write_ratio) {
                    err("workload.write_ratio", "must be within [0, 1]".into());
                }
            }
            other => err("workload.arrivals", format!("unknown mode {other:?}")),
        }

        if errors.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid(errors))
        }
    }

    pub fn workload_end_s(&self) -> f64 {
        if self.workload.end_s > 0.0 {
            self.workload.end_s
        } else {
            self.sim.duration_s
        }
    }

    /// Resolves `catalog_file` (relative to `base_dir`) into inline offers so
    /// the scenario becomes self-contained; traces embed only inline offers.
    pub fn inline_catalog(&mut self, base_dir: &std::path::Path) -> Result<(), ScenarioError> {
        let Some(path) = self.catalog_file.take() else {
            return Ok(());
        };
        let full = base_dir.join(&path);
        let text = std::fs::read_to_string(&full).map_err(|e| ScenarioError::Catalog {
            path: full.display().to_string(),
            message: e.to_string(),
        })?;
        let catalog: CatalogFileSpec =
            toml::from_str(&text).map_err(|e| ScenarioError::Catalog {
                path: full.display().to_string(),
                message: e.to_string(),
            })?;
        self.offers.extend(catalog.offers);
        Ok(())
    }
}

/// A standalone offer catalog: the same `[[offers]]` table the scenario
/// carries inline.
#[derive(Debug, Serialize, Deserialize)]
pub struct CatalogFileSpec {
    pub offers: Vec<OfferSpec>,
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "minimal"

[sim]
seed = 7
duration_s = 60.0

[[offers]]
offer_id = "small"
cpu_ghz = 2.0
cpu_cores = 1
memory_gb = 1.0
disk_gb = 40.0
stock = 4
price_per_hour = 0.5
preinstalled = ["service-container"]

[[components]]
name = "orders"
kind = "software"

[[publish]]
component = "orders"
template = { cpu_ghz = 2.0, cpu_cores = 1, memory_gb = 1.0, disk_gb = 40.0 }

[workload]
arrivals = "deterministic"
service = "orders"
rate_per_s = 2.0
"#;

    #[test]
    fn parses_minimal_scenario() {
        let scenario = Scenario::parse(MINIMAL).unwrap();
        assert_eq!(scenario.name, "minimal");
        assert_eq!(scenario.sim.seed, 7);
        assert_eq!(scenario.offers.len(), 1);
        assert_eq!(scenario.workload.arrivals, "deterministic");
        // defaults hold for untouched settings
        assert_eq!(scenario.detector.overload_pct, 85.0);
        assert_eq!(scenario.autoscaler.cooldown_s, 300.0);
    }

    #[test]
    fn round_trips_through_toml() {
        let scenario = Scenario::parse(MINIMAL).unwrap();
        let text = scenario.to_toml();
        let again = Scenario::parse(&text).unwrap();
        assert_eq!(scenario.sim.seed, again.sim.seed);
        assert_eq!(scenario.publish.len(), again.publish.len());
    }

    #[test]
    fn validation_locates_fields() {
        let text = MINIMAL.replace("rate_per_s = 2.0", "rate_per_s = -1.0");
        match Scenario::parse(&text) {
            Err(ScenarioError::Invalid(errors)) => {
                assert!(errors.iter().any(|e| e.field == "workload.rate_per_s"));
            }
            other => panic!("expected invalid, got {other:?}"),
        }
    }

    #[test]
    fn unknown_workload_service_rejected() {
        let text = MINIMAL.replace("service = \"orders\"", "service = \"ghost\"");
        assert!(matches!(
            Scenario::parse(&text),
            Err(ScenarioError::Invalid(_))
        ));
    }
}
