//! Center manager: publishes basic services onto resource instances, derives
//! service properties, maintains the software/data/binding mapping tables,
//! and journals every mapping mutation for crash replay.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;

use thiserror::Error;

use crate::balancer::LoadBalancer;
use crate::market::{EnvLabel, InstanceState, ResourceInstance};
use crate::model::{
    interval_intersect, PerfInterval, PrincipalId, ServiceId, ServiceKind, ServiceProperties,
    TimeInterval,
};
use crate::proxy::{ProxyId, ProxyLayer};
use crate::repository::{ComponentId, PackageKind, Repository};

/// Declared quality terms for a component, supplied at publish time.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ComponentProfile {
    pub service_name: String,
    pub availability: TimeInterval,
    pub performance: PerfInterval,
    pub scalability: u32,
    pub price: f64,
    pub input_schema: String,
    pub output_schema: String,
    /// Payload size of a data component; drives simulated copy duration.
    #[serde(default = "default_data_size")]
    pub data_size_mb: f64,
}

fn default_data_size() -> f64 {
    10.0
}

impl ComponentProfile {
    pub fn basic(service_name: impl Into<String>) -> Self {
        ComponentProfile {
            service_name: service_name.into(),
            availability: TimeInterval::from_hours(0.0, 24.0 * 365.0),
            performance: PerfInterval::new(3_000, 5_000),
            scalability: 100,
            price: 0.0,
            input_schema: "record".into(),
            output_schema: "record".into(),
            data_size_mb: default_data_size(),
        }
    }
}

/// A published service: basic (backed by a component) or composite (backed
/// by an upper/lower pair).
#[derive(Debug, Clone)]
pub struct ServiceRecord {
    pub id: ServiceId,
    pub properties: ServiceProperties,
    pub component_id: Option<ComponentId>,
    pub composition: Option<(ServiceId, ServiceId)>,
    pub input_schema: String,
    pub output_schema: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServiceInstanceState {
    Deploying,
    Serving,
    Draining,
    Retired,
}

impl fmt::Display for ServiceInstanceState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ServiceInstanceState::Deploying => write!(f, "deploying"),
            ServiceInstanceState::Serving => write!(f, "serving"),
            ServiceInstanceState::Draining => write!(f, "draining"),
            ServiceInstanceState::Retired => write!(f, "retired"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServiceInstance {
    pub instance_url: String,
    pub service_id: ServiceId,
    pub host: String,
    pub state: ServiceInstanceState,
}

/// Software service to its data service and the proxy serving the pair.
#[derive(Debug, Clone)]
pub struct Binding {
    pub data_service: ServiceId,
    pub proxy: ProxyId,
    /// Full reserved proxy set; the first entry is the one bindings resolve to.
    pub assigned: Vec<ProxyId>,
}

/// Emitted when a binding changes so callers drop their cached resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct BindingInvalidation {
    pub software: String,
    pub new_data_service: String,
    pub new_proxy: ProxyId,
}

/// Whether publishing also registers the instance for routing, or defers
/// that to a later composition step (scaling pipelines defer, so data
/// replicas join through replication).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegistrationMode {
    Direct,
    Deferred,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JournalRecord {
    Publish {
        service: String,
        kind: ServiceKind,
        url: String,
        host: String,
        component: String,
    },
    Register {
        service: String,
        kind: ServiceKind,
        url: String,
    },
    Compose {
        composite: String,
        upper: String,
        lower: String,
    },
    Bind {
        software: String,
        data: String,
        proxy: String,
    },
    Deregister {
        service: String,
        url: String,
    },
    Retire {
        service: String,
        url: String,
    },
}

impl JournalRecord {
    pub fn to_line(&self) -> String {
        match self {
            JournalRecord::Publish { service, kind, url, host, component } => {
                format!("PUBLISH\t{service}\t{kind}\t{url}\t{host}\t{component}")
            }
            JournalRecord::Register { service, kind, url } => {
                format!("REGISTER\t{service}\t{kind}\t{url}")
            }
            JournalRecord::Compose { composite, upper, lower } => {
                format!("COMPOSE\t{composite}\t{upper}\t{lower}")
            }
            JournalRecord::Bind { software, data, proxy } => {
                format!("BIND\t{software}\t{data}\t{proxy}")
            }
            JournalRecord::Deregister { service, url } => {
                format!("DEREGISTER\t{service}\t{url}")
            }
            JournalRecord::Retire { service, url } => format!("RETIRE\t{service}\t{url}"),
        }
    }

    pub fn parse_line(line: &str) -> Option<JournalRecord> {
        let fields: Vec<&str> = line.split('\t').collect();
        let kind_of = |s: &str| match s {
            "data" => Some(ServiceKind::Data),
            "software" => Some(ServiceKind::Software),
            "composite" => Some(ServiceKind::Composite),
            _ => None,
        };
        match fields.as_slice() {
            ["PUBLISH", service, kind, url, host, component] => Some(JournalRecord::Publish {
                service: service.to_string(),
                kind: kind_of(kind)?,
                url: url.to_string(),
                host: host.to_string(),
                component: component.to_string(),
            }),
            ["REGISTER", service, kind, url] => Some(JournalRecord::Register {
                service: service.to_string(),
                kind: kind_of(kind)?,
                url: url.to_string(),
            }),
            ["COMPOSE", composite, upper, lower] => Some(JournalRecord::Compose {
                composite: composite.to_string(),
                upper: upper.to_string(),
                lower: lower.to_string(),
            }),
            ["BIND", software, data, proxy] => Some(JournalRecord::Bind {
                software: software.to_string(),
                data: data.to_string(),
                proxy: proxy.to_string(),
            }),
            ["DEREGISTER", service, url] => Some(JournalRecord::Deregister {
                service: service.to_string(),
                url: url.to_string(),
            }),
            ["RETIRE", service, url] => Some(JournalRecord::Retire {
                service: service.to_string(),
                url: url.to_string(),
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum PublishError {
    #[error("component {0} not found")]
    ComponentNotFound(ComponentId),
    #[error("host {host} is {state}, cannot deploy")]
    HostInactive { host: String, state: InstanceState },
    #[error("host {host} lacks required environment {needed}")]
    EnvMissing { host: String, needed: EnvLabel },
    #[error("instance url {0} already registered")]
    UrlTaken(String),
}

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error("unknown service {0}")]
    UnknownService(String),
    #[error("schema mismatch: upper consumes {upper_input}, lower produces {lower_output}")]
    SchemaMismatch {
        upper_input: String,
        lower_output: String,
    },
    #[error("service {0} has no serving instance")]
    NoServingInstance(String),
    #[error("proxy layer error: {0}")]
    Proxy(#[from] crate::proxy::ProxyError),
}

#[derive(Debug, Error)]
#[error("no binding recorded for software service {0}")]
pub struct Unbound(pub String);

#[derive(Debug, Error)]
pub enum RegisterError {
    #[error("unknown service {0}")]
    UnknownService(String),
    #[error("unknown instance {0}")]
    UnknownInstance(String),
}

#[derive(Debug, Default)]
pub struct ControlPlane {
    services: BTreeMap<String, ServiceRecord>,
    instances: BTreeMap<String, ServiceInstance>,
    bindings: BTreeMap<String, Binding>,
    journal: Vec<JournalRecord>,
    journal_file: Option<PathBuf>,
    invalidations: Vec<BindingInvalidation>,
    next_composite: u64,
}

impl ControlPlane {
    pub fn new() -> Self {
        Self::default()
    }

    /// Mirrors every journal record to a file, one line per record.
    pub fn with_journal_file(path: impl Into<PathBuf>) -> Self {
        ControlPlane {
            journal_file: Some(path.into()),
            ..Self::default()
        }
    }

    /// Attaches a journal file after the fact, e.g. once a replayed plane
    /// should resume appending.
    pub fn set_journal_file(&mut self, path: impl Into<PathBuf>) {
        self.journal_file = Some(path.into());
    }

    fn journal(&mut self, record: JournalRecord) {
        if let Some(path) = &self.journal_file {
            if let Ok(mut f) = OpenOptions::new().create(true).append(true).open(path) {
                let _ = writeln!(f, "{}", record.to_line());
            }
        }
        self.journal.push(record);
    }

    pub fn journal_records(&self) -> &[JournalRecord] {
        &self.journal
    }

    pub fn service(&self, name: &str) -> Option<&ServiceRecord> {
        self.services.get(name)
    }

    pub fn services(&self) -> impl Iterator<Item = &ServiceRecord> {
        self.services.values()
    }

    pub fn instance(&self, url: &str) -> Option<&ServiceInstance> {
        self.instances.get(url)
    }

    pub fn instances_of(&self, service: &str) -> Vec<&ServiceInstance> {
        self.instances
            .values()
            .filter(|i| i.service_id.name == service)
            .collect()
    }

    pub fn serving_instances_of(&self, service: &str) -> Vec<&ServiceInstance> {
        self.instances
            .values()
            .filter(|i| i.service_id.name == service && i.state == ServiceInstanceState::Serving)
            .collect()
    }

    /// The serving instance hosted on a resource instance, if any. Each host
    /// carries at most one basic service instance.
    pub fn instance_on_host(&self, host: &str) -> Option<&ServiceInstance> {
        self.instances
            .values()
            .find(|i| i.host == host && i.state != ServiceInstanceState::Retired)
    }

    pub fn take_invalidations(&mut self) -> Vec<BindingInvalidation> {
        std::mem::take(&mut self.invalidations)
    }

    /// Deploys a component onto a configured host and publishes it as a
    /// basic service. Derived properties: the vendor keeps ownership,
    /// management goes to the operator, and availability is the intersection
    /// of the declared availability with the host's.
    pub fn publish_basic(
        &mut self,
        repository: &Repository,
        component_id: &ComponentId,
        profile: &ComponentProfile,
        host: &ResourceInstance,
        operator: &PrincipalId,
        mode: RegistrationMode,
        balancer: &mut LoadBalancer,
        proxies: &mut ProxyLayer,
    ) -> Result<ServiceInstance, PublishError> {
        let package = repository
            .fetch(component_id)
            .map_err(|_| PublishError::ComponentNotFound(component_id.clone()))?;

        match host.state {
            InstanceState::Configured | InstanceState::Active => {}
            state => {
                return Err(PublishError::HostInactive {
                    host: host.instance_id.clone(),
                    state,
                })
            }
        }
        let needed = match package.kind {
            PackageKind::Software => EnvLabel::service_container(),
            PackageKind::Data => EnvLabel::database(),
        };
        if !host.configured_env.contains(&needed) {
            return Err(PublishError::EnvMissing {
                host: host.instance_id.clone(),
                needed,
            });
        }

        let kind = match package.kind {
            PackageKind::Software => ServiceKind::Software,
            PackageKind::Data => ServiceKind::Data,
        };
        let name = profile.service_name.clone();
        let instance_url = match kind {
            ServiceKind::Software => format!("http://{}:8080/{}", host.instance_id, name),
            _ => format!("mysql://{}:3306/{}", host.instance_id, name),
        };
        if self.instances.contains_key(&instance_url) {
            return Err(PublishError::UrlTaken(instance_url));
        }

        // the package travels to the host over its connectivity; stored
        // content hashes let the app module verify the transfer
        debug_assert!(host.properties.connectivity);
        let host_availability = host.properties.availability;

        let record = self.services.entry(name.clone()).or_insert_with(|| ServiceRecord {
            id: ServiceId::new(name.clone(), kind),
            properties: ServiceProperties {
                identifier: ServiceId::new(name.clone(), kind),
                ownership: package.provider.clone(),
                usufruct: Default::default(),
                management: operator.clone(),
                availability: profile.availability,
                performance: profile.performance,
                scalability: profile.scalability,
                price: profile.price,
            },
            component_id: Some(component_id.clone()),
            composition: None,
            input_schema: profile.input_schema.clone(),
            output_schema: profile.output_schema.clone(),
        });
        // available time never exceeds any hosting resource instance's
        record.properties.availability =
            interval_intersect(&record.properties.availability, &host_availability);

        let instance = ServiceInstance {
            instance_url: instance_url.clone(),
            service_id: ServiceId::new(name.clone(), kind),
            host: host.instance_id.clone(),
            state: ServiceInstanceState::Serving,
        };
        self.instances.insert(instance_url.clone(), instance.clone());
        self.journal(JournalRecord::Publish {
            service: name.clone(),
            kind,
            url: instance_url.clone(),
            host: host.instance_id.clone(),
            component: component_id.0.clone(),
        });

        if mode == RegistrationMode::Direct {
            self.register_routing(&name, kind, &instance_url, balancer, proxies);
        }
        Ok(instance)
    }

    fn register_routing(
        &mut self,
        service: &str,
        kind: ServiceKind,
        url: &str,
        balancer: &mut LoadBalancer,
        proxies: &mut ProxyLayer,
    ) {
        match kind {
            ServiceKind::Software => {
                balancer.register(service, url);
            }
            ServiceKind::Data => {
                // pristine clusters accept direct joins; later joins arrive
                // via replication, already in rotation when this is journaled
                let _ = proxies.register_data_instance(service, url);
            }
            ServiceKind::Composite => {}
        }
        self.journal(JournalRecord::Register {
            service: service.to_string(),
            kind,
            url: url.to_string(),
        });
    }

    /// Routes a deployed instance's (service, URL) pair to the balancer or
    /// the data proxy layer and persists the mapping.
    pub fn register_instance(
        &mut self,
        service: &str,
        url: &str,
        balancer: &mut LoadBalancer,
        proxies: &mut ProxyLayer,
    ) -> Result<(), RegisterError> {
        let record = self
            .services
            .get(service)
            .ok_or_else(|| RegisterError::UnknownService(service.to_string()))?;
        if !self.instances.contains_key(url) {
            return Err(RegisterError::UnknownInstance(url.to_string()));
        }
        let kind = record.id.kind;
        self.register_routing(service, kind, url, balancer, proxies);
        Ok(())
    }

    /// Journals a registration that already took effect in the routing layer
    /// (a replica that joined the rotation when replication finished).
    pub fn record_registration(&mut self, service: &str, kind: ServiceKind, url: &str) {
        self.journal(JournalRecord::Register {
            service: service.to_string(),
            kind,
            url: url.to_string(),
        });
    }

    /// Combines two services into a composite. The upper consumes what the
    /// lower produces, so their schemas must agree; software+data pairs also
    /// get a data-source binding through an assigned proxy.
    pub fn compose(
        &mut self,
        upper_name: &str,
        lower_name: &str,
        composer: &PrincipalId,
        operator: &PrincipalId,
        proxies: &ProxyLayer,
    ) -> Result<ServiceRecord, ComposeError> {
        let upper = self
            .services
            .get(upper_name)
            .ok_or_else(|| ComposeError::UnknownService(upper_name.to_string()))?
            .clone();
        let lower = self
            .services
            .get(lower_name)
            .ok_or_else(|| ComposeError::UnknownService(lower_name.to_string()))?
            .clone();

        if upper.input_schema != lower.output_schema {
            return Err(ComposeError::SchemaMismatch {
                upper_input: upper.input_schema.clone(),
                lower_output: lower.output_schema.clone(),
            });
        }
        for record in [&upper, &lower] {
            if !self.has_serving(&record.id.name) {
                return Err(ComposeError::NoServingInstance(record.id.name.clone()));
            }
        }

        self.next_composite += 1;
        let name = format!("{}+{}", upper_name, lower_name);
        let id = ServiceId::new(name.clone(), ServiceKind::Composite);
        let properties = ServiceProperties {
            identifier: id.clone(),
            ownership: composer.clone(),
            usufruct: Default::default(),
            management: operator.clone(),
            availability: interval_intersect(
                &upper.properties.availability,
                &lower.properties.availability,
            ),
            performance: upper.properties.performance.serial_sum(&lower.properties.performance),
            scalability: upper.properties.scalability.min(lower.properties.scalability),
            price: upper.properties.price + lower.properties.price,
        };
        let record = ServiceRecord {
            id: id.clone(),
            properties,
            component_id: None,
            composition: Some((upper.id.clone(), lower.id.clone())),
            input_schema: lower.input_schema.clone(),
            output_schema: upper.output_schema.clone(),
        };
        self.services.insert(name.clone(), record.clone());
        self.journal(JournalRecord::Compose {
            composite: name.clone(),
            upper: upper_name.to_string(),
            lower: lower_name.to_string(),
        });

        if upper.id.kind == ServiceKind::Software && lower.id.kind == ServiceKind::Data {
            self.bind(upper_name, lower_name, proxies)?;
        }
        Ok(record)
    }

    /// Configures the data source of a software service (configuring its data source).
    pub fn bind(
        &mut self,
        software: &str,
        data: &str,
        proxies: &ProxyLayer,
    ) -> Result<Binding, ComposeError> {
        let data_id = self
            .services
            .get(data)
            .ok_or_else(|| ComposeError::UnknownService(data.to_string()))?
            .id
            .clone();
        let assigned = proxies.assign_proxy(software)?;
        let binding = Binding {
            data_service: data_id,
            proxy: assigned[0].clone(),
            assigned,
        };
        let previous = self.bindings.insert(software.to_string(), binding.clone());
        self.journal(JournalRecord::Bind {
            software: software.to_string(),
            data: data.to_string(),
            proxy: binding.proxy.0.clone(),
        });
        if let Some(prev) = previous {
            if prev.data_service.name != data {
                self.invalidations.push(BindingInvalidation {
                    software: software.to_string(),
                    new_data_service: data.to_string(),
                    new_proxy: binding.proxy.clone(),
                });
            }
        }
        Ok(binding)
    }

    /// Looks up the data service and proxy a software service is bound to.
    /// Callers may cache the result until a [`BindingInvalidation`] arrives.
    pub fn resolve_binding(&self, software: &str) -> Result<(ServiceId, ProxyId), Unbound> {
        self.bindings
            .get(software)
            .map(|b| (b.data_service.clone(), b.proxy.clone()))
            .ok_or_else(|| Unbound(software.to_string()))
    }

    pub fn binding(&self, software: &str) -> Option<&Binding> {
        self.bindings.get(software)
    }

    fn has_serving(&self, service: &str) -> bool {
        match self.services.get(service) {
            None => false,
            Some(record) => match &record.composition {
                None => self
                    .instances
                    .values()
                    .any(|i| i.service_id.name == service && i.state == ServiceInstanceState::Serving),
                Some((upper, lower)) => {
                    self.has_serving(&upper.name) && self.has_serving(&lower.name)
                }
            },
        }
    }

    /// Marks an instance draining and journals the removal intent.
    pub fn deregister_instance(&mut self, url: &str) -> Result<(), RegisterError> {
        let instance = self
            .instances
            .get_mut(url)
            .ok_or_else(|| RegisterError::UnknownInstance(url.to_string()))?;
        instance.state = ServiceInstanceState::Draining;
        let service = instance.service_id.name.clone();
        self.journal(JournalRecord::Deregister {
            service,
            url: url.to_string(),
        });
        Ok(())
    }

    /// Final removal once drained; the mapping entry disappears here.
    pub fn retire_instance(&mut self, url: &str) -> Result<(), RegisterError> {
        let instance = self
            .instances
            .get_mut(url)
            .ok_or_else(|| RegisterError::UnknownInstance(url.to_string()))?;
        instance.state = ServiceInstanceState::Retired;
        let service = instance.service_id.name.clone();
        self.journal(JournalRecord::Retire {
            service,
            url: url.to_string(),
        });
        Ok(())
    }

    /// The mapping the journal implies: every registered, not-yet-retired
    /// (service, url) pair, split software/data.
    pub fn journal_mapping(&self) -> (Vec<(String, String)>, Vec<(String, String)>) {
        let mut software: BTreeMap<(String, String), bool> = BTreeMap::new();
        let mut data: BTreeMap<(String, String), bool> = BTreeMap::new();
        for record in &self.journal {
            match record {
                JournalRecord::Register { service, kind, url } => {
                    let key = (service.clone(), url.clone());
                    match kind {
                        ServiceKind::Software => {
                            software.insert(key, true);
                        }
                        ServiceKind::Data => {
                            data.insert(key, true);
                        }
                        ServiceKind::Composite => {}
                    }
                }
                JournalRecord::Retire { service, url } => {
                    let key = (service.clone(), url.clone());
                    software.remove(&key);
                    data.remove(&key);
                }
                _ => {}
            }
        }
        (
            software.into_keys().collect(),
            data.into_keys().collect(),
        )
    }

    /// Rebuilds control-plane, balancer, and proxy mapping state from a
    /// journal. Data contents are not part of the journal; replay restores
    /// the mappings only.
    pub fn replay_journal(
        records: &[JournalRecord],
        balancer: &mut LoadBalancer,
        proxies: &mut ProxyLayer,
    ) -> ControlPlane {
        let mut plane = ControlPlane::new();
        for record in records {
            plane.journal.push(record.clone());
            match record {
                JournalRecord::Publish { service, kind, url, host, component } => {
                    plane.services.entry(service.clone()).or_insert_with(|| ServiceRecord {
                        id: ServiceId::new(service.clone(), *kind),
                        properties: ServiceProperties {
                            identifier: ServiceId::new(service.clone(), *kind),
                            ownership: PrincipalId::new("unknown"),
                            usufruct: Default::default(),
                            management: PrincipalId::new("operator"),
                            availability: TimeInterval::EMPTY,
                            performance: PerfInterval::new(0, 0),
                            scalability: 1,
                            price: 0.0,
                        },
                        component_id: Some(ComponentId(component.clone())),
                        composition: None,
                        input_schema: String::new(),
                        output_schema: String::new(),
                    });
                    plane.instances.insert(
                        url.clone(),
                        ServiceInstance {
                            instance_url: url.clone(),
                            service_id: ServiceId::new(service.clone(), *kind),
                            host: host.clone(),
                            state: ServiceInstanceState::Serving,
                        },
                    );
                }
                JournalRecord::Register { service, kind, url } => match kind {
                    ServiceKind::Software => {
                        balancer.register(service, url);
                    }
                    ServiceKind::Data => {
                        let _ = proxies.register_data_instance(service, url);
                    }
                    ServiceKind::Composite => {}
                },
                JournalRecord::Compose { composite, upper, lower } => {
                    let upper_id = plane
                        .services
                        .get(upper)
                        .map(|r| r.id.clone())
                        .unwrap_or_else(|| ServiceId::new(upper.clone(), ServiceKind::Software));
                    let lower_id = plane
                        .services
                        .get(lower)
                        .map(|r| r.id.clone())
                        .unwrap_or_else(|| ServiceId::new(lower.clone(), ServiceKind::Data));
                    plane.services.insert(
                        composite.clone(),
                        ServiceRecord {
                            id: ServiceId::new(composite.clone(), ServiceKind::Composite),
                            properties: ServiceProperties {
                                identifier: ServiceId::new(composite.clone(), ServiceKind::Composite),
                                ownership: PrincipalId::new("operator"),
                                usufruct: Default::default(),
                                management: PrincipalId::new("operator"),
                                availability: TimeInterval::EMPTY,
                                performance: PerfInterval::new(0, 0),
                                scalability: 1,
                                price: 0.0,
                            },
                            component_id: None,
                            composition: Some((upper_id, lower_id)),
                            input_schema: String::new(),
                            output_schema: String::new(),
                        },
                    );
                }
                JournalRecord::Bind { software, data, proxy } => {
                    plane.bindings.insert(
                        software.clone(),
                        Binding {
                            data_service: ServiceId::new(data.clone(), ServiceKind::Data),
                            proxy: ProxyId(proxy.clone()),
                            assigned: vec![ProxyId(proxy.clone())],
                        },
                    );
                }
                JournalRecord::Deregister { url, .. } => {
                    if let Some(instance) = plane.instances.get_mut(url) {
                        instance.state = ServiceInstanceState::Draining;
                    }
                }
                JournalRecord::Retire { service, url } => {
                    if let Some(instance) = plane.instances.get_mut(url) {
                        instance.state = ServiceInstanceState::Retired;
                    }
                    let _ = balancer.deregister(service, url);
                    let _ = proxies.remove_instance(service, url);
                }
            }
        }
        plane
    }
}
