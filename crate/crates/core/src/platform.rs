//! Wires the repository, market, center manager, balancer, and proxy layer
//! into one platform the simulator, the scaling pipelines, and the CLI all
//! operate on.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::balancer::LoadBalancer;
use crate::control::{
    ComponentProfile, ControlPlane, PublishError, RegistrationMode, ServiceInstance,
};
use crate::market::{EnvLabel, InstanceState, MarketError, ResourceInstance, ResourceMarket};
use crate::model::{PrincipalId, ResourceTemplate, TimeInterval, TimeMs};
use crate::proxy::ProxyLayer;
use crate::repository::{ComponentId, PackageKind, Repository, UploadError};

#[derive(Debug, Error)]
pub enum PlatformError {
    #[error(transparent)]
    Upload(#[from] UploadError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Publish(#[from] PublishError),
    #[error("no agreement negotiated yet")]
    NoAgreement,
    #[error("component {0} has no stored profile")]
    NoProfile(ComponentId),
}

#[derive(Debug)]
pub struct Platform {
    pub operator: PrincipalId,
    pub repository: Repository,
    pub market: ResourceMarket,
    pub control: ControlPlane,
    pub balancer: LoadBalancer,
    pub proxies: ProxyLayer,
    profiles: BTreeMap<ComponentId, ComponentProfile>,
    pub agreement_id: Option<String>,
}

/// The environment a component kind needs on its host.
pub fn env_for(kind: PackageKind) -> BTreeSet<EnvLabel> {
    let label = match kind {
        PackageKind::Software => EnvLabel::service_container(),
        PackageKind::Data => EnvLabel::database(),
    };
    [label].into_iter().collect()
}

impl Platform {
    pub fn new(operator: PrincipalId, proxy_count: usize, replication_factor: usize) -> Self {
        Platform {
            operator,
            repository: Repository::new(),
            market: ResourceMarket::new(),
            control: ControlPlane::new(),
            balancer: LoadBalancer::new(),
            proxies: ProxyLayer::new(proxy_count, replication_factor),
            profiles: BTreeMap::new(),
            agreement_id: None,
        }
    }

    pub fn negotiate_default_agreement(
        &mut self,
        provider: &PrincipalId,
        rental_period: TimeInterval,
    ) -> Result<String, PlatformError> {
        let agreement = self.market.negotiate(
            &self.operator.clone(),
            provider,
            rental_period,
            "platform hosting capacity",
        )?;
        self.agreement_id = Some(agreement.agreement_id.clone());
        Ok(agreement.agreement_id)
    }

    pub fn upload_component(
        &mut self,
        provider: &PrincipalId,
        archive: Vec<u8>,
        profile: ComponentProfile,
    ) -> Result<ComponentId, PlatformError> {
        let id = self.repository.upload(provider, archive)?;
        self.profiles.insert(id.clone(), profile);
        Ok(id)
    }

    pub fn profile_of(&self, component: &ComponentId) -> Result<&ComponentProfile, PlatformError> {
        self.profiles
            .get(component)
            .ok_or_else(|| PlatformError::NoProfile(component.clone()))
    }

    pub fn set_profile(&mut self, component: ComponentId, profile: ComponentProfile) {
        self.profiles.insert(component, profile);
    }

    pub fn component_of_service(&self, service: &str) -> Option<ComponentId> {
        self.control.service(service).and_then(|r| r.component_id.clone())
    }

    /// Subscribes a host for a component and configures the environment it
    /// needs, unless the offer came pre-configured.
    pub fn provision_host(
        &mut self,
        template: &ResourceTemplate,
        kind: PackageKind,
        now: TimeMs,
    ) -> Result<(ResourceInstance, bool), PlatformError> {
        let agreement = self.agreement_id.clone().ok_or(PlatformError::NoAgreement)?;
        let operator = self.operator.clone();
        let instance = self.market.subscribe(&operator, template, &agreement, now)?;
        let preconfigured = instance.state == InstanceState::Configured;
        let instance = if preconfigured {
            instance
        } else {
            self.market
                .configure(&instance.instance_id, &env_for(kind))?
                .clone()
        };
        Ok((instance, preconfigured))
    }

    /// Deploys a component onto a host and publishes it, activating the host.
    pub fn publish(
        &mut self,
        component: &ComponentId,
        host_id: &str,
        mode: RegistrationMode,
    ) -> Result<ServiceInstance, PlatformError> {
        let profile = self.profile_of(component)?.clone();
        let host = self
            .market
            .instance(host_id)
            .ok_or_else(|| MarketError::InstanceUnknown(host_id.to_string()))?
            .clone();
        let operator = self.operator.clone();
        let instance = self.control.publish_basic(
            &self.repository,
            component,
            &profile,
            &host,
            &operator,
            mode,
            &mut self.balancer,
            &mut self.proxies,
        )?;
        self.market.activate(host_id)?;
        Ok(instance)
    }

    /// Serving instance count for a basic service.
    pub fn serving_count(&self, service: &str) -> usize {
        self.control.serving_instances_of(service).len()
    }
}
