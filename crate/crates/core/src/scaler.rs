//! Autoscaler: consumes monitoring events, identifies the bottleneck tier,
//! and drives the five-step scaling pipeline (subscribe, configure, deploy,
//! compose, monitor) with cooldown control and rollback on failure.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::control::RegistrationMode;
use crate::market::ReleaseReason;
use crate::model::{ResourceTemplate, ServiceKind, TimeMs};
use crate::monitor::{EventKind, ThresholdEvent};
use crate::platform::{env_for, Platform, PlatformError};
use crate::repository::{ComponentId, PackageKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    Software,
    Data,
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tier::Software => write!(f, "software"),
            Tier::Data => write!(f, "data"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Up => write!(f, "up"),
            Direction::Down => write!(f, "down"),
        }
    }
}

/// A resolved scaling action: up decisions carry the replica template,
/// down decisions carry the victim instance.
#[derive(Debug, Clone)]
pub struct ScalingDecision {
    pub service: String,
    pub component: ComponentId,
    pub tier: Tier,
    pub direction: Direction,
    pub trigger_host: String,
    pub template: Option<ResourceTemplate>,
    pub victim: Option<String>,
    pub decided_at: TimeMs,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NoActionReason {
    /// Last decision for this service is closer than the cooldown.
    Cooldown { remaining_ms: u64 },
    /// A pipeline for this service has not finished yet.
    PipelineInFlight,
    /// Scale-down never removes the last instance.
    SingleInstanceFloor,
    /// Data clusters shrink only at quiescent points.
    ReplicationInProgress,
}

impl fmt::Display for NoActionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoActionReason::Cooldown { remaining_ms } => {
                write!(f, "cooldown ({remaining_ms}ms remaining)")
            }
            NoActionReason::PipelineInFlight => write!(f, "pipeline in flight"),
            NoActionReason::SingleInstanceFloor => write!(f, "single-instance floor"),
            NoActionReason::ReplicationInProgress => write!(f, "replication in progress"),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Decision {
    Act(ScalingDecision),
    NoAction(NoActionReason),
}

#[derive(Debug, Error)]
pub enum DecideError {
    #[error("host {0} runs no known service instance")]
    OrphanHost(String),
    #[error("service {0} has no backing component")]
    NoComponent(String),
}

pub const DEFAULT_COOLDOWN_MS: u64 = 5 * 60 * 1_000;

/// Serialized decision loop with per-service cooldown and at most one
/// in-flight pipeline per service.
#[derive(Debug)]
pub struct Autoscaler {
    cooldown_ms: u64,
    last_decision: BTreeMap<String, TimeMs>,
    in_flight: BTreeSet<String>,
}

impl Autoscaler {
    pub fn new(cooldown_ms: u64) -> Self {
        Autoscaler {
            cooldown_ms,
            last_decision: BTreeMap::new(),
            in_flight: BTreeSet::new(),
        }
    }

    /// Maps a monitoring event to a scaling decision against the current
    /// platform snapshot. Each resource instance hosts one basic service,
    /// so the overloaded host identifies the bottleneck tier directly.
    pub fn decide(
        &mut self,
        event: &ThresholdEvent,
        platform: &Platform,
        now: TimeMs,
    ) -> Result<Decision, DecideError> {
        let host = &event.source;
        let instance = platform
            .control
            .instance_on_host(host)
            .ok_or_else(|| DecideError::OrphanHost(host.clone()))?;
        let service = instance.service_id.name.clone();
        let tier = match instance.service_id.kind {
            ServiceKind::Software => Tier::Software,
            ServiceKind::Data => Tier::Data,
            ServiceKind::Composite => return Err(DecideError::OrphanHost(host.clone())),
        };
        let component = platform
            .component_of_service(&service)
            .ok_or_else(|| DecideError::NoComponent(service.clone()))?;

        if self.in_flight.contains(&service) {
            return Ok(Decision::NoAction(NoActionReason::PipelineInFlight));
        }
        if let Some(last) = self.last_decision.get(&service) {
            let elapsed = now.0.saturating_sub(last.0);
            if elapsed < self.cooldown_ms {
                return Ok(Decision::NoAction(NoActionReason::Cooldown {
                    remaining_ms: self.cooldown_ms - elapsed,
                }));
            }
        }

        let direction = match event.kind {
            EventKind::Overload => Direction::Up,
            EventKind::Idle => Direction::Down,
        };
        let decision = match direction {
            Direction::Up => {
                let capacity = platform
                    .market
                    .instance(host)
                    .map(|h| h.properties.capacity.clone())
                    .unwrap_or_else(|| ResourceTemplate::new(1.0, 1, 1.0, 10.0));
                ScalingDecision {
                    service: service.clone(),
                    component,
                    tier,
                    direction,
                    trigger_host: host.clone(),
                    template: Some(capacity),
                    victim: None,
                    decided_at: now,
                }
            }
            Direction::Down => {
                let serving = platform.control.serving_instances_of(&service);
                if serving.len() < 2 {
                    return Ok(Decision::NoAction(NoActionReason::SingleInstanceFloor));
                }
                if tier == Tier::Data && !platform.proxies.quiescent(&service) {
                    return Ok(Decision::NoAction(NoActionReason::ReplicationInProgress));
                }
                let victim = match tier {
                    Tier::Software => serving
                        .iter()
                        .map(|i| {
                            let routed = platform
                                .balancer
                                .entries(&service)
                                .iter()
                                .find(|e| e.url == i.instance_url)
                                .map(|e| e.total_routed)
                                .unwrap_or(0);
                            (routed, i.instance_url.clone())
                        })
                        .min()
                        .map(|(_, url)| url),
                    Tier::Data => platform.proxies.cluster(&service).and_then(|c| {
                        serving
                            .iter()
                            .map(|i| (c.read_count(&i.instance_url), i.instance_url.clone()))
                            .min()
                            .map(|(_, url)| url)
                    }),
                };
                ScalingDecision {
                    service: service.clone(),
                    component,
                    tier,
                    direction,
                    trigger_host: host.clone(),
                    template: None,
                    victim,
                    decided_at: now,
                }
            }
        };
        self.last_decision.insert(service.clone(), now);
        self.in_flight.insert(service);
        Ok(Decision::Act(decision))
    }

    /// Clears the in-flight marker once a pipeline completes or aborts.
    pub fn pipeline_done(&mut self, service: &str) {
        self.in_flight.remove(service);
    }

    pub fn in_flight(&self, service: &str) -> bool {
        self.in_flight.contains(service)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepName {
    Subscribe,
    Configure,
    Deploy,
    Compose,
    Monitor,
}

impl fmt::Display for StepName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepName::Subscribe => write!(f, "Subscribe"),
            StepName::Configure => write!(f, "Configure"),
            StepName::Deploy => write!(f, "Deploy"),
            StepName::Compose => write!(f, "Compose"),
            StepName::Monitor => write!(f, "Monitor"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineStep {
    pub name: StepName,
    pub at: TimeMs,
    pub skipped: bool,
    pub detail: String,
}

fn step(name: StepName, at: TimeMs, detail: impl Into<String>) -> PipelineStep {
    PipelineStep {
        name,
        at,
        skipped: false,
        detail: detail.into(),
    }
}

#[derive(Debug, Clone)]
pub struct ScaleUpReport {
    pub service: String,
    pub tier: Tier,
    pub new_instance_url: String,
    pub new_host: String,
    pub steps: Vec<PipelineStep>,
}

/// A data-tier pipeline paused while the copy runs; finish it once the
/// simulated copy duration elapses.
#[derive(Debug, Clone)]
pub struct PendingDataScale {
    pub service: String,
    pub destination_url: String,
    pub host: String,
    pub copy_ms: u64,
    pub steps_so_far: Vec<PipelineStep>,
}

#[derive(Debug)]
pub enum ScaleUpOutcome {
    Completed(ScaleUpReport),
    AwaitingSync(PendingDataScale),
}

/// A failed pipeline, with everything already rolled back.
#[derive(Debug, Error)]
#[error("scale-up aborted at {failed_step} ({cause}); partial resources released")]
pub struct ScaleUpError {
    pub failed_step: StepName,
    pub cause: String,
    pub steps: Vec<PipelineStep>,
}

fn rollback(platform: &mut Platform, host_id: &str, instance_url: Option<&str>) {
    if let Some(url) = instance_url {
        let _ = platform.control.deregister_instance(url);
        let _ = platform.control.retire_instance(url);
    }
    let _ = platform.market.unsubscribe(host_id, ReleaseReason::ScaleDown);
}

/// Runs the scale-up pipeline. The replica copies the overloaded host's
/// capacity. Software instances join the balancer at the compose step; data
/// instances start a replication session and join when it finishes.
pub fn scale_up(
    platform: &mut Platform,
    decision: &ScalingDecision,
    now: TimeMs,
    copy_bandwidth_mb_per_s: f64,
) -> Result<ScaleUpOutcome, ScaleUpError> {
    assert_eq!(decision.direction, Direction::Up);
    let mut steps = Vec::new();
    let template = decision.template.clone().expect("up decision carries a template");
    let kind = match decision.tier {
        Tier::Software => PackageKind::Software,
        Tier::Data => PackageKind::Data,
    };

    // Subscribe
    let agreement = platform.agreement_id.clone().ok_or_else(|| ScaleUpError {
        failed_step: StepName::Subscribe,
        cause: PlatformError::NoAgreement.to_string(),
        steps: Vec::new(),
    })?;
    let operator = platform.operator.clone();
    let host = platform
        .market
        .subscribe(&operator, &template, &agreement, now)
        .map_err(|e| ScaleUpError {
            failed_step: StepName::Subscribe,
            cause: e.to_string(),
            steps: Vec::new(),
        })?;
    let host_id = host.instance_id.clone();
    steps.push(step(StepName::Subscribe, now, format!("host {host_id}")));

    // Configure (skipped when the offer came pre-configured with what we need)
    let needed = env_for(kind);
    if host.configured_env.is_superset(&needed) {
        steps.push(PipelineStep {
            name: StepName::Configure,
            at: now,
            skipped: true,
            detail: "pre-configured by provider".into(),
        });
    } else {
        match platform.market.configure(&host_id, &needed) {
            Ok(_) => steps.push(step(StepName::Configure, now, format!("env for {kind}"))),
            Err(e) => {
                rollback(platform, &host_id, None);
                return Err(ScaleUpError {
                    failed_step: StepName::Configure,
                    cause: e.to_string(),
                    steps,
                });
            }
        }
    }

    // Deploy: the app module pulls the same component onto the new host
    let instance = match platform.publish(&decision.component, &host_id, RegistrationMode::Deferred)
    {
        Ok(i) => i,
        Err(e) => {
            rollback(platform, &host_id, None);
            return Err(ScaleUpError {
                failed_step: StepName::Deploy,
                cause: e.to_string(),
                steps,
            });
        }
    };
    steps.push(step(StepName::Deploy, now, format!("instance {}", instance.instance_url)));

    match decision.tier {
        Tier::Software => {
            // Compose: the new instance joins the balancer's list
            if let Err(e) = platform.control.register_instance(
                &decision.service,
                &instance.instance_url,
                &mut platform.balancer,
                &mut platform.proxies,
            ) {
                rollback(platform, &host_id, Some(&instance.instance_url));
                return Err(ScaleUpError {
                    failed_step: StepName::Compose,
                    cause: e.to_string(),
                    steps,
                });
            }
            steps.push(step(StepName::Compose, now, "joined balancer list"));
            steps.push(step(StepName::Monitor, now, format!("host monitor on {host_id}")));
            Ok(ScaleUpOutcome::Completed(ScaleUpReport {
                service: decision.service.clone(),
                tier: decision.tier,
                new_instance_url: instance.instance_url,
                new_host: host_id,
                steps,
            }))
        }
        Tier::Data => {
            // Compose begins with a replication session; the instance joins
            // the rotation when the copy finishes.
            if let Err(e) = platform
                .proxies
                .begin_replication(&decision.service, &instance.instance_url)
            {
                rollback(platform, &host_id, Some(&instance.instance_url));
                return Err(ScaleUpError {
                    failed_step: StepName::Compose,
                    cause: e.to_string(),
                    steps,
                });
            }
            let size_mb = platform
                .profile_of(&decision.component)
                .map(|p| p.data_size_mb)
                .unwrap_or(10.0);
            let copy_ms = ((size_mb / copy_bandwidth_mb_per_s) * 1_000.0).ceil() as u64;
            Ok(ScaleUpOutcome::AwaitingSync(PendingDataScale {
                service: decision.service.clone(),
                destination_url: instance.instance_url,
                host: host_id,
                copy_ms,
                steps_so_far: steps,
            }))
        }
    }
}

/// Completes a data-tier pipeline once the copy window has elapsed: syncs
/// the replicas, joins the rotation, and records the registration.
pub fn finish_data_scale_up(
    platform: &mut Platform,
    pending: PendingDataScale,
    now: TimeMs,
) -> Result<ScaleUpReport, ScaleUpError> {
    let mut steps = pending.steps_so_far;
    match platform.proxies.finish_replication(&pending.service) {
        Ok(report) => {
            platform.control.record_registration(
                &pending.service,
                ServiceKind::Data,
                &pending.destination_url,
            );
            steps.push(step(
                StepName::Compose,
                now,
                format!("replica synced, {} writes replayed", report.replayed),
            ));
            steps.push(step(StepName::Monitor, now, format!("host monitor on {}", pending.host)));
            Ok(ScaleUpReport {
                service: pending.service,
                tier: Tier::Data,
                new_instance_url: pending.destination_url,
                new_host: pending.host,
                steps,
            })
        }
        Err(e) => {
            rollback(platform, &pending.host, Some(&pending.destination_url));
            Err(ScaleUpError {
                failed_step: StepName::Compose,
                cause: e.to_string(),
                steps,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScaleDownOutcome {
    /// Victim was idle: drained, retired, and its host released.
    Released { victim: String, host: String },
    /// Victim still has in-flight requests; it drains first.
    Draining { victim: String, host: String },
    /// Data victim left the rotation; release the host once it is idle.
    AwaitingHostIdle { victim: String, host: String },
}

#[derive(Debug, Error)]
pub enum ScaleDownError {
    #[error("service {0} would drop below one instance")]
    LastInstance(String),
    #[error("victim instance {0} not found")]
    UnknownVictim(String),
    #[error("balancer: {0}")]
    Balancer(#[from] crate::balancer::BalancerError),
    #[error("proxy: {0}")]
    Proxy(#[from] crate::proxy::ProxyError),
}

/// Retires the victim instance: deregister, drain, then release the host.
pub fn scale_down(
    platform: &mut Platform,
    decision: &ScalingDecision,
    _now: TimeMs,
) -> Result<ScaleDownOutcome, ScaleDownError> {
    assert_eq!(decision.direction, Direction::Down);
    let victim = decision
        .victim
        .clone()
        .ok_or_else(|| ScaleDownError::UnknownVictim("<none>".into()))?;
    if platform.serving_count(&decision.service) < 2 {
        return Err(ScaleDownError::LastInstance(decision.service.clone()));
    }
    let host = platform
        .control
        .instance(&victim)
        .ok_or_else(|| ScaleDownError::UnknownVictim(victim.clone()))?
        .host
        .clone();

    platform
        .control
        .deregister_instance(&victim)
        .map_err(|_| ScaleDownError::UnknownVictim(victim.clone()))?;

    match decision.tier {
        Tier::Software => match platform.balancer.deregister(&decision.service, &victim)? {
            crate::balancer::DeregisterOutcome::Removed => {
                let _ = platform.control.retire_instance(&victim);
                let _ = platform.market.unsubscribe(&host, ReleaseReason::ScaleDown);
                Ok(ScaleDownOutcome::Released { victim, host })
            }
            crate::balancer::DeregisterOutcome::Draining { .. } => {
                Ok(ScaleDownOutcome::Draining { victim, host })
            }
        },
        Tier::Data => {
            platform.proxies.remove_instance(&decision.service, &victim)?;
            let _ = platform.control.retire_instance(&victim);
            Ok(ScaleDownOutcome::AwaitingHostIdle { victim, host })
        }
    }
}

/// Finishes a software scale-down after the balancer drained the victim.
pub fn finish_drained_scale_down(
    platform: &mut Platform,
    victim: &str,
    host: &str,
) -> Result<(), ScaleDownError> {
    platform
        .control
        .retire_instance(victim)
        .map_err(|_| ScaleDownError::UnknownVictim(victim.to_string()))?;
    let _ = platform.market.unsubscribe(host, ReleaseReason::ScaleDown);
    Ok(())
}

/// Releases a data victim's host once its in-flight work is done.
pub fn release_idle_host(platform: &mut Platform, host: &str) {
    let _ = platform.market.unsubscribe(host, ReleaseReason::ScaleDown);
}
