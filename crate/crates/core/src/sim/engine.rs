//! The discrete-event engine: runs the full platform lifecycle (upload,
//! subscribe, configure, publish, bind, workload, monitoring, scaling) on a
//! single deterministic timeline. Events are processed in (time, sequence)
//! order and processing an event may only schedule future events.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use thiserror::Error;

use crate::control::RegistrationMode;

use crate::model::{PrincipalId, TimeInterval, TimeMs};
use crate::monitor::{
    clean, dump_stream, union, AppTuple, HostTuple, MonitorRecord, ThresholdDetector,
    ThresholdEvent, TupleStream,
};
use crate::platform::Platform;
use crate::proxy::{DataOperation, DispatchOutcome, ProxyId, WriteOp, WriteRequest};
use crate::repository::{data_fixture, software_fixture, PackageKind};
use crate::scaler::{
    self, Autoscaler, Decision, PendingDataScale, ScaleDownOutcome, ScaleUpOutcome, ScaleUpReport,
};

use super::metrics::Metrics;
use super::scenario::{Scenario, ScenarioError};
use super::trace::{
    code_version, diff_events, parse_trace, ReplayReport, TraceError, TraceLog,
};
use super::workload::{generate_workload, Arrival, BadSpec};
use super::host::HostSim;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Workload(#[from] BadSpec),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("setup failed: {0}")]
    Setup(String),
}

/// Per-request path record; stages appear in request-flow order.
#[derive(Debug, Clone)]
pub struct RequestRecord {
    pub id: u64,
    pub arrival: TimeMs,
    pub is_write: bool,
    pub rejected: bool,
    pub lb_url: Option<String>,
    pub software_host: Option<String>,
    pub software_start: Option<TimeMs>,
    pub software_done: Option<TimeMs>,
    pub data_proxy: Option<ProxyId>,
    pub data_instance: Option<String>,
    pub data_dispatch: Option<TimeMs>,
    pub data_done: Option<TimeMs>,
    pub completion: Option<TimeMs>,
}

impl RequestRecord {
    fn new(id: u64, arrival: TimeMs, is_write: bool) -> Self {
        RequestRecord {
            id,
            arrival,
            is_write,
            rejected: false,
            lb_url: None,
            software_host: None,
            software_start: None,
            software_done: None,
            data_proxy: None,
            data_instance: None,
            data_dispatch: None,
            data_done: None,
            completion: None,
        }
    }
}

/// A finished scale-down, for assertions and the decision log.
#[derive(Debug, Clone)]
pub struct ScaleDownRecord {
    pub service: String,
    pub victim: String,
    pub host: String,
    pub drained_first: bool,
    pub released_at: TimeMs,
}

/// Final state of one data cluster, for post-run assertions.
#[derive(Debug, Clone)]
pub struct ClusterSnapshot {
    pub instances: Vec<(String, BTreeMap<String, i64>)>,
    pub log_len: usize,
}

#[derive(Debug)]
pub struct RunOutput {
    pub scenario: Scenario,
    pub trace: String,
    pub metrics: Metrics,
    pub stream_dump: String,
    pub records: Vec<RequestRecord>,
    pub host_streams: BTreeMap<String, Vec<HostTuple>>,
    pub app_tuples: Vec<AppTuple>,
    pub overload_events: Vec<ThresholdEvent>,
    pub idle_events: Vec<ThresholdEvent>,
    pub scale_reports: Vec<ScaleUpReport>,
    pub scale_downs: Vec<ScaleDownRecord>,
    pub ledger_initial: BTreeMap<String, u32>,
    pub ledger_final: BTreeMap<String, u32>,
    pub routed_counts: BTreeMap<String, u64>,
    pub data_clusters: BTreeMap<String, ClusterSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Ev {
    Arrival { req: u64 },
    StartSoftware { req: u64 },
    HostCheck { host: String, epoch: u64 },
    StartData { req: u64 },
    Respond { req: u64 },
    Sample { host: String },
    FinishReplication { service: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Scheduled {
    at: TimeMs,
    seq: u64,
    ev: Ev,
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

struct Engine {
    scenario: Scenario,
    platform: Platform,
    hosts: BTreeMap<String, HostSim>,
    queue: BinaryHeap<Reverse<Scheduled>>,
    next_seq: u64,
    next_job: u64,
    now: TimeMs,
    duration: TimeMs,
    trace: TraceLog,

    arrivals: Vec<Arrival>,
    records: Vec<RequestRecord>,
    arrivals_seen: u64,
    completions: u64,
    rejected: u64,

    jobs: BTreeMap<u64, (u64, JobStage)>,
    url_to_host: BTreeMap<String, String>,
    monitored: BTreeSet<String>,
    host_streams: BTreeMap<String, TupleStream<HostTuple>>,
    app_stream: TupleStream<AppTuple>,
    overload: ThresholdDetector,
    idle: ThresholdDetector,
    overload_events: Vec<ThresholdEvent>,
    idle_events: Vec<ThresholdEvent>,

    autoscaler: Autoscaler,
    pending_data_scales: BTreeMap<String, PendingDataScale>,
    draining_victims: BTreeMap<String, (String, String)>,
    pending_host_release: BTreeMap<String, (String, String)>,
    binding_cache: BTreeMap<String, (String, ProxyId)>,
    scale_reports: Vec<ScaleUpReport>,
    scale_downs: Vec<ScaleDownRecord>,
    routed_counts: BTreeMap<String, u64>,

    sw_service: String,
    net_ms: u64,
    sample_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum JobStage {
    Software,
    Data { service: String },
}

/// Runs a scenario already parsed; the canonical TOML form is embedded in
/// the trace so the run can be replayed from the trace alone.
pub fn run(scenario: &Scenario) -> Result<RunOutput, RunError> {
    let text = scenario.to_toml();
    run_with_text(scenario.clone(), &text)
}

/// Parses and runs scenario text, embedding the text verbatim.
pub fn run_scenario_text(text: &str) -> Result<RunOutput, RunError> {
    let scenario = Scenario::parse(text)?;
    run_with_text(scenario, text)
}

fn run_with_text(scenario: Scenario, text: &str) -> Result<RunOutput, RunError> {
    scenario.validate()?;
    let mut engine = Engine::setup(scenario)?;
    engine.run_loop();
    Ok(engine.finish(text))
}

/// Re-executes the scenario embedded in a trace and diffs event lines.
pub fn replay_trace(trace_text: &str) -> Result<ReplayReport, RunError> {
    let parsed = parse_trace(trace_text)?;
    let output = run_scenario_text(&parsed.scenario_toml)?;
    let replayed = parse_trace(&output.trace)?;
    let code_version_warning = if parsed.code != code_version() {
        Some(format!(
            "trace was produced by {} but this is {}",
            parsed.code,
            code_version()
        ))
    } else {
        None
    };
    Ok(ReplayReport {
        code_version_warning,
        diffs: diff_events(&parsed.event_lines, &replayed.event_lines),
        recorded_events: parsed.event_lines.len(),
        replayed_events: replayed.event_lines.len(),
    })
}

impl Engine {
    fn setup(scenario: Scenario) -> Result<Engine, RunError> {
        if scenario.catalog_file.is_some() {
            // traces must stay self-contained; the CLI inlines catalogs
            return Err(RunError::Setup(
                "catalog_file must be inlined into offers before running".into(),
            ));
        }
        let operator = PrincipalId::new("operator");
        let provider = PrincipalId::new("provider-1");
        let mut platform = Platform::new(
            operator,
            scenario.sim.proxy_count,
            scenario.sim.proxy_replication_factor,
        );
        let mut trace = TraceLog::new();
        let t0 = TimeMs(0);

        platform.market.add_provider(provider.clone());
        for spec in &scenario.offers {
            platform.market.add_offer(spec.to_offer());
        }
        let agreement = platform
            .negotiate_default_agreement(
                &provider,
                TimeInterval::from_hours(0.0, scenario.sim.rental_hours),
            )
            .map_err(|e| RunError::Setup(e.to_string()))?;
        trace.event(t0, "NEGOTIATE", &format!("agreement={agreement} provider={provider}"));

        let duration = TimeMs::from_secs(scenario.sim.duration_s);
        let mut engine = Engine {
            sw_service: scenario.workload.service.clone(),
            net_ms: scenario.sim.network_latency_ms,
            sample_ms: (scenario.sim.sample_period_s * 1_000.0).round() as u64,
            overload: ThresholdDetector::overload(
                scenario.detector.overload_pct,
                (scenario.detector.overload_sustain_s * 1_000.0).round() as u64,
            ),
            idle: ThresholdDetector::idle(
                scenario.detector.idle_pct,
                (scenario.detector.idle_sustain_s * 1_000.0).round() as u64,
            ),
            autoscaler: Autoscaler::new((scenario.autoscaler.cooldown_s * 1_000.0).round() as u64),
            scenario,
            platform,
            hosts: BTreeMap::new(),
            queue: BinaryHeap::new(),
            next_seq: 0,
            next_job: 0,
            now: t0,
            duration,
            trace,
            arrivals: Vec::new(),
            records: Vec::new(),
            arrivals_seen: 0,
            completions: 0,
            rejected: 0,
            jobs: BTreeMap::new(),
            url_to_host: BTreeMap::new(),
            monitored: BTreeSet::new(),
            host_streams: BTreeMap::new(),
            app_stream: TupleStream::new(),
            overload_events: Vec::new(),
            idle_events: Vec::new(),
            pending_data_scales: BTreeMap::new(),
            draining_victims: BTreeMap::new(),
            pending_host_release: BTreeMap::new(),
            binding_cache: BTreeMap::new(),
            scale_reports: Vec::new(),
            scale_downs: Vec::new(),
            routed_counts: BTreeMap::new(),
        };
        engine.setup_components()?;
        engine.setup_workload()?;
        Ok(engine)
    }

    fn setup_components(&mut self) -> Result<(), RunError> {
        let t0 = TimeMs(0);
        let mut component_ids = BTreeMap::new();
        for spec in &self.scenario.components.clone() {
            let kind = spec
                .package_kind()
                .ok_or_else(|| RunError::Setup(format!("component {} has bad kind", spec.name)))?;
            let archive = match kind {
                PackageKind::Software => software_fixture(&format!("{}_pkg", spec.name)),
                PackageKind::Data => data_fixture(&format!("{}_pkg", spec.name)),
            };
            let provider = PrincipalId::new(spec.provider.clone());
            let id = self
                .platform
                .upload_component(&provider, archive, spec.profile())
                .map_err(|e| RunError::Setup(format!("upload {}: {e}", spec.name)))?;
            self.trace.event(
                t0,
                "UPLOAD",
                &format!("component={} id={} kind={}", spec.name, id, spec.kind),
            );
            component_ids.insert(spec.name.clone(), (id, kind));
        }

        for publish in &self.scenario.publish.clone() {
            let (component_id, kind) = component_ids
                .get(&publish.component)
                .ok_or_else(|| RunError::Setup(format!("unknown component {}", publish.component)))?
                .clone();
            let template = publish.template.to_template();
            for _ in 0..publish.replicas {
                let (host, preconfigured) = self
                    .platform
                    .provision_host(&template, kind, t0)
                    .map_err(|e| RunError::Setup(format!("subscribe for {}: {e}", publish.component)))?;
                self.trace.event(
                    t0,
                    "SUBSCRIBE",
                    &format!("host={} offer={}", host.instance_id, host.offer_id),
                );
                if preconfigured {
                    self.trace
                        .event(t0, "CONFIGURE", &format!("host={} skipped=pre-configured", host.instance_id));
                } else {
                    self.trace
                        .event(t0, "CONFIGURE", &format!("host={} env-installed", host.instance_id));
                }
                let instance = self
                    .platform
                    .publish(&component_id, &host.instance_id, RegistrationMode::Direct)
                    .map_err(|e| RunError::Setup(format!("publish {}: {e}", publish.component)))?;
                self.trace.event(
                    t0,
                    "PUBLISH",
                    &format!(
                        "service={} url={} host={}",
                        publish.component, instance.instance_url, host.instance_id
                    ),
                );
                self.attach_host(&host.instance_id, &instance.instance_url, t0);
            }
        }

        for bind in &self.scenario.bind.clone() {
            let operator = self.platform.operator.clone();
            let composite = self
                .platform
                .control
                .compose(&bind.software, &bind.data, &operator, &operator, &self.platform.proxies)
                .map_err(|e| RunError::Setup(format!("bind {}+{}: {e}", bind.software, bind.data)))?;
            let (_, proxy) = self
                .platform
                .control
                .resolve_binding(&bind.software)
                .map_err(|e| RunError::Setup(e.to_string()))?;
            self.trace.event(
                t0,
                "COMPOSE",
                &format!("composite={} upper={} lower={}", composite.id.name, bind.software, bind.data),
            );
            self.trace.event(
                t0,
                "BIND",
                &format!("software={} data={} proxy={}", bind.software, bind.data, proxy),
            );
        }
        // setup-time invalidations are impossible; drain defensively
        let _ = self.platform.control.take_invalidations();
        Ok(())
    }

    fn setup_workload(&mut self) -> Result<(), RunError> {
        let end_s = self.scenario.workload_end_s();
        self.arrivals = generate_workload(&self.scenario.workload, end_s, self.scenario.sim.seed)?;
        for i in 0..self.arrivals.len() {
            let t = self.arrivals[i].t;
            if t <= self.duration {
                self.schedule(t, Ev::Arrival { req: i as u64 });
            }
        }
        self.records = self
            .arrivals
            .iter()
            .enumerate()
            .map(|(i, a)| RequestRecord::new(i as u64, a.t, a.is_write))
            .collect();
        Ok(())
    }

    /// Creates the fluid host model and attaches monitoring.
    fn attach_host(&mut self, host_id: &str, instance_url: &str, now: TimeMs) {
        let capacity = self
            .platform
            .market
            .instance(host_id)
            .map(|i| i.properties.capacity.cpu_capacity())
            .unwrap_or(1.0);
        self.hosts
            .insert(host_id.to_string(), HostSim::new(host_id, capacity));
        self.url_to_host
            .insert(instance_url.to_string(), host_id.to_string());
        self.monitored.insert(host_id.to_string());
        self.host_streams
            .insert(host_id.to_string(), TupleStream::new());
        let first_sample = TimeMs(now.0 + self.sample_ms);
        if first_sample <= self.duration {
            self.schedule(first_sample, Ev::Sample { host: host_id.to_string() });
        }
        self.trace
            .event(now, "MONITOR-ATTACH", &format!("host={host_id}"));
    }

    fn detach_host(&mut self, host_id: &str, now: TimeMs) {
        self.monitored.remove(host_id);
        self.overload.forget(host_id);
        self.idle.forget(host_id);
        if let Some(host) = self.hosts.get(host_id) {
            debug_assert!(host.is_idle(), "detaching host with running jobs");
        }
        self.hosts.remove(host_id);
        self.trace
            .event(now, "MONITOR-DETACH", &format!("host={host_id}"));
    }

    fn schedule(&mut self, at: TimeMs, ev: Ev) {
        debug_assert!(at >= self.now, "event scheduled in the past");
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(Scheduled { at, seq, ev }));
    }

    fn run_loop(&mut self) {
        while let Some(Reverse(next)) = self.queue.pop() {
            if next.at > self.duration {
                break;
            }
            debug_assert!(next.at >= self.now);
            self.now = next.at;
            self.process(next.ev);
            self.assert_conservation();
        }
    }

    fn assert_conservation(&self) {
        let in_flight = self.arrivals_seen - self.completions - self.rejected;
        let outstanding = self.platform.balancer.total_outstanding();
        assert_eq!(
            outstanding, in_flight,
            "conservation violated at {}ms: outstanding {} != in-flight {}",
            self.now.0, outstanding, in_flight
        );
    }

    fn process(&mut self, ev: Ev) {
        // binding invalidation events clear the per-instance caches
        for invalidation in self.platform.control.take_invalidations() {
            self.binding_cache.clear();
            self.trace.event(
                self.now,
                "BIND-INVALIDATE",
                &format!("software={}", invalidation.software),
            );
        }
        match ev {
            Ev::Arrival { req } => self.on_arrival(req),
            Ev::StartSoftware { req } => self.on_start_software(req),
            Ev::HostCheck { host, epoch } => self.on_host_check(&host, epoch),
            Ev::StartData { req } => self.on_start_data(req),
            Ev::Respond { req } => self.on_respond(req),
            Ev::Sample { host } => self.on_sample(&host),
            Ev::FinishReplication { service } => self.on_finish_replication(&service),
        }
    }

    fn on_arrival(&mut self, req: u64) {
        self.arrivals_seen += 1;
        let service = self.sw_service.clone();
        match self.platform.balancer.route(&service) {
            Ok(decision) => {
                *self.routed_counts.entry(decision.chosen.clone()).or_insert(0) += 1;
                let snapshot: Vec<String> = decision
                    .snapshot
                    .iter()
                    .map(|(u, n)| format!("{u}:{n}"))
                    .collect();
                self.trace.event(
                    self.now,
                    "ROUTE",
                    &format!("req={req} service={service} url={} outstanding=[{}]", decision.chosen, snapshot.join(",")),
                );
                self.records[req as usize].lb_url = Some(decision.chosen.clone());
                self.schedule(TimeMs(self.now.0 + self.net_ms), Ev::StartSoftware { req });
            }
            Err(_) => {
                self.rejected += 1;
                self.records[req as usize].rejected = true;
                // an unservable request is an SLA risk the monitors see
                self.trace
                    .event(self.now, "REJECT", &format!("req={req} service={service}"));
            }
        }
    }

    fn on_start_software(&mut self, req: u64) {
        let url = self.records[req as usize]
            .lb_url
            .clone()
            .expect("routed request has a url");
        let host_id = match self.url_to_host.get(&url) {
            Some(h) => h.clone(),
            None => {
                // instance retired between routing and start; treat as lost
                self.trace.event(self.now, "DROP", &format!("req={req} url={url}"));
                self.finish_request(req);
                return;
            }
        };
        let job = self.next_job;
        self.next_job += 1;
        self.jobs.insert(job, (req, JobStage::Software));
        let record = &mut self.records[req as usize];
        record.software_host = Some(host_id.clone());
        record.software_start = Some(self.now);
        let host = self.hosts.get_mut(&host_id).expect("host exists");
        host.add_job(
            self.now,
            job,
            self.scenario.workload.software_demand_units,
            self.scenario.workload.software_demand_rate,
        );
        let epoch = host.epoch;
        if let Some(at) = host.next_completion() {
            self.schedule(at, Ev::HostCheck { host: host_id, epoch });
        }
    }

    fn on_host_check(&mut self, host_id: &str, epoch: u64) {
        let Some(host) = self.hosts.get_mut(host_id) else {
            return; // released since scheduling
        };
        if host.epoch != epoch {
            return; // membership changed; a fresher check is queued
        }
        let done = host.complete_ready(self.now);
        let still_busy = !host.is_idle();
        let new_epoch = host.epoch;
        let next = host.next_completion();

        for job in done {
            let (req, stage) = self.jobs.remove(&job).expect("job registered");
            match stage {
                JobStage::Software => {
                    self.records[req as usize].software_done = Some(self.now);
                    self.trace
                        .event(self.now, "SW-DONE", &format!("req={req} host={host_id}"));
                    let bound = self
                        .platform
                        .control
                        .resolve_binding(&self.sw_service)
                        .is_ok();
                    if bound {
                        self.schedule(TimeMs(self.now.0 + self.net_ms), Ev::StartData { req });
                    } else {
                        self.schedule(TimeMs(self.now.0 + self.net_ms), Ev::Respond { req });
                    }
                }
                JobStage::Data { service: data_service } => {
                    let record = &mut self.records[req as usize];
                    record.data_done = Some(self.now);
                    let access_ms = self.now.0 - record.data_dispatch.expect("dispatched").0;
                    let proxy = record.data_proxy.clone().expect("proxy recorded");
                    let instance = record.data_instance.clone().expect("instance recorded");
                    self.platform.proxies.record_access(
                        &proxy,
                        &data_service,
                        &instance,
                        access_ms,
                        self.now,
                    );
                    self.trace.event(
                        self.now,
                        "DATA-DONE",
                        &format!("req={req} instance={instance} access_ms={access_ms}"),
                    );
                    // result returns data -> software -> user
                    self.schedule(TimeMs(self.now.0 + 2 * self.net_ms), Ev::Respond { req });
                }
            }
        }

        if still_busy {
            if let Some(at) = next {
                self.schedule(at, Ev::HostCheck { host: host_id.to_string(), epoch: new_epoch });
            }
        }
        self.maybe_release_idle_host(host_id);
    }

    fn maybe_release_idle_host(&mut self, host_id: &str) {
        if let Some((service, victim)) = self.pending_host_release.get(host_id).cloned() {
            let idle = self.hosts.get(host_id).map(|h| h.is_idle()).unwrap_or(true);
            if idle {
                self.pending_host_release.remove(host_id);
                scaler::release_idle_host(&mut self.platform, host_id);
                self.trace.event(
                    self.now,
                    "RELEASE",
                    &format!("host={host_id} reason=scale-down"),
                );
                self.detach_host(host_id, self.now);
                self.scale_downs.push(ScaleDownRecord {
                    service: service.clone(),
                    victim,
                    host: host_id.to_string(),
                    drained_first: true,
                    released_at: self.now,
                });
                self.autoscaler.pipeline_done(&service);
            }
        }
    }

    fn on_start_data(&mut self, req: u64) {
        let service = self.sw_service.clone();
        let sw_url = self.records[req as usize].lb_url.clone().expect("routed");
        let binding = match self.binding_cache.get(&sw_url) {
            Some(b) => b.clone(),
            None => match self.platform.control.resolve_binding(&service) {
                Ok((data_id, proxy)) => {
                    self.trace.event(
                        self.now,
                        "RESOLVE",
                        &format!("software-instance={sw_url} data={} proxy={proxy}", data_id.name),
                    );
                    let entry = (data_id.name, proxy);
                    self.binding_cache.insert(sw_url.clone(), entry.clone());
                    entry
                }
                Err(_) => {
                    self.schedule(TimeMs(self.now.0 + self.net_ms), Ev::Respond { req });
                    return;
                }
            },
        };
        let (data_service, proxy) = binding;
        let arrival = &self.arrivals[req as usize];
        let op = if arrival.is_write {
            DataOperation::Write(WriteRequest {
                key: arrival.key.clone(),
                op: WriteOp::Add(1),
            })
        } else {
            DataOperation::Read {
                key: arrival.key.clone(),
            }
        };
        let outcome = match self.platform.proxies.dispatch(&data_service, op) {
            Ok(o) => o,
            Err(e) => {
                self.trace
                    .event(self.now, "DATA-ERR", &format!("req={req} error={e}"));
                self.schedule(TimeMs(self.now.0 + self.net_ms), Ev::Respond { req });
                return;
            }
        };
        let record = &mut self.records[req as usize];
        record.data_proxy = Some(proxy.clone());
        record.data_dispatch = Some(self.now);
        match outcome {
            DispatchOutcome::Read { instance, .. } => {
                record.data_instance = Some(instance.clone());
                self.trace.event(
                    self.now,
                    "DISPATCH",
                    &format!("req={req} kind=read proxy={proxy} instance={instance}"),
                );
                self.start_data_job(req, &data_service, &instance);
            }
            DispatchOutcome::WriteApplied { instances, seq } => {
                let primary = instances.first().cloned().unwrap_or_default();
                record.data_instance = Some(primary.clone());
                self.trace.event(
                    self.now,
                    "DISPATCH",
                    &format!(
                        "req={req} kind=write seq={seq} proxy={proxy} instances=[{}]",
                        instances.join(",")
                    ),
                );
                // replica fan-out beyond the primary is not charged to hosts
                self.start_data_job(req, &data_service, &primary);
            }
            DispatchOutcome::WriteQueued { queue_len } => {
                // writes blocked by an in-flight copy acknowledge immediately
                let cluster = self.platform.proxies.cluster(&data_service);
                let source = cluster
                    .and_then(|c| c.session().map(|s| s.source.clone()))
                    .unwrap_or_default();
                record.data_instance = Some(source.clone());
                record.data_done = Some(self.now);
                self.platform
                    .proxies
                    .record_access(&proxy, &data_service, &source, 0, self.now);
                self.trace.event(
                    self.now,
                    "QUEUED",
                    &format!("req={req} queue_len={queue_len} source={source}"),
                );
                self.schedule(TimeMs(self.now.0 + 2 * self.net_ms), Ev::Respond { req });
            }
        }
    }

    fn start_data_job(&mut self, req: u64, data_service: &str, instance: &str) {
        let host_id = match self.url_to_host.get(instance) {
            Some(h) => h.clone(),
            None => {
                // instance without a simulated host (e.g. replica mid-copy)
                self.records[req as usize].data_done = Some(self.now);
                self.schedule(TimeMs(self.now.0 + 2 * self.net_ms), Ev::Respond { req });
                return;
            }
        };
        let job = self.next_job;
        self.next_job += 1;
        self.jobs.insert(
            job,
            (
                req,
                JobStage::Data {
                    service: data_service.to_string(),
                },
            ),
        );
        let host = self.hosts.get_mut(&host_id).expect("data host exists");
        host.add_job(
            self.now,
            job,
            self.scenario.workload.data_demand_units,
            self.scenario.workload.data_demand_rate,
        );
        let epoch = host.epoch;
        if let Some(at) = host.next_completion() {
            self.schedule(at, Ev::HostCheck { host: host_id, epoch });
        }
    }

    fn on_respond(&mut self, req: u64) {
        self.finish_request(req);
    }

    fn finish_request(&mut self, req: u64) {
        let service = self.sw_service.clone();
        let url = self.records[req as usize].lb_url.clone().expect("routed");
        self.completions += 1;
        self.records[req as usize].completion = Some(self.now);
        let response_ms = self.now.0 - self.records[req as usize].arrival.0;
        let _ = self.app_stream.emit(AppTuple {
            t: self.now,
            service: service.clone(),
            instance_url: url.clone(),
            response_time_ms: response_ms,
        });
        self.trace.event(
            self.now,
            "COMPLETE",
            &format!("req={req} response_ms={response_ms}"),
        );
        match self.platform.balancer.complete(&service, &url) {
            Ok(outcome) => {
                if let Some(drained_url) = outcome.drained {
                    self.on_victim_drained(&drained_url);
                }
            }
            Err(e) => {
                self.trace
                    .event(self.now, "LB-ERR", &format!("req={req} error={e}"));
            }
        }
    }

    fn on_victim_drained(&mut self, victim: &str) {
        let Some((service, host)) = self.draining_victims.remove(victim) else {
            return;
        };
        self.trace
            .event(self.now, "DRAINED", &format!("victim={victim}"));
        if scaler::finish_drained_scale_down(&mut self.platform, victim, &host).is_ok() {
            self.trace
                .event(self.now, "RELEASE", &format!("host={host} reason=scale-down"));
            self.url_to_host.remove(victim);
            self.detach_host(&host, self.now);
            self.scale_downs.push(ScaleDownRecord {
                service: service.clone(),
                victim: victim.to_string(),
                host,
                drained_first: true,
                released_at: self.now,
            });
        }
        self.autoscaler.pipeline_done(&service);
    }

    fn on_sample(&mut self, host_id: &str) {
        if !self.monitored.contains(host_id) {
            return;
        }
        let host = self.hosts.get(host_id).expect("monitored host exists");
        let utilization = host.utilization();
        let jobs = host.job_count() as f64;
        let tuple = HostTuple {
            t: self.now,
            host: host_id.to_string(),
            cpu_pct: utilization * 100.0,
            memory_used_mb: 210.0 + 12.0 * jobs,
            disk_used_gb: 25.0,
            ethernet_kbps: 80.0 * jobs,
            socket_count: jobs as u32 + 1,
        };
        self.trace.event(
            self.now,
            "MON",
            &format!("host={host_id} cpu={:.3} jobs={}", tuple.cpu_pct, host.job_count()),
        );
        let stream = self.host_streams.get_mut(host_id).expect("stream exists");
        stream.emit(tuple.clone()).expect("host tuple within schema");

        let overload_event = self.overload.observe(host_id, self.now, tuple.cpu_pct);
        let idle_event = self.idle.observe(host_id, self.now, tuple.cpu_pct);
        if let Some(event) = overload_event {
            self.trace.event(
                self.now,
                "OVERLOAD",
                &format!(
                    "host={host_id} threshold={} window=[{}..{}]",
                    event.threshold_pct,
                    event.window.start().0,
                    event.window.end().0
                ),
            );
            self.overload_events.push(event.clone());
            self.handle_threshold_event(event);
        }
        if let Some(event) = idle_event {
            self.trace.event(
                self.now,
                "IDLE",
                &format!(
                    "host={host_id} threshold={} window=[{}..{}]",
                    event.threshold_pct,
                    event.window.start().0,
                    event.window.end().0
                ),
            );
            self.idle_events.push(event.clone());
            self.handle_threshold_event(event);
        }

        let next = TimeMs(self.now.0 + self.sample_ms);
        if next <= self.duration {
            self.schedule(next, Ev::Sample { host: host_id.to_string() });
        }
    }

    fn handle_threshold_event(&mut self, event: ThresholdEvent) {
        if !self.scenario.autoscaler.enabled {
            return;
        }
        let decision = match self.autoscaler.decide(&event, &self.platform, self.now) {
            Ok(Decision::Act(d)) => d,
            Ok(Decision::NoAction(reason)) => {
                self.trace.event(
                    self.now,
                    "NOACT",
                    &format!("host={} reason={reason}", event.source),
                );
                return;
            }
            Err(e) => {
                self.trace
                    .event(self.now, "SCALE-ERR", &format!("error={e}"));
                return;
            }
        };
        self.trace.event(
            self.now,
            "DECIDE",
            &format!(
                "service={} direction={} tier={} trigger={}",
                decision.service, decision.direction, decision.tier, decision.trigger_host
            ),
        );
        match decision.direction {
            crate::scaler::Direction::Up => {
                match scaler::scale_up(
                    &mut self.platform,
                    &decision,
                    self.now,
                    self.scenario.sim.copy_bandwidth_mb_per_s,
                ) {
                    Ok(ScaleUpOutcome::Completed(report)) => {
                        for step in &report.steps {
                            self.trace.event(
                                step.at,
                                "STEP",
                                &format!(
                                    "service={} name={} skipped={} detail={}",
                                    report.service, step.name, step.skipped, step.detail
                                ),
                            );
                        }
                        self.attach_host(&report.new_host, &report.new_instance_url, self.now);
                        self.scale_reports.push(report.clone());
                        self.autoscaler.pipeline_done(&report.service);
                    }
                    Ok(ScaleUpOutcome::AwaitingSync(pending)) => {
                        for step in &pending.steps_so_far {
                            self.trace.event(
                                step.at,
                                "STEP",
                                &format!(
                                    "service={} name={} skipped={} detail={}",
                                    pending.service, step.name, step.skipped, step.detail
                                ),
                            );
                        }
                        self.trace.event(
                            self.now,
                            "REPLICATE",
                            &format!(
                                "service={} destination={} copy_ms={}",
                                pending.service, pending.destination_url, pending.copy_ms
                            ),
                        );
                        // the destination host exists but joins monitoring
                        // only at the pipeline's monitor step
                        let capacity = self
                            .platform
                            .market
                            .instance(&pending.host)
                            .map(|i| i.properties.capacity.cpu_capacity())
                            .unwrap_or(1.0);
                        self.hosts
                            .insert(pending.host.clone(), HostSim::new(&pending.host, capacity));
                        self.url_to_host
                            .insert(pending.destination_url.clone(), pending.host.clone());
                        let finish = TimeMs(self.now.0 + pending.copy_ms);
                        let service = pending.service.clone();
                        self.pending_data_scales.insert(service.clone(), pending);
                        self.schedule(finish, Ev::FinishReplication { service });
                    }
                    Err(e) => {
                        self.trace.event(
                            self.now,
                            "SCALE-ABORT",
                            &format!(
                                "service={} failed_step={} cause={}",
                                decision.service, e.failed_step, e.cause
                            ),
                        );
                        self.autoscaler.pipeline_done(&decision.service);
                    }
                }
            }
            crate::scaler::Direction::Down => {
                match scaler::scale_down(&mut self.platform, &decision, self.now) {
                    Ok(ScaleDownOutcome::Released { victim, host }) => {
                        self.trace.event(
                            self.now,
                            "DOWN",
                            &format!("service={} victim={victim} drained=immediate", decision.service),
                        );
                        self.trace.event(
                            self.now,
                            "RELEASE",
                            &format!("host={host} reason=scale-down"),
                        );
                        self.url_to_host.remove(&victim);
                        self.detach_host(&host, self.now);
                        self.scale_downs.push(ScaleDownRecord {
                            service: decision.service.clone(),
                            victim,
                            host,
                            drained_first: false,
                            released_at: self.now,
                        });
                        self.autoscaler.pipeline_done(&decision.service);
                    }
                    Ok(ScaleDownOutcome::Draining { victim, host }) => {
                        self.trace.event(
                            self.now,
                            "DOWN",
                            &format!("service={} victim={victim} drained=waiting", decision.service),
                        );
                        self.draining_victims
                            .insert(victim, (decision.service.clone(), host));
                    }
                    Ok(ScaleDownOutcome::AwaitingHostIdle { victim, host }) => {
                        self.trace.event(
                            self.now,
                            "DOWN",
                            &format!("service={} victim={victim} drained=rotation", decision.service),
                        );
                        self.url_to_host.remove(&victim);
                        self.pending_host_release
                            .insert(host.clone(), (decision.service.clone(), victim));
                        self.maybe_release_idle_host(&host);
                    }
                    Err(e) => {
                        self.trace.event(
                            self.now,
                            "SCALE-ABORT",
                            &format!("service={} cause={e}", decision.service),
                        );
                        self.autoscaler.pipeline_done(&decision.service);
                    }
                }
            }
        }
    }

    fn on_finish_replication(&mut self, service: &str) {
        let Some(pending) = self.pending_data_scales.remove(service) else {
            return;
        };
        match scaler::finish_data_scale_up(&mut self.platform, pending, self.now) {
            Ok(report) => {
                for step in report.steps.iter().filter(|s| s.at == self.now) {
                    self.trace.event(
                        step.at,
                        "STEP",
                        &format!(
                            "service={} name={} skipped={} detail={}",
                            report.service, step.name, step.skipped, step.detail
                        ),
                    );
                }
                // rotation membership grew; monitoring attaches now
                let host_id = report.new_host.clone();
                self.monitored.insert(host_id.clone());
                self.host_streams.insert(host_id.clone(), TupleStream::new());
                let next = TimeMs(self.now.0 + self.sample_ms);
                if next <= self.duration {
                    self.schedule(next, Ev::Sample { host: host_id.clone() });
                }
                self.trace
                    .event(self.now, "MONITOR-ATTACH", &format!("host={host_id}"));
                self.scale_reports.push(report.clone());
                self.autoscaler.pipeline_done(&report.service);
            }
            Err(e) => {
                self.trace.event(
                    self.now,
                    "SCALE-ABORT",
                    &format!("service={service} failed_step={} cause={}", e.failed_step, e.cause),
                );
                self.autoscaler.pipeline_done(service);
            }
        }
    }

    fn finish(mut self, scenario_text: &str) -> RunOutput {
        // final conservation snapshot is part of the footer line
        let in_flight = self.arrivals_seen - self.completions - self.rejected;
        self.trace.event(
            self.duration,
            "SUMMARY",
            &format!(
                "arrivals={} completions={} rejected={} in_flight={}",
                self.arrivals_seen, self.completions, self.rejected, in_flight
            ),
        );

        // stream pipeline: union of all monitor streams, cleaned, dumped
        let mut streams: Vec<Vec<MonitorRecord>> = Vec::new();
        for stream in self.host_streams.values() {
            streams.push(stream.records().iter().cloned().map(MonitorRecord::Host).collect());
        }
        streams.push(
            self.app_stream
                .records()
                .iter()
                .cloned()
                .map(MonitorRecord::App)
                .collect(),
        );
        for proxy in self.platform.proxies.proxies().to_vec() {
            let tuples = self.platform.proxies.tuples(&proxy).to_vec();
            streams.push(tuples.into_iter().map(MonitorRecord::Data).collect());
        }
        let merged = union(streams);
        let skew_ms = 2 * self.sample_ms;
        let (cleaned, _report) = clean(&merged, skew_ms);
        let stream_dump = dump_stream(&cleaned);

        // SLA ceiling: the composite's interval when the service is bound
        let mut sla_hi: BTreeMap<String, u64> = BTreeMap::new();
        let mut response_times: BTreeMap<String, Vec<(TimeMs, u64)>> = BTreeMap::new();
        for tuple in self.app_stream.records() {
            response_times
                .entry(tuple.service.clone())
                .or_default()
                .push((tuple.t, tuple.response_time_ms));
        }
        for service in response_times.keys() {
            let composite_hi = self
                .platform
                .control
                .services()
                .filter(|r| {
                    r.composition
                        .as_ref()
                        .map(|(upper, _)| &upper.name == service)
                        .unwrap_or(false)
                })
                .map(|r| r.properties.performance.hi_ms)
                .next();
            let own = self
                .platform
                .control
                .service(service)
                .map(|r| r.properties.performance.hi_ms);
            if let Some(hi) = composite_hi.or(own) {
                sla_hi.insert(service.clone(), hi);
            }
        }
        let metrics = Metrics::assemble(
            self.scenario.sim.duration_s,
            self.arrivals_seen,
            self.completions,
            self.rejected,
            self.scale_reports.len() as u64,
            self.scale_downs.len() as u64,
            &response_times,
            &sla_hi,
        );

        let trace = self.trace.render(self.scenario.sim.seed, scenario_text);
        let ledger_final = self.platform.market.stock_ledger();
        let data_clusters = self
            .platform
            .proxies
            .clusters()
            .map(|(name, cluster)| {
                let instances = cluster
                    .instance_ids()
                    .iter()
                    .map(|id| {
                        (
                            id.clone(),
                            cluster.instance(id).map(|i| i.store.clone()).unwrap_or_default(),
                        )
                    })
                    .collect();
                (
                    name.clone(),
                    ClusterSnapshot {
                        instances,
                        log_len: cluster.log().entries().len(),
                    },
                )
            })
            .collect();
        RunOutput {
            ledger_initial: initial_ledger(&self.scenario),
            ledger_final,
            data_clusters,
            scenario: self.scenario,
            trace,
            metrics,
            stream_dump,
            records: self.records,
            host_streams: self
                .host_streams
                .into_iter()
                .map(|(k, v)| (k, v.records().to_vec()))
                .collect(),
            app_tuples: self.app_stream.records().to_vec(),
            overload_events: self.overload_events,
            idle_events: self.idle_events,
            scale_reports: self.scale_reports,
            scale_downs: self.scale_downs,
            routed_counts: self.routed_counts,
        }
    }
}

/// Stock plus live instances per offer implied by the scenario alone.
fn initial_ledger(scenario: &Scenario) -> BTreeMap<String, u32> {
    scenario
        .offers
        .iter()
        .map(|o| (o.offer_id.clone(), o.stock))
        .collect()
}
