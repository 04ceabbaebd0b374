//! Monitoring tuples, the stream pipeline (union, clean, associate,
//! aggregate), and threshold event detection feeding the autoscaler.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{TimeInterval, TimeMs};

/// Resource usage sampled on a host at a fixed period.
#[derive(Debug, Clone, PartialEq)]
pub struct HostTuple {
    pub t: TimeMs,
    pub host: String,
    pub cpu_pct: f64,
    pub memory_used_mb: f64,
    pub disk_used_gb: f64,
    pub ethernet_kbps: f64,
    pub socket_count: u32,
}

/// Emitted by an app module once per completed user request.
#[derive(Debug, Clone, PartialEq)]
pub struct AppTuple {
    pub t: TimeMs,
    pub service: String,
    pub instance_url: String,
    pub response_time_ms: u64,
}

/// Emitted by a data proxy once per data access.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTuple {
    pub t: TimeMs,
    pub data_service: String,
    pub instance: String,
    pub access_time_ms: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum SchemaViolation {
    #[error("cpu_pct {0} outside [0, 100]")]
    CpuOutOfRange(f64),
    #[error("negative usage field {field}: {value}")]
    NegativeUsage { field: &'static str, value: f64 },
    #[error("empty source id")]
    EmptySource,
}

impl HostTuple {
    pub fn validate(&self) -> Result<(), SchemaViolation> {
        if self.host.is_empty() {
            return Err(SchemaViolation::EmptySource);
        }
        if !(0.0..=100.0).contains(&self.cpu_pct) {
            return Err(SchemaViolation::CpuOutOfRange(self.cpu_pct));
        }
        for (field, value) in [
            ("memory_used_mb", self.memory_used_mb),
            ("disk_used_gb", self.disk_used_gb),
            ("ethernet_kbps", self.ethernet_kbps),
        ] {
            if value < 0.0 {
                return Err(SchemaViolation::NegativeUsage { field, value });
            }
        }
        Ok(())
    }
}

impl AppTuple {
    pub fn validate(&self) -> Result<(), SchemaViolation> {
        if self.instance_url.is_empty() {
            return Err(SchemaViolation::EmptySource);
        }
        Ok(())
    }
}

impl DataTuple {
    pub fn validate(&self) -> Result<(), SchemaViolation> {
        if self.instance.is_empty() {
            return Err(SchemaViolation::EmptySource);
        }
        Ok(())
    }
}

/// A tuple from any of the three monitor kinds, unified for the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum MonitorRecord {
    Host(HostTuple),
    App(AppTuple),
    Data(DataTuple),
}

impl MonitorRecord {
    pub fn timestamp(&self) -> TimeMs {
        match self {
            MonitorRecord::Host(h) => h.t,
            MonitorRecord::App(a) => a.t,
            MonitorRecord::Data(d) => d.t,
        }
    }

    pub fn source_id(&self) -> &str {
        match self {
            MonitorRecord::Host(h) => &h.host,
            MonitorRecord::App(a) => &a.instance_url,
            MonitorRecord::Data(d) => &d.instance,
        }
    }

    fn kind_rank(&self) -> u8 {
        match self {
            MonitorRecord::Host(_) => 0,
            MonitorRecord::App(_) => 1,
            MonitorRecord::Data(_) => 2,
        }
    }

    pub fn validate(&self) -> Result<(), SchemaViolation> {
        match self {
            MonitorRecord::Host(h) => h.validate(),
            MonitorRecord::App(a) => a.validate(),
            MonitorRecord::Data(d) => d.validate(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EmitError {
    #[error(transparent)]
    Schema(#[from] SchemaViolation),
    #[error("timestamp {t} precedes stream tail {tail}")]
    OutOfOrder { t: TimeMs, tail: TimeMs },
}

/// An append-only, timestamp-ordered stream owned by one monitor.
#[derive(Debug, Clone, Default)]
pub struct TupleStream<T> {
    records: Vec<T>,
}

impl TupleStream<HostTuple> {
    pub fn emit(&mut self, tuple: HostTuple) -> Result<(), EmitError> {
        tuple.validate()?;
        self.check_order(tuple.t)?;
        self.records.push(tuple);
        Ok(())
    }
}

impl TupleStream<AppTuple> {
    pub fn emit(&mut self, tuple: AppTuple) -> Result<(), EmitError> {
        tuple.validate()?;
        self.check_order(tuple.t)?;
        self.records.push(tuple);
        Ok(())
    }
}

impl TupleStream<DataTuple> {
    pub fn emit(&mut self, tuple: DataTuple) -> Result<(), EmitError> {
        tuple.validate()?;
        self.check_order(tuple.t)?;
        self.records.push(tuple);
        Ok(())
    }
}

impl<T> TupleStream<T> {
    pub fn new() -> Self {
        TupleStream { records: Vec::new() }
    }

    pub fn records(&self) -> &[T] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn check_order(&self, t: TimeMs) -> Result<(), EmitError>
    where
        T: Timestamped,
    {
        if let Some(last) = self.records.last() {
            if t < last.timestamp() {
                return Err(EmitError::OutOfOrder {
                    t,
                    tail: last.timestamp(),
                });
            }
        }
        Ok(())
    }
}

pub trait Timestamped {
    fn timestamp(&self) -> TimeMs;
}

impl Timestamped for HostTuple {
    fn timestamp(&self) -> TimeMs {
        self.t
    }
}
impl Timestamped for AppTuple {
    fn timestamp(&self) -> TimeMs {
        self.t
    }
}
impl Timestamped for DataTuple {
    fn timestamp(&self) -> TimeMs {
        self.t
    }
}

fn sort_key(r: &MonitorRecord) -> (TimeMs, String, u8) {
    (r.timestamp(), r.source_id().to_string(), r.kind_rank())
}

/// Merges individually ordered streams into one stream totally ordered by
/// (timestamp, source id, kind). Stable for exact duplicates.
pub fn union(streams: Vec<Vec<MonitorRecord>>) -> Vec<MonitorRecord> {
    let mut merged: Vec<MonitorRecord> = streams.into_iter().flatten().collect();
    merged.sort_by(|a, b| sort_key(a).cmp(&sort_key(b)));
    debug_assert!(is_ordered(&merged));
    merged
}

pub fn is_ordered(records: &[MonitorRecord]) -> bool {
    records.windows(2).all(|w| w[0].timestamp() <= w[1].timestamp())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CleanReport {
    pub dropped_schema: usize,
    pub dropped_late: usize,
}

/// Drops schema-violating tuples and tuples older than `skew_ms` behind the
/// watermark (the max timestamp seen so far in arrival order), then restores
/// timestamp order for stragglers within the skew.
pub fn clean(records: &[MonitorRecord], skew_ms: u64) -> (Vec<MonitorRecord>, CleanReport) {
    let mut out = Vec::with_capacity(records.len());
    let mut report = CleanReport::default();
    let mut watermark: Option<TimeMs> = None;
    for r in records {
        if r.validate().is_err() {
            report.dropped_schema += 1;
            continue;
        }
        let t = r.timestamp();
        if let Some(w) = watermark {
            if t.0 + skew_ms < w.0 {
                report.dropped_late += 1;
                continue;
            }
        }
        watermark = Some(watermark.map_or(t, |w| w.max(t)));
        out.push(r.clone());
    }
    out.sort_by(|a, b| sort_key(a).cmp(&sort_key(b)));
    debug_assert!(is_ordered(&out));
    (out, report)
}

/// An app tuple joined with the latest host sample at or before it.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociatedSample {
    pub app: AppTuple,
    pub host_sample: Option<HostTuple>,
}

/// Pairs each app tuple with the newest host tuple of its instance's host
/// whose timestamp is at most the app timestamp and within `window_ms`.
/// Unpaired tuples are forwarded and counted.
pub fn associate(
    apps: &[AppTuple],
    hosts: &[HostTuple],
    url_to_host: &BTreeMap<String, String>,
    window_ms: u64,
) -> (Vec<AssociatedSample>, usize) {
    let mut unpaired = 0;
    let joined = apps
        .iter()
        .map(|app| {
            let host_id = url_to_host.get(&app.instance_url);
            let host_sample = host_id.and_then(|hid| {
                hosts
                    .iter()
                    .filter(|h| {
                        &h.host == hid
                            && h.t <= app.t
                            && app.t.0 - h.t.0 <= window_ms
                    })
                    .max_by_key(|h| h.t)
                    .cloned()
            });
            if host_sample.is_none() {
                unpaired += 1;
            }
            AssociatedSample {
                app: app.clone(),
                host_sample,
            }
        })
        .collect();
    (joined, unpaired)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpuAggregate {
    pub mean: f64,
    pub max: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyAggregate {
    pub mean_ms: f64,
    pub p95_ms: u64,
    pub count: usize,
}

/// Aggregates of one tumbling window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowAggregate {
    pub window: TimeInterval,
    pub tuple_count: usize,
    pub host_cpu: BTreeMap<String, CpuAggregate>,
    pub service_response: BTreeMap<String, LatencyAggregate>,
    pub data_access: BTreeMap<String, LatencyAggregate>,
}

/// Nearest-rank percentile: the ceil(p*n)-th smallest value.
fn percentile(sorted: &[u64], p: f64) -> u64 {
    debug_assert!(!sorted.is_empty());
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Buckets an ordered stream into tumbling windows of `window_ms` and emits
/// per-host cpu and per-service latency aggregates. Empty windows emit
/// nothing; the total tuple count across windows equals the input length.
pub fn aggregate(records: &[MonitorRecord], window_ms: u64) -> Vec<WindowAggregate> {
    assert!(window_ms > 0, "window must be positive");
    debug_assert!(is_ordered(records));
    let mut windows: BTreeMap<u64, Vec<&MonitorRecord>> = BTreeMap::new();
    for r in records {
        windows.entry(r.timestamp().0 / window_ms).or_default().push(r);
    }
    windows
        .into_iter()
        .map(|(idx, bucket)| {
            let mut host_cpu: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            let mut service_rt: BTreeMap<String, Vec<u64>> = BTreeMap::new();
            let mut data_rt: BTreeMap<String, Vec<u64>> = BTreeMap::new();
            for r in &bucket {
                match r {
                    MonitorRecord::Host(h) => {
                        host_cpu.entry(h.host.clone()).or_default().push(h.cpu_pct)
                    }
                    MonitorRecord::App(a) => service_rt
                        .entry(a.service.clone())
                        .or_default()
                        .push(a.response_time_ms),
                    MonitorRecord::Data(d) => data_rt
                        .entry(d.data_service.clone())
                        .or_default()
                        .push(d.access_time_ms),
                }
            }
            let latency_agg = |mut vals: Vec<u64>| {
                vals.sort_unstable();
                LatencyAggregate {
                    mean_ms: vals.iter().sum::<u64>() as f64 / vals.len() as f64,
                    p95_ms: percentile(&vals, 0.95),
                    count: vals.len(),
                }
            };
            WindowAggregate {
                window: TimeInterval::new(
                    TimeMs(idx * window_ms),
                    TimeMs((idx + 1) * window_ms),
                ),
                tuple_count: bucket.len(),
                host_cpu: host_cpu
                    .into_iter()
                    .map(|(host, vals)| {
                        let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                        (host, CpuAggregate { mean, max, count: vals.len() })
                    })
                    .collect(),
                service_response: service_rt
                    .into_iter()
                    .map(|(s, vals)| (s, latency_agg(vals)))
                    .collect(),
                data_access: data_rt
                    .into_iter()
                    .map(|(s, vals)| (s, latency_agg(vals)))
                    .collect(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Overload,
    Idle,
}

/// A sustained-threshold episode on one source.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdEvent {
    pub kind: EventKind,
    pub source: String,
    pub window: TimeInterval,
    pub metric: &'static str,
    pub threshold_pct: f64,
}

#[derive(Debug, Default)]
struct RunState {
    run_start: Option<TimeMs>,
    fired: bool,
}

/// Streaming detector: fires once per continuous episode in which every
/// sample satisfies the threshold and the run spans the sustain window.
/// Re-arms only after a sample breaks the condition.
#[derive(Debug)]
pub struct ThresholdDetector {
    kind: EventKind,
    threshold_pct: f64,
    sustain_ms: u64,
    state: BTreeMap<String, RunState>,
}

impl ThresholdDetector {
    pub fn overload(threshold_pct: f64, sustain_ms: u64) -> Self {
        ThresholdDetector {
            kind: EventKind::Overload,
            threshold_pct,
            sustain_ms,
            state: BTreeMap::new(),
        }
    }

    pub fn idle(threshold_pct: f64, sustain_ms: u64) -> Self {
        ThresholdDetector {
            kind: EventKind::Idle,
            threshold_pct,
            sustain_ms,
            state: BTreeMap::new(),
        }
    }

    fn satisfied(&self, value: f64) -> bool {
        match self.kind {
            EventKind::Overload => value >= self.threshold_pct,
            EventKind::Idle => value <= self.threshold_pct,
        }
    }

    pub fn observe(&mut self, source: &str, t: TimeMs, value: f64) -> Option<ThresholdEvent> {
        let satisfied = self.satisfied(value);
        let state = self.state.entry(source.to_string()).or_default();
        if !satisfied {
            state.run_start = None;
            state.fired = false;
            return None;
        }
        let start = *state.run_start.get_or_insert(t);
        if !state.fired && t.0.saturating_sub(start.0) >= self.sustain_ms {
            state.fired = true;
            return Some(ThresholdEvent {
                kind: self.kind,
                source: source.to_string(),
                window: TimeInterval::new(TimeMs(t.0 - self.sustain_ms), t),
                metric: "cpu_pct",
                threshold_pct: self.threshold_pct,
            });
        }
        None
    }

    /// Drops per-source state, e.g. when a host is released.
    pub fn forget(&mut self, source: &str) {
        self.state.remove(source);
    }
}

pub fn detect_overload(
    stream: &[HostTuple],
    threshold_pct: f64,
    sustain_ms: u64,
) -> Vec<ThresholdEvent> {
    let mut detector = ThresholdDetector::overload(threshold_pct, sustain_ms);
    stream
        .iter()
        .filter_map(|h| detector.observe(&h.host, h.t, h.cpu_pct))
        .collect()
}

pub fn detect_idle(
    stream: &[HostTuple],
    threshold_pct: f64,
    sustain_ms: u64,
) -> Vec<ThresholdEvent> {
    let mut detector = ThresholdDetector::idle(threshold_pct, sustain_ms);
    stream
        .iter()
        .filter_map(|h| detector.observe(&h.host, h.t, h.cpu_pct))
        .collect()
}

pub const STREAM_DUMP_HEADER: &str = "PAAS-STREAM v1";

/// Serializes records one per line, tab-separated, with a version header.
pub fn dump_stream(records: &[MonitorRecord]) -> String {
    let mut out = String::new();
    out.push_str(STREAM_DUMP_HEADER);
    out.push('\n');
    out.push_str("# HOST\tt_ms\thost\tcpu_pct\tmem_mb\tdisk_gb\teth_kbps\tsockets\n");
    out.push_str("# APP\tt_ms\tservice\tinstance\trt_ms\n");
    out.push_str("# DATA\tt_ms\tservice\tinstance\taccess_ms\n");
    for r in records {
        match r {
            MonitorRecord::Host(h) => out.push_str(&format!(
                "HOST\t{}\t{}\t{:.3}\t{:.1}\t{:.1}\t{:.1}\t{}\n",
                h.t.0, h.host, h.cpu_pct, h.memory_used_mb, h.disk_used_gb, h.ethernet_kbps,
                h.socket_count
            )),
            MonitorRecord::App(a) => out.push_str(&format!(
                "APP\t{}\t{}\t{}\t{}\n",
                a.t.0, a.service, a.instance_url, a.response_time_ms
            )),
            MonitorRecord::Data(d) => out.push_str(&format!(
                "DATA\t{}\t{}\t{}\t{}\n",
                d.t.0, d.data_service, d.instance, d.access_time_ms
            )),
        }
    }
    out
}

#[derive(Debug, Error)]
pub enum StreamParseError {
    #[error("missing or unsupported header (expected {STREAM_DUMP_HEADER})")]
    BadHeader,
    #[error("line {line}: {message}")]
    BadRecord { line: usize, message: String },
}

pub fn parse_stream(text: &str) -> Result<Vec<MonitorRecord>, StreamParseError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == STREAM_DUMP_HEADER => {}
        _ => return Err(StreamParseError::BadHeader),
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let bad = |message: &str| StreamParseError::BadRecord {
            line: line_no,
            message: message.to_string(),
        };
        let parse_t = |s: &str| -> Result<TimeMs, StreamParseError> {
            s.parse::<u64>().map(TimeMs).map_err(|e| bad(&format!("bad timestamp: {e}")))
        };
        match fields.first().copied() {
            Some("HOST") if fields.len() == 8 => records.push(MonitorRecord::Host(HostTuple {
                t: parse_t(fields[1])?,
                host: fields[2].to_string(),
                cpu_pct: fields[3].parse().map_err(|e| bad(&format!("bad cpu: {e}")))?,
                memory_used_mb: fields[4].parse().map_err(|e| bad(&format!("bad mem: {e}")))?,
                disk_used_gb: fields[5].parse().map_err(|e| bad(&format!("bad disk: {e}")))?,
                ethernet_kbps: fields[6].parse().map_err(|e| bad(&format!("bad eth: {e}")))?,
                socket_count: fields[7].parse().map_err(|e| bad(&format!("bad sockets: {e}")))?,
            })),
            Some("APP") if fields.len() == 5 => records.push(MonitorRecord::App(AppTuple {
                t: parse_t(fields[1])?,
                service: fields[2].to_string(),
                instance_url: fields[3].to_string(),
                response_time_ms: fields[4].parse().map_err(|e| bad(&format!("bad rt: {e}")))?,
            })),
            Some("DATA") if fields.len() == 5 => records.push(MonitorRecord::Data(DataTuple {
                t: parse_t(fields[1])?,
                data_service: fields[2].to_string(),
                instance: fields[3].to_string(),
                access_time_ms: fields[4].parse().map_err(|e| bad(&format!("bad access: {e}")))?,
            })),
            Some(kind) => return Err(bad(&format!("unknown record kind or arity: {kind}"))),
            None => continue,
        }
    }
    Ok(records)
}
