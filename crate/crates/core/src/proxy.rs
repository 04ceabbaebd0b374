//! Virtual data connector layer: per-data-service instance clusters with
//! polling distribution, stable proxy assignment, write logging, and the
//! replication protocol that keeps replicas consistent while scaling.
//!
//! During replication the copy source is frozen: with a single instance,
//! writes queue until the copy completes; with several, the source leaves the
//! read rotation and skips incoming writes, and both source and destination
//! are synchronized from the write log afterwards. Reads are never blocked.

use std::collections::BTreeMap;
use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::TimeMs;
use crate::monitor::DataTuple;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProxyId(pub String);

impl fmt::Display for ProxyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A deterministic transform of one record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WriteOp {
    Set(i64),
    Add(i64),
}

impl WriteOp {
    fn apply(&self, current: Option<i64>) -> i64 {
        match self {
            WriteOp::Set(v) => *v,
            WriteOp::Add(d) => current.unwrap_or(0) + d,
        }
    }
}

impl fmt::Display for WriteOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WriteOp::Set(v) => write!(f, "set {v}"),
            WriteOp::Add(d) => write!(f, "add {d}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WriteRequest {
    pub key: String,
    pub op: WriteOp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataOperation {
    Read { key: String },
    Write(WriteRequest),
}

/// Append-only, strictly ordered history of applied writes.
#[derive(Debug, Clone, Default)]
pub struct WriteLog {
    entries: Vec<(u64, WriteRequest)>,
    next_seq: u64,
}

impl WriteLog {
    fn append(&mut self, write: WriteRequest) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.entries.push((seq, write));
        seq
    }

    pub fn entries(&self) -> &[(u64, WriteRequest)] {
        &self.entries
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    fn since(&self, seq: u64) -> impl Iterator<Item = &WriteRequest> {
        self.entries.iter().filter(move |(s, _)| *s >= seq).map(|(_, w)| w)
    }
}

pub type InstanceStore = BTreeMap<String, i64>;

#[derive(Debug, Clone)]
pub struct DataInstance {
    pub id: String,
    pub store: InstanceStore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplicationPhase {
    Copying,
    Syncing,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SessionKind {
    SingleInstance,
    MultiInstance,
}

/// State of one in-flight replication for a cluster.
#[derive(Debug, Clone)]
pub struct ReplicationSession {
    pub data_service: String,
    pub source: String,
    pub destination: String,
    /// Arrival-ordered writes held back while a lone source is being copied.
    pending: Vec<WriteRequest>,
    /// Log position at session start; everything at or after it is replayed
    /// on source and destination when syncing.
    log_start: u64,
    /// Source state captured at session start; what the copy transfers.
    snapshot: InstanceStore,
    kind: SessionKind,
    pub phase: ReplicationPhase,
}

impl ReplicationSession {
    pub fn pending_writes(&self) -> &[WriteRequest] {
        &self.pending
    }

    pub fn snapshot_len(&self) -> usize {
        self.snapshot.len()
    }
}

#[derive(Debug, Default)]
pub struct DataCluster {
    instances: Vec<DataInstance>,
    cursor: usize,
    session: Option<ReplicationSession>,
    log: WriteLog,
    read_counts: BTreeMap<String, u64>,
}

impl DataCluster {
    pub fn instance_ids(&self) -> Vec<String> {
        self.instances.iter().map(|i| i.id.clone()).collect()
    }

    pub fn instance(&self, id: &str) -> Option<&DataInstance> {
        self.instances.iter().find(|i| i.id == id)
    }

    pub fn session(&self) -> Option<&ReplicationSession> {
        self.session.as_ref()
    }

    pub fn log(&self) -> &WriteLog {
        &self.log
    }

    pub fn read_count(&self, id: &str) -> u64 {
        self.read_counts.get(id).copied().unwrap_or(0)
    }

    fn readable(&self, idx: usize) -> bool {
        match &self.session {
            Some(s) if s.kind == SessionKind::MultiInstance => self.instances[idx].id != s.source,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DispatchOutcome {
    Read {
        instance: String,
        value: Option<i64>,
    },
    /// Applied to every receiving instance and logged.
    WriteApplied {
        seq: u64,
        instances: Vec<String>,
    },
    /// Held in the session queue while a lone source is copied.
    WriteQueued {
        queue_len: usize,
    },
}

#[derive(Debug, Clone)]
pub struct SyncReport {
    pub data_service: String,
    pub destination: String,
    /// Writes replayed while syncing (queued or extracted from the log).
    pub replayed: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum ProxyError {
    #[error("proxy layer is empty")]
    EmptyLayer,
    #[error("no data instance for {0}")]
    NoInstance(String),
    #[error("unknown data service {0}")]
    UnknownCluster(String),
    #[error("replication already active for {0}")]
    SessionActive(String),
    #[error("invalid destination instance {0}: blank or already a cluster member")]
    UnknownInstance(String),
    #[error("no replication in the copying phase for {0}")]
    WrongPhase(String),
    #[error("cluster {0} has applied writes; new members must join via replication")]
    RequiresReplication(String),
    #[error("cannot remove the last instance of {0}")]
    LastInstance(String),
}

/// The set of virtual data connectors plus every cluster they serve.
///
/// Desk scale keeps all cluster maps in one structure; ownership is still
/// attributed to a single proxy per data service via stable hashing, and
/// per-proxy monitor streams stay separate.
#[derive(Debug, Default)]
pub struct ProxyLayer {
    proxies: Vec<ProxyId>,
    replication_factor: usize,
    clusters: BTreeMap<String, DataCluster>,
    streams: BTreeMap<ProxyId, Vec<DataTuple>>,
}

fn stable_hash(name: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(name.as_bytes());
    let digest = hasher.finalize();
    u64::from_be_bytes(digest[..8].try_into().expect("sha256 yields 32 bytes"))
}

impl ProxyLayer {
    pub fn new(proxy_count: usize, replication_factor: usize) -> Self {
        ProxyLayer {
            proxies: (0..proxy_count).map(|i| ProxyId(format!("proxy-{i}"))).collect(),
            replication_factor,
            clusters: BTreeMap::new(),
            streams: BTreeMap::new(),
        }
    }

    pub fn proxies(&self) -> &[ProxyId] {
        &self.proxies
    }

    pub fn cluster(&self, data_service: &str) -> Option<&DataCluster> {
        self.clusters.get(data_service)
    }

    pub fn clusters(&self) -> impl Iterator<Item = (&String, &DataCluster)> {
        self.clusters.iter()
    }

    pub fn tuples(&self, proxy: &ProxyId) -> &[DataTuple] {
        self.streams.get(proxy).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Reserves proxies for a software service by stable hashing over the
    /// layer: at least two when the layer allows it.
    pub fn assign_proxy(&self, software_service: &str) -> Result<Vec<ProxyId>, ProxyError> {
        if self.proxies.is_empty() {
            return Err(ProxyError::EmptyLayer);
        }
        let take = self.replication_factor.max(2).min(self.proxies.len());
        let start = (stable_hash(software_service) % self.proxies.len() as u64) as usize;
        Ok((0..take)
            .map(|i| self.proxies[(start + i) % self.proxies.len()].clone())
            .collect())
    }

    /// The single proxy whose cluster map owns a data service.
    pub fn owner_of(&self, data_service: &str) -> Result<ProxyId, ProxyError> {
        if self.proxies.is_empty() {
            return Err(ProxyError::EmptyLayer);
        }
        let idx = (stable_hash(data_service) % self.proxies.len() as u64) as usize;
        Ok(self.proxies[idx].clone())
    }

    /// Adds an instance to a cluster, creating the cluster on first sight.
    /// Once the cluster has applied writes, new members must arrive through
    /// replication so they carry the current state.
    pub fn register_data_instance(
        &mut self,
        data_service: &str,
        instance_id: &str,
    ) -> Result<(), ProxyError> {
        let cluster = self.clusters.entry(data_service.to_string()).or_default();
        if cluster.instances.iter().any(|i| i.id == instance_id) {
            return Ok(()); // duplicate checking, same as the balancer
        }
        if !cluster.instances.is_empty() && cluster.log.next_seq() > 0 {
            return Err(ProxyError::RequiresReplication(data_service.to_string()));
        }
        // mid-rotation joins land after the cursor; the cursor is not reset
        cluster.instances.push(DataInstance {
            id: instance_id.to_string(),
            store: InstanceStore::new(),
        });
        Ok(())
    }

    /// Routes one data operation: reads poll the rotation, writes go to every
    /// receiving instance (session rules permitting) and into the log.
    pub fn dispatch(
        &mut self,
        data_service: &str,
        op: DataOperation,
    ) -> Result<DispatchOutcome, ProxyError> {
        let cluster = self
            .clusters
            .get_mut(data_service)
            .ok_or_else(|| ProxyError::UnknownCluster(data_service.to_string()))?;
        if cluster.instances.is_empty() {
            return Err(ProxyError::NoInstance(data_service.to_string()));
        }
        match op {
            DataOperation::Read { key } => {
                let n = cluster.instances.len();
                let mut chosen = None;
                for step in 0..n {
                    let idx = (cluster.cursor + step) % n;
                    if cluster.readable(idx) {
                        chosen = Some(idx);
                        break;
                    }
                }
                let idx = chosen.ok_or_else(|| ProxyError::NoInstance(data_service.to_string()))?;
                cluster.cursor = (idx + 1) % n;
                let instance = &cluster.instances[idx];
                *cluster.read_counts.entry(instance.id.clone()).or_insert(0) += 1;
                Ok(DispatchOutcome::Read {
                    instance: instance.id.clone(),
                    value: instance.store.get(&key).copied(),
                })
            }
            DataOperation::Write(write) => match &mut cluster.session {
                Some(session) if session.kind == SessionKind::SingleInstance => {
                    session.pending.push(write);
                    Ok(DispatchOutcome::WriteQueued {
                        queue_len: session.pending.len(),
                    })
                }
                Some(session) if session.kind == SessionKind::MultiInstance => {
                    let source = session.source.clone();
                    let seq = cluster.log.append(write.clone());
                    let mut applied = Vec::new();
                    for instance in cluster.instances.iter_mut().filter(|i| i.id != source) {
                        let next = write.op.apply(instance.store.get(&write.key).copied());
                        instance.store.insert(write.key.clone(), next);
                        applied.push(instance.id.clone());
                    }
                    Ok(DispatchOutcome::WriteApplied {
                        seq,
                        instances: applied,
                    })
                }
                _ => {
                    let seq = cluster.log.append(write.clone());
                    let mut applied = Vec::new();
                    for instance in cluster.instances.iter_mut() {
                        let next = write.op.apply(instance.store.get(&write.key).copied());
                        instance.store.insert(write.key.clone(), next);
                        applied.push(instance.id.clone());
                    }
                    Ok(DispatchOutcome::WriteApplied {
                        seq,
                        instances: applied,
                    })
                }
            },
        }
    }

    /// Opens a replication session. The source is the lone instance, or the
    /// one with the lowest read load (ties by id); it is frozen at its
    /// current state, which the copy transfers.
    pub fn begin_replication(
        &mut self,
        data_service: &str,
        new_instance_id: &str,
    ) -> Result<&ReplicationSession, ProxyError> {
        let cluster = self
            .clusters
            .get_mut(data_service)
            .ok_or_else(|| ProxyError::UnknownCluster(data_service.to_string()))?;
        if cluster.session.is_some() {
            return Err(ProxyError::SessionActive(data_service.to_string()));
        }
        if cluster.instances.is_empty() {
            return Err(ProxyError::NoInstance(data_service.to_string()));
        }
        if new_instance_id.is_empty()
            || cluster.instances.iter().any(|i| i.id == new_instance_id)
        {
            return Err(ProxyError::UnknownInstance(new_instance_id.to_string()));
        }
        let (kind, source) = if cluster.instances.len() == 1 {
            (SessionKind::SingleInstance, cluster.instances[0].id.clone())
        } else {
            let source = cluster
                .instances
                .iter()
                .map(|i| (cluster.read_count(&i.id), i.id.clone()))
                .min()
                .expect("non-empty cluster")
                .1;
            (SessionKind::MultiInstance, source)
        };
        let snapshot = cluster
            .instances
            .iter()
            .find(|i| i.id == source)
            .expect("source is a member")
            .store
            .clone();
        cluster.session = Some(ReplicationSession {
            data_service: data_service.to_string(),
            source,
            destination: new_instance_id.to_string(),
            pending: Vec::new(),
            log_start: cluster.log.next_seq(),
            snapshot,
            kind,
            phase: ReplicationPhase::Copying,
        });
        Ok(cluster.session.as_ref().expect("just set"))
    }

    /// Completes the copy: queued or logged writes are replayed in order,
    /// the destination joins the rotation, and the session closes.
    pub fn finish_replication(&mut self, data_service: &str) -> Result<SyncReport, ProxyError> {
        let cluster = self
            .clusters
            .get_mut(data_service)
            .ok_or_else(|| ProxyError::UnknownCluster(data_service.to_string()))?;
        let mut session = match cluster.session.take() {
            Some(s) if s.phase == ReplicationPhase::Copying => s,
            _ => return Err(ProxyError::WrongPhase(data_service.to_string())),
        };
        session.phase = ReplicationPhase::Syncing;
        let mut destination_store = session.snapshot.clone();
        let replayed;
        match session.kind {
            SessionKind::SingleInstance => {
                replayed = session.pending.len();
                let source = cluster
                    .instances
                    .iter_mut()
                    .find(|i| i.id == session.source)
                    .expect("source is a member");
                for write in &session.pending {
                    let next = write.op.apply(source.store.get(&write.key).copied());
                    source.store.insert(write.key.clone(), next);
                    let next = write.op.apply(destination_store.get(&write.key).copied());
                    destination_store.insert(write.key.clone(), next);
                    cluster.log.append(write.clone());
                }
            }
            SessionKind::MultiInstance => {
                let suffix: Vec<WriteRequest> =
                    cluster.log.since(session.log_start).cloned().collect();
                replayed = suffix.len();
                let source = cluster
                    .instances
                    .iter_mut()
                    .find(|i| i.id == session.source)
                    .expect("source is a member");
                for write in &suffix {
                    let next = write.op.apply(source.store.get(&write.key).copied());
                    source.store.insert(write.key.clone(), next);
                    let next = write.op.apply(destination_store.get(&write.key).copied());
                    destination_store.insert(write.key.clone(), next);
                }
            }
        }
        cluster.instances.push(DataInstance {
            id: session.destination.clone(),
            store: destination_store,
        });
        Ok(SyncReport {
            data_service: data_service.to_string(),
            destination: session.destination,
            replayed,
        })
    }

    /// Removes an instance from the rotation. Only legal at a quiescent
    /// point: no active session, and never the last instance.
    pub fn remove_instance(
        &mut self,
        data_service: &str,
        instance_id: &str,
    ) -> Result<(), ProxyError> {
        let cluster = self
            .clusters
            .get_mut(data_service)
            .ok_or_else(|| ProxyError::UnknownCluster(data_service.to_string()))?;
        if cluster.session.is_some() {
            return Err(ProxyError::SessionActive(data_service.to_string()));
        }
        let idx = cluster
            .instances
            .iter()
            .position(|i| i.id == instance_id)
            .ok_or_else(|| ProxyError::NoInstance(instance_id.to_string()))?;
        if cluster.instances.len() == 1 {
            return Err(ProxyError::LastInstance(data_service.to_string()));
        }
        cluster.instances.remove(idx);
        if cluster.cursor > idx || cluster.cursor >= cluster.instances.len() {
            cluster.cursor = cluster
                .cursor
                .saturating_sub(1)
                .min(cluster.instances.len().saturating_sub(1));
        }
        Ok(())
    }

    /// Appends one access record to the owning proxy's monitor stream.
    pub fn record_access(
        &mut self,
        proxy: &ProxyId,
        data_service: &str,
        instance: &str,
        access_time_ms: u64,
        now: TimeMs,
    ) -> DataTuple {
        let tuple = DataTuple {
            t: now,
            data_service: data_service.to_string(),
            instance: instance.to_string(),
            access_time_ms,
        };
        self.streams.entry(proxy.clone()).or_default().push(tuple.clone());
        tuple
    }

    /// True when the cluster has no in-flight replication.
    pub fn quiescent(&self, data_service: &str) -> bool {
        self.clusters
            .get(data_service)
            .map(|c| c.session.is_none())
            .unwrap_or(true)
    }

    /// All (data service, instance) pairs currently in rotation.
    pub fn mapping_pairs(&self) -> Vec<(String, String)> {
        self.clusters
            .iter()
            .flat_map(|(s, c)| c.instances.iter().map(move |i| (s.clone(), i.id.clone())))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer_with_cluster(instances: &[&str]) -> ProxyLayer {
        let mut layer = ProxyLayer::new(4, 2);
        for id in instances {
            layer.register_data_instance("db", id).unwrap();
        }
        layer
    }

    fn write(key: &str, op: WriteOp) -> DataOperation {
        DataOperation::Write(WriteRequest {
            key: key.to_string(),
            op,
        })
    }

    fn read(key: &str) -> DataOperation {
        DataOperation::Read {
            key: key.to_string(),
        }
    }

    #[test]
    fn assign_proxy_is_deterministic_and_pairwise() {
        let layer = ProxyLayer::new(4, 2);
        let a = layer.assign_proxy("orders").unwrap();
        let b = layer.assign_proxy("orders").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);

        // oracle: recompute the hashed start independently
        let mut hasher = Sha256::new();
        hasher.update(b"orders");
        let digest = hasher.finalize();
        let start = (u64::from_be_bytes(digest[..8].try_into().unwrap()) % 4) as usize;
        let expect: Vec<ProxyId> = (0..2)
            .map(|i| ProxyId(format!("proxy-{}", (start + i) % 4)))
            .collect();
        assert_eq!(a, expect);
    }

    #[test]
    fn assign_proxy_singleton_layer() {
        let layer = ProxyLayer::new(1, 2);
        assert_eq!(layer.assign_proxy("s").unwrap(), vec![ProxyId("proxy-0".into())]);
        let empty = ProxyLayer::new(0, 2);
        assert_eq!(empty.assign_proxy("s").unwrap_err(), ProxyError::EmptyLayer);
    }

    #[test]
    fn reads_poll_round_robin() {
        let mut layer = layer_with_cluster(&["B1", "B2", "B3"]);
        let mut served = Vec::new();
        for _ in 0..6 {
            match layer.dispatch("db", read("k")).unwrap() {
                DispatchOutcome::Read { instance, .. } => served.push(instance),
                other => panic!("unexpected {other:?}"),
            }
        }
        assert_eq!(served, ["B1", "B2", "B3", "B1", "B2", "B3"]);
    }

    #[test]
    fn round_robin_share_bounds() {
        let mut layer = layer_with_cluster(&["B1", "B2", "B3"]);
        for _ in 0..100 {
            layer.dispatch("db", read("k")).unwrap();
        }
        let cluster = layer.cluster("db").unwrap();
        for id in ["B1", "B2", "B3"] {
            let count = cluster.read_count(id);
            assert!((33..=34).contains(&count), "{id} served {count}");
        }
    }

    #[test]
    fn writes_hit_every_instance_and_log() {
        let mut layer = layer_with_cluster(&["B1", "B2"]);
        match layer.dispatch("db", write("x", WriteOp::Set(7))).unwrap() {
            DispatchOutcome::WriteApplied { instances, seq } => {
                assert_eq!(instances, ["B1", "B2"]);
                assert_eq!(seq, 0);
            }
            other => panic!("unexpected {other:?}"),
        }
        let cluster = layer.cluster("db").unwrap();
        assert_eq!(cluster.instance("B1").unwrap().store["x"], 7);
        assert_eq!(cluster.instance("B2").unwrap().store["x"], 7);
        assert_eq!(cluster.log().entries().len(), 1);
    }

    #[test]
    fn empty_cluster_is_no_instance() {
        let mut layer = ProxyLayer::new(2, 2);
        assert!(matches!(
            layer.dispatch("db", read("k")),
            Err(ProxyError::UnknownCluster(_))
        ));
        layer.clusters.insert("db".into(), DataCluster::default());
        assert_eq!(
            layer.dispatch("db", read("k")).unwrap_err(),
            ProxyError::NoInstance("db".into())
        );
    }

    #[test]
    fn single_instance_replication_queues_writes_and_serves_reads() {
        let mut layer = layer_with_cluster(&["B"]);
        layer.dispatch("db", write("x", WriteOp::Set(5))).unwrap();
        layer.begin_replication("db", "B-new").unwrap();

        // reads still satisfied, returning the pre-queued-write state
        match layer.dispatch("db", read("x")).unwrap() {
            DispatchOutcome::Read { instance, value } => {
                assert_eq!(instance, "B");
                assert_eq!(value, Some(5));
            }
            other => panic!("unexpected {other:?}"),
        }

        assert_eq!(
            layer.dispatch("db", write("x", WriteOp::Add(1))).unwrap(),
            DispatchOutcome::WriteQueued { queue_len: 1 }
        );
        assert_eq!(
            layer.dispatch("db", write("x", WriteOp::Add(2))).unwrap(),
            DispatchOutcome::WriteQueued { queue_len: 2 }
        );
        // reads still see 5 while the copy runs
        match layer.dispatch("db", read("x")).unwrap() {
            DispatchOutcome::Read { value, .. } => assert_eq!(value, Some(5)),
            other => panic!("unexpected {other:?}"),
        }

        let report = layer.finish_replication("db").unwrap();
        assert_eq!(report.replayed, 2);
        let cluster = layer.cluster("db").unwrap();
        assert_eq!(cluster.instance("B").unwrap().store["x"], 8);
        assert_eq!(cluster.instance("B-new").unwrap().store["x"], 8);
        assert!(layer.quiescent("db"));
    }

    #[test]
    fn pure_copy_without_writes() {
        let mut layer = layer_with_cluster(&["B"]);
        layer.dispatch("db", write("a", WriteOp::Set(1))).unwrap();
        layer.dispatch("db", write("b", WriteOp::Set(2))).unwrap();
        layer.begin_replication("db", "B2").unwrap();
        layer.finish_replication("db").unwrap();
        let cluster = layer.cluster("db").unwrap();
        assert_eq!(
            cluster.instance("B").unwrap().store,
            cluster.instance("B2").unwrap().store
        );
    }

    #[test]
    fn multi_instance_replication_syncs_source_and_destination_from_log() {
        let mut layer = layer_with_cluster(&["B1", "B2"]);
        // give B1 a higher read load so B2 becomes the copy source
        layer.dispatch("db", read("k")).unwrap(); // B1
        layer.dispatch("db", read("k")).unwrap(); // B2
        layer.dispatch("db", read("k")).unwrap(); // B1
        let session = layer.begin_replication("db", "B3").unwrap();
        assert_eq!(session.source, "B2");

        // writes keep flowing to the others and into the log
        for (i, delta) in [3, 4, 5].iter().enumerate() {
            match layer.dispatch("db", write("x", WriteOp::Add(*delta))).unwrap() {
                DispatchOutcome::WriteApplied { instances, .. } => {
                    assert_eq!(instances, ["B1"], "write {i}");
                }
                other => panic!("unexpected {other:?}"),
            }
        }
        // the frozen source no longer serves reads
        for _ in 0..3 {
            match layer.dispatch("db", read("x")).unwrap() {
                DispatchOutcome::Read { instance, .. } => assert_eq!(instance, "B1"),
                other => panic!("unexpected {other:?}"),
            }
        }

        let report = layer.finish_replication("db").unwrap();
        assert_eq!(report.replayed, 3);
        let cluster = layer.cluster("db").unwrap();
        for id in ["B1", "B2", "B3"] {
            assert_eq!(cluster.instance(id).unwrap().store["x"], 12, "{id}");
        }
        assert_eq!(cluster.instance_ids(), ["B1", "B2", "B3"]);
    }

    #[test]
    fn second_begin_is_session_active() {
        let mut layer = layer_with_cluster(&["B"]);
        layer.begin_replication("db", "B2").unwrap();
        assert_eq!(
            layer.begin_replication("db", "B3").unwrap_err(),
            ProxyError::SessionActive("db".into())
        );
    }

    #[test]
    fn finish_without_session_is_wrong_phase() {
        let mut layer = layer_with_cluster(&["B"]);
        assert_eq!(
            layer.finish_replication("db").unwrap_err(),
            ProxyError::WrongPhase("db".into())
        );
    }

    #[test]
    fn destination_must_be_new() {
        let mut layer = layer_with_cluster(&["B1", "B2"]);
        assert_eq!(
            layer.begin_replication("db", "B2").unwrap_err(),
            ProxyError::UnknownInstance("B2".into())
        );
    }

    #[test]
    fn stale_direct_join_rejected() {
        let mut layer = layer_with_cluster(&["B1"]);
        layer.dispatch("db", write("x", WriteOp::Set(1))).unwrap();
        assert_eq!(
            layer.register_data_instance("db", "B2").unwrap_err(),
            ProxyError::RequiresReplication("db".into())
        );
        // registering the same instance again stays idempotent
        layer.register_data_instance("db", "B1").unwrap();
    }

    #[test]
    fn remove_requires_quiescence_and_spares_last() {
        let mut layer = layer_with_cluster(&["B1", "B2"]);
        layer.begin_replication("db", "B3").unwrap();
        assert_eq!(
            layer.remove_instance("db", "B1").unwrap_err(),
            ProxyError::SessionActive("db".into())
        );
        layer.finish_replication("db").unwrap();
        layer.remove_instance("db", "B1").unwrap();
        layer.remove_instance("db", "B3").unwrap();
        assert_eq!(
            layer.remove_instance("db", "B2").unwrap_err(),
            ProxyError::LastInstance("db".into())
        );
    }

    #[test]
    fn record_access_appends_to_owner_stream() {
        let mut layer = layer_with_cluster(&["B1"]);
        let owner = layer.owner_of("db").unwrap();
        for i in 0..100u64 {
            layer.record_access(&owner, "db", "B1", 12, TimeMs(i * 10));
        }
        let tuples = layer.tuples(&owner);
        assert_eq!(tuples.len(), 100);
        assert!(tuples.windows(2).all(|w| w[0].t <= w[1].t));
        assert_eq!(tuples[0].access_time_ms, 12);
    }

    /// Sequential single-copy oracle: the full write history applied in log
    /// order to an empty store.
    fn oracle_state(writes: &[WriteRequest]) -> InstanceStore {
        let mut store = InstanceStore::new();
        for w in writes {
            let next = w.op.apply(store.get(&w.key).copied());
            store.insert(w.key.clone(), next);
        }
        store
    }

    #[test]
    fn randomized_interleaving_matches_sequential_oracle() {
        use rand::{Rng, SeedableRng};
        for seed in 0..40u64 {
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let start_instances = 1 + (seed as usize % 3);
            let names: Vec<String> = (0..start_instances).map(|i| format!("B{i}")).collect();
            let mut layer = ProxyLayer::new(3, 2);
            for n in &names {
                layer.register_data_instance("db", n).unwrap();
            }
            let total_ops = 400;
            let begin_at = rng.random_range(0..total_ops);
            let finish_at = rng.random_range(begin_at..=total_ops);
            let mut session_open = false;
            for step in 0..=total_ops {
                if step == begin_at {
                    layer.begin_replication("db", "B-new").unwrap();
                    session_open = true;
                }
                if step == finish_at && session_open {
                    layer.finish_replication("db").unwrap();
                    session_open = false;
                }
                if step == total_ops {
                    break;
                }
                let key = format!("k{}", rng.random_range(0..8));
                if rng.random_bool(0.5) {
                    let outcome = layer.dispatch("db", read(&key)).unwrap();
                    assert!(matches!(outcome, DispatchOutcome::Read { .. }));
                } else {
                    let op = if rng.random_bool(0.3) {
                        WriteOp::Set(rng.random_range(-50..50))
                    } else {
                        WriteOp::Add(rng.random_range(-5..5))
                    };
                    layer
                        .dispatch("db", write(&key, op))
                        .unwrap();
                }
            }
            if session_open {
                layer.finish_replication("db").unwrap();
            }
            let cluster = layer.cluster("db").unwrap();
            let history: Vec<WriteRequest> =
                cluster.log().entries().iter().map(|(_, w)| w.clone()).collect();
            let expect = oracle_state(&history);
            for instance in &cluster.instances {
                assert_eq!(instance.store, expect, "seed {seed} instance {}", instance.id);
            }
        }
    }
}
