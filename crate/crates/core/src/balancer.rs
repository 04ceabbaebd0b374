//! Software-service access point: identifier to URL-list mapping with
//! duplicate checking, least-outstanding routing, and drain-aware removal.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UrlEntry {
    pub url: String,
    pub outstanding: u32,
    pub draining: bool,
    /// Requests ever routed to this URL; used by scale-down victim choice.
    pub total_routed: u64,
}

#[derive(Debug, Default)]
struct ServiceEntry {
    urls: Vec<UrlEntry>,
    /// Rotation cursor for breaking least-outstanding ties round-robin.
    cursor: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegisterOutcome {
    /// First URL for a fresh identifier: a new link list was opened.
    NewList,
    Appended,
    /// Duplicate checking found the URL already present.
    Duplicate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeregisterOutcome {
    /// No requests outstanding; removed immediately.
    Removed,
    /// Requests still in flight; entry drains and is removed when the
    /// counter reaches zero.
    Draining { outstanding: u32 },
}

/// Result of a completion event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionOutcome {
    /// Set when this completion drained the last in-flight request of a
    /// draining entry, which is then removed.
    pub drained: Option<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum RouteError {
    /// Empty or fully-draining list; the caller should surface this as an
    /// SLA risk.
    #[error("no serving instance for {0}")]
    NoInstance(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum BalancerError {
    #[error("unknown url {url} for service {service}")]
    UnknownUrl { service: String, url: String },
    #[error("unknown service {0}")]
    UnknownService(String),
}

/// One routing decision, for traces.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteDecision {
    pub service: String,
    pub chosen: String,
    /// (url, outstanding) snapshot after the decision.
    pub snapshot: Vec<(String, u32)>,
}

#[derive(Debug, Default)]
pub struct LoadBalancer {
    services: BTreeMap<String, ServiceEntry>,
}

impl LoadBalancer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a (service, URL) pair. Idempotent: duplicates leave the
    /// list untouched.
    pub fn register(&mut self, service: &str, url: &str) -> RegisterOutcome {
        let entry = match self.services.get_mut(service) {
            Some(e) => e,
            None => {
                self.services.insert(
                    service.to_string(),
                    ServiceEntry {
                        urls: vec![UrlEntry {
                            url: url.to_string(),
                            outstanding: 0,
                            draining: false,
                            total_routed: 0,
                        }],
                        cursor: 0,
                    },
                );
                return RegisterOutcome::NewList;
            }
        };
        if entry.urls.iter().any(|u| u.url == url) {
            return RegisterOutcome::Duplicate;
        }
        entry.urls.push(UrlEntry {
            url: url.to_string(),
            outstanding: 0,
            draining: false,
            total_routed: 0,
        });
        RegisterOutcome::Appended
    }

    /// Picks the serving URL with the fewest outstanding requests, breaking
    /// ties round-robin from the rotation cursor, and increments its counter.
    pub fn route(&mut self, service: &str) -> Result<RouteDecision, RouteError> {
        let entry = self
            .services
            .get_mut(service)
            .ok_or_else(|| RouteError::NoInstance(service.to_string()))?;
        let n = entry.urls.len();
        if n == 0 {
            return Err(RouteError::NoInstance(service.to_string()));
        }
        let min_outstanding = entry
            .urls
            .iter()
            .filter(|u| !u.draining)
            .map(|u| u.outstanding)
            .min()
            .ok_or_else(|| RouteError::NoInstance(service.to_string()))?;
        // first tied entry at or after the cursor, wrapping
        let mut chosen_idx = None;
        for step in 0..n {
            let idx = (entry.cursor + step) % n;
            let candidate = &entry.urls[idx];
            if !candidate.draining && candidate.outstanding == min_outstanding {
                chosen_idx = Some(idx);
                break;
            }
        }
        let idx = chosen_idx.expect("a serving entry with min outstanding exists");
        entry.urls[idx].outstanding += 1;
        entry.urls[idx].total_routed += 1;
        entry.cursor = (idx + 1) % n;
        Ok(RouteDecision {
            service: service.to_string(),
            chosen: entry.urls[idx].url.clone(),
            snapshot: entry
                .urls
                .iter()
                .map(|u| (u.url.clone(), u.outstanding))
                .collect(),
        })
    }

    /// Records a request completion; removes the entry if it was draining
    /// and this was its last in-flight request.
    pub fn complete(&mut self, service: &str, url: &str) -> Result<CompletionOutcome, BalancerError> {
        let entry = self
            .services
            .get_mut(service)
            .ok_or_else(|| BalancerError::UnknownService(service.to_string()))?;
        let idx = entry
            .urls
            .iter()
            .position(|u| u.url == url)
            .ok_or_else(|| BalancerError::UnknownUrl {
                service: service.to_string(),
                url: url.to_string(),
            })?;
        let u = &mut entry.urls[idx];
        debug_assert!(u.outstanding > 0, "completion without outstanding request");
        u.outstanding = u.outstanding.saturating_sub(1);
        if u.draining && u.outstanding == 0 {
            let removed = entry.urls.remove(idx).url;
            if entry.cursor > idx || entry.cursor >= entry.urls.len() {
                entry.cursor = entry.cursor.saturating_sub(1).min(entry.urls.len().saturating_sub(1));
            }
            return Ok(CompletionOutcome {
                drained: Some(removed),
            });
        }
        Ok(CompletionOutcome { drained: None })
    }

    /// Starts removing a URL. Removal completes immediately when idle,
    /// otherwise the entry drains first.
    pub fn deregister(&mut self, service: &str, url: &str) -> Result<DeregisterOutcome, BalancerError> {
        let entry = self
            .services
            .get_mut(service)
            .ok_or_else(|| BalancerError::UnknownService(service.to_string()))?;
        let idx = entry
            .urls
            .iter()
            .position(|u| u.url == url)
            .ok_or_else(|| BalancerError::UnknownUrl {
                service: service.to_string(),
                url: url.to_string(),
            })?;
        if entry.urls[idx].outstanding == 0 {
            entry.urls.remove(idx);
            if entry.cursor > idx || entry.cursor >= entry.urls.len() {
                entry.cursor = entry.cursor.saturating_sub(1).min(entry.urls.len().saturating_sub(1));
            }
            Ok(DeregisterOutcome::Removed)
        } else {
            entry.urls[idx].draining = true;
            Ok(DeregisterOutcome::Draining {
                outstanding: entry.urls[idx].outstanding,
            })
        }
    }

    pub fn urls(&self, service: &str) -> Vec<String> {
        self.services
            .get(service)
            .map(|e| e.urls.iter().map(|u| u.url.clone()).collect())
            .unwrap_or_default()
    }

    pub fn serving_urls(&self, service: &str) -> Vec<String> {
        self.services
            .get(service)
            .map(|e| {
                e.urls
                    .iter()
                    .filter(|u| !u.draining)
                    .map(|u| u.url.clone())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn entries(&self, service: &str) -> Vec<UrlEntry> {
        self.services
            .get(service)
            .map(|e| e.urls.clone())
            .unwrap_or_default()
    }

    pub fn services(&self) -> impl Iterator<Item = &String> {
        self.services.keys()
    }

    /// All (service, url) pairs currently held, draining included.
    pub fn mapping_pairs(&self) -> Vec<(String, String)> {
        self.services
            .iter()
            .flat_map(|(s, e)| e.urls.iter().map(move |u| (s.clone(), u.url.clone())))
            .collect()
    }

    pub fn total_outstanding(&self) -> u64 {
        self.services
            .values()
            .flat_map(|e| e.urls.iter())
            .map(|u| u.outstanding as u64)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_checking() {
        let mut lb = LoadBalancer::new();
        assert_eq!(lb.register("s", "u1"), RegisterOutcome::NewList);
        assert_eq!(lb.register("s", "u1"), RegisterOutcome::Duplicate);
        assert_eq!(lb.urls("s"), vec!["u1"]);
    }

    #[test]
    fn register_appends_in_first_insertion_order() {
        let mut lb = LoadBalancer::new();
        lb.register("s", "u1");
        lb.register("s", "u2");
        lb.register("s", "u1");
        assert_eq!(lb.urls("s"), vec!["u1", "u2"]);
        assert_eq!(lb.register("t", "u3"), RegisterOutcome::NewList);
        assert_eq!(lb.urls("t"), vec!["u3"]);
    }

    #[test]
    fn route_prefers_fewest_outstanding() {
        let mut lb = LoadBalancer::new();
        lb.register("s", "u1");
        lb.register("s", "u2");
        assert_eq!(lb.route("s").unwrap().chosen, "u1");
        assert_eq!(lb.route("s").unwrap().chosen, "u2");
        assert_eq!(lb.route("s").unwrap().chosen, "u1");
        // u1 now has 2 outstanding, u2 has 1
        assert_eq!(lb.route("s").unwrap().chosen, "u2");
    }

    #[test]
    fn equal_counters_round_robin() {
        let mut lb = LoadBalancer::new();
        for u in ["u1", "u2", "u3"] {
            lb.register("s", u);
        }
        let mut counts = std::collections::BTreeMap::new();
        for _ in 0..6 {
            let decision = lb.route("s").unwrap();
            *counts.entry(decision.chosen.clone()).or_insert(0) += 1;
            lb.complete("s", &decision.chosen).unwrap();
        }
        assert!(counts.values().all(|c| *c == 2), "counts {counts:?}");
    }

    #[test]
    fn empty_list_is_no_instance() {
        let mut lb = LoadBalancer::new();
        assert_eq!(
            lb.route("ghost").unwrap_err(),
            RouteError::NoInstance("ghost".into())
        );
        lb.register("s", "u1");
        lb.deregister("s", "u1").unwrap();
        assert!(lb.route("s").is_err());
    }

    #[test]
    fn deregister_idle_removes_immediately() {
        let mut lb = LoadBalancer::new();
        lb.register("s", "u1");
        lb.register("s", "u2");
        assert_eq!(lb.deregister("s", "u2").unwrap(), DeregisterOutcome::Removed);
        assert_eq!(lb.urls("s"), vec!["u1"]);
    }

    #[test]
    fn deregister_busy_drains_then_removes() {
        let mut lb = LoadBalancer::new();
        lb.register("s", "u1");
        lb.register("s", "u2");
        // two in-flight on u1, directed explicitly
        let mut routed = Vec::new();
        for _ in 0..4 {
            routed.push(lb.route("s").unwrap().chosen);
        }
        let busy = "u1";
        assert_eq!(
            lb.deregister("s", busy).unwrap(),
            DeregisterOutcome::Draining { outstanding: 2 }
        );
        // draining entry receives no further requests
        for _ in 0..3 {
            assert_eq!(lb.route("s").unwrap().chosen, "u2");
        }
        assert_eq!(lb.complete("s", busy).unwrap().drained, None);
        assert_eq!(lb.complete("s", busy).unwrap().drained, Some(busy.to_string()));
        assert_eq!(lb.urls("s"), vec!["u2"]);
    }

    #[test]
    fn deregister_unknown_url() {
        let mut lb = LoadBalancer::new();
        lb.register("s", "u1");
        assert!(matches!(
            lb.deregister("s", "u9"),
            Err(BalancerError::UnknownUrl { .. })
        ));
    }

    #[test]
    fn fairness_under_equal_load() {
        let mut lb = LoadBalancer::new();
        for u in ["a", "b", "c"] {
            lb.register("s", u);
        }
        let mut counts: std::collections::BTreeMap<String, u32> = Default::default();
        // requests complete immediately: counters always equal at route time
        for _ in 0..999 {
            let d = lb.route("s").unwrap();
            *counts.entry(d.chosen.clone()).or_insert(0) += 1;
            lb.complete("s", &d.chosen).unwrap();
        }
        let max = counts.values().max().unwrap();
        let min = counts.values().min().unwrap();
        assert!(max - min <= 1, "unfair: {counts:?}");
    }

    proptest::proptest! {
        /// Any register sequence yields exactly the distinct URLs in first
        /// insertion order.
        #[test]
        fn idempotent_registration(seq in proptest::collection::vec(0usize..6, 1..60)) {
            let mut lb = LoadBalancer::new();
            let mut expected: Vec<String> = Vec::new();
            for i in seq {
                let url = format!("u{i}");
                lb.register("s", &url);
                if !expected.contains(&url) {
                    expected.push(url);
                }
            }
            proptest::prop_assert_eq!(lb.urls("s"), expected);
        }
    }
}
