//! Per-run metrics summary: throughput, latency percentiles, SLA
//! violations, and scaling activity, rendered as a plain-text table.

use std::collections::BTreeMap;

use crate::model::TimeMs;

/// Completed-request record for one service.
#[derive(Debug, Clone, Default)]
pub struct ServiceMetrics {
    pub completed: u64,
    pub throughput_per_s: f64,
    pub p50_ms: u64,
    pub p95_ms: u64,
    /// Responses slower than the service's committed performance ceiling.
    pub sla_violations: u64,
    pub sla_hi_ms: u64,
}

#[derive(Debug, Clone, Default)]
pub struct Metrics {
    pub duration_s: f64,
    pub arrivals: u64,
    pub completions: u64,
    pub rejected: u64,
    pub in_flight_at_end: u64,
    pub scale_ups: u64,
    pub scale_downs: u64,
    pub per_service: BTreeMap<String, ServiceMetrics>,
}

fn percentile(sorted: &[u64], p: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

impl Metrics {
    pub fn assemble(
        duration_s: f64,
        arrivals: u64,
        completions: u64,
        rejected: u64,
        scale_ups: u64,
        scale_downs: u64,
        response_times: &BTreeMap<String, Vec<(TimeMs, u64)>>,
        sla_hi: &BTreeMap<String, u64>,
    ) -> Metrics {
        let mut per_service = BTreeMap::new();
        for (service, samples) in response_times {
            let mut values: Vec<u64> = samples.iter().map(|(_, ms)| *ms).collect();
            values.sort_unstable();
            let hi = sla_hi.get(service).copied().unwrap_or(u64::MAX);
            per_service.insert(
                service.clone(),
                ServiceMetrics {
                    completed: values.len() as u64,
                    throughput_per_s: values.len() as f64 / duration_s,
                    p50_ms: percentile(&values, 0.50),
                    p95_ms: percentile(&values, 0.95),
                    sla_violations: values.iter().filter(|v| **v > hi).count() as u64,
                    sla_hi_ms: hi,
                },
            );
        }
        Metrics {
            duration_s,
            arrivals,
            completions,
            rejected,
            in_flight_at_end: arrivals - completions - rejected,
            scale_ups,
            scale_downs,
            per_service,
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "run: {:.1}s  arrivals={} completions={} rejected={} in-flight={} scale-ups={} scale-downs={}\n",
            self.duration_s,
            self.arrivals,
            self.completions,
            self.rejected,
            self.in_flight_at_end,
            self.scale_ups,
            self.scale_downs
        ));
        out.push_str(&format!(
            "{:<24} {:>10} {:>12} {:>9} {:>9} {:>10}\n",
            "service", "completed", "throughput/s", "p50(ms)", "p95(ms)", "sla-viol"
        ));
        for (service, m) in &self.per_service {
            out.push_str(&format!(
                "{:<24} {:>10} {:>12.3} {:>9} {:>9} {:>10}\n",
                service, m.completed, m.throughput_per_s, m.p50_ms, m.p95_ms, m.sla_violations
            ));
        }
        out
    }
}
