//! End-to-end engine behavior: request flow, conservation, determinism,
//! utilization consistency, and closed-loop scaling.

use paas_core::model::TimeMs;
use paas_core::sim::{replay_trace, run_scenario_text};

const MINIMAL: &str = r#"
name = "minimal"

[sim]
seed = 21
duration_s = 120.0
network_latency_ms = 1

[autoscaler]
enabled = false

[[offers]]
offer_id = "app-small"
cpu_ghz = 2.0
cpu_cores = 1
memory_gb = 1.0
disk_gb = 40.0
stock = 4
price_per_hour = 0.5
preinstalled = ["service-container"]

[[offers]]
offer_id = "db-small"
cpu_ghz = 2.0
cpu_cores = 1
memory_gb = 2.0
disk_gb = 80.0
db = "MySQL5.01"
stock = 4
price_per_hour = 0.6
preinstalled = ["database"]

[[components]]
name = "orders"
kind = "software"
input_schema = "OrderRow"
output_schema = "OrderReport"

[[components]]
name = "orders-db"
kind = "data"
input_schema = "OrderQuery"
output_schema = "OrderRow"

[[publish]]
component = "orders"
template = { cpu_ghz = 2.0, cpu_cores = 1, memory_gb = 1.0, disk_gb = 40.0 }

[[publish]]
component = "orders-db"
template = { cpu_ghz = 2.0, cpu_cores = 1, memory_gb = 2.0, disk_gb = 80.0, db = "MySQL5.01" }

[[bind]]
software = "orders"
data = "orders-db"

[workload]
arrivals = "deterministic"
service = "orders"
rate_per_s = 1.0
end_s = 10.0
software_demand_units = 0.2
software_demand_rate = 0.2
data_demand_units = 0.02
data_demand_rate = 0.1
"#;

#[test]
fn minimal_scenario_runs_ten_requests_through_four_hops() {
    let output = run_scenario_text(MINIMAL).unwrap();
    assert_eq!(output.metrics.arrivals, 10);
    assert_eq!(output.metrics.completions, 10);
    assert_eq!(output.metrics.rejected, 0);
    assert_eq!(output.records.len(), 10);
    for record in &output.records {
        assert!(!record.rejected);
        // request-flow order: balancer, software, proxy, data, response
        let lb = record.arrival;
        let sw_start = record.software_start.expect("software stage");
        let sw_done = record.software_done.expect("software done");
        let dispatch = record.data_dispatch.expect("data dispatched");
        let data_done = record.data_done.expect("data done");
        let completion = record.completion.expect("completed");
        assert!(record.lb_url.is_some());
        assert!(record.data_proxy.is_some());
        assert!(record.data_instance.is_some());
        assert!(lb <= sw_start && sw_start < sw_done);
        assert!(sw_done <= dispatch && dispatch < data_done);
        assert!(data_done <= completion);
    }
}

#[test]
fn zero_arrival_scenario_has_setup_only() {
    let text = MINIMAL.replace("arrivals = \"deterministic\"", "arrivals = \"none\"");
    let output = run_scenario_text(&text).unwrap();
    assert_eq!(output.metrics.arrivals, 0);
    assert!(output.overload_events.is_empty());
    assert!(output.records.is_empty());
    assert!(output.trace.contains("PUBLISH"));
    assert!(output.trace.contains("COMPOSE"));
}

#[test]
fn trace_is_deterministic_and_replayable() {
    let a = run_scenario_text(MINIMAL).unwrap();
    let b = run_scenario_text(MINIMAL).unwrap();
    assert_eq!(a.trace, b.trace);
    // the merged-and-cleaned stream dump is byte-stable too
    assert_eq!(a.stream_dump, b.stream_dump);

    let report = replay_trace(&a.trace).unwrap();
    assert!(report.identical(), "diffs: {:?}", report.diffs);
    assert!(report.code_version_warning.is_none());
}

#[test]
fn replay_warns_on_foreign_code_version() {
    let output = run_scenario_text(MINIMAL).unwrap();
    let foreign = output
        .trace
        .replacen("CODE paas-core/", "CODE paas-core-older/", 1);
    let report = replay_trace(&foreign).unwrap();
    assert!(report.code_version_warning.is_some());
    // events still match; only the header differs
    assert!(report.identical());
}

#[test]
fn tampered_trace_is_caught() {
    let output = run_scenario_text(MINIMAL).unwrap();
    // flip a timestamp on the first ROUTE line
    let tampered = output.trace.replacen("EVT 1000", "EVT 1001", 1);
    if tampered == output.trace {
        panic!("expected an EVT 1000 line to tamper with");
    }
    let report = replay_trace(&tampered).unwrap();
    assert!(!report.identical());
    assert!(!report.diffs.is_empty());
}

#[test]
fn utilization_in_host_tuples_matches_rate_model() {
    let output = run_scenario_text(MINIMAL).unwrap();
    // one request at a time: software host alternates 0% and rate/capacity
    let stream = output
        .host_streams
        .values()
        .next()
        .expect("host stream exists");
    assert!(!stream.is_empty());
    for tuple in stream {
        let cpu = tuple.cpu_pct;
        let expected_levels = [0.0, 10.0]; // 0.2 rate over 2.0 capacity
        assert!(
            expected_levels.iter().any(|l| (cpu - l).abs() < 1e-9),
            "unexpected cpu {cpu}"
        );
    }
}

#[test]
fn littles_law_holds_in_steady_state() {
    // λ = 4/s, uncongested solo time 1.5s (demand 0.3 at rate 0.2)
    let text = MINIMAL
        .replace("rate_per_s = 1.0", "rate_per_s = 4.0")
        .replace("end_s = 10.0", "end_s = 110.0")
        .replace("software_demand_units = 0.2", "software_demand_units = 0.3")
        .replace("duration_s = 120.0", "duration_s = 140.0");
    let output = run_scenario_text(&text).unwrap();
    // stationary window [20s, 110s]
    let window = (TimeMs::from_secs(20.0), TimeMs::from_secs(110.0));
    let completed: Vec<_> = output
        .records
        .iter()
        .filter(|r| {
            r.completion
                .map(|c| c >= window.0 && c <= window.1)
                .unwrap_or(false)
        })
        .collect();
    let lambda = completed.len() as f64 / (window.1.as_secs() - window.0.as_secs());
    let mean_response_s = completed
        .iter()
        .map(|r| (r.completion.unwrap().0 - r.arrival.0) as f64 / 1000.0)
        .sum::<f64>()
        / completed.len() as f64;
    // mean concurrency sampled from request overlap
    let mut concurrency_sum = 0.0;
    let mut samples = 0;
    let mut t = window.0 .0;
    while t <= window.1 .0 {
        let active = output
            .records
            .iter()
            .filter(|r| {
                r.arrival.0 <= t && r.completion.map(|c| c.0 > t).unwrap_or(false)
            })
            .count();
        concurrency_sum += active as f64;
        samples += 1;
        t += 1_000;
    }
    let mean_concurrency = concurrency_sum / samples as f64;
    let predicted = lambda * mean_response_s;
    let relative = (mean_concurrency - predicted).abs() / predicted;
    assert!(
        relative < 0.10,
        "little's law off by {relative:.3}: N={mean_concurrency:.3} λW={predicted:.3}"
    );
}

const RAMP: &str = r#"
name = "ramp"

[sim]
seed = 11
duration_s = 500.0
network_latency_ms = 1

[detector]
overload_pct = 85.0
overload_sustain_s = 180.0
idle_pct = 10.0
idle_sustain_s = 600.0

[autoscaler]
enabled = true
cooldown_s = 300.0

[[offers]]
offer_id = "app-small"
cpu_ghz = 2.0
cpu_cores = 1
memory_gb = 1.0
disk_gb = 40.0
os = "Ubuntu9.04"
stock = 4
price_per_hour = 0.5
preinstalled = ["service-container"]

[[offers]]
offer_id = "db-small"
cpu_ghz = 2.0
cpu_cores = 1
memory_gb = 2.0
disk_gb = 80.0
os = "Ubuntu9.04"
db = "MySQL5.01"
stock = 4
price_per_hour = 0.6
preinstalled = ["database"]

[[components]]
name = "orders"
kind = "software"
input_schema = "OrderRow"
output_schema = "OrderReport"

[[components]]
name = "orders-db"
kind = "data"
input_schema = "OrderQuery"
output_schema = "OrderRow"
data_size_mb = 20.0

[[publish]]
component = "orders"
template = { cpu_ghz = 2.0, cpu_cores = 1, memory_gb = 1.0, disk_gb = 40.0 }

[[publish]]
component = "orders-db"
template = { cpu_ghz = 2.0, cpu_cores = 1, memory_gb = 2.0, disk_gb = 80.0, db = "MySQL5.01" }

[[bind]]
software = "orders"
data = "orders-db"

[workload]
arrivals = "deterministic"
service = "orders"
rate_per_s = 6.0
software_demand_units = 0.31
software_demand_rate = 0.1
data_demand_units = 0.01
data_demand_rate = 0.05
"#;

#[test]
fn ramp_scenario_scales_up_exactly_once() {
    let output = run_scenario_text(RAMP).unwrap();
    assert_eq!(output.overload_events.len(), 1, "one overload episode");
    assert_eq!(output.scale_reports.len(), 1, "exactly one pipeline");
    let report = &output.scale_reports[0];
    let names: Vec<String> = report.steps.iter().map(|s| s.name.to_string()).collect();
    assert_eq!(names, ["Subscribe", "Configure", "Deploy", "Compose", "Monitor"]);
    // detection at warm-up + sustain: run starts near t=3s, fires 180s later
    let event_t = output.overload_events[0].window.end();
    assert!(
        (181_000..=187_000).contains(&event_t.0),
        "event at {}ms",
        event_t.0
    );
    // post-scale steady state: both software hosts settle near half load
    let post = (TimeMs::from_secs(260.0), TimeMs::from_secs(480.0));
    let mut means = Vec::new();
    for (host, stream) in &output.host_streams {
        let samples: Vec<f64> = stream
            .iter()
            .filter(|h| h.t >= post.0 && h.t <= post.1)
            .map(|h| h.cpu_pct)
            .collect();
        if samples.is_empty() {
            continue;
        }
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        if mean > 20.0 {
            means.push((host.clone(), mean));
        }
    }
    assert_eq!(means.len(), 2, "two software hosts under load: {means:?}");
    for (host, mean) in &means {
        let relative = (mean / 100.0 - 0.465).abs() / 0.465;
        assert!(
            relative <= 0.10,
            "host {host} mean {mean:.2}% departs from 46.5% by {relative:.3}"
        );
    }
    // conservation across the scaling action
    assert_eq!(output.ledger_initial, output.ledger_final);
}

#[test]
fn data_tier_overload_scales_through_replication() {
    // shift the heavy demand to the data step and add writes
    let text = RAMP
        .replace("software_demand_units = 0.31", "software_demand_units = 0.01")
        .replace("software_demand_rate = 0.1", "software_demand_rate = 0.05")
        .replace("data_demand_units = 0.01", "data_demand_units = 0.31")
        .replace("data_demand_rate = 0.05", "data_demand_rate = 0.1")
        .replace("rate_per_s = 6.0", "rate_per_s = 6.0\nwrite_ratio = 0.1");
    let output = run_scenario_text(&text).unwrap();
    assert_eq!(output.scale_reports.len(), 1, "one data pipeline");
    let report = &output.scale_reports[0];
    let names: Vec<String> = report.steps.iter().map(|s| s.name.to_string()).collect();
    assert_eq!(names, ["Subscribe", "Configure", "Deploy", "Compose", "Monitor"]);
    assert!(output.trace.contains("REPLICATE"));

    // after sync, every replica holds exactly the logged write history
    let snapshot = &output.data_clusters["orders-db"];
    assert_eq!(snapshot.instances.len(), 2, "replica joined the rotation");
    let reference = &snapshot.instances[0].1;
    for (id, store) in &snapshot.instances {
        assert_eq!(store, reference, "replica {id} diverged");
    }
    assert_eq!(output.ledger_initial, output.ledger_final);
    // reads kept flowing while the copy ran: nothing was rejected
    assert_eq!(output.metrics.rejected, 0);
}

const IDLE_PAIR: &str = r#"
name = "idle-pair"

[sim]
seed = 5
duration_s = 400.0

[detector]
overload_pct = 85.0
overload_sustain_s = 180.0
idle_pct = 20.0
idle_sustain_s = 60.0

[autoscaler]
enabled = true
cooldown_s = 120.0

[[offers]]
offer_id = "app-small"
cpu_ghz = 2.0
cpu_cores = 1
memory_gb = 1.0
disk_gb = 40.0
stock = 4
price_per_hour = 0.5
preinstalled = ["service-container"]

[[offers]]
offer_id = "db-small"
cpu_ghz = 2.0
cpu_cores = 1
memory_gb = 2.0
disk_gb = 80.0
db = "MySQL5.01"
stock = 4
price_per_hour = 0.6
preinstalled = ["database"]

[[components]]
name = "orders"
kind = "software"
input_schema = "OrderRow"
output_schema = "OrderReport"

[[components]]
name = "orders-db"
kind = "data"
input_schema = "OrderQuery"
output_schema = "OrderRow"

[[publish]]
component = "orders"
replicas = 2
template = { cpu_ghz = 2.0, cpu_cores = 1, memory_gb = 1.0, disk_gb = 40.0 }

[[publish]]
component = "orders-db"
template = { cpu_ghz = 2.0, cpu_cores = 1, memory_gb = 2.0, disk_gb = 80.0, db = "MySQL5.01" }

[[bind]]
software = "orders"
data = "orders-db"

[workload]
arrivals = "none"
service = "orders"
"#;

#[test]
fn idle_pair_retires_exactly_one_instance() {
    let output = run_scenario_text(IDLE_PAIR).unwrap();
    assert_eq!(output.scale_downs.len(), 1, "exactly one retirement");
    assert_eq!(output.scale_downs[0].service, "orders");
    // the data service stayed at its floor
    assert!(output
        .idle_events
        .iter()
        .any(|e| e.source.ends_with(".101") || !e.source.is_empty()));
    assert!(output.trace.contains("reason=single-instance floor")
        || output.trace.contains("single-instance floor"));
    // drain precedes release in the trace
    let down_pos = output.trace.find("DOWN").expect("DOWN line");
    let release_pos = output.trace.find("RELEASE").expect("RELEASE line");
    assert!(down_pos < release_pos);
    assert_eq!(output.ledger_initial, output.ledger_final);
}

#[test]
fn fairness_three_instances_split_evenly() {
    let text = r#"
name = "fair3"

[sim]
seed = 3
duration_s = 600.0

[autoscaler]
enabled = false

[[offers]]
offer_id = "app-small"
cpu_ghz = 2.0
cpu_cores = 1
memory_gb = 1.0
disk_gb = 40.0
stock = 5
price_per_hour = 0.5
preinstalled = ["service-container"]

[[offers]]
offer_id = "db-small"
cpu_ghz = 2.0
cpu_cores = 1
memory_gb = 2.0
disk_gb = 80.0
db = "MySQL5.01"
stock = 2
price_per_hour = 0.6
preinstalled = ["database"]

[[components]]
name = "orders"
kind = "software"
input_schema = "OrderRow"
output_schema = "OrderReport"

[[components]]
name = "orders-db"
kind = "data"
input_schema = "OrderQuery"
output_schema = "OrderRow"

[[publish]]
component = "orders"
replicas = 3
template = { cpu_ghz = 2.0, cpu_cores = 1, memory_gb = 1.0, disk_gb = 40.0 }

[[publish]]
component = "orders-db"
template = { cpu_ghz = 2.0, cpu_cores = 1, memory_gb = 2.0, disk_gb = 80.0, db = "MySQL5.01" }

[[bind]]
software = "orders"
data = "orders-db"

[workload]
arrivals = "deterministic"
service = "orders"
rate_per_s = 2.0
end_s = 499.5
software_demand_units = 0.1
software_demand_rate = 0.2
data_demand_units = 0.01
data_demand_rate = 0.1
"#;
    let output = run_scenario_text(text).unwrap();
    assert_eq!(output.metrics.arrivals, 999);
    assert_eq!(output.metrics.completions, 999);
    let counts: Vec<u64> = output.routed_counts.values().copied().collect();
    assert_eq!(counts.len(), 3);
    for c in &counts {
        assert!(
            (332..=334).contains(c),
            "uneven split: {:?}",
            output.routed_counts
        );
    }
    let max = counts.iter().max().unwrap();
    let min = counts.iter().min().unwrap();
    assert!(max - min <= 1, "spread {:?}", output.routed_counts);
}
