//! `paas` — run platform scenarios, replay traces, validate component
//! archives, rank catalog offers, re-run stream detection, and operate a
//! small on-disk platform state for publish/bind workflows.
//!
//! Exit codes: 0 success, 1 validation failure, 2 runtime error.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use paas_core::balancer::LoadBalancer;
use paas_core::control::{ComponentProfile, ControlPlane, RegistrationMode};
use paas_core::market::{EnvLabel, InstanceState, ResourceInstance};
use paas_core::model::{
    PrincipalId, ResourceInstanceProperties, ResourceTemplate, TimeInterval,
};
use paas_core::monitor::{detect_idle, detect_overload, parse_stream, MonitorRecord};
use paas_core::proxy::ProxyLayer;
use paas_core::repository::{validate_archive, ComponentId, Repository, UploadError};
use paas_core::sim::scenario::{CatalogFileSpec, TemplateSpec};
use paas_core::sim::{replay_trace, Scenario, ScenarioError};

#[derive(Parser)]
#[command(name = "paas", version, about = "QoS-assuring PaaS control-plane simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write trace, metrics, and stream dump.
    Run {
        scenario: PathBuf,
        /// Output directory (defaults to the scenario's directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-execute the scenario embedded in a trace and diff every event.
    Replay { trace: PathBuf },
    /// Check a component archive against the platform layout rules.
    ValidateArchive { archive: PathBuf },
    /// Rank catalog offers against a resource template.
    Match {
        #[arg(long)]
        template: PathBuf,
        #[arg(long)]
        catalog: PathBuf,
    },
    /// Re-run overload/idle detection over a stream dump.
    ReplayStream {
        dump: PathBuf,
        #[arg(long, default_value_t = 85.0)]
        overload_pct: f64,
        #[arg(long, default_value_t = 180.0)]
        overload_sustain_s: f64,
        #[arg(long, default_value_t = 20.0)]
        idle_pct: f64,
        #[arg(long, default_value_t = 600.0)]
        idle_sustain_s: f64,
    },
    /// Store a component archive in a platform state directory.
    Upload {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        provider: String,
        archive: PathBuf,
    },
    /// Publish a stored component onto a host from the state inventory.
    Publish {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        component: String,
        #[arg(long)]
        host: String,
        /// Service name (defaults to the archive root, lowercased).
        #[arg(long)]
        name: Option<String>,
    },
    /// Bind a software service to a data service (configuring its data source).
    Bind {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        software: String,
        #[arg(long)]
        data: String,
    },
}

/// 0 = ok, 1 = validation failure, 2 = runtime error.
enum Outcome {
    Ok,
    Invalid(String),
    Failed(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { scenario, out } => cmd_run(&scenario, out.as_deref()),
        Command::Replay { trace } => cmd_replay(&trace),
        Command::ValidateArchive { archive } => cmd_validate_archive(&archive),
        Command::Match { template, catalog } => cmd_match(&template, &catalog),
        Command::ReplayStream {
            dump,
            overload_pct,
            overload_sustain_s,
            idle_pct,
            idle_sustain_s,
        } => cmd_replay_stream(&dump, overload_pct, overload_sustain_s, idle_pct, idle_sustain_s),
        Command::Upload {
            state,
            provider,
            archive,
        } => cmd_upload(&state, &provider, &archive),
        Command::Publish {
            state,
            component,
            host,
            name,
        } => cmd_publish(&state, &component, &host, name.as_deref()),
        Command::Bind {
            state,
            software,
            data,
        } => cmd_bind(&state, &software, &data),
    };
    match outcome {
        Outcome::Ok => ExitCode::from(0),
        Outcome::Invalid(message) => {
            eprintln!("{message}");
            ExitCode::from(1)
        }
        Outcome::Failed(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<String, Outcome> {
    fs::read_to_string(path).map_err(|e| Outcome::Failed(format!("{}: {e}", path.display())))
}

fn cmd_run(path: &Path, out: Option<&Path>) -> Outcome {
    let text = match read(path) {
        Ok(t) => t,
        Err(o) => return o,
    };
    let mut scenario = match Scenario::parse(&text) {
        Ok(s) => s,
        Err(e @ ScenarioError::Invalid(_)) => return Outcome::Invalid(e.to_string()),
        Err(e) => return Outcome::Invalid(e.to_string()),
    };
    let base = path.parent().unwrap_or(Path::new("."));
    if let Err(e) = scenario.inline_catalog(base) {
        return Outcome::Failed(e.to_string());
    }
    let output = match paas_core::sim::run(&scenario) {
        Ok(o) => o,
        Err(paas_core::sim::RunError::Scenario(e)) => return Outcome::Invalid(e.to_string()),
        Err(e) => return Outcome::Failed(e.to_string()),
    };
    let out_dir = out.map(Path::to_path_buf).unwrap_or_else(|| base.to_path_buf());
    if let Err(e) = fs::create_dir_all(&out_dir) {
        return Outcome::Failed(format!("create {}: {e}", out_dir.display()));
    }
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "scenario".into());
    let trace_path = out_dir.join(format!("{stem}.trace.log"));
    let metrics_path = out_dir.join(format!("{stem}.metrics.txt"));
    let streams_path = out_dir.join(format!("{stem}.streams.tsv"));
    for (p, contents) in [
        (&trace_path, &output.trace),
        (&metrics_path, &output.metrics.render()),
        (&streams_path, &output.stream_dump),
    ] {
        if let Err(e) = fs::write(p, contents) {
            return Outcome::Failed(format!("write {}: {e}", p.display()));
        }
    }
    print!("{}", output.metrics.render());
    println!(
        "trace: {}\nmetrics: {}\nstreams: {}",
        trace_path.display(),
        metrics_path.display(),
        streams_path.display()
    );
    Outcome::Ok
}

fn cmd_replay(path: &Path) -> Outcome {
    let text = match read(path) {
        Ok(t) => t,
        Err(o) => return o,
    };
    let report = match replay_trace(&text) {
        Ok(r) => r,
        Err(e) => return Outcome::Failed(e.to_string()),
    };
    if let Some(warning) = &report.code_version_warning {
        println!("warning: {warning}");
    }
    if report.identical() {
        println!(
            "replay identical: {} events, empty diff",
            report.recorded_events
        );
        Outcome::Ok
    } else {
        println!(
            "replay diverged: {} recorded vs {} replayed events",
            report.recorded_events, report.replayed_events
        );
        for diff in &report.diffs {
            println!(
                "line {}:\n  recorded: {}\n  replayed: {}",
                diff.line, diff.expected, diff.actual
            );
        }
        Outcome::Invalid("trace and re-execution differ".into())
    }
}

fn cmd_validate_archive(path: &Path) -> Outcome {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) => return Outcome::Failed(format!("{}: {e}", path.display())),
    };
    match validate_archive(&bytes) {
        Ok((kind, manifest, root)) => {
            println!("kind: {kind}");
            println!("root: {root}");
            println!("entries: {}", manifest.len());
            Outcome::Ok
        }
        Err(UploadError::Layout(e)) => Outcome::Invalid(format!("layout: {e}")),
        Err(e) => Outcome::Invalid(e.to_string()),
    }
}

fn cmd_match(template_path: &Path, catalog_path: &Path) -> Outcome {
    let template_text = match read(template_path) {
        Ok(t) => t,
        Err(o) => return o,
    };
    let catalog_text = match read(catalog_path) {
        Ok(t) => t,
        Err(o) => return o,
    };
    let template_spec: TemplateSpec = match toml::from_str(&template_text) {
        Ok(t) => t,
        Err(e) => return Outcome::Invalid(format!("template: {e}")),
    };
    let catalog: CatalogFileSpec = match toml::from_str(&catalog_text) {
        Ok(c) => c,
        Err(e) => return Outcome::Invalid(format!("catalog: {e}")),
    };
    let template = template_spec.to_template();
    let offers: Vec<_> = catalog.offers.iter().map(|o| o.to_offer()).collect();
    match paas_core::market::match_offer(&template, &offers) {
        Ok(ranked) => {
            println!(
                "{:<4} {:<16} {:>10} {:>8} {:>14}",
                "rank", "offer", "distance", "stock", "price/hour"
            );
            for (i, m) in ranked.iter().enumerate() {
                let offer = offers.iter().find(|o| o.offer_id == m.offer_id).unwrap();
                println!(
                    "{:<4} {:<16} {:>10.4} {:>8} {:>14.3}",
                    i + 1,
                    m.offer_id,
                    m.distance,
                    offer.stock,
                    offer.price_per_hour
                );
            }
            Outcome::Ok
        }
        Err(e) => Outcome::Invalid(e.to_string()),
    }
}

fn cmd_replay_stream(
    path: &Path,
    overload_pct: f64,
    overload_sustain_s: f64,
    idle_pct: f64,
    idle_sustain_s: f64,
) -> Outcome {
    let text = match read(path) {
        Ok(t) => t,
        Err(o) => return o,
    };
    let records = match parse_stream(&text) {
        Ok(r) => r,
        Err(e) => return Outcome::Invalid(e.to_string()),
    };
    let hosts: Vec<_> = records
        .iter()
        .filter_map(|r| match r {
            MonitorRecord::Host(h) => Some(h.clone()),
            _ => None,
        })
        .collect();
    let overloads = detect_overload(&hosts, overload_pct, (overload_sustain_s * 1_000.0) as u64);
    let idles = detect_idle(&hosts, idle_pct, (idle_sustain_s * 1_000.0) as u64);
    println!(
        "{} tuples ({} host samples); {} overload events, {} idle events",
        records.len(),
        hosts.len(),
        overloads.len(),
        idles.len()
    );
    for e in overloads.iter().chain(idles.iter()) {
        println!(
            "{:?} host={} window=[{}ms..{}ms] threshold={}%",
            e.kind,
            e.source,
            e.window.start().0,
            e.window.end().0,
            e.threshold_pct
        );
    }
    Outcome::Ok
}

// ---- state-directory operations ------------------------------------------

#[derive(serde::Deserialize)]
struct HostInventory {
    hosts: Vec<HostEntry>,
}

#[derive(serde::Deserialize)]
struct HostEntry {
    instance_id: String,
    cpu_ghz: f64,
    cpu_cores: u32,
    memory_gb: f64,
    disk_gb: f64,
    #[serde(default)]
    env: Vec<String>,
    #[serde(default)]
    availability_start_h: f64,
    #[serde(default = "default_avail_end")]
    availability_end_h: f64,
}

fn default_avail_end() -> f64 {
    720.0
}

struct StateDir {
    repository: Repository,
    control: ControlPlane,
    balancer: LoadBalancer,
    proxies: ProxyLayer,
    hosts: Vec<HostEntry>,
}

fn load_state(state: &Path) -> Result<StateDir, Outcome> {
    let repository = Repository::load_from_dir(state.join("repository"))
        .map_err(|e| Outcome::Failed(format!("repository: {e}")))?;
    let journal_path = state.join("journal.log");
    let mut balancer = LoadBalancer::new();
    let mut proxies = ProxyLayer::new(4, 2);
    let mut control = if journal_path.exists() {
        let text = fs::read_to_string(&journal_path)
            .map_err(|e| Outcome::Failed(format!("journal: {e}")))?;
        let records: Vec<_> = text
            .lines()
            .filter_map(paas_core::control::JournalRecord::parse_line)
            .collect();
        ControlPlane::replay_journal(&records, &mut balancer, &mut proxies)
    } else {
        ControlPlane::new()
    };
    control.set_journal_file(&journal_path);
    let hosts_path = state.join("hosts.toml");
    let hosts = if hosts_path.exists() {
        let text = fs::read_to_string(&hosts_path)
            .map_err(|e| Outcome::Failed(format!("hosts.toml: {e}")))?;
        toml::from_str::<HostInventory>(&text)
            .map_err(|e| Outcome::Invalid(format!("hosts.toml: {e}")))?
            .hosts
    } else {
        Vec::new()
    };
    Ok(StateDir {
        repository,
        control,
        balancer,
        proxies,
        hosts,
    })
}

fn cmd_upload(state: &Path, provider: &str, archive: &Path) -> Outcome {
    let bytes = match fs::read(archive) {
        Ok(b) => b,
        Err(e) => return Outcome::Failed(format!("{}: {e}", archive.display())),
    };
    if let Err(e) = fs::create_dir_all(state.join("repository")) {
        return Outcome::Failed(format!("create state dir: {e}"));
    }
    let mut repository = match Repository::load_from_dir(state.join("repository")) {
        Ok(r) => r,
        Err(e) => return Outcome::Failed(e.to_string()),
    };
    match repository.upload(&PrincipalId::new(provider), bytes) {
        Ok(id) => {
            let pkg = repository.fetch(&id).unwrap();
            println!("stored component {id} kind={} root={}", pkg.kind, pkg.root);
            Outcome::Ok
        }
        Err(e) => Outcome::Invalid(e.to_string()),
    }
}

fn host_to_instance(entry: &HostEntry) -> ResourceInstance {
    let capacity =
        ResourceTemplate::new(entry.cpu_ghz, entry.cpu_cores, entry.memory_gb, entry.disk_gb);
    let env: BTreeSet<EnvLabel> = entry.env.iter().map(|e| EnvLabel(e.clone())).collect();
    ResourceInstance {
        instance_id: entry.instance_id.clone(),
        offer_id: "inventory".into(),
        agreement_id: "inventory".into(),
        properties: ResourceInstanceProperties {
            identifier: entry.instance_id.clone(),
            ownership: PrincipalId::new("provider"),
            usufruct: PrincipalId::new("operator"),
            management: PrincipalId::new("operator"),
            availability: TimeInterval::from_hours(
                entry.availability_start_h,
                entry.availability_end_h,
            ),
            connectivity: true,
            capacity,
            price_per_hour: 0.0,
        },
        configured_env: env,
        state: InstanceState::Configured,
    }
}

fn cmd_publish(state: &Path, component: &str, host: &str, name: Option<&str>) -> Outcome {
    let mut st = match load_state(state) {
        Ok(s) => s,
        Err(o) => return o,
    };
    let component_id = ComponentId(component.to_string());
    let package = match st.repository.fetch(&component_id) {
        Ok(p) => p.clone(),
        Err(e) => return Outcome::Invalid(e.to_string()),
    };
    let Some(entry) = st.hosts.iter().find(|h| h.instance_id == host) else {
        return Outcome::Invalid(format!(
            "host {host} not in {}/hosts.toml",
            state.display()
        ));
    };
    let instance = host_to_instance(entry);
    let service_name = name
        .map(str::to_string)
        .unwrap_or_else(|| package.root.to_lowercase());
    let profile = ComponentProfile::basic(service_name);
    let operator = PrincipalId::new("operator");
    match st.control.publish_basic(
        &st.repository,
        &component_id,
        &profile,
        &instance,
        &operator,
        RegistrationMode::Direct,
        &mut st.balancer,
        &mut st.proxies,
    ) {
        Ok(service_instance) => {
            println!(
                "published {} as {} on {}",
                component, service_instance.instance_url, host
            );
            Outcome::Ok
        }
        Err(e) => Outcome::Invalid(e.to_string()),
    }
}

fn cmd_bind(state: &Path, software: &str, data: &str) -> Outcome {
    let mut st = match load_state(state) {
        Ok(s) => s,
        Err(o) => return o,
    };
    let operator = PrincipalId::new("operator");
    match st
        .control
        .compose(software, data, &operator, &operator, &st.proxies)
    {
        Ok(record) => {
            let (data_id, proxy) = st
                .control
                .resolve_binding(software)
                .expect("binding recorded by compose");
            println!(
                "composite {} availability={} price={:.3} scalability={}",
                record.id.name,
                record.properties.availability,
                record.properties.price,
                record.properties.scalability
            );
            println!("binding: {software} -> {} via {proxy}", data_id.name);
            Outcome::Ok
        }
        Err(e) => Outcome::Invalid(e.to_string()),
    }
}
