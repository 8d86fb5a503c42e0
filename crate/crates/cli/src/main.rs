use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use safewalk_core::harness::{load_scenario, run, trace_to_geojson};
use safewalk_core::model::{EngineParams, ParamOverrides};
use safewalk_server::{agents::run_agents, ServerConfig};

mod check;

#[derive(Parser)]
#[command(name = "safewalk", version, about = "Pedestrian distancing relay, replay and self-checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the WebSocket relay on /v1/stream.
    Serve(ServeArgs),
    /// Replay a scenario on the logical clock.
    Replay(ReplayArgs),
    /// Drive a scenario's scripted tracks against a running server.
    Agents(AgentsArgs),
    /// Run the built-in invariant checks.
    Check,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = safewalk_server::DEFAULT_PORT)]
    port: u16,
    /// Send each client a computed warning every tick.
    #[arg(long)]
    advisory: bool,
    #[arg(long, default_value_t = 1.0)]
    tick_hz: f64,
    #[arg(long, default_value_t = 5.0)]
    stale_timeout_s: f64,
    /// JSON file of engine parameter overrides.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Listen on all interfaces instead of loopback.
    #[arg(long)]
    public: bool,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Write the newline-delimited trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    geojson: Option<PathBuf>,
    #[arg(long)]
    params: Option<PathBuf>,
}

#[derive(Args)]
struct AgentsArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Server URL, e.g. ws://127.0.0.1:8700/v1/stream
    #[arg(long)]
    connect: String,
    #[arg(long)]
    params: Option<PathBuf>,
    /// Wall-clock milliseconds per tick (defaults to the update period).
    #[arg(long)]
    tick_ms: Option<u64>,
}

fn read_params(path: Option<&Path>) -> Result<Option<ParamOverrides>> {
    let Some(path) = path else { return Ok(None) };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let o = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(Some(o))
}

#[tokio::main]
async fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Serve(a) => serve(a).await,
        Command::Replay(a) => replay(a),
        Command::Agents(a) => agents(a).await,
        Command::Check => check::run_all(),
    }
}

async fn serve(a: ServeArgs) -> Result<()> {
    let mut config = ServerConfig { port: a.port, advisory: a.advisory, tick_hz: a.tick_hz, ..Default::default() };
    if let Some(o) = read_params(a.params.as_deref())? {
        config = config.with_overrides(&o);
    }
    config.params = EngineParams { stale_timeout: a.stale_timeout_s, ..config.params };
    config.params.validate()?;
    let ip = if a.public { [0, 0, 0, 0] } else { [127, 0, 0, 1] };
    let server = safewalk_server::bind_addr((ip, a.port).into(), config).await?;
    println!("listening on ws://{}{}", server.local_addr(), safewalk_server::STREAM_PATH);
    server.wait().await;
    Ok(())
}

fn replay(a: ReplayArgs) -> Result<()> {
    let script = load_scenario(&a.scenario).with_context(|| format!("loading {}", a.scenario.display()))?;
    let extra = read_params(a.params.as_deref())?;
    let trace = run(&script, extra.as_ref())?;
    if let Some(path) = &a.trace {
        std::fs::write(path, trace.to_ndjson()).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &a.geojson {
        let doc = serde_json::to_string_pretty(&trace_to_geojson(&trace, &script))?;
        std::fs::write(path, doc).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("{}: {} events", script.name, trace.events.len());
    for id in trace.ids() {
        let runs: Vec<String> = trace.warning_runs(&id).iter().map(|(k, n)| format!("{}({n})", k.as_str())).collect();
        println!("  {id}: {}", runs.join(" -> "));
    }
    Ok(())
}

async fn agents(a: AgentsArgs) -> Result<()> {
    let script = load_scenario(&a.scenario).with_context(|| format!("loading {}", a.scenario.display()))?;
    let extra = read_params(a.params.as_deref())?;
    let period = match a.tick_ms {
        Some(0) => bail!("--tick-ms must be positive"),
        Some(ms) => Duration::from_millis(ms),
        None => Duration::from_secs_f64(script.engine_params(extra.as_ref())?.update_period),
    };
    let report = run_agents(&script, &a.connect, extra.as_ref(), period, |t, id, kind| {
        println!("t={t:>7.1}s {id}: {}", kind.as_str());
    })
    .await?;
    for (id, n) in &report.received {
        println!("{id}: {n} peer messages");
    }
    Ok(())
}
