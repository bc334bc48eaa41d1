use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use warp_core::eval::{load_benchmark, make_adapter, run_evaluation, BenchmarkAssets, SystemAdapter, SYSTEM_NAMES};
use warp_service::watch::watch_session;
use warp_service::{Config, Server, Service, ServiceError, Session, Status};

#[derive(Debug, Parser)]
#[command(name = "warp", version, about = "Explains compiler errors and proposes fixes backed by web evidence")]
struct Cli {
    /// Configuration file; defaults to $XDG_CONFIG_HOME/warp/config.toml when present.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a build once and repair its first error.
    Run {
        /// Apply the top-ranked fix.
        #[arg(long)]
        apply: bool,
        /// Print the session as JSON.
        #[arg(long)]
        json: bool,
        /// Working directory (default: current).
        #[arg(long)]
        dir: Option<PathBuf>,
        #[arg(last = true, required = true, num_args = 1..)]
        cmd: Vec<String>,
    },
    /// Rebuild on every save and repair each new error.
    Watch {
        #[arg(long)]
        cmd: String,
        dir: PathBuf,
        /// Also serve the HTTP API on this address.
        #[arg(long)]
        bind: Option<String>,
    },
    /// Score systems on a benchmark.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        /// Comma-separated system names.
        #[arg(long, value_delimiter = ',', default_values_t = SYSTEM_NAMES.map(String::from))]
        systems: Vec<String>,
        /// Text report path; the JSON report is written beside it.
        #[arg(long)]
        report: PathBuf,
    },
    /// Serve the HTTP API and event stream.
    Serve,
}

fn load_config(explicit: Option<&Path>) -> Result<Config> {
    if let Some(p) = explicit {
        return Config::load(p).with_context(|| format!("loading {}", p.display()));
    }
    let default = std::env::var_os("XDG_CONFIG_HOME")
        .map(PathBuf::from)
        .or_else(|| std::env::var_os("HOME").map(|h| PathBuf::from(h).join(".config")))
        .map(|d| d.join("warp").join("config.toml"));
    match default {
        Some(p) if p.exists() => Config::load(&p).with_context(|| format!("loading {}", p.display())),
        _ => Ok(Config::default()),
    }
}

fn print_session(s: &Session) {
    let Some(ctx) = &s.error_context else {
        println!("{}: {}", s.status, s.history.last().map_or("", |h| h.detail.as_str()));
        return;
    };
    println!("error [{}] {}:{}: {}", ctx.error_id.id, ctx.file_path.display(), ctx.line, ctx.raw_message);
    for sol in &s.solutions {
        println!();
        println!("#{} {} confidence {:.2} ({:?})", sol.rank, sol.id, sol.confidence, sol.provenance);
        println!("{}", sol.explanation.trim_end());
        print!("{}", sol.fix);
    }
    if !s.evidence.snippets.is_empty() {
        println!();
        println!("evidence:");
        for e in &s.evidence.snippets {
            println!("  [ev:{}] {:.2} {}", e.id, e.score, e.url);
        }
    }
}

fn print_build(r: Result<&Session, &ServiceError>) {
    match r {
        Ok(s) => print_session(s),
        Err(e) => eprintln!("warp: {e}"),
    }
}

fn run(config: &Config, dir: Option<PathBuf>, cmd: &[String], apply: bool, json: bool) -> Result<ExitCode> {
    let dir = match dir {
        Some(d) => d,
        None => std::env::current_dir()?,
    };
    let line = if cmd.len() == 1 { cmd[0].clone() } else { shlex::try_join(cmd.iter().map(String::as_str))? };
    let service = Service::in_memory(config.pipeline()?).with_build_timeout(Duration::from_secs(config.build.timeout_secs));
    let id = service.create_session(&line, &dir)?.id;
    let mut session = service.build(&id)?;
    if apply && session.status == Status::AwaitingDecision {
        let top = session.solutions[0].id.clone();
        let report = service.apply(&top)?;
        eprintln!("applied {} to {}", top, report.path.display());
        session = report.session;
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&session)?);
    } else {
        print_session(&session);
    }
    Ok(if session.error_context.is_some() || session.history.iter().any(|h| h.detail.starts_with("no solution")) {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn eval(config: &Config, dataset: &Path, systems: &[String], report: &Path) -> Result<()> {
    let bench = load_benchmark(dataset).with_context(|| format!("loading {}", dataset.display()))?;
    for e in &bench.errors {
        eprintln!("warp: skipped {e:?}");
    }
    let assets = BenchmarkAssets::beside(dataset);
    let adapters: Vec<Box<dyn SystemAdapter>> = systems
        .iter()
        .map(|n| make_adapter(n.trim(), &assets, &config.pipeline).map_err(anyhow::Error::msg))
        .collect::<Result<_>>()?;
    let result = run_evaluation(&adapters, &bench.instances, &bench.hash, &config.eval_config());
    let (text, json) = result.write(report)?;
    print!("{}", result.render_text());
    eprintln!("wrote {} and {}", text.display(), json.display());
    Ok(())
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

async fn serve_until_interrupted(bind: &str, service: Arc<Service>) -> Result<()> {
    let server = Server::bind(bind, service).await?;
    eprintln!("warp: listening on http://{}", server.local_addr()?);
    tokio::select! {
        r = server.run() => r?,
        _ = tokio::signal::ctrl_c() => {}
    }
    Ok(())
}

fn watch(config: &Config, cmd: &str, dir: &Path, bind: Option<&str>) -> Result<()> {
    if !dir.is_dir() {
        bail!("{} is not a directory", dir.display());
    }
    let service = Arc::new(Service::in_memory(config.pipeline()?).with_build_timeout(Duration::from_secs(config.build.timeout_secs)));
    let id = service.create_session(cmd, dir)?.id;
    let debounce = Duration::from_millis(config.build.debounce_ms);
    if let Some(bind) = bind {
        let svc = service.clone();
        let bind = bind.to_string();
        std::thread::spawn(move || {
            let r = runtime().and_then(|rt| rt.block_on(serve_until_interrupted(&bind, svc)));
            if let Err(e) = r {
                eprintln!("warp: {e:#}");
            }
            std::process::exit(0);
        });
    }
    let stop = AtomicBool::new(false);
    watch_session(&service, &id, debounce, &stop, print_build)?;
    Ok(())
}

fn serve(config: &Config) -> Result<()> {
    let store = config.store.resolved_path();
    let service = Service::open(config.pipeline()?, &store, config.store.compact_every)
        .with_context(|| format!("opening session store {}", store.display()))?
        .with_build_timeout(Duration::from_secs(config.build.timeout_secs));
    let service = Arc::new(service);
    let stop = Arc::new(AtomicBool::new(false));
    let debounce = Duration::from_millis(config.build.debounce_ms);
    for target in &config.watch {
        let dir = target.dir.canonicalize().unwrap_or_else(|_| target.dir.clone());
        let id = match service.find_session(&target.command, &dir) {
            Some(s) => s.id,
            None => service.create_session(&target.command, &dir)?.id,
        };
        warp_service::watch::spawn_watch(service.clone(), id, debounce, stop.clone());
    }
    runtime()?.block_on(serve_until_interrupted(&config.server.bind, service))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = load_config(cli.config.as_deref()).and_then(|config| match &cli.command {
        Command::Run { apply, json, dir, cmd } => run(&config, dir.clone(), cmd, *apply, *json),
        Command::Watch { cmd, dir, bind } => watch(&config, cmd, dir, bind.as_deref()).map(|_| ExitCode::SUCCESS),
        Command::Eval { dataset, systems, report } => eval(&config, dataset, systems, report).map(|_| ExitCode::SUCCESS),
        Command::Serve => {
            if cli.config.is_none() {
                bail!("serve needs --config <file>");
            }
            serve(&config).map(|_| ExitCode::SUCCESS)
        }
    });
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("warp: {e:#}");
            ExitCode::from(2)
        }
    }
}
