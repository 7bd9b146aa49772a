use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use voi_formation::config::load_run_config;
use voi_formation::engine::{run_monte_carlo, RunConfig};
use voi_formation::formation::{FormationFile, FormationKind, FormationSpec};
use voi_formation::report::{self, percentile_table, write_run_outputs, write_schedule, FORMATION_SCHEMA};
use voi_formation::scheduler::{precompute_schedule, ScheduleInputs, SchedulerPolicy};
use voi_formation::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_DIVERGED: u8 = 4;

#[derive(Parser)]
#[command(
    name = "voi-formation",
    version,
    about = "Formation tracking under AoI/VoI localization scheduling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo batch and write time series, ECDFs and a summary.
    Run(RunArgs),
    /// Print the precomputed localization schedule as CSV.
    Schedule(ScheduleArgs),
    /// Dump a formation (weights, edges, rigidity rank) as JSON.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// TOML file with run settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in formation: symmetric or asymmetric.
    #[arg(long)]
    formation: Option<FormationKind>,
    /// Custom formation JSON (`name`, `slots`, one-based `edges`).
    #[arg(long, conflicts_with = "formation")]
    formation_file: Option<PathBuf>,
    /// Episode length (s).
    #[arg(long)]
    duration: Option<f64>,
    /// Scheduling period (s).
    #[arg(long)]
    ts: Option<f64>,
    /// Integration step (s); must divide the scheduling period.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    kp: Option<f64>,
    #[arg(long)]
    kf: Option<f64>,
    #[arg(long)]
    ke: Option<f64>,
    /// Noise scale; agent i gets sigma0 * (1 + i).
    #[arg(long)]
    sigma0: Option<f64>,
    /// Cube side of the built-in formations (m).
    #[arg(long)]
    d0: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// maf, mee, mv, oracle, a comma-separated list, or all.
    #[arg(long)]
    scheduler: Option<String>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    workers: Option<usize>,
    /// Samples before this time (s) are excluded from the statistics.
    #[arg(long)]
    burn_in: Option<f64>,
}

#[derive(Args)]
struct ScheduleArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value = "maf")]
    scheduler: SchedulerPolicy,
    /// Number of slots (default: duration / ts).
    #[arg(long)]
    slots: Option<usize>,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Schedule(args) => cmd_schedule(args),
        Command::Inspect(args) => cmd_inspect(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Formation(_)
        | Error::FormationSchema { .. }
        | Error::IndexOutOfRange { .. }
        | Error::Dimension { .. }
        | Error::EmptyAfterBurnIn { .. } => EXIT_USAGE,
        Error::Io(_) => EXIT_IO,
        Error::Diverged { .. } => EXIT_DIVERGED,
        _ => EXIT_FAILURE,
    }
}

/// Config file (if any) with the model flags applied on top, plus the
/// formation it describes.
fn resolve(model: &ModelArgs) -> voi_formation::Result<(RunConfig, FormationSpec)> {
    let mut cfg = match &model.config {
        Some(path) => load_run_config(path)?,
        None => RunConfig::default(),
    };
    let e = &mut cfg.episode;
    if let Some(f) = model.formation {
        e.formation = f;
    }
    let overrides = [
        (&mut e.duration, model.duration),
        (&mut e.slot_period, model.ts),
        (&mut e.dt, model.dt),
        (&mut e.k_p, model.kp),
        (&mut e.k_f, model.kf),
        (&mut e.k_e, model.ke),
        (&mut e.sigma0, model.sigma0),
        (&mut e.d0, model.d0),
    ];
    for (field, value) in overrides {
        if let Some(v) = value {
            *field = v;
        }
    }
    let spec = match &model.formation_file {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|err| io_error(path, err))?;
            let spec = FormationFile::parse(&text).map_err(|err| match err {
                Error::FormationSchema { path: field, message } => Error::FormationSchema {
                    path: format!("{} {field}", path.display()),
                    message,
                },
                other => other,
            })?;
            cfg.episode.n = spec.n;
            cfg.episode.d = spec.d;
            spec
        }
        None => cfg.episode.build_formation()?,
    };
    Ok((cfg, spec))
}

fn io_error(path: &Path, err: io::Error) -> Error {
    Error::Io(io::Error::new(err.kind(), format!("{}: {err}", path.display())))
}

fn parse_schedulers(text: &str) -> voi_formation::Result<Vec<SchedulerPolicy>> {
    if text.eq_ignore_ascii_case("all") {
        return Ok(SchedulerPolicy::ALL.to_vec());
    }
    let mut out = Vec::new();
    for name in text.split(',') {
        let p: SchedulerPolicy = name.trim().parse()?;
        if !out.contains(&p) {
            out.push(p);
        }
    }
    Ok(out)
}

fn cmd_run(args: RunArgs) -> voi_formation::Result<()> {
    let (mut cfg, spec) = resolve(&args.model)?;
    if let Some(s) = &args.scheduler {
        cfg.schedulers = parse_schedulers(s)?;
    }
    if let Some(n) = args.episodes {
        cfg.episodes = n;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(b) = args.burn_in {
        cfg.burn_in = b;
    }
    cfg.validate()?;
    if let Some(warning) = cfg.episode.gains().separation_warning(cfg.episode.k_e) {
        eprintln!("warning: {warning}");
    }

    let runs = run_monte_carlo(&cfg, &spec)?;
    let (summary, written) = write_run_outputs(&args.out_dir, &cfg, &spec.name, &runs)?;

    println!(
        "formation {} | seed {} | {} episodes | post-burn-in true loss (t >= {} s)",
        spec.name,
        cfg.seed,
        cfg.episodes,
        report::fmt_sig(cfg.burn_in)
    );
    print!("{}", percentile_table(&summary));
    if let Some(r) = summary.comparisons.mv_over_maf_p99 {
        println!("p99 ratio mv/maf: {}", report::fmt_sig(r));
    }
    for path in written {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_schedule(args: ScheduleArgs) -> voi_formation::Result<()> {
    let (cfg, spec) = resolve(&args.model)?;
    let e = &cfg.episode;
    let slots = match args.slots {
        Some(k) => k,
        None => e.slots()? as usize,
    };
    // agent i sits on slot i and carries the i-th noise level
    let inputs = ScheduleInputs::new(e.sigmas(), spec.centralities.clone(), spec.d)?;
    let schedule = precompute_schedule(args.scheduler, &inputs, slots);
    let mut buf = Vec::new();
    write_schedule(&mut buf, args.scheduler, &spec.name, e.slot_period, &schedule)?;
    emit(args.out.as_deref(), &buf)
}

fn cmd_inspect(args: InspectArgs) -> voi_formation::Result<()> {
    let (_, spec) = resolve(&args.model)?;
    #[derive(serde::Serialize)]
    struct Inspect {
        schema: &'static str,
        #[serde(flatten)]
        formation: voi_formation::formation::FormationDump,
    }
    let json = report::to_json(&Inspect {
        schema: FORMATION_SCHEMA,
        formation: spec.to_dump(),
    })?;
    emit(args.out.as_deref(), json.as_bytes())
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> voi_formation::Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|e| io_error(path, e)),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(bytes).and_then(|_| stdout.flush()).map_err(Error::Io)
        }
    }
}
