//! Command-line front end.
//!
//! Exit statuses: 0 success, 1 I/O failure, 2 bad config, arguments or
//! hex input, 3 disconnected LR mesh.

use crate::codec::inspect_lines;
use crate::simulator::{self, Metrics, Mode, Scenario, ScenarioError, Simulation};
use clap::{Args, Parser, Subcommand};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DISCONNECTED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "lima", version, about = "LIMA protocol engine and LoRa network simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and emit a CSV row (plus a JSON sidecar with --out).
    Run(SimArgs),
    /// Sweep the area side from 2 to 10 km in both modes.
    SweepSize(SimArgs),
    /// Sweep the traffic period on the 6 km topology in both modes.
    SweepTraffic(SimArgs),
    /// Decode a hex-encoded frame.
    Inspect { hex: String },
    /// Run a scenario and print every node's routing tables at the end.
    DumpRoutes(SimArgs),
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Scenario JSON; defaults apply to missing fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Single seed. Sweeps pool seeds 1, 2 and 3 unless this is given.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<Mode>,
    /// Simulate 200 hours instead of the configured duration.
    #[arg(long)]
    pub paper_scale: bool,
    /// Line-delimited JSON event trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub hours: Option<f64>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Disconnected(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Disconnected(_) => EXIT_DISCONNECTED,
            Failure::Io(_) => EXIT_IO,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Disconnected(m) | Failure::Io(m) => m,
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::DisconnectedMesh { .. } => Failure::Disconnected(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

/// Parses `args` (program name first) and runs the command, writing data
/// to `stdout` and diagnostics to `stderr`. Returns the exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli.command, stdout) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message());
            f.code()
        }
    }
}

fn execute(cmd: Command, stdout: &mut dyn Write) -> Result<(), Failure> {
    match cmd {
        Command::Run(a) => cmd_run(&a, stdout),
        Command::SweepSize(a) => cmd_sweep(&a, stdout, simulator::sweep_variable_size),
        Command::SweepTraffic(a) => cmd_sweep(&a, stdout, simulator::sweep_variable_traffic),
        Command::Inspect { hex } => cmd_inspect(&hex, stdout),
        Command::DumpRoutes(a) => cmd_dump_routes(&a, stdout),
    }
}

pub fn load_scenario(path: Option<&Path>) -> Result<Scenario, String> {
    match path {
        None => Ok(Scenario::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("bad config {}: {e}", p.display()))
        }
    }
}

fn scenario_for(a: &SimArgs) -> Result<Scenario, Failure> {
    let mut s = load_scenario(a.config.as_deref()).map_err(Failure::Config)?;
    if let Some(seed) = a.seed {
        s.seed = seed;
    }
    if let Some(mode) = a.mode {
        s.mode = mode;
    }
    if let Some(h) = a.hours {
        s.sim_hours = h;
    }
    if a.paper_scale {
        s.sim_hours = Scenario::FULL_SCALE_SIM_HOURS;
    }
    s.validate()?;
    Ok(s)
}

fn simulate(s: &Scenario, trace: Option<&Path>) -> Result<Simulation, Failure> {
    let mut sim = Simulation::new(s)?;
    if let Some(p) = trace {
        sim = sim.with_trace(Box::new(BufWriter::new(File::create(p)?)));
    }
    Ok(sim)
}

fn emit(rows: &[Metrics], scenario: &Scenario, seeds: &[u64], out: Option<&Path>, stdout: &mut dyn Write) -> Result<(), Failure> {
    match out {
        None => simulator::write_csv(stdout, rows)?,
        Some(p) => {
            simulator::write_csv(File::create(p)?, rows)?;
            let sidecar = serde_json::json!({ "scenario": scenario, "seeds": seeds, "metrics": rows });
            let mut json_path = p.as_os_str().to_owned();
            json_path.push(".json");
            let mut f = File::create(PathBuf::from(json_path))?;
            serde_json::to_writer_pretty(&mut f, &sidecar).map_err(|e| Failure::Io(e.to_string()))?;
            writeln!(f)?;
        }
    }
    Ok(())
}

fn cmd_run(a: &SimArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let s = scenario_for(a)?;
    log::info!("running {} km {} for {} h, seed {}", s.area_side_km, s.mode.name(), s.sim_hours, s.seed);
    let m = simulate(&s, a.trace.as_deref())?.run();
    emit(&[m], &s, &[s.seed], a.out.as_deref(), stdout)
}

type SweepFn = fn(&Scenario, &[u64]) -> Result<Vec<Metrics>, ScenarioError>;

fn cmd_sweep(a: &SimArgs, stdout: &mut dyn Write, sweep: SweepFn) -> Result<(), Failure> {
    let s = scenario_for(a)?;
    let seeds: Vec<u64> = a.seed.map_or_else(|| vec![1, 2, 3], |x| vec![x]);
    log::info!("sweep over seeds {seeds:?}, {} h per run", s.sim_hours);
    let rows = sweep(&s, &seeds)?;
    emit(&rows, &s, &seeds, a.out.as_deref(), stdout)
}

fn cmd_inspect(hex: &str, stdout: &mut dyn Write) -> Result<(), Failure> {
    let bytes = decode_hex(hex).map_err(Failure::Config)?;
    let lines = inspect_lines(&bytes).map_err(|e| Failure::Config(format!("cannot decode frame: {e}")))?;
    for l in lines {
        writeln!(stdout, "{l}")?;
    }
    Ok(())
}

fn cmd_dump_routes(a: &SimArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let s = scenario_for(a)?;
    let mut sim = simulate(&s, a.trace.as_deref())?;
    sim.run_until_end();
    let now = sim.now();
    for k in 0..sim.lg_count() {
        let g = sim.gateway(k);
        writeln!(stdout, "# LG {}", g.id)?;
        for l in g.routing.dump(now) {
            writeln!(stdout, "{l}")?;
        }
    }
    for k in 0..sim.lr_count() {
        let r = sim.router(k);
        writeln!(stdout, "# LR {}", r.id)?;
        for l in r.routing.dump(now) {
            writeln!(stdout, "{l}")?;
        }
    }
    Ok(())
}

pub fn decode_hex(s: &str) -> Result<Vec<u8>, String> {
    let clean: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let clean = clean.strip_prefix("0x").unwrap_or(&clean);
    if clean.is_empty() {
        return Err("malformed hex: empty input".into());
    }
    hex::decode(clean).map_err(|e| format!("malformed hex: {e}"))
}
