use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};

use ipos_core::attack::{estimate_attack_success, sweep_partition, AttackConfig, AttackError};
use ipos_core::export::{account_rows, sweep_rows, write_csv, AttackRow, Protocol, SimSummary};
use ipos_core::netsim::{run_honest_sim, ConfigError, SimConfig, SimError};
use ipos_core::nxt::{estimate_nxt_attack_success, NxtParams};

const DEFAULT_SWEEP: [usize; 7] = [1, 20, 60, 120, 180, 240, 400];

#[derive(Parser)]
#[command(name = "ipos", version, about = "IPoS simulator and attack estimates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config file; the reference configuration when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's rng_seed.
    #[arg(long, global = true)]
    rng_seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the config's trial count.
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Format for table outputs.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Honest-network simulation (SimConfig).
    Simulate,
    /// Private-fork attack on IPoS (AttackConfig).
    AttackIpos,
    /// The same attack on Nxt forging (AttackConfig plus an optional "nxt" object).
    AttackNxt,
    /// Attack success over partition counts (AttackConfig plus optional "partition_values").
    SweepP,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::AttackIpos => "attack-ipos",
            Command::AttackNxt => "attack-nxt",
            Command::SweepP => "sweep-p",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug)]
enum CliError {
    /// Bad or inconsistent configuration: exit code 2.
    Config(String),
    /// Anything that fails while running: exit code 1.
    Runtime(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(format!("invalid config: {e}"))
    }
}

impl From<AttackError> for CliError {
    fn from(e: AttackError) -> Self {
        match e {
            AttackError::Config(c) => c.into(),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => c.into(),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn read_object(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(CliError::Config(format!("{}: expected a JSON object", path.display()))),
        Err(e) => Err(CliError::Config(format!("{}: {e}", path.display()))),
    }
}

fn parse<T: DeserializeOwned>(obj: Map<String, Value>) -> Result<T, CliError> {
    serde_json::from_value(Value::Object(obj)).map_err(|e| CliError::Config(format!("invalid config: {e}")))
}

/// Writes outputs into one directory and remembers their names.
struct Outputs {
    dir: PathBuf,
    format: Format,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: PathBuf, format: Format) -> Self {
        Outputs { dir, format, files: Vec::new() }
    }

    fn path(&self, name: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.dir).map_err(|e| io_err(&self.dir, e))?;
        Ok(self.dir.join(name))
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.path(name)?;
        let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(&path, e))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn table<T: Serialize>(&mut self, stem: &str, rows: &[T]) -> Result<(), CliError> {
        match self.format {
            Format::Json => self.json(&format!("{stem}.json"), rows),
            Format::Csv => {
                let name = format!("{stem}.csv");
                let path = self.path(&name)?;
                let file = File::create(&path).map_err(|e| io_err(&path, e))?;
                write_csv(BufWriter::new(file), rows).map_err(|e| io_err(&path, e))?;
                self.files.push(name);
                Ok(())
            }
        }
    }

    fn manifest(mut self, command: Command, config: Value) -> Result<(), CliError> {
        let mut files = self.files.clone();
        files.push("manifest.json".into());
        let manifest = json!({
            "command": command.name(),
            "version": env!("CARGO_PKG_VERSION"),
            "config": config,
            "outputs": files,
        });
        self.json("manifest.json", &manifest)
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("configs serialize")
}

fn attack_config(
    cli: &Cli,
    mut obj: Option<Map<String, Value>>,
    extra: &str,
) -> Result<(AttackConfig, Option<Value>), CliError> {
    let extra = obj.as_mut().and_then(|o| o.remove(extra));
    let mut config = match obj {
        Some(o) => parse(o)?,
        None => AttackConfig::reference(),
    };
    if let Some(s) = cli.rng_seed {
        config.rng_seed = s;
    }
    if let Some(t) = cli.trials {
        config.trials = t;
    }
    config.validate()?;
    Ok((config, extra))
}

fn simulate(cli: &Cli, obj: Option<Map<String, Value>>, out: &mut Outputs) -> Result<Value, CliError> {
    let mut config = match obj {
        Some(o) => parse(o)?,
        None => SimConfig::reference(),
    };
    if let Some(s) = cli.rng_seed {
        config.rng_seed = s;
    }
    if cli.trials.is_some() {
        return Err(CliError::Config("invalid config field trials: simulate runs no trials".into()));
    }
    let result = run_honest_sim(&config)?;
    out.table("accounts", &account_rows(&result))?;
    out.table("buckets", &result.buckets)?;
    let summary = SimSummary::new(&result);
    out.json("summary.json", &summary)?;
    println!(
        "simulated {} blocks: participation {:.4}, hanging heights {}, tip {}",
        config.n_blocks, result.participation, result.hanging_events, result.tip
    );
    Ok(to_value(&config))
}

fn attack(
    cli: &Cli,
    obj: Option<Map<String, Value>>,
    out: &mut Outputs,
    protocol: Protocol,
) -> Result<Value, CliError> {
    let (config, nxt) = attack_config(cli, obj, "nxt")?;
    let (estimate, effective) = match protocol {
        Protocol::Ipos => {
            if nxt.is_some() {
                return Err(CliError::Config("invalid config field nxt: only used by attack-nxt".into()));
            }
            (estimate_attack_success(&config)?, to_value(&config))
        }
        Protocol::Nxt => {
            let params: NxtParams = match nxt {
                Some(v) => {
                    serde_json::from_value(v).map_err(|e| CliError::Config(format!("invalid config field nxt: {e}")))?
                }
                None => NxtParams::default(),
            };
            let mut v = to_value(&config);
            v["nxt"] = to_value(&params);
            (estimate_nxt_attack_success(&config, &params)?, v)
        }
    };
    let row = AttackRow::new(protocol, &config, config.partitions, &estimate);
    out.table("attack", std::slice::from_ref(&row))?;
    out.json("summary.json", &json!({ "protocol": protocol, "estimate": estimate }))?;
    println!(
        "{} attack x={} P={} k={}: {}/{} wins, p = {:.4} ± {:.4}",
        to_value(&protocol).as_str().unwrap_or_default(),
        row.x,
        row.partitions,
        row.k,
        estimate.successes,
        estimate.trials,
        estimate.probability,
        estimate.ci_half_width
    );
    Ok(effective)
}

fn sweep(cli: &Cli, obj: Option<Map<String, Value>>, out: &mut Outputs) -> Result<Value, CliError> {
    let (config, values) = attack_config(cli, obj, "partition_values")?;
    let values: Vec<usize> = match values {
        Some(v) => serde_json::from_value(v)
            .map_err(|e| CliError::Config(format!("invalid config field partition_values: {e}")))?,
        None => DEFAULT_SWEEP.to_vec(),
    };
    let result = sweep_partition(&config, &values)?;
    out.table("sweep", &sweep_rows(&config, &result))?;
    out.json("summary.json", &json!({ "best_partitions": result.best_partitions, "rows": result.rows }))?;
    for r in &result.rows {
        println!("P={:>5}  p = {:.4} ± {:.4}", r.partitions, r.estimate.probability, r.estimate.ci_half_width);
    }
    println!("best P = {}", result.best_partitions);
    let mut v = to_value(&config);
    v["partition_values"] = to_value(&values);
    Ok(v)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let obj = cli.config.as_deref().map(read_object).transpose()?;
    let mut out = Outputs::new(cli.out.clone(), cli.format);
    let effective = match cli.command {
        Command::Simulate => simulate(cli, obj, &mut out)?,
        Command::AttackIpos => attack(cli, obj, &mut out, Protocol::Ipos)?,
        Command::AttackNxt => attack(cli, obj, &mut out, Protocol::Nxt)?,
        Command::SweepP => sweep(cli, obj, &mut out)?,
    };
    out.manifest(cli.command, effective)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
