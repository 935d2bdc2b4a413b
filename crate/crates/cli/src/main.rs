//! `sinchaos` command-line front end.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 on numerical or I/O
//! failures.

mod commands;
mod job;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Arg, ArgAction, ArgMatches, Command};

use job::{keys, Job, COMMANDS};

#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Usage(String),
    Numerical(String),
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Numerical(m) => write!(f, "failed: {m}"),
        }
    }
}

impl From<sinchaos::Error> for Failure {
    fn from(e: sinchaos::Error) -> Self {
        match e {
            sinchaos::Error::InvalidArgument(_)
            | sinchaos::Error::Parse(_)
            | sinchaos::Error::GrammarViolation { .. } => Failure::Usage(e.to_string()),
            other => Failure::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Numerical(format!("i/o: {e}"))
    }
}

fn about(command: &str) -> &'static str {
    match command {
        "trace" => "Integrate one trajectory; write it with its events and signed spike counts",
        "equilibria" => "Locate and classify the equilibria",
        "nullclines" => "Slow-plane x and Ca nullclines",
        "lyapunov" => "Lyapunov spectrum and dimension at one parameter point",
        "returnmap" => "One-dimensional return map of the slow section",
        "encode" => "Convert between voltage events, signed spike counts, itineraries and addresses",
        "sweep-lyapunov" => "Lyapunov spectrum over a (dCa, dVx) grid",
        "sweep-isi-lz" => "ISI statistics, LZ76 complexity and regime over a (dCa, dVx) grid",
        "sweep-homsd" => "Spike counts along the upper-saddle separatrix over a (dCa, dVx) grid",
        "scan-theta" => "Saddle-focus circle scan over (dCa, theta)",
        "sweep-isi-1d" => "Warm-started one-parameter ISI sweep in dCa",
        _ => "",
    }
}

fn cli() -> Command {
    let mut app = Command::new("sinchaos")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Simulation and chaos diagnostics for the SiN bursting neuron model")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for &name in COMMANDS {
        let mut sub = Command::new(name)
            .about(about(name))
            .arg(
                Arg::new("config")
                    .long("config")
                    .value_name("FILE")
                    .help("key=value file merged under the flags"),
            )
            .arg(
                Arg::new("preset")
                    .long("preset")
                    .value_name("NAME")
                    .value_parser(["desk", "paper"])
                    .help("default scale: desk or paper"),
            )
            .arg(
                Arg::new("workers")
                    .long("workers")
                    .value_name("N")
                    .value_parser(clap::value_parser!(usize))
                    .help("worker threads (default: all cores)"),
            )
            .arg(
                Arg::new("out")
                    .long("out")
                    .value_name("DIR")
                    .default_value("out")
                    .help("output directory"),
            )
            .arg(
                Arg::new("dry-run")
                    .long("dry-run")
                    .action(ArgAction::SetTrue)
                    .help("write the resolved meta.txt and stop"),
            )
            .arg(
                Arg::new("checkpoint")
                    .long("checkpoint")
                    .value_name("FILE")
                    .help("sweeps: append finished cells here and resume from it"),
            );
        for k in keys(name) {
            let help = if k.default.is_empty() {
                k.help.to_string()
            } else {
                format!("{} [default: {}]", k.help, k.default)
            };
            sub = sub.arg(
                Arg::new(k.name)
                    .long(k.name)
                    .value_name("VALUE")
                    .allow_hyphen_values(true)
                    .action(ArgAction::Set)
                    .help(help),
            );
        }
        app = app.subcommand(sub);
    }
    app
}

/// Values given explicitly on the command line for the command's keys.
fn flag_values(command: &str, m: &ArgMatches) -> Vec<(String, String)> {
    keys(command)
        .iter()
        .filter_map(|k| {
            m.get_one::<String>(k.name)
                .map(|v| (k.name.to_string(), v.clone()))
        })
        .collect()
}

fn execute(command: &str, m: &ArgMatches) -> Result<(), Failure> {
    let config = match m.get_one::<String>("config") {
        Some(path) => Some(
            std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("--config: cannot read {path}: {e}")))?,
        ),
        None => None,
    };
    let job = Job::resolve(
        command,
        m.get_one::<String>("preset").map(String::as_str),
        config.as_deref(),
        &flag_values(command, m),
    )?;
    let out = PathBuf::from(m.get_one::<String>("out").expect("defaulted"));
    if m.get_flag("dry-run") {
        std::fs::create_dir_all(&out)?;
        sinchaos::io::write_meta(&out.join("meta.txt"), &job.meta())?;
        for (k, v) in job.meta() {
            println!("{k}={v}");
        }
        return Ok(());
    }
    if let Some(&n) = m.get_one::<usize>("workers") {
        if n == 0 {
            return Err(Failure::Usage("--workers: must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Numerical(format!("worker pool: {e}")))?;
    }
    let ctx = commands::Context {
        out,
        checkpoint: m.get_one::<String>("checkpoint").map(PathBuf::from),
    };
    commands::run(&job, &ctx)
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match cli().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let (command, sub) = matches.subcommand().expect("subcommand required");
    match execute(command, sub) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("sinchaos {command}: {f}");
            f.exit_code()
        }
    }
}

fn main() {
    std::process::exit(run(std::env::args_os()));
}
