//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invalid configuration or usage, 2 a built-in
//! check failed, 3 I/O failure.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use crate::cipher::{derive_node_key, tea_encrypt, Block64, Key128, NodeId};
use crate::config::ScenarioConfig;
use crate::otp::{generate_token, SlotIndex};
use crate::scenarios;
use crate::simnet::{run_scenario, SimError};
use crate::summary::RunSummary;
use crate::trace::{EventKind, Trace};

pub const OUT_DIR_ENV: &str = "WAKEOTP_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_ASSERTION: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "wakeotp",
    version,
    about = "Slot-token wake-up simulator for sensor networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write its trace, timeline and summary.
    Run {
        /// Scenario file, or the name of a built-in scenario.
        config: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        quiet: bool,
    },
    /// Run one scenario for every seed in an inclusive range `a..b`.
    Sweep {
        config: String,
        #[arg(long, value_parser = parse_seed_range)]
        seeds: (u64, u64),
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Print the cipher regression vectors.
    Vectors,
    /// Parse and validate a scenario without running it.
    Validate {
        config: String,
        #[arg(long)]
        quiet: bool,
    },
}

fn parse_seed_range(s: &str) -> Result<(u64, u64), String> {
    let (a, b) = s
        .split_once("..=")
        .or_else(|| s.split_once(".."))
        .ok_or_else(|| format!("expected a..b, got {s:?}"))?;
    let a: u64 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    if a > b {
        return Err(format!("empty seed range {a}..{b}"));
    }
    Ok((a, b))
}

#[derive(Debug)]
enum Failure {
    Validation(String),
    Assertion(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Validation(_) => EXIT_VALIDATION,
            Failure::Assertion(_) => EXIT_ASSERTION,
            Failure::Io(_) => EXIT_IO,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Assertion(m) | Failure::Io(m) => m,
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Failure::Validation(e.to_string())
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_VALIDATION
            } else {
                EXIT_OK
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("wakeotp: {}", f.message());
            f.code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run {
            config,
            out,
            seed,
            quiet,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let out = out_dir(out);
            let summary = run_and_write(&cfg, &out)?;
            if !quiet {
                println!("{}", one_line(&summary));
                for c in &summary.checks {
                    println!(
                        "  [{}] {}: {}",
                        if c.passed { "PASS" } else { "FAIL" },
                        c.name,
                        c.detail
                    );
                }
            }
            check_summary(&summary)
        }
        Command::Sweep {
            config,
            seeds: (a, b),
            out,
            quiet,
        } => {
            let base = load_config(&config)?;
            let out = out_dir(out);
            let results: Vec<Result<RunSummary, Failure>> = (a..=b)
                .into_par_iter()
                .map(|seed| {
                    let cfg = ScenarioConfig {
                        seed,
                        ..base.clone()
                    };
                    run_and_write(&cfg, &out)
                })
                .collect();
            let mut failed = Vec::new();
            for r in results {
                let s = r?;
                if !quiet {
                    println!("{}", one_line(&s));
                }
                if !s.passed() {
                    failed.push(s.seed);
                }
            }
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure::Assertion(format!(
                    "built-in checks failed for seeds {failed:?}"
                )))
            }
        }
        Command::Vectors => {
            let mut stdout = io::stdout().lock();
            for line in regression_vectors() {
                writeln!(stdout, "{line}").map_err(|e| Failure::Io(format!("stdout: {e}")))?;
            }
            Ok(())
        }
        Command::Validate { config, quiet } => {
            let cfg = load_config(&config)?;
            if !quiet {
                println!(
                    "{}: ok ({} nodes, scheme {})",
                    cfg.scenario,
                    cfg.nodes.len(),
                    cfg.scheme.as_str()
                );
            }
            Ok(())
        }
    }
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Reads a scenario file, falling back to a built-in scenario of that name
/// when no such file exists.
fn load_config(arg: &str) -> Result<ScenarioConfig, Failure> {
    let path = Path::new(arg);
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => match scenarios::builtin(arg) {
            Some(t) => t.to_string(),
            None => return Err(Failure::Io(format!("{}: {e}", path.display()))),
        },
        Err(e) => return Err(Failure::Io(format!("{}: {e}", path.display()))),
    };
    ScenarioConfig::load(&text).map_err(|e| Failure::Validation(format!("{arg}:\n{e}")))
}

pub fn output_stem(cfg: &ScenarioConfig) -> String {
    format!("{}-seed{}", cfg.scenario, cfg.seed)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn run_and_write(cfg: &ScenarioConfig, out: &Path) -> Result<RunSummary, Failure> {
    let trace = run_scenario(cfg)?;
    let summary = RunSummary::new(cfg, &trace);
    fs::create_dir_all(out).map_err(|e| Failure::Io(format!("{}: {e}", out.display())))?;
    let stem = output_stem(cfg);
    write_file(
        &out.join(format!("{stem}.trace.csv")),
        &trace.to_csv_bytes(),
    )?;
    write_file(
        &out.join(format!("{stem}.timeline.csv")),
        &timeline_csv(&trace),
    )?;
    write_file(
        &out.join(format!("{stem}.summary.json")),
        summary.to_json().as_bytes(),
    )?;
    Ok(summary)
}

fn check_summary(s: &RunSummary) -> Result<(), Failure> {
    let failed: Vec<&str> = s.failed_checks().map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Assertion(format!(
            "built-in checks failed: {}",
            failed.join(", ")
        )))
    }
}

fn one_line(s: &RunSummary) -> String {
    let c = &s.counters;
    format!(
        "{} seed={} accepted={} rejected_consumed={} rejected_mismatch={} adversary_attempts={} adversary_successes={}",
        s.scenario,
        s.seed,
        c.wakes_accepted,
        c.wakes_rejected_consumed,
        c.wakes_rejected_mismatch,
        c.adversary_attempts,
        c.adversary_successes
    )
}

/// Plot-ready message timeline: wake requests, replays, the addressed
/// receiver's decision and data frames. Bystander rejections are left out.
pub fn timeline_csv(trace: &Trace) -> Vec<u8> {
    let mut out = String::from("time_ms,node,message,peer,outcome\n");
    for e in &trace.events {
        let (message, peer, outcome) = match e.kind {
            EventKind::WakeSignalTx => ("wake_tx", e.dest, None),
            EventKind::AdversaryReplay => ("replay", None, None),
            EventKind::WakeDecisionMade if e.from_adversary() || e.dest == e.actor.node() => {
                ("wake_decision", e.dest, e.decision())
            }
            EventKind::DataTx => ("data_tx", e.dest, None),
            EventKind::DataRx => ("data_rx", e.dest, None),
            _ => continue,
        };
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            e.time_ms,
            e.actor,
            message,
            peer.map(|p| p.to_string()).unwrap_or_default(),
            outcome.map(|d| d.as_str()).unwrap_or_default()
        ));
    }
    out.into_bytes()
}

/// Frozen cipher vectors, one per line.
pub fn regression_vectors() -> Vec<String> {
    let zero = Key128::ZERO;
    let k1 = Key128::from_hex("000102030405060708090a0b0c0d0e0f").expect("literal");
    let mut v = Vec::new();
    for (key, block) in [
        (zero, Block64::ZERO),
        (zero, Block64::ONES),
        (k1, Block64(0x0123_4567_89ab_cdef)),
    ] {
        v.push(format!(
            "tea_encrypt key={key} plaintext={block} ciphertext={}",
            tea_encrypt(block, key)
        ));
    }
    for id in [0u32, 1, 7] {
        v.push(format!(
            "derive_node_key master={zero} id={id} key={}",
            derive_node_key(zero, NodeId(id))
        ));
    }
    for slot in [0u64, 1, 1 << 32] {
        v.push(format!(
            "generate_token key={zero} slot={slot} token={}",
            generate_token(zero, SlotIndex(slot))
        ));
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seed_range("1..20"), Ok((1, 20)));
        assert_eq!(parse_seed_range("3..=3"), Ok((3, 3)));
        assert!(parse_seed_range("5..1").is_err());
        assert!(parse_seed_range("x").is_err());
    }

    #[test]
    fn unknown_flag_is_a_usage_error() {
        assert_eq!(
            main_with_args(["wakeotp", "run", "x", "--frobnicate"]),
            EXIT_VALIDATION
        );
        assert_eq!(main_with_args(["wakeotp"]), EXIT_VALIDATION);
    }

    #[test]
    fn missing_file_is_io() {
        assert_eq!(
            main_with_args(["wakeotp", "validate", "/nonexistent/zzz.cfg", "--quiet"]),
            EXIT_IO
        );
    }

    #[test]
    fn builtin_fallback_validates() {
        assert_eq!(
            main_with_args(["wakeotp", "validate", "replay-attack.cfg", "--quiet"]),
            EXIT_OK
        );
    }
}
