//! Command-line front end: `run`, `list`, `describe`, `selftest`.
//!
//! Exit codes: 0 pass, 1 verification failure, 2 usage or validation error,
//! 3 numeric failure.

pub mod catalog;
pub mod run;
pub mod scenario;
mod selftest;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use run::{prepare, run_text, run_validated, CheckRecord, RunOptions, RunReport};
pub use scenario::{Num, Scenario, Validated};
pub use selftest::selftest;

use crate::error::Error;

#[derive(Debug, Parser)]
#[command(name = "wavelab", version, about = "Wave equations with time-dependent coefficients: scenario runner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario file (or a bundled scenario by name).
    Run {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        tol_override: Option<f64>,
    },
    /// List bundled scenarios and the theorem-to-scenario matrix.
    List,
    /// Describe a theorem check by id.
    Describe { theorem_id: String },
    /// Quick internal consistency checks.
    Selftest {
        #[arg(long)]
        threads: Option<usize>,
    },
}

/// Resolves `--scenario`: an existing path, else a bundled name.
pub fn load_scenario_text(arg: &str) -> Result<String, Error> {
    let path = std::path::Path::new(arg);
    if path.exists() {
        return Ok(std::fs::read_to_string(path)?);
    }
    catalog::find(arg)
        .map(str::to_string)
        .ok_or_else(|| Error::config("--scenario", format!("'{arg}' is neither a file nor a bundled scenario")))
}

/// Runs the CLI on `args` and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match cli.command {
        Command::Run {
            scenario,
            out,
            threads,
            tol_override,
        } => {
            let text = match load_scenario_text(&scenario) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {e}");
                    return 2;
                }
            };
            let v = match prepare(&text, tol_override) {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("error: {e}");
                    return 2;
                }
            };
            let opts = RunOptions {
                out,
                threads,
                tol_override,
            };
            match run_validated(&v, &opts) {
                Ok(report) => {
                    print_summary(&report);
                    report.exit_code()
                }
                Err(e @ Error::Config { .. }) => {
                    eprintln!("error: {e}");
                    2
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    if e.is_numeric() {
                        3
                    } else {
                        1
                    }
                }
            }
        }
        Command::List => {
            print!("{}", catalog::list());
            0
        }
        Command::Describe { theorem_id } => match catalog::describe(&theorem_id) {
            Ok(s) => {
                print!("{s}");
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                2
            }
        },
        Command::Selftest { threads } => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.unwrap_or(0)).build();
            match pool {
                Ok(p) => {
                    if p.install(selftest) {
                        0
                    } else {
                        1
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    2
                }
            }
        }
    }
}

fn print_summary(r: &RunReport) {
    println!("scenario {}", r.scenario);
    for a in &r.analyses {
        match &a.error {
            Some(e) => println!("  {:<20} ERROR {e}", a.kind),
            None => println!("  {:<20} ok   {}", a.kind, a.files.join(" ")),
        }
    }
    for v in &r.verifications {
        println!(
            "  {} {:<20} {:<16} predicted {:.4} fitted {:.4} r2 {:.4}",
            if v.pass { "PASS" } else { "FAIL" },
            v.theorem_id.as_str(),
            v.quantity,
            v.predicted,
            v.fitted,
            v.r2
        );
    }
    for c in &r.checks {
        println!(
            "  {} {:<36} {:.6e} {} {:.3e} {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.relation,
            c.threshold,
            c.note
        );
    }
    println!("{} ({:.1} s)", if r.pass { "PASS" } else { "FAIL" }, r.wall_time_s);
}
