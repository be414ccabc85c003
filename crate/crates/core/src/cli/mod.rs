//! `speclab` command-line driver.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success, all checks passed |
//! | 1 | an invariant check failed (reports are still written) |
//! | 2 | usage error; the message names the offending field |
//! | 3 | numerical failure inside the library |
//! | 4 | I/O failure writing reports or tables |

mod commands;
mod config;
mod report;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;

use clap::{Arg, ArgAction};

pub use config::{Command, RunConfig, SETTINGS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVARIANT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug)]
pub struct UsageError {
    pub field: &'static str,
    pub message: String,
}

impl UsageError {
    pub fn new(field: &'static str, message: impl Into<String>) -> Self {
        UsageError {
            field,
            message: message.into(),
        }
    }
}

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid `{}`: {}", self.field, self.message)
    }
}

#[derive(Debug)]
pub enum Failure {
    Usage(UsageError),
    /// a library cross-check tripped before a report could be assembled
    Invariant(speclab::Error),
    Numerical(speclab::Error),
    Io(String),
}

impl From<UsageError> for Failure {
    fn from(e: UsageError) -> Self {
        Failure::Usage(e)
    }
}

impl From<speclab::Error> for Failure {
    fn from(e: speclab::Error) -> Self {
        match e {
            speclab::Error::Io { .. } => Failure::Io(e.to_string()),
            speclab::Error::InvalidParameter { name, reason } => Failure::Usage(UsageError::new(name, reason)),
            speclab::Error::CrossValidation { .. } => Failure::Invariant(e),
            e => Failure::Numerical(e),
        }
    }
}

fn cli() -> clap::Command {
    let mut cmd = clap::Command::new("speclab")
        .about("Finite cosine kernel workbench: potential, structure functions, bound states, scattering, expansions")
        .arg(
            Arg::new("command")
                .required(true)
                .value_parser(Command::ALL.map(|(n, _)| n))
                .help("what to compute"),
        )
        .arg(Arg::new("config").long("config").value_name("FILE").help("flat key=value file; flags win"));
    for s in SETTINGS {
        let help = if s.default.is_empty() {
            s.doc.to_string()
        } else {
            format!("{} [default: {}]", s.doc, s.default)
        };
        cmd = cmd.arg(Arg::new(s.key).long(s.key).value_name("VALUE").action(ArgAction::Set).allow_hyphen_values(true).help(help));
    }
    cmd
}

/// Parse arguments and run; returns the process exit code.
pub fn main_with(args: impl IntoIterator<Item = OsString>) -> i32 {
    let m = match cli().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let name = m.get_one::<String>("command").unwrap();
    let command = Command::ALL.iter().find(|(n, _)| n == name).unwrap().1;
    let mut flags = BTreeMap::new();
    for s in SETTINGS {
        if let Some(v) = m.get_one::<String>(s.key) {
            flags.insert(s.key.to_string(), v.clone());
        }
    }
    let result = (|| -> Result<bool, Failure> {
        let file = match m.get_one::<String>("config") {
            Some(p) => config::parse_config_file(p.as_ref())?,
            None => BTreeMap::new(),
        };
        let cfg = config::resolve(command, &flags, &file, config::env_cache())?;
        commands::run(&cfg)
    })();
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_INVARIANT,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
        Err(Failure::Invariant(e)) => {
            eprintln!("error: {e}");
            EXIT_INVARIANT
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("error: {e}");
            EXIT_NUMERICAL
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            EXIT_IO
        }
    }
}
