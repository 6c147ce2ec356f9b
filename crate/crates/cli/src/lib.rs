//! Command-line front end for `conv-memsim`.
//!
//! [`main_with`] runs one invocation against arbitrary writers and returns
//! the process exit code: 0 success, 1 failed validation, 2 usage or
//! configuration error, 3 capacity exceeded.

pub mod args;
mod commands;
pub mod sweep;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;
use conv_memsim::costmodel::Violation;
use conv_memsim::general::{conflict_free_pad, GeneralConfig};
use conv_memsim::memsim::MemModel;
use conv_memsim::special::SpecialConfig;
use conv_memsim::{FilterBank, Image};

pub use args::{Cli, Command, KernelKind};
pub use commands::{cmd_oracle, cmd_run, cmd_sweep, cmd_validate};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CAPACITY: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("spec line {line}: {msg}")]
    Spec { line: usize, msg: String },
    #[error(transparent)]
    Core(#[from] conv_memsim::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(conv_memsim::Error::Capacity { .. }) => EXIT_CAPACITY,
            _ => EXIT_USAGE,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Parses `argv` (program name first) and runs the command.
pub fn main_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let result = match &cli.command {
        Command::Oracle(a) => cmd_oracle(a, out),
        Command::Run(a) => cmd_run(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Validate(a) => cmd_validate(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            if let CliError::Core(conv_memsim::Error::Invalid(v)) = &e {
                let _ = writeln!(err, "error: invalid configuration");
                for x in v {
                    let _ = writeln!(err, "  {x}");
                }
            } else {
                let _ = writeln!(err, "error: {e}");
            }
            e.exit_code()
        }
    }
}

pub fn build_model(m: &args::ModelArgs) -> CliResult<MemModel> {
    Ok(MemModel::new(m.bank_width, m.elem_width)?)
}

fn need(v: Option<usize>, flag: &str, kernel: &str) -> CliResult<usize> {
    v.ok_or_else(|| CliError::Usage(format!("--{flag} is required for the {kernel} kernel")))
}

pub fn special_config(c: &args::ConfigArgs, model: &MemModel) -> CliResult<SpecialConfig> {
    let mut cfg = SpecialConfig::new(
        need(c.w, "W", "special")?,
        need(c.h, "H", "special")?,
        c.n.unwrap_or(model.n() as usize),
    );
    cfg.prefetch = !c.no_prefetch;
    Ok(cfg)
}

pub fn general_config(c: &args::ConfigArgs, model: &MemModel) -> CliResult<GeneralConfig> {
    let f_tb = need(c.f_tb, "F_TB", "general")?;
    Ok(GeneralConfig {
        w: need(c.w, "W", "general")?,
        h: need(c.h, "H", "general")?,
        f_tb,
        w_t: need(c.w_t, "W_T", "general")?,
        f_t: need(c.f_t, "F_T", "general")?,
        c_sh: need(c.c_sh, "C_SH", "general")?,
        pad: c.pad.unwrap_or_else(|| conflict_free_pad(f_tb, model.n() as usize)),
    })
}

/// The seeded problem behind `--gen N,C,K,F --seed S`: image from `seed`,
/// filters from `seed + 1`.
pub fn generate_problem(n: usize, c: usize, k: usize, f: usize, seed: u64) -> CliResult<(Image, FilterBank)> {
    Ok((
        Image::generate(c, n, seed)?,
        FilterBank::generate(f, c, k, seed.wrapping_add(1))?,
    ))
}

fn violation_lines(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
