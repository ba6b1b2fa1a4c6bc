#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;

use std::fs;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use clap::Parser;
use dunkl_core::Error;

use args::{Cli, Command};

const EXIT_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Domain(_) | Error::Parity(_) | Error::Regime(_) | Error::Config(_) => EXIT_USAGE,
        _ => EXIT_FAILED,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let c = &cli.common;
    let result = match &cli.command {
        Command::Density(a) => commands::density(c, a),
        Command::Gbf(a) => commands::gbf(c, a),
        Command::Hermite(a) => commands::hermite(c, a),
        Command::Simulate(a) => commands::simulate(c, a),
        Command::Hitting(a) => commands::hitting(c, a),
        Command::Validate(a) => commands::validate(c, a),
    };
    let out = match result {
        Ok(out) => out,
        Err(e) => {
            eprintln!("dunkl: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    // output is written only once the command has fully succeeded
    let written = match &c.out {
        Some(path) => fs::write(path, &out.text),
        None => {
            let mut w = BufWriter::new(io::stdout().lock());
            w.write_all(out.text.as_bytes()).and_then(|_| w.flush())
        }
    };
    if let Err(e) = written {
        eprintln!("dunkl: cannot write output: {e}");
        return ExitCode::from(EXIT_FAILED);
    }
    if out.failed {
        ExitCode::from(EXIT_FAILED)
    } else {
        ExitCode::SUCCESS
    }
}
