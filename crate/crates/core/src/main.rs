use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rootlip::cli;

#[derive(Parser)]
#[command(name = "rootlip", version, about = "Degenerate heat equation laboratory")]
struct Args {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario: `[--config FILE] [--dotted.key value]...`
    Run {
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        args: Vec<String>,
    },
    /// Print the resolved config without running it.
    Config {
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        args: Vec<String>,
    },
    /// List scenario kinds and initial-condition families.
    List,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { cli::EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = match args.cmd {
        Cmd::Run { args } => cli::run(&args),
        Cmd::Config { args } => match cli::parse_overrides(&args).and_then(|(f, ov)| cli::resolve_config(f.as_deref(), &ov)) {
            Ok(c) => match c.to_json() {
                Ok(s) => {
                    print!("{s}");
                    0
                }
                Err(e) => {
                    eprintln!("{e}");
                    cli::EXIT_CONFIG
                }
            },
            Err(e) => {
                eprintln!("config error: {e}");
                cli::EXIT_CONFIG
            }
        },
        Cmd::List => {
            print!("{}", cli::list_scenarios());
            0
        }
    };
    ExitCode::from(code as u8)
}
