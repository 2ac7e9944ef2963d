use std::process::ExitCode;

use clap::Parser;
use lgmml_cli::args::Cli;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap exits with status 2 on usage errors, which matches the config-error code.
    let cli = Cli::parse();
    lgmml_cli::finish(lgmml_cli::run(cli))
}
