use clap::Parser;
use postclust_cli::args::{Cli, Command};
use postclust_cli::commands;

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Cluster(args) => commands::cmd_cluster(args),
        Command::Test(args) => commands::cmd_test(args),
        Command::OracleCheck(args) => commands::cmd_oracle_check(args),
        Command::Simulate(args) => commands::cmd_simulate(args),
    };
    if let Err(e) = result {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
