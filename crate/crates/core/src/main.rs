mod cli;

use clap::Parser;

fn main() {
    std::process::exit(cli::run(cli::Cli::parse()));
}
