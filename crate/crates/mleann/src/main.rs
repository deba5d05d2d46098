use clap::Parser;

use mleann::cli::{self, Cli};

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    if let Err(e) = cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(cli::exit_code(&e));
    }
}
