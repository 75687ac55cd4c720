use clap::Parser;
use vtrec::cli::Cli;

fn main() {
    // clap already exits 2 on malformed invocations.
    if let Err(e) = Cli::parse().run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
