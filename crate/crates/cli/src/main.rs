use clap::Parser;

fn main() {
    let cli = chaosforge_cli::Cli::parse();
    if let Err(e) = chaosforge_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
