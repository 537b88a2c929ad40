use clap::Parser;

fn main() {
    let cli = sdd_cli::Cli::parse();
    if let Err(e) = sdd_cli::run(cli) {
        eprintln!("error: {}", e.message());
        std::process::exit(e.exit_code());
    }
}
