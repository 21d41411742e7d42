use clap::Parser;

fn main() {
    let cli = fcp_core::cli::Cli::parse();
    let command = cli.command.name();
    if let Err(e) = fcp_core::cli::run(cli) {
        eprintln!("fcp {command}: {e}");
        std::process::exit(e.exit_code());
    }
}
