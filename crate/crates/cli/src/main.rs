use clap::Parser;

fn main() {
    let cli = vdgp_cli::Cli::parse();
    if let Err(e) = vdgp_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
