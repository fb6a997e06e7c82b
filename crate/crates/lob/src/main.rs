use clap::Parser;

fn main() {
    let cli = lob::cli::Cli::parse();
    if let Err(e) = lob::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
