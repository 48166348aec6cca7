use clap::Parser;

fn main() {
    let cli = bodba_harness::cli::Cli::parse();
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = bodba_harness::cli::execute(cli, &mut stdout) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
