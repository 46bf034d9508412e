use clap::Parser;
use robustmix::cli::commands::{execute, Cli};

fn main() {
    if let Some(n) = std::env::var("ROBUSTMIX_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // A failure only means a pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cli = Cli::parse();
    if let Err(e) = execute(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
