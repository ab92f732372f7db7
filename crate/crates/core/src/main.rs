use clap::Parser;

use padiclf::cli::{run, Cli};

fn main() {
    if let Some(n) = std::env::var("PADICLF_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        padiclf::exec::init_threads(n.max(1));
    }
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    if let Err(e) = run(cli, &mut lock) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
