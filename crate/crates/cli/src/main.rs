use clap::Parser;
use monoband_cli::{init_threads, run, Cli};

fn main() {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| run(cli));
    match result {
        Ok(msg) => println!("{msg}"),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
