use clap::Parser;
use symprod_cli::{exit, run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SYMPROD_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => std::process::exit(exit::OK),
        Err(e) => {
            eprintln!("symprod: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
