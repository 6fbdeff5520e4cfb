use clap::Parser;
use morphoscope_cli::error::EXIT_USAGE;
use morphoscope_cli::{run, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(&cli) {
        eprintln!("morphoscope: {e}");
        std::process::exit(e.exit_code());
    }
}
