use clap::Parser;
use qantenna_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(artifacts) => {
            for f in &artifacts.files {
                println!("{}", f.display());
            }
        }
        Err(e) => {
            eprintln!("error: {} stage: {e}", cli.command.name());
            std::process::exit(e.exit_code());
        }
    }
}
