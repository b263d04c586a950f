use clap::Parser;

use kscontrol_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            for line in &summary.lines {
                println!("{line}");
            }
            println!("outputs written to {}", summary.output_dir.display());
        }
        Err(e) => {
            eprintln!("kscontrol: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
