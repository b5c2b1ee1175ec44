// SPDX-License-Identifier: MIT OR Apache-2.0

use clap::Parser;
use instprobe_cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
        }
        Err(e) => {
            eprintln!("instprobe: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
