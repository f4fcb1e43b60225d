use std::io;

use channel_ergodics_cli::{run, RunConfig};
use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cfg = RunConfig::parse();
    let code = run(&cfg, &mut io::stdout().lock(), &mut io::stderr().lock());
    std::process::exit(code);
}
