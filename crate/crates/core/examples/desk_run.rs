//! Runs the desk-scale synthetic experiment and prints the framework table.
//!
//! `cargo run --release --example desk_run -- [key=value ...]`

use einv::config::ExperimentConfig;
use einv::ident::format_framework_table;
use einv::pipeline::run_synthetic;

fn main() {
    let mut cfg = ExperimentConfig::desk();
    for arg in std::env::args().skip(1) {
        let (k, v) = arg.split_once('=').expect("arguments are key=value");
        cfg.set(k, v).expect("valid override");
    }
    let start = std::time::Instant::now();
    let out = run_synthetic::<f64>(&cfg).expect("experiment");
    print!("{}", format_framework_table(&out.reports, Some(cfg.seed)));
    println!("neutral pull rate: {:.3}", out.neutral_pull_rate);
    let last = out.system.trace.last().expect("trace");
    println!("einv val mse: {:.4} -> {:.4}", out.system.trace[0].val_mse, last.val_mse);
    println!("elapsed: {:.1} s", start.elapsed().as_secs_f64());
}
