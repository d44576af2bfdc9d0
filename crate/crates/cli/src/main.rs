use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use sonotrace_cli::{parse_config, run, RunOptions, RunReport};

/// Simulates a plane-wave ultrasound acquisition of a mesh scene and writes
/// a B-mode image.
#[derive(Debug, Parser)]
#[command(name = "sonotrace", version)]
struct Args {
    /// Simulation config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Directory for the image, dumps and the resolved config.
    #[arg(long, default_value = ".")]
    output: PathBuf,
    /// Overrides trace.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; all cores by default.
    #[arg(long)]
    threads: Option<usize>,
    /// Write the traced channel data as rf.urrf.
    #[arg(long)]
    dump_rf: bool,
    /// Write counts and timings as stats.json.
    #[arg(long)]
    stats_json: bool,
}

fn print_report(r: &RunReport) {
    let t = &r.trace;
    println!(
        "scene: {} triangles; acquisition: {} events x {} elements x {} samples",
        r.triangles, r.events, r.elements, r.samples
    );
    println!(
        "rays {} deposits {} occluded {} truncated {} killed {} mean bounces {:.2} max bounces {}",
        t.rays_emitted, t.deposits, t.cancelled_occluded, t.truncated, t.killed, t.mean_bounces, t.max_bounces_observed
    );
    if r.out_of_range_pixels > 0 {
        println!("beamform: {} pixel delays fell outside the record", r.out_of_range_pixels);
    }
    for s in &r.timings {
        println!("{:>13}: {:.3} s", s.stage, s.seconds);
    }
    for p in &r.outputs {
        println!("wrote {}", p.display());
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut cfg = match parse_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: config: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    let opts = RunOptions {
        output_dir: args.output,
        dump_rf: args.dump_rf,
        stats_json: args.stats_json,
    };
    match run(&cfg, &opts) {
        Ok(report) => {
            print_report(&report);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
