//! How well the shared-TTD codebook tracks the ideal frequency-scaled
//! dictionary as the number of TTD lines grows.

use thz_dpp::bench::codebook_error_sweep;
use thz_dpp::config::{Preset, RunConfig};

pub fn run_example() -> thz_dpp::Result<()> {
    let cfg = RunConfig::from_preset(Preset::Desk);
    let rows = codebook_error_sweep(&cfg, Some(&[1, 2, 4, 8, 16, 32, 64]))?;
    println!("n_ttd    m   codebook error");
    for r in &rows {
        println!("{:>5} {:>4}   {:.3e}", r.n_ttd, r.m, r.error);
    }
    // One antenna per TTD line reproduces the ideal dictionary.
    assert!(rows.last().unwrap().error < 1e-12);
    assert!(rows.windows(2).all(|w| w[1].error <= w[0].error));
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
