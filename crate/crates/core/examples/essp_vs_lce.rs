//! E-SSP against its low-complexity variant and the phase-only baseline on a
//! handful of cluster channels.

use std::time::Instant;

use thz_dpp::codebook::{make_grid, Codebook, FrequencyIndependent};
use thz_dpp::config::{ClusterConfig, Preset, Seed};
use thz_dpp::precoder::{fully_digital, rate_of_products, sum_rate};
use thz_dpp::sparse::{essp, lce_ssp_with_stats, ssp_freq_independent};

pub fn run_example() -> thz_dpp::Result<()> {
    let cfg = Preset::Desk.system();
    let lce = Preset::Desk.lce();
    let cb = Codebook::build(&cfg, lce.g)?;
    let fi = FrequencyIndependent::new(make_grid(lce.g), &cfg);

    let trials = 5;
    let mut sums = [0.0; 4];
    let mut times = [0.0; 3];
    let mut projected = 0;
    for t in 0..trials {
        let ch =
            thz_dpp::channel::generate_channel(&cfg, &ClusterConfig::default(), Seed::new(7, t));
        let fd = fully_digital(&ch, &cfg)?;
        sums[0] += rate_of_products(&ch.h, &fd.f, &cfg)?.per_subcarrier;

        let start = Instant::now();
        let e = essp(&cb, &fd, &ch, &cfg)?;
        times[0] += start.elapsed().as_secs_f64();
        sums[1] += sum_rate(&ch, &e.analog, &e.digital, &cfg)?.per_subcarrier;

        let start = Instant::now();
        let (l, sel) = lce_ssp_with_stats(&cb, &fd, &ch, &cfg, &lce)?;
        times[1] += start.elapsed().as_secs_f64();
        sums[2] += sum_rate(&ch, &l.analog, &l.digital, &cfg)?.per_subcarrier;
        projected += sel.projected_atoms;

        let start = Instant::now();
        let p = ssp_freq_independent(&fi, &fd, &ch, &cfg)?;
        times[2] += start.elapsed().as_secs_f64();
        sums[3] += sum_rate(&ch, &p.analog, &p.digital, &cfg)?.per_subcarrier;
    }
    let n = trials as f64;
    println!("fully digital         {:.3} bits/s/Hz", sums[0] / n);
    for (i, name) in ["E-SSP", "LCE-SSP", "phase-only SSP"].iter().enumerate() {
        println!(
            "{name:<20}  {:.3} bits/s/Hz  {:.2} ms",
            sums[i + 1] / n,
            1e3 * times[i] / n
        );
    }
    println!(
        "LCE-SSP projected {:.0} of {} atoms on {} of {} subcarriers",
        projected as f64 / n,
        lce.g,
        lce.k_prime,
        cfg.k
    );
    assert!(sums[1] <= sums[0] && sums[3] < sums[1]);
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
