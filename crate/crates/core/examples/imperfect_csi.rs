//! LCE-SSP designed on an estimated channel and evaluated on the true one,
//! for several estimation-error levels.

use thz_dpp::channel::{channel_nmse, generate_channel, inject_channel_error};
use thz_dpp::codebook::Codebook;
use thz_dpp::config::{spawn_trial_rng, ClusterConfig, Preset, Seed};
use thz_dpp::precoder::{fully_digital, sum_rate};
use thz_dpp::sparse::lce_ssp;

pub fn run_example() -> thz_dpp::Result<()> {
    let cfg = Preset::Desk.system();
    let lce = Preset::Desk.lce();
    let cb = Codebook::build(&cfg, lce.g)?;
    let trials = 5;
    println!("nmse_db  measured_db  rate");
    for nmse_db in [-20.0, -10.0, -5.0, 0.0] {
        let nmse = 10f64.powf(nmse_db / 10.0);
        let (mut rate, mut measured) = (0.0, 0.0);
        for t in 0..trials {
            let seed = Seed::new(17, t);
            let truth = generate_channel(&cfg, &ClusterConfig::default(), seed);
            let est = inject_channel_error(&truth, nmse, &mut spawn_trial_rng(seed.derive(1)))?;
            measured += channel_nmse(&est, &truth);
            let fd = fully_digital(&est, &cfg)?;
            let sol = lce_ssp(&cb, &fd, &est, &cfg, &lce)?;
            rate += sum_rate(&truth, &sol.analog, &sol.digital, &cfg)?.per_subcarrier;
        }
        let n = trials as f64;
        println!(
            "{nmse_db:>7} {:>12.2} {:>5.3}",
            10.0 * (measured / n).log10(),
            rate / n
        );
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
