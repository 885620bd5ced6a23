//! Beam split on one wideband path: the phase-only dictionary's best atom
//! drifts across subcarriers, the frequency-scaled one stays put.

use thz_dpp::channel::{assemble_channels, Subpath};
use thz_dpp::codebook::{make_grid, FrequencyIndependent, IdealDictionary};
use thz_dpp::config::SystemConfig;
use thz_dpp::linalg::c;
use thz_dpp::precoder::fully_digital;
use thz_dpp::sparse::projection_map;

pub fn run_example() -> thz_dpp::Result<()> {
    let cfg = SystemConfig::desk().with_fractional_bandwidth(0.2);
    let path = Subpath {
        alpha: c(1.0, 0.0),
        tau: 0.0,
        sin_theta_t: 0.6,
        sin_theta_r: 0.6,
        cluster: 0,
    };
    let ch = assemble_channels(&[path], &cfg);
    let fd = fully_digital(&ch, &cfg)?;

    let grid = make_grid(256);
    let atoms: Vec<usize> = (0..grid.len()).collect();
    let subs: Vec<usize> = (0..cfg.k).collect();
    let fi = projection_map(
        &FrequencyIndependent::new(grid.clone(), &cfg),
        &fd.f,
        &atoms,
        &subs,
    );
    let fdep = projection_map(
        &IdealDictionary::new(grid.clone(), &cfg),
        &fd.f,
        &atoms,
        &subs,
    );

    println!("subcarrier  phase-only phi  frequency-scaled phi");
    for k in (0..cfg.k).step_by(4) {
        println!(
            "{k:>10}  {:>14.4}  {:>20.4}",
            grid.phi[fi.argmax_at(k)],
            grid.phi[fdep.argmax_at(k)]
        );
    }
    println!(
        "argmax spread over {} subcarriers: phase-only {}, frequency-scaled {}",
        cfg.k,
        fi.argmax_spread(),
        fdep.argmax_spread()
    );
    assert!(fi.argmax_spread() > fdep.argmax_spread());
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
