//! Representative angles recovered from the channel next to the clusters'
//! mean directions. The matched beam sits at -sin(theta).

use thz_dpp::channel::generate_channel;
use thz_dpp::config::{ClusterConfig, Preset, Seed};
use thz_dpp::sparse::find_representative_angles;

pub fn run_example() -> thz_dpp::Result<()> {
    let cfg = Preset::Desk.system();
    let lce = Preset::Desk.lce();
    let cc = ClusterConfig::path();
    let ch = generate_channel(&cfg, &cc, Seed::new(11, 0));
    let angles = find_representative_angles(&ch, &cfg, &lce)?;

    let mut paths: Vec<f64> = ch.subpaths.iter().map(|s| -s.sin_theta_t).collect();
    paths.sort_by(f64::total_cmp);
    paths.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    println!("-sin(theta) of the paths: {paths:.4?}");
    println!("representative angles:    {angles:.4?}");

    let step = 2.0 / lce.g as f64;
    for phi in &angles {
        let nearest = paths
            .iter()
            .map(|p| (p - phi).abs())
            .fold(f64::INFINITY, f64::min);
        println!(
            "phi {phi:+.4}: nearest path {:.1} grid steps away",
            nearest / step
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
