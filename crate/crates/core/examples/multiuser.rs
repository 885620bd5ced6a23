//! Four single-antenna users: zero-forcing fully-digital precoding against
//! the hybrid precoder with a growing number of RF chains.

use thz_dpp::codebook::Codebook;
use thz_dpp::config::{ClusterConfig, Preset, Seed, SystemConfig};
use thz_dpp::multiuser::{
    generate_multiuser, multiuser_essp, multiuser_rate, multiuser_rate_of_products,
    zf_fully_digital,
};

pub fn run_example() -> thz_dpp::Result<()> {
    let n_u = 4;
    let base = SystemConfig {
        n_r: n_u,
        n_s: n_u,
        ..Preset::Desk.system()
    };
    let cb = Codebook::build(&base, Preset::Desk.lce().g)?;
    let mu = generate_multiuser(&base, &ClusterConfig::default(), n_u, Seed::new(13, 0));
    let fd = zf_fully_digital(&mu, &base)?;
    let r_fd = multiuser_rate_of_products(&mu.h, &fd.f, n_u, &base)?.per_subcarrier;
    println!("zero-forcing        {r_fd:.3} bits/s/Hz");
    for n_rf in [4, 8, 16] {
        let cfg = SystemConfig {
            n_rf,
            ..base.clone()
        };
        let sol = multiuser_essp(&cb, &mu, &fd, &cfg)?;
        let r = multiuser_rate(&mu, &sol.analog, &sol.digital, &cfg)?.per_subcarrier;
        println!(
            "hybrid, {n_rf:>2} chains  {r:.3} bits/s/Hz ({:.1}% of ZF)",
            100.0 * r / r_fd
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
