//! A small scenario parsed from TOML, swept over SNR, written out as CSV
//! plus a JSON manifest.

use thz_dpp::bench::{run_to_dir, Scenario};

const SCENARIO: &str = r#"
preset = "desk"
master_seed = 5
trials = 4
algorithms = ["fully_digital", "lce_ssp"]

[system]
k = 16

[sweep]
axis = "snr_db"
values = [0.0, 10.0, 20.0]
"#;

pub fn run_example() -> thz_dpp::Result<()> {
    let sc = Scenario::from_toml_str(SCENARIO, None)?;
    let dir = std::env::temp_dir().join(format!("thz-dpp-sweep-{}", std::process::id()));
    let rows = run_to_dir(&sc, &dir)?;
    for r in &rows {
        println!(
            "{:<14} snr {:>4} dB  {:.3} ± {:.3}",
            r.algorithm, r.value, r.rate_mean, r.rate_stderr
        );
    }
    println!("wrote {}", dir.display());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
