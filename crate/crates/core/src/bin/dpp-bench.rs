use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thz_dpp::bench::{self, Manifest, Scenario};
use thz_dpp::config::{Preset, RunConfig};

#[derive(Parser)]
#[command(
    name = "dpp-bench",
    version,
    about = "Delay-phase precoding benchmarks"
)]
struct Cli {
    /// Master seed (overrides the scenario file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte-Carlo trials (overrides the scenario file).
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Base parameter set; overrides the file's `preset` key.
    #[arg(long, global = true)]
    preset: Option<Preset>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario sweep and write results.csv, timing.csv and manifest.json.
    Run { scenario: PathBuf },
    /// Projection heatmaps for the frequency-independent and frequency-dependent dictionaries.
    Heatmap { scenario: PathBuf },
    /// Codebook approximation error against the number of TTD lines.
    CodebookError {
        config: PathBuf,
        /// TTD counts to evaluate (default: every divisor of n_t).
        #[arg(long, value_delimiter = ',')]
        n_ttd: Option<Vec<usize>>,
    },
    /// Representative angles per trial.
    Angles { scenario: PathBuf },
    /// Run the built-in invariant checks.
    Selftest,
}

fn load(cli: &Cli, path: &Path) -> thz_dpp::Result<Scenario> {
    let mut sc = Scenario::load(path, cli.preset)?;
    if let Some(s) = cli.seed {
        sc.master_seed = s;
    }
    if let Some(t) = cli.trials {
        sc.trials = t;
    }
    sc.validate()?;
    Ok(sc)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> thz_dpp::Result<bool> {
    let out = &cli.out;
    match &cli.cmd {
        Cmd::Run { scenario } => {
            let sc = load(cli, scenario)?;
            let rows = bench::run_to_dir(&sc, out)?;
            for r in &rows {
                println!(
                    "{:<22} {}={:<8} rate {:.4} ± {:.4}  mse {:.3e}  {:.2} ms",
                    r.algorithm.tag(),
                    r.axis.tag(),
                    r.value,
                    r.rate_mean,
                    r.rate_stderr,
                    r.mse_mean,
                    r.time_ms_mean
                );
            }
            println!("wrote {}", out.display());
        }
        Cmd::Heatmap { scenario } => {
            let sc = load(cli, scenario)?;
            let s = bench::emit_projection_heatmap(&sc, out)?;
            println!(
                "argmax spread: frequency-independent {}, frequency-dependent {} (G={}, K={})",
                s.argmax_spread_frequency_independent,
                s.argmax_spread_frequency_dependent,
                s.grid,
                s.subcarriers
            );
            println!("wrote {}", out.display());
        }
        Cmd::CodebookError { config, n_ttd } => {
            let text = fs::read_to_string(config)?;
            let preset = cli
                .preset
                .or_else(|| {
                    toml::from_str::<toml::Table>(&text)
                        .ok()?
                        .get("preset")?
                        .as_str()?
                        .parse()
                        .ok()
                })
                .unwrap_or(Preset::Desk);
            let cfg = RunConfig::from_toml_str(&text, preset)?;
            let rows = bench::codebook_error_sweep(&cfg, n_ttd.as_deref())?;
            fs::create_dir_all(out)?;
            bench::write_codebook_error_csv(
                &rows,
                fs::File::create(out.join("codebook_error.csv"))?,
            )?;
            let mut m = Manifest::new("codebook-error", &cfg, 0, 0);
            m.outputs = vec!["codebook_error.csv".into()];
            m.write(out)?;
            for r in &rows {
                println!("n_ttd {:>4}  m {:>4}  error {:.6e}", r.n_ttd, r.m, r.error);
            }
        }
        Cmd::Angles { scenario } => {
            let sc = load(cli, scenario)?;
            let (angles, clusters) = bench::representative_angles(&sc)?;
            fs::create_dir_all(out)?;
            bench::write_serialized_csv(&angles, fs::File::create(out.join("angles.csv"))?)?;
            bench::write_serialized_csv(&clusters, fs::File::create(out.join("clusters.csv"))?)?;
            let mut m = Manifest::new("angles", &sc, sc.master_seed, sc.trials);
            m.outputs = vec!["angles.csv".into(), "clusters.csv".into()];
            m.write(out)?;
            println!(
                "{} angles over {} trials; wrote {}",
                angles.len(),
                sc.trials,
                out.display()
            );
        }
        Cmd::Selftest => {
            let checks = thz_dpp::selftest::run_all();
            let mut ok = true;
            for c in &checks {
                println!(
                    "{} {:<45} {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
                ok &= c.passed;
            }
            fs::create_dir_all(out)?;
            fs::write(
                out.join("selftest.json"),
                serde_json::to_string_pretty(&checks)? + "\n",
            )?;
            let mut m = Manifest::new("selftest", &(), 0, 0);
            m.outputs = vec!["selftest.json".into()];
            m.write(out)?;
            return Ok(ok);
        }
    }
    Ok(true)
}
