//! Monte-Carlo scenarios: configuration, trial orchestration, aggregation and
//! CSV / JSON output.
//!
//! Trials run in parallel; every trial draws its channel from its own seed and
//! results are reduced in trial order, so outputs do not depend on scheduling.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{generate_channel, inject_channel_error, ChannelSet};
use crate::codebook::{make_grid, Codebook, FrequencyIndependent, IdealDictionary};
use crate::config::{config_hash, spawn_trial_rng, Preset, RunConfig, Seed};
use crate::error::{Error, Result};
use crate::precoder::{approx_mse, fully_digital, rate_of_products, sum_rate, FullyDigital};
use crate::sparse::{
    essp, find_representative_angles, lce_ssp_with_stats, projection_map, ssp_freq_independent,
};

/// Domain tag for the CSI-error stream of a trial.
const CSI_DOMAIN: u64 = 0x5C51;

/// Fraction of failed trials above which a point is reported as an error.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    FullyDigital,
    Essp,
    LceSsp,
    SspFreqIndependent,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::FullyDigital,
        Algorithm::Essp,
        Algorithm::LceSsp,
        Algorithm::SspFreqIndependent,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Algorithm::FullyDigital => "fully_digital",
            Algorithm::Essp => "essp",
            Algorithm::LceSsp => "lce_ssp",
            Algorithm::SspFreqIndependent => "ssp_freq_independent",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.tag())
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.tag() == s)
            .ok_or_else(|| Error::InvalidParameter {
                name: "algorithm",
                reason: format!("unknown algorithm `{s}`"),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    SnrDb,
    SigmaThetaDeg,
    NTtd,
    FractionalBandwidth,
    ChannelNmseDb,
    KPrime,
}

impl SweepAxis {
    pub fn tag(self) -> &'static str {
        match self {
            SweepAxis::SnrDb => "snr_db",
            SweepAxis::SigmaThetaDeg => "sigma_theta_deg",
            SweepAxis::NTtd => "n_ttd",
            SweepAxis::FractionalBandwidth => "fractional_bandwidth",
            SweepAxis::ChannelNmseDb => "channel_nmse_db",
            SweepAxis::KPrime => "k_prime",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

/// Everything that defines one Monte-Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub config: RunConfig,
    pub algorithms: Vec<Algorithm>,
    pub sweep: Sweep,
    pub trials: usize,
    pub master_seed: u64,
    /// Channel-estimation NMSE in dB applied at every point; `None` is perfect CSI.
    pub csi_nmse_db: Option<f64>,
}

/// Scenario keys besides the `[system]`, `[clusters]` and `[lce]` tables.
#[derive(Debug, Deserialize)]
struct ScenarioFile {
    preset: Option<Preset>,
    algorithms: Option<Vec<Algorithm>>,
    sweep: Option<Sweep>,
    trials: Option<usize>,
    master_seed: Option<u64>,
    csi_nmse_db: Option<f64>,
}

impl Scenario {
    pub fn from_preset(preset: Preset) -> Self {
        let config = RunConfig::from_preset(preset);
        Scenario {
            sweep: Sweep {
                axis: SweepAxis::SnrDb,
                values: vec![config.system.snr_db],
            },
            config,
            algorithms: Algorithm::ALL.to_vec(),
            trials: preset.trials(),
            master_seed: 0,
            csi_nmse_db: None,
        }
    }

    /// Parses a scenario TOML. The file's `preset` key picks the base values
    /// unless `preset` is given here, which wins.
    pub fn from_toml_str(text: &str, preset: Option<Preset>) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text)?;
        let preset = preset.or(file.preset).unwrap_or(Preset::Desk);
        let config = RunConfig::from_toml_str(text, preset)?;
        let sc = Scenario {
            sweep: file.sweep.unwrap_or(Sweep {
                axis: SweepAxis::SnrDb,
                values: vec![config.system.snr_db],
            }),
            config,
            algorithms: file.algorithms.unwrap_or_else(|| Algorithm::ALL.to_vec()),
            trials: file.trials.unwrap_or(preset.trials()),
            master_seed: file.master_seed.unwrap_or(0),
            csi_nmse_db: file.csi_nmse_db,
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path, preset: Option<Preset>) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?, preset)
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.trials == 0 {
            return Err(Error::InvalidParameter {
                name: "trials",
                reason: "must be >= 1".into(),
            });
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidParameter {
                name: "algorithms",
                reason: "at least one algorithm is required".into(),
            });
        }
        if self.sweep.values.is_empty() {
            return Err(Error::InvalidParameter {
                name: "sweep.values",
                reason: "at least one value is required".into(),
            });
        }
        for &v in &self.sweep.values {
            self.point(v)?;
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }

    /// Configuration at one sweep value.
    pub fn point(&self, value: f64) -> Result<Point> {
        let mut config = self.config.clone();
        let mut nmse_db = self.csi_nmse_db;
        let as_count = |name: &'static str| -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 && value.is_finite() {
                Ok(value as usize)
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("expected a positive integer, got {value}"),
                })
            }
        };
        match self.sweep.axis {
            SweepAxis::SnrDb => config.system = config.system.with_snr_db(value),
            SweepAxis::SigmaThetaDeg => {
                config.clusters = config.clusters.clone().with_angular_spread_deg(value)
            }
            SweepAxis::NTtd => {
                config.system = config.system.clone().with_n_ttd(as_count("n_ttd")?)?
            }
            SweepAxis::FractionalBandwidth => {
                config.system = config.system.with_fractional_bandwidth(value)
            }
            SweepAxis::ChannelNmseDb => nmse_db = Some(value),
            SweepAxis::KPrime => config.lce.k_prime = as_count("k_prime")?,
        }
        config.validate()?;
        let nmse = match nmse_db {
            Some(db) if db.is_finite() => 10f64.powf(db / 10.0),
            Some(db) if db == f64::NEG_INFINITY => 0.0,
            Some(db) => {
                return Err(Error::InvalidParameter {
                    name: "channel_nmse_db",
                    reason: format!("must be finite or -inf, got {db}"),
                })
            }
            None => 0.0,
        };
        Ok(Point {
            value,
            config,
            csi_nmse: nmse,
        })
    }
}

/// One sweep point, fully resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub value: f64,
    pub config: RunConfig,
    /// Linear channel-estimation NMSE (0 for perfect CSI).
    pub csi_nmse: f64,
}

/// Per-trial metrics of one algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialMetrics {
    /// Rate per subcarrier on the true channel, bits/s/Hz.
    pub rate: f64,
    pub mse: f64,
    pub time_ms: f64,
    pub atoms: Vec<usize>,
    /// Projected atoms (LCE-SSP only).
    pub projected_atoms: Option<usize>,
}

/// Outcomes of every trial at one sweep point, in trial order.
#[derive(Debug, Clone)]
pub struct PointOutcome {
    pub value: f64,
    pub codebook_error: f64,
    pub trials: Vec<Vec<(Algorithm, std::result::Result<TrialMetrics, String>)>>,
}

impl PointOutcome {
    /// Successful metrics of `alg`, indexed by trial (None where it failed).
    pub fn metrics(&self, alg: Algorithm) -> Vec<Option<&TrialMetrics>> {
        self.trials
            .iter()
            .map(|t| {
                t.iter()
                    .find(|(a, _)| *a == alg)
                    .and_then(|(_, r)| r.as_ref().ok())
            })
            .collect()
    }

    /// Rates of `alg` per trial; panics if any trial failed.
    pub fn rates(&self, alg: Algorithm) -> Vec<f64> {
        self.metrics(alg)
            .into_iter()
            .map(|m| m.expect("trial succeeded").rate)
            .collect()
    }
}

/// Channels seen by the solvers (estimate) and by the rate metric (truth).
pub struct TrialChannels {
    pub truth: ChannelSet,
    pub estimate: ChannelSet,
}

pub fn trial_channels(point: &Point, seed: Seed) -> Result<TrialChannels> {
    let truth = generate_channel(&point.config.system, &point.config.clusters, seed);
    let estimate = if point.csi_nmse > 0.0 {
        let mut rng = spawn_trial_rng(seed.derive(CSI_DOMAIN));
        inject_channel_error(&truth, point.csi_nmse, &mut rng)?
    } else {
        truth.clone()
    };
    Ok(TrialChannels { truth, estimate })
}

/// Solves one algorithm on the estimated channel and scores it on the truth.
pub fn solve_trial(
    alg: Algorithm,
    point: &Point,
    codebook: &Codebook,
    narrowband: &FrequencyIndependent,
    chans: &TrialChannels,
    fd: &FullyDigital,
) -> Result<TrialMetrics> {
    let cfg = &point.config.system;
    let start = Instant::now();
    let (analog, digital, atoms, projected) = match alg {
        Algorithm::FullyDigital => {
            let fd = fully_digital(&chans.estimate, cfg)?;
            let time_ms = start.elapsed().as_secs_f64() * 1e3;
            let rate = rate_of_products(&chans.truth.h, &fd.f, cfg)?.per_subcarrier;
            return Ok(TrialMetrics {
                rate,
                mse: 0.0,
                time_ms,
                atoms: vec![],
                projected_atoms: None,
            });
        }
        Algorithm::Essp => {
            let s = essp(codebook, fd, &chans.estimate, cfg)?;
            (s.analog, s.digital, s.atom_indices, None)
        }
        Algorithm::LceSsp => {
            let (s, sel) =
                lce_ssp_with_stats(codebook, fd, &chans.estimate, cfg, &point.config.lce)?;
            (
                s.analog,
                s.digital,
                s.atom_indices,
                Some(sel.projected_atoms),
            )
        }
        Algorithm::SspFreqIndependent => {
            let s = ssp_freq_independent(narrowband, fd, &chans.estimate, cfg)?;
            (s.analog, s.digital, s.atom_indices, None)
        }
    };
    let time_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(TrialMetrics {
        rate: sum_rate(&chans.truth, &analog, &digital, cfg)?.per_subcarrier,
        mse: approx_mse(fd, &analog, &digital),
        time_ms,
        atoms,
        projected_atoms: projected,
    })
}

/// Runs all trials at one sweep point.
pub fn run_point(sc: &Scenario, value: f64) -> Result<PointOutcome> {
    let point = sc.point(value)?;
    let cfg = &point.config.system;
    let codebook = Codebook::build(cfg, point.config.lce.g)?;
    let codebook_error = codebook.error()?;
    let narrowband = FrequencyIndependent::new(make_grid(point.config.lce.g), cfg);
    let trials = (0..sc.trials as u64)
        .into_par_iter()
        .map(|t| {
            let seed = Seed::new(sc.master_seed, t);
            let prepared = trial_channels(&point, seed)
                .and_then(|c| fully_digital(&c.estimate, cfg).map(|fd| (c, fd)));
            sc.algorithms
                .iter()
                .map(|&alg| {
                    let r = match &prepared {
                        Ok((chans, fd)) => {
                            solve_trial(alg, &point, &codebook, &narrowband, chans, fd)
                        }
                        Err(e) => Err(Error::InvalidParameter {
                            name: "channel",
                            reason: e.to_string(),
                        }),
                    };
                    (alg, r.map_err(|e| e.to_string()))
                })
                .collect()
        })
        .collect();
    Ok(PointOutcome {
        value,
        codebook_error,
        trials,
    })
}

/// Aggregated metrics of one (algorithm, sweep value).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub algorithm: Algorithm,
    pub axis: SweepAxis,
    pub value: f64,
    /// Successful trials.
    pub trials: usize,
    pub failed: usize,
    pub rate_mean: f64,
    pub rate_stderr: f64,
    pub mse_mean: f64,
    pub time_ms_mean: f64,
    pub codebook_error: f64,
}

/// Mean and standard error (sample standard deviation over `sqrt(n)`).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Reduces one point to rows, failing if too many trials of an algorithm failed.
pub fn aggregate(sc: &Scenario, out: &PointOutcome) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for &alg in &sc.algorithms {
        let mut ok = Vec::new();
        let mut first_err = None;
        for t in &out.trials {
            for (a, r) in t {
                if *a != alg {
                    continue;
                }
                match r {
                    Ok(m) => ok.push(m),
                    Err(e) => {
                        first_err.get_or_insert_with(|| e.clone());
                    }
                }
            }
        }
        let failed = out.trials.len() - ok.len();
        if failed as f64 > MAX_FAILURE_FRACTION * out.trials.len() as f64 {
            return Err(Error::TooManyFailures {
                algorithm: alg.tag().to_string(),
                failed,
                trials: out.trials.len(),
                first: first_err.unwrap_or_default(),
            });
        }
        let rates: Vec<f64> = ok.iter().map(|m| m.rate).collect();
        let mses: Vec<f64> = ok.iter().map(|m| m.mse).collect();
        let times: Vec<f64> = ok.iter().map(|m| m.time_ms).collect();
        let (rate_mean, rate_stderr) = mean_stderr(&rates);
        rows.push(ResultRow {
            algorithm: alg,
            axis: sc.sweep.axis,
            value: out.value,
            trials: ok.len(),
            failed,
            rate_mean,
            rate_stderr,
            mse_mean: mean_stderr(&mses).0,
            time_ms_mean: mean_stderr(&times).0,
            codebook_error: out.codebook_error,
        });
    }
    Ok(rows)
}

/// Runs every sweep point and aggregates, one row per (algorithm, value).
pub fn run_scenario(sc: &Scenario) -> Result<Vec<ResultRow>> {
    sc.validate()?;
    let mut rows = Vec::new();
    for &v in &sc.sweep.values {
        rows.extend(aggregate(sc, &run_point(sc, v)?)?);
    }
    Ok(rows)
}

/// Same scenario swept over fractional bandwidths `f_s / f_c`.
pub fn sweep_fractional_bandwidth(base: &Scenario, values: &[f64]) -> Result<Vec<ResultRow>> {
    let mut sc = base.clone();
    sc.sweep = Sweep {
        axis: SweepAxis::FractionalBandwidth,
        values: values.to_vec(),
    };
    run_scenario(&sc)
}

/// Same scenario swept over the number of TTD lines per RF chain.
pub fn sweep_nttd(base: &Scenario, values: &[usize]) -> Result<Vec<ResultRow>> {
    let mut sc = base.clone();
    sc.sweep = Sweep {
        axis: SweepAxis::NTtd,
        values: values.iter().map(|&v| v as f64).collect(),
    };
    run_scenario(&sc)
}

pub const RESULTS_HEADER: [&str; 9] = [
    "algorithm",
    "axis",
    "value",
    "trials",
    "failed",
    "rate_mean",
    "rate_stderr",
    "mse_mean",
    "codebook_error",
];

pub const TIMING_HEADER: [&str; 5] = ["algorithm", "axis", "value", "trials", "time_ms_mean"];

/// Writes the deterministic result table (no wall-clock columns).
pub fn write_results_csv<W: std::io::Write>(rows: &[ResultRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RESULTS_HEADER)?;
    for r in rows {
        out.write_record([
            r.algorithm.tag().to_string(),
            r.axis.tag().to_string(),
            r.value.to_string(),
            r.trials.to_string(),
            r.failed.to_string(),
            r.rate_mean.to_string(),
            r.rate_stderr.to_string(),
            r.mse_mean.to_string(),
            r.codebook_error.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_timing_csv<W: std::io::Write>(rows: &[ResultRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TIMING_HEADER)?;
    for r in rows {
        out.write_record([
            r.algorithm.tag().to_string(),
            r.axis.tag().to_string(),
            r.value.to_string(),
            r.trials.to_string(),
            r.time_ms_mean.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// JSON run manifest written next to every output set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub trials: usize,
    pub outputs: Vec<String>,
    pub scenario: serde_json::Value,
    pub versions: std::collections::BTreeMap<String, String>,
}

impl Manifest {
    pub fn new<T: Serialize>(command: &str, scenario: &T, master_seed: u64, trials: usize) -> Self {
        let mut versions = std::collections::BTreeMap::new();
        versions.insert("thz-dpp".into(), env!("CARGO_PKG_VERSION").into());
        versions.insert("manifest".into(), "1".into());
        Manifest {
            tool: "dpp-bench".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: config_hash(scenario),
            master_seed,
            trials,
            outputs: vec![],
            scenario: serde_json::to_value(scenario).expect("scenario serializes"),
            versions,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }
}

/// Runs a scenario and writes `results.csv`, `timing.csv` and `manifest.json`.
pub fn run_to_dir(sc: &Scenario, dir: &Path) -> Result<Vec<ResultRow>> {
    fs::create_dir_all(dir)?;
    let rows = run_scenario(sc)?;
    write_results_csv(&rows, fs::File::create(dir.join("results.csv"))?)?;
    write_timing_csv(&rows, fs::File::create(dir.join("timing.csv"))?)?;
    let mut m = Manifest::new("run", sc, sc.master_seed, sc.trials);
    m.outputs = vec!["results.csv".into(), "timing.csv".into()];
    m.write(dir)?;
    Ok(rows)
}

/// Alignment statistics written beside the heatmaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapSummary {
    pub grid: usize,
    pub subcarriers: usize,
    /// Max minus min per-subcarrier argmax index.
    pub argmax_spread_frequency_independent: usize,
    pub argmax_spread_frequency_dependent: usize,
    pub seed: Seed,
}

/// Projection heatmaps of trial 0's fully-digital precoders against the
/// frequency-independent and the frequency-dependent (ideal) dictionaries.
pub fn emit_projection_heatmap(sc: &Scenario, dir: &Path) -> Result<HeatmapSummary> {
    fs::create_dir_all(dir)?;
    let cfg = &sc.config.system;
    let seed = Seed::new(sc.master_seed, 0);
    let ch = generate_channel(cfg, &sc.config.clusters, seed);
    let fd = fully_digital(&ch, cfg)?;
    let grid = make_grid(sc.config.lce.g);
    let atoms: Vec<usize> = (0..grid.len()).collect();
    let subs: Vec<usize> = (0..cfg.k).collect();
    let fi = projection_map(
        &FrequencyIndependent::new(grid.clone(), cfg),
        &fd.f,
        &atoms,
        &subs,
    );
    let fdep = projection_map(
        &IdealDictionary::new(grid.clone(), cfg),
        &fd.f,
        &atoms,
        &subs,
    );
    let mut outputs = Vec::new();
    for (name, map) in [
        ("frequency_independent", &fi),
        ("frequency_dependent", &fdep),
    ] {
        let heat = format!("heatmap_{name}.csv");
        let curve = format!("curve_{name}.csv");
        map.write_heatmap_csv(fs::File::create(dir.join(&heat))?)?;
        map.write_curve_csv(fs::File::create(dir.join(&curve))?)?;
        outputs.push(heat);
        outputs.push(curve);
    }
    let summary = HeatmapSummary {
        grid: grid.len(),
        subcarriers: cfg.k,
        argmax_spread_frequency_independent: fi.argmax_spread(),
        argmax_spread_frequency_dependent: fdep.argmax_spread(),
        seed,
    };
    fs::write(
        dir.join("heatmap_summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    outputs.push("heatmap_summary.json".into());
    let mut m = Manifest::new("heatmap", sc, sc.master_seed, 1);
    m.outputs = outputs;
    m.write(dir)?;
    Ok(summary)
}

/// Codebook approximation error for each TTD count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookErrorRow {
    pub n_ttd: usize,
    pub m: usize,
    pub error: f64,
}

/// Codebook error against every `n_ttd` in `values`; defaults to all divisors of `N_T`.
pub fn codebook_error_sweep(
    cfg: &RunConfig,
    values: Option<&[usize]>,
) -> Result<Vec<CodebookErrorRow>> {
    let n_t = cfg.system.n_t;
    let values: Vec<usize> = match values {
        Some(v) => v.to_vec(),
        None => (1..=n_t).filter(|d| n_t.is_multiple_of(*d)).collect(),
    };
    values
        .iter()
        .map(|&n_ttd| {
            let sys = cfg.system.clone().with_n_ttd(n_ttd)?;
            let error = Codebook::build(&sys, cfg.lce.g)?.error()?;
            Ok(CodebookErrorRow {
                n_ttd,
                m: sys.m,
                error,
            })
        })
        .collect()
}

pub fn write_codebook_error_csv<W: std::io::Write>(rows: &[CodebookErrorRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["n_ttd", "m", "codebook_error"])?;
    for r in rows {
        out.write_record([r.n_ttd.to_string(), r.m.to_string(), r.error.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Representative angles of one trial next to its clusters' mean directions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngleRow {
    pub trial: u64,
    pub rank: usize,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterRow {
    pub trial: u64,
    pub cluster: usize,
    /// Mean `sin(theta_T)` over the cluster's subpaths.
    pub mean_sin_theta_t: f64,
    /// Mean `|alpha|^2` over the cluster's subpaths.
    pub mean_power: f64,
}

pub fn representative_angles(sc: &Scenario) -> Result<(Vec<AngleRow>, Vec<ClusterRow>)> {
    sc.validate()?;
    let cfg = &sc.config;
    let per_trial: Vec<Result<(Vec<AngleRow>, Vec<ClusterRow>)>> = (0..sc.trials as u64)
        .into_par_iter()
        .map(|t| {
            let ch = generate_channel(&cfg.system, &cfg.clusters, Seed::new(sc.master_seed, t));
            let angles = find_representative_angles(&ch, &cfg.system, &cfg.lce)?;
            let a = angles
                .into_iter()
                .enumerate()
                .map(|(rank, phi)| AngleRow {
                    trial: t,
                    rank,
                    phi,
                })
                .collect();
            let c = (0..cfg.clusters.n_c)
                .map(|cl| {
                    let sps: Vec<_> = ch.subpaths.iter().filter(|s| s.cluster == cl).collect();
                    let n = sps.len().max(1) as f64;
                    ClusterRow {
                        trial: t,
                        cluster: cl,
                        mean_sin_theta_t: sps.iter().map(|s| s.sin_theta_t).sum::<f64>() / n,
                        mean_power: sps.iter().map(|s| s.alpha.norm_sqr()).sum::<f64>() / n,
                    }
                })
                .collect();
            Ok((a, c))
        })
        .collect();
    let mut angles = Vec::new();
    let mut clusters = Vec::new();
    for r in per_trial {
        let (a, c) = r?;
        angles.extend(a);
        clusters.extend(c);
    }
    Ok((angles, clusters))
}

pub fn write_serialized_csv<W: std::io::Write, T: Serialize>(rows: &[T], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}
