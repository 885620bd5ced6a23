//! System, cluster and solver configuration plus the seeded randomness contract.
//!
//! Angles are stored in radians. In configuration files every angular field is
//! written in degrees and converted on load; the key names are the field names.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Deterministic per-trial random stream.
pub type TrialRng = ChaCha8Rng;

/// Scalar parameters of the hybrid DPP transmitter, the user and the OFDM grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SystemConfigFile")]
pub struct SystemConfig {
    /// BS antennas.
    pub n_t: usize,
    /// User antennas.
    pub n_r: usize,
    /// RF chains.
    pub n_rf: usize,
    /// Data streams.
    pub n_s: usize,
    /// TTD lines per RF chain.
    pub n_ttd: usize,
    /// Antennas per subarray (one TTD line feeds `m` phase shifters).
    pub m: usize,
    /// Central frequency in Hz.
    pub f_c: f64,
    /// Total bandwidth in Hz.
    pub f_s: f64,
    /// Number of subcarriers.
    pub k: usize,
    pub snr_db: f64,
    /// Per-subcarrier transmit power.
    pub rho: f64,
    /// Noise variance.
    pub sigma_n2: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemConfigFile {
    n_t: usize,
    n_r: usize,
    n_rf: usize,
    n_s: usize,
    n_ttd: usize,
    m: Option<usize>,
    f_c: f64,
    f_s: f64,
    k: usize,
    snr_db: f64,
    rho: Option<f64>,
    sigma_n2: Option<f64>,
}

impl TryFrom<SystemConfigFile> for SystemConfig {
    type Error = Error;

    fn try_from(f: SystemConfigFile) -> Result<Self> {
        let ratio = 10f64.powf(f.snr_db / 10.0);
        let (rho, sigma_n2) = match (f.rho, f.sigma_n2) {
            (None, None) => (ratio, 1.0),
            (Some(rho), None) => (rho, rho / ratio),
            (None, Some(s)) => (ratio * s, s),
            (Some(rho), Some(s)) => {
                let implied = 10.0 * (rho / s).log10();
                if (implied - f.snr_db).abs() > 1e-9 {
                    return Err(Error::InvalidParameter {
                        name: "snr_db",
                        reason: format!(
                            "rho/sigma_n2 implies {implied} dB, file says {}",
                            f.snr_db
                        ),
                    });
                }
                (rho, s)
            }
        };
        let m = f.m.unwrap_or(f.n_t.checked_div(f.n_ttd).unwrap_or(0));
        let cfg = SystemConfig {
            n_t: f.n_t,
            n_r: f.n_r,
            n_rf: f.n_rf,
            n_s: f.n_s,
            n_ttd: f.n_ttd,
            m,
            f_c: f.f_c,
            f_s: f.f_s,
            k: f.k,
            snr_db: f.snr_db,
            rho,
            sigma_n2,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn positive(name: &'static str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::InvalidParameter {
            name,
            reason: "must be positive".into(),
        });
    }
    Ok(())
}

fn positive_finite(name: &'static str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and > 0, got {v}"),
        });
    }
    Ok(())
}

fn non_negative_finite(name: &'static str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and >= 0, got {v}"),
        });
    }
    Ok(())
}

impl SystemConfig {
    /// Full-scale default setting: 256 antennas, 16 TTD lines, 128 subcarriers.
    pub fn paper() -> Self {
        SystemConfig {
            n_t: 256,
            n_r: 4,
            n_rf: 4,
            n_s: 4,
            n_ttd: 16,
            m: 16,
            f_c: 100e9,
            f_s: 10e9,
            k: 128,
            snr_db: 10.0,
            rho: 10.0,
            sigma_n2: 1.0,
        }
    }

    /// Scaled-down setting for fast runs: 64 antennas, 8 TTD lines, 32 subcarriers.
    pub fn desk() -> Self {
        SystemConfig {
            n_t: 64,
            n_ttd: 8,
            m: 8,
            k: 32,
            ..Self::paper()
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("n_t", self.n_t)?;
        positive("n_r", self.n_r)?;
        positive("n_rf", self.n_rf)?;
        positive("n_s", self.n_s)?;
        positive("n_ttd", self.n_ttd)?;
        positive("m", self.m)?;
        positive("k", self.k)?;
        positive_finite("f_c", self.f_c)?;
        positive_finite("f_s", self.f_s)?;
        positive_finite("rho", self.rho)?;
        positive_finite("sigma_n2", self.sigma_n2)?;
        if !self.snr_db.is_finite() {
            return Err(Error::InvalidParameter {
                name: "snr_db",
                reason: "must be finite".into(),
            });
        }
        if self.n_t != self.m * self.n_ttd {
            return Err(Error::AntennaMismatch {
                n_t: self.n_t,
                m: self.m,
                n_ttd: self.n_ttd,
            });
        }
        if self.n_s > self.n_rf {
            return Err(Error::StreamsExceedRf {
                n_s: self.n_s,
                n_rf: self.n_rf,
            });
        }
        if self.n_rf > self.n_t {
            return Err(Error::RfExceedsAntennas {
                n_rf: self.n_rf,
                n_t: self.n_t,
            });
        }
        if self.n_s > self.n_r {
            return Err(Error::StreamsExceedReceive {
                n_s: self.n_s,
                n_r: self.n_r,
            });
        }
        Ok(())
    }

    /// Sets the SNR with the `sigma_n2 = 1` convention.
    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        self.snr_db = snr_db;
        self.rho = 10f64.powf(snr_db / 10.0);
        self.sigma_n2 = 1.0;
        self
    }

    /// Re-partitions the array into `n_ttd` subarrays.
    pub fn with_n_ttd(mut self, n_ttd: usize) -> Result<Self> {
        if n_ttd == 0 || !self.n_t.is_multiple_of(n_ttd) {
            return Err(Error::InvalidParameter {
                name: "n_ttd",
                reason: format!("{n_ttd} does not divide n_t = {}", self.n_t),
            });
        }
        self.n_ttd = n_ttd;
        self.m = self.n_t / n_ttd;
        Ok(self)
    }

    pub fn with_fractional_bandwidth(mut self, fb: f64) -> Self {
        self.f_s = fb * self.f_c;
        self
    }

    /// Subcarrier spacing `f_s / k`.
    pub fn subcarrier_spacing(&self) -> f64 {
        self.f_s / self.k as f64
    }

    pub fn fractional_bandwidth(&self) -> f64 {
        self.f_s / self.f_c
    }

    /// Rate gain factor `rho / (n_s * sigma_n2)`.
    pub fn gain_factor(&self) -> f64 {
        self.rho / (self.n_s as f64 * self.sigma_n2)
    }

    /// Maximal propagation delay across the array, `(n_t - 1) / (2 f_c)`.
    pub fn beta(&self) -> f64 {
        (self.n_t as f64 - 1.0) / (2.0 * self.f_c)
    }

    /// Default TTD range bound, `2 * beta`.
    pub fn default_t_max(&self) -> f64 {
        2.0 * self.beta()
    }
}

/// Subcarrier frequencies `f_c + (k - 1 - (K-1)/2) * eta`, `k = 1..K`.
pub fn derive_subcarrier_frequencies(cfg: &SystemConfig) -> Vec<f64> {
    let eta = cfg.subcarrier_spacing();
    let half = (cfg.k as f64 - 1.0) / 2.0;
    (0..cfg.k)
        .map(|k| cfg.f_c + (k as f64 - half) * eta)
        .collect()
}

mod degrees {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(rad: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(rad.to_degrees())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(f64::deserialize(d)?.to_radians())
    }
}

/// Cluster channel statistics. Spreads are standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterConfig {
    pub n_c: usize,
    pub n_p: usize,
    /// Maximum mean cluster delay (s).
    pub tau_max: f64,
    /// Delay spread (s).
    pub sigma_tau: f64,
    /// AoD spread (rad; degrees in files).
    #[serde(with = "degrees")]
    pub sigma_theta_t: f64,
    /// AoA spread (rad; degrees in files).
    #[serde(with = "degrees")]
    pub sigma_theta_r: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            n_c: 4,
            n_p: 10,
            tau_max: 20e-9,
            sigma_tau: 1e-9,
            sigma_theta_t: 5f64.to_radians(),
            sigma_theta_r: 5f64.to_radians(),
        }
    }
}

impl ClusterConfig {
    /// Zero angular and delay spread: every cluster collapses to a single path.
    pub fn path() -> Self {
        ClusterConfig {
            sigma_tau: 0.0,
            sigma_theta_t: 0.0,
            sigma_theta_r: 0.0,
            ..Default::default()
        }
    }

    /// Sets both angular spreads.
    pub fn with_angular_spread_deg(mut self, deg: f64) -> Self {
        self.sigma_theta_t = deg.to_radians();
        self.sigma_theta_r = deg.to_radians();
        self
    }

    pub fn validate(&self) -> Result<()> {
        positive("n_c", self.n_c)?;
        positive("n_p", self.n_p)?;
        non_negative_finite("tau_max", self.tau_max)?;
        non_negative_finite("sigma_tau", self.sigma_tau)?;
        non_negative_finite("sigma_theta_t", self.sigma_theta_t)?;
        non_negative_finite("sigma_theta_r", self.sigma_theta_r)?;
        Ok(())
    }
}

/// Hyperparameters of the low-complexity solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LceConfig {
    /// Fine grid size.
    pub g: usize,
    /// Coarse grid size.
    pub g_c: usize,
    /// Refinement half-width around each coarse pick.
    pub g_a: usize,
    /// Number of exploited subcarriers.
    pub k_prime: usize,
}

impl LceConfig {
    pub fn paper() -> Self {
        LceConfig {
            g: 1024,
            g_c: 256,
            g_a: 8,
            k_prime: 4,
        }
    }

    pub fn desk() -> Self {
        LceConfig {
            g: 256,
            g_c: 64,
            g_a: 8,
            k_prime: 4,
        }
    }

    pub fn validate(&self, sys: &SystemConfig) -> Result<()> {
        positive("g", self.g)?;
        positive("g_c", self.g_c)?;
        positive("k_prime", self.k_prime)?;
        if !self.g.is_multiple_of(2) {
            return Err(Error::OddGrid { g: self.g });
        }
        if !self.g.is_multiple_of(self.g_c) {
            return Err(Error::GridRatio {
                g: self.g,
                g_c: self.g_c,
            });
        }
        if !sys.k.is_multiple_of(self.k_prime) {
            return Err(Error::SubcarrierRatio {
                k: sys.k,
                k_prime: self.k_prime,
            });
        }
        Ok(())
    }

    /// Angular resolution reduction ratio `g / g_c`.
    pub fn delta_g(&self) -> usize {
        self.g / self.g_c
    }

    /// Subcarrier reduction ratio `k / k_prime`.
    pub fn delta_k(&self, sys: &SystemConfig) -> usize {
        sys.k / self.k_prime
    }
}

/// Named parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Desk,
    Paper,
}

impl Preset {
    pub fn system(self) -> SystemConfig {
        match self {
            Preset::Desk => SystemConfig::desk(),
            Preset::Paper => SystemConfig::paper(),
        }
    }

    pub fn clusters(self) -> ClusterConfig {
        ClusterConfig::default()
    }

    pub fn lce(self) -> LceConfig {
        match self {
            Preset::Desk => LceConfig::desk(),
            Preset::Paper => LceConfig::paper(),
        }
    }

    /// Monte-Carlo trial count used with this preset.
    pub fn trials(self) -> usize {
        match self {
            Preset::Desk => 50,
            Preset::Paper => 200,
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            other => Err(Error::InvalidParameter {
                name: "preset",
                reason: format!("unknown preset `{other}` (expected desk|paper)"),
            }),
        }
    }
}

/// Identifies one Monte-Carlo trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed {
    pub master_seed: u64,
    pub trial_index: u64,
}

impl Seed {
    pub fn new(master_seed: u64, trial_index: u64) -> Self {
        Seed {
            master_seed,
            trial_index,
        }
    }

    /// A seed for an independent purpose (e.g. CSI error) within the same trial.
    pub fn derive(self, domain: u64) -> Seed {
        Seed {
            master_seed: splitmix64(self.master_seed ^ splitmix64(domain.wrapping_add(1))),
            trial_index: self.trial_index,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// ChaCha stream keyed by the master seed, with the trial index as stream id.
pub fn spawn_trial_rng(seed: Seed) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.master_seed);
    rng.set_stream(seed.trial_index);
    rng
}

/// Short hex digest of any serializable configuration.
pub fn config_hash<T: Serialize + ?Sized>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config serializes");
    let digest = Sha256::digest(&json);
    hex::encode(&digest[..8])
}

/// Recursively overlays `overlay` onto `base` (tables merge, everything else replaces).
pub fn merge_toml(base: &mut toml::Value, overlay: toml::Value) {
    match (base, overlay) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (key, value) in o {
                match b.get_mut(&key) {
                    Some(existing) => merge_toml(existing, value),
                    None => {
                        b.insert(key, value);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

/// TOML value of a system config with its derived keys (`m`, `rho`, `sigma_n2`)
/// removed, so that file overrides of `n_ttd` or `snr_db` re-derive them.
pub fn system_base_value(cfg: &SystemConfig) -> toml::Value {
    let mut v = toml::Value::try_from(cfg).expect("system config serializes");
    if let toml::Value::Table(t) = &mut v {
        t.remove("m");
        t.remove("rho");
        t.remove("sigma_n2");
    }
    v
}

/// System, cluster and solver configuration loaded together from one file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub clusters: ClusterConfig,
    pub lce: LceConfig,
}

impl RunConfig {
    pub fn from_preset(preset: Preset) -> Self {
        RunConfig {
            system: preset.system(),
            clusters: preset.clusters(),
            lce: preset.lce(),
        }
    }

    /// Parses a TOML document with optional `[system]`, `[clusters]` and `[lce]`
    /// tables, each overriding the preset key by key.
    pub fn from_toml_str(text: &str, preset: Preset) -> Result<Self> {
        let overlay: toml::Value = toml::from_str(text)?;
        let base = Self::from_preset(preset);
        let mut merged = toml::Value::Table(Default::default());
        if let toml::Value::Table(t) = &mut merged {
            t.insert("system".into(), system_base_value(&base.system));
            t.insert("clusters".into(), toml::Value::try_from(&base.clusters)?);
            t.insert("lce".into(), toml::Value::try_from(&base.lce)?);
        }
        let mut overlay = overlay;
        if let toml::Value::Table(t) = &mut overlay {
            t.remove("preset");
        }
        merge_toml(&mut merged, overlay);
        let cfg: RunConfig = merged.try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.clusters.validate()?;
        self.lce.validate(&self.system)
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }
}
