//! Wideband THz cluster channels with beam split.
//!
//! Every subpath's equivalent angle at subcarrier `k` is `(f_k / f_c) sin(theta)`
//! on both ends of the link, so a single physical direction lands on different
//! spatial frequencies across the band.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{
    config_hash, derive_subcarrier_frequencies, spawn_trial_rng, ClusterConfig, Seed, SystemConfig,
    TrialRng,
};
use crate::error::{Error, Result};
use crate::linalg::{cis, CMat, CVec};

/// One propagation subpath.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subpath {
    pub alpha: Complex64,
    /// Delay in seconds.
    pub tau: f64,
    pub sin_theta_t: f64,
    pub sin_theta_r: f64,
    /// Index of the generating cluster.
    pub cluster: usize,
}

/// Per-subcarrier `N_R x N_T` channel matrices and the subpaths that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub h: Vec<CMat>,
    pub subpaths: Vec<Subpath>,
    pub cfg: SystemConfig,
    pub seed: Option<Seed>,
}

/// `a_N(x)`: element `i` is `exp(-j pi i x) / sqrt(N)`, `i = 0..N-1`.
pub fn ula_response(n: usize, x: f64) -> CVec {
    let scale = 1.0 / (n as f64).sqrt();
    CVec::from_fn(n, |i, _| cis(-PI * i as f64 * x) * scale)
}

/// Zero-mean Laplacian with standard deviation `sigma` (scale `sigma / sqrt(2)`).
pub fn sample_laplacian<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    let b = sigma / std::f64::consts::SQRT_2;
    let mut u: f64 = rng.random();
    while u == 0.0 {
        u = rng.random();
    }
    let u = u - 0.5;
    -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Circularly symmetric complex Gaussian with unit variance.
pub fn sample_cn<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws cluster means and Laplacian subpath offsets.
///
/// Draw order per cluster: mean AoD, mean AoA, mean delay, then per subpath
/// AoD offset, AoA offset, delay offset and gain.
pub fn draw_clusters(_cfg: &SystemConfig, cc: &ClusterConfig, rng: &mut TrialRng) -> Vec<Subpath> {
    let mut out = Vec::with_capacity(cc.n_c * cc.n_p);
    for cluster in 0..cc.n_c {
        let mean_t = rng.random::<f64>() * 2.0 * PI;
        let mean_r = rng.random::<f64>() * 2.0 * PI;
        let mean_tau = rng.random::<f64>() * cc.tau_max;
        for _ in 0..cc.n_p {
            let dt = sample_laplacian(rng, cc.sigma_theta_t);
            let dr = sample_laplacian(rng, cc.sigma_theta_r);
            let dtau = sample_laplacian(rng, cc.sigma_tau);
            let alpha = sample_cn(rng);
            out.push(Subpath {
                alpha,
                tau: (mean_tau + dtau).max(0.0),
                sin_theta_t: (mean_t + dt).sin(),
                sin_theta_r: (mean_r + dr).sin(),
                cluster,
            });
        }
    }
    out
}

/// Sums the subpaths into per-subcarrier channels with frequency-scaled angles.
pub fn assemble_channels(subpaths: &[Subpath], cfg: &SystemConfig) -> ChannelSet {
    let freqs = derive_subcarrier_frequencies(cfg);
    let scale = ((cfg.n_t * cfg.n_r) as f64 / subpaths.len().max(1) as f64).sqrt();
    let h = freqs
        .iter()
        .map(|&f_k| {
            let ratio = f_k / cfg.f_c;
            let mut hk = CMat::zeros(cfg.n_r, cfg.n_t);
            for sp in subpaths {
                let gain = sp.alpha * cis(-2.0 * PI * f_k * sp.tau) * scale;
                let a_r = ula_response(cfg.n_r, ratio * sp.sin_theta_r) * gain;
                let a_t = ula_response(cfg.n_t, ratio * sp.sin_theta_t);
                hk += a_r * a_t.transpose();
            }
            hk
        })
        .collect();
    ChannelSet {
        h,
        subpaths: subpaths.to_vec(),
        cfg: cfg.clone(),
        seed: None,
    }
}

/// Draws and assembles one channel realization for a trial seed.
pub fn generate_channel(cfg: &SystemConfig, cc: &ClusterConfig, seed: Seed) -> ChannelSet {
    let mut rng = spawn_trial_rng(seed);
    let subpaths = draw_clusters(cfg, cc, &mut rng);
    let mut ch = assemble_channels(&subpaths, cfg);
    ch.seed = Some(seed);
    ch
}

/// Adds complex Gaussian error scaled so that `||E_k||^2 / ||H_k||^2 = nmse` exactly.
pub fn inject_channel_error(ch: &ChannelSet, nmse: f64, rng: &mut TrialRng) -> Result<ChannelSet> {
    if !(nmse.is_finite() && nmse >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "nmse",
            reason: format!("must be finite and >= 0, got {nmse}"),
        });
    }
    if nmse == 0.0 {
        return Ok(ch.clone());
    }
    let mut out = ch.clone();
    for (k, hk) in out.h.iter_mut().enumerate() {
        let h_norm2 = hk.norm_squared();
        if h_norm2 == 0.0 {
            return Err(Error::ZeroChannel { subcarrier: k });
        }
        let e = CMat::from_fn(hk.nrows(), hk.ncols(), |_, _| sample_cn(rng));
        let e_norm2 = e.norm_squared();
        let s = (nmse * h_norm2 / e_norm2).sqrt();
        *hk += e * Complex64::new(s, 0.0);
    }
    Ok(out)
}

/// Subcarrier-averaged `||H_est - H||^2 / ||H||^2`.
pub fn channel_nmse(estimate: &ChannelSet, truth: &ChannelSet) -> f64 {
    let k = truth.h.len() as f64;
    estimate
        .h
        .iter()
        .zip(&truth.h)
        .map(|(e, t)| (e - t).norm_squared() / t.norm_squared())
        .sum::<f64>()
        / k
}

impl ChannelSet {
    pub fn num_subcarriers(&self) -> usize {
        self.h.len()
    }

    /// SHA-256 over the IEEE bit patterns of every channel entry.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for hk in &self.h {
            for z in hk.iter() {
                hasher.update(z.re.to_bits().to_le_bytes());
                hasher.update(z.im.to_bits().to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }

    /// Serializes to the JSON fixture format (see [`ChannelDump`]).
    pub fn to_dump(&self) -> ChannelDump {
        ChannelDump {
            format: CHANNEL_FORMAT.to_string(),
            seed: self.seed,
            config_hash: config_hash(&self.cfg),
            system: self.cfg.clone(),
            subpaths: self.subpaths.clone(),
            h: self
                .h
                .iter()
                .map(|hk| {
                    (0..hk.nrows())
                        .flat_map(|r| (0..hk.ncols()).map(move |c| (r, c)))
                        .map(|(r, c)| [hk[(r, c)].re, hk[(r, c)].im])
                        .collect()
                })
                .collect(),
        }
    }

    pub fn from_dump(dump: ChannelDump) -> Result<Self> {
        if dump.format != CHANNEL_FORMAT {
            return Err(Error::Fixture(format!("unknown format `{}`", dump.format)));
        }
        let hash = config_hash(&dump.system);
        if hash != dump.config_hash {
            return Err(Error::Fixture(format!(
                "config hash {hash} does not match recorded {}",
                dump.config_hash
            )));
        }
        let cfg = dump.system;
        if dump.h.len() != cfg.k {
            return Err(Error::ShapeMismatch {
                expected: format!("{} subcarriers", cfg.k),
                found: format!("{}", dump.h.len()),
            });
        }
        let mut h = Vec::with_capacity(cfg.k);
        for entries in dump.h {
            if entries.len() != cfg.n_r * cfg.n_t {
                return Err(Error::ShapeMismatch {
                    expected: format!("{} entries", cfg.n_r * cfg.n_t),
                    found: format!("{}", entries.len()),
                });
            }
            h.push(CMat::from_fn(cfg.n_r, cfg.n_t, |r, c| {
                let [re, im] = entries[r * cfg.n_t + c];
                Complex64::new(re, im)
            }));
        }
        Ok(ChannelSet {
            h,
            subpaths: dump.subpaths,
            cfg,
            seed: dump.seed,
        })
    }

    pub fn save_json(&self, path: &std::path::Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(file, &self.to_dump())?;
        Ok(())
    }

    pub fn load_json(path: &std::path::Path) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::from_dump(serde_json::from_reader(file)?)
    }
}

pub const CHANNEL_FORMAT: &str = "thz-dpp-channel/1";

/// JSON channel fixture.
///
/// `h[k]` lists the `N_R x N_T` entries of subcarrier `k` in row-major order as
/// `[re, im]` pairs. `config_hash` is [`config_hash`] of `system`; loading fails
/// when they disagree.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelDump {
    pub format: String,
    pub seed: Option<Seed>,
    pub config_hash: String,
    pub system: SystemConfig,
    pub subpaths: Vec<Subpath>,
    pub h: Vec<Vec<[f64; 2]>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, svd};

    fn small_cfg() -> SystemConfig {
        SystemConfig {
            n_t: 16,
            n_ttd: 4,
            m: 4,
            k: 8,
            ..SystemConfig::desk()
        }
    }

    #[test]
    fn ula_closed_forms() {
        let a = ula_response(2, 0.0);
        let s = 1.0 / 2f64.sqrt();
        assert!((a[0] - c(s, 0.0)).norm() < 1e-15 && (a[1] - c(s, 0.0)).norm() < 1e-15);
        let a = ula_response(2, 1.0);
        assert!((a[1] - c(-s, 0.0)).norm() < 1e-15);
        let a = ula_response(4, 0.5);
        for i in 0..4 {
            let expected = cis(-PI * i as f64 / 2.0) * 0.5;
            assert!((a[i] - expected).norm() < 1e-15);
        }
        assert!((ula_response(37, 0.3).norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_spread_collapses_clusters() {
        let cfg = small_cfg();
        let cc = ClusterConfig::path();
        let mut rng = spawn_trial_rng(Seed::new(1, 0));
        let sp = draw_clusters(&cfg, &cc, &mut rng);
        assert_eq!(sp.len(), cc.n_c * cc.n_p);
        for chunk in sp.chunks(cc.n_p) {
            for s in chunk {
                assert_eq!(s.sin_theta_t, chunk[0].sin_theta_t);
                assert_eq!(s.sin_theta_r, chunk[0].sin_theta_r);
                assert_eq!(s.tau, chunk[0].tau);
            }
        }
    }

    #[test]
    fn single_subpath_count() {
        let cc = ClusterConfig {
            n_c: 1,
            n_p: 1,
            ..Default::default()
        };
        let mut rng = spawn_trial_rng(Seed::new(1, 0));
        assert_eq!(draw_clusters(&small_cfg(), &cc, &mut rng).len(), 1);
    }

    #[test]
    fn laplacian_standard_deviation() {
        let mut rng = spawn_trial_rng(Seed::new(11, 0));
        let sigma = 5f64.to_radians();
        let n = 10_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_laplacian(&mut rng, sigma)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(
            (var.sqrt() - sigma).abs() < 0.05 * sigma,
            "{}",
            var.sqrt().to_degrees()
        );
    }

    fn boresight(tau: f64) -> Subpath {
        Subpath {
            alpha: c(1.0, 0.0),
            tau,
            sin_theta_t: 0.0,
            sin_theta_r: 0.0,
            cluster: 0,
        }
    }

    #[test]
    fn boresight_channel_is_all_ones() {
        let cfg = small_cfg();
        let ch = assemble_channels(&[boresight(0.0)], &cfg);
        for hk in &ch.h {
            for z in hk.iter() {
                assert!((z - c(1.0, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn delay_rotates_adjacent_subcarriers() {
        let cfg = small_cfg();
        let ch = assemble_channels(&[boresight(1.0 / cfg.f_s)], &cfg);
        let expected = cis(-2.0 * PI * cfg.subcarrier_spacing() / cfg.f_s);
        for w in ch.h.windows(2) {
            let diff = &w[1] - &w[0] * expected;
            assert!(diff.norm() < 1e-9 * w[0].norm());
        }
    }

    #[test]
    fn mean_channel_power() {
        let cfg = small_cfg();
        let cc = ClusterConfig::default();
        let trials = 2000;
        let mut total = 0.0;
        for t in 0..trials {
            let ch = generate_channel(&cfg, &cc, Seed::new(5, t));
            total += ch.h[0].norm_squared();
        }
        let mean = total / trials as f64;
        let target = (cfg.n_t * cfg.n_r) as f64;
        assert!((mean - target).abs() < 0.05 * target, "{mean} vs {target}");
    }

    #[test]
    fn linear_in_gains() {
        let cfg = small_cfg();
        let ch = generate_channel(&cfg, &ClusterConfig::default(), Seed::new(2, 3));
        let doubled: Vec<Subpath> = ch
            .subpaths
            .iter()
            .map(|s| Subpath {
                alpha: s.alpha * 2.0,
                ..s.clone()
            })
            .collect();
        let ch2 = assemble_channels(&doubled, &cfg);
        for (a, b) in ch.h.iter().zip(&ch2.h) {
            assert!((a * c(2.0, 0.0) - b).norm() < 1e-12 * b.norm());
        }
    }

    #[test]
    fn path_channel_rank_bounded_by_clusters() {
        let cfg = SystemConfig {
            n_r: 8,
            n_s: 4,
            ..small_cfg()
        };
        let cc = ClusterConfig {
            n_c: 3,
            ..ClusterConfig::path()
        };
        let ch = generate_channel(&cfg, &cc, Seed::new(9, 0));
        for hk in &ch.h {
            let s = svd(hk).unwrap().s;
            let rank = s.iter().filter(|&&x| x >= 1e-8 * s[0]).count();
            assert!(rank <= cc.n_c);
        }
    }

    #[test]
    fn beam_split_moves_peak() {
        let cfg = SystemConfig::desk();
        let sp = Subpath {
            sin_theta_t: 0.5,
            ..boresight(0.0)
        };
        let ch = assemble_channels(&[sp], &cfg);
        let freqs = derive_subcarrier_frequencies(&cfg);
        let grid = 4001;
        let step = 2.0 / (grid - 1) as f64;
        for (k, hk) in ch.h.iter().enumerate() {
            // row 0 of H_k is proportional to the transmit steering vector
            let t = hk.row(0).transpose();
            let best = (0..grid)
                .map(|i| -1.0 + i as f64 * step)
                .max_by(|&x, &y| {
                    let fx = ula_response(cfg.n_t, x).conjugate().dot(&t).norm();
                    let fy = ula_response(cfg.n_t, y).conjugate().dot(&t).norm();
                    fx.total_cmp(&fy)
                })
                .unwrap();
            let expected = freqs[k] / cfg.f_c * 0.5;
            assert!(
                (best - expected).abs() <= step,
                "k={k}: {best} vs {expected}"
            );
        }
    }

    #[test]
    fn error_injection_exact_ratio() {
        let cfg = small_cfg();
        let ch = generate_channel(&cfg, &ClusterConfig::default(), Seed::new(4, 0));
        let mut rng = spawn_trial_rng(Seed::new(4, 0).derive(1));
        assert_eq!(inject_channel_error(&ch, 0.0, &mut rng).unwrap(), ch);
        let est = inject_channel_error(&ch, 0.1, &mut rng).unwrap();
        for (e, t) in est.h.iter().zip(&ch.h) {
            let r = (e - t).norm_squared() / t.norm_squared();
            assert!((r - 0.1).abs() < 1e-12);
        }
        let nmse = 10f64.powf(-1.5);
        let est = inject_channel_error(&ch, nmse, &mut rng).unwrap();
        // direct evaluation of the subcarrier-averaged definition
        let mut acc = 0.0;
        for k in 0..cfg.k {
            acc += (&est.h[k] - &ch.h[k]).norm_squared() / ch.h[k].norm_squared();
        }
        assert!((acc / cfg.k as f64 - nmse).abs() < 1e-12);
        assert!((channel_nmse(&est, &ch) - nmse).abs() < 1e-12);
    }

    #[test]
    fn error_injection_rejects_zero_channel() {
        let cfg = small_cfg();
        let mut ch = generate_channel(&cfg, &ClusterConfig::default(), Seed::new(4, 0));
        ch.h[2] = CMat::zeros(cfg.n_r, cfg.n_t);
        let mut rng = spawn_trial_rng(Seed::new(0, 0));
        assert!(matches!(
            inject_channel_error(&ch, 0.1, &mut rng),
            Err(Error::ZeroChannel { subcarrier: 2 })
        ));
    }

    #[test]
    fn generation_is_reproducible() {
        let cfg = small_cfg();
        let cc = ClusterConfig::default();
        let a = generate_channel(&cfg, &cc, Seed::new(42, 7));
        let b = generate_channel(&cfg, &cc, Seed::new(42, 7));
        assert_eq!(a.fingerprint(), b.fingerprint());
        let other = generate_channel(&cfg, &cc, Seed::new(42, 8));
        assert_ne!(a.fingerprint(), other.fingerprint());
    }

    #[test]
    fn dump_round_trip_is_bit_exact() {
        let cfg = small_cfg();
        let ch = generate_channel(&cfg, &ClusterConfig::default(), Seed::new(42, 7));
        let text = serde_json::to_string(&ch.to_dump()).unwrap();
        let back = ChannelSet::from_dump(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.fingerprint(), ch.fingerprint());
        assert_eq!(back.subpaths, ch.subpaths);
    }

    #[test]
    fn dump_rejects_hash_mismatch() {
        let cfg = small_cfg();
        let ch = generate_channel(&cfg, &ClusterConfig::default(), Seed::new(1, 1));
        let mut dump = ch.to_dump();
        dump.system.snr_db = 3.0;
        assert!(matches!(
            ChannelSet::from_dump(dump),
            Err(Error::Fixture(_))
        ));
    }
}
