//! Multi-user downlink with single-antenna users: zero-forcing fully-digital
//! precoders, zero-forcing digital refinement behind a hybrid analog stage,
//! and the per-user SINR rate.

use rayon::prelude::*;

use crate::channel::generate_channel;
use crate::codebook::Codebook;
use crate::config::{ClusterConfig, Seed, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::{inv_sqrt_gram, pinv, svd, water_fill, CMat};
use crate::precoder::{FullyDigital, PrecodingSolution, Rate};
use crate::sparse::iterative_select;

/// Per-subcarrier `N_U x N_T` channels, one row per single-antenna user.
#[derive(Debug, Clone)]
pub struct MultiUserChannelSet {
    pub h: Vec<CMat>,
    pub n_u: usize,
}

/// System configuration for one single-antenna user.
fn user_config(cfg: &SystemConfig) -> SystemConfig {
    SystemConfig {
        n_r: 1,
        n_s: 1,
        n_rf: 1,
        ..cfg.clone()
    }
}

/// Stacks `n_u` independent single-antenna cluster channels. User `u` draws
/// from `seed.derive(u)`.
pub fn generate_multiuser(
    cfg: &SystemConfig,
    cc: &ClusterConfig,
    n_u: usize,
    seed: Seed,
) -> MultiUserChannelSet {
    let ucfg = user_config(cfg);
    let users: Vec<_> = (0..n_u)
        .map(|u| generate_channel(&ucfg, cc, seed.derive(u as u64)))
        .collect();
    let h = (0..cfg.k)
        .map(|k| CMat::from_fn(n_u, cfg.n_t, |u, c| users[u].h[k][(0, c)]))
        .collect();
    MultiUserChannelSet { h, n_u }
}

/// `rho / (N_U sigma^2)`: equal power per user.
fn user_gain(n_u: usize, cfg: &SystemConfig) -> f64 {
    cfg.rho / (n_u as f64 * cfg.sigma_n2)
}

/// ZF directions `H^H (H H^H)^{-1}` with unit-norm columns and water-filled
/// amplitudes over the per-user gains `1 / ||w_u||`, total power `N_U`.
fn zf_precoder(h: &CMat, gain: f64, k: usize) -> Result<CMat> {
    let n_u = h.nrows();
    let s = svd(h)?.s;
    if s.len() < n_u || s[n_u - 1] <= 1e-10 * s[0] {
        return Err(Error::UserRankDeficient { subcarrier: k });
    }
    let mut w = pinv(h)?;
    let gains: Vec<f64> = (0..n_u).map(|u| 1.0 / w.column(u).norm()).collect();
    let alloc = water_fill(&gains, gain, n_u as f64)?;
    for (u, (g, p)) in gains.iter().zip(&alloc.p).enumerate() {
        w.column_mut(u).scale_mut(g * p);
    }
    Ok(w)
}

pub fn zf_fully_digital(mu: &MultiUserChannelSet, cfg: &SystemConfig) -> Result<FullyDigital> {
    let gain = user_gain(mu.n_u, cfg);
    let f =
        mu.h.par_iter()
            .enumerate()
            .map(|(k, hk)| zf_precoder(hk, gain, k))
            .collect::<Result<Vec<_>>>()?;
    Ok(FullyDigital { f })
}

/// ZF on the equivalent channel `H_k A_k (A_k^H A_k)^{-1/2}`; `||A_k D_k||_F^2 = N_U`.
pub fn zf_refine_digital(
    mu: &MultiUserChannelSet,
    analog: &[CMat],
    cfg: &SystemConfig,
) -> Result<Vec<CMat>> {
    if analog.len() != mu.h.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} analog precoders", mu.h.len()),
            found: format!("{}", analog.len()),
        });
    }
    let gain = user_gain(mu.n_u, cfg);
    mu.h.par_iter()
        .zip(analog.par_iter())
        .enumerate()
        .map(|(k, (hk, ak))| {
            let b = inv_sqrt_gram(ak)?;
            let h_eq = hk * ak * &b;
            Ok(b * zf_precoder(&h_eq, gain, k)?)
        })
        .collect()
}

/// `sum_k sum_u log2(1 + SINR_{u,k})` with noise term `N_U sigma^2 / rho`.
pub fn multiuser_rate_of_products(
    h: &[CMat],
    products: &[CMat],
    n_u: usize,
    cfg: &SystemConfig,
) -> Result<Rate> {
    if h.len() != products.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} precoders", h.len()),
            found: format!("{}", products.len()),
        });
    }
    let noise = n_u as f64 * cfg.sigma_n2 / cfg.rho;
    let mut total = 0.0;
    for (hk, pk) in h.iter().zip(products) {
        let g: CMat = hk * pk;
        for u in 0..g.nrows() {
            let signal = g[(u, u)].norm_sqr();
            let interference: f64 = (0..g.ncols())
                .filter(|&v| v != u)
                .map(|v| g[(u, v)].norm_sqr())
                .sum();
            total += (1.0 + signal / (interference + noise)).log2();
        }
    }
    if !total.is_finite() {
        return Err(Error::NonFinite {
            what: "multi-user rate",
        });
    }
    Ok(Rate {
        total,
        per_subcarrier: total / h.len() as f64,
    })
}

pub fn multiuser_rate(
    mu: &MultiUserChannelSet,
    analog: &[CMat],
    digital: &[CMat],
    cfg: &SystemConfig,
) -> Result<Rate> {
    let products: Vec<CMat> = analog.iter().zip(digital).map(|(a, d)| a * d).collect();
    multiuser_rate_of_products(&mu.h, &products, mu.n_u, cfg)
}

/// Hybrid multi-user precoder: E-SSP atom selection against the ZF precoders,
/// then ZF digital refinement. `cfg.n_rf` sets the number of RF chains.
pub fn multiuser_essp(
    codebook: &Codebook,
    mu: &MultiUserChannelSet,
    fd: &FullyDigital,
    cfg: &SystemConfig,
) -> Result<PrecodingSolution> {
    if cfg.n_rf < mu.n_u {
        return Err(Error::StreamsExceedRf {
            n_s: mu.n_u,
            n_rf: cfg.n_rf,
        });
    }
    let all: Vec<usize> = (0..cfg.k).collect();
    let sel = iterative_select(codebook, &fd.f, cfg.n_rf, &all)?;
    let mut atoms = sel.atoms;
    atoms.sort_unstable();
    let phase = codebook.phase_columns(&atoms);
    let delay = codebook.delay_columns(&atoms);
    let analog = crate::precoder::build_analog(&phase, &delay, cfg);
    let digital = zf_refine_digital(mu, &analog, cfg)?;
    Ok(PrecodingSolution {
        atom_indices: atoms,
        phase,
        delay,
        analog,
        digital,
    })
}
