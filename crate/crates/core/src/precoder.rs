//! Fully-digital precoders, digital refinement for a fixed analog stage, and
//! the rate / approximation metrics.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::ChannelSet;
use crate::codebook::feasible_matrix;
use crate::config::{derive_subcarrier_frequencies, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::{inv_sqrt_gram, log2_det_identity_plus, pinv, svd, water_fill, CMat};

/// Per-subcarrier unconstrained precoders `F_k = V_k(:, 1:N_s) diag(p_k)`.
#[derive(Debug, Clone)]
pub struct FullyDigital {
    pub f: Vec<CMat>,
}

impl FullyDigital {
    pub fn n_streams(&self) -> usize {
        self.f.first().map_or(0, |f| f.ncols())
    }
}

/// A hybrid precoder: selected atoms, their phase/delay settings, and the
/// per-subcarrier analog and digital stages.
#[derive(Debug, Clone)]
pub struct PrecodingSolution {
    /// Selected grid indices (0-based), ascending.
    pub atom_indices: Vec<usize>,
    /// Unit-modulus phase-shifter settings, `N_T x N_RF`.
    pub phase: CMat,
    /// TTD delays in seconds, `N_TTD x N_RF`.
    pub delay: DMatrix<f64>,
    /// `A_k`, `N_T x N_RF`, unit-norm columns.
    pub analog: Vec<CMat>,
    /// `D_k`, `N_RF x N_s`.
    pub digital: Vec<CMat>,
}

impl PrecodingSolution {
    /// Hybrid products `A_k D_k`.
    pub fn products(&self) -> Vec<CMat> {
        self.analog
            .iter()
            .zip(&self.digital)
            .map(|(a, d)| a * d)
            .collect()
    }
}

/// Analog precoders realized by phase shifters and TTD lines at every subcarrier.
pub fn build_analog(phase: &CMat, delay: &DMatrix<f64>, cfg: &SystemConfig) -> Vec<CMat> {
    derive_subcarrier_frequencies(cfg)
        .into_iter()
        .map(|f_k| feasible_matrix(phase, delay, cfg.m, f_k))
        .collect()
}

fn precoder_from_svd(h: &CMat, n_s: usize, gain: f64) -> Result<CMat> {
    let dec = svd(h)?;
    if dec.s.len() < n_s {
        return Err(Error::ShapeMismatch {
            expected: format!("at least {n_s} singular values"),
            found: format!("{}", dec.s.len()),
        });
    }
    let alloc = water_fill(&dec.s[..n_s], gain, n_s as f64)?;
    let mut f = dec.v.columns(0, n_s).into_owned();
    for (s, p) in alloc.p.iter().enumerate() {
        // Pin the per-stream phase: the largest entry of u_s is made real and
        // positive. Right-multiplying h by a diagonal unitary then leaves the
        // canonical u_s, and hence the hybrid product A D, unchanged.
        let u = dec.u.column(s);
        let r = argmax_modulus(u.iter());
        let z = u[r];
        let phase = if z.norm() > 0.0 {
            z.conj() / z.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let mut col = f.column_mut(s);
        col *= phase * *p;
    }
    Ok(f)
}

fn argmax_modulus<'a>(it: impl Iterator<Item = &'a Complex64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, z) in it.enumerate() {
        // Relative margin keeps the choice stable under rounding-level noise.
        if z.norm() > best.1 * (1.0 + 1e-9) {
            best = (i, z.norm());
        }
    }
    best.0
}

pub fn fully_digital(ch: &ChannelSet, cfg: &SystemConfig) -> Result<FullyDigital> {
    let gain = cfg.gain_factor();
    let f =
        ch.h.par_iter()
            .map(|hk| precoder_from_svd(hk, cfg.n_s, gain))
            .collect::<Result<Vec<_>>>()?;
    Ok(FullyDigital { f })
}

/// Positions of columns that are (numerically) collinear with another column.
pub(crate) fn collinear_columns(a: &CMat) -> Vec<usize> {
    let n = a.ncols();
    let norms: Vec<f64> = (0..n).map(|i| a.column(i).norm()).collect();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let ip = a.column(i).dotc(&a.column(j)).norm();
            if norms[i] == 0.0 || ip >= (1.0 - 1e-9) * norms[i] * norms[j] {
                out.push(i);
                break;
            }
        }
    }
    if out.is_empty() {
        (0..n).collect()
    } else {
        out
    }
}

fn inv_sqrt_or_rank_error(a: &CMat, k: usize) -> Result<CMat> {
    inv_sqrt_gram(a).map_err(|e| match e {
        Error::SingularGram { .. } => Error::RankDeficient {
            subcarrier: k,
            atoms: collinear_columns(a),
        },
        other => other,
    })
}

/// Digital precoders maximizing rate for fixed analog precoders.
///
/// Per subcarrier: `H_eq = H A (A^H A)^{-1/2}`, SVD of `H_eq`, then
/// `D = (A^H A)^{-1/2} V_eq(:, 1:N_s) diag(p_eq)` with water-filled `p_eq`,
/// which gives `||A D||_F^2 = N_s`.
pub fn refine_digital(ch: &ChannelSet, analog: &[CMat], cfg: &SystemConfig) -> Result<Vec<CMat>> {
    if analog.len() != ch.h.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} analog precoders", ch.h.len()),
            found: format!("{}", analog.len()),
        });
    }
    let gain = cfg.gain_factor();
    ch.h.par_iter()
        .zip(analog.par_iter())
        .enumerate()
        .map(|(k, (hk, ak))| {
            let b = inv_sqrt_or_rank_error(ak, k)?;
            let h_eq = hk * ak * &b;
            let v = precoder_from_svd(&h_eq, cfg.n_s, gain)?;
            Ok(b * v)
        })
        .collect()
}

/// Least-squares digital precoders `A_k^† F_k`, scaled so `||A_k D_k||_F^2 = N_s`.
pub fn ls_digital(analog: &[CMat], fd: &FullyDigital) -> Result<Vec<CMat>> {
    let n_s = fd.n_streams() as f64;
    analog
        .par_iter()
        .zip(fd.f.par_iter())
        .map(|(a, f)| {
            let d = pinv(a)? * f;
            let norm = (a * &d).norm();
            Ok(if norm > 0.0 {
                d * Complex64::new(n_s.sqrt() / norm, 0.0)
            } else {
                d
            })
        })
        .collect()
}

/// Sum and per-subcarrier-average achievable rate in bits/s/Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rate {
    pub total: f64,
    pub per_subcarrier: f64,
}

/// `sum_k log2 det(I + (rho / (N_s sigma^2)) H_k P_k P_k^H H_k^H)` for precoders `P_k`.
pub fn rate_of_products(h: &[CMat], products: &[CMat], cfg: &SystemConfig) -> Result<Rate> {
    if h.len() != products.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} precoders", h.len()),
            found: format!("{}", products.len()),
        });
    }
    let gain = Complex64::new(cfg.gain_factor(), 0.0);
    let mut total = 0.0;
    for (hk, pk) in h.iter().zip(products) {
        if hk.ncols() != pk.nrows() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} precoder rows", hk.ncols()),
                found: format!("{}", pk.nrows()),
            });
        }
        let g = hk * pk;
        let x = (&g * g.adjoint()) * gain;
        total += log2_det_identity_plus(&x)?;
    }
    Ok(Rate {
        total,
        per_subcarrier: total / h.len() as f64,
    })
}

pub fn sum_rate(
    ch: &ChannelSet,
    analog: &[CMat],
    digital: &[CMat],
    cfg: &SystemConfig,
) -> Result<Rate> {
    if analog.len() != digital.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} digital precoders", analog.len()),
            found: format!("{}", digital.len()),
        });
    }
    let products: Vec<CMat> = analog.iter().zip(digital).map(|(a, d)| a * d).collect();
    rate_of_products(&ch.h, &products, cfg)
}

/// `(1 / (K N_T N_s)) sum_k ||F_k - A_k D_k||_F^2`.
pub fn approx_mse(fd: &FullyDigital, analog: &[CMat], digital: &[CMat]) -> f64 {
    let k = fd.f.len();
    let (n_t, n_s) = fd.f[0].shape();
    let total: f64 =
        fd.f.iter()
            .zip(analog.iter().zip(digital))
            .map(|(f, (a, d))| (f - a * d).norm_squared())
            .sum();
    total / (k * n_t * n_s) as f64
}

/// Outcome of checking a solution against the hardware and power constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    pub max_modulus_error: f64,
    pub min_delay: f64,
    pub max_delay: f64,
    pub max_power_error: f64,
    pub distinct_atoms: bool,
}

impl ConstraintReport {
    pub fn holds(&self, t_max: f64) -> bool {
        self.max_modulus_error <= 1e-12
            && self.min_delay >= 0.0
            && self.max_delay <= t_max
            && self.max_power_error <= 1e-9
            && self.distinct_atoms
    }
}

pub fn check_constraints(sol: &PrecodingSolution, n_s: usize) -> ConstraintReport {
    let max_modulus_error = sol
        .phase
        .iter()
        .map(|z| (z.norm() - 1.0).abs())
        .fold(0.0, f64::max);
    let min_delay = sol.delay.iter().copied().fold(f64::INFINITY, f64::min);
    let max_delay = sol.delay.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let max_power_error = sol
        .products()
        .iter()
        .map(|p| (p.norm_squared() - n_s as f64).abs())
        .fold(0.0, f64::max);
    let mut sorted = sol.atom_indices.clone();
    sorted.sort_unstable();
    sorted.dedup();
    ConstraintReport {
        max_modulus_error,
        min_delay,
        max_delay,
        max_power_error,
        distinct_atoms: sorted.len() == sol.atom_indices.len(),
    }
}
