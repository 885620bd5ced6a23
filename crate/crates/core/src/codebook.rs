//! Angular grids, measurement matrices and the hardware-feasible phase/delay codebooks.
//!
//! Three dictionaries share the [`Dictionary`] interface:
//!
//! * [`FrequencyIndependent`]: the narrowband steering matrix reused at every
//!   subcarrier (phase shifters only).
//! * [`IdealDictionary`]: steering vectors predistorted by `f_k / f_c` so that a
//!   path's projection peaks on the same atom at every subcarrier.
//! * [`Codebook`]: the feasible approximation of the ideal matrices, realized by
//!   one phase matrix plus one TTD delay per subarray and atom.
//!
//! Atom columns are unit norm. The phase codebook itself stores the unit-modulus
//! phase-shifter settings; the `1/sqrt(N_T)` array normalization is applied when
//! columns are formed.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ula_response;
use crate::config::{config_hash, derive_subcarrier_frequencies, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::{cis, CMat, CVec};

/// Grid angles `phi^g = -1 + (2g - 1) / G`, `g = 1..G`, stored 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularGrid {
    pub phi: Vec<f64>,
}

impl AngularGrid {
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    /// Grid spacing `2 / G`.
    pub fn step(&self) -> f64 {
        2.0 / self.phi.len() as f64
    }

    /// Index of the grid angle closest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        let g = self.phi.len() as f64;
        (((x + 1.0) * g / 2.0).floor().max(0.0) as usize).min(self.phi.len() - 1)
    }
}

pub fn make_grid(g: usize) -> AngularGrid {
    let gf = g as f64;
    AngularGrid {
        phi: (1..=g)
            .map(|i| -1.0 + (2.0 * i as f64 - 1.0) / gf)
            .collect(),
    }
}

/// Frequency-independent `N_T x G` steering matrix.
pub fn narrowband_matrix(grid: &AngularGrid, n_t: usize) -> CMat {
    let mut out = CMat::zeros(n_t, grid.len());
    for (g, &phi) in grid.phi.iter().enumerate() {
        out.set_column(g, &ula_response(n_t, phi));
    }
    out
}

/// Per-subcarrier ideal matrices: column `g` of matrix `k` is `a((f_k/f_c) phi^g)`.
pub fn ideal_matrices(grid: &AngularGrid, cfg: &SystemConfig) -> Vec<CMat> {
    derive_subcarrier_frequencies(cfg)
        .iter()
        .map(|f_k| {
            let ratio = f_k / cfg.f_c;
            let mut out = CMat::zeros(cfg.n_t, grid.len());
            for (g, &phi) in grid.phi.iter().enumerate() {
                out.set_column(g, &ula_response(cfg.n_t, ratio * phi));
            }
            out
        })
        .collect()
}

/// 1-based index of the middle antenna of the 1-based subarray `n_ttd`:
/// `(2 M n_ttd - M) // 2 + 1`.
pub fn middle_antenna_index(m: usize, n_ttd: usize) -> usize {
    (2 * m * n_ttd - m) / 2 + 1
}

/// Delay of one TTD line for grid angle `phi`, with the `beta` offset applied on
/// negative angles so that every delay is non-negative.
pub fn delay_entry(middle: usize, phi: f64, cfg: &SystemConfig) -> f64 {
    let base = ((middle - 1) as f64 * phi) / (2.0 * cfg.f_c);
    if phi < 0.0 {
        base + cfg.beta()
    } else {
        base
    }
}

/// `N_TTD x G` delay codebook in seconds.
pub fn delay_codebook(grid: &AngularGrid, cfg: &SystemConfig, t_max: f64) -> Result<DMatrix<f64>> {
    if cfg.n_t != cfg.m * cfg.n_ttd {
        return Err(Error::AntennaMismatch {
            n_t: cfg.n_t,
            m: cfg.m,
            n_ttd: cfg.n_ttd,
        });
    }
    let mut out = DMatrix::zeros(cfg.n_ttd, grid.len());
    for (g, &phi) in grid.phi.iter().enumerate() {
        for n in 0..cfg.n_ttd {
            let d = delay_entry(middle_antenna_index(cfg.m, n + 1), phi, cfg);
            if !(0.0..=t_max).contains(&d) {
                return Err(Error::DelayOutOfRange { delay: d, t_max });
            }
            out[(n, g)] = d;
        }
    }
    Ok(out)
}

/// Combined phase `exp(j (theta - 2 pi f t))` of a phase shifter set to `theta`
/// behind a TTD line with delay `t`, at frequency `f`.
pub fn superimposed_phase(theta: f64, f: f64, t: f64) -> Complex64 {
    cis(theta - 2.0 * PI * f * t)
}

/// Phase-shifter setting that absorbs a bias of `-delta_f` on every subcarrier
/// frequency: `theta - 2 pi delta_f t`.
pub fn compensate_frequency_bias(theta: f64, t: f64, delta_f: f64) -> f64 {
    theta - 2.0 * PI * delta_f * t
}

/// Unit-modulus `N_T x G` phase codebook: the narrowband phases times
/// `exp(+j 2 pi f_c T(n, g))` on every antenna of subarray `n`.
pub fn phase_codebook(grid: &AngularGrid, delay: &DMatrix<f64>, cfg: &SystemConfig) -> CMat {
    // Delays were designed against baseband frequencies `f_k - f_c`; the
    // phase shifters absorb that `-f_c` bias.
    CMat::from_fn(cfg.n_t, grid.len(), |r, g| {
        let theta = -PI * r as f64 * grid.phi[g];
        cis(compensate_frequency_bias(
            theta,
            delay[(r / cfg.m, g)],
            -cfg.f_c,
        ))
    })
}

/// `A_k = phase ⊙ (T_k ⊗ 1_M) / sqrt(N_T)` with `T_k(n, g) = exp(-j 2 pi f_k T(n, g))`.
pub fn feasible_matrix(phase: &CMat, delay: &DMatrix<f64>, m: usize, f_k: f64) -> CMat {
    let scale = 1.0 / (phase.nrows() as f64).sqrt();
    let ttd = delay.map(|t| cis(-2.0 * PI * f_k * t));
    CMat::from_fn(phase.nrows(), phase.ncols(), |r, g| {
        phase[(r, g)] * ttd[(r / m, g)] * scale
    })
}

pub fn feasible_matrices(phase: &CMat, delay: &DMatrix<f64>, cfg: &SystemConfig) -> Vec<CMat> {
    derive_subcarrier_frequencies(cfg)
        .into_iter()
        .map(|f_k| feasible_matrix(phase, delay, cfg.m, f_k))
        .collect()
}

/// Mean squared entry mismatch between feasible and ideal matrices,
/// `(1 / (K N_T G)) sum_k ||ideal_k - feasible_k||_F^2`.
///
/// Negative-angle ideal columns are first rotated by `exp(-j 2 pi (f_k - f_c) beta)`,
/// the common column phase introduced by the non-negativity offset; it does not
/// affect the achievable rate.
pub fn codebook_error(
    feasible: &[CMat],
    ideal: &[CMat],
    grid: &AngularGrid,
    cfg: &SystemConfig,
) -> Result<f64> {
    if feasible.len() != ideal.len() || feasible.len() != cfg.k {
        return Err(Error::ShapeMismatch {
            expected: format!("{} subcarriers", cfg.k),
            found: format!("{} feasible / {} ideal", feasible.len(), ideal.len()),
        });
    }
    let freqs = derive_subcarrier_frequencies(cfg);
    let beta = cfg.beta();
    let mut total = 0.0;
    for ((fe, id), f_k) in feasible.iter().zip(ideal).zip(&freqs) {
        if fe.shape() != id.shape() || fe.shape() != (cfg.n_t, grid.len()) {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", cfg.n_t, grid.len()),
                found: format!("{:?} / {:?}", fe.shape(), id.shape()),
            });
        }
        let bias = cis(-2.0 * PI * (f_k - cfg.f_c) * beta);
        for (g, &phi) in grid.phi.iter().enumerate() {
            let rot = if phi < 0.0 {
                bias
            } else {
                Complex64::new(1.0, 0.0)
            };
            for r in 0..cfg.n_t {
                total += (id[(r, g)] * rot - fe[(r, g)]).norm_sqr();
            }
        }
    }
    Ok(total / (cfg.k * cfg.n_t * grid.len()) as f64)
}

/// A per-subcarrier family of unit-norm measurement matrices.
pub trait Dictionary: Sync {
    fn n_antennas(&self) -> usize;
    fn n_atoms(&self) -> usize;
    fn n_subcarriers(&self) -> usize;
    /// Grid angle associated with atom `g`.
    fn angle(&self, g: usize) -> f64;
    /// Atom `g` at subcarrier `k`.
    fn column(&self, k: usize, g: usize) -> CVec;

    fn columns(&self, k: usize, atoms: &[usize]) -> CMat {
        let mut out = CMat::zeros(self.n_antennas(), atoms.len());
        for (i, &g) in atoms.iter().enumerate() {
            out.set_column(i, &self.column(k, g));
        }
        out
    }

    /// Full matrix at subcarrier `k`.
    fn matrix(&self, k: usize) -> CMat {
        let all: Vec<usize> = (0..self.n_atoms()).collect();
        self.columns(k, &all)
    }

    /// Summed stream projections `sum_s |atom_g^H f_s|^2` for each requested atom.
    fn projections(&self, k: usize, atoms: &[usize], f: &CMat) -> Vec<f64> {
        atoms
            .iter()
            .map(|&g| {
                let col = self.column(k, g);
                (0..f.ncols())
                    .map(|s| col.dotc(&f.column(s)).norm_sqr())
                    .sum()
            })
            .collect()
    }
}

/// `sum_s |a_N(x)^H f_s|^2` by Horner evaluation of `sum_r e^{j pi r x} f_r`.
fn steering_projection(x: f64, f: &CMat) -> f64 {
    let n = f.nrows();
    let w = cis(PI * x);
    let mut total = 0.0;
    for s in 0..f.ncols() {
        let col = f.column(s);
        let mut acc = Complex64::new(0.0, 0.0);
        for r in (0..n).rev() {
            acc = acc * w + col[r];
        }
        total += acc.norm_sqr();
    }
    total / n as f64
}

/// The narrowband steering matrix shared by every subcarrier.
#[derive(Debug, Clone)]
pub struct FrequencyIndependent {
    pub grid: AngularGrid,
    pub n_t: usize,
    pub k: usize,
}

impl FrequencyIndependent {
    pub fn new(grid: AngularGrid, cfg: &SystemConfig) -> Self {
        FrequencyIndependent {
            grid,
            n_t: cfg.n_t,
            k: cfg.k,
        }
    }
}

impl Dictionary for FrequencyIndependent {
    fn n_antennas(&self) -> usize {
        self.n_t
    }
    fn n_atoms(&self) -> usize {
        self.grid.len()
    }
    fn n_subcarriers(&self) -> usize {
        self.k
    }
    fn angle(&self, g: usize) -> f64 {
        self.grid.phi[g]
    }
    fn column(&self, _k: usize, g: usize) -> CVec {
        ula_response(self.n_t, self.grid.phi[g])
    }
    fn projections(&self, _k: usize, atoms: &[usize], f: &CMat) -> Vec<f64> {
        atoms
            .iter()
            .map(|&g| steering_projection(self.grid.phi[g], f))
            .collect()
    }
}

/// Frequency-predistorted steering matrices.
#[derive(Debug, Clone)]
pub struct IdealDictionary {
    pub grid: AngularGrid,
    pub n_t: usize,
    /// `f_k / f_c` per subcarrier.
    pub ratios: Vec<f64>,
}

impl IdealDictionary {
    pub fn new(grid: AngularGrid, cfg: &SystemConfig) -> Self {
        IdealDictionary {
            grid,
            n_t: cfg.n_t,
            ratios: derive_subcarrier_frequencies(cfg)
                .iter()
                .map(|f| f / cfg.f_c)
                .collect(),
        }
    }
}

impl Dictionary for IdealDictionary {
    fn n_antennas(&self) -> usize {
        self.n_t
    }
    fn n_atoms(&self) -> usize {
        self.grid.len()
    }
    fn n_subcarriers(&self) -> usize {
        self.ratios.len()
    }
    fn angle(&self, g: usize) -> f64 {
        self.grid.phi[g]
    }
    fn column(&self, k: usize, g: usize) -> CVec {
        ula_response(self.n_t, self.ratios[k] * self.grid.phi[g])
    }
    fn projections(&self, k: usize, atoms: &[usize], f: &CMat) -> Vec<f64> {
        let ratio = self.ratios[k];
        atoms
            .iter()
            .map(|&g| steering_projection(ratio * self.grid.phi[g], f))
            .collect()
    }
}

/// Feasible phase and delay codebooks for one system configuration and grid.
///
/// Channel independent; build once and share across trials. Feasible matrices
/// are formed on demand since storing all `K` of them at full scale takes
/// hundreds of megabytes.
#[derive(Debug, Clone)]
pub struct Codebook {
    pub grid: AngularGrid,
    /// Unit-modulus phase-shifter settings, `N_T x G`.
    pub phase: CMat,
    /// TTD delays in seconds, `N_TTD x G`.
    pub delay: DMatrix<f64>,
    pub t_max: f64,
    pub freqs: Vec<f64>,
    pub cfg: SystemConfig,
}

impl Codebook {
    /// Builds the codebooks with `t_max = 2 * beta`.
    pub fn build(cfg: &SystemConfig, g: usize) -> Result<Self> {
        Self::build_with_t_max(cfg, g, cfg.default_t_max())
    }

    pub fn build_with_t_max(cfg: &SystemConfig, g: usize, t_max: f64) -> Result<Self> {
        cfg.validate()?;
        let grid = make_grid(g);
        let delay = delay_codebook(&grid, cfg, t_max)?;
        let phase = phase_codebook(&grid, &delay, cfg);
        Ok(Codebook {
            grid,
            phase,
            delay,
            t_max,
            freqs: derive_subcarrier_frequencies(cfg),
            cfg: cfg.clone(),
        })
    }

    /// TTD phases `exp(-j 2 pi f_k T(n, g))` of atom `g` at subcarrier `k`.
    fn ttd_phases(&self, k: usize, g: usize) -> Vec<Complex64> {
        let f_k = self.freqs[k];
        (0..self.cfg.n_ttd)
            .map(|n| cis(-2.0 * PI * f_k * self.delay[(n, g)]))
            .collect()
    }

    pub fn feasible(&self, k: usize) -> CMat {
        feasible_matrix(&self.phase, &self.delay, self.cfg.m, self.freqs[k])
    }

    pub fn feasible_all(&self) -> Vec<CMat> {
        (0..self.freqs.len()).map(|k| self.feasible(k)).collect()
    }

    /// `N_T x |atoms|` slice of the phase codebook.
    pub fn phase_columns(&self, atoms: &[usize]) -> CMat {
        self.phase.select_columns(atoms)
    }

    /// `N_TTD x |atoms|` slice of the delay codebook.
    pub fn delay_columns(&self, atoms: &[usize]) -> DMatrix<f64> {
        self.delay.select_columns(atoms)
    }

    /// Mean squared mismatch against the ideal matrices.
    ///
    /// Evaluated one subcarrier at a time; same value as [`codebook_error`].
    pub fn error(&self) -> Result<f64> {
        let ideal = IdealDictionary::new(self.grid.clone(), &self.cfg);
        let beta = self.cfg.beta();
        let per_k: Vec<f64> = (0..self.freqs.len())
            .into_par_iter()
            .map(|k| {
                let bias = cis(-2.0 * PI * (self.freqs[k] - self.cfg.f_c) * beta);
                let mut total = 0.0;
                for (g, &phi) in self.grid.phi.iter().enumerate() {
                    let rot = if phi < 0.0 {
                        bias
                    } else {
                        Complex64::new(1.0, 0.0)
                    };
                    let fe = self.column(k, g);
                    let id = ideal.column(k, g);
                    total += fe
                        .iter()
                        .zip(id.iter())
                        .map(|(a, b)| (b * rot - a).norm_sqr())
                        .sum::<f64>();
                }
                total
            })
            .collect();
        let total: f64 = per_k.iter().sum();
        Ok(total / (self.freqs.len() * self.cfg.n_t * self.grid.len()) as f64)
    }

    pub fn to_dump(&self) -> CodebookDump {
        CodebookDump {
            format: CODEBOOK_FORMAT.to_string(),
            config_hash: config_hash(&self.cfg),
            system: self.cfg.clone(),
            phi: self.grid.phi.clone(),
            t_max: self.t_max,
            phase: (0..self.grid.len())
                .map(|g| self.phase.column(g).iter().map(|z| [z.re, z.im]).collect())
                .collect(),
            delay: (0..self.grid.len())
                .map(|g| self.delay.column(g).iter().copied().collect())
                .collect(),
        }
    }

    pub fn save_json(&self, path: &std::path::Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(file, &self.to_dump())?;
        Ok(())
    }
}

impl Dictionary for Codebook {
    fn n_antennas(&self) -> usize {
        self.cfg.n_t
    }
    fn n_atoms(&self) -> usize {
        self.grid.len()
    }
    fn n_subcarriers(&self) -> usize {
        self.freqs.len()
    }
    fn angle(&self, g: usize) -> f64 {
        self.grid.phi[g]
    }
    fn column(&self, k: usize, g: usize) -> CVec {
        let ttd = self.ttd_phases(k, g);
        let scale = 1.0 / (self.cfg.n_t as f64).sqrt();
        let m = self.cfg.m;
        CVec::from_fn(self.cfg.n_t, |r, _| self.phase[(r, g)] * ttd[r / m] * scale)
    }

    /// Subarray-wise evaluation: the phase-shifter inner products are summed per
    /// TTD line first, then rotated by the line's conjugate phase.
    fn projections(&self, k: usize, atoms: &[usize], f: &CMat) -> Vec<f64> {
        let n_t = self.cfg.n_t;
        let m = self.cfg.m;
        let scale = 1.0 / n_t as f64;
        let phase = self.phase.as_slice();
        atoms
            .iter()
            .map(|&g| {
                let ttd = self.ttd_phases(k, g);
                let col = &phase[g * n_t..(g + 1) * n_t];
                let mut total = 0.0;
                for s in 0..f.ncols() {
                    let fs = f.column(s);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (n, t) in ttd.iter().enumerate() {
                        let mut sub = Complex64::new(0.0, 0.0);
                        for r in n * m..(n + 1) * m {
                            sub += col[r].conj() * fs[r];
                        }
                        acc += t.conj() * sub;
                    }
                    total += acc.norm_sqr();
                }
                total * scale
            })
            .collect()
    }
}

pub const CODEBOOK_FORMAT: &str = "thz-dpp-codebook/1";

/// JSON codebook export.
///
/// `phase[g]` holds the `N_T` unit-modulus phase-shifter settings of atom `g` as
/// `[re, im]` pairs; `delay[g]` holds its `N_TTD` TTD delays in seconds; `phi[g]`
/// is the atom's grid angle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CodebookDump {
    pub format: String,
    pub config_hash: String,
    pub system: SystemConfig,
    pub phi: Vec<f64>,
    pub t_max: f64,
    pub phase: Vec<Vec<[f64; 2]>>,
    pub delay: Vec<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn cfg_m(n_t: usize, m: usize, k: usize) -> SystemConfig {
        SystemConfig {
            n_t,
            n_ttd: n_t / m,
            m,
            k,
            ..SystemConfig::desk()
        }
    }

    proptest::proptest! {
        #[test]
        fn frequency_bias_is_absorbed_by_phase_shift(
            theta in -10.0f64..10.0,
            t in 0.0f64..5e-9,
            delta_f in -2e11f64..2e11,
            f_k in 5e10f64..2e11,
        ) {
            let theta2 = compensate_frequency_bias(theta, t, delta_f);
            let a = superimposed_phase(theta2, f_k - delta_f, t);
            let b = superimposed_phase(theta, f_k, t);
            proptest::prop_assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn streamed_error_matches_dense() {
        let cfg = cfg_m(32, 8, 6);
        let cb = Codebook::build(&cfg, 64).unwrap();
        let dense = codebook_error(
            &cb.feasible_all(),
            &ideal_matrices(&cb.grid, &cfg),
            &cb.grid,
            &cfg,
        )
        .unwrap();
        assert!((cb.error().unwrap() - dense).abs() <= 1e-12 * dense.max(1e-30));
    }

    #[test]
    fn grid_closed_forms() {
        assert_eq!(make_grid(4).phi, vec![-0.75, -0.25, 0.25, 0.75]);
        assert_eq!(make_grid(1).phi, vec![0.0]);
        let g8 = make_grid(8);
        for (i, phi) in g8.phi.iter().enumerate() {
            let lo = -1.0 + 0.25 * i as f64;
            assert!((phi - (lo + 0.125)).abs() < 1e-15);
        }
        let g = make_grid(256);
        assert!(g.phi.windows(2).all(|w| w[1] > w[0]));
        for i in 0..128 {
            assert!((g.phi[i] + g.phi[255 - i]).abs() < 1e-15);
        }
        assert_eq!(g.nearest(g.phi[37]), 37);
    }

    #[test]
    fn ideal_at_center_is_narrowband() {
        let cfg = cfg_m(16, 4, 3);
        let grid = make_grid(8);
        let ideal = ideal_matrices(&grid, &cfg);
        assert!((&ideal[1] - narrowband_matrix(&grid, 16)).norm() < 1e-14);
    }

    #[test]
    fn ideal_boresight_column() {
        let cfg = cfg_m(16, 4, 4);
        let grid = make_grid(1);
        for mat in ideal_matrices(&grid, &cfg) {
            for z in mat.iter() {
                assert!((z - c(0.25, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn ideal_predistorted_column() {
        // K = 3 with f_s = 15 GHz puts the top subcarrier at 1.05 f_c
        let cfg = SystemConfig {
            f_s: 15e9,
            ..cfg_m(4, 1, 3)
        };
        let grid = AngularGrid { phi: vec![0.5] };
        let ideal = ideal_matrices(&grid, &cfg);
        let expected = ula_response(4, 1.05 * 0.5);
        assert!((ideal[2].column(0) - expected).norm() < 1e-14);
    }

    #[test]
    fn middle_antenna_indices() {
        assert_eq!(middle_antenna_index(16, 1), 9);
        assert_eq!(middle_antenna_index(16, 2), 25);
        assert_eq!(middle_antenna_index(1, 5), 5);
    }

    #[test]
    fn beta_default() {
        let cfg = SystemConfig::paper();
        assert!((cfg.beta() - 1.275e-9).abs() < 1e-21);
    }

    #[test]
    fn worst_negative_delay_is_zero() {
        let cfg = SystemConfig::paper();
        assert_eq!(delay_entry(cfg.n_t, -1.0, &cfg), 0.0);
    }

    #[test]
    fn delays_within_range() {
        for cfg in [SystemConfig::paper(), SystemConfig::desk(), cfg_m(64, 1, 8)] {
            let grid = make_grid(256);
            let d = delay_codebook(&grid, &cfg, cfg.default_t_max()).unwrap();
            assert!(d.iter().all(|&t| t >= 0.0 && t <= cfg.default_t_max()));
        }
    }

    #[test]
    fn delay_exceeding_t_max_errors() {
        let cfg = SystemConfig::desk();
        let grid = make_grid(16);
        assert!(matches!(
            delay_codebook(&grid, &cfg, 0.1 * cfg.beta()),
            Err(Error::DelayOutOfRange { .. })
        ));
    }

    #[test]
    fn phase_codebook_zero_delay_and_modulus() {
        let cfg = cfg_m(16, 4, 4);
        let grid = make_grid(8);
        let zero = DMatrix::zeros(cfg.n_ttd, 8);
        let p = phase_codebook(&grid, &zero, &cfg);
        let nb = narrowband_matrix(&grid, 16) * c(4.0, 0.0);
        assert!((&p - nb).norm() < 1e-13);
        let d = delay_codebook(&grid, &cfg, cfg.default_t_max()).unwrap();
        let p = phase_codebook(&grid, &d, &cfg);
        assert!(p.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn phase_first_antenna_positive_angles() {
        let cfg = cfg_m(8, 1, 4);
        let grid = make_grid(8);
        let d = delay_codebook(&grid, &cfg, cfg.default_t_max()).unwrap();
        let p = phase_codebook(&grid, &d, &cfg);
        for (g, &phi) in grid.phi.iter().enumerate() {
            if phi > 0.0 {
                assert!((p[(0, g)] - c(1.0, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn fully_delayed_array_matches_ideal_up_to_column_phase() {
        let cfg = cfg_m(32, 1, 8);
        let cb = Codebook::build(&cfg, 64).unwrap();
        let ideal = IdealDictionary::new(cb.grid.clone(), &cfg);
        for k in 0..cfg.k {
            for g in 0..64 {
                let ip = cb.column(k, g).dotc(&ideal.column(k, g)).norm();
                assert!((ip - 1.0).abs() < 1e-9, "k={k} g={g} {ip}");
            }
        }
        assert!(cb.error().unwrap() < 1e-18);
    }

    #[test]
    fn center_subcarrier_equals_narrowband() {
        let cfg = cfg_m(16, 4, 1);
        let cb = Codebook::build(&cfg, 16).unwrap();
        let nb = narrowband_matrix(&cb.grid, 16);
        assert!((cb.feasible(0) - nb).norm() < 1e-11);
    }

    #[test]
    fn feasible_columns_unit_norm() {
        let cfg = SystemConfig::desk();
        let cb = Codebook::build(&cfg, 64).unwrap();
        for k in [0, 7, 31] {
            let a = cb.feasible(k);
            for g in 0..64 {
                assert!((a.column(g).norm() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn coarser_subarrays_approximate_worse() {
        let base = SystemConfig::paper();
        let e4 = Codebook::build(&base.clone().with_n_ttd(64).unwrap(), 256)
            .unwrap()
            .error()
            .unwrap();
        let e32 = Codebook::build(&base.with_n_ttd(8).unwrap(), 256)
            .unwrap()
            .error()
            .unwrap();
        assert!(e32 > e4, "{e32} vs {e4}");
    }

    #[test]
    fn error_rejects_shape_mismatch() {
        let cfg = cfg_m(16, 4, 4);
        let grid = make_grid(8);
        let ideal = ideal_matrices(&grid, &cfg);
        assert!(matches!(
            codebook_error(&ideal[..2], &ideal, &grid, &cfg),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn fast_projections_match_dense() {
        let cfg = SystemConfig::desk();
        let cb = Codebook::build(&cfg, 64).unwrap();
        let ideal = IdealDictionary::new(cb.grid.clone(), &cfg);
        let fi = FrequencyIndependent::new(cb.grid.clone(), &cfg);
        let f = CMat::from_fn(cfg.n_t, 3, |r, s| {
            cis(0.37 * (r * (s + 1)) as f64) * (1.0 + s as f64)
        });
        let atoms: Vec<usize> = (0..64).collect();
        let dicts: [&dyn Dictionary; 3] = [&cb, &ideal, &fi];
        for d in dicts {
            for k in [0, 13, 31] {
                let fast = d.projections(k, &atoms, &f);
                let dense = d.matrix(k).adjoint() * &f;
                for (g, v) in fast.iter().enumerate() {
                    let slow: f64 = dense.row(g).iter().map(|z| z.norm_sqr()).sum();
                    assert!((v - slow).abs() < 1e-10 * slow.max(1.0));
                }
            }
        }
    }

    #[test]
    fn codebook_error_non_increasing_in_ttd_count() {
        let base = SystemConfig::desk();
        let mut prev = f64::INFINITY;
        let mut n = 1;
        while n <= base.n_t {
            let cfg = base.clone().with_n_ttd(n).unwrap();
            let e = Codebook::build(&cfg, 256).unwrap().error().unwrap();
            assert!(e <= prev + 1e-15, "n_ttd={n}: {e} > {prev}");
            prev = e;
            n *= 2;
        }
        assert!(prev < 1e-18);
    }
}
