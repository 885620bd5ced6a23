//! Sparse-recovery precoding: narrowband SSP, the frequency-independent wideband
//! baseline, E-SSP, LCE-SSP and the representative-angle finder.
//!
//! Atom indices are 0-based everywhere in the public API. The LCE-SSP window
//! arithmetic is done on 1-based indices internally, where the coarse/fine
//! index relations are naturally expressed.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::ChannelSet;
use crate::codebook::{make_grid, Codebook, Dictionary, FrequencyIndependent, IdealDictionary};
use crate::config::{LceConfig, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::{pinv, CMat};
use crate::precoder::{build_analog, refine_digital, FullyDigital, PrecodingSolution};

/// Summed stream projections `psi_k(g)` over a subset of atoms and subcarriers.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMap {
    /// `|atom_ids| x |subcarriers|`.
    pub per_subcarrier: DMatrix<f64>,
    /// Row sums of `per_subcarrier`.
    pub averaged: Vec<f64>,
    pub atom_ids: Vec<usize>,
    pub subcarriers: Vec<usize>,
    /// Grid angle of every row.
    pub angles: Vec<f64>,
}

impl ProjectionMap {
    /// Position (into `atom_ids`) of the largest projection at subcarrier column `col`.
    pub fn argmax_at(&self, col: usize) -> usize {
        argmax(self.per_subcarrier.column(col).iter().copied())
    }

    /// Largest minus smallest per-subcarrier argmax position.
    pub fn argmax_spread(&self) -> usize {
        let picks: Vec<usize> = (0..self.subcarriers.len())
            .map(|c| self.argmax_at(c))
            .collect();
        picks.iter().max().copied().unwrap_or(0) - picks.iter().min().copied().unwrap_or(0)
    }

    /// Heatmap CSV: header `phi,<subcarrier indices>`, one row per atom.
    pub fn write_heatmap_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["phi".to_string()];
        header.extend(self.subcarriers.iter().map(|k| k.to_string()));
        out.write_record(&header)?;
        for (row, phi) in self.angles.iter().enumerate() {
            let mut rec = vec![phi.to_string()];
            rec.extend(self.per_subcarrier.row(row).iter().map(|v| v.to_string()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Two-column `phi,psi` CSV of the summed curve.
    pub fn write_curve_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["phi", "psi"])?;
        for (phi, v) in self.angles.iter().zip(&self.averaged) {
            out.write_record([phi.to_string(), v.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// First index of the maximum; NaN and `-inf` never win.
fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// `psi_k(g) = sum_s |atom_{k,g}^H f_{k,s}|^2` for the requested atoms and subcarriers.
pub fn projection_map<D: Dictionary + ?Sized>(
    dict: &D,
    f: &[CMat],
    atoms: &[usize],
    subcarriers: &[usize],
) -> ProjectionMap {
    let cols: Vec<Vec<f64>> = subcarriers
        .par_iter()
        .map(|&k| dict.projections(k, atoms, &f[k]))
        .collect();
    let per_subcarrier = DMatrix::from_fn(atoms.len(), subcarriers.len(), |r, c| cols[c][r]);
    let averaged = (0..atoms.len())
        .map(|r| per_subcarrier.row(r).sum())
        .collect();
    ProjectionMap {
        per_subcarrier,
        averaged,
        atom_ids: atoms.to_vec(),
        subcarriers: subcarriers.to_vec(),
        angles: atoms.iter().map(|&g| dict.angle(g)).collect(),
    }
}

/// Sum of projections over `subcarriers`, evaluated concurrently.
fn summed_projections<D: Dictionary + ?Sized>(
    dict: &D,
    f: &[CMat],
    atoms: &[usize],
    subcarriers: &[usize],
) -> Vec<f64> {
    let per_k: Vec<Vec<f64>> = subcarriers
        .par_iter()
        .map(|&k| dict.projections(k, atoms, &f[k]))
        .collect();
    sum_in_order(per_k, atoms.len())
}

/// Element-wise sum in subcarrier order, so results do not depend on how the
/// parallel work was split.
fn sum_in_order(per_k: Vec<Vec<f64>>, n: usize) -> Vec<f64> {
    let mut acc = vec![0.0; n];
    for v in per_k {
        acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
    }
    acc
}

/// Ids of the `n_peak` largest local maxima of `values`.
///
/// A position is a peak when it is `>=` both neighbours (one neighbour at the
/// ends). Ties go to the smaller id. When there are fewer than `n_peak` peaks
/// the remaining slots take the largest non-peak values.
pub fn peak_finder(values: &[f64], ids: &[usize], n_peak: usize) -> Result<Vec<usize>> {
    if values.len() != ids.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} ids", values.len()),
            found: format!("{}", ids.len()),
        });
    }
    let n = values.len();
    if n_peak > n {
        return Err(Error::PeakCount {
            requested: n_peak,
            available: n,
        });
    }
    let is_peak = |i: usize| {
        let left = i == 0 || values[i] >= values[i - 1];
        let right = i + 1 == n || values[i] >= values[i + 1];
        left && right
    };
    let order = |a: &usize, b: &usize| {
        values[*b]
            .total_cmp(&values[*a])
            .then(ids[*a].cmp(&ids[*b]))
    };
    let (mut peaks, mut rest): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| is_peak(i));
    peaks.sort_by(order);
    rest.sort_by(order);
    Ok(peaks
        .into_iter()
        .chain(rest)
        .take(n_peak)
        .map(|i| ids[i])
        .collect())
}

/// Drops duplicates (keeping the first occurrence) and ids outside `[lo, hi]`.
pub fn index_cleaner(ids: &[i64], lo: i64, hi: i64) -> Vec<i64> {
    let mut seen = std::collections::HashSet::new();
    ids.iter()
        .copied()
        .filter(|id| (lo..=hi).contains(id) && seen.insert(*id))
        .collect()
}

/// Output of the narrowband SSP.
#[derive(Debug, Clone)]
pub struct NarrowbandSsp {
    /// Atoms in selection order.
    pub atoms: Vec<usize>,
    pub a: CMat,
    pub d: CMat,
}

/// Atom selection shared by SSP and E-SSP.
#[derive(Debug, Clone)]
pub struct IterativeSelection {
    /// Atoms in selection order.
    pub atoms: Vec<usize>,
    /// `sum_k ||F_k - A_k^(i) D_k^(i)||_F` after each iteration.
    pub residual_norms: Vec<f64>,
    /// Least-squares digital precoders of the last iteration.
    pub ls_digital: Vec<CMat>,
    /// Number of atom/subcarrier projections evaluated.
    pub projections: usize,
}

/// Greedy simultaneous OMP over the subcarriers in `subcarriers`.
///
/// Each iteration sums the stream projections of the normalized residuals,
/// picks the largest not-yet-selected atom, and refits least squares. Selected
/// atoms are masked so that the analog stage never repeats a column.
pub fn iterative_select<D: Dictionary + ?Sized>(
    dict: &D,
    f: &[CMat],
    n_rf: usize,
    subcarriers: &[usize],
) -> Result<IterativeSelection> {
    let g = dict.n_atoms();
    if n_rf > g {
        return Err(Error::InsufficientAtoms {
            needed: n_rf,
            available: g,
        });
    }
    let all: Vec<usize> = (0..g).collect();
    let mut residual: Vec<CMat> = subcarriers.iter().map(|&k| f[k].clone()).collect();
    let mut atoms: Vec<usize> = Vec::with_capacity(n_rf);
    let mut residual_norms = Vec::with_capacity(n_rf);
    let mut ls = Vec::new();
    let mut projections = 0;
    for _ in 0..n_rf {
        let per_k: Vec<Vec<f64>> = subcarriers
            .par_iter()
            .zip(residual.par_iter())
            .map(|(&k, r)| dict.projections(k, &all, r))
            .collect();
        let mut psi = sum_in_order(per_k, g);
        projections += g * subcarriers.len();
        for &a in &atoms {
            psi[a] = f64::NEG_INFINITY;
        }
        atoms.push(argmax(psi.into_iter()));

        let fits: Vec<(CMat, CMat, f64)> = subcarriers
            .par_iter()
            .map(|&k| {
                let a = dict.columns(k, &atoms);
                let d = pinv(&a)? * &f[k];
                let res = &f[k] - &a * &d;
                let norm = res.norm();
                let normalized = if norm > 0.0 {
                    res * Complex64::new(1.0 / norm, 0.0)
                } else {
                    res
                };
                Ok((d, normalized, norm))
            })
            .collect::<Result<_>>()?;
        residual_norms.push(fits.iter().map(|x| x.2).sum());
        ls.clear();
        residual.clear();
        for (d, r, _) in fits {
            ls.push(d);
            residual.push(r);
        }
    }
    Ok(IterativeSelection {
        atoms,
        residual_norms,
        ls_digital: ls,
        projections,
    })
}

/// Narrowband SSP on an explicit `N_T x G` dictionary with unit-norm columns.
///
/// The final `D` is scaled so that `||A D||_F^2 = N_s`.
pub fn ssp_narrowband(dict: &CMat, f: &CMat, n_rf: usize) -> Result<NarrowbandSsp> {
    let wrapped = MatrixDictionary(dict);
    let sel = iterative_select(&wrapped, std::slice::from_ref(f), n_rf, &[0])?;
    let a = dict.select_columns(&sel.atoms);
    if crate::linalg::svd(&a)?.s.iter().any(|&s| s < 1e-10) {
        return Err(Error::RankDeficient {
            subcarrier: 0,
            atoms: crate::precoder::collinear_columns(&a),
        });
    }
    let d = sel.ls_digital.into_iter().next().expect("one subcarrier");
    let norm = (&a * &d).norm();
    let n_s = f.ncols() as f64;
    let d = if norm > 0.0 {
        d * Complex64::new(n_s.sqrt() / norm, 0.0)
    } else {
        d
    };
    Ok(NarrowbandSsp {
        atoms: sel.atoms,
        a,
        d,
    })
}

/// One dense matrix viewed as a single-subcarrier dictionary.
struct MatrixDictionary<'a>(&'a CMat);

impl Dictionary for MatrixDictionary<'_> {
    fn n_antennas(&self) -> usize {
        self.0.nrows()
    }
    fn n_atoms(&self) -> usize {
        self.0.ncols()
    }
    fn n_subcarriers(&self) -> usize {
        1
    }
    fn angle(&self, g: usize) -> f64 {
        g as f64
    }
    fn column(&self, _k: usize, g: usize) -> crate::linalg::CVec {
        self.0.column(g).into_owned()
    }
}

fn check_inputs<D: Dictionary + ?Sized>(
    dict: &D,
    fd: &FullyDigital,
    ch: &ChannelSet,
    cfg: &SystemConfig,
) -> Result<()> {
    if dict.n_subcarriers() != cfg.k || fd.f.len() != cfg.k || ch.h.len() != cfg.k {
        return Err(Error::ShapeMismatch {
            expected: format!("{} subcarriers", cfg.k),
            found: format!(
                "dictionary {}, precoders {}, channels {}",
                dict.n_subcarriers(),
                fd.f.len(),
                ch.h.len()
            ),
        });
    }
    if dict.n_antennas() != cfg.n_t {
        return Err(Error::ShapeMismatch {
            expected: format!("{} antennas", cfg.n_t),
            found: format!("{}", dict.n_antennas()),
        });
    }
    Ok(())
}

/// Slices the codebooks at `atoms` (sorted ascending) and refines the digital stage.
pub fn solution_from_atoms(
    codebook: &Codebook,
    atoms: &[usize],
    ch: &ChannelSet,
    cfg: &SystemConfig,
) -> Result<PrecodingSolution> {
    let mut atoms = atoms.to_vec();
    atoms.sort_unstable();
    let phase = codebook.phase_columns(&atoms);
    let delay = codebook.delay_columns(&atoms);
    let analog = build_analog(&phase, &delay, cfg);
    let digital = refine_digital(ch, &analog, cfg)?;
    Ok(PrecodingSolution {
        atom_indices: atoms,
        phase,
        delay,
        analog,
        digital,
    })
}

/// E-SSP: greedy selection over all subcarriers on the feasible codebook,
/// followed by rate-optimal digital refinement.
pub fn essp(
    codebook: &Codebook,
    fd: &FullyDigital,
    ch: &ChannelSet,
    cfg: &SystemConfig,
) -> Result<PrecodingSolution> {
    check_inputs(codebook, fd, ch, cfg)?;
    let all: Vec<usize> = (0..cfg.k).collect();
    let sel = iterative_select(codebook, &fd.f, cfg.n_rf, &all)?;
    solution_from_atoms(codebook, &sel.atoms, ch, cfg)
}

/// Wideband SSP with phase shifters only: the narrowband steering matrix at
/// every subcarrier and zero delays.
pub fn ssp_freq_independent(
    dict: &FrequencyIndependent,
    fd: &FullyDigital,
    ch: &ChannelSet,
    cfg: &SystemConfig,
) -> Result<PrecodingSolution> {
    check_inputs(dict, fd, ch, cfg)?;
    let all: Vec<usize> = (0..cfg.k).collect();
    let mut atoms = iterative_select(dict, &fd.f, cfg.n_rf, &all)?.atoms;
    atoms.sort_unstable();
    let a = dict.columns(0, &atoms);
    let phase = &a * Complex64::new((cfg.n_t as f64).sqrt(), 0.0);
    let analog = vec![a; cfg.k];
    let digital = refine_digital(ch, &analog, cfg)?;
    Ok(PrecodingSolution {
        atom_indices: atoms,
        phase,
        delay: DMatrix::zeros(cfg.n_ttd, cfg.n_rf),
        analog,
        digital,
    })
}

/// Non-iterative selection over the full grid: top-`n_rf` peaks of the
/// projections summed over `subcarriers`.
pub fn peak_select<D: Dictionary + ?Sized>(
    dict: &D,
    f: &[CMat],
    n_rf: usize,
    subcarriers: &[usize],
) -> Result<Vec<usize>> {
    let all: Vec<usize> = (0..dict.n_atoms()).collect();
    let psi = summed_projections(dict, f, &all, subcarriers);
    peak_finder(&psi, &all, n_rf)
}

/// Atom selection by LCE-SSP together with its cost accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct LceSelection {
    /// Final atoms in peak order (largest projection first), 0-based.
    pub atoms: Vec<usize>,
    /// Coarse picks as 0-based global grid indices.
    pub coarse_atoms: Vec<usize>,
    /// Cleaned fine candidates, ascending, 0-based.
    pub candidates: Vec<usize>,
    /// Distinct atoms whose projections were computed.
    pub projected_atoms: usize,
    /// Atom/subcarrier projections evaluated.
    pub projections: usize,
    pub sampled_subcarriers: Vec<usize>,
}

/// Two-stage coarse/fine peak selection on `K'` evenly sampled subcarriers.
///
/// Coarse atoms are `1, 1 + dG, ...` (1-based) and the fine window around coarse
/// pick `c` is `dG*c - G_a ..= dG*c + G_a`. Fine candidates are sorted ascending
/// before peak finding so neighbours on the candidate curve are neighbours on
/// the grid. Projections of coarse atoms are reused in the fine stage; the
/// values are identical since both stages use the same subcarriers.
pub fn lce_select<D: Dictionary + ?Sized>(
    dict: &D,
    f: &[CMat],
    n_rf: usize,
    lce: &LceConfig,
) -> Result<LceSelection> {
    let g = dict.n_atoms();
    let k = dict.n_subcarriers();
    if lce.g != g {
        return Err(Error::ShapeMismatch {
            expected: format!("grid of {} atoms", lce.g),
            found: format!("{g}"),
        });
    }
    if lce.g_c == 0 || !g.is_multiple_of(lce.g_c) {
        return Err(Error::GridRatio { g, g_c: lce.g_c });
    }
    if lce.k_prime == 0 || !k.is_multiple_of(lce.k_prime) {
        return Err(Error::SubcarrierRatio {
            k,
            k_prime: lce.k_prime,
        });
    }
    let dg = g / lce.g_c;
    let dk = k / lce.k_prime;
    let sampled: Vec<usize> = (0..lce.k_prime).map(|i| i * dk).collect();

    let coarse: Vec<usize> = (0..lce.g_c).map(|c| c * dg).collect();
    let psi_c = summed_projections(dict, f, &coarse, &sampled);
    let positions: Vec<usize> = (1..=lce.g_c).collect();
    let picks = peak_finder(&psi_c, &positions, n_rf)?;

    let mut window = Vec::new();
    for &p in &picks {
        let center = (dg * p) as i64;
        let ga = lce.g_a as i64;
        window.extend(center - ga..=center + ga);
    }
    let mut cleaned = index_cleaner(&window, 1, g as i64);
    cleaned.sort_unstable();
    let candidates: Vec<usize> = cleaned.iter().map(|&i| (i - 1) as usize).collect();
    if candidates.len() < n_rf {
        return Err(Error::InsufficientAtoms {
            needed: n_rf,
            available: candidates.len(),
        });
    }

    let fresh: Vec<usize> = candidates.iter().copied().filter(|a| a % dg != 0).collect();
    let psi_fresh = summed_projections(dict, f, &fresh, &sampled);
    let mut fresh_iter = psi_fresh.into_iter();
    let psi_f: Vec<f64> = candidates
        .iter()
        .map(|&a| {
            if a % dg == 0 {
                psi_c[a / dg]
            } else {
                fresh_iter.next().expect("one value per fresh candidate")
            }
        })
        .collect();
    let atoms = peak_finder(&psi_f, &candidates, n_rf)?;
    let projected_atoms = lce.g_c + fresh.len();
    Ok(LceSelection {
        atoms,
        coarse_atoms: picks.iter().map(|p| (p - 1) * dg).collect(),
        candidates,
        projected_atoms,
        projections: projected_atoms * sampled.len(),
        sampled_subcarriers: sampled,
    })
}

/// LCE-SSP: [`lce_select`] on the feasible codebook, then digital refinement
/// at every subcarrier.
pub fn lce_ssp(
    codebook: &Codebook,
    fd: &FullyDigital,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    lce: &LceConfig,
) -> Result<PrecodingSolution> {
    Ok(lce_ssp_with_stats(codebook, fd, ch, cfg, lce)?.0)
}

pub fn lce_ssp_with_stats(
    codebook: &Codebook,
    fd: &FullyDigital,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    lce: &LceConfig,
) -> Result<(PrecodingSolution, LceSelection)> {
    check_inputs(codebook, fd, ch, cfg)?;
    let sel = lce_select(codebook, &fd.f, cfg.n_rf, lce)?;
    let sol = solution_from_atoms(codebook, &sel.atoms, ch, cfg)?;
    Ok((sol, sel))
}

/// Grid angles of `N_RF` dominant directions, found by LCE selection with the
/// ideal matrices and the conjugate-transposed channels (`N_T x N_R`) as
/// measurements. Returned in peak order.
pub fn find_representative_angles(
    ch: &ChannelSet,
    cfg: &SystemConfig,
    lce: &LceConfig,
) -> Result<Vec<f64>> {
    lce.validate(cfg)?;
    let dict = IdealDictionary::new(make_grid(lce.g), cfg);
    let meas: Vec<CMat> = ch.h.iter().map(|h| h.adjoint()).collect();
    let sel = lce_select(&dict, &meas, cfg.n_rf, lce)?;
    Ok(sel.atoms.iter().map(|&g| dict.angle(g)).collect())
}
