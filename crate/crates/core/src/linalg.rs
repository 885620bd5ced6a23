//! Dense complex linear algebra on top of `nalgebra`: SVD, pseudoinverse,
//! inverse square root of a Gram matrix, and water-filling.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Relative cutoff below which singular values are treated as zero.
pub const PINV_RCOND: f64 = 1e-10;

/// Relative eigenvalue floor for a Gram matrix to count as invertible.
pub const GRAM_RCOND: f64 = 1e-12;

/// Thin SVD `A = U diag(s) V^H` with `s` sorted in descending order.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

fn check_finite(a: &CMat, what: &'static str) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { what })
    }
}

pub fn svd(a: &CMat) -> Result<SvdResult> {
    check_finite(a, "svd input")?;
    let (rows, cols) = a.shape();
    let r = rows.min(cols);
    if r == 0 {
        return Ok(SvdResult {
            u: CMat::zeros(rows, 0),
            s: Vec::new(),
            v: CMat::zeros(cols, 0),
        });
    }
    let dec = a.clone().svd(true, true);
    let u = dec.u.expect("requested U");
    let v_t = dec.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| dec.singular_values[j].total_cmp(&dec.singular_values[i]));
    let s = order.iter().map(|&i| dec.singular_values[i]).collect();
    let u = CMat::from_fn(rows, r, |row, c| u[(row, order[c])]);
    let v = CMat::from_fn(cols, r, |row, c| v_t[(order[c], row)].conj());
    Ok(SvdResult { u, s, v })
}

/// Moore–Penrose pseudoinverse with relative singular-value threshold [`PINV_RCOND`].
pub fn pinv(a: &CMat) -> Result<CMat> {
    let (rows, cols) = a.shape();
    let dec = svd(a)?;
    let s_max = dec.s.first().copied().unwrap_or(0.0);
    let mut out = CMat::zeros(cols, rows);
    if s_max == 0.0 {
        return Ok(out);
    }
    for (i, &s) in dec.s.iter().enumerate() {
        if s < PINV_RCOND * s_max {
            continue;
        }
        let vi = dec.v.column(i);
        let ui = dec.u.column(i);
        out += (vi * ui.adjoint()) * Complex64::new(1.0 / s, 0.0);
    }
    Ok(out)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(x: &CMat) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(x.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Returns `B = (A^H A)^{-1/2}` through an eigendecomposition of the Gram matrix.
pub fn inv_sqrt_gram(a: &CMat) -> Result<CMat> {
    check_finite(a, "inv_sqrt_gram input")?;
    let gram = a.adjoint() * a;
    let n = gram.nrows();
    let eig = SymmetricEigen::new(gram);
    let max_eig = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let min_eig = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if n == 0 {
        return Ok(CMat::zeros(0, 0));
    }
    if max_eig.is_nan() || max_eig <= 0.0 || min_eig < GRAM_RCOND * max_eig {
        return Err(Error::SingularGram { min_eig, max_eig });
    }
    let v = &eig.eigenvectors;
    let scaled = CMat::from_fn(n, n, |r, c| v[(r, c)] / eig.eigenvalues[c].sqrt());
    Ok(scaled * v.adjoint())
}

/// Per-stream amplitude weights `p` with `||p||^2` equal to the power budget.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub p: Vec<f64>,
}

impl PowerAllocation {
    pub fn powers(&self) -> Vec<f64> {
        self.p.iter().map(|x| x * x).collect()
    }

    /// `sum_i log2(1 + gain * sigma_i^2 * q_i)`.
    pub fn objective(&self, singular_values: &[f64], gain_factor: f64) -> f64 {
        water_fill_objective(singular_values, &self.powers(), gain_factor)
    }
}

pub fn water_fill_objective(singular_values: &[f64], powers: &[f64], gain_factor: f64) -> f64 {
    singular_values
        .iter()
        .zip(powers)
        .map(|(s, q)| (1.0 + gain_factor * s * s * q).log2())
        .sum()
}

/// Exact water-filling: `q_i = max(0, mu - 1 / (gain * sigma_i^2))`, `sum q_i = total`.
///
/// The water level is found by testing active sets in order of increasing
/// inverse gain. Zero singular values never receive power.
pub fn water_fill(
    singular_values: &[f64],
    gain_factor: f64,
    total: f64,
) -> Result<PowerAllocation> {
    if !(gain_factor.is_finite() && gain_factor > 0.0) {
        return Err(Error::InvalidParameter {
            name: "gain_factor",
            reason: format!("must be finite and > 0, got {gain_factor}"),
        });
    }
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::InvalidParameter {
            name: "total",
            reason: format!("must be finite and > 0, got {total}"),
        });
    }
    if singular_values.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(Error::NonFinite {
            what: "water_fill singular values",
        });
    }
    let mut active: Vec<(usize, f64)> = singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > 0.0)
        .map(|(i, &s)| (i, 1.0 / (gain_factor * s * s)))
        .filter(|(_, inv)| inv.is_finite())
        .collect();
    if active.is_empty() {
        return Err(Error::NoUsableChannel);
    }
    active.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));

    let mut n = active.len();
    let mut level = 0.0;
    while n > 0 {
        let sum_inv: f64 = active[..n].iter().map(|(_, inv)| inv).sum();
        level = (total + sum_inv) / n as f64;
        if level > active[n - 1].1 {
            break;
        }
        n -= 1;
    }
    let mut p = vec![0.0; singular_values.len()];
    for &(i, inv) in &active[..n] {
        p[i] = (level - inv).max(0.0).sqrt();
    }
    Ok(PowerAllocation { p })
}

/// `log2 det(I + X)` for Hermitian positive semi-definite `X`.
pub fn log2_det_identity_plus(x: &CMat) -> Result<f64> {
    check_finite(x, "log-det argument")?;
    let ev = hermitian_eigenvalues(x);
    let v: f64 = ev.iter().map(|l| (1.0 + l.max(0.0)).log2()).sum();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { what: "log-det" })
    }
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `exp(j * phase)`.
pub fn cis(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat {
        CMat::from_fn(r, c, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        })
    }

    fn rel(a: &CMat, b: &CMat) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn svd_identity() {
        let dec = svd(&CMat::identity(2, 2)).unwrap();
        assert!((dec.s[0] - 1.0).abs() < 1e-14 && (dec.s[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn svd_diagonal_with_zero() {
        let mut a = CMat::zeros(2, 2);
        a[(0, 0)] = c(3.0, 0.0);
        let dec = svd(&a).unwrap();
        assert!((dec.s[0] - 3.0).abs() < 1e-14);
        assert!(dec.s[1].abs() < 1e-14);
        assert!((dec.u[(0, 0)].norm() - 1.0).abs() < 1e-12);
        assert!((dec.v[(0, 0)].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn svd_reconstructs_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (r, cols) in [(4, 6), (6, 4), (4, 64), (1, 5)] {
            let a = random_matrix(&mut rng, r, cols);
            let dec = svd(&a).unwrap();
            let s = CMat::from_diagonal(&CVec::from_iterator(
                dec.s.len(),
                dec.s.iter().map(|&x| c(x, 0.0)),
            ));
            let back = &dec.u * s * dec.v.adjoint();
            assert!(rel(&back, &a) < 1e-10);
            let k = dec.s.len();
            assert!((dec.u.adjoint() * &dec.u - CMat::identity(k, k)).norm() < 1e-9);
            assert!((dec.v.adjoint() * &dec.v - CMat::identity(k, k)).norm() < 1e-9);
            assert!(dec.s.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn svd_rejects_non_finite() {
        let mut a = CMat::identity(2, 2);
        a[(1, 0)] = c(f64::NAN, 0.0);
        assert!(matches!(svd(&a), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn pinv_diagonal() {
        let mut a = CMat::zeros(2, 2);
        a[(0, 0)] = c(2.0, 0.0);
        a[(1, 1)] = c(4.0, 0.0);
        let p = pinv(&a).unwrap();
        assert!((p[(0, 0)] - c(0.5, 0.0)).norm() < 1e-14);
        assert!((p[(1, 1)] - c(0.25, 0.0)).norm() < 1e-14);
        assert!(p[(0, 1)].norm() < 1e-14);
    }

    #[test]
    fn pinv_unit_column_is_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut a = random_matrix(&mut rng, 5, 1);
        let n = a.norm();
        a /= c(n, 0.0);
        assert!(rel(&pinv(&a).unwrap(), &a.adjoint()) < 1e-12);
    }

    #[test]
    fn pinv_penrose_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let a = random_matrix(&mut rng, 6, 3);
            let p = pinv(&a).unwrap();
            assert!((&p * &a - CMat::identity(3, 3)).norm() < 1e-8);
            assert!(rel(&(&a * &p * &a), &a) < 1e-8);
            assert!(rel(&(&p * &a * &p), &p) < 1e-8);
            let ap = &a * &p;
            assert!(rel(&ap.adjoint(), &ap) < 1e-8);
            let pa = &p * &a;
            assert!(rel(&pa.adjoint(), &pa) < 1e-8);
            assert!(rel(&pinv(&p).unwrap(), &a) < 1e-7);
        }
    }

    #[test]
    fn pinv_rank_deficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let col = random_matrix(&mut rng, 4, 1);
        let a = CMat::from_fn(4, 2, |r, _| col[(r, 0)]);
        let p = pinv(&a).unwrap();
        assert!(rel(&(&a * &p * &a), &a) < 1e-8);
        assert!(pinv(&CMat::zeros(3, 2)).unwrap().norm() == 0.0);
    }

    #[test]
    fn inv_sqrt_gram_orthonormal_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let q = svd(&random_matrix(&mut rng, 8, 3)).unwrap().u;
        let b = inv_sqrt_gram(&q).unwrap();
        assert!((b - CMat::identity(3, 3)).norm() < 1e-10);
    }

    #[test]
    fn inv_sqrt_gram_scaled_column() {
        let mut a = CMat::zeros(3, 1);
        a[(0, 0)] = c(2.0, 0.0);
        let b = inv_sqrt_gram(&a).unwrap();
        assert!((b[(0, 0)] - c(0.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn inv_sqrt_gram_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = random_matrix(&mut rng, 8, 3);
        let b = inv_sqrt_gram(&a).unwrap();
        let gram = a.adjoint() * &a;
        assert!((&b * &gram * &b - CMat::identity(3, 3)).norm() < 1e-8);
        let inv = gram.clone().try_inverse().unwrap();
        assert!(rel(&(&b * &b), &inv) < 1e-8);
    }

    #[test]
    fn inv_sqrt_gram_singular() {
        let col = CMat::from_fn(4, 1, |r, _| c(r as f64 + 1.0, 0.5));
        let a = CMat::from_fn(4, 2, |r, _| col[(r, 0)]);
        assert!(matches!(inv_sqrt_gram(&a), Err(Error::SingularGram { .. })));
    }

    #[test]
    fn water_fill_symmetric() {
        for gain in [0.1, 1.0, 10.0] {
            let w = water_fill(&[1.0, 1.0], gain, 2.0).unwrap();
            assert!((w.p[0] - 1.0).abs() < 1e-12 && (w.p[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn water_fill_zero_gain_excluded() {
        let w = water_fill(&[1.0, 0.0], 1.0, 2.0).unwrap();
        assert!((w.p[0] - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(w.p[1], 0.0);
    }

    #[test]
    fn water_fill_matches_grid_search() {
        let sv = [2.0, 1.0];
        let w = water_fill(&sv, 1.0, 2.0).unwrap();
        let ours = w.objective(&sv, 1.0);
        let mut best = f64::NEG_INFINITY;
        let steps = 20_000;
        for i in 0..=steps {
            let q1 = 2.0 * i as f64 / steps as f64;
            best = best.max(water_fill_objective(&sv, &[q1, 2.0 - q1], 1.0));
        }
        assert!((ours - best).abs() < 1e-3, "{ours} vs {best}");
        assert!(ours >= best - 1e-12);
    }

    #[test]
    fn water_fill_all_zero_errors() {
        assert!(matches!(
            water_fill(&[0.0, 0.0], 1.0, 2.0),
            Err(Error::NoUsableChannel)
        ));
    }

    #[test]
    fn water_fill_drops_weak_channel() {
        // inverse gains 0.01 and 100; the weak channel sits above the water level
        let w = water_fill(&[10.0, 0.1], 1.0, 2.0).unwrap();
        assert!((w.p[0] * w.p[0] - 2.0).abs() < 1e-12);
        assert_eq!(w.p[1], 0.0);
    }

    #[test]
    fn log_det_of_two_identity() {
        let x = CMat::identity(2, 2);
        assert!((log2_det_identity_plus(&x).unwrap() - 2.0).abs() < 1e-14);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn water_fill_kkt(
                sv in proptest::collection::vec(0.0f64..5.0, 1..6),
                gain in 0.01f64..100.0,
                total in 0.1f64..10.0,
            ) {
                prop_assume!(sv.iter().any(|&s| s > 1e-3));
                let w = water_fill(&sv, gain, total).unwrap();
                let q = w.powers();
                prop_assert!((q.iter().sum::<f64>() - total).abs() < 1e-9 * total.max(1.0));
                let levels: Vec<f64> = sv.iter().zip(&q)
                    .filter(|(_, &qi)| qi > 0.0)
                    .map(|(&s, &qi)| qi + 1.0 / (gain * s * s))
                    .collect();
                let mu = levels[0];
                for l in &levels {
                    prop_assert!((l - mu).abs() < 1e-6 * mu.max(1.0));
                }
                for (&s, &qi) in sv.iter().zip(&q) {
                    if qi == 0.0 && s > 0.0 {
                        prop_assert!(1.0 / (gain * s * s) >= mu - 1e-9 * mu.max(1.0));
                    }
                }
                let uniform = vec![total / sv.len() as f64; sv.len()];
                prop_assert!(
                    w.objective(&sv, gain) >= water_fill_objective(&sv, &uniform, gain) - 1e-12
                );
            }
        }
    }
}
