//! Fast invariant checks behind `dpp-bench selftest`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::generate_channel;
use crate::codebook::{compensate_frequency_bias, superimposed_phase, Codebook};
use crate::config::{derive_subcarrier_frequencies, ClusterConfig, LceConfig, Seed, SystemConfig};
use crate::linalg::{water_fill, water_fill_objective};
use crate::multiuser::{generate_multiuser, zf_fully_digital};
use crate::precoder::{build_analog, check_constraints, fully_digital, refine_digital, sum_rate};
use crate::sparse::{essp, lce_ssp_with_stats, peak_finder};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<String, String>) -> Check {
    match f() {
        Ok(detail) => Check {
            name,
            passed: true,
            detail,
        },
        Err(detail) => Check {
            name,
            passed: false,
            detail,
        },
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn small() -> (SystemConfig, LceConfig) {
    (
        SystemConfig {
            n_t: 32,
            n_ttd: 4,
            m: 8,
            k: 8,
            ..SystemConfig::desk()
        },
        LceConfig {
            g: 128,
            g_c: 32,
            g_a: 4,
            k_prime: 4,
        },
    )
}

pub fn run_all() -> Vec<Check> {
    vec![
        check("subcarrier frequencies", || {
            let cfg = SystemConfig::desk();
            let f = derive_subcarrier_frequencies(&cfg);
            let mean = f.iter().sum::<f64>() / f.len() as f64;
            ensure(f.windows(2).all(|w| w[1] > w[0]), || {
                "not increasing".into()
            })?;
            ensure(((mean - cfg.f_c) / cfg.f_c).abs() < 1e-12, || {
                format!("mean {mean}")
            })?;
            Ok(format!("{} subcarriers centred on {} Hz", f.len(), cfg.f_c))
        }),
        check("codebook exact with one antenna per TTD", || {
            let cfg = SystemConfig {
                n_ttd: 64,
                m: 1,
                ..SystemConfig::desk()
            };
            let e = Codebook::build(&cfg, 128)
                .map_err(|e| e.to_string())?
                .error()
                .map_err(|e| e.to_string())?;
            ensure(e < 1e-12, || format!("error {e:e}"))?;
            Ok(format!("error {e:e}"))
        }),
        check("codebook ranges", || {
            let cfg = SystemConfig::desk();
            let cb = Codebook::build(&cfg, 256).map_err(|e| e.to_string())?;
            let modulus = cb
                .phase
                .iter()
                .map(|z| (z.norm() - 1.0).abs())
                .fold(0.0, f64::max);
            let lo = cb.delay.min();
            let hi = cb.delay.max();
            ensure(modulus < 1e-12, || format!("modulus error {modulus:e}"))?;
            ensure(lo >= 0.0 && hi <= cb.t_max, || {
                format!("delays [{lo:e}, {hi:e}]")
            })?;
            Ok(format!("delays within [{lo:e}, {hi:e}] s"))
        }),
        check("fully-digital power", || {
            let cfg = SystemConfig::desk();
            let ch = generate_channel(&cfg, &ClusterConfig::default(), Seed::new(1, 0));
            let fd = fully_digital(&ch, &cfg).map_err(|e| e.to_string())?;
            let worst =
                fd.f.iter()
                    .map(|f| (f.norm_squared() - cfg.n_s as f64).abs())
                    .fold(0.0, f64::max);
            ensure(worst < 1e-9, || format!("power error {worst:e}"))?;
            Ok(format!("max power error {worst:e}"))
        }),
        check("E-SSP and LCE-SSP constraints", || {
            let (cfg, lce) = small();
            let cb = Codebook::build(&cfg, lce.g).map_err(|e| e.to_string())?;
            for t in 0..4 {
                let ch = generate_channel(&cfg, &ClusterConfig::default(), Seed::new(2, t));
                let fd = fully_digital(&ch, &cfg).map_err(|e| e.to_string())?;
                let a = essp(&cb, &fd, &ch, &cfg).map_err(|e| e.to_string())?;
                let (b, sel) =
                    lce_ssp_with_stats(&cb, &fd, &ch, &cfg, &lce).map_err(|e| e.to_string())?;
                for sol in [&a, &b] {
                    let rep = check_constraints(sol, cfg.n_s);
                    ensure(rep.holds(cb.t_max), || format!("trial {t}: {rep:?}"))?;
                }
                let bound = lce.g_c + 2 * cfg.n_rf * lce.g_a;
                ensure(sel.projected_atoms <= bound, || {
                    format!("{} projected atoms > {bound}", sel.projected_atoms)
                })?;
            }
            Ok("4 trials".into())
        }),
        check("frequency bias absorbed by phase shifters", || {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let mut worst: f64 = 0.0;
            for _ in 0..1000 {
                let theta = rng.random_range(-10.0..10.0);
                let t = rng.random_range(0.0..5e-9);
                let df = rng.random_range(-2e11..2e11);
                let f = rng.random_range(5e10..2e11);
                let a = superimposed_phase(compensate_frequency_bias(theta, t, df), f - df, t);
                worst = worst.max((a - superimposed_phase(theta, f, t)).norm());
            }
            ensure(worst < 1e-10, || format!("max mismatch {worst:e}"))?;
            Ok(format!("max mismatch {worst:e}"))
        }),
        check("per-chain delay bias keeps the rate", || {
            let (cfg, lce) = small();
            let cb = Codebook::build(&cfg, lce.g).map_err(|e| e.to_string())?;
            let mut rng = ChaCha8Rng::seed_from_u64(6);
            let mut worst: f64 = 0.0;
            for t in 0..4 {
                let ch = generate_channel(&cfg, &ClusterConfig::default(), Seed::new(3, t));
                let fd = fully_digital(&ch, &cfg).map_err(|e| e.to_string())?;
                let sol = essp(&cb, &fd, &ch, &cfg).map_err(|e| e.to_string())?;
                let mut delay = sol.delay.clone();
                for j in 0..cfg.n_rf {
                    delay
                        .column_mut(j)
                        .add_scalar_mut(rng.random_range(0.0..1e-9));
                }
                let analog = build_analog(&sol.phase, &delay, &cfg);
                let digital = refine_digital(&ch, &analog, &cfg).map_err(|e| e.to_string())?;
                let r0 =
                    sum_rate(&ch, &sol.analog, &sol.digital, &cfg).map_err(|e| e.to_string())?;
                let r1 = sum_rate(&ch, &analog, &digital, &cfg).map_err(|e| e.to_string())?;
                worst = worst.max(((r1.total - r0.total) / r0.total).abs());
            }
            ensure(worst < 1e-9, || format!("relative rate change {worst:e}"))?;
            Ok(format!("max relative change {worst:e}"))
        }),
        check("water-filling vs grid search", || {
            let s = [1.3, 0.7, 0.2];
            let gain = 2.0;
            let wf = water_fill(&s, gain, 3.0).map_err(|e| e.to_string())?;
            let obj = wf.objective(&s, gain);
            let mut best = f64::NEG_INFINITY;
            let steps = 300;
            for i in 0..=steps {
                for j in 0..=(steps - i) {
                    let q = [
                        3.0 * i as f64 / steps as f64,
                        3.0 * j as f64 / steps as f64,
                        3.0 * (steps - i - j) as f64 / steps as f64,
                    ];
                    best = best.max(water_fill_objective(&s, &q, gain));
                }
            }
            ensure(obj >= best - 1e-3, || format!("{obj} < grid {best}"))?;
            Ok(format!("objective {obj:.6} vs grid {best:.6}"))
        }),
        check("peak finder", || {
            let v = [1.0, 3.0, 2.0, 5.0, 4.0];
            let got = peak_finder(&v, &[1, 2, 3, 4, 5], 2).map_err(|e| e.to_string())?;
            ensure(got == vec![4, 2], || format!("{got:?}"))?;
            Ok("[1,3,2,5,4] -> [4, 2]".into())
        }),
        check("channel reproducibility", || {
            let cfg = SystemConfig::desk();
            let a = generate_channel(&cfg, &ClusterConfig::default(), Seed::new(9, 4));
            let b = generate_channel(&cfg, &ClusterConfig::default(), Seed::new(9, 4));
            ensure(a.fingerprint() == b.fingerprint(), || {
                "fingerprints differ".into()
            })?;
            Ok(a.fingerprint()[..16].to_string())
        }),
        check("zero-forcing removes interference", || {
            let cfg = SystemConfig {
                n_r: 4,
                n_s: 4,
                ..SystemConfig::desk()
            };
            let mu = generate_multiuser(&cfg, &ClusterConfig::default(), 4, Seed::new(4, 0));
            let fd = zf_fully_digital(&mu, &cfg).map_err(|e| e.to_string())?;
            let mut worst: f64 = 0.0;
            for (h, f) in mu.h.iter().zip(&fd.f) {
                let g = h * f;
                for u in 0..4 {
                    for v in 0..4 {
                        if u != v {
                            worst = worst.max(g[(u, v)].norm());
                        }
                    }
                }
            }
            ensure(worst < 1e-9, || format!("leak {worst:e}"))?;
            Ok(format!("max leak {worst:e}"))
        }),
    ]
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_checks_pass() {
        for c in super::run_all() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
