//! Randomized quasi-Monte Carlo integration.
//!
//! Points come from the Owen-scrambled Sobol sequence; randomization uses a
//! fixed number of independently scrambled replicates, and the reported
//! standard error is the spread of the replicate means. Replicates are
//! sharded across worker threads and merged in replicate order, so results
//! depend only on (stream, replicate count), never on scheduling.

use num_complex::Complex64;
use rayon::prelude::*;

use super::rng::RngStream;
use super::sobol::{sobol_owen, SOBOL_MAX_DIM};
use super::special::norm_inv_cdf;
use crate::error::{Error, Result};

/// Mean and standard error per output component of a multi-output
/// QMC pass, plus the total number of integrand evaluations.
#[derive(Debug, Clone)]
pub struct MultiEstimate<const K: usize> {
    pub value: [f64; K],
    pub std_err: [f64; K],
    pub evaluations: u64,
}

/// A complex-valued integral estimate.
#[derive(Debug, Clone, Copy)]
pub struct QmcResult {
    pub value: Complex64,
    /// Standard error combining both components in quadrature.
    pub std_err: f64,
    pub evaluations: u64,
}

pub const DEFAULT_REPLICATES: u32 = 16;

/// Integrate `eval` (a vector of K integrands over the unit cube
/// `[0,1)^dim`, already incorporating any variable transform and weight)
/// with `n_total` points split over `replicates` independently scrambled
/// replicates.
pub fn qmc_multi<const K: usize, F>(
    dim: usize,
    n_total: u64,
    replicates: u32,
    rng: &RngStream,
    eval: F,
) -> Result<MultiEstimate<K>>
where
    F: Fn(&[f64]) -> [f64; K] + Sync,
{
    if dim == 0 || dim > SOBOL_MAX_DIM {
        return Err(Error::Domain {
            op: "qmc_multi",
            detail: format!("dimension {dim} outside 1..={SOBOL_MAX_DIM}"),
        });
    }
    if n_total == 0 || replicates == 0 {
        return Err(Error::Domain {
            op: "qmc_multi",
            detail: "need n_samples >= 1 and replicates >= 1".into(),
        });
    }
    let per_rep = (n_total / replicates as u64).max(1);
    if per_rep > u32::MAX as u64 {
        return Err(Error::Domain {
            op: "qmc_multi",
            detail: format!("{per_rep} points per replicate exceeds the 2^31 sequence length"),
        });
    }

    // Per-(replicate, dimension) scramble seeds drawn ahead of time from a
    // dedicated substream; the evaluation itself consumes no randomness.
    let seeds: Vec<[u32; SOBOL_MAX_DIM]> = {
        let mut s = rng.substream(0x51cb);
        (0..replicates)
            .map(|_| {
                let mut row = [0u32; SOBOL_MAX_DIM];
                for r in row.iter_mut() {
                    *r = (s.next_u64() >> 32) as u32;
                }
                row
            })
            .collect()
    };

    let rep_means: Vec<[f64; K]> = seeds
        .par_iter()
        .map(|seed_row| {
            let mut acc = [0.0f64; K];
            let mut point = vec![0.0f64; dim];
            for i in 0..per_rep as u32 {
                for (d, p) in point.iter_mut().enumerate() {
                    *p = sobol_owen(i, d, seed_row[d]);
                }
                let out = eval(&point);
                for k in 0..K {
                    acc[k] += out[k];
                }
            }
            for a in acc.iter_mut() {
                *a /= per_rep as f64;
            }
            acc
        })
        .collect();

    let r = replicates as f64;
    let mut value = [0.0f64; K];
    for m in &rep_means {
        for k in 0..K {
            value[k] += m[k] / r;
        }
    }
    let mut std_err = [0.0f64; K];
    if replicates > 1 {
        for m in &rep_means {
            for k in 0..K {
                let d = m[k] - value[k];
                std_err[k] += d * d;
            }
        }
        for se in std_err.iter_mut() {
            *se = (*se / (r * (r - 1.0))).sqrt();
        }
    }
    Ok(MultiEstimate {
        value,
        std_err,
        evaluations: per_rep * replicates as u64,
    })
}

/// Integrate a complex integrand against explicit per-axis Gaussian weights:
///
/// `I = int exp(-sum_i x_i^2 / (2 sigma_i^2)) h(x) d^dim x`
///
/// The Gaussian factor is importance-sampled exactly (low-discrepancy points
/// mapped through the Gaussian inverse CDF) and only `h` is averaged;
/// the Gaussian normalization `prod_i sqrt(2 pi) sigma_i` multiplies the
/// average.
pub fn gauss_weighted_qmc<F>(
    dim: usize,
    weight_scales: &[f64],
    h: F,
    n_samples: u64,
    replicates: u32,
    rng: &RngStream,
) -> Result<QmcResult>
where
    F: Fn(&[f64]) -> Complex64 + Sync,
{
    if weight_scales.len() != dim || weight_scales.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Domain {
            op: "gauss_weighted_qmc",
            detail: "weight_scales must have one positive entry per axis".into(),
        });
    }
    let scales = weight_scales.to_vec();
    let est = qmc_multi::<2, _>(dim, n_samples, replicates, rng, move |u| {
        let mut x = [0.0f64; SOBOL_MAX_DIM];
        for d in 0..dim {
            x[d] = scales[d] * norm_inv_cdf(u[d]);
        }
        let v = h(&x[..dim]);
        [v.re, v.im]
    })?;
    let norm: f64 = weight_scales
        .iter()
        .map(|s| (2.0 * std::f64::consts::PI).sqrt() * s)
        .product();
    Ok(QmcResult {
        value: Complex64::new(norm * est.value[0], norm * est.value[1]),
        std_err: norm * (est.std_err[0].powi(2) + est.std_err[1].powi(2)).sqrt(),
        evaluations: est.evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_integrand_is_exact() {
        let rng = RngStream::new(7, 0);
        let r = gauss_weighted_qmc(
            3,
            &[1.0, 2.0, 0.5],
            |_| Complex64::new(1.0, 0.0),
            4096,
            8,
            &rng,
        )
        .unwrap();
        let want = (2.0 * std::f64::consts::PI).powf(1.5) * 1.0 * 2.0 * 0.5;
        assert!((r.value.re - want).abs() < 1e-12 * want);
        assert!(r.value.im.abs() < 1e-12);
        assert!(r.std_err < 1e-12 * want);
    }

    #[test]
    fn gaussian_characteristic_function() {
        // int exp(-x^2/(2 s^2)) e^{icx} dx = sqrt(2 pi) s exp(-c^2 s^2/2)
        let rng = RngStream::new(11, 1);
        let (c, s) = (1.7, 0.8);
        let r = gauss_weighted_qmc(
            1,
            &[s],
            |x| Complex64::new(0.0, c * x[0]).exp(),
            1 << 16,
            16,
            &rng,
        )
        .unwrap();
        let want = (2.0 * std::f64::consts::PI).sqrt() * s * (-0.5 * c * c * s * s).exp();
        assert!(
            (r.value.re - want).abs() <= 3.0 * r.std_err + 1e-9,
            "re {} want {} se {}",
            r.value.re,
            want,
            r.std_err
        );
        assert!(r.value.im.abs() <= 3.0 * r.std_err + 1e-9);
    }

    #[test]
    fn replicate_spread_consistent_with_error() {
        // Reported standard error should predict the spread of independent
        // runs: a crude chi-square-style bound over 12 repetitions.
        let want = (2.0 * std::f64::consts::PI).sqrt() * (-0.5f64).exp();
        let mut z2 = 0.0;
        let runs = 12;
        for seed in 0..runs {
            let rng = RngStream::new(100 + seed, 0);
            let r = gauss_weighted_qmc(
                1,
                &[1.0],
                |x| Complex64::new(0.0, x[0]).exp(),
                4096,
                8,
                &rng,
            )
            .unwrap();
            let z = (r.value.re - want) / r.std_err.max(1e-300);
            z2 += z * z;
        }
        // z^2 sum ~ chi^2(12): far tails only
        assert!(z2 < 40.0, "errors badly underestimated: sum z^2 = {z2}");
        assert!(z2 > 0.8, "errors badly overestimated: sum z^2 = {z2}");
    }

    #[test]
    fn deterministic_given_stream() {
        let f = |x: &[f64]| Complex64::new(x[0].sin() * x[1], x[2]);
        let rng = RngStream::new(5, 9);
        let a = gauss_weighted_qmc(3, &[1.0, 1.0, 1.0], f, 2048, 4, &rng).unwrap();
        let b = gauss_weighted_qmc(3, &[1.0, 1.0, 1.0], f, 2048, 4, &rng).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.std_err, b.std_err);
    }

    #[test]
    fn rejects_bad_inputs() {
        let rng = RngStream::new(0, 0);
        assert!(gauss_weighted_qmc(0, &[], |_| Complex64::new(0.0, 0.0), 10, 2, &rng).is_err());
        assert!(
            gauss_weighted_qmc(11, &[1.0; 11], |_| Complex64::new(0.0, 0.0), 10, 2, &rng).is_err()
        );
        assert!(
            gauss_weighted_qmc(2, &[1.0, 1.0], |_| Complex64::new(0.0, 0.0), 0, 2, &rng).is_err()
        );
    }
}
