//! Random-variate samplers on top of [`RngStream`].
//!
//! Everything goes through the inverse normal CDF rather than rejection or
//! Box-Muller pairing, so each draw consumes a fixed number of stream values
//! and sequences stay reproducible under sharding.

use super::rng::RngStream;
use super::special::norm_inv_cdf;
use crate::error::{Error, Result};

/// Standard normal draw.
#[inline]
pub fn sample_normal(rng: &mut RngStream) -> f64 {
    // clamp away from 0: next_f64 is in [0, 1) and the quantile of exactly 0
    // is -inf.
    let u = rng.next_f64().max(5.562684646268003e-309);
    norm_inv_cdf(u)
}

/// Rice distribution with noncentrality `nu >= 0` and scale `sigma >= 0`:
/// the radius of a 2-D Gaussian of width sigma centred `nu` off the origin.
/// `sigma = 0` degenerates to the point mass at `nu`.
#[inline]
pub fn sample_rice(nu: f64, sigma: f64, rng: &mut RngStream) -> f64 {
    let x = nu + sigma * sample_normal(rng);
    let y = sigma * sample_normal(rng);
    x.hypot(y)
}

/// Rayleigh distribution of scale `sigma`; by construction identical to
/// `sample_rice(0, sigma, ..)`, drawing the same stream values.
#[inline]
pub fn sample_rayleigh(sigma: f64, rng: &mut RngStream) -> f64 {
    sample_rice(0.0, sigma, rng)
}

/// How the beam-orientation angle is distributed on [0, pi/2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AngleMode {
    /// Uniform on the quarter period (the limit of a fully wrapped Gaussian).
    Uniform,
    /// Gaussian of the given mean and standard deviation, wrapped into
    /// [0, pi/2).
    WrappedGaussian { mean: f64, std_dev: f64 },
}

/// Draw an orientation angle in [0, pi/2).
#[inline]
pub fn sample_wrapped_angle(mode: AngleMode, rng: &mut RngStream) -> f64 {
    let quarter = std::f64::consts::FRAC_PI_2;
    match mode {
        AngleMode::Uniform => quarter * rng.next_f64(),
        AngleMode::WrappedGaussian { mean, std_dev } => {
            let z = mean + std_dev * sample_normal(rng);
            z.rem_euclid(quarter)
        }
    }
}

/// Cholesky factor of a symmetric positive semidefinite matrix
/// (lower triangular, row-major), with pivots more negative than
/// `-1e-12 * trace` rejected and smaller negatives clamped to zero.
pub fn cholesky_psd(cov: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = cov.len();
    for (i, row) in cov.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Domain {
                op: "cholesky_psd",
                detail: "covariance must be square".into(),
            });
        }
        for j in 0..i {
            if (cov[i][j] - cov[j][i]).abs() > 1e-9 * (1.0 + cov[i][j].abs()) {
                return Err(Error::Domain {
                    op: "cholesky_psd",
                    detail: format!("covariance not symmetric at ({i},{j})"),
                });
            }
        }
    }
    let trace: f64 = (0..n).map(|i| cov[i][i]).sum();
    let clamp = 1e-12 * trace.abs().max(f64::MIN_POSITIVE);
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = cov[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s < -clamp {
                    return Err(Error::NotPositiveSemidefinite { pivot: i, value: s });
                }
                l[i][i] = s.max(0.0).sqrt();
            } else if l[j][j] > 0.0 {
                l[i][j] = s / l[j][j];
            } else {
                l[i][j] = 0.0;
            }
        }
    }
    Ok(l)
}

/// Multivariate Gaussian draw with the given mean and covariance.
pub fn sample_gaussian_vec(
    mean: &[f64],
    cov: &[Vec<f64>],
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    if mean.len() != cov.len() {
        return Err(Error::Domain {
            op: "sample_gaussian_vec",
            detail: "mean and covariance dimensions differ".into(),
        });
    }
    let l = cholesky_psd(cov)?;
    let n = mean.len();
    let z: Vec<f64> = (0..n).map(|_| sample_normal(rng)).collect();
    let mut out = mean.to_vec();
    for i in 0..n {
        for k in 0..=i {
            out[i] += l[i][k] * z[k];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::marcum::marcum_q;
    use std::f64::consts::PI;

    /// Two-sided Kolmogorov-Smirnov test at alpha = 0.01.
    fn ks_passes(draws: &mut [f64], cdf: impl Fn(f64) -> f64) -> bool {
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = draws.len() as f64;
        let mut d = 0.0f64;
        for (i, &x) in draws.iter().enumerate() {
            let c = cdf(x);
            d = d.max((c - i as f64 / n).abs());
            d = d.max(((i as f64 + 1.0) / n - c).abs());
        }
        d < 1.6276 / n.sqrt()
    }

    #[test]
    fn rayleigh_mean_and_ks() {
        let mut rng = RngStream::new(31, 0);
        let sigma = 0.7;
        let n = 1_000_000usize;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += sample_rayleigh(sigma, &mut rng);
        }
        let mean = sum / n as f64;
        let want = sigma * (PI / 2.0).sqrt();
        // Var of the mean: sigma^2 (2 - pi/2) / n
        let se = (sigma * sigma * (2.0 - PI / 2.0) / n as f64).sqrt();
        assert!(
            (mean - want).abs() < 3.0 * se,
            "rayleigh mean {mean} want {want} +- {se}"
        );

        let mut rng = RngStream::new(32, 0);
        let mut draws: Vec<f64> = (0..100_000)
            .map(|_| sample_rayleigh(sigma, &mut rng))
            .collect();
        assert!(ks_passes(&mut draws, |x| {
            1.0 - (-0.5 * x * x / (sigma * sigma)).exp()
        }));
    }

    #[test]
    fn rice_matches_rayleigh_at_zero_offset() {
        let mut a = RngStream::new(8, 4);
        let mut b = RngStream::new(8, 4);
        for _ in 0..1000 {
            assert_eq!(
                sample_rice(0.0, 1.3, &mut a),
                sample_rayleigh(1.3, &mut b)
            );
        }
    }

    #[test]
    fn rice_ks_against_marcum_cdf() {
        let (nu, sigma) = (1.1, 0.6);
        let mut rng = RngStream::new(9, 2);
        let mut draws: Vec<f64> = (0..100_000)
            .map(|_| sample_rice(nu, sigma, &mut rng))
            .collect();
        assert!(ks_passes(&mut draws, |x| {
            1.0 - marcum_q(nu / sigma, x / sigma).unwrap()
        }));
    }

    #[test]
    fn normal_ks() {
        let mut rng = RngStream::new(55, 3);
        let mut draws: Vec<f64> = (0..100_000).map(|_| sample_normal(&mut rng)).collect();
        assert!(ks_passes(&mut draws, crate::numerics::special::norm_cdf));
    }

    #[test]
    fn wrapped_angle_uniform_quarter_period() {
        let mut rng = RngStream::new(4, 4);
        let n = 1_000_000usize;
        let mut c4 = 0.0;
        for _ in 0..n {
            let phi = sample_wrapped_angle(AngleMode::Uniform, &mut rng);
            assert!((0.0..PI / 2.0).contains(&phi));
            c4 += (4.0 * phi).cos();
        }
        // E cos(4 phi) = 0 for uniform on the quarter period
        let se = (0.5 / n as f64).sqrt();
        assert!(
            (c4 / n as f64).abs() < 4.0 * se,
            "cos(4 phi) mean {}",
            c4 / n as f64
        );
    }

    #[test]
    fn wrapped_gaussian_in_range() {
        let mut rng = RngStream::new(4, 5);
        for _ in 0..10_000 {
            let phi = sample_wrapped_angle(
                AngleMode::WrappedGaussian {
                    mean: 0.3,
                    std_dev: 2.0,
                },
                &mut rng,
            );
            assert!((0.0..PI / 2.0).contains(&phi));
        }
    }

    #[test]
    fn gaussian_vec_moments_and_errors() {
        let mean = [1.0, -2.0];
        let cov = vec![vec![2.0, 0.8], vec![0.8, 1.0]];
        let mut rng = RngStream::new(77, 0);
        let n = 200_000;
        let mut m = [0.0f64; 2];
        let mut c01 = 0.0f64;
        for _ in 0..n {
            let v = sample_gaussian_vec(&mean, &cov, &mut rng).unwrap();
            m[0] += v[0];
            m[1] += v[1];
            c01 += (v[0] - 1.0) * (v[1] + 2.0);
        }
        assert!((m[0] / n as f64 - 1.0).abs() < 0.02);
        assert!((m[1] / n as f64 + 2.0).abs() < 0.02);
        assert!((c01 / n as f64 - 0.8).abs() < 0.03);

        // hard negative eigenvalue -> error naming the pivot
        let bad = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        match sample_gaussian_vec(&mean, &bad, &mut rng) {
            Err(Error::NotPositiveSemidefinite { pivot, value }) => {
                assert_eq!(pivot, 1);
                assert!(value < 0.0);
            }
            other => panic!("expected PSD failure, got {other:?}"),
        }
        // tiny negative within threshold -> clamped, no error
        let near = vec![vec![1.0, 1.0 + 1e-15], vec![1.0 + 1e-15, 1.0]];
        assert!(sample_gaussian_vec(&mean, &near, &mut rng).is_ok());
    }
}
