//! First-order Marcum Q-function.
//!
//! `Q(a, b) = int_b^inf x exp(-(x^2 + a^2)/2) I0(a x) dx` is the tail
//! probability of a Rice distribution and carries the exact annular-aperture
//! transmittance. Evaluated through the noncentral chi-square mixture
//!
//! `Q(a, b) = sum_k Poisson(k; a^2/2) * P[Poisson(b^2/2) <= k]`
//!
//! with the sum windowed around the Poisson mode so that nothing is formed
//! unscaled; absolute error is far below the 1e-10 contract.

use super::special::ln_gamma;
use crate::error::{Error, Result};

/// Window half-width in Poisson standard deviations. exp(-SIGMAS^2/2)
/// bounds the discarded mass at ~1e-29.
const SIGMAS: f64 = 11.0;

/// P[Poisson(y) <= k] for a single (k, y), computed in scaled form.
fn poisson_cdf(k: i64, y: f64) -> f64 {
    if k < 0 {
        return 0.0;
    }
    if y == 0.0 {
        return 1.0;
    }
    let kf = k as f64;
    let ln_pk = kf * y.ln() - y - ln_gamma(kf + 1.0);
    if kf >= y {
        // complement: P[> k] = pmf(k+1) * (1 + y/(k+2) + y^2/((k+2)(k+3)) + ...)
        let ln_pk1 = ln_pk + y.ln() - (kf + 1.0).ln();
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut j = kf + 2.0;
        while term > 1e-18 * sum {
            term *= y / j;
            sum += term;
            j += 1.0;
        }
        1.0 - ln_pk1.exp() * sum
    } else {
        // direct: P[<= k] = pmf(k) * (1 + k/y + k(k-1)/y^2 + ...)
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut j = kf;
        while term > 1e-18 * sum && j > 0.0 {
            term *= j / y;
            sum += term;
            j -= 1.0;
        }
        ln_pk.exp() * sum
    }
}

/// Q(a, b) for a, b >= 0, clamped to [0, 1].
pub fn marcum_q(a: f64, b: f64) -> Result<f64> {
    if !a.is_finite() || !b.is_finite() || a < 0.0 || b < 0.0 {
        return Err(Error::Domain {
            op: "marcum_q",
            detail: format!("requires finite a, b >= 0, got a = {a}, b = {b}"),
        });
    }
    if b == 0.0 {
        return Ok(1.0);
    }
    let x = 0.5 * a * a;
    let y = 0.5 * b * b;
    if x == 0.0 {
        return Ok((-y).exp());
    }

    let half_width = SIGMAS * x.sqrt() + 10.0;
    let k_lo = ((x - half_width).floor().max(0.0)) as i64;
    let k_hi = (x + half_width).ceil() as i64;

    // running Poisson(x) pmf at k and Poisson(y) cdf at k
    let mut ln_p = k_lo as f64 * x.ln() - x - ln_gamma(k_lo as f64 + 1.0);
    let mut p = ln_p.exp();
    let mut c = poisson_cdf(k_lo, y);
    // pmf of Poisson(y) at k_lo + 1, advanced alongside the cdf
    ln_p = (k_lo as f64 + 1.0) * y.ln() - y - ln_gamma(k_lo as f64 + 2.0);
    let mut q_next = ln_p.exp();

    // Normalizing by the windowed Poisson mass cancels the common
    // log-anchor rounding of the pmf recurrence, which otherwise caps the
    // absolute accuracy near 1e-9 for x ~ 1e6.
    let mut total = 0.0;
    let mut p_mass = 0.0;
    for k in k_lo..=k_hi {
        total += p * c;
        p_mass += p;
        let kf = k as f64;
        p *= x / (kf + 1.0);
        c += q_next;
        q_next *= y / (kf + 2.0);
    }
    Ok((total / p_mass).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quad::adaptive_quad;
    use crate::numerics::special::bessel_i0e;

    // References from arbitrary-precision quadrature of the defining integral.
    const Q_1_1: f64 = 0.7328798037968202182509508;
    const Q_2_3: f64 = 0.2143620881626494569706294;
    const Q_5_2: f64 = 0.9991992703628857918634039;
    const Q_03_45: f64 = 6.003812090216593639053418e-5;
    const Q_8_10: f64 = 0.02594166295441573246422388;
    const Q_30_31: f64 = 0.1626555811274606147267176;

    #[test]
    fn reference_values() {
        let cases = [
            (1.0, 1.0, Q_1_1),
            (2.0, 3.0, Q_2_3),
            (5.0, 2.0, Q_5_2),
            (0.3, 4.5, Q_03_45),
            (8.0, 10.0, Q_8_10),
            (30.0, 31.0, Q_30_31),
        ];
        for (a, b, want) in cases {
            let got = marcum_q(a, b).unwrap();
            assert!(
                (got - want).abs() < 1e-12,
                "Q({a},{b}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn trivial_limits() {
        assert!((marcum_q(0.0, 2.0).unwrap() - (-2.0f64).exp()).abs() < 1e-14);
        for a in [0.0, 0.5, 3.0, 20.0] {
            assert_eq!(marcum_q(a, 0.0).unwrap(), 1.0);
        }
        // Q(0, b) = exp(-b^2/2)
        for i in 1..=50 {
            let b = 0.1 * i as f64;
            assert!((marcum_q(0.0, b).unwrap() - (-0.5 * b * b).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn against_quadrature_oracle() {
        // Independent route: adaptive quadrature of the scaled integrand
        // x exp(-(x-a)^2/2) i0e(a x).
        let oracle = |a: f64, b: f64| -> f64 {
            let hi = (a + 45.0).max(b + 45.0);
            if b >= hi {
                return 0.0;
            }
            adaptive_quad(
                |x| x * (-0.5 * (x - a) * (x - a)).exp() * bessel_i0e(a * x),
                b,
                hi,
                1e-13,
                200_000,
            )
            .unwrap()
            .value
        };
        for a in [0.0, 0.3, 1.0, 2.5, 6.0, 15.0, 40.0] {
            for b in [0.1, 1.0, 2.0, 5.0, 12.0, 35.0] {
                let got = marcum_q(a, b).unwrap();
                let want = oracle(a, b);
                assert!(
                    (got - want).abs() < 1e-10,
                    "Q({a},{b}) = {got}, oracle {want}"
                );
            }
        }
    }

    #[test]
    fn large_arguments_stay_sane() {
        // point-beam regime of the annular map: huge a, b on both sides
        let q_in = marcum_q(2000.0, 1000.0).unwrap(); // b/a < 1 -> ~1
        let q_out = marcum_q(1000.0, 2000.0).unwrap(); // b/a > 1 -> ~0
        assert!(q_in > 1.0 - 1e-10, "{q_in}");
        assert!(q_out < 1e-10, "{q_out}");
    }

    #[test]
    fn domain_errors() {
        assert!(marcum_q(-1.0, 1.0).is_err());
        assert!(marcum_q(1.0, f64::INFINITY).is_err());
        assert!(marcum_q(f64::NAN, 1.0).is_err());
    }
}
