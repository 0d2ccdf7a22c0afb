//! Deterministic aperture transmittance maps for circular and elliptic
//! Gaussian beams on an annular (Cassegrain-type) receiver.
//!
//! The exact circular-beam map is a difference of two Marcum Q-functions;
//! the fast approximate map replaces each disk transmittance with a
//! Weibull-type factor `eta0 * exp(-((r0/a)/R)^lambda)` whose scale and
//! shape derive from scaled Bessel functions. Elliptic beams reduce to the
//! circular machinery through an effective spot radius built on the Lambert
//! W function.

use crate::error::{Error, Result};
use crate::numerics::{
    bessel_i0e, bessel_i1e, lambert_w_exp, marcum_q,
};

use std::f64::consts::FRAC_PI_2;

/// Annular receiver aperture: outer radius `a1`, central obscuration radius
/// `a2`, and the deliberate aim-point offset magnitude `d0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApertureGeometry {
    pub a1: f64,
    pub a2: f64,
    pub d0: f64,
}

impl ApertureGeometry {
    pub fn new(a1: f64, a2: f64, d0: f64) -> Result<Self> {
        if !(a1 > 0.0) || !(a2 >= 0.0) || a1 <= a2 {
            return Err(Error::Scenario(format!(
                "aperture radii must satisfy a1 > a2 >= 0, got a1 = {a1}, a2 = {a2}"
            )));
        }
        if !(d0 >= 0.0) {
            return Err(Error::Scenario(format!("offset d0 must be >= 0, got {d0}")));
        }
        Ok(ApertureGeometry { a1, a2, d0 })
    }
}

/// Weibull-type approximation parameters for one disk aperture of radius `a`
/// at inverse-width argument `xi` (circular beams use `xi = 2/W`).
#[derive(Debug, Clone, Copy)]
pub struct WeibullParams {
    /// Axial (r0 = 0) transmittance, `1 - exp(-a^2 xi^2 / 2)`.
    pub eta0: f64,
    /// Dimensionless scale of the deflection decay.
    pub scale_r: f64,
    /// Shape exponent; tends to 2 in the small-aperture limit.
    pub shape_lambda: f64,
}

impl WeibullParams {
    /// `eta0 * exp(-((r0/a)/R)^lambda)` for a centroid deflection `r0`.
    #[inline]
    pub fn transmittance(&self, r0: f64, a: f64) -> f64 {
        if r0 == 0.0 {
            return self.eta0;
        }
        self.eta0 * (-((r0 / a) / self.scale_r).powf(self.shape_lambda)).exp()
    }
}

/// Below this value of `t = a^2 xi^2` the ratios defining R and lambda are
/// evaluated from their power series; the direct forms lose precision to
/// cancellation in `1 - e^{-t} I0(t)` and in `ln(2 eta0 / denom)` (whose
/// rounding error grows like 1/t^2).
const WEIBULL_SERIES_CUTOFF: f64 = 2e-3;

/// Scale and shape parameters of the Weibull-type deflection decay.
pub fn weibull_params(a: f64, xi: f64) -> Result<WeibullParams> {
    if !(a > 0.0) || !xi.is_finite() || xi == 0.0 {
        return Err(Error::Domain {
            op: "weibull_params",
            detail: format!("requires a > 0 and xi != 0, got a = {a}, xi = {xi}"),
        });
    }
    let t = a * a * xi * xi;
    let eta0 = -(-0.5 * t).exp_m1();

    let (denom, ln_term) = if t < WEIBULL_SERIES_CUTOFF {
        // denom = 1 - e^{-t} I0(t) = t - 3t^2/4 + 5t^3/12 - 35t^4/192 + 21t^5/320
        let denom = t
            * (1.0 - t * (0.75 - t * (5.0 / 12.0 - t * (35.0 / 192.0 - t * 21.0 / 320.0))));
        // 2 eta0 - denom = t^2/2 - 3t^3/8 + 17t^4/96 - 25t^5/384
        let num_minus_denom =
            t * t * (0.5 - t * (0.375 - t * (17.0 / 96.0 - t * 25.0 / 384.0)));
        (denom, (num_minus_denom / denom).ln_1p())
    } else {
        let denom = 1.0 - bessel_i0e(t);
        (denom, (2.0 * eta0 / denom).ln())
    };

    let shape_lambda = 2.0 * t * bessel_i1e(t) / denom / ln_term;
    let scale_r = (-ln_term.ln() / shape_lambda).exp();
    Ok(WeibullParams {
        eta0,
        scale_r,
        shape_lambda,
    })
}

/// Exact transmittance of a circular Gaussian beam of spot radius `w`
/// deflected by `r0` from the centre of an annular aperture:
/// `Q(2 r0/w, 2 a2/w) - Q(2 r0/w, 2 a1/w)`.
pub fn annular_transmittance_exact(r0: f64, w: f64, geom: &ApertureGeometry) -> Result<f64> {
    if !(w > 0.0) || !(r0 >= 0.0) {
        return Err(Error::Domain {
            op: "annular_transmittance_exact",
            detail: format!("requires w > 0 and r0 >= 0, got w = {w}, r0 = {r0}"),
        });
    }
    let a = 2.0 * r0 / w;
    let eta = marcum_q(a, 2.0 * geom.a2 / w)? - marcum_q(a, 2.0 * geom.a1 / w)?;
    Ok(eta.clamp(0.0, 1.0))
}

/// Weibull-type approximation of the annular map, before clamping.
pub fn annular_transmittance_approx_raw(
    r0: f64,
    w: f64,
    geom: &ApertureGeometry,
) -> Result<f64> {
    if !(w > 0.0) || !(r0 >= 0.0) {
        return Err(Error::Domain {
            op: "annular_transmittance_approx",
            detail: format!("requires w > 0 and r0 >= 0, got w = {w}, r0 = {r0}"),
        });
    }
    let xi = 2.0 / w;
    let outer = weibull_params(geom.a1, xi)?.transmittance(r0, geom.a1);
    let inner = if geom.a2 > 0.0 {
        weibull_params(geom.a2, xi)?.transmittance(r0, geom.a2)
    } else {
        0.0
    };
    Ok(outer - inner)
}

/// Weibull-type approximation of the annular map, clamped to [0, 1].
pub fn annular_transmittance_approx(r0: f64, w: f64, geom: &ApertureGeometry) -> Result<f64> {
    Ok(annular_transmittance_approx_raw(r0, w, geom)?.clamp(0.0, 1.0))
}

/// Effective circular spot radius that mimics an elliptic beam of semiaxes
/// `w1`, `w2` rotated by `chi` relative to the deflection direction, for a
/// disk of radius `a`.
///
/// The Lambert W argument grows like `exp(4 a^2 / w^2)`, so it is evaluated
/// from its logarithm and never formed explicitly.
pub fn effective_spot(chi: f64, a: f64, w1: f64, w2: f64) -> Result<f64> {
    if !(w1 > 0.0 && w2 > 0.0 && a > 0.0) {
        return Err(Error::Domain {
            op: "effective_spot",
            detail: format!("requires a, w1, w2 > 0, got a = {a}, w1 = {w1}, w2 = {w2}"),
        });
    }
    let (s, c) = chi.sin_cos();
    let (s2, c2) = (s * s, c * c);
    let ln_arg = (4.0 * a * a / (w1 * w2)).ln()
        + (a * a / (w1 * w1)) * (1.0 + 2.0 * c2)
        + (a * a / (w2 * w2)) * (1.0 + 2.0 * s2);
    let w = lambert_w_exp(ln_arg)?;
    Ok(2.0 * a / w.sqrt())
}

/// Maximal (r0 = 0) transmittance of an elliptic beam through a disk of
/// radius `a`. The `w1 = w2` case is the analytic limit branch
/// `1 - exp(-2 a^2 / w^2)`.
pub fn elliptic_max_transmittance(a: f64, w1: f64, w2: f64) -> Result<f64> {
    if !(w1 > 0.0 && w2 > 0.0 && a > 0.0) {
        return Err(Error::Domain {
            op: "elliptic_max_transmittance",
            detail: format!("requires a, w1, w2 > 0, got a = {a}, w1 = {w1}, w2 = {w2}"),
        });
    }
    let a2 = a * a;
    // leading term: 1 - I0(a^2 |1/w1^2 - 1/w2^2|) e^{-a^2 (1/w1^2 + 1/w2^2)},
    // formed from scaled Bessel so nothing overflows.
    let z = a2 * (1.0 / (w1 * w1) - 1.0 / (w2 * w2)).abs();
    let s = a2 * (1.0 / (w1 * w1) + 1.0 / (w2 * w2));
    let lead = 1.0 - bessel_i0e(z) * (z - s).exp();

    let xi_m = 1.0 / w1 - 1.0 / w2;
    let t_m = a2 * xi_m * xi_m;
    let gauss_exp = (-a2 * (w1 + w2) * (w1 + w2) / (2.0 * w1 * w1 * w2 * w2)).exp();
    let correction = if t_m < 1e-9 {
        // series limit of the Weibull factor as the semiaxes merge
        t_m * gauss_exp
    } else {
        let p = weibull_params(a, xi_m)?;
        let x = (w1 + w2) / (w1 - w2).abs();
        2.0 * (-(-0.5 * t_m).exp_m1()) * (-(x / p.scale_r).powf(p.shape_lambda)).exp()
    };
    Ok((lead - correction).clamp(0.0, 1.0))
}

/// One realization of the elliptic-beam state: centroid `(x0, y0)`,
/// log-scaled squared semiaxes `W_i^2 = W0^2 exp(theta_i)`, and orientation
/// `phi`, reduced modulo pi/2 on construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticBeamState {
    pub x0: f64,
    pub y0: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub phi: f64,
}

impl EllipticBeamState {
    pub fn new(x0: f64, y0: f64, theta1: f64, theta2: f64, phi: f64) -> Self {
        EllipticBeamState {
            x0,
            y0,
            theta1,
            theta2,
            phi: phi.rem_euclid(FRAC_PI_2),
        }
    }

    /// Semiaxes in meters for a transmitter spot radius `w0`.
    pub fn semiaxes(&self, w0: f64) -> (f64, f64) {
        (w0 * (0.5 * self.theta1).exp(), w0 * (0.5 * self.theta2).exp())
    }
}

/// Elliptic-beam annular transmittance, before clamping.
pub fn elliptic_transmittance_raw(
    state: &EllipticBeamState,
    geom: &ApertureGeometry,
    w0: f64,
) -> Result<f64> {
    let (w1, w2) = state.semiaxes(w0);
    let r0 = state.x0.hypot(state.y0);
    let phi0 = state.y0.atan2(state.x0);
    let chi = state.phi - phi0;

    let mut eta = 0.0;
    for (sign, a) in [(1.0, geom.a1), (-1.0, geom.a2)] {
        if a == 0.0 {
            continue;
        }
        let eta0 = elliptic_max_transmittance(a, w1, w2)?;
        let factor = if r0 == 0.0 {
            1.0
        } else {
            let weff = effective_spot(chi, a, w1, w2)?;
            let p = weibull_params(a, 2.0 / weff)?;
            (-((r0 / a) / p.scale_r).powf(p.shape_lambda)).exp()
        };
        eta += sign * eta0 * factor;
    }
    Ok(eta)
}

/// Elliptic-beam annular transmittance, clamped to [0, 1].
pub fn elliptic_transmittance(
    state: &EllipticBeamState,
    geom: &ApertureGeometry,
    w0: f64,
) -> Result<f64> {
    Ok(elliptic_transmittance_raw(state, geom, w0)?.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::adaptive_quad;
    use std::f64::consts::PI;

    fn geom_std() -> ApertureGeometry {
        ApertureGeometry::new(0.075, 0.023, 0.0).unwrap()
    }

    // -- Weibull parameters --------------------------------------------

    #[test]
    fn eta0_closed_form() {
        let p = weibull_params(0.075, 2.0 / 0.075).unwrap();
        assert!((p.eta0 - (1.0 - (-2.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn lambda_and_r_at_unit_argument() {
        // direct high-precision evaluation of the defining expressions
        let p = weibull_params(1.0, 1.0).unwrap();
        assert!(
            (p.shape_lambda - 2.009634457157374588056322).abs() < 1e-13,
            "{}",
            p.shape_lambda
        );
        assert!(
            (p.scale_r - 1.603194845509288927498022).abs() < 1e-13,
            "{}",
            p.scale_r
        );
    }

    #[test]
    fn r_satisfies_its_defining_relation() {
        // R^(-lambda) = ln(2 eta0 / (1 - e^-t I0(t)))
        for &(a, xi) in &[(0.075, 26.7), (0.023, 80.0), (1.0, 0.3), (0.5, 6.0)] {
            let p = weibull_params(a, xi).unwrap();
            let t: f64 = a * a * xi * xi;
            let denom = 1.0 - bessel_i0e(t);
            let lhs = p.scale_r.powf(-p.shape_lambda);
            let rhs = (2.0 * (1.0 - (-0.5 * t).exp()) / denom).ln();
            assert!((lhs - rhs).abs() < 1e-10 * rhs.abs(), "a={a} xi={xi}");
        }
    }

    #[test]
    fn small_argument_series_limit() {
        // lambda -> 2 and the factor reproduces the Gaussian limit
        let p = weibull_params(1e-4, 1.0).unwrap();
        assert!((p.shape_lambda - 2.0).abs() < 1e-7, "{}", p.shape_lambda);
        // continuity across the series/direct switch; R carries a leading
        // sqrt(2/t) dependence that must be normalized out of the check
        let t_lo = WEIBULL_SERIES_CUTOFF * 0.9999;
        let t_hi = WEIBULL_SERIES_CUTOFF * 1.0001;
        let below = weibull_params(1.0, t_lo.sqrt()).unwrap();
        let above = weibull_params(1.0, t_hi.sqrt()).unwrap();
        assert!((below.shape_lambda - above.shape_lambda).abs() < 1e-9);
        let normalized = below.scale_r / above.scale_r * (t_lo / t_hi).sqrt();
        assert!((normalized - 1.0).abs() < 1e-7, "{normalized}");
        // Gaussian small-aperture limit: eta(r0) ~ eta0 exp(-2 r0^2/W^2);
        // the residual scales with t = (2a/W)^2 through R's (1 + t/8) factor
        let w = 0.05;
        let a = 2e-4;
        let p = weibull_params(a, 2.0 / w).unwrap();
        let r0 = 0.04;
        let got = p.transmittance(r0, a);
        let want = p.eta0 * (-2.0 * r0 * r0 / (w * w)).exp();
        assert!((got / want - 1.0).abs() < 1e-4, "{got} vs {want}");
    }

    // -- exact annular map ----------------------------------------------

    #[test]
    fn exact_axial_value() {
        // r0 = 0, W = a1: eta = e^{-2 (a2/a1)^2} - e^{-2}
        let g = geom_std();
        let got = annular_transmittance_exact(0.0, 0.075, &g).unwrap();
        let want = (-2.0 * (0.023f64 / 0.075).powi(2)).exp() - (-2.0f64).exp();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        assert!((got - 0.6931).abs() < 5e-4); // headline number
    }

    #[test]
    fn exact_reduces_to_circular_when_unobscured() {
        let g = ApertureGeometry::new(0.075, 0.0, 0.0).unwrap();
        let got = annular_transmittance_exact(0.0, 0.05, &g).unwrap();
        let want = 1.0 - (-2.0 * (0.075f64 / 0.05).powi(2)).exp();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn point_beam_inside_annulus() {
        let g = geom_std();
        let eta = annular_transmittance_exact(0.049, 0.075 / 30.0, &g).unwrap();
        assert!(eta > 1.0 - 1e-9, "{eta}");
        // and a point beam inside the obscuration is lost
        let eta = annular_transmittance_exact(0.01, 0.075 / 30.0, &g).unwrap();
        assert!(eta < 1e-9, "{eta}");
    }

    #[test]
    fn exact_agrees_with_radial_quadrature() {
        // independent oracle: radial integration of the polar-coordinates
        // integrand (4/W^2) r e^{-2(r^2+r0^2)/W^2} I0(4 r r0/W^2), written
        // with the scaled Bessel to survive large arguments.
        let g = geom_std();
        let oracle = |r0: f64, w: f64| -> f64 {
            let disk = |a: f64| {
                adaptive_quad(
                    |r| {
                        let z = 4.0 * r * r0 / (w * w);
                        4.0 / (w * w)
                            * r
                            * (-2.0 * (r - r0) * (r - r0) / (w * w)).exp()
                            * bessel_i0e(z)
                    },
                    0.0,
                    a,
                    1e-12,
                    400_000,
                )
                .unwrap()
                .value
            };
            disk(g.a1) - disk(g.a2)
        };
        for &w in &[0.023, 0.049, 0.075, 0.15] {
            for i in 0..10 {
                let r0 = 0.3 * w * i as f64;
                let exact = annular_transmittance_exact(r0, w, &g).unwrap();
                let q = oracle(r0, w);
                assert!(
                    (exact - q).abs() < 1e-8,
                    "W={w} r0={r0}: {exact} vs {q}"
                );
            }
        }
    }

    // -- approximate map --------------------------------------------------

    #[test]
    fn approx_equals_exact_on_axis() {
        let g = geom_std();
        for &w in &[0.02, 0.049, 0.075, 0.2] {
            let e = annular_transmittance_exact(0.0, w, &g).unwrap();
            let a = annular_transmittance_approx(0.0, w, &g).unwrap();
            assert!((e - a).abs() < 1e-12, "W={w}");
        }
    }

    #[test]
    fn approx_tracks_exact() {
        // Oracle-measured maxima over r0 in [0, 3W], 200 points, verified
        // against a 40-digit reference evaluation:
        //   W = a2:          2.8721e-2  (worst case, r0 ~ 2.5 W)
        //   W = (a1+a2)/2:   8.2e-3
        //   W = a1:          8.9e-3
        //   W = 2 a1:        1.1e-3
        // The fixture pins the measured envelope; the narrow-beam case is
        // the known weak spot of the Weibull fit on the outer disk.
        let g = geom_std();
        let cases = [
            (g.a2, 0.030),
            (0.5 * (g.a1 + g.a2), 0.010),
            (g.a1, 0.010),
            (2.0 * g.a1, 0.002),
        ];
        for (w, bound) in cases {
            let mut worst = 0.0f64;
            for i in 0..200 {
                let r0 = 3.0 * w * i as f64 / 199.0;
                let e = annular_transmittance_exact(r0, w, &g).unwrap();
                let a = annular_transmittance_approx(r0, w, &g).unwrap();
                worst = worst.max((e - a).abs());
            }
            assert!(
                worst <= bound,
                "W = {w}: max |approx - exact| = {worst} > {bound}"
            );
        }
    }

    #[test]
    fn approx_vanishes_far_out() {
        let g = geom_std();
        assert!(annular_transmittance_approx(5.0, 0.05, &g).unwrap() < 1e-12);
    }

    #[test]
    fn annular_map_has_interior_maximum_for_narrow_beams() {
        // for W < a2 the on-axis beam is swallowed by the obscuration;
        // the map must rise to an interior maximum near the slot centre
        let g = geom_std();
        let w = 0.015;
        let n = 400;
        let mut best = (0.0, 0.0);
        for i in 0..n {
            let r0 = g.a1 * 1.5 * i as f64 / (n - 1) as f64;
            let eta = annular_transmittance_exact(r0, w, &g).unwrap();
            if eta > best.1 {
                best = (r0, eta);
            }
        }
        let eta_axis = annular_transmittance_exact(0.0, w, &g).unwrap();
        assert!(best.1 > eta_axis + 0.1, "no interior maximum");
        let slot_centre = 0.5 * (g.a1 + g.a2);
        assert!(
            (best.0 - slot_centre).abs() < 0.25 * (g.a1 - g.a2),
            "max at {} vs slot centre {slot_centre}",
            best.0
        );
    }

    // -- effective spot -----------------------------------------------------

    #[test]
    fn effective_spot_collapses_for_circular_beams() {
        for &w in &[0.01, 0.05, 0.3] {
            for i in 0..8 {
                let chi = i as f64 * PI / 7.0;
                let got = effective_spot(chi, 0.075, w, w).unwrap();
                assert!((got - w).abs() < 1e-10 * w, "chi={chi} w={w}: {got}");
            }
        }
    }

    #[test]
    fn effective_spot_swap_symmetry_and_periodicity() {
        let (a, w1, w2) = (0.075, 0.09, 0.06);
        for i in 0..6 {
            let chi = i as f64 * 0.37;
            let lhs = effective_spot(chi, a, w1, w2).unwrap();
            let rhs = effective_spot(chi + FRAC_PI_2, a, w2, w1).unwrap();
            assert!((lhs - rhs).abs() < 1e-12 * lhs);
            let per = effective_spot(chi + PI, a, w1, w2).unwrap();
            assert!((lhs - per).abs() < 1e-12 * lhs);
        }
    }

    #[test]
    fn effective_spot_reference_value() {
        // 50-digit evaluation of the defining expression at
        // a = 0.075, W1 = 1.2a, W2 = 0.8a, chi = pi/4
        let got = effective_spot(PI / 4.0, 0.075, 1.2 * 0.075, 0.8 * 0.075).unwrap();
        let want = 0.0711192095879862287160471872307;
        assert!((got / want - 1.0).abs() < 1e-12, "{got}");
    }

    #[test]
    fn effective_spot_survives_tiny_beams() {
        // Lambert argument ~ exp(4 a^2/w^2) would overflow at w = a/20
        let w = 0.075 / 20.0;
        let got = effective_spot(0.3, 0.075, w, w).unwrap();
        assert!((got - w).abs() < 1e-9 * w, "{got}");
    }

    // -- elliptic maximal transmittance -----------------------------------

    #[test]
    fn elliptic_max_circular_limit() {
        for &(a, w) in &[(0.075, 0.05), (0.023, 0.06), (0.075, 0.25)] {
            let got = elliptic_max_transmittance(a, w, w).unwrap();
            let want = 1.0 - (-2.0 * a * a / (w * w)).exp();
            assert!((got - want).abs() < 1e-10, "a={a} w={w}: {got} vs {want}");
            // continuity of the limit branch
            let near = elliptic_max_transmittance(a, w * (1.0 + 1e-7), w).unwrap();
            assert!((near - got).abs() < 1e-6);
        }
    }

    #[test]
    fn elliptic_max_large_aperture_and_bounds() {
        let got = elliptic_max_transmittance(5.0, 0.09, 0.05).unwrap();
        assert!(got > 1.0 - 1e-12);
        for &(w1, w2) in &[(0.1, 0.05), (0.04, 0.12), (0.2, 0.19)] {
            let v = elliptic_max_transmittance(0.075, w1, w2).unwrap();
            assert!((0.0..=1.0).contains(&v));
            // symmetric under swapping the axes
            let vs = elliptic_max_transmittance(0.075, w2, w1).unwrap();
            assert!((v - vs).abs() < 1e-12);
        }
    }

    /// Oracle: direct 2-D quadrature of the elliptic Gaussian intensity over
    /// a disk of radius `a`, beam centred at distance r0 along x, semiaxis
    /// w1 rotated by `phi` from the x axis.
    fn elliptic_disk_quadrature(a: f64, w1: f64, w2: f64, r0: f64, phi: f64) -> f64 {
        let (s, c) = phi.sin_cos();
        adaptive_quad(
            |rho| {
                let inner = adaptive_quad(
                    |th| {
                        let dx = rho * th.cos() - r0;
                        let dy = rho * th.sin();
                        let u = c * dx + s * dy;
                        let v = -s * dx + c * dy;
                        (-2.0 * (u * u / (w1 * w1) + v * v / (w2 * w2))).exp()
                    },
                    0.0,
                    2.0 * PI,
                    1e-10,
                    200_000,
                )
                .unwrap()
                .value;
                rho * inner
            },
            0.0,
            a,
            1e-9,
            200_000,
        )
        .unwrap()
        .value
            * 2.0
            / (PI * w1 * w2)
    }

    #[test]
    fn elliptic_max_against_quadrature() {
        let a = 0.075;
        for &(w1, w2) in &[(0.08, 0.04), (0.05, 0.1), (0.12, 0.03), (0.06, 0.055)] {
            let got = elliptic_max_transmittance(a, w1, w2).unwrap();
            let want = elliptic_disk_quadrature(a, w1, w2, 0.0, 0.0);
            assert!(
                (got - want).abs() < 0.02,
                "w1={w1} w2={w2}: {got} vs quadrature {want}"
            );
        }
    }

    // -- elliptic transmittance ------------------------------------------

    #[test]
    fn elliptic_degenerates_to_circular_approximation() {
        let g = geom_std();
        let w0 = 0.02;
        for &(r0, w) in &[(0.0, 0.03), (0.02, 0.05), (0.07, 0.024)] {
            let theta = 2.0 * (w / w0 as f64).ln();
            let state = EllipticBeamState::new(r0, 0.0, theta, theta, 0.4);
            let got = elliptic_transmittance(&state, &g, w0).unwrap();
            let want = annular_transmittance_approx(r0, w, &g).unwrap();
            assert!((got - want).abs() < 1e-10, "r0={r0} w={w}: {got} vs {want}");
        }
    }

    #[test]
    fn elliptic_axial_value_is_difference_of_maxima() {
        let g = geom_std();
        let w0 = 0.02;
        let state = EllipticBeamState::new(0.0, 0.0, 0.7, -0.2, 0.9);
        let (w1, w2) = state.semiaxes(w0);
        let got = elliptic_transmittance(&state, &g, w0).unwrap();
        let want = elliptic_max_transmittance(g.a1, w1, w2).unwrap()
            - elliptic_max_transmittance(g.a2, w1, w2).unwrap();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn phi_reduction_makes_quarter_period_exact() {
        let g = geom_std();
        let s1 = EllipticBeamState::new(0.03, 0.01, 0.5, -0.3, 0.7);
        let s2 = EllipticBeamState::new(0.03, 0.01, 0.5, -0.3, 0.7 + FRAC_PI_2);
        assert_eq!(
            elliptic_transmittance(&s1, &g, 0.02).unwrap(),
            elliptic_transmittance(&s2, &g, 0.02).unwrap()
        );
        // exchanging the axes while rotating by a quarter period is the
        // same physical ellipse (bypass the constructor's reduction to test
        // the raw formula)
        let s3 = EllipticBeamState {
            x0: 0.03,
            y0: 0.01,
            theta1: -0.3,
            theta2: 0.5,
            phi: 0.7 + FRAC_PI_2,
        };
        let v1 = elliptic_transmittance(&s1, &g, 0.02).unwrap();
        let v3 = elliptic_transmittance(&s3, &g, 0.02).unwrap();
        assert!((v1 - v3).abs() < 1e-12, "{v1} vs {v3}");
    }

    #[test]
    fn elliptic_against_annulus_quadrature() {
        // Randomized states in the box W1, W2 in [0.5 a1, 2 a1], r0 <= 2 a1.
        // Oracle-measured envelope (verified against a 30-digit reference):
        // 0.05 holds up to ~2:1 aspect ratios; strongly elongated states
        // (aspect ~3.5 at r0 ~ a1) reach ~0.112, so the full-box fixture
        // pins 0.12. The Gaussian log-size ensemble visits large aspect
        // ratios only far in its tails.
        let g = geom_std();
        let w0 = 0.02;
        let mut rng = crate::numerics::RngStream::new(3141, 0);
        let mut worst_all = 0.0f64;
        let mut worst_moderate = 0.0f64;
        for _ in 0..24 {
            let w1 = g.a1 * (0.5 + 1.5 * rng.next_f64());
            let w2 = g.a1 * (0.5 + 1.5 * rng.next_f64());
            let r0 = 2.0 * g.a1 * rng.next_f64();
            let phi0 = 2.0 * PI * rng.next_f64();
            let phi = FRAC_PI_2 * rng.next_f64();
            let state = EllipticBeamState::new(
                r0 * phi0.cos(),
                r0 * phi0.sin(),
                2.0 * (w1 / w0).ln(),
                2.0 * (w2 / w0).ln(),
                phi,
            );
            let got = elliptic_transmittance(&state, &g, w0).unwrap();
            // oracle over the annulus, in the frame where r0 lies on x:
            // the relative angle chi = phi - phi0 fixes the ellipse
            let chi = phi - phi0;
            let want = elliptic_disk_quadrature(g.a1, w1, w2, r0, chi)
                - elliptic_disk_quadrature(g.a2, w1, w2, r0, chi);
            let err = (got - want).abs();
            worst_all = worst_all.max(err);
            let aspect = (w1 / w2).max(w2 / w1);
            if aspect <= 2.0 {
                worst_moderate = worst_moderate.max(err);
            }
        }
        assert!(
            worst_moderate <= 0.05,
            "aspect <= 2 states: max |elliptic - quadrature| = {worst_moderate}"
        );
        assert!(
            worst_all <= 0.12,
            "full box: max |elliptic - quadrature| = {worst_all}"
        );
    }

    #[test]
    fn geometry_validation() {
        assert!(ApertureGeometry::new(0.075, 0.023, 0.0).is_ok());
        assert!(ApertureGeometry::new(0.023, 0.075, 0.0).is_err());
        assert!(ApertureGeometry::new(0.075, 0.075, 0.0).is_err());
        assert!(ApertureGeometry::new(0.075, 0.023, -0.1).is_err());
    }
}
