//! Probability distributions of the channel transmittance (PDTs).
//!
//! Three Monte Carlo models share one distribution type and one set of
//! corrections (aim-point offset, tip-tilt tracking, deterministic loss):
//!
//! * `pdt_beam_wandering` - rigid circular beam, Rice-distributed centroid
//!   deflection, Weibull-type annular map;
//! * `pdt_elliptic` - Gaussian 4-vector (centroid, log-sizes) plus a wrapped
//!   orientation angle driving the elliptic-beam map;
//! * `pdt_weak_bw` - conditional bivariate log-normal for the two partial
//!   disk transmittances, moment-matched to the first-principles statistics
//!   and combined by the law of total probability.
//!
//! Sampling is sharded over a fixed number of substreams and merged in
//! shard order, so histograms are bit-identical for a given seed, however
//! many worker threads run.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aperture::{
    annular_transmittance_approx_raw, elliptic_transmittance_raw, weibull_params,
    ApertureGeometry, EllipticBeamState,
};
use crate::error::{Error, Result};
use crate::numerics::quad::adaptive_quad;
use crate::numerics::sample::{cholesky_psd, sample_normal, sample_rice, sample_wrapped_angle};
use crate::numerics::special::{bessel_i0e, norm_cdf};
use crate::numerics::{AngleMode, RngStream};
use crate::turbulence::FieldStatistics;

/// Fixed shard count for Monte Carlo runs; results depend on it, never on
/// the number of worker threads.
const MC_SHARDS: u64 = 64;

/// Which PDT model produced a distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    BeamWandering,
    Elliptic,
    WeakBw,
}

impl ModelKind {
    pub fn tag(&self) -> &'static str {
        match self {
            ModelKind::BeamWandering => "beam_wandering",
            ModelKind::Elliptic => "elliptic",
            ModelKind::WeakBw => "weak_bw",
        }
    }
}

/// Offset, tracking, and deterministic-loss corrections applied to a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrectionSettings {
    /// Aim-point offset magnitude, meters.
    pub d0: f64,
    /// Residual-to-free wandering ratio: Delta = tracking_ratio * sigma_bw.
    pub tracking_ratio: f64,
    /// Deterministic intensity transmission factor in (0, 1].
    pub eta_det: f64,
}

impl CorrectionSettings {
    pub fn new(d0: f64, tracking_ratio: f64, eta_det: f64) -> Result<Self> {
        if !(d0 >= 0.0) {
            return Err(Error::Scenario(format!("offset d0 must be >= 0, got {d0}")));
        }
        if !(tracking_ratio > 0.0 && tracking_ratio <= 1.0) {
            return Err(Error::Scenario(format!(
                "tracking_ratio must lie in (0, 1], got {tracking_ratio}"
            )));
        }
        if !(eta_det > 0.0 && eta_det <= 1.0) {
            return Err(Error::Scenario(format!(
                "eta_det must lie in (0, 1], got {eta_det}"
            )));
        }
        Ok(CorrectionSettings {
            d0,
            tracking_ratio,
            eta_det,
        })
    }

    pub fn none() -> Self {
        CorrectionSettings {
            d0: 0.0,
            tracking_ratio: 1.0,
            eta_det: 1.0,
        }
    }

    /// dB attenuation to intensity factor: eta_det = 10^{-dB/10}.
    pub fn from_db(d0: f64, tracking_ratio: f64, loss_db: f64) -> Result<Self> {
        if loss_db < 0.0 {
            return Err(Error::Scenario(format!(
                "loss_db must be >= 0, got {loss_db}"
            )));
        }
        CorrectionSettings::new(d0, tracking_ratio, 10f64.powf(-loss_db / 10.0))
    }
}

/// Counters surfaced with every sampled distribution.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SampleDiagnostics {
    /// Samples whose raw map value fell outside [0, 1] and was clamped.
    pub clamped: u64,
    /// Weak-BW samples rejected by the (0, 1]^2 truncation.
    pub rejected_truncation: u64,
    /// Weak-BW samples rejected by the eta1 >= eta2 ordering.
    pub rejected_ordering: u64,
    /// Total sampling attempts (kept + rejected).
    pub attempts: u64,
    pub warnings: Vec<String>,
}

/// A binned PDT estimate with sample moments.
#[derive(Debug, Clone, Serialize)]
pub struct TransmittanceDistribution {
    /// `bins + 1` edges; uniform on [0, 1] before any loss rescaling.
    pub bin_edges: Vec<f64>,
    /// Probability density per bin; integrates to 1.
    pub density: Vec<f64>,
    /// Accepted samples.
    pub n_samples: u64,
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
    pub model_tag: ModelKind,
    pub provenance: String,
    pub diagnostics: SampleDiagnostics,
}

impl TransmittanceDistribution {
    /// integral of density over the bins (should be 1).
    pub fn total_mass(&self) -> f64 {
        self.density
            .iter()
            .zip(self.bin_edges.windows(2))
            .map(|(d, e)| d * (e[1] - e[0]))
            .sum()
    }

    /// Probability mass above a threshold, from the histogram.
    pub fn mass_above(&self, threshold: f64) -> f64 {
        let mut mass = 0.0;
        for (d, e) in self.density.iter().zip(self.bin_edges.windows(2)) {
            if e[1] <= threshold {
                continue;
            }
            let lo = e[0].max(threshold);
            mass += d * (e[1] - lo);
        }
        mass
    }

    /// Smallest bin edge q with cumulative mass >= p.
    pub fn quantile(&self, p: f64) -> f64 {
        let mut acc = 0.0;
        for (d, e) in self.density.iter().zip(self.bin_edges.windows(2)) {
            acc += d * (e[1] - e[0]);
            if acc >= p {
                return e[1];
            }
        }
        *self.bin_edges.last().unwrap()
    }
}

/// One Monte Carlo outcome.
enum Draw {
    /// In-range transmittance.
    Keep(f64),
    /// Raw value outside [0, 1]; carries the clamped value.
    Clamped(f64),
    RejectTruncation,
    RejectOrdering,
}

#[derive(Clone, Default)]
struct ShardAcc {
    counts: Vec<u64>,
    sum: f64,
    sum2: f64,
    kept: u64,
    clamped: u64,
    rej_trunc: u64,
    rej_order: u64,
}

/// Sharded Monte Carlo histogram driver. The sampler sees a dedicated
/// substream per shard; shard results are merged in shard order.
fn run_histogram<F>(
    model: ModelKind,
    n_samples: u64,
    bins: usize,
    rng: &RngStream,
    sampler: F,
) -> Result<TransmittanceDistribution>
where
    F: Fn(&mut RngStream) -> Result<Draw> + Sync,
{
    if n_samples == 0 || bins == 0 {
        return Err(Error::Domain {
            op: "run_histogram",
            detail: "need n_samples >= 1 and bins >= 1".into(),
        });
    }
    let base = n_samples / MC_SHARDS;
    let extra = n_samples % MC_SHARDS;

    let shards: std::result::Result<Vec<ShardAcc>, Error> = (0..MC_SHARDS)
        .into_par_iter()
        .map(|shard| {
            let mut acc = ShardAcc {
                counts: vec![0u64; bins],
                ..Default::default()
            };
            let mut stream = rng.substream(0x4d43_0000 + shard);
            let n = base + u64::from(shard < extra);
            for _ in 0..n {
                let (eta, clamped) = match sampler(&mut stream)? {
                    Draw::Keep(eta) => (eta, false),
                    Draw::Clamped(eta) => (eta, true),
                    Draw::RejectTruncation => {
                        acc.rej_trunc += 1;
                        continue;
                    }
                    Draw::RejectOrdering => {
                        acc.rej_order += 1;
                        continue;
                    }
                };
                debug_assert!((0.0..=1.0).contains(&eta));
                let idx = ((eta * bins as f64) as usize).min(bins - 1);
                acc.counts[idx] += 1;
                acc.sum += eta;
                acc.sum2 += eta * eta;
                acc.kept += 1;
                acc.clamped += u64::from(clamped);
            }
            Ok(acc)
        })
        .collect();
    let shards = shards?;

    let mut counts = vec![0u64; bins];
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    let mut diag = SampleDiagnostics {
        attempts: n_samples,
        ..Default::default()
    };
    let mut kept = 0u64;
    for acc in &shards {
        for (c, s) in counts.iter_mut().zip(&acc.counts) {
            *c += s;
        }
        sum += acc.sum;
        sum2 += acc.sum2;
        kept += acc.kept;
        diag.clamped += acc.clamped;
        diag.rejected_truncation += acc.rej_trunc;
        diag.rejected_ordering += acc.rej_order;
    }
    if kept == 0 {
        return Err(Error::Diagnostic(
            "all Monte Carlo samples were rejected".into(),
        ));
    }
    if n_samples < 1000 {
        diag.warnings
            .push(format!("only {n_samples} samples; histogram will be noisy"));
    }

    let width = 1.0 / bins as f64;
    let density: Vec<f64> = counts
        .iter()
        .map(|&c| c as f64 / (kept as f64 * width))
        .collect();
    let bin_edges: Vec<f64> = (0..=bins).map(|i| i as f64 * width).collect();
    let mean = sum / kept as f64;
    let second_moment = sum2 / kept as f64;
    Ok(TransmittanceDistribution {
        bin_edges,
        density,
        n_samples: kept,
        mean,
        second_moment,
        variance: (second_moment - mean * mean).max(0.0),
        model_tag: model,
        provenance: format!(
            "model={};seed={};stream={}",
            model.tag(),
            rng.seed(),
            rng.stream_id()
        ),
        diagnostics: diag,
    })
}

fn classify(raw: f64, eta_det: f64) -> Draw {
    if (0.0..=1.0).contains(&raw) {
        Draw::Keep(raw * eta_det)
    } else {
        Draw::Clamped(raw.clamp(0.0, 1.0) * eta_det)
    }
}

/// Beam-wandering PDT: circular beam of spot radius `w`, centroid deflection
/// Rice(d0, Delta) with Delta = tracking_ratio * sigma_bw.
pub fn pdt_beam_wandering(
    w: f64,
    sigma_bw: f64,
    geom: &ApertureGeometry,
    corrections: &CorrectionSettings,
    n_samples: u64,
    bins: usize,
    rng: &RngStream,
) -> Result<TransmittanceDistribution> {
    if !(w > 0.0) || !(sigma_bw >= 0.0) {
        return Err(Error::Domain {
            op: "pdt_beam_wandering",
            detail: format!("requires w > 0 and sigma_bw >= 0, got w = {w}, sigma_bw = {sigma_bw}"),
        });
    }
    let delta = corrections.tracking_ratio * sigma_bw;
    let d0 = corrections.d0;
    let eta_det = corrections.eta_det;
    let geom = *geom;
    run_histogram(ModelKind::BeamWandering, n_samples, bins, rng, move |s| {
        let r0 = sample_rice(d0, delta, s);
        let raw = annular_transmittance_approx_raw(r0, w, &geom)?;
        Ok(classify(raw, eta_det))
    })
}

/// Elliptic-beam PDT driven by the first-principles statistics.
pub fn pdt_elliptic(
    stats: &FieldStatistics,
    w0: f64,
    geom: &ApertureGeometry,
    corrections: &CorrectionSettings,
    angle_mode: AngleMode,
    n_samples: u64,
    bins: usize,
    rng: &RngStream,
) -> Result<TransmittanceDistribution> {
    let delta = corrections.tracking_ratio * stats.sigma_bw2.value.max(0.0).sqrt();
    let theta_mean = stats.theta_mean.value;
    let (tv, tc) = (stats.theta_var.value, stats.theta_cov.value);
    let cov = vec![
        vec![delta * delta, 0.0, 0.0, 0.0],
        vec![0.0, delta * delta, 0.0, 0.0],
        vec![0.0, 0.0, tv, tc],
        vec![0.0, 0.0, tc, tv],
    ];
    let chol = cholesky_psd(&cov)?;
    let mean = [corrections.d0, 0.0, theta_mean, theta_mean];
    let eta_det = corrections.eta_det;
    let geom = *geom;
    run_histogram(ModelKind::Elliptic, n_samples, bins, rng, move |s| {
        let z: [f64; 4] = std::array::from_fn(|_| sample_normal(s));
        let mut v = mean;
        for i in 0..4 {
            for k in 0..=i {
                v[i] += chol[i][k] * z[k];
            }
        }
        let phi = sample_wrapped_angle(angle_mode, s);
        let state = EllipticBeamState::new(v[0], v[1], v[2], v[3], phi);
        let raw = elliptic_transmittance_raw(&state, &geom, w0)?;
        Ok(classify(raw, eta_det))
    })
}

/// Parameters of the conditional bivariate log-normal used by the weak
/// beam-wandering model. Index 0 is the outer aperture, 1 the inner.
///
/// `mu_offset` and `cov_lognormal` carry the analytic moment-matching
/// forms, which reproduce the target moments exactly only while the
/// truncation to (0, 1]^2 removes negligible mass. For the annular
/// apertures of interest the outer-disk transmittance sits close to 1 and
/// the truncation bites, so the sampler uses `mu_cal`/`cov_cal`: the same
/// parameter shape recalibrated so the truncated, ordering-constrained
/// model reproduces the first-principles moments.
#[derive(Debug, Clone, Serialize)]
pub struct WeakBwParams {
    /// Axial conditional means eta_n^(0).
    pub eta0: [f64; 2],
    /// zeta_{n,m}^(0): square roots of the axial conditional correlations.
    pub zeta0: [[f64; 2]; 2],
    /// -ln[(eta_n^0)^2 / zeta_{n,n}^0]; the analytic conditional log-mean
    /// is -(mu_offset_n + (r0/R_n)^lambda_n).
    pub mu_offset: [f64; 2],
    /// Covariance of (ln eta_1, ln eta_2); independent of r0.
    pub cov_lognormal: [[f64; 2]; 2],
    /// Calibrated log-mean constants at r0 = 0 (sampler path).
    pub mu_cal: [f64; 2],
    /// Calibrated covariance (sampler path).
    pub cov_cal: [[f64; 2]; 2],
    /// Whether the truncation-aware calibration converged; when false the
    /// sampler falls back to the analytic parameters.
    pub calibrated: bool,
    /// Radial Weibull scales a_n R(a_n, 2/W_ST), meters.
    pub scale_r: [f64; 2],
    /// Weibull shapes lambda(a_n, 2/W_ST).
    pub shape_lambda: [f64; 2],
    /// Residual wandering scale after tracking, meters.
    pub delta: f64,
    /// Aim-point offset, meters.
    pub d0: f64,
    /// Rice-averaged mass of the untruncated log-normal inside (0, 1]^2.
    pub truncation_mass: f64,
    pub warnings: Vec<String>,
}

/// Rice density with the scaled Bessel factor, safe for all arguments.
fn rice_density(r: f64, nu: f64, sigma: f64) -> f64 {
    if r < 0.0 {
        return 0.0;
    }
    let s2 = sigma * sigma;
    (r / s2) * (-0.5 * (r - nu) * (r - nu) / s2).exp() * bessel_i0e(r * nu / s2)
}

/// Bivariate standard-normal CDF P[X <= h, Y <= k] with correlation rho,
/// by quadrature over the conditional normal.
fn binormal_cdf(h: f64, k: f64, rho: f64) -> f64 {
    if rho >= 1.0 - 1e-12 {
        return norm_cdf(h.min(k));
    }
    if rho <= -1.0 + 1e-12 {
        return (norm_cdf(h) + norm_cdf(k) - 1.0).max(0.0);
    }
    let denom = (1.0 - rho * rho).sqrt();
    let lo = (-9.0f64).min(h);
    adaptive_quad(
        |x| {
            let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
            pdf * norm_cdf((k - rho * x) / denom)
        },
        lo,
        h,
        1e-10,
        200_000,
    )
    .map(|q| q.value.clamp(0.0, 1.0))
    .unwrap_or_else(|_| norm_cdf(h) * norm_cdf(k))
}

/// Probability that `N(nu, S)` falls in the acceptance region
/// `{g1 <= 0, g2 <= 0, g1 >= g2}`, by conditioning on g2.
fn accept_region_prob(nu: [f64; 2], s: &[[f64; 2]; 2]) -> f64 {
    let s2 = s[1][1].max(1e-16).sqrt();
    let s_cond = (s[0][0] - s[0][1] * s[0][1] / s[1][1].max(1e-16)).max(1e-16);
    let sc = s_cond.sqrt();
    let slope = s[0][1] / s[1][1].max(1e-16);
    let lo = (nu[1] - 9.0 * s2).min(-9.0 * s2);
    if lo >= 0.0 {
        return 0.0;
    }
    adaptive_quad(
        |g2| {
            let z = (g2 - nu[1]) / s2;
            let pdf = (-0.5 * z * z).exp() / ((2.0 * std::f64::consts::PI).sqrt() * s2);
            let mu_c = nu[0] + slope * (g2 - nu[1]);
            // g1 in [g2, 0]
            let p = norm_cdf(-mu_c / sc) - norm_cdf((g2 - mu_c) / sc);
            pdf * p.max(0.0)
        },
        lo,
        0.0,
        1e-10,
        400_000,
    )
    .map(|q| q.value.clamp(0.0, 1.0))
    .unwrap_or(0.0)
}

/// `E[exp(w . g); acceptance region]` for `g ~ N(nu, S)`, by exponential
/// tilting.
fn tilted_region_moment(w: [f64; 2], nu: [f64; 2], s: &[[f64; 2]; 2]) -> f64 {
    let sw = [
        s[0][0] * w[0] + s[0][1] * w[1],
        s[1][0] * w[0] + s[1][1] * w[1],
    ];
    let expo = w[0] * nu[0] + w[1] * nu[1] + 0.5 * (w[0] * sw[0] + w[1] * sw[1]);
    expo.exp() * accept_region_prob([nu[0] + sw[0], nu[1] + sw[1]], s)
}

/// The five accepted-sample moments (E[eta1], E[eta2], E[eta1^2],
/// E[eta2^2], E[eta1 eta2]) of the truncated, ordering-constrained model
/// with log-mean constants `m0` and covariance `s`, averaged over the
/// Rice-distributed deflection.
fn weak_bw_model_moments(
    m0: [f64; 2],
    s: &[[f64; 2]; 2],
    scale_r: [f64; 2],
    shape_lambda: [f64; 2],
    d0: f64,
    delta: f64,
) -> [f64; 5] {
    let weights: [[f64; 2]; 5] = [[1.0, 0.0], [0.0, 1.0], [2.0, 0.0], [0.0, 2.0], [1.0, 1.0]];
    let at_r0 = |r0: f64| -> [f64; 6] {
        let nu = [
            m0[0] - (r0 / scale_r[0]).powf(shape_lambda[0]),
            m0[1] - (r0 / scale_r[1]).powf(shape_lambda[1]),
        ];
        let mut out = [0.0; 6];
        out[5] = accept_region_prob(nu, s);
        for (k, w) in weights.iter().enumerate() {
            out[k] = tilted_region_moment(*w, nu, s);
        }
        out
    };
    let mut acc = [0.0; 6];
    if delta <= 0.0 {
        acc = at_r0(d0);
    } else {
        // fixed Gauss-Legendre nodes against the Rice density
        let hi = d0 + 9.0 * delta;
        for &(r0, w) in crate::numerics::quad::gauss_legendre(48, 0.0, hi).iter() {
            let rho = rice_density(r0, d0, delta);
            let vals = at_r0(r0);
            for (a, v) in acc.iter_mut().zip(vals.iter()) {
                *a += w * rho * v;
            }
        }
    }
    let norm = acc[5].max(1e-300);
    std::array::from_fn(|k| acc[k] / norm)
}

/// Test-support wrapper exposing the analytic accepted-moment evaluator.
#[doc(hidden)]
pub fn debug_weak_bw_moments(
    m0: [f64; 2],
    s: &[[f64; 2]; 2],
    scale_r: [f64; 2],
    shape_lambda: [f64; 2],
    d0: f64,
    delta: f64,
) -> [f64; 5] {
    weak_bw_model_moments(m0, s, scale_r, shape_lambda, d0, delta)
}

/// Newton-calibrate (m0, S) so the truncated+ordered model reproduces the
/// five target moments. Returns None when the iteration fails to converge.
fn calibrate_weak_bw(
    targets: [f64; 5],
    m0_init: [f64; 2],
    s_init: [[f64; 2]; 2],
    scale_r: [f64; 2],
    shape_lambda: [f64; 2],
    d0: f64,
    delta: f64,
) -> Option<([f64; 2], [[f64; 2]; 2])> {
    // coordinates: (m1, m2, ln s11, ln s22, atanh rho) keep the covariance
    // positive definite for free
    let unpack = |th: &[f64; 5]| -> ([f64; 2], [[f64; 2]; 2]) {
        let s11 = th[2].exp();
        let s22 = th[3].exp();
        let s12 = th[4].tanh() * (s11 * s22).sqrt();
        ([th[0], th[1]], [[s11, s12], [s12, s22]])
    };
    let residual = |th: &[f64; 5]| -> Option<[f64; 5]> {
        let (m0, s) = unpack(th);
        let m = weak_bw_model_moments(m0, &s, scale_r, shape_lambda, d0, delta);
        if m.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return None;
        }
        Some(std::array::from_fn(|k| (m[k] / targets[k]).ln()))
    };
    let max_abs = |r: &[f64; 5]| r.iter().fold(0.0f64, |a, x| a.max(x.abs()));

    let rho_init = (s_init[0][1] / (s_init[0][0] * s_init[1][1]).sqrt()).clamp(-0.99, 0.99);
    let mut th = [
        m0_init[0],
        m0_init[1],
        s_init[0][0].max(1e-9).ln(),
        s_init[1][1].max(1e-9).ln(),
        rho_init.atanh(),
    ];
    let mut r = residual(&th)?;
    for _ in 0..60 {
        let err = max_abs(&r);
        if err < 1e-7 {
            let (m0, s) = unpack(&th);
            return Some((m0, s));
        }
        // finite-difference Jacobian
        let mut jac = [[0.0f64; 5]; 5];
        for j in 0..5 {
            let h = 1e-4 * th[j].abs().max(1.0);
            let mut thj = th;
            thj[j] += h;
            let rj = residual(&thj)?;
            for i in 0..5 {
                jac[i][j] = (rj[i] - r[i]) / h;
            }
        }
        // solve J dx = r by Gaussian elimination with partial pivoting
        let mut a = jac;
        let mut b = r;
        for col in 0..5 {
            let piv = (col..5)
                .max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).unwrap())
                .unwrap();
            if a[piv][col].abs() < 1e-13 {
                return None;
            }
            a.swap(col, piv);
            b.swap(col, piv);
            for row in col + 1..5 {
                let f = a[row][col] / a[col][col];
                for k in col..5 {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
        let mut dx = [0.0f64; 5];
        for row in (0..5).rev() {
            let mut v = b[row];
            for k in row + 1..5 {
                v -= a[row][k] * dx[k];
            }
            dx[row] = v / a[row][row];
        }
        // backtracking line search on the residual norm
        let mut step = 1.0;
        let mut advanced = false;
        for _ in 0..8 {
            let mut cand = th;
            for j in 0..5 {
                cand[j] -= step * dx[j];
            }
            if let Some(rc) = residual(&cand) {
                if max_abs(&rc) < err {
                    th = cand;
                    r = rc;
                    advanced = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !advanced {
            return None;
        }
    }
    None
}

/// Derive the weak-beam-wandering log-normal parameters from the
/// first-principles statistics.
pub fn weak_bw_params(
    stats: &FieldStatistics,
    geom: &ApertureGeometry,
    corrections: &CorrectionSettings,
) -> Result<WeakBwParams> {
    let w_st = stats.w_st.value;
    if !(w_st > 0.0) {
        return Err(Error::Domain {
            op: "weak_bw_params",
            detail: "statistics carry a non-positive W_ST".into(),
        });
    }
    let delta = corrections.tracking_ratio * stats.sigma_bw2.value.max(0.0).sqrt();
    let radii = [geom.a1, geom.a2];
    let mut scale_r = [0.0; 2];
    let mut shape_lambda = [0.0; 2];
    for n in 0..2 {
        let p = weibull_params(radii[n], 2.0 / w_st)?;
        scale_r[n] = radii[n] * p.scale_r;
        shape_lambda[n] = p.shape_lambda;
    }

    // Rice/Rayleigh-averaged Weibull attenuation factors
    let avg_factor = |exps: &dyn Fn(f64) -> f64| -> Result<f64> {
        if delta == 0.0 {
            return Ok(1.0);
        }
        let q = adaptive_quad(
            |xi| xi * (-0.5 * xi * xi).exp() * (-exps(xi * delta)).exp(),
            0.0,
            f64::INFINITY,
            1e-11,
            400_000,
        )?;
        Ok(q.value)
    };

    let mut warnings = Vec::new();
    let mut eta0 = [0.0; 2];
    for n in 0..2 {
        let denom = avg_factor(&|r: f64| (r / scale_r[n]).powf(shape_lambda[n]))?;
        eta0[n] = stats.mean_eta[n].value / denom;
        if !(eta0[n] > 0.0 && eta0[n] <= 1.0) {
            if eta0[n] > 1.0 && eta0[n] < 1.05 {
                warnings.push(format!("eta0[{n}] = {:.4} clamped to 1", eta0[n]));
                eta0[n] = 1.0;
            } else {
                return Err(Error::Diagnostic(format!(
                    "weak-BW axial mean eta0[{n}] = {} outside (0, 1]",
                    eta0[n]
                )));
            }
        }
    }

    let mut zeta_sq = [[0.0; 2]; 2];
    for n in 0..2 {
        for m in n..2 {
            let denom = avg_factor(&|r: f64| {
                (r / scale_r[n]).powf(shape_lambda[n]) + (r / scale_r[m]).powf(shape_lambda[m])
            })?;
            let z2 = stats.eta_corr[n][m].value / denom;
            if !(z2 > 0.0) {
                return Err(Error::Diagnostic(format!(
                    "weak-BW correlation zeta^2[{n}][{m}] = {z2} is not positive"
                )));
            }
            zeta_sq[n][m] = z2;
            zeta_sq[m][n] = z2;
        }
    }

    // log-normal moment matching; the covariance is r0-independent
    let mut cov = [[0.0; 2]; 2];
    for n in 0..2 {
        for m in 0..2 {
            cov[n][m] = (zeta_sq[n][m] / (eta0[n] * eta0[m])).ln();
        }
    }
    for n in 0..2 {
        if cov[n][n] < 0.0 {
            warnings.push(format!(
                "log-variance cov[{n}][{n}] = {:.3e} clamped to 0",
                cov[n][n]
            ));
            cov[n][n] = 0.0;
        }
    }
    let bound = (cov[0][0] * cov[1][1]).sqrt();
    if cov[0][1].abs() > bound {
        warnings.push(format!(
            "log-covariance {:.3e} clamped to +-{:.3e} for positive semidefiniteness",
            cov[0][1], bound
        ));
        cov[0][1] = cov[0][1].clamp(-bound, bound);
        cov[1][0] = cov[0][1];
    }

    let mu_offset =
        std::array::from_fn(|n| -((eta0[n] * eta0[n] / zeta_sq[n][n].sqrt()).ln()));

    // truncation mass F of the untruncated log-normal inside (0, 1]^2,
    // averaged over the deflection density
    let (s1, s2) = (cov[0][0].sqrt(), cov[1][1].sqrt());
    let rho = if s1 > 0.0 && s2 > 0.0 {
        (cov[0][1] / (s1 * s2)).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    let f_at = |r0: f64| -> f64 {
        if s1 == 0.0 || s2 == 0.0 {
            return 1.0;
        }
        let m1 = -(mu_offset[0] + (r0 / scale_r[0]).powf(shape_lambda[0]));
        let m2 = -(mu_offset[1] + (r0 / scale_r[1]).powf(shape_lambda[1]));
        binormal_cdf(-m1 / s1, -m2 / s2, rho)
    };
    let truncation_mass = if delta == 0.0 {
        f_at(corrections.d0)
    } else {
        let hi = corrections.d0 + 10.0 * delta;
        adaptive_quad(
            |r0| rice_density(r0, corrections.d0, delta) * f_at(r0),
            0.0,
            hi,
            1e-8,
            400_000,
        )?
        .value
    };
    if truncation_mass < 0.95 {
        warnings.push(format!(
            "truncated-lognormal approximation degraded: F = {truncation_mass:.3} < 0.95"
        ));
    }

    let zeta0 = std::array::from_fn(|n: usize| std::array::from_fn(|m| zeta_sq[n][m].sqrt()));

    // Calibrate the constants against the truncated, ordering-constrained
    // model so its accepted-sample moments reproduce the first-principles
    // targets (clamped into the physically admissible range first).
    let mut targets = [
        stats.mean_eta[0].value,
        stats.mean_eta[1].value,
        stats.eta_corr[0][0].value,
        stats.eta_corr[1][1].value,
        stats.eta_corr[0][1].value,
    ];
    for n in 0..2 {
        let lo = targets[n] * targets[n] * (1.0 + 1e-9);
        let hi = targets[n] * (1.0 - 1e-9);
        let clamped = targets[2 + n].clamp(lo, hi);
        if (clamped - targets[2 + n]).abs() > 1e-12 {
            warnings.push(format!(
                "second moment <eta_{}^2> = {:.6} clamped into the physical range \
                 [{lo:.6}, {hi:.6}]",
                n + 1,
                targets[2 + n]
            ));
            targets[2 + n] = clamped;
        }
    }
    let cs_bound = (targets[2] * targets[3]).sqrt() * (1.0 - 1e-12);
    if targets[4] > cs_bound {
        warnings.push(format!(
            "cross moment <eta_1 eta_2> = {:.6} clamped to the Cauchy-Schwarz bound",
            targets[4]
        ));
        targets[4] = cs_bound;
    }

    let m0_init = [-mu_offset[0], -mu_offset[1]];
    let s_init = [[cov[0][0], cov[0][1]], [cov[1][0], cov[1][1]]];
    let (mu_cal, cov_cal, calibrated) = match calibrate_weak_bw(
        targets,
        m0_init,
        s_init,
        scale_r,
        shape_lambda,
        corrections.d0,
        delta,
    ) {
        Some((m0, s)) => (m0, [[s[0][0], s[0][1]], [s[1][0], s[1][1]]], true),
        None => {
            warnings.push(
                "truncation-aware moment calibration did not converge; sampling with the \
                 analytic (untruncated-match) parameters"
                    .to_string(),
            );
            (m0_init, cov, false)
        }
    };

    Ok(WeakBwParams {
        eta0,
        zeta0,
        mu_offset,
        cov_lognormal: cov,
        mu_cal,
        cov_cal,
        calibrated,
        scale_r,
        shape_lambda,
        delta,
        d0: corrections.d0,
        truncation_mass,
        warnings,
    })
}

/// Weak-beam-wandering PDT by the law of total probability.
pub fn pdt_weak_bw(
    wparams: &WeakBwParams,
    corrections: &CorrectionSettings,
    n_samples: u64,
    bins: usize,
    rng: &RngStream,
) -> Result<TransmittanceDistribution> {
    let cov = vec![
        vec![wparams.cov_cal[0][0], wparams.cov_cal[0][1]],
        vec![wparams.cov_cal[1][0], wparams.cov_cal[1][1]],
    ];
    let chol = cholesky_psd(&cov)?;
    let p = wparams.clone();
    let eta_det = corrections.eta_det;
    let dist = run_histogram(ModelKind::WeakBw, n_samples, bins, rng, move |s| {
        let r0 = sample_rice(p.d0, p.delta, s);
        let z1 = sample_normal(s);
        let z2 = sample_normal(s);
        let mut ln_eta = [0.0; 2];
        for n in 0..2 {
            let mean = p.mu_cal[n] - (r0 / p.scale_r[n]).powf(p.shape_lambda[n]);
            let noise = if n == 0 {
                chol[0][0] * z1
            } else {
                chol[1][0] * z1 + chol[1][1] * z2
            };
            ln_eta[n] = mean + noise;
        }
        let eta1 = ln_eta[0].exp();
        let eta2 = ln_eta[1].exp();
        if eta1 > 1.0 || eta2 > 1.0 {
            return Ok(Draw::RejectTruncation);
        }
        if eta1 < eta2 {
            return Ok(Draw::RejectOrdering);
        }
        Ok(Draw::Keep((eta1 - eta2) * eta_det))
    })?;
    let rejected = dist.diagnostics.rejected_truncation + dist.diagnostics.rejected_ordering;
    if 2 * rejected > dist.diagnostics.attempts {
        return Err(Error::Diagnostic(format!(
            "weak-BW rejection rate {:.1}% exceeds 50%: model outside its validity range",
            100.0 * rejected as f64 / dist.diagnostics.attempts as f64
        )));
    }
    Ok(dist)
}

/// One entry of an offset sweep.
#[derive(Debug, Clone, Serialize)]
pub struct OffsetScanPoint {
    pub d0: f64,
    pub mean_eta: f64,
    pub distribution: TransmittanceDistribution,
}

/// Run a PDT model over a grid of aim-point offsets with a shared seed.
pub fn scan_offset<F>(d0_grid: &[f64], run: F) -> Result<Vec<OffsetScanPoint>>
where
    F: Fn(f64) -> Result<TransmittanceDistribution>,
{
    d0_grid
        .iter()
        .map(|&d0| {
            let distribution = run(d0)?;
            Ok(OffsetScanPoint {
                d0,
                mean_eta: distribution.mean,
                distribution,
            })
        })
        .collect()
}

/// Compose a deterministic attenuation onto an existing distribution:
/// support scales by `eta_det`, density by `1/eta_det`.
pub fn apply_deterministic_loss(
    dist: &TransmittanceDistribution,
    eta_det: f64,
) -> Result<TransmittanceDistribution> {
    if !(eta_det > 0.0 && eta_det <= 1.0) {
        return Err(Error::Domain {
            op: "apply_deterministic_loss",
            detail: format!("eta_det must lie in (0, 1], got {eta_det}"),
        });
    }
    let mut out = dist.clone();
    for e in out.bin_edges.iter_mut() {
        *e *= eta_det;
    }
    for d in out.density.iter_mut() {
        *d /= eta_det;
    }
    out.mean = dist.mean * eta_det;
    out.second_moment = dist.second_moment * eta_det * eta_det;
    out.variance = dist.variance * eta_det * eta_det;
    Ok(out)
}
