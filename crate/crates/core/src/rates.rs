//! Predicted contraction factors from spectra or global constants, and
//! certificates comparing them with observed trajectories.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::games::GameConstants;
use crate::solvers::{MethodKind, Trajectory};
use crate::spectral::{spectral_map, ComplexSpectrum};
use num_complex::Complex64;

/// Tolerance added to a predicted factor before a certificate fails.
pub const CERTIFICATE_TOLERANCE: f64 = 1e-9;
/// Default relative threshold below which eigenvalues count as zero.
pub const DEFAULT_ZERO_TOL: f64 = 1e-9;
/// Default tail window for observed rates.
pub const DEFAULT_WINDOW: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralTheorem {
    GdUpper,
    GdLower,
    KegGeneral,
    KegSimplified,
    ProximalExact,
    BilinearCorollary,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumStats {
    pub min_re: f64,
    pub min_abs: f64,
    pub max_abs: f64,
    pub min_re_inv: f64,
}

impl SpectrumStats {
    pub fn of(s: &ComplexSpectrum) -> Self {
        SpectrumStats { min_re: s.min_re(), min_abs: s.min_abs(), max_abs: s.max_abs(), min_re_inv: s.min_re_inv() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralRatePrediction {
    pub theorem: SpectralTheorem,
    pub eta: f64,
    pub k: Option<usize>,
    pub rho_sq: f64,
    /// Exact squared spectral radius of the method at `eta`, for comparison.
    pub exact_rho_sq: Option<f64>,
    pub spectrum_stats: SpectrumStats,
}

/// Outcome of the gradient-method sandwich.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum GdSpectralBounds {
    Convergent { upper: f64, lower: f64, eta: f64, exact_rho_sq: f64 },
    /// Some eigenvalue has nonpositive real part; no step size contracts.
    NonConvergent { min_re: f64 },
}

/// `max |P(λ)|²` over the spectrum.
fn max_sq_modulus(s: &ComplexSpectrum, coeffs: &[f64]) -> f64 {
    spectral_map(s, coeffs).eigenvalues().iter().map(|z| z.norm_sqr()).fold(0.0, f64::max)
}

fn require_nonempty(s: &ComplexSpectrum) -> Result<()> {
    if s.is_empty() {
        Err(Error::Domain("empty spectrum".into()))
    } else {
        Ok(())
    }
}

pub fn gd_spectral_bounds(s: &ComplexSpectrum) -> Result<GdSpectralBounds> {
    require_nonempty(s)?;
    let min_re = s.min_re();
    if min_re <= 0.0 {
        return Ok(GdSpectralBounds::NonConvergent { min_re });
    }
    let eta = s.min_re_inv();
    let m = eta * min_re;
    Ok(GdSpectralBounds::Convergent {
        upper: 1.0 - m,
        lower: 1.0 - 4.0 * m,
        eta,
        exact_rho_sq: max_sq_modulus(s, &[1.0, -eta]),
    })
}

/// Coefficients of `Σ_{j=0}^k (−ηX)^j`.
pub fn keg_polynomial(eta: f64, k: usize) -> Vec<f64> {
    (0..=k).map(|j| (-eta).powi(j as i32)).collect()
}

fn check_step(eta: f64, k: usize) -> Result<()> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Config(format!("eta must be positive, got {eta}")));
    }
    if k < 1 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    Ok(())
}

/// Exact squared spectral radius of the k-extrapolation operator.
pub fn keg_spectral_radius_sq(s: &ComplexSpectrum, eta: f64, k: usize) -> Result<f64> {
    check_step(eta, k)?;
    require_nonempty(s)?;
    Ok(max_sq_modulus(s, &keg_polynomial(eta, k)))
}

/// Largest step for which the k-extrapolation bound holds: `(1/4)^{1/(k−1)} / max|λ|`.
pub fn keg_step_cap(s: &ComplexSpectrum, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::Config("the extrapolation bound needs k >= 2".into()));
    }
    require_nonempty(s)?;
    Ok(0.25f64.powf(1.0 / (k as f64 - 1.0)) / s.max_abs())
}

/// `1 − min (2ηRe λ + c η²|λ|²) / |1 + ηλ|²`.
fn one_minus_min_ratio(s: &ComplexSpectrum, eta: f64, c: f64) -> Result<f64> {
    let mut best = f64::INFINITY;
    for z in s.eigenvalues() {
        let den = (Complex64::new(1.0, 0.0) + eta * z).norm_sqr();
        if den <= f64::EPSILON * f64::EPSILON {
            return Err(Error::Singular { rcond: den.sqrt() });
        }
        best = best.min((2.0 * eta * z.re + c * eta * eta * z.norm_sqr()) / den);
    }
    Ok(1.0 - best)
}

pub fn keg_rate_bound(s: &ComplexSpectrum, eta: f64, k: usize) -> Result<f64> {
    check_step(eta, k)?;
    let cap = keg_step_cap(s, k)?;
    if eta > cap * (1.0 + 1e-12) {
        return Err(Error::StepSize { eta, cap });
    }
    one_minus_min_ratio(s, eta, 7.0 / 16.0)
}

/// `1 − ¼(min Re λ / max|λ| + (1/16) min|λ|² / max|λ|²)`, valid at `η = 1/(4 max|λ|)`.
pub fn keg_simplified_bound(s: &ComplexSpectrum) -> Result<f64> {
    require_nonempty(s)?;
    let m = s.max_abs();
    if m == 0.0 {
        return Err(Error::Degenerate("zero spectrum".into()));
    }
    let a = s.min_abs();
    Ok(1.0 - 0.25 * (s.min_re() / m + a * a / (16.0 * m * m)))
}

/// `max 1/|1+ηλ|²`.
pub fn proximal_radius_sq(s: &ComplexSpectrum, eta: f64) -> Result<f64> {
    check_step(eta, 1)?;
    require_nonempty(s)?;
    let mut worst: f64 = 0.0;
    for z in s.eigenvalues() {
        let den = (Complex64::new(1.0, 0.0) + eta * z).norm_sqr();
        if den <= 1e-28 {
            return Err(Error::Singular { rcond: den.sqrt() });
        }
        worst = worst.max(1.0 / den);
    }
    Ok(worst)
}

/// Proximal radius written in the same shape as the extrapolation bound.
pub fn proximal_radius_sq_ratio_form(s: &ComplexSpectrum, eta: f64) -> Result<f64> {
    check_step(eta, 1)?;
    one_minus_min_ratio(s, eta, 1.0)
}

/// `1 − σ_min² / (64 σ_max²)` for bilinear games at `η = 1/(4σ_max)`.
pub fn bilinear_corollary_bound(sigma_min: f64, sigma_max: f64) -> Result<f64> {
    if !(sigma_max > 0.0) {
        return Err(Error::Degenerate("zero matrix".into()));
    }
    Ok(1.0 - sigma_min * sigma_min / (64.0 * sigma_max * sigma_max))
}

/// Extrapolation radius with near-zero eigenvalues (|λ| ≤ zero_tol·max|λ|) removed.
pub fn effective_radius_sq(s: &ComplexSpectrum, eta: f64, k: usize, zero_tol: f64) -> Result<f64> {
    if k < 2 {
        return Err(Error::Config("k must be at least 2".into()));
    }
    require_nonempty(s)?;
    let kept = s.without_near_zero(zero_tol);
    if kept.is_empty() || s.max_abs() == 0.0 {
        return Err(Error::Degenerate("every eigenvalue is numerically zero".into()));
    }
    keg_spectral_radius_sq(&kept, eta, k)
}

/// Spectral prediction for `method` at step `eta` (extrapolation count `k`).
pub fn predict(method: MethodKind, s: &ComplexSpectrum, eta: f64, k: usize) -> Result<SpectralRatePrediction> {
    require_nonempty(s)?;
    let stats = SpectrumStats::of(s);
    let (theorem, rho_sq, exact, k_out) = match method {
        MethodKind::Gradient => {
            check_step(eta, 1)?;
            let exact = max_sq_modulus(s, &[1.0, -eta]);
            match gd_spectral_bounds(s)? {
                GdSpectralBounds::Convergent { upper, eta: e, .. } if (eta - e).abs() <= 1e-12 * e => {
                    (SpectralTheorem::GdUpper, upper, exact, None)
                }
                _ => (SpectralTheorem::GdUpper, exact, exact, None),
            }
        }
        MethodKind::KExtrapolation => {
            let exact = keg_spectral_radius_sq(s, eta, k)?;
            if k == 1 {
                (SpectralTheorem::GdUpper, exact, exact, Some(k))
            } else {
                let bilinear = s.eigenvalues().iter().all(|z| z.re.abs() <= 1e-12 * stats.max_abs.max(1.0));
                let simplified_eta = 0.25 / stats.max_abs;
                if k == 2 && bilinear && (eta - simplified_eta).abs() <= 1e-12 * simplified_eta {
                    let b = bilinear_corollary_bound(stats.min_abs, stats.max_abs)?;
                    (SpectralTheorem::BilinearCorollary, b, exact, Some(k))
                } else {
                    (SpectralTheorem::KegGeneral, keg_rate_bound(s, eta, k)?, exact, Some(k))
                }
            }
        }
        MethodKind::Proximal => {
            let r = proximal_radius_sq(s, eta)?;
            (SpectralTheorem::ProximalExact, r, r, None)
        }
        MethodKind::Optimistic | MethodKind::Consensus => {
            return Err(Error::Config(format!("no spectral prediction for the {method} method")));
        }
    };
    Ok(SpectralRatePrediction { theorem, eta, k: k_out, rho_sq, exact_rho_sq: Some(exact), spectrum_stats: stats })
}

/// Simplified extrapolation prediction at its canonical step `1/(4 max|λ|)`.
pub fn predict_simplified(s: &ComplexSpectrum) -> Result<SpectralRatePrediction> {
    let stats = SpectrumStats::of(s);
    let eta = 0.25 / stats.max_abs;
    Ok(SpectralRatePrediction {
        theorem: SpectralTheorem::KegSimplified,
        eta,
        k: Some(2),
        rho_sq: keg_simplified_bound(s)?,
        exact_rho_sq: Some(keg_spectral_radius_sq(s, eta, 2)?),
        spectrum_stats: stats,
    })
}

fn check_global_step(c: &GameConstants, eta: f64) -> Result<()> {
    if !(eta > 0.0) {
        return Err(Error::Config(format!("eta must be positive, got {eta}")));
    }
    let cap = 0.25 / c.lipschitz;
    if eta > cap * (1.0 + 1e-12) {
        return Err(Error::StepSize { eta, cap });
    }
    Ok(())
}

fn consensus_rate(c: &GameConstants) -> Result<f64> {
    if !(c.l_h_sq > 0.0) {
        return Err(Error::Degenerate("zero Jacobian".into()));
    }
    // (1 + μ/γ)γ² written as γ² + μγ so that γ = 0 stays finite.
    Ok(1.0 - (c.mu * c.mu + c.gamma * c.gamma + c.mu * c.gamma) / (2.0 * c.l_h_sq))
}

/// Global factor for `method`.
///
/// Extrapolation is taken with `k = 2`. The extragradient and consensus values
/// are per-step contractions of `‖ω−ω*‖²` and `H` respectively; the optimistic
/// value is the base of the envelope `2·q^{t+1}`. The proximal value holds for
/// any positive step. Consensus ignores `eta` and assumes its certified
/// `α, β`.
pub fn global_rate(c: &GameConstants, method: MethodKind, eta: f64) -> Result<f64> {
    let (mu, g) = (c.mu, c.gamma);
    match method {
        MethodKind::KExtrapolation => {
            check_global_step(c, eta)?;
            Ok(1.0 - eta * mu - 7.0 / 16.0 * eta * eta * g * g)
        }
        MethodKind::Optimistic => {
            check_global_step(c, eta)?;
            Ok(1.0 - eta * mu - eta * eta * g * g / 8.0)
        }
        MethodKind::Consensus => consensus_rate(c),
        MethodKind::Proximal => {
            if !(eta > 0.0) {
                return Err(Error::Config(format!("eta must be positive, got {eta}")));
            }
            let a = 2.0 * eta * mu + eta * eta * g * g;
            Ok(1.0 - a / (1.0 + a))
        }
        MethodKind::Gradient => Err(Error::Config("no global bound for the gradient method".into())),
    }
}

/// Summary-table form of the global factors at `η = 1/(4L)`:
/// `1 − ¼(μ/L + γ²/(16L²))` for extragradient, `1 − ¼(μ/L + γ²/(32L²))`
/// for optimistic, and the consensus factor.
pub fn global_rate_simplified(c: &GameConstants, method: MethodKind) -> Result<f64> {
    let l = c.lipschitz;
    if !(l > 0.0) {
        return Err(Error::Degenerate("zero Jacobian".into()));
    }
    let q = c.gamma * c.gamma / (l * l);
    match method {
        MethodKind::KExtrapolation => Ok(1.0 - 0.25 * (c.mu / l + q / 16.0)),
        MethodKind::Optimistic => Ok(1.0 - 0.25 * (c.mu / l + q / 32.0)),
        MethodKind::Consensus => consensus_rate(c),
        _ => Err(Error::Config(format!("no summary factor for the {method} method"))),
    }
}

/// Root-location case of one separable block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootCase {
    /// Complex conjugate roots, `(α−β)² < 4σ²`.
    Complex,
    /// Real roots, `(α−β)² ≥ 4σ²`.
    Real,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutativeSaddleBounds {
    pub mu1: f64,
    pub mu2: f64,
    pub mu12: f64,
    pub l1: f64,
    pub l2: f64,
    pub l12: f64,
    pub cases: Vec<RootCase>,
    /// Bounds for complex-root blocks: `Re λ ≥ re_lower`, `abs_sq_lower ≤ |λ|² ≤ abs_sq_upper`.
    pub re_lower: f64,
    pub abs_sq_lower: f64,
    pub abs_sq_upper: f64,
    /// Bracket `[real_lower, real_upper]` for real-root blocks.
    pub real_lower: f64,
    pub real_upper: f64,
    /// True when some block has real roots, in which case the two rate
    /// bounds below are not guaranteed.
    pub has_real_case: bool,
    pub gd_bound: f64,
    pub eg_bound: f64,
}

/// Spectrum and rate bounds for the separable game built from `alphas`,
/// `betas`, `sigmas`; the extremal constants are read off the inputs.
pub fn commutative_saddle_bounds(alphas: &[f64], betas: &[f64], sigmas: &[f64]) -> Result<CommutativeSaddleBounds> {
    let m = alphas.len();
    if m == 0 || betas.len() != m || sigmas.len() != m {
        return Err(Error::Domain("alphas, betas, sigmas must share a positive length".into()));
    }
    if alphas.iter().chain(betas).any(|&x| !(x >= 0.0)) {
        return Err(Error::Domain("alphas and betas must be nonnegative".into()));
    }
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let abs_s: Vec<f64> = sigmas.iter().map(|s| s.abs()).collect();
    let (mu1, l1) = (min(alphas), max(alphas));
    let (mu2, l2) = (min(betas), max(betas));
    let (mu12, l12) = (min(&abs_s), max(&abs_s));
    let cases: Vec<RootCase> = (0..m)
        .map(|i| {
            let d = alphas[i] - betas[i];
            if d * d < 4.0 * sigmas[i] * sigmas[i] {
                RootCase::Complex
            } else {
                RootCase::Real
            }
        })
        .collect();
    let det_mu = mu1 * mu2 + mu12 * mu12;
    let det_l = l1 * l2 + l12 * l12;
    let tr_l = l1 + l2;
    let real_lower = if tr_l > 0.0 { mu1.min(mu2).max(det_mu / tr_l) } else { mu1.min(mu2) };
    let gd_bound = if det_l > 0.0 { 1.0 - 0.25 * (mu1 + mu2).powi(2) / det_l } else { 1.0 };
    let eg_bound = if det_l > 0.0 {
        1.0 - 0.25 * (0.5 * (mu1 + mu2) / det_l.sqrt() + det_mu / (16.0 * det_l))
    } else {
        1.0
    };
    Ok(CommutativeSaddleBounds {
        mu1,
        mu2,
        mu12,
        l1,
        l2,
        l12,
        has_real_case: cases.contains(&RootCase::Real),
        cases,
        re_lower: 0.5 * (mu1 + mu2),
        abs_sq_lower: det_mu,
        abs_sq_upper: det_l,
        real_lower,
        real_upper: l1.max(l2),
        gd_bound,
        eg_bound,
    })
}

/// Which quantity a certificate monitors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitored {
    /// `‖ω_t − ω*‖²`.
    Distance,
    /// `H(ω_t) = ½‖v(ω_t)‖²`.
    Hamiltonian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateMode {
    /// Every consecutive ratio in the tail window is at most the factor.
    PerStep,
    /// `x_t ≤ 2 q^{t+1} x_0` for every recorded `t`; the observed factor is the
    /// smallest such `q`.
    Envelope,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateCertificate {
    pub theorem: String,
    pub inputs: serde_json::Value,
    pub predicted: f64,
    pub observed: f64,
    pub satisfied: bool,
    /// `predicted − observed`; negative when violated.
    pub slack: f64,
    pub monitored: Monitored,
    pub mode: CertificateMode,
    pub window: usize,
}

fn squared_series(traj: &Trajectory, monitored: Monitored) -> Result<Vec<f64>> {
    match monitored {
        Monitored::Distance => traj
            .distances
            .as_ref()
            .map(|d| d.iter().map(|x| x * x).collect())
            .ok_or_else(|| Error::InsufficientData("trajectory has no distances (unknown stationary point)".into())),
        Monitored::Hamiltonian => Ok(traj.h_values.clone()),
    }
}

/// Largest consecutive ratio `x_{t+1}/x_t` over the last `window` steps.
pub fn max_tail_ratio(series: &[f64], window: usize) -> Result<f64> {
    if window == 0 || series.len() < window + 1 {
        return Err(Error::InsufficientData(format!(
            "{} recorded values for a window of {window}",
            series.len()
        )));
    }
    let mut worst = f64::NEG_INFINITY;
    for w in series[series.len() - window - 1..].windows(2) {
        if w[0] == 0.0 {
            if w[1] == 0.0 {
                continue;
            }
            return Ok(f64::INFINITY);
        }
        worst = worst.max(w[1] / w[0]);
    }
    if worst == f64::NEG_INFINITY {
        worst = 0.0;
    }
    Ok(worst)
}

/// Smallest `q` with `x_t ≤ 2 q^{t+1} x_0` for all recorded `t`.
pub fn envelope_factor(series: &[f64]) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::InsufficientData("envelope needs at least two values".into()));
    }
    let x0 = series[0];
    if x0 == 0.0 {
        return Ok(0.0);
    }
    Ok(series
        .iter()
        .enumerate()
        .map(|(t, &x)| (x / (2.0 * x0)).powf(1.0 / (t as f64 + 1.0)))
        .fold(0.0, f64::max))
}

/// Per-step certificate on squared distances over the final `window` steps.
pub fn certify(traj: &Trajectory, predicted_factor: f64, window: usize) -> Result<RateCertificate> {
    certify_with(traj, predicted_factor, window, Monitored::Distance, CertificateMode::PerStep, "per_step", json!({}))
}

pub fn certify_with(
    traj: &Trajectory,
    predicted: f64,
    window: usize,
    monitored: Monitored,
    mode: CertificateMode,
    theorem: &str,
    inputs: serde_json::Value,
) -> Result<RateCertificate> {
    let series = squared_series(traj, monitored)?;
    let observed = match mode {
        CertificateMode::PerStep => max_tail_ratio(&series, window)?,
        CertificateMode::Envelope => envelope_factor(&series)?,
    };
    Ok(RateCertificate {
        theorem: theorem.to_string(),
        inputs,
        predicted,
        observed,
        satisfied: observed <= predicted + CERTIFICATE_TOLERANCE,
        slack: predicted - observed,
        monitored,
        mode,
        window,
    })
}
