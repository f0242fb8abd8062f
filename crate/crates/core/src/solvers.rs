//! Step functions and trajectory drivers for the iterative methods.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::games::{AffineVectorField, GameConstants, GameProblem};
use crate::spectral::{self, axpy, norm2, ComplexSpectrum, LuFactor, RealMatrix};

/// Distance (or field norm) beyond which a run is declared divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Gradient,
    KExtrapolation,
    Optimistic,
    Consensus,
    Proximal,
}

impl MethodKind {
    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Gradient => "gradient",
            MethodKind::KExtrapolation => "k_extrapolation",
            MethodKind::Optimistic => "optimistic",
            MethodKind::Consensus => "consensus",
            MethodKind::Proximal => "proximal",
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "gradient" | "gd" => MethodKind::Gradient,
            "k_extrapolation" | "keg" | "eg" | "extragradient" => MethodKind::KExtrapolation,
            "optimistic" | "og" => MethodKind::Optimistic,
            "consensus" | "co" | "hgd" => MethodKind::Consensus,
            "proximal" | "prox" => MethodKind::Proximal,
            other => return Err(Error::Config(format!("unknown method {other:?}"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub eta: f64,
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub max_steps: usize,
    pub stop_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { eta: 0.1, k: 2, alpha: 0.0, beta: 0.0, max_steps: 1000, stop_tol: 0.0 }
    }
}

impl SolverConfig {
    pub fn validate(&self, method: MethodKind) -> Result<()> {
        if self.max_steps < 1 {
            return Err(Error::Config("max_steps must be at least 1".into()));
        }
        if !(self.stop_tol >= 0.0) {
            return Err(Error::Config("stop_tol must be nonnegative".into()));
        }
        match method {
            MethodKind::Consensus => {
                if !(self.alpha >= 0.0 && self.beta >= 0.0) || self.alpha + self.beta == 0.0 {
                    return Err(Error::Config("consensus needs alpha, beta >= 0, not both zero".into()));
                }
            }
            _ => {
                if !(self.eta > 0.0 && self.eta.is_finite()) {
                    return Err(Error::Config(format!("eta must be positive, got {}", self.eta)));
                }
            }
        }
        if method == MethodKind::KExtrapolation && self.k < 1 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn gd_step(v: &AffineVectorField, w: &[f64], eta: f64) -> Result<Vec<f64>> {
    Ok(axpy(w, -eta, &v.eval(w)?))
}

/// `k` applications of `z ↦ w − η v(z)` starting from `z = w`.
pub fn k_extrapolation_step(v: &AffineVectorField, w: &[f64], eta: f64, k: usize) -> Result<Vec<f64>> {
    if k < 1 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let mut z = w.to_vec();
    for _ in 0..k {
        z = axpy(w, -eta, &v.eval(&z)?);
    }
    Ok(z)
}

/// One optimistic step; returns the next iterate and `v(w)` for the following call.
pub fn og_step(v: &AffineVectorField, w: &[f64], w_prev_field: &[f64], eta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if w_prev_field.len() != w.len() {
        return Err(Error::Dimension("stored field has the wrong length".into()));
    }
    let vw = v.eval(w)?;
    let next: Vec<f64> = w
        .iter()
        .zip(&vw)
        .zip(w_prev_field)
        .map(|((x, a), b)| x - 2.0 * eta * a + eta * b)
        .collect();
    Ok((next, vw))
}

/// `w − α v(w) − β Jᵀ v(w)`.
pub fn co_step(v: &AffineVectorField, w: &[f64], alpha: f64, beta: f64) -> Result<Vec<f64>> {
    let vw = v.eval(w)?;
    let gh = v.jacobian().tr_matvec(&vw)?;
    Ok(w.iter().zip(&vw).zip(&gh).map(|((x, a), g)| x - alpha * a - beta * g).collect())
}

/// Implicit step `(I + ηJ)⁻¹(w − η b)` with the factorization cached.
#[derive(Clone, Debug)]
pub struct ProximalOperator {
    lu: LuFactor,
    eta: f64,
    offset: Vec<f64>,
}

impl ProximalOperator {
    pub fn new(v: &AffineVectorField, eta: f64) -> Result<Self> {
        let d = v.dim();
        let m = RealMatrix::identity(d).add(&v.jacobian().scale(eta))?;
        Ok(ProximalOperator { lu: LuFactor::new(&m)?, eta, offset: v.offset().to_vec() })
    }

    pub fn apply(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.lu.solve(&axpy(w, -self.eta, &self.offset))
    }
}

pub fn proximal_step(v: &AffineVectorField, w: &[f64], eta: f64) -> Result<Vec<f64>> {
    ProximalOperator::new(v, eta)?.apply(w)
}

/// Default hyper-parameters used by the trajectory driver and CLI.
pub fn co_parameters(c: &GameConstants) -> Result<(f64, f64)> {
    if !(c.l_h_sq > 0.0) {
        return Err(Error::Degenerate("zero Jacobian".into()));
    }
    let alpha = (c.mu + (c.mu * c.mu + 2.0 * c.gamma * c.gamma).sqrt()) / (4.0 * c.l_h_sq);
    Ok((alpha, 1.0 / (2.0 * c.l_h_sq)))
}

/// `min Re(1/λ)` when every eigenvalue has positive real part, else `1/L`.
pub fn gd_default_eta(s: &ComplexSpectrum, c: &GameConstants) -> f64 {
    if s.min_re() > 0.0 {
        s.min_re_inv()
    } else {
        1.0 / c.lipschitz
    }
}

/// `1/(4L)`, the certified step of extragradient and optimistic methods.
pub fn quarter_lipschitz_eta(c: &GameConstants) -> f64 {
    0.25 / c.lipschitz
}

/// Distance from `w` to the affine solution set `{ω : v(ω) = 0}`, i.e. `‖J⁺ v(w)‖`.
pub fn solution_set_distance(pinv: &RealMatrix, v: &AffineVectorField, w: &[f64]) -> Result<f64> {
    Ok(norm2(&pinv.matvec(&v.eval(w)?)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub iterates: Vec<Vec<f64>>,
    pub distances: Option<Vec<f64>>,
    pub field_norms: Vec<f64>,
    pub h_values: Vec<f64>,
    pub diverged: bool,
    pub converged: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }

    /// CSV with columns `t,distance,field_norm,h_value`; distance is blank when unknown.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,distance,field_norm,h_value\n");
        for t in 0..self.len() {
            let d = self.distances.as_ref().map(|d| format!("{:.16e}", d[t])).unwrap_or_default();
            s.push_str(&format!("{t},{d},{:.16e},{:.16e}\n", self.field_norms[t], self.h_values[t]));
        }
        s
    }
}

/// Runs `method` from `w0` for at most `cfg.max_steps` steps.
pub fn run(method: MethodKind, p: &GameProblem, cfg: &SolverConfig, w0: &[f64]) -> Result<Trajectory> {
    cfg.validate(method)?;
    let v = p.field();
    if w0.len() != v.dim() {
        return Err(Error::Dimension(format!("initial point of length {} for dimension {}", w0.len(), v.dim())));
    }
    let ws = p.stationary_point();
    let mut traj = Trajectory {
        iterates: Vec::with_capacity(cfg.max_steps + 1),
        distances: ws.map(|_| Vec::with_capacity(cfg.max_steps + 1)),
        field_norms: Vec::with_capacity(cfg.max_steps + 1),
        h_values: Vec::with_capacity(cfg.max_steps + 1),
        diverged: false,
        converged: false,
    };
    let prox = match method {
        MethodKind::Proximal => Some(ProximalOperator::new(v, cfg.eta)?),
        _ => None,
    };
    let mut w = w0.to_vec();
    let mut prev_field = v.eval(&w)?;
    for t in 0..=cfg.max_steps {
        let vw = v.eval(&w)?;
        let fnorm = norm2(&vw);
        let dist = ws.map(|s| norm2(&axpy(&w, -1.0, s)));
        traj.field_norms.push(fnorm);
        traj.h_values.push(0.5 * fnorm * fnorm);
        if let (Some(ds), Some(d)) = (traj.distances.as_mut(), dist) {
            ds.push(d);
        }
        traj.iterates.push(w.clone());
        let monitor = dist.unwrap_or(fnorm);
        if !monitor.is_finite() || monitor > DIVERGENCE_THRESHOLD {
            traj.diverged = true;
            break;
        }
        if monitor <= cfg.stop_tol {
            traj.converged = true;
            break;
        }
        if t == cfg.max_steps {
            break;
        }
        w = match method {
            MethodKind::Gradient => gd_step(v, &w, cfg.eta)?,
            MethodKind::KExtrapolation => k_extrapolation_step(v, &w, cfg.eta, cfg.k)?,
            MethodKind::Optimistic => {
                let (next, stored) = og_step(v, &w, &prev_field, cfg.eta)?;
                prev_field = stored;
                next
            }
            MethodKind::Consensus => co_step(v, &w, cfg.alpha, cfg.beta)?,
            MethodKind::Proximal => prox.as_ref().expect("factorized").apply(&w)?,
        };
    }
    Ok(traj)
}

/// Matrix of the step map acting on `ω − ω*`.
///
/// For the optimistic method the state is `(ω_t − ω*, ω_{t−1} − ω*)` and the
/// matrix has order `2d`.
pub fn operator_matrix(method: MethodKind, j: &RealMatrix, cfg: &SolverConfig) -> Result<RealMatrix> {
    let d = j.rows();
    let id = RealMatrix::identity(d);
    match method {
        MethodKind::Gradient => id.sub(&j.scale(cfg.eta)),
        MethodKind::KExtrapolation => {
            let coeffs: Vec<f64> = (0..=cfg.k).map(|i| (-cfg.eta).powi(i as i32)).collect();
            spectral::matrix_poly(j, &coeffs)
        }
        MethodKind::Optimistic => {
            let top = id.sub(&j.scale(2.0 * cfg.eta))?;
            RealMatrix::from_blocks(&top, &j.scale(cfg.eta), &id, &RealMatrix::zeros(d, d))
        }
        MethodKind::Consensus => {
            let jtj = j.transpose().matmul(j)?;
            id.sub(&j.scale(cfg.alpha))?.sub(&jtj.scale(cfg.beta))
        }
        MethodKind::Proximal => {
            let lu = LuFactor::new(&id.add(&j.scale(cfg.eta))?)?;
            let mut inv = RealMatrix::zeros(d, d);
            for c in 0..d {
                let mut e = vec![0.0; d];
                e[c] = 1.0;
                for (r, x) in lu.solve(&e)?.into_iter().enumerate() {
                    inv.set(r, c, x);
                }
            }
            Ok(inv)
        }
    }
}
