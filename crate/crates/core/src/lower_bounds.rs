//! Lower bounds for stationary one-step linear methods `ω ↦ ω + N(J) v(ω)`:
//! the minimax problem over coefficient polynomials, Chebyshev hard
//! instances and the Lagrange interpolation certificate.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::games::{haar_orthogonal, seeded_rng, AffineVectorField};
use crate::nelder_mead::{self, Options};
use crate::spectral::{self, ComplexSpectrum, RealMatrix};

/// Coefficients `a_0..a_{k−1}` of `N(X) = Σ a_l X^l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodPolynomial {
    coeffs: Vec<f64>,
}

impl MethodPolynomial {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Domain("a method polynomial needs at least one coefficient".into()));
        }
        Ok(MethodPolynomial { coeffs })
    }

    /// Coefficients of k-extrapolation: `N(X) = −η Σ_{j<k} (−ηX)^j`.
    pub fn extrapolation(eta: f64, k: usize) -> Result<Self> {
        Self::new((0..k).map(|j| -eta * (-eta).powi(j as i32)).collect())
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Ascending coefficients of `1 + X·N(X)`.
    pub fn step_polynomial(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.coeffs.len() + 1);
        p.push(1.0);
        p.extend_from_slice(&self.coeffs);
        p
    }
}

/// `I + N(J) J`.
pub fn scli_operator(v: &AffineVectorField, n: &MethodPolynomial) -> Result<RealMatrix> {
    let j = v.jacobian();
    spectral::matrix_poly(j, &n.step_polynomial())
}

/// Largest `|1 + Σ a_l λ^{l+1}|` over the spectrum.
pub fn method_radius(s: &ComplexSpectrum, n: &MethodPolynomial) -> f64 {
    spectral::spectral_map(s, &n.step_polynomial()).max_abs().max(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimaxResult {
    pub value: f64,
    pub argmin: MethodPolynomial,
    pub converged: bool,
}

const STARTS: usize = 20;
const SEARCH_SEED: u64 = 0x5eed;

/// `min_a max_λ |1 + Σ_{l≤degree} a_l λ^{l+1}|` by multi-start simplex search.
pub fn minimax_radius(s: &ComplexSpectrum, degree: usize) -> Result<MinimaxResult> {
    if s.is_empty() {
        return Err(Error::Domain("empty spectrum".into()));
    }
    let n = degree + 1;
    let scale = s.max_abs();
    if scale == 0.0 {
        // Every polynomial equals one on the zero spectrum.
        return Ok(MinimaxResult { value: 1.0, argmin: MethodPolynomial::new(vec![0.0; n])?, converged: true });
    }
    let pts: Vec<Complex64> = s.eigenvalues().iter().map(|z| z / scale).collect();
    let objective = |b: &[f64]| -> f64 {
        pts.iter()
            .map(|&z| {
                let mut acc = Complex64::new(0.0, 0.0);
                for &c in b.iter().rev() {
                    acc = acc * z + c;
                }
                (Complex64::new(1.0, 0.0) + acc * z).norm()
            })
            .fold(0.0, f64::max)
    };

    let mut starts: Vec<Vec<f64>> = vec![vec![0.0; n]];
    // Truncated geometric series of extrapolation at step 1/(2 max|λ|).
    starts.push((0..n).map(|j| -0.5 * (-0.5f64).powi(j as i32)).collect());
    if let Some(b) = levelled_start(&pts, n) {
        starts.push(b);
    }
    if let Some(b) = imaginary_axis_start(&pts, n) {
        starts.push(b);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEARCH_SEED);
    for _ in 0..STARTS {
        starts.push((0..n).map(|_| rng.random_range(-3.0..3.0)).collect());
    }

    let opts = Options { initial_step: 0.25, ftol: 1e-13, xtol: 1e-11, max_evals: 4000 * n };
    let mut best: Option<nelder_mead::Minimum> = None;
    for x0 in &starts {
        let m = nelder_mead::minimize(&objective, x0, &opts);
        if best.as_ref().is_none_or(|b| m.f < b.f) {
            best = Some(m);
        }
    }
    let mut m = best.expect("at least one start");
    // Restart from the incumbent until the simplex stops improving.
    for _ in 0..50 {
        let again = nelder_mead::minimize(&objective, &m.x, &Options { initial_step: 0.05, ..opts });
        let done = m.f - again.f <= 1e-13 * (1.0 + m.f.abs());
        if again.f < m.f {
            m = again;
        }
        if done {
            break;
        }
    }
    let (b, value, converged) = (m.x, m.f, m.converged);
    let coeffs = b.iter().enumerate().map(|(l, c)| c / scale.powi(l as i32 + 1)).collect();
    Ok(MinimaxResult { value, argmin: MethodPolynomial::new(coeffs)?, converged })
}

/// For real positive points, the polynomial equioscillating on `n + 1`
/// spread-out points, i.e. the optimum when exactly `n + 1` points are given.
fn levelled_start(pts: &[Complex64], n: usize) -> Option<Vec<f64>> {
    if pts.iter().any(|z| z.im != 0.0 || z.re <= 0.0) {
        return None;
    }
    let mut xs: Vec<f64> = pts.iter().map(|z| z.re).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs());
    if xs.len() <= n {
        // Few enough points to interpolate the step polynomial to zero.
        let m = xs.len();
        let mut a = RealMatrix::zeros(m, m);
        for (i, &x) in xs.iter().enumerate() {
            for l in 0..m {
                a.set(i, l, x.powi(l as i32 + 1));
            }
        }
        let mut sol = spectral::solve_linear(&a, &vec![-1.0; m]).ok()?;
        sol.resize(n, 0.0);
        return Some(sol);
    }
    let m = xs.len();
    let chosen: Vec<f64> = (0..=n).map(|i| xs[(i * (m - 1) + n / 2) / n.max(1)]).collect();
    // Unknowns b_0..b_{n−1}, h with 1 + Σ b_l x^{l+1} = (−1)^i h.
    let size = n + 1;
    let mut a = RealMatrix::zeros(size, size);
    let mut rhs = vec![0.0; size];
    for (i, &x) in chosen.iter().enumerate() {
        for l in 0..n {
            a.set(i, l, x.powi(l as i32 + 1));
        }
        a.set(i, n, if i % 2 == 0 { -1.0 } else { 1.0 });
        rhs[i] = -1.0;
    }
    let sol = spectral::solve_linear(&a, &rhs).ok()?;
    Some(sol[..n].to_vec())
}

/// For spectra on the imaginary axis, lift the levelled polynomial of the
/// reduced real problem in `x = |λ|²` to the even part of the step polynomial.
fn imaginary_axis_start(pts: &[Complex64], n: usize) -> Option<Vec<f64>> {
    if pts.iter().any(|z| z.re.abs() > 1e-12 || z.im == 0.0) {
        return None;
    }
    let half = n.div_ceil(2);
    if half == 0 {
        return None;
    }
    let reduced: Vec<Complex64> = pts.iter().map(|z| Complex64::new(z.norm_sqr(), 0.0)).collect();
    let c = levelled_start(&reduced, half)?;
    // (iy)^{2m} = (−1)^m x^m, so a_{2m−1} = (−1)^m c_{m−1}.
    let mut b = vec![0.0; n];
    for (m0, cm) in c.iter().enumerate() {
        let m = m0 + 1;
        if 2 * m - 1 < n {
            b[2 * m - 1] = if m % 2 == 0 { *cm } else { -cm };
        }
    }
    Some(b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    Convex,
    Bilinear,
}

impl fmt::Display for InstanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InstanceKind::Convex => "convex",
            InstanceKind::Bilinear => "bilinear",
        })
    }
}

impl FromStr for InstanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "convex" => Ok(InstanceKind::Convex),
            "bilinear" => Ok(InstanceKind::Bilinear),
            other => Err(Error::Config(format!("unknown instance kind {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HardInstance {
    /// `λ_1..λ_{k+1}`; for the bilinear kind these are the eigenvalues of `AᵀA`.
    pub points: Vec<f64>,
    pub mu: f64,
    pub lipschitz: f64,
    pub kind: InstanceKind,
    pub embedded_field: AffineVectorField,
}

/// `λ_j = (μ+L)/2 − ((L−μ)/2) cos((j−1)π/(k−1))` for `j = 1..k`.
pub fn chebyshev_points(mu: f64, l: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![mu];
    }
    (0..k)
        .map(|j| 0.5 * (mu + l) - 0.5 * (l - mu) * (j as f64 * PI / (k as f64 - 1.0)).cos())
        .collect()
}

/// Chebyshev points on `[μ, L]` plus the midpoint of the first two.
///
/// The convex instance is `Oᵀ diag(λ) O` with a fixed orthogonal `O`. The
/// bilinear instance uses `floor(k/2)` points on `[γ², L²]` and
/// `A = diag(√λ)`. `ambient_dim` pads the spectrum by repeating `L`; `None`
/// gives the minimal dimension.
pub fn chebyshev_instance(
    mu: f64,
    l: f64,
    k: usize,
    kind: InstanceKind,
    ambient_dim: Option<usize>,
) -> Result<HardInstance> {
    if !(mu > 0.0 && mu < l && l.is_finite()) {
        return Err(Error::Domain(format!("need 0 < mu < L, got mu={mu}, L={l}")));
    }
    match kind {
        InstanceKind::Convex => {
            if k < 3 {
                return Err(Error::Domain(format!("convex construction needs k >= 3, got {k}")));
            }
            let mut points = chebyshev_points(mu, l, k);
            points.push(0.5 * (points[0] + points[1]));
            let d = match ambient_dim {
                None => k + 1,
                Some(d) if d >= 2 && d - 2 >= k => d,
                Some(d) => return Err(Error::Domain(format!("dimension {d} too small for k = {k}; need d - 2 >= k"))),
            };
            let mut diag = points.clone();
            diag.resize(d, l);
            let o = haar_orthogonal(&mut seeded_rng(0, 0), d);
            let j = o.transpose().matmul(&RealMatrix::from_diagonal(&diag))?.matmul(&o)?.symmetric_part()?;
            Ok(HardInstance { points, mu, lipschitz: l, kind, embedded_field: AffineVectorField::linear(j)? })
        }
        InstanceKind::Bilinear => {
            if k < 6 {
                return Err(Error::Domain(format!("bilinear construction needs k >= 6, got {k}")));
            }
            let kh = k / 2;
            let mut points = chebyshev_points(mu * mu, l * l, kh);
            points.push(0.5 * (points[0] + points[1]));
            let m = match ambient_dim {
                None => kh + 1,
                Some(d) if d % 2 == 0 && d / 2 >= 2 && d / 2 - 2 >= kh => d / 2,
                Some(d) => {
                    return Err(Error::Domain(format!("dimension {d} must be even with d/2 - 2 >= k/2 for k = {k}")));
                }
            };
            let mut sv: Vec<f64> = points.iter().map(|x| x.sqrt()).collect();
            sv.resize(m, l);
            let a = RealMatrix::from_diagonal(&sv);
            let z = RealMatrix::zeros(m, m);
            let j = RealMatrix::from_blocks(&z, &a, &a.scale(-1.0), &z)?;
            Ok(HardInstance { points, mu, lipschitz: l, kind, embedded_field: AffineVectorField::linear(j)? })
        }
    }
}

fn is_chebyshev_spaced(nodes: &[f64]) -> bool {
    let k = nodes.len();
    if k < 2 {
        return false;
    }
    let (lo, hi) = (nodes[0], nodes[k - 1]);
    let cheb = chebyshev_points(lo, hi, k);
    nodes.iter().zip(&cheb).all(|(a, b)| (a - b).abs() <= 1e-12 * hi.abs().max(lo.abs()))
}

/// `L_j(x)` for every node; barycentric with Chebyshev weights when the nodes
/// are Chebyshev-spaced, product formula otherwise.
pub fn lagrange_basis_at(nodes: &[f64], x: f64) -> Vec<f64> {
    let k = nodes.len();
    if k == 1 {
        return vec![1.0];
    }
    if let Some(j) = nodes.iter().position(|&t| t == x) {
        let mut e = vec![0.0; k];
        e[j] = 1.0;
        return e;
    }
    if is_chebyshev_spaced(nodes) {
        let w: Vec<f64> = (0..k)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == k - 1 {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        let terms: Vec<f64> = (0..k).map(|j| w[j] / (x - nodes[j])).collect();
        let den: f64 = terms.iter().sum();
        terms.iter().map(|t| t / den).collect()
    } else {
        lagrange_basis_product(nodes, x)
    }
}

fn lagrange_basis_product(nodes: &[f64], x: f64) -> Vec<f64> {
    (0..nodes.len())
        .map(|j| {
            nodes
                .iter()
                .enumerate()
                .filter(|&(m, _)| m != j)
                .map(|(_, &t)| (x - t) / (nodes[j] - t))
                .product()
        })
        .collect()
}

fn check_points(points: &[f64]) -> Result<()> {
    if points.len() < 2 {
        return Err(Error::Domain("need at least two points".into()));
    }
    if points.iter().any(|&p| p == 0.0 || !p.is_finite()) {
        return Err(Error::Domain("points must be finite and nonzero".into()));
    }
    let scale = points.iter().fold(0.0f64, |m, p| m.max(p.abs()));
    for i in 0..points.len() {
        for j in 0..i {
            if (points[i] - points[j]).abs() <= 1e-14 * scale {
                return Err(Error::Domain("points must be distinct".into()));
            }
        }
    }
    Ok(())
}

fn lagrange_bound_from(points: &[f64], basis: impl Fn(&[f64], f64) -> Vec<f64>) -> Result<f64> {
    check_points(points)?;
    let k = points.len() - 1;
    let (nodes, last) = (&points[..k], points[k]);
    let lj = basis(nodes, last);
    let c: Vec<f64> = (0..k).map(|j| last / nodes[j] * lj[j]).collect();
    let num = 1.0 - c.iter().sum::<f64>();
    let den = 1.0 + c.iter().map(|x| x.abs()).sum::<f64>();
    Ok(0.5 * (num / den).powi(2))
}

/// Certified lower bound on `min ½ max_j |1 + Σ_{l<k} a_l λ_j^{l+1}|²` for
/// the points `λ_1..λ_{k+1}`.
pub fn lagrange_lower_bound(points: &[f64]) -> Result<f64> {
    lagrange_bound_from(points, lagrange_basis_at)
}

/// Same bound evaluated with the product form of the Lagrange basis only.
pub fn lagrange_lower_bound_product(points: &[f64]) -> Result<f64> {
    lagrange_bound_from(points, lagrange_basis_product)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub kind: InstanceKind,
    pub mu_or_gamma: f64,
    pub lipschitz: f64,
    pub k: usize,
    pub points: Vec<f64>,
    pub certified_half_rho_sq: f64,
    pub numeric_minimax_rho: f64,
    pub minimax_coeffs: Vec<f64>,
    pub minimax_converged: bool,
    pub theorem_floor: f64,
    pub floor_holds: bool,
    pub weak_duality_holds: bool,
    pub consistent: bool,
}

/// Lower-bound floor `1 − 4k³μ/(πL)` (convex) or `1 − k³γ²/(2πL²)` (bilinear).
pub fn theorem_floor(mu_or_gamma: f64, l: f64, k: usize, kind: InstanceKind) -> f64 {
    let k3 = (k as f64).powi(3);
    match kind {
        InstanceKind::Convex => 1.0 - 4.0 * k3 / PI * mu_or_gamma / l,
        InstanceKind::Bilinear => 1.0 - k3 / (2.0 * PI) * (mu_or_gamma / l).powi(2),
    }
}

/// Builds the hard instance, solves its minimax problem at degree `k − 1`,
/// and checks the result against the floor and the interpolation certificate.
pub fn verify_lower_bound(mu_or_gamma: f64, l: f64, k: usize, kind: InstanceKind) -> Result<LowerBoundReport> {
    let floor = theorem_floor(mu_or_gamma, l, k, kind);
    if !(floor > 0.0 && floor < 1.0) {
        return Err(Error::Domain(format!("floor {floor} is uninformative; need it inside (0, 1)")));
    }
    let inst = chebyshev_instance(mu_or_gamma, l, k, kind, None)?;
    let spectrum = inst.embedded_field.spectrum()?;
    let mm = minimax_radius(&spectrum, k - 1)?;
    // The bilinear problem reduces to the real one on the points of AᵀA,
    // whose certificate lower-bounds it.
    let cert = lagrange_lower_bound(&inst.points)?;
    let weak = cert <= 0.5 * mm.value * mm.value + 1e-8;
    let floor_holds = mm.value >= floor - 1e-3;
    Ok(LowerBoundReport {
        kind,
        mu_or_gamma,
        lipschitz: l,
        k,
        points: inst.points,
        certified_half_rho_sq: cert,
        numeric_minimax_rho: mm.value,
        minimax_coeffs: mm.argmin.coeffs().to_vec(),
        minimax_converged: mm.converged,
        theorem_floor: floor,
        floor_holds,
        weak_duality_holds: weak,
        consistent: floor_holds && weak,
    })
}
