//! Game instances as affine vector fields `v(ω) = Jω + b`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::spectral::{self, norm2, ComplexSpectrum, RealMatrix};

/// Affine vector field with constant Jacobian.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineVectorField {
    jacobian: RealMatrix,
    offset: Vec<f64>,
}

impl AffineVectorField {
    pub fn new(jacobian: RealMatrix, offset: Vec<f64>) -> Result<Self> {
        if !jacobian.is_square() {
            return Err(Error::Dimension("jacobian must be square".into()));
        }
        if offset.len() != jacobian.rows() {
            return Err(Error::Dimension(format!(
                "offset of length {} for dimension {}",
                offset.len(),
                jacobian.rows()
            )));
        }
        if offset.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("non-finite offset".into()));
        }
        Ok(AffineVectorField { jacobian, offset })
    }

    /// Field with zero offset.
    pub fn linear(jacobian: RealMatrix) -> Result<Self> {
        let d = jacobian.rows();
        Self::new(jacobian, vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn jacobian(&self) -> &RealMatrix {
        &self.jacobian
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn eval(&self, w: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.jacobian.matvec(w)?;
        for (o, b) in out.iter_mut().zip(&self.offset) {
            *o += b;
        }
        Ok(out)
    }

    /// `H(ω) = ½‖v(ω)‖²`.
    pub fn hamiltonian(&self, w: &[f64]) -> Result<f64> {
        let v = self.eval(w)?;
        Ok(0.5 * spectral::dot(&v, &v))
    }

    /// `∇H(ω) = Jᵀ v(ω)`.
    pub fn hamiltonian_grad(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.jacobian.tr_matvec(&self.eval(w)?)
    }

    pub fn spectrum(&self) -> Result<ComplexSpectrum> {
        spectral::eigenvalues(&self.jacobian)
    }
}

/// Generator tag, parameters and seed of a problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub params: serde_json::Value,
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new(generator: &str, params: serde_json::Value, seed: Option<u64>) -> Self {
        Provenance { generator: generator.to_string(), params, seed }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GameProblem {
    field: AffineVectorField,
    d1: usize,
    d2: usize,
    stationary_point: Option<Vec<f64>>,
    provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct GameProblemDoc {
    d1: usize,
    d2: usize,
    jacobian: Vec<f64>,
    offset: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    stationary_point: Option<Vec<f64>>,
    provenance: Provenance,
}

impl GameProblem {
    pub fn new(
        field: AffineVectorField,
        d1: usize,
        d2: usize,
        stationary_point: Option<Vec<f64>>,
        provenance: Provenance,
    ) -> Result<Self> {
        if d1 + d2 != field.dim() {
            return Err(Error::Dimension(format!("d1 + d2 = {} but field has dimension {}", d1 + d2, field.dim())));
        }
        if let Some(ws) = &stationary_point {
            let r = norm2(&field.eval(ws)?);
            if r > 1e-8 * (1.0 + norm2(field.offset())) {
                return Err(Error::Numerical(format!("claimed stationary point has residual {r:.3e}")));
            }
        }
        Ok(GameProblem { field, d1, d2, stationary_point, provenance })
    }

    /// Wraps a field, solving for the stationary point when the Jacobian is invertible.
    pub fn from_field(field: AffineVectorField, d1: usize, d2: usize, provenance: Provenance) -> Result<Self> {
        let ws = stationary_point_of(&field);
        Self::new(field, d1, d2, ws, provenance)
    }

    pub fn field(&self) -> &AffineVectorField {
        &self.field
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn d2(&self) -> usize {
        self.d2
    }

    pub fn stationary_point(&self) -> Option<&[f64]> {
        self.stationary_point.as_deref()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn spectrum(&self) -> Result<ComplexSpectrum> {
        self.field.spectrum()
    }

    /// Adds `eps·I` to the Jacobian, making the field `eps`-more strongly monotone.
    pub fn regularized(&self, eps: f64) -> Result<Self> {
        let d = self.dim();
        let j = self.field.jacobian.add(&RealMatrix::identity(d).scale(eps))?;
        let field = AffineVectorField::new(j, self.field.offset.clone())?;
        let mut prov = self.provenance.clone();
        prov.params = json!({ "base": prov.params, "generator": prov.generator, "regularization": eps });
        prov.generator = "regularized".into();
        Self::from_field(field, self.d1, self.d2, prov)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = GameProblemDoc {
            d1: self.d1,
            d2: self.d2,
            jacobian: self.field.jacobian.entries().to_vec(),
            offset: self.field.offset.clone(),
            stationary_point: self.stationary_point.clone(),
            provenance: self.provenance.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: GameProblemDoc = serde_json::from_str(s)?;
        let d = doc.d1 + doc.d2;
        let j = RealMatrix::new(d, d, doc.jacobian)?;
        let field = AffineVectorField::new(j, doc.offset)?;
        Self::new(field, doc.d1, doc.d2, doc.stationary_point, doc.provenance)
    }
}

fn stationary_point_of(field: &AffineVectorField) -> Option<Vec<f64>> {
    if field.offset.iter().all(|&b| b == 0.0) {
        return Some(vec![0.0; field.dim()]);
    }
    let neg: Vec<f64> = field.offset.iter().map(|b| -b).collect();
    spectral::solve_linear(&field.jacobian, &neg).ok()
}

/// Global constants of an affine field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameConstants {
    pub mu: f64,
    pub gamma: f64,
    pub lipschitz: f64,
    pub l_h_sq: f64,
}

pub fn constants(p: &GameProblem) -> Result<GameConstants> {
    field_constants(&p.field)
}

pub fn field_constants(field: &AffineVectorField) -> Result<GameConstants> {
    let j = field.jacobian();
    let sym = spectral::symmetric_eigenvalues(j)?;
    let sv = spectral::singular_values(j);
    let lipschitz = sv[0];
    let gamma = *sv.last().unwrap();
    Ok(GameConstants { mu: sym[0].max(0.0), gamma, lipschitz, l_h_sq: lipschitz * lipschitz })
}

/// `min_x max_y xᵀAy + bᵀx + cᵀy` for an `m × p` matrix `A`.
pub fn bilinear_game(a: &RealMatrix, b: &[f64], c: &[f64]) -> Result<GameProblem> {
    let (m, p) = (a.rows(), a.cols());
    if b.len() != m || c.len() != p {
        return Err(Error::Dimension(format!("offsets of lengths {}, {} for a {m}x{p} matrix", b.len(), c.len())));
    }
    let jac = RealMatrix::from_blocks(&RealMatrix::zeros(m, m), a, &a.transpose().scale(-1.0), &RealMatrix::zeros(p, p))?;
    let mut offset = b.to_vec();
    offset.extend(c.iter().map(|x| -x));
    let field = AffineVectorField::new(jac, offset)?;
    let zero_offsets = b.iter().chain(c).all(|&x| x == 0.0);
    let ws = if zero_offsets {
        Some(vec![0.0; m + p])
    } else if m == p {
        let neg_b: Vec<f64> = b.iter().map(|x| -x).collect();
        let neg_c: Vec<f64> = c.iter().map(|x| -x).collect();
        match (spectral::solve_linear(&a.transpose(), &neg_c), spectral::solve_linear(a, &neg_b)) {
            (Ok(x), Ok(y)) => Some([x, y].concat()),
            _ => None,
        }
    } else {
        None
    };
    let prov = Provenance::new(
        "bilinear",
        json!({ "a": a.to_rows(), "b": b, "c": c }),
        None,
    );
    GameProblem::new(field, m, p, ws, prov)
}

/// `min_x max_y (ε/2)(x² − y²) + xy`.
pub fn in_between_game(epsilon: f64) -> Result<GameProblem> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Domain(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    let j = RealMatrix::from_rows(&[vec![epsilon, 1.0], vec![-1.0, epsilon]])?;
    let prov = Provenance::new("in_between", json!({ "epsilon": epsilon }), None);
    GameProblem::new(AffineVectorField::linear(j)?, 1, 1, Some(vec![0.0, 0.0]), prov)
}

/// Sum of decoupled two-dimensional quadratic games with Jacobian
/// `[[diag α, diag σ], [−diag σ, diag β]]`.
pub fn adversarial_separable_game(alphas: &[f64], betas: &[f64], sigmas: &[f64]) -> Result<GameProblem> {
    let m = alphas.len();
    if betas.len() != m || sigmas.len() != m || m == 0 {
        return Err(Error::Domain(format!(
            "alphas, betas, sigmas must share a positive length, got {}, {}, {}",
            m,
            betas.len(),
            sigmas.len()
        )));
    }
    if alphas.iter().chain(betas).any(|&x| !(x >= 0.0)) {
        return Err(Error::Domain("alphas and betas must be nonnegative".into()));
    }
    let s = RealMatrix::from_diagonal(sigmas);
    let j = RealMatrix::from_blocks(
        &RealMatrix::from_diagonal(alphas),
        &s,
        &s.scale(-1.0),
        &RealMatrix::from_diagonal(betas),
    )?;
    let prov = Provenance::new(
        "adversarial_separable",
        json!({ "alphas": alphas, "betas": betas, "sigmas": sigmas }),
        None,
    );
    GameProblem::new(AffineVectorField::linear(j)?, m, m, Some(vec![0.0; 2 * m]), prov)
}

/// Seeded generator: ChaCha20 keyed by `seed`, with `stream` selecting an
/// independent substream.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian_matrix(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> RealMatrix {
    let e = (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    RealMatrix::new(rows, cols, e).expect("finite gaussian draws")
}

/// Haar-distributed orthogonal matrix from the QR factorization of a Gaussian matrix.
pub fn haar_orthogonal(rng: &mut ChaCha20Rng, n: usize) -> RealMatrix {
    let g = gaussian_matrix(rng, n, n).to_na();
    let qr = g.qr();
    let mut q: DMatrix<f64> = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    RealMatrix::from_na(&q)
}

/// `Oᵀ diag(z_i²) O` with `O` Haar and `z_i` standard normal.
fn random_psd(rng: &mut ChaCha20Rng, n: usize) -> RealMatrix {
    let o = haar_orthogonal(rng, n);
    let d: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            z * z
        })
        .collect();
    let s = o.transpose().matmul(&RealMatrix::from_diagonal(&d)).unwrap().matmul(&o).unwrap();
    s.symmetric_part().unwrap()
}

/// Random monotone two-player matrix game `[[S1, A], [−Aᵀ, S2]]`.
pub fn random_monotone_game(d1: usize, d2: usize, seed: u64) -> Result<GameProblem> {
    random_monotone_game_stream(d1, d2, seed, 0)
}

/// As [`random_monotone_game`], drawing from substream `stream` of `seed`.
pub fn random_monotone_game_stream(d1: usize, d2: usize, seed: u64, stream: u64) -> Result<GameProblem> {
    if d1 == 0 || d2 == 0 {
        return Err(Error::Domain("player dimensions must be positive".into()));
    }
    let mut rng = seeded_rng(seed, stream);
    let s1 = random_psd(&mut rng, d1);
    let s2 = random_psd(&mut rng, d2);
    let a = gaussian_matrix(&mut rng, d1, d2);
    let j = RealMatrix::from_blocks(&s1, &a, &a.transpose().scale(-1.0), &s2)?;
    let prov = Provenance::new(
        "random_monotone",
        json!({ "d1": d1, "d2": d2, "stream": stream, "chi2_dof": 1, "rng": "chacha20" }),
        Some(seed),
    );
    GameProblem::new(AffineVectorField::linear(j)?, d1, d2, Some(vec![0.0; d1 + d2]), prov)
}

/// Bilinear game with i.i.d. standard normal `A` (`m × p`); offsets are
/// Gaussian when `with_offset` is set, zero otherwise.
pub fn random_bilinear_game(m: usize, p: usize, seed: u64, with_offset: bool) -> Result<GameProblem> {
    if m == 0 || p == 0 {
        return Err(Error::Domain("player dimensions must be positive".into()));
    }
    let mut rng = seeded_rng(seed, 0);
    let a = gaussian_matrix(&mut rng, m, p);
    let (b, c) = if with_offset {
        let b: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let c: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        (b, c)
    } else {
        (vec![0.0; m], vec![0.0; p])
    };
    let mut g = bilinear_game(&a, &b, &c)?;
    g.provenance = Provenance::new(
        "random_bilinear",
        json!({ "m": m, "p": p, "with_offset": with_offset, "rng": "chacha20" }),
        Some(seed),
    );
    Ok(g)
}

/// Bilinear game whose matrix is Haar orthogonal, so every singular value is one.
pub fn orthogonal_bilinear_game(m: usize, seed: u64) -> Result<GameProblem> {
    let mut rng = seeded_rng(seed, 0);
    let a = haar_orthogonal(&mut rng, m);
    let mut g = bilinear_game(&a, &vec![0.0; m], &vec![0.0; m])?;
    g.provenance = Provenance::new("orthogonal_bilinear", json!({ "m": m, "rng": "chacha20" }), Some(seed));
    Ok(g)
}
