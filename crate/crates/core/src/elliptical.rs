//! Elliptical factor model for latent credit variables and exposure drivers.
//!
//! Each member `i` carries a latent credit variable `X_i` and an exposure
//! driver `Y_i`, both Student-t via the normal variance mixture
//!
//! ```text
//! Y_i = nom_i sigma_i sqrt(dl) sqrt(K) ( sqrt(r_mkt) E + sqrt(r_wwr) W_i + sqrt(1 - r_mkt - r_wwr) E_i )
//! X_i =                        sqrt(K) ( sqrt(r_cr)  T + sgn(nom_i) sqrt(r_wwr) W_i + sqrt(1 - r_cr - r_wwr) T_i )
//! ```
//!
//! with `K = nu / chi2_nu` and all other drivers i.i.d. standard normal.
//! The Gaussian law is the `K = 1` case.
//!
//! Sampling is split in two stages: [`FactorDraws`] holds the raw normal and
//! mixing draws of one batch, and [`FactorDraws::load`] applies the
//! correlation loadings. Reusing the same draws across correlation cells gives
//! common random numbers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ccp::MemberSpec;
use crate::error::{Error, Result};
use crate::rng::Substream;
use crate::special;

/// Slack on the strict correlation inequalities, so that grid values such as
/// `0.45 + 0.55` never pass as valid through rounding.
pub const VALIDITY_MARGIN: f64 = 1e-12;

/// Relative tolerance on the smallest eigenvalue of a covariance matrix.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Marginal law of the latent variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentLaw {
    StudentT { nu: f64 },
    Gaussian,
}

impl LatentLaw {
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            LatentLaw::StudentT { nu } => special::student_t_cdf(nu, x),
            LatentLaw::Gaussian => special::normal_cdf(x),
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        match *self {
            LatentLaw::StudentT { nu } => special::student_t_quantile(nu, p),
            LatentLaw::Gaussian => special::normal_quantile(p),
        }
    }

    /// `E[K]`, the variance of a unit-dispersion marginal.
    pub fn variance(&self) -> f64 {
        match *self {
            LatentLaw::StudentT { nu } => nu / (nu - 2.0),
            LatentLaw::Gaussian => 1.0,
        }
    }

    /// Draws `sqrt(K)`.
    pub fn draw_scale<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            LatentLaw::StudentT { nu } => {
                let chi2: f64 = ChiSquared::new(nu).expect("nu validated positive").sample(rng);
                (nu / chi2).sqrt()
            }
            LatentLaw::Gaussian => 1.0,
        }
    }
}

/// Correlations, tail law and horizons of the factor model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorModel {
    pub rho_cr: f64,
    pub rho_mkt: f64,
    pub rho_wwr: f64,
    pub law: LatentLaw,
    /// Margin period of risk, year fraction.
    pub delta_s: f64,
    /// Liquidation period, year fraction.
    pub delta_l: f64,
    /// Horizon in years.
    pub horizon: f64,
}

impl FactorModel {
    pub fn with_correlations(&self, rho_cr: f64, rho_wwr: f64) -> Self {
        Self { rho_cr, rho_wwr, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "snake_case")]
pub enum ValidityVerdict {
    Valid,
    Invalid(String),
}

impl ValidityVerdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, ValidityVerdict::Valid)
    }
}

pub fn validate_model(m: &FactorModel) -> ValidityVerdict {
    let invalid = |s: String| ValidityVerdict::Invalid(s);
    for (name, value) in [("rho_cr", m.rho_cr), ("rho_mkt", m.rho_mkt), ("rho_wwr", m.rho_wwr)] {
        if !(0.0..1.0).contains(&value) {
            return invalid(format!("{name} = {value} outside [0, 1)"));
        }
    }
    if m.rho_wwr <= 0.0 {
        return invalid("rho_wwr must be strictly positive".into());
    }
    if m.rho_cr + m.rho_wwr >= 1.0 - VALIDITY_MARGIN {
        return invalid(format!("rho_cr + rho_wwr = {} >= 1", m.rho_cr + m.rho_wwr));
    }
    if m.rho_mkt + m.rho_wwr >= 1.0 - VALIDITY_MARGIN {
        return invalid(format!("rho_mkt + rho_wwr = {} >= 1", m.rho_mkt + m.rho_wwr));
    }
    if let LatentLaw::StudentT { nu } = m.law {
        if !(nu > 2.0) || !nu.is_finite() {
            return invalid(format!("nu = {nu} must be finite and > 2"));
        }
    }
    if !(m.delta_s > 0.0 && m.delta_s < m.delta_l && m.delta_l < m.horizon && m.horizon.is_finite()) {
        return invalid(format!(
            "need 0 < delta_s < delta_l < horizon, got {} / {} / {}",
            m.delta_s, m.delta_l, m.horizon
        ));
    }
    ValidityVerdict::Valid
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x == 0.0 {
        0.0
    } else {
        -1.0
    }
}

/// Raw draws of one batch: `sqrt(K)`, the common normals `(T, E)` and the
/// per-member normals `(T_i, E_i, W_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorDraws {
    n_members: usize,
    scale: Vec<f64>,
    common: Vec<[f64; 2]>,
    idio: Vec<[f64; 3]>,
}

impl FactorDraws {
    /// Draws `n_paths` paths from `stream`. Per path the order is
    /// `K, T, E, (T_0, E_0, W_0), ..., (T_n, E_n, W_n)`.
    pub fn generate(law: LatentLaw, n_members: usize, n_paths: usize, stream: Substream) -> Self {
        let mut rng = stream.rng();
        let mut scale = Vec::with_capacity(n_paths);
        let mut common = Vec::with_capacity(n_paths);
        let mut idio = Vec::with_capacity(n_paths * n_members);
        for _ in 0..n_paths {
            scale.push(law.draw_scale(&mut rng));
            common.push([rng.sample(StandardNormal), rng.sample(StandardNormal)]);
            for _ in 0..n_members {
                idio.push([rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)]);
            }
        }
        Self { n_members, scale, common, idio }
    }

    pub fn n_paths(&self) -> usize {
        self.scale.len()
    }

    pub fn n_members(&self) -> usize {
        self.n_members
    }

    /// SHA-256 over every raw draw, little-endian.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for p in 0..self.n_paths() {
            h.update(self.scale[p].to_le_bytes());
            for v in self.common[p] {
                h.update(v.to_le_bytes());
            }
            for d in &self.idio[p * self.n_members..(p + 1) * self.n_members] {
                for v in d {
                    h.update(v.to_le_bytes());
                }
            }
        }
        hex::encode(h.finalize())
    }

    /// Applies the model loadings. The model is assumed validated.
    pub fn load(&self, model: &FactorModel, members: &[MemberSpec]) -> Result<ScenarioBatch> {
        if members.len() != self.n_members {
            return Err(Error::DimensionMismatch(format!(
                "draws for {} members, universe has {}",
                self.n_members,
                members.len()
            )));
        }
        let m = self.n_members;
        let a_cr = model.rho_cr.sqrt();
        let a_wwr = model.rho_wwr.sqrt();
        let a_xi = (1.0 - model.rho_cr - model.rho_wwr).sqrt();
        let a_mkt = model.rho_mkt.sqrt();
        let a_yi = (1.0 - model.rho_mkt - model.rho_wwr).sqrt();
        let wwr_sign: Vec<f64> = members.iter().map(|s| sgn(s.nom) * a_wwr).collect();
        let y_scale: Vec<f64> = members.iter().map(|s| s.nom * s.sigma * model.delta_l.sqrt()).collect();

        let n = self.n_paths();
        let mut x = Vec::with_capacity(n * m);
        let mut y = Vec::with_capacity(n * m);
        for p in 0..n {
            let k = self.scale[p];
            let [t, e] = self.common[p];
            let ct = a_cr * t;
            let ce = a_mkt * e;
            for (i, &[ti, ei, wi]) in self.idio[p * m..(p + 1) * m].iter().enumerate() {
                x.push(k * (ct + wwr_sign[i] * wi + a_xi * ti));
                y.push(y_scale[i] * k * (ce + a_wwr * wi + a_yi * ei));
            }
        }
        Ok(ScenarioBatch { n_members: m, x, y, mixing_k: self.scale.iter().map(|s| s * s).collect() })
    }
}

/// One path of the factor model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorSample<'a> {
    /// Latent credit values `X_0..X_n`.
    pub x: &'a [f64],
    /// Exposure drivers `Y_0..Y_n` (currency). `Y_0` of the reference member
    /// is sampled too so that any member can play that role.
    pub y: &'a [f64],
    pub mixing_k: f64,
}

/// Sampled paths, row-major `paths x members`. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioBatch {
    n_members: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    mixing_k: Vec<f64>,
}

impl ScenarioBatch {
    /// Builds a batch from explicit row-major values, e.g. hand-made
    /// scenarios in tests.
    pub fn from_parts(n_members: usize, x: Vec<f64>, y: Vec<f64>, mixing_k: Vec<f64>) -> Result<Self> {
        let n = mixing_k.len();
        if x.len() != n * n_members || y.len() != n * n_members {
            return Err(Error::DimensionMismatch(format!(
                "{n} paths x {n_members} members, got {} x values and {} y values",
                x.len(),
                y.len()
            )));
        }
        Ok(Self { n_members, x, y, mixing_k })
    }

    pub fn n_paths(&self) -> usize {
        self.mixing_k.len()
    }

    pub fn n_members(&self) -> usize {
        self.n_members
    }

    pub fn sample(&self, path: usize) -> FactorSample<'_> {
        let r = path * self.n_members..(path + 1) * self.n_members;
        FactorSample { x: &self.x[r.clone()], y: &self.y[r], mixing_k: self.mixing_k[path] }
    }

    pub fn paths(&self) -> impl Iterator<Item = FactorSample<'_>> + '_ {
        (0..self.n_paths()).map(|p| self.sample(p))
    }

    pub fn x_column(&self, member: usize) -> Vec<f64> {
        self.x.iter().skip(member).step_by(self.n_members).copied().collect()
    }

    pub fn y_column(&self, member: usize) -> Vec<f64> {
        self.y.iter().skip(member).step_by(self.n_members).copied().collect()
    }

    pub fn mixing_k(&self) -> &[f64] {
        &self.mixing_k
    }
}

/// Samples one batch of `n_paths` paths from `stream`.
pub fn sample_batch(
    model: &FactorModel,
    members: &[MemberSpec],
    n_paths: usize,
    stream: Substream,
) -> Result<ScenarioBatch> {
    if let ValidityVerdict::Invalid(reason) = validate_model(model) {
        return Err(Error::InvalidModel(reason));
    }
    if members.is_empty() {
        return Err(Error::EmptyUniverse);
    }
    if n_paths == 0 {
        return Err(Error::InvalidParameter("n_paths must be >= 1".into()));
    }
    FactorDraws::generate(model.law, members.len(), n_paths, stream).load(model, members)
}

/// Location vector and dispersion (covariance) matrix of an elliptical law.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticalParams {
    pub mu: DVector<f64>,
    pub gamma: DMatrix<f64>,
}

impl EllipticalParams {
    /// Checks symmetry and positive semi-definiteness. Eigenvalues in
    /// `(-tol, 0)` with `tol = 1e-10 * max|eigenvalue|` are clamped to 0.
    pub fn new(mu: DVector<f64>, gamma: DMatrix<f64>) -> Result<Self> {
        let d = mu.len();
        if gamma.nrows() != d || gamma.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "mu has {d} entries, gamma is {}x{}",
                gamma.nrows(),
                gamma.ncols()
            )));
        }
        let scale = gamma.amax().max(f64::MIN_POSITIVE);
        for i in 0..d {
            for j in 0..i {
                if (gamma[(i, j)] - gamma[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::NotPositiveSemiDefinite(format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        if d == 0 {
            return Ok(Self { mu, gamma });
        }
        let eig = SymmetricEigen::new(gamma.clone());
        let top = eig.eigenvalues.amax();
        let tol = PSD_TOLERANCE * top.max(f64::MIN_POSITIVE);
        let min = eig.eigenvalues.min();
        if min < -tol {
            return Err(Error::NotPositiveSemiDefinite(format!("smallest eigenvalue {min:e}")));
        }
        let gamma = if min < 0.0 {
            let clamped = eig.eigenvalues.map(|v| v.max(0.0));
            &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose()
        } else {
            gamma
        };
        Ok(Self { mu, gamma })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// Parameters of the remaining coordinates given coordinate `index0 = x0`:
///
/// ```text
/// mu_|0    = mu + (x0 - mu_0) / G_00 * g
/// Gamma_|0 = Gamma_rest - g g^T / G_00
/// ```
///
/// where `g` is the column of covariances with the conditioning coordinate.
pub fn conditional_params(joint: &EllipticalParams, index0: usize, x0: f64) -> Result<EllipticalParams> {
    let d = joint.dim();
    if index0 >= d {
        return Err(Error::DimensionMismatch(format!("index {index0} out of {d} coordinates")));
    }
    let g00 = joint.gamma[(index0, index0)];
    if !(g00 > 0.0) {
        return Err(Error::DegenerateConditioning(g00));
    }
    let rest: Vec<usize> = (0..d).filter(|&i| i != index0).collect();
    let g = DVector::from_iterator(rest.len(), rest.iter().map(|&i| joint.gamma[(i, index0)]));
    let shift = (x0 - joint.mu[index0]) / g00;
    let mu = DVector::from_iterator(rest.len(), rest.iter().map(|&i| joint.mu[i])) + &g * shift;
    let base = DMatrix::from_fn(rest.len(), rest.len(), |a, b| joint.gamma[(rest[a], rest[b])]);
    let mut gamma = base - (&g * g.transpose()) / g00;
    // keep exact symmetry
    for a in 0..rest.len() {
        for b in 0..a {
            let v = 0.5 * (gamma[(a, b)] + gamma[(b, a)]);
            gamma[(a, b)] = v;
            gamma[(b, a)] = v;
        }
    }
    EllipticalParams::new(mu, gamma)
}
