//! CCP margin stack: initial margin, stressed loss over IM, Cover-2 default
//! fund, its allocation across members, and default thresholds.

use serde::{Deserialize, Serialize};

use crate::elliptical::{FactorModel, LatentLaw};
use crate::error::{Error, Result};

/// A clearing member. `lambda` is a default intensity per year, `nom` the
/// signed size of its CCP portfolio and `sigma` its annual volatility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemberSpec {
    pub id: usize,
    pub lambda: f64,
    pub nom: f64,
    pub sigma: f64,
}

impl MemberSpec {
    /// Builds a member from table units: intensity in basis points and
    /// volatility in percent.
    pub fn from_table(id: usize, lambda_bps: f64, size: f64, vol_pct: f64) -> Result<Self> {
        let spec = Self { id, lambda: lambda_bps * 1e-4, nom: size, sigma: vol_pct * 1e-2 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("member {}: sigma must be > 0", self.id)));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("member {}: lambda must be >= 0", self.id)));
        }
        if !self.nom.is_finite() {
            return Err(Error::InvalidParameter(format!("member {}: nominal must be finite", self.id)));
        }
        Ok(())
    }

    /// `DP(T) = 1 - exp(-lambda T)`.
    pub fn default_probability(&self, horizon: f64) -> f64 {
        -(-self.lambda * horizon).exp_m1()
    }
}

/// IM and SLOIM quantile levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginSpec {
    pub alpha_im: f64,
    pub alpha_stress: f64,
}

impl MarginSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.5 < self.alpha_im && self.alpha_im < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha_im = {} outside (1/2, 1)", self.alpha_im)));
        }
        if !(self.alpha_im < self.alpha_stress && self.alpha_stress < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha_stress = {} must lie in (alpha_im, 1)",
                self.alpha_stress
            )));
        }
        Ok(())
    }
}

/// How the Cover-2 amount is split across members.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DfAllocation {
    /// `DF_i = SLOIM_i / sum SLOIM * Cover2`.
    #[default]
    Sloim,
    /// `DF_i = IM_i / sum IM * Cover2`.
    Im,
}

/// Margins, default fund and thresholds of every member. Does not depend on
/// correlations, so one setup serves a whole sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClearingSetup {
    pub members: Vec<MemberSpec>,
    pub im: Vec<f64>,
    pub sloim: Vec<f64>,
    pub df: Vec<f64>,
    pub cover2: f64,
    /// `B_i = F^{-1}(1 - DP_i(T))`; `+inf` for a member that cannot default.
    pub thresholds: Vec<f64>,
    pub default_prob: Vec<f64>,
}

impl ClearingSetup {
    pub fn n_members(&self) -> usize {
        self.members.len()
    }

    /// Collateral `m_i = IM_i + DF_i`.
    pub fn collateral(&self) -> Vec<f64> {
        self.im.iter().zip(&self.df).map(|(a, b)| a + b).collect()
    }

    /// `beta_j = DF_j / DF_ref` for every member, the reference included.
    pub fn betas(&self, reference: usize) -> Result<Vec<f64>> {
        let df_ref =
            *self.df.get(reference).ok_or_else(|| Error::DimensionMismatch(format!("no member {reference}")))?;
        if !(df_ref > 0.0) {
            return Err(Error::ZeroReferenceDefaultFund(reference));
        }
        Ok(self.df.iter().map(|d| d / df_ref).collect())
    }

    /// Default probability of the reference member, `gamma = DP_ref(T)`.
    pub fn survival_gamma(&self, reference: usize) -> f64 {
        self.default_prob[reference]
    }

    pub fn total_im(&self) -> f64 {
        self.im.iter().sum()
    }

    pub fn total_df(&self) -> f64 {
        self.df.iter().sum()
    }
}

fn law_quantile(law: LatentLaw, p: f64) -> Result<f64> {
    let q = law.quantile(p);
    if q.is_finite() {
        Ok(q)
    } else {
        Err(Error::InvalidParameter(format!("quantile at level {p} is not finite")))
    }
}

fn margin_scale(member: &MemberSpec, model: &FactorModel) -> f64 {
    member.nom.abs() * member.sigma * model.delta_s.sqrt()
}

/// `IM = |nom| sigma sqrt(delta_s) F^{-1}(alpha)`.
pub fn compute_im(member: &MemberSpec, margin: &MarginSpec, model: &FactorModel) -> Result<f64> {
    if !(0.5 < margin.alpha_im && margin.alpha_im < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha_im = {} outside (1/2, 1)", margin.alpha_im)));
    }
    Ok(margin_scale(member, model) * law_quantile(model.law, margin.alpha_im)?)
}

/// `SLOIM = |nom| sigma sqrt(delta_s) (F^{-1}(alpha') - F^{-1}(alpha))`.
pub fn compute_sloim(member: &MemberSpec, margin: &MarginSpec, model: &FactorModel) -> Result<f64> {
    margin.validate()?;
    let spread = law_quantile(model.law, margin.alpha_stress)? - law_quantile(model.law, margin.alpha_im)?;
    Ok(margin_scale(member, model) * spread)
}

/// Cover-2 (sum of the two largest SLOIMs) and its split proportional to
/// `basis`. Returns `(cover2, df)`.
pub fn allocate_default_fund(sloim: &[f64], basis: &[f64]) -> Result<(f64, Vec<f64>)> {
    if sloim.len() < 2 {
        return Err(Error::AllocationUndefined("cover-2 needs at least two members".into()));
    }
    if basis.len() != sloim.len() {
        return Err(Error::DimensionMismatch("allocation basis length".into()));
    }
    let mut sorted = sloim.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let cover2 = sorted[0] + sorted[1];
    let total: f64 = basis.iter().sum();
    if !(total > 0.0) {
        return Err(Error::AllocationUndefined("allocation basis sums to zero".into()));
    }
    Ok((cover2, basis.iter().map(|b| b / total * cover2).collect()))
}

/// Default threshold `B = F^{-1}(1 - DP(T))`.
pub fn default_threshold(member: &MemberSpec, model: &FactorModel) -> f64 {
    // 1 - DP = exp(-lambda T), computed directly to keep precision
    model.law.quantile((-member.lambda * model.horizon).exp())
}

pub fn compute_cover2_and_df(
    members: &[MemberSpec],
    margin: &MarginSpec,
    model: &FactorModel,
    rule: DfAllocation,
) -> Result<ClearingSetup> {
    margin.validate()?;
    for m in members {
        m.validate()?;
    }
    let im = members.iter().map(|m| compute_im(m, margin, model)).collect::<Result<Vec<_>>>()?;
    let sloim = members.iter().map(|m| compute_sloim(m, margin, model)).collect::<Result<Vec<_>>>()?;
    let basis = match rule {
        DfAllocation::Sloim => &sloim,
        DfAllocation::Im => &im,
    };
    let (cover2, df) = allocate_default_fund(&sloim, basis)?;
    Ok(ClearingSetup {
        members: members.to_vec(),
        im,
        sloim,
        df,
        cover2,
        thresholds: members.iter().map(|m| default_threshold(m, model)).collect(),
        default_prob: members.iter().map(|m| m.default_probability(model.horizon)).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClearingCheck {
    pub net: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Sizes must net to zero within `1e-9 * max|nom|`.
pub fn check_clearing_condition(members: &[MemberSpec]) -> ClearingCheck {
    let net: f64 = members.iter().map(|m| m.nom).sum();
    let tolerance = 1e-9 * members.iter().map(|m| m.nom.abs()).fold(0.0, f64::max);
    ClearingCheck { net, tolerance, pass: net.abs() <= tolerance }
}
