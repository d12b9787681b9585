//! JSON run configurations for CCP and CDO sweeps.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ccp::{DfAllocation, MarginSpec, MemberSpec};
use crate::cdo::{max_loss, ObligorSpec, TrancheSpec};
use crate::elliptical::{FactorModel, LatentLaw};
use crate::error::{Error, Result};
use crate::risk::{EstimateMode, SurvivalNormalization};

/// Inclusive range `start, start + step, ..., stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridRange {
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !self.start.is_finite() || !self.stop.is_finite() || self.stop < self.start {
            return Err(Error::Config(format!(
                "grid {}..{} step {} needs step > 0 and start <= stop",
                self.start, self.stop, self.step
            )));
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        // round to 12 decimals so 0.05 * 3 reads back as 0.15
        Ok((0..n).map(|k| ((self.start + k as f64 * self.step) * 1e12).round() / 1e12).collect())
    }
}

/// Tail parameter; `null` selects the Gaussian law.
fn law_from(nu: Option<f64>) -> LatentLaw {
    match nu {
        Some(nu) => LatentLaw::StudentT { nu },
        None => LatentLaw::Gaussian,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub nu: Option<f64>,
    pub rho_mkt: f64,
    pub delta_s_days: f64,
    pub delta_l_days: f64,
    #[serde(default = "default_days_per_year")]
    pub days_per_year: f64,
    pub horizon: f64,
}

fn default_days_per_year() -> f64 {
    252.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberRow {
    pub id: usize,
    pub lambda_bps: f64,
    pub size: f64,
    pub vol_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationGrid {
    pub rho_cr: GridRange,
    pub rho_wwr: GridRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub grid: CorrelationGrid,
    pub members: Vec<MemberRow>,
    pub margin: MarginSpec,
    #[serde(default)]
    pub df_allocation: DfAllocation,
    pub alpha_ec: f64,
    pub n_paths: usize,
    pub n_batches: usize,
    pub seed: u64,
    pub reference_members: Vec<usize>,
    #[serde(default)]
    pub estimate_mode: EstimateMode,
    #[serde(default)]
    pub normalization: SurvivalNormalization,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str, path: &Path) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// sha256 of the canonical JSON form.
pub fn content_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config types serialize");
    hex::encode(Sha256::digest(bytes))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = parse(&read(path)?, path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, range) in [("rho_cr", self.grid.rho_cr), ("rho_wwr", self.grid.rho_wwr)] {
            let values = range.values()?;
            if values.iter().any(|v| !(0.0..1.0).contains(v)) {
                return Err(Error::Config(format!("{name} grid must lie within [0, 1)")));
            }
        }
        if !(self.n_batches >= 2 && self.n_paths >= self.n_batches) {
            return Err(Error::Config(format!(
                "need n_paths >= n_batches >= 2, got {} paths in {} batches",
                self.n_paths, self.n_batches
            )));
        }
        if !(0.0 < self.alpha_ec && self.alpha_ec < 1.0) {
            return Err(Error::Config(format!("alpha_ec = {} outside (0, 1)", self.alpha_ec)));
        }
        self.margin.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.members.len() < 2 {
            return Err(Error::Config("need at least two members".into()));
        }
        for (k, m) in self.members.iter().enumerate() {
            if m.id != k {
                return Err(Error::Config(format!("member ids must be 0..n in order, found {} at row {k}", m.id)));
            }
        }
        if self.reference_members.is_empty() {
            return Err(Error::Config("no reference members".into()));
        }
        if let Some(r) = self.reference_members.iter().find(|&&r| r >= self.members.len()) {
            return Err(Error::Config(format!("reference member {r} not in the member table")));
        }
        if self.model.days_per_year <= 0.0 {
            return Err(Error::Config("days_per_year must be > 0".into()));
        }
        Ok(())
    }

    /// The factor model at the first grid cell; cells override the two
    /// swept correlations.
    pub fn factor_model(&self) -> FactorModel {
        let m = &self.model;
        FactorModel {
            rho_cr: self.grid.rho_cr.start,
            rho_mkt: m.rho_mkt,
            rho_wwr: self.grid.rho_wwr.start,
            law: law_from(m.nu),
            delta_s: m.delta_s_days / m.days_per_year,
            delta_l: m.delta_l_days / m.days_per_year,
            horizon: m.horizon,
        }
    }

    pub fn member_specs(&self) -> Result<Vec<MemberSpec>> {
        self.members.iter().map(|r| MemberSpec::from_table(r.id, r.lambda_bps, r.size, r.vol_pct)).collect()
    }

    pub fn hash(&self) -> String {
        content_hash(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObligorRow {
    pub notional: f64,
    pub recovery_pct: f64,
    pub lambda_pct: f64,
}

/// Tranche grids as fractions of `L_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrancheGrid {
    #[serde(default)]
    pub equity_detachments: Option<GridRange>,
    #[serde(default)]
    pub senior_attachments: Option<GridRange>,
    /// `[A, B]` pairs.
    #[serde(default)]
    pub mezzanine: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CdoRunConfig {
    pub nu: Option<f64>,
    pub obligors: Vec<ObligorRow>,
    pub rho_grid: GridRange,
    pub tranches: TrancheGrid,
    pub spread: f64,
    pub n_coupons: usize,
    pub maturity: f64,
    pub n_paths: usize,
    pub n_batches: usize,
    pub seed: u64,
}

impl CdoRunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = parse(&read(path)?, path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.obligors.is_empty() {
            return Err(Error::Config("no obligors".into()));
        }
        if self.rho_grid.values()?.iter().any(|v| !(0.0..1.0).contains(v)) {
            return Err(Error::Config("rho grid must lie within [0, 1)".into()));
        }
        if !(self.n_batches >= 2 && self.n_paths >= self.n_batches) {
            return Err(Error::Config(format!(
                "need n_paths >= n_batches >= 2, got {} paths in {} batches",
                self.n_paths, self.n_batches
            )));
        }
        for o in self.obligor_specs() {
            o.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        self.tranche_specs().map(|_| ())
    }

    pub fn law(&self) -> LatentLaw {
        law_from(self.nu)
    }

    pub fn obligor_specs(&self) -> Vec<ObligorSpec> {
        self.obligors
            .iter()
            .map(|o| ObligorSpec {
                notional: o.notional,
                recovery: o.recovery_pct / 100.0,
                lambda: o.lambda_pct / 100.0,
            })
            .collect()
    }

    /// Tranches in currency: equities, then seniors, then mezzanines.
    pub fn tranche_specs(&self) -> Result<Vec<TrancheSpec>> {
        let l_max = max_loss(&self.obligor_specs());
        let (s, k, t) = (self.spread, self.n_coupons, self.maturity);
        let mut out = Vec::new();
        if let Some(r) = self.tranches.equity_detachments {
            out.extend(r.values()?.into_iter().map(|b| TrancheSpec::equity(b * l_max, s, k, t)));
        }
        if let Some(r) = self.tranches.senior_attachments {
            out.extend(r.values()?.into_iter().map(|a| TrancheSpec::senior(a * l_max, l_max, s, k, t)));
        }
        out.extend(self.tranches.mezzanine.iter().map(|[a, b]| TrancheSpec::mezzanine(a * l_max, b * l_max, s, k, t)));
        if out.is_empty() {
            return Err(Error::Config("no tranches".into()));
        }
        for tr in &out {
            tr.validate(l_max).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(out)
    }

    pub fn hash(&self) -> String {
        content_hash(self)
    }
}
