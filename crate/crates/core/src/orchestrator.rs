//! Correlation-grid sweeps on common random numbers and their monotonicity
//! audit.
//!
//! The raw draws of batch `b` come from substream `(seed, b)` and are shared
//! by every cell; only the loadings change between cells. Margins, default
//! fund and thresholds do not depend on correlations and are computed once.

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::ccp::{compute_cover2_and_df, ClearingSetup};
use crate::cdo::{correlation_sweep, CdoSweepResult, CdoSweepSpec};
use crate::config::{CdoRunConfig, RunConfig};
use crate::elliptical::{validate_model, FactorDraws, FactorModel, ValidityVerdict};
use crate::error::{Error, Result};
use crate::loss::member_loss;
use crate::risk::{BatchLosses, RiskEstimate, RiskReport};
use crate::rng::{batch_sizes, StreamDomain, Substream};

/// Caps rayon parallelism when set to a positive integer.
pub const THREADS_ENV: &str = "COVLOSS_THREADS";

/// Runs `f` on a pool sized by [`THREADS_ENV`], or on the global pool.
pub fn with_thread_limit<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    let limit = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0);
    match limit.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub rho_cr: f64,
    pub rho_wwr: f64,
    pub verdict: ValidityVerdict,
    /// One report per reference member, in config order. Empty when invalid.
    pub reports: Vec<RiskReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub config_hash: String,
    pub seed: u64,
    pub n_paths: usize,
    pub n_batches: usize,
    /// sha256 over the raw draws of every batch; equal across cells by
    /// construction.
    pub draws_hash: String,
    pub reference_members: Vec<usize>,
    pub rho_cr_grid: Vec<f64>,
    pub rho_wwr_grid: Vec<f64>,
    pub setup: ClearingSetup,
    /// Row-major over `rho_cr` then `rho_wwr`.
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn cell(&self, i_cr: usize, i_wwr: usize) -> &SweepCell {
        &self.cells[i_cr * self.rho_wwr_grid.len() + i_wwr]
    }
}

fn generate_draws(model: &FactorModel, n_members: usize, cfg: &RunConfig) -> Vec<FactorDraws> {
    batch_sizes(cfg.n_paths, cfg.n_batches)
        .into_par_iter()
        .enumerate()
        .map(|(b, size)| {
            FactorDraws::generate(
                model.law,
                n_members,
                size,
                Substream::new(cfg.seed, StreamDomain::CcpFactors, b as u64),
            )
        })
        .collect()
}

fn evaluate_cell(
    model: &FactorModel,
    cfg: &RunConfig,
    setup: &ClearingSetup,
    draws: &[FactorDraws],
) -> Result<Vec<RiskReport>> {
    let refs = &cfg.reference_members;
    let mut per_ref: Vec<Vec<BatchLosses>> = vec![Vec::with_capacity(draws.len()); refs.len()];
    for d in draws {
        let batch = d.load(model, &setup.members)?;
        for (slot, &r) in per_ref.iter_mut().zip(refs) {
            let losses = member_loss(&batch, setup, r, false)?.total;
            let b = setup.thresholds[r];
            let survived = batch.paths().map(|s| s.x[r] < b).collect();
            slot.push(BatchLosses { losses, survived });
        }
    }
    refs.iter()
        .zip(&per_ref)
        .map(|(&r, batches)| {
            RiskReport::from_batches(
                r,
                batches,
                setup.survival_gamma(r),
                cfg.alpha_ec,
                cfg.estimate_mode,
                cfg.normalization,
            )
        })
        .collect()
}

/// Runs every cell of the configured grid. Invalid cells are kept with
/// their reason and no reports.
pub fn run_sweep(cfg: &RunConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let base = cfg.factor_model();
    let members = cfg.member_specs()?;
    let setup = compute_cover2_and_df(&members, &cfg.margin, &base, cfg.df_allocation)?;
    let rho_cr_grid = cfg.grid.rho_cr.values()?;
    let rho_wwr_grid = cfg.grid.rho_wwr.values()?;
    let cells: Vec<(f64, f64, ValidityVerdict)> = rho_cr_grid
        .iter()
        .flat_map(|&c| rho_wwr_grid.iter().map(move |&w| (c, w)))
        .map(|(c, w)| (c, w, validate_model(&base.with_correlations(c, w))))
        .collect();
    if !cells.iter().any(|c| c.2.is_valid()) {
        return Err(Error::AllCellsInvalid);
    }

    with_thread_limit(|| {
        let draws = generate_draws(&base, members.len(), cfg);
        let mut h = Sha256::new();
        for d in &draws {
            h.update(d.checksum().as_bytes());
        }
        let draws_hash = hex::encode(h.finalize());

        let cells = cells
            .into_par_iter()
            .map(|(rho_cr, rho_wwr, verdict)| {
                let reports = if verdict.is_valid() {
                    evaluate_cell(&base.with_correlations(rho_cr, rho_wwr), cfg, &setup, &draws)?
                } else {
                    Vec::new()
                };
                Ok(SweepCell { rho_cr, rho_wwr, verdict, reports })
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(SweepResult {
            config_hash: cfg.hash(),
            seed: cfg.seed,
            n_paths: cfg.n_paths,
            n_batches: cfg.n_batches,
            draws_hash,
            reference_members: cfg.reference_members.clone(),
            rho_cr_grid,
            rho_wwr_grid,
            setup,
            cells,
        })
    })
}

/// Risk reports at a single `(rho_cr, rho_wwr)` cell.
pub fn risk_report(cfg: &RunConfig, rho_cr: f64, rho_wwr: f64) -> Result<Vec<RiskReport>> {
    cfg.validate()?;
    let model = cfg.factor_model().with_correlations(rho_cr, rho_wwr);
    if let ValidityVerdict::Invalid(reason) = validate_model(&model) {
        return Err(Error::InvalidModel(reason));
    }
    let members = cfg.member_specs()?;
    let setup = compute_cover2_and_df(&members, &cfg.margin, &model, cfg.df_allocation)?;
    with_thread_limit(|| {
        let draws = generate_draws(&model, members.len(), cfg);
        evaluate_cell(&model, cfg, &setup, &draws)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    RhoCr,
    RhoWwr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Cecl,
    Ec,
    EcMinusCecl,
}

impl Metric {
    fn of_estimate(self, e: &RiskEstimate) -> f64 {
        match self {
            Metric::Cecl => e.cecl,
            Metric::Ec => e.ec,
            Metric::EcMinusCecl => e.ec_minus_cecl(),
        }
    }

    fn of_report(self, r: &RiskReport) -> (f64, f64) {
        match self {
            Metric::Cecl => (r.cecl, r.cecl_se),
            Metric::Ec => (r.ec, r.ec_se),
            Metric::EcMinusCecl => (r.ec_minus_cecl, r.ec_minus_cecl_se),
        }
    }
}

/// One axis-adjacent pair of valid cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairIncrement {
    /// `(rho_cr, rho_wwr)` of the lower and higher cell.
    pub from: (f64, f64),
    pub to: (f64, f64),
    /// `metric(to) - metric(from)`.
    pub increment: f64,
    pub stderr: f64,
    /// Whether `stderr` comes from per-batch paired differences, as opposed
    /// to `sqrt(se_from^2 + se_to^2)`.
    pub paired: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityEntry {
    pub member: usize,
    pub axis: Axis,
    pub metric: Metric,
    pub n_pairs: usize,
    pub min_increment: f64,
    pub min_increment_stderr: f64,
    /// Pair with the smallest `increment + k_sigma * stderr`; decides the
    /// verdict.
    pub worst: PairIncrement,
    pub pass: bool,
    pub pairs: Vec<PairIncrement>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub config_hash: String,
    pub k_sigma: f64,
    pub entries: Vec<MonotonicityEntry>,
    pub pass: bool,
}

impl MonotonicityReport {
    /// Recomputes every verdict from the stored increments and stderrs.
    pub fn audit(&self) -> bool {
        self.entries.iter().all(|e| {
            let recomputed = e.pairs.iter().all(|p| p.increment >= -self.k_sigma * p.stderr);
            recomputed == e.pass
        }) && self.pass == self.entries.iter().all(|e| e.pass)
    }
}

fn paired_stderr(a: &RiskReport, b: &RiskReport, metric: Metric) -> Option<f64> {
    if a.batches.len() != b.batches.len() || a.batches.len() < 2 {
        return None;
    }
    let diffs: Vec<f64> =
        a.batches.iter().zip(&b.batches).map(|(x, y)| metric.of_estimate(y) - metric.of_estimate(x)).collect();
    crate::risk::batch_statistics(&diffs).ok().map(|(_, se)| se)
}

fn increment(lo: &SweepCell, hi: &SweepCell, slot: usize, metric: Metric) -> PairIncrement {
    let (a, b) = (&lo.reports[slot], &hi.reports[slot]);
    let (va, sa) = metric.of_report(a);
    let (vb, sb) = metric.of_report(b);
    let paired = paired_stderr(a, b, metric);
    PairIncrement {
        from: (lo.rho_cr, lo.rho_wwr),
        to: (hi.rho_cr, hi.rho_wwr),
        increment: vb - va,
        stderr: paired.unwrap_or_else(|| (sa * sa + sb * sb).sqrt()),
        paired: paired.is_some(),
    }
}

/// Checks every axis-adjacent pair of valid cells: pass iff
/// `increment >= -k_sigma * stderr`.
pub fn check_monotonicity(sweep: &SweepResult, k_sigma: f64) -> Result<MonotonicityReport> {
    if !(k_sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("k_sigma {k_sigma} must be >= 0")));
    }
    let (n_cr, n_wwr) = (sweep.rho_cr_grid.len(), sweep.rho_wwr_grid.len());
    let mut adjacent: Vec<(Axis, &SweepCell, &SweepCell)> = Vec::new();
    for i in 0..n_cr {
        for j in 0..n_wwr {
            let here = sweep.cell(i, j);
            if !here.verdict.is_valid() {
                continue;
            }
            if i + 1 < n_cr && sweep.cell(i + 1, j).verdict.is_valid() {
                adjacent.push((Axis::RhoCr, here, sweep.cell(i + 1, j)));
            }
            if j + 1 < n_wwr && sweep.cell(i, j + 1).verdict.is_valid() {
                adjacent.push((Axis::RhoWwr, here, sweep.cell(i, j + 1)));
            }
        }
    }
    if adjacent.is_empty() {
        return Err(Error::NoComparablePairs);
    }
    let mut entries = Vec::new();
    for (slot, &member) in sweep.reference_members.iter().enumerate() {
        for axis in [Axis::RhoCr, Axis::RhoWwr] {
            for metric in [Metric::Cecl, Metric::Ec, Metric::EcMinusCecl] {
                let pairs: Vec<PairIncrement> = adjacent
                    .iter()
                    .filter(|(a, ..)| *a == axis)
                    .map(|(_, lo, hi)| increment(lo, hi, slot, metric))
                    .collect();
                if pairs.is_empty() {
                    continue;
                }
                let slack = |p: &PairIncrement| p.increment + k_sigma * p.stderr;
                let worst = pairs.iter().min_by(|a, b| slack(a).total_cmp(&slack(b))).expect("nonempty").clone();
                let min = pairs.iter().min_by(|a, b| a.increment.total_cmp(&b.increment)).expect("nonempty");
                entries.push(MonotonicityEntry {
                    member,
                    axis,
                    metric,
                    n_pairs: pairs.len(),
                    min_increment: min.increment,
                    min_increment_stderr: min.stderr,
                    pass: worst.increment >= -k_sigma * worst.stderr,
                    worst,
                    pairs,
                });
            }
        }
    }
    if entries.is_empty() {
        return Err(Error::NoComparablePairs);
    }
    let pass = entries.iter().all(|e| e.pass);
    Ok(MonotonicityReport { config_hash: sweep.config_hash.clone(), k_sigma, entries, pass })
}

/// CDO correlation sweep from a config, with its hash.
pub fn run_cdo_sweep(cfg: &CdoRunConfig, k_sigma: f64) -> Result<(String, CdoSweepResult)> {
    cfg.validate()?;
    let spec = CdoSweepSpec {
        obligors: cfg.obligor_specs(),
        law: cfg.law(),
        tranches: cfg.tranche_specs()?,
        rho_grid: cfg.rho_grid.values()?,
        n_paths: cfg.n_paths,
        n_batches: cfg.n_batches,
        seed: cfg.seed,
        k_sigma,
    };
    let result = with_thread_limit(|| correlation_sweep(&spec))?;
    Ok((cfg.hash(), result))
}
