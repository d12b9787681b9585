//! Synthetic CDO tranche legs under an equicorrelated latent model.
//!
//! Obligor `i` defaults by `t` iff `X_i >= B_i(t) = F^{-1}(exp(-lambda_i t))`
//! with `X_i = sqrt(K) (sqrt(rho) T + sqrt(1 - rho) T_i)`. The cumulative loss
//! is `L(t) = sum_i L_i 1{X_i >= B_i(t)}` with `L_i = (1 - R_i) N_i`. Coupons
//! are paid at `t_k = k T / K`, defaults settle at `T`, no discounting.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elliptical::LatentLaw;
use crate::error::{Error, Result};
use crate::risk::stable_sum;
use crate::rng::{batch_sizes, StreamDomain, Substream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObligorSpec {
    pub notional: f64,
    pub recovery: f64,
    /// Default intensity per year.
    pub lambda: f64,
}

impl ObligorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.notional >= 0.0 && self.notional.is_finite()) {
            return Err(Error::InvalidParameter(format!("notional {} must be finite and >= 0", self.notional)));
        }
        if !(0.0..=1.0).contains(&self.recovery) {
            return Err(Error::InvalidParameter(format!("recovery {} outside [0, 1]", self.recovery)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("intensity {} must be finite and >= 0", self.lambda)));
        }
        Ok(())
    }

    pub fn loss_given_default(&self) -> f64 {
        (1.0 - self.recovery) * self.notional
    }

    /// `gamma_i(t) = 1 - exp(-lambda_i t)`.
    pub fn default_probability(&self, t: f64) -> f64 {
        -(-self.lambda * t).exp_m1()
    }
}

pub fn max_loss(obligors: &[ObligorSpec]) -> f64 {
    stable_sum(obligors.iter().map(ObligorSpec::loss_given_default))
}

/// `sum_i L_i gamma_i(t)`, the copula-free expected loss.
pub fn expected_loss(obligors: &[ObligorSpec], t: f64) -> f64 {
    stable_sum(obligors.iter().map(|o| o.loss_given_default() * o.default_probability(t)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrancheKind {
    Equity,
    Senior,
    Mezzanine,
}

/// Attachment and detachment are in currency. Equity ignores `attachment`
/// (it is 0) and senior ignores `detachment` (it is `L_max`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrancheSpec {
    pub kind: TrancheKind,
    pub attachment: f64,
    pub detachment: f64,
    /// Spread per year.
    pub spread: f64,
    pub n_coupons: usize,
    pub maturity: f64,
}

impl TrancheSpec {
    pub fn equity(detachment: f64, spread: f64, n_coupons: usize, maturity: f64) -> Self {
        Self { kind: TrancheKind::Equity, attachment: 0.0, detachment, spread, n_coupons, maturity }
    }

    pub fn senior(attachment: f64, l_max: f64, spread: f64, n_coupons: usize, maturity: f64) -> Self {
        Self { kind: TrancheKind::Senior, attachment, detachment: l_max, spread, n_coupons, maturity }
    }

    pub fn mezzanine(attachment: f64, detachment: f64, spread: f64, n_coupons: usize, maturity: f64) -> Self {
        Self { kind: TrancheKind::Mezzanine, attachment, detachment, spread, n_coupons, maturity }
    }

    pub fn validate(&self, l_max: f64) -> Result<()> {
        let (a, b) = (self.attachment, self.detachment);
        let ok = match self.kind {
            TrancheKind::Equity => a == 0.0 && b > 0.0 && b <= l_max,
            TrancheKind::Senior => a >= 0.0 && a < l_max,
            TrancheKind::Mezzanine => a > 0.0 && a < b && b < l_max,
        };
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "{:?} tranche [{a}, {b}] out of bounds for L_max = {l_max}",
                self.kind
            )));
        }
        if self.n_coupons == 0 || !(self.maturity > 0.0) || !self.spread.is_finite() {
            return Err(Error::InvalidParameter("tranche needs n_coupons >= 1, maturity > 0, finite spread".into()));
        }
        Ok(())
    }

    /// Payment dates `t_k = k T / K`, `k = 1..K`.
    pub fn schedule(&self) -> Vec<f64> {
        payment_schedule(self.maturity, self.n_coupons)
    }
}

pub fn payment_schedule(maturity: f64, n_coupons: usize) -> Vec<f64> {
    (1..=n_coupons).map(|k| maturity * k as f64 / n_coupons as f64).collect()
}

/// `B_i(t_k)`, indexed `[obligor][k]`. `lambda_i = 0` gives `+inf`, so the
/// obligor never defaults.
pub fn default_thresholds(obligors: &[ObligorSpec], law: LatentLaw, schedule: &[f64]) -> Result<Vec<Vec<f64>>> {
    obligors
        .iter()
        .map(|o| {
            o.validate()?;
            Ok(schedule
                .iter()
                .map(|&t| {
                    let survival = (-o.lambda * t).exp();
                    if survival >= 1.0 {
                        f64::INFINITY
                    } else if survival <= 0.0 {
                        f64::NEG_INFINITY
                    } else {
                        law.quantile(survival)
                    }
                })
                .collect())
        })
        .collect()
}

/// Raw draws `sqrt(K)`, `T` and `T_i` of one batch, reused across `rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentDraws {
    n_obligors: usize,
    scale: Vec<f64>,
    common: Vec<f64>,
    idio: Vec<f64>,
}

impl LatentDraws {
    pub fn generate(law: LatentLaw, n_obligors: usize, n_paths: usize, stream: Substream) -> Self {
        let mut rng = stream.rng();
        let mut scale = Vec::with_capacity(n_paths);
        let mut common = Vec::with_capacity(n_paths);
        let mut idio = Vec::with_capacity(n_paths * n_obligors);
        for _ in 0..n_paths {
            scale.push(law.draw_scale(&mut rng));
            common.push(rng.sample(StandardNormal));
            for _ in 0..n_obligors {
                idio.push(rng.sample(StandardNormal));
            }
        }
        Self { n_obligors, scale, common, idio }
    }

    pub fn n_paths(&self) -> usize {
        self.scale.len()
    }

    /// Latent values at correlation `rho`, row-major `paths x obligors`.
    pub fn latent(&self, rho: f64) -> Result<Vec<f64>> {
        check_rho(rho)?;
        let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
        let n = self.n_obligors;
        let mut x = Vec::with_capacity(self.idio.len());
        for p in 0..self.n_paths() {
            for i in 0..n {
                x.push(self.scale[p] * (a * self.common[p] + b * self.idio[p * n + i]));
            }
        }
        Ok(x)
    }

    pub fn loss_paths(
        &self,
        obligors: &[ObligorSpec],
        thresholds: &[Vec<f64>],
        schedule: &[f64],
        rho: f64,
    ) -> Result<LossPaths> {
        if obligors.len() != self.n_obligors || thresholds.len() != self.n_obligors {
            return Err(Error::DimensionMismatch(format!(
                "{} obligors drawn, {} specs, {} threshold rows",
                self.n_obligors,
                obligors.len(),
                thresholds.len()
            )));
        }
        if thresholds.iter().any(|row| row.len() != schedule.len()) {
            return Err(Error::DimensionMismatch("threshold rows must match the schedule".into()));
        }
        let x = self.latent(rho)?;
        let lgd: Vec<f64> = obligors.iter().map(ObligorSpec::loss_given_default).collect();
        let dates = schedule.len();
        let n = self.n_obligors;
        let mut values = vec![0.0; self.n_paths() * dates];
        for p in 0..self.n_paths() {
            let xp = &x[p * n..(p + 1) * n];
            for k in 0..dates {
                // the same summation order on every date keeps L(t_k)
                // nondecreasing in k under rounding
                let mut sum = 0.0;
                for i in 0..n {
                    if xp[i] >= thresholds[i][k] {
                        sum += lgd[i];
                    }
                }
                values[p * dates + k] = sum;
            }
        }
        Ok(LossPaths { times: schedule.to_vec(), values })
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if (0.0..1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("correlation {rho} outside [0, 1)")))
    }
}

/// Cumulative loss `L(t_k)` per path, row-major `paths x dates`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossPaths {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl LossPaths {
    pub fn from_parts(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || !values.len().is_multiple_of(times.len()) {
            return Err(Error::DimensionMismatch(format!("{} values for {} dates", values.len(), times.len())));
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_dates(&self) -> usize {
        self.times.len()
    }

    pub fn n_paths(&self) -> usize {
        self.values.len() / self.times.len()
    }

    pub fn path(&self, p: usize) -> &[f64] {
        let d = self.n_dates();
        &self.values[p * d..(p + 1) * d]
    }

    pub fn terminal(&self) -> Vec<f64> {
        (0..self.n_paths()).map(|p| self.path(p)[self.n_dates() - 1]).collect()
    }

    /// Concatenates batches sharing one schedule.
    pub fn concat(parts: Vec<LossPaths>) -> Result<Self> {
        let mut it = parts.into_iter();
        let mut out = it.next().ok_or(Error::EmptySample)?;
        for part in it {
            if part.times != out.times {
                return Err(Error::DimensionMismatch("batches have different schedules".into()));
            }
            out.values.extend(part.values);
        }
        Ok(out)
    }
}

/// Simulates `n_paths` loss paths on `schedule`, split into `n_batches`
/// substreams of `seed`. The same seed gives the same latent draws for any
/// `rho`.
pub fn simulate_loss_paths(
    obligors: &[ObligorSpec],
    law: LatentLaw,
    rho: f64,
    schedule: &[f64],
    n_paths: usize,
    n_batches: usize,
    seed: u64,
) -> Result<LossPaths> {
    check_rho(rho)?;
    let draws = generate_batches(law, obligors.len(), n_paths, n_batches, seed)?;
    let thresholds = default_thresholds(obligors, law, schedule)?;
    let parts =
        draws.par_iter().map(|d| d.loss_paths(obligors, &thresholds, schedule, rho)).collect::<Result<Vec<_>>>()?;
    LossPaths::concat(parts)
}

fn generate_batches(law: LatentLaw, n: usize, n_paths: usize, n_batches: usize, seed: u64) -> Result<Vec<LatentDraws>> {
    if n == 0 {
        return Err(Error::EmptyUniverse);
    }
    if n_paths == 0 || n_batches == 0 || n_batches > n_paths {
        return Err(Error::InvalidParameter(format!("{n_paths} paths in {n_batches} batches")));
    }
    Ok(batch_sizes(n_paths, n_batches)
        .into_par_iter()
        .enumerate()
        .map(|(b, size)| LatentDraws::generate(law, n, size, Substream::new(seed, StreamDomain::CdoLatent, b as u64)))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LegPrices {
    pub default_leg: f64,
    pub default_se: f64,
    pub payment_leg: f64,
    pub payment_se: f64,
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = stable_sum(values.iter().copied()) / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = stable_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn senior_payoffs(paths: &LossPaths, a: f64, l_max: f64, spread: f64) -> (Vec<f64>, Vec<f64>) {
    let d = paths.n_dates();
    let maturity = paths.times[d - 1];
    let step = spread * maturity / d as f64;
    let full = spread * maturity * (l_max - a);
    (0..paths.n_paths())
        .map(|p| {
            let l = paths.path(p);
            let def = (l[d - 1] - a).max(0.0);
            let calls = l.iter().map(|v| (v - a).max(0.0)).sum::<f64>();
            (def, full - step * calls)
        })
        .unzip()
}

/// Pathwise default and payment leg payoffs.
///
/// Mezzanine payoffs are formed as `senior(A) - senior(B)` so that their
/// means reproduce the decomposition of the senior prices.
pub fn leg_payoffs(paths: &LossPaths, tranche: &TrancheSpec, l_max: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    tranche.validate(l_max)?;
    if paths.n_dates() != tranche.n_coupons || paths.times[paths.n_dates() - 1] != tranche.maturity {
        return Err(Error::DimensionMismatch(format!(
            "paths on {} dates to {}, tranche has {} coupons to {}",
            paths.n_dates(),
            paths.times[paths.n_dates() - 1],
            tranche.n_coupons,
            tranche.maturity
        )));
    }
    let d = paths.n_dates();
    let step = tranche.spread * tranche.maturity / d as f64;
    Ok(match tranche.kind {
        TrancheKind::Equity => {
            let b = tranche.detachment;
            (0..paths.n_paths())
                .map(|p| {
                    let l = paths.path(p);
                    let lt = l[d - 1];
                    let def = lt - (lt - b).max(0.0);
                    let puts = l.iter().map(|v| (b - v).max(0.0)).sum::<f64>();
                    (def, step * puts)
                })
                .unzip()
        }
        TrancheKind::Senior => senior_payoffs(paths, tranche.attachment, l_max, tranche.spread),
        TrancheKind::Mezzanine => {
            let (da, pa) = senior_payoffs(paths, tranche.attachment, l_max, tranche.spread);
            let (db, pb) = senior_payoffs(paths, tranche.detachment, l_max, tranche.spread);
            (da.iter().zip(&db).map(|(x, y)| x - y).collect(), pa.iter().zip(&pb).map(|(x, y)| x - y).collect())
        }
    })
}

pub fn price_legs(paths: &LossPaths, tranche: &TrancheSpec, l_max: f64) -> Result<LegPrices> {
    if paths.n_paths() == 0 {
        return Err(Error::EmptySample);
    }
    let (def, pay) = leg_payoffs(paths, tranche, l_max)?;
    let (default_leg, default_se) = mean_and_se(&def);
    let (payment_leg, payment_se) = mean_and_se(&pay);
    Ok(LegPrices { default_leg, default_se, payment_leg, payment_se })
}

/// Largest `|(B - L)^+ - ((L - B)^+ - L + B)|` over every path and date,
/// relative to `max(B, L_max)`.
pub fn parity_gap(paths: &LossPaths, strike: f64, l_max: f64) -> f64 {
    let scale = strike.abs().max(l_max).max(f64::MIN_POSITIVE);
    paths
        .values
        .iter()
        .map(|&l| ((strike - l).max(0.0) - ((l - strike).max(0.0) - l + strike)).abs() / scale)
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Leg {
    Default,
    Payment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Correlation,
    Attachment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Expected {
    Nondecreasing,
    Nonincreasing,
}

/// Expected sign of a leg along a direction; `None` for mezzanine.
pub fn expected_sign(kind: TrancheKind, leg: Leg, direction: Direction) -> Option<Expected> {
    use Expected::*;
    match (kind, direction, leg) {
        (TrancheKind::Mezzanine, ..) => None,
        (TrancheKind::Equity, Direction::Correlation, Leg::Default) => Some(Nonincreasing),
        (TrancheKind::Equity, Direction::Correlation, Leg::Payment) => Some(Nondecreasing),
        (TrancheKind::Senior, Direction::Correlation, Leg::Default) => Some(Nondecreasing),
        (TrancheKind::Senior, Direction::Correlation, Leg::Payment) => Some(Nonincreasing),
        (TrancheKind::Equity, Direction::Attachment, _) => Some(Nondecreasing),
        (TrancheKind::Senior, Direction::Attachment, _) => Some(Nonincreasing),
    }
}

/// Worst increment of one (kind, leg, direction) family. Increments are
/// CRN-paired pathwise differences, oriented so the expected sign is `>= 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LegCheck {
    pub kind: TrancheKind,
    pub leg: Leg,
    pub direction: Direction,
    pub expected: Expected,
    pub n_pairs: usize,
    /// Raw increment (higher minus lower parameter) of the worst pair.
    pub worst_increment: f64,
    pub worst_se: f64,
    /// `(tranche index, rho)` of the lower and upper end of the worst pair.
    pub worst_from: (usize, f64),
    pub worst_to: (usize, f64),
    pub k_sigma: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdoMonotonicityReport {
    pub k_sigma: f64,
    pub checks: Vec<LegCheck>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdoCell {
    pub tranche: usize,
    pub rho: f64,
    pub prices: LegPrices,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpectedLossCheck {
    pub rho: f64,
    pub estimate: f64,
    pub se: f64,
    pub theory: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdoSweepResult {
    pub l_max: f64,
    pub tranches: Vec<TrancheSpec>,
    pub rho_grid: Vec<f64>,
    pub cells: Vec<CdoCell>,
    pub expected_loss: Vec<ExpectedLossCheck>,
    pub report: CdoMonotonicityReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdoSweepSpec {
    pub obligors: Vec<ObligorSpec>,
    pub law: LatentLaw,
    pub tranches: Vec<TrancheSpec>,
    pub rho_grid: Vec<f64>,
    pub n_paths: usize,
    pub n_batches: usize,
    pub seed: u64,
    pub k_sigma: f64,
}

struct Increment {
    value: f64,
    se: f64,
}

fn paired_increment(lower: &[f64], upper: &[f64]) -> Increment {
    let diff: Vec<f64> = upper.iter().zip(lower).map(|(u, l)| u - l).collect();
    let (value, se) = mean_and_se(&diff);
    Increment { value, se }
}

/// Prices every tranche at every `rho` on common random numbers and checks
/// the sign pattern along both the correlation and the attachment direction.
pub fn correlation_sweep(spec: &CdoSweepSpec) -> Result<CdoSweepResult> {
    if spec.tranches.is_empty() || spec.rho_grid.is_empty() {
        return Err(Error::InvalidParameter("need at least one tranche and one correlation".into()));
    }
    if !(spec.k_sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("k_sigma {} must be >= 0", spec.k_sigma)));
    }
    for &rho in &spec.rho_grid {
        check_rho(rho)?;
    }
    if spec.rho_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("correlation grid must be strictly increasing".into()));
    }
    let l_max = max_loss(&spec.obligors);
    let first = spec.tranches[0];
    for t in &spec.tranches {
        t.validate(l_max)?;
        if t.n_coupons != first.n_coupons || t.maturity != first.maturity {
            return Err(Error::InvalidParameter("all tranches must share one payment schedule".into()));
        }
    }
    let schedule = first.schedule();
    let thresholds = default_thresholds(&spec.obligors, spec.law, &schedule)?;
    let draws = generate_batches(spec.law, spec.obligors.len(), spec.n_paths, spec.n_batches, spec.seed)?;

    let paths: Vec<LossPaths> = spec
        .rho_grid
        .par_iter()
        .map(|&rho| {
            let parts = draws
                .iter()
                .map(|d| d.loss_paths(&spec.obligors, &thresholds, &schedule, rho))
                .collect::<Result<Vec<_>>>()?;
            LossPaths::concat(parts)
        })
        .collect::<Result<_>>()?;

    let theory = expected_loss(&spec.obligors, first.maturity);
    let expected_loss = spec
        .rho_grid
        .iter()
        .zip(&paths)
        .map(|(&rho, p)| {
            let (estimate, se) = mean_and_se(&p.terminal());
            ExpectedLossCheck { rho, estimate, se, theory }
        })
        .collect();

    // payoffs[tranche][rho] = (default, payment)
    let payoffs: Vec<Vec<(Vec<f64>, Vec<f64>)>> = spec
        .tranches
        .par_iter()
        .map(|t| paths.iter().map(|p| leg_payoffs(p, t, l_max)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for (ti, per_rho) in payoffs.iter().enumerate() {
        for (ri, (def, pay)) in per_rho.iter().enumerate() {
            let (default_leg, default_se) = mean_and_se(def);
            let (payment_leg, payment_se) = mean_and_se(pay);
            cells.push(CdoCell {
                tranche: ti,
                rho: spec.rho_grid[ri],
                prices: LegPrices { default_leg, default_se, payment_leg, payment_se },
            });
        }
    }

    let report = monotonicity(spec, &payoffs);
    Ok(CdoSweepResult {
        l_max,
        tranches: spec.tranches.clone(),
        rho_grid: spec.rho_grid.clone(),
        cells,
        expected_loss,
        report,
    })
}

fn monotonicity(spec: &CdoSweepSpec, payoffs: &[Vec<(Vec<f64>, Vec<f64>)>]) -> CdoMonotonicityReport {
    let leg_of = |t: usize, r: usize, leg: Leg| -> &[f64] {
        match leg {
            Leg::Default => &payoffs[t][r].0,
            Leg::Payment => &payoffs[t][r].1,
        }
    };
    let mut checks = Vec::new();
    for kind in [TrancheKind::Equity, TrancheKind::Senior] {
        let mut members: Vec<usize> = (0..spec.tranches.len()).filter(|&t| spec.tranches[t].kind == kind).collect();
        if members.is_empty() {
            continue;
        }
        // attachment direction: equity moves with B, senior with A
        members.sort_by(|&a, &b| {
            let key = |t: usize| match kind {
                TrancheKind::Equity => spec.tranches[t].detachment,
                _ => spec.tranches[t].attachment,
            };
            key(a).total_cmp(&key(b))
        });
        for leg in [Leg::Default, Leg::Payment] {
            for direction in [Direction::Correlation, Direction::Attachment] {
                let expected = expected_sign(kind, leg, direction).expect("equity and senior carry a sign");
                let mut pairs: Vec<((usize, usize), (usize, usize))> = Vec::new();
                match direction {
                    Direction::Correlation => {
                        for &t in &members {
                            for r in 1..spec.rho_grid.len() {
                                pairs.push(((t, r - 1), (t, r)));
                            }
                        }
                    }
                    Direction::Attachment => {
                        for w in members.windows(2) {
                            for r in 0..spec.rho_grid.len() {
                                pairs.push(((w[0], r), (w[1], r)));
                            }
                        }
                    }
                }
                let results: Vec<(f64, f64, f64)> = pairs
                    .par_iter()
                    .map(|&((t0, r0), (t1, r1))| {
                        let inc = paired_increment(leg_of(t0, r0, leg), leg_of(t1, r1, leg));
                        let oriented = match expected {
                            Expected::Nondecreasing => inc.value,
                            Expected::Nonincreasing => -inc.value,
                        };
                        let se = if inc.se.is_nan() { 0.0 } else { inc.se };
                        (oriented + spec.k_sigma * se, inc.value, se)
                    })
                    .collect();
                let Some(worst) = (0..results.len()).min_by(|&a, &b| results[a].0.total_cmp(&results[b].0)) else {
                    continue;
                };
                let ((t0, r0), (t1, r1)) = pairs[worst];
                checks.push(LegCheck {
                    kind,
                    leg,
                    direction,
                    expected,
                    n_pairs: pairs.len(),
                    worst_increment: results[worst].1,
                    worst_se: results[worst].2,
                    worst_from: (t0, spec.rho_grid[r0]),
                    worst_to: (t1, spec.rho_grid[r1]),
                    k_sigma: spec.k_sigma,
                    pass: results[worst].0 >= 0.0,
                });
            }
        }
    }
    let pass = checks.iter().all(|c| c.pass);
    CdoMonotonicityReport { k_sigma: spec.k_sigma, checks, pass }
}
