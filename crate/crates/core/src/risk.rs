//! Empirical risk measures on weighted samples.
//!
//! VaR and expected shortfall follow the atom-corrected definitions
//!
//! ```text
//! VaR_a(X) = inf { x : Q(X <= x) > a }
//! ES_a(X)  = ( E[X 1{X >= VaR}] + VaR (Q(X < VaR) - a) ) / (1 - a)
//! ```
//!
//! evaluated exactly on the weighted empirical law (no interpolation).
//! Values are sorted and ties merged before the scan; a cumulative weight
//! within [`CDF_TIE_TOLERANCE`] of `a` counts as equal to it, so that
//! `0.01 * 95` summed in floating point does not exceed `0.95`.
//!
//! CECL and EC are the mean and the ES of the loss under the survival
//! measure of the reference member, whose weights are
//! `1{x_0 < B_0} / (1 - gamma)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CDF_TIE_TOLERANCE: f64 = 1e-12;

/// Tolerance on `|sum(weights) - 1|`.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// Compensated (Neumaier) sum.
pub fn stable_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedSample {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        if values.len() != weights.len() {
            return Err(Error::DimensionMismatch(format!("{} values, {} weights", values.len(), weights.len())));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite sample value {v}")));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter(format!("weight {w} must be finite and >= 0")));
        }
        let total = stable_sum(weights.iter().copied());
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidParameter(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { values, weights })
    }

    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        let w = 1.0 / values.len() as f64;
        let n = values.len();
        if n == 0 {
            return Err(Error::EmptySample);
        }
        Self::new(values, vec![w; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self) -> f64 {
        stable_sum(self.values.iter().zip(&self.weights).map(|(v, w)| v * w))
    }

    /// Distinct values in increasing order with their merged weights;
    /// zero-weight entries are dropped.
    fn atoms(&self) -> Vec<(f64, f64)> {
        let mut pairs: Vec<(f64, f64)> =
            self.values.iter().zip(&self.weights).filter(|(_, w)| **w > 0.0).map(|(v, w)| (*v, *w)).collect();
        pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
        for (v, w) in pairs {
            match atoms.last_mut() {
                Some(last) if last.0 == v => last.1 += w,
                _ => atoms.push((v, w)),
            }
        }
        atoms
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if 0.5 < alpha && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha = {alpha} outside (1/2, 1)")))
    }
}

/// Index of the VaR atom.
fn var_index(atoms: &[(f64, f64)], alpha: f64) -> usize {
    let mut cum = 0.0;
    let mut comp = 0.0;
    for (k, &(_, w)) in atoms.iter().enumerate() {
        let t = cum + w;
        comp += if cum.abs() >= w { (cum - t) + w } else { (w - t) + cum };
        cum = t;
        if cum + comp > alpha + CDF_TIE_TOLERANCE {
            return k;
        }
    }
    atoms.len() - 1
}

/// `(VaR, ES)` from one sort of the sample.
pub fn var_and_es(sample: &WeightedSample, alpha: f64) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    let atoms = sample.atoms();
    if atoms.is_empty() {
        return Err(Error::EmptySample);
    }
    let k = var_index(&atoms, alpha);
    let var = atoms[k].0;
    // With weights summing to 1, E[X 1{X >= v}] + v (Q(X < v) - alpha)
    // equals v (1 - alpha) + E[(X - v) 1{X > v}]; this form has no
    // cancellation, so atoms and constant samples come out exact.
    let excess = stable_sum(atoms[k + 1..].iter().map(|a| (a.0 - var) * a.1));
    Ok((var, var + excess / (1.0 - alpha)))
}

/// Smallest sample value whose weighted CDF exceeds `alpha`.
pub fn empirical_var(sample: &WeightedSample, alpha: f64) -> Result<f64> {
    var_and_es(sample, alpha).map(|(v, _)| v)
}

/// Atom-corrected expected shortfall.
pub fn expected_shortfall(sample: &WeightedSample, alpha: f64) -> Result<f64> {
    var_and_es(sample, alpha).map(|(_, e)| e)
}

/// How survival weights are normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurvivalNormalization {
    /// Divide by the realized survivor count.
    #[default]
    SelfNormalized,
    /// Divide by `(1 - gamma) * n_paths`. Weights then sum to 1 only in
    /// expectation; ES is still taken on the self-normalized law.
    Theoretical,
}

/// Survival-measure weights `1{x0 < b0} / (1 - gamma)`, renormalized to sum
/// to 1 over the batch.
pub fn survival_weights(x0: &[f64], b0: f64, gamma: f64) -> Result<Vec<f64>> {
    survival_weights_with(x0, b0, gamma, SurvivalNormalization::SelfNormalized)
}

pub fn survival_weights_with(x0: &[f64], b0: f64, gamma: f64, mode: SurvivalNormalization) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!("gamma = {gamma} outside [0, 1)")));
    }
    let survivors = x0.iter().filter(|&&x| x < b0).count();
    if survivors == 0 {
        return Err(Error::NoSurvivors);
    }
    let w = match mode {
        SurvivalNormalization::SelfNormalized => 1.0 / survivors as f64,
        SurvivalNormalization::Theoretical => 1.0 / ((1.0 - gamma) * x0.len() as f64),
    };
    Ok(x0.iter().map(|&x| if x < b0 { w } else { 0.0 }).collect())
}

/// Weighted mean of the losses.
pub fn cecl(loss: &[f64], weights: &[f64]) -> Result<f64> {
    if loss.len() != weights.len() {
        return Err(Error::DimensionMismatch(format!("{} losses, {} weights", loss.len(), weights.len())));
    }
    Ok(stable_sum(loss.iter().zip(weights).map(|(l, w)| l * w)))
}

/// ES of the weighted loss at `alpha`.
pub fn economic_capital(loss: &[f64], weights: &[f64], alpha: f64) -> Result<f64> {
    expected_shortfall(&WeightedSample::new(loss.to_vec(), weights.to_vec())?, alpha)
}

/// Sample mean and standard error `stdev / sqrt(k)` across batches.
pub fn batch_statistics(estimates: &[f64]) -> Result<(f64, f64)> {
    let k = estimates.len();
    if k < 2 {
        return Err(Error::TooFewBatches(k));
    }
    let mean = stable_sum(estimates.iter().copied()) / k as f64;
    let ss = stable_sum(estimates.iter().map(|e| (e - mean) * (e - mean)));
    Ok((mean, (ss / (k - 1) as f64).sqrt() / (k as f64).sqrt()))
}

/// Whether reported figures come from the pooled sample or average the
/// per-batch estimates. Error bars always come from the batches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMode {
    #[default]
    Pooled,
    BatchMean,
}

/// CECL, EC and VaR of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub cecl: f64,
    pub ec: f64,
    pub var: f64,
}

impl RiskEstimate {
    pub fn ec_minus_cecl(&self) -> f64 {
        self.ec - self.cecl
    }
}

/// Losses of one batch together with the reference member's survival flags.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLosses {
    pub losses: Vec<f64>,
    pub survived: Vec<bool>,
}

/// Survival-measure CECL, EC and VaR of a set of paths.
pub fn survival_estimate(
    losses: &[f64],
    survived: &[bool],
    gamma: f64,
    alpha: f64,
    normalization: SurvivalNormalization,
) -> Result<RiskEstimate> {
    if losses.len() != survived.len() {
        return Err(Error::DimensionMismatch("losses vs survival flags".into()));
    }
    let survivors = survived.iter().filter(|s| **s).count();
    if survivors == 0 {
        return Err(Error::NoSurvivors);
    }
    // only surviving paths carry weight
    let kept: Vec<f64> = losses.iter().zip(survived).filter(|(_, s)| **s).map(|(l, _)| *l).collect();
    let sample = WeightedSample::uniform(kept)?;
    let (var, ec) = var_and_es(&sample, alpha)?;
    let cecl = match normalization {
        SurvivalNormalization::SelfNormalized => sample.mean(),
        SurvivalNormalization::Theoretical => {
            stable_sum(sample.values().iter().copied()) / ((1.0 - gamma) * losses.len() as f64)
        }
    };
    Ok(RiskEstimate { cecl, ec, var })
}

/// Risk figures of one reference member in one correlation cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub member: usize,
    pub alpha: f64,
    pub n_paths: usize,
    pub n_batches: usize,
    pub cecl: f64,
    pub cecl_se: f64,
    pub ec: f64,
    pub ec_se: f64,
    pub var: f64,
    pub var_se: f64,
    pub ec_minus_cecl: f64,
    pub ec_minus_cecl_se: f64,
    /// Per-batch estimates, kept for paired increments across cells.
    #[serde(skip)]
    pub batches: Vec<RiskEstimate>,
}

impl RiskReport {
    pub fn from_batches(
        member: usize,
        batches: &[BatchLosses],
        gamma: f64,
        alpha: f64,
        mode: EstimateMode,
        normalization: SurvivalNormalization,
    ) -> Result<Self> {
        if batches.len() < 2 {
            return Err(Error::TooFewBatches(batches.len()));
        }
        let per_batch = batches
            .iter()
            .map(|b| survival_estimate(&b.losses, &b.survived, gamma, alpha, normalization))
            .collect::<Result<Vec<_>>>()?;
        let stat = |f: fn(&RiskEstimate) -> f64| batch_statistics(&per_batch.iter().map(f).collect::<Vec<_>>());
        let (cecl_mean, cecl_se) = stat(|e| e.cecl)?;
        let (ec_mean, ec_se) = stat(|e| e.ec)?;
        let (var_mean, var_se) = stat(|e| e.var)?;
        let (centered_mean, centered_se) = stat(RiskEstimate::ec_minus_cecl)?;
        let n_paths = batches.iter().map(|b| b.losses.len()).sum();
        let headline = match mode {
            EstimateMode::Pooled => {
                let losses: Vec<f64> = batches.iter().flat_map(|b| b.losses.iter().copied()).collect();
                let survived: Vec<bool> = batches.iter().flat_map(|b| b.survived.iter().copied()).collect();
                survival_estimate(&losses, &survived, gamma, alpha, normalization)?
            }
            EstimateMode::BatchMean => RiskEstimate { cecl: cecl_mean, ec: ec_mean, var: var_mean },
        };
        let ec_minus_cecl = match mode {
            EstimateMode::Pooled => headline.ec_minus_cecl(),
            EstimateMode::BatchMean => centered_mean,
        };
        Ok(Self {
            member,
            alpha,
            n_paths,
            n_batches: batches.len(),
            cecl: headline.cecl,
            cecl_se,
            ec: headline.ec,
            ec_se,
            var: headline.var,
            var_se,
            ec_minus_cecl,
            ec_minus_cecl_se: centered_se,
            batches: per_batch,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_to_hundred() -> WeightedSample {
        WeightedSample::uniform((1..=100).map(f64::from).collect()).unwrap()
    }

    #[test]
    fn var_es_on_one_to_hundred() {
        let s = one_to_hundred();
        assert_eq!(empirical_var(&s, 0.95).unwrap(), 96.0);
        assert!((expected_shortfall(&s, 0.95).unwrap() - 98.0).abs() < 1e-12);
    }

    #[test]
    fn two_point_atom() {
        let s = WeightedSample::new(vec![0.0, 100.0], vec![0.99, 0.01]).unwrap();
        assert_eq!(empirical_var(&s, 0.995).unwrap(), 100.0);
        assert!((expected_shortfall(&s, 0.995).unwrap() - 100.0).abs() < 1e-12);
    }

    #[test]
    fn constant_sample() {
        let s = WeightedSample::uniform(vec![3.5; 17]).unwrap();
        for a in [0.6, 0.9, 0.9975] {
            assert_eq!(empirical_var(&s, a).unwrap(), 3.5);
            assert!((expected_shortfall(&s, a).unwrap() - 3.5).abs() < 1e-12);
        }
    }

    #[test]
    fn ties_are_merged() {
        let s = WeightedSample::uniform(vec![1.0, 5.0, 5.0, 5.0, 2.0]).unwrap();
        // CDF(2) = 0.4, CDF(5) = 1
        assert_eq!(empirical_var(&s, 0.6).unwrap(), 5.0);
        assert!((expected_shortfall(&s, 0.6).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn sample_validation() {
        assert_eq!(WeightedSample::uniform(vec![]), Err(Error::EmptySample));
        assert!(WeightedSample::new(vec![1.0, 2.0], vec![0.5, 0.6]).is_err());
        assert!(WeightedSample::new(vec![1.0, 2.0], vec![1.5, -0.5]).is_err());
        assert!(WeightedSample::new(vec![f64::NAN], vec![1.0]).is_err());
        assert!(empirical_var(&one_to_hundred(), 0.4).is_err());
    }

    #[test]
    fn survival_weight_examples() {
        let w = survival_weights(&[-1.0, -2.0, -0.5], 0.0, 0.0).unwrap();
        assert!(w.iter().all(|&v| v == 1.0 / 3.0));
        let w = survival_weights(&[-1.0, 1.0, -2.0, 3.0], 0.0, 0.2).unwrap();
        assert_eq!(w, vec![0.5, 0.0, 0.5, 0.0]);
        assert_eq!(survival_weights(&[1.0, 2.0], 0.0, 0.1), Err(Error::NoSurvivors));
        assert!(survival_weights(&[1.0], 0.0, 1.0).is_err());
        let t = survival_weights_with(&[-1.0, 1.0, -2.0, 3.0], 0.0, 0.5, SurvivalNormalization::Theoretical).unwrap();
        assert_eq!(t, vec![0.5, 0.0, 0.5, 0.0]);
    }

    #[test]
    fn cecl_and_ec_degenerate() {
        let w = vec![0.25; 4];
        assert_eq!(cecl(&[0.0; 4], &w).unwrap(), 0.0);
        assert_eq!(economic_capital(&[0.0; 4], &w, 0.9975).unwrap(), 0.0);
        let w = survival_weights(&[-1.0, 1.0, -1.0, -1.0], 0.0, 0.1).unwrap();
        assert!((cecl(&[2.0, 9.0, 2.0, 2.0], &w).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn batch_statistics_examples() {
        assert_eq!(batch_statistics(&[4.0; 5]).unwrap(), (4.0, 0.0));
        let (m, se) = batch_statistics(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m, 2.0);
        assert!((se - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(batch_statistics(&[1.0]), Err(Error::TooFewBatches(1)));
    }

    #[test]
    fn report_modes() {
        let batches: Vec<BatchLosses> = (0..4)
            .map(|b| BatchLosses {
                losses: (0..50).map(|i| f64::from(i * (b + 1))).collect(),
                survived: (0..50).map(|i| i % 7 != 0).collect(),
            })
            .collect();
        let pooled = RiskReport::from_batches(
            0,
            &batches,
            0.1,
            0.9,
            EstimateMode::Pooled,
            SurvivalNormalization::SelfNormalized,
        )
        .unwrap();
        let mean = RiskReport::from_batches(
            0,
            &batches,
            0.1,
            0.9,
            EstimateMode::BatchMean,
            SurvivalNormalization::SelfNormalized,
        )
        .unwrap();
        assert_eq!(pooled.n_paths, 200);
        assert_eq!(pooled.cecl_se, mean.cecl_se);
        let avg = pooled.batches.iter().map(|b| b.cecl).sum::<f64>() / 4.0;
        assert!((mean.cecl - avg).abs() < 1e-12);
        assert!(pooled.ec >= pooled.var);
    }
}
