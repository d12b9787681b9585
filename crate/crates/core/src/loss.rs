//! Credit loss functional `l(x, y) = sum_i f_i(x) g_i(y_i)`.
//!
//! [`generic_loss`] takes pluggable allocation (`f_i`) and severity (`g_i`)
//! components. [`member_loss`] is the CCP specialization seen from a
//! reference member, where
//!
//! ```text
//! f_i(x) = 1{x_i >= B_i} / (1 + sum_{j != ref} beta_j 1{x_j < B_j}),  beta_j = DF_j / DF_ref
//! g_i(y) = (y - IM_i - DF_i)^+
//! ```
//!
//! and the sum runs over every member except the reference. Note that the
//! denominator weights members with `x_j < B_j`, i.e. the survivors, as the
//! formula is written.
//!
//! Both routes perform the same floating-point operations in the same order,
//! so on the same batch they agree bit for bit.

use crate::ccp::ClearingSetup;
use crate::elliptical::ScenarioBatch;
use crate::error::{Error, Result};

/// `f_i` on the latent vector.
pub trait Allocation: Sync {
    fn coefficient(&self, i: usize, x: &[f64]) -> f64;
}

/// `g_i` on the exposure driver of member `i`.
pub trait Severity: Sync {
    fn apply(&self, i: usize, y: f64) -> f64;
}

impl<F: Fn(usize, &[f64]) -> f64 + Sync> Allocation for F {
    fn coefficient(&self, i: usize, x: &[f64]) -> f64 {
        self(i, x)
    }
}

/// Default fund sharing rule. Members outside the sum carry `beta = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CcpAllocation {
    pub betas: Vec<f64>,
    pub thresholds: Vec<f64>,
}

impl CcpAllocation {
    pub fn new(betas: Vec<f64>, thresholds: Vec<f64>) -> Result<Self> {
        if betas.len() != thresholds.len() {
            return Err(Error::DimensionMismatch(format!("{} betas for {} thresholds", betas.len(), thresholds.len())));
        }
        if let Some(b) = betas.iter().find(|b| !(**b >= 0.0)) {
            return Err(Error::InvalidParameter(format!("beta {b} must be >= 0")));
        }
        Ok(Self { betas, thresholds })
    }

    fn denominator(&self, x: &[f64]) -> f64 {
        let mut d = 1.0;
        for ((&xj, &bj), &beta) in x.iter().zip(&self.thresholds).zip(&self.betas) {
            if xj < bj {
                d += beta;
            }
        }
        d
    }
}

impl Allocation for CcpAllocation {
    fn coefficient(&self, i: usize, x: &[f64]) -> f64 {
        if x[i] >= self.thresholds[i] {
            1.0 / self.denominator(x)
        } else {
            0.0
        }
    }
}

/// `1{x_i >= B_i} / (1 + sum_j beta_j 1{x_j < B_j})`.
pub fn allocation_coefficient(i: usize, x: &[f64], betas: &[f64], thresholds: &[f64]) -> f64 {
    let mut d = 1.0;
    for j in 0..x.len() {
        if x[j] < thresholds[j] {
            d += betas[j];
        }
    }
    if x[i] >= thresholds[i] {
        1.0 / d
    } else {
        0.0
    }
}

/// `f_i(x) = 1{x_i >= B_i}`: a bilateral exposure with no sharing.
#[derive(Debug, Clone, PartialEq)]
pub struct DefaultIndicator {
    pub thresholds: Vec<f64>,
}

impl Allocation for DefaultIndicator {
    fn coefficient(&self, i: usize, x: &[f64]) -> f64 {
        if x[i] >= self.thresholds[i] {
            1.0
        } else {
            0.0
        }
    }
}

/// `f_i = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unit;

impl Allocation for Unit {
    fn coefficient(&self, _: usize, _: &[f64]) -> f64 {
        1.0
    }
}

/// `g_i(y) = (y - m_i)^+`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcessOverCollateral {
    pub collateral: Vec<f64>,
}

impl Severity for ExcessOverCollateral {
    fn apply(&self, i: usize, y: f64) -> f64 {
        (y - self.collateral[i]).max(0.0)
    }
}

impl<F: Fn(usize, f64) -> f64 + Sync> Severity for F {
    fn apply(&self, i: usize, y: f64) -> f64 {
        self(i, y)
    }
}

/// Allocation, severity and the members entering the sum.
pub struct LossSpec<A, S> {
    pub allocation: A,
    pub severity: S,
    pub members: Vec<usize>,
}

impl<A: Allocation, S: Severity> LossSpec<A, S> {
    pub fn evaluate(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut total = 0.0;
        for &i in &self.members {
            total += self.allocation.coefficient(i, x) * self.severity.apply(i, y[i]);
        }
        total
    }
}

/// The CCP loss of `reference`, in [`LossSpec`] form.
pub fn ccp_loss_spec(setup: &ClearingSetup, reference: usize) -> Result<LossSpec<CcpAllocation, ExcessOverCollateral>> {
    let mut betas = setup.betas(reference)?;
    betas[reference] = 0.0;
    Ok(LossSpec {
        allocation: CcpAllocation::new(betas, setup.thresholds.clone())?,
        severity: ExcessOverCollateral { collateral: setup.collateral() },
        members: (0..setup.n_members()).filter(|&i| i != reference).collect(),
    })
}

/// Per-path losses, optionally with per-member contributions
/// (row-major `paths x members`).
#[derive(Debug, Clone, PartialEq)]
pub struct LossVector {
    pub total: Vec<f64>,
    pub contributions: Option<Vec<f64>>,
}

impl LossVector {
    pub fn len(&self) -> usize {
        self.total.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total.is_empty()
    }
}

pub fn generic_loss<A: Allocation, S: Severity>(
    batch: &ScenarioBatch,
    spec: &LossSpec<A, S>,
    keep_contributions: bool,
) -> Result<LossVector> {
    let m = batch.n_members();
    if let Some(&i) = spec.members.iter().find(|&&i| i >= m) {
        return Err(Error::DimensionMismatch(format!("member {i} not in a batch of {m} members")));
    }
    let mut total = Vec::with_capacity(batch.n_paths());
    let mut contributions = keep_contributions.then(|| vec![0.0; batch.n_paths() * m]);
    for (p, s) in batch.paths().enumerate() {
        let mut sum = 0.0;
        for &i in &spec.members {
            let term = spec.allocation.coefficient(i, s.x) * spec.severity.apply(i, s.y[i]);
            sum += term;
            if let Some(c) = contributions.as_mut() {
                c[p * m + i] = term;
            }
        }
        total.push(sum);
    }
    Ok(LossVector { total, contributions })
}

/// Loss of `reference` on every path of `batch`.
pub fn member_loss(
    batch: &ScenarioBatch,
    setup: &ClearingSetup,
    reference: usize,
    keep_contributions: bool,
) -> Result<LossVector> {
    let m = batch.n_members();
    if setup.n_members() != m {
        return Err(Error::DimensionMismatch(format!("batch has {m} members, clearing setup {}", setup.n_members())));
    }
    let spec = ccp_loss_spec(setup, reference)?;
    let alloc = &spec.allocation;
    let collateral = &spec.severity.collateral;
    let mut total = Vec::with_capacity(batch.n_paths());
    let mut contributions = keep_contributions.then(|| vec![0.0; batch.n_paths() * m]);
    for (p, s) in batch.paths().enumerate() {
        let mut sum = 0.0;
        if (0..m).any(|i| i != reference && s.x[i] >= alloc.thresholds[i]) {
            let share = 1.0 / alloc.denominator(s.x);
            for i in (0..m).filter(|&i| i != reference) {
                if s.x[i] >= alloc.thresholds[i] {
                    let term = share * (s.y[i] - collateral[i]).max(0.0);
                    sum += term;
                    if let Some(c) = contributions.as_mut() {
                        c[p * m + i] = term;
                    }
                }
            }
        }
        total.push(sum);
    }
    Ok(LossVector { total, contributions })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn allocation_examples() {
        let b = [1.0, 2.0, 3.0];
        let t = [0.0, 0.0, 0.0];
        assert_eq!(allocation_coefficient(0, &[-1.0, 1.0, 1.0], &b, &t), 0.0);
        assert_eq!(allocation_coefficient(0, &[1.0, 1.0, 1.0], &b, &t), 1.0);
        // member 0 defaulted, members 1 and 2 survived: 1 / (1 + 2 + 3)
        assert_eq!(allocation_coefficient(0, &[1.0, -1.0, -1.0], &b, &t), 1.0 / 6.0);
        let alloc = CcpAllocation::new(b.to_vec(), t.to_vec()).unwrap();
        assert_eq!(alloc.coefficient(0, &[1.0, -1.0, -1.0]), 1.0 / 6.0);
    }

    #[test]
    fn threshold_tie_counts_as_default() {
        assert_eq!(allocation_coefficient(0, &[0.5, 0.5], &[1.0, 1.0], &[0.5, 0.5]), 1.0);
    }

    #[test]
    fn negative_beta_rejected() {
        assert!(CcpAllocation::new(vec![1.0, -0.1], vec![0.0, 0.0]).is_err());
        assert!(CcpAllocation::new(vec![1.0], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn spec_evaluation() {
        let spec = LossSpec { allocation: Unit, severity: |_: usize, y: f64| y.max(0.0), members: vec![0, 1, 2] };
        assert_eq!(spec.evaluate(&[0.0; 3], &[1.5, -2.0, 0.5]), 2.0);
        let bilateral = LossSpec {
            allocation: DefaultIndicator { thresholds: vec![0.0, 0.0] },
            severity: ExcessOverCollateral { collateral: vec![1.0, 1.0] },
            members: vec![0, 1],
        };
        assert_eq!(bilateral.evaluate(&[1.0, -1.0], &[3.0, 10.0]), 2.0);
    }
}
