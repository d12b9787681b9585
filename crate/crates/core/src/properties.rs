//! Fixed suite of increasing-differences certificates, run by the
//! `check-properties` command and the acceptance tests.

use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::loss::{CcpAllocation, ExcessOverCollateral, LossSpec};
use crate::rng::{StreamDomain, Substream};
use crate::supermodular::{
    check_ccp_allocation_supermodular, check_increasing_differences, default_tolerance, GridSpec, IncDiffReport,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyOutcome {
    pub name: String,
    /// A negative control is expected to fail.
    pub expect_pass: bool,
    pub passed: bool,
    pub min_difference: f64,
    pub checks: u64,
}

impl PropertyOutcome {
    fn new(name: String, expect_pass: bool, r: &IncDiffReport) -> Self {
        Self { name, expect_pass, passed: r.pass, min_difference: r.min_difference(), checks: r.checks() }
    }

    pub fn as_expected(&self) -> bool {
        self.passed == self.expect_pass
    }
}

fn positive_betas(n: usize, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = Substream::new(seed, StreamDomain::Auxiliary, index).rng();
    (0..n).map(|_| rng.random_range(0.05..3.0)).collect()
}

/// Allocation coefficient `f_i` on all `2^n` below/above-threshold vertices,
/// for every member `i`, with tolerance 0.
pub fn allocation_certificates(max_n: usize, seed: u64) -> Result<Vec<PropertyOutcome>> {
    let mut out = Vec::new();
    for n in 2..=max_n {
        let betas = positive_betas(n, seed, n as u64);
        let thresholds: Vec<f64> = (0..n).map(|j| 0.25 * j as f64 - 0.5).collect();
        let grid = GridSpec::new(thresholds.iter().map(|b| vec![b - 1.0, b + 1.0]).collect())?;
        for i in 0..n {
            let r = check_ccp_allocation_supermodular(&betas, &thresholds, i, &grid, 0.0)?;
            out.push(PropertyOutcome::new(format!("allocation f_{i}, n={n}"), true, &r));
        }
    }
    Ok(out)
}

/// `l(x, y) = sum_i f_i(x) (y_i - m_i)^+` on a mixed grid with 4 points per
/// axis; coordinates are `(x_1..x_n, y_1..y_n)`.
pub fn loss_certificate(n: usize, seed: u64) -> Result<PropertyOutcome> {
    let betas = positive_betas(n, seed, 100 + n as u64);
    let thresholds: Vec<f64> = (0..n).map(|j| 0.5 - 0.4 * j as f64).collect();
    let collateral: Vec<f64> = (0..n).map(|j| 1.0 + j as f64).collect();
    let spec = LossSpec {
        allocation: CcpAllocation::new(betas, thresholds.clone())?,
        severity: ExcessOverCollateral { collateral: collateral.clone() },
        members: (0..n).collect(),
    };
    let mut axes: Vec<Vec<f64>> = thresholds.iter().map(|&b| vec![b - 1.5, b - 0.5, b, b + 1.0]).collect();
    axes.extend(collateral.iter().map(|m| vec![m - 1.0, *m, m + 0.5, m + 2.0]));
    let grid = GridSpec::new(axes)?;
    let tol = default_tolerance(&grid, collateral.iter().sum::<f64>() + 2.0 * n as f64);
    let r = check_increasing_differences(|z: &[f64]| spec.evaluate(&z[..n], &z[n..]), &grid, tol)?;
    Ok(PropertyOutcome::new(format!("loss l(x, y), n={n}"), true, &r))
}

/// `(sum_i L_i 1{x_i >= B_i} - A)^+`, the senior default payoff as a
/// function of the latent vector.
pub fn senior_payoff_certificate(n: usize, attachment: f64) -> Result<PropertyOutcome> {
    let lgd: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
    let grid = GridSpec::uniform(&[-1.0, 1.0], n)?;
    let r = check_increasing_differences(
        |x: &[f64]| {
            let l: f64 = x.iter().zip(&lgd).filter(|(v, _)| **v >= 0.0).map(|(_, l)| l).sum();
            (l - attachment).max(0.0)
        },
        &grid,
        0.0,
    )?;
    Ok(PropertyOutcome::new(format!("senior payoff (L - {attachment})^+, n={n}"), true, &r))
}

pub fn negative_control() -> Result<PropertyOutcome> {
    let grid = GridSpec::uniform(&[-1.0, 0.0, 1.0], 2)?;
    let r = check_increasing_differences(|x: &[f64]| -x[0] * x[1], &grid, 0.0)?;
    Ok(PropertyOutcome::new("negative control -xy".into(), false, &r))
}

/// The whole suite: allocations up to `n = 6`, losses up to `n = 3`, senior
/// payoffs, the `xy` control and its negation.
pub fn run_suite(seed: u64) -> Result<Vec<PropertyOutcome>> {
    let mut out = allocation_certificates(6, seed)?;
    for n in 1..=3 {
        out.push(loss_certificate(n, seed)?);
    }
    for a in [0.0, 2.5, 6.0] {
        out.push(senior_payoff_certificate(4, a)?);
    }
    let grid = GridSpec::uniform(&[-1.0, 0.0, 1.0], 2)?;
    let r = check_increasing_differences(|x: &[f64]| x[0] * x[1], &grid, 0.0)?;
    out.push(PropertyOutcome::new("positive control xy".into(), true, &r));
    out.push(negative_control()?);
    Ok(out)
}
