//! Grid certificates for increasing differences and monotonicity.
//!
//! A function `f: R^n -> R` has increasing differences when, for every
//! coordinate pair `(i, j)`, `x_i <= x_i'` and `x_j <= x_j'`,
//!
//! ```text
//! f(x_i', x_j') - f(x_i', x_j) - f(x_i, x_j') + f(x_i, x_j) >= 0
//! ```
//!
//! with the other coordinates held fixed. The checks here enumerate every
//! such quadruple on a finite product grid, so a pass is a certificate on
//! that grid only, not a proof on `R^n`. A non-finite value of `f` is
//! reported as an evaluation failure at the offending point.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::loss::allocation_coefficient;
use crate::rng::{StreamDomain, Substream};

/// Upper bound on function evaluations for one check.
pub const EVALUATION_GUARD: u128 = 10_000_000;

/// Product grid: one strictly increasing list of points per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    axes: Vec<Vec<f64>>,
}

impl GridSpec {
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidParameter("grid needs at least one axis".into()));
        }
        for (k, axis) in axes.iter().enumerate() {
            if axis.len() < 2 {
                return Err(Error::InvalidParameter(format!("axis {k} needs at least 2 points")));
            }
            if axis.iter().any(|v| !v.is_finite()) || axis.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidParameter(format!("axis {k} must be finite and strictly increasing")));
            }
        }
        Ok(Self { axes })
    }

    /// The same points on each of `dim` axes.
    pub fn uniform(points: &[f64], dim: usize) -> Result<Self> {
        Self::new(vec![points.to_vec(); dim])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, k: usize) -> &[f64] {
        &self.axes[k]
    }

    pub fn size(&self) -> u128 {
        self.axes.iter().map(|a| a.len() as u128).product()
    }

    fn point(&self, index: &[usize]) -> Vec<f64> {
        index.iter().enumerate().map(|(k, &i)| self.axes[k][i]).collect()
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dim()];
        for k in (0..self.dim().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.axes[k + 1].len();
        }
        strides
    }

    fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let strides = self.strides();
        strides
            .iter()
            .map(|s| {
                let i = flat / s;
                flat %= s;
                i
            })
            .collect()
    }

    fn all_integers(&self) -> bool {
        self.axes.iter().flatten().all(|v| v.fract() == 0.0)
    }
}

/// `0` on integer grids, `1e-12 * value_scale` otherwise.
pub fn default_tolerance(grid: &GridSpec, value_scale: f64) -> f64 {
    if grid.all_integers() {
        0.0
    } else {
        1e-12 * value_scale.abs()
    }
}

/// How the coordinates outside the tested pair are set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RestCoordinates {
    /// Every grid combination.
    #[default]
    Full,
    /// `count` combinations drawn uniformly from the grid with `seed`, for
    /// grids whose full product exceeds [`EVALUATION_GUARD`].
    Sampled { count: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairResult {
    pub i: usize,
    pub j: usize,
    /// Smallest difference-of-differences seen for this pair.
    pub min_difference: f64,
    /// Lower corner `(x_i, x_j, rest)` of the minimizing quadruple.
    pub witness: Vec<f64>,
    /// Upper values `(x_i', x_j')` of the minimizing quadruple.
    pub witness_upper: (f64, f64),
    pub checks: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncDiffReport {
    pub pairs: Vec<PairResult>,
    pub tol: f64,
    pub pass: bool,
}

impl IncDiffReport {
    fn from_pairs(pairs: Vec<PairResult>, tol: f64) -> Self {
        let pass = pairs.iter().all(|p| p.min_difference >= -tol);
        Self { pairs, tol, pass }
    }

    pub fn min_difference(&self) -> f64 {
        self.pairs.iter().map(|p| p.min_difference).fold(f64::INFINITY, f64::min)
    }

    pub fn worst(&self) -> Option<&PairResult> {
        self.pairs.iter().min_by(|a, b| a.min_difference.total_cmp(&b.min_difference))
    }

    pub fn checks(&self) -> u64 {
        self.pairs.iter().map(|p| p.checks).sum()
    }
}

fn evaluate_all<F: Fn(&[f64]) -> f64 + Sync>(f: &F, grid: &GridSpec) -> Result<Vec<f64>> {
    let size = grid.size();
    if size > EVALUATION_GUARD {
        return Err(Error::GridTooLarge { needed: size, limit: EVALUATION_GUARD });
    }
    (0..size as usize)
        .into_par_iter()
        .map(|flat| {
            let x = grid.point(&grid.unflatten(flat));
            let v = f(&x);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::EvaluationFailed { coords: x })
            }
        })
        .collect()
}

fn check_tol(tol: f64) -> Result<()> {
    if tol >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("tolerance {tol} must be >= 0")))
    }
}

fn pairs(dim: usize) -> Vec<(usize, usize)> {
    (0..dim).flat_map(|i| (i + 1..dim).map(move |j| (i, j))).collect()
}

/// Checks every pair with every other coordinate on the full grid.
pub fn check_increasing_differences<F: Fn(&[f64]) -> f64 + Sync>(
    f: F,
    grid: &GridSpec,
    tol: f64,
) -> Result<IncDiffReport> {
    check_increasing_differences_with(f, grid, tol, RestCoordinates::Full)
}

pub fn check_increasing_differences_with<F: Fn(&[f64]) -> f64 + Sync>(
    f: F,
    grid: &GridSpec,
    tol: f64,
    rest: RestCoordinates,
) -> Result<IncDiffReport> {
    check_tol(tol)?;
    if grid.dim() < 2 {
        return Ok(IncDiffReport::from_pairs(Vec::new(), tol));
    }
    match rest {
        RestCoordinates::Full => full_check(&f, grid, tol),
        RestCoordinates::Sampled { count, seed } => sampled_check(&f, grid, tol, count, seed),
    }
}

fn full_check<F: Fn(&[f64]) -> f64 + Sync>(f: &F, grid: &GridSpec, tol: f64) -> Result<IncDiffReport> {
    let values = evaluate_all(f, grid)?;
    let strides = grid.strides();
    let size = values.len();
    let results = pairs(grid.dim())
        .into_par_iter()
        .map(|(i, j)| {
            let (ni, nj) = (grid.axes[i].len(), grid.axes[j].len());
            let (si, sj) = (strides[i], strides[j]);
            let mut best = PairResult {
                i,
                j,
                min_difference: f64::INFINITY,
                witness: Vec::new(),
                witness_upper: (f64::NAN, f64::NAN),
                checks: 0,
            };
            for base in 0..size {
                let idx = grid.unflatten(base);
                if idx[i] != 0 || idx[j] != 0 {
                    continue;
                }
                let v = |a: usize, b: usize| values[base + a * si + b * sj];
                for a in 0..ni {
                    for a2 in a + 1..ni {
                        for b in 0..nj {
                            for b2 in b + 1..nj {
                                let d = v(a2, b2) - v(a2, b) - v(a, b2) + v(a, b);
                                best.checks += 1;
                                if d < best.min_difference {
                                    let mut corner = idx.clone();
                                    corner[i] = a;
                                    corner[j] = b;
                                    best.min_difference = d;
                                    best.witness = grid.point(&corner);
                                    best.witness_upper = (grid.axes[i][a2], grid.axes[j][b2]);
                                }
                            }
                        }
                    }
                }
            }
            best
        })
        .collect();
    Ok(IncDiffReport::from_pairs(results, tol))
}

fn sampled_check<F: Fn(&[f64]) -> f64 + Sync>(
    f: &F,
    grid: &GridSpec,
    tol: f64,
    count: usize,
    seed: u64,
) -> Result<IncDiffReport> {
    let needed: u128 =
        pairs(grid.dim()).iter().map(|&(i, j)| (grid.axes[i].len() * grid.axes[j].len()) as u128 * count as u128).sum();
    if needed > EVALUATION_GUARD {
        return Err(Error::GridTooLarge { needed, limit: EVALUATION_GUARD });
    }
    let results = pairs(grid.dim())
        .into_par_iter()
        .enumerate()
        .map(|(p, (i, j))| -> Result<PairResult> {
            let mut rng = Substream::new(seed, StreamDomain::Auxiliary, p as u64).rng();
            let (ni, nj) = (grid.axes[i].len(), grid.axes[j].len());
            let mut best = PairResult {
                i,
                j,
                min_difference: f64::INFINITY,
                witness: Vec::new(),
                witness_upper: (f64::NAN, f64::NAN),
                checks: 0,
            };
            for _ in 0..count {
                let mut idx: Vec<usize> = grid.axes.iter().map(|a| rng.random_range(0..a.len())).collect();
                let mut sub = vec![0.0; ni * nj];
                for a in 0..ni {
                    for b in 0..nj {
                        idx[i] = a;
                        idx[j] = b;
                        let x = grid.point(&idx);
                        let v = f(&x);
                        if !v.is_finite() {
                            return Err(Error::EvaluationFailed { coords: x });
                        }
                        sub[a * nj + b] = v;
                    }
                }
                let v = |a: usize, b: usize| sub[a * nj + b];
                for a in 0..ni {
                    for a2 in a + 1..ni {
                        for b in 0..nj {
                            for b2 in b + 1..nj {
                                let d = v(a2, b2) - v(a2, b) - v(a, b2) + v(a, b);
                                best.checks += 1;
                                if d < best.min_difference {
                                    idx[i] = a;
                                    idx[j] = b;
                                    best.min_difference = d;
                                    best.witness = grid.point(&idx);
                                    best.witness_upper = (grid.axes[i][a2], grid.axes[j][b2]);
                                }
                            }
                        }
                    }
                }
            }
            Ok(best)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IncDiffReport::from_pairs(results, tol))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneReport {
    /// Smallest one-step increment over all axes.
    pub min_increment: f64,
    /// Lower point and axis of the smallest increment.
    pub witness: Vec<f64>,
    pub witness_axis: usize,
    pub tol: f64,
    pub pass: bool,
}

/// Scans every one-step increment along every axis; passes iff none is
/// below `-tol`.
pub fn check_nondecreasing<F: Fn(&[f64]) -> f64 + Sync>(f: F, grid: &GridSpec, tol: f64) -> Result<MonotoneReport> {
    check_tol(tol)?;
    let values = evaluate_all(&f, grid)?;
    let strides = grid.strides();
    let mut report =
        MonotoneReport { min_increment: f64::INFINITY, witness: Vec::new(), witness_axis: 0, tol, pass: true };
    for flat in 0..values.len() {
        let idx = grid.unflatten(flat);
        for k in 0..grid.dim() {
            if idx[k] + 1 < grid.axes[k].len() {
                let inc = values[flat + strides[k]] - values[flat];
                if inc < report.min_increment {
                    report.min_increment = inc;
                    report.witness = grid.point(&idx);
                    report.witness_axis = k;
                }
            }
        }
    }
    report.pass = report.min_increment >= -tol;
    Ok(report)
}

/// Increasing-differences check of the default fund allocation coefficient
/// of member `i`. Every axis must have points on both sides of its
/// threshold, otherwise the check would be vacuous.
pub fn check_ccp_allocation_supermodular(
    betas: &[f64],
    thresholds: &[f64],
    i: usize,
    grid: &GridSpec,
    tol: f64,
) -> Result<IncDiffReport> {
    let n = grid.dim();
    if betas.len() != n || thresholds.len() != n || i >= n {
        return Err(Error::DimensionMismatch(format!(
            "grid of dimension {n}, {} betas, {} thresholds, member {i}",
            betas.len(),
            thresholds.len()
        )));
    }
    if let Some(b) = betas.iter().find(|b| !(**b >= 0.0)) {
        return Err(Error::InvalidParameter(format!("beta {b} must be >= 0")));
    }
    for (axis, &threshold) in thresholds.iter().enumerate() {
        let points = grid.axis(axis);
        if !(points.iter().any(|&p| p < threshold) && points.iter().any(|&p| p >= threshold)) {
            return Err(Error::GridNotStraddling { axis, threshold });
        }
    }
    check_increasing_differences(|x: &[f64]| allocation_coefficient(i, x, betas, thresholds), grid, tol)
}
