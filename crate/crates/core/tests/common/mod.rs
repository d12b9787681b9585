#![allow(dead_code)]

use std::path::PathBuf;

use covloss::ccp::{compute_cover2_and_df, ClearingSetup, MemberSpec};
use covloss::config::{CdoRunConfig, RunConfig};
use covloss::elliptical::FactorModel;

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

pub fn table23() -> RunConfig {
    RunConfig::load(&config_path("table23.json")).unwrap()
}

pub fn table4() -> CdoRunConfig {
    CdoRunConfig::load(&config_path("table4.json")).unwrap()
}

pub fn table23_setup() -> (RunConfig, FactorModel, Vec<MemberSpec>, ClearingSetup) {
    let cfg = table23();
    let model = cfg.factor_model();
    let members = cfg.member_specs().unwrap();
    let setup = compute_cover2_and_df(&members, &cfg.margin, &model, cfg.df_allocation).unwrap();
    (cfg, model, members, setup)
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

pub fn mean_cov(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0)
}
