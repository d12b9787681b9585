mod common;

use covloss::config::RunConfig;
use covloss::orchestrator::risk_report;
use covloss::risk::{
    batch_statistics, cecl, economic_capital, empirical_var, expected_shortfall, survival_weights, var_and_es,
    WeightedSample,
};
use covloss::special::{normal_cdf, normal_pdf, normal_quantile};
use covloss::Error;
use proptest::prelude::*;

use common::simpson;

fn uniform(values: Vec<f64>) -> WeightedSample {
    WeightedSample::uniform(values).unwrap()
}

#[test]
fn worked_var_es_examples() {
    let s = uniform((1..=100).map(f64::from).collect());
    assert_eq!(empirical_var(&s, 0.95).unwrap(), 96.0);
    assert!((expected_shortfall(&s, 0.95).unwrap() - 98.0).abs() < 1e-12);

    let atom = WeightedSample::new(vec![0.0, 100.0], vec![0.99, 0.01]).unwrap();
    assert_eq!(empirical_var(&atom, 0.995).unwrap(), 100.0);
    // (1 + 100 (0.99 - 0.995)) / 0.005
    assert!((expected_shortfall(&atom, 0.995).unwrap() - 100.0).abs() < 1e-12);

    let c = uniform(vec![3.25; 17]);
    assert_eq!(var_and_es(&c, 0.99).unwrap(), (3.25, 3.25));
}

#[test]
fn estimator_errors() {
    assert!(matches!(WeightedSample::uniform(vec![]), Err(Error::EmptySample)));
    assert!(WeightedSample::new(vec![1.0, 2.0], vec![0.5, 0.6]).is_err());
    assert!(matches!(survival_weights(&[1.0, 2.0], 0.0, 0.1), Err(Error::NoSurvivors)));
    assert!(matches!(batch_statistics(&[1.0]), Err(Error::TooFewBatches(1))));
}

#[test]
fn survival_weights_renormalize() {
    let x0 = [-1.0, 2.0, -0.5, 3.0];
    let w = survival_weights(&x0, 0.0, 0.3).unwrap();
    assert_eq!(w, vec![0.5, 0.0, 0.5, 0.0]);
    let losses = [4.0, 100.0, 6.0, 100.0];
    assert_eq!(cecl(&losses, &w).unwrap(), 5.0);
}

#[test]
fn batch_statistics_by_hand() {
    let (mean, se) = batch_statistics(&[1.0, 2.0, 3.0]).unwrap();
    assert_eq!(mean, 2.0);
    assert!((se - 1.0 / 3f64.sqrt()).abs() < 1e-15);
    assert_eq!(batch_statistics(&[4.0; 10]).unwrap(), (4.0, 0.0));
}

#[test]
fn continuous_sample_es_is_tail_mean() {
    let values: Vec<f64> = (0..1000).map(|k| ((k * 7919) % 1000) as f64 * 0.37 + 0.01).collect();
    let s = uniform(values.clone());
    let var = empirical_var(&s, 0.99).unwrap();
    let tail: Vec<f64> = values.iter().copied().filter(|v| *v >= var).collect();
    let tail_mean = tail.iter().sum::<f64>() / tail.len() as f64;
    assert!((expected_shortfall(&s, 0.99).unwrap() - tail_mean).abs() < 1e-12);
}

/// `E[(Z - k)^+]` for `Z ~ N(mu, v^2)`.
fn bachelier(mu: f64, v: f64, k: f64) -> f64 {
    let d = (mu - k) / v;
    (mu - k) * normal_cdf(d) + v * normal_pdf(d)
}

fn two_member_config(lambda_bps: [f64; 2], n_paths: usize) -> RunConfig {
    RunConfig::from_json(&format!(
        r#"{{
        "model": {{"nu": null, "rho_mkt": 0.04, "delta_s_days": 2, "delta_l_days": 5, "horizon": 5}},
        "grid": {{"rho_cr": {{"start": 0, "stop": 0, "step": 0.05}}, "rho_wwr": {{"start": 0.6, "stop": 0.6, "step": 0.05}}}},
        "members": [
            {{"id": 0, "lambda_bps": {}, "size": 100, "vol_pct": 20}},
            {{"id": 1, "lambda_bps": {}, "size": -100, "vol_pct": 150}}
        ],
        "margin": {{"alpha_im": 0.95, "alpha_stress": 0.97}},
        "alpha_ec": 0.9975,
        "n_paths": {n_paths},
        "n_batches": 40,
        "seed": 5,
        "reference_members": [0]
    }}"#,
        lambda_bps[0], lambda_bps[1]
    ))
    .unwrap()
}

#[test]
fn gaussian_two_member_cecl_matches_quadrature() {
    let cfg = two_member_config([100.0, 2000.0], 400_000);
    let report = &risk_report(&cfg, 0.0, 0.6).unwrap()[0];

    // With rho_cr = 0 the reference is independent of member 1 and carries
    // beta = 0, so CECL = E[1{X_1 >= B_1} (Y_1 - m_1)^+] with
    // Y_1 | X_1 = x ~ N(s rho x, s^2 (1 - rho^2)).
    let rho: f64 = 0.6;
    let s = 100.0 * 1.5 * (5.0f64 / 252.0).sqrt();
    let m = 100.0 * 1.5 * (2.0f64 / 252.0).sqrt() * normal_quantile(0.97);
    let b = normal_quantile((-0.2f64 * 5.0).exp());
    let oracle = simpson(|x| normal_pdf(x) * bachelier(s * rho * x, s * (1.0 - rho * rho).sqrt(), m), b, 12.0, 20_000);
    assert!(
        (report.cecl - oracle).abs() < 3.0 * report.cecl_se,
        "CECL {} +- {} vs oracle {oracle}",
        report.cecl,
        report.cecl_se
    );
    assert!(report.ec >= report.cecl && report.ec >= report.var);
}

#[test]
fn no_default_means_no_loss() {
    let cfg = two_member_config([0.0, 0.0], 20_000);
    let report = &risk_report(&cfg, 0.0, 0.6).unwrap()[0];
    assert_eq!((report.cecl, report.ec, report.var), (0.0, 0.0, 0.0));
    assert_eq!(report.cecl_se, 0.0);
}

fn sample_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (2usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(-50.0f64..50.0, n),
            prop::collection::vec(-50.0f64..50.0, n),
            prop::collection::vec(0.01f64..1.0, n),
        )
    })
}

fn weighted(values: Vec<f64>, raw: &[f64]) -> WeightedSample {
    let total: f64 = raw.iter().sum();
    WeightedSample::new(values, raw.iter().map(|w| w / total).collect()).unwrap()
}

proptest! {
    #[test]
    fn es_is_coherent((x, y, w) in sample_strategy(), alpha in 0.5f64..0.99, c in 0.1f64..10.0, shift in -20.0f64..20.0) {
        let es = |v: Vec<f64>| expected_shortfall(&weighted(v, &w), alpha).unwrap();
        let ex = es(x.clone());
        let ey = es(y.clone());
        let tol = 1e-9 * (1.0 + ex.abs() + ey.abs());
        prop_assert!(es(x.iter().zip(&y).map(|(a, b)| a + b).collect()) <= ex + ey + tol);
        prop_assert!((es(x.iter().map(|a| c * a).collect()) - c * ex).abs() <= tol * c);
        prop_assert!((es(x.iter().map(|a| a + shift).collect()) - ex - shift).abs() <= tol + 1e-9 * shift.abs());
        let upper: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a.max(*b)).collect();
        prop_assert!(es(upper) >= ex - tol);
        let var = empirical_var(&weighted(x.clone(), &w), alpha).unwrap();
        prop_assert!(ex >= var - tol);
    }

    #[test]
    fn cecl_equals_survivor_mean(losses in prop::collection::vec(0.0f64..10.0, 1..60), x0 in prop::collection::vec(-2.0f64..2.0, 60)) {
        let x0 = &x0[..losses.len()];
        prop_assume!(x0.iter().any(|x| *x < 0.0));
        let w = survival_weights(x0, 0.0, 0.2).unwrap();
        let kept: Vec<f64> = losses.iter().zip(x0).filter(|(_, x)| **x < 0.0).map(|(l, _)| *l).collect();
        let plain = kept.iter().sum::<f64>() / kept.len() as f64;
        prop_assert!((cecl(&losses, &w).unwrap() - plain).abs() <= 1e-12 * (1.0 + plain));
        prop_assert!(economic_capital(&losses, &w, 0.9).unwrap() >= cecl(&losses, &w).unwrap() - 1e-12);
    }
}
