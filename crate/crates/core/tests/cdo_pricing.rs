// reference values keep all their digits
#![allow(clippy::excessive_precision)]

mod common;

use covloss::cdo::{
    default_thresholds, expected_loss, leg_payoffs, max_loss, parity_gap, price_legs, simulate_loss_paths, LossPaths,
    ObligorSpec, TrancheSpec,
};
use covloss::elliptical::LatentLaw;
use covloss::special::{normal_cdf, normal_pdf, normal_quantile};
use covloss::Error;

use common::{simpson, table4};

#[test]
fn first_obligor_threshold() {
    let cfg = table4();
    let b = default_thresholds(&cfg.obligor_specs(), cfg.law(), &[5.0]).unwrap();
    // t5 quantile of exp(-0.1), 40 digits
    assert!((b[0][0] - 1.514499415920586563270083775867273500367).abs() < 1e-12, "{}", b[0][0]);
    assert_eq!(b.len(), 30);
    let zero = ObligorSpec { notional: 1.0, recovery: 0.4, lambda: 0.0 };
    assert_eq!(default_thresholds(&[zero], cfg.law(), &[1.0, 2.0]).unwrap()[0], vec![f64::INFINITY; 2]);
}

#[test]
fn table_four_portfolio_totals() {
    let obligors = table4().obligor_specs();
    let l_max = max_loss(&obligors);
    let by_hand: f64 = obligors.iter().map(|o| o.notional * (1.0 - o.recovery)).sum();
    assert!((l_max - by_hand).abs() < 1e-9);
    assert!(expected_loss(&obligors, 5.0) < l_max);
}

#[test]
fn hand_priced_legs() {
    let paths = LossPaths::from_parts(vec![2.5, 5.0], vec![3.0, 8.0]).unwrap();
    let price = |t: TrancheSpec| leg_payoffs(&paths, &t, 20.0).map(|(d, p)| (d[0], p[0])).unwrap();
    assert_eq!(price(TrancheSpec::equity(5.0, 0.1, 2, 5.0)), (5.0, 0.5));
    assert_eq!(price(TrancheSpec::senior(5.0, 20.0, 0.1, 2, 5.0)), (3.0, 6.75));
    let (d, p) = price(TrancheSpec::mezzanine(5.0, 10.0, 0.1, 2, 5.0));
    assert_eq!(d, 3.0);
    // outstanding 5 then 2, each coupon s * 2.5
    assert!((p - 1.75).abs() < 1e-15);
}

#[test]
fn tranche_bounds_and_schedule_are_checked() {
    let paths = LossPaths::from_parts(vec![5.0], vec![1.0]).unwrap();
    assert!(leg_payoffs(&paths, &TrancheSpec::equity(30.0, 0.1, 1, 5.0), 20.0).is_err());
    assert!(matches!(
        leg_payoffs(&paths, &TrancheSpec::equity(5.0, 0.1, 2, 5.0), 20.0),
        Err(Error::DimensionMismatch(_))
    ));
    assert!(LossPaths::from_parts(vec![1.0, 2.0], vec![0.0; 3]).is_err());
    let bad = ObligorSpec { notional: 1.0, recovery: 1.5, lambda: 0.1 };
    assert!(default_thresholds(&[bad], LatentLaw::Gaussian, &[1.0]).is_err());
}

#[test]
fn parity_and_decomposition_hold_pathwise() {
    let cfg = table4();
    let obligors = cfg.obligor_specs();
    let l_max = max_loss(&obligors);
    let paths = simulate_loss_paths(&obligors, cfg.law(), 0.3, &[1.25, 2.5, 3.75, 5.0], 20_000, 10, 4).unwrap();
    for frac in [0.05, 0.1, 0.3, 0.9] {
        let b = frac * l_max;
        assert!(parity_gap(&paths, b, l_max) <= 1e-12);
        let (eq, _) = leg_payoffs(&paths, &TrancheSpec::equity(b, 0.1, 4, 5.0), l_max).unwrap();
        let (sn, _) = leg_payoffs(&paths, &TrancheSpec::senior(b, l_max, 0.1, 4, 5.0), l_max).unwrap();
        for ((e, s), l) in eq.iter().zip(&sn).zip(paths.terminal()) {
            assert!((e + s - l).abs() <= 1e-12 * l_max);
        }
    }
    let (a, b) = (0.05 * l_max, 0.15 * l_max);
    let mezz = TrancheSpec::mezzanine(a, b, 0.1, 4, 5.0);
    let sa = TrancheSpec::senior(a, l_max, 0.1, 4, 5.0);
    let sb = TrancheSpec::senior(b, l_max, 0.1, 4, 5.0);
    let (md, mp) = leg_payoffs(&paths, &mezz, l_max).unwrap();
    let (ad, ap) = leg_payoffs(&paths, &sa, l_max).unwrap();
    let (bd, bp) = leg_payoffs(&paths, &sb, l_max).unwrap();
    for k in 0..md.len() {
        assert_eq!(md[k], ad[k] - bd[k]);
        assert_eq!(mp[k], ap[k] - bp[k]);
    }
    let (pm, pa, pb) = (
        price_legs(&paths, &mezz, l_max).unwrap(),
        price_legs(&paths, &sa, l_max).unwrap(),
        price_legs(&paths, &sb, l_max).unwrap(),
    );
    assert!((pm.default_leg - (pa.default_leg - pb.default_leg)).abs() <= 1e-12 * l_max);
    assert!((pm.payment_leg - (pa.payment_leg - pb.payment_leg)).abs() <= 1e-12 * l_max);
}

#[test]
fn expected_loss_is_free_of_correlation() {
    let cfg = table4();
    let obligors = cfg.obligor_specs();
    let theory = expected_loss(&obligors, 5.0);
    for rho in [0.05, 0.5, 0.95] {
        let paths = simulate_loss_paths(&obligors, cfg.law(), rho, &[5.0], 50_000, 10, 9).unwrap();
        let l = paths.terminal();
        let n = l.len() as f64;
        let mean = l.iter().sum::<f64>() / n;
        let se = (l.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        assert!((mean - theory).abs() < 3.0 * se, "rho {rho}: {mean} +- {se} vs {theory}");
    }
}

#[test]
fn single_obligor_prices_do_not_depend_on_correlation() {
    let one = [ObligorSpec { notional: 100.0, recovery: 0.4, lambda: 0.05 }];
    let t = TrancheSpec::equity(30.0, 0.1, 1, 5.0);
    let base = price_legs(
        &simulate_loss_paths(&one, LatentLaw::StudentT { nu: 5.0 }, 0.05, &[5.0], 100_000, 10, 2).unwrap(),
        &t,
        60.0,
    )
    .unwrap();
    for rho in [0.4, 0.9] {
        let p = price_legs(
            &simulate_loss_paths(&one, LatentLaw::StudentT { nu: 5.0 }, rho, &[5.0], 100_000, 10, 2).unwrap(),
            &t,
            60.0,
        )
        .unwrap();
        let se = (p.default_se.powi(2) + base.default_se.powi(2)).sqrt();
        assert!((p.default_leg - base.default_leg).abs() < 4.0 * se, "rho {rho}");
    }
}

#[test]
fn two_name_senior_leg_matches_gaussian_quadrature() {
    // Two identical names: the senior tranche attaching at one name's loss
    // pays L_1 P(both default) = L_1 int phi(t) Phi((sqrt(rho) t - B) / sqrt(1 - rho))^2 dt.
    let o = ObligorSpec { notional: 10.0, recovery: 0.4, lambda: 0.04 };
    let l1 = o.loss_given_default();
    let b = normal_quantile((-0.04f64 * 5.0).exp());
    for rho in [0.3, 0.95] {
        let paths = simulate_loss_paths(&[o, o], LatentLaw::Gaussian, rho, &[5.0], 200_000, 20, 17).unwrap();
        let p = price_legs(&paths, &TrancheSpec::senior(l1, 2.0 * l1, 0.1, 1, 5.0), 2.0 * l1).unwrap();
        let oracle = l1
            * simpson(
                |t| normal_pdf(t) * normal_cdf((rho.sqrt() * t - b) / (1.0 - rho).sqrt()).powi(2),
                -12.0,
                12.0,
                20_000,
            );
        assert!(
            (p.default_leg - oracle).abs() < 3.0 * p.default_se,
            "rho {rho}: {} +- {} vs {oracle}",
            p.default_leg,
            p.default_se
        );
    }
}
