mod common;

use approx::assert_relative_eq;
use covloss::ccp::{ClearingSetup, MemberSpec};
use covloss::elliptical::{sample_batch, ScenarioBatch};
use covloss::loss::{
    allocation_coefficient, ccp_loss_spec, generic_loss, member_loss, DefaultIndicator, ExcessOverCollateral, LossSpec,
};
use covloss::rng::{StreamDomain, Substream};
use covloss::Error;
use proptest::prelude::*;

use common::table23_setup;

fn toy_setup() -> ClearingSetup {
    let members = (0..3).map(|id| MemberSpec { id, lambda: 0.01, nom: 1.0, sigma: 0.1 }).collect();
    ClearingSetup {
        members,
        im: vec![1.0, 1.0, 1.0],
        sloim: vec![0.5, 1.0, 2.0],
        df: vec![1.0, 2.0, 4.0],
        cover2: 7.0,
        thresholds: vec![0.0, 0.0, 0.0],
        default_prob: vec![0.05, 0.05, 0.05],
    }
}

#[test]
fn hand_evaluated_paths() {
    let setup = toy_setup();
    let x = vec![-1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0];
    let y = vec![0.0, 10.0, 100.0, 0.0, 10.0, 3.0, 50.0, 50.0, 50.0, 50.0, 4.0, 9.0];
    let batch = ScenarioBatch::from_parts(3, x, y, vec![1.0; 4]).unwrap();
    let loss = member_loss(&batch, &setup, 0, true).unwrap();
    // path 0: member 1 defaults, member 2 survives with beta 4: (10 - 3) / 5
    // path 1: both default, nobody left to share: 7 + 0
    // path 2: no default among the others
    // path 3: the reference defaults too; it carries beta 0 and is excluded from the sum
    for (got, want) in loss.total.iter().zip([1.4, 7.0, 0.0, 5.0]) {
        assert_relative_eq!(*got, want, max_relative = 1e-15);
    }
    let c = loss.contributions.unwrap();
    assert_eq!(&c[9..12], &[0.0, 1.0, 4.0]);
}

#[test]
fn generic_and_specialized_routes_agree_bitwise() {
    let (_, model, members, setup) = table23_setup();
    let model = model.with_correlations(0.5, 0.3);
    let batch = sample_batch(&model, &members, 20_000, Substream::new(8, StreamDomain::CcpFactors, 0)).unwrap();
    for r in [0, 5, 10, 19] {
        let fast = member_loss(&batch, &setup, r, true).unwrap();
        let slow = generic_loss(&batch, &ccp_loss_spec(&setup, r).unwrap(), true).unwrap();
        assert_eq!(fast, slow, "reference {r}");
        assert!(fast.total.iter().any(|l| *l > 0.0));
        assert!(fast.total.iter().all(|l| *l >= 0.0));
    }
}

#[test]
fn bilateral_spec_has_no_sharing() {
    let setup = toy_setup();
    let spec = LossSpec {
        allocation: DefaultIndicator { thresholds: setup.thresholds.clone() },
        severity: ExcessOverCollateral { collateral: setup.collateral() },
        members: vec![1, 2],
    };
    assert_eq!(spec.evaluate(&[-1.0, 1.0, -1.0], &[0.0, 10.0, 100.0]), 7.0);
    let closure =
        LossSpec { allocation: |_: usize, _: &[f64]| 0.5, severity: |_: usize, y: f64| y, members: vec![0, 2] };
    assert_eq!(closure.evaluate(&[0.0; 3], &[2.0, 9.0, 4.0]), 3.0);
}

#[test]
fn loss_errors() {
    let mut setup = toy_setup();
    let batch = ScenarioBatch::from_parts(2, vec![0.0; 2], vec![0.0; 2], vec![1.0]).unwrap();
    assert!(matches!(member_loss(&batch, &setup, 0, false), Err(Error::DimensionMismatch(_))));
    setup.df[0] = 0.0;
    let batch = ScenarioBatch::from_parts(3, vec![0.0; 3], vec![0.0; 3], vec![1.0]).unwrap();
    assert!(matches!(member_loss(&batch, &setup, 0, false), Err(Error::ZeroReferenceDefaultFund(0))));
    assert!(ScenarioBatch::from_parts(3, vec![0.0; 2], vec![0.0; 3], vec![1.0]).is_err());
}

fn toy_loss(x: &[f64], y: &[f64]) -> f64 {
    let setup = toy_setup();
    let batch = ScenarioBatch::from_parts(3, x.to_vec(), y.to_vec(), vec![1.0]).unwrap();
    member_loss(&batch, &setup, 0, false).unwrap().total[0]
}

proptest! {
    #[test]
    fn loss_is_nonnegative_and_monotone(
        x in prop::collection::vec(-3.0f64..3.0, 3),
        y in prop::collection::vec(-20.0f64..20.0, 3),
        k in 0usize..3,
        bump in 0.0f64..5.0,
    ) {
        let base = toy_loss(&x, &y);
        prop_assert!(base >= 0.0);
        let mut x2 = x.clone();
        x2[k] += bump;
        prop_assert!(toy_loss(&x2, &y) >= base);
        let mut y2 = y.clone();
        y2[k] += bump;
        prop_assert!(toy_loss(&x, &y2) >= base);
    }

    #[test]
    fn coefficients_lie_in_unit_interval(
        x in prop::collection::vec(-3.0f64..3.0, 5),
        betas in prop::collection::vec(0.0f64..4.0, 5),
    ) {
        let thresholds = [0.0, 0.5, -0.5, 1.0, -1.0];
        for i in 0..5 {
            let f = allocation_coefficient(i, &x, &betas, &thresholds);
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert_eq!(f > 0.0, x[i] >= thresholds[i]);
        }
    }
}
