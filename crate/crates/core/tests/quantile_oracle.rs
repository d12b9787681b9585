//! Student-t quantiles against a 40-digit reference table.

use covloss::special::{student_t_cdf, student_t_quantile};

fn table() -> Vec<(f64, f64, f64)> {
    include_str!("data/student_t_quantiles.csv")
        .lines()
        .skip(1)
        .map(|line| {
            let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
            (cols[0], cols[1], cols[2])
        })
        .collect()
}

#[test]
fn quantile_matches_reference_table() {
    let mut worst = 0.0f64;
    for (nu, p, expected) in table() {
        let got = student_t_quantile(nu, p);
        let err = (got - expected).abs() / expected.abs().max(1.0);
        worst = worst.max(err);
        assert!(err < 1e-10, "nu={nu} p={p}: got {got}, expected {expected}, rel err {err:e}");
    }
    println!("worst relative error {worst:e}");
}

#[test]
fn cdf_matches_reference_table() {
    for (nu, p, q) in table() {
        let got = student_t_cdf(nu, q);
        assert!((got - p).abs() < 1e-12 * p.max(1e-3), "nu={nu} q={q}: cdf {got} vs {p}");
    }
}
