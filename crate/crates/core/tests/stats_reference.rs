//! Reference values computed with scipy 1.x and brute-force sign enumeration,
//! then frozen.

use approx::assert_abs_diff_eq;
use seen_core::stats::{paired_t_test, paired_tests, wilcoxon_signed_rank};

/// Student's sleep data: extra hours of sleep, drug 2 minus drug 1.
const SLEEP_DIFF: [f64; 10] = [1.2, 2.4, 1.3, 1.3, 0.0, 1.0, 1.8, 0.8, 4.6, 1.4];

#[test]
fn t_test_on_sleep_data() {
    let r = paired_t_test(&[0.0; 10], &SLEEP_DIFF).unwrap();
    assert_abs_diff_eq!(r.statistic, 4.062127683382037, epsilon = 1e-9);
    assert_abs_diff_eq!(r.p_value, 0.001416445098692135, epsilon = 1e-9);
    assert_eq!(r.n, 10);
}

#[test]
fn t_test_mixed_signs() {
    let base = [0.71, 0.65, 0.80, 0.74, 0.69, 0.77, 0.72, 0.68];
    let treated = [0.75, 0.64, 0.86, 0.79, 0.69, 0.81, 0.70, 0.73];
    let r = paired_t_test(&base, &treated).unwrap();
    assert_abs_diff_eq!(r.statistic, 2.384341182156651, epsilon = 1e-9);
    assert_abs_diff_eq!(r.p_value, 0.02428556710127098, epsilon = 1e-9);
}

#[test]
fn wilcoxon_exact_on_sleep_data() {
    // One zero dropped, nine positive differences: only the all-positive
    // sign pattern reaches W+ = 45.
    let r = wilcoxon_signed_rank(&[0.0; 10], &SLEEP_DIFF).unwrap();
    assert_eq!(r.n, 9);
    assert_eq!(r.statistic, 45.0);
    assert_abs_diff_eq!(r.p_value, 1.0 / 512.0, epsilon = 1e-15);
}

#[test]
fn wilcoxon_exact_with_ties_and_negatives() {
    let d = [3.0, -1.0, 5.0, 4.0, 3.0, -2.0, 4.0, 1.0, -3.0, 0.0, 6.0];
    let r = wilcoxon_signed_rank(&[0.0; 11], &d).unwrap();
    assert_eq!(r.n, 10);
    assert_eq!(r.statistic, 45.5);
    assert_abs_diff_eq!(r.p_value, 36.0 / 1024.0, epsilon = 1e-15);
}

#[test]
fn wilcoxon_normal_approximation_for_large_samples() {
    let d = [
        2.3, -2.3, 0.7, -0.3, -0.2, 0.1, -1.7, 0.1, -0.6, 3.6, 0.5, -0.1, 0.0, -0.4, -0.8, -0.1, 0.8, 0.1, 1.3, 0.1,
        0.3, 1.8, 0.8, -0.2, 0.1, 0.8, 2.2, 0.0, 0.1, 1.3, -0.6, 0.0, 1.2, 0.9, 0.4, 1.0, -2.5, 1.3, -0.7, -1.4,
    ];
    let r = wilcoxon_signed_rank(&[0.0; 40], &d).unwrap();
    assert_eq!(r.n, 37);
    assert_eq!(r.statistic, 445.5);
    assert_abs_diff_eq!(r.p_value, 0.07887798920609168, epsilon = 1e-9);
}

#[test]
fn p_values_stay_in_unit_interval() {
    let base = [0.5, 0.6, 0.7, 0.8, 0.9, 0.4];
    for shift in [-1.0, -0.01, 0.0, 0.01, 1.0] {
        let treated: Vec<f64> = base.iter().enumerate().map(|(i, b)| b + shift + 0.001 * i as f64).collect();
        let r = paired_tests(&base, &treated).unwrap();
        assert!((0.0..=1.0).contains(&r.t_test.p_value));
        if let Some(w) = r.wilcoxon {
            assert!((0.0..=1.0).contains(&w.p_value));
        }
    }
}
