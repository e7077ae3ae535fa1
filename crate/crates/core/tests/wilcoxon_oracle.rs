//! Signed-rank p-values against a rank-sum distribution built by dynamic
//! programming, and the normal approximation against both.

mod common;

use redispatch::eval::{wilcoxon_signed_rank, WilcoxonMode};

#[test]
fn exact_and_asymptotic_agree_on_tie_free_samples() {
    let gap = common::wilcoxon_gap(200, 17);
    assert!(gap <= 0.03, "largest exact/asymptotic gap {gap}");
}

#[test]
fn worked_case() {
    let t = wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5], WilcoxonMode::Exact).unwrap();
    assert_eq!(t.p_value, 0.0625);
    assert!((t.z - 2.0226).abs() < 1e-3);
}

#[test]
fn affine_maps_leave_w_unchanged() {
    let a = [3.1, -0.4, 2.2, 5.0, -1.7, 0.9, 4.4];
    let b = [1.0, 0.3, 2.0, 1.1, 0.2, -0.5, 3.0];
    let base = wilcoxon_signed_rank(&a, &b, WilcoxonMode::Asymptotic).unwrap();
    let f = |v: &f64| 3.0 * v + 40.0;
    let fa: Vec<f64> = a.iter().map(f).collect();
    let fb: Vec<f64> = b.iter().map(f).collect();
    assert_eq!(wilcoxon_signed_rank(&fa, &fb, WilcoxonMode::Asymptotic).unwrap().w, base.w);
}
