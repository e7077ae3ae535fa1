//! Backpropagation checked against central finite differences of an
//! independent forward pass written from the documented parameter layout.

mod common;

#[test]
fn analytic_gradients_match_central_differences() {
    let r = common::gradient_check(600, 11);
    assert!(r.checked.iter().all(|&c| c >= 100), "networks checked per activation: {:?}", r.checked);
    assert!(r.worst <= 1e-5, "worst relative error {:.3e}", r.worst);
}
