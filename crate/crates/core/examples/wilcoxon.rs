//! Signed-rank test on a textbook sample, exact and normal approximation.
//!
//! cargo run --example wilcoxon

use redispatch::eval::{wilcoxon_signed_rank, WilcoxonMode};

fn main() -> redispatch::Result<()> {
    let actual = [1.0, 2.0, 3.0, 4.0, 5.0];
    let predicted = [0.0; 5];
    for mode in [WilcoxonMode::Exact, WilcoxonMode::Asymptotic] {
        let t = wilcoxon_signed_rank(&actual, &predicted, mode)?;
        println!("{mode:?}: W = {}, z = {:.4}, p = {:.4}", t.w, t.z, t.p_value);
    }
    Ok(())
}
