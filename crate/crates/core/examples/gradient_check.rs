//! Finite-difference audit of the analytic training gradient, plus the
//! negative control with the gradient sign flipped.
//!
//! cargo run --release --example gradient_check

use mtl_prognostics::training::gradient_check_mini;

fn main() -> mtl_prognostics::Result<()> {
    for flip in [false, true] {
        let r = gradient_check_mini(2024, flip)?;
        println!(
            "{}: {} coordinates, max relative error {:.3e} at {} -> {}",
            if flip { "sign flipped" } else { "analytic" },
            r.coords_checked,
            r.max_relative_error,
            r.worst_tensor,
            if r.passed { "PASS" } else { "FAIL" }
        );
    }
    Ok(())
}
