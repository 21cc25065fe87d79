use crate::error::{Error, Result};

/// Final proportion infected: the positive root of
/// `x = 1 − {1 + (λ − 1)R₀x}^{−1/(λ−1)}`, which tends to `x = 1 − e^{−R₀x}`
/// as `λ → 1`. Zero when `R₀ ≤ 1`.
pub fn final_size(r0: f64, lambda: f64) -> Result<f64> {
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::Parameter(format!(
            "R0 must be positive and finite, got {r0}"
        )));
    }
    if !(lambda >= 1.0 && lambda.is_finite()) {
        return Err(Error::Parameter(format!(
            "immunity coefficient must be at least 1, got {lambda}"
        )));
    }
    if r0 <= 1.0 {
        return Ok(0.0);
    }
    let eps = lambda - 1.0;
    // 1 − x − S(x) written with expm1 to keep precision for small x.
    let excess = |x: f64| {
        let log_s = if eps == 0.0 {
            -r0 * x
        } else {
            -(eps * r0 * x).ln_1p() / eps
        };
        -log_s.exp_m1() - x
    };
    let (mut lo, mut hi) = (1e-12, 1.0);
    if excess(lo) <= 0.0 {
        // R₀ so close to 1 that the root lies below the bracket.
        return Ok(0.0);
    }
    if excess(hi) >= 0.0 {
        return Err(Error::numerical(format!(
            "final size equation has no sign change for R0 = {r0}, lambda = {lambda}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
