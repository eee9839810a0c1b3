//! Central finite-difference oracle for validating jet arithmetic in tests.
//!
//! Never used on production paths: the jets are exact at truncation order and
//! need no step-size tuning, while this estimator trades truncation error
//! against round-off like any divided difference. Mixed partials up to total
//! order 6 (x-order 1 on top of y-order 5) have to clear a 1e-5 relative
//! gate, which forces a high-order stencil: round-off grows like eps/hᵏ, so
//! only an O(h⁶) formula leaves room to pick h large enough.

/// Default step for a derivative of total order `k` at `base`: balances the
/// O(h⁶) truncation of the seven-point stencil against eps/hᵏ round-off,
/// scaled by the coordinate magnitude. The factor 2 buys an extra 2ᵏ of
/// round-off headroom at the cost of 64× truncation, which the smooth test
/// catalogs have to spare.
pub fn fd_default_step(base: f64, total_order: usize) -> f64 {
    let k = total_order.max(1) as f64;
    2.0 * f64::EPSILON.powf(1.0 / (k + 6.0)) * base.abs().max(1.0)
}

/// Central finite-difference estimate of a mixed partial derivative.
///
/// `idx` is a multi-index over the coordinates of `point` (total order ≤ 6
/// is the tested range); `step` is used for every slot. Applies a
/// sixth-order seven-point stencil once per derivative order, recursively.
pub fn fd_oracle(f: &dyn Fn(&[f64]) -> f64, point: &[f64], idx: &[u8], step: f64) -> f64 {
    assert!(step > 0.0, "fd_oracle needs a positive step");
    match idx.iter().position(|&k| k > 0) {
        None => f(point),
        Some(slot) => {
            let mut reduced = idx.to_vec();
            reduced[slot] -= 1;
            let eval = |offset: f64| {
                let mut p = point.to_vec();
                p[slot] += offset;
                fd_oracle(f, &p, &reduced, step)
            };
            (-eval(-3.0 * step) + 9.0 * eval(-2.0 * step) - 45.0 * eval(-step)
                + 45.0 * eval(step)
                - 9.0 * eval(2.0 * step)
                + eval(3.0 * step))
                / (60.0 * step)
        }
    }
}
