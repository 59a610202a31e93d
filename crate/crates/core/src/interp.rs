//! Cubic Hermite interpolation on a single interval.

/// Hermite basis weights `(h00, h10, h01, h11)` at fractional position `s` in `[0, 1]`.
#[inline]
pub(crate) fn hermite_weights(s: f64) -> (f64, f64, f64, f64) {
    let s2 = s * s;
    let s3 = s2 * s;
    (
        2.0 * s3 - 3.0 * s2 + 1.0,
        s3 - 2.0 * s2 + s,
        -2.0 * s3 + 3.0 * s2,
        s3 - s2,
    )
}

/// Interpolates `N` components between `(x0, y0, m0)` and `(x1, y1, m1)`, where
/// `m` are the slopes `dy/dx` at the nodes.
#[inline]
pub(crate) fn hermite<const N: usize>(
    x0: f64,
    x1: f64,
    y0: &[f64; N],
    m0: &[f64; N],
    y1: &[f64; N],
    m1: &[f64; N],
    x: f64,
) -> [f64; N] {
    let h = x1 - x0;
    let s = (x - x0) / h;
    let (h00, h10, h01, h11) = hermite_weights(s);
    std::array::from_fn(|k| h00 * y0[k] + h10 * h * m0[k] + h01 * y1[k] + h11 * h * m1[k])
}

/// Index `i` of the interval `[nodes[i], nodes[i + 1]]` containing `x`.
/// `nodes` must be strictly increasing with at least two entries.
pub(crate) fn bracket(nodes: &[f64], x: f64) -> usize {
    let last = nodes.len() - 2;
    match nodes.binary_search_by(|v| v.total_cmp(&x)) {
        Ok(i) => i.min(last),
        Err(i) => i.saturating_sub(1).min(last),
    }
}
