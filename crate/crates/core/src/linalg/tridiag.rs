//! Real symmetric tridiagonal eigenvalues by Sturm-sequence bisection.

/// Number of eigenvalues strictly below `x` of the symmetric tridiagonal matrix
/// with diagonal `d` and off-diagonal `e` (`e.len() == d.len() - 1`).
pub fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..d.len() {
        let off = if i == 0 { 0.0 } else { e[i - 1] * e[i - 1] };
        q = d[i] - x - if i == 0 { 0.0 } else { off / q };
        if q == 0.0 {
            q = -f64::EPSILON * (d[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// All eigenvalues below `x_max`, ascending, each to absolute accuracy `tol`.
pub fn eigenvalues_below(d: &[f64], e: &[f64], x_max: f64, tol: f64) -> Vec<f64> {
    assert_eq!(e.len() + 1, d.len().max(1));
    let n = d.len();
    if n == 0 {
        return Vec::new();
    }
    // Gershgorin lower bound
    let lo = (0..n)
        .map(|i| {
            let r = if i > 0 { e[i - 1].abs() } else { 0.0 } + if i + 1 < n { e[i].abs() } else { 0.0 };
            d[i] - r
        })
        .fold(f64::INFINITY, f64::min);
    let total = sturm_count(d, e, x_max);
    (0..total)
        .map(|k| {
            // the k-th eigenvalue is the smallest x with count(x) > k
            let (mut a, mut b) = (lo - 1.0, x_max);
            while b - a > tol.max(f64::EPSILON * (a.abs() + b.abs())) {
                let mid = 0.5 * (a + b);
                if sturm_count(d, e, mid) > k {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}
