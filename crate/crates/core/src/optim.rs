//! One-dimensional golden-section search.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Minimizer of `f` on `[a, b]`, assuming unimodality. Stops after `max_iter`
/// shrinks or once the bracket is narrower than `tol`. The endpoints are
/// compared against the interior estimate so monotone objectives are handled.
pub fn golden_min(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, max_iter: usize) -> f64 {
    let (mut a, mut b) = (a, b);
    let (lo, hi) = (a, b);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..max_iter {
        if (b - a).abs() < tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    let mut best = (mid, f(mid));
    for x in [lo, hi] {
        let v = f(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    best.0
}

/// Maximizer of `f` on `[a, b]`, assuming unimodality.
pub fn golden_max(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, max_iter: usize) -> f64 {
    golden_min(|x| -f(x), a, b, tol, max_iter)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_and_boundary_optima() {
        let x = golden_min(|x| (x - 0.3).powi(2), -1.0, 2.0, 1e-12, 200);
        assert!((x - 0.3).abs() < 1e-8);
        let x = golden_min(|x| x, -1.0, 2.0, 1e-12, 200);
        assert_eq!(x, -1.0);
        let x = golden_max(|x| -(x + 0.5).abs(), -1.0, 2.0, 1e-12, 200);
        assert!((x + 0.5).abs() < 1e-9);
    }
}
