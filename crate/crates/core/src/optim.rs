//! Small scalar routines shared by the oracle and the baselines.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for the maximizer of a unimodal `f` on `[a, b]`.
/// Returns `(argmax, max)`.
pub(crate) fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc >= fd {
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
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Grid scan followed by golden-section refinement around the best grid
/// cell. The result is never worse than the best grid point.
pub(crate) fn grid_then_golden_max<F: Fn(f64) -> f64>(f: F, grid: &[f64], tol: f64) -> (f64, f64) {
    debug_assert!(!grid.is_empty());
    let (best_idx, best_val) = grid
        .iter()
        .map(|&x| f(x))
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let lo = grid[best_idx.saturating_sub(1)];
    let hi = grid[(best_idx + 1).min(grid.len() - 1)];
    if hi <= lo {
        return (grid[best_idx], best_val);
    }
    let (x, v) = golden_section_max(&f, lo, hi, tol);
    if v >= best_val {
        (x, v)
    } else {
        (grid[best_idx], best_val)
    }
}
