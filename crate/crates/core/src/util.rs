//! Small numeric helpers shared across modules.

/// Format a float with 17 significant digits so CSV output round-trips
/// f64 exactly.
pub fn fmt_g17(x: f64) -> String {
    format!("{x:.16e}")
}

/// log(exp(a) + exp(b)) without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Strictly increasing log-spaced grid with exact endpoints.
/// Collapses to a single point when `lo == hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo, "log grid needs 0 < lo <= hi");
    if lo == hi || n <= 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln();
    let mut grid = Vec::with_capacity(n);
    grid.push(lo);
    for k in 1..n - 1 {
        let t = lo * (ratio * k as f64 / (n - 1) as f64).exp();
        if t > *grid.last().unwrap() && t < hi {
            grid.push(t);
        }
    }
    grid.push(hi);
    grid
}

/// Linearly spaced grid with exact endpoints.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(hi >= lo, "linear grid needs lo <= hi");
    if lo == hi || n <= 1 {
        return vec![lo];
    }
    let mut grid = Vec::with_capacity(n);
    grid.push(lo);
    for k in 1..n - 1 {
        grid.push(lo + (hi - lo) * k as f64 / (n - 1) as f64);
    }
    grid.push(hi);
    grid
}

/// Composite Simpson quadrature of `f` on [lo, hi] with `n` panels
/// (n rounded up to even).
pub fn simpson<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> f64 {
    if lo == hi {
        return 0.0;
    }
    let n = if n.is_multiple_of(2) { n.max(2) } else { n + 1 };
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + h * k as f64);
    }
    acc * h / 3.0
}

/// Least-squares line through (x, y): returns (slope, intercept, r_squared).
/// A perfect fit of a constant series reports r_squared = 1.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res = syy - slope * sxy;
    let r2 = if syy > 1e-300 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    (slope, intercept, r2)
}
