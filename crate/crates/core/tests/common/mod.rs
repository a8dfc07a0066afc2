#![allow(dead_code)]

/// Adaptive Simpson quadrature with Richardson correction. The range is cut
/// into 256 panels first so narrow features cannot hide between samples.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    const PANELS: usize = 256;
    let h = (b - a) / PANELS as f64;
    (0..PANELS)
        .map(|i| {
            let hi = if i + 1 == PANELS { b } else { a + (i + 1) as f64 * h };
            integrate_panel(f, a + i as f64 * h, hi, tol / PANELS as f64)
        })
        .sum()
}

fn integrate_panel(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 60)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// L2 distance between two exponential densities by quadrature over
/// `[0, 50 / min(λ)]`; the neglected tail is below `e^{-100}`.
pub fn exponential_l2_by_quadrature(l1: f64, l2: f64) -> f64 {
    let f = |x: f64| {
        let g = l1 * (-l1 * x).exp() - l2 * (-l2 * x).exp();
        g * g
    };
    // Split at the fast decay scale so the peak near zero is resolved.
    let fast = 1.0 / l1.max(l2);
    let end = 50.0 / l1.min(l2);
    let mut total = 0.0;
    let mut lo = 0.0;
    for hi in [fast, 10.0 * fast, 50.0 * fast, end] {
        if hi > lo {
            total += integrate(&f, lo, hi, 1e-15);
            lo = hi;
        }
    }
    total.sqrt()
}

pub fn count_inversions(values: &[f64]) -> usize {
    values.windows(2).filter(|w| w[1] < w[0]).count()
}
