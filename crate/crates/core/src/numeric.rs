//! Shared numeric machinery: harmonic numbers, adaptive quadrature,
//! bracketed root finding and 1-d maximization, and a small least-squares
//! helper. Everything here is deterministic and allocation-light.

use crate::error::{Error, Result};

/// n-th harmonic number H_n = sum_{i=1}^n 1/i.
///
/// Exact summation up to 2^21 terms, Euler-Maclaurin beyond that
/// (error below 1e-15 for n > 2^21).
pub fn harmonic(n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    if n <= (1 << 21) {
        // Sum smallest terms first.
        let mut h = 0.0;
        for k in (1..=n).rev() {
            h += 1.0 / k as f64;
        }
        h
    } else {
        let x = n as f64;
        x.ln() + EULER_GAMMA + 1.0 / (2.0 * x) - 1.0 / (12.0 * x * x)
            + 1.0 / (120.0 * x.powi(4))
    }
}

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
///
/// Recursion stops when the local Richardson error estimate is below the
/// interval's share of `tol`, or at depth 50.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if b.is_nan() || a.is_nan() || b <= a {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    adaptive(f, a, b, fa, fm, fb, whole, tol, 50)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
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
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Root of `f(x) = target` for non-increasing `f` on `[lo, hi]` by bisection.
///
/// Stops at `x_tol` width or when `|f - target| <= f_tol`. If the target is
/// not bracketed, returns the nearer endpoint.
pub fn bisect_decreasing<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    target: f64,
    x_tol: f64,
    f_tol: f64,
) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    if f(lo) <= target {
        return lo;
    }
    if f(hi) >= target {
        return hi;
    }
    for _ in 0..200 {
        if hi - lo <= x_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let v = f(mid);
        if (v - target).abs() <= f_tol {
            return mid;
        }
        if v > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Inverts a CDF by bisection: finds `x` in `[lo, hi]` with `F(x) = q`.
///
/// Terminates at absolute 1e-10 in `x` or 1e-12 in probability, whichever
/// comes first; downstream price ladders compound quantile errors across
/// many steps, hence the tight budget.
pub fn invert_cdf_bisect<F: Fn(f64) -> f64>(cdf: &F, lo: f64, hi: f64, q: f64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..200 {
        if hi - lo <= 1e-10 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let v = cdf(mid);
        if (v - q).abs() <= 1e-12 {
            return mid;
        }
        if v < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Golden-section maximization of a unimodal `f` on `[a, b]`.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, x_tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (a, b);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > x_tol {
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

/// Ordinary least squares of `y ~ intercept + slope * x`.
///
/// Returns `(intercept, slope, r_squared)`. A degenerate design (all x
/// equal) is a numeric error.
pub fn fit_affine(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::numeric("least squares needs >= 2 points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let x_scale: f64 = xs.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
    if sxx <= 1e-12 * x_scale || !sxx.is_finite() {
        return Err(Error::numeric("degenerate design matrix in least squares"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let r2 = if ss_tot <= f64::EPSILON * n {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok((intercept, slope, r2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_small_values() {
        assert_eq!(harmonic(0), 0.0);
        assert_eq!(harmonic(1), 1.0);
        assert!((harmonic(2) - 1.5).abs() < 1e-15);
        assert!((harmonic(5) - 137.0 / 60.0).abs() < 1e-14);
        assert!((harmonic(1000) - 7.485470860550343).abs() < 1e-12);
    }

    #[test]
    fn harmonic_asymptotic_branch_is_continuous() {
        // Exact sum at the switch point vs the asymptotic formula just above.
        let n = 1 << 21;
        let exact = harmonic(n);
        let x = n as f64;
        let asym = x.ln() + EULER_GAMMA + 1.0 / (2.0 * x) - 1.0 / (12.0 * x * x)
            + 1.0 / (120.0 * x.powi(4));
        assert!((exact - asym).abs() < 1e-12);
    }

    #[test]
    fn integrate_polynomial_and_exp() {
        let f = |x: f64| x * x;
        assert!((integrate(&f, 0.0, 3.0, 1e-12) - 9.0).abs() < 1e-10);
        let g = |x: f64| (-x).exp();
        assert!((integrate(&g, 0.0, 50.0, 1e-12) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bisect_hits_target() {
        let f = |x: f64| (-x).exp();
        let x = bisect_decreasing(&f, 0.0, 60.0, 0.25, 1e-12, 0.0);
        assert!((x - (4.0f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn golden_section_finds_peak() {
        let f = |x: f64| -(x - 2.5) * (x - 2.5);
        let (x, _) = golden_section_max(&f, 0.0, 10.0, 1e-10);
        assert!((x - 2.5).abs() < 1e-8);
    }

    #[test]
    fn fit_affine_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [3.0, 5.0, 7.0, 9.0];
        let (a, b, r2) = fit_affine(&xs, &ys).unwrap();
        assert!((a - 1.0).abs() < 1e-12);
        assert!((b - 2.0).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_affine_degenerate_errors() {
        let xs = [2.0, 2.0, 2.0];
        let ys = [1.0, 2.0, 3.0];
        assert!(fit_affine(&xs, &ys).is_err());
    }
}
