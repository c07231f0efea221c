//! Closed-form welfare evaluators and bound verifiers for the single-item
//! exponential market, plus trend fitting for competitive-ratio series.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{self, harmonic};

/// Outcome of checking one analytic claim over a parameter grid.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub claim: String,
    /// (parameter description, lhs, rhs) per grid point; the claim asserts
    /// lhs <= rhs.
    pub points: Vec<(String, f64, f64)>,
    pub max_violation: f64,
    pub pass: bool,
}

impl BoundReport {
    fn from_points(claim: &str, points: Vec<(String, f64, f64)>, slack: f64) -> Self {
        let max_violation = points
            .iter()
            .map(|(_, lhs, rhs)| lhs - rhs)
            .fold(f64::NEG_INFINITY, f64::max);
        BoundReport {
            claim: claim.to_string(),
            pass: max_violation <= slack,
            points,
            max_violation,
        }
    }
}

/// Expected welfare of the single static price p against n i.i.d. Exp(1)
/// buyers: `(p + 1) * (1 - (1 - e^-p)^n)`.
pub fn exp_static_welfare(n: usize, p: f64) -> f64 {
    assert!(n >= 1 && p >= 0.0, "requires n >= 1 and p >= 0");
    let nf = n as f64;
    // (1 - e^-p)^n = exp(n ln(1 - e^-p)), stable at both ends
    let miss = if p == 0.0 {
        0.0
    } else {
        (nf * (-(-p).exp()).ln_1p()).exp()
    };
    (p + 1.0) * (1.0 - miss)
}

/// Best static price for the exponential single-item market.
#[derive(Debug, Clone, Serialize)]
pub struct ExpStaticOpt {
    pub n: usize,
    pub price: f64,
    pub welfare: f64,
    /// Welfare gap to the offline optimum H_n.
    pub gap: f64,
}

/// Maximizes `exp_static_welfare(n, .)` over p. The objective is smooth but
/// only piecewise unimodal, so the search runs golden sections in uniform
/// brackets over [0, H_n + 2] plus the analytic case boundaries.
pub fn exp_static_best(n: usize) -> ExpStaticOpt {
    assert!(n >= 1);
    let hn = harmonic(n);
    let hi = hn + 2.0;
    let f = |p: f64| exp_static_welfare(n, p);
    let mut best = (0.0f64, f(0.0));
    let brackets = 64usize;
    for b in 0..brackets {
        let a = hi * b as f64 / brackets as f64;
        let c = hi * (b + 1) as f64 / brackets as f64;
        let (x, fx) = numeric::golden_section_max(&f, a, c, 1e-10);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    for p in case_boundaries(n) {
        if (0.0..=hi).contains(&p) && f(p) > best.1 {
            best = (p, f(p));
        }
    }
    ExpStaticOpt {
        n,
        price: best.0,
        welfare: best.1,
        gap: hn - best.1,
    }
}

/// The three case boundaries of the static-optimality analysis:
/// `ln n - ln ln ln n / 2` and `H_n - 1`.
fn case_boundaries(n: usize) -> Vec<f64> {
    let nf = n as f64;
    let mut b = vec![harmonic(n) - 1.0];
    if nf.ln() > 1.0 && nf.ln().ln() > 1.0 {
        b.push(nf.ln() - 0.5 * nf.ln().ln().ln());
    }
    b
}

/// Case-wise dominating expressions for the static welfare, each valid on
/// its own price interval:
/// case 1 (p below `ln n - lll n / 2`): `p + 1`;
/// case 2 (up to `H_n - 1`): `H_n (1 - lll n / (2 ln n))`;
/// case 3 (above `H_n - 1`): `99/100 H_n + 1`.
pub fn exp_static_case_bound(n: usize, p: f64) -> f64 {
    let nf = n as f64;
    let hn = harmonic(n);
    let lll = nf.ln().ln().ln();
    let c1_end = nf.ln() - 0.5 * lll;
    if p < c1_end {
        p + 1.0
    } else if p <= hn - 1.0 {
        hn * (1.0 - lll / (2.0 * nf.ln()))
    } else {
        0.99 * hn + 1.0
    }
}

/// Verifies the three case bounds dominate the closed-form welfare on a
/// price grid. The analysis proper needs astronomically large n; at
/// reachable n the middle case interval may be empty, which passes
/// vacuously.
pub fn static_case_bound_check(ns: &[usize], grid: usize) -> BoundReport {
    let mut points = Vec::new();
    for &n in ns {
        let hn = harmonic(n);
        let hi = hn + 2.0;
        for g in 0..=grid {
            let p = hi * g as f64 / grid as f64;
            points.push((
                format!("n={n} p={p:.4}"),
                exp_static_welfare(n, p),
                exp_static_case_bound(n, p),
            ));
        }
    }
    BoundReport::from_points("static-case-bounds", points, 1e-9)
}

/// Runs the exponential threshold recursion `p <- p + e^-p` for `n_max`
/// steps and verifies the value after k steps stays below `H_k - 1/8` for
/// every 2 <= k <= n_max.
pub fn mdp_bound_check(n_max: usize) -> Result<BoundReport> {
    if n_max < 2 {
        return Err(Error::domain("mdp_bound_check requires n_max >= 2"));
    }
    let mut points = Vec::new();
    let mut p = 0.0f64;
    let mut h = 0.0f64;
    let mut max_violation = f64::NEG_INFINITY;
    let mut worst_k = 0usize;
    for k in 1..=n_max {
        p += (-p).exp();
        h += 1.0 / k as f64;
        if k >= 2 {
            let v = p - (h - 0.125);
            if v > max_violation {
                max_violation = v;
                worst_k = k;
            }
        }
    }
    // keep the report small: record the worst point and the landmarks
    points.push((
        format!("worst k={worst_k}"),
        max_violation,
        0.0,
    ));
    points.push(("k=2 lhs vs 1.375".into(), 1.0 + (-1.0f64).exp(), 1.375));
    Ok(BoundReport {
        claim: format!("mdp-recursion (k <= {n_max})"),
        pass: max_violation <= 0.0,
        points,
        max_violation,
    })
}

/// Value of the recursion after n steps; equals the optimal dynamic
/// policy's expected welfare for Exp(1) and serves as an independent check
/// of the general-distribution implementation.
pub fn exp_mdp_recursion_value(n: usize) -> f64 {
    let mut p = 0.0f64;
    for _ in 0..n {
        p += (-p).exp();
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TrendModel {
    /// ratio ~ a - c / ln n
    OneOverLog,
    /// ratio ~ a - c * ln ln ln n / ln n
    LogLogLogOverLog,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrendFit {
    pub model: TrendModel,
    /// Fitted decay constant c in `ratio ~ intercept - c * g(n)`.
    pub c: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
}

/// Least-squares fit of `ratio ~ intercept - c * g(n)`. The intercept is
/// free so a constant series fits exactly with c = 0 and the synthetic
/// series `1 - c0 * g(n)` recovers c0 with R^2 = 1.
pub fn ratio_trend_fit(ns: &[usize], ratios: &[f64], model: TrendModel) -> Result<TrendFit> {
    if ns.len() != ratios.len() || ns.len() < 3 {
        return Err(Error::domain("trend fit needs >= 3 (n, ratio) points"));
    }
    if ratios.iter().any(|&r| !(r > 0.0 && r <= 1.0 + 1e-9)) {
        return Err(Error::domain("ratios must lie in (0, 1]"));
    }
    let g: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let nf = n as f64;
            match model {
                TrendModel::OneOverLog => 1.0 / nf.ln(),
                TrendModel::LogLogLogOverLog => nf.ln().ln().ln() / nf.ln(),
            }
        })
        .collect();
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("trend regressor undefined at some n"));
    }
    let (intercept, slope, r2) = numeric::fit_affine(&g, ratios)?;
    let residuals = g
        .iter()
        .zip(ratios)
        .map(|(x, y)| y - (intercept + slope * x))
        .collect();
    Ok(TrendFit {
        model,
        c: -slope,
        intercept,
        r_squared: r2,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welfare_closed_form_edges() {
        assert!((exp_static_welfare(1, 0.0) - 1.0).abs() < 1e-15);
        // p -> infinity: never sells
        assert!(exp_static_welfare(5, 700.0) < 1e-100);
        // n=1000, p = H_n - 1: the case-3 bound
        let n = 1000;
        let hn = harmonic(n);
        let w = exp_static_welfare(n, hn - 1.0);
        assert!(w <= 0.99 * hn + 1.0);
    }

    #[test]
    fn static_best_matches_dense_grid() {
        let n = 2;
        let best = exp_static_best(n);
        let mut grid_best = 0.0f64;
        let hi = harmonic(n) + 2.0;
        for i in 0..=1_000_000 {
            let p = hi * i as f64 / 1e6;
            grid_best = grid_best.max(exp_static_welfare(n, p));
        }
        assert!(
            (best.welfare - grid_best).abs() < 1e-6,
            "{} vs {grid_best}",
            best.welfare
        );
        assert!(best.welfare <= harmonic(n));
    }

    #[test]
    fn static_gap_grows() {
        let gaps: Vec<f64> = [100usize, 1000, 10_000, 100_000]
            .iter()
            .map(|&n| exp_static_best(n).gap)
            .collect();
        for w in gaps.windows(2) {
            assert!(w[1] > w[0], "{gaps:?}");
        }
    }

    #[test]
    fn mdp_bound_holds_to_1e5() {
        let r = mdp_bound_check(100_000).unwrap();
        assert!(r.pass, "max violation {}", r.max_violation);
    }

    #[test]
    fn mdp_landmarks() {
        // after 1 step: 1; after 2 steps: 1 + 1/e <= 1.375
        let mut p = 0.0f64;
        p += (-p).exp();
        assert_eq!(p, 1.0);
        p += (-p).exp();
        assert!((p - (1.0 + (-1.0f64).exp())).abs() < 1e-15);
        assert!(p <= 1.375);
    }

    #[test]
    fn recursion_value_matches_mechanism_path() {
        let d = crate::dist::Distribution::exponential(1.0).unwrap();
        for n in [1usize, 5, 50, 500] {
            let a = exp_mdp_recursion_value(n);
            let b = crate::mechanism::mdp_optimal_prices(&d, n)
                .unwrap()
                .expected_welfare;
            assert!((a - b).abs() < 1e-12, "n={n}: {a} vs {b}");
        }
    }

    #[test]
    fn case_bounds_dominate_on_reachable_n() {
        let r = static_case_bound_check(&[1_000, 1_000_000, 1_000_000_000], 400);
        assert!(r.pass, "max violation {}", r.max_violation);
    }

    #[test]
    fn trend_fit_recovers_synthetic() {
        let ns: Vec<usize> = vec![64, 256, 1024, 4096, 16384];
        let ratios: Vec<f64> = ns.iter().map(|&n| 1.0 - 2.0 / (n as f64).ln()).collect();
        let fit = ratio_trend_fit(&ns, &ratios, TrendModel::OneOverLog).unwrap();
        assert!((fit.c - 2.0).abs() < 1e-9);
        assert!((fit.intercept - 1.0).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);

        let flat = vec![0.95; 5];
        let fit = ratio_trend_fit(&ns, &flat, TrendModel::OneOverLog).unwrap();
        assert!(fit.c.abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-9);

        // degenerate design: all n equal
        assert!(ratio_trend_fit(&[8, 8, 8], &[0.5, 0.6, 0.7], TrendModel::OneOverLog).is_err());
    }
}
