//! Expected order statistics of i.i.d. draws and the quantile/order-statistic
//! comparison lemmas used by the pricing analyses, as checkable predicates.
//!
//! The k-th highest order statistic mean is computed from the survival-side
//! identity mu_k = ∫ P(v_(k) >= x) dx with the binomial tail evaluated as a
//! regularized incomplete beta; the alternating-sum formula cancels
//! catastrophically for n beyond ~30 and is not used.

use serde::Serialize;
use statrs::function::beta::beta_reg;

use crate::dist::{Distribution, LEMMA_REL_SLACK, TAIL_EPS};
use crate::error::{Error, Result};
use crate::numeric::{self, harmonic};

/// Quadrature tolerance for order-statistic integrals (relative).
const INTEGRAL_REL_TOL: f64 = 1e-9;

/// Expected value of the k-th highest of n i.i.d. draws.
///
/// `P(v_(k) >= x) = P(Binomial(n, 1-F(x)) >= k) = I_{1-F(x)}(k, n-k+1)`.
pub fn order_stat_mean(dist: &Distribution, n: usize, k: usize) -> Result<f64> {
    if k == 0 || k > n {
        return Err(Error::domain(format!(
            "order statistic rank k={k} out of range 1..={n}"
        )));
    }
    let (lo, _) = dist.support();
    // Truncate where even the n-fold union bound on the tail is below
    // TAIL_EPS of the integral scale.
    let eps = (TAIL_EPS / n as f64).max(1e-15);
    let upper = dist.quantile_ext(1.0 - eps);
    let nf = n as f64;
    let kf = k as f64;
    let integrand = |x: f64| {
        let s = dist.survival(x);
        if k == 1 {
            // 1 - (1-s)^n without cancellation
            -(nf * (-s).ln_1p()).exp_m1()
        } else {
            beta_reg(kf, nf - kf + 1.0, s)
        }
    };
    let scale = dist.mean().max(f64::MIN_POSITIVE);
    let mut mu = numeric::integrate(&integrand, 0.0, upper.max(lo), INTEGRAL_REL_TOL * scale);
    // Remainder beyond the truncation point, bounded by the union bound
    // P(v_(k) >= x) <= n * (1 - F(x)).
    mu += nf * dist.tail_integral(upper);
    Ok(mu)
}

/// Expected maximum of n i.i.d. draws; equals `order_stat_mean(dist, n, 1)`.
pub fn max_expectation(dist: &Distribution, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("max_expectation requires n >= 1"));
    }
    order_stat_mean(dist, n, 1)
}

/// Precomputed table of mu_1..mu_n for one distribution.
#[derive(Debug, Clone, Serialize)]
pub struct OrderStatsTable {
    pub dist: Distribution,
    pub n: usize,
    /// mu[k-1] is the expected k-th highest order statistic.
    pub mu: Vec<f64>,
    pub tol: f64,
}

impl OrderStatsTable {
    pub fn new(dist: &Distribution, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("OrderStatsTable requires n >= 1"));
        }
        let mu = (1..=n)
            .map(|k| order_stat_mean(dist, n, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(OrderStatsTable {
            dist: dist.clone(),
            n,
            mu,
            tol: INTEGRAL_REL_TOL,
        })
    }

    pub fn mu(&self, k: usize) -> Result<f64> {
        if k == 0 || k > self.n {
            return Err(Error::domain(format!("rank {k} out of 1..={}", self.n)));
        }
        Ok(self.mu[k - 1])
    }
}

fn slack_ge(lhs: f64, rhs: f64) -> bool {
    lhs >= rhs - LEMMA_REL_SLACK * lhs.abs().max(rhs.abs()).max(1e-12)
}

/// Quantile vs order-statistic bound: for `exp(H_{j-1} - H_n) <= q <= 1`,
/// `F^-1(1-q) >= -ln(q) / (H_n - H_{j-1}) * mu_j`.
pub fn check_quantiles1(dist: &Distribution, n: usize, j: usize, q: f64) -> Result<bool> {
    if j == 0 || j > n {
        return Err(Error::domain(format!("rank j={j} out of range 1..={n}")));
    }
    let gap = harmonic(n) - harmonic(j - 1);
    let q_lo = (-gap).exp();
    if !(q >= q_lo && q <= 1.0) {
        return Err(Error::domain(format!(
            "check_quantiles1 requires exp(H_(j-1) - H_n) = {q_lo:.6e} <= q <= 1, got {q}"
        )));
    }
    let lhs = dist.quantile_ext(1.0 - q);
    if lhs.is_infinite() {
        return Ok(true);
    }
    let rhs = -q.ln() / gap * order_stat_mean(dist, n, j)?;
    Ok(slack_ge(lhs, rhs))
}

/// Quantile vs shifted-rank order statistic: for q in [0,1],
/// `F^-1(1-q) >= mu_(floor(nq + sqrt(n ln n)))`; vacuously true when the
/// rank exceeds n.
pub fn check_quantiles2(dist: &Distribution, n: usize, q: f64) -> Result<bool> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::domain(format!("q must lie in [0,1], got {q}")));
    }
    let nf = n as f64;
    let k = (nf * q + (nf * nf.ln()).sqrt()).floor();
    if k > nf || k < 1.0 {
        return Ok(true);
    }
    let lhs = dist.quantile_ext(1.0 - q);
    if lhs.is_infinite() {
        return Ok(true);
    }
    let rhs = order_stat_mean(dist, n, k as usize)?;
    Ok(slack_ge(lhs, rhs))
}

/// Tail-conditional mean vs scaled maximum: for `alpha >= (1 + ln(1/z))/H_k`,
/// `alpha >= 1` and `alpha * k <= 1/z`,
/// `E[X | X >= F^-1(1-z)] <= alpha * E[max of k draws]`.
pub fn check_quantile_maximum(dist: &Distribution, z: f64, k: usize, alpha: f64) -> Result<bool> {
    if !(z > 0.0 && z <= 1.0) {
        return Err(Error::domain(format!("z must lie in (0,1], got {z}")));
    }
    if k == 0 {
        return Err(Error::domain("k must be >= 1"));
    }
    let alpha_min = (1.0 + (1.0 / z).ln()) / harmonic(k);
    if alpha < alpha_min.max(1.0) {
        return Err(Error::domain(format!(
            "alpha={alpha} below required max(1, (1+ln(1/z))/H_k) = {:.6}",
            alpha_min.max(1.0)
        )));
    }
    if alpha * k as f64 > 1.0 / z {
        return Err(Error::domain(format!(
            "alpha*k = {} exceeds 1/z = {}",
            alpha * k as f64,
            1.0 / z
        )));
    }
    let tau = dist.quantile_ext(1.0 - z);
    let lhs = dist.conditional_tail_mean(tau)?;
    let rhs = alpha * max_expectation(dist, k)?;
    Ok(slack_ge(rhs, lhs))
}

/// Ratio of expected maxima vs harmonic numbers:
/// `E[max n_small] / E[max n_large] >= H_(n_small) / H_(n_large)`.
pub fn check_babaioff_ratio(dist: &Distribution, n_small: usize, n_large: usize) -> Result<bool> {
    if n_small == 0 || n_small > n_large {
        return Err(Error::domain(format!(
            "requires 1 <= n_small <= n_large, got ({n_small}, {n_large})"
        )));
    }
    let lhs = max_expectation(dist, n_small)? / max_expectation(dist, n_large)?;
    let rhs = harmonic(n_small) / harmonic(n_large);
    Ok(slack_ge(lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn exp1() -> Distribution {
        Distribution::exponential(1.0).unwrap()
    }
    fn unif01() -> Distribution {
        Distribution::uniform(0.0, 1.0).unwrap()
    }
    fn weib21() -> Distribution {
        Distribution::weibull(2.0, 1.0).unwrap()
    }

    #[test]
    fn exp_order_stats_telescope() {
        // For Exp(1): mu_k = H_n - H_(k-1).
        let d = exp1();
        for (n, k) in [(5usize, 1usize), (5, 3), (12, 7), (50, 50)] {
            let mu = order_stat_mean(&d, n, k).unwrap();
            let exact = harmonic(n) - harmonic(k - 1);
            assert!(
                (mu - exact).abs() < 1e-6 * exact.max(1.0),
                "n={n} k={k}: {mu} vs {exact}"
            );
        }
    }

    #[test]
    fn exp_max_is_harmonic() {
        let d = exp1();
        assert!((max_expectation(&d, 1).unwrap() - 1.0).abs() < 1e-8);
        let h5 = 137.0 / 60.0;
        assert!((max_expectation(&d, 5).unwrap() - h5).abs() < 1e-7);
        let h1000 = harmonic(1000);
        assert!((max_expectation(&d, 1000).unwrap() - h1000).abs() < 1e-6 * h1000);
    }

    #[test]
    fn uniform_order_stats_closed_form() {
        // k-th highest of n uniforms has mean (n-k+1)/(n+1).
        let d = unif01();
        let mu = order_stat_mean(&d, 4, 2).unwrap();
        assert!((mu - 0.6).abs() < 1e-8, "{mu}");
        assert!((max_expectation(&d, 9).unwrap() - 0.9).abs() < 1e-8);
    }

    #[test]
    fn rank_out_of_range_is_domain_error() {
        assert!(order_stat_mean(&exp1(), 5, 0).is_err());
        assert!(order_stat_mean(&exp1(), 5, 6).is_err());
    }

    #[test]
    fn table_is_sorted_and_consistent() {
        for d in [exp1(), unif01(), weib21()] {
            let t = OrderStatsTable::new(&d, 8).unwrap();
            for k in 1..8 {
                assert!(t.mu(k).unwrap() >= t.mu(k + 1).unwrap() - 1e-12);
            }
            let direct = max_expectation(&d, 8).unwrap();
            assert!((t.mu(1).unwrap() - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn order_stats_match_monte_carlo() {
        // Empirical oracle: sorted samples, all ranks at once, on a sampled
        // n-grid spanning 1..=50.
        let trials = 1_000_000usize;
        for d in [exp1(), unif01(), weib21()] {
            for n in [3usize, 7, 20, 50] {
                let mut rng = ChaCha8Rng::seed_from_u64(2024);
                let mut sums = vec![0.0f64; n];
                let mut sq = vec![0.0f64; n];
                let mut buf = vec![0.0f64; n];
                for _ in 0..trials {
                    for v in buf.iter_mut() {
                        *v = d.sample(&mut rng);
                    }
                    buf.sort_by(|a, b| b.partial_cmp(a).unwrap());
                    for (k, v) in buf.iter().enumerate() {
                        sums[k] += v;
                        sq[k] += v * v;
                    }
                }
                for k in 1..=n {
                    let mean = sums[k - 1] / trials as f64;
                    let var = (sq[k - 1] / trials as f64 - mean * mean).max(0.0);
                    let se = (var / trials as f64).sqrt();
                    let mu = order_stat_mean(&d, n, k).unwrap();
                    assert!(
                        (mu - mean).abs() <= 4.0 * se + 1e-9,
                        "{d} n={n} k={k}: quad {mu} vs mc {mean} (se {se})"
                    );
                }
            }
        }
    }

    #[test]
    fn quantiles1_exp_equality() {
        // For Exp(1) the bound holds with equality.
        let d = exp1();
        for n in [10usize, 100] {
            for j in [1usize, 2, n / 2, n] {
                let q_lo = (-(harmonic(n) - harmonic(j - 1))).exp();
                for q in [q_lo, (q_lo + 1.0) / 2.0, 0.9] {
                    if q < q_lo || q > 1.0 {
                        continue;
                    }
                    assert!(check_quantiles1(&d, n, j, q).unwrap());
                    let lhs = -(q.ln());
                    let rhs =
                        -q.ln() / (harmonic(n) - harmonic(j - 1))
                            * order_stat_mean(&d, n, j).unwrap();
                    assert!(
                        (lhs - rhs).abs() <= 1e-6 * lhs.abs().max(1e-9),
                        "equality violated: {lhs} vs {rhs}"
                    );
                }
            }
        }
    }

    #[test]
    fn quantiles1_precondition_gate() {
        let d = exp1();
        let q_lo = (-(harmonic(10) - harmonic(4))).exp();
        assert!(check_quantiles1(&d, 10, 5, q_lo * 0.5).is_err());
    }

    #[test]
    fn quantiles2_basic_and_vacuous() {
        assert!(check_quantiles2(&exp1(), 100, 0.1).unwrap());
        assert!(check_quantiles2(&unif01(), 400, 0.05).unwrap());
        // index floor(4*0.9 + sqrt(4 ln 4)) > 4 -> vacuous
        assert!(check_quantiles2(&weib21(), 4, 0.9).unwrap());
    }

    #[test]
    fn quantile_maximum_examples() {
        let d = exp1();
        // z = 0.1, k = 20, alpha at the precondition boundary:
        // LHS = 1 + ln 10 (memorylessness), RHS = alpha * H_20.
        let z = 0.1;
        let k = 20;
        let alpha = (1.0 + (1.0f64 / z).ln()) / harmonic(k);
        if alpha >= 1.0 && alpha * k as f64 <= 1.0 / z {
            assert!(check_quantile_maximum(&d, z, k, alpha).unwrap());
        }
        // alpha < 1 violates the precondition.
        assert!(check_quantile_maximum(&d, 0.5, 3, 0.5).is_err());
        // uniform, alpha tight at the precondition (k = 4 leaves no
        // admissible alpha at z = 0.2: the lower bound already exceeds
        // 1/(z k); k = 3 is the tight feasible corner)
        let u = unif01();
        let z = 0.2;
        let k = 3;
        let alpha = ((1.0 + (1.0f64 / z).ln()) / harmonic(k)).max(1.0);
        assert!(alpha * (k as f64) <= 1.0 / z);
        assert!(check_quantile_maximum(&u, z, k, alpha).unwrap());
    }

    #[test]
    fn babaioff_ratio_examples() {
        let d = exp1();
        assert!(check_babaioff_ratio(&d, 10, 100).unwrap());
        // equality for exponential: both sides H_10/H_100
        let lhs = max_expectation(&d, 10).unwrap() / max_expectation(&d, 100).unwrap();
        let rhs = harmonic(10) / harmonic(100);
        assert!((lhs - rhs).abs() < 1e-6);

        let u = unif01();
        // closed forms n/(n+1): (2/3)/(8/9) = 0.75 >= H_2/H_8
        assert!(check_babaioff_ratio(&u, 2, 8).unwrap());
        assert!(check_babaioff_ratio(&u, 5, 5).unwrap());
    }
}
