//! Continuous non-negative distributions with monotone hazard rate (MHR):
//! evaluation, inversion, hazard checks and sampling.
//!
//! Three families are supported: exponential, uniform on `[a, b]` with
//! `0 <= a < b`, and Weibull with shape `k >= 1`. A Weibull shape below 1
//! has a decreasing hazard rate and is rejected at construction; every
//! mechanism guarantee in this crate silently breaks without the MHR
//! property, so the invariant is enforced rather than flagged.

use rand::Rng;
use serde::Serialize;
use statrs::function::gamma::{gamma, gamma_ur};

use crate::error::{Error, Result};
use crate::numeric;

/// Relative slack used by the analytic lemma checks; covers the quadrature
/// error budget so the checks are deterministic.
pub const LEMMA_REL_SLACK: f64 = 1e-6;

/// Hazard monotonicity slack (relative).
pub const HAZARD_REL_SLACK: f64 = 1e-9;

/// Survival mass beyond which improper integrals are truncated. The
/// truncation point is `F^-1(1 - TAIL_EPS)`; all supported families have
/// sub-exponential tails there, and callers that need an `n`-fold union
/// bound shrink the mass further by `1/n`.
pub const TAIL_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Distribution {
    Exponential { rate: f64 },
    Uniform { lo: f64, hi: f64 },
    Weibull { shape: f64, scale: f64 },
}

impl Distribution {
    pub fn exponential(rate: f64) -> Result<Self> {
        if !rate.is_finite() || rate <= 0.0 {
            return Err(Error::domain(format!("exponential rate must be > 0, got {rate}")));
        }
        Ok(Distribution::Exponential { rate })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0 && lo < hi) || !hi.is_finite() {
            return Err(Error::domain(format!(
                "uniform requires 0 <= lo < hi, got lo={lo}, hi={hi}"
            )));
        }
        Ok(Distribution::Uniform { lo, hi })
    }

    /// Weibull with shape `k` and scale. Shapes below 1 are rejected: the
    /// hazard `k/scale * (x/scale)^(k-1)` is decreasing for k < 1.
    pub fn weibull(shape: f64, scale: f64) -> Result<Self> {
        if !shape.is_finite() || shape < 1.0 {
            return Err(Error::domain(format!(
                "weibull shape must be >= 1 (MHR), got {shape}"
            )));
        }
        if !scale.is_finite() || scale <= 0.0 {
            return Err(Error::domain(format!("weibull scale must be > 0, got {scale}")));
        }
        Ok(Distribution::Weibull { shape, scale })
    }

    /// Parses the textual form used in CLI configs: `exp(rate)`,
    /// `unif(a,b)`, `weibull(k,scale)`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = s
            .split_once('(')
            .ok_or_else(|| Error::usage(format!("bad distribution spec `{s}`")))?;
        let args = args
            .strip_suffix(')')
            .ok_or_else(|| Error::usage(format!("bad distribution spec `{s}`")))?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|a| {
                a.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::usage(format!("bad number `{a}` in `{s}`")))
            })
            .collect::<Result<_>>()?;
        match (name.trim(), nums.as_slice()) {
            ("exp", [rate]) => Distribution::exponential(*rate),
            ("unif", [a, b]) => Distribution::uniform(*a, *b),
            ("weibull", [k, scale]) => Distribution::weibull(*k, *scale),
            _ => Err(Error::usage(format!(
                "unknown distribution `{s}` (expected exp(rate), unif(a,b), weibull(k,scale))"
            ))),
        }
    }

    /// Support as `(lo, hi)`; `hi` is `f64::INFINITY` for unbounded families.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Distribution::Exponential { .. } => (0.0, f64::INFINITY),
            Distribution::Uniform { lo, hi } => (lo, hi),
            Distribution::Weibull { .. } => (0.0, f64::INFINITY),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Distribution::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Distribution::Uniform { lo, hi } => {
                if x <= lo {
                    0.0
                } else if x >= hi {
                    1.0
                } else {
                    (x - lo) / (hi - lo)
                }
            }
            Distribution::Weibull { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-(x / scale).powf(shape)).exp_m1()
                }
            }
        }
    }

    /// Survival function 1 - F(x), computed without cancellation.
    pub fn survival(&self, x: f64) -> f64 {
        match *self {
            Distribution::Exponential { rate } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-rate * x).exp()
                }
            }
            Distribution::Uniform { lo, hi } => {
                if x <= lo {
                    1.0
                } else if x >= hi {
                    0.0
                } else {
                    (hi - x) / (hi - lo)
                }
            }
            Distribution::Weibull { shape, scale } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-(x / scale).powf(shape)).exp()
                }
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Distribution::Exponential { rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    rate * (-rate * x).exp()
                }
            }
            Distribution::Uniform { lo, hi } => {
                if x < lo || x > hi {
                    0.0
                } else {
                    1.0 / (hi - lo)
                }
            }
            Distribution::Weibull { shape, scale } => {
                if x < 0.0 {
                    0.0
                } else if x == 0.0 {
                    if shape == 1.0 {
                        1.0 / scale
                    } else {
                        0.0
                    }
                } else {
                    let z = x / scale;
                    shape / scale * z.powf(shape - 1.0) * (-z.powf(shape)).exp()
                }
            }
        }
    }

    /// Hazard rate h(x) = f(x) / (1 - F(x)) for x with F(x) < 1.
    pub fn hazard(&self, x: f64) -> f64 {
        match *self {
            Distribution::Exponential { rate } => rate,
            Distribution::Uniform { lo, hi } => {
                if x < lo {
                    0.0
                } else {
                    1.0 / (hi - x)
                }
            }
            Distribution::Weibull { shape, scale } => {
                if x <= 0.0 {
                    if shape == 1.0 {
                        1.0 / scale
                    } else {
                        0.0
                    }
                } else {
                    shape / scale * (x / scale).powf(shape - 1.0)
                }
            }
        }
    }

    /// Quantile function F^-1(q) for q in (0, 1); closed form for every
    /// supported family.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::domain(format!("quantile requires q in (0,1), got {q}")));
        }
        Ok(self.quantile_ext(q))
    }

    /// Quantile extended to the closed interval: q = 0 maps to the support
    /// infimum, q = 1 to the supremum (possibly infinite). Used internally
    /// where the endpoints are meaningful prices/thresholds.
    pub fn quantile_ext(&self, q: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&q));
        match *self {
            Distribution::Exponential { rate } => {
                if q >= 1.0 {
                    f64::INFINITY
                } else {
                    -(-q).ln_1p() / rate
                }
            }
            Distribution::Uniform { lo, hi } => lo + q * (hi - lo),
            Distribution::Weibull { shape, scale } => {
                if q >= 1.0 {
                    f64::INFINITY
                } else {
                    scale * (-(-q).ln_1p()).powf(1.0 / shape)
                }
            }
        }
    }

    /// Mean of the distribution.
    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Exponential { rate } => 1.0 / rate,
            Distribution::Uniform { lo, hi } => 0.5 * (lo + hi),
            Distribution::Weibull { shape, scale } => scale * gamma(1.0 + 1.0 / shape),
        }
    }

    /// Upper tail integral of the survival function,
    /// `∫_t^∞ (1 - F(x)) dx = E[max(X - t, 0)]`.
    pub fn tail_integral(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match *self {
            Distribution::Exponential { rate } => (-rate * t).exp() / rate,
            Distribution::Uniform { lo, hi } => {
                if t <= lo {
                    0.5 * (lo + hi) - t
                } else if t >= hi {
                    0.0
                } else {
                    (hi - t) * (hi - t) / (2.0 * (hi - lo))
                }
            }
            Distribution::Weibull { shape, scale } => {
                // substitute u = (x/scale)^shape
                let z = (t / scale).powf(shape);
                if z <= 0.0 {
                    return self.mean();
                }
                scale / shape * gamma_ur(1.0 / shape, z) * gamma(1.0 / shape)
            }
        }
    }

    /// Conditional upper-tail mean `E[X | X >= tau]` via quadrature of the
    /// survival function, truncated at `F^-1(1 - TAIL_EPS)`. The remainder
    /// is dominated by the exponential tail bound at the truncation point.
    pub fn conditional_tail_mean(&self, tau: f64) -> Result<f64> {
        let s = self.survival(tau);
        if s <= 0.0 {
            return Err(Error::domain(format!(
                "conditional tail mean undefined at tau={tau} (survival 0)"
            )));
        }
        let upper = self.quantile_ext(1.0 - TAIL_EPS);
        let integral = if upper > tau {
            numeric::integrate(&|x| self.survival(x), tau, upper, 1e-12 * s.max(1e-6))
        } else {
            0.0
        };
        // Truncated mass: at most TAIL_EPS * (remaining scale), negligible
        // against the lemma slack; see TAIL_EPS.
        Ok(tau + (integral + self.tail_integral(upper)) / s)
    }

    /// Inverse-transform sample; non-negative by construction.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.quantile_ext(u)
    }
}

impl std::fmt::Display for Distribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Distribution::Exponential { rate } => write!(f, "exp({rate})"),
            Distribution::Uniform { lo, hi } => write!(f, "unif({lo},{hi})"),
            Distribution::Weibull { shape, scale } => write!(f, "weibull({shape},{scale})"),
        }
    }
}

/// Checks that the hazard rate is non-decreasing on a grid spanning the
/// support (log-spaced in survival mass toward both ends). Returns the
/// first violating abscissa if any.
pub fn hazard_monotone_check(dist: &Distribution, grid_size: usize) -> (bool, Option<f64>) {
    assert!(grid_size >= 2, "grid_size must be >= 2");
    let mut qs: Vec<f64> = Vec::with_capacity(grid_size);
    let half = grid_size / 2;
    for k in 0..half {
        // 1e-9 .. 0.5, geometric in probability mass
        let e = -9.0 + 8.699 * (k as f64) / (half.max(1) as f64);
        qs.push(10f64.powf(e));
    }
    for k in 0..(grid_size - half) {
        let e = -9.0 + 8.699 * (k as f64) / ((grid_size - half).max(1) as f64);
        qs.push(1.0 - 10f64.powf(e));
    }
    qs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut prev_h = f64::NEG_INFINITY;
    for &q in &qs {
        let x = dist.quantile_ext(q);
        if !x.is_finite() {
            continue;
        }
        let h = dist.hazard(x);
        if !h.is_finite() {
            continue;
        }
        if h < prev_h * (1.0 - HAZARD_REL_SLACK) - HAZARD_REL_SLACK {
            return (false, Some(x));
        }
        prev_h = prev_h.max(h);
    }
    (true, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quantile_closed_forms() {
        let e = Distribution::exponential(1.0).unwrap();
        let q = 1.0 - (-1.0f64).exp();
        assert!((e.quantile(q).unwrap() - 1.0).abs() < 1e-12);

        let u = Distribution::uniform(0.0, 1.0).unwrap();
        assert!((u.quantile(0.25).unwrap() - 0.25).abs() < 1e-15);

        let w = Distribution::weibull(2.0, 1.0).unwrap();
        // F(x) = 1 - exp(-x^2); invert numerically and cross-check.
        let x = w.quantile(q).unwrap();
        assert!((x - 1.0).abs() < 1e-12);
        let bisect = numeric::invert_cdf_bisect(&|t| w.cdf(t), 0.0, 10.0, q);
        assert!((bisect - x).abs() < 1e-9);
    }

    #[test]
    fn quantile_rejects_out_of_range() {
        let e = Distribution::exponential(1.0).unwrap();
        assert!(e.quantile(0.0).is_err());
        assert!(e.quantile(1.0).is_err());
        assert!(e.quantile(-0.5).is_err());
    }

    #[test]
    fn weibull_shape_below_one_rejected() {
        assert!(Distribution::weibull(0.5, 1.0).is_err());
        assert!(Distribution::weibull(0.999, 2.0).is_err());
        assert!(Distribution::weibull(1.0, 2.0).is_ok());
    }

    #[test]
    fn uniform_requires_nonnegative_support() {
        assert!(Distribution::uniform(-0.5, 1.0).is_err());
        assert!(Distribution::uniform(1.0, 1.0).is_err());
    }

    #[test]
    fn hazard_shapes() {
        let e = Distribution::exponential(1.0).unwrap();
        let (ok, _) = hazard_monotone_check(&e, 64);
        assert!(ok);
        let u = Distribution::uniform(0.0, 1.0).unwrap();
        let (ok, _) = hazard_monotone_check(&u, 64);
        assert!(ok);
        let w = Distribution::weibull(2.0, 1.0).unwrap();
        let (ok, _) = hazard_monotone_check(&w, 64);
        assert!(ok);
    }

    #[test]
    fn tail_integral_matches_quadrature() {
        for d in [
            Distribution::exponential(1.3).unwrap(),
            Distribution::uniform(0.2, 2.0).unwrap(),
            Distribution::weibull(2.0, 1.5).unwrap(),
        ] {
            for t in [0.0, 0.3, 1.1] {
                let upper = d.quantile_ext(1.0 - 1e-14);
                let quad = numeric::integrate(&|x| d.survival(x), t, upper.max(t), 1e-13);
                assert!(
                    (d.tail_integral(t) - quad).abs() < 1e-8,
                    "{d} t={t}: {} vs {quad}",
                    d.tail_integral(t)
                );
            }
        }
    }

    #[test]
    fn conditional_tail_mean_exp_memoryless() {
        let e = Distribution::exponential(1.0).unwrap();
        // E[X | X >= tau] = tau + 1 by memorylessness.
        for tau in [0.0, 0.7, 3.0] {
            let m = e.conditional_tail_mean(tau).unwrap();
            assert!((m - (tau + 1.0)).abs() < 1e-8, "tau={tau}: {m}");
        }
        let u = Distribution::uniform(0.0, 1.0).unwrap();
        assert!((u.conditional_tail_mean(0.5).unwrap() - 0.75).abs() < 1e-9);
    }

    #[test]
    fn samples_nonnegative_and_deterministic() {
        let w = Distribution::weibull(1.5, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a: Vec<f64> = (0..100).map(|_| w.sample(&mut rng)).collect();
        assert!(a.iter().all(|&x| x >= 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let b: Vec<f64> = (0..100).map(|_| w.sample(&mut rng)).collect();
        assert_eq!(a, b);
    }

    proptest::proptest! {
        // |F(F^-1(q)) - q| <= 1e-9 across the quantile range.
        #[test]
        fn quantile_cdf_round_trip(q in 0.001f64..0.999, pick in 0usize..3) {
            let d = match pick {
                0 => Distribution::exponential(1.3).unwrap(),
                1 => Distribution::uniform(0.25, 2.5).unwrap(),
                _ => Distribution::weibull(2.0, 1.5).unwrap(),
            };
            let x = d.quantile(q).unwrap();
            proptest::prop_assert!((d.cdf(x) - q).abs() <= 1e-9);
        }
    }

    #[test]
    fn parse_round_trips() {
        for s in ["exp(1)", "unif(0,2)", "weibull(2,1)"] {
            let d = Distribution::parse(s).unwrap();
            let again = Distribution::parse(&d.to_string()).unwrap();
            assert_eq!(d, again);
        }
        assert!(Distribution::parse("normal(0,1)").is_err());
        assert!(Distribution::parse("exp(-1)").is_err());
    }
}
