//! Price solver for the dynamic independent-valuation rule: find a price
//! vector under which a fresh unit-demand buyer purchases each remaining
//! item with a prescribed probability.
//!
//! The purchase probability of item j at prices x is
//! `r_j(x) = ∫_{x_j} f_j(t) * prod_{j' != j} F_{j'}(t - x_j + x_{j'}) dt`,
//! i.e. the chance that item j has the best, strictly positive margin.
//!
//! Solving runs the damped fixed-point map x <- (1-g) x + g * phi(x) with
//! `phi_j(x) = r_j(x)/target_j * x_j` first. That map stalls (sublinear)
//! whenever a solution price sits at zero or at the support infimum, because
//! the multiplicative update has unit derivative there; in that case a
//! Gauss-Seidel pass of per-coordinate monotone bisections polishes the
//! solution to tolerance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::numeric;

#[derive(Debug, Clone, Serialize)]
pub struct SolverSettings {
    /// Damping factor of the fixed-point phase.
    pub damping: f64,
    /// Iteration cap of the fixed-point phase.
    pub max_iter: usize,
    /// Max-norm residual on purchase probabilities at which to stop.
    pub tol: f64,
    /// Up to this many items the probabilities are evaluated by adaptive
    /// quadrature; above it by common-random-number Monte Carlo.
    pub quad_item_limit: usize,
    pub mc_samples: usize,
    pub mc_seed: u64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            damping: 0.5,
            max_iter: 500,
            tol: 1e-8,
            quad_item_limit: 8,
            mc_samples: 100_000,
            mc_seed: 0x9e3779b97f4a7c15,
        }
    }
}

/// A solved price vector with convergence diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct PriceSolve {
    pub prices: Vec<f64>,
    pub targets: Vec<f64>,
    /// Max-norm residual |r_j - target_j| at the returned prices.
    pub residual: f64,
    pub iterations: usize,
}

enum ProbEval {
    Quadrature,
    MonteCarlo { samples: Vec<f64> },
}

impl ProbEval {
    fn eval(&self, dists: &[&Distribution], prices: &[f64]) -> Vec<f64> {
        match self {
            ProbEval::Quadrature => purchase_probabilities_quad(dists, prices),
            ProbEval::MonteCarlo { samples, .. } => {
                purchase_probabilities_mc_cached(samples, dists.len(), prices)
            }
        }
    }

    fn eval_one(&self, dists: &[&Distribution], prices: &[f64], j: usize) -> f64 {
        match self {
            ProbEval::Quadrature => purchase_probability_one(dists, prices, j),
            ProbEval::MonteCarlo { samples, .. } => {
                purchase_probabilities_mc_cached(samples, dists.len(), prices)[j]
            }
        }
    }
}

/// Purchase probabilities of every item at the given prices, by adaptive
/// quadrature (one 1-d integral per item).
pub fn purchase_probabilities_quad(dists: &[&Distribution], prices: &[f64]) -> Vec<f64> {
    (0..dists.len())
        .map(|j| purchase_probability_one(dists, prices, j))
        .collect()
}

fn purchase_probability_one(dists: &[&Distribution], prices: &[f64], j: usize) -> f64 {
    let d = dists[j];
    let (lo, hi) = d.support();
    let a = prices[j].max(lo);
    let b = hi.min(d.quantile_ext(1.0 - 1e-13).max(a));
    if b <= a {
        return 0.0;
    }
    let f = |t: f64| {
        let mut g = d.pdf(t);
        if g == 0.0 {
            return 0.0;
        }
        for (k, other) in dists.iter().enumerate() {
            if k != j {
                g *= other.cdf(t - prices[j] + prices[k]);
                if g == 0.0 {
                    return 0.0;
                }
            }
        }
        g
    };
    numeric::integrate(&f, a, b, 1e-12)
}

/// Purchase probabilities by common-random-number Monte Carlo; `samples` is
/// a flat (sample, item) matrix of values reused across evaluations so the
/// map stays deterministic during the solve.
fn purchase_probabilities_mc_cached(samples: &[f64], m: usize, prices: &[f64]) -> Vec<f64> {
    let k = samples.len() / m;
    let mut counts = vec![0u64; m];
    for s in 0..k {
        let row = &samples[s * m..(s + 1) * m];
        let mut best = 0.0f64;
        let mut arg = usize::MAX;
        for (j, (&v, &p)) in row.iter().zip(prices).enumerate() {
            let u = v - p;
            if u > best {
                best = u;
                arg = j;
            }
        }
        if arg != usize::MAX {
            counts[arg] += 1;
        }
    }
    counts.iter().map(|&c| c as f64 / k as f64).collect()
}

/// Solves `r_j(x) = target_j` for all j. Targets must lie in (0, 1] and sum
/// to at most 1 (+ slack). Prices are capped at `F_j^-1(1 - target_j)`,
/// below which a lone item would already sell too rarely.
pub fn solve_dynamic_prices(
    dists: &[&Distribution],
    targets: &[f64],
    settings: &SolverSettings,
) -> Result<PriceSolve> {
    let m = dists.len();
    if m == 0 || targets.len() != m {
        return Err(Error::validation("solver needs one target per item"));
    }
    if targets.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
        return Err(Error::domain(format!("targets must lie in (0,1]: {targets:?}")));
    }
    let total: f64 = targets.iter().sum();
    if total > 1.0 + 1e-6 {
        return Err(Error::domain(format!("targets sum to {total} > 1")));
    }

    let eval = if m <= settings.quad_item_limit {
        ProbEval::Quadrature
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(settings.mc_seed);
        let mut samples = vec![0.0f64; settings.mc_samples * m];
        for s in 0..settings.mc_samples {
            for (j, d) in dists.iter().enumerate() {
                samples[s * m + j] = d.sample(&mut rng);
            }
        }
        ProbEval::MonteCarlo { samples }
    };
    let tol = match eval {
        ProbEval::Quadrature => settings.tol,
        // MC probabilities carry sampling noise; don't chase below it.
        ProbEval::MonteCarlo { .. } => settings
            .tol
            .max(2.5 / (settings.mc_samples as f64).sqrt()),
    };

    let caps: Vec<f64> = dists
        .iter()
        .zip(targets)
        .map(|(d, &t)| d.quantile_ext(1.0 - t))
        .collect();
    let mut x = caps.clone();
    let mut iterations = 0usize;
    let mut residual = f64::INFINITY;

    // Phase 1: damped fixed point of the multiplicative map, abandoned
    // early once the residual stops shrinking.
    let mut stalled = 0u32;
    for _ in 0..settings.max_iter {
        let r = eval.eval(dists, &x);
        let new_residual = max_residual(&r, targets);
        stalled = if new_residual > 0.9 * residual { stalled + 1 } else { 0 };
        residual = new_residual;
        if residual <= tol || stalled >= 8 {
            break;
        }
        iterations += 1;
        for j in 0..m {
            let phi = r[j] / targets[j] * x[j];
            x[j] = ((1.0 - settings.damping) * x[j] + settings.damping * phi)
                .clamp(0.0, caps[j]);
        }
    }

    // Phase 2: Gauss-Seidel coordinate bisections. When the targets sum to
    // 1 the sale is certain at the solution, which makes the residual flat
    // to first order along a uniform price shift; pinning the item with the
    // smallest price-to-support gap on the support infimum removes that
    // direction, and the remaining coordinates are well conditioned.
    if residual > tol {
        let sale_certain = total >= 1.0 - 1e-9;
        for _ in 0..60 {
            let mut pinned = usize::MAX;
            if sale_certain {
                let mut gap = f64::INFINITY;
                for (j, d) in dists.iter().enumerate() {
                    let g = x[j] - d.support().0;
                    if g < gap {
                        gap = g;
                        pinned = j;
                    }
                }
                if gap > 0.0 {
                    for xj in x.iter_mut() {
                        *xj -= gap;
                    }
                }
            }
            for j in 0..m {
                if j == pinned {
                    continue;
                }
                let f = |xx: f64| {
                    let mut probe = x.clone();
                    probe[j] = xx;
                    eval.eval_one(dists, &probe, j)
                };
                x[j] = numeric::bisect_decreasing(&f, 0.0, caps[j], targets[j], 1e-13, tol * 0.1);
            }
            iterations += 1;
            let r = eval.eval(dists, &x);
            residual = max_residual(&r, targets);
            if residual <= tol {
                break;
            }
        }
    }

    if residual > tol {
        let r = eval.eval(dists, &x);
        let res: Vec<f64> = r.iter().zip(targets).map(|(a, b)| a - b).collect();
        return Err(Error::numeric_with_residuals(
            format!("price solve did not converge (residual {residual:.3e} > {tol:.1e})"),
            res,
        ));
    }

    Ok(PriceSolve {
        prices: x,
        targets: targets.to_vec(),
        residual,
        iterations,
    })
}

fn max_residual(r: &[f64], targets: &[f64]) -> f64 {
    r.iter()
        .zip(targets)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}
