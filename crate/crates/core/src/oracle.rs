//! Offline benchmarks: exact maximum-weight matching, the separable closed
//! form, the per-item subadditive upper bound, the ex-ante relaxation bound,
//! and Monte Carlo estimation of the optimum's match probabilities.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::market::ValuationModel;
use crate::order_stats::max_expectation;

/// Result of an exact assignment computation.
#[derive(Debug, Clone, Serialize)]
pub struct MatchingResult {
    /// Item assigned to each buyer; zero-value pairings count as unmatched.
    pub assignment: Vec<Option<usize>>,
    pub welfare: f64,
    /// item_matched[j] is true iff item j is assigned with positive value.
    pub item_matched: Vec<bool>,
}

/// Exact maximum-weight bipartite matching of an n-by-m non-negative value
/// matrix (row-major), via the O(s^3) Hungarian algorithm with potentials on
/// the zero-padded square. Ties resolve toward lower item indices through
/// the deterministic scan order.
pub fn max_weight_matching(values: &[f64], n: usize, m: usize) -> Result<MatchingResult> {
    if values.len() != n * m {
        return Err(Error::validation(format!(
            "value matrix length {} does not match {n}x{m}",
            values.len()
        )));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::validation("NaN entry in value matrix"));
    }
    if values.iter().any(|&v| v < 0.0 || v == f64::INFINITY) {
        return Err(Error::validation("entries must be finite and non-negative"));
    }
    let s = n.max(m);
    // Minimization on negated, zero-padded costs.
    let cost = |i: usize, j: usize| -> f64 {
        if i < n && j < m {
            -values[i * m + j]
        } else {
            0.0
        }
    };

    // Potentials-based Hungarian, 1-indexed internally.
    let mut u = vec![0.0f64; s + 1];
    let mut v = vec![0.0f64; s + 1];
    let mut p = vec![0usize; s + 1]; // p[j] = row matched to column j
    let mut way = vec![0usize; s + 1];
    for i in 1..=s {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; s + 1];
        let mut used = vec![false; s + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=s {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=s {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![None; n];
    let mut item_matched = vec![false; m];
    for j in 1..=s {
        let i = p[j];
        if i >= 1 && i <= n && j <= m {
            let val = values[(i - 1) * m + (j - 1)];
            if val > 0.0 {
                assignment[i - 1] = Some(j - 1);
                item_matched[j - 1] = true;
            }
        }
    }
    // Welfare summed in ascending item order for reproducibility.
    let mut welfare = 0.0;
    for j in 0..m {
        if item_matched[j] {
            let buyer = assignment
                .iter()
                .position(|a| *a == Some(j))
                .expect("matched item has a buyer");
            welfare += values[buyer * m + j];
        }
    }
    Ok(MatchingResult {
        assignment,
        welfare,
        item_matched,
    })
}

/// Exhaustive assignment search; test oracle for small instances. The
/// winning assignment's welfare is re-summed in ascending item order so it
/// is bit-comparable with `max_weight_matching`.
pub fn brute_force_matching(values: &[f64], n: usize, m: usize) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(
        values: &[f64],
        n: usize,
        m: usize,
        i: usize,
        acc: f64,
        used: &mut Vec<bool>,
        cur: &mut Vec<Option<usize>>,
        best: &mut (f64, Vec<Option<usize>>),
    ) {
        if i == n {
            if acc > best.0 {
                *best = (acc, cur.clone());
            }
            return;
        }
        cur[i] = None;
        rec(values, n, m, i + 1, acc, used, cur, best);
        for j in 0..m {
            if !used[j] {
                used[j] = true;
                cur[i] = Some(j);
                rec(values, n, m, i + 1, acc + values[i * m + j], used, cur, best);
                used[j] = false;
            }
        }
        cur[i] = None;
    }
    let mut used = vec![false; m];
    let mut cur = vec![None; n];
    let mut best = (f64::NEG_INFINITY, vec![None; n]);
    rec(values, n, m, 0, 0.0, &mut used, &mut cur, &mut best);
    let mut welfare = 0.0;
    for j in 0..m {
        if let Some(buyer) = best.1.iter().position(|a| *a == Some(j)) {
            welfare += values[buyer * m + j];
        }
    }
    welfare
}

/// Optimal separable welfare: sum over items of alpha_j times the j-th
/// highest type. `alphas` must be non-increasing.
pub fn separable_optimum(alphas: &[f64], types: &[f64]) -> f64 {
    debug_assert!(alphas.windows(2).all(|w| w[0] >= w[1]));
    let mut sorted = types.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut w = 0.0;
    for (j, &a) in alphas.iter().enumerate().take(sorted.len()) {
        w += a * sorted[j];
    }
    w
}

/// Per-item upper bound on the expected optimum for subadditive buyers:
/// the sum over items of the expected maximum of n draws.
pub fn subadditive_upper_bound(marginals: &[crate::market::Marginal], n: usize) -> Result<f64> {
    let mut total = 0.0;
    for m in marginals {
        if let Some(d) = m.dist() {
            total += max_expectation(d, n)?;
        }
    }
    Ok(total)
}

/// Contribution of one item to the ex-ante relaxation:
/// `q1 * E[v | v >= F^-1(1 - q1/n)]`, by quadrature.
pub fn exante_item_bound(dist: &Distribution, q1: f64, n: usize) -> Result<f64> {
    if !(q1 > 0.0 && q1 <= 1.0) {
        return Err(Error::domain(format!("q1 must lie in (0,1], got {q1}")));
    }
    if n == 0 {
        return Err(Error::domain("n must be >= 1"));
    }
    let tau = dist.quantile_ext(1.0 - q1 / n as f64);
    Ok(q1 * dist.conditional_tail_mean(tau)?)
}

/// Empirical frequencies with which each remaining item is matched in the
/// offline optimum over fresh profiles.
#[derive(Debug, Clone, Serialize)]
pub struct MatchProbabilities {
    /// Item ids these estimates refer to.
    pub items: Vec<usize>,
    pub q: Vec<f64>,
    pub se: Vec<f64>,
    pub trials: usize,
}

/// Estimates the probability that each item in `remaining` is matched in
/// the offline optimum over `n_remaining` fresh buyers. Conditioning is on
/// the remaining item set only; by exchangeability of i.i.d. buyers the
/// realized prefix values carry no extra information for this estimate.
pub fn estimate_match_probabilities(
    model: &ValuationModel,
    n_remaining: usize,
    remaining: &[usize],
    trials: usize,
    rng: &mut ChaCha8Rng,
) -> Result<MatchProbabilities> {
    if trials == 0 {
        return Err(Error::domain("trials must be >= 1"));
    }
    if n_remaining == 0 {
        return Err(Error::domain("n_remaining must be >= 1"));
    }
    let m_full = model.item_count();
    for &j in remaining {
        if j >= m_full {
            return Err(Error::validation(format!("item id {j} out of range")));
        }
    }
    let base = rng.next_u64();
    let k = remaining.len();
    let counts: Vec<u64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut trial_rng = ChaCha8Rng::seed_from_u64(base);
            trial_rng.set_stream(t as u64);
            let profile = model.sample_profile(n_remaining, &mut trial_rng);
            let mut sub = vec![0.0f64; n_remaining * k];
            for i in 0..n_remaining {
                for (c, &j) in remaining.iter().enumerate() {
                    sub[i * k + c] = profile.value(i, j);
                }
            }
            let res = max_weight_matching(&sub, n_remaining, k).expect("finite values");
            let mut mask = vec![0u64; k];
            for (c, &hit) in res.item_matched.iter().enumerate() {
                mask[c] = hit as u64;
            }
            mask
        })
        .reduce(
            || vec![0u64; k],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let tf = trials as f64;
    let q: Vec<f64> = counts.iter().map(|&c| c as f64 / tf).collect();
    let se: Vec<f64> = q.iter().map(|&p| (p * (1.0 - p) / tf).sqrt()).collect();
    Ok(MatchProbabilities {
        items: remaining.to_vec(),
        q,
        se,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::Marginal;
    use proptest::prelude::*;

    #[test]
    fn matching_small_examples() {
        // [[3,1],[2,4]] -> diagonal, welfare 7
        let r = max_weight_matching(&[3.0, 1.0, 2.0, 4.0], 2, 2).unwrap();
        assert_eq!(r.welfare, 7.0);
        assert_eq!(r.assignment, vec![Some(0), Some(1)]);

        let r = max_weight_matching(&[5.0], 1, 1).unwrap();
        assert_eq!(r.welfare, 5.0);

        // separable profile alphas=(2,1), types=(3,5): 2*5 + 1*3 = 13
        let alphas = [2.0, 1.0];
        let types = [3.0, 5.0];
        let vals: Vec<f64> = (0..2)
            .flat_map(|i| alphas.iter().map(move |a| a * types[i]))
            .collect();
        let r = max_weight_matching(&vals, 2, 2).unwrap();
        assert_eq!(r.welfare, 13.0);
        assert_eq!(r.welfare, separable_optimum(&alphas, &types));
    }

    #[test]
    fn matching_rejects_bad_input() {
        assert!(max_weight_matching(&[1.0, f64::NAN], 1, 2).is_err());
        assert!(max_weight_matching(&[1.0, -2.0], 1, 2).is_err());
        assert!(max_weight_matching(&[1.0], 1, 2).is_err());
    }

    #[test]
    fn matching_equals_brute_force_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..300 {
            let n = rng.random_range(1..=5usize);
            let m = rng.random_range(1..=5usize);
            let vals: Vec<f64> = (0..n * m).map(|_| rng.random::<f64>() * 10.0).collect();
            let fast = max_weight_matching(&vals, n, m).unwrap();
            let slow = brute_force_matching(&vals, n, m);
            assert_eq!(fast.welfare, slow, "n={n} m={m}");
        }
    }

    proptest! {
        // Increasing any single entry never decreases the optimal welfare.
        #[test]
        fn matching_welfare_monotone(
            vals in proptest::collection::vec(0.0f64..10.0, 9),
            idx in 0usize..9,
            bump in 0.0f64..5.0,
        ) {
            let before = max_weight_matching(&vals, 3, 3).unwrap().welfare;
            let mut v2 = vals.clone();
            v2[idx] += bump;
            let after = max_weight_matching(&v2, 3, 3).unwrap().welfare;
            prop_assert!(after >= before);
        }
    }

    #[test]
    fn separable_optimum_examples() {
        assert_eq!(separable_optimum(&[1.0, 0.0], &[2.0, 7.0, 4.0]), 7.0);
        assert_eq!(separable_optimum(&[1.0, 1.0], &[2.0, 7.0, 4.0]), 11.0);
        assert_eq!(separable_optimum(&[1.0, 1.0, 1.0], &[2.0]), 2.0);
    }

    #[test]
    fn subadditive_bound_examples() {
        let e = Distribution::exponential(1.0).unwrap();
        let u = Distribution::uniform(0.0, 1.0).unwrap();
        let h5 = crate::numeric::harmonic(5);
        let b = subadditive_upper_bound(&[Marginal::Mhr(e.clone())], 5).unwrap();
        assert!((b - h5).abs() < 1e-7);
        let b2 = subadditive_upper_bound(
            &[Marginal::Mhr(e.clone()), Marginal::Mhr(u.clone())],
            9,
        )
        .unwrap();
        assert!((b2 - (crate::numeric::harmonic(9) + 0.9)).abs() < 1e-6);
        assert_eq!(
            subadditive_upper_bound(&[Marginal::Dummy, Marginal::Dummy], 4).unwrap(),
            0.0
        );
    }

    #[test]
    fn exante_bound_examples() {
        let e = Distribution::exponential(1.0).unwrap();
        // q1 = 1, n = 10: memorylessness gives ln(10) + 1.
        let b = exante_item_bound(&e, 1.0, 10).unwrap();
        assert!((b - (10.0f64.ln() + 1.0)).abs() < 1e-7, "{b}");
        let u = Distribution::uniform(0.0, 1.0).unwrap();
        let b = exante_item_bound(&u, 1.0, 2).unwrap();
        assert!((b - 0.75).abs() < 1e-8);
        // q1 -> 0 limit is 0
        let tiny = exante_item_bound(&e, 1e-9, 10).unwrap();
        assert!(tiny < 1e-6);
        assert!(exante_item_bound(&e, 0.0, 10).is_err());
    }

    #[test]
    fn match_probabilities_square_and_asymmetric() {
        let e = Distribution::exponential(1.0).unwrap();
        let model = ValuationModel::independent_unit_demand(vec![
            Marginal::Mhr(e.clone()),
            Marginal::Mhr(e.clone()),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);

        // m <= n: every real item matched with probability 1.
        let est = estimate_match_probabilities(&model, 3, &[0, 1], 400, &mut rng).unwrap();
        for (&q, &se) in est.q.iter().zip(&est.se) {
            assert!(q >= 1.0 - 3.0 * se.max(1e-9), "q={q}");
        }

        // 1 buyer, 2 iid items: each matched with probability ~1/2.
        let est = estimate_match_probabilities(&model, 1, &[0, 1], 4000, &mut rng).unwrap();
        for (&q, &se) in est.q.iter().zip(&est.se) {
            assert!((q - 0.5).abs() <= 3.0 * se, "q={q} se={se}");
        }

        // dummy item never matched while a real item is available
        let model2 = ValuationModel::independent_unit_demand(vec![
            Marginal::Mhr(e),
            Marginal::Dummy,
        ])
        .unwrap();
        let est = estimate_match_probabilities(&model2, 1, &[0, 1], 500, &mut rng).unwrap();
        assert_eq!(est.q[1], 0.0);
    }
}
