//! Every pricing rule as a constructor plus a uniform `Mechanism` object the
//! simulation engine can drive, together with the VCG and virtual-value
//! helpers used by the separable analysis.
//!
//! Conventions: steps are 1-based (buyer i arrives at step i), item ids are
//! 0-based, and `f64::INFINITY` marks an unavailable item in a menu. All
//! logarithms in price formulas are natural.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rand::Rng;
use serde::Serialize;

use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::market::{Marginal, ValuationModel};

use crate::oracle::estimate_match_probabilities;
use crate::solver::{solve_dynamic_prices, PriceSolve, SolverSettings};

/// Clipping window for the quantile arguments of the static separable rule;
/// for small n the min-expression can exceed 1 where F^-1 is undefined.
const Q_CLIP: f64 = 1e-12;

/// Single-item dynamic ladder: buyer i is offered `F^-1(1 - 1/(n-i+1))`.
/// The last entry is the support infimum, so the item always sells.
pub fn single_item_ladder(dist: &Distribution, n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| {
            let k = (n - i + 1) as f64;
            dist.quantile_ext(1.0 - 1.0 / k)
        })
        .collect()
}

/// Welfare-optimal single-item dynamic prices from the backward recursion
/// `p^(n) = 0`, `p^(i) = p^(i+1) + ∫_{p^(i+1)} (1 - F)`; `expected_welfare`
/// is the value `p^(0)` of the whole policy.
#[derive(Debug, Clone, Serialize)]
pub struct MdpPrices {
    /// prices[i-1] is the threshold shown to buyer i.
    pub prices: Vec<f64>,
    pub expected_welfare: f64,
}

pub fn mdp_optimal_prices(dist: &Distribution, n: usize) -> Result<MdpPrices> {
    if n == 0 {
        return Err(Error::domain("mdp_optimal_prices requires n >= 1"));
    }
    let mut prices = vec![0.0f64; n];
    for i in (0..n - 1).rev() {
        let next = prices[i + 1];
        let step = dist.tail_integral(next);
        if !step.is_finite() {
            return Err(Error::numeric("divergent tail integral in MDP recursion"));
        }
        prices[i] = next + step;
    }
    let expected_welfare = prices[0] + dist.tail_integral(prices[0]);
    Ok(MdpPrices {
        prices,
        expected_welfare,
    })
}

/// Static prices for independent unit-demand valuations:
/// `p_j = F_j^-1(1 - ln ln n / n)`. Valid for n >= 16 and at most
/// `n / (ln ln n)^2` non-dummy items; dummies are priced at infinity.
pub fn static_independent_prices(marginals: &[Marginal], n: usize) -> Result<Vec<f64>> {
    if n < 16 {
        return Err(Error::config(format!(
            "static independent prices need n >= 16 (got n={n}); ln ln n is too small below that"
        )));
    }
    let lln = (n as f64).ln().ln();
    let m_real = marginals.iter().filter(|m| !m.is_dummy()).count();
    let m_cap = n as f64 / (lln * lln);
    if m_real as f64 > m_cap {
        return Err(Error::config(format!(
            "static independent prices support at most n/(ln ln n)^2 = {m_cap:.1} items, got {m_real}"
        )));
    }
    let q = lln / n as f64;
    Ok(marginals
        .iter()
        .map(|m| match m.dist() {
            Some(d) => d.quantile_ext(1.0 - q),
            None => f64::INFINITY,
        })
        .collect())
}

/// Dynamic prices for independent valuations at one step: solves for the
/// price vector under which item j sells with probability
/// `q_j / buyers_left`. `q` is aligned with `remaining` and is renormalized
/// to sum to `buyers_left` before solving, absorbing estimation error.
pub fn dynamic_independent_prices(
    marginals: &[Marginal],
    remaining: &[usize],
    buyers_left: usize,
    q: &[f64],
    settings: &SolverSettings,
) -> Result<PriceSolve> {
    if remaining.is_empty() || q.len() != remaining.len() {
        return Err(Error::validation("one q estimate per remaining item required"));
    }
    if buyers_left == 0 {
        return Err(Error::domain("buyers_left must be >= 1"));
    }
    let dists: Vec<&Distribution> = remaining
        .iter()
        .map(|&j| {
            marginals[j]
                .dist()
                .ok_or_else(|| Error::validation(format!("item {j} is a dummy; price it at infinity")))
        })
        .collect::<Result<_>>()?;
    let total: f64 = q.iter().sum();
    if total <= 0.0 {
        return Err(Error::domain("q estimates must have positive mass"));
    }
    let scale = buyers_left as f64 / total;
    let targets: Vec<f64> = q
        .iter()
        .map(|&qi| (qi * scale / buyers_left as f64).clamp(1e-12, 1.0))
        .collect();
    solve_dynamic_prices(&dists, &targets, settings)
}

/// Quantile allocation rule: among the remaining items pick the one
/// maximizing `F_j(v_j)^(1/q_j)`; dummy items compete with an artificial
/// uniform draw. Returns the chosen item id.
pub fn quantile_allocate<R: Rng + ?Sized>(
    marginals: &[Marginal],
    remaining: &[usize],
    q: &[f64],
    values: &[f64],
    rng: &mut R,
) -> usize {
    debug_assert_eq!(remaining.len(), q.len());
    let mut best = f64::NEG_INFINITY;
    let mut arg = remaining[0];
    for (&j, &qj) in remaining.iter().zip(q) {
        let r = match &marginals[j] {
            Marginal::Mhr(d) => {
                debug_assert!(qj > 0.0);
                d.cdf(values[j]).powf(1.0 / qj)
            }
            Marginal::Dummy => rng.random::<f64>(),
        };
        if r > best {
            best = r;
            arg = j;
        }
    }
    arg
}

/// Static separable prices and the cutoff m-hat: items above
/// `m_hat = floor(n - n^(5/6))` are unavailable, the rest carry the
/// telescoping quantile prices with
/// `q_k = min{(k/n) 2 ln ln n, k/n + sqrt(ln n / n)}`.
pub fn static_separable_prices(
    alphas: &[f64],
    dist: &Distribution,
    n: usize,
) -> Result<(Vec<f64>, usize)> {
    let nf = n as f64;
    let m_hat = (nf - nf.powf(5.0 / 6.0)).floor();
    if m_hat < 1.0 {
        return Err(Error::config(format!(
            "static separable prices need n - n^(5/6) >= 1, got n={n}"
        )));
    }
    let m_hat = m_hat as usize;
    let mut alpha_p = vec![0.0f64; n + 1];
    let keep = n.min(alphas.len()).min(m_hat);
    alpha_p[..keep].copy_from_slice(&alphas[..keep]);
    let lln = nf.ln().ln();
    let sq = (nf.ln() / nf).sqrt();
    // threshold at q_k, 1-based k
    let threshold = |k: usize| -> f64 {
        let kf = k as f64;
        let q = (kf / nf * 2.0 * lln).min(kf / nf + sq).clamp(Q_CLIP, 1.0 - Q_CLIP);
        dist.quantile_ext(1.0 - q)
    };
    // suffix[j] = sum_{k=j+1..=n} (alpha'_k - alpha'_{k+1}) F^-1(1-q_k), 0-based j
    let mut prices = vec![f64::INFINITY; n];
    let mut suffix = 0.0f64;
    for k in (1..=n).rev() {
        let diff = alpha_p[k - 1] - if k < n { alpha_p[k] } else { 0.0 };
        suffix += diff * threshold(k);
        if k - 1 < m_hat {
            prices[k - 1] = suffix;
        }
    }
    Ok((prices, m_hat))
}

/// Dynamic separable prices for one step. `remaining` holds the sorted
/// 0-based ids of the n-i+1 unsold items; the returned vector is aligned
/// with it. Prices telescope over remaining positions, with the last
/// remaining item free: position t pays
/// `sum_{k=t..r-2} (alpha_{id_k} - alpha_{id_(k+1)}) F^-1(1 - (k+1)/r)`.
/// This makes a type in the k-th quantile band prefer exactly the k-th
/// remaining item and sells each remaining item with probability 1/r.
pub fn dynamic_separable_prices(
    step: usize,
    remaining: &[usize],
    alphas: &[f64],
    dist: &Distribution,
    n: usize,
) -> Result<Vec<f64>> {
    let r = n
        .checked_sub(step)
        .map(|x| x + 1)
        .ok_or_else(|| Error::domain(format!("step {step} out of 1..={n}")))?;
    if remaining.len() != r {
        return Err(Error::domain(format!(
            "step {step} of n={n} requires {r} remaining items, got {}",
            remaining.len()
        )));
    }
    if alphas.len() != n {
        return Err(Error::validation(format!(
            "alphas must have length n={n}, got {}",
            alphas.len()
        )));
    }
    debug_assert!(remaining.windows(2).all(|w| w[0] < w[1]));
    let rf = r as f64;
    let mut prices = vec![0.0f64; r];
    let mut suffix = 0.0f64;
    for t in (0..r.saturating_sub(1)).rev() {
        let a_cur = alphas[remaining[t]];
        let a_next = alphas[remaining[t + 1]];
        suffix += (a_cur - a_next) * dist.quantile_ext(1.0 - (t + 1) as f64 / rf);
        prices[t] = suffix;
    }
    Ok(prices)
}

/// Group-split dynamic prices for subadditive buyers: buyers are split into
/// m groups of n' = floor(n/m); the k-th buyer of group j sees item j at
/// the n'-buyer ladder price and everything else at infinity.
#[derive(Debug, Clone, Serialize)]
pub struct GroupLadders {
    pub n_prime: usize,
    /// ladders[j][k-1]: price of item j for the k-th buyer of group j.
    pub ladders: Vec<Vec<f64>>,
}

impl GroupLadders {
    /// The (item, price) shown to 1-based buyer `i`, or None for buyers
    /// beyond the last group.
    pub fn offer(&self, i: usize) -> Option<(usize, f64)> {
        if self.n_prime == 0 {
            return None;
        }
        let g = (i - 1) / self.n_prime;
        if g >= self.ladders.len() {
            return None;
        }
        let k = (i - 1) % self.n_prime;
        Some((g, self.ladders[g][k]))
    }
}

pub fn subadditive_group_prices(marginals: &[Marginal], n: usize) -> Result<GroupLadders> {
    let m = marginals.len();
    if m > n {
        return Err(Error::config(format!(
            "group pricing needs at least one buyer per item (m={m} > n={n})"
        )));
    }
    let n_prime = n / m;
    let ladders = marginals
        .iter()
        .map(|marg| match marg.dist() {
            Some(d) => Ok(single_item_ladder(d, n_prime)),
            None => Err(Error::config("group pricing does not support dummy items")),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GroupLadders { n_prime, ladders })
}

/// Low static prices for subadditive buyers:
/// `p_j = F_j^-1(1 - m ln ln n / n)`; requires m >= 2 (the m = 1 case is
/// the separable static rule) and the quantile argument in (0,1).
pub fn subadditive_static_prices(marginals: &[Marginal], n: usize) -> Result<Vec<f64>> {
    let m = marginals.len();
    if m < 2 {
        return Err(Error::config(
            "subadditive static prices need m >= 2; use the static separable rule for one item",
        ));
    }
    let q = m as f64 * (n as f64).ln().ln() / n as f64;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::config(format!(
            "subadditive static prices need m ln ln n / n in (0,1), got {q}"
        )));
    }
    marginals
        .iter()
        .map(|marg| match marg.dist() {
            Some(d) => Ok(d.quantile_ext(1.0 - q)),
            None => Ok(f64::INFINITY),
        })
        .collect()
}

/// Additive price rules: the dynamic variant offers every buyer the
/// per-item ladder simultaneously (buyers may take several items); the
/// static variant reuses the independent-case quantile.
pub enum AdditivePrices {
    Static(Vec<f64>),
    /// ladders[j][i-1]: price of item j for buyer i.
    Dynamic(Vec<Vec<f64>>),
}

pub fn additive_prices(marginals: &[Marginal], n: usize, static_prices: bool) -> Result<AdditivePrices> {
    if static_prices {
        if n < 16 {
            return Err(Error::config(format!(
                "additive static prices need n >= 16, got {n}"
            )));
        }
        let q = (n as f64).ln().ln() / n as f64;
        Ok(AdditivePrices::Static(
            marginals
                .iter()
                .map(|m| match m.dist() {
                    Some(d) => d.quantile_ext(1.0 - q),
                    None => f64::INFINITY,
                })
                .collect(),
        ))
    } else {
        Ok(AdditivePrices::Dynamic(
            marginals
                .iter()
                .map(|m| match m.dist() {
                    Some(d) => single_item_ladder(d, n),
                    None => vec![f64::INFINITY; n],
                })
                .collect(),
        ))
    }
}

/// VCG outcome on a separable profile: assortative allocation with the
/// telescoping threshold payments.
#[derive(Debug, Clone, Serialize)]
pub struct VcgOutcome {
    /// assignment[i] = item given to buyer i.
    pub assignment: Vec<Option<usize>>,
    /// payments[i] = amount charged to buyer i.
    pub payments: Vec<f64>,
    pub welfare: f64,
    pub revenue: f64,
}

pub fn vcg_separable(alphas: &[f64], types: &[f64]) -> VcgOutcome {
    debug_assert!(alphas.windows(2).all(|w| w[0] >= w[1]));
    let n = types.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| types[b].partial_cmp(&types[a]).unwrap().then(a.cmp(&b)));
    let mut alpha_p = vec![0.0f64; n + 1];
    let keep = alphas.len().min(n);
    alpha_p[..keep].copy_from_slice(&alphas[..keep]);
    // sorted (descending) types with v_(n+1) = 0
    let sorted: Vec<f64> = order.iter().map(|&i| types[i]).collect();
    let v_at = |k: usize| -> f64 {
        if k < n {
            sorted[k]
        } else {
            0.0
        }
    };
    // payment for item j (0-based): sum_{k=j..n-1} (a'_k - a'_{k+1}) v_(k+2 in 1-based)
    let mut assignment = vec![None; n];
    let mut payments = vec![0.0f64; n];
    let mut welfare = 0.0;
    let mut revenue = 0.0;
    let mut suffix = 0.0f64;
    let mut pay_for_item = vec![0.0f64; n];
    for j in (0..n).rev() {
        suffix += (alpha_p[j] - alpha_p[j + 1]) * v_at(j + 1);
        pay_for_item[j] = suffix;
    }
    for (j, &buyer) in order.iter().enumerate().take(alphas.len().min(n)) {
        if alpha_p[j] > 0.0 {
            assignment[buyer] = Some(j);
            payments[buyer] = pay_for_item[j];
            revenue += pay_for_item[j];
            welfare += alpha_p[j] * types[buyer];
        }
    }
    VcgOutcome {
        assignment,
        payments,
        welfare,
        revenue,
    }
}

/// Myerson virtual value `phi(t) = t - 1/h(t)`; non-decreasing in t for MHR
/// distributions.
pub fn virtual_value(dist: &Distribution, t: f64) -> Result<f64> {
    let (lo, _) = dist.support();
    if t < lo || dist.cdf(t) >= 1.0 {
        return Err(Error::domain(format!(
            "virtual value needs t in the support with F(t) < 1, got {t}"
        )));
    }
    let h = dist.hazard(t);
    if h.is_nan() || h <= 0.0 {
        return Err(Error::domain(format!("hazard rate vanishes at t={t}")));
    }
    Ok(t - 1.0 / h)
}

// ---------------------------------------------------------------------------
// Uniform mechanism object for the engine
// ---------------------------------------------------------------------------

/// Key for memoized per-step dynamic solves: (buyers left, canonical
/// fingerprints of the remaining non-dummy marginals). Buyers are i.i.d.
/// and item identities beyond their marginal do not matter, so identical
/// multisets share one solve.
type SolveKey = (usize, Vec<String>);

#[derive(Debug, Clone, Serialize)]
pub struct MechanismConfig {
    pub solver: SolverSettings,
    /// Monte Carlo trials per match-probability query (only used when the
    /// remaining items outnumber the remaining buyers).
    pub q_trials: usize,
    pub q_seed: u64,
}

impl Default for MechanismConfig {
    fn default() -> Self {
        MechanismConfig {
            solver: SolverSettings::default(),
            q_trials: 2000,
            q_seed: 0xabcdef,
        }
    }
}

/// A pricing rule bound to a model and a horizon, ready to simulate.
/// Static variants return the identical menu at every step; price tables
/// are precomputed where the rule permits.
pub enum Mechanism {
    Ladder { prices: Vec<f64> },
    MdpSingleItem { prices: Vec<f64>, expected_welfare: f64 },
    StaticIndependent { prices: Vec<f64> },
    DynamicIndependent {
        config: MechanismConfig,
        cache: RwLock<HashMap<SolveKey, Arc<PriceSolve>>>,
    },
    QuantileRule {
        config: MechanismConfig,
        qcache: RwLock<HashMap<SolveKey, Arc<Vec<f64>>>>,
    },
    StaticSeparable { prices: Vec<f64>, cutoff: usize },
    DynamicSeparable,
    SubadditiveGroups(GroupLadders),
    SubadditiveStatic { prices: Vec<f64> },
    AdditiveStatic { prices: Vec<f64> },
    AdditiveDynamic { ladders: Vec<Vec<f64>> },
    Vcg,
}

/// CLI identifiers of the selectable mechanisms.
pub const MECHANISM_IDS: &[&str] = &[
    "ladder",
    "mdp",
    "static-ind",
    "dyn-ind",
    "static-sep",
    "dyn-sep",
    "sub-dyn",
    "sub-static",
    "add-static",
    "add-dyn",
    "vcg",
];

impl Mechanism {
    /// Builds a mechanism for `n` buyers, returning it together with the
    /// effective model (padded to m = n where the rule requires a square
    /// market). Unknown ids and model/mechanism mismatches are usage and
    /// configuration errors respectively.
    pub fn build(
        id: &str,
        model: &ValuationModel,
        n: usize,
        config: MechanismConfig,
    ) -> Result<(Mechanism, ValuationModel)> {
        if n == 0 {
            return Err(Error::config("need at least one buyer"));
        }
        let mech = match id {
            "ladder" | "mdp" => {
                let d = single_real_item(model)?;
                if id == "ladder" {
                    Mechanism::Ladder {
                        prices: single_item_ladder(d, n),
                    }
                } else {
                    let t = mdp_optimal_prices(d, n)?;
                    Mechanism::MdpSingleItem {
                        prices: t.prices,
                        expected_welfare: t.expected_welfare,
                    }
                }
            }
            "static-ind" => {
                let marginals = unit_demand_marginals(model, id)?;
                Mechanism::StaticIndependent {
                    prices: static_independent_prices(marginals, n)?,
                }
            }
            "dyn-ind" => {
                require_unit_demand_independent(model, id)?;
                Mechanism::DynamicIndependent {
                    config,
                    cache: RwLock::new(HashMap::new()),
                }
            }
            "quantile" => {
                require_unit_demand_independent(model, id)?;
                Mechanism::QuantileRule {
                    config,
                    qcache: RwLock::new(HashMap::new()),
                }
            }
            "static-sep" => {
                let (alphas, dist) = separable_parts(model, id)?;
                let (prices, cutoff) = static_separable_prices(alphas, dist, n)?;
                Mechanism::StaticSeparable { prices, cutoff }
            }
            "dyn-sep" => {
                separable_parts(model, id)?;
                Mechanism::DynamicSeparable
            }
            "sub-dyn" => {
                let marginals = any_marginals(model, id)?;
                Mechanism::SubadditiveGroups(subadditive_group_prices(marginals, n)?)
            }
            "sub-static" => {
                let marginals = any_marginals(model, id)?;
                Mechanism::SubadditiveStatic {
                    prices: subadditive_static_prices(marginals, n)?,
                }
            }
            "add-static" | "add-dyn" => {
                let marginals = match model {
                    ValuationModel::AdditiveIndependent { marginals } => marginals,
                    _ => {
                        return Err(Error::config(format!(
                            "mechanism `{id}` requires an additive model"
                        )))
                    }
                };
                match additive_prices(marginals, n, id == "add-static")? {
                    AdditivePrices::Static(prices) => Mechanism::AdditiveStatic { prices },
                    AdditivePrices::Dynamic(ladders) => Mechanism::AdditiveDynamic { ladders },
                }
            }
            "vcg" => {
                separable_parts(model, id)?;
                Mechanism::Vcg
            }
            other => {
                return Err(Error::usage(format!(
                    "unknown mechanism `{other}`; valid ids: {}",
                    MECHANISM_IDS.join(", ")
                )))
            }
        };
        // Square markets for the rules whose step accounting needs m = n.
        let effective = match &mech {
            Mechanism::DynamicIndependent { .. } | Mechanism::QuantileRule { .. } => {
                if model.item_count() < n {
                    model.pad_to_square(n)?
                } else {
                    model.clone()
                }
            }
            Mechanism::DynamicSeparable
            | Mechanism::StaticSeparable { .. }
            | Mechanism::Vcg => model.pad_to_square(n)?,
            _ => model.clone(),
        };
        Ok((mech, effective))
    }

    pub fn id(&self) -> &'static str {
        match self {
            Mechanism::Ladder { .. } => "ladder",
            Mechanism::MdpSingleItem { .. } => "mdp",
            Mechanism::StaticIndependent { .. } => "static-ind",
            Mechanism::DynamicIndependent { .. } => "dyn-ind",
            Mechanism::QuantileRule { .. } => "quantile",
            Mechanism::StaticSeparable { .. } => "static-sep",
            Mechanism::DynamicSeparable => "dyn-sep",
            Mechanism::SubadditiveGroups(_) => "sub-dyn",
            Mechanism::SubadditiveStatic { .. } => "sub-static",
            Mechanism::AdditiveStatic { .. } => "add-static",
            Mechanism::AdditiveDynamic { .. } => "add-dyn",
            Mechanism::Vcg => "vcg",
        }
    }

    /// True when the rule posts prices and lets the buyer best-respond;
    /// false for the allocation-rule and batch variants.
    pub fn is_menu_based(&self) -> bool {
        !matches!(
            self,
            Mechanism::QuantileRule { .. } | Mechanism::DynamicSeparable | Mechanism::Vcg
        )
    }

    /// Per-step price of the only item on single-item markets where the
    /// rule has a closed per-step price; drives the engine's m = 1 fast
    /// path. Infinity marks steps with no offer.
    pub fn single_step_price(&self, step: usize) -> Option<f64> {
        match self {
            Mechanism::Ladder { prices } | Mechanism::MdpSingleItem { prices, .. } => {
                Some(prices[step - 1])
            }
            Mechanism::StaticIndependent { prices }
            | Mechanism::StaticSeparable { prices, .. }
            | Mechanism::SubadditiveStatic { prices }
            | Mechanism::AdditiveStatic { prices }
                if prices.len() == 1 =>
            {
                Some(prices[0])
            }
            Mechanism::AdditiveDynamic { ladders } if ladders.len() == 1 => {
                Some(ladders[0][step - 1])
            }
            Mechanism::SubadditiveGroups(g) if g.ladders.len() == 1 => {
                Some(g.offer(step).map_or(f64::INFINITY, |(_, p)| p))
            }
            _ => None,
        }
    }

    /// Price menu over all items for 1-based `step`; infinite entries mark
    /// unavailable items. `remaining` lists the unsold item ids, sorted.
    pub fn menu(
        &self,
        step: usize,
        n: usize,
        remaining: &[usize],
        model: &ValuationModel,
    ) -> Result<Vec<f64>> {
        let m = model.item_count();
        let mut menu = vec![f64::INFINITY; m];
        match self {
            Mechanism::Ladder { prices } | Mechanism::MdpSingleItem { prices, .. } => {
                if remaining.contains(&0) {
                    menu[0] = prices[step - 1];
                }
            }
            Mechanism::StaticIndependent { prices }
            | Mechanism::SubadditiveStatic { prices }
            | Mechanism::AdditiveStatic { prices }
            | Mechanism::StaticSeparable { prices, .. } => {
                for &j in remaining {
                    menu[j] = prices[j];
                }
            }
            Mechanism::AdditiveDynamic { ladders } => {
                for &j in remaining {
                    menu[j] = ladders[j][step - 1];
                }
            }
            Mechanism::SubadditiveGroups(g) => {
                if let Some((item, price)) = g.offer(step) {
                    if remaining.contains(&item) {
                        menu[item] = price;
                    }
                }
            }
            Mechanism::DynamicIndependent { config, cache } => {
                let buyers_left = n - step + 1;
                let marginals = model
                    .marginals()
                    .ok_or_else(|| Error::config("dyn-ind requires an independent model"))?;
                let real: Vec<usize> = remaining
                    .iter()
                    .copied()
                    .filter(|&j| !marginals[j].is_dummy())
                    .collect();
                if real.is_empty() {
                    return Ok(menu);
                }
                let solve = self.cached_solve(config, cache, marginals, &real, buyers_left, model)?;
                for (pos, &j) in real.iter().enumerate() {
                    menu[j] = solve.prices[pos];
                }
            }
            Mechanism::QuantileRule { .. } | Mechanism::DynamicSeparable | Mechanism::Vcg => {
                return Err(Error::config(format!(
                    "mechanism `{}` does not post price menus",
                    self.id()
                )))
            }
        }
        Ok(menu)
    }

    /// Per-remaining-item match probabilities used by the quantile rule.
    pub fn quantile_weights(
        &self,
        buyers_left: usize,
        remaining: &[usize],
        model: &ValuationModel,
    ) -> Result<Arc<Vec<f64>>> {
        match self {
            Mechanism::QuantileRule { config, qcache } => {
                if remaining.len() <= buyers_left {
                    // Square or thin market: every remaining item (dummies
                    // included) is matched in the remaining optimum.
                    return Ok(Arc::new(vec![1.0; remaining.len()]));
                }
                let marginals = model
                    .marginals()
                    .ok_or_else(|| Error::config("quantile rule requires an independent model"))?;
                let key = solve_key(buyers_left, marginals, remaining);
                if let Some(hit) = qcache.read().unwrap().get(&key) {
                    return Ok(hit.clone());
                }
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.q_seed);
                let est = estimate_match_probabilities(
                    model,
                    buyers_left,
                    remaining,
                    config.q_trials,
                    &mut rng,
                )?;
                // renormalize: the remaining optimum matches every buyer
                let total: f64 = est.q.iter().sum();
                let scale = if total > 0.0 {
                    buyers_left as f64 / total
                } else {
                    1.0
                };
                let q: Vec<f64> = est
                    .q
                    .iter()
                    .map(|&v| (v * scale).clamp(1e-9, 1.0))
                    .collect();
                let arc = Arc::new(q);
                qcache.write().unwrap().insert(key, arc.clone());
                Ok(arc)
            }
            _ => Err(Error::config("quantile weights only exist for the quantile rule")),
        }
    }

    fn cached_solve(
        &self,
        config: &MechanismConfig,
        cache: &RwLock<HashMap<SolveKey, Arc<PriceSolve>>>,
        marginals: &[Marginal],
        real_remaining: &[usize],
        buyers_left: usize,
        model: &ValuationModel,
    ) -> Result<Arc<PriceSolve>> {
        let key = solve_key(buyers_left, marginals, real_remaining);
        if let Some(hit) = cache.read().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let q = if real_remaining.len() <= buyers_left {
            // Square-or-thin remaining market: every real item is matched
            // in the remaining offline optimum.
            vec![1.0; real_remaining.len()]
        } else {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.q_seed);
            let est = estimate_match_probabilities(
                model,
                buyers_left,
                real_remaining,
                config.q_trials,
                &mut rng,
            )?;
            est.q.iter().map(|&v| v.max(1e-9)).collect()
        };
        let solve = dynamic_independent_prices(
            marginals,
            real_remaining,
            buyers_left,
            &q,
            &config.solver,
        )?;
        let arc = Arc::new(solve);
        cache.write().unwrap().insert(key, arc.clone());
        Ok(arc)
    }
}

use rand::SeedableRng;

fn solve_key(buyers_left: usize, marginals: &[Marginal], remaining: &[usize]) -> SolveKey {
    let mut fps: Vec<String> = remaining
        .iter()
        .map(|&j| match &marginals[j] {
            Marginal::Mhr(d) => d.to_string(),
            Marginal::Dummy => "dummy".to_string(),
        })
        .collect();
    fps.sort();
    (buyers_left, fps)
}

fn single_real_item(model: &ValuationModel) -> Result<&Distribution> {
    match model {
        ValuationModel::IndependentUnitDemand { marginals } if marginals.len() == 1 => marginals
            [0]
        .dist()
        .ok_or_else(|| Error::config("single-item mechanisms need a real (non-dummy) item")),
        _ => Err(Error::config(
            "single-item mechanisms require `independent: [dist]` with exactly one item",
        )),
    }
}

fn unit_demand_marginals<'a>(model: &'a ValuationModel, id: &str) -> Result<&'a [Marginal]> {
    match model {
        ValuationModel::IndependentUnitDemand { marginals } => Ok(marginals),
        _ => Err(Error::config(format!(
            "mechanism `{id}` requires an independent unit-demand model"
        ))),
    }
}

fn require_unit_demand_independent(model: &ValuationModel, id: &str) -> Result<()> {
    unit_demand_marginals(model, id).map(|_| ())
}

fn any_marginals<'a>(model: &'a ValuationModel, id: &str) -> Result<&'a [Marginal]> {
    match model {
        ValuationModel::IndependentUnitDemand { marginals }
        | ValuationModel::AdditiveIndependent { marginals } => Ok(marginals),
        _ => Err(Error::config(format!(
            "mechanism `{id}` requires independent marginals (unit-demand or additive)"
        ))),
    }
}

fn separable_parts<'a>(model: &'a ValuationModel, id: &str) -> Result<(&'a [f64], &'a Distribution)> {
    match model {
        ValuationModel::Separable { alphas, type_dist } => Ok((alphas, type_dist)),
        _ => Err(Error::config(format!(
            "mechanism `{id}` requires a separable model"
        ))),
    }
}

/// Band index of the dynamic separable rule: with thresholds at
/// `F^-1(1 - k/r)`, a buyer of type v takes the remaining position
/// `floor((1 - F(v)) * r)` (clamped), matching the tie-breaking in the
/// rule's analysis.
pub fn separable_band(dist: &Distribution, v: f64, r: usize) -> usize {
    let u = 1.0 - dist.cdf(v);
    ((u * r as f64).floor() as usize).min(r - 1)
}
