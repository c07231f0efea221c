//! Named verification claims: the checkable analytic and statistical
//! content of the library bundled behind one entry point, with every
//! tolerance pinned here. The CLI `verify` command and the acceptance test
//! suite both run these.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::{
    exp_mdp_recursion_value, exp_static_best, exp_static_welfare, mdp_bound_check,
    ratio_trend_fit, static_case_bound_check, TrendModel,
};
use crate::dist::Distribution;
use crate::error::Result;
use crate::market::{best_response, BuyerKind, Marginal, ValuationModel};
use crate::mechanism::{dynamic_independent_prices, mdp_optimal_prices, Mechanism, MechanismConfig};
use crate::numeric::harmonic;
use crate::oracle::{brute_force_matching, max_weight_matching, separable_optimum};
use crate::order_stats::{
    check_babaioff_ratio, check_quantile_maximum, check_quantiles1, check_quantiles2,
    order_stat_mean,
};
use crate::sim::{allocation_frequency_audit, run_trials, OracleKind, SimOptions};
use crate::solver::SolverSettings;

#[derive(Debug, Clone, Serialize)]
pub struct ClaimResult {
    pub id: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl ClaimResult {
    pub fn line(&self) -> String {
        format!(
            "{} {:<22} ({:.1}s) {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.seconds,
            self.detail
        )
    }
}

pub const CLAIM_IDS: &[&str] = &[
    "exp-oracle-harmonic",
    "mdp-recursion",
    "static-closed-form",
    "allocation-audit",
    "quantile-lemma-grid",
    "matching-oracle",
    "ratio-trend",
    "welfare-domination",
    "subadditive-sales",
    "fixed-point-solver",
];

/// Runs the selected claims (all of them for an empty filter) in order.
pub fn run_claims(filter: &[String]) -> Result<Vec<ClaimResult>> {
    let wanted = |id: &str| filter.is_empty() || filter.iter().any(|f| f == id);
    let mut out = Vec::new();
    for &id in CLAIM_IDS {
        if !wanted(id) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match id {
            "exp-oracle-harmonic" => claim_exp_oracle()?,
            "mdp-recursion" => claim_mdp_recursion()?,
            "static-closed-form" => claim_static_closed_form()?,
            "allocation-audit" => claim_allocation_audit()?,
            "quantile-lemma-grid" => claim_quantile_lemmas()?,
            "matching-oracle" => claim_matching_oracle()?,
            "ratio-trend" => claim_ratio_trend()?,
            "welfare-domination" => claim_welfare_domination()?,
            "subadditive-sales" => claim_subadditive()?,
            "fixed-point-solver" => claim_fixed_point()?,
            _ => unreachable!(),
        };
        let seconds = start.elapsed().as_secs_f64();
        // runtime budgets are part of the claims that state them
        let (pass, detail) = match id {
            "exp-oracle-harmonic" if seconds >= 10.0 => {
                (false, format!("{detail}; runtime {seconds:.1}s exceeds 10s"))
            }
            "mdp-recursion" if seconds >= 5.0 => {
                (false, format!("{detail}; runtime {seconds:.1}s exceeds 5s"))
            }
            "ratio-trend" if seconds >= 120.0 => {
                (false, format!("{detail}; runtime {seconds:.1}s exceeds 120s"))
            }
            _ => (pass, detail),
        };
        out.push(ClaimResult {
            id,
            pass,
            detail,
            seconds,
        });
    }
    Ok(out)
}

fn exp1() -> Distribution {
    Distribution::exponential(1.0).unwrap()
}

fn single_exp_model() -> ValuationModel {
    ValuationModel::independent_unit_demand(vec![Marginal::Mhr(exp1())]).unwrap()
}

/// Single item, Exp(1), n = 1000, 1e5 trials: simulated E[SW_opt] within
/// 3 SE of H_1000.
fn claim_exp_oracle() -> Result<(bool, String)> {
    let n = 1000;
    let trials = 100_000;
    let model = single_exp_model();
    let (mech, eff) = Mechanism::build("ladder", &model, n, MechanismConfig::default())?;
    let s = run_trials(&eff, &mech, n, OracleKind::Auto, trials, 0xC1, &SimOptions::default())?;
    let h = harmonic(n);
    let dev = (s.sw_opt_mean - h).abs();
    let pass = dev <= 3.0 * s.sw_opt_se;
    Ok((
        pass,
        format!(
            "E[SW_opt] = {:.5} vs H_1000 = {:.5} ({:+.2} SE over {trials} trials)",
            s.sw_opt_mean,
            h,
            (s.sw_opt_mean - h) / s.sw_opt_se
        ),
    ))
}

/// p^(n-1) = 1 and p^(n-2) = 1 + 1/e within 1e-9; the threshold recursion
/// stays below H_k - 1/8 up to k = 1e5; the general-distribution and
/// closed-form recursions agree to 1e-12.
fn claim_mdp_recursion() -> Result<(bool, String)> {
    let d = exp1();
    let t = mdp_optimal_prices(&d, 1000)?;
    let e1 = (t.prices[999 - 1] - 1.0).abs();
    let e2 = (t.prices[999 - 2] - (1.0 + (-1.0f64).exp())).abs();
    let report = mdp_bound_check(100_000)?;
    let mut agree = 0.0f64;
    for n in [10usize, 1000, 100_000] {
        let a = exp_mdp_recursion_value(n);
        let b = mdp_optimal_prices(&d, n)?.expected_welfare;
        agree = agree.max((a - b).abs());
    }
    let pass = e1 <= 1e-9 && e2 <= 1e-9 && report.pass && agree <= 1e-12;
    Ok((
        pass,
        format!(
            "landmark errs ({e1:.1e}, {e2:.1e}), bound margin {:.3e}, path agreement {agree:.1e}",
            -report.max_violation
        ),
    ))
}

/// Simulated single-item static welfare matches the closed form within
/// 3 SE at 1e5 trials for (n, p) in {10, 100, 1000} x {1, ln n, H_n}.
fn claim_static_closed_form() -> Result<(bool, String)> {
    let trials = 100_000;
    let model = single_exp_model();
    let mut worst = 0.0f64;
    let mut pass = true;
    for n in [10usize, 100, 1000] {
        for p in [1.0, (n as f64).ln(), harmonic(n)] {
            let mech = Mechanism::StaticIndependent { prices: vec![p] };
            let s = run_trials(
                &model,
                &mech,
                n,
                OracleKind::Auto,
                trials,
                0xC3,
                &SimOptions::default(),
            )?;
            let expect = exp_static_welfare(n, p);
            let dev = (s.sw_pp_mean - expect).abs() / s.sw_pp_se.max(1e-12);
            worst = worst.max(dev);
            pass &= dev <= 3.0;
        }
    }
    Ok((pass, format!("worst deviation {worst:.2} SE across 9 grid points")))
}

/// Dynamic-separable and quantile allocation with m = n = 8, 1e5 trials:
/// every (step, item) frequency within 4 SE of 1/8.
fn claim_allocation_audit() -> Result<(bool, String)> {
    let n = 8;
    let trials = 100_000;
    let opts = SimOptions {
        track_allocations: true,
        ..Default::default()
    };

    let alphas: Vec<f64> = (0..n).map(|j| 1.0 - j as f64 / n as f64).collect();
    let sep = ValuationModel::separable(alphas, exp1())?;
    let (mech, eff) = Mechanism::build("dyn-sep", &sep, n, MechanismConfig::default())?;
    let s = run_trials(&eff, &mech, n, OracleKind::Auto, trials, 0xC4, &opts)?;
    let audit_sep = allocation_frequency_audit(&s, None)?;

    let marginals = vec![
        Marginal::Mhr(exp1()),
        Marginal::Mhr(Distribution::uniform(0.0, 1.0)?),
        Marginal::Mhr(Distribution::weibull(2.0, 1.0)?),
        Marginal::Mhr(Distribution::exponential(0.5)?),
        Marginal::Mhr(Distribution::uniform(0.0, 2.0)?),
        Marginal::Mhr(Distribution::weibull(3.0, 2.0)?),
        Marginal::Mhr(Distribution::exponential(2.0)?),
        Marginal::Mhr(Distribution::uniform(0.5, 1.5)?),
    ];
    let ind = ValuationModel::independent_unit_demand(marginals)?;
    let (mech, eff) = Mechanism::build("quantile", &ind, n, MechanismConfig::default())?;
    let s = run_trials(&eff, &mech, n, OracleKind::Auto, trials, 0xC4, &opts)?;
    let audit_q = allocation_frequency_audit(&s, None)?;

    let pass = audit_sep.pass && audit_q.pass;
    Ok((
        pass,
        format!(
            "max |freq - 1/8|: dyn-sep {:.2} SE, quantile {:.2} SE (128 cells)",
            audit_sep.max_dev_se, audit_q.max_dev_se
        ),
    ))
}

/// All four quantile/order-statistic lemma checks over the full family/n
/// grid; for Exp(1) the first lemma holds with 1e-6 relative equality.
fn claim_quantile_lemmas() -> Result<(bool, String)> {
    let dists = [
        exp1(),
        Distribution::uniform(0.0, 1.0)?,
        Distribution::weibull(2.0, 1.0)?,
    ];
    let mut checks = 0usize;
    let mut failures = Vec::new();
    for d in &dists {
        for &n in &[10usize, 100, 1000] {
            for &j in &[1usize, 2, n / 2, n] {
                let q_lo = (-(harmonic(n) - harmonic(j - 1))).exp();
                for q in [q_lo, (q_lo + 1.0) / 2.0, 0.9, 1.0] {
                    if !(q_lo..=1.0).contains(&q) {
                        continue;
                    }
                    checks += 1;
                    if !check_quantiles1(d, n, j, q)? {
                        failures.push(format!("q1 {d} n={n} j={j} q={q:.3}"));
                    }
                    if matches!(d, Distribution::Exponential { .. }) && q < 1.0 {
                        let lhs = -(q.ln());
                        let rhs = -q.ln() / (harmonic(n) - harmonic(j - 1))
                            * order_stat_mean(d, n, j)?;
                        if (lhs - rhs).abs() > 1e-6 * lhs.abs().max(1e-9) {
                            failures.push(format!("q1-equality n={n} j={j} q={q:.3}"));
                        }
                    }
                }
            }
            for q in [0.01, 0.05, 0.1, 0.3, 0.5, 0.9] {
                checks += 1;
                if !check_quantiles2(d, n, q)? {
                    failures.push(format!("q2 {d} n={n} q={q}"));
                }
            }
            for &k in &[3usize, 5, 10, 20, 50] {
                for z in [0.02, 0.05, 0.1, 0.2] {
                    let alpha = ((1.0 + (1.0f64 / z).ln()) / harmonic(k)).max(1.0);
                    if alpha * k as f64 > 1.0 / z {
                        continue; // inadmissible corner
                    }
                    checks += 1;
                    if !check_quantile_maximum(d, z, k, alpha)? {
                        failures.push(format!("qmax {d} k={k} z={z}"));
                    }
                }
            }
            for (a, b) in [(1usize, n), (2, 8.min(n)), (10.min(n), n), (n / 2, n), (n, n)] {
                let a = a.max(1);
                checks += 1;
                if !check_babaioff_ratio(d, a, b.max(a))? {
                    failures.push(format!("babaioff {d} {a}/{b}"));
                }
            }
        }
    }
    let pass = failures.is_empty();
    Ok((
        pass,
        if pass {
            format!("{checks} lemma instances hold")
        } else {
            format!("failed: {}", failures.join("; "))
        },
    ))
}

/// Hungarian equals exhaustive search exactly on 1e3 random instances with
/// n, m <= 6, and equals the separable closed form exactly on separable
/// profiles.
fn claim_matching_oracle() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC6);
    let mut pass = true;
    for _ in 0..1000 {
        let n = rng.random_range(1..=6usize);
        let m = rng.random_range(1..=6usize);
        let vals: Vec<f64> = (0..n * m).map(|_| rng.random::<f64>() * 10.0).collect();
        let fast = max_weight_matching(&vals, n, m)?.welfare;
        let slow = brute_force_matching(&vals, n, m);
        pass &= fast == slow;
    }
    let mut sep_pass = true;
    for _ in 0..200 {
        let n = rng.random_range(1..=7usize);
        let mut alphas: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        alphas.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let types: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 3.0).collect();
        let mut vals = Vec::with_capacity(n * n);
        for &t in &types {
            for &a in &alphas {
                vals.push(a * t);
            }
        }
        let matched = max_weight_matching(&vals, n, n)?.welfare;
        sep_pass &= matched == separable_optimum(&alphas, &types);
    }
    Ok((
        pass && sep_pass,
        format!("1000 brute-force instances exact: {pass}; separable closed form exact: {sep_pass}"),
    ))
}

/// Ladder ratios over n in {2^6, 2^8, 2^10, 2^12, 2^14} at 1e4 trials:
/// strictly increasing beyond 3 SE, trend fit c > 0 with R^2 >= 0.9, and
/// the dynamic ratio beats the best static ratio at n = 2^12 by > 3 SE.
fn claim_ratio_trend() -> Result<(bool, String)> {
    let trials = 10_000;
    let model = single_exp_model();
    let ns: Vec<usize> = vec![64, 256, 1024, 4096, 16384];
    let mut ratios = Vec::new();
    let mut ses = Vec::new();
    for &n in &ns {
        let (mech, eff) = Mechanism::build("ladder", &model, n, MechanismConfig::default())?;
        let s = run_trials(&eff, &mech, n, OracleKind::Auto, trials, 0xC7, &SimOptions::default())?;
        ratios.push(s.ratio);
        ses.push(s.ratio_se);
    }
    let mut increasing = true;
    for k in 0..ns.len() - 1 {
        let gap = ratios[k + 1] - ratios[k];
        let noise = 3.0 * (ses[k] * ses[k] + ses[k + 1] * ses[k + 1]).sqrt();
        increasing &= gap > noise;
    }
    let fit = ratio_trend_fit(&ns, &ratios, TrendModel::OneOverLog)?;
    let fit_ok = fit.c > 0.0 && fit.r_squared >= 0.9;

    // dynamic vs best static at n = 2^12, common random numbers
    let n = 4096;
    let opts = SimOptions {
        keep_series: true,
        ..Default::default()
    };
    let (mech, eff) = Mechanism::build("ladder", &model, n, MechanismConfig::default())?;
    let dyn_s = run_trials(&eff, &mech, n, OracleKind::Auto, trials, 0xC7D, &opts)?;
    let best = exp_static_best(n);
    let static_mech = Mechanism::StaticIndependent {
        prices: vec![best.price],
    };
    let stat_s = run_trials(&model, &static_mech, n, OracleKind::Auto, trials, 0xC7D, &opts)?;
    let dyn_series = dyn_s.series.as_ref().unwrap();
    let stat_series = stat_s.series.as_ref().unwrap();
    let diffs: Vec<f64> = dyn_series
        .sw_pp
        .iter()
        .zip(&stat_series.sw_pp)
        .map(|(a, b)| a - b)
        .collect();
    let mean_d = diffs.iter().sum::<f64>() / trials as f64;
    let var_d = diffs.iter().map(|d| (d - mean_d) * (d - mean_d)).sum::<f64>()
        / (trials as f64 - 1.0);
    let se_ratio_diff = (var_d / trials as f64).sqrt() / dyn_s.sw_opt_mean;
    let ratio_gap = dyn_s.ratio - stat_s.ratio;
    let separation = ratio_gap > 3.0 * se_ratio_diff;

    let pass = increasing && fit_ok && separation;
    Ok((
        pass,
        format!(
            "ratios {:?} increasing={increasing}; fit c={:.3} R2={:.3}; dyn-static gap {:.4} vs 3SE {:.4}",
            ratios
                .iter()
                .map(|r| (r * 1e4).round() / 1e4)
                .collect::<Vec<_>>(),
            fit.c,
            fit.r_squared,
            ratio_gap,
            3.0 * se_ratio_diff
        ),
    ))
}

/// Posted prices from the fixed-point rule dominate the quantile allocation
/// rule's welfare within 3 SE on common random numbers, m = n in {2, 4, 8}.
fn claim_welfare_domination() -> Result<(bool, String)> {
    let trials = 20_000;
    let mut details = Vec::new();
    let mut pass = true;
    for n in [2usize, 4, 8] {
        let marginals: Vec<Marginal> = match n {
            2 => vec![
                Marginal::Mhr(exp1()),
                Marginal::Mhr(Distribution::uniform(0.0, 2.0)?),
            ],
            4 => vec![
                Marginal::Mhr(exp1()),
                Marginal::Mhr(Distribution::uniform(0.0, 2.0)?),
                Marginal::Mhr(Distribution::weibull(2.0, 1.0)?),
                Marginal::Mhr(Distribution::exponential(0.5)?),
            ],
            _ => (0..n).map(|_| Marginal::Mhr(exp1())).collect(),
        };
        let model = ValuationModel::independent_unit_demand(marginals)?;
        let opts = SimOptions {
            keep_series: true,
            ..Default::default()
        };
        let (pp, eff) = Mechanism::build("dyn-ind", &model, n, MechanismConfig::default())?;
        let pp_s = run_trials(&eff, &pp, n, OracleKind::Auto, trials, 0xC8, &opts)?;
        let (qr, eff_q) = Mechanism::build("quantile", &model, n, MechanismConfig::default())?;
        let qr_s = run_trials(&eff_q, &qr, n, OracleKind::Auto, trials, 0xC8, &opts)?;
        let a = pp_s.series.as_ref().unwrap();
        let b = qr_s.series.as_ref().unwrap();
        let diffs: Vec<f64> = a.sw_pp.iter().zip(&b.sw_pp).map(|(x, y)| x - y).collect();
        let mean = diffs.iter().sum::<f64>() / trials as f64;
        let var =
            diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (trials as f64 - 1.0);
        let se = (var / trials as f64).sqrt();
        let ok = mean >= -3.0 * se;
        pass &= ok;
        details.push(format!("n={n}: diff {mean:+.4} ({:+.2} SE)", mean / se.max(1e-12)));
    }
    Ok((pass, details.join("; ")))
}

/// Group-split dynamic pricing sells every item in all 1e4 trials; additive
/// static pricing at n = 1e4 leaves each item unsold no more often than
/// 1/ln n + 3 SE.
fn claim_subadditive() -> Result<(bool, String)> {
    let trials = 10_000;
    // group pricing: m = 2, n = 40 unit-demand buyers
    let model = ValuationModel::independent_unit_demand(vec![
        Marginal::Mhr(exp1()),
        Marginal::Mhr(Distribution::uniform(0.0, 1.0)?),
    ])?;
    let (mech, eff) = Mechanism::build("sub-dyn", &model, 40, MechanismConfig::default())?;
    let s = run_trials(&eff, &mech, 40, OracleKind::Auto, trials, 0xC9, &SimOptions::default())?;
    let all_sold = s.item_sale_freq.iter().all(|&f| f == 1.0);

    // additive static at n = 1e4
    let n = 10_000;
    let model = ValuationModel::additive_independent(vec![
        Marginal::Mhr(exp1()),
        Marginal::Mhr(exp1()),
    ])?;
    let (mech, eff) = Mechanism::build("add-static", &model, n, MechanismConfig::default())?;
    let s2 = run_trials(&eff, &mech, n, OracleKind::Auto, trials, 0xC9A, &SimOptions::default())?;
    let target = 1.0 / (n as f64).ln();
    let se = (target * (1.0 - target) / trials as f64).sqrt();
    let worst_unsold = s2
        .item_sale_freq
        .iter()
        .map(|&f| 1.0 - f)
        .fold(0.0, f64::max);
    let additive_ok = worst_unsold <= target + 3.0 * se;

    let pass = all_sold && additive_ok;
    Ok((
        pass,
        format!(
            "group sale freqs {:?}; additive worst unsold {worst_unsold:.4} vs bound {:.4}",
            s.item_sale_freq,
            target + 3.0 * se
        ),
    ))
}

/// m = n = 2 i.i.d. Exp(1): solver residual <= 1e-6, confirmed by a
/// 1e6-sample Monte Carlo of best responses at the solved prices (each item
/// within 4 SE of probability 1/2).
fn claim_fixed_point() -> Result<(bool, String)> {
    let d = exp1();
    let marginals = [Marginal::Mhr(d.clone()), Marginal::Mhr(d.clone())];
    let solve = dynamic_independent_prices(
        &marginals,
        &[0, 1],
        2,
        &[1.0, 1.0],
        &SolverSettings::default(),
    )?;
    let residual_ok = solve.residual <= 1e-6;

    let samples = 1_000_000usize;
    let mut rng = ChaCha8Rng::seed_from_u64(0xCA);
    let mut counts = [0u64; 2];
    for _ in 0..samples {
        let vals = [d.sample(&mut rng), d.sample(&mut rng)];
        let dec = best_response(BuyerKind::UnitDemand, 0, &vals, &solve.prices)?;
        if let Some(&j) = dec.items.first() {
            counts[j] += 1;
        }
    }
    let se = (0.25f64 / samples as f64).sqrt();
    let f0 = counts[0] as f64 / samples as f64;
    let f1 = counts[1] as f64 / samples as f64;
    let mc_ok = (f0 - 0.5).abs() <= 4.0 * se && (f1 - 0.5).abs() <= 4.0 * se;
    Ok((
        residual_ok && mc_ok,
        format!(
            "residual {:.2e}; MC frequencies ({f0:.4}, {f1:.4}) vs 1/2 +- {:.4}",
            solve.residual,
            4.0 * se
        ),
    ))
}

/// BoundReport claims reachable from the `bounds` CLI command.
pub fn bound_claim(claim: &str, nmax: usize) -> Result<crate::bounds::BoundReport> {
    match claim {
        "mdp" => mdp_bound_check(nmax),
        "static-opt" => Ok(static_case_bound_check(&[1_000, 1_000_000, 1_000_000_000], 400)),
        other => Err(crate::error::Error::usage(format!(
            "unknown bounds claim `{other}` (expected mdp or static-opt)"
        ))),
    }
}
