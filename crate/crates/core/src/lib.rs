//! Simulation laboratory for sequential posted-price mechanisms selling m
//! items to n i.i.d. buyers with MHR valuations: pricing rules, offline
//! oracles, closed-form optimality analyses, and a seeded Monte Carlo
//! engine that measures competitive ratios at desk scale.

pub mod bounds;
pub mod config;
pub mod dist;
pub mod error;
pub mod market;
pub mod mechanism;
pub mod numeric;
pub mod oracle;
pub mod order_stats;
pub mod report;
pub mod sim;
pub mod solver;
pub mod verify;

pub use bounds::{
    exp_mdp_recursion_value, exp_static_best, exp_static_welfare, mdp_bound_check,
    ratio_trend_fit, BoundReport, TrendModel,
};
pub use dist::{hazard_monotone_check, Distribution};
pub use error::{Error, Result};
pub use market::{best_response, BuyerKind, Marginal, PurchaseDecision, ValuationModel};
pub use mechanism::{
    additive_prices, dynamic_independent_prices, dynamic_separable_prices, mdp_optimal_prices,
    quantile_allocate, single_item_ladder, static_independent_prices, static_separable_prices,
    subadditive_group_prices, subadditive_static_prices, vcg_separable, virtual_value, Mechanism,
    MechanismConfig, MECHANISM_IDS,
};
pub use oracle::{
    estimate_match_probabilities, exante_item_bound, max_weight_matching, separable_optimum,
    subadditive_upper_bound, MatchProbabilities, MatchingResult,
};
pub use order_stats::{
    check_babaioff_ratio, check_quantile_maximum, check_quantiles1, check_quantiles2,
    max_expectation, order_stat_mean, OrderStatsTable,
};
pub use sim::{
    allocation_frequency_audit, run_trial, run_trials, sweep, OracleKind, SimOptions,
    SimulationSummary, TrialOutcome,
};
pub use solver::{purchase_probabilities_quad, solve_dynamic_prices, PriceSolve, SolverSettings};
