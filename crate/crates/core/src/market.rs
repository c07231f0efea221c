//! Valuation models, profile sampling and buyer best-response semantics.
//!
//! Models and profiles are immutable after construction; `best_response` is
//! a pure function. Sampling takes the caller's RNG stream, so concurrent
//! use is safe with per-caller streams.

use rand::Rng;
use serde::Serialize;

use crate::dist::{hazard_monotone_check, Distribution};
use crate::error::{Error, Result};

/// One item's marginal: a real MHR distribution, or a structural dummy with
/// value identically zero. A point mass is not an MHR distribution, so
/// dummies never enter the MHR machinery.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Marginal {
    Mhr(Distribution),
    Dummy,
}

impl Marginal {
    pub fn is_dummy(&self) -> bool {
        matches!(self, Marginal::Dummy)
    }
    pub fn dist(&self) -> Option<&Distribution> {
        match self {
            Marginal::Mhr(d) => Some(d),
            Marginal::Dummy => None,
        }
    }
}

/// Buyer demand structure implied by the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuyerKind {
    UnitDemand,
    Additive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ValuationModel {
    /// Unit-demand buyers, item values independent across items.
    IndependentUnitDemand { marginals: Vec<Marginal> },
    /// Unit-demand buyers with v_{i,j} = alphas[j] * type_i.
    Separable {
        alphas: Vec<f64>,
        type_dist: Distribution,
    },
    /// Additive buyers, item values independent across items.
    AdditiveIndependent { marginals: Vec<Marginal> },
}

impl ValuationModel {
    pub fn independent_unit_demand(marginals: Vec<Marginal>) -> Result<Self> {
        validate_marginals(&marginals)?;
        Ok(ValuationModel::IndependentUnitDemand { marginals })
    }

    pub fn separable(alphas: Vec<f64>, type_dist: Distribution) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::validation("separable model needs at least one alpha"));
        }
        for w in alphas.windows(2) {
            if w[1] > w[0] {
                return Err(Error::validation(format!(
                    "alphas must be non-increasing, got {} before {}",
                    w[0], w[1]
                )));
            }
        }
        if alphas.iter().any(|&a| a < 0.0 || !a.is_finite()) {
            return Err(Error::validation("alphas must be finite and >= 0"));
        }
        let (ok, at) = hazard_monotone_check(&type_dist, 64);
        if !ok {
            return Err(Error::validation(format!(
                "type distribution fails the MHR check near x={at:?}"
            )));
        }
        Ok(ValuationModel::Separable { alphas, type_dist })
    }

    pub fn additive_independent(marginals: Vec<Marginal>) -> Result<Self> {
        validate_marginals(&marginals)?;
        Ok(ValuationModel::AdditiveIndependent { marginals })
    }

    /// Model specification grammar for CLI configs:
    /// `independent: [exp(1), unif(0,2)]`,
    /// `separable: alphas=[1,0.5], type=exp(1)`,
    /// `additive: [exp(1), exp(1)]`. The token `dummy` is accepted inside
    /// marginal lists.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::usage(format!("bad model spec `{s}`")))?;
        match head.trim() {
            "independent" => Ok(ValuationModel::independent_unit_demand(parse_marginal_list(
                rest,
            )?)?),
            "additive" => Ok(ValuationModel::additive_independent(parse_marginal_list(
                rest,
            )?)?),
            "separable" => {
                let mut alphas = None;
                let mut type_dist = None;
                for part in split_top_level(rest) {
                    let (k, v) = part
                        .split_once('=')
                        .ok_or_else(|| Error::usage(format!("bad separable field `{part}`")))?;
                    match k.trim() {
                        "alphas" => {
                            let list = v.trim();
                            let inner = list
                                .strip_prefix('[')
                                .and_then(|l| l.strip_suffix(']'))
                                .ok_or_else(|| {
                                    Error::usage(format!("alphas must be a [list], got `{list}`"))
                                })?;
                            let parsed: Vec<f64> = inner
                                .split(',')
                                .filter(|t| !t.trim().is_empty())
                                .map(|t| {
                                    t.trim().parse::<f64>().map_err(|_| {
                                        Error::usage(format!("bad alpha `{t}`"))
                                    })
                                })
                                .collect::<Result<_>>()?;
                            alphas = Some(parsed);
                        }
                        "type" => type_dist = Some(Distribution::parse(v)?),
                        other => {
                            return Err(Error::usage(format!(
                                "unknown separable field `{other}` (expected alphas, type)"
                            )))
                        }
                    }
                }
                let alphas = alphas.ok_or_else(|| Error::usage("separable: missing alphas"))?;
                let type_dist =
                    type_dist.ok_or_else(|| Error::usage("separable: missing type=dist"))?;
                ValuationModel::separable(alphas, type_dist)
            }
            other => Err(Error::usage(format!(
                "unknown model kind `{other}` (expected independent, separable, additive)"
            ))),
        }
    }

    pub fn item_count(&self) -> usize {
        match self {
            ValuationModel::IndependentUnitDemand { marginals }
            | ValuationModel::AdditiveIndependent { marginals } => marginals.len(),
            ValuationModel::Separable { alphas, .. } => alphas.len(),
        }
    }

    pub fn buyer_kind(&self) -> BuyerKind {
        match self {
            ValuationModel::AdditiveIndependent { .. } => BuyerKind::Additive,
            _ => BuyerKind::UnitDemand,
        }
    }

    /// True if item j contributes identically-zero value.
    pub fn is_dummy_item(&self, j: usize) -> bool {
        match self {
            ValuationModel::IndependentUnitDemand { marginals }
            | ValuationModel::AdditiveIndependent { marginals } => marginals[j].is_dummy(),
            ValuationModel::Separable { alphas, .. } => alphas[j] == 0.0,
        }
    }

    pub fn marginals(&self) -> Option<&[Marginal]> {
        match self {
            ValuationModel::IndependentUnitDemand { marginals }
            | ValuationModel::AdditiveIndependent { marginals } => Some(marginals),
            ValuationModel::Separable { .. } => None,
        }
    }

    /// Pads with dummy items (unit-demand/additive) or zero multipliers
    /// (separable) until m = n; a separable model with m > n is truncated to
    /// its n largest multipliers. Padding down an independent model is not
    /// defined.
    pub fn pad_to_square(&self, n: usize) -> Result<ValuationModel> {
        let m = self.item_count();
        match self {
            ValuationModel::IndependentUnitDemand { marginals } => {
                if m > n {
                    return Err(Error::domain(format!(
                        "cannot pad {m} independent items down to {n} buyers"
                    )));
                }
                let mut ms = marginals.clone();
                ms.resize(n, Marginal::Dummy);
                Ok(ValuationModel::IndependentUnitDemand { marginals: ms })
            }
            ValuationModel::AdditiveIndependent { marginals } => {
                if m > n {
                    return Err(Error::domain(format!(
                        "cannot pad {m} additive items down to {n} buyers"
                    )));
                }
                let mut ms = marginals.clone();
                ms.resize(n, Marginal::Dummy);
                Ok(ValuationModel::AdditiveIndependent { marginals: ms })
            }
            ValuationModel::Separable { alphas, type_dist } => {
                let mut a = alphas.clone();
                a.resize(a.len().max(n), 0.0);
                a.truncate(n);
                Ok(ValuationModel::Separable {
                    alphas: a,
                    type_dist: type_dist.clone(),
                })
            }
        }
    }

    /// Samples an n-buyer profile; rows are i.i.d. per the model and the
    /// result is a pure function of (model, n, rng state). Draw order is
    /// row-major over non-dummy items.
    pub fn sample_profile<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> ValuationProfile {
        let m = self.item_count();
        let mut values = vec![0.0f64; n * m];
        let mut types = None;
        match self {
            ValuationModel::IndependentUnitDemand { marginals }
            | ValuationModel::AdditiveIndependent { marginals } => {
                for i in 0..n {
                    for (j, marg) in marginals.iter().enumerate() {
                        if let Marginal::Mhr(d) = marg {
                            values[i * m + j] = d.sample(rng);
                        }
                    }
                }
            }
            ValuationModel::Separable { alphas, type_dist } => {
                let mut ts = Vec::with_capacity(n);
                for i in 0..n {
                    let t = type_dist.sample(rng);
                    ts.push(t);
                    for (j, &a) in alphas.iter().enumerate() {
                        values[i * m + j] = a * t;
                    }
                }
                types = Some(ts);
            }
        }
        ValuationProfile {
            n,
            m,
            values,
            types,
        }
    }
}

fn validate_marginals(marginals: &[Marginal]) -> Result<()> {
    if marginals.is_empty() {
        return Err(Error::validation("model needs at least one item"));
    }
    for (j, m) in marginals.iter().enumerate() {
        if let Marginal::Mhr(d) = m {
            let (ok, at) = hazard_monotone_check(d, 64);
            if !ok {
                return Err(Error::validation(format!(
                    "marginal {j} fails the MHR check near x={at:?}"
                )));
            }
        }
    }
    Ok(())
}

fn parse_marginal_list(s: &str) -> Result<Vec<Marginal>> {
    let s = s.trim();
    let inner = s
        .strip_prefix('[')
        .and_then(|v| v.strip_suffix(']'))
        .ok_or_else(|| Error::usage(format!("expected [list] of marginals, got `{s}`")))?;
    split_top_level(inner)
        .into_iter()
        .map(|tok| {
            let tok = tok.trim();
            if tok == "dummy" {
                Ok(Marginal::Dummy)
            } else {
                Ok(Marginal::Mhr(Distribution::parse(tok)?))
            }
        })
        .collect()
}

/// Splits on commas that are not nested inside parentheses or brackets.
fn split_top_level(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '(' | '[' => {
                depth += 1;
                cur.push(c);
            }
            ')' | ']' => {
                depth -= 1;
                cur.push(c);
            }
            ',' if depth == 0 => {
                if !cur.trim().is_empty() {
                    out.push(cur.trim().to_string());
                }
                cur.clear();
            }
            _ => cur.push(c),
        }
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

/// A realized n-by-m value matrix; for separable models the raw type vector
/// is retained and `values[i][j] = alphas[j] * types[i]` exactly.
#[derive(Debug, Clone)]
pub struct ValuationProfile {
    pub n: usize,
    pub m: usize,
    values: Vec<f64>,
    types: Option<Vec<f64>>,
}

impl ValuationProfile {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.len());
        let mut values = Vec::with_capacity(n * m);
        for r in &rows {
            if r.len() != m {
                return Err(Error::validation("ragged value matrix"));
            }
            values.extend_from_slice(r);
        }
        Ok(ValuationProfile {
            n,
            m,
            values,
            types: None,
        })
    }

    #[inline]
    pub fn value(&self, buyer: usize, item: usize) -> f64 {
        self.values[buyer * self.m + item]
    }

    #[inline]
    pub fn row(&self, buyer: usize) -> &[f64] {
        &self.values[buyer * self.m..(buyer + 1) * self.m]
    }

    pub fn types(&self) -> Option<&[f64]> {
        self.types.as_deref()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Outcome of one buyer's utility maximization at a posted menu.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PurchaseDecision {
    pub buyer: usize,
    /// Bought items; empty, a singleton for unit demand, or a set for
    /// additive buyers.
    pub items: Vec<usize>,
    pub paid: f64,
    pub value: f64,
    pub utility: f64,
}

impl PurchaseDecision {
    fn empty(buyer: usize) -> Self {
        PurchaseDecision {
            buyer,
            items: Vec::new(),
            paid: 0.0,
            value: 0.0,
            utility: 0.0,
        }
    }
}

/// Utility-maximizing purchase at the given prices (infinite price marks an
/// unavailable item). Unit-demand buyers take the single item maximizing
/// `v_j - p_j` when that margin is strictly positive, ties broken toward the
/// lowest item index; additive buyers take every item with `v_j > p_j`.
pub fn best_response(
    kind: BuyerKind,
    buyer: usize,
    values: &[f64],
    prices: &[f64],
) -> Result<PurchaseDecision> {
    if values.len() != prices.len() {
        return Err(Error::validation(format!(
            "values ({}) and prices ({}) differ in length",
            values.len(),
            prices.len()
        )));
    }
    if values.iter().any(|v| v.is_nan()) || prices.iter().any(|p| p.is_nan()) {
        return Err(Error::validation("NaN value or price in best_response"));
    }
    match kind {
        BuyerKind::UnitDemand => {
            let mut best: Option<(usize, f64)> = None;
            for (j, (&v, &p)) in values.iter().zip(prices).enumerate() {
                let u = v - p;
                if u > 0.0 && best.is_none_or(|(_, bu)| u > bu) {
                    best = Some((j, u));
                }
            }
            Ok(match best {
                Some((j, u)) => PurchaseDecision {
                    buyer,
                    items: vec![j],
                    paid: prices[j],
                    value: values[j],
                    utility: u,
                },
                None => PurchaseDecision::empty(buyer),
            })
        }
        BuyerKind::Additive => {
            let mut d = PurchaseDecision::empty(buyer);
            for (j, (&v, &p)) in values.iter().zip(prices).enumerate() {
                if v > p {
                    d.items.push(j);
                    d.paid += p;
                    d.value += v;
                }
            }
            d.utility = d.value - d.paid;
            Ok(d)
        }
    }
}
