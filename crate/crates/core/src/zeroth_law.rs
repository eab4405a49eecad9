//! Price equilibrium between markets as an equivalence relation.
//!
//! Two markets are in price equilibrium when their clearing prices, rounded
//! half-to-even onto a fixed grid of step `quantum`, are the same integer.
//! Exact integer equality keeps the relation transitive, which a float
//! tolerance comparison would not.
//!
//! The registry does not check that markets are efficient, perfectly
//! competitive or clearing; those are modelling assumptions. Markets may be
//! labelled with the good they trade, and comparisons across different goods
//! are allowed but flagged.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::equilibrium::{clearing_price_analytic, MarketSpec};
use crate::error::{Error, Result};

pub const DEFAULT_QUANTUM: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegistryEntry {
    pub market: MarketSpec,
    /// The good traded, if recorded.
    pub goods: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketRegistry {
    entries: BTreeMap<String, RegistryEntry>,
    quantum: f64,
}

impl Default for MarketRegistry {
    fn default() -> Self {
        MarketRegistry {
            entries: BTreeMap::new(),
            quantum: DEFAULT_QUANTUM,
        }
    }
}

/// A clearing price snapped to the registry grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantizedPrice {
    pub ticks: i128,
    /// `ticks·quantum`.
    pub price: f64,
}

/// Rounds `price/quantum` half-to-even.
pub fn quantize(price: f64, quantum: f64) -> Result<QuantizedPrice> {
    let scaled = (price / quantum).round_ties_even();
    if !scaled.is_finite() || scaled.abs() >= i128::MAX as f64 {
        return Err(Error::domain(format!(
            "price {price} cannot be quantized with quantum {quantum}"
        )));
    }
    let ticks = scaled as i128;
    Ok(QuantizedPrice {
        ticks,
        price: ticks as f64 * quantum,
    })
}

impl MarketRegistry {
    pub fn new(quantum: f64) -> Result<Self> {
        if !(quantum > 0.0 && quantum.is_finite()) {
            return Err(Error::invariant(format!(
                "price quantum must be positive, got {quantum}"
            )));
        }
        Ok(MarketRegistry {
            entries: BTreeMap::new(),
            quantum,
        })
    }

    pub fn insert(
        &mut self,
        name: impl Into<String>,
        market: MarketSpec,
        goods: Option<String>,
    ) -> Result<()> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::invariant(format!("duplicate market name `{name}`")));
        }
        self.entries.insert(name, RegistryEntry { market, goods });
        Ok(())
    }

    pub fn quantum(&self) -> f64 {
        self.quantum
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Result<&RegistryEntry> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::UnknownName(name.to_string()))
    }

    /// Names in lexicographic order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn quantized_price(&self, name: &str) -> Result<QuantizedPrice> {
        let entry = self.get(name)?;
        let point = clearing_price_analytic(&entry.market)
            .map_err(|e| Error::Unsolvable(format!("market `{name}`: {e}")))?;
        quantize(point.clearing_price.value(), self.quantum)
    }

    fn goods_differ(&self, a: &str, b: &str) -> Result<bool> {
        Ok(match (&self.get(a)?.goods, &self.get(b)?.goods) {
            (Some(x), Some(y)) => x != y,
            _ => false,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumVerdict {
    pub pair: (String, String),
    pub in_equilibrium: bool,
    pub prices: [QuantizedPrice; 2],
    /// Both markets are labelled and trade different goods.
    pub goods_differ: bool,
}

pub fn in_price_equilibrium(registry: &MarketRegistry, a: &str, b: &str) -> Result<EquilibriumVerdict> {
    let pa = registry.quantized_price(a)?;
    let pb = registry.quantized_price(b)?;
    Ok(EquilibriumVerdict {
        pair: (a.to_string(), b.to_string()),
        in_equilibrium: pa.ticks == pb.ticks,
        prices: [pa, pb],
        goods_differ: registry.goods_differ(a, b)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedMarket {
    pub name: String,
    pub price: QuantizedPrice,
}

/// Ascending by quantized price, ties by name.
pub fn rank_markets(registry: &MarketRegistry) -> Result<Vec<RankedMarket>> {
    let mut ranked = registry
        .names()
        .map(|name| {
            Ok(RankedMarket {
                name: name.to_string(),
                price: registry.quantized_price(name)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    // names() is already sorted, so a stable sort on ticks breaks ties by name
    ranked.sort_by_key(|r| r.price.ticks);
    Ok(ranked)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceClass {
    pub price: QuantizedPrice,
    pub members: Vec<String>,
    pub mixed_goods: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub law: &'static str,
    pub markets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LawReport {
    pub markets: usize,
    pub reflexive: bool,
    pub symmetric: bool,
    pub transitive: bool,
    pub counterexample: Option<Counterexample>,
    pub ranking_consistent: bool,
    pub classes: Vec<EquivalenceClass>,
}

impl LawReport {
    pub fn all_pass(&self) -> bool {
        self.reflexive && self.symmetric && self.transitive && self.ranking_consistent
    }
}

/// Exhaustively checks reflexivity, symmetry and transitivity over all
/// markets, and that the ranking groups equivalent markets contiguously.
pub fn verify_equivalence_laws(registry: &MarketRegistry) -> Result<LawReport> {
    let ranking = rank_markets(registry)?;
    let n = ranking.len();
    let names: Vec<&str> = ranking.iter().map(|r| r.name.as_str()).collect();
    let ticks: Vec<i128> = ranking.iter().map(|r| r.price.ticks).collect();
    let related = |i: usize, j: usize| ticks[i] == ticks[j];
    let witness = |law: &'static str, idx: &[usize]| Counterexample {
        law,
        markets: idx.iter().map(|&i| names[i].to_string()).collect(),
    };

    let mut counterexample = None;
    let reflexive = match (0..n).find(|&i| !related(i, i)) {
        Some(i) => {
            counterexample.get_or_insert(witness("reflexivity", &[i]));
            false
        }
        None => true,
    };

    let mut symmetric = true;
    'sym: for i in 0..n {
        for j in 0..n {
            if related(i, j) != related(j, i) {
                symmetric = false;
                counterexample.get_or_insert(witness("symmetry", &[i, j]));
                break 'sym;
            }
        }
    }

    let mut transitive = true;
    'trans: for i in 0..n {
        for j in 0..n {
            if !related(i, j) {
                continue;
            }
            for k in 0..n {
                if related(j, k) && !related(i, k) {
                    transitive = false;
                    counterexample.get_or_insert(witness("transitivity", &[i, j, k]));
                    break 'trans;
                }
            }
        }
    }

    let mut classes: Vec<EquivalenceClass> = Vec::new();
    for r in &ranking {
        match classes.last_mut() {
            Some(c) if c.price.ticks == r.price.ticks => c.members.push(r.name.clone()),
            _ => classes.push(EquivalenceClass {
                price: r.price,
                members: vec![r.name.clone()],
                mixed_goods: false,
            }),
        }
    }
    for c in &mut classes {
        let mut goods = c
            .members
            .iter()
            .filter_map(|m| registry.entries[m].goods.as_deref());
        if let Some(first) = goods.next() {
            c.mixed_goods = goods.any(|g| g != first);
        }
    }

    // Each market is related exactly to the members of its own class, and
    // classes occupy contiguous, strictly increasing runs of the ranking.
    let mut class_of = vec![0usize; n];
    let mut pos = 0;
    for (ci, c) in classes.iter().enumerate() {
        for _ in &c.members {
            class_of[pos] = ci;
            pos += 1;
        }
    }
    let increasing = classes.windows(2).all(|w| w[0].price.ticks < w[1].price.ticks);
    let ranking_consistent =
        increasing && (0..n).all(|i| (0..n).all(|j| related(i, j) == (class_of[i] == class_of[j])));

    Ok(LawReport {
        markets: n,
        reflexive,
        symmetric,
        transitive,
        counterexample,
        ranking_consistent,
        classes,
    })
}
