//! The market equation of state and the linear-market consistency analysis.
//!
//! For a unitary-demand market with `N` households the per-household demand
//! `q^d`, aggregate supply `Q^s` and price `Pr` obey
//!
//! ```text
//! q^d = K·Q^s/Pr,    K = √(k_s/(ε_s·N)),    ε_s = k_d
//! ```
//!
//! and at clearing `K·N = Pr*`. For linear demand against linear supply the
//! squared coefficients `ε_d² = k_d·k_s·k_Pr` and `ε_s² = k_d·k_s/k_Pr` are
//! negative once clearing forces `k_Pr = 1`, while the slope read off the
//! demand curve is the real number `k_s`. That clash is reported as an
//! inconsistency; imaginary values are only ever represented by the sign of
//! the squared value.

use serde::{Deserialize, Serialize};

use crate::curves::{Demand, Price};
use crate::equilibrium::{clearing_price_analytic, Interpretation, MarketSpec};
use crate::error::{Error, Result};

/// Relative tolerance for on-surface and identity checks.
pub const EOS_TOLERANCE: f64 = 1e-12;

/// `k_Pr` at market clearing in a linear–linear market (`Q^d = Q^s`).
pub const CLEARING_K_PR: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearRelations {
    pub eps_d_squared: f64,
    pub eps_s_squared: f64,
    /// Coefficient of `Pr` in `(Q^d)² = ε_d²·Pr² + k_d·k_Pr·q_d0·Pr`.
    pub demand_linear_term: f64,
    /// Coefficient of `Pr` in `(Q^s)² = ε_s²·Pr² + (k_d/k_Pr)·q_d0·Pr`.
    pub supply_linear_term: f64,
}

pub fn derive_linear_relations(k_s: f64, k_d: f64, k_pr: f64, q_d0: f64) -> Result<LinearRelations> {
    if k_pr == 0.0 {
        return Err(Error::domain("k_Pr must be nonzero"));
    }
    Ok(LinearRelations {
        eps_d_squared: k_d * k_s * k_pr,
        eps_s_squared: k_d * k_s / k_pr,
        demand_linear_term: k_d * k_pr * q_d0,
        supply_linear_term: k_d / k_pr * q_d0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Real,
    Imaginary,
}

impl Classification {
    pub fn of_squared(v: f64) -> Self {
        if v < 0.0 {
            Classification::Imaginary
        } else {
            Classification::Real
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub eps_d_squared: f64,
    pub eps_s_squared: f64,
    /// `ε_d` read directly as the demand slope `k_s`; always real.
    pub eps_d_direct: f64,
    pub classification_d: Classification,
    pub classification_s: Classification,
    pub consistent: bool,
    pub reason: String,
}

/// Consistency of a linear-demand market at clearing (`k_Pr = 1`).
pub fn check_linear_consistency(market: &MarketSpec) -> Result<ConsistencyReport> {
    match market.demand() {
        Demand::Linear(d) => check_linear_consistency_raw(d.k_s(), market.supply().k_d(), d.q_d0()),
        Demand::Unitary(_) => Err(Error::WrongFamily(
            "consistency analysis applies to linear demand; use derive_unitary_eos for unitary markets"
                .into(),
        )),
    }
}

/// Same analysis on bare slopes, without the curve sign invariants.
pub fn check_linear_consistency_raw(k_s: f64, k_d: f64, q_d0: f64) -> Result<ConsistencyReport> {
    let rel = derive_linear_relations(k_s, k_d, CLEARING_K_PR, q_d0)?;
    let classification_d = Classification::of_squared(rel.eps_d_squared);
    let classification_s = Classification::of_squared(rel.eps_s_squared);
    let eps_d_direct = k_s;
    let consistent =
        classification_d == Classification::Real && classification_s == Classification::Real;
    let reason = if consistent {
        format!(
            "eps_d^2 = {} and eps_s^2 = {} are nonnegative, so eps_d is real in both \
             determinations and agrees in kind with the direct slope {}",
            rel.eps_d_squared, rel.eps_s_squared, eps_d_direct
        )
    } else {
        format!(
            "market clearing sets k_Pr = 1, giving eps_d^2 = {} and eps_s^2 = {}; a negative \
             square makes eps imaginary, yet eps_d read directly from the demand slope is the \
             real value {}",
            rel.eps_d_squared, rel.eps_s_squared, eps_d_direct
        )
    };
    Ok(ConsistencyReport {
        eps_d_squared: rel.eps_d_squared,
        eps_s_squared: rel.eps_s_squared,
        eps_d_direct,
        classification_d,
        classification_s,
        consistent,
        reason,
    })
}

/// The equation of state of a unitary-demand market.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitaryEoS {
    #[serde(rename = "K")]
    k: f64,
    #[serde(rename = "N")]
    households: u64,
    /// Market the constant was derived from; `None` for a bare constant.
    source: Option<MarketSpec>,
}

impl UnitaryEoS {
    /// Builds an EoS directly from `K`, without a source market. Used for
    /// sampling bare surfaces.
    pub fn from_constant(k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::invariant(format!("K must be positive, got {k}")));
        }
        Ok(UnitaryEoS {
            k,
            households: 1,
            source: None,
        })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn households(&self) -> u64 {
        self.households
    }

    pub fn source(&self) -> Option<&MarketSpec> {
        self.source.as_ref()
    }

    /// `q^d = K·Q^s/Pr`.
    pub fn demand_per_household(&self, q_s: f64, pr: Price) -> Result<f64> {
        Ok(self.k * q_s / pr.positive()?)
    }

    /// The clearing state `(Q^s*, q^d*, Pr*)` of the source market.
    pub fn equilibrium_state(&self) -> Result<MarketState> {
        let source = self
            .source
            .as_ref()
            .ok_or_else(|| Error::domain("equation of state has no source market"))?;
        let point = clearing_price_analytic(source)?;
        let aggregate = source.aggregate_demand(point.clearing_price)?;
        let q_d = per_household(aggregate, self.households)?;
        Ok(MarketState {
            supply: point.clearing_quantity,
            demand_per_household: q_d.value,
            price: point.clearing_price.value(),
        })
    }
}

/// A point `(Q^s, q^d, Pr)` in market state space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketState {
    pub supply: f64,
    pub demand_per_household: f64,
    pub price: f64,
}

/// Derives `K = √(k_s/(k_d·N))` and checks `K·N = Pr*`.
///
/// Only the per-household reading makes that identity hold, so aggregate
/// markets with `N > 1` are rejected.
pub fn derive_unitary_eos(market: &MarketSpec) -> Result<UnitaryEoS> {
    let Demand::Unitary(d) = market.demand() else {
        return Err(Error::WrongFamily(
            "the equation of state needs unitary demand; use check_linear_consistency for linear markets"
                .into(),
        ));
    };
    let n = market.households();
    if market.interpretation() == Interpretation::Aggregate && n > 1 {
        return Err(Error::invariant(
            "the equation of state requires the per-household interpretation when N > 1",
        ));
    }
    let eps_s = market.supply().k_d();
    let k = (d.k_s() / (eps_s * n as f64)).sqrt();
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::invariant(format!("K must be positive and finite, got {k}")));
    }

    let pr_star = clearing_price_analytic(market)?.clearing_price.value();
    let kn = k * n as f64;
    if (kn - pr_star).abs() > EOS_TOLERANCE * pr_star {
        return Err(Error::invariant(format!(
            "K·N = {kn} does not match clearing price {pr_star}"
        )));
    }
    Ok(UnitaryEoS {
        k,
        households: n,
        source: Some(*market),
    })
}

/// `q^d - K·Q^s/Pr`; zero on the constraint surface.
pub fn eos_residual(eos: &UnitaryEoS, q_s: f64, q_d_per_household: f64, pr: Price) -> Result<f64> {
    Ok(q_d_per_household - eos.demand_per_household(q_s, pr)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Amplification {
    /// `1/K`, the factor by which `q^d` induces `Q^s`.
    pub factor: f64,
    pub market_quantity: &'static str,
    /// The Curie paramagnet quantity playing the same role.
    pub paramagnet_analogue: &'static str,
}

pub fn amplification_factor(eos: &UnitaryEoS) -> Amplification {
    Amplification {
        factor: 1.0 / eos.k,
        market_quantity: "1/K",
        paramagnet_analogue: "D/mu0",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerHouseholdDemand {
    pub value: f64,
    pub aggregate: f64,
    pub households: u64,
}

pub fn per_household(q_aggregate: f64, n: u64) -> Result<PerHouseholdDemand> {
    if n == 0 {
        return Err(Error::domain("household count must be at least 1"));
    }
    Ok(PerHouseholdDemand {
        value: q_aggregate / n as f64,
        aggregate: q_aggregate,
        households: n,
    })
}

/// Evaluation of `q^d = √(k_s·k_Pr/k_d)·Q^s/Pr` with `k_Pr = 1/N` at one price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntermediateDiagnostic {
    pub price: f64,
    /// Per-household demand from the curve, `k_s/Pr`.
    pub demand: f64,
    pub predicted: f64,
    pub residual: f64,
    pub holds: bool,
}

/// Reports whether the intermediate square-root relation holds at `pr`.
///
/// It is not an identity in `Pr`; it holds at the clearing price only.
pub fn derive_unitary_intermediate(market: &MarketSpec, pr: Price) -> Result<IntermediateDiagnostic> {
    let Demand::Unitary(d) = market.demand() else {
        return Err(Error::WrongFamily("intermediate relation needs unitary demand".into()));
    };
    let p = pr.positive()?;
    let k_d = market.supply().k_d();
    let k_pr = 1.0 / market.households() as f64;
    let demand = d.k_s() / p;
    let predicted = (d.k_s() * k_pr / k_d).sqrt() * (k_d * p) / p;
    let residual = demand - predicted;
    Ok(IntermediateDiagnostic {
        price: p,
        demand,
        predicted,
        residual,
        holds: residual.abs() <= EOS_TOLERANCE * demand.abs().max(1.0),
    })
}
