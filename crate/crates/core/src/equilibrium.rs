//! Market clearing.
//!
//! Closed-form clearing prices exist for both supported pairings. A plain
//! bisection solver on the excess-demand function is kept alongside as an
//! independent check; it never touches the curve slope code.

use serde::{Deserialize, Serialize};

use crate::curves::{supply_quantity, Curve, Demand, LinearDemand, LinearSupply, Price, UnitaryDemand};
use crate::error::{Error, Result};

/// Default relative tolerance on the bisected price.
pub const PRICE_TOLERANCE: f64 = 1e-12;

/// Accepted `|Q^d - Q^s|` at a solution, relative to `max(1, Q*)`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;

/// Auto-bracketing expands `[2^-k, 2^k]` for `k = 1..=MAX_BRACKET_EXPONENT`.
pub const MAX_BRACKET_EXPONENT: i32 = 60;

const MAX_BISECTIONS: usize = 4096;

/// How unitary demand aggregates over households.
///
/// Under `PerHousehold` the curve coefficient describes one household, so
/// aggregate demand is `N·k_s/Pr`. Under `Aggregate` the curve is the whole
/// market's demand, `k_s/Pr`. Linear markets ignore this flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpretation {
    #[default]
    PerHousehold,
    Aggregate,
}

/// A demand curve, a linear supply curve and a household count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMarketSpec")]
pub struct MarketSpec {
    demand: Demand,
    supply: LinearSupply,
    households: u64,
    interpretation: Interpretation,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMarketSpec {
    demand: Demand,
    supply: LinearSupply,
    households: u64,
    #[serde(default)]
    interpretation: Interpretation,
}

impl TryFrom<RawMarketSpec> for MarketSpec {
    type Error = Error;

    fn try_from(raw: RawMarketSpec) -> Result<Self> {
        Ok(MarketSpec::new(raw.demand, raw.supply, raw.households)?
            .with_interpretation(raw.interpretation))
    }
}

impl MarketSpec {
    pub fn new(demand: Demand, supply: LinearSupply, households: u64) -> Result<Self> {
        if households == 0 {
            return Err(Error::invariant("household count N must be at least 1"));
        }
        Ok(MarketSpec {
            demand,
            supply,
            households,
            interpretation: Interpretation::default(),
        })
    }

    /// Linear demand against linear supply with a single household.
    pub fn linear(k_s: f64, q_d0: f64, k_d: f64) -> Result<Self> {
        MarketSpec::new(
            Demand::Linear(LinearDemand::new(k_s, q_d0)?),
            LinearSupply::new(k_d)?,
            1,
        )
    }

    /// Unitary demand against linear supply, per-household interpretation.
    pub fn unitary(k_s: f64, k_d: f64, households: u64) -> Result<Self> {
        MarketSpec::new(
            Demand::Unitary(UnitaryDemand::new(k_s)?),
            LinearSupply::new(k_d)?,
            households,
        )
    }

    pub fn with_households(mut self, households: u64) -> Result<Self> {
        if households == 0 {
            return Err(Error::invariant("household count N must be at least 1"));
        }
        self.households = households;
        Ok(self)
    }

    pub fn with_interpretation(mut self, interpretation: Interpretation) -> Self {
        self.interpretation = interpretation;
        self
    }

    pub fn demand(&self) -> &Demand {
        &self.demand
    }

    pub fn supply(&self) -> &LinearSupply {
        &self.supply
    }

    pub fn households(&self) -> u64 {
        self.households
    }

    pub fn interpretation(&self) -> Interpretation {
        self.interpretation
    }

    pub fn family(&self) -> &'static str {
        self.demand.family()
    }

    /// Aggregate quantity demanded at `pr`, applying the interpretation flag.
    pub fn aggregate_demand(&self, pr: Price) -> Result<f64> {
        let raw = self.demand.quantity(pr)?;
        Ok(match (&self.demand, self.interpretation) {
            (Demand::Unitary(_), Interpretation::PerHousehold) => self.households as f64 * raw,
            _ => raw,
        })
    }

    /// `Q^d(pr) - Q^s(pr)`.
    pub fn excess_demand(&self, pr: Price) -> Result<f64> {
        Ok(self.aggregate_demand(pr)? - supply_quantity(&self.supply, pr))
    }
}

pub fn excess_demand(market: &MarketSpec, pr: Price) -> Result<f64> {
    market.excess_demand(pr)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumPoint {
    pub clearing_price: Price,
    pub clearing_quantity: f64,
    /// `|Q^d - Q^s|` at the clearing price.
    pub residual: f64,
}

impl EquilibriumPoint {
    fn at(market: &MarketSpec, price: f64) -> Result<Self> {
        let pr = Price::new(price)?;
        let residual = market.excess_demand(pr)?.abs();
        Ok(EquilibriumPoint {
            clearing_price: pr,
            clearing_quantity: supply_quantity(market.supply(), pr),
            residual,
        })
    }

    /// Residual bound `RESIDUAL_TOLERANCE·max(1, Q*)`.
    pub fn residual_bound(&self) -> f64 {
        RESIDUAL_TOLERANCE * self.clearing_quantity.abs().max(1.0)
    }

    pub fn within_tolerance(&self) -> bool {
        self.residual <= self.residual_bound()
    }
}

/// Closed-form clearing price.
///
/// Linear: `q_d0/(k_d - k_s)`. Unitary: `√(N·k_s/k_d)` per household, or
/// `√(k_s/k_d)` under the aggregate interpretation.
pub fn clearing_price_analytic(market: &MarketSpec) -> Result<EquilibriumPoint> {
    let k_d = market.supply().k_d();
    let price = match (market.demand(), market.interpretation()) {
        (Demand::Linear(d), _) => d.q_d0() / (k_d - d.k_s()),
        (Demand::Unitary(d), Interpretation::PerHousehold) => {
            (market.households() as f64 * d.k_s() / k_d).sqrt()
        }
        (Demand::Unitary(d), Interpretation::Aggregate) => (d.k_s() / k_d).sqrt(),
    };
    if !(price.is_finite() && price > 0.0) {
        return Err(Error::Unsolvable(format!(
            "closed-form clearing price {price} is not a positive finite number"
        )));
    }
    EquilibriumPoint::at(market, price)
}

/// Bisection on excess demand inside `bracket`, to relative price tolerance `tol`.
pub fn clearing_price_numeric(
    market: &MarketSpec,
    bracket: (f64, f64),
    tol: f64,
) -> Result<EquilibriumPoint> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    let (mut lo, mut hi) = if bracket.0 <= bracket.1 {
        bracket
    } else {
        (bracket.1, bracket.0)
    };
    let f = |p: f64| market.excess_demand(Price::new(p)?);

    let f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == 0.0 {
        return EquilibriumPoint::at(market, lo);
    }
    if f_hi == 0.0 {
        return EquilibriumPoint::at(market, hi);
    }
    if (f_lo > 0.0) == (f_hi > 0.0) {
        return Err(Error::Bracket { lo, hi, f_lo, f_hi });
    }
    let lo_positive = f_lo > 0.0;

    for _ in 0..MAX_BISECTIONS {
        let mid = lo + 0.5 * (hi - lo);
        if !(lo < mid && mid < hi) {
            break;
        }
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return EquilibriumPoint::at(market, mid);
        }
        if (f_mid > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= tol * mid {
            let point = EquilibriumPoint::at(market, mid)?;
            if point.within_tolerance() {
                return Ok(point);
            }
        }
    }

    // Bracket can no longer shrink; take the better endpoint.
    let a = EquilibriumPoint::at(market, lo)?;
    let b = EquilibriumPoint::at(market, hi)?;
    let best = if a.residual <= b.residual { a } else { b };
    if best.within_tolerance() {
        Ok(best)
    } else {
        Err(Error::Unsolvable(format!(
            "bisection stalled at price {} with residual {} above bound {}",
            best.clearing_price,
            best.residual,
            best.residual_bound()
        )))
    }
}

/// Finds a sign-changing bracket by expanding `[1/2, 2]` geometrically.
pub fn auto_bracket(market: &MarketSpec) -> Result<(f64, f64)> {
    for k in 1..=MAX_BRACKET_EXPONENT {
        let lo = 2f64.powi(-k);
        let hi = 2f64.powi(k);
        let f_lo = market.excess_demand(Price::new(lo)?)?;
        let f_hi = market.excess_demand(Price::new(hi)?)?;
        if f_lo >= 0.0 && f_hi <= 0.0 {
            return Ok((lo, hi));
        }
    }
    Err(Error::Unsolvable(format!(
        "excess demand has no sign change in [2^-{0}, 2^{0}]",
        MAX_BRACKET_EXPONENT
    )))
}

/// Auto-bracketed bisection at the default tolerance.
pub fn solve_numeric(market: &MarketSpec) -> Result<EquilibriumPoint> {
    let bracket = auto_bracket(market)?;
    clearing_price_numeric(market, bracket, PRICE_TOLERANCE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pr(v: f64) -> Price {
        Price::new(v).unwrap()
    }

    fn linear() -> MarketSpec {
        MarketSpec::linear(-2.0, 10.0, 3.0).unwrap()
    }

    fn unitary() -> MarketSpec {
        MarketSpec::unitary(8.0, 2.0, 4).unwrap()
    }

    #[test]
    fn excess_demand_examples() {
        assert_eq!(excess_demand(&linear(), pr(2.0)).unwrap(), 0.0);
        assert_eq!(excess_demand(&linear(), pr(1.0)).unwrap(), 5.0);
        assert_eq!(excess_demand(&unitary(), pr(4.0)).unwrap(), 0.0);
        assert!(matches!(excess_demand(&unitary(), pr(0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn analytic_examples() {
        let p = clearing_price_analytic(&linear()).unwrap();
        assert_eq!(p.clearing_price.value(), 2.0);
        assert_eq!(p.clearing_quantity, 6.0);
        assert_eq!(p.residual, 0.0);

        let p = clearing_price_analytic(&unitary()).unwrap();
        assert_eq!(p.clearing_price.value(), 4.0);
        assert_eq!(p.clearing_quantity, 8.0);

        let agg = MarketSpec::unitary(8.0, 2.0, 4)
            .unwrap()
            .with_interpretation(Interpretation::Aggregate);
        let p = clearing_price_analytic(&agg).unwrap();
        assert_eq!(p.clearing_price.value(), 2.0);
        assert_eq!(p.clearing_quantity, 4.0);
        assert_eq!(p.residual, 0.0);
    }

    #[test]
    fn single_household_interpretations_agree() {
        let m = MarketSpec::unitary(8.0, 2.0, 1).unwrap();
        let a = clearing_price_analytic(&m).unwrap();
        let b = clearing_price_analytic(&m.with_interpretation(Interpretation::Aggregate)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn numeric_examples() {
        let p = clearing_price_numeric(&linear(), (0.01, 100.0), PRICE_TOLERANCE).unwrap();
        assert_relative_eq!(p.clearing_price.value(), 2.0, max_relative = 1e-12);
        assert!(p.within_tolerance());

        let p = clearing_price_numeric(&unitary(), (0.01, 100.0), PRICE_TOLERANCE).unwrap();
        assert_relative_eq!(p.clearing_price.value(), 4.0, max_relative = 1e-12);

        // reversed bracket is accepted
        let p = clearing_price_numeric(&linear(), (100.0, 0.01), PRICE_TOLERANCE).unwrap();
        assert_relative_eq!(p.clearing_price.value(), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn numeric_bracket_error_reports_endpoints() {
        let err = clearing_price_numeric(&linear(), (5.0, 100.0), PRICE_TOLERANCE).unwrap_err();
        match err {
            Error::Bracket { lo, hi, f_lo, f_hi } => {
                assert_eq!((lo, hi), (5.0, 100.0));
                assert_eq!(f_lo, -15.0);
                assert_eq!(f_hi, -490.0);
            }
            other => panic!("unexpected {other:?}"),
        }
        let msg = clearing_price_numeric(&linear(), (5.0, 100.0), PRICE_TOLERANCE)
            .unwrap_err()
            .to_string();
        assert!(msg.contains("-15") && msg.contains("-490"), "{msg}");
        assert!(clearing_price_numeric(&linear(), (0.1, 10.0), 0.0).is_err());
    }

    #[test]
    fn bracket_endpoint_on_root() {
        let p = clearing_price_numeric(&linear(), (2.0, 10.0), PRICE_TOLERANCE).unwrap();
        assert_eq!(p.clearing_price.value(), 2.0);
    }

    #[test]
    fn auto_bracket_examples() {
        let (lo, hi) = auto_bracket(&linear()).unwrap();
        assert!(lo <= 2.0 && 2.0 <= hi);
        assert_eq!((lo, hi), (0.5, 2.0));
        let (lo, hi) = auto_bracket(&unitary()).unwrap();
        assert!(lo <= 4.0 && 4.0 <= hi);

        let tiny = MarketSpec::linear(-2.0, 1e-15, 3.0).unwrap();
        let (lo, hi) = auto_bracket(&tiny).unwrap();
        let expected = 1e-15 / 5.0;
        assert!(lo <= expected && expected <= hi);
        assert!(lo < 1e-15);
        let p = solve_numeric(&tiny).unwrap();
        assert_relative_eq!(p.clearing_price.value(), expected, max_relative = 1e-9);
    }

    #[test]
    fn auto_bracket_gives_up_beyond_limits() {
        // Pr* = 1e30, outside [2^-60, 2^60].
        let huge = MarketSpec::linear(-1.0, 2e30, 1.0).unwrap();
        assert!(matches!(auto_bracket(&huge), Err(Error::Unsolvable(_))));
    }

    #[test]
    fn households_must_be_positive() {
        assert!(MarketSpec::unitary(1.0, 1.0, 0).is_err());
        assert!(linear().with_households(0).is_err());
    }

    #[test]
    fn market_spec_serde() {
        let json = serde_json::to_string(&unitary()).unwrap();
        assert_eq!(
            json,
            r#"{"demand":{"family":"unitary","k_s":8.0},"supply":{"k_d":2.0},"households":4,"interpretation":"per_household"}"#
        );
        let back: MarketSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, unitary());
        assert!(serde_json::from_str::<MarketSpec>(
            r#"{"demand":{"family":"unitary","k_s":8.0},"supply":{"k_d":2.0},"households":0}"#
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn excess_demand_strictly_decreasing(
            k_s in 0.01f64..100.0, k_d in 0.01f64..100.0, n in 1u64..100,
            q0 in 0.01f64..100.0, p in 0.01f64..100.0, dp in 0.01f64..100.0,
        ) {
            let u = MarketSpec::unitary(k_s, k_d, n).unwrap();
            prop_assert!(u.excess_demand(pr(p + dp)).unwrap() < u.excess_demand(pr(p)).unwrap());
            let l = MarketSpec::linear(-k_s, q0, k_d).unwrap();
            prop_assert!(l.excess_demand(pr(p + dp)).unwrap() < l.excess_demand(pr(p)).unwrap());
        }

        #[test]
        fn linear_scale_covariance(
            k_s in 0.01f64..100.0, k_d in 0.01f64..100.0, q0 in 0.01f64..100.0, lambda in 0.01f64..100.0,
        ) {
            let base = clearing_price_analytic(&MarketSpec::linear(-k_s, q0, k_d).unwrap()).unwrap();
            let scaled = clearing_price_analytic(
                &MarketSpec::linear(-k_s * lambda, q0 * lambda, k_d * lambda).unwrap(),
            ).unwrap();
            let (p0, p1) = (base.clearing_price.value(), scaled.clearing_price.value());
            prop_assert!((p0 - p1).abs() <= 1e-12 * p0);
            prop_assert!((scaled.clearing_quantity - lambda * base.clearing_quantity).abs()
                <= 1e-12 * scaled.clearing_quantity);
        }

        #[test]
        fn numeric_agrees_with_analytic(
            k_s in 0.001f64..1000.0, k_d in 0.001f64..1000.0, q0 in 0.001f64..1000.0, n in 1u64..10_000,
        ) {
            for m in [MarketSpec::linear(-k_s, q0, k_d).unwrap(), MarketSpec::unitary(k_s, k_d, n).unwrap()] {
                let a = clearing_price_analytic(&m).unwrap();
                let b = solve_numeric(&m).unwrap();
                let pa = a.clearing_price.value();
                prop_assert!((pa - b.clearing_price.value()).abs() <= 1e-9 * pa);
                prop_assert!(a.within_tolerance());
                prop_assert!(b.within_tolerance());
            }
        }
    }
}
