//! Demand and supply curve families.
//!
//! Three families are supported:
//!
//! * [`LinearDemand`]: `Q = k_s·Pr + q_d0` with `k_s < 0`, `q_d0 > 0`.
//! * [`LinearSupply`]: `Q = k_d·Pr` with `k_d > 0`.
//! * [`UnitaryDemand`]: `Q = k_s / Pr` with `k_s > 0`, so `Q·Pr` is constant
//!   and the point elasticity is `-1` everywhere.
//!
//! Slopes are constants for the linear families. Prices and quantities are
//! abstract currency and goods units.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `| |E| - 1 |` below which an elasticity is classed as unitary.
pub const UNITARY_TOLERANCE: f64 = 1e-12;

/// A nonnegative price in abstract currency units per unit good.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Price(f64);

impl Price {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::domain(format!(
                "price must be finite and nonnegative, got {value}"
            )));
        }
        Ok(Price(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// The price value, failing if it is zero.
    pub fn positive(self) -> Result<f64> {
        if self.0 > 0.0 {
            Ok(self.0)
        } else {
            Err(Error::domain("price must be positive"))
        }
    }
}

impl TryFrom<f64> for Price {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Price::new(value)
    }
}

impl From<Price> for f64 {
    fn from(p: Price) -> f64 {
        p.0
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Anything with a price-dependent quantity and slope.
pub trait Curve {
    /// Raw quantity at `pr`. For linear demand this may be negative above the
    /// choke price; use [`demand_quantity`] for the flagged form.
    fn quantity(&self, pr: Price) -> Result<f64>;

    /// `dQ/dPr` at `pr`.
    fn slope(&self, pr: Price) -> Result<f64>;
}

fn finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invariant(format!("{name} must be finite, got {v}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLinearDemand")]
pub struct LinearDemand {
    k_s: f64,
    q_d0: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLinearDemand {
    k_s: f64,
    q_d0: f64,
}

impl TryFrom<RawLinearDemand> for LinearDemand {
    type Error = Error;

    fn try_from(raw: RawLinearDemand) -> Result<Self> {
        LinearDemand::new(raw.k_s, raw.q_d0)
    }
}

impl LinearDemand {
    pub fn new(k_s: f64, q_d0: f64) -> Result<Self> {
        let k_s = finite("k_s", k_s)?;
        let q_d0 = finite("q_d0", q_d0)?;
        if k_s >= 0.0 {
            return Err(Error::invariant(format!(
                "linear demand slope k_s must be negative, got {k_s}"
            )));
        }
        if q_d0 <= 0.0 {
            return Err(Error::invariant(format!(
                "linear demand intercept q_d0 must be positive, got {q_d0}"
            )));
        }
        Ok(LinearDemand { k_s, q_d0 })
    }

    pub fn k_s(&self) -> f64 {
        self.k_s
    }

    pub fn q_d0(&self) -> f64 {
        self.q_d0
    }

    /// Price at which demand reaches zero: `q_d0 / |k_s|`.
    pub fn choke_price(&self) -> f64 {
        self.q_d0 / -self.k_s
    }
}

impl Curve for LinearDemand {
    fn quantity(&self, pr: Price) -> Result<f64> {
        Ok(self.k_s * pr.value() + self.q_d0)
    }

    fn slope(&self, _pr: Price) -> Result<f64> {
        Ok(self.k_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLinearSupply")]
pub struct LinearSupply {
    k_d: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLinearSupply {
    k_d: f64,
}

impl TryFrom<RawLinearSupply> for LinearSupply {
    type Error = Error;

    fn try_from(raw: RawLinearSupply) -> Result<Self> {
        LinearSupply::new(raw.k_d)
    }
}

impl LinearSupply {
    pub fn new(k_d: f64) -> Result<Self> {
        let k_d = finite("k_d", k_d)?;
        if k_d <= 0.0 {
            return Err(Error::invariant(format!(
                "supply slope k_d must be positive, got {k_d}"
            )));
        }
        Ok(LinearSupply { k_d })
    }

    pub fn k_d(&self) -> f64 {
        self.k_d
    }
}

impl Curve for LinearSupply {
    fn quantity(&self, pr: Price) -> Result<f64> {
        Ok(supply_quantity(self, pr))
    }

    fn slope(&self, _pr: Price) -> Result<f64> {
        Ok(self.k_d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawUnitaryDemand")]
pub struct UnitaryDemand {
    k_s: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUnitaryDemand {
    k_s: f64,
}

impl TryFrom<RawUnitaryDemand> for UnitaryDemand {
    type Error = Error;

    fn try_from(raw: RawUnitaryDemand) -> Result<Self> {
        UnitaryDemand::new(raw.k_s)
    }
}

impl UnitaryDemand {
    pub fn new(k_s: f64) -> Result<Self> {
        let k_s = finite("k_s", k_s)?;
        if k_s <= 0.0 {
            return Err(Error::invariant(format!(
                "unitary demand coefficient k_s must be positive, got {k_s}"
            )));
        }
        Ok(UnitaryDemand { k_s })
    }

    pub fn k_s(&self) -> f64 {
        self.k_s
    }
}

impl Curve for UnitaryDemand {
    fn quantity(&self, pr: Price) -> Result<f64> {
        Ok(self.k_s / pr.positive()?)
    }

    fn slope(&self, pr: Price) -> Result<f64> {
        let p = pr.positive()?;
        Ok(-self.k_s / (p * p))
    }
}

/// Either demand family, tagged by `family` in serialized form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Demand {
    Linear(LinearDemand),
    Unitary(UnitaryDemand),
}

impl Demand {
    pub fn family(&self) -> &'static str {
        match self {
            Demand::Linear(_) => "linear",
            Demand::Unitary(_) => "unitary",
        }
    }
}

impl Curve for Demand {
    fn quantity(&self, pr: Price) -> Result<f64> {
        match self {
            Demand::Linear(c) => c.quantity(pr),
            Demand::Unitary(c) => c.quantity(pr),
        }
    }

    fn slope(&self, pr: Price) -> Result<f64> {
        match self {
            Demand::Linear(c) => c.slope(pr),
            Demand::Unitary(c) => c.slope(pr),
        }
    }
}

/// Quantity demanded, flagged when a linear curve is past its choke price.
///
/// The negative value is kept as computed; callers decide whether to clamp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DemandQuantity {
    InRange(f64),
    Exhausted { value: f64, choke_price: f64 },
}

impl DemandQuantity {
    pub fn value(&self) -> f64 {
        match *self {
            DemandQuantity::InRange(v) => v,
            DemandQuantity::Exhausted { value, .. } => value,
        }
    }

    pub fn is_exhausted(&self) -> bool {
        matches!(self, DemandQuantity::Exhausted { .. })
    }
}

impl fmt::Display for DemandQuantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DemandQuantity::InRange(v) => write!(f, "{v}"),
            DemandQuantity::Exhausted { value, choke_price } => write!(
                f,
                "{value} (demand exhausted above choke price {choke_price})"
            ),
        }
    }
}

pub fn demand_quantity(curve: &Demand, pr: Price) -> Result<DemandQuantity> {
    match curve {
        Demand::Linear(c) => {
            let value = c.quantity(pr)?;
            if value < 0.0 {
                Ok(DemandQuantity::Exhausted {
                    value,
                    choke_price: c.choke_price(),
                })
            } else {
                Ok(DemandQuantity::InRange(value))
            }
        }
        Demand::Unitary(c) => c.quantity(pr).map(DemandQuantity::InRange),
    }
}

pub fn supply_quantity(curve: &LinearSupply, pr: Price) -> f64 {
    curve.k_d * pr.value()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElasticityClass {
    Elastic,
    Unitary,
    Inelastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Elasticity {
    pub value: f64,
    pub class: ElasticityClass,
}

impl Elasticity {
    fn classify(value: f64) -> Self {
        let magnitude = value.abs();
        let class = if (magnitude - 1.0).abs() <= UNITARY_TOLERANCE {
            ElasticityClass::Unitary
        } else if magnitude > 1.0 {
            ElasticityClass::Elastic
        } else {
            ElasticityClass::Inelastic
        };
        Elasticity { value, class }
    }
}

/// Point-price elasticity `(dQ/dPr)·(Pr₀/Q₀)`.
pub fn point_elasticity<C: Curve + ?Sized>(curve: &C, pr0: Price) -> Result<Elasticity> {
    let p = pr0.positive()?;
    let q = curve.quantity(pr0)?;
    if q == 0.0 {
        return Err(Error::domain("elasticity undefined at zero quantity"));
    }
    let slope = curve.slope(pr0)?;
    Ok(Elasticity::classify(slope * p / q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pr(v: f64) -> Price {
        Price::new(v).unwrap()
    }

    fn central_difference<C: Curve>(c: &C, p: f64, h: f64) -> f64 {
        (c.quantity(pr(p + h)).unwrap() - c.quantity(pr(p - h)).unwrap()) / (2.0 * h)
    }

    #[test]
    fn linear_demand_values() {
        let d = Demand::Linear(LinearDemand::new(-2.0, 10.0).unwrap());
        assert_eq!(demand_quantity(&d, pr(0.0)).unwrap().value(), 10.0);
        assert_eq!(
            demand_quantity(&d, pr(3.0)).unwrap(),
            DemandQuantity::InRange(4.0)
        );
    }

    #[test]
    fn linear_demand_past_choke_is_flagged_not_clamped() {
        let d = Demand::Linear(LinearDemand::new(-2.0, 10.0).unwrap());
        let q = demand_quantity(&d, pr(7.0)).unwrap();
        assert!(q.is_exhausted());
        assert_eq!(q.value(), -4.0);
        assert_eq!(
            q,
            DemandQuantity::Exhausted {
                value: -4.0,
                choke_price: 5.0
            }
        );
        assert!(q.to_string().contains("demand exhausted above choke price 5"));
    }

    #[test]
    fn unitary_demand_values() {
        let d = Demand::Unitary(UnitaryDemand::new(8.0).unwrap());
        assert_eq!(demand_quantity(&d, pr(2.0)).unwrap().value(), 4.0);
        let err = demand_quantity(&d, pr(0.0)).unwrap_err();
        assert!(err.to_string().contains("price must be positive"));
    }

    #[test]
    fn supply_values() {
        assert_eq!(supply_quantity(&LinearSupply::new(3.0).unwrap(), pr(0.0)), 0.0);
        assert_eq!(supply_quantity(&LinearSupply::new(3.0).unwrap(), pr(2.0)), 6.0);
        assert_eq!(supply_quantity(&LinearSupply::new(2.0).unwrap(), pr(4.0)), 8.0);
    }

    #[test]
    fn slopes() {
        let lin = LinearDemand::new(-2.0, 10.0).unwrap();
        for p in [0.0, 1.0, 4.5, 100.0] {
            assert_eq!(lin.slope(pr(p)).unwrap(), -2.0);
        }
        let uni = UnitaryDemand::new(8.0).unwrap();
        assert_eq!(uni.slope(pr(2.0)).unwrap(), -2.0);
        assert!(matches!(uni.slope(pr(0.0)), Err(Error::Domain(_))));

        let fd = central_difference(&uni, 1.7, 1e-6);
        assert_relative_eq!(uni.slope(pr(1.7)).unwrap(), fd, max_relative = 1e-6);
    }

    #[test]
    fn elasticity_examples() {
        let uni = UnitaryDemand::new(8.0).unwrap();
        let e = point_elasticity(&uni, pr(5.0)).unwrap();
        assert_relative_eq!(e.value, -1.0, epsilon = 1e-12);
        assert_eq!(e.class, ElasticityClass::Unitary);

        let lin = LinearDemand::new(-2.0, 10.0).unwrap();
        let e = point_elasticity(&lin, pr(3.0)).unwrap();
        assert_relative_eq!(e.value, -1.5, epsilon = 1e-15);
        assert_eq!(e.class, ElasticityClass::Elastic);

        let e = point_elasticity(&lin, pr(1.0)).unwrap();
        assert_relative_eq!(e.value, -0.25, epsilon = 1e-15);
        assert_eq!(e.class, ElasticityClass::Inelastic);

        let sup = LinearSupply::new(3.0).unwrap();
        let e = point_elasticity(&sup, pr(0.37)).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.class, ElasticityClass::Unitary);
    }

    #[test]
    fn elasticity_at_zero_quantity_is_undefined() {
        let lin = LinearDemand::new(-2.0, 10.0).unwrap();
        let err = point_elasticity(&lin, pr(5.0)).unwrap_err();
        assert!(err.to_string().contains("elasticity undefined at zero quantity"));
        assert!(point_elasticity(&LinearSupply::new(1.0).unwrap(), pr(0.0)).is_err());
    }

    #[test]
    fn invariants_rejected() {
        assert!(LinearDemand::new(0.0, 1.0).is_err());
        assert!(LinearDemand::new(2.0, 1.0).is_err());
        assert!(LinearDemand::new(-2.0, 0.0).is_err());
        assert!(LinearDemand::new(f64::NAN, 1.0).is_err());
        assert!(LinearSupply::new(0.0).is_err());
        assert!(UnitaryDemand::new(-1.0).is_err());
        assert!(Price::new(-0.5).is_err());
        assert!(Price::new(f64::INFINITY).is_err());
    }

    #[test]
    fn demand_serde_is_tagged_and_validated() {
        let d: Demand = serde_json::from_str(r#"{"family":"linear","k_s":-2,"q_d0":10}"#).unwrap();
        assert_eq!(d, Demand::Linear(LinearDemand::new(-2.0, 10.0).unwrap()));
        assert!(serde_json::from_str::<Demand>(r#"{"family":"linear","k_s":2,"q_d0":10}"#).is_err());
        let json = serde_json::to_string(&Demand::Unitary(UnitaryDemand::new(8.0).unwrap())).unwrap();
        assert_eq!(json, r#"{"family":"unitary","k_s":8.0}"#);
    }

    proptest! {
        #[test]
        fn unitary_elasticity_is_minus_one(k in 1e-6f64..1e3, p in 1e-6f64..1e3) {
            let e = point_elasticity(&UnitaryDemand::new(k).unwrap(), pr(p)).unwrap();
            prop_assert!((e.value + 1.0).abs() <= 1e-12);
            prop_assert_eq!(e.class, ElasticityClass::Unitary);
        }

        #[test]
        fn unitary_quantity_times_price_is_coefficient(k in 1e-6f64..1e3, p in 1e-6f64..1e3) {
            let q = UnitaryDemand::new(k).unwrap().quantity(pr(p)).unwrap();
            prop_assert!((q * p - k).abs() <= 1e-12 * k);
        }

        #[test]
        fn supply_elasticity_is_one(k in 1e-6f64..1e3, p in 1e-6f64..1e3) {
            let e = point_elasticity(&LinearSupply::new(k).unwrap(), pr(p)).unwrap();
            prop_assert!((e.value - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn linear_demand_strictly_decreasing(k in -1e3f64..-1e-3, q0 in 1e-3f64..1e3, a in 0.0f64..1e3, d in 1e-3f64..1e3) {
            let c = LinearDemand::new(k, q0).unwrap();
            prop_assert!(c.quantity(pr(a + d)).unwrap() < c.quantity(pr(a)).unwrap());
        }
    }
}
