//! Classical equations of state used for comparison with the market one.
//!
//! Every EoS here, and [`UnitaryEoS`], is a constraint `f(X, Y, T) = 0`
//! solved explicitly for `Y`:
//!
//! | EoS              | X     | Y     | T    | Y(X, T)          |
//! |------------------|-------|-------|------|------------------|
//! | ideal gas        | `V`   | `P`   | `T`  | `n·R·T/V`        |
//! | Curie paramagnet | `B0`  | `M`   | `T`  | `(D/μ₀)·B0/T`    |
//! | unitary market   | `Q^s` | `q^d` | `Pr` | `K·Q^s/Pr`       |
//!
//! Pressure is stored positive; the `Y = -P` sign convention for mechanical
//! intensive coordinates is not applied.

use serde::Serialize;

use crate::curves::Price;
use crate::eos::UnitaryEoS;
use crate::error::{Error, Result};

/// Molar gas constant, J/(mol·K).
pub const GAS_CONSTANT: f64 = 8.314;

/// Symbolic vacuum permeability; the magnet EoS is used unit-free.
pub const DEFAULT_MU0: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AxisLabels {
    pub x: &'static str,
    pub y: &'static str,
    pub t: &'static str,
}

/// A point `(X, Y, T)` in the state space of some EoS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StatePoint {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

/// An equation of state `f(X, Y, T) = 0` with an explicit `Y(X, T)`.
pub trait ConstraintSurface {
    fn axes(&self) -> AxisLabels;

    /// The `Y` that puts `(x, ·, t)` on the surface.
    fn solve_y(&self, x: f64, t: f64) -> Result<f64>;

    /// Signed `f(x, y, t)`, in `Y` units; zero on the surface.
    fn residual(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        Ok(y - self.solve_y(x, t)?)
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::domain(format!("{name} must be positive, got {v}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdealGasEoS {
    n: f64,
    r: f64,
}

impl IdealGasEoS {
    /// `n` moles with the default gas constant.
    pub fn new(n: f64) -> Result<Self> {
        IdealGasEoS::with_gas_constant(n, GAS_CONSTANT)
    }

    pub fn with_gas_constant(n: f64, r: f64) -> Result<Self> {
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::invariant(format!("amount n must be positive, got {n}")));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::invariant(format!("gas constant R must be positive, got {r}")));
        }
        Ok(IdealGasEoS { n, r })
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn r(&self) -> f64 {
        self.r
    }
}

/// `P = n·R·T/V`.
pub fn ideal_gas_pressure(gas: &IdealGasEoS, t: f64, v: f64) -> Result<f64> {
    let t = positive("temperature", t)?;
    let v = positive("volume", v)?;
    Ok(gas.n * gas.r * t / v)
}

impl ConstraintSurface for IdealGasEoS {
    fn axes(&self) -> AxisLabels {
        AxisLabels { x: "V", y: "P", t: "T" }
    }

    fn solve_y(&self, x: f64, t: f64) -> Result<f64> {
        ideal_gas_pressure(self, t, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurieParamagnetEoS {
    curie_constant: f64,
    mu0: f64,
}

impl CurieParamagnetEoS {
    pub fn new(curie_constant: f64) -> Result<Self> {
        CurieParamagnetEoS::with_mu0(curie_constant, DEFAULT_MU0)
    }

    pub fn with_mu0(curie_constant: f64, mu0: f64) -> Result<Self> {
        if !(curie_constant > 0.0 && curie_constant.is_finite()) {
            return Err(Error::invariant(format!(
                "Curie constant D must be positive, got {curie_constant}"
            )));
        }
        if !(mu0 > 0.0 && mu0.is_finite()) {
            return Err(Error::invariant(format!("mu0 must be positive, got {mu0}")));
        }
        Ok(CurieParamagnetEoS { curie_constant, mu0 })
    }

    pub fn curie_constant(&self) -> f64 {
        self.curie_constant
    }

    pub fn mu0(&self) -> f64 {
        self.mu0
    }
}

/// `M = (D/μ₀)·(B0/T)`.
pub fn curie_magnetization(mag: &CurieParamagnetEoS, b0: f64, t: f64) -> Result<f64> {
    let t = positive("temperature", t)?;
    if !b0.is_finite() {
        return Err(Error::domain(format!("field B0 must be finite, got {b0}")));
    }
    Ok((mag.curie_constant / mag.mu0) * (b0 / t))
}

impl ConstraintSurface for CurieParamagnetEoS {
    fn axes(&self) -> AxisLabels {
        AxisLabels { x: "B0", y: "M", t: "T" }
    }

    fn solve_y(&self, x: f64, t: f64) -> Result<f64> {
        curie_magnetization(self, x, t)
    }
}

impl ConstraintSurface for UnitaryEoS {
    fn axes(&self) -> AxisLabels {
        AxisLabels { x: "Q^s", y: "q^d", t: "Pr" }
    }

    fn solve_y(&self, x: f64, t: f64) -> Result<f64> {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(Error::domain(format!("supply Q^s must be nonnegative, got {x}")));
        }
        self.demand_per_household(x, Price::new(t)?)
    }
}

/// Any of the supported equations of state.
#[derive(Debug, Clone, PartialEq)]
pub enum Eos {
    IdealGas(IdealGasEoS),
    Paramagnet(CurieParamagnetEoS),
    Market(UnitaryEoS),
}

impl Eos {
    pub fn kind(&self) -> &'static str {
        match self {
            Eos::IdealGas(_) => "ideal_gas",
            Eos::Paramagnet(_) => "paramagnet",
            Eos::Market(_) => "market",
        }
    }
}

impl ConstraintSurface for Eos {
    fn axes(&self) -> AxisLabels {
        match self {
            Eos::IdealGas(e) => e.axes(),
            Eos::Paramagnet(e) => e.axes(),
            Eos::Market(e) => e.axes(),
        }
    }

    fn solve_y(&self, x: f64, t: f64) -> Result<f64> {
        match self {
            Eos::IdealGas(e) => e.solve_y(x, t),
            Eos::Paramagnet(e) => e.solve_y(x, t),
            Eos::Market(e) => e.solve_y(x, t),
        }
    }
}

/// `f(X, Y, T)` through the common interface.
pub fn surface_residual(eos: &Eos, point: StatePoint) -> Result<f64> {
    eos.residual(point.x, point.y, point.t)
}
