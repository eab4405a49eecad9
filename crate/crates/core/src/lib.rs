//! Markets modelled as thermodynamic systems.
//!
//! * [`curves`]: linear and unitary demand, linear supply, point elasticity.
//! * [`equilibrium`]: clearing prices, closed form and by bisection.
//! * [`eos`]: the unitary market equation of state `q^d = K·Q^s/Pr` and the
//!   linear-market consistency analysis.
//! * [`reference_eos`]: ideal gas and Curie paramagnet behind the same
//!   `f(X, Y, T) = 0` contract.
//! * [`surface`]: grid sampling, iso-curves, the isoprice collapse check and
//!   CSV/JSON export.
//! * [`zeroth_law`]: price equilibrium between markets as an equivalence
//!   relation, and price ranking.
//! * [`cli`]: the `market-eos` command-line front end.

pub mod cli;
pub mod curves;
pub mod eos;
pub mod equilibrium;
pub mod error;
pub mod reference_eos;
pub mod schemas;
pub mod surface;
pub mod zeroth_law;

pub use error::{Error, Result};
