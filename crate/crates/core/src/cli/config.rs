//! The JSON config document.
//!
//! A config is validated against `schemas/config.schema.json` (unknown
//! fields rejected) before it is deserialized, and every market is built
//! eagerly so parameter errors surface as config errors.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;

use crate::curves::{Demand, LinearDemand, LinearSupply, UnitaryDemand};
use crate::eos::{derive_unitary_eos, UnitaryEoS};
use crate::equilibrium::{Interpretation, MarketSpec};
use crate::error::{Error, Result};
use crate::reference_eos::{CurieParamagnetEoS, Eos, IdealGasEoS, DEFAULT_MU0, GAS_CONSTANT};
use crate::schemas;
use crate::surface::GridSpec;
use crate::zeroth_law::{MarketRegistry, DEFAULT_QUANTUM};

pub const SCHEMA_VERSION: &str = "1";

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MarketEntry {
    Linear {
        name: String,
        k_s: f64,
        q_d0: f64,
        k_d: f64,
        #[serde(default = "one")]
        households: u64,
        #[serde(default)]
        interpretation: Interpretation,
        goods: Option<String>,
    },
    Unitary {
        name: String,
        k_s: f64,
        k_d: f64,
        #[serde(default = "one")]
        households: u64,
        #[serde(default)]
        interpretation: Interpretation,
        goods: Option<String>,
    },
}

impl MarketEntry {
    pub fn name(&self) -> &str {
        match self {
            MarketEntry::Linear { name, .. } | MarketEntry::Unitary { name, .. } => name,
        }
    }

    pub fn goods(&self) -> Option<&str> {
        match self {
            MarketEntry::Linear { goods, .. } | MarketEntry::Unitary { goods, .. } => goods.as_deref(),
        }
    }

    pub fn to_spec(&self) -> Result<MarketSpec> {
        let (demand, k_d, households, interpretation) = match *self {
            MarketEntry::Linear {
                k_s,
                q_d0,
                k_d,
                households,
                interpretation,
                ..
            } => (
                Demand::Linear(LinearDemand::new(k_s, q_d0)?),
                k_d,
                households,
                interpretation,
            ),
            MarketEntry::Unitary {
                k_s,
                k_d,
                households,
                interpretation,
                ..
            } => (
                Demand::Unitary(UnitaryDemand::new(k_s)?),
                k_d,
                households,
                interpretation,
            ),
        };
        Ok(MarketSpec::new(demand, LinearSupply::new(k_d)?, households)?.with_interpretation(interpretation))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EosEntry {
    IdealGas {
        name: String,
        n: f64,
        r: Option<f64>,
    },
    Paramagnet {
        name: String,
        curie_constant: f64,
        mu0: Option<f64>,
    },
    Market {
        name: String,
        market: Option<String>,
        #[serde(rename = "K")]
        k: Option<f64>,
    },
}

impl EosEntry {
    pub fn name(&self) -> &str {
        match self {
            EosEntry::IdealGas { name, .. }
            | EosEntry::Paramagnet { name, .. }
            | EosEntry::Market { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct OutputBlock {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ConfigDocument {
    pub version: String,
    #[serde(default)]
    pub markets: Vec<MarketEntry>,
    #[serde(default)]
    pub eos: Vec<EosEntry>,
    pub grid: Option<GridSpec>,
    pub quantum: Option<f64>,
    #[serde(default)]
    pub output: OutputBlock,
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

impl ConfigDocument {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(config_err)?;
        if let Err(errors) = schemas::validate(schemas::CONFIG, &value) {
            return Err(Error::Config(format!(
                "config does not match schema:\n  {}",
                errors.join("\n  ")
            )));
        }
        let doc: ConfigDocument = serde_json::from_value(value).map_err(config_err)?;
        doc.check()?;
        Ok(doc)
    }

    fn check(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return Err(Error::Config(format!("unsupported config version {}", self.version)));
        }
        let mut seen = BTreeSet::new();
        for m in &self.markets {
            if !seen.insert(m.name()) {
                return Err(Error::Config(format!("duplicate market name `{}`", m.name())));
            }
            m.to_spec()
                .map_err(|e| Error::Config(format!("market `{}`: {e}", m.name())))?;
        }
        let mut seen = BTreeSet::new();
        for e in &self.eos {
            if !seen.insert(e.name()) {
                return Err(Error::Config(format!("duplicate eos name `{}`", e.name())));
            }
            if let EosEntry::Market { market: Some(m), .. } = e {
                if !self.markets.iter().any(|x| x.name() == m) {
                    return Err(Error::Config(format!(
                        "eos `{}` refers to unknown market `{m}`",
                        e.name()
                    )));
                }
            }
        }
        if let Some(q) = self.quantum {
            MarketRegistry::new(q).map_err(config_err)?;
        }
        Ok(())
    }

    pub fn market_entry(&self, name: &str) -> Result<&MarketEntry> {
        self.markets
            .iter()
            .find(|m| m.name() == name)
            .ok_or_else(|| Error::UnknownName(name.to_string()))
    }

    pub fn market(&self, name: &str) -> Result<MarketSpec> {
        self.market_entry(name)?.to_spec()
    }

    /// Resolves an EoS block by name, falling back to a market name, whose
    /// unitary EoS is derived.
    pub fn eos(&self, name: &str) -> Result<Eos> {
        let Some(entry) = self.eos.iter().find(|e| e.name() == name) else {
            let market = self.market(name)?;
            return Ok(Eos::Market(derive_unitary_eos(&market)?));
        };
        Ok(match entry {
            EosEntry::IdealGas { n, r, .. } => {
                Eos::IdealGas(IdealGasEoS::with_gas_constant(*n, r.unwrap_or(GAS_CONSTANT))?)
            }
            EosEntry::Paramagnet {
                curie_constant, mu0, ..
            } => Eos::Paramagnet(CurieParamagnetEoS::with_mu0(
                *curie_constant,
                mu0.unwrap_or(DEFAULT_MU0),
            )?),
            EosEntry::Market { market: Some(m), .. } => {
                Eos::Market(derive_unitary_eos(&self.market(m)?)?)
            }
            EosEntry::Market { k: Some(k), .. } => Eos::Market(UnitaryEoS::from_constant(*k)?),
            EosEntry::Market { .. } => {
                return Err(Error::Config(format!("eos `{name}` needs `market` or `K`")))
            }
        })
    }

    pub fn registry(&self) -> Result<MarketRegistry> {
        let mut registry = MarketRegistry::new(self.quantum.unwrap_or(DEFAULT_QUANTUM))?;
        for m in &self.markets {
            registry.insert(m.name(), m.to_spec()?, m.goods().map(str::to_string))?;
        }
        Ok(registry)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "version": "1",
        "markets": [
            {"name": "A", "family": "linear", "k_s": -2, "q_d0": 10, "k_d": 3},
            {"name": "U", "family": "unitary", "k_s": 8, "k_d": 2, "households": 4, "goods": "rice"}
        ],
        "eos": [
            {"name": "gas", "kind": "ideal_gas", "n": 1},
            {"name": "magnet", "kind": "paramagnet", "curie_constant": 2},
            {"name": "unit", "kind": "market", "K": 1},
            {"name": "u_eos", "kind": "market", "market": "U"}
        ],
        "grid": {"x_min": 1, "x_max": 10, "nx": 50, "t_min": 1, "t_max": 10, "nt": 50},
        "quantum": 1e-9
    }"#;

    #[test]
    fn parses_sample() {
        let doc = ConfigDocument::parse(SAMPLE).unwrap();
        assert_eq!(doc.markets.len(), 2);
        let u = doc.market("U").unwrap();
        assert_eq!(u.households(), 4);
        assert_eq!(u.interpretation(), Interpretation::PerHousehold);
        assert_eq!(doc.market("A").unwrap().households(), 1);
        assert!(matches!(doc.eos("gas").unwrap(), Eos::IdealGas(g) if g.r() == 8.314));
        match doc.eos("u_eos").unwrap() {
            Eos::Market(e) => assert_eq!(e.k(), 1.0),
            other => panic!("{other:?}"),
        }
        // market names resolve as EoS too
        assert!(matches!(doc.eos("U").unwrap(), Eos::Market(_)));
        assert!(matches!(doc.eos("A"), Err(Error::WrongFamily(_))));
        assert!(matches!(doc.eos("nope"), Err(Error::UnknownName(_))));
        assert_eq!(doc.registry().unwrap().len(), 2);
        assert_eq!(doc.grid.unwrap().nx(), 50);
    }

    #[test]
    fn strict_mode_rejects_unknown_fields() {
        let err = ConfigDocument::parse(r#"{"version": "1", "extra": true}"#).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = ConfigDocument::parse(
            r#"{"version": "1", "markets": [{"name": "A", "family": "linear", "k_s": -2, "q_d0": 10, "k_d": 3, "slope": 1}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn semantic_errors() {
        for bad in [
            r#"{"version": "2"}"#,
            r#"{"version": "1", "markets": [{"name": "A", "family": "unitary", "k_s": 1, "k_d": 1}, {"name": "A", "family": "unitary", "k_s": 1, "k_d": 1}]}"#,
            r#"{"version": "1", "eos": [{"name": "e", "kind": "market", "market": "missing"}]}"#,
            r#"{"version": "1", "markets": [{"name": "A", "family": "unitary", "k_s": 1, "k_d": 1, "households": 0}]}"#,
            r#"{"version": "1", "grid": {"x_min": 2, "x_max": 1, "nx": 2, "t_min": 1, "t_max": 2, "nt": 2}}"#,
            r#"not json"#,
        ] {
            let err = ConfigDocument::parse(bad).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{bad}: {err}");
        }
    }
}
