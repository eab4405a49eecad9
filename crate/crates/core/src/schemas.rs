//! JSON schemas for the config file and every JSON report.

use serde_json::Value;

pub const CONFIG: &str = include_str!("../schemas/config.schema.json");
pub const SURFACE_GRID: &str = include_str!("../schemas/surface_grid.schema.json");
pub const ISOCURVE_FAMILY: &str = include_str!("../schemas/isocurve_family.schema.json");
pub const COLLAPSE_REPORT: &str = include_str!("../schemas/collapse_report.schema.json");
pub const CONSISTENCY_REPORT: &str = include_str!("../schemas/consistency_report.schema.json");
pub const UNITARY_EOS: &str = include_str!("../schemas/unitary_eos.schema.json");
pub const ZEROTH_REPORT: &str = include_str!("../schemas/zeroth_report.schema.json");
pub const SOLVE_REPORT: &str = include_str!("../schemas/solve_report.schema.json");

/// Validates `instance` against `schema`, returning every violation.
pub fn validate(schema: &str, instance: &Value) -> Result<(), Vec<String>> {
    let schema: Value = serde_json::from_str(schema).map_err(|e| vec![format!("bad schema: {e}")])?;
    let validator = jsonschema::validator_for(&schema).map_err(|e| vec![format!("bad schema: {e}")])?;
    let errors: Vec<String> = validator
        .iter_errors(instance)
        .map(|e| {
            let path = e.instance_path().to_string();
            if path.is_empty() {
                e.to_string()
            } else {
                format!("{path}: {e}")
            }
        })
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_schemas_compile() {
        for s in [
            CONFIG,
            SURFACE_GRID,
            ISOCURVE_FAMILY,
            COLLAPSE_REPORT,
            CONSISTENCY_REPORT,
            UNITARY_EOS,
            ZEROTH_REPORT,
            SOLVE_REPORT,
        ] {
            let v: Value = serde_json::from_str(s).unwrap();
            jsonschema::validator_for(&v).unwrap();
        }
    }

    #[test]
    fn reports_violations_with_paths() {
        let bad = serde_json::json!({"version": "1", "markets": [{"name": "a", "family": "linear", "k_s": 2, "q_d0": 1, "k_d": 1}]});
        let errs = validate(CONFIG, &bad).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("/markets/0")), "{errs:?}");
        assert!(validate(CONFIG, &serde_json::json!({"version": "1"})).is_ok());
    }
}
