//! JSON experiment configuration.
//!
//! Schema (unknown keys are rejected):
//!
//! ```json
//! {
//!   "model1": { "kind": "fbm", "h": 0.5 },
//!   "model2": { "kind": "bifbm", "h0": 0.7, "k0": 0.5 },
//!   "d": 2,
//!   "k": [1, 0],
//!   "t": 1.0,
//!   "x": [0.0, 0.0],
//!   "eps": 0.1
//! }
//! ```
//!
//! `t` defaults to 1, `eps` to 0.1, `k` to all zeros, and `x` to the
//! origin. Model kinds: `fbm` (field `h`), `bifbm` (`h0`, `k0`),
//! `subfbm` (`h`), each with parameters in (0, 1].

use serde::Deserialize;

use crate::covariance::CovarianceModel;
use crate::heatkernel::MultiIndex;
use crate::moments::FieldSpec;
use crate::{Error, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model1: CovarianceModel,
    model2: CovarianceModel,
    d: usize,
    #[serde(default)]
    k: Option<Vec<u32>>,
    #[serde(default = "default_horizon")]
    t: f64,
    #[serde(default)]
    x: Option<Vec<f64>>,
    #[serde(default = "default_eps")]
    eps: f64,
}

fn default_horizon() -> f64 {
    1.0
}

fn default_eps() -> f64 {
    0.1
}

/// Parse and validate a JSON field specification.
pub fn parse_field_spec(json: &str) -> Result<FieldSpec> {
    let raw: RawConfig = serde_json::from_str(json)
        .map_err(|e| Error::InvalidParameter(format!("config: {e}")))?;
    let k = MultiIndex::new(raw.k.unwrap_or_else(|| vec![0; raw.d]));
    let x = raw.x.unwrap_or_else(|| vec![0.0; raw.d]);
    FieldSpec::new(raw.model1, raw.model2, raw.d, k, raw.t, x, raw.eps)
}

/// Parse a field spec from a file on disk.
pub fn load_field_spec(path: &std::path::Path) -> Result<FieldSpec> {
    parse_field_spec(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_spec_applies_defaults() {
        let spec = parse_field_spec(
            r#"{"model1":{"kind":"fbm","h":0.5},"model2":{"kind":"fbm","h":0.5},"d":2}"#,
        )
        .unwrap();
        assert_eq!(spec.horizon, 1.0);
        assert_eq!(spec.eps, 0.1);
        assert_eq!(spec.x, vec![0.0, 0.0]);
        assert_eq!(spec.k.total(), 0);
    }

    #[test]
    fn out_of_range_hurst_names_the_range() {
        let err = parse_field_spec(
            r#"{"model1":{"kind":"fbm","h":1.2},"model2":{"kind":"fbm","h":0.5},"d":1}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("(0,1)"), "got: {err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(parse_field_spec(
            r#"{"model1":{"kind":"fbm","h":0.5},"model2":{"kind":"fbm","h":0.5},"d":1,"epz":0.1}"#,
        )
        .is_err());
    }

    #[test]
    fn k_length_mismatch_rejected() {
        assert!(parse_field_spec(
            r#"{"model1":{"kind":"fbm","h":0.5},"model2":{"kind":"fbm","h":0.5},"d":2,"k":[1]}"#,
        )
        .is_err());
    }

    #[test]
    fn full_spec_round_trip() {
        let spec = parse_field_spec(
            r#"{"model1":{"kind":"bifbm","h0":0.7,"k0":0.5},
                "model2":{"kind":"subfbm","h":0.3},
                "d":1,"k":[2],"t":2.0,"x":[0.5],"eps":0.05}"#,
        )
        .unwrap();
        assert_eq!(spec.horizon, 2.0);
        assert_eq!(spec.k.orders(), &[2]);
        assert_eq!(spec.model1.hurst(), 0.35);
    }
}
