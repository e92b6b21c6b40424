//! Seeded differential runs of the evaluation pipeline against the oracle.

use serde_json::Value;

use super::oracle::oracle_record;
use super::random::{random_confidence, random_scenario, ScenarioParams};
use crate::error::Result;
use crate::harness::{evaluate_pair, EvalConfig, ImageRecord};
use crate::mask::{ConfidenceMap, Connectivity, LabelMap};

/// One generated input with the settings it is evaluated under.
#[derive(Debug, Clone)]
pub struct FuzzCase {
    pub seed: u64,
    pub gt: LabelMap,
    pub pred: LabelMap,
    pub conf: Option<ConfidenceMap>,
    pub cfg: EvalConfig,
}

/// Even seeds use 8-connectivity, odd seeds 4-connectivity; every fourth
/// seed also filters regions at confidence 0.4.
pub fn fuzz_case(seed: u64, params: &ScenarioParams) -> FuzzCase {
    let (gt, pred) = random_scenario(seed, params);
    let mut cfg = EvalConfig::new(params.num_classes);
    cfg.connectivity = if seed.is_multiple_of(2) {
        Connectivity::Eight
    } else {
        Connectivity::Four
    };
    let conf = (seed % 4 == 3).then(|| random_confidence(seed, params.width, params.height));
    if conf.is_some() {
        cfg.confidence_threshold = Some(0.4);
    }
    FuzzCase {
        seed,
        gt,
        pred,
        conf,
        cfg,
    }
}

fn diff_values(path: &str, a: &Value, b: &Value, tol: f64, out: &mut Vec<String>) {
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            for key in x.keys().chain(y.keys().filter(|k| !x.contains_key(*k))) {
                let sub = format!("{path}.{key}");
                match (x.get(key), y.get(key)) {
                    (Some(p), Some(q)) => diff_values(&sub, p, q, tol, out),
                    _ => out.push(format!("{sub}: present on one side only")),
                }
            }
        }
        (Value::Array(x), Value::Array(y)) => {
            if x.len() != y.len() {
                out.push(format!("{path}: length {} vs {}", x.len(), y.len()));
                return;
            }
            for (i, (p, q)) in x.iter().zip(y).enumerate() {
                diff_values(&format!("{path}[{i}]"), p, q, tol, out);
            }
        }
        (Value::Number(x), Value::Number(y)) if x.is_f64() || y.is_f64() => {
            let (p, q) = (x.as_f64().unwrap_or(f64::NAN), y.as_f64().unwrap_or(f64::NAN));
            let close = (p - q).abs() <= tol;
            if !close {
                out.push(format!("{path}: {p} vs {q}"));
            }
        }
        _ if a != b => out.push(format!("{path}: {a} vs {b}")),
        _ => {}
    }
}

/// Field-by-field differences between two records: integers and structure
/// must match exactly, floats within `tol`.
pub fn record_differences(a: &ImageRecord, b: &ImageRecord, tol: f64) -> Vec<String> {
    let mut out = Vec::new();
    match (serde_json::to_value(a), serde_json::to_value(b)) {
        (Ok(x), Ok(y)) => diff_values("record", &x, &y, tol, &mut out),
        (x, y) => out.push(format!("serialization failed: {:?} / {:?}", x.err(), y.err())),
    }
    out
}

/// Evaluates a case with both paths and returns the differences.
pub fn check_case(case: &FuzzCase, tol: f64) -> Result<Vec<String>> {
    let fast = evaluate_pair(&case.gt, &case.pred, case.conf.as_ref(), &case.cfg)?;
    let slow = oracle_record(&case.gt, &case.pred, case.conf.as_ref(), &case.cfg)?;
    Ok(record_differences(&fast, &slow, tol))
}
