//! Browser demo. Each export takes plain values and returns a JSON string;
//! the functions behind them are ordinary Rust and are tested natively.

use serde::Serialize;
use stepdown::{
    adjusted_pvalues, order_pvalues, parse_table, run_sharpness, Gamma, Method, ProcedureSpec, SharpnessSetup,
};
use wasm_bindgen::prelude::*;

/// Sharpness runs in the page are capped to keep it responsive.
pub const MAX_DEMO_REPLICATES: u64 = 200_000;

#[derive(Serialize)]
struct Series {
    method: Method,
    values: Vec<f64>,
}

#[derive(Serialize)]
struct Curves {
    s: usize,
    alpha: f64,
    series: Vec<Series>,
}

fn parse_gamma(gamma: &str) -> Result<Gamma, String> {
    gamma.parse().map_err(|e: stepdown::Error| e.to_string())
}

fn spec_for(method: Method, alpha: f64, k: usize, gamma: &str) -> Result<ProcedureSpec, String> {
    let mut spec = ProcedureSpec::new(method, alpha);
    if method.needs_k() {
        spec = spec.with_k(k);
    }
    if method.needs_gamma() {
        spec = spec.with_gamma(parse_gamma(gamma)?);
    }
    Ok(spec)
}

/// Critical values of Holm, the k-FWER stepdown, both FDP stepdowns and the
/// BH stepup thresholds for the same `s` and `alpha`.
pub fn constant_curves(s: usize, alpha: f64, k: usize, gamma: &str) -> Result<String, String> {
    let methods = [Method::Holm, Method::KfwerStepdown, Method::FdpStepdown, Method::FdpHommel, Method::Bh];
    let series = methods
        .into_iter()
        .map(|m| {
            let proc = spec_for(m, alpha, k, gamma)?.build(s).map_err(|e| e.to_string())?;
            Ok(Series { method: m, values: proc.thresholds().to_vec() })
        })
        .collect::<Result<Vec<_>, String>>()?;
    serde_json::to_string(&Curves { s, alpha, series }).map_err(|e| e.to_string())
}

/// Applies `method` to pasted `id,pvalue` text and returns the adjustment report.
pub fn adjust_table(text: &str, method: &str, alpha: f64, k: usize, gamma: &str) -> Result<String, String> {
    let method: Method = method.parse().map_err(|e: stepdown::Error| e.to_string())?;
    let pv = parse_table(text).map_err(|e| e.to_string())?;
    let report = adjusted_pvalues(&order_pvalues(&pv), &spec_for(method, alpha, k, gamma)?).map_err(|e| e.to_string())?;
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

/// Runs a sharpness check. `setup` is the JSON form of a construction, e.g.
/// `{"construction":"thm21","s":10,"k":3,"alpha":0.1}`.
pub fn sharpness_run(setup: &str, replicates: u64, seed: u64) -> Result<String, String> {
    let setup: SharpnessSetup = serde_json::from_str(setup).map_err(|e| format!("bad construction: {e}"))?;
    if replicates > MAX_DEMO_REPLICATES {
        return Err(format!("at most {MAX_DEMO_REPLICATES} replicates in the browser"));
    }
    let report = run_sharpness(&setup, replicates, seed, None).map_err(|e| e.to_string())?;
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn constants(s: usize, alpha: f64, k: usize, gamma: &str) -> Result<String, JsError> {
    constant_curves(s, alpha, k, gamma).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn adjust(text: &str, method: &str, alpha: f64, k: usize, gamma: &str) -> Result<String, JsError> {
    adjust_table(text, method, alpha, k, gamma).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn sharpness(setup: &str, replicates: u32, seed: u32) -> Result<String, JsError> {
    sharpness_run(setup, replicates.into(), seed.into()).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn curves_cover_every_method() {
        let v: Value = serde_json::from_str(&constant_curves(5, 0.05, 2, "0.1").unwrap()).unwrap();
        let series = v["series"].as_array().unwrap();
        assert_eq!(series.len(), 5);
        assert_eq!(series[1]["method"], "kfwer-sd");
        let kfwer: Vec<f64> = series[1]["values"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        assert_eq!(kfwer, [0.02, 0.02, 0.025, 1.0 / 30.0, 0.05]);
    }

    #[test]
    fn curves_reject_bad_parameters() {
        assert!(constant_curves(5, 0.05, 6, "0.1").is_err());
        assert!(constant_curves(5, 0.05, 2, "2").is_err());
        assert!(constant_curves(0, 0.05, 1, "0.1").is_err());
    }

    #[test]
    fn adjust_pasted_text() {
        let out = adjust_table("id,pvalue\na,0.001\nb,0.012\nc,0.021\nd,0.2\n", "holm", 0.05, 1, "").unwrap();
        let v: Value = serde_json::from_str(&out).unwrap();
        let flags: Vec<bool> = v["entries"].as_array().unwrap().iter().map(|e| e["rejected"].as_bool().unwrap()).collect();
        assert_eq!(flags, [true, true, true, false]);
    }

    #[test]
    fn adjust_reports_bad_input() {
        let err = adjust_table("id,pvalue\na,0.1\nb,2\n", "holm", 0.05, 1, "").unwrap_err();
        assert!(err.contains("line 3"), "{err}");
        assert!(adjust_table("id,pvalue\na,0.1\n", "nope", 0.05, 1, "").is_err());
        assert!(adjust_table("id,pvalue\na,0.1\n", "fdp-sd", 0.05, 1, "").is_err());
    }

    #[test]
    fn sharpness_from_json_setup() {
        let out = sharpness_run(r#"{"construction":"lemma31","t":2,"betas":[0.2]}"#, 20_000, 1).unwrap();
        let v: Value = serde_json::from_str(&out).unwrap();
        assert!((v["target"].as_f64().unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(v["pass"], true);
        assert!(sharpness_run(r#"{"construction":"lemma21","betas":[0.01,0.005],"u":0.05}"#, 10, 1).is_err());
        assert!(sharpness_run(r#"{"construction":"nope"}"#, 10, 1).is_err());
        assert!(sharpness_run(r#"{"construction":"thm21","s":10,"k":3,"alpha":0.1}"#, MAX_DEMO_REPLICATES + 1, 1).is_err());
    }
}
