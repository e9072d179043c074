//! Browser bindings. Each export takes a JSON request string and returns a
//! JSON result string so the page can drive everything through one form.

use attenuation::{EstimateSet, Method, Probability, StudyDesign};
use serde::Deserialize;
use serde_json::json;
use wasm_bindgen::prelude::wasm_bindgen;

#[derive(Deserialize)]
#[serde(untagged)]
enum SizesSpec {
    Same(u32),
    Each([u32; 3]),
}

#[derive(Deserialize)]
struct Request {
    method: String,
    r: [f64; 3],
    n: SizesSpec,
    #[serde(default)]
    k: Option<[u32; 2]>,
    #[serde(default)]
    reliabilities: bool,
    #[serde(default)]
    rho: f64,
    #[serde(default = "default_level")]
    level: f64,
    #[serde(default = "default_grid")]
    grid: usize,
}

fn default_level() -> f64 {
    0.95
}

fn default_grid() -> usize {
    200
}

struct Inputs {
    method: Method,
    est: EstimateSet,
    design: StudyDesign,
    level: Probability,
    rho: f64,
    grid: usize,
}

fn parse_request(request: &str) -> Result<Inputs, String> {
    let req: Request = serde_json::from_str(request).map_err(|e| format!("bad request: {e}"))?;
    let method: Method = req.method.parse()?;
    let [r1, mut rel2, mut rel3] = req.r;
    if req.reliabilities && !method.takes_reliabilities() {
        rel2 = rel2.sqrt();
        rel3 = rel3.sqrt();
    }
    if req.k.is_some() && method != Method::Cronbach {
        return Err("the k field applies only to the cronbach method".into());
    }
    let (n1, n2, n3) = match req.n {
        SizesSpec::Same(n) => (n, n, n),
        SizesSpec::Each([n1, n2, n3]) => (n1, n2, n3),
    };
    let design = match req.k {
        Some([k2, k3]) => StudyDesign::with_testlets(n1, n2, n3, k2, k3),
        None => StudyDesign::new(n1, n2, n3),
    };
    if !(req.level > 0.0 && req.level < 1.0) {
        return Err(format!(
            "level must lie strictly between 0 and 1, got {}",
            req.level
        ));
    }
    Ok(Inputs {
        method,
        est: EstimateSet::new(r1, rel2, rel3),
        design,
        level: Probability::new(req.level).expect("checked above"),
        rho: req.rho,
        grid: req.grid,
    })
}

/// p-value for the null that the corrected correlation equals `rho`.
#[wasm_bindgen]
pub fn pvalue(request: &str) -> Result<String, String> {
    let inp = parse_request(request)?;
    let result = attenuation::pvalue(inp.rho, &inp.est, &inp.design, inp.method)
        .map_err(|e| e.to_string())?;
    Ok(json!({ "p": result.p.value(), "rho": inp.rho }).to_string())
}

/// Confidence set at the requested level, as a list of [lo, hi] pieces.
#[wasm_bindgen]
pub fn confidence_set(request: &str) -> Result<String, String> {
    let inp = parse_request(request)?;
    let set = attenuation::confidence_set(&inp.est, &inp.design, inp.method, inp.level)
        .map_err(|e| e.to_string())?;
    let intervals: Vec<[f64; 2]> = set.endpoints.iter().map(|&(lo, hi)| [lo, hi]).collect();
    Ok(json!({
        "kind": set.kind.to_string(),
        "level": set.level.value(),
        "intervals": intervals,
    })
    .to_string())
}

/// Confidence curve 1 - p(rho) on a grid over [-1, 1], as parallel arrays.
#[wasm_bindgen]
pub fn confidence_curve(request: &str) -> Result<String, String> {
    let inp = parse_request(request)?;
    let curve = attenuation::confidence_curve(&inp.est, &inp.design, inp.method, inp.grid)
        .map_err(|e| e.to_string())?;
    Ok(json!({
        "rho": curve.grid,
        "cc": curve.cc,
        "level": inp.level.value(),
    })
    .to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn value(s: &str) -> serde_json::Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn pvalue_matches_reference_case() {
        let out = pvalue(
            r#"{"method": "corr", "r": [0.20, 0.6708203932499369, 0.7416198487095663],
                "n": 100, "rho": 0.0}"#,
        )
        .unwrap();
        let p = value(&out)["p"].as_f64().unwrap();
        assert!((p - 0.2628987).abs() < 1e-3, "p = {p}");
    }

    #[test]
    fn confidence_set_matches_reference_case() {
        let out = confidence_set(
            r#"{"method": "corr", "r": [0.20, 0.45, 0.55], "reliabilities": true, "n": 100}"#,
        )
        .unwrap();
        let v = value(&out);
        assert_eq!(v["kind"], "interval");
        assert_eq!(v["level"], 0.95);
        let iv = v["intervals"][0].as_array().unwrap();
        let lo = iv[0].as_f64().unwrap();
        let hi = iv[1].as_f64().unwrap();
        assert!((lo - -0.1647174).abs() < 1e-3, "lo = {lo}");
        assert!((hi - 0.9958587).abs() < 1e-3, "hi = {hi}");
    }

    #[test]
    fn confidence_set_reports_empty_sets() {
        let out =
            confidence_set(r#"{"method": "hs", "r": [-0.95, 0.81, 0.81], "n": 1000}"#).unwrap();
        let v = value(&out);
        assert_eq!(v["kind"], "empty");
        assert_eq!(v["intervals"].as_array().unwrap().len(), 0);
    }

    #[test]
    fn curve_honors_grid_and_stays_in_unit_range() {
        let out =
            confidence_curve(r#"{"method": "hs", "r": [0.52, 0.79, 0.79], "n": 85, "grid": 16}"#)
                .unwrap();
        let v = value(&out);
        let rho = v["rho"].as_array().unwrap();
        let cc = v["cc"].as_array().unwrap();
        assert_eq!(rho.len(), 16);
        assert_eq!(cc.len(), 16);
        for c in cc {
            let c = c.as_f64().unwrap();
            assert!((0.0..=1.0).contains(&c), "cc = {c}");
        }
        let first = rho[0].as_f64().unwrap();
        let last = rho[15].as_f64().unwrap();
        assert!(first < last);
        assert!((-1.0..=1.0).contains(&first) && (-1.0..=1.0).contains(&last));
    }

    #[test]
    fn reliability_inputs_match_explicit_roots() {
        let via_flag = confidence_set(
            r#"{"method": "corr", "r": [0.57, 0.56, 0.55], "reliabilities": true, "n": 488}"#,
        )
        .unwrap();
        let roots = format!(
            r#"{{"method": "corr", "r": [0.57, {}, {}], "n": 488}}"#,
            0.56f64.sqrt(),
            0.55f64.sqrt()
        );
        let explicit = confidence_set(&roots).unwrap();
        assert_eq!(via_flag, explicit);
    }

    #[test]
    fn cronbach_accepts_testlet_counts() {
        let out = confidence_set(
            r#"{"method": "cronbach", "r": [0.52, 0.79, 0.79], "n": [85, 2028, 711],
                "k": [6, 6], "level": 0.9}"#,
        )
        .unwrap();
        let v = value(&out);
        assert_eq!(v["kind"], "interval");
        let iv = v["intervals"][0].as_array().unwrap();
        assert!(iv[0].as_f64().unwrap() < iv[1].as_f64().unwrap());
    }

    #[test]
    fn errors_surface_as_messages() {
        let err = pvalue(r#"{"method": "robust", "r": [0.2, 0.5, 0.5], "n": 100}"#).unwrap_err();
        assert!(err.contains("unknown method"), "{err}");

        let err = pvalue("{not json").unwrap_err();
        assert!(err.contains("bad request"), "{err}");

        let err = pvalue(r#"{"method": "corr", "r": [0.2, 0.5, 0.5], "n": 100, "k": [4, 4]}"#)
            .unwrap_err();
        assert!(err.contains("cronbach"), "{err}");

        let err =
            confidence_set(r#"{"method": "corr", "r": [0.2, 0.5, 0.5], "n": 100, "level": 1.5}"#)
                .unwrap_err();
        assert!(err.contains("level"), "{err}");
    }
}
