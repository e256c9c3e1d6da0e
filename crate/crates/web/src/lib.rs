//! Browser bindings for the demo page in `www/`.
//!
//! Every export takes and returns plain numbers or JSON strings so the same
//! functions run under `cargo test` on the host.

use fgsum::catalog::{catalog, entry_by_name};
use fgsum::pairs::ParamEnv;
use fgsum::qseries::{jacobi_triple_residual, theta, Truncation};
use fgsum::report::Residual;
use fgsum::runner::{registry, run_target, RunConfig, TargetKind};
use fgsum::summation::{lhs_sum, reference_check, rhs_products};
use fgsum::{re, Result, Scalar};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn or_error(r: Result<Value>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

fn cplx(z: Scalar) -> Value {
    json!([z.re, z.im])
}

/// Samples `theta(x; q)` on the circle `|x| = radius`.
/// Returns `points` rows of `[angle, re, im, triple-product residual]`, flattened.
#[wasm_bindgen]
pub fn theta_curve(q: f64, radius: f64, points: usize) -> Vec<f64> {
    let tr = Truncation::default();
    let q = re(q);
    let mut out = Vec::with_capacity(4 * points);
    for i in 0..points {
        let t = std::f64::consts::TAU * i as f64 / points.max(1) as f64;
        let x = Scalar::from_polar(radius, t);
        let v = theta(x, q, tr).unwrap_or(Scalar::new(f64::NAN, f64::NAN));
        let r = jacobi_triple_residual(x, q, tr).unwrap_or(f64::NAN);
        out.extend([t, v.re, v.im, r]);
    }
    out
}

/// Catalog entries with their pair and default parameters.
#[wasm_bindgen]
pub fn catalog_entries() -> String {
    let list: Vec<Value> = catalog()
        .iter()
        .map(|e| json!({ "name": e.name, "pair": e.pair, "summary": e.summary, "defaults": e.defaults }))
        .collect();
    Value::Array(list).to_string()
}

/// Summands, both sides and residuals of one catalog entry on `-n..=m`.
/// `overrides` is a JSON object of parameter values, e.g. `{"x": 1.4}`.
#[wasm_bindgen]
pub fn summation_table(name: &str, overrides: &str, m: i32, n: i32) -> String {
    or_error((|| {
        let e = entry_by_name(name)?;
        let mut env = ParamEnv::new();
        if !overrides.trim().is_empty() {
            let map: std::collections::BTreeMap<String, f64> = serde_json::from_str(overrides)
                .map_err(|err| fgsum::FgError::Config(format!("overrides: {err}")))?;
            for (k, v) in map {
                env.set(&k, re(v));
            }
        }
        let tr = Truncation::default();
        let inst = e.instance(&env, tr)?.with_range(m as i64, n as i64)?;
        let terms = inst.summands()?;
        let (lhs, rhs) = (lhs_sum(&inst)?, rhs_products(&inst)?);
        let display = reference_check(&inst, rhs)?.map(|r| json!({ "display": r.display.rel(), "link": r.link.rel() }));
        let tol = e.default_tol(tr);
        let main = Residual::between(lhs, rhs).rel();
        Ok(json!({
            "name": e.name,
            "ks": (-(n as i64)..=m as i64).collect::<Vec<_>>(),
            "terms": terms.iter().map(|t| cplx(*t)).collect::<Vec<_>>(),
            "lhs": cplx(lhs),
            "rhs": cplx(rhs),
            "residual": main,
            "reference": display,
            "tol": tol,
            "pass": main <= tol,
        }))
    })())
}

/// Pair-level targets: orthogonality, inversion and zero-sum checks.
#[wasm_bindgen]
pub fn pair_targets() -> String {
    let cfg = RunConfig { adversarial: true, ..RunConfig::default() };
    let names: Vec<String> = registry(&cfg)
        .into_iter()
        .filter(|t| matches!(t.kind, TargetKind::Pair(_) | TargetKind::Inversion(_) | TargetKind::ZeroSum(_)))
        .map(|t| t.name)
        .collect();
    json!(names).to_string()
}

/// Runs one pair-level target and returns its report.
#[wasm_bindgen]
pub fn run_pair_target(name: &str, samples: u32, seed: u32) -> String {
    let cfg = RunConfig { adversarial: true, samples: samples.max(1) as u64, seed: seed as u64, ..RunConfig::default() };
    or_error(run_target(name, &cfg).map(|r| serde_json::to_value(r).expect("report serializes")))
}
