//! Function pairs `(f, g)`, the orthogonality and cross-factorization
//! testers, and the built-in pairs.

use crate::qseries::{theta, Truncation};
use crate::report::{Residual, Tally, VerificationReport, Stopwatch};
use crate::sampling::{Sampler, POLE_DISTANCE};
use crate::{re, FgError, Result, Scalar, POLE_EPS};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

pub type PairFn = Arc<dyn Fn(Scalar, Scalar, &ParamEnv) -> Result<Scalar> + Send + Sync>;
/// Pole test `(x, y, env, distance)`: true when `(x, y)` lies within
/// `distance` of a singularity.
pub type PoleFn = Arc<dyn Fn(Scalar, Scalar, &ParamEnv, f64) -> bool + Send + Sync>;

/// Named scalar parameters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamEnv {
    pub bindings: BTreeMap<String, Scalar>,
}

impl ParamEnv {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(items: &[(&str, f64)]) -> Self {
        let mut e = Self::new();
        for &(k, v) in items {
            e.set(k, re(v));
        }
        e
    }

    pub fn set(&mut self, key: &str, v: Scalar) {
        self.bindings.insert(key.to_string(), v);
    }

    pub fn with(mut self, key: &str, v: Scalar) -> Self {
        self.set(key, v);
        self
    }

    pub fn get(&self, key: &str) -> Result<Scalar> {
        self.bindings.get(key).copied().ok_or_else(|| FgError::UnboundParam(key.to_string()))
    }

    /// Bindings of `self` overridden by those of `other`.
    pub fn merged(&self, other: &ParamEnv) -> ParamEnv {
        let mut out = self.clone();
        for (k, v) in &other.bindings {
            out.bindings.insert(k.clone(), *v);
        }
        out
    }
}

/// A pair of two-variable functions with metadata about what it claims.
#[derive(Clone)]
pub struct FunctionPair {
    pub name: String,
    pub f: PairFn,
    pub g: PairFn,
    pub param_names: Vec<String>,
    pub pole_predicate: PoleFn,
    pub claims_g_antisymmetric: bool,
    pub claims_f_self_orthogonal: bool,
    /// Default parameter bindings.
    pub defaults: ParamEnv,
    /// Residuals are limited by product truncation rather than rounding.
    pub truncation_limited: bool,
}

impl fmt::Debug for FunctionPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionPair")
            .field("name", &self.name)
            .field("param_names", &self.param_names)
            .field("defaults", &self.defaults)
            .finish()
    }
}

fn finite(v: Scalar, what: &str) -> Result<Scalar> {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(FgError::Pole(what.to_string()))
    }
}

impl FunctionPair {
    pub fn new<F, G>(name: &str, f: F, g: G) -> Self
    where
        F: Fn(Scalar, Scalar, &ParamEnv) -> Result<Scalar> + Send + Sync + 'static,
        G: Fn(Scalar, Scalar, &ParamEnv) -> Result<Scalar> + Send + Sync + 'static,
    {
        FunctionPair {
            name: name.to_string(),
            f: Arc::new(f),
            g: Arc::new(g),
            param_names: Vec::new(),
            pole_predicate: Arc::new(|_, _, _, _| false),
            claims_g_antisymmetric: false,
            claims_f_self_orthogonal: false,
            defaults: ParamEnv::new(),
            truncation_limited: false,
        }
    }

    pub fn params(mut self, defaults: &[(&str, f64)]) -> Self {
        self.param_names = defaults.iter().map(|(k, _)| k.to_string()).collect();
        self.defaults = ParamEnv::from_pairs(defaults);
        self
    }

    pub fn poles<P>(mut self, p: P) -> Self
    where
        P: Fn(Scalar, Scalar, &ParamEnv, f64) -> bool + Send + Sync + 'static,
    {
        self.pole_predicate = Arc::new(p);
        self
    }

    pub fn claims(mut self, g_antisymmetric: bool, f_self_orthogonal: bool) -> Self {
        self.claims_g_antisymmetric = g_antisymmetric;
        self.claims_f_self_orthogonal = f_self_orthogonal;
        self
    }

    pub fn renamed(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    /// Defaults overridden by `overrides`.
    pub fn env(&self, overrides: &ParamEnv) -> ParamEnv {
        self.defaults.merged(overrides)
    }

    /// Exact singularity test used before evaluation.
    pub fn is_pole(&self, x: Scalar, y: Scalar, env: &ParamEnv) -> bool {
        (self.pole_predicate)(x, y, env, POLE_EPS)
    }

    /// True when `(x, y)` is within `distance` of a singularity.
    pub fn near_pole(&self, x: Scalar, y: Scalar, env: &ParamEnv, distance: f64) -> bool {
        (self.pole_predicate)(x, y, env, distance)
    }

    pub fn eval_f(&self, x: Scalar, y: Scalar, env: &ParamEnv) -> Result<Scalar> {
        if self.is_pole(x, y, env) {
            return Err(FgError::Pole(format!("{}: f({x}, {y})", self.name)));
        }
        finite((self.f)(x, y, env)?, &self.name)
    }

    pub fn eval_g(&self, x: Scalar, y: Scalar, env: &ParamEnv) -> Result<Scalar> {
        if self.is_pole(x, y, env) {
            return Err(FgError::Pole(format!("{}: g({x}, {y})", self.name)));
        }
        finite((self.g)(x, y, env)?, &self.name)
    }
}

/// The three terms of `g(a,b)f(x,c) - g(a,c)f(x,b) + g(b,c)f(x,a)`.
pub fn orthogonality_terms(
    pair: &FunctionPair,
    env: &ParamEnv,
    a: Scalar,
    b: Scalar,
    c: Scalar,
    x: Scalar,
) -> Result<[Scalar; 3]> {
    Ok([
        pair.eval_g(a, b, env)? * pair.eval_f(x, c, env)?,
        -(pair.eval_g(a, c, env)? * pair.eval_f(x, b, env)?),
        pair.eval_g(b, c, env)? * pair.eval_f(x, a, env)?,
    ])
}

/// `g(a,b)f(x,c) - g(a,c)f(x,b) + g(b,c)f(x,a)`; zero when `f` is orthogonal to `g`.
pub fn orthogonality_residual(
    pair: &FunctionPair,
    env: &ParamEnv,
    a: Scalar,
    b: Scalar,
    c: Scalar,
    x: Scalar,
) -> Result<Scalar> {
    let t = orthogonality_terms(pair, env, a, b, c, x)?;
    Ok(t[0] + t[1] + t[2])
}

/// The three terms of `f(a,c)g(b,d) - g(b,c)f(a,d) - f(a,b)g(c,d)`.
pub fn cross_factorization_terms(
    pair: &FunctionPair,
    env: &ParamEnv,
    a: Scalar,
    b: Scalar,
    c: Scalar,
    d: Scalar,
) -> Result<[Scalar; 3]> {
    Ok([
        pair.eval_f(a, c, env)? * pair.eval_g(b, d, env)?,
        -(pair.eval_g(b, c, env)? * pair.eval_f(a, d, env)?),
        -(pair.eval_f(a, b, env)? * pair.eval_g(c, d, env)?),
    ])
}

/// `f(a,c)g(b,d) - g(b,c)f(a,d) - f(a,b)g(c,d)`.
pub fn cross_factorization_residual(
    pair: &FunctionPair,
    env: &ParamEnv,
    a: Scalar,
    b: Scalar,
    c: Scalar,
    d: Scalar,
) -> Result<Scalar> {
    let t = cross_factorization_terms(pair, env, a, b, c, d)?;
    Ok(t[0] + t[1] + t[2])
}

/// How parameter bindings are chosen for each sample.
#[derive(Debug, Clone)]
pub enum EnvSampler {
    /// Same bindings every time.
    Fixed(ParamEnv),
    /// Every binding redrawn per sample; `q` from the base band, the rest
    /// from the argument band.
    Random(ParamEnv),
}

impl EnvSampler {
    pub fn draw(&self, s: &mut Sampler) -> ParamEnv {
        match self {
            EnvSampler::Fixed(e) => e.clone(),
            EnvSampler::Random(e) => {
                let mut out = e.clone();
                for (k, v) in out.bindings.iter_mut() {
                    *v = if k == "q" { s.base() } else { s.arg() };
                }
                out
            }
        }
    }
}

struct PairSample {
    orth: Residual,
    self_orth: Option<Residual>,
    cross: Residual,
    anti: Option<Residual>,
}

fn one_sample(pair: &FunctionPair, env: &ParamEnv, s: &mut Sampler) -> Result<PairSample> {
    let (a, b, c, x, d) = (s.arg(), s.arg(), s.arg(), s.arg(), s.arg());
    let args = [a, b, c, x, d];
    for &u in &args {
        for &v in &args {
            if pair.near_pole(u, v, env, POLE_DISTANCE) {
                return Err(FgError::Pole(format!("{}: sample near ({u}, {v})", pair.name)));
            }
        }
    }
    let t = orthogonality_terms(pair, env, a, b, c, x)?;
    let orth = Residual::of_terms(t[0] + t[1] + t[2], &t);
    let self_orth = if pair.claims_f_self_orthogonal {
        let ff = FunctionPair { g: pair.f.clone(), ..pair.clone() };
        let t = orthogonality_terms(&ff, env, a, b, c, x)?;
        Some(Residual::of_terms(t[0] + t[1] + t[2], &t))
    } else {
        None
    };
    let t = cross_factorization_terms(pair, env, a, b, c, d)?;
    let cross = Residual::of_terms(t[0] + t[1] + t[2], &t);
    let anti = if pair.claims_g_antisymmetric {
        let u = pair.eval_g(a, b, env)?;
        let v = pair.eval_g(b, a, env)?;
        Some(Residual::of_terms(u + v, &[u, v]))
    } else {
        None
    };
    Ok(PairSample { orth, self_orth, cross, anti })
}

/// Samples argument tuples and checks orthogonality, cross-factorization
/// and (when claimed) antisymmetry and self-orthogonality. Samples landing
/// on a pole are redrawn; more than 90% rejections is a failure.
pub fn check_pair(
    pair: &FunctionPair,
    env_sampler: &EnvSampler,
    samples: u64,
    tol: f64,
    seed: u64,
) -> VerificationReport {
    let start = Stopwatch::start();
    let mut s = Sampler::new(seed);
    let mut tally = Tally::default();
    let mut kinds = [0.0f64; 4];
    let mut error: Option<String> = None;
    let max_rejections = samples.saturating_mul(9).max(9);
    while tally.samples < samples {
        let env = env_sampler.draw(&mut s);
        match one_sample(pair, &env, &mut s) {
            Ok(ps) => {
                tally.count();
                let parts = [Some(ps.orth), ps.self_orth, Some(ps.cross), ps.anti];
                for (slot, r) in kinds.iter_mut().zip(parts) {
                    if let Some(r) = r {
                        *slot = slot.max(r.rel());
                        tally.push(r);
                    }
                }
            }
            Err(FgError::Pole(_)) => {
                tally.rejections += 1;
                if tally.rejections > max_rejections {
                    error = Some("rejection rate above 90%".into());
                    break;
                }
            }
            Err(e) => {
                error = Some(e.to_string());
                break;
            }
        }
    }
    let detail = format!(
        "orth={:.2e} self={:.2e} cross={:.2e} anti={:.2e}{}",
        kinds[0],
        kinds[1],
        kinds[2],
        kinds[3],
        error.as_ref().map(|e| format!(" error: {e}")).unwrap_or_default()
    );
    let ms = start.ms();
    let mut rep = tally.into_report(&pair.name, tol, seed, ms, detail);
    if error.is_some() {
        rep.status = crate::report::Status::Fail;
    }
    rep
}

fn near_zero(z: Scalar, eps: f64) -> bool {
    z.norm() <= eps
}

/// `f = g = x - y`.
pub fn pair_s1() -> FunctionPair {
    FunctionPair::new("S1", |x, y, _| Ok(x - y), |x, y, _| Ok(x - y)).claims(true, true)
}

/// `f = g = (y - x)(1 - xy/d)`.
pub fn pair_s2() -> FunctionPair {
    let h = |x: Scalar, y: Scalar, e: &ParamEnv| Ok((y - x) * (1.0 - x * y / e.get("d")?));
    FunctionPair::new("S2", h, h).params(&[("d", 2.0)]).claims(true, true)
}

fn s3_like(x: Scalar, y: Scalar, e: &ParamEnv) -> Result<Scalar> {
    Ok((x - y) * (1.0 - e.get("b")? / (e.get("a")? * x * y)))
}

/// `f = g = (x - y)(1 - b/(a x y))`.
pub fn pair_s3() -> FunctionPair {
    FunctionPair::new("S3", s3_like, s3_like)
        .params(&[("a", 0.5), ("b", 0.25)])
        .poles(|x, y, _, eps| near_zero(x * y, eps))
        .claims(true, true)
}

/// `f = g = y theta(xy) theta(x/y)` with base `q`.
pub fn pair_s4(tr: Truncation) -> FunctionPair {
    let h = move |x: Scalar, y: Scalar, e: &ParamEnv| {
        let q = e.get("q")?;
        Ok(y * theta(x * y, q, tr)? * theta(x / y, q, tr)?)
    };
    let mut p = FunctionPair::new("S4", h, h)
        .params(&[("q", 0.3)])
        .poles(|x, y, _, eps| near_zero(x, eps) || near_zero(y, eps))
        .claims(true, true);
    p.truncation_limited = true;
    p
}

fn horner(coeffs: &[Scalar], x: Scalar) -> Scalar {
    coeffs.iter().rev().fold(Scalar::new(0.0, 0.0), |acc, &c| acc * x + c)
}

/// `f = P(x) + y Q(x)`, `g = x - y`, with coefficient lists in ascending degree.
pub fn pair_c1_with(p: Vec<Scalar>, q: Vec<Scalar>) -> FunctionPair {
    FunctionPair::new(
        "C1",
        move |x, y, _| Ok(horner(&p, x) + y * horner(&q, x)),
        |x, y, _| Ok(x - y),
    )
    .claims(true, false)
}

/// C1 with `P(x) = 1 + 2x`, `Q(x) = 3 - x`.
pub fn pair_c1() -> FunctionPair {
    pair_c1_with(vec![re(1.0), re(2.0)], vec![re(3.0), re(-1.0)])
}

/// `f = (1 - a x y)(1 - b x/y)`, `g = (x - y)(1 - b/(a x y))`.
pub fn pair_c2() -> FunctionPair {
    FunctionPair::new(
        "C2",
        |x, y, e| {
            let (a, b) = (e.get("a")?, e.get("b")?);
            Ok((1.0 - a * x * y) * (1.0 - b * x / y))
        },
        s3_like,
    )
    .params(&[("a", 0.5), ("b", 0.25)])
    .poles(|x, y, _, eps| near_zero(y, eps) || near_zero(x * y, eps))
    .claims(true, false)
}

/// `f = (x + y)(x + b/(a y))`, `g = (x - y)(1 - b/(a x y))`.
pub fn pair_c3() -> FunctionPair {
    FunctionPair::new(
        "C3",
        |x, y, e| {
            let (a, b) = (e.get("a")?, e.get("b")?);
            Ok((x + y) * (x + b / (a * y)))
        },
        s3_like,
    )
    .params(&[("a", 0.5), ("b", 0.25)])
    .poles(|x, y, _, eps| near_zero(y, eps) || near_zero(x * y, eps))
    .claims(true, false)
}

/// `f = x y^2`, `g = x - y`: not orthogonal, used as a negative control.
pub fn broken_pair() -> FunctionPair {
    FunctionPair::new("BROKEN", |x, y, _| Ok(x * y * y), |x, y, _| Ok(x - y)).claims(true, true)
}

/// The seven built-in pairs with default truncation.
pub fn builtin_pairs() -> Vec<FunctionPair> {
    builtin_pairs_with(Truncation::default())
}

pub fn builtin_pairs_with(tr: Truncation) -> Vec<FunctionPair> {
    vec![pair_s1(), pair_s2(), pair_s3(), pair_s4(tr), pair_c1(), pair_c2(), pair_c3()]
}

/// Look up a built-in pair (or the negative control) by name.
pub fn pair_by_name(name: &str, tr: Truncation) -> Result<FunctionPair> {
    if name == "BROKEN" {
        return Ok(broken_pair());
    }
    builtin_pairs_with(tr)
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| FgError::UnknownTarget(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn broken_pair_sample_is_minus_eight() {
        let p = broken_pair();
        let r = orthogonality_residual(&p, &ParamEnv::new(), re(1.0), re(2.0), re(3.0), re(4.0)).unwrap();
        assert_eq!(r, re(-8.0));
        let c = cross_factorization_residual(&p, &ParamEnv::new(), re(1.0), re(2.0), re(3.0), re(4.0)).unwrap();
        assert!(c.norm() > 1.0);
    }

    #[test]
    fn difference_pair_cross_hand_check() {
        let p = pair_s1();
        let c = cross_factorization_residual(&p, &ParamEnv::new(), re(1.0), re(2.0), re(3.0), re(4.0)).unwrap();
        assert_eq!(c, re(0.0));
    }

    #[test]
    fn seven_builtins() {
        let names: Vec<_> = builtin_pairs().into_iter().map(|p| p.name).collect();
        assert_eq!(names, ["S1", "S2", "S3", "S4", "C1", "C2", "C3"]);
    }

    #[test]
    fn pole_predicate_blocks_evaluation() {
        let p = pair_c3();
        let env = p.env(&ParamEnv::new());
        assert!(matches!(p.eval_f(re(1.0), re(0.0), &env), Err(FgError::Pole(_))));
    }

    #[test]
    fn unbound_parameter_is_reported() {
        let p = pair_s2();
        let r = p.eval_f(re(1.0), re(2.0), &ParamEnv::new());
        assert_eq!(r, Err(FgError::UnboundParam("d".into())));
    }

    #[test]
    fn c2_sample_is_orthogonal() {
        let p = pair_c2();
        let env = p.env(&ParamEnv::new());
        let mut s = Sampler::new(3);
        let r = orthogonality_residual(&p, &env, s.arg(), s.arg(), s.arg(), s.arg()).unwrap();
        assert!(r.norm() <= 1e-12);
    }

    #[test]
    fn check_pair_examples() {
        let env = |p: &FunctionPair| EnvSampler::Fixed(p.env(&ParamEnv::new()));
        let s1 = pair_s1();
        assert!(check_pair(&s1, &env(&s1), 1000, 1e-9, 1).passed());
        let c3 = pair_c3();
        assert!(check_pair(&c3, &env(&c3), 1000, 1e-9, 1).passed());
        let bad = broken_pair();
        let rep = check_pair(&bad, &env(&bad), 1000, 1e-9, 1);
        assert!(!rep.passed());
        assert!(rep.max_abs_residual >= 1.0);
    }

    #[test]
    fn all_poles_fails_by_rejection() {
        let p = pair_s1().poles(|_, _, _, _| true);
        let rep = check_pair(&p, &EnvSampler::Fixed(ParamEnv::new()), 10, 1e-9, 1);
        assert!(!rep.passed());
        assert!(rep.detail.contains("rejection"));
    }
}
