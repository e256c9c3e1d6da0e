//! Verification registry and the list / verify / suite commands.
//!
//! Every target has its own default tolerance; an explicit `tol` in the
//! configuration replaces all of them.

use crate::catalog::{adversarial_entry, catalog, entry_by_name, CatalogEntry};
use crate::inversion::{
    bilateral_h, bilateral_h_direct, build_f, build_g, schlosser_product, three_term_theta_quoted_residual,
    three_term_theta_residual, verify_bilateral_inverse, verify_inverse, zero_sum_terms, IndexedSequence, SchlosserParams,
};
use crate::laurent::{
    builtin_series, construct_orthogonal_to, construct_self_orthogonal, eval_series, scan_cross_orth, scan_pivot,
    scan_self_orth, series_pair, theta_pair_series, UnivariateSeries, EXHAUSTIVE_WINDOW,
};
use crate::pairs::{check_pair, orthogonality_terms, pair_by_name, EnvSampler, FunctionPair, ParamEnv};
use crate::qseries::{jacobi_triple_residual, theta, Truncation};
use crate::report::{Residual, Status, Stopwatch, Tally, VerificationReport};
use crate::sampling::{derive_seed, Sampler, POLE_DISTANCE};
use crate::{FgError, Result, Scalar};
use serde_json::json;
use std::collections::BTreeMap;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_SAMPLES: u64 = 1000;
pub const DEFAULT_WINDOW: usize = 12;
/// Random sequence draws per inversion target.
pub const INVERSION_DRAWS: u64 = 10;
/// Cut-off of the truncated Schlosser products.
pub const SCHLOSSER_K: i64 = 25;
/// Outermost Schlosser terms must be below this fraction of the tolerance.
pub const SCHLOSSER_GATE: f64 = 0.1;
/// `|n|, |m|` range of the bilateral checks.
pub const BILATERAL_RANGE: i64 = 3;
pub const TRANSFORM_SAMPLES: u64 = 50;
pub const THETA_SAMPLES: u64 = 100;
/// Window of the theta-pair series comparison.
pub const THETA_SERIES_WINDOW: usize = 12;

const PAIR_NAMES: [&str; 7] = ["S1", "S2", "S3", "S4", "C1", "C2", "C3"];

/// Run configuration shared by all commands.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub samples: u64,
    /// Replaces every per-target default tolerance when set.
    pub tol: Option<f64>,
    pub truncation: Truncation,
    /// Side length of the inversion matrices.
    pub window: usize,
    /// Parameter overrides keyed `pair.<name>.<p>`, `catalog.<name>.<p>` or `schlosser.<p>`.
    pub overrides: BTreeMap<String, Scalar>,
    /// Also register the non-orthogonal negative control.
    pub adversarial: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: DEFAULT_SEED,
            samples: DEFAULT_SAMPLES,
            tol: None,
            truncation: Truncation::default(),
            window: DEFAULT_WINDOW,
            overrides: BTreeMap::new(),
            adversarial: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.truncation.validate()?;
        if self.samples == 0 || self.window == 0 {
            return Err(FgError::Config("samples and window must be positive".into()));
        }
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                return Err(FgError::Config(format!("tolerance must be positive, got {t}")));
            }
        }
        for key in self.overrides.keys() {
            let parts: Vec<&str> = key.split('.').collect();
            let ok = match parts.as_slice() {
                ["pair", name, _] => PAIR_NAMES.contains(name) || *name == "BROKEN",
                ["catalog", name, p] => entry_by_name(name).map(|e| e.defaults.iter().any(|(k, _)| k == p)).unwrap_or(false),
                ["schlosser", p] => matches!(*p, "a" | "b" | "c" | "q"),
                _ => false,
            };
            if !ok {
                return Err(FgError::Config(format!("unknown override key {key}")));
            }
        }
        Ok(())
    }

    fn tol_or(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }

    fn truncation_budget(&self) -> f64 {
        100.0 * self.truncation.tail_tol
    }

    /// Overrides under `prefix.`, with the prefix stripped.
    fn scoped(&self, prefix: &str) -> ParamEnv {
        let mut env = ParamEnv::new();
        let head = format!("{prefix}.");
        for (k, v) in &self.overrides {
            if let Some(rest) = k.strip_prefix(&head) {
                env.set(rest, *v);
            }
        }
        env
    }

    /// Applies one `key=value` setting, as used by config files and `--set`.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| FgError::Config(format!("bad value for {key}: {what}"));
        match key {
            "seed" => self.seed = value.parse().map_err(|_| bad(value))?,
            "samples" => self.samples = value.parse().map_err(|_| bad(value))?,
            "tol" => self.tol = Some(value.parse().map_err(|_| bad(value))?),
            "trunc-products" | "trunc_products" => self.truncation.product_terms = value.parse().map_err(|_| bad(value))?,
            "trunc-series" | "trunc_series" => self.truncation.series_terms = value.parse().map_err(|_| bad(value))?,
            "tail-tol" | "tail_tol" => self.truncation.tail_tol = value.parse().map_err(|_| bad(value))?,
            "window" => self.window = value.parse().map_err(|_| bad(value))?,
            "adversarial" => self.adversarial = value.parse().map_err(|_| bad(value))?,
            _ if key.contains('.') => {
                self.overrides.insert(key.to_string(), parse_scalar(value)?);
            }
            _ => return Err(FgError::Config(format!("unknown setting {key}"))),
        }
        Ok(())
    }

    /// Reads a `key = value` file; blank lines and `#` comments are skipped.
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| FgError::Config(format!("line {}: expected key=value", no + 1)))?;
            self.apply(k.trim(), v.trim())?;
        }
        Ok(())
    }
}

/// `"re"` or `"re,im"`.
pub fn parse_scalar(s: &str) -> Result<Scalar> {
    let bad = || FgError::Config(format!("not a scalar: {s}"));
    let mut it = s.split(',').map(str::trim);
    let re_part: f64 = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    let im_part: f64 = match it.next() {
        Some(t) => t.parse().map_err(|_| bad())?,
        None => 0.0,
    };
    if it.next().is_some() {
        return Err(bad());
    }
    Ok(Scalar::new(re_part, im_part))
}

/// What a registered name runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetKind {
    Pair(String),
    Inversion(String),
    ZeroSum(String),
    Catalog(String),
    Schlosser,
    BilateralH,
    BilateralInversion,
    ThreeTermTheta,
    JacobiTriple,
    ThetaSymmetry,
    SeriesSelfOrthogonal,
    SeriesOrthogonalTo,
    SeriesBuiltin,
    SeriesTheta,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Target {
    pub name: String,
    pub kind: TargetKind,
    pub summary: String,
}

fn pair_summary(name: &str) -> &'static str {
    match name {
        "S1" => "f = g = x - y",
        "S2" => "f = g = (y - x)(1 - xy/d)",
        "S3" => "f = g = (x - y)(1 - b/(axy))",
        "S4" => "f = g = y theta(xy) theta(x/y)",
        "C1" => "f = P(x) + y Q(x), g = x - y",
        "C2" => "f = (1 - axy)(1 - bx/y), g = (x - y)(1 - b/(axy))",
        "C3" => "f = (x + y)(x + b/(ay)), g = (x - y)(1 - b/(axy))",
        "BROKEN" => "f = x y^2, g = x - y (negative control)",
        _ => "",
    }
}

/// All registered targets, sorted by name.
pub fn registry(cfg: &RunConfig) -> Vec<Target> {
    let mut out = Vec::new();
    let t = |name: String, kind: TargetKind, summary: String| Target { name, kind, summary };
    let mut pairs: Vec<&str> = PAIR_NAMES.to_vec();
    if cfg.adversarial {
        pairs.push("BROKEN");
    }
    for p in pairs {
        out.push(t(p.into(), TargetKind::Pair(p.into()), format!("pair: {}", pair_summary(p))));
        out.push(t(format!("inversion.{p}"), TargetKind::Inversion(p.into()), format!("triangular (f,g)-inverse pair for {p}")));
        out.push(t(format!("zero_sum.{p}"), TargetKind::ZeroSum(p.into()), format!("vanishing two-anchor sum for {p}")));
    }
    let mut entries = catalog();
    if cfg.adversarial {
        entries.push(adversarial_entry());
    }
    for e in entries {
        out.push(t(e.name.into(), TargetKind::Catalog(e.name.into()), format!("summation ({}): {}", e.pair, e.summary)));
    }
    out.push(t("schlosser".into(), TargetKind::Schlosser, "bilateral inversion: truncated A B = I".into()));
    out.push(t("bilateral_h".into(), TargetKind::BilateralH, "h(M) limit against its closed form".into()));
    out.push(t("bilateral_inversion".into(), TargetKind::BilateralInversion, "bilateral F G = I from an orthogonal pair".into()));
    out.push(t("three_term_theta".into(), TargetKind::ThreeTermTheta, "three-term theta transformation".into()));
    out.push(t("jacobi_triple".into(), TargetKind::JacobiTriple, "Jacobi triple product".into()));
    out.push(t("theta_symmetry".into(), TargetKind::ThetaSymmetry, "theta(q/x) = theta(x), theta(1/x) = -theta(x)/x".into()));
    out.push(t("series.self_orthogonal".into(), TargetKind::SeriesSelfOrthogonal, "p_i q_j - p_j q_i is self-orthogonal".into()));
    out.push(t("series.orthogonal_to".into(), TargetKind::SeriesOrthogonalTo, "pivot construction of f orthogonal to g".into()));
    out.push(t("series.builtin".into(), TargetKind::SeriesBuiltin, "coefficient criteria of the polynomial pairs".into()));
    out.push(t("series.theta_pair".into(), TargetKind::SeriesTheta, "Laurent series of y theta(xy) theta(x/y)".into()));
    out.sort_by(|a, b| a.name.cmp(&b.name));
    out
}

/// Text listing of all targets.
pub fn list_text(cfg: &RunConfig) -> String {
    registry(cfg).iter().map(|t| format!("{:<26} {}\n", t.name, t.summary)).collect()
}

/// Runs one named target.
pub fn run_target(name: &str, cfg: &RunConfig) -> Result<VerificationReport> {
    cfg.validate()?;
    let target = registry(cfg)
        .into_iter()
        .find(|t| t.name == name)
        .ok_or_else(|| FgError::UnknownTarget(name.to_string()))?;
    let seed = derive_seed(cfg.seed, name);
    let mut rep = match &target.kind {
        TargetKind::Pair(p) => run_pair(p, cfg, seed)?,
        TargetKind::Inversion(p) => run_inversion(p, cfg, seed)?,
        TargetKind::ZeroSum(p) => run_zero_sum(p, cfg, seed)?,
        TargetKind::Catalog(c) => run_catalog(c, cfg)?,
        TargetKind::Schlosser => run_schlosser(cfg)?,
        TargetKind::BilateralH => run_bilateral_h(cfg)?,
        TargetKind::BilateralInversion => run_bilateral_inversion(cfg)?,
        TargetKind::ThreeTermTheta => run_three_term(cfg, seed),
        TargetKind::JacobiTriple => run_jacobi(cfg, seed),
        TargetKind::ThetaSymmetry => run_theta_symmetry(cfg, seed),
        TargetKind::SeriesSelfOrthogonal => run_series_self(cfg, seed),
        TargetKind::SeriesOrthogonalTo => run_series_orthogonal_to(cfg, seed),
        TargetKind::SeriesBuiltin => run_series_builtin(cfg, seed),
        TargetKind::SeriesTheta => run_series_theta(cfg, seed),
    };
    rep.name = name.to_string();
    rep.seed = cfg.seed;
    Ok(rep)
}

/// Runs every registered target in name order.
pub fn run_suite(cfg: &RunConfig) -> Result<Vec<VerificationReport>> {
    cfg.validate()?;
    registry(cfg).iter().map(|t| run_target(&t.name, cfg)).collect()
}

/// `{"schema": 1, "reports": [...]}`.
pub fn suite_json(reports: &[VerificationReport]) -> String {
    let v = json!({ "schema": 1, "reports": reports });
    serde_json::to_string_pretty(&v).expect("reports serialize")
}

pub fn suite_text(reports: &[VerificationReport]) -> String {
    let mut s: String = reports.iter().map(|r| r.to_line() + "\n").collect();
    let failed = reports.iter().filter(|r| !r.passed()).count();
    s.push_str(&format!("{} targets, {} failed\n", reports.len(), failed));
    s
}

fn finish(mut tally: Tally, tol: f64, start: Stopwatch, detail: String, error: Option<String>) -> VerificationReport {
    let ms = start.ms();
    match error {
        None => tally.into_report("", tol, 0, ms, detail),
        Some(e) => {
            tally.poisoned |= tally.samples == 0;
            let mut rep = tally.into_report("", tol, 0, ms, format!("{detail} error: {e}"));
            rep.status = Status::Fail;
            rep
        }
    }
}

fn lookup_pair(name: &str, cfg: &RunConfig) -> Result<FunctionPair> {
    pair_by_name(name, cfg.truncation)
}

fn pair_default_tol(pair: &FunctionPair, cfg: &RunConfig) -> f64 {
    if pair.truncation_limited {
        cfg.tol_or(cfg.truncation_budget())
    } else {
        cfg.tol_or(1e-9)
    }
}

fn run_pair(name: &str, cfg: &RunConfig, seed: u64) -> Result<VerificationReport> {
    let pair = lookup_pair(name, cfg)?;
    let over = cfg.scoped(&format!("pair.{name}"));
    let sampler = if over.bindings.is_empty() && !pair.defaults.bindings.is_empty() {
        EnvSampler::Random(pair.defaults.clone())
    } else {
        EnvSampler::Fixed(pair.env(&over))
    };
    Ok(check_pair(&pair, &sampler, cfg.samples, pair_default_tol(&pair, cfg), seed))
}

fn random_env(pair: &FunctionPair, cfg: &RunConfig, s: &mut Sampler) -> ParamEnv {
    let over = cfg.scoped(&format!("pair.{}", pair.name));
    if over.bindings.is_empty() {
        EnvSampler::Random(pair.defaults.clone()).draw(s)
    } else {
        pair.env(&over)
    }
}

/// Random node sequences on `0..len` keeping every `g(b_i, b_k)`, `i != k`,
/// and every `f(x_i, b_k)` away from poles.
fn draw_nodes(pair: &FunctionPair, env: &ParamEnv, len: usize, s: &mut Sampler) -> Option<(IndexedSequence, IndexedSequence)> {
    let xs: Vec<Scalar> = (0..len).map(|_| s.arg()).collect();
    let bs: Vec<Scalar> = (0..len).map(|_| s.arg()).collect();
    for (i, &bi) in bs.iter().enumerate() {
        for (k, &bk) in bs.iter().enumerate() {
            if pair.near_pole(bi, bk, env, POLE_DISTANCE) || pair.near_pole(xs[i], bk, env, POLE_DISTANCE) {
                return None;
            }
            if i != k && (pair.eval_g(bi, bk, env).ok()?.norm() < POLE_DISTANCE) {
                return None;
            }
        }
        if pair.eval_f(xs[i], bi, env).ok()?.norm() < POLE_DISTANCE {
            return None;
        }
    }
    Some((IndexedSequence::table(0, xs), IndexedSequence::table(0, bs)))
}

fn run_inversion(name: &str, cfg: &RunConfig, seed: u64) -> Result<VerificationReport> {
    let pair = lookup_pair(name, cfg)?;
    let tol = cfg.tol_or(1e-7);
    let start = Stopwatch::start();
    let mut s = Sampler::new(seed);
    let mut tally = Tally::default();
    let mut worst_detail = String::new();
    let mut worst = -1.0;
    let mut error = None;
    let w = cfg.window as i64;
    let mut draws = 0;
    while draws < INVERSION_DRAWS {
        let env = random_env(&pair, cfg, &mut s);
        let Some((xs, bs)) = draw_nodes(&pair, &env, cfg.window, &mut s) else {
            tally.rejections += 1;
            if tally.rejections > 9 * INVERSION_DRAWS {
                error = Some("rejection rate above 90%".to_string());
                break;
            }
            continue;
        };
        draws += 1;
        let built = build_f(&pair, &env, &xs, &bs, (0, w - 1), (0, w - 1))
            .and_then(|f| Ok((f, build_g(&pair, &env, &xs, &bs, (0, w - 1), (0, w - 1))?)));
        match built {
            Ok((f, g)) => {
                let rep = verify_inverse(&f, &g, tol);
                tally.push(Residual { abs: rep.max_abs_residual, scale: rep.max_abs_residual / rep.max_rel_residual.max(f64::MIN_POSITIVE) });
                tally.samples += rep.samples_run;
                if rep.max_rel_residual > worst {
                    worst = rep.max_rel_residual;
                    worst_detail = rep.detail;
                }
            }
            Err(e) => {
                error = Some(e.to_string());
                break;
            }
        }
    }
    let detail = format!("{draws} draws of {w}x{w}; worst {worst_detail}");
    Ok(finish(tally, tol, start, detail, error))
}

fn run_zero_sum(name: &str, cfg: &RunConfig, seed: u64) -> Result<VerificationReport> {
    let pair = lookup_pair(name, cfg)?;
    let tol = pair_default_tol(&pair, cfg);
    let start = Stopwatch::start();
    let mut s = Sampler::new(seed);
    let mut tally = Tally::default();
    let mut error = None;
    let mut draws = 0;
    while draws < INVERSION_DRAWS {
        let env = random_env(&pair, cfg, &mut s);
        // nodes on -3..=3, shifted into table coordinates
        let Some((xs, bs)) = draw_nodes(&pair, &env, 7, &mut s) else {
            tally.rejections += 1;
            if tally.rejections > 9 * INVERSION_DRAWS {
                error = Some("rejection rate above 90%".to_string());
                break;
            }
            continue;
        };
        draws += 1;
        let (xs, bs) = (xs.shifted(3), bs.shifted(3));
        for m in 0..=3 {
            for n in 1..=3 {
                match zero_sum_terms(&pair, &env, &xs, &bs, m, n) {
                    Ok(t) => {
                        tally.push(Residual::of_terms(t.iter().sum(), &t));
                        tally.count();
                    }
                    Err(FgError::Pole(_)) => tally.rejections += 1,
                    Err(e) => error = Some(e.to_string()),
                }
            }
        }
    }
    Ok(finish(tally, tol, start, format!("{draws} draws, m in 0..=3, n in 1..=3"), error))
}

fn run_catalog(name: &str, cfg: &RunConfig) -> Result<VerificationReport> {
    let e: CatalogEntry = if name == "broken_summation" { adversarial_entry() } else { entry_by_name(name)? };
    let over = cfg.scoped(&format!("catalog.{name}"));
    let tol = cfg.tol_or(e.default_tol(cfg.truncation));
    Ok(crate::catalog::verify_entry(&e, &over, cfg.truncation, tol))
}

fn schlosser_params(cfg: &RunConfig) -> SchlosserParams {
    let over = cfg.scoped("schlosser");
    let d = SchlosserParams::default();
    let g = |k: &str, v: Scalar| over.get(k).unwrap_or(v);
    SchlosserParams { a: g("a", d.a), b: g("b", d.b), c: g("c", d.c), q: g("q", d.q) }
}

fn run_schlosser(cfg: &RunConfig) -> Result<VerificationReport> {
    let sp = schlosser_params(cfg);
    let tol = cfg.tol_or(1e-6);
    let start = Stopwatch::start();
    let mut tally = Tally::default();
    let mut edge_max = 0.0f64;
    let mut error = None;
    for n in -BILATERAL_RANGE..=BILATERAL_RANGE {
        for m in -BILATERAL_RANGE..=BILATERAL_RANGE {
            match schlosser_product(&sp, n, m, SCHLOSSER_K, cfg.truncation) {
                Ok((sum, edge)) => {
                    edge_max = edge_max.max(edge);
                    let delta = if n == m { 1.0 } else { 0.0 };
                    // absolute deviation from the identity matrix
                    tally.push(Residual { abs: (sum - delta).norm(), scale: 1.0 });
                    tally.count();
                }
                Err(e) => error = Some(e.to_string()),
            }
        }
    }
    // the outermost terms must sit well below the tolerance
    let gate = edge_max <= SCHLOSSER_GATE * tol;
    let detail = format!("K = {SCHLOSSER_K}, edge terms {edge_max:.1e} (gate {})", if gate { "met" } else { "missed" });
    let mut rep = finish(tally, tol, start, detail, error);
    if !gate {
        rep.status = Status::Fail;
    }
    Ok(rep)
}

fn run_bilateral_h(cfg: &RunConfig) -> Result<VerificationReport> {
    let sp = schlosser_params(cfg);
    let setup = sp.setup();
    let tol = cfg.tol_or(1e-6);
    let tr = cfg.truncation;
    let start = Stopwatch::start();
    let mut tally = Tally::default();
    let mut direct_max = 0.0f64;
    let mut quoted_max = 0.0f64;
    let mut error = None;
    for m in -BILATERAL_RANGE..=BILATERAL_RANGE {
        let step = (|| -> Result<()> {
            let limit = bilateral_h(&setup, m, tr)?;
            let closed = sp.h_closed_form(m, tr)?;
            tally.push(Residual::between(limit.value, closed));
            tally.count();
            let direct = bilateral_h_direct(&setup, m, tr)?;
            let r = Residual::between(direct, closed);
            direct_max = direct_max.max(r.rel());
            tally.push(r);
            quoted_max = quoted_max.max(Residual::between(sp.h_quoted_form(m, tr)?, closed).rel());
            Ok(())
        })();
        if let Err(e) = step {
            error = Some(e.to_string());
        }
    }
    let detail = format!("direct sum {direct_max:.2e}; commonly quoted form off by {quoted_max:.2e}");
    Ok(finish(tally, tol, start, detail, error))
}

fn run_bilateral_inversion(cfg: &RunConfig) -> Result<VerificationReport> {
    let setup = schlosser_params(cfg).setup();
    let tol = cfg.tol_or(1e-6);
    match verify_bilateral_inverse(&setup, BILATERAL_RANGE, cfg.truncation, tol) {
        Ok(r) => Ok(r),
        Err(e) => Ok(finish(Tally::default(), tol, Stopwatch::start(), String::new(), Some(e.to_string()))),
    }
}

fn run_three_term(cfg: &RunConfig, seed: u64) -> VerificationReport {
    let tol = cfg.tol_or(1e-9);
    let start = Stopwatch::start();
    let mut s = Sampler::new(seed);
    let mut tally = Tally::default();
    let mut quoted = 0.0f64;
    let mut error = None;
    while tally.samples < TRANSFORM_SAMPLES {
        let (a, b, c, d, q) = (s.arg(), s.arg(), s.arg(), s.arg(), s.base());
        match three_term_theta_residual(a, b, c, d, q, cfg.truncation) {
            Ok(r) if r.is_finite() => {
                tally.push(Residual { abs: r, scale: 1.0 });
                tally.count();
                if let Ok(qr) = three_term_theta_quoted_residual(a, b, c, d, q, cfg.truncation) {
                    quoted = quoted.max(qr);
                }
            }
            Ok(_) | Err(FgError::Pole(_)) => tally.rejections += 1,
            Err(e) => {
                error = Some(e.to_string());
                break;
            }
        }
    }
    finish(tally, tol, start, format!("commonly quoted form off by {quoted:.2e}"), error)
}

fn run_jacobi(cfg: &RunConfig, seed: u64) -> VerificationReport {
    let tol = cfg.tol_or(1e-10);
    let start = Stopwatch::start();
    let mut s = Sampler::new(seed);
    let mut tally = Tally::default();
    let mut error = None;
    for _ in 0..THETA_SAMPLES {
        let (x, q) = (s.arg(), s.base());
        match jacobi_triple_residual(x, q, cfg.truncation) {
            Ok(r) => {
                tally.push(Residual { abs: r, scale: 1.0 });
                tally.count();
            }
            Err(e) => {
                error = Some(e.to_string());
                break;
            }
        }
    }
    finish(tally, tol, start, "absolute residual".into(), error)
}

fn run_theta_symmetry(cfg: &RunConfig, seed: u64) -> VerificationReport {
    let tol = cfg.tol_or(1e-12);
    let tr = cfg.truncation;
    let start = Stopwatch::start();
    let mut s = Sampler::new(seed);
    let mut tally = Tally::default();
    let mut error = None;
    for _ in 0..THETA_SAMPLES {
        let (x, q) = (s.arg(), s.base());
        let step = (|| -> Result<()> {
            let t = theta(x, q, tr)?;
            tally.push(Residual::between(theta(q / x, q, tr)?, t));
            tally.push(Residual::between(theta(x.inv(), q, tr)?, -t / x));
            tally.count();
            Ok(())
        })();
        if let Err(e) = step {
            error = Some(e.to_string());
            break;
        }
    }
    finish(tally, tol, start, String::new(), error)
}

fn random_univariate(window: usize, s: &mut Sampler) -> UnivariateSeries {
    let w = window as i64;
    let mut u = UnivariateSeries::zeros(window);
    for i in -w..=w {
        u.set(i, Scalar::new(s.real_signed(0.1, 1.0), s.real_signed(0.1, 1.0))).expect("inside window");
    }
    u
}

fn run_series_self(cfg: &RunConfig, seed: u64) -> VerificationReport {
    let tol = cfg.tol_or(1e-12);
    let start = Stopwatch::start();
    let mut s = Sampler::new(seed);
    let mut tally = Tally::default();
    let mut error = None;
    for _ in 0..3 {
        let (p, q) = (random_univariate(EXHAUSTIVE_WINDOW, &mut s), random_univariate(EXHAUSTIVE_WINDOW, &mut s));
        let lam = construct_self_orthogonal(&p, &q);
        match scan_self_orth(&lam, seed) {
            Ok(r) => {
                tally.push(Residual { abs: r.max_abs, scale: r.max_abs / r.max_rel.max(f64::MIN_POSITIVE) });
                tally.samples += r.quadruples;
            }
            Err(e) => error = Some(e.to_string()),
        }
    }
    finish(tally, tol, start, format!("window {EXHAUSTIVE_WINDOW}, exhaustive"), error)
}

fn scan_residual(r: crate::laurent::ScanResult) -> Residual {
    Residual { abs: r.max_abs, scale: if r.max_rel > 0.0 { r.max_abs / r.max_rel } else { 1.0 } }
}

fn run_series_orthogonal_to(cfg: &RunConfig, seed: u64) -> VerificationReport {
    let tol = cfg.tol_or(1e-12);
    let start = Stopwatch::start();
    let mut s = Sampler::new(seed);
    let mut tally = Tally::default();
    let mut pointwise = 0.0f64;
    let mut error = None;
    let w = EXHAUSTIVE_WINDOW;
    let step = (|| -> Result<()> {
        let series = builtin_series(w, Scalar::new(2.0, 0.0), Scalar::new(0.5, 0.0), Scalar::new(0.25, 0.0))?;
        for (name, _, g) in series {
            let pivot = g.nonzero_pivots()[0];
            let (p, q) = (random_univariate(w, &mut s), random_univariate(w, &mut s));
            let f = construct_orthogonal_to(&g, &p, &q, pivot)?;
            let r = scan_cross_orth(&g, &f, seed)?;
            tally.push(scan_residual(r));
            tally.samples += r.quadruples;
            // pointwise orthogonality of the constructed pair, |x| near 1
            let pair = series_pair(&name, f, g);
            let env = ParamEnv::new();
            for _ in 0..100 {
                let mut pt = || s.annulus(0.8, 1.25);
                let (a, b, c, x) = (pt(), pt(), pt(), pt());
                let t = orthogonality_terms(&pair, &env, a, b, c, x)?;
                let r = Residual::of_terms(t[0] + t[1] + t[2], &t);
                pointwise = pointwise.max(r.rel());
                tally.push(r);
            }
        }
        Ok(())
    })();
    if let Err(e) = step {
        error = Some(e.to_string());
    }
    finish(tally, tol, start, format!("window {w}; pointwise {pointwise:.2e}"), error)
}

fn run_series_builtin(cfg: &RunConfig, seed: u64) -> VerificationReport {
    let tol = cfg.tol_or(1e-12);
    let start = Stopwatch::start();
    let mut tally = Tally::default();
    let mut error = None;
    let mut pivots = 0;
    let step = (|| -> Result<()> {
        let series = builtin_series(EXHAUSTIVE_WINDOW, Scalar::new(2.0, 0.0), Scalar::new(0.5, 0.0), Scalar::new(0.25, 0.0))?;
        for (_, f, g) in series {
            let cross = scan_cross_orth(&g, &f, seed)?;
            tally.push(scan_residual(cross));
            tally.samples += cross.quadruples;
            // f orthogonal to g forces g self-orthogonal at each pivot
            if !f.is_zero() && cross.max_rel <= tol {
                for p in g.nonzero_pivots() {
                    tally.push(scan_residual(scan_pivot(&g, p)?));
                    pivots += 1;
                }
            }
        }
        Ok(())
    })();
    if let Err(e) = step {
        error = Some(e.to_string());
    }
    finish(tally, tol, start, format!("{pivots} pivots checked"), error)
}

fn run_series_theta(cfg: &RunConfig, seed: u64) -> VerificationReport {
    let tol = cfg.tol_or(1e-8);
    let tr = cfg.truncation;
    let start = Stopwatch::start();
    let mut s = Sampler::new(seed);
    let mut tally = Tally::default();
    let mut error = None;
    let q = Scalar::new(0.3, 0.0);
    let step = (|| -> Result<()> {
        let series = theta_pair_series(q, THETA_SERIES_WINDOW, tr)?;
        for _ in 0..THETA_SAMPLES {
            let (x, y) = (s.annulus(0.8, 1.25), s.annulus(0.8, 1.25));
            let direct = y * theta(x * y, q, tr)? * theta(x / y, q, tr)?;
            tally.push(Residual::between(eval_series(&series, x, y)?, direct));
            tally.count();
        }
        Ok(())
    })();
    if let Err(e) = step {
        error = Some(e.to_string());
    }
    finish(tally, tol, start, format!("q = 0.3, window {THETA_SERIES_WINDOW}"), error)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_sorted_and_complete() {
        let cfg = RunConfig::default();
        let reg = registry(&cfg);
        let names: Vec<_> = reg.iter().map(|t| t.name.clone()).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
        assert_eq!(reg.iter().filter(|t| matches!(t.kind, TargetKind::Pair(_))).count(), 7);
        assert_eq!(reg.iter().filter(|t| matches!(t.kind, TargetKind::Catalog(_))).count(), 17);
        assert!(!names.contains(&"BROKEN".to_string()));
        let adv = RunConfig { adversarial: true, ..Default::default() };
        assert!(registry(&adv).iter().any(|t| t.name == "BROKEN"));
    }

    #[test]
    fn listing_mentions_theta_entries() {
        let text = list_text(&RunConfig::default());
        assert!(text.contains("S4") && text.contains("elliptic_theta"));
    }

    #[test]
    fn scalars_parse() {
        assert_eq!(parse_scalar("1.5").unwrap(), Scalar::new(1.5, 0.0));
        assert_eq!(parse_scalar("1.5, -2").unwrap(), Scalar::new(1.5, -2.0));
        assert!(parse_scalar("x").is_err());
        assert!(parse_scalar("1,2,3").is_err());
    }

    #[test]
    fn config_file_and_overrides() {
        let mut cfg = RunConfig::default();
        cfg.apply_file("# comment\nseed = 7\ntol=1e-8\ncatalog.gosper.x = 1.4\n\nwindow=8").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.tol, Some(1e-8));
        assert_eq!(cfg.window, 8);
        assert_eq!(cfg.overrides["catalog.gosper.x"], Scalar::new(1.4, 0.0));
        cfg.validate().unwrap();
        assert!(cfg.apply_file("nonsense").is_err());
        let mut bad = RunConfig::default();
        bad.apply("catalog.gosper.zz", "1").unwrap();
        assert!(matches!(bad.validate(), Err(FgError::Config(_))));
    }

    #[test]
    fn unknown_target() {
        assert!(matches!(run_target("nope", &RunConfig::default()), Err(FgError::UnknownTarget(_))));
    }

    #[test]
    fn override_reaches_catalog() {
        let mut cfg = RunConfig::default();
        cfg.apply("catalog.gosper.x", "1.45").unwrap();
        assert!(run_target("gosper", &cfg).unwrap().passed());
    }
}
