//! Named specializations of the bilateral summation.
//!
//! Every entry pairs a generic instance (pair plus four sequences) with its
//! own display, written out with explicit q-shifted factorials so that the
//! two code paths stay independent.

use crate::inversion::IndexedSequence as Seq;
use crate::pairs::{pair_c2, pair_c3, pair_s1, pair_s2, pair_s4, FunctionPair, ParamEnv};
use crate::qseries::{gen_product, qpochhammer as poch, theta, Truncation};
use crate::report::{Residual, Status, Tally, VerificationReport, Stopwatch};
use crate::summation::{reference_check, rhs_products, lhs_sum, telescoping_residual, Reference, SummationInstance};
use crate::{re, FgError, Result, Scalar};

/// Grid verified for every entry.
pub const MAX_M: i64 = 6;
pub const MAX_N: i64 = 4;
/// Relative tolerance of the telescoping step check.
pub const TELESCOPE_TOL: f64 = 1e-12;

type Builder = fn(&ParamEnv, Truncation) -> Result<SummationInstance>;

pub struct CatalogEntry {
    pub name: &'static str,
    pub pair: &'static str,
    pub summary: &'static str,
    pub defaults: &'static [(&'static str, f64)],
    build: Builder,
}

impl CatalogEntry {
    /// Default parameters with `overrides` on top.
    pub fn params(&self, overrides: &ParamEnv) -> ParamEnv {
        ParamEnv::from_pairs(self.defaults).merged(overrides)
    }

    /// The instance at `(m, n) = (0, 0)`.
    pub fn instance(&self, overrides: &ParamEnv, tr: Truncation) -> Result<SummationInstance> {
        for key in overrides.bindings.keys() {
            if !self.defaults.iter().any(|(k, _)| k == key) {
                return Err(FgError::Config(format!("{}: unknown parameter {key}", self.name)));
            }
        }
        (self.build)(&self.params(overrides), tr)
    }

    pub fn truncation_limited(&self) -> bool {
        self.pair == "S4"
    }

    /// Tolerance used when none is given: `1e-9`, or the theta truncation
    /// budget `100 tail_tol` for entries built on theta functions.
    pub fn default_tol(&self, tr: Truncation) -> f64 {
        if self.truncation_limited() {
            100.0 * tr.tail_tol
        } else {
            1e-9
        }
    }
}

const STD: &[(&str, f64)] = &[("p", 0.35), ("q", 0.45), ("a", 0.6), ("b", 0.15), ("d", 1.7), ("e", 0.8), ("x", 1.3)];

pub fn catalog() -> Vec<CatalogEntry> {
    vec![
        entry("one_xy", "one_xy", "f = 1, g = x - y", &[("p", 0.35), ("q", 0.45)], one_xy),
        entry("subbarao_verma_31", "one_xy", "three-sequence form of the (1, x - y) sum", &[("p", 0.35), ("q", 0.45), ("a", 0.6)], subbarao_verma_31),
        entry("xy_xy", "S1", "f = g = x - y", &[("p", 0.35), ("q", 0.45)], xy_xy),
        entry("subbarao_verma_21", "S1", "four independent bases u, v, w, z", &[("p", 0.35), ("q", 0.45)], subbarao_verma_21),
        entry("ab_form", "S1", "S1 sum in the A1, A2, B1, B2 variables", &[("p", 0.35), ("q", 0.45)], ab_form),
        entry("krattenthaler_chu", "S1", "one-sided S1 sum normalized at b_0", &[("p", 0.35), ("q", 0.45), ("a", 0.6), ("d", 1.7), ("x", 1.3)], krattenthaler_chu),
        entry("chu_theorem_A", "S1", "phi/psi form over an arbitrary integer range", &[("p", 0.35), ("q", 0.45), ("x", 0.7), ("y", -1.3)], chu_theorem_a),
        entry("pair_C2", "C2", "generic C2 sum", &[("p", 0.35), ("q", 0.45), ("a", 0.6), ("b", 0.15)], pair_c2_generic),
        entry("gasper_rahman", "C2", "indefinite bibasic sum", STD, gasper_rahman),
        entry("gosper", "C2", "bibasic sum with b = 0", &[("p", 0.35), ("q", 0.45), ("a", 0.6), ("x", 1.3)], gosper),
        entry("gasper", "C2", "bibasic sum with two free parameters", &[("p", 0.35), ("q", 0.45), ("a", 0.6), ("b", 0.15), ("x", 1.3)], gasper),
        entry("pair_C3", "C3", "generic C3 sum", &[("p", 0.35), ("q", 0.45), ("a", 0.6), ("b", 0.15)], pair_c3_generic),
        entry("pair_S2", "S2", "generic S2 sum", &[("p", 0.35), ("q", 0.45), ("d", 1.7)], pair_s2_generic),
        entry("chu_gasper_rahman", "S2", "one-sided S2 sum with c = 1, d = x", &[("p", 0.35), ("q", 0.45), ("d", 1.7), ("x", 1.3)], chu_gasper_rahman),
        entry("macdonald_432", "S2", "S2 sum after b -> d e b", &[("p", 0.35), ("q", 0.45), ("d", 1.7), ("e", 0.8), ("x", 1.3)], macdonald_432),
        entry("macdonald_general", "S2", "S2 sum with an index-dependent d", &[("p", 0.35), ("q", 0.45), ("e", 0.8)], macdonald_general),
        entry("elliptic_theta", "S4", "theta-function sum", &[("p", 0.35), ("r", 0.45), ("q", 0.3)], elliptic_theta),
    ]
}

/// Negative control: the generic sum with the non-orthogonal pair
/// `f = x y^2`, `g = x - y`. Not part of [`catalog`].
pub fn adversarial_entry() -> CatalogEntry {
    entry("broken_summation", "BROKEN", "generic sum with a non-orthogonal pair", &[("p", 0.35), ("q", 0.45)], broken_summation)
}

fn broken_summation(env: &ParamEnv, _tr: Truncation) -> Result<SummationInstance> {
    let pp = P::read(env);
    SummationInstance::new("broken_summation", crate::pairs::broken_pair(), ParamEnv::new(), quad(&pp), 0, 0)
}

fn entry(name: &'static str, pair: &'static str, summary: &'static str, defaults: &'static [(&'static str, f64)], build: Builder) -> CatalogEntry {
    CatalogEntry { name, pair, summary, defaults, build }
}

pub fn entry_by_name(name: &str) -> Result<CatalogEntry> {
    catalog().into_iter().find(|e| e.name == name).ok_or_else(|| FgError::UnknownTarget(name.to_string()))
}

/// Runs the whole `(m, n)` grid, the display cross-checks and the
/// telescoping steps for one entry.
pub fn verify_entry(e: &CatalogEntry, overrides: &ParamEnv, tr: Truncation, tol: f64) -> VerificationReport {
    let start = Stopwatch::start();
    let mut tally = Tally::default();
    let mut worst = String::new();
    let mut worst_rel = -1.0;
    let mut tele_max = 0.0f64;
    let mut failure: Option<String> = None;
    let base = match e.instance(overrides, tr) {
        Ok(b) => b,
        Err(err) => return failed(e.name, &err.to_string(), start),
    };
    for n in 0..=MAX_N {
        for m in 0..=MAX_M {
            let step = (|| -> Result<()> {
                let inst = base.with_range(m, n)?;
                let rhs = rhs_products(&inst)?;
                let r = Residual::between(lhs_sum(&inst)?, rhs);
                tally.push(r);
                tally.count();
                let mut rels = vec![r.rel()];
                if let Some(rc) = reference_check(&inst, rhs)? {
                    tally.push(rc.display);
                    tally.push(rc.link);
                    rels.push(rc.display.rel());
                    rels.push(rc.link.rel());
                }
                let top = rels.iter().cloned().fold(0.0, f64::max);
                if top > worst_rel {
                    worst_rel = top;
                    worst = format!("m={m} n={n}");
                }
                if m >= 1 {
                    tele_max = tele_max.max(telescoping_residual(&inst, m)?.rel());
                }
                Ok(())
            })();
            if let Err(err) = step {
                failure.get_or_insert(format!("m={m} n={n}: {err}"));
            }
        }
    }
    let tele_tol = if e.truncation_limited() { TELESCOPE_TOL.max(100.0 * tr.tail_tol) } else { TELESCOPE_TOL };
    let detail = format!("worst at {worst}; telescoping={tele_max:.2e}");
    let ms = start.ms();
    let mut rep = tally.into_report(e.name, tol, 0, ms, detail);
    if tele_max > tele_tol {
        rep.status = Status::Fail;
    }
    if let Some(f) = failure {
        rep.status = Status::Fail;
        rep.detail = format!("{f}; {}", rep.detail);
    }
    rep
}

fn failed(name: &str, why: &str, start: Stopwatch) -> VerificationReport {
    let mut rep = Tally::default().into_report(name, 0.0, 0, start.ms(), why.to_string());
    rep.status = Status::Fail;
    rep
}

// ---------------------------------------------------------------------------
// shared helpers

/// Real-valued parameters of a display, read once.
#[derive(Clone, Copy)]
struct P {
    p: Scalar,
    q: Scalar,
    a: Scalar,
    b: Scalar,
    d: Scalar,
    e: Scalar,
    x: Scalar,
    y: Scalar,
}

impl P {
    fn read(env: &ParamEnv) -> P {
        let g = |k: &str| env.get(k).unwrap_or(re(f64::NAN));
        P { p: g("p"), q: g("q"), a: g("a"), b: g("b"), d: g("d"), e: g("e"), x: g("x"), y: g("y") }
    }
}

fn gp<F: Fn(i64) -> Scalar>(f: F, k: i64, m: i64) -> Result<Scalar> {
    gen_product(|j| Ok(f(j)), k, m)
}

fn pw(z: Scalar, k: i64) -> Scalar {
    z.powi(k as i32)
}

fn geo(scale: f64, base: Scalar, offset: f64) -> Seq {
    Seq::shifted_geometric(re(scale), base, re(offset))
}

fn aff(offset: f64, slope: f64) -> Seq {
    Seq::affine(re(offset), re(slope))
}

fn seq_fn<F: Fn(i64) -> Scalar + Send + Sync + 'static>(f: F) -> Seq {
    Seq::derived(move |k| Ok(f(k)))
}

fn val(s: &Seq, k: i64) -> Scalar {
    s.value(k).unwrap_or(re(f64::NAN))
}

/// Display built from per-index factors: the lead term and the `X`, `Y`
/// products of the standard right side.
fn standard_display<L, X, Y>(lead: L, x: X, y: Y) -> Reference
where
    L: Fn(i64) -> Scalar + Send + Sync + Clone + 'static,
    X: Fn(i64) -> Scalar + Send + Sync + Clone + 'static,
    Y: Fn(i64) -> Scalar + Send + Sync + Clone + 'static,
{
    let (x2, y2) = (x.clone(), y.clone());
    Reference::new(
        move |k| Ok(lead(k) * gp(&x, 1, k - 1)? / gp(&y, 1, k)?),
        move |m, n| Ok(gp(&x2, 1, m)? / gp(&y2, 1, m)? - gp(&y2, -n, 0)? / gp(&x2, -n, 0)?),
        false,
    )
}

/// `A_j = 0.3 p^j + 0.1`, `B_j = 0.9 + 0.07 j`, `C_j = 1.3 q^j`, `D_j = 0.5 - 0.04 j`.
fn quad(pp: &P) -> [Seq; 4] {
    [geo(0.3, pp.p, 0.1), aff(0.9, 0.07), geo(1.3, pp.q, 0.0), aff(0.5, -0.04)]
}

fn one_xy_pair() -> FunctionPair {
    FunctionPair::new("one_xy", |_, _, _| Ok(re(1.0)), |x, y, _| Ok(x - y)).claims(true, false)
}

// ---------------------------------------------------------------------------
// the entries

fn one_xy(env: &ParamEnv, _tr: Truncation) -> Result<SummationInstance> {
    let pp = P::read(env);
    let s = quad(&pp);
    let (b, c, d) = (s[1].clone(), s[2].clone(), s[3].clone());
    let (b2, c2, d2) = (b.clone(), c.clone(), d.clone());
    let reference = standard_display(
        move |k| val(&c2, k) - val(&d2, k),
        {
            let (b, d) = (b.clone(), d.clone());
            move |j| val(&b, j) - val(&d, j)
        },
        move |j| val(&b2, j) - val(&c, j),
    );
    Ok(SummationInstance::new("one_xy", one_xy_pair(), env.clone(), s, 0, 0)?.with_reference(reference))
}

fn subbarao_verma_31(env: &ParamEnv, _tr: Truncation) -> Result<SummationInstance> {
    let pp = P::read(env);
    let a = pp.a;
    let xs = move |j: i64| 0.3 * pw(pp.q, j) + 0.02;
    let ys = move |j: i64| 0.7 * pw(pp.p, j) - 0.1;
    let zs = |j: i64| re(1.1 + 0.2 * j as f64);
    let t = move |j: i64| xs(j) / (a * zs(j));
    let seqs = [
        Seq::constant(re(0.0)),
        seq_fn(t),
        seq_fn(move |j| (t(j) - 1.0) / (1.0 - ys(j))),
        seq_fn(move |j| (t(j) - 1.0) / (1.0 - a * zs(j))),
    ];
    let reference = standard_display(
        move |k| a * zs(k) * (1.0 - xs(k) / (a * zs(k))) * (1.0 - ys(k) / (a * zs(k))),
        move |j| (1.0 - xs(j)) * (1.0 - ys(j)),
        move |j| (1.0 - a * zs(j)) * (1.0 - xs(j) * ys(j) / (a * zs(j))),
    );
    Ok(SummationInstance::new("subbarao_verma_31", one_xy_pair(), env.clone(), seqs, 0, 0)?.with_reference(reference))
}

fn xy_xy(env: &ParamEnv, _tr: Truncation) -> Result<SummationInstance> {
    let pp = P::read(env);
    let s = quad(&pp);
    let v = |s: &Seq| s.clone();
    let (a, b, c, d) = (v(&s[0]), v(&s[1]), v(&s[2]), v(&s[3]));
    let (a1, b1, c1, d1) = (a.clone(), b.clone(), c.clone(), d.clone());
    let (a2, b2, c2, d2) = (a.clone(), b.clone(), c.clone(), d.clone());
    let reference = standard_display(
        move |k| (val(&a, k) - val(&b, k)) * (val(&c, k) - val(&d, k)),
        move |j| (val(&a1, j) - val(&c1, j)) * (val(&b1, j) - val(&d1, j)),
        move |j| (val(&a2, j) - val(&d2, j)) * (val(&b2, j) - val(&c2, j)),
    );
    Ok(SummationInstance::new("xy_xy", pair_s1(), env.clone(), s, 0, 0)?.with_reference(reference))
}

fn ab_seqs(a1: Seq, a2: Seq, b1: Seq, b2: Seq) -> [Seq; 4] {
    let (a2c, b2c) = (a2.clone(), b2.clone());
    [
        seq_fn(move |j| 1.0 / val(&a2c, j)),
        seq_fn(move |j| 1.0 / val(&b2c, j)),
        seq_fn(move |j| val(&a1, j) / val(&a2, j)),
        seq_fn(move |j| val(&b1, j) / val(&b2, j)),
    ]
}

fn subbarao_verma_21(env: &ParamEnv, _tr: Truncation) -> Result<SummationInstance> {
    let pp = P::read(env);
    let u = |j: i64| re(0.3 + 0.05 * j as f64);
    let v = move |j: i64| 0.5 * pw(pp.q, j) + 0.1;
    let w = |j: i64| re(0.7 - 0.03 * j as f64);
    let z = move |j: i64| 1.4 * pw(pp.p, j) + 0.2;
    let seqs = ab_seqs(
        seq_fn(move |j| (u(j) * u(j) + v(j) * v(j)) / (1.0 + u(j) * u(j) * v(j) * v(j))),
        seq_fn(move |j| u(j) * v(j) / (1.0 + u(j) * u(j) * v(j) * v(j))),
        seq_fn(move |j| (w(j) * w(j) + z(j) * z(j)) / (1.0 + w(j) * w(j) * z(j) * z(j))),
        seq_fn(move |j| w(j) * z(j) / (1.0 + w(j) * w(j) * z(j) * z(j))),
    );
    let reference = standard_display(
        move |k| {
            let (u, v, w, z) = (u(k), v(k), w(k), z(k));
            u * v * w / z * (1.0 - u * v * w * z) * (1.0 - w * z / (u * v)) * (1.0 - u * z / (v * w)) * (1.0 - v * z / (u * w))
        },
        move |j| {
            let (u, v, w, z) = (u(j), v(j), w(j), z(j));
            (1.0 - u * u) * (1.0 - v * v) * (1.0 - w * w) * (1.0 - z * z)
        },
        move |j| {
            let (u, v, w, z) = (u(j), v(j), w(j), z(j));
            (1.0 - u * v * w / z) * (1.0 - u * v * z / w) * (1.0 - w * z * u / v) * (1.0 - w * z * v / u)
        },
    );
    Ok(SummationInstance::new("subbarao_verma_21", pair_s1(), env.clone(), seqs, 0, 0)?.with_reference(reference))
}

fn ab_form(env: &ParamEnv, _tr: Truncation) -> Result<SummationInstance> {
    let pp = P::read(env);
    let a1 = |j: i64| re(0.4 + 0.05 * j as f64);
    let a2 = move |j: i64| 0.6 * pw(pp.q, j) + 0.3;
    let b1 = |j: i64| re(1.7 - 0.04 * j as f64);
    let b2 = move |j: i64| 0.5 * pw(pp.p, j) + 0.8;
    let seqs = ab_seqs(seq_fn(a1), seq_fn(a2), seq_fn(b1), seq_fn(b2));
    let reference = standard_display(
        move |k| (1.0 / a2(k) - 1.0 / b2(k)) * (a1(k) / a2(k) - b1(k) / b2(k)) * a2(k) * b2(k),
        move |j| (1.0 - a1(j)) * (1.0 - b1(j)),
        move |j| (1.0 - a2(j) * b1(j) / b2(j)) * (1.0 - b2(j) * a1(j) / a2(j)),
    );
    Ok(SummationInstance::new("ab_form", pair_s1(), env.clone(), seqs, 0, 0)?.with_reference(reference))
}

fn krattenthaler_chu(env: &ParamEnv, _tr: Truncation) -> Result<SummationInstance> {
    let pp = P::read(env);
    let x = pp.x;
    let al = move |j: i64| pp.a * pw(pp.p, j) + 0.1 * j as f64;
    let be = move |j: i64| pp.d * pw(pp.q, j) + 0.05 * j as f64;
    let b0 = be(0);
    let seqs = [seq_fn(al), seq_fn(move |j| b0 / be(j)), Seq::constant(re(1.0)), Seq::constant(x)];
    let num = move |j: i64| (1.0 - al(j)) * (b0 - be(j) * x);
    let den = move |j: i64| (1.0 - al(j) / x) * (b0 - be(j));
    let reference = Reference::new(
        move |k| Ok((b0 - be(k) * al(k)) / (b0 - b0 * al(0)) * gp(num, 0, k - 1)? / gp(den, 1, k)? / pw(x, k)),
        move |m, _| Ok(gp(num, 1, m)? / gp(den, 1, m)? / pw(x, m)),
        true,
    );
    Ok(SummationInstance::new("krattenthaler_chu", pair_s1(), env.clone(), seqs, 0, 0)?.with_reference(reference))
}

/// The four coefficient sequences of the phi/psi form.
#[derive(Clone, Copy)]
struct ChuSeqs {
    p: Scalar,
    q: Scalar,
}

impl ChuSeqs {
    fn al(&self, i: i64) -> Scalar {
        re(0.5 + 0.1 * i as f64)
    }
    fn be(&self, i: i64) -> Scalar {
        0.8 * pw(self.q, i) + 0.3
    }
    fn ga(&self, i: i64) -> Scalar {
        re(1.2 - 0.05 * i as f64)
    }
    fn de(&self, i: i64) -> Scalar {
        0.4 * pw(self.p, i) + 0.6
    }
    /// `phi(x; m) = prod_{i=0}^{m-1} (al_i + x be_i)`.
    fn phi(&self, x: Scalar, m: i64) -> Result<Scalar> {
        gp(|i| self.al(i) + x * self.be(i), 0, m - 1)
    }
    /// `psi(y; m) = prod_{i=0}^{m-1} (ga_i + y de_i)`.
    fn psi(&self, y: Scalar, m: i64) -> Result<Scalar> {
        gp(|i| self.ga(i) + y * self.de(i), 0, m - 1)
    }
    fn boundary(&self, x: Scalar, y: Scalar, m: i64) -> Result<Scalar> {
        Ok(self.phi(x, m)? * self.psi(y, m)? / (self.phi(y, m)? * self.psi(x, m)?))
    }
    /// Summand of the phi/psi form at its own index `k`.
    fn term(&self, x: Scalar, y: Scalar, k: i64) -> Result<Scalar> {
        Ok((x - y) * (self.al(k) * self.de(k) - self.be(k) * self.ga(k)) * self.phi(x, k)? * self.psi(y, k)?
            / (self.phi(y, k + 1)? * self.psi(x, k + 1)?))
    }
    /// Sum over `lo..=hi` as `T(lo) - T(hi + 1)`.
    fn closed(&self, x: Scalar, y: Scalar, lo: i64, hi: i64) -> Result<Scalar> {
        Ok(self.boundary(x, y, lo)? - self.boundary(x, y, hi + 1)?)
    }
}

fn chu_theorem_a(env: &ParamEnv, _tr: Truncation) -> Result<SummationInstance> {
    let pp = P::read(env);
    let (x, y) = (pp.x, pp.y);
    let cs = ChuSeqs { p: pp.p, q: pp.q };
    let seqs = [
        seq_fn(move |i| cs.al(i - 1) / cs.be(i - 1)),
        seq_fn(move |i| cs.ga(i - 1) / cs.de(i - 1)),
        Seq::constant(-x),
        Seq::constant(-y),
    ];
    // generic index k is the display index k - 1
    let reference = Reference::new(move |k| cs.term(x, y, k - 1), move |m, n| cs.closed(x, y, -n - 1, m - 1), false);
    Ok(SummationInstance::new("chu_theorem_A", pair_s1(), env.clone(), seqs, 0, 0)?.with_reference(reference))
}

/// The phi/psi form on `lo..=hi` with `lo >= 0`, obtained as the difference
/// of two prefix sums starting at 0.
pub fn chu_prefix_difference(env: &ParamEnv, lo: i64, hi: i64) -> Result<(Scalar, Scalar)> {
    let e = entry_by_name("chu_theorem_A")?;
    let pp = P::read(&e.params(env));
    let cs = ChuSeqs { p: pp.p, q: pp.q };
    let (x, y) = (pp.x, pp.y);
    let prefix = |top: i64| -> Result<Scalar> { (0..=top).map(|k| cs.term(x, y, k)).sum() };
    let direct: Scalar = (lo..=hi).map(|k| cs.term(x, y, k)).sum::<Result<Scalar>>()?;
    let via = prefix(hi)? - prefix(lo - 1)?;
    let closed = cs.closed(x, y, 0, hi)? - cs.closed(x, y, 0, lo - 1)?;
    Ok((direct - via, via - closed))
}

fn c2_pair(pp: &P) -> (FunctionPair, ParamEnv) {
    let p = pair_c2();
    let env = ParamEnv::new().with("a", pp.a).with("b", pp.b);
    (p, env)
}

fn pair_c2_generic(env: &ParamEnv, _tr: Truncation) -> Result<SummationInstance> {
    let pp = P::read(env);
    let s = quad(&pp);
    let (a, b) = (pp.a, pp.b);
    let t = s.clone();
    let u = s.clone();
    let w = s.clone();
    let reference = standard_display(
        move |k| {
            let (aa, bb, cc, dd) = (val(&t[0], k), val(&t[1], k), val(&t[2], k), val(&t[3], k));
            (1.0 - a * aa * bb) * (1.0 - b * aa / bb) * (cc - dd) * (1.0 - b / (a * cc * dd))
        },
        move |j| {
            let (aa, bb, cc, dd) = (val(&u[0], j), val(&u[1], j), val(&u[2], j), val(&u[3], j));
            (1.0 - a * aa * cc) * (1.0 - b * aa / cc) * (bb - dd) * (1.0 - b / (a * bb * dd))
        },
        move |j| {
            let (aa, bb, cc, dd) = (val(&w[0], j), val(&w[1], j), val(&w[2], j), val(&w[3], j));
            (1.0 - a * aa * dd) * (1.0 - b * aa / dd) * (bb - cc) * (1.0 - b / (a * bb * cc))
        },
    );
    let (pair, penv) = c2_pair(&pp);
    Ok(SummationInstance::new("pair_C2", pair, penv, s, 0, 0)?.with_reference(reference))
}

fn gasper_rahman(env: &ParamEnv, _tr: Truncation) -> Result<SummationInstance> {
    let pp = P::read(env);
    let P { p, q, a, b, d, x, .. } = pp;
    let seqs = [Seq::geometric(re(1.0), p), Seq::geometric(d, q), Seq::constant(re(1.0)), Seq::constant(d / x)];
    let term = move |k: i64| -> Result<Scalar> {
        let pk = pw(p, k);
        let qk = pw(q, k);
        let lead = (1.0 - a * d * pk * qk) * (1.0 - b / d * pk / qk) / ((1.0 - a * d) * (1.0 - b / d));
        let num = poch(a, p, k)? * poch(b, p, k)? * poch(x, q, k)? * poch(a * d * d / (b * x), q, k)?;
        let den = poch(d * q, q, k)? * poch(a * d * q / b, q, k)? * poch(a * d * p / x, p, k)? * poch(b * p * x / d, p, k)?;
        Ok(lead * num / den * qk)
    };
    let rhs = move |m: i64, n: i64| -> Result<Scalar> {
        let pref = (1.0 - a) * (1.0 - b) * (1.0 - x) * (1.0 - a * d * d / (b * x))
            / ((1.0 - a * d) * (1.0 - b / d) * (d - x) * (1.0 - a * d / (b * x)));
        let top = poch(a * p, p, m)? * poch(b * p, p, m)? * poch(x * q, q, m)? * poch(a * d * d * q / (b * x), q, m)?
            / (poch(d * q, q, m)? * poch(a * d * q / b, q, m)? * poch(a * d * p / x, p, m)? * poch(b * p * x / d, p, m)?);
        let n1 = n + 1;
        let bottom = poch(x / (a * d), p, n1)? * poch(d / (b * x), p, n1)? * poch(1.0 / d, q, n1)? * poch(b / (a * d), q, n1)?
            / (poch(1.0 / x, q, n1)? * poch(b * x / (a * d * d), q, n1)? * poch(1.0 / a, p, n1)? * poch(1.0 / b, p, n1)?);
        Ok(pref * (top - bottom))
    };
    let (pair, penv) = c2_pair(&pp);
    Ok(SummationInstance::new("gasper_rahman", pair, penv, seqs, 0, 0)?.with_reference(Reference::new(term, rhs, false)))
}

/// Summand of the one-sided sum with free `a`, `b`, written so that `b = 0`
/// is allowed: `(a/(bx);q)_k / (aq/b;q)_k = prod (b - a q^i/x)/(b - a q^{i+1})`.
pub fn gasper_display_term(a: Scalar, b: Scalar, x: Scalar, p: Scalar, q: Scalar, k: i64) -> Result<Scalar> {
    let pk = pw(p, k);
    let qk = pw(q, k);
    let lead = (1.0 - a * pk * qk) * (1.0 - b * pk / qk) / ((1.0 - a) * (1.0 - b));
    let mixed = gp(|i| (b - a * pw(q, i) / x) / (b - a * pw(q, i + 1)), 0, k - 1)?;
    let num = poch(a, p, k)? * poch(b, p, k)? * poch(x, q, k)? * mixed;
    let den = poch(q, q, k)? * poch(a * p / x, p, k)? * poch(b * p * x, p, k)?;
    Ok(lead * num / den * qk)
}

/// Closed form of the same sum up to `m`, again valid at `b = 0`.
pub fn gasper_display_rhs(a: Scalar, b: Scalar, x: Scalar, p: Scalar, q: Scalar, m: i64) -> Result<Scalar> {
    let mixed = gp(|i| (b - a * pw(q, i + 1) / x) / (b - a * pw(q, i + 1)), 0, m - 1)?;
    Ok(poch(a * p, p, m)? * poch(b * p, p, m)? * poch(x * q, q, m)? * mixed
        / (poch(q, q, m)? * poch(a * p / x, p, m)? * poch(b * p * x, p, m)?))
}

/// Summand of the `b = 0` sum.
pub fn gosper_display_term(a: Scalar, x: Scalar, p: Scalar, q: Scalar, k: i64) -> Result<Scalar> {
    let lead = (1.0 - a * pw(p, k) * pw(q, k)) / (1.0 - a);
    Ok(lead * poch(a, p, k)? * poch(1.0 / x, q, k)? / (poch(q, q, k)? * poch(a * p * x, p, k)?) * pw(x, k))
}

pub fn gosper_display_rhs(a: Scalar, x: Scalar, p: Scalar, q: Scalar, m: i64) -> Result<Scalar> {
    Ok(poch(a * p, p, m)? * poch(q / x, q, m)? * pw(x, m) / (poch(q, q, m)? * poch(a * p * x, p, m)?))
}

fn gosper(env: &ParamEnv, _tr: Truncation) -> Result<SummationInstance> {
    let pp = P::read(env);
    let P { p, q, a, x, .. } = pp;
    let seqs = [Seq::geometric(re(1.0), p), Seq::geometric(re(1.0), q), Seq::constant(re(1.0)), Seq::constant(x)];
    let reference = Reference::new(
        move |k| gosper_display_term(a, x, p, q, k),
        move |m, _| gosper_display_rhs(a, x, p, q, m),
        true,
    );
    let pair = pair_c2();
    let penv = ParamEnv::new().with("a", a).with("b", re(0.0));
    Ok(SummationInstance::new("gosper", pair, penv, seqs, 0, 0)?.with_reference(reference))
}

fn gasper(env: &ParamEnv, _tr: Truncation) -> Result<SummationInstance> {
    let pp = P::read(env);
    let P { p, q, a, b, x, .. } = pp;
    let seqs = [Seq::geometric(re(1.0), p), Seq::geometric(re(1.0), q), Seq::constant(re(1.0)), Seq::constant(1.0 / x)];
    let reference = Reference::new(
        move |k| gasper_display_term(a, b, x, p, q, k),
        move |m, _| gasper_display_rhs(a, b, x, p, q, m),
        true,
    );
    let (pair, penv) = c2_pair(&pp);
    Ok(SummationInstance::new("gasper", pair, penv, seqs, 0, 0)?.with_reference(reference))
}

fn pair_c3_generic(env: &ParamEnv, _tr: Truncation) -> Result<SummationInstance> {
    let pp = P::read(env);
    let s = quad(&pp);
    let r = pp.b / pp.a;
    let (t, u, w) = (s.clone(), s.clone(), s.clone());
    let reference = standard_display(
        move |k| {
            let (aa, bb, cc, dd) = (val(&t[0], k), val(&t[1], k), val(&t[2], k), val(&t[3], k));
            (aa + bb) * (aa + r / bb) * (cc - dd) * (1.0 - r / (cc * dd))
        },
        move |j| {
            let (aa, bb, cc, dd) = (val(&u[0], j), val(&u[1], j), val(&u[2], j), val(&u[3], j));
            (aa + cc) * (aa + r / cc) * (bb - dd) * (1.0 - r / (bb * dd))
        },
        move |j| {
            let (aa, bb, cc, dd) = (val(&w[0], j), val(&w[1], j), val(&w[2], j), val(&w[3], j));
            (aa + dd) * (aa + r / dd) * (bb - cc) * (1.0 - r / (bb * cc))
        },
    );
    let penv = ParamEnv::new().with("a", pp.a).with("b", pp.b);
    Ok(SummationInstance::new("pair_C3", pair_c3(), penv, s, 0, 0)?.with_reference(reference))
}

fn s2_env(d: Scalar) -> ParamEnv {
    ParamEnv::new().with("d", d)
}

fn pair_s2_generic(env: &ParamEnv, _tr: Truncation) -> Result<SummationInstance> {
    let pp = P::read(env);
    let s = quad(&pp);
    let d = pp.d;
    let h = move |x: Scalar, y: Scalar| (y - x) * (1.0 - x * y / d);
    let (t, u, w) = (s.clone(), s.clone(), s.clone());
    let reference = standard_display(
        move |k| h(val(&t[0], k), val(&t[1], k)) * h(val(&t[2], k), val(&t[3], k)),
        move |j| h(val(&u[0], j), val(&u[2], j)) * h(val(&u[1], j), val(&u[3], j)),
        move |j| h(val(&w[0], j), val(&w[3], j)) * h(val(&w[1], j), val(&w[2], j)),
    );
    Ok(SummationInstance::new("pair_S2", pair_s2(), s2_env(d), s, 0, 0)?.with_reference(reference))
}

/// `A_j = 0.3 p^j + 0.1`, `B_j = 0.93 + 0.071 j`.
fn s2_ab(pp: &P) -> (impl Fn(i64) -> Scalar + Copy + Send + Sync + 'static, impl Fn(i64) -> Scalar + Copy + Send + Sync + 'static) {
    let p = pp.p;
    (move |j: i64| 0.3 * pw(p, j) + 0.1, |j: i64| re(0.93 + 0.071 * j as f64))
}

fn chu_gasper_rahman(env: &ParamEnv, _tr: Truncation) -> Result<SummationInstance> {
    let pp = P::read(env);
    let (d, x) = (pp.d, pp.x);
    let (al, be) = s2_ab(&pp);
    let b0 = be(0);
    let seqs = [seq_fn(al), seq_fn(move |i| be(i) * d / b0), Seq::constant(re(1.0)), Seq::constant(x)];
    let xf = move |j: i64| (1.0 - al(j)) * (1.0 - al(j) / d) * (b0 - be(j) * x) * (b0 - be(j) * d / x);
    let yf = move |j: i64| (b0 - be(j)) * (b0 - be(j) * d) * (1.0 - al(j) / x) * (1.0 - al(j) * x / d);
    let reference = Reference::new(
        move |k| Ok((b0 - al(k) * be(k)) * (be(k) - al(k) * b0 / d) * gp(xf, 1, k - 1)? / gp(yf, 1, k)?),
        move |m, _| Ok(x / ((d - x) * (x - 1.0)) * gp(xf, 1, m)? / gp(yf, 1, m)?),
        true,
    );
    Ok(SummationInstance::new("chu_gasper_rahman", pair_s2(), s2_env(d), seqs, 0, 0)?.with_reference(reference))
}

fn macdonald_432(env: &ParamEnv, _tr: Truncation) -> Result<SummationInstance> {
    let pp = P::read(env);
    let (d, e, x) = (pp.d, pp.e, pp.x);
    let (al, be) = s2_ab(&pp);
    let seqs = [seq_fn(al), seq_fn(move |i| d * e * be(i)), Seq::constant(re(1.0)), Seq::constant(x / e)];
    let xf = move |j: i64| (1.0 - al(j)) * (1.0 - al(j) / d) * (1.0 - be(j) * d * e * e / x) * (1.0 - x * be(j));
    let yf = move |j: i64| (1.0 - al(j) * e / x) * (1.0 - al(j) * x / (d * e)) * (1.0 - d * e * be(j)) * (1.0 - e * be(j));
    let reference = Reference::new(
        move |k| Ok((be(k) - al(k) / (d * e)) * (1.0 - e * al(k) * be(k)) * gp(xf, 1, k - 1)? / gp(yf, 1, k)?),
        move |m, _| Ok(x / ((x - e) * (x - d * e)) * (yf(0) / xf(0) - gp(xf, 1, m)? / gp(yf, 1, m)?)),
        true,
    );
    Ok(SummationInstance::new("macdonald_432", pair_s2(), s2_env(d), seqs, 0, 0)?.with_reference(reference))
}

fn macdonald_general(env: &ParamEnv, _tr: Truncation) -> Result<SummationInstance> {
    let pp = P::read(env);
    let e = pp.e;
    let (al, be) = s2_ab(&pp);
    let q = pp.q;
    let ce = move |j: i64| 1.3 * pw(q, j) + 0.4;
    let de = |j: i64| re(1.5 - 0.04 * j as f64);
    let seqs = [seq_fn(al), seq_fn(move |k| de(k) * e * be(k)), Seq::constant(re(1.0)), seq_fn(move |k| ce(k) / e)];
    let reference = standard_display(
        move |k| e * (1.0 - al(k) * be(k) * e) * (be(k) - al(k) / (de(k) * e)) * (1.0 - ce(k) / e) * (1.0 - de(k) * e / ce(k)),
        move |j| (1.0 - al(j)) * (1.0 - al(j) / de(j)) * (1.0 - be(j) * ce(j)) * (1.0 - be(j) * de(j) * e * e / ce(j)),
        move |j| (1.0 - al(j) * e / ce(j)) * (1.0 - al(j) * ce(j) / (de(j) * e)) * (1.0 - be(j) * e) * (1.0 - be(j) * de(j) * e),
    );
    let inst = SummationInstance::new("macdonald_general", pair_s2(), s2_env(de(0)), seqs, 0, 0)?;
    Ok(inst.with_index_param("d", seq_fn(de))?.with_reference(reference))
}

fn elliptic_theta(env: &ParamEnv, tr: Truncation) -> Result<SummationInstance> {
    let pp = P::read(env);
    let nome = pp.q;
    let r = env.get("r")?;
    let p = pp.p;
    let aa = move |j: i64| 0.6 * pw(p, j) + 0.2;
    let bb = |j: i64| re(1.1 + 0.05 * j as f64);
    let cc = move |j: i64| 0.8 * pw(r, j) + 0.5;
    let dd = |j: i64| re(1.7 - 0.1 * j as f64);
    let th = move |z: Scalar| theta(z, nome, tr).unwrap_or(re(f64::NAN));
    let seqs = [seq_fn(aa), seq_fn(bb), seq_fn(cc), seq_fn(dd)];
    let reference = standard_display(
        move |k| bb(k) / cc(k) * th(aa(k) * bb(k)) * th(cc(k) * dd(k)) * th(aa(k) / bb(k)) * th(cc(k) / dd(k)),
        move |j| th(aa(j) * cc(j)) * th(aa(j) / cc(j)) * th(bb(j) * dd(j)) * th(bb(j) / dd(j)),
        move |j| th(bb(j) * cc(j)) * th(bb(j) / cc(j)) * th(aa(j) * dd(j)) * th(aa(j) / dd(j)),
    );
    let pair = pair_s4(tr);
    let penv = ParamEnv::new().with("q", nome);
    Ok(SummationInstance::new("elliptic_theta", pair, penv, seqs, 0, 0)?.with_reference(reference))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::summation::verify_summation;

    #[test]
    fn names_are_unique() {
        let c = catalog();
        assert_eq!(c.len(), 17);
        let mut names: Vec<_> = c.iter().map(|e| e.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 17);
    }

    #[test]
    fn every_entry_passes_its_grid() {
        let tr = Truncation::default();
        for e in catalog() {
            let rep = verify_entry(&e, &ParamEnv::new(), tr, e.default_tol(tr));
            assert!(rep.passed(), "{}", rep.to_line());
        }
    }

    #[test]
    fn gosper_one_term() {
        let e = entry_by_name("gosper").unwrap();
        let inst = e.instance(&ParamEnv::new(), Truncation::default()).unwrap().with_range(1, 0).unwrap();
        assert!(verify_summation(&inst, 1e-10).passed());
        let (a, x, p, q) = (re(0.6), re(1.3), re(0.35), re(0.45));
        let lhs = 1.0 + (1.0 - a * p * q) * (1.0 - a) * (1.0 - 1.0 / x) * x / ((1.0 - a) * (1.0 - q) * (1.0 - a * p * x));
        let rhs = (1.0 - a * p) * (1.0 - q / x) * x / ((1.0 - q) * (1.0 - a * p * x));
        assert!(Residual::between(lhs, rhs).rel() <= 1e-14);
        assert!(Residual::between(lhs, lhs_sum(&inst).unwrap()).rel() <= 1e-14);
    }

    #[test]
    fn broken_pair_fails_the_grid() {
        let tr = Truncation::default();
        let e = adversarial_entry();
        assert!(!verify_entry(&e, &ParamEnv::new(), tr, 1e-9).passed());
    }

    #[test]
    fn unknown_override_is_rejected() {
        let e = entry_by_name("gosper").unwrap();
        let bad = ParamEnv::new().with("zz", re(1.0));
        assert!(matches!(e.instance(&bad, Truncation::default()), Err(FgError::Config(_))));
    }

    #[test]
    fn chu_prefix_subtraction() {
        for (lo, hi) in [(0, 3), (2, 5), (3, 3)] {
            let (a, b) = chu_prefix_difference(&ParamEnv::new(), lo, hi).unwrap();
            assert!(a.norm() <= 1e-13 && b.norm() <= 1e-12, "{lo} {hi}");
        }
    }
}
