//! Matrix inversions generated by an orthogonal pair: the lower-triangular
//! `(f, g)`-inversion, the zero-sum identity, the bilateral inversion with
//! its normalizing limit `h(M)`, and Schlosser's bilateral inversion.

use crate::pairs::{FunctionPair, ParamEnv};
use crate::qseries::{gen_product, qpochhammer_inf, qpochhammer_inf_many, qpochhammer_ratio, theta, Truncation};
use crate::report::{Residual, Tally, VerificationReport, Stopwatch};
use crate::{FgError, Result, Scalar, POLE_EPS};
use serde_json::{json, Value};
use std::fmt;
use std::sync::Arc;

const ONE: Scalar = Scalar::new(1.0, 0.0);
const ZERO: Scalar = Scalar::new(0.0, 0.0);

pub type SeqFn = Arc<dyn Fn(i64) -> Result<Scalar> + Send + Sync>;

/// How a sequence produces its values.
#[derive(Clone)]
pub enum SeqKind {
    /// `offset + scale * ratio^k`.
    Geometric { scale: Scalar, ratio: Scalar, offset: Scalar },
    /// `offset + slope * k`.
    Affine { offset: Scalar, slope: Scalar },
    /// `theta(scale * ratio^k)` in base `base`.
    ThetaGeometric { scale: Scalar, ratio: Scalar, base: Scalar, tr: Truncation },
    /// Explicit values for `lo..lo + values.len()`.
    Table { lo: i64, values: Vec<Scalar> },
    /// Any other rule, e.g. a transform of other sequences.
    Derived(SeqFn),
}

/// An integer-indexed sequence of scalars.
#[derive(Clone)]
pub struct IndexedSequence {
    pub kind: SeqKind,
}

impl fmt::Debug for IndexedSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            SeqKind::Geometric { scale, ratio, offset } => write!(f, "{offset} + {scale}*({ratio})^k"),
            SeqKind::Affine { offset, slope } => write!(f, "{offset} + {slope}*k"),
            SeqKind::ThetaGeometric { scale, ratio, base, .. } => write!(f, "theta({scale}*({ratio})^k; {base})"),
            SeqKind::Table { lo, values } => write!(f, "table[{lo}..{}]", lo + values.len() as i64 - 1),
            SeqKind::Derived(_) => write!(f, "derived"),
        }
    }
}

impl IndexedSequence {
    pub fn geometric(scale: Scalar, ratio: Scalar) -> Self {
        Self::shifted_geometric(scale, ratio, ZERO)
    }

    pub fn shifted_geometric(scale: Scalar, ratio: Scalar, offset: Scalar) -> Self {
        IndexedSequence { kind: SeqKind::Geometric { scale, ratio, offset } }
    }

    pub fn affine(offset: Scalar, slope: Scalar) -> Self {
        IndexedSequence { kind: SeqKind::Affine { offset, slope } }
    }

    pub fn constant(v: Scalar) -> Self {
        Self::affine(v, ZERO)
    }

    pub fn theta_geometric(scale: Scalar, ratio: Scalar, base: Scalar, tr: Truncation) -> Self {
        IndexedSequence { kind: SeqKind::ThetaGeometric { scale, ratio, base, tr } }
    }

    pub fn table(lo: i64, values: Vec<Scalar>) -> Self {
        IndexedSequence { kind: SeqKind::Table { lo, values } }
    }

    pub fn derived<F>(f: F) -> Self
    where
        F: Fn(i64) -> Result<Scalar> + Send + Sync + 'static,
    {
        IndexedSequence { kind: SeqKind::Derived(Arc::new(f)) }
    }

    /// `k -> self(k + s)`.
    pub fn shifted(&self, s: i64) -> Self {
        let me = self.clone();
        Self::derived(move |k| me.value(k + s))
    }

    pub fn value(&self, k: i64) -> Result<Scalar> {
        let v = match &self.kind {
            SeqKind::Geometric { scale, ratio, offset } => offset + scale * ratio.powi(k as i32),
            SeqKind::Affine { offset, slope } => offset + slope * k as f64,
            SeqKind::ThetaGeometric { scale, ratio, base, tr } => theta(scale * ratio.powi(k as i32), *base, *tr)?,
            SeqKind::Table { lo, values } => {
                let idx = k - lo;
                if idx < 0 || idx as usize >= values.len() {
                    return Err(FgError::IndexOutOfWindow(k, k));
                }
                values[idx as usize]
            }
            SeqKind::Derived(f) => f(k)?,
        };
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(FgError::Pole(format!("sequence value at k = {k}")));
        }
        Ok(v)
    }
}

/// A finite block of an integer-indexed matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixWindow {
    pub rows: (i64, i64),
    pub cols: (i64, i64),
    /// Row-major.
    pub entries: Vec<Scalar>,
}

impl MatrixWindow {
    pub fn zeros(rows: (i64, i64), cols: (i64, i64)) -> Self {
        let n = ((rows.1 - rows.0 + 1) * (cols.1 - cols.0 + 1)).max(0) as usize;
        MatrixWindow { rows, cols, entries: vec![ZERO; n] }
    }

    fn width(&self) -> i64 {
        self.cols.1 - self.cols.0 + 1
    }

    fn slot(&self, n: i64, k: i64) -> Option<usize> {
        let inside = (self.rows.0..=self.rows.1).contains(&n) && (self.cols.0..=self.cols.1).contains(&k);
        inside.then(|| ((n - self.rows.0) * self.width() + (k - self.cols.0)) as usize)
    }

    pub fn get(&self, n: i64, k: i64) -> Result<Scalar> {
        self.slot(n, k).map(|s| self.entries[s]).ok_or(FgError::IndexOutOfWindow(n, k))
    }

    pub fn set(&mut self, n: i64, k: i64, v: Scalar) -> Result<()> {
        let s = self.slot(n, k).ok_or(FgError::IndexOutOfWindow(n, k))?;
        self.entries[s] = v;
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "rows": [self.rows.0, self.rows.1],
            "cols": [self.cols.0, self.cols.1],
            "entries": self.entries.iter().map(|z| json!([z.re, z.im])).collect::<Vec<_>>(),
        })
    }
}

fn nonzero(v: Scalar, what: impl FnOnce() -> String) -> Result<Scalar> {
    if v.norm() <= POLE_EPS {
        Err(FgError::Pole(what()))
    } else {
        Ok(v)
    }
}

/// `f_{n,k} = prod_{i=k}^{n-1} f(x_i, b_k) / prod_{i=k+1}^{n} g(b_i, b_k)` for
/// `n >= k`, zero above the diagonal.
pub fn build_f(
    pair: &FunctionPair,
    env: &ParamEnv,
    xs: &IndexedSequence,
    bs: &IndexedSequence,
    rows: (i64, i64),
    cols: (i64, i64),
) -> Result<MatrixWindow> {
    let mut out = MatrixWindow::zeros(rows, cols);
    for n in rows.0..=rows.1 {
        for k in cols.0..=cols.1.min(n) {
            let bk = bs.value(k)?;
            let num = gen_product(|i| pair.eval_f(xs.value(i)?, bk, env), k, n - 1)?;
            let den = gen_product(
                |i| nonzero(pair.eval_g(bs.value(i)?, bk, env)?, || format!("g(b_{i}, b_{k}) in f_({n},{k})")),
                k + 1,
                n,
            )?;
            out.set(n, k, num / den)?;
        }
    }
    Ok(out)
}

/// `g_{n,k} = f(x_k,b_k)/f(x_n,b_n) * prod_{i=k+1}^{n} f(x_i,b_n) / prod_{i=k}^{n-1} g(b_i,b_n)`
/// for `n >= k`, zero above the diagonal.
pub fn build_g(
    pair: &FunctionPair,
    env: &ParamEnv,
    xs: &IndexedSequence,
    bs: &IndexedSequence,
    rows: (i64, i64),
    cols: (i64, i64),
) -> Result<MatrixWindow> {
    let mut out = MatrixWindow::zeros(rows, cols);
    for n in rows.0..=rows.1 {
        let bn = bs.value(n)?;
        let fnn = nonzero(pair.eval_f(xs.value(n)?, bn, env)?, || format!("f(x_{n}, b_{n})"))?;
        for k in cols.0..=cols.1.min(n) {
            let lead = pair.eval_f(xs.value(k)?, bs.value(k)?, env)? / fnn;
            let num = gen_product(|i| pair.eval_f(xs.value(i)?, bn, env), k + 1, n)?;
            let den = gen_product(
                |i| nonzero(pair.eval_g(bs.value(i)?, bn, env)?, || format!("g(b_{i}, b_{n}) in g_({n},{k})")),
                k,
                n - 1,
            )?;
            out.set(n, k, lead * num / den)?;
        }
    }
    Ok(out)
}

fn triangular_product_residuals(a: &MatrixWindow, b: &MatrixWindow, tally: &mut Tally, worst: &mut (f64, i64, i64)) {
    let lo = a.rows.0.max(a.cols.0).max(b.rows.0).max(b.cols.0);
    let hi = a.rows.1.min(a.cols.1).min(b.rows.1).min(b.cols.1);
    for n in lo..=hi {
        for k in lo..=n {
            let terms: Vec<Scalar> =
                (k..=n).map(|i| a.get(n, i).unwrap_or(ZERO) * b.get(i, k).unwrap_or(ZERO)).collect();
            let sum: Scalar = terms.iter().sum();
            let delta = if n == k { ONE } else { ZERO };
            let mut scale_terms = terms.clone();
            scale_terms.push(delta);
            let r = Residual::of_terms(sum - delta, &scale_terms);
            if r.rel() > worst.0 {
                *worst = (r.rel(), n, k);
            }
            tally.push(r);
            tally.count();
        }
    }
}

/// Checks `sum_{i=k}^{n} F_{n,i} G_{i,k} = delta_{n,k}` and the same with the
/// factors swapped, over the common square part of the windows. Residuals
/// are relative to the largest product term of each entry.
pub fn verify_inverse(f: &MatrixWindow, g: &MatrixWindow, tol: f64) -> VerificationReport {
    let start = Stopwatch::start();
    let mut tally = Tally::default();
    let mut worst_fg = (0.0, 0, 0);
    let mut worst_gf = (0.0, 0, 0);
    triangular_product_residuals(f, g, &mut tally, &mut worst_fg);
    triangular_product_residuals(g, f, &mut tally, &mut worst_gf);
    let detail = format!(
        "FG worst {:.2e} at ({},{}); GF worst {:.2e} at ({},{})",
        worst_fg.0, worst_fg.1, worst_fg.2, worst_gf.0, worst_gf.1, worst_gf.2
    );
    tally.into_report("inverse", tol, 0, start.ms(), detail)
}

/// The summands of the zero-sum identity
/// `sum_{k=-n}^{m} f(a_k,b_k) [prod_{j=m}^{k-1} g(b_j,b_m) / prod_{j=m}^{k} f(a_j,b_m)]
///  [prod_{j=1}^{k-1} f(a_j,b_{-n}) / prod_{j=1}^{k} g(b_j,b_{-n})]`.
pub fn zero_sum_terms(
    pair: &FunctionPair,
    env: &ParamEnv,
    as_: &IndexedSequence,
    bs: &IndexedSequence,
    m: i64,
    n: i64,
) -> Result<Vec<Scalar>> {
    if m < 0 || n < 1 {
        return Err(FgError::Config(format!("zero sum needs m >= 0 and n >= 1, got ({m}, {n})")));
    }
    let bm = bs.value(m)?;
    let bn = bs.value(-n)?;
    let mut out = Vec::new();
    for k in -n..=m {
        let lead = pair.eval_f(as_.value(k)?, bs.value(k)?, env)?;
        let p1 = gen_product(|j| pair.eval_g(bs.value(j)?, bm, env), m, k - 1)?;
        let p2 = gen_product(|j| pair.eval_f(as_.value(j)?, bm, env), m, k)?;
        let p3 = gen_product(|j| pair.eval_f(as_.value(j)?, bn, env), 1, k - 1)?;
        let p4 = gen_product(|j| pair.eval_g(bs.value(j)?, bn, env), 1, k)?;
        let p2 = nonzero(p2, || format!("zero sum: f-product at k = {k}"))?;
        let p4 = nonzero(p4, || format!("zero sum: g-product at k = {k}"))?;
        out.push(lead * p1 / p2 * p3 / p4);
    }
    Ok(out)
}

/// Sum of [`zero_sum_terms`]; vanishes when `f` is orthogonal to `g`.
pub fn zero_sum_residual(
    pair: &FunctionPair,
    env: &ParamEnv,
    as_: &IndexedSequence,
    bs: &IndexedSequence,
    m: i64,
    n: i64,
) -> Result<Scalar> {
    Ok(zero_sum_terms(pair, env, as_, bs, m, n)?.iter().sum())
}

/// Inputs shared by the bilateral inversion routines.
#[derive(Clone, Debug)]
pub struct BilateralSetup {
    pub pair: FunctionPair,
    pub env: ParamEnv,
    pub as_: IndexedSequence,
    pub bs: IndexedSequence,
    /// The sequence `A_M` at which rows and columns are anchored.
    pub anchors: IndexedSequence,
}

impl BilateralSetup {
    fn factor(&self, j: i64, am: Scalar, an: Scalar) -> Result<Scalar> {
        let (aj, bj) = (self.as_.value(j)?, self.bs.value(j)?);
        let e = &self.env;
        let num = self.pair.eval_f(aj, am, e)? * self.pair.eval_g(bj, an, e)?;
        let den = self.pair.eval_f(aj, an, e)? * self.pair.eval_g(bj, am, e)?;
        Ok(num / nonzero(den, || format!("bilateral product factor j = {j}"))?)
    }

    /// The two truncated product ratios
    /// `R1 = prod_{j>=1} f(a_j,A)g(b_j,B) / (f(a_j,B)g(b_j,A))` and
    /// `R2 = prod_{j<=0} f(a_j,B)g(b_j,A) / (f(a_j,A)g(b_j,B))`.
    pub fn product_ratios(&self, am: Scalar, an: Scalar, tr: Truncation) -> Result<(Scalar, Scalar)> {
        let n = tr.product_terms as i64;
        let mut r1 = ONE;
        let mut last = ZERO;
        for j in 1..=n {
            last = self.factor(j, am, an)?;
            r1 *= last;
        }
        let tail1 = (last - ONE).norm();
        let mut r2 = ONE;
        for j in -n..=0 {
            let fct = self.factor(j, am, an)?;
            if j == -n {
                last = fct;
            }
            r2 /= fct;
        }
        let tail = tail1.max((last - ONE).norm());
        if tail > tr.tail_tol {
            return Err(FgError::TruncationInsufficient { tail, tol: tr.tail_tol });
        }
        Ok((r1, r2))
    }

    /// Relative gap between the two product ratios at lattice anchors
    /// `A_M`, `A_N`; the bilateral inversion assumes it vanishes.
    pub fn hypothesis_gap(&self, m: i64, n: i64, tr: Truncation) -> Result<f64> {
        let (r1, r2) = self.product_ratios(self.anchors.value(m)?, self.anchors.value(n)?, tr)?;
        Ok(Residual::between(r1, r2).rel())
    }
}

/// Outcome of the `h(M)` extrapolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitEstimate {
    pub value: Scalar,
    /// Relative gap between the two highest extrapolation orders.
    pub last_change: f64,
}

/// Starting perturbation and number of halvings for the `h(M)` limit.
pub const H_EPS0: f64 = 0.005;
pub const H_LEVELS: usize = 6;
/// Successive extrapolants must agree to this relative tolerance.
pub const H_CONVERGENCE: f64 = 1e-6;

/// `h(M) = lim_{N -> M} (R1 - R2) / g(A_M, A_N)`, evaluated at
/// `A_N = A_M (1 + eps)` for halving `eps` and Richardson-extrapolated.
pub fn bilateral_h(setup: &BilateralSetup, m: i64, tr: Truncation) -> Result<LimitEstimate> {
    let am = setup.anchors.value(m)?;
    let mut table: Vec<Vec<Scalar>> = Vec::new();
    let mut eps = H_EPS0;
    for level in 0..H_LEVELS {
        let an = am * (1.0 + eps);
        let (r1, r2) = setup.product_ratios(am, an, tr)?;
        let gmn = nonzero(setup.pair.eval_g(am, an, &setup.env)?, || "g(A_M, A_N)".into())?;
        let mut row = vec![(r1 - r2) / gmn];
        for k in 1..=level {
            let w = 2f64.powi(k as i32);
            let v = (row[k - 1] * w - table[level - 1][k - 1]) / (w - 1.0);
            row.push(v);
        }
        table.push(row);
        eps /= 2.0;
    }
    // error estimate: the two highest orders on the finest level
    let last = table[H_LEVELS - 1][H_LEVELS - 1];
    let prev = table[H_LEVELS - 1][H_LEVELS - 2];
    let change = Residual::between(last, prev).rel();
    if !(change <= H_CONVERGENCE) {
        return Err(FgError::NonconvergentLimit(change));
    }
    Ok(LimitEstimate { value: last, last_change: change })
}

/// Stop a bilateral sum once the outermost terms fall below this fraction
/// of the largest term seen.
pub const DECAY_GATE: f64 = 1e-10;

/// Terms of a truncated bilateral sum over `-kmax..=kmax`.
struct Truncated {
    sum: Scalar,
    /// Largest term magnitude.
    biggest: f64,
    /// Largest magnitude among the terms at `k = +-kmax`.
    edge: f64,
}

impl Truncated {
    /// Outermost terms below `DECAY_GATE` times the largest term.
    fn decayed(&self) -> bool {
        self.edge <= DECAY_GATE * self.biggest.max(f64::MIN_POSITIVE)
    }
}

fn truncated_sum<F>(kmax: i64, mut term: F) -> Result<Truncated>
where
    F: FnMut(i64) -> Result<Scalar>,
{
    let mut out = Truncated { sum: ZERO, biggest: 0.0, edge: 0.0 };
    for k in -kmax..=kmax {
        let t = term(k)?;
        out.biggest = out.biggest.max(t.norm());
        if k.abs() == kmax {
            out.edge = out.edge.max(t.norm());
        }
        out.sum += t;
    }
    Ok(out)
}

/// `h(M)` as the bilateral sum `sum_k f(a_k,b_k) / (f(a_k,A_M) g(b_k,A_M))`,
/// the diagonal of `P G` computed without any limit.
pub fn bilateral_h_direct(setup: &BilateralSetup, m: i64, tr: Truncation) -> Result<Scalar> {
    let am = setup.anchors.value(m)?;
    let e = &setup.env;
    let p = &setup.pair;
    let t = truncated_sum(tr.series_terms as i64, |k| {
        let (ak, bk) = (setup.as_.value(k)?, setup.bs.value(k)?);
        let den = p.eval_f(ak, am, e)? * p.eval_g(bk, am, e)?;
        Ok(p.eval_f(ak, bk, e)? / nonzero(den, || format!("direct h term k = {k}"))?)
    })?;
    if !t.decayed() {
        return Err(FgError::TruncationInsufficient { tail: t.edge / t.biggest, tol: DECAY_GATE });
    }
    Ok(t.sum)
}

/// Checks `sum_k F_{n,k} G_{k,m} = delta_{n,m}` for `|n|, |m| <= window`,
/// with `F_{n,k} = f(a_k,b_k)/h(n) prod_1^{k-1} f(a_j,A_n) / prod_1^k g(b_j,A_n)`
/// and `G_{k,m} = prod_1^{k-1} g(b_j,A_m) / prod_1^k f(a_j,A_m)`.
pub fn verify_bilateral_inverse(setup: &BilateralSetup, window: i64, tr: Truncation, tol: f64) -> Result<VerificationReport> {
    let start = Stopwatch::start();
    let mut tally = Tally::default();
    let mut gate_ok = true;
    let e = &setup.env;
    let p = &setup.pair;
    for n in -window..=window {
        let h = bilateral_h(setup, n, tr)?.value;
        let an = setup.anchors.value(n)?;
        for m in -window..=window {
            let am = setup.anchors.value(m)?;
            let ratio = |j: i64| -> Result<Scalar> {
                let (aj, bj) = (setup.as_.value(j)?, setup.bs.value(j)?);
                let num = p.eval_f(aj, an, e)? * p.eval_g(bj, am, e)?;
                let den = p.eval_g(bj, an, e)? * p.eval_f(aj, am, e)?;
                Ok(num / nonzero(den, || format!("bilateral ratio j = {j}"))?)
            };
            let t = truncated_sum(tr.series_terms as i64, |k| {
                let (ak, bk) = (setup.as_.value(k)?, setup.bs.value(k)?);
                let prod = gen_product(ratio, 1, k - 1)?;
                let den = p.eval_g(bk, an, e)? * p.eval_f(ak, am, e)?;
                Ok(p.eval_f(ak, bk, e)? * prod / nonzero(den, || format!("bilateral term k = {k}"))? / h)
            })?;
            gate_ok &= t.decayed();
            let delta = if n == m { ONE } else { ZERO };
            let r = Residual { abs: (t.sum - delta).norm(), scale: t.biggest.max(1.0) };
            tally.push(r);
            tally.count();
        }
    }
    let detail = format!("window {window}, K = {}, decay gate {}", tr.series_terms, if gate_ok { "met" } else { "missed" });
    let mut rep = tally.into_report("bilateral_inversion", tol, 0, start.ms(), detail);
    if !gate_ok {
        rep.status = crate::report::Status::Fail;
    }
    Ok(rep)
}

/// Parameters of Schlosser's bilateral inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchlosserParams {
    pub a: Scalar,
    pub b: Scalar,
    pub c: Scalar,
    pub q: Scalar,
}

impl Default for SchlosserParams {
    fn default() -> Self {
        SchlosserParams {
            a: Scalar::new(0.31, 0.0),
            b: Scalar::new(0.17, 0.0),
            c: Scalar::new(0.23, 0.0),
            q: Scalar::new(0.4, 0.0),
        }
    }
}

impl SchlosserParams {
    /// `(q, q, aq, q/a, aq/bc, bcq/a, cq/b, bq/c; q)_inf /
    ///  (aq/b, bq/a, aq/c, cq/a, bq, q/b, cq, q/c; q)_inf`.
    pub fn omega(&self, tr: Truncation) -> Result<Scalar> {
        let SchlosserParams { a, b, c, q } = *self;
        let num = qpochhammer_inf_many(&[q, q, a * q, q / a, a * q / (b * c), b * c * q / a, c * q / b, b * q / c], q, tr)?;
        let den = qpochhammer_inf_many(&[a * q / b, b * q / a, a * q / c, c * q / a, b * q, q / b, c * q, q / c], q, tr)?;
        Ok(num / nonzero(den, || "omega denominator".into())?)
    }

    /// The orthogonal-pair setup that produces this inversion:
    /// `f = g = (y - x)(1 - (a/(bc)) x y)`, `a_j = b q^j`, `b_j = c q^j`, `A_n = q^{-n}`.
    pub fn setup(&self) -> BilateralSetup {
        let SchlosserParams { a, b, c, q } = *self;
        let pair = crate::pairs::pair_s2();
        let env = ParamEnv::new().with("d", b * c / a);
        BilateralSetup {
            pair,
            env,
            as_: IndexedSequence::geometric(b, q),
            bs: IndexedSequence::geometric(c, q),
            anchors: IndexedSequence::geometric(ONE, q.inv()),
        }
    }

    /// Closed form of `h(M)` for [`Self::setup`]:
    /// `q^{3M}(c-b)(1-a)(1-bc/a) Omega / ((1-b)(1-c)(1-a/b)(1-a/c)(1-bc q^{2M}/a))`.
    pub fn h_closed_form(&self, m: i64, tr: Truncation) -> Result<Scalar> {
        let SchlosserParams { a, b, c, q } = *self;
        let num = q.powi(3 * m as i32) * (c - b) * (1.0 - a) * (1.0 - b * c / a) * self.omega(tr)?;
        let den = (1.0 - b) * (1.0 - c) * (1.0 - a / b) * (1.0 - a / c) * (1.0 - b * c * q.powi(2 * m as i32) / a);
        Ok(num / nonzero(den, || "h closed form".into())?)
    }

    /// The `h(M)` expression as it is usually quoted for this configuration:
    /// `(q,q,aq,q/a,aq/bc,bcq/a,cq/b,bq/c;q)_inf q^{3M}(1-bc/a)(1-a/(cq^M))(1-a/(bq^M))
    ///  / ((1-b)(1-a)(1-a/b)(1-a/c)(1-bcq^{2M}/a))`. It does not match the
    /// limit; kept to document the discrepancy.
    pub fn h_quoted_form(&self, m: i64, tr: Truncation) -> Result<Scalar> {
        let SchlosserParams { a, b, c, q } = *self;
        let qm = q.powi(m as i32);
        let pref = qpochhammer_inf_many(&[q, q, a * q, q / a, a * q / (b * c), b * c * q / a, c * q / b, b * q / c], q, tr)?;
        let num = pref * q.powi(3 * m as i32) * (1.0 - b * c / a) * (1.0 - a / (c * qm)) * (1.0 - a / (b * qm));
        let den = (1.0 - b) * (1.0 - a) * (1.0 - a / b) * (1.0 - a / c) * (1.0 - b * c * qm * qm / a);
        Ok(num / nonzero(den, || "quoted h".into())?)
    }
}

/// `(A_{n,k}, B_{n,k})` of Schlosser's bilateral inversion.
pub fn schlosser_entries(sp: &SchlosserParams, n: i64, k: i64, tr: Truncation) -> Result<(Scalar, Scalar)> {
    let SchlosserParams { a, b, c, q } = *sp;
    let omega = sp.omega(tr)?;
    let a_nk = omega.inv() * (1.0 - b * c * q.powi(2 * n as i32) / a) / (1.0 - b * c / a)
        * qpochhammer_ratio(b, c * q, q, n + k)?
        * qpochhammer_ratio(a / c, a * q / b, q, k - n)?;
    let b_nk = (1.0 - a * q.powi(2 * n as i32)) / (1.0 - a)
        * qpochhammer_ratio(c, b * q, q, n + k)?
        * qpochhammer_ratio(a / b, a * q / c, q, n - k)?
        * q.powi((n - k) as i32);
    Ok((a_nk, b_nk))
}

/// `sum_{k=-K}^{K} A_{n,k} B_{k,m}` and the largest magnitude among the
/// two outermost terms, which bounds the neglected tail up to a factor
/// `q / (1 - q)` for real `0 < q < 1`.
pub fn schlosser_product(sp: &SchlosserParams, n: i64, m: i64, kmax: i64, tr: Truncation) -> Result<(Scalar, f64)> {
    let t = truncated_sum(kmax, |k| {
        let (a_nk, _) = schlosser_entries(sp, n, k, tr)?;
        let (_, b_km) = schlosser_entries(sp, k, m, tr)?;
        Ok(a_nk * b_km)
    })?;
    Ok((t.sum, t.edge))
}

fn tq(x: Scalar, q: Scalar, tr: Truncation) -> Result<Scalar> {
    Ok(qpochhammer_inf(x, q, tr)? * qpochhammer_inf(q / x, q, tr)?)
}

/// The three terms `(t1, t2, rhs)` of the three-term theta transformation
/// `T(1/b)T(1/c)T(1/d)T(bcd/a^2) - T(b/a)T(c/a)T(d/a)T(a/(bcd))
///  = -(1/(bcd)) T(a)T(bc/a)T(bd/a)T(cd/a)` with `T(x) = (x, q/x; q)_inf`.
pub fn three_term_theta_terms(a: Scalar, b: Scalar, c: Scalar, d: Scalar, q: Scalar, tr: Truncation) -> Result<(Scalar, Scalar, Scalar)> {
    let t = |x: Scalar| tq(x, q, tr);
    let t1 = t(b.inv())? * t(c.inv())? * t(d.inv())? * t(b * c * d / (a * a))?;
    let t2 = t(b / a)? * t(c / a)? * t(d / a)? * t(a / (b * c * d))?;
    let rhs = -(b * c * d).inv() * t(a)? * t(b * c / a)? * t(b * d / a)? * t(c * d / a)?;
    Ok((t1, t2, rhs))
}

/// Relative residual of the three-term theta transformation.
pub fn three_term_theta_residual(a: Scalar, b: Scalar, c: Scalar, d: Scalar, q: Scalar, tr: Truncation) -> Result<f64> {
    let (t1, t2, rhs) = three_term_theta_terms(a, b, c, d, q, tr)?;
    Ok(Residual::of_terms(t1 - t2 - rhs, &[t1, t2, rhs]).rel())
}

/// The same transformation as it is commonly quoted:
///
/// ```text
/// (aq/b,bq/a,aq/c,cq/a,bq,q/b,cq,q/c)(1/b,1/c,1/d,bcd/a^2)
///   - (aq/b,aq/c,aq/d,bcdq/a)(b/a,c/a,d/a,a/bcd)
///   = (aq,q/a,aq/bc,bcq/a,aq/bd,bdq/a,cdq/a,aq/cd)
/// ```
///
/// It does not hold; kept to document the discrepancy.
pub fn three_term_theta_quoted_residual(a: Scalar, b: Scalar, c: Scalar, d: Scalar, q: Scalar, tr: Truncation) -> Result<f64> {
    let p = |xs: &[Scalar]| qpochhammer_inf_many(xs, q, tr);
    let t1 = p(&[a * q / b, b * q / a, a * q / c, c * q / a, b * q, q / b, c * q, q / c])? * p(&[b.inv(), c.inv(), d.inv(), b * c * d / (a * a)])?;
    let t2 = p(&[a * q / b, a * q / c, a * q / d, b * c * d * q / a])? * p(&[b / a, c / a, d / a, a / (b * c * d)])?;
    let rhs = p(&[a * q, q / a, a * q / (b * c), b * c * q / a, a * q / (b * d), b * d * q / a, c * d * q / a, a * q / (c * d)])?;
    Ok(Residual::of_terms(t1 - t2 - rhs, &[t1, t2, rhs]).rel())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairs::{pair_c2, pair_s1};
    use crate::re;

    fn lattice() -> (IndexedSequence, IndexedSequence) {
        (IndexedSequence::affine(re(10.0), re(1.0)), IndexedSequence::affine(re(0.0), re(1.0)))
    }

    #[test]
    fn hand_entries() {
        let (xs, bs) = lattice();
        let p = pair_s1();
        let env = ParamEnv::new();
        let f = build_f(&p, &env, &xs, &bs, (0, 3), (0, 3)).unwrap();
        let g = build_g(&p, &env, &xs, &bs, (0, 3), (0, 3)).unwrap();
        assert!((f.get(2, 0).unwrap() - re(55.0)).norm() < 1e-12);
        assert!((g.get(1, 0).unwrap() - re(-10.0)).norm() < 1e-12);
        for n in 0..=3 {
            assert_eq!(f.get(n, n).unwrap(), re(1.0));
            assert_eq!(g.get(n, n).unwrap(), re(1.0));
        }
        assert_eq!(f.get(0, 2).unwrap(), re(0.0));
        assert_eq!(g.get(1, 3).unwrap(), re(0.0));
    }

    #[test]
    fn one_by_one_is_identity() {
        let (xs, bs) = lattice();
        let p = pair_s1();
        let f = build_f(&p, &ParamEnv::new(), &xs, &bs, (4, 4), (4, 4)).unwrap();
        assert_eq!(f.entries, vec![re(1.0)]);
        assert!(verify_inverse(&f, &f, 0.0).passed());
    }

    #[test]
    fn c2_geometric_window() {
        let p = pair_c2();
        let env = p.env(&ParamEnv::new());
        let xs = IndexedSequence::geometric(re(0.3), re(1.1));
        let bs = IndexedSequence::geometric(re(0.7), re(1.3));
        let f = build_f(&p, &env, &xs, &bs, (0, 9), (0, 9)).unwrap();
        let g = build_g(&p, &env, &xs, &bs, (0, 9), (0, 9)).unwrap();
        let rep = verify_inverse(&f, &g, 1e-7);
        assert!(rep.passed(), "{}", rep.to_line());
    }

    #[test]
    fn coincident_nodes_are_poles() {
        let p = pair_s1();
        let xs = IndexedSequence::affine(re(10.0), re(1.0));
        let bs = IndexedSequence::constant(re(1.0));
        let r = build_f(&p, &ParamEnv::new(), &xs, &bs, (0, 2), (0, 2));
        assert!(matches!(r, Err(FgError::Pole(_))));
    }

    #[test]
    fn zero_sum_small_cases() {
        let (xs, bs) = lattice();
        let p = pair_s1();
        for (m, n, tol) in [(2, 1, 1e-12), (0, 1, 1e-13)] {
            let t = zero_sum_terms(&p, &ParamEnv::new(), &xs, &bs, m, n).unwrap();
            let r = Residual::of_terms(t.iter().sum(), &t);
            assert!(r.rel() <= tol, "({m},{n}) {}", r.rel());
        }
        assert!(zero_sum_terms(&p, &ParamEnv::new(), &xs, &bs, 1, 0).is_err());
    }

    #[test]
    fn sequence_kinds() {
        let t = IndexedSequence::table(-1, vec![re(1.0), re(2.0)]);
        assert_eq!(t.value(0).unwrap(), re(2.0));
        assert_eq!(t.value(1), Err(FgError::IndexOutOfWindow(1, 1)));
        let g = IndexedSequence::shifted_geometric(re(2.0), re(0.5), re(1.0));
        assert_eq!(g.value(-1).unwrap(), re(5.0));
        assert_eq!(g.shifted(2).value(-3).unwrap(), re(5.0));
    }

    #[test]
    fn schlosser_diagonal_structure() {
        let sp = SchlosserParams::default();
        let tr = Truncation::default();
        let (_, b22) = schlosser_entries(&sp, 2, 2, tr).unwrap();
        let SchlosserParams { a, b, c, q } = sp;
        let want = (1.0 - a * q.powi(4)) / (1.0 - a) * crate::qseries::qpochhammer(c, q, 4).unwrap()
            / crate::qseries::qpochhammer(b * q, q, 4).unwrap();
        assert!((b22 - want).norm() < 1e-13);
    }

    #[test]
    fn closed_h_matches_direct_sum() {
        let sp = SchlosserParams::default();
        let tr = Truncation::default();
        let setup = sp.setup();
        for m in [-1, 0, 2] {
            let direct = bilateral_h_direct(&setup, m, tr).unwrap();
            let closed = sp.h_closed_form(m, tr).unwrap();
            assert!(Residual::between(direct, closed).rel() < 1e-10, "M = {m}");
        }
    }

    #[test]
    fn matrix_json_shape() {
        let m = MatrixWindow::zeros((0, 1), (2, 4));
        let v = m.to_json();
        assert_eq!(v["rows"], json!([0, 1]));
        assert_eq!(v["entries"].as_array().unwrap().len(), 6);
    }
}
