//! The bilateral `(f, g)`-summation
//!
//! ```text
//! sum_{k=-n}^{m} f(a_k,b_k) g(c_k,d_k) prod_1^{k-1} X_j / prod_1^k Y_j
//!     = prod_1^m X_j/Y_j - prod_{-n}^0 Y_j/X_j
//! ```
//!
//! with `X_j = f(a_j,c_j) g(b_j,d_j)` and `Y_j = f(a_j,d_j) g(b_j,c_j)`.
//! For `k <= 0` the product ratio is evaluated as `prod_{k+1}^0 Y / prod_k^0 X`,
//! which is the same quantity under the reciprocal product convention but
//! stays finite when some `Y_j` with `j <= 0` vanishes.

use crate::inversion::IndexedSequence;
use crate::pairs::{FunctionPair, ParamEnv};
use crate::qseries::gen_product;
use crate::report::{Residual, Status, Tally, VerificationReport, Stopwatch};
use crate::{FgError, Result, Scalar, POLE_EPS};
use std::fmt;
use std::sync::Arc;

pub type TermFn = Arc<dyn Fn(i64) -> Result<Scalar> + Send + Sync>;
pub type RangeFn = Arc<dyn Fn(i64, i64) -> Result<Scalar> + Send + Sync>;

/// An independently coded closed form of a specialized identity.
#[derive(Clone)]
pub struct Reference {
    /// Summand of the specialized display, indexed like the generic sum.
    pub term: TermFn,
    /// Closed form of the display for the range `-n..=m`.
    pub rhs: RangeFn,
    /// The display is one-sided and only applies at `n = 0`.
    pub unilateral: bool,
}

impl Reference {
    pub fn new<T, R>(term: T, rhs: R, unilateral: bool) -> Self
    where
        T: Fn(i64) -> Result<Scalar> + Send + Sync + 'static,
        R: Fn(i64, i64) -> Result<Scalar> + Send + Sync + 'static,
    {
        Reference { term: Arc::new(term), rhs: Arc::new(rhs), unilateral }
    }
}

/// One summation identity with concrete sequences and range.
#[derive(Clone)]
pub struct SummationInstance {
    pub name: String,
    pub pair: FunctionPair,
    pub env: ParamEnv,
    pub a: IndexedSequence,
    pub b: IndexedSequence,
    pub c: IndexedSequence,
    pub d: IndexedSequence,
    pub m: i64,
    pub n: i64,
    /// Pair parameters that vary with the summation index.
    pub index_params: Vec<(String, IndexedSequence)>,
    pub reference: Option<Reference>,
}

impl fmt::Debug for SummationInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SummationInstance")
            .field("name", &self.name)
            .field("pair", &self.pair.name)
            .field("m", &self.m)
            .field("n", &self.n)
            .finish()
    }
}

impl SummationInstance {
    /// Builds an instance and checks that no divisor vanishes on `-n..=m`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: &str,
        pair: FunctionPair,
        env: ParamEnv,
        seqs: [IndexedSequence; 4],
        m: i64,
        n: i64,
    ) -> Result<Self> {
        let [a, b, c, d] = seqs;
        let inst = SummationInstance {
            name: name.to_string(),
            pair,
            env,
            a,
            b,
            c,
            d,
            m,
            n,
            index_params: Vec::new(),
            reference: None,
        };
        inst.check()?;
        Ok(inst)
    }

    pub fn with_index_param(mut self, key: &str, seq: IndexedSequence) -> Result<Self> {
        self.index_params.push((key.to_string(), seq));
        self.check()?;
        Ok(self)
    }

    pub fn with_reference(mut self, r: Reference) -> Self {
        self.reference = Some(r);
        self
    }

    /// Same instance on another range, re-checked for poles.
    pub fn with_range(&self, m: i64, n: i64) -> Result<Self> {
        let mut out = self.clone();
        out.m = m;
        out.n = n;
        out.check()?;
        Ok(out)
    }

    /// Sequences shifted by `s` (`k -> k + s`), same range.
    pub fn shifted(&self, s: i64) -> Result<Self> {
        let mut out = self.clone();
        out.a = self.a.shifted(s);
        out.b = self.b.shifted(s);
        out.c = self.c.shifted(s);
        out.d = self.d.shifted(s);
        out.index_params = self.index_params.iter().map(|(k, v)| (k.clone(), v.shifted(s))).collect();
        out.reference = None;
        out.check()?;
        Ok(out)
    }

    fn check(&self) -> Result<()> {
        if self.m < 0 || self.n < 0 {
            return Err(FgError::Config(format!("{}: m and n must be nonnegative", self.name)));
        }
        for j in 1..=self.m {
            if self.y(j)?.norm() <= POLE_EPS {
                return Err(FgError::Pole(format!("{}: Y_{j} vanishes", self.name)));
            }
        }
        for j in -self.n..=0 {
            if self.x(j)?.norm() <= POLE_EPS {
                return Err(FgError::Pole(format!("{}: X_{j} vanishes", self.name)));
            }
        }
        Ok(())
    }

    /// Parameter bindings at index `k`.
    pub fn env_at(&self, k: i64) -> Result<ParamEnv> {
        if self.index_params.is_empty() {
            return Ok(self.env.clone());
        }
        let mut e = self.env.clone();
        for (key, seq) in &self.index_params {
            e.set(key, seq.value(k)?);
        }
        Ok(e)
    }

    fn f(&self, k: i64, x: Scalar, y: Scalar) -> Result<Scalar> {
        self.pair.eval_f(x, y, &self.env_at(k)?)
    }

    fn g(&self, k: i64, x: Scalar, y: Scalar) -> Result<Scalar> {
        self.pair.eval_g(x, y, &self.env_at(k)?)
    }

    /// `X_j = f(a_j, c_j) g(b_j, d_j)`.
    pub fn x(&self, j: i64) -> Result<Scalar> {
        let (a, b, c, d) = (self.a.value(j)?, self.b.value(j)?, self.c.value(j)?, self.d.value(j)?);
        Ok(self.f(j, a, c)? * self.g(j, b, d)?)
    }

    /// `Y_j = f(a_j, d_j) g(b_j, c_j)`.
    pub fn y(&self, j: i64) -> Result<Scalar> {
        let (a, b, c, d) = (self.a.value(j)?, self.b.value(j)?, self.c.value(j)?, self.d.value(j)?);
        Ok(self.f(j, a, d)? * self.g(j, b, c)?)
    }

    /// The `k`-th summand of the left side.
    pub fn summand(&self, k: i64) -> Result<Scalar> {
        let (a, b, c, d) = (self.a.value(k)?, self.b.value(k)?, self.c.value(k)?, self.d.value(k)?);
        let lead = self.f(k, a, b)? * self.g(k, c, d)?;
        let ratio = if k >= 1 {
            gen_product(|j| self.x(j), 1, k - 1)? / divisor(gen_product(|j| self.y(j), 1, k)?, k)?
        } else {
            gen_product(|j| self.y(j), k + 1, 0)? / divisor(gen_product(|j| self.x(j), k, 0)?, k)?
        };
        Ok(lead * ratio)
    }

    pub fn summands(&self) -> Result<Vec<Scalar>> {
        (-self.n..=self.m).map(|k| self.summand(k)).collect()
    }
}

// individual factors are screened at construction; products of many small
// factors may legitimately be tiny, so only exact zeros are rejected here
fn divisor(v: Scalar, k: i64) -> Result<Scalar> {
    if v.norm() == 0.0 || !v.norm().is_finite() {
        Err(FgError::Pole(format!("summand k = {k}")))
    } else {
        Ok(v)
    }
}

/// Left side: the truncated bilateral sum.
pub fn lhs_sum(inst: &SummationInstance) -> Result<Scalar> {
    Ok(inst.summands()?.iter().sum())
}

/// Right side: `prod_1^m X/Y - prod_{-n}^0 Y/X`.
pub fn rhs_products(inst: &SummationInstance) -> Result<Scalar> {
    let upper = gen_product(|j| Ok(inst.x(j)? / inst.y(j)?), 1, inst.m)?;
    let lower = gen_product(|j| Ok(inst.y(j)? / inst.x(j)?), -inst.n, 0)?;
    Ok(upper - lower)
}

/// Residuals of the specialized display against itself and against the
/// generic right side. `None` when the display does not apply at this range.
pub struct ReferenceCheck {
    pub display: Residual,
    pub link: Residual,
}

pub fn reference_check(inst: &SummationInstance, rhs_generic: Scalar) -> Result<Option<ReferenceCheck>> {
    let Some(r) = &inst.reference else { return Ok(None) };
    if r.unilateral && inst.n != 0 {
        return Ok(None);
    }
    let terms: Vec<Scalar> = (-inst.n..=inst.m).map(|k| (r.term)(k)).collect::<Result<_>>()?;
    let disp_lhs: Scalar = terms.iter().sum();
    let disp_rhs = (r.rhs)(inst.m, inst.n)?;
    // the display is the generic identity scaled by a constant; fix the
    // constant from the largest generic summand
    let generic = inst.summands()?;
    let (idx, _) = generic
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.norm().total_cmp(&y.1.norm()))
        .expect("nonempty range");
    let lambda = terms[idx] / divisor(generic[idx], idx as i64 - inst.n)?;
    Ok(Some(ReferenceCheck {
        display: Residual::between(disp_lhs, disp_rhs),
        link: Residual::between(disp_rhs, lambda * rhs_generic),
    }))
}

/// Compares both sides, and the specialized display when there is one.
pub fn verify_summation(inst: &SummationInstance, tol: f64) -> VerificationReport {
    let start = Stopwatch::start();
    let mut tally = Tally::default();
    let outcome = (|| -> Result<String> {
        let lhs = lhs_sum(inst)?;
        let rhs = rhs_products(inst)?;
        let main = Residual::between(lhs, rhs);
        tally.push(main);
        tally.count();
        let mut detail = format!("m={} n={} main={:.2e}", inst.m, inst.n, main.rel());
        if let Some(rc) = reference_check(inst, rhs)? {
            tally.push(rc.display);
            tally.push(rc.link);
            detail.push_str(&format!(" display={:.2e} link={:.2e}", rc.display.rel(), rc.link.rel()));
        }
        Ok(detail)
    })();
    let ms = start.ms();
    match outcome {
        Ok(detail) => tally.into_report(&inst.name, tol, 0, ms, detail),
        Err(e) => {
            let mut rep = tally.into_report(&inst.name, tol, 0, ms, format!("m={} n={} error: {e}", inst.m, inst.n));
            rep.status = Status::Fail;
            rep
        }
    }
}

/// Relative gap between the step `rhs(m) - rhs(m-1)` and the explicit `k = m`
/// summand. The step is isolated with the common prefix factored out,
/// `prod_1^{m-1} X/Y * (X_m - Y_m)/Y_m`; subtracting the two right sides
/// directly loses every digit once the tail terms become small.
pub fn telescoping_residual(inst: &SummationInstance, m: i64) -> Result<Residual> {
    let hi = inst.with_range(m, inst.n)?;
    let prefix = gen_product(|j| Ok(inst.x(j)? / inst.y(j)?), 1, m - 1)?;
    let (xm, ym) = (inst.x(m)?, inst.y(m)?);
    let step = prefix * (xm - ym) / divisor(ym, m)?;
    Ok(Residual::between(step, hi.summand(m)?))
}

/// The same step by direct subtraction of consecutive right sides.
pub fn telescoping_residual_direct(inst: &SummationInstance, m: i64) -> Result<Residual> {
    let hi = inst.with_range(m, inst.n)?;
    let lo = inst.with_range(m - 1, inst.n)?;
    let step = rhs_products(&hi)? - rhs_products(&lo)?;
    Ok(Residual::between(step, hi.summand(m)?))
}

/// One-sided specialization `c_j = b_0`, `d_j = x`, `n = 0`, whose right side
/// collapses to `prod_1^m f(a_j,b_0) g(b_j,x) / (g(b_j,b_0) f(a_j,x))`.
pub fn unilateral_instance(
    pair: FunctionPair,
    env: ParamEnv,
    as_: IndexedSequence,
    bs: IndexedSequence,
    x: Scalar,
    m: i64,
) -> Result<SummationInstance> {
    let b0 = bs.value(0)?;
    let name = format!("{}_unilateral", pair.name);
    let (p, e, a2, b2) = (pair.clone(), env.clone(), as_.clone(), bs.clone());
    let term = move |k: i64| -> Result<Scalar> {
        let f = |u, v| p.eval_f(u, v, &e);
        let g = |u, v| p.eval_g(u, v, &e);
        let lead = f(a2.value(k)?, b2.value(k)?)? / f(a2.value(0)?, b0)?;
        let num = gen_product(|j| Ok(f(a2.value(j)?, b0)? * g(b2.value(j)?, x)?), 0, k - 1)?;
        let den = gen_product(|j| Ok(g(b2.value(j)?, b0)? * f(a2.value(j)?, x)?), 1, k)?;
        Ok(lead * num / den)
    };
    let (p, e, a2, b2) = (pair.clone(), env.clone(), as_.clone(), bs.clone());
    let rhs = move |m: i64, _n: i64| -> Result<Scalar> {
        gen_product(
            |j| {
                let (aj, bj) = (a2.value(j)?, b2.value(j)?);
                Ok(p.eval_f(aj, b0, &e)? * p.eval_g(bj, x, &e)? / (p.eval_g(bj, b0, &e)? * p.eval_f(aj, x, &e)?))
            },
            1,
            m,
        )
    };
    let inst = SummationInstance::new(
        &name,
        pair,
        env,
        [as_, bs, IndexedSequence::constant(b0), IndexedSequence::constant(x)],
        m,
        0,
    )?;
    Ok(inst.with_reference(Reference::new(term, rhs, true)))
}
