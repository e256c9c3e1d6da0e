//! q-shifted factorials, the three-case product convention, theta
//! functions and the Jacobi triple product.

use crate::{FgError, Result, Scalar, POLE_EPS};
use serde::{Deserialize, Serialize};

/// Truncation budget for infinite products and bilateral sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    /// Number of factors kept in `(a;q)_inf`.
    pub product_terms: usize,
    /// Bilateral sums run over `-series_terms..=series_terms`.
    pub series_terms: usize,
    /// Largest allowed magnitude of the last retained factor deviation or term.
    pub tail_tol: f64,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation { product_terms: 80, series_terms: 60, tail_tol: 1e-12 }
    }
}

impl Truncation {
    pub fn validate(&self) -> Result<()> {
        if self.product_terms == 0 || self.series_terms == 0 || !(self.tail_tol > 0.0) {
            return Err(FgError::Config(format!("invalid truncation {self:?}")));
        }
        Ok(())
    }
}

fn check_base(q: Scalar) -> Result<()> {
    let r = q.norm();
    if !(r < 1.0) {
        return Err(FgError::BaseNotContracting(r));
    }
    Ok(())
}

/// `(a;q)_n`, with `(a;q)_{-n} = 1 / prod_{j=1}^{n} (1 - a q^{-j})` for negative `n`.
pub fn qpochhammer(a: Scalar, q: Scalar, n: i64) -> Result<Scalar> {
    let one = Scalar::new(1.0, 0.0);
    if n >= 0 {
        let mut acc = one;
        let mut aq = a;
        for _ in 0..n {
            acc *= one - aq;
            aq *= q;
        }
        Ok(acc)
    } else {
        if q.norm() == 0.0 {
            return Err(FgError::Pole("qpochhammer: q = 0 with negative n".into()));
        }
        let qinv = q.inv();
        let mut den = one;
        let mut aq = a * qinv;
        for _ in 0..(-n) {
            let f = one - aq;
            if f.norm() <= POLE_EPS {
                return Err(FgError::Pole(format!("qpochhammer({a}, {q}, {n})")));
            }
            den *= f;
            aq *= qinv;
        }
        Ok(den.inv())
    }
}

/// `(a;q)_n / (b;q)_n` computed factor by factor, which avoids overflow of
/// the individual products when `|n|` is large. Negative `n` follows the
/// reciprocal extension.
pub fn qpochhammer_ratio(a: Scalar, b: Scalar, q: Scalar, n: i64) -> Result<Scalar> {
    let one = Scalar::new(1.0, 0.0);
    let mut acc = one;
    if n >= 0 {
        let mut qi = one;
        for _ in 0..n {
            let den = one - b * qi;
            if den.norm() <= POLE_EPS {
                return Err(FgError::Pole(format!("qpochhammer_ratio denominator ({b};{q})_{n}")));
            }
            acc *= (one - a * qi) / den;
            qi *= q;
        }
    } else {
        let qinv = q.inv();
        let mut qi = qinv;
        for _ in 0..(-n) {
            let den = one - a * qi;
            if den.norm() <= POLE_EPS {
                return Err(FgError::Pole(format!("qpochhammer_ratio numerator ({a};{q})_{n}")));
            }
            acc *= (one - b * qi) / den;
            qi *= qinv;
        }
    }
    Ok(acc)
}

/// Truncated `(a;q)_inf`. Fails if the last kept factor still differs from 1
/// by more than `tail_tol`.
pub fn qpochhammer_inf(a: Scalar, q: Scalar, tr: Truncation) -> Result<Scalar> {
    check_base(q)?;
    let n = tr.product_terms.max(1);
    let tail = (a * q.powu(n as u32 - 1)).norm();
    if tail > tr.tail_tol {
        return Err(FgError::TruncationInsufficient { tail, tol: tr.tail_tol });
    }
    let one = Scalar::new(1.0, 0.0);
    let mut acc = one;
    let mut aq = a;
    for _ in 0..n {
        acc *= one - aq;
        aq *= q;
    }
    Ok(acc)
}

/// Product of several truncated infinite products, `(a1, a2, ...; q)_inf`.
pub fn qpochhammer_inf_many(args: &[Scalar], q: Scalar, tr: Truncation) -> Result<Scalar> {
    let mut acc = Scalar::new(1.0, 0.0);
    for &a in args {
        acc *= qpochhammer_inf(a, q, tr)?;
    }
    Ok(acc)
}

/// Generalized product `prod_{j=k}^{m} A_j`:
/// `A_k...A_m` when `m >= k`, `1` when `m = k - 1`, and
/// `(A_{m+1}...A_{k-1})^{-1}` when `m <= k - 2`.
pub fn gen_product<F>(mut factor: F, k: i64, m: i64) -> Result<Scalar>
where
    F: FnMut(i64) -> Result<Scalar>,
{
    let mut acc = Scalar::new(1.0, 0.0);
    if m >= k {
        for j in k..=m {
            acc *= factor(j)?;
        }
        Ok(acc)
    } else if m == k - 1 {
        Ok(acc)
    } else {
        for j in (m + 1)..k {
            let a = factor(j)?;
            if a.norm() <= POLE_EPS {
                return Err(FgError::Pole(format!("gen_product reciprocal factor at j = {j}")));
            }
            acc *= a;
        }
        Ok(acc.inv())
    }
}

/// `theta(x) = (x;q)_inf (q/x;q)_inf`.
pub fn theta(x: Scalar, q: Scalar, tr: Truncation) -> Result<Scalar> {
    check_base(q)?;
    if x.norm() == 0.0 {
        return Err(FgError::ZeroArgument);
    }
    Ok(qpochhammer_inf(x, q, tr)? * qpochhammer_inf(q / x, q, tr)?)
}

/// Absolute difference between the truncated bilateral series
/// `sum_{|i|<=N} (-1)^i q^{i(i-1)/2} x^i` and `theta(x) (q;q)_inf`.
pub fn jacobi_triple_residual(x: Scalar, q: Scalar, tr: Truncation) -> Result<f64> {
    let rhs = theta(x, q, tr)? * qpochhammer_inf(q, q, tr)?;
    let n = tr.series_terms as i64;
    let mut sum = Scalar::new(0.0, 0.0);
    for i in -n..=n {
        let sign = if i.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let e = i * (i - 1) / 2;
        sum += q.powi(e as i32) * x.powi(i as i32) * sign;
    }
    Ok((sum - rhs).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::re;

    fn close(a: Scalar, b: Scalar, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn pochhammer_small_cases() {
        let q = re(0.3);
        assert_eq!(qpochhammer(re(0.7), q, 0).unwrap(), re(1.0));
        assert!(close(qpochhammer(re(0.5), q, 2).unwrap(), re(0.425), 1e-15));
        assert!(close(qpochhammer(re(0.3), re(0.5), -1).unwrap(), re(2.5), 1e-15));
    }

    #[test]
    fn negative_pole_is_reported() {
        // a q^{-1} = 1
        let r = qpochhammer(re(0.5), re(0.5), -3);
        assert!(matches!(r, Err(FgError::Pole(_))));
    }

    #[test]
    fn ratio_matches_quotient() {
        let (a, b, q) = (Scalar::new(0.3, 0.1), re(0.7), re(0.4));
        for n in -6..=6 {
            let direct = qpochhammer(a, q, n).unwrap() / qpochhammer(b, q, n).unwrap();
            let r = qpochhammer_ratio(a, b, q, n).unwrap();
            assert!(close(direct, r, 1e-12 * direct.norm().max(1.0)), "n = {n}");
        }
    }

    #[test]
    fn infinite_product_edges() {
        let tr = Truncation::default();
        assert_eq!(qpochhammer_inf(re(0.0), re(0.3), tr).unwrap(), re(1.0));
        assert_eq!(qpochhammer_inf(re(1.0), re(0.3), tr).unwrap(), re(0.0));
        assert!(matches!(qpochhammer_inf(re(0.2), re(1.0), tr), Err(FgError::BaseNotContracting(_))));
        let short = Truncation { product_terms: 5, ..tr };
        assert!(matches!(
            qpochhammer_inf(re(0.5), re(0.5), short),
            Err(FgError::TruncationInsufficient { .. })
        ));
    }

    #[test]
    fn doubled_truncation_agrees() {
        let t64 = Truncation { product_terms: 64, ..Default::default() };
        let t128 = Truncation { product_terms: 128, ..Default::default() };
        let a = qpochhammer_inf(re(0.5), re(0.5), t64).unwrap();
        let b = qpochhammer_inf(re(0.5), re(0.5), t128).unwrap();
        assert!(close(a, b, 1e-12));
        let t60 = Truncation { product_terms: 60, ..Default::default() };
        let t120 = Truncation { product_terms: 120, ..Default::default() };
        let a = theta(re(0.4), re(0.3), t60).unwrap();
        let b = theta(re(0.4), re(0.3), t120).unwrap();
        assert!(close(a, b, 1e-12));
    }

    #[test]
    fn product_convention() {
        let tr = |j: i64| Ok(re(j as f64 + 1.0));
        assert_eq!(gen_product(tr, 0, 2).unwrap(), re(6.0));
        assert_eq!(gen_product(|_| Ok(re(7.0)), 5, 4).unwrap(), re(1.0));
        assert!(close(gen_product(|j| Ok(re(j as f64)), 3, 1).unwrap(), re(0.5), 1e-15));
        assert!(matches!(gen_product(|j| Ok(re(j as f64)), 2, -2), Err(FgError::Pole(_))));
    }

    #[test]
    fn theta_basics() {
        let tr = Truncation::default();
        assert_eq!(theta(re(1.0), re(0.3), tr).unwrap(), re(0.0));
        let a = theta(re(0.4), re(0.3), tr).unwrap();
        let b = theta(re(0.75), re(0.3), tr).unwrap();
        assert!(close(a, b, 1e-14));
        assert_eq!(theta(re(0.0), re(0.3), tr), Err(FgError::ZeroArgument));
    }

    #[test]
    fn triple_product_examples() {
        let t40 = Truncation { series_terms: 40, ..Default::default() };
        let t60 = Truncation { series_terms: 60, ..Default::default() };
        assert!(jacobi_triple_residual(re(1.0), re(0.3), t40).unwrap() <= 1e-12);
        assert!(jacobi_triple_residual(re(0.6), re(0.3), t40).unwrap() <= 1e-12);
        assert!(jacobi_triple_residual(re(-0.8), re(0.5), t60).unwrap() <= 1e-10);
    }
}
