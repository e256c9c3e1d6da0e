//! Truncated bilateral Laurent series in two variables and their
//! coefficient-level orthogonality criteria.
//!
//! A series `f(x, y) = sum lambda(i, j) x^i y^j` is stored on the square
//! window `[-M, M]^2`. The two constructions build self-orthogonal series
//! from a pair of univariate series, and series orthogonal to a given
//! self-orthogonal one from a pivot.

use crate::pairs::FunctionPair;
use crate::qseries::{qpochhammer_inf, Truncation};
use crate::sampling::Sampler;
use crate::{FgError, Result, Scalar};
use serde_json::{json, Value};

/// Exhaustive quadruple scans up to this window, sampled beyond.
pub const EXHAUSTIVE_WINDOW: usize = 6;
/// Quadruples drawn when the window is too large to scan exhaustively.
pub const SAMPLED_QUADRUPLES: usize = 10_000;

const ZERO: Scalar = Scalar::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct BilateralSeries2 {
    pub window: usize,
    /// Row-major over `i` then `j`, both in `-M..=M`.
    pub coeffs: Vec<Scalar>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnivariateSeries {
    pub window: usize,
    pub coeffs: Vec<Scalar>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pivot {
    pub m0: i64,
    pub k0: i64,
}

fn complex_pairs(v: &[Scalar]) -> Value {
    Value::Array(v.iter().map(|z| json!([z.re, z.im])).collect())
}

fn parse_pairs(v: &Value) -> Result<Vec<Scalar>> {
    let arr = v.as_array().ok_or_else(|| FgError::Config("coeffs must be an array".into()))?;
    arr.iter()
        .map(|p| {
            let re = p.get(0).and_then(Value::as_f64);
            let im = p.get(1).and_then(Value::as_f64);
            match (re, im) {
                (Some(re), Some(im)) => Ok(Scalar::new(re, im)),
                _ => Err(FgError::Config("coefficient must be [re, im]".into())),
            }
        })
        .collect()
}

impl UnivariateSeries {
    pub fn zeros(window: usize) -> Self {
        UnivariateSeries { window, coeffs: vec![ZERO; 2 * window + 1] }
    }

    /// Series with the given `(index, coefficient)` terms.
    pub fn from_terms(window: usize, terms: &[(i64, Scalar)]) -> Result<Self> {
        let mut s = Self::zeros(window);
        for &(i, v) in terms {
            s.set(i, v)?;
        }
        Ok(s)
    }

    fn slot(&self, i: i64) -> Option<usize> {
        let m = self.window as i64;
        (i.abs() <= m).then(|| (i + m) as usize)
    }

    /// Coefficient at `i`; zero outside the window.
    pub fn at(&self, i: i64) -> Scalar {
        self.slot(i).map(|k| self.coeffs[k]).unwrap_or(ZERO)
    }

    pub fn set(&mut self, i: i64, v: Scalar) -> Result<()> {
        let k = self.slot(i).ok_or(FgError::IndexOutOfWindow(i, 0))?;
        self.coeffs[k] = v;
        Ok(())
    }

    pub fn scaled(&self, s: Scalar) -> Self {
        UnivariateSeries { window: self.window, coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn eval(&self, x: Scalar) -> Result<Scalar> {
        if x.norm() == 0.0 {
            return Err(FgError::ZeroArgument);
        }
        let m = self.window as i64;
        Ok((-m..=m).map(|i| self.at(i) * x.powi(i as i32)).sum())
    }
}

impl BilateralSeries2 {
    pub fn zeros(window: usize) -> Self {
        let n = 2 * window + 1;
        BilateralSeries2 { window, coeffs: vec![ZERO; n * n] }
    }

    pub fn from_terms(window: usize, terms: &[(i64, i64, Scalar)]) -> Result<Self> {
        let mut s = Self::zeros(window);
        for &(i, j, v) in terms {
            s.set(i, j, v)?;
        }
        Ok(s)
    }

    fn slot(&self, i: i64, j: i64) -> Option<usize> {
        let m = self.window as i64;
        let n = 2 * m + 1;
        (i.abs() <= m && j.abs() <= m).then(|| ((i + m) * n + (j + m)) as usize)
    }

    pub fn get(&self, i: i64, j: i64) -> Result<Scalar> {
        self.slot(i, j).map(|k| self.coeffs[k]).ok_or(FgError::IndexOutOfWindow(i, j))
    }

    /// Coefficient at `(i, j)`; zero outside the window.
    pub fn at(&self, i: i64, j: i64) -> Scalar {
        self.slot(i, j).map(|k| self.coeffs[k]).unwrap_or(ZERO)
    }

    pub fn set(&mut self, i: i64, j: i64, v: Scalar) -> Result<()> {
        let k = self.slot(i, j).ok_or(FgError::IndexOutOfWindow(i, j))?;
        self.coeffs[k] = v;
        Ok(())
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<i64> {
        -(self.window as i64)..=(self.window as i64)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.norm() == 0.0)
    }

    /// `max |lambda(i,j) + lambda(j,i)|`.
    pub fn antisymmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in self.indices() {
            for j in self.indices() {
                worst = worst.max((self.at(i, j) + self.at(j, i)).norm());
            }
        }
        worst
    }

    /// All pivots `(m0, k0)` with a nonzero coefficient.
    pub fn nonzero_pivots(&self) -> Vec<Pivot> {
        let mut out = Vec::new();
        for m0 in self.indices() {
            for k0 in self.indices() {
                if self.at(m0, k0).norm() > 0.0 {
                    out.push(Pivot { m0, k0 });
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> Value {
        json!({ "window": self.window, "coeffs": complex_pairs(&self.coeffs) })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let window = v
            .get("window")
            .and_then(Value::as_u64)
            .ok_or_else(|| FgError::Config("series needs a window".into()))? as usize;
        let coeffs = parse_pairs(v.get("coeffs").unwrap_or(&Value::Null))?;
        let n = 2 * window + 1;
        if coeffs.len() != n * n {
            return Err(FgError::Config(format!("expected {} coefficients, got {}", n * n, coeffs.len())));
        }
        Ok(BilateralSeries2 { window, coeffs })
    }
}

fn check_in(s: &BilateralSeries2, idx: &[i64]) -> Result<()> {
    let m = s.window as i64;
    for &i in idx {
        if i.abs() > m {
            return Err(FgError::IndexOutOfWindow(i, i));
        }
    }
    Ok(())
}

/// `lambda(m,i)lambda(k,j) - lambda(k,i)lambda(m,j) + lambda(k,m)lambda(i,j)`.
pub fn self_orth_coeff_residual(s: &BilateralSeries2, m: i64, i: i64, j: i64, k: i64) -> Result<Scalar> {
    check_in(s, &[m, i, j, k])?;
    let l = |a, b| s.at(a, b);
    Ok(l(m, i) * l(k, j) - l(k, i) * l(m, j) + l(k, m) * l(i, j))
}

/// `c(m,i)lambda(k,j) - c(m,j)lambda(k,i) + c(i,j)lambda(k,m)` where `c`
/// are the coefficients of `g` and `lambda` those of `f`.
pub fn cross_orth_coeff_residual(
    g: &BilateralSeries2,
    f: &BilateralSeries2,
    m: i64,
    i: i64,
    j: i64,
    k: i64,
) -> Result<Scalar> {
    check_in(g, &[m, i, j, k])?;
    check_in(f, &[m, i, j, k])?;
    let c = |a, b| g.at(a, b);
    let l = |a, b| f.at(a, b);
    Ok(c(m, i) * l(k, j) - c(m, j) * l(k, i) + c(i, j) * l(k, m))
}

/// `c(m0,k0)c(i,j) - c(m0,i)c(k0,j) + c(m0,j)c(k0,i)`.
pub fn pivot_self_orth_residual(g: &BilateralSeries2, p: Pivot, i: i64, j: i64) -> Result<Scalar> {
    check_in(g, &[p.m0, p.k0, i, j])?;
    let c = |a, b| g.at(a, b);
    if c(p.m0, p.k0).norm() == 0.0 {
        return Err(FgError::ZeroPivot);
    }
    Ok(c(p.m0, p.k0) * c(i, j) - c(p.m0, i) * c(p.k0, j) + c(p.m0, j) * c(p.k0, i))
}

/// Largest residual over a quadruple scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanResult {
    pub max_abs: f64,
    /// `max_abs` divided by the product of the coefficient scales involved.
    pub max_rel: f64,
    pub quadruples: u64,
}

fn scan4<F>(window: usize, scale: f64, seed: u64, mut res: F) -> Result<ScanResult>
where
    F: FnMut(i64, i64, i64, i64) -> Result<Scalar>,
{
    let m = window as i64;
    let mut worst = 0.0f64;
    let mut n = 0u64;
    if window <= EXHAUSTIVE_WINDOW {
        for a in -m..=m {
            for b in -m..=m {
                for c in -m..=m {
                    for d in -m..=m {
                        worst = worst.max(res(a, b, c, d)?.norm());
                        n += 1;
                    }
                }
            }
        }
    } else {
        let mut s = Sampler::new(seed);
        for _ in 0..SAMPLED_QUADRUPLES {
            let (a, b, c, d) = (s.index(-m, m), s.index(-m, m), s.index(-m, m), s.index(-m, m));
            worst = worst.max(res(a, b, c, d)?.norm());
            n += 1;
        }
    }
    let rel = if scale > 0.0 { worst / scale } else { worst };
    Ok(ScanResult { max_abs: worst, max_rel: rel, quadruples: n })
}

/// Self-orthogonality criterion over all (or sampled) quadruples.
pub fn scan_self_orth(s: &BilateralSeries2, seed: u64) -> Result<ScanResult> {
    let scale = s.max_abs().powi(2);
    scan4(s.window, scale, seed, |m, i, j, k| self_orth_coeff_residual(s, m, i, j, k))
}

/// Cross criterion (`f` orthogonal to `g`) over all (or sampled) quadruples.
pub fn scan_cross_orth(g: &BilateralSeries2, f: &BilateralSeries2, seed: u64) -> Result<ScanResult> {
    let scale = g.max_abs() * f.max_abs();
    let w = g.window.min(f.window);
    scan4(w, scale, seed, |m, i, j, k| cross_orth_coeff_residual(g, f, m, i, j, k))
}

/// Pivot criterion over every `(i, j)` in the window.
pub fn scan_pivot(g: &BilateralSeries2, p: Pivot) -> Result<ScanResult> {
    let scale = g.max_abs().powi(2);
    let mut worst = 0.0f64;
    let mut n = 0;
    for i in g.indices() {
        for j in g.indices() {
            worst = worst.max(pivot_self_orth_residual(g, p, i, j)?.norm());
            n += 1;
        }
    }
    Ok(ScanResult { max_abs: worst, max_rel: if scale > 0.0 { worst / scale } else { worst }, quadruples: n })
}

/// `lambda(i,j) = p_i q_j - p_j q_i` on the smaller of the two windows.
pub fn construct_self_orthogonal(p: &UnivariateSeries, q: &UnivariateSeries) -> BilateralSeries2 {
    let w = p.window.min(q.window);
    let mut s = BilateralSeries2::zeros(w);
    let m = w as i64;
    for i in -m..=m {
        for j in -m..=m {
            let v = p.at(i) * q.at(j) - p.at(j) * q.at(i);
            s.set(i, j, v).expect("index inside window");
        }
    }
    s
}

/// Tolerance used for the self-orthogonality precondition of
/// [`construct_orthogonal_to`], relative to the squared coefficient scale.
pub const PIVOT_PRECONDITION_TOL: f64 = 1e-12;

/// `lambda(i,j) = (p_i c(m0,j) - q_i c(k0,j)) / c(m0,k0)`; the result is
/// orthogonal to `g` whenever `g` is self-orthogonal.
pub fn construct_orthogonal_to(
    g: &BilateralSeries2,
    p: &UnivariateSeries,
    q: &UnivariateSeries,
    pivot: Pivot,
) -> Result<BilateralSeries2> {
    let c0 = g.get(pivot.m0, pivot.k0)?;
    if c0.norm() == 0.0 {
        return Err(FgError::ZeroPivot);
    }
    let scan = scan_pivot(g, pivot)?;
    if scan.max_rel > PIVOT_PRECONDITION_TOL {
        return Err(FgError::NotSelfOrthogonal(scan.max_rel));
    }
    let mut f = BilateralSeries2::zeros(g.window);
    for i in g.indices() {
        for j in g.indices() {
            let v = (p.at(i) * g.at(pivot.m0, j) - q.at(i) * g.at(pivot.k0, j)) / c0;
            f.set(i, j, v)?;
        }
    }
    Ok(f)
}

/// The univariate slice `j -> c(m0, j)`.
pub fn coeff_slice(g: &BilateralSeries2, m0: i64) -> Result<UnivariateSeries> {
    g.get(m0, 0)?;
    let mut out = UnivariateSeries::zeros(g.window);
    for j in g.indices() {
        out.set(j, g.at(m0, j))?;
    }
    Ok(out)
}

/// Series of `y theta(xy) theta(x/y)` built from its even/odd generators.
///
/// `P` has `p_{2m} = q^{m^2-m} / (q;q)^2` and `Q` has `q_{2m+1} = q^{m^2}`
/// (the `Q` generator already divided by its coefficient at `x^1`).
pub fn theta_pair_series(q: Scalar, window: usize, tr: Truncation) -> Result<BilateralSeries2> {
    if window < 4 {
        return Err(FgError::Config("theta series needs window >= 4".into()));
    }
    let qq = qpochhammer_inf(q, q, tr)?;
    let norm = (qq * qq).inv();
    let w = window as i64;
    let mut p = UnivariateSeries::zeros(window);
    let mut qs = UnivariateSeries::zeros(window);
    for i in -w..=w {
        if i.rem_euclid(2) == 0 {
            let m = i / 2;
            p.set(i, q.powi((m * m - m) as i32) * norm)?;
        } else {
            let m = (i - 1).div_euclid(2);
            qs.set(i, q.powi((m * m) as i32))?;
        }
    }
    Ok(construct_self_orthogonal(&p, &qs))
}

/// `sum lambda(i,j) x^i y^j` over the window.
pub fn eval_series(s: &BilateralSeries2, x: Scalar, y: Scalar) -> Result<Scalar> {
    if x.norm() == 0.0 || y.norm() == 0.0 {
        return Err(FgError::ZeroArgument);
    }
    let m = s.window as i64;
    let xp: Vec<Scalar> = (-m..=m).map(|i| x.powi(i as i32)).collect();
    let yp: Vec<Scalar> = (-m..=m).map(|j| y.powi(j as i32)).collect();
    let mut acc = ZERO;
    for (a, xi) in xp.iter().enumerate() {
        for (b, yj) in yp.iter().enumerate() {
            let c = s.coeffs[a * yp.len() + b];
            if c.norm() != 0.0 {
                acc += c * xi * yj;
            }
        }
    }
    Ok(acc)
}

/// A function pair evaluating two series pointwise.
pub fn series_pair(name: &str, f: BilateralSeries2, g: BilateralSeries2) -> FunctionPair {
    FunctionPair::new(name, move |x, y, _| eval_series(&f, x, y), move |x, y, _| eval_series(&g, x, y))
        .poles(|x, y, _, eps| x.norm() <= eps || y.norm() <= eps)
}

/// Coefficient series of the polynomial built-in pairs, as `(name, f, g)`.
/// Parameters: `d` for S2, `a`, `b` for S3, C2, C3.
pub fn builtin_series(window: usize, d: Scalar, a: Scalar, b: Scalar) -> Result<Vec<(String, BilateralSeries2, BilateralSeries2)>> {
    let one = Scalar::new(1.0, 0.0);
    let r = b / a;
    let diff = BilateralSeries2::from_terms(window, &[(1, 0, one), (0, 1, -one)])?;
    let s2 = BilateralSeries2::from_terms(window, &[(0, 1, one), (1, 0, -one), (1, 2, -one / d), (2, 1, one / d)])?;
    let s3 = BilateralSeries2::from_terms(window, &[(1, 0, one), (0, 1, -one), (0, -1, -r), (-1, 0, r)])?;
    let c1 = BilateralSeries2::from_terms(
        window,
        &[(0, 0, one), (1, 0, 2.0 * one), (0, 1, 3.0 * one), (1, 1, -one)],
    )?;
    let c2 = BilateralSeries2::from_terms(window, &[(0, 0, one), (1, -1, -b), (1, 1, -a), (2, 0, a * b)])?;
    let c3 = BilateralSeries2::from_terms(window, &[(2, 0, one), (1, -1, r), (1, 1, one), (0, 0, r)])?;
    Ok(vec![
        ("S1".into(), diff.clone(), diff.clone()),
        ("S2".into(), s2.clone(), s2),
        ("S3".into(), s3.clone(), s3.clone()),
        ("C1".into(), c1, diff),
        ("C2".into(), c2, s3.clone()),
        ("C3".into(), c3, s3),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::re;

    fn diff(w: usize) -> BilateralSeries2 {
        BilateralSeries2::from_terms(w, &[(1, 0, re(1.0)), (0, 1, re(-1.0))]).unwrap()
    }

    #[test]
    fn difference_series_is_self_orthogonal() {
        let s = diff(3);
        assert_eq!(scan_self_orth(&s, 0).unwrap().max_abs, 0.0);
    }

    #[test]
    fn non_antisymmetric_series_detected() {
        let s = BilateralSeries2::from_terms(3, &[(1, 0, re(1.0)), (0, 1, re(-1.0)), (2, 0, re(1.0))]).unwrap();
        // only lambda(2,0) lambda(0,1) survives
        assert_eq!(self_orth_coeff_residual(&s, 2, 0, 1, 0).unwrap(), re(-1.0));
    }

    #[test]
    fn cross_hand_examples() {
        let g = diff(3);
        let f = BilateralSeries2::from_terms(3, &[(1, 2, re(1.0))]).unwrap();
        assert_eq!(cross_orth_coeff_residual(&g, &f, 1, 0, 0, 1).unwrap(), re(0.0));
        assert_ne!(cross_orth_coeff_residual(&g, &f, 1, 0, 2, 1).unwrap(), re(0.0));
    }

    #[test]
    fn out_of_window() {
        let s = diff(2);
        assert_eq!(self_orth_coeff_residual(&s, 3, 0, 0, 0), Err(FgError::IndexOutOfWindow(3, 3)));
    }

    #[test]
    fn zero_pivot() {
        let s = diff(2);
        assert_eq!(pivot_self_orth_residual(&s, Pivot { m0: 2, k0: 2 }, 0, 0), Err(FgError::ZeroPivot));
    }

    #[test]
    fn s2_pivot_and_perturbation() {
        let s = builtin_series(4, re(2.0), re(0.5), re(0.25)).unwrap().remove(1).1;
        for p in s.nonzero_pivots() {
            assert!(scan_pivot(&s, p).unwrap().max_abs <= 1e-14);
        }
        let mut bad = s.clone();
        bad.set(2, 2, bad.at(2, 2) + 1.0).unwrap();
        let worst = scan_pivot(&bad, Pivot { m0: 1, k0: 0 }).unwrap();
        assert!(worst.max_abs > 0.1);
    }

    #[test]
    fn construct_self_orthogonal_small() {
        let p = UnivariateSeries::from_terms(2, &[(1, re(1.0))]).unwrap();
        let q = UnivariateSeries::from_terms(2, &[(0, re(1.0))]).unwrap();
        assert_eq!(construct_self_orthogonal(&p, &q), diff(2));
        assert!(construct_self_orthogonal(&p, &p).is_zero());
    }

    #[test]
    fn orthogonal_to_difference_gives_c1_shape() {
        let g = diff(3);
        let p = UnivariateSeries::from_terms(3, &[(0, re(1.0))]).unwrap();
        let q = UnivariateSeries::from_terms(3, &[(0, re(3.0)), (1, re(-1.0))]).unwrap();
        let f = construct_orthogonal_to(&g, &p, &q, Pivot { m0: 1, k0: 0 }).unwrap();
        // P(x) + y Q(x)
        assert_eq!(f.at(0, 0), re(1.0));
        assert_eq!(f.at(0, 1), re(3.0));
        assert_eq!(f.at(1, 1), re(-1.0));
        assert_eq!(scan_cross_orth(&g, &f, 0).unwrap().max_abs, 0.0);
    }

    #[test]
    fn orthogonal_to_rejects_non_self_orthogonal() {
        let g = BilateralSeries2::from_terms(2, &[(1, 0, re(1.0)), (0, 1, re(-1.0)), (2, 2, re(1.0))]).unwrap();
        let p = UnivariateSeries::zeros(2);
        let r = construct_orthogonal_to(&g, &p, &p, Pivot { m0: 1, k0: 0 });
        assert!(matches!(r, Err(FgError::NotSelfOrthogonal(_))));
    }

    #[test]
    fn slices() {
        let g = diff(2);
        let s1 = coeff_slice(&g, 1).unwrap();
        assert_eq!(s1.at(0), re(1.0));
        assert_eq!(s1.coeffs.iter().filter(|c| c.norm() > 0.0).count(), 1);
        let s0 = coeff_slice(&g, 0).unwrap();
        assert_eq!(s0.at(1), re(-1.0));
        assert!(coeff_slice(&g, 3).is_err());
    }

    #[test]
    fn evaluation() {
        assert_eq!(eval_series(&diff(2), re(2.0), re(3.0)).unwrap(), re(-1.0));
        assert_eq!(eval_series(&diff(2), re(0.0), re(3.0)), Err(FgError::ZeroArgument));
    }

    #[test]
    fn theta_series_leading_coefficient() {
        let tr = Truncation::default();
        let q = re(0.3);
        let s = theta_pair_series(q, 12, tr).unwrap();
        let qq = qpochhammer_inf(q, q, tr).unwrap();
        let want = (qq * qq).inv();
        assert!((s.at(0, 1) - want).norm() < 1e-14);
    }

    #[test]
    fn json_round_trip() {
        let s = builtin_series(3, re(2.0), re(0.5), re(0.25)).unwrap().remove(4).1;
        let v = s.to_json();
        assert_eq!(v["window"], 3);
        assert_eq!(BilateralSeries2::from_json(&v).unwrap(), s);
    }
}
