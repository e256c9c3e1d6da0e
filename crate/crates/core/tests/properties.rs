use fgsum::catalog::{catalog, gasper_display_rhs, gasper_display_term, gosper_display_rhs, gosper_display_term, MAX_M, MAX_N};
use fgsum::laurent::{builtin_series, eval_series, series_pair, EXHAUSTIVE_WINDOW};
use fgsum::pairs::{orthogonality_terms, pair_by_name, ParamEnv};
use fgsum::qseries::{gen_product, qpochhammer, theta, Truncation};
use fgsum::report::Residual;
use fgsum::summation::{rhs_products, verify_summation, SummationInstance};
use fgsum::{re, Scalar};
use proptest::prelude::*;

fn scalar(r: std::ops::Range<f64>) -> impl Strategy<Value = Scalar> {
    (r, 0.0..std::f64::consts::TAU).prop_map(|(m, t)| Scalar::from_polar(m, t))
}

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(n) }
}

/// Residual of the summation on `-n..=m`, scaled by its largest summand so
/// that parameter points with heavy cancellation are judged fairly.
fn scaled_residual(inst: &SummationInstance) -> f64 {
    let mut terms = inst.summands().unwrap();
    let rhs = rhs_products(inst).unwrap();
    let lhs: Scalar = terms.iter().sum();
    terms.push(rhs);
    Residual::of_terms(lhs - rhs, &terms).rel()
}

fn close(a: Scalar, b: Scalar, tol: f64) -> bool {
    Residual::between(a, b).rel() <= tol
}

proptest! {
    #![proptest_config(cases(64))]

    #[test]
    fn products_chain_across_any_split(k in -8i64..8, mid in -10i64..10, end in -10i64..10, c in scalar(0.5..1.5)) {
        let f = |j: i64| Ok(Scalar::new(2.0 + 0.3 * j as f64, 1.0) * c);
        let left = gen_product(f, k, mid).unwrap();
        let right = gen_product(f, mid + 1, end).unwrap();
        let whole = gen_product(f, k, end).unwrap();
        prop_assert!(close(left * right, whole, 1e-12));
    }

    #[test]
    fn empty_and_reversed_products(k in -8i64..8, f0 in scalar(0.5..2.0)) {
        let f = |j: i64| Ok(f0 + re(j as f64 * 0.1));
        prop_assert_eq!(gen_product(f, k, k - 1).unwrap(), re(1.0));
        let fwd = gen_product(f, k, k + 3).unwrap();
        let back = gen_product(f, k + 4, k - 1).unwrap();
        prop_assert!(close(fwd * back, re(1.0), 1e-13));
    }

    #[test]
    fn pochhammer_recurrence(n in -20i64..20, a in scalar(0.1..0.9), q in scalar(0.1..0.6)) {
        let lhs = qpochhammer(a, q, n + 1).unwrap();
        let rhs = qpochhammer(a, q, n).unwrap() * (re(1.0) - a * q.powi(n as i32));
        prop_assert!(close(lhs, rhs, 1e-11), "{lhs} vs {rhs}");
    }

    #[test]
    fn theta_reflections(x in scalar(0.3..2.0), q in scalar(0.05..0.5)) {
        let tr = Truncation::default();
        let t = theta(x, q, tr).unwrap();
        prop_assume!(t.norm() > 1e-8);
        prop_assert!(close(theta(q / x, q, tr).unwrap(), t, 1e-11));
        prop_assert!(close(theta(x.inv(), q, tr).unwrap(), -t / x, 1e-11));
    }

    #[test]
    fn gasper_at_zero_b_is_gosper_at_reciprocal(a in 0.2..0.8f64, x in 1.1..1.8f64, p in 0.2..0.5f64, q in 0.2..0.5f64, k in 0i64..7) {
        let (a, x, p, q) = (re(a), re(x), re(p), re(q));
        let t = gasper_display_term(a, re(0.0), x, p, q, k).unwrap();
        prop_assert!(close(t, gosper_display_term(a, x.inv(), p, q, k).unwrap(), 1e-12));
        let r = gasper_display_rhs(a, re(0.0), x, p, q, k).unwrap();
        prop_assert!(close(r, gosper_display_rhs(a, x.inv(), p, q, k).unwrap(), 1e-12));
    }

    #[test]
    fn series_pairs_match_closed_forms(x in scalar(0.5..1.5), y in scalar(0.5..1.5)) {
        let env = ParamEnv::from_pairs(&[("d", 2.0), ("a", 0.5), ("b", 0.25)]);
        let tr = Truncation::default();
        for (name, f, g) in builtin_series(EXHAUSTIVE_WINDOW, re(2.0), re(0.5), re(0.25)).unwrap() {
            let pair = pair_by_name(&name, tr).unwrap();
            let env = pair.env(&env);
            prop_assert!(close(eval_series(&f, x, y).unwrap(), pair.eval_f(x, y, &env).unwrap(), 1e-12), "{name} f");
            prop_assert!(close(eval_series(&g, x, y).unwrap(), pair.eval_g(x, y, &env).unwrap(), 1e-12), "{name} g");
        }
    }

    // f orthogonal to a nonzero g forces g to be self-orthogonal
    #[test]
    fn orthogonal_partner_is_self_orthogonal(a in scalar(0.5..1.5), b in scalar(0.5..1.5), c in scalar(0.5..1.5), x in scalar(0.5..1.5)) {
        let env = ParamEnv::new();
        for (name, f, g) in builtin_series(EXHAUSTIVE_WINDOW, re(2.0), re(0.5), re(0.25)).unwrap() {
            let cross = orthogonality_terms(&series_pair(&name, f, g.clone()), &env, a, b, c, x).unwrap();
            prop_assert!(Residual::of_terms(cross.iter().sum(), &cross).rel() <= 1e-12);
            let own = orthogonality_terms(&series_pair(&name, g.clone(), g), &env, a, b, c, x).unwrap();
            prop_assert!(Residual::of_terms(own.iter().sum(), &own).rel() <= 1e-12, "{name}");
        }
    }
}

proptest! {
    #![proptest_config(cases(12))]

    #[test]
    fn catalog_holds_at_perturbed_parameters(scale in proptest::collection::vec(0.97..1.03f64, 8)) {
        let tr = Truncation::default();
        for e in catalog() {
            let mut over = ParamEnv::new();
            for (i, (k, v)) in e.defaults.iter().enumerate() {
                over.set(k, re(v * scale[i % scale.len()]));
            }
            let inst = e.instance(&over, tr).unwrap();
            for m in 0..=MAX_M {
                for n in 0..=MAX_N {
                    let Ok(inst) = inst.with_range(m, n) else { continue };
                    let r = scaled_residual(&inst);
                    prop_assert!(r <= e.default_tol(tr), "{} m={m} n={n}: {r:.2e}", e.name);
                }
            }
        }
    }

    #[test]
    fn shifting_the_sequences_keeps_the_identity(s in -3i64..=3, m in 0i64..=6) {
        let tr = Truncation::default();
        for e in catalog() {
            let base = e.instance(&ParamEnv::new(), tr).unwrap();
            let inst = base.with_range(m, 0).unwrap().shifted(s);
            if let Ok(inst) = inst {
                let rep = verify_summation(&inst, e.default_tol(tr));
                prop_assert!(rep.passed(), "{} shift {s}: {}", e.name, rep.to_line());
            }
        }
    }
}
