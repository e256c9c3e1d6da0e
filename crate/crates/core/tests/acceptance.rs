//! Acceptance run: one line per criterion, nonzero exit on any unexpected
//! failure. Two published closed forms are known not to hold; their lines
//! print FAIL and are listed separately so they cannot hide a regression.

use fgsum::catalog::{adversarial_entry, catalog, verify_entry, MAX_M};
use fgsum::inversion::{build_f, build_g, IndexedSequence, SchlosserParams};
use fgsum::pairs::{broken_pair, check_pair, EnvSampler, ParamEnv};
use fgsum::report::VerificationReport;
use fgsum::runner::{registry, run_suite, run_target, RunConfig, TargetKind, BILATERAL_RANGE};
use fgsum::sampling::Sampler;
use fgsum::summation::telescoping_residual;
use fgsum::{re, Scalar};
use std::process::ExitCode;
use std::time::Instant;

struct Line {
    id: &'static str,
    ok: bool,
    known: bool,
    text: String,
}

fn line(id: &'static str, ok: bool, text: String) -> Line {
    Line { id, ok, known: false, text }
}

fn run_all(names: &[String], cfg: &RunConfig) -> (Vec<VerificationReport>, f64) {
    let t = Instant::now();
    let reps = names.iter().map(|n| run_target(n, cfg).expect("registered target")).collect();
    (reps, t.elapsed().as_secs_f64())
}

fn worst(reps: &[VerificationReport]) -> f64 {
    reps.iter().map(|r| r.max_rel_residual).fold(0.0, f64::max)
}

fn failures(reps: &[VerificationReport]) -> Vec<String> {
    reps.iter().filter(|r| !r.passed()).map(|r| r.to_line()).collect()
}

fn names_of(cfg: &RunConfig, pick: impl Fn(&TargetKind) -> bool) -> Vec<String> {
    registry(cfg).into_iter().filter(|t| pick(&t.kind)).map(|t| t.name).collect()
}

fn orthogonality(cfg: &RunConfig) -> Line {
    let names = names_of(cfg, |k| matches!(k, TargetKind::Pair(_)));
    let (reps, secs) = run_all(&names, cfg);
    let bad = failures(&reps);
    let ok = names.len() == 7 && bad.is_empty() && secs < 5.0;
    line("1 orthogonality", ok, format!("{} pairs, 1000 samples, worst rel {:.2e}, {secs:.2}s {bad:?}", names.len(), worst(&reps)))
}

fn inversion(cfg: &RunConfig) -> Line {
    let names = names_of(cfg, |k| matches!(k, TargetKind::Inversion(_)));
    let (reps, secs) = run_all(&names, cfg);
    let w = worst(&reps);
    let ok = names.len() == 7 && failures(&reps).is_empty() && w <= 1e-7 && secs < 10.0;
    line("2 inversion", ok, format!("{} pairs, 12x12, 10 draws, worst rel {w:.2e}, {secs:.2}s", names.len()))
}

fn summation(cfg: &RunConfig) -> Line {
    let t = Instant::now();
    let tr = cfg.truncation;
    let reps: Vec<_> = catalog().iter().map(|e| verify_entry(e, &ParamEnv::new(), tr, e.default_tol(tr))).collect();
    let secs = t.elapsed().as_secs_f64();
    let bad = failures(&reps);
    let ok = reps.len() == 17 && bad.is_empty() && secs < 30.0;
    line(
        "3 summation",
        ok,
        format!("{} entries, m<=6 n<=4 with references, worst rel {:.2e}, {secs:.2}s {bad:?}", reps.len(), worst(&reps)),
    )
}

fn telescoping(cfg: &RunConfig) -> Line {
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for e in catalog() {
        let inst = e.instance(&ParamEnv::new(), cfg.truncation).expect("default instance");
        for m in 1..=MAX_M {
            match telescoping_residual(&inst, m) {
                Ok(r) => {
                    worst = worst.max(r.rel());
                    if r.rel() > 1e-12 {
                        bad.push(format!("{} m={m}: {:.2e}", e.name, r.rel()));
                    }
                }
                Err(err) => bad.push(format!("{} m={m}: {err}", e.name)),
            }
        }
    }
    line("4 telescoping", bad.is_empty(), format!("17 entries, m=1..6, worst rel {worst:.2e} {bad:?}"))
}

fn characterization(cfg: &RunConfig) -> Line {
    let names: Vec<String> = ["series.self_orthogonal", "series.orthogonal_to", "series.builtin"].map(String::from).to_vec();
    let (reps, secs) = run_all(&names, cfg);
    let bad = failures(&reps);
    let detail: Vec<String> = reps.iter().map(|r| format!("{} {:.2e} ({})", r.name, r.max_rel_residual, r.detail)).collect();
    line("5 characterization", bad.is_empty(), format!("{}; {secs:.2}s", detail.join("; ")))
}

fn theta_identities(cfg: &RunConfig) -> Line {
    let names: Vec<String> = ["jacobi_triple", "series.theta_pair"].map(String::from).to_vec();
    let (reps, _) = run_all(&names, cfg);
    let jac = reps[0].max_abs_residual;
    let ser = reps[1].max_rel_residual;
    let ok = failures(&reps).is_empty() && jac <= 1e-10 && ser <= 1e-8;
    line("6 theta", ok, format!("triple product abs {jac:.2e} over {} samples; series pair rel {ser:.2e} at window 12", reps[0].samples_run))
}

fn bilateral(cfg: &RunConfig) -> Vec<Line> {
    let names: Vec<String> = ["schlosser", "bilateral_h", "three_term_theta"].map(String::from).to_vec();
    let (reps, secs) = run_all(&names, cfg);
    let mut out = vec![
        line("7a schlosser", reps[0].passed() && reps[0].max_abs_residual <= 1e-6, format!("|AB - I| {:.2e}, {}", reps[0].max_abs_residual, reps[0].detail)),
        line("7b h limit", reps[1].passed(), format!("limit vs derived closed form {:.2e}, {}", reps[1].max_rel_residual, reps[1].detail)),
        line("7c transformation", reps[2].passed() && reps[2].max_rel_residual <= 1e-9, format!("corrected form rel {:.2e} over {} samples", reps[2].max_rel_residual, reps[2].samples_run)),
    ];
    let tr = cfg.truncation;
    let sp = SchlosserParams::default();
    let setup = sp.setup();
    let mut quoted = 0.0f64;
    for m in -BILATERAL_RANGE..=BILATERAL_RANGE {
        let limit = fgsum::inversion::bilateral_h(&setup, m, tr).expect("limit").value;
        let q = sp.h_quoted_form(m, tr).expect("quoted form");
        quoted = quoted.max(((limit - q) / limit).norm());
    }
    out.push(Line {
        id: "7d h quoted display",
        ok: quoted <= 1e-6,
        known: true,
        text: format!("limit vs published h(M) display rel {quoted:.2e} (tol 1e-6)"),
    });
    let mut s = Sampler::new(cfg.seed);
    let mut tq = 0.0f64;
    for _ in 0..50 {
        let (a, b, c, d, q) = (s.arg(), s.arg(), s.arg(), s.arg(), s.base());
        if let Ok(r) = fgsum::inversion::three_term_theta_quoted_residual(a, b, c, d, q, tr) {
            tq = tq.max(r);
        }
    }
    out.push(Line {
        id: "7e transformation quoted",
        ok: tq <= 1e-9,
        known: true,
        text: format!("published three-term form rel {tq:.2e} (tol 1e-9)"),
    });
    out.push(line("7 runtime", secs < 30.0, format!("{secs:.2}s")));
    out
}

fn broken_inversion_offdiag() -> f64 {
    let pair = broken_pair();
    let env = ParamEnv::new();
    let xs = IndexedSequence::affine(re(0.3), re(0.11));
    let bs = IndexedSequence::affine(Scalar::new(0.5, 0.2), re(0.17));
    let w = 11;
    let f = build_f(&pair, &env, &xs, &bs, (0, w), (0, w)).expect("F");
    let g = build_g(&pair, &env, &xs, &bs, (0, w), (0, w)).expect("G");
    let mut off = 0.0f64;
    for n in 0..=w {
        for k in 0..n {
            let s: Scalar = (k..=n).map(|i| f.get(n, i).unwrap() * g.get(i, k).unwrap()).sum();
            off = off.max(s.norm());
        }
    }
    off
}

fn negative_controls(cfg: &RunConfig) -> Line {
    let orth = check_pair(&broken_pair(), &EnvSampler::Fixed(ParamEnv::new()), cfg.samples, 1e-9, cfg.seed);
    let off = broken_inversion_offdiag();
    let tr = cfg.truncation;
    let sum = verify_entry(&adversarial_entry(), &ParamEnv::new(), tr, 1e-9);
    let ok = !orth.passed() && off >= 1e-3 && !sum.passed();
    line(
        "8 negative controls",
        ok,
        format!(
            "broken pair: orthogonality {} (rel {:.2e}), max off-diagonal of FG {off:.2e}, summation {} (rel {:.2e})",
            if orth.passed() { "passes" } else { "fails" },
            orth.max_rel_residual,
            if sum.passed() { "passes" } else { "fails" },
            sum.max_rel_residual
        ),
    )
}

fn residual_fields(reps: &[VerificationReport]) -> Vec<String> {
    reps.iter()
        .map(|r| format!("{} {:?} {:e} {:e} {} {} {}", r.name, r.status, r.max_abs_residual, r.max_rel_residual, r.samples_run, r.rejections, r.seed))
        .collect()
}

fn determinism(cfg: &RunConfig) -> Line {
    let a = residual_fields(&run_suite(cfg).expect("suite"));
    let b = residual_fields(&run_suite(cfg).expect("suite"));
    line("9 determinism", a == b, format!("{} reports, residual fields identical: {}", a.len(), a == b))
}

fn main() -> ExitCode {
    let cfg = RunConfig::default();
    let mut lines = vec![orthogonality(&cfg), inversion(&cfg), summation(&cfg), telescoping(&cfg), characterization(&cfg), theta_identities(&cfg)];
    lines.extend(bilateral(&cfg));
    lines.push(negative_controls(&cfg));
    lines.push(determinism(&cfg));
    let mut unexpected = 0;
    for l in &lines {
        let tag = if l.ok { "PASS" } else { "FAIL" };
        let note = if l.known && !l.ok { " [known: published form disagrees]" } else { "" };
        println!("{tag} {:<26} {}{note}", l.id, l.text);
        if !l.ok && !l.known {
            unexpected += 1;
        }
    }
    let known = lines.iter().filter(|l| l.known && !l.ok).count();
    println!("acceptance: {} lines, {unexpected} unexpected failures, {known} known failures", lines.len());
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
