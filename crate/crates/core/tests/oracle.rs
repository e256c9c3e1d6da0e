//! Reference values computed independently at 40 significant digits and
//! frozen here.

#![allow(clippy::excessive_precision)]

use fgsum::inversion::{bilateral_h, bilateral_h_direct, IndexedSequence, SchlosserParams};
use fgsum::pairs::{pair_s2, ParamEnv};
use fgsum::qseries::{qpochhammer, qpochhammer_inf, theta, Truncation};
use fgsum::summation::{lhs_sum, rhs_products, SummationInstance};
use fgsum::{re, Scalar};

fn assert_close(got: Scalar, want: Scalar, tol: f64) {
    let rel = (got - want).norm() / want.norm();
    assert!(rel <= tol, "got {got}, want {want}, rel {rel:.2e}");
}

#[test]
fn finite_pochhammer() {
    let got = qpochhammer(Scalar::new(0.3, 0.2), re(0.5), 5).unwrap();
    assert_close(got, Scalar::new(0.481667060546875, -0.25575119140625), 1e-14);
    assert_close(qpochhammer(re(0.3), re(0.5), -3).unwrap(), re(8.928571428571428571), 1e-14);
}

#[test]
fn infinite_pochhammer() {
    assert_close(qpochhammer_inf(re(0.7), re(0.4), Truncation::default()).unwrap(), re(0.17778953193253057068), 1e-13);
}

#[test]
fn theta_value() {
    let got = theta(Scalar::new(0.7, 0.3), re(0.35), Truncation::default()).unwrap();
    assert_close(got, Scalar::new(0.11339254780647561623, -0.072770723287902655739), 1e-13);
}

#[test]
fn schlosser_constant_and_h() {
    let tr = Truncation::default();
    let sp = SchlosserParams::default();
    assert_close(sp.omega(tr).unwrap(), re(-7.1362833097460297017), 1e-12);
    let want = [(-1, -104.09312723399808655), (0, -1.6138469338604354504), (1, -0.092117811711502731463)];
    for (m, v) in want {
        assert_close(sp.h_closed_form(m, tr).unwrap(), re(v), 1e-12);
        assert_close(bilateral_h_direct(&sp.setup(), m, tr).unwrap(), re(v), 1e-12);
        assert_close(bilateral_h(&sp.setup(), m, tr).unwrap().value, re(v), 1e-9);
    }
}

#[test]
fn bilateral_s2_sum() {
    let seqs = [
        IndexedSequence::shifted_geometric(re(0.3), re(0.35), re(0.1)),
        IndexedSequence::affine(re(0.93), re(0.071)),
        IndexedSequence::shifted_geometric(re(1.3), re(0.45), re(0.4)),
        IndexedSequence::affine(re(1.5), re(-0.04)),
    ];
    let env = ParamEnv::new().with("d", re(1.7));
    let inst = SummationInstance::new("s2", pair_s2(), env, seqs, 3, 2).unwrap();
    let want = re(-0.41974187555246587664);
    assert_close(lhs_sum(&inst).unwrap(), want, 1e-12);
    assert_close(rhs_products(&inst).unwrap(), want, 1e-12);
}
