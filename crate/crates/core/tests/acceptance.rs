use std::sync::{Mutex, OnceLock};

use levelset_core::verify::{CriterionReport, Verifier};

fn verifier() -> &'static Mutex<Verifier> {
    static V: OnceLock<Mutex<Verifier>> = OnceLock::new();
    V.get_or_init(|| Mutex::new(Verifier::new(0)))
}

fn check(id: &str) {
    let report: CriterionReport = {
        let mut v = verifier().lock().unwrap_or_else(|e| e.into_inner());
        v.run(id).expect("known criterion")
    };
    println!("{}", report.line());
    assert!(report.passed, "{}", report.line());
}

#[test]
fn criterion_1_gp_correctness() {
    check("1");
}

#[test]
fn criterion_2_straddle_accuracy() {
    check("2");
}

#[test]
fn criterion_3_calibration() {
    check("3");
}

#[test]
fn criterion_4_uniformity() {
    check("4");
}

#[test]
fn criterion_5_efficiency() {
    check("5");
}

#[test]
fn criterion_6_diversity() {
    check("6");
}

#[test]
fn criterion_7_greedy_bound() {
    check("7");
}

#[test]
fn criterion_8_kernel_learning() {
    check("8");
}

#[test]
fn criterion_9_determinism() {
    check("9");
}
