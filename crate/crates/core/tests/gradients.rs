mod common;

use common::grad_cases::{architecture_cases, op_cases, Case, TOLERANCE};

const INSTANCES: u64 = 20;

fn run_all(cases: &[Case]) {
    let mut failures = Vec::new();
    for case in cases {
        for seed in 0..INSTANCES {
            let check = (case.run)(seed).unwrap_or_else(|e| panic!("{} seed {seed}: {e}", case.name));
            let worst = check.worst().expect("at least one parameter");
            if worst.relative_error >= TOLERANCE {
                failures.push(format!("{} seed {seed}: {} rel err {:.3e}", case.name, worst.name, worst.relative_error));
            }
        }
    }
    assert!(failures.is_empty(), "gradient mismatches:\n{}", failures.join("\n"));
}

#[test]
fn every_op_matches_finite_differences() {
    run_all(&op_cases());
}

#[test]
fn architecture_steps_match_finite_differences() {
    run_all(&architecture_cases());
}
