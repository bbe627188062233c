//! Simulator ground-truth checks: queueing identities and agreement between
//! observed rates and the traffic equations.

use approx::assert_relative_eq;
use sojourn::queueing::Allocation;
use sojourn::sim::{
    compare_with_model, run_simulation, ArrivalProcess, Dispatch, ServiceDistribution, SimConfig,
};
use sojourn::topology::{solve_traffic, Topology};

fn chain3() -> Topology {
    Topology::new(
        vec![("ingest", 5.0), ("transform", 3.0), ("emit", 6.0)],
        vec![
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.0, 0.0],
        ],
        vec![4.0, 0.0, 0.0],
    )
}

fn feedback_loop() -> Topology {
    // Half of the tuples finished at the second operator loop back.
    Topology::new(
        vec![("work", 5.0), ("check", 5.0)],
        vec![vec![0.0, 1.0], vec![0.5, 0.0]],
        vec![1.0, 0.0],
    )
}

fn cfg(topology: Topology, counts: Vec<u32>, horizon: u64, seed: u64) -> SimConfig {
    SimConfig {
        topology,
        allocation: Allocation::new(counts).unwrap(),
        service_distribution: ServiceDistribution::Exponential,
        arrival_process: ArrivalProcess::Poisson,
        dispatch: Dispatch::Fifo,
        horizon,
        warmup: None,
        seed,
        queue_cap: None,
    }
}

#[test]
fn observed_rates_match_the_traffic_equations() {
    for (topology, counts) in [(chain3(), vec![2, 3, 2]), (feedback_loop(), vec![1, 1])] {
        let solved = solve_traffic(&topology).unwrap();
        let report = run_simulation(&cfg(topology, counts, 1_000_000, 11)).unwrap();
        assert_relative_eq!(report.observed_lambda0, solved.lambda0, max_relative = 0.02);
        for (i, op) in report.per_operator.iter().enumerate() {
            assert_relative_eq!(op.observed_lambda, solved.lambdas[i], max_relative = 0.02);
        }
    }
}

#[test]
fn littles_law_holds_per_operator() {
    let report = run_simulation(&cfg(chain3(), vec![2, 3, 2], 400_000, 23)).unwrap();
    for (i, op) in report.per_operator.iter().enumerate() {
        let implied = op.observed_lambda * (op.mean_queue_wait + 1.0 / op.observed_mu);
        assert_relative_eq!(op.mean_in_system, implied, max_relative = 0.03);
        let _ = i;
    }
}

#[test]
fn utilization_identity_holds() {
    let report = run_simulation(&cfg(chain3(), vec![2, 3, 2], 400_000, 37)).unwrap();
    let counts = [2u32, 3, 2];
    for (i, op) in report.per_operator.iter().enumerate() {
        let implied = op.observed_lambda / (f64::from(counts[i]) * op.observed_mu);
        assert_relative_eq!(op.utilization, implied, max_relative = 0.02);
    }
}

#[test]
fn model_matches_measurement_in_the_exponential_regime() {
    let report = compare_with_model(&cfg(chain3(), vec![2, 3, 2], 300_000, 5)).unwrap();
    let err = report.relative_error.unwrap();
    assert!(err.abs() <= 0.05, "relative error {err}");

    let report = compare_with_model(&cfg(feedback_loop(), vec![1, 1], 300_000, 5)).unwrap();
    let err = report.relative_error.unwrap();
    assert!(err.abs() <= 0.05, "loop relative error {err}");
}

#[test]
fn percentiles_are_ordered_and_bracket_the_mean() {
    let report = run_simulation(&cfg(chain3(), vec![2, 3, 2], 100_000, 3)).unwrap();
    assert!(report.p50 <= report.p95 && report.p95 <= report.p99);
    assert!(report.p50 < report.mean_sojourn && report.mean_sojourn < report.p99);
    assert!(report.stddev_sojourn > 0.0);
}
