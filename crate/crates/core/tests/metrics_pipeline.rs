//! Measurement pipeline fed by the simulator: sampling unbiasedness and the
//! log replay path.

use approx::assert_relative_eq;
use sojourn::metrics::{
    group_intervals, measured_profile, parse_log, LogRecord, Pipeline, SamplingConfig, Smoothing,
};
use sojourn::queueing::Allocation;
use sojourn::sim::{ArrivalProcess, Dispatch, Engine, ServiceDistribution, SimConfig};
use sojourn::topology::Topology;

fn streaming_cfg(seed: u64) -> SimConfig {
    SimConfig {
        topology: Topology::new(
            vec![("stage0", 250.0), ("stage1", 300.0)],
            vec![vec![0.0, 1.0], vec![0.0, 0.0]],
            vec![100.0, 0.0],
        ),
        allocation: Allocation::new(vec![1, 1]).unwrap(),
        service_distribution: ServiceDistribution::Exponential,
        arrival_process: ArrivalProcess::Poisson,
        dispatch: Dispatch::Fifo,
        horizon: 1,
        warmup: Some(0),
        seed,
        queue_cap: None,
    }
}

#[test]
fn sampled_rate_estimates_are_unbiased() {
    // 100 tuples/s for 1000 s: at least 1e5 tuples through each operator.
    for sample_every in [1u32, 5, 20] {
        let cfg = streaming_cfg(u64::from(sample_every));
        let mut engine = Engine::streaming(&cfg, sample_every).unwrap();
        let sampling = SamplingConfig {
            sample_every,
            pull_interval_secs: 100.0,
        };
        let mut pipeline = Pipeline::new(2, sampling, Smoothing::Window { window: 10 }).unwrap();
        let mut last = None;
        for _ in 0..10 {
            let m = engine.advance_interval(100.0).unwrap();
            last = Some(pipeline.ingest(&m.samples, &m.global).unwrap());
        }
        let sm = last.unwrap();
        assert_relative_eq!(sm.lambdas[0], 100.0, max_relative = 0.03);
        assert_relative_eq!(sm.lambdas[1], 100.0, max_relative = 0.03);
        assert_relative_eq!(sm.lambda0, 100.0, max_relative = 0.03);
        assert_relative_eq!(sm.mus[0], 250.0, max_relative = 0.03);
        assert_relative_eq!(sm.mus[1], 300.0, max_relative = 0.03);
    }
}

#[test]
fn log_replay_reproduces_live_ingestion() {
    let cfg = streaming_cfg(77);
    let mut engine = Engine::streaming(&cfg, 5).unwrap();
    let sampling = SamplingConfig { sample_every: 5, pull_interval_secs: 50.0 };

    // Serialize the live intervals the way a deployment would log them.
    let mut ndjson = String::new();
    let mut live = Pipeline::new(2, sampling, Smoothing::Alpha { alpha: 0.6 }).unwrap();
    let mut live_last = None;
    for _ in 0..6 {
        let m = engine.advance_interval(50.0).unwrap();
        for s in &m.samples {
            ndjson.push_str(&serde_json::to_string(&LogRecord::Operator(s.clone())).unwrap());
            ndjson.push('\n');
        }
        ndjson.push_str(&serde_json::to_string(&LogRecord::Global(m.global.clone())).unwrap());
        ndjson.push('\n');
        live_last = Some(live.ingest(&m.samples, &m.global).unwrap());
    }

    // Replaying the log must land in exactly the same smoothed state.
    let records = parse_log(&ndjson).unwrap();
    let intervals = group_intervals(&records);
    assert_eq!(intervals.len(), 6);
    let mut replay = Pipeline::new(2, sampling, Smoothing::Alpha { alpha: 0.6 }).unwrap();
    let mut replay_last = None;
    for (samples, global) in &intervals {
        replay_last = Some(replay.ingest(samples, global).unwrap());
    }
    let live_sm = live_last.unwrap();
    let replay_sm = replay_last.unwrap();
    assert_eq!(live_sm, replay_sm);

    let profile = measured_profile(&replay_sm).unwrap();
    assert_relative_eq!(profile.lambda0, 100.0, max_relative = 0.1);
}
