//! Measurement ingestion: per-instance samples, operator-level aggregation,
//! rate estimation and smoothing.
//!
//! Instances record a sampled arrival count (every `sample_every`-th local
//! input, counted at the tail of the operator queue), total busy seconds and
//! tuples served per interval. Aggregation sums arrivals across instances
//! (undoing the sampling by multiplying back), pools service measurements
//! into a per-processor rate, and combines the global completion records
//! into the measured external rate and mean sojourn. Two smoothing schemes
//! are supported: exponentially weighted and plain windowed averaging.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::RateProfile;

/// Intervals a missing service-rate measurement may be carried forward
/// before the operator is flagged stale and planning pauses.
pub const MAX_CARRY_INTERVALS: u32 = 3;

/// One instance's counters for one measurement interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    pub operator_id: usize,
    pub instance_id: usize,
    /// Interval bounds in seconds.
    pub window_start: f64,
    pub window_end: f64,
    /// Sampled arrival count: one tick per `sample_every` enqueues.
    pub arrivals: u64,
    /// Busy seconds summed over the interval.
    pub service_time_total: f64,
    /// Tuples completed by this instance in the interval.
    pub served: u64,
}

/// Network-wide counters for one interval, collected at tuple completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalSample {
    pub window_start: f64,
    pub window_end: f64,
    /// External tuples that entered the network; counted exactly.
    pub external_arrivals: u64,
    /// External tuples fully processed in the interval.
    pub completed_tuples: u64,
    /// Sum of the completed tuples' sojourn times, in seconds.
    pub sojourn_time_total: f64,
}

/// Measurement cadence: instance-level sampling stride and pull period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    /// Record one arrival tick every this many local inputs.
    pub sample_every: u32,
    /// Seconds between metric pulls; one pull closes one interval.
    pub pull_interval_secs: f64,
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_every < 1 {
            return Err(Error::InvalidArgument("sample_every must be at least 1".into()));
        }
        if !(self.pull_interval_secs.is_finite() && self.pull_interval_secs > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "pull_interval_secs must be positive, got {}",
                self.pull_interval_secs
            )));
        }
        Ok(())
    }
}

/// Smoothing scheme applied to the per-interval raw vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Smoothing {
    /// `D(n) = alpha * D(n-1) + (1 - alpha) * d(n)`, `D(1) = d(1)`.
    Alpha { alpha: f64 },
    /// Mean of the most recent `min(n, window)` raw vectors.
    Window { window: u32 },
}

impl Smoothing {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Smoothing::Alpha { alpha } => {
                if !(alpha.is_finite() && (0.0..1.0).contains(&alpha)) {
                    return Err(Error::InvalidArgument(format!(
                        "alpha must be in [0, 1), got {alpha}"
                    )));
                }
            }
            Smoothing::Window { window } => {
                if window < 1 {
                    return Err(Error::InvalidArgument("window must be at least 1".into()));
                }
            }
        }
        Ok(())
    }
}

/// Raw (unsmoothed) measurement vectors of one interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawInterval {
    pub lambdas: Vec<f64>,
    pub mus: Vec<f64>,
    pub lambda0: f64,
    pub mean_sojourn: f64,
}

/// Smoothed measurement state after interval `interval`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothedMetrics {
    pub interval: u64,
    pub lambdas: Vec<f64>,
    pub mus: Vec<f64>,
    pub lambda0: f64,
    pub mean_sojourn: f64,
    pub scheme: Smoothing,
    /// Operators whose service rate has been carried forward past
    /// [`MAX_CARRY_INTERVALS`]; planning should pause while non-empty.
    pub stale_operators: Vec<usize>,
}

/// Aggregated per-operator rates for one interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorRates {
    pub lambda: f64,
    /// Pooled per-processor service rate; `None` when nothing was measured
    /// and no prior value exists.
    pub mu: Option<f64>,
    /// True when the service rate was carried from a previous interval.
    pub carried: bool,
}

/// Aggregates one operator's instance samples to operator level.
///
/// The arrival rate undoes the instance-level sampling exactly once:
/// `lambda = sum(arrivals) * sample_every / span`. The service rate pools
/// all instances: `mu = sum(served) / sum(busy seconds)`. With nothing
/// served and no busy time the previous rate is carried forward.
pub fn aggregate_operator(
    samples: &[MetricSample],
    sample_every: u32,
    prev_mu: Option<f64>,
) -> Result<OperatorRates> {
    if samples.is_empty() {
        return Ok(OperatorRates { lambda: 0.0, mu: prev_mu, carried: true });
    }
    let mut start = f64::INFINITY;
    let mut end = f64::NEG_INFINITY;
    let mut arrivals: u64 = 0;
    let mut served: u64 = 0;
    let mut busy = 0.0;
    for s in samples {
        let window = s.window_end - s.window_start;
        if window.is_nan() || window <= 0.0 {
            return Err(Error::DataIntegrity(format!(
                "operator {} instance {}: window [{}, {}] is empty",
                s.operator_id, s.instance_id, s.window_start, s.window_end
            )));
        }
        if s.service_time_total < 0.0 {
            return Err(Error::DataIntegrity(format!(
                "operator {} instance {}: negative busy time",
                s.operator_id, s.instance_id
            )));
        }
        start = start.min(s.window_start);
        end = end.max(s.window_end);
        arrivals += s.arrivals;
        served += s.served;
        busy += s.service_time_total;
    }
    let span = end - start;
    let lambda = arrivals as f64 * f64::from(sample_every) / span;
    if served > 0 && busy <= 0.0 {
        return Err(Error::DataIntegrity(format!(
            "operator {}: {served} tuples served with zero busy time",
            samples[0].operator_id
        )));
    }
    if served == 0 && busy <= 0.0 {
        return Ok(OperatorRates { lambda, mu: prev_mu, carried: true });
    }
    Ok(OperatorRates { lambda, mu: Some(served as f64 / busy), carried: false })
}

/// Streaming smoother over raw interval vectors.
#[derive(Debug, Clone)]
pub struct Smoother {
    scheme: Smoothing,
    interval: u64,
    prev: Option<RawInterval>,
    history: VecDeque<RawInterval>,
}

impl Smoother {
    pub fn new(scheme: Smoothing) -> Result<Self> {
        scheme.validate()?;
        Ok(Self { scheme, interval: 0, prev: None, history: VecDeque::new() })
    }

    pub fn scheme(&self) -> Smoothing {
        self.scheme
    }

    /// Folds in the next raw interval and returns the smoothed vectors.
    pub fn smooth(&mut self, raw: RawInterval) -> Result<RawInterval> {
        if let Some(prev) = &self.prev {
            if prev.lambdas.len() != raw.lambdas.len() {
                return Err(Error::DimensionMismatch {
                    expected: prev.lambdas.len(),
                    got: raw.lambdas.len(),
                });
            }
        }
        self.interval += 1;
        let smoothed = match self.scheme {
            Smoothing::Alpha { alpha } => match &self.prev {
                None => raw.clone(),
                Some(prev) => {
                    let mix = |d: f64, p: f64| alpha * p + (1.0 - alpha) * d;
                    RawInterval {
                        lambdas: raw
                            .lambdas
                            .iter()
                            .zip(&prev.lambdas)
                            .map(|(&d, &p)| mix(d, p))
                            .collect(),
                        mus: raw.mus.iter().zip(&prev.mus).map(|(&d, &p)| mix(d, p)).collect(),
                        lambda0: mix(raw.lambda0, prev.lambda0),
                        mean_sojourn: mix(raw.mean_sojourn, prev.mean_sojourn),
                    }
                }
            },
            Smoothing::Window { window } => {
                self.history.push_back(raw.clone());
                while self.history.len() > window as usize {
                    self.history.pop_front();
                }
                let n = self.history.len() as f64;
                let dims = raw.lambdas.len();
                let mut lambdas = vec![0.0; dims];
                let mut mus = vec![0.0; dims];
                let mut lambda0 = 0.0;
                let mut mean_sojourn = 0.0;
                for r in &self.history {
                    for i in 0..dims {
                        lambdas[i] += r.lambdas[i];
                        mus[i] += r.mus[i];
                    }
                    lambda0 += r.lambda0;
                    mean_sojourn += r.mean_sojourn;
                }
                for v in lambdas.iter_mut().chain(mus.iter_mut()) {
                    *v /= n;
                }
                RawInterval { lambdas, mus, lambda0: lambda0 / n, mean_sojourn: mean_sojourn / n }
            }
        };
        self.prev = Some(smoothed.clone());
        Ok(smoothed)
    }

    pub fn interval(&self) -> u64 {
        self.interval
    }
}

/// Full measurement pipeline for a fixed operator count: aggregation,
/// carry-forward bookkeeping and smoothing. One `ingest` call per interval.
#[derive(Debug, Clone)]
pub struct Pipeline {
    n_ops: usize,
    sampling: SamplingConfig,
    smoother: Smoother,
    prev_raw_lambdas: Vec<f64>,
    prev_mus: Vec<Option<f64>>,
    carry_count: Vec<u32>,
    prev_sojourn: f64,
}

impl Pipeline {
    pub fn new(n_ops: usize, sampling: SamplingConfig, scheme: Smoothing) -> Result<Self> {
        if n_ops == 0 {
            return Err(Error::InvalidArgument("pipeline needs at least one operator".into()));
        }
        sampling.validate()?;
        Ok(Self {
            n_ops,
            sampling,
            smoother: Smoother::new(scheme)?,
            prev_raw_lambdas: vec![0.0; n_ops],
            prev_mus: vec![None; n_ops],
            carry_count: vec![0; n_ops],
            prev_sojourn: 0.0,
        })
    }

    pub fn n_ops(&self) -> usize {
        self.n_ops
    }

    /// Ingests one interval's samples and returns the smoothed state.
    pub fn ingest(
        &mut self,
        samples: &[MetricSample],
        global: &GlobalSample,
    ) -> Result<SmoothedMetrics> {
        let mut per_op: Vec<Vec<MetricSample>> = vec![Vec::new(); self.n_ops];
        for s in samples {
            if s.operator_id >= self.n_ops {
                return Err(Error::DataIntegrity(format!(
                    "sample references operator {} but the pipeline has {} operators",
                    s.operator_id, self.n_ops
                )));
            }
            per_op[s.operator_id].push(s.clone());
        }

        let mut lambdas = vec![0.0; self.n_ops];
        let mut mus = vec![0.0; self.n_ops];
        for op in 0..self.n_ops {
            let agg =
                aggregate_operator(&per_op[op], self.sampling.sample_every, self.prev_mus[op])?;
            lambdas[op] = if per_op[op].is_empty() { self.prev_raw_lambdas[op] } else { agg.lambda };
            mus[op] = agg.mu.unwrap_or(0.0);
            if agg.carried {
                self.carry_count[op] = self.carry_count[op].saturating_add(1);
            } else {
                self.carry_count[op] = 0;
                self.prev_mus[op] = agg.mu;
            }
        }
        self.prev_raw_lambdas.clone_from(&lambdas);

        let gspan = global.window_end - global.window_start;
        if gspan.is_nan() || gspan <= 0.0 {
            return Err(Error::DataIntegrity("global sample window is empty".into()));
        }
        let lambda0 = global.external_arrivals as f64 / gspan;
        let mean_sojourn = if global.completed_tuples > 0 {
            global.sojourn_time_total / global.completed_tuples as f64
        } else {
            self.prev_sojourn
        };
        self.prev_sojourn = mean_sojourn;

        let raw = RawInterval { lambdas, mus, lambda0, mean_sojourn };
        let smoothed = self.smoother.smooth(raw)?;
        let stale_operators = (0..self.n_ops)
            .filter(|&op| self.carry_count[op] > MAX_CARRY_INTERVALS)
            .collect();
        Ok(SmoothedMetrics {
            interval: self.smoother.interval(),
            lambdas: smoothed.lambdas,
            mus: smoothed.mus,
            lambda0: smoothed.lambda0,
            mean_sojourn: smoothed.mean_sojourn,
            scheme: self.smoother.scheme(),
            stale_operators,
        })
    }
}

/// Bridges smoothed measurements into the planner's input shape.
///
/// Operators with arrivals but no measured service rate are reported as
/// stalled; a non-positive external rate cannot feed the weighted average
/// and is rejected.
pub fn measured_profile(sm: &SmoothedMetrics) -> Result<RateProfile> {
    for (i, (&mu, &lambda)) in sm.mus.iter().zip(&sm.lambdas).enumerate() {
        if mu <= 0.0 {
            if lambda > 0.0 {
                return Err(Error::StalledOperator { operator: i });
            }
            return Err(Error::InvalidArgument(format!(
                "no service-rate measurement for operator {i}"
            )));
        }
    }
    if sm.lambda0 <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "measured external rate must be positive, got {}",
            sm.lambda0
        )));
    }
    RateProfile::new(sm.lambda0, sm.lambdas.clone(), sm.mus.clone())
}

/// One line of a metric log: instance samples accumulate until a global
/// record closes the interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Operator(MetricSample),
    Global(GlobalSample),
}

/// Parses newline-delimited log records; blank lines are skipped.
pub fn parse_log(text: &str) -> Result<Vec<LogRecord>> {
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: LogRecord = serde_json::from_str(line)
            .map_err(|e| Error::Parse(format!("metric log line {}: {e}", lineno + 1)))?;
        records.push(rec);
    }
    Ok(records)
}

/// Groups records into intervals: each global record closes the interval
/// holding every operator sample seen since the previous one. Trailing
/// samples without a closing global record are dropped.
pub fn group_intervals(records: &[LogRecord]) -> Vec<(Vec<MetricSample>, GlobalSample)> {
    let mut intervals = Vec::new();
    let mut pending: Vec<MetricSample> = Vec::new();
    for rec in records {
        match rec {
            LogRecord::Operator(s) => pending.push(s.clone()),
            LogRecord::Global(g) => {
                intervals.push((std::mem::take(&mut pending), g.clone()));
            }
        }
    }
    intervals
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample(op: usize, inst: usize, arrivals: u64, served: u64, busy: f64) -> MetricSample {
        MetricSample {
            operator_id: op,
            instance_id: inst,
            window_start: 0.0,
            window_end: 10.0,
            arrivals,
            service_time_total: busy,
            served,
        }
    }

    #[test]
    fn single_instance_rates() {
        let agg = aggregate_operator(&[sample(0, 0, 50, 50, 25.0)], 1, None).unwrap();
        assert_relative_eq!(agg.lambda, 5.0);
        assert_relative_eq!(agg.mu.unwrap(), 2.0);
        assert!(!agg.carried);
    }

    #[test]
    fn instances_aggregate_additively() {
        let agg = aggregate_operator(
            &[sample(0, 0, 30, 28, 14.0), sample(0, 1, 30, 30, 15.0)],
            1,
            None,
        )
        .unwrap();
        assert_relative_eq!(agg.lambda, 6.0);
        assert_relative_eq!(agg.mu.unwrap(), 2.0);
    }

    #[test]
    fn sampling_stride_inflates_exactly_once() {
        let agg = aggregate_operator(&[sample(0, 0, 5, 50, 25.0)], 10, None).unwrap();
        assert_relative_eq!(agg.lambda, 5.0);
    }

    #[test]
    fn idle_interval_carries_the_previous_rate() {
        let agg = aggregate_operator(&[sample(0, 0, 0, 0, 0.0)], 1, Some(2.5)).unwrap();
        assert!(agg.carried);
        assert_relative_eq!(agg.mu.unwrap(), 2.5);
    }

    #[test]
    fn served_without_busy_time_is_corrupt() {
        assert!(matches!(
            aggregate_operator(&[sample(0, 0, 10, 10, 0.0)], 1, None),
            Err(Error::DataIntegrity(_))
        ));
    }

    #[test]
    fn alpha_smoothing_recurrence() {
        let mut s = Smoother::new(Smoothing::Alpha { alpha: 0.5 }).unwrap();
        let raw = |v: f64| RawInterval {
            lambdas: vec![v],
            mus: vec![v],
            lambda0: v,
            mean_sojourn: v,
        };
        let d1 = s.smooth(raw(4.0)).unwrap();
        assert_relative_eq!(d1.lambda0, 4.0);
        let d2 = s.smooth(raw(2.0)).unwrap();
        assert_relative_eq!(d2.lambda0, 3.0);
        assert_relative_eq!(d2.lambdas[0], 3.0);
    }

    #[test]
    fn alpha_zero_has_no_memory() {
        let mut s = Smoother::new(Smoothing::Alpha { alpha: 0.0 }).unwrap();
        let raw = |v: f64| RawInterval {
            lambdas: vec![v],
            mus: vec![1.0],
            lambda0: v,
            mean_sojourn: v,
        };
        s.smooth(raw(9.0)).unwrap();
        let d = s.smooth(raw(7.0)).unwrap();
        assert_relative_eq!(d.lambda0, 7.0);
    }

    #[test]
    fn window_of_one_is_identity() {
        let mut s = Smoother::new(Smoothing::Window { window: 1 }).unwrap();
        let raw = |v: f64| RawInterval {
            lambdas: vec![v],
            mus: vec![v],
            lambda0: v,
            mean_sojourn: v,
        };
        s.smooth(raw(5.0)).unwrap();
        let d = s.smooth(raw(11.0)).unwrap();
        assert_relative_eq!(d.lambda0, 11.0);
    }

    #[test]
    fn window_mean_over_filled_window() {
        let mut s = Smoother::new(Smoothing::Window { window: 3 }).unwrap();
        let raw = |v: f64| RawInterval {
            lambdas: vec![v],
            mus: vec![v],
            lambda0: v,
            mean_sojourn: v,
        };
        s.smooth(raw(1.0)).unwrap();
        s.smooth(raw(2.0)).unwrap();
        let d = s.smooth(raw(6.0)).unwrap();
        assert_relative_eq!(d.lambda0, 3.0);
    }

    #[test]
    fn partial_window_averages_what_exists() {
        let mut s = Smoother::new(Smoothing::Window { window: 4 }).unwrap();
        let raw = |v: f64| RawInterval {
            lambdas: vec![v],
            mus: vec![v],
            lambda0: v,
            mean_sojourn: v,
        };
        s.smooth(raw(2.0)).unwrap();
        let d = s.smooth(raw(4.0)).unwrap();
        assert_relative_eq!(d.lambda0, 3.0);
    }

    #[test]
    fn scheme_validation() {
        assert!(Smoother::new(Smoothing::Alpha { alpha: 1.0 }).is_err());
        assert!(Smoother::new(Smoothing::Alpha { alpha: -0.1 }).is_err());
        assert!(Smoother::new(Smoothing::Window { window: 0 }).is_err());
    }

    #[test]
    fn measured_profile_pass_through() {
        let sm = SmoothedMetrics {
            interval: 1,
            lambdas: vec![5.0],
            mus: vec![2.0],
            lambda0: 5.0,
            mean_sojourn: 0.9,
            scheme: Smoothing::Alpha { alpha: 0.5 },
            stale_operators: vec![],
        };
        let p = measured_profile(&sm).unwrap();
        assert_relative_eq!(p.lambda0, 5.0);
        assert_eq!(p.lambdas, vec![5.0]);
        assert_eq!(p.mus, vec![2.0]);
    }

    #[test]
    fn stalled_operator_is_an_error() {
        let sm = SmoothedMetrics {
            interval: 1,
            lambdas: vec![5.0],
            mus: vec![0.0],
            lambda0: 5.0,
            mean_sojourn: 0.9,
            scheme: Smoothing::Alpha { alpha: 0.5 },
            stale_operators: vec![],
        };
        assert!(matches!(
            measured_profile(&sm),
            Err(Error::StalledOperator { operator: 0 })
        ));
    }

    #[test]
    fn zero_external_rate_is_rejected() {
        let sm = SmoothedMetrics {
            interval: 1,
            lambdas: vec![0.0],
            mus: vec![1.0],
            lambda0: 0.0,
            mean_sojourn: 0.0,
            scheme: Smoothing::Window { window: 1 },
            stale_operators: vec![],
        };
        assert!(measured_profile(&sm).is_err());
    }

    #[test]
    fn pipeline_flags_staleness_after_repeated_carries() {
        let sampling = SamplingConfig { sample_every: 1, pull_interval_secs: 10.0 };
        let mut p = Pipeline::new(1, sampling, Smoothing::Window { window: 1 }).unwrap();
        let global = GlobalSample {
            window_start: 0.0,
            window_end: 10.0,
            external_arrivals: 50,
            completed_tuples: 50,
            sojourn_time_total: 25.0,
        };
        let fresh = p.ingest(&[sample(0, 0, 50, 50, 25.0)], &global).unwrap();
        assert!(fresh.stale_operators.is_empty());
        assert_relative_eq!(fresh.mean_sojourn, 0.5);
        for round in 1..=MAX_CARRY_INTERVALS + 1 {
            let sm = p.ingest(&[], &global).unwrap();
            if round <= MAX_CARRY_INTERVALS {
                assert!(sm.stale_operators.is_empty(), "round {round}");
            } else {
                assert_eq!(sm.stale_operators, vec![0]);
            }
            // The carried service rate keeps feeding the smoother.
            assert_relative_eq!(sm.mus[0], 2.0);
        }
    }

    #[test]
    fn log_round_trip_and_grouping() {
        let lines = concat!(
            r#"{"type":"operator","operator_id":0,"instance_id":0,"window_start":0.0,"window_end":10.0,"arrivals":50,"service_time_total":25.0,"served":50}"#,
            "\n",
            r#"{"type":"global","window_start":0.0,"window_end":10.0,"external_arrivals":50,"completed_tuples":50,"sojourn_time_total":30.0}"#,
            "\n"
        );
        let records = parse_log(lines).unwrap();
        assert_eq!(records.len(), 2);
        let intervals = group_intervals(&records);
        assert_eq!(intervals.len(), 1);
        assert_eq!(intervals[0].0.len(), 1);
        assert_eq!(intervals[0].1.completed_tuples, 50);
    }

    #[test]
    fn bad_log_line_is_addressed() {
        let err = parse_log("{\"type\":\"nope\"}").unwrap_err();
        match err {
            Error::Parse(msg) => assert!(msg.contains("line 1"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
