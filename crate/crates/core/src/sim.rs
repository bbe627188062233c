//! Discrete-event simulator of the operator network.
//!
//! External tuples arrive at source operators, wait in FIFO queues, are
//! served by one of `k_i` identical servers, and are forwarded downstream
//! probabilistically or exit. Each external tuple follows a single path, so
//! its total sojourn is exactly its exit time minus its arrival time. Runs
//! are fully deterministic under a fixed seed: events are ordered by
//! `(time, sequence number)` and every randomness class (arrivals per
//! source, service per operator, routing) draws from its own generator
//! derived from the master seed, so changing the allocation never perturbs
//! the arrival sequence.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{GlobalSample, MetricSample};
use crate::queueing::{network_sojourn, Allocation, SojournEstimate};
use crate::topology::{validate_topology, RateProfile, Topology};

pub const DEFAULT_QUEUE_CAP: u64 = 10_000_000;
/// Distribution parameters must keep the configured mean to this tolerance.
const MEAN_TOL: f64 = 1e-9;

/// Service-time distribution, applied per operator with mean `1/mu_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceDistribution {
    Exponential,
    /// Scale factors on the mean: draws from `U[lo/mu, hi/mu]`;
    /// `(lo + hi) / 2` must equal 1 so the mean stays `1/mu`.
    Uniform { lo: f64, hi: f64 },
    Deterministic,
}

/// External interarrival distribution, applied per source with mean `1/a_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalProcess {
    Poisson,
    /// Scale factors on the mean, as for [`ServiceDistribution::Uniform`].
    UniformInterarrival { lo: f64, hi: f64 },
}

/// How tuples reach servers inside an operator. FIFO is the queueing-model
/// assumption; HASH pins each tuple to a server by id hash, the way a
/// partitioned stream processor would.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dispatch {
    #[default]
    Fifo,
    Hash,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub topology: Topology,
    pub allocation: Allocation,
    pub service_distribution: ServiceDistribution,
    pub arrival_process: ArrivalProcess,
    #[serde(default)]
    pub dispatch: Dispatch,
    /// External tuples whose completion ends the run.
    pub horizon: u64,
    /// Leading external tuples excluded from statistics.
    #[serde(default)]
    pub warmup: Option<u64>,
    pub seed: u64,
    #[serde(default)]
    pub queue_cap: Option<u64>,
}

impl SimConfig {
    /// Warmup defaults to 10% of the horizon.
    pub fn warmup(&self) -> u64 {
        self.warmup.unwrap_or(self.horizon / 10)
    }

    pub fn queue_cap(&self) -> u64 {
        self.queue_cap.unwrap_or(DEFAULT_QUEUE_CAP)
    }

    pub fn validate(&self) -> Result<()> {
        let report = validate_topology(&self.topology);
        if !report.is_ok() {
            return Err(Error::InvalidTopology(report));
        }
        if self.allocation.len() != self.topology.len() {
            return Err(Error::DimensionMismatch {
                expected: self.topology.len(),
                got: self.allocation.len(),
            });
        }
        if self.horizon == 0 || self.horizon <= self.warmup() {
            return Err(Error::InvalidArgument(format!(
                "horizon ({}) must exceed warmup ({})",
                self.horizon,
                self.warmup()
            )));
        }
        if let ServiceDistribution::Uniform { lo, hi } = self.service_distribution {
            check_uniform_factors(lo, hi, "service_distribution")?;
        }
        if let ArrivalProcess::UniformInterarrival { lo, hi } = self.arrival_process {
            check_uniform_factors(lo, hi, "arrival_process")?;
        }
        Ok(())
    }
}

fn check_uniform_factors(lo: f64, hi: f64, what: &str) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "{what}: uniform factors need 0 <= lo < hi, got [{lo}, {hi}]"
        )));
    }
    if ((lo + hi) / 2.0 - 1.0).abs() > MEAN_TOL {
        return Err(Error::InvalidArgument(format!(
            "{what}: uniform factors must average 1 to preserve the mean, got [{lo}, {hi}]"
        )));
    }
    Ok(())
}

/// Per-operator measurements over the measured span.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorReport {
    /// Fraction of server-seconds spent busy.
    pub utilization: f64,
    /// Mean seconds spent queued before service started.
    pub mean_queue_wait: f64,
    /// Enqueues per second.
    pub observed_lambda: f64,
    /// Pooled per-server completions per busy second.
    pub observed_mu: f64,
    /// Time-average number of tuples queued or in service.
    pub mean_in_system: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    /// Tracked external tuples completed: `horizon - warmup`.
    pub completed: u64,
    pub mean_sojourn: f64,
    pub p50: f64,
    pub p95: f64,
    pub p99: f64,
    pub stddev_sojourn: f64,
    /// Length of the measured span in simulated seconds.
    pub span_secs: f64,
    /// External arrivals per second over the measured span.
    pub observed_lambda0: f64,
    pub per_operator: Vec<OperatorReport>,
    pub model_prediction: Option<SojournEstimate>,
    /// `(measured - predicted) / predicted`, when the prediction is finite.
    pub relative_error: Option<f64>,
}

impl SimulationReport {
    /// Rate profile measured over the span, falling back to the configured
    /// service rate for operators that never served.
    pub fn observed_profile(&self, fallback_mus: &[f64]) -> Result<RateProfile> {
        let lambdas = self.per_operator.iter().map(|o| o.observed_lambda).collect();
        let mus = self
            .per_operator
            .iter()
            .zip(fallback_mus)
            .map(|(o, &m)| if o.observed_mu > 0.0 { o.observed_mu } else { m })
            .collect();
        RateProfile::new(self.observed_lambda0, lambdas, mus)
    }
}

/// One closed measurement interval from a streaming engine.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMetrics {
    pub samples: Vec<MetricSample>,
    pub global: GlobalSample,
}

#[derive(Debug, Clone, Copy)]
struct InFlight {
    id: u64,
    born: f64,
}

#[derive(Debug, Clone, Copy)]
enum EventKind {
    Arrival { source: usize },
    Completion { op: usize, server: usize, tuple: InFlight, started: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}
impl Eq for Event {}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time.total_cmp(&other.time).then(self.seq.cmp(&other.seq))
    }
}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy)]
struct QueueEntry {
    tuple: InFlight,
    enqueued: f64,
}

#[derive(Debug)]
struct OpState {
    k: usize,
    mu: f64,
    shared_queue: VecDeque<QueueEntry>,
    server_queues: Vec<VecDeque<QueueEntry>>,
    server_busy: Vec<bool>,
    queued: u64,
    arrival_seq: u64,
    // Measured-span accumulators.
    arrivals: u64,
    served: u64,
    busy_time: f64,
    wait_sum: f64,
    wait_count: u64,
    in_system: u64,
    area: f64,
    last_t: f64,
    // Current-interval accumulators, per instance.
    int_inputs: Vec<u64>,
    int_sampled: Vec<u64>,
    int_served: Vec<u64>,
    int_busy: Vec<f64>,
}

impl OpState {
    fn new(k: usize, mu: f64, hash_dispatch: bool) -> Self {
        Self {
            k,
            mu,
            shared_queue: VecDeque::new(),
            server_queues: if hash_dispatch {
                vec![VecDeque::new(); k]
            } else {
                Vec::new()
            },
            server_busy: vec![false; k],
            queued: 0,
            arrival_seq: 0,
            arrivals: 0,
            served: 0,
            busy_time: 0.0,
            wait_sum: 0.0,
            wait_count: 0,
            in_system: 0,
            area: 0.0,
            last_t: 0.0,
            int_inputs: vec![0; k],
            int_sampled: vec![0; k],
            int_served: vec![0; k],
            int_busy: vec![0.0; k],
        }
    }

    fn advance_area(&mut self, now: f64) {
        self.area += self.in_system as f64 * (now - self.last_t);
        self.last_t = now;
    }
}

struct SpanTracker {
    warmup: u64,
    horizon: u64,
    started: Option<f64>,
    done: u64,
    sojourns: Vec<f64>,
    ext_arrivals: u64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Fixed per-class seed derivation from the master seed.
fn stream_seed(master: u64, class: u64) -> u64 {
    splitmix64(master ^ class.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

const CLASS_ARRIVAL: u64 = 0x0100_0000;
const CLASS_SERVICE: u64 = 0x0200_0000;
const CLASS_ROUTING: u64 = 0x0300_0000;

/// The event-driven core. Run-mode engines stop after a fixed number of
/// tracked completions; streaming engines advance in fixed time intervals
/// and emit measurement samples, as a live deployment would.
pub struct Engine {
    routing: Vec<Vec<f64>>,
    external_rates: Vec<f64>,
    service: ServiceDistribution,
    arrivals: ArrivalProcess,
    dispatch: Dispatch,
    queue_cap: u64,
    sample_every: u32,
    ops: Vec<OpState>,
    heap: BinaryHeap<Reverse<Event>>,
    seq: u64,
    now: f64,
    ext_count: u64,
    arrival_rngs: Vec<ChaCha8Rng>,
    service_rngs: Vec<ChaCha8Rng>,
    routing_rng: ChaCha8Rng,
    span: Option<SpanTracker>,
    // Current interval.
    interval_start: f64,
    int_ext_arrivals: u64,
    int_completed: u64,
    int_sojourn_sum: f64,
}

impl Engine {
    /// Run-mode engine: tracks tuples `warmup..horizon` and stops when all
    /// of them have completed.
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let mut engine = Self::build(cfg, 1)?;
        engine.span = Some(SpanTracker {
            warmup: cfg.warmup(),
            horizon: cfg.horizon,
            started: None,
            done: 0,
            sojourns: Vec::with_capacity((cfg.horizon - cfg.warmup()) as usize),
            ext_arrivals: 0,
        });
        Ok(engine)
    }

    /// Streaming engine for interval-driven use; `horizon`/`warmup` in the
    /// config are ignored and every completion counts toward its interval.
    pub fn streaming(cfg: &SimConfig, sample_every: u32) -> Result<Self> {
        cfg.validate()?;
        if sample_every < 1 {
            return Err(Error::InvalidArgument("sample_every must be at least 1".into()));
        }
        Self::build(cfg, sample_every)
    }

    fn build(cfg: &SimConfig, sample_every: u32) -> Result<Self> {
        let n = cfg.topology.len();
        let hash = cfg.dispatch == Dispatch::Hash;
        let ops = (0..n)
            .map(|i| {
                OpState::new(
                    cfg.allocation.counts[i] as usize,
                    cfg.topology.operators[i].service_rate,
                    hash,
                )
            })
            .collect();
        let arrival_rngs = (0..n)
            .map(|j| ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, CLASS_ARRIVAL + j as u64)))
            .collect();
        let service_rngs = (0..n)
            .map(|i| ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, CLASS_SERVICE + i as u64)))
            .collect();
        let mut engine = Self {
            routing: cfg.topology.routing.clone(),
            external_rates: cfg.topology.external_rates.clone(),
            service: cfg.service_distribution,
            arrivals: cfg.arrival_process,
            dispatch: cfg.dispatch,
            queue_cap: cfg.queue_cap(),
            sample_every,
            ops,
            heap: BinaryHeap::new(),
            seq: 0,
            now: 0.0,
            ext_count: 0,
            arrival_rngs,
            service_rngs,
            routing_rng: ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, CLASS_ROUTING)),
            span: None,
            interval_start: 0.0,
            int_ext_arrivals: 0,
            int_completed: 0,
            int_sojourn_sum: 0.0,
        };
        for source in 0..n {
            if engine.external_rates[source] > 0.0 {
                let dt = engine.draw_interarrival(source);
                engine.push_event(dt, EventKind::Arrival { source });
            }
        }
        Ok(engine)
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    /// Changes an operator's mean service rate for all future draws.
    pub fn scale_service_rate(&mut self, op: usize, factor: f64) {
        self.ops[op].mu *= factor;
    }

    pub fn service_rate(&self, op: usize) -> f64 {
        self.ops[op].mu
    }

    fn push_event(&mut self, delay: f64, kind: EventKind) {
        self.seq += 1;
        self.heap.push(Reverse(Event { time: self.now + delay, seq: self.seq, kind }));
    }

    fn draw_interarrival(&mut self, source: usize) -> f64 {
        let rate = self.external_rates[source];
        let rng = &mut self.arrival_rngs[source];
        match self.arrivals {
            ArrivalProcess::Poisson => Exp::new(rate).unwrap().sample(rng),
            ArrivalProcess::UniformInterarrival { lo, hi } => {
                let mean = 1.0 / rate;
                rng.gen_range(lo * mean..hi * mean)
            }
        }
    }

    fn draw_service(&mut self, op: usize) -> f64 {
        let mu = self.ops[op].mu;
        let rng = &mut self.service_rngs[op];
        match self.service {
            ServiceDistribution::Exponential => Exp::new(mu).unwrap().sample(rng),
            ServiceDistribution::Uniform { lo, hi } => {
                let mean = 1.0 / mu;
                rng.gen_range(lo * mean..hi * mean)
            }
            ServiceDistribution::Deterministic => 1.0 / mu,
        }
    }

    fn span_active(&self) -> bool {
        self.span.as_ref().is_some_and(|s| s.started.is_some())
    }

    fn start_service(&mut self, op: usize, server: usize, entry: QueueEntry) {
        let wait = self.now - entry.enqueued;
        if self.span_active() {
            let state = &mut self.ops[op];
            state.wait_sum += wait;
            state.wait_count += 1;
        }
        let dur = self.draw_service(op);
        self.ops[op].server_busy[server] = true;
        self.push_event(
            dur,
            EventKind::Completion { op, server, tuple: entry.tuple, started: self.now },
        );
    }

    fn enqueue(&mut self, op: usize, tuple: InFlight) -> Result<()> {
        let now = self.now;
        let span_active = self.span_active();
        let dispatch = self.dispatch;
        let sample_every = self.sample_every;
        let state = &mut self.ops[op];
        state.advance_area(now);
        state.in_system += 1;
        if span_active {
            state.arrivals += 1;
        }

        // Instance attribution for sampled arrival counting: round robin for
        // the shared FIFO, the hash target otherwise.
        let instance = match dispatch {
            Dispatch::Fifo => (state.arrival_seq % state.k as u64) as usize,
            Dispatch::Hash => (splitmix64(tuple.id) % state.k as u64) as usize,
        };
        state.arrival_seq += 1;
        state.int_inputs[instance] += 1;
        if state.int_inputs[instance].is_multiple_of(u64::from(sample_every)) {
            state.int_sampled[instance] += 1;
        }

        let entry = QueueEntry { tuple, enqueued: now };
        match dispatch {
            Dispatch::Fifo => {
                if let Some(server) = state.server_busy.iter().position(|&b| !b) {
                    self.start_service(op, server, entry);
                } else {
                    state.shared_queue.push_back(entry);
                    state.queued += 1;
                }
            }
            Dispatch::Hash => {
                if !state.server_busy[instance] {
                    self.start_service(op, instance, entry);
                } else {
                    state.server_queues[instance].push_back(entry);
                    state.queued += 1;
                }
            }
        }
        let state = &self.ops[op];
        if state.queued > self.queue_cap {
            return Err(Error::InstabilityDetected {
                operator: op,
                cap: self.queue_cap,
                at: now,
            });
        }
        Ok(())
    }

    fn route(&mut self, from: usize) -> Option<usize> {
        let row = &self.routing[from];
        let total: f64 = row.iter().sum();
        if total <= 0.0 {
            return None;
        }
        let u: f64 = self.routing_rng.gen_range(0.0..1.0);
        let mut acc = 0.0;
        for (j, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return Some(j);
            }
        }
        None
    }

    /// Processes one event. Returns false when the run-mode target has been
    /// reached and the measured span is closed.
    fn step(&mut self) -> Result<bool> {
        let Reverse(event) = match self.heap.pop() {
            Some(e) => e,
            None => return Ok(false),
        };
        self.now = event.time;
        match event.kind {
            EventKind::Arrival { source } => {
                let id = self.ext_count;
                self.ext_count += 1;
                self.int_ext_arrivals += 1;
                if let Some(span) = &mut self.span {
                    if id == span.warmup {
                        span.started = Some(self.now);
                        let now = self.now;
                        for st in &mut self.ops {
                            st.area = 0.0;
                            st.last_t = now;
                        }
                    }
                    if span.started.is_some() {
                        span.ext_arrivals += 1;
                    }
                }
                let tuple = InFlight { id, born: self.now };
                let dt = self.draw_interarrival(source);
                self.push_event(dt, EventKind::Arrival { source });
                self.enqueue(source, tuple)?;
            }
            EventKind::Completion { op, server, tuple, started } => {
                let dur = self.now - started;
                let span_active = self.span_active();
                let now = self.now;
                let state = &mut self.ops[op];
                state.advance_area(now);
                state.in_system -= 1;
                state.server_busy[server] = false;
                if span_active {
                    state.served += 1;
                    state.busy_time += dur;
                }
                state.int_served[server] += 1;
                state.int_busy[server] += dur;

                let next_entry = match self.dispatch {
                    Dispatch::Fifo => state.shared_queue.pop_front(),
                    Dispatch::Hash => state.server_queues[server].pop_front(),
                };
                if let Some(entry) = next_entry {
                    state.queued -= 1;
                    self.start_service(op, server, entry);
                }

                match self.route(op) {
                    Some(next_op) => self.enqueue(next_op, tuple)?,
                    None => {
                        // The tuple leaves the network.
                        let sojourn = self.now - tuple.born;
                        self.int_completed += 1;
                        self.int_sojourn_sum += sojourn;
                        if let Some(span) = &mut self.span {
                            if span.started.is_some()
                                && tuple.id >= span.warmup
                                && tuple.id < span.horizon
                            {
                                span.sojourns.push(sojourn);
                                span.done += 1;
                                if span.done == span.horizon - span.warmup {
                                    return Ok(false);
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(true)
    }

    /// Drives a run-mode engine to completion and builds the report.
    pub fn run_to_completion(&mut self) -> Result<SimulationReport> {
        while self.step()? {}
        let span = self
            .span
            .as_mut()
            .ok_or_else(|| Error::InvalidArgument("engine was built for streaming".into()))?;
        let start = span.started.ok_or_else(|| {
            Error::InvalidArgument("no tracked tuple ever arrived".into())
        })?;
        let end = self.now;
        let span_len = end - start;
        if span_len <= 0.0 {
            return Err(Error::InvalidArgument("measured span is empty".into()));
        }

        let mut sojourns = std::mem::take(&mut span.sojourns);
        let completed = span.done;
        let observed_lambda0 = span.ext_arrivals as f64 / span_len;
        sojourns.sort_by(f64::total_cmp);
        let n = sojourns.len() as f64;
        let mean = sojourns.iter().sum::<f64>() / n;
        let var = sojourns.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let pct = |q: f64| -> f64 {
            let rank = ((q * n).ceil() as usize).clamp(1, sojourns.len());
            sojourns[rank - 1]
        };

        let per_operator = self
            .ops
            .iter_mut()
            .map(|st| {
                st.advance_area(end);
                OperatorReport {
                    utilization: st.busy_time / (st.k as f64 * span_len),
                    mean_queue_wait: if st.wait_count > 0 {
                        st.wait_sum / st.wait_count as f64
                    } else {
                        0.0
                    },
                    observed_lambda: st.arrivals as f64 / span_len,
                    observed_mu: if st.busy_time > 0.0 {
                        st.served as f64 / st.busy_time
                    } else {
                        0.0
                    },
                    mean_in_system: st.area / span_len,
                }
            })
            .collect();

        Ok(SimulationReport {
            completed,
            mean_sojourn: mean,
            p50: pct(0.50),
            p95: pct(0.95),
            p99: pct(0.99),
            stddev_sojourn: var.sqrt(),
            span_secs: span_len,
            observed_lambda0,
            per_operator,
            model_prediction: None,
            relative_error: None,
        })
    }

    /// Advances a streaming engine by `dt` simulated seconds and closes one
    /// measurement interval: per-instance samples plus the global record.
    pub fn advance_interval(&mut self, dt: f64) -> Result<IntervalMetrics> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("interval must be positive, got {dt}")));
        }
        let boundary = self.interval_start + dt;
        while let Some(Reverse(next)) = self.heap.peek() {
            if next.time > boundary {
                break;
            }
            self.step()?;
        }
        self.now = boundary;

        let window_start = self.interval_start;
        let mut samples = Vec::new();
        for (op, state) in self.ops.iter_mut().enumerate() {
            for inst in 0..state.k {
                samples.push(MetricSample {
                    operator_id: op,
                    instance_id: inst,
                    window_start,
                    window_end: boundary,
                    arrivals: state.int_sampled[inst],
                    service_time_total: state.int_busy[inst],
                    served: state.int_served[inst],
                });
                state.int_sampled[inst] = 0;
                state.int_served[inst] = 0;
                state.int_busy[inst] = 0.0;
            }
        }
        let global = GlobalSample {
            window_start,
            window_end: boundary,
            external_arrivals: self.int_ext_arrivals,
            completed_tuples: self.int_completed,
            sojourn_time_total: self.int_sojourn_sum,
        };
        self.int_ext_arrivals = 0;
        self.int_completed = 0;
        self.int_sojourn_sum = 0.0;
        self.interval_start = boundary;
        Ok(IntervalMetrics { samples, global })
    }
}

/// Runs the configured simulation and reports measured statistics.
pub fn run_simulation(cfg: &SimConfig) -> Result<SimulationReport> {
    Engine::new(cfg)?.run_to_completion()
}

/// Runs the simulation, then feeds the observed rates through the queueing
/// model and reports the signed relative error of the prediction.
pub fn compare_with_model(cfg: &SimConfig) -> Result<SimulationReport> {
    let mut report = run_simulation(cfg)?;
    let profile = report.observed_profile(&cfg.topology.service_rates())?;
    let prediction = network_sojourn(&profile, &cfg.allocation)?;
    report.relative_error = prediction
        .total
        .seconds()
        .map(|p| (report.mean_sojourn - p) / p);
    report.model_prediction = Some(prediction);
    Ok(report)
}
