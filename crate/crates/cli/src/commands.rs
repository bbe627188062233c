use std::fmt::Write as _;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use sojourn::control::{self, ControlConfig, LoopConfig, LoopReport, Perturbation};
use sojourn::metrics::{
    group_intervals, measured_profile, parse_log, Pipeline, SamplingConfig, Smoothing,
};
use sojourn::planner::{
    assign_processors, brute_force_optimal, provision_min_resources, Infeasibility, Plan,
    PlanMode,
};
use sojourn::queueing::{network_sojourn, Allocation, Sojourn, SojournEstimate};
use sojourn::sim::{
    compare_with_model, ArrivalProcess, Dispatch, ServiceDistribution, SimConfig,
    SimulationReport,
};
use sojourn::topology::{solve_traffic, RateProfile, Topology};
use sojourn::Error;

use crate::io;
use crate::manifest::RunManifest;
use crate::{LoopArgs, PlanArgs, PredictArgs, ProvisionArgs, ReplayArgs, SimulateArgs, SweepArgs};

const EXIT_INFEASIBLE: u8 = 2;

fn fmt_ms(secs: f64) -> String {
    format!("{:.3} ms", secs * 1e3)
}

fn fmt_sojourn(s: Sojourn) -> String {
    match s.seconds() {
        Some(v) => fmt_ms(v),
        None => "UNSTABLE".to_string(),
    }
}

fn resolve_rates(topology: &Topology, rates: Option<&std::path::Path>) -> Result<RateProfile> {
    match rates {
        Some(path) => {
            let profile = io::load_rates(path)?;
            if profile.len() != topology.len() {
                bail!(
                    "rates file has {} operators, topology has {}",
                    profile.len(),
                    topology.len()
                );
            }
            Ok(profile)
        }
        None => Ok(solve_traffic(topology)?),
    }
}

// ---------------------------------------------------------------------------
// predict

#[derive(Serialize)]
struct PredictReport<'a> {
    rates: &'a RateProfile,
    allocation: &'a Allocation,
    estimate: &'a SojournEstimate,
}

pub fn predict(args: &PredictArgs) -> Result<ExitCode> {
    let topology = io::load_topology(&args.topology)?;
    let allocation: Allocation = args.allocation.parse::<Allocation>()?;
    let rates = resolve_rates(&topology, args.rates.as_deref())?;
    let estimate = network_sojourn(&rates, &allocation)?;

    let mut manifest = RunManifest::new("predict")
        .input(&args.topology)
        .param("allocation", allocation.to_string());
    if let Some(r) = &args.rates {
        manifest = manifest.input(r).param("rates", "measured");
    }

    for (i, op) in topology.operators.iter().enumerate() {
        println!(
            "operator {i} ({}): lambda {:.4}/s, mu {:.4}/s, k {} -> E[T] {}",
            op.name,
            rates.lambdas[i],
            rates.mus[i],
            allocation.counts[i],
            fmt_sojourn(estimate.per_operator[i]),
        );
    }
    match estimate.total {
        Sojourn::Finite(total) => println!("total expected sojourn: {}", fmt_ms(total)),
        Sojourn::Unstable => {
            for (i, e) in estimate.per_operator.iter().enumerate() {
                if e.is_unstable() {
                    println!("UNSTABLE at operator {}", topology.operators[i].name);
                }
            }
            println!("total expected sojourn: UNSTABLE");
        }
    }

    if let Some(out) = &args.out {
        let report = PredictReport { rates: &rates, allocation: &allocation, estimate: &estimate };
        let path = io::write_report(out, "predict.json", &manifest, &report)?;
        println!("report: {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// plan / provision

#[derive(Serialize)]
struct PlanReport<'a> {
    rates: &'a RateProfile,
    plan: &'a Plan,
    verified: Option<bool>,
}

fn print_plan(plan: &Plan) {
    println!("k = {}", plan.allocation);
    println!("processors used: {}", plan.processors_used);
    println!("expected sojourn: {}", fmt_sojourn(plan.estimate.total));
    for step in &plan.trace {
        let delta = if step.delta == sojourn::queueing::MAX_BENEFIT {
            "stabilize".to_string()
        } else {
            format!("{:.6}", step.delta)
        };
        println!("  step {}: operator {} (delta {})", step.step, step.operator, delta);
    }
}

pub fn plan(args: &PlanArgs) -> Result<ExitCode> {
    let topology = io::load_topology(&args.topology)?;
    let rates = resolve_rates(&topology, args.rates.as_deref())?;
    let plan = assign_processors(&rates, args.kmax)?;

    let mut manifest = RunManifest::new("plan")
        .input(&args.topology)
        .param("kmax", args.kmax)
        .param("verify", args.verify);
    if let Some(r) = &args.rates {
        manifest = manifest.input(r);
    }

    let mut verified = None;
    if !plan.feasible {
        if let Some(Infeasibility::InsufficientBudget { required, budget, deficit }) =
            &plan.infeasibility
        {
            println!(
                "insufficient processors for the application: need at least {required}, \
                 budget is {budget} (deficit {deficit})"
            );
        }
        if let Some(out) = &args.out {
            let report = PlanReport { rates: &rates, plan: &plan, verified };
            io::write_report(out, "plan.json", &manifest, &report)?;
        }
        return Ok(ExitCode::from(EXIT_INFEASIBLE));
    }

    print_plan(&plan);
    if args.verify {
        let brute = brute_force_optimal(&rates, args.kmax)?;
        let ok = match (plan.estimate.total.seconds(), brute.estimate.total.seconds()) {
            (Some(g), Some(b)) => (g - b).abs() <= 1e-9 * b.max(f64::MIN_POSITIVE),
            _ => false,
        };
        verified = Some(ok);
        println!("greedy = brute force: {}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            bail!("greedy result diverged from the enumeration oracle");
        }
    }
    if let Some(out) = &args.out {
        let report = PlanReport { rates: &rates, plan: &plan, verified };
        let path = io::write_report(out, "plan.json", &manifest, &report)?;
        println!("report: {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

pub fn provision(args: &ProvisionArgs) -> Result<ExitCode> {
    let topology = io::load_topology(&args.topology)?;
    let rates = resolve_rates(&topology, args.rates.as_deref())?;
    let t_max = args.tmax_ms / 1e3;

    let mut manifest = RunManifest::new("provision")
        .input(&args.topology)
        .param("tmax_ms", args.tmax_ms)
        .param("kcap", args.kcap);
    if let Some(r) = &args.rates {
        manifest = manifest.input(r);
    }

    let plan = match provision_min_resources(&rates, t_max, args.kcap) {
        Ok(plan) => plan,
        Err(Error::UnreachableTarget { lower_bound_secs, .. }) => {
            println!(
                "unreachable: expected sojourn is bounded below by {}",
                fmt_ms(lower_bound_secs)
            );
            return Ok(ExitCode::from(EXIT_INFEASIBLE));
        }
        Err(e) => return Err(e.into()),
    };

    if !plan.feasible {
        println!(
            "target {} not reached within the {} processor cap (best {})",
            fmt_ms(t_max),
            plan.processors_used,
            fmt_sojourn(plan.estimate.total)
        );
        if let Some(out) = &args.out {
            let report = PlanReport { rates: &rates, plan: &plan, verified: None };
            io::write_report(out, "provision.json", &manifest, &report)?;
        }
        return Ok(ExitCode::from(EXIT_INFEASIBLE));
    }

    println!(
        "{} processors, k = {}, expected sojourn {} <= {}",
        plan.processors_used,
        plan.allocation,
        fmt_sojourn(plan.estimate.total),
        fmt_ms(t_max)
    );
    if let Some(out) = &args.out {
        let report = PlanReport { rates: &rates, plan: &plan, verified: None };
        let path = io::write_report(out, "provision.json", &manifest, &report)?;
        println!("report: {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// simulate / sweep

const SIM_CSV_HEADER: &str = "allocation,processors,completed,mean_sojourn_s,stddev_sojourn_s,\
                              p50_s,p95_s,p99_s,model_estimate_s,relative_error";

fn sim_csv_row(allocation: &Allocation, report: &SimulationReport) -> String {
    let estimate = report
        .model_prediction
        .as_ref()
        .and_then(|p| p.total.seconds())
        .map_or("unstable".to_string(), |v| v.to_string());
    let rel = report.relative_error.map_or(String::new(), |v| v.to_string());
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        allocation,
        allocation.total(),
        report.completed,
        report.mean_sojourn,
        report.stddev_sojourn,
        report.p50,
        report.p95,
        report.p99,
        estimate,
        rel
    )
}

fn apply_sim_overrides(
    cfg: &mut SimConfig,
    seed: Option<u64>,
    horizon: Option<u64>,
    warmup: Option<u64>,
) {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(h) = horizon {
        cfg.horizon = h;
    }
    if let Some(w) = warmup {
        cfg.warmup = Some(w);
    }
}

fn print_sim_summary(report: &SimulationReport) {
    println!(
        "completed {} tuples over {:.1} s: mean {}, p50 {}, p95 {}, p99 {}",
        report.completed,
        report.span_secs,
        fmt_ms(report.mean_sojourn),
        fmt_ms(report.p50),
        fmt_ms(report.p95),
        fmt_ms(report.p99),
    );
    if let Some(prediction) = &report.model_prediction {
        match (prediction.total.seconds(), report.relative_error) {
            (Some(p), Some(err)) => println!(
                "model estimate {} (relative error {:+.2}%)",
                fmt_ms(p),
                err * 1e2
            ),
            _ => println!("model estimate: UNSTABLE under observed rates"),
        }
    }
}

pub fn simulate(args: &SimulateArgs) -> Result<ExitCode> {
    let mut cfg: SimConfig = io::load_json(&args.config, "simulation config")?;
    apply_sim_overrides(&mut cfg, args.seed, args.horizon, args.warmup);

    let manifest = RunManifest::new("simulate")
        .input(&args.config)
        .param("seed", cfg.seed)
        .param("horizon", cfg.horizon)
        .param("warmup", cfg.warmup())
        .param("allocation", cfg.allocation.to_string());

    let report = match compare_with_model(&cfg) {
        Ok(r) => r,
        Err(e @ Error::InstabilityDetected { .. }) => {
            println!("{e}");
            return Ok(ExitCode::from(EXIT_INFEASIBLE));
        }
        Err(e) => return Err(e.into()),
    };
    print_sim_summary(&report);

    if let Some(out) = &args.out {
        let path = io::write_report(out, "simulate.json", &manifest, &report)?;
        let csv = format!(
            "{}\n{SIM_CSV_HEADER}\n{}\n",
            manifest.csv_comment(),
            sim_csv_row(&cfg.allocation, &report)
        );
        io::write_text(out, "simulate.csv", &csv)?;
        println!("report: {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

pub fn sweep(args: &SweepArgs) -> Result<ExitCode> {
    let mut base: SimConfig = io::load_json(&args.config, "simulation config")?;
    apply_sim_overrides(&mut base, args.seed, args.horizon, args.warmup);
    let allocations: Vec<Allocation> = args
        .allocations
        .split(',')
        .map(|s| s.trim().parse::<Allocation>().map_err(anyhow::Error::from))
        .collect::<Result<_>>()?;
    if allocations.is_empty() {
        bail!("--allocations lists no allocations");
    }

    let manifest = RunManifest::new("sweep")
        .input(&args.config)
        .param("seed", base.seed)
        .param("horizon", base.horizon)
        .param("warmup", base.warmup())
        .param("allocations", args.allocations.clone());

    // Independent runs under a common master seed: the arrival streams are
    // identical across allocations, so differences are allocation-driven.
    let reports: Vec<sojourn::Result<SimulationReport>> = std::thread::scope(|scope| {
        let handles: Vec<_> = allocations
            .iter()
            .map(|allocation| {
                let mut cfg = base.clone();
                cfg.allocation = allocation.clone();
                scope.spawn(move || compare_with_model(&cfg))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });

    let mut csv = format!("{}\n{SIM_CSV_HEADER}\n", manifest.csv_comment());
    let mut aborted = false;
    println!("allocation  processors  mean         model        rel.err");
    for (allocation, result) in allocations.iter().zip(reports) {
        match result {
            Ok(report) => {
                let model = report
                    .model_prediction
                    .as_ref()
                    .map_or("?".into(), |p| fmt_sojourn(p.total));
                println!(
                    "{:<11} {:<11} {:<12} {:<12} {}",
                    allocation.to_string(),
                    allocation.total(),
                    fmt_ms(report.mean_sojourn),
                    model,
                    report
                        .relative_error
                        .map_or(String::from("-"), |e| format!("{:+.2}%", e * 1e2)),
                );
                let _ = writeln!(csv, "{}", sim_csv_row(allocation, &report));
            }
            Err(e @ Error::InstabilityDetected { .. }) => {
                println!("{:<11} aborted: {e}", allocation.to_string());
                aborted = true;
            }
            Err(e) => return Err(e.into()),
        }
    }
    if let Some(out) = &args.out {
        let path = io::write_text(out, "sweep.csv", &csv)?;
        println!("table: {}", path.display());
    }
    Ok(if aborted { ExitCode::from(EXIT_INFEASIBLE) } else { ExitCode::SUCCESS })
}

// ---------------------------------------------------------------------------
// loop

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum CliMode {
    Cap { k_max: u32 },
    Target { t_max_ms: f64, #[serde(default)] k_cap: Option<u32> },
}

#[derive(Debug, Deserialize)]
struct ControlFile {
    mode: CliMode,
    #[serde(default)]
    improvement_threshold: Option<f64>,
    #[serde(default)]
    cooldown: Option<u32>,
    #[serde(default)]
    rebalance_cost_ms: Option<f64>,
    #[serde(default)]
    passive: Option<bool>,
    #[serde(default)]
    machine_size: Option<u32>,
    #[serde(default)]
    cost_amortization_tuples: Option<f64>,
}

impl ControlFile {
    fn into_config(self) -> ControlConfig {
        ControlConfig {
            mode: match self.mode {
                CliMode::Cap { k_max } => PlanMode::Cap { k_max },
                CliMode::Target { t_max_ms, k_cap } => {
                    PlanMode::Target { t_max: t_max_ms / 1e3, k_cap }
                }
            },
            improvement_threshold: self.improvement_threshold.unwrap_or(0.1),
            cooldown: self.cooldown.unwrap_or(3),
            rebalance_cost_secs: self.rebalance_cost_ms.unwrap_or(0.0) / 1e3,
            passive: self.passive.unwrap_or(false),
            machine_size: self.machine_size.unwrap_or(1),
            cost_amortization_tuples: self.cost_amortization_tuples,
        }
    }
}

fn default_sample_every() -> u32 {
    1
}

#[derive(Debug, Deserialize)]
struct LoopScenarioFile {
    initial_allocation: Vec<u32>,
    service_distribution: ServiceDistribution,
    arrival_process: ArrivalProcess,
    #[serde(default)]
    dispatch: Dispatch,
    seed: u64,
    intervals: u32,
    interval_seconds: f64,
    #[serde(default = "default_sample_every")]
    sample_every: u32,
    smoothing: Smoothing,
    #[serde(default)]
    enable_at_interval: u32,
    #[serde(default)]
    perturbation: Option<Perturbation>,
    #[serde(default)]
    queue_cap: Option<u64>,
}

fn reason_label(reason: &sojourn::control::Reason) -> String {
    use sojourn::control::Reason::*;
    match reason {
        ImprovementAboveThreshold => "improvement_above_threshold".into(),
        TargetViolated => "target_violated".into(),
        TargetMetWithFewer => "target_met_with_fewer".into(),
        Cooldown => "cooldown".into(),
        NoGain => "no_gain".into(),
        Passive => "passive".into(),
        StaleMetrics => "stale_metrics".into(),
        StalledOperator { operator } => format!("stalled_operator({operator})"),
        InfeasibleBudget => "infeasible_budget".into(),
        UnreachableTarget => "unreachable_target".into(),
        CostNotAmortized => "cost_not_amortized".into(),
    }
}

pub fn run_loop(args: &LoopArgs) -> Result<ExitCode> {
    let topology = io::load_topology(&args.topology)?;
    let control_file: ControlFile = io::load_json(&args.control, "control config")?;
    let scenario: LoopScenarioFile = io::load_json(&args.sim, "loop scenario")?;

    let smoothing = match &args.smooth {
        Some(spec) => io::parse_smoothing(spec)?,
        None => scenario.smoothing,
    };
    let seed = args.seed.unwrap_or(scenario.seed);

    let cfg = LoopConfig {
        topology,
        initial_allocation: Allocation::new(scenario.initial_allocation.clone())?,
        control: control_file.into_config(),
        service_distribution: scenario.service_distribution,
        arrival_process: scenario.arrival_process,
        dispatch: scenario.dispatch,
        sampling: SamplingConfig {
            sample_every: scenario.sample_every,
            pull_interval_secs: scenario.interval_seconds,
        },
        smoothing,
        intervals: scenario.intervals,
        enable_at_interval: scenario.enable_at_interval,
        perturbation: scenario.perturbation,
        seed,
        queue_cap: scenario.queue_cap,
    };

    let manifest = RunManifest::new("loop")
        .input(&args.topology)
        .input(&args.control)
        .input(&args.sim)
        .param("seed", seed)
        .param("intervals", cfg.intervals)
        .param("interval_seconds", cfg.sampling.pull_interval_secs)
        .param("sample_every", cfg.sampling.sample_every)
        .param("smoothing", smoothing)
        .param("initial_allocation", cfg.initial_allocation.to_string());

    let report = control::run_loop(&cfg)?;

    for rec in &report.records {
        let mean = rec.measured_mean_sojourn.map_or(String::from("-"), fmt_ms);
        println!(
            "interval {:>3} [{:>8.1}s..{:>8.1}s] k={} mean {}{}",
            rec.interval,
            rec.window_start,
            rec.window_end,
            rec.allocation,
            mean,
            if rec.rebalanced {
                format!(
                    " -> re-balanced to {}",
                    rec.decision.proposed.as_ref().expect("applied decision has proposal")
                )
            } else {
                String::new()
            }
        );
    }
    println!("re-balances: {}", report.rebalances);

    if let Some(out) = &args.out {
        write_loop_outputs(out, &manifest, &report)?;
        println!("series: {}", out.join("loop_series.csv").display());
    }
    Ok(ExitCode::SUCCESS)
}

fn write_loop_outputs(
    out: &std::path::Path,
    manifest: &RunManifest,
    report: &LoopReport,
) -> Result<()> {
    io::write_report(out, "loop.json", manifest, report)?;

    let mut csv = format!(
        "{}\ninterval,window_start_s,window_end_s,completed,measured_mean_sojourn_s,\
         allocation,rebalanced,reason\n",
        manifest.csv_comment()
    );
    for rec in &report.records {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            rec.interval,
            rec.window_start,
            rec.window_end,
            rec.completed,
            rec.measured_mean_sojourn.map_or(String::new(), |m| m.to_string()),
            rec.allocation,
            rec.rebalanced,
            reason_label(&rec.decision.reason),
        );
    }
    io::write_text(out, "loop_series.csv", &csv)?;

    #[derive(Serialize)]
    #[serde(tag = "type", rename_all = "snake_case")]
    enum LogLine<'a> {
        Manifest { manifest: &'a RunManifest },
        Decision {
            timestamp_s: f64,
            #[serde(flatten)]
            decision: &'a sojourn::control::RebalanceDecision,
        },
    }
    let mut ndjson = serde_json::to_string(&LogLine::Manifest { manifest })?;
    ndjson.push('\n');
    for rec in &report.records {
        let line = LogLine::Decision { timestamp_s: rec.window_end, decision: &rec.decision };
        ndjson.push_str(&serde_json::to_string(&line)?);
        ndjson.push('\n');
    }
    io::write_text(out, "decisions.ndjson", &ndjson)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// replay

#[derive(Serialize)]
struct ReplayInterval {
    interval: u64,
    stale_operators: Vec<usize>,
    note: Option<String>,
    plan: Option<Plan>,
}

pub fn replay(args: &ReplayArgs) -> Result<ExitCode> {
    let mode = match (args.kmax, args.tmax_ms) {
        (Some(k_max), None) => PlanMode::Cap { k_max },
        (None, Some(t_max_ms)) => PlanMode::Target { t_max: t_max_ms / 1e3, k_cap: None },
        _ => bail!("specify exactly one of --kmax or --tmax-ms"),
    };
    let smoothing = io::parse_smoothing(&args.smooth)?;
    let text = std::fs::read_to_string(&args.log)
        .with_context(|| format!("reading metric log {}", args.log.display()))?;
    let records = parse_log(&text)?;
    let intervals = group_intervals(&records);
    if intervals.is_empty() {
        bail!("metric log holds no closed intervals (each interval ends with a global record)");
    }
    let n_ops = intervals
        .iter()
        .flat_map(|(samples, _)| samples.iter().map(|s| s.operator_id + 1))
        .max()
        .context("metric log holds no operator samples")?;

    let manifest = RunManifest::new("replay")
        .input(&args.log)
        .param("kmax", args.kmax)
        .param("tmax_ms", args.tmax_ms)
        .param("smoothing", smoothing)
        .param("nm", args.nm);

    // The pull interval only matters for validation here; rates come from
    // the recorded windows themselves.
    let sampling = SamplingConfig { sample_every: args.nm, pull_interval_secs: 1.0 };
    let mut pipeline = Pipeline::new(n_ops, sampling, smoothing)?;
    let mut results = Vec::new();
    for (idx, (samples, global)) in intervals.iter().enumerate() {
        let n = idx as u64 + 1;
        let sm = pipeline.ingest(samples, global)?;
        if !sm.stale_operators.is_empty() {
            println!(
                "interval {n}: planning paused, stale operators {:?}",
                sm.stale_operators
            );
            results.push(ReplayInterval {
                interval: n,
                stale_operators: sm.stale_operators.clone(),
                note: Some("planning paused".into()),
                plan: None,
            });
            continue;
        }
        let profile = match measured_profile(&sm) {
            Ok(p) => p,
            Err(e) => {
                println!("interval {n}: planning paused, {e}");
                results.push(ReplayInterval {
                    interval: n,
                    stale_operators: vec![],
                    note: Some(e.to_string()),
                    plan: None,
                });
                continue;
            }
        };
        let plan = match mode {
            PlanMode::Cap { k_max } => assign_processors(&profile, k_max)?,
            PlanMode::Target { t_max, k_cap } => {
                match provision_min_resources(&profile, t_max, k_cap) {
                    Ok(p) => p,
                    Err(e @ Error::UnreachableTarget { .. }) => {
                        println!("interval {n}: {e}");
                        results.push(ReplayInterval {
                            interval: n,
                            stale_operators: vec![],
                            note: Some(e.to_string()),
                            plan: None,
                        });
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        };
        println!(
            "interval {n}: k = {} ({} processors, E[T] {}{})",
            plan.allocation,
            plan.processors_used,
            fmt_sojourn(plan.estimate.total),
            if plan.feasible { "" } else { ", infeasible" },
        );
        results.push(ReplayInterval {
            interval: n,
            stale_operators: vec![],
            note: None,
            plan: Some(plan),
        });
    }

    if let Some(out) = &args.out {
        #[derive(Serialize)]
        struct ReplayReport {
            intervals: Vec<ReplayInterval>,
        }
        let path = io::write_report(out, "replay.json", &manifest, &ReplayReport { intervals: results })?;
        println!("report: {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}
