//! Processor-allocation planning.
//!
//! Two objectives are supported: minimize the expected network sojourn under
//! a processor budget (CAP), and minimize the processor count under a sojourn
//! target (TARGET). Both are solved greedily: start every operator at its
//! stability minimum and repeatedly grant one processor to the operator with
//! the largest marginal benefit. Convexity of the per-operator sojourn in the
//! processor count makes the CAP greedy exactly optimal; an exhaustive
//! enumeration oracle is provided to verify that claim and the TARGET
//! minimality in tests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::queueing::{
    erlang_sojourn, marginal_benefit, min_stable_count, network_sojourn, Allocation, Sojourn,
    SojournEstimate,
};
use crate::topology::RateProfile;

/// Allocations the enumeration oracle refuses to search past.
const ENUMERATION_LIMIT: u128 = 10_000_000;
/// Default safety bound on the TARGET greedy: stability minimum plus this.
const DEFAULT_TARGET_HEADROOM: u32 = 10_000;

/// Planning objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanMode {
    /// Minimize expected sojourn using at most `k_max` processors.
    Cap { k_max: u32 },
    /// Minimize processors subject to an expected-sojourn bound in seconds.
    Target { t_max: f64, k_cap: Option<u32> },
}

/// A planning request: measured or solved rates plus the objective.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanRequest {
    pub rates: RateProfile,
    pub mode: PlanMode,
}

impl PlanRequest {
    pub fn validate(&self) -> Result<()> {
        match self.mode {
            PlanMode::Cap { k_max } => {
                if (k_max as usize) < self.rates.len() {
                    return Err(Error::InvalidArgument(format!(
                        "k_max = {k_max} is below the operator count {}",
                        self.rates.len()
                    )));
                }
            }
            PlanMode::Target { t_max, .. } => {
                if !(t_max.is_finite() && t_max > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "t_max must be finite and positive, got {t_max}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One greedy step: which operator received a processor and at what benefit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceStep {
    pub step: u32,
    pub operator: usize,
    pub delta: f64,
}

/// Why a plan could not satisfy its constraint.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Infeasibility {
    /// The stability minimum alone exceeds the budget.
    InsufficientBudget { required: u32, budget: u32, deficit: u32 },
    /// The safety cap was exhausted before the target was met.
    TargetNotReached { cap: u32, achieved_secs: Option<f64> },
}

/// A planning result. `feasible` plans satisfy their constraint; infeasible
/// ones carry diagnostics and the best allocation examined.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Plan {
    pub allocation: Allocation,
    pub estimate: SojournEstimate,
    pub processors_used: u32,
    pub feasible: bool,
    pub infeasibility: Option<Infeasibility>,
    pub trace: Vec<TraceStep>,
    /// Number of marginal-benefit evaluations performed by the greedy loop.
    pub delta_evaluations: u64,
}

/// Dispatches a request to the matching solver.
pub fn plan(req: &PlanRequest) -> Result<Plan> {
    req.validate()?;
    match req.mode {
        PlanMode::Cap { k_max } => assign_processors(&req.rates, k_max),
        PlanMode::Target { t_max, k_cap } => provision_min_resources(&req.rates, t_max, k_cap),
    }
}

fn min_counts(rates: &RateProfile) -> Result<Vec<u32>> {
    rates
        .lambdas
        .iter()
        .zip(&rates.mus)
        .map(|(&l, &m)| min_stable_count(l, m))
        .collect()
}

/// Picks the operator with the largest marginal benefit; ties break toward
/// the lowest index.
fn best_operator(rates: &RateProfile, counts: &[u32], evals: &mut u64) -> Result<(usize, f64)> {
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, ((&lambda, &mu), &k)) in rates.lambdas.iter().zip(&rates.mus).zip(counts).enumerate() {
        let delta = marginal_benefit(lambda, mu, k)?;
        *evals += 1;
        if delta > best.1 {
            best = (i, delta);
        }
    }
    Ok(best)
}

/// Minimizes the expected network sojourn with at most `k_max` processors.
///
/// Every operator starts at its stability minimum; if that alone exceeds the
/// budget the plan is infeasible and carries the deficit. Otherwise one
/// processor at a time goes to the operator with the largest marginal
/// benefit until the budget is spent. The result is exactly optimal among
/// all integer allocations within the budget.
pub fn assign_processors(rates: &RateProfile, k_max: u32) -> Result<Plan> {
    let mut counts = min_counts(rates)?;
    let required: u32 = counts.iter().sum();

    if required > k_max {
        let allocation = Allocation::new(counts)?;
        let estimate = network_sojourn(rates, &allocation)?;
        return Ok(Plan {
            processors_used: required,
            allocation,
            estimate,
            feasible: false,
            infeasibility: Some(Infeasibility::InsufficientBudget {
                required,
                budget: k_max,
                deficit: required - k_max,
            }),
            trace: Vec::new(),
            delta_evaluations: 0,
        });
    }

    let mut trace = Vec::new();
    let mut evals = 0u64;
    let mut used = required;
    let mut step = 0u32;
    while used < k_max {
        let (op, delta) = best_operator(rates, &counts, &mut evals)?;
        if delta <= 0.0 {
            // No operator carries traffic; extra processors would be idle.
            break;
        }
        step += 1;
        counts[op] += 1;
        used += 1;
        trace.push(TraceStep { step, operator: op, delta });
    }

    let allocation = Allocation::new(counts)?;
    let estimate = network_sojourn(rates, &allocation)?;
    Ok(Plan {
        processors_used: used,
        allocation,
        estimate,
        feasible: true,
        infeasibility: None,
        trace,
        delta_evaluations: evals,
    })
}

/// The `k -> infinity` floor of the expected network sojourn: pure service,
/// `(1/lambda0) * sum_i lambda_i / mu_i`.
pub fn sojourn_lower_bound(rates: &RateProfile) -> f64 {
    rates
        .lambdas
        .iter()
        .zip(&rates.mus)
        .map(|(&l, &m)| l / m)
        .sum::<f64>()
        / rates.lambda0
}

/// Minimizes the processor count subject to `E[T] <= t_max`.
///
/// Targets at or below the pure-service floor are rejected up front. The
/// greedy grows the allocation by marginal benefit until the target is met
/// or the safety cap (`k_cap`, default stability minimum + 10000) is
/// exhausted.
pub fn provision_min_resources(
    rates: &RateProfile,
    t_max: f64,
    k_cap: Option<u32>,
) -> Result<Plan> {
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "t_max must be finite and positive, got {t_max}"
        )));
    }
    let lower_bound = sojourn_lower_bound(rates);
    if t_max <= lower_bound {
        return Err(Error::UnreachableTarget {
            t_max_secs: t_max,
            lower_bound_secs: lower_bound,
        });
    }

    let mut counts = min_counts(rates)?;
    let required: u32 = counts.iter().sum();
    let cap = k_cap.unwrap_or_else(|| required.saturating_add(DEFAULT_TARGET_HEADROOM));

    let mut trace = Vec::new();
    let mut evals = 0u64;
    let mut used = required;
    let mut step = 0u32;
    let mut allocation = Allocation::new(counts.clone())?;
    let mut estimate = network_sojourn(rates, &allocation)?;

    while estimate.total > Sojourn::Finite(t_max) {
        if used >= cap {
            return Ok(Plan {
                processors_used: used,
                allocation,
                feasible: false,
                infeasibility: Some(Infeasibility::TargetNotReached {
                    cap,
                    achieved_secs: estimate.total.seconds(),
                }),
                estimate,
                trace,
                delta_evaluations: evals,
            });
        }
        let (op, delta) = best_operator(rates, &counts, &mut evals)?;
        if delta <= 0.0 {
            break;
        }
        step += 1;
        counts[op] += 1;
        used += 1;
        trace.push(TraceStep { step, operator: op, delta });
        allocation = Allocation::new(counts.clone())?;
        estimate = network_sojourn(rates, &allocation)?;
    }

    let feasible = estimate.total <= Sojourn::Finite(t_max);
    Ok(Plan {
        processors_used: used,
        allocation,
        infeasibility: if feasible {
            None
        } else {
            Some(Infeasibility::TargetNotReached { cap, achieved_secs: estimate.total.seconds() })
        },
        feasible,
        estimate,
        trace,
        delta_evaluations: evals,
    })
}

/// Number of allocations with `k_i >= 1` and `sum k_i <= k_max`:
/// `C(k_max, n)`.
fn enumeration_count(n: usize, k_max: u32) -> u128 {
    if (k_max as usize) < n {
        return 0;
    }
    let mut c: u128 = 1;
    for i in 0..n as u128 {
        c = c.saturating_mul(k_max as u128 - i) / (i + 1);
        if c > ENUMERATION_LIMIT * 1000 {
            return c;
        }
    }
    c
}

/// Exhaustive-search oracle: examines every integer allocation within the
/// budget and returns one minimizing the expected sojourn, breaking ties
/// toward the lexicographically smallest allocation. Guarded against
/// enumerations past ten million allocations.
pub fn brute_force_optimal(rates: &RateProfile, k_max: u32) -> Result<Plan> {
    let n = rates.len();
    let count = enumeration_count(n, k_max);
    if count > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge { count, limit: ENUMERATION_LIMIT });
    }

    let mins = min_counts(rates)?;
    let required: u32 = mins.iter().sum();
    if required > k_max {
        let allocation = Allocation::new(mins)?;
        let estimate = network_sojourn(rates, &allocation)?;
        return Ok(Plan {
            processors_used: required,
            allocation,
            estimate,
            feasible: false,
            infeasibility: Some(Infeasibility::InsufficientBudget {
                required,
                budget: k_max,
                deficit: required - k_max,
            }),
            trace: Vec::new(),
            delta_evaluations: 0,
        });
    }

    // Per-operator weighted sojourn tables: contribution[i][k-1] = lambda_i * E[T_i](k).
    let per_op_max = k_max - (n as u32 - 1);
    let mut table: Vec<Vec<Option<f64>>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut col = Vec::with_capacity(per_op_max as usize);
        for k in 1..=per_op_max {
            let v = erlang_sojourn(rates.lambdas[i], rates.mus[i], k)?
                .seconds()
                .map(|e| rates.lambdas[i] * e);
            col.push(v);
        }
        table.push(col);
    }
    // Cheapest possible contribution per operator, for pruning.
    let mut best_tail = vec![0.0f64; n + 1];
    for i in (0..n).rev() {
        let own = table[i]
            .iter()
            .flatten()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        best_tail[i] = best_tail[i + 1] + own;
    }

    struct Search<'a> {
        table: &'a [Vec<Option<f64>>],
        best_tail: &'a [f64],
        k_max: u32,
        best_weighted: f64,
        best_counts: Option<Vec<u32>>,
        current: Vec<u32>,
    }

    impl Search<'_> {
        fn descend(&mut self, op: usize, used: u32, partial: f64) {
            let n = self.table.len();
            if op == n {
                if partial < self.best_weighted {
                    self.best_weighted = partial;
                    self.best_counts = Some(self.current.clone());
                }
                return;
            }
            if partial + self.best_tail[op] >= self.best_weighted {
                return;
            }
            let remaining_after = (n - op - 1) as u32;
            let max_here = self.k_max - used - remaining_after;
            for k in 1..=max_here {
                if let Some(w) = self.table[op][(k - 1) as usize] {
                    self.current[op] = k;
                    self.descend(op + 1, used + k, partial + w);
                }
            }
            self.current[op] = 1;
        }
    }

    let mut search = Search {
        table: &table,
        best_tail: &best_tail,
        k_max,
        best_weighted: f64::INFINITY,
        best_counts: None,
        current: vec![1; n],
    };
    search.descend(0, 0, 0.0);

    let counts = search.best_counts.unwrap_or(mins);
    let allocation = Allocation::new(counts)?;
    let estimate = network_sojourn(rates, &allocation)?;
    Ok(Plan {
        processors_used: allocation.total(),
        feasible: estimate.total.is_finite(),
        infeasibility: None,
        allocation,
        estimate,
        trace: Vec::new(),
        delta_evaluations: 0,
    })
}
