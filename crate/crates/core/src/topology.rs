//! Operator network description and steady-state traffic rates.
//!
//! A topology is a directed graph of operators with probabilistic routing and
//! external arrivals. Splits, joins and feedback loops are all allowed as long
//! as the network stays open (every tuple eventually leaves). Steady-state
//! per-operator arrival rates are the unique fixed point of
//! `lambda[j] = a[j] + sum_i lambda[i] * p[i][j]`.

use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Routing-row sums above `1 + ROW_SUM_TOL` are rejected.
const ROW_SUM_TOL: f64 = 1e-9;
/// A row is exit-capable when its deficit `1 - sum` exceeds this.
const EXIT_EPS: f64 = 1e-12;
/// Fixed-point iteration stops at this relative change.
const ITER_TOL: f64 = 1e-12;
/// Iterative and direct solutions must agree to this relative tolerance.
const AGREE_TOL: f64 = 1e-9;
const MAX_ITERATIONS: u32 = 100_000;

/// One operator of the network: a named station whose processors each serve
/// `service_rate` tuples per second on average.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorSpec {
    /// Dense 0-based index; assigned from position when loaded from a file.
    #[serde(skip)]
    pub id: usize,
    pub name: String,
    pub service_rate: f64,
}

/// The operator network: routing probabilities and external arrival rates.
///
/// `routing[i][j]` is the probability that a tuple finished at operator `i`
/// is forwarded to operator `j`; the row deficit `1 - sum` is the exit
/// probability. `external_rates[j]` is the rate of tuples entering operator
/// `j` from outside the network, in tuples per second.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Topology {
    pub operators: Vec<OperatorSpec>,
    pub routing: Vec<Vec<f64>>,
    pub external_rates: Vec<f64>,
}

impl<'de> Deserialize<'de> for Topology {
    /// Operator ids are positional in the document format and assigned here,
    /// so a topology parses identically standalone or embedded.
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct RawOperator {
            name: String,
            service_rate: f64,
        }
        #[derive(Deserialize)]
        struct Raw {
            operators: Vec<RawOperator>,
            routing: Vec<Vec<f64>>,
            external_rates: Vec<f64>,
        }
        let raw = Raw::deserialize(deserializer)?;
        Ok(Topology::new(
            raw.operators
                .into_iter()
                .map(|o| (o.name, o.service_rate))
                .collect::<Vec<_>>(),
            raw.routing,
            raw.external_rates,
        ))
    }
}

/// Steady-state rates feeding the performance model: total external rate,
/// per-operator aggregate arrival rates and per-processor service rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateProfile {
    pub lambda0: f64,
    pub lambdas: Vec<f64>,
    pub mus: Vec<f64>,
}

impl RateProfile {
    /// Builds a profile from measured or externally supplied rates.
    pub fn new(lambda0: f64, lambdas: Vec<f64>, mus: Vec<f64>) -> Result<Self> {
        if lambdas.len() != mus.len() {
            return Err(Error::DimensionMismatch {
                expected: lambdas.len(),
                got: mus.len(),
            });
        }
        if lambdas.is_empty() {
            return Err(Error::InvalidArgument("rate profile has no operators".into()));
        }
        if !(lambda0.is_finite() && lambda0 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "lambda0 must be finite and positive, got {lambda0}"
            )));
        }
        for (i, &l) in lambdas.iter().enumerate() {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "lambda[{i}] must be finite and non-negative, got {l}"
                )));
            }
        }
        for (i, &m) in mus.iter().enumerate() {
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "mu[{i}] must be finite and positive, got {m}"
                )));
            }
        }
        Ok(Self { lambda0, lambdas, mus })
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }
}

/// A single invariant breach found by [`validate_topology`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Empty,
    NonDenseId { position: usize, id: usize },
    BadServiceRate { operator: usize, value: f64 },
    RoutingRowCount { expected: usize, got: usize },
    RoutingRowLength { row: usize, expected: usize, got: usize },
    RoutingEntryOutOfRange { from: usize, to: usize, value: f64 },
    RoutingRowSum { row: usize, sum: f64 },
    ExternalRatesLength { expected: usize, got: usize },
    BadExternalRate { operator: usize, value: f64 },
    NoExternalTraffic,
    NoExitReachable { trapped: Vec<usize> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "topology has no operators"),
            Violation::NonDenseId { position, id } => {
                write!(f, "operator at position {position} has id {id}; ids must be dense 0..N-1")
            }
            Violation::BadServiceRate { operator, value } => {
                write!(f, "operator {operator}: service_rate must be finite and positive, got {value}")
            }
            Violation::RoutingRowCount { expected, got } => {
                write!(f, "routing matrix has {got} rows, expected {expected}")
            }
            Violation::RoutingRowLength { row, expected, got } => {
                write!(f, "routing row {row} has {got} entries, expected {expected}")
            }
            Violation::RoutingEntryOutOfRange { from, to, value } => {
                write!(f, "routing[{from}][{to}] = {value} is outside [0, 1]")
            }
            Violation::RoutingRowSum { row, sum } => {
                write!(f, "routing row {row} sums to {sum} > 1")
            }
            Violation::ExternalRatesLength { expected, got } => {
                write!(f, "external_rates has {got} entries, expected {expected}")
            }
            Violation::BadExternalRate { operator, value } => {
                write!(f, "operator {operator}: external rate must be finite and non-negative, got {value}")
            }
            Violation::NoExternalTraffic => {
                write!(f, "no external traffic: the external rates sum to 0")
            }
            Violation::NoExitReachable { trapped } => {
                write!(f, "no exit reachable from operators {trapped:?}; traffic equations diverge")
            }
        }
    }
}

/// Outcome of [`validate_topology`]: empty means the topology is well formed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl Topology {
    /// Assembles a topology, assigning dense operator ids from position.
    pub fn new(
        operators: Vec<(impl Into<String>, f64)>,
        routing: Vec<Vec<f64>>,
        external_rates: Vec<f64>,
    ) -> Self {
        let operators = operators
            .into_iter()
            .enumerate()
            .map(|(id, (name, service_rate))| OperatorSpec {
                id,
                name: name.into(),
                service_rate,
            })
            .collect();
        Self { operators, routing, external_rates }
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    /// Per-processor service rates in operator order.
    pub fn service_rates(&self) -> Vec<f64> {
        self.operators.iter().map(|o| o.service_rate).collect()
    }

    /// Parses the JSON document format; ids are assigned from array order.
    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(format!("topology: {e}")))
    }
}

/// Checks every structural invariant and reports all breaches at once.
/// Violations are data, not faults: the caller decides what to do with them.
pub fn validate_topology(t: &Topology) -> ValidationReport {
    let mut violations = Vec::new();
    let n = t.operators.len();

    if n == 0 {
        violations.push(Violation::Empty);
        return ValidationReport { violations };
    }
    for (position, op) in t.operators.iter().enumerate() {
        if op.id != position {
            violations.push(Violation::NonDenseId { position, id: op.id });
        }
        if !(op.service_rate.is_finite() && op.service_rate > 0.0) {
            violations.push(Violation::BadServiceRate {
                operator: position,
                value: op.service_rate,
            });
        }
    }

    let mut shape_ok = true;
    if t.routing.len() != n {
        violations.push(Violation::RoutingRowCount { expected: n, got: t.routing.len() });
        shape_ok = false;
    }
    for (row, r) in t.routing.iter().enumerate() {
        if r.len() != n {
            violations.push(Violation::RoutingRowLength { row, expected: n, got: r.len() });
            shape_ok = false;
            continue;
        }
        let mut sum = 0.0;
        for (to, &p) in r.iter().enumerate() {
            if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
                violations.push(Violation::RoutingEntryOutOfRange { from: row, to, value: p });
                shape_ok = false;
            } else {
                sum += p;
            }
        }
        if sum > 1.0 + ROW_SUM_TOL {
            violations.push(Violation::RoutingRowSum { row, sum });
            shape_ok = false;
        }
    }

    if t.external_rates.len() != n {
        violations.push(Violation::ExternalRatesLength { expected: n, got: t.external_rates.len() });
        shape_ok = false;
    } else {
        let mut total = 0.0;
        for (operator, &a) in t.external_rates.iter().enumerate() {
            if !(a.is_finite() && a >= 0.0) {
                violations.push(Violation::BadExternalRate { operator, value: a });
                shape_ok = false;
            } else {
                total += a;
            }
        }
        if shape_ok && total <= 0.0 {
            violations.push(Violation::NoExternalTraffic);
        }
    }

    if shape_ok {
        if let Some(trapped) = trapped_component(t) {
            violations.push(Violation::NoExitReachable { trapped });
        }
    }

    ValidationReport { violations }
}

/// Finds a strongly-connected component that carries traffic but cannot reach
/// any exit. Returns `None` when every active operator can drain.
fn trapped_component(t: &Topology) -> Option<Vec<usize>> {
    let n = t.operators.len();

    // Operators receiving traffic: forward reachability from external sources.
    let mut active = vec![false; n];
    let mut stack: Vec<usize> = (0..n).filter(|&j| t.external_rates[j] > 0.0).collect();
    for &j in &stack {
        active[j] = true;
    }
    while let Some(i) = stack.pop() {
        for (j, &p) in t.routing[i].iter().enumerate() {
            if p > 0.0 && !active[j] {
                active[j] = true;
                stack.push(j);
            }
        }
    }

    // Operators from which an exit is reachable: reverse reachability from
    // rows with a positive exit deficit.
    let mut can_exit = vec![false; n];
    let mut stack: Vec<usize> = (0..n)
        .filter(|&i| 1.0 - t.routing[i].iter().sum::<f64>() > EXIT_EPS)
        .collect();
    for &i in &stack {
        can_exit[i] = true;
    }
    while let Some(j) = stack.pop() {
        for (i, row) in t.routing.iter().enumerate() {
            if row[j] > 0.0 && !can_exit[i] {
                can_exit[i] = true;
                stack.push(i);
            }
        }
    }

    let trapped: Vec<usize> = (0..n).filter(|&i| active[i] && !can_exit[i]).collect();
    if trapped.is_empty() {
        return None;
    }

    // Name a terminal SCC among the trapped operators. tarjan_scc returns
    // components in reverse topological order, so the first trapped one is a
    // sink of the condensation.
    let mut graph = DiGraph::<(), ()>::new();
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if t.routing[i][j] > 0.0 {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    for scc in tarjan_scc(&graph) {
        let mut ids: Vec<usize> = scc.iter().map(|nx| nx.index()).collect();
        if ids.iter().all(|&i| trapped.contains(&i)) {
            ids.sort_unstable();
            return Some(ids);
        }
    }
    Some(trapped)
}

/// Solves the traffic equations `lambda[j] = a[j] + sum_i lambda[i] * p[i][j]`
/// for the steady-state per-operator arrival rates.
///
/// The fixed point is computed twice: by iteration from the external rates
/// and by a direct linear solve of `(I - P^T) lambda = a`. The two routes
/// must agree to `1e-9` relative; the direct solution is returned.
pub fn solve_traffic(t: &Topology) -> Result<RateProfile> {
    let report = validate_topology(t);
    if !report.is_ok() {
        return Err(Error::InvalidTopology(report));
    }
    let n = t.operators.len();
    let a = &t.external_rates;
    let lambda0: f64 = a.iter().sum();

    // Route 1: fixed-point iteration.
    let mut lam = a.clone();
    let mut next = vec![0.0; n];
    let blowup = 1e18 * lambda0;
    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        for (j, nj) in next.iter_mut().enumerate() {
            let mut v = a[j];
            for (li, row) in lam.iter().zip(&t.routing) {
                v += li * row[j];
            }
            *nj = v;
        }
        let scale = next.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
        let delta = lam
            .iter()
            .zip(&next)
            .map(|(o, nv)| (o - nv).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut lam, &mut next);
        if delta / scale < ITER_TOL {
            converged = true;
            break;
        }
        if scale > blowup {
            break;
        }
    }
    if !converged {
        let trapped = trapped_component(t).unwrap_or_default();
        return Err(Error::NonOpenNetwork { trapped });
    }

    // Route 2: direct solve of (I - P^T) lambda = a.
    let mut m = nalgebra::DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(j, i)] -= t.routing[i][j];
        }
    }
    let rhs = nalgebra::DVector::from_column_slice(a);
    let direct = m.lu().solve(&rhs).ok_or_else(|| {
        let trapped = trapped_component(t).unwrap_or_default();
        Error::NonOpenNetwork { trapped }
    })?;

    let scale = direct.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
    let max_rel_gap = lam
        .iter()
        .zip(direct.iter())
        .map(|(it, di)| (it - di).abs() / scale)
        .fold(0.0, f64::max);
    if max_rel_gap > AGREE_TOL {
        return Err(Error::SolverDisagreement { max_rel_gap });
    }

    let lambdas: Vec<f64> = direct.iter().map(|&v| v.max(0.0)).collect();
    Ok(RateProfile {
        lambda0,
        lambdas,
        mus: t.service_rates(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn chain() -> Topology {
        Topology::new(
            vec![("a", 2.0), ("b", 3.0)],
            vec![vec![0.0, 1.0], vec![0.0, 0.0]],
            vec![2.0, 0.0],
        )
    }

    #[test]
    fn single_operator_is_ok() {
        let t = Topology::new(vec![("only", 1.0)], vec![vec![0.0]], vec![1.0]);
        assert!(validate_topology(&t).is_ok());
    }

    #[test]
    fn row_sum_above_one_is_reported() {
        let t = Topology::new(
            vec![("a", 1.0), ("b", 1.0)],
            vec![vec![0.6, 0.6], vec![0.0, 0.0]],
            vec![1.0, 0.0],
        );
        let report = validate_topology(&t);
        assert!(!report.is_ok());
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::RoutingRowSum { row: 0, .. })));
        assert!(format!("{report}").contains("row 0 sums to 1.2"));
    }

    #[test]
    fn closed_loop_has_no_exit() {
        let t = Topology::new(
            vec![("a", 1.0), ("b", 1.0)],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![1.0, 0.0],
        );
        let report = validate_topology(&t);
        assert_eq!(
            report.violations,
            vec![Violation::NoExitReachable { trapped: vec![0, 1] }]
        );
        assert!(matches!(
            solve_traffic(&t),
            Err(Error::InvalidTopology(_))
        ));
    }

    #[test]
    fn chain_conserves_flow() {
        let p = solve_traffic(&chain()).unwrap();
        assert_relative_eq!(p.lambda0, 2.0);
        assert_relative_eq!(p.lambdas[0], 2.0);
        assert_relative_eq!(p.lambdas[1], 2.0);
    }

    #[test]
    fn feedback_loop_amplifies_rates() {
        // lambda1 = 1 + 0.5 * lambda2, lambda2 = lambda1 -> both 2.
        let t = Topology::new(
            vec![("a", 5.0), ("b", 5.0)],
            vec![vec![0.0, 1.0], vec![0.5, 0.0]],
            vec![1.0, 0.0],
        );
        let p = solve_traffic(&t).unwrap();
        assert_relative_eq!(p.lambda0, 1.0);
        assert_relative_eq!(p.lambdas[0], 2.0, max_relative = 1e-9);
        assert_relative_eq!(p.lambdas[1], 2.0, max_relative = 1e-9);
    }

    #[test]
    fn split_divides_traffic() {
        let t = Topology::new(
            vec![("src", 4.0), ("l", 2.0), ("r", 2.0)],
            vec![
                vec![0.0, 0.5, 0.5],
                vec![0.0, 0.0, 0.0],
                vec![0.0, 0.0, 0.0],
            ],
            vec![3.0, 0.0, 0.0],
        );
        let p = solve_traffic(&t).unwrap();
        assert_relative_eq!(p.lambdas[0], 3.0);
        assert_relative_eq!(p.lambdas[1], 1.5, max_relative = 1e-12);
        assert_relative_eq!(p.lambdas[2], 1.5, max_relative = 1e-12);
    }

    #[test]
    fn inner_closed_component_is_named() {
        // Operators 1 and 2 cycle forever; 0 feeds them and could otherwise exit.
        let t = Topology::new(
            vec![("feed", 1.0), ("x", 1.0), ("y", 1.0)],
            vec![
                vec![0.0, 0.5, 0.0],
                vec![0.0, 0.0, 1.0],
                vec![0.0, 1.0, 0.0],
            ],
            vec![1.0, 0.0, 0.0],
        );
        let report = validate_topology(&t);
        assert_eq!(
            report.violations,
            vec![Violation::NoExitReachable { trapped: vec![1, 2] }]
        );
    }

    #[test]
    fn rate_profile_rejects_bad_inputs() {
        assert!(RateProfile::new(0.0, vec![1.0], vec![1.0]).is_err());
        assert!(RateProfile::new(1.0, vec![-1.0], vec![1.0]).is_err());
        assert!(RateProfile::new(1.0, vec![1.0], vec![0.0]).is_err());
        assert!(RateProfile::new(1.0, vec![1.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn json_round_trip_assigns_ids() {
        let s = r#"{
            "operators": [
                {"name": "src", "service_rate": 2.0},
                {"name": "sink", "service_rate": 3.0}
            ],
            "routing": [[0.0, 1.0], [0.0, 0.0]],
            "external_rates": [2.0, 0.0]
        }"#;
        let t = Topology::from_json_str(s).unwrap();
        assert_eq!(t.operators[1].id, 1);
        assert!(validate_topology(&t).is_ok());
    }

    #[test]
    fn malformed_json_names_the_location() {
        let err = Topology::from_json_str("{\"operators\": [").unwrap_err();
        match err {
            Error::Parse(msg) => assert!(msg.contains("line"), "{msg}"),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
