//! Per-operator and network-level expected sojourn times.
//!
//! Each operator is treated as an M/M/k station. The mean sojourn is the
//! Erlang-C waiting term plus the mean service time, evaluated through the
//! overflow-free Erlang-B recurrence so that rates up to 1e7/s and thousands
//! of processors stay in range. The network mean is the arrival-rate-weighted
//! average of the per-operator means, normalized by the external rate.

use std::cmp::Ordering;
use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::topology::RateProfile;

/// Marginal-benefit value assigned to an unstable operator: large enough to
/// dominate every finite delta without being a floating-point infinity.
pub const MAX_BENEFIT: f64 = f64::MAX;

/// A mean sojourn time in seconds, or the distinguished unstable value for
/// stations whose processors cannot keep up with arrivals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sojourn {
    Finite(f64),
    Unstable,
}

impl Sojourn {
    pub fn is_finite(&self) -> bool {
        matches!(self, Sojourn::Finite(_))
    }

    pub fn is_unstable(&self) -> bool {
        matches!(self, Sojourn::Unstable)
    }

    /// The finite value, if any.
    pub fn seconds(&self) -> Option<f64> {
        match self {
            Sojourn::Finite(v) => Some(*v),
            Sojourn::Unstable => None,
        }
    }
}

impl PartialOrd for Sojourn {
    /// Unstable compares greater than any finite value.
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Sojourn::Unstable, Sojourn::Unstable) => Some(Ordering::Equal),
            (Sojourn::Unstable, Sojourn::Finite(_)) => Some(Ordering::Greater),
            (Sojourn::Finite(_), Sojourn::Unstable) => Some(Ordering::Less),
            (Sojourn::Finite(a), Sojourn::Finite(b)) => a.partial_cmp(b),
        }
    }
}

impl fmt::Display for Sojourn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sojourn::Finite(v) => write!(f, "{v}"),
            Sojourn::Unstable => write!(f, "unstable"),
        }
    }
}

impl Serialize for Sojourn {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Sojourn::Finite(v) => serializer.serialize_f64(*v),
            Sojourn::Unstable => serializer.serialize_str("unstable"),
        }
    }
}

/// Processor counts per operator; every operator keeps at least one.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct Allocation {
    pub counts: Vec<u32>,
}

impl Allocation {
    pub fn new(counts: Vec<u32>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidArgument("allocation has no operators".into()));
        }
        if let Some(i) = counts.iter().position(|&k| k == 0) {
            return Err(Error::InvalidArgument(format!(
                "allocation[{i}] must be at least 1"
            )));
        }
        Ok(Self { counts })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Total processors across all operators.
    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }
}

impl fmt::Display for Allocation {
    /// The `k1:k2:...:kN` notation.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, k) in self.counts.iter().enumerate() {
            if i > 0 {
                write!(f, ":")?;
            }
            write!(f, "{k}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Allocation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let counts = s
            .split(':')
            .map(|part| {
                part.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::Parse(format!("allocation entry `{part}` is not a positive integer")))
            })
            .collect::<Result<Vec<_>>>()?;
        Allocation::new(counts)
    }
}

/// Network prediction: per-operator expected sojourns and their weighted
/// average, with an overall stability flag.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SojournEstimate {
    pub per_operator: Vec<Sojourn>,
    pub total: Sojourn,
    pub stable: bool,
}

fn check_rate_args(lambda: f64, mu: f64, k: u32) -> Result<()> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "service rate must be finite and positive, got {mu}"
        )));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "arrival rate must be finite and non-negative, got {lambda}"
        )));
    }
    if k < 1 {
        return Err(Error::InvalidArgument("processor count must be at least 1".into()));
    }
    Ok(())
}

/// Expected sojourn time of an M/M/k station in seconds.
///
/// Returns [`Sojourn::Unstable`] when `k <= lambda/mu`. The waiting term is
/// evaluated through the Erlang-B recurrence
/// `B(0) = 1, B(l) = a*B(l-1) / (l + a*B(l-1))` with `a = lambda/mu`,
/// then `C = k*B(k) / (k - a*(1 - B(k)))` and `Wq = C / (k*mu - lambda)`,
/// which is algebraically identical to the factorial form but free of
/// overflow for large `k`.
pub fn erlang_sojourn(lambda: f64, mu: f64, k: u32) -> Result<Sojourn> {
    check_rate_args(lambda, mu, k)?;
    let a = lambda / mu;
    let kf = f64::from(k);
    let denom = kf * mu - lambda;
    if kf <= a || denom <= 0.0 {
        return Ok(Sojourn::Unstable);
    }
    let mut b = 1.0;
    for l in 1..=k {
        b = a * b / (f64::from(l) + a * b);
    }
    let c = kf * b / (kf - a * (1.0 - b));
    let wq = c / denom;
    Ok(Sojourn::Finite(wq + 1.0 / mu))
}

/// Smallest processor count that keeps an operator stable:
/// `floor(lambda/mu) + 1`, never less than one.
pub fn min_stable_count(lambda: f64, mu: f64) -> Result<u32> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "service rate must be finite and positive, got {mu}"
        )));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "arrival rate must be finite and non-negative, got {lambda}"
        )));
    }
    let k = (lambda / mu).floor() as u32 + 1;
    Ok(k.max(1))
}

/// Reduction in weighted expected sojourn from granting one more processor:
/// `lambda * (E[T](k) - E[T](k+1))`.
///
/// An operator that is unstable at `k` reports [`MAX_BENEFIT`] so that
/// stabilization always wins over optimization of already-stable operators.
pub fn marginal_benefit(lambda: f64, mu: f64, k: u32) -> Result<f64> {
    check_rate_args(lambda, mu, k)?;
    let at_k = erlang_sojourn(lambda, mu, k)?;
    let at_next = erlang_sojourn(lambda, mu, k + 1)?;
    match (at_k, at_next) {
        (Sojourn::Finite(a), Sojourn::Finite(b)) => Ok(lambda * (a - b)),
        _ => Ok(MAX_BENEFIT),
    }
}

/// Network-level expected sojourn for one allocation:
/// `total = (1/lambda0) * sum_i lambda_i * E[T_i](k_i)`.
///
/// Operators with zero arrivals contribute nothing to the total regardless
/// of their own estimate; the total is unstable iff any operator carrying
/// traffic is unstable.
pub fn network_sojourn(rates: &RateProfile, alloc: &Allocation) -> Result<SojournEstimate> {
    if rates.len() != alloc.len() {
        return Err(Error::DimensionMismatch {
            expected: rates.len(),
            got: alloc.len(),
        });
    }
    if !(rates.lambda0.is_finite() && rates.lambda0 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda0 must be finite and positive, got {}",
            rates.lambda0
        )));
    }
    let mut per_operator = Vec::with_capacity(rates.len());
    let mut weighted = 0.0;
    let mut unstable = false;
    for i in 0..rates.len() {
        let est = erlang_sojourn(rates.lambdas[i], rates.mus[i], alloc.counts[i])?;
        if rates.lambdas[i] > 0.0 {
            match est {
                Sojourn::Finite(v) => weighted += rates.lambdas[i] * v,
                Sojourn::Unstable => unstable = true,
            }
        }
        per_operator.push(est);
    }
    let total = if unstable {
        Sojourn::Unstable
    } else {
        Sojourn::Finite(weighted / rates.lambda0)
    };
    let stable = per_operator.iter().all(Sojourn::is_finite);
    Ok(SojournEstimate { per_operator, total, stable })
}
