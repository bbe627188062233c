//! Independent oracles and instance generators shared by the integration
//! tests. Everything here recomputes expected values from first principles,
//! never through the library's own evaluation path.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sojourn::topology::RateProfile;

/// Literal factorial form of the M/M/k mean sojourn: the normalization term
/// summed term by term, exactly as written, valid for small k.
pub fn erlang_literal(lambda: f64, mu: f64, k: u32) -> Option<f64> {
    assert!((1..=170).contains(&k), "factorial form only sane for small k");
    let a = lambda / mu;
    let kf = f64::from(k);
    if kf <= a {
        return None;
    }
    let factorial = |n: u32| -> f64 { (1..=n).map(f64::from).product() };
    let mut sum = 0.0;
    for l in 0..k {
        sum += a.powi(l as i32) / factorial(l);
    }
    let tail = a.powi(k as i32) / (factorial(k) * (1.0 - a / kf));
    let pi0 = 1.0 / (sum + tail);
    let wq = (a.powi(k as i32) * pi0) / (factorial(k) * (1.0 - lambda / (mu * kf)).powi(2) * mu * kf);
    Some(wq + 1.0 / mu)
}

/// M/M/1 closed form.
pub fn mm1_sojourn(lambda: f64, mu: f64) -> f64 {
    assert!(lambda < mu);
    1.0 / (mu - lambda)
}

/// Weighted network sojourn recomputed from the literal per-operator form.
pub fn network_literal(rates: &RateProfile, counts: &[u32]) -> Option<f64> {
    let mut weighted = 0.0;
    for ((&lambda, &mu), &k) in rates.lambdas.iter().zip(&rates.mus).zip(counts) {
        if lambda == 0.0 {
            continue;
        }
        weighted += lambda * erlang_literal(lambda, mu, k)?;
    }
    Some(weighted / rates.lambda0)
}

/// Random rate profile with every operator's stability minimum small enough
/// to keep exhaustive enumeration affordable: sum of minima <= `max_min_sum`.
pub fn random_profile(rng: &mut ChaCha8Rng, max_ops: usize, max_min_sum: u32) -> RateProfile {
    loop {
        let n = rng.gen_range(1..=max_ops);
        let mut lambdas = Vec::with_capacity(n);
        let mut mus = Vec::with_capacity(n);
        let mut min_sum = 0u32;
        for _ in 0..n {
            let mu: f64 = rng.gen_range(0.2..5.0);
            let a: f64 = rng.gen_range(0.05..3.5);
            lambdas.push(a * mu);
            mus.push(mu);
            min_sum += a.floor() as u32 + 1;
        }
        if min_sum > max_min_sum {
            continue;
        }
        let total: f64 = lambdas.iter().sum();
        let lambda0 = total * rng.gen_range(0.3..1.0);
        if lambda0 <= 0.0 {
            continue;
        }
        return RateProfile::new(lambda0, lambdas, mus).unwrap();
    }
}

/// Sum of per-operator stability minima, recomputed independently.
pub fn min_sum(rates: &RateProfile) -> u32 {
    rates
        .lambdas
        .iter()
        .zip(&rates.mus)
        .map(|(&l, &m)| (l / m).floor() as u32 + 1)
        .sum()
}

/// Spearman rank correlation; ties get equal ranks only if values are equal.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rank = |vals: &[f64]| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..vals.len()).collect();
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let mut ranks = vec![0.0; vals.len()];
        for (r, &i) in idx.iter().enumerate() {
            ranks[i] = r as f64;
        }
        ranks
    };
    let rx = rank(xs);
    let ry = rank(ys);
    let n = xs.len() as f64;
    let mean = (n - 1.0) / 2.0;
    let mut num = 0.0;
    let mut dx = 0.0;
    let mut dy = 0.0;
    for i in 0..xs.len() {
        num += (rx[i] - mean) * (ry[i] - mean);
        dx += (rx[i] - mean).powi(2);
        dy += (ry[i] - mean).powi(2);
    }
    num / (dx * dy).sqrt()
}
