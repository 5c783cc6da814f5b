//! Drivers that draw θ from a source, compute records in parallel and reduce
//! them with the estimators of [`crate::stats`].

use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigInt;
use rayon::prelude::*;
use serde::Serialize;

use crate::bestapprox::{cf_records, search_best_n1, BestApprox, Definition, SearchConfig, Theta};
use crate::error::{Error, Result};
use crate::geometry::ApproxSpace;
use crate::sampling::{refine_sample, ThetaSource};
use crate::stats::{
    determinant_distribution, dl_distribution, doeblin_lenstra_cdf, frequencies, ks_distance, levy_series,
    mean_stderr, residual_levy_series, residue_distribution, EmpiricalDistribution,
};

/// Attempts at refining θ when the records outrun its precision.
const REFINE_ATTEMPTS: usize = 6;

/// The first `length` records of θ. One-dimensional θ go through the
/// continued fraction; everything else through the lattice search.
pub fn records_for(theta: &Theta, space: &ApproxSpace, definition: Definition, length: usize) -> Result<(Theta, Vec<BestApprox>)> {
    if space.m() == 1 && space.n() == 1 {
        return cf_records(theta, space, length, None);
    }
    search_refining(theta, space, &SearchConfig::new(definition, length))
}

/// The lattice search, refining θ as often as its precision runs out. The
/// refined θ is returned with the records.
pub fn search_refining(theta: &Theta, space: &ApproxSpace, cfg: &SearchConfig) -> Result<(Theta, Vec<BestApprox>)> {
    if space.n() != 1 {
        return Err(Error::InvalidConfig("record streams need n = 1".into()));
    }
    let mut theta = theta.clone();
    for _ in 0..REFINE_ATTEMPTS {
        match search_best_n1(&theta, space, cfg) {
            Err(Error::PrecisionExhausted(_)) if !theta.is_exact() => {
                let extra = theta.enclosures().iter().map(|e| e.level()).max().unwrap_or(1).max(1);
                theta = refine_sample(&theta, extra)?;
            }
            other => return other.map(|records| (theta, records)),
        }
    }
    Err(Error::PrecisionExhausted(format!("θ still too coarse after {REFINE_ATTEMPTS} refinements")))
}

/// Records of one θ draw.
#[derive(Debug, Clone)]
pub struct Run {
    pub counter: u64,
    pub theta: Theta,
    pub records: Vec<BestApprox>,
}

/// Draws `samples` θ with counters `first..first + samples` and computes
/// `length` records of each, in parallel across θ.
pub fn sweep(
    source: &Arc<ThetaSource>,
    first: u64,
    samples: usize,
    space: &ApproxSpace,
    definition: Definition,
    length: usize,
) -> Result<Vec<Run>> {
    (first..first + samples as u64)
        .into_par_iter()
        .map(|counter| {
            let (theta, records) = records_for(&source.sample(counter), space, definition, length)?;
            Ok(Run { counter, theta, records })
        })
        .collect()
}

/// Across-θ summary of per-θ tail estimates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevySummary {
    pub estimates: Vec<f64>,
    pub mean: f64,
    pub stderr: f64,
    /// `(max − min) / median` of the estimates.
    pub spread: f64,
}

impl LevySummary {
    pub fn from_estimates(estimates: Vec<f64>) -> Self {
        let (mean, stderr) = mean_stderr(&estimates);
        let mut sorted = estimates.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
        let spread = (sorted[n - 1] - sorted[0]) / median;
        LevySummary { estimates, mean, stderr, spread }
    }
}

/// Tail means of `(ln ‖q_l‖)^{k+r−1}/l`, one per run.
pub fn levy(runs: &[Run], space: &ApproxSpace) -> LevySummary {
    LevySummary::from_estimates(runs.iter().map(|r| levy_series(&r.records, space).tail.mean).collect())
}

/// Tail means of `ln ‖p_l + θq_l‖ / l` scaled by `−m/n`, one per run; by
/// duality these estimate the same constant as [`levy`] when `k = r = 1`.
pub fn dual_levy(runs: &[Run], space: &ApproxSpace) -> LevySummary {
    let factor = -(space.m() as f64) / space.n() as f64;
    LevySummary::from_estimates(
        runs.iter().map(|r| factor * residual_levy_series(&r.records, space).tail.mean).collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DlSummary {
    pub samples: usize,
    pub ks: f64,
    pub cdf_at_half: f64,
    pub mean: f64,
}

/// Pooled approximation qualities with shift `s`, compared with the
/// Doeblin–Lenstra law.
pub fn doeblin_lenstra(runs: &[Run], space: &ApproxSpace, shift: usize) -> Result<(EmpiricalDistribution, DlSummary)> {
    let mut pooled = EmpiricalDistribution::default();
    for r in runs {
        pooled = pooled.merge(dl_distribution(&r.records, space, shift)?);
    }
    let summary = DlSummary {
        samples: pooled.len(),
        ks: ks_distance(&pooled, doeblin_lenstra_cdf),
        cdf_at_half: pooled.cdf(0.5),
        mean: pooled.mean(),
    };
    Ok((pooled, summary))
}

/// Pooled residue counts of `(p, q) mod N`.
pub fn residues(runs: &[Run], modulus: u64) -> BTreeMap<Vec<u64>, u64> {
    let mut table = BTreeMap::new();
    for r in runs {
        for (k, v) in residue_distribution(&r.records, modulus) {
            *table.entry(k).or_insert(0) += v;
        }
    }
    table
}

/// Pooled determinant counts of consecutive record windows.
pub fn determinants(runs: &[Run], space: &ApproxSpace) -> BTreeMap<BigInt, u64> {
    let mut table = BTreeMap::new();
    for r in runs {
        for (k, v) in determinant_distribution(&r.records, space) {
            *table.entry(k).or_insert(0) += v;
        }
    }
    table
}

/// Frequencies of a determinant table keyed by the decimal value.
pub fn determinant_frequencies(table: &BTreeMap<BigInt, u64>) -> BTreeMap<String, f64> {
    frequencies(table).into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}
