//! Estimators over record sequences: Lévy–Khintchine ratios, approximation
//! qualities, gaps, determinants, residues and constrained counts.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::bestapprox::{proj_of, BestApprox, Theta};
use crate::error::{Error, Result};
use crate::geometry::ApproxSpace;

/// Samples with optional weights, kept sorted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmpiricalDistribution {
    samples: Vec<f64>,
    weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl EmpiricalDistribution {
    /// Drops non-finite samples.
    pub fn new(samples: Vec<f64>) -> Self {
        let mut samples: Vec<f64> = samples.into_iter().filter(|x| x.is_finite()).collect();
        samples.sort_by(f64::total_cmp);
        EmpiricalDistribution { samples, weights: None }
    }

    pub fn weighted(pairs: Vec<(f64, f64)>) -> Result<Self> {
        let mut pairs: Vec<(f64, f64)> = pairs.into_iter().filter(|(x, _)| x.is_finite()).collect();
        if pairs.iter().any(|(_, w)| !(*w >= 0.0)) {
            return Err(Error::InvalidConfig("weights must be nonnegative".into()));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (samples, weights) = pairs.into_iter().unzip();
        Ok(EmpiricalDistribution { samples, weights: Some(weights) })
    }

    /// Merges two distributions; weights default to 1.
    pub fn merge(mut self, other: EmpiricalDistribution) -> Self {
        if self.weights.is_none() && other.weights.is_none() {
            self.samples.extend(other.samples);
            self.samples.sort_by(f64::total_cmp);
            return self;
        }
        let pairs = self.pairs().chain(other.pairs()).collect();
        Self::weighted(pairs).expect("weights stay nonnegative")
    }

    fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.samples
            .iter()
            .enumerate()
            .map(|(i, &x)| (x, self.weights.as_ref().map_or(1.0, |w| w[i])))
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn total_weight(&self) -> f64 {
        self.weights.as_ref().map_or(self.samples.len() as f64, |w| w.iter().sum())
    }

    /// `P(X ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        let idx = self.samples.partition_point(|&s| s <= x);
        self.weight_below(idx)
    }

    fn weight_below(&self, idx: usize) -> f64 {
        let total = self.total_weight();
        if total == 0.0 {
            return 0.0;
        }
        match &self.weights {
            None => idx as f64 / total,
            Some(w) => w[..idx].iter().sum::<f64>() / total,
        }
    }

    pub fn mean(&self) -> f64 {
        let total = self.total_weight();
        self.pairs().map(|(x, w)| x * w).sum::<f64>() / total
    }

    pub fn histogram(&self, edges: &[f64]) -> Histogram {
        let mut counts = vec![0u64; edges.len().saturating_sub(1)];
        for &x in &self.samples {
            let i = edges.partition_point(|&e| e <= x);
            if i >= 1 && i < edges.len() {
                counts[i - 1] += 1;
            } else if i == edges.len() && x == *edges.last().unwrap() && !counts.is_empty() {
                *counts.last_mut().unwrap() += 1;
            }
        }
        Histogram { edges: edges.to_vec(), counts }
    }
}

/// `sup_x |F_emp(x) − F(x)|`, checked at every sample and its left limit.
pub fn ks_distance(emp: &EmpiricalDistribution, cdf: impl Fn(f64) -> f64) -> f64 {
    let s = &emp.samples;
    let mut worst: f64 = 0.0;
    let mut i = 0;
    while i < s.len() {
        let mut j = i;
        while j < s.len() && s[j] == s[i] {
            j += 1;
        }
        let f = cdf(s[i]);
        worst = worst.max((emp.weight_below(i) - f).abs());
        worst = worst.max((emp.weight_below(j) - f).abs());
        i = j;
    }
    worst
}

/// Total-variation distance between two frequency tables.
pub fn tv_distance<K: Ord + Clone>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> f64 {
    let mut keys: Vec<&K> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    0.5 * keys
        .into_iter()
        .map(|k| (a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

/// Mean of the last half of a series with its naive standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

pub fn tail_mean(values: &[f64]) -> TailEstimate {
    let tail = &values[values.len() / 2..];
    let n = tail.len();
    if n == 0 {
        return TailEstimate { mean: f64::NAN, stderr: f64::NAN, n };
    }
    let mean = tail.iter().sum::<f64>() / n as f64;
    let var = if n > 1 { tail.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    TailEstimate { mean, stderr: (var / n as f64).sqrt(), n }
}

/// Mean and standard error across independent estimates.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevySeries {
    /// `(l, (ln ‖q_l‖)^{k+r−1} / l)`.
    pub points: Vec<(usize, f64)>,
    pub tail: TailEstimate,
}

/// Running ratio `(ln ‖q_l‖)^{k+r−1} / l` over records in order.
pub fn levy_series(records: &[BestApprox], space: &ApproxSpace) -> LevySeries {
    let power = (space.k() + space.r() - 1) as i32;
    let points: Vec<(usize, f64)> = records
        .iter()
        .enumerate()
        .map(|(i, r)| (i + 1, r.log_q.powi(power) / (i + 1) as f64))
        .collect();
    let values: Vec<f64> = points.iter().map(|p| p.1).collect();
    LevySeries { tail: tail_mean(&values), points }
}

/// Running ratio `ln ‖p_l + θq_l‖ / l` of the first m-block, normalized.
pub fn residual_levy_series(records: &[BestApprox], space: &ApproxSpace) -> LevySeries {
    let scale = space.m_norms()[0].scale.ln();
    let points: Vec<(usize, f64)> = records
        .iter()
        .enumerate()
        .map(|(i, r)| (i + 1, (r.m_block_log_norms[0] + scale) / (i + 1) as f64))
        .collect();
    let values: Vec<f64> = points.iter().map(|p| p.1).collect();
    LevySeries { tail: tail_mean(&values), points }
}

/// Approximation qualities `‖q_{i+s}‖^n ‖p_i + θq_i‖^m` (user units) over
/// non-degenerate `i`. Needs one block on each side.
pub fn dl_distribution(records: &[BestApprox], space: &ApproxSpace, shift: usize) -> Result<EmpiricalDistribution> {
    if space.k() != 1 || space.r() != 1 {
        return Err(Error::InvalidConfig("approximation qualities need k = r = 1".into()));
    }
    let (m, n) = (space.m() as f64, space.n() as f64);
    let samples = records
        .iter()
        .zip(records.iter().skip(shift))
        .filter(|(a, _)| !a.degenerate)
        .map(|(a, b)| (n * b.n_block_log_norms[0] + m * a.m_block_log_norms[0]).exp())
        .collect();
    Ok(EmpiricalDistribution::new(samples))
}

/// Doeblin–Lenstra CDF: `z/ln 2` on `[0, 1/2]`, `(1 − z + ln 2z)/ln 2` on `(1/2, 1]`.
pub fn doeblin_lenstra_cdf(z: f64) -> f64 {
    let ln2 = std::f64::consts::LN_2;
    if z <= 0.0 {
        0.0
    } else if z <= 0.5 {
        z / ln2
    } else if z <= 1.0 {
        (1.0 - z + (2.0 * z).ln()) / ln2
    } else {
        1.0
    }
}

/// `ln(‖q_{l+1}‖ / ‖q_l‖)` for consecutive records.
pub fn gap_distribution(records: &[BestApprox]) -> EmpiricalDistribution {
    EmpiricalDistribution::new(gaps(records))
}

fn gaps(records: &[BestApprox]) -> Vec<f64> {
    records.windows(2).map(|w| w[1].log_q - w[0].log_q).collect()
}

/// Consecutive runs of `depth` gaps, for joint statistics.
pub fn gap_blocks(records: &[BestApprox], depth: usize) -> Vec<Vec<f64>> {
    gaps(records).windows(depth.max(1)).map(<[f64]>::to_vec).collect()
}

/// `(ln ‖q_L‖/L, (ln ‖q_1‖ + Σ gaps)/L)`; the two agree up to rounding.
pub fn telescoping_check(records: &[BestApprox]) -> (f64, f64) {
    let l = records.len() as f64;
    let direct = records.last().map_or(f64::NAN, |r| r.log_q) / l;
    let summed = (records.first().map_or(f64::NAN, |r| r.log_q) + gaps(records).iter().sum::<f64>()) / l;
    (direct, summed)
}

/// Exact determinant by fraction-free elimination.
pub fn bareiss_determinant(mut a: Vec<Vec<BigInt>>) -> BigInt {
    let n = a.len();
    let mut sign = BigInt::from(1);
    let mut prev = BigInt::from(1);
    for k in 0..n {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&i| !a[i][k].is_zero()) {
                Some(i) => {
                    a.swap(i, k);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                a[i][j] = v / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    sign * &a[n - 1][n - 1]
}

/// Determinants of the `d × d` matrices of `d` consecutive `(p, q)` columns.
pub fn determinant_distribution(records: &[BestApprox], space: &ApproxSpace) -> BTreeMap<BigInt, u64> {
    let d = space.d();
    let mut table = BTreeMap::new();
    for window in records.windows(d) {
        let rows: Vec<Vec<BigInt>> = (0..d).map(|i| window.iter().map(|r| r.coords()[i].clone()).collect()).collect();
        *table.entry(bareiss_determinant(rows)).or_insert(0) += 1;
    }
    table
}

/// Frequencies normalized to sum to 1.
pub fn frequencies<K: Ord + Clone>(counts: &BTreeMap<K, u64>) -> BTreeMap<K, f64> {
    let total: u64 = counts.values().sum();
    counts.iter().map(|(k, &c)| (k.clone(), c as f64 / total.max(1) as f64)).collect()
}

/// Counts of `(p, q) mod N`.
pub fn residue_distribution(records: &[BestApprox], modulus: u64) -> BTreeMap<Vec<u64>, u64> {
    let nb = BigInt::from(modulus);
    let mut table = BTreeMap::new();
    for r in records {
        let key: Vec<u64> = r.coords().iter().map(|v| v.mod_floor(&nb).to_u64().unwrap_or(0)).collect();
        *table.entry(key).or_insert(0) += 1;
    }
    table
}

/// A finite union of boxes and residue cylinders on `Θ_j` data.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintSet {
    /// Closed interval for the error.
    pub error_interval: Option<(f64, f64)>,
    /// Per block (0-based), closed intervals for each coordinate of the unit
    /// direction vector.
    pub direction_boxes: BTreeMap<usize, Vec<(f64, f64)>>,
    /// Modulus and allowed classes of `(p, q)`.
    pub residue_cylinder: Option<(u64, Vec<Vec<u64>>)>,
    /// 1-based coordinate of `(p + θq, q)` made nonnegative.
    pub sign_selector: Option<usize>,
}

impl ConstraintSet {
    /// Everything.
    pub fn all() -> Self {
        Self::default()
    }

    /// Parses `;`-separated clauses: `error=a:b`, `mod=N:c,c,…/c,c,…`,
    /// `block<b>=lo:hi,lo:hi,…` (1-based block) and `selector=j`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut out = ConstraintSet::default();
        let interval = |v: &str| -> Result<(f64, f64)> {
            let (a, b) = v.split_once(':').ok_or_else(|| Error::Parse(format!("interval '{v}' lacks ':'")))?;
            let a: f64 = a.trim().parse().map_err(|_| Error::Parse(format!("bad bound '{a}'")))?;
            let b: f64 = b.trim().parse().map_err(|_| Error::Parse(format!("bad bound '{b}'")))?;
            if a > b {
                return Err(Error::Parse(format!("empty interval '{v}'")));
            }
            Ok((a, b))
        };
        for clause in s.split(';').map(str::trim).filter(|c| !c.is_empty()) {
            let (key, value) = clause
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("constraint '{clause}' lacks '='")))?;
            match key.trim() {
                "error" => out.error_interval = Some(interval(value)?),
                "selector" => {
                    out.sign_selector = Some(value.trim().parse().map_err(|_| Error::Parse(format!("bad selector '{value}'")))?)
                }
                "mod" => {
                    let (n, classes) = value
                        .split_once(':')
                        .ok_or_else(|| Error::Parse("mod needs N:classes".into()))?;
                    let n: u64 = n.trim().parse().map_err(|_| Error::Parse(format!("bad modulus '{n}'")))?;
                    if n == 0 {
                        return Err(Error::Parse("modulus must be positive".into()));
                    }
                    let classes = classes
                        .split('/')
                        .map(|c| {
                            c.split(',')
                                .map(|x| {
                                    x.trim()
                                        .parse::<u64>()
                                        .map_err(|_| Error::Parse(format!("bad residue '{x}'")))
                                        .map(|v| v % n)
                                })
                                .collect::<Result<Vec<u64>>>()
                        })
                        .collect::<Result<Vec<_>>>()?;
                    out.residue_cylinder = Some((n, classes));
                }
                k if k.starts_with("block") => {
                    let b: usize = k[5..].parse().map_err(|_| Error::Parse(format!("bad block key '{k}'")))?;
                    if b == 0 {
                        return Err(Error::Parse("blocks are numbered from 1".into()));
                    }
                    let boxes = value.split(',').map(interval).collect::<Result<Vec<_>>>()?;
                    out.direction_boxes.insert(b - 1, boxes);
                }
                other => return Err(Error::Parse(format!("unsupported constraint '{other}'"))),
            }
        }
        Ok(out)
    }

    /// Whether the record's `Θ_j` data lies in the set. `proj` is computed
    /// only when a direction box is present.
    pub fn contains(&self, theta: &Theta, space: &ApproxSpace, record: &BestApprox) -> Result<bool> {
        if let Some((a, b)) = self.error_interval {
            if !(a <= record.error && record.error <= b) {
                return Ok(false);
            }
        }
        if let Some((n, classes)) = &self.residue_cylinder {
            let nb = BigInt::from(*n);
            let sign = self.sign_factor(theta, record);
            let key: Vec<u64> = record
                .coords()
                .iter()
                .map(|v| (v * &sign).mod_floor(&nb).to_u64().unwrap_or(0))
                .collect();
            if !classes.contains(&key) {
                return Ok(false);
            }
        }
        if !self.direction_boxes.is_empty() {
            let proj = match proj_of(theta, &record.p, &record.q, space) {
                Ok(p) => p,
                Err(Error::DegenerateBlock(_)) => return Ok(false),
                Err(e) => return Err(e),
            };
            let sign = self.sign_factor(theta, record);
            let sign = if sign.is_negative() { -1.0 } else { 1.0 };
            for (b, boxes) in &self.direction_boxes {
                let block = proj.get(*b).ok_or_else(|| Error::Dimension(format!("no block {}", b + 1)))?;
                if boxes.len() != block.len() {
                    return Err(Error::Dimension(format!("block {} has {} coordinates", b + 1, block.len())));
                }
                if !block.iter().zip(boxes).all(|(x, (lo, hi))| *lo <= sign * x && sign * x <= *hi) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// `±1` turning the record into the sign chosen by this set's selector.
    fn sign_factor(&self, theta: &Theta, record: &BestApprox) -> BigInt {
        let Some(j) = self.sign_selector else { return BigInt::from(1) };
        let m = record.p.len();
        let value = if j <= m {
            let r = theta.residual(&record.p, &record.q);
            r[j - 1].signum().numer().clone()
        } else {
            record.q[j - m - 1].signum()
        };
        if value.is_negative() {
            BigInt::from(-1)
        } else {
            BigInt::from(1)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstrainedCount {
    pub count: u64,
    /// `count / T^{k+r−1}`.
    pub normalized: f64,
}

/// `#{l : Θ_j(record_l) ∈ A, ‖q_l‖ ≤ e^T}` over non-degenerate records.
pub fn count_constrained(
    theta: &Theta,
    space: &ApproxSpace,
    records: &[BestApprox],
    set: &ConstraintSet,
    big_t: f64,
) -> Result<ConstrainedCount> {
    let mut count = 0;
    for r in records {
        if r.degenerate || r.log_q > big_t {
            continue;
        }
        if set.contains(theta, space, r)? {
            count += 1;
        }
    }
    let power = (space.k() + space.r() - 1) as i32;
    Ok(ConstrainedCount { count, normalized: count as f64 / big_t.powi(power) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(v: &[&[i64]]) -> Vec<Vec<BigInt>> {
        v.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect()
    }

    #[test]
    fn bareiss_matches_small_determinants() {
        assert_eq!(bareiss_determinant(big(&[&[1, 2], &[3, 4]])), BigInt::from(-2));
        assert_eq!(bareiss_determinant(big(&[&[0, 1, 2], &[1, 0, 3], &[4, -3, 8]])), BigInt::from(-2));
        assert_eq!(bareiss_determinant(big(&[&[1, 2], &[2, 4]])), BigInt::zero());
    }

    #[test]
    fn ks_examples() {
        let n = 1000;
        let q = EmpiricalDistribution::new((0..n).map(|i| (i as f64 + 0.5) / n as f64).collect());
        assert!(ks_distance(&q, |x| x.clamp(0.0, 1.0)) <= 0.5 / n as f64 + 1e-12);
        let zeros = EmpiricalDistribution::new(vec![0.0; 10]);
        assert_eq!(ks_distance(&zeros, |x| x.clamp(0.0, 1.0)), 1.0);
    }

    #[test]
    fn ks_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let xs: Vec<f64> = (0..50).map(|_| (rng.gen::<f64>() * 10.0).round() / 10.0).collect();
            let emp = EmpiricalDistribution::new(xs.clone());
            let f = |x: f64| x.clamp(0.0, 1.0);
            let mut brute: f64 = 0.0;
            for &x in &xs {
                let le = xs.iter().filter(|&&y| y <= x).count() as f64 / 50.0;
                let lt = xs.iter().filter(|&&y| y < x).count() as f64 / 50.0;
                brute = brute.max((le - f(x)).abs()).max((lt - f(x)).abs());
            }
            assert!((ks_distance(&emp, f) - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn dl_cdf_is_a_distribution() {
        assert_eq!(doeblin_lenstra_cdf(0.0), 0.0);
        assert!((doeblin_lenstra_cdf(0.5) - 0.5 / std::f64::consts::LN_2).abs() < 1e-15);
        assert!((doeblin_lenstra_cdf(1.0) - 1.0).abs() < 1e-15);
        let mut prev = 0.0;
        for i in 1..=100 {
            let v = doeblin_lenstra_cdf(i as f64 / 100.0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn constraint_parsing() {
        let c = ConstraintSet::parse("error=0:0.5; mod=2:1,1/0,1; block1=0:1; selector=2").unwrap();
        assert_eq!(c.error_interval, Some((0.0, 0.5)));
        assert_eq!(c.residue_cylinder, Some((2, vec![vec![1, 1], vec![0, 1]])));
        assert_eq!(c.direction_boxes[&0], vec![(0.0, 1.0)]);
        assert!(ConstraintSet::parse("shortest=0:1").is_err());
    }

    #[test]
    fn tv_and_histogram() {
        let a: BTreeMap<i32, f64> = [(1, 0.5), (-1, 0.5)].into();
        let b: BTreeMap<i32, f64> = [(1, 1.0)].into();
        assert!((tv_distance(&a, &b) - 0.5).abs() < 1e-15);
        let h = EmpiricalDistribution::new(vec![0.1, 0.2, 0.7, 1.0]).histogram(&[0.0, 0.5, 1.0]);
        assert_eq!(h.counts, vec![2, 2]);
    }
}
