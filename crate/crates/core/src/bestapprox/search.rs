//! Record search for a single column (`n = 1`) by lattice reduction.
//!
//! The m-block keys of all pairs found so far form a staircase; the region
//! not dominated by any of them is a union of open boxes ("corners"). The
//! next best approximation is the smallest `q` whose point `(p*(q), q)` lies
//! in one of those boxes. For each corner that smallest `q` is found by
//! enumerating short vectors of `Λ_θ` scaled to the box, so `q` can grow far
//! beyond the reach of a linear scan.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use super::{finalize, is_primitive_pair, residual_key, BestApprox, Definition, Theta};
use crate::error::{Error, Result};
use crate::geometry::ApproxSpace;
use crate::lattice::{enumerate, lll_exact};
use crate::numerics::{ln_abs, ln_big};

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub definition: Definition,
    /// Stop after this many records.
    pub max_records: usize,
    /// Stop once `q` would exceed this bound.
    pub q_limit: Option<BigInt>,
    /// 1-based sign selector; `None` means `d`.
    pub selector: Option<usize>,
    /// Enumeration node budget per corner search.
    pub node_budget: usize,
    /// Fail when θ's enclosure is too wide for the records found.
    pub certify: bool,
}

impl SearchConfig {
    pub fn new(definition: Definition, max_records: usize) -> Self {
        SearchConfig {
            definition,
            max_records,
            q_limit: None,
            selector: None,
            node_budget: 5_000_000,
            certify: true,
        }
    }
}

struct Corner {
    keys: Vec<BigRational>,
    /// Smallest `q` in the box, once known; `None` inside means no `q` up to the limit.
    hit: Option<Option<BigInt>>,
}

struct Searcher<'a> {
    theta: &'a Theta,
    space: &'a ApproxSpace,
    m: usize,
    k: usize,
    /// Basis of `Z^{m+1}` as columns `(p, q)`, kept reduced between searches.
    basis: Vec<Vec<BigInt>>,
    unit_keys: Vec<f64>,
    block_of: Vec<usize>,
    node_budget: usize,
}

impl<'a> Searcher<'a> {
    fn new(theta: &'a Theta, space: &'a ApproxSpace, node_budget: usize) -> Self {
        let m = space.m();
        let mut block_of = vec![0; m];
        let mut unit_keys = vec![0.0; m];
        for i in 0..space.k() {
            let (norm, range) = space.block(i);
            for l in range.clone() {
                block_of[l] = i;
                let mut e = vec![0.0; range.len()];
                e[l - range.start] = 1.0;
                unit_keys[l] = norm.spec.norm(&e).powi(norm.exponent() as i32);
            }
        }
        let basis = (0..=m)
            .map(|i| (0..=m).map(|j| BigInt::from((i == j) as i32)).collect())
            .collect();
        Searcher { theta, space, m, k: space.k(), basis, unit_keys, block_of, node_budget }
    }

    fn residual_nums(&self, p: &[BigInt], q: &BigInt) -> Vec<BigInt> {
        let den = self.theta.den();
        (0..self.m).map(|l| &p[l] * den + &self.theta.nums()[l] * q).collect()
    }

    fn keys(&self, p: &[BigInt], q: &BigInt) -> Vec<BigRational> {
        let nums = self.residual_nums(p, q);
        (0..self.k)
            .map(|i| {
                let (norm, range) = self.space.block(i);
                residual_key(&norm.spec, &nums[range], self.theta.den())
            })
            .collect()
    }

    /// Componentwise nearest `p` to `−θq`, halves rounded toward −∞.
    fn pstar(&self, q: &BigInt) -> Vec<BigInt> {
        let den = self.theta.den();
        let two_den = den * 2;
        (0..self.m)
            .map(|l| {
                let num: BigInt = -(&self.theta.nums()[l] * q * BigInt::from(2)) - den;
                Integer::div_ceil(&num, &two_den)
            })
            .collect()
    }

    /// Image of a vector `(p, q)` in the box scaled to the unit cube. Box
    /// sizes are passed as logs so that any magnitude is representable.
    fn image(&self, u: &[BigInt], log_radii: &[f64], log_q: f64) -> Vec<f64> {
        let ln_den = ln_big(self.theta.den());
        let scale = |n: &BigInt, log_r: f64| -> f64 {
            if n.is_zero() {
                0.0
            } else {
                let v = (ln_big(&n.abs()) - log_r).exp();
                if n.is_negative() { -v } else { v }
            }
        };
        let nums = self.residual_nums(&u[..self.m], &u[self.m]);
        let mut z: Vec<f64> = nums.iter().zip(log_radii).map(|(n, r)| scale(n, r + ln_den)).collect();
        z.push(scale(&u[self.m], log_q));
        z
    }

    /// Reduces the stored basis for the given box and returns its images.
    fn reduce(&mut self, log_radii: &[f64], log_q: f64) -> Result<Vec<Vec<f64>>> {
        let mut basis = std::mem::take(&mut self.basis);
        let out = lll_exact(&mut basis, |u| self.image(u, log_radii, log_q), 0.99);
        self.basis = basis;
        out?;
        Ok(self.basis.iter().map(|u| self.image(u, log_radii, log_q)).collect())
    }

    /// Smallest `q > 0` up to `limit` with a point in the open box.
    fn first_hit(&mut self, corner: &[BigRational], start: &BigInt, limit: Option<&BigInt>) -> Result<Option<BigInt>> {
        if corner.iter().any(|c| c.is_zero()) {
            return Ok(None);
        }
        let log_radii: Vec<f64> = (0..self.m)
            .map(|l| {
                let b = self.block_of[l];
                let e = self.space.block(b).0.exponent() as f64;
                (ln_abs(&corner[b]) - self.unit_keys[l].ln()) / e + 1e-9
            })
            .collect();
        let mut q_scale = BigInt::max(start * 2, BigInt::from(2));
        loop {
            let z = self.reduce(&log_radii, ln_big(&q_scale))?;
            let mut coeffs: Vec<Vec<i64>> = Vec::new();
            let radius_sq = (self.m as f64 + 1.0) * (1.0 + 1e-6);
            enumerate(&z, radius_sq, self.node_budget, |c| coeffs.push(c.to_vec()))?;
            let mut best: Option<BigInt> = None;
            for c in coeffs {
                let mut v = vec![BigInt::zero(); self.m + 1];
                for (ci, col) in c.iter().zip(&self.basis) {
                    if *ci != 0 {
                        let ci = BigInt::from(*ci);
                        for (x, y) in v.iter_mut().zip(col) {
                            *x += &ci * y;
                        }
                    }
                }
                let mut q = v.pop().unwrap();
                let mut p = v;
                if q.is_zero() {
                    continue;
                }
                if q.is_negative() {
                    q = -q;
                    p.iter_mut().for_each(|x| *x = -x.clone());
                }
                if q > q_scale || best.as_ref().is_some_and(|b| &q >= b) {
                    continue;
                }
                let keys = self.keys(&p, &q);
                if keys.iter().zip(corner).all(|(a, c)| a < c) {
                    best = Some(q);
                }
            }
            if best.is_some() {
                return Ok(best);
            }
            if limit.is_some_and(|l| &q_scale > l) {
                return Ok(None);
            }
            q_scale *= 4;
        }
    }

    /// Whether a same-`q` neighbour or a `(e_l, 0)` vector lies in the region.
    fn blocked(&self, p: &[BigInt], q: &BigInt, keys: &[BigRational]) -> bool {
        let nums = self.residual_nums(p, q);
        for l in 0..self.m {
            let b = self.block_of[l];
            let (norm, range) = self.space.block(b);
            let mut shifted = nums[range.clone()].to_vec();
            let step = if nums[l].is_positive() { -self.theta.den() } else { self.theta.den().clone() };
            shifted[l - range.start] += step;
            if residual_key(&norm.spec, &shifted, self.theta.den()) <= keys[b] {
                return true;
            }
            let mut unit = vec![BigInt::zero(); range.len()];
            unit[l - range.start] = self.theta.den().clone();
            if residual_key(&norm.spec, &unit, self.theta.den()) <= keys[b] {
                return true;
            }
        }
        false
    }
}

/// Best approximations for `n = 1` found by lattice search, by increasing `q`.
pub fn search_best_n1(theta: &Theta, space: &ApproxSpace, cfg: &SearchConfig) -> Result<Vec<BestApprox>> {
    theta.check_shape(space)?;
    let space = cfg.definition.resolve(space)?;
    if space.n() != 1 {
        return Err(Error::InvalidConfig("the lattice search needs n = 1".into()));
    }
    let mut s = Searcher::new(theta, &space, cfg.node_budget);
    let k = space.k();
    let ones: Vec<BigInt> = vec![theta.den().clone(); space.m()];
    let top: Vec<BigRational> = (0..k)
        .map(|i| {
            let (norm, range) = space.block(i);
            residual_key(&norm.spec, &ones[range], theta.den())
        })
        .collect();
    let mut corners = vec![Corner { keys: top, hit: None }];
    let mut last_q = BigInt::zero();
    let mut found: Vec<(Vec<BigInt>, Vec<BigInt>)> = Vec::new();
    let mut min_log_residual = f64::INFINITY;
    let log_eps = space.epsilon().ln();

    while found.len() < cfg.max_records {
        for c in corners.iter_mut() {
            if c.hit.is_none() {
                c.hit = Some(s.first_hit(&c.keys, &last_q, cfg.q_limit.as_ref())?);
            }
        }
        let next = corners.iter().filter_map(|c| c.hit.clone().flatten()).min();
        let Some(q) = next else { break };
        if cfg.q_limit.as_ref().is_some_and(|l| &q > l) {
            break;
        }
        let p = s.pstar(&q);
        let keys = s.keys(&p, &q);
        let log_error: f64 = (0..k)
            .map(|b| space.block_dim(b) as f64 * ln_abs(&keys[b]) / space.block(b).0.exponent() as f64)
            .sum::<f64>()
            + space.n_norms()[0].spec.norm(&[1.0]).ln()
            + ln_big(&q);
        let qv = vec![q.clone()];
        if is_primitive_pair(&p, &qv) && !s.blocked(&p, &q, &keys) && log_error < log_eps {
            for b in 0..k {
                if !keys[b].is_zero() {
                    let e = space.block(b).0.exponent() as f64;
                    min_log_residual = min_log_residual.min(ln_abs(&keys[b]) / e);
                }
            }
            found.push((p, qv));
        }
        let mut next_corners = Vec::with_capacity(corners.len() + k);
        for c in corners {
            if keys.iter().zip(&c.keys).all(|(a, b)| a < b) {
                for i in 0..k {
                    let mut child = c.keys.clone();
                    child[i] = keys[i].clone();
                    next_corners.push(Corner { keys: child, hit: None });
                }
            } else {
                next_corners.push(c);
            }
        }
        corners = maximal(next_corners);
        last_q = q;
    }

    if cfg.certify && !theta.is_exact() && !found.is_empty() {
        let log_width = ln_abs(&theta.max_width());
        let q_max = &found.last().unwrap().1[0];
        let slack = log_width + ln_big(q_max) + 2.0 * space.m() as f64 * (2f64).ln();
        if slack > min_log_residual - 6.0 * std::f64::consts::LN_10 {
            return Err(Error::PrecisionExhausted(format!(
                "θ known to width e^{log_width:.1}, records need below e^{:.1}",
                min_log_residual - 6.0 * std::f64::consts::LN_10 - ln_big(q_max)
            )));
        }
    }
    let selector = cfg.selector.unwrap_or(space.d());
    Ok(finalize(theta, &space, found, selector))
}

/// Keeps corners not dominated by another corner.
fn maximal(corners: Vec<Corner>) -> Vec<Corner> {
    let n = corners.len();
    let mut keep = vec![true; n];
    for i in 0..n {
        for j in 0..n {
            if i == j || !keep[j] {
                continue;
            }
            let le = corners[i].keys.iter().zip(&corners[j].keys).all(|(a, b)| a <= b);
            if le {
                keep[i] = false;
                break;
            }
        }
    }
    corners.into_iter().zip(keep).filter(|(_, k)| *k).map(|(c, _)| c).collect()
}
