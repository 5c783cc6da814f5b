//! Candidate evaluation for the scanning engines.
//!
//! For each `q` the only possible best approximation is `(p*, q)` where `p*`
//! rounds `−θq` componentwise. Residuals are computed in 128-bit fixed point
//! from a once-per-θ expansion of the entries, which makes them accurate to
//! `Σ|q_j| · 2^-128`. Norm comparisons use `f64` with a guard and fall back to
//! exact rational keys inside it.

use std::cell::OnceCell;
use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{EngineConfig, Mode, Profile, Theta};
use crate::geometry::ApproxSpace;
use crate::numerics::{round_half_down, to_f64, GuardedFloat};

const HALF: u128 = 1 << 127;
const TWO_POW_M128: f64 = 2.938_735_877_055_718_8e-39;

/// A scanned candidate `(p*(q), q)`.
pub(crate) struct Cand {
    pub p: Vec<i64>,
    pub q: Vec<i64>,
    /// Signed residual `p + θq` as `f64`.
    pub residual: Vec<f64>,
    /// User norms of all `k + r` blocks.
    pub norms: Vec<f64>,
    pub guards: Vec<f64>,
    keys: OnceCell<Vec<BigRational>>,
}

impl Cand {
    pub fn p_big(&self) -> Vec<BigInt> {
        self.p.iter().map(|&v| BigInt::from(v)).collect()
    }

    pub fn q_big(&self) -> Vec<BigInt> {
        self.q.iter().map(|&v| BigInt::from(v)).collect()
    }

    /// Largest normalized n-block norm.
    pub fn q_norm(&self, space: &ApproxSpace) -> f64 {
        let k = space.k();
        (0..space.r())
            .map(|j| self.norms[k + j] * space.n_norms()[j].scale)
            .fold(0.0, f64::max)
    }
}

pub(crate) struct Evaluator<'a> {
    theta: &'a Theta,
    space: &'a ApproxSpace,
    exact: bool,
    guard: f64,
    /// Per entry: integer part and fractional part times 2^128.
    fixed: Option<Vec<(i128, u128)>>,
    /// m-block of each m-coordinate.
    block_of: Vec<usize>,
    /// User key of `e_l` in its m-block.
    unit_keys: Vec<BigRational>,
    unit_norms: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    pub fn new(theta: &'a Theta, space: &'a ApproxSpace, cfg: &EngineConfig) -> Self {
        let fixed = theta
            .entries()
            .iter()
            .map(|e| {
                let int = e.floor().to_integer();
                let frac = e - BigRational::from_integer(int.clone());
                let scaled: BigInt = (frac.numer() << 128u32) / frac.denom();
                Some((int.to_i128().filter(|v| v.abs() < 1 << 60)?, scaled.to_u128()?))
            })
            .collect::<Option<Vec<_>>>();
        let m = space.m();
        let mut block_of = vec![0; m];
        let mut unit_keys = vec![BigRational::zero(); m];
        let mut unit_norms = vec![0.0; m];
        for i in 0..space.k() {
            let (norm, range) = space.block(i);
            for l in range.clone() {
                block_of[l] = i;
                let mut e = vec![BigRational::zero(); range.len()];
                e[l - range.start] = BigRational::one();
                unit_keys[l] = norm.spec.key(&e);
                let mut ef = vec![0.0; range.len()];
                ef[l - range.start] = 1.0;
                unit_norms[l] = norm.spec.norm(&ef);
            }
        }
        Evaluator {
            theta,
            space,
            exact: cfg.mode == Mode::Exact,
            guard: cfg.guard,
            fixed,
            block_of,
            unit_keys,
            unit_norms,
        }
    }

    pub fn eval(&self, q: &[i64]) -> Cand {
        let m = self.space.m();
        let n = self.space.n();
        let mut p = vec![0i64; m];
        let mut residual = vec![0.0; m];
        let mut abs_err = vec![0.0; m];
        let qsum: u128 = q.iter().map(|v| v.unsigned_abs() as u128).sum();
        let fixed = self.fixed.as_ref().filter(|_| !self.exact && qsum < 1 << 62);
        for i in 0..m {
            let fast = fixed.and_then(|fx| {
                let (int, frac) = fixed_row(&fx[i * n..(i + 1) * n], q);
                let err = qsum + 2;
                let dist = frac.abs_diff(HALF);
                if dist <= err {
                    return None;
                }
                let (pi, r) = if frac >= HALF {
                    (-(int + 1), -(frac.wrapping_neg() as f64) * TWO_POW_M128)
                } else {
                    (-int, frac as f64 * TWO_POW_M128)
                };
                Some((i64::try_from(pi).ok()?, r, err as f64 * TWO_POW_M128))
            });
            let (pi, r, e) = match fast {
                Some(v) => v,
                None => {
                    let (pi, r) = self.exact_row(i, q);
                    (pi, r, 0.0)
                }
            };
            p[i] = pi;
            residual[i] = r;
            abs_err[i] = e + r.abs() * 2e-16;
        }
        let k = self.space.k();
        let mut norms = Vec::with_capacity(self.space.blocks());
        let mut guards = Vec::with_capacity(self.space.blocks());
        for b in 0..self.space.blocks() {
            let (norm, range) = self.space.block(b);
            let value = if b < k {
                norm.spec.norm(&residual[range.clone()])
            } else {
                let qs: Vec<f64> = q[range.start - m..range.end - m].iter().map(|&v| v as f64).collect();
                norm.spec.norm(&qs)
            };
            let err = if b < k {
                let worst = range.clone().map(|l| abs_err[l]).fold(0.0, f64::max);
                norm.spec.lipschitz(range.len()) * worst
            } else {
                0.0
            };
            norms.push(value);
            guards.push(if self.exact { f64::INFINITY } else { self.guard * value + 2.0 * err + 1e-300 });
        }
        Cand { p, q: q.to_vec(), residual, norms, guards, keys: OnceCell::new() }
    }

    fn exact_row(&self, i: usize, q: &[i64]) -> (i64, f64) {
        let n = self.space.n();
        let mut y = BigRational::zero();
        for j in 0..n {
            y += self.theta.entry(i, j) * BigRational::from_integer(q[j].into());
        }
        let p = round_half_down(&-&y);
        let r = BigRational::from_integer(p.clone()) + y;
        (p.to_i64().expect("p fits in i64"), to_f64(&r))
    }

    pub fn keys<'c>(&self, c: &'c Cand) -> &'c Vec<BigRational> {
        c.keys.get_or_init(|| Profile::new(self.theta, self.space, &c.p_big(), &c.q_big()).keys)
    }

    fn cmp_block(&self, a: &Cand, c: &Cand, b: usize) -> Ordering {
        let ga = GuardedFloat::with_guard(a.norms[b], a.guards[b]);
        let gc = GuardedFloat::with_guard(c.norms[b], c.guards[b]);
        if let Some(o) = ga.try_cmp(&gc) {
            return o;
        }
        self.keys(a)[b].cmp(&self.keys(c)[b])
    }

    /// Every block norm of `a` among `blocks` is at most that of `c`.
    pub fn dominates(&self, a: &Cand, c: &Cand, blocks: std::ops::Range<usize>) -> bool {
        blocks.into_iter().all(|b| self.cmp_block(a, c, b) != Ordering::Greater)
    }

    pub fn primitive(&self, c: &Cand) -> bool {
        let g = c.p.iter().chain(&c.q).fold(0i64, |g, &v| g.gcd(&v));
        g == 1
    }

    /// No other `p'` with the same `q` lies in the candidate's region.
    pub fn neighbor_ok(&self, c: &Cand) -> bool {
        for l in 0..self.space.m() {
            let b = self.block_of[l];
            let (norm, range) = self.space.block(b);
            let step = if c.residual[l] > 0.0 { -1.0 } else { 1.0 };
            let mut shifted = c.residual[range.clone()].to_vec();
            shifted[l - range.start] += step;
            let value = norm.spec.norm(&shifted);
            let g = GuardedFloat::with_guard(value, c.guards[b] + self.guard * value + 1e-15);
            let keeps = match g.try_cmp(&GuardedFloat::with_guard(c.norms[b], c.guards[b])) {
                Some(o) => o != Ordering::Greater,
                None => self.exact_neighbor_keeps(c, l),
            };
            if keeps {
                return false;
            }
        }
        true
    }

    fn exact_neighbor_keeps(&self, c: &Cand, l: usize) -> bool {
        let b = self.block_of[l];
        let base = Profile::new(self.theta, self.space, &c.p_big(), &c.q_big());
        let residual = self.theta.residual(&c.p_big(), &c.q_big());
        let step = if residual[l].is_positive() { -1 } else { 1 };
        let mut p = c.p_big();
        p[l] += step;
        let shifted = Profile::new(self.theta, self.space, &p, &c.q_big());
        shifted.keys[b] <= base.keys[b]
    }

    /// No `(e_l, 0)` lies in the candidate's region.
    pub fn zero_q_ok(&self, c: &Cand) -> bool {
        for l in 0..self.space.m() {
            let b = self.block_of[l];
            let g = GuardedFloat::with_guard(self.unit_norms[l], self.guard);
            let inside = match g.try_cmp(&GuardedFloat::with_guard(c.norms[b], c.guards[b])) {
                Some(o) => o != Ordering::Greater,
                None => self.unit_keys[l] <= self.keys(c)[b],
            };
            if inside {
                return false;
            }
        }
        true
    }

    pub fn error_ok(&self, c: &Cand) -> bool {
        let log: f64 = c
            .norms
            .iter()
            .enumerate()
            .map(|(b, v)| self.space.block_dim(b) as f64 * v.ln())
            .sum();
        log < self.space.epsilon().ln()
    }

    /// All single-candidate conditions of the definition.
    pub fn admissible(&self, c: &Cand) -> bool {
        self.primitive(c) && self.neighbor_ok(c) && self.zero_q_ok(c) && self.error_ok(c)
    }
}

/// `Σ_j θ_ij q_j` in fixed point: integer part and fraction times 2^128.
fn fixed_row(entries: &[(i128, u128)], q: &[i64]) -> (i128, u128) {
    let mut int: i128 = 0;
    let mut frac: u128 = 0;
    for (&(a, f), &qj) in entries.iter().zip(q) {
        int += a * qj as i128;
        let qa = qj.unsigned_abs() as u128;
        let lo = (f & u64::MAX as u128) * qa;
        let hi = (f >> 64) * qa;
        let (inner, carry) = (hi << 64).overflowing_add(lo);
        let mut ti = (hi >> 64) as i128 + carry as i128;
        let mut tf = inner;
        if qj < 0 {
            ti = -ti;
            if tf != 0 {
                ti -= 1;
                tf = tf.wrapping_neg();
            }
        }
        int += ti;
        let (sum, carry) = frac.overflowing_add(tf);
        frac = sum;
        int += carry as i128;
    }
    (int, frac)
}

/// Box of integer vectors `|x_l| ≤ bounds[l]`, excluding 0, one per sign
/// pair (first nonzero coordinate positive).
pub(crate) fn half_box(bounds: &[i64]) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut cur: Vec<i64> = bounds.iter().map(|b| -b).collect();
    loop {
        if let Some(first) = cur.iter().find(|v| **v != 0) {
            if *first > 0 {
                out.push(cur.clone());
            }
        }
        let mut i = cur.len();
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < bounds[i] {
                cur[i] += 1;
                break;
            }
            cur[i] = -bounds[i];
        }
    }
}
