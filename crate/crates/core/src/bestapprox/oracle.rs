//! Exhaustive reference: tests every primitive `(p, q)` in a coordinate box by
//! listing all lattice points of its region.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::{finalize, is_primitive_pair, BestApprox, Theta};
use crate::geometry::{ApproxSpace, NormSpec};
use crate::numerics::{floor_root, to_f64};

/// All best approximations `(p, q)` with every coordinate in `[−bound, bound]`.
///
/// Exact rational arithmetic throughout; meant for small boxes only.
pub fn oracle_best(theta: &Theta, space: &ApproxSpace, bound: i64) -> Vec<BestApprox> {
    let (m, d) = (space.m(), space.d());
    let mut found = Vec::new();
    let mut v = vec![-bound; d];
    loop {
        let q = &v[m..];
        if q.iter().find(|x| **x != 0).is_some_and(|x| *x > 0) {
            let p: Vec<BigInt> = v[..m].iter().map(|&x| x.into()).collect();
            let q: Vec<BigInt> = q.iter().map(|&x| x.into()).collect();
            if is_primitive_pair(&p, &q) && is_best(theta, space, &p, &q) {
                found.push((p, q));
            }
        }
        let mut i = d;
        loop {
            if i == 0 {
                return finalize(theta, space, found, d);
            }
            i -= 1;
            if v[i] < bound {
                v[i] += 1;
                break;
            }
            v[i] = -bound;
        }
    }
}

fn block_keys(space: &ApproxSpace, x: &[BigRational]) -> Vec<BigRational> {
    (0..space.blocks())
        .map(|b| {
            let (norm, range) = space.block(b);
            norm.spec.key(&x[range])
        })
        .collect()
}

fn unit_key(spec: &NormSpec, dim: usize, l: usize) -> BigRational {
    let mut e = vec![BigRational::zero(); dim];
    e[l] = BigRational::one();
    spec.key(&e)
}

fn is_best(theta: &Theta, space: &ApproxSpace, p: &[BigInt], q: &[BigInt]) -> bool {
    let (k, m, n) = (space.k(), space.m(), space.n());
    let mut x = theta.residual(p, q);
    x.extend(q.iter().map(|v| BigRational::from_integer(v.clone())));
    let radii = block_keys(space, &x);

    let log_error: f64 = (0..space.blocks())
        .map(|b| {
            let e = space.block(b).0.exponent() as f64;
            space.block_dim(b) as f64 * to_f64(&radii[b]).ln() / e
        })
        .sum();
    if !(log_error < space.epsilon().ln()) {
        return false;
    }

    // Integer bounds on each coordinate of q' from its block radius.
    let mut q_bounds = vec![BigInt::zero(); n];
    for j in 0..space.r() {
        let (norm, range) = space.block(k + j);
        for c in range.clone() {
            let unit = unit_key(&norm.spec, range.len(), c - range.start);
            q_bounds[c - m] = floor_root(&(&radii[k + j] / unit), norm.exponent());
        }
    }
    // Real bounds on each coordinate of p' + θq' from its block radius.
    let mut r_bounds = vec![0.0; m];
    for i in 0..k {
        let (norm, range) = space.block(i);
        for c in range.clone() {
            let unit = unit_key(&norm.spec, range.len(), c - range.start);
            let ratio = to_f64(&(&radii[i] / unit));
            r_bounds[c] = ratio.powf(1.0 / norm.exponent() as f64) * (1.0 + 1e-9) + 1e-9;
        }
    }

    let mut q_list = Vec::new();
    let mut cur: Vec<BigInt> = q_bounds.iter().map(|b| -b).collect();
    loop {
        q_list.push(cur.clone());
        let mut i = n;
        let mut done = true;
        while i > 0 {
            i -= 1;
            if cur[i] < q_bounds[i] {
                cur[i] += 1;
                done = false;
                break;
            }
            cur[i] = -q_bounds[i].clone();
        }
        if done {
            break;
        }
    }
    // Visiting q itself first makes refutation of bad candidates quick.
    q_list.sort_by_key(|qq| qq.as_slice() != q);

    let neg_p: Vec<BigInt> = p.iter().map(|v| -v).collect();
    let neg_q: Vec<BigInt> = q.iter().map(|v| -v).collect();
    for qq in &q_list {
        let mut xq: Vec<BigRational> = vec![BigRational::zero(); m];
        let mut qkeys_ok = true;
        let qr: Vec<BigRational> = qq.iter().map(|v| BigRational::from_integer(v.clone())).collect();
        for j in 0..space.r() {
            let (norm, range) = space.block(k + j);
            if norm.spec.key(&qr[range.start - m..range.end - m]) > radii[k + j] {
                qkeys_ok = false;
            }
        }
        if !qkeys_ok {
            continue;
        }
        let zero_p = vec![BigInt::zero(); m];
        let y = theta.residual(&zero_p, qq);
        let mut lo = Vec::with_capacity(m);
        let mut hi = Vec::with_capacity(m);
        for c in 0..m {
            let yc = to_f64(&y[c]);
            lo.push(BigInt::from((-yc - r_bounds[c]).ceil() as i64 - 1));
            hi.push(BigInt::from((-yc + r_bounds[c]).floor() as i64 + 1));
        }
        let mut pp = lo.clone();
        'points: loop {
            let is_self = (pp.as_slice() == p && qq.as_slice() == q)
                || (pp.as_slice() == neg_p.as_slice() && qq.as_slice() == neg_q.as_slice());
            let nonzero = pp.iter().chain(qq.iter()).any(|v| !v.is_zero());
            if !is_self && nonzero && is_primitive_pair(&pp, qq) {
                for c in 0..m {
                    xq[c] = BigRational::from_integer(pp[c].clone()) + &y[c];
                }
                let inside = (0..k).all(|i| {
                    let (norm, range) = space.block(i);
                    norm.spec.key(&xq[range]) <= radii[i]
                });
                if inside {
                    return false;
                }
            }
            let mut c = m;
            loop {
                if c == 0 {
                    break 'points;
                }
                c -= 1;
                if pp[c] < hi[c] {
                    pp[c] += 1;
                    break;
                }
                pp[c] = lo[c].clone();
            }
        }
    }
    true
}
