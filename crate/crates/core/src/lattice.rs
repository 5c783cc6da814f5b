//! Floating-point lattice reduction and short-vector enumeration.
//!
//! Bases are lists of column vectors. Reduction returns the integer change of
//! basis so callers can redo the arithmetic exactly when they need to.

use num_bigint::BigInt;
use num_traits::{FromPrimitive, Zero};

use crate::error::{Error, Result};

pub type Columns = Vec<Vec<f64>>;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gram–Schmidt coefficients `mu[i][j]` (j < i) and squared lengths of the
/// orthogonalized vectors.
pub fn gram_schmidt(b: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let d = b.len();
    let mut star: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut mu = vec![vec![0.0; d]; d];
    let mut norms = vec![0.0; d];
    for i in 0..d {
        let mut v = b[i].clone();
        for j in 0..i {
            mu[i][j] = if norms[j] > 0.0 { dot(&b[i], &star[j]) / norms[j] } else { 0.0 };
            for (x, s) in v.iter_mut().zip(&star[j]) {
                *x -= mu[i][j] * s;
            }
        }
        norms[i] = dot(&v, &v);
        star.push(v);
    }
    (mu, norms)
}

/// LLL-reduces `b` in place and returns the integer transform `t`, with
/// new column `i` equal to `Σ_j t[i][j] · old column j`. `None` when the
/// transform leaves the `i128` range.
pub fn lll(b: &mut Columns, delta: f64) -> Option<Vec<Vec<i128>>> {
    let d = b.len();
    let mut t: Vec<Vec<i128>> = (0..d).map(|i| (0..d).map(|j| (i == j) as i128).collect()).collect();
    if d < 2 {
        return Some(t);
    }
    let mut k = 1;
    let mut steps = 0usize;
    while k < d {
        steps += 1;
        if steps > 100_000 {
            return None;
        }
        let (mut mu, norms) = gram_schmidt(b);
        for j in (0..k).rev() {
            let r = mu[k][j].round();
            if r != 0.0 {
                if !r.is_finite() || r.abs() > 1e30 {
                    return None;
                }
                let ri = r as i128;
                let (bj, tj) = (b[j].clone(), t[j].clone());
                for (x, y) in b[k].iter_mut().zip(&bj) {
                    *x -= r * y;
                }
                for (x, y) in t[k].iter_mut().zip(&tj) {
                    *x = x.checked_sub(ri.checked_mul(*y)?)?;
                }
                for i in 0..j {
                    mu[k][i] -= r * mu[j][i];
                }
                mu[k][j] -= r;
            }
        }
        if norms[k] >= (delta - mu[k][k - 1] * mu[k][k - 1]) * norms[k - 1] {
            k += 1;
        } else {
            b.swap(k, k - 1);
            t.swap(k, k - 1);
            k = (k - 1).max(1);
        }
    }
    Some(t)
}

/// LLL on an exact integer basis whose geometry is given by `embed`, which
/// maps an integer vector to its real image. Gram–Schmidt data is recomputed
/// in `f64` from fresh images after every change, so bases of any skew are
/// handled: a huge size-reduction step is taken exactly and then repeated
/// until the images are small.
pub fn lll_exact(basis: &mut [Vec<BigInt>], embed: impl Fn(&[BigInt]) -> Vec<f64>, delta: f64) -> Result<()> {
    let d = basis.len();
    let mut images: Vec<Vec<f64>> = basis.iter().map(|u| embed(u)).collect();
    let mut k = 1;
    let mut steps = 0usize;
    while k < d {
        steps += 1;
        if steps > 200_000 {
            return Err(Error::PrecisionExhausted("lattice reduction did not converge".into()));
        }
        // Size-reduce column k against the earlier ones until nothing moves.
        loop {
            let (mu, _) = gram_schmidt(&images);
            let mut moved = false;
            let mut large = false;
            let mut shift = vec![0.0; d];
            for j in (0..k).rev() {
                let mut c = mu[k][j];
                for i in j + 1..k {
                    c -= shift[i] * mu[i][j];
                }
                let r = c.round();
                if r != 0.0 {
                    if !r.is_finite() {
                        return Err(Error::PrecisionExhausted("non-finite lattice image".into()));
                    }
                    shift[j] = r;
                    moved = true;
                    large |= r.abs() > 1e6;
                }
            }
            if !moved {
                break;
            }
            for j in 0..k {
                if shift[j] != 0.0 {
                    let r = BigInt::from_f64(shift[j]).expect("finite integer");
                    let (head, tail) = basis.split_at_mut(k);
                    for (x, y) in tail[0].iter_mut().zip(&head[j]) {
                        *x -= &r * y;
                    }
                }
            }
            images[k] = embed(&basis[k]);
            if !large {
                break;
            }
        }
        let (mu, norms) = gram_schmidt(&images);
        if norms[k] >= (delta - mu[k][k - 1] * mu[k][k - 1]) * norms[k - 1] {
            k += 1;
        } else {
            basis.swap(k, k - 1);
            images.swap(k, k - 1);
            k = (k - 1).max(1);
        }
    }
    if basis.iter().any(|u| u.iter().all(Zero::is_zero)) {
        return Err(Error::PrecisionExhausted("basis became dependent".into()));
    }
    Ok(())
}

/// Calls `visit` with every nonzero integer coefficient vector `c` such that
/// `‖Σ c_i b_i‖² ≤ radius_sq`. Fails once more than `budget` tree nodes are
/// visited.
pub fn enumerate(b: &[Vec<f64>], radius_sq: f64, budget: usize, mut visit: impl FnMut(&[i64])) -> Result<()> {
    let d = b.len();
    let (mu, norms) = gram_schmidt(b);
    if norms.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::BoxTooLarge("degenerate basis".into()));
    }
    let mut c = vec![0i64; d];
    let mut nodes = 0usize;
    // Depth-first over levels d-1 down to 0.
    fn rec(
        level: usize,
        c: &mut [i64],
        partial: f64,
        mu: &[Vec<f64>],
        norms: &[f64],
        radius_sq: f64,
        nodes: &mut usize,
        budget: usize,
        visit: &mut dyn FnMut(&[i64]),
    ) -> Result<()> {
        *nodes += 1;
        if *nodes > budget {
            return Err(Error::BoxTooLarge(format!("more than {budget} enumeration nodes")));
        }
        let d = c.len();
        let center: f64 = -(level + 1..d).map(|j| mu[j][level] * c[j] as f64).sum::<f64>();
        let room = radius_sq - partial;
        if room < 0.0 {
            return Ok(());
        }
        let half = (room / norms[level]).sqrt();
        let lo = (center - half).ceil() as i64;
        let hi = (center + half).floor() as i64;
        for x in lo..=hi {
            let diff = x as f64 - center;
            let next = partial + diff * diff * norms[level];
            if next > radius_sq {
                continue;
            }
            c[level] = x;
            if level == 0 {
                if c.iter().any(|&v| v != 0) {
                    visit(c);
                }
            } else {
                rec(level - 1, c, next, mu, norms, radius_sq, nodes, budget, visit)?;
            }
        }
        c[level] = 0;
        Ok(())
    }
    rec(d - 1, &mut c, 0.0, &mu, &norms, radius_sq, &mut nodes, budget, &mut visit)
}
