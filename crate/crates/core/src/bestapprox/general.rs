//! All-pairs engine for any number of columns.

use std::cmp::Ordering;

use num_rational::BigRational;

use super::eval::{half_box, Cand, Evaluator};
use super::{finalize, BestApprox, EngineConfig, Theta};
use crate::error::{Error, Result};
use crate::geometry::ApproxSpace;
use crate::numerics::from_f64;

/// Largest candidate count accepted before giving up.
const MAX_CANDIDATES: usize = 2_000_000;

/// Best approximations whose `q` has every normalized n-block norm at most
/// `q_bound`, sorted by `‖q‖` and then by the n-block norms and coordinates.
pub fn enumerate_best_general(theta: &Theta, space: &ApproxSpace, cfg: &EngineConfig) -> Result<Vec<BestApprox>> {
    theta.check_shape(space)?;
    cfg.validate(space)?;
    let space = cfg.definition.resolve(space)?;
    let ev = Evaluator::new(theta, &space, cfg);
    let (k, m, n) = (space.k(), space.m(), space.n());

    let mut bounds = vec![0i64; n];
    for j in 0..space.r() {
        let (norm, range) = space.block(k + j);
        for c in range.clone() {
            let mut e = vec![0.0; range.len()];
            e[c - range.start] = 1.0;
            let unit = norm.scale * norm.spec.norm(&e);
            bounds[c - m] = (cfg.q_bound / unit * (1.0 + 1e-12)).floor() as i64;
        }
    }
    let total: f64 = bounds.iter().map(|&b| 2.0 * b as f64 + 1.0).product();
    if total / 2.0 > MAX_CANDIDATES as f64 {
        return Err(Error::BoxTooLarge(format!("{total:.0} vectors q to scan")));
    }
    let limit = from_f64(cfg.q_bound).expect("finite bound");
    let mut cands: Vec<Cand> = half_box(&bounds)
        .into_iter()
        .map(|q| ev.eval(&q))
        .filter(|c| within(&ev, &space, c, cfg.q_bound, &limit))
        .collect();
    cands.sort_by(|a, b| a.q_norm(&space).partial_cmp(&b.q_norm(&space)).unwrap_or(Ordering::Equal));
    let qn: Vec<f64> = cands.iter().map(|c| c.q_norm(&space)).collect();

    let blocks = space.blocks();
    let mut found = Vec::new();
    for (i, v) in cands.iter().enumerate() {
        if !ev.admissible(v) {
            continue;
        }
        let reach = qn[i] * (1.0 + 4.0 * cfg.guard) + 1e-12;
        let end = qn.partition_point(|&x| x <= reach);
        let dominated = cands[..end]
            .iter()
            .enumerate()
            .any(|(j, u)| j != i && ev.dominates(u, v, 0..blocks));
        if !dominated {
            found.push((v.p_big(), v.q_big()));
        }
    }
    let selector = cfg.selector.unwrap_or(space.d());
    Ok(finalize(theta, &space, found, selector))
}

fn within(ev: &Evaluator, space: &ApproxSpace, c: &Cand, bound: f64, limit: &BigRational) -> bool {
    let k = space.k();
    (0..space.r()).all(|j| {
        let norm = &space.n_norms()[j];
        let v = c.norms[k + j] * norm.scale;
        if v < bound * (1.0 - 1e-12) {
            return true;
        }
        if v > bound * (1.0 + 1e-12) {
            return false;
        }
        let key = norm.normalized_key(&ev.keys(c)[k + j]);
        key <= num_traits::pow(limit.clone(), norm.exponent() as usize)
    })
}
