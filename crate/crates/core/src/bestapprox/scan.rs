//! Linear scan over `q = 1, 2, …` for a single column (`n = 1`).

use super::eval::{Cand, Evaluator};
use super::{finalize, BestApprox, EngineConfig, Theta};
use crate::error::{Error, Result};
use crate::geometry::ApproxSpace;

/// Best approximations with `|q| ≤ q_bound` for `n = 1`, by increasing `q`.
///
/// Keeps the Pareto front of m-block norm vectors seen so far; a new `q`
/// survives when no earlier front entry is at most as large in every block.
pub fn scan_best_n1(theta: &Theta, space: &ApproxSpace, cfg: &EngineConfig) -> Result<Vec<BestApprox>> {
    theta.check_shape(space)?;
    cfg.validate(space)?;
    let space = cfg.definition.resolve(space)?;
    if space.n() != 1 {
        return Err(Error::InvalidConfig("the scanning engine needs n = 1".into()));
    }
    let qmax = cfg.q_bound.floor() as i64;
    let ev = Evaluator::new(theta, &space, cfg);
    let k = space.k();
    let mut front: Vec<Cand> = Vec::new();
    let mut found = Vec::new();
    for q in 1..=qmax {
        let c = ev.eval(&[q]);
        if front.iter().any(|f| ev.dominates(f, &c, 0..k)) {
            continue;
        }
        front.retain(|f| !ev.dominates(&c, f, 0..k));
        if ev.admissible(&c) {
            found.push((c.p_big(), c.q_big()));
        }
        front.push(c);
    }
    let selector = cfg.selector.unwrap_or(space.d());
    Ok(finalize(theta, &space, found, selector))
}
