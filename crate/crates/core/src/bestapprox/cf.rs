//! Continued fractions of a 1×1 θ known through an enclosure.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::{normalize_sign, BestApprox, Profile, Theta};
use crate::error::{Error, Result};
use crate::geometry::ApproxSpace;
use crate::numerics::{ln_big, refine, ValidatedReal};

/// Certified continued-fraction data of θ.
#[derive(Debug, Clone)]
pub struct CfExpansion {
    /// Partial quotients `a_0, a_1, …` shared by every point of the enclosure.
    pub partial_quotients: Vec<BigInt>,
    /// Convergents `(p_l, q_l)` with `p_l / q_l → θ`.
    pub convergents: Vec<(BigInt, BigInt)>,
    /// The expansion of θ ends here (θ is this rational).
    pub terminated: bool,
    /// Enclosure the digits were certified against.
    pub enclosure: ValidatedReal,
}

impl CfExpansion {
    pub fn certified(&self) -> usize {
        self.convergents.len()
    }
}

/// Partial quotients common to both endpoints, and whether both expansions
/// ended together.
fn common_quotients(lower: &BigRational, upper: &BigRational, limit: usize) -> (Vec<BigInt>, bool) {
    let (mut a, mut b) = (lower.numer().clone(), lower.denom().clone());
    let (mut c, mut d) = (upper.numer().clone(), upper.denom().clone());
    let mut out = Vec::new();
    while out.len() < limit {
        let (qa, ra) = a.div_mod_floor(&b);
        let (qc, rc) = c.div_mod_floor(&d);
        if qa != qc {
            return (out, false);
        }
        out.push(qa);
        match (ra.is_zero(), rc.is_zero()) {
            (true, true) => return (out, true),
            (false, false) => {}
            _ => return (out, false),
        }
        a = std::mem::replace(&mut b, ra);
        c = std::mem::replace(&mut d, rc);
    }
    (out, false)
}

fn convergents_of(quotients: &[BigInt]) -> Vec<(BigInt, BigInt)> {
    // (p_{l-2}, q_{l-2}) and (p_{l-1}, q_{l-1}), seeded with l = 0.
    let (mut p0, mut q0) = (BigInt::zero(), BigInt::one());
    let (mut p1, mut q1) = (BigInt::one(), BigInt::zero());
    let mut out = Vec::with_capacity(quotients.len());
    for a in quotients {
        let (p, q) = (a * &p1 + &p0, a * &q1 + &q0);
        p0 = std::mem::replace(&mut p1, p);
        q0 = std::mem::replace(&mut q1, q);
        out.push((p1.clone(), q1.clone()));
    }
    out
}

/// The first `l_max` convergents of θ, certified by running Euclid's
/// algorithm on both ends of the enclosure and keeping the common digits.
///
/// The enclosure is refined through its source until enough digits agree.
/// Returns fewer than `l_max` convergents only when θ is a rational with a
/// shorter expansion.
pub fn cf_convergents(theta: &Theta, l_max: usize) -> Result<CfExpansion> {
    if theta.rows() != 1 || theta.cols() != 1 {
        return Err(Error::Dimension("continued fractions need a 1x1 θ".into()));
    }
    let mut enclosure = theta.enclosures()[0].clone();
    // One spare digit so the last convergent's successor is known.
    let want = l_max + 1;
    loop {
        let (quotients, terminated) = common_quotients(enclosure.lower(), enclosure.upper(), want);
        if terminated || quotients.len() >= want {
            let mut convergents = convergents_of(&quotients);
            let keep = convergents.len().min(l_max);
            let terminated = terminated && convergents.len() <= l_max;
            convergents.truncate(keep);
            let mut partial_quotients = quotients;
            partial_quotients.truncate(keep.max(1).min(partial_quotients.len()));
            return Ok(CfExpansion { partial_quotients, convergents, terminated, enclosure });
        }
        // Each convergent costs about 2·ln q_l / l of width; aim past l_max.
        let got = quotients.len().max(1);
        let conv = convergents_of(&quotients);
        let q_last = conv.last().map(|c| c.1.clone()).unwrap_or_else(BigInt::one);
        let per_step = (ln_big(&q_last) / got as f64).max(0.5);
        let digits = ((2.0 * per_step * want as f64 + 10.0) / std::f64::consts::LN_10).ceil() as usize;
        let target = BigRational::new(BigInt::one(), num_traits::pow(BigInt::from(10), digits));
        let target = if target < enclosure.width() {
            target
        } else {
            enclosure.width() / BigRational::from_integer(BigInt::from(1u64 << 40))
        };
        enclosure = refine(&enclosure, &target).map_err(|e| {
            Error::PrecisionExhausted(format!(
                "only {} of {l_max} convergents certified ({e})",
                quotients.len().saturating_sub(1)
            ))
        })?;
    }
}

/// Best approximations of a 1×1 θ from its continued fraction: the
/// convergents from `q_1` on, plus `q_0 = 1` when `frac(θ) < 1/2` or θ is
/// an integer. Returns at most `l_max` records, built on the refined
/// truncation of θ.
pub fn cf_records(theta: &Theta, space: &ApproxSpace, l_max: usize, selector: Option<usize>) -> Result<(Theta, Vec<BestApprox>)> {
    theta.check_shape(space)?;
    let cf = cf_convergents(theta, l_max + 1)?;
    let refined = theta.with_enclosure(cf.enclosure.clone())?;
    let a = &cf.partial_quotients;
    let keep_first = match a.len() {
        1 => cf.terminated,
        _ => a[1] > BigInt::from(2) || (a[1] == BigInt::from(2) && !(cf.terminated && a.len() == 2)),
    };
    let start = if keep_first { 0 } else { 1 };
    let selector = selector.unwrap_or(2);
    let mut out = Vec::new();
    for (p, q) in cf.convergents.iter().skip(start) {
        if out.len() == l_max {
            break;
        }
        let mut pv = vec![-p.clone()];
        let mut qv = vec![q.clone()];
        normalize_sign(&refined, &mut pv, &mut qv, selector);
        let profile = Profile::new(&refined, space, &pv, &qv);
        out.push(BestApprox::from_profile(space, &profile, pv, qv, out.len() + 1));
    }
    Ok((refined, out))
}

impl Theta {
    /// Same source with entry 0 replaced by the lower end of `enclosure`.
    pub(crate) fn with_enclosure(&self, enclosure: ValidatedReal) -> Result<Theta> {
        if self.rows() * self.cols() != 1 {
            return Err(Error::Dimension("single-entry θ expected".into()));
        }
        let entry = enclosure.lower().clone();
        let digits = if enclosure.is_exact() {
            f64::INFINITY
        } else {
            -crate::numerics::ln_abs(&enclosure.width()) / std::f64::consts::LN_10
        };
        Theta::from_parts(1, 1, vec![entry], vec![enclosure], digits, self.provenance().to_string(), self.origin().cloned())
    }
}
