//! Exact rationals, validated enclosures and guarded floating-point comparisons.
//!
//! Engines evaluate norms in `f64` and only fall back to exact rational
//! arithmetic when two values are closer than their combined guards.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Default absolute guard for [`GuardedFloat`].
pub const DEFAULT_GUARD: f64 = 1e-9;

/// Outcome of comparing two enclosures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    Less,
    Equal,
    Greater,
    Undecided,
}

impl Comparison {
    pub fn decided(self) -> Option<Ordering> {
        match self {
            Comparison::Less => Some(Ordering::Less),
            Comparison::Equal => Some(Ordering::Equal),
            Comparison::Greater => Some(Ordering::Greater),
            Comparison::Undecided => None,
        }
    }
}

/// A producer of ever tighter rational enclosures of one real number.
pub trait RealSource: fmt::Debug + Send + Sync {
    /// Enclosure `[lower, upper]` at the given refinement level.
    fn enclosure(&self, level: usize) -> (BigRational, BigRational);

    /// Highest level the source may be asked for.
    fn max_level(&self) -> usize;

    /// Cheap upper bound on the enclosure width at `level`, if known.
    fn width_bound(&self, _level: usize) -> Option<BigRational> {
        None
    }
}

/// A closed rational interval known to contain a real number.
#[derive(Clone)]
pub struct ValidatedReal {
    lower: BigRational,
    upper: BigRational,
    level: usize,
    source: Option<Arc<dyn RealSource>>,
}

impl fmt::Debug for ValidatedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ValidatedReal")
            .field("lower", &self.lower.to_string())
            .field("upper", &self.upper.to_string())
            .field("level", &self.level)
            .finish()
    }
}

impl ValidatedReal {
    /// Zero-width interval at an exact rational.
    pub fn exact(r: BigRational) -> Self {
        ValidatedReal { lower: r.clone(), upper: r, level: 0, source: None }
    }

    pub fn new(lower: BigRational, upper: BigRational) -> Result<Self> {
        if lower > upper {
            return Err(Error::InvalidConfig(format!("empty interval [{lower}, {upper}]")));
        }
        Ok(ValidatedReal { lower, upper, level: 0, source: None })
    }

    /// Interval taken from `source` at `level`.
    pub fn from_source(source: Arc<dyn RealSource>, level: usize) -> Self {
        let (lower, upper) = source.enclosure(level);
        ValidatedReal { lower, upper, level, source: Some(source) }
    }

    pub fn lower(&self) -> &BigRational {
        &self.lower
    }

    pub fn upper(&self) -> &BigRational {
        &self.upper
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn width(&self) -> BigRational {
        &self.upper - &self.lower
    }

    pub fn is_exact(&self) -> bool {
        self.lower == self.upper
    }

    pub fn contains(&self, r: &BigRational) -> bool {
        &self.lower <= r && r <= &self.upper
    }

    pub fn source(&self) -> Option<&Arc<dyn RealSource>> {
        self.source.as_ref()
    }
}

/// Orders two enclosures, answering only when the answer holds for every
/// pair of points they contain.
pub fn cmp_validated(a: &ValidatedReal, b: &ValidatedReal) -> Comparison {
    if a.upper < b.lower {
        Comparison::Less
    } else if a.lower > b.upper {
        Comparison::Greater
    } else if a.is_exact() && b.is_exact() && a.lower == b.lower {
        Comparison::Equal
    } else {
        Comparison::Undecided
    }
}

/// Tightens `x` until its width is at most `target_width`.
pub fn refine(x: &ValidatedReal, target_width: &BigRational) -> Result<ValidatedReal> {
    if &x.width() <= target_width {
        return Ok(x.clone());
    }
    let source = x
        .source
        .clone()
        .ok_or_else(|| Error::RefinementExhausted("value has no refinement source".into()))?;
    let max = source.max_level();
    if x.level >= max {
        return Err(Error::RefinementExhausted(format!("budget of {max} levels already spent")));
    }
    let mut level = x.level + 1;
    if source.width_bound(level).is_some() {
        while level < max && source.width_bound(level).is_some_and(|w| &w > target_width) {
            level += 1;
        }
    }
    let mut step = 1;
    loop {
        let (lower, upper) = source.enclosure(level);
        if &(&upper - &lower) <= target_width {
            return Ok(ValidatedReal { lower, upper, level, source: Some(source) });
        }
        if level >= max {
            return Err(Error::RefinementExhausted(format!(
                "width still above target at the budget of {max} levels"
            )));
        }
        level = (level + step).min(max);
        step *= 2;
    }
}

/// An `f64` with an absolute tolerance; comparisons inside the combined
/// tolerance are reported as undecided so the caller can recompute exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuardedFloat {
    pub value: f64,
    pub guard: f64,
}

impl GuardedFloat {
    pub fn new(value: f64) -> Self {
        GuardedFloat { value, guard: DEFAULT_GUARD }
    }

    pub fn with_guard(value: f64, guard: f64) -> Self {
        GuardedFloat { value, guard }
    }

    /// Ordering when it is certain, `None` otherwise.
    pub fn try_cmp(&self, other: &GuardedFloat) -> Option<Ordering> {
        let diff = self.value - other.value;
        if !diff.is_finite() || diff.abs() <= self.guard + other.guard {
            None
        } else if diff < 0.0 {
            Some(Ordering::Less)
        } else {
            Some(Ordering::Greater)
        }
    }

    /// Ordering, calling `exact` only when the floats cannot decide.
    pub fn cmp_or_else(&self, other: &GuardedFloat, exact: impl FnOnce() -> Ordering) -> Ordering {
        self.try_cmp(other).unwrap_or_else(exact)
    }
}

pub fn rational(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int_rational(n: &BigInt) -> BigRational {
    BigRational::from_integer(n.clone())
}

/// Nearest `f64` to a rational; saturates to ±inf or 0 out of range.
pub fn to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    if let Some(v) = r.to_f64() {
        if v.is_finite() && v != 0.0 {
            return v;
        }
    }
    let l = ln_abs(r);
    let v = l.exp();
    if r.is_negative() {
        -v
    } else {
        v
    }
}

/// Natural log of a positive big integer, accurate for any size.
pub fn ln_big(n: &BigInt) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        return n.to_f64().map(|v| v.abs().ln()).unwrap_or(f64::NAN);
    }
    let shift = bits - 64;
    let top: BigInt = n.abs() >> shift;
    top.to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}

/// `ln |r|`, with `-inf` at zero.
pub fn ln_abs(r: &BigRational) -> f64 {
    if r.is_zero() {
        return f64::NEG_INFINITY;
    }
    ln_big(r.numer()) - ln_big(r.denom())
}

/// Nearest integer, with exact half-integers rounded toward −∞.
pub fn round_half_down(x: &BigRational) -> BigInt {
    let half = rational(1, 2);
    (x - half).ceil().to_integer()
}

/// Exact rational value of a finite `f64`.
pub fn from_f64(x: f64) -> Option<BigRational> {
    BigRational::from_float(x)
}

pub fn pow_big(base: u32, exp: usize) -> BigInt {
    num_traits::pow(BigInt::from(base), exp)
}

/// Compares `a^(1/ea)` with `b^(1/eb)` for nonnegative rationals.
pub fn cmp_roots(a: &BigRational, ea: u32, b: &BigRational, eb: u32) -> Ordering {
    if ea == eb {
        return a.cmp(b);
    }
    let lhs = num_traits::pow(a.clone(), eb as usize);
    let rhs = num_traits::pow(b.clone(), ea as usize);
    lhs.cmp(&rhs)
}

/// Greatest common divisor of all entries (0 for an all-zero slice).
pub fn gcd_all(values: &[BigInt]) -> BigInt {
    values.iter().fold(BigInt::zero(), |g, v| g.gcd(v))
}

pub fn is_primitive(values: &[BigInt]) -> bool {
    gcd_all(values).is_one()
}

/// Largest integer `a ≥ 0` with `a^e ≤ x` for a nonnegative rational `x`.
pub fn floor_root(x: &BigRational, e: u32) -> BigInt {
    if x.is_negative() || x.is_zero() {
        return BigInt::zero();
    }
    let guess = to_f64(x).powf(1.0 / e as f64).floor();
    let mut a = if guess.is_finite() {
        BigInt::from_f64_lossy(guess)
    } else {
        x.to_integer()
    };
    let fits = |a: &BigInt| &BigRational::from_integer(num_traits::pow(a.clone(), e as usize)) <= x;
    while a.is_positive() && !fits(&a) {
        a -= 1;
    }
    loop {
        let next = &a + 1;
        if fits(&next) {
            a = next;
        } else {
            return a;
        }
    }
}

trait FromF64Lossy {
    fn from_f64_lossy(v: f64) -> Self;
}

impl FromF64Lossy for BigInt {
    fn from_f64_lossy(v: f64) -> Self {
        num_traits::FromPrimitive::from_f64(v).unwrap_or_else(BigInt::zero)
    }
}
