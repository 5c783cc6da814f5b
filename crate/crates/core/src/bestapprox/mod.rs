//! Best approximations of a matrix θ: the exact candidate model shared by all
//! engines, the engines themselves and the exhaustive oracle.
//!
//! A pair `(p, q)` with `q ≠ 0` is a best approximation when no primitive
//! vector of `Λ_θ = {(p' + θq', q')}` other than `±(p + θq, q)` lies in the
//! closed product of block balls whose radii are the block norms of
//! `(p + θq, q)`.

mod cf;
mod eval;
mod general;
mod oracle;
mod scan;
mod search;

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::geometry::{parse_rational, ApproxSpace};
use crate::numerics::{cmp_roots, is_primitive, ln_abs, ValidatedReal};
use crate::sampling::SampleOrigin;

pub use cf::{cf_convergents, cf_records, CfExpansion};
pub use general::enumerate_best_general;
pub use oracle::oracle_best;
pub use scan::scan_best_n1;
pub use search::{search_best_n1, SearchConfig};

/// An `m × n` real matrix known through an exact rational truncation.
#[derive(Clone)]
pub struct Theta {
    rows: usize,
    cols: usize,
    entries: Vec<BigRational>,
    enclosures: Vec<ValidatedReal>,
    precision_digits: f64,
    provenance: String,
    origin: Option<SampleOrigin>,
    den: BigInt,
    nums: Vec<BigInt>,
}

impl fmt::Debug for Theta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let short: Vec<String> = self
            .entries
            .iter()
            .map(|e| {
                let s = e.to_string();
                if s.len() > 40 {
                    format!("{:.12}", crate::numerics::to_f64(e))
                } else {
                    s
                }
            })
            .collect();
        f.debug_struct("Theta")
            .field("shape", &(self.rows, self.cols))
            .field("entries", &short)
            .field("provenance", &self.provenance)
            .finish()
    }
}

impl Theta {
    /// Exact matrix from row-major rational entries.
    pub fn explicit(rows: usize, cols: usize, entries: Vec<BigRational>) -> Result<Self> {
        let enclosures = entries.iter().cloned().map(ValidatedReal::exact).collect();
        Self::from_parts(rows, cols, entries, enclosures, f64::INFINITY, "explicit".into(), None)
    }

    /// Parses comma-separated row-major entries such as `1/5,1/7`.
    pub fn parse(s: &str, rows: usize, cols: usize) -> Result<Self> {
        let entries = s
            .split([',', ';', ' '])
            .filter(|t| !t.trim().is_empty())
            .map(parse_rational)
            .collect::<Result<Vec<_>>>()?;
        Self::explicit(rows, cols, entries)
    }

    pub(crate) fn from_parts(
        rows: usize,
        cols: usize,
        entries: Vec<BigRational>,
        enclosures: Vec<ValidatedReal>,
        precision_digits: f64,
        provenance: String,
        origin: Option<SampleOrigin>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 || entries.len() != rows * cols || enclosures.len() != entries.len() {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        let den = entries.iter().fold(BigInt::one(), |l, e| l.lcm(e.denom()));
        let nums = entries.iter().map(|e| e.numer() * (&den / e.denom())).collect();
        Ok(Theta { rows, cols, entries, enclosures, precision_digits, provenance, origin, den, nums })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, i: usize, j: usize) -> &BigRational {
        &self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> &[BigRational] {
        &self.entries
    }

    pub fn enclosures(&self) -> &[ValidatedReal] {
        &self.enclosures
    }

    /// Decimal digits of the underlying sample (infinite when exact).
    pub fn precision_digits(&self) -> f64 {
        self.precision_digits
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn origin(&self) -> Option<&SampleOrigin> {
        self.origin.as_ref()
    }

    pub fn is_exact(&self) -> bool {
        self.enclosures.iter().all(ValidatedReal::is_exact)
    }

    /// Largest enclosure width over all entries.
    pub fn max_width(&self) -> BigRational {
        self.enclosures.iter().map(|e| e.width()).max().unwrap_or_else(BigRational::zero)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.entries.iter().map(crate::numerics::to_f64).collect()
    }

    /// Common denominator of all entries.
    pub(crate) fn den(&self) -> &BigInt {
        &self.den
    }

    /// Entries times the common denominator.
    pub(crate) fn nums(&self) -> &[BigInt] {
        &self.nums
    }

    /// Numerators over `den()` of `p + θq`.
    pub(crate) fn residual_nums(&self, p: &[BigInt], q: &[BigInt]) -> Vec<BigInt> {
        (0..self.rows)
            .map(|i| {
                let mut acc = &p[i] * &self.den;
                for j in 0..self.cols {
                    acc += &self.nums[i * self.cols + j] * &q[j];
                }
                acc
            })
            .collect()
    }

    /// `p + θq` exactly.
    pub fn residual(&self, p: &[BigInt], q: &[BigInt]) -> Vec<BigRational> {
        self.residual_nums(p, q)
            .into_iter()
            .map(|n| BigRational::new(n, self.den.clone()))
            .collect()
    }

    fn check_shape(&self, space: &ApproxSpace) -> Result<()> {
        if self.rows != space.m() || self.cols != space.n() {
            return Err(Error::Dimension(format!(
                "θ is {}x{} but the space has m={}, n={}",
                self.rows,
                self.cols,
                space.m(),
                space.n()
            )));
        }
        Ok(())
    }
}

/// Which notion of best approximation an engine computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Definition {
    /// Every coordinate its own block with the absolute value.
    Cuboid,
    /// One block on each side.
    NormCylinder,
    /// The block decomposition of the given space.
    General,
}

impl Definition {
    /// The space the definition uses, derived from `space`.
    pub fn resolve(self, space: &ApproxSpace) -> Result<ApproxSpace> {
        match self {
            Definition::Cuboid => Ok(ApproxSpace::cuboid(space.m(), space.n())),
            Definition::NormCylinder if space.k() == 1 && space.r() == 1 => Ok(space.clone()),
            Definition::NormCylinder => Err(Error::InvalidConfig(
                "the norm-cylinder definition needs one block on each side".into(),
            )),
            Definition::General => Ok(space.clone()),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Definition::Cuboid => "cuboid",
            Definition::NormCylinder => "norm",
            Definition::General => "general",
        }
    }
}

impl std::str::FromStr for Definition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cuboid" => Ok(Definition::Cuboid),
            "norm" | "cylinder" => Ok(Definition::NormCylinder),
            "general" => Ok(Definition::General),
            _ => Err(Error::Parse(format!("unknown definition '{s}'"))),
        }
    }
}

/// Arithmetic used for comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Every comparison in exact rational arithmetic.
    Exact,
    /// `f64` comparisons, recomputed exactly inside the guard.
    Guarded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub definition: Definition,
    /// Largest normalized n-block norm of `q` considered.
    pub q_bound: f64,
    pub mode: Mode,
    /// Relative guard for guarded comparisons.
    pub guard: f64,
    /// 1-based coordinate of `(p + θq, q)` made nonnegative; `None` means `d`.
    pub selector: Option<usize>,
}

impl EngineConfig {
    pub fn new(definition: Definition, q_bound: f64) -> Self {
        EngineConfig {
            definition,
            q_bound,
            mode: Mode::Guarded,
            guard: crate::numerics::DEFAULT_GUARD,
            selector: None,
        }
    }

    pub fn exact(mut self) -> Self {
        self.mode = Mode::Exact;
        self
    }

    pub fn with_selector(mut self, j: usize) -> Self {
        self.selector = Some(j);
        self
    }

    fn validate(&self, space: &ApproxSpace) -> Result<()> {
        if !(self.q_bound >= 1.0) {
            return Err(Error::InvalidConfig("q_bound must be at least 1".into()));
        }
        if let Some(j) = self.selector {
            if j == 0 || j > space.d() {
                return Err(Error::InvalidConfig(format!("selector {j} outside 1..={}", space.d())));
            }
        }
        Ok(())
    }
}

/// One best approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct BestApprox {
    pub p: Vec<BigInt>,
    pub q: Vec<BigInt>,
    /// User-unit norms of the m-blocks of `p + θq`.
    pub m_block_norms: Vec<f64>,
    /// User-unit norms of the n-blocks of `q`.
    pub n_block_norms: Vec<f64>,
    pub m_block_log_norms: Vec<f64>,
    pub n_block_log_norms: Vec<f64>,
    pub error: f64,
    pub log_error: f64,
    /// Log of the largest normalized n-block norm of `q`.
    pub log_q: f64,
    /// 1-based position in the output sequence.
    pub index: usize,
    /// Fails one of the non-degeneracy conditions used by hitting times.
    pub degenerate: bool,
}

/// Exact data of a pair `(p, q)`: residual numerators and all block keys.
#[derive(Debug, Clone)]
pub(crate) struct Profile {
    /// User keys `‖block‖^e` for all `k + r` blocks.
    pub keys: Vec<BigRational>,
}

impl Profile {
    pub fn new(theta: &Theta, space: &ApproxSpace, p: &[BigInt], q: &[BigInt]) -> Self {
        let nums = theta.residual_nums(p, q);
        Self::from_nums(theta, space, &nums, q)
    }

    pub fn from_nums(theta: &Theta, space: &ApproxSpace, nums: &[BigInt], q: &[BigInt]) -> Self {
        let mut keys = Vec::with_capacity(space.blocks());
        for i in 0..space.k() {
            let (norm, range) = space.block(i);
            keys.push(residual_key(&norm.spec, &nums[range], theta.den()));
        }
        let m = space.m();
        for j in 0..space.r() {
            let (norm, range) = space.block(space.k() + j);
            keys.push(norm.spec.key_int(&q[range.start - m..range.end - m]));
        }
        Profile { keys }
    }

    /// `ln` of the user norm of block `b`.
    pub fn log_norm(&self, space: &ApproxSpace, b: usize) -> f64 {
        ln_abs(&self.keys[b]) / space.block(b).0.exponent() as f64
    }

    /// Normalized key of block `b`.
    pub fn normalized_key(&self, space: &ApproxSpace, b: usize) -> BigRational {
        space.block(b).0.normalized_key(&self.keys[b])
    }

    /// Whether the hitting-time conditions fail: a zero block other than the
    /// first m-block, or a negative first time coordinate.
    pub fn degenerate(&self, space: &ApproxSpace) -> bool {
        if self.keys[1..].iter().any(|key| key.is_zero()) {
            return true;
        }
        // t_1 ≥ 0 ⇔ Π_{b ≥ 1} N_b^{dim_b} ≥ 1 in normalized units.
        let mut log = 0.0;
        for b in 1..space.blocks() {
            log += space.block_dim(b) as f64 * ln_abs(&self.normalized_key(space, b))
                / space.block(b).0.exponent() as f64;
        }
        if log.abs() > 1e-9 {
            return log < 0.0;
        }
        let l = (1..space.blocks()).fold(1u32, |acc, b| {
            let e = space.block(b).0.exponent();
            acc / gcd_u32(acc, e) * e
        });
        let mut prod = BigRational::one();
        for b in 1..space.blocks() {
            let e = space.block(b).0.exponent();
            let power = space.block_dim(b) as u32 * (l / e);
            prod *= num_traits::pow(self.normalized_key(space, b), power as usize);
        }
        prod < BigRational::one()
    }
}

fn gcd_u32(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd_u32(b, a % b)
    }
}

/// `‖x‖^e` of a residual block given by numerators over `den`, built without
/// gcd reductions.
pub(crate) fn residual_key(spec: &crate::geometry::NormSpec, nums: &[BigInt], den: &BigInt) -> BigRational {
    use crate::geometry::NormSpec;
    match spec {
        NormSpec::Sup => {
            let top = nums.iter().map(|v| v.abs()).max().unwrap_or_else(BigInt::zero);
            BigRational::new_raw(top, den.clone())
        }
        NormSpec::WeightedSup(w) => {
            let l = w.iter().fold(BigInt::one(), |l, wi| l.lcm(wi.denom()));
            let top = nums
                .iter()
                .zip(w)
                .map(|(v, wi)| v.abs() * wi.numer() * (&l / wi.denom()))
                .max()
                .unwrap_or_else(BigInt::zero);
            BigRational::new_raw(top, den * l)
        }
        NormSpec::Euclidean => {
            let top: BigInt = nums.iter().map(|v| v * v).sum();
            BigRational::new_raw(top, den * den)
        }
        NormSpec::P(p) => {
            let top: BigInt = nums.iter().map(|v| num_traits::pow(v.abs(), *p as usize)).sum();
            BigRational::new_raw(top, num_traits::pow(den.clone(), *p as usize))
        }
    }
}

impl BestApprox {
    /// Record for `(p, q)` under `space`; the sign is taken as given.
    pub fn from_pq(theta: &Theta, space: &ApproxSpace, p: Vec<BigInt>, q: Vec<BigInt>, index: usize) -> Self {
        let profile = Profile::new(theta, space, &p, &q);
        Self::from_profile(space, &profile, p, q, index)
    }

    pub(crate) fn from_profile(
        space: &ApproxSpace,
        profile: &Profile,
        p: Vec<BigInt>,
        q: Vec<BigInt>,
        index: usize,
    ) -> Self {
        let k = space.k();
        let logs: Vec<f64> = (0..space.blocks()).map(|b| profile.log_norm(space, b)).collect();
        let log_error: f64 =
            logs.iter().enumerate().map(|(b, l)| space.block_dim(b) as f64 * l).sum();
        let log_q = (0..space.r())
            .map(|j| logs[k + j] + space.n_norms()[j].scale.ln())
            .fold(f64::NEG_INFINITY, f64::max);
        BestApprox {
            m_block_norms: logs[..k].iter().map(|l| l.exp()).collect(),
            n_block_norms: logs[k..].iter().map(|l| l.exp()).collect(),
            m_block_log_norms: logs[..k].to_vec(),
            n_block_log_norms: logs[k..].to_vec(),
            error: log_error.exp(),
            log_error,
            log_q,
            index,
            degenerate: profile.degenerate(space),
            p,
            q,
        }
    }

    /// `(p, q)` as one integer vector.
    pub fn coords(&self) -> Vec<BigInt> {
        self.p.iter().chain(&self.q).cloned().collect()
    }

    /// Normalized `‖q‖`.
    pub fn q_norm(&self) -> f64 {
        self.log_q.exp()
    }
}

/// `Π ‖ρ_i(p + θq)‖^{m_i} · Π ‖ρ'_j(q)‖^{n_j}` in user units.
pub fn error_of(theta: &Theta, p: &[BigInt], q: &[BigInt], space: &ApproxSpace) -> Result<f64> {
    theta.check_shape(space)?;
    let profile = Profile::new(theta, space, p, q);
    if profile.keys.iter().any(|k| k.is_zero()) {
        return Ok(0.0);
    }
    let log: f64 = (0..space.blocks())
        .map(|b| space.block_dim(b) as f64 * profile.log_norm(space, b))
        .sum();
    Ok(log.exp())
}

/// Per-block unit vectors of `(p + θq, q)`, `k + r` of them.
pub fn proj_of(theta: &Theta, p: &[BigInt], q: &[BigInt], space: &ApproxSpace) -> Result<Vec<Vec<f64>>> {
    theta.check_shape(space)?;
    let residual = theta.residual(p, q);
    let profile = Profile::new(theta, space, p, q);
    let m = space.m();
    let mut out = Vec::with_capacity(space.blocks());
    for b in 0..space.blocks() {
        if profile.keys[b].is_zero() {
            return Err(Error::DegenerateBlock(b + 1));
        }
        let (_, range) = space.block(b);
        let log_norm = profile.log_norm(space, b);
        let block: Vec<f64> = range
            .map(|c| {
                let (sign, log) = if c < m {
                    (residual[c].signum(), ln_abs(&residual[c]))
                } else {
                    let v = BigRational::from_integer(q[c - m].clone());
                    (v.signum(), ln_abs(&v))
                };
                crate::numerics::to_f64(&sign) * (log - log_norm).exp()
            })
            .collect();
        out.push(block);
    }
    Ok(out)
}

/// Sign of `(p, q)` making coordinate `j` (1-based) of `(p + θq, q)` positive,
/// falling back to the first nonzero coordinate of `q`, then of `p + θq`.
pub(crate) fn normalize_sign(theta: &Theta, p: &mut [BigInt], q: &mut [BigInt], selector: usize) {
    let m = theta.rows();
    let residual = theta.residual_nums(p, q);
    let pick = |c: usize| -> BigInt {
        if c < m {
            residual[c].clone()
        } else {
            q[c - m].clone()
        }
    };
    let mut sign = pick(selector - 1).signum();
    if sign.is_zero() {
        sign = q
            .iter()
            .chain(residual.iter())
            .find(|v| !v.is_zero())
            .map(|v| v.signum())
            .unwrap_or_else(BigInt::one);
    }
    if sign.is_negative() {
        for v in p.iter_mut().chain(q.iter_mut()) {
            *v = -v.clone();
        }
    }
}

/// Output order: normalized `‖q‖`, then the normalized n-block norm vector,
/// then the coordinates of `q`.
pub(crate) fn cmp_order(
    space: &ApproxSpace,
    a: &Profile,
    qa: &[BigInt],
    b: &Profile,
    qb: &[BigInt],
) -> Ordering {
    let k = space.k();
    let max_key = |pr: &Profile| {
        let mut best = 0;
        for j in 1..space.r() {
            if cmp_block(space, pr, k + j, pr, k + best) == Ordering::Greater {
                best = j;
            }
        }
        k + best
    };
    let (ia, ib) = (max_key(a), max_key(b));
    let na = a.normalized_key(space, ia);
    let nb = b.normalized_key(space, ib);
    let ea = space.block(ia).0.exponent();
    let eb = space.block(ib).0.exponent();
    cmp_roots(&na, ea, &nb, eb)
        .then_with(|| {
            (0..space.r())
                .map(|j| cmp_block(space, a, k + j, b, k + j))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        })
        .then_with(|| qa.cmp(qb))
}

fn cmp_block(space: &ApproxSpace, a: &Profile, ba: usize, b: &Profile, bb: usize) -> Ordering {
    cmp_roots(
        &a.normalized_key(space, ba),
        space.block(ba).0.exponent(),
        &b.normalized_key(space, bb),
        space.block(bb).0.exponent(),
    )
}

/// Sorts `(p, q)` pairs into output order and builds the records.
pub(crate) fn finalize(theta: &Theta, space: &ApproxSpace, pairs: Vec<(Vec<BigInt>, Vec<BigInt>)>, selector: usize) -> Vec<BestApprox> {
    let mut items: Vec<(Profile, Vec<BigInt>, Vec<BigInt>)> = pairs
        .into_iter()
        .map(|(mut p, mut q)| {
            normalize_sign(theta, &mut p, &mut q, selector);
            (Profile::new(theta, space, &p, &q), p, q)
        })
        .collect();
    items.sort_by(|a, b| cmp_order(space, &a.0, &a.2, &b.0, &b.2));
    items
        .into_iter()
        .enumerate()
        .map(|(i, (profile, p, q))| BestApprox::from_profile(space, &profile, p, q, i + 1))
        .collect()
}

/// Whether all coordinates of `(p, q)` are coprime.
pub fn is_primitive_pair(p: &[BigInt], q: &[BigInt]) -> bool {
    let all: Vec<BigInt> = p.iter().chain(q).cloned().collect();
    is_primitive(&all)
}
