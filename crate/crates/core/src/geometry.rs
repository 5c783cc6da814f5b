//! Block decompositions, block norms, product regions and the volume
//! constants attached to an approximation space.
//!
//! Every block norm is stored twice: as the norm the user asked for and as a
//! rescaled copy (the "normalized" norm). The normalized m-block norms give
//! the all-ones vector norm 1, so the open sup-norm unit ball sits inside each
//! unit ball, and the normalized n-block norms give every nonzero integer
//! vector norm at least 1. Reported norms and errors use user units; the flow,
//! hitting times and `‖q‖` use normalized units.

use std::fmt;
use std::ops::Range;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::numerics::to_f64;

/// A monotone norm on one block of coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum NormSpec {
    Sup,
    Euclidean,
    /// `ℓ^p` norm with an integer exponent `p ≥ 1`.
    P(u32),
    /// `max_i w_i |x_i|` with positive rational weights.
    WeightedSup(Vec<BigRational>),
}

impl NormSpec {
    /// The exponent `e` such that `‖x‖^e` is a rational function of rational `x`.
    pub fn exponent(&self) -> u32 {
        match self {
            NormSpec::Sup | NormSpec::WeightedSup(_) => 1,
            NormSpec::Euclidean => 2,
            NormSpec::P(p) => *p,
        }
    }

    /// `‖x‖^e` computed exactly.
    pub fn key(&self, x: &[BigRational]) -> BigRational {
        match self {
            NormSpec::Sup => x.iter().map(|v| v.abs()).max().unwrap_or_else(BigRational::zero),
            NormSpec::WeightedSup(w) => x
                .iter()
                .zip(w)
                .map(|(v, w)| v.abs() * w)
                .max()
                .unwrap_or_else(BigRational::zero),
            NormSpec::Euclidean => x.iter().map(|v| v * v).sum(),
            NormSpec::P(p) => x.iter().map(|v| num_traits::pow(v.abs(), *p as usize)).sum(),
        }
    }

    /// `‖x‖^e` for an integer vector.
    pub fn key_int(&self, x: &[BigInt]) -> BigRational {
        let r: Vec<BigRational> = x.iter().map(|v| BigRational::from_integer(v.clone())).collect();
        self.key(&r)
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        match self {
            NormSpec::Sup => x.iter().fold(0.0, |a, v| a.max(v.abs())),
            NormSpec::WeightedSup(w) => {
                x.iter().zip(w).fold(0.0, |a, (v, w)| a.max(v.abs() * to_f64(w)))
            }
            NormSpec::Euclidean => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            NormSpec::P(p) => {
                let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                if scale == 0.0 {
                    return 0.0;
                }
                let s: f64 = x.iter().map(|v| (v.abs() / scale).powi(*p as i32)).sum();
                scale * s.powf(1.0 / *p as f64)
            }
        }
    }

    /// Bound on `|‖x‖ − ‖y‖| / max_i |x_i − y_i|` in dimension `dim`.
    pub fn lipschitz(&self, dim: usize) -> f64 {
        match self {
            NormSpec::Sup => 1.0,
            NormSpec::WeightedSup(w) => w.iter().map(to_f64).fold(0.0, f64::max),
            NormSpec::Euclidean | NormSpec::P(_) => dim as f64,
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            NormSpec::P(0) => Err(Error::InvalidConfig("P-norm exponent must be at least 1".into())),
            NormSpec::WeightedSup(w) if w.len() != dim => Err(Error::InvalidConfig(format!(
                "weighted sup norm has {} weights for a block of dimension {dim}",
                w.len()
            ))),
            NormSpec::WeightedSup(w) if w.iter().any(|v| !v.is_positive()) => {
                Err(Error::InvalidConfig("weights must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    fn parse(code: &str, dim: usize) -> Result<Self> {
        let spec = match code {
            "" | "s" => NormSpec::Sup,
            "e" => NormSpec::Euclidean,
            _ if code.starts_with('p') => {
                let p: u32 = code[1..]
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad P-norm exponent in '{code}'")))?;
                NormSpec::P(p)
            }
            _ if code.starts_with('w') => {
                let weights = code[1..]
                    .split(':')
                    .map(parse_rational)
                    .collect::<Result<Vec<_>>>()?;
                NormSpec::WeightedSup(weights)
            }
            _ => return Err(Error::Parse(format!("unknown norm code '{code}'"))),
        };
        spec.validate(dim)?;
        Ok(spec)
    }
}

impl fmt::Display for NormSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormSpec::Sup => write!(f, "s"),
            NormSpec::Euclidean => write!(f, "e"),
            NormSpec::P(p) => write!(f, "p{p}"),
            NormSpec::WeightedSup(w) => {
                let parts: Vec<String> = w.iter().map(|v| v.to_string()).collect();
                write!(f, "w{}", parts.join(":"))
            }
        }
    }
}

/// Parses `a`, `-a`, `a/b` or a finite decimal such as `0.125`.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let err = || Error::Parse(format!("not a rational number: '{s}'"));
    if let Some((a, b)) = s.split_once('/') {
        let a: BigInt = a.trim().parse().map_err(|_| err())?;
        let b: BigInt = b.trim().parse().map_err(|_| err())?;
        if b.is_zero() {
            return Err(err());
        }
        return Ok(BigRational::new(a, b));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let negative = int.starts_with('-');
        let digits = format!("{}{}", int.trim_start_matches(['-', '+']), frac);
        let n: BigInt = digits.parse().map_err(|_| err())?;
        let d = num_traits::pow(BigInt::from(10), frac.len());
        let v = BigRational::new(n, d);
        return Ok(if negative { -v } else { v });
    }
    let n: BigInt = s.parse().map_err(|_| err())?;
    Ok(BigRational::from_integer(n))
}

/// Block sizes `m_1..m_k | n_1..n_r`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    m_parts: Vec<usize>,
    n_parts: Vec<usize>,
}

impl Decomposition {
    pub fn new(m_parts: Vec<usize>, n_parts: Vec<usize>) -> Result<Self> {
        if m_parts.is_empty() || n_parts.is_empty() {
            return Err(Error::InvalidConfig("need at least one block on each side".into()));
        }
        if m_parts.iter().chain(&n_parts).any(|&b| b == 0) {
            return Err(Error::InvalidConfig("block sizes must be positive".into()));
        }
        Ok(Decomposition { m_parts, n_parts })
    }

    pub fn m_parts(&self) -> &[usize] {
        &self.m_parts
    }

    pub fn n_parts(&self) -> &[usize] {
        &self.n_parts
    }

    pub fn m(&self) -> usize {
        self.m_parts.iter().sum()
    }

    pub fn n(&self) -> usize {
        self.n_parts.iter().sum()
    }

    pub fn d(&self) -> usize {
        self.m() + self.n()
    }

    pub fn k(&self) -> usize {
        self.m_parts.len()
    }

    pub fn r(&self) -> usize {
        self.n_parts.len()
    }

    /// Coordinates of m-block `i` inside `0..m`.
    pub fn m_range(&self, i: usize) -> Range<usize> {
        let start: usize = self.m_parts[..i].iter().sum();
        start..start + self.m_parts[i]
    }

    /// Coordinates of n-block `j` inside `0..n`.
    pub fn n_range(&self, j: usize) -> Range<usize> {
        let start: usize = self.n_parts[..j].iter().sum();
        start..start + self.n_parts[j]
    }
}

/// One block norm together with its normalizing factor.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockNorm {
    pub spec: NormSpec,
    pub dim: usize,
    /// `scale^e` where normalized norm = `scale` × user norm.
    pub scale_pow: BigRational,
    pub scale: f64,
}

impl BlockNorm {
    fn new_m(spec: NormSpec, dim: usize) -> Self {
        let ones = vec![BigRational::one(); dim];
        let scale_pow = BigRational::one() / spec.key(&ones);
        Self::finish(spec, dim, scale_pow)
    }

    fn new_n(spec: NormSpec, dim: usize) -> Self {
        let min_key = (0..dim)
            .map(|l| {
                let mut e = vec![BigRational::zero(); dim];
                e[l] = BigRational::one();
                spec.key(&e)
            })
            .min()
            .unwrap();
        Self::finish(spec, dim, BigRational::one() / min_key)
    }

    fn finish(spec: NormSpec, dim: usize, scale_pow: BigRational) -> Self {
        let scale = to_f64(&scale_pow).powf(1.0 / spec.exponent() as f64);
        BlockNorm { spec, dim, scale_pow, scale }
    }

    pub fn exponent(&self) -> u32 {
        self.spec.exponent()
    }

    /// `(normalized norm)^e` from a user key.
    pub fn normalized_key(&self, key: &BigRational) -> BigRational {
        key * &self.scale_pow
    }
}

/// Block decomposition, one norm per block and the bound ε on Error.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxSpace {
    decomp: Decomposition,
    m_norms: Vec<BlockNorm>,
    n_norms: Vec<BlockNorm>,
    epsilon: f64,
}

impl ApproxSpace {
    pub fn new(decomp: Decomposition, m_specs: Vec<NormSpec>, n_specs: Vec<NormSpec>) -> Result<Self> {
        if m_specs.len() != decomp.k() || n_specs.len() != decomp.r() {
            return Err(Error::InvalidConfig("one norm per block is required".into()));
        }
        let mut m_norms = Vec::new();
        for (spec, &dim) in m_specs.into_iter().zip(decomp.m_parts()) {
            spec.validate(dim)?;
            m_norms.push(BlockNorm::new_m(spec, dim));
        }
        let mut n_norms = Vec::new();
        for (spec, &dim) in n_specs.into_iter().zip(decomp.n_parts()) {
            spec.validate(dim)?;
            n_norms.push(BlockNorm::new_n(spec, dim));
        }
        let mut space = ApproxSpace { decomp, m_norms, n_norms, epsilon: 0.0 };
        space.epsilon = compute_epsilon(&space);
        Ok(space)
    }

    /// Every coordinate its own block, all with the absolute value.
    pub fn cuboid(m: usize, n: usize) -> Self {
        let decomp = Decomposition::new(vec![1; m], vec![1; n]).expect("positive sizes");
        Self::new(decomp, vec![NormSpec::Sup; m], vec![NormSpec::Sup; n]).expect("valid norms")
    }

    /// One m-block and one n-block with the given norms.
    pub fn cylinder(m: usize, n: usize, m_spec: NormSpec, n_spec: NormSpec) -> Result<Self> {
        Self::new(Decomposition::new(vec![m], vec![n])?, vec![m_spec], vec![n_spec])
    }

    /// Parses `m:2e,1s|n:1s`, or the short form `2e,1|1` where a missing
    /// norm code means the sup norm.
    pub fn parse(s: &str) -> Result<Self> {
        let (left, right) = s
            .split_once('|')
            .ok_or_else(|| Error::Parse(format!("decomposition '{s}' lacks '|'")))?;
        let left = left.trim().trim_start_matches("m:");
        let right = right.trim().trim_start_matches("n:");
        let (m_parts, m_specs) = parse_blocks(left)?;
        let (n_parts, n_specs) = parse_blocks(right)?;
        Self::new(Decomposition::new(m_parts, n_parts)?, m_specs, n_specs)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidConfig("epsilon must be positive".into()));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn decomp(&self) -> &Decomposition {
        &self.decomp
    }

    pub fn m_norms(&self) -> &[BlockNorm] {
        &self.m_norms
    }

    pub fn n_norms(&self) -> &[BlockNorm] {
        &self.n_norms
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn m(&self) -> usize {
        self.decomp.m()
    }

    pub fn n(&self) -> usize {
        self.decomp.n()
    }

    pub fn d(&self) -> usize {
        self.decomp.d()
    }

    pub fn k(&self) -> usize {
        self.decomp.k()
    }

    pub fn r(&self) -> usize {
        self.decomp.r()
    }

    /// Block norm (index over all `k + r` blocks) with its coordinate range
    /// inside the full `d`-vector.
    pub fn block(&self, b: usize) -> (&BlockNorm, Range<usize>) {
        let k = self.k();
        if b < k {
            (&self.m_norms[b], self.decomp.m_range(b))
        } else {
            let r = self.decomp.n_range(b - k);
            let m = self.m();
            (&self.n_norms[b - k], r.start + m..r.end + m)
        }
    }

    pub fn blocks(&self) -> usize {
        self.k() + self.r()
    }

    /// Block dimension used as the exponent in Error.
    pub fn block_dim(&self, b: usize) -> usize {
        self.block(b).0.dim
    }

    /// User-unit norms of all blocks of a `d`-vector.
    pub fn block_norms(&self, v: &[f64]) -> Vec<f64> {
        (0..self.blocks())
            .map(|b| {
                let (norm, range) = self.block(b);
                norm.spec.norm(&v[range])
            })
            .collect()
    }

    /// Normalized norms of all blocks of a `d`-vector.
    pub fn normalized_block_norms(&self, v: &[f64]) -> Vec<f64> {
        (0..self.blocks())
            .map(|b| {
                let (norm, range) = self.block(b);
                norm.scale * norm.spec.norm(&v[range])
            })
            .collect()
    }

    /// Compact descriptor in the parse syntax.
    pub fn descriptor(&self) -> String {
        let side = |norms: &[BlockNorm]| {
            norms.iter().map(|b| format!("{}{}", b.dim, b.spec)).collect::<Vec<_>>().join(",")
        };
        format!("m:{}|n:{}", side(&self.m_norms), side(&self.n_norms))
    }
}

fn parse_blocks(s: &str) -> Result<(Vec<usize>, Vec<NormSpec>)> {
    let mut parts = Vec::new();
    let mut specs = Vec::new();
    for token in s.split(',') {
        let token = token.trim();
        let split = token.find(|c: char| !c.is_ascii_digit()).unwrap_or(token.len());
        let dim: usize = token[..split]
            .parse()
            .map_err(|_| Error::Parse(format!("bad block '{token}'")))?;
        specs.push(NormSpec::parse(&token[split..], dim)?);
        parts.push(dim);
    }
    Ok((parts, specs))
}

/// Radii of a product of closed balls, one radius per block, in normalized units.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductRegion {
    pub radii: Vec<f64>,
}

impl ProductRegion {
    pub fn new(radii: Vec<f64>) -> Self {
        ProductRegion { radii }
    }
}

pub fn block_norm(x: &[f64], spec: &NormSpec) -> f64 {
    spec.norm(x)
}

/// Whether `v` lies in the closed region (normalized block norms ≤ radii).
pub fn region_contains(region: &ProductRegion, v: &[f64], space: &ApproxSpace) -> bool {
    space
        .normalized_block_norms(v)
        .iter()
        .zip(&region.radii)
        .all(|(n, r)| n <= r)
}

/// Lebesgue volume of the user-unit ball of `spec` in dimension `dim`.
pub fn unit_ball_volume(spec: &NormSpec, dim: usize) -> f64 {
    let l = dim as f64;
    match spec {
        NormSpec::Sup => 2f64.powi(dim as i32),
        NormSpec::WeightedSup(w) => {
            w.iter().fold(2f64.powi(dim as i32), |acc, wi| acc / to_f64(wi))
        }
        NormSpec::Euclidean => {
            let (mut v, start) = if dim % 2 == 0 { (1.0, 2) } else { (2.0, 3) };
            for j in (start..=dim).step_by(2) {
                v *= 2.0 * std::f64::consts::PI / j as f64;
            }
            v
        }
        NormSpec::P(1) => 2f64.powi(dim as i32) / (1..=dim).map(|j| j as f64).product::<f64>(),
        NormSpec::P(2) => unit_ball_volume(&NormSpec::Euclidean, dim),
        NormSpec::P(p) => {
            let p = *p as f64;
            (2.0 * gamma(1.0 + 1.0 / p)).powf(l) / gamma(1.0 + l / p)
        }
    }
}

/// Minkowski bound `2^d / Π vol(unit balls)` in user units.
pub fn compute_epsilon(space: &ApproxSpace) -> f64 {
    let vol: f64 = space
        .m_norms
        .iter()
        .chain(&space.n_norms)
        .map(|b| unit_ball_volume(&b.spec, b.dim))
        .product();
    2f64.powi(space.d() as i32) / vol
}

/// `c_{k+r−1}(n) = Σ_{x ∈ {0,1}^r} (−1)^{r−|x|} (n·x)^{k+r−1}`.
pub fn c_constant(k: usize, n_parts: &[usize]) -> BigInt {
    let r = n_parts.len();
    let power = k + r - 1;
    let mut total = BigInt::zero();
    for mask in 0u64..(1u64 << r) {
        let weight: usize = (0..r).filter(|j| mask >> j & 1 == 1).map(|j| n_parts[j]).sum();
        let term = num_traits::pow(BigInt::from(weight), power);
        if (r - mask.count_ones() as usize) % 2 == 0 {
            total += term;
        } else {
            total -= term;
        }
    }
    total
}

/// Volume of the time polytope `J^T`.
pub fn jt_volume(t: f64, space: &ApproxSpace) -> f64 {
    let decomp = space.decomp();
    let (k, r) = (decomp.k(), decomp.r());
    let power = k + r - 1;
    let c = to_f64(&BigRational::from_integer(c_constant(k, decomp.n_parts())));
    let mut denom: f64 = decomp.m_parts().iter().map(|&v| v as f64).product();
    denom *= decomp.n_parts()[..r - 1].iter().map(|&v| v as f64).product::<f64>();
    denom *= (1..=power).map(|v| v as f64).product::<f64>();
    t.powi(power as i32) * c / denom
}

/// Membership of a time vector `(t_1..t_k, s_1..s_{r−1})` in `J^T`.
pub fn in_jt(t: &[f64], big_t: f64, space: &ApproxSpace) -> bool {
    let decomp = space.decomp();
    let (k, r) = (decomp.k(), decomp.r());
    if t.len() != k + r - 1 || t.iter().any(|&v| v < 0.0) {
        return false;
    }
    if t[k..].iter().any(|&s| s > big_t) {
        return false;
    }
    let balance = balance(t, decomp);
    (0.0..=decomp.n_parts()[r - 1] as f64 * big_t).contains(&balance)
}

/// `Σ m_i t_i − Σ_{j<r} n_j s_j`.
pub fn balance(t: &[f64], decomp: &Decomposition) -> f64 {
    let k = decomp.k();
    let mut b: f64 = decomp.m_parts().iter().zip(t).map(|(&m, &ti)| m as f64 * ti).sum();
    b -= decomp.n_parts().iter().zip(&t[k..]).map(|(&n, &s)| n as f64 * s).sum::<f64>();
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rational;
    use approx::assert_relative_eq;

    #[test]
    fn norm_examples() {
        assert_eq!(block_norm(&[3.0, -4.0], &NormSpec::Sup), 4.0);
        assert_eq!(block_norm(&[3.0, 4.0], &NormSpec::Euclidean), 5.0);
        assert_relative_eq!(block_norm(&[1.0, 1.0], &NormSpec::P(3)), 2f64.powf(1.0 / 3.0), epsilon = 1e-15);
    }

    #[test]
    fn region_examples() {
        let s2 = ApproxSpace::cuboid(1, 1);
        assert!(region_contains(&ProductRegion::new(vec![1.0, 1.0]), &[0.0, 0.0], &s2));
        assert!(!region_contains(&ProductRegion::new(vec![0.5, 1.0]), &[0.6, 0.5], &s2));
        let s3 = ApproxSpace::cylinder(2, 1, NormSpec::Sup, NormSpec::Sup).unwrap();
        assert!(region_contains(&ProductRegion::new(vec![2.0 / 7.0, 5.0]), &[0.0, 2.0 / 7.0, 5.0], &s3));
    }

    #[test]
    fn volumes() {
        assert_eq!(unit_ball_volume(&NormSpec::Sup, 3), 8.0);
        assert_relative_eq!(unit_ball_volume(&NormSpec::Euclidean, 2), std::f64::consts::PI, epsilon = 1e-12);
        assert_relative_eq!(unit_ball_volume(&NormSpec::P(1), 2), 2.0, epsilon = 1e-12);
        assert_relative_eq!(unit_ball_volume(&NormSpec::P(2), 3), 4.0 * std::f64::consts::PI / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn epsilon_examples() {
        assert_relative_eq!(compute_epsilon(&ApproxSpace::cuboid(2, 2)), 1.0);
        let s = ApproxSpace::cylinder(1, 1, NormSpec::Euclidean, NormSpec::Euclidean).unwrap();
        assert_relative_eq!(compute_epsilon(&s), 1.0);
        let s = ApproxSpace::cylinder(2, 1, NormSpec::Euclidean, NormSpec::Sup).unwrap();
        assert_relative_eq!(compute_epsilon(&s), 4.0 / std::f64::consts::PI, epsilon = 1e-12);
    }

    #[test]
    fn c_constant_examples() {
        assert_eq!(c_constant(1, &[3]), BigInt::from(3));
        assert_eq!(c_constant(4, &[1]), BigInt::from(1));
        assert_eq!(c_constant(1, &[1, 1]), BigInt::from(2));
    }

    #[test]
    fn jt_volume_examples() {
        let s = ApproxSpace::cylinder(2, 3, NormSpec::Sup, NormSpec::Sup).unwrap();
        assert_relative_eq!(jt_volume(2.0, &s), 3.0 * 2.0 / 2.0);
        assert_relative_eq!(jt_volume(1.7, &ApproxSpace::cuboid(1, 1)), 1.7);
        assert_relative_eq!(jt_volume(2.0, &ApproxSpace::cuboid(2, 1)), 2.0);
    }

    #[test]
    fn parse_descriptor() {
        let s = ApproxSpace::parse("m:2e,1s|n:1s").unwrap();
        assert_eq!(s.decomp().m_parts(), &[2, 1]);
        assert_eq!(s.m_norms()[0].spec, NormSpec::Euclidean);
        assert_eq!(s.descriptor(), "m:2e,1s|n:1s");
        let t = ApproxSpace::parse("1|1").unwrap();
        assert_eq!(t, ApproxSpace::cuboid(1, 1));
        let w = ApproxSpace::parse("2w1:3|2p3").unwrap();
        assert_eq!(w.m_norms()[0].spec, NormSpec::WeightedSup(vec![rational(1, 1), rational(3, 1)]));
        assert!(ApproxSpace::parse("2x|1").is_err());
        assert!(ApproxSpace::parse("2").is_err());
    }

    #[test]
    fn normalization() {
        let s = ApproxSpace::parse("2e|2w2:3").unwrap();
        assert_eq!(s.m_norms()[0].scale_pow, rational(1, 2));
        assert_eq!(s.n_norms()[0].scale_pow, rational(1, 2));
        let v = [0.5, 0.5, 1.0, 0.0];
        let n = s.normalized_block_norms(&v);
        assert_relative_eq!(n[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(n[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn rationals_parse() {
        assert_eq!(parse_rational("3/9").unwrap(), rational(1, 3));
        assert_eq!(parse_rational("-0.25").unwrap(), rational(-1, 4));
        assert_eq!(parse_rational("7").unwrap(), rational(7, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
    }
}
