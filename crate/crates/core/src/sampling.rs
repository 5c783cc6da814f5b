//! Random θ drawn from Lebesgue, Cantor and IFS measures, from curves, or
//! given explicitly.
//!
//! Every draw is a pure function of `(seed, counter)`. Entry `e` of draw
//! `counter` reads its own ChaCha20 stream `counter · 65536 + e`, so workers
//! can draw in any order and refinement only ever appends digits.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::bestapprox::Theta;
use crate::error::{Error, Result};
use crate::geometry::parse_rational;
use crate::numerics::{ln_abs, pow_big, RealSource, ValidatedReal};

/// Generator recorded in output headers.
pub const RNG_ALGORITHM: &str = "ChaCha20 (rand_chacha 0.3), stream = counter*65536 + entry";

#[derive(Debug, Clone, PartialEq)]
pub enum SourceKind {
    /// Uniform decimal digits for every entry of a `rows × cols` matrix.
    Lebesgue { rows: usize, cols: usize, digits: usize },
    /// Middle-thirds Cantor measure: ternary digits 0 or 2 with equal odds.
    Cantor { digits: usize },
    /// Bernoulli measure of the IFS `x ↦ ratios[i]·x + translations[i]`.
    Ifs { ratios: Vec<BigRational>, translations: Vec<BigRational>, probabilities: Vec<f64>, depth: usize },
    /// `(x, x², …, x^degree)` as a `1 × degree` matrix, `x` from a scalar source.
    Curve { degree: usize, base: Box<SourceKind> },
    Explicit { rows: usize, cols: usize, entries: Vec<BigRational> },
    /// Larger real root of `a·x² + b·x + c`, enclosed to `bits` binary digits.
    Quadratic { a: i64, b: i64, c: i64, bits: usize },
}

impl SourceKind {
    fn shape(&self) -> (usize, usize) {
        match self {
            SourceKind::Lebesgue { rows, cols, .. } | SourceKind::Explicit { rows, cols, .. } => (*rows, *cols),
            SourceKind::Curve { degree, .. } => (1, *degree),
            _ => (1, 1),
        }
    }

    fn initial_level(&self) -> usize {
        match self {
            SourceKind::Lebesgue { digits, .. } | SourceKind::Cantor { digits } => *digits,
            SourceKind::Ifs { depth, .. } => *depth,
            SourceKind::Quadratic { bits, .. } => *bits,
            SourceKind::Curve { base, .. } => base.initial_level(),
            SourceKind::Explicit { .. } => 0,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        match self {
            SourceKind::Lebesgue { rows, cols, digits } => {
                if *rows == 0 || *cols == 0 || *digits == 0 {
                    return bad("lebesgue needs positive rows, cols and digits".into());
                }
            }
            SourceKind::Cantor { digits } if *digits == 0 => return bad("cantor needs digits > 0".into()),
            SourceKind::Cantor { .. } => {}
            SourceKind::Ifs { ratios, translations, probabilities, depth } => {
                if ratios.is_empty() || ratios.len() != translations.len() || ratios.len() != probabilities.len() {
                    return bad("ifs needs equally many ratios, translations and probabilities".into());
                }
                if ratios.iter().any(|r| r.abs() >= BigRational::one() || r.is_zero()) {
                    return bad("ifs ratios must satisfy 0 < |r| < 1".into());
                }
                if probabilities.iter().any(|p| !(*p >= 0.0)) || (probabilities.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return bad("ifs probabilities must be nonnegative and sum to 1".into());
                }
                if *depth == 0 {
                    return bad("ifs needs depth > 0".into());
                }
            }
            SourceKind::Curve { degree, base } => {
                if *degree == 0 {
                    return bad("curve needs degree > 0".into());
                }
                if base.shape() != (1, 1) {
                    return bad("curve base must be a scalar source".into());
                }
                base.validate()?;
            }
            SourceKind::Explicit { rows, cols, entries } => {
                if *rows == 0 || *cols == 0 || entries.len() != rows * cols {
                    return bad(format!("{} entries for a {rows}x{cols} matrix", entries.len()));
                }
            }
            SourceKind::Quadratic { a, b, c, bits } => {
                if *a == 0 {
                    return bad("quadratic needs a != 0".into());
                }
                if (*b as i128) * (*b as i128) - 4 * (*a as i128) * (*c as i128) < 0 {
                    return bad("quadratic has no real root".into());
                }
                if *bits == 0 {
                    return bad("quadratic needs bits > 0".into());
                }
            }
        }
        Ok(())
    }
}

/// An immutable θ generator: a measure, a seed and a refinement cap.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaSource {
    kind: SourceKind,
    seed: u64,
    hard_cap: usize,
}

/// Where a sampled θ came from, kept so it can be refined later.
#[derive(Debug, Clone)]
pub struct SampleOrigin {
    pub source: Arc<ThetaSource>,
    pub counter: u64,
}

impl ThetaSource {
    /// A source whose refinement cap is its initial budget.
    pub fn new(kind: SourceKind, seed: u64) -> Result<Self> {
        kind.validate()?;
        let hard_cap = kind.initial_level();
        Ok(ThetaSource { kind, seed, hard_cap })
    }

    /// Allows refinement up to `cap` digits (depth, bits) per entry.
    pub fn with_hard_cap(mut self, cap: usize) -> Self {
        self.hard_cap = cap.max(self.kind.initial_level());
        self
    }

    pub fn kind(&self) -> &SourceKind {
        &self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn hard_cap(&self) -> usize {
        self.hard_cap
    }

    pub fn shape(&self) -> (usize, usize) {
        self.kind.shape()
    }

    /// Builds a source from `key=value` settings such as
    /// `measure=cantor digits=4000 seed=42`.
    pub fn from_settings(settings: &BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| settings.get(k).map(String::as_str);
        let num = |k: &str, default: usize| -> Result<usize> {
            match get(k) {
                Some(v) => v.parse().map_err(|_| Error::Parse(format!("{k}={v} is not a count"))),
                None => Ok(default),
            }
        };
        let rationals = |k: &str| -> Result<Vec<BigRational>> {
            get(k)
                .ok_or_else(|| Error::Parse(format!("missing {k}")))?
                .split(',')
                .map(|s| parse_rational(s.trim()))
                .collect()
        };
        let seed = match get("seed") {
            Some(v) => v.parse().map_err(|_| Error::Parse(format!("seed={v} is not a u64")))?,
            None => 0,
        };
        let measure = get("measure").unwrap_or("lebesgue");
        let scalar = |measure: &str| -> Result<SourceKind> {
            Ok(match measure {
                "lebesgue" => SourceKind::Lebesgue { rows: 1, cols: 1, digits: num("digits", 60)? },
                "cantor" => SourceKind::Cantor { digits: num("digits", 120)? },
                "ifs" => SourceKind::Ifs {
                    ratios: rationals("ratios")?,
                    translations: rationals("translations")?,
                    probabilities: get("probabilities")
                        .ok_or_else(|| Error::Parse("missing probabilities".into()))?
                        .split(',')
                        .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad probability {s}"))))
                        .collect::<Result<_>>()?,
                    depth: num("depth", 200)?,
                },
                other => return Err(Error::Parse(format!("unknown measure {other}"))),
            })
        };
        let kind = match measure {
            "lebesgue" => SourceKind::Lebesgue { rows: num("rows", 1)?, cols: num("cols", 1)?, digits: num("digits", 60)? },
            "curve" | "veronese" => SourceKind::Curve {
                degree: num("degree", 2)?,
                base: Box::new(scalar(get("base").unwrap_or("lebesgue"))?),
            },
            "explicit" => {
                let entries = rationals("theta")?;
                let rows = num("rows", 1)?;
                let cols = num("cols", entries.len() / rows.max(1))?;
                SourceKind::Explicit { rows, cols, entries }
            }
            "quadratic" => {
                let coeffs: Vec<i64> = get("coefficients")
                    .ok_or_else(|| Error::Parse("missing coefficients=a,b,c".into()))?
                    .split(',')
                    .map(|s| s.trim().parse().map_err(|_| Error::Parse(format!("bad coefficient {s}"))))
                    .collect::<Result<_>>()?;
                if coeffs.len() != 3 {
                    return Err(Error::Parse("coefficients needs three integers".into()));
                }
                SourceKind::Quadratic { a: coeffs[0], b: coeffs[1], c: coeffs[2], bits: num("bits", 256)? }
            }
            other => scalar(other)?,
        };
        let src = ThetaSource::new(kind, seed)?;
        let cap = num("cap", src.hard_cap)?;
        Ok(src.with_hard_cap(cap))
    }

    /// The `counter`-th draw.
    pub fn sample(self: &Arc<Self>, counter: u64) -> Theta {
        self.sample_at(counter, self.kind.initial_level())
            .expect("validated source produces a well-formed matrix")
    }

    fn sample_at(self: &Arc<Self>, counter: u64, level: usize) -> Result<Theta> {
        let (rows, cols) = self.shape();
        let enclosures = self.sources(counter)
            .into_iter()
            .map(|s| match s {
                Entry::Exact(r) => ValidatedReal::exact(r),
                Entry::Source(s) => ValidatedReal::from_source(s, level),
            })
            .collect();
        theta_from(rows, cols, enclosures, self.to_string(), Some(SampleOrigin { source: self.clone(), counter }))
    }

    fn sources(&self, counter: u64) -> Vec<Entry> {
        let stream = |e: usize| counter.wrapping_mul(65536).wrapping_add(e as u64);
        let cap = self.hard_cap;
        match &self.kind {
            SourceKind::Explicit { entries, .. } => entries.iter().cloned().map(Entry::Exact).collect(),
            SourceKind::Curve { degree, base } => {
                let inner = ThetaSource { kind: (**base).clone(), seed: self.seed, hard_cap: cap };
                match inner.sources(counter).remove(0) {
                    Entry::Exact(x) => {
                        let mut p = BigRational::one();
                        (0..*degree)
                            .map(|_| {
                                p = &p * &x;
                                Entry::Exact(p.clone())
                            })
                            .collect()
                    }
                    Entry::Source(x) => (1..=*degree)
                        .map(|k| Entry::Source(Arc::new(PowerSource { base: x.clone(), power: k as u32 })))
                        .collect(),
                }
            }
            kind => {
                let (rows, cols) = kind.shape();
                (0..rows * cols)
                    .map(|e| scalar_source(kind, self.seed, stream(e), cap))
                    .collect()
            }
        }
    }
}

enum Entry {
    Exact(BigRational),
    Source(Arc<dyn RealSource>),
}

fn scalar_source(kind: &SourceKind, seed: u64, stream: u64, cap: usize) -> Entry {
    match kind {
        SourceKind::Lebesgue { .. } => Entry::Source(Arc::new(DigitSource {
            seed,
            stream,
            base: 10,
            alphabet: (0..10).collect(),
            weights: None,
            max_level: cap,
        })),
        SourceKind::Cantor { .. } => Entry::Source(Arc::new(DigitSource {
            seed,
            stream,
            base: 3,
            alphabet: vec![0, 2],
            weights: None,
            max_level: cap,
        })),
        SourceKind::Ifs { ratios, translations, probabilities, .. } => Entry::Source(Arc::new(IfsSource {
            seed,
            stream,
            ratios: ratios.clone(),
            translations: translations.clone(),
            probabilities: probabilities.clone(),
            max_level: cap,
        })),
        SourceKind::Quadratic { a, b, c, .. } => quadratic_entry(*a, *b, *c, cap),
        SourceKind::Explicit { .. } | SourceKind::Curve { .. } => unreachable!("not a scalar digit source"),
    }
}

fn theta_from(
    rows: usize,
    cols: usize,
    enclosures: Vec<ValidatedReal>,
    provenance: String,
    origin: Option<SampleOrigin>,
) -> Result<Theta> {
    let entries: Vec<BigRational> = enclosures.iter().map(|e| e.lower().clone()).collect();
    let width = enclosures.iter().map(|e| e.width()).max().unwrap_or_else(BigRational::zero);
    let digits = if width.is_zero() { f64::INFINITY } else { -ln_abs(&width) / std::f64::consts::LN_10 };
    Theta::from_parts(rows, cols, entries, enclosures, digits, provenance, origin)
}

/// A tighter truncation of the same draw, `extra` levels (digits, IFS depth
/// or bits) deeper. Exact θ is returned unchanged.
pub fn refine_sample(theta: &Theta, extra: usize) -> Result<Theta> {
    if theta.is_exact() {
        return Ok(theta.clone());
    }
    let mut enclosures = Vec::with_capacity(theta.enclosures().len());
    for e in theta.enclosures() {
        match e.source() {
            None => enclosures.push(e.clone()),
            Some(src) => {
                let level = e.level() + extra;
                if level > src.max_level() {
                    return Err(Error::RefinementExhausted(format!(
                        "{level} levels requested, cap is {}",
                        src.max_level()
                    )));
                }
                enclosures.push(ValidatedReal::from_source(src.clone(), level));
            }
        }
    }
    theta_from(theta.rows(), theta.cols(), enclosures, theta.provenance().to_string(), theta.origin().cloned())
}

impl fmt::Display for ThetaSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn join<T: fmt::Display>(v: &[T]) -> String {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        }
        fn kind(k: &SourceKind, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match k {
                SourceKind::Lebesgue { rows, cols, digits } => {
                    write!(f, "measure=lebesgue rows={rows} cols={cols} digits={digits}")
                }
                SourceKind::Cantor { digits } => write!(f, "measure=cantor digits={digits}"),
                SourceKind::Ifs { ratios, translations, probabilities, depth } => write!(
                    f,
                    "measure=ifs ratios={} translations={} probabilities={} depth={depth}",
                    join(ratios),
                    join(translations),
                    join(probabilities)
                ),
                SourceKind::Curve { degree, base } => {
                    write!(f, "measure=curve degree={degree} base=")?;
                    kind(base, f)
                }
                SourceKind::Explicit { rows, cols, entries } => {
                    write!(f, "measure=explicit rows={rows} cols={cols} theta={}", join(entries))
                }
                SourceKind::Quadratic { a, b, c, bits } => {
                    write!(f, "measure=quadratic coefficients={a},{b},{c} bits={bits}")
                }
            }
        }
        kind(&self.kind, f)?;
        write!(f, " seed={} cap={}", self.seed, self.hard_cap)
    }
}

/// `0.d_1 d_2 …` in `base` with digits drawn from `alphabet`.
#[derive(Debug)]
struct DigitSource {
    seed: u64,
    stream: u64,
    base: u32,
    alphabet: Vec<u32>,
    weights: Option<Vec<f64>>,
    max_level: usize,
}

impl DigitSource {
    fn digits(&self, level: usize) -> Vec<u32> {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        (0..level)
            .map(|_| match &self.weights {
                None => self.alphabet[rng.gen_range(0..self.alphabet.len())],
                Some(w) => self.alphabet[pick(&mut rng, w)],
            })
            .collect()
    }
}

fn pick(rng: &mut ChaCha20Rng, weights: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

impl RealSource for DigitSource {
    fn enclosure(&self, level: usize) -> (BigRational, BigRational) {
        let level = level.min(self.max_level);
        let mut num = BigInt::zero();
        for d in self.digits(level) {
            num = num * self.base + d;
        }
        let den = pow_big(self.base, level);
        let top = *self.alphabet.iter().max().unwrap();
        // The tail 0.000…d d d… is at most top/(base−1) units of the last place.
        let tail = BigRational::new(BigInt::from(top), BigInt::from(self.base - 1) * &den);
        let lower = BigRational::new(num, den);
        let upper = &lower + tail;
        (lower, upper)
    }

    fn max_level(&self) -> usize {
        self.max_level
    }

    fn width_bound(&self, level: usize) -> Option<BigRational> {
        let top = *self.alphabet.iter().max().unwrap();
        Some(BigRational::new(BigInt::from(top), BigInt::from(self.base - 1) * pow_big(self.base, level)))
    }
}

/// `f_{i_1} ∘ … ∘ f_{i_depth}(0)` with the maps drawn i.i.d.
#[derive(Debug)]
struct IfsSource {
    seed: u64,
    stream: u64,
    ratios: Vec<BigRational>,
    translations: Vec<BigRational>,
    probabilities: Vec<f64>,
    max_level: usize,
}

impl IfsSource {
    fn r_max(&self) -> BigRational {
        self.ratios.iter().map(|r| r.abs()).max().unwrap()
    }

    /// `|point − limit| ≤ r_max^depth · 2R` with the attractor inside `[−R, R]`.
    fn tail(&self, level: usize) -> BigRational {
        let r = self.r_max();
        let t = self.translations.iter().map(|t| t.abs()).max().unwrap();
        let radius = t / (BigRational::one() - &r);
        num_traits::pow(r, level) * radius * BigRational::from_integer(2.into())
    }
}

impl RealSource for IfsSource {
    fn enclosure(&self, level: usize) -> (BigRational, BigRational) {
        let level = level.min(self.max_level);
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        let mut x = BigRational::zero();
        let mut scale = BigRational::one();
        for _ in 0..level {
            let i = pick(&mut rng, &self.probabilities);
            x += &scale * &self.translations[i];
            scale *= &self.ratios[i];
        }
        let tail = self.tail(level);
        (&x - &tail, x + tail)
    }

    fn max_level(&self) -> usize {
        self.max_level
    }

    fn width_bound(&self, level: usize) -> Option<BigRational> {
        Some(self.tail(level) * BigRational::from_integer(2.into()))
    }
}

/// `x^power` for `x` known through another source.
#[derive(Debug)]
struct PowerSource {
    base: Arc<dyn RealSource>,
    power: u32,
}

impl RealSource for PowerSource {
    fn enclosure(&self, level: usize) -> (BigRational, BigRational) {
        let (lo, hi) = self.base.enclosure(level);
        let p = self.power as usize;
        let (a, b) = (num_traits::pow(lo.clone(), p), num_traits::pow(hi.clone(), p));
        if self.power % 2 == 0 && lo.is_negative() && hi.is_positive() {
            (BigRational::zero(), a.max(b))
        } else if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    fn max_level(&self) -> usize {
        self.base.max_level()
    }
}

/// Larger root `(−b + √Δ)/(2a)` enclosed through `⌊√(Δ·4^level)⌋`.
#[derive(Debug)]
struct QuadraticSource {
    a: BigInt,
    b: BigInt,
    disc: BigInt,
    max_level: usize,
}

impl RealSource for QuadraticSource {
    fn enclosure(&self, level: usize) -> (BigRational, BigRational) {
        let level = level.min(self.max_level);
        let scale = BigInt::one() << level;
        let s = (&self.disc << (2 * level)).sqrt();
        let den = BigInt::from(2) * &self.a * &scale;
        let base = -&self.b * &scale;
        let x0 = BigRational::new(&base + &s, den.clone());
        let x1 = BigRational::new(&base + s + 1, den);
        if x0 <= x1 {
            (x0, x1)
        } else {
            (x1, x0)
        }
    }

    fn max_level(&self) -> usize {
        self.max_level
    }

    fn width_bound(&self, level: usize) -> Option<BigRational> {
        Some(BigRational::new(BigInt::one(), BigInt::from(2) * self.a.abs() * (BigInt::one() << level)))
    }
}

fn quadratic_entry(a: i64, b: i64, c: i64, cap: usize) -> Entry {
    // With a < 0 the larger root is (−b − √Δ)/(2a); flip signs so a > 0.
    let (a, b, c) = if a < 0 { (-a, -b, -c) } else { (a, b, c) };
    let (a, b, c) = (BigInt::from(a), BigInt::from(b), BigInt::from(c));
    let disc = &b * &b - BigInt::from(4) * &a * &c;
    let root = disc.sqrt();
    if &root * &root == disc {
        return Entry::Exact(BigRational::new(-b + root, BigInt::from(2) * a));
    }
    Entry::Source(Arc::new(QuadraticSource { a, b, disc, max_level: cap }))
}
