//! Lattices attached to θ, the diagonal flow `a_t`, hitting times of best
//! approximations and the correspondence between the two.
//!
//! Everything here is floating point except the choice of candidates, which
//! comes from the exact engines.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::bestapprox::{enumerate_best_general, error_of, proj_of, BestApprox, Definition, EngineConfig, Theta};
use crate::error::{Error, Result};
use crate::geometry::{in_jt, ApproxSpace, ProductRegion};
use crate::lattice::{lll, lll_exact};
use crate::numerics::{ln_abs, ln_big, round_half_down};

/// Relative slack for closed-region membership in floating point.
const REL_TOL: f64 = 1e-9;
const ABS_TOL: f64 = 1e-12;
/// Largest integer coefficient box searched by `region_primitive_points`.
const MAX_BOX: f64 = 2e7;

/// A full-rank lattice given by the columns of a `d × d` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeBasis {
    columns: DMatrix<f64>,
    covolume: f64,
}

impl LatticeBasis {
    pub fn new(columns: DMatrix<f64>) -> Result<Self> {
        if !columns.is_square() || columns.nrows() == 0 {
            return Err(Error::Dimension(format!("{}x{} basis", columns.nrows(), columns.ncols())));
        }
        let covolume = columns.determinant().abs();
        Ok(LatticeBasis { columns, covolume })
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn covolume(&self) -> f64 {
        self.covolume
    }

    pub fn dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn determinant(&self) -> f64 {
        self.columns.determinant()
    }

    /// The lattice vector with the given integer coefficients.
    pub fn point(&self, coeffs: &[i64]) -> Vec<f64> {
        let c = DVector::from_iterator(coeffs.len(), coeffs.iter().map(|&x| x as f64));
        (&self.columns * c).iter().copied().collect()
    }

    /// Same lattice with an LLL-reduced basis, plus the change of basis
    /// (new column `i` is `Σ_j t[i][j]` old column `j`).
    pub fn reduced(&self) -> Result<(LatticeBasis, Vec<Vec<i64>>)> {
        let d = self.dim();
        let mut cols: Vec<Vec<f64>> = (0..d).map(|j| self.columns.column(j).iter().copied().collect()).collect();
        let t = lll(&mut cols, 0.99).ok_or_else(|| Error::PrecisionExhausted("lattice reduction overflowed".into()))?;
        let t: Vec<Vec<i64>> = t
            .into_iter()
            .map(|row| row.into_iter().map(|v| i64::try_from(v).map_err(|_| Error::PrecisionExhausted("transform beyond i64".into()))).collect())
            .collect::<Result<_>>()?;
        let columns = DMatrix::from_fn(d, d, |i, j| cols[j][i]);
        Ok((LatticeBasis { columns, covolume: self.covolume }, t))
    }
}

/// Basis `[[I_m, θ], [0, I_n]]` of `Λ_θ`.
pub fn lambda_theta(theta: &Theta) -> LatticeBasis {
    let (m, n) = (theta.rows(), theta.cols());
    let d = m + n;
    let values = theta.to_f64();
    let columns = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            1.0
        } else if i < m && j >= m {
            values[i * n + (j - m)]
        } else {
            0.0
        }
    });
    LatticeBasis { columns, covolume: 1.0 }
}

/// Full exponent list `(t_1..t_k, t_{k+1}..t_{k+r})` with the last entry
/// fixed so that `det a_t = 1`.
pub fn full_time(t: &[f64], space: &ApproxSpace) -> Result<Vec<f64>> {
    let (k, r) = (space.k(), space.r());
    if t.len() != k + r - 1 {
        return Err(Error::Dimension(format!("time has {} coordinates, expected {}", t.len(), k + r - 1)));
    }
    let decomp = space.decomp();
    let last = crate::geometry::balance(t, decomp) / decomp.n_parts()[r - 1] as f64;
    let mut full = t.to_vec();
    full.push(last);
    Ok(full)
}

/// Diagonal of `a_t`.
pub fn flow_diagonal(t: &[f64], space: &ApproxSpace) -> Result<Vec<f64>> {
    let full = full_time(t, space)?;
    let k = space.k();
    let mut diag = Vec::with_capacity(space.d());
    for b in 0..space.blocks() {
        let factor = if b < k { full[b].exp() } else { (-full[b]).exp() };
        diag.extend(std::iter::repeat(factor).take(space.block_dim(b)));
    }
    Ok(diag)
}

/// `a_t · basis`.
pub fn flow_apply(t: &[f64], basis: &LatticeBasis, space: &ApproxSpace) -> Result<LatticeBasis> {
    if basis.dim() != space.d() {
        return Err(Error::Dimension(format!("basis of dimension {} in a space with d={}", basis.dim(), space.d())));
    }
    let diag = flow_diagonal(t, space)?;
    let mut columns = basis.columns.clone();
    for (i, f) in diag.iter().enumerate() {
        columns.row_mut(i).scale_mut(*f);
    }
    Ok(LatticeBasis { columns, covolume: basis.covolume })
}

/// Time vector `t ∈ R^{k+r−1}` at which the flow brings a record to the
/// cross-section.
#[derive(Debug, Clone, PartialEq)]
pub struct HitTime {
    pub t: Vec<f64>,
}

/// Hitting time of a non-degenerate record; all norms are normalized.
pub fn hit_time(record: &BestApprox, space: &ApproxSpace) -> Result<HitTime> {
    if record.degenerate {
        return Err(Error::DegenerateRecord(format!("record {} fails the hitting-time conditions", record.index)));
    }
    let (k, r) = (space.k(), space.r());
    let m_log: Vec<f64> = (0..k).map(|i| record.m_block_log_norms[i] + space.m_norms()[i].scale.ln()).collect();
    let n_log: Vec<f64> = (0..r).map(|j| record.n_block_log_norms[j] + space.n_norms()[j].scale.ln()).collect();
    let decomp = space.decomp();
    let mut first: f64 = (1..k).map(|i| decomp.m_parts()[i] as f64 * m_log[i]).sum();
    first += (0..r).map(|j| decomp.n_parts()[j] as f64 * n_log[j]).sum::<f64>();
    let mut t = vec![first / decomp.m_parts()[0] as f64];
    t.extend((1..k).map(|i| -m_log[i]));
    t.extend((0..r - 1).map(|j| n_log[j]));
    Ok(HitTime { t })
}

/// Coefficient vectors of all primitive lattice points in the closed region,
/// both signs included.
pub fn region_primitive_points(basis: &LatticeBasis, region: &ProductRegion, space: &ApproxSpace) -> Result<Vec<Vec<i64>>> {
    let d = space.d();
    if basis.dim() != d || region.radii.len() != space.blocks() {
        return Err(Error::Dimension("basis or region does not match the space".into()));
    }
    // Coordinate bounding box of the region.
    let mut extent = vec![0.0; d];
    for b in 0..space.blocks() {
        let (norm, range) = space.block(b);
        for c in range.clone() {
            let mut e = vec![0.0; range.len()];
            e[c - range.start] = 1.0;
            let unit = norm.scale * norm.spec.norm(&e);
            extent[c] = region.radii[b] / unit * (1.0 + REL_TOL) + ABS_TOL;
        }
    }
    let (reduced, t) = basis.reduced()?;
    let inv = reduced
        .columns
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Dimension("singular basis".into()))?;
    let bounds: Vec<i64> = (0..d)
        .map(|i| {
            let s: f64 = (0..d).map(|l| inv[(i, l)].abs() * extent[l]).sum();
            (s * (1.0 + 1e-9) + 1e-9).floor() as i64
        })
        .collect();
    let size: f64 = bounds.iter().map(|&b| 2.0 * b as f64 + 1.0).product();
    if size > MAX_BOX {
        return Err(Error::BoxTooLarge(format!("{size:.0} coefficient vectors")));
    }
    let inside = |x: &[f64]| {
        space
            .normalized_block_norms(x)
            .iter()
            .zip(&region.radii)
            .all(|(n, r)| *n <= r * (1.0 + REL_TOL) + ABS_TOL)
    };
    let mut out = Vec::new();
    let mut c: Vec<i64> = bounds.iter().map(|b| -b).collect();
    loop {
        if c.iter().any(|&v| v != 0) && gcd_i64(&c) == 1 && inside(&reduced.point(&c)) {
            // Back to coefficients in the caller's basis.
            let orig: Vec<i64> = (0..d).map(|j| (0..d).map(|i| c[i] * t[i][j]).sum()).collect();
            out.push(orig);
        }
        let mut i = d;
        loop {
            if i == 0 {
                out.sort();
                return Ok(out);
            }
            i -= 1;
            if c[i] < bounds[i] {
                c[i] += 1;
                break;
            }
            c[i] = -bounds[i];
        }
    }
}

fn gcd_i64(v: &[i64]) -> i64 {
    v.iter().fold(0i64, |g, &x| g.gcd(&x))
}

/// `A_j(x, γ)`: sends `x` to `sign(x_j)·e_j`, scales every other `e_i` by
/// `s = (γ·|x_j|)^{1/(d−1)}` and has determinant `γ`. `j` is 1-based.
pub fn normalizer_a(j: usize, x: &[f64], gamma: f64) -> Result<DMatrix<f64>> {
    let d = x.len();
    if j == 0 || j > d {
        return Err(Error::Dimension(format!("coordinate {j} outside 1..={d}")));
    }
    let jj = j - 1;
    if x[jj] == 0.0 {
        return Err(Error::ZeroCoordinate(j));
    }
    let s = if d > 1 { (gamma * x[jj].abs()).powf(1.0 / (d as f64 - 1.0)) } else { 1.0 };
    let mut a = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        if i != jj {
            a[(i, i)] = s;
            a[(i, jj)] = -s * x[i] / x[jj];
        }
    }
    a[(jj, jj)] = x[jj].signum() / x[jj];
    if d == 1 {
        a[(0, 0)] = gamma;
    }
    Ok(a)
}

/// The renormalized lattice `λ_j` of a record with its direction, error and
/// residues.
#[derive(Debug, Clone)]
pub struct ThetaJRecord {
    /// LLL-reduced basis of `λ_j`.
    pub lattice: LatticeBasis,
    /// Integer coefficients of `e_j` in `lattice`.
    pub ej_coefficients: Vec<i64>,
    pub proj: Vec<Vec<f64>>,
    pub error: f64,
    /// `(N, (p, q) mod N)` for each modulus.
    pub residues: Vec<(u64, Vec<u64>)>,
}

/// `Θ_j(θ, p, q)` for a record; `j` is 1-based.
pub fn theta_j(theta: &Theta, record: &BestApprox, j: usize, space: &ApproxSpace, moduli: &[u64]) -> Result<ThetaJRecord> {
    if record.degenerate {
        return Err(Error::DegenerateRecord(format!("record {} fails the hitting-time conditions", record.index)));
    }
    let d = space.d();
    let proj = proj_of(theta, &record.p, &record.q, space)?;
    let error = error_of(theta, &record.p, &record.q, space)?;
    let x: Vec<f64> = proj.iter().flatten().copied().collect();
    let a = normalizer_a(j, &x, error)?;
    // Λ_θ(p, q): rows of Λ_θ divided by the user norm of their block. The
    // integer basis is reduced exactly; images are formed coordinatewise in
    // log scale so huge and tiny entries keep full relative precision.
    let m = space.m();
    let logs: Vec<f64> = record.m_block_log_norms.iter().chain(&record.n_block_log_norms).copied().collect();
    let mut row_log = vec![0.0; d];
    for b in 0..space.blocks() {
        for i in space.block(b).1 {
            row_log[i] = -logs[b];
        }
    }
    // Row scaling by `frac` of the full logs, without A.
    let scaled = |u: &[BigInt], frac: f64| -> Vec<f64> {
        let (up, uq) = u.split_at(m);
        let res = theta.residual(up, uq);
        (0..d)
            .map(|i| {
                let (negative, ln) = if i < m {
                    (res[i].is_negative(), ln_abs(&res[i]))
                } else {
                    (uq[i - m].is_negative(), ln_big(&uq[i - m].abs()))
                };
                let v = (ln + frac * row_log[i]).exp();
                if negative {
                    -v
                } else {
                    v
                }
            })
            .collect()
    };
    let embed = |u: &[BigInt]| -> Vec<f64> { (&a * DVector::from_vec(scaled(u, 1.0))).iter().copied().collect() };
    // Reduce along a path of gradually stronger scalings, so every
    // intermediate basis stays within floating-point range.
    let mut basis: Vec<Vec<BigInt>> =
        (0..d).map(|i| (0..d).map(|k| BigInt::from(u8::from(i == k))).collect()).collect();
    let spread = row_log.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let stages = (spread / 40.0).ceil().max(1.0) as usize;
    for stage in 1..=stages {
        let frac = stage as f64 / stages as f64;
        lll_exact(&mut basis, |u| scaled(u, frac), 0.99)?;
    }
    lll_exact(&mut basis, &embed, 0.99)?;
    let lattice = LatticeBasis::new(DMatrix::from_fn(d, d, |i, c| embed(&basis[c])[i]))?;
    // e_j is the image of (p, q); its coefficients solve basis·c = (p, q) exactly.
    let ej_coefficients = solve_integer(&basis, &record.coords())?;
    let residues = moduli
        .iter()
        .map(|&n| {
            let nb = BigInt::from(n);
            let res = record
                .p
                .iter()
                .chain(&record.q)
                .map(|v| v.mod_floor(&nb).to_u64().expect("residue below modulus"))
                .collect();
            (n, res)
        })
        .collect();
    Ok(ThetaJRecord { lattice, ej_coefficients, proj, error, residues })
}

/// Integer `c` with `Σ c_i basis_i = target`, by exact Gaussian elimination.
fn solve_integer(basis: &[Vec<BigInt>], target: &[BigInt]) -> Result<Vec<i64>> {
    let d = basis.len();
    let mut rows: Vec<Vec<BigRational>> = (0..d)
        .map(|i| {
            let mut row: Vec<BigRational> = basis.iter().map(|col| BigRational::from_integer(col[i].clone())).collect();
            row.push(BigRational::from_integer(target[i].clone()));
            row
        })
        .collect();
    for c in 0..d {
        let pivot = (c..d).find(|&r| !rows[r][c].is_zero()).ok_or_else(|| Error::Dimension("singular basis".into()))?;
        rows.swap(c, pivot);
        let lead = rows[c][c].clone();
        for v in rows[c].iter_mut() {
            *v /= &lead;
        }
        for r in 0..d {
            if r != c && !rows[r][c].is_zero() {
                let f = rows[r][c].clone();
                let pivot_row = rows[c].clone();
                for (v, pv) in rows[r].iter_mut().zip(&pivot_row) {
                    *v -= &f * pv;
                }
            }
        }
    }
    rows.iter()
        .map(|row| {
            let v = &row[d];
            if !v.is_integer() {
                return Err(Error::Dimension("target outside the lattice".into()));
            }
            v.to_integer().to_i64().ok_or_else(|| Error::PrecisionExhausted("coefficient beyond i64".into()))
        })
        .collect()
}

impl ThetaJRecord {
    /// Largest distance of the `e_j` coefficients from integers, and whether
    /// the rounded coefficients are coprime.
    pub fn primitivity(&self, j: usize) -> (f64, bool) {
        let d = self.lattice.dim();
        let mut target = DVector::<f64>::zeros(d);
        target[j - 1] = 1.0;
        let sol = self.lattice.columns.clone().lu().solve(&target).expect("nonsingular");
        let dev = sol.iter().map(|v| (v - v.round()).abs()).fold(0.0, f64::max);
        (dev, gcd_i64(&self.ej_coefficients) == 1)
    }
}

/// Outcome of checking hitting times against lattice-point enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceReport {
    /// `#Y_T`: non-degenerate best approximations with `‖q‖ ≤ e^T`.
    pub records: usize,
    /// Hitting times whose critical region holds exactly `±v`.
    pub confirmed: usize,
    /// Other candidates whose region was shown to contain another point.
    pub refuted: usize,
    /// Visits found by enumeration, `N(Λ_θ, T, B)`.
    pub visits: usize,
    pub mismatches: Vec<String>,
}

impl CorrespondenceReport {
    pub fn exact(&self) -> bool {
        self.mismatches.is_empty() && self.visits == self.records && self.confirmed == self.records
    }
}

/// Checks that the hitting times of best approximations with `‖q‖ ≤ e^T`
/// are exactly the times in `J^T` at which `a_t Λ_θ` has a lone primitive
/// pair `±v` in the critical region of `v`.
pub fn verify_correspondence(theta: &Theta, space: &ApproxSpace, definition: Definition, big_t: f64) -> Result<CorrespondenceReport> {
    let space = definition.resolve(space)?;
    let bound = big_t.exp();
    let cfg = EngineConfig::new(Definition::General, bound.max(1.0)).exact();
    let records = enumerate_best_general(theta, &space, &cfg)?;
    let base = lambda_theta(theta);
    let mut report = CorrespondenceReport { records: 0, confirmed: 0, refuted: 0, visits: 0, mismatches: Vec::new() };

    let lone_pair = |p: &[BigInt], q: &[BigInt], t: &[f64]| -> Result<bool> {
        let flowed = flow_apply(t, &base, &space)?;
        let coeffs: Vec<i64> = p.iter().chain(q).map(|v| v.to_i64().expect("small candidate")).collect();
        let image = flowed.point(&coeffs);
        let region = ProductRegion::new(space.normalized_block_norms(&image));
        let points = region_primitive_points(&flowed, &region, &space)?;
        let neg: Vec<i64> = coeffs.iter().map(|v| -v).collect();
        Ok(points.len() == 2 && points.contains(&coeffs) && points.contains(&neg))
    };

    let mut seen: Vec<(Vec<BigInt>, Vec<BigInt>)> = Vec::new();
    for rec in &records {
        seen.push((rec.p.clone(), rec.q.clone()));
        if rec.degenerate || rec.q_norm() > bound * (1.0 + 1e-12) {
            continue;
        }
        let t = hit_time(rec, &space)?.t;
        if !in_jt(&t, big_t + 1e-12, &space) {
            report.mismatches.push(format!("record {:?},{:?} has time {t:?} outside J^T", rec.p, rec.q));
            continue;
        }
        report.records += 1;
        if lone_pair(&rec.p, &rec.q, &t)? {
            report.confirmed += 1;
            report.visits += 1;
        } else {
            report.mismatches.push(format!("record {:?},{:?} has company in its region", rec.p, rec.q));
        }
    }

    // Every other candidate (p*(q), q) in the box must fail the region test.
    for q in q_box(&space, bound) {
        let p = nearest_p(theta, &q);
        if seen.iter().any(|(sp, sq)| (sp == &p && sq == &q) || (neg(sp) == p && neg(sq) == q)) {
            continue;
        }
        let all: Vec<BigInt> = p.iter().chain(&q).cloned().collect();
        if !crate::numerics::is_primitive(&all) {
            continue;
        }
        let rec = BestApprox::from_pq(theta, &space, p.clone(), q.clone(), 0);
        if rec.degenerate || rec.q_norm() > bound * (1.0 + 1e-12) {
            continue;
        }
        let t = hit_time(&rec, &space)?.t;
        if !in_jt(&t, big_t, &space) {
            continue;
        }
        if lone_pair(&p, &q, &t)? {
            report.visits += 1;
            report.mismatches.push(format!("non-best pair {p:?},{q:?} visits the cross-section"));
        } else {
            report.refuted += 1;
        }
    }
    Ok(report)
}

fn neg(v: &[BigInt]) -> Vec<BigInt> {
    v.iter().map(|x| -x).collect()
}

/// Componentwise nearest `p` to `−θq`.
fn nearest_p(theta: &Theta, q: &[BigInt]) -> Vec<BigInt> {
    let zero = vec![BigInt::zero(); theta.rows()];
    theta.residual(&zero, q).iter().map(|y| round_half_down(&-y)).collect()
}

/// One of each `±q` with every normalized n-block norm at most `bound`.
fn q_box(space: &ApproxSpace, bound: f64) -> Vec<Vec<BigInt>> {
    let (k, m, n) = (space.k(), space.m(), space.n());
    let mut limits = vec![0i64; n];
    for j in 0..space.r() {
        let (norm, range) = space.block(k + j);
        for c in range.clone() {
            let mut e = vec![0.0; range.len()];
            e[c - range.start] = 1.0;
            limits[c - m] = (bound / (norm.scale * norm.spec.norm(&e)) * (1.0 + 1e-12)).floor() as i64;
        }
    }
    let mut out = Vec::new();
    let mut q: Vec<i64> = limits.iter().map(|l| -l).collect();
    loop {
        if q.iter().find(|&&v| v != 0).is_some_and(|&v| v > 0) {
            let qf: Vec<f64> = q.iter().map(|&v| v as f64).collect();
            let ok = (0..space.r()).all(|j| {
                let (norm, range) = space.block(k + j);
                norm.scale * norm.spec.norm(&qf[range.start - m..range.end - m]) <= bound * (1.0 + 1e-12)
            });
            if ok {
                out.push(q.iter().map(|&v| BigInt::from(v)).collect());
            }
        }
        let mut i = n;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if q[i] < limits[i] {
                q[i] += 1;
                break;
            }
            q[i] = -limits[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bestapprox::scan_best_n1;
    use crate::geometry::jt_volume;
    use approx::assert_relative_eq;

    #[test]
    fn lambda_theta_examples() {
        let t = Theta::parse("1/3", 1, 1).unwrap();
        let b = lambda_theta(&t);
        assert_relative_eq!(b.columns()[(0, 1)], 1.0 / 3.0);
        assert_relative_eq!(b.determinant(), 1.0);
        let z = Theta::parse("0,0", 1, 2).unwrap();
        assert_eq!(lambda_theta(&z).columns(), &DMatrix::identity(3, 3));
    }

    #[test]
    fn flow_in_one_dimension() {
        let s = ApproxSpace::cuboid(1, 1);
        let b = LatticeBasis::new(DMatrix::identity(2, 2)).unwrap();
        let f = flow_apply(&[1.0], &b, &s).unwrap();
        assert_relative_eq!(f.columns()[(0, 0)], 1f64.exp());
        assert_relative_eq!(f.columns()[(1, 1)], (-1f64).exp());
        assert_eq!(flow_apply(&[0.0], &b, &s).unwrap(), b);
    }

    #[test]
    fn hit_time_scalar_case() {
        let t = Theta::parse("355/113", 1, 1).unwrap();
        let s = ApproxSpace::cuboid(1, 1);
        let r = BestApprox::from_pq(&t, &s, vec![BigInt::from(-22)], vec![BigInt::from(7)], 1);
        assert_relative_eq!(hit_time(&r, &s).unwrap().t[0], 7f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn square_lattice_points() {
        let s = ApproxSpace::cuboid(1, 1);
        let b = LatticeBasis::new(DMatrix::identity(2, 2)).unwrap();
        let pts = region_primitive_points(&b, &ProductRegion::new(vec![1.0, 1.0]), &s).unwrap();
        assert_eq!(pts.len(), 8);
        let none = region_primitive_points(&b, &ProductRegion::new(vec![0.9, 0.9]), &s).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn one_fifth_one_seventh_candidate_is_alone() {
        let t = Theta::parse("1/5,1/7", 2, 1).unwrap();
        let s = ApproxSpace::cuboid(2, 1);
        let pts = region_primitive_points(&lambda_theta(&t), &ProductRegion::new(vec![0.0, 2.0 / 7.0, 5.0]), &s).unwrap();
        assert_eq!(pts, vec![vec![-1, -1, 5], vec![1, 1, -5]]);
    }

    #[test]
    fn normalizer_examples() {
        let a = normalizer_a(2, &[0.0, 1.0], 1.0).unwrap();
        assert_eq!(a, DMatrix::identity(2, 2));
        let x = [0.3, -0.6, 0.2];
        let a = normalizer_a(2, &x, 0.7).unwrap();
        assert_relative_eq!(a.determinant(), 0.7, epsilon = 1e-12);
        let img = &a * DVector::from_column_slice(&x);
        assert_relative_eq!(img[1], -1.0, epsilon = 1e-12);
        assert_relative_eq!(img[0], 0.0, epsilon = 1e-12);
        assert!(matches!(normalizer_a(1, &x[..1].iter().map(|_| 0.0).collect::<Vec<_>>(), 1.0), Err(Error::ZeroCoordinate(1))));
    }

    #[test]
    fn lambda_j_is_unimodular_with_primitive_ej() {
        let t = Theta::parse("13/47", 1, 1).unwrap();
        let s = ApproxSpace::cuboid(1, 1);
        let recs = scan_best_n1(&t, &s, &EngineConfig::new(Definition::Cuboid, 40.0)).unwrap();
        for r in recs.iter().filter(|r| !r.degenerate) {
            let tj = theta_j(&t, r, 2, &s, &[2]).unwrap();
            assert_relative_eq!(tj.lattice.determinant().abs(), 1.0, epsilon = 1e-9);
            let (dev, prim) = tj.primitivity(2);
            assert!(dev < 1e-9 && prim);
            assert_ne!(tj.residues[0].1, vec![0, 0]);
        }
    }

    #[test]
    fn correspondence_small_cases() {
        let s = ApproxSpace::cuboid(1, 1);
        let t = Theta::parse("2/7", 1, 1).unwrap();
        let rep = verify_correspondence(&t, &s, Definition::Cuboid, 3.0).unwrap();
        assert!(rep.exact(), "{rep:?}");
        let t = Theta::parse("1/5,1/7", 2, 1).unwrap();
        let rep = verify_correspondence(&t, &ApproxSpace::cuboid(2, 1), Definition::Cuboid, 2.0).unwrap();
        assert!(rep.exact(), "{rep:?}");
        assert!(jt_volume(2.0, &s) > 0.0);
    }
}
