//! Seeded random matrices (Gaussian, SRHT, scaled Rademacher) and subrank
//! planning for Kronecker-structured sketches.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::thin_qr;
use crate::tensor::{DenseMatrix, FactorMatrix};

/// A reproducible random stream: same `(seed, stream)` gives the same numbers
/// on every run and every logical processor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngSpec {
    pub seed: u64,
    pub stream: u64,
}

/// Who is drawing; part of the stream id so distinct uses never share numbers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum SketchTag {
    Dense = 1,
    Kron = 2,
    SeqKron = 3,
    Reuse = 4,
    Synth = 5,
    Trial = 6,
}

impl RngSpec {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngSpec { seed, stream }
    }

    /// Packs `tag | mode | factor | trial` into the stream id
    /// (8, 12, 12 and 32 bits).
    pub fn tagged(seed: u64, tag: SketchTag, mode: usize, factor: usize, trial: u32) -> Self {
        debug_assert!(mode < 1 << 12 && factor < 1 << 12);
        let stream = ((tag as u64) << 56) | ((mode as u64 & 0xfff) << 44) | ((factor as u64 & 0xfff) << 32) | trial as u64;
        RngSpec { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Distribution of a random sketch matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Distribution {
    Gaussian,
    /// Rademacher diagonal times sampled columns of the scaled Walsh-Hadamard matrix.
    Srht,
    /// Independent ±1/√n entries, `n` being the long dimension.
    Rademacher,
}

impl Distribution {
    pub fn name(&self) -> &'static str {
        match self {
            Distribution::Gaussian => "gaussian",
            Distribution::Srht => "srht",
            Distribution::Rademacher => "rademacher",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Distribution::Gaussian),
            "srht" => Ok(Distribution::Srht),
            "rademacher" => Ok(Distribution::Rademacher),
            _ => Err(Error::InvalidParameter(format!("unknown distribution '{s}'"))),
        }
    }
}

impl std::fmt::Display for Distribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Matrix with i.i.d. standard normal entries, filled column by column.
pub fn gen_gaussian(rows: usize, cols: usize, rng: RngSpec) -> DenseMatrix {
    let mut r = rng.rng();
    let data = (0..rows * cols).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
    DenseMatrix::from_col_major(rows, cols, data).expect("length matches")
}

/// `n x s` SRHT matrix `Φ = D H`: random signs times `s` distinct columns of
/// the `1/√n`-scaled Walsh-Hadamard matrix. Columns are exactly orthonormal.
pub fn gen_srht(n: usize, s: usize, rng: RngSpec) -> Result<DenseMatrix> {
    if !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    if s == 0 || s > n {
        return Err(Error::InvalidParameter(format!("cannot sample {s} of {n} Hadamard columns")));
    }
    let mut r = rng.rng();
    let signs: Vec<f64> = (0..n).map(|_| if r.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let cols = index::sample(&mut r, n, s).into_vec();
    let scale = 1.0 / (n as f64).sqrt();
    Ok(DenseMatrix::from_fn(n, s, |i, j| {
        let parity = (i & cols[j]).count_ones() & 1;
        let h = if parity == 0 { scale } else { -scale };
        signs[i] * h
    }))
}

/// `n x s` matrix of independent ±1/√n entries.
pub fn gen_rademacher(n: usize, s: usize, rng: RngSpec) -> DenseMatrix {
    let mut r = rng.rng();
    let scale = 1.0 / (n as f64).sqrt();
    DenseMatrix::from_fn(n, s, |_, _| if r.random::<bool>() { scale } else { -scale })
}

/// A drawn sketch factor stored as `long x short`; it is applied to a tensor
/// by a transposed TTM.
#[derive(Clone, Debug)]
pub struct SketchFactor {
    pub matrix: DenseMatrix,
    pub distribution: Distribution,
    /// Set when SRHT was requested but the long dimension ruled it out.
    pub fell_back: bool,
}

/// Draws a `long x short` sketch matrix. SRHT falls back to Gaussian when
/// `long` is not a power of two or `short > long`.
pub fn draw_sketch(requested: Distribution, long: usize, short: usize, rng: RngSpec) -> SketchFactor {
    match requested {
        Distribution::Srht if long.is_power_of_two() && short <= long => SketchFactor {
            matrix: gen_srht(long, short, rng).expect("checked preconditions"),
            distribution: Distribution::Srht,
            fell_back: false,
        },
        Distribution::Srht => {
            log::debug!("SRHT needs a power-of-two long dimension (got {long}x{short}); using Gaussian");
            SketchFactor {
                matrix: gen_gaussian(long, short, rng),
                distribution: Distribution::Gaussian,
                fell_back: true,
            }
        }
        Distribution::Gaussian => SketchFactor {
            matrix: gen_gaussian(long, short, rng),
            distribution: Distribution::Gaussian,
            fell_back: false,
        },
        Distribution::Rademacher => SketchFactor {
            matrix: gen_rademacher(long, short, rng),
            distribution: Distribution::Rademacher,
            fell_back: false,
        },
    }
}

/// Haar-distributed `n x k` matrix with orthonormal columns (QR of a Gaussian
/// matrix with the nonnegative-diagonal convention).
pub fn random_orthonormal(n: usize, k: usize, rng: RngSpec) -> FactorMatrix {
    let g = gen_gaussian(n, k, rng);
    thin_qr(&g).expect("n >= k").0
}

/// `d x d` subrank matrix: row `j` lists the sketch sizes used on the other
/// modes when sketching mode `j`; the diagonal is 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubrankMatrix {
    rows: Vec<Vec<usize>>,
}

impl SubrankMatrix {
    pub fn new(rows: Vec<Vec<usize>>) -> Result<Self> {
        let d = rows.len();
        for (j, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::InvalidShape("subrank matrix must be square".into()));
            }
            if row[j] != 1 {
                return Err(Error::Planning(format!("diagonal entry {j} must be 1")));
            }
            if row.contains(&0) {
                return Err(Error::Planning("subranks must be positive".into()));
            }
        }
        Ok(SubrankMatrix { rows })
    }

    pub fn order(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, j: usize, k: usize) -> usize {
        self.rows[j][k]
    }

    pub fn row(&self, j: usize) -> &[usize] {
        &self.rows[j]
    }

    /// Product of row `j` (the diagonal 1 included).
    pub fn row_product(&self, j: usize) -> usize {
        self.rows[j].iter().product()
    }

    /// Checks `∏_{k≠j} s_{j,k} ≥ ℓ_j` and `s_{j,k} ≤ n_k`.
    pub fn validate(&self, ell: &[usize], dims: &[usize]) -> Result<()> {
        let d = self.order();
        if ell.len() != d || dims.len() != d {
            return Err(Error::DimensionMismatch("subrank matrix order differs from tensor order".into()));
        }
        for j in 0..d {
            if self.row_product(j) < ell[j] {
                return Err(Error::Planning(format!(
                    "row {j} product {} is below {}",
                    self.row_product(j),
                    ell[j]
                )));
            }
            for k in 0..d {
                if k != j && self.rows[j][k] > dims[k] {
                    return Err(Error::Planning(format!(
                        "subrank s[{j}][{k}] = {} exceeds mode size {}",
                        self.rows[j][k], dims[k]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One subrank per mode, shared by every mode sketch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubrankVector {
    pub s: Vec<usize>,
}

impl SubrankVector {
    /// Product of all subranks except mode `j`'s.
    pub fn product_excluding(&self, j: usize) -> usize {
        self.s.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, &v)| v).product()
    }

    /// Checks `∏_{k≠j} s_k ≥ ℓ_j` and `s_k ≤ n_k`.
    pub fn validate(&self, ell: &[usize], dims: &[usize]) -> Result<()> {
        if ell.len() != self.s.len() || dims.len() != self.s.len() {
            return Err(Error::DimensionMismatch("subrank vector length differs from tensor order".into()));
        }
        for j in 0..self.s.len() {
            if self.s[j] == 0 || self.s[j] > dims[j] {
                return Err(Error::Planning(format!(
                    "subrank {} for mode {j} outside 1..={}",
                    self.s[j], dims[j]
                )));
            }
            if self.product_excluding(j) < ell[j] {
                return Err(Error::Planning(format!(
                    "subranks off mode {j} multiply to {} < {}",
                    self.product_excluding(j),
                    ell[j]
                )));
            }
        }
        Ok(())
    }
}

fn sketch_sizes(ranks: &[usize], p: usize, dims: &[usize]) -> Result<Vec<usize>> {
    if ranks.len() != dims.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} ranks for a {}-way tensor",
            ranks.len(),
            dims.len()
        )));
    }
    if dims.len() < 2 {
        return Err(Error::Planning("Kronecker sketches need at least two modes".into()));
    }
    ranks
        .iter()
        .zip(dims)
        .enumerate()
        .map(|(j, (&r, &n))| {
            if r == 0 || r + p > n {
                Err(Error::RankInfeasible {
                    mode: j,
                    rank: r + p,
                    size: n,
                })
            } else {
                Ok(r + p)
            }
        })
        .collect()
}

/// Enumerates ordered factorizations of `value` into `caps.len()` factors with
/// `min_factor <= f_i <= caps[i]`, calling `visit` on each.
fn for_each_factorization(value: usize, caps: &[usize], min_factor: usize, buf: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
    if caps.is_empty() {
        if value == 1 {
            visit(buf);
        }
        return;
    }
    if caps.len() == 1 {
        if value >= min_factor && value <= caps[0] {
            buf.push(value);
            visit(buf);
            buf.pop();
        }
        return;
    }
    let mut f = min_factor.max(1);
    while f <= caps[0] && f <= value {
        if value.is_multiple_of(f) {
            buf.push(f);
            for_each_factorization(value / f, &caps[1..], min_factor, buf, visit);
            buf.pop();
        }
        f += 1;
    }
}

/// Picks the most balanced ordered factorization (smallest max/min), ties
/// going to the lexicographically greatest tuple.
fn best_factorization(value: usize, caps: &[usize], min_factor: usize) -> Option<Vec<usize>> {
    let mut best: Option<Vec<usize>> = None;
    let mut buf = Vec::with_capacity(caps.len());
    for_each_factorization(value, caps, min_factor, &mut buf, &mut |f| {
        let better = match &best {
            None => true,
            Some(b) => {
                let (fmax, fmin) = (*f.iter().max().unwrap() as u128, *f.iter().min().unwrap() as u128);
                let (bmax, bmin) = (*b.iter().max().unwrap() as u128, *b.iter().min().unwrap() as u128);
                let lhs = fmax * bmin;
                let rhs = bmax * fmin;
                lhs < rhs || (lhs == rhs && f > b.as_slice())
            }
        };
        if better {
            best = Some(f.to_vec());
        }
    });
    best
}

/// Plans a subrank matrix. For each mode `j` the sketch size is raised from
/// `r_j + p` by at most `max_adjust` until it splits into `d − 1` factors
/// (each ≥ 2 once the size reaches `2^{d−1}`, each at most the matching mode
/// size). Returns the plan and the adjusted sketch sizes.
pub fn plan_subrank_matrix(dims: &[usize], ranks: &[usize], p: usize, max_adjust: usize) -> Result<(SubrankMatrix, Vec<usize>)> {
    let ell = sketch_sizes(ranks, p, dims)?;
    let d = dims.len();
    let mut rows = Vec::with_capacity(d);
    let mut adjusted = Vec::with_capacity(d);
    for j in 0..d {
        let caps: Vec<usize> = (0..d).filter(|&k| k != j).map(|k| dims[k]).collect();
        let mut found = None;
        for target in ell[j]..=ell[j] + max_adjust {
            if target > dims[j] {
                break;
            }
            let min_factor = if target >= 1usize << (d - 1).min(63) { 2 } else { 1 };
            if let Some(f) = best_factorization(target, &caps, min_factor) {
                found = Some((target, f));
                break;
            }
        }
        let (target, factors) = found.ok_or_else(|| {
            Error::Planning(format!(
                "no {}-factor split of mode {j}'s sketch size within {}..={}",
                d - 1,
                ell[j],
                ell[j] + max_adjust
            ))
        })?;
        if target != ell[j] {
            log::debug!("mode {j}: sketch size raised from {} to {target}", ell[j]);
        }
        let mut row = vec![1usize; d];
        let mut it = factors.into_iter();
        for (k, slot) in row.iter_mut().enumerate() {
            if k != j {
                *slot = it.next().expect("d - 1 factors");
            }
        }
        rows.push(row);
        adjusted.push(target);
    }
    let plan = SubrankMatrix::new(rows)?;
    plan.validate(&adjusted, dims)?;
    Ok((plan, adjusted))
}

/// Plans the shared subrank vector: `s_i` is the smallest integer with
/// `(s_i ℓ_i)^{d−1} ≥ ∏ ℓ`, i.e. `⌈(∏ℓ)^{1/(d−1)} / ℓ_i⌉` in exact arithmetic.
pub fn plan_subrank_vector(ranks: &[usize], p: usize, dims: &[usize]) -> Result<SubrankVector> {
    let ell = sketch_sizes(ranks, p, dims)?;
    let d = dims.len();
    let total: u128 = ell.iter().map(|&l| l as u128).product();
    let mut s = Vec::with_capacity(d);
    for (i, &l) in ell.iter().enumerate() {
        let mut si = 1usize;
        while !power_at_least((si * l) as u128, (d - 1) as u32, total) {
            si += 1;
        }
        if si > dims[i] {
            return Err(Error::Planning(format!(
                "subrank {si} for mode {i} exceeds its size {}; use a subrank matrix for skewed shapes",
                dims[i]
            )));
        }
        s.push(si);
    }
    let v = SubrankVector { s };
    v.validate(&ell, dims)?;
    for j in 0..d {
        if v.product_excluding(j) > dims[j] {
            return Err(Error::Planning(format!(
                "mode {j} sketch has {} columns but only {} rows",
                v.product_excluding(j),
                dims[j]
            )));
        }
    }
    Ok(v)
}

fn power_at_least(base: u128, exp: u32, target: u128) -> bool {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.saturating_mul(base);
        if acc >= target {
            return true;
        }
    }
    acc >= target
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_is_deterministic_per_stream() {
        let a = gen_gaussian(5, 4, RngSpec::new(1, 2));
        let b = gen_gaussian(5, 4, RngSpec::new(1, 2));
        let c = gen_gaussian(5, 4, RngSpec::new(1, 3));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn gaussian_moments() {
        let m = gen_gaussian(1000, 100, RngSpec::new(42, 0));
        let n = m.data().len() as f64;
        let mean = m.data().iter().sum::<f64>() / n;
        let var = m.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn srht_small_case() {
        let phi = gen_srht(4, 2, RngSpec::new(3, 0)).unwrap();
        assert!(phi.data().iter().all(|&v| v == 0.5 || v == -0.5));
        assert_eq!(phi.t_matmul(&phi).unwrap(), DenseMatrix::identity(2));
    }

    #[test]
    fn srht_full_sampling_is_orthogonal() {
        let phi = gen_srht(16, 16, RngSpec::new(9, 1)).unwrap();
        assert!(phi.orthonormality_residual() <= 1e-14);
        assert!(phi.gram().sub(&DenseMatrix::identity(16)).unwrap().frobenius_norm() <= 1e-14);
    }

    #[test]
    fn srht_kronecker_is_orthonormal() {
        let a = gen_srht(8, 3, RngSpec::new(1, 0)).unwrap();
        let b = gen_srht(4, 2, RngSpec::new(1, 1)).unwrap();
        assert!(a.kron(&b).orthonormality_residual() <= 1e-12);
    }

    #[test]
    fn srht_rejects_bad_sizes() {
        assert!(matches!(gen_srht(6, 2, RngSpec::new(0, 0)), Err(Error::NotPowerOfTwo(6))));
        assert!(gen_srht(4, 5, RngSpec::new(0, 0)).is_err());
        let f = draw_sketch(Distribution::Srht, 6, 2, RngSpec::new(0, 0));
        assert!(f.fell_back);
        assert_eq!(f.distribution, Distribution::Gaussian);
    }

    #[test]
    fn tagged_streams_are_distinct() {
        let a = RngSpec::tagged(5, SketchTag::Kron, 1, 2, 0);
        let b = RngSpec::tagged(5, SketchTag::Kron, 2, 1, 0);
        let c = RngSpec::tagged(5, SketchTag::Reuse, 1, 2, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, RngSpec::tagged(5, SketchTag::Kron, 1, 2, 0));
    }

    #[test]
    fn published_subrank_matrix_satisfies_contract() {
        let plan = SubrankMatrix::new(vec![vec![1, 39, 13], vec![30, 1, 17], vec![6, 61, 1]]).unwrap();
        let ell = [507, 510, 366];
        plan.validate(&ell, &[3072, 3072, 3072]).unwrap();
        for (j, &l) in ell.iter().enumerate() {
            assert_eq!(plan.row_product(j), l);
        }
    }

    #[test]
    fn planner_reproduces_balanced_rows() {
        let (plan, adj) = plan_subrank_matrix(&[3072; 3], &[502, 505, 361], 5, 16).unwrap();
        assert_eq!(adj, vec![507, 510, 366]);
        assert_eq!(plan.row(0), &[1, 39, 13]);
        assert_eq!(plan.row(1), &[30, 1, 17]);
        assert_eq!(plan.row(2), &[61, 6, 1]);
    }

    #[test]
    fn planner_small_cases() {
        let (plan, adj) = plan_subrank_matrix(&[100; 3], &[10; 3], 5, 16).unwrap();
        assert_eq!(adj, vec![15; 3]);
        for j in 0..3 {
            let mut f: Vec<usize> = (0..3).filter(|&k| k != j).map(|k| plan.get(j, k)).collect();
            f.sort();
            assert_eq!(f, vec![3, 5]);
        }
        let (plan, adj) = plan_subrank_matrix(&[40, 30], &[7, 9], 2, 0).unwrap();
        assert_eq!(adj, vec![9, 11]);
        assert_eq!(plan.row(0), &[1, 9]);
        assert_eq!(plan.row(1), &[11, 1]);
        // a prime sketch size is raised to the next splittable value
        let (plan, adj) = plan_subrank_matrix(&[50; 3], &[12; 3], 5, 4).unwrap();
        assert_eq!(adj, vec![18; 3]);
        assert_eq!(plan.row(0), &[1, 6, 3]);
    }

    #[test]
    fn planner_errors() {
        assert!(matches!(
            plan_subrank_matrix(&[10, 10, 10], &[8, 8, 8], 5, 2),
            Err(Error::RankInfeasible { .. })
        ));
        // 13 cannot split into two factors >= 2 and no adjustment allowed
        assert!(matches!(plan_subrank_matrix(&[50; 3], &[8; 3], 5, 0), Err(Error::Planning(_))));
        // caps: factors must not exceed the other mode sizes
        assert!(plan_subrank_matrix(&[100, 3, 3], &[20, 1, 1], 0, 0).is_err());
    }

    #[test]
    fn subrank_vector_cases() {
        let v = plan_subrank_vector(&[10, 10, 10], 5, &[100, 100, 100]).unwrap();
        assert_eq!(v.s, vec![4, 4, 4]);
        assert_eq!(v.product_excluding(0), 16);
        let v = plan_subrank_vector(&[6, 9], 0, &[20, 20]).unwrap();
        assert_eq!(v.s, vec![9, 6]);
        let v = plan_subrank_vector(&[1, 1, 1], 0, &[4, 4, 4]).unwrap();
        assert_eq!(v.s, vec![1, 1, 1]);
        assert!(matches!(plan_subrank_vector(&[30, 1], 0, &[40, 10]), Err(Error::Planning(_))));
    }
}
