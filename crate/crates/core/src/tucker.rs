//! Deterministic and randomized Tucker decompositions.

use crate::dimtree::{all_mode_sketches, naive_mode_sketches, FlopCounter, Phase};
use crate::error::{Error, Result};
use crate::linalg::{gram_leading_vectors, thin_qr, thin_svd};
use crate::sketch::{draw_sketch, plan_subrank_matrix, plan_subrank_vector, Distribution, RngSpec, SketchTag, SubrankMatrix, SubrankVector};
use crate::tensor::{mode_gram, multi_ttm, unfold, unfolding_times, DenseMatrix, DenseTensor, FactorMatrix, ModeProduct};

/// Decomposition algorithm identifiers, as used on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Hosvd,
    Sthosvd,
    Rhosvd,
    Rsthosvd,
    RhosvdKron,
    RsthosvdKron,
    RhkronRe,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Hosvd,
        Algorithm::Sthosvd,
        Algorithm::Rhosvd,
        Algorithm::Rsthosvd,
        Algorithm::RhosvdKron,
        Algorithm::RsthosvdKron,
        Algorithm::RhkronRe,
    ];

    pub const RANDOMIZED: [Algorithm; 5] = [
        Algorithm::Rhosvd,
        Algorithm::Rsthosvd,
        Algorithm::RhosvdKron,
        Algorithm::RsthosvdKron,
        Algorithm::RhkronRe,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Hosvd => "hosvd",
            Algorithm::Sthosvd => "sthosvd",
            Algorithm::Rhosvd => "rhosvd",
            Algorithm::Rsthosvd => "rsthosvd",
            Algorithm::RhosvdKron => "rhosvd-kron",
            Algorithm::RsthosvdKron => "rsthosvd-kron",
            Algorithm::RhkronRe => "rhkron-re",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown algorithm '{s}'")))
    }

    pub fn is_randomized(&self) -> bool {
        !matches!(self, Algorithm::Hosvd | Algorithm::Sthosvd)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Subrank plan used by a Kronecker-sketch algorithm.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SubrankPlan {
    Matrix(SubrankMatrix),
    Vector(SubrankVector),
}

/// How a decomposition was produced.
#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub algorithm: Algorithm,
    pub ranks: Vec<usize>,
    pub oversample: Option<usize>,
    pub seed: Option<u64>,
    pub distribution: Option<Distribution>,
    /// Sketch size per mode after any planner adjustment.
    pub sketch_sizes: Vec<usize>,
    pub subranks: Option<SubrankPlan>,
    /// Human-readable notes on SRHT draws replaced by Gaussian ones.
    pub fallbacks: Vec<String>,
}

impl Provenance {
    fn deterministic(algorithm: Algorithm, ranks: &[usize]) -> Self {
        Provenance {
            algorithm,
            ranks: ranks.to_vec(),
            oversample: None,
            seed: None,
            distribution: None,
            sketch_sizes: Vec::new(),
            subranks: None,
            fallbacks: Vec::new(),
        }
    }
}

/// Rank-ℓ intermediate kept for error analysis: the sketched bases `Û_j` and
/// the core `Ĝ` before truncation.
#[derive(Clone, Debug)]
pub struct Intermediate {
    pub bases: Vec<FactorMatrix>,
    pub core: DenseTensor,
}

/// Core tensor, one factor per mode, and how they were obtained.
#[derive(Clone, Debug)]
pub struct TuckerDecomposition {
    pub core: DenseTensor,
    pub factors: Vec<FactorMatrix>,
    pub provenance: Provenance,
    pub flops: FlopCounter,
    pub intermediate: Option<Intermediate>,
}

impl TuckerDecomposition {
    /// Builds a decomposition from parts, checking that shapes agree.
    pub fn from_parts(core: DenseTensor, factors: Vec<FactorMatrix>, provenance: Provenance) -> Result<Self> {
        if factors.len() != core.order() {
            return Err(Error::DimensionMismatch(format!(
                "{} factors for a {}-way core",
                factors.len(),
                core.order()
            )));
        }
        for (j, f) in factors.iter().enumerate() {
            if f.cols() != core.dims()[j] {
                return Err(Error::DimensionMismatch(format!(
                    "factor {j} has {} columns but core mode {j} has size {}",
                    f.cols(),
                    core.dims()[j]
                )));
            }
        }
        Ok(TuckerDecomposition {
            core,
            factors,
            provenance,
            flops: FlopCounter::new(),
            intermediate: None,
        })
    }

    /// Dimensions of the tensor this decomposition approximates.
    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.rows()).collect()
    }

    pub fn ranks(&self) -> &[usize] {
        self.core.dims()
    }
}

/// Options shared by the randomized algorithms.
#[derive(Clone, Debug)]
pub struct RandomizedOptions {
    pub oversample: usize,
    /// `None` picks SRHT when every mode size is a power of two, Gaussian otherwise.
    pub distribution: Option<Distribution>,
    pub seed: u64,
    /// Processing order for the sequentially truncated variants; default `0..d`.
    pub mode_order: Option<Vec<usize>>,
    /// When false, the rank-ℓ decomposition is returned without core truncation.
    pub truncate: bool,
    pub keep_intermediate: bool,
    pub use_dimtree: bool,
    /// How far the subrank-matrix planner may raise a sketch size.
    pub max_adjust: usize,
}

impl Default for RandomizedOptions {
    fn default() -> Self {
        RandomizedOptions {
            oversample: 5,
            distribution: None,
            seed: 0,
            mode_order: None,
            truncate: true,
            keep_intermediate: false,
            use_dimtree: true,
            max_adjust: 16,
        }
    }
}

impl RandomizedOptions {
    pub fn with_seed(seed: u64) -> Self {
        RandomizedOptions {
            seed,
            ..Self::default()
        }
    }

    pub(crate) fn resolve_distribution(&self, dims: &[usize]) -> Distribution {
        self.distribution.unwrap_or(if dims.iter().all(|n| n.is_power_of_two()) {
            Distribution::Srht
        } else {
            Distribution::Gaussian
        })
    }
}

pub(crate) fn check_ranks(dims: &[usize], ranks: &[usize]) -> Result<()> {
    if ranks.len() != dims.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} ranks for a {}-way tensor",
            ranks.len(),
            dims.len()
        )));
    }
    for (j, (&r, &n)) in ranks.iter().zip(dims).enumerate() {
        if r == 0 || r > n {
            return Err(Error::RankInfeasible {
                mode: j,
                rank: r,
                size: n,
            });
        }
    }
    Ok(())
}

pub(crate) fn resolve_order(d: usize, order: Option<&[usize]>) -> Result<Vec<usize>> {
    match order {
        None => Ok((0..d).collect()),
        Some(o) => {
            let mut seen = vec![false; d];
            if o.len() != d {
                return Err(Error::InvalidParameter(format!("mode order {o:?} is not a permutation of 0..{d}")));
            }
            for &m in o {
                if m >= d {
                    return Err(Error::ModeOutOfRange { mode: m, order: d });
                }
                if seen[m] {
                    return Err(Error::DuplicateMode(m));
                }
                seen[m] = true;
            }
            Ok(o.to_vec())
        }
    }
}

/// Leading `k` left singular vectors of a mode unfolding via its Gram matrix.
fn mode_leading_vectors(t: &DenseTensor, mode: usize, k: usize, counter: &mut FlopCounter) -> Result<FactorMatrix> {
    let g = mode_gram(t, mode)?;
    counter.charge_gram(t.dims()[mode], t.size_excluding(mode));
    Ok(gram_leading_vectors(&g, k)?.0)
}

/// Leading `k` left singular vectors via a direct SVD, used on small cores.
fn direct_leading_vectors(m: &DenseMatrix, k: usize) -> Result<FactorMatrix> {
    if k > m.rows() {
        return Err(Error::InvalidParameter(format!("{k} vectors requested from {} rows", m.rows())));
    }
    if k <= m.cols() {
        let (u, _, _) = thin_svd(m)?;
        Ok(FactorMatrix::trusted(u.columns(0, k)))
    } else {
        Ok(gram_leading_vectors(&m.gram(), k)?.0)
    }
}

/// Higher-order SVD: each factor from the full tensor's unfolding.
pub fn hosvd(x: &DenseTensor, ranks: &[usize]) -> Result<TuckerDecomposition> {
    check_ranks(x.dims(), ranks)?;
    let mut flops = FlopCounter::new();
    let mut factors = Vec::with_capacity(x.order());
    for (j, &r) in ranks.iter().enumerate() {
        factors.push(mode_leading_vectors(x, j, r, &mut flops)?);
    }
    let products: Vec<ModeProduct<'_>> = factors.iter().enumerate().map(|(j, f)| ModeProduct::transposed(j, f.matrix())).collect();
    let core = flops.multi_ttm(Phase::CoreFormation, x, &products)?;
    let mut t = TuckerDecomposition::from_parts(core, factors, Provenance::deterministic(Algorithm::Hosvd, ranks))?;
    t.flops = flops;
    Ok(t)
}

/// Sequentially truncated HOSVD in the given mode order (default `0..d`).
pub fn sthosvd(x: &DenseTensor, ranks: &[usize], mode_order: Option<&[usize]>) -> Result<TuckerDecomposition> {
    check_ranks(x.dims(), ranks)?;
    let order = resolve_order(x.order(), mode_order)?;
    let mut flops = FlopCounter::new();
    let mut factors: Vec<Option<FactorMatrix>> = vec![None; x.order()];
    let mut core = x.clone();
    for &j in &order {
        let u = mode_leading_vectors(&core, j, ranks[j], &mut flops)?;
        core = flops.ttm(Phase::CoreFormation, &core, u.matrix(), j, true)?;
        factors[j] = Some(u);
    }
    let factors = factors.into_iter().map(|f| f.expect("every mode processed")).collect();
    let mut t = TuckerDecomposition::from_parts(core, factors, Provenance::deterministic(Algorithm::Sthosvd, ranks))?;
    t.flops = flops;
    Ok(t)
}

/// Orthonormal basis for the range of `M Ω`.
pub fn rand_range_finder(m: &DenseMatrix, omega: &DenseMatrix) -> Result<FactorMatrix> {
    if omega.rows() != m.cols() {
        return Err(Error::DimensionMismatch(format!(
            "sketch has {} rows but the matrix has {} columns",
            omega.rows(),
            m.cols()
        )));
    }
    if omega.cols() > m.rows() {
        return Err(Error::DimensionMismatch(format!(
            "sketch width {} exceeds the matrix row count {}",
            omega.cols(),
            m.rows()
        )));
    }
    Ok(thin_qr(&m.matmul(omega)?)?.0)
}

/// Randomized SVD: range finder, projection `B = QᵀM`, SVD of `B`, truncation to rank `r`.
pub fn rand_svd(m: &DenseMatrix, r: usize, omega: &DenseMatrix) -> Result<(DenseMatrix, Vec<f64>, DenseMatrix)> {
    if r == 0 || r > omega.cols() {
        return Err(Error::InvalidParameter(format!(
            "rank {r} exceeds the sketch width {}",
            omega.cols()
        )));
    }
    let q = rand_range_finder(m, omega)?;
    let b = q.matrix().t_matmul(m)?;
    let (ub, s, v) = thin_svd(&b)?;
    let u = q.matrix().matmul(&ub.columns(0, r))?;
    Ok((u, s[..r].to_vec(), v.columns(0, r)))
}

/// Deterministic STHOSVD of a small core: returns `G` and the `V_j`.
pub fn truncate_core(g_hat: &DenseTensor, ranks: &[usize]) -> Result<(DenseTensor, Vec<FactorMatrix>)> {
    truncate_core_counted(g_hat, ranks, &mut FlopCounter::new())
}

pub(crate) fn truncate_core_counted(g_hat: &DenseTensor, ranks: &[usize], flops: &mut FlopCounter) -> Result<(DenseTensor, Vec<FactorMatrix>)> {
    check_ranks(g_hat.dims(), ranks)?;
    let mut core = g_hat.clone();
    let mut vs = Vec::with_capacity(ranks.len());
    for (j, &r) in ranks.iter().enumerate() {
        let v = direct_leading_vectors(&unfold(&core, j)?, r)?;
        core = flops.ttm(Phase::Truncation, &core, v.matrix(), j, true)?;
        vs.push(v);
    }
    Ok((core, vs))
}

/// Shared tail of every randomized algorithm: form `Ĝ` if needed, truncate,
/// and combine `U_j = Û_j V_j`.
fn finish(
    x: &DenseTensor,
    bases: Vec<FactorMatrix>,
    g_hat: Option<DenseTensor>,
    ranks: &[usize],
    opts: &RandomizedOptions,
    provenance: Provenance,
    mut flops: FlopCounter,
) -> Result<TuckerDecomposition> {
    let g_hat = match g_hat {
        Some(g) => g,
        None => {
            let products: Vec<ModeProduct<'_>> = bases.iter().enumerate().map(|(j, u)| ModeProduct::transposed(j, u.matrix())).collect();
            flops.multi_ttm(Phase::CoreFormation, x, &products)?
        }
    };
    finish_with_core(bases, g_hat, ranks, opts, provenance, flops)
}

pub(crate) fn finish_with_core(
    bases: Vec<FactorMatrix>,
    g_hat: DenseTensor,
    ranks: &[usize],
    opts: &RandomizedOptions,
    provenance: Provenance,
    mut flops: FlopCounter,
) -> Result<TuckerDecomposition> {
    let intermediate = opts.keep_intermediate.then(|| Intermediate {
        bases: bases.clone(),
        core: g_hat.clone(),
    });
    let (core, factors) = if opts.truncate {
        let (core, vs) = truncate_core_counted(&g_hat, ranks, &mut flops)?;
        let mut factors = Vec::with_capacity(bases.len());
        for (u, v) in bases.iter().zip(&vs) {
            flops.charge_matmul(Phase::Truncation, u.rows(), u.cols(), v.cols());
            factors.push(FactorMatrix::trusted(u.matrix().matmul(v.matrix())?));
        }
        (core, factors)
    } else {
        (g_hat, bases)
    };
    let mut t = TuckerDecomposition::from_parts(core, factors, provenance)?;
    t.flops = flops;
    t.intermediate = intermediate;
    Ok(t)
}

pub(crate) fn randomized_provenance(algorithm: Algorithm, ranks: &[usize], opts: &RandomizedOptions, dist: Distribution) -> Provenance {
    Provenance {
        algorithm,
        ranks: ranks.to_vec(),
        oversample: Some(opts.oversample),
        seed: Some(opts.seed),
        distribution: Some(dist),
        sketch_sizes: Vec::new(),
        subranks: None,
        fallbacks: Vec::new(),
    }
}

fn sketch_sizes_for(dims: &[usize], ranks: &[usize], p: usize) -> Result<Vec<usize>> {
    check_ranks(dims, ranks)?;
    ranks
        .iter()
        .zip(dims)
        .enumerate()
        .map(|(j, (&r, &n))| {
            if r + p > n {
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

fn note_fallback(prov: &mut Provenance, what: String) {
    log::info!("SRHT unavailable for {what}; drew Gaussian instead");
    prov.fallbacks.push(what);
}

/// Randomized HOSVD: a dense `n_j⊘ x ℓ_j` sketch per mode of the full tensor.
pub fn rhosvd(x: &DenseTensor, ranks: &[usize], opts: &RandomizedOptions) -> Result<TuckerDecomposition> {
    let ell = sketch_sizes_for(x.dims(), ranks, opts.oversample)?;
    let dist = opts.resolve_distribution(x.dims());
    let mut prov = randomized_provenance(Algorithm::Rhosvd, ranks, opts, dist);
    let mut flops = FlopCounter::new();
    let mut bases = Vec::with_capacity(x.order());
    for j in 0..x.order() {
        let long = x.size_excluding(j);
        let f = draw_sketch(dist, long, ell[j], RngSpec::tagged(opts.seed, SketchTag::Dense, j, 0, 0));
        if f.fell_back {
            note_fallback(&mut prov, format!("mode {j} ({long}x{})", ell[j]));
        }
        let y = unfolding_times(x, j, &f.matrix)?;
        flops.charge_matmul(Phase::Sketch, x.dims()[j], long, ell[j]);
        flops.charge_qr(y.rows(), y.cols());
        bases.push(thin_qr(&y)?.0);
    }
    prov.sketch_sizes = ell;
    finish(x, bases, None, ranks, opts, prov, flops)
}

/// Randomized STHOSVD: each mode is sketched on the partially truncated core.
pub fn rsthosvd(x: &DenseTensor, ranks: &[usize], opts: &RandomizedOptions) -> Result<TuckerDecomposition> {
    let ell = sketch_sizes_for(x.dims(), ranks, opts.oversample)?;
    let order = resolve_order(x.order(), opts.mode_order.as_deref())?;
    let dist = opts.resolve_distribution(x.dims());
    let mut prov = randomized_provenance(Algorithm::Rsthosvd, ranks, opts, dist);
    let mut flops = FlopCounter::new();
    let mut bases: Vec<Option<FactorMatrix>> = vec![None; x.order()];
    let mut g = x.clone();
    for &j in &order {
        let long = g.size_excluding(j);
        let f = draw_sketch(dist, long, ell[j], RngSpec::tagged(opts.seed, SketchTag::Dense, j, 1, 0));
        if f.fell_back {
            note_fallback(&mut prov, format!("mode {j} ({long}x{})", ell[j]));
        }
        let y = unfolding_times(&g, j, &f.matrix)?;
        flops.charge_matmul(Phase::Sketch, g.dims()[j], long, ell[j]);
        flops.charge_qr(y.rows(), y.cols());
        let q = thin_qr(&y)?.0;
        g = flops.ttm(Phase::CoreFormation, &g, q.matrix(), j, true)?;
        bases[j] = Some(q);
    }
    prov.sketch_sizes = ell;
    let bases = bases.into_iter().map(|b| b.expect("every mode processed")).collect();
    finish(x, bases, Some(g), ranks, opts, prov, flops)
}

/// Draws the `d − 1` Kronecker factors for row `j` of a subrank matrix.
/// `long[k]` is the current size of mode `k`.
pub(crate) fn draw_row_factors(
    plan: &SubrankMatrix,
    j: usize,
    long: &[usize],
    dist: Distribution,
    seed: u64,
    tag: SketchTag,
    prov: &mut Provenance,
) -> Vec<Option<DenseMatrix>> {
    (0..long.len())
        .map(|k| {
            if k == j {
                return None;
            }
            let s = plan.get(j, k);
            let f = draw_sketch(dist, long[k], s, RngSpec::tagged(seed, tag, j, k, 0));
            if f.fell_back {
                note_fallback(prov, format!("mode {j} factor {k} ({}x{s})", long[k]));
            }
            Some(f.matrix)
        })
        .collect()
}

/// Draws the shared per-mode factors of the reuse variant.
pub(crate) fn draw_reuse_factors(s: &SubrankVector, dims: &[usize], dist: Distribution, seed: u64, prov: &mut Provenance) -> Vec<DenseMatrix> {
    (0..dims.len())
        .map(|k| {
            let f = draw_sketch(dist, dims[k], s.s[k], RngSpec::tagged(seed, SketchTag::Reuse, k, 0, 0));
            if f.fell_back {
                note_fallback(prov, format!("factor {k} ({}x{})", dims[k], s.s[k]));
            }
            f.matrix
        })
        .collect()
}

/// Randomized HOSVD with a Kronecker-structured sketch per mode.
pub fn rhosvd_kron(x: &DenseTensor, ranks: &[usize], opts: &RandomizedOptions) -> Result<TuckerDecomposition> {
    check_ranks(x.dims(), ranks)?;
    let (plan, ell) = plan_subrank_matrix(x.dims(), ranks, opts.oversample, opts.max_adjust)?;
    let dist = opts.resolve_distribution(x.dims());
    let mut prov = randomized_provenance(Algorithm::RhosvdKron, ranks, opts, dist);
    let mut flops = FlopCounter::new();
    let mut bases = Vec::with_capacity(x.order());
    for j in 0..x.order() {
        let phis = draw_row_factors(&plan, j, x.dims(), dist, opts.seed, SketchTag::Kron, &mut prov);
        let products: Vec<ModeProduct<'_>> = phis.iter().enumerate().filter_map(|(k, p)| p.as_ref().map(|m| ModeProduct::transposed(k, m))).collect();
        let y = flops.multi_ttm(Phase::Sketch, x, &products)?;
        let yj = unfold(&y, j)?;
        flops.charge_qr(yj.rows(), yj.cols());
        bases.push(thin_qr(&yj)?.0);
    }
    prov.sketch_sizes = ell;
    prov.subranks = Some(SubrankPlan::Matrix(plan));
    finish(x, bases, None, ranks, opts, prov, flops)
}

/// Randomized STHOSVD with Kronecker-structured sketches of the partially
/// truncated core.
pub fn rsthosvd_kron(x: &DenseTensor, ranks: &[usize], opts: &RandomizedOptions) -> Result<TuckerDecomposition> {
    check_ranks(x.dims(), ranks)?;
    let order = resolve_order(x.order(), opts.mode_order.as_deref())?;
    let (plan, ell) = plan_subrank_matrix(x.dims(), ranks, opts.oversample, opts.max_adjust)?;
    let dist = opts.resolve_distribution(x.dims());
    let mut prov = randomized_provenance(Algorithm::RsthosvdKron, ranks, opts, dist);
    let mut flops = FlopCounter::new();
    let mut bases: Vec<Option<FactorMatrix>> = vec![None; x.order()];
    let mut g = x.clone();
    for &j in &order {
        let phis = draw_row_factors(&plan, j, g.dims(), dist, opts.seed, SketchTag::SeqKron, &mut prov);
        let products: Vec<ModeProduct<'_>> = phis.iter().enumerate().filter_map(|(k, p)| p.as_ref().map(|m| ModeProduct::transposed(k, m))).collect();
        let y = flops.multi_ttm(Phase::Sketch, &g, &products)?;
        let yj = unfold(&y, j)?;
        flops.charge_qr(yj.rows(), yj.cols());
        let q = thin_qr(&yj)?.0;
        g = flops.ttm(Phase::CoreFormation, &g, q.matrix(), j, true)?;
        bases[j] = Some(q);
    }
    prov.sketch_sizes = ell;
    prov.subranks = Some(SubrankPlan::Matrix(plan));
    let bases = bases.into_iter().map(|b| b.expect("every mode processed")).collect();
    finish(x, bases, Some(g), ranks, opts, prov, flops)
}

/// Randomized HOSVD reusing one Kronecker factor per mode across all mode
/// sketches, optionally through the dimension tree.
pub fn rhosvd_kron_reuse(x: &DenseTensor, ranks: &[usize], opts: &RandomizedOptions) -> Result<TuckerDecomposition> {
    check_ranks(x.dims(), ranks)?;
    let s = plan_subrank_vector(ranks, opts.oversample, x.dims())?;
    let dist = opts.resolve_distribution(x.dims());
    let mut prov = randomized_provenance(Algorithm::RhkronRe, ranks, opts, dist);
    let phis = draw_reuse_factors(&s, x.dims(), dist, opts.seed, &mut prov);
    let products: Vec<ModeProduct<'_>> = phis.iter().enumerate().map(|(k, m)| ModeProduct::transposed(k, m)).collect();
    let mut flops = FlopCounter::new();
    let sketches = if opts.use_dimtree {
        all_mode_sketches(x, &products, Some(&mut flops))?
    } else {
        naive_mode_sketches(x, &products, Some(&mut flops))?
    };
    let mut bases = Vec::with_capacity(x.order());
    for (j, y) in sketches.iter().enumerate() {
        let yj = unfold(y, j)?;
        flops.charge_qr(yj.rows(), yj.cols());
        bases.push(thin_qr(&yj)?.0);
    }
    prov.sketch_sizes = (0..x.order()).map(|j| s.product_excluding(j)).collect();
    prov.subranks = Some(SubrankPlan::Vector(s));
    finish(x, bases, None, ranks, opts, prov, flops)
}

/// Runs `algorithm`; deterministic algorithms ignore every option except `mode_order`.
pub fn decompose(x: &DenseTensor, algorithm: Algorithm, ranks: &[usize], opts: &RandomizedOptions) -> Result<TuckerDecomposition> {
    match algorithm {
        Algorithm::Hosvd => hosvd(x, ranks),
        Algorithm::Sthosvd => sthosvd(x, ranks, opts.mode_order.as_deref()),
        Algorithm::Rhosvd => rhosvd(x, ranks, opts),
        Algorithm::Rsthosvd => rsthosvd(x, ranks, opts),
        Algorithm::RhosvdKron => rhosvd_kron(x, ranks, opts),
        Algorithm::RsthosvdKron => rsthosvd_kron(x, ranks, opts),
        Algorithm::RhkronRe => rhosvd_kron_reuse(x, ranks, opts),
    }
}

/// `G ×_1 U_1 ⋯ ×_d U_d`.
pub fn reconstruct(t: &TuckerDecomposition) -> Result<DenseTensor> {
    let products: Vec<ModeProduct<'_>> = t.factors.iter().enumerate().map(|(j, f)| ModeProduct::new(j, f.matrix())).collect();
    multi_ttm(&t.core, &products)
}

/// `‖X − X̂‖ / ‖X‖`; the absolute error when `X` is zero.
pub fn relative_error(x: &DenseTensor, t: &TuckerDecomposition) -> Result<f64> {
    let dims = t.dims();
    if dims != x.dims() {
        return Err(Error::DimensionMismatch(format!(
            "tensor dims {:?} vs decomposition dims {:?}",
            x.dims(),
            dims
        )));
    }
    let diff = x.sub(&reconstruct(t)?)?.norm();
    let norm = x.norm();
    Ok(if norm == 0.0 { diff } else { diff / norm })
}
