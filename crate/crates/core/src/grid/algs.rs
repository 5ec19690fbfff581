//! Parallel randomized Tucker on the simulated grid.
//!
//! Both algorithms draw exactly the sketch matrices their serial
//! counterparts draw (same seeds and stream tags), so their results agree
//! with the serial ones up to summation order.

use super::comm::{CollectiveRecord, CommStats, World};
use super::mttm::{aao_mttm, all_modes_multi_ttm, is_mttm, parallel_ttm};
use super::{DistTensor, GridContext};
use crate::dimtree::{FlopCounter, Phase};
use crate::error::{Error, Result};
use crate::linalg::{gram_leading_vectors, thin_qr};
use crate::sketch::{plan_subrank_matrix, plan_subrank_vector};
use crate::tensor::{mode_gram, unfold, DenseMatrix, DenseTensor, FactorMatrix, ModeProduct};
use crate::tucker::{
    check_ranks, draw_reuse_factors, draw_row_factors, randomized_provenance, resolve_order, truncate_core_counted, Algorithm, Intermediate,
    RandomizedOptions, SubrankPlan, TuckerDecomposition,
};
use crate::sketch::SketchTag;

/// Communication scheme for the sketching multi-TTMs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MttmVariant {
    InSequence,
    #[default]
    AllAtOnce,
}

impl MttmVariant {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "is" => Ok(MttmVariant::InSequence),
            "aao" => Ok(MttmVariant::AllAtOnce),
            _ => Err(Error::InvalidParameter(format!("unknown multi-TTM variant '{s}' (expected is or aao)"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParallelOptions {
    pub randomized: RandomizedOptions,
    pub mttm: MttmVariant,
    /// Cores with at most this many entries are gathered and truncated
    /// redundantly on every processor; larger ones are truncated in place.
    pub small_core_threshold: usize,
}

impl Default for ParallelOptions {
    fn default() -> Self {
        ParallelOptions {
            randomized: RandomizedOptions::default(),
            mttm: MttmVariant::default(),
            small_core_threshold: 1_000_000,
        }
    }
}

/// Result of a simulated run. Every processor holds the same factors; the
/// core is reported gathered.
#[derive(Clone, Debug)]
pub struct ParallelRun {
    pub decomposition: TuckerDecomposition,
    pub stats: CommStats,
    pub log: Vec<CollectiveRecord>,
}

fn charge_all(world: &mut World, flops: u64) {
    for r in 0..world.procs() {
        world.charge_flops(r, flops);
    }
}

fn gather_everywhere(world: &mut World, t: &DistTensor) -> Result<DenseTensor> {
    let grid = t.grid();
    let group = grid.everyone();
    let blocks: Vec<&[f64]> = t.blocks().iter().map(|b| b.data.as_slice()).collect();
    let ranges: Vec<_> = group.iter().map(|&r| grid.block_ranges(t.dims(), r)).collect();
    let data = world.all_gather_blocks(&group, t.dims(), &blocks, &ranges)?;
    DenseTensor::new(t.dims().to_vec(), data)
}

/// Redundant thin QR of the mode-`j` unfolding on every processor.
fn redundant_qr(world: &mut World, y: &DenseTensor, j: usize) -> Result<FactorMatrix> {
    world.set_phase(Phase::Qr);
    let yj = unfold(y, j)?;
    let mut c = FlopCounter::new();
    c.charge_qr(yj.rows(), yj.cols());
    charge_all(world, c.total());
    Ok(thin_qr(&yj)?.0)
}

/// STHOSVD of a distributed core: per mode, a fiber all-gather, local Gram
/// contributions summed by an all-reduce over the slice, a redundant
/// eigendecomposition, and a parallel TTM.
fn distributed_truncation(world: &mut World, g: &DistTensor, ranks: &[usize]) -> Result<(DistTensor, Vec<FactorMatrix>)> {
    check_ranks(g.dims(), ranks)?;
    let grid = g.grid().clone();
    let mut cur = g.clone();
    let mut vs = Vec::with_capacity(ranks.len());
    for (j, &r) in ranks.iter().enumerate() {
        let n = cur.dims()[j];
        let mut grams: Vec<Option<Vec<f64>>> = vec![None; grid.size()];
        for fiber in grid.fibers(j) {
            let mut dims = cur.block(fiber[0]).dims.clone();
            dims[j] = n;
            let blocks: Vec<&[f64]> = fiber.iter().map(|&p| cur.block(p).data.as_slice()).collect();
            let ranges: Vec<Vec<(usize, usize)>> = fiber
                .iter()
                .map(|&p| {
                    let mut rg: Vec<(usize, usize)> = dims.iter().map(|&m| (0, m)).collect();
                    rg[j] = grid.block_ranges(cur.dims(), p)[j];
                    rg
                })
                .collect();
            let full = world.all_gather_blocks(&fiber, &dims, &blocks, &ranges)?;
            let cols: usize = dims.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, &m)| m).product();
            let gram = if cols == 0 {
                vec![0.0; n * n]
            } else {
                mode_gram(&DenseTensor::new(dims.clone(), full)?, j)?.into_data()
            };
            let mut c = FlopCounter::new();
            c.charge_gram(n, cols);
            for &p in &fiber {
                world.charge_flops(p, c.total());
                grams[p] = Some(gram.clone());
            }
        }
        let mut gram = None;
        for slice in grid.slices(j) {
            let contributions: Vec<Vec<f64>> = slice.iter().map(|&p| grams[p].take().expect("gram")).collect();
            gram = Some(world.all_reduce(&slice, &contributions)?);
        }
        let gram = DenseMatrix::from_col_major(n, n, gram.expect("at least one slice"))?;
        let v = gram_leading_vectors(&gram, r)?.0;
        cur = parallel_ttm(world, &cur, &ModeProduct::transposed(j, v.matrix()))?;
        vs.push(v);
    }
    Ok((cur, vs))
}

/// Shared tail: truncate `Ĝ` (gathered or in place) and form `U_j = Û_j V_j`.
fn finish_parallel(
    mut world: World,
    bases: Vec<FactorMatrix>,
    g_hat: DistTensor,
    ranks: &[usize],
    opts: &ParallelOptions,
    provenance: crate::tucker::Provenance,
) -> Result<ParallelRun> {
    world.set_phase(Phase::Truncation);
    let ro = &opts.randomized;
    let keep = |g: &DenseTensor| {
        ro.keep_intermediate.then(|| Intermediate {
            bases: bases.clone(),
            core: g.clone(),
        })
    };
    let (core, factors, intermediate) = if !ro.truncate {
        let g = gather_everywhere(&mut world, &g_hat)?;
        let inter = keep(&g);
        (g, bases.clone(), inter)
    } else {
        let (core, vs, inter) = if g_hat.len() <= opts.small_core_threshold {
            let g = gather_everywhere(&mut world, &g_hat)?;
            let mut c = FlopCounter::new();
            let (core, vs) = truncate_core_counted(&g, ranks, &mut c)?;
            charge_all(&mut world, c.total());
            let inter = keep(&g);
            (core, vs, inter)
        } else {
            let inter = if ro.keep_intermediate { keep(&g_hat.gather()?) } else { None };
            let (core, vs) = distributed_truncation(&mut world, &g_hat, ranks)?;
            (core.gather()?, vs, inter)
        };
        let mut factors = Vec::with_capacity(bases.len());
        for (u, v) in bases.iter().zip(&vs) {
            let mut c = FlopCounter::new();
            c.charge_matmul(Phase::Truncation, u.rows(), u.cols(), v.cols());
            charge_all(&mut world, c.total());
            factors.push(FactorMatrix::trusted(u.matrix().matmul(v.matrix())?));
        }
        (core, factors, inter)
    };
    let mut decomposition = TuckerDecomposition::from_parts(core, factors, provenance)?;
    decomposition.intermediate = intermediate;
    let (stats, log) = world.into_parts();
    Ok(ParallelRun { decomposition, stats, log })
}

fn check_input(x: &DenseTensor, grid: &GridContext, ranks: &[usize]) -> Result<DistTensor> {
    check_ranks(x.dims(), ranks)?;
    DistTensor::distribute(x, grid)
}

/// Sequentially truncated randomized Tucker with Kronecker sketches on a
/// processor grid: for each mode, a distributed multi-TTM sketch of the
/// current core, an all-gather, a redundant QR, and a parallel TTM that
/// truncates the core.
pub fn parallel_rsthosvd_kron(x: &DenseTensor, ranks: &[usize], grid: &GridContext, opts: &ParallelOptions) -> Result<ParallelRun> {
    let dx = check_input(x, grid, ranks)?;
    let ro = &opts.randomized;
    let order = resolve_order(x.order(), ro.mode_order.as_deref())?;
    let (plan, ell) = plan_subrank_matrix(x.dims(), ranks, ro.oversample, ro.max_adjust)?;
    let dist = ro.resolve_distribution(x.dims());
    let mut prov = randomized_provenance(Algorithm::RsthosvdKron, ranks, ro, dist);
    let mut world = World::new(grid.size());
    let mut bases: Vec<Option<FactorMatrix>> = vec![None; x.order()];
    let mut g = dx;
    for &j in &order {
        world.set_phase(Phase::Sketch);
        let phis = draw_row_factors(&plan, j, g.dims(), dist, ro.seed, SketchTag::SeqKron, &mut prov);
        let products: Vec<ModeProduct<'_>> = phis.iter().enumerate().filter_map(|(k, p)| p.as_ref().map(|m| ModeProduct::transposed(k, m))).collect();
        let y = match opts.mttm {
            MttmVariant::AllAtOnce => aao_mttm(&mut world, &g, j, &products)?,
            MttmVariant::InSequence => is_mttm(&mut world, &g, &products)?,
        };
        let y = gather_everywhere(&mut world, &y)?;
        let q = redundant_qr(&mut world, &y, j)?;
        world.set_phase(Phase::CoreFormation);
        g = parallel_ttm(&mut world, &g, &ModeProduct::transposed(j, q.matrix()))?;
        bases[j] = Some(q);
    }
    prov.sketch_sizes = ell;
    prov.subranks = Some(SubrankPlan::Matrix(plan));
    let bases = bases.into_iter().map(|b| b.expect("every mode processed")).collect();
    finish_parallel(world, bases, g, ranks, opts, prov)
}

/// Randomized HOSVD with reused Kronecker factors on a processor grid: all
/// mode sketches from one dimension-tree multi-TTM, all-gathers, redundant
/// QRs, then an in-sequence multi-TTM forms the core.
pub fn parallel_rhkron_re(x: &DenseTensor, ranks: &[usize], grid: &GridContext, opts: &ParallelOptions) -> Result<ParallelRun> {
    let dx = check_input(x, grid, ranks)?;
    let ro = &opts.randomized;
    let s = plan_subrank_vector(ranks, ro.oversample, x.dims())?;
    let dist = ro.resolve_distribution(x.dims());
    let mut prov = randomized_provenance(Algorithm::RhkronRe, ranks, ro, dist);
    let phis = draw_reuse_factors(&s, x.dims(), dist, ro.seed, &mut prov);
    let products: Vec<ModeProduct<'_>> = phis.iter().enumerate().map(|(k, m)| ModeProduct::transposed(k, m)).collect();
    let mut world = World::new(grid.size());
    world.set_phase(Phase::Sketch);
    let sketches = all_modes_multi_ttm(&mut world, &dx, &products)?;
    let mut bases = Vec::with_capacity(x.order());
    for (j, y) in sketches.iter().enumerate() {
        world.set_phase(Phase::Sketch);
        let y = gather_everywhere(&mut world, y)?;
        bases.push(redundant_qr(&mut world, &y, j)?);
    }
    world.set_phase(Phase::CoreFormation);
    let core_products: Vec<ModeProduct<'_>> = bases.iter().enumerate().map(|(j, u)| ModeProduct::transposed(j, u.matrix())).collect();
    let g = is_mttm(&mut world, &dx, &core_products)?;
    prov.sketch_sizes = (0..x.order()).map(|j| s.product_excluding(j)).collect();
    prov.subranks = Some(SubrankPlan::Vector(s));
    finish_parallel(world, bases, g, ranks, opts, prov)
}
