//! Parallel TTM and the two multi-TTM communication schemes.
//!
//! In-sequence (IS) multi-TTM applies one parallel TTM per mode, each ending
//! in a reduce-scatter over a processor fiber. All-at-once (AAO) multiplies
//! every local block by every sketch locally and performs a single
//! reduce-scatter over the slice of processors that share the withheld
//! mode's coordinate. When the sketch size `s` is much smaller than the
//! local block, AAO moves far fewer words.

use super::comm::World;
use super::{DistTensor, GridContext, LocalBlock};
use crate::dimtree::{DimTree, DimTreeNode};
use crate::error::{Error, Result};
use crate::kernel;
use crate::tensor::{DenseMatrix, ModeProduct};

/// Columns `[a, b)` of the effective operator of `p`.
fn local_operator(p: &ModeProduct<'_>, a: usize, b: usize) -> DenseMatrix {
    if p.transpose {
        DenseMatrix::from_fn(p.out_dim(), b - a, |i, c| p.matrix.get(a + c, i))
    } else {
        p.matrix.columns(a, b)
    }
}

fn check_world(world: &World, grid: &GridContext) -> Result<()> {
    if world.procs() != grid.size() {
        return Err(Error::Distribution(format!(
            "world has {} processors but the grid has {}",
            world.procs(),
            grid.size()
        )));
    }
    Ok(())
}

fn check_product(t: &DistTensor, p: &ModeProduct<'_>) -> Result<()> {
    if p.mode >= t.dims().len() {
        return Err(Error::ModeOutOfRange {
            mode: p.mode,
            order: t.dims().len(),
        });
    }
    if p.in_dim() != t.dims()[p.mode] {
        return Err(Error::DimensionMismatch(format!(
            "operator contracts {} but mode {} has size {}",
            p.in_dim(),
            p.mode,
            t.dims()[p.mode]
        )));
    }
    Ok(())
}

/// Local product of `block` (owned by `rank`, whose mode range is `range`)
/// with the matching columns of `p`, charging the flops to `rank`.
fn apply_local(world: &mut World, rank: usize, block: &LocalBlock, p: &ModeProduct<'_>, range: (usize, usize)) -> LocalBlock {
    let op = local_operator(p, range.0, range.1);
    world.charge_flops(rank, kernel::ttm_flops(&block.dims, p.mode, op.rows()));
    let (dims, data) = kernel::ttm_raw(&block.dims, &block.data, op.view(), p.mode);
    LocalBlock { dims, data }
}

/// `Y = T ×_mode A` with `A` replicated: local products with the owned
/// columns of `A`, then a reduce-scatter over each fiber along `mode`.
pub fn parallel_ttm(world: &mut World, t: &DistTensor, p: &ModeProduct<'_>) -> Result<DistTensor> {
    let grid = t.grid().clone();
    check_world(world, &grid)?;
    check_product(t, p)?;
    let j = p.mode;
    let m = p.out_dim();
    let mut out_dims = t.dims().to_vec();
    out_dims[j] = m;
    let mut blocks: Vec<Option<LocalBlock>> = vec![None; grid.size()];
    for fiber in grid.fibers(j) {
        let mut partial = Vec::with_capacity(fiber.len());
        let mut shape = Vec::new();
        for &r in &fiber {
            let range = grid.block_ranges(t.dims(), r)[j];
            let b = apply_local(world, r, t.block(r), p, range);
            shape = b.dims.clone();
            partial.push(b.data);
        }
        let targets: Vec<Vec<(usize, usize)>> = fiber
            .iter()
            .map(|&r| {
                let mut ranges: Vec<(usize, usize)> = shape.iter().map(|&n| (0, n)).collect();
                ranges[j] = grid.block_ranges(&out_dims, r)[j];
                ranges
            })
            .collect();
        let parts = world.reduce_scatter_blocks(&fiber, &shape, &partial, &targets)?;
        for (&r, (dims, data)) in fiber.iter().zip(parts) {
            blocks[r] = Some(LocalBlock { dims, data });
        }
    }
    let blocks = blocks.into_iter().map(|b| b.expect("every rank lies on one fiber")).collect();
    Ok(DistTensor::from_blocks(out_dims, grid, blocks))
}

/// In-sequence multi-TTM: one [`parallel_ttm`] per product, in the given order.
pub fn is_mttm(world: &mut World, t: &DistTensor, products: &[ModeProduct<'_>]) -> Result<DistTensor> {
    let mut cur = t.clone();
    for p in products {
        cur = parallel_ttm(world, &cur, p)?;
    }
    Ok(cur)
}

/// Reduce-scatter of local partial sketches over the slice orthogonal to
/// `j`, producing the balanced distribution of the sketch.
fn slice_reduce(world: &mut World, grid: &GridContext, j: usize, out_dims: &[usize], partial: Vec<LocalBlock>) -> Result<DistTensor> {
    let mut blocks: Vec<Option<LocalBlock>> = vec![None; grid.size()];
    let mut partial: Vec<Option<LocalBlock>> = partial.into_iter().map(Some).collect();
    for slice in grid.slices(j) {
        let shape = partial[slice[0]].as_ref().expect("local partial").dims.clone();
        let contributions: Vec<Vec<f64>> = slice.iter().map(|&r| partial[r].take().expect("local partial").data).collect();
        let targets: Vec<Vec<(usize, usize)>> = slice
            .iter()
            .map(|&r| {
                let mut ranges = grid.block_ranges(out_dims, r);
                ranges[j] = (0, shape[j]);
                ranges
            })
            .collect();
        let parts = world.reduce_scatter_blocks(&slice, &shape, &contributions, &targets)?;
        for (&r, (dims, data)) in slice.iter().zip(parts) {
            blocks[r] = Some(LocalBlock { dims, data });
        }
    }
    let blocks = blocks.into_iter().map(|b| b.expect("every rank lies in one slice")).collect();
    Ok(DistTensor::from_blocks(out_dims.to_vec(), grid.clone(), blocks))
}

/// All-at-once multi-TTM of every mode except `skip`. `products` must hold
/// one operator for each mode other than `skip`.
pub fn aao_mttm(world: &mut World, t: &DistTensor, skip: usize, products: &[ModeProduct<'_>]) -> Result<DistTensor> {
    let grid = t.grid().clone();
    check_world(world, &grid)?;
    let d = t.dims().len();
    if skip >= d {
        return Err(Error::ModeOutOfRange { mode: skip, order: d });
    }
    let mut covered = vec![false; d];
    for p in products {
        check_product(t, p)?;
        if p.mode == skip || covered[p.mode] {
            return Err(Error::InvalidParameter(format!("unexpected operator for mode {}", p.mode)));
        }
        covered[p.mode] = true;
    }
    if covered.iter().filter(|&&c| c).count() != d - 1 {
        return Err(Error::InvalidParameter("need one operator per non-skipped mode".into()));
    }
    let mut ordered: Vec<ModeProduct<'_>> = products.to_vec();
    ordered.sort_by_key(|p| p.mode);
    let mut out_dims = t.dims().to_vec();
    for p in &ordered {
        out_dims[p.mode] = p.out_dim();
    }
    let partial: Vec<LocalBlock> = (0..grid.size())
        .map(|r| {
            let ranges = grid.block_ranges(t.dims(), r);
            let mut b = t.block(r).clone();
            for p in &ordered {
                b = apply_local(world, r, &b, p, ranges[p.mode]);
            }
            b
        })
        .collect();
    slice_reduce(world, &grid, skip, &out_dims, partial)
}

/// Every leave-one-out sketch `T ×_{k≠j} Φ_k` (`products[k]` is the operator
/// for mode `k`), sharing local partial products along a dimension tree and
/// finishing each sketch with one slice reduce-scatter.
pub fn all_modes_multi_ttm(world: &mut World, t: &DistTensor, products: &[ModeProduct<'_>]) -> Result<Vec<DistTensor>> {
    let grid = t.grid().clone();
    check_world(world, &grid)?;
    let d = t.dims().len();
    if products.len() != d || products.iter().enumerate().any(|(k, p)| p.mode != k) {
        return Err(Error::InvalidParameter("expected one operator per mode, in mode order".into()));
    }
    for p in products {
        check_product(t, p)?;
    }
    if d == 1 {
        return Ok(vec![t.clone()]);
    }
    let tree = DimTree::new(d)?;
    let mut out: Vec<Option<DistTensor>> = vec![None; d];
    let c = tree.root().children.as_ref().expect("order >= 2");
    let root: Vec<LocalBlock> = t.blocks().to_vec();
    eval(world, t, &root, &c.0, products, &mut out)?;
    eval(world, t, &root, &c.1, products, &mut out)?;
    Ok(out.into_iter().map(|x| x.expect("every leaf visited")).collect())
}

fn eval(
    world: &mut World,
    t: &DistTensor,
    parent: &[LocalBlock],
    node: &DimTreeNode,
    products: &[ModeProduct<'_>],
    out: &mut [Option<DistTensor>],
) -> Result<()> {
    let grid = t.grid();
    let value: Vec<LocalBlock> = parent
        .iter()
        .enumerate()
        .map(|(r, b)| {
            let ranges = grid.block_ranges(t.dims(), r);
            let mut b = b.clone();
            for &k in &node.applied {
                b = apply_local(world, r, &b, &products[k], ranges[k]);
            }
            b
        })
        .collect();
    match &node.children {
        Some(c) => {
            eval(world, t, &value, &c.0, products, out)?;
            eval(world, t, &value, &c.1, products, out)?;
        }
        None => {
            let j = node.withheld.start;
            let mut out_dims: Vec<usize> = products.iter().map(|p| p.out_dim()).collect();
            out_dims[j] = t.dims()[j];
            out[j] = Some(slice_reduce(world, grid, j, &out_dims, value)?);
        }
    }
    Ok(())
}

/// Words in each processor's first reduce-scatter input for IS multi-TTM of
/// every mode except `skip` with sketch sizes `s` on an equal-block
/// distribution: the local block with its first processed mode replaced by
/// its sketch size.
pub fn is_first_payload(dims: &[usize], grid: &[usize], skip: usize, s: &[usize]) -> u64 {
    let first = (0..dims.len()).find(|&k| k != skip).expect("at least two modes");
    (0..dims.len())
        .map(|k| if k == first { s[k] as u64 } else { (dims[k] / grid[k]) as u64 })
        .product()
}

/// Words in each processor's reduce-scatter input for AAO multi-TTM: the
/// withheld mode's local extent times every other sketch size.
pub fn aao_payload(dims: &[usize], grid: &[usize], skip: usize, s: &[usize]) -> u64 {
    (0..dims.len())
        .map(|k| if k == skip { (dims[k] / grid[k]) as u64 } else { s[k] as u64 })
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::{gen_gaussian, RngSpec};
    use crate::tensor::{multi_ttm, ttm, DenseTensor};

    fn tensor(dims: &[usize], seed: u64) -> DenseTensor {
        let n = dims.iter().product();
        DenseTensor::new(dims.to_vec(), gen_gaussian(n, 1, RngSpec::new(seed, 0)).into_data()).unwrap()
    }

    fn close(a: &DenseTensor, b: &DenseTensor) -> bool {
        a.sub(b).unwrap().norm() <= 1e-12 * b.norm().max(1.0)
    }

    #[test]
    fn parallel_ttm_matches_serial() {
        let x = tensor(&[6, 4, 6], 1);
        let grid = GridContext::new(vec![2, 2, 3]).unwrap();
        let dx = DistTensor::distribute(&x, &grid).unwrap();
        let a = gen_gaussian(5, 4, RngSpec::new(2, 0));
        let mut w = World::new(grid.size());
        let y = parallel_ttm(&mut w, &dx, &ModeProduct::new(1, &a)).unwrap();
        assert!(close(&y.gather().unwrap(), &ttm(&x, &a, 1, false).unwrap()));
        let b = gen_gaussian(6, 2, RngSpec::new(3, 0));
        let z = parallel_ttm(&mut w, &dx, &ModeProduct::transposed(2, &b)).unwrap();
        assert!(close(&z.gather().unwrap(), &ttm(&x, &b, 2, true).unwrap()));
        let t = w.stats().total();
        assert_eq!(t.words_sent, t.words_recv);
    }

    #[test]
    fn is_and_aao_agree_with_serial() {
        let x = tensor(&[8, 8, 8], 4);
        let grid = GridContext::new(vec![2, 2, 2]).unwrap();
        let dx = DistTensor::distribute(&x, &grid).unwrap();
        let phis: Vec<DenseMatrix> = (0..3).map(|k| gen_gaussian(8, 3, RngSpec::new(5, k))).collect();
        let ps: Vec<ModeProduct<'_>> = (1..3).map(|k| ModeProduct::transposed(k, &phis[k])).collect();
        let serial = multi_ttm(&x, &ps).unwrap();
        let mut w = World::new(8);
        assert!(close(&is_mttm(&mut w, &dx, &ps).unwrap().gather().unwrap(), &serial));
        assert!(close(&aao_mttm(&mut w, &dx, 0, &ps).unwrap().gather().unwrap(), &serial));
        let all: Vec<ModeProduct<'_>> = (0..3).map(|k| ModeProduct::transposed(k, &phis[k])).collect();
        let sketches = all_modes_multi_ttm(&mut w, &dx, &all).unwrap();
        for (j, s) in sketches.iter().enumerate() {
            let ps: Vec<_> = all.iter().filter(|p| p.mode != j).copied().collect();
            assert!(close(&s.gather().unwrap(), &multi_ttm(&x, &ps).unwrap()));
        }
        assert!(aao_mttm(&mut w, &dx, 0, &all).is_err());
    }

    #[test]
    fn payload_formulas_match_logged_collectives() {
        let (n, q, s) = (16, 2, 2);
        let x = tensor(&[n, n, n], 6);
        let grid = GridContext::new(vec![q, q, q]).unwrap();
        let dx = DistTensor::distribute(&x, &grid).unwrap();
        let phis: Vec<DenseMatrix> = (0..3).map(|k| gen_gaussian(n, s, RngSpec::new(7, k))).collect();
        let ps: Vec<ModeProduct<'_>> = (1..3).map(|k| ModeProduct::transposed(k, &phis[k])).collect();
        let mut w = World::new(8);
        is_mttm(&mut w, &dx, &ps).unwrap();
        assert_eq!(w.log()[0].payload[0], is_first_payload(&[n; 3], &[q; 3], 0, &[s; 3]));
        let mut w = World::new(8);
        aao_mttm(&mut w, &dx, 0, &ps).unwrap();
        assert_eq!(w.log().len(), 2);
        assert_eq!(w.log()[0].payload[0], aao_payload(&[n; 3], &[q; 3], 0, &[s; 3]));
    }

    #[test]
    fn cubic_payload_example() {
        assert_eq!(is_first_payload(&[800; 3], &[4; 3], 0, &[20; 3]), 800_000);
        assert_eq!(aao_payload(&[800; 3], &[4; 3], 0, &[20; 3]), 80_000);
    }
}
