//! Logical processor grid: block-distributed tensors, collectives with exact
//! word/message/flop accounting, and the parallel multi-TTM and Tucker
//! algorithms built on them.
//!
//! Processors run in a deterministic sequential schedule and exchange data
//! only through the collectives in [`comm`], which reduce in ascending
//! group-rank order so results do not depend on scheduling.

pub mod algs;
pub mod comm;
pub mod cost;
pub mod mttm;

use crate::error::{Error, Result};
use crate::kernel;
use crate::tensor::DenseTensor;

pub use algs::{parallel_rhkron_re, parallel_rsthosvd_kron, MttmVariant, ParallelOptions, ParallelRun};
pub use comm::{CollectiveKind, CollectiveRecord, CommStats, ProcCounters, World};
pub use cost::{cost_model, cost_model_with_subrank, CostAlgorithm, CostPrediction};
pub use mttm::{aao_mttm, aao_payload, all_modes_multi_ttm, is_first_payload, is_mttm, parallel_ttm};

/// `[t·m/parts, (t+1)·m/parts)`: the balanced share of `m` owned by part `t`.
/// Equal blocks when `parts` divides `m`; some shares may be empty when `m < parts`.
pub fn split_range(m: usize, parts: usize, t: usize) -> (usize, usize) {
    (t * m / parts, (t + 1) * m / parts)
}

/// d-way logical processor grid; ranks enumerate coordinates mode-1-fastest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridContext {
    dims: Vec<usize>,
}

impl GridContext {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidShape(format!("bad processor grid {dims:?}")));
        }
        Ok(GridContext { dims })
    }

    /// Parses `QxQx...` (e.g. `2x2x2`).
    pub fn parse(s: &str) -> Result<Self> {
        let dims = s
            .split('x')
            .map(|t| t.trim().parse::<usize>().map_err(|_| Error::InvalidParameter(format!("bad grid '{s}'"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dims)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// Number of processors `P`.
    pub fn size(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn coords(&self, rank: usize) -> Vec<usize> {
        let mut rest = rank;
        self.dims
            .iter()
            .map(|&q| {
                let c = rest % q;
                rest /= q;
                c
            })
            .collect()
    }

    pub fn rank(&self, coords: &[usize]) -> usize {
        let mut r = 0;
        let mut stride = 1;
        for (c, q) in coords.iter().zip(&self.dims) {
            r += c * stride;
            stride *= q;
        }
        r
    }

    /// Processors sharing every coordinate of `rank` except `mode`, ordered by
    /// their coordinate in `mode`.
    pub fn fiber(&self, rank: usize, mode: usize) -> Vec<usize> {
        let mut c = self.coords(rank);
        (0..self.dims[mode])
            .map(|t| {
                c[mode] = t;
                self.rank(&c)
            })
            .collect()
    }

    /// Processors sharing `rank`'s coordinate in `mode`, in ascending rank order.
    pub fn slice(&self, rank: usize, mode: usize) -> Vec<usize> {
        let p = self.coords(rank)[mode];
        (0..self.size()).filter(|&r| self.coords(r)[mode] == p).collect()
    }

    /// All fibers along `mode`, each ordered by coordinate.
    pub fn fibers(&self, mode: usize) -> Vec<Vec<usize>> {
        (0..self.size()).filter(|&r| self.coords(r)[mode] == 0).map(|r| self.fiber(r, mode)).collect()
    }

    /// All slices orthogonal to `mode`, ordered by coordinate.
    pub fn slices(&self, mode: usize) -> Vec<Vec<usize>> {
        (0..self.dims[mode])
            .map(|t| {
                let mut c = vec![0; self.order()];
                c[mode] = t;
                self.slice(self.rank(&c), mode)
            })
            .collect()
    }

    pub fn everyone(&self) -> Vec<usize> {
        (0..self.size()).collect()
    }

    /// Index ranges owned by `rank` for a tensor of global `dims`.
    pub fn block_ranges(&self, dims: &[usize], rank: usize) -> Vec<(usize, usize)> {
        let c = self.coords(rank);
        dims.iter().zip(&self.dims).zip(&c).map(|((&n, &q), &t)| split_range(n, q, t)).collect()
    }
}

/// Local piece of a distributed tensor; any dimension may be zero.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalBlock {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl LocalBlock {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Block-distributed tensor: processor `p` owns the balanced index range
/// [`split_range`] in every mode.
#[derive(Clone, Debug)]
pub struct DistTensor {
    dims: Vec<usize>,
    grid: GridContext,
    blocks: Vec<LocalBlock>,
}

impl DistTensor {
    /// Splits `x` into equal blocks; every grid size must divide its mode size.
    pub fn distribute(x: &DenseTensor, grid: &GridContext) -> Result<Self> {
        if x.order() != grid.order() {
            return Err(Error::Distribution(format!(
                "{}-way tensor on a {}-way grid",
                x.order(),
                grid.order()
            )));
        }
        for (k, (&n, &q)) in x.dims().iter().zip(grid.dims()).enumerate() {
            if n % q != 0 {
                return Err(Error::Distribution(format!("grid size {q} does not divide mode {k} of size {n}")));
            }
        }
        let blocks = (0..grid.size())
            .map(|p| {
                let (dims, data) = kernel::copy_block(x.dims(), x.data(), &grid.block_ranges(x.dims(), p));
                LocalBlock { dims, data }
            })
            .collect();
        Ok(DistTensor {
            dims: x.dims().to_vec(),
            grid: grid.clone(),
            blocks,
        })
    }

    pub(crate) fn from_blocks(dims: Vec<usize>, grid: GridContext, blocks: Vec<LocalBlock>) -> Self {
        debug_assert!(blocks.iter().enumerate().all(|(p, b)| {
            grid.block_ranges(&dims, p).iter().map(|(a, e)| e - a).eq(b.dims.iter().copied())
        }));
        DistTensor { dims, grid, blocks }
    }

    /// Reassembles the global tensor (no communication is charged).
    pub fn gather(&self) -> Result<DenseTensor> {
        let mut data = vec![0.0; self.dims.iter().product()];
        for (p, b) in self.blocks.iter().enumerate() {
            kernel::place_block(&self.dims, &mut data, &self.grid.block_ranges(&self.dims, p), &b.data);
        }
        DenseTensor::new(self.dims.clone(), data)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn grid(&self) -> &GridContext {
        &self.grid
    }

    pub fn block(&self, rank: usize) -> &LocalBlock {
        &self.blocks[rank]
    }

    pub fn blocks(&self) -> &[LocalBlock] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coords_roundtrip_and_groups() {
        let g = GridContext::new(vec![2, 3, 2]).unwrap();
        assert_eq!(g.size(), 12);
        for r in 0..12 {
            assert_eq!(g.rank(&g.coords(r)), r);
        }
        assert_eq!(g.coords(1), vec![1, 0, 0]);
        assert_eq!(g.fiber(0, 1), vec![0, 2, 4]);
        assert_eq!(g.slice(0, 2), (0..6).collect::<Vec<_>>());
        assert_eq!(g.fibers(0).len(), 6);
        assert_eq!(g.slices(1).len(), 3);
        assert_eq!(GridContext::parse("2x3x2").unwrap(), g);
        assert!(GridContext::parse("2x0").is_err());
        assert!(GridContext::parse("ax2").is_err());
    }

    #[test]
    fn distribution_example_block_shape() {
        let x = DenseTensor::from_fn(&[8, 6, 2], |i| (i[0] + 8 * i[1] + 48 * i[2]) as f64).unwrap();
        let g = GridContext::new(vec![2, 3, 1]).unwrap();
        let d = DistTensor::distribute(&x, &g).unwrap();
        for b in d.blocks() {
            assert_eq!(b.dims, vec![4, 2, 2]);
        }
        assert_eq!(d.gather().unwrap(), x);
        let one = DistTensor::distribute(&x, &GridContext::new(vec![1, 1, 1]).unwrap()).unwrap();
        assert_eq!(one.block(0).data, x.data());
        assert!(DistTensor::distribute(&x, &GridContext::new(vec![3, 1, 1]).unwrap()).is_err());
    }

    #[test]
    fn balanced_split() {
        assert_eq!(split_range(8, 4, 1), (2, 4));
        let parts: Vec<_> = (0..4).map(|t| split_range(2, 4, t)).collect();
        assert_eq!(parts, vec![(0, 0), (0, 1), (1, 1), (1, 2)]);
    }
}
