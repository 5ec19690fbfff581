//! Dimension-tree evaluation of the `d` leave-one-out sketches
//! `Y^(j) = X ×_{k≠j} Φ_k`, and exact flop accounting.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::kernel;
use crate::tensor::{multi_ttm_flops, multi_ttm_with_order, ttm, DenseMatrix, DenseTensor, ModeProduct, OrderPolicy};

/// Labeled stage of a decomposition for flop accounting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    Gram,
    Sketch,
    Qr,
    CoreFormation,
    Truncation,
}

impl Phase {
    pub const ALL: [Phase; 5] = [Phase::Gram, Phase::Sketch, Phase::Qr, Phase::CoreFormation, Phase::Truncation];

    pub fn name(&self) -> &'static str {
        match self {
            Phase::Gram => "gram",
            Phase::Sketch => "sketch",
            Phase::Qr => "qr",
            Phase::CoreFormation => "core",
            Phase::Truncation => "truncation",
        }
    }
}

/// Shape-derived flop counts per phase. A TTM producing `E` output entries
/// with contraction length `n` costs `2·E·n`; a thin QR of an `m x n` matrix
/// costs `2·m·n²`; a Gram matrix `A Aᵀ` of an `m x n` matrix costs `m²·n`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FlopCounter {
    counts: [u64; 5],
    ttm_calls: u64,
}

impl FlopCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, phase: Phase, flops: u64) {
        self.counts[phase as usize] += flops;
    }

    pub fn get(&self, phase: Phase) -> u64 {
        self.counts[phase as usize]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Number of single-mode TTM invocations recorded.
    pub fn ttm_calls(&self) -> u64 {
        self.ttm_calls
    }

    /// Per-phase counts, in [`Phase::ALL`] order.
    pub fn measured(&self) -> Vec<(Phase, u64)> {
        Phase::ALL.iter().map(|&p| (p, self.get(p))).collect()
    }

    pub fn merge(&mut self, other: &FlopCounter) {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        self.ttm_calls += other.ttm_calls;
    }

    pub(crate) fn charge_ttm(&mut self, phase: Phase, dims: &[usize], mode: usize, rows: usize) {
        self.add(phase, kernel::ttm_flops(dims, mode, rows));
        self.ttm_calls += 1;
    }

    pub(crate) fn charge_qr(&mut self, rows: usize, cols: usize) {
        self.add(Phase::Qr, 2 * rows as u64 * (cols as u64).pow(2));
    }

    pub(crate) fn charge_gram(&mut self, rows: usize, cols: usize) {
        self.add(Phase::Gram, (rows as u64).pow(2) * cols as u64);
    }

    pub(crate) fn charge_matmul(&mut self, phase: Phase, m: usize, k: usize, n: usize) {
        self.add(phase, 2 * m as u64 * k as u64 * n as u64);
    }

    /// Counted single TTM.
    pub fn ttm(&mut self, phase: Phase, t: &DenseTensor, a: &DenseMatrix, mode: usize, transpose: bool) -> Result<DenseTensor> {
        let y = ttm(t, a, mode, transpose)?;
        self.charge_ttm(phase, t.dims(), mode, y.dims()[mode]);
        Ok(y)
    }

    /// Counted multi-TTM with the default ordering.
    pub fn multi_ttm(&mut self, phase: Phase, t: &DenseTensor, products: &[ModeProduct<'_>]) -> Result<DenseTensor> {
        let policy = OrderPolicy::LargestFirst;
        let flops = multi_ttm_flops(t.dims(), products, &policy)?;
        let y = multi_ttm_with_order(t, products, &policy)?;
        self.add(phase, flops);
        self.ttm_calls += products.len() as u64;
        Ok(y)
    }
}

/// Node of a dimension tree. `withheld` is the set of modes whose sketch
/// matrices have not been applied on the way down; `applied` are the modes
/// applied on the edge from the parent.
#[derive(Clone, Debug)]
pub struct DimTreeNode {
    pub withheld: Range<usize>,
    pub applied: Vec<usize>,
    pub children: Option<Box<(DimTreeNode, DimTreeNode)>>,
}

/// Balanced binary tree over consecutive modes; an odd-sized node gives its
/// extra mode to the left child.
#[derive(Clone, Debug)]
pub struct DimTree {
    order: usize,
    root: DimTreeNode,
}

impl DimTree {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidShape("a dimension tree needs at least one mode".into()));
        }
        Ok(DimTree {
            order,
            root: build(0..order, Vec::new()),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn root(&self) -> &DimTreeNode {
        &self.root
    }

    /// Number of edges, i.e. multi-TTM invocations when evaluating the tree.
    pub fn edges(&self) -> usize {
        fn count(n: &DimTreeNode) -> usize {
            match &n.children {
                Some(c) => 2 + count(&c.0) + count(&c.1),
                None => 0,
            }
        }
        count(&self.root)
    }

    /// Total single-mode TTMs performed when evaluating the tree.
    pub fn ttm_count(&self) -> usize {
        fn count(n: &DimTreeNode) -> usize {
            n.applied.len()
                + n.children.as_ref().map_or(0, |c| count(&c.0) + count(&c.1))
        }
        count(&self.root)
    }

    /// Leaf nodes in left-to-right order.
    pub fn leaves(&self) -> Vec<&DimTreeNode> {
        fn walk<'a>(n: &'a DimTreeNode, out: &mut Vec<&'a DimTreeNode>) {
            match &n.children {
                Some(c) => {
                    walk(&c.0, out);
                    walk(&c.1, out);
                }
                None => out.push(n),
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }
}

fn build(withheld: Range<usize>, applied: Vec<usize>) -> DimTreeNode {
    let m = withheld.len();
    let children = if m > 1 {
        let mid = withheld.start + m.div_ceil(2);
        let left = build(withheld.start..mid, (mid..withheld.end).collect());
        let right = build(mid..withheld.end, (withheld.start..mid).collect());
        Some(Box::new((left, right)))
    } else {
        None
    };
    DimTreeNode {
        withheld,
        applied,
        children,
    }
}

fn check_sketch_products(dims: &[usize], products: &[ModeProduct<'_>]) -> Result<()> {
    if products.len() != dims.len() || products.iter().enumerate().any(|(k, p)| p.mode != k) {
        return Err(Error::InvalidParameter("expected one sketch matrix per mode, in mode order".into()));
    }
    for p in products {
        if p.in_dim() != dims[p.mode] {
            return Err(Error::DimensionMismatch(format!(
                "sketch for mode {} contracts {} but the mode has size {}",
                p.mode,
                p.in_dim(),
                dims[p.mode]
            )));
        }
    }
    Ok(())
}

/// All leave-one-out sketches via the dimension tree. `products[k]` is the
/// sketch operator for mode `k`. The counter, if given, is charged under
/// [`Phase::Sketch`].
pub fn all_mode_sketches(x: &DenseTensor, products: &[ModeProduct<'_>], counter: Option<&mut FlopCounter>) -> Result<Vec<DenseTensor>> {
    check_sketch_products(x.dims(), products)?;
    let tree = DimTree::new(x.order())?;
    let mut scratch = FlopCounter::new();
    let mut out: Vec<Option<DenseTensor>> = vec![None; x.order()];
    if x.order() == 1 {
        out[0] = Some(x.clone());
    } else {
        let c = tree.root.children.as_ref().expect("order >= 2");
        eval(x, &c.0, products, &mut scratch, &mut out)?;
        eval(x, &c.1, products, &mut scratch, &mut out)?;
    }
    if let Some(counter) = counter {
        counter.merge(&scratch);
    }
    Ok(out.into_iter().map(|t| t.expect("every leaf visited")).collect())
}

fn eval(parent: &DenseTensor, node: &DimTreeNode, products: &[ModeProduct<'_>], counter: &mut FlopCounter, out: &mut [Option<DenseTensor>]) -> Result<()> {
    let ps: Vec<ModeProduct<'_>> = node.applied.iter().map(|&k| products[k]).collect();
    let value = counter.multi_ttm(Phase::Sketch, parent, &ps)?;
    match &node.children {
        Some(c) => {
            eval(&value, &c.0, products, counter, out)?;
            eval(&value, &c.1, products, counter, out)?;
        }
        None => out[node.withheld.start] = Some(value),
    }
    Ok(())
}

/// The same sketches computed independently per mode.
pub fn naive_mode_sketches(x: &DenseTensor, products: &[ModeProduct<'_>], mut counter: Option<&mut FlopCounter>) -> Result<Vec<DenseTensor>> {
    check_sketch_products(x.dims(), products)?;
    let mut out = Vec::with_capacity(x.order());
    for j in 0..x.order() {
        let ps: Vec<ModeProduct<'_>> = products.iter().filter(|p| p.mode != j).copied().collect();
        let mut local = FlopCounter::new();
        out.push(local.multi_ttm(Phase::Sketch, x, &ps)?);
        if let Some(c) = counter.as_deref_mut() {
            c.merge(&local);
        }
    }
    Ok(out)
}

/// Applies the default multi-TTM ordering to shapes only.
fn shape_multi_ttm(dims: &mut [usize], modes: &[usize], sizes: &[usize]) -> u64 {
    let mut pending: Vec<usize> = modes.to_vec();
    let mut flops = 0;
    while !pending.is_empty() {
        let (pos, &k) = pending
            .iter()
            .enumerate()
            .max_by(|(_, &a), (_, &b)| dims[a].cmp(&dims[b]).then(b.cmp(&a)))
            .expect("nonempty");
        flops += kernel::ttm_flops(dims, k, sizes[k]);
        dims[k] = sizes[k];
        pending.remove(pos);
    }
    flops
}

/// Flops of [`all_mode_sketches`] derived from shapes alone, so large cases
/// can be counted without data. `sizes[k]` is the sketch size of mode `k`.
pub fn tree_sketch_flops(dims: &[usize], sizes: &[usize]) -> Result<u64> {
    let tree = DimTree::new(dims.len())?;
    fn walk(node: &DimTreeNode, dims: &[usize], sizes: &[usize]) -> u64 {
        let mut cur = dims.to_vec();
        let f = shape_multi_ttm(&mut cur, &node.applied, sizes);
        f + node.children.as_ref().map_or(0, |c| walk(&c.0, &cur, sizes) + walk(&c.1, &cur, sizes))
    }
    Ok(walk(&tree.root, dims, sizes))
}

/// Flops of [`naive_mode_sketches`] derived from shapes alone.
pub fn naive_sketch_flops(dims: &[usize], sizes: &[usize]) -> u64 {
    (0..dims.len())
        .map(|j| {
            let modes: Vec<usize> = (0..dims.len()).filter(|&k| k != j).collect();
            shape_multi_ttm(&mut dims.to_vec(), &modes, sizes)
        })
        .sum()
}

/// Sketch flops for a cubic `n^d` tensor with all sketch sizes `r`: the
/// closed forms for `3 ≤ d ≤ 5`, the shape recursion otherwise.
pub fn predicted_sketch_flops(n: u64, r: u64, d: usize, with_tree: bool) -> u64 {
    let p = |e: u32| n.pow(e);
    match (d, with_tree) {
        (3, true) => 2 * (2 * r * p(3) + 3 * r * r * p(2)),
        (3, false) => 2 * (3 * r * p(3) + 3 * r * r * p(2)),
        (4, true) => 2 * (2 * r * p(4) + 2 * r.pow(2) * p(3) + 4 * r.pow(3) * p(2)),
        (4, false) => 2 * (4 * r * p(4) + 4 * r.pow(2) * p(3) + 4 * r.pow(3) * p(2)),
        (5, true) => 2 * (2 * r * p(5) + 2 * r.pow(2) * p(4) + 3 * r.pow(3) * p(3) + 5 * r.pow(4) * p(2)),
        (5, false) => 2 * (5 * r * p(5) + 5 * r.pow(2) * p(4) + 5 * r.pow(3) * p(3) + 5 * r.pow(4) * p(2)),
        _ => {
            let dims = vec![n as usize; d];
            let sizes = vec![r as usize; d];
            if with_tree {
                tree_sketch_flops(&dims, &sizes).expect("d >= 1")
            } else {
                naive_sketch_flops(&dims, &sizes)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::{gen_gaussian, RngSpec};

    #[test]
    fn four_way_tree_shape() {
        let t = DimTree::new(4).unwrap();
        let c = t.root().children.as_ref().unwrap();
        assert_eq!(c.0.withheld, 0..2);
        assert_eq!(c.0.applied, vec![2, 3]);
        assert_eq!(c.1.withheld, 2..4);
        assert_eq!(c.1.applied, vec![0, 1]);
        let leaves: Vec<_> = t.leaves().iter().map(|l| (l.withheld.start, l.applied.clone())).collect();
        assert_eq!(leaves, vec![(0, vec![1]), (1, vec![0]), (2, vec![3]), (3, vec![2])]);
    }

    #[test]
    fn odd_split_puts_extra_mode_left() {
        let t = DimTree::new(3).unwrap();
        let c = t.root().children.as_ref().unwrap();
        assert_eq!(c.0.withheld, 0..2);
        assert_eq!(c.1.withheld, 2..3);
        assert_eq!(c.1.applied, vec![0, 1]);
    }

    #[test]
    fn edge_and_ttm_counts() {
        assert_eq!(DimTree::new(1).unwrap().edges(), 0);
        for d in 2..8 {
            assert_eq!(DimTree::new(d).unwrap().edges(), 2 * d - 2);
        }
        assert_eq!(DimTree::new(2).unwrap().ttm_count(), 2);
        assert_eq!(DimTree::new(3).unwrap().ttm_count(), 5);
        assert_eq!(DimTree::new(4).unwrap().ttm_count(), 8);
        assert_eq!(DimTree::new(5).unwrap().ttm_count(), 12);
    }

    #[test]
    fn closed_forms_match_shape_recursion() {
        for d in 3..=5 {
            for (n, r) in [(16u64, 2u64), (9, 3), (512, 2)] {
                let dims = vec![n as usize; d];
                let sizes = vec![r as usize; d];
                assert_eq!(predicted_sketch_flops(n, r, d, true), tree_sketch_flops(&dims, &sizes).unwrap());
                assert_eq!(predicted_sketch_flops(n, r, d, false), naive_sketch_flops(&dims, &sizes));
            }
        }
        assert_eq!(predicted_sketch_flops(16, 2, 3, true), 38912);
        assert_eq!(predicted_sketch_flops(16, 2, 3, false), 55296);
    }

    #[test]
    fn two_way_sketches_are_single_products() {
        let x = DenseTensor::from_fn(&[4, 5], |i| (i[0] * 5 + i[1]) as f64).unwrap();
        let a = gen_gaussian(4, 2, RngSpec::new(1, 0));
        let b = gen_gaussian(5, 3, RngSpec::new(1, 1));
        let ps = [ModeProduct::transposed(0, &a), ModeProduct::transposed(1, &b)];
        let mut c = FlopCounter::new();
        let ys = all_mode_sketches(&x, &ps, Some(&mut c)).unwrap();
        assert_eq!(ys[0], ttm(&x, &b, 1, true).unwrap());
        assert_eq!(ys[1], ttm(&x, &a, 0, true).unwrap());
        assert_eq!(c.ttm_calls(), 2);
    }

    #[test]
    fn single_ttm_is_counted_by_definition() {
        let n = 6;
        let x = DenseTensor::zeros(&[n, n, n]).unwrap();
        let a = DenseMatrix::zeros(2, n);
        let mut c = FlopCounter::new();
        c.ttm(Phase::Sketch, &x, &a, 0, false).unwrap();
        assert_eq!(c.get(Phase::Sketch), 2 * 2 * (n as u64).pow(3));
        assert_eq!(c.ttm_calls(), 1);
    }
}
