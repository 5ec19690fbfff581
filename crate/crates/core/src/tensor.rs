//! Dense tensors and matrices, unfoldings, and tensor-times-matrix products.
//!
//! Storage is mode-1-fastest (generalized column-major) throughout, so the
//! mode-0 unfolding of a tensor shares its layout with the tensor itself.

use crate::error::{Error, Result};
use crate::kernel::{self, View};

/// Column-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i + i * n] = 1.0;
        }
        m
    }

    /// Builds a matrix from column-major data.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidShape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    /// Builds a matrix from a slice of rows; handy in tests.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::InvalidShape("ragged rows".into()));
        }
        Ok(Self::from_fn(nrows, ncols, |i, j| rows[i][j]))
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { values[i] } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i + j * self.rows]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i + j * self.rows] = v;
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub(crate) fn view(&self) -> View<'_> {
        View::col_major(&self.data, self.rows, self.cols)
    }

    pub fn transpose(&self) -> DenseMatrix {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Contiguous column range `[start, end)`.
    pub fn columns(&self, start: usize, end: usize) -> DenseMatrix {
        assert!(start <= end && end <= self.cols);
        DenseMatrix {
            rows: self.rows,
            cols: end - start,
            data: self.data[start * self.rows..end * self.rows].to_vec(),
        }
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        kernel::gemm(self.view(), other.view(), 0.0, &mut out.data, self.rows.max(1));
        Ok(out)
    }

    /// `self^T * other`.
    pub fn t_matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply ({}x{})^T by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.cols, other.cols);
        kernel::gemm(self.view().t(), other.view(), 0.0, &mut out.data, self.cols.max(1));
        Ok(out)
    }

    /// `self * self^T`.
    pub fn gram(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.rows);
        kernel::gemm(self.view(), self.view().t(), 0.0, &mut out.data, self.rows.max(1));
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch("matrix shapes differ".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scaled(&self, alpha: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * alpha).collect(),
        }
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &DenseMatrix) -> DenseMatrix {
        let (p, q) = other.shape();
        Self::from_fn(self.rows * p, self.cols * q, |i, j| {
            self.get(i / p, j / q) * other.get(i % p, j % q)
        })
    }

    /// `‖MᵀM − I‖_F`.
    pub fn orthonormality_residual(&self) -> f64 {
        let g = self.t_matmul(self).expect("square gram");
        g.sub(&DenseMatrix::identity(self.cols)).expect("same shape").frobenius_norm()
    }
}

/// Matrix with (usually) orthonormal columns: one factor of a Tucker decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorMatrix {
    matrix: DenseMatrix,
    orthonormal: bool,
}

impl FactorMatrix {
    /// Wraps `matrix` after checking `‖FᵀF − I‖_F ≤ 1e-10 · k`.
    pub fn orthonormal(matrix: DenseMatrix) -> Result<Self> {
        if matrix.cols > matrix.rows {
            return Err(Error::InvalidShape(format!(
                "factor has more columns ({}) than rows ({})",
                matrix.cols, matrix.rows
            )));
        }
        let residual = matrix.orthonormality_residual();
        if residual > 1e-10 * (matrix.cols.max(1) as f64) {
            return Err(Error::NotOrthonormal { residual });
        }
        Ok(FactorMatrix {
            matrix,
            orthonormal: true,
        })
    }

    /// Wraps an arbitrary matrix; the orthonormality flag is cleared.
    pub fn general(matrix: DenseMatrix) -> Self {
        FactorMatrix {
            matrix,
            orthonormal: false,
        }
    }

    /// Products of orthonormal-column matrices; skips the residual check.
    pub(crate) fn trusted(matrix: DenseMatrix) -> Self {
        FactorMatrix {
            matrix,
            orthonormal: true,
        }
    }

    pub fn is_orthonormal(&self) -> bool {
        self.orthonormal
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.matrix
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols
    }
}

/// d-way dense array, mode-1-fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        validate_dims(&dims)?;
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(Error::InvalidShape(format!(
                "{} values cannot fill dims {:?}",
                data.len(),
                dims
            )));
        }
        Ok(DenseTensor { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        validate_dims(dims)?;
        Ok(DenseTensor {
            dims: dims.to_vec(),
            data: vec![0.0; dims.iter().product()],
        })
    }

    /// Fills each entry from its multi-index.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        validate_dims(dims)?;
        let len: usize = dims.iter().product();
        let mut idx = vec![0usize; dims.len()];
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f(&idx));
            for (k, i) in idx.iter_mut().enumerate() {
                *i += 1;
                if *i < dims[k] {
                    break;
                }
                *i = 0;
            }
        }
        Ok(DenseTensor {
            dims: dims.to_vec(),
            data,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut lin = 0;
        let mut stride = 1;
        for (i, n) in idx.iter().zip(&self.dims) {
            debug_assert!(i < n);
            lin += i * stride;
            stride *= n;
        }
        lin
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.linear_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let lin = self.linear_index(idx);
        self.data[lin] = v;
    }

    /// Product of all dims.
    pub fn size(&self) -> usize {
        self.data.len()
    }

    /// Product of the dims before `mode`.
    pub fn size_before(&self, mode: usize) -> usize {
        self.dims[..mode].iter().product()
    }

    /// Product of the dims after `mode`.
    pub fn size_after(&self, mode: usize) -> usize {
        self.dims[mode + 1..].iter().product()
    }

    /// Product of all dims except `mode`.
    pub fn size_excluding(&self, mode: usize) -> usize {
        self.size_before(mode) * self.size_after(mode)
    }

    pub fn norm(&self) -> f64 {
        tensor_norm(self)
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(format!(
                "tensor dims {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(DenseTensor {
            dims: self.dims.clone(),
            data,
        })
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    /// Adds `alpha * other` in place.
    pub fn axpy(&mut self, alpha: f64, other: &DenseTensor) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch("axpy dims differ".into()));
        }
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += alpha * b);
        Ok(())
    }

    /// Embeds the tensor in the leading corner of a larger zero tensor.
    pub fn zero_pad(&self, dims: &[usize]) -> Result<DenseTensor> {
        if dims.len() != self.order() || dims.iter().zip(&self.dims).any(|(a, b)| a < b) {
            return Err(Error::InvalidShape(format!(
                "cannot pad {:?} to {:?}",
                self.dims, dims
            )));
        }
        let mut out = DenseTensor::zeros(dims)?;
        let mut idx = vec![0usize; self.order()];
        for &v in &self.data {
            out.set(&idx, v);
            for (k, i) in idx.iter_mut().enumerate() {
                *i += 1;
                if *i < self.dims[k] {
                    break;
                }
                *i = 0;
            }
        }
        Ok(out)
    }

    /// Extracts the sub-block `ranges[k].0 .. ranges[k].1` in every mode.
    pub fn sub_block(&self, ranges: &[(usize, usize)]) -> Result<DenseTensor> {
        if ranges.len() != self.order()
            || ranges.iter().zip(&self.dims).any(|(&(a, b), &n)| a >= b || b > n)
        {
            return Err(Error::InvalidShape(format!("bad block ranges {ranges:?}")));
        }
        let (dims, data) = kernel::copy_block(&self.dims, &self.data, ranges);
        DenseTensor::new(dims, data)
    }
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() {
        return Err(Error::InvalidShape("a tensor needs at least one mode".into()));
    }
    if dims.contains(&0) {
        return Err(Error::InvalidShape(format!("zero-length mode in {dims:?}")));
    }
    Ok(())
}

fn check_mode(t: &DenseTensor, mode: usize) -> Result<()> {
    if mode >= t.order() {
        return Err(Error::ModeOutOfRange {
            mode,
            order: t.order(),
        });
    }
    Ok(())
}

/// Mode-`mode` unfolding: an `n_mode x (∏_{k≠mode} n_k)` matrix whose columns
/// are the mode fibers, remaining indices enumerated mode-1-fastest.
pub fn unfold(t: &DenseTensor, mode: usize) -> Result<DenseMatrix> {
    check_mode(t, mode)?;
    let left = t.size_before(mode);
    let right = t.size_after(mode);
    let n = t.dims[mode];
    if left == 1 {
        return DenseMatrix::from_col_major(n, right, t.data.clone());
    }
    let mut out = vec![0.0; t.len()];
    for r in 0..right {
        for i in 0..n {
            let src = &t.data[(r * n + i) * left..(r * n + i + 1) * left];
            for (l, &v) in src.iter().enumerate() {
                out[i + n * (l + left * r)] = v;
            }
        }
    }
    DenseMatrix::from_col_major(n, left * right, out)
}

/// Inverse of [`unfold`].
pub fn fold(m: &DenseMatrix, mode: usize, dims: &[usize]) -> Result<DenseTensor> {
    validate_dims(dims)?;
    if mode >= dims.len() {
        return Err(Error::ModeOutOfRange {
            mode,
            order: dims.len(),
        });
    }
    let n = dims[mode];
    let left: usize = dims[..mode].iter().product();
    let right: usize = dims[mode + 1..].iter().product();
    if m.rows != n || m.cols != left * right {
        return Err(Error::DimensionMismatch(format!(
            "a {}x{} matrix is not a mode-{mode} unfolding of {dims:?}",
            m.rows, m.cols
        )));
    }
    if left == 1 {
        return DenseTensor::new(dims.to_vec(), m.data.clone());
    }
    let mut out = vec![0.0; m.data.len()];
    for r in 0..right {
        for i in 0..n {
            let dst = &mut out[(r * n + i) * left..(r * n + i + 1) * left];
            for (l, v) in dst.iter_mut().enumerate() {
                *v = m.data[i + n * (l + left * r)];
            }
        }
    }
    DenseTensor::new(dims.to_vec(), out)
}

/// `T ×_mode A` (or `T ×_mode Aᵀ` when `transpose` is set). Pure; `t` is untouched.
pub fn ttm(t: &DenseTensor, a: &DenseMatrix, mode: usize, transpose: bool) -> Result<DenseTensor> {
    check_mode(t, mode)?;
    let op = if transpose { a.view().t() } else { a.view() };
    if op.cols != t.dims[mode] {
        return Err(Error::DimensionMismatch(format!(
            "operator with {} columns cannot act on mode {mode} of size {}",
            op.cols, t.dims[mode]
        )));
    }
    if op.rows == 0 {
        return Err(Error::InvalidShape("ttm operator has no rows".into()));
    }
    let (dims, data) = kernel::ttm_raw(&t.dims, &t.data, op, mode);
    Ok(DenseTensor { dims, data })
}

/// One factor of a multi-TTM.
#[derive(Clone, Copy, Debug)]
pub struct ModeProduct<'a> {
    pub mode: usize,
    pub matrix: &'a DenseMatrix,
    pub transpose: bool,
}

impl<'a> ModeProduct<'a> {
    pub fn new(mode: usize, matrix: &'a DenseMatrix) -> Self {
        ModeProduct {
            mode,
            matrix,
            transpose: false,
        }
    }

    pub fn transposed(mode: usize, matrix: &'a DenseMatrix) -> Self {
        ModeProduct {
            mode,
            matrix,
            transpose: true,
        }
    }

    /// Rows of the effective operator (the new mode size).
    pub fn out_dim(&self) -> usize {
        if self.transpose {
            self.matrix.cols
        } else {
            self.matrix.rows
        }
    }

    /// Columns of the effective operator (the contracted mode size).
    pub fn in_dim(&self) -> usize {
        if self.transpose {
            self.matrix.rows
        } else {
            self.matrix.cols
        }
    }
}

/// Order in which a multi-TTM applies its factors.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum OrderPolicy {
    /// Largest current mode first; ties go to the lower mode index.
    #[default]
    LargestFirst,
    /// Ascending mode index.
    Ascending,
    /// Explicit mode sequence; must list exactly the modes being multiplied.
    Given(Vec<usize>),
}

fn check_products(dims: &[usize], products: &[ModeProduct<'_>]) -> Result<()> {
    let mut seen = vec![false; dims.len()];
    for p in products {
        if p.mode >= dims.len() {
            return Err(Error::ModeOutOfRange {
                mode: p.mode,
                order: dims.len(),
            });
        }
        if seen[p.mode] {
            return Err(Error::DuplicateMode(p.mode));
        }
        seen[p.mode] = true;
        if p.in_dim() != dims[p.mode] {
            return Err(Error::DimensionMismatch(format!(
                "mode {} has size {} but its matrix contracts {}",
                p.mode,
                dims[p.mode],
                p.in_dim()
            )));
        }
    }
    Ok(())
}

/// Indices into `products` in the order they will be applied.
pub fn multi_ttm_order(dims: &[usize], products: &[ModeProduct<'_>], policy: &OrderPolicy) -> Result<Vec<usize>> {
    check_products(dims, products)?;
    let mut order: Vec<usize> = (0..products.len()).collect();
    match policy {
        OrderPolicy::LargestFirst => {
            order.sort_by(|&a, &b| {
                let (ma, mb) = (products[a].mode, products[b].mode);
                dims[mb].cmp(&dims[ma]).then(ma.cmp(&mb))
            });
        }
        OrderPolicy::Ascending => order.sort_by_key(|&i| products[i].mode),
        OrderPolicy::Given(modes) => {
            if modes.len() != products.len() {
                return Err(Error::InvalidParameter("explicit order must list every product".into()));
            }
            order = modes
                .iter()
                .map(|m| {
                    products
                        .iter()
                        .position(|p| p.mode == *m)
                        .ok_or_else(|| Error::InvalidParameter(format!("mode {m} has no matrix")))
                })
                .collect::<Result<_>>()?;
        }
    }
    Ok(order)
}

/// Shape-derived flop count of a multi-TTM under `policy`.
pub fn multi_ttm_flops(dims: &[usize], products: &[ModeProduct<'_>], policy: &OrderPolicy) -> Result<u64> {
    let order = multi_ttm_order(dims, products, policy)?;
    let mut cur = dims.to_vec();
    let mut flops = 0;
    for i in order {
        let p = &products[i];
        flops += kernel::ttm_flops(&cur, p.mode, p.out_dim());
        cur[p.mode] = p.out_dim();
    }
    Ok(flops)
}

/// Multi-TTM with the default largest-mode-first ordering.
pub fn multi_ttm(t: &DenseTensor, products: &[ModeProduct<'_>]) -> Result<DenseTensor> {
    multi_ttm_with_order(t, products, &OrderPolicy::LargestFirst)
}

pub fn multi_ttm_with_order(t: &DenseTensor, products: &[ModeProduct<'_>], policy: &OrderPolicy) -> Result<DenseTensor> {
    let order = multi_ttm_order(&t.dims, products, policy)?;
    let mut cur: Option<DenseTensor> = None;
    for i in order {
        let p = &products[i];
        let src = cur.as_ref().unwrap_or(t);
        cur = Some(ttm(src, p.matrix, p.mode, p.transpose)?);
    }
    Ok(cur.unwrap_or_else(|| t.clone()))
}

/// Gram matrix `T_(mode) T_(mode)ᵀ` without materializing the unfolding.
pub fn mode_gram(t: &DenseTensor, mode: usize) -> Result<DenseMatrix> {
    check_mode(t, mode)?;
    let left = t.size_before(mode);
    let right = t.size_after(mode);
    let n = t.dims[mode];
    let mut g = DenseMatrix::zeros(n, n);
    if left == 1 {
        let x = View::col_major(&t.data, n, right);
        kernel::gemm(x, x.t(), 0.0, &mut g.data, n);
    } else {
        for r in 0..right {
            let xs = View::col_major(&t.data[r * left * n..(r + 1) * left * n], left, n);
            kernel::gemm(xs.t(), xs, 1.0, &mut g.data, n);
        }
    }
    Ok(g)
}

/// `T_(mode) · M` without materializing the unfolding.
pub fn unfolding_times(t: &DenseTensor, mode: usize, m: &DenseMatrix) -> Result<DenseMatrix> {
    check_mode(t, mode)?;
    let left = t.size_before(mode);
    let right = t.size_after(mode);
    let n = t.dims[mode];
    if m.rows != left * right {
        return Err(Error::DimensionMismatch(format!(
            "mode-{mode} unfolding has {} columns but the matrix has {} rows",
            left * right,
            m.rows
        )));
    }
    let mut out = DenseMatrix::zeros(n, m.cols);
    if left == 1 {
        kernel::gemm(View::col_major(&t.data, n, right), m.view(), 0.0, &mut out.data, n);
    } else {
        for r in 0..right {
            let xs = View::col_major(&t.data[r * left * n..(r + 1) * left * n], left, n);
            let mb = View {
                data: &m.data[r * left..],
                rows: left,
                cols: m.cols,
                rs: 1,
                cs: m.rows,
            };
            kernel::gemm(xs.t(), mb, 1.0, &mut out.data, n);
        }
    }
    Ok(out)
}

/// Frobenius-style tensor norm.
pub fn tensor_norm(t: &DenseTensor) -> f64 {
    t.data.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq_tensor(dims: &[usize]) -> DenseTensor {
        let n: usize = dims.iter().product();
        DenseTensor::new(dims.to_vec(), (1..=n).map(|v| v as f64).collect()).unwrap()
    }

    fn pseudo_random(dims: &[usize], salt: u64) -> DenseTensor {
        let mut state = salt.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        DenseTensor::from_fn(dims, |_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
        .unwrap()
    }

    fn pseudo_matrix(rows: usize, cols: usize, salt: u64) -> DenseMatrix {
        let t = pseudo_random(&[rows, cols], salt);
        DenseMatrix::from_col_major(rows, cols, t.into_data()).unwrap()
    }

    #[test]
    fn unfold_two_way_is_identity() {
        let t = seq_tensor(&[3, 4]);
        let m = unfold(&t, 0).unwrap();
        assert_eq!(m.shape(), (3, 4));
        assert_eq!(m.data(), t.data());
    }

    #[test]
    fn unfold_mode_two_of_cube() {
        let t = seq_tensor(&[2, 2, 2]);
        let m = unfold(&t, 1).unwrap();
        let expect = DenseMatrix::from_rows(&[&[1.0, 2.0, 5.0, 6.0], &[3.0, 4.0, 7.0, 8.0]]).unwrap();
        assert_eq!(m, expect);
        let back = fold(&expect, 1, &[2, 2, 2]).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn fold_scalar() {
        let m = DenseMatrix::from_col_major(1, 1, vec![7.0]).unwrap();
        let t = fold(&m, 0, &[1]).unwrap();
        assert_eq!(t.dims(), &[1]);
        assert_eq!(t.data(), &[7.0]);
    }

    #[test]
    fn unfold_rejects_bad_mode() {
        let t = seq_tensor(&[2, 2]);
        assert!(matches!(unfold(&t, 2), Err(Error::ModeOutOfRange { .. })));
        let m = DenseMatrix::zeros(3, 3);
        assert!(matches!(fold(&m, 0, &[2, 2]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn ttm_identity_and_ones() {
        let t = pseudo_random(&[3, 4, 5], 1);
        for j in 0..3 {
            let eye = DenseMatrix::identity(t.dims()[j]);
            assert_eq!(ttm(&t, &eye, j, false).unwrap(), t);
        }
        let ones = DenseTensor::new(vec![2, 2, 2], vec![1.0; 8]).unwrap();
        let row = DenseMatrix::from_rows(&[&[1.0, 1.0]]).unwrap();
        let y = ttm(&ones, &row, 0, false).unwrap();
        assert_eq!(y.dims(), &[1, 2, 2]);
        assert!(y.data().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn ttm_matches_unfolded_matmul() {
        let t = pseudo_random(&[3, 4, 5], 2);
        let a = pseudo_matrix(6, 4, 3);
        let y = ttm(&t, &a, 1, false).unwrap();
        let lhs = unfold(&y, 1).unwrap();
        let rhs = a.matmul(&unfold(&t, 1).unwrap()).unwrap();
        assert!(lhs.sub(&rhs).unwrap().frobenius_norm() <= 1e-13 * rhs.frobenius_norm());
        // transposed operator
        let at = a.transpose();
        let y2 = ttm(&t, &at, 1, true).unwrap();
        assert!(y2.sub(&y).unwrap().norm() <= 1e-14 * y.norm());
        assert!(ttm(&t, &a, 0, false).is_err());
    }

    #[test]
    fn multi_ttm_matches_kronecker_unfolding() {
        let t = pseudo_random(&[3, 3, 3], 4);
        let a = pseudo_matrix(2, 3, 5);
        let b = pseudo_matrix(2, 3, 6);
        let y = multi_ttm(&t, &[ModeProduct::new(1, &a), ModeProduct::new(2, &b)]).unwrap();
        let lhs = unfold(&y, 0).unwrap();
        let rhs = unfold(&t, 0).unwrap().matmul(&b.kron(&a).transpose()).unwrap();
        assert!(lhs.sub(&rhs).unwrap().frobenius_norm() <= 1e-12 * rhs.frobenius_norm());
    }

    #[test]
    fn multi_ttm_empty_and_identity() {
        let t = seq_tensor(&[2, 2, 2]);
        assert_eq!(multi_ttm(&t, &[]).unwrap(), t);
        let eye = DenseMatrix::identity(2);
        let ps: Vec<_> = (0..3).map(|j| ModeProduct::new(j, &eye)).collect();
        assert_eq!(multi_ttm(&t, &ps).unwrap(), t);
    }

    #[test]
    fn multi_ttm_errors() {
        let t = seq_tensor(&[2, 3]);
        let a = DenseMatrix::identity(2);
        let dup = [ModeProduct::new(0, &a), ModeProduct::new(0, &a)];
        assert!(matches!(multi_ttm(&t, &dup), Err(Error::DuplicateMode(0))));
        assert!(matches!(
            multi_ttm(&t, &[ModeProduct::new(1, &a)]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn default_order_is_largest_first() {
        let a = DenseMatrix::zeros(1, 3);
        let b = DenseMatrix::zeros(1, 5);
        let c = DenseMatrix::zeros(1, 5);
        let ps = [ModeProduct::new(0, &a), ModeProduct::new(2, &c), ModeProduct::new(1, &b)];
        let order = multi_ttm_order(&[3, 5, 5], &ps, &OrderPolicy::LargestFirst).unwrap();
        let modes: Vec<usize> = order.iter().map(|&i| ps[i].mode).collect();
        assert_eq!(modes, vec![1, 2, 0]);
    }

    #[test]
    fn norm_values() {
        assert_eq!(DenseTensor::zeros(&[2, 3]).unwrap().norm(), 0.0);
        let t = seq_tensor(&[2, 2, 2]);
        assert!((t.norm() - 204f64.sqrt()).abs() < 1e-14);
        for j in 0..3 {
            assert!((unfold(&t, j).unwrap().frobenius_norm() - t.norm()).abs() < 1e-13);
        }
    }

    #[test]
    fn gram_and_unfolding_products_match_explicit_unfolding() {
        let t = pseudo_random(&[3, 4, 5], 8);
        for j in 0..3 {
            let u = unfold(&t, j).unwrap();
            let g = mode_gram(&t, j).unwrap();
            assert!(g.sub(&u.gram()).unwrap().frobenius_norm() < 1e-13);
            let m = pseudo_matrix(u.cols(), 3, 9 + j as u64);
            let p = unfolding_times(&t, j, &m).unwrap();
            assert!(p.sub(&u.matmul(&m).unwrap()).unwrap().frobenius_norm() < 1e-13);
        }
        assert!(unfolding_times(&t, 0, &DenseMatrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn zero_pad_and_sub_block() {
        let t = seq_tensor(&[2, 3]);
        let p = t.zero_pad(&[4, 4]).unwrap();
        assert_eq!(p.get(&[1, 2]), t.get(&[1, 2]));
        assert_eq!(p.get(&[3, 3]), 0.0);
        assert_eq!(p.norm(), t.norm());
        let back = p.sub_block(&[(0, 2), (0, 3)]).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn size_accessors() {
        let t = DenseTensor::zeros(&[2, 3, 4, 5]).unwrap();
        assert_eq!(t.size(), 120);
        assert_eq!(t.size_before(2), 6);
        assert_eq!(t.size_after(2), 5);
        assert_eq!(t.size_excluding(1), 40);
    }

    #[test]
    fn rejects_bad_dims() {
        assert!(DenseTensor::new(vec![], vec![]).is_err());
        assert!(DenseTensor::new(vec![2, 0], vec![]).is_err());
        assert!(DenseTensor::new(vec![2, 2], vec![0.0; 3]).is_err());
    }
}
