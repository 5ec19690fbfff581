//! Strided GEMM and raw tensor-times-matrix kernels shared by the serial
//! tensor type and the grid simulator's local blocks.

/// Read-only strided view of a matrix stored somewhere inside `data`.
#[derive(Clone, Copy)]
pub(crate) struct View<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub cols: usize,
    pub rs: usize,
    pub cs: usize,
}

impl<'a> View<'a> {
    pub fn col_major(data: &'a [f64], rows: usize, cols: usize) -> Self {
        View {
            data,
            rows,
            cols,
            rs: 1,
            cs: rows,
        }
    }

    pub fn t(self) -> Self {
        View {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            rs: self.cs,
            cs: self.rs,
        }
    }

    fn max_index(&self) -> usize {
        (self.rows - 1) * self.rs + (self.cols - 1) * self.cs
    }
}

/// `c = a * b + beta * c` where `c` is column-major `a.rows x b.cols` with
/// leading dimension `ldc`.
pub(crate) fn gemm(a: View<'_>, b: View<'_>, beta: f64, c: &mut [f64], ldc: usize) {
    assert_eq!(a.cols, b.rows, "gemm inner dimension mismatch");
    let (m, k, n) = (a.rows, a.cols, b.cols);
    if m == 0 || n == 0 {
        return;
    }
    assert!(ldc >= m);
    assert!((n - 1) * ldc + m <= c.len(), "gemm output out of bounds");
    if k == 0 {
        for col in 0..n {
            for v in &mut c[col * ldc..col * ldc + m] {
                *v *= beta;
            }
        }
        return;
    }
    assert!(a.max_index() < a.data.len(), "gemm lhs out of bounds");
    assert!(b.max_index() < b.data.len(), "gemm rhs out of bounds");
    // SAFETY: every index touched by dgemm is bounded by the asserts above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr(),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.as_mut_ptr(),
            1,
            ldc as isize,
        );
    }
}

/// Mode-`mode` product of a raw mode-1-fastest tensor with an operator
/// `op` of shape `m x dims[mode]`. Zero-sized dimensions are allowed.
pub(crate) fn ttm_raw(dims: &[usize], data: &[f64], op: View<'_>, mode: usize) -> (Vec<usize>, Vec<f64>) {
    assert_eq!(op.cols, dims[mode], "ttm contraction dimension mismatch");
    let left: usize = dims[..mode].iter().product();
    let right: usize = dims[mode + 1..].iter().product();
    let n = dims[mode];
    let m = op.rows;
    let mut out_dims = dims.to_vec();
    out_dims[mode] = m;
    let mut out = vec![0.0; left * m * right];
    if out.is_empty() {
        return (out_dims, out);
    }
    if n == 0 {
        return (out_dims, out);
    }
    if left == 1 {
        let x = View::col_major(data, n, right);
        gemm(op, x, 0.0, &mut out, m);
    } else {
        let opt = op.t();
        for r in 0..right {
            let xs = &data[r * left * n..(r + 1) * left * n];
            let ys = &mut out[r * left * m..(r + 1) * left * m];
            gemm(View::col_major(xs, left, n), opt, 0.0, ys, left);
        }
    }
    (out_dims, out)
}

/// Number of flops charged for one TTM: `2 * (output elements) * (contraction length)`.
pub(crate) fn ttm_flops(dims: &[usize], mode: usize, rows: usize) -> u64 {
    let others: usize = dims
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != mode)
        .map(|(_, &n)| n)
        .product();
    2 * (others as u64) * (rows as u64) * (dims[mode] as u64)
}

/// Copies the sub-block `ranges[k].0 .. ranges[k].1` of a raw mode-1-fastest tensor.
pub(crate) fn copy_block(dims: &[usize], data: &[f64], ranges: &[(usize, usize)]) -> (Vec<usize>, Vec<f64>) {
    let out_dims: Vec<usize> = ranges.iter().map(|(a, b)| b - a).collect();
    let len: usize = out_dims.iter().product();
    let mut out = Vec::with_capacity(len);
    if len == 0 {
        return (out_dims, out);
    }
    let run = out_dims[0];
    let rows = len / run;
    let mut idx = vec![0usize; dims.len()];
    for _ in 0..rows {
        let mut off = ranges[0].0;
        let mut stride = dims[0];
        for k in 1..dims.len() {
            off += (ranges[k].0 + idx[k]) * stride;
            stride *= dims[k];
        }
        out.extend_from_slice(&data[off..off + run]);
        for k in 1..dims.len() {
            idx[k] += 1;
            if idx[k] < out_dims[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    (out_dims, out)
}

/// Inverse of [`copy_block`]: writes `block` into the given ranges of `data`.
pub(crate) fn place_block(dims: &[usize], data: &mut [f64], ranges: &[(usize, usize)], block: &[f64]) {
    let bdims: Vec<usize> = ranges.iter().map(|(a, b)| b - a).collect();
    let len: usize = bdims.iter().product();
    assert_eq!(len, block.len());
    if len == 0 {
        return;
    }
    let run = bdims[0];
    let mut idx = vec![0usize; dims.len()];
    for chunk in block.chunks(run) {
        let mut off = ranges[0].0;
        let mut stride = dims[0];
        for k in 1..dims.len() {
            off += (ranges[k].0 + idx[k]) * stride;
            stride *= dims[k];
        }
        data[off..off + run].copy_from_slice(chunk);
        for k in 1..dims.len() {
            idx[k] += 1;
            if idx[k] < bdims[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}
