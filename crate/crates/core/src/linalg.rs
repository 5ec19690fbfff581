//! Thin QR, Gram-route leading singular vectors and a direct thin SVD.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tensor::{DenseMatrix, FactorMatrix};

fn to_nalgebra(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_column_slice(m.rows(), m.cols(), m.data())
}

/// Flips the sign of each column so its largest-magnitude entry is positive.
/// Returns the applied signs.
fn fix_column_signs(m: &mut DenseMatrix) -> Vec<f64> {
    let mut signs = Vec::with_capacity(m.cols());
    for j in 0..m.cols() {
        let col = m.col_mut(j);
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for &v in col.iter() {
            if v.abs() > best {
                best = v.abs();
                sign = if v < 0.0 { -1.0 } else { 1.0 };
            }
        }
        if sign < 0.0 {
            col.iter_mut().for_each(|v| *v = -*v);
        }
        signs.push(sign);
    }
    signs
}

/// Householder thin QR. `R` has a nonnegative diagonal.
pub fn thin_qr(m: &DenseMatrix) -> Result<(FactorMatrix, DenseMatrix)> {
    let (rows, cols) = m.shape();
    if rows < cols {
        return Err(Error::InvalidShape(format!(
            "thin QR needs rows >= cols, got {rows}x{cols}"
        )));
    }
    let mut a = m.data().to_vec();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(cols);
    for k in 0..cols {
        let x = &a[k * rows + k..(k + 1) * rows];
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut v = x.to_vec();
        if norm == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        if vnorm2 == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        for j in k..cols {
            let col = &mut a[j * rows + k..(j + 1) * rows];
            let dot: f64 = v.iter().zip(col.iter()).map(|(p, q)| p * q).sum();
            let f = 2.0 * dot / vnorm2;
            col.iter_mut().zip(&v).for_each(|(c, p)| *c -= f * p);
        }
        let scale = vnorm2.sqrt();
        v.iter_mut().for_each(|t| *t /= scale);
        reflectors.push(v);
    }
    let mut r = DenseMatrix::from_fn(cols, cols, |i, j| if i <= j { a[i + j * rows] } else { 0.0 });
    let mut q = DenseMatrix::from_fn(rows, cols, |i, j| if i == j { 1.0 } else { 0.0 });
    for k in (0..cols).rev() {
        let v = &reflectors[k];
        if v.is_empty() {
            continue;
        }
        for j in 0..cols {
            let col = &mut q.col_mut(j)[k..];
            let dot: f64 = v.iter().zip(col.iter()).map(|(p, t)| p * t).sum();
            col.iter_mut().zip(v).for_each(|(c, p)| *c -= 2.0 * dot * p);
        }
    }
    for i in 0..cols {
        if r.get(i, i) < 0.0 {
            for j in i..cols {
                r.set(i, j, -r.get(i, j));
            }
            q.col_mut(i).iter_mut().for_each(|v| *v = -*v);
        }
    }
    Ok((FactorMatrix::trusted(q), r))
}

/// Top-`k` left singular vectors and singular values of `m`, from the
/// eigendecomposition of the Gram matrix `m mᵀ`.
pub fn leading_left_singular_vectors(m: &DenseMatrix, k: usize) -> Result<(FactorMatrix, Vec<f64>)> {
    let rows = m.rows();
    if k == 0 || k > rows {
        return Err(Error::InvalidParameter(format!(
            "cannot take {k} singular vectors of a matrix with {rows} rows"
        )));
    }
    let gram = m.gram();
    gram_leading_vectors(&gram, k)
}

/// Leading eigenvectors of a symmetric positive semidefinite Gram matrix,
/// returned as singular vectors with values `sqrt(max(λ, 0))`.
pub(crate) fn gram_leading_vectors(gram: &DenseMatrix, k: usize) -> Result<(FactorMatrix, Vec<f64>)> {
    let n = gram.rows();
    let eig = nalgebra::SymmetricEigen::new(to_nalgebra(gram));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut u = DenseMatrix::from_fn(n, k, |i, j| eig.eigenvectors[(i, order[j])]);
    fix_column_signs(&mut u);
    let values = order[..k].iter().map(|&i| eig.eigenvalues[i].max(0.0).sqrt()).collect();
    Ok((FactorMatrix::trusted(u), values))
}

/// Thin SVD `M = U Σ Vᵀ` with descending singular values, computed directly
/// (no Gram matrix). Each left singular vector has its largest-magnitude entry positive.
pub fn thin_svd(m: &DenseMatrix) -> Result<(DenseMatrix, Vec<f64>, DenseMatrix)> {
    let (rows, cols) = m.shape();
    let kmin = rows.min(cols);
    if kmin == 0 {
        return Err(Error::InvalidShape("empty matrix".into()));
    }
    let svd = nalgebra::SVD::new(to_nalgebra(m), true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::InvalidParameter("SVD did not converge".into())),
    };
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..kmin).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    let mut uu = DenseMatrix::from_fn(rows, kmin, |i, j| u[(i, order[j])]);
    let mut vv = DenseMatrix::from_fn(cols, kmin, |i, j| vt[(order[j], i)]);
    let signs = fix_column_signs(&mut uu);
    for (j, sign) in signs.into_iter().enumerate() {
        if sign < 0.0 {
            vv.col_mut(j).iter_mut().for_each(|v| *v = -*v);
        }
    }
    let values = order.iter().map(|&i| s[i]).collect();
    Ok((uu, values, vv))
}

/// All singular values, descending, via a direct SVD.
pub fn singular_values(m: &DenseMatrix) -> Vec<f64> {
    if m.rows() == 0 || m.cols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = nalgebra::SVD::new(to_nalgebra(m), false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut state = seed;
        DenseMatrix::from_fn(rows, cols, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
    }

    /// One-sided Jacobi SVD: singular values as column norms after orthogonalization.
    fn jacobi_singular_values(m: &DenseMatrix) -> Vec<f64> {
        let mut a = if m.rows() >= m.cols() { m.clone() } else { m.transpose() };
        let n = a.cols();
        for _ in 0..60 {
            let mut off = 0.0f64;
            for p in 0..n {
                for q in p + 1..n {
                    let (cp, cq) = (a.col(p).to_vec(), a.col(q).to_vec());
                    let alpha: f64 = cp.iter().map(|v| v * v).sum();
                    let beta: f64 = cq.iter().map(|v| v * v).sum();
                    let gamma: f64 = cp.iter().zip(&cq).map(|(x, y)| x * y).sum();
                    if gamma == 0.0 {
                        continue;
                    }
                    off = off.max(gamma.abs() / (alpha * beta).sqrt());
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let t = if zeta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for i in 0..a.rows() {
                        let (x, y) = (cp[i], cq[i]);
                        a.set(i, p, c * x - s * y);
                        a.set(i, q, s * x + c * y);
                    }
                }
            }
            if off < 1e-15 {
                break;
            }
        }
        let mut s: Vec<f64> = (0..n).map(|j| a.col(j).iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
        s.sort_by(|x, y| y.total_cmp(x));
        s
    }

    #[test]
    fn qr_of_identity_and_scaled_identity() {
        let (q, r) = thin_qr(&DenseMatrix::identity(4)).unwrap();
        assert_eq!(q.matrix(), &DenseMatrix::identity(4));
        assert_eq!(r, DenseMatrix::identity(4));
        let (q, r) = thin_qr(&DenseMatrix::identity(3).scaled(2.0)).unwrap();
        assert_eq!(q.matrix(), &DenseMatrix::identity(3));
        assert_eq!(r, DenseMatrix::identity(3).scaled(2.0));
    }

    #[test]
    fn qr_random_tall() {
        let m = lcg_matrix(50, 8, 7);
        let (q, r) = thin_qr(&m).unwrap();
        let recon = q.matrix().matmul(&r).unwrap();
        assert!(recon.sub(&m).unwrap().frobenius_norm() <= 1e-10 * m.frobenius_norm());
        assert!(q.matrix().orthonormality_residual() <= 1e-10 * 8.0);
        for i in 0..8 {
            assert!(r.get(i, i) >= 0.0);
            for j in 0..i {
                assert_eq!(r.get(i, j), 0.0);
            }
        }
        assert!(thin_qr(&lcg_matrix(3, 5, 1)).is_err());
    }

    #[test]
    fn qr_rank_deficient_keeps_orthonormal_q() {
        let mut m = lcg_matrix(10, 4, 3);
        let c0 = m.col(0).to_vec();
        m.col_mut(2).copy_from_slice(&c0);
        m.col_mut(3).iter_mut().for_each(|v| *v = 0.0);
        let (q, r) = thin_qr(&m).unwrap();
        assert!(q.matrix().orthonormality_residual() < 1e-12);
        assert!(q.matrix().matmul(&r).unwrap().sub(&m).unwrap().frobenius_norm() < 1e-12);
    }

    #[test]
    fn leading_vectors_of_diagonal() {
        let m = DenseMatrix::diagonal(&[3.0, 2.0, 1.0]);
        let (u, s) = leading_left_singular_vectors(&m, 2).unwrap();
        assert!((s[0] - 3.0).abs() < 1e-12 && (s[1] - 2.0).abs() < 1e-12);
        let expect = DenseMatrix::identity(3).columns(0, 2);
        assert!(u.matrix().sub(&expect).unwrap().frobenius_norm() < 1e-12);
        assert!(leading_left_singular_vectors(&m, 0).is_err());
        assert!(leading_left_singular_vectors(&m, 4).is_err());
    }

    #[test]
    fn leading_vector_of_rank_one() {
        let u = [1.0, -3.0, 2.0];
        let v = [0.5, 0.5, 0.5, 0.5];
        let m = DenseMatrix::from_fn(3, 4, |i, j| u[i] * v[j]);
        let (f, s) = leading_left_singular_vectors(&m, 1).unwrap();
        let norm = 14f64.sqrt();
        assert!((s[0] - norm).abs() < 1e-12);
        // sign convention: largest-magnitude entry positive
        let expect = [-1.0 / norm, 3.0 / norm, -2.0 / norm];
        for i in 0..3 {
            assert!((f.matrix().get(i, 0) - expect[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn leading_values_match_jacobi_oracle() {
        let m = lcg_matrix(20, 60, 11);
        let (_, s) = leading_left_singular_vectors(&m, 5).unwrap();
        let oracle = jacobi_singular_values(&m);
        for i in 0..5 {
            assert!((s[i] - oracle[i]).abs() <= 1e-9 * oracle[i]);
        }
    }

    #[test]
    fn thin_svd_cases() {
        let (u, s, v) = thin_svd(&DenseMatrix::identity(3)).unwrap();
        assert_eq!(s, vec![1.0, 1.0, 1.0]);
        assert!(u.matmul(&v.transpose()).unwrap().sub(&DenseMatrix::identity(3)).unwrap().frobenius_norm() < 1e-14);
        let (_, s, _) = thin_svd(&DenseMatrix::diagonal(&[1.0, 3.0, 2.0])).unwrap();
        assert!((s[0] - 3.0).abs() < 1e-14 && (s[1] - 2.0).abs() < 1e-14 && (s[2] - 1.0).abs() < 1e-14);
        let m = lcg_matrix(8, 12, 5);
        let (u, s, v) = thin_svd(&m).unwrap();
        let recon = u.matmul(&DenseMatrix::diagonal(&s)).unwrap().matmul(&v.transpose()).unwrap();
        assert!(recon.sub(&m).unwrap().frobenius_norm() < 1e-10 * m.frobenius_norm());
        let oracle = jacobi_singular_values(&m);
        for (a, b) in s.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
