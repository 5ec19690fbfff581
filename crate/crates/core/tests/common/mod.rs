//! Property checks shared by the property-test target and the acceptance run.
#![allow(dead_code)]

use ktucker::grid::{aao_mttm, all_modes_multi_ttm, parallel_ttm, DistTensor, GridContext, World};
use ktucker::sketch::{gen_gaussian, gen_srht, plan_subrank_matrix, plan_subrank_vector, RngSpec};
use ktucker::tensor::{fold, multi_ttm, ttm, unfold};
use ktucker::{DenseMatrix, DenseTensor, ModeProduct};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

pub fn tensor(dims: &[usize], seed: u64) -> DenseTensor {
    let n = dims.iter().product();
    DenseTensor::new(dims.to_vec(), gen_gaussian(n, 1, RngSpec::new(seed, 99)).into_data()).unwrap()
}

pub fn dims_strategy(min_order: usize, max_order: usize, max_dim: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1..=max_dim, min_order..=max_order)
}

/// fold(unfold(X)) = X, and every unfolding entry sits at the column given by
/// mode-1-fastest ordering of the remaining indices.
pub fn check_unfold_fold((dims, seed): (Vec<usize>, u64)) -> Result<(), TestCaseError> {
    let x = tensor(&dims, seed);
    for j in 0..dims.len() {
        let m = unfold(&x, j).unwrap();
        prop_assert_eq!(&fold(&m, j, &dims).unwrap(), &x);
        for lin in 0..x.len() {
            let mut idx = Vec::with_capacity(dims.len());
            let mut rest = lin;
            for &n in &dims {
                idx.push(rest % n);
                rest /= n;
            }
            let mut col = 0;
            let mut stride = 1;
            for k in 0..dims.len() {
                if k != j {
                    col += idx[k] * stride;
                    stride *= dims[k];
                }
            }
            prop_assert_eq!(m.get(idx[j], col), x.data()[lin]);
        }
    }
    Ok(())
}

/// vec(X ×_1 A_1 ⋯ ×_d A_d) = (A_d ⊗ ⋯ ⊗ A_1) vec(X).
pub fn check_multi_ttm_kron((dims, outs, seed): (Vec<usize>, Vec<usize>, u64)) -> Result<(), TestCaseError> {
    let x = tensor(&dims, seed);
    let mats: Vec<DenseMatrix> = dims.iter().zip(&outs).enumerate().map(|(k, (&n, &m))| gen_gaussian(m, n, RngSpec::new(seed, k as u64))).collect();
    let products: Vec<ModeProduct<'_>> = mats.iter().enumerate().map(|(k, a)| ModeProduct::new(k, a)).collect();
    let y = multi_ttm(&x, &products).unwrap();
    let mut kron = DenseMatrix::identity(1);
    for a in mats.iter().rev() {
        kron = kron.kron(a);
    }
    let v = DenseMatrix::from_col_major(x.len(), 1, x.data().to_vec()).unwrap();
    let expect = kron.matmul(&v).unwrap();
    let scale = x.norm() * mats.iter().map(|a| a.frobenius_norm()).product::<f64>();
    for (a, b) in y.data().iter().zip(expect.data()) {
        prop_assert!((a - b).abs() <= 1e-12 * scale.max(1.0));
    }
    Ok(())
}

/// TTMs in distinct modes commute.
pub fn check_ttm_commute((dims, i, j, mi, mj, seed): (Vec<usize>, usize, usize, usize, usize, u64)) -> Result<(), TestCaseError> {
    let d = dims.len();
    let (i, j) = (i % d, j % d);
    prop_assume!(i != j);
    let x = tensor(&dims, seed);
    let a = gen_gaussian(mi, dims[i], RngSpec::new(seed, 1));
    let b = gen_gaussian(mj, dims[j], RngSpec::new(seed, 2));
    let ab = ttm(&ttm(&x, &a, i, false).unwrap(), &b, j, false).unwrap();
    let ba = ttm(&ttm(&x, &b, j, false).unwrap(), &a, i, false).unwrap();
    prop_assert!(ab.sub(&ba).unwrap().norm() <= 1e-12 * ab.norm().max(1.0));
    Ok(())
}

/// SRHT columns are orthonormal to machine precision.
pub fn check_srht_orthonormal((log_n, s_frac, seed): (u32, f64, u64)) -> Result<(), TestCaseError> {
    let n = 1usize << log_n;
    let s = ((n as f64 * s_frac).ceil() as usize).clamp(1, n);
    let phi = gen_srht(n, s, RngSpec::new(seed, 0)).unwrap();
    prop_assert!(phi.orthonormality_residual() <= 1e-12);
    Ok(())
}

/// Any plan the planners return satisfies its constraints.
pub fn check_subrank_plans((dims, rank_frac, p): (Vec<usize>, Vec<f64>, usize)) -> Result<(), TestCaseError> {
    let ranks: Vec<usize> = dims.iter().zip(&rank_frac).map(|(&n, f)| ((n as f64 * f) as usize).clamp(1, n)).collect();
    if let Ok((plan, ell)) = plan_subrank_matrix(&dims, &ranks, p, 16) {
        prop_assert!(plan.validate(&ell, &dims).is_ok());
        for j in 0..dims.len() {
            prop_assert!(ell[j] >= ranks[j] + p && ell[j] <= ranks[j] + p + 16 && ell[j] <= dims[j]);
            prop_assert_eq!(plan.get(j, j), 1);
            prop_assert!(plan.row_product(j) >= ell[j]);
        }
    }
    if let Ok(s) = plan_subrank_vector(&ranks, p, &dims) {
        let ell: Vec<usize> = ranks.iter().map(|r| r + p).collect();
        prop_assert!(s.validate(&ell, &dims).is_ok());
        for j in 0..dims.len() {
            prop_assert!(s.product_excluding(j) >= ell[j] && s.product_excluding(j) <= dims[j]);
        }
    }
    Ok(())
}

/// Every collective balances words sent and received.
pub fn check_conservation((q, mult, s, seed): (Vec<usize>, Vec<usize>, usize, u64)) -> Result<(), TestCaseError> {
    let dims: Vec<usize> = q.iter().zip(&mult).map(|(a, b)| a * b).collect();
    let grid = GridContext::new(q.clone()).unwrap();
    let x = tensor(&dims, seed);
    let dx = DistTensor::distribute(&x, &grid).unwrap();
    let phis: Vec<DenseMatrix> = dims.iter().enumerate().map(|(k, &n)| gen_gaussian(n, s, RngSpec::new(seed, k as u64))).collect();
    let all: Vec<ModeProduct<'_>> = phis.iter().enumerate().map(|(k, m)| ModeProduct::transposed(k, m)).collect();
    let mut w = World::new(grid.size());
    parallel_ttm(&mut w, &dx, &all[0]).unwrap();
    aao_mttm(&mut w, &dx, 0, &all[1..]).unwrap();
    all_modes_multi_ttm(&mut w, &dx, &all).unwrap();
    for rec in w.log() {
        prop_assert_eq!(rec.words_sent, rec.words_recv);
    }
    let t = w.stats().total();
    prop_assert_eq!(t.words_sent, t.words_recv);
    Ok(())
}

pub fn unfold_fold_input() -> impl Strategy<Value = (Vec<usize>, u64)> {
    (dims_strategy(1, 4, 5), any::<u64>())
}

pub fn multi_ttm_input() -> impl Strategy<Value = (Vec<usize>, Vec<usize>, u64)> {
    dims_strategy(1, 4, 6).prop_flat_map(|d| {
        let k = d.len();
        (Just(d), prop::collection::vec(1usize..=4, k), any::<u64>())
    })
}

pub fn commute_input() -> impl Strategy<Value = (Vec<usize>, usize, usize, usize, usize, u64)> {
    (dims_strategy(2, 4, 5), 0usize..4, 0usize..4, 1usize..5, 1usize..5, any::<u64>())
}

pub fn srht_input() -> impl Strategy<Value = (u32, f64, u64)> {
    (0u32..8, 0.0f64..1.0, any::<u64>())
}

pub fn subrank_input() -> impl Strategy<Value = (Vec<usize>, Vec<f64>, usize)> {
    prop::collection::vec(8usize..200, 3..=5).prop_flat_map(|d| {
        let k = d.len();
        (Just(d), prop::collection::vec(0.0f64..0.3, k), 0usize..8)
    })
}

pub fn conservation_input() -> impl Strategy<Value = (Vec<usize>, Vec<usize>, usize, u64)> {
    (
        prop::collection::vec(1usize..=3, 3),
        prop::collection::vec(1usize..=3, 3),
        1usize..=4,
        any::<u64>(),
    )
}

fn run<S: Strategy>(strategy: S, cases: u32, check: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    let mut runner = TestRunner::new_with_rng(Config::with_cases(cases), TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, check).map_err(|e| e.to_string())
}

/// Runs every property suite with a fixed seed; one entry per suite.
pub fn all_suites(cases: u32) -> Vec<(&'static str, Result<(), String>)> {
    vec![
        ("unfold/fold roundtrip", run(unfold_fold_input(), cases, check_unfold_fold)),
        ("multi-TTM vs Kronecker oracle", run(multi_ttm_input(), cases, check_multi_ttm_kron)),
        ("TTM mode commutativity", run(commute_input(), cases, check_ttm_commute)),
        ("SRHT orthonormality", run(srht_input(), cases, check_srht_orthonormal)),
        ("subrank plan constraints", run(subrank_input(), cases, check_subrank_plans)),
        ("collective word conservation", run(conservation_input(), cases.min(64), check_conservation)),
    ]
}
