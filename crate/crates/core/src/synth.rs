//! Seeded synthetic tensors with known spectra.

use crate::error::{Error, Result};
use crate::sketch::{gen_gaussian, random_orthonormal, RngSpec, SketchTag};
use crate::tensor::{multi_ttm, DenseTensor, ModeProduct};

fn rng(seed: u64, mode: usize, factor: usize) -> RngSpec {
    RngSpec::tagged(seed, SketchTag::Synth, mode, factor, 0)
}

fn gaussian_tensor(dims: &[usize], spec: RngSpec) -> Result<DenseTensor> {
    let n = dims.iter().product();
    DenseTensor::new(dims.to_vec(), gen_gaussian(n, 1, spec).into_data())
}

fn check_rank(dims: &[usize], rank: &[usize]) -> Result<()> {
    if rank.len() != dims.len() || rank.iter().zip(dims).any(|(&r, &n)| r == 0 || r > n) {
        return Err(Error::InvalidParameter(format!("rank {rank:?} does not fit dims {dims:?}")));
    }
    Ok(())
}

/// Superdiagonal tensor with entries `decay^i` (`i = 0, 1, …`) rotated by an
/// independent Haar orthogonal matrix in every mode. Every unfolding then has
/// singular values `decay^i`.
pub fn synth_geometric(dims: &[usize], decay: f64, seed: u64) -> Result<DenseTensor> {
    if !(decay > 0.0 && decay < 1.0) {
        return Err(Error::InvalidParameter(format!("decay {decay} must lie in (0, 1)")));
    }
    let m = *dims.iter().min().ok_or_else(|| Error::InvalidShape("no modes".into()))?;
    let core_dims = vec![m; dims.len()];
    let mut core = DenseTensor::zeros(&core_dims)?;
    let mut value = 1.0;
    for i in 0..m {
        core.set(&vec![i; dims.len()], value);
        value *= decay;
    }
    let qs: Vec<_> = dims.iter().enumerate().map(|(k, &n)| random_orthonormal(n, m, rng(seed, k, 0)).into_matrix()).collect();
    let ps: Vec<_> = qs.iter().enumerate().map(|(k, q)| ModeProduct::new(k, q)).collect();
    multi_ttm(&core, &ps)
}

/// Gaussian core times orthonormal factors, scaled to unit norm, plus
/// Gaussian noise of norm `noise_rel` (relative to the unit-norm signal).
pub fn synth_lowrank_noise(dims: &[usize], rank: &[usize], noise_rel: f64, seed: u64) -> Result<DenseTensor> {
    check_rank(dims, rank)?;
    if noise_rel < 0.0 {
        return Err(Error::InvalidParameter("noise level must be nonnegative".into()));
    }
    let core = gaussian_tensor(rank, rng(seed, 0, 1))?;
    let us: Vec<_> = dims.iter().zip(rank).enumerate().map(|(k, (&n, &r))| random_orthonormal(n, r, rng(seed, k, 2)).into_matrix()).collect();
    let ps: Vec<_> = us.iter().enumerate().map(|(k, u)| ModeProduct::new(k, u)).collect();
    let mut x = multi_ttm(&core, &ps)?;
    x.scale(1.0 / x.norm());
    if noise_rel > 0.0 {
        let noise = gaussian_tensor(dims, rng(seed, 0, 3))?;
        x.axpy(noise_rel / noise.norm(), &noise)?;
    }
    Ok(x)
}

/// Gaussian core times Gaussian factor matrices; exactly rank `rank`.
pub fn synth_exact_lowrank(dims: &[usize], rank: &[usize], seed: u64) -> Result<DenseTensor> {
    check_rank(dims, rank)?;
    let core = gaussian_tensor(rank, rng(seed, 0, 4))?;
    let fs: Vec<_> = dims.iter().zip(rank).enumerate().map(|(k, (&n, &r))| gen_gaussian(n, r, rng(seed, k, 5))).collect();
    let ps: Vec<_> = fs.iter().enumerate().map(|(k, f)| ModeProduct::new(k, f)).collect();
    multi_ttm(&core, &ps)
}
