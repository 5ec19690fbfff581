//! Probabilistic error bounds for the Kronecker-sketched algorithms and
//! Monte-Carlo checks of their failure rates.
//!
//! Admissibility of `(α, β)` is reported as a flag (with a warning) rather
//! than an error: the bounds stay computable outside the admissible region,
//! they are just not backed by the theory there.

use crate::error::{Error, Result};
use crate::linalg::singular_values;
use crate::sketch::{gen_srht, random_orthonormal, RngSpec, SketchTag};
use crate::tensor::{multi_ttm, unfold, DenseMatrix, DenseTensor, FactorMatrix, ModeProduct};
use crate::tucker::{decompose, rand_range_finder, reconstruct, Algorithm, RandomizedOptions, TuckerDecomposition};

/// Descending singular values of every mode unfolding.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralProfile {
    values: Vec<Vec<f64>>,
}

impl SpectralProfile {
    pub fn from_values(values: Vec<Vec<f64>>) -> Self {
        SpectralProfile { values }
    }

    pub fn order(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self, j: usize) -> &[f64] {
        &self.values[j]
    }

    /// `Σ_{i>k} σ_i²` for mode `j` (1-based `i`).
    pub fn tail(&self, j: usize, k: usize) -> f64 {
        self.values[j].iter().skip(k).map(|s| s * s).sum()
    }

    /// `Σ_{i=a+1}^{b} σ_i²` for mode `j`.
    pub fn band(&self, j: usize, a: usize, b: usize) -> f64 {
        self.tail(j, a) - self.tail(j, b.max(a))
    }
}

/// Singular spectra of all unfoldings by direct SVD.
pub fn spectral_profile(x: &DenseTensor) -> Result<SpectralProfile> {
    let values = (0..x.order()).map(|j| Ok(singular_values(&unfold(x, j)?))).collect::<Result<_>>()?;
    Ok(SpectralProfile { values })
}

/// Whether `min{m, n} > ℓ ≥ α²β/(α−1)²·(r²+r)` holds.
pub fn admissible(alpha: f64, beta: f64, r: usize, ell: usize, m: usize, n: usize) -> bool {
    let r = r as f64;
    alpha > 1.0 && beta > 1.0 && m.min(n) > ell && ell as f64 >= alpha * alpha * beta / ((alpha - 1.0) * (alpha - 1.0)) * (r * r + r)
}

fn check_alpha_beta(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 1.0 && beta > 1.0) {
        return Err(Error::InvalidParameter(format!("need α, β > 1 (got {alpha}, {beta})")));
    }
    Ok(())
}

/// Range-finder bound `√((1 + αn/ℓ)·Σ_{i>r} σ_i²)` for a matrix with
/// singular values `svals` sketched by a Kronecker SRHT with `n` rows and
/// `ℓ` columns.
pub fn matrix_bound_rhs(svals: &[f64], r: usize, ell: usize, n: usize, alpha: f64) -> Result<f64> {
    if alpha <= 1.0 || ell == 0 {
        return Err(Error::InvalidParameter(format!("need α > 1 and ℓ ≥ 1 (got {alpha}, {ell})")));
    }
    let tail: f64 = svals.iter().skip(r).map(|s| s * s).sum();
    Ok(((1.0 + alpha * n as f64 / ell as f64) * tail).sqrt())
}

/// Per-mode parameters of the tensor bounds: `ℓ_j` is the sketch width used
/// for mode `j` and `n_other[j] = ∏_{k≠j} n_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundParams {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub ell: Vec<usize>,
    pub n_other: Vec<usize>,
}

impl BoundParams {
    /// Same `α`, `β` for every mode.
    pub fn uniform(dims: &[usize], ell: &[usize], alpha: f64, beta: f64) -> Self {
        let total: usize = dims.iter().product();
        BoundParams {
            alpha: vec![alpha; dims.len()],
            beta: vec![beta; dims.len()],
            ell: ell.to_vec(),
            n_other: dims.iter().map(|&n| total / n).collect(),
        }
    }

    /// Admissibility per mode for target ranks `ranks` and mode sizes `dims`.
    pub fn admissible(&self, ranks: &[usize], dims: &[usize]) -> Vec<bool> {
        (0..ranks.len())
            .map(|j| admissible(self.alpha[j], self.beta[j], ranks[j], self.ell[j], dims[j], self.n_other[j]))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundEvaluation {
    pub bound: f64,
    /// `Σ_j 1/β_j²`.
    pub failure_probability: f64,
    pub admissible: bool,
}

/// `√(Σ_j (1 + α_j n_j⊘/ℓ_j)·Σ_{i>ℓ_j} σ_i²) + √(Σ_j Σ_{i=r_j+1}^{ℓ_j} σ_i²)`
/// with failure probability `Σ_j 1/β_j²`, for the HOSVD-type algorithms.
pub fn tensor_bound_rhs(profile: &SpectralProfile, ranks: &[usize], params: &BoundParams) -> Result<BoundEvaluation> {
    let d = profile.order();
    if ranks.len() != d || params.alpha.len() != d || params.beta.len() != d || params.ell.len() != d || params.n_other.len() != d {
        return Err(Error::DimensionMismatch("bound parameters do not match the tensor order".into()));
    }
    let mut rand = 0.0;
    let mut core = 0.0;
    let mut fail = 0.0;
    let mut ok = true;
    for j in 0..d {
        check_alpha_beta(params.alpha[j], params.beta[j])?;
        let ell = params.ell[j];
        rand += (1.0 + params.alpha[j] * params.n_other[j] as f64 / ell as f64) * profile.tail(j, ell);
        core += profile.band(j, ranks[j], ell);
        fail += 1.0 / (params.beta[j] * params.beta[j]);
        ok &= admissible(params.alpha[j], params.beta[j], ranks[j], ell, profile.values(j).len(), params.n_other[j]);
    }
    if !ok {
        log::warn!("bound parameters are outside the admissible region; the bound is not guaranteed");
    }
    Ok(BoundEvaluation {
        bound: rand.sqrt() + core.sqrt(),
        failure_probability: fail,
        admissible: ok,
    })
}

/// The sequentially truncated variant's bound; its right-hand side has the
/// same form as [`tensor_bound_rhs`].
pub fn sthosvd_bound_rhs(profile: &SpectralProfile, ranks: &[usize], params: &BoundParams) -> Result<BoundEvaluation> {
    tensor_bound_rhs(profile, ranks, params)
}

/// Outcome of a Monte-Carlo failure-rate experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct MonteCarloReport {
    pub trials: usize,
    pub violations: usize,
    pub failure_probability: f64,
    pub admissible: bool,
    /// Median of the measured quantity and the bound it was compared with.
    pub median_measured: f64,
    pub bound: f64,
}

impl MonteCarloReport {
    pub fn rate(&self) -> f64 {
        self.violations as f64 / self.trials.max(1) as f64
    }

    /// Binomial standard error at the theoretical failure probability.
    pub fn stderr(&self) -> f64 {
        let f = self.failure_probability.clamp(0.0, 1.0);
        (f * (1.0 - f) / self.trials.max(1) as f64).sqrt()
    }

    /// `rate ≤ failure probability + 3·stderr`.
    pub fn within_tolerance(&self) -> bool {
        self.rate() <= self.failure_probability + 3.0 * self.stderr()
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn kron_srht(n: &[usize], s: &[usize], seed: u64, trial: u32) -> Result<DenseMatrix> {
    let mut omega = DenseMatrix::identity(1);
    for (k, (&nk, &sk)) in n.iter().zip(s).enumerate() {
        omega = omega.kron(&gen_srht(nk, sk, RngSpec::tagged(seed, SketchTag::Trial, k, 0, trial))?);
    }
    Ok(omega)
}

fn check_kron_dims(n: &[usize], s: &[usize]) -> Result<()> {
    if n.is_empty() || n.len() != s.len() {
        return Err(Error::DimensionMismatch("need one sketch size per Kronecker factor".into()));
    }
    Ok(())
}

/// Draws Haar `r`-dimensional subspaces `V₁` of `R^N` (`N = ∏ n_k`) and
/// Kronecker SRHT matrices `Ω` with `ℓ = ∏ s_k` columns, and counts trials
/// with `1/σ²_min(V₁ᵀΩ) > αN/ℓ`.
pub fn omega1_monte_carlo(n: &[usize], s: &[usize], r: usize, trials: usize, alpha: f64, beta: f64, seed: u64) -> Result<MonteCarloReport> {
    check_kron_dims(n, s)?;
    check_alpha_beta(alpha, beta)?;
    let big_n: usize = n.iter().product();
    let ell: usize = s.iter().product();
    if r == 0 || r > ell {
        return Err(Error::InvalidParameter(format!("subspace dimension {r} must lie in 1..={ell}")));
    }
    let ok = admissible(alpha, beta, r, ell, big_n, big_n) || (ell == big_n && alpha * big_n as f64 / ell as f64 >= 1.0);
    if !ok {
        log::warn!("omega1 parameters are outside the admissible region");
    }
    let limit = alpha * big_n as f64 / ell as f64;
    let mut measured = Vec::with_capacity(trials);
    let mut violations = 0;
    for t in 0..trials {
        let v1 = random_orthonormal(big_n, r, RngSpec::tagged(seed, SketchTag::Trial, 0, 1, t as u32));
        let omega = kron_srht(n, s, seed, t as u32)?;
        let o1 = v1.matrix().t_matmul(&omega)?;
        let smin = *singular_values(&o1).get(r - 1).unwrap_or(&0.0);
        let inv = 1.0 / (smin * smin);
        if inv > limit {
            violations += 1;
        }
        measured.push(inv);
    }
    Ok(MonteCarloReport {
        trials,
        violations,
        failure_probability: 1.0 / (beta * beta),
        admissible: ok,
        median_measured: median(&mut measured),
        bound: limit,
    })
}

/// Range finder with Kronecker SRHT sketches on `m` (whose column count is
/// `∏ n_k`), counting trials whose error exceeds [`matrix_bound_rhs`].
#[allow(clippy::too_many_arguments)]
pub fn matrix_bound_monte_carlo(m: &DenseMatrix, r: usize, n: &[usize], s: &[usize], alpha: f64, beta: f64, trials: usize, seed: u64) -> Result<MonteCarloReport> {
    check_kron_dims(n, s)?;
    check_alpha_beta(alpha, beta)?;
    let big_n: usize = n.iter().product();
    if big_n != m.cols() {
        return Err(Error::DimensionMismatch(format!("Kronecker sketch has {big_n} rows but the matrix has {} columns", m.cols())));
    }
    let ell: usize = s.iter().product();
    let ok = admissible(alpha, beta, r, ell, m.rows(), m.cols());
    if !ok {
        log::warn!("matrix bound parameters are outside the admissible region");
    }
    let bound = matrix_bound_rhs(&singular_values(m), r, ell, big_n, alpha)?;
    let mut measured = Vec::with_capacity(trials);
    let mut violations = 0;
    for t in 0..trials {
        let omega = kron_srht(n, s, seed, t as u32)?;
        let q = rand_range_finder(m, &omega)?;
        let proj = q.matrix().matmul(&q.matrix().t_matmul(m)?)?;
        let err = m.sub(&proj)?.frobenius_norm();
        if err > bound {
            violations += 1;
        }
        measured.push(err);
    }
    Ok(MonteCarloReport {
        trials,
        violations,
        failure_probability: 1.0 / (beta * beta),
        admissible: ok,
        median_measured: median(&mut measured),
        bound,
    })
}

/// Runs `algorithm` for `trials` seeds (`opts.seed + t`) and counts absolute
/// errors above the matching tensor bound. `ℓ_j` is the sketch width each
/// run actually used.
pub fn tensor_bound_monte_carlo(
    x: &DenseTensor,
    algorithm: Algorithm,
    ranks: &[usize],
    opts: &RandomizedOptions,
    alpha: f64,
    beta: f64,
    trials: usize,
) -> Result<MonteCarloReport> {
    if !algorithm.is_randomized() {
        return Err(Error::InvalidParameter(format!("{algorithm} is deterministic")));
    }
    let profile = spectral_profile(x)?;
    let mut measured = Vec::with_capacity(trials);
    let mut violations = 0;
    let mut eval = None;
    for t in 0..trials {
        let o = RandomizedOptions {
            seed: opts.seed.wrapping_add(t as u64),
            ..opts.clone()
        };
        let dec = decompose(x, algorithm, ranks, &o)?;
        let params = BoundParams::uniform(x.dims(), &dec.provenance.sketch_sizes, alpha, beta);
        let e = match algorithm {
            Algorithm::Rsthosvd | Algorithm::RsthosvdKron => sthosvd_bound_rhs(&profile, ranks, &params)?,
            _ => tensor_bound_rhs(&profile, ranks, &params)?,
        };
        let err = x.sub(&reconstruct(&dec)?)?.norm();
        if err > e.bound {
            violations += 1;
        }
        measured.push(err);
        eval = Some(e);
    }
    let e = eval.ok_or_else(|| Error::InvalidParameter("need at least one trial".into()))?;
    Ok(MonteCarloReport {
        trials,
        violations,
        failure_probability: e.failure_probability,
        admissible: e.admissible,
        median_measured: median(&mut measured),
        bound: e.bound,
    })
}

/// Result of comparing mode spectra of `Y = X ×_j U_jᵀ` against `X`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoreSvalsReport {
    pub holds: bool,
    /// Largest `σ_i(Y_(j)) − σ_i(X_(j))` observed.
    pub max_excess: f64,
}

/// Checks `σ_i(Y_(j)) ≤ σ_i(X_(j)) + 1e-10` for every mode and every
/// `i ≤ min(ℓ_j, ℓ_j⊘)`.
pub fn lemma_core_svals_check(x: &DenseTensor, us: &[FactorMatrix]) -> Result<CoreSvalsReport> {
    if us.len() != x.order() {
        return Err(Error::DimensionMismatch(format!("{} factors for a {}-way tensor", us.len(), x.order())));
    }
    for u in us {
        let residual = u.matrix().orthonormality_residual();
        if residual > 1e-10 * u.cols().max(1) as f64 {
            return Err(Error::NotOrthonormal { residual });
        }
    }
    let products: Vec<ModeProduct<'_>> = us.iter().enumerate().map(|(j, u)| ModeProduct::transposed(j, u.matrix())).collect();
    let y = multi_ttm(x, &products)?;
    let mut max_excess = f64::NEG_INFINITY;
    for j in 0..x.order() {
        let sx = singular_values(&unfold(x, j)?);
        let sy = singular_values(&unfold(&y, j)?);
        for (a, b) in sy.iter().zip(&sx) {
            max_excess = max_excess.max(a - b);
        }
    }
    Ok(CoreSvalsReport {
        holds: max_excess <= 1e-10,
        max_excess,
    })
}

/// Measured split of the error of a randomized run into the sketching part
/// and the core-truncation part.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorDecomposition {
    pub total: f64,
    /// `‖X − X ×_j Û_jÛ_jᵀ‖`.
    pub rand: f64,
    /// `‖Ĝ − G ×_j V_j‖`.
    pub core: f64,
    /// `Σ_j Σ_{i=r_j+1}^{ℓ_j} σ_i²(X_(j))`.
    pub core_bound_sq: f64,
}

impl ErrorDecomposition {
    pub fn triangle_holds(&self) -> bool {
        self.total <= self.rand + self.core + 1e-10
    }

    pub fn core_within_bound(&self) -> bool {
        self.core * self.core <= self.core_bound_sq + 1e-10
    }
}

/// Requires a decomposition produced with `keep_intermediate`.
pub fn error_decomposition(x: &DenseTensor, t: &TuckerDecomposition, profile: &SpectralProfile) -> Result<ErrorDecomposition> {
    let inter = t.intermediate.as_ref().ok_or(Error::MissingIntermediate("sketched bases and untruncated core"))?;
    let total = x.sub(&reconstruct(t)?)?.norm();
    let down: Vec<ModeProduct<'_>> = inter.bases.iter().enumerate().map(|(j, u)| ModeProduct::transposed(j, u.matrix())).collect();
    let up: Vec<ModeProduct<'_>> = inter.bases.iter().enumerate().map(|(j, u)| ModeProduct::new(j, u.matrix())).collect();
    let projected = multi_ttm(&multi_ttm(x, &down)?, &up)?;
    let rand = x.sub(&projected)?.norm();
    let vs: Vec<DenseMatrix> = inter
        .bases
        .iter()
        .zip(&t.factors)
        .map(|(b, u)| b.matrix().t_matmul(u.matrix()))
        .collect::<Result<_>>()?;
    let vp: Vec<ModeProduct<'_>> = vs.iter().enumerate().map(|(j, v)| ModeProduct::new(j, v)).collect();
    let core = inter.core.sub(&multi_ttm(&t.core, &vp)?)?.norm();
    let core_bound_sq = (0..x.order()).map(|j| profile.band(j, t.core.dims()[j], inter.bases[j].cols())).sum();
    Ok(ErrorDecomposition {
        total,
        rand,
        core,
        core_bound_sq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_exact_lowrank, synth_geometric};

    #[test]
    fn superdiagonal_profile() {
        let mut x = DenseTensor::zeros(&[3, 3, 3]).unwrap();
        for (i, v) in [3.0, 2.0, 1.0].into_iter().enumerate() {
            x.set(&[i, i, i], v);
        }
        let p = spectral_profile(&x).unwrap();
        for j in 0..3 {
            for (a, b) in p.values(j).iter().zip([3.0, 2.0, 1.0]) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!((p.tail(j, 0) - 14.0).abs() < 1e-12);
            assert_eq!(p.tail(j, 3), 0.0);
        }
    }

    #[test]
    fn rotated_superdiagonal_profile() {
        let x = synth_geometric(&[12, 12, 12], 0.4, 1).unwrap();
        let p = spectral_profile(&x).unwrap();
        for j in 0..3 {
            for (i, v) in p.values(j).iter().enumerate() {
                assert!((v - 0.4f64.powi(i as i32)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn identity_spectrum_matrix_bound() {
        let b = matrix_bound_rhs(&[1.0; 16], 2, 8, 16, 2.0).unwrap();
        assert!((b - 70f64.sqrt()).abs() < 1e-12);
        assert_eq!(matrix_bound_rhs(&[2.0, 1.0, 0.0], 2, 2, 4, 2.0).unwrap(), 0.0);
        assert!(matrix_bound_rhs(&[1.0], 0, 1, 1, 1.0).is_err());
    }

    #[test]
    fn geometric_core_term() {
        let x = synth_geometric(&[20, 20, 20], 0.4, 2).unwrap();
        let p = spectral_profile(&x).unwrap();
        let params = BoundParams::uniform(x.dims(), &[15; 3], 2.0, 2.0);
        let core: f64 = (3.0 * (11..=15).map(|i| 0.16f64.powi(i - 1)).sum::<f64>()).sqrt();
        let rand: f64 = (0..3).map(|_| (1.0 + 2.0 * 400.0 / 15.0) * (15..20).map(|i| 0.16f64.powi(i)).sum::<f64>()).sum::<f64>().sqrt();
        let e = tensor_bound_rhs(&p, &[10; 3], &params).unwrap();
        assert!((e.bound - core - rand).abs() < 1e-12 * core);
        assert!((e.failure_probability - 0.75).abs() < 1e-15);
        assert!(!e.admissible);
    }

    #[test]
    fn exact_rank_bound_is_zero() {
        let x = synth_exact_lowrank(&[8, 8, 8], &[2, 2, 2], 3).unwrap();
        let p = spectral_profile(&x).unwrap();
        let e = tensor_bound_rhs(&p, &[2; 3], &BoundParams::uniform(x.dims(), &[2; 3], 3.0, 2.0)).unwrap();
        assert!(e.bound < 1e-10 * x.norm());
    }

    #[test]
    fn admissibility_example() {
        assert!(admissible(5.0, 1.2, 1, 4, 64, 64));
        assert!(!admissible(5.0, 1.2, 1, 3, 64, 64));
        assert!(!admissible(5.0, 1.2, 1, 4, 4, 64));
    }

    #[test]
    fn full_hadamard_never_violates() {
        let r = omega1_monte_carlo(&[8], &[8], 3, 20, 2.0, 2.0, 1).unwrap();
        assert_eq!(r.violations, 0);
        assert!((r.median_measured - 1.0).abs() < 1e-10);
    }

    #[test]
    fn omega1_small_kronecker() {
        let r = omega1_monte_carlo(&[8, 8], &[2, 2], 1, 500, 5.0, 1.2, 7).unwrap();
        assert!(r.admissible);
        assert!(r.within_tolerance());
        let wider = omega1_monte_carlo(&[8, 8], &[4, 4], 1, 500, 5.0, 1.2, 7).unwrap();
        assert!(wider.median_measured < r.median_measured);
    }

    #[test]
    fn core_svals_cases() {
        let x = synth_exact_lowrank(&[8, 8, 8], &[8, 8, 8], 9).unwrap();
        let full: Vec<_> = (0..3).map(|k| random_orthonormal(8, 8, RngSpec::new(10, k))).collect();
        let r = lemma_core_svals_check(&x, &full).unwrap();
        assert!(r.holds && r.max_excess.abs() < 1e-10 * x.norm());
        let half: Vec<_> = (0..3).map(|k| random_orthonormal(8, 4, RngSpec::new(11, k))).collect();
        assert!(lemma_core_svals_check(&x, &half).unwrap().holds);
        let bad = FactorMatrix::general(DenseMatrix::from_fn(8, 2, |_, _| 1.0));
        assert!(lemma_core_svals_check(&x, &[bad.clone(), bad.clone(), bad]).is_err());
    }

    #[test]
    fn orthogonal_complement_gives_zero_core() {
        let mut x = DenseTensor::zeros(&[4, 4, 4]).unwrap();
        x.set(&[0, 0, 0], 1.0);
        let e = |i: usize| {
            let mut m = DenseMatrix::zeros(4, 1);
            m.set(i, 0, 1.0);
            FactorMatrix::orthonormal(m).unwrap()
        };
        let r = lemma_core_svals_check(&x, &[e(1), e(0), e(0)]).unwrap();
        assert!(r.holds);
    }

    #[test]
    fn error_split_on_geometric() {
        let x = synth_geometric(&[20, 20, 20], 0.4, 4).unwrap();
        let p = spectral_profile(&x).unwrap();
        for alg in [Algorithm::RhosvdKron, Algorithm::RsthosvdKron, Algorithm::RhkronRe] {
            let mut o = RandomizedOptions::with_seed(5);
            o.keep_intermediate = true;
            o.distribution = Some(crate::sketch::Distribution::Gaussian);
            let t = decompose(&x, alg, &[5, 5, 5], &o).unwrap();
            let e = error_decomposition(&x, &t, &p).unwrap();
            assert!(e.triangle_holds() && e.core_within_bound(), "{alg}: {e:?}");
        }
        let t = decompose(&x, Algorithm::Rhosvd, &[5, 5, 5], &RandomizedOptions::default()).unwrap();
        assert!(error_decomposition(&x, &t, &p).is_err());
    }

    #[test]
    fn no_oversampling_means_no_core_error() {
        let x = synth_geometric(&[10, 10, 10], 0.5, 6).unwrap();
        let p = spectral_profile(&x).unwrap();
        let mut o = RandomizedOptions::with_seed(1);
        o.oversample = 0;
        o.keep_intermediate = true;
        let t = decompose(&x, Algorithm::Rsthosvd, &[3, 3, 3], &o).unwrap();
        assert!(error_decomposition(&x, &t, &p).unwrap().core < 1e-12);
    }
}
