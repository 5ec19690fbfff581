//! Leading-order per-processor costs of the parallel Tucker algorithms on a
//! cubic tensor (`n` per mode, `d` modes, target rank `r`) over a `q^d` grid.
//!
//! Message counts drop the big-O constants: `d·q` stands for
//! `O(d P^{1/d})`, `log₂ P` for `O(log P)`.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CostAlgorithm {
    /// Parallel deterministic STHOSVD via local Gram matrices.
    Sthosvd,
    /// Gram-based variant with 1D block-column redistribution. Listed for
    /// comparison only; it is not implemented.
    BlockColumnGram,
    RsthosvdKron,
    RhkronRe,
}

impl CostAlgorithm {
    pub const ALL: [CostAlgorithm; 4] = [
        CostAlgorithm::Sthosvd,
        CostAlgorithm::BlockColumnGram,
        CostAlgorithm::RsthosvdKron,
        CostAlgorithm::RhkronRe,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CostAlgorithm::Sthosvd => "sthosvd",
            CostAlgorithm::BlockColumnGram => "block-column-gram",
            CostAlgorithm::RsthosvdKron => "rsthosvd-kron",
            CostAlgorithm::RhkronRe => "rhkron-re",
        }
    }
}

/// Leading terms for forming the factors and forming the core. `None` means
/// the algorithm needs no communication in that stage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostPrediction {
    pub factor_flops: f64,
    pub factor_words: f64,
    pub factor_messages: f64,
    pub core_flops: f64,
    pub core_words: Option<f64>,
    pub core_messages: Option<f64>,
}

/// Cost model with the per-mode subrank `s = r^{1/(d−1)}`.
pub fn cost_model(alg: CostAlgorithm, n: usize, r: usize, d: usize, q: usize) -> CostPrediction {
    let s = (r as f64).powf(1.0 / (d as f64 - 1.0));
    cost_model_with_subrank(alg, n, r, s, d, q)
}

/// Cost model with an explicit subrank `s`.
pub fn cost_model_with_subrank(alg: CostAlgorithm, n: usize, r: usize, s: f64, d: usize, q: usize) -> CostPrediction {
    let (n, r, df, q) = (n as f64, r as f64, d as f64, q as f64);
    let p = q.powf(df);
    let nd = n.powf(df);
    let core_flops = 2.0 * r * nd / p;
    let core_words = r * (n / q).powf(df - 1.0);
    let log_p = p.log2();
    let (factor_flops, factor_words, factor_messages) = match alg {
        CostAlgorithm::Sthosvd => (n * nd / p, nd / p, df * q),
        CostAlgorithm::BlockColumnGram => (n * nd / p, nd / p, df * p),
        CostAlgorithm::RsthosvdKron => (2.0 * s * nd / p, df * r * n / q, df * log_p),
        CostAlgorithm::RhkronRe => (4.0 * s * nd / p, df * r * n / q, df * log_p),
    };
    let (core_words, core_messages) = match alg {
        CostAlgorithm::BlockColumnGram => (None, None),
        _ => (Some(core_words), Some(log_p)),
    };
    CostPrediction {
        factor_flops,
        factor_words,
        factor_messages,
        core_flops,
        core_words,
        core_messages,
    }
}
