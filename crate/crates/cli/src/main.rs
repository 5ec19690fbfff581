use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use ktucker::analysis::{lemma_core_svals_check, matrix_bound_monte_carlo, omega1_monte_carlo, tensor_bound_monte_carlo, MonteCarloReport};
use ktucker::dimtree::{naive_sketch_flops, tree_sketch_flops};
use ktucker::grid::{
    aao_mttm, all_modes_multi_ttm, is_mttm, parallel_rhkron_re, parallel_rsthosvd_kron, CollectiveKind, DistTensor, GridContext, MttmVariant,
    ParallelOptions, World,
};
use ktucker::io::{read_bundle, read_tensor, write_bundle, write_tensor, Dtype};
use ktucker::sketch::{gen_gaussian, random_orthonormal, Distribution, RngSpec};
use ktucker::synth::{synth_exact_lowrank, synth_geometric, synth_lowrank_noise};
use ktucker::tucker::{decompose, reconstruct, relative_error, sthosvd, Algorithm, RandomizedOptions};
use ktucker::{DenseMatrix, DenseTensor, ModeProduct};

#[derive(Parser)]
#[command(name = "ktucker", version, about = "Randomized Tucker decompositions with Kronecker-structured sketches")]
struct Cli {
    /// Worker threads for independent trials.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic tensor.
    Synth(SynthArgs),
    /// Compute a Tucker decomposition and write it as a bundle.
    Compress(CompressArgs),
    /// Expand a bundle back into a full tensor.
    Reconstruct {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Relative error of a bundle against a tensor.
    Error {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        bundle: PathBuf,
    },
    /// Experiments that print CSV.
    #[command(subcommand)]
    Bench(Bench),
    /// Run a parallel algorithm on a simulated processor grid.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Geometric,
    LowrankNoise,
    Exact,
}

#[derive(Clone, Copy, ValueEnum)]
enum DtypeArg {
    F32,
    F64,
}

#[derive(Clone, Copy, ValueEnum)]
enum DistArg {
    Gaussian,
    Srht,
}

impl From<DistArg> for Distribution {
    fn from(d: DistArg) -> Self {
        match d {
            DistArg::Gaussian => Distribution::Gaussian,
            DistArg::Srht => Distribution::Srht,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParAlg {
    Alg11,
    Alg12,
}

#[derive(Clone, Copy, ValueEnum)]
enum MttmArg {
    Is,
    Aao,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Csv,
    Summary,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: SynthKind,
    /// Mode sizes, e.g. 100,100,100.
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 0.4)]
    decay: f64,
    /// Rank per mode (one value applies to every mode).
    #[arg(long, value_delimiter = ',')]
    rank: Vec<usize>,
    #[arg(long, default_value_t = 1e-4)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = DtypeArg::F64)]
    dtype: DtypeArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompressArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    alg: String,
    #[arg(long, value_delimiter = ',', required = true)]
    rank: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    oversample: usize,
    /// Defaults to SRHT when every mode size is a power of two.
    #[arg(long, value_enum)]
    dist: Option<DistArg>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Toggle::On)]
    dimtree: Toggle,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Bench {
    /// Error statistics of each randomized algorithm over many seeds.
    Accuracy {
        #[arg(long, value_delimiter = ',', default_value = "100,100,100")]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 0.4)]
        decay: f64,
        #[arg(long, value_delimiter = ',', default_value = "10")]
        rank: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        oversample: usize,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        #[arg(long, value_enum, default_value_t = DistArg::Gaussian)]
        dist: DistArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Reduce-scatter payloads and costs of IS vs AAO multi-TTM on a cubic grid.
    Mttm {
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        q: usize,
        #[arg(long, default_value_t = 2)]
        s: usize,
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sketch flops with and without the dimension tree.
    Dimtree {
        #[arg(long, value_delimiter = ',', default_value = "16,64,512")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 2)]
        r: usize,
        #[arg(long, value_delimiter = ',', default_value = "3,4,5")]
        d: Vec<usize>,
    },
    /// Monte-Carlo violation rates of the error bounds.
    Bounds {
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    grid: String,
    #[arg(long, value_enum)]
    alg: ParAlg,
    #[arg(long, value_enum, default_value_t = MttmArg::Aao)]
    mttm: MttmArg,
    #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
    report: ReportFormat,
    /// Input tensor; without it a geometric synthetic of size --dims is used.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "32,32,32")]
    dims: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "4")]
    rank: Vec<usize>,
    #[arg(long, default_value_t = 4)]
    oversample: usize,
    #[arg(long, value_enum)]
    dist: Option<DistArg>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn expand_rank(rank: &[usize], order: usize) -> Result<Vec<usize>> {
    match rank.len() {
        1 => Ok(vec![rank[0]; order]),
        n if n == order => Ok(rank.to_vec()),
        n => bail!("{n} ranks given for a {order}-way tensor"),
    }
}

fn synth(a: &SynthArgs) -> Result<()> {
    let x = match a.kind {
        SynthKind::Geometric => synth_geometric(&a.dims, a.decay, a.seed)?,
        SynthKind::LowrankNoise => synth_lowrank_noise(&a.dims, &expand_rank(&a.rank, a.dims.len())?, a.noise, a.seed)?,
        SynthKind::Exact => synth_exact_lowrank(&a.dims, &expand_rank(&a.rank, a.dims.len())?, a.seed)?,
    };
    let dtype = match a.dtype {
        DtypeArg::F32 => Dtype::F32,
        DtypeArg::F64 => Dtype::F64,
    };
    write_tensor(&x, &a.out, dtype).with_context(|| format!("writing {}", a.out.display()))?;
    println!("wrote {} ({:?}, norm {:.6e})", a.out.display(), x.dims(), x.norm());
    Ok(())
}

fn load(path: &Path) -> Result<DenseTensor> {
    read_tensor(path).with_context(|| format!("reading {}", path.display()))
}

fn compress(a: &CompressArgs) -> Result<()> {
    let x = load(&a.input)?;
    let alg = Algorithm::parse(&a.alg)?;
    let ranks = expand_rank(&a.rank, x.order())?;
    let opts = RandomizedOptions {
        oversample: a.oversample,
        distribution: a.dist.map(Into::into),
        seed: a.seed,
        use_dimtree: matches!(a.dimtree, Toggle::On),
        ..RandomizedOptions::default()
    };
    let t = decompose(&x, alg, &ranks, &opts)?;
    let err = relative_error(&x, &t)?;
    write_bundle(&a.out, &t, Some(err)).with_context(|| format!("writing bundle {}", a.out.display()))?;
    let stored = t.core.len() + t.factors.iter().map(|f| f.rows() * f.cols()).sum::<usize>();
    println!(
        "algorithm={} ranks={:?} relative_error={:.6e} compression={:.2} flops={}",
        alg,
        ranks,
        err,
        x.len() as f64 / stored as f64,
        t.flops.total()
    );
    Ok(())
}

fn accuracy_csv(
    dims: &[usize],
    decay: f64,
    rank: &[usize],
    oversample: usize,
    trials: u64,
    dist: Distribution,
    seed: u64,
) -> Result<String> {
    let x = synth_geometric(dims, decay, seed)?;
    let ranks = expand_rank(rank, dims.len())?;
    let det = relative_error(&x, &sthosvd(&x, &ranks, None)?)?;
    let mut out = String::from("algorithm,distribution,trials,deterministic,median,max,median_ratio,max_ratio\n");
    for alg in Algorithm::RANDOMIZED {
        let mut errs = (0..trials)
            .into_par_iter()
            .map(|t| {
                let o = RandomizedOptions {
                    oversample,
                    distribution: Some(dist),
                    seed: seed.wrapping_add(1 + t),
                    ..RandomizedOptions::default()
                };
                Ok(relative_error(&x, &decompose(&x, alg, &ranks, &o)?)?)
            })
            .collect::<Result<Vec<f64>>>()?;
        errs.sort_by(f64::total_cmp);
        let n = errs.len();
        let med = if n % 2 == 1 { errs[n / 2] } else { 0.5 * (errs[n / 2 - 1] + errs[n / 2]) };
        let max = errs[n - 1];
        writeln!(out, "{alg},{dist},{trials},{det:.6e},{med:.6e},{max:.6e},{:.6},{:.6}", med / det, max / det)?;
    }
    Ok(out)
}

fn mttm_csv(n: usize, q: usize, s: usize, d: usize, seed: u64) -> Result<String> {
    let dims = vec![n; d];
    let grid = GridContext::new(vec![q; d])?;
    let len = dims.iter().product();
    let x = DenseTensor::new(dims.clone(), gen_gaussian(len, 1, RngSpec::new(seed, 0)).into_data())?;
    let dx = DistTensor::distribute(&x, &grid)?;
    let phis: Vec<DenseMatrix> = (0..d).map(|k| gen_gaussian(n, s, RngSpec::new(seed, 1 + k as u64))).collect();
    let mut out = String::from("variant,skip,collectives,first_payload,max_words_sent,max_words_recv,max_flops\n");
    for skip in 0..d {
        let ps: Vec<ModeProduct<'_>> = (0..d).filter(|&k| k != skip).map(|k| ModeProduct::transposed(k, &phis[k])).collect();
        for variant in [MttmVariant::InSequence, MttmVariant::AllAtOnce] {
            let mut w = World::new(grid.size());
            match variant {
                MttmVariant::InSequence => is_mttm(&mut w, &dx, &ps)?,
                MttmVariant::AllAtOnce => aao_mttm(&mut w, &dx, skip, &ps)?,
            };
            let first = w.log().iter().find(|r| r.kind == CollectiveKind::ReduceScatter).map_or(0, |r| r.payload[0]);
            let per_proc: Vec<_> = (0..grid.size()).map(|r| w.stats().proc_total(r)).collect();
            writeln!(
                out,
                "{},{skip},{},{first},{},{},{}",
                if variant == MttmVariant::InSequence { "is" } else { "aao" },
                w.log().len(),
                per_proc.iter().map(|c| c.words_sent).max().unwrap_or(0),
                per_proc.iter().map(|c| c.words_recv).max().unwrap_or(0),
                per_proc.iter().map(|c| c.flops).max().unwrap_or(0),
            )?;
        }
    }
    let mut w = World::new(grid.size());
    let all: Vec<ModeProduct<'_>> = phis.iter().enumerate().map(|(k, m)| ModeProduct::transposed(k, m)).collect();
    all_modes_multi_ttm(&mut w, &dx, &all)?;
    let per_proc: Vec<_> = (0..grid.size()).map(|r| w.stats().proc_total(r)).collect();
    writeln!(
        out,
        "all-modes,-,{},{},{},{},{}",
        w.log().len(),
        w.log().first().map_or(0, |r| r.payload[0]),
        per_proc.iter().map(|c| c.words_sent).max().unwrap_or(0),
        per_proc.iter().map(|c| c.words_recv).max().unwrap_or(0),
        per_proc.iter().map(|c| c.flops).max().unwrap_or(0),
    )?;
    Ok(out)
}

fn dimtree_csv(ns: &[usize], r: usize, ds: &[usize]) -> Result<String> {
    let mut out = String::from("d,n,r,tree_flops,naive_flops,ratio\n");
    for &d in ds {
        for &n in ns {
            let tree = tree_sketch_flops(&vec![n; d], &vec![r; d])?;
            let naive = naive_sketch_flops(&vec![n; d], &vec![r; d]);
            writeln!(out, "{d},{n},{r},{tree},{naive},{:.6}", naive as f64 / tree as f64)?;
        }
    }
    Ok(out)
}

fn bounds_csv(trials: usize, seed: u64) -> Result<String> {
    let mut out = String::from("check,trials,violations,rate,failure_probability,allowed_rate,admissible,median_measured,bound\n");
    let mut row = |name: &str, r: &MonteCarloReport| -> Result<()> {
        writeln!(
            out,
            "{name},{},{},{:.6},{:.6},{:.6},{},{:.6e},{:.6e}",
            r.trials,
            r.violations,
            r.rate(),
            r.failure_probability,
            r.failure_probability + 3.0 * r.stderr(),
            r.admissible,
            r.median_measured,
            r.bound
        )?;
        Ok(())
    };
    let cols = 256;
    let u = random_orthonormal(32, 32, RngSpec::new(seed, 0));
    let v = random_orthonormal(cols, 32, RngSpec::new(seed, 1));
    let sig = DenseMatrix::diagonal(&(0..32).map(|i| 0.7f64.powi(i)).collect::<Vec<_>>());
    let m = u.matrix().matmul(&sig)?.matmul(&v.matrix().transpose())?;
    row("matrix", &matrix_bound_monte_carlo(&m, 2, &[16, 16], &[4, 4], 5.0, 1.5, trials, seed)?)?;
    let x = synth_geometric(&[32, 32, 32], 0.5, seed)?;
    let o = RandomizedOptions {
        oversample: 15,
        distribution: Some(Distribution::Srht),
        seed,
        ..RandomizedOptions::default()
    };
    row("tensor", &tensor_bound_monte_carlo(&x, Algorithm::RhkronRe, &[1, 1, 1], &o, 3.0, 3.5, trials)?)?;
    row("tensor-sequential", &tensor_bound_monte_carlo(&x, Algorithm::RsthosvdKron, &[1, 1, 1], &o, 3.0, 3.5, trials)?)?;
    row("omega1", &omega1_monte_carlo(&[8, 8], &[2, 2], 1, trials, 5.0, 1.2, seed)?)?;
    let mut held = 0;
    for i in 0..trials as u64 {
        let x = DenseTensor::new(vec![8, 8, 8], gen_gaussian(512, 1, RngSpec::new(seed.wrapping_add(i), 2)).into_data())?;
        let us: Vec<_> = (0..3).map(|k| random_orthonormal(8, 1 + (i as usize + 3 * k) % 8, RngSpec::new(seed.wrapping_add(i), 3 + k as u64))).collect();
        if lemma_core_svals_check(&x, &us)?.holds {
            held += 1;
        }
    }
    writeln!(out, "core-singular-values,{trials},{},{:.6},0,0,true,,", trials - held, (trials - held) as f64 / trials.max(1) as f64)?;
    Ok(out)
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let grid = GridContext::parse(&a.grid)?;
    let x = match &a.input {
        Some(p) => load(p)?,
        None => synth_geometric(&a.dims, 0.4, a.seed)?,
    };
    if x.order() != grid.order() {
        bail!("{}-way tensor on a {}-way grid", x.order(), grid.order());
    }
    let ranks = expand_rank(&a.rank, x.order())?;
    let opts = ParallelOptions {
        randomized: RandomizedOptions {
            oversample: a.oversample,
            distribution: a.dist.map(Into::into),
            seed: a.seed,
            ..RandomizedOptions::default()
        },
        mttm: match a.mttm {
            MttmArg::Is => MttmVariant::InSequence,
            MttmArg::Aao => MttmVariant::AllAtOnce,
        },
        ..ParallelOptions::default()
    };
    let run = match a.alg {
        ParAlg::Alg11 => parallel_rsthosvd_kron(&x, &ranks, &grid, &opts)?,
        ParAlg::Alg12 => parallel_rhkron_re(&x, &ranks, &grid, &opts)?,
    };
    let err = relative_error(&x, &run.decomposition)?;
    let report = match a.report {
        ReportFormat::Csv => run.stats.to_csv(),
        ReportFormat::Summary => {
            let t = run.stats.total();
            format!(
                "processors={} relative_error={err:.6e} flops={} words_sent={} words_recv={} messages={} collectives={}\n",
                grid.size(),
                t.flops,
                t.words_sent,
                t.words_recv,
                t.messages,
                run.log.len()
            )
        }
    };
    match &a.out {
        Some(p) => fs::write(p, report).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{report}"),
    }
    eprintln!("relative_error={err:.6e}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    rayon::ThreadPoolBuilder::new().num_threads(cli.threads.max(1)).build_global()?;
    match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Compress(a) => compress(a),
        Command::Reconstruct { bundle, out } => {
            let b = read_bundle(bundle).with_context(|| format!("reading bundle {}", bundle.display()))?;
            let x = reconstruct(&b.decomposition)?;
            write_tensor(&x, out, Dtype::F64)?;
            println!("wrote {} ({:?})", out.display(), x.dims());
            Ok(())
        }
        Command::Error { input, bundle } => {
            let x = load(input)?;
            let b = read_bundle(bundle).with_context(|| format!("reading bundle {}", bundle.display()))?;
            println!("relative_error={:.6e}", relative_error(&x, &b.decomposition)?);
            Ok(())
        }
        Command::Bench(b) => {
            let csv = match b {
                Bench::Accuracy {
                    dims,
                    decay,
                    rank,
                    oversample,
                    trials,
                    dist,
                    seed,
                } => accuracy_csv(dims, *decay, rank, *oversample, *trials, (*dist).into(), *seed)?,
                Bench::Mttm { n, q, s, d, seed } => mttm_csv(*n, *q, *s, *d, *seed)?,
                Bench::Dimtree { n, r, d } => dimtree_csv(n, *r, d)?,
                Bench::Bounds { trials, seed } => bounds_csv(*trials, *seed)?,
            };
            print!("{csv}");
            Ok(())
        }
        Command::Simulate(a) => simulate(a),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
