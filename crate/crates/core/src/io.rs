//! Raw tensor files with key/value sidecars, and Tucker bundles.
//!
//! A tensor `NAME.bin` holds little-endian IEEE-754 values in
//! mode-1-fastest order; `NAME.meta` holds `dims = n1 n2 ...` and
//! `dtype = f32|f64`. A bundle directory holds `core.bin`, one
//! `factor_<j>.bin` per mode (0-based, stored as `rows x cols` tensors), their
//! sidecars, and `bundle.meta` describing how the decomposition was made.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::sketch::{Distribution, SubrankMatrix, SubrankVector};
use crate::tensor::{DenseMatrix, DenseTensor, FactorMatrix};
use crate::tucker::{Algorithm, Provenance, SubrankPlan, TuckerDecomposition};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Dtype {
    F32,
    #[default]
    F64,
}

impl Dtype {
    pub fn size(&self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Dtype::F32 => "f32",
            Dtype::F64 => "f64",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "f32" => Some(Dtype::F32),
            "f64" => Some(Dtype::F64),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorMeta {
    pub dims: Vec<usize>,
    pub dtype: Dtype,
}

impl TensorMeta {
    pub fn payload_bytes(&self) -> u64 {
        self.dims.iter().map(|&n| n as u64).product::<u64>() * self.dtype.size() as u64
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let kv = parse_kv(text, path)?;
        let bad = |reason: String| Error::Metadata {
            path: path.to_path_buf(),
            reason,
        };
        let dims_text = kv.get("dims").ok_or_else(|| bad("missing 'dims'".into()))?;
        let dims = parse_list(dims_text).ok_or_else(|| bad(format!("bad dims '{dims_text}'")))?;
        if dims.is_empty() || dims.contains(&0) {
            return Err(bad(format!("bad dims '{dims_text}'")));
        }
        let dtype = match kv.get("dtype") {
            None => Dtype::F64,
            Some(t) => Dtype::parse(t).ok_or_else(|| bad(format!("unsupported dtype '{t}'")))?,
        };
        if let Some(order) = kv.get("byte_order") {
            if order != "little" {
                return Err(bad(format!("unsupported byte order '{order}'")));
            }
        }
        Ok(TensorMeta { dims, dtype })
    }
}

impl fmt::Display for TensorMeta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dims = {}", join(&self.dims))?;
        writeln!(f, "dtype = {}", self.dtype.name())?;
        writeln!(f, "byte_order = little")
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

fn parse_list(s: &str) -> Option<Vec<usize>> {
    s.split_whitespace().map(|t| t.parse().ok()).collect()
}

/// `key = value` lines; blank lines and `#` comments are skipped.
fn parse_kv(text: &str, path: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Metadata {
            path: path.to_path_buf(),
            reason: format!("line {} is not 'key = value'", i + 1),
        })?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Sidecar path: the payload path with its extension replaced by `meta`.
pub fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta")
}

/// Writes the payload and its sidecar. `f32` output rounds each value.
pub fn write_tensor(t: &DenseTensor, path: &Path, dtype: Dtype) -> Result<()> {
    let meta = TensorMeta {
        dims: t.dims().to_vec(),
        dtype,
    };
    let mut bytes = Vec::with_capacity(meta.payload_bytes() as usize);
    match dtype {
        Dtype::F64 => t.data().iter().for_each(|v| bytes.extend_from_slice(&v.to_le_bytes())),
        Dtype::F32 => t.data().iter().for_each(|&v| bytes.extend_from_slice(&(v as f32).to_le_bytes())),
    }
    fs::write(path, bytes)?;
    fs::write(meta_path(path), meta.to_string())?;
    Ok(())
}

/// Reads a payload using its sidecar.
pub fn read_tensor(path: &Path) -> Result<DenseTensor> {
    let mp = meta_path(path);
    let meta = TensorMeta::parse(&fs::read_to_string(&mp)?, &mp)?;
    read_tensor_with_meta(path, &meta)
}

/// Reads a payload described by `meta`; `f32` values are widened.
pub fn read_tensor_with_meta(path: &Path, meta: &TensorMeta) -> Result<DenseTensor> {
    let bytes = fs::read(path)?;
    if bytes.len() as u64 != meta.payload_bytes() {
        return Err(Error::SizeMismatch {
            path: path.to_path_buf(),
            expected: meta.payload_bytes(),
            found: bytes.len() as u64,
        });
    }
    let data = match meta.dtype {
        Dtype::F64 => bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect(),
        Dtype::F32 => bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64).collect(),
    };
    DenseTensor::new(meta.dims.clone(), data)
}

fn subranks_to_string(plan: &SubrankPlan) -> (&'static str, String) {
    match plan {
        SubrankPlan::Matrix(m) => (
            "matrix",
            (0..m.order()).map(|j| m.row(j).iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")).collect::<Vec<_>>().join(", "),
        ),
        SubrankPlan::Vector(v) => ("vector", join(&v.s)),
    }
}

/// Writes `t` (and an optional measured relative error) into `dir`.
pub fn write_bundle(dir: &Path, t: &TuckerDecomposition, relative_error: Option<f64>) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_tensor(&t.core, &dir.join("core.bin"), Dtype::F64)?;
    for (j, f) in t.factors.iter().enumerate() {
        let m = f.matrix();
        let ft = DenseTensor::new(vec![m.rows(), m.cols()], m.data().to_vec())?;
        write_tensor(&ft, &dir.join(format!("factor_{j}.bin")), Dtype::F64)?;
    }
    let p = &t.provenance;
    let mut s = String::new();
    let mut put = |k: &str, v: String| {
        s.push_str(k);
        s.push_str(" = ");
        s.push_str(&v);
        s.push('\n');
    };
    put("algorithm", p.algorithm.name().into());
    put("dims", join(&t.dims()));
    put("ranks", join(&p.ranks));
    if let Some(o) = p.oversample {
        put("oversample", o.to_string());
    }
    if let Some(seed) = p.seed {
        put("seed", seed.to_string());
    }
    if let Some(d) = p.distribution {
        put("distribution", d.name().into());
    }
    if !p.sketch_sizes.is_empty() {
        put("sketch_sizes", join(&p.sketch_sizes));
    }
    if let Some(plan) = &p.subranks {
        let (kind, text) = subranks_to_string(plan);
        put("subrank_kind", kind.into());
        put("subranks", text);
    }
    if !p.fallbacks.is_empty() {
        put("srht_fallbacks", p.fallbacks.join("; "));
    }
    if let Some(e) = relative_error {
        put("relative_error", format!("{e:e}"));
    }
    fs::write(dir.join("bundle.meta"), s)?;
    Ok(())
}

/// A bundle read back from disk.
#[derive(Clone, Debug)]
pub struct Bundle {
    pub decomposition: TuckerDecomposition,
    pub relative_error: Option<f64>,
}

pub fn read_bundle(dir: &Path) -> Result<Bundle> {
    let mp = dir.join("bundle.meta");
    let kv = parse_kv(&fs::read_to_string(&mp)?, &mp)?;
    let bad = |reason: String| Error::Metadata {
        path: mp.clone(),
        reason,
    };
    let get = |k: &str| kv.get(k).ok_or_else(|| bad(format!("missing '{k}'")));
    let list = |k: &str| -> Result<Vec<usize>> {
        let v = get(k)?;
        parse_list(v).ok_or_else(|| bad(format!("bad '{k}' value '{v}'")))
    };
    let algorithm = Algorithm::parse(get("algorithm")?)?;
    let ranks = list("ranks")?;
    let dims = list("dims")?;
    let num = |k: &str| -> Result<Option<u64>> {
        kv.get(k).map(|v| v.parse::<u64>().map_err(|_| bad(format!("bad '{k}' value '{v}'")))).transpose()
    };
    let subranks = match kv.get("subrank_kind").map(String::as_str) {
        None => None,
        Some("vector") => Some(SubrankPlan::Vector(SubrankVector { s: list("subranks")? })),
        Some("matrix") => {
            let rows = get("subranks")?
                .split(',')
                .map(|r| parse_list(r).ok_or_else(|| bad(format!("bad subrank row '{r}'"))))
                .collect::<Result<Vec<_>>>()?;
            Some(SubrankPlan::Matrix(SubrankMatrix::new(rows)?))
        }
        Some(other) => return Err(bad(format!("unknown subrank kind '{other}'"))),
    };
    let provenance = Provenance {
        algorithm,
        ranks: ranks.clone(),
        oversample: num("oversample")?.map(|v| v as usize),
        seed: num("seed")?,
        distribution: kv.get("distribution").map(|d| Distribution::parse(d)).transpose()?,
        sketch_sizes: if kv.contains_key("sketch_sizes") { list("sketch_sizes")? } else { Vec::new() },
        subranks,
        fallbacks: kv.get("srht_fallbacks").map(|f| f.split("; ").map(String::from).collect()).unwrap_or_default(),
    };
    let relative_error = kv
        .get("relative_error")
        .map(|v| v.parse::<f64>().map_err(|_| bad(format!("bad relative_error '{v}'"))))
        .transpose()?;
    let core = read_tensor(&dir.join("core.bin"))?;
    let mut factors = Vec::with_capacity(dims.len());
    for j in 0..dims.len() {
        let path = dir.join(format!("factor_{j}.bin"));
        let t = read_tensor(&path)?;
        if t.order() != 2 {
            return Err(Error::Metadata {
                path: meta_path(&path),
                reason: "factor files must be 2-way".into(),
            });
        }
        let m = DenseMatrix::from_col_major(t.dims()[0], t.dims()[1], t.into_data())?;
        factors.push(FactorMatrix::orthonormal(m.clone()).unwrap_or_else(|_| FactorMatrix::general(m)));
    }
    let decomposition = TuckerDecomposition::from_parts(core, factors, provenance)?;
    if decomposition.dims() != dims {
        return Err(bad(format!("factor shapes give dims {:?}, metadata says {dims:?}", decomposition.dims())));
    }
    Ok(Bundle {
        decomposition,
        relative_error,
    })
}
