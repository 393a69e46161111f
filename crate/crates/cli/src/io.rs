use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dps_core::states::StateFile;
use dps_core::tasks::EnsembleMember;
use dps_core::{BipartiteOp, CMatrix, Complex};
use serde::{Deserialize, Serialize};

/// Reproducibility record embedded in every artifact.
#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub solver_tolerance: f64,
    pub verdict_margin_factor: f64,
    pub warnings: Vec<String>,
}

impl Manifest {
    pub fn new(command: &'static str, config: serde_json::Value, solver_tolerance: f64, verdict_margin_factor: f64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            seeds: Vec::new(),
            solver_tolerance,
            verdict_margin_factor,
            warnings: Vec::new(),
        }
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<PathBuf> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))?;
    Ok(path.to_path_buf())
}

pub fn load_state(path: &Path) -> Result<BipartiteOp> {
    StateFile::load(path).with_context(|| format!("loading state {}", path.display()))
}

pub fn save_state(op: &BipartiteOp, path: &Path) -> Result<PathBuf> {
    write_json(path, &StateFile::from_operator(op))
}

#[derive(Serialize, Deserialize)]
pub struct JsonVector {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl JsonVector {
    fn to_vec(&self) -> Result<Vec<Complex>> {
        if self.re.len() != self.im.len() {
            bail!("re and im arrays differ in length");
        }
        Ok(self.re.iter().zip(&self.im).map(|(&a, &b)| Complex::new(a, b)).collect())
    }
}

/// Dense matrix as `{rows, cols, re, im}` with row-major nested arrays.
#[derive(Serialize)]
pub struct JsonMatrix {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&CMatrix> for JsonMatrix {
    fn from(m: &CMatrix) -> Self {
        Self {
            rows: m.rows(),
            cols: m.cols(),
            re: (0..m.rows()).map(|i| m.row(i).iter().map(|z| z.re).collect()).collect(),
            im: (0..m.rows()).map(|i| m.row(i).iter().map(|z| z.im).collect()).collect(),
        }
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct JsonMember {
    p: f64,
    psi_prime: JsonVector,
    psi: JsonVector,
}

/// `{"members": [{"p", "psiPrime": {re, im}, "psi": {re, im}}, ...]}`.
#[derive(Deserialize)]
struct EnsembleFile {
    members: Vec<JsonMember>,
}

pub fn load_ensemble(path: &Path) -> Result<Vec<EnsembleMember>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading ensemble {}", path.display()))?;
    let file: EnsembleFile = serde_json::from_str(&text).with_context(|| format!("parsing ensemble {}", path.display()))?;
    file.members
        .into_iter()
        .map(|m| {
            Ok(EnsembleMember {
                p: m.p,
                psi_prime: m.psi_prime.to_vec()?,
                psi: m.psi.to_vec()?,
            })
        })
        .collect()
}

pub fn ensemble_json(members: &[EnsembleMember]) -> serde_json::Value {
    let vec = |v: &[Complex]| JsonVector {
        re: v.iter().map(|z| z.re).collect(),
        im: v.iter().map(|z| z.im).collect(),
    };
    let members: Vec<serde_json::Value> = members
        .iter()
        .map(|m| serde_json::json!({ "p": m.p, "psiPrime": vec(&m.psi_prime), "psi": vec(&m.psi) }))
        .collect();
    serde_json::json!({ "members": members })
}

/// JSON number, or `null` for NaN and infinities.
pub fn num(x: f64) -> serde_json::Value {
    serde_json::Number::from_f64(x).map_or(serde_json::Value::Null, serde_json::Value::Number)
}

/// Six significant digits; `NaN` and `inf` spelled out.
pub fn csv_cell(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.5e}")
    }
}
