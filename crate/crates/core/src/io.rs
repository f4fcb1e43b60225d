//! JSON input formats (channel and Markov files) and report schemas.
//!
//! Complex entries are `[re, im]` pairs and matrices are lists of rows.
//! Floats are written with the shortest representation that round-trips, so
//! re-parsing a report recovers every value bit for bit. The exponent
//! `−∞` is written as the string `"-inf"`.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::channel::{KrausAtom, KrausMeasure};
use crate::entropy::{EntropyReport, MarkovSpec};
use crate::error::{Error, Result};
use crate::lyapunov::{Exponent, LyapunovEstimate};
use crate::purification::{CandidateKind, ScanReport, Verdict, Wedge2Report};
use crate::scalar::{ComplexMatrix, Real};
use crate::trajectory::TrajectoryPath;

/// Largest supported Hilbert-space dimension for file input.
pub const MAX_DIM: usize = 16;

pub type JsonMatrix = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json<T: Real>(m: &ComplexMatrix<T>) -> JsonMatrix {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| [m[(i, j)].re.as_f64(), m[(i, j)].im.as_f64()])
                .collect()
        })
        .collect()
}

pub fn matrix_from_json(rows: &JsonMatrix) -> Result<DMatrix<Complex<f64>>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidInput("ragged matrix".into()));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| {
        Complex::new(rows[i][j][0], rows[i][j][1])
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomFile {
    #[serde(default = "one")]
    pub weight: f64,
    pub matrix: JsonMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

fn one() -> f64 {
    1.0
}

/// `{"dim": k, "atoms": [{"weight": w, "matrix": [[[re, im], …], …], "label": …}]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelFile {
    pub dim: usize,
    pub atoms: Vec<AtomFile>,
}

impl ChannelFile {
    pub fn from_measure<T: Real>(km: &KrausMeasure<T>) -> Self {
        Self {
            dim: km.dim(),
            atoms: km
                .atoms()
                .iter()
                .map(|a| AtomFile {
                    weight: a.weight().as_f64(),
                    matrix: matrix_to_json(a.matrix()),
                    label: a.label().map(str::to_string),
                })
                .collect(),
        }
    }

    pub fn to_measure(&self) -> Result<KrausMeasure<f64>> {
        if self.dim == 0 || self.dim > MAX_DIM {
            return Err(Error::InvalidInput(format!(
                "dimension {} outside 1..={MAX_DIM}",
                self.dim
            )));
        }
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                let m = matrix_from_json(&a.matrix)?;
                if m.nrows() != self.dim || m.ncols() != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        found: m.nrows().max(m.ncols()),
                    });
                }
                KrausAtom::new(a.weight, m, a.label.clone())
            })
            .collect::<Result<Vec<_>>>()?;
        KrausMeasure::new(self.dim, atoms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    #[default]
    Column,
    Row,
}

/// `{"P": [[…], …], "convention": "column" | "row"}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovFile {
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(default)]
    pub convention: Convention,
}

impl MarkovFile {
    /// `force_row` treats the matrix as row-stochastic regardless of the
    /// declared convention.
    pub fn to_spec(&self, force_row: bool) -> Result<MarkovSpec> {
        let k = self.p.len();
        if k == 0 || k > MAX_DIM {
            return Err(Error::InvalidInput(format!(
                "dimension {k} outside 1..={MAX_DIM}"
            )));
        }
        if self.p.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidInput("transition matrix must be square".into()));
        }
        let m = DMatrix::from_fn(k, k, |i, j| self.p[i][j]);
        if force_row || self.convention == Convention::Row {
            MarkovSpec::from_row_stochastic(m)
        } else {
            MarkovSpec::new(m)
        }
    }
}

/// Either input format; Markov files are recognized by their `"P"` key.
#[derive(Debug, Clone, PartialEq)]
pub enum InputFile {
    Channel(ChannelFile),
    Markov(MarkovFile),
}

impl InputFile {
    pub fn parse(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("malformed JSON: {e}")))?;
        let is_markov = value.get("P").is_some();
        let parsed = if is_markov {
            serde_json::from_value(value).map(InputFile::Markov)
        } else {
            serde_json::from_value(value).map(InputFile::Channel)
        };
        parsed.map_err(|e| Error::InvalidInput(format!("invalid input file: {e}")))
    }
}

/// Serializes an exponent as a number or `"-inf"`.
pub fn exponent_json<T: Real>(e: &Exponent<T>) -> Value {
    match e.finite() {
        Some(v) => number(v.as_f64()),
        None => Value::String("-inf".into()),
    }
}

/// JSON number, or the strings `"-inf"`, `"inf"`, `"nan"` for non-finite
/// values.
pub fn number(x: f64) -> Value {
    if x.is_finite() {
        serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
    } else if x.is_nan() {
        Value::String("nan".into())
    } else if x > 0.0 {
        Value::String("inf".into())
    } else {
        Value::String("-inf".into())
    }
}

/// Inverse of [`number`] / [`exponent_json`].
pub fn parse_number(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => match s.as_str() {
            "-inf" => Some(f64::NEG_INFINITY),
            "inf" => Some(f64::INFINITY),
            "nan" => Some(f64::NAN),
            _ => None,
        },
        _ => None,
    }
}

/// `{"gamma", "stderr", "neg_infinity", "collapse_step", "n_steps", "n_paths"}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovJson {
    pub gamma: Vec<Value>,
    pub stderr: Vec<f64>,
    pub neg_infinity: Vec<bool>,
    pub collapse_step: Vec<Option<usize>>,
    pub collapsed_paths: Vec<usize>,
    pub n_steps: usize,
    pub n_paths: usize,
}

impl LyapunovJson {
    pub fn from_estimate<T: Real>(est: &LyapunovEstimate<T>) -> Self {
        Self {
            gamma: est.gamma.iter().map(exponent_json).collect(),
            stderr: est.stderr.iter().map(|s| s.as_f64()).collect(),
            neg_infinity: est.gamma.iter().map(Exponent::is_neg_infinity).collect(),
            collapse_step: est.collapse_step.clone(),
            collapsed_paths: est.collapsed_paths.clone(),
            n_steps: est.n_steps,
            n_paths: est.n_paths,
        }
    }
}

fn candidate_kind(kind: &CandidateKind) -> String {
    let list = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
    match kind {
        CandidateKind::Coordinate(set) => format!("coordinate:{}", list(set)),
        CandidateKind::EigenvectorPair { atom, pair } => {
            format!("eigenvector-pair:{atom}:{},{}", pair.0, pair.1)
        }
        CandidateKind::Random(i) => format!("random:{i}"),
    }
}

pub fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::PurifyingEvidence => "purifying-evidence",
        Verdict::NonPurifyingWitness => "non-purifying-witness",
        Verdict::Inconclusive => "inconclusive",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub n: usize,
    pub exact: Option<f64>,
    pub mc_mean: Option<f64>,
    pub mc_stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateJson {
    pub kind: String,
    pub rank: usize,
    pub purified_at_depth: Option<usize>,
    /// Word (as atom labels) breaking proportionality.
    pub word: Option<Vec<String>>,
    pub never_purifies: Option<bool>,
}

/// `{"verdict", "witness", "d_n", "slope", "confidence_interval", …}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurificationJson {
    pub verdict: String,
    pub scan_verdict: String,
    pub wedge_verdict: String,
    /// Projector (matrix) never purified by any word, if one was found.
    pub witness: Option<JsonMatrix>,
    pub d_n: Vec<DecayRow>,
    pub slope: Value,
    pub confidence_interval: [Value; 2],
    pub fit_depths: Vec<usize>,
    pub candidates: Vec<CandidateJson>,
}

impl PurificationJson {
    /// The overall verdict: a scan witness is conclusive; otherwise the
    /// `∧²` decay decides.
    pub fn new<T: Real>(km: &KrausMeasure<T>, scan: &ScanReport<T>, decay: &Wedge2Report<T>) -> Self {
        let overall = if scan.verdict == Verdict::NonPurifyingWitness {
            Verdict::NonPurifyingWitness
        } else {
            decay.verdict
        };
        let rows = (1..=decay.exact.len().max(decay.monte_carlo.len()))
            .map(|n| DecayRow {
                n,
                exact: decay.exact.get(n - 1).map(|v| v.as_f64()),
                mc_mean: decay.monte_carlo.get(n - 1).map(|p| p.mean.as_f64()),
                mc_stderr: decay.monte_carlo.get(n - 1).map(|p| p.stderr.as_f64()),
            })
            .collect();
        let candidates = scan
            .candidates
            .iter()
            .map(|c| CandidateJson {
                kind: candidate_kind(&c.kind),
                rank: c.projector.rank(),
                purified_at_depth: c.purified_at.as_ref().map(|(d, _)| *d),
                word: c
                    .purified_at
                    .as_ref()
                    .map(|(_, w)| w.iter().map(|&a| km.atom_label(a)).collect()),
                never_purifies: c.never_purifies,
            })
            .collect();
        Self {
            verdict: verdict_name(overall).into(),
            scan_verdict: verdict_name(scan.verdict).into(),
            wedge_verdict: verdict_name(decay.verdict).into(),
            witness: scan
                .witnesses
                .first()
                .map(|&i| matrix_to_json(scan.candidates[i].projector.matrix())),
            d_n: rows,
            slope: exponent_json(&decay.slope),
            confidence_interval: [
                exponent_json(&decay.confidence_interval.0),
                exponent_json(&decay.confidence_interval.1),
            ],
            fit_depths: decay.fit_depths.clone(),
            candidates,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderJson {
    pub label: String,
    pub empirical: f64,
    pub predicted: f64,
}

/// Entropy–Lyapunov report for a Markov chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovReportJson {
    pub h: f64,
    pub h_classical: f64,
    pub h_bits: f64,
    pub gamma1: f64,
    pub gamma1_stderr: f64,
    pub gamma1_predicted: f64,
    pub gamma2: Value,
    pub identity_residual: f64,
    pub collapse_step: Vec<Option<usize>>,
    pub collapsed_paths: Vec<usize>,
    pub stationary: Vec<f64>,
    pub cylinder_frequencies: Vec<CylinderJson>,
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
}

impl MarkovReportJson {
    pub fn new(rep: &EntropyReport, seed: u64) -> Self {
        Self {
            h: rep.h_channel,
            h_classical: rep.h_classical,
            h_bits: rep.h_bits,
            gamma1: rep.gamma1_estimate,
            gamma1_stderr: rep.gamma1_stderr,
            gamma1_predicted: rep.gamma1_predicted,
            gamma2: if rep.gamma2_is_neg_infinity {
                Value::String("-inf".into())
            } else {
                Value::Null
            },
            identity_residual: rep.identity_residual,
            collapse_step: rep.collapse_step.clone(),
            collapsed_paths: rep.collapsed_paths.clone(),
            stationary: rep.stationary.clone(),
            cylinder_frequencies: rep
                .cylinder_frequencies
                .iter()
                .map(|c| CylinderJson {
                    label: format!("V[{},{}]", c.i, c.j),
                    empirical: c.empirical,
                    predicted: c.predicted,
                })
                .collect(),
            n_steps: rep.n_steps,
            n_paths: rep.n_paths,
            seed,
        }
    }
}

/// One line of a path dump: `{"word": [...], "log_weight": …}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub word: Vec<usize>,
    pub log_weight: f64,
}

/// Path dump in JSON-lines form.
pub fn paths_to_jsonl<T: Real>(paths: &[TrajectoryPath<T>]) -> String {
    let mut out = String::new();
    for p in paths {
        let rec = PathRecord {
            word: p.word.clone(),
            log_weight: p.log_weight.as_f64(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("path record serializes"));
        out.push('\n');
    }
    out
}
