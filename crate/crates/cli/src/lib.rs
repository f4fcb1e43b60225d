//! Command-line front end: reads a channel or Markov-chain file, runs one
//! analysis and writes a JSON report.
//!
//! Exit codes: `0` success, `1` numerical failure, `2` invalid input (the
//! error list is printed as JSON on stdout).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use channel_ergodics::entropy::{
    channel_entropy, classical_markov_entropy, entropy_lyapunov_report, markov_channel, MarkovSpec,
};
use channel_ergodics::ergodic::{
    is_irreducible, minimal_invariant_subspaces, spectral_data, temporal_mean, IRREDUCIBILITY_TRIALS,
};
use channel_ergodics::io::{
    exponent_json, matrix_to_json, number, paths_to_jsonl, InputFile, LyapunovJson, MarkovReportJson,
    PurificationJson,
};
use channel_ergodics::lyapunov::{estimate_exponents, theorem_b_diagnostic, Exponent, LyapunovOptions};
use channel_ergodics::purification::{purification_scan, wedge2_decay, DEFAULT_WORD_BUDGET};
use channel_ergodics::trajectory::{empirical_barycenter, sample_x_process, SampleConfig};
use channel_ergodics::{DensityMatrix64, Error, KrausMeasure64, ProjectivePoint64};
use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Stochasticity residual and Choi positivity.
    Validate,
    /// Spectral radius, fixed points and spectral gap.
    Spectral,
    /// Irreducibility by the spectral and positivity criteria.
    Irreducibility,
    /// Minimal invariant subspaces.
    PhiErg,
    /// Candidate-projector scan and `∧²` decay.
    Purification,
    /// Projective process and its empirical barycenter.
    Trajectory,
    /// Lyapunov spectrum.
    Lyapunov,
    /// Channel entropy.
    Entropy,
    /// Entropy versus top exponent for a Markov chain.
    MarkovReport,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Spectral => "spectral",
            Command::Irreducibility => "irreducibility",
            Command::PhiErg => "phi-erg",
            Command::Purification => "purification",
            Command::Trajectory => "trajectory",
            Command::Lyapunov => "lyapunov",
            Command::Entropy => "entropy",
            Command::MarkovReport => "markov-report",
        }
    }

    fn is_randomized(self) -> bool {
        matches!(
            self,
            Command::PhiErg
                | Command::Purification
                | Command::Trajectory
                | Command::Lyapunov
                | Command::MarkovReport
        )
    }

    /// Default `(n_steps, n_paths)`.
    fn sampling_defaults(self) -> (usize, usize) {
        match self {
            Command::Trajectory => (2_000, 8),
            Command::Lyapunov => (10_000, 16),
            Command::MarkovReport => (100_000, 32),
            Command::Purification => (0, 4_000),
            _ => (0, 0),
        }
    }
}

#[derive(Debug, Clone, Parser)]
#[command(
    name = "channel-ergodics",
    version,
    about = "Ergodic analysis of quantum channels given by Kraus measures"
)]
pub struct RunConfig {
    pub command: Command,
    /// Channel file `{"dim", "atoms"}` or Markov file `{"P", "convention"}`.
    pub input_path: PathBuf,
    #[arg(long, env = "CHANNEL_ERGODICS_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub n_steps: Option<usize>,
    #[arg(long)]
    pub n_paths: Option<usize>,
    /// Word length for purification (default 8).
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Report path; stdout when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Directory for CSV curves.
    #[arg(long)]
    pub curves: Option<PathBuf>,
    /// Worker threads for path sampling.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Read Markov matrices as row-stochastic.
    #[arg(long)]
    pub row_stochastic: bool,
    /// JSON-lines dump of sampled words (trajectory).
    #[arg(long)]
    pub dump_paths: Option<PathBuf>,
}

impl RunConfig {
    /// Configuration with every option at its default.
    pub fn new(command: Command, input_path: impl Into<PathBuf>) -> Self {
        Self {
            command,
            input_path: input_path.into(),
            seed: 0,
            n_steps: None,
            n_paths: None,
            max_depth: None,
            tol: 1e-10,
            output: None,
            curves: None,
            jobs: None,
            row_stochastic: false,
            dump_paths: None,
        }
    }

    fn n_steps(&self) -> usize {
        self.n_steps.unwrap_or(self.command.sampling_defaults().0)
    }

    fn n_paths(&self) -> usize {
        self.n_paths.unwrap_or(self.command.sampling_defaults().1)
    }
}

/// One entry of the error list.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorEntry {
    pub kind: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
}

#[derive(Debug)]
enum Failure {
    Validation(Vec<ErrorEntry>),
    Numeric(Vec<ErrorEntry>),
}

impl Failure {
    fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::Numeric(vec![ErrorEntry {
            kind: "io",
            message: format!("{}: {e}", path.display()),
            residual: None,
        }])
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        let entry = |kind, residual| ErrorEntry {
            kind,
            message: message.clone(),
            residual,
        };
        match e {
            Error::DimensionMismatch { .. } => Failure::Validation(vec![entry("dimension-mismatch", None)]),
            Error::InvalidInput(_) => Failure::Validation(vec![entry("invalid-input", None)]),
            Error::NotStochastic { residual } => {
                Failure::Validation(vec![entry("not-stochastic", Some(residual))])
            }
            Error::NotIrreducible(_) => Failure::Validation(vec![entry("not-irreducible", None)]),
            Error::Inconclusive { .. } => Failure::Numeric(vec![entry("inconclusive", None)]),
            Error::EigenSolver(_) => Failure::Numeric(vec![entry("eigen-solver", None)]),
            Error::NoPositiveEigenmatrix => Failure::Numeric(vec![entry("no-positive-eigenmatrix", None)]),
            Error::SigmaNotPositive { min_eigenvalue } => {
                Failure::Numeric(vec![entry("sigma-not-positive", Some(min_eigenvalue))])
            }
            Error::BudgetExceeded { .. } => Failure::Numeric(vec![entry("budget-exceeded", None)]),
            Error::DegenerateStep => Failure::Numeric(vec![entry("degenerate-step", None)]),
            Error::AllPathsDegenerate => Failure::Numeric(vec![entry("all-paths-degenerate", None)]),
            Error::InsufficientSamples { .. } => Failure::Numeric(vec![entry("insufficient-samples", None)]),
            Error::Overflow => Failure::Numeric(vec![entry("overflow", None)]),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

struct Input {
    km: KrausMeasure64,
    markov: Option<MarkovSpec>,
}

fn load(cfg: &RunConfig) -> Outcome<Input> {
    let text = fs::read_to_string(&cfg.input_path).map_err(|e| {
        Failure::Validation(vec![ErrorEntry {
            kind: "io",
            message: format!("{}: {e}", cfg.input_path.display()),
            residual: None,
        }])
    })?;
    match InputFile::parse(&text)? {
        InputFile::Channel(file) => Ok(Input {
            km: file.to_measure()?,
            markov: None,
        }),
        InputFile::Markov(file) => {
            let spec = file.to_spec(cfg.row_stochastic)?;
            Ok(Input {
                km: markov_channel(&spec)?,
                markov: Some(spec),
            })
        }
    }
}

/// Runs one command, writing the report (or the error list) and returns the
/// process exit code. Diagnostics, including the effective seed, go to
/// `stderr`.
pub fn run(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    if cfg.command.is_randomized() {
        let _ = writeln!(stderr, "seed: {}", cfg.seed);
    }
    let outcome = match cfg.jobs {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(|| execute(cfg)),
            Err(e) => Err(Failure::Numeric(vec![ErrorEntry {
                kind: "thread-pool",
                message: e.to_string(),
                residual: None,
            }])),
        },
        None => execute(cfg),
    };
    let outcome = outcome.and_then(|report| {
        let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
        text.push('\n');
        match &cfg.output {
            Some(path) => fs::write(path, text).map_err(|e| Failure::io(path, e)),
            None => stdout
                .write_all(text.as_bytes())
                .map_err(|e| Failure::io(Path::new("<stdout>"), e)),
        }
    });
    match outcome {
        Ok(()) => 0,
        Err(failure) => {
            let (code, errors) = match failure {
                Failure::Validation(errors) => (2, errors),
                Failure::Numeric(errors) => (1, errors),
            };
            for e in &errors {
                let _ = writeln!(stderr, "error: {}", e.message);
            }
            let payload =
                serde_json::to_string_pretty(&json!({ "errors": errors })).expect("errors serialize");
            let _ = writeln!(stdout, "{payload}");
            code
        }
    }
}

fn execute(cfg: &RunConfig) -> Outcome<Value> {
    let input = load(cfg)?;
    let mut report = match cfg.command {
        Command::Validate => validate(cfg, &input.km)?,
        Command::Spectral => spectral(&input.km)?,
        Command::Irreducibility => irreducibility(&input.km)?,
        Command::PhiErg => phi_erg(cfg, &input.km)?,
        Command::Purification => purification(cfg, &input.km)?,
        Command::Trajectory => trajectory(cfg, &input.km)?,
        Command::Lyapunov => lyapunov(cfg, &input.km)?,
        Command::Entropy => entropy(&input)?,
        Command::MarkovReport => {
            let spec = input.markov.as_ref().ok_or_else(|| {
                Failure::from(Error::InvalidInput(
                    "markov-report needs a Markov file with a \"P\" key".into(),
                ))
            })?;
            let sample = SampleConfig::new(cfg.seed, cfg.n_steps(), cfg.n_paths())?;
            serde_json::to_value(MarkovReportJson::new(
                &entropy_lyapunov_report(spec, &sample)?,
                cfg.seed,
            ))
            .expect("report serializes")
        }
    };
    if let Value::Object(map) = &mut report {
        map.insert("command".into(), Value::String(cfg.command.name().into()));
        if cfg.command.is_randomized() {
            map.insert("seed".into(), json!(cfg.seed));
        }
    }
    Ok(report)
}

fn validate(cfg: &RunConfig, km: &KrausMeasure64) -> Outcome<Value> {
    let st = km.stochasticity(cfg.tol);
    let choi = km.choi_matrix();
    let mut errors = Vec::new();
    if !st.is_stochastic {
        errors.push(ErrorEntry {
            kind: "not-stochastic",
            message: format!(
                "sum of w L^dagger L differs from the identity by {:e}",
                st.residual
            ),
            residual: Some(st.residual),
        });
    }
    if choi.min_eigenvalue < -cfg.tol {
        errors.push(ErrorEntry {
            kind: "not-completely-positive",
            message: format!("Choi matrix has eigenvalue {:e}", choi.min_eigenvalue),
            residual: Some(choi.min_eigenvalue),
        });
    }
    if !errors.is_empty() {
        return Err(Failure::Validation(errors));
    }
    Ok(json!({
        "dim": km.dim(),
        "n_atoms": km.len(),
        "stochastic": true,
        "residual": number(st.residual),
        "choi_min_eigenvalue": number(choi.min_eigenvalue),
    }))
}

fn spectral(km: &KrausMeasure64) -> Outcome<Value> {
    let sd = spectral_data(km)?;
    Ok(json!({
        "lambda": number(sd.lambda),
        "rho_fixed": matrix_to_json(sd.rho_fixed.matrix()),
        "sigma": matrix_to_json(&sd.sigma_dual),
        "gap": number(sd.spectral_gap),
        "peripheral_multiplicity": sd.peripheral_multiplicity,
        "lambda_multiplicity": sd.lambda_multiplicity,
        "eigenvalues": sd.eigenvalues.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
        "rho_residual": number(sd.rho_residual(km)),
        "sigma_residual": number(sd.sigma_residual(km)),
    }))
}

fn irreducibility(km: &KrausMeasure64) -> Outcome<Value> {
    let v = is_irreducible(km)?;
    Ok(json!({
        "irreducible": v.irreducible,
        "spectral_criterion": v.spectral_criterion,
        "positivity_criterion": v.positivity_criterion,
        "reason": v.describe(),
    }))
}

fn phi_erg(cfg: &RunConfig, km: &KrausMeasure64) -> Outcome<Value> {
    let rep = minimal_invariant_subspaces(km, IRREDUCIBILITY_TRIALS.max(km.dim()), cfg.seed)?;
    let subspaces: Vec<Value> = rep
        .minimal_subspaces
        .iter()
        .map(|s| json!({ "dim": s.dim(), "projector": matrix_to_json(&s.projector()) }))
        .collect();
    Ok(json!({
        "is_phi_erg": rep.is_phi_erg,
        "is_irreducible": rep.is_irreducible,
        "minimal_subspaces": subspaces,
    }))
}

/// Largest `n ≤ max_depth` with `m^n` within the enumeration budget.
fn exact_depth(n_atoms: usize, max_depth: usize) -> usize {
    let mut n = 0;
    while n < max_depth && (n_atoms as f64).powi(n as i32 + 1) <= DEFAULT_WORD_BUDGET as f64 {
        n += 1;
    }
    n
}

fn purification(cfg: &RunConfig, km: &KrausMeasure64) -> Outcome<Value> {
    let max_depth = cfg.max_depth.unwrap_or(8);
    let scan = purification_scan(km, max_depth, 8, cfg.seed)?;
    let decay = wedge2_decay(
        km,
        exact_depth(km.len(), max_depth),
        max_depth,
        cfg.n_paths(),
        cfg.seed,
    )?;
    let report = PurificationJson::new(km, &scan, &decay);
    if let Some(dir) = &cfg.curves {
        let mut csv = String::from("n,exact,mc_mean,mc_stderr\n");
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for row in &report.d_n {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                row.n,
                opt(row.exact),
                opt(row.mc_mean),
                opt(row.mc_stderr)
            ));
        }
        write_curve(dir, "d_n.csv", &csv)?;
    }
    Ok(serde_json::to_value(report).expect("report serializes"))
}

fn trajectory(cfg: &RunConfig, km: &KrausMeasure64) -> Outcome<Value> {
    let sample = SampleConfig::new(cfg.seed, cfg.n_steps(), cfg.n_paths())?;
    let x0 = ProjectivePoint64::basis(km.dim(), 0)?;
    let paths = sample_x_process(km, &x0, &sample)?;
    let bary = empirical_barycenter(&paths, sample.burn_in)?;
    let rho = spectral_data(km)?.rho_fixed;
    let deviation = (bary.matrix() - rho.matrix())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if let Some(path) = &cfg.dump_paths {
        fs::write(path, paths_to_jsonl(&paths)).map_err(|e| Failure::io(path, e))?;
    }
    if let Some(dir) = &cfg.curves {
        let start = DensityMatrix64::pure(&x0);
        let tm = temporal_mean(km, &start, cfg.n_steps().max(1))?;
        let mut csv = String::from("n,distance\n");
        for (i, d) in tm.distances.iter().enumerate() {
            csv.push_str(&format!("{},{}\n", i + 1, d));
        }
        write_curve(dir, "temporal_mean.csv", &csv)?;
    }
    Ok(json!({
        "barycenter": matrix_to_json(bary.matrix()),
        "rho_fixed": matrix_to_json(rho.matrix()),
        "max_entry_deviation": number(deviation),
        "samples": sample.n_paths * (sample.n_steps - sample.burn_in),
        "n_steps": sample.n_steps,
        "n_paths": sample.n_paths,
        "burn_in": sample.burn_in,
    }))
}

fn lyapunov(cfg: &RunConfig, km: &KrausMeasure64) -> Outcome<Value> {
    let sample = SampleConfig::new(cfg.seed, cfg.n_steps(), cfg.n_paths())?;
    let est = estimate_exponents(km, None, &sample, &LyapunovOptions::default())?;
    let mut report = serde_json::to_value(LyapunovJson::from_estimate(&est)).expect("report serializes");
    let gap = match (est.gamma.first(), est.gamma.get(1)) {
        (Some(Exponent::Finite(a)), Some(Exponent::Finite(b))) => number(b - a),
        (Some(Exponent::Finite(_)), Some(Exponent::NegInfinity)) => {
            exponent_json::<f64>(&Exponent::NegInfinity)
        }
        _ => Value::Null,
    };
    if let Value::Object(map) = &mut report {
        map.insert("gap".into(), gap);
        map.insert(
            "mean_log_det".into(),
            est.mean_log_det().map_or(Value::Null, number),
        );
        map.insert("atom_frequencies".into(), json!(est.atom_frequencies()));
    }
    if let Some(dir) = &cfg.curves {
        let x0 = ProjectivePoint64::basis(km.dim(), 0)?;
        let tb = theorem_b_diagnostic(km, &x0, &sample, 20)?;
        let mut csv = String::from("n");
        for p in 0..tb.curves.len() {
            csv.push_str(&format!(",path{p}"));
        }
        csv.push('\n');
        for (i, n) in tb.checkpoints.iter().enumerate() {
            csv.push_str(&n.to_string());
            for curve in &tb.curves {
                csv.push_str(&format!(",{}", curve[i]));
            }
            csv.push('\n');
        }
        write_curve(dir, "theorem_b.csv", &csv)?;
    }
    Ok(report)
}

fn entropy(input: &Input) -> Outcome<Value> {
    let h = channel_entropy(&input.km)?;
    let mut report = json!({ "h": number(h), "h_bits": number(h / std::f64::consts::LN_2) });
    if let (Some(spec), Value::Object(map)) = (&input.markov, &mut report) {
        map.insert("h_classical".into(), number(classical_markov_entropy(spec)?));
        map.insert("stationary".into(), json!(spec.stationary()?));
    }
    Ok(report)
}

fn write_curve(dir: &Path, name: &str, csv: &str) -> Outcome<()> {
    fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, csv).map_err(|e| Failure::io(&path, e))
}
