//! Lyapunov spectrum of the random products `W_n = L(ω_n)⋯L(ω_1)` by
//! repeated QR, with explicit `−∞` detection, plus diagnostics for the gap
//! `γ₂ − γ₁` and for `(1/n)(log‖W_n x‖ − log‖W_n‖) → 0`.

use nalgebra::{ComplexField, DMatrix};
use rand::Rng;

use crate::channel::KrausMeasure;
use crate::ergodic::spectral_data;
use crate::error::{Error, Result};
use crate::linalg::{combinations, compound, hs_norm, singular_values, DensityMatrix, ProjectivePoint};
use crate::random::{random_unitary, PathRng};
use crate::scalar::{ComplexMatrix, ComplexVector, Real};
use crate::trajectory::{run_paths, select_atom, SampleConfig, WordSampler, PROBABILITY_SUM_TOL};

/// Per-step threshold on `|R_jj|` below which slot `j` collapses.
pub const DEFAULT_COLLAPSE_TOL: f64 = 1e-150;
/// Relative collapse threshold, in units of machine epsilon.
const RELATIVE_COLLAPSE_EPS: f64 = 1000.0;
/// Longest word for which the explicit product is formed.
pub const MAX_ORACLE_STEPS: usize = 60;

/// A Lyapunov exponent: finite, or `−∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent<T> {
    Finite(T),
    NegInfinity,
}

impl<T: Real> Exponent<T> {
    pub fn is_neg_infinity(&self) -> bool {
        matches!(self, Exponent::NegInfinity)
    }

    pub fn finite(&self) -> Option<T> {
        match self {
            Exponent::Finite(v) => Some(*v),
            Exponent::NegInfinity => None,
        }
    }

    /// Value as `f64`, with `−∞` mapped to `f64::NEG_INFINITY`.
    pub fn to_f64(&self) -> f64 {
        self.finite().map_or(f64::NEG_INFINITY, |v| v.as_f64())
    }
}

/// Tunables for [`estimate_exponents`] and friends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovOptions {
    pub collapse_tol: f64,
    /// Accept a non-stochastic measure, renormalizing step probabilities.
    pub allow_non_stochastic: bool,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        Self {
            collapse_tol: DEFAULT_COLLAPSE_TOL,
            allow_non_stochastic: false,
        }
    }
}

/// Running QR factorization `W_n Q_0 = Q_n R_n ⋯ R_1` of a matrix product.
///
/// Column pivoting is never used, so slot `j` tracks the `j`-th exponent.
/// When a diagonal entry collapses, that slot and every later one are frozen
/// at `−∞`, the corresponding `R_jj` is set to zero, and the frame is
/// completed by an orthonormal vector.
#[derive(Debug, Clone)]
pub struct QrAccumulator<T: Real> {
    q: ComplexMatrix<T>,
    log_sums: Vec<T>,
    collapse_step: Vec<Option<usize>>,
    steps: usize,
    collapse_tol: T,
    /// Graded triangular product: `R_n ⋯ R_1 = diag(e^{log_sums}) T̂` on the
    /// live slots, with rows of frozen slots dropped.
    product: Option<ComplexMatrix<T>>,
}

impl<T: Real> QrAccumulator<T> {
    /// Starts from the orthonormal frame `q0`. With `track_product` the
    /// triangular product is kept so that singular values of `W_n` can be
    /// read off.
    pub fn new(q0: ComplexMatrix<T>, collapse_tol: f64, track_product: bool) -> Result<Self> {
        let k = q0.nrows();
        if q0.ncols() != k || k == 0 {
            return Err(Error::InvalidInput("initial frame must be square".into()));
        }
        let defect = hs_norm(&(q0.adjoint() * &q0 - DMatrix::identity(k, k)));
        if defect > T::cast(1e-10).max(T::cast(1e3) * T::epsilon()) {
            return Err(Error::InvalidInput(format!(
                "initial frame not unitary (defect {defect})"
            )));
        }
        Ok(Self {
            q: q0,
            log_sums: vec![T::zero(); k],
            collapse_step: vec![None; k],
            steps: 0,
            collapse_tol: T::cast(collapse_tol),
            product: track_product.then(|| DMatrix::identity(k, k)),
        })
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn frame(&self) -> &ComplexMatrix<T> {
        &self.q
    }

    /// `Σ_t log|R_jj^{(t)}|` per slot; meaningful only for slots that have
    /// not collapsed.
    pub fn log_sums(&self) -> &[T] {
        &self.log_sums
    }

    /// Step (1-based) at which each slot collapsed.
    pub fn collapse_steps(&self) -> &[Option<usize>] {
        &self.collapse_step
    }

    /// Multiplies the product on the left by `l` and returns `|R_jj|`.
    pub fn push(&mut self, l: &ComplexMatrix<T>) -> Vec<T> {
        let k = self.dim();
        let m = l * &self.q;
        let m_norm = hs_norm(&m);
        let rel = T::cast(RELATIVE_COLLAPSE_EPS) * T::epsilon();
        let mut q = DMatrix::zeros(k, k);
        let mut r = DMatrix::zeros(k, k);
        let mut diag = vec![T::zero(); k];
        let old_sums = self.log_sums.clone();
        let live_before = self.collapse_step.iter().take_while(|c| c.is_none()).count();
        self.steps += 1;
        for j in 0..k {
            let c = m.column(j).clone_owned();
            let c_norm = c.norm();
            let mut v = c;
            for _ in 0..2 {
                for i in 0..j {
                    let qi = q.column(i);
                    let h = qi.dotc(&v);
                    v -= qi * h;
                    r[(i, j)] += h;
                }
            }
            let v_norm = v.norm();
            let degenerate = v_norm <= self.collapse_tol || v_norm <= rel * c_norm || c_norm <= rel * m_norm;
            if degenerate {
                if self.collapse_step[j].is_none() {
                    for slot in &mut self.collapse_step[j..] {
                        slot.get_or_insert(self.steps);
                    }
                }
                q.set_column(j, &completion(&q, j));
            } else {
                q.set_column(j, &v.unscale(v_norm));
                r[(j, j)] = crate::scalar::cplx(v_norm);
                diag[j] = v_norm;
                if self.collapse_step[j].is_none() {
                    self.log_sums[j] += v_norm.ln();
                }
            }
        }
        self.q = q;
        if let Some(t) = self.product.as_mut() {
            let live = self.collapse_step.iter().take_while(|c| c.is_none()).count();
            let mut next = DMatrix::zeros(k, k);
            for i in 0..live {
                for j in i..live_before {
                    let f = r[(i, j)] * crate::scalar::cplx((old_sums[j] - self.log_sums[i]).exp());
                    for c in 0..k {
                        next[(i, c)] += f * t[(j, c)];
                    }
                }
            }
            *t = next;
        }
        diag
    }

    /// `log(a₁(W_n) ⋯ a_p(W_n))`, from the tracked triangular product.
    pub fn log_wedge(&self, p: usize) -> Result<Exponent<T>> {
        let t = self
            .product
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("accumulator does not track the product".into()))?;
        let k = self.dim();
        if p == 0 || p > k {
            return Err(Error::InvalidInput(format!("wedge order {p} outside [1, {k}]")));
        }
        let live = self.collapse_step.iter().take_while(|c| c.is_none()).count();
        if p > live {
            return Ok(Exponent::NegInfinity);
        }
        // rows of ∧^p T are rows of ∧^p T̂ scaled by e^{Σ_{i∈I} s_i}
        let subsets = combinations(k, p);
        let scales: Vec<Option<T>> = subsets
            .iter()
            .map(|set| {
                set.iter()
                    .all(|&i| i < live)
                    .then(|| set.iter().fold(T::zero(), |a, &i| a + self.log_sums[i]))
            })
            .collect();
        let top = scales
            .iter()
            .flatten()
            .fold(None, |m: Option<T>, &v| Some(m.map_or(v, |m| m.max(v))));
        let top = top.expect("p <= live gives a live subset");
        let mut c = compound(t, p)?;
        for (r, sc) in scales.iter().enumerate() {
            let f = sc.map_or(T::zero(), |v| (v - top).exp());
            c.row_mut(r).scale_mut(f);
        }
        let sv = singular_values(&c)[0];
        Ok(if sv > T::zero() {
            Exponent::Finite(sv.ln() + top)
        } else {
            Exponent::NegInfinity
        })
    }

    /// `log ‖W_n‖`.
    pub fn log_norm(&self) -> Result<Exponent<T>> {
        self.log_wedge(1)
    }
}

/// Unit vector orthogonal to the first `j` columns of `q`, taken from the
/// standard basis vector with the largest residual.
fn completion<T: Real>(q: &ComplexMatrix<T>, j: usize) -> ComplexVector<T> {
    let k = q.nrows();
    let mut best: Option<(T, ComplexVector<T>)> = None;
    for i in 0..k {
        let mut v = ComplexVector::zeros(k);
        v[i] = crate::scalar::cplx(T::one());
        for _ in 0..2 {
            for c in 0..j {
                let qc = q.column(c);
                let h = qc.dotc(&v);
                v -= qc * h;
            }
        }
        let n = v.norm();
        if best.as_ref().is_none_or(|(b, _)| n > *b) {
            best = Some((n, v));
        }
    }
    let (n, v) = best.expect("k >= 1");
    v.unscale(n)
}

/// Accumulated data of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathExponents<T: Real> {
    /// `Σ_t log|R_jj|` per slot (frozen at collapse).
    pub log_sums: Vec<T>,
    /// `(1/n) log a_p(W_n)` for `p = 1..=k`.
    pub exponents: Vec<Exponent<T>>,
    pub collapse_step: Vec<Option<usize>>,
    /// `Σ_t log|det L(ω_t)|`, or `None` if some sampled atom is singular.
    pub log_det: Option<T>,
    pub atom_counts: Vec<u64>,
}

/// Estimated spectrum `γ₁ ≥ … ≥ γ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovEstimate<T: Real> {
    pub gamma: Vec<Exponent<T>>,
    /// Standard error across paths (zero for `−∞` entries or a single path).
    pub stderr: Vec<T>,
    /// Latest collapse step over the paths on which the slot collapsed.
    pub collapse_step: Vec<Option<usize>>,
    /// Number of paths on which each slot collapsed.
    pub collapsed_paths: Vec<usize>,
    pub n_steps: usize,
    pub n_paths: usize,
    pub per_path: Vec<PathExponents<T>>,
}

impl<T: Real> LyapunovEstimate<T> {
    /// Mean of `(1/n) log|det W_n|` over paths without collapse and without
    /// singular atoms.
    pub fn mean_log_det(&self) -> Option<T> {
        let vals: Vec<T> = self
            .per_path
            .iter()
            .filter(|p| p.collapse_step.iter().all(Option::is_none))
            .filter_map(|p| p.log_det)
            .collect();
        if vals.is_empty() {
            return None;
        }
        let n = T::cast(self.n_steps as f64);
        Some(vals.iter().fold(T::zero(), |a, &v| a + v / n) / T::cast(vals.len() as f64))
    }

    /// Empirical frequency of each atom over all sampled steps.
    pub fn atom_frequencies(&self) -> Vec<f64> {
        let m = self.per_path.first().map_or(0, |p| p.atom_counts.len());
        let mut counts = vec![0u64; m];
        for p in &self.per_path {
            for (c, &x) in counts.iter_mut().zip(&p.atom_counts) {
                *c += x;
            }
        }
        let total: u64 = counts.iter().sum();
        counts.iter().map(|&c| c as f64 / total.max(1) as f64).collect()
    }
}

fn mean_and_stderr<T: Real>(vals: &[T]) -> (T, T) {
    let n = T::cast(vals.len() as f64);
    let mean = vals.iter().fold(T::zero(), |a, &v| a + v) / n;
    if vals.len() < 2 {
        return (mean, T::zero());
    }
    let var = vals.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean)) / (n - T::one());
    (mean, (var / n).sqrt())
}

/// Checks the measure and resolves the initial state (default: the
/// channel fixed point).
fn prepare<T: Real>(
    km: &KrausMeasure<T>,
    rho: Option<&DensityMatrix<T>>,
    opts: &LyapunovOptions,
) -> Result<DensityMatrix<T>> {
    if !opts.allow_non_stochastic {
        km.require_stochastic(PROBABILITY_SUM_TOL)?;
    } else if !km.is_stochastic(PROBABILITY_SUM_TOL) {
        log::warn!("non-stochastic measure: step probabilities are renormalized");
    }
    match rho {
        Some(r) => {
            if r.dim() != km.dim() {
                return Err(Error::DimensionMismatch {
                    expected: km.dim(),
                    found: r.dim(),
                });
            }
            let sd = spectral_data(km)?;
            let drift = hs_norm(&(km.apply_channel(r.matrix())?.unscale(sd.lambda) - r.matrix()));
            if drift > T::cast(1e-8) {
                log::warn!("initial state is not the channel fixed point (residual {drift})");
            }
            Ok(r.clone())
        }
        None => Ok(spectral_data(km)?.rho_fixed),
    }
}

fn sampler<'a, T: Real>(
    km: &'a KrausMeasure<T>,
    rho: &DensityMatrix<T>,
    opts: &LyapunovOptions,
) -> Result<WordSampler<'a, T>> {
    let s = WordSampler::new(km, rho)?;
    Ok(if opts.allow_non_stochastic {
        s.renormalizing()
    } else {
        s
    })
}

fn atom_log_dets<T: Real>(km: &KrausMeasure<T>) -> Vec<Option<T>> {
    km.atoms()
        .iter()
        .map(|a| {
            let d = a.matrix().clone().determinant().modulus();
            (d > T::zero()).then(|| d.ln())
        })
        .collect()
}

fn run_path<T: Real>(
    km: &KrausMeasure<T>,
    rho: &DensityMatrix<T>,
    n_steps: usize,
    opts: &LyapunovOptions,
    log_dets: &[Option<T>],
    rng: &mut PathRng,
) -> Result<PathExponents<T>> {
    let q0 = random_unitary(km.dim(), rng);
    let mut acc = QrAccumulator::new(q0, opts.collapse_tol, true)?;
    let mut words = sampler(km, rho, opts)?;
    let mut log_det = Some(T::zero());
    let mut atom_counts = vec![0u64; km.len()];
    for _ in 0..n_steps {
        let (a, _) = words.step(rng)?;
        acc.push(km.atoms()[a].matrix());
        atom_counts[a] += 1;
        log_det = log_det.zip(log_dets[a]).map(|(s, d)| s + d);
    }
    let n = T::cast(n_steps as f64);
    let mut exponents = Vec::with_capacity(km.dim());
    let mut prev = T::zero();
    for p in 1..=km.dim() {
        match acc.log_wedge(p)? {
            Exponent::Finite(v) => {
                exponents.push(Exponent::Finite((v - prev) / n));
                prev = v;
            }
            Exponent::NegInfinity => exponents.push(Exponent::NegInfinity),
        }
    }
    Ok(PathExponents {
        log_sums: acc.log_sums.clone(),
        exponents,
        collapse_step: acc.collapse_step.clone(),
        log_det,
        atom_counts,
    })
}

/// Lyapunov spectrum from words sampled under `ℙ^ρ` (default `ρ = ρ_L`).
///
/// `γ_p` is the path mean of `(1/n) log a_p(W_n)`, with the singular values
/// read off the QR factors. A slot that collapses on any path is reported as
/// `−∞`.
pub fn estimate_exponents<T: Real>(
    km: &KrausMeasure<T>,
    rho: Option<&DensityMatrix<T>>,
    cfg: &SampleConfig,
    opts: &LyapunovOptions,
) -> Result<LyapunovEstimate<T>> {
    let rho = prepare(km, rho, opts)?;
    let log_dets = atom_log_dets(km);
    let per_path = run_paths(cfg, |rng| run_path(km, &rho, cfg.n_steps, opts, &log_dets, rng))?;
    let k = km.dim();
    let mut gamma = Vec::with_capacity(k);
    let mut stderr = Vec::with_capacity(k);
    let mut collapse_step = Vec::with_capacity(k);
    let mut collapsed_paths = Vec::with_capacity(k);
    for j in 0..k {
        let steps: Vec<usize> = per_path.iter().filter_map(|p| p.collapse_step[j]).collect();
        collapsed_paths.push(steps.len());
        collapse_step.push(steps.iter().copied().max());
        let vals: Option<Vec<T>> = per_path.iter().map(|p| p.exponents[j].finite()).collect();
        match vals {
            Some(vals) if steps.is_empty() => {
                let (m, s) = mean_and_stderr(&vals);
                gamma.push(Exponent::Finite(m));
                stderr.push(s);
            }
            _ => {
                gamma.push(Exponent::NegInfinity);
                stderr.push(T::zero());
            }
        }
    }
    Ok(LyapunovEstimate {
        gamma,
        stderr,
        collapse_step,
        collapsed_paths,
        n_steps: cfg.n_steps,
        n_paths: per_path.len(),
        per_path,
    })
}

/// Estimate of `γ₂ − γ₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct GapEstimate<T: Real> {
    pub gap: Exponent<T>,
    pub stderr: T,
    /// Paths on which the first slot survived.
    pub paths_used: usize,
    /// Upper end of the one-sided 95% normal bound on the gap.
    pub upper_95: Exponent<T>,
}

/// `lim (1/n) log(|∧²W_n| / |W_n|²)` from the QR factors.
///
/// The limit is only meaningful when `γ₁ > −∞`, so paths on which the first
/// slot collapsed are excluded.
pub fn gap_estimate<T: Real>(
    km: &KrausMeasure<T>,
    rho: Option<&DensityMatrix<T>>,
    cfg: &SampleConfig,
    opts: &LyapunovOptions,
) -> Result<GapEstimate<T>> {
    if km.dim() < 2 {
        return Err(Error::InvalidInput("gap needs dimension at least 2".into()));
    }
    let est = estimate_exponents(km, rho, cfg, opts)?;
    let usable: Vec<&PathExponents<T>> = est
        .per_path
        .iter()
        .filter(|p| p.collapse_step[0].is_none())
        .collect();
    if usable.is_empty() {
        return Err(Error::InvalidInput(
            "first exponent is -inf on every path; gap undefined".into(),
        ));
    }
    if usable.iter().any(|p| p.collapse_step[1].is_some()) {
        return Ok(GapEstimate {
            gap: Exponent::NegInfinity,
            stderr: T::zero(),
            paths_used: usable.len(),
            upper_95: Exponent::NegInfinity,
        });
    }
    let vals: Vec<T> = usable
        .iter()
        .map(|p| match (p.exponents[0], p.exponents[1]) {
            (Exponent::Finite(a), Exponent::Finite(b)) => b - a,
            _ => unreachable!("slots 1 and 2 survived"),
        })
        .collect();
    let (mean, se) = mean_and_stderr(&vals);
    Ok(GapEstimate {
        gap: Exponent::Finite(mean),
        stderr: se,
        paths_used: usable.len(),
        upper_95: Exponent::Finite(mean + T::cast(1.645) * se),
    })
}

/// Accumulator against explicit products.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport<T: Real> {
    /// Max over paths and `p` of `|log(a₁⋯a_p)_{QR} − log|∧^p W_n||`, the
    /// latter from the explicitly multiplied product in `∧^p`.
    pub max_discrepancy: T,
    pub per_order: Vec<T>,
    /// Same comparison against plain SVD of the explicitly multiplied `W_n`;
    /// loses relative accuracy once `a_p / a₁` nears machine precision.
    pub plain_svd_discrepancy: T,
    /// Same comparison for the raw slot sums `Σ_t log|R_jj|`, which only
    /// agree asymptotically.
    pub slot_sum_discrepancy: T,
}

fn log_or_neg_inf<T: Real>(x: T, scale: T) -> Exponent<T> {
    if x > T::zero() {
        Exponent::Finite(x.ln() + scale)
    } else {
        Exponent::NegInfinity
    }
}

fn discrepancy<T: Real>(a: Exponent<T>, b: Exponent<T>) -> T {
    match (a, b) {
        (Exponent::Finite(x), Exponent::Finite(y)) => (x - y).abs(),
        (Exponent::NegInfinity, Exponent::NegInfinity) => T::zero(),
        _ => T::cast(f64::INFINITY),
    }
}

/// Compares `log(a₁(W_n)⋯a_p(W_n))` read from the QR accumulator with the
/// same quantity from explicitly multiplied products, for `n ≤ 60`.
pub fn wedge_vs_qr_oracle<T: Real>(
    km: &KrausMeasure<T>,
    rho: Option<&DensityMatrix<T>>,
    cfg: &SampleConfig,
    opts: &LyapunovOptions,
) -> Result<OracleReport<T>> {
    if cfg.n_steps > MAX_ORACLE_STEPS {
        return Err(Error::Overflow);
    }
    let rho = prepare(km, rho, opts)?;
    let k = km.dim();
    let compounds: Vec<Vec<ComplexMatrix<T>>> = (1..=k)
        .map(|p| {
            km.atoms()
                .iter()
                .map(|a| compound(a.matrix(), p))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let rows = run_paths(cfg, |rng| {
        let q0 = random_unitary(k, rng);
        let mut acc = QrAccumulator::new(q0, opts.collapse_tol, true)?;
        let mut words = sampler(km, &rho, opts)?;
        let mut direct: ComplexMatrix<T> = DMatrix::identity(k, k);
        let mut wedges: Vec<ComplexMatrix<T>> = compounds
            .iter()
            .map(|c| DMatrix::identity(c[0].nrows(), c[0].nrows()))
            .collect();
        for _ in 0..cfg.n_steps {
            let (a, _) = words.step(rng)?;
            acc.push(km.atoms()[a].matrix());
            direct = km.atoms()[a].matrix() * direct;
            for (w, c) in wedges.iter_mut().zip(&compounds) {
                *w = &c[a] * &*w;
            }
        }
        if direct
            .iter()
            .chain(wedges.iter().flatten())
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::Overflow);
        }
        let sv = singular_values(&direct);
        let mut per_order = Vec::with_capacity(k);
        let mut plain = T::zero();
        let mut slot = T::zero();
        let mut slot_sum = Exponent::Finite(T::zero());
        for p in 1..=k {
            let qr = acc.log_wedge(p)?;
            let oracle = log_or_neg_inf(singular_values(&wedges[p - 1])[0], T::zero());
            per_order.push(discrepancy(qr, oracle));
            let plain_wedge = sv[..p].iter().fold(T::one(), |a, &s| a * s);
            plain = plain.max(discrepancy(qr, log_or_neg_inf(plain_wedge, T::zero())));
            slot_sum = match (slot_sum, acc.collapse_steps()[p - 1]) {
                (Exponent::Finite(s), None) => Exponent::Finite(s + acc.log_sums()[p - 1]),
                _ => Exponent::NegInfinity,
            };
            slot = slot.max(discrepancy(slot_sum, oracle));
        }
        Ok((per_order, plain, slot))
    })?;
    let mut per_order = vec![T::zero(); k];
    let mut plain = T::zero();
    let mut slot = T::zero();
    for (po, pl, sl) in rows {
        for (m, v) in per_order.iter_mut().zip(po) {
            *m = m.max(v);
        }
        plain = plain.max(pl);
        slot = slot.max(sl);
    }
    let max_discrepancy = per_order.iter().fold(T::zero(), |a, &v| a.max(v));
    Ok(OracleReport {
        max_discrepancy,
        per_order,
        plain_svd_discrepancy: plain,
        slot_sum_discrepancy: slot,
    })
}

/// Curves of `(1/n)(log‖W_n x‖ − log‖W_n‖)` along sampled paths.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoremBReport<T: Real> {
    pub checkpoints: Vec<usize>,
    /// `curves[path][i]` is the value at `checkpoints[i]`.
    pub curves: Vec<Vec<T>>,
    pub terminal: Vec<T>,
    pub median_abs_terminal: T,
}

/// Roughly geometric checkpoints in `1..=n`, always including `n`.
pub fn checkpoints(n: usize, count: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..count.max(1))
        .map(|i| {
            let f = (i as f64 + 1.0) / count.max(1) as f64;
            ((n as f64).powf(f).round() as usize).clamp(1, n)
        })
        .collect();
    out.push(n);
    out.sort_unstable();
    out.dedup();
    out
}

/// Words are sampled under `ℙ^{xx†}` (the process started at `x`);
/// `‖W_n x‖` is tracked by a renormalized vector and `‖W_n‖` by the QR
/// accumulator.
pub fn theorem_b_diagnostic<T: Real>(
    km: &KrausMeasure<T>,
    x: &ProjectivePoint<T>,
    cfg: &SampleConfig,
    n_checkpoints: usize,
) -> Result<TheoremBReport<T>> {
    km.require_stochastic(PROBABILITY_SUM_TOL)?;
    if x.dim() != km.dim() {
        return Err(Error::DimensionMismatch {
            expected: km.dim(),
            found: x.dim(),
        });
    }
    let marks = checkpoints(cfg.n_steps, n_checkpoints);
    let curves = run_paths(cfg, |rng| {
        let mut acc = QrAccumulator::new(random_unitary(km.dim(), rng), DEFAULT_COLLAPSE_TOL, true)?;
        let mut y = x.vector().clone();
        let mut log_wx = T::zero();
        let mut curve = Vec::with_capacity(marks.len());
        let mut next = 0;
        for t in 1..=cfg.n_steps {
            let images: Vec<ComplexVector<T>> = km.atoms().iter().map(|a| a.matrix() * &y).collect();
            let probs: Vec<f64> = km
                .atoms()
                .iter()
                .zip(&images)
                .map(|(a, v)| (a.weight() * v.norm_squared()).as_f64())
                .collect();
            let a = select_atom(&probs, false, T::floor_tol(PROBABILITY_SUM_TOL), rng)?;
            let norm = images[a].norm();
            log_wx += norm.ln();
            y = images[a].unscale(norm);
            acc.push(km.atoms()[a].matrix());
            if t == marks[next] {
                let log_w = acc.log_norm()?.finite().ok_or(Error::DegenerateStep)?;
                curve.push((log_wx - log_w) / T::cast(t as f64));
                next += 1;
            }
        }
        Ok(curve)
    })?;
    let terminal: Vec<T> = curves.iter().map(|c| *c.last().expect("n_steps >= 1")).collect();
    let mut abs: Vec<T> = terminal.iter().map(|v| v.abs()).collect();
    abs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mid = abs.len() / 2;
    let median_abs_terminal = if abs.len() % 2 == 1 {
        abs[mid]
    } else {
        (abs[mid - 1] + abs[mid]) * T::cast(0.5)
    };
    Ok(TheoremBReport {
        checkpoints: marks,
        curves,
        terminal,
        median_abs_terminal,
    })
}

/// Draws a random starting frame; exposed for matched-seed experiments.
pub fn random_frame<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix<T> {
    random_unitary(dim, rng)
}
