//! Operational tests of the purification condition: depth-`n` purification
//! of a projector, the `∧²` contraction rate `d_n`, and rank-one convergence
//! of `Y_n = W_n†W_n / tr(W_n†W_n)`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::channel::KrausMeasure;
use crate::error::{Error, Result};
use crate::linalg::{
    column_space, combinations, compound, hermitian_eigen, hermitize, hs_norm, identity, singular_values,
    DensityMatrix,
};
use crate::lyapunov::Exponent;
use crate::random::{aux_rng, random_projector};
use crate::scalar::{ComplexMatrix, Real};
use crate::trajectory::{run_paths, SampleConfig, WordSampler, PROBABILITY_SUM_TOL};

/// Default cap on the number of enumerated words.
pub const DEFAULT_WORD_BUDGET: usize = 1_000_000;
/// Relative tolerance of the proportionality test `B†MB ∝ Id`.
pub const PROPORTIONALITY_TOL: f64 = 1e-9;

/// Orthogonal projector of rank at least two.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector<T: Real> {
    matrix: ComplexMatrix<T>,
    basis: ComplexMatrix<T>,
}

impl<T: Real> Projector<T> {
    /// Validates Hermiticity and idempotence within `1e-10`.
    pub fn new(matrix: ComplexMatrix<T>) -> Result<Self> {
        let tol = T::cast(T::floor_tol(1e-10));
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::InvalidInput("projector must be square".into()));
        }
        if hs_norm(&(&matrix - matrix.adjoint())) > tol || hs_norm(&(&matrix * &matrix - &matrix)) > tol {
            return Err(Error::InvalidInput(
                "matrix is not an orthogonal projector".into(),
            ));
        }
        let rank = matrix.trace().re.as_f64().round() as usize;
        if rank < 2 {
            return Err(Error::InvalidInput(format!("projector rank {rank} < 2")));
        }
        let (values, vectors) = hermitian_eigen(&matrix);
        let cols: Vec<usize> = (0..values.len()).filter(|&i| values[i] > T::cast(0.5)).collect();
        if cols.len() != rank {
            return Err(Error::InvalidInput(
                "projector trace and spectrum disagree".into(),
            ));
        }
        Ok(Self {
            basis: vectors.select_columns(&cols),
            matrix,
        })
    }

    /// Projector onto the span of the given columns.
    pub fn onto_span(vectors: &ComplexMatrix<T>) -> Result<Self> {
        let basis = column_space(vectors, 1e-10);
        Self::new(&basis * basis.adjoint())
    }

    /// Projector onto the coordinate subspace spanned by `e_i`, `i ∈ coords`.
    pub fn coordinate(dim: usize, coords: &[usize]) -> Result<Self> {
        if coords.iter().any(|&i| i >= dim) {
            return Err(Error::InvalidInput("coordinate out of range".into()));
        }
        let id = identity::<T>(dim);
        Self::onto_span(&id.select_columns(coords))
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.matrix
    }

    /// Orthonormal basis of the range, as columns.
    pub fn basis(&self) -> &ComplexMatrix<T> {
        &self.basis
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Whether `B†MB` fails to be a multiple of the identity (`B` the basis of
/// the projector's range).
pub fn breaks_proportionality<T: Real>(pi: &Projector<T>, m: &ComplexMatrix<T>) -> bool {
    let r = pi.basis().adjoint() * m * pi.basis();
    let norm = hs_norm(&r);
    if norm == T::zero() {
        return false;
    }
    let scalar = r.trace() / crate::scalar::cplx(T::cast(pi.rank() as f64));
    let dev = &r - DMatrix::identity(pi.rank(), pi.rank()) * scalar;
    hs_norm(&dev) > T::cast(T::floor_tol(PROPORTIONALITY_TOL)) * norm
}

fn check_budget(m: usize, n: usize, budget: usize) -> Result<()> {
    let words = (m as f64).powi(n as i32);
    if words > budget as f64 {
        return Err(Error::BudgetExceeded {
            words,
            budget: budget as f64,
        });
    }
    Ok(())
}

/// Depth-first search for a word `ω₁…ω_n` with `πW†Wπ ∝̸ π`, where
/// `W = L(ω_n)⋯L(ω_1)`. Returns the first such word in lexicographic order.
pub fn purifies_at_depth<T: Real>(
    km: &KrausMeasure<T>,
    pi: &Projector<T>,
    n: usize,
    budget: usize,
) -> Result<Option<Vec<usize>>> {
    if n == 0 {
        return Err(Error::InvalidInput("depth must be at least 1".into()));
    }
    if pi.dim() != km.dim() {
        return Err(Error::DimensionMismatch {
            expected: km.dim(),
            found: pi.dim(),
        });
    }
    check_budget(km.len(), n, budget)?;

    fn dfs<T: Real>(
        km: &KrausMeasure<T>,
        pi: &Projector<T>,
        w: &ComplexMatrix<T>,
        word: &mut Vec<usize>,
        n: usize,
    ) -> Option<Vec<usize>> {
        if word.len() == n {
            return breaks_proportionality(pi, &(w.adjoint() * w)).then(|| word.clone());
        }
        for (a, atom) in km.atoms().iter().enumerate() {
            let next = atom.matrix() * w;
            if hs_norm(&next) == T::zero() {
                continue;
            }
            word.push(a);
            if let Some(found) = dfs(km, pi, &next, word, n) {
                return Some(found);
            }
            word.pop();
        }
        None
    }

    let hits: Vec<Option<Vec<usize>>> = (0..km.len())
        .into_par_iter()
        .map(|a| {
            let w = km.atoms()[a].matrix().clone();
            if hs_norm(&w) == T::zero() {
                return None;
            }
            dfs(km, pi, &w, &mut vec![a], n)
        })
        .collect();
    Ok(hits.into_iter().flatten().next())
}

/// Span of `{W†W : |W| ≤ n}` for all `n`, with the depth at which it
/// stabilized. The span at depth `n+1` is `V_1 + Σ_a L_a† V_n L_a`, so it
/// stops growing after at most `k²` steps.
#[derive(Debug, Clone)]
pub struct WordGramSpan<T: Real> {
    /// Orthonormal (Hilbert–Schmidt) basis of Hermitian-matrix span.
    pub basis: Vec<ComplexMatrix<T>>,
    pub stable_depth: usize,
}

pub fn word_gram_span<T: Real>(km: &KrausMeasure<T>) -> WordGramSpan<T> {
    let k = km.dim();
    let grams: Vec<ComplexMatrix<T>> = km
        .atoms()
        .iter()
        .map(|a| a.matrix().adjoint() * a.matrix())
        .collect();
    let mut basis: Vec<ComplexMatrix<T>> = Vec::new();
    let tol = T::cast(1e-10);
    let add = |basis: &mut Vec<ComplexMatrix<T>>, m: ComplexMatrix<T>| -> bool {
        let mut v = m;
        for _ in 0..2 {
            for b in basis.iter() {
                let h = b.dotc(&v);
                v -= b * h;
            }
        }
        let n = hs_norm(&v);
        if n > tol {
            basis.push(v.unscale(n));
            true
        } else {
            false
        }
    };
    let mut frontier = Vec::new();
    for g in &grams {
        let scale = hs_norm(g);
        if scale > T::zero() && add(&mut basis, g.unscale(scale)) {
            frontier.push(basis.last().expect("just pushed").clone());
        }
    }
    let mut depth = 1;
    while !frontier.is_empty() && depth <= k * k {
        let mut next = Vec::new();
        for m in &frontier {
            for atom in km.atoms() {
                let image = atom.matrix().adjoint() * m * atom.matrix();
                let scale = hs_norm(&image);
                if scale > T::zero() && add(&mut basis, image.unscale(scale)) {
                    next.push(basis.last().expect("just pushed").clone());
                }
            }
        }
        frontier = next;
        depth += 1;
    }
    WordGramSpan {
        basis,
        stable_depth: depth,
    }
}

/// Whether `πW†Wπ ∝ π` for every word of every length.
pub fn never_purifies<T: Real>(span: &WordGramSpan<T>, pi: &Projector<T>) -> bool {
    span.basis
        .iter()
        .all(|m| !breaks_proportionality(pi, &hermitize(m)) && !breaks_proportionality(pi, &skew_part(m)))
}

/// `(M − M†)/(2i)`, Hermitian.
fn skew_part<T: Real>(m: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    let d = m - m.adjoint();
    d * nalgebra::Complex::new(T::zero(), T::cast(-0.5))
}

/// How a candidate projector was chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum CandidateKind {
    Coordinate(Vec<usize>),
    EigenvectorPair { atom: usize, pair: (usize, usize) },
    Random(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateResult<T: Real> {
    pub kind: CandidateKind,
    pub projector: Projector<T>,
    /// Smallest depth `≤ max_depth` at which it purifies, with the witness.
    pub purified_at: Option<(usize, Vec<usize>)>,
    /// Set for candidates not purified by `max_depth`: whether every word of
    /// every length leaves it proportional (a conclusive non-purification).
    pub never_purifies: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    PurifyingEvidence,
    NonPurifyingWitness,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport<T: Real> {
    pub candidates: Vec<CandidateResult<T>>,
    /// Indices of candidates that provably never purify.
    pub witnesses: Vec<usize>,
    pub verdict: Verdict,
}

fn candidate_family<T: Real>(
    km: &KrausMeasure<T>,
    n_random: usize,
    seed: u64,
) -> Result<Vec<(CandidateKind, Projector<T>)>> {
    let k = km.dim();
    let mut out = Vec::new();
    let coordinate_sets: Vec<Vec<usize>> = if k <= 6 {
        (2..=k).flat_map(|r| combinations(k, r)).collect()
    } else {
        let mut sets = combinations(k, 2);
        sets.push((0..k).collect());
        sets
    };
    for set in coordinate_sets {
        out.push((
            CandidateKind::Coordinate(set.clone()),
            Projector::coordinate(k, &set)?,
        ));
    }
    for (a, atom) in km.atoms().iter().enumerate() {
        let (_, vectors) = hermitian_eigen(&(atom.matrix().adjoint() * atom.matrix()));
        for pair in combinations(k, 2) {
            let p = Projector::onto_span(&vectors.select_columns(&pair))?;
            out.push((
                CandidateKind::EigenvectorPair {
                    atom: a,
                    pair: (pair[0], pair[1]),
                },
                p,
            ));
        }
    }
    let mut rng = aux_rng(seed);
    for i in 0..n_random {
        let rank = 2 + i % (k - 1);
        out.push((
            CandidateKind::Random(i),
            Projector::new(random_projector(k, rank, &mut rng))?,
        ));
    }
    Ok(out)
}

/// Tests a finite family of rank `≥ 2` projectors: every coordinate
/// subspace (all of them for `k ≤ 6`, otherwise pairs and the full space),
/// spans of eigenvector pairs of each `L_a†L_a`, and `n_random` seeded random
/// projectors.
///
/// A candidate that never purifies is re-checked against the span of all
/// `W†W`, so a reported witness is conclusive; purification of every
/// candidate is only evidence.
pub fn purification_scan<T: Real>(
    km: &KrausMeasure<T>,
    max_depth: usize,
    n_random: usize,
    seed: u64,
) -> Result<ScanReport<T>> {
    if max_depth == 0 {
        return Err(Error::InvalidInput("max_depth must be at least 1".into()));
    }
    if km.dim() < 2 {
        return Err(Error::InvalidInput(
            "purification needs dimension at least 2".into(),
        ));
    }
    let family = candidate_family(km, n_random, seed)?;
    let span = word_gram_span(km);
    let mut candidates = Vec::with_capacity(family.len());
    for (kind, projector) in family {
        let mut purified_at = None;
        for n in 1..=max_depth {
            if check_budget(km.len(), n, DEFAULT_WORD_BUDGET).is_err() {
                break;
            }
            if let Some(word) = purifies_at_depth(km, &projector, n, DEFAULT_WORD_BUDGET)? {
                purified_at = Some((n, word));
                break;
            }
        }
        let never = purified_at.is_none().then(|| never_purifies(&span, &projector));
        candidates.push(CandidateResult {
            kind,
            projector,
            purified_at,
            never_purifies: never,
        });
    }
    let witnesses: Vec<usize> = (0..candidates.len())
        .filter(|&i| candidates[i].never_purifies == Some(true))
        .collect();
    let verdict = if !witnesses.is_empty() {
        Verdict::NonPurifyingWitness
    } else if candidates.iter().all(|c| c.purified_at.is_some()) {
        Verdict::PurifyingEvidence
    } else {
        Verdict::Inconclusive
    };
    Ok(ScanReport {
        candidates,
        witnesses,
        verdict,
    })
}

/// Monte Carlo estimate at one depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McPoint<T> {
    pub depth: usize,
    pub mean: T,
    pub stderr: T,
}

/// `∧²` contraction data `d_n = Σ_words (Π w) |∧²W|`.
#[derive(Debug, Clone, PartialEq)]
pub struct Wedge2Report<T: Real> {
    /// `d_n` for `n = 1..=max_exact_depth`.
    pub exact: Vec<T>,
    /// Estimates under `ℙ^{ch}` for `n = 1..=mc_depth`.
    pub monte_carlo: Vec<McPoint<T>>,
    /// Fitted slope of `log d_n` against `n` (`log β̂`).
    pub slope: Exponent<T>,
    /// Two-sided 95% confidence interval of the slope.
    pub confidence_interval: (Exponent<T>, Exponent<T>),
    /// Depths used in the fit.
    pub fit_depths: Vec<usize>,
    pub verdict: Verdict,
}

/// Exact `d_n` for `n = 1..=depth` by enumeration.
pub fn wedge2_exact<T: Real>(km: &KrausMeasure<T>, depth: usize, budget: usize) -> Result<Vec<T>> {
    check_budget(km.len(), depth, budget)?;
    let compounds: Vec<(T, ComplexMatrix<T>)> = km
        .atoms()
        .iter()
        .map(|a| Ok((a.weight(), compound(a.matrix(), 2)?)))
        .collect::<Result<_>>()?;

    fn dfs<T: Real>(
        comps: &[(T, ComplexMatrix<T>)],
        c: &ComplexMatrix<T>,
        w: T,
        level: usize,
        out: &mut [T],
    ) {
        out[level - 1] += w * singular_values(c)[0];
        if level == out.len() {
            return;
        }
        for (wa, ca) in comps {
            dfs(comps, &(ca * c), w * *wa, level + 1, out);
        }
    }

    if depth == 0 {
        return Ok(Vec::new());
    }
    let partial: Vec<Vec<T>> = compounds
        .par_iter()
        .map(|(w, c)| {
            let mut out = vec![T::zero(); depth];
            dfs(&compounds, c, *w, 1, &mut out);
            out
        })
        .collect();
    Ok((0..depth)
        .map(|n| partial.iter().fold(T::zero(), |acc, p| acc + p[n]))
        .collect())
}

/// Per-path `k|∧²W_n| / tr(W_n†W_n)` for `n = 1..=depth` under `ℙ^{ch}`.
fn wedge2_path<T: Real>(
    km: &KrausMeasure<T>,
    compounds: &[ComplexMatrix<T>],
    depth: usize,
    rng: &mut crate::random::PathRng,
) -> Result<Vec<T>> {
    let k = km.dim();
    let mut sampler = WordSampler::new(km, &DensityMatrix::maximally_mixed(k))?;
    // W̃ = W/‖W‖ and C̃ = ∧²W/‖W‖²
    let mut w: ComplexMatrix<T> = identity(k).unscale(T::cast(k as f64).sqrt());
    let mut c: ComplexMatrix<T> =
        DMatrix::identity(compounds[0].nrows(), compounds[0].nrows()).unscale(T::cast(k as f64));
    let mut out = Vec::with_capacity(depth);
    for _ in 0..depth {
        let (a, _) = sampler.step(rng)?;
        let next = km.atoms()[a].matrix() * &w;
        let norm = hs_norm(&next);
        w = next.unscale(norm);
        c = (&compounds[a] * c).unscale(norm * norm);
        out.push(T::cast(k as f64) * singular_values(&c)[0]);
    }
    Ok(out)
}

fn student_t_975(dof: usize) -> f64 {
    StudentsT::new(0.0, 1.0, dof as f64)
        .map(|t| t.inverse_cdf(0.975))
        .unwrap_or(f64::INFINITY)
}

/// Least-squares slope of `y` on `x` with a 95% t-interval.
fn fit_slope(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let se = if xs.len() > 2 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    let half = if se == 0.0 {
        0.0
    } else {
        student_t_975(xs.len().saturating_sub(2)) * se
    };
    (slope, slope - half, slope + half)
}

/// Exact `d_n` up to `max_exact_depth`, Monte Carlo estimates under
/// `ℙ^{ch}` (`ρ = Id/k`) up to `mc_depth`, and a log-linear fit.
///
/// The fit uses exact values where available and Monte Carlo means beyond,
/// dropping `n = 1` when at least three later depths remain. Any exact zero
/// gives slope `−∞`.
pub fn wedge2_decay<T: Real>(
    km: &KrausMeasure<T>,
    max_exact_depth: usize,
    mc_depth: usize,
    n_paths: usize,
    seed: u64,
) -> Result<Wedge2Report<T>> {
    km.require_stochastic(PROBABILITY_SUM_TOL)?;
    if km.dim() < 2 {
        return Err(Error::InvalidInput(
            "wedge decay needs dimension at least 2".into(),
        ));
    }
    let exact = wedge2_exact(km, max_exact_depth, DEFAULT_WORD_BUDGET)?;
    let monte_carlo = if mc_depth > 0 && n_paths > 0 {
        let compounds: Vec<ComplexMatrix<T>> = km
            .atoms()
            .iter()
            .map(|a| compound(a.matrix(), 2))
            .collect::<Result<_>>()?;
        let cfg = SampleConfig::new(seed, mc_depth, n_paths)?;
        let per_path = run_paths(&cfg, |rng| wedge2_path(km, &compounds, mc_depth, rng))?;
        (0..mc_depth)
            .map(|n| {
                let vals: Vec<T> = per_path.iter().map(|p| p[n]).collect();
                let m = T::cast(vals.len() as f64);
                let mean = vals.iter().fold(T::zero(), |a, &v| a + v) / m;
                let var = if vals.len() > 1 {
                    vals.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean)) / (m - T::one())
                } else {
                    T::zero()
                };
                McPoint {
                    depth: n + 1,
                    mean,
                    stderr: (var / m).sqrt(),
                }
            })
            .collect()
    } else {
        Vec::new()
    };

    let values: Vec<(usize, f64)> = (1..=max_exact_depth.max(mc_depth))
        .map(|n| {
            let v = if n <= exact.len() {
                exact[n - 1]
            } else {
                monte_carlo[n - 1].mean
            };
            (n, v.as_f64())
        })
        .collect();
    let any_exact_zero = exact.iter().any(|v| *v == T::zero());
    let start = if values.len() >= 4 { 1 } else { 0 };
    let tail = &values[start..];
    let fit_depths: Vec<usize> = tail.iter().map(|(n, _)| *n).collect();
    let ninf = Exponent::NegInfinity;
    let (slope, ci, verdict) = if any_exact_zero || tail.iter().any(|(_, v)| *v == 0.0) {
        (ninf, (ninf, ninf), Verdict::PurifyingEvidence)
    } else if tail.len() < 2 {
        return Err(Error::InsufficientSamples {
            found: tail.len(),
            required: 2,
        });
    } else {
        let xs: Vec<f64> = tail.iter().map(|(n, _)| *n as f64).collect();
        let ys: Vec<f64> = tail.iter().map(|(_, v)| v.ln()).collect();
        let (s, lo, hi) = fit_slope(&xs, &ys);
        let flat = ys.iter().all(|y| (y - ys[0]).abs() <= 1e-9);
        let verdict = if flat {
            Verdict::NonPurifyingWitness
        } else if hi < 0.0 {
            Verdict::PurifyingEvidence
        } else {
            Verdict::Inconclusive
        };
        let e = |v: f64| Exponent::Finite(T::cast(v));
        (e(s), (e(lo), e(hi)), verdict)
    };
    Ok(Wedge2Report {
        exact,
        monte_carlo,
        slope,
        confidence_interval: ci,
        fit_depths,
        verdict,
    })
}

/// Distribution of `a₂(Y_n)/a₁(Y_n)` and martingale checks.
#[derive(Debug, Clone, PartialEq)]
pub struct YProcessReport<T: Real> {
    pub ratios: Vec<T>,
    pub median_ratio: T,
    pub quantile_10: T,
    pub quantile_90: T,
    /// `max |tr(Y_n) − 1|` over paths.
    pub max_trace_defect: T,
    /// `max ‖E[Y_{n+1} | F_n] − Y_n‖` with the conditional expectation
    /// computed exactly from the one-step law.
    pub martingale_defect: T,
    /// Largest `‖mean of sampled Y_{n+1} − Y_n‖ / σ` over the sub-sample.
    pub martingale_mc_z: T,
    pub degenerate_paths: usize,
}

/// Sub-sample size and inner draws of the Monte Carlo martingale check.
const MARTINGALE_PATHS: usize = 32;
const MARTINGALE_DRAWS: usize = 200;

fn quantile<T: Real>(sorted: &[T], q: f64) -> T {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let f = T::cast(pos - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * f
}

/// Samples words of length `n` under `ℙ^{ch}` and studies
/// `Y_n = W_n†W_n / tr(W_n†W_n)`.
pub fn y_process_diagnostic<T: Real>(
    km: &KrausMeasure<T>,
    n: usize,
    n_paths: usize,
    seed: u64,
) -> Result<YProcessReport<T>> {
    km.require_stochastic(PROBABILITY_SUM_TOL)?;
    let k = km.dim();
    let cfg = SampleConfig::new(seed, n, n_paths)?;
    let ys = run_paths(&cfg, |rng| {
        let mut sampler = WordSampler::new(km, &DensityMatrix::maximally_mixed(k))?;
        let mut w: ComplexMatrix<T> = identity(k);
        for _ in 0..n {
            let (a, _) = sampler.step(rng)?;
            let next = km.atoms()[a].matrix() * &w;
            let norm = hs_norm(&next);
            if norm == T::zero() {
                return Err(Error::DegenerateStep);
            }
            w = next.unscale(norm);
        }
        let g = w.adjoint() * &w;
        let tr = g.trace().re;
        Ok((hermitize(&g.unscale(tr)), w))
    })?;
    let degenerate_paths = n_paths - ys.len();
    let mut ratios = Vec::with_capacity(ys.len());
    let mut max_trace_defect = T::zero();
    for (y, _) in &ys {
        let (values, _) = hermitian_eigen(y);
        let a1 = values[k - 1];
        let a2 = if k >= 2 {
            values[k - 2].max(T::zero())
        } else {
            T::zero()
        };
        ratios.push(a2 / a1);
        max_trace_defect = max_trace_defect.max((y.trace().re - T::one()).abs());
    }

    let mut rng = aux_rng(seed);
    let mut martingale_defect = T::zero();
    let mut martingale_mc_z = T::zero();
    for (y, w) in ys.iter().take(MARTINGALE_PATHS) {
        let tr = (w.adjoint() * w).trace().re;
        let mut probs = Vec::with_capacity(km.len());
        let mut nexts = Vec::with_capacity(km.len());
        let mut expected = DMatrix::zeros(k, k);
        for atom in km.atoms() {
            let lw = atom.matrix() * w;
            let g = lw.adjoint() * &lw;
            let t = g.trace().re;
            let p = atom.weight() * t / tr;
            probs.push(p.as_f64());
            let y_next = if t > T::zero() {
                g.unscale(t)
            } else {
                DMatrix::zeros(k, k)
            };
            expected += y_next.scale(p);
            nexts.push(y_next);
        }
        martingale_defect = martingale_defect.max(hs_norm(&(expected - y)));
        let spread = probs.iter().zip(&nexts).fold(T::zero(), |acc, (p, yn)| {
            acc + T::cast(*p) * hs_norm(&(yn - y)).powi(2)
        });
        let sigma = (spread / T::cast(MARTINGALE_DRAWS as f64)).sqrt();
        let mut mean = DMatrix::zeros(k, k);
        for _ in 0..MARTINGALE_DRAWS {
            let b = crate::trajectory::select_atom(&probs, true, 1.0, &mut rng)?;
            mean += &nexts[b];
        }
        let dist = hs_norm(&(mean.unscale(T::cast(MARTINGALE_DRAWS as f64)) - y));
        if sigma > T::zero() {
            martingale_mc_z = martingale_mc_z.max(dist / sigma);
        }
    }

    let mut sorted = ratios.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Ok(YProcessReport {
        median_ratio: quantile(&sorted, 0.5),
        quantile_10: quantile(&sorted, 0.1),
        quantile_90: quantile(&sorted, 0.9),
        ratios,
        max_trace_defect,
        martingale_defect,
        martingale_mc_z,
        degenerate_paths,
    })
}
