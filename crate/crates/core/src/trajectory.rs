//! Simulation of the projective process `X_n` (kernel `Π_L`), the quantum
//! trajectory `ρ_n`, and the word process `ℙ^ρ`; empirical barycenters.
//!
//! Atom weights enter every sampling probability explicitly, so `μ` does not
//! have to be a probability measure.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::KrausMeasure;
use crate::error::{Error, Result};
use crate::linalg::{hs_norm, projector_onto, DensityMatrix, ProjectivePoint};
use crate::random::{path_rng, PathRng};
use crate::scalar::{ComplexMatrix, Real};

/// Atoms whose probability falls below this are never selected.
pub const MIN_ATOM_PROBABILITY: f64 = 1e-14;
/// Allowed deviation of the total step probability from one.
pub const PROBABILITY_SUM_TOL: f64 = 1e-8;
/// Minimum number of post-burn-in samples for a barycenter estimate.
pub const MIN_BARYCENTER_SAMPLES: usize = 100;

/// Seed, path length, path count and burn-in of a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleConfig {
    pub seed: u64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub burn_in: usize,
}

impl SampleConfig {
    /// Burn-in defaults to `n_steps / 10`.
    pub fn new(seed: u64, n_steps: usize, n_paths: usize) -> Result<Self> {
        Self::with_burn_in(seed, n_steps, n_paths, n_steps / 10)
    }

    pub fn with_burn_in(seed: u64, n_steps: usize, n_paths: usize, burn_in: usize) -> Result<Self> {
        if n_steps == 0 || n_paths == 0 {
            return Err(Error::InvalidInput(
                "n_steps and n_paths must be at least 1".into(),
            ));
        }
        if burn_in >= n_steps {
            return Err(Error::InvalidInput(format!(
                "burn_in {burn_in} >= n_steps {n_steps}"
            )));
        }
        Ok(Self {
            seed,
            n_steps,
            n_paths,
            burn_in,
        })
    }
}

/// States recorded along a path, if any. `states[t]` is the state after
/// step `t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum PathStates<T: Real> {
    None,
    Projective(Vec<ProjectivePoint<T>>),
    Density(Vec<DensityMatrix<T>>),
}

/// One realized path: the word `(ω₁, …, ω_n)` of atom indices, optional
/// states, and `log tr(W_n ρ W_n†)` (with atom weights) for the initial `ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPath<T: Real> {
    pub word: Vec<usize>,
    pub states: PathStates<T>,
    pub log_weight: T,
}

/// Inverse-CDF draw from per-atom probabilities.
///
/// Negative round-off is clamped to zero and the vector renormalized when
/// its total lies within `sum_tol` of one (or unconditionally
/// when `renormalize` is set).
pub(crate) fn select_atom<R: Rng + ?Sized>(
    probs: &[f64],
    renormalize: bool,
    sum_tol: f64,
    rng: &mut R,
) -> Result<usize> {
    let clamped: Vec<f64> = probs
        .iter()
        .map(|&p| if p >= MIN_ATOM_PROBABILITY { p } else { 0.0 })
        .collect();
    let total: f64 = probs.iter().map(|p| p.max(0.0)).sum();
    let usable: f64 = clamped.iter().sum();
    if usable == 0.0 {
        return Err(Error::DegenerateStep);
    }
    if !renormalize && (total - 1.0).abs() > sum_tol {
        return Err(Error::NotStochastic {
            residual: (total - 1.0).abs(),
        });
    }
    let u: f64 = rng.random::<f64>() * usable;
    let mut acc = 0.0;
    let mut last = 0;
    for (a, &p) in clamped.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = a;
            if u < acc {
                return Ok(a);
            }
        }
    }
    Ok(last)
}

/// Sequential sampler of the word law `ℙ^ρ`: at each step atom `a` is drawn
/// with probability `w_a tr(L_a ρ L_a†)` and the state moves to the
/// normalized conjugate.
#[derive(Debug, Clone)]
pub struct WordSampler<'a, T: Real> {
    km: &'a KrausMeasure<T>,
    /// `w_a L_a† L_a`.
    effects: Vec<ComplexMatrix<T>>,
    state: ComplexMatrix<T>,
    renormalize: bool,
}

impl<'a, T: Real> WordSampler<'a, T> {
    pub fn new(km: &'a KrausMeasure<T>, rho: &DensityMatrix<T>) -> Result<Self> {
        if rho.dim() != km.dim() {
            return Err(Error::DimensionMismatch {
                expected: km.dim(),
                found: rho.dim(),
            });
        }
        let effects = km
            .atoms()
            .iter()
            .map(|a| (a.matrix().adjoint() * a.matrix()).scale(a.weight()))
            .collect();
        Ok(Self {
            km,
            effects,
            state: rho.matrix().clone(),
            renormalize: false,
        })
    }

    /// Renormalize step probabilities instead of rejecting non-stochastic
    /// measures.
    pub fn renormalizing(mut self) -> Self {
        self.renormalize = true;
        self
    }

    pub fn state(&self) -> &ComplexMatrix<T> {
        &self.state
    }

    /// `w_a tr(L_a ρ L_a†)` for every atom.
    pub fn probabilities(&self) -> Vec<f64> {
        self.effects
            .iter()
            .map(|e| {
                // tr(E ρ) = Σ_ij E_ij ρ_ji
                let mut acc = T::zero();
                for j in 0..e.ncols() {
                    for i in 0..e.nrows() {
                        let z = e[(i, j)] * self.state[(j, i)];
                        acc += z.re;
                    }
                }
                acc.as_f64()
            })
            .collect()
    }

    /// Draws the next atom; returns it with its conditional probability.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(usize, f64)> {
        let probs = self.probabilities();
        let a = select_atom(&probs, self.renormalize, T::floor_tol(PROBABILITY_SUM_TOL), rng)?;
        let l = self.km.atoms()[a].matrix();
        let next = l * &self.state * l.adjoint();
        let tr = next.trace().re;
        if !(tr > T::zero()) {
            return Err(Error::DegenerateStep);
        }
        self.state = next.unscale(tr);
        let total: f64 = if self.renormalize {
            probs.iter().map(|p| p.max(0.0)).sum()
        } else {
            1.0
        };
        Ok((a, probs[a] / total))
    }
}

/// Probabilities `w_a ‖L_a x‖²` and images `L_a x` for a unit vector `x`.
fn kernel_probabilities<T: Real>(
    km: &KrausMeasure<T>,
    x: &ProjectivePoint<T>,
) -> (Vec<f64>, Vec<crate::scalar::ComplexVector<T>>) {
    let images: Vec<_> = km.atoms().iter().map(|a| a.matrix() * x.vector()).collect();
    let probs = km
        .atoms()
        .iter()
        .zip(&images)
        .map(|(a, y)| (a.weight() * y.norm_squared()).as_f64())
        .collect();
    (probs, images)
}

/// One step of the kernel `Π_L`: draws atom `a` with probability
/// `w_a ‖L_a x‖²` and moves to `L_a x / ‖L_a x‖`.
pub fn step_kernel<T: Real, R: Rng + ?Sized>(
    km: &KrausMeasure<T>,
    x: &ProjectivePoint<T>,
    rng: &mut R,
) -> Result<(usize, ProjectivePoint<T>)> {
    let (probs, mut images) = kernel_probabilities(km, x);
    let a = select_atom(&probs, false, T::floor_tol(PROBABILITY_SUM_TOL), rng)?;
    Ok((a, ProjectivePoint::new(images.swap_remove(a))?))
}

fn x_path<T: Real>(
    km: &KrausMeasure<T>,
    x0: &ProjectivePoint<T>,
    n_steps: usize,
    rng: &mut PathRng,
) -> Result<TrajectoryPath<T>> {
    let mut x = x0.clone();
    let mut word = Vec::with_capacity(n_steps);
    let mut states = Vec::with_capacity(n_steps);
    let mut log_weight = T::zero();
    for _ in 0..n_steps {
        let (probs, mut images) = kernel_probabilities(km, &x);
        let a = select_atom(&probs, false, T::floor_tol(PROBABILITY_SUM_TOL), rng)?;
        log_weight += T::cast(probs[a].ln());
        x = ProjectivePoint::new(images.swap_remove(a))?;
        word.push(a);
        states.push(x.clone());
    }
    Ok(TrajectoryPath {
        word,
        states: PathStates::Projective(states),
        log_weight,
    })
}

/// `n_paths` independent paths of the projective process started at `x0`.
pub fn sample_x_process<T: Real>(
    km: &KrausMeasure<T>,
    x0: &ProjectivePoint<T>,
    cfg: &SampleConfig,
) -> Result<Vec<TrajectoryPath<T>>> {
    km.require_stochastic(PROBABILITY_SUM_TOL)?;
    if x0.dim() != km.dim() {
        return Err(Error::DimensionMismatch {
            expected: km.dim(),
            found: x0.dim(),
        });
    }
    (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| x_path(km, x0, cfg.n_steps, &mut path_rng(cfg.seed, p as u64)))
        .collect()
}

/// Like [`sample_x_process`] but each path starts from a point drawn from
/// the atomic measure `ν̂ = Σ_i ν_i δ_{x_i}` (weights need not be normalized).
pub fn sample_x_process_atomic<T: Real>(
    km: &KrausMeasure<T>,
    nu: &[(T, ProjectivePoint<T>)],
    cfg: &SampleConfig,
) -> Result<Vec<TrajectoryPath<T>>> {
    km.require_stochastic(PROBABILITY_SUM_TOL)?;
    if nu.is_empty() || nu.iter().any(|(w, _)| !(*w > T::zero())) {
        return Err(Error::InvalidInput(
            "initial measure needs positive weights".into(),
        ));
    }
    let total: f64 = nu.iter().map(|(w, _)| w.as_f64()).sum();
    let probs: Vec<f64> = nu.iter().map(|(w, _)| w.as_f64() / total).collect();
    (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(cfg.seed, p as u64);
            let i = select_atom(&probs, true, T::floor_tol(PROBABILITY_SUM_TOL), &mut rng)?;
            x_path(km, &nu[i].1, cfg.n_steps, &mut rng)
        })
        .collect()
}

/// Barycenter `Σ_i ν_i x_i x_i†` of an atomic measure on projective space.
pub fn barycenter<T: Real>(nu: &[(T, ProjectivePoint<T>)]) -> Result<DensityMatrix<T>> {
    let first = nu
        .first()
        .ok_or_else(|| Error::InvalidInput("empty measure".into()))?;
    let k = first.1.dim();
    let sum = nu.iter().fold(DMatrix::zeros(k, k), |acc, (w, x)| {
        acc + projector_onto(x).scale(*w)
    });
    DensityMatrix::from_unnormalized(&sum, 1e-9)
}

fn trajectory_path<T: Real>(
    km: &KrausMeasure<T>,
    rho0: &DensityMatrix<T>,
    n_steps: usize,
    keep_states: bool,
    rng: &mut PathRng,
) -> Result<TrajectoryPath<T>> {
    let mut sampler = WordSampler::new(km, rho0)?;
    let mut word = Vec::with_capacity(n_steps);
    let mut states = Vec::with_capacity(if keep_states { n_steps } else { 0 });
    let mut log_weight = T::zero();
    for _ in 0..n_steps {
        let (a, p) = sampler.step(rng)?;
        log_weight += T::cast(p.ln());
        word.push(a);
        if keep_states {
            states.push(DensityMatrix::from_unnormalized(sampler.state(), 1e-8)?);
        }
    }
    let states = if keep_states {
        PathStates::Density(states)
    } else {
        PathStates::None
    };
    Ok(TrajectoryPath {
        word,
        states,
        log_weight,
    })
}

/// Quantum trajectories `ρ_n = L_a ρ_{n−1} L_a† / tr(·)` drawn with
/// probability `w_a tr(L_a ρ_{n−1} L_a†)`.
pub fn sample_quantum_trajectory<T: Real>(
    km: &KrausMeasure<T>,
    rho0: &DensityMatrix<T>,
    cfg: &SampleConfig,
) -> Result<Vec<TrajectoryPath<T>>> {
    km.require_stochastic(PROBABILITY_SUM_TOL)?;
    (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| trajectory_path(km, rho0, cfg.n_steps, true, &mut path_rng(cfg.seed, p as u64)))
        .collect()
}

/// Words distributed according to `ℙ^ρ`; stationary when `φ(ρ) = ρ`.
pub fn sample_word_process<T: Real>(
    km: &KrausMeasure<T>,
    rho: &DensityMatrix<T>,
    cfg: &SampleConfig,
) -> Result<Vec<TrajectoryPath<T>>> {
    km.require_stochastic(PROBABILITY_SUM_TOL)?;
    let drift = hs_norm(&(km.apply_channel(rho.matrix())? - rho.matrix()));
    if drift > T::cast(1e-8) {
        log::warn!("initial state is not a fixed point (residual {drift}); word process is not stationary");
    }
    (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| trajectory_path(km, rho, cfg.n_steps, false, &mut path_rng(cfg.seed, p as u64)))
        .collect()
}

/// Average of `X_t X_t†` over all paths and times `t > burn_in`.
pub fn empirical_barycenter<T: Real>(
    paths: &[TrajectoryPath<T>],
    burn_in: usize,
) -> Result<DensityMatrix<T>> {
    let mut sum: Option<ComplexMatrix<T>> = None;
    let mut count = 0usize;
    for path in paths {
        let PathStates::Projective(states) = &path.states else {
            return Err(Error::InvalidInput("barycenter needs projective states".into()));
        };
        for x in states.iter().skip(burn_in) {
            let p = projector_onto(x);
            match sum.as_mut() {
                Some(s) => *s += p,
                None => sum = Some(p),
            }
            count += 1;
        }
    }
    if count < MIN_BARYCENTER_SAMPLES {
        return Err(Error::InsufficientSamples {
            found: count,
            required: MIN_BARYCENTER_SAMPLES,
        });
    }
    let mean = sum.expect("count > 0").unscale(T::cast(count as f64));
    DensityMatrix::from_unnormalized(&mean, 1e-9)
}

/// Runs `f` on every path in parallel, dropping paths that hit a
/// degenerate step (a probability-zero event).
pub(crate) fn run_paths<R: Send>(
    cfg: &SampleConfig,
    f: impl Fn(&mut PathRng) -> Result<R> + Sync + Send,
) -> Result<Vec<R>> {
    let results: Vec<Result<R>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| f(&mut path_rng(cfg.seed, p as u64)))
        .collect();
    let mut out = Vec::with_capacity(results.len());
    let mut degenerate = 0;
    for r in results {
        match r {
            Ok(v) => out.push(v),
            Err(Error::DegenerateStep) => degenerate += 1,
            Err(e) => return Err(e),
        }
    }
    if out.is_empty() {
        return Err(Error::AllPathsDegenerate);
    }
    if degenerate > 0 {
        log::warn!(
            "{degenerate} of {} paths hit a degenerate step and were dropped",
            cfg.n_paths
        );
    }
    Ok(out)
}

/// Re-applies `word` to `x0`, returning the normalized states.
pub fn replay<T: Real>(
    km: &KrausMeasure<T>,
    x0: &ProjectivePoint<T>,
    word: &[usize],
) -> Result<Vec<ProjectivePoint<T>>> {
    let mut x = x0.clone();
    word.iter()
        .map(|&a| {
            let atom = km
                .atoms()
                .get(a)
                .ok_or_else(|| Error::InvalidInput(format!("atom index {a} out of range")))?;
            x = ProjectivePoint::new(atom.matrix() * x.vector())?;
            Ok(x.clone())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ergodic::spectral_data;
    use crate::linalg::{proj_distance, singular_values};
    use crate::random::{random_point, random_stochastic_channel, random_unitary};
    use nalgebra::{Complex, DVector};

    fn markov(p: &[&[f64]]) -> KrausMeasure<f64> {
        let k = p.len();
        let mut atoms = Vec::new();
        for i in 0..k {
            for j in 0..k {
                if p[i][j] > 0.0 {
                    let mut m = DMatrix::zeros(k, k);
                    m[(i, j)] = Complex::new(p[i][j].sqrt(), 0.0);
                    atoms.push(crate::KrausAtom::new(1.0, m, Some(format!("V{i}{j}"))).unwrap());
                }
            }
        }
        KrausMeasure::new(k, atoms).unwrap()
    }

    /// Atom index of V_ij in `markov` when every p_ij > 0.
    fn v(i: usize, j: usize) -> usize {
        i * 2 + j
    }

    const P: [[f64; 2]; 2] = [[0.7, 0.4], [0.3, 0.6]];

    fn p_chain() -> KrausMeasure<f64> {
        markov(&[&P[0], &P[1]])
    }

    #[test]
    fn config_validation() {
        assert!(SampleConfig::new(0, 0, 1).is_err());
        assert!(SampleConfig::with_burn_in(0, 10, 1, 10).is_err());
        assert_eq!(SampleConfig::new(0, 100, 1).unwrap().burn_in, 10);
    }

    #[test]
    fn select_atom_edge_cases() {
        let mut rng = path_rng(0, 0);
        assert!(matches!(
            select_atom(&[1e-15, 0.0], false, PROBABILITY_SUM_TOL, &mut rng),
            Err(Error::DegenerateStep)
        ));
        assert!(matches!(
            select_atom(&[0.5, 0.6], false, PROBABILITY_SUM_TOL, &mut rng),
            Err(Error::NotStochastic { .. })
        ));
        assert_eq!(
            select_atom(&[-1e-17, 1.0], false, PROBABILITY_SUM_TOL, &mut rng).unwrap(),
            1
        );
        assert!(select_atom(&[0.25, 0.25], true, PROBABILITY_SUM_TOL, &mut rng).is_ok());
    }

    #[test]
    fn markov_kernel_moves_between_basis_points() {
        let km = p_chain();
        let mut rng = path_rng(1, 0);
        let e0 = ProjectivePoint::<f64>::basis(2, 0).unwrap();
        let mut counts = [0usize; 2];
        let n = 20_000;
        for _ in 0..n {
            let (a, y) = step_kernel(&km, &e0, &mut rng).unwrap();
            let i = a / 2;
            assert_eq!(a % 2, 0, "only V_i0 can act on e_0");
            assert!(proj_distance(&y, &ProjectivePoint::basis(2, i).unwrap()).unwrap() < 1e-15);
            counts[i] += 1;
        }
        for i in 0..2 {
            let p = P[i][0];
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            assert!((counts[i] as f64 / n as f64 - p).abs() < 3.0 * sigma);
        }
    }

    #[test]
    fn unitary_kernel_is_deterministic() {
        let u = random_unitary::<f64, _>(3, &mut path_rng(2, 0));
        let km = KrausMeasure::from_matrices(vec![u.clone()]).unwrap();
        let x0 = random_point::<f64, _>(3, &mut path_rng(3, 0));
        let cfg = SampleConfig::new(4, 10, 1).unwrap();
        let paths = sample_x_process(&km, &x0, &cfg).unwrap();
        assert!(paths[0].word.iter().all(|&a| a == 0));
        let PathStates::Projective(states) = &paths[0].states else {
            panic!()
        };
        let mut v = x0.vector().clone();
        for s in states {
            v = &u * v;
            assert!(proj_distance(s, &ProjectivePoint::new(v.clone()).unwrap()).unwrap() < 1e-7);
        }
        assert!(paths[0].log_weight.abs() < 1e-12);
    }

    #[test]
    fn kernel_probabilities_sum_to_one() {
        let km = random_stochastic_channel::<f64, _>(3, 3, &mut path_rng(5, 0)).unwrap();
        let mut rng = path_rng(6, 0);
        for _ in 0..100 {
            let x = random_point::<f64, _>(3, &mut rng);
            let (probs, _) = kernel_probabilities(&km, &x);
            assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn markov_x_process_transition_frequencies() {
        let km = p_chain();
        let cfg = SampleConfig::new(7, 20_000, 4).unwrap();
        let paths = sample_x_process(&km, &ProjectivePoint::basis(2, 0).unwrap(), &cfg).unwrap();
        let mut from = [0usize; 2];
        let mut trans = [[0usize; 2]; 2];
        for path in &paths {
            let PathStates::Projective(states) = &path.states else {
                panic!()
            };
            for x in states {
                assert!(x.vector().iter().filter(|z| z.norm() > 0.0).count() == 1);
            }
            for &a in &path.word {
                let (i, j) = (a / 2, a % 2);
                from[j] += 1;
                trans[i][j] += 1;
            }
        }
        for j in 0..2 {
            for i in 0..2 {
                let p = P[i][j];
                let f = trans[i][j] as f64 / from[j] as f64;
                let sigma = (p * (1.0 - p) / from[j] as f64).sqrt();
                assert!((f - p).abs() < 3.0 * sigma, "p{i}{j}: {f} vs {p}");
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let km = random_stochastic_channel::<f64, _>(2, 2, &mut path_rng(8, 0)).unwrap();
        let x0 = ProjectivePoint::basis(2, 0).unwrap();
        let cfg = SampleConfig::new(9, 200, 3).unwrap();
        let a = sample_x_process(&km, &x0, &cfg).unwrap();
        let b = sample_x_process(&km, &x0, &cfg).unwrap();
        assert_eq!(a, b);
        let rho = DensityMatrix::maximally_mixed(2);
        let a = sample_word_process(&km, &rho, &cfg).unwrap();
        let b = sample_word_process(&km, &rho, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn states_replay_from_word() {
        let km = random_stochastic_channel::<f64, _>(3, 2, &mut path_rng(10, 0)).unwrap();
        let x0 = random_point::<f64, _>(3, &mut path_rng(11, 0));
        let cfg = SampleConfig::new(12, 100, 2).unwrap();
        for path in sample_x_process(&km, &x0, &cfg).unwrap() {
            let PathStates::Projective(states) = &path.states else {
                panic!()
            };
            let again = replay(&km, &x0, &path.word).unwrap();
            for (s, r) in states.iter().zip(&again) {
                assert!(proj_distance(s, r).unwrap() < 1e-8);
            }
        }
    }

    #[test]
    fn pure_trajectory_matches_x_process() {
        let km = random_stochastic_channel::<f64, _>(3, 3, &mut path_rng(13, 0)).unwrap();
        let x0 = random_point::<f64, _>(3, &mut path_rng(14, 0));
        let cfg = SampleConfig::new(15, 200, 3).unwrap();
        let xs = sample_x_process(&km, &x0, &cfg).unwrap();
        let rhos = sample_quantum_trajectory(&km, &DensityMatrix::pure(&x0), &cfg).unwrap();
        for (xp, rp) in xs.iter().zip(&rhos) {
            assert_eq!(xp.word, rp.word);
            assert!((xp.log_weight - rp.log_weight).abs() < 1e-9);
            let (PathStates::Projective(xs), PathStates::Density(rs)) = (&xp.states, &rp.states) else {
                panic!()
            };
            for (x, r) in xs.iter().zip(rs) {
                let sv = singular_values(r.matrix());
                assert!(sv[1] <= 1e-10);
                assert!(hs_norm(&(projector_onto(x) - r.matrix())) < 1e-8);
            }
        }
    }

    #[test]
    fn markov_trajectory_collapses_to_coordinate_projectors() {
        let km = p_chain();
        let rho = DensityMatrix::diagonal(&[4.0 / 7.0, 3.0 / 7.0], 1e-12).unwrap();
        let cfg = SampleConfig::new(16, 50, 3).unwrap();
        for path in sample_quantum_trajectory(&km, &rho, &cfg).unwrap() {
            let PathStates::Density(states) = &path.states else {
                panic!()
            };
            for s in states {
                let m = s.matrix();
                let ones = (0..2).filter(|&i| (m[(i, i)].re - 1.0).abs() < 1e-15).count();
                assert_eq!(ones, 1);
                assert!(m[(0, 1)].norm() == 0.0);
            }
        }
    }

    #[test]
    fn unitary_trajectory_is_conjugation() {
        let u = random_unitary::<f64, _>(2, &mut path_rng(17, 0));
        let km = KrausMeasure::from_matrices(vec![u.clone()]).unwrap();
        let rho0 = DensityMatrix::diagonal(&[0.3, 0.7], 1e-12).unwrap();
        let cfg = SampleConfig::new(18, 20, 1).unwrap();
        let path = &sample_quantum_trajectory(&km, &rho0, &cfg).unwrap()[0];
        let PathStates::Density(states) = &path.states else {
            panic!()
        };
        let mut r = rho0.matrix().clone();
        for s in states {
            r = &u * r * u.adjoint();
            assert!(hs_norm(&(s.matrix() - &r)) < 1e-12);
        }
    }

    #[test]
    fn markov_barycenter_is_stationary_diagonal() {
        let km = p_chain();
        let cfg = SampleConfig::with_burn_in(19, 20_000, 4, 100).unwrap();
        let paths = sample_x_process(&km, &ProjectivePoint::basis(2, 0).unwrap(), &cfg).unwrap();
        let b = empirical_barycenter(&paths, cfg.burn_in).unwrap();
        assert!((b.matrix()[(0, 0)].re - 4.0 / 7.0).abs() < 0.02);
        assert!((b.matrix()[(1, 1)].re - 3.0 / 7.0).abs() < 0.02);
        assert!(empirical_barycenter(&paths[..1], 19_950).is_err());
    }

    #[test]
    fn barycenter_recovers_fixed_point_of_random_channel() {
        let km = random_stochastic_channel::<f64, _>(2, 3, &mut path_rng(20, 0)).unwrap();
        let rho_l = spectral_data(&km).unwrap().rho_fixed;
        let cfg = SampleConfig::with_burn_in(21, 5_000, 8, 500).unwrap();
        let paths = sample_x_process(&km, &ProjectivePoint::basis(2, 0).unwrap(), &cfg).unwrap();
        let b = empirical_barycenter(&paths, cfg.burn_in).unwrap();
        let samples = (cfg.n_steps - cfg.burn_in) * cfg.n_paths;
        assert!(hs_norm(&(b.matrix() - rho_l.matrix())) <= 5.0 / (samples as f64).sqrt() + 0.02);
    }

    #[test]
    fn constant_path_barycenter() {
        // E11 fixes e_0 deterministically
        let mut e11 = DMatrix::zeros(2, 2);
        e11[(0, 0)] = Complex::new(1.0, 0.0);
        let mut e12 = DMatrix::zeros(2, 2);
        e12[(0, 1)] = Complex::new(1.0, 0.0);
        let km = KrausMeasure::from_matrices(vec![e11, e12]).unwrap();
        let e0 = ProjectivePoint::basis(2, 0).unwrap();
        let cfg = SampleConfig::new(22, 200, 1).unwrap();
        let b = empirical_barycenter(&sample_x_process(&km, &e0, &cfg).unwrap(), 20).unwrap();
        assert!(hs_norm(&(b.matrix() - projector_onto(&e0))) < 1e-15);
    }

    #[test]
    fn markov_word_marginals() {
        let km = p_chain();
        let pi = [4.0 / 7.0, 3.0 / 7.0];
        let rho = DensityMatrix::diagonal(&pi, 1e-12).unwrap();
        let cfg = SampleConfig::new(23, 1, 100_000).unwrap();
        let paths = sample_word_process(&km, &rho, &cfg).unwrap();
        let n = paths.len() as f64;
        #[allow(clippy::needless_range_loop)]
        for i in 0..2 {
            for j in 0..2 {
                let f = paths.iter().filter(|p| p.word[0] == v(i, j)).count() as f64 / n;
                let p = P[i][j] * pi[j];
                assert!((f - p).abs() < 3.0 * (p * (1.0 - p) / n).sqrt());
            }
        }
    }

    #[test]
    fn one_step_marginal_matches_exact() {
        let km = random_stochastic_channel::<f64, _>(3, 3, &mut path_rng(24, 0)).unwrap();
        let rho = DensityMatrix::maximally_mixed(3);
        let exact = WordSampler::new(&km, &rho).unwrap().probabilities();
        let cfg = SampleConfig::new(25, 1, 100_000).unwrap();
        let paths = sample_word_process(&km, &rho, &cfg).unwrap();
        let n = paths.len() as f64;
        for (a, &p) in exact.iter().enumerate() {
            let f = paths.iter().filter(|q| q.word[0] == a).count() as f64 / n;
            assert!((f - p).abs() < 3.0 * (p * (1.0 - p) / n).sqrt());
        }
        let u = random_unitary::<f64, _>(2, &mut path_rng(26, 0));
        let ku = KrausMeasure::from_matrices(vec![u]).unwrap();
        let words = sample_word_process(
            &ku,
            &DensityMatrix::maximally_mixed(2),
            &SampleConfig::new(0, 5, 2).unwrap(),
        )
        .unwrap();
        assert!(words
            .iter()
            .all(|p| p.word == vec![0; 5] && p.log_weight.abs() < 1e-12));
    }

    #[test]
    fn x_process_from_atomic_measure_matches_word_law() {
        let km = random_stochastic_channel::<f64, _>(2, 3, &mut path_rng(27, 0)).unwrap();
        let mut rng = path_rng(28, 0);
        let nu: Vec<(f64, ProjectivePoint<f64>)> = vec![
            (0.2, random_point(2, &mut rng)),
            (0.5, random_point(2, &mut rng)),
            (0.3, random_point(2, &mut rng)),
        ];
        let rho = barycenter(&nu).unwrap();
        let n_paths = 60_000;
        let xs = sample_x_process_atomic(&km, &nu, &SampleConfig::new(29, 2, n_paths).unwrap()).unwrap();
        let ws = sample_word_process(&km, &rho, &SampleConfig::new(30, 2, n_paths).unwrap()).unwrap();
        let m = km.len();
        for a in 0..m {
            for b in 0..m {
                let fx = xs.iter().filter(|p| p.word[..2] == [a, b]).count() as f64 / n_paths as f64;
                let fw = ws.iter().filter(|p| p.word[..2] == [a, b]).count() as f64 / n_paths as f64;
                let p = 0.5 * (fx + fw);
                let sigma = (2.0 * p * (1.0 - p) / n_paths as f64).sqrt();
                assert!(
                    (fx - fw).abs() < 3.0 * sigma.max(1e-4),
                    "cylinder ({a},{b}): {fx} vs {fw}"
                );
            }
        }
    }

    #[test]
    fn rejects_non_stochastic_measure() {
        let km = KrausMeasure::from_matrices(vec![DMatrix::identity(2, 2).scale(2.0)]).unwrap();
        let cfg = SampleConfig::new(0, 5, 1).unwrap();
        let x = ProjectivePoint::new(DVector::from_vec(vec![
            Complex::new(1.0, 0.0),
            Complex::new(0.0, 0.0),
        ]))
        .unwrap();
        assert!(matches!(
            sample_x_process(&km, &x, &cfg),
            Err(Error::NotStochastic { .. })
        ));
        assert!(sample_word_process(&km, &DensityMatrix::maximally_mixed(2), &cfg).is_err());
    }
}
