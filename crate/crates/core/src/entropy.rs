//! Channel entropy, the Markov-chain channel `V_ij = √p_ij |i⟩⟨j|`, and the
//! entropy–Lyapunov report. Natural logarithms throughout.

use nalgebra::DMatrix;

use crate::channel::{KrausAtom, KrausMeasure};
use crate::ergodic::{is_irreducible, spectral_data};
use crate::error::{Error, Result};
use crate::linalg::{null_space, DensityMatrix};
use crate::lyapunov::{estimate_exponents, LyapunovOptions};
use crate::scalar::{cplx, Real};
use crate::trajectory::{SampleConfig, PROBABILITY_SUM_TOL};

/// Column-sum tolerance of a transition matrix.
pub const COLUMN_SUM_TOL: f64 = 1e-12;
/// Atoms with `tr(L_v ρ L_v†)` below this contribute nothing to the entropy.
pub const MIN_CYLINDER_WEIGHT: f64 = 1e-14;

/// Irreducible column-stochastic matrix `P` (`Σ_i p_ij = 1`, `Pπ = π`).
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovSpec {
    p: DMatrix<f64>,
}

impl MarkovSpec {
    pub fn new(p: DMatrix<f64>) -> Result<Self> {
        let k = p.nrows();
        if k == 0 || p.ncols() != k {
            return Err(Error::InvalidInput(
                "transition matrix must be square and nonempty".into(),
            ));
        }
        if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidInput(
                "transition probabilities must be finite and nonnegative".into(),
            ));
        }
        let residual = (0..k)
            .map(|j| (p.column(j).sum() - 1.0).abs())
            .fold(0.0, f64::max);
        if residual > COLUMN_SUM_TOL {
            return Err(Error::NotStochastic { residual });
        }
        // (Id + P)^{k−1} > 0 entrywise, on the support pattern
        let pattern = DMatrix::from_fn(k, k, |i, j| u8::from(i == j || p[(i, j)] > 0.0));
        let mut reach = pattern.clone();
        for _ in 1..k.saturating_sub(1).max(1) {
            reach = DMatrix::from_fn(k, k, |i, j| {
                u8::from((0..k).any(|l| reach[(i, l)] > 0 && pattern[(l, j)] > 0))
            });
        }
        if reach.iter().any(|&x| x == 0) {
            return Err(Error::NotIrreducible("transition matrix is reducible".into()));
        }
        Ok(Self { p })
    }

    /// From rows given as nested slices (column-stochastic convention).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidInput("transition matrix must be square".into()));
        }
        Self::new(DMatrix::from_fn(k, k, |i, j| rows[i][j]))
    }

    /// Accepts a row-stochastic matrix and transposes it.
    pub fn from_row_stochastic(p: DMatrix<f64>) -> Result<Self> {
        Self::new(p.transpose())
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// Probability vector `π` with `Pπ = π`.
    pub fn stationary(&self) -> Result<Vec<f64>> {
        let k = self.dim();
        let a = (&self.p - DMatrix::identity(k, k)).map(|x| nalgebra::Complex::new(x, 0.0));
        let v = null_space(&a, 1e-10)
            .into_iter()
            .next()
            .expect("null_space returns a vector");
        let sum: nalgebra::Complex<f64> = v.iter().sum();
        let pi: Vec<f64> = v.iter().map(|z| (z / sum).re).collect();
        if pi.iter().any(|&x| x < -1e-10) {
            return Err(Error::NotIrreducible(
                "stationary vector has negative entries".into(),
            ));
        }
        let clamped: Vec<f64> = pi.iter().map(|x| x.max(0.0)).collect();
        let total: f64 = clamped.iter().sum();
        Ok(clamped.iter().map(|x| x / total).collect())
    }
}

/// `−Σ_{i,j} π_j p_ij log p_ij`.
pub fn classical_markov_entropy(spec: &MarkovSpec) -> Result<f64> {
    let pi = spec.stationary()?;
    let p = spec.matrix();
    let mut h = 0.0;
    for j in 0..spec.dim() {
        for i in 0..spec.dim() {
            let x = p[(i, j)];
            if x > 0.0 {
                h -= pi[j] * x * x.ln();
            }
        }
    }
    Ok(h)
}

/// Unit-weight atoms `√p_ij E_ij` labelled `V[i,j]`; zero entries omitted.
pub fn markov_channel<T: Real>(spec: &MarkovSpec) -> Result<KrausMeasure<T>> {
    let k = spec.dim();
    let mut atoms = Vec::new();
    for i in 0..k {
        for j in 0..k {
            let p = spec.matrix()[(i, j)];
            if p > 0.0 {
                let mut m = DMatrix::zeros(k, k);
                m[(i, j)] = cplx(T::cast(p.sqrt()));
                atoms.push(KrausAtom::new(T::one(), m, Some(format!("V[{i},{j}]")))?);
            }
        }
    }
    KrausMeasure::new(k, atoms)
}

/// `(i, j)` of an atom labelled `V[i,j]`.
pub fn markov_indices(label: &str) -> Option<(usize, usize)> {
    let inner = label.strip_prefix("V[")?.strip_suffix(']')?;
    let (i, j) = inner.split_once(',')?;
    Some((i.trim().parse().ok()?, j.trim().parse().ok()?))
}

/// `h = −Σ_v Σ_w w_v w_w tr(L_v ρ L_v†) P(v,w) log P(v,w)` with
/// `P(v,w) = tr(L_w L_v ρ L_v† L_w†) / tr(L_v ρ L_v†)` and `ρ = ρ_L`.
pub fn channel_entropy<T: Real>(km: &KrausMeasure<T>) -> Result<T> {
    km.require_stochastic(PROBABILITY_SUM_TOL)?;
    let verdict = is_irreducible(km)?;
    if !verdict.irreducible {
        return Err(Error::NotIrreducible(verdict.describe()));
    }
    let rho = spectral_data(km)?.rho_fixed;
    Ok(entropy_at(km, &rho))
}

/// The entropy functional at an arbitrary state `ρ`.
pub fn entropy_at<T: Real>(km: &KrausMeasure<T>, rho: &DensityMatrix<T>) -> T {
    let mut h = T::zero();
    for v in km.atoms() {
        let inner = v.matrix() * rho.matrix() * v.matrix().adjoint();
        let tv = inner.trace().re;
        if tv.as_f64() < MIN_CYLINDER_WEIGHT {
            continue;
        }
        for w in km.atoms() {
            let pvw = (w.matrix() * &inner * w.matrix().adjoint()).trace().re / tv;
            if pvw > T::zero() {
                h -= v.weight() * w.weight() * tv * pvw * pvw.ln();
            }
        }
    }
    h
}

/// Empirical cylinder frequency of `V_ij` against `p_ij π_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderFrequency {
    pub i: usize,
    pub j: usize,
    pub empirical: f64,
    pub predicted: f64,
}

/// Entropy–Lyapunov comparison for a Markov channel.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyReport {
    pub h_channel: f64,
    pub h_classical: f64,
    pub h_bits: f64,
    pub gamma1_estimate: f64,
    pub gamma1_stderr: f64,
    pub gamma1_predicted: f64,
    pub gamma2_is_neg_infinity: bool,
    pub identity_residual: f64,
    /// Latest collapse step of each slot over all paths.
    pub collapse_step: Vec<Option<usize>>,
    /// Number of paths on which each slot collapsed.
    pub collapsed_paths: Vec<usize>,
    pub stationary: Vec<f64>,
    pub cylinder_frequencies: Vec<CylinderFrequency>,
    pub n_steps: usize,
    pub n_paths: usize,
}

/// Builds the Markov channel, computes both entropies, estimates the
/// exponents and compares `γ̂₁` with `−h/2`.
pub fn entropy_lyapunov_report(spec: &MarkovSpec, cfg: &SampleConfig) -> Result<EntropyReport> {
    let km = markov_channel::<f64>(spec)?;
    let h_channel = channel_entropy(&km)?;
    let h_classical = classical_markov_entropy(spec)?;
    let pi = spec.stationary()?;
    let rho = DensityMatrix::diagonal(&pi, 1e-9)?;
    let est = estimate_exponents(&km, Some(&rho), cfg, &LyapunovOptions::default())?;
    let gamma1 = est.gamma[0].to_f64();
    let gamma1_predicted = -h_channel / 2.0;
    let freqs = est.atom_frequencies();
    let cylinder_frequencies = km
        .atoms()
        .iter()
        .zip(freqs)
        .map(|(atom, empirical)| {
            let (i, j) = markov_indices(atom.label().unwrap_or_default()).expect("markov atoms are labelled");
            CylinderFrequency {
                i,
                j,
                empirical,
                predicted: spec.matrix()[(i, j)] * pi[j],
            }
        })
        .collect();
    Ok(EntropyReport {
        h_channel,
        h_classical,
        h_bits: h_channel / std::f64::consts::LN_2,
        gamma1_estimate: gamma1,
        gamma1_stderr: est.stderr[0],
        gamma1_predicted,
        gamma2_is_neg_infinity: est.gamma.len() > 1 && est.gamma[1].is_neg_infinity(),
        identity_residual: (gamma1 - gamma1_predicted).abs(),
        collapse_step: est.collapse_step,
        collapsed_paths: est.collapsed_paths,
        stationary: pi,
        cylinder_frequencies,
        n_steps: est.n_steps,
        n_paths: est.n_paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::path_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn spec(rows: &[&[f64]]) -> Result<MarkovSpec> {
        MarkovSpec::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
    }

    fn p_example() -> MarkovSpec {
        spec(&[&[0.7, 0.4], &[0.3, 0.6]]).unwrap()
    }

    /// Random irreducible column-stochastic matrix with all entries positive.
    fn random_spec(k: usize, rng: &mut impl Rng) -> MarkovSpec {
        let mut p = DMatrix::from_fn(k, k, |_, _| rng.random_range(0.05..1.0));
        for j in 0..k {
            let s = p.column(j).sum();
            p.column_mut(j).unscale_mut(s);
        }
        MarkovSpec::new(p).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(matches!(
            spec(&[&[1.0, 0.0], &[0.0, 1.0]]),
            Err(Error::NotIrreducible(_))
        ));
        assert!(matches!(
            spec(&[&[0.7, 0.7], &[0.3, 0.6]]),
            Err(Error::NotStochastic { .. })
        ));
        assert!(spec(&[&[1.2, 0.4], &[-0.2, 0.6]]).is_err());
        let row =
            MarkovSpec::from_row_stochastic(DMatrix::from_row_slice(2, 2, &[0.7, 0.3, 0.4, 0.6])).unwrap();
        assert_eq!(row.matrix(), p_example().matrix());
        assert!(spec(&[&[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]).is_ok());
    }

    #[test]
    fn stationary_vectors() {
        let pi = p_example().stationary().unwrap();
        assert!((pi[0] - 4.0 / 7.0).abs() < 1e-12 && (pi[1] - 3.0 / 7.0).abs() < 1e-12);
        let swap = spec(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap().stationary().unwrap();
        assert!((swap[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn classical_entropy_values() {
        let h = classical_markov_entropy(&p_example()).unwrap();
        assert!((h - 0.637_499_1).abs() < 1e-6, "{h}");
        let u = spec(&[&[0.5, 0.5], &[0.5, 0.5]]).unwrap();
        assert!((classical_markov_entropy(&u).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        let swap = spec(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        assert_eq!(classical_markov_entropy(&swap).unwrap(), 0.0);
    }

    #[test]
    fn markov_channel_structure() {
        let km = markov_channel::<f64>(&p_example()).unwrap();
        assert_eq!(km.len(), 4);
        assert!(km.is_stochastic(1e-12));
        let rho = spectral_data(&km).unwrap().rho_fixed;
        assert!((rho.matrix()[(0, 0)].re - 4.0 / 7.0).abs() < 1e-9);
        let swap = markov_channel::<f64>(&spec(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()).unwrap();
        assert_eq!(swap.len(), 2);
        assert_eq!(markov_indices(swap.atoms()[0].label().unwrap()), Some((0, 1)));
    }

    #[test]
    fn channel_entropy_examples() {
        let km = markov_channel::<f64>(&p_example()).unwrap();
        let h = channel_entropy(&km).unwrap();
        assert!((h - classical_markov_entropy(&p_example()).unwrap()).abs() < 1e-10);
        let swap = markov_channel::<f64>(&spec(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()).unwrap();
        assert!(channel_entropy(&swap).unwrap().abs() < 1e-15);
        let u = markov_channel::<f64>(&spec(&[&[0.5, 0.5], &[0.5, 0.5]]).unwrap()).unwrap();
        assert!((channel_entropy(&u).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn channel_entropy_bounds_on_random_channels() {
        let mut rng = path_rng(1, 0);
        for _ in 0..5 {
            let km = crate::random::random_stochastic_channel::<f64, _>(2, 3, &mut rng).unwrap();
            let h = channel_entropy(&km).unwrap();
            assert!(h >= 0.0 && h <= (km.len() as f64).ln() + 1e-12);
        }
    }

    #[test]
    fn report_examples() {
        let cfg = SampleConfig::new(3, 20_000, 8).unwrap();
        let rep = entropy_lyapunov_report(&p_example(), &cfg).unwrap();
        assert!(rep.gamma2_is_neg_infinity);
        assert!(rep.identity_residual < 0.02);
        assert!((rep.h_channel - rep.h_classical).abs() < 1e-10);
        let total = (cfg.n_steps * cfg.n_paths) as f64;
        for c in &rep.cylinder_frequencies {
            let sigma = (c.predicted * (1.0 - c.predicted) / total).sqrt();
            // steps are correlated along a path; allow a wider band
            assert!((c.empirical - c.predicted).abs() < 10.0 * sigma, "{c:?}");
        }
        let swap = entropy_lyapunov_report(&spec(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap(), &cfg).unwrap();
        assert!(swap.gamma1_estimate.abs() < 1e-10 && swap.identity_residual < 1e-10);
        let u = entropy_lyapunov_report(&spec(&[&[0.5, 0.5], &[0.5, 0.5]]).unwrap(), &cfg).unwrap();
        assert!((u.gamma1_estimate + std::f64::consts::LN_2 / 2.0).abs() < 0.005);
    }

    #[test]
    fn sampled_products_are_rank_one() {
        let km = markov_channel::<f64>(&p_example()).unwrap();
        let mut rng = path_rng(4, 0);
        for _ in 0..50 {
            let mut w = crate::linalg::identity::<f64>(2);
            for _ in 0..5 {
                w = km.atoms()[rng.random_range(0..4)].matrix() * w;
            }
            assert_eq!(crate::linalg::singular_values(&w)[1], 0.0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]
        #[test]
        fn entropy_agrees_with_classical(seed in 0u64..1_000_000, k in 2usize..=3) {
            let s = random_spec(k, &mut path_rng(seed, 0));
            let km = markov_channel::<f64>(&s).unwrap();
            let h = channel_entropy(&km).unwrap();
            prop_assert!((h - classical_markov_entropy(&s).unwrap()).abs() <= 1e-10);
        }
    }
}
