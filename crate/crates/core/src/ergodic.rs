//! Spectral analysis of the channel: spectral radius and Perron eigenmatrices,
//! irreducibility, minimal invariant subspaces (Φ-Erg) and Cesàro means.

use nalgebra::{Complex, DMatrix, DVector, Normed};
use rayon::prelude::*;

use crate::channel::KrausMeasure;
use crate::error::{Error, Result};
use crate::linalg::{
    column_space, eigenpairs, eigenvalues, hermitize, hs_norm, identity, min_eigenvalue, null_space,
    unvectorize, vectorize, DensityMatrix,
};
use crate::random::{aux_rng, random_vector};
use crate::scalar::{cplx, ComplexMatrix, ComplexVector, Real};

/// Relative window around the spectral radius inside which eigenvalues count
/// as peripheral (or as copies of λ).
pub const PERIPHERAL_RTOL: f64 = 1e-9;

/// Perron data of the channel.
#[derive(Debug, Clone)]
pub struct SpectralData<T: Real> {
    /// Spectral radius `λ_L`.
    pub lambda: T,
    /// `ρ_L`, trace one.
    pub rho_fixed: DensityMatrix<T>,
    /// `σ_L` with `φ*(σ_L) = λ σ_L`, trace `k`.
    pub sigma_dual: ComplexMatrix<T>,
    /// Number of eigenvalues with `|z| ≥ λ(1 − 1e-9)`.
    pub peripheral_multiplicity: usize,
    /// Number of eigenvalues within `1e-9·λ` of `λ` itself.
    pub lambda_multiplicity: usize,
    /// `λ` minus the second-largest eigenvalue modulus.
    pub spectral_gap: T,
    /// Superoperator spectrum sorted by decreasing modulus.
    pub eigenvalues: Vec<Complex<T>>,
}

impl<T: Real> SpectralData<T> {
    /// `‖φ(ρ_L) − λρ_L‖_HS`.
    pub fn rho_residual(&self, km: &KrausMeasure<T>) -> T {
        let rho = self.rho_fixed.matrix();
        hs_norm(&(km.apply_channel(rho).expect("same dim") - rho.scale(self.lambda)))
    }

    /// `‖φ*(σ_L) − λσ_L‖_HS`.
    pub fn sigma_residual(&self, km: &KrausMeasure<T>) -> T {
        let sigma = &self.sigma_dual;
        hs_norm(&(km.apply_dual(sigma).expect("same dim") - sigma.scale(self.lambda)))
    }
}

/// Makes the eigenvector a Hermitian matrix of positive trace.
fn hermitian_candidate<T: Real>(v: &ComplexVector<T>, dim: usize) -> Option<ComplexMatrix<T>> {
    let mut m = unvectorize(v, dim);
    let tr = m.trace();
    let phase = if tr.norm() > T::cast(1e-8) {
        tr.conj().unscale(tr.norm())
    } else {
        let (idx, z) = m.iter().enumerate().max_by(|a, b| {
            a.1.norm()
                .partial_cmp(&b.1.norm())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        let _ = idx;
        if z.norm() == T::zero() {
            return None;
        }
        z.conj().unscale(z.norm())
    };
    m *= phase;
    let mut h = hermitize(&m);
    let tr = h.trace().re;
    if tr < T::zero() {
        h = -h;
    }
    if h.trace().re <= T::cast(1e-12) * hs_norm(&h) {
        return None;
    }
    Some(h)
}

fn is_psd_candidate<T: Real>(h: &ComplexMatrix<T>) -> bool {
    min_eigenvalue(h) >= -T::cast(1e-9) * h.trace().re
}

/// Positive semidefinite eigenmatrix of `sop` at `lambda`, scaled to `trace`.
fn perron_eigenmatrix<T: Real>(
    sop: &ComplexMatrix<T>,
    lambda: T,
    dim: usize,
    trace: T,
) -> Result<ComplexMatrix<T>> {
    let n = sop.nrows();
    let shifted = sop - DMatrix::<Complex<T>>::identity(n, n).scale(lambda);
    let null = null_space(&shifted, T::cast(1e-8) * lambda.max(T::one()));
    let mut candidates = Vec::new();
    if null.len() > 1 {
        // Projection of the identity onto the eigenspace; positive for every
        // channel with a faithful fixed point.
        let id = vectorize(&identity::<T>(dim));
        let proj = null.iter().fold(DVector::zeros(n), |acc: ComplexVector<T>, v| {
            acc + v * v.dotc(&id)
        });
        candidates.push(proj);
    }
    candidates.extend(null.iter().cloned());
    for v in candidates {
        if let Some(h) = hermitian_candidate(&v, dim) {
            if is_psd_candidate(&h) {
                let tr = h.trace().re;
                return Ok(h.scale(trace / tr));
            }
        }
    }
    Err(Error::NoPositiveEigenmatrix)
}

/// Spectral radius, Perron eigenmatrices and peripheral spectrum from a full
/// eigen-decomposition of the `k²×k²` superoperator.
pub fn spectral_data<T: Real>(km: &KrausMeasure<T>) -> Result<SpectralData<T>> {
    let k = km.dim();
    let sop = km.superoperator();
    let mut eigs = eigenvalues(sop.matrix())?;
    eigs.sort_by(|a, b| {
        b.norm()
            .partial_cmp(&a.norm())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let lambda = eigs[0].norm();
    if !(lambda > T::zero()) {
        return Err(Error::NoPositiveEigenmatrix);
    }
    let rtol = T::cast(PERIPHERAL_RTOL);
    let peripheral_multiplicity = eigs
        .iter()
        .filter(|z| z.norm() >= lambda * (T::one() - rtol))
        .count();
    let lambda_c = cplx(lambda);
    let lambda_multiplicity = eigs
        .iter()
        .filter(|&&z| (z - lambda_c).norm() <= rtol * lambda)
        .count();
    // Remove one copy of λ (the closest eigenvalue) before taking the next modulus.
    let closest = eigs
        .iter()
        .enumerate()
        .min_by(|a, b| {
            (*a.1 - lambda_c)
                .norm()
                .partial_cmp(&(*b.1 - lambda_c).norm())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .map(|(i, _)| i)
        .unwrap_or(0);
    let second = eigs
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != closest)
        .map(|(_, z)| z.norm())
        .fold(T::zero(), |m, x| m.max(x));
    let rho = perron_eigenmatrix(sop.matrix(), lambda, k, T::one())?;
    let sigma = perron_eigenmatrix(&sop.matrix().adjoint(), lambda, k, T::cast(k as f64))?;
    let rho_fixed = DensityMatrix::from_unnormalized(&rho, 1e-8)?;
    Ok(SpectralData {
        lambda,
        rho_fixed,
        sigma_dual: sigma,
        peripheral_multiplicity,
        lambda_multiplicity,
        spectral_gap: lambda - second,
        eigenvalues: eigs,
    })
}

/// Evidence that a channel is reducible.
#[derive(Debug, Clone)]
pub enum IrreducibilityWitness<T: Real> {
    /// The spectral radius is a multiple eigenvalue.
    MultipleSpectralRadius { multiplicity: usize },
    /// `ρ_L` is singular; `kernel` spans part of its null space.
    RankDeficientFixedPoint {
        min_eigenvalue: T,
        kernel: ComplexVector<T>,
    },
    /// `σ_L` is singular.
    RankDeficientDualFixedPoint {
        min_eigenvalue: T,
        kernel: ComplexVector<T>,
    },
    /// No positive semidefinite eigenmatrix was found at `λ`.
    NoPerronEigenmatrix,
    /// `(Id + φ/λ)^{k−1}(x x†)` is not positive definite.
    NonPositiveImage {
        start: ComplexVector<T>,
        min_eigenvalue: T,
    },
}

/// Irreducibility decision with both criteria and their witnesses.
#[derive(Debug, Clone)]
pub struct IrreducibilityVerdict<T: Real> {
    pub irreducible: bool,
    /// `λ` simple, `ρ_L > 0` and `σ_L > 0`.
    pub spectral_criterion: bool,
    /// `(Id + φ/λ)^{k−1}(A) > 0` on every tested rank-one `A`.
    pub positivity_criterion: bool,
    pub witnesses: Vec<IrreducibilityWitness<T>>,
}

impl<T: Real> IrreducibilityVerdict<T> {
    pub fn describe(&self) -> String {
        match self.witnesses.first() {
            None => "irreducible".to_string(),
            Some(IrreducibilityWitness::MultipleSpectralRadius { multiplicity }) => {
                format!("spectral radius has multiplicity {multiplicity}")
            }
            Some(IrreducibilityWitness::RankDeficientFixedPoint { min_eigenvalue, .. }) => {
                format!("fixed point is singular (min eigenvalue {min_eigenvalue})")
            }
            Some(IrreducibilityWitness::RankDeficientDualFixedPoint { min_eigenvalue, .. }) => {
                format!("dual fixed point is singular (min eigenvalue {min_eigenvalue})")
            }
            Some(IrreducibilityWitness::NoPerronEigenmatrix) => {
                "no positive eigenmatrix at the spectral radius".to_string()
            }
            Some(IrreducibilityWitness::NonPositiveImage { min_eigenvalue, .. }) => {
                format!("(Id+phi)^(k-1) image of a pure state is singular (min eigenvalue {min_eigenvalue})")
            }
        }
    }
}

/// Default number of random rank-one probes for [`is_irreducible`].
pub const IRREDUCIBILITY_TRIALS: usize = 20;

/// Decides irreducibility with the default probe count and seed 0.
pub fn is_irreducible<T: Real>(km: &KrausMeasure<T>) -> Result<IrreducibilityVerdict<T>> {
    is_irreducible_with(km, IRREDUCIBILITY_TRIALS, 0)
}

/// Start vectors shared by the positivity probe and the orbit closures:
/// standard basis, eigenvectors of every atom, then `trials` random vectors.
fn probe_vectors<T: Real>(km: &KrausMeasure<T>, trials: usize, seed: u64) -> Result<Vec<ComplexVector<T>>> {
    let k = km.dim();
    let mut out = Vec::new();
    for i in 0..k {
        let mut e = DVector::zeros(k);
        e[i] = cplx(T::one());
        out.push(e);
    }
    for atom in km.atoms() {
        for (_, v) in eigenpairs(atom.matrix())? {
            if v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                out.push(v);
            }
        }
    }
    let mut rng = aux_rng(seed);
    out.extend((0..trials).map(|_| random_vector(k, &mut rng)));
    Ok(out)
}

/// Decides irreducibility by two independent criteria that must agree:
/// (i) `λ` is algebraically simple and both `ρ_L` and `σ_L` are positive
/// definite (without `σ_L > 0` a channel may leave a subspace invariant
/// while still having a faithful fixed point);
/// (ii) `(Id + φ/λ)^{k−1}(x x†)` is positive definite for every probe `x`
/// (standard basis, atom eigenvectors and `trials` seeded random vectors).
pub fn is_irreducible_with<T: Real>(
    km: &KrausMeasure<T>,
    trials: usize,
    seed: u64,
) -> Result<IrreducibilityVerdict<T>> {
    let k = km.dim();
    let mut witnesses = Vec::new();

    let (spectral_criterion, lambda) = match spectral_data(km) {
        Ok(sd) => {
            let mut ok = true;
            if sd.lambda_multiplicity > 1 {
                ok = false;
                witnesses.push(IrreducibilityWitness::MultipleSpectralRadius {
                    multiplicity: sd.lambda_multiplicity,
                });
            }
            let (values, vectors) = crate::linalg::hermitian_eigen(sd.rho_fixed.matrix());
            if !(values[0] > T::cast(1e-9) * sd.lambda.min(T::one())) {
                ok = false;
                witnesses.push(IrreducibilityWitness::RankDeficientFixedPoint {
                    min_eigenvalue: values[0],
                    kernel: vectors.column(0).into_owned(),
                });
            }
            let (values, vectors) = crate::linalg::hermitian_eigen(&sd.sigma_dual);
            let k_t = T::cast(k as f64);
            if !(values[0] > T::cast(1e-9) * k_t) {
                ok = false;
                witnesses.push(IrreducibilityWitness::RankDeficientDualFixedPoint {
                    min_eigenvalue: values[0] / k_t,
                    kernel: vectors.column(0).into_owned(),
                });
            }
            (ok, sd.lambda)
        }
        Err(Error::NoPositiveEigenmatrix) => {
            witnesses.push(IrreducibilityWitness::NoPerronEigenmatrix);
            let eigs = eigenvalues(km.superoperator().matrix())?;
            (false, eigs.iter().fold(T::zero(), |m, z| m.max(z.norm())))
        }
        Err(e) => return Err(e),
    };

    let mut positivity_criterion = true;
    if lambda > T::zero() {
        for x in probe_vectors(km, trials, seed)? {
            let mut a = &x * x.adjoint();
            for _ in 1..k {
                a = &a + km.apply_channel(&a)?.unscale(lambda);
            }
            let lo = min_eigenvalue(&a);
            if !(lo > T::cast(1e-9) * a.trace().re) {
                positivity_criterion = false;
                witnesses.push(IrreducibilityWitness::NonPositiveImage {
                    start: x,
                    min_eigenvalue: lo,
                });
                break;
            }
        }
    } else {
        positivity_criterion = false;
    }

    if spectral_criterion != positivity_criterion {
        return Err(Error::Inconclusive {
            spectral: spectral_criterion,
            positivity: positivity_criterion,
        });
    }
    Ok(IrreducibilityVerdict {
        irreducible: spectral_criterion,
        spectral_criterion,
        positivity_criterion,
        witnesses,
    })
}

/// Optional cross-check: `tr[B φ^n(A)] > 0` for some `n ∈ {1, …, k−1}`, for
/// the given PSD pair `(A, B)`.
pub fn trace_connectivity<T: Real>(
    km: &KrausMeasure<T>,
    a: &ComplexMatrix<T>,
    b: &ComplexMatrix<T>,
) -> Result<bool> {
    let mut x = a.clone();
    for _ in 1..km.dim().max(2) {
        x = km.apply_channel(&x)?;
        let scale = hs_norm(&x);
        if scale == T::zero() {
            return Ok(false);
        }
        x.unscale_mut(scale);
        if (b * &x).trace().re > T::cast(1e-12) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Subspace of `ℂ^k` held as an orthonormal basis (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace<T: Real> {
    basis: ComplexMatrix<T>,
}

impl<T: Real> Subspace<T> {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis(&self) -> &ComplexMatrix<T> {
        &self.basis
    }

    pub fn basis_vectors(&self) -> Vec<ComplexVector<T>> {
        self.basis.column_iter().map(|c| c.into_owned()).collect()
    }

    pub fn projector(&self) -> ComplexMatrix<T> {
        &self.basis * self.basis.adjoint()
    }

    /// `‖P_self − P_other‖_HS`.
    pub fn distance(&self, other: &Self) -> T {
        hs_norm(&(self.projector() - other.projector()))
    }

    /// Whether `self ⊆ other` within `tol`.
    pub fn is_contained_in(&self, other: &Self, tol: f64) -> bool {
        let p = other.projector();
        let outside = &self.basis - &p * &self.basis;
        hs_norm(&outside) <= T::cast(tol)
    }

    /// `max_a ‖(Id − P_E) L_a P_E‖_HS`.
    pub fn invariance_defect(&self, km: &KrausMeasure<T>) -> T {
        let p = self.projector();
        let q = identity::<T>(self.ambient_dim()) - &p;
        km.atoms()
            .iter()
            .map(|a| hs_norm(&(&q * a.matrix() * &p)))
            .fold(T::zero(), |m, x| m.max(x))
    }
}

/// Minimal invariant subspaces found by orbit closure.
#[derive(Debug, Clone)]
pub struct InvariantSubspaceReport<T: Real> {
    pub minimal_subspaces: Vec<Subspace<T>>,
    pub is_phi_erg: bool,
    pub is_irreducible: bool,
}

const ORBIT_RANK_RTOL: f64 = 1e-9;
const SUBSPACE_TOL: f64 = 1e-8;

/// Smallest subspace containing `x` and invariant under every atom.
pub fn orbit_closure<T: Real>(km: &KrausMeasure<T>, x: &ComplexVector<T>) -> Subspace<T> {
    let k = km.dim();
    let mut basis = column_space(&DMatrix::from_columns(std::slice::from_ref(x)), ORBIT_RANK_RTOL);
    loop {
        let r = basis.ncols();
        if r == 0 || r == k {
            return Subspace { basis };
        }
        let mut cols: Vec<ComplexVector<T>> = basis.column_iter().map(|c| c.into_owned()).collect();
        for atom in km.atoms() {
            let image = atom.matrix() * &basis;
            cols.extend(image.column_iter().map(|c| c.into_owned()));
        }
        let next = column_space(&DMatrix::from_columns(&cols), ORBIT_RANK_RTOL);
        if next.ncols() == r {
            return Subspace { basis: next };
        }
        basis = next;
    }
}

/// Finds the inclusion-minimal invariant subspaces among the orbit closures
/// of the probe vectors (standard basis, atom eigenvectors and `trials`
/// seeded random vectors).
///
/// Every minimal invariant subspace contains an eigenvector of each atom, so
/// the search is complete when some atom has only simple eigenvalues; with
/// degenerate eigenspaces it is a heuristic and may miss subspaces.
pub fn minimal_invariant_subspaces<T: Real>(
    km: &KrausMeasure<T>,
    trials: usize,
    seed: u64,
) -> Result<InvariantSubspaceReport<T>> {
    let k = km.dim();
    if trials < k {
        return Err(Error::InvalidInput(format!(
            "trials ({trials}) must be at least k ({k})"
        )));
    }
    let starts = probe_vectors(km, trials, seed)?;
    let closures: Vec<Subspace<T>> = starts.par_iter().map(|x| orbit_closure(km, x)).collect();

    let mut distinct: Vec<Subspace<T>> = Vec::new();
    for s in closures.into_iter().filter(|s| s.dim() > 0) {
        if !distinct
            .iter()
            .any(|d| d.dim() == s.dim() && d.distance(&s) <= T::cast(SUBSPACE_TOL))
        {
            distinct.push(s);
        }
    }
    let mut minimal: Vec<Subspace<T>> = distinct
        .iter()
        .filter(|e| {
            !distinct
                .iter()
                .any(|f| f.dim() < e.dim() && f.is_contained_in(e, SUBSPACE_TOL))
        })
        .cloned()
        .collect();
    minimal.sort_by(|a, b| {
        a.dim().cmp(&b.dim()).then_with(|| {
            let pa = a.projector();
            let pb = b.projector();
            let key = |p: &ComplexMatrix<T>| -> Vec<f64> { (0..k).map(|i| -p[(i, i)].re.as_f64()).collect() };
            key(&pa)
                .partial_cmp(&key(&pb))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let is_phi_erg = minimal.len() == 1;
    let is_irreducible = is_phi_erg && minimal[0].dim() == k;
    Ok(InvariantSubspaceReport {
        minimal_subspaces: minimal,
        is_phi_erg,
        is_irreducible,
    })
}

/// Cesàro mean `(1/N) Σ_{n=1}^N φ^n(ρ₀)` with the distance to `ρ_L` after
/// every partial sum.
#[derive(Debug, Clone)]
pub struct TemporalMean<T: Real> {
    pub mean: ComplexMatrix<T>,
    /// `distances[n-1] = ‖(1/n) Σ_{m≤n} φ^m(ρ₀) − ρ_L‖_HS`.
    pub distances: Vec<T>,
    pub rho_fixed: DensityMatrix<T>,
}

pub fn temporal_mean<T: Real>(
    km: &KrausMeasure<T>,
    rho0: &DensityMatrix<T>,
    n: usize,
) -> Result<TemporalMean<T>> {
    km.require_stochastic(1e-8)?;
    if n == 0 {
        return Err(Error::InvalidInput("N must be at least 1".into()));
    }
    let rho_fixed = spectral_data(km)?.rho_fixed;
    let k = km.dim();
    let mut state = rho0.matrix().clone();
    let mut sum = DMatrix::zeros(k, k);
    let mut distances = Vec::with_capacity(n);
    for m in 1..=n {
        state = km.apply_channel(&state)?;
        sum += &state;
        let mean = sum.unscale(T::cast(m as f64));
        distances.push(hs_norm(&(mean - rho_fixed.matrix())));
    }
    Ok(TemporalMean {
        mean: sum.unscale(T::cast(n as f64)),
        distances,
        rho_fixed,
    })
}
