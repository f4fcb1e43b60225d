//! Finite Kraus measures `{(w_a, L_a)}` and the channel they define,
//! `φ(ρ) = Σ_a w_a L_a ρ L_a†`, together with its dual, vectorized and Choi
//! forms.
//!
//! Weights are kept separate from the matrices: `√w_a` is never folded into
//! `L_a`. Vectorization is column stacking throughout, so
//! `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

use nalgebra::DMatrix;

use crate::ergodic;
use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_eigen, hermitian_function, hermitize, hs_norm, identity, min_eigenvalue, unvectorize, vectorize,
};
use crate::scalar::{cplx, ComplexMatrix, Real};

/// One atom `v_a` of the measure: its mass `w_a` and the value `L(v_a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausAtom<T: Real> {
    weight: T,
    matrix: ComplexMatrix<T>,
    label: Option<String>,
}

impl<T: Real> KrausAtom<T> {
    pub fn new(weight: T, matrix: ComplexMatrix<T>, label: Option<String>) -> Result<Self> {
        if !(weight > T::zero()) || !weight.is_finite() {
            return Err(Error::InvalidInput(format!(
                "atom weight must be positive, got {weight}"
            )));
        }
        if !matrix.is_square() {
            return Err(Error::InvalidInput(format!(
                "atom matrix must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("atom matrix has non-finite entries".into()));
        }
        Ok(Self {
            weight,
            matrix,
            label,
        })
    }

    pub fn weight(&self) -> T {
        self.weight
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.matrix
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }
}

/// Finite weighted family of `k×k` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausMeasure<T: Real> {
    dim: usize,
    atoms: Vec<KrausAtom<T>>,
}

/// Outcome of the stochasticity check `Σ w_a L_a† L_a = Id`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stochasticity<T> {
    pub is_stochastic: bool,
    /// `‖Σ w_a L_a† L_a − Id‖_HS`.
    pub residual: T,
}

/// Choi matrix `Σ_ij |i⟩⟨j| ⊗ φ(|i⟩⟨j|)` with its smallest eigenvalue.
#[derive(Debug, Clone)]
pub struct ChoiMatrix<T: Real> {
    pub matrix: ComplexMatrix<T>,
    pub min_eigenvalue: T,
}

/// `k²×k²` matrix of the channel acting on column-stacked `k×k` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator<T: Real> {
    dim: usize,
    matrix: ComplexMatrix<T>,
}

impl<T: Real> Superoperator<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.matrix
    }

    pub fn apply(&self, rho: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
        if rho.nrows() != self.dim || rho.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: rho.nrows(),
            });
        }
        Ok(unvectorize(&(&self.matrix * vectorize(rho)), self.dim))
    }

    /// Matrix of the dual map with respect to the Hilbert–Schmidt product.
    pub fn adjoint(&self) -> Self {
        Self {
            dim: self.dim,
            matrix: self.matrix.adjoint(),
        }
    }
}

impl<T: Real> KrausMeasure<T> {
    pub fn new(dim: usize, atoms: Vec<KrausAtom<T>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        if atoms.is_empty() {
            return Err(Error::InvalidInput("measure needs at least one atom".into()));
        }
        if let Some(bad) = atoms.iter().find(|a| a.matrix.nrows() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.matrix.nrows(),
            });
        }
        if atoms
            .iter()
            .all(|a| a.matrix.iter().all(|z| z.re == T::zero() && z.im == T::zero()))
        {
            return Err(Error::InvalidInput("every atom matrix is zero".into()));
        }
        Ok(Self { dim, atoms })
    }

    /// Unit-weight atoms, one per matrix.
    pub fn from_matrices(matrices: Vec<ComplexMatrix<T>>) -> Result<Self> {
        let dim = matrices
            .first()
            .map(|m| m.nrows())
            .ok_or_else(|| Error::InvalidInput("measure needs at least one atom".into()))?;
        let atoms = matrices
            .into_iter()
            .map(|m| KrausAtom::new(T::one(), m, None))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, atoms)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[KrausAtom<T>] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Label of atom `a`, falling back to its index.
    pub fn atom_label(&self, a: usize) -> String {
        self.atoms[a].label.clone().unwrap_or_else(|| a.to_string())
    }

    fn check_operand(&self, x: &ComplexMatrix<T>) -> Result<()> {
        if x.nrows() != self.dim || x.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.nrows(),
            });
        }
        Ok(())
    }

    /// `φ(ρ) = Σ_a w_a L_a ρ L_a†`.
    pub fn apply_channel(&self, rho: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
        self.check_operand(rho)?;
        Ok(self
            .atoms
            .iter()
            .fold(DMatrix::zeros(self.dim, self.dim), |acc, a| {
                acc + (&a.matrix * rho * a.matrix.adjoint()).scale(a.weight)
            }))
    }

    /// `φ*(X) = Σ_a w_a L_a† X L_a`.
    pub fn apply_dual(&self, x: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
        self.check_operand(x)?;
        Ok(self
            .atoms
            .iter()
            .fold(DMatrix::zeros(self.dim, self.dim), |acc, a| {
                acc + (a.matrix.adjoint() * x * &a.matrix).scale(a.weight)
            }))
    }

    /// `Σ_a w_a L_a† L_a`.
    pub fn dual_of_identity(&self) -> ComplexMatrix<T> {
        self.atoms
            .iter()
            .fold(DMatrix::zeros(self.dim, self.dim), |acc, a| {
                acc + (a.matrix.adjoint() * &a.matrix).scale(a.weight)
            })
    }

    pub fn stochasticity(&self, tol: f64) -> Stochasticity<T> {
        let residual = hs_norm(&(self.dual_of_identity() - identity::<T>(self.dim)));
        Stochasticity {
            is_stochastic: residual <= T::cast(T::floor_tol(tol)),
            residual,
        }
    }

    pub fn is_stochastic(&self, tol: f64) -> bool {
        self.stochasticity(tol).is_stochastic
    }

    /// Errors with [`Error::NotStochastic`] unless stochastic within `tol`.
    pub fn require_stochastic(&self, tol: f64) -> Result<()> {
        let s = self.stochasticity(tol);
        if s.is_stochastic {
            Ok(())
        } else {
            Err(Error::NotStochastic {
                residual: s.residual.as_f64(),
            })
        }
    }

    pub fn choi_matrix(&self) -> ChoiMatrix<T> {
        let k = self.dim;
        let mut choi = DMatrix::zeros(k * k, k * k);
        for i in 0..k {
            for j in 0..k {
                let mut e = DMatrix::zeros(k, k);
                e[(i, j)] = cplx(T::one());
                let block = self.apply_channel(&e).expect("operand has channel dimension");
                choi.view_mut((i * k, j * k), (k, k)).copy_from(&block);
            }
        }
        let choi = hermitize(&choi);
        let min_eigenvalue = min_eigenvalue(&choi);
        ChoiMatrix {
            matrix: choi,
            min_eigenvalue,
        }
    }

    /// `Σ_a w_a conj(L_a) ⊗ L_a` under column stacking.
    pub fn superoperator(&self) -> Superoperator<T> {
        let k2 = self.dim * self.dim;
        let matrix = self.atoms.iter().fold(DMatrix::zeros(k2, k2), |acc, a| {
            acc + a.matrix.map(|z| z.conj()).kronecker(&a.matrix).scale(a.weight)
        });
        Superoperator {
            dim: self.dim,
            matrix,
        }
    }

    /// Rescales to the stochastic representative
    /// `L'_a = λ^{-1/2} σ^{1/2} L_a σ^{-1/2}` where `φ*(σ) = λσ` is the Perron
    /// pair of the dual.
    ///
    /// The construction needs `σ > 0`, which irreducibility guarantees. A
    /// rank-deficient `σ` is reported as [`Error::NotIrreducible`] when the
    /// measure is reducible and as [`Error::SigmaNotPositive`] otherwise.
    pub fn normalize(&self) -> Result<Self> {
        let spectral = ergodic::spectral_data(self)?;
        let (values, _) = hermitian_eigen(&spectral.sigma_dual);
        let max = values.last().copied().unwrap_or_else(T::zero);
        let min = values.first().copied().unwrap_or_else(T::zero);
        if !(min > max * T::cast(1e-12)) {
            if let Ok(verdict) = ergodic::is_irreducible(self) {
                if !verdict.irreducible {
                    return Err(Error::NotIrreducible(verdict.describe()));
                }
            }
            return Err(Error::SigmaNotPositive {
                min_eigenvalue: min.as_f64(),
            });
        }
        let sqrt = hermitian_function(&spectral.sigma_dual, |x| x.sqrt());
        let inv_sqrt = hermitian_function(&spectral.sigma_dual, |x| T::one() / x.sqrt());
        let scale = T::one() / spectral.lambda.sqrt();
        let atoms = self
            .atoms
            .iter()
            .map(|a| KrausAtom {
                weight: a.weight,
                matrix: (&sqrt * &a.matrix * &inv_sqrt).scale(scale),
                label: a.label.clone(),
            })
            .collect();
        Ok(Self { dim: self.dim, atoms })
    }

    /// Adds `ε · direction` to every atom matrix.
    pub fn perturb(&self, direction: &ComplexMatrix<T>, eps: T) -> Result<Self> {
        self.check_operand(direction)?;
        if eps < T::zero() {
            return Err(Error::InvalidInput(
                "perturbation size must be nonnegative".into(),
            ));
        }
        let atoms = self
            .atoms
            .iter()
            .map(|a| KrausAtom {
                weight: a.weight,
                matrix: &a.matrix + direction.scale(eps),
                label: a.label.clone(),
            })
            .collect();
        Self::new(self.dim, atoms)
    }

    /// Conjugates every atom: `L_a ↦ Q L_a Q†`.
    pub fn conjugated_by(&self, q: &ComplexMatrix<T>) -> Result<Self> {
        self.check_operand(q)?;
        let atoms = self
            .atoms
            .iter()
            .map(|a| KrausAtom {
                weight: a.weight,
                matrix: q * &a.matrix * q.adjoint(),
                label: a.label.clone(),
            })
            .collect();
        Ok(Self { dim: self.dim, atoms })
    }

    /// Multiplies every atom matrix by the scalar `c`.
    pub fn scaled(&self, c: nalgebra::Complex<T>) -> Self {
        let atoms = self
            .atoms
            .iter()
            .map(|a| KrausAtom {
                weight: a.weight,
                matrix: &a.matrix * c,
                label: a.label.clone(),
            })
            .collect();
        Self { dim: self.dim, atoms }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hs_inner, DensityMatrix};
    use crate::random::{path_rng, random_matrix, random_measure, random_stochastic_channel, random_unitary};
    use nalgebra::{Complex, DVector};

    fn c(re: f64) -> Complex<f64> {
        Complex::new(re, 0.0)
    }

    fn markov(p: [[f64; 2]; 2]) -> KrausMeasure<f64> {
        let mut mats = Vec::new();
        for i in 0..2 {
            for j in 0..2 {
                let mut m = DMatrix::zeros(2, 2);
                m[(i, j)] = c(p[i][j].sqrt());
                mats.push(m);
            }
        }
        KrausMeasure::from_matrices(mats).unwrap()
    }

    fn random_hermitian(k: usize, seed: u64) -> ComplexMatrix<f64> {
        hermitize(&random_matrix(k, &mut path_rng(seed, 0)))
    }

    fn random_psd(k: usize, seed: u64) -> ComplexMatrix<f64> {
        let g = random_matrix::<f64, _>(k, &mut path_rng(seed, 1));
        &g * g.adjoint()
    }

    #[test]
    fn markov_channel_acts_classically() {
        let km = markov([[0.7, 0.4], [0.3, 0.6]]);
        let rho = DMatrix::from_row_slice(
            2,
            2,
            &[c(0.2), Complex::new(0.1, 0.3), Complex::new(0.1, -0.3), c(0.8)],
        );
        let out = km.apply_channel(&rho).unwrap();
        // diag(P r) with r = (0.2, 0.8), hand-expanded
        let expected = [0.7 * 0.2 + 0.4 * 0.8, 0.3 * 0.2 + 0.6 * 0.8];
        assert!((out[(0, 0)].re - expected[0]).abs() < 1e-15);
        assert!((out[(1, 1)].re - expected[1]).abs() < 1e-15);
        assert_eq!(out[(0, 1)], c(0.0));
    }

    #[test]
    fn unitary_atom_conjugates() {
        let u = random_unitary::<f64, _>(3, &mut path_rng(5, 0));
        let km = KrausMeasure::from_matrices(vec![u.clone()]).unwrap();
        let rho = random_hermitian(3, 9);
        assert!(hs_norm(&(km.apply_channel(&rho).unwrap() - &u * &rho * u.adjoint())) < 1e-13);
        assert!(hs_norm(&(km.apply_dual(&rho).unwrap() - u.adjoint() * &rho * &u)) < 1e-13);
        assert_eq!(
            km.apply_channel(&DMatrix::zeros(3, 3)).unwrap(),
            DMatrix::zeros(3, 3)
        );
        assert!(km.apply_channel(&DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn dual_fixes_identity_for_stochastic() {
        let km = markov([[0.7, 0.4], [0.3, 0.6]]);
        assert!(hs_norm(&(km.apply_dual(&identity(2)).unwrap() - identity::<f64>(2))) < 1e-15);
    }

    #[test]
    fn duality_identity_on_random_pairs() {
        let km = random_measure::<f64, _>(3, 3, &mut path_rng(11, 0)).unwrap();
        for s in 0..100 {
            let rho = random_matrix::<f64, _>(3, &mut path_rng(100 + s, 0));
            let x = random_matrix::<f64, _>(3, &mut path_rng(200 + s, 0));
            let lhs = hs_inner(&km.apply_channel(&rho).unwrap(), &x).unwrap();
            let rhs = hs_inner(&rho, &km.apply_dual(&x).unwrap()).unwrap();
            assert!((lhs - rhs).norm() <= 1e-10 * hs_norm(&rho) * hs_norm(&x));
        }
    }

    #[test]
    fn stochasticity_examples() {
        let s = markov([[0.7, 0.4], [0.3, 0.6]]).stochasticity(1e-12);
        assert!(s.is_stochastic && s.residual < 1e-12);
        let u = random_unitary::<f64, _>(2, &mut path_rng(3, 0));
        assert!(KrausMeasure::from_matrices(vec![u.clone()])
            .unwrap()
            .is_stochastic(1e-12));
        let doubled = KrausMeasure::from_matrices(vec![u.scale(2.0)])
            .unwrap()
            .stochasticity(1e-12);
        assert!(!doubled.is_stochastic);
        assert!((doubled.residual - 3.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn choi_of_identity_channel() {
        let k = 3;
        let choi = KrausMeasure::from_matrices(vec![identity::<f64>(k)])
            .unwrap()
            .choi_matrix();
        let (values, _) = hermitian_eigen(&choi.matrix);
        assert!((values[k * k - 1] - k as f64).abs() < 1e-12);
        assert!(values[..k * k - 1].iter().all(|v| v.abs() < 1e-12));
        // k times the maximally entangled projector
        let mut omega = DVector::<Complex<f64>>::zeros(k * k);
        for i in 0..k {
            omega[i * k + i] = c(1.0);
        }
        assert!(hs_norm(&(&choi.matrix - &omega * omega.adjoint())) < 1e-13);
    }

    #[test]
    fn choi_is_psd() {
        let choi = markov([[0.5, 0.5], [0.5, 0.5]]).choi_matrix();
        assert!(choi.min_eigenvalue >= -1e-12);
        for s in 0..10 {
            let km = random_measure::<f64, _>(3, 2, &mut path_rng(300 + s, 0)).unwrap();
            assert!(km.choi_matrix().min_eigenvalue >= -1e-10);
        }
    }

    #[test]
    fn superoperator_matches_kraus_sum() {
        let id = KrausMeasure::from_matrices(vec![identity::<f64>(3)]).unwrap();
        assert!(hs_norm(&(id.superoperator().matrix - identity::<f64>(9))) < 1e-15);
        let u = random_unitary::<f64, _>(2, &mut path_rng(4, 0));
        let su = KrausMeasure::from_matrices(vec![u.clone()])
            .unwrap()
            .superoperator();
        assert!(hs_norm(&(su.matrix().adjoint() * su.matrix() - identity::<f64>(4))) < 1e-13);
        let km = random_measure::<f64, _>(3, 3, &mut path_rng(12, 0)).unwrap();
        let sop = km.superoperator();
        for s in 0..50 {
            let rho = random_matrix::<f64, _>(3, &mut path_rng(400 + s, 0));
            assert!(hs_norm(&(sop.apply(&rho).unwrap() - km.apply_channel(&rho).unwrap())) < 1e-10);
        }
    }

    #[test]
    fn normalize_examples() {
        let km = markov([[0.7, 0.4], [0.3, 0.6]]);
        let n = km.normalize().unwrap();
        for (a, b) in km.atoms().iter().zip(n.atoms()) {
            assert!(hs_norm(&(a.matrix() - b.matrix())) < 1e-9);
        }
        let u = random_unitary::<f64, _>(2, &mut path_rng(6, 0));
        let n = KrausMeasure::from_matrices(vec![u.scale(2.0)])
            .unwrap()
            .normalize()
            .unwrap();
        assert!(hs_norm(&(n.atoms()[0].matrix() - &u)) < 1e-9);
        // reducible with a rank-deficient dual fixed point: {|1><1|, |1><2|}
        let mut e11 = DMatrix::zeros(2, 2);
        e11[(0, 0)] = c(1.0);
        let mut e22 = DMatrix::zeros(2, 2);
        e22[(1, 1)] = c(1.0);
        let block = KrausMeasure::from_matrices(vec![e11, e22]).unwrap();
        assert!(block.normalize().is_ok());
        let mut e11 = DMatrix::zeros(2, 2);
        e11[(0, 0)] = c(1.0);
        let mut e21 = DMatrix::zeros(2, 2);
        e21[(1, 0)] = c(0.5);
        let tri = KrausMeasure::from_matrices(vec![e11, e21]).unwrap();
        assert!(matches!(tri.normalize(), Err(Error::NotIrreducible(_))));
        let km = random_measure::<f64, _>(3, 2, &mut path_rng(13, 0)).unwrap();
        let n = km.normalize().unwrap();
        assert!(n.is_stochastic(1e-9));
    }

    #[test]
    fn perturb_examples() {
        let km = markov([[0.7, 0.4], [0.3, 0.6]]);
        assert_eq!(km.perturb(&identity(2), 0.0).unwrap(), km);
        let a = random_matrix::<f64, _>(2, &mut path_rng(7, 0));
        let single = KrausMeasure::from_matrices(vec![a.clone()]).unwrap();
        let p = single.perturb(&identity(2), 0.25).unwrap();
        assert!(hs_norm(&(p.atoms()[0].matrix() - (a + identity::<f64>(2).scale(0.25)))) < 1e-15);
        assert!(single.perturb(&identity(2), -1.0).is_err());
    }

    #[test]
    fn trace_and_positivity_preserved() {
        let km = random_stochastic_channel::<f64, _>(4, 3, &mut path_rng(14, 0)).unwrap();
        for s in 0..20 {
            let h = random_hermitian(4, 500 + s);
            assert!((km.apply_channel(&h).unwrap().trace() - h.trace()).norm() < 1e-10);
            let p = random_psd(4, 600 + s);
            assert!(min_eigenvalue(&km.apply_channel(&p).unwrap()) >= -1e-10);
        }
        let rho = DensityMatrix::<f64>::maximally_mixed(4);
        assert!((km.apply_channel(rho.matrix()).unwrap().trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_atoms() {
        assert!(KrausAtom::new(0.0, identity::<f64>(2), None).is_err());
        assert!(KrausAtom::new(-1.0, identity::<f64>(2), None).is_err());
        assert!(KrausAtom::new(1.0, DMatrix::<Complex<f64>>::zeros(2, 3), None).is_err());
        assert!(KrausMeasure::<f64>::from_matrices(vec![DMatrix::zeros(2, 2)]).is_err());
        let a = KrausAtom::new(1.0, identity::<f64>(2), None).unwrap();
        let b = KrausAtom::new(1.0, identity::<f64>(3), None).unwrap();
        assert!(KrausMeasure::new(2, vec![a, b]).is_err());
    }
}
