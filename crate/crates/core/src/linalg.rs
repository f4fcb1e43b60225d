//! Dense complex linear algebra at small fixed dimension: Hilbert–Schmidt
//! geometry, singular values and wedge norms, the projective metric, and the
//! state types built on them.

use nalgebra::{Complex, ComplexField, DMatrix, DVector, Normed};

use crate::error::{Error, Result};
use crate::scalar::{cplx, ComplexMatrix, ComplexVector, Real};

/// Default absolute tolerance for matrix comparisons.
pub const DEFAULT_TOL: f64 = 1e-10;

fn check_same_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Hilbert–Schmidt inner product `tr(A B†)`.
pub fn hs_inner<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> Result<Complex<T>> {
    check_same_dim(a.nrows(), b.nrows())?;
    check_same_dim(a.ncols(), b.ncols())?;
    Ok(a.iter()
        .zip(b.iter())
        .fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| {
            acc + *x * y.conj()
        }))
}

/// Hilbert–Schmidt (Frobenius) norm.
pub fn hs_norm<T: Real>(a: &ComplexMatrix<T>) -> T {
    a.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt()
}

/// Column-stacking vectorization; nalgebra storage is column-major.
pub fn vectorize<T: Real>(a: &ComplexMatrix<T>) -> ComplexVector<T> {
    DVector::from_column_slice(a.as_slice())
}

/// Inverse of [`vectorize`].
pub fn unvectorize<T: Real>(v: &ComplexVector<T>, dim: usize) -> ComplexMatrix<T> {
    DMatrix::from_column_slice(dim, dim, v.as_slice())
}

pub fn identity<T: Real>(dim: usize) -> ComplexMatrix<T> {
    DMatrix::identity(dim, dim)
}

/// `(A + A†) / 2`.
pub fn hermitize<T: Real>(a: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    (a + a.adjoint()).unscale(T::cast(2.0))
}

pub fn is_hermitian<T: Real>(a: &ComplexMatrix<T>, tol: f64) -> bool {
    a.is_square() && hs_norm(&(a - a.adjoint())) <= T::cast(tol)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
///
/// The input is Hermitized first, so small anti-Hermitian noise is ignored.
pub fn hermitian_eigen<T: Real>(a: &ComplexMatrix<T>) -> (Vec<T>, ComplexMatrix<T>) {
    let eig = hermitize(a).symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Smallest eigenvalue of the Hermitian part of `a`.
pub fn min_eigenvalue<T: Real>(a: &ComplexMatrix<T>) -> T {
    let (values, _) = hermitian_eigen(a);
    values.first().copied().unwrap_or_else(T::zero)
}

/// Applies `f` to the spectrum of a Hermitian matrix.
pub fn hermitian_function<T: Real>(a: &ComplexMatrix<T>, f: impl Fn(T) -> T) -> ComplexMatrix<T> {
    let (values, vectors) = hermitian_eigen(a);
    let diag = DVector::from_iterator(values.len(), values.into_iter().map(|v| cplx(f(v))));
    &vectors * DMatrix::from_diagonal(&diag) * vectors.adjoint()
}

/// Singular values in nonincreasing order.
pub fn singular_values<T: Real>(a: &ComplexMatrix<T>) -> Vec<T> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<T> = a.clone().singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

/// Norm of the `p`-th exterior power: product of the `p` largest singular values.
pub fn wedge_norm<T: Real>(a: &ComplexMatrix<T>, p: usize) -> Result<T> {
    let k = a.nrows().min(a.ncols());
    if p == 0 || p > k {
        return Err(Error::InvalidInput(format!("wedge order {p} outside [1, {k}]")));
    }
    Ok(singular_values(a)
        .into_iter()
        .take(p)
        .fold(T::one(), |acc, s| acc * s))
}

/// Size-`p` subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, p: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, p: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == p {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if p <= n {
        rec(0, n, p, &mut Vec::with_capacity(p), &mut out);
    }
    out
}

/// `p`-th compound matrix: the matrix of `∧^p A` in the basis
/// `e_{i₁} ∧ … ∧ e_{i_p}` (entries are the `p × p` minors).
pub fn compound<T: Real>(a: &ComplexMatrix<T>, p: usize) -> Result<ComplexMatrix<T>> {
    let k = a.nrows();
    if a.ncols() != k {
        return Err(Error::InvalidInput("compound of a non-square matrix".into()));
    }
    if p == 0 || p > k {
        return Err(Error::InvalidInput(format!("wedge order {p} outside [1, {k}]")));
    }
    let subsets = combinations(k, p);
    Ok(DMatrix::from_fn(subsets.len(), subsets.len(), |r, c| {
        a.select_rows(&subsets[r])
            .select_columns(&subsets[c])
            .determinant()
    }))
}

/// Eigenpairs of a general complex square matrix via the Schur form.
///
/// Eigenvectors are unit norm; for defective eigenvalues the returned vectors
/// may be (nearly) parallel.
pub fn eigenpairs<T: Real>(a: &ComplexMatrix<T>) -> Result<Vec<(Complex<T>, ComplexVector<T>)>> {
    let n = a.nrows();
    let scale = hs_norm(a).max(T::one());
    let schur = a
        .clone()
        .try_schur(T::epsilon() * T::cast(4.0), 10_000)
        .ok_or_else(|| Error::EigenSolver("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let tiny = T::epsilon() * scale;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let lambda = t[(i, i)];
        let mut y = DVector::<Complex<T>>::zeros(n);
        y[i] = cplx(T::one());
        for j in (0..i).rev() {
            let mut acc = Complex::new(T::zero(), T::zero());
            for l in (j + 1)..=i {
                acc += t[(j, l)] * y[l];
            }
            let mut denom = t[(j, j)] - lambda;
            if denom.norm() < tiny {
                denom = cplx(tiny);
            }
            y[j] = -acc / denom;
        }
        let x = &q * y;
        let norm = x.norm();
        out.push((lambda, x.unscale(norm)));
    }
    Ok(out)
}

/// Eigenvalues of a general complex square matrix.
pub fn eigenvalues<T: Real>(a: &ComplexMatrix<T>) -> Result<Vec<Complex<T>>> {
    let schur = a
        .clone()
        .try_schur(T::epsilon() * T::cast(4.0), 10_000)
        .ok_or_else(|| Error::EigenSolver("Schur iteration did not converge".into()))?;
    Ok(schur
        .eigenvalues()
        .map(|v| v.iter().copied().collect())
        .unwrap_or_else(|| {
            let (_, t) = schur.unpack();
            t.diagonal().iter().copied().collect()
        }))
}

/// Orthonormal basis (as columns) of the column space of `a`; singular values
/// below `rtol · σ_max` are discarded.
pub fn column_space<T: Real>(a: &ComplexMatrix<T>, rtol: f64) -> ComplexMatrix<T> {
    let k = a.nrows();
    if a.ncols() == 0 {
        return DMatrix::zeros(k, 0);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().fold(T::zero(), |m, &s| m.max(s));
    if smax == T::zero() {
        return DMatrix::zeros(k, 0);
    }
    let cutoff = smax * T::cast(rtol);
    let mut idx: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > cutoff)
        .collect();
    idx.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    DMatrix::from_fn(k, idx.len(), |r, c| u[(r, idx[c])])
}

/// Unit vectors spanning the (approximate) null space of the square matrix
/// `a`, smallest singular value first. At least one vector is always
/// returned.
pub fn null_space<T: Real>(a: &ComplexMatrix<T>, atol: T) -> Vec<ComplexVector<T>> {
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[i].partial_cmp(&sv[j]).unwrap_or(std::cmp::Ordering::Equal));
    order
        .iter()
        .enumerate()
        .filter(|&(rank, &i)| rank == 0 || sv[i] <= atol)
        .map(|(_, &i)| v_t.row(i).adjoint())
        .collect()
}

/// Rescales so the first component of (near-)maximal modulus is real and
/// nonnegative, with ties broken by lowest index, and normalizes to unit
/// length. Idempotent bit-for-bit.
pub fn canonicalize<T: Real>(v: &ComplexVector<T>) -> Result<ComplexVector<T>> {
    if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidInput("vector has non-finite entries".into()));
    }
    let norm = v.norm();
    if norm == T::zero() {
        return Err(Error::InvalidInput("cannot canonicalize the zero vector".into()));
    }
    let mut out = if (norm - T::one()).abs() <= T::epsilon() * T::cast(4.0) {
        v.clone()
    } else {
        v.unscale(norm)
    };
    let max_mod = out.iter().fold(T::zero(), |m, z| m.max(z.modulus()));
    let threshold = max_mod * (T::one() - T::cast(1e-12));
    let pivot = out
        .iter()
        .position(|z| z.modulus() >= threshold)
        .expect("nonzero vector has a maximal component");
    let z = out[pivot];
    if !(z.im == T::zero() && z.re >= T::zero()) {
        let phase = z.conj().unscale(z.modulus());
        out.iter_mut().for_each(|c| *c *= phase);
        out[pivot] = cplx(out[pivot].re.max(T::zero()));
    }
    Ok(out)
}

/// Point of the complex projective space, stored as a canonical unit
/// representative.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectivePoint<T: Real> {
    vector: ComplexVector<T>,
}

impl<T: Real> ProjectivePoint<T> {
    pub fn new(v: ComplexVector<T>) -> Result<Self> {
        Ok(Self {
            vector: canonicalize(&v)?,
        })
    }

    /// Standard basis vector `e_i` of `ℂ^dim`.
    pub fn basis(dim: usize, i: usize) -> Result<Self> {
        if i >= dim {
            return Err(Error::InvalidInput(format!("basis index {i} >= dim {dim}")));
        }
        let mut v = DVector::zeros(dim);
        v[i] = cplx(T::one());
        Self::new(v)
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn vector(&self) -> &ComplexVector<T> {
        &self.vector
    }

    pub fn into_vector(self) -> ComplexVector<T> {
        self.vector
    }
}

/// Projective metric `(1 − |⟨x, y⟩|²)^{1/2}`.
pub fn proj_distance<T: Real>(x: &ProjectivePoint<T>, y: &ProjectivePoint<T>) -> Result<T> {
    check_same_dim(x.dim(), y.dim())?;
    // ‖y − x⟨x,y⟩‖ equals the metric for unit vectors and, unlike the
    // closed form, stays accurate near zero; averaging both orders keeps it
    // exactly symmetric.
    let one_sided = |a: &ComplexVector<T>, b: &ComplexVector<T>| (b - a * a.dotc(b)).norm();
    let d = (one_sided(&x.vector, &y.vector) + one_sided(&y.vector, &x.vector)) * T::cast(0.5);
    Ok(d.min(T::one()))
}

/// Orthogonal projector `x x†` onto the line through `x`.
pub fn projector_onto<T: Real>(x: &ProjectivePoint<T>) -> ComplexMatrix<T> {
    &x.vector * x.vector.adjoint()
}

/// Positive semidefinite, trace-one Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T: Real> {
    matrix: ComplexMatrix<T>,
}

impl<T: Real> DensityMatrix<T> {
    /// Validates Hermiticity, positivity and unit trace, each within `tol`.
    pub fn new(matrix: ComplexMatrix<T>, tol: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidInput("density matrix must be square".into()));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput(
                "density matrix has non-finite entries".into(),
            ));
        }
        if !is_hermitian(&matrix, tol) {
            return Err(Error::InvalidInput("density matrix is not Hermitian".into()));
        }
        let trace = matrix.trace();
        if (trace.re - T::one()).abs() > T::cast(tol) || trace.im.abs() > T::cast(tol) {
            return Err(Error::InvalidInput(format!("density matrix trace is {trace}")));
        }
        let lo = min_eigenvalue(&matrix);
        if lo < -T::cast(tol) {
            return Err(Error::InvalidInput(format!(
                "density matrix has negative eigenvalue {lo}"
            )));
        }
        Ok(Self { matrix })
    }

    /// Hermitizes and rescales to unit trace, then validates.
    pub fn from_unnormalized(matrix: &ComplexMatrix<T>, tol: f64) -> Result<Self> {
        let h = hermitize(matrix);
        let tr = h.trace().re;
        if tr <= T::zero() {
            return Err(Error::InvalidInput("matrix has nonpositive trace".into()));
        }
        Self::new(h.unscale(tr), tol)
    }

    pub fn pure(x: &ProjectivePoint<T>) -> Self {
        Self {
            matrix: projector_onto(x),
        }
    }

    /// `Id / k`.
    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: identity::<T>(dim).unscale(T::cast(dim as f64)),
        }
    }

    pub fn diagonal(probabilities: &[T], tol: f64) -> Result<Self> {
        let d = DVector::from_iterator(probabilities.len(), probabilities.iter().map(|&p| cplx(p)));
        Self::new(DMatrix::from_diagonal(&d), tol)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix<T> {
        self.matrix
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compound_norm_matches_wedge_norm() {
        let mut rng = crate::random::path_rng(40, 0);
        for k in 2..=4 {
            let a = crate::random::random_matrix::<f64, _>(k, &mut rng);
            for p in 1..=k {
                let c = compound(&a, p).unwrap();
                let top = singular_values(&c)[0];
                assert!((top - wedge_norm(&a, p).unwrap()).abs() < 1e-10 * top);
            }
            let det = a.clone().determinant().norm();
            assert!((compound(&a, k).unwrap()[(0, 0)].norm() - det).abs() < 1e-12 * det.max(1.0));
        }
        assert_eq!(combinations(4, 2).len(), 6);
        assert!(compound(&identity::<f64>(2), 3).is_err());
    }

    #[test]
    fn compound_is_multiplicative() {
        let mut rng = crate::random::path_rng(41, 0);
        let a = crate::random::random_matrix::<f64, _>(3, &mut rng);
        let b = crate::random::random_matrix::<f64, _>(3, &mut rng);
        let lhs = compound(&(&a * &b), 2).unwrap();
        let rhs = compound(&a, 2).unwrap() * compound(&b, 2).unwrap();
        assert!(hs_norm(&(lhs - rhs)) < 1e-10);
    }
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn real(rows: &[&[f64]]) -> ComplexMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| c(rows[i][j], 0.0))
    }

    fn pauli_x() -> ComplexMatrix<f64> {
        real(&[&[0.0, 1.0], &[1.0, 0.0]])
    }

    fn pauli_z() -> ComplexMatrix<f64> {
        real(&[&[1.0, 0.0], &[0.0, -1.0]])
    }

    #[test]
    fn hs_inner_examples() {
        let id = identity::<f64>(2);
        assert_eq!(hs_inner(&id, &id).unwrap(), c(2.0, 0.0));
        assert_eq!(hs_inner(&pauli_x(), &pauli_z()).unwrap(), c(0.0, 0.0));
        let a = real(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(hs_inner(&a, &a).unwrap(), c(30.0, 0.0));
        assert!(matches!(
            hs_inner(&a, &identity(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn proj_distance_examples() {
        let e1 = ProjectivePoint::<f64>::basis(2, 0).unwrap();
        let e2 = ProjectivePoint::<f64>::basis(2, 1).unwrap();
        let s = 0.5f64.sqrt();
        let plus = ProjectivePoint::new(DVector::from_vec(vec![c(s, 0.0), c(s, 0.0)])).unwrap();
        assert_eq!(proj_distance(&e1, &e1).unwrap(), 0.0);
        assert_eq!(proj_distance(&e1, &e2).unwrap(), 1.0);
        assert!((proj_distance(&e1, &plus).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        let e3 = ProjectivePoint::<f64>::basis(3, 0).unwrap();
        assert!(proj_distance(&e1, &e3).is_err());
    }

    #[test]
    fn singular_value_examples() {
        assert_eq!(
            singular_values(&real(&[&[3.0, 0.0], &[0.0, 2.0]])),
            vec![3.0, 2.0]
        );
        let nil = singular_values(&real(&[&[0.0, 1.0], &[0.0, 0.0]]));
        assert!((nil[0] - 1.0).abs() < 1e-15 && nil[1].abs() < 1e-15);
        let h = real(&[&[1.0, 1.0], &[1.0, -1.0]]).unscale(2f64.sqrt());
        for s in singular_values(&h) {
            assert!((s - 1.0).abs() < 1e-14);
        }
        assert_eq!(
            singular_values(&DMatrix::<Complex<f64>>::zeros(3, 3)),
            vec![0.0; 3]
        );
    }

    #[test]
    fn wedge_norm_examples() {
        for p in 1..=3 {
            assert!((wedge_norm(&identity::<f64>(3), p).unwrap() - 1.0).abs() < 1e-14);
        }
        assert!((wedge_norm(&real(&[&[3.0, 0.0], &[0.0, 2.0]]), 2).unwrap() - 6.0).abs() < 1e-13);
        let rank_one = real(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(wedge_norm(&rank_one, 2).unwrap().abs() < 1e-13);
        assert!(wedge_norm(&rank_one, 0).is_err());
        assert!(wedge_norm(&rank_one, 3).is_err());
    }

    #[test]
    fn projector_examples() {
        let e1 = ProjectivePoint::<f64>::basis(2, 0).unwrap();
        assert_eq!(projector_onto(&e1), real(&[&[1.0, 0.0], &[0.0, 0.0]]));
        let s = 0.5f64.sqrt();
        let plus = ProjectivePoint::new(DVector::from_vec(vec![c(s, 0.0), c(s, 0.0)])).unwrap();
        let p = projector_onto(&plus);
        for z in p.iter() {
            assert!((z.re - 0.5).abs() < 1e-15 && z.im.abs() < 1e-15);
        }
    }

    #[test]
    fn canonicalize_breaks_ties_by_lowest_index() {
        let v = DVector::from_vec(vec![c(0.0, 1.0), c(-1.0, 0.0)]);
        let x = canonicalize(&v).unwrap();
        assert_eq!(x[0].im, 0.0);
        assert!(x[0].re > 0.0);
        assert!(canonicalize(&DVector::<Complex<f64>>::zeros(2)).is_err());
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::<f64>::new(identity(2), 1e-10).is_err());
        assert!(DensityMatrix::<f64>::new(real(&[&[1.5, 0.0], &[0.0, -0.5]]), 1e-10).is_err());
        assert!(DensityMatrix::<f64>::new(real(&[&[0.5, 0.1], &[0.0, 0.5]]), 1e-10).is_err());
        let mm = DensityMatrix::<f64>::maximally_mixed(4);
        assert!((mm.matrix().trace().re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eigenpairs_satisfy_eigen_equation() {
        let a = DMatrix::from_fn(4, 4, |i, j| {
            c((i * 3 + j) as f64 % 5.0 - 2.0, (i + 2 * j) as f64 % 3.0)
        });
        for (lambda, v) in eigenpairs(&a).unwrap() {
            assert!((&a * &v - v.scale(1.0) * lambda).norm() < 1e-10);
        }
    }

    #[test]
    fn f32_instantiation() {
        let a = DMatrix::<Complex<f32>>::from_diagonal(&DVector::from_vec(vec![
            Complex::new(3.0f32, 0.0),
            Complex::new(2.0, 0.0),
        ]));
        assert!((wedge_norm(&a, 2).unwrap() - 6.0).abs() < 1e-5);
    }

    fn arb_vec(k: usize) -> impl Strategy<Value = ComplexVector<f64>> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), k)
            .prop_filter("nonzero", |v| v.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3))
            .prop_map(|v| DVector::from_iterator(v.len(), v.into_iter().map(|(a, b)| c(a, b))))
    }

    fn arb_mat(k: usize) -> impl Strategy<Value = ComplexMatrix<f64>> {
        proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), k * k)
            .prop_map(move |v| DMatrix::from_iterator(k, k, v.into_iter().map(|(a, b)| c(a, b))))
    }

    proptest! {
        #[test]
        fn canonicalize_is_idempotent(v in arb_vec(4)) {
            let once = canonicalize(&v).unwrap();
            prop_assert_eq!(canonicalize(&once).unwrap(), once.clone());
            prop_assert!((once.norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn proj_distance_is_a_metric(x in arb_vec(3), y in arb_vec(3), z in arb_vec(3)) {
            let (x, y, z) = (
                ProjectivePoint::new(x).unwrap(),
                ProjectivePoint::new(y).unwrap(),
                ProjectivePoint::new(z).unwrap(),
            );
            let dxy = proj_distance(&x, &y).unwrap();
            prop_assert_eq!(dxy, proj_distance(&y, &x).unwrap());
            prop_assert!((0.0..=1.0).contains(&dxy));
            let dxz = proj_distance(&x, &z).unwrap();
            let dzy = proj_distance(&z, &y).unwrap();
            prop_assert!(dxy <= dxz + dzy + 1e-10);
        }

        #[test]
        fn proj_distance_is_phase_invariant(v in arb_vec(3), theta in 0.0f64..std::f64::consts::TAU) {
            let x = ProjectivePoint::new(v.clone()).unwrap();
            let y = ProjectivePoint::new(v * Complex::from_polar(1.0, theta)).unwrap();
            prop_assert!(proj_distance(&x, &y).unwrap() < 1e-7);
        }

        #[test]
        fn hs_self_inner_is_nonnegative_real(a in arb_mat(3), b in arb_mat(3)) {
            let aa = hs_inner(&a, &a).unwrap();
            prop_assert!(aa.im.abs() < 1e-12 && aa.re >= 0.0);
            let ab = hs_inner(&a, &b).unwrap();
            let ba = hs_inner(&b, &a).unwrap();
            prop_assert!((ab - ba.conj()).norm() < 1e-12);
        }

        #[test]
        fn top_wedge_is_abs_det(a in arb_mat(3)) {
            let det = a.determinant().norm();
            let w = wedge_norm(&a, 3).unwrap();
            prop_assert!((w - det).abs() <= 1e-9 * det.max(1e-300) + 1e-12);
        }

        #[test]
        fn singular_values_square_to_gram_spectrum(a in arb_mat(3)) {
            let sv = singular_values(&a);
            let (ev, _) = hermitian_eigen(&(a.adjoint() * &a));
            for (s, e) in sv.iter().zip(ev.iter().rev()) {
                prop_assert!((s * s - e).abs() < 1e-9);
            }
            prop_assert!(sv.windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn projector_is_rank_one_idempotent(v in arb_vec(4)) {
            let p = projector_onto(&ProjectivePoint::new(v).unwrap());
            prop_assert!(hs_norm(&(&p * &p - &p)) < 1e-12);
            prop_assert!((p.trace().re - 1.0).abs() < 1e-12);
            prop_assert!(is_hermitian(&p, 1e-14));
        }
    }
}
