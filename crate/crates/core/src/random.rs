//! Seeded random generation: per-path generator splitting and random
//! matrices, states and channels for tests and candidate searches.

use nalgebra::{Complex, DMatrix, DVector, Normed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channel::{KrausAtom, KrausMeasure};
use crate::error::Result;
use crate::linalg::{column_space, hermitian_function, ProjectivePoint};
use crate::scalar::{ComplexMatrix, ComplexVector, Real};

/// Generator used throughout the crate.
pub type PathRng = ChaCha8Rng;

/// Generator for path `index` of a run seeded with `seed`.
///
/// Every path owns the ChaCha stream numbered by its index under the common
/// key derived from `seed`, so paths are independent of each other and of the
/// order in which they are generated.
pub fn path_rng(seed: u64, index: u64) -> PathRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Generator for auxiliary (non-path) draws of a run.
pub fn aux_rng(seed: u64) -> PathRng {
    path_rng(seed, u64::MAX)
}

fn gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Complex<T> {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(T::cast(re), T::cast(im))
}

/// Complex Ginibre matrix with standard normal entries.
pub fn random_matrix<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix<T> {
    DMatrix::from_fn(dim, dim, |_, _| gaussian(rng))
}

/// Uniformly distributed unit vector.
pub fn random_vector<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexVector<T> {
    loop {
        let v: ComplexVector<T> = DVector::from_fn(dim, |_, _| gaussian(rng));
        let n = v.norm();
        if n > T::cast(1e-8) {
            return v.unscale(n);
        }
    }
}

pub fn random_point<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ProjectivePoint<T> {
    ProjectivePoint::new(random_vector(dim, rng)).expect("random vector is nonzero")
}

/// Haar-distributed unitary (QR of a Ginibre matrix with phase correction).
pub fn random_unitary<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix<T> {
    let qr = random_matrix::<T, R>(dim, rng).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..dim {
        let d = r[(j, j)];
        let m = d.norm();
        if m > T::zero() {
            let phase = d.unscale(m);
            q.column_mut(j).iter_mut().for_each(|z| *z *= phase);
        }
    }
    q
}

/// Orthogonal projector of the given rank onto a uniformly random subspace.
pub fn random_projector<T: Real, R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> ComplexMatrix<T> {
    let g = DMatrix::from_fn(dim, rank, |_, _| gaussian::<T, R>(rng));
    let basis = column_space(&g, 1e-12);
    &basis * basis.adjoint()
}

/// Random stochastic measure with `n_atoms` unit-weight atoms: Ginibre
/// matrices `G_a` rescaled to `G_a S^{-1/2}` with `S = Σ G_a† G_a`.
pub fn random_stochastic_channel<T: Real, R: Rng + ?Sized>(
    dim: usize,
    n_atoms: usize,
    rng: &mut R,
) -> Result<KrausMeasure<T>> {
    let gs: Vec<ComplexMatrix<T>> = (0..n_atoms).map(|_| random_matrix(dim, rng)).collect();
    let s = gs
        .iter()
        .fold(DMatrix::zeros(dim, dim), |acc, g| acc + g.adjoint() * g);
    let inv_sqrt = hermitian_function(&s, |x| T::one() / x.sqrt());
    let atoms = gs
        .into_iter()
        .enumerate()
        .map(|(a, g)| KrausAtom::new(T::one(), g * &inv_sqrt, Some(format!("G{a}"))))
        .collect::<Result<Vec<_>>>()?;
    KrausMeasure::new(dim, atoms)
}

/// Random measure with arbitrary (non-stochastic) Ginibre atoms and
/// uniform weights in `[0.5, 1.5)`.
pub fn random_measure<T: Real, R: Rng + ?Sized>(
    dim: usize,
    n_atoms: usize,
    rng: &mut R,
) -> Result<KrausMeasure<T>> {
    let atoms = (0..n_atoms)
        .map(|_| {
            let w = T::cast(rng.random_range(0.5..1.5));
            KrausAtom::new(w, random_matrix(dim, rng), None)
        })
        .collect::<Result<Vec<_>>>()?;
    KrausMeasure::new(dim, atoms)
}
