//! Seeded random quantum objects for tests and property checks.
//!
//! Everything takes an explicit `Rng` so results are reproducible from a seed.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{self, c64, ComplexMatrix, C64};
use crate::qcore::{Channel, DensityMatrix, Effect};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c64(re, im)
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Haar-random unit vector.
pub fn pure_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..d).map(|_| gaussian(rng)).collect();
        if let Some(u) = linalg::normalized(&v) {
            return u;
        }
    }
}

pub fn pure_state<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DensityMatrix {
    DensityMatrix::pure(&pure_vector(rng, d)).expect("unit vector")
}

/// Real pure qubit state `cos(t/2)|0> + sin(t/2)|1>` with uniform angle.
pub fn real_qubit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vec<C64> {
    let t = rng.random_range(0.0..core::f64::consts::TAU);
    crate::qcore::bloch_state(t)
}

/// Density matrix `G G^dag / tr` with `G` a `d x rank` Ginibre matrix.
pub fn density_of_rank<R: Rng + ?Sized>(rng: &mut R, d: usize, rank: usize) -> DensityMatrix {
    let g = ginibre(rng, d, rank);
    let m = g.matmul(&g.adjoint());
    let tr = m.trace().re;
    DensityMatrix::new(m.scale(1.0 / tr)).expect("Ginibre state")
}

pub fn full_rank_density<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DensityMatrix {
    density_of_rank(rng, d, d)
}

/// Haar-random unitary from the QR of a Ginibre matrix.
pub fn unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> ComplexMatrix {
    let g = ginibre(rng, d, d);
    let cols: Vec<Vec<C64>> = (0..d).map(|j| g.column(j)).collect();
    let q = linalg::gram_schmidt(&cols, 1e-12);
    let mut u = ComplexMatrix::zeros(d, d);
    for (j, c) in q.iter().enumerate() {
        u.set_column(j, c);
    }
    u
}

/// Density matrix `U diag(p) U^dag` with support on the first `rank` columns of `U`.
pub fn density_on_support<R: Rng + ?Sized>(rng: &mut R, u: &ComplexMatrix, rank: usize) -> DensityMatrix {
    let d = u.rows();
    let mut p: Vec<f64> = (0..d).map(|i| if i < rank { rng.random_range(0.05..1.0) } else { 0.0 }).collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
    let m = u.matmul(&ComplexMatrix::diag(&p)).matmul(&u.adjoint());
    DensityMatrix::new(m).expect("spectral state")
}

/// Two density matrices sharing a random support of the given rank.
pub fn same_kernel_pair<R: Rng + ?Sized>(rng: &mut R, d: usize, rank: usize) -> (DensityMatrix, DensityMatrix) {
    let u = unitary(rng, d);
    (density_on_support(rng, &u, rank), density_on_support(rng, &u, rank))
}

/// Effect with eigenvalues drawn from `lo..hi` on the first `rank` columns of `u`, zero elsewhere.
pub fn effect_on_support<R: Rng + ?Sized>(
    rng: &mut R,
    u: &ComplexMatrix,
    rank: usize,
    lo: f64,
    hi: f64,
) -> Effect {
    let d = u.rows();
    let p: Vec<f64> = (0..d).map(|i| if i < rank { rng.random_range(lo..hi) } else { 0.0 }).collect();
    Effect::new(u.matmul(&ComplexMatrix::diag(&p)).matmul(&u.adjoint())).expect("spectral effect")
}

/// Random channel with `n_kraus` Kraus operators, `K_i = G_i S^{-1/2}` with `S = sum G^dag G`.
pub fn channel<R: Rng + ?Sized>(rng: &mut R, d_in: usize, d_out: usize, n_kraus: usize) -> Channel {
    let gs: Vec<ComplexMatrix> = (0..n_kraus).map(|_| ginibre(rng, d_out, d_in)).collect();
    let mut s = ComplexMatrix::zeros(d_in, d_in);
    for g in &gs {
        s = s.add(&g.adjoint().matmul(g));
    }
    let inv_sqrt = linalg::eigh(&s.hermitian_part()).reconstruct_with(|x| 1.0 / libm::sqrt(x));
    Channel::new(gs.iter().map(|g| g.matmul(&inv_sqrt)).collect()).expect("normalised Kraus set")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::same_kernel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in 1..5 {
            let u = unitary(&mut rng, d);
            assert!(u.adjoint().matmul(&u).max_abs_diff(&ComplexMatrix::identity(d)) < 1e-12);
        }
    }

    #[test]
    fn same_kernel_pairs_share_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for d in 2..5 {
            for rank in 1..=d {
                let (a, b) = same_kernel_pair(&mut rng, d, rank);
                assert_eq!(a.rank(1e-9), rank);
                assert!(same_kernel(&a, &b, 1e-9).unwrap());
            }
        }
    }

    #[test]
    fn random_channel_is_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ch = channel(&mut rng, 2, 3, 2);
        assert_eq!((ch.d_in(), ch.d_out()), (2, 3));
    }
}
