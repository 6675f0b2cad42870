//! Small dense-complex helpers shared by the solver modules.

use nalgebra::SymmetricEigen;
use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{C64, CMat, CVec};

/// Induced 1-norm (maximum absolute column sum).
pub fn induced_one_norm(m: &CMat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|c| c.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Entrywise projection onto the circle of radius `p`, with arg(0) resolved
/// to phase 0.
pub fn unit_phase(m: &CMat, p: f64) -> CMat {
    m.map(|c| {
        let r = c.norm();
        if r == 0.0 {
            Complex::new(p, 0.0)
        } else {
            c * (p / r)
        }
    })
}

/// Stacks the rows of `m` into a single column vector
/// [row_0^T; row_1^T; ...].
pub fn stack_rows(m: &CMat) -> CVec {
    let (nr, nc) = m.shape();
    CVec::from_fn(nr * nc, |i, _| m[(i / nc, i % nc)])
}

/// Inverse of [`stack_rows`]: fills an `nr x nc` matrix row by row.
pub fn unstack_rows(v: &CVec, nr: usize, nc: usize) -> CMat {
    assert_eq!(v.len(), nr * nc, "vector length mismatch");
    CMat::from_fn(nr, nc, |i, j| v[i * nc + j])
}

/// Largest eigenvalue of a Hermitian PSD matrix by power iteration.
/// Runs until the Rayleigh quotient stabilizes to 1e-12 relative (cap 1000
/// iterations).
pub fn power_iteration_lambda_max<R: Rng>(m: &CMat, rng: &mut R) -> f64 {
    assert_eq!(m.nrows(), m.ncols());
    let n = m.nrows();
    let mut v = CVec::from_fn(n, |_, _| standard_complex(rng));
    let mut lambda = 0.0f64;
    for _ in 0..1000 {
        let w = m * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / Complex::new(norm, 0.0);
        let next = (v.adjoint() * m * &v)[(0, 0)].re;
        if (next - lambda).abs() <= 1e-12 * next.abs().max(1.0) {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Eigendecomposition of a Hermitian matrix; returns (eigenvalues,
/// eigenvectors) sorted descending.
pub fn hermitian_eigen_desc(m: &CMat) -> (Vec<f64>, Vec<CVec>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut idx: Vec<usize> = (0..m.nrows()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = idx
        .iter()
        .map(|&i| CVec::from_column_slice(eig.eigenvectors.column(i).as_slice()))
        .collect();
    (vals, vecs)
}

/// Standard complex Gaussian CN(0, 1).
pub fn standard_complex<R: Rng>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Random matrix with i.i.d. CN(0, 1) entries, filled row-major so draws are
/// reproducible for a fixed seed.
pub fn random_complex_matrix<R: Rng>(nr: usize, nc: usize, rng: &mut R) -> CMat {
    let mut m = CMat::zeros(nr, nc);
    for i in 0..nr {
        for j in 0..nc {
            m[(i, j)] = standard_complex(rng);
        }
    }
    m
}

/// Random unimodular matrix, entries of modulus `p` with uniform phase.
pub fn random_unimodular<R: Rng>(nr: usize, nc: usize, p: f64, rng: &mut R) -> CMat {
    let mut m = CMat::zeros(nr, nc);
    for i in 0..nr {
        for j in 0..nc {
            let phase: f64 = rng.random::<f64>() * std::f64::consts::TAU;
            m[(i, j)] = Complex::from_polar(p, phase);
        }
    }
    m
}

/// Random matrix rescaled to Frobenius norm squared `power`.
pub fn random_on_sphere<R: Rng>(nr: usize, nc: usize, power: f64, rng: &mut R) -> CMat {
    let m = random_complex_matrix(nr, nc, rng);
    let n = m.norm();
    m * Complex::new(power.sqrt() / n, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_norm_of_identity() {
        let id = CMat::identity(4, 4);
        assert_eq!(induced_one_norm(&id), 1.0);
    }

    #[test]
    fn stack_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_complex_matrix(3, 5, &mut rng);
        let v = stack_rows(&m);
        // Row-stacking convention: v[i*nc + j] = m[i, j].
        assert_eq!(v[7], m[(1, 2)]);
        assert_eq!(unstack_rows(&v, 3, 5), m);
    }

    #[test]
    fn unit_phase_zero_tiebreak() {
        let m = CMat::zeros(2, 2);
        let p = unit_phase(&m, 2.0);
        assert_eq!(p[(0, 0)], C64::new(2.0, 0.0));
    }

    #[test]
    fn power_iteration_matches_dense_eigen() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [4, 8, 16] {
            let a = random_complex_matrix(n, n, &mut rng);
            let h = a.adjoint() * &a;
            let lam = power_iteration_lambda_max(&h, &mut rng);
            let (vals, _) = hermitian_eigen_desc(&h);
            assert!((lam - vals[0]).abs() <= 1e-6 * vals[0].abs());
        }
    }

    #[test]
    fn eigen_sorted_descending() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_complex_matrix(6, 6, &mut rng);
        let h = a.adjoint() * &a;
        let (vals, vecs) = hermitian_eigen_desc(&h);
        for w in vals.windows(2) {
            assert!(w[0] >= w[1]);
        }
        // Eigenpair check for the extremes.
        for (lam, v) in [(vals[0], &vecs[0]), (vals[5], &vecs[5])] {
            let r = &h * v - v * C64::new(lam, 0.0);
            assert!(r.norm() < 1e-9 * vals[0].max(1.0));
        }
    }
}
