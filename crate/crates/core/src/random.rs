//! Seeded randomness helpers: Gaussian deviates, Haar-like random unitaries
//! and random states. Everything is driven by a caller-supplied ChaCha stream
//! so runs are reproducible across platforms.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::ComplexMatrix;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal deviate via Box-Muller.
pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u1: f64 = rng.gen::<f64>();
        if u1 <= f64::MIN_POSITIVE {
            continue;
        }
        let u2: f64 = rng.gen::<f64>();
        return (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
    }
}

pub fn complex_gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(gaussian(rng), gaussian(rng))
}

/// Haar-like random unitary through QR (Gram-Schmidt) of a complex Gaussian
/// matrix, with the phase convention that makes R's diagonal positive.
pub fn haar_unitary(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for _ in 0..n {
        cols.push((0..n).map(|_| complex_gaussian(rng)).collect());
    }
    // Modified Gram-Schmidt.
    for j in 0..n {
        for k in 0..j {
            let proj: Complex64 = cols[k]
                .iter()
                .zip(cols[j].iter())
                .map(|(a, b)| a.conj() * b)
                .sum();
            for i in 0..n {
                let s = cols[k][i];
                cols[j][i] -= proj * s;
            }
        }
        let norm = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in cols[j].iter_mut() {
            *z /= norm;
        }
    }
    let mut m = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            m.set(i, j, cols[j][i]);
        }
    }
    m
}

/// Random normalized state vector.
pub fn random_state(dim: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = (0..dim).map(|_| complex_gaussian(rng)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in v.iter_mut() {
        *z /= norm;
    }
    v
}

/// Random Hermitian matrix with entries of order one.
pub fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let mut h = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        h.set(i, i, Complex64::new(gaussian(rng), 0.0));
        for j in (i + 1)..n {
            let z = 0.5 * complex_gaussian(rng);
            h.set(i, j, z);
            h.set(j, i, z.conj());
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = rng_from_seed(7);
        for n in [2usize, 3, 4] {
            let u = haar_unitary(n, &mut rng);
            assert!(u.unitarity_deviation() < 1e-12);
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = haar_unitary(3, &mut rng_from_seed(42));
        let b = haar_unitary(3, &mut rng_from_seed(42));
        assert_eq!(a.data, b.data);
    }
}
