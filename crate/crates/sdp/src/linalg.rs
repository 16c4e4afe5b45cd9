//! Dense real symmetric kernels used by the interior-point iteration.
//!
//! All matrices are stored row-major in flat `Vec<f64>` buffers. The sizes
//! this solver targets (blocks up to ~200) do not justify blocked kernels,
//! so everything below is written as straightforward triple loops that the
//! compiler vectorizes well enough.

/// Row-major dense square matrix view helpers.
#[inline]
pub fn at(a: &[f64], n: usize, i: usize, j: usize) -> f64 {
    a[i * n + j]
}

/// C = A * B for n x n matrices.
pub fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b[k * n..(k + 1) * n];
            let crow = &mut c[i * n..(i + 1) * n];
            for j in 0..n {
                crow[j] += aik * brow[j];
            }
        }
    }
    c
}

/// C = A * B^T for n x n matrices.
pub fn matmul_bt(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += a[i * n + k] * b[j * n + k];
            }
            c[i * n + j] = s;
        }
    }
    c
}

/// Symmetrize in place: A <- (A + A^T)/2.
pub fn symmetrize(a: &mut [f64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
    }
}

/// Frobenius inner product of two n x n matrices.
pub fn inner(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Frobenius norm.
pub fn fro_norm(a: &[f64]) -> f64 {
    inner(a, a).sqrt()
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
/// Returns `None` when a pivot drops below `eps`.
pub fn cholesky(a: &[f64], n: usize, eps: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= eps {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solve L x = b with L lower triangular (forward substitution).
pub fn solve_lower(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[i * n + k] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

/// Solve L^T x = b with L lower triangular (back substitution).
pub fn solve_lower_t(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

/// Solve (L L^T) x = b given the Cholesky factor L.
pub fn chol_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let y = solve_lower(l, n, b);
    solve_lower_t(l, n, &y)
}

/// M = L^{-1} A L^{-T} for symmetric A, i.e. the congruence used for
/// generalized eigenvalue steps. Column-by-column triangular solves.
pub fn congruence_inv(l: &[f64], a: &[f64], n: usize) -> Vec<f64> {
    // First W = L^{-1} A  (solve L W = A column-wise on rows).
    let mut w = a.to_vec();
    for col in 0..n {
        for i in 0..n {
            let mut s = w[i * n + col];
            for k in 0..i {
                s -= l[i * n + k] * w[k * n + col];
            }
            w[i * n + col] = s / l[i * n + i];
        }
    }
    // Then M = W L^{-T}: solve M L^T = W row-wise, i.e. L M^T = W^T.
    let mut m = w;
    for row in 0..n {
        for j in 0..n {
            let mut s = m[row * n + j];
            for k in 0..j {
                s -= m[row * n + k] * l[j * n + k];
            }
            m[row * n + j] = s / l[j * n + j];
        }
    }
    m
}

/// Eigendecomposition of a real symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues ascending and the orthogonal matrix V whose COLUMNS
/// are the matching eigenvectors (A = V diag(w) V^T). Deterministic: fixed
/// sweep order, no randomization.
pub fn sym_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut m = a.to_vec();
    symmetrize(&mut m, n);
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    if n <= 1 {
        return (vec![if n == 1 { m[0] } else { 0.0 }; n], v);
    }
    let norm = fro_norm(&m).max(1.0);
    let tol = 1e-15 * norm;
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[p * n + q] * m[p * n + q];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Rotate rows/cols p and q of m.
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut w: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    // Sort ascending, permuting eigenvector columns along.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap());
    let wv = w.clone();
    let vv = v.clone();
    for (new, &old) in order.iter().enumerate() {
        w[new] = wv[old];
        for r in 0..n {
            v[r * n + new] = vv[r * n + old];
        }
    }
    (w, v)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &[f64], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    sym_eigen(a, n).0[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_reconstructs() {
        let a = vec![4.0, 2.0, -1.0, 2.0, 5.0, 0.5, -1.0, 0.5, 3.0];
        let l = cholesky(&a, 3, 0.0).unwrap();
        let back = matmul_bt(&l, &l, 3);
        for (x, y) in a.iter().zip(back.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = vec![1.0, 2.0, 2.0, 1.0];
        assert!(cholesky(&a, 2, 0.0).is_none());
    }

    #[test]
    fn chol_solve_matches_direct() {
        let a = vec![4.0, 1.0, 1.0, 3.0];
        let l = cholesky(&a, 2, 0.0).unwrap();
        let x = chol_solve(&l, 2, &[1.0, 2.0]);
        // 4x + y = 1, x + 3y = 2  =>  x = 1/11, y = 7/11
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-14);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn eigen_diagonal() {
        let a = vec![3.0, 0.0, 0.0, -1.0];
        let (w, _) = sym_eigen(&a, 2);
        assert!((w[0] + 1.0).abs() < 1e-14);
        assert!((w[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn eigen_reconstructs_random() {
        // Deterministic pseudo-random symmetric matrix.
        let n = 8;
        let mut a = vec![0.0; n * n];
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state as f64 / u64::MAX as f64) - 0.5
        };
        for i in 0..n {
            for j in 0..=i {
                let v = next();
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        let (w, v) = sym_eigen(&a, n);
        // V diag(w) V^T == A
        let mut vd = v.clone();
        for i in 0..n {
            for j in 0..n {
                vd[i * n + j] = v[i * n + j] * w[j];
            }
        }
        let back = matmul_bt(&vd, &v, n);
        let scale = fro_norm(&a);
        for (x, y) in a.iter().zip(back.iter()) {
            assert!((x - y).abs() < 1e-12 * scale.max(1.0));
        }
        // Orthonormal columns.
        let vtv = {
            let mut vt = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    vt[i * n + j] = v[j * n + i];
                }
            }
            matmul(&vt, &v, n)
        };
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((vtv[i * n + j] - want).abs() < 1e-12);
            }
        }
        // Ascending order.
        for k in 1..n {
            assert!(w[k] >= w[k - 1]);
        }
    }

    #[test]
    fn congruence_matches_explicit() {
        let a = vec![5.0, 1.0, 1.0, 4.0];
        let x = vec![2.0, 0.3, 0.3, 1.5];
        let l = cholesky(&x, 2, 0.0).unwrap();
        let m = congruence_inv(&l, &a, 2);
        // Check L m L^T == a
        let lm = matmul(&l, &m, 2);
        let back = matmul_bt(&lm, &l, 2);
        for (p, q) in a.iter().zip(back.iter()) {
            assert!((p - q).abs() < 1e-12);
        }
    }
}
