//! Dense complex linear algebra: tensor products, local-operator embedding,
//! Hermitian eigendecomposition and one-parameter unitary groups.
//!
//! Everything here is immutable after construction and every operation is
//! pure, so values can be shared freely across threads.

use num_complex::Complex64;
use thiserror::Error;

/// Absolute tolerance on `max |A - A^dag|` below which a matrix may be
/// silently symmetrized to its Hermitian part.
pub const HERMITICITY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("matrix is not Hermitian: max |A - A^dag| = {deviation:.3e}")]
    NotHermitian { deviation: f64 },
    #[error("matrix is not unitary: max |U U^dag - I| = {deviation:.3e}")]
    NotUnitary { deviation: f64 },
    #[error("operator is {got}x{got2} but party {party} has local dimension {want}")]
    EmbedDimensionMismatch {
        party: usize,
        want: usize,
        got: usize,
        got2: usize,
    },
    #[error("dimension mismatch: {0}")]
    Shape(String),
}

/// Dense complex matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    /// Real matrix promoted to complex.
    pub fn from_real(rows: Vec<Vec<f64>>) -> Self {
        Self::from_rows(
            rows.into_iter()
                .map(|r| r.into_iter().map(|x| Complex64::new(x, 0.0)).collect())
                .collect(),
        )
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn mul(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        out
    }

    pub fn add(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a + b)
            .collect();
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a - b)
            .collect();
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, factor: Complex64) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * factor).collect(),
        }
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j].conj();
            }
        }
        out
    }

    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len());
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows];
        for i in 0..self.rows {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..self.cols {
                acc += self.data[i * self.cols + j] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols))
            .map(|i| self.data[i * self.cols + i])
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// max |A - B| over entries.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Deviation from Hermitian symmetry: max |A - A^dag|.
    pub fn hermiticity_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut dev = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.data[i * n + j] - self.data[j * n + i].conj()).norm();
                dev = dev.max(d);
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() <= tol
    }

    /// (A + A^dag)/2, accepted only when the deviation is within `tol`.
    pub fn hermitian_part(&self, tol: f64) -> Result<ComplexMatrix, TensorError> {
        let dev = self.hermiticity_deviation();
        if dev > tol {
            return Err(TensorError::NotHermitian { deviation: dev });
        }
        let n = self.rows;
        let mut out = self.clone();
        for i in 0..n {
            out.data[i * n + i] = Complex64::new(out.data[i * n + i].re, 0.0);
            for j in (i + 1)..n {
                let avg = 0.5 * (self.data[i * n + j] + self.data[j * n + i].conj());
                out.data[i * n + j] = avg;
                out.data[j * n + i] = avg.conj();
            }
        }
        Ok(out)
    }

    /// Deviation of U from unitarity: max |U U^dag - I|.
    pub fn unitarity_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let uud = self.mul(&self.dagger());
        uud.max_abs_diff(&ComplexMatrix::identity(self.rows))
    }

    /// Commutator A B - B A.
    pub fn commutator(&self, other: &ComplexMatrix) -> ComplexMatrix {
        self.mul(other).sub(&other.mul(self))
    }

    /// Spectral (operator) norm, computed from the top eigenvalue of A^dag A.
    pub fn spectral_norm(&self) -> f64 {
        if self.rows == 0 || self.cols == 0 {
            return 0.0;
        }
        let ata = self.dagger().mul(self);
        let (w, _) = hermitian_eig_unchecked(&ata);
        w.last().copied().unwrap_or(0.0).max(0.0).sqrt()
    }
}

/// Ordered per-party local dimensions of a tensor-product space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartyDims {
    dims: Vec<usize>,
}

impl PartyDims {
    pub fn new(dims: Vec<usize>) -> Result<Self, TensorError> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(TensorError::Shape(
                "party dimensions must be nonempty and >= 1".into(),
            ));
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn party_count(&self) -> usize {
        self.dims.len()
    }

    pub fn dim(&self, party: usize) -> usize {
        self.dims[party]
    }

    /// Total dimension of the product space.
    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    /// Stride of a party index in the flattened product space
    /// (party 0 is the most significant factor).
    pub fn stride(&self, party: usize) -> usize {
        self.dims[party + 1..].iter().product()
    }
}

/// Kronecker product: `(a (x) b)[(i*rb+k),(j*cb+l)] = a[i,j] * b[k,l]`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(a.rows * b.rows, a.cols * b.cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let av = a.data[i * a.cols + j];
            if av == Complex64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..b.rows {
                for l in 0..b.cols {
                    out.data[(i * b.rows + k) * out.cols + (j * b.cols + l)] =
                        av * b.data[k * b.cols + l];
                }
            }
        }
    }
    out
}

/// Embed a local operator at `party`: identity (x) ... (x) op (x) ... (x) identity.
pub fn embed_local(
    op: &ComplexMatrix,
    party: usize,
    dims: &PartyDims,
) -> Result<ComplexMatrix, TensorError> {
    if party >= dims.party_count() {
        return Err(TensorError::Shape(format!(
            "party {party} out of range for {} parties",
            dims.party_count()
        )));
    }
    let d = dims.dim(party);
    if op.rows != d || op.cols != d {
        return Err(TensorError::EmbedDimensionMismatch {
            party,
            want: d,
            got: op.rows,
            got2: op.cols,
        });
    }
    let left: usize = dims.dims()[..party].iter().product();
    let right: usize = dims.dims()[party + 1..].iter().product();
    let mut m = kron(&ComplexMatrix::identity(left), op);
    m = kron(&m, &ComplexMatrix::identity(right));
    Ok(m)
}

/// Apply a local operator to a state vector without forming the embedding.
pub fn apply_local(
    op: &ComplexMatrix,
    party: usize,
    dims: &PartyDims,
    state: &[Complex64],
) -> Vec<Complex64> {
    let d = dims.dim(party);
    let stride = dims.stride(party);
    let total = dims.total();
    assert_eq!(state.len(), total);
    let block = d * stride;
    let mut out = vec![Complex64::new(0.0, 0.0); total];
    for base in (0..total).step_by(block) {
        for inner in 0..stride {
            for r in 0..d {
                let mut acc = Complex64::new(0.0, 0.0);
                for c in 0..d {
                    acc += op.data[r * d + c] * state[base + c * stride + inner];
                }
                out[base + r * stride + inner] = acc;
            }
        }
    }
    out
}

fn off_norm(a: &[Complex64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += a[i * n + j].norm_sqr();
        }
    }
    s.sqrt()
}

/// Jacobi eigendecomposition without the Hermiticity precondition check;
/// the input is symmetrized first.
fn hermitian_eig_unchecked(h: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let n = h.rows;
    let mut a = h.data.clone();
    // Work on the Hermitian part.
    for i in 0..n {
        a[i * n + i] = Complex64::new(a[i * n + i].re, 0.0);
        for j in (i + 1)..n {
            let avg = 0.5 * (a[i * n + j] + a[j * n + i].conj());
            a[i * n + j] = avg;
            a[j * n + i] = avg.conj();
        }
    }
    let mut v = ComplexMatrix::identity(n);
    if n > 1 {
        let scale = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1.0);
        let tol = 1e-15 * scale;
        for _sweep in 0..100 {
            if off_norm(&a, n) <= tol {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    let r = apq.norm();
                    if r <= 1e-300 {
                        continue;
                    }
                    let phase = apq / r;
                    let app = a[p * n + p].re;
                    let aqq = a[q * n + q].re;
                    let theta = (aqq - app) / (2.0 * r);
                    let t = if theta >= 0.0 {
                        1.0 / (theta + (1.0 + theta * theta).sqrt())
                    } else {
                        -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    let se = phase * s; // s * e^{i phi}
                                        // Columns: col_p' = c col_p - conj(se) col_q ; col_q' = se col_p + c col_q.
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - se.conj() * akq;
                        a[k * n + q] = se * akp + c * akq;
                    }
                    // Rows: row_p' = c row_p - se row_q ; row_q' = conj(se) row_p + c row_q.
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - se * aqk;
                        a[q * n + k] = se.conj() * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v.data[k * n + p];
                        let vkq = v.data[k * n + q];
                        v.data[k * n + p] = c * vkp - se.conj() * vkq;
                        v.data[k * n + q] = se * vkp + c * vkq;
                    }
                }
            }
        }
    }
    let mut w: Vec<f64> = (0..n).map(|i| a[i * n + i].re).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap());
    let wv = w.clone();
    let vv = v.data.clone();
    for (new, &old) in order.iter().enumerate() {
        w[new] = wv[old];
        for row in 0..n {
            v.data[row * n + new] = vv[row * n + old];
        }
    }
    (w, v)
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues come back ascending; the returned matrix holds the matching
/// orthonormal eigenvectors as columns, so `h = V diag(w) V^dag`.
/// Inputs farther than 1e-10 from Hermitian are rejected.
pub fn hermitian_eig(h: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix), TensorError> {
    if !h.is_square() {
        return Err(TensorError::Shape(
            "eigendecomposition needs a square matrix".into(),
        ));
    }
    let dev = h.hermiticity_deviation();
    if dev > 1e-10 {
        return Err(TensorError::NotHermitian { deviation: dev });
    }
    Ok(hermitian_eig_unchecked(h))
}

/// U(theta) = exp(-i * theta * generator) for a Hermitian generator, computed
/// through the generator's eigendecomposition so unitarity is structural.
pub fn one_param_unitary(
    generator: &ComplexMatrix,
    theta: f64,
) -> Result<ComplexMatrix, TensorError> {
    let (w, v) = hermitian_eig(generator)?;
    let n = generator.rows;
    // U = V diag(exp(-i theta w)) V^dag
    let mut scaled = v.clone();
    for j in 0..n {
        let phase = Complex64::from_polar(1.0, -theta * w[j]);
        for i in 0..n {
            scaled.data[i * n + j] *= phase;
        }
    }
    Ok(scaled.mul(&v.dagger()))
}

/// Inner product <a|b> = sum conj(a_i) b_i.
pub fn vec_inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn vec_norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Independent element-wise oracle for the Kronecker index formula.
    fn kron_oracle(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(a.rows * b.rows, a.cols * b.cols);
        for i in 0..out.rows {
            for j in 0..out.cols {
                out.set(
                    i,
                    j,
                    a.get(i / b.rows, j / b.cols) * b.get(i % b.rows, j % b.cols),
                );
            }
        }
        out
    }

    #[test]
    fn kron_identities() {
        let i6 = kron(&ComplexMatrix::identity(2), &ComplexMatrix::identity(3));
        assert_eq!(i6, ComplexMatrix::identity(6));

        let sz = ComplexMatrix::from_real(vec![vec![1.0, 0.0], vec![0.0, -1.0]]);
        let got = kron(&sz, &ComplexMatrix::identity(2));
        let want = ComplexMatrix::from_real(vec![
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, -1.0, 0.0],
            vec![0.0, 0.0, 0.0, -1.0],
        ]);
        assert_eq!(got, want);
    }

    #[test]
    fn kron_matches_index_oracle_exactly() {
        let a = ComplexMatrix::from_rows(vec![
            vec![c(0.3, -1.2), c(2.5, 0.1)],
            vec![c(-0.7, 0.4), c(1.1, 1.9)],
        ]);
        let b = ComplexMatrix::from_rows(vec![
            vec![c(0.2, 0.0), c(-1.0, 0.5), c(0.9, -0.3)],
            vec![c(1.4, 2.2), c(0.0, -0.8), c(-0.6, 0.0)],
            vec![c(0.05, 0.7), c(2.0, 1.0), c(-1.3, -0.2)],
        ]);
        let got = kron(&a, &b);
        let want = kron_oracle(&a, &b);
        // 0 ulp: products are computed identically on both paths.
        assert_eq!(got.data, want.data);
    }

    #[test]
    fn kron_is_associative_exactly() {
        let a = ComplexMatrix::from_rows(vec![
            vec![c(1.5, -0.5), c(0.25, 2.0)],
            vec![c(-3.0, 0.0), c(0.5, 0.5)],
        ]);
        let b = ComplexMatrix::from_rows(vec![vec![c(2.0, 1.0)]]);
        let d = ComplexMatrix::from_rows(vec![
            vec![c(0.5, 0.0), c(0.0, -1.0)],
            vec![c(4.0, 0.25), c(1.0, 1.0)],
        ]);
        let left = kron(&kron(&a, &b), &d);
        let right = kron(&a, &kron(&b, &d));
        assert_eq!(left.data, right.data);
    }

    #[test]
    fn embed_at_party_zero_is_left_factor() {
        let dims = PartyDims::new(vec![2, 2]).unwrap();
        let sz = ComplexMatrix::from_real(vec![vec![1.0, 0.0], vec![0.0, -1.0]]);
        let e = embed_local(&sz, 0, &dims).unwrap();
        assert_eq!(e, kron(&sz, &ComplexMatrix::identity(2)));

        let single = PartyDims::new(vec![3]).unwrap();
        let a = ComplexMatrix::from_rows(vec![
            vec![c(1.0, 0.0), c(0.0, 2.0), c(0.5, 0.5)],
            vec![c(0.0, -2.0), c(3.0, 0.0), c(1.0, 0.0)],
            vec![c(0.5, -0.5), c(1.0, 0.0), c(-1.0, 0.0)],
        ]);
        assert_eq!(embed_local(&a, 0, &single).unwrap(), a);
    }

    #[test]
    fn embedded_distinct_parties_commute_exactly() {
        let dims = PartyDims::new(vec![2, 3]).unwrap();
        let a = ComplexMatrix::from_rows(vec![
            vec![c(0.37, 1.1), c(-2.4, 0.6)],
            vec![c(0.9, -0.1), c(1.7, 0.33)],
        ]);
        let b = ComplexMatrix::from_rows(vec![
            vec![c(1.0, 0.2), c(0.4, -0.9), c(2.2, 0.0)],
            vec![c(-0.5, 0.5), c(0.8, 1.3), c(0.0, 0.7)],
            vec![c(1.9, -1.9), c(0.26, 0.0), c(-0.61, 0.4)],
        ]);
        let ea = embed_local(&a, 0, &dims).unwrap();
        let eb = embed_local(&b, 1, &dims).unwrap();
        let comm = ea.commutator(&eb);
        // Exactly the zero matrix, not merely small.
        assert!(comm.data.iter().all(|z| z.re == 0.0 && z.im == 0.0));
    }

    #[test]
    fn embed_rejects_wrong_dimension() {
        let dims = PartyDims::new(vec![2, 2]).unwrap();
        let a = ComplexMatrix::identity(3);
        match embed_local(&a, 1, &dims) {
            Err(TensorError::EmbedDimensionMismatch { party, .. }) => assert_eq!(party, 1),
            other => panic!("expected dimension mismatch, got {other:?}"),
        }
    }

    #[test]
    fn apply_local_matches_embedding() {
        let dims = PartyDims::new(vec![2, 3, 2]).unwrap();
        let b = ComplexMatrix::from_rows(vec![
            vec![c(1.0, 0.2), c(0.4, -0.9), c(2.2, 0.0)],
            vec![c(-0.5, 0.5), c(0.8, 1.3), c(0.0, 0.7)],
            vec![c(1.9, -1.9), c(0.26, 0.0), c(-0.61, 0.4)],
        ]);
        let state: Vec<Complex64> = (0..12)
            .map(|k| c(k as f64 * 0.1, -(k as f64) * 0.05))
            .collect();
        let via_embed = embed_local(&b, 1, &dims).unwrap().matvec(&state);
        let direct = apply_local(&b, 1, &dims, &state);
        for (x, y) in via_embed.iter().zip(direct.iter()) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn eig_identity_and_pauli_x() {
        let (w, _) = hermitian_eig(&ComplexMatrix::identity(4)).unwrap();
        for x in w {
            assert!((x - 1.0).abs() < 1e-13);
        }
        let sx = ComplexMatrix::from_real(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let (w, v) = hermitian_eig(&sx).unwrap();
        // Hand diagonalization: eigenvalues -1, +1.
        assert!((w[0] + 1.0).abs() < 1e-14);
        assert!((w[1] - 1.0).abs() < 1e-14);
        let vtv = v.dagger().mul(&v);
        assert!(vtv.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-13);
    }

    #[test]
    fn eig_reconstructs_random_hermitian() {
        let n = 8;
        let mut h = ComplexMatrix::zeros(n, n);
        let mut state = 0x5deece66du64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state as f64 / u64::MAX as f64) - 0.5
        };
        for i in 0..n {
            h.set(i, i, c(next(), 0.0));
            for j in (i + 1)..n {
                let z = c(next(), next());
                h.set(i, j, z);
                h.set(j, i, z.conj());
            }
        }
        let (w, v) = hermitian_eig(&h).unwrap();
        let mut vd = v.clone();
        for j in 0..n {
            for i in 0..n {
                vd.data[i * n + j] *= w[j];
            }
        }
        let back = vd.mul(&v.dagger());
        let scale = h.fro_norm();
        assert!(back.max_abs_diff(&h) <= 1e-11 * scale.max(1.0));
        assert!(v.dagger().mul(&v).max_abs_diff(&ComplexMatrix::identity(n)) <= 1e-11);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = ComplexMatrix::from_real(vec![vec![0.0, 1.0], vec![0.0, 0.0]]);
        assert!(matches!(
            hermitian_eig(&m),
            Err(TensorError::NotHermitian { .. })
        ));
    }

    #[test]
    fn unitary_at_zero_is_identity() {
        let g = ComplexMatrix::from_rows(vec![
            vec![c(0.3, 0.0), c(0.1, -0.4)],
            vec![c(0.1, 0.4), c(-0.8, 0.0)],
        ]);
        let u = one_param_unitary(&g, 0.0).unwrap();
        assert!(u.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-13);
    }

    #[test]
    fn unitary_group_law() {
        let g = ComplexMatrix::from_rows(vec![
            vec![c(1.3, 0.0), c(0.2, 0.7)],
            vec![c(0.2, -0.7), c(-0.4, 0.0)],
        ]);
        let u1 = one_param_unitary(&g, 0.63).unwrap();
        let u2 = one_param_unitary(&g, -1.41).unwrap();
        let u12 = one_param_unitary(&g, 0.63 - 1.41).unwrap();
        assert!(u1.mul(&u2).max_abs_diff(&u12) < 1e-10);
    }

    #[test]
    fn unitary_of_diagonal_generator_by_hand() {
        // generator sigma_z / 2, theta = pi: diag(e^{-i pi/2}, e^{i pi/2}).
        let g = ComplexMatrix::from_real(vec![vec![0.5, 0.0], vec![0.0, -0.5]]);
        let u = one_param_unitary(&g, std::f64::consts::PI).unwrap();
        let want = ComplexMatrix::from_rows(vec![
            vec![
                Complex64::from_polar(1.0, -std::f64::consts::FRAC_PI_2),
                c(0.0, 0.0),
            ],
            vec![
                c(0.0, 0.0),
                Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_2),
            ],
        ]);
        assert!(u.max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn unitary_rejects_non_hermitian_generator() {
        let m = ComplexMatrix::from_real(vec![vec![0.0, 1.0], vec![0.0, 0.0]]);
        assert!(one_param_unitary(&m, 1.0).is_err());
    }
}
