//! Dense linear-algebra kernels: a row-major matrix type, symmetric
//! eigendecomposition, clipped inverse square root, polar factor, QR
//! orthonormalization, and a finite-difference gradient oracle.
//!
//! Eigendecomposition and the wide-case thin SVD are delegated to nalgebra;
//! everything layered on top (clipping, polar composition, the deterministic
//! QR) is implemented here so its conventions are pinned.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Dense real matrix, row-major storage. Entries are checked finite on
/// construction; operations that can produce non-finite values (the flow
/// driver guards against those) do not re-validate.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from row-major data.
    ///
    /// Errors if dimensions are zero, the data length disagrees, or any
    /// entry is NaN/Inf.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("matrix data"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Dimension("no rows given".into()));
        }
        let cols = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(rows.len(), cols, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| *v == 0.0)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Matrix product. Panics on inner-dimension mismatch; public entry
    /// points validate shapes before reaching here.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(
            self.cols, other.rows,
            "inner dimensions: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    /// Gram matrix YᵀY, computed column-against-column so the result is
    /// exactly symmetric in floating point.
    pub fn gram(&self) -> Self {
        let k = self.cols;
        let mut g = Self::zeros(k, k);
        for a in 0..k {
            for b in a..k {
                let mut s = 0.0;
                for i in 0..self.rows {
                    s += self.get(i, a) * self.get(i, b);
                }
                g.set(a, b, s);
                g.set(b, a, s);
            }
        }
        g
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape());
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape());
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// self += c * other
    pub fn axpy(&mut self, c: f64, other: &Self) {
        assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    /// Frobenius inner product ⟨self, other⟩.
    pub fn dot(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| f(*v)).collect(),
        }
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

/// Symmetric eigendecomposition, eigenvalues ascending, eigenvectors
/// orthonormal and stored column-wise.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DenseMatrix,
}

/// √(Σ m_ij²). Zero exactly for the all-zero matrix.
pub fn frobenius_norm(m: &DenseMatrix) -> f64 {
    m.data().iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Eigendecomposition of a (nearly) symmetric matrix. The input is
/// symmetrized as (S+Sᵀ)/2 before factoring to absorb round-off in
/// downstream Gram matrices.
pub fn sym_eig(s: &DenseMatrix) -> Result<SymEig> {
    if s.rows() != s.cols() {
        return Err(Error::Dimension(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            s.rows(),
            s.cols()
        )));
    }
    let n = s.rows();
    let sym = s.add(&s.transpose()).scaled(0.5);
    let eig = sym.to_nalgebra().symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = DenseMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(SymEig {
        eigenvalues,
        eigenvectors,
    })
}

/// Inverse square root of a symmetric PSD matrix with eigenvalue clipping:
/// V·diag(max(λ, ε))^{-1/2}·Vᵀ. When `clip_eps` is `None` the clip is
/// relative, 1e-8·max(λ_max, 1), so behavior is scale-free. Clipping
/// absorbs rank deficiency; the result is explicitly symmetrized.
pub fn inv_sqrt_psd(s: &DenseMatrix, clip_eps: Option<f64>) -> Result<DenseMatrix> {
    let eig = sym_eig(s)?;
    let n = s.rows();
    let lambda_max = eig.eigenvalues.last().copied().unwrap_or(0.0);
    let eps = clip_eps.unwrap_or(1e-8 * lambda_max.max(1.0));
    let v = &eig.eigenvectors;

    let mut out = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut acc = 0.0;
            for (k, lam) in eig.eigenvalues.iter().enumerate() {
                let w = 1.0 / lam.max(eps).sqrt();
                acc += v.get(i, k) * w * v.get(j, k);
            }
            out.set(i, j, acc);
            out.set(j, i, acc);
        }
    }
    Ok(out)
}

/// Nearest matrix with orthonormal columns (rows ≥ cols) or rows
/// (rows < cols) in Frobenius norm. Tall inputs go through the clipped
/// inverse square root of the Gram matrix; wide inputs fall back to a thin
/// SVD, Q = U·Vᵀ.
pub fn polar_orthonormal(y: &DenseMatrix) -> Result<DenseMatrix> {
    if y.is_zero() {
        return Err(Error::Degenerate("polar factor of the zero matrix"));
    }
    if y.rows() >= y.cols() {
        let t = inv_sqrt_psd(&y.gram(), None)?;
        Ok(y.matmul(&t))
    } else {
        wide_polar(y)
    }
}

fn wide_polar(y: &DenseMatrix) -> Result<DenseMatrix> {
    let q = svd_polar(y)?;
    // Exactly-deficient singular pairs can leave Vᵀ rows underdetermined;
    // detect and redo from a deterministically perturbed copy.
    let qqt = q.matmul(&q.transpose());
    let dev = frobenius_norm(&qqt.sub(&DenseMatrix::identity(y.rows())));
    if dev <= 1e-8 {
        return Ok(q);
    }
    let scale = y.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rng = crate::synth::portable_rng(0x6f72_7468);
    let pert = DenseMatrix::from_fn(y.rows(), y.cols(), |_, _| {
        scale * 1e-10 * crate::synth::standard_normal(&mut rng)
    });
    svd_polar(&y.add(&pert))
}

fn svd_polar(y: &DenseMatrix) -> Result<DenseMatrix> {
    let svd = y.to_nalgebra().svd(true, true);
    let u = svd.u.ok_or(Error::Degenerate("SVD did not produce U"))?;
    let v_t = svd.v_t.ok_or(Error::Degenerate("SVD did not produce Vᵀ"))?;
    let q = u * v_t;
    Ok(DenseMatrix::from_nalgebra(&q))
}

/// Deterministic QR orthonormalization (rows ≥ cols) by modified
/// Gram-Schmidt with re-orthogonalization. Rank-deficient directions are
/// filled from the orthogonal complement by scanning canonical basis
/// vectors in index order; each output column is signed so its
/// largest-magnitude entry is positive.
pub fn qr_orthonormalize(y: &DenseMatrix) -> Result<DenseMatrix> {
    let (p, k) = y.shape();
    if p < k {
        return Err(Error::Dimension(format!(
            "QR orthonormalization needs rows >= cols, got {p}x{k}"
        )));
    }
    let scale = frobenius_norm(y).max(1.0);
    let mut q = DenseMatrix::zeros(p, k);

    for j in 0..k {
        let mut v: Vec<f64> = (0..p).map(|i| y.get(i, j)).collect();
        for _pass in 0..2 {
            for prev in 0..j {
                let mut proj = 0.0;
                for i in 0..p {
                    proj += q.get(i, prev) * v[i];
                }
                for i in 0..p {
                    v[i] -= proj * q.get(i, prev);
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 * scale {
            for i in 0..p {
                q.set(i, j, v[i] / norm);
            }
        } else {
            fill_from_complement(&mut q, j, p);
        }
        fix_column_sign(&mut q, j, p);
    }
    Ok(q)
}

fn fill_from_complement(q: &mut DenseMatrix, j: usize, p: usize) {
    for e in 0..p {
        let mut v = vec![0.0; p];
        v[e] = 1.0;
        for _pass in 0..2 {
            for prev in 0..j {
                let mut proj = 0.0;
                for i in 0..p {
                    proj += q.get(i, prev) * v[i];
                }
                for i in 0..p {
                    v[i] -= proj * q.get(i, prev);
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.5 {
            for i in 0..p {
                q.set(i, j, v[i] / norm);
            }
            return;
        }
    }
    unreachable!("complement of fewer than p orthonormal columns is nonempty");
}

fn fix_column_sign(q: &mut DenseMatrix, j: usize, p: usize) {
    let mut best = 0usize;
    let mut best_abs = -1.0;
    for i in 0..p {
        let a = q.get(i, j).abs();
        if a > best_abs {
            best_abs = a;
            best = i;
        }
    }
    if q.get(best, j) < 0.0 {
        for i in 0..p {
            let v = q.get(i, j);
            q.set(i, j, -v);
        }
    }
}

/// Central-difference gradient of a scalar field, (f(Y+hE_ij) − f(Y−hE_ij)) / 2h.
/// This is the oracle analytic gradients are checked against.
pub fn finite_diff_grad(
    f: impl Fn(&DenseMatrix) -> f64,
    y: &DenseMatrix,
    h: f64,
) -> DenseMatrix {
    assert!(h > 0.0, "step size must be positive");
    let mut g = DenseMatrix::zeros(y.rows(), y.cols());
    let mut probe = y.clone();
    for i in 0..y.rows() {
        for j in 0..y.cols() {
            let orig = probe.get(i, j);
            probe.set(i, j, orig + h);
            let fp = f(&probe);
            probe.set(i, j, orig - h);
            let fm = f(&probe);
            probe.set(i, j, orig);
            g.set(i, j, (fp - fm) / (2.0 * h));
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{portable_rng, standard_normal};
    use approx::assert_relative_eq;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = portable_rng(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| standard_normal(&mut rng))
    }

    fn random_symmetric(n: usize, seed: u64) -> DenseMatrix {
        let a = random_matrix(n, n, seed);
        a.add(&a.transpose()).scaled(0.5)
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(DenseMatrix::new(0, 3, vec![]).is_err());
        assert!(DenseMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(DenseMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DenseMatrix::new(1, 2, vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn frobenius_norm_cases() {
        assert_relative_eq!(
            frobenius_norm(&DenseMatrix::identity(3)),
            3.0f64.sqrt(),
            max_relative = 1e-15
        );
        assert_eq!(frobenius_norm(&DenseMatrix::zeros(2, 5)), 0.0);
        let m = DenseMatrix::new(1, 2, vec![3.0, 4.0]).unwrap();
        assert_relative_eq!(frobenius_norm(&m), 5.0, max_relative = 1e-15);
    }

    #[test]
    fn sym_eig_identity_and_diagonal() {
        let e = sym_eig(&DenseMatrix::identity(4)).unwrap();
        for lam in &e.eigenvalues {
            assert_relative_eq!(*lam, 1.0, max_relative = 1e-12);
        }

        let d = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let e = sym_eig(&d).unwrap();
        assert_relative_eq!(e.eigenvalues[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(e.eigenvalues[1], 2.0, max_relative = 1e-12);
    }

    #[test]
    fn sym_eig_reconstructs_random_symmetric() {
        let s = random_symmetric(6, 42);
        let e = sym_eig(&s).unwrap();
        let v = &e.eigenvectors;

        // reconstruction oracle: V·diag(λ)·Vᵀ
        let mut lam = DenseMatrix::zeros(6, 6);
        for (i, l) in e.eigenvalues.iter().enumerate() {
            lam.set(i, i, *l);
        }
        let rec = v.matmul(&lam).matmul(&v.transpose());
        let rel = frobenius_norm(&rec.sub(&s)) / frobenius_norm(&s);
        assert!(rel < 1e-8, "reconstruction error {rel}");

        let vtv = v.gram();
        let dev = frobenius_norm(&vtv.sub(&DenseMatrix::identity(6)));
        assert!(dev < 1e-8, "VᵀV deviation {dev}");
    }

    #[test]
    fn sym_eig_rejects_non_square() {
        let m = DenseMatrix::zeros(2, 3);
        assert!(matches!(sym_eig(&m), Err(Error::Dimension(_))));
    }

    #[test]
    fn inv_sqrt_identity_and_diagonal() {
        let r = inv_sqrt_psd(&DenseMatrix::identity(3), None).unwrap();
        let dev = frobenius_norm(&r.sub(&DenseMatrix::identity(3)));
        assert!(dev < 1e-12);

        let d = DenseMatrix::from_rows(&[vec![4.0, 0.0], vec![0.0, 9.0]]).unwrap();
        let r = inv_sqrt_psd(&d, None).unwrap();
        assert_relative_eq!(r.get(0, 0), 0.5, max_relative = 1e-12);
        assert_relative_eq!(r.get(1, 1), 1.0 / 3.0, max_relative = 1e-12);
        assert!(r.get(0, 1).abs() < 1e-12);
    }

    #[test]
    fn inv_sqrt_handles_rank_deficiency() {
        // Gram of a 5x2 matrix with duplicate columns is rank 1.
        let col: Vec<f64> = vec![1.0, 2.0, -1.0, 0.5, 3.0];
        let y = DenseMatrix::from_fn(5, 2, |i, _| col[i]);
        let g = y.gram();
        let r = inv_sqrt_psd(&g, None).unwrap();
        assert!(r.is_finite());

        // (result)² must equal V·diag(1/max(λ,ε))·Vᵀ on the clipped spectrum.
        let eig = sym_eig(&g).unwrap();
        let eps = 1e-8 * eig.eigenvalues.last().unwrap().max(1.0);
        let v = &eig.eigenvectors;
        let mut expected = DenseMatrix::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = 0.0;
                for (k, lam) in eig.eigenvalues.iter().enumerate() {
                    acc += v.get(i, k) * (1.0 / lam.max(eps)) * v.get(j, k);
                }
                expected.set(i, j, acc);
            }
        }
        let sq = r.matmul(&r);
        let rel = frobenius_norm(&sq.sub(&expected)) / frobenius_norm(&expected);
        assert!(rel < 1e-6, "clipped inverse mismatch {rel}");
    }

    #[test]
    fn inv_sqrt_output_symmetric_psd() {
        for seed in 0..5u64 {
            let y = random_matrix(6, 3, 100 + seed);
            let r = inv_sqrt_psd(&y.gram(), None).unwrap();
            let asym = frobenius_norm(&r.sub(&r.transpose()));
            assert!(asym < 1e-10);
            let eig = sym_eig(&r).unwrap();
            assert!(eig.eigenvalues[0] >= -1e-10);
        }
    }

    #[test]
    fn polar_fixed_point_on_orthonormal() {
        let q = qr_orthonormalize(&random_matrix(7, 3, 9)).unwrap();
        let p = polar_orthonormal(&q).unwrap();
        assert!(frobenius_norm(&p.sub(&q)) < 1e-10);
    }

    #[test]
    fn polar_removes_scaling() {
        let y = DenseMatrix::identity(3).scaled(2.0);
        let p = polar_orthonormal(&y).unwrap();
        assert!(frobenius_norm(&p.sub(&DenseMatrix::identity(3))) < 1e-10);
    }

    #[test]
    fn polar_matches_svd_oracle_tall() {
        // Implementation path is eig-based; oracle is an independent SVD.
        let y = random_matrix(8, 3, 17);
        let p = polar_orthonormal(&y).unwrap();
        let svd = y.to_nalgebra().svd(true, true);
        let q = svd.u.unwrap() * svd.v_t.unwrap();
        let oracle = DenseMatrix::from_nalgebra(&q);
        assert!(frobenius_norm(&p.sub(&oracle)) < 1e-8);
    }

    #[test]
    fn polar_scale_invariant() {
        let y = random_matrix(6, 4, 3);
        let a = polar_orthonormal(&y).unwrap();
        for c in [0.1, 10.0, 1234.5] {
            let b = polar_orthonormal(&y.scaled(c)).unwrap();
            assert!(frobenius_norm(&a.sub(&b)) < 1e-10, "c = {c}");
        }
    }

    #[test]
    fn polar_wide_has_orthonormal_rows() {
        let y = random_matrix(3, 8, 5);
        let q = polar_orthonormal(&y).unwrap();
        let qqt = q.matmul(&q.transpose());
        assert!(frobenius_norm(&qqt.sub(&DenseMatrix::identity(3))) < 1e-8);
    }

    #[test]
    fn polar_wide_rank_deficient_is_deterministic() {
        // duplicate rows: rank 1 wide matrix
        let y = DenseMatrix::from_rows(&[vec![1.0, 1.0, 1.0], vec![1.0, 1.0, 1.0]]).unwrap();
        let a = polar_orthonormal(&y).unwrap();
        let b = polar_orthonormal(&y).unwrap();
        assert_eq!(a.data(), b.data());
        let qqt = a.matmul(&a.transpose());
        assert!(frobenius_norm(&qqt.sub(&DenseMatrix::identity(2))) < 1e-8);
    }

    #[test]
    fn polar_rejects_zero() {
        assert!(matches!(
            polar_orthonormal(&DenseMatrix::zeros(3, 2)),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn qr_keeps_orthonormal_input() {
        let q0 = qr_orthonormalize(&random_matrix(6, 3, 11)).unwrap();
        let q1 = qr_orthonormalize(&q0).unwrap();
        // already sign-fixed, so this is idempotent
        assert!(frobenius_norm(&q1.sub(&q0)) < 1e-12);
    }

    #[test]
    fn qr_hand_computed_case() {
        let y =
            DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let q = qr_orthonormalize(&y).unwrap();
        assert_relative_eq!(q.get(0, 0), 1.0, max_relative = 1e-14);
        assert!(q.get(1, 0).abs() < 1e-14 && q.get(2, 0).abs() < 1e-14);
        // second column: orthogonal to e1, unit norm
        assert!(q.get(0, 1).abs() < 1e-14);
        assert_relative_eq!(q.get(1, 1), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn qr_preserves_span() {
        let y = random_matrix(10, 4, 23);
        let q = qr_orthonormalize(&y).unwrap();
        let proj = q.matmul(&q.transpose().matmul(&y));
        assert!(frobenius_norm(&proj.sub(&y)) < 1e-8);
        let qtq = q.gram();
        assert!(frobenius_norm(&qtq.sub(&DenseMatrix::identity(4))) < 1e-8);
    }

    #[test]
    fn qr_is_bit_deterministic() {
        let y = random_matrix(12, 5, 31);
        let a = qr_orthonormalize(&y).unwrap();
        let b = qr_orthonormalize(&y).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn qr_completes_rank_deficient_input() {
        // two identical columns
        let y = DenseMatrix::from_fn(5, 2, |i, _| (i + 1) as f64);
        let q = qr_orthonormalize(&y).unwrap();
        let qtq = q.gram();
        assert!(frobenius_norm(&qtq.sub(&DenseMatrix::identity(2))) < 1e-10);
    }

    #[test]
    fn qr_rejects_wide() {
        assert!(qr_orthonormalize(&DenseMatrix::zeros(2, 4)).is_err());
    }

    #[test]
    fn finite_diff_matches_known_gradients() {
        let y = random_matrix(4, 3, 77);
        // f = ½‖Y‖²_F has gradient Y
        let g = finite_diff_grad(
            |m| 0.5 * frobenius_norm(m).powi(2),
            &y,
            1e-5,
        );
        let rel = frobenius_norm(&g.sub(&y)) / frobenius_norm(&y);
        assert!(rel < 1e-8, "rel {rel}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(16))]

            #[test]
            fn polar_idempotent_and_scale_free(seed in 0u64..1000) {
                let y = random_matrix(6, 3, seed);
                let q = polar_orthonormal(&y).unwrap();
                let q2 = polar_orthonormal(&q).unwrap();
                prop_assert!(frobenius_norm(&q2.sub(&q)) < 1e-10);
                let qc = polar_orthonormal(&y.scaled(3.5)).unwrap();
                prop_assert!(frobenius_norm(&qc.sub(&q)) < 1e-10);
            }
        }
    }
}
