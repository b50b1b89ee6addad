// temporary diagnostics; removed before release
use nsaflow::matrix::{frobenius_norm, DenseMatrix};
use nsaflow::objective::orth_defect_invariant;
use nsaflow::spca::{armijo_search, center_columns, spca_prox_nsaflow, spca_smooth_grad};
use nsaflow::synth::{portable_rng, standard_normal};
use rand::Rng;

fn two_factor(n: usize, p: usize, noise: f64, seed: u64) -> DenseMatrix {
    let mut rng = portable_rng(seed);
    let half = p / 2;
    let mut basis = DenseMatrix::zeros(p, 2);
    for i in 0..half {
        basis.set(i, 0, 1.0 + 0.6 * rng.random::<f64>());
    }
    for i in half..p {
        basis.set(i, 1, 0.5 + 0.3 * rng.random::<f64>());
    }
    let scores = DenseMatrix::from_fn(n, 2, |_, _| standard_normal(&mut rng));
    let x = scores.matmul(&basis.transpose());
    DenseMatrix::from_fn(n, p, |i, j| x.get(i, j) + noise * standard_normal(&mut rng))
}

fn normalize_columns(y: &DenseMatrix) -> DenseMatrix {
    let (p, k) = y.shape();
    let mut out = y.clone();
    for j in 0..k {
        let norm = (0..p).map(|i| y.get(i, j).powi(2)).sum::<f64>().sqrt();
        if norm > 1e-300 {
            for i in 0..p {
                out.set(i, j, y.get(i, j) / norm);
            }
        }
    }
    out
}

fn main() {
    let n = 80usize;
    let x = two_factor(n, 12, 0.05, 12);
    let xc = center_columns(&x).unwrap();
    let s = xc.gram();

    // init: top-2 eigvecs via the library path (same as run_spca)
    let eig = nsaflow::matrix::sym_eig(&s).unwrap();
    let p = s.rows();
    let mut y = DenseMatrix::zeros(p, 2);
    for j in 0..2 {
        for i in 0..p {
            y.set(i, j, eig.eigenvectors.get(i, p - 1 - j));
        }
    }
    y = nsaflow::matrix::qr_orthonormalize(&y).unwrap();

    let smooth = |m: &DenseMatrix| -0.5 / n as f64 * m.dot(&s.matmul(m));
    for t in 0..8 {
        let g = spca_smooth_grad(&y, &s, n).unwrap();
        let d = g.scaled(-1.0);
        let alpha = armijo_search(smooth, &y, &g, &d, 1.0, 0.5, 1e-4, 30);
        let mut z = y.clone();
        z.axpy(alpha, &d);
        let dz = orth_defect_invariant(&z).unwrap_or(-1.0);
        let prox = spca_prox_nsaflow(&normalize_columns(&z), 0.5, 100).unwrap();
        let dprox = orth_defect_invariant(&prox).unwrap_or(-1.0);
        let rel = frobenius_norm(&prox.sub(&z)) / frobenius_norm(&z);
        y = normalize_columns(&prox);
        let dy = orth_defect_invariant(&y).unwrap_or(-1.0);
        println!(
            "outer {t}: alpha {alpha:.2e} defect(Z) {dz:.3e} defect(prox) {dprox:.3e} \
             prox-dist {rel:.3e} defect(norm) {dy:.3e} f(y) {:.4}",
            smooth(&y)
        );
    }
}
