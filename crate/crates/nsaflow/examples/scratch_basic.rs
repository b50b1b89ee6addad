// temporary diagnostics; removed before release
use nsaflow::matrix::{frobenius_norm, qr_orthonormalize, DenseMatrix};
use nsaflow::spca::{armijo_search, center_columns, spca_prox_basic, spca_smooth_grad};
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
    let lambda = 0.3;
    let x = two_factor(n, 12, 0.05, 12);
    let xc = center_columns(&x).unwrap();
    let s = xc.gram();

    let eig = nsaflow::matrix::sym_eig(&s).unwrap();
    let p = s.rows();
    let mut y = DenseMatrix::zeros(p, 2);
    for j in 0..2 {
        for i in 0..p {
            y.set(i, j, eig.eigenvectors.get(i, p - 1 - j));
        }
    }
    y = qr_orthonormalize(&y).unwrap();
    println!("eigvec leak col0 rows6-11: {:?}",
        (6..12).map(|i| format!("{:+.4}", y.get(i, 0))).collect::<Vec<_>>());

    let smooth = |m: &DenseMatrix| -0.5 / n as f64 * m.dot(&s.matmul(m));
    for t in 0..6 {
        let yq = qr_orthonormalize(&y).unwrap();
        let g = spca_smooth_grad(&yq, &s, n).unwrap();
        let d = g.scaled(-1.0);
        let alpha = armijo_search(smooth, &yq, &g, &d, 1.0, 0.5, 1e-4, 30);
        let mut z = yq.clone();
        z.axpy(alpha, &d);
        let yn = normalize_columns(&spca_prox_basic(&z, alpha * lambda, true));
        let f = smooth(&yn);
        let l1: f64 = yn.data().iter().map(|v| v.abs()).sum();
        let nz = yn.data().iter().filter(|v| v.abs() >= 1e-8).count();
        println!(
            "t {t}: alpha {alpha:.2} tau {:.2} f {f:.4} F {:.4} nz {nz} ‖z‖ {:.2} z-leak {:?}",
            alpha * lambda,
            f + lambda * l1,
            frobenius_norm(&z),
            (6..9).map(|i| format!("{:+.3}", z.get(i, 0))).collect::<Vec<_>>()
        );
        y = yn;
    }
}
