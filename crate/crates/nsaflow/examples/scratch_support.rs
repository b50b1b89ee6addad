// temporary diagnostics; removed before release
use nsaflow::matrix::DenseMatrix;
use nsaflow::spca::{run_spca, ProximalType, SpcaConfig, SPARSITY_EPS};
use nsaflow::synth::{portable_rng, standard_normal};
use rand::Rng;

fn two_factor(n: usize, p: usize, noise: f64, seed: u64) -> (DenseMatrix, Vec<Vec<bool>>) {
    let mut rng = portable_rng(seed);
    let half = p / 2;
    let mut basis = DenseMatrix::zeros(p, 2);
    let mut mask = vec![vec![false; 2]; p];
    for i in 0..half {
        basis.set(i, 0, 1.0 + 0.6 * rng.random::<f64>());
        mask[i][0] = true;
    }
    for i in half..p {
        basis.set(i, 1, 0.5 + 0.3 * rng.random::<f64>());
        mask[i][1] = true;
    }
    // exactly uncorrelated scores: no systematic cross-factor leak
    let raw = DenseMatrix::from_fn(n, 2, |_, _| standard_normal(&mut rng));
    let scores = nsaflow::matrix::qr_orthonormalize(&raw)
        .unwrap()
        .scaled((n as f64).sqrt());
    let x = scores.matmul(&basis.transpose());
    let x = DenseMatrix::from_fn(n, p, |i, j| x.get(i, j) + noise * standard_normal(&mut rng));
    (x, mask)
}

fn scores(loadings: &DenseMatrix, mask: &[Vec<bool>]) -> (f64, f64) {
    let p = loadings.rows();
    let eval = |perm: [usize; 2]| {
        let (mut tp, mut fp, mut fnn) = (0.0f64, 0.0f64, 0.0f64);
        for i in 0..p {
            for (col, &factor) in perm.iter().enumerate() {
                let on = loadings.get(i, col).abs() >= SPARSITY_EPS;
                match (on, mask[i][factor]) {
                    (true, true) => tp += 1.0,
                    (true, false) => fp += 1.0,
                    (false, true) => fnn += 1.0,
                    _ => {}
                }
            }
        }
        (tp / (tp + fp).max(1e-300), tp / (tp + fnn).max(1e-300))
    };
    let a = eval([0, 1]);
    let b = eval([1, 0]);
    if a.0 + a.1 >= b.0 + b.1 { a } else { b }
}

fn main() {
    for noise in [0.01, 0.05] {
        for w in [0.5, 0.7, 0.9] {
            for lambda in [0.1, 0.3] {
                let mut line = format!("noise {noise:.2} w {w:.1} lam {lambda:.1} |");
                for prox in [ProximalType::Basic, ProximalType::NsaFlow] {
                    let mut worst = (1.0f64, 1.0f64);
                    for seed in 0..5u64 {
                        let (x, mask) = two_factor(80, 12, noise, 12 + seed);
                        let cfg = SpcaConfig {
                            k: 2,
                            lambda,
                            proximal_type: prox,
                            w,
                            nonneg: true,
                            max_iter: 150,
                            ..SpcaConfig::default()
                        };
                        let res = run_spca(&x, &cfg).unwrap();
                        let (pr, rc) = scores(&res.loadings, &mask);
                        worst = (worst.0.min(pr), worst.1.min(rc));
                    }
                    line += &format!(
                        " {prox:?} worst P {:.2} R {:.2} |",
                        worst.0, worst.1
                    );
                }
                println!("{line}");
            }
        }
    }
}
