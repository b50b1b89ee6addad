// temporary diagnostics; removed before release
use nsaflow::matrix::DenseMatrix;
use nsaflow::spca::{run_spca, ProximalType, SpcaConfig};
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

fn dump(label: &str, m: &DenseMatrix) {
    println!("{label}:");
    for i in 0..m.rows() {
        let row: Vec<String> = (0..m.cols()).map(|j| format!("{:+.4}", m.get(i, j))).collect();
        println!("  {}", row.join(" "));
    }
}

fn main() {
    let x = two_factor(80, 12, 0.05, 12);
    for prox in [ProximalType::Basic, ProximalType::NsaFlow] {
        let cfg = SpcaConfig {
            k: 2,
            lambda: 0.1,
            proximal_type: prox,
            nonneg: true,
            max_iter: 150,
            ..SpcaConfig::default()
        };
        let res = run_spca(&x, &cfg).unwrap();
        dump(&format!("{prox:?} loadings (evr {:.3}, sparsity {:.3}, orth {:.2e}, energy {:.4e})",
            res.explained_variance_ratio, res.sparsity, res.orth_residual, res.energy), &res.loadings);
        println!("  trace head: {:?}", &res.energy_trace[..res.energy_trace.len().min(6)]);
        println!("  trace tail: {:?}", &res.energy_trace[res.energy_trace.len().saturating_sub(4)..]);
    }
}
