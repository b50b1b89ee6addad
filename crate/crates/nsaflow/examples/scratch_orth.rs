// temporary diagnostics; removed before release
use nsaflow::matrix::{qr_orthonormalize, DenseMatrix};
use nsaflow::spca::{run_spca, ProximalType, SpcaConfig};
use nsaflow::synth::{portable_rng, standard_normal};
use rand::Rng;

fn overlapping(n: usize, p: usize, seed: u64) -> DenseMatrix {
    let mut rng = portable_rng(seed);
    let half = p / 2;
    let overlap = p / 4;
    let mut basis = DenseMatrix::zeros(p, 2);
    for i in 0..(half + overlap) {
        basis.set(i, 0, 1.0 + 0.6 * rng.random::<f64>());
    }
    for i in (half - overlap)..p {
        basis.set(i, 1, 0.5 + 0.3 * rng.random::<f64>());
    }
    let raw = DenseMatrix::from_fn(n, 2, |_, _| standard_normal(&mut rng));
    let scores = qr_orthonormalize(&raw).unwrap().scaled((n as f64).sqrt());
    let x = scores.matmul(&basis.transpose());
    DenseMatrix::from_fn(n, p, |i, j| x.get(i, j) + 0.05 * standard_normal(&mut rng))
}

fn main() {
    for nonneg in [true, false] {
        let mut wins = 0;
        for seed in 0..10u64 {
            let x = overlapping(60, 12, 100 + seed);
            let base = SpcaConfig { k: 2, lambda: 0.08, nonneg, max_iter: 100, ..SpcaConfig::default() };
            let basic = run_spca(&x, &SpcaConfig { proximal_type: ProximalType::Basic, ..base.clone() }).unwrap();
            let flow = run_spca(&x, &SpcaConfig { proximal_type: ProximalType::NsaFlow, ..base }).unwrap();
            let win = flow.orth_residual <= basic.orth_residual + 1e-12;
            if win { wins += 1; }
            println!("nonneg {nonneg} seed {seed}: basic {:.3e} flow {:.3e} {}",
                basic.orth_residual, flow.orth_residual, if win { "WIN" } else { "lose" });
        }
        println!("nonneg {nonneg}: wins {wins}/10");
    }
}
