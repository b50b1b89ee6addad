// temporary diagnostics; removed before release
use nsaflow::constraints::NonnegMode;
use nsaflow::matrix::{qr_orthonormalize, DenseMatrix};
use nsaflow::optimize::{run_nsa_flow, FlowConfig};
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
    // prox-level: decorrelation reached from a correlated unit-column Z
    let mut rng = portable_rng(77);
    let base: Vec<f64> = (0..12).map(|_| 0.2 + rng.random::<f64>()).collect();
    let z = {
        let raw = DenseMatrix::from_fn(12, 2, |i, j| {
            base[i] * (1.0 - 0.35 * j as f64) + 0.25 * standard_normal(&mut rng).abs() * (1 - j) as f64
                + 0.2 * j as f64 * standard_normal(&mut rng).abs()
        });
        raw
    };
    println!("prox-level from defect {:.3e}:", nsaflow::objective::orth_defect_invariant(&z).unwrap());
    for warmup in [10usize, 0] {
        for w in [0.5, 0.7, 0.9, 0.95, 0.99] {
            let cfg = FlowConfig {
                w,
                nonneg: NonnegMode::Clamp,
                max_iter: 100,
                warmup_iters: warmup,
                ..FlowConfig::default()
            };
            let res = run_nsa_flow(&z, Some(&z), &cfg).unwrap();
            println!("  warmup {warmup:2} w {w:.2}: best defect {:.3e} fid {:.3e}", res.orth_defect, res.fidelity);
        }
    }

    // end-to-end on overlapping data, warmup grid
    for warmup in [10usize, 0] {
        for w in [0.9, 0.95, 0.99] {
            let mut wins = 0;
            for seed in 0..10u64 {
                let x = overlapping(60, 12, 100 + seed);
                let base = SpcaConfig { k: 2, lambda: 0.08, nonneg: true, w, max_iter: 100, ..SpcaConfig::default() };
                let basic = run_spca(&x, &SpcaConfig { proximal_type: ProximalType::Basic, ..base.clone() }).unwrap();
                let flow = run_spca(&x, &SpcaConfig { proximal_type: ProximalType::NsaFlow, ..base }).unwrap();
                if flow.orth_residual <= basic.orth_residual + 1e-12 { wins += 1; }
            }
            println!("end-to-end warmup(prox) {warmup} w {w:.2}: wins {wins}/10");
        }
    }
}
