// temporary diagnostics; removed before release
use nsaflow::constraints::NonnegMode;
use nsaflow::matrix::{frobenius_norm, DenseMatrix};
use nsaflow::objective::orth_defect_invariant;
use nsaflow::optimize::{run_nsa_flow, FlowConfig, LrStrategy};
use nsaflow::synth::{portable_rng, standard_normal};

fn main() {
    // positively correlated nonneg columns, like a collapsing SPCA iterate
    let mut rng = portable_rng(5);
    let base: Vec<f64> = (0..10).map(|_| 0.3 + standard_normal(&mut rng).abs()).collect();
    let z = DenseMatrix::from_fn(10, 2, |i, j| {
        (base[i] + 0.15 * j as f64 * standard_normal(&mut rng).abs()).max(0.0)
    });
    let zn = {
        // unit columns
        let mut m = z.clone();
        for j in 0..2 {
            let n: f64 = (0..10).map(|i| z.get(i, j).powi(2)).sum::<f64>().sqrt();
            for i in 0..10 {
                m.set(i, j, z.get(i, j) / n);
            }
        }
        m
    };
    println!("start defect {:.4}", orth_defect_invariant(&zn).unwrap());

    for (label, cfg) in [
        (
            "w=0.5 probe",
            FlowConfig {
                w: 0.5,
                nonneg: NonnegMode::Clamp,
                max_iter: 100,
                ..FlowConfig::default()
            },
        ),
        (
            "w=0.5 lr=0.5 fixed",
            FlowConfig {
                w: 0.5,
                nonneg: NonnegMode::Clamp,
                max_iter: 100,
                lr: Some(0.5),
                lr_strategy: LrStrategy::Fixed,
                ..FlowConfig::default()
            },
        ),
        (
            "w=0.8 probe",
            FlowConfig {
                w: 0.8,
                nonneg: NonnegMode::Clamp,
                max_iter: 100,
                ..FlowConfig::default()
            },
        ),
    ] {
        let res = run_nsa_flow(&zn, Some(&zn), &cfg).unwrap();
        let out = &res.y_best;
        let rel = frobenius_norm(&out.sub(&zn)) / frobenius_norm(&zn);
        println!(
            "{label}: best defect {:.3e}, fid-rel {:.3e}, stop {:?}, lr {:?}",
            res.orth_defect,
            rel,
            res.stop_reason,
            res.traces.last().map(|t| t.lr)
        );
        for t in res.traces.iter().step_by(10) {
            println!(
                "   iter {:3} fid {:.3e} defect {:.3e} energy {:.4e} lr {:.2e}",
                t.iter, t.fidelity, t.orth_defect, t.energy, t.lr
            );
        }
    }
}
