// temporary diagnostics; removed before release
use nsaflow::constraints::NonnegMode;
use nsaflow::geometry::RetractionMode;
use nsaflow::matrix::frobenius_norm;
use nsaflow::optimize::{run_nsa_flow, run_nsa_flow_with_grad_hook, FlowConfig};
use nsaflow::synth::random_normal_matrix;

fn main() {
    let x0 = random_normal_matrix(8, 3, 7);
    let y0 = random_normal_matrix(8, 3, 8);
    let cfg = FlowConfig {
        w: 0.0,
        retraction: RetractionMode::none(),
        nonneg: NonnegMode::Off,
        tangent_projection: false,
        ..FlowConfig::default()
    };
    let res = run_nsa_flow(&y0, Some(&x0), &cfg).unwrap();
    println!(
        "LS: fidelity {:.3e} bound {:.3e} stop {:?} iters {} lr {:?}",
        res.fidelity,
        1e-6 * frobenius_norm(&x0).powi(2),
        res.stop_reason,
        res.traces.len(),
        res.traces.last().map(|t| t.lr),
    );
    for t in res.traces.iter().take(15) {
        println!(
            "  iter {:3} energy {:.6e} fid {:.6e} grad {:.3e} lr {:.3e}",
            t.iter, t.energy, t.fidelity, t.grad_norm, t.lr
        );
    }

    // strike test replay
    let y0 = random_normal_matrix(10, 3, 33);
    let cfg = FlowConfig {
        max_iter: 40,
        ..FlowConfig::default()
    };
    let mut injected = false;
    let res = run_nsa_flow_with_grad_hook(&y0, None, &cfg, |iter, g| {
        if iter == 5 && !injected {
            injected = true;
            g.set(0, 0, f64::NAN);
        }
    })
    .unwrap();
    println!(
        "strike replay: stop {:?} traces {} converged {}",
        res.stop_reason,
        res.traces.len(),
        res.converged
    );
    for t in &res.traces {
        println!(
            "  iter {:3} energy {:.6e} grad {:.3e} lr {:.3e}",
            t.iter, t.energy, t.grad_norm, t.lr
        );
    }
}
