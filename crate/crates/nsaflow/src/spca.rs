//! Sparse PCA driven by the flow.
//!
//! Variance maximization over the loadings with a backtracking line
//! search on the smooth term, then one of two proximal updates per
//! iteration: plain soft-thresholding (with QR re-orthogonalization at
//! the start of each iteration) or an inner flow run that pulls the
//! candidate toward a non-negative, near-orthogonal matrix.

use serde::{Deserialize, Serialize};

use crate::constraints::{project_nonneg, soft_threshold, NonnegMode};
use crate::error::{Error, Result};
use crate::matrix::{frobenius_norm, qr_orthonormalize, sym_eig, DenseMatrix};
use crate::objective::orth_term_or;
use crate::objective::PenaltyMode;
use crate::optimize::{run_nsa_flow, FlowConfig};

/// Entries with |y| below this count as zero in the sparsity fraction.
pub const SPARSITY_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProximalType {
    /// Soft-threshold at τ = αλ, optional clamp; QR re-orthogonalization
    /// happens at the beginning of the next iteration.
    #[default]
    Basic,
    /// Inner flow run with the gradient candidate as its target.
    NsaFlow,
}

impl std::str::FromStr for ProximalType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "basic" => Ok(ProximalType::Basic),
            "nsa_flow" | "nsaflow" => Ok(ProximalType::NsaFlow),
            other => Err(Error::Config(format!("unknown proximal type '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpcaConfig {
    pub k: usize,
    pub lambda: f64,
    pub proximal_type: ProximalType,
    /// Inner flow weight for the `NsaFlow` proximal step.
    pub w: f64,
    /// Clamp the basic proximal output at zero. The flow proximal is
    /// non-negative by construction regardless of this flag.
    pub nonneg: bool,
    pub max_iter: usize,
    pub tol: f64,
    /// Non-improving iterations tolerated before the step size shrinks.
    pub patience: usize,
    pub lr_shrink: f64,
    /// Iteration budget of each inner flow run.
    pub inner_budget: usize,
    /// Initial line-search step size.
    pub alpha0: f64,
}

impl Default for SpcaConfig {
    fn default() -> Self {
        Self {
            k: 2,
            lambda: 0.0,
            proximal_type: ProximalType::Basic,
            w: 0.5,
            nonneg: false,
            max_iter: 200,
            tol: 1e-6,
            patience: 10,
            lr_shrink: 0.5,
            inner_budget: 100,
            alpha0: 1.0,
        }
    }
}

impl SpcaConfig {
    fn validate(&self, n: usize, p: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be >= 1".into()));
        }
        if self.k > n.min(p) {
            return Err(Error::Dimension(format!(
                "k = {} exceeds min(n, p) = {}",
                self.k,
                n.min(p)
            )));
        }
        if self.lambda < 0.0 {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.w) {
            return Err(Error::Config(format!("w must lie in [0,1], got {}", self.w)));
        }
        if self.max_iter == 0 || self.inner_budget == 0 {
            return Err(Error::Config("iteration budgets must be >= 1".into()));
        }
        if self.tol <= 0.0 || self.alpha0 <= 0.0 {
            return Err(Error::Config("tol and alpha0 must be positive".into()));
        }
        if !(0.0 < self.lr_shrink && self.lr_shrink < 1.0) {
            return Err(Error::Config(format!(
                "lr_shrink must lie in (0,1), got {}",
                self.lr_shrink
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SpcaResult {
    /// p×k sparse loadings with the lowest energy seen.
    pub loadings: DenseMatrix,
    pub explained_variance_ratio: f64,
    /// Fraction of entries with |y| < 1e-8.
    pub sparsity: f64,
    /// Scale-invariant orthogonality defect of the loadings.
    pub orth_residual: f64,
    pub energy: f64,
    pub energy_trace: Vec<f64>,
}

/// Subtracts each column mean; needs at least two rows.
pub fn center_columns(x: &DenseMatrix) -> Result<DenseMatrix> {
    let (n, p) = x.shape();
    if n < 2 {
        return Err(Error::Dimension(format!(
            "centering needs at least 2 rows, got {n}"
        )));
    }
    let mut out = x.clone();
    for j in 0..p {
        let mean = (0..n).map(|i| x.get(i, j)).sum::<f64>() / n as f64;
        for i in 0..n {
            out.set(i, j, x.get(i, j) - mean);
        }
    }
    Ok(out)
}

/// Gradient of the smooth term f(Y) = −(1/2n)·tr(YᵀSY): simply −(1/n)·S·Y.
pub fn spca_smooth_grad(y: &DenseMatrix, s: &DenseMatrix, n: usize) -> Result<DenseMatrix> {
    if s.rows() != s.cols() || s.cols() != y.rows() {
        return Err(Error::Dimension(format!(
            "covariance is {}x{}, loadings are {}x{}",
            s.rows(),
            s.cols(),
            y.rows(),
            y.cols()
        )));
    }
    Ok(s.matmul(y).scaled(-1.0 / n as f64))
}

/// Backtracking line search: the largest α ∈ {α₀·shrinkʲ} with
/// f(Y + α·d) ≤ f(Y) + c₁·α·⟨∇f, d⟩. When d is not a descent direction
/// (⟨∇f, d⟩ ≥ 0) the search cannot certify decrease and the floor value
/// α₀·shrink^max_backtracks is returned.
pub fn armijo_search(
    f: impl Fn(&DenseMatrix) -> f64,
    y: &DenseMatrix,
    grad: &DenseMatrix,
    direction: &DenseMatrix,
    alpha0: f64,
    shrink: f64,
    c1: f64,
    max_backtracks: usize,
) -> f64 {
    let slope = grad.dot(direction);
    let floor = alpha0 * shrink.powi(max_backtracks as i32);
    if slope >= 0.0 {
        return floor;
    }
    let f0 = f(y);
    let mut alpha = alpha0;
    for _ in 0..max_backtracks {
        let mut probe = y.clone();
        probe.axpy(alpha, direction);
        let fa = f(&probe);
        if fa.is_finite() && fa <= f0 + c1 * alpha * slope {
            return alpha;
        }
        alpha *= shrink;
    }
    floor
}

/// Soft-threshold then optional clamp. The caller re-orthogonalizes via
/// QR at the start of the next iteration.
pub fn spca_prox_basic(z: &DenseMatrix, tau: f64, nonneg: bool) -> DenseMatrix {
    let t = soft_threshold(z, tau);
    if nonneg {
        project_nonneg(&t, &NonnegMode::Clamp)
    } else {
        t
    }
}

/// Proximal step through an inner flow run targeting Z with the standard
/// flow defaults (warmup re-weighting included): the result is
/// non-negative and at least as decorrelated as the clamped candidate in
/// the statistical sense exercised by the tests. How hard it decorrelates
/// is governed by w; near 1 the output defect drops by orders of
/// magnitude relative to the input.
pub fn spca_prox_nsaflow(z: &DenseMatrix, w: f64, budget: usize) -> Result<DenseMatrix> {
    let cfg = FlowConfig {
        w,
        nonneg: NonnegMode::Clamp,
        max_iter: budget,
        ..FlowConfig::default()
    };
    let res = run_nsa_flow(z, Some(z), &cfg)?;
    Ok(res.y_best)
}

fn l1_norm(y: &DenseMatrix) -> f64 {
    y.data().iter().map(|v| v.abs()).sum()
}

/// Unit-normalizes each non-zero column. The regularized variance
/// objective is unbounded in the iterate's scale, so energies are only
/// comparable (and the best-iterate bookkeeping meaningful) at a
/// canonical scale; zeros and support patterns are unaffected.
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

/// Total SPCA energy used for termination, the patience scheduler, and
/// best-iterate retention: −(1/2n)·tr(YᵀSY) + λ‖Y‖₁.
fn spca_energy(y: &DenseMatrix, s: &DenseMatrix, n: usize, lambda: f64) -> f64 {
    let sy = s.matmul(y);
    let quad = -0.5 / n as f64 * y.dot(&sy);
    quad + lambda * l1_norm(y)
}

pub fn run_spca(x: &DenseMatrix, cfg: &SpcaConfig) -> Result<SpcaResult> {
    let (n, p) = x.shape();
    cfg.validate(n, p)?;

    let xc = center_columns(x)?;
    let s = xc.gram();
    let mut y = init_loadings(&s, cfg.k)?;

    let smooth = |m: &DenseMatrix| -0.5 / n as f64 * m.dot(&s.matmul(m));
    let mut alpha0 = cfg.alpha0;
    let mut energy_trace = vec![spca_energy(&y, &s, n, cfg.lambda)];
    let mut best_energy = energy_trace[0];
    let mut y_best = y.clone();
    let mut since_improvement = 0usize;

    for _ in 0..cfg.max_iter {
        if cfg.proximal_type == ProximalType::Basic {
            y = qr_orthonormalize(&y)?;
        }
        let g = spca_smooth_grad(&y, &s, n)?;
        let d = g.scaled(-1.0);
        let alpha = armijo_search(smooth, &y, &g, &d, alpha0, 0.5, 1e-4, 30);
        let mut z = y.clone();
        z.axpy(alpha, &d);

        let y_next = match cfg.proximal_type {
            ProximalType::Basic => spca_prox_basic(&z, alpha * cfg.lambda, cfg.nonneg),
            // The gradient step inflates column norms by ~(1 + αλ_i/n);
            // handing the flow a unit-column candidate keeps its fidelity
            // term about directions instead of that inflation, which would
            // otherwise pin the inner run at its own starting point.
            ProximalType::NsaFlow => {
                spca_prox_nsaflow(&normalize_columns(&z), cfg.w, cfg.inner_budget)?
            }
        };
        let y_next = normalize_columns(&y_next);

        let e_prev = *energy_trace.last().expect("seeded");
        let e = spca_energy(&y_next, &s, n, cfg.lambda);
        energy_trace.push(e);

        if e < best_energy {
            best_energy = e;
            y_best = y_next.clone();
            since_improvement = 0;
        } else {
            since_improvement += 1;
            if since_improvement >= cfg.patience {
                alpha0 *= cfg.lr_shrink;
                since_improvement = 0;
            }
        }

        let rel_de = (e - e_prev).abs() / e_prev.abs().max(1.0);
        let dy = frobenius_norm(&y_next.sub(&y)) / frobenius_norm(&y).max(1.0);
        let gn = frobenius_norm(&g);
        y = y_next;
        if rel_de < cfg.tol && gn < cfg.tol && dy < cfg.tol {
            break;
        }
    }

    Ok(finish(y_best, best_energy, energy_trace, &s))
}

fn init_loadings(s: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    let eig = sym_eig(s)?;
    let p = s.rows();
    let v = &eig.eigenvectors;
    // top-k eigenvectors of S are the top-k right singular vectors of Xc
    let mut y = DenseMatrix::zeros(p, k);
    for j in 0..k {
        let src = p - 1 - j;
        for i in 0..p {
            y.set(i, j, v.get(i, src));
        }
    }
    // deterministic column signs, matching the QR convention
    qr_orthonormalize(&y)
}

fn finish(
    loadings: DenseMatrix,
    energy: f64,
    energy_trace: Vec<f64>,
    s: &DenseMatrix,
) -> SpcaResult {
    let (p, k) = loadings.shape();
    let zeros = loadings
        .data()
        .iter()
        .filter(|v| v.abs() < SPARSITY_EPS)
        .count();
    let sparsity = zeros as f64 / (p * k) as f64;
    let orth_residual = orth_term_or(&loadings, PenaltyMode::ScaleInvariant, 0.0);
    SpcaResult {
        explained_variance_ratio: explained_variance_ratio(&loadings, s),
        sparsity,
        orth_residual,
        energy,
        energy_trace,
        loadings,
    }
}

/// tr(QᵀSQ)/tr(S) over a QR-orthonormalized copy of the non-zero loading
/// columns, so overlapping sparse loadings do not double-count variance.
pub fn explained_variance_ratio(loadings: &DenseMatrix, s: &DenseMatrix) -> f64 {
    let (p, k) = loadings.shape();
    let tr_s: f64 = (0..p).map(|i| s.get(i, i)).sum();
    if tr_s <= 0.0 {
        return 0.0;
    }
    let live: Vec<usize> = (0..k)
        .filter(|&j| (0..p).any(|i| loadings.get(i, j).abs() >= SPARSITY_EPS))
        .collect();
    if live.is_empty() {
        return 0.0;
    }
    let mut sub = DenseMatrix::zeros(p, live.len());
    for (jj, &j) in live.iter().enumerate() {
        for i in 0..p {
            sub.set(i, jj, loadings.get(i, j));
        }
    }
    let q = match qr_orthonormalize(&sub) {
        Ok(q) => q,
        Err(_) => return 0.0,
    };
    let qsq = q.transpose().matmul(&s.matmul(&q));
    let tr_q: f64 = (0..live.len()).map(|i| qsq.get(i, i)).sum();
    (tr_q / tr_s).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::finite_diff_grad;
    use crate::objective::orth_defect_invariant;
    use crate::synth::{portable_rng, random_normal_matrix, standard_normal};
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn centering_cases() {
        let x = random_normal_matrix(10, 4, 1);
        let xc = center_columns(&x).unwrap();
        for j in 0..4 {
            let mean: f64 = (0..10).map(|i| xc.get(i, j)).sum::<f64>() / 10.0;
            assert!(mean.abs() < 1e-12);
        }
        // already centered: unchanged
        let xcc = center_columns(&xc).unwrap();
        assert!(frobenius_norm(&xcc.sub(&xc)) < 1e-12);

        // constant column becomes zero
        let x = DenseMatrix::from_fn(5, 2, |i, j| if j == 0 { 3.0 } else { i as f64 });
        let xc = center_columns(&x).unwrap();
        for i in 0..5 {
            assert!(xc.get(i, 0).abs() < 1e-12);
        }

        assert!(center_columns(&DenseMatrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn smooth_grad_cases() {
        let s = DenseMatrix::identity(4).scaled(8.0);
        let y = DenseMatrix::zeros(4, 2);
        let g = spca_smooth_grad(&y, &s, 8).unwrap();
        assert_eq!(g.data(), DenseMatrix::zeros(4, 2).data());

        // S = n·I ⇒ gradient −Y
        let y = random_normal_matrix(4, 2, 2);
        let g = spca_smooth_grad(&y, &s, 8).unwrap();
        assert!(frobenius_norm(&g.add(&y)) < 1e-12);

        // finite differences of f(Y) = −(1/2n)tr(YᵀSY)
        let a = random_normal_matrix(5, 5, 3);
        let s = a.gram();
        let y = random_normal_matrix(5, 3, 4);
        let n = 7usize;
        let fd = finite_diff_grad(
            |m| -0.5 / n as f64 * m.dot(&s.matmul(m)),
            &y,
            1e-5,
        );
        let g = spca_smooth_grad(&y, &s, n).unwrap();
        let rel = frobenius_norm(&fd.sub(&g)) / frobenius_norm(&g);
        assert!(rel < 1e-5, "rel {rel}");
    }

    #[test]
    fn armijo_on_convex_quadratic() {
        // f(x) = ½‖x‖², L = 1, so any α below ~2 is accepted immediately
        let f = |m: &DenseMatrix| 0.5 * frobenius_norm(m).powi(2);
        let y = DenseMatrix::new(1, 1, vec![1.0]).unwrap();
        let g = y.clone();
        let d = g.scaled(-1.0);

        let a = armijo_search(f, &y, &g, &d, 0.5, 0.5, 1e-4, 30);
        assert_eq!(a, 0.5);

        // huge α backtracks below the stability bound 2/L
        let a = armijo_search(f, &y, &g, &d, 1e6, 0.5, 1e-4, 30);
        assert!(a < 2.0, "accepted {a} >= 2/L");
        assert!(a > 0.9, "over-shrunk: {a}");

        // zero gradient: floor value after max backtracks
        let z = DenseMatrix::zeros(1, 1);
        let a = armijo_search(f, &y, &z, &z, 1.0, 0.5, 1e-4, 30);
        assert_relative_eq!(a, 0.5f64.powi(30));
    }

    #[test]
    fn prox_basic_cases() {
        let z = random_normal_matrix(3, 3, 5);
        assert_eq!(spca_prox_basic(&z, 0.0, false).data(), z.data());

        let z = DenseMatrix::new(1, 2, vec![2.0, -2.0]).unwrap();
        let out = spca_prox_basic(&z, 1.0, true);
        assert_eq!(out.data(), &[1.0, 0.0]);

        // composition oracle
        let z = random_normal_matrix(4, 3, 6);
        let out = spca_prox_basic(&z, 0.3, true);
        let oracle = project_nonneg(&soft_threshold(&z, 0.3), &NonnegMode::Clamp);
        assert_eq!(out.data(), oracle.data());
    }

    #[test]
    fn prox_nsaflow_near_fixed_point() {
        // non-negative orthogonal columns: both inner losses start ~0
        let mut z = DenseMatrix::zeros(6, 2);
        for i in 0..3 {
            z.set(i, 0, 0.6);
            z.set(3 + i, 1, 0.4);
        }
        let out = spca_prox_nsaflow(&z, 0.5, 100).unwrap();
        let rel = frobenius_norm(&out.sub(&z)) / frobenius_norm(&z);
        assert!(rel < 1e-6, "moved {rel} from an inner minimum");
    }

    #[test]
    fn prox_nsaflow_w_zero_is_clamp() {
        let z = random_normal_matrix(5, 3, 7);
        let out = spca_prox_nsaflow(&z, 0.0, 200).unwrap();
        let clamped = project_nonneg(&z, &NonnegMode::Clamp);
        let rel = frobenius_norm(&out.sub(&clamped)) / frobenius_norm(&clamped);
        assert!(rel < 1e-6, "w=0 prox drifted {rel}");
    }

    #[test]
    fn prox_nsaflow_output_nonneg_and_trace_monotone() {
        let z = random_normal_matrix(8, 3, 8);
        let out = spca_prox_nsaflow(&z, 0.5, 100).unwrap();
        assert!(out.data().iter().all(|v| *v >= 0.0));

        // same run, inspected through the flow's own trace
        let cfg = FlowConfig {
            w: 0.5,
            nonneg: NonnegMode::Clamp,
            max_iter: 100,
            ..FlowConfig::default()
        };
        let res = run_nsa_flow(&z, Some(&z), &cfg).unwrap();
        let mut last = f64::INFINITY;
        for t in &res.traces {
            assert!(t.best_energy_so_far <= last + 1e-15);
            last = t.best_energy_so_far;
        }
    }

    /// n×p data with a planted spectrum: singular values decay fast so the
    /// top-k subspace is well separated.
    fn spectral_gap_data(n: usize, p: usize, seed: u64) -> DenseMatrix {
        let mut rng = portable_rng(seed);
        let u = qr_orthonormalize(&DenseMatrix::from_fn(n, p, |_, _| {
            standard_normal(&mut rng)
        }))
        .unwrap();
        let v = qr_orthonormalize(&DenseMatrix::from_fn(p, p, |_, _| {
            standard_normal(&mut rng)
        }))
        .unwrap();
        let mut sv = DenseMatrix::zeros(p, p);
        for i in 0..p {
            sv.set(i, i, 8.0 * 0.45f64.powi(i as i32));
        }
        u.matmul(&sv).matmul(&v.transpose())
    }

    /// Largest principal angle (as sin θ) between the column spans.
    fn subspace_distance(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
        let qa = qr_orthonormalize(a).unwrap();
        let qb = qr_orthonormalize(b).unwrap();
        let m = qa.transpose().matmul(&qb);
        let svd = m.to_nalgebra().svd(false, false);
        let min_sv = svd
            .singular_values
            .iter()
            .fold(f64::INFINITY, |acc, v| acc.min(*v));
        (1.0 - min_sv.min(1.0).powi(2)).sqrt()
    }

    #[test]
    fn unregularized_limit_recovers_pca() {
        let x = spectral_gap_data(50, 10, 9);
        let cfg = SpcaConfig {
            k: 3,
            lambda: 0.0,
            proximal_type: ProximalType::Basic,
            nonneg: false,
            ..SpcaConfig::default()
        };
        let res = run_spca(&x, &cfg).unwrap();

        // exact top-k eigenvectors of the covariance
        let s = center_columns(&x).unwrap().gram();
        let exact = init_loadings(&s, 3).unwrap();
        let dist = subspace_distance(&res.loadings, &exact);
        assert!(dist < 1e-2, "subspace distance {dist}");

        // explained variance matches the exact top-k ratio
        let eig = sym_eig(&s).unwrap();
        let total: f64 = eig.eigenvalues.iter().sum();
        let top: f64 = eig.eigenvalues.iter().rev().take(3).sum();
        assert!((res.explained_variance_ratio - top / total).abs() < 1e-3);
    }

    #[test]
    fn energy_bookkeeping_is_exact() {
        let x = spectral_gap_data(30, 8, 10);
        let cfg = SpcaConfig {
            k: 2,
            lambda: 0.05,
            ..SpcaConfig::default()
        };
        let res = run_spca(&x, &cfg).unwrap();
        let s = center_columns(&x).unwrap().gram();
        let re_eval = spca_energy(&res.loadings, &s, 30, cfg.lambda);
        assert!((re_eval - res.energy).abs() < 1e-10);
        let min_trace = res
            .energy_trace
            .iter()
            .fold(f64::INFINITY, |a, b| a.min(*b));
        assert!((res.energy - min_trace).abs() < 1e-12);
    }

    #[test]
    fn sparsity_grows_with_lambda() {
        let x = spectral_gap_data(40, 10, 11);
        let lambdas = [0.0, 0.05, 0.15, 0.4, 1.0];
        let mut sparsities = Vec::new();
        for &lambda in &lambdas {
            let cfg = SpcaConfig {
                k: 3,
                lambda,
                max_iter: 120,
                ..SpcaConfig::default()
            };
            sparsities.push(run_spca(&x, &cfg).unwrap().sparsity);
        }
        // rank correlation against the lambda grid
        let rho = rank_correlation(
            &lambdas.iter().copied().collect::<Vec<_>>(),
            &sparsities,
        );
        assert!(rho >= 0.8, "sparsity trend broken: {sparsities:?} (rho {rho})");
    }

    fn rank_correlation(a: &[f64], b: &[f64]) -> f64 {
        let rank = |v: &[f64]| -> Vec<f64> {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
            let mut r = vec![0.0; v.len()];
            for (pos, &i) in idx.iter().enumerate() {
                r[i] = pos as f64;
            }
            r
        };
        let ra = rank(a);
        let rb = rank(b);
        let n = a.len() as f64;
        let mean = (n - 1.0) / 2.0;
        let mut num = 0.0;
        let mut da = 0.0;
        let mut db = 0.0;
        for i in 0..a.len() {
            let xa = ra[i] - mean;
            let xb = rb[i] - mean;
            num += xa * xb;
            da += xa * xa;
            db += xb * xb;
        }
        num / (da.sqrt() * db.sqrt()).max(1e-300)
    }

    /// Two disjoint non-negative factors plus noise; returns (data, support
    /// mask p×2). Factor strengths are separated so the top-2 eigenvectors
    /// do not mix under rotation ambiguity, and the score columns are
    /// orthogonalized so no systematic cross-factor leak enters the sample
    /// covariance.
    pub(crate) fn two_factor_data(
        n: usize,
        p: usize,
        noise: f64,
        seed: u64,
    ) -> (DenseMatrix, Vec<Vec<bool>>) {
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
        let raw = DenseMatrix::from_fn(n, 2, |_, _| standard_normal(&mut rng));
        let scores = qr_orthonormalize(&raw).unwrap().scaled((n as f64).sqrt());
        let mut x = scores.matmul(&basis.transpose());
        x = DenseMatrix::from_fn(n, p, |i, j| x.get(i, j) + noise * standard_normal(&mut rng));
        (x, mask)
    }

    /// Non-negative low-rank data whose two factors share a band of
    /// features, so thresholding alone cannot produce orthogonal supports.
    pub(crate) fn overlapping_factor_data(n: usize, p: usize, seed: u64) -> DenseMatrix {
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

    #[test]
    fn support_recovery_both_prox_types() {
        // documented setting for the recovery property: noise 0.01 and
        // lambda 0.1 on the two-disjoint-factor generator
        let (x, mask) = two_factor_data(100, 16, 0.01, 12);
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
            let (precision, recall) = support_scores(&res.loadings, &mask);
            assert!(
                precision >= 0.9 && recall >= 0.9,
                "{prox:?}: precision {precision}, recall {recall}"
            );
        }
    }

    /// Support match against the planted mask, maximized over the two
    /// column-to-factor assignments.
    pub(crate) fn support_scores(loadings: &DenseMatrix, mask: &[Vec<bool>]) -> (f64, f64) {
        let p = loadings.rows();
        let score = |perm: [usize; 2]| -> (f64, f64) {
            let mut tp = 0.0f64;
            let mut fp = 0.0f64;
            let mut fn_ = 0.0f64;
            for i in 0..p {
                for (col, &factor) in perm.iter().enumerate() {
                    let on = loadings.get(i, col).abs() >= SPARSITY_EPS;
                    let truth = mask[i][factor];
                    match (on, truth) {
                        (true, true) => tp += 1.0,
                        (true, false) => fp += 1.0,
                        (false, true) => fn_ += 1.0,
                        _ => {}
                    }
                }
            }
            (
                tp / (tp + fp).max(1e-300),
                tp / (tp + fn_).max(1e-300),
            )
        };
        let a = score([0, 1]);
        let b = score([1, 0]);
        if a.0 + a.1 >= b.0 + b.1 {
            a
        } else {
            b
        }
    }

    #[test]
    fn flow_prox_at_least_as_orthogonal_as_basic() {
        let mut wins = 0;
        for seed in 0..5u64 {
            let x = overlapping_factor_data(60, 12, 100 + seed);
            let base = SpcaConfig {
                k: 2,
                lambda: 0.08,
                w: 0.9,
                nonneg: true,
                max_iter: 100,
                ..SpcaConfig::default()
            };
            let basic = run_spca(
                &x,
                &SpcaConfig {
                    proximal_type: ProximalType::Basic,
                    ..base.clone()
                },
            )
            .unwrap();
            let flow = run_spca(
                &x,
                &SpcaConfig {
                    proximal_type: ProximalType::NsaFlow,
                    ..base
                },
            )
            .unwrap();
            if flow.orth_residual <= basic.orth_residual + 1e-12 {
                wins += 1;
            }
        }
        assert!(wins >= 4, "flow prox less orthogonal in {}/5 seeds", 5 - wins);
    }

    #[test]
    fn k_too_large_is_dimension_error() {
        let x = random_normal_matrix(6, 4, 13);
        let cfg = SpcaConfig {
            k: 5,
            ..SpcaConfig::default()
        };
        assert!(matches!(run_spca(&x, &cfg), Err(Error::Dimension(_))));
    }

    #[test]
    fn nonneg_flag_forces_nonneg_loadings() {
        let (x, _) = two_factor_data(40, 8, 0.1, 14);
        let cfg = SpcaConfig {
            k: 2,
            lambda: 0.05,
            nonneg: true,
            ..SpcaConfig::default()
        };
        let res = run_spca(&x, &cfg).unwrap();
        assert!(res.loadings.data().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn orth_residual_matches_defect() {
        let (x, _) = two_factor_data(40, 8, 0.1, 15);
        let cfg = SpcaConfig {
            k: 2,
            lambda: 0.02,
            ..SpcaConfig::default()
        };
        let res = run_spca(&x, &cfg).unwrap();
        let expected = orth_defect_invariant(&res.loadings).unwrap_or(0.0);
        assert_relative_eq!(res.orth_residual, expected);
    }
}
