//! The flow driver.
//!
//! Per iteration: combined scaled gradient → optional tangent projection →
//! optimizer step → soft retraction with strength ω = w → non-negativity
//! projection. Non-finite values restore the last finite iterate, halve
//! the learning rate, and count a strike; three strikes stop the run. The
//! lowest-energy candidate seen is retained and returned.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::constraints::{nonneg_violation, project_nonneg, NonnegMode};
use crate::error::{Error, Result};
use crate::geometry::{retract, tangent_project, RetractionMode};
use crate::matrix::{frobenius_norm, DenseMatrix};
use crate::objective::{
    grad_orth, init_scale_factors, orth_term_or, PenaltyMode, ScaleFactors,
};

/// Records used by the energy-slope stopping rule.
pub const SLOPE_WINDOW: usize = 10;

const LR_FALLBACK: f64 = 1e-4;
const ARMIJO_C1: f64 = 1e-4;
const MAX_STRIKES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Gd,
    Momentum { coefficient: f64 },
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
    Adagrad,
    Asgd { averaging_start: usize },
    Lars { trust: f64 },
}

impl OptimizerKind {
    pub fn momentum_default() -> Self {
        OptimizerKind::Momentum { coefficient: 0.9 }
    }

    pub fn adam_default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn asgd_default() -> Self {
        OptimizerKind::Asgd {
            averaging_start: 100,
        }
    }

    pub fn lars_default() -> Self {
        OptimizerKind::Lars { trust: 0.001 }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match *self {
            OptimizerKind::Momentum { coefficient } if !(0.0..1.0).contains(&coefficient) => {
                bad(format!("momentum coefficient must lie in [0,1), got {coefficient}"))
            }
            OptimizerKind::Adam { beta1, beta2, epsilon }
                if !(0.0..1.0).contains(&beta1)
                    || !(0.0..1.0).contains(&beta2)
                    || epsilon <= 0.0 =>
            {
                bad(format!("adam parameters out of range: {beta1}, {beta2}, {epsilon}"))
            }
            OptimizerKind::Lars { trust } if trust <= 0.0 => {
                bad(format!("lars trust coefficient must be positive, got {trust}"))
            }
            _ => Ok(()),
        }
    }
}

impl Default for OptimizerKind {
    fn default() -> Self {
        Self::asgd_default()
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gd" => Ok(OptimizerKind::Gd),
            "momentum" => Ok(OptimizerKind::momentum_default()),
            "adam" => Ok(OptimizerKind::adam_default()),
            "adagrad" => Ok(OptimizerKind::Adagrad),
            "asgd" => Ok(OptimizerKind::asgd_default()),
            "lars" => Ok(OptimizerKind::lars_default()),
            other => Err(Error::Config(format!("unknown optimizer '{other}'"))),
        }
    }
}

/// Per-run optimizer state. `step` returns the additive update
/// −lr·direction for the standard rule of each kind; a non-finite gradient
/// is reported as an error so the driver can count a strike.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: OptimizerKind,
    steps: usize,
    velocity: Option<DenseMatrix>,
    first_moment: Option<DenseMatrix>,
    second_moment: Option<DenseMatrix>,
    accumulator: Option<DenseMatrix>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind) -> Self {
        Self {
            kind,
            steps: 0,
            velocity: None,
            first_moment: None,
            second_moment: None,
            accumulator: None,
        }
    }

    pub fn step(&mut self, y: &DenseMatrix, grad: &DenseMatrix, lr: f64) -> Result<DenseMatrix> {
        if !grad.is_finite() {
            return Err(Error::NonFinite("gradient"));
        }
        self.steps += 1;
        let update = match self.kind {
            OptimizerKind::Gd | OptimizerKind::Asgd { .. } => grad.scaled(-lr),
            OptimizerKind::Momentum { coefficient } => {
                let v = self
                    .velocity
                    .get_or_insert_with(|| DenseMatrix::zeros(grad.rows(), grad.cols()));
                let mut next = v.scaled(coefficient);
                next.axpy(1.0, grad);
                *v = next.clone();
                next.scaled(-lr)
            }
            OptimizerKind::Adam { beta1, beta2, epsilon } => {
                let m = self
                    .first_moment
                    .get_or_insert_with(|| DenseMatrix::zeros(grad.rows(), grad.cols()));
                let v = self
                    .second_moment
                    .get_or_insert_with(|| DenseMatrix::zeros(grad.rows(), grad.cols()));
                let t = self.steps as i32;
                let mut out = DenseMatrix::zeros(grad.rows(), grad.cols());
                for idx in 0..grad.data().len() {
                    let g = grad.data()[idx];
                    let mi = beta1 * m.data()[idx] + (1.0 - beta1) * g;
                    let vi = beta2 * v.data()[idx] + (1.0 - beta2) * g * g;
                    let (i, j) = (idx / grad.cols(), idx % grad.cols());
                    m.set(i, j, mi);
                    v.set(i, j, vi);
                    let m_hat = mi / (1.0 - beta1.powi(t));
                    let v_hat = vi / (1.0 - beta2.powi(t));
                    out.set(i, j, -lr * m_hat / (v_hat.sqrt() + epsilon));
                }
                out
            }
            OptimizerKind::Adagrad => {
                let acc = self
                    .accumulator
                    .get_or_insert_with(|| DenseMatrix::zeros(grad.rows(), grad.cols()));
                let mut out = DenseMatrix::zeros(grad.rows(), grad.cols());
                for idx in 0..grad.data().len() {
                    let g = grad.data()[idx];
                    let a = acc.data()[idx] + g * g;
                    let (i, j) = (idx / grad.cols(), idx % grad.cols());
                    acc.set(i, j, a);
                    out.set(i, j, -lr * g / (a.sqrt() + 1e-10));
                }
                out
            }
            OptimizerKind::Lars { trust } => {
                let gn = frobenius_norm(grad);
                if gn < 1e-300 {
                    DenseMatrix::zeros(grad.rows(), grad.cols())
                } else {
                    grad.scaled(-lr * trust * frobenius_norm(y) / gn)
                }
            }
        };
        Ok(update)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrStrategy {
    Fixed,
    #[default]
    Probe,
}

/// All knobs of one flow run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    /// Orthogonality weight; also the retraction strength ω.
    pub w: f64,
    pub penalty_mode: PenaltyMode,
    pub retraction: RetractionMode,
    pub nonneg: NonnegMode,
    pub optimizer: OptimizerKind,
    pub max_iter: usize,
    /// Stop when the normalized energy slope falls below this.
    pub tol_slope: f64,
    /// Stop when the (projected) gradient norm falls below this.
    pub tol_grad: f64,
    pub record_every: usize,
    /// Probe steps for the loss re-weighting; 0 keeps unit scales.
    pub warmup_iters: usize,
    /// Fixed learning rate; required when `lr_strategy` is `Fixed`.
    pub lr: Option<f64>,
    pub lr_strategy: LrStrategy,
    pub tangent_projection: bool,
    /// Recorded in outputs for provenance; the flow itself is
    /// deterministic given its inputs.
    pub seed: u64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            w: 0.5,
            penalty_mode: PenaltyMode::ScaleInvariant,
            retraction: RetractionMode::default(),
            nonneg: NonnegMode::Clamp,
            optimizer: OptimizerKind::asgd_default(),
            max_iter: 1000,
            tol_slope: 1e-6,
            tol_grad: 1e-8,
            record_every: 1,
            warmup_iters: 10,
            lr: None,
            lr_strategy: LrStrategy::Probe,
            tangent_projection: true,
            seed: 0,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.w) {
            return Err(Error::Config(format!("w must lie in [0,1], got {}", self.w)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be >= 1".into()));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be >= 1".into()));
        }
        if self.tol_slope <= 0.0 || self.tol_grad <= 0.0 {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if let Some(lr) = self.lr {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::Config(format!("lr must be positive, got {lr}")));
            }
        }
        if self.lr_strategy == LrStrategy::Fixed && self.lr.is_none() {
            return Err(Error::Config("fixed lr strategy needs an lr value".into()));
        }
        if let NonnegMode::Softplus { beta } = self.nonneg {
            if beta <= 0.0 {
                return Err(Error::Config(format!("softplus beta must be positive, got {beta}")));
            }
        }
        self.optimizer.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Slope,
    GradNorm,
    MaxIter,
    NanGuard,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StopReason::Slope => "slope",
            StopReason::GradNorm => "grad_norm",
            StopReason::MaxIter => "max_iter",
            StopReason::NanGuard => "nan_guard",
        };
        f.write_str(s)
    }
}

/// Diagnostics at one recorded iteration. `orth_defect` is the
/// scale-invariant defect δ regardless of the penalty mode in use.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub wall_time: f64,
    pub fidelity: f64,
    pub orth_defect: f64,
    pub energy: f64,
    pub grad_norm: f64,
    pub lr: f64,
    pub best_energy_so_far: f64,
}

#[derive(Debug, Clone)]
pub struct FlowResult {
    pub y_best: DenseMatrix,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub fidelity: f64,
    pub orth_defect: f64,
    pub energy: f64,
    pub nonneg_violation: (f64, f64),
    pub traces: Vec<TraceRecord>,
}

struct FlowCtx<'a> {
    x0: &'a DenseMatrix,
    cfg: &'a FlowConfig,
    scales: ScaleFactors,
}

impl FlowCtx<'_> {
    fn energy(&self, y: &DenseMatrix) -> f64 {
        let fid = 0.5 * frobenius_norm(&y.sub(self.x0)).powi(2);
        let orth = orth_term_or(y, self.cfg.penalty_mode, 0.0);
        (1.0 - self.cfg.w) * self.scales.c_fid * fid + self.cfg.w * self.scales.c_orth * orth
    }

    fn gradient(&self, y: &DenseMatrix) -> DenseMatrix {
        let mut g = y.sub(self.x0).scaled((1.0 - self.cfg.w) * self.scales.c_fid);
        g.axpy(
            self.cfg.w * self.scales.c_orth,
            &grad_orth(y, self.cfg.penalty_mode),
        );
        g
    }

    /// One optimizer step, retraction at strength w, non-negativity
    /// projection. Non-finite intermediates surface as errors.
    fn step(
        &self,
        y: &DenseMatrix,
        g: &DenseMatrix,
        lr: f64,
        opt: &mut OptimizerState,
    ) -> Result<DenseMatrix> {
        let update = opt.step(y, g, lr)?;
        let y_tilde = y.add(&update);
        if !y_tilde.is_finite() {
            return Err(Error::NonFinite("iterate"));
        }
        let retracted = retract(&y_tilde, self.cfg.w, &self.cfg.retraction)?;
        let projected = project_nonneg(&retracted, &self.cfg.nonneg);
        if !projected.is_finite() {
            return Err(Error::NonFinite("iterate"));
        }
        Ok(projected)
    }
}

/// Least-squares slope of the last `window` recorded energies against the
/// record index, normalized by max(|first recorded energy|, 1) so the
/// stopping threshold is scale-free. Returns `None` until enough records
/// exist.
pub fn energy_slope(energies: &[f64], window: usize) -> Option<f64> {
    if window < 2 || energies.len() < window {
        return None;
    }
    let tail = &energies[energies.len() - window..];
    let n = window as f64;
    let x_mean = (window as f64 - 1.0) / 2.0;
    let e_mean = tail.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, e) in tail.iter().enumerate() {
        let dx = i as f64 - x_mean;
        num += dx * (e - e_mean);
        den += dx * dx;
    }
    Some(num / den / energies[0].abs().max(1.0))
}

/// Probes a geometric grid of candidate rates (1e-4 … 1e0, 9 points) with
/// 5 pipeline steps each and returns the rate with the lowest resulting
/// energy among candidates that stayed finite and passed an Armijo
/// sufficient-decrease check on the first step. Falls back to 1e-4 when
/// nothing qualifies.
pub fn estimate_learning_rate(
    y0: &DenseMatrix,
    x0: Option<&DenseMatrix>,
    cfg: &FlowConfig,
) -> Result<f64> {
    cfg.validate()?;
    let x0 = x0.unwrap_or(y0);
    if y0.shape() != x0.shape() {
        return Err(Error::shape(y0.shape(), x0.shape()));
    }
    let scales = warmup_scales(y0, x0, cfg)?;
    let ctx = FlowCtx { x0, cfg, scales };
    Ok(estimate_lr_scaled(y0, &ctx))
}

fn warmup_scales(y0: &DenseMatrix, x0: &DenseMatrix, cfg: &FlowConfig) -> Result<ScaleFactors> {
    if cfg.warmup_iters == 0 {
        return Ok(ScaleFactors::default());
    }
    init_scale_factors(y0, x0, cfg.penalty_mode, cfg.warmup_iters)
}

fn estimate_lr_scaled(y0: &DenseMatrix, ctx: &FlowCtx<'_>) -> f64 {
    let y_start = project_nonneg(y0, &ctx.cfg.nonneg);
    let e0 = ctx.energy(&y_start);
    let g0_sq = frobenius_norm(&ctx.gradient(&y_start)).powi(2);

    let mut best: Option<(f64, f64)> = None;
    for i in 0..9 {
        let rate = 10f64.powf(-4.0 + 0.5 * i as f64);
        let mut y = y_start.clone();
        let mut opt = OptimizerState::new(ctx.cfg.optimizer);
        let mut first_energy = None;
        let mut ok = true;
        for step in 0..5 {
            let mut g = ctx.gradient(&y);
            if ctx.cfg.tangent_projection {
                g = tangent_project(&y, &g);
            }
            match ctx.step(&y, &g, rate, &mut opt) {
                Ok(next) => y = next,
                Err(_) => {
                    ok = false;
                    break;
                }
            }
            let e = ctx.energy(&y);
            if !e.is_finite() {
                ok = false;
                break;
            }
            if step == 0 {
                first_energy = Some(e);
            }
        }
        if !ok {
            continue;
        }
        let armijo = match first_energy {
            Some(e1) => e1 <= e0 - ARMIJO_C1 * rate * g0_sq,
            None => false,
        };
        if !armijo {
            continue;
        }
        let final_energy = ctx.energy(&y);
        if best.map_or(true, |(_, be)| final_energy < be) {
            best = Some((rate, final_energy));
        }
    }
    best.map_or(LR_FALLBACK, |(rate, _)| rate)
}

/// Runs the flow. When `x0` is absent, Y0 itself is the approximation
/// target.
pub fn run_nsa_flow(
    y0: &DenseMatrix,
    x0: Option<&DenseMatrix>,
    cfg: &FlowConfig,
) -> Result<FlowResult> {
    run_nsa_flow_with_grad_hook(y0, x0, cfg, |_, _| {})
}

/// Driver with a gradient instrumentation seam: `hook(iter, &mut grad)`
/// runs on the combined gradient before tangent projection. Tests use it
/// to exercise the NaN guard; `run_nsa_flow` passes a no-op.
#[doc(hidden)]
pub fn run_nsa_flow_with_grad_hook(
    y0: &DenseMatrix,
    x0: Option<&DenseMatrix>,
    cfg: &FlowConfig,
    mut hook: impl FnMut(usize, &mut DenseMatrix),
) -> Result<FlowResult> {
    cfg.validate()?;
    let x0 = x0.unwrap_or(y0);
    if y0.shape() != x0.shape() {
        return Err(Error::shape(y0.shape(), x0.shape()));
    }

    let scales = warmup_scales(y0, x0, cfg)?;
    let ctx = FlowCtx { x0, cfg, scales };
    let mut lr = match cfg.lr_strategy {
        LrStrategy::Fixed => cfg.lr.expect("validated"),
        LrStrategy::Probe => estimate_lr_scaled(y0, &ctx),
    };

    let start = Instant::now();
    let mut y = project_nonneg(y0, &cfg.nonneg);
    let mut opt = OptimizerState::new(cfg.optimizer);
    let mut average: Option<DenseMatrix> = None;
    let mut average_count = 0usize;

    let mut best_energy = ctx.energy(&y);
    let mut y_best = y.clone();
    let mut last_finite = y.clone();
    let mut strikes = 0usize;
    let mut traces: Vec<TraceRecord> = Vec::new();
    let mut recorded: Vec<f64> = Vec::new();
    let mut stop = StopReason::MaxIter;
    let mut converged = false;

    for iter in 0..cfg.max_iter {
        let mut g = ctx.gradient(&y);
        hook(iter, &mut g);
        if cfg.tangent_projection {
            g = tangent_project(&y, &g);
        }
        let grad_norm = frobenius_norm(&g);

        let y_next = match ctx.step(&y, &g, lr, &mut opt) {
            Ok(v) => v,
            Err(_) => {
                strikes += 1;
                if strikes >= MAX_STRIKES {
                    stop = StopReason::NanGuard;
                    break;
                }
                y = last_finite.clone();
                lr *= 0.5;
                // moments may have absorbed non-finite values; restart them
                opt = OptimizerState::new(cfg.optimizer);
                continue;
            }
        };

        let candidate = match cfg.optimizer {
            OptimizerKind::Asgd { averaging_start } if iter >= averaging_start => {
                average_count += 1;
                match average.as_mut() {
                    Some(a) => {
                        let delta = y_next.sub(a).scaled(1.0 / average_count as f64);
                        *a = a.add(&delta);
                    }
                    None => average = Some(y_next.clone()),
                }
                average.clone().expect("just set")
            }
            _ => y_next.clone(),
        };

        let e = ctx.energy(&candidate);
        if !e.is_finite() {
            strikes += 1;
            if strikes >= MAX_STRIKES {
                stop = StopReason::NanGuard;
                break;
            }
            y = last_finite.clone();
            lr *= 0.5;
            opt = OptimizerState::new(cfg.optimizer);
            continue;
        }

        y = y_next;
        last_finite = y.clone();
        if e < best_energy {
            best_energy = e;
            y_best = candidate.clone();
        }

        if iter % cfg.record_every == 0 {
            recorded.push(e);
            traces.push(TraceRecord {
                iter,
                wall_time: start.elapsed().as_secs_f64(),
                fidelity: 0.5 * frobenius_norm(&candidate.sub(x0)).powi(2),
                orth_defect: orth_term_or(&candidate, PenaltyMode::ScaleInvariant, 0.0),
                energy: e,
                grad_norm,
                lr,
                best_energy_so_far: best_energy,
            });
        }

        if grad_norm < cfg.tol_grad {
            stop = StopReason::GradNorm;
            converged = true;
            break;
        }
        if let Some(slope) = energy_slope(&recorded, SLOPE_WINDOW) {
            if (slope / cfg.record_every as f64).abs() < cfg.tol_slope {
                stop = StopReason::Slope;
                converged = true;
                break;
            }
        }
    }

    Ok(FlowResult {
        fidelity: 0.5 * frobenius_norm(&y_best.sub(x0)).powi(2),
        orth_defect: orth_term_or(&y_best, PenaltyMode::ScaleInvariant, 0.0),
        energy: best_energy,
        nonneg_violation: nonneg_violation(&y_best),
        converged,
        stop_reason: stop,
        traces,
        y_best,
    })
}
