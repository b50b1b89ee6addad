//! Weight-sweep runner: one flow run per (w, seed) pair over a grid,
//! collecting the per-run endpoint metrics that the trade-off plots are
//! drawn from. Grid points are independent and run in parallel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::optimize::{run_nsa_flow, FlowConfig};
use crate::spca::SPARSITY_EPS;
use crate::synth::{gen_synthetic, SyntheticKind};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GenSpec {
    pub kind: SyntheticKind,
    pub rows: usize,
    pub cols: usize,
    pub noise: f64,
}

impl Default for GenSpec {
    fn default() -> Self {
        Self {
            kind: SyntheticKind::CorrelatedNoise,
            rows: 60,
            cols: 8,
            noise: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSpec {
    /// Ascending weights to sweep; must be non-empty.
    pub w_grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub base: FlowConfig,
    /// Synthetic target per seed; ignored when explicit data is supplied.
    pub gen: GenSpec,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            w_grid: vec![0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99],
            seeds: vec![0],
            base: FlowConfig::default(),
            gen: GenSpec::default(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.w_grid.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        if !self.w_grid.windows(2).all(|p| p[0] <= p[1]) {
            return Err(Error::Config("sweep grid must be sorted ascending".into()));
        }
        if self.w_grid.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::Config("sweep weights must lie in [0,1]".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("sweep needs at least one seed".into()));
        }
        self.base.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub w: f64,
    pub seed: u64,
    pub fidelity: f64,
    pub orth_defect: f64,
    pub sparsity: f64,
    pub iters: usize,
    pub wall_time: f64,
}

fn near_zero_fraction(m: &DenseMatrix) -> f64 {
    let zeros = m.data().iter().filter(|v| v.abs() < SPARSITY_EPS).count();
    zeros as f64 / m.data().len() as f64
}

/// Runs the sweep. When `data` is given it is the shared target for every
/// grid point; otherwise a synthetic target is generated per seed.
pub fn run_sweep(spec: &SweepSpec, data: Option<&DenseMatrix>) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let points: Vec<(f64, u64)> = spec
        .w_grid
        .iter()
        .flat_map(|&w| spec.seeds.iter().map(move |&s| (w, s)))
        .collect();

    points
        .par_iter()
        .map(|&(w, seed)| -> Result<SweepRow> {
            let target = match data {
                Some(d) => d.clone(),
                None => gen_synthetic(
                    spec.gen.kind,
                    spec.gen.rows,
                    spec.gen.cols,
                    spec.gen.noise,
                    seed,
                )?,
            };
            let cfg = FlowConfig {
                w,
                seed,
                ..spec.base.clone()
            };
            let res = run_nsa_flow(&target, None, &cfg)?;
            let iters = res.traces.last().map_or(0, |t| t.iter + 1);
            let wall_time = res.traces.last().map_or(0.0, |t| t.wall_time);
            Ok(SweepRow {
                w,
                seed,
                fidelity: res.fidelity,
                orth_defect: res.orth_defect,
                sparsity: near_zero_fraction(&res.y_best),
                iters,
                wall_time,
            })
        })
        .collect()
}

/// Spearman rank correlation; the sweep's monotonic-trend checks are
/// phrased in terms of it.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
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
