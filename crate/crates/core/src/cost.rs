//! Per-pair cost evaluation: execution time, communication time, energy and
//! their weighted sum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::CandidateEntry;
use crate::graph::{NodeRecord, TaskSpec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights", into = "RawWeights")]
pub struct CostWeights {
    w_ex: f64,
    w_co: f64,
    w_en: f64,
    normalize: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWeights {
    #[serde(default = "one")]
    w_ex: f64,
    #[serde(default = "one")]
    w_co: f64,
    #[serde(default = "one")]
    w_en: f64,
    #[serde(default)]
    normalize: bool,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<RawWeights> for CostWeights {
    type Error = Error;

    fn try_from(raw: RawWeights) -> Result<Self> {
        CostWeights::new(raw.w_ex, raw.w_co, raw.w_en).map(|w| w.with_normalization(raw.normalize))
    }
}

impl From<CostWeights> for RawWeights {
    fn from(w: CostWeights) -> Self {
        RawWeights {
            w_ex: w.w_ex,
            w_co: w.w_co,
            w_en: w.w_en,
            normalize: w.normalize,
        }
    }
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            w_ex: 1.0,
            w_co: 1.0,
            w_en: 1.0,
            normalize: false,
        }
    }
}

impl CostWeights {
    pub fn new(w_ex: f64, w_co: f64, w_en: f64) -> Result<Self> {
        let ws = [w_ex, w_co, w_en];
        if ws.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidWeights(format!(
                "weights must be finite and nonnegative, got ({w_ex}, {w_co}, {w_en})"
            )));
        }
        if ws.iter().all(|w| *w == 0.0) {
            return Err(Error::InvalidWeights("at least one weight must be positive".into()));
        }
        Ok(Self {
            w_ex,
            w_co,
            w_en,
            normalize: false,
        })
    }

    /// Enables per-task min-max normalization of each component over the
    /// candidate set before weighting.
    pub fn with_normalization(mut self, on: bool) -> Self {
        self.normalize = on;
        self
    }

    pub fn w_ex(&self) -> f64 {
        self.w_ex
    }

    pub fn w_co(&self) -> f64 {
        self.w_co
    }

    pub fn w_en(&self) -> f64 {
        self.w_en
    }

    pub fn normalize(&self) -> bool {
        self.normalize
    }

    /// Multiplies every weight by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let mut w = Self::new(self.w_ex * factor, self.w_co * factor, self.w_en * factor)?;
        w.normalize = self.normalize;
        Ok(w)
    }

    pub fn combine(&self, exec: f64, comm: f64, energy: f64) -> f64 {
        self.w_ex * exec + self.w_co * comm + self.w_en * energy
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// Seconds.
    pub exec: f64,
    /// Seconds.
    pub comm: f64,
    /// Joules.
    pub energy: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn weighted(exec: f64, comm: f64, energy: f64, weights: &CostWeights) -> Self {
        Self {
            exec,
            comm,
            energy,
            total: weights.combine(exec, comm, energy),
        }
    }
}

fn compute_freq(node: &NodeRecord) -> Result<f64> {
    node.frequency().ok_or_else(|| Error::DeviceNode(node.id.clone()))
}

/// `cycles / freq`, in seconds.
pub fn exec_time(task: &TaskSpec, node: &NodeRecord) -> Result<f64> {
    Ok(task.cycles / compute_freq(node)?)
}

/// Transfer plus propagation time over the input and output paths. An
/// unbounded bandwidth contributes no transfer time.
pub fn comm_time(task: &TaskSpec, entry: &CandidateEntry) -> f64 {
    task.input_size as f64 / entry.bw_in
        + entry.lat_in
        + task.output_size as f64 / entry.bw_out
        + entry.lat_out
}

/// `k · cycles · freq²`, in joules.
pub fn energy_cost(task: &TaskSpec, node: &NodeRecord) -> Result<f64> {
    let f = compute_freq(node)?;
    Ok(node.energy_coeff * task.cycles * (f * f))
}

pub fn pair_cost(
    task: &TaskSpec,
    node: &NodeRecord,
    entry: &CandidateEntry,
    weights: &CostWeights,
) -> Result<CostBreakdown> {
    let exec = exec_time(task, node)?;
    let comm = comm_time(task, entry);
    let energy = energy_cost(task, node)?;
    Ok(CostBreakdown::weighted(exec, comm, energy, weights))
}

/// Rescales each component to [0, 1] across one task's candidate set. A
/// component that is constant over the set maps to 0.
pub fn normalize_components(rows: &mut [CostBreakdown], weights: &CostWeights) {
    fn bounds(xs: impl Iterator<Item = f64>) -> (f64, f64) {
        xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
    }
    fn scale(x: f64, (lo, hi): (f64, f64)) -> f64 {
        if hi > lo {
            (x - lo) / (hi - lo)
        } else {
            0.0
        }
    }
    let be = bounds(rows.iter().map(|r| r.exec));
    let bc = bounds(rows.iter().map(|r| r.comm));
    let bn = bounds(rows.iter().map(|r| r.energy));
    for r in rows.iter_mut() {
        *r = CostBreakdown::weighted(scale(r.exec, be), scale(r.comm, bc), scale(r.energy, bn), weights);
    }
}

/// Mean of per-assignment weighted totals, summed in task-id order.
/// Returns `None` for a plan with no assignments.
pub fn mean_of_totals<'a>(totals: impl IntoIterator<Item = &'a CostBreakdown>, weights: &CostWeights) -> Option<f64> {
    let (sum, n) = totals
        .into_iter()
        .fold((0.0, 0usize), |(s, n), b| (s + weights.combine(b.exec, b.comm, b.energy), n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Average weighted cost over the assigned tasks of `plan`; `None` when
/// nothing is assigned.
pub fn plan_cost(plan: &crate::aco::PlacementPlan, weights: &CostWeights) -> Option<f64> {
    mean_of_totals(plan.assignments.values().map(|p| &p.cost), weights)
}
