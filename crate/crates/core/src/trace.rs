//! Per-iteration records shared by all drivers.

use crate::linalg::Vector;
use crate::oracle::OracleCounters;

/// One outer step `x_k → x_{k+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct IterateRecord {
    pub k: usize,
    /// `F(x_k)`.
    pub f_val: f64,
    /// `‖G_t(x_k)‖` as seen by the method (exact, surrogate or bound).
    pub prox_grad_norm: f64,
    /// `‖G_t(x_k)‖` from an exact solve, when requested.
    pub prox_grad_true: Option<f64>,
    /// `‖x_{k+1} − x_k‖`.
    pub step_norm: f64,
    pub eps_k: f64,
    pub delta_k: f64,
    pub inner_iters: usize,
    /// Cumulative counts after the step.
    pub counters: OracleCounters,
    pub wall_ns: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Tolerance,
    MaxIters,
    Budget,
}

#[derive(Clone, Debug)]
pub struct Trace {
    pub records: Vec<IterateRecord>,
    /// `x_0, …, x_N`.
    pub points: Vec<Vector>,
    /// `F(x_N)`.
    pub final_value: f64,
    pub step: f64,
    pub stop: StopReason,
    /// Oracle counts at the end of the run.
    pub counters: OracleCounters,
}

impl Trace {
    pub fn final_point(&self) -> &Vector {
        self.points.last().expect("trace holds at least the initial point")
    }

    /// The iterate whose reported norm met the tolerance, else the last one.
    pub fn certified_point(&self) -> &Vector {
        match self.stop {
            StopReason::Tolerance => &self.points[self.records.len() - 1],
            _ => self.final_point(),
        }
    }

    pub fn n_steps(&self) -> usize {
        self.records.len()
    }

    pub fn min_prox_grad_norm(&self) -> f64 {
        self.records.iter().map(|r| r.prox_grad_norm).fold(f64::INFINITY, f64::min)
    }

    /// Smallest exact `‖G_t(x_k)‖`; falls back to the reported norm.
    pub fn min_true_prox_grad_norm(&self) -> f64 {
        self.records.iter().map(|r| r.prox_grad_true.unwrap_or(r.prox_grad_norm)).fold(f64::INFINITY, f64::min)
    }
}
