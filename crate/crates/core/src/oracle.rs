//! Counted access to `c`, its Jacobian actions and the two proximal maps.

use std::cell::Cell;
use std::ops::{Add, Sub};

use crate::error::Result;
use crate::linalg::{ensure_dim, ensure_finite, ensure_value, Vector};
use crate::problem::CompositeProblem;

/// Oracle call counts; snapshots are monotone over a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct OracleCounters {
    pub n_c_eval: u64,
    pub n_jvp: u64,
    pub n_vjp: u64,
    pub n_prox_h: u64,
    pub n_prox_g: u64,
}

impl OracleCounters {
    pub fn total(&self) -> u64 {
        self.n_c_eval + self.n_jvp + self.n_vjp + self.n_prox_h + self.n_prox_g
    }

    /// True if every count is at least the corresponding count in `other`.
    pub fn dominates(&self, other: &Self) -> bool {
        self.n_c_eval >= other.n_c_eval
            && self.n_jvp >= other.n_jvp
            && self.n_vjp >= other.n_vjp
            && self.n_prox_h >= other.n_prox_h
            && self.n_prox_g >= other.n_prox_g
    }
}

impl Add for OracleCounters {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            n_c_eval: self.n_c_eval + o.n_c_eval,
            n_jvp: self.n_jvp + o.n_jvp,
            n_vjp: self.n_vjp + o.n_vjp,
            n_prox_h: self.n_prox_h + o.n_prox_h,
            n_prox_g: self.n_prox_g + o.n_prox_g,
        }
    }
}

impl Sub for OracleCounters {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self {
            n_c_eval: self.n_c_eval - o.n_c_eval,
            n_jvp: self.n_jvp - o.n_jvp,
            n_vjp: self.n_vjp - o.n_vjp,
            n_prox_h: self.n_prox_h - o.n_prox_h,
            n_prox_g: self.n_prox_g - o.n_prox_g,
        }
    }
}

/// A problem together with its running call counts. Not shared across threads;
/// parallel sweeps give each worker its own oracle.
#[derive(Debug)]
pub struct Oracle<'p> {
    problem: &'p CompositeProblem,
    counts: Cell<OracleCounters>,
}

impl<'p> Oracle<'p> {
    pub fn new(problem: &'p CompositeProblem) -> Self {
        Self { problem, counts: Cell::new(OracleCounters::default()) }
    }

    pub fn problem(&self) -> &'p CompositeProblem {
        self.problem
    }

    pub fn counters(&self) -> OracleCounters {
        self.counts.get()
    }

    fn bump(&self, f: impl FnOnce(&mut OracleCounters)) {
        let mut c = self.counts.get();
        f(&mut c);
        self.counts.set(c);
    }

    pub fn c(&self, x: &Vector) -> Result<Vector> {
        ensure_dim(x, self.problem.dim())?;
        self.bump(|c| c.n_c_eval += 1);
        let out = self.problem.c().eval(x);
        ensure_finite(&out, "c(x)")?;
        Ok(out)
    }

    pub fn jvp(&self, x: &Vector, v: &Vector) -> Result<Vector> {
        self.bump(|c| c.n_jvp += 1);
        let out = self.problem.c().jvp(x, v);
        ensure_finite(&out, "Jacobian-vector product")?;
        Ok(out)
    }

    pub fn vjp(&self, x: &Vector, w: &Vector) -> Result<Vector> {
        self.bump(|c| c.n_vjp += 1);
        let out = self.problem.c().vjp(x, w);
        ensure_finite(&out, "vector-Jacobian product")?;
        Ok(out)
    }

    pub fn prox_h(&self, t: f64, z: &Vector) -> Result<Vector> {
        self.bump(|c| c.n_prox_h += 1);
        let out = self.problem.h().prox(t, z);
        ensure_finite(&out, "prox of h")?;
        Ok(out)
    }

    pub fn prox_g(&self, t: f64, x: &Vector) -> Result<Vector> {
        self.bump(|c| c.n_prox_g += 1);
        let out = self.problem.g().prox(t, x);
        ensure_finite(&out, "prox of g")?;
        Ok(out)
    }

    pub fn g_value(&self, x: &Vector) -> Result<f64> {
        ensure_value(self.problem.g().value(x), "g(x)")
    }

    pub fn h_value(&self, z: &Vector) -> Result<f64> {
        ensure_value(self.problem.h().value(z), "h(z)")
    }

    /// `F(x)`, `+inf` outside `dom g` (in which case `c` is not evaluated).
    pub fn objective(&self, x: &Vector) -> Result<f64> {
        let gx = self.g_value(x)?;
        if gx == f64::INFINITY {
            return Ok(f64::INFINITY);
        }
        let cx = self.c(x)?;
        Ok(gx + self.h_value(&cx)?)
    }
}

/// `F(x)` through a throwaway oracle.
pub fn objective_value(problem: &CompositeProblem, x: &Vector) -> Result<f64> {
    Oracle::new(problem).objective(x)
}
