//! CSV serialization. Floats use the shortest round-trip exponent form, so
//! equal inputs give byte-identical files.

use std::io::Write;
use std::path::Path;

use proxlin::trace::Trace;

use crate::error::CliError;

pub const TRACE_COLUMNS: [&str; 14] = [
    "k",
    "F",
    "proxgrad_norm_surrogate",
    "proxgrad_norm_true",
    "step_norm",
    "eps_k",
    "delta_k",
    "inner_iters",
    "n_c_eval",
    "n_jvp",
    "n_vjp",
    "n_prox_h",
    "n_prox_g",
    "wall_ns",
];

pub fn float(v: f64) -> String {
    format!("{v:e}")
}

fn optional(v: Option<f64>) -> String {
    v.map(float).unwrap_or_default()
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Vec<u8> {
    w.into_inner().expect("in-memory CSV writer cannot fail")
}

fn record(w: &mut csv::Writer<Vec<u8>>, fields: &[String]) {
    w.write_record(fields).expect("in-memory CSV writer cannot fail");
}

pub fn trace_csv(trace: &Trace) -> Vec<u8> {
    let mut w = writer();
    w.write_record(TRACE_COLUMNS).expect("in-memory CSV writer cannot fail");
    for r in &trace.records {
        let c = &r.counters;
        record(
            &mut w,
            &[
                r.k.to_string(),
                float(r.f_val),
                float(r.prox_grad_norm),
                optional(r.prox_grad_true),
                float(r.step_norm),
                float(r.eps_k),
                float(r.delta_k),
                r.inner_iters.to_string(),
                c.n_c_eval.to_string(),
                c.n_jvp.to_string(),
                c.n_vjp.to_string(),
                c.n_prox_h.to_string(),
                c.n_prox_g.to_string(),
                r.wall_ns.to_string(),
            ],
        );
    }
    finish(w)
}

/// All records of all runs, ordered by cumulative oracle count, then by the
/// order of the runs in the configuration.
pub fn compare_csv(runs: &[(String, Trace)]) -> Vec<u8> {
    let mut rows: Vec<(u64, usize, usize)> = Vec::new();
    for (i, (_, trace)) in runs.iter().enumerate() {
        for (j, r) in trace.records.iter().enumerate() {
            rows.push((r.counters.total(), i, j));
        }
    }
    rows.sort_unstable();
    let mut w = writer();
    w.write_record([
        "ops",
        "solver",
        "k",
        "F",
        "proxgrad_norm_surrogate",
        "proxgrad_norm_true",
        "step_norm",
        "inner_iters",
    ])
    .expect("in-memory CSV writer cannot fail");
    for (ops, i, j) in rows {
        let (label, trace) = &runs[i];
        let r = &trace.records[j];
        record(
            &mut w,
            &[
                ops.to_string(),
                label.clone(),
                r.k.to_string(),
                float(r.f_val),
                float(r.prox_grad_norm),
                optional(r.prox_grad_true),
                float(r.step_norm),
                r.inner_iters.to_string(),
            ],
        );
    }
    finish(w)
}

/// One row per verification suite.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteRow {
    pub suite: &'static str,
    pub checks: usize,
    pub failures: usize,
    pub worst: f64,
}

pub fn verify_csv(rows: &[SuiteRow]) -> Vec<u8> {
    let mut w = writer();
    w.write_record(["suite", "checks", "failures", "worst"]).expect("in-memory CSV writer cannot fail");
    for r in rows {
        record(&mut w, &[r.suite.to_string(), r.checks.to_string(), r.failures.to_string(), float(r.worst)]);
    }
    finish(w)
}

/// Writes to `path`, or to standard output without one.
pub fn emit(bytes: &[u8], path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => {
            std::fs::write(p, bytes).map_err(|source| CliError::Output { path: p.display().to_string(), source })
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.flush())
                .map_err(|source| CliError::Output { path: "<stdout>".into(), source })
        }
    }
}
