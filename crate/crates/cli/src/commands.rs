use std::path::PathBuf;

use proxlin::par::{map_slice, Execution};
use proxlin::problems::{probe_constants, ProblemInstance};
use proxlin::prox::{envelope_value, prox_conjugate, ProxFunction};
use proxlin::rng::{seeded, stream};
use proxlin::verify::{
    check_sandwich, finite_diff_jacobian_check, near_stationarity_certificate, weak_convexity_probe,
};
use proxlin::{Oracle, Vector};

use crate::config::{RunConfig, VerifyConfig};
use crate::error::CliError;
use crate::output::{compare_csv, emit, float, trace_csv, verify_csv, SuiteRow};
use crate::solve::run_solver;

/// Settings shared by every subcommand after flag overrides.
pub struct Invocation {
    pub config: RunConfig,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub quiet: bool,
}

impl Invocation {
    pub fn new(config: RunConfig, out: Option<PathBuf>, seed: Option<u64>, quiet: bool) -> Self {
        let out = out.or_else(|| config.output.clone());
        let seed = seed.unwrap_or(config.seed);
        Self { config, out, seed, quiet }
    }

    fn instance(&self) -> Result<ProblemInstance, CliError> {
        self.config.instance.build(self.seed)
    }

    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

pub fn cmd_run(inv: &Invocation) -> Result<(), CliError> {
    let spec = inv.config.solver.as_ref().ok_or_else(|| CliError::Usage("`run` needs a [solver] table".into()))?;
    let inst = inv.instance()?;
    let trace = run_solver(&inst, spec, inv.seed, inv.config.timing)?;
    emit(&trace_csv(&trace), inv.out.as_deref())?;
    let last = trace.records.last();
    inv.note(format!(
        "{}: {} steps, F = {}, reported norm {}",
        inst.name(),
        trace.n_steps(),
        float(trace.final_value),
        last.map_or_else(|| "n/a".into(), |r| float(r.prox_grad_norm)),
    ));
    Ok(())
}

pub fn cmd_compare(inv: &Invocation) -> Result<(), CliError> {
    let entries = &inv.config.compare;
    if entries.is_empty() {
        return Err(CliError::Usage("`compare` needs at least one [[compare]] entry".into()));
    }
    let inst = inv.instance()?;
    let results =
        map_slice(Execution::default(), entries, |e| run_solver(&inst, &e.solver, inv.seed, inv.config.timing));
    let mut runs = Vec::with_capacity(entries.len());
    for (entry, result) in entries.iter().zip(results) {
        let trace = result?;
        inv.note(format!("{}: {} steps, {} oracle calls", entry.label, trace.n_steps(), trace.counters.total()));
        runs.push((entry.label.clone(), trace));
    }
    emit(&compare_csv(&runs), inv.out.as_deref())
}

pub fn cmd_verify(inv: &Invocation) -> Result<(), CliError> {
    let inst = inv.instance()?;
    let rows = verify_suites(&inst, &inv.config.verify, inv.seed);
    emit(&verify_csv(&rows), inv.out.as_deref())?;
    let failures: usize = rows.iter().map(|r| r.failures).sum();
    for r in &rows {
        inv.note(format!(
            "{:<18} {:>6} checks {:>4} failures  worst {}",
            r.suite,
            r.checks,
            r.failures,
            float(r.worst)
        ));
    }
    if failures > 0 {
        let failed: Vec<&str> = rows.iter().filter(|r| r.failures > 0).map(|r| r.suite).collect();
        return Err(CliError::Assertion(format!("{failures} failed inequalities in {}", failed.join(", "))));
    }
    Ok(())
}

struct Tally {
    suite: &'static str,
    checks: usize,
    failures: usize,
    worst: f64,
}

impl Tally {
    fn new(suite: &'static str) -> Self {
        Self { suite, checks: 0, failures: 0, worst: 0.0 }
    }

    fn record(&mut self, ok: bool, measure: f64) {
        self.checks += 1;
        if !ok {
            self.failures += 1;
        }
        if !measure.is_nan() {
            self.worst = self.worst.max(measure);
        }
    }

    fn row(self) -> SuiteRow {
        SuiteRow { suite: self.suite, checks: self.checks, failures: self.failures, worst: self.worst }
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Runs the enabled suites; `worst` is the largest lhs/rhs ratio except for
/// the residual suites (jacobian, weak convexity, prox calculus). A solver
/// error inside a suite counts as a failed check with infinite measure.
pub fn verify_suites(inst: &ProblemInstance, cfg: &VerifyConfig, seed: u64) -> Vec<SuiteRow> {
    let p = &inst.problem;
    let mu = p.mu();
    let mut rng = stream(seed, 1);
    let points: Vec<Vector> = (0..cfg.points).map(|_| inst.sample_point(&mut rng, cfg.radius)).collect();
    let mut rows = Vec::new();
    let mut constants_hold = true;

    if cfg.constants && cfg.probes > 0 {
        let probe = probe_constants(inst, cfg.probes, cfg.radius, seed);
        for (suite, r) in [
            ("constant_lipschitz", probe.lipschitz_ratio),
            ("constant_beta", probe.beta_ratio),
            ("constant_opnorm", probe.opnorm_ratio),
        ] {
            let mut t = Tally::new(suite);
            t.checks = cfg.probes - 1;
            t.record(r <= 1.0 + cfg.slack, r);
            constants_hold &= t.failures == 0;
            rows.push(t.row());
        }
    }
    // Suites below rely on mu = L*beta; a violated constant invalidates them.
    let dependent = |enabled: bool| enabled && constants_hold;

    if cfg.jacobian {
        let mut t = Tally::new("jacobian");
        for (i, x) in points.iter().enumerate() {
            let e = finite_diff_jacobian_check(p.c().as_ref(), x, 4, seed.wrapping_add(i as u64));
            t.record(e <= cfg.slack, e);
        }
        rows.push(t.row());
    }

    if dependent(cfg.sandwich) {
        let steps: Vec<f64> = if mu > 0.0 { vec![1.0 / mu, 0.5 / mu] } else { vec![1.0] };
        let mut t = Tally::new("sandwich");
        for x in &points {
            for &step in &steps {
                match check_sandwich(p, x, step, cfg.tolerance, cfg.slack) {
                    Ok(c) => {
                        let measure = ratio(c.lower * c.envelope_grad_norm, c.prox_grad_norm)
                            .max(ratio(c.prox_grad_norm, c.upper * c.envelope_grad_norm));
                        t.record(c.holds(), measure);
                    }
                    Err(_) => t.record(false, f64::INFINITY),
                }
            }
        }
        rows.push(t.row());
    }

    if dependent(cfg.near_stationarity) && mu > 0.0 {
        let mut t = Tally::new("near_stationarity");
        for x in &points {
            match near_stationarity_certificate(p, x, cfg.tolerance) {
                Ok(c) => {
                    let measure = ratio(c.dist, c.dist_bound).max(ratio(c.subgradient_norm, c.subgradient_bound));
                    t.record(c.holds(cfg.slack), measure);
                }
                Err(_) => t.record(false, f64::INFINITY),
            }
        }
        rows.push(t.row());
    }

    if dependent(cfg.weak_convexity) && cfg.probes > 0 {
        let oracle = Oracle::new(p);
        let f = |x: &Vector| oracle.objective(x).unwrap_or(f64::INFINITY);
        let scale = 1.0 + f(&inst.start).abs();
        let v = weak_convexity_probe(f, mu, &inst.start, cfg.radius, cfg.probes, seed);
        let mut t = Tally::new("weak_convexity");
        t.checks = cfg.probes - 1;
        t.record(v <= 1e-9 * scale, v.max(0.0));
        rows.push(t.row());
    }

    if cfg.prox_calculus {
        let mut t = Tally::new("prox_calculus");
        let mut rng = seeded(seed ^ 0x9e37_79b9_7f4a_7c15);
        let parts: [(&dyn ProxFunction, usize); 2] = [(p.g().as_ref(), p.dim()), (p.h().as_ref(), p.dim_out())];
        for (f, dim) in parts {
            for _ in 0..cfg.points {
                let x = proxlin::rng::gaussian_vector(&mut rng, dim);
                for step in [0.1, 1.0, 5.0] {
                    let recomposed = f.prox(step, &x) + prox_conjugate(f, 1.0 / step, &(&x / step)) * step;
                    let residual = (&recomposed - &x).norm() / (1.0 + x.norm());
                    t.record(residual <= 1e-9, residual);
                    let value = f.value(&x);
                    if value.is_finite() {
                        match envelope_value(f, step, &x) {
                            Ok(env) => {
                                let excess = (env - value).max(0.0) / (1.0 + value.abs());
                                t.record(excess <= 1e-12, excess);
                            }
                            Err(_) => t.record(false, f64::INFINITY),
                        }
                    }
                }
            }
        }
        rows.push(t.row());
    }
    rows
}
