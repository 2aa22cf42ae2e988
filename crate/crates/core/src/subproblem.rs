//! The convex subproblem of a prox-linear step and its dual.
//!
//! The model is
//! `z ↦ g(z) + (1/α)·h(ζ + c(y) + α∇c(y)(z − v)) + ‖z − v‖²/(2t)`
//! with linearization point `y`, proximal center `v`, weight `α` and an
//! optional perturbation `ζ`. The standard step is `α = 1`, `v = y`, `ζ = 0`.
//!
//! The dual is solved by restarted accelerated proximal gradient; primal
//! points are recovered as `x̄(w) = prox_{tg}(v − tα∇c(y)ᵀw)`. After one dual
//! step `w → w⁺` the vector `ζ = ℓ(w − w⁺) + ∇s(w⁺) − ∇s(w)` lies in the dual
//! subdifferential at `w⁺`, so `x̄(w⁺)` solves the ζ-perturbed model exactly
//! and its gap on the unperturbed model is at most `2(L/α)‖ζ‖`.

use std::cell::OnceCell;

use crate::error::{Error, Result};
use crate::linalg::{ensure_dim, ensure_value, power_opnorm, Vector};
use crate::oracle::Oracle;
use crate::prox::conjugate_value;

/// Relative accuracy of solves labelled exact.
pub const EXACT_RELATIVE_TOL: f64 = 1e-12;

/// Default cap on dual iterations per solve.
pub const DEFAULT_MAX_DUAL_ITERS: usize = 200_000;

#[derive(Debug)]
pub struct LinearizedModel<'a> {
    oracle: &'a Oracle<'a>,
    y: Vector,
    v: Vector,
    c_y: Vector,
    shift: Option<Vector>,
    t: f64,
    alpha: f64,
    opnorm: OnceCell<f64>,
}

impl<'a> LinearizedModel<'a> {
    /// `F_t(·; y)`; evaluates `c(y)`.
    pub fn new(oracle: &'a Oracle<'a>, y: &Vector, t: f64) -> Result<Self> {
        let c_y = oracle.c(y)?;
        Self::from_parts(oracle, y.clone(), c_y, y.clone(), t, 1.0)
    }

    /// Two-center model with linearization point `y`, center `v` and weight `α`.
    pub fn two_center(oracle: &'a Oracle<'a>, y: &Vector, v: &Vector, t: f64, alpha: f64) -> Result<Self> {
        let c_y = oracle.c(y)?;
        Self::from_parts(oracle, y.clone(), c_y, v.clone(), t, alpha)
    }

    /// Builds the model from an already evaluated `c(y)`.
    pub fn from_parts(oracle: &'a Oracle<'a>, y: Vector, c_y: Vector, v: Vector, t: f64, alpha: f64) -> Result<Self> {
        let p = oracle.problem();
        ensure_dim(&y, p.dim())?;
        ensure_dim(&v, p.dim())?;
        ensure_dim(&c_y, p.dim_out())?;
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!("step size {t}")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!("model weight {alpha}")));
        }
        Ok(Self { oracle, y, v, c_y, shift: None, t, alpha, opnorm: OnceCell::new() })
    }

    /// Adds the perturbation `ζ` inside `h`.
    pub fn with_shift(mut self, shift: Vector) -> Result<Self> {
        ensure_dim(&shift, self.c_y.len())?;
        self.shift = Some(shift);
        Ok(self)
    }

    pub fn oracle(&self) -> &'a Oracle<'a> {
        self.oracle
    }

    pub fn linearization_point(&self) -> &Vector {
        &self.y
    }

    pub fn center(&self) -> &Vector {
        &self.v
    }

    pub fn c_value(&self) -> &Vector {
        &self.c_y
    }

    pub fn step(&self) -> f64 {
        self.t
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `‖∇c(y)‖_op`: supplied by the map, else the global bound, else power iteration.
    pub fn opnorm(&self) -> f64 {
        *self.opnorm.get_or_init(|| {
            let p = self.oracle.problem();
            if let Some(n) = p.c().opnorm_at(&self.y) {
                return n;
            }
            if p.opnorm_bound().is_finite() {
                return p.opnorm_bound();
            }
            let y = &self.y;
            let dim_out = p.dim_out();
            power_opnorm(
                p.dim(),
                |v| self.oracle.jvp(y, v).unwrap_or_else(|_| Vector::zeros(dim_out)),
                |w| self.oracle.vjp(y, w).unwrap_or_else(|_| Vector::zeros(p.dim())),
                50,
                1e-6,
            )
        })
    }

    /// Lipschitz constant of the scaled outer function `h/α`.
    pub fn outer_lipschitz(&self) -> f64 {
        self.oracle.problem().lipschitz() / self.alpha
    }

    fn base_point(&self) -> Vector {
        match &self.shift {
            Some(s) => &self.c_y + s,
            None => self.c_y.clone(),
        }
    }

    /// `ζ + c(y) + α∇c(y)(z − v)`.
    pub fn affine(&self, z: &Vector) -> Result<Vector> {
        let jd = self.oracle.jvp(&self.y, &(z - &self.v))?;
        Ok(self.base_point() + jd * self.alpha)
    }

    /// Model value at `z`.
    pub fn value(&self, z: &Vector) -> Result<f64> {
        let gz = self.oracle.g_value(z)?;
        if gz == f64::INFINITY {
            return Ok(f64::INFINITY);
        }
        let hz = self.oracle.h_value(&self.affine(z)?)?;
        Ok(gz + hz / self.alpha + (z - &self.v).norm_squared() / (2.0 * self.t))
    }

    /// Model value at the center, used to scale exact tolerances.
    pub fn center_value(&self) -> Result<f64> {
        let gv = self.oracle.g_value(&self.v)?;
        let hv = self.oracle.h_value(&self.base_point())?;
        Ok(gv + hv / self.alpha)
    }

    /// Absolute tolerance `1e-12·(1 + |model(v)|)` for exact solves.
    pub fn exact_tolerance(&self) -> f64 {
        let scale = self.center_value().ok().filter(|v| v.is_finite()).unwrap_or(0.0);
        EXACT_RELATIVE_TOL * (1.0 + scale.abs())
    }

    pub fn dual(&self) -> DualModel<'_, 'a> {
        DualModel { model: self }
    }
}

/// Model value at `z`.
pub fn model_value(model: &LinearizedModel<'_>, z: &Vector) -> Result<f64> {
    model.value(z)
}

/// `min_w s(w) + (h/α)⋆(w)` with `s` smooth and `ℓ`-smooth.
#[derive(Debug, Clone, Copy)]
pub struct DualModel<'m, 'a> {
    model: &'m LinearizedModel<'a>,
}

impl<'m, 'a> DualModel<'m, 'a> {
    /// `ℓ = tα²‖∇c(y)‖²`.
    pub fn ell(&self) -> f64 {
        let m = self.model;
        m.t * m.alpha * m.alpha * m.opnorm().powi(2)
    }

    /// `x̄(w) = prox_{tg}(v − tα∇c(y)ᵀw)`.
    pub fn primal(&self, w: &Vector) -> Result<Vector> {
        let m = self.model;
        let jtw = m.oracle.vjp(&m.y, w)?;
        m.oracle.prox_g(m.t, &(&m.v - jtw * (m.t * m.alpha)))
    }

    /// `(∇s(w), x̄(w))` with `∇s(w) = α∇c(y)(v − x̄) − c(y) − ζ`.
    pub fn gradient(&self, w: &Vector) -> Result<(Vector, Vector)> {
        let m = self.model;
        let x_bar = self.primal(w)?;
        let jd = m.oracle.jvp(&m.y, &(&m.v - &x_bar))?;
        Ok((jd * m.alpha - m.base_point(), x_bar))
    }

    /// `prox_{σ(h/α)⋆}(w)` through the Moreau identity.
    pub fn prox_conjugate(&self, sigma: f64, w: &Vector) -> Result<Vector> {
        let m = self.model;
        let p = m.oracle.prox_h(1.0 / (m.alpha * sigma), &(w / sigma))?;
        Ok(w - p * sigma)
    }

    pub fn dim(&self) -> usize {
        self.model.c_y.len()
    }

    pub fn model(&self) -> &'m LinearizedModel<'a> {
        self.model
    }

    /// `(h/α)⋆(w) = (1/α)h⋆(αw)`.
    pub fn conjugate_value(&self, w: &Vector) -> Result<f64> {
        let m = self.model;
        Ok(conjugate_value(m.oracle.problem().h().as_ref(), &(w * m.alpha))? / m.alpha)
    }

    /// `α/L'` when `h` has an `L'`-Lipschitz gradient, else 0.
    pub fn conjugate_strong_convexity(&self) -> f64 {
        match self.model.oracle.problem().h().grad_lipschitz() {
            Some(l) if l > 0.0 => self.model.alpha / l,
            _ => 0.0,
        }
    }

    /// `φ(w) = s(w) + (h/α)⋆(w)`.
    pub fn value(&self, w: &Vector) -> Result<f64> {
        let conj = self.conjugate_value(w)?;
        let (s, _, _) = self.smooth_value_and_gradient(w)?;
        Ok(s + conj)
    }

    /// `(s(w), ∇s(w), x̄(w))`.
    pub fn smooth_value_and_gradient(&self, w: &Vector) -> Result<(f64, Vector, Vector)> {
        let m = self.model;
        let jtw = m.oracle.vjp(&m.y, w)?;
        let x_bar = m.oracle.prox_g(m.t, &(&m.v - &jtw * (m.t * m.alpha)))?;
        let diff = &m.v - &x_bar;
        let jd = m.oracle.jvp(&m.y, &diff)?;
        let base = m.base_point();
        let gx = m.oracle.g_value(&x_bar)?;
        let s = m.alpha * jtw.dot(&diff) - gx - diff.norm_squared() / (2.0 * m.t) - base.dot(w);
        let grad = jd * m.alpha - base;
        Ok((ensure_value(s, "dual smooth value")?, grad, x_bar))
    }
}

/// `(φ(w), ∇s(w))`.
pub fn dual_objective_and_gradient(dual: &DualModel<'_, '_>, w: &Vector) -> Result<(f64, Vector)> {
    let conj = dual.conjugate_value(w)?;
    let (s, g, _) = dual.smooth_value_and_gradient(w)?;
    Ok((s + conj, g))
}

/// A dual point after one prox-gradient step and the certificate it carries.
#[derive(Clone, Debug)]
pub struct Recovered {
    pub w: Vector,
    pub x_bar: Vector,
    pub zeta: Vector,
}

/// One dual prox-gradient step from `w` with step `1/ℓ`, returning `x̄(w⁺)`
/// and `ζ ∈ ∂φ(w⁺)`.
pub fn recover_primal(dual: &DualModel<'_, '_>, w: &Vector) -> Result<Recovered> {
    let ell = dual.ell().max(f64::MIN_POSITIVE);
    let (g_w, _) = dual.gradient(w)?;
    let w_plus = dual.prox_conjugate(1.0 / ell, &(w - &g_w / ell))?;
    let (g_plus, x_bar) = dual.gradient(&w_plus)?;
    let zeta = (w - &w_plus) * ell + g_plus - g_w;
    Ok(Recovered { w: w_plus, x_bar, zeta })
}

/// Stopping target of a dual solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DualTarget {
    /// Primal gap `≤ value`, certified by `2(L/α)‖ζ‖`.
    Gap(f64),
    /// Dual stationarity `‖ζ‖ ≤ value`.
    Residual(f64),
}

impl DualTarget {
    fn value(self) -> f64 {
        match self {
            DualTarget::Gap(v) | DualTarget::Residual(v) => v,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DualSolve {
    pub w: Vector,
    pub x_bar: Vector,
    pub zeta: Vector,
    /// Attained value of the target measure.
    pub measure: f64,
    pub iters: usize,
}

/// Restarted accelerated proximal gradient on the dual, started from `warm`
/// (or zero). The step `1/ℓ` is shrunk whenever a gradient difference
/// shows `ℓ` to be too small.
pub fn solve_dual(
    model: &LinearizedModel<'_>,
    target: DualTarget,
    warm: Option<&Vector>,
    max_iters: usize,
) -> Result<DualSolve> {
    let (reached, best) = solve_dual_tracking(model, target, warm, max_iters)?;
    if reached {
        return Ok(best);
    }
    Err(Error::DualBudgetExhausted { iters: max_iters, target: target.value(), reached: best.measure })
}

/// Runs [`solve_dual`]; returns whether the target was met together with
/// the final point, or the best point seen on exhaustion.
fn solve_dual_tracking(
    model: &LinearizedModel<'_>,
    target: DualTarget,
    warm: Option<&Vector>,
    max_iters: usize,
) -> Result<(bool, DualSolve)> {
    let dual = model.dual();
    let lip = model.outer_lipschitz();
    let measure = |zeta: &Vector| match target {
        DualTarget::Gap(_) => 2.0 * lip * zeta.norm(),
        DualTarget::Residual(_) => zeta.norm(),
    };
    let goal = target.value();
    let m = model.c_y.len();
    let mut ell = dual.ell().max(1e-300);
    let mut w = match warm {
        Some(w0) if w0.len() == m => w0.clone(),
        _ => Vector::zeros(m),
    };
    let mut y = w.clone();
    let (mut g_y, _) = dual.gradient(&y)?;
    let mut theta: f64 = 1.0;
    let mut best: Option<DualSolve> = None;
    for it in 1..=max_iters {
        let w_new = dual.prox_conjugate(1.0 / ell, &(&y - &g_y / ell))?;
        let (g_new, x_bar) = dual.gradient(&w_new)?;
        let dw = &y - &w_new;
        let zeta = &dw * ell + &g_new - &g_y;
        let got = measure(&zeta);
        if got <= goal {
            return Ok((true, DualSolve { w: w_new, x_bar, zeta, measure: got, iters: it }));
        }
        if best.as_ref().is_none_or(|b| got < b.measure) {
            best = Some(DualSolve { w: w_new.clone(), x_bar, zeta, measure: got, iters: it });
        }
        let dn = dw.norm();
        if dn > 0.0 {
            let q = (&g_new - &g_y).norm() / dn;
            if q > ell {
                ell = 1.5 * q;
            }
        }
        if dw.dot(&(&w_new - &w)) > 0.0 {
            theta = 1.0;
            y = w_new.clone();
            g_y = g_new;
        } else {
            let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            y = &w_new + (&w_new - &w) * ((theta - 1.0) / theta_next);
            theta = theta_next;
            g_y = dual.gradient(&y)?.0;
        }
        w = w_new;
    }
    let mut best = best.ok_or_else(|| Error::InvalidParameter("dual solve with zero iterations".into()))?;
    best.iters = max_iters;
    Ok((false, best))
}

/// How a subproblem solution is certified.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Certificate {
    /// Closed form; exact up to rounding.
    ClosedForm,
    /// Model gap at most the given value.
    FunctionGap(f64),
    /// Exact minimizer of the model perturbed by `ζ` with `‖ζ‖` at most the value.
    DualStationarity(f64),
}

#[derive(Clone, Debug)]
pub struct SubproblemSolution {
    pub x: Vector,
    pub certificate: Certificate,
    pub inner_iters: usize,
    /// Final dual point, reusable as a warm start.
    pub dual: Vector,
    /// Perturbation for which `x` is an exact minimizer.
    pub zeta: Vector,
}

/// Solves without dual iterations when `h` is affine or constant.
fn closed_form(model: &LinearizedModel<'_>) -> Result<Option<SubproblemSolution>> {
    let p = model.oracle.problem();
    let m = model.c_y.len();
    if p.h().is_identity() {
        let mut e = Vector::zeros(m);
        e[0] = 1.0;
        let jte = model.oracle.vjp(&model.y, &e)?;
        let x = model.oracle.prox_g(model.t, &(&model.v - jte * model.t))?;
        let dual = e / model.alpha;
        return Ok(Some(SubproblemSolution {
            x,
            certificate: Certificate::ClosedForm,
            inner_iters: 0,
            dual,
            zeta: Vector::zeros(m),
        }));
    }
    if p.lipschitz() == 0.0 {
        let x = model.oracle.prox_g(model.t, &model.v)?;
        return Ok(Some(SubproblemSolution {
            x,
            certificate: Certificate::ClosedForm,
            inner_iters: 0,
            dual: Vector::zeros(m),
            zeta: Vector::zeros(m),
        }));
    }
    Ok(None)
}

/// Model minimizer to gap `tol`.
pub fn solve_to_gap(
    model: &LinearizedModel<'_>,
    tol: f64,
    warm: Option<&Vector>,
    max_iters: usize,
) -> Result<SubproblemSolution> {
    if let Some(sol) = closed_form(model)? {
        return Ok(sol);
    }
    let s = solve_dual(model, DualTarget::Gap(tol), warm, max_iters)?;
    Ok(SubproblemSolution {
        x: s.x_bar,
        certificate: Certificate::FunctionGap(s.measure),
        inner_iters: s.iters,
        dual: s.w,
        zeta: s.zeta,
    })
}

/// Exact minimizer of the model perturbed by some `ζ` with `‖ζ‖ ≤ tol`.
pub fn solve_to_residual(
    model: &LinearizedModel<'_>,
    tol: f64,
    warm: Option<&Vector>,
    max_iters: usize,
) -> Result<SubproblemSolution> {
    if let Some(sol) = closed_form(model)? {
        return Ok(sol);
    }
    let s = solve_dual(model, DualTarget::Residual(tol), warm, max_iters)?;
    Ok(SubproblemSolution {
        x: s.x_bar,
        certificate: Certificate::DualStationarity(s.measure),
        inner_iters: s.iters,
        dual: s.w,
        zeta: s.zeta,
    })
}

/// Minimizer to the exact tolerance `1e-12·(1 + |model(v)|)`.
///
/// Degenerate duals can stall short of it; the best iterate is then
/// accepted when its certified gap is at most `1e-8·(1 + |model(v)|)`.
pub fn solve_exact(model: &LinearizedModel<'_>, warm: Option<&Vector>) -> Result<SubproblemSolution> {
    if let Some(sol) = closed_form(model)? {
        return Ok(sol);
    }
    let tol = model.exact_tolerance();
    let (reached, s) = solve_dual_tracking(model, DualTarget::Gap(tol), warm, DEFAULT_MAX_DUAL_ITERS)?;
    let fallback = tol * EXACT_FALLBACK_FACTOR;
    if !reached && s.measure > fallback {
        return Err(Error::DualBudgetExhausted { iters: s.iters, target: tol, reached: s.measure });
    }
    Ok(SubproblemSolution {
        x: s.x_bar,
        certificate: Certificate::FunctionGap(s.measure),
        inner_iters: s.iters,
        dual: s.w,
        zeta: s.zeta,
    })
}

/// Ratio of the accepted fallback gap to the exact tolerance.
pub const EXACT_FALLBACK_FACTOR: f64 = 1e4;

/// `G_t(x) = (x − x⁺)/t` from an exact solve, with the solution.
pub fn prox_gradient(oracle: &Oracle<'_>, x: &Vector, t: f64) -> Result<(Vector, SubproblemSolution)> {
    let model = LinearizedModel::new(oracle, x, t)?;
    let sol = solve_exact(&model, None)?;
    Ok(((x - &sol.x) / t, sol))
}
