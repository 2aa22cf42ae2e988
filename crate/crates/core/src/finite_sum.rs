//! Finite sums `F(x) = (1/m)Σ h_i(c_i(x)) + g(x)` with scalar components,
//! solved by coupling prox-linear steps with Prox-SVRG on each subproblem.
//!
//! Component-level costs are reported in the trace counters as follows:
//! `n_c_eval` counts `c_i(x)`, `n_vjp` counts gradients `∇c_i(x)`, `n_jvp`
//! counts products `⟨∇c_i(x), v⟩`, `n_prox_h` counts proxes or derivatives
//! of an `h_i`, and `n_prox_g` counts proxes of `g`.

use std::cell::{Cell, RefCell};
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, spectral_norm, Matrix, Vector};
use crate::oracle::{Oracle, OracleCounters};
use crate::problem::CompositeProblem;
use crate::problems::phase_retrieval_data;
use crate::prox::{BlockSeparable, L1Norm, MoreauEnvelope, ProxFunction, Scaled, Zero};
use crate::prox_linear::{
    plus_constants, run_coupled, wrap_plus, FunctionalRateSubscheme, ProxLinearConfig, RateConstants,
};
use crate::rng::{seeded, stream};
use crate::smooth::{PhaseRetrievalMap, SmoothMap};
use crate::subproblem::{prox_gradient, LinearizedModel};
use crate::trace::{StopReason, Trace};

/// One term `h_i(c_i(x))` with `h_i: R → R` and `c_i: R^d → R`.
#[derive(Clone, Debug)]
pub struct Component {
    pub h: Arc<dyn ProxFunction>,
    pub c: Arc<dyn SmoothMap>,
}

#[derive(Clone, Debug)]
pub struct FiniteSumProblem {
    components: Vec<Component>,
    g: Arc<dyn ProxFunction>,
    lipschitz: f64,
    beta: f64,
    grad_bound: f64,
    outer_smoothness: Option<f64>,
    /// `(c_1, …, c_m)` and `(1/m)Σ h_i(z_i)` as single functions, when the
    /// components come from shared data.
    stacked: Option<(Arc<dyn SmoothMap>, Arc<dyn ProxFunction>)>,
}

impl FiniteSumProblem {
    /// `L = max lip(h_i)`, `β = max β_i`, `‖∇c‖ = max` of the component
    /// bounds and `L_h = max lip(h_i')` when every `h_i` is smooth.
    pub fn new(components: Vec<Component>, g: Arc<dyn ProxFunction>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidParameter("finite sum needs at least one component".into()))?;
        let d = first.c.dim_in();
        let mut lipschitz: f64 = 0.0;
        let mut beta: f64 = 0.0;
        let mut grad_bound: f64 = 0.0;
        let mut outer_smoothness = Some(0.0f64);
        for comp in &components {
            if comp.c.dim_in() != d {
                return Err(Error::DimensionMismatch { expected: d, found: comp.c.dim_in() });
            }
            if comp.c.dim_out() != 1 {
                return Err(Error::DimensionMismatch { expected: 1, found: comp.c.dim_out() });
            }
            let l = comp
                .h
                .lipschitz()
                .ok_or_else(|| Error::InvalidParameter("component without a Lipschitz constant".into()))?;
            lipschitz = lipschitz.max(l);
            beta = beta.max(comp.c.beta());
            grad_bound = grad_bound.max(comp.c.opnorm_bound());
            outer_smoothness = match (outer_smoothness, comp.h.grad_lipschitz()) {
                (Some(a), Some(b)) => Some(a.max(b)),
                _ => None,
            };
        }
        Ok(Self { components, g, lipschitz, beta, grad_bound, outer_smoothness, stacked: None })
    }

    /// Robust phase retrieval `(1/m)Σ|⟨a_i, x⟩² − b_i|`.
    pub fn phase_retrieval(a: &Matrix, b: &Vector) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch { expected: a.nrows(), found: b.len() });
        }
        let components = (0..a.nrows())
            .map(|i| Component {
                h: Arc::new(L1Norm::new(1.0, 1)) as Arc<dyn ProxFunction>,
                c: Arc::new(PhaseRetrievalMap::new(
                    Matrix::from_row_slice(1, a.ncols(), a.row(i).transpose().as_slice()),
                    Vector::from_element(1, b[i]),
                    None,
                )) as Arc<dyn SmoothMap>,
            })
            .collect();
        let mut fs = Self::new(components, Arc::new(Zero))?;
        let m = a.nrows();
        fs.stacked = Some((
            Arc::new(PhaseRetrievalMap::new(a.clone(), b.clone(), None)),
            Arc::new(L1Norm::new(1.0 / m as f64, m)),
        ));
        Ok(fs)
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.components[0].c.dim_in()
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn g(&self) -> &Arc<dyn ProxFunction> {
        &self.g
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `‖∇c‖ ≥ max_i sup ‖∇c_i(x)‖`; may be infinite.
    pub fn grad_bound(&self) -> f64 {
        self.grad_bound
    }

    /// `L_h`, when every `h_i` has a Lipschitz derivative.
    pub fn outer_smoothness(&self) -> Option<f64> {
        self.outer_smoothness
    }

    /// `μ = Lβ`, the same for the aggregate problem.
    pub fn mu(&self) -> f64 {
        self.lipschitz * self.beta
    }

    pub fn objective(&self, x: &Vector) -> Result<f64> {
        let m = self.len() as f64;
        let mut sum = 0.0;
        for comp in &self.components {
            sum += comp.h.value(&comp.c.eval(x));
        }
        Ok(sum / m + self.g.value(x))
    }

    /// `h(z) = (1/m)Σ h_i(z_i)`, `c = (c_1, …, c_m)` with the constants
    /// `L/√m`, `β√m` and `√m‖∇c‖`.
    pub fn as_composite(&self) -> Result<CompositeProblem> {
        let m = self.len();
        let root = (m as f64).sqrt();
        let (c, h): (Arc<dyn SmoothMap>, Arc<dyn ProxFunction>) = match &self.stacked {
            Some((c, h)) => (c.clone(), h.clone()),
            None => {
                let parts = self.components.iter().map(|comp| comp.c.clone()).collect();
                let blocks = self
                    .components
                    .iter()
                    .map(|comp| (Arc::new(Scaled::new(comp.h.clone(), 1.0 / m as f64)) as Arc<dyn ProxFunction>, 1))
                    .collect();
                (
                    Arc::new(StackedMap::new(parts, self.beta * root, self.grad_bound * root)?),
                    Arc::new(BlockSeparable::new(blocks)),
                )
            }
        };
        CompositeProblem::with_constants(
            self.g.clone(),
            h,
            c,
            self.lipschitz / root,
            self.beta * root,
            self.grad_bound * root,
        )
    }

    /// `ν = mε²/(2L³β)`.
    pub fn smoothing_parameter(&self, eps: f64) -> f64 {
        self.len() as f64 * eps * eps / (2.0 * self.lipschitz.powi(3) * self.beta)
    }

    /// Components `φ_i = m·(h_i/m)_ν`, which are `L`-Lipschitz with
    /// `(m/ν)`-Lipschitz derivative; the aggregate is `h_ν`.
    pub fn smoothed(&self, nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidParameter(format!("smoothing parameter {nu}")));
        }
        let m = self.len() as f64;
        let components = self
            .components
            .iter()
            .map(|comp| {
                let inner: Arc<dyn ProxFunction> = Arc::new(Scaled::new(comp.h.clone(), 1.0 / m));
                Component { h: Arc::new(Scaled::new(Arc::new(MoreauEnvelope::new(inner, nu)), m)), c: comp.c.clone() }
            })
            .collect();
        let mut out = Self::new(components, self.g.clone())?;
        out.lipschitz = self.lipschitz;
        out.beta = self.beta;
        out.grad_bound = self.grad_bound;
        out.outer_smoothness = Some(m / nu);
        // (1/m)Σ m·(h_i/m)_ν(z_i) is the separable envelope of (1/m)Σ h_i.
        out.stacked = self
            .stacked
            .as_ref()
            .map(|(c, h)| (c.clone(), Arc::new(MoreauEnvelope::new(h.clone(), nu)) as Arc<dyn ProxFunction>));
        Ok(out)
    }
}

/// Robust phase retrieval as a finite sum, on the same data as
/// [`crate::problems::make_phase_retrieval`]; returns the planted signal.
pub fn phase_retrieval_sum(d: usize, m: usize, seed: u64) -> Result<(FiniteSumProblem, Vector)> {
    let mut rng = seeded(seed);
    let (a, planted, b) = phase_retrieval_data(&mut rng, d, m);
    Ok((FiniteSumProblem::phase_retrieval(&a, &b)?, planted))
}

/// `x ↦ (c_1(x), …, c_m(x))`.
#[derive(Clone, Debug)]
pub struct StackedMap {
    parts: Vec<Arc<dyn SmoothMap>>,
    offsets: Vec<usize>,
    dim_in: usize,
    dim_out: usize,
    beta: f64,
    opnorm: f64,
}

impl StackedMap {
    pub fn new(parts: Vec<Arc<dyn SmoothMap>>, beta: f64, opnorm: f64) -> Result<Self> {
        let dim_in = parts.first().map_or(0, |p| p.dim_in());
        let mut offsets = Vec::with_capacity(parts.len());
        let mut dim_out = 0;
        for p in &parts {
            if p.dim_in() != dim_in {
                return Err(Error::DimensionMismatch { expected: dim_in, found: p.dim_in() });
            }
            offsets.push(dim_out);
            dim_out += p.dim_out();
        }
        Ok(Self { parts, offsets, dim_in, dim_out, beta, opnorm })
    }
}

impl SmoothMap for StackedMap {
    fn dim_in(&self) -> usize {
        self.dim_in
    }
    fn dim_out(&self) -> usize {
        self.dim_out
    }
    fn eval(&self, x: &Vector) -> Vector {
        let mut out = Vector::zeros(self.dim_out);
        for (p, &o) in self.parts.iter().zip(&self.offsets) {
            out.rows_mut(o, p.dim_out()).copy_from(&p.eval(x));
        }
        out
    }
    fn jvp(&self, x: &Vector, v: &Vector) -> Vector {
        let mut out = Vector::zeros(self.dim_out);
        for (p, &o) in self.parts.iter().zip(&self.offsets) {
            out.rows_mut(o, p.dim_out()).copy_from(&p.jvp(x, v));
        }
        out
    }
    fn vjp(&self, x: &Vector, w: &Vector) -> Vector {
        let mut out = Vector::zeros(self.dim_in);
        for (p, &o) in self.parts.iter().zip(&self.offsets) {
            out += p.vjp(x, &w.rows(o, p.dim_out()).into_owned());
        }
        out
    }
    fn beta(&self) -> f64 {
        self.beta
    }
    fn opnorm_bound(&self) -> f64 {
        self.opnorm
    }
    fn opnorm_at(&self, x: &Vector) -> Option<f64> {
        Some(spectral_norm(&self.jacobian(x)))
    }
    fn jacobian(&self, x: &Vector) -> Matrix {
        let mut j = Matrix::zeros(self.dim_out, self.dim_in);
        for (p, &o) in self.parts.iter().zip(&self.offsets) {
            j.rows_mut(o, p.dim_out()).copy_from(&p.jacobian(x));
        }
        j
    }
}

/// Thread-safe component-level call counts.
#[derive(Debug, Default)]
pub struct ComponentCounters {
    c_eval: Cell<u64>,
    dot: Cell<u64>,
    grad: Cell<u64>,
    prox_h: Cell<u64>,
    prox_g: Cell<u64>,
}

impl ComponentCounters {
    pub fn snapshot(&self) -> OracleCounters {
        OracleCounters {
            n_c_eval: self.c_eval.get(),
            n_jvp: self.dot.get(),
            n_vjp: self.grad.get(),
            n_prox_h: self.prox_h.get(),
            n_prox_g: self.prox_g.get(),
        }
    }

    fn add(counter: &Cell<u64>, n: u64) {
        counter.set(counter.get() + n);
    }
}

/// Aggregate-oracle counts expressed per component: every aggregate
/// evaluation of `c`, `∇c·v`, `∇cᵀw` or `prox_h` touches all `m` components.
pub fn per_component(c: OracleCounters, m: usize) -> OracleCounters {
    let m = m as u64;
    OracleCounters {
        n_c_eval: c.n_c_eval * m,
        n_jvp: c.n_jvp * m,
        n_vjp: c.n_vjp * m,
        n_prox_h: c.n_prox_h * m,
        n_prox_g: c.n_prox_g,
    }
}

/// `min_z (1/m)Σ f_i(z) + p(z)` with `ℓ`-smooth convex `f_i` and an
/// `α`-strongly convex `p`.
pub trait FiniteSumComposite {
    fn n_components(&self) -> usize;
    fn dim(&self) -> usize;
    fn component_gradient(&self, i: usize, z: &Vector) -> Result<Vector>;

    /// `out += scale·∇f_i(z)`.
    fn add_component_gradient(&self, i: usize, z: &Vector, scale: f64, out: &mut Vector) -> Result<()> {
        out.axpy(scale, &self.component_gradient(i, z)?, 1.0);
        Ok(())
    }

    /// Common Lipschitz constant `ℓ` of the `∇f_i`.
    fn component_lipschitz(&self) -> f64;
    fn simple_prox(&self, s: f64, x: &Vector) -> Result<Vector>;

    /// `x ← prox_{s·p}(x)`.
    fn simple_prox_in_place(&self, s: f64, x: &mut Vector) -> Result<()> {
        *x = self.simple_prox(s, x)?;
        Ok(())
    }

    fn strong_convexity(&self) -> f64;
    /// `(1/m)Σ f_i(z) + p(z)`.
    fn value(&self, z: &Vector) -> Result<f64>;

    fn full_gradient(&self, z: &Vector) -> Result<Vector> {
        let m = self.n_components();
        let mut out = Vector::zeros(self.dim());
        for i in 0..m {
            self.add_component_gradient(i, z, 1.0 / m as f64, &mut out)?;
        }
        Ok(out)
    }
}

/// `η`, `J`, the epoch count and the randomness of a Prox-SVRG run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvrgConfig {
    pub eta: f64,
    pub inner_len: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Epoch `s` draws its indices from stream `stream + s`.
    pub stream: u64,
}

impl SvrgConfig {
    /// `η = 1/(10ℓ)`, `J = ⌈100κ⌉` with `κ = ℓ/α`.
    pub fn standard(inst: &dyn FiniteSumComposite, epochs: usize, seed: u64) -> Result<Self> {
        let ell = inst.component_lipschitz();
        let alpha = inst.strong_convexity();
        if !(ell > 0.0 && ell.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("Prox-SVRG needs l > 0, alpha > 0 (l={ell}, alpha={alpha})")));
        }
        let kappa = ell / alpha;
        Ok(Self {
            eta: 1.0 / (10.0 * ell),
            inner_len: (100.0 * kappa).ceil().max(1.0) as usize,
            epochs,
            seed,
            stream: 0,
        })
    }

    /// `m + 2J` component gradients per epoch.
    pub fn epoch_cost(&self, m: usize) -> usize {
        m + 2 * self.inner_len
    }
}

/// `ṽ + ∇f_i(x) − ∇f_i(x̃)`.
pub fn svrg_direction(
    inst: &dyn FiniteSumComposite,
    i: usize,
    x: &Vector,
    x_tilde: &Vector,
    v_tilde: &Vector,
) -> Result<Vector> {
    let mut v = v_tilde.clone();
    inst.add_component_gradient(i, x, 1.0, &mut v)?;
    inst.add_component_gradient(i, x_tilde, -1.0, &mut v)?;
    Ok(v)
}

#[derive(Clone, Debug)]
pub struct SvrgRun {
    /// `x̃_0, …, x̃_S`.
    pub snapshots: Vec<Vector>,
    pub grad_evals: usize,
}

impl SvrgRun {
    pub fn last(&self) -> &Vector {
        self.snapshots.last().expect("at least the initial snapshot")
    }
}

/// Prox-SVRG: each epoch takes a full gradient at the snapshot, then `J`
/// variance-reduced proximal steps, and averages the inner iterates.
pub fn prox_svrg_run(inst: &dyn FiniteSumComposite, x0: &Vector, cfg: &SvrgConfig) -> Result<SvrgRun> {
    if !(cfg.eta > 0.0 && cfg.eta.is_finite()) || cfg.inner_len == 0 {
        return Err(Error::InvalidParameter(format!("Prox-SVRG step {} and inner length {}", cfg.eta, cfg.inner_len)));
    }
    let m = inst.n_components();
    let mut snapshots = Vec::with_capacity(cfg.epochs + 1);
    snapshots.push(x0.clone());
    let mut grad_evals = 0;
    let mut x_tilde = x0.clone();
    let mut v = Vector::zeros(x0.len());
    for s in 0..cfg.epochs {
        let mut rng = stream(cfg.seed, cfg.stream.wrapping_add(s as u64));
        let v_tilde = inst.full_gradient(&x_tilde)?;
        grad_evals += m;
        let mut x = x_tilde.clone();
        let mut sum = Vector::zeros(x0.len());
        for _ in 0..cfg.inner_len {
            let i = rng.gen_range(0..m);
            v.copy_from(&v_tilde);
            inst.add_component_gradient(i, &x, 1.0, &mut v)?;
            inst.add_component_gradient(i, &x_tilde, -1.0, &mut v)?;
            grad_evals += 2;
            x.axpy(-cfg.eta, &v, 1.0);
            inst.simple_prox_in_place(cfg.eta, &mut x)?;
            sum += &x;
        }
        x_tilde = sum / cfg.inner_len as f64;
        ensure_finite(&x_tilde, "Prox-SVRG snapshot")?;
        snapshots.push(x_tilde.clone());
    }
    Ok(SvrgRun { snapshots, grad_evals })
}

/// How `ℓ` is bounded in a subproblem.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradientBound {
    /// `L_h·‖∇c‖²` from the global bound; per point when that is infinite.
    Global,
    /// `L_h·max_i‖∇c_i(x)‖²` at the linearization point.
    PerPoint,
}

/// The prox-linear subproblem at `x` as a finite sum:
/// `f_i(z) = h_i(c_i(x) + ⟨∇c_i(x), z − x⟩)`, `p = g + ‖· − x‖²/(2t)`.
pub struct FiniteSumModel<'f> {
    fs: &'f FiniteSumProblem,
    center: Vector,
    t: f64,
    /// `c_i(x) − ⟨∇c_i(x), x⟩`.
    offsets: Vec<f64>,
    grads: Vec<Vector>,
    ell: f64,
    counters: &'f ComponentCounters,
}

impl<'f> FiniteSumModel<'f> {
    pub fn new(
        fs: &'f FiniteSumProblem,
        x: &Vector,
        t: f64,
        bound: GradientBound,
        counters: &'f ComponentCounters,
    ) -> Result<Self> {
        let lh = fs
            .outer_smoothness()
            .ok_or_else(|| Error::InvalidParameter("finite-sum subproblems need smooth components".into()))?;
        let m = fs.len();
        let one = Vector::from_element(1, 1.0);
        let mut offsets = Vec::with_capacity(m);
        let mut grads = Vec::with_capacity(m);
        let mut max_sq: f64 = 0.0;
        for comp in fs.components() {
            let ci = comp.c.eval(x)[0];
            let gi = comp.c.vjp(x, &one);
            max_sq = max_sq.max(gi.norm_squared());
            offsets.push(ci - gi.dot(x));
            grads.push(gi);
        }
        ComponentCounters::add(&counters.c_eval, m as u64);
        ComponentCounters::add(&counters.grad, m as u64);
        let ell = match bound {
            GradientBound::Global if fs.grad_bound().is_finite() => lh * fs.grad_bound().powi(2),
            _ => lh * max_sq,
        };
        Ok(Self { fs, center: x.clone(), t, offsets, grads, ell, counters })
    }

    fn argument(&self, i: usize, z: &Vector) -> f64 {
        ComponentCounters::add(&self.counters.dot, 1);
        self.offsets[i] + self.grads[i].dot(z)
    }

    fn derivative(&self, i: usize, s: f64) -> Result<f64> {
        ComponentCounters::add(&self.counters.prox_h, 1);
        self.fs.components[i]
            .h
            .scalar_gradient(s)
            .ok_or_else(|| Error::InvalidParameter("component without a derivative".into()))
    }
}

impl FiniteSumComposite for FiniteSumModel<'_> {
    fn n_components(&self) -> usize {
        self.fs.len()
    }
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn component_gradient(&self, i: usize, z: &Vector) -> Result<Vector> {
        let d = self.derivative(i, self.argument(i, z))?;
        Ok(&self.grads[i] * d)
    }
    fn add_component_gradient(&self, i: usize, z: &Vector, scale: f64, out: &mut Vector) -> Result<()> {
        let d = self.derivative(i, self.argument(i, z))?;
        out.axpy(scale * d, &self.grads[i], 1.0);
        Ok(())
    }
    fn component_lipschitz(&self) -> f64 {
        self.ell
    }
    fn simple_prox(&self, s: f64, x: &Vector) -> Result<Vector> {
        ComponentCounters::add(&self.counters.prox_g, 1);
        let w = 1.0 / self.t;
        let scale = 1.0 + s * w;
        let shifted = (x + &self.center * (s * w)) / scale;
        Ok(self.fs.g().prox(s / scale, &shifted))
    }
    fn simple_prox_in_place(&self, s: f64, x: &mut Vector) -> Result<()> {
        ComponentCounters::add(&self.counters.prox_g, 1);
        let w = 1.0 / self.t;
        let scale = 1.0 + s * w;
        x.axpy(s * w / scale, &self.center, 1.0 / scale);
        *x = self.fs.g().prox(s / scale, x);
        Ok(())
    }
    fn strong_convexity(&self) -> f64 {
        1.0 / self.t + self.fs.g().strong_convexity()
    }
    fn value(&self, z: &Vector) -> Result<f64> {
        let m = self.fs.len();
        let mut sum = 0.0;
        for i in 0..m {
            let s = self.argument(i, z);
            sum += self.fs.components[i].h.value(&Vector::from_element(1, s));
        }
        Ok(sum / m as f64 + self.fs.g().value(z) + (z - &self.center).norm_squared() / (2.0 * self.t))
    }
}

/// Prox-SVRG on the component form of each prox-linear subproblem:
/// `γ = 1`, `τ = 0.1` in expected function gap.
#[derive(Debug)]
pub struct SvrgSubscheme<'f> {
    fs: &'f FiniteSumProblem,
    seed: u64,
    bound: GradientBound,
    counters: ComponentCounters,
    /// Cumulative component counts after each outer step.
    log: RefCell<Vec<OracleCounters>>,
}

impl<'f> SvrgSubscheme<'f> {
    pub fn new(fs: &'f FiniteSumProblem, seed: u64, bound: GradientBound) -> Self {
        Self { fs, seed, bound, counters: ComponentCounters::default(), log: RefCell::new(Vec::new()) }
    }

    pub fn counters(&self) -> OracleCounters {
        self.counters.snapshot()
    }

    pub fn log(&self) -> Vec<OracleCounters> {
        self.log.borrow().clone()
    }
}

/// Streams reserved per outer step.
const STREAMS_PER_STEP: u64 = 1 << 24;

impl FunctionalRateSubscheme for SvrgSubscheme<'_> {
    fn rate_constants(&self, _model: &LinearizedModel<'_>) -> Result<RateConstants> {
        RateConstants::new(1.0, 0.1)
    }
    fn run(&self, model: &LinearizedModel<'_>, z0: &Vector, n_iters: usize, outer: usize) -> Result<Vector> {
        let fm = FiniteSumModel::new(self.fs, model.linearization_point(), model.step(), self.bound, &self.counters)?;
        let mut cfg = SvrgConfig::standard(&fm, n_iters, self.seed)?;
        cfg.stream = (outer as u64).wrapping_mul(STREAMS_PER_STEP);
        let run = prox_svrg_run(&fm, z0, &cfg)?;
        self.log.borrow_mut().push(self.counters.snapshot());
        Ok(run.last().clone())
    }
    fn is_deterministic(&self) -> bool {
        false
    }
}

/// Distance-form constants `(ℓ/2, 0.1)` of Prox-SVRG with the extra step.
pub fn svrg_plus_constants(ell: f64) -> Result<RateConstants> {
    plus_constants(RateConstants::new(1.0, 0.1)?, ell)
}

/// Distance-form constants of Katyusha with the extra step:
/// `γ = 2ℓ`, `1 − τ = max{(1 + √(2m/(3κ)))⁻¹, 1/1.5}`. Only the constants
/// are provided, for cost arithmetic.
pub fn katyusha_plus_constants(ell: f64, alpha: f64, m: usize) -> Result<RateConstants> {
    let kappa = ell / alpha;
    let contraction = (1.0 / (1.0 + (2.0 * m as f64 / (3.0 * kappa)).sqrt())).max(1.0 / 1.5);
    plus_constants(RateConstants::new(4.0, 1.0 - contraction)?, ell)
}

/// Smooth components, or nonsmooth ones replaced by `m·(h_i/m)_ν`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FiniteSumMode {
    Smooth,
    Smoothed,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiniteSumOptions {
    pub max_outer: usize,
    pub seed: u64,
    pub bound: GradientBound,
    /// Record exact prox-gradients of the working problem.
    pub record_true: bool,
}

impl Default for FiniteSumOptions {
    fn default() -> Self {
        Self { max_outer: 1000, seed: 0, bound: GradientBound::Global, record_true: false }
    }
}

#[derive(Clone, Debug)]
pub struct FiniteSumRun {
    pub x: Vector,
    /// Trace with component-level counters.
    pub trace: Trace,
    /// `‖G_{1/μ}(x)‖` of the original problem, from an exact solve.
    pub true_norm: f64,
}

/// Coupled prox-linear steps at `t = 1/μ` with Prox-SVRG⁺ on every
/// subproblem, stopped once the surrogate reaches `ε` (smooth) or `ε/2`
/// (smoothed).
pub fn run_finite_sum_driver(
    fs: &FiniteSumProblem,
    x0: &Vector,
    eps: f64,
    mode: FiniteSumMode,
    opts: &FiniteSumOptions,
) -> Result<FiniteSumRun> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("target accuracy {eps}")));
    }
    let mu = fs.mu();
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter("finite-sum driver needs mu = L*beta > 0".into()));
    }
    let (working, tol) = match mode {
        FiniteSumMode::Smooth => {
            if fs.outer_smoothness().is_none() {
                return Err(Error::InvalidParameter("smooth mode needs smooth components".into()));
            }
            (fs.clone(), eps)
        }
        FiniteSumMode::Smoothed => (fs.smoothed(fs.smoothing_parameter(eps))?, 0.5 * eps),
    };
    let aggregate = working.as_composite()?;
    let svrg = SvrgSubscheme::new(&working, opts.seed, opts.bound);
    let plus = wrap_plus(svrg);
    let cfg = ProxLinearConfig {
        t: Some(1.0 / mu),
        max_outer: opts.max_outer,
        tol,
        record_true: opts.record_true,
        ..ProxLinearConfig::default()
    };
    let mut trace = run_coupled(&aggregate, x0, &cfg, &plus)?;
    let m = fs.len();
    let log = plus.0.log();
    for (r, inner) in trace.records.iter_mut().zip(&log) {
        r.counters = per_component(r.counters, m) + *inner;
    }
    trace.counters = per_component(trace.counters, m) + plus.0.counters();
    if trace.stop != StopReason::Tolerance {
        return Err(Error::BudgetExhausted {
            iters: trace.n_steps(),
            target: tol,
            reached: trace.min_prox_grad_norm(),
        });
    }
    let x = trace.certified_point().clone();
    let original = fs.as_composite()?;
    let true_norm = prox_gradient(&Oracle::new(&original), &x, 1.0 / mu)?.0.norm();
    Ok(FiniteSumRun { x, trace, true_norm })
}
