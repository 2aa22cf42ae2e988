//! Seeded desk-scale instances of the standard composite models.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::fast_gradient::{fgm_run_small_subgradient, QuadraticComposite};
use crate::linalg::{spectral_norm, Matrix, Vector};
use crate::oracle::objective_value;
use crate::problem::CompositeProblem;
use crate::prox::{
    BlockSeparable, BoxIndicator, DistToNonnegOrthant, Identity, L1Norm, L2Norm, ProxFunction,
    QuadraticallyRegularized, Zero,
};
use crate::rng::{gaussian_matrix, gaussian_vector, seeded, uniform_vector, unit_vector};
use crate::smooth::{AffineMap, PhaseRetrievalMap, QuadraticMap};

/// Generator name and size parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum InstanceSpec {
    AdditiveComposite {
        d: usize,
    },
    NlsBox {
        d: usize,
        m: usize,
    },
    PhaseRetrieval {
        d: usize,
        m: usize,
    },
    ExactPenalty {
        d: usize,
        m: usize,
        lambda: f64,
    },
    Lad {
        d: usize,
        m: usize,
    },
    /// `|x² − 1|` on the line.
    Pathology,
}

impl InstanceSpec {
    pub fn name(&self) -> &'static str {
        match self {
            InstanceSpec::AdditiveComposite { .. } => "additive_composite",
            InstanceSpec::NlsBox { .. } => "nls_box",
            InstanceSpec::PhaseRetrieval { .. } => "phase_retrieval",
            InstanceSpec::ExactPenalty { .. } => "exact_penalty",
            InstanceSpec::Lad { .. } => "lad",
            InstanceSpec::Pathology => "pathology",
        }
    }

    pub fn build(&self, seed: u64) -> Result<ProblemInstance> {
        match *self {
            InstanceSpec::AdditiveComposite { d } => make_additive_composite(d, seed),
            InstanceSpec::NlsBox { d, m } => make_nls_box(d, m, seed),
            InstanceSpec::PhaseRetrieval { d, m } => make_phase_retrieval(d, m, seed),
            InstanceSpec::ExactPenalty { d, m, lambda } => make_exact_penalty(d, m, lambda, seed),
            InstanceSpec::Lad { d, m } => make_lad(d, m, seed),
            InstanceSpec::Pathology => make_pathology(),
        }
    }
}

/// Known or independently computed optimum.
#[derive(Clone, Debug)]
pub struct Reference {
    pub inf_value: f64,
    pub minimizer: Option<Vector>,
    pub method: &'static str,
}

#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub spec: InstanceSpec,
    pub seed: u64,
    pub problem: CompositeProblem,
    pub reference: Option<Reference>,
    /// Default starting point.
    pub start: Vector,
    /// Fixed point for value checks.
    pub test_point: Vector,
    pub planted: Option<Vector>,
    /// Weak-convexity constant of `h∘c` used by accelerated bounds.
    pub rho: f64,
    /// Convexity-of-pair constant used by accelerated bounds.
    pub r: f64,
}

impl ProblemInstance {
    pub fn name(&self) -> &'static str {
        self.spec.name()
    }

    /// Replaces the declared `β`, e.g. with a deliberately wrong value.
    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        self.problem = self.problem.with_beta(beta)?;
        Ok(self)
    }

    /// Samples points around `start` inside `dom g` for constant probes.
    pub fn sample_point(&self, rng: &mut impl Rng, radius: f64) -> Vector {
        let d = self.problem.dim();
        let x = &self.start + uniform_vector(rng, d, -radius, radius);
        if self.problem.g().value(&x).is_finite() {
            x
        } else {
            self.problem.g().prox(1.0, &x)
        }
    }
}

fn sym(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// `½xᵀQx + ⟨q, x⟩ + λ‖x‖₁` with `Q ⪰ 0.1·I`, written with `h` the identity.
pub fn make_additive_composite(d: usize, seed: u64) -> Result<ProblemInstance> {
    check_dims(d, 1)?;
    let mut rng = seeded(seed);
    let base = gaussian_matrix(&mut rng, d, d) / (d as f64).sqrt();
    let ridge = 0.1;
    let q_mat = base.transpose() * &base + Matrix::identity(d, d) * ridge;
    let lin = gaussian_vector(&mut rng, d);
    let lambda = 0.1;
    let c =
        QuadraticMap::new(Matrix::from_row_slice(1, d, lin.as_slice()), vec![q_mat.clone()], Vector::zeros(1), None);
    let problem = CompositeProblem::new(Arc::new(L1Norm::new(lambda, d)), Arc::new(Identity), Arc::new(c))?;
    // Strong convexity moves from the quadratic into the simple part.
    let inst = QuadraticComposite::new(
        q_mat.clone() - Matrix::identity(d, d) * ridge,
        lin.clone(),
        Arc::new(QuadraticallyRegularized {
            base: Arc::new(L1Norm::new(lambda, d)),
            center: Vector::zeros(d),
            weight: ridge,
        }),
    )
    .with_lipschitz(spectral_norm(&q_mat));
    let sol = fgm_run_small_subgradient(&inst, &Vector::zeros(d), 1e-11, 100_000)?;
    let x_star = sol.x_hat;
    let inf_value = objective_value(&problem, &x_star)?;
    let start = gaussian_vector(&mut rng, d);
    let test_point = gaussian_vector(&mut rng, d);
    let mu = problem.mu();
    Ok(ProblemInstance {
        spec: InstanceSpec::AdditiveComposite { d },
        seed,
        problem,
        reference: Some(Reference {
            inf_value,
            minimizer: Some(x_star),
            method: "fast gradient, subgradient residual 1e-11",
        }),
        start,
        test_point,
        planted: None,
        rho: mu,
        r: mu,
    })
}

/// `min ‖c(x)‖₂` over `[−1, 1]^d` with quadratic `c` vanishing at a planted
/// interior point.
pub fn make_nls_box(d: usize, m: usize, seed: u64) -> Result<ProblemInstance> {
    check_dims(d, m)?;
    let mut rng = seeded(seed);
    let planted = uniform_vector(&mut rng, d, -0.5, 0.5);
    let a = gaussian_matrix(&mut rng, m, d) / (d as f64).sqrt();
    let hessians: Vec<Matrix> =
        (0..m).map(|_| sym(&gaussian_matrix(&mut rng, d, d)) * (0.5 / (d as f64).sqrt())).collect();
    // c_i(x) = ⟨a_i, x − x♮⟩ + ½(x − x♮)ᵀB_i(x − x♮), expanded in x.
    let mut linear = a.clone();
    let mut offset = Vector::zeros(m);
    for (i, b) in hessians.iter().enumerate() {
        let bx = b * &planted;
        for k in 0..d {
            linear[(i, k)] -= bx[k];
        }
        offset[i] = -a.row(i).transpose().dot(&planted) + 0.5 * planted.dot(&bx);
    }
    let c = QuadraticMap::new(linear, hessians, offset, Some((d as f64).sqrt()));
    let problem = CompositeProblem::new(
        Arc::new(BoxIndicator::uniform(d, -1.0, 1.0)),
        Arc::new(L2Norm { weight: 1.0 }),
        Arc::new(c),
    )?;
    let start = uniform_vector(&mut rng, d, -1.0, 1.0);
    let test_point = uniform_vector(&mut rng, d, -1.0, 1.0);
    let mu = problem.mu();
    Ok(ProblemInstance {
        spec: InstanceSpec::NlsBox { d, m },
        seed,
        problem,
        reference: Some(Reference {
            inf_value: 0.0,
            minimizer: Some(planted.clone()),
            method: "planted zero residual",
        }),
        start,
        test_point,
        planted: Some(planted),
        rho: mu,
        r: mu,
    })
}

/// `(1/m)Σ|⟨a_i, x⟩² − b_i|` with unit rows `a_i` and `b_i = ⟨a_i, x♮⟩²`.
pub fn make_phase_retrieval(d: usize, m: usize, seed: u64) -> Result<ProblemInstance> {
    check_dims(d, m)?;
    let mut rng = seeded(seed);
    let (a, planted, b) = phase_retrieval_data(&mut rng, d, m);
    let c = PhaseRetrievalMap::new(a, b, None);
    let problem = CompositeProblem::new(Arc::new(Zero), Arc::new(L1Norm::new(1.0 / m as f64, m)), Arc::new(c))?;
    let start = unit_vector(&mut rng, d);
    let test_point = gaussian_vector(&mut rng, d);
    let mu = problem.mu();
    Ok(ProblemInstance {
        spec: InstanceSpec::PhaseRetrieval { d, m },
        seed,
        problem,
        reference: Some(Reference { inf_value: 0.0, minimizer: Some(planted.clone()), method: "planted signal" }),
        start,
        test_point,
        planted: Some(planted),
        rho: mu,
        r: mu,
    })
}

/// Unit measurement rows, a unit planted signal and noiseless measurements.
pub fn phase_retrieval_data(rng: &mut impl Rng, d: usize, m: usize) -> (Matrix, Vector, Vector) {
    let mut a = Matrix::zeros(m, d);
    for i in 0..m {
        let row = unit_vector(rng, d);
        for k in 0..d {
            a[(i, k)] = row[k];
        }
    }
    let planted = unit_vector(rng, d);
    let ax = &a * &planted;
    let b = ax.map(|v| v * v);
    (a, planted, b)
}

/// `f(x) + λ·dist(G(x), R^m_+)` with convex quadratic `f` and concave
/// quadratic constraints `G_j(x) = 1 + ⟨u_j, x⟩ − (κ_j/2)‖x‖²`.
pub fn make_exact_penalty(d: usize, m: usize, lambda: f64, seed: u64) -> Result<ProblemInstance> {
    check_dims(d, m)?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("penalty weight {lambda}")));
    }
    let mut rng = seeded(seed);
    let base = gaussian_matrix(&mut rng, d, d) / (d as f64).sqrt();
    let q_mat = base.transpose() * &base + Matrix::identity(d, d) * 0.1;
    let q = gaussian_vector(&mut rng, d);
    let mut linear = Matrix::zeros(m + 1, d);
    let mut hessians = vec![q_mat];
    let mut offset = Vector::zeros(m + 1);
    for k in 0..d {
        linear[(0, k)] = q[k];
    }
    for j in 0..m {
        let u = gaussian_vector(&mut rng, d) * 0.5;
        for k in 0..d {
            linear[(j + 1, k)] = u[k];
        }
        let kappa = rng.gen_range(0.5..1.5);
        hessians.push(Matrix::identity(d, d) * -kappa);
        offset[j + 1] = 1.0;
    }
    let c = QuadraticMap::new(linear, hessians, offset, None);
    let h = BlockSeparable::new(vec![
        (Arc::new(Identity) as Arc<dyn ProxFunction>, 1),
        (Arc::new(DistToNonnegOrthant { weight: lambda }), m),
    ]);
    let problem = CompositeProblem::new(Arc::new(Zero), Arc::new(h), Arc::new(c))?;
    let start = gaussian_vector(&mut rng, d);
    let test_point = gaussian_vector(&mut rng, d);
    let mu = problem.mu();
    Ok(ProblemInstance {
        spec: InstanceSpec::ExactPenalty { d, m, lambda },
        seed,
        problem,
        reference: None,
        start,
        test_point,
        planted: None,
        rho: mu,
        r: mu,
    })
}

/// Largest subset count enumerated for the LAD vertex reference.
const MAX_VERTEX_SUBSETS: u64 = 200_000;

/// `‖Ax − b‖₁` with a quarter of the measurements corrupted.
pub fn make_lad(d: usize, m: usize, seed: u64) -> Result<ProblemInstance> {
    check_dims(d, m)?;
    if m < d {
        return Err(Error::InvalidParameter(format!("LAD needs m >= d, got m={m}, d={d}")));
    }
    let mut rng = seeded(seed);
    let a = gaussian_matrix(&mut rng, m, d);
    let planted = gaussian_vector(&mut rng, d);
    let mut b = &a * &planted;
    for i in 0..m {
        if rng.gen_bool(0.25) {
            b[i] += 3.0 * rng.sample::<f64, _>(rand_distr::StandardNormal);
        }
    }
    let c = AffineMap::new(a.clone(), -b.clone());
    let problem = CompositeProblem::new(Arc::new(Zero), Arc::new(L1Norm::new(1.0, m)), Arc::new(c))?;
    let reference = lad_vertex_reference(&a, &b);
    let start = gaussian_vector(&mut rng, d);
    let test_point = gaussian_vector(&mut rng, d);
    Ok(ProblemInstance {
        spec: InstanceSpec::Lad { d, m },
        seed,
        problem,
        reference,
        start,
        test_point,
        planted: Some(planted),
        rho: 0.0,
        r: 0.0,
    })
}

fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u64) / (i as u64 + 1);
    }
    acc
}

/// Minimum of `‖Ax − b‖₁` over the vertices `A_S x = b_S`, |S| = d; an
/// optimal vertex exists whenever `A` has full column rank.
pub fn lad_vertex_reference(a: &Matrix, b: &Vector) -> Option<Reference> {
    let (m, d) = a.shape();
    if binomial(m, d) > MAX_VERTEX_SUBSETS {
        return None;
    }
    let mut idx: Vec<usize> = (0..d).collect();
    let mut best: Option<(f64, Vector)> = None;
    loop {
        let sub = Matrix::from_fn(d, d, |r, col| a[(idx[r], col)]);
        let rhs = Vector::from_fn(d, |r, _| b[idx[r]]);
        let lu = sub.lu();
        if lu.determinant().abs() > 1e-10 {
            if let Some(x) = lu.solve(&rhs) {
                let val = (a * &x - b).lp_norm(1);
                if best.as_ref().is_none_or(|(v, _)| val < *v) {
                    best = Some((val, x));
                }
            }
        }
        // Next combination in lexicographic order.
        let mut i = d;
        loop {
            if i == 0 {
                return best.map(|(inf_value, x)| Reference {
                    inf_value,
                    minimizer: Some(x),
                    method: "vertex enumeration",
                });
            }
            i -= 1;
            if idx[i] < m - d + i {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..d {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// `f(x) = |x² − 1|` with `L = 1`, `β = 2`, started at `x₀ = 2`.
pub fn make_pathology() -> Result<ProblemInstance> {
    let c = PhaseRetrievalMap::new(Matrix::from_element(1, 1, 1.0), Vector::from_element(1, 1.0), None);
    let problem = CompositeProblem::new(Arc::new(Zero), Arc::new(L1Norm::new(1.0, 1)), Arc::new(c))?;
    let mu = problem.mu();
    Ok(ProblemInstance {
        spec: InstanceSpec::Pathology,
        seed: 0,
        problem,
        reference: Some(Reference {
            inf_value: 0.0,
            minimizer: Some(Vector::from_element(1, 1.0)),
            method: "closed form",
        }),
        start: Vector::from_element(1, 2.0),
        test_point: Vector::from_element(1, 1.1),
        planted: None,
        rho: mu,
        r: mu,
    })
}

/// One desk-scale instance of every generator.
pub fn zoo(seed: u64) -> Result<Vec<ProblemInstance>> {
    [
        InstanceSpec::AdditiveComposite { d: 5 },
        InstanceSpec::NlsBox { d: 4, m: 6 },
        InstanceSpec::PhaseRetrieval { d: 5, m: 10 },
        InstanceSpec::ExactPenalty { d: 4, m: 2, lambda: 2.0 },
        InstanceSpec::Lad { d: 3, m: 12 },
        InstanceSpec::Pathology,
    ]
    .iter()
    .map(|s| s.build(seed))
    .collect()
}

fn check_dims(d: usize, m: usize) -> Result<()> {
    if d == 0 || m == 0 {
        return Err(Error::InvalidParameter(format!("dimensions must be positive, got d={d}, m={m}")));
    }
    Ok(())
}

/// Largest observed ratios of difference quotients to declared constants.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ConstantProbe {
    pub lipschitz_ratio: f64,
    pub beta_ratio: f64,
    pub opnorm_ratio: f64,
}

impl ConstantProbe {
    /// True when no probe exceeded its declared constant (with `slack`).
    pub fn holds(&self, slack: f64) -> bool {
        self.lipschitz_ratio <= 1.0 + slack && self.beta_ratio <= 1.0 + slack && self.opnorm_ratio <= 1.0 + slack
    }
}

/// Difference-quotient probes of `L`, `β` and `‖∇c‖` at points sampled in a
/// box of half-width `radius` around the start, projected onto `dom g`.
pub fn probe_constants(inst: &ProblemInstance, n_probes: usize, radius: f64, seed: u64) -> ConstantProbe {
    let p = &inst.problem;
    let mut rng = seeded(seed);
    let mut out = ConstantProbe::default();
    let ratio = |observed: f64, declared: f64| -> f64 {
        if declared > 0.0 {
            observed / declared
        } else if observed > 1e-12 {
            f64::INFINITY
        } else {
            0.0
        }
    };
    for _ in 0..n_probes {
        let x = inst.sample_point(&mut rng, radius);
        let y = inst.sample_point(&mut rng, radius);
        let dx = (&x - &y).norm();
        if dx < 1e-12 {
            continue;
        }
        let cx = p.c().eval(&x);
        let z = &cx + uniform_vector(&mut rng, cx.len(), -1.0, 1.0);
        let dz = (&cx - &z).norm();
        if dz > 1e-12 {
            let q = (p.h().value(&cx) - p.h().value(&z)).abs() / dz;
            out.lipschitz_ratio = out.lipschitz_ratio.max(ratio(q, p.lipschitz()));
        }
        let jx = p.c().jacobian(&x);
        let jy = p.c().jacobian(&y);
        let q = spectral_norm(&(&jx - &jy)) / dx;
        out.beta_ratio = out.beta_ratio.max(ratio(q, p.beta()));
        if p.opnorm_bound().is_finite() {
            out.opnorm_ratio = out.opnorm_ratio.max(ratio(spectral_norm(&jx), p.opnorm_bound()));
        }
    }
    out
}
