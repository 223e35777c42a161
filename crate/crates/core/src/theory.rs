//! Numerical checks of the convex regret bound and its supporting lemma,
//! the ε-placement Taylor argument, and two algebraic identities between
//! update rules.
//!
//! Every check is a pure function over a recorded run so results are
//! reproducible from the seed alone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyper::{HyperParams, Schedule};
use crate::problems::{project_to_ball, Problem};
use crate::rng::CounterRng;
use crate::rules::{adabelief_step, adam_star_step, set_adam_step, AdaBeliefForm};
use crate::state::{GradientSnapshot, LayerPartition, ModelParams, MomentState};

/// Relative slack for comparisons that hold with equality in exact arithmetic.
const ULP_SLACK: f64 = 4.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// Assumptions did not hold, so nothing was asserted.
    Vacuous,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn is_failure(self) -> bool {
        self == Verdict::Fail
    }
}

/// Hyperparameters for the analysed setting: `η_t = η/√t`,
/// `β_{1t} = β1 λ^{t-1}`, and no first-moment bias correction.
pub fn theoretical_hyperparams(eta: f64, beta1: f64, beta2: f64, lambda: f64, epsilon: f64, tau: f64) -> HyperParams {
    HyperParams {
        eta,
        schedule: Schedule::InverseSqrt,
        beta1,
        beta2,
        lambda,
        epsilon,
        tau,
        first_moment_bias_correction: false,
        ..Default::default()
    }
}

/// A completed projected SET-Adam run on a convex problem with known optimum.
///
/// Histories are indexed by step: entry `k` holds the quantity for step
/// `t = k + 1`, except `iterates[k]`, which is `θ_k` (the point at which
/// `gradients[k]` was evaluated).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremInstance {
    pub hp: HyperParams,
    pub horizon: usize,
    pub radius: f64,
    pub convex: bool,
    pub theta_star: Vec<f64>,
    pub iterates: Vec<Vec<f64>>,
    pub final_theta: Vec<f64>,
    pub gradients: Vec<Vec<f64>>,
    pub moments: Vec<Vec<f64>>,
    pub denoms: Vec<Vec<f64>>,
    pub etas: Vec<f64>,
    /// `f(θ̄_T) - f(θ*)` with `θ̄_T` the mean of `θ_0 … θ_{T-1}`.
    pub gap: f64,
}

impl TheoremInstance {
    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    /// `Σ_i ‖(g_1[i]², …, g_T[i]²)‖₂`.
    pub fn sum_sq_grad_norms(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.gradients.iter().map(|g| g[i].powi(4)).sum::<f64>().sqrt())
            .sum()
    }
}

pub fn average_iterate(iterates: &[Vec<f64>]) -> Vec<f64> {
    let n = iterates.len() as f64;
    let d = iterates.first().map_or(0, Vec::len);
    (0..d).map(|i| iterates.iter().map(|x| x[i]).sum::<f64>() / n).collect()
}

/// Run `horizon` projected SET-Adam steps with full gradients from `theta0`.
pub fn run_theorem_instance(
    problem: &dyn Problem,
    hp: &HyperParams,
    horizon: usize,
    radius: f64,
    theta0: &[f64],
) -> Result<TheoremInstance> {
    if horizon == 0 {
        return Err(Error::ZeroIteration("theorem horizon"));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Problem(format!(
            "projection radius must be positive, got {radius}"
        )));
    }
    if hp.schedule != Schedule::InverseSqrt || hp.first_moment_bias_correction {
        return Err(Error::HyperParam {
            name: "schedule",
            reason: "theoretical mode needs the inverse-sqrt schedule without first-moment bias correction".into(),
        });
    }
    if hp.epsilon <= 0.0 {
        return Err(Error::HyperParam {
            name: "epsilon",
            reason: "theoretical mode needs epsilon > 0".into(),
        });
    }
    hp.validate()?;
    let optimum = problem
        .optimum()
        .ok_or_else(|| Error::Problem(format!("{} has no known optimum", problem.name())))?;
    let partition = problem.partition().clone();
    let mut start = theta0.to_vec();
    project_to_ball(&mut start, radius);
    let mut params = ModelParams::new(start, partition)?;
    let mut state = MomentState::new(params.dim());

    let mut iterates = Vec::with_capacity(horizon);
    let mut gradients = Vec::with_capacity(horizon);
    let mut moments = Vec::with_capacity(horizon);
    let mut denoms = Vec::with_capacity(horizon);
    let mut etas = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        iterates.push(params.values.clone());
        let g = problem.gradient(&params.values, None);
        let out = set_adam_step(&mut params, &g, &mut state, hp, 0)?;
        project_to_ball(&mut params.values, radius);
        gradients.push(g.values);
        moments.push(state.first.clone());
        denoms.push(out.denom);
        etas.push(out.eta_t);
    }
    let f_star = problem.loss(&optimum.theta);
    let gap = problem.loss(&average_iterate(&iterates)) - f_star;
    Ok(TheoremInstance {
        hp: hp.clone(),
        horizon,
        radius,
        convex: problem.is_convex(),
        theta_star: optimum.theta,
        iterates,
        final_theta: params.values,
        gradients,
        moments,
        denoms,
        etas,
        gap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub convex: bool,
    /// Smallest `G∞` with `‖g_t‖∞ ≤ G∞ √(1-β2)` over the run.
    pub g_inf: f64,
    pub max_iterate_l2: f64,
    pub max_iterate_linf: f64,
    pub theta_star_l2: f64,
    pub theta_star_linf: f64,
    pub bounded: bool,
    pub monotonicity_pairs: usize,
    pub monotonicity_violations: usize,
    pub violation_fraction: f64,
    /// `(min_{i,t} w̃_t[i])²`.
    pub c: f64,
    /// `(1-τ)² ε`, the floor implied by down-translation.
    pub c_floor: f64,
    pub holds: bool,
}

fn l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn linf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Scan the run for the three theorem assumptions. Never fails; the
/// `holds` flag gates the bound checks.
pub fn check_assumptions(inst: &TheoremInstance) -> AssumptionReport {
    let hp = &inst.hp;
    let g_max = inst.gradients.iter().map(|g| linf(g)).fold(0.0, f64::max);
    let g_inf = g_max / (1.0 - hp.beta2).sqrt();

    let points = inst.iterates.iter().chain(std::iter::once(&inst.final_theta));
    let (max_l2, max_linf) = points.fold((0.0f64, 0.0f64), |(a, b), x| (a.max(l2(x)), b.max(linf(x))));
    let star_l2 = l2(&inst.theta_star);
    let star_linf = linf(&inst.theta_star);
    let d_tol = inst.radius * (1.0 + ULP_SLACK);
    let bounded = max_l2 <= d_tol && max_linf <= d_tol && star_l2 <= d_tol && star_linf <= d_tol;

    let mut pairs = 0;
    let mut violations = 0;
    for w in inst.denoms.windows(2) {
        for (now, prev) in w[1].iter().zip(&w[0]) {
            pairs += 1;
            if *now > prev * (1.0 + ULP_SLACK) {
                violations += 1;
            }
        }
    }
    let w_min = inst.denoms.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let c = if w_min.is_finite() { w_min * w_min } else { 0.0 };
    let violation_fraction = if pairs == 0 {
        0.0
    } else {
        violations as f64 / pairs as f64
    };
    AssumptionReport {
        convex: inst.convex,
        g_inf,
        max_iterate_l2: max_l2,
        max_iterate_linf: max_linf,
        theta_star_l2: star_l2,
        theta_star_linf: star_linf,
        bounded,
        monotonicity_pairs: pairs,
        monotonicity_violations: violations,
        violation_fraction,
        c,
        c_floor: (1.0 - hp.tau).powi(2) * hp.epsilon,
        holds: inst.convex && bounded && violations == 0 && c > 0.0,
    }
}

/// Constants entering the regret bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub dim: usize,
    pub radius: f64,
    pub g_inf: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub beta1: f64,
    pub lambda: f64,
    pub c: f64,
    pub horizon: usize,
    pub sum_sq_grad_norms: f64,
}

impl BoundInputs {
    pub fn from_run(inst: &TheoremInstance, report: &AssumptionReport) -> Self {
        Self {
            dim: inst.dim(),
            radius: inst.radius,
            g_inf: report.g_inf,
            epsilon: inst.hp.epsilon,
            eta: inst.hp.eta,
            beta1: inst.hp.beta1,
            lambda: inst.hp.lambda,
            c: report.c,
            horizon: inst.horizon,
            sum_sq_grad_norms: inst.sum_sq_grad_norms(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundTerms {
    /// Initial-distance term, decays as `1/T`.
    pub distance: f64,
    /// Stepsize-schedule term, decays as `1/√T`.
    pub schedule: f64,
    /// Gradient-budget term.
    pub gradient: f64,
    /// Momentum-decay term, carries `1/(1-λ)²`.
    pub momentum: f64,
    pub total: f64,
}

/// Right-hand side of the averaged-iterate regret bound, term by term.
pub fn regret_bound_rhs(b: &BoundInputs) -> Result<BoundTerms> {
    if b.lambda >= 1.0 {
        return Err(Error::UndefinedBound(format!(
            "lambda = {} makes the (1 - lambda)^2 denominator of the momentum term vanish; need lambda < 1",
            b.lambda
        )));
    }
    if b.horizon == 0 {
        return Err(Error::ZeroIteration("bound horizon"));
    }
    if b.beta1 >= 1.0 || b.eta <= 0.0 {
        return Err(Error::UndefinedBound("need beta1 < 1 and eta > 0".into()));
    }
    let t = b.horizon as f64;
    let one_b1 = 1.0 - b.beta1;
    let spread = 2.0 * b.radius * b.radius * b.dim as f64 * (b.g_inf + b.epsilon.sqrt());
    let distance = spread / (b.eta * one_b1 * t);
    let schedule = spread / (t.sqrt() * one_b1 * b.eta);
    let gradient = if b.sum_sq_grad_norms == 0.0 {
        0.0
    } else {
        if b.c <= 0.0 {
            return Err(Error::UndefinedBound("c must be positive".into()));
        }
        (1.0 + b.beta1) * b.eta * (1.0 + t.ln()).sqrt() / (2.0 * b.c.sqrt() * one_b1.powi(3) * t) * b.sum_sq_grad_norms
    };
    let momentum = spread * b.beta1 / (one_b1 * (1.0 - b.lambda).powi(2) * b.eta * t);
    Ok(BoundTerms {
        distance,
        schedule,
        gradient,
        momentum,
        total: distance + schedule + gradient + momentum,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub verdict: Verdict,
    pub horizon: usize,
    pub gap: f64,
    pub bound: BoundTerms,
    /// `RHS - gap`.
    pub margin: f64,
    pub assumptions: AssumptionReport,
}

/// Check `f(θ̄_T) - f(θ*) ≤ RHS`. Vacuous when any assumption fails.
pub fn verify_regret(inst: &TheoremInstance) -> Result<RegretReport> {
    let assumptions = check_assumptions(inst);
    let bound = regret_bound_rhs(&BoundInputs::from_run(inst, &assumptions))?;
    let verdict = if assumptions.holds {
        Verdict::from_bool(inst.gap <= bound.total)
    } else {
        Verdict::Vacuous
    };
    Ok(RegretReport {
        verdict,
        horizon: inst.horizon,
        gap: inst.gap,
        margin: bound.total - inst.gap,
        bound,
        assumptions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Report {
    pub verdict: Verdict,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

/// Lemma-style check `Σ_t η_t Σ_i m_t[i]² / w̃_{t+1}[i] ≤
/// η √(1 + ln T) / (√c (1-β1)²) · Σ_i ‖g²_{1:T}[i]‖₂`, taking
/// `w̃_{T+1} = w̃_T`.
pub fn verify_lemma1(inst: &TheoremInstance, report: &AssumptionReport) -> Lemma1Report {
    let t_max = inst.horizon;
    let mut lhs = 0.0;
    for k in 0..t_max {
        let next = &inst.denoms[(k + 1).min(t_max - 1)];
        let s: f64 = inst.moments[k].iter().zip(next).map(|(m, w)| m * m / w).sum();
        lhs += inst.etas[k] * s;
    }
    let sum = inst.sum_sq_grad_norms();
    let rhs = if sum == 0.0 {
        0.0
    } else {
        inst.hp.eta * (1.0 + (t_max as f64).ln()).sqrt() / (report.c.sqrt() * (1.0 - inst.hp.beta1).powi(2)) * sum
    };
    let verdict = if report.holds {
        Verdict::from_bool(lhs <= rhs * (1.0 + ULP_SLACK))
    } else {
        Verdict::Vacuous
    };
    Lemma1Report {
        verdict,
        lhs,
        rhs,
        margin: rhs - lhs,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorReport {
    /// Largest relative error of the first-order form over coordinates with
    /// a positive second moment.
    pub max_rel_error: f64,
    /// Whether `ε ≤ 0.01 · min_i a[i]`, where the 1% error bound is asserted.
    pub error_bound_applies: bool,
    /// `max/min` of `1/√(a+ε)`.
    pub spread_inside: f64,
    /// `max/min` of `1/(√a+ε)`.
    pub spread_outside: f64,
    /// `max/min` of `1/√a`.
    pub spread_raw: f64,
    /// Whether `(x+y)(1-ε) + 2ε ≥ 2xy` with `x = √a_max`, `y = √a_min`; this
    /// is exactly when the ε-inside spread cannot exceed the ε-outside one.
    pub outside_comparison_applies: bool,
    pub passed: bool,
}

fn spread(xs: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = xs.fold((f64::INFINITY, 0.0f64), |(lo, hi), x| (lo.min(x), hi.max(x)));
    hi / lo
}

/// Compare exact ε-inside stepsizes with their first-order expansion and
/// with ε-outside and ε-free stepsizes.
pub fn verify_taylor_suppression(v: &[f64], t: u64, beta2: f64, epsilon: f64) -> Result<TaylorReport> {
    if v.is_empty() {
        return Err(Error::EmptyLayer);
    }
    if t == 0 {
        return Err(Error::ZeroIteration("taylor check"));
    }
    if let Some(i) = v.iter().position(|x| !(*x >= 0.0 && x.is_finite())) {
        return Err(Error::NegativeEntry { index: i, value: v[i] });
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::HyperParam {
            name: "epsilon",
            reason: format!("must be >= 0, got {epsilon}"),
        });
    }
    let bc = 1.0 - beta2.powi(t.min(i32::MAX as u64) as i32);
    let a: Vec<f64> = v.iter().map(|x| x / bc).collect();

    let mut max_rel_error: f64 = 0.0;
    for &ai in a.iter().filter(|&&ai| ai > 0.0) {
        let exact = 1.0 / (ai + epsilon).sqrt();
        let r = ai.sqrt();
        let approx = 1.0 / (r + epsilon / (2.0 * r));
        max_rel_error = max_rel_error.max((approx - exact).abs() / exact);
    }
    let a_min = a.iter().copied().fold(f64::INFINITY, f64::min);
    let a_max = a.iter().copied().fold(0.0, f64::max);
    let error_bound_applies = epsilon <= 0.01 * a_min;

    let spread_inside = spread(a.iter().map(|x| 1.0 / (x + epsilon).sqrt()));
    let spread_outside = spread(a.iter().map(|x| 1.0 / (x.sqrt() + epsilon)));
    let spread_raw = spread(a.iter().map(|x| 1.0 / x.sqrt()));
    let (x, y) = (a_max.sqrt(), a_min.sqrt());
    let outside_comparison_applies = (x + y) * (1.0 - epsilon) + 2.0 * epsilon >= 2.0 * x * y;

    let tol = 1.0 + ULP_SLACK;
    let error_ok = !error_bound_applies || max_rel_error <= 0.01;
    let raw_ok = spread_raw.is_nan() || spread_inside <= spread_raw * tol;
    let outside_ok = !outside_comparison_applies || spread_inside <= spread_outside * tol;
    Ok(TaylorReport {
        max_rel_error,
        error_bound_applies,
        spread_inside,
        spread_outside,
        spread_raw,
        outside_comparison_applies,
        passed: error_ok && raw_ok && outside_ok,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub verdict: Verdict,
    pub steps: usize,
    pub dim: usize,
    pub seed: u64,
    pub max_deviation: f64,
    pub tolerance: f64,
}

fn gradient_stream(seed: u64, dim: usize) -> impl FnMut() -> GradientSnapshot {
    let mut rng = CounterRng::new(seed).stream(0x00AD_A61E);
    move || GradientSnapshot::new((0..dim).map(|_| rng.next_normal()).collect())
}

/// Max absolute trajectory deviation between the two AdaBelief forms on one
/// random gradient stream.
pub fn verify_adabelief_identity(steps: usize, dim: usize, seed: u64, hp: &HyperParams) -> Result<TrajectoryReport> {
    let partition = LayerPartition::single(dim)?;
    let mut a = ModelParams::zeros(partition);
    let mut b = a.clone();
    let (mut sa, mut sb) = (MomentState::new(dim), MomentState::new(dim));
    let mut next = gradient_stream(seed, dim);
    let mut dev: f64 = 0.0;
    for _ in 0..steps {
        let g = next();
        adabelief_step(&mut a, &g, &mut sa, hp, 0, AdaBeliefForm::Original)?;
        adabelief_step(&mut b, &g, &mut sb, hp, 0, AdaBeliefForm::Reformulated)?;
        dev = a
            .values
            .iter()
            .zip(&b.values)
            .fold(dev, |m, (x, y)| m.max((x - y).abs()));
    }
    let tolerance = 1e-10;
    Ok(TrajectoryReport {
        verdict: Verdict::from_bool(dev <= tolerance),
        steps,
        dim,
        seed,
        max_deviation: dev,
        tolerance,
    })
}

/// Max relative deviation between SET-Adam with `γ ≡ 1`, `τ = 0` and Adam*
/// on one random gradient stream, starting from the same random point. The
/// parameters are split into up to five layers.
pub fn verify_equivalence(steps: usize, dim: usize, seed: u64) -> Result<TrajectoryReport> {
    let layers = dim.clamp(1, 5);
    let sizes: Vec<usize> = (0..layers)
        .map(|l| dim / layers + usize::from(l < dim % layers))
        .collect();
    let partition = LayerPartition::new(&sizes)?;
    let mut rng = CounterRng::new(seed);
    let start: Vec<f64> = (0..dim).map(|_| rng.next_normal()).collect();
    let mut a = ModelParams::new(start, partition)?;
    let mut b = a.clone();
    let hp_set = HyperParams {
        eta: 1e-3,
        epsilon: 1e-8,
        tau: 0.0,
        cos_exponent: 0,
        ..Default::default()
    };
    let hp_star = HyperParams {
        tau: 0.5,
        cos_exponent: 2,
        ..hp_set.clone()
    };
    let (mut sa, mut sb) = (MomentState::new(dim), MomentState::new(dim));
    let mut next = gradient_stream(seed, dim);
    let mut dev: f64 = 0.0;
    for _ in 0..steps {
        let g = next();
        set_adam_step(&mut a, &g, &mut sa, &hp_set, 0)?;
        adam_star_step(&mut b, &g, &mut sb, &hp_star, 0)?;
        dev = a
            .values
            .iter()
            .zip(&b.values)
            .fold(dev, |m, (x, y)| m.max((x - y).abs() / y.abs().max(f64::MIN_POSITIVE)));
    }
    let tolerance = 1e-12;
    Ok(TrajectoryReport {
        verdict: Verdict::from_bool(dev <= tolerance),
        steps,
        dim,
        seed,
        max_deviation: dev,
        tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{QuadraticProblem, SpdMatrix};

    fn quad_1d(a: f64, star: f64) -> QuadraticProblem {
        QuadraticProblem::new(SpdMatrix::Diagonal(vec![a]), vec![a * star]).unwrap()
    }

    fn hp() -> HyperParams {
        theoretical_hyperparams(0.1, 0.9, 0.999, 0.5, 1e-5, 0.5)
    }

    #[test]
    fn one_dim_quadratic_regret() {
        let q = quad_1d(1.0, 0.0);
        let inst = run_theorem_instance(&q, &hp(), 10_000, 2.0, &[1.0]).unwrap();
        assert_eq!(inst.iterates.len(), 10_000);
        assert_eq!(inst.denoms.len(), 10_000);
        let r = verify_regret(&inst).unwrap();
        assert!(r.assumptions.holds, "{:?}", r.assumptions);
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.gap < 1e-2 && r.gap >= 0.0, "{}", r.gap);
        let l = verify_lemma1(&inst, &r.assumptions);
        assert_eq!(l.verdict, Verdict::Pass);
        assert!(l.margin > 0.0);
    }

    #[test]
    fn start_at_optimum_has_zero_gap() {
        let q = quad_1d(3.0, 0.5);
        let inst = run_theorem_instance(&q, &hp(), 100, 2.0, &[0.5]).unwrap();
        assert_eq!(inst.gap, 0.0);
        let r = verify_regret(&inst).unwrap();
        assert!(r.margin > 0.0);
        let l = verify_lemma1(&inst, &r.assumptions);
        assert_eq!((l.lhs, l.rhs), (0.0, 0.0));
    }

    #[test]
    fn c_respects_translation_floor() {
        let q = quad_1d(1.0, 0.0);
        let inst = run_theorem_instance(&q, &hp(), 2_000, 2.0, &[1.0]).unwrap();
        let r = check_assumptions(&inst);
        assert!(r.c >= 0.25 * 1e-5 * (1.0 - 1e-12));
        assert_eq!(r.c_floor, 0.25 * 1e-5);
    }

    #[test]
    fn optimum_outside_ball_is_vacuous() {
        let q = quad_1d(1.0, 5.0);
        let inst = run_theorem_instance(&q, &hp(), 200, 2.0, &[0.0]).unwrap();
        let r = verify_regret(&inst).unwrap();
        assert!(!r.assumptions.bounded);
        assert_eq!(r.verdict, Verdict::Vacuous);
        assert_eq!(verify_lemma1(&inst, &r.assumptions).verdict, Verdict::Vacuous);
    }

    #[test]
    fn growing_denominators_are_vacuous() {
        let q = quad_1d(1.0, 0.0);
        let mut inst = run_theorem_instance(&q, &hp(), 50, 2.0, &[1.0]).unwrap();
        // Forge a history whose gradients grow.
        for (k, g) in inst.gradients.iter_mut().enumerate() {
            g[0] = 1.0 + k as f64;
        }
        for (k, w) in inst.denoms.iter_mut().enumerate() {
            w[0] = 1.0 + k as f64;
        }
        let r = verify_regret(&inst).unwrap();
        assert_eq!(r.assumptions.monotonicity_violations, 49);
        assert_eq!(r.assumptions.violation_fraction, 1.0);
        assert_eq!(r.verdict, Verdict::Vacuous);
    }

    #[test]
    fn constant_denominator_history_has_no_violations() {
        let q = quad_1d(1.0, 0.0);
        let mut inst = run_theorem_instance(&q, &hp(), 30, 2.0, &[1.0]).unwrap();
        for w in &mut inst.denoms {
            w[0] = 0.7;
        }
        assert_eq!(check_assumptions(&inst).monotonicity_violations, 0);
    }

    #[test]
    fn rejects_non_theoretical_settings() {
        let q = quad_1d(1.0, 0.0);
        let mut h = hp();
        h.first_moment_bias_correction = true;
        assert!(run_theorem_instance(&q, &h, 10, 1.0, &[0.5]).is_err());
        assert!(run_theorem_instance(&q, &hp(), 0, 1.0, &[0.5]).is_err());
        assert!(run_theorem_instance(&q, &hp(), 10, 0.0, &[0.5]).is_err());
    }

    fn inputs(horizon: usize, sum: f64) -> BoundInputs {
        BoundInputs {
            dim: 1,
            radius: 1.0,
            g_inf: 1.0,
            epsilon: 0.0,
            eta: 1.0,
            beta1: 0.0,
            lambda: 0.3,
            c: 0.25,
            horizon,
            sum_sq_grad_norms: sum,
        }
    }

    #[test]
    fn bound_with_unit_constants() {
        for t in [1usize, 10, 100, 12345] {
            let b = regret_bound_rhs(&inputs(t, 3.0)).unwrap();
            let tf = t as f64;
            let expected = 2.0 / tf + 2.0 / tf.sqrt() + (1.0 + tf.ln()).sqrt() / (2.0 * 0.5 * tf) * 3.0;
            assert!((b.total - expected).abs() <= 1e-14 * expected);
            assert_eq!(b.momentum, 0.0);
        }
    }

    #[test]
    fn zero_gradients_leave_distance_terms() {
        let mut i = inputs(100, 0.0);
        i.beta1 = 0.9;
        i.c = 0.0;
        let b = regret_bound_rhs(&i).unwrap();
        assert_eq!(b.gradient, 0.0);
        assert_eq!(b.total, b.distance + b.schedule + b.momentum);
    }

    #[test]
    fn lambda_one_rejected() {
        let mut i = inputs(100, 1.0);
        i.lambda = 1.0;
        let err = regret_bound_rhs(&i).unwrap_err();
        assert!(err.to_string().contains("(1 - lambda)^2"), "{err}");
    }

    #[test]
    fn schedule_term_dominates_for_long_horizons() {
        let mut i = inputs(100, 0.0);
        i.beta1 = 0.9;
        i.lambda = 0.5;
        i.eta = 0.1;
        let short = regret_bound_rhs(&i).unwrap();
        i.horizon = 1_000_000;
        let long = regret_bound_rhs(&i).unwrap();
        assert!(long.schedule > 100.0 * (long.distance + long.momentum));
        assert!(short.schedule / long.schedule > 99.0);
    }

    #[test]
    fn bound_nonincreasing_with_constant_gradient_budget() {
        let mut prev = f64::INFINITY;
        for t in [100usize, 1_000, 10_000] {
            // Constant per-step magnitude: each ‖g²_{1:T}[i]‖₂ grows like √T.
            let mut i = inputs(t, 2.0 * (t as f64).sqrt());
            i.beta1 = 0.9;
            let b = regret_bound_rhs(&i).unwrap();
            assert!(b.total <= prev);
            prev = b.total;
        }
    }

    #[test]
    fn lemma_rhs_grows_with_beta1() {
        let q = quad_1d(1.0, 0.0);
        let small = run_theorem_instance(&q, &hp(), 100, 2.0, &[1.0]).unwrap();
        let mut h = hp();
        h.beta1 = 0.999;
        let big = run_theorem_instance(&q, &h, 100, 2.0, &[1.0]).unwrap();
        let (rs, rb) = (check_assumptions(&small), check_assumptions(&big));
        let (ls, lb) = (verify_lemma1(&small, &rs), verify_lemma1(&big, &rb));
        assert!(lb.rhs > 1000.0 * ls.rhs);
        assert!(lb.margin > ls.margin);
    }

    #[test]
    fn taylor_example_pair() {
        let r = verify_taylor_suppression(&[1.0, 100.0], 1, 0.0, 1e-3).unwrap();
        assert!(r.error_bound_applies);
        assert!(r.max_rel_error <= 0.01);
        assert!((r.spread_inside - (100.001f64 / 1.001).sqrt()).abs() < 1e-12);
        assert!((r.spread_raw - 10.0).abs() < 1e-12);
        assert!(r.spread_inside < r.spread_raw);
        // Both entries exceed one, so the ε-outside spread is the smaller one.
        assert!(!r.outside_comparison_applies);
        assert!(r.spread_inside > r.spread_outside);
        assert!(r.passed);
    }

    #[test]
    fn taylor_contraction_below_one() {
        let r = verify_taylor_suppression(&[0.01, 0.5, 1.0], 1, 0.0, 1e-5).unwrap();
        assert!(r.outside_comparison_applies);
        assert!(r.spread_inside <= r.spread_outside);
        assert!(r.passed);
    }

    #[test]
    fn taylor_trivial_cases() {
        let r = verify_taylor_suppression(&[0.3, 4.0, 9.0], 5, 0.9, 0.0).unwrap();
        assert_eq!(r.max_rel_error, 0.0);
        assert_eq!(r.spread_inside, r.spread_outside);
        let r = verify_taylor_suppression(&[2.0; 4], 1, 0.999, 1e-3).unwrap();
        assert_eq!((r.spread_inside, r.spread_outside), (1.0, 1.0));
        assert!(verify_taylor_suppression(&[-1.0], 1, 0.9, 1e-3).is_err());
    }

    #[test]
    fn adabelief_forms_agree() {
        let hp = HyperParams {
            eta: 1e-2,
            epsilon: 1e-8,
            ..Default::default()
        };
        let r = verify_adabelief_identity(200, 20, 1, &hp).unwrap();
        assert_eq!(r.verdict, Verdict::Pass, "{}", r.max_deviation);
        let hp0 = HyperParams { beta2: 0.0, ..hp };
        assert_eq!(
            verify_adabelief_identity(50, 5, 2, &hp0).unwrap().verdict,
            Verdict::Pass
        );
    }

    #[test]
    fn degenerate_set_adam_matches_adam_star() {
        let r = verify_equivalence(100, 50, 3).unwrap();
        assert_eq!(r.verdict, Verdict::Pass, "{}", r.max_deviation);
    }

    #[test]
    fn reports_serialize() {
        let q = quad_1d(1.0, 0.0);
        let inst = run_theorem_instance(&q, &hp(), 100, 2.0, &[1.0]).unwrap();
        let r = verify_regret(&inst).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"verdict\":\"pass\""));
        let back: RegretReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }
}
