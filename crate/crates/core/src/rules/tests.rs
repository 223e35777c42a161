#![allow(clippy::needless_range_loop, clippy::too_many_arguments)]

use super::*;
use crate::hyper::Schedule;
use crate::rng::CounterRng;
use proptest::prelude::*;

fn model(values: Vec<f64>, sizes: &[usize]) -> ModelParams {
    ModelParams::new(values, LayerPartition::new(sizes).unwrap()).unwrap()
}

fn grads(values: Vec<f64>) -> GradientSnapshot {
    GradientSnapshot::new(values)
}

fn random_stream(seed: u64, steps: usize, d: usize, scale: f64) -> Vec<Vec<f64>> {
    let mut rng = CounterRng::new(seed);
    (0..steps)
        .map(|_| (0..d).map(|_| scale * rng.next_normal()).collect())
        .collect()
}

fn rel_dev(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(1e-300))
        .fold(0.0, f64::max)
}

/// Straight transcription of SET-Adam with explicit loops and dot products,
/// written independently of the library's layer helpers.
struct SetAdamOracle {
    sizes: Vec<usize>,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl SetAdamOracle {
    fn step(&mut self, theta: &mut [f64], g: &[f64], eta: f64, b1: f64, b2: f64, eps: f64, tau: f64) {
        self.t += 1;
        for i in 0..theta.len() {
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g[i];
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g[i] * g[i];
        }
        let mut start = 0;
        let mut wt = vec![0.0; theta.len()];
        for &dl in &self.sizes {
            let seg = &self.v[start..start + dl];
            let dot: f64 = seg.iter().sum();
            let nrm2: f64 = seg.iter().map(|x| x * x).sum();
            let cos2 = if nrm2 == 0.0 {
                1.0
            } else {
                dot * dot / (nrm2 * dl as f64)
            };
            let w: Vec<f64> = seg
                .iter()
                .map(|x| (cos2 * x / (1.0 - b2.powi(self.t)) + eps).sqrt())
                .collect();
            let mn = w.iter().cloned().fold(f64::INFINITY, f64::min);
            for k in 0..dl {
                wt[start + k] = w[k] - tau * mn;
            }
            start += dl;
        }
        for i in 0..theta.len() {
            let mhat = self.m[i] / (1.0 - b1.powi(self.t));
            theta[i] -= eta * mhat / wt[i];
        }
    }
}

#[test]
fn set_adam_first_step_constant_gradient() {
    let hp = HyperParams {
        eta: 0.1,
        tau: 0.5,
        epsilon: 1e-300,
        ..Default::default()
    };
    let mut p = model(vec![0.0; 4], &[4]);
    let mut s = MomentState::new(4);
    let out = set_adam_step(&mut p, &grads(vec![1.0; 4]), &mut s, &hp, 0).unwrap();
    for x in &p.values {
        assert!((x + 0.2).abs() < 1e-15, "{x}");
    }
    assert_eq!(out.t, 1);
    assert_eq!(out.gamma, vec![1.0]);

    // General (c, η, τ, ε): Δθ = -η c / ((1-τ) sqrt(c² + ε)).
    let (c, eta, tau, eps) = (0.37, 0.01, 0.3, 1e-3);
    let hp = HyperParams {
        eta,
        tau,
        epsilon: eps,
        ..Default::default()
    };
    let mut p = model(vec![1.0; 3], &[3]);
    let mut s = MomentState::new(3);
    set_adam_step(&mut p, &grads(vec![c; 3]), &mut s, &hp, 0).unwrap();
    let expected = 1.0 - eta * c / ((1.0 - tau) * (c * c + eps).sqrt());
    for x in &p.values {
        assert!((x - expected).abs() < 1e-15);
    }
}

#[test]
fn set_adam_matches_scalar_transcription() {
    let sizes = [3, 1, 5, 2];
    let d: usize = sizes.iter().sum();
    let hp = HyperParams {
        eta: 0.01,
        epsilon: 1e-5,
        tau: 0.5,
        ..Default::default()
    };
    let mut p = model(vec![0.5; d], &sizes);
    let mut s = MomentState::new(d);
    let mut oracle = SetAdamOracle {
        sizes: sizes.to_vec(),
        m: vec![0.0; d],
        v: vec![0.0; d],
        t: 0,
    };
    let mut theta = vec![0.5; d];
    for g in random_stream(11, 300, d, 0.3) {
        set_adam_step(&mut p, &grads(g.clone()), &mut s, &hp, 0).unwrap();
        oracle.step(&mut theta, &g, hp.eta, hp.beta1, hp.beta2, hp.epsilon, hp.tau);
        assert!(rel_dev(&p.values, &theta) < 1e-12);
    }
}

#[test]
fn set_adam_degenerates_to_adam_star() {
    let sizes = [10, 20, 20];
    let hp_set = HyperParams {
        eta: 0.003,
        epsilon: 1e-6,
        tau: 0.0,
        cos_exponent: 0,
        ..Default::default()
    };
    let hp_star = hp_set.clone();
    let mut a = model(vec![0.1; 50], &sizes);
    let mut b = a.clone();
    let (mut sa, mut sb) = (MomentState::new(50), MomentState::new(50));
    for g in random_stream(4, 100, 50, 1.0) {
        set_adam_step(&mut a, &grads(g.clone()), &mut sa, &hp_set, 0).unwrap();
        adam_star_step(&mut b, &grads(g), &mut sb, &hp_star, 0).unwrap();
        assert!(rel_dev(&a.values, &b.values) <= 1e-12);
    }
}

#[test]
fn single_parameter_set_adam_is_rescaled_adam_star() {
    let tau = 0.5;
    let hp_set = HyperParams {
        eta: 0.01,
        epsilon: 1e-5,
        tau,
        ..Default::default()
    };
    let hp_star = HyperParams {
        eta: 0.01 / (1.0 - tau),
        ..hp_set.clone()
    };
    let mut a = model(vec![2.0], &[1]);
    let mut b = a.clone();
    let (mut sa, mut sb) = (MomentState::new(1), MomentState::new(1));
    for g in random_stream(8, 500, 1, 2.0) {
        set_adam_step(&mut a, &grads(g.clone()), &mut sa, &hp_set, 0).unwrap();
        adam_star_step(&mut b, &grads(g), &mut sb, &hp_star, 0).unwrap();
    }
    assert!(rel_dev(&a.values, &b.values) < 1e-12);
}

#[test]
fn adam_first_step_and_epsilon_cap() {
    for c in [-2.0, 0.5, 3.0] {
        for (b1, b2) in [(0.9, 0.999), (0.5, 0.9), (0.0, 0.0)] {
            let hp = HyperParams {
                eta: 0.1,
                beta1: b1,
                beta2: b2,
                epsilon: 1e-3,
                ..Default::default()
            };
            let mut p = model(vec![0.0; 2], &[2]);
            let mut s = MomentState::new(2);
            let out = adam_step(&mut p, &grads(vec![c; 2]), &mut s, &hp, 0).unwrap();
            let expected = -0.1 * c / (c.abs() + 1e-3);
            assert!((p.values[0] - expected).abs() < 1e-15);
            assert!((out.denom[0] - (c.abs() + 1e-3)).abs() < 1e-15);
        }
    }
    // Large ε: the step approaches -η c / ε and α never exceeds η / ε.
    let hp = HyperParams {
        eta: 0.1,
        epsilon: 1e6,
        ..Default::default()
    };
    let mut p = model(vec![0.0], &[1]);
    let mut s = MomentState::new(1);
    let out = adam_step(&mut p, &grads(vec![1.0]), &mut s, &hp, 0).unwrap();
    assert!((p.values[0] / (-0.1 / 1e6) - 1.0).abs() < 1e-5);
    assert!(out.alpha[0] <= 0.1 / 1e6);
}

#[test]
fn zero_gradient_stream_never_moves() {
    for kind in OptimizerKind::ALL {
        let hp = HyperParams::default();
        let mut p = model(vec![1.0, -2.0, 3.0], &[2, 1]);
        let mut opt = Optimizer::new(kind, hp, 3).unwrap();
        for _ in 0..20 {
            opt.step(&mut p, &grads(vec![0.0; 3]), 0).unwrap();
        }
        assert_eq!(p.values, vec![1.0, -2.0, 3.0], "{kind}");
    }
}

#[test]
fn adam_star_first_step_and_limits() {
    let (c, eps) = (0.7, 1e-2);
    let hp = HyperParams {
        eta: 0.1,
        epsilon: eps,
        ..Default::default()
    };
    let mut p = model(vec![0.0], &[1]);
    let mut s = MomentState::new(1);
    adam_star_step(&mut p, &grads(vec![c]), &mut s, &hp, 0).unwrap();
    assert!((p.values[0] + 0.1 * c / (c * c + eps).sqrt()).abs() < 1e-15);

    // ε → 0: Adam* and Adam agree.
    let hp_star = HyperParams {
        epsilon: 1e-16,
        ..Default::default()
    };
    let hp_adam = HyperParams {
        epsilon: 1e-300,
        ..Default::default()
    };
    let mut a = model(vec![0.0; 5], &[5]);
    let mut b = a.clone();
    let (mut sa, mut sb) = (MomentState::new(5), MomentState::new(5));
    for g in random_stream(2, 50, 5, 1.0) {
        adam_star_step(&mut a, &grads(g.clone()), &mut sa, &hp_star, 0).unwrap();
        adam_step(&mut b, &grads(g), &mut sb, &hp_adam, 0).unwrap();
    }
    assert!(rel_dev(&a.values, &b.values) < 1e-8);

    // Equal second-moment coordinates give equal stepsizes.
    let mut p = model(vec![0.0; 4], &[4]);
    let mut s = MomentState::new(4);
    let out = adam_star_step(
        &mut p,
        &grads(vec![1.0, -1.0, 1.0, -1.0]),
        &mut s,
        &HyperParams::default(),
        0,
    )
    .unwrap();
    assert!(out.alpha.iter().all(|&a| a == out.alpha[0]));
}

#[test]
fn adabelief_one_step_unroll() {
    let (b1, b2, eps, eta) = (0.9, 0.999, 1e-8, 0.01);
    let g = [0.4, -1.5];
    let hp = HyperParams {
        eta,
        beta1: b1,
        beta2: b2,
        epsilon: eps,
        ..Default::default()
    };
    for form in [AdaBeliefForm::Original, AdaBeliefForm::Reformulated] {
        let mut p = model(vec![0.0; 2], &[2]);
        let mut s = MomentState::new(2);
        let out = adabelief_step(&mut p, &grads(g.to_vec()), &mut s, &hp, 0, form).unwrap();
        for i in 0..2 {
            let m1 = (1.0 - b1) * g[i];
            let err2 = (m1 - g[i]).powi(2);
            let denom = (err2 + eps / (1.0 - b2)).sqrt();
            assert!((out.denom[i] - denom).abs() < 1e-14 * denom);
            let expected = -eta * (m1 / (1.0 - b1)) / denom;
            assert!((p.values[i] - expected).abs() < 1e-14 * expected.abs());
            if form == AdaBeliefForm::Original {
                let s1 = (1.0 - b2) * err2 + eps;
                assert!((s.second[i] - s1).abs() <= 1e-15 * s1);
            }
        }
    }
}

#[test]
fn adabelief_constant_gradient_approaches_cap() {
    let hp = HyperParams {
        beta2: 0.99,
        epsilon: 1e-8,
        ..Default::default()
    };
    let cap = 1.0 / (hp.epsilon / (1.0 - hp.beta2)).sqrt();
    let mut p = model(vec![0.0; 3], &[3]);
    let mut s = MomentState::new(3);
    let mut last = 0.0;
    for _ in 0..3000 {
        let out = adabelief_step(
            &mut p,
            &grads(vec![0.5; 3]),
            &mut s,
            &hp,
            0,
            AdaBeliefForm::Reformulated,
        )
        .unwrap();
        let unit: Vec<f64> = out.unit_alpha().collect();
        assert!(unit[0] <= cap * (1.0 + 1e-12));
        last = unit[0];
    }
    assert!(last > 0.99 * cap, "{last} vs {cap}");
}

#[test]
fn adabelief_forms_agree() {
    let hp = HyperParams {
        eta: 0.01,
        epsilon: 1e-8,
        ..Default::default()
    };
    let mut a = model(vec![0.0; 20], &[20]);
    let mut b = a.clone();
    let (mut sa, mut sb) = (MomentState::new(20), MomentState::new(20));
    for g in random_stream(1, 200, 20, 1.0) {
        adabelief_step(&mut a, &grads(g.clone()), &mut sa, &hp, 0, AdaBeliefForm::Original).unwrap();
        adabelief_step(&mut b, &grads(g), &mut sb, &hp, 0, AdaBeliefForm::Reformulated).unwrap();
    }
    let dev = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(dev <= 1e-10, "{dev}");
}

#[test]
fn sgd_momentum_cases() {
    // β = 0 is gradient descent.
    let hp = HyperParams {
        eta: 0.1,
        beta1: 0.0,
        ..Default::default()
    };
    let mut p = model(vec![1.0, 2.0], &[2]);
    let mut s = MomentState::new(2);
    sgd_momentum_step(&mut p, &grads(vec![0.5, -1.0]), &mut s, &hp, 0).unwrap();
    assert!((p.values[0] - 0.95).abs() < 1e-15 && (p.values[1] - 2.1).abs() < 1e-15);

    // Constant gradient: m_t = c (1 - β^t) / (1 - β) → 10 c.
    let (c, beta) = (0.3, 0.9);
    let hp = HyperParams {
        eta: 0.01,
        beta1: beta,
        ..Default::default()
    };
    let mut p = model(vec![0.0], &[1]);
    let mut s = MomentState::new(1);
    for t in 1..=200 {
        sgd_momentum_step(&mut p, &grads(vec![c]), &mut s, &hp, 0).unwrap();
        let closed = c * (1.0 - beta.powi(t)) / (1.0 - beta);
        assert!((s.first[0] - closed).abs() < 1e-12);
    }
    assert!((s.first[0] - 10.0 * c).abs() < 1e-8);

    // Zero gradient from a nonzero momentum: Δθ_t = -η β^t m_0.
    let mut p = model(vec![0.0], &[1]);
    let mut s = MomentState::new(1);
    s.first[0] = 2.0;
    for t in 1..=10 {
        let before = p.values[0];
        sgd_momentum_step(&mut p, &grads(vec![0.0]), &mut s, &hp, 0).unwrap();
        let expected = -0.01 * beta.powi(t) * 2.0;
        assert!((p.values[0] - before - expected).abs() < 1e-15);
    }
}

#[test]
fn bias_corrected_first_momentum_is_exact_for_constant_gradients() {
    let hp = HyperParams::default();
    let mut p = model(vec![0.0; 2], &[2]);
    let mut s = MomentState::new(2);
    for t in 1..=500 {
        adam_step(&mut p, &grads(vec![0.25, -3.0]), &mut s, &hp, 0).unwrap();
        let corr = 1.0 - hp.beta1.powi(t);
        assert!((s.first[0] / corr - 0.25).abs() < 1e-14);
        assert!((s.first[1] / corr + 3.0).abs() < 1e-13);
    }
}

#[test]
fn theoretical_mode_skips_first_moment_correction() {
    let hp = HyperParams {
        eta: 0.1,
        first_moment_bias_correction: false,
        epsilon: 1e-300,
        tau: 0.0,
        ..Default::default()
    };
    let mut p = model(vec![0.0], &[1]);
    let mut s = MomentState::new(1);
    set_adam_step(&mut p, &grads(vec![1.0]), &mut s, &hp, 0).unwrap();
    assert!((p.values[0] + 0.1 * (1.0 - hp.beta1)).abs() < 1e-15);
}

#[test]
fn non_finite_gradient_leaves_state_untouched() {
    for kind in OptimizerKind::ALL {
        let mut p = model(vec![1.0, 2.0, 3.0], &[1, 2]);
        let mut opt = Optimizer::new(kind, HyperParams::default(), 3).unwrap();
        opt.step(&mut p, &grads(vec![0.1, 0.2, 0.3]), 0).unwrap();
        let (p0, s0) = (p.clone(), opt.state.clone());
        for bad in [f64::NAN, f64::INFINITY] {
            let err = opt.step(&mut p, &grads(vec![0.1, bad, 0.3]), 0).unwrap_err();
            assert!(matches!(err, Error::NonFinite { index: 1, .. }));
            assert_eq!(p, p0);
            assert_eq!(opt.state.t, s0.t);
            assert_eq!(opt.state.first, s0.first);
            assert_eq!(opt.state.second, s0.second);
        }
        assert!(matches!(
            opt.step(&mut p, &grads(vec![0.1, 0.2]), 0),
            Err(Error::Dimension { .. })
        ));
    }
}

#[test]
fn weight_decay_modes() {
    // Decoupled with zero gradient: pure multiplicative shrink.
    let hp = HyperParams {
        eta: 0.1,
        weight_decay: 0.5,
        weight_decay_mode: WeightDecayMode::Decoupled,
        ..Default::default()
    };
    for kind in [OptimizerKind::Adam, OptimizerKind::SetAdam] {
        let mut p = model(vec![2.0, -4.0], &[2]);
        let mut opt = Optimizer::new(kind, hp.clone(), 2).unwrap();
        opt.step(&mut p, &grads(vec![0.0, 0.0]), 0).unwrap();
        assert!((p.values[0] - 2.0 * 0.95).abs() < 1e-15);
        assert!((p.values[1] + 4.0 * 0.95).abs() < 1e-15);
    }

    // Coupled with zero gradient: Adam sees g = wd θ, first step -η sign-ish.
    let hp = HyperParams {
        eta: 0.1,
        epsilon: 1e-300,
        weight_decay: 0.5,
        weight_decay_mode: WeightDecayMode::Coupled,
        ..Default::default()
    };
    let mut p = model(vec![2.0, -4.0], &[2]);
    let mut s = MomentState::new(2);
    adam_step(&mut p, &grads(vec![0.0, 0.0]), &mut s, &hp, 0).unwrap();
    assert!((p.values[0] - 1.9).abs() < 1e-15);
    assert!((p.values[1] + 3.9).abs() < 1e-15);
}

#[test]
fn schedule_feeds_eta_t() {
    let hp = HyperParams {
        eta: 1.0,
        schedule: Schedule::InverseSqrt,
        ..Default::default()
    };
    let mut p = model(vec![0.0], &[1]);
    let mut s = MomentState::new(1);
    let mut last = None;
    for _ in 0..4 {
        last = Some(adam_step(&mut p, &grads(vec![1.0]), &mut s, &hp, 0).unwrap());
    }
    assert_eq!(last.unwrap().eta_t, 0.5);
}

#[test]
fn kind_serde_names() {
    for kind in OptimizerKind::ALL {
        let s = serde_json::to_string(&kind).unwrap();
        assert_eq!(s, format!("\"{}\"", kind.name()));
    }
}

proptest! {
    #[test]
    fn set_adam_lower_and_upper_bounds(
        seed in 0u64..1000,
        tau in 0.0f64..0.95,
        eps_exp in -12.0f64..-2.0,
        scale_exp in -4.0f64..2.0,
    ) {
        let eps = 10f64.powf(eps_exp);
        let sizes = [3, 1, 6];
        let hp = HyperParams { eta: 0.01, epsilon: eps, tau, ..Default::default() };
        let mut p = model(vec![0.0; 10], &sizes);
        let mut s = MomentState::new(10);
        let bound = (1.0 - tau) * eps.sqrt();
        for g in random_stream(seed, 40, 10, 10f64.powf(scale_exp)) {
            let out = set_adam_step(&mut p, &grads(g), &mut s, &hp, 0).unwrap();
            for (&w, a) in out.denom.iter().zip(out.unit_alpha()) {
                prop_assert!(w >= bound * (1.0 - 4.0 * f64::EPSILON));
                prop_assert!(a <= (1.0 / bound) * (1.0 + 4.0 * f64::EPSILON));
            }
            // Before translation the stepsizes respect 1/√ε.
            for &w in &s.scratch.embedded {
                prop_assert!(1.0 / w <= 1.0 / eps.sqrt() * (1.0 + 4.0 * f64::EPSILON));
            }
        }
    }

    #[test]
    fn adam_family_upper_bounds(seed in 0u64..1000, eps_exp in -10.0f64..-1.0) {
        let eps = 10f64.powf(eps_exp);
        let hp = HyperParams { epsilon: eps, ..Default::default() };
        let mut pa = model(vec![0.0; 6], &[6]);
        let mut pb = pa.clone();
        let (mut sa, mut sb) = (MomentState::new(6), MomentState::new(6));
        for g in random_stream(seed, 30, 6, 0.1) {
            let oa = adam_step(&mut pa, &grads(g.clone()), &mut sa, &hp, 0).unwrap();
            let ob = adam_star_step(&mut pb, &grads(g), &mut sb, &hp, 0).unwrap();
            for a in oa.unit_alpha() {
                prop_assert!(a > 0.0 && a <= 1.0 / eps);
            }
            for a in ob.unit_alpha() {
                prop_assert!(a > 0.0 && a <= (1.0 / eps.sqrt()) * (1.0 + 4.0 * f64::EPSILON));
            }
        }
    }

    #[test]
    fn permutation_within_layer_is_equivariant(seed in 0u64..500, rot in 1usize..5) {
        let sizes = [5, 3];
        let hp = HyperParams { eta: 0.01, epsilon: 1e-6, ..Default::default() };
        let perm: Vec<usize> = (0..5).map(|i| (i + rot) % 5).chain(5..8).collect();
        let mut a = model(vec![0.3; 8], &sizes);
        let mut b = a.clone();
        let (mut sa, mut sb) = (MomentState::new(8), MomentState::new(8));
        for g in random_stream(seed, 25, 8, 1.0) {
            let gp: Vec<f64> = perm.iter().map(|&i| g[i]).collect();
            set_adam_step(&mut a, &grads(g), &mut sa, &hp, 0).unwrap();
            set_adam_step(&mut b, &grads(gp), &mut sb, &hp, 0).unwrap();
        }
        for (k, &i) in perm.iter().enumerate() {
            prop_assert!((b.values[k] - a.values[i]).abs() <= 1e-12 * a.values[i].abs().max(1.0));
        }
    }

    #[test]
    fn second_momentum_stays_nonnegative(seed in 0u64..500) {
        for kind in OptimizerKind::ALL {
            let mut p = model(vec![0.0; 4], &[2, 2]);
            let mut opt = Optimizer::new(kind, HyperParams::default(), 4).unwrap();
            for g in random_stream(seed, 20, 4, 3.0) {
                let out = opt.step(&mut p, &grads(g), 0).unwrap();
                prop_assert!(opt.state.second.iter().all(|&v| v >= 0.0));
                prop_assert!(out.alpha.iter().all(|&a| a > 0.0));
                prop_assert!(out.gamma.iter().all(|&g| (0.0..=1.0).contains(&g)));
            }
        }
    }
}
