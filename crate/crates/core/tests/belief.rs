mod common;

use common::{double_integrator, moment_about, random_spd};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use simba_core::belief::{
    propagate_belief, propagate_covariances, psd_sqrt, simulate_from_belief, Belief,
    MeasurementNoise, NominalPlan,
};
use simba_core::geometry::{polytope_avoid_lower_bound, polytope_prob_lower_bound, Polytope};
use simba_core::guide::{GuideModel, SimbaKind, SimplifiedModel};
use simba_core::geometry::Labeler;
use simba_core::ltlf::{Alphabet, PropTable};
use simba_core::tree::{FullModel, SearchModel};

fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn steady_state_solves_the_filter_riccati_equation() {
    let sys = double_integrator(0.2, 1e-3, Some(0.5));
    let r = DMatrix::identity(2, 2) * 0.5;
    let noise = MeasurementNoise::Cov(r.clone());
    let (mut est, mut mc) = (DMatrix::identity(4, 4), DMatrix::zeros(4, 4));
    for _ in 0..5000 {
        (est, mc) = propagate_covariances(&sys, &est, &mc, &noise).unwrap();
    }
    // Independent fixed-point iteration of the textbook recursion.
    let (a, c, q) = (&sys.a, &sys.c, &sys.process_noise);
    let mut p = DMatrix::identity(4, 4);
    for _ in 0..5000 {
        let prior = a * &p * a.transpose() + q;
        let s = c * &prior * c.transpose() + &r;
        p = &prior - &prior * c.transpose() * s.try_inverse().unwrap() * c * &prior;
    }
    assert!((&est - &p).amax() < 1e-8);
    let prior = a * &est * a.transpose() + q;
    let s = c * &prior * c.transpose() + &r;
    let next = &prior - &prior * c.transpose() * s.try_inverse().unwrap() * c * &prior;
    assert!((&next - &est).amax() < 1e-8);
}

#[test]
fn ensemble_matches_predicted_covariance() {
    let sys = double_integrator(0.2, 1e-3, Some(0.05));
    let start = Belief::initial(
        DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0]),
        DMatrix::from_diagonal(&DVector::from_vec(vec![0.04, 0.04, 0.01, 0.01])),
    );
    let controls: Vec<DVector<f64>> =
        (0..20).map(|k| DVector::from_vec(vec![0.5, (k as f64 * 0.3).sin()])).collect();
    let plan = NominalPlan::from_controls(&sys, start.mean.clone(), controls.clone());
    let mut beliefs = vec![start.clone()];
    for u in &controls {
        beliefs.push(propagate_belief(&sys, beliefs.last().unwrap(), u).unwrap());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rollouts: Vec<_> = (0..10_000).map(|_| simulate_from_belief(&sys, &plan, &start, &mut rng)).collect();
    for k in [1, 5, 20] {
        let xs: Vec<_> = rollouts.iter().map(|r| r.true_states[k].clone()).collect();
        let emp = moment_about(&xs, &plan.states[k]);
        let err = rel_frobenius(&emp, &beliefs[k].total_cov());
        assert!(err < 0.05, "step {k}: relative error {err}");
    }
}

#[test]
fn open_loop_dispersion_grows() {
    let mut sys = double_integrator(0.2, 1e-3, None);
    sys.gain = DMatrix::zeros(2, 4);
    let start = Belief::initial(DVector::zeros(4), DMatrix::zeros(4, 4));
    let plan = NominalPlan::from_controls(&sys, start.mean.clone(), vec![DVector::zeros(2); 30]);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rollouts: Vec<_> = (0..2000).map(|_| simulate_from_belief(&sys, &plan, &start, &mut rng)).collect();
    let spread: Vec<f64> = (0..=30)
        .map(|k| {
            let xs: Vec<_> = rollouts.iter().map(|r| r.true_states[k].clone()).collect();
            moment_about(&xs, &plan.states[k]).trace()
        })
        .collect();
    assert!(spread.windows(2).all(|w| w[1] > w[0]), "{spread:?}");
}

fn mc_probability(rng: &mut ChaCha8Rng, mean: &DVector<f64>, cov: &DMatrix<f64>, region: &Polytope, n: usize) -> f64 {
    let l = psd_sqrt(cov);
    let hits = (0..n)
        .filter(|_| {
            let z = DVector::from_fn(mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
            region.contains((mean + &l * z).as_slice())
        })
        .count();
    hits as f64 / n as f64
}

fn random_polygon(rng: &mut ChaCha8Rng) -> Polytope {
    let k = rng.random_range(3..8);
    let points: Vec<[f64; 2]> = (0..k)
        .map(|_| {
            let t = rng.random_range(0.0..std::f64::consts::TAU);
            let r = rng.random_range(0.5..2.0);
            [r * t.cos(), r * t.sin()]
        })
        .collect();
    Polytope::from_vertices_2d("p", &points).unwrap_or_else(|_| random_polygon(rng))
}

#[test]
fn chance_bounds_are_conservative() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 100_000;
    for _ in 0..20 {
        let region = random_polygon(&mut rng);
        let mean = DVector::from_fn(2, |_, _| rng.random_range(-1.5..1.5));
        let cov = random_spd(&mut rng, 2, 0.01, 0.5);
        let p = mc_probability(&mut rng, &mean, &cov, &region, n);
        let se = |p: f64| (p.clamp(1.0 / n as f64, 1.0 - 1.0 / n as f64) * (1.0 - p) / n as f64).sqrt();
        let reach = polytope_prob_lower_bound(&mean, &cov, &region).unwrap();
        assert!(reach <= p + 3.0 * se(p), "reach bound {reach} vs estimate {p}");
        let avoid = polytope_avoid_lower_bound(&mean, &cov, &region).unwrap();
        assert!(avoid <= (1.0 - p) + 3.0 * se(1.0 - p), "avoid bound {avoid} vs estimate {}", 1.0 - p);
    }
}

#[test]
fn simplified_model_never_accumulates_more_uncertainty() {
    // No measurements and a certain start: covariance only grows with the
    // number of steps, and the kinematic model needs fewer of them.
    let mut sys = double_integrator(0.4, 1e-3, None);
    sys.input_bounds = simba_core::belief::BoxBounds::new(vec![-1.0, -1.0], vec![1.0, 1.0]);
    let labeler = Labeler::new(&Alphabet::new(Vec::new()), &PropTable::new(Vec::new()), &[], &[0, 1]).unwrap();
    let model = SimplifiedModel {
        projection: vec![0, 1],
        kind: SimbaKind::Sba,
        v_max: 1.0,
        lift: vec![0.0; 4],
    };
    let guide = GuideModel::new(&sys, &labeler, &model);
    let full = FullModel::new(&sys, &labeler);
    let start = Belief::initial(DVector::zeros(4), DMatrix::zeros(4, 4));
    let waypoints = [[4.0, 0.0], [4.0, 4.0], [8.0, 4.0], [8.0, 0.0]];

    let mut g = guide.root(&start);
    let mut f = start.clone();
    let (mut g_steps, mut f_steps) = (0, 0);
    for w in waypoints {
        let wp = DVector::from_vec(w.to_vec());
        while (&g.mean - &wp).norm() > 1e-9 {
            let dir = &wp - &g.mean;
            let last = dir.norm() < model.v_max * sys.dt;
            g = guide.apply(&g, &dir).unwrap();
            if last {
                // The final partial step lands exactly.
                g.mean = wp.clone();
            }
            g_steps += 1;
        }
        let target = DVector::from_vec(vec![w[0], w[1], 0.0, 0.0]);
        while (&f.mean - &target).norm() > 1e-6 {
            let u = full.control_toward(&f, &target).unwrap();
            f = full.apply(&f, &u).unwrap();
            f_steps += 1;
            assert!(f_steps < 10_000);
        }
        assert!(f_steps > g_steps);
        assert!(g.total_cov().trace() <= f.total_cov().trace() + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn covariances_stay_symmetric_psd(seed in any::<u64>(), steps in 1usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = double_integrator(0.3, 1e-3, Some(0.1));
        let mut b = Belief::initial(DVector::zeros(4), random_spd(&mut rng, 4, 0.0, 2.0));
        for _ in 0..steps {
            let noise = if rng.random_bool(0.5) { MeasurementNoise::Unavailable } else {
                MeasurementNoise::Cov(random_spd(&mut rng, 2, 1e-4, 10.0))
            };
            let (e, m) = propagate_covariances(&sys, &b.est_cov, &b.mean_cov, &noise).unwrap();
            b.est_cov = e;
            b.mean_cov = m;
            for c in [&b.est_cov, &b.mean_cov] {
                prop_assert!((c - c.transpose()).amax() == 0.0);
                prop_assert!(c.clone().symmetric_eigenvalues().min() >= -1e-10);
            }
        }
    }
}
