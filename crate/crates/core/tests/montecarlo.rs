use sepkit::baselines::{cube_theorem_bounds, p_y_sphere_exact};
use sepkit::montecarlo::{
    cube_params, estimate_p_y_distribution, estimate_set_separability, verify_bound, Family, MonteCarloError,
    PyEstimator, SamplerSpec, TheoremCase,
};

#[test]
fn sphere_p_y_sample_mean_matches_quadrature() {
    // p_y is about 6.7e-6 here, so ~1e8 ordered pairs are needed for the
    // sample mean to resolve 10%
    let spec = SamplerSpec::new(Family::UniformSphere, 20, 17);
    let d = estimate_p_y_distribution(&spec, 1000, 0.8, 100, PyEstimator::Empirical, 20, None).unwrap();
    let exact = p_y_sphere_exact(20, 0.8).unwrap();
    assert!(((d.mean - exact) / exact).abs() <= 0.10, "{} vs {exact}", d.mean);
    assert_eq!(d.samples.len(), 100_000);
    assert_eq!(d.histogram.counts.iter().sum::<u64>(), 100_000);
}

#[test]
fn ball_single_point_theorem() {
    let v = verify_bound(&TheoremCase::BallSingle { n: 30, m: 200, r: 0.8 }, 500, 1).unwrap();
    assert!(v.pass, "{v:?}");
}

#[test]
fn ball_pairs_at_corollary_size() {
    let c = sepkit::baselines::corollary_max_m(20, 0.8, 0.5).unwrap();
    let m = c.pairwise_bound.value.floor() as u64;
    assert!(m >= 2);
    let v = verify_bound(&TheoremCase::BallPairs { n: 20, m, r: 0.8 }, 400, 2).unwrap();
    assert!(v.result.theoretical_bound.unwrap() >= 0.5 - 1e-9);
    assert!(v.pass, "{v:?}");
}

#[test]
fn cube_theorem_in_high_dimension() {
    let p = cube_params(2000, 10, 0.5, 1.0);
    let b = cube_theorem_bounds(&p).unwrap();
    assert!(!b.all_pairs.vacuous);
    let v = verify_bound(&TheoremCase::CubePairs { n: 2000, m: 10, delta: 0.5, density_bound: 1.0 }, 200, 3).unwrap();
    assert!(v.pass, "{v:?}");
}

#[test]
fn noisy_theorem_when_non_vacuous() {
    let case = TheoremCase::Noisy { n: 400, m: 10, epsilon: 0.5, delta: 0.2, subspace_dim: 3 };
    let v = verify_bound(&case, 300, 4).unwrap();
    assert!(v.raw_bound > 0.98);
    assert!(v.pass);
    let vacuous = TheoremCase::Noisy { n: 100, m: 50, epsilon: 0.5, delta: 0.15, subspace_dim: 3 };
    assert!(matches!(verify_bound(&vacuous, 10, 4), Err(MonteCarloError::VacuousBound(_))));
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let spec = SamplerSpec::new(Family::UniformBall, 12, 8);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_set_separability(&spec, 40, 0.8, 300).unwrap())
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(a.successes, b.successes);
    assert_eq!(a.empirical_rate, b.empirical_rate);

    let pdist = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_p_y_distribution(&spec, 50, 0.9, 20, PyEstimator::Empirical, 10, None).unwrap())
    };
    assert_eq!(pdist(1), pdist(4));
}

#[test]
fn separability_rate_rises_with_dimension() {
    let rate = |n| {
        estimate_set_separability(&SamplerSpec::new(Family::UniformBall, n, 9), 50, 0.9, 300)
            .unwrap()
            .empirical_rate
    };
    let low = rate(5);
    let high = rate(60);
    assert!(high > low, "{low} vs {high}");
}
