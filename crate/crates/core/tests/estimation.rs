use tlrgeo::kernels::matern;
use tlrgeo::stats::{
    log_likelihood, mle_fit, replicate_seed, Bounds, LikelihoodConfig, MeasurementSampler, MeasurementVector,
};
use tlrgeo::{generate_locations, MaternParams, Mode};

fn reversed_odd_even(n: usize) -> Vec<usize> {
    // Any fixed non-trivial permutation will do.
    (0..n).rev().filter(|i| i % 2 == 1).chain((0..n).filter(|i| i % 2 == 0)).collect()
}

#[test]
fn likelihood_is_invariant_under_permutation() {
    let n = 900;
    let set = generate_locations(n, 21).unwrap();
    let p = MaternParams::new(1.0, 0.1, 0.5).unwrap();
    let z = MeasurementSampler::new(&set, &p).unwrap().sample(4);
    let perm = reversed_odd_even(n);
    let set_p = set.select(&perm).unwrap();
    let z_p = z.select(&perm);
    for spatial_order in [false, true] {
        for (mode, tol) in [(Mode::Dense, 1e-10), (Mode::tlr(1e-7).unwrap(), 100.0 * 1e-7)] {
            let cfg = LikelihoodConfig {
                mode,
                tile_size: Some(150),
                spatial_order,
                ..LikelihoodConfig::default()
            };
            let a = log_likelihood(&set, &z, &p, &cfg).unwrap();
            let b = log_likelihood(&set_p, &z_p, &p, &cfg).unwrap();
            let rel = (a - b).abs() / a.abs();
            assert!(rel <= tol, "{mode:?} ordered={spatial_order}: {rel:e}");
        }
    }
}

#[test]
fn truth_beats_a_tenfold_range_on_most_replicates() {
    let n = 400;
    let set = generate_locations(n, 8).unwrap();
    let truth = MaternParams::new(1.0, 0.05, 0.5).unwrap();
    let wrong = MaternParams::new(1.0, 0.5, 0.5).unwrap();
    let sampler = MeasurementSampler::new(&set, &truth).unwrap();
    let cfg = LikelihoodConfig::default();
    let replicates = 40;
    let wins = (0..replicates)
        .filter(|&r| {
            let z = sampler.sample(replicate_seed(8, r));
            log_likelihood(&set, &z, &truth, &cfg).unwrap() > log_likelihood(&set, &z, &wrong, &cfg).unwrap()
        })
        .count();
    assert!(wins * 100 >= 95 * replicates, "{wins}/{replicates}");
}

#[test]
fn sampled_fields_have_the_model_covariance() {
    let n = 30;
    let set = generate_locations(n, 3).unwrap();
    let p = MaternParams::new(2.0, 0.2, 1.0).unwrap();
    let sampler = MeasurementSampler::new(&set, &p).unwrap();
    let draws = 4000;
    let mut cov = vec![0.0; n * n];
    for s in 0..draws {
        let z = sampler.sample(s);
        let z = z.as_slice();
        for i in 0..n {
            for j in 0..n {
                cov[i * n + j] += z[i] * z[j];
            }
        }
    }
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let c = cov[i * n + j] / draws as f64;
            let model = matern(set.distance(i, j), &p).unwrap();
            // Standard error of a sample covariance: sqrt((s_ii s_jj + s_ij^2) / N).
            let se = ((p.theta1 * p.theta1 + model * model) / draws as f64).sqrt();
            worst = worst.max((c - model).abs() / se);
        }
    }
    // 900 entries, strongly correlated; 5 standard errors is a loose gate.
    assert!(worst < 5.0, "largest deviation {worst:.2} standard errors");
}

#[test]
fn fits_stay_in_bounds_and_trace_is_bounded() {
    let n = 300;
    let set = generate_locations(n, 6).unwrap();
    let truth = MaternParams::new(1.0, 0.1, 0.5).unwrap();
    let z: MeasurementVector = MeasurementSampler::new(&set, &truth).unwrap().sample(1);
    // Tight bounds that exclude the truth force the search against them.
    let cfg = LikelihoodConfig {
        mode: Mode::tlr(1e-7).unwrap(),
        bounds: Bounds::new([1.5, 0.2, 0.2], [3.0, 0.4, 0.4]).unwrap(),
        max_iterations: 30,
        ..LikelihoodConfig::default()
    };
    let fit = mle_fit(&set, &z, &cfg).unwrap();
    let th = fit.theta_hat.theta();
    assert!(cfg.bounds.contains(&th), "{th:?}");
    assert!(fit.iterations <= 30);
    // At most 3 + 1 initial evaluations plus reflect, expand or contract,
    // or a shrink of 3 vertices per iteration.
    assert!(fit.evaluations() <= 4 + 30 * 5, "{}", fit.evaluations());
    for t in &fit.trace {
        assert!(cfg.bounds.contains(&t.theta), "{:?}", t.theta);
    }
}
