//! The Monte Carlo harness: replicate generation, study aggregation, and the
//! dispersion map, with an emphasis on seed discipline (independent
//! substreams, bit-identical reruns).

use approx::{assert_abs_diff_eq, assert_relative_eq};
use dwcount::{
    dispersion_map, run_simulation_study, simulate_regression_data, theoretical_vr_poisson,
    CovariateSpec, SimulationStudyConfig, TruncationPolicy,
};

fn small_config() -> SimulationStudyConfig {
    SimulationStudyConfig {
        n_obs: 120,
        replicate_count: 8,
        master_seed: 3,
        ..SimulationStudyConfig::default()
    }
}

#[test]
fn replicate_data_is_deterministic_and_stream_separated() {
    let config = small_config();
    let a = simulate_regression_data(&config, 0).unwrap();
    let b = simulate_regression_data(&config, 0).unwrap();
    assert_eq!(a.response(), b.response());
    assert_eq!(a.covariates(), b.covariates());
    assert_eq!(a.covariate_names(), &["x1".to_string(), "x2".to_string()]);
    assert_eq!(a.n(), 120);

    let c = simulate_regression_data(&config, 1).unwrap();
    assert_ne!(a.response(), c.response());

    // the uniform covariate respects its bounds, the normal one is centered
    for i in 0..a.n() {
        let row = a.covariate_row(i);
        assert!(row[1] >= 0.0 && row[1] <= 10.0);
    }
    let mean_x1: f64 = (0..a.n()).map(|i| a.covariate_row(i)[0]).sum::<f64>() / a.n() as f64;
    assert!(mean_x1.abs() < 0.5);
}

#[test]
fn study_reruns_are_bit_identical() {
    let config = small_config();
    let one = run_simulation_study(&config).unwrap();
    let two = run_simulation_study(&config).unwrap();
    assert_eq!(one, two);

    let names: Vec<&str> = one.parameters.iter().map(|p| p.name.as_str()).collect();
    assert_eq!(names, vec!["(intercept)", "x1", "x2", "beta"]);
    assert_eq!(one.replicate_count, 8);
    assert!(one.failed_replicates <= 2);

    for p in &one.parameters {
        assert_abs_diff_eq!(p.bias, p.mean_estimate - p.truth, epsilon = 1e-12);
        assert!(p.mse >= p.bias * p.bias - 1e-12, "mse below bias² for {}", p.name);
        assert!(p.mean_ci_length > 0.0);
    }

    let other_seed = SimulationStudyConfig {
        master_seed: 4,
        ..config
    };
    let three = run_simulation_study(&other_seed).unwrap();
    assert_ne!(one.parameters, three.parameters);
}

#[test]
fn study_estimates_sit_near_the_truth_even_with_few_replicates() {
    let study = run_simulation_study(&small_config()).unwrap();
    for p in &study.parameters {
        assert!(
            p.bias.abs() < 0.5,
            "{} drifted: mean {} vs truth {}",
            p.name,
            p.mean_estimate,
            p.truth
        );
    }
}

#[test]
fn config_validation_rejects_structural_mistakes() {
    let base = SimulationStudyConfig::default();
    for broken in [
        SimulationStudyConfig { n_obs: 0, ..base.clone() },
        SimulationStudyConfig { replicate_count: 0, ..base.clone() },
        SimulationStudyConfig { true_beta: -1.0, ..base.clone() },
        SimulationStudyConfig { ci_level: 1.0, ..base.clone() },
        // coefficient vector no longer matches the covariate list
        SimulationStudyConfig { true_alpha: vec![0.5, 0.4], ..base.clone() },
        SimulationStudyConfig {
            covariates: vec![CovariateSpec::Uniform { lower: 2.0, upper: 1.0 }],
            true_alpha: vec![0.5, 0.4],
            ..base.clone()
        },
    ] {
        assert!(broken.validate().is_err());
        assert!(run_simulation_study(&broken).is_err());
    }
}

#[test]
fn dispersion_map_cells_are_laid_out_row_major_and_reproducible() {
    let q_grid = [0.3, 0.7];
    let beta_grid = [0.7, 2.5];
    let map = dispersion_map(&q_grid, &beta_grid, 4000, 1).unwrap();
    assert_eq!(map.cells.len(), 4);
    assert_eq!(map.n_per_cell, 4000);
    for (row, &beta) in beta_grid.iter().enumerate() {
        for (col, &q) in q_grid.iter().enumerate() {
            let cell = &map.cells[row * q_grid.len() + col];
            assert_eq!(cell.q, q);
            assert_eq!(cell.beta, beta);
            assert!(cell.sample_mean > 0.0);
            assert!(cell.sample_variance > 0.0);
        }
    }

    let again = dispersion_map(&q_grid, &beta_grid, 4000, 1).unwrap();
    assert_eq!(map, again);
    let reseeded = dispersion_map(&q_grid, &beta_grid, 4000, 2).unwrap();
    assert_ne!(map, reseeded);
}

#[test]
fn dispersion_map_reproduces_the_over_and_under_dispersed_regimes() {
    let map = dispersion_map(&[0.3, 0.7], &[0.7, 2.5], 20_000, 1).unwrap();
    for cell in &map.cells {
        if cell.beta < 1.0 {
            // overdispersed: sample variance above the Poisson-fit variance,
            // and the NB's free dispersion parameter soaks up most of the
            // excess (its MLE tracks the body of the heavier-tailed truth,
            // so a little excess survives above 1)
            assert!(cell.vr_poisson > 1.05, "cell {:?}", (cell.q, cell.beta));
            assert!(!cell.nb_boundary);
            assert!(
                cell.vr_nb > 0.9 && cell.vr_nb - 1.0 < 0.25 * (cell.vr_poisson - 1.0),
                "vr_nb = {} vs vr_poisson = {}",
                cell.vr_nb,
                cell.vr_poisson
            );
            assert!(cell.nb_k.is_some());
        } else {
            // underdispersed: Poisson overestimates the variance and the NB
            // cannot do better than collapsing onto it
            assert!(cell.vr_poisson < 0.95, "cell {:?}", (cell.q, cell.beta));
            assert!(cell.nb_boundary);
            assert!(cell.nb_k.is_none());
        }
    }
}

#[test]
fn theoretical_ratio_has_the_geometric_closed_form() {
    let policy = TruncationPolicy::default();
    // β = 1 is geometric: variance/mean = 1/(1 − q)
    for &q in &[0.1, 0.5, 0.9] {
        assert_relative_eq!(
            theoretical_vr_poisson(q, 1.0, &policy).unwrap(),
            1.0 / (1.0 - q),
            max_relative = 1e-8
        );
    }
    // the sign of the departure from 1 flips with the shape
    for &q in &[0.1, 0.5, 0.9] {
        assert!(theoretical_vr_poisson(q, 0.5, &policy).unwrap() > 1.0);
        assert!(theoretical_vr_poisson(q, 5.0, &policy).unwrap() < 1.0);
    }
}
