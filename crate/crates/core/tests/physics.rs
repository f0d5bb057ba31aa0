use ssh_core::disorder::{ensemble_statistics, DisorderModel, Distribution, Observable};
use ssh_core::dynamics::{
    diagonal_ensemble_average, evolve, mean_chiral_operator, winding_estimate, Convention,
};
use ssh_core::fitting::{eigenenergies_from_fit, fit_lorentzians, seed_guesses, FitOptions};
use ssh_core::spectra::{broaden, eigensystem, stick_spectrum, DetuningGrid};
use ssh_core::ChainSpec;

#[test]
fn spectrum_fit_recovers_the_eigenvalues_in_units_of_j1() {
    let spec = ChainSpec::new(3, 400.0, 400.0).unwrap();
    let eig = eigensystem(&spec);
    let sticks = stick_spectrum(&eig, 2).unwrap();
    let grid = DetuningGrid::covering(&sticks, 65.0, 1.0).unwrap();
    let trace = broaden(&sticks, 65.0, &grid).unwrap();
    let fit = fit_lorentzians(
        &trace,
        &seed_guesses(&trace, 6).unwrap(),
        FitOptions::default(),
    )
    .unwrap();
    for (scaled, e) in eigenenergies_from_fit(&fit, 400.0)
        .unwrap()
        .iter()
        .zip(eig.eigenvalues())
    {
        assert!((scaled * 400.0 - e).abs() < 1e-6);
    }
}

#[test]
fn conventions_share_the_diagonal_ensemble_on_nondegenerate_chains() {
    // ⟨Γ⟩ vanishes in every non-degenerate eigenstate of a chiral chain, so the
    // origin shift between conventions drops out at infinite time.
    for (j1, j2) in [
        (160.0, 800.0),
        (400.0, 800.0),
        (800.0, 400.0),
        (300.0, 700.0),
    ] {
        let eig = eigensystem(&ChainSpec::new(4, j1, j2).unwrap());
        for site in 1..=8 {
            let rel = diagonal_ensemble_average(
                &eig,
                site,
                &mean_chiral_operator(4, site, Convention::Relative),
            )
            .unwrap();
            let abs = diagonal_ensemble_average(
                &eig,
                site,
                &mean_chiral_operator(4, site, Convention::Absolute),
            )
            .unwrap();
            assert!(
                (rel - abs).abs() < 1e-9,
                "{j1}/{j2} site {site}: {rel} vs {abs}"
            );
        }
    }
}

#[test]
fn quench_from_mirrored_site_mirrors_populations() {
    let spec = ChainSpec::new(3, 160.0, 800.0).unwrap();
    let a = evolve(&spec, 2, 5.0, 0.05).unwrap();
    let b = evolve(&spec, 5, 5.0, 0.05).unwrap();
    for (ra, rb) in a.populations.iter().zip(&b.populations) {
        for n in 0..6 {
            assert!((ra[n] - rb[5 - n]).abs() < 1e-12);
        }
    }
}

#[test]
fn onsite_disorder_ensemble_is_pinned() {
    let base = ChainSpec::new(3, 160.0, 800.0).unwrap();
    let model = DisorderModel::new(0.0, 50.0, Distribution::UniformBounded, 2024).unwrap();
    let stats = ensemble_statistics(&base, &model, 500, &Observable::Eigenvalues).unwrap();
    assert_eq!(stats.n, 500);
    assert!(
        (stats.mean[2] - -18.373578091755377).abs() < 1e-9,
        "{}",
        stats.mean[2]
    );
    assert!(
        (stats.std[2] - 21.074215141474337).abs() < 1e-9,
        "{}",
        stats.std[2]
    );
    assert!(
        (stats.mean[5] - 899.3471964712085).abs() < 1e-9,
        "{}",
        stats.mean[5]
    );
}

#[test]
fn winding_estimate_survives_weak_bond_disorder() {
    let base = ChainSpec::new(3, 160.0, 800.0).unwrap();
    let clean = winding_estimate(&base, 4, 15.0).unwrap();
    let model = DisorderModel::new(20.0, 0.0, Distribution::UniformBounded, 2024).unwrap();
    let observable = Observable::WindingEstimate {
        initial_site: 4,
        t_avg_us: 15.0,
    };
    let stats = ensemble_statistics(&base, &model, 200, &observable).unwrap();
    assert!(
        (stats.mean[0] - clean).abs() < 0.2,
        "{} vs {clean}",
        stats.mean[0]
    );
    assert!(stats.std[0] > 0.0);
}

#[test]
fn gaussian_disorder_is_reproducible() {
    let base = ChainSpec::new(2, 300.0, 500.0).unwrap();
    let model = DisorderModel::new(10.0, 10.0, Distribution::Gaussian, 5).unwrap();
    let a = ensemble_statistics(&base, &model, 50, &Observable::Eigenvalues).unwrap();
    let b = ensemble_statistics(&base, &model, 50, &Observable::Eigenvalues).unwrap();
    assert_eq!(a, b);
}
