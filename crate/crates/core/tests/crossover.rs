//! When `Mδ²/2` exceeds `2σ²(E - ε)/v²` the kernel spectrum pins the
//! detection frequency at `ε_th`, and the amplitude-sum curve oscillates at
//! the threshold-dependent wavenumber `k_ij` instead of the standard one.

use std::f64::consts::{FRAC_PI_4, PI};

use oscmeas::analysis::{analytic_threshold_slope, analytic_wavenumber, fit_oscillation, FitOptions};
use oscmeas::engine::{detection_density, length_grid, DensityRequest};
use oscmeas::oscillation::{DetectionModel, MassEigenstate, MixingMatrix, OscillationScenario};

#[test]
fn heavy_product_tracks_threshold_wavenumber() {
    let states = vec![
        MassEigenstate::stable(0.1, 10.0).unwrap(),
        MassEigenstate::stable(0.2, 10.0).unwrap(),
    ];
    let scenario = OscillationScenario::new(states, MixingMatrix::rotation(FRAC_PI_4), 10.0, 0).unwrap();
    let lengths = length_grid(60.0, 60.0 + 3.0 * 2.0 * PI / 0.003, 181);
    let mut fitted = Vec::new();
    for threshold in [0.0, 2.0, 4.0] {
        let detection = DetectionModel::new(threshold, vec![1e4], 1.0, 1.0).unwrap();
        let curve =
            detection_density(&DensityRequest::new(scenario.clone(), detection.clone(), 1, lengths.clone()).unwrap())
                .unwrap();
        let fit = fit_oscillation(&curve, &scenario, &detection, &FitOptions::new(1)).unwrap();
        let analytic = analytic_wavenumber(&scenario, &detection, 0, 1);
        assert!(
            (fit.wavenumber / analytic.abs() - 1.0).abs() < 1e-3,
            "ε = {threshold}: {} vs {analytic}",
            fit.wavenumber
        );
        fitted.push(-fit.wavenumber);
    }
    let slope = (fitted[2] - fitted[0]) / 4.0;
    let analytic = analytic_threshold_slope(&scenario, 0, 1);
    assert!((slope / analytic - 1.0).abs() < 1e-2, "{slope} vs {analytic}");
}
