use std::f64::consts::PI;

use whichway::detector::{
    error_scaling, reconstruct_from_counts, simulate_all, simulate_counts, DetectorModel, DetectorSettings, Exposure,
    DEFAULT_COUPLING, DEFAULT_PIXEL_PITCH,
};
use whichway::trajectory::{final_position_deviation, integrate, seed, Scheme};
use whichway::{ApparatusConfig, WaveField};

fn settings(exposure: f64) -> DetectorSettings {
    DetectorSettings {
        coupling: DEFAULT_COUPLING,
        pixel_pitch: DEFAULT_PIXEL_PITCH,
        half_width: 6e-3,
        exposure,
        seed: 99,
    }
}

#[test]
fn standard_error_scales_as_inverse_root_counts() {
    let c = ApparatusConfig::reference();
    let field = WaveField::new(c.clone(), 0.0).unwrap();
    let model = DetectorModel::new(settings(1e4), &[&field]).unwrap();
    let rows = error_scaling(&model, 2.7e-4, &[1e2, 1e3, 1e4], 500, 4242).unwrap();
    let scaled: Vec<f64> = rows.iter().map(|r| r.standard_error * r.expected_counts.sqrt()).collect();
    let hi = scaled.iter().cloned().fold(0.0, f64::max);
    let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(hi / lo < 1.3, "{scaled:?}");
    for r in rows.iter().filter(|r| r.expected_counts >= 1e3) {
        let se_mean = r.standard_error / (r.repetitions as f64).sqrt();
        assert!((r.mean_estimate - r.true_momentum).abs() < 2.0 * se_mean, "{r:?}");
    }
    // same seed, same table
    assert_eq!(rows, error_scaling(&model, 2.7e-4, &[1e2, 1e3, 1e4], 500, 4242).unwrap());
}

#[test]
fn noiseless_counts_invert_exactly_on_every_plane() {
    let c = ApparatusConfig::reference().with_planes(vec![1.445, 3.0, 6.0, 8.612]).unwrap();
    let field = WaveField::new(c.clone(), PI).unwrap();
    let model = DetectorModel::new(settings(1e4), &[&field]).unwrap();
    for j in 0..4 {
        let z = c.planes()[j];
        let counts = simulate_counts(&field, j, &model, Exposure::Noiseless).unwrap();
        for (k, &x) in model.pixels().iter().enumerate() {
            let v = field.momentum(x, z).unwrap().v_over_c;
            let Ok(p) = model.invert(counts.right[k], counts.left[k]) else {
                continue;
            };
            let back = c.momentum_to_velocity_ratio(p);
            assert!((back - v).abs() <= 1e-12 * v.abs().max(1e-300), "plane {j} pixel {k}");
        }
    }
}

#[test]
fn infinite_exposure_matches_analytic_backend() {
    let c = ApparatusConfig::reference();
    let s = seed(&c, 99).unwrap();
    for phase in [0.0, PI] {
        let field = WaveField::new(c.clone(), phase).unwrap();
        let model = DetectorModel::new(settings(1e4), &[&field]).unwrap();
        let counts = simulate_all(&field, &model, Exposure::Noiseless).unwrap();
        let from_counts = reconstruct_from_counts(&counts, &model, &s, phase).unwrap();
        let analytic = integrate(&s, &field, Scheme::PaperEuler).unwrap();
        let dev = final_position_deviation(&from_counts, &analytic) / c.slit_separation();
        assert!(dev < 0.02, "phi {phase}: {dev}");
    }
}

#[test]
fn shot_noise_reconstruction_is_reproducible() {
    let c = ApparatusConfig::reference().with_planes(vec![1.445, 4.0, 8.612]).unwrap();
    let s = seed(&c, 20).unwrap();
    let field = WaveField::new(c.clone(), 0.0).unwrap();
    let model = DetectorModel::new(settings(1e3), &[&field]).unwrap();
    let a = simulate_all(&field, &model, Exposure::ShotNoise).unwrap();
    let b = simulate_all(&field, &model, Exposure::ShotNoise).unwrap();
    assert_eq!(a, b);
    let ea = reconstruct_from_counts(&a, &model, &s, 0.0).unwrap();
    let eb = reconstruct_from_counts(&b, &model, &s, 0.0).unwrap();
    for i in 0..s.len() {
        assert_eq!(ea.path(i), eb.path(i));
    }
}
