use std::f64::consts::PI;

use quadrature::double_exponential;
use whichway::trajectory::{final_position_deviation, integrate, seed, Scheme, SeedSet};
use whichway::{ApparatusConfig, WaveField};

/// Cumulative probability of the field at plane `z` up to `x`.
fn cdf(field: &WaveField, z: f64, x: f64, c: &ApparatusConfig) -> f64 {
    let lo = -(0.5 * c.slit_separation() + 14.0 * c.sigma_at(z));
    let panel = 0.25 * c.sigma_at(z);
    let n = ((x - lo) / panel).ceil().max(1.0) as usize;
    let h = (x - lo) / n as f64;
    (0..n)
        .map(|k| {
            let a = lo + k as f64 * h;
            double_exponential::integrate(|t| field.intensity(t, z).unwrap(), a, a + h, 1e-15).integral
        })
        .sum()
}

fn quantile(field: &WaveField, z: f64, target: f64, c: &ApparatusConfig) -> f64 {
    let reach = 0.5 * c.slit_separation() + 14.0 * c.sigma_at(z);
    let (mut a, mut b) = (-reach, reach);
    for _ in 0..90 {
        let m = 0.5 * (a + b);
        if cdf(field, z, m, c) < target {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[test]
fn flow_transports_quantiles() {
    // in one dimension the flow preserves the probability to the left of each
    // trajectory, so the endpoint follows from the two CDFs alone
    let c = ApparatusConfig::reference();
    let s = seed(&c, 99).unwrap();
    let (z1, last) = (c.planes()[0], c.planes().len() - 1);
    for phase in [0.0, PI] {
        let field = WaveField::new(c.clone(), phase).unwrap();
        let e = integrate(&s, &field, Scheme::Refined(16)).unwrap();
        for i in (0..s.len()).step_by(11) {
            let x = quantile(&field, c.planes()[last], cdf(&field, z1, s.positions()[i], &c), &c);
            let dev = (x - e.position(i, last)).abs() / c.slit_separation();
            assert!(dev < 1e-6, "phi {phase} seed {i}: {dev:e}");
        }
    }
}

#[test]
fn refined_scheme_converges_as_substeps_double() {
    let c = ApparatusConfig::reference();
    let s = seed(&c, 99).unwrap();
    for phase in [0.0, PI] {
        let field = WaveField::new(c.clone(), phase).unwrap();
        let runs: Vec<_> = [1u32, 2, 4, 8]
            .iter()
            .map(|&k| integrate(&s, &field, Scheme::Refined(k)).unwrap())
            .collect();
        let gaps: Vec<f64> = runs.windows(2).map(|w| final_position_deviation(&w[0], &w[1])).collect();
        for g in gaps.windows(2) {
            assert!(g[1] <= 0.5 * g[0], "phi {phase}: {gaps:?}");
        }
    }
}

#[test]
fn paper_scheme_tracks_refined_scheme() {
    let c = ApparatusConfig::reference();
    let s = seed(&c, 99).unwrap();
    for phase in [0.0, PI] {
        let field = WaveField::new(c.clone(), phase).unwrap();
        let a = integrate(&s, &field, Scheme::PaperEuler).unwrap();
        let b = integrate(&s, &field, Scheme::Refined(8)).unwrap();
        assert!(final_position_deviation(&a, &b) < 0.05 * c.slit_separation());
    }
}

#[test]
fn full_geometry_never_crosses() {
    let c = ApparatusConfig::reference();
    let s = seed(&c, 99).unwrap();
    for phase in [0.0, PI] {
        let field = WaveField::new(c.clone(), phase).unwrap();
        for scheme in [Scheme::PaperEuler, Scheme::Refined(4)] {
            let e = integrate(&s, &field, scheme).unwrap();
            assert_eq!(e.crossing_violations(), 0);
            assert!(e.skipped().is_empty());
        }
    }
}

#[test]
fn mirrored_seeds_give_mirrored_paths() {
    let c = ApparatusConfig::reference();
    let s = seed(&c, 99).unwrap();
    let m = s.mirrored();
    // quantile seeds are already symmetric
    assert_eq!(m, s);
    let shifted = SeedSet::from_positions(s.positions().iter().map(|x| x + 1.7e-4).collect(), s.plane()).unwrap();
    let flipped = shifted.mirrored();
    for phase in [0.0, PI] {
        let field = WaveField::new(c.clone(), phase).unwrap();
        let a = integrate(&shifted, &field, Scheme::PaperEuler).unwrap();
        let b = integrate(&flipped, &field, Scheme::PaperEuler).unwrap();
        let n = a.len();
        for i in 0..n {
            for j in 0..c.planes().len() {
                let (x, y) = (a.position(i, j), b.position(n - 1 - i, j));
                assert!((x + y).abs() <= 1e-10 * x.abs(), "phi {phase} seed {i} plane {j}");
            }
        }
    }
}

#[test]
fn quantile_weight_spread() {
    // the innermost seed of each packet spans the inter-packet gap, where the
    // midpoint rule overweights it; elsewhere the weights are near uniform
    let c = ApparatusConfig::reference();
    let s = seed(&c, 99).unwrap();
    for phase in [0.0, PI] {
        let field = WaveField::new(c.clone(), phase).unwrap();
        let w = s.weights(|x| field.intensity(x, c.planes()[0])).unwrap();
        let interior = &w[1..197];
        let max = interior.iter().cloned().fold(0.0, f64::max);
        let min = interior.iter().cloned().fold(f64::INFINITY, f64::min);
        let argmax = interior.iter().position(|&v| v == max).unwrap() + 1;
        assert!(argmax == 98 || argmax == 99, "{argmax}");
        assert!(max / min > 3.0 && max / min < 3.6, "{}", max / min);
        let core: Vec<f64> = w[10..89].iter().chain(&w[109..188]).copied().collect();
        let cmax = core.iter().cloned().fold(0.0, f64::max);
        let cmin = core.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(cmax / cmin < 1.2);
    }
}
