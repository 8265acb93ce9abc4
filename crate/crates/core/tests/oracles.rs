//! Derived reference values, each checked against an independent computation.

use std::f64::consts::PI;

use gabor_core::cert::{c_d, decay_constants, series_closed_bound, theta_max};
use gabor_core::count::{c_lv, count_lattice_in_cube, counting_bound, integers_in_interval};
use gabor_core::stft::stft_point;
use gabor_core::{GridSpec, Lattice, PolyWeight, Window};

/// Frozen `sup (1 + |x|)^2 |x^b d^a g|` maximum for the unit Gaussian.
const K_GAUSS: f64 = 8.336_049_880_851_354;
/// Frozen mesh threshold of the unit Gaussian at `eps = 1`.
const THETA0_GAUSS: f64 = 1.829_363_272_6e-4;

/// Maximum of `f` on `[0, 6]` by a fine scan refined with golden sections.
fn maximize(f: impl Fn(f64) -> f64) -> f64 {
    let steps = 60_000;
    let (mut best, mut at) = (f64::MIN, 0.0);
    for i in 0..=steps {
        let t = 6.0 * i as f64 / steps as f64;
        if f(t) > best {
            best = f(t);
            at = t;
        }
    }
    let (mut a, mut b) = (at - 1e-4, at + 1e-4);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let (c, d) = (b - r * (b - a), a + r * (b - a));
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    f((a + b) / 2.0).max(best)
}

#[test]
fn gaussian_weighted_sup() {
    // (1 + t)^2 exp(-pi t^2) peaks where pi t (1 + t) = 1
    let t = (-PI + (PI * PI + 4.0 * PI).sqrt()) / (2.0 * PI);
    let peak = (1.0 + t).powi(2) * (-PI * t * t).exp();
    assert!((peak - 1.284_02).abs() < 1e-5, "{peak}");
    let xg = maximize(|t| (1.0 + t).powi(2) * t * (-PI * t * t).exp());
    let spec = GridSpec::new(1, 8.0, 1 << 16).unwrap();
    let c = decay_constants(&Window::gaussian(1, 1.0), 1.0, &spec, true).unwrap();
    assert!((c.h - peak.max(xg)).abs() < 1e-6, "{} vs {}", c.h, peak.max(xg));
}

#[test]
fn gaussian_derivative_sup() {
    let g = |t: f64| (-PI * t * t).exp();
    let w = |t: f64| (1.0 + t).powi(2);
    // g' = -2 pi t g, x g' = -2 pi t^2 g, g'' = (4 pi^2 t^2 - 2 pi) g
    let candidates = [
        maximize(|t| w(t) * g(t)),
        maximize(|t| w(t) * t * g(t)),
        maximize(|t| w(t) * 2.0 * PI * t * g(t)),
        maximize(|t| w(t) * t * t * g(t)),
        maximize(|t| w(t) * 2.0 * PI * t * t * g(t)),
        maximize(|t| w(t) * (4.0 * PI * PI * t * t - 2.0 * PI).abs() * g(t)),
        maximize(|t| w(t) * t * (4.0 * PI * PI * t * t - 2.0 * PI).abs() * g(t)),
        maximize(|t| w(t) * 2.0 * PI * t * t * t * g(t)),
    ];
    let oracle = candidates.iter().copied().fold(0.0, f64::max);
    assert!((oracle - K_GAUSS).abs() < 1e-8, "{oracle}");
    let spec = GridSpec::new(1, 8.0, 1 << 16).unwrap();
    let c = decay_constants(&Window::gaussian(1, 1.0), 1.0, &spec, true).unwrap();
    assert!(
        c.k <= K_GAUSS * (1.0 + 1e-12) && c.k > K_GAUSS * (1.0 - 1e-6),
        "{}",
        c.k
    );
}

#[test]
fn mesh_threshold_by_bisection() {
    let c0 = 0.5f64.sqrt();
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = (lo + hi) / 2.0;
        if series_closed_bound(K_GAUSS, K_GAUSS, 1, 1.0, mid) < c0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((lo - THETA0_GAUSS).abs() < 1e-13, "{lo}");
    let t0 = theta_max(c0, K_GAUSS, K_GAUSS, 1, 1.0, 1.0).unwrap();
    assert!((t0 - lo).abs() < 1e-15);
}

#[test]
fn envelope_constant() {
    assert!((c_d(1) - 8.0 * (1.0 + 1.0 / PI).powi(2)).abs() < 1e-12);
    assert!((c_d(1) - 13.903_527_648_079_354).abs() < 1e-12);
    assert!((series_closed_bound(1.0, 1.0, 1, 1.0, 0.5) - 41.710_582_944_238_06).abs() < 1e-9);
}

#[test]
fn stft_reference_point() {
    let g = Window::gaussian(1, 1.0);
    let quad = GridSpec::new(1, 8.0, 512).unwrap();
    let v = stft_point(&g, &g, &[1.0, 0.0], &quad).unwrap();
    let exact = 0.5f64.sqrt() * (-PI / 2.0).exp();
    assert!((v.norm() - exact).abs() < 1e-12);
    assert!((exact - 0.147_00).abs() < 1e-5);
}

#[test]
fn counting_references() {
    let c = integers_in_interval(0.3, 2.7).unwrap();
    assert_eq!((c.count, c.bound), (2, 3));
    let c = integers_in_interval(1.0, 1.0).unwrap();
    assert_eq!((c.count, c.bound), (1, 1));
    assert_eq!(integers_in_interval(0.2, 0.9).unwrap().count, 0);
    let c = integers_in_interval(0.0, 5.0).unwrap();
    assert_eq!(c.count, c.bound);
    let rot = Lattice::new(&[vec![1.0, -1.0], vec![1.0, 1.0]]).unwrap();
    assert_eq!(counting_bound(&rot), 4);
    assert!(count_lattice_in_cube(&rot, &[0, 0]) <= 4);
    let id = Lattice::diagonal(&[1.0], &[1.0]).unwrap();
    // M_v = (1 + sqrt 2) for s = 1 on the unit square, times 4 closed-cube points
    assert!((c_lv(&id, &PolyWeight::new(1.0)) - 4.0 * (1.0 + 2f64.sqrt())).abs() < 1e-12);
}
